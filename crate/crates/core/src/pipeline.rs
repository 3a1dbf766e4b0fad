//! Embed, foliate, solve both flows and integrate the mass in one call.

use crate::embedding::{embed, EmbeddedSurface, GeneralOptions, Strategy};
use crate::error::Result;
use crate::flows::{solve_u, solve_w_vector, FlowOptions, USolution, VectorWSolution};
use crate::foliation::{Foliation, Schedule};
use crate::mass::{mass_report, MassOptions, MassReport};
use crate::surface::{effective_h_with_reference, SurfaceSpec};

#[derive(Debug, Clone, Copy)]
pub struct PipelineConfig {
    pub kappa: f64,
    pub strategy: Strategy,
    pub r_max: f64,
    pub steps: usize,
    pub general: GeneralOptions,
    pub flow: FlowOptions,
    pub mass: MassOptions,
}

impl PipelineConfig {
    /// r_max = 8/κ and 400 steps of the blended schedule.
    pub fn new(kappa: f64, strategy: Strategy) -> Self {
        PipelineConfig {
            kappa,
            strategy,
            r_max: 8.0 / kappa,
            steps: 400,
            general: GeneralOptions::default(),
            flow: FlowOptions::default(),
            mass: MassOptions::default(),
        }
    }

    /// Blended schedule with the area radius of the surface as length scale.
    pub fn schedule(&self, spec: &SurfaceSpec) -> Result<Schedule> {
        let length = (spec.area() / (4.0 * std::f64::consts::PI)).sqrt();
        Schedule::blended(self.kappa, length, self.r_max, self.steps)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub embedded: EmbeddedSurface,
    pub foliation: Foliation,
    pub calh0: Vec<f64>,
    pub u: USolution,
    pub w: VectorWSolution,
    pub report: MassReport,
}

/// The embedding and foliation stages.
pub fn embed_and_foliate(spec: &SurfaceSpec, cfg: &PipelineConfig) -> Result<(EmbeddedSurface, Foliation)> {
    let es = embed(spec, cfg.kappa, cfg.strategy, &cfg.general)?;
    let fol = Foliation::new(&es)?;
    Ok((es, fol))
}

/// Flows and mass from an existing embedding.
pub fn run_from_embedding(
    spec: &SurfaceSpec,
    es: EmbeddedSurface,
    fol: Foliation,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput> {
    let calh0 = effective_h_with_reference(spec, &es.mean_curvature())?;
    let schedule = cfg.schedule(spec)?;
    let u = solve_u(&fol, &calh0, &schedule, &cfg.flow)?;
    let w = solve_w_vector(&es, &fol, &u, &cfg.flow)?;
    let report = mass_report(&es, &fol, &u, &w, &cfg.mass)?;
    Ok(PipelineOutput { embedded: es, foliation: fol, calh0, u, w, report })
}

pub fn run(spec: &SurfaceSpec, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let (es, fol) = embed_and_foliate(spec, cfg)?;
    run_from_embedding(spec, es, fol, cfg)
}
