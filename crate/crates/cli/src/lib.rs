//! Front end for `quasilocal-core`: argument handling, caching, reports.

pub mod cache;
pub mod config;
pub mod report;
pub mod verify;

use std::fs;
use std::path::PathBuf;

use quasilocal_core::embedding::{embed, EmbeddedSurface, GeneralOptions, Strategy};
use quasilocal_core::flows::{solve_u, solve_w_vector, FlowOptions, USolution, VectorWSolution};
use quasilocal_core::foliation::Foliation;
use quasilocal_core::mass::{mass_report, MassOptions, MassReport};
use quasilocal_core::pipeline::PipelineConfig;
use quasilocal_core::surface::{check_admissibility, effective_h_with_reference, SurfaceSpec};
use quasilocal_core::{Error, Result};

use crate::cache::{Cache, Key, Status};
use crate::config::{Command, Options, RunConfig};
use crate::report::KeyValues;

/// What a finished command hands back to `main`.
#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: KeyValues,
    pub files: Vec<PathBuf>,
    pub cache: Vec<(&'static str, Status)>,
    pub failures: Vec<String>,
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }
}

fn embedding_key(cfg: &RunConfig, opts: &GeneralOptions) -> String {
    Key::new("embedding/1")
        .str(&cfg.input_sha256)
        .usize(cfg.ntheta)
        .usize(cfg.npsi)
        .f64(cfg.kappa)
        .str(cfg.strategy.as_str())
        .usize(opts.max_iter)
        .f64(opts.tol_defect)
        .f64(opts.gauge_weight)
        .finish()
}

fn flow_key(tag: &str, parent: &str, cfg: &RunConfig, f: &FlowOptions) -> String {
    Key::new(tag)
        .str(parent)
        .f64(cfg.r_max)
        .usize(cfg.steps)
        .f64(f.pcg_tol)
        .usize(f.pcg_max_iter)
        .usize(f.certificate as usize)
        .f64(f.certificate_tol)
        .usize(f.fourth_order as usize)
        .f64(f.correction_tol)
        .usize(f.correction_max_iter)
        .finish()
}

struct Stages {
    cache: Cache,
    statuses: Vec<(&'static str, Status)>,
}

impl Stages {
    fn embedding(&mut self, spec: &SurfaceSpec, cfg: &RunConfig, g: &GeneralOptions) -> Result<EmbeddedSurface> {
        let key = embedding_key(cfg, g);
        let cacheable = cfg.strategy != Strategy::ClosedForm;
        if cacheable {
            if let Some(es) = self.cache.load_embedding(&key) {
                self.statuses.push(("embedding", self.cache.status(true)));
                return Ok(es);
            }
        }
        let es = embed(spec, cfg.kappa, cfg.strategy, g)?;
        if !es.certified {
            return Err(Error::Embedding(format!(
                "isometry defect {:e} above tolerance {:e} after {} iterations",
                es.defect, cfg.tol_defect, es.iterations
            )));
        }
        es.require_horospherical()?;
        if cacheable {
            self.cache.store_embedding(&key, &es)?;
            self.statuses.push(("embedding", self.cache.status(false)));
        } else {
            self.statuses.push(("embedding", Status::Disabled));
        }
        Ok(es)
    }

    fn lapse(
        &mut self,
        spec: &SurfaceSpec,
        es: &EmbeddedSurface,
        fol: &Foliation,
        cfg: &RunConfig,
        pc: &PipelineConfig,
    ) -> Result<(String, USolution)> {
        let key = flow_key("lapse/1", &embedding_key(cfg, &pc.general), cfg, &pc.flow);
        if let Some(u) = self.cache.load_u(&key) {
            self.statuses.push(("u", self.cache.status(true)));
            return Ok((key, u));
        }
        let calh0 = effective_h_with_reference(spec, &es.mean_curvature())?;
        let u = solve_u(fol, &calh0, &pc.schedule(spec)?, &pc.flow)?;
        self.cache.store_u(&key, &u)?;
        self.statuses.push(("u", self.cache.status(false)));
        Ok((key, u))
    }

    fn transport(
        &mut self,
        ukey: &str,
        es: &EmbeddedSurface,
        fol: &Foliation,
        u: &USolution,
        cfg: &RunConfig,
        pc: &PipelineConfig,
    ) -> Result<VectorWSolution> {
        let key = flow_key("transport/1", ukey, cfg, &pc.flow);
        if let Some(w) = self.cache.load_w(&key, u) {
            self.statuses.push(("w", self.cache.status(true)));
            return Ok(w);
        }
        let w = solve_w_vector(es, fol, u, &pc.flow)?;
        self.cache.store_w(&key, &w)?;
        self.statuses.push(("w", self.cache.status(false)));
        Ok(w)
    }
}

pub fn pipeline_config(cfg: &RunConfig) -> PipelineConfig {
    let mut pc = PipelineConfig::new(cfg.kappa, cfg.strategy);
    pc.r_max = cfg.r_max;
    pc.steps = cfg.steps;
    pc.general.tol_defect = cfg.tol_defect;
    pc.mass = MassOptions { tol_mono: cfg.tol_mono, ..MassOptions::default() };
    pc
}

/// Run one subcommand and write its artefacts under `opts.out`.
pub fn run(cmd: Command, opts: &Options) -> Result<Outcome> {
    let (cfg, spec) = RunConfig::resolve(opts)?;
    let pc = pipeline_config(&cfg);
    fs::create_dir_all(&opts.out)?;
    let mut out = Writer { dir: opts.out.clone(), files: Vec::new() };
    let mut st = Stages { cache: Cache::new(&opts.out, !opts.no_cache), statuses: Vec::new() };
    let mut kv = KeyValues::default();
    report::header(&mut kv, cmd, &cfg);

    let adm = check_admissibility(&spec, cfg.kappa)?;
    report::admissibility(&mut kv, &adm);
    if !adm.pass {
        out.write("report.txt", &kv.render())?;
        return Err(Error::Admissibility(adm.summary()));
    }

    let es = st.embedding(&spec, &cfg, &pc.general)?;
    report::embedding(&mut kv, &es);
    out.write("embedding.tsv", &quasilocal_core::embedding::embedding_table(&es))?;
    let finish = |kv: KeyValues, mut out: Writer, st: Stages, failures: Vec<String>| -> Result<Outcome> {
        out.write("report.txt", &kv.render())?;
        let exit_code = if failures.is_empty() { 0 } else { 1 };
        Ok(Outcome { exit_code, report: kv, files: out.files, cache: st.statuses, failures })
    };
    if cmd.depth() == 1 {
        return finish(kv, out, st, Vec::new());
    }

    let fol = Foliation::new(&es)?;
    let schedule = pc.schedule(&spec)?;
    let length = (spec.area() / (4.0 * std::f64::consts::PI)).sqrt();
    report::foliation(&mut kv, &fol, &schedule, length)?;
    out.write("foliation.csv", &foliation_csv(&fol, &schedule))?;
    if cmd.depth() == 2 {
        return finish(kv, out, st, Vec::new());
    }

    let (ukey, u) = st.lapse(&spec, &es, &fol, &cfg, &pc)?;
    let u_diag = report::u_diagnostics(&fol, &u)?;
    report::lapse(&mut kv, &u, &u_diag);
    out.write("u.csv", &u.csv(cfg.csv_stride))?;
    if cmd.depth() == 3 {
        return finish(kv, out, st, Vec::new());
    }

    let w = st.transport(&ukey, &es, &fol, &u, &cfg, &pc)?;
    report::transport(&mut kv, &fol, &u, &w);
    out.write("w.csv", &w.csv(cfg.csv_stride))?;
    if cmd.depth() == 4 {
        return finish(kv, out, st, Vec::new());
    }

    let m: MassReport = mass_report(&es, &fol, &u, &w, &pc.mass)?;
    report::mass(&mut kv, &m);
    out.write("mass.csv", &m.csv())?;

    let mut failures = Vec::new();
    if cmd == Command::Verify {
        let battery = verify::run(&verify::Inputs {
            admissibility: &adm,
            embedded: &es,
            foliation: &fol,
            u: &u,
            u_diag: &u_diag,
            w: &w,
            mass: &m,
            flow: &pc.flow,
            seed: cfg.seed,
            tol_defect: cfg.tol_defect,
            tol_mono: cfg.tol_mono,
        })?;
        battery.write(&mut kv);
        failures = battery.failures().iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    }
    finish(kv, out, st, failures)
}

/// Per-leaf summary: r, t, rescaled area and the range of H₀.
pub fn foliation_csv(fol: &Foliation, schedule: &quasilocal_core::foliation::Schedule) -> String {
    let mut s = String::from("r,t,area_rescaled,h0_min,h0_max\n");
    let ones = vec![1.0; fol.grid.len()];
    for k in 0..schedule.len() {
        let f = fol.frame_at_s(schedule.s[k], schedule.r[k]);
        let area = fol.grid.integrate(&ones, &f.sd_tilde);
        let lo = f.h0.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = f.h0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        s.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            schedule.r[k],
            schedule.t(k),
            area,
            lo,
            hi
        ));
    }
    s
}
