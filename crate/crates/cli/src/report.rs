//! `key = value` report assembly.

use std::fmt::Display;

use quasilocal_core::embedding::{gauss_map, isometry_defect, EmbeddedSurface};
use quasilocal_core::flows::{
    barrier_check, decay_exponent, gauge_deviation, reaction_coefficient_bound, USolution, VectorWSolution,
};
use quasilocal_core::foliation::{Foliation, Schedule};
use quasilocal_core::mass::{gauss_evolution_check, MassReport};
use quasilocal_core::minkowski::{causal_class, CausalClass, FourVector};
use quasilocal_core::surface::AdmissibilityReport;
use quasilocal_core::Result;

use crate::config::{Command, RunConfig};

#[derive(Debug, Default, Clone)]
pub struct KeyValues {
    lines: Vec<(String, String)>,
}

pub fn num(v: f64) -> String {
    format!("{v:.12e}")
}

pub fn list(v: impl IntoIterator<Item = f64>) -> String {
    let items: Vec<String> = v.into_iter().map(num).collect();
    format!("[{}]", items.join(", "))
}

impl KeyValues {
    pub fn put(&mut self, key: impl Into<String>, value: impl Display) {
        self.lines.push((key.into(), value.to_string()));
    }

    pub fn num(&mut self, key: impl Into<String>, value: f64) {
        self.put(key, num(value));
    }

    /// Append pre-rendered `key = value` lines.
    pub fn extend_text(&mut self, text: &str) {
        for line in text.lines() {
            if let Some((k, v)) = line.split_once(" = ") {
                self.put(k.trim(), v.trim());
            }
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.lines {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(v);
            s.push('\n');
        }
        s
    }
}

pub fn header(kv: &mut KeyValues, cmd: Command, cfg: &RunConfig) {
    kv.put("tool.name", "quasilocal");
    kv.put("tool.version", env!("CARGO_PKG_VERSION"));
    kv.put("run.command", cmd.name());
    kv.put("config.hash", cfg.hash());
    kv.put("config.input_sha256", &cfg.input_sha256);
    kv.num("config.kappa", cfg.kappa);
    kv.put("config.ntheta", cfg.ntheta);
    kv.put("config.npsi", cfg.npsi);
    kv.num("config.r_max", cfg.r_max);
    kv.put("config.steps", cfg.steps);
    kv.put("config.strategy", cfg.strategy.as_str());
    kv.put("config.seed", cfg.seed);
    kv.put("config.tol_defect", format!("{:e}", cfg.tol_defect));
    kv.put("config.tol_mono", format!("{:e}", cfg.tol_mono));
    kv.put("config.csv_stride", cfg.csv_stride);

    kv.put("convention.signature", "(+,+,+,-), time component last");
    kv.put("convention.hyperboloid", "X.X = -1/kappa^2, X^t > 0");
    kv.put("convention.zeta", "(-(|a1|^2-|a2|^2), -2 Re(a1 conj a2), 2 Im(a1 conj a2), |a1|^2+|a2|^2)");
    kv.put("convention.light_cone_map", "gamma0 = kappa X + N");
    kv.put("convention.times", "t = -e^{-2 kappa r}/(4 kappa), tau = e^{-2 kappa r}/(4 kappa)");
    kv.put("convention.grid", "theta_i = (i + 1/2) pi / ntheta, psi_j = 2 pi j / npsi");

    kv.put("decision.lapse_variable", "v = e^{3 kappa r}(u - 1) is the evolved unknown");
    kv.put("decision.w_rescaling", "W~ = e^{-kappa r} W is the evolved unknown");
    kv.put("decision.w_orientation", "vector flow with terminal +gamma0 so W0 is future directed; scalar flow for a is -W.zeta(a)");
    kv.put("decision.killing_terminal", "lim e^{-kappa r} W = -gamma0.zeta(a)");
    kv.put("decision.mass_limit", "limit constant fitted from the data and reported as mass.limit_constant");
    kv.put("decision.schedule", "uniform in (1 - e^{-kappa r}) + (1 - e^{-r/l}), l = area radius");
    kv.put("decision.u_stepping", "variable-step BDF2 IMEX, Richardson-extrapolated Euler start");
    kv.put("decision.w_stepping", "implicit Euler, fourth-order spatial defect correction, monotone limiter");
    kv.put("decision.tail_extrapolation", "linear in e^{-kappa r} through the last two leaves");
    kv.put("decision.quadrature", "Fejer weights in theta, trapezoid in psi");
    kv.put("decision.riemannian_phi", "phi = H for time-symmetric data");
    kv.put("decision.barriers", "lower barrier when min u0 <= 1, upper barrier when max u0 >= 1");
}

pub fn admissibility(kv: &mut KeyValues, a: &AdmissibilityReport) {
    kv.put("admissibility.pass", a.pass);
    kv.num("admissibility.min_gauss_curvature", a.min_k);
    kv.put("admissibility.min_gauss_curvature_node", format!("[{}, {}]", a.min_k_node.0, a.min_k_node.1));
    kv.num("admissibility.kappa_floor", a.kappa_floor);
    kv.num("admissibility.min_mean_curvature_margin", a.min_h_margin);
    kv.num("admissibility.gauss_bonnet", a.gauss_bonnet);
    kv.put("admissibility.summary", a.summary());
}

/// max |X·X + 1/κ²| κ² over the nodes.
pub fn hyperboloid_residual(es: &EmbeddedSurface) -> f64 {
    let k2 = es.kappa * es.kappa;
    es.x.iter().map(|x| (x.norm_sq() * k2 + 1.0).abs()).fold(0.0, f64::max)
}

/// max |γ₀·γ₀| / (γ₀ᵗ)² and min γ₀ᵗ.
pub fn gamma_null_residual(es: &EmbeddedSurface) -> (f64, f64) {
    let g = gauss_map(es);
    let null = g.iter().map(|v| v.norm_sq().abs() / (v.t * v.t)).fold(0.0, f64::max);
    let tmin = g.iter().map(|v| v.t).fold(f64::INFINITY, f64::min);
    (null, tmin)
}

pub fn embedding(kv: &mut KeyValues, es: &EmbeddedSurface) {
    let (margin, node) = es.horospherical_margin();
    let (null, tmin) = gamma_null_residual(es);
    kv.put("embedding.strategy", es.strategy.as_str());
    kv.put("embedding.certified", es.certified);
    kv.num("embedding.defect", es.defect);
    kv.num("embedding.defect_recomputed", isometry_defect(es));
    kv.put("embedding.iterations", es.iterations);
    kv.put("embedding.closure", es.closure.map_or("none".to_string(), num));
    kv.num("embedding.horospherical_margin", margin);
    kv.put(
        "embedding.horospherical_margin_node",
        format!("[{}, {}]", node / es.grid.npsi, node % es.grid.npsi),
    );
    kv.num("embedding.hyperboloid_residual", hyperboloid_residual(es));
    kv.num("embedding.gamma0_null_residual", null);
    kv.num("embedding.gamma0_min_t", tmin);
}

/// Foliation diagnostics, including the excess of H₀ over 2κ at r = 10/κ.
pub fn foliation(kv: &mut KeyValues, fol: &Foliation, schedule: &Schedule, length: f64) -> Result<()> {
    let k = fol.kappa;
    let mu_min = fol.mu.iter().map(|m| m[0].min(m[1])).fold(f64::INFINITY, f64::min);
    let mu_max = fol.mu.iter().map(|m| m[0].max(m[1])).fold(f64::NEG_INFINITY, f64::max);
    let probe = fol.frame_at(10.0 / k)?;
    let h0_dev = probe.h0.iter().map(|h| (h - 2.0 * k).abs()).fold(0.0, f64::max);
    let dr = 1e-3 / k;
    let frames = (0..5).map(|i| fol.frame_at(i as f64 * dr)).collect::<Result<Vec<_>>>()?;
    let gauss = gauss_evolution_check(&frames)?.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let limit = fol.limit_frame();
    let limit_area = fol.grid.integrate(&vec![1.0; fol.grid.len()], &limit.sd_tilde);
    kv.num("foliation.mu_min", mu_min);
    kv.num("foliation.mu_max", mu_max);
    kv.num("foliation.mean_curvature_excess_at_10_over_kappa", h0_dev);
    kv.num("foliation.gauss_evolution_residual", gauss);
    kv.num("foliation.limit_area_rescaled", limit_area);
    kv.put("foliation.schedule", "blended");
    kv.num("foliation.schedule_length", length);
    kv.put("foliation.leaves", schedule.len());
    kv.num("foliation.first_step", schedule.r[1] - schedule.r[0]);
    kv.num("foliation.last_step", schedule.r[schedule.len() - 1] - schedule.r[schedule.len() - 2]);
    Ok(())
}

pub struct UDiagnostics {
    pub decay_exponent: Option<f64>,
    pub gauge_exponent: Option<f64>,
    pub lower: quasilocal_core::flows::BarrierCheck,
    pub upper: quasilocal_core::flows::BarrierCheck,
    pub trivial: bool,
}

pub fn u_diagnostics(fol: &Foliation, u: &USolution) -> Result<UDiagnostics> {
    let k = u.kappa;
    let r = &u.schedule.r;
    let r_hi = u.schedule.r_max();
    let sup = u.sup_deviation();
    let trivial = sup.iter().all(|v| *v == 0.0);
    let gauge = gauge_deviation(fol, u);
    let (lower, upper) = barrier_check(fol, u)?;
    Ok(UDiagnostics {
        decay_exponent: decay_exponent(r, &sup, 2.0 / k, r_hi),
        gauge_exponent: decay_exponent(r, &gauge.a_minus_identity, 2.0 / k, r_hi),
        lower,
        upper,
        trivial,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or("none".to_string(), num)
}

pub fn lapse(kv: &mut KeyValues, u: &USolution, d: &UDiagnostics) {
    let u0 = u.u0();
    let range = |f: &[f64]| {
        [f.iter().cloned().fold(f64::INFINITY, f64::min), f.iter().cloned().fold(f64::NEG_INFINITY, f64::max)]
    };
    kv.put("u.u0_range", list(range(&u0)));
    kv.put("u.v_infty_range", list(range(u.v_infty())));
    kv.put("u.pcg_iterations", u.pcg_iterations);
    match &u.certificate {
        Some(c) => {
            kv.put("u.certificate.converged", c.converged);
            kv.put("u.certificate.coarse_steps", c.coarse_steps);
            kv.num("u.certificate.max_difference", c.max_difference);
            kv.num("u.certificate.estimated_error", c.estimated_error);
            kv.num("u.certificate.scale", c.scale);
        }
        None => kv.put("u.certificate", "none"),
    }
    kv.put("u.trivial", d.trivial);
    kv.put("u.decay_exponent", opt(d.decay_exponent));
    kv.put("u.gauge_exponent", opt(d.gauge_exponent));
    for (name, b) in [("lower", &d.lower), ("upper", &d.upper)] {
        kv.put(format!("u.barrier.{name}.applicable"), b.applicable);
        kv.put(format!("u.barrier.{name}.max_violation"), opt(b.applicable.then_some(b.max_violation)));
    }
}

fn class_counts(kv: &mut KeyValues, prefix: &str, v: &[FourVector]) {
    let classes = [
        CausalClass::FutureTimelike,
        CausalClass::FutureNull,
        CausalClass::PastTimelike,
        CausalClass::PastNull,
        CausalClass::Spacelike,
        CausalClass::Zero,
    ];
    let tagged: Vec<CausalClass> = v.iter().map(|w| causal_class(w, 1e-12 * w.max_abs().max(1.0))).collect();
    for c in classes {
        kv.put(format!("{prefix}.{c}"), tagged.iter().filter(|t| **t == c).count());
    }
}

pub fn transport(kv: &mut KeyValues, fol: &Foliation, u: &USolution, w: &VectorWSolution) {
    let w0 = w.w0();
    let neg: Vec<FourVector> = w0.iter().map(|v| -*v).collect();
    kv.put("w.limited_nodes", w.components.iter().map(|c| c.limited_nodes).sum::<usize>());
    kv.put(
        "w.correction_iterations_max",
        w.components.iter().map(|c| c.correction_iterations).max().unwrap_or(0),
    );
    kv.num("w.reaction_coefficient_max", reaction_coefficient_bound(fol, u));
    class_counts(kv, "w.w0_class", &w0);
    class_counts(kv, "w.minus_w0_class", &neg);
}

pub fn mass(kv: &mut KeyValues, m: &MassReport) {
    kv.extend_text(&m.to_text());
}
