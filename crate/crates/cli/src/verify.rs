//! The invariant battery behind `quasilocal verify`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quasilocal_core::embedding::EmbeddedSurface;
use quasilocal_core::flows::{solve_w_scalar, spinor_terminal, FlowOptions, USolution, VectorWSolution};
use quasilocal_core::foliation::Foliation;
use quasilocal_core::mass::MassReport;
use quasilocal_core::spinor::Spinor;
use quasilocal_core::surface::AdmissibilityReport;
use quasilocal_core::Result;

use crate::report::{self, num, KeyValues, UDiagnostics};

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Default, Clone)]
pub struct Battery {
    pub checks: Vec<Check>,
}

impl Battery {
    fn add(&mut self, name: &'static str, pass: bool, detail: impl Into<String>) {
        let status = if pass { Status::Pass } else { Status::Fail };
        self.checks.push(Check { name, status, detail: detail.into() });
    }

    fn skip(&mut self, name: &'static str, why: &str) {
        self.checks.push(Check { name, status: Status::Skip, detail: why.into() });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail).collect()
    }

    pub fn write(&self, kv: &mut KeyValues) {
        for c in &self.checks {
            let s = match c.status {
                Status::Pass => "pass",
                Status::Fail => "fail",
                Status::Skip => "skip",
            };
            kv.put(format!("verify.{}", c.name), format!("{s} ({})", c.detail));
        }
        kv.put("verify.passed", self.passed());
    }
}

pub struct Inputs<'a> {
    pub admissibility: &'a AdmissibilityReport,
    pub embedded: &'a EmbeddedSurface,
    pub foliation: &'a Foliation,
    pub u: &'a USolution,
    pub u_diag: &'a UDiagnostics,
    pub w: &'a VectorWSolution,
    pub mass: &'a MassReport,
    pub flow: &'a FlowOptions,
    pub seed: u64,
    pub tol_defect: f64,
    pub tol_mono: f64,
}

/// Spinors with independent uniform components in the unit square.
pub fn random_spinors(seed: u64, n: usize) -> Vec<Spinor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    (0..n).map(|_| Spinor::new(c(), c())).collect()
}

pub fn run(x: &Inputs) -> Result<Battery> {
    let mut b = Battery::default();
    let es = x.embedded;
    let k = es.kappa;

    b.add("admissibility", x.admissibility.pass, x.admissibility.summary());
    b.add("embedding.certified", es.certified, format!("defect {}", num(es.defect)));
    b.add("embedding.defect", es.defect <= x.tol_defect, format!("{} <= {:e}", num(es.defect), x.tol_defect));
    let hyp = report::hyperboloid_residual(es);
    b.add("embedding.hyperboloid", hyp < 1e-10, num(hyp));
    let (null, tmin) = report::gamma_null_residual(es);
    b.add("embedding.gamma0_future_null", null < 1e-10 && tmin > 0.0, format!("{} (min t {})", num(null), num(tmin)));
    let (margin, _) = es.horospherical_margin();
    b.add("embedding.horospherical", margin > 0.0, num(margin));

    let fol = x.foliation;
    let far = fol.frame_at(10.0 / k)?;
    let dev = far.h0.iter().map(|h| (h - 2.0 * k).abs()).fold(0.0, f64::max);
    b.add("foliation.mean_curvature_limit", dev < 1e-6, num(dev));
    let gauss = x.mass.gauss_residual;
    b.add("foliation.gauss_evolution", gauss < 1e-6, num(gauss));
    let mut hyp_leaf: f64 = 0.0;
    for r in [1.0 / k, 4.0 / k] {
        let f = fol.frame_at(r)?;
        for xs in &f.x_scaled {
            hyp_leaf = hyp_leaf.max((xs.norm_sq() * k * k + f.s).abs() / f.s);
        }
    }
    b.add("foliation.leaves_on_hyperboloid", hyp_leaf < 1e-10, num(hyp_leaf));

    let u = x.u;
    let d = x.u_diag;
    let umin = (0..u.schedule.len())
        .map(|i| u.u_at(i).into_iter().fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min);
    b.add("u.positive", umin > 0.0, num(umin));
    match &u.certificate {
        Some(c) => b.add("u.certificate", c.converged, format!("max difference {}", num(c.max_difference))),
        None => b.skip("u.certificate", "not computed"),
    }
    if d.trivial {
        b.skip("u.decay_exponent", "u is identically 1");
        b.skip("u.gauge_exponent", "u is identically 1");
    } else {
        match d.decay_exponent {
            Some(a) => b.add("u.decay_exponent", (2.9 * k..=3.1 * k).contains(&a), format!("{} (kappa {})", num(a), k)),
            None => b.add("u.decay_exponent", false, "no fit"),
        }
        match d.gauge_exponent {
            Some(a) => b.add("u.gauge_exponent", a >= 2.8 * k, num(a)),
            None => b.add("u.gauge_exponent", false, "no fit"),
        }
    }
    // u and the barrier agree only up to the time-stepping error of u.
    let barrier_tol = u.certificate.map_or(1e-6, |c| 2.0 * c.estimated_error).max(1e-10);
    for (name, bc) in [("u.barrier_lower", &d.lower), ("u.barrier_upper", &d.upper)] {
        if bc.applicable {
            b.add(
                name,
                bc.max_violation <= barrier_tol,
                format!("max violation {} <= {}", num(bc.max_violation), num(barrier_tol)),
            );
        } else {
            b.skip(name, "u0 on the other side of 1");
        }
    }

    let proj_scale = |p: &[Vec<f64>]| p.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut min_w: f64 = f64::INFINITY;
    let mut lin: f64 = 0.0;
    for a in random_spinors(x.seed, 3) {
        let terminal = spinor_terminal(es, &a);
        let ws = solve_w_scalar(fol, u, &terminal, x.flow)?;
        let proj = x.w.project(&a);
        let scale = proj_scale(&proj).max(f64::MIN_POSITIVE);
        for (row, prow) in ws.w_tilde.iter().zip(&proj) {
            for (v, q) in row.iter().zip(prow) {
                min_w = min_w.min(*v);
                lin = lin.max((v - q).abs() / scale);
            }
        }
    }
    b.add("w.positivity", min_w >= 0.0, format!("min W~ {}", num(min_w)));
    b.add("w.linearity", lin < 1e-8, num(lin));
    let w0 = x.w.w0();
    let future = w0.iter().all(|v| v.t > 0.0 && v.norm_sq() <= 1e-12 * v.t * v.t);
    b.add("w.w0_future_causal", future, format!("{} nodes", w0.len()));

    let m = x.mass;
    let finite = m.vector.iter().all(|v| v.is_finite()) && m.energy_momentum.p.is_finite();
    b.add("mass.finite", finite, format!("{} leaves", m.r.len()));
    b.add(
        "mass.monotone",
        m.monotonicity.pass,
        format!("max increment {} at leaf {}", num(m.monotonicity.max_increment), m.monotonicity.worst_index),
    );
    b.add("mass.drop", m.min_drop >= -x.tol_mono, num(m.min_drop));
    b.add("mass.identity", m.identity_residual < 1e-11, num(m.identity_residual));
    let limit_scale = m.directions.iter().map(|d| d.limit.rhs.abs()).fold(0.0, f64::max);
    if limit_scale > 0.0 {
        let fit = &m.limit_constant;
        b.add(
            "mass.limit",
            fit.max_residual < 0.05,
            format!("constant {} spread {}", num(fit.constant), num(fit.max_residual)),
        );
    } else {
        b.skip("mass.limit", "limit vanishes");
    }
    let h0 = es.mean_curvature();
    let below = u.calh0.iter().zip(&h0).all(|(c, h)| *c <= *h * (1.0 + 1e-12));
    let equal = u.calh0.iter().zip(&h0).all(|(c, h)| (c - h).abs() <= 1e-12 * h.abs());
    let em = &m.energy_momentum;
    if equal {
        let size = em.p.max_abs();
        b.add("mass.energy_momentum", size <= 1e-8, format!("|P| {} for matching mean curvature", num(size)));
    } else if below {
        b.add(
            "mass.energy_momentum",
            em.class.is_future_causal() && em.uniform_sign,
            format!("{} uniform sign {}", em.class, em.uniform_sign),
        );
    } else {
        b.skip("mass.energy_momentum", "mean curvature exceeds the reference somewhere");
    }
    Ok(b)
}
