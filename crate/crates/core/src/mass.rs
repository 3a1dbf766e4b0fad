//! The mass functional m_W(r) = ∫_{Σ_r}(H₀ − ℋ_r) W dA_r, its monotonicity and
//! limit checks, and the energy-momentum vector P = ∫_{Σ₀}(H₀ − ℋ) W⁰ dA₀.
//!
//! Everything is evaluated in rescaled variables: with v = e^{3κr}(u − 1),
//! W̃ = e^{−κr}W and dÃ = e^{−2κr}dA_r the integrand is H₀ v W̃ dÃ / u, which
//! stays bounded as r → ∞.

use std::fmt::Write as _;

use serde::Serialize;

use crate::embedding::{gauss_map, EmbeddedSurface};
use crate::error::{Error, Result};
use crate::flows::{FlowField, FlowKind, USolution, VectorWSolution};
use crate::foliation::{Foliation, FoliationFrame};
use crate::grid::LatLonGrid;
use crate::minkowski::{causal_class, fibonacci_sphere, CausalClass, FourVector};
use crate::spinor::{zeta, Spinor};

/// m_W sampled on a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct MassProfile {
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub m: Vec<f64>,
}

/// H₀ v / u per schedule index, paired with the rescaled area element.
struct Kernels {
    q: Vec<Vec<f64>>,
    sd: Vec<Vec<f64>>,
    weights: Vec<f64>,
    grid: LatLonGrid,
}

impl Kernels {
    fn new(fol: &Foliation, usol: &USolution) -> Result<Self> {
        if usol.grid != fol.grid {
            return Err(Error::ScheduleMismatch("lapse and foliation live on different grids".into()));
        }
        if usol.kappa != fol.kappa {
            return Err(Error::ScheduleMismatch(format!(
                "lapse solved with kappa = {} but foliation has kappa = {}",
                usol.kappa, fol.kappa
            )));
        }
        let sch = &usol.schedule;
        let mut q = Vec::with_capacity(sch.len());
        let mut sd = Vec::with_capacity(sch.len());
        for k in 0..sch.len() {
            let frame = fol.frame_at_s(sch.s[k], sch.r[k]);
            let u = usol.u_at(k);
            q.push((0..u.len()).map(|p| frame.h0[p] * usol.v[k][p] / u[p]).collect());
            sd.push(frame.sd_tilde);
        }
        Ok(Kernels { q, sd, weights: fol.grid.theta_weights(), grid: fol.grid })
    }

    fn integrate(&self, k: usize, w_tilde: &[f64]) -> f64 {
        let f: Vec<f64> = self.q[k].iter().zip(w_tilde).map(|(a, b)| a * b).collect();
        self.grid.integrate_with(&self.weights, &f, &self.sd[k])
    }
}

fn check_field(usol: &USolution, grid: &LatLonGrid, schedule: &crate::foliation::Schedule) -> Result<()> {
    if !schedule.same_as(&usol.schedule) {
        return Err(Error::ScheduleMismatch(format!(
            "transport field has {} samples up to r = {}, lapse has {} up to r = {}",
            schedule.len(),
            schedule.r_max(),
            usol.schedule.len(),
            usol.schedule.r_max()
        )));
    }
    if grid != &usol.grid {
        return Err(Error::ScheduleMismatch("transport field and lapse live on different grids".into()));
    }
    Ok(())
}

/// m_W(r) for a scalar transport field holding W̃ = e^{−κr}W.
pub fn mass_profile(fol: &Foliation, usol: &USolution, w: &FlowField) -> Result<MassProfile> {
    if w.kind != FlowKind::WScalar {
        return Err(Error::InvalidInput(format!("mass needs a scalar W field, got {:?}", w.kind)));
    }
    check_field(usol, &w.grid, &w.schedule)?;
    let ker = Kernels::new(fol, usol)?;
    let m = (0..w.values.len()).map(|k| ker.integrate(k, &w.values[k])).collect();
    Ok(MassProfile { r: usol.schedule.r.clone(), s: usol.schedule.s.clone(), m })
}

/// ∫_{Σ_r}(H₀ − ℋ_r) 𝐖 dA_r for the vector flow. For a spinor a the scalar
/// profile is −m⃗·ζ(a), and the r = 0 sample is P.
pub fn mass_profile_vector(fol: &Foliation, usol: &USolution, w: &VectorWSolution) -> Result<Vec<FourVector>> {
    let c0 = &w.components[0];
    check_field(usol, &c0.grid, &c0.schedule)?;
    let ker = Kernels::new(fol, usol)?;
    Ok((0..c0.w_tilde.len())
        .map(|k| {
            let c: Vec<f64> = w.components.iter().map(|c| ker.integrate(k, &c.w_tilde[k])).collect();
            FourVector::new(c[0], c[1], c[2], c[3])
        })
        .collect())
}

/// −m⃗·ζ(a) per sample.
pub fn project_profile(m: &[FourVector], a: &Spinor) -> Vec<f64> {
    let z = zeta(a);
    m.iter().map(|v| -v.dot(&z)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Monotonicity {
    pub pass: bool,
    /// Largest forward difference m[k+1] − m[k] (negative for a strictly
    /// decreasing profile).
    pub max_increment: f64,
    /// Index k+1 of the sample where increment / (1 + |m_k|) is largest.
    pub worst_index: usize,
}

/// Pass iff every forward difference is at most tol·(1 + |m_k|).
pub fn monotonicity_check(m: &[f64], tol: f64) -> Result<Monotonicity> {
    if m.len() < 3 {
        return Err(Error::InvalidInput(format!("monotonicity needs at least 3 samples, got {}", m.len())));
    }
    let mut worst = (f64::NEG_INFINITY, 0usize, f64::NEG_INFINITY);
    let mut pass = true;
    for k in 0..m.len() - 1 {
        let d = m[k + 1] - m[k];
        let scaled = d / (1.0 + m[k].abs());
        if !(d <= tol * (1.0 + m[k].abs())) {
            pass = false;
        }
        if scaled > worst.0 {
            worst = (scaled, k + 1, d);
        }
    }
    Ok(Monotonicity { pass, max_increment: worst.2, worst_index: worst.1 })
}

/// Value at σ = 0 of the line through the last two samples of y(σ), σ = √s.
pub fn extrapolate_tail(s: &[f64], y: &[f64]) -> f64 {
    let n = y.len();
    if n < 2 {
        return y.last().copied().unwrap_or(0.0);
    }
    let (s1, s2) = (s[n - 2].sqrt(), s[n - 1].sqrt());
    if s1 == s2 {
        return y[n - 1];
    }
    y[n - 1] - s2 * (y[n - 2] - y[n - 1]) / (s1 - s2)
}

/// v_∞ extrapolated node by node with `extrapolate_tail`.
pub fn extrapolated_v_infty(usol: &USolution) -> Vec<f64> {
    let n = usol.v.len();
    let s = &usol.schedule.s;
    (0..usol.grid.len())
        .map(|p| {
            if n < 2 {
                return usol.v[n - 1][p];
            }
            extrapolate_tail(&s[n - 2..], &[usol.v[n - 2][p], usol.v[n - 1][p]])
        })
        .collect()
}

/// −2κ ∫ v_∞ γ₀·ζ(a) dA_∞ with `sd_limit` the area density of the limit metric.
pub fn limit_rhs(
    grid: &LatLonGrid,
    kappa: f64,
    v_infty: &[f64],
    gamma0: &[FourVector],
    sd_limit: &[f64],
    a: &Spinor,
) -> f64 {
    let z = zeta(a);
    let f: Vec<f64> = v_infty.iter().zip(gamma0).map(|(v, g)| v * g.dot(&z)).collect();
    -2.0 * kappa * grid.integrate(&f, sd_limit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// |lhs − rhs| / max(|lhs|, |rhs|), zero when both vanish.
    pub residual: f64,
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Compare the extrapolated tail of m_W with the closed-form limit.
pub fn limit_check(
    grid: &LatLonGrid,
    kappa: f64,
    v_infty: &[f64],
    gamma0: &[FourVector],
    sd_limit: &[f64],
    a: &Spinor,
    profile: &MassProfile,
) -> LimitCheck {
    let lhs = extrapolate_tail(&profile.s, &profile.m);
    let rhs = limit_rhs(grid, kappa, v_infty, gamma0, sd_limit, a);
    LimitCheck { lhs, rhs, residual: relative_gap(lhs, rhs) }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantFit {
    /// Least-squares C in lhs ≈ C·rhs.
    pub constant: f64,
    /// max |lhs − C rhs| / |lhs| over the pairs with non-zero lhs.
    pub max_residual: f64,
}

pub fn fit_constant(checks: &[LimitCheck]) -> ConstantFit {
    let num: f64 = checks.iter().map(|c| c.lhs * c.rhs).sum();
    let den: f64 = checks.iter().map(|c| c.rhs * c.rhs).sum();
    let constant = if den > 0.0 { num / den } else { 1.0 };
    let max_residual = checks
        .iter()
        .filter(|c| c.lhs != 0.0)
        .map(|c| (c.lhs - constant * c.rhs).abs() / c.lhs.abs())
        .fold(0.0, f64::max);
    ConstantFit { constant, max_residual }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyMomentum {
    pub p: FourVector,
    pub class: CausalClass,
    /// ∫|H₀ − ℋ| max_c |W⁰_c| dA₀, the size classification is measured against.
    pub scale: f64,
    /// P·ζ(a) for the spinors of `spinor_battery`.
    pub pairings: Vec<f64>,
    /// All pairings share a sign up to 1e-10·scale.
    pub uniform_sign: bool,
}

/// Spinors whose ζ images are `n` Fibonacci null directions.
pub fn spinor_battery(n: usize) -> Vec<Spinor> {
    fibonacci_sphere(n).into_iter().map(Spinor::from_null_direction).collect()
}

/// P = ∫_{Σ₀}(H₀ − ℋ) W⁰ dA₀ with ℋ = H₀/u(·, 0).
pub fn energy_momentum(frame0: &FoliationFrame, u0: &[f64], w0: &[FourVector]) -> EnergyMomentum {
    let grid = frame0.grid;
    let wts = grid.theta_weights();
    let dh: Vec<f64> = frame0.h0.iter().zip(u0).map(|(h, u)| h - h / u).collect();
    let comp = |c: usize| {
        let f: Vec<f64> = dh.iter().zip(w0).map(|(d, w)| d * w.to_array()[c]).collect();
        grid.integrate_with(&wts, &f, &frame0.sd_tilde)
    };
    let p = FourVector::new(comp(0), comp(1), comp(2), comp(3));
    let mag: Vec<f64> = dh.iter().zip(w0).map(|(d, w)| d.abs() * w.max_abs()).collect();
    let scale = grid.integrate_with(&wts, &mag, &frame0.sd_tilde);
    let class = if scale > 0.0 { causal_class(&(p * (1.0 / scale)), 1e-10) } else { CausalClass::Zero };
    let pairings: Vec<f64> = spinor_battery(64).iter().map(|a| p.dot(&zeta(a))).collect();
    let tol = 1e-10 * scale;
    let uniform_sign = pairings.iter().all(|v| *v <= tol) || pairings.iter().all(|v| *v >= -tol);
    EnergyMomentum { p, class, scale, pairings, uniform_sign }
}

/// (Rʳ+4κ²)(1−u⁻¹) + ½(u⁻¹−u)(Rʳ+6κ²) + ½u⁻¹(u−1)²(Rʳ+2κ²) + 2κ²(u−1),
/// which vanishes identically.
pub fn identity_check(u: f64, rr: f64, kappa: f64) -> f64 {
    let k2 = kappa * kappa;
    let ui = 1.0 / u;
    (rr + 4.0 * k2) * (1.0 - ui)
        + 0.5 * (ui - u) * (rr + 6.0 * k2)
        + 0.5 * ui * (u - 1.0) * (u - 1.0) * (rr + 2.0 * k2)
        + 2.0 * k2 * (u - 1.0)
}

/// Per-node residual of ∂H₀/∂r + H₀² − Rʳ − 4κ² on the middle frame.
///
/// Three frames give the (possibly non-uniform) three-point derivative; five
/// equally spaced frames give the fourth-order five-point one.
pub fn gauss_evolution_check(frames: &[FoliationFrame]) -> Result<Vec<f64>> {
    let n = frames.len();
    if n != 3 && n != 5 {
        return Err(Error::InvalidInput(format!("need 3 or 5 consecutive frames, got {n}")));
    }
    let r: Vec<f64> = frames.iter().map(|f| f.r).collect();
    if r.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("frames must have increasing radii".into()));
    }
    let mid = &frames[n / 2];
    let k2 = mid.kappa * mid.kappa;
    let np = mid.h0.len();
    let dh: Vec<f64> = if n == 3 {
        let (h1, h2) = (r[1] - r[0], r[2] - r[1]);
        let (c0, c1, c2) = (-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2)));
        (0..np).map(|p| c0 * frames[0].h0[p] + c1 * frames[1].h0[p] + c2 * frames[2].h0[p]).collect()
    } else {
        let h = (r[4] - r[0]) / 4.0;
        if r.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
            return Err(Error::InvalidInput("five-point check needs equally spaced frames".into()));
        }
        (0..np)
            .map(|p| {
                let f = |i: usize| frames[i].h0[p];
                (f(0) - 8.0 * f(1) + 8.0 * f(3) - f(4)) / (12.0 * h)
            })
            .collect()
    };
    Ok((0..np).map(|p| dh[p] + mid.h0[p] * mid.h0[p] - mid.rr[p] - 4.0 * k2).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassOptions {
    pub tol_mono: f64,
    /// Number of Fibonacci directions for the monotonicity sweep and P·ζ.
    pub battery: usize,
}

impl Default for MassOptions {
    fn default() -> Self {
        MassOptions { tol_mono: 1e-6, battery: 64 }
    }
}

/// A named spinor used in the report tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub label: &'static str,
    pub spinor: Spinor,
}

/// The six axis null directions (±e_i, 1).
pub fn axis_directions() -> Vec<Direction> {
    let axes: [(&'static str, [f64; 3]); 6] = [
        ("+x1", [1.0, 0.0, 0.0]),
        ("-x1", [-1.0, 0.0, 0.0]),
        ("+x2", [0.0, 1.0, 0.0]),
        ("-x2", [0.0, -1.0, 0.0]),
        ("+x3", [0.0, 0.0, 1.0]),
        ("-x3", [0.0, 0.0, -1.0]),
    ];
    axes.iter().map(|(l, y)| Direction { label: l, spinor: Spinor::from_null_direction(*y) }).collect()
}

#[derive(Debug, Clone)]
pub struct DirectionSummary {
    pub label: &'static str,
    pub zeta: FourVector,
    pub m: Vec<f64>,
    pub limit: LimitCheck,
    pub monotonicity: Monotonicity,
}

#[derive(Debug, Clone)]
pub struct MassReport {
    pub kappa: f64,
    pub r: Vec<f64>,
    pub t: Vec<f64>,
    /// m⃗(r) = ∫(H₀ − ℋ_r)𝐖 dA_r.
    pub vector: Vec<FourVector>,
    pub directions: Vec<DirectionSummary>,
    pub limit_constant: ConstantFit,
    pub energy_momentum: EnergyMomentum,
    /// Worst monotonicity result over the full direction battery.
    pub monotonicity: Monotonicity,
    pub tol_mono: f64,
    /// m_W(0) − lim m_W minimised over the battery (non-negative when monotone).
    pub min_drop: f64,
    pub identity_residual: f64,
    pub gauss_residual: f64,
}

/// Assemble every mass diagnostic for a solved pipeline.
pub fn mass_report(
    es: &EmbeddedSurface,
    fol: &Foliation,
    usol: &USolution,
    w: &VectorWSolution,
    opts: &MassOptions,
) -> Result<MassReport> {
    let sch = &usol.schedule;
    let vector = mass_profile_vector(fol, usol, w)?;
    let gamma = gauss_map(es);
    let limit = fol.limit_frame();
    let v_inf = extrapolated_v_infty(usol);

    let mut directions = Vec::new();
    for d in axis_directions() {
        let m = project_profile(&vector, &d.spinor);
        let prof = MassProfile { r: sch.r.clone(), s: sch.s.clone(), m };
        let lim = limit_check(&fol.grid, fol.kappa, &v_inf, &gamma, &limit.sd_tilde, &d.spinor, &prof);
        directions.push(DirectionSummary {
            label: d.label,
            zeta: zeta(&d.spinor),
            monotonicity: monotonicity_check(&prof.m, opts.tol_mono)?,
            m: prof.m,
            limit: lim,
        });
    }
    let limit_constant = fit_constant(&directions.iter().map(|d| d.limit).collect::<Vec<_>>());

    let mut monotonicity: Option<Monotonicity> = None;
    let mut min_drop = f64::INFINITY;
    for a in spinor_battery(opts.battery) {
        let m = project_profile(&vector, &a);
        let mono = monotonicity_check(&m, opts.tol_mono)?;
        let drop = m[0] - extrapolate_tail(&sch.s, &m);
        min_drop = min_drop.min(drop);
        let worse = match &monotonicity {
            None => true,
            Some(cur) => {
                (!mono.pass && cur.pass) || (mono.pass == cur.pass && mono.max_increment > cur.max_increment)
            }
        };
        if worse {
            monotonicity = Some(mono);
        }
    }
    let monotonicity = monotonicity.ok_or_else(|| Error::InvalidInput("empty direction battery".into()))?;

    let frame0 = fol.frame_at_s(1.0, 0.0);
    let energy_momentum = energy_momentum(&frame0, &usol.u0(), &w.w0());

    let mut identity_residual = 0.0f64;
    for k in (0..sch.len()).step_by((sch.len() / 8).max(1)) {
        let frame = fol.frame_at_s(sch.s[k], sch.r[k]);
        for (u, rr) in usol.u_at(k).iter().zip(&frame.rr) {
            identity_residual = identity_residual.max(identity_check(*u, *rr, fol.kappa).abs());
        }
    }

    let dr = 1e-3 / fol.kappa;
    let frames: Vec<FoliationFrame> =
        (0..5).map(|i| fol.frame_at(i as f64 * dr)).collect::<Result<_>>()?;
    let gauss_residual = gauss_evolution_check(&frames)?.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    Ok(MassReport {
        kappa: fol.kappa,
        r: sch.r.clone(),
        t: (0..sch.len()).map(|k| sch.t(k)).collect(),
        vector,
        directions,
        limit_constant,
        energy_momentum,
        monotonicity,
        tol_mono: opts.tol_mono,
        min_drop,
        identity_residual,
        gauss_residual,
    })
}

fn list(v: impl IntoIterator<Item = f64>) -> String {
    let items: Vec<String> = v.into_iter().map(|x| format!("{x:.12e}")).collect();
    format!("[{}]", items.join(", "))
}

impl MassReport {
    /// `key = value` lines; arrays in brackets.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let em = &self.energy_momentum;
        let p = em.p;
        let _ = writeln!(s, "mass.samples = {}", self.r.len());
        let _ = writeln!(s, "mass.P = {}", list(p.to_array()));
        let _ = writeln!(s, "mass.P_class = {}", em.class);
        let _ = writeln!(s, "mass.P_norm_sq = {:.12e}", p.norm_sq());
        let _ = writeln!(s, "mass.P_scale = {:.12e}", em.scale);
        let _ = writeln!(
            s,
            "mass.P_pairing_range = {}",
            list([
                em.pairings.iter().cloned().fold(f64::INFINITY, f64::min),
                em.pairings.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            ])
        );
        let _ = writeln!(s, "mass.P_pairing_uniform_sign = {}", em.uniform_sign);
        let _ = writeln!(s, "mass.monotone = {}", self.monotonicity.pass);
        let _ = writeln!(s, "mass.tol_mono = {:e}", self.tol_mono);
        let _ = writeln!(s, "mass.max_increment = {:.6e}", self.monotonicity.max_increment);
        let _ = writeln!(s, "mass.worst_index = {}", self.monotonicity.worst_index);
        let _ = writeln!(s, "mass.min_drop = {:.12e}", self.min_drop);
        let _ = writeln!(s, "mass.limit_constant = {:.12e}", self.limit_constant.constant);
        let _ = writeln!(s, "mass.limit_constant_spread = {:.6e}", self.limit_constant.max_residual);
        let _ = writeln!(s, "mass.identity_residual = {:.6e}", self.identity_residual);
        let _ = writeln!(s, "mass.gauss_residual = {:.6e}", self.gauss_residual);
        for d in &self.directions {
            let key = format!("mass.direction.{}", d.label);
            let _ = writeln!(s, "{key}.zeta = {}", list(d.zeta.to_array()));
            let _ = writeln!(s, "{key}.m0 = {:.12e}", d.m[0]);
            let _ = writeln!(s, "{key}.limit_lhs = {:.12e}", d.limit.lhs);
            let _ = writeln!(s, "{key}.limit_rhs = {:.12e}", d.limit.rhs);
            let _ = writeln!(s, "{key}.limit_residual = {:.6e}", d.limit.residual);
            let _ = writeln!(s, "{key}.monotone = {}", d.monotonicity.pass);
        }
        let _ = writeln!(s, "mass.r = {}", list(self.r.iter().cloned()));
        for (c, name) in ["1", "2", "3", "t"].iter().enumerate() {
            let _ = writeln!(s, "mass.vector.{name} = {}", list(self.vector.iter().map(|v| v.to_array()[c])));
        }
        s
    }

    /// Columns r, t, m_W (first axis direction), then the components of m⃗.
    pub fn csv(&self) -> String {
        let mut s = String::from("r,t,m_W,m_1,m_2,m_3,m_t\n");
        let m = &self.directions[0].m;
        for k in 0..self.r.len() {
            let v = self.vector[k];
            let _ = writeln!(
                s,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.r[k], self.t[k], m[k], v.x1, v.x2, v.x3, v.t
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_vanishes_at_known_points() {
        assert_eq!(identity_check(1.0, 3.7, 0.4), 0.0);
        assert!(identity_check(2.0, 3.0, 1.0).abs() < 1e-13);
    }

    #[test]
    fn monotonicity_flags_a_bump() {
        let mut m: Vec<f64> = (0..20).map(|k| (-(k as f64) * 1e-4).exp()).collect();
        assert!(monotonicity_check(&m, 1e-6).unwrap().pass);
        m[7] += 1e-3;
        let rep = monotonicity_check(&m, 1e-6).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.worst_index, 7);
        assert!(monotonicity_check(&[0.0; 5], 0.0).unwrap().pass);
        assert!(monotonicity_check(&[1.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn tail_extrapolation_is_exact_for_lines_in_sigma() {
        let s: Vec<f64> = [0.3f64, 0.2, 0.1].iter().map(|x| x * x).collect();
        let y: Vec<f64> = s.iter().map(|v| 2.0 - 5.0 * v.sqrt()).collect();
        assert!((extrapolate_tail(&s, &y) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn constant_fit() {
        let checks: Vec<LimitCheck> =
            [1.0, -2.0, 3.0].iter().map(|r| LimitCheck { lhs: 1.5 * r, rhs: *r, residual: 0.0 }).collect();
        let fit = fit_constant(&checks);
        assert!((fit.constant - 1.5).abs() < 1e-15);
        assert!(fit.max_residual < 1e-15);
    }
}
