//! The lapse flow for u and the backward transport flow for W on the foliation.
//!
//! The u flow is integrated for v = e^{3κr}(u − 1) in t = −e^{−2κr}/(4κ):
//!
//!   v_t = (2u²/H₀) Δ̃v + B v,  B = b₀ − (Rʳ + 6κ²)/H₀ · √s · v · (u + 2),
//!
//! where b₀ = κ²(2(e₁+e₂) − 4e₁e₂s)/H₀ and λ_a = κ(1 + e_a s). The W flow is
//! integrated for W̃ = e^{−κr}W in τ = e^{−2κr}/(4κ), from τ = 0 (r = ∞):
//!
//!   W̃_τ = (2u/H₀) Δ̃W̃ + c W̃,  c = 2κ²(e₁ + e₂ − 2√s v)/H₀.
//!
//! Both right-hand sides are bounded on the whole compactified interval.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::embedding::gauss_map;
use crate::embedding::EmbeddedSurface;
use crate::error::{Error, Result};
use crate::foliation::{Foliation, FoliationFrame, Schedule};
use crate::grid::{LatLonGrid, Spectral};
use crate::laplacian::LeafOperator;
use crate::linalg::pcg;
use crate::minkowski::FourVector;
use crate::spinor::{zeta, Spinor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    U,
    V,
    WScalar,
    WVector,
}

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    pub pcg_tol: f64,
    pub pcg_max_iter: usize,
    /// Re-run the u flow on every other schedule node and compare v_∞.
    pub certificate: bool,
    pub certificate_tol: f64,
    /// Drive the W steps to the fourth-order spatial operator by defect correction.
    pub fourth_order: bool,
    pub correction_tol: f64,
    pub correction_max_iter: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            pcg_tol: 1e-12,
            pcg_max_iter: 20_000,
            certificate: true,
            certificate_tol: 1e-3,
            fourth_order: true,
            correction_tol: 1e-11,
            correction_max_iter: 200,
        }
    }
}

/// Samples of a scalar flow on the schedule; index 0 is r = 0.
#[derive(Debug, Clone)]
pub struct FlowField {
    pub kind: FlowKind,
    pub grid: LatLonGrid,
    pub schedule: Schedule,
    pub values: Vec<Vec<f64>>,
}

impl FlowField {
    /// CSV rows `r,t_or_tau,theta,psi,value` for every `stride`-th schedule index
    /// (the last index is always included).
    pub fn csv(&self, stride: usize, header: &str) -> String {
        let stride = stride.max(1);
        let mut s = format!("r,t_or_tau,theta,psi,{header}\n");
        let n = self.values.len();
        for k in (0..n).filter(|k| k % stride == 0 || *k == n - 1) {
            let time = match self.kind {
                FlowKind::U | FlowKind::V => self.schedule.t(k),
                _ => self.schedule.tau(k),
            };
            for (i, j, th, ps) in self.grid.nodes() {
                let _ = writeln!(
                    s,
                    "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                    self.schedule.r[k],
                    time,
                    th,
                    ps,
                    self.values[k][self.grid.idx(i, j)]
                );
            }
        }
        s
    }
}

/// Convergence certificate: v_∞ compared against a run on every other node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub coarse_steps: usize,
    pub max_difference: f64,
    /// max_difference / 3, the error estimate for a second-order scheme.
    pub estimated_error: f64,
    pub scale: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct USolution {
    pub grid: LatLonGrid,
    pub kappa: f64,
    pub schedule: Schedule,
    /// v = e^{3κr}(u − 1) per schedule index.
    pub v: Vec<Vec<f64>>,
    pub calh0: Vec<f64>,
    pub pcg_iterations: usize,
    pub certificate: Option<Certificate>,
}

impl USolution {
    /// The trivial flow u ≡ 1.
    pub fn identity(grid: LatLonGrid, schedule: &Schedule, h0: &[f64]) -> Self {
        USolution {
            grid,
            kappa: schedule.kappa,
            schedule: schedule.clone(),
            v: vec![vec![0.0; grid.len()]; schedule.len()],
            calh0: h0.to_vec(),
            pcg_iterations: 0,
            certificate: None,
        }
    }

    pub fn u_at(&self, k: usize) -> Vec<f64> {
        let f = self.schedule.s[k].powf(1.5);
        self.v[k].iter().map(|v| 1.0 + f * v).collect()
    }

    pub fn u0(&self) -> Vec<f64> {
        self.u_at(0)
    }

    pub fn v_infty(&self) -> &[f64] {
        self.v.last().unwrap()
    }

    /// sup_p |u − 1| per schedule index.
    pub fn sup_deviation(&self) -> Vec<f64> {
        self.v
            .iter()
            .zip(&self.schedule.s)
            .map(|(v, s)| s.powf(1.5) * v.iter().fold(0.0f64, |m, x| m.max(x.abs())))
            .collect()
    }

    pub fn u_field(&self) -> FlowField {
        FlowField {
            kind: FlowKind::U,
            grid: self.grid,
            schedule: self.schedule.clone(),
            values: (0..self.v.len()).map(|k| self.u_at(k)).collect(),
        }
    }

    pub fn v_field(&self) -> FlowField {
        FlowField { kind: FlowKind::V, grid: self.grid, schedule: self.schedule.clone(), values: self.v.clone() }
    }

    /// CSV rows `r,t,theta,psi,u,v`.
    pub fn csv(&self, stride: usize) -> String {
        let stride = stride.max(1);
        let mut s = String::from("r,t_or_tau,theta,psi,u,v\n");
        let n = self.v.len();
        for k in (0..n).filter(|k| k % stride == 0 || *k == n - 1) {
            let u = self.u_at(k);
            for (i, j, th, ps) in self.grid.nodes() {
                let p = self.grid.idx(i, j);
                let _ = writeln!(
                    s,
                    "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                    self.schedule.r[k],
                    self.schedule.t(k),
                    th,
                    ps,
                    u[p],
                    self.v[k][p]
                );
            }
        }
        s
    }
}

fn check_schedule(fol: &Foliation, schedule: &Schedule) -> Result<()> {
    if (schedule.kappa - fol.kappa).abs() > 1e-15 * fol.kappa {
        return Err(Error::ScheduleMismatch(format!(
            "schedule built for kappa = {} but foliation has kappa = {}",
            schedule.kappa, fol.kappa
        )));
    }
    Ok(())
}

fn require_m_matrix(op: &LeafOperator, step: usize) -> Result<()> {
    let w = op.min_weight();
    if w < 0.0 {
        return Err(Error::Positivity {
            step,
            reason: format!("diffusion stencil has a negative edge weight ({w:.3e}); refine the grid"),
        });
    }
    Ok(())
}

/// Solve (D − K) x = b, D diagonal.
fn solve_shifted(
    op: &LeafOperator,
    d: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let kd = op.stiffness_diag();
    let pre: Vec<f64> = d.iter().zip(kd).map(|(a, k)| a - k).collect();
    let rep = pcg(
        |v, out| {
            op.stiffness_into(v, out);
            for i in 0..v.len() {
                out[i] = d[i] * v[i] - out[i];
            }
        },
        &pre,
        b,
        x,
        tol,
        max_iter,
    )?;
    Ok(rep.iterations)
}

fn u_reaction(frame: &FoliationFrame, exc: &[[f64; 2]], v: &[f64]) -> Vec<f64> {
    let k2 = frame.kappa * frame.kappa;
    let s = frame.s;
    let (rs, s15) = (s.sqrt(), s.powf(1.5));
    (0..v.len())
        .map(|p| {
            let h0 = frame.h0[p];
            let e = exc[p];
            let b0 = k2 * (2.0 * (e[0] + e[1]) - 4.0 * e[0] * e[1] * s) / h0;
            let u = 1.0 + s15 * v[p];
            let b = b0 - (frame.rr[p] + 6.0 * k2) / h0 * rs * v[p] * (u + 2.0);
            b * v[p]
        })
        .collect()
}

/// Solve (α − a Δ̃) x = hist + fe with a = 2u*²/H₀ frozen at the predictor.
#[allow(clippy::too_many_arguments)]
fn u_implicit_solve(
    frame: &FoliationFrame,
    op: &LeafOperator,
    alpha: f64,
    hist: &[f64],
    vstar: Vec<f64>,
    fe: &[f64],
    opts: &FlowOptions,
    iterations: &mut usize,
) -> Result<Vec<f64>> {
    let n = vstar.len();
    let s15 = frame.s.powf(1.5);
    let vol = op.cell_volume();
    let mut d = vec![0.0; n];
    let mut b = vec![0.0; n];
    for p in 0..n {
        let us = 1.0 + s15 * vstar[p];
        let a = 2.0 * us * us / frame.h0[p];
        d[p] = vol[p] * alpha / a;
        b[p] = vol[p] * (hist[p] + fe[p]) / a;
    }
    let mut x = vstar;
    *iterations += solve_shifted(op, &d, &b, &mut x, opts.pcg_tol, opts.pcg_max_iter)?;
    Ok(x)
}

/// One IMEX Euler step of length dt ending on `frame`.
#[allow(clippy::too_many_arguments)]
fn u_euler_step(
    frame: &FoliationFrame,
    vn: &[f64],
    f: &[f64],
    dt: f64,
    step: usize,
    opts: &FlowOptions,
    iterations: &mut usize,
) -> Result<Vec<f64>> {
    let op = frame.operator();
    require_m_matrix(&op, step)?;
    let hist: Vec<f64> = vn.iter().map(|v| v / dt).collect();
    u_implicit_solve(frame, &op, 1.0 / dt, &hist, vn.to_vec(), f, opts, iterations)
}

/// Solve the lapse flow with u(·, 0) = H₀(·, 0)/ℋ.
pub fn solve_u(
    fol: &Foliation,
    calh0: &[f64],
    schedule: &Schedule,
    opts: &FlowOptions,
) -> Result<USolution> {
    check_schedule(fol, schedule)?;
    let grid = fol.grid;
    if calh0.len() != grid.len() {
        return Err(Error::InvalidInput("mean curvature field has the wrong size".into()));
    }
    if let Some(p) = calh0.iter().position(|h| !(*h > 0.0) || !h.is_finite()) {
        return Err(Error::InvalidInput(format!("prescribed mean curvature must be positive (node {p})")));
    }
    let kappa = fol.kappa;
    let frame0 = fol.frame_at_s(1.0, 0.0);
    let v0: Vec<f64> = frame0.h0.iter().zip(calh0).map(|(h, c)| h / c - 1.0).collect();
    let mut vs = vec![v0];
    let mut f_cur = u_reaction(&frame0, &fol.excess(1.0), &vs[0]);
    let mut f_prev: Vec<f64> = Vec::new();
    let mut dt_prev = 0.0;
    let mut iterations = 0;
    let n = grid.len();
    for step in 0..schedule.steps() {
        let s1 = schedule.s[step + 1];
        let dt = (schedule.s[step] - s1) / (4.0 * kappa);
        let frame = fol.frame_at_s(s1, schedule.r[step + 1]);
        let vn = &vs[step];
        let x = if step == 0 {
            // Richardson-extrapolated IMEX Euler, so the start is as accurate
            // as the BDF2 steps that follow.
            let full = u_euler_step(&frame, vn, &f_cur, dt, step + 1, opts, &mut iterations)?;
            let sm = 0.5 * (schedule.s[0] + s1);
            let mid_frame = fol.frame_at_s(sm, -sm.ln() / (2.0 * kappa));
            let half = u_euler_step(&mid_frame, vn, &f_cur, 0.5 * dt, step + 1, opts, &mut iterations)?;
            let f_half = u_reaction(&mid_frame, &fol.excess(sm), &half);
            let two = u_euler_step(&frame, &half, &f_half, 0.5 * dt, step + 1, opts, &mut iterations)?;
            two.iter().zip(&full).map(|(a, b)| 2.0 * a - b).collect()
        } else {
            let op = frame.operator();
            require_m_matrix(&op, step + 1)?;
            let w = dt / dt_prev;
            let a0 = (1.0 + 2.0 * w) / (1.0 + w);
            let a1 = -(1.0 + w);
            let a2 = w * w / (1.0 + w);
            let vm = &vs[step - 1];
            let hist: Vec<f64> = (0..n).map(|p| (-a1 * vn[p] - a2 * vm[p]) / dt).collect();
            let vstar: Vec<f64> = (0..n).map(|p| (1.0 + w) * vn[p] - w * vm[p]).collect();
            let fe: Vec<f64> = (0..n).map(|p| (1.0 + w) * f_cur[p] - w * f_prev[p]).collect();
            u_implicit_solve(&frame, &op, a0 / dt, &hist, vstar, &fe, opts, &mut iterations)?
        };
        let s15 = s1.powf(1.5);
        for (p, v) in x.iter().enumerate() {
            let u = 1.0 + s15 * v;
            if !(u > 0.0) {
                return Err(Error::NonPositiveLapse { step: step + 1, node: p, value: u });
            }
        }
        f_prev = std::mem::replace(&mut f_cur, u_reaction(&frame, &fol.excess(s1), &x));
        dt_prev = dt;
        vs.push(x);
    }
    let mut sol = USolution {
        grid,
        kappa,
        schedule: schedule.clone(),
        v: vs,
        calh0: calh0.to_vec(),
        pcg_iterations: iterations,
        certificate: None,
    };
    if opts.certificate {
        if let Some(coarse) = schedule.coarsen() {
            let mut o = *opts;
            o.certificate = false;
            let c = solve_u(fol, calh0, &coarse, &o)?;
            let diff = crate::grid::max_abs_diff(sol.v_infty(), c.v_infty());
            let scale = 1.0 + crate::grid::max_abs(sol.v_infty());
            sol.certificate = Some(Certificate {
                coarse_steps: coarse.steps(),
                max_difference: diff,
                estimated_error: diff / 3.0,
                scale,
                converged: diff / 3.0 <= opts.certificate_tol * scale,
            });
        }
    }
    Ok(sol)
}

/// Rescaled solution W̃ = e^{−κr} W of the transport flow.
#[derive(Debug, Clone)]
pub struct WSolution {
    pub grid: LatLonGrid,
    pub kappa: f64,
    pub schedule: Schedule,
    /// W̃ per schedule index; index 0 is r = 0 where W̃ = W.
    pub w_tilde: Vec<Vec<f64>>,
    pub terminal: Vec<f64>,
    /// Node updates replaced by the monotone second-order value.
    pub limited_nodes: usize,
    pub correction_iterations: usize,
}

impl WSolution {
    pub fn w0(&self) -> &[f64] {
        &self.w_tilde[0]
    }

    /// W itself at schedule index k.
    pub fn w_at(&self, k: usize) -> Vec<f64> {
        let f = 1.0 / self.schedule.s[k].sqrt();
        self.w_tilde[k].iter().map(|v| v * f).collect()
    }

    pub fn field(&self) -> FlowField {
        FlowField {
            kind: FlowKind::WScalar,
            grid: self.grid,
            schedule: self.schedule.clone(),
            values: self.w_tilde.clone(),
        }
    }
}

/// Componentwise solution of the vector flow with terminal +γ₀, so that
/// W⁰ = 𝐖(·, 0) is the future-directed representative and the scalar flow
/// for a spinor a is −𝐖·ζ(a).
#[derive(Debug, Clone)]
pub struct VectorWSolution {
    pub components: [WSolution; 4],
}

impl VectorWSolution {
    pub fn w0(&self) -> Vec<FourVector> {
        let c = &self.components;
        (0..c[0].grid.len())
            .map(|p| FourVector::new(c[0].w0()[p], c[1].w0()[p], c[2].w0()[p], c[3].w0()[p]))
            .collect()
    }

    /// W̃ four-vectors at schedule index k.
    pub fn w_tilde_at(&self, k: usize) -> Vec<FourVector> {
        let c = &self.components;
        (0..c[0].grid.len())
            .map(|p| {
                FourVector::new(c[0].w_tilde[k][p], c[1].w_tilde[k][p], c[2].w_tilde[k][p], c[3].w_tilde[k][p])
            })
            .collect()
    }

    /// −𝐖̃·ζ(a) at every schedule index.
    pub fn project(&self, a: &Spinor) -> Vec<Vec<f64>> {
        let z = zeta(a);
        (0..self.components[0].w_tilde.len())
            .map(|k| self.w_tilde_at(k).iter().map(|w| -w.dot(&z)).collect())
            .collect()
    }

    /// CSV rows `r,t_or_tau,theta,psi,W1,W2,W3,Wt` with W unscaled.
    pub fn csv(&self, stride: usize) -> String {
        let c0 = &self.components[0];
        let stride = stride.max(1);
        let mut s = String::from("r,t_or_tau,theta,psi,W1,W2,W3,Wt\n");
        let n = c0.w_tilde.len();
        for k in (0..n).filter(|k| k % stride == 0 || *k == n - 1) {
            let f = 1.0 / c0.schedule.s[k].sqrt();
            for (i, j, th, ps) in c0.grid.nodes() {
                let p = c0.grid.idx(i, j);
                let _ = write!(s, "{:.17e},{:.17e},{:.17e},{:.17e}", c0.schedule.r[k], c0.schedule.tau(k), th, ps);
                for c in &self.components {
                    let _ = write!(s, ",{:.17e}", c.w_tilde[k][p] * f);
                }
                s.push('\n');
            }
        }
        s
    }
}

fn solve_w_many(
    fol: &Foliation,
    usol: &USolution,
    terminals: &[Vec<f64>],
    positivity: bool,
    opts: &FlowOptions,
) -> Result<Vec<WSolution>> {
    check_schedule(fol, &usol.schedule)?;
    let schedule = &usol.schedule;
    let grid = fol.grid;
    let n = grid.len();
    let kappa = fol.kappa;
    let k2 = kappa * kappa;
    for t in terminals {
        if t.len() != n {
            return Err(Error::InvalidInput("terminal data has the wrong size".into()));
        }
    }
    let m = schedule.len();
    let mut out: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); m]; terminals.len()];
    let mut prev: Vec<Vec<f64>> = terminals.to_vec();
    let mut s_prev = 0.0;
    let mut limited = 0;
    let mut corrections = 0;
    for k in (0..m).rev() {
        let s = schedule.s[k];
        let dtau = (s - s_prev) / (4.0 * kappa);
        let frame = fol.frame_at_s(s, schedule.r[k]);
        let op = frame.operator();
        require_m_matrix(&op, k)?;
        let exc = fol.excess(s);
        let u = usol.u_at(k);
        let rs = s.sqrt();
        let mut a = vec![0.0; n];
        let mut shift = vec![0.0; n];
        for p in 0..n {
            a[p] = 2.0 * u[p] / frame.h0[p];
            let c = 2.0 * k2 * (exc[p][0] + exc[p][1] - 2.0 * rs * usol.v[k][p]) / frame.h0[p];
            shift[p] = 1.0 / dtau - c;
            if !(shift[p] > 0.0) {
                return Err(Error::Positivity {
                    step: k,
                    reason: format!("step too large for the reaction term at node {p}; use more steps"),
                });
            }
        }
        let vol = op.cell_volume();
        let d: Vec<f64> = (0..n).map(|p| vol[p] * shift[p] / a[p]).collect();
        for (q, w_prev) in prev.iter_mut().enumerate() {
            let rhs: Vec<f64> = w_prev.iter().map(|w| w / dtau).collect();
            let b: Vec<f64> = (0..n).map(|p| vol[p] * rhs[p] / a[p]).collect();
            let mut low = w_prev.clone();
            solve_shifted(&op, &d, &b, &mut low, opts.pcg_tol, opts.pcg_max_iter)?;
            let mut x = low.clone();
            if opts.fourth_order {
                let scale = crate::grid::max_abs(&rhs).max(f64::MIN_POSITIVE);
                let mut converged = false;
                for _ in 0..opts.correction_max_iter {
                    let l4 = op.apply_fourth_order(&x);
                    let r: Vec<f64> = (0..n).map(|p| rhs[p] - shift[p] * x[p] + a[p] * l4[p]).collect();
                    if crate::grid::max_abs(&r) <= opts.correction_tol * scale {
                        converged = true;
                        break;
                    }
                    corrections += 1;
                    let br: Vec<f64> = (0..n).map(|p| vol[p] * r[p] / a[p]).collect();
                    let mut delta = vec![0.0; n];
                    solve_shifted(&op, &d, &br, &mut delta, 1e-3, opts.pcg_max_iter)?;
                    for p in 0..n {
                        x[p] += delta[p];
                    }
                }
                if !converged {
                    return Err(Error::NonConvergence(format!(
                        "defect correction did not converge at schedule index {k}"
                    )));
                }
            }
            if positivity {
                for p in 0..n {
                    if x[p] < 0.0 {
                        x[p] = low[p];
                        limited += 1;
                    }
                }
                if let Some(p) = x.iter().position(|v| *v < 0.0) {
                    return Err(Error::Positivity {
                        step: k,
                        reason: format!("negative W = {:.3e} at node {p} under non-negative terminal data", x[p]),
                    });
                }
            }
            out[q][k] = x.clone();
            *w_prev = x;
        }
        s_prev = s;
    }
    Ok(out
        .into_iter()
        .zip(terminals)
        .map(|(w_tilde, t)| WSolution {
            grid,
            kappa,
            schedule: schedule.clone(),
            w_tilde,
            terminal: t.clone(),
            limited_nodes: limited,
            correction_iterations: corrections,
        })
        .collect())
}

/// Scalar transport flow with prescribed lim e^{−κr} W = terminal.
pub fn solve_w_scalar(
    fol: &Foliation,
    usol: &USolution,
    terminal: &[f64],
    opts: &FlowOptions,
) -> Result<WSolution> {
    let positivity = terminal.iter().all(|v| *v >= 0.0);
    Ok(solve_w_many(fol, usol, &[terminal.to_vec()], positivity, opts)?.remove(0))
}

/// Vector transport flow with terminal γ₀ = κX + N.
pub fn solve_w_vector(
    es: &EmbeddedSurface,
    fol: &Foliation,
    usol: &USolution,
    opts: &FlowOptions,
) -> Result<VectorWSolution> {
    let gamma = gauss_map(es);
    let terminals: Vec<Vec<f64>> =
        (0..4).map(|c| gamma.iter().map(|g| g.to_array()[c]).collect()).collect();
    let mut sols = solve_w_many(fol, usol, &terminals, false, opts)?;
    let t = sols.pop().unwrap();
    let z = sols.pop().unwrap();
    let y = sols.pop().unwrap();
    let x = sols.pop().unwrap();
    Ok(VectorWSolution { components: [x, y, z, t] })
}

/// −γ₀·ζ(a), the terminal data of the scalar flow for the spinor a.
pub fn spinor_terminal(es: &EmbeddedSurface, a: &Spinor) -> Vec<f64> {
    let z = zeta(a);
    gauss_map(es).iter().map(|g| -g.dot(&z)).collect()
}

/// Rescaled Killing-spinor norm e^{−κr}(−κ X_r·ζ(a)) on a leaf.
pub fn killing_norm_rescaled(frame: &FoliationFrame, a: &Spinor) -> Vec<f64> {
    let z = zeta(a);
    frame.x_scaled.iter().map(|x| -frame.kappa * x.dot(&z)).collect()
}

/// e^{−κr}(H₀ ∂_r W + Δ_r W − 2κ²W) for the exact Killing-spinor norm
/// W = −κ X_r·ζ(a), with the second-order discrete Laplacian.
pub fn killing_transport_residual(fol: &Foliation, es: &EmbeddedSurface, s: f64, a: &Spinor) -> Vec<f64> {
    let frame = fol.frame_at_s(s, -s.ln() / (2.0 * fol.kappa));
    let k = fol.kappa;
    let z = zeta(a);
    let w = killing_norm_rescaled(&frame, a);
    let lap = frame.rescaled_laplacian(&w);
    (0..w.len())
        .map(|p| {
            let dx = (es.x[p] * (k * (1.0 - s)) + es.normal[p] * (1.0 + s)) * 0.5;
            let dw = -k * dx.dot(&z);
            frame.h0[p] * dw + s * lap[p] - 2.0 * k * k * w[p]
        })
        .collect()
}

/// Closed-form barrier for the lapse, f' = h(r)(f − f³), h = min over the leaf of
/// (Rʳ + 6κ²)/(2H₀).
#[derive(Debug, Clone)]
pub struct Barrier {
    pub r: Vec<f64>,
    pub h: Vec<f64>,
    /// ∫₀ʳ h.
    pub integral: Vec<f64>,
    pub c: f64,
    /// Lower barrier (f ≤ 1) or upper barrier (f ≥ 1).
    pub lower: bool,
    pub f: Vec<f64>,
}

fn leaf_min_h(fol: &Foliation, r: f64) -> f64 {
    let fr = fol.frame_at_s((-2.0 * fol.kappa * r).exp(), r);
    let k2 = fol.kappa * fol.kappa;
    fr.rr.iter().zip(&fr.h0).map(|(rr, h)| (rr + 6.0 * k2) / (2.0 * h)).fold(f64::INFINITY, f64::min)
}

impl Barrier {
    fn eval(lower: bool, c: f64, integral: f64) -> f64 {
        let e = (-2.0 * integral).exp();
        if lower {
            (1.0 + c * e).powf(-0.5)
        } else {
            (1.0 - c * e).powf(-0.5)
        }
    }

    /// f' from differentiating the closed form.
    fn derivative(lower: bool, c: f64, integral: f64, h: f64) -> f64 {
        let e = (-2.0 * integral).exp();
        if lower {
            h * c * e * (1.0 + c * e).powf(-1.5)
        } else {
            -h * c * e * (1.0 - c * e).powf(-1.5)
        }
    }

    /// max |f' − h(f − f³)| over the samples.
    pub fn ode_residual(&self) -> f64 {
        (0..self.r.len())
            .map(|k| {
                let f = self.f[k];
                let d = Self::derivative(self.lower, self.c, self.integral[k], self.h[k]);
                (d - self.h[k] * (f - f * f * f)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Barrier through f(0) = f0 evaluated at the schedule radii. ∫h is computed by
/// composite Simpson on `sub` subintervals per schedule interval.
pub fn barrier_ode(fol: &Foliation, radii: &[f64], f0: f64, sub: usize) -> Result<Barrier> {
    if !(f0 > 0.0) {
        return Err(Error::InvalidInput("barrier initial value must be positive".into()));
    }
    let lower = f0 <= 1.0;
    let c = if lower { 1.0 / (f0 * f0) - 1.0 } else { 1.0 - 1.0 / (f0 * f0) };
    let sub = (sub.max(1) + 1) / 2 * 2;
    let mut h = Vec::with_capacity(radii.len());
    let mut integral = Vec::with_capacity(radii.len());
    let mut acc = 0.0;
    let mut last = 0.0;
    for (k, &r) in radii.iter().enumerate() {
        if k > 0 {
            let dr = (r - last) / sub as f64;
            let mut s = leaf_min_h(fol, last) + leaf_min_h(fol, r);
            for m in 1..sub {
                s += if m % 2 == 1 { 4.0 } else { 2.0 } * leaf_min_h(fol, last + m as f64 * dr);
            }
            acc += s * dr / 3.0;
        }
        h.push(leaf_min_h(fol, r));
        integral.push(acc);
        last = r;
    }
    let f = integral.iter().map(|i| Barrier::eval(lower, c, *i)).collect();
    Ok(Barrier { r: radii.to_vec(), h, integral, c, lower, f })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierCheck {
    pub applicable: bool,
    /// Largest amount by which u crosses the barrier (≤ 0 when it holds).
    pub max_violation: f64,
}

/// Lower barrier: f(r) ≤ min u(·, r); upper barrier: f(r) ≥ max u(·, r).
pub fn barrier_check(fol: &Foliation, usol: &USolution) -> Result<(BarrierCheck, BarrierCheck)> {
    let u0 = usol.u0();
    let umin = u0.iter().copied().fold(f64::INFINITY, f64::min);
    let umax = u0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let r = &usol.schedule.r;
    let mut lo = BarrierCheck { applicable: umin <= 1.0, max_violation: f64::NEG_INFINITY };
    let mut hi = BarrierCheck { applicable: umax >= 1.0, max_violation: f64::NEG_INFINITY };
    if lo.applicable {
        let b = barrier_ode(fol, r, umin, 4)?;
        for k in 0..r.len() {
            let m = usol.u_at(k).into_iter().fold(f64::INFINITY, f64::min);
            lo.max_violation = lo.max_violation.max(b.f[k] - m);
        }
    }
    if hi.applicable {
        let b = barrier_ode(fol, r, umax, 4)?;
        for k in 0..r.len() {
            let m = usol.u_at(k).into_iter().fold(f64::NEG_INFINITY, f64::max);
            hi.max_violation = hi.max_violation.max(m - b.f[k]);
        }
    }
    Ok((lo, hi))
}

/// Deviation of g″ = u²dr² + g(r) from the hyperbolic gauge per leaf.
#[derive(Debug, Clone, Serialize)]
pub struct GaugeDeviation {
    pub r: Vec<f64>,
    /// sup |1/u − 1|.
    pub a_minus_identity: Vec<f64>,
    /// sup |∇(1/u)|_{g(r)}.
    pub gradient: Vec<f64>,
}

pub fn gauge_deviation(fol: &Foliation, usol: &USolution) -> GaugeDeviation {
    let sp = Spectral::new(fol.grid);
    let mut am = Vec::with_capacity(usol.v.len());
    let mut gr = Vec::with_capacity(usol.v.len());
    for k in 0..usol.v.len() {
        let s = usol.schedule.s[k];
        let u = usol.u_at(k);
        am.push(u.iter().map(|x| (1.0 / x - 1.0).abs()).fold(0.0, f64::max));
        let frame = fol.frame_at_s(s, usol.schedule.r[k]);
        let vt = sp.d_theta(&usol.v[k], 1.0);
        let vp = sp.d_psi(&usol.v[k]);
        let mut worst: f64 = 0.0;
        for p in 0..u.len() {
            let di = &frame.density_inverse;
            let sd = frame.sd_tilde[p];
            // |∇u|² = s g̃^{ab} u_a u_b with u_a = s^{3/2} v_a
            let q = (di[0][p] * vt[p] * vt[p] + 2.0 * di[1][p] * vt[p] * vp[p] + di[2][p] * vp[p] * vp[p]) / sd;
            let g = s.powf(2.0) * q.max(0.0).sqrt() / (u[p] * u[p]);
            worst = worst.max(g);
        }
        gr.push(worst);
    }
    GaugeDeviation { r: usol.schedule.r.clone(), a_minus_identity: am, gradient: gr }
}

/// sup over nodes and leaves of |2κ² e^{2κr}(2u/H₀ − 1/κ)|, the reaction
/// coefficient of the rescaled transport flow. It equals 2κ²|2√s v − e₁ − e₂|/H₀,
/// which is how it is evaluated.
pub fn reaction_coefficient_bound(fol: &Foliation, usol: &USolution) -> f64 {
    let k2 = fol.kappa * fol.kappa;
    let mut worst: f64 = 0.0;
    for (k, v) in usol.v.iter().enumerate() {
        let s = usol.schedule.s[k];
        let frame = fol.frame_at_s(s, usol.schedule.r[k]);
        let exc = fol.excess(s);
        for p in 0..v.len() {
            let c = 2.0 * k2 * (2.0 * s.sqrt() * v[p] - exc[p][0] - exc[p][1]) / frame.h0[p];
            worst = worst.max(c.abs());
        }
    }
    worst
}

/// Least-squares decay rate of y(r) ~ C e^{−αr} over r ∈ [r_lo, r_hi].
pub fn decay_exponent(r: &[f64], y: &[f64], r_lo: f64, r_hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = r
        .iter()
        .zip(y)
        .filter(|(r, y)| **r >= r_lo && **r <= r_hi && **y > 0.0)
        .map(|(r, y)| (*r, y.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(-sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::embed_geodesic_sphere;

    fn sphere(n: usize, kappa: f64) -> (EmbeddedSurface, Foliation) {
        let es = embed_geodesic_sphere(1.0, kappa, LatLonGrid::new(n, n).unwrap()).unwrap();
        let fol = Foliation::new(&es).unwrap();
        (es, fol)
    }

    #[test]
    fn u_fixed_point() {
        let (_, fol) = sphere(12, 1.0);
        let sched = Schedule::uniform_in_sigma(1.0, 8.0, 32).unwrap();
        let h0 = fol.frame_at_s(1.0, 0.0).h0;
        let sol = solve_u(&fol, &h0, &sched, &FlowOptions::default()).unwrap();
        for v in &sol.v {
            assert!(crate::grid::max_abs(v) < 1e-12);
        }
    }

    #[test]
    fn w_zero_terminal_stays_zero() {
        let (es, fol) = sphere(12, 1.0);
        let sched = Schedule::uniform_in_sigma(1.0, 8.0, 16).unwrap();
        let usol = USolution::identity(es.grid, &sched, &es.mean_curvature());
        let w = solve_w_scalar(&fol, &usol, &vec![0.0; es.len()], &FlowOptions::default()).unwrap();
        assert!(w.w_tilde.iter().all(|v| crate::grid::max_abs(v) == 0.0));
    }

    #[test]
    fn barrier_formula() {
        let (_, fol) = sphere(8, 1.0);
        let r: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let b = barrier_ode(&fol, &r, 2f64.powf(-0.5), 4).unwrap();
        assert!((b.c - 1.0).abs() < 1e-15);
        assert!(b.ode_residual() < 1e-10);
        let one = barrier_ode(&fol, &r, 1.0, 4).unwrap();
        assert!(one.f.iter().all(|f| *f == 1.0));
    }

    #[test]
    fn decay_fit_recovers_rate() {
        let r: Vec<f64> = (0..40).map(|k| k as f64 * 0.2).collect();
        let y: Vec<f64> = r.iter().map(|r| 3.0 * (-2.5 * r).exp()).collect();
        assert!((decay_exponent(&r, &y, 1.0, 7.0).unwrap() - 2.5).abs() < 1e-12);
    }
}
