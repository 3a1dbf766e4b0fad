//! Isometric embeddings of the input metric into the hyperboloid H³ ⊂ R^{3,1}.
//!
//! Three strategies are provided: the closed-form geodesic sphere, an exact
//! profile construction for metrics of revolution, and a Levenberg–Marquardt
//! solve for general metrics. All of them finish through the same path, which
//! differentiates X spectrally and derives the normal, the second fundamental
//! form, principal data and the isometry defect from it.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{interp_meridian, LatLonGrid, Spectral};
use crate::minkowski::{polar_normal, polar_param, FourVector};
use crate::surface::{check_admissibility, SurfaceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    ClosedForm,
    Axisymmetric,
    General,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::ClosedForm => "closed_form",
            Strategy::Axisymmetric => "axisymmetric",
            Strategy::General => "general",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed_form" | "closed-form" | "sphere" => Ok(Strategy::ClosedForm),
            "axisymmetric" => Ok(Strategy::Axisymmetric),
            "general" => Ok(Strategy::General),
            other => Err(Error::InvalidInput(format!("unknown embedding strategy '{other}'"))),
        }
    }
}

/// Principal curvatures with a g-orthonormal principal coframe at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalData {
    /// λ₁ ≤ λ₂.
    pub lambda: [f64; 2],
    /// ω^a = (ω^a_θ, ω^a_ψ), with g = Σ ω^a ⊗ ω^a and h = Σ λ_a ω^a ⊗ ω^a.
    pub omega: [[f64; 2]; 2],
    /// Dual frame v_a = (v_a^θ, v_a^ψ), ω^a(v_b) = δ_ab.
    pub frame: [[f64; 2]; 2],
}

impl PrincipalData {
    /// Simultaneous diagonalization of h with respect to g, both given as
    /// (θθ, θψ, ψψ) components.
    pub fn from_forms(g: [f64; 3], h: [f64; 3]) -> Self {
        let l11 = g[0].sqrt();
        let l21 = g[1] / l11;
        let l22 = (g[2] - l21 * l21).sqrt();
        // L⁻¹ = [[1/l11, 0], [-l21/(l11 l22), 1/l22]]
        let i11 = 1.0 / l11;
        let i21 = -l21 / (l11 * l22);
        let i22 = 1.0 / l22;
        // M = L⁻¹ h L⁻ᵀ
        let a11 = i11 * h[0];
        let a12 = i11 * h[1];
        let a21 = i21 * h[0] + i22 * h[1];
        let a22 = i21 * h[1] + i22 * h[2];
        let m11 = a11 * i11;
        let m12 = a11 * i21 + a12 * i22;
        let m22 = a21 * i21 + a22 * i22;
        let mean = 0.5 * (m11 + m22);
        let d = (0.25 * (m11 - m22) * (m11 - m22) + m12 * m12).sqrt();
        let phi = 0.5 * (2.0 * m12).atan2(m11 - m22);
        let (sp, cp) = phi.sin_cos();
        // e2 = (cos φ, sin φ) belongs to the larger eigenvalue.
        let e = [[-sp, cp], [cp, sp]];
        let mut omega = [[0.0; 2]; 2];
        let mut frame = [[0.0; 2]; 2];
        for a in 0..2 {
            let (x, y) = (e[a][0], e[a][1]);
            omega[a] = [l11 * x, l21 * x + l22 * y];
            // L⁻ᵀ = [[i11, i21], [0, i22]]
            frame[a] = [i11 * x + i21 * y, i22 * y];
        }
        PrincipalData { lambda: [mean - d, mean + d], omega, frame }
    }

    /// Signed determinant of the coframe matrix, equal to ±√det g.
    pub fn coframe_det(&self) -> f64 {
        self.omega[0][0] * self.omega[1][1] - self.omega[0][1] * self.omega[1][0]
    }
}

/// An embedding F₀: Σ → H³ sampled on the grid, with derived geometry.
#[derive(Debug, Clone)]
pub struct EmbeddedSurface {
    pub grid: LatLonGrid,
    pub kappa: f64,
    pub strategy: Strategy,
    pub x: Vec<FourVector>,
    pub normal: Vec<FourVector>,
    /// Induced metric (θθ, θψ, ψψ) recomputed from X.
    pub metric: [Vec<f64>; 3],
    /// Metric the embedding was asked to realise.
    pub target: [Vec<f64>; 3],
    /// Second fundamental form h_ab = −N·∂_a∂_b X.
    pub h: [Vec<f64>; 3],
    pub principal: Vec<PrincipalData>,
    /// Max relative deviation of the induced metric from the target.
    pub defect: f64,
    pub certified: bool,
    pub iterations: usize,
    /// Smoothness diagnostic of the profile at the poles (axisymmetric tier).
    pub closure: Option<f64>,
}

impl EmbeddedSurface {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Mean curvature H₀ = λ₁ + λ₂.
    pub fn mean_curvature(&self) -> Vec<f64> {
        self.principal.iter().map(|p| p.lambda[0] + p.lambda[1]).collect()
    }

    /// Area density of the target metric.
    pub fn area_density(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                (self.target[0][k] * self.target[2][k] - self.target[1][k] * self.target[1][k])
                    .sqrt()
            })
            .collect()
    }

    /// Smallest λ_a − κ over the surface with its node.
    pub fn horospherical_margin(&self) -> (f64, usize) {
        let mut worst = (f64::INFINITY, 0);
        for (k, p) in self.principal.iter().enumerate() {
            let m = p.lambda[0] - self.kappa;
            if m < worst.0 {
                worst = (m, k);
            }
        }
        worst
    }

    /// Error unless every principal curvature exceeds κ.
    pub fn require_horospherical(&self) -> Result<()> {
        let (m, k) = self.horospherical_margin();
        if !(m > 0.0) {
            return Err(Error::HorosphericalBound {
                i: k / self.grid.npsi,
                j: k % self.grid.npsi,
                lambda: self.principal[k].lambda[0],
                kappa: self.kappa,
            });
        }
        Ok(())
    }

    /// μ_a with λ_a = κ coth(κ μ_a).
    pub fn mu(&self) -> Result<Vec<[f64; 2]>> {
        self.require_horospherical()?;
        let k = self.kappa;
        Ok(self
            .principal
            .iter()
            .map(|p| [(k / p.lambda[0]).atanh() / k, (k / p.lambda[1]).atanh() / k])
            .collect())
    }
}

/// The data needed to rebuild an [`EmbeddedSurface`] bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub ntheta: usize,
    pub npsi: usize,
    pub kappa: f64,
    pub strategy: Strategy,
    pub x: Vec<[f64; 4]>,
    pub target: [Vec<f64>; 3],
    pub certified: bool,
    pub iterations: usize,
    pub closure: Option<f64>,
}

impl EmbeddedSurface {
    pub fn to_record(&self) -> EmbeddingRecord {
        EmbeddingRecord {
            ntheta: self.grid.ntheta,
            npsi: self.grid.npsi,
            kappa: self.kappa,
            strategy: self.strategy,
            x: self.x.iter().map(|v| v.to_array()).collect(),
            target: self.target.clone(),
            certified: self.certified,
            iterations: self.iterations,
            closure: self.closure,
        }
    }

    /// Rebuild a numerical embedding. Closed-form embeddings carry analytic
    /// normals and are recomputed from the preset instead.
    pub fn from_record(rec: &EmbeddingRecord) -> Result<Self> {
        if rec.strategy == Strategy::ClosedForm {
            return Err(Error::InvalidInput("closed-form embeddings are not stored as records".into()));
        }
        let grid = LatLonGrid::new(rec.ntheta, rec.npsi)?;
        if rec.x.len() != grid.len() || rec.target.iter().any(|t| t.len() != grid.len()) {
            return Err(Error::Parse("embedding record does not match its grid".into()));
        }
        let x = rec.x.iter().map(|a| FourVector::from_array(*a)).collect();
        let mut es = finish(grid, rec.kappa, rec.strategy, x, rec.target.clone());
        es.certified = rec.certified;
        es.iterations = rec.iterations;
        es.closure = rec.closure;
        Ok(es)
    }
}

/// Lorentzian "cross product" n with n·V = det[V, A, B, C] for all V.
fn lorentz_cross(a: &FourVector, b: &FourVector, c: &FourVector) -> FourVector {
    let m = Matrix4::new(
        0.0, 0.0, 0.0, 0.0, a.x1, a.x2, a.x3, a.t, b.x1, b.x2, b.x3, b.t, c.x1, c.x2, c.x3, c.t,
    );
    let mut cof = [0.0; 4];
    for (mu, slot) in cof.iter_mut().enumerate() {
        let mut mm = m;
        for nu in 0..4 {
            mm[(0, nu)] = if nu == mu { 1.0 } else { 0.0 };
        }
        *slot = mm.determinant();
    }
    // raise the index with η = diag(1, 1, 1, -1)
    FourVector::new(cof[0], cof[1], cof[2], -cof[3])
}

fn components(x: &[FourVector]) -> [Vec<f64>; 4] {
    [
        x.iter().map(|v| v.x1).collect(),
        x.iter().map(|v| v.x2).collect(),
        x.iter().map(|v| v.x3).collect(),
        x.iter().map(|v| v.t).collect(),
    ]
}

fn assemble(c: &[Vec<f64>; 4], k: usize) -> FourVector {
    FourVector::new(c[0][k], c[1][k], c[2][k], c[3][k])
}

/// Spectral first and second derivatives of a four-vector field.
struct Derivs {
    xt: Vec<FourVector>,
    xp: Vec<FourVector>,
    xtt: Vec<FourVector>,
    xtp: Vec<FourVector>,
    xpp: Vec<FourVector>,
}

fn derivatives(sp: &Spectral, x: &[FourVector]) -> Derivs {
    let c = components(x);
    let map = |f: &dyn Fn(&[f64]) -> Vec<f64>| -> Vec<FourVector> {
        let d: [Vec<f64>; 4] = [f(&c[0]), f(&c[1]), f(&c[2]), f(&c[3])];
        (0..x.len()).map(|k| assemble(&d, k)).collect()
    };
    Derivs {
        xt: map(&|f| sp.d_theta(f, 1.0)),
        xp: map(&|f| sp.d_psi(f)),
        xtt: map(&|f| sp.d_theta2(f, 1.0)),
        xtp: map(&|f| sp.d_theta_psi(f, 1.0)),
        xpp: map(&|f| sp.d_psi2(f)),
    }
}

fn induced_metric(d: &Derivs) -> [Vec<f64>; 3] {
    [
        d.xt.iter().map(|v| v.dot(v)).collect(),
        d.xt.iter().zip(&d.xp).map(|(a, b)| a.dot(b)).collect(),
        d.xp.iter().map(|v| v.dot(v)).collect(),
    ]
}

/// Max over nodes of the relative metric deviation, each component scaled by
/// the natural size of the target (E, √(EG), G).
pub fn metric_defect(metric: &[Vec<f64>; 3], target: &[Vec<f64>; 3]) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..metric[0].len() {
        let (e, g) = (target[0][k], target[2][k]);
        worst = worst
            .max((metric[0][k] - e).abs() / e)
            .max((metric[1][k] - target[1][k]).abs() / (e * g).sqrt())
            .max((metric[2][k] - g).abs() / g);
    }
    worst
}

/// Normal, second fundamental form and principal data of an embedding given by
/// its positions. The normal is oriented so that the total mean curvature is
/// positive.
pub fn second_fundamental_form(
    grid: &LatLonGrid,
    x: &[FourVector],
) -> (Vec<FourVector>, [Vec<f64>; 3], [Vec<f64>; 3], Vec<PrincipalData>) {
    let sp = Spectral::new(*grid);
    let d = derivatives(&sp, x);
    let metric = induced_metric(&d);
    let mut normal: Vec<FourVector> = (0..x.len())
        .map(|k| {
            let n = lorentz_cross(&x[k], &d.xt[k], &d.xp[k]);
            n * (1.0 / n.norm_sq().abs().sqrt())
        })
        .collect();
    let hcomp = |normal: &[FourVector]| -> [Vec<f64>; 3] {
        [
            (0..x.len()).map(|k| -normal[k].dot(&d.xtt[k])).collect(),
            (0..x.len()).map(|k| -normal[k].dot(&d.xtp[k])).collect(),
            (0..x.len()).map(|k| -normal[k].dot(&d.xpp[k])).collect(),
        ]
    };
    let mut h = hcomp(&normal);
    let trace: f64 = (0..x.len())
        .map(|k| {
            let (e, f, g) = (metric[0][k], metric[1][k], metric[2][k]);
            let det = e * g - f * f;
            (g * h[0][k] - 2.0 * f * h[1][k] + e * h[2][k]) / det.sqrt()
        })
        .sum();
    if trace < 0.0 {
        for n in normal.iter_mut() {
            *n = -*n;
        }
        h = hcomp(&normal);
    }
    let principal = (0..x.len())
        .map(|k| {
            PrincipalData::from_forms(
                [metric[0][k], metric[1][k], metric[2][k]],
                [h[0][k], h[1][k], h[2][k]],
            )
        })
        .collect();
    (normal, metric, h, principal)
}

fn finish(
    grid: LatLonGrid,
    kappa: f64,
    strategy: Strategy,
    x: Vec<FourVector>,
    target: [Vec<f64>; 3],
) -> EmbeddedSurface {
    let (normal, metric, h, principal) = second_fundamental_form(&grid, &x);
    let defect = metric_defect(&metric, &target);
    EmbeddedSurface {
        grid,
        kappa,
        strategy,
        x,
        normal,
        metric,
        target,
        h,
        principal,
        defect,
        certified: false,
        iterations: 0,
        closure: None,
    }
}

fn spec_target(spec: &SurfaceSpec) -> [Vec<f64>; 3] {
    [spec.g_tt.clone(), spec.g_tp.clone(), spec.g_pp.clone()]
}

fn positive_definite(p: &PrincipalData) -> bool {
    p.lambda[0] > 0.0
}

/// Geodesic sphere of intrinsic radius R: sinh(κρ) = κR.
pub fn embed_geodesic_sphere(radius: f64, kappa: f64, grid: LatLonGrid) -> Result<EmbeddedSurface> {
    if !(radius > 0.0) || !(kappa > 0.0) {
        return Err(Error::InvalidInput("radius and kappa must be positive".into()));
    }
    let rho = (kappa * radius).asinh() / kappa;
    let lambda = kappa / (kappa * rho).tanh();
    let n = grid.len();
    let mut x = Vec::with_capacity(n);
    let mut normal = Vec::with_capacity(n);
    let mut target = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut h = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut principal = Vec::with_capacity(n);
    for (i, j, t, p) in grid.nodes() {
        let k = grid.idx(i, j);
        x.push(polar_param(rho, t, p, kappa));
        normal.push(polar_normal(rho, t, p, kappa));
        let s = t.sin();
        target[0][k] = radius * radius;
        target[2][k] = radius * radius * s * s;
        h[0][k] = lambda * target[0][k];
        h[2][k] = lambda * target[2][k];
        principal.push(PrincipalData {
            lambda: [lambda, lambda],
            omega: [[radius, 0.0], [0.0, radius * s]],
            frame: [[1.0 / radius, 0.0], [0.0, 1.0 / (radius * s)]],
        });
    }
    let sp = Spectral::new(grid);
    let metric = induced_metric(&derivatives(&sp, &x));
    let defect = metric_defect(&metric, &target);
    Ok(EmbeddedSurface {
        grid,
        kappa,
        strategy: Strategy::ClosedForm,
        x,
        normal,
        metric,
        target,
        h,
        principal,
        defect,
        certified: true,
        iterations: 0,
        closure: None,
    })
}

fn admissible(spec: &SurfaceSpec, kappa: f64) -> Result<()> {
    let rep = check_admissibility(spec, kappa)?;
    if !rep.pass {
        return Err(Error::Admissibility(rep.summary()));
    }
    Ok(())
}

/// Sine-series coefficients b_1..b_N of samples at the midpoints θ_i.
fn sine_coefficients(f: &[f64], thetas: &[f64]) -> Vec<f64> {
    let n = f.len();
    (1..=n)
        .map(|k| {
            let s: f64 = f.iter().zip(thetas).map(|(v, t)| v * (k as f64 * t).sin()).sum();
            if k == n {
                s / n as f64
            } else {
                2.0 * s / n as f64
            }
        })
        .collect()
}

/// Exact construction for metrics of revolution E(θ)dθ² + Φ(θ)²dψ²:
/// X = (ℓ sinh w, Φ cos ψ, Φ sin ψ, ℓ cosh w) with ℓ² = 1/κ² + Φ² and
/// ℓ² w'² = E − Φ'²/(1 + κ²Φ²).
pub fn embed_axisymmetric(spec: &SurfaceSpec, kappa: f64) -> Result<EmbeddedSurface> {
    let defect = spec.axisymmetry_defect();
    if defect > 1e-10 {
        return Err(Error::NotAxisymmetric(format!(
            "metric varies with psi or has a cross term (relative defect {defect:.3e})"
        )));
    }
    admissible(spec, kappa)?;
    let grid = spec.grid;
    let n = grid.ntheta;
    let thetas: Vec<f64> = (0..n).map(|i| grid.theta(i)).collect();
    let e: Vec<f64> = (0..n).map(|i| spec.g_tt[grid.idx(i, 0)]).collect();
    let phi: Vec<f64> = (0..n).map(|i| spec.g_pp[grid.idx(i, 0)].sqrt()).collect();

    // Φ' along the meridian: Φ is odd under the pole reflection.
    let col_grid = LatLonGrid { ntheta: n, npsi: 2 };
    let sp = Spectral::new(col_grid);
    let mut two = Vec::with_capacity(2 * n);
    for v in &phi {
        two.push(*v);
        two.push(*v);
    }
    let dphi_two = sp.d_theta(&two, -1.0);
    let dphi: Vec<f64> = (0..n).map(|i| dphi_two[2 * i]).collect();

    let k2 = kappa * kappa;
    let mut wp = Vec::with_capacity(n);
    for i in 0..n {
        let ell2 = 1.0 / k2 + phi[i] * phi[i];
        let num = e[i] - dphi[i] * dphi[i] / (1.0 + k2 * phi[i] * phi[i]);
        if num < -1e-9 * e[i] {
            return Err(Error::Embedding(format!(
                "profile cannot be realised at row {i}: E - Phi'^2/(1+kappa^2 Phi^2) = {num:.3e}"
            )));
        }
        wp.push(-(num.max(0.0) / ell2).sqrt());
    }
    let b = sine_coefficients(&wp, &thetas);
    let total: f64 = b
        .iter()
        .enumerate()
        .map(|(k, bk)| {
            let kk = (k + 1) as f64;
            bk * (1.0 - (kk * PI).cos()) / kk
        })
        .sum();
    let w: Vec<f64> = thetas
        .iter()
        .map(|t| {
            -0.5 * total
                + b.iter()
                    .enumerate()
                    .map(|(k, bk)| {
                        let kk = (k + 1) as f64;
                        bk * (1.0 - (kk * t).cos()) / kk
                    })
                    .sum::<f64>()
        })
        .collect();

    // Smoothness at the poles requires Φ'(0)² = E(0).
    let at_poles = [0.0, PI];
    let dphi_p = interp_meridian(&dphi, &dphi, 1.0, &at_poles);
    let e_p = interp_meridian(&e, &e, 1.0, &at_poles);
    let closure = (dphi_p[0] * dphi_p[0] / e_p[0] - 1.0)
        .abs()
        .max((dphi_p[1] * dphi_p[1] / e_p[1] - 1.0).abs());

    let mut x = Vec::with_capacity(grid.len());
    for (i, _, _, p) in grid.nodes() {
        let ell = (1.0 / k2 + phi[i] * phi[i]).sqrt();
        x.push(FourVector::new(
            ell * w[i].sinh(),
            phi[i] * p.cos(),
            phi[i] * p.sin(),
            ell * w[i].cosh(),
        ));
    }
    let mut es = finish(grid, kappa, Strategy::Axisymmetric, x, spec_target(spec));
    es.closure = Some(closure);
    es.certified = es.principal.iter().all(positive_definite);
    Ok(es)
}

/// Options for the general least-squares embedder.
#[derive(Debug, Clone, Copy)]
pub struct GeneralOptions {
    pub max_iter: usize,
    pub tol_defect: f64,
    pub gauge_weight: f64,
}

impl Default for GeneralOptions {
    fn default() -> Self {
        GeneralOptions { max_iter: 60, tol_defect: 1e-8, gauge_weight: 1.0 }
    }
}

fn lift(y: &[f64], kappa: f64) -> Vec<FourVector> {
    y.chunks(3)
        .map(|c| {
            let t = (1.0 / (kappa * kappa) + c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            FourVector::new(c[0], c[1], c[2], t)
        })
        .collect()
}

struct LsqProblem<'a> {
    grid: LatLonGrid,
    sp: Spectral,
    kappa: f64,
    target: &'a [Vec<f64>; 3],
    weight: Vec<f64>,
    area: Vec<f64>,
    y0: Vec<f64>,
    centroid0: [f64; 3],
    gauge_weight: f64,
}

impl LsqProblem<'_> {
    fn centroid(&self, y: &[f64]) -> [f64; 3] {
        let mut c = [0.0; 3];
        for (k, a) in self.area.iter().enumerate() {
            for d in 0..3 {
                c[d] += a * y[3 * k + d];
            }
        }
        c
    }

    fn twist(&self, y: &[f64]) -> [f64; 3] {
        let mut c = [0.0; 3];
        for (k, a) in self.area.iter().enumerate() {
            let p = &self.y0[3 * k..3 * k + 3];
            let q = &y[3 * k..3 * k + 3];
            c[0] += a * (p[1] * q[2] - p[2] * q[1]);
            c[1] += a * (p[2] * q[0] - p[0] * q[2]);
            c[2] += a * (p[0] * q[1] - p[1] * q[0]);
        }
        c
    }

    fn residual(&self, y: &[f64]) -> (Vec<f64>, Vec<FourVector>, Vec<FourVector>, Vec<FourVector>) {
        let x = lift(y, self.kappa);
        let c = components(&x);
        let dt: [Vec<f64>; 4] = std::array::from_fn(|m| self.sp.d_theta(&c[m], 1.0));
        let dp: [Vec<f64>; 4] = std::array::from_fn(|m| self.sp.d_psi(&c[m]));
        let n = x.len();
        let xt: Vec<FourVector> = (0..n).map(|k| assemble(&dt, k)).collect();
        let xp: Vec<FourVector> = (0..n).map(|k| assemble(&dp, k)).collect();
        let mut r = Vec::with_capacity(3 * n + 6);
        for k in 0..n {
            let (e, f, g) = (self.target[0][k], self.target[1][k], self.target[2][k]);
            let w = self.weight[k];
            r.push(w * (xt[k].dot(&xt[k]) - e) / e);
            r.push(w * (xt[k].dot(&xp[k]) - f) / (e * g).sqrt());
            r.push(w * (xp[k].dot(&xp[k]) - g) / g);
        }
        let c = self.centroid(y);
        let tw = self.twist(y);
        for d in 0..3 {
            r.push(self.gauge_weight * (c[d] - self.centroid0[d]));
        }
        for d in 0..3 {
            r.push(self.gauge_weight * tw[d]);
        }
        (r, x, xt, xp)
    }

    /// Normal equations JᵀJ and Jᵀr, accumulated row by row (rows are sparse).
    fn normal_equations(
        &self,
        y: &[f64],
        r: &[f64],
        x: &[FourVector],
        xt: &[FourVector],
        xp: &[FourVector],
    ) -> (DMatrix<f64>, DVector<f64>) {
        let g = &self.grid;
        let n = g.len();
        let m = 3 * n;
        let mut jtj = DMatrix::<f64>::zeros(m, m);
        let mut jtr = DVector::<f64>::zeros(m);
        let nt = g.ntheta;
        let np = g.npsi;
        // chain rule from X_p to y_p: ∂X/∂y_c = e_c + (y_c / t) e_t
        let chain = |p: usize, gvec: [f64; 4]| -> [f64; 3] {
            let t = x[p].t;
            [
                gvec[0] + gvec[3] * y[3 * p] / t,
                gvec[1] + gvec[3] * y[3 * p + 1] / t,
                gvec[2] + gvec[3] * y[3 * p + 2] / t,
            ]
        };
        let eta = [1.0, 1.0, 1.0, -1.0];
        let mut idx: Vec<usize> = Vec::with_capacity(3 * (2 * nt + np));
        let mut val: Vec<[f64; 3]> = Vec::with_capacity(3 * (2 * nt + np));
        for i in 0..nt {
            for j in 0..np {
                let q = g.idx(i, j);
                let jo = (j + np / 2) % np;
                let (e, gg) = (self.target[0][q], self.target[2][q]);
                let w = self.weight[q];
                let at = xt[q].to_array();
                let ap = xp[q].to_array();
                // (coefficient of ∂θ-part, coefficient of ∂ψ-part) for each residual:
                // δ(Xθ·Xθ) = 2 Xθ·δXθ, δ(Xθ·Xψ) = Xψ·δXθ + Xθ·δXψ, δ(Xψ·Xψ) = 2 Xψ·δXψ
                let rows: [([f64; 4], [f64; 4], f64); 3] = [
                    (at.map(|v| 2.0 * v), [0.0; 4], w / e),
                    (ap, at, w / (e * gg).sqrt()),
                    ([0.0; 4], ap.map(|v| 2.0 * v), w / gg),
                ];
                for (ri, (ct, cp, scale)) in rows.iter().enumerate() {
                    idx.clear();
                    val.clear();
                    let want_t = ct.iter().any(|v| *v != 0.0);
                    let want_p = cp.iter().any(|v| *v != 0.0);
                    let mut push = |p: usize, wgt: f64, cvec: &[f64; 4]| {
                        let gvec: [f64; 4] = std::array::from_fn(|mu| scale * wgt * eta[mu] * cvec[mu]);
                        let d = chain(p, gvec);
                        if let Some(pos) = idx.iter().position(|&z| z == p) {
                            for c in 0..3 {
                                val[pos][c] += d[c];
                            }
                        } else {
                            idx.push(p);
                            val.push(d);
                        }
                    };
                    if want_t {
                        for ii in 0..nt {
                            push(g.idx(ii, j), self.sp.theta_weight(i, ii), ct);
                            push(g.idx(ii, jo), self.sp.theta_weight(i, 2 * nt - 1 - ii), ct);
                        }
                    }
                    if want_p {
                        for jj in 0..np {
                            push(g.idx(i, jj), self.sp.psi_weight(j, jj), cp);
                        }
                    }
                    let rv = r[3 * q + ri];
                    for (a, pa) in idx.iter().enumerate() {
                        for ca in 0..3 {
                            let va = val[a][ca];
                            if va == 0.0 {
                                continue;
                            }
                            let ra = 3 * pa + ca;
                            jtr[ra] += va * rv;
                            for (b, pb) in idx.iter().enumerate() {
                                for cb in 0..3 {
                                    jtj[(ra, 3 * pb + cb)] += va * val[b][cb];
                                }
                            }
                        }
                    }
                }
            }
        }
        // gauge rows are dense
        let gw = self.gauge_weight;
        for d in 0..3 {
            let mut row = DVector::<f64>::zeros(m);
            for (k, a) in self.area.iter().enumerate() {
                row[3 * k + d] = gw * a;
            }
            let rv = r[3 * n + d];
            jtr.axpy(rv, &row, 1.0);
            jtj.ger(1.0, &row, &row, 1.0);
        }
        for d in 0..3 {
            let mut row = DVector::<f64>::zeros(m);
            for (k, a) in self.area.iter().enumerate() {
                let p = &self.y0[3 * k..3 * k + 3];
                // ∂/∂q of (p × q)_d
                let grad = match d {
                    0 => [0.0, -p[2], p[1]],
                    1 => [p[2], 0.0, -p[0]],
                    _ => [-p[1], p[0], 0.0],
                };
                for c in 0..3 {
                    row[3 * k + c] = gw * a * grad[c];
                }
            }
            let rv = r[3 * n + 3 + d];
            jtr.axpy(rv, &row, 1.0);
            jtj.ger(1.0, &row, &row, 1.0);
        }
        (jtj, jtr)
    }
}

/// General embedder: Levenberg–Marquardt on the spatial parts of X with the
/// time component slaved to the hyperboloid. Residuals are the spectral induced
/// metric minus the target; six gauge rows fix the hyperbolic isometry.
pub fn embed_general(
    spec: &SurfaceSpec,
    kappa: f64,
    opts: &GeneralOptions,
    initial: Option<&[FourVector]>,
) -> Result<EmbeddedSurface> {
    admissible(spec, kappa)?;
    let grid = spec.grid;
    let target = spec_target(spec);
    let x0: Vec<FourVector> = match initial {
        Some(x) => {
            if x.len() != grid.len() {
                return Err(Error::InvalidInput("initial guess has wrong size".into()));
            }
            x.to_vec()
        }
        None => {
            let radius = (spec.area() / (4.0 * PI)).sqrt();
            embed_geodesic_sphere(radius, kappa, grid)?.x
        }
    };
    let sd = spec.area_density();
    let wts = grid.theta_weights();
    let mut area: Vec<f64> = (0..grid.len()).map(|k| wts[k / grid.npsi] * sd[k] * grid.dpsi()).collect();
    let total: f64 = area.iter().sum();
    for a in area.iter_mut() {
        *a /= total;
    }
    let weight: Vec<f64> = area.iter().map(|a| a.max(0.0).sqrt()).collect();
    let y0: Vec<f64> = x0.iter().flat_map(|v| [v.x1, v.x2, v.x3]).collect();
    let mut prob = LsqProblem {
        grid,
        sp: Spectral::new(grid),
        kappa,
        target: &target,
        weight,
        area,
        y0: y0.clone(),
        centroid0: [0.0; 3],
        gauge_weight: opts.gauge_weight,
    };
    prob.centroid0 = prob.centroid(&y0);

    let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let mut y = y0;
    let (mut r, mut x, mut xt, mut xp) = prob.residual(&y);
    let mut c = cost(&r);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let metric_of = |xt: &[FourVector], xp: &[FourVector]| -> [Vec<f64>; 3] {
        [
            xt.iter().map(|v| v.dot(v)).collect(),
            xt.iter().zip(xp).map(|(a, b)| a.dot(b)).collect(),
            xp.iter().map(|v| v.dot(v)).collect(),
        ]
    };
    let mut defect = metric_defect(&metric_of(&xt, &xp), &target);
    while iterations < opts.max_iter && defect > opts.tol_defect {
        iterations += 1;
        let (jtj, jtr) = prob.normal_equations(&y, &r, &x, &xt, &xp);
        let mut accepted = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for d in 0..a.nrows() {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&jtr)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial: Vec<f64> = y.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let (rt, xt_x, xt_t, xt_p) = prob.residual(&trial);
            let ct = cost(&rt);
            if ct < c {
                y = trial;
                r = rt;
                x = xt_x;
                xt = xt_t;
                xp = xt_p;
                c = ct;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        defect = metric_defect(&metric_of(&xt, &xp), &target);
        if !accepted {
            break;
        }
    }
    let mut es = finish(grid, kappa, Strategy::General, x, target);
    es.iterations = iterations;
    es.certified = es.defect <= opts.tol_defect.max(1e-12) && es.principal.iter().all(positive_definite);
    Ok(es)
}

/// Dispatch on the requested strategy.
pub fn embed(
    spec: &SurfaceSpec,
    kappa: f64,
    strategy: Strategy,
    opts: &GeneralOptions,
) -> Result<EmbeddedSurface> {
    match strategy {
        Strategy::ClosedForm => match spec.preset {
            Some(crate::surface::Preset::RoundSphere { radius }) => {
                admissible(spec, kappa)?;
                embed_geodesic_sphere(radius, kappa, spec.grid)
            }
            _ => Err(Error::InvalidInput(
                "closed-form strategy is only available for the round-sphere preset".into(),
            )),
        },
        Strategy::Axisymmetric => embed_axisymmetric(spec, kappa),
        Strategy::General => embed_general(spec, kappa, opts, None),
    }
}

/// The light-cone map γ₀ = κX + N.
pub fn gauss_map(es: &EmbeddedSurface) -> Vec<FourVector> {
    es.x.iter().zip(&es.normal).map(|(x, n)| *x * es.kappa + *n).collect()
}

/// Isometry defect recomputed from the stored positions.
pub fn isometry_defect(es: &EmbeddedSurface) -> f64 {
    let sp = Spectral::new(es.grid);
    metric_defect(&induced_metric(&derivatives(&sp, &es.x)), &es.target)
}

/// Element of SO⁺(3,1) acting on column four-vectors (x1, x2, x3, t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lorentz(pub Matrix4<f64>);

impl Lorentz {
    pub fn identity() -> Self {
        Lorentz(Matrix4::identity())
    }

    /// exp of the Lie algebra element with coefficients `w`: rotations about
    /// x1, x2, x3, then boosts along x1, x2, x3.
    pub fn from_generators(w: &[f64; 6]) -> Self {
        Lorentz(expm(&generator(w)))
    }

    pub fn apply(&self, v: &FourVector) -> FourVector {
        let r = self.0 * Vector4::new(v.x1, v.x2, v.x3, v.t);
        FourVector::new(r[0], r[1], r[2], r[3])
    }

    pub fn compose(&self, o: &Lorentz) -> Lorentz {
        Lorentz(self.0 * o.0)
    }

    /// max |Λᵀ η Λ − η|.
    pub fn defect(&self) -> f64 {
        let eta = Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 1.0, -1.0));
        (self.0.transpose() * eta * self.0 - eta).amax()
    }
}

/// Lie algebra element for generator coefficients ordered as rotations about
/// x1, x2, x3 followed by boosts along x1, x2, x3.
fn generator(w: &[f64; 6]) -> Matrix4<f64> {
    let mut g = Matrix4::<f64>::zeros();
    g[(1, 2)] -= w[0];
    g[(2, 1)] += w[0];
    g[(2, 0)] -= w[1];
    g[(0, 2)] += w[1];
    g[(0, 1)] -= w[2];
    g[(1, 0)] += w[2];
    for a in 0..3 {
        g[(a, 3)] += w[3 + a];
        g[(3, a)] += w[3 + a];
    }
    g
}

fn expm(a: &Matrix4<f64>) -> Matrix4<f64> {
    let norm = a.amax() * 4.0;
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let b = a * scale;
    let mut term = Matrix4::identity();
    let mut sum = Matrix4::identity();
    for k in 1..20 {
        term = term * b / k as f64;
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

#[derive(Debug, Clone)]
pub struct Alignment {
    pub transform: Lorentz,
    /// max_k |ΛX_k − Y_k| / max_k |Y_k| (Euclidean norm of components).
    pub aligned_defect: f64,
    pub iterations: usize,
}

/// Gauss–Newton fit of a hyperbolic isometry Λ minimizing Σ|ΛX_k − Y_k|².
pub fn align(x: &[FourVector], y: &[FourVector]) -> Alignment {
    let gens: Vec<Lorentz> = (0..6)
        .map(|k| {
            let mut w = [0.0; 6];
            w[k] = 1.0;
            Lorentz(generator(&w))
        })
        .collect();
    let mut lam = Lorentz::identity();
    let mut iterations = 0;
    for _ in 0..100 {
        iterations += 1;
        let mut jtj = nalgebra::Matrix6::<f64>::zeros();
        let mut jtr = nalgebra::Vector6::<f64>::zeros();
        for (xa, ya) in x.iter().zip(y) {
            let lx = lam.apply(xa);
            let res = (lx - *ya).to_array();
            let cols: Vec<[f64; 4]> = gens.iter().map(|g| g.apply(&lx).to_array()).collect();
            for a in 0..6 {
                for m in 0..4 {
                    jtr[a] += cols[a][m] * res[m];
                }
                for b in 0..6 {
                    let mut s = 0.0;
                    for m in 0..4 {
                        s += cols[a][m] * cols[b][m];
                    }
                    jtj[(a, b)] += s;
                }
            }
        }
        let step = match jtj.cholesky() {
            Some(ch) => ch.solve(&(-jtr)),
            None => break,
        };
        let w: [f64; 6] = std::array::from_fn(|k| step[k]);
        lam = Lorentz::from_generators(&w).compose(&lam);
        if step.amax() < 1e-14 {
            break;
        }
    }
    let scale = y.iter().map(|v| v.to_array().iter().map(|c| c * c).sum::<f64>().sqrt()).fold(0.0, f64::max);
    let worst = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let d = (lam.apply(a) - *b).to_array();
            d.iter().map(|c| c * c).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max);
    Alignment { transform: lam, aligned_defect: worst / scale, iterations }
}

/// Tab-separated table of the embedding, one row per node.
pub fn embedding_table(es: &EmbeddedSurface) -> String {
    let gamma = gauss_map(es);
    let mut s = String::from(
        "i\tj\ttheta\tpsi\tx1\tx2\tx3\tt\tn1\tn2\tn3\tnt\tlambda1\tlambda2\tgamma1\tgamma2\tgamma3\tgammat\n",
    );
    for (i, j, th, ps) in es.grid.nodes() {
        let k = es.grid.idx(i, j);
        let (x, n, g, p) = (es.x[k], es.normal[k], gamma[k], es.principal[k]);
        let _ = writeln!(
            s,
            "{i}\t{j}\t{th:.17e}\t{ps:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}",
            x.x1, x.x2, x.x3, x.t, n.x1, n.x2, n.x3, n.t, p.lambda[0], p.lambda[1], g.x1, g.x2, g.x3, g.t
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{HSource, Preset};

    fn spheroid(n: usize, c: f64) -> SurfaceSpec {
        SurfaceSpec::from_preset(
            Preset::Spheroid { a: 1.0, c },
            LatLonGrid::new(n, n).unwrap(),
            HSource::ReferenceScaled { scale: 1.0 },
        )
        .unwrap()
    }

    #[test]
    fn principal_data_reconstructs_forms() {
        let g = [2.0, 0.3, 1.5];
        let h = [1.0, -0.4, 2.2];
        let p = PrincipalData::from_forms(g, h);
        let mut gg = [0.0; 3];
        let mut hh = [0.0; 3];
        for a in 0..2 {
            let w = p.omega[a];
            gg[0] += w[0] * w[0];
            gg[1] += w[0] * w[1];
            gg[2] += w[1] * w[1];
            hh[0] += p.lambda[a] * w[0] * w[0];
            hh[1] += p.lambda[a] * w[0] * w[1];
            hh[2] += p.lambda[a] * w[1] * w[1];
            for b in 0..2 {
                let d = w[0] * p.frame[b][0] + w[1] * p.frame[b][1];
                assert!((d - if a == b { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        for c in 0..3 {
            assert!((gg[c] - g[c]).abs() < 1e-14);
            assert!((hh[c] - h[c]).abs() < 1e-14);
        }
        assert!(p.lambda[0] <= p.lambda[1]);
    }

    #[test]
    fn geodesic_sphere_geometry() {
        let grid = LatLonGrid::new(16, 16).unwrap();
        let es = embed_geodesic_sphere(1.0, 1.0, grid).unwrap();
        assert!(es.defect < 1e-12);
        let (normal, _, h, principal) = second_fundamental_form(&grid, &es.x);
        let lam = 1.0 / (1f64.asinh()).tanh();
        for k in 0..grid.len() {
            assert!((normal[k] - es.normal[k]).max_abs() < 1e-11, "normal orientation");
            assert!((principal[k].lambda[0] - lam).abs() < 1e-10);
            assert!((principal[k].lambda[1] - lam).abs() < 1e-10);
            assert!((h[0][k] - es.h[0][k]).abs() < 1e-10);
        }
        for g in gauss_map(&es) {
            assert!(g.norm_sq().abs() < 1e-12 && g.t > 0.0);
        }
    }

    #[test]
    fn axisymmetric_reproduces_sphere() {
        let grid = LatLonGrid::new(24, 24).unwrap();
        let spec = SurfaceSpec::from_preset(
            Preset::RoundSphere { radius: 1.0 },
            grid,
            HSource::ReferenceScaled { scale: 1.0 },
        )
        .unwrap();
        let a = embed_axisymmetric(&spec, 1.0).unwrap();
        let b = embed_geodesic_sphere(1.0, 1.0, grid).unwrap();
        for k in 0..grid.len() {
            assert!((a.x[k] - b.x[k]).max_abs() < 1e-8);
        }
        assert!(a.closure.unwrap() < 1e-10);
    }

    #[test]
    fn axisymmetric_spheroid_defect() {
        let es = embed_axisymmetric(&spheroid(48, 0.8), 1.0).unwrap();
        assert!(es.defect < 1e-8, "{}", es.defect);
        assert!(es.certified);
        assert!(es.require_horospherical().is_ok());
    }

    #[test]
    fn rejects_non_axisymmetric() {
        let grid = LatLonGrid::new(16, 16).unwrap();
        let mut spec = spheroid(16, 0.8);
        for (i, j, _, p) in grid.nodes() {
            spec.g_tt[grid.idx(i, j)] *= 1.0 + 0.01 * p.cos();
        }
        assert!(matches!(embed_axisymmetric(&spec, 1.0), Err(Error::NotAxisymmetric(_))));
    }

    #[test]
    fn lorentz_generators_preserve_metric() {
        let l = Lorentz::from_generators(&[0.3, -0.2, 0.5, 0.4, 0.1, -0.7]);
        assert!(l.defect() < 1e-12);
    }

    #[test]
    fn alignment_recovers_known_isometry() {
        let es = embed_axisymmetric(&spheroid(12, 0.8), 1.0).unwrap();
        let l = Lorentz::from_generators(&[0.1, 0.2, -0.1, 0.05, -0.1, 0.2]);
        let moved: Vec<FourVector> = es.x.iter().map(|v| l.apply(v)).collect();
        let al = align(&moved, &es.x);
        assert!(al.aligned_defect < 1e-10, "{}", al.aligned_defect);
    }
}
