//! The geodesic normal foliation Σ_r of the exterior of the embedded surface.
//!
//! Leaf geometry comes from closed forms in the principal frame of Σ₀. Most
//! quantities are carried in the compactified variable s = e^{−2κr} ∈ [0, 1],
//! with the rescaled metric g̃ = e^{−2κr} g(r), which stays bounded as r → ∞.

use serde::Serialize;

use crate::embedding::EmbeddedSurface;
use crate::error::{Error, Result};
use crate::grid::LatLonGrid;
use crate::laplacian::LeafOperator;
use crate::minkowski::FourVector;

/// Radii of the leaves used by the flows, r₀ = 0 < r₁ < … < r_n = r_max.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub kappa: f64,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
}

impl Schedule {
    fn validate_args(kappa: f64, r_max: f64, steps: usize) -> Result<()> {
        if !(kappa > 0.0) {
            return Err(Error::InvalidInput(format!("kappa must be positive, got {kappa}")));
        }
        if steps < 16 {
            return Err(Error::InvalidInput(format!("need at least 16 steps, got {steps}")));
        }
        if !(r_max * kappa >= 2.0 - 1e-12) || !r_max.is_finite() {
            return Err(Error::InvalidInput(format!("r_max must be at least 2/kappa, got {r_max}")));
        }
        Ok(())
    }

    /// Uniform steps in σ = e^{−κr}.
    pub fn uniform_in_sigma(kappa: f64, r_max: f64, steps: usize) -> Result<Self> {
        Self::validate_args(kappa, r_max, steps)?;
        let end = (-kappa * r_max).exp();
        let s: Vec<f64> = (0..=steps)
            .map(|k| {
                let sigma = 1.0 + (end - 1.0) * k as f64 / steps as f64;
                sigma * sigma
            })
            .collect();
        Ok(Self::from_s(kappa, s, r_max))
    }

    /// Uniform steps in t = −e^{−2κr}/(4κ).
    pub fn uniform_in_t(kappa: f64, r_max: f64, steps: usize) -> Result<Self> {
        Self::validate_args(kappa, r_max, steps)?;
        let end = (-2.0 * kappa * r_max).exp();
        let s: Vec<f64> =
            (0..=steps).map(|k| 1.0 + (end - 1.0) * k as f64 / steps as f64).collect();
        Ok(Self::from_s(kappa, s, r_max))
    }

    /// Uniform steps in ξ(r) = (1 − e^{−κr}) + (1 − e^{−r/ℓ}).
    ///
    /// Far out this is uniform in σ; within a few ℓ of the surface the steps
    /// are at most ~2ℓ/steps in r however small κ is. ℓ is a length scale of
    /// the surface (the area radius in the pipeline).
    pub fn blended(kappa: f64, length: f64, r_max: f64, steps: usize) -> Result<Self> {
        Self::validate_args(kappa, r_max, steps)?;
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidInput(format!("length scale must be positive, got {length}")));
        }
        let xi = |r: f64| (1.0 - (-kappa * r).exp()) + (1.0 - (-r / length).exp());
        let total = xi(r_max);
        let mut r = Vec::with_capacity(steps + 1);
        r.push(0.0);
        for k in 1..steps {
            let target = total * k as f64 / steps as f64;
            let (mut lo, mut hi) = (*r.last().unwrap(), r_max);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if xi(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            r.push(0.5 * (lo + hi));
        }
        r.push(r_max);
        let s = r.iter().map(|v| (-2.0 * kappa * v).exp()).collect();
        Ok(Schedule { kappa, r, s })
    }

    fn from_s(kappa: f64, mut s: Vec<f64>, r_max: f64) -> Self {
        let n = s.len() - 1;
        s[0] = 1.0;
        s[n] = (-2.0 * kappa * r_max).exp();
        let mut r: Vec<f64> = s.iter().map(|v| -v.ln() / (2.0 * kappa)).collect();
        r[0] = 0.0;
        r[n] = r_max;
        Schedule { kappa, r, s }
    }

    /// Arbitrary increasing radii starting at 0.
    pub fn from_radii(kappa: f64, r: Vec<f64>) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::InvalidInput("kappa must be positive".into()));
        }
        if r.len() < 2 || r[0] != 0.0 || r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("radii must start at 0 and increase strictly".into()));
        }
        let s = r.iter().map(|v| (-2.0 * kappa * v).exp()).collect();
        Ok(Schedule { kappa, r, s })
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.r.len() - 1
    }

    pub fn r_max(&self) -> f64 {
        *self.r.last().unwrap()
    }

    /// t = −e^{−2κr}/(4κ), the time variable of the u flow.
    pub fn t(&self, k: usize) -> f64 {
        -self.s[k] / (4.0 * self.kappa)
    }

    /// τ = e^{−2κr}/(4κ), the time variable of the W flow.
    pub fn tau(&self, k: usize) -> f64 {
        self.s[k] / (4.0 * self.kappa)
    }

    /// Every other node; needs an even number of steps.
    pub fn coarsen(&self) -> Option<Schedule> {
        if self.steps() % 2 != 0 || self.steps() < 32 {
            return None;
        }
        Some(Schedule {
            kappa: self.kappa,
            r: self.r.iter().step_by(2).copied().collect(),
            s: self.s.iter().step_by(2).copied().collect(),
        })
    }

    pub fn same_as(&self, o: &Schedule) -> bool {
        self.kappa == o.kappa && self.r == o.r
    }
}

/// Principal data of Σ₀ needed to build every leaf.
#[derive(Debug, Clone)]
pub struct Foliation {
    pub grid: LatLonGrid,
    pub kappa: f64,
    pub mu: Vec<[f64; 2]>,
    omega: Vec<[[f64; 2]; 2]>,
    frame: Vec<[[f64; 2]; 2]>,
    x: Vec<FourVector>,
    normal: Vec<FourVector>,
}

/// Geometry of the leaf Σ_r on the fixed parameter grid.
#[derive(Debug, Clone)]
pub struct FoliationFrame {
    pub grid: LatLonGrid,
    pub kappa: f64,
    pub r: f64,
    pub s: f64,
    /// e^{−2κr} g(r), components (θθ, θψ, ψψ).
    pub g_tilde: [Vec<f64>; 3],
    /// √det g̃.
    pub sd_tilde: Vec<f64>,
    pub lam: Vec<[f64; 2]>,
    pub h0: Vec<f64>,
    pub rr: Vec<f64>,
    /// e^{−κr} X_r.
    pub x_scaled: Vec<FourVector>,
    /// √det g̃ · g̃⁻¹, components (θθ, θψ, ψψ).
    pub density_inverse: [Vec<f64>; 3],
}

impl Foliation {
    pub fn new(es: &EmbeddedSurface) -> Result<Self> {
        let mu = es.mu()?;
        Ok(Foliation {
            grid: es.grid,
            kappa: es.kappa,
            mu,
            omega: es.principal.iter().map(|p| p.omega).collect(),
            frame: es.principal.iter().map(|p| p.frame).collect(),
            x: es.x.clone(),
            normal: es.normal.clone(),
        })
    }

    pub fn frame_at(&self, r: f64) -> Result<FoliationFrame> {
        if !(r >= 0.0) {
            return Err(Error::InvalidInput(format!("leaf radius must be non-negative, got {r}")));
        }
        Ok(self.frame_at_s((-2.0 * self.kappa * r).exp(), r))
    }

    /// The r → ∞ leaf in rescaled form (limit metric, limit area element).
    pub fn limit_frame(&self) -> FoliationFrame {
        self.frame_at_s(0.0, f64::INFINITY)
    }

    /// Leaf at s = e^{−2κr}; `r` is carried along for reporting only.
    pub fn frame_at_s(&self, s: f64, r: f64) -> FoliationFrame {
        let k = self.kappa;
        let n = self.grid.len();
        let mut g = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut di = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut sd = vec![0.0; n];
        let mut lam = Vec::with_capacity(n);
        let mut h0 = Vec::with_capacity(n);
        let mut rr = Vec::with_capacity(n);
        let mut xs = Vec::with_capacity(n);
        for p in 0..n {
            let mut phi = [0.0; 2];
            let mut e = [0.0; 2];
            let mut c = [0.0; 2];
            for a in 0..2 {
                let m = self.mu[p][a];
                let q = (-2.0 * k * m).exp();
                // e^{-κr} sinh(κ(μ+r)) / sinh(κμ)
                phi[a] = ((k * m).exp() - s * (-k * m).exp()) / (2.0 * (k * m).sinh());
                e[a] = 2.0 * q / (1.0 - q * s);
                c[a] = 1.0 + e[a] * s;
            }
            let w = &self.omega[p];
            let v = &self.frame[p];
            for a in 0..2 {
                let f2 = phi[a] * phi[a];
                g[0][p] += f2 * w[a][0] * w[a][0];
                g[1][p] += f2 * w[a][0] * w[a][1];
                g[2][p] += f2 * w[a][1] * w[a][1];
                let ratio = phi[1 - a] / phi[a];
                di[0][p] += ratio * v[a][0] * v[a][0];
                di[1][p] += ratio * v[a][0] * v[a][1];
                di[2][p] += ratio * v[a][1] * v[a][1];
            }
            let det_w = (w[0][0] * w[1][1] - w[0][1] * w[1][0]).abs();
            for comp in di.iter_mut() {
                comp[p] *= det_w;
            }
            sd[p] = phi[0] * phi[1] * det_w;
            lam.push([k * c[0], k * c[1]]);
            h0.push(k * (c[0] + c[1]));
            rr.push(2.0 * k * k * (c[0] * c[1] - 1.0));
            xs.push((self.x[p] * (1.0 + s) + self.normal[p] * ((1.0 - s) / k)) * 0.5);
        }
        FoliationFrame {
            grid: self.grid,
            kappa: k,
            r,
            s,
            g_tilde: g,
            sd_tilde: sd,
            lam,
            h0,
            rr,
            x_scaled: xs,
            density_inverse: di,
        }
    }

    /// lim e^{−2κr} g(r).
    pub fn limit_metric(&self) -> [Vec<f64>; 3] {
        self.limit_frame().g_tilde
    }

    /// e_a(s) with λ_a = κ(1 + e_a s): the decaying part of the principal
    /// curvatures, free of cancellation for small s.
    pub fn excess(&self, s: f64) -> Vec<[f64; 2]> {
        self.mu
            .iter()
            .map(|m| {
                let q0 = (-2.0 * self.kappa * m[0]).exp();
                let q1 = (-2.0 * self.kappa * m[1]).exp();
                [2.0 * q0 / (1.0 - q0 * s), 2.0 * q1 / (1.0 - q1 * s)]
            })
            .collect()
    }
}

impl FoliationFrame {
    /// Metric g(r) itself; overflows for very large r.
    pub fn metric(&self) -> [Vec<f64>; 3] {
        let f = 1.0 / self.s;
        [
            self.g_tilde[0].iter().map(|v| v * f).collect(),
            self.g_tilde[1].iter().map(|v| v * f).collect(),
            self.g_tilde[2].iter().map(|v| v * f).collect(),
        ]
    }

    pub fn sqrt_det_g(&self) -> Vec<f64> {
        self.sd_tilde.iter().map(|v| v / self.s).collect()
    }

    /// X_r = cosh(κr) X + sinh(κr) N / κ.
    pub fn x_r(&self) -> Vec<FourVector> {
        let f = 1.0 / self.s.sqrt();
        self.x_scaled.iter().map(|x| *x * f).collect()
    }

    /// |A|² = λ₁² + λ₂².
    pub fn second_form_norm_sq(&self) -> Vec<f64> {
        self.lam.iter().map(|l| l[0] * l[0] + l[1] * l[1]).collect()
    }

    /// Second-order conservative Laplacian of the rescaled metric g̃.
    pub fn operator(&self) -> LeafOperator {
        LeafOperator::new(self.grid, &self.density_inverse, &self.sd_tilde)
    }

    /// Δ_r f = e^{−2κr} Δ̃ f.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let mut out = self.operator().apply(f);
        for v in out.iter_mut() {
            *v *= self.s;
        }
        out
    }

    /// Δ̃ f = e^{2κr} Δ_r f.
    pub fn rescaled_laplacian(&self, f: &[f64]) -> Vec<f64> {
        self.operator().apply(f)
    }

    /// ∫_{Σ_r} f dA_r written with the rescaled area element, times e^{−2κr}.
    pub fn integrate_rescaled(&self, f: &[f64]) -> f64 {
        self.grid.integrate(f, &self.sd_tilde)
    }
}

/// State of the Riccati system along one normal geodesic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiState {
    pub r: f64,
    pub lambda: [f64; 2],
    pub g: [f64; 3],
}

type Mat2 = [[f64; 2]; 2];

fn mul2(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn axpy2(a: &Mat2, s: f64, b: &Mat2) -> Mat2 {
    [[a[0][0] + s * b[0][0], a[0][1] + s * b[0][1]], [a[1][0] + s * b[1][0], a[1][1] + s * b[1][1]]]
}

fn eig2(m: &Mat2) -> [f64; 2] {
    let tr = m[0][0] + m[1][1];
    // discriminant without the tr²/4 − det cancellation
    let half = 0.5 * (m[0][0] - m[1][1]);
    let d = (half * half + m[0][1] * m[1][0]).max(0.0).sqrt();
    [0.5 * tr - d, 0.5 * tr + d]
}

/// Integrates S' = κ² I − S², g' = 2 g S with classical RK4 from the forms
/// (g₀, h₀) at one node, reporting the state at each requested radius.
pub fn riccati_oracle(
    g0: [f64; 3],
    h0: [f64; 3],
    kappa: f64,
    radii: &[f64],
    max_step: f64,
) -> Result<Vec<RiccatiState>> {
    let det = g0[0] * g0[2] - g0[1] * g0[1];
    let ginv: Mat2 = [[g0[2] / det, -g0[1] / det], [-g0[1] / det, g0[0] / det]];
    let hm: Mat2 = [[h0[0], h0[1]], [h0[1], h0[2]]];
    let mut sm = mul2(&ginv, &hm);
    let mut gm: Mat2 = [[g0[0], g0[1]], [g0[1], g0[2]]];
    let k2 = kappa * kappa;
    let rhs = |s: &Mat2, g: &Mat2| -> (Mat2, Mat2) {
        let s2 = mul2(s, s);
        let ds = [[k2 - s2[0][0], -s2[0][1]], [-s2[1][0], k2 - s2[1][1]]];
        let gs = mul2(g, s);
        (ds, [[2.0 * gs[0][0], 2.0 * gs[0][1]], [2.0 * gs[1][0], 2.0 * gs[1][1]]])
    };
    let mut r = 0.0;
    let mut out = Vec::with_capacity(radii.len());
    for (step_idx, &target) in radii.iter().enumerate() {
        if target < r {
            return Err(Error::InvalidInput("radii must be non-decreasing".into()));
        }
        let n = ((target - r) / max_step).ceil().max(0.0) as usize;
        let dr = if n > 0 { (target - r) / n as f64 } else { 0.0 };
        for _ in 0..n {
            let (k1s, k1g) = rhs(&sm, &gm);
            let (k2s, k2g) = rhs(&axpy2(&sm, 0.5 * dr, &k1s), &axpy2(&gm, 0.5 * dr, &k1g));
            let (k3s, k3g) = rhs(&axpy2(&sm, 0.5 * dr, &k2s), &axpy2(&gm, 0.5 * dr, &k2g));
            let (k4s, k4g) = rhs(&axpy2(&sm, dr, &k3s), &axpy2(&gm, dr, &k3g));
            for i in 0..2 {
                for j in 0..2 {
                    sm[i][j] += dr / 6.0 * (k1s[i][j] + 2.0 * k2s[i][j] + 2.0 * k3s[i][j] + k4s[i][j]);
                    gm[i][j] += dr / 6.0 * (k1g[i][j] + 2.0 * k2g[i][j] + 2.0 * k3g[i][j] + k4g[i][j]);
                }
            }
        }
        r = target;
        let lambda = eig2(&sm);
        if !lambda.iter().all(|v| v.is_finite()) {
            return Err(Error::NonConvergence(format!(
                "Riccati integration blew up at sample {step_idx} (r = {r})"
            )));
        }
        out.push(RiccatiState { r, lambda, g: [gm[0][0], 0.5 * (gm[0][1] + gm[1][0]), gm[1][1]] });
    }
    Ok(out)
}

/// Riccati trajectories for every node of an embedding.
pub fn riccati_oracle_surface(
    es: &EmbeddedSurface,
    radii: &[f64],
    max_step: f64,
) -> Result<Vec<Vec<RiccatiState>>> {
    (0..es.len())
        .map(|p| {
            riccati_oracle(
                [es.metric[0][p], es.metric[1][p], es.metric[2][p]],
                [es.h[0][p], es.h[1][p], es.h[2][p]],
                es.kappa,
                radii,
                max_step,
            )
            .map_err(|e| match e {
                Error::NonConvergence(m) => Error::NonConvergence(format!("node {p}: {m}")),
                other => other,
            })
        })
        .collect()
}

/// Pull-back of the Minkowski metric by γ₀, divided by 4κ².
pub fn gauss_map_metric(es: &EmbeddedSurface) -> [Vec<f64>; 3] {
    let sp = crate::grid::Spectral::new(es.grid);
    let gamma = crate::embedding::gauss_map(es);
    let comp = |f: fn(&FourVector) -> f64| gamma.iter().map(f).collect::<Vec<f64>>();
    let c = [comp(|v| v.x1), comp(|v| v.x2), comp(|v| v.x3), comp(|v| v.t)];
    let dt: Vec<Vec<f64>> = c.iter().map(|f| sp.d_theta(f, 1.0)).collect();
    let dp: Vec<Vec<f64>> = c.iter().map(|f| sp.d_psi(f)).collect();
    let eta = [1.0, 1.0, 1.0, -1.0];
    let n = es.len();
    let scale = 1.0 / (4.0 * es.kappa * es.kappa);
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for p in 0..n {
        for m in 0..4 {
            out[0][p] += eta[m] * dt[m][p] * dt[m][p] * scale;
            out[1][p] += eta[m] * dt[m][p] * dp[m][p] * scale;
            out[2][p] += eta[m] * dp[m][p] * dp[m][p] * scale;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::embed_geodesic_sphere;

    #[test]
    fn schedules_are_increasing() {
        for s in [
            Schedule::uniform_in_sigma(1.0, 8.0, 64).unwrap(),
            Schedule::uniform_in_t(0.5, 16.0, 64).unwrap(),
        ] {
            assert_eq!(s.r[0], 0.0);
            assert!(s.r.windows(2).all(|w| w[1] > w[0]));
            assert!((s.r_max() * s.kappa - 8.0).abs() < 1e-12);
        }
        assert!(Schedule::uniform_in_sigma(1.0, 1.0, 64).is_err());
        assert!(Schedule::uniform_in_sigma(1.0, 8.0, 8).is_err());
    }

    #[test]
    fn sphere_leaves_match_closed_form() {
        let kappa = 1.0;
        let grid = LatLonGrid::new(8, 8).unwrap();
        let es = embed_geodesic_sphere(1.0, kappa, grid).unwrap();
        let fol = Foliation::new(&es).unwrap();
        let mu = 1f64.asinh();
        for &r in &[0.0, 0.5, 3.0] {
            let f = fol.frame_at(r).unwrap();
            let h = 2.0 * kappa / (kappa * (mu + r)).tanh();
            for p in 0..grid.len() {
                assert!((f.h0[p] - h).abs() < 1e-12 * h);
                let xr = f.x_r()[p];
                assert!((xr.norm_sq() + 1.0 / (kappa * kappa)).abs() < 1e-8 * xr.t * xr.t);
            }
        }
        let f0 = fol.frame_at(0.0).unwrap();
        for p in 0..grid.len() {
            for c in 0..3 {
                assert!((f0.g_tilde[c][p] - es.target[c][p]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn riccati_fixed_point() {
        let st = riccati_oracle([1.0, 0.0, 1.0], [1.0, 0.0, 1.0], 1.0, &[0.0, 1.0, 4.0], 1e-2).unwrap();
        for s in st {
            assert!((s.lambda[0] - 1.0).abs() < 1e-14 && (s.lambda[1] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn negative_radius_rejected() {
        let es = embed_geodesic_sphere(1.0, 1.0, LatLonGrid::new(8, 8).unwrap()).unwrap();
        assert!(Foliation::new(&es).unwrap().frame_at(-1.0).is_err());
    }
}
