//! Input surfaces: metric on the lat-lon grid, mean-curvature data, intrinsic
//! curvature and the admissibility test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::LatLonGrid;

/// Analytic surfaces of sphere topology with closed-form curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Preset {
    /// Round sphere of radius R.
    RoundSphere { radius: f64 },
    /// Spheroid with equatorial radius `a` and polar semi-axis `c`
    /// (oblate for c < a, prolate for c > a).
    Spheroid { a: f64, c: f64 },
    /// Rotationally symmetric metric S²(dθ² + f(θ)² dψ²), f = sin θ − β sin³ θ.
    /// Curvature is positive near the poles and dips to (1 − 3β)/((1 − β)S²) on
    /// the equator, so β > 1/3 produces a negatively curved band.
    Band { depth: f64, scale: f64 },
}

impl Preset {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Preset::RoundSphere { radius } => radius > 0.0,
            Preset::Spheroid { a, c } => a > 0.0 && c > 0.0,
            Preset::Band { depth, scale } => (0.0..1.0).contains(&depth) && scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid preset parameters: {self:?}")))
        }
    }

    /// (g_θθ, g_θψ, g_ψψ) at (θ, ψ).
    pub fn metric(&self, theta: f64, _psi: f64) -> [f64; 3] {
        let (s, c) = theta.sin_cos();
        match *self {
            Preset::RoundSphere { radius } => [radius * radius, 0.0, radius * radius * s * s],
            Preset::Spheroid { a, c: cc } => {
                [a * a * c * c + cc * cc * s * s, 0.0, a * a * s * s]
            }
            Preset::Band { depth, scale } => {
                let f = s - depth * s * s * s;
                [scale * scale, 0.0, scale * scale * f * f]
            }
        }
    }

    /// Closed-form Gaussian curvature.
    pub fn curvature(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        match *self {
            Preset::RoundSphere { radius } => 1.0 / (radius * radius),
            Preset::Spheroid { a, c: cc } => {
                let d = a * a * c * c + cc * cc * s * s;
                cc * cc / (d * d)
            }
            Preset::Band { depth, scale } => {
                (1.0 + depth * (6.0 * c * c - 3.0 * s * s))
                    / ((1.0 - depth * s * s) * scale * scale)
            }
        }
    }

    /// Mean curvature of the standard embedding in Euclidean R³, where one exists.
    pub fn euclidean_mean_curvature(&self, theta: f64) -> Option<f64> {
        let (s, c) = theta.sin_cos();
        match *self {
            Preset::RoundSphere { radius } => Some(2.0 / radius),
            Preset::Spheroid { a, c: cc } => {
                let d = a * a * c * c + cc * cc * s * s;
                Some(a * cc / d.powf(1.5) + cc / (a * d.sqrt()))
            }
            Preset::Band { .. } => None,
        }
    }

    pub fn is_axisymmetric(&self) -> bool {
        true
    }
}

/// Where the mean-curvature data ℋ comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum HSource {
    /// Time-symmetric data: ℋ = H.
    Riemannian { h: Vec<f64> },
    /// General data: ℋ = √(H² − (tr_Σ p)²).
    Spacetime { h: Vec<f64>, trp: Vec<f64> },
    /// ℋ = scale · H₀, with H₀ the mean curvature of the reference embedding.
    /// Only resolvable once the embedding exists.
    ReferenceScaled { scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSpec {
    pub grid: LatLonGrid,
    pub g_tt: Vec<f64>,
    pub g_tp: Vec<f64>,
    pub g_pp: Vec<f64>,
    pub hsource: HSource,
    pub preset: Option<Preset>,
}

impl SurfaceSpec {
    pub fn from_preset(preset: Preset, grid: LatLonGrid, hsource: HSource) -> Result<Self> {
        preset.validate()?;
        let mut g_tt = Vec::with_capacity(grid.len());
        let mut g_tp = Vec::with_capacity(grid.len());
        let mut g_pp = Vec::with_capacity(grid.len());
        for (_, _, t, p) in grid.nodes() {
            let m = preset.metric(t, p);
            g_tt.push(m[0]);
            g_tp.push(m[1]);
            g_pp.push(m[2]);
        }
        let spec = SurfaceSpec { grid, g_tt, g_tp, g_pp, hsource, preset: Some(preset) };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_grid(
        grid: LatLonGrid,
        g_tt: Vec<f64>,
        g_tp: Vec<f64>,
        g_pp: Vec<f64>,
        hsource: HSource,
    ) -> Result<Self> {
        let spec = SurfaceSpec { grid, g_tt, g_tp, g_pp, hsource, preset: None };
        spec.validate()?;
        Ok(spec)
    }

    /// Euclidean mean curvature of a preset sampled on the grid.
    pub fn preset_euclidean_h(preset: &Preset, grid: &LatLonGrid) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(grid.len());
        for (_, _, t, _) in grid.nodes() {
            out.push(preset.euclidean_mean_curvature(t)?);
        }
        Some(out)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        if self.g_tt.len() != n || self.g_tp.len() != n || self.g_pp.len() != n {
            return Err(Error::InvalidInput(format!(
                "metric arrays must have {n} entries for a {}x{} grid",
                self.grid.ntheta, self.grid.npsi
            )));
        }
        match &self.hsource {
            HSource::Riemannian { h } if h.len() != n => {
                return Err(Error::InvalidInput("H field has wrong length".into()))
            }
            HSource::Spacetime { h, trp } if h.len() != n || trp.len() != n => {
                return Err(Error::InvalidInput("H or trp field has wrong length".into()))
            }
            _ => {}
        }
        for i in 0..self.grid.ntheta {
            for j in 0..self.grid.npsi {
                let k = self.grid.idx(i, j);
                let (e, f, g) = (self.g_tt[k], self.g_tp[k], self.g_pp[k]);
                let det = e * g - f * f;
                if !(e > 0.0) || !(det > 0.0) || !det.is_finite() {
                    return Err(Error::SingularMetric { i, j, det });
                }
            }
        }
        Ok(())
    }

    /// Signed-free area density √det g with respect to dθ dψ.
    pub fn area_density(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|k| (self.g_tt[k] * self.g_pp[k] - self.g_tp[k] * self.g_tp[k]).sqrt())
            .collect()
    }

    pub fn area(&self) -> f64 {
        let one = vec![1.0; self.grid.len()];
        self.grid.integrate(&one, &self.area_density())
    }

    /// True when the metric components do not depend on ψ (to `tol`, relative)
    /// and g_θψ vanishes.
    pub fn axisymmetry_defect(&self) -> f64 {
        let g = &self.grid;
        let mut worst: f64 = 0.0;
        for i in 0..g.ntheta {
            let k0 = g.idx(i, 0);
            let (e0, p0) = (self.g_tt[k0], self.g_pp[k0]);
            for j in 0..g.npsi {
                let k = g.idx(i, j);
                worst = worst
                    .max((self.g_tt[k] - e0).abs() / e0)
                    .max((self.g_pp[k] - p0).abs() / p0)
                    .max(self.g_tp[k].abs() / (e0 * p0).sqrt());
            }
        }
        worst
    }
}

/// Gaussian curvature from the metric by the divergence form
/// K = [∂ψ((√g/E) Γ^ψ_θθ) − ∂θ((√g/E) Γ^ψ_θψ)] / √g
/// with centred second-order differences; rows beyond the poles are filled by
/// reflection (E, G even; F and the oriented √g odd).
pub fn gaussian_curvature(spec: &SurfaceSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let g = &spec.grid;
    let (nt, np) = (g.ntheta as isize, g.npsi as isize);
    let (ht, hp) = (g.dtheta(), g.dpsi());
    let sd = spec.area_density();

    let e = |i: isize, j: isize| g.ghost(&spec.g_tt, i, j, 1.0);
    let f = |i: isize, j: isize| g.ghost(&spec.g_tp, i, j, -1.0);
    let gg = |i: isize, j: isize| g.ghost(&spec.g_pp, i, j, 1.0);
    let s = |i: isize, j: isize| g.ghost(&sd, i, j, -1.0);

    // P = (√g/E)Γ^ψ_θψ and Q = (√g/E)Γ^ψ_θθ on rows -1..=nt.
    let rows = (nt + 2) as usize;
    let mut pf = vec![0.0; rows * np as usize];
    let mut qf = vec![0.0; rows * np as usize];
    for i in -1..=nt {
        for j in 0..np {
            let (ei, fi) = (e(i, j), f(i, j));
            let e_u = (e(i + 1, j) - e(i - 1, j)) / (2.0 * ht);
            let f_u = (f(i + 1, j) - f(i - 1, j)) / (2.0 * ht);
            let g_u = (gg(i + 1, j) - gg(i - 1, j)) / (2.0 * ht);
            let e_v = (e(i, j + 1) - e(i, j - 1)) / (2.0 * hp);
            let si = s(i, j);
            let k = ((i + 1) * np + j) as usize;
            pf[k] = (ei * g_u - fi * e_v) / (2.0 * ei * si);
            qf[k] = (2.0 * ei * f_u - ei * e_v - fi * e_u) / (2.0 * ei * si);
        }
    }
    let at = |a: &[f64], i: isize, j: isize| a[((i + 1) * np + j.rem_euclid(np)) as usize];
    let mut k = vec![0.0; g.len()];
    for i in 0..nt {
        for j in 0..np {
            let q_v = (at(&qf, i, j + 1) - at(&qf, i, j - 1)) / (2.0 * hp);
            let p_u = (at(&pf, i + 1, j) - at(&pf, i - 1, j)) / (2.0 * ht);
            k[g.idx(i as usize, j as usize)] = (q_v - p_u) / sd[g.idx(i as usize, j as usize)];
        }
    }
    Ok(k)
}

/// Values at the north and south poles, taken as the mean over the adjacent ring.
pub fn pole_average(grid: &LatLonGrid, f: &[f64]) -> (f64, f64) {
    let np = grid.npsi;
    let north = f[..np].iter().sum::<f64>() / np as f64;
    let south = f[grid.len() - np..].iter().sum::<f64>() / np as f64;
    (north, south)
}

/// Effective mean curvature ℋ for the two explicit data sources.
pub fn effective_h(spec: &SurfaceSpec) -> Result<Vec<f64>> {
    match &spec.hsource {
        HSource::Riemannian { h } => {
            if let Some((k, v)) = h.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
                let (i, j) = (k / spec.grid.npsi, k % spec.grid.npsi);
                return Err(Error::Admissibility(format!(
                    "mean curvature must be positive; H = {v} at node (i={i}, j={j})"
                )));
            }
            Ok(h.clone())
        }
        HSource::Spacetime { h, trp } => {
            let mut worst = (f64::INFINITY, 0usize);
            let mut out = Vec::with_capacity(h.len());
            for (k, (hh, tp)) in h.iter().zip(trp).enumerate() {
                let margin = hh - tp.abs();
                if margin < worst.0 {
                    worst = (margin, k);
                }
                out.push((hh * hh - tp * tp).max(0.0).sqrt());
            }
            if !(worst.0 > 0.0) {
                let k = worst.1;
                let (i, j) = (k / spec.grid.npsi, k % spec.grid.npsi);
                return Err(Error::Admissibility(format!(
                    "H must exceed |tr p|; worst node (i={i}, j={j}) with H = {}, tr p = {}",
                    h[k], trp[k]
                )));
            }
            Ok(out)
        }
        HSource::ReferenceScaled { .. } => Err(Error::InvalidInput(
            "reference-scaled mean curvature needs the reference embedding".into(),
        )),
    }
}

/// ℋ for any source, given the reference mean curvature H₀(·, 0).
pub fn effective_h_with_reference(spec: &SurfaceSpec, h0: &[f64]) -> Result<Vec<f64>> {
    match &spec.hsource {
        HSource::ReferenceScaled { scale } => {
            if !(*scale > 0.0) {
                return Err(Error::Admissibility(format!(
                    "mean curvature scale must be positive, got {scale}"
                )));
            }
            Ok(h0.iter().map(|v| scale * v).collect())
        }
        _ => effective_h(spec),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    #[serde(skip)]
    pub k: Vec<f64>,
    pub kappa: f64,
    pub min_k: f64,
    /// Node (i, j) where K is smallest.
    pub min_k_node: (usize, usize),
    /// min(H − |tr p|); for a reference-scaled source only its sign is
    /// meaningful and it equals the scale.
    pub min_h_margin: f64,
    pub kappa_floor: f64,
    pub gauss_bonnet: f64,
    pub pass: bool,
}

impl AdmissibilityReport {
    pub fn summary(&self) -> String {
        format!(
            "kappa = {}, min K = {:.6e} at (i={}, j={}), kappa_floor = {:.6e}, min(H - |tr p|) = {:.6e}, pass = {}",
            self.kappa,
            self.min_k,
            self.min_k_node.0,
            self.min_k_node.1,
            self.kappa_floor,
            self.min_h_margin,
            self.pass
        )
    }
}

pub fn check_admissibility(spec: &SurfaceSpec, kappa: f64) -> Result<AdmissibilityReport> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidInput(format!("kappa must be positive, got {kappa}")));
    }
    let k = gaussian_curvature(spec)?;
    let (mut min_k, mut at) = (f64::INFINITY, 0usize);
    for (idx, v) in k.iter().enumerate() {
        if *v < min_k {
            min_k = *v;
            at = idx;
        }
    }
    let min_h_margin = match &spec.hsource {
        HSource::Riemannian { h } => h.iter().cloned().fold(f64::INFINITY, f64::min),
        HSource::Spacetime { h, trp } => {
            h.iter().zip(trp).map(|(a, b)| a - b.abs()).fold(f64::INFINITY, f64::min)
        }
        HSource::ReferenceScaled { scale } => *scale,
    };
    let gauss_bonnet = spec.grid.integrate(&k, &spec.area_density());
    let pass = min_k > -kappa * kappa && min_h_margin > 0.0;
    Ok(AdmissibilityReport {
        kappa_floor: (-min_k).max(0.0).sqrt(),
        k,
        kappa,
        min_k,
        min_k_node: (at / spec.grid.npsi, at % spec.grid.npsi),
        min_h_margin,
        gauss_bonnet,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec(p: Preset, n: usize) -> SurfaceSpec {
        let grid = LatLonGrid::new(n, n).unwrap();
        SurfaceSpec::from_preset(p, grid, HSource::ReferenceScaled { scale: 1.0 }).unwrap()
    }

    fn max_rel_error(p: Preset, n: usize) -> f64 {
        let s = spec(p, n);
        let k = gaussian_curvature(&s).unwrap();
        s.grid
            .nodes()
            .map(|(i, j, t, _)| {
                let exact = p.curvature(t);
                ((k[s.grid.idx(i, j)] - exact) / exact).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn sphere_curvature_is_second_order() {
        let n = 32;
        let h = PI / n as f64;
        let err = max_rel_error(Preset::RoundSphere { radius: 2.0 }, n);
        assert!(err < h * h, "{err}");
    }

    #[test]
    fn spheroid_curvature_converges_at_second_order() {
        let p = Preset::Spheroid { a: 1.0, c: 0.5 };
        let e: Vec<f64> = [32, 64, 128].iter().map(|&n| max_rel_error(p, n)).collect();
        for w in e.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.9, "{e:?}");
        }
        assert!((p.curvature(PI / 2.0) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn band_minimum() {
        let p = Preset::Band { depth: 0.5, scale: 1.0 };
        assert!((p.curvature(PI / 2.0) + 1.0).abs() < 1e-14);
        let s = spec(p, 64);
        let r = check_admissibility(&s, 0.9).unwrap();
        assert!(!r.pass);
        assert!((r.kappa_floor - 1.0).abs() < 2e-2, "{}", r.kappa_floor);
        assert!(check_admissibility(&s, 1.1).unwrap().pass);
        assert!((r.gauss_bonnet - 4.0 * PI).abs() < 0.04 * PI);
    }

    #[test]
    fn effective_h_examples() {
        let g = LatLonGrid::new(8, 8).unwrap();
        let mk = |h: f64, t: f64| {
            SurfaceSpec::from_preset(
                Preset::RoundSphere { radius: 1.0 },
                g,
                HSource::Spacetime { h: vec![h; g.len()], trp: vec![t; g.len()] },
            )
            .unwrap()
        };
        assert!((effective_h(&mk(2.0, 0.0)).unwrap()[0] - 2.0).abs() < 1e-15);
        assert!((effective_h(&mk(2.0, 1.2)).unwrap()[0] - 1.6).abs() < 1e-15);
        assert!(matches!(effective_h(&mk(1.0, 1.0)), Err(Error::Admissibility(_))));
    }

    #[test]
    fn singular_metric_rejected() {
        let g = LatLonGrid::new(8, 8).unwrap();
        let mut gpp = vec![1.0; g.len()];
        gpp[g.idx(2, 3)] = 0.0;
        let r = SurfaceSpec::from_grid(
            g,
            vec![1.0; g.len()],
            vec![0.0; g.len()],
            gpp,
            HSource::ReferenceScaled { scale: 1.0 },
        );
        assert!(matches!(r, Err(Error::SingularMetric { i: 2, j: 3, .. })));
    }
}
