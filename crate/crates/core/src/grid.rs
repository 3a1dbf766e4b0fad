//! Latitude-longitude grid on the coordinate sphere.
//!
//! Nodes are cell centred in θ, θ_i = (i + ½)π/Nθ, so no node sits on a pole,
//! and uniform in ψ, ψ_j = 2πj/Nψ. Fields are stored row-major with θ as the
//! slow index. Crossing a pole maps (θ, ψ) to (-θ, ψ + π); a smooth function on
//! the sphere extends to a smooth 2π-periodic function along every great circle
//! through the poles (the double Fourier sphere), which is what the spectral
//! operators below rely on.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatLonGrid {
    pub ntheta: usize,
    pub npsi: usize,
}

impl LatLonGrid {
    pub fn new(ntheta: usize, npsi: usize) -> Result<Self> {
        if ntheta < 8 || npsi < 8 {
            return Err(Error::InvalidInput(format!(
                "grid must be at least 8x8, got {ntheta}x{npsi}"
            )));
        }
        if npsi % 2 != 0 {
            return Err(Error::InvalidInput(format!("npsi must be even, got {npsi}")));
        }
        Ok(LatLonGrid { ntheta, npsi })
    }

    pub fn len(&self) -> usize {
        self.ntheta * self.npsi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtheta(&self) -> f64 {
        PI / self.ntheta as f64
    }

    pub fn dpsi(&self) -> f64 {
        2.0 * PI / self.npsi as f64
    }

    pub fn theta(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dtheta()
    }

    pub fn psi(&self, j: usize) -> f64 {
        j as f64 * self.dpsi()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.npsi + j
    }

    /// (θ, ψ) of every node in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        (0..self.ntheta).flat_map(move |i| {
            (0..self.npsi).map(move |j| (i, j, self.theta(i), self.psi(j)))
        })
    }

    /// Sample a function of (θ, ψ) at the nodes.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.nodes().map(|(_, _, t, p)| f(t, p)).collect()
    }

    /// Resolve a possibly out-of-range (row, column) pair. Rows beyond a pole are
    /// reflected onto the other half of the meridian; the flag reports whether a
    /// pole was crossed (odd quantities change sign there).
    #[inline]
    pub fn wrap(&self, i: isize, j: isize) -> (usize, usize, bool) {
        let nt = self.ntheta as isize;
        let np = self.npsi as isize;
        let half = np / 2;
        let (ii, jj, crossed) = if i < 0 {
            (-1 - i, j + half, true)
        } else if i >= nt {
            (2 * nt - 1 - i, j + half, true)
        } else {
            (i, j, false)
        };
        debug_assert!(ii >= 0 && ii < nt, "reflection reaches past the opposite pole");
        (ii as usize, jj.rem_euclid(np) as usize, crossed)
    }

    /// Field value at a possibly ghost location; `parity` is +1 for quantities even
    /// under the pole reflection and -1 for odd ones.
    #[inline]
    pub fn ghost(&self, f: &[f64], i: isize, j: isize, parity: f64) -> f64 {
        let (ii, jj, crossed) = self.wrap(i, j);
        let v = f[self.idx(ii, jj)];
        if crossed {
            parity * v
        } else {
            v
        }
    }

    /// Quadrature weights in θ such that ∫∫ F dθ dψ ≈ Σ_ij w_i F_ij Δψ for any F
    /// of the form (smooth even function) × sin θ. These are Fejér's first-rule
    /// weights divided by sin θ_i, which makes area integrals spectrally accurate.
    pub fn theta_weights(&self) -> Vec<f64> {
        let n = self.ntheta;
        (0..n)
            .map(|i| {
                let th = self.theta(i);
                let mut s = 0.0;
                for k in 1..=n / 2 {
                    let kk = k as f64;
                    s += (2.0 * kk * th).cos() / (4.0 * kk * kk - 1.0);
                }
                (2.0 / n as f64) * (1.0 - 2.0 * s) / th.sin()
            })
            .collect()
    }

    /// ∫ f dA for the area density `sd` (√det g with respect to dθ dψ).
    pub fn integrate(&self, f: &[f64], sd: &[f64]) -> f64 {
        let w = self.theta_weights();
        self.integrate_with(&w, f, sd)
    }

    /// Same as `integrate` with precomputed `theta_weights`.
    pub fn integrate_with(&self, w: &[f64], f: &[f64], sd: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.ntheta {
            let mut row = 0.0;
            for j in 0..self.npsi {
                let k = self.idx(i, j);
                row += f[k] * sd[k];
            }
            total += w[i] * row;
        }
        total * self.dpsi()
    }
}

/// Periodic first- and second-derivative kernels on M equispaced points (M even).
#[derive(Debug, Clone)]
struct PeriodicKernel {
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl PeriodicKernel {
    fn new(m: usize) -> Self {
        let h = 2.0 * PI / m as f64;
        let mut d1 = vec![0.0; m];
        let mut d2 = vec![0.0; m];
        d2[0] = -PI * PI / (3.0 * h * h) - 1.0 / 6.0;
        for k in 1..m {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let x = 0.5 * k as f64 * h;
            d1[k] = 0.5 * sign / x.tan();
            d2[k] = -sign / (2.0 * x.sin() * x.sin());
        }
        PeriodicKernel { d1, d2 }
    }

    /// Derivative at point p of the periodic samples `v` with kernel `ker`.
    #[inline]
    fn apply(ker: &[f64], v: &[f64], p: usize) -> f64 {
        let m = v.len();
        let mut s = 0.0;
        for (q, vq) in v.iter().enumerate() {
            // kernel entry for offset p - q
            let off = (p + m - q) % m;
            s += ker[off] * vq;
        }
        s
    }
}

/// Spectral differentiation on the double Fourier sphere.
#[derive(Debug, Clone)]
pub struct Spectral {
    grid: LatLonGrid,
    theta: PeriodicKernel,
    psi: PeriodicKernel,
}

impl Spectral {
    pub fn new(grid: LatLonGrid) -> Self {
        Spectral {
            grid,
            theta: PeriodicKernel::new(2 * grid.ntheta),
            psi: PeriodicKernel::new(grid.npsi),
        }
    }

    pub fn grid(&self) -> &LatLonGrid {
        &self.grid
    }

    /// Meridian great circle through column j, extended across both poles.
    fn meridian(&self, f: &[f64], j: usize, parity: f64) -> Vec<f64> {
        let g = &self.grid;
        let n = g.ntheta;
        let jo = (j + g.npsi / 2) % g.npsi;
        let mut v = Vec::with_capacity(2 * n);
        for i in 0..n {
            v.push(f[g.idx(i, j)]);
        }
        for k in n..2 * n {
            v.push(parity * f[g.idx(2 * n - 1 - k, jo)]);
        }
        v
    }

    fn theta_apply(&self, f: &[f64], parity: f64, second: bool) -> Vec<f64> {
        let g = &self.grid;
        let ker = if second { &self.theta.d2 } else { &self.theta.d1 };
        let mut out = vec![0.0; g.len()];
        for j in 0..g.npsi {
            let v = self.meridian(f, j, parity);
            for i in 0..g.ntheta {
                out[g.idx(i, j)] = PeriodicKernel::apply(ker, &v, i);
            }
        }
        out
    }

    fn psi_apply(&self, f: &[f64], second: bool) -> Vec<f64> {
        let g = &self.grid;
        let ker = if second { &self.psi.d2 } else { &self.psi.d1 };
        let mut out = vec![0.0; g.len()];
        for i in 0..g.ntheta {
            let row = &f[g.idx(i, 0)..g.idx(i, 0) + g.npsi];
            for j in 0..g.npsi {
                out[g.idx(i, j)] = PeriodicKernel::apply(ker, row, j);
            }
        }
        out
    }

    /// ∂θ f; `parity` is the reflection parity of f (+1 for scalars).
    pub fn d_theta(&self, f: &[f64], parity: f64) -> Vec<f64> {
        self.theta_apply(f, parity, false)
    }

    pub fn d_theta2(&self, f: &[f64], parity: f64) -> Vec<f64> {
        self.theta_apply(f, parity, true)
    }

    pub fn d_psi(&self, f: &[f64]) -> Vec<f64> {
        self.psi_apply(f, false)
    }

    pub fn d_psi2(&self, f: &[f64]) -> Vec<f64> {
        self.psi_apply(f, true)
    }

    /// ∂θ∂ψ f; ∂ψ preserves parity.
    pub fn d_theta_psi(&self, f: &[f64], parity: f64) -> Vec<f64> {
        self.d_theta(&self.d_psi(f), parity)
    }

    /// Coefficient of f at node (k_row, col) in ∂θ f evaluated at node (i, col)
    /// and at the antipodal column; used to assemble Jacobians. Returns the
    /// weight of extended-meridian sample q for output row i.
    pub fn theta_weight(&self, i: usize, q: usize) -> f64 {
        let m = 2 * self.grid.ntheta;
        self.theta.d1[(i + m - q) % m]
    }

    /// Weight of column q in ∂ψ at column j.
    pub fn psi_weight(&self, j: usize, q: usize) -> f64 {
        let m = self.grid.npsi;
        self.psi.d1[(j + m - q) % m]
    }
}

/// Evaluate the trigonometric interpolant of periodic samples `v` (M even,
/// points 2πk/M + shift) at the points `x`.
fn trig_interp(v: &[f64], shift: f64, x: &[f64]) -> Vec<f64> {
    let m = v.len();
    let h = 2.0 * PI / m as f64;
    let half = m / 2;
    // DFT coefficients a_k, b_k of v in the shifted variable.
    let mut a = vec![0.0; half + 1];
    let mut b = vec![0.0; half + 1];
    for k in 0..=half {
        let (mut sa, mut sb) = (0.0, 0.0);
        for (q, vq) in v.iter().enumerate() {
            let ang = k as f64 * (q as f64 * h);
            sa += vq * ang.cos();
            sb += vq * ang.sin();
        }
        a[k] = 2.0 * sa / m as f64;
        b[k] = 2.0 * sb / m as f64;
    }
    a[0] *= 0.5;
    a[half] *= 0.5;
    b[half] = 0.0;
    x.iter()
        .map(|&xx| {
            let y = xx - shift;
            let mut s = 0.0;
            for k in 0..=half {
                let (sk, ck) = (k as f64 * y).sin_cos();
                s += a[k] * ck + b[k] * sk;
            }
            s
        })
        .collect()
}

/// Trigonometric interpolation along one meridian great circle. `col` holds the
/// values on a column (rows 0..Nθ), `opposite` those on the antipodal column;
/// `parity` is the pole-reflection parity. Returns values at arbitrary θ.
pub fn interp_meridian(col: &[f64], opposite: &[f64], parity: f64, thetas: &[f64]) -> Vec<f64> {
    let n = col.len();
    let mut v = Vec::with_capacity(2 * n);
    v.extend_from_slice(col);
    for k in n..2 * n {
        v.push(parity * opposite[2 * n - 1 - k]);
    }
    trig_interp(&v, 0.5 * PI / n as f64, thetas)
}

/// Resample an even (scalar) field between lat-lon grids by trigonometric
/// interpolation on the double Fourier sphere.
pub fn resample(f: &[f64], from: &LatLonGrid, to: &LatLonGrid) -> Vec<f64> {
    // ψ first, row by row.
    let psis: Vec<f64> = (0..to.npsi).map(|j| to.psi(j)).collect();
    let mut mid = vec![0.0; from.ntheta * to.npsi];
    for i in 0..from.ntheta {
        let row = &f[from.idx(i, 0)..from.idx(i, 0) + from.npsi];
        let vals = trig_interp(row, 0.0, &psis);
        mid[i * to.npsi..(i + 1) * to.npsi].copy_from_slice(&vals);
    }
    let thetas: Vec<f64> = (0..to.ntheta).map(|i| to.theta(i)).collect();
    let mut out = vec![0.0; to.len()];
    let n = from.ntheta;
    for j in 0..to.npsi {
        let jo = (j + to.npsi / 2) % to.npsi;
        let mut v = Vec::with_capacity(2 * n);
        for i in 0..n {
            v.push(mid[i * to.npsi + j]);
        }
        for k in n..2 * n {
            v.push(mid[(2 * n - 1 - k) * to.npsi + jo]);
        }
        let vals = trig_interp(&v, 0.5 * from.dtheta(), &thetas);
        for i in 0..to.ntheta {
            out[to.idx(i, j)] = vals[i];
        }
    }
    out
}

pub fn max_abs(f: &[f64]) -> f64 {
    f.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
