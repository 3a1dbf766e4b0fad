//! Discrete Laplace–Beltrami operators on a leaf.
//!
//! The operator is Δf = (1/√det g) ∂_a(A^{ab} ∂_b f) with A = √det g · g⁻¹.
//! `apply` is a conservative finite-volume stencil written as a weighted graph
//! Laplacian: K f(p) = Σ_e w_e (f_q − f_p), divided by the cell volume. Cross
//! terms go on the cell diagonal that keeps the weight positive, so K is an
//! M-matrix whenever `min_weight() ≥ 0`. No flux crosses the poles.
//!
//! `apply_fourth_order` is the Richardson combination (4 C₁ − C₂)/3 of centred
//! stencils with spacing h and 2h, using pole ghosts from the double covering
//! (A^{θθ} and A^{ψψ} odd, A^{θψ} and f even under the reflection).

use crate::grid::LatLonGrid;

#[derive(Debug, Clone)]
pub struct LeafOperator {
    grid: LatLonGrid,
    a: [Vec<f64>; 3],
    sd: Vec<f64>,
    vol: Vec<f64>,
    /// edge (i, j)–(i+1, j)
    w_theta: Vec<f64>,
    /// edge (i, j)–(i, j+1)
    w_psi: Vec<f64>,
    /// edge (i, j)–(i+1, j+1)
    w_diag: Vec<f64>,
    /// edge (i, j+1)–(i+1, j)
    w_anti: Vec<f64>,
    diag: Vec<f64>,
}

impl LeafOperator {
    /// `a` = √det g · g⁻¹ as (θθ, θψ, ψψ); `sd` = √det g.
    pub fn new(grid: LatLonGrid, a: &[Vec<f64>; 3], sd: &[f64]) -> Self {
        let (nt, np) = (grid.ntheta, grid.npsi);
        let (h, k) = (grid.dtheta(), grid.dpsi());
        let n = grid.len();
        let mut w_theta = vec![0.0; n];
        let mut w_psi = vec![0.0; n];
        let mut w_diag = vec![0.0; n];
        let mut w_anti = vec![0.0; n];
        for i in 0..nt {
            for j in 0..np {
                let p = grid.idx(i, j);
                let jr = (j + 1) % np;
                let pr = grid.idx(i, jr);
                w_psi[p] += (h / k) * 0.5 * (a[2][p] + a[2][pr]);
                if i + 1 < nt {
                    let pd = grid.idx(i + 1, j);
                    let pdr = grid.idx(i + 1, jr);
                    w_theta[p] += (k / h) * 0.5 * (a[0][p] + a[0][pd]);
                    let b = 0.25 * (a[1][p] + a[1][pr] + a[1][pd] + a[1][pdr]);
                    let half = 0.5 * b.abs();
                    if b >= 0.0 {
                        w_diag[p] += b;
                    } else {
                        w_anti[p] -= b;
                    }
                    w_theta[p] -= half;
                    w_theta[pr] -= half;
                    w_psi[p] -= half;
                    w_psi[pd] -= half;
                }
            }
        }
        let mut op = LeafOperator {
            grid,
            a: a.clone(),
            sd: sd.to_vec(),
            vol: sd.iter().map(|v| v * h * k).collect(),
            w_theta,
            w_psi,
            w_diag,
            w_anti,
            diag: vec![0.0; n],
        };
        // diagonal of K: minus the sum of incident weights
        let mut d = vec![0.0; n];
        op.for_each_edge(|p, q, w| {
            d[p] -= w;
            d[q] -= w;
        });
        op.diag = d;
        op
    }

    fn for_each_edge(&self, mut visit: impl FnMut(usize, usize, f64)) {
        let g = &self.grid;
        let (nt, np) = (g.ntheta, g.npsi);
        for i in 0..nt {
            for j in 0..np {
                let p = g.idx(i, j);
                let jr = (j + 1) % np;
                visit(p, g.idx(i, jr), self.w_psi[p]);
                if i + 1 < nt {
                    visit(p, g.idx(i + 1, j), self.w_theta[p]);
                    if self.w_diag[p] != 0.0 {
                        visit(p, g.idx(i + 1, jr), self.w_diag[p]);
                    }
                    if self.w_anti[p] != 0.0 {
                        visit(g.idx(i, jr), g.idx(i + 1, j), self.w_anti[p]);
                    }
                }
            }
        }
    }

    pub fn grid(&self) -> &LatLonGrid {
        &self.grid
    }

    /// Finite-volume cell areas √det g Δθ Δψ.
    pub fn cell_volume(&self) -> &[f64] {
        &self.vol
    }

    /// Smallest edge weight; non-negative means K is an M-matrix.
    pub fn min_weight(&self) -> f64 {
        let mut m = f64::INFINITY;
        self.for_each_edge(|_, _, w| m = m.min(w));
        m
    }

    /// Diagonal of the stiffness matrix K.
    pub fn stiffness_diag(&self) -> &[f64] {
        &self.diag
    }

    /// out = K f (symmetric, negative semidefinite).
    pub fn stiffness_into(&self, f: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        self.for_each_edge(|p, q, w| {
            let d = w * (f[q] - f[p]);
            out[p] += d;
            out[q] -= d;
        });
    }

    pub fn stiffness(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.stiffness_into(f, &mut out);
        out
    }

    /// Second-order Laplacian K f / vol.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = self.stiffness(f);
        for (o, v) in out.iter_mut().zip(&self.vol) {
            *o /= v;
        }
        out
    }

    fn centred(&self, f: &[f64], stride: usize) -> Vec<f64> {
        let g = &self.grid;
        let (h, k) = (stride as f64 * g.dtheta(), stride as f64 * g.dpsi());
        let d = stride as isize;
        let (a11, a12, a22) = (&self.a[0], &self.a[1], &self.a[2]);
        let mut out = vec![0.0; g.len()];
        for (i, j, _, _) in g.nodes() {
            let p = g.idx(i, j);
            let (ii, jj) = (i as isize, j as isize);
            let at = |arr: &[f64], di: isize, dj: isize, parity: f64| g.ghost(arr, ii + di, jj + dj, parity);
            let fc = f[p];
            let tp = 0.5 * (a11[p] + at(a11, d, 0, -1.0)) * (at(f, d, 0, 1.0) - fc);
            let tm = 0.5 * (a11[p] + at(a11, -d, 0, -1.0)) * (fc - at(f, -d, 0, 1.0));
            let pp = 0.5 * (a22[p] + at(a22, 0, d, 1.0)) * (at(f, 0, d, 1.0) - fc);
            let pm = 0.5 * (a22[p] + at(a22, 0, -d, 1.0)) * (fc - at(f, 0, -d, 1.0));
            let fpp = at(f, d, d, 1.0);
            let fpm = at(f, d, -d, 1.0);
            let fmp = at(f, -d, d, 1.0);
            let fmm = at(f, -d, -d, 1.0);
            let cross = at(a12, d, 0, 1.0) * (fpp - fpm) - at(a12, -d, 0, 1.0) * (fmp - fmm)
                + at(a12, 0, d, 1.0) * (fpp - fmp)
                - at(a12, 0, -d, 1.0) * (fpm - fmm);
            out[p] = ((tp - tm) / (h * h) + (pp - pm) / (k * k) + cross / (4.0 * h * k)) / self.sd[p];
        }
        out
    }

    /// Fourth-order Laplacian (4 C_h − C_{2h}) / 3.
    pub fn apply_fourth_order(&self, f: &[f64]) -> Vec<f64> {
        let c1 = self.centred(f, 1);
        let c2 = self.centred(f, 2);
        c1.iter().zip(&c2).map(|(a, b)| (4.0 * a - b) / 3.0).collect()
    }
}
