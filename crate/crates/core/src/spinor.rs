//! Constant spinors on the hyperboloid, their Killing-spinor extensions and the
//! quadratic light-cone map ζ.

use num_complex::Complex64;

use crate::error::Result;
use crate::minkowski::{FourVector, HyperboloidPoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spinor {
    pub a1: Complex64,
    pub a2: Complex64,
}

impl Spinor {
    pub fn new(a1: Complex64, a2: Complex64) -> Self {
        Spinor { a1, a2 }
    }

    pub fn real(a1: f64, a2: f64) -> Self {
        Spinor::new(Complex64::new(a1, 0.0), Complex64::new(a2, 0.0))
    }

    pub fn norm_sq(&self) -> f64 {
        self.a1.norm_sqr() + self.a2.norm_sqr()
    }

    /// The spinor whose ζ image is the future null direction (y, 1), |y| = 1.
    ///
    /// Inverse of the Hopf map up to a phase.
    pub fn from_null_direction(y: [f64; 3]) -> Self {
        // ζ = (-(|a1|²-|a2|²), -2 Re(a1 ā2), 2 Im(a1 ā2), |a1|²+|a2|²)
        // a1 ā2 = (-y2 + i y3)/2; make the larger component real
        if y[0] >= 0.0 {
            let q = (0.5 * (1.0 + y[0])).sqrt();
            let a1 = Complex64::new(-y[1], y[2]) / (2.0 * q);
            Spinor::new(a1, Complex64::new(q, 0.0))
        } else {
            let p = (0.5 * (1.0 - y[0])).sqrt();
            let a2 = Complex64::new(-y[1], -y[2]) / (2.0 * p);
            Spinor::new(Complex64::new(p, 0.0), a2)
        }
    }
}

/// Hermitian product ⟨x, y⟩ = Σ x_k conj(y_k).
fn herm(x: [Complex64; 2], y: [Complex64; 2]) -> Complex64 {
    x[0] * y[0].conj() + x[1] * y[1].conj()
}

type C2x2 = [[Complex64; 2]; 2];

fn matvec(m: &C2x2, v: [Complex64; 2]) -> [Complex64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn matmul(a: &C2x2, b: &C2x2) -> C2x2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// 2×2 complex Clifford matrices for the orthonormal frame E1, E2, E3, E0.
#[derive(Debug, Clone, Copy)]
pub struct CliffordRep {
    pub c1: C2x2,
    pub c2: C2x2,
    pub c3: C2x2,
    pub c0: C2x2,
}

impl Default for CliffordRep {
    fn default() -> Self {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        CliffordRep {
            c1: [[i, z], [z, -i]],
            c2: [[z, i], [i, z]],
            c3: [[z, one], [-one, z]],
            c0: [[i, z], [z, i]],
        }
    }
}

impl CliffordRep {
    /// Largest entry of c(E_a)c(E_b) + c(E_b)c(E_a) + 2δ_ab over the spatial generators.
    pub fn anticommutator_defect(&self) -> f64 {
        let gens = [self.c1, self.c2, self.c3];
        let mut worst: f64 = 0.0;
        for (a, ga) in gens.iter().enumerate() {
            for (b, gb) in gens.iter().enumerate() {
                let ab = matmul(ga, gb);
                let ba = matmul(gb, ga);
                for i in 0..2 {
                    for j in 0..2 {
                        let mut v = ab[i][j] + ba[i][j];
                        if a == b && i == j {
                            v += Complex64::new(2.0, 0.0);
                        }
                        worst = worst.max(v.norm());
                    }
                }
            }
        }
        worst
    }
}

/// The quadratic map ζ(a) into the future light cone, written out in components.
pub fn zeta(a: &Spinor) -> FourVector {
    let n1 = a.a1.norm_sqr();
    let n2 = a.a2.norm_sqr();
    let m = a.a1 * a.a2.conj();
    // a1 ā2 + ā1 a2 = 2 Re m ; i (a1 ā2 - ā1 a2) = i (2 i Im m) = -2 Im m
    FourVector::new(-(n1 - n2), -2.0 * m.re, 2.0 * m.im, n1 + n2)
}

/// The same map computed from Clifford bilinears:
/// ζ = i(⟨c1 a,a⟩E1 + ⟨c2 a,a⟩E2 + ⟨c3 a,a⟩E3 - ⟨c0 a,a⟩E0).
pub fn zeta_clifford(a: &Spinor, rep: &CliffordRep) -> FourVector {
    let v = [a.a1, a.a2];
    let i = Complex64::new(0.0, 1.0);
    let comp = |m: &C2x2| i * herm(matvec(m, v), v);
    let z1 = comp(&rep.c1);
    let z2 = comp(&rep.c2);
    let z3 = comp(&rep.c3);
    let z0 = -comp(&rep.c0);
    FourVector::new(z1.re, z2.re, z3.re, z0.re)
}

/// Killing spinor (in the polar trivialization) evaluated at (r', θ, ψ).
pub fn killing_spinor(a: &Spinor, r: f64, theta: f64, psi: f64, kappa: f64) -> [Complex64; 2] {
    let (sh, ch) = ((0.5 * theta).sin(), (0.5 * theta).cos());
    let ep = (0.5 * kappa * r).exp();
    let em = (-0.5 * kappa * r).exp();
    let phase_p = Complex64::from_polar(1.0, 0.5 * psi);
    let phase_m = phase_p.conj();
    let m: C2x2 = [
        [phase_p * (ep * ch), phase_m * (ep * sh)],
        [-phase_p * (em * sh), phase_m * (em * ch)],
    ];
    matvec(&m, [a.a1, a.a2])
}

/// Squared norm of the Killing spinor as the linear function -κ X·ζ(a).
pub fn killing_norm_sq(a: &Spinor, x: &FourVector, kappa: f64) -> Result<f64> {
    let p = HyperboloidPoint::new(*x, kappa)?;
    Ok(-kappa * p.point().dot(&zeta(a)))
}

/// Squared norm of the Killing spinor expanded in polar coordinates.
pub fn killing_norm_expansion(a: &Spinor, r: f64, theta: f64, psi: f64, kappa: f64) -> f64 {
    let n1 = a.a1.norm_sqr();
    let n2 = a.a2.norm_sqr();
    let m = a.a1 * a.a2.conj();
    let (sh, ch) = ((kappa * r).sinh(), (kappa * r).cosh());
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    (n1 + n2) * ch + (n1 - n2) * sh * ct + 2.0 * m.re * sh * st * cp - 2.0 * m.im * sh * st * sp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minkowski::polar_param;

    fn sample() -> Spinor {
        Spinor::new(Complex64::new(0.3, -1.1), Complex64::new(0.7, 0.45))
    }

    #[test]
    fn clifford_relations_hold() {
        assert!(CliffordRep::default().anticommutator_defect() < 1e-15);
    }

    #[test]
    fn zeta_routes_agree() {
        let a = sample();
        let z1 = zeta(&a);
        let z2 = zeta_clifford(&a, &CliffordRep::default());
        assert!((z1 - z2).max_abs() < 1e-14);
    }

    #[test]
    fn zeta_is_future_null() {
        let z = zeta(&sample());
        assert!(z.norm_sq().abs() < 1e-13);
        assert!(z.t > 0.0);
    }

    #[test]
    fn basis_spinors() {
        assert_eq!(zeta(&Spinor::real(1.0, 0.0)), FourVector::new(-1.0, 0.0, 0.0, 1.0));
        assert_eq!(zeta(&Spinor::real(0.0, 1.0)), FourVector::new(1.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn killing_norm_three_ways() {
        let a = sample();
        let kappa = 1.3;
        for &(r, th, ps) in &[(0.0, 0.3, 0.1), (0.8, 1.2, 4.0), (2.0, 3.0, 5.5)] {
            let s = killing_spinor(&a, r, th, ps, kappa);
            let direct = s[0].norm_sqr() + s[1].norm_sqr();
            let x = polar_param(r, th, ps, kappa);
            let lin = killing_norm_sq(&a, &x, kappa).unwrap();
            let exp = killing_norm_expansion(&a, r, th, ps, kappa);
            assert!((direct - lin).abs() < 1e-12 * direct.max(1.0), "{direct} {lin}");
            assert!((direct - exp).abs() < 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn origin_norm_is_spinor_norm() {
        let a = sample();
        let x = FourVector::new(0.0, 0.0, 0.0, 1.0 / 2.0);
        assert!((killing_norm_sq(&a, &x, 2.0).unwrap() - a.norm_sq()).abs() < 1e-14);
    }

    #[test]
    fn null_direction_inverse() {
        for y in crate::minkowski::fibonacci_sphere(50) {
            let z = zeta(&Spinor::from_null_direction(y));
            assert!((z - FourVector::new(y[0], y[1], y[2], 1.0)).max_abs() < 1e-12);
        }
    }
}
