//! Minkowski space R^{3,1} with signature (+,+,+,-), time component last.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute tolerance for causal classification.
pub const CAUSAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FourVector {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub t: f64,
}

impl FourVector {
    pub const ZERO: FourVector = FourVector { x1: 0.0, x2: 0.0, x3: 0.0, t: 0.0 };

    pub const fn new(x1: f64, x2: f64, x3: f64, t: f64) -> Self {
        FourVector { x1, x2, x3, t }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        FourVector::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x1, self.x2, self.x3, self.t]
    }

    /// Lorentzian inner product x1 y1 + x2 y2 + x3 y3 - t s.
    pub fn dot(&self, o: &FourVector) -> f64 {
        self.x1 * o.x1 + self.x2 * o.x2 + self.x3 * o.x3 - self.t * o.t
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn spatial_norm(&self) -> f64 {
        (self.x1 * self.x1 + self.x2 * self.x2 + self.x3 * self.x3).sqrt()
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.x1.abs().max(self.x2.abs()).max(self.x3.abs()).max(self.t.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.x3.is_finite() && self.t.is_finite()
    }
}

impl Add for FourVector {
    type Output = FourVector;
    fn add(self, o: FourVector) -> FourVector {
        FourVector::new(self.x1 + o.x1, self.x2 + o.x2, self.x3 + o.x3, self.t + o.t)
    }
}

impl AddAssign for FourVector {
    fn add_assign(&mut self, o: FourVector) {
        *self = *self + o;
    }
}

impl Sub for FourVector {
    type Output = FourVector;
    fn sub(self, o: FourVector) -> FourVector {
        FourVector::new(self.x1 - o.x1, self.x2 - o.x2, self.x3 - o.x3, self.t - o.t)
    }
}

impl Neg for FourVector {
    type Output = FourVector;
    fn neg(self) -> FourVector {
        FourVector::new(-self.x1, -self.x2, -self.x3, -self.t)
    }
}

impl Mul<f64> for FourVector {
    type Output = FourVector;
    fn mul(self, s: f64) -> FourVector {
        FourVector::new(self.x1 * s, self.x2 * s, self.x3 * s, self.t * s)
    }
}

impl Mul<FourVector> for f64 {
    type Output = FourVector;
    fn mul(self, v: FourVector) -> FourVector {
        v * self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalClass {
    FutureTimelike,
    PastTimelike,
    FutureNull,
    PastNull,
    Spacelike,
    Zero,
}

impl CausalClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            CausalClass::FutureTimelike => "future_timelike",
            CausalClass::PastTimelike => "past_timelike",
            CausalClass::FutureNull => "future_null",
            CausalClass::PastNull => "past_null",
            CausalClass::Spacelike => "spacelike",
            CausalClass::Zero => "zero",
        }
    }

    /// Future-directed and not space-like (the zero vector counts).
    pub fn is_future_causal(&self) -> bool {
        matches!(self, CausalClass::FutureTimelike | CausalClass::FutureNull | CausalClass::Zero)
    }
}

impl fmt::Display for CausalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classify `v` using an absolute tolerance on the components and on `v·v`.
pub fn causal_class(v: &FourVector, tol: f64) -> CausalClass {
    if v.max_abs() <= tol {
        return CausalClass::Zero;
    }
    let q = v.norm_sq();
    if q > tol {
        CausalClass::Spacelike
    } else if q < -tol {
        if v.t > 0.0 {
            CausalClass::FutureTimelike
        } else {
            CausalClass::PastTimelike
        }
    } else if v.t > 0.0 {
        CausalClass::FutureNull
    } else {
        CausalClass::PastNull
    }
}

/// `n` nearly uniform unit vectors on S^2 (Fibonacci lattice).
pub fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * k as f64;
            [rho * phi.cos(), rho * phi.sin(), z]
        })
        .collect()
}

/// Future null directions (y, 1) for `n` Fibonacci points y on the unit sphere.
pub fn null_directions(n: usize) -> Vec<FourVector> {
    fibonacci_sphere(n)
        .into_iter()
        .map(|y| FourVector::new(y[0], y[1], y[2], 1.0))
        .collect()
}

/// True iff `v·ζ ≤ 0` for every sampled future null direction ζ = (y, 1).
///
/// This is the "non-positive pairing with the future light cone" test; it agrees
/// with `causal_class` up to the angular resolution of the sample.
pub fn causal_witness_check(v: &FourVector, n: usize) -> bool {
    null_directions(n).iter().all(|z| v.dot(z) <= 0.0)
}

/// A point of the hyperboloid x·x = -1/κ², t > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperboloidPoint {
    p: FourVector,
    kappa: f64,
}

impl HyperboloidPoint {
    /// Relative tolerance on the constraint κ² x·x + 1 = 0.
    pub const TOL: f64 = 1e-9;

    pub fn new(p: FourVector, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::InvalidInput(format!("kappa must be positive, got {kappa}")));
        }
        if !(p.t > 0.0) {
            return Err(Error::InvalidInput("hyperboloid point must have t > 0".into()));
        }
        let scale = 1.0 + kappa * kappa * (p.t * p.t);
        let defect = (kappa * kappa * p.norm_sq() + 1.0).abs();
        if defect > Self::TOL * scale {
            return Err(Error::InvalidInput(format!(
                "point is off the hyperboloid: |kappa^2 x.x + 1| = {defect:e}"
            )));
        }
        Ok(HyperboloidPoint { p, kappa })
    }

    pub fn point(&self) -> FourVector {
        self.p
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Hyperbolic distance to another point on the same hyperboloid.
    pub fn distance(&self, o: &HyperboloidPoint) -> f64 {
        let c = (-self.kappa * self.kappa * self.p.dot(&o.p)).max(1.0);
        c.acosh() / self.kappa
    }
}

/// Polar parametrization of the hyperboloid about the x1 axis:
/// X = (1/κ)(sinh κr cos θ, sinh κr sin θ cos ψ, sinh κr sin θ sin ψ, cosh κr).
pub fn polar_param(r: f64, theta: f64, psi: f64, kappa: f64) -> FourVector {
    let (sh, ch) = ((kappa * r).sinh(), (kappa * r).cosh());
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    FourVector::new(sh * ct, sh * st * cp, sh * st * sp, ch) * (1.0 / kappa)
}

/// Outward unit normal of the geodesic sphere through `polar_param(r, θ, ψ, κ)`.
pub fn polar_normal(r: f64, theta: f64, psi: f64, kappa: f64) -> FourVector {
    let (sh, ch) = ((kappa * r).sinh(), (kappa * r).cosh());
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    FourVector::new(ch * ct, ch * st * cp, ch * st * sp, sh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_of_basis_vectors() {
        let tol = CAUSAL_TOL;
        assert_eq!(causal_class(&FourVector::new(0.0, 0.0, 0.0, 1.0), tol), CausalClass::FutureTimelike);
        assert_eq!(causal_class(&FourVector::new(0.0, 0.0, 0.0, -1.0), tol), CausalClass::PastTimelike);
        assert_eq!(causal_class(&FourVector::new(1.0, 0.0, 0.0, 1.0), tol), CausalClass::FutureNull);
        assert_eq!(causal_class(&FourVector::new(0.0, 1.0, 0.0, -1.0), tol), CausalClass::PastNull);
        assert_eq!(causal_class(&FourVector::new(1.0, 0.0, 0.0, 0.0), tol), CausalClass::Spacelike);
        assert_eq!(causal_class(&FourVector::ZERO, tol), CausalClass::Zero);
    }

    #[test]
    fn polar_param_lies_on_hyperboloid() {
        for &kappa in &[0.3, 1.0, 2.5] {
            let x = polar_param(1.7, 0.4, 2.0, kappa);
            assert!(HyperboloidPoint::new(x, kappa).is_ok());
            let n = polar_normal(1.7, 0.4, 2.0, kappa);
            assert!((n.norm_sq() - 1.0).abs() < 1e-12);
            assert!(n.dot(&x).abs() < 1e-12);
        }
    }

    #[test]
    fn origin_distance_is_radius() {
        let kappa = 0.7;
        let o = HyperboloidPoint::new(FourVector::new(0.0, 0.0, 0.0, 1.0 / kappa), kappa).unwrap();
        let p = HyperboloidPoint::new(polar_param(2.3, 1.0, 0.5, kappa), kappa).unwrap();
        assert!((o.distance(&p) - 2.3).abs() < 1e-10);
    }

    #[test]
    fn rejects_off_hyperboloid() {
        assert!(HyperboloidPoint::new(FourVector::new(1.0, 0.0, 0.0, 1.0), 1.0).is_err());
        assert!(HyperboloidPoint::new(FourVector::new(0.0, 0.0, 0.0, -1.0), 1.0).is_err());
    }

    #[test]
    fn witness_on_obvious_cases() {
        assert!(causal_witness_check(&FourVector::new(0.1, 0.0, 0.2, 1.0), 512));
        assert!(!causal_witness_check(&FourVector::new(2.0, 0.0, 0.0, 1.0), 512));
        assert!(!causal_witness_check(&FourVector::new(0.0, 0.0, 0.0, -1.0), 64));
    }
}
