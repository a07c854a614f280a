//! Vectors, relativistic velocity and the field pair.

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    #[inline]
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Unit vector along axis `i`.
    pub fn unit(i: usize) -> Self {
        let mut a = [0.0; 3];
        a[i] = 1.0;
        Vec3::from_array(a)
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm2().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    /// Returns `self` with component `i` replaced.
    pub fn with(self, i: usize, v: f64) -> Vec3 {
        let mut a = self.to_array();
        a[i] = v;
        Vec3::from_array(a)
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl SubAssign for Vec3 {
    #[inline]
    fn sub_assign(&mut self, o: Vec3) {
        self.x -= o.x;
        self.y -= o.y;
        self.z -= o.z;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec3,
    pub p: Vec3,
}

impl PhasePoint {
    pub fn new(x: Vec3, p: Vec3) -> Self {
        PhasePoint { x, p }
    }

    /// Coordinate `i` of the 6-vector (x, p).
    pub fn coord(&self, i: usize) -> f64 {
        if i < 3 {
            self.x[i]
        } else {
            self.p[i - 3]
        }
    }

    pub fn with_coord(&self, i: usize, v: f64) -> PhasePoint {
        if i < 3 {
            PhasePoint::new(self.x.with(i, v), self.p)
        } else {
            PhasePoint::new(self.x, self.p.with(i - 3, v))
        }
    }
}

/// The field pair F = (E, B).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldValue {
    pub e: Vec3,
    pub b: Vec3,
}

impl FieldValue {
    pub const ZERO: FieldValue = FieldValue { e: Vec3::ZERO, b: Vec3::ZERO };

    pub fn new(e: Vec3, b: Vec3) -> Self {
        FieldValue { e, b }
    }

    pub fn from_components(c: [f64; 6]) -> Self {
        FieldValue::new(Vec3::new(c[0], c[1], c[2]), Vec3::new(c[3], c[4], c[5]))
    }

    pub fn components(&self) -> [f64; 6] {
        [self.e.x, self.e.y, self.e.z, self.b.x, self.b.y, self.b.z]
    }

    /// Euclidean norm of the 6-vector (E, B).
    pub fn norm(&self) -> f64 {
        (self.e.norm2() + self.b.norm2()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.e.is_finite() && self.b.is_finite()
    }

    /// Lorentz force E + v∧B on a unit charge with velocity v.
    #[inline]
    pub fn force(&self, v: Vec3) -> Vec3 {
        self.e + v.cross(self.b)
    }

    pub fn scale(&self, s: f64) -> FieldValue {
        FieldValue::new(self.e * s, self.b * s)
    }
}

impl Add for FieldValue {
    type Output = FieldValue;
    fn add(self, o: FieldValue) -> FieldValue {
        FieldValue::new(self.e + o.e, self.b + o.b)
    }
}

impl Sub for FieldValue {
    type Output = FieldValue;
    fn sub(self, o: FieldValue) -> FieldValue {
        FieldValue::new(self.e - o.e, self.b - o.b)
    }
}

/// Relativistic velocity p/√(1+|p|²).
#[inline]
pub fn p_hat(p: Vec3) -> Vec3 {
    p / (1.0 + p.norm2()).sqrt()
}

/// Inverse of [`p_hat`] on the open unit ball.
#[inline]
pub fn momentum_from_velocity(v: Vec3) -> Vec3 {
    v / (1.0 - v.norm2()).sqrt()
}

/// Maximal speed β/√(1+β²) of particles with momentum at most β.
pub fn a_of_beta(beta: f64) -> f64 {
    debug_assert!(beta >= 0.0);
    // for huge β the quotient rounds to 1; keep it strictly sub-luminal
    (beta / (1.0 + beta * beta).sqrt()).min(1.0 - f64::EPSILON / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_hat_examples() {
        assert_eq!(p_hat(Vec3::ZERO), Vec3::ZERO);
        let v = p_hat(Vec3::new(1.0, 0.0, 0.0));
        assert!((v.x - 0.70710678).abs() < 1e-8 && v.y == 0.0 && v.z == 0.0);
        let big = p_hat(Vec3::new(1e6, 0.0, 0.0));
        assert!(big.norm() < 1.0);
    }

    #[test]
    fn a_of_beta_examples() {
        assert_eq!(a_of_beta(0.0), 0.0);
        assert!((a_of_beta(2.0) - 0.89442719).abs() < 1e-8);
        let a = a_of_beta(1e9);
        assert!(a > 0.999 && a < 1.0);
    }

    #[test]
    fn velocity_roundtrip() {
        let p = Vec3::new(0.3, -1.2, 0.7);
        let q = momentum_from_velocity(p_hat(p));
        assert!((q - p).norm() < 1e-14);
    }

    #[test]
    fn cross_is_antisymmetric() {
        let a = Vec3::new(1.0, 2.0, 3.0);
        let b = Vec3::new(-0.5, 0.25, 4.0);
        assert_eq!(a.cross(b), -(b.cross(a)));
        assert!(a.cross(b).dot(a).abs() < 1e-12);
    }
}
