//! Disk automorphisms, hyperbolic metrics, and the Cayley transform.

use num_complex::Complex64;
use thiserror::Error;

/// Points with `|z| >= 1 - EPS_BOUNDARY` are rejected so the metric
/// formulas stay finite.
pub const EPS_BOUNDARY: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point with modulus {modulus} is not inside the unit disk")]
    OutsideDisk { modulus: f64 },
    #[error("rotation factor must be nonzero")]
    DegenerateRotation,
    #[error("point with imaginary part {im} is not in the upper half-plane")]
    OutsideHalfPlane { im: f64 },
}

/// A point strictly inside the unit disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskPoint(Complex64);

impl DiskPoint {
    pub fn new(value: Complex64) -> Result<Self, GeometryError> {
        let m = value.norm();
        if m >= 1.0 - EPS_BOUNDARY {
            return Err(GeometryError::OutsideDisk { modulus: m });
        }
        Ok(Self(value))
    }

    pub fn value(self) -> Complex64 {
        self.0
    }
}

/// The Moebius self-map of the disk `z -> (b z + a) / (1 + b conj(a) z)`
/// with `|a| < 1` and `|b| = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskAutomorphism {
    a: Complex64,
    b: Complex64,
}

impl DiskAutomorphism {
    /// `b` is normalized to unit modulus at construction.
    pub fn new(a: Complex64, b: Complex64) -> Result<Self, GeometryError> {
        let ma = a.norm();
        if ma >= 1.0 - EPS_BOUNDARY {
            return Err(GeometryError::OutsideDisk { modulus: ma });
        }
        let mb = b.norm();
        if mb == 0.0 || !mb.is_finite() {
            return Err(GeometryError::DegenerateRotation);
        }
        Ok(Self { a, b: b / mb })
    }

    pub fn identity() -> Self {
        Self {
            a: Complex64::new(0.0, 0.0),
            b: Complex64::new(1.0, 0.0),
        }
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn b(&self) -> Complex64 {
        self.b
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        (self.b * z + self.a) / (Complex64::new(1.0, 0.0) + self.b * self.a.conj() * z)
    }

    /// `h^{-1}(z) = conj(b) (z - a) / (1 - conj(a) z)`.
    pub fn inverse_apply(&self, z: Complex64) -> Complex64 {
        self.b.conj() * (z - self.a) / (Complex64::new(1.0, 0.0) - self.a.conj() * z)
    }
}

/// Pseudo-hyperbolic distance `|z - w| / |1 - conj(w) z|`.
pub fn pseudo_hyperbolic(z: Complex64, w: Complex64) -> f64 {
    ((z - w) / (Complex64::new(1.0, 0.0) - w.conj() * z)).norm()
}

/// Hyperbolic distance `log((1 + r) / (1 - r))` with `r` pseudo-hyperbolic.
///
/// This is the convention matching the radius conversion `r = (e^R - 1) / (e^R + 1)`.
pub fn hyperbolic_distance(z: Complex64, w: Complex64) -> f64 {
    let r = pseudo_hyperbolic(z, w);
    ((1.0 + r) / (1.0 - r)).ln()
}

/// Cayley transform `C(z) = i (1 + z) / (1 - z)`, disk onto the upper half-plane.
pub fn cayley_to_halfplane(z: Complex64) -> Complex64 {
    Complex64::i() * (Complex64::new(1.0, 0.0) + z) / (Complex64::new(1.0, 0.0) - z)
}

/// Derivative of the Cayley transform, `C'(z) = 2i / (1 - z)^2`.
pub fn cayley_derivative(z: Complex64) -> Complex64 {
    let d = Complex64::new(1.0, 0.0) - z;
    Complex64::new(0.0, 2.0) / (d * d)
}

/// Inverse Cayley transform; rejects points outside the open upper half-plane.
pub fn cayley_from_halfplane(w: Complex64) -> Result<Complex64, GeometryError> {
    if w.im <= 0.0 {
        return Err(GeometryError::OutsideHalfPlane { im: w.im });
    }
    Ok((w - Complex64::i()) / (w + Complex64::i()))
}
