//! Coordinates on the unit sphere.
//!
//! Points are addressed by longitude `lambda` in `[0, 2π)` and latitude
//! `phi` in `[-π/2, π/2]`, with the standard embedding
//! `x = (cos φ cos λ, cos φ sin λ, sin φ)`. The local frame `(i_λ, i_φ)`
//! is singular at the poles, so everything that needs it refuses pole input.

use std::f64::consts::{FRAC_PI_2, TAU};

use thiserror::Error;

/// Absolute tolerance for comparing angles.
pub const ANGLE_TOL: f64 = 1e-12;

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("tangent frame singular at pole (phi = {phi})")]
    PoleSingular { phi: f64 },
    #[error("latitude {phi} outside [-pi/2, pi/2]")]
    LatitudeOutOfRange { phi: f64 },
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Wraps a longitude into `[0, 2π)`.
pub fn wrap_lambda(lambda: f64) -> f64 {
    let w = lambda.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Signed smallest difference `b - a` between two longitudes, in `(-π, π]`.
pub fn lambda_difference(a: f64, b: f64) -> f64 {
    let d = wrap_lambda(b - a);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

/// True when `phi` is within [`ANGLE_TOL`] of either pole.
#[inline]
pub fn is_pole(phi: f64) -> bool {
    FRAC_PI_2 - phi.abs() <= ANGLE_TOL
}

/// Embeds `(λ, φ)` in R³. Exact `(0, 0, ±1)` at the poles so that every
/// pole vertex maps to the same Cartesian point regardless of `λ`.
pub fn to_cartesian(lambda: f64, phi: f64) -> Vec3 {
    if phi >= FRAC_PI_2 {
        return [0.0, 0.0, 1.0];
    }
    if phi <= -FRAC_PI_2 {
        return [0.0, 0.0, -1.0];
    }
    let lambda = wrap_lambda(lambda);
    let (sl, cl) = lambda.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [cp * cl, cp * sl, sp]
}

/// Recovers `(λ, φ)` from a (not necessarily normalized) point in R³.
pub fn from_cartesian(x: Vec3) -> (f64, f64) {
    let r = norm(x);
    let phi = (x[2] / r).clamp(-1.0, 1.0).asin();
    let lambda = wrap_lambda(x[1].atan2(x[0]));
    (lambda, phi)
}

/// The unit tangent vectors `(i_λ, i_φ)` at a non-pole point.
pub fn tangent_basis(lambda: f64, phi: f64) -> Result<(Vec3, Vec3), GeometryError> {
    if is_pole(phi) {
        return Err(GeometryError::PoleSingular { phi });
    }
    let (sl, cl) = lambda.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Ok(([-sl, cl, 0.0], [-sp * cl, -sp * sl, cp]))
}

/// A point on the unit sphere with its Cartesian embedding cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    pub lambda: f64,
    pub phi: f64,
    pub cart: Vec3,
}

impl SpherePoint {
    pub fn new(lambda: f64, phi: f64) -> Result<Self, GeometryError> {
        if !(phi.abs() <= FRAC_PI_2) {
            return Err(GeometryError::LatitudeOutOfRange { phi });
        }
        let lambda = wrap_lambda(lambda);
        Ok(Self {
            lambda,
            phi,
            cart: to_cartesian(lambda, phi),
        })
    }

    /// Unit outward normal; identical to the embedding on the unit sphere.
    pub fn normal(&self) -> Vec3 {
        self.cart
    }

    pub fn is_pole(&self) -> bool {
        is_pole(self.phi)
    }
}

/// A tangent vector in the local `(i_λ, i_φ)` frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector {
    pub f_lambda: f64,
    pub f_phi: f64,
    pub at: SpherePoint,
}

impl TangentVector {
    pub fn new(f_lambda: f64, f_phi: f64, at: SpherePoint) -> Result<Self, GeometryError> {
        if at.is_pole() {
            return Err(GeometryError::PoleSingular { phi: at.phi });
        }
        Ok(Self {
            f_lambda,
            f_phi,
            at,
        })
    }

    /// The same vector expressed in R³.
    pub fn to_cartesian(&self) -> Vec3 {
        // the constructor already rejected poles
        let (il, ip) = tangent_basis(self.at.lambda, self.at.phi).expect("non-pole point");
        [
            self.f_lambda * il[0] + self.f_phi * ip[0],
            self.f_lambda * il[1] + self.f_phi * ip[1],
            self.f_lambda * il[2] + self.f_phi * ip[2],
        ]
    }
}

/// Central-difference evaluation of the surface divergence
/// `(1/cos φ) [∂_φ(F_φ cos φ) + ∂_λ F_λ]`. Test oracle only.
pub fn analytic_divergence<F>(
    field: F,
    lambda: f64,
    phi: f64,
    h_step: f64,
) -> Result<f64, GeometryError>
where
    F: Fn(f64, f64) -> (f64, f64),
{
    if is_pole(phi) || FRAC_PI_2 - phi.abs() <= h_step {
        return Err(GeometryError::PoleSingular { phi });
    }
    let (fl_plus, _) = field(lambda + h_step, phi);
    let (fl_minus, _) = field(lambda - h_step, phi);
    let (_, fp_plus) = field(lambda, phi + h_step);
    let (_, fp_minus) = field(lambda, phi - h_step);
    let d_lambda = (fl_plus - fl_minus) / (2.0 * h_step);
    let d_phi =
        (fp_plus * (phi + h_step).cos() - fp_minus * (phi - h_step).cos()) / (2.0 * h_step);
    Ok((d_phi + d_lambda) / phi.cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (0..3).all(|i| (a[i] - b[i]).abs() <= tol)
    }

    #[test]
    fn cartesian_reference_points() {
        assert!(close(to_cartesian(0.0, 0.0), [1.0, 0.0, 0.0], 1e-15));
        assert!(close(to_cartesian(PI / 2.0, 0.0), [0.0, 1.0, 0.0], 1e-15));
        for lambda in [0.0, 1.0, 3.0, 6.0] {
            assert_eq!(to_cartesian(lambda, FRAC_PI_2), [0.0, 0.0, 1.0]);
            assert_eq!(to_cartesian(lambda, -FRAC_PI_2), [0.0, 0.0, -1.0]);
        }
    }

    #[test]
    fn lambda_wraps() {
        assert_eq!(wrap_lambda(TAU), 0.0);
        assert_eq!(wrap_lambda(-1e-300), 0.0);
        assert!((wrap_lambda(-0.5) - (TAU - 0.5)).abs() < 1e-15);
        assert!((lambda_difference(6.2, 0.1) - (0.1 + TAU - 6.2)).abs() < 1e-14);
        assert_eq!(to_cartesian(TAU, 0.3), to_cartesian(0.0, 0.3));
    }

    #[test]
    fn tangent_basis_reference_points() {
        let (il, ip) = tangent_basis(0.0, 0.0).unwrap();
        assert!(close(il, [0.0, 1.0, 0.0], 1e-15));
        assert!(close(ip, [0.0, 0.0, 1.0], 1e-15));
        let (il, ip) = tangent_basis(PI / 2.0, 0.0).unwrap();
        assert!(close(il, [-1.0, 0.0, 0.0], 1e-15));
        assert!(close(ip, [0.0, 0.0, 1.0], 1e-15));
    }

    #[test]
    fn tangent_basis_rejects_poles() {
        assert_eq!(
            tangent_basis(0.3, FRAC_PI_2),
            Err(GeometryError::PoleSingular { phi: FRAC_PI_2 })
        );
        assert!(tangent_basis(0.3, -FRAC_PI_2).is_err());
        let pole = SpherePoint::new(1.0, FRAC_PI_2).unwrap();
        assert!(TangentVector::new(1.0, 0.0, pole).is_err());
    }

    #[test]
    fn sphere_point_rejects_bad_latitude() {
        assert!(SpherePoint::new(0.0, 1.6).is_err());
        assert!(SpherePoint::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn divergence_of_simple_fields() {
        let zero = analytic_divergence(|_, _| (0.0, 0.0), 1.0, 0.3, 1e-4).unwrap();
        assert_eq!(zero, 0.0);
        let d = analytic_divergence(|_, p| (p.cos(), 0.0), 1.0, 0.3, 1e-4).unwrap();
        assert!(d.abs() < 1e-12);
        // F_φ = sin φ  ⇒  div = (1/cos φ) d/dφ (sin φ cos φ) = cos 2φ / cos φ
        let d = analytic_divergence(|_, p| (0.0, p.sin()), 0.2, 0.4, 1e-4).unwrap();
        assert!((d - (0.8f64).cos() / (0.4f64).cos()).abs() < 1e-7);
        assert!(analytic_divergence(|_, _| (0.0, 0.0), 0.0, FRAC_PI_2, 1e-4).is_err());
    }

    proptest! {
        #[test]
        fn embedding_is_unit_and_round_trips(lambda in 0.0..TAU, phi in -1.5f64..1.5) {
            let p = SpherePoint::new(lambda, phi).unwrap();
            prop_assert!((norm(p.cart) - 1.0).abs() <= 1e-14);
            let expect = [phi.cos() * lambda.cos(), phi.cos() * lambda.sin(), phi.sin()];
            prop_assert!(close(p.cart, expect, 1e-14));
            let (l2, p2) = from_cartesian(p.cart);
            prop_assert!(lambda_difference(lambda, l2).abs() < 1e-12);
            prop_assert!((phi - p2).abs() < 1e-12);
        }

        #[test]
        fn frame_is_orthonormal(lambda in 0.0..TAU, phi in -1.55f64..1.55) {
            let (il, ip) = tangent_basis(lambda, phi).unwrap();
            let n = to_cartesian(lambda, phi);
            prop_assert!(dot(il, ip).abs() < 1e-14);
            prop_assert!(dot(il, n).abs() < 1e-14);
            prop_assert!(dot(ip, n).abs() < 1e-14);
            prop_assert!((norm(il) - 1.0).abs() < 1e-14);
            prop_assert!((norm(ip) - 1.0).abs() < 1e-14);
            // right-handed: i_λ × i_φ = n
            prop_assert!(close(cross(il, ip), n, 1e-14));
        }
    }
}
