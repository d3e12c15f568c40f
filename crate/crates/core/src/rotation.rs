//! SO(3) helpers shared by the pose and line machinery: hat/vee operators,
//! exponential and logarithm maps, and the inverse right Jacobian used by
//! relative-pose residuals.

use nalgebra::{Matrix3, Vector3};

/// Skew-symmetric (hat) matrix of a 3-vector, so that `skew(a) * b == a.cross(&b)`.
#[inline]
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`]: extracts the vector from a skew-symmetric matrix.
///
/// Uses the average of the off-diagonal pairs so it stays meaningful for
/// matrices that are only skew-symmetric up to rounding.
#[inline]
pub fn unskew(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Rodrigues' formula: rotation matrix for an axis-angle vector.
pub fn exp_so3(v: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = v.norm_squared();
    let k = skew(v);
    if theta2 < 1e-16 {
        // Second-order Taylor expansion; exact to machine precision here.
        return Matrix3::identity() + k + 0.5 * k * k;
    }
    let theta = theta2.sqrt();
    Matrix3::identity() + (theta.sin() / theta) * k + ((1.0 - theta.cos()) / theta2) * (k * k)
}

/// Logarithm map of SO(3): axis-angle vector of a rotation matrix.
///
/// Stable both near the identity and near angle pi.
pub fn log_so3(rot: &Matrix3<f64>) -> Vector3<f64> {
    let cos_theta = ((rot.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    if theta < 1e-10 {
        // R ~ I + [v]x for small angles.
        return unskew(rot);
    }
    if theta > std::f64::consts::PI - 1e-6 {
        // Near pi the antisymmetric part vanishes; recover the axis from the
        // symmetric part R + R^T = 2(cos(theta) I + (1 - cos(theta)) a a^T).
        let s = 0.5 * (rot + rot.transpose()) - cos_theta * Matrix3::identity();
        let diag = s.diagonal() / (1.0 - cos_theta);
        let mut axis = Vector3::new(
            diag.x.max(0.0).sqrt(),
            diag.y.max(0.0).sqrt(),
            diag.z.max(0.0).sqrt(),
        );
        // Fix signs using the largest component.
        let imax = diag.imax();
        let denom = axis[imax] * (1.0 - cos_theta);
        for i in 0..3 {
            if i != imax {
                axis[i] = s[(i, imax)] / denom * axis[imax].signum();
            }
        }
        axis[imax] = axis[imax].abs();
        // Orient so that the antisymmetric remainder agrees.
        let anti = unskew(rot);
        if axis.dot(&anti) < 0.0 {
            axis = -axis;
        }
        return axis.normalize() * theta;
    }
    unskew(rot) * (theta / theta.sin())
}

/// Inverse of the right Jacobian of SO(3).
///
/// Satisfies `log(exp(phi) * exp(delta)) ~ phi + right_jacobian_inv(phi) * delta`
/// for small `delta`.
pub fn right_jacobian_inv(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = phi.norm_squared();
    let k = skew(phi);
    if theta2 < 1e-14 {
        return Matrix3::identity() + 0.5 * k + (1.0 / 12.0) * (k * k);
    }
    let theta = theta2.sqrt();
    let coeff = 1.0 / theta2 - (1.0 + theta.cos()) / (2.0 * theta * theta.sin());
    Matrix3::identity() + 0.5 * k + coeff * (k * k)
}

/// Orthogonality + determinant defect of a candidate rotation matrix.
pub fn rotation_defect(rot: &Matrix3<f64>) -> f64 {
    let ortho = (rot.transpose() * rot - Matrix3::identity()).norm();
    let det = (rot.determinant() - 1.0).abs();
    ortho.max(det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vector3<f64> {
        Vector3::new(
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
        )
    }

    #[test]
    fn skew_matches_cross_product() {
        let a = Vector3::new(1.0, -2.0, 3.0);
        let b = Vector3::new(0.5, 0.25, -1.0);
        assert_relative_eq!(skew(&a) * b, a.cross(&b), epsilon = 1e-15);
    }

    #[test]
    fn exp_log_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let v = random_vec(&mut rng, 3.0);
            if v.norm() > std::f64::consts::PI - 0.05 {
                continue;
            }
            let r = exp_so3(&v);
            assert!(rotation_defect(&r) < 1e-12);
            assert_relative_eq!(log_so3(&r), v, epsilon = 1e-9);
        }
    }

    #[test]
    fn log_near_pi_recovers_angle() {
        for axis in [Vector3::x(), Vector3::y(), Vector3::z()] {
            let v = axis * (std::f64::consts::PI - 1e-8);
            let r = exp_so3(&v);
            let back = log_so3(&r);
            assert_relative_eq!(back.norm(), v.norm(), epsilon = 1e-6);
            assert!(back.normalize().dot(&axis).abs() > 1.0 - 1e-6);
        }
    }

    #[test]
    fn right_jacobian_inv_matches_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let phi = random_vec(&mut rng, 1.5);
            let delta = random_vec(&mut rng, 1e-6);
            let composed = log_so3(&(exp_so3(&phi) * exp_so3(&delta)));
            let predicted = phi + right_jacobian_inv(&phi) * delta;
            assert_relative_eq!(composed, predicted, epsilon = 1e-10);
        }
    }
}
