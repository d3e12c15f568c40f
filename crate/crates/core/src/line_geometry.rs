//! Spatial line representations and the exact conversions among them.
//!
//! Three forms coexist:
//! - [`PluckerLine`]: six numbers (moment/normal vector plus direction), the
//!   lingua franca between representations and the form lines are transformed
//!   in.
//! - [`OrthonormalLine`]: the minimal four-parameter encoding on
//!   SO(3) x SO(2), used as the comparison baseline in the optimizer.
//! - [`InverseDepthLine`]: two inverse-depth scalars tied to fixed anchor-frame
//!   endpoint pixels; the two-parameter state this crate is built around.
//!
//! All types are immutable values and safe to copy across threads.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rotation::{exp_so3, log_so3, rotation_defect, skew};

/// Klein quadric tolerance: |n . d| <= EPS_ORTH * |n| |d| after any construction.
pub const EPS_ORTH: f64 = 1e-9;
/// Below this norm a direction (or endpoint separation) counts as degenerate.
pub const EPS_DEG: f64 = 1e-12;
/// Minimum pixel separation of the two anchor endpoints, in normalized coordinates.
pub const EPS_PX: f64 = 1e-8;
/// Relative miss tolerance when intersecting a back-projected ray with a line.
pub const EPS_RAY: f64 = 1e-9;
/// Tolerated orthogonality defect of a rotation matrix.
pub const EPS_ROT_DEFECT: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("line direction is degenerate (norm {norm:.3e})")]
    DegenerateDirection { norm: f64 },
    #[error("line passes through the origin (normal norm {norm:.3e})")]
    LineThroughOrigin { norm: f64 },
    #[error("Klein quadric constraint violated (|n.d|/(|n||d|) = {relative:.3e})")]
    KleinViolation { relative: f64 },
    #[error("matrix is not a proper rotation (defect {defect:.3e})")]
    NotARotation { defect: f64 },
    #[error("inverse depth must be positive, got {value:.3e}")]
    NonPositiveInverseDepth { value: f64 },
    #[error("anchor endpoints coincide (separation {separation:.3e})")]
    CoincidentAnchors { separation: f64 },
    #[error("back-projected ray misses the line (relative miss {miss:.3e})")]
    RayMissesLine { miss: f64 },
    #[error("back-projected ray is parallel to the line")]
    RayParallelToLine,
    #[error("solved endpoint depth {depth:.3e} is not in front of the camera")]
    BehindCamera { depth: f64 },
}

/// Homogenize a normalized image point (u, v) to (u, v, 1).
#[inline]
pub fn homogenize(p: &Vector2<f64>) -> Vector3<f64> {
    Vector3::new(p.x, p.y, 1.0)
}

// ---------------------------------------------------------------------------
// Rigid transform carrier
// ---------------------------------------------------------------------------

/// Rigid transform mapping camera-frame coordinates into the world frame
/// (rotation is world-from-camera, translation is the camera origin in world).
///
/// The same type carries every frame-to-frame transform in the crate
/// (body-from-camera extrinsics, relative odometry, ...); the field semantics
/// are always "parent-from-child".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl CameraPose {
    /// Validated constructor; rejects matrices that are not proper rotations.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let defect = rotation_defect(&rotation);
        if defect > EPS_ROT_DEFECT {
            return Err(GeometryError::NotARotation { defect });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Pose from an axis-angle rotation vector and a translation.
    pub fn from_axis_angle(axis_angle: &Vector3<f64>, translation: &Vector3<f64>) -> Self {
        Self {
            rotation: exp_so3(axis_angle),
            translation: *translation,
        }
    }

    /// `self` then `other`: maps grandchild coordinates through `other` into
    /// `self`'s parent frame.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let rot_t = self.rotation.transpose();
        Self {
            rotation: rot_t,
            translation: -(rot_t * self.translation),
        }
    }

    /// Child-frame point into the parent frame.
    #[inline]
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Parent-frame point into the child frame.
    #[inline]
    pub fn inverse_transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.translation)
    }

    /// Right-multiplied local increment: rotation by `exp([delta_rot]x)`,
    /// additive translation. This is the optimizer's update operator.
    pub fn boxplus(&self, delta_rot: &Vector3<f64>, delta_trans: &Vector3<f64>) -> Self {
        Self {
            rotation: self.rotation * exp_so3(delta_rot),
            translation: self.translation + delta_trans,
        }
    }

    /// Local coordinates of `other` relative to `self` under the [`boxplus`]
    /// convention: `self.boxplus(rot, trans) == other`.
    pub fn boxminus(&self, other: &Self) -> (Vector3<f64>, Vector3<f64>) {
        (
            log_so3(&(self.rotation.transpose() * other.rotation)),
            other.translation - self.translation,
        )
    }

    pub fn rotation_defect(&self) -> f64 {
        rotation_defect(&self.rotation)
    }
}

// ---------------------------------------------------------------------------
// Plucker lines
// ---------------------------------------------------------------------------

/// Unnormalized Plucker coordinates of a 3-D line: `normal` is the moment
/// vector of the plane spanned by the line and the frame origin, `direction`
/// points along the line. Constrained by `normal . direction = 0`.
///
/// Lines are stored unnormalized; scale equivalence is handled by the
/// comparison predicates, which normalize by the joint six-vector norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PluckerLine {
    pub normal: Vector3<f64>,
    pub direction: Vector3<f64>,
}

impl PluckerLine {
    /// Validated constructor enforcing the Klein constraint and non-degeneracy.
    pub fn new(normal: Vector3<f64>, direction: Vector3<f64>) -> Result<Self, GeometryError> {
        let line = Self { normal, direction };
        line.validate()?;
        Ok(line)
    }

    /// Line through two points, oriented from `start` to `end`.
    pub fn from_two_points(
        start: &Vector3<f64>,
        end: &Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        let direction = end - start;
        let norm = direction.norm();
        if norm < EPS_DEG {
            return Err(GeometryError::DegenerateDirection { norm });
        }
        Ok(Self {
            normal: start.cross(end),
            direction,
        })
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let dn = self.direction.norm();
        if dn < EPS_DEG {
            return Err(GeometryError::DegenerateDirection { norm: dn });
        }
        let nn = self.normal.norm();
        if nn > 0.0 {
            let relative = self.normal.dot(&self.direction).abs() / (nn * dn);
            if relative > EPS_ORTH {
                return Err(GeometryError::KleinViolation { relative });
            }
        }
        Ok(())
    }

    /// |n . d| / (|n| |d|): zero for an exact line.
    pub fn klein_defect(&self) -> f64 {
        let nn = self.normal.norm();
        let dn = self.direction.norm();
        if nn < EPS_DEG || dn < EPS_DEG {
            return 0.0;
        }
        self.normal.dot(&self.direction).abs() / (nn * dn)
    }

    /// Point on the line closest to the frame origin.
    pub fn closest_point_to_origin(&self) -> Vector3<f64> {
        self.direction.cross(&self.normal) / self.direction.norm_squared()
    }

    /// Joint six-vector norm used for scale-invariant comparisons.
    pub fn joint_norm(&self) -> f64 {
        (self.normal.norm_squared() + self.direction.norm_squared()).sqrt()
    }

    /// Distance between the jointly normalized six-vectors (positive scale
    /// only; a sign flip counts as a different orientation).
    pub fn distance_up_to_scale(&self, other: &Self) -> f64 {
        let sa = self.joint_norm();
        let sb = other.joint_norm();
        let dn = self.normal / sa - other.normal / sb;
        let dd = self.direction / sa - other.direction / sb;
        (dn.norm_squared() + dd.norm_squared()).sqrt()
    }

    /// Scale- and orientation-invariant distance (minimum over a joint sign flip).
    pub fn distance_up_to_signed_scale(&self, other: &Self) -> f64 {
        let flipped = Self {
            normal: -other.normal,
            direction: -other.direction,
        };
        self.distance_up_to_scale(other)
            .min(self.distance_up_to_scale(&flipped))
    }
}

// ---------------------------------------------------------------------------
// Orthonormal lines
// ---------------------------------------------------------------------------

/// Minimal four-parameter line encoding: an SO(3) element `U` stored as an
/// axis-angle vector plus the SO(2) angle fixing the ratio of the normal and
/// direction norms. The baseline representation for optimizer comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthonormalLine {
    /// Axis-angle of the 3-D rotation whose first two columns span (normal, direction).
    pub axis_angle: Vector3<f64>,
    /// SO(2) angle: cos/sin give the normalized (|normal|, |direction|) pair.
    pub theta: f64,
}

impl OrthonormalLine {
    pub fn new(axis_angle: Vector3<f64>, theta: f64) -> Self {
        Self { axis_angle, theta }
    }

    /// Materialize the stored SO(3) element.
    pub fn u_matrix(&self) -> Matrix3<f64> {
        exp_so3(&self.axis_angle)
    }

    /// (omega_1, omega_2) = (cos theta, sin theta).
    pub fn omegas(&self) -> (f64, f64) {
        (self.theta.cos(), self.theta.sin())
    }

    /// Right-multiplied local increment: `U <- U exp([delta_u]x)`,
    /// `theta <- theta + delta_theta`. The optimizer's update operator for
    /// the four-parameter baseline.
    pub fn boxplus(&self, delta_u: &Vector3<f64>, delta_theta: f64) -> Self {
        Self {
            axis_angle: log_so3(&(self.u_matrix() * exp_so3(delta_u))),
            theta: self.theta + delta_theta,
        }
    }
}

// ---------------------------------------------------------------------------
// Inverse-depth lines
// ---------------------------------------------------------------------------

/// Two-parameter line state: the inverse depths of two endpoints whose
/// normalized anchor-frame pixels are fixed at construction. Only the two
/// inverse depths are optimizer state; the anchor pixels are immutable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseDepthLine {
    inv_depth_start: f64,
    inv_depth_end: f64,
    anchor_start: Vector2<f64>,
    anchor_end: Vector2<f64>,
}

impl InverseDepthLine {
    pub fn new(
        inv_depth_start: f64,
        inv_depth_end: f64,
        anchor_start: Vector2<f64>,
        anchor_end: Vector2<f64>,
    ) -> Result<Self, GeometryError> {
        if !(inv_depth_start > 0.0) || !inv_depth_start.is_finite() {
            return Err(GeometryError::NonPositiveInverseDepth {
                value: inv_depth_start,
            });
        }
        if !(inv_depth_end > 0.0) || !inv_depth_end.is_finite() {
            return Err(GeometryError::NonPositiveInverseDepth {
                value: inv_depth_end,
            });
        }
        let separation = (anchor_start - anchor_end).norm();
        if separation < EPS_PX {
            return Err(GeometryError::CoincidentAnchors { separation });
        }
        Ok(Self {
            inv_depth_start,
            inv_depth_end,
            anchor_start,
            anchor_end,
        })
    }

    #[inline]
    pub fn inv_depth_start(&self) -> f64 {
        self.inv_depth_start
    }

    #[inline]
    pub fn inv_depth_end(&self) -> f64 {
        self.inv_depth_end
    }

    #[inline]
    pub fn anchor_start(&self) -> Vector2<f64> {
        self.anchor_start
    }

    #[inline]
    pub fn anchor_end(&self) -> Vector2<f64> {
        self.anchor_end
    }

    /// Same anchors, new inverse depths (the optimizer update).
    pub fn with_inverse_depths(&self, inv_depth_start: f64, inv_depth_end: f64) -> Self {
        Self {
            inv_depth_start,
            inv_depth_end,
            ..*self
        }
    }

    /// 3-D start endpoint in the anchor camera frame.
    pub fn start_point(&self) -> Vector3<f64> {
        homogenize(&self.anchor_start) / self.inv_depth_start
    }

    /// 3-D end endpoint in the anchor camera frame.
    pub fn end_point(&self) -> Vector3<f64> {
        homogenize(&self.anchor_end) / self.inv_depth_end
    }
}

// ---------------------------------------------------------------------------
// Conversions
// ---------------------------------------------------------------------------

/// Recover Plucker coordinates from the two inverse depths: with endpoints
/// `S` and `E` back-projected at the anchor pixels, `normal = S x E` and
/// `direction = E - S`.
pub fn plucker_from_inverse_depth(line: &InverseDepthLine) -> Result<PluckerLine, GeometryError> {
    let start = line.start_point();
    let end = line.end_point();
    let direction = end - start;
    let norm = direction.norm();
    if norm < EPS_DEG {
        return Err(GeometryError::DegenerateDirection { norm });
    }
    Ok(PluckerLine {
        normal: start.cross(&end),
        direction,
    })
}

/// Depth of the closest approach of the ray through normalized pixel `pixel`
/// to `line`, together with the relative miss distance at that depth.
///
/// The ray is `depth * (u, v, 1)`; a point `X` lies on the line exactly when
/// `X x direction = normal`.
pub fn ray_line_depth(
    line: &PluckerLine,
    pixel: &Vector2<f64>,
) -> Result<(f64, f64), GeometryError> {
    let ray = homogenize(pixel);
    let cross = ray.cross(&line.direction);
    let denom = cross.norm_squared();
    if denom < EPS_DEG * line.direction.norm_squared() {
        return Err(GeometryError::RayParallelToLine);
    }
    let depth = cross.dot(&line.normal) / denom;
    let miss = (cross * depth - line.normal).norm();
    let scale = line.normal.norm().max(line.direction.norm());
    Ok((depth, miss / scale.max(EPS_DEG)))
}

/// Inverse of [`plucker_from_inverse_depth`] for fixed anchor pixels: solves
/// the depths at which the two back-projected rays meet the line. Needed when
/// constructing ground truth and when re-anchoring features.
pub fn inverse_depth_from_plucker(
    line: &PluckerLine,
    anchor_start: &Vector2<f64>,
    anchor_end: &Vector2<f64>,
) -> Result<InverseDepthLine, GeometryError> {
    line.validate()?;
    let mut inv_depths = [0.0; 2];
    for (slot, pixel) in inv_depths.iter_mut().zip([anchor_start, anchor_end]) {
        let (depth, miss) = ray_line_depth(line, pixel)?;
        if miss > EPS_RAY {
            return Err(GeometryError::RayMissesLine { miss });
        }
        if depth <= 0.0 {
            return Err(GeometryError::BehindCamera { depth });
        }
        *slot = 1.0 / depth;
    }
    InverseDepthLine::new(inv_depths[0], inv_depths[1], *anchor_start, *anchor_end)
}

/// Minimal four-parameter encoding of a Plucker line.
///
/// The SO(3) element is the orthonormal frame
/// `U = [n/|n|, d/|d|, (n x d)/|n x d|]` (the QR factor of `[n d]`), and
/// `theta = atan2(|d|, |n|)` carries the norm ratio, so `theta` lies in
/// (0, pi/2) for any valid line.
pub fn orthonormal_from_plucker(line: &PluckerLine) -> Result<OrthonormalLine, GeometryError> {
    line.validate()?;
    let nn = line.normal.norm();
    if nn < EPS_DEG {
        return Err(GeometryError::LineThroughOrigin { norm: nn });
    }
    let dn = line.direction.norm();
    let u1 = line.normal / nn;
    let u2 = line.direction / dn;
    let u3_raw = u1.cross(&u2);
    let u3n = u3_raw.norm();
    if u3n < EPS_DEG {
        return Err(GeometryError::KleinViolation { relative: 1.0 });
    }
    let u3 = u3_raw / u3n;
    let u = Matrix3::from_columns(&[u1, u2, u3]);
    Ok(OrthonormalLine {
        axis_angle: log_so3(&u),
        theta: dn.atan2(nn),
    })
}

/// Rebuild Plucker coordinates from the orthonormal parameters:
/// `normal = omega_1 u_1`, `direction = omega_2 u_2`.
pub fn plucker_from_orthonormal(line: &OrthonormalLine) -> PluckerLine {
    let u = line.u_matrix();
    let (w1, w2) = line.omegas();
    PluckerLine {
        normal: u.column(0) * w1,
        direction: u.column(1) * w2,
    }
}

/// 6x6 line motion matrix of a rigid transform: maps child-frame Plucker
/// coordinates to the parent frame.
pub fn line_motion_matrix(pose: &CameraPose) -> nalgebra::Matrix6<f64> {
    let mut m = nalgebra::Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&pose.rotation);
    m.fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&(skew(&pose.translation) * pose.rotation));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&pose.rotation);
    m
}

/// Transform a line from the child frame of `pose` to its parent frame:
/// `normal' = R normal + [t]x R direction`, `direction' = R direction`.
pub fn transform_line(line: &PluckerLine, pose: &CameraPose) -> PluckerLine {
    let rotated_dir = pose.rotation * line.direction;
    PluckerLine {
        normal: pose.rotation * line.normal + pose.translation.cross(&rotated_dir),
        direction: rotated_dir,
    }
}

/// Transform a line from the parent frame of `pose` into its child frame
/// (the inverse motion of [`transform_line`]).
pub fn invert_transform_line(line: &PluckerLine, pose: &CameraPose) -> PluckerLine {
    let rot_t = pose.rotation.transpose();
    PluckerLine {
        normal: rot_t * (line.normal - pose.translation.cross(&line.direction)),
        direction: rot_t * line.direction,
    }
}
