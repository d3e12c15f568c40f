//! Reprojection residuals and their analytic Jacobians.
//!
//! The line residual is the pair of signed perpendicular distances from the
//! observed endpoints to the projected infinite line, so two observations of
//! a line never need to share endpoints. All residuals are expressed in
//! normalized camera coordinates (pixel noise divided by focal length);
//! [`project_line`] carries the pixel-space line projection matrix for
//! callers that work in pixels.
//!
//! Jacobians use right-multiplied local increments: rotations are perturbed
//! by `R exp([dr]x)`, translations and inverse depths additively. Every block
//! is cross-checked against central finite differences in
//! [`crate::jacobian_check`].

use nalgebra::{Matrix2, Matrix3, Matrix6, SMatrix, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::line_geometry::{
    homogenize, invert_transform_line, line_motion_matrix, plucker_from_inverse_depth,
    plucker_from_orthonormal, transform_line, CameraPose, GeometryError, InverseDepthLine,
    OrthonormalLine, PluckerLine, EPS_DEG, EPS_PX,
};
use crate::rotation::{log_so3, right_jacobian_inv, skew};

type Mat2x3 = SMatrix<f64, 2, 3>;
type Mat2x6 = SMatrix<f64, 2, 6>;
type Mat3x6 = SMatrix<f64, 3, 6>;
type Mat6x3 = SMatrix<f64, 6, 3>;

#[derive(Debug, Error)]
pub enum ResidualError {
    #[error("projected line is degenerate (|(l1, l2)| = {norm:.3e})")]
    DegenerateProjection { norm: f64 },
    #[error("point reprojects behind the camera (depth {depth:.3e})")]
    BehindCamera { depth: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Pinhole intrinsics (pixels).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        assert!(fx > 0.0 && fy > 0.0, "focal lengths must be positive");
        Self { fx, fy, cx, cy }
    }

    /// Line projection matrix mapping a camera-frame line normal to
    /// pixel-space image-line coefficients.
    pub fn line_projection_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fy,
            0.0,
            0.0,
            0.0,
            self.fx,
            0.0,
            -self.fy * self.cx,
            -self.fx * self.cy,
            self.fx * self.fy,
        )
    }

    #[inline]
    pub fn normalize_pixel(&self, pixel: &Vector2<f64>) -> Vector2<f64> {
        Vector2::new((pixel.x - self.cx) / self.fx, (pixel.y - self.cy) / self.fy)
    }

    #[inline]
    pub fn pixel_from_normalized(&self, n: &Vector2<f64>) -> Vector2<f64> {
        Vector2::new(self.fx * n.x + self.cx, self.fy * n.y + self.cy)
    }
}

/// Image-line coefficients `(l1, l2, l3)`; points `p` on the line satisfy
/// `p^T l = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectedLine {
    pub coeffs: Vector3<f64>,
}

impl ProjectedLine {
    /// Norm of the direction-carrying coefficients; degenerate when ~0.
    pub fn normal_norm(&self) -> f64 {
        (self.coeffs.x * self.coeffs.x + self.coeffs.y * self.coeffs.y).sqrt()
    }

    /// Signed perpendicular distance of a homogenized point to this line.
    pub fn signed_distance(&self, point: &Vector2<f64>) -> f64 {
        homogenize(point).dot(&self.coeffs) / self.normal_norm()
    }
}

/// One observation of a line: the two detected endpoints in normalized image
/// coordinates of the observing keyframe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineObservation {
    pub frame_id: usize,
    pub start: Vector2<f64>,
    pub end: Vector2<f64>,
}

impl LineObservation {
    pub fn new(frame_id: usize, start: Vector2<f64>, end: Vector2<f64>) -> Result<Self, GeometryError> {
        let separation = (start - end).norm();
        if separation < EPS_PX {
            return Err(GeometryError::CoincidentAnchors { separation });
        }
        Ok(Self {
            frame_id,
            start,
            end,
        })
    }
}

/// Relative-pose constraint between two keyframes, standing in for IMU
/// pre-integration: a measured j-from-i motion with a square-root information
/// weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdometryFactor {
    pub frame_i: usize,
    pub frame_j: usize,
    /// Measured motion mapping frame-j coordinates into frame i.
    pub rel_pose_meas: CameraPose,
    pub sqrt_info: Matrix6<f64>,
}

// ---------------------------------------------------------------------------
// Line projection and residual
// ---------------------------------------------------------------------------

/// Project a camera-frame line to pixel-space image-line coefficients:
/// `l = K_L * normal`. Depends on the line's normal component only.
pub fn project_line(
    line_in_frame: &PluckerLine,
    intrinsics: &CameraIntrinsics,
) -> Result<ProjectedLine, ResidualError> {
    let coeffs = intrinsics.line_projection_matrix() * line_in_frame.normal;
    let line = ProjectedLine { coeffs };
    let norm = line.normal_norm();
    if norm < EPS_DEG {
        return Err(ResidualError::DegenerateProjection { norm });
    }
    Ok(line)
}

/// Transform a line from its anchor camera frame to the observing camera
/// frame through the body-frame chain
/// (extrinsic, anchor body pose, observing body pose).
pub fn line_in_observer_frame(
    line_anchor_frame: &PluckerLine,
    pose_anchor: &CameraPose,
    pose_obs: &CameraPose,
    extrinsic: &CameraPose,
) -> PluckerLine {
    let line_body_anchor = transform_line(line_anchor_frame, extrinsic);
    let line_world = transform_line(&line_body_anchor, pose_anchor);
    let line_body_obs = invert_transform_line(&line_world, pose_obs);
    invert_transform_line(&line_body_obs, extrinsic)
}

/// Residual of one line observation given the projected-line coefficients:
/// signed perpendicular distances of the two observed endpoints, normalized
/// by the line-direction norm. No absolute value is taken; smooth Jacobians
/// need the signed form.
pub fn residual_from_projected(
    coeffs: &Vector3<f64>,
    obs: &LineObservation,
) -> Result<Vector2<f64>, ResidualError> {
    let norm = (coeffs.x * coeffs.x + coeffs.y * coeffs.y).sqrt();
    if norm < EPS_DEG {
        return Err(ResidualError::DegenerateProjection { norm });
    }
    Ok(Vector2::new(
        homogenize(&obs.start).dot(coeffs) / norm,
        homogenize(&obs.end).dot(coeffs) / norm,
    ))
}

/// Derivative of [`residual_from_projected`] with respect to the image-line
/// coefficients (2x3).
pub fn d_residual_d_line_coeffs(coeffs: &Vector3<f64>, obs: &LineObservation) -> Mat2x3 {
    let sq = coeffs.x * coeffs.x + coeffs.y * coeffs.y;
    let norm = sq.sqrt();
    let mut jac = Mat2x3::zeros();
    for (row, endpoint) in [obs.start, obs.end].iter().enumerate() {
        let p = homogenize(endpoint);
        let dot = p.dot(coeffs);
        jac[(row, 0)] = (p.x - coeffs.x * dot / sq) / norm;
        jac[(row, 1)] = (p.y - coeffs.y * dot / sq) / norm;
        jac[(row, 2)] = 1.0 / norm;
    }
    jac
}

/// Stack two 3x3 blocks into the 6x3 layout used by the line-motion
/// derivatives (normal rows on top, direction rows below).
pub fn stack6(top: &Matrix3<f64>, bottom: &Matrix3<f64>) -> Mat6x3 {
    let mut out = Mat6x3::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(top);
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(bottom);
    out
}

/// All intermediate frames of the anchor-to-observer line chain, kept around
/// because every Jacobian block is written in terms of them.
struct LineChain {
    line_body_anchor: PluckerLine,
    line_world: PluckerLine,
    line_body_obs: PluckerLine,
    line_obs_frame: PluckerLine,
}

fn line_chain(
    line_anchor_frame: &PluckerLine,
    pose_anchor: &CameraPose,
    pose_obs: &CameraPose,
    extrinsic: &CameraPose,
) -> LineChain {
    let line_body_anchor = transform_line(line_anchor_frame, extrinsic);
    let line_world = transform_line(&line_body_anchor, pose_anchor);
    let line_body_obs = invert_transform_line(&line_world, pose_obs);
    let line_obs_frame = invert_transform_line(&line_body_obs, extrinsic);
    LineChain {
        line_body_anchor,
        line_world,
        line_body_obs,
        line_obs_frame,
    }
}

/// Jacobian blocks of the line residual. Pose blocks are ordered
/// `[rotation increment | translation increment]`.
#[derive(Debug, Clone)]
pub struct LineJacobians {
    pub wrt_pose_anchor: Mat2x6,
    pub wrt_pose_obs: Mat2x6,
    pub wrt_extrinsic: Mat2x6,
    pub wrt_inv_depths: Matrix2<f64>,
}

/// Line reprojection residual for an inverse-depth line anchored in
/// `pose_anchor`'s camera frame and observed in `pose_obs`'s camera frame.
///
/// Both poses are body poses in the world frame; `extrinsic` is the
/// body-from-camera transform. The observation endpoints are normalized
/// image coordinates, and the projected line is the camera-frame normal
/// (the image line in normalized coordinates), so the residual is a
/// normalized-coordinate distance.
pub fn line_residual(
    line_anchor: &InverseDepthLine,
    pose_anchor: &CameraPose,
    pose_obs: &CameraPose,
    extrinsic: &CameraPose,
    obs: &LineObservation,
) -> Result<Vector2<f64>, ResidualError> {
    let line_ci = plucker_from_inverse_depth(line_anchor)?;
    let line_cj = line_in_observer_frame(&line_ci, pose_anchor, pose_obs, extrinsic);
    residual_from_projected(&line_cj.normal, obs)
}

/// Derivative of the anchor-frame Plucker coordinates with respect to the
/// two inverse depths (6x2).
pub fn d_anchor_line_d_inv_depths(line: &InverseDepthLine) -> SMatrix<f64, 6, 2> {
    let s = homogenize(&line.anchor_start());
    let e = homogenize(&line.anchor_end());
    let ls = line.inv_depth_start();
    let le = line.inv_depth_end();
    let cross = s.cross(&e);
    let mut jac = SMatrix::<f64, 6, 2>::zeros();
    jac.fixed_view_mut::<3, 1>(0, 0)
        .copy_from(&(-cross / (ls * ls * le)));
    jac.fixed_view_mut::<3, 1>(3, 0).copy_from(&(s / (ls * ls)));
    jac.fixed_view_mut::<3, 1>(0, 1)
        .copy_from(&(-cross / (ls * le * le)));
    jac.fixed_view_mut::<3, 1>(3, 1)
        .copy_from(&(-e / (le * le)));
    jac
}

/// Derivative of the anchor-frame Plucker coordinates with respect to the
/// orthonormal parameters `[U increment (3) | theta increment (1)]` (6x4).
pub fn d_anchor_line_d_orthonormal(line: &OrthonormalLine) -> SMatrix<f64, 6, 4> {
    let u = line.u_matrix();
    let (w1, w2) = line.omegas();
    let u1 = u.column(0).into_owned();
    let u2 = u.column(1).into_owned();
    let mut jac = SMatrix::<f64, 6, 4>::zeros();
    // d(w1 * U e1) / d delta_u = -w1 * U [e1]x, and likewise for u2.
    let dn_du = -w1 * u * skew(&Vector3::x());
    let dd_du = -w2 * u * skew(&Vector3::y());
    jac.fixed_view_mut::<3, 3>(0, 0).copy_from(&dn_du);
    jac.fixed_view_mut::<3, 3>(3, 0).copy_from(&dd_du);
    jac.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-w2 * u1));
    jac.fixed_view_mut::<3, 1>(3, 3).copy_from(&(w1 * u2));
    jac
}

/// Shared chain-rule core: residual plus Jacobians with respect to both
/// poses, the extrinsic, and a caller-supplied anchor-line parameterization.
fn line_factor_core<const K: usize>(
    line_ci: &PluckerLine,
    d_lci_d_params: &SMatrix<f64, 6, K>,
    pose_anchor: &CameraPose,
    pose_obs: &CameraPose,
    extrinsic: &CameraPose,
    obs: &LineObservation,
) -> Result<(Vector2<f64>, Mat2x6, Mat2x6, Mat2x6, SMatrix<f64, 2, K>), ResidualError> {
    let chain = line_chain(line_ci, pose_anchor, pose_obs, extrinsic);
    let residual = residual_from_projected(&chain.line_obs_frame.normal, obs)?;
    let d_r_d_l = d_residual_d_line_coeffs(&chain.line_obs_frame.normal, obs);
    // The projected line is the normal block of L_cj, so d r / d L_cj only
    // sees the top three rows of each 6x3 block below.
    let d_r_d_lcj: Mat3x6 = {
        let mut m = Mat3x6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
        m
    };
    let pick = |block: &SMatrix<f64, 6, 3>| -> Mat2x3 {
        d_r_d_l * (d_r_d_lcj * block)
    };

    let inv_ext = line_motion_matrix(&extrinsic.inverse());
    let inv_obs = line_motion_matrix(&pose_obs.inverse());
    let fwd_anchor = line_motion_matrix(pose_anchor);
    let fwd_ext = line_motion_matrix(extrinsic);

    // Observing body pose: perturbation acts through the inverse transform.
    let n_bj = chain.line_body_obs.normal;
    let d_bj = chain.line_body_obs.direction;
    let d_lbj_d_rot = stack6(&skew(&n_bj), &skew(&d_bj));
    let d_lbj_d_trans = stack6(
        &(pose_obs.rotation.transpose() * skew(&chain.line_world.direction)),
        &Matrix3::zeros(),
    );
    let wrt_pose_obs = {
        let mut m = Mat2x6::zeros();
        m.fixed_view_mut::<2, 3>(0, 0)
            .copy_from(&pick(&(inv_ext * d_lbj_d_rot)));
        m.fixed_view_mut::<2, 3>(0, 3)
            .copy_from(&pick(&(inv_ext * d_lbj_d_trans)));
        m
    };

    // Anchor body pose: perturbation acts through the forward transform.
    let n_bi = chain.line_body_anchor.normal;
    let d_bi = chain.line_body_anchor.direction;
    let d_w = chain.line_world.direction;
    let d_lw_d_rot = stack6(
        &(-pose_anchor.rotation * skew(&n_bi)
            - skew(&pose_anchor.translation) * pose_anchor.rotation * skew(&d_bi)),
        &(-pose_anchor.rotation * skew(&d_bi)),
    );
    let d_lw_d_trans = stack6(&(-skew(&d_w)), &Matrix3::zeros());
    let prop_world = inv_ext * inv_obs;
    let wrt_pose_anchor = {
        let mut m = Mat2x6::zeros();
        m.fixed_view_mut::<2, 3>(0, 0)
            .copy_from(&pick(&(prop_world * d_lw_d_rot)));
        m.fixed_view_mut::<2, 3>(0, 3)
            .copy_from(&pick(&(prop_world * d_lw_d_trans)));
        m
    };

    // Extrinsic appears twice: forward at the anchor and inverted at the
    // observer; the two contributions add.
    let n_ci = line_ci.normal;
    let d_ci = line_ci.direction;
    let d_lbi_d_rot = stack6(
        &(-extrinsic.rotation * skew(&n_ci)
            - skew(&extrinsic.translation) * extrinsic.rotation * skew(&d_ci)),
        &(-extrinsic.rotation * skew(&d_ci)),
    );
    let d_lbi_d_trans = stack6(&(-skew(&(extrinsic.rotation * d_ci))), &Matrix3::zeros());
    let prop_body_anchor = inv_ext * inv_obs * fwd_anchor;
    let n_cj = chain.line_obs_frame.normal;
    let d_cj = chain.line_obs_frame.direction;
    let d_lcj_d_rot_direct = stack6(&skew(&n_cj), &skew(&d_cj));
    let d_lcj_d_trans_direct = stack6(
        &(extrinsic.rotation.transpose() * skew(&d_bj)),
        &Matrix3::zeros(),
    );
    let wrt_extrinsic = {
        let mut m = Mat2x6::zeros();
        m.fixed_view_mut::<2, 3>(0, 0).copy_from(&pick(
            &(prop_body_anchor * d_lbi_d_rot + d_lcj_d_rot_direct),
        ));
        m.fixed_view_mut::<2, 3>(0, 3).copy_from(&pick(
            &(prop_body_anchor * d_lbi_d_trans + d_lcj_d_trans_direct),
        ));
        m
    };

    // Line parameters act on the anchor-frame coordinates, then ride the
    // full 6x6 motion chain.
    let full_motion = inv_ext * inv_obs * fwd_anchor * fwd_ext;
    let d_lcj_d_params = full_motion * d_lci_d_params;
    let mut wrt_params = SMatrix::<f64, 2, K>::zeros();
    for col in 0..K {
        let block: Vector3<f64> = d_lcj_d_params.fixed_view::<3, 1>(0, col).into_owned();
        let contrib = d_r_d_l * block;
        wrt_params.set_column(col, &contrib);
    }

    Ok((
        residual,
        wrt_pose_anchor,
        wrt_pose_obs,
        wrt_extrinsic,
        wrt_params,
    ))
}

/// Analytic Jacobians of [`line_residual`]: the chain of the residual
/// derivative in the line coefficients, the projection selector, the motion
/// chain derivatives for both body poses and the extrinsic, and the
/// inverse-depth parameterization block.
pub fn line_jacobians(
    line_anchor: &InverseDepthLine,
    pose_anchor: &CameraPose,
    pose_obs: &CameraPose,
    extrinsic: &CameraPose,
    obs: &LineObservation,
) -> Result<(Vector2<f64>, LineJacobians), ResidualError> {
    let line_ci = plucker_from_inverse_depth(line_anchor)?;
    let d_params = d_anchor_line_d_inv_depths(line_anchor);
    let (residual, wrt_pose_anchor, wrt_pose_obs, wrt_extrinsic, wrt_params) =
        line_factor_core(&line_ci, &d_params, pose_anchor, pose_obs, extrinsic, obs)?;
    Ok((
        residual,
        LineJacobians {
            wrt_pose_anchor,
            wrt_pose_obs,
            wrt_extrinsic,
            wrt_inv_depths: Matrix2::from_columns(&[
                wrt_params.column(0).into_owned(),
                wrt_params.column(1).into_owned(),
            ]),
        },
    ))
}

/// Jacobian blocks for a line carried in the orthonormal baseline
/// representation (anchored in the same camera frame).
#[derive(Debug, Clone)]
pub struct OrthonormalLineJacobians {
    pub wrt_pose_anchor: Mat2x6,
    pub wrt_pose_obs: Mat2x6,
    pub wrt_extrinsic: Mat2x6,
    pub wrt_line_params: SMatrix<f64, 2, 4>,
}

/// Residual of an orthonormal-represented line (baseline path).
pub fn line_residual_orthonormal(
    line_anchor: &OrthonormalLine,
    pose_anchor: &CameraPose,
    pose_obs: &CameraPose,
    extrinsic: &CameraPose,
    obs: &LineObservation,
) -> Result<Vector2<f64>, ResidualError> {
    let line_ci = plucker_from_orthonormal(line_anchor);
    let line_cj = line_in_observer_frame(&line_ci, pose_anchor, pose_obs, extrinsic);
    residual_from_projected(&line_cj.normal, obs)
}

/// Analytic Jacobians for the orthonormal baseline (four parameters per line
/// instead of two; everything else identical to [`line_jacobians`]).
pub fn line_jacobians_orthonormal(
    line_anchor: &OrthonormalLine,
    pose_anchor: &CameraPose,
    pose_obs: &CameraPose,
    extrinsic: &CameraPose,
    obs: &LineObservation,
) -> Result<(Vector2<f64>, OrthonormalLineJacobians), ResidualError> {
    let line_ci = plucker_from_orthonormal(line_anchor);
    let d_params = d_anchor_line_d_orthonormal(line_anchor);
    let (residual, wrt_pose_anchor, wrt_pose_obs, wrt_extrinsic, wrt_line_params) =
        line_factor_core(&line_ci, &d_params, pose_anchor, pose_obs, extrinsic, obs)?;
    Ok((
        residual,
        OrthonormalLineJacobians {
            wrt_pose_anchor,
            wrt_pose_obs,
            wrt_extrinsic,
            wrt_line_params,
        },
    ))
}

// ---------------------------------------------------------------------------
// Point residual
// ---------------------------------------------------------------------------

/// Jacobian blocks of the point residual, pose blocks ordered
/// `[rotation | translation]`.
#[derive(Debug, Clone)]
pub struct PointJacobians {
    pub wrt_pose_anchor: Mat2x6,
    pub wrt_pose_obs: Mat2x6,
    pub wrt_extrinsic: Mat2x6,
    pub wrt_inv_depth: Vector2<f64>,
}

struct PointChain {
    p_camera_anchor: Vector3<f64>,
    p_body_anchor: Vector3<f64>,
    p_body_obs: Vector3<f64>,
    p_camera_obs: Vector3<f64>,
}

fn point_chain(
    inv_depth: f64,
    anchor_pixel: &Vector2<f64>,
    pose_anchor: &CameraPose,
    pose_obs: &CameraPose,
    extrinsic: &CameraPose,
) -> PointChain {
    let p_camera_anchor = homogenize(anchor_pixel) / inv_depth;
    let p_body_anchor = extrinsic.transform_point(&p_camera_anchor);
    let p_world = pose_anchor.transform_point(&p_body_anchor);
    let p_body_obs = pose_obs.inverse_transform_point(&p_world);
    let p_camera_obs = extrinsic.inverse_transform_point(&p_body_obs);
    PointChain {
        p_camera_anchor,
        p_body_anchor,
        p_body_obs,
        p_camera_obs,
    }
}

/// Point reprojection residual: reprojected normalized coordinates in the
/// observing frame minus the observed normalized coordinates.
pub fn point_residual(
    inv_depth: f64,
    anchor_pixel: &Vector2<f64>,
    pose_anchor: &CameraPose,
    pose_obs: &CameraPose,
    extrinsic: &CameraPose,
    obs_pixel: &Vector2<f64>,
) -> Result<Vector2<f64>, ResidualError> {
    if inv_depth <= 0.0 {
        return Err(ResidualError::BehindCamera {
            depth: 1.0 / inv_depth,
        });
    }
    let chain = point_chain(inv_depth, anchor_pixel, pose_anchor, pose_obs, extrinsic);
    let z = chain.p_camera_obs.z;
    if z <= EPS_DEG {
        return Err(ResidualError::BehindCamera { depth: z });
    }
    Ok(Vector2::new(
        chain.p_camera_obs.x / z - obs_pixel.x,
        chain.p_camera_obs.y / z - obs_pixel.y,
    ))
}

/// Analytic Jacobians of [`point_residual`].
pub fn point_jacobians(
    inv_depth: f64,
    anchor_pixel: &Vector2<f64>,
    pose_anchor: &CameraPose,
    pose_obs: &CameraPose,
    extrinsic: &CameraPose,
    obs_pixel: &Vector2<f64>,
) -> Result<(Vector2<f64>, PointJacobians), ResidualError> {
    if inv_depth <= 0.0 {
        return Err(ResidualError::BehindCamera {
            depth: 1.0 / inv_depth,
        });
    }
    let chain = point_chain(inv_depth, anchor_pixel, pose_anchor, pose_obs, extrinsic);
    let p = chain.p_camera_obs;
    if p.z <= EPS_DEG {
        return Err(ResidualError::BehindCamera { depth: p.z });
    }
    let residual = Vector2::new(p.x / p.z - obs_pixel.x, p.y / p.z - obs_pixel.y);

    let inv_z = 1.0 / p.z;
    let d_r_d_p = Mat2x3::new(
        inv_z,
        0.0,
        -p.x * inv_z * inv_z,
        0.0,
        inv_z,
        -p.y * inv_z * inv_z,
    );

    let rot_ext_t = extrinsic.rotation.transpose();
    let rot_obs_t = pose_obs.rotation.transpose();
    let to_obs_cam = rot_ext_t * rot_obs_t; // world -> observer camera (rotation part)

    // Anchor pose.
    let d_pw_d_rot = -pose_anchor.rotation * skew(&chain.p_body_anchor);
    let mut wrt_pose_anchor = Mat2x6::zeros();
    wrt_pose_anchor
        .fixed_view_mut::<2, 3>(0, 0)
        .copy_from(&(d_r_d_p * (to_obs_cam * d_pw_d_rot)));
    wrt_pose_anchor
        .fixed_view_mut::<2, 3>(0, 3)
        .copy_from(&(d_r_d_p * to_obs_cam));

    // Observing pose.
    let d_pbj_d_rot = skew(&chain.p_body_obs);
    let mut wrt_pose_obs = Mat2x6::zeros();
    wrt_pose_obs
        .fixed_view_mut::<2, 3>(0, 0)
        .copy_from(&(d_r_d_p * (rot_ext_t * d_pbj_d_rot)));
    wrt_pose_obs
        .fixed_view_mut::<2, 3>(0, 3)
        .copy_from(&(d_r_d_p * (-(rot_ext_t * rot_obs_t))));

    // Extrinsic: forward use at the anchor plus inverse use at the observer.
    let prop = rot_ext_t * rot_obs_t * pose_anchor.rotation;
    let d_pbi_d_rot = -extrinsic.rotation * skew(&chain.p_camera_anchor);
    let d_direct_rot = skew(&chain.p_camera_obs);
    let mut wrt_extrinsic = Mat2x6::zeros();
    wrt_extrinsic
        .fixed_view_mut::<2, 3>(0, 0)
        .copy_from(&(d_r_d_p * (prop * d_pbi_d_rot + d_direct_rot)));
    wrt_extrinsic
        .fixed_view_mut::<2, 3>(0, 3)
        .copy_from(&(d_r_d_p * (prop - rot_ext_t)));

    // Inverse depth.
    let d_pci_d_lambda = -homogenize(anchor_pixel) / (inv_depth * inv_depth);
    let wrt_inv_depth = d_r_d_p * (prop * extrinsic.rotation * d_pci_d_lambda);

    Ok((
        residual,
        PointJacobians {
            wrt_pose_anchor,
            wrt_pose_obs,
            wrt_extrinsic,
            wrt_inv_depth,
        },
    ))
}

// ---------------------------------------------------------------------------
// Odometry residual
// ---------------------------------------------------------------------------

/// Weighted relative-pose residual
/// `r = sqrt_info * log(meas^-1 * (pose_i^-1 * pose_j))`, split into a
/// rotation block (axis-angle) and a translation block.
pub fn odometry_residual(
    factor: &OdometryFactor,
    pose_i: &CameraPose,
    pose_j: &CameraPose,
) -> Vector6<f64> {
    let rel = pose_i.inverse().compose(pose_j);
    let err = factor.rel_pose_meas.inverse().compose(&rel);
    let mut r = Vector6::zeros();
    r.fixed_view_mut::<3, 1>(0, 0).copy_from(&log_so3(&err.rotation));
    r.fixed_view_mut::<3, 1>(3, 0).copy_from(&err.translation);
    factor.sqrt_info * r
}

/// Analytic Jacobians of [`odometry_residual`] with respect to the two poses
/// (each 6x6, `[rotation | translation]` column order).
pub fn odometry_jacobians(
    factor: &OdometryFactor,
    pose_i: &CameraPose,
    pose_j: &CameraPose,
) -> (Vector6<f64>, Matrix6<f64>, Matrix6<f64>) {
    let rel = pose_i.inverse().compose(pose_j);
    let err = factor.rel_pose_meas.inverse().compose(&rel);
    let phi = log_so3(&err.rotation);
    let jr_inv = right_jacobian_inv(&phi);
    let rot_meas_t = factor.rel_pose_meas.rotation.transpose();

    let mut jac_i = Matrix6::zeros();
    jac_i
        .fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(-jr_inv * rel.rotation.transpose()));
    jac_i
        .fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&(rot_meas_t * skew(&rel.translation)));
    jac_i
        .fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(-(rot_meas_t * pose_i.rotation.transpose())));

    let mut jac_j = Matrix6::zeros();
    jac_j.fixed_view_mut::<3, 3>(0, 0).copy_from(&jr_inv);
    jac_j
        .fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(rot_meas_t * pose_i.rotation.transpose()));

    let mut r = Vector6::zeros();
    r.fixed_view_mut::<3, 1>(0, 0).copy_from(&phi);
    r.fixed_view_mut::<3, 1>(3, 0).copy_from(&err.translation);
    (
        factor.sqrt_info * r,
        factor.sqrt_info * jac_i,
        factor.sqrt_info * jac_j,
    )
}
