//! Central finite-difference verification of every analytic Jacobian block.
//!
//! The suite drives randomized configurations through each block of the
//! line, point, and odometry Jacobians (including the chain factors the
//! full Jacobians are assembled from) and reports the worst relative error
//! per block. It backs both the `check-jacobians` CLI subcommand and the
//! acceptance tests.

use nalgebra::{DMatrix, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::line_geometry::{
    line_motion_matrix, plucker_from_inverse_depth, CameraPose, InverseDepthLine, PluckerLine,
};
use crate::residuals::{
    d_anchor_line_d_inv_depths, d_residual_d_line_coeffs, line_in_observer_frame,
    line_jacobians, line_jacobians_orthonormal, line_residual, line_residual_orthonormal,
    odometry_jacobians, odometry_residual, point_jacobians, point_residual, project_line,
    residual_from_projected, CameraIntrinsics, LineObservation, OdometryFactor,
};
use crate::line_geometry::orthonormal_from_plucker;

/// Central-difference step; balances truncation against rounding for the
/// magnitudes in play here.
pub const FD_STEP: f64 = 1e-6;
/// Relative-error gate every block must meet.
pub const REL_TOL: f64 = 1e-5;
/// Differences below this absolute floor pass regardless of relative size.
pub const ABS_FLOOR: f64 = 1e-8;

/// Worst-case comparison result for one named Jacobian block.
#[derive(Debug, Clone, Serialize)]
pub struct BlockReport {
    pub name: String,
    pub configs: usize,
    pub max_rel_err: f64,
}

impl BlockReport {
    pub fn passes(&self) -> bool {
        self.max_rel_err < REL_TOL
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JacobianSuiteReport {
    pub blocks: Vec<BlockReport>,
    pub configs: usize,
}

impl JacobianSuiteReport {
    pub fn passes(&self) -> bool {
        self.blocks.iter().all(BlockReport::passes)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.max_rel_err)
            .fold(0.0, f64::max)
    }
}

/// Elementwise relative error with an absolute floor: entries whose
/// difference is below the floor always pass.
fn block_error(analytic: &DMatrix<f64>, fd: &DMatrix<f64>) -> f64 {
    analytic
        .iter()
        .zip(fd.iter())
        .map(|(a, b)| {
            let diff = (a - b).abs();
            if diff < ABS_FLOOR {
                0.0
            } else {
                diff / a.abs().max(b.abs()).max(ABS_FLOOR)
            }
        })
        .fold(0.0, f64::max)
}

/// Central finite differences of a vector function of `dim` perturbation
/// coordinates.
fn central_difference<F>(dim: usize, rows: usize, eval: F) -> DMatrix<f64>
where
    F: Fn(usize, f64) -> Option<nalgebra::DVector<f64>>,
{
    let mut jac = DMatrix::zeros(rows, dim);
    for col in 0..dim {
        let plus = eval(col, FD_STEP).expect("fd evaluation failed");
        let minus = eval(col, -FD_STEP).expect("fd evaluation failed");
        let d = (plus - minus) / (2.0 * FD_STEP);
        jac.set_column(col, &d);
    }
    jac
}

fn random_pose(rng: &mut ChaCha8Rng, rot: f64, trans: f64) -> CameraPose {
    CameraPose::from_axis_angle(
        &Vector3::new(
            rng.random_range(-rot..rot),
            rng.random_range(-rot..rot),
            rng.random_range(-rot..rot),
        ),
        &Vector3::new(
            rng.random_range(-trans..trans),
            rng.random_range(-trans..trans),
            rng.random_range(-trans..trans),
        ),
    )
}

struct LineConfig {
    line: InverseDepthLine,
    pose_anchor: CameraPose,
    pose_obs: CameraPose,
    extrinsic: CameraPose,
    obs: LineObservation,
}

fn random_line_config(rng: &mut ChaCha8Rng) -> LineConfig {
    loop {
        let extrinsic = random_pose(rng, 0.3, 0.2);
        let pose_anchor = random_pose(rng, 0.4, 0.8);
        let pose_obs = random_pose(rng, 0.4, 0.8);
        let p0 = Vector3::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(4.0..8.0),
        );
        let p1 = p0
            + Vector3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-1.0..1.0),
            );
        let Ok(_) = PluckerLine::from_two_points(&p0, &p1) else {
            continue;
        };
        let cam_anchor = pose_anchor.compose(&extrinsic);
        let q0 = cam_anchor.inverse_transform_point(&p0);
        let q1 = cam_anchor.inverse_transform_point(&p1);
        if q0.z < 0.5 || q1.z < 0.5 {
            continue;
        }
        let Ok(line) = InverseDepthLine::new(
            1.0 / q0.z,
            1.0 / q1.z,
            Vector2::new(q0.x / q0.z, q0.y / q0.z),
            Vector2::new(q1.x / q1.z, q1.y / q1.z),
        ) else {
            continue;
        };
        let line_ci = plucker_from_inverse_depth(&line).unwrap();
        let line_cj = line_in_observer_frame(&line_ci, &pose_anchor, &pose_obs, &extrinsic);
        if line_cj.normal.fixed_rows::<2>(0).norm() < 5e-2 {
            continue;
        }
        let obs = LineObservation::new(
            1,
            Vector2::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6)),
            Vector2::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6)),
        );
        let Ok(obs) = obs else { continue };
        return LineConfig {
            line,
            pose_anchor,
            pose_obs,
            extrinsic,
            obs,
        };
    }
}

fn to_dyn<const R: usize, const C: usize>(m: &nalgebra::SMatrix<f64, R, C>) -> DMatrix<f64> {
    DMatrix::from_iterator(R, C, m.iter().copied())
}

struct MaxTracker {
    name: &'static str,
    max: f64,
}

impl MaxTracker {
    fn new(name: &'static str) -> Self {
        Self { name, max: 0.0 }
    }

    fn update(&mut self, analytic: &DMatrix<f64>, fd: &DMatrix<f64>) {
        self.max = self.max.max(block_error(analytic, fd));
    }

    fn report(self, configs: usize) -> BlockReport {
        BlockReport {
            name: self.name.to_string(),
            configs,
            max_rel_err: self.max,
        }
    }
}

/// Full line-residual Jacobian suite (inverse-depth parameterization) plus
/// the individual appendix chain factors.
pub fn check_line_jacobians(configs: usize, seed: u64) -> Vec<BlockReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pose_anchor_t = MaxTracker::new("line/d_pose_anchor");
    let mut pose_obs_t = MaxTracker::new("line/d_pose_obs");
    let mut extrinsic_t = MaxTracker::new("line/d_extrinsic");
    let mut lambda_t = MaxTracker::new("line/d_inv_depths");
    let mut dres_dl_t = MaxTracker::new("line/d_res_d_line_coeffs");
    let mut dl_dline_t = MaxTracker::new("line/d_proj_d_plucker");
    let mut chain_rot_t = MaxTracker::new("line/d_chain_d_rot_obs");
    let mut chain_trans_t = MaxTracker::new("line/d_chain_d_trans_obs");
    let mut anchor_depth_t = MaxTracker::new("line/d_anchor_plucker_d_inv_depths");
    let mut orth_t = MaxTracker::new("line/d_orthonormal_params");

    for _ in 0..configs {
        let cfg = random_line_config(&mut rng);
        let (_, jac) = line_jacobians(
            &cfg.line,
            &cfg.pose_anchor,
            &cfg.pose_obs,
            &cfg.extrinsic,
            &cfg.obs,
        )
        .unwrap();

        let eval_pose = |which: usize| {
            let cfg = &cfg;
            move |col: usize, eps: f64| {
                let mut dr = Vector3::zeros();
                let mut dt = Vector3::zeros();
                if col < 3 {
                    dr[col] = eps;
                } else {
                    dt[col - 3] = eps;
                }
                let mut pa = cfg.pose_anchor;
                let mut po = cfg.pose_obs;
                let mut ex = cfg.extrinsic;
                match which {
                    0 => pa = pa.boxplus(&dr, &dt),
                    1 => po = po.boxplus(&dr, &dt),
                    _ => ex = ex.boxplus(&dr, &dt),
                }
                line_residual(&cfg.line, &pa, &po, &ex, &cfg.obs)
                    .ok()
                    .map(|r| nalgebra::DVector::from_column_slice(r.as_slice()))
            }
        };
        let fd_anchor = central_difference(6, 2, eval_pose(0));
        let fd_obs = central_difference(6, 2, eval_pose(1));
        let fd_ext = central_difference(6, 2, eval_pose(2));
        pose_anchor_t.update(&to_dyn(&jac.wrt_pose_anchor), &fd_anchor);
        pose_obs_t.update(&to_dyn(&jac.wrt_pose_obs), &fd_obs);
        extrinsic_t.update(&to_dyn(&jac.wrt_extrinsic), &fd_ext);

        let fd_lambda = central_difference(2, 2, |col, eps| {
            let mut ls = cfg.line.inv_depth_start();
            let mut le = cfg.line.inv_depth_end();
            if col == 0 {
                ls += eps;
            } else {
                le += eps;
            }
            let line = cfg.line.with_inverse_depths(ls, le);
            line_residual(&line, &cfg.pose_anchor, &cfg.pose_obs, &cfg.extrinsic, &cfg.obs)
                .ok()
                .map(|r| nalgebra::DVector::from_column_slice(r.as_slice()))
        });
        lambda_t.update(&to_dyn(&jac.wrt_inv_depths), &fd_lambda);

        // Appendix factor: residual derivative in the image-line coefficients.
        let line_ci = plucker_from_inverse_depth(&cfg.line).unwrap();
        let line_cj =
            line_in_observer_frame(&line_ci, &cfg.pose_anchor, &cfg.pose_obs, &cfg.extrinsic);
        let coeffs = line_cj.normal;
        let analytic_dl = d_residual_d_line_coeffs(&coeffs, &cfg.obs);
        let fd_dl = central_difference(3, 2, |col, eps| {
            let mut c = coeffs;
            c[col] += eps;
            residual_from_projected(&c, &cfg.obs)
                .ok()
                .map(|r| nalgebra::DVector::from_column_slice(r.as_slice()))
        });
        dres_dl_t.update(&to_dyn(&analytic_dl), &fd_dl);

        // Appendix factor: pixel-space projection derivative [K_L, 0].
        let intr = CameraIntrinsics::new(460.0, 458.0, 376.0, 240.0);
        let mut analytic_proj = DMatrix::zeros(3, 6);
        analytic_proj
            .view_mut((0, 0), (3, 3))
            .copy_from(&intr.line_projection_matrix());
        let fd_proj = central_difference(6, 3, |col, eps| {
            let mut l = line_cj;
            if col < 3 {
                l.normal[col] += eps;
            } else {
                l.direction[col - 3] += eps;
            }
            project_line(&l, &intr)
                .ok()
                .map(|p| nalgebra::DVector::from_column_slice(p.coeffs.as_slice()))
        });
        dl_dline_t.update(&analytic_proj, &fd_proj);

        // Appendix factors: transform-chain derivatives of the full
        // six-vector in the observing body pose.
        let inv_ext = line_motion_matrix(&cfg.extrinsic.inverse());
        let line_w = crate::line_geometry::transform_line(
            &crate::line_geometry::transform_line(&line_ci, &cfg.extrinsic),
            &cfg.pose_anchor,
        );
        let line_bj = crate::line_geometry::invert_transform_line(&line_w, &cfg.pose_obs);
        let analytic_rot = inv_ext
            * crate::residuals::stack6(
                &crate::rotation::skew(&line_bj.normal),
                &crate::rotation::skew(&line_bj.direction),
            );
        let analytic_trans = inv_ext
            * crate::residuals::stack6(
                &(cfg.pose_obs.rotation.transpose() * crate::rotation::skew(&line_w.direction)),
                &nalgebra::Matrix3::zeros(),
            );
        let eval_chain = |col: usize, eps: f64| {
            let mut dr = Vector3::zeros();
            let mut dt = Vector3::zeros();
            if col < 3 {
                dr[col] = eps;
            } else {
                dt[col - 3] = eps;
            }
            let po = cfg.pose_obs.boxplus(&dr, &dt);
            let l = line_in_observer_frame(&line_ci, &cfg.pose_anchor, &po, &cfg.extrinsic);
            let mut v = nalgebra::DVector::zeros(6);
            v.fixed_rows_mut::<3>(0).copy_from(&l.normal);
            v.fixed_rows_mut::<3>(3).copy_from(&l.direction);
            Some(v)
        };
        let fd_chain = central_difference(6, 6, eval_chain);
        let fd_chain_rot = fd_chain.columns(0, 3).into_owned();
        let fd_chain_trans = fd_chain.columns(3, 3).into_owned();
        chain_rot_t.update(&to_dyn(&analytic_rot), &fd_chain_rot);
        chain_trans_t.update(&to_dyn(&analytic_trans), &fd_chain_trans);

        // Appendix factor: anchor-frame Plucker derivative in the inverse depths.
        let analytic_depth = d_anchor_line_d_inv_depths(&cfg.line);
        let fd_depth = central_difference(2, 6, |col, eps| {
            let mut ls = cfg.line.inv_depth_start();
            let mut le = cfg.line.inv_depth_end();
            if col == 0 {
                ls += eps;
            } else {
                le += eps;
            }
            let line = cfg.line.with_inverse_depths(ls, le);
            let p = plucker_from_inverse_depth(&line).ok()?;
            let mut v = nalgebra::DVector::zeros(6);
            v.fixed_rows_mut::<3>(0).copy_from(&p.normal);
            v.fixed_rows_mut::<3>(3).copy_from(&p.direction);
            Some(v)
        });
        anchor_depth_t.update(&to_dyn(&analytic_depth), &fd_depth);

        // Orthonormal baseline parameterization.
        let orth = orthonormal_from_plucker(&line_ci).unwrap();
        if let Ok((_, orth_jac)) = line_jacobians_orthonormal(
            &orth,
            &cfg.pose_anchor,
            &cfg.pose_obs,
            &cfg.extrinsic,
            &cfg.obs,
        ) {
            let fd_orth = central_difference(4, 2, |col, eps| {
                let mut du = Vector3::zeros();
                let mut dtheta = 0.0;
                if col < 3 {
                    du[col] = eps;
                } else {
                    dtheta = eps;
                }
                let perturbed = orth.boxplus(&du, dtheta);
                line_residual_orthonormal(
                    &perturbed,
                    &cfg.pose_anchor,
                    &cfg.pose_obs,
                    &cfg.extrinsic,
                    &cfg.obs,
                )
                .ok()
                .map(|r| nalgebra::DVector::from_column_slice(r.as_slice()))
            });
            orth_t.update(&to_dyn(&orth_jac.wrt_line_params), &fd_orth);
        }
    }

    vec![
        pose_anchor_t.report(configs),
        pose_obs_t.report(configs),
        extrinsic_t.report(configs),
        lambda_t.report(configs),
        dres_dl_t.report(configs),
        dl_dline_t.report(configs),
        chain_rot_t.report(configs),
        chain_trans_t.report(configs),
        anchor_depth_t.report(configs),
        orth_t.report(configs),
    ]
}

/// Point-residual Jacobian blocks against central finite differences.
pub fn check_point_jacobians(configs: usize, seed: u64) -> Vec<BlockReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut anchor_t = MaxTracker::new("point/d_pose_anchor");
    let mut obs_t = MaxTracker::new("point/d_pose_obs");
    let mut ext_t = MaxTracker::new("point/d_extrinsic");
    let mut depth_t = MaxTracker::new("point/d_inv_depth");

    let mut done = 0;
    while done < configs {
        let extrinsic = random_pose(&mut rng, 0.3, 0.2);
        let pose_anchor = random_pose(&mut rng, 0.4, 0.8);
        let pose_obs = random_pose(&mut rng, 0.4, 0.8);
        let anchor_pixel = Vector2::new(
            rng.random_range(-0.6..0.6),
            rng.random_range(-0.6..0.6),
        );
        let inv_depth = rng.random_range(0.15..1.0);
        let obs_pixel = Vector2::new(
            rng.random_range(-0.6..0.6),
            rng.random_range(-0.6..0.6),
        );
        let Ok((_, jac)) = point_jacobians(
            inv_depth,
            &anchor_pixel,
            &pose_anchor,
            &pose_obs,
            &extrinsic,
            &obs_pixel,
        ) else {
            continue;
        };

        let eval_pose = |which: usize| {
            let (pa0, po0, ex0) = (pose_anchor, pose_obs, extrinsic);
            move |col: usize, eps: f64| {
                let mut dr = Vector3::zeros();
                let mut dt = Vector3::zeros();
                if col < 3 {
                    dr[col] = eps;
                } else {
                    dt[col - 3] = eps;
                }
                let mut pa = pa0;
                let mut po = po0;
                let mut ex = ex0;
                match which {
                    0 => pa = pa.boxplus(&dr, &dt),
                    1 => po = po.boxplus(&dr, &dt),
                    _ => ex = ex.boxplus(&dr, &dt),
                }
                point_residual(inv_depth, &anchor_pixel, &pa, &po, &ex, &obs_pixel)
                    .ok()
                    .map(|r| nalgebra::DVector::from_column_slice(r.as_slice()))
            }
        };
        anchor_t.update(&to_dyn(&jac.wrt_pose_anchor), &central_difference(6, 2, eval_pose(0)));
        obs_t.update(&to_dyn(&jac.wrt_pose_obs), &central_difference(6, 2, eval_pose(1)));
        ext_t.update(&to_dyn(&jac.wrt_extrinsic), &central_difference(6, 2, eval_pose(2)));

        let fd_depth = central_difference(1, 2, |_, eps| {
            point_residual(
                inv_depth + eps,
                &anchor_pixel,
                &pose_anchor,
                &pose_obs,
                &extrinsic,
                &obs_pixel,
            )
            .ok()
            .map(|r| nalgebra::DVector::from_column_slice(r.as_slice()))
        });
        depth_t.update(
            &DMatrix::from_column_slice(2, 1, jac.wrt_inv_depth.as_slice()),
            &fd_depth,
        );
        done += 1;
    }

    vec![
        anchor_t.report(configs),
        obs_t.report(configs),
        ext_t.report(configs),
        depth_t.report(configs),
    ]
}

/// Odometry-residual Jacobian blocks against central finite differences.
pub fn check_odometry_jacobians(configs: usize, seed: u64) -> Vec<BlockReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut i_t = MaxTracker::new("odometry/d_pose_i");
    let mut j_t = MaxTracker::new("odometry/d_pose_j");

    for _ in 0..configs {
        let pose_i = random_pose(&mut rng, 0.8, 2.0);
        let pose_j = random_pose(&mut rng, 0.8, 2.0);
        // A measurement near (but not at) the true relative pose.
        let meas = pose_i
            .inverse()
            .compose(&pose_j)
            .boxplus(
                &Vector3::new(
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                ),
                &Vector3::new(
                    rng.random_range(-0.2..0.2),
                    rng.random_range(-0.2..0.2),
                    rng.random_range(-0.2..0.2),
                ),
            );
        let mut sqrt_info = nalgebra::Matrix6::identity();
        for k in 0..6 {
            sqrt_info[(k, k)] = rng.random_range(0.5..3.0);
        }
        let factor = OdometryFactor {
            frame_i: 0,
            frame_j: 1,
            rel_pose_meas: meas,
            sqrt_info,
        };
        let (_, jac_i, jac_j) = odometry_jacobians(&factor, &pose_i, &pose_j);

        let eval = |which: usize| {
            let (pi0, pj0, f) = (pose_i, pose_j, factor.clone());
            move |col: usize, eps: f64| {
                let mut dr = Vector3::zeros();
                let mut dt = Vector3::zeros();
                if col < 3 {
                    dr[col] = eps;
                } else {
                    dt[col - 3] = eps;
                }
                let mut pi = pi0;
                let mut pj = pj0;
                if which == 0 {
                    pi = pi.boxplus(&dr, &dt);
                } else {
                    pj = pj.boxplus(&dr, &dt);
                }
                let r = odometry_residual(&f, &pi, &pj);
                Some(nalgebra::DVector::from_column_slice(r.as_slice()))
            }
        };
        i_t.update(
            &DMatrix::from_iterator(6, 6, jac_i.iter().copied()),
            &central_difference(6, 6, eval(0)),
        );
        j_t.update(
            &DMatrix::from_iterator(6, 6, jac_j.iter().copied()),
            &central_difference(6, 6, eval(1)),
        );
    }

    vec![i_t.report(configs), j_t.report(configs)]
}

/// Run every Jacobian check; `configs` counts configurations per factor type.
pub fn run_full_suite(configs: usize, seed: u64) -> JacobianSuiteReport {
    let mut blocks = check_line_jacobians(configs, seed);
    blocks.extend(check_point_jacobians(configs, seed.wrapping_add(1)));
    blocks.extend(check_odometry_jacobians(configs, seed.wrapping_add(2)));
    JacobianSuiteReport { blocks, configs }
}
