//! Hand-eye calibration (AX = XB) for the controller→camera transforms.
//!
//! `A` is the controller motion between two samples and `B` the matching
//! camera motion derived from camera→target observations of a static target.
//! Rotation is solved with the Tsai-Lenz linear formulation on modified
//! Rodrigues vectors, translation by linear least squares. The calibration is
//! repeated over disjoint blocks and the block results are fused by a
//! nonlinear least-squares pose fit.

use nalgebra::{DMatrix, DVector, Matrix3, Quaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{fit_pose, FitOptions, FitResult};
use crate::rig::{Controller, TargetObservation};
use crate::se3::{compose, delta, interpolate, inverse, skew, Pose, Trajectory};

/// Minimum number of motion pairs the solver accepts.
pub const MIN_MOTION_PAIRS: usize = 3;
/// Two motion axes count as distinct when at least this far apart (degrees).
pub const MIN_AXIS_SEPARATION_DEG: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandEyeSample {
    pub timestamp: f64,
    pub tf_world_wm1: Pose,
    pub tf_world_wm2: Pose,
    pub tf_cam_target: Pose,
}

impl HandEyeSample {
    fn hand(&self, controller: Controller) -> &Pose {
        match controller {
            Controller::One => &self.tf_world_wm1,
            Controller::Two => &self.tf_world_wm2,
        }
    }
}

/// Zips two controller trajectories and the target observations recorded on
/// the same timestamp grid.
pub fn samples_from_streams(
    controller1: &Trajectory,
    controller2: &Trajectory,
    observations: &[TargetObservation],
) -> Result<Vec<HandEyeSample>> {
    if controller1.len() != controller2.len() || controller1.len() != observations.len() {
        return Err(Error::invalid(format!(
            "stream lengths differ: controller1 {}, controller2 {}, observations {}",
            controller1.len(),
            controller2.len(),
            observations.len()
        )));
    }
    controller1
        .samples()
        .iter()
        .zip(controller2.samples())
        .zip(observations)
        .map(|((a, b), o)| {
            if a.timestamp != b.timestamp || a.timestamp != o.timestamp {
                return Err(Error::invalid(format!(
                    "timestamps {} / {} / {} do not line up",
                    a.timestamp, b.timestamp, o.timestamp
                )));
            }
            Ok(HandEyeSample {
                timestamp: a.timestamp,
                tf_world_wm1: a.pose,
                tf_world_wm2: b.pose,
                tf_cam_target: o.tf_cam_target,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionPair {
    /// Controller motion `A = H_i⁻¹ H_{i+1}`.
    pub hand_motion: Pose,
    /// Camera motion `B = C_i C_{i+1}⁻¹`.
    pub eye_motion: Pose,
    /// Rotation angle of `A`, degrees.
    pub rotation_angle: f64,
}

pub fn build_motion_pairs(
    samples: &[HandEyeSample],
    controller: Controller,
    min_rotation_deg: f64,
) -> Result<Vec<MotionPair>> {
    if samples.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    let pairs: Vec<MotionPair> = samples
        .windows(2)
        .map(|w| {
            let a = compose(&inverse(w[0].hand(controller)), w[1].hand(controller));
            let b = compose(&w[0].tf_cam_target, &inverse(&w[1].tf_cam_target));
            MotionPair {
                hand_motion: a,
                eye_motion: b,
                rotation_angle: a.angle().to_degrees(),
            }
        })
        .filter(|p| p.rotation_angle >= min_rotation_deg)
        .collect();
    if pairs.len() < MIN_MOTION_PAIRS {
        return Err(Error::InsufficientMotion {
            surviving: pairs.len(),
            required: MIN_MOTION_PAIRS,
        });
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandEyeSolution {
    /// Camera pose in the controller frame (X).
    pub tf_wm_cam: Pose,
    /// RMS rotation residual of `A X` vs `X B`, degrees.
    pub residual_rotation: f64,
    /// RMS translation residual, meters.
    pub residual_translation: f64,
    /// Motion pairs used.
    pub sample_count: usize,
}

/// Twice the quaternion vector part: `2 sin(θ/2) · axis`.
fn modified_rodrigues(p: &Pose) -> Vector3<f64> {
    p.rotation().imag() * 2.0
}

fn lstsq(a: DMatrix<f64>, b: DVector<f64>, what: &str) -> Result<Vector3<f64>> {
    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let (max, min) = (sv.max(), sv.min());
    if !(max > 0.0) || min / max < 1e-9 {
        return Err(Error::Degenerate(format!(
            "{what} system is rank deficient (singular values {:.3e}..{:.3e}); rotate about at least two axes",
            min, max
        )));
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Numerical(format!("{what} least squares: {e}")))?;
    Ok(Vector3::new(x[0], x[1], x[2]))
}

fn check_axis_diversity(pairs: &[MotionPair]) -> Result<()> {
    let axes: Vec<Vector3<f64>> = pairs
        .iter()
        .filter_map(|p| p.hand_motion.rotation().axis().map(|a| a.into_inner()))
        .collect();
    let threshold = MIN_AXIS_SEPARATION_DEG.to_radians().cos();
    let distinct = axes
        .iter()
        .enumerate()
        .any(|(i, a)| axes[i + 1..].iter().any(|b| a.dot(b).abs() < threshold));
    if distinct {
        Ok(())
    } else {
        Err(Error::Degenerate(format!(
            "all motion axes lie within {MIN_AXIS_SEPARATION_DEG}° of one direction; rotate about at least two axes"
        )))
    }
}

pub fn solve_tsai(pairs: &[MotionPair]) -> Result<HandEyeSolution> {
    if pairs.len() < MIN_MOTION_PAIRS {
        return Err(Error::InsufficientMotion {
            surviving: pairs.len(),
            required: MIN_MOTION_PAIRS,
        });
    }
    check_axis_diversity(pairs)?;
    let n = pairs.len();

    // skew(Pa + Pb) · t = Pb − Pa, with t = tan(θx/2) · axis_x
    let mut a = DMatrix::zeros(3 * n, 3);
    let mut b = DVector::zeros(3 * n);
    for (i, p) in pairs.iter().enumerate() {
        let pa = modified_rodrigues(&p.hand_motion);
        let pb = modified_rodrigues(&p.eye_motion);
        a.fixed_view_mut::<3, 3>(3 * i, 0).copy_from(&skew(&(pa + pb)));
        b.fixed_rows_mut::<3>(3 * i).copy_from(&(pb - pa));
    }
    let gibbs = lstsq(a, b, "rotation")?;
    let rotation = Pose::from_parts(Vector3::zeros(), Quaternion::new(1.0, gibbs.x, gibbs.y, gibbs.z))?;
    let r_x = rotation.rotation_matrix();

    // (R_A − I) t_X = R_X t_B − t_A
    let mut a = DMatrix::zeros(3 * n, 3);
    let mut b = DVector::zeros(3 * n);
    for (i, p) in pairs.iter().enumerate() {
        a.fixed_view_mut::<3, 3>(3 * i, 0)
            .copy_from(&(p.hand_motion.rotation_matrix() - Matrix3::identity()));
        b.fixed_rows_mut::<3>(3 * i)
            .copy_from(&(r_x * p.eye_motion.translation() - p.hand_motion.translation()));
    }
    let t_x = lstsq(a, b, "translation")?;
    let x = Pose::new(t_x, *rotation.rotation());

    let (mut rot_sq, mut tr_sq) = (0.0, 0.0);
    for p in pairs {
        let d = delta(&compose(&p.hand_motion, &x), &compose(&x, &p.eye_motion));
        rot_sq += d.rotation_error.powi(2);
        tr_sq += d.translation_error.powi(2);
    }
    Ok(HandEyeSolution {
        tf_wm_cam: x,
        residual_rotation: (rot_sq / n as f64).sqrt(),
        residual_translation: (tr_sq / n as f64).sqrt(),
        sample_count: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationParams {
    pub set_size: usize,
    pub repetitions: usize,
    /// Motion pairs rotating less than this are discarded (degrees).
    pub min_rotation_deg: f64,
    pub refinement: FitOptions,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        CalibrationParams {
            set_size: 50,
            repetitions: 20,
            min_rotation_deg: 5.0,
            refinement: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedCalibration {
    pub controller1: Vec<HandEyeSolution>,
    pub controller2: Vec<HandEyeSolution>,
}

impl RepeatedCalibration {
    pub fn for_controller(&self, c: Controller) -> &[HandEyeSolution] {
        match c {
            Controller::One => &self.controller1,
            Controller::Two => &self.controller2,
        }
    }
}

/// Runs one calibration per disjoint block of `set_size` consecutive samples.
pub fn calibrate_repeated(samples: &[HandEyeSample], params: &CalibrationParams) -> Result<RepeatedCalibration> {
    if params.set_size < 2 || params.repetitions == 0 {
        return Err(Error::invalid("set_size must be >= 2 and repetitions >= 1"));
    }
    let required = params.set_size * params.repetitions;
    if samples.len() < required {
        return Err(Error::invalid(format!(
            "{} samples available, {} required ({} sets of {})",
            samples.len(),
            required,
            params.repetitions,
            params.set_size
        )));
    }
    let solve_all = |c: Controller| -> Result<Vec<HandEyeSolution>> {
        samples
            .chunks_exact(params.set_size)
            .take(params.repetitions)
            .map(|block| solve_tsai(&build_motion_pairs(block, c, params.min_rotation_deg)?))
            .collect()
    };
    Ok(RepeatedCalibration {
        controller1: solve_all(Controller::One)?,
        controller2: solve_all(Controller::Two)?,
    })
}

/// Fuses repeated hand-eye results; equal weight for every input.
pub fn refine(solutions: &[HandEyeSolution], opts: &FitOptions) -> Result<Pose> {
    Ok(refine_fit(solutions, opts)?.pose)
}

pub fn refine_fit(solutions: &[HandEyeSolution], opts: &FitOptions) -> Result<FitResult> {
    if solutions.len() < 2 {
        return Err(Error::invalid(format!(
            "refinement needs >= 2 solutions, got {}",
            solutions.len()
        )));
    }
    let poses: Vec<Pose> = solutions.iter().map(|s| s.tf_wm_cam).collect();
    fit_pose(&poses, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedHandEye {
    pub tf_wm1_cam: Pose,
    pub tf_wm2_cam: Pose,
    pub input_solutions: RepeatedCalibration,
}

impl RefinedHandEye {
    pub fn hand_eye(&self, c: Controller) -> Pose {
        match c {
            Controller::One => self.tf_wm1_cam,
            Controller::Two => self.tf_wm2_cam,
        }
    }
}

/// Full procedure: repeated block calibration followed by refinement.
pub fn calibrate(samples: &[HandEyeSample], params: &CalibrationParams) -> Result<RefinedHandEye> {
    let input_solutions = calibrate_repeated(samples, params)?;
    Ok(RefinedHandEye {
        tf_wm1_cam: refine(&input_solutions.controller1, &params.refinement)?,
        tf_wm2_cam: refine(&input_solutions.controller2, &params.refinement)?,
        input_solutions,
    })
}

pub const MIN_TARGET_OBSERVATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetEstimate {
    /// Calibration target pose in the world.
    pub pose: Pose,
    /// Set when all observations come from (nearly) one camera pose.
    pub poorly_conditioned: bool,
    pub final_cost: f64,
    pub observations_used: usize,
}

/// World pose of the static calibration target from a camera trajectory and
/// camera→target observations.
pub fn refine_target(
    camera_traj: &Trajectory,
    observations: &[TargetObservation],
    opts: &FitOptions,
) -> Result<TargetEstimate> {
    if observations.len() < MIN_TARGET_OBSERVATIONS {
        return Err(Error::invalid(format!(
            "target refinement needs >= {MIN_TARGET_OBSERVATIONS} observations, got {}",
            observations.len()
        )));
    }
    let mut cameras = Vec::with_capacity(observations.len());
    let mut estimates = Vec::with_capacity(observations.len());
    for o in observations {
        let cam = interpolate(camera_traj, o.timestamp)?;
        estimates.push(compose(&cam, &o.tf_cam_target));
        cameras.push(cam);
    }
    let spread = cameras
        .iter()
        .map(|c| delta(&cameras[0], c))
        .fold((0.0f64, 0.0f64), |acc, d| {
            (acc.0.max(d.translation_error), acc.1.max(d.rotation_error))
        });
    let poorly_conditioned = spread.0 < 1e-6 && spread.1 < 1e-4;
    if poorly_conditioned {
        log::warn!("all target observations share one camera pose; no averaging over viewpoints");
    }
    let fit = fit_pose(&estimates, opts)?;
    Ok(TargetEstimate {
        pose: fit.pose,
        poorly_conditioned,
        final_cost: fit.final_cost,
        observations_used: observations.len(),
    })
}
