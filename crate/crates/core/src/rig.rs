//! Synthetic camera stick: rigid geometry, test trajectories, and noisy
//! controller / camera→target measurements.
//!
//! Frames: world is z-up. The camera frame is x right, y down, z along the
//! optical axis. The two controllers sit 0.9 m above the camera, 0.52 m apart,
//! rotated by roughly 180° about the vertical relative to each other.

use std::f64::consts::PI;

use nalgebra::{UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::{compose, inverse, Pose, StampedPose, Trajectory};

/// Rigid stick geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RigConfig {
    /// Camera pose in the controller-1 frame.
    pub tf_wm1_cam: Pose,
    /// Camera pose in the controller-2 frame.
    pub tf_wm2_cam: Pose,
}

impl Default for RigConfig {
    fn default() -> Self {
        RigConfig::stick(0.52, 0.9, 90.0, -89.47)
    }
}

impl RigConfig {
    /// Builds a stick with the controllers `separation` apart, `drop` above
    /// the camera, each yawed about the stick's vertical axis.
    pub fn stick(separation: f64, drop: f64, yaw1_deg: f64, yaw2_deg: f64) -> Self {
        // "up" in the camera frame is -y
        let up = -Vector3::y_axis();
        let cam_t_c1 = Pose::new(
            Vector3::new(-separation / 2.0, -drop, 0.0),
            UnitQuaternion::from_axis_angle(&up, yaw1_deg.to_radians()),
        );
        let cam_t_c2 = Pose::new(
            Vector3::new(separation / 2.0, -drop, 0.0),
            UnitQuaternion::from_axis_angle(&up, yaw2_deg.to_radians()),
        );
        RigConfig {
            tf_wm1_cam: inverse(&cam_t_c1),
            tf_wm2_cam: inverse(&cam_t_c2),
        }
    }

    pub fn identity() -> Self {
        RigConfig {
            tf_wm1_cam: Pose::identity(),
            tf_wm2_cam: Pose::identity(),
        }
    }

    /// Controller-2 pose in the controller-1 frame.
    pub fn tf_wm(&self) -> Pose {
        compose(&self.tf_wm1_cam, &inverse(&self.tf_wm2_cam))
    }

    pub fn hand_eye(&self, controller: Controller) -> Pose {
        match controller {
            Controller::One => self.tf_wm1_cam,
            Controller::Two => self.tf_wm2_cam,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Controller {
    One,
    Two,
}

impl Controller {
    pub const BOTH: [Controller; 2] = [Controller::One, Controller::Two];

    pub fn index(self) -> usize {
        match self {
            Controller::One => 1,
            Controller::Two => 2,
        }
    }
}

/// Zero-mean Gaussian pose noise, per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    /// Meters.
    pub sigma_translation: f64,
    /// Degrees.
    pub sigma_rotation: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            sigma_translation: 1e-3,
            sigma_rotation: 0.1,
            seed: 0,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for an independent random stream derived from a scene seed.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

impl NoiseModel {
    pub fn zero() -> Self {
        NoiseModel {
            sigma_translation: 0.0,
            sigma_rotation: 0.0,
            seed: 0,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        NoiseModel { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_translation >= 0.0 && self.sigma_rotation >= 0.0) {
            return Err(Error::invalid("noise sigmas must be non-negative"));
        }
        Ok(())
    }

    fn sampler(&self) -> PoseNoise {
        PoseNoise {
            rng: ChaCha8Rng::seed_from_u64(self.seed),
            translation: (self.sigma_translation > 0.0)
                .then(|| Normal::new(0.0, self.sigma_translation).expect("validated sigma")),
            rotation: (self.sigma_rotation > 0.0)
                .then(|| Normal::new(0.0, self.sigma_rotation.to_radians()).expect("validated sigma")),
        }
    }
}

struct PoseNoise {
    rng: ChaCha8Rng,
    translation: Option<Normal<f64>>,
    rotation: Option<Normal<f64>>,
}

impl PoseNoise {
    /// Translation offset in the parent frame, rotation right-multiplied.
    fn perturb(&mut self, pose: &Pose) -> Pose {
        let mut t = *pose.translation();
        let mut q = *pose.rotation();
        if let Some(n) = &self.translation {
            t += Vector3::from_fn(|_, _| n.sample(&mut self.rng));
        }
        if let Some(n) = &self.rotation {
            q *= UnitQuaternion::from_scaled_axis(Vector3::from_fn(|_, _| n.sample(&mut self.rng)));
        }
        Pose::new(t, q)
    }
}

pub fn add_noise(traj: &Trajectory, model: &NoiseModel) -> Result<Trajectory> {
    model.validate()?;
    let mut noise = model.sampler();
    Ok(traj.map_poses(traj.body_id(), |p| noise.perturb(p)))
}

/// Square path in the world x-y plane with superimposed rotations about all
/// three camera axes. Each edge is traversed with a cosine ease, so the
/// velocity vanishes at the corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SquareMotion {
    /// Edge length, meters.
    pub edge: f64,
    /// Time for one lap, seconds.
    pub period: f64,
    /// Sample rate, Hz.
    pub rate: f64,
    /// World position of the first corner.
    pub origin: [f64; 3],
    /// Rotation amplitudes about camera x, y, z (degrees).
    pub rotation_amplitude_deg: [f64; 3],
    /// Full sinusoid cycles per lap about camera x, y, z.
    pub rotation_cycles: [f64; 3],
}

impl Default for SquareMotion {
    fn default() -> Self {
        SquareMotion {
            edge: 1.0,
            period: 120.0,
            rate: 100.0,
            origin: [0.0, 0.0, 0.0],
            rotation_amplitude_deg: [20.0, 20.0, 20.0],
            rotation_cycles: [7.0, 5.0, 6.0],
        }
    }
}

/// Camera looking horizontally along world +y with image "down" = world -z.
pub fn level_camera_orientation() -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::x_axis(), -PI / 2.0)
}

impl SquareMotion {
    pub fn sample_count(&self) -> usize {
        (self.period * self.rate).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.edge > 0.0 && self.period > 0.0 && self.rate > 0.0) {
            return Err(Error::invalid(format!(
                "square trajectory needs edge, period and rate > 0 (got {}, {}, {})",
                self.edge, self.period, self.rate
            )));
        }
        if self.sample_count() < 2 {
            return Err(Error::invalid("square trajectory needs at least two samples"));
        }
        Ok(())
    }

    /// Camera pose at lap fraction `s` in `[0, 1]`.
    pub fn pose_at_fraction(&self, s: f64) -> Pose {
        let corners = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(self.edge, 0.0, 0.0),
            Vector3::new(self.edge, self.edge, 0.0),
            Vector3::new(0.0, self.edge, 0.0),
        ];
        let lap = 4.0 * s;
        let edge_idx = (lap.floor() as usize).min(3);
        let u = lap - edge_idx as f64;
        let ease = (1.0 - (PI * u).cos()) / 2.0;
        let a = corners[edge_idx];
        let b = corners[(edge_idx + 1) % 4];
        let position = Vector3::from(self.origin) + a + (b - a) * ease;

        let phases = [0.0, PI / 3.0, 2.0 * PI / 3.0];
        let ang = |k: usize| {
            self.rotation_amplitude_deg[k].to_radians() * (2.0 * PI * self.rotation_cycles[k] * s + phases[k]).sin()
        };
        let wobble = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), ang(2))
            * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), ang(1))
            * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), ang(0));
        Pose::new(position, level_camera_orientation() * wobble)
    }

    pub fn generate(&self) -> Result<Trajectory> {
        self.validate()?;
        let n = self.sample_count();
        let samples = (0..n)
            .map(|k| StampedPose::new(k as f64 / self.rate, self.pose_at_fraction(k as f64 / n as f64)))
            .collect();
        Trajectory::new("camera", samples)
    }
}

pub fn square_trajectory(edge: f64, period: f64, rate: f64) -> Result<Trajectory> {
    SquareMotion {
        edge,
        period,
        rate,
        ..SquareMotion::default()
    }
    .generate()
}

/// Controller ground truth implied by a camera trajectory and the rig.
pub fn propagate_rig(camera_truth: &Trajectory, rig: &RigConfig) -> (Trajectory, Trajectory) {
    let c1_cam = inverse(&rig.tf_wm1_cam);
    let c2_cam = inverse(&rig.tf_wm2_cam);
    (
        camera_truth.map_poses("controller1", |cam| compose(cam, &c1_cam)),
        camera_truth.map_poses("controller2", |cam| compose(cam, &c2_cam)),
    )
}

/// Camera→calibration-target measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetObservation {
    pub timestamp: f64,
    pub tf_cam_target: Pose,
}

pub fn observe_target(
    camera_truth: &Trajectory,
    world_target: &Pose,
    model: &NoiseModel,
) -> Result<Vec<TargetObservation>> {
    model.validate()?;
    let mut noise = model.sampler();
    Ok(camera_truth
        .samples()
        .iter()
        .map(|s| TargetObservation {
            timestamp: s.timestamp,
            tf_cam_target: noise.perturb(&compose(&inverse(&s.pose), world_target)),
        })
        .collect())
}

/// Random camera stations around a viewpoint facing the calibration target,
/// as recorded for hand-eye calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationMotion {
    pub stations: usize,
    /// Seconds between stations.
    pub interval: f64,
    /// Uniform rotation range per camera axis, ± degrees.
    pub rotation_amplitude_deg: f64,
    /// Uniform position range per world axis, ± meters.
    pub translation_amplitude: f64,
    /// Nominal camera-to-target distance, meters.
    pub standoff: f64,
}

impl Default for CalibrationMotion {
    fn default() -> Self {
        CalibrationMotion {
            stations: 1000,
            interval: 0.5,
            rotation_amplitude_deg: 24.0,
            translation_amplitude: 0.1,
            standoff: 0.8,
        }
    }
}

impl CalibrationMotion {
    pub fn generate(&self, world_target: &Pose, seed: u64) -> Result<Trajectory> {
        if self.stations < 2 || !(self.interval > 0.0) || !(self.standoff > 0.0) {
            return Err(Error::invalid(
                "calibration motion needs >= 2 stations, interval > 0, standoff > 0",
            ));
        }
        if !(self.rotation_amplitude_deg > 0.0 && self.translation_amplitude >= 0.0) {
            return Err(Error::invalid("calibration motion amplitudes must be positive"));
        }
        let base = compose(world_target, &inverse(&target_offset(self.standoff)));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rot = Uniform::new_inclusive(
            -self.rotation_amplitude_deg.to_radians(),
            self.rotation_amplitude_deg.to_radians(),
        )
        .map_err(|e| Error::invalid(e.to_string()))?;
        let tr = Uniform::new_inclusive(-self.translation_amplitude, self.translation_amplitude)
            .map_err(|e| Error::invalid(e.to_string()))?;
        let samples = (0..self.stations)
            .map(|k| {
                let dt = Vector3::from_fn(|_, _| tr.sample(&mut rng));
                let dr = Vector3::from_fn(|_, _| rot.sample(&mut rng));
                let pose = Pose::new(
                    base.translation() + dt,
                    base.rotation() * UnitQuaternion::from_scaled_axis(dr),
                );
                StampedPose::new(k as f64 * self.interval, pose)
            })
            .collect();
        Trajectory::new("camera", samples)
    }
}

/// Target pose seen from a camera looking straight at it from `standoff`:
/// target origin on the optical axis, target z facing the camera.
pub fn target_offset(standoff: f64) -> Pose {
    Pose::new(
        Vector3::new(0.0, 0.0, standoff),
        UnitQuaternion::from_axis_angle(&Vector3::x_axis(), PI),
    )
}

/// Everything needed to generate a scene deterministically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub seed: u64,
    pub rig: RigConfig,
    /// Controller tracking noise (seed field ignored; streams derive from `seed`).
    pub tracking_noise: NoiseModel,
    /// Camera→target observation noise (seed field ignored).
    pub observation_noise: NoiseModel,
    pub motion: SquareMotion,
    pub calibration: CalibrationMotion,
    pub world_target: Pose,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            seed: 1,
            rig: RigConfig::default(),
            tracking_noise: NoiseModel::default(),
            observation_noise: NoiseModel::default(),
            motion: SquareMotion::default(),
            calibration: CalibrationMotion::default(),
            world_target: Pose::new(
                Vector3::new(0.5, 2.2, 0.0),
                level_camera_orientation() * target_offset(1.0).rotation(),
            ),
        }
    }
}

/// Ground truth plus noisy measurements for one body set.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub camera_truth: Trajectory,
    pub controller1_truth: Trajectory,
    pub controller2_truth: Trajectory,
    pub controller1_noisy: Trajectory,
    pub controller2_noisy: Trajectory,
    pub observations: Vec<TargetObservation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimScene {
    pub config: SceneConfig,
    pub world_target: Pose,
    /// Square test trajectory.
    pub tracking: Recording,
    /// Hand-eye calibration stations.
    pub calibration: Recording,
}

mod streams {
    pub const CONTROLLER1: u64 = 1;
    pub const CONTROLLER2: u64 = 2;
    pub const OBSERVATIONS: u64 = 3;
    pub const CALIB_CONTROLLER1: u64 = 4;
    pub const CALIB_CONTROLLER2: u64 = 5;
    pub const CALIB_OBSERVATIONS: u64 = 6;
    pub const CALIB_STATIONS: u64 = 7;
}

fn record(camera_truth: Trajectory, cfg: &SceneConfig, ids: [u64; 3]) -> Result<Recording> {
    let (controller1_truth, controller2_truth) = propagate_rig(&camera_truth, &cfg.rig);
    let controller1_noisy = add_noise(
        &controller1_truth,
        &cfg.tracking_noise.with_seed(stream_seed(cfg.seed, ids[0])),
    )?;
    let controller2_noisy = add_noise(
        &controller2_truth,
        &cfg.tracking_noise.with_seed(stream_seed(cfg.seed, ids[1])),
    )?;
    let observations = observe_target(
        &camera_truth,
        &cfg.world_target,
        &cfg.observation_noise.with_seed(stream_seed(cfg.seed, ids[2])),
    )?;
    Ok(Recording {
        camera_truth,
        controller1_truth,
        controller2_truth,
        controller1_noisy,
        controller2_noisy,
        observations,
    })
}

pub fn generate_scene(cfg: &SceneConfig) -> Result<SimScene> {
    cfg.tracking_noise.validate()?;
    cfg.observation_noise.validate()?;
    let tracking = record(
        cfg.motion.generate()?,
        cfg,
        [streams::CONTROLLER1, streams::CONTROLLER2, streams::OBSERVATIONS],
    )?;
    let stations = cfg
        .calibration
        .generate(&cfg.world_target, stream_seed(cfg.seed, streams::CALIB_STATIONS))?;
    let calibration = record(
        stations,
        cfg,
        [
            streams::CALIB_CONTROLLER1,
            streams::CALIB_CONTROLLER2,
            streams::CALIB_OBSERVATIONS,
        ],
    )?;
    Ok(SimScene {
        config: *cfg,
        world_target: cfg.world_target,
        tracking,
        calibration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::{delta, log_so3};
    use approx::assert_relative_eq;

    #[test]
    fn default_rig_geometry() {
        let rig = RigConfig::default();
        assert_relative_eq!(rig.tf_wm().translation().norm(), 0.52, epsilon = 1e-12);
        assert_relative_eq!(rig.tf_wm().angle().to_degrees(), 179.47, epsilon = 1e-9);
        // camera 0.9 m below the controllers: along the camera's up axis
        let c1_in_cam = inverse(&rig.tf_wm1_cam);
        assert_relative_eq!(-c1_in_cam.translation().y, 0.9, epsilon = 1e-12);
        let tf_wm = compose(&rig.tf_wm1_cam, &inverse(&rig.tf_wm2_cam));
        assert!(delta(&tf_wm, &rig.tf_wm()).translation_error < 1e-12);
    }

    #[test]
    fn square_bounding_box_and_count() {
        let t = square_trajectory(1.0, 10.0, 100.0).unwrap();
        assert_eq!(t.len(), 1000);
        let ts: Vec<f64> = t.timestamps().collect();
        for w in ts.windows(2) {
            assert_relative_eq!(w[1] - w[0], 0.01, epsilon = 1e-12);
        }
        for axis in 0..2 {
            let (lo, hi) = t.poses().fold((f64::MAX, f64::MIN), |(lo, hi), p| {
                (lo.min(p.translation()[axis]), hi.max(p.translation()[axis]))
            });
            assert_relative_eq!(hi - lo, 1.0, epsilon = 1e-9);
        }
        assert!(square_trajectory(0.0, 10.0, 100.0).is_err());
        assert!(square_trajectory(1.0, 10.0, -1.0).is_err());
    }

    #[test]
    fn square_rotates_about_every_axis() {
        // integrate body angular velocity from finite differences
        let t = square_trajectory(1.0, 10.0, 100.0).unwrap();
        let mut total = Vector3::<f64>::zeros();
        for w in t.samples().windows(2) {
            let rel = w[0].pose.rotation().inverse() * w[1].pose.rotation();
            total += log_so3(&rel).abs();
        }
        for k in 0..3 {
            assert!(total[k].to_degrees() >= 30.0, "axis {k}: {}", total[k].to_degrees());
        }
    }

    #[test]
    fn propagate_rig_chain() {
        let cam = square_trajectory(1.0, 2.0, 50.0).unwrap();
        let (c1, c2) = propagate_rig(&cam, &RigConfig::identity());
        for (a, b) in c1.samples().iter().zip(cam.samples()) {
            assert!(delta(&a.pose, &b.pose).translation_error < 1e-15);
        }
        let rig = RigConfig::default();
        let (c1, c2b) = propagate_rig(&cam, &rig);
        for ((a, b), c) in c1.samples().iter().zip(c2b.samples()).zip(cam.samples()) {
            assert_relative_eq!(
                (a.pose.translation() - b.pose.translation()).norm(),
                0.52,
                epsilon = 1e-12
            );
            assert!(delta(&compose(&a.pose, &rig.tf_wm1_cam), &c.pose).translation_error < 1e-12);
            assert!(delta(&compose(&b.pose, &rig.tf_wm2_cam), &c.pose).rotation_error < 1e-10);
        }
        drop(c2);
    }

    #[test]
    fn zero_noise_is_identity_and_seed_is_deterministic() {
        let cam = square_trajectory(1.0, 2.0, 50.0).unwrap();
        assert_eq!(add_noise(&cam, &NoiseModel::zero()).unwrap(), cam);
        let m = NoiseModel::default().with_seed(7);
        assert_eq!(add_noise(&cam, &m).unwrap(), add_noise(&cam, &m).unwrap());
        assert_ne!(add_noise(&cam, &m).unwrap(), add_noise(&cam, &m.with_seed(8)).unwrap());
    }

    #[test]
    fn translation_noise_statistics() {
        let cam = square_trajectory(1.0, 100.0, 100.0).unwrap();
        let noisy = add_noise(&cam, &NoiseModel::default().with_seed(3)).unwrap();
        let n = cam.len() as f64;
        let mut mean = Vector3::<f64>::zeros();
        let mut sq = Vector3::<f64>::zeros();
        let mut rmean = Vector3::<f64>::zeros();
        for (a, b) in cam.samples().iter().zip(noisy.samples()) {
            let d = b.pose.translation() - a.pose.translation();
            mean += d / n;
            sq += d.component_mul(&d) / n;
            rmean += log_so3(&(a.pose.rotation().inverse() * b.pose.rotation())) / n;
        }
        for k in 0..3 {
            let sd = (sq[k] - mean[k] * mean[k]).sqrt();
            assert!((sd - 1e-3).abs() < 0.05e-3, "axis {k}: {sd}");
            assert!(mean[k].abs() < 0.1e-3, "bias {k}: {}", mean[k]);
            assert!(rmean[k].abs() < 0.1 * 0.1f64.to_radians(), "rot bias {k}");
        }
    }

    #[test]
    fn observations_close_the_chain() {
        let cam = square_trajectory(1.0, 2.0, 50.0).unwrap();
        let target = SceneConfig::default().world_target;
        let obs = observe_target(&cam, &target, &NoiseModel::zero()).unwrap();
        for (o, c) in obs.iter().zip(cam.samples()) {
            let d = delta(&compose(&c.pose, &o.tf_cam_target), &target);
            assert!(d.translation_error < 1e-12 && d.rotation_error < 1e-10);
        }
        // camera looking straight at the target from the standoff
        let camera = compose(&target, &inverse(&target_offset(0.8)));
        let cam1 = Trajectory::new("c", vec![StampedPose::new(0.0, camera)]).unwrap();
        let o = observe_target(&cam1, &target, &NoiseModel::zero()).unwrap();
        let d = delta(&o[0].tf_cam_target, &target_offset(0.8));
        assert!(d.translation_error < 1e-12 && d.rotation_error < 1e-10);
    }

    #[test]
    fn noisy_observations_average_to_target() {
        let cam = square_trajectory(1.0, 10.0, 100.0).unwrap();
        let target = SceneConfig::default().world_target;
        let obs = observe_target(&cam, &target, &NoiseModel::default().with_seed(5)).unwrap();
        let mean: Vector3<f64> = obs
            .iter()
            .zip(cam.samples())
            .map(|(o, c)| *compose(&c.pose, &o.tf_cam_target).translation())
            .sum::<Vector3<f64>>()
            / obs.len() as f64;
        assert!((mean - target.translation()).norm() < 0.2e-3);
    }

    #[test]
    fn noiseless_chain_closure() {
        let cfg = SceneConfig {
            tracking_noise: NoiseModel::zero(),
            observation_noise: NoiseModel::zero(),
            motion: SquareMotion {
                period: 5.0,
                ..SquareMotion::default()
            },
            calibration: CalibrationMotion {
                stations: 20,
                ..CalibrationMotion::default()
            },
            ..SceneConfig::default()
        };
        let scene = generate_scene(&cfg).unwrap();
        let r = &scene.tracking;
        for i in 0..r.camera_truth.len() {
            // world -> controller -> camera -> target -> world
            let loop_pose = compose(
                &compose(
                    &compose(&r.controller1_noisy.samples()[i].pose, &cfg.rig.tf_wm1_cam),
                    &r.observations[i].tf_cam_target,
                ),
                &inverse(&scene.world_target),
            );
            let d = delta(&loop_pose, &Pose::identity());
            assert!(d.translation_error < 1e-9 && d.rotation_error < 1e-9);
        }
    }

    #[test]
    fn scene_replays_from_seed() {
        let cfg = SceneConfig {
            motion: SquareMotion {
                period: 5.0,
                ..SquareMotion::default()
            },
            calibration: CalibrationMotion {
                stations: 30,
                ..CalibrationMotion::default()
            },
            ..SceneConfig::default()
        };
        assert_eq!(generate_scene(&cfg).unwrap(), generate_scene(&cfg).unwrap());
        let other = SceneConfig { seed: 2, ..cfg };
        assert_ne!(generate_scene(&cfg).unwrap(), generate_scene(&other).unwrap());
    }
}
