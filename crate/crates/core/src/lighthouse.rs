//! Sweep-angle model of an outside-in lighthouse tracker.
//!
//! A lighthouse is treated as an ideal angular camera looking along its +z
//! axis: a sensor at `(x, y, z)` in the lighthouse frame is seen at
//! `h = atan2(x, z)`, `v = atan2(y, z)`. Rotor timing maps to angle linearly,
//! with the sweep plane crossing the boresight half a rotor period after the
//! sync flash.

use std::f64::consts::PI;

use nalgebra::{Matrix6, SMatrix, UnitQuaternion, Vector3, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::SweepRecord;
use crate::se3::{skew, Pose, StampedPose, Trajectory};

/// Rotor phase (radians after the sync flash) at which the sweep crosses the boresight.
pub const SWEEP_CENTER_PHASE: f64 = PI;

const MIN_ANGLE_PAIRS: usize = 6;
const MAX_ITERATIONS: usize = 50;
const STEP_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LighthouseConfig {
    /// Lighthouse pose in the world; boresight is the local +z axis.
    pub pose: Pose,
    /// Rotations per second.
    pub rotor_rate: f64,
    pub fov_horizontal: f64,
    pub fov_vertical: f64,
}

impl LighthouseConfig {
    /// Lighthouse at `position` aimed at `look_at`, world z up.
    pub fn aimed(position: Vector3<f64>, look_at: Vector3<f64>, rotor_rate: f64) -> Result<Self> {
        let dir = look_at - position;
        if dir.norm() < 1e-9 {
            return Err(Error::Degenerate("lighthouse aimed at its own origin".into()));
        }
        let cfg = LighthouseConfig {
            pose: Pose::new(position, UnitQuaternion::face_towards(&dir, &Vector3::z())),
            rotor_rate,
            fov_horizontal: 150.0,
            fov_vertical: 110.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(50.0..=55.0).contains(&self.rotor_rate) {
            return Err(Error::invalid(format!(
                "rotor rate {} rps outside [50, 55]",
                self.rotor_rate
            )));
        }
        if !(self.fov_horizontal > 0.0
            && self.fov_horizontal < 180.0
            && self.fov_vertical > 0.0
            && self.fov_vertical < 180.0)
        {
            return Err(Error::invalid("field of view must lie in (0, 180) degrees"));
        }
        Ok(())
    }

    fn in_fov(&self, h: f64, v: f64) -> bool {
        h.abs() <= (self.fov_horizontal / 2.0).to_radians() && v.abs() <= (self.fov_vertical / 2.0).to_radians()
    }
}

/// Two lighthouses 2.3 m high and 4.2 m apart, both aimed at `center`.
pub fn default_lighthouses(center: Vector3<f64>) -> Result<Vec<LighthouseConfig>> {
    let height = Vector3::new(0.0, 0.0, 2.3 - center.z);
    Ok(vec![
        LighthouseConfig::aimed(center + Vector3::new(-2.1, -1.8, 0.0) + height, center, 50.0)?,
        LighthouseConfig::aimed(center + Vector3::new(2.1, -1.8, 0.0) + height, center, 52.0)?,
    ])
}

/// Photodiode positions in the body frame (meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    pub points: Vec<Vector3<f64>>,
}

impl SensorLayout {
    /// 24 sensors on a controller-sized crown (non-coplanar).
    pub fn controller() -> Self {
        let points = (0..24)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / 24.0;
                let r = 0.04 + 0.01 * (i % 3) as f64;
                Vector3::new(r * a.cos(), r * a.sin(), 0.02 * ((i % 4) as f64 - 1.5))
            })
            .collect();
        SensorLayout { points }
    }

    /// True when the points span 3D (at least four of them not coplanar).
    pub fn is_non_coplanar(&self) -> bool {
        if self.points.len() < 4 {
            return false;
        }
        let c = self.points.iter().sum::<Vector3<f64>>() / self.points.len() as f64;
        let cov = self
            .points
            .iter()
            .fold(nalgebra::Matrix3::zeros(), |acc, p| acc + (p - c) * (p - c).transpose());
        let ev = cov.symmetric_eigenvalues();
        let (min, max) = (ev.min(), ev.max());
        max > 0.0 && min / max > 1e-8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepMeasurement {
    pub sensor_index: usize,
    /// Radians.
    pub horizontal_angle: f64,
    /// Radians.
    pub vertical_angle: f64,
}

/// Converts the delay between sync flash and sweep hit into a bearing angle.
pub fn timing_to_angle(dt: f64, rotor_rate: f64) -> Result<f64> {
    if !(rotor_rate > 0.0) {
        return Err(Error::invalid(format!("rotor rate {rotor_rate} must be positive")));
    }
    let period = 1.0 / rotor_rate;
    if !(0.0..period).contains(&dt) {
        return Err(Error::OutOfRange {
            t: dt,
            start: 0.0,
            end: period,
        });
    }
    Ok(2.0 * PI * rotor_rate * dt - SWEEP_CENTER_PHASE)
}

/// Inverse of [`timing_to_angle`]; `angle` in `[-π, π)`.
pub fn angle_to_timing(angle: f64, rotor_rate: f64) -> Result<f64> {
    if !(rotor_rate > 0.0) {
        return Err(Error::invalid(format!("rotor rate {rotor_rate} must be positive")));
    }
    if !(-PI..PI).contains(&angle) {
        return Err(Error::OutOfRange {
            t: angle,
            start: -PI,
            end: PI,
        });
    }
    Ok((angle + SWEEP_CENTER_PHASE) / (2.0 * PI * rotor_rate))
}

fn bearing(p: &Vector3<f64>) -> (f64, f64) {
    (p.x.atan2(p.z), p.y.atan2(p.z))
}

/// Bearings of every sensor visible to `lh`. Sensors behind the lighthouse
/// or outside its field of view are omitted.
pub fn project_sensors(body: &Pose, layout: &SensorLayout, lh: &LighthouseConfig) -> Result<Vec<SweepMeasurement>> {
    let mut out = Vec::with_capacity(layout.points.len());
    for (i, s) in layout.points.iter().enumerate() {
        let p = lh.pose.inverse_transform_point(&body.transform_point(s));
        if p.norm() < 1e-9 {
            return Err(Error::Degenerate(format!("sensor {i} at the lighthouse origin")));
        }
        if p.z <= 0.0 {
            continue;
        }
        let (h, v) = bearing(&p);
        if lh.in_fov(h, v) {
            out.push(SweepMeasurement {
                sensor_index: i,
                horizontal_angle: h,
                vertical_angle: v,
            });
        }
    }
    Ok(out)
}

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

type Jac = SMatrix<f64, 2, 6>;

/// Residuals (measured − predicted) and their Jacobian w.r.t. `[δt, δθ]`
/// with `δt` in world and `δθ` right-multiplied on the body rotation.
fn linearize(
    body: &Pose,
    layout: &SensorLayout,
    lh: &LighthouseConfig,
    m: &SweepMeasurement,
) -> Result<(nalgebra::Vector2<f64>, Jac)> {
    let s = layout
        .points
        .get(m.sensor_index)
        .ok_or_else(|| Error::invalid(format!("sensor index {} not in layout", m.sensor_index)))?;
    let r_l_t = lh.pose.rotation_matrix().transpose();
    let p = lh.pose.inverse_transform_point(&body.transform_point(s));
    let (h, v) = bearing(&p);
    let dh = nalgebra::RowVector3::new(p.z, 0.0, -p.x) / (p.x * p.x + p.z * p.z);
    let dv = nalgebra::RowVector3::new(0.0, p.z, -p.y) / (p.y * p.y + p.z * p.z);
    let dp_dt = r_l_t;
    let dp_dr = -r_l_t * body.rotation_matrix() * skew(s);
    let mut j = Jac::zeros();
    j.fixed_view_mut::<1, 3>(0, 0).copy_from(&(dh * dp_dt));
    j.fixed_view_mut::<1, 3>(0, 3).copy_from(&(dh * dp_dr));
    j.fixed_view_mut::<1, 3>(1, 0).copy_from(&(dv * dp_dt));
    j.fixed_view_mut::<1, 3>(1, 3).copy_from(&(dv * dp_dr));
    let r = nalgebra::Vector2::new(wrap(m.horizontal_angle - h), wrap(m.vertical_angle - v));
    Ok((r, j))
}

fn residual_cost(
    body: &Pose,
    layout: &SensorLayout,
    lighthouses: &[LighthouseConfig],
    measurements: &[Vec<SweepMeasurement>],
) -> Result<f64> {
    let mut c = 0.0;
    for (lh, ms) in lighthouses.iter().zip(measurements) {
        for m in ms {
            c += linearize(body, layout, lh, m)?.0.norm_squared();
        }
    }
    Ok(c)
}

/// Body pose from bearing measurements by damped Gauss-Newton.
///
/// `measurements[k]` holds the bearings seen by `lighthouses[k]`.
pub fn solve_pose(
    measurements: &[Vec<SweepMeasurement>],
    layout: &SensorLayout,
    lighthouses: &[LighthouseConfig],
    initial: &Pose,
) -> Result<Pose> {
    if measurements.len() != lighthouses.len() {
        return Err(Error::invalid(format!(
            "{} measurement lists for {} lighthouses",
            measurements.len(),
            lighthouses.len()
        )));
    }
    let pairs: usize = measurements.iter().map(Vec::len).sum();
    if pairs < MIN_ANGLE_PAIRS {
        return Err(Error::Underdetermined {
            have: pairs,
            need: MIN_ANGLE_PAIRS,
        });
    }

    let mut pose = *initial;
    let mut cost = residual_cost(&pose, layout, lighthouses, measurements)?;
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITERATIONS {
        let mut h = Matrix6::<f64>::zeros();
        let mut g = Vector6::<f64>::zeros();
        for (lh, ms) in lighthouses.iter().zip(measurements) {
            for m in ms {
                let (r, j) = linearize(&pose, layout, lh, m)?;
                h += j.transpose() * j;
                g += j.transpose() * r;
            }
        }
        let ev = h.symmetric_eigenvalues();
        let cond = ev.max() / ev.min().max(f64::MIN_POSITIVE);
        if !(cond < 1e12) {
            return Err(Error::IllConditioned(cond));
        }

        loop {
            let mut damped = h;
            for k in 0..6 {
                damped[(k, k)] += lambda;
            }
            let step = damped
                .cholesky()
                .ok_or_else(|| Error::Numerical("lighthouse normal equations not positive definite".into()))?
                .solve(&g);
            let candidate = Pose::new(
                pose.translation() + step.fixed_rows::<3>(0),
                pose.rotation() * UnitQuaternion::from_scaled_axis(step.fixed_rows::<3>(3).into_owned()),
            );
            let new_cost = residual_cost(&candidate, layout, lighthouses, measurements)?;
            if new_cost <= cost {
                pose = candidate;
                cost = new_cost;
                lambda = (lambda * 0.1).max(1e-12);
                if step.norm() < STEP_TOLERANCE {
                    return Ok(pose);
                }
                break;
            }
            if step.norm() < STEP_TOLERANCE {
                return Ok(pose);
            }
            lambda *= 10.0;
            if lambda > 1e10 {
                return Err(Error::NonConvergence {
                    iterations: MAX_ITERATIONS,
                    cost,
                });
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
        cost,
    })
}

/// Result of tracking a trajectory through simulated sweeps.
#[derive(Debug, Clone)]
pub struct LighthouseTrack {
    pub trajectory: Trajectory,
    pub sweeps: Vec<SweepRecord>,
}

/// Re-estimates every pose of `truth` from noisy bearings (σ in radians),
/// seeding each frame with the previous solution.
pub fn track_with_lighthouses(
    truth: &Trajectory,
    layout: &SensorLayout,
    lighthouses: &[LighthouseConfig],
    angle_sigma: f64,
    seed: u64,
) -> Result<LighthouseTrack> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = (angle_sigma > 0.0)
        .then(|| Normal::new(0.0, angle_sigma))
        .transpose()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let mut samples = Vec::with_capacity(truth.len());
    let mut sweeps = Vec::new();
    let mut guess = match truth.samples().first() {
        Some(s) => s.pose,
        None => return Err(Error::invalid("empty trajectory")),
    };
    for s in truth.samples() {
        let mut per_lh = Vec::with_capacity(lighthouses.len());
        for (id, lh) in lighthouses.iter().enumerate() {
            let mut ms = project_sensors(&s.pose, layout, lh)?;
            if let Some(n) = &noise {
                for m in &mut ms {
                    m.horizontal_angle += n.sample(&mut rng);
                    m.vertical_angle += n.sample(&mut rng);
                }
            }
            sweeps.extend(ms.iter().map(|m| SweepRecord {
                timestamp: s.timestamp,
                lighthouse_id: id,
                measurement: *m,
            }));
            per_lh.push(ms);
        }
        guess = solve_pose(&per_lh, layout, lighthouses, &guess)?;
        samples.push(StampedPose::new(s.timestamp, guess));
    }
    Ok(LighthouseTrack {
        trajectory: Trajectory::new(truth.body_id(), samples)?,
        sweeps,
    })
}
