//! Rigid-body transforms, pose distances and trajectory interpolation.
//!
//! A [`Pose`] maps points from its child frame into its parent frame:
//! `p_parent = R * p_child + t`. Composition follows the usual chain rule,
//! so `compose(world_T_a, a_T_b) = world_T_b`.

use nalgebra::{Matrix3, Matrix4, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rigid transform: unit quaternion (canonical `w >= 0`) plus translation in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    translation: [f64; 3],
    rotation_xyzw: [f64; 4],
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        let q = p.rotation.quaternion();
        PoseRepr {
            translation: [p.translation.x, p.translation.y, p.translation.z],
            rotation_xyzw: [q.i, q.j, q.k, q.w],
        }
    }
}

impl TryFrom<PoseRepr> for Pose {
    type Error = Error;

    fn try_from(r: PoseRepr) -> Result<Self> {
        let [x, y, z, w] = r.rotation_xyzw;
        Pose::from_parts(
            Vector3::new(r.translation[0], r.translation[1], r.translation[2]),
            Quaternion::new(w, x, y, z),
        )
    }
}

/// Renormalizes (only when off by more than a few ulps) and flips to `w >= 0`.
pub(crate) fn canonical(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let n2 = q.quaternion().norm_squared();
    let q = if (n2 - 1.0).abs() > 4.0 * f64::EPSILON {
        UnitQuaternion::new_normalize(*q.quaternion())
    } else {
        q
    };
    if q.w < 0.0 {
        UnitQuaternion::new_unchecked(-*q.quaternion())
    } else {
        q
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(translation: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        Pose {
            rotation: canonical(rotation),
            translation,
        }
    }

    /// Builds a pose from a raw (possibly unnormalized) quaternion.
    pub fn from_parts(translation: Vector3<f64>, q: Quaternion<f64>) -> Result<Self> {
        let n = q.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::invalid(format!("quaternion norm {n} cannot be normalized")));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("translation has non-finite components"));
        }
        Ok(Pose::new(translation, UnitQuaternion::new_unchecked(q)))
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Pose::new(translation, UnitQuaternion::identity())
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Pose::new(Vector3::zeros(), rotation)
    }

    /// Rotation from a rotation vector (axis * angle, radians).
    pub fn from_scaled_axis(translation: Vector3<f64>, axis_angle: Vector3<f64>) -> Self {
        Pose::new(translation, UnitQuaternion::from_scaled_axis(axis_angle))
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse_transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse() * (p - self.translation)
    }

    pub fn to_homogeneous(self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        compose(self, other)
    }

    pub fn inverse(&self) -> Pose {
        inverse(self)
    }

    /// Geodesic rotation angle of this pose in radians, in `[0, π]`.
    pub fn angle(&self) -> f64 {
        rotation_angle(&self.rotation)
    }
}

pub fn compose(a: &Pose, b: &Pose) -> Pose {
    Pose {
        rotation: canonical(a.rotation * b.rotation),
        translation: a.rotation * b.translation + a.translation,
    }
}

pub fn inverse(p: &Pose) -> Pose {
    let r = p.rotation.inverse();
    Pose {
        rotation: canonical(r),
        translation: -(r * p.translation),
    }
}

/// Angle of a unit quaternion in `[0, π]`, accurate near both ends.
pub fn rotation_angle(q: &UnitQuaternion<f64>) -> f64 {
    let v = q.imag().norm();
    2.0 * v.atan2(q.w.abs())
}

/// Translation and rotation distance between two poses.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseDelta {
    /// Meters.
    pub translation_error: f64,
    /// Degrees, geodesic, in `[0, 180]`.
    pub rotation_error: f64,
}

pub fn delta(a: &Pose, b: &Pose) -> PoseDelta {
    // conj(qa) ⊗ qb written out so that equal rotations give exactly zero
    let (qa, qb) = (a.rotation.quaternion(), b.rotation.quaternion());
    let (va, vb) = (qa.imag(), qb.imag());
    let w = qa.w * qb.w + va.dot(&vb);
    let v = vb * qa.w - va * qb.w - va.cross(&vb);
    PoseDelta {
        translation_error: (b.translation - a.translation).norm(),
        rotation_error: (2.0 * v.norm().atan2(w.abs())).to_degrees().min(180.0),
    }
}

/// Pose with a timestamp in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StampedPose {
    pub timestamp: f64,
    pub pose: Pose,
}

impl StampedPose {
    pub fn new(timestamp: f64, pose: Pose) -> Self {
        StampedPose { timestamp, pose }
    }
}

/// Time-ordered poses of one body. Timestamps are finite, non-negative and
/// strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    body_id: String,
    samples: Vec<StampedPose>,
}

impl Trajectory {
    pub fn new(body_id: impl Into<String>, samples: Vec<StampedPose>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if !s.timestamp.is_finite() || s.timestamp < 0.0 {
                return Err(Error::invalid(format!(
                    "sample {i}: timestamp {} must be finite and non-negative",
                    s.timestamp
                )));
            }
            if i > 0 && s.timestamp <= samples[i - 1].timestamp {
                return Err(Error::invalid(format!(
                    "sample {i}: timestamp {} not strictly after {}",
                    s.timestamp,
                    samples[i - 1].timestamp
                )));
            }
        }
        Ok(Trajectory {
            body_id: body_id.into(),
            samples,
        })
    }

    pub fn body_id(&self) -> &str {
        &self.body_id
    }

    pub fn samples(&self) -> &[StampedPose] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.timestamp)
    }

    pub fn poses(&self) -> impl Iterator<Item = &Pose> + '_ {
        self.samples.iter().map(|s| &s.pose)
    }

    /// `[first, last]` timestamps, or `None` when empty.
    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.samples.first()?.timestamp, self.samples.last()?.timestamp))
    }

    /// Applies `f` to every pose, keeping timestamps.
    pub fn map_poses(&self, body_id: impl Into<String>, mut f: impl FnMut(&Pose) -> Pose) -> Trajectory {
        Trajectory {
            body_id: body_id.into(),
            samples: self
                .samples
                .iter()
                .map(|s| StampedPose::new(s.timestamp, f(&s.pose)))
                .collect(),
        }
    }

    pub fn interpolate(&self, t: f64) -> Result<Pose> {
        interpolate(self, t)
    }
}

/// Spherical interpolation on the shortest arc, `s` in `[0, 1]`.
pub fn slerp(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>, s: f64) -> UnitQuaternion<f64> {
    let mut rel = a.inverse() * b;
    if rel.w < 0.0 {
        rel = UnitQuaternion::new_unchecked(-*rel.quaternion());
    }
    canonical(a * UnitQuaternion::from_scaled_axis(rel.scaled_axis() * s))
}

pub fn interpolate(traj: &Trajectory, t: f64) -> Result<Pose> {
    let (start, end) = traj
        .span()
        .ok_or_else(|| Error::invalid("cannot interpolate an empty trajectory"))?;
    if !(t >= start && t <= end) {
        return Err(Error::OutOfRange { t, start, end });
    }
    let samples = traj.samples();
    // First sample with timestamp >= t.
    let idx = samples.partition_point(|s| s.timestamp < t);
    let hi = &samples[idx];
    if hi.timestamp == t {
        return Ok(hi.pose);
    }
    let lo = &samples[idx - 1];
    let s = (t - lo.timestamp) / (hi.timestamp - lo.timestamp);
    let translation = lo.pose.translation + (hi.pose.translation - lo.pose.translation) * s;
    Ok(Pose {
        rotation: slerp(&lo.pose.rotation, &hi.pose.rotation, s),
        translation,
    })
}

/// Mean pose: arithmetic mean of translations and the eigenvector quaternion
/// average (dominant eigenvector of `Σ q qᵀ`) of rotations.
pub fn mean_pose(poses: &[Pose]) -> Result<Pose> {
    if poses.is_empty() {
        return Err(Error::invalid("mean of an empty pose list"));
    }
    let mut translation = Vector3::zeros();
    let mut acc = Matrix4::<f64>::zeros();
    for (k, p) in poses.iter().enumerate() {
        translation += (p.translation - translation) / (k + 1) as f64;
        let q = p.rotation.quaternion().coords;
        acc += q * q.transpose();
    }
    let eig = acc.symmetric_eigen();
    let (imax, _) =
        eig.eigenvalues.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |best, (i, &v)| if v > best.1 { (i, v) } else { best },
        );
    let v = eig.eigenvectors.column(imax);
    // coords layout is (i, j, k, w)
    Pose::from_parts(translation, Quaternion::new(v[3], v[0], v[1], v[2]))
}

// --- so(3) helpers -------------------------------------------------------

pub(crate) fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation vector of `q` (angle in `[0, π]`).
pub(crate) fn log_so3(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let q = canonical(*q);
    let v = q.imag();
    let n = v.norm();
    if n < 1e-300 {
        return v * 2.0;
    }
    let angle = 2.0 * n.atan2(q.w);
    v * (angle / n)
}

/// Inverse of the right Jacobian of SO(3).
pub(crate) fn right_jacobian_inv(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = skew(phi);
    if theta < 1e-6 {
        return Matrix3::identity() + k * 0.5 + k * k / 12.0;
    }
    let coef = 1.0 / (theta * theta) - (1.0 + theta.cos()) / (2.0 * theta * theta.sin());
    Matrix3::identity() + k * 0.5 + k * k * coef
}
