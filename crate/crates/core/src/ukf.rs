//! 15-state unscented Kalman filter fusing camera poses propagated from the
//! two controllers.
//!
//! State `[p, q_im, v, av, a]`: position, imaginary quaternion part (real part
//! recovered on the `w >= 0` branch), velocity, angular velocity (body frame,
//! right-multiplied) and linear acceleration. Measurements are full camera
//! poses `(p, q_im)` with a 6×6 covariance over `(δp, δθ)` where `δθ` is a
//! right perturbation in radians.

use nalgebra::{Matrix3, Matrix6, Quaternion, SMatrix, SVector, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::{compose, interpolate, skew, Pose, StampedPose, Trajectory};

pub const STATE_DIM: usize = 15;
pub const SIGMA_COUNT: usize = 2 * STATE_DIM + 1;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type UkfCovariance = SMatrix<f64, STATE_DIM, STATE_DIM>;
type CrossCov = SMatrix<f64, STATE_DIM, 6>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UkfState {
    pub p: Vector3<f64>,
    pub q_im: Vector3<f64>,
    pub v: Vector3<f64>,
    pub av: Vector3<f64>,
    pub a: Vector3<f64>,
}

fn quat_from_im(q_im: &Vector3<f64>) -> UnitQuaternion<f64> {
    let n2 = q_im.norm_squared();
    if n2 >= 1.0 {
        let u = q_im / n2.sqrt();
        return UnitQuaternion::new_unchecked(Quaternion::new(0.0, u.x, u.y, u.z));
    }
    UnitQuaternion::new_unchecked(Quaternion::new((1.0 - n2).sqrt(), q_im.x, q_im.y, q_im.z))
}

/// Imaginary part of `q` taken on the hemisphere of `reference`.
fn aligned_im(q: &UnitQuaternion<f64>, reference: &UnitQuaternion<f64>) -> Vector3<f64> {
    if q.coords.dot(&reference.coords) < 0.0 {
        -q.imag()
    } else {
        q.imag()
    }
}

/// `∂q_im/∂δθ` for a right perturbation `q ⊗ exp(δθ)`.
fn im_jacobian(q: &UnitQuaternion<f64>) -> Matrix3<f64> {
    (Matrix3::identity() * q.w + skew(&q.imag())) * 0.5
}

impl UkfState {
    pub fn from_pose(pose: &Pose) -> Self {
        UkfState {
            p: *pose.translation(),
            q_im: pose.rotation().imag(),
            v: Vector3::zeros(),
            av: Vector3::zeros(),
            a: Vector3::zeros(),
        }
    }

    pub fn to_vector(&self) -> StateVector {
        let mut x = StateVector::zeros();
        for (k, part) in [self.p, self.q_im, self.v, self.av, self.a].iter().enumerate() {
            x.fixed_rows_mut::<3>(3 * k).copy_from(part);
        }
        x
    }

    pub fn from_vector(x: &StateVector) -> Self {
        let part = |k: usize| -> Vector3<f64> { x.fixed_rows::<3>(3 * k).into_owned() };
        UkfState {
            p: part(0),
            q_im: part(1),
            v: part(2),
            av: part(3),
            a: part(4),
        }
    }

    pub fn orientation(&self) -> UnitQuaternion<f64> {
        quat_from_im(&self.q_im)
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.p, self.orientation())
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseMeasurement {
    pub timestamp: f64,
    pub pose: Pose,
    /// Covariance of `(δp [m], δθ [rad])`, `δθ` a right perturbation.
    pub noise: Matrix6<f64>,
    pub source_id: u8,
}

impl PoseMeasurement {
    pub fn isotropic(
        timestamp: f64,
        pose: Pose,
        sigma_translation: f64,
        sigma_rotation_rad: f64,
        source_id: u8,
    ) -> Self {
        let mut noise = Matrix6::zeros();
        noise
            .fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(Matrix3::identity() * sigma_translation.powi(2)));
        noise
            .fixed_view_mut::<3, 3>(3, 3)
            .copy_from(&(Matrix3::identity() * sigma_rotation_rad.powi(2)));
        PoseMeasurement {
            timestamp,
            pose,
            noise,
            source_id,
        }
    }

    /// Camera pose `H·X` from a controller pose `H` and the hand-eye transform
    /// `X`, with the controller's per-axis noise carried through the lever arm.
    pub fn from_controller(
        timestamp: f64,
        tf_world_wm: &Pose,
        tf_wm_cam: &Pose,
        sigma_translation: f64,
        sigma_rotation_rad: f64,
        source_id: u8,
    ) -> Self {
        let r_h = tf_world_wm.rotation_matrix();
        let mut j = Matrix6::<f64>::zeros();
        j.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
        j.fixed_view_mut::<3, 3>(0, 3)
            .copy_from(&(-r_h * skew(tf_wm_cam.translation())));
        j.fixed_view_mut::<3, 3>(3, 3)
            .copy_from(&tf_wm_cam.rotation_matrix().transpose());
        let base = Self::isotropic(
            timestamp,
            compose(tf_world_wm, tf_wm_cam),
            sigma_translation,
            sigma_rotation_rad,
            source_id,
        );
        let noise = j * base.noise * j.transpose();
        PoseMeasurement {
            noise: (noise + noise.transpose()) * 0.5,
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.timestamp.is_finite() || self.noise.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "measurement at t={} is not finite",
                self.timestamp
            )));
        }
        if (self.noise - self.noise.transpose()).amax() > 1e-10 * self.noise.amax().max(1e-300)
            || self.noise.cholesky().is_none()
        {
            return Err(Error::invalid(format!(
                "measurement covariance at t={} is not symmetric positive definite",
                self.timestamp
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UkfParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    /// White-jerk spectral density per axis (m²/s⁵).
    pub jerk_psd: f64,
    /// White angular-acceleration spectral density per axis (rad²/s³).
    pub angular_accel_psd: f64,
    pub initial_sigma_velocity: f64,
    pub initial_sigma_angular_velocity: f64,
    pub initial_sigma_acceleration: f64,
    /// Per-axis controller noise assumed when building measurements (m).
    pub measurement_sigma_translation: f64,
    /// Per-axis controller noise assumed when building measurements (degrees).
    pub measurement_sigma_rotation_deg: f64,
    /// Added to image timestamps before querying the fused trajectory (s).
    pub time_offset: f64,
}

impl Default for UkfParams {
    fn default() -> Self {
        UkfParams {
            alpha: 0.3,
            beta: 2.0,
            kappa: 0.0,
            jerk_psd: 1e7,
            angular_accel_psd: 1e4,
            initial_sigma_velocity: 0.5,
            initial_sigma_angular_velocity: 1.0,
            initial_sigma_acceleration: 1.0,
            measurement_sigma_translation: 1.12e-3,
            measurement_sigma_rotation_deg: 0.12,
            time_offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaWeights {
    pub mean: [f64; SIGMA_COUNT],
    pub covariance: [f64; SIGMA_COUNT],
    /// `n + λ`
    pub spread: f64,
}

impl UkfParams {
    pub fn lambda(&self) -> f64 {
        let n = STATE_DIM as f64;
        self.alpha * self.alpha * (n + self.kappa) - n
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.alpha,
            self.beta,
            self.kappa,
            self.jerk_psd,
            self.angular_accel_psd,
            self.initial_sigma_velocity,
            self.initial_sigma_angular_velocity,
            self.initial_sigma_acceleration,
            self.measurement_sigma_translation,
            self.measurement_sigma_rotation_deg,
            self.time_offset,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("ukf parameters must be finite".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("ukf.alpha = {} must lie in (0, 1]", self.alpha)));
        }
        if self.beta < 0.0 {
            return Err(Error::Config(format!("ukf.beta = {} must be >= 0", self.beta)));
        }
        if self.lambda() <= -(STATE_DIM as f64) {
            return Err(Error::Config(format!(
                "ukf scaling lambda = {} must exceed -15",
                self.lambda()
            )));
        }
        if self.jerk_psd < 0.0 || self.angular_accel_psd < 0.0 {
            return Err(Error::Config("ukf process noise densities must be >= 0".into()));
        }
        let sigmas = [
            self.initial_sigma_velocity,
            self.initial_sigma_angular_velocity,
            self.initial_sigma_acceleration,
            self.measurement_sigma_translation,
            self.measurement_sigma_rotation_deg,
        ];
        if sigmas.iter().any(|s| *s <= 0.0) {
            return Err(Error::Config("ukf initial and measurement sigmas must be > 0".into()));
        }
        Ok(())
    }

    pub fn weights(&self) -> SigmaWeights {
        let n = STATE_DIM as f64;
        let lambda = self.lambda();
        let spread = n + lambda;
        let mut mean = [0.5 / spread; SIGMA_COUNT];
        let mut covariance = mean;
        mean[0] = lambda / spread;
        covariance[0] = mean[0] + 1.0 - self.alpha * self.alpha + self.beta;
        SigmaWeights {
            mean,
            covariance,
            spread,
        }
    }

    pub fn initial_covariance(&self, meas: &PoseMeasurement) -> UkfCovariance {
        let mut p = UkfCovariance::zeros();
        p.fixed_view_mut::<6, 6>(0, 0)
            .copy_from(&measurement_covariance(meas, meas.pose.rotation()));
        for (k, s) in [
            self.initial_sigma_velocity,
            self.initial_sigma_angular_velocity,
            self.initial_sigma_acceleration,
        ]
        .iter()
        .enumerate()
        {
            p.fixed_view_mut::<3, 3>(6 + 3 * k, 6 + 3 * k)
                .copy_from(&(Matrix3::identity() * (s * s)));
        }
        p
    }
}

fn symmetrize(m: &UkfCovariance) -> UkfCovariance {
    (m + m.transpose()) * 0.5
}

/// Lower factor `L` with `L Lᵀ = m`; eigen fallback for singular PSD input.
fn sqrt_psd(m: &UkfCovariance, what: &str) -> Result<UkfCovariance> {
    let sym = symmetrize(m);
    if let Some(c) = sym.cholesky() {
        return Ok(c.l());
    }
    let eig = sym.symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1e-300);
    if eig.eigenvalues.iter().any(|l| !l.is_finite() || *l < -1e-9 * scale) {
        return Err(Error::Numerical(format!(
            "Cholesky and eigen factorization of the {what} covariance failed (min eigenvalue {:.3e})",
            eig.eigenvalues.min()
        )));
    }
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(eig.eigenvectors * UkfCovariance::from_diagonal(&d))
}

fn sigma_points(x: &StateVector, cov: &UkfCovariance, w: &SigmaWeights, what: &str) -> Result<Vec<StateVector>> {
    let l = sqrt_psd(&(cov * w.spread), what)?;
    let mut pts = Vec::with_capacity(SIGMA_COUNT);
    pts.push(*x);
    for i in 0..STATE_DIM {
        pts.push(x + l.column(i));
    }
    for i in 0..STATE_DIM {
        pts.push(x - l.column(i));
    }
    Ok(pts)
}

fn motion_model(x: &StateVector, dt: f64) -> (StateVector, UnitQuaternion<f64>) {
    let s = UkfState::from_vector(x);
    let q = quat_from_im(&s.q_im) * UnitQuaternion::from_scaled_axis(s.av * dt);
    let out = UkfState {
        p: s.p + s.v * dt + s.a * (0.5 * dt * dt),
        q_im: q.imag(),
        v: s.v + s.a * dt,
        av: s.av,
        a: s.a,
    };
    (out.to_vector(), q)
}

fn process_noise(dt: f64, q: &UnitQuaternion<f64>, params: &UkfParams) -> UkfCovariance {
    let mut out = UkfCovariance::zeros();
    let i3 = Matrix3::identity();
    let (dt2, dt3) = (dt * dt, dt * dt * dt);
    // constant acceleration driven by white jerk on (p, v, a)
    let qj = params.jerk_psd;
    let blocks = [
        (0, 0, dt3 * dt2 / 20.0),
        (0, 6, dt2 * dt2 / 8.0),
        (0, 12, dt3 / 6.0),
        (6, 6, dt3 / 3.0),
        (6, 12, dt2 / 2.0),
        (12, 12, dt),
    ];
    for (r, c, k) in blocks {
        out.fixed_view_mut::<3, 3>(r, c).copy_from(&(i3 * qj * k));
        out.fixed_view_mut::<3, 3>(c, r).copy_from(&(i3 * qj * k));
    }
    // constant angular velocity driven by white angular acceleration on (θ, av)
    let qa = params.angular_accel_psd;
    let m = im_jacobian(q);
    out.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(m * m.transpose() * (qa * dt3 / 3.0)));
    let cross = m * (qa * dt2 / 2.0);
    out.fixed_view_mut::<3, 3>(3, 9).copy_from(&cross);
    out.fixed_view_mut::<3, 3>(9, 3).copy_from(&cross.transpose());
    out.fixed_view_mut::<3, 3>(9, 9).copy_from(&(i3 * qa * dt));
    out
}

fn clamp_state(x: &mut StateVector) {
    let q: Vector3<f64> = x.fixed_rows::<3>(3).into_owned();
    let n = q.norm();
    if n > 1.0 {
        x.fixed_rows_mut::<3>(3).copy_from(&(q / n));
    }
}

fn check_finite(x: &StateVector, cov: &UkfCovariance, stage: &str) -> Result<()> {
    if x.iter().chain(cov.iter()).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("non-finite filter state after {stage}")))
    }
}

pub fn predict(
    state: &UkfState,
    cov: &UkfCovariance,
    dt: f64,
    params: &UkfParams,
) -> Result<(UkfState, UkfCovariance)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("prediction step dt = {dt} must be positive")));
    }
    let w = params.weights();
    let chi = sigma_points(&state.to_vector(), cov, &w, "prior")?;
    let propagated: Vec<(StateVector, UnitQuaternion<f64>)> = chi.iter().map(|x| motion_model(x, dt)).collect();

    // quaternion signs follow the propagated central point, kept on w >= 0
    let mut reference = propagated[0].1;
    if reference.w < 0.0 {
        reference = UnitQuaternion::new_unchecked(-reference.into_inner());
    }
    let points: Vec<StateVector> = propagated
        .iter()
        .map(|(x, q)| {
            let mut x = *x;
            x.fixed_rows_mut::<3>(3).copy_from(&aligned_im(q, &reference));
            x
        })
        .collect();

    // weights sum to one: accumulate deviations from the central point
    let mut mean = points[0];
    for (x, wm) in points.iter().zip(w.mean.iter()).skip(1) {
        mean += (x - points[0]) * *wm;
    }
    let mut out = UkfCovariance::zeros();
    for (x, wc) in points.iter().zip(w.covariance.iter()) {
        let d = x - mean;
        out += d * d.transpose() * *wc;
    }
    clamp_state(&mut mean);
    let q_mean = quat_from_im(&mean.fixed_rows::<3>(3).into_owned());
    out += process_noise(dt, &q_mean, params);
    let out = symmetrize(&out);
    check_finite(&mean, &out, "prediction")?;
    Ok((UkfState::from_vector(&mean), out))
}

/// Measurement covariance over `(p, q_im)` on the hemisphere of `reference`.
fn measurement_covariance(meas: &PoseMeasurement, reference: &UnitQuaternion<f64>) -> Matrix6<f64> {
    let mut q = *meas.pose.rotation();
    if q.coords.dot(&reference.coords) < 0.0 {
        q = UnitQuaternion::new_unchecked(-q.into_inner());
    }
    let mut g = Matrix6::<f64>::identity();
    g.fixed_view_mut::<3, 3>(3, 3).copy_from(&im_jacobian(&q));
    let r = g * meas.noise * g.transpose();
    (r + r.transpose()) * 0.5
}

struct UpdateOutcome {
    state: UkfState,
    cov: UkfCovariance,
    innovation: Vector6<f64>,
}

fn update_inner(
    state: &UkfState,
    cov: &UkfCovariance,
    meas: &PoseMeasurement,
    params: &UkfParams,
) -> Result<UpdateOutcome> {
    let w = params.weights();
    let x = state.to_vector();
    let chi = sigma_points(&x, cov, &w, "predicted")?;
    let q_pred = state.orientation();
    let h = |x: &StateVector| -> Vector6<f64> { x.fixed_rows::<6>(0).into_owned() };

    let mut z_hat = h(&chi[0]);
    for (c, wm) in chi.iter().zip(w.mean.iter()).skip(1) {
        z_hat += (h(c) - h(&chi[0])) * *wm;
    }
    let mut s = measurement_covariance(meas, &q_pred);
    let mut cross = CrossCov::zeros();
    for (c, wc) in chi.iter().zip(w.covariance.iter()) {
        let dz = h(c) - z_hat;
        s += dz * dz.transpose() * *wc;
        cross += (c - x) * dz.transpose() * *wc;
    }
    let s = (s + s.transpose()) * 0.5;
    let s_chol = s
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("innovation covariance singular at t={}", meas.timestamp)))?;

    let mut z = Vector6::zeros();
    z.fixed_rows_mut::<3>(0).copy_from(meas.pose.translation());
    z.fixed_rows_mut::<3>(3)
        .copy_from(&aligned_im(meas.pose.rotation(), &q_pred));
    let innovation = z - z_hat;

    // K = C S⁻¹
    let gain = s_chol.solve(&cross.transpose()).transpose();
    let mut x_new = x + gain * innovation;
    clamp_state(&mut x_new);
    let cov_new = symmetrize(&(cov - gain * s * gain.transpose()));
    check_finite(&x_new, &cov_new, "update")?;
    Ok(UpdateOutcome {
        state: UkfState::from_vector(&x_new),
        cov: cov_new,
        innovation,
    })
}

pub fn update(
    state: &UkfState,
    cov: &UkfCovariance,
    meas: &PoseMeasurement,
    params: &UkfParams,
) -> Result<(UkfState, UkfCovariance)> {
    let o = update_inner(state, cov, meas, params)?;
    Ok((o.state, o.cov))
}

/// One line of the per-step filter health log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterDiagnostic {
    pub timestamp: f64,
    /// Norm of the stacked innovations processed at this timestamp.
    pub innovation_norm: f64,
    pub trace_cov: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutput {
    pub trajectory: Trajectory,
    pub diagnostics: Vec<FilterDiagnostic>,
    pub final_state: UkfState,
    pub final_covariance: UkfCovariance,
}

/// Fuses both streams in global timestamp order. One output sample per
/// distinct timestamp.
pub fn run(stream1: &[PoseMeasurement], stream2: &[PoseMeasurement], params: &UkfParams) -> Result<FusionOutput> {
    params.validate()?;
    if stream1.is_empty() && stream2.is_empty() {
        return Err(Error::invalid("both measurement streams are empty"));
    }
    for s in [stream1, stream2] {
        if s.windows(2).any(|w| !(w[0].timestamp <= w[1].timestamp)) {
            return Err(Error::invalid("measurement streams must be sorted by timestamp"));
        }
    }
    let mut all: Vec<&PoseMeasurement> = stream1.iter().chain(stream2.iter()).collect();
    for m in &all {
        m.validate()?;
    }
    all.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));

    let first = all[0];
    let mut state = UkfState::from_pose(&first.pose);
    let mut cov = params.initial_covariance(first);
    let mut t = first.timestamp;
    let mut innov_sq = 0.0;
    let mut samples = Vec::new();
    let mut diagnostics = Vec::new();

    let mut emit = |t: f64, state: &UkfState, cov: &UkfCovariance, innov_sq: f64| {
        samples.push(StampedPose::new(t, state.pose()));
        diagnostics.push(FilterDiagnostic {
            timestamp: t,
            innovation_norm: innov_sq.sqrt(),
            trace_cov: cov.trace(),
        });
    };

    for m in &all[1..] {
        if m.timestamp > t {
            emit(t, &state, &cov, innov_sq);
            innov_sq = 0.0;
            (state, cov) = predict(&state, &cov, m.timestamp - t, params)?;
            t = m.timestamp;
        }
        let o = update_inner(&state, &cov, m, params)?;
        innov_sq += o.innovation.norm_squared();
        state = o.state;
        cov = o.cov;
    }
    emit(t, &state, &cov, innov_sq);

    Ok(FusionOutput {
        trajectory: Trajectory::new("camera_fused", samples)?,
        diagnostics,
        final_state: state,
        final_covariance: cov,
    })
}

/// Fused pose at an image timestamp.
pub fn pose_at(fused: &Trajectory, image_timestamp: f64) -> Result<Pose> {
    interpolate(fused, image_timestamp)
}

/// Fused pose at an image timestamp shifted by a constant clock offset.
pub fn pose_at_offset(fused: &Trajectory, image_timestamp: f64, time_offset: f64) -> Result<Pose> {
    interpolate(fused, image_timestamp + time_offset)
}
