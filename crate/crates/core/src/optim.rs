//! Least-squares fit of a single pose to a set of pose estimates.
//!
//! Cost: `Σ w_r ρ(θ_i)² + w_t ρ(|t - t_i|)²` where `θ_i` is the geodesic angle
//! (radians) between the candidate rotation and estimate `i`. Solved by damped
//! Gauss-Newton (Levenberg) starting from [`mean_pose`].

use std::ops::AddAssign;

use nalgebra::{Matrix6, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::{log_so3, mean_pose, right_jacobian_inv, Pose};

/// Robust loss applied to each residual magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RobustLoss {
    #[default]
    None,
    /// Huber with threshold `delta` (in the residual's own unit).
    Huber { delta: f64 },
}

impl RobustLoss {
    /// IRLS weight for a residual of magnitude `r`.
    fn weight(&self, r: f64) -> f64 {
        match *self {
            RobustLoss::None => 1.0,
            RobustLoss::Huber { delta } => {
                if r <= delta {
                    1.0
                } else {
                    delta / r
                }
            }
        }
    }

    /// `ρ(r)²` as it enters the cost.
    fn cost(&self, r: f64) -> f64 {
        match *self {
            RobustLoss::None => r * r,
            RobustLoss::Huber { delta } => {
                if r <= delta {
                    r * r
                } else {
                    2.0 * delta * r - delta * delta
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// Weight of squared rotation residuals (rad²).
    pub rotation_weight: f64,
    /// Weight of squared translation residuals (m²).
    pub translation_weight: f64,
    pub loss: RobustLoss,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            rotation_weight: 1.0,
            translation_weight: 1.0,
            loss: RobustLoss::None,
            max_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub pose: Pose,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
}

pub fn fit_cost(pose: &Pose, targets: &[Pose], opts: &FitOptions) -> f64 {
    targets
        .iter()
        .map(|p| {
            let rot = log_so3(&(p.rotation().inverse() * pose.rotation())).norm();
            let tr = (pose.translation() - p.translation()).norm();
            opts.rotation_weight * opts.loss.cost(rot) + opts.translation_weight * opts.loss.cost(tr)
        })
        .sum()
}

fn pose_key(p: &Pose) -> [f64; 7] {
    let t = p.translation();
    let q = p.rotation().quaternion();
    [t.x, t.y, t.z, q.w, q.i, q.j, q.k]
}

/// Fits one pose to `targets`. The input order does not affect the result:
/// targets are sorted into a canonical order before any arithmetic.
pub fn fit_pose(targets: &[Pose], opts: &FitOptions) -> Result<FitResult> {
    if targets.is_empty() {
        return Err(Error::invalid("pose fit needs at least one target"));
    }
    let mut sorted = targets.to_vec();
    sorted.sort_by(|a, b| {
        pose_key(a)
            .iter()
            .zip(pose_key(b).iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let targets = &sorted[..];

    let mut pose = mean_pose(targets)?;
    let initial_cost = fit_cost(&pose, targets, opts);
    let mut cost = initial_cost;
    let mut lambda = 1e-6;

    for iter in 0..opts.max_iterations {
        let mut h = Matrix6::<f64>::zeros();
        let mut g = Vector6::<f64>::zeros();
        for p in targets {
            let r_rot = log_so3(&(p.rotation().inverse() * pose.rotation()));
            let j_rot = right_jacobian_inv(&r_rot);
            let w_rot = opts.rotation_weight * opts.loss.weight(r_rot.norm());
            let r_t = pose.translation() - p.translation();
            let w_t = opts.translation_weight * opts.loss.weight(r_t.norm());

            // parameters: [δt (world), δθ (right perturbation)]
            h.fixed_view_mut::<3, 3>(0, 0)
                .add_assign(&(nalgebra::Matrix3::identity() * w_t));
            g.fixed_rows_mut::<3>(0).add_assign(&(r_t * w_t));
            h.fixed_view_mut::<3, 3>(3, 3)
                .add_assign(&(j_rot.transpose() * j_rot * w_rot));
            g.fixed_rows_mut::<3>(3)
                .add_assign(&(j_rot.transpose() * r_rot * w_rot));
        }

        loop {
            let mut damped = h;
            for k in 0..6 {
                damped[(k, k)] += lambda * (1.0 + h[(k, k)]);
            }
            let step = damped
                .cholesky()
                .ok_or_else(|| Error::Numerical("pose fit normal equations not positive definite".into()))?
                .solve(&(-g));
            let dt: Vector3<f64> = step.fixed_rows::<3>(0).into_owned();
            let dr: Vector3<f64> = step.fixed_rows::<3>(3).into_owned();
            let candidate = Pose::new(
                pose.translation() + dt,
                pose.rotation() * UnitQuaternion::from_scaled_axis(dr),
            );
            let new_cost = fit_cost(&candidate, targets, opts);
            if new_cost <= cost {
                let converged = step.norm() < 1e-12 || cost - new_cost <= 1e-15 * cost.max(1e-300);
                pose = candidate;
                cost = new_cost;
                lambda = (lambda * 0.1).max(1e-12);
                if converged {
                    return Ok(FitResult {
                        pose,
                        initial_cost,
                        final_cost: cost,
                        iterations: iter + 1,
                    });
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e12 || step.norm() < 1e-14 {
                // no descent direction left: at the optimum to machine precision
                return Ok(FitResult {
                    pose,
                    initial_cost,
                    final_cost: cost,
                    iterations: iter + 1,
                });
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        cost,
    })
}
