//! Evaluation: stability of a nominally rigid transform between two tracked
//! bodies, accuracy against a reference trajectory, and hand-eye improvement.
//!
//! Stability works on the per-sample distance `|t_rel|` and geodesic angle of
//! the relative transform `A_i⁻¹ B_i`; max deviation and standard deviation
//! are taken on those two scalars around their means.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::handeye::HandEyeSolution;
use crate::se3::{compose, delta, interpolate, inverse, mean_pose, Pose, PoseDelta, Trajectory};

/// A distance in millimeters paired with an angle in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MmDeg {
    pub mm: f64,
    pub deg: f64,
}

impl MmDeg {
    pub fn new(mm: f64, deg: f64) -> Self {
        MmDeg { mm, deg }
    }

    pub fn from_delta(d: &PoseDelta) -> Self {
        MmDeg {
            mm: d.translation_error * 1e3,
            deg: d.rotation_error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub timestamp: f64,
    pub delta: PoseDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub mean_transform: Pose,
    pub mean_distance: f64,
    pub mean_angle: f64,
    pub max_deviation: MmDeg,
    pub std_deviation: MmDeg,
    pub sample_count: usize,
    /// Per-sample relative transform vs the mean transform.
    #[serde(skip)]
    pub series: Vec<SeriesPoint>,
}

fn mean_std_max(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let max = values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    (mean, var.sqrt(), max)
}

/// Pairs of poses at the timestamps of `a` that fall inside `b`'s span.
fn paired(a: &Trajectory, b: &Trajectory) -> Result<Vec<(f64, Pose, Pose)>> {
    let (Some((a0, a1)), Some((b0, b1))) = (a.span(), b.span()) else {
        return Err(Error::invalid("empty trajectory"));
    };
    if a1 < b0 || b1 < a0 {
        return Err(Error::invalid(format!(
            "time spans [{a0}, {a1}] and [{b0}, {b1}] do not overlap"
        )));
    }
    let same_grid = a.len() == b.len() && a.timestamps().zip(b.timestamps()).all(|(x, y)| x == y);
    if same_grid {
        return Ok(a
            .samples()
            .iter()
            .zip(b.samples())
            .map(|(x, y)| (x.timestamp, x.pose, y.pose))
            .collect());
    }
    a.samples()
        .iter()
        .filter(|s| s.timestamp >= b0 && s.timestamp <= b1)
        .map(|s| Ok((s.timestamp, s.pose, interpolate(b, s.timestamp)?)))
        .collect()
}

pub fn stability(traj_a: &Trajectory, traj_b: &Trajectory) -> Result<StabilityReport> {
    let pairs = paired(traj_a, traj_b)?;
    let rel: Vec<(f64, Pose)> = pairs.iter().map(|(t, a, b)| (*t, compose(&inverse(a), b))).collect();
    let poses: Vec<Pose> = rel.iter().map(|(_, p)| *p).collect();
    let mean = mean_pose(&poses)?;
    let dist: Vec<f64> = poses.iter().map(|p| p.translation().norm() * 1e3).collect();
    let ang: Vec<f64> = poses.iter().map(|p| p.angle().to_degrees()).collect();
    let (mean_d, std_d, max_d) = mean_std_max(&dist);
    let (mean_a, std_a, max_a) = mean_std_max(&ang);
    Ok(StabilityReport {
        mean_transform: mean,
        mean_distance: mean_d,
        mean_angle: mean_a,
        max_deviation: MmDeg::new(max_d, max_a),
        std_deviation: MmDeg::new(std_d, std_a),
        sample_count: rel.len(),
        series: rel
            .iter()
            .map(|(t, p)| SeriesPoint {
                timestamp: *t,
                delta: delta(p, &mean),
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean: MmDeg,
    pub max: MmDeg,
    pub std: MmDeg,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Accuracy {
    pub stats: ErrorStats,
    #[serde(skip)]
    pub series: Vec<SeriesPoint>,
}

/// Per-sample error of `candidate` against `reference`, the reference
/// interpolated at the candidate timestamps inside its span.
pub fn accuracy(candidate: &Trajectory, reference: &Trajectory) -> Result<Accuracy> {
    let pairs = paired(candidate, reference)?;
    if pairs.is_empty() {
        return Err(Error::invalid("no candidate sample inside the reference span"));
    }
    let series: Vec<SeriesPoint> = pairs
        .iter()
        .map(|(t, c, r)| SeriesPoint {
            timestamp: *t,
            delta: delta(c, r),
        })
        .collect();
    let mm: Vec<f64> = series.iter().map(|s| s.delta.translation_error * 1e3).collect();
    let deg: Vec<f64> = series.iter().map(|s| s.delta.rotation_error).collect();
    let (mean_mm, _, _) = mean_std_max(&mm);
    let (mean_deg, _, _) = mean_std_max(&deg);
    let std_of = |v: &[f64]| mean_std_max(v).1;
    Ok(Accuracy {
        stats: ErrorStats {
            mean: MmDeg::new(mean_mm, mean_deg),
            max: MmDeg::new(
                mm.iter().cloned().fold(0.0, f64::max),
                deg.iter().cloned().fold(0.0, f64::max),
            ),
            std: MmDeg::new(std_of(&mm), std_of(&deg)),
            count: series.len(),
        },
        series,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub camera1: Accuracy,
    pub camera2: Accuracy,
    pub fused: Accuracy,
}

impl AccuracyReport {
    /// Fused mean translation error no larger than either single stream.
    pub fn fused_dominates(&self) -> bool {
        self.fused.stats.mean.mm <= self.camera1.stats.mean.mm.min(self.camera2.stats.mean.mm)
    }
}

/// `f64` that writes infinity as the string `"inf"`.
pub(crate) mod ratio_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!(
                "expected number or \"inf\", got {t:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    /// Mean raw error vs truth.
    pub raw_error: MmDeg,
    /// Refined error vs truth.
    pub refined_error: MmDeg,
    /// `raw / refined` for translation; `inf` when refined is exact.
    #[serde(with = "ratio_serde")]
    pub translation: f64,
    #[serde(with = "ratio_serde")]
    pub rotation: f64,
}

fn ratio(raw: f64, refined: f64) -> f64 {
    match (raw == 0.0, refined == 0.0) {
        (true, true) => 1.0,
        (false, true) => f64::INFINITY,
        _ => raw / refined,
    }
}

pub fn improvement_factor(raw: &[HandEyeSolution], refined: &Pose, truth: &Pose) -> Result<Improvement> {
    if raw.is_empty() {
        return Err(Error::invalid("no raw hand-eye solutions"));
    }
    let n = raw.len() as f64;
    let raw_error = raw.iter().fold(MmDeg::default(), |acc, s| {
        let d = MmDeg::from_delta(&delta(&s.tf_wm_cam, truth));
        MmDeg::new(acc.mm + d.mm / n, acc.deg + d.deg / n)
    });
    let refined_error = MmDeg::from_delta(&delta(refined, truth));
    Ok(Improvement {
        raw_error,
        refined_error,
        translation: ratio(raw_error.mm, refined_error.mm),
        rotation: ratio(raw_error.deg, refined_error.deg),
    })
}

/// `timestamp,distance_mm,angle_deg` at full precision.
pub fn write_series_csv(path: &Path, series: &[SeriesPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["timestamp", "distance_mm", "angle_deg"])?;
    for s in series {
        w.write_record(&[
            s.timestamp.to_string(),
            (s.delta.translation_error * 1e3).to_string(),
            s.delta.rotation_error.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series_csv(path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

fn f2(v: f64) -> String {
    format!("{v:.2}")
}

/// Stability table: one row per dataset.
pub fn write_stability_table(path: &Path, rows: &[(String, StabilityReport)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "dataset",
        "mean_distance_mm",
        "mean_angle_deg",
        "max_dev_mm",
        "max_dev_deg",
        "std_mm",
        "std_deg",
    ])?;
    for (name, r) in rows {
        w.write_record(&[
            name.clone(),
            f2(r.mean_distance),
            f2(r.mean_angle),
            f2(r.max_deviation.mm),
            f2(r.max_deviation.deg),
            f2(r.std_deviation.mm),
            f2(r.std_deviation.deg),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Hand-eye table: raw mean error, refined error and improvement per controller.
pub fn write_handeye_table(path: &Path, rows: &[(String, Improvement)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "controller",
        "raw_mm",
        "raw_deg",
        "refined_mm",
        "refined_deg",
        "factor_translation",
        "factor_rotation",
    ])?;
    for (name, r) in rows {
        w.write_record(&[
            name.clone(),
            f2(r.raw_error.mm),
            f2(r.raw_error.deg),
            f2(r.refined_error.mm),
            f2(r.refined_error.deg),
            f2(r.translation),
            f2(r.rotation),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Accuracy table: mean error of each camera stream and of the fused output.
pub fn write_accuracy_table(path: &Path, rows: &[(String, AccuracyReport)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["dataset", "c1_mm", "c1_deg", "c2_mm", "c2_deg", "ukf_mm", "ukf_deg"])?;
    for (name, r) in rows {
        w.write_record(&[
            name.clone(),
            f2(r.camera1.stats.mean.mm),
            f2(r.camera1.stats.mean.deg),
            f2(r.camera2.stats.mean.mm),
            f2(r.camera2.stats.mean.deg),
            f2(r.fused.stats.mean.mm),
            f2(r.fused.stats.mean.deg),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rig::{add_noise, propagate_rig, square_trajectory, NoiseModel, RigConfig};
    use crate::se3::StampedPose;
    use nalgebra::Vector3;

    fn camera() -> Trajectory {
        square_trajectory(1.0, 10.0, 50.0).unwrap()
    }

    #[test]
    fn rigid_pair_has_zero_spread() {
        let (c1, c2) = propagate_rig(&camera(), &RigConfig::default());
        let r = stability(&c1, &c2).unwrap();
        assert!(r.std_deviation.mm < 1e-9 && r.max_deviation.mm < 1e-9);
        assert!(r.std_deviation.deg < 1e-9 && r.max_deviation.deg < 1e-9);
        assert!((r.mean_distance - 520.0).abs() < 1e-6);
        assert!((r.mean_angle - 179.47).abs() < 1e-6);
        assert_eq!(r.series.len(), c1.len());
    }

    #[test]
    fn stability_world_invariance() {
        let (c1, c2) = propagate_rig(&camera(), &RigConfig::default());
        let n1 = add_noise(&c1, &NoiseModel::default().with_seed(1)).unwrap();
        let n2 = add_noise(&c2, &NoiseModel::default().with_seed(2)).unwrap();
        let w = Pose::from_scaled_axis(Vector3::new(4.0, -2.0, 1.0), Vector3::new(0.5, -0.2, 2.0));
        let m1 = n1.map_poses("a", |p| compose(&w, p));
        let m2 = n2.map_poses("b", |p| compose(&w, p));
        let a = stability(&n1, &n2).unwrap();
        let b = stability(&m1, &m2).unwrap();
        for (x, y) in [
            (a.mean_distance, b.mean_distance),
            (a.mean_angle, b.mean_angle),
            (a.max_deviation.mm, b.max_deviation.mm),
            (a.max_deviation.deg, b.max_deviation.deg),
            (a.std_deviation.mm, b.std_deviation.mm),
            (a.std_deviation.deg, b.std_deviation.deg),
        ] {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn stability_rejects_disjoint_spans() {
        let a = camera();
        let shifted = Trajectory::new(
            "late",
            a.samples()
                .iter()
                .map(|s| StampedPose::new(s.timestamp + 100.0, s.pose))
                .collect(),
        )
        .unwrap();
        assert!(matches!(stability(&a, &shifted), Err(Error::InvalidArgument(_))));
        assert!(accuracy(&a, &shifted).is_err());
    }

    #[test]
    fn accuracy_self_and_offset() {
        let c = camera();
        let a = accuracy(&c, &c).unwrap();
        assert_eq!(a.stats.mean, MmDeg::default());
        assert_eq!(a.stats.max, MmDeg::default());
        let off = c.map_poses("off", |p| {
            Pose::new(p.translation() + Vector3::new(0.003, 0.0, 0.004), *p.rotation())
        });
        let a = accuracy(&off, &c).unwrap();
        assert!((a.stats.mean.mm - 5.0).abs() < 1e-9);
        assert!(a.stats.std.mm < 1e-9);
        assert_eq!(a.stats.count, c.len());
    }

    #[test]
    fn accuracy_interpolates_reference() {
        let c = camera();
        let sub = Trajectory::new("sub", c.samples().iter().step_by(3).cloned().collect()).unwrap();
        // candidate on the reference grid subset: exact hits
        assert!(accuracy(&sub, &c).unwrap().stats.max.mm < 1e-9);
    }

    fn sol(t: f64) -> HandEyeSolution {
        HandEyeSolution {
            tf_wm_cam: Pose::from_translation(Vector3::new(t, 0.0, 0.0)),
            residual_rotation: 0.0,
            residual_translation: 0.0,
            sample_count: 10,
        }
    }

    #[test]
    fn improvement_cases() {
        let truth = Pose::identity();
        let i = improvement_factor(&[sol(0.002), sol(-0.002)], &truth, &truth).unwrap();
        assert!((i.raw_error.mm - 2.0).abs() < 1e-12);
        assert!(i.translation.is_infinite());
        assert_eq!(i.rotation, 1.0);
        let i = improvement_factor(&[sol(0.0)], &truth, &truth).unwrap();
        assert_eq!(i.translation, 1.0);
        let i = improvement_factor(&[sol(0.004)], &sol(0.001).tf_wm_cam, &truth).unwrap();
        assert!((i.translation - 4.0).abs() < 1e-9);
        assert!(improvement_factor(&[], &truth, &truth).is_err());
    }

    #[test]
    fn reports_round_trip_json() {
        let truth = Pose::identity();
        let i = improvement_factor(&[sol(0.002)], &truth, &truth).unwrap();
        let text = serde_json::to_string(&i).unwrap();
        assert!(text.contains("\"inf\""));
        assert_eq!(serde_json::from_str::<Improvement>(&text).unwrap(), i);

        let (c1, c2) = propagate_rig(&camera(), &RigConfig::default());
        let n2 = add_noise(&c2, &NoiseModel::default()).unwrap();
        let mut r = stability(&c1, &n2).unwrap();
        let back: StabilityReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        r.series.clear();
        assert_eq!(back, r);

        let acc = AccuracyReport {
            camera1: accuracy(&n2, &c2).unwrap(),
            ..AccuracyReport::default()
        };
        let back: AccuracyReport = serde_json::from_str(&serde_json::to_string(&acc).unwrap()).unwrap();
        assert_eq!(back.camera1.stats, acc.camera1.stats);
    }

    #[test]
    fn csv_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let c = camera();
        let off = c.map_poses("off", |p| {
            Pose::new(p.translation() + Vector3::new(0.001, 0.0, 0.0), *p.rotation())
        });
        let a = accuracy(&off, &c).unwrap();
        let path = dir.path().join("series.csv");
        write_series_csv(&path, &a.series).unwrap();
        let back = read_series_csv(&path).unwrap();
        assert_eq!(back.len(), a.series.len());
        assert!((back[0].1 - 1.0).abs() < 1e-9);

        let (c1, c2) = propagate_rig(&c, &RigConfig::default());
        let s = stability(&c1, &c2).unwrap();
        let table = dir.path().join("t.csv");
        write_stability_table(&table, &[("run0".into(), s)]).unwrap();
        let text = std::fs::read_to_string(&table).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("run0,520.00,179.47,0.00"));
    }
}
