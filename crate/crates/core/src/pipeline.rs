//! End-to-end pipeline over an on-disk run directory:
//! simulate → calibrate → fuse → evaluate → report.
//!
//! Layout under the run directory (names configurable in `[paths]`):
//!
//! ```text
//! scene/config.toml                 resolved configuration
//! scene/truth.json                  true hand-eye transforms and target pose
//! scene/{camera,controller1,controller2}_truth.txt
//! scene/controller{1,2}_noisy.txt
//! scene/observations.txt
//! scene/calib_*.txt                 the same streams for the calibration stations
//! calibration.json
//! fused.txt, fused_diagnostics.txt
//! reports/evaluation.json, reports/*.csv
//! summary.txt, summary.json
//! ```

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::handeye::{
    calibrate_repeated, refine_fit, refine_target, samples_from_streams, CalibrationParams, HandEyeSolution,
    TargetEstimate,
};
use crate::io::{format_diagnostics, read_observations, read_trajectory, write_observations, write_trajectory};
use crate::metrics::{
    accuracy, improvement_factor, stability, write_accuracy_table, write_handeye_table, write_series_csv,
    write_stability_table, AccuracyReport, Improvement, StabilityReport,
};
use crate::rig::{
    generate_scene, CalibrationMotion, Controller, NoiseModel, Recording, RigConfig, SceneConfig, SquareMotion,
    TargetObservation,
};
use crate::se3::{compose, Pose, Trajectory};
use crate::ukf::{run, FusionOutput, PoseMeasurement, UkfParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub scene_dir: String,
    pub calibration: String,
    pub fused: String,
    pub diagnostics: String,
    pub reports_dir: String,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            scene_dir: "scene".into(),
            calibration: "calibration.json".into(),
            fused: "fused.txt".into(),
            diagnostics: "fused_diagnostics.txt".into(),
            reports_dir: "reports".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionOptions {
    /// Propagate controllers with the true hand-eye transforms instead of the
    /// calibrated ones (simulation only).
    pub use_true_handeye: bool,
}

/// `target ± tolerance·target`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub target: f64,
    pub tolerance: f64,
}

impl Band {
    pub const fn new(target: f64, tolerance: f64) -> Self {
        Band { target, tolerance }
    }

    pub fn bounds(&self) -> (f64, f64) {
        (
            self.target * (1.0 - self.tolerance),
            self.target * (1.0 + self.tolerance),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

/// Acceptance thresholds checked by `report`, all on seed-averaged values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub controller_max_mm: Band,
    pub controller_max_deg: Band,
    pub controller_std_mm: Band,
    pub controller_std_deg: Band,
    pub handeye_raw_mm: Range,
    pub handeye_raw_deg: Range,
    pub handeye_refined_mm: Range,
    pub handeye_refined_deg: Range,
    pub handeye_min_improvement: f64,
    pub camera_mean_mm: Band,
    pub camera_mean_deg: Band,
    pub fused_mm: Band,
    pub fused_deg: Band,
    /// Fraction of seeds in which the fused error must not exceed either stream.
    pub fused_dominance_fraction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            controller_max_mm: Band::new(4.99, 0.3),
            controller_max_deg: Band::new(0.5, 0.3),
            controller_std_mm: Band::new(1.29, 0.3),
            controller_std_deg: Band::new(0.13, 0.3),
            handeye_raw_mm: Range { min: 1.5, max: 2.5 },
            handeye_raw_deg: Range { min: 0.08, max: 0.14 },
            handeye_refined_mm: Range { min: 0.2, max: 0.9 },
            handeye_refined_deg: Range { min: 0.01, max: 0.05 },
            handeye_min_improvement: 2.5,
            camera_mean_mm: Band::new(3.53, 0.3),
            camera_mean_deg: Band::new(0.21, 0.3),
            fused_mm: Band::new(2.44, 0.3),
            fused_deg: Band::new(0.09, 0.5),
            fused_dominance_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub rig: RigConfig,
    pub tracking_noise: NoiseModel,
    pub observation_noise: NoiseModel,
    pub motion: SquareMotion,
    pub calibration_motion: CalibrationMotion,
    pub world_target: Pose,
    pub handeye: CalibrationParams,
    pub ukf: UkfParams,
    pub fusion: FusionOptions,
    pub thresholds: Thresholds,
    pub paths: Paths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let scene = SceneConfig::default();
        PipelineConfig {
            seed: scene.seed,
            rig: scene.rig,
            tracking_noise: scene.tracking_noise,
            observation_noise: scene.observation_noise,
            motion: scene.motion,
            calibration_motion: scene.calibration,
            world_target: scene.world_target,
            handeye: CalibrationParams::default(),
            ukf: UkfParams::default(),
            fusion: FusionOptions::default(),
            thresholds: Thresholds::default(),
            paths: Paths::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn scene(&self) -> SceneConfig {
        SceneConfig {
            seed: self.seed,
            rig: self.rig,
            tracking_noise: self.tracking_noise,
            observation_noise: self.observation_noise,
            motion: self.motion,
            calibration: self.calibration_motion,
            world_target: self.world_target,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        PipelineConfig { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, r: Result<()>| {
            r.map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("{name}: {m}")),
                other => Error::Config(format!("{name}: {other}")),
            })
        };
        field("tracking_noise", self.tracking_noise.validate())?;
        field("observation_noise", self.observation_noise.validate())?;
        field("motion", self.motion.validate())?;
        field("ukf", self.ukf.validate())?;
        let h = &self.handeye;
        if h.set_size < 2 || h.repetitions < 2 || !(h.min_rotation_deg >= 0.0) {
            return Err(Error::Config(
                "handeye: set_size and repetitions must be >= 2, min_rotation_deg >= 0".into(),
            ));
        }
        if h.set_size * h.repetitions > self.calibration_motion.stations {
            return Err(Error::Config(format!(
                "handeye: {} sets of {} need {} stations, calibration_motion.stations = {}",
                h.repetitions,
                h.set_size,
                h.set_size * h.repetitions,
                self.calibration_motion.stations
            )));
        }
        Ok(())
    }
}

/// Files of one run directory.
#[derive(Debug, Clone)]
pub struct RunLayout {
    pub root: PathBuf,
    pub paths: Paths,
}

impl RunLayout {
    pub fn new(root: &Path, paths: &Paths) -> Self {
        RunLayout {
            root: root.to_path_buf(),
            paths: paths.clone(),
        }
    }

    pub fn scene_dir(&self) -> PathBuf {
        self.root.join(&self.paths.scene_dir)
    }

    pub fn scene_file(&self, name: &str) -> PathBuf {
        self.scene_dir().join(name)
    }

    pub fn config(&self) -> PathBuf {
        self.scene_file("config.toml")
    }

    pub fn calibration(&self) -> PathBuf {
        self.root.join(&self.paths.calibration)
    }

    pub fn fused(&self) -> PathBuf {
        self.root.join(&self.paths.fused)
    }

    pub fn diagnostics(&self) -> PathBuf {
        self.root.join(&self.paths.diagnostics)
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join(&self.paths.reports_dir)
    }

    pub fn evaluation(&self) -> PathBuf {
        self.reports_dir().join("evaluation.json")
    }
}

/// Ground truth stored next to a simulated scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    pub tf_wm1_cam: Pose,
    pub tf_wm2_cam: Pose,
    pub world_target: Pose,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn write_recording(layout: &RunLayout, prefix: &str, rec: &Recording) -> Result<()> {
    let f = |name: &str| layout.scene_file(&format!("{prefix}{name}"));
    write_trajectory(&f("camera_truth.txt"), &rec.camera_truth)?;
    write_trajectory(&f("controller1_truth.txt"), &rec.controller1_truth)?;
    write_trajectory(&f("controller2_truth.txt"), &rec.controller2_truth)?;
    write_trajectory(&f("controller1_noisy.txt"), &rec.controller1_noisy)?;
    write_trajectory(&f("controller2_noisy.txt"), &rec.controller2_noisy)?;
    write_observations(&f("observations.txt"), &rec.observations)?;
    Ok(())
}

/// Measured streams of a recording, plus the camera truth when available.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSet {
    pub camera_truth: Option<Trajectory>,
    pub controller1: Trajectory,
    pub controller2: Trajectory,
    pub observations: Vec<TargetObservation>,
}

fn read_streams(layout: &RunLayout, prefix: &str) -> Result<StreamSet> {
    let f = |name: &str| layout.scene_file(&format!("{prefix}{name}"));
    let truth = f("camera_truth.txt");
    Ok(StreamSet {
        camera_truth: if truth.exists() {
            Some(read_trajectory(&truth)?)
        } else {
            None
        },
        controller1: read_trajectory(&f("controller1_noisy.txt"))?,
        controller2: read_trajectory(&f("controller2_noisy.txt"))?,
        observations: read_observations(&f("observations.txt"))?,
    })
}

fn read_truth(layout: &RunLayout) -> Result<Option<SceneTruth>> {
    let path = layout.scene_file("truth.json");
    if path.exists() {
        Ok(Some(read_json(&path)?))
    } else {
        Ok(None)
    }
}

/// Generates a scene and writes the bundle.
pub fn simulate(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let layout = RunLayout::new(out, &cfg.paths);
    std::fs::create_dir_all(layout.scene_dir())?;
    let scene = generate_scene(&cfg.scene())?;
    std::fs::write(layout.config(), cfg.to_toml_string()?)?;
    write_json(
        &layout.scene_file("truth.json"),
        &SceneTruth {
            tf_wm1_cam: cfg.rig.tf_wm1_cam,
            tf_wm2_cam: cfg.rig.tf_wm2_cam,
            world_target: scene.world_target,
        },
    )?;
    write_recording(&layout, "", &scene.tracking)?;
    write_recording(&layout, "calib_", &scene.calibration)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerCalibration {
    pub solutions: Vec<HandEyeSolution>,
    pub refined: Pose,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Present when the bundle carries ground truth.
    pub improvement: Option<Improvement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub controller1: ControllerCalibration,
    pub controller2: ControllerCalibration,
    /// Calibration target in the world, from controller-1 propagated cameras.
    pub target: TargetEstimate,
    pub target_error: Option<crate::se3::PoseDelta>,
}

impl CalibrationReport {
    pub fn controller(&self, c: Controller) -> &ControllerCalibration {
        match c {
            Controller::One => &self.controller1,
            Controller::Two => &self.controller2,
        }
    }
}

pub fn calibrate(cfg: &PipelineConfig, out: &Path) -> Result<CalibrationReport> {
    cfg.validate()?;
    let layout = RunLayout::new(out, &cfg.paths);
    let streams = read_streams(&layout, "calib_")?;
    let truth = read_truth(&layout)?;
    let samples = samples_from_streams(&streams.controller1, &streams.controller2, &streams.observations)?;
    let repeated = calibrate_repeated(&samples, &cfg.handeye)?;

    let per_controller = |c: Controller| -> Result<ControllerCalibration> {
        let solutions = repeated.for_controller(c).to_vec();
        let fit = refine_fit(&solutions, &cfg.handeye.refinement)?;
        let improvement = match &truth {
            Some(t) => Some(improvement_factor(&solutions, &fit.pose, &truth_hand_eye(t, c))?),
            None => None,
        };
        Ok(ControllerCalibration {
            solutions,
            refined: fit.pose,
            initial_cost: fit.initial_cost,
            final_cost: fit.final_cost,
            improvement,
        })
    };
    let controller1 = per_controller(Controller::One)?;
    let controller2 = per_controller(Controller::Two)?;

    let cameras = streams
        .controller1
        .map_poses("camera", |p| compose(p, &controller1.refined));
    let target = refine_target(&cameras, &streams.observations, &cfg.handeye.refinement)?;
    let report = CalibrationReport {
        target_error: truth.map(|t| crate::se3::delta(&target.pose, &t.world_target)),
        controller1,
        controller2,
        target,
    };
    write_json(&layout.calibration(), &report)?;
    Ok(report)
}

fn truth_hand_eye(t: &SceneTruth, c: Controller) -> Pose {
    match c {
        Controller::One => t.tf_wm1_cam,
        Controller::Two => t.tf_wm2_cam,
    }
}

/// Camera-pose measurements from one controller stream.
pub fn camera_measurements(
    controller: &Trajectory,
    hand_eye: &Pose,
    params: &UkfParams,
    source_id: u8,
) -> Vec<PoseMeasurement> {
    controller
        .samples()
        .iter()
        .map(|s| {
            PoseMeasurement::from_controller(
                s.timestamp,
                &s.pose,
                hand_eye,
                params.measurement_sigma_translation,
                params.measurement_sigma_rotation_deg.to_radians(),
                source_id,
            )
        })
        .collect()
}

fn hand_eyes(cfg: &PipelineConfig, layout: &RunLayout) -> Result<(Pose, Pose)> {
    if cfg.fusion.use_true_handeye {
        let t = read_truth(layout)?
            .ok_or_else(|| Error::Config("use_true_handeye set but the bundle has no truth.json".into()))?;
        return Ok((t.tf_wm1_cam, t.tf_wm2_cam));
    }
    let cal: CalibrationReport = read_json(&layout.calibration())?;
    Ok((cal.controller1.refined, cal.controller2.refined))
}

pub fn fuse(cfg: &PipelineConfig, out: &Path) -> Result<FusionOutput> {
    cfg.validate()?;
    let layout = RunLayout::new(out, &cfg.paths);
    let streams = read_streams(&layout, "")?;
    let (x1, x2) = hand_eyes(cfg, &layout)?;
    let fused = run(
        &camera_measurements(&streams.controller1, &x1, &cfg.ukf, 1),
        &camera_measurements(&streams.controller2, &x2, &cfg.ukf, 2),
        &cfg.ukf,
    )?;
    write_trajectory(&layout.fused(), &fused.trajectory)?;
    std::fs::write(layout.diagnostics(), format_diagnostics(&fused.diagnostics))?;
    Ok(fused)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub seed: u64,
    /// Relative transform between the two noisy controllers.
    pub controller_stability: StabilityReport,
    /// Relative transform between the two propagated camera streams.
    pub camera_stability: StabilityReport,
    pub handeye: Option<[Improvement; 2]>,
    pub accuracy: Option<AccuracyReport>,
}

pub fn evaluate(cfg: &PipelineConfig, out: &Path) -> Result<EvaluationReport> {
    cfg.validate()?;
    let layout = RunLayout::new(out, &cfg.paths);
    let streams = read_streams(&layout, "")?;
    let (x1, x2) = hand_eyes(cfg, &layout)?;
    let cal: Option<CalibrationReport> = if layout.calibration().exists() {
        Some(read_json(&layout.calibration())?)
    } else {
        None
    };
    let fused = read_trajectory(&layout.fused())?;

    let cam1 = streams.controller1.map_poses("camera1", |p| compose(p, &x1));
    let cam2 = streams.controller2.map_poses("camera2", |p| compose(p, &x2));
    let controller_stability = stability(&streams.controller1, &streams.controller2)?;
    let camera_stability = stability(&cam1, &cam2)?;
    let accuracy = match &streams.camera_truth {
        Some(truth) => Some(AccuracyReport {
            camera1: accuracy(&cam1, truth)?,
            camera2: accuracy(&cam2, truth)?,
            fused: accuracy(&fused, truth)?,
        }),
        None => None,
    };
    let handeye = cal
        .as_ref()
        .and_then(|c| match (c.controller1.improvement, c.controller2.improvement) {
            (Some(a), Some(b)) => Some([a, b]),
            _ => None,
        });

    let dir = layout.reports_dir();
    std::fs::create_dir_all(&dir)?;
    write_series_csv(
        &dir.join("series_controller_stability.csv"),
        &controller_stability.series,
    )?;
    write_series_csv(&dir.join("series_camera_stability.csv"), &camera_stability.series)?;
    write_stability_table(
        &dir.join("table_stability.csv"),
        &[
            ("controllers".to_string(), controller_stability.clone()),
            ("cameras".to_string(), camera_stability.clone()),
        ],
    )?;
    if let Some(acc) = &accuracy {
        write_series_csv(&dir.join("series_camera1.csv"), &acc.camera1.series)?;
        write_series_csv(&dir.join("series_camera2.csv"), &acc.camera2.series)?;
        write_series_csv(&dir.join("series_fused.csv"), &acc.fused.series)?;
        write_accuracy_table(
            &dir.join("table_accuracy.csv"),
            &[(format!("seed_{}", cfg.seed), acc.clone())],
        )?;
    }
    if let Some([a, b]) = &handeye {
        write_handeye_table(
            &dir.join("table_handeye.csv"),
            &[("controller1".to_string(), *a), ("controller2".to_string(), *b)],
        )?;
    }
    let report = EvaluationReport {
        seed: cfg.seed,
        controller_stability,
        camera_stability,
        handeye,
        accuracy,
    };
    write_json(&layout.evaluation(), &report)?;
    Ok(report)
}

/// All stages for one seed.
pub fn run_all(cfg: &PipelineConfig, out: &Path) -> Result<EvaluationReport> {
    simulate(cfg, out)?;
    calibrate(cfg, out)?;
    fuse(cfg, out)?;
    evaluate(cfg, out)
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

/// Runs `stage` for seeds `cfg.seed .. cfg.seed + count` in parallel, each in
/// its own `seed_<n>` directory. Results come back in seed order.
pub fn fan_out<T, F>(cfg: &PipelineConfig, out: &Path, count: usize, stage: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&PipelineConfig, &Path) -> Result<T> + Sync,
{
    if count == 0 {
        return Err(Error::Config("--seeds must be >= 1".into()));
    }
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(count);
    let seeds: Vec<u64> = (0..count as u64).map(|k| cfg.seed.wrapping_add(k)).collect();
    let mut results: Vec<Option<Result<T>>> = (0..count).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunks: Vec<_> = results.chunks_mut(count.div_ceil(workers)).collect();
        let mut offset = 0;
        for chunk in chunks {
            let start = offset;
            offset += chunk.len();
            let (seeds, stage) = (&seeds, &stage);
            scope.spawn(move || {
                for (k, slot) in chunk.iter_mut().enumerate() {
                    let seed = seeds[start + k];
                    *slot = Some(stage(&cfg.with_seed(seed), &seed_dir(out, seed)));
                }
            });
        }
    });
    results
        .into_iter()
        .map(|r| r.expect("every seed slot is filled"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub min: f64,
    #[serde(with = "crate::metrics::ratio_serde")]
    pub max: f64,
    pub pass: bool,
}

impl Check {
    fn band(name: &str, value: f64, band: &Band) -> Self {
        let (min, max) = band.bounds();
        Self::range(name, value, min, max)
    }

    fn range(name: &str, value: f64, min: f64, max: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            min,
            max,
            pass: value >= min && value <= max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seeds: Vec<u64>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n.max(1) as f64
}

pub fn summarize(reports: &[EvaluationReport], th: &Thresholds) -> Summary {
    let mut checks = vec![
        Check::band(
            "controller max deviation [mm]",
            mean(reports.iter().map(|r| r.controller_stability.max_deviation.mm)),
            &th.controller_max_mm,
        ),
        Check::band(
            "controller max deviation [deg]",
            mean(reports.iter().map(|r| r.controller_stability.max_deviation.deg)),
            &th.controller_max_deg,
        ),
        Check::band(
            "controller std deviation [mm]",
            mean(reports.iter().map(|r| r.controller_stability.std_deviation.mm)),
            &th.controller_std_mm,
        ),
        Check::band(
            "controller std deviation [deg]",
            mean(reports.iter().map(|r| r.controller_stability.std_deviation.deg)),
            &th.controller_std_deg,
        ),
        Check::band(
            "camera pair mean deviation [mm]",
            mean(reports.iter().map(|r| r.camera_stability.mean_distance)),
            &th.camera_mean_mm,
        ),
        Check::band(
            "camera pair mean deviation [deg]",
            mean(reports.iter().map(|r| r.camera_stability.mean_angle)),
            &th.camera_mean_deg,
        ),
    ];
    let improvements: Vec<&Improvement> = reports.iter().filter_map(|r| r.handeye.as_ref()).flatten().collect();
    if !improvements.is_empty() {
        let m = |f: fn(&Improvement) -> f64| mean(improvements.iter().map(|i| f(i)));
        checks.push(Check::range(
            "hand-eye raw error [mm]",
            m(|i| i.raw_error.mm),
            th.handeye_raw_mm.min,
            th.handeye_raw_mm.max,
        ));
        checks.push(Check::range(
            "hand-eye raw error [deg]",
            m(|i| i.raw_error.deg),
            th.handeye_raw_deg.min,
            th.handeye_raw_deg.max,
        ));
        checks.push(Check::range(
            "hand-eye refined error [mm]",
            m(|i| i.refined_error.mm),
            th.handeye_refined_mm.min,
            th.handeye_refined_mm.max,
        ));
        checks.push(Check::range(
            "hand-eye refined error [deg]",
            m(|i| i.refined_error.deg),
            th.handeye_refined_deg.min,
            th.handeye_refined_deg.max,
        ));
        checks.push(Check::range(
            "hand-eye improvement (translation)",
            m(|i| i.translation),
            th.handeye_min_improvement,
            f64::INFINITY,
        ));
    }
    let accs: Vec<&AccuracyReport> = reports.iter().filter_map(|r| r.accuracy.as_ref()).collect();
    if !accs.is_empty() {
        checks.push(Check::band(
            "fused error [mm]",
            mean(accs.iter().map(|a| a.fused.stats.mean.mm)),
            &th.fused_mm,
        ));
        checks.push(Check::band(
            "fused error [deg]",
            mean(accs.iter().map(|a| a.fused.stats.mean.deg)),
            &th.fused_deg,
        ));
        let dominant = accs.iter().filter(|a| a.fused_dominates()).count() as f64 / accs.len() as f64;
        checks.push(Check::range(
            "fused <= min(camera1, camera2) [fraction of seeds]",
            dominant,
            th.fused_dominance_fraction,
            1.0,
        ));
    }
    Summary {
        seeds: reports.iter().map(|r| r.seed).collect(),
        pass: checks.iter().all(|c| c.pass),
        checks,
    }
}

impl Summary {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "seeds: {}\n",
            self.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ")
        );
        for c in &self.checks {
            let max = if c.max.is_infinite() {
                "inf".to_string()
            } else {
                format!("{:.2}", c.max)
            };
            out.push_str(&format!(
                "{} {:<50} {:>8.2}   [{:.2}, {}]\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.min,
                max
            ));
        }
        out.push_str(if self.pass {
            "overall: PASS\n"
        } else {
            "overall: FAIL\n"
        });
        out
    }
}

/// Evaluation reports found in `out`: either one run or `seed_*` subdirectories.
pub fn collect_reports(out: &Path, paths: &Paths) -> Result<Vec<EvaluationReport>> {
    let single = RunLayout::new(out, paths).evaluation();
    if single.exists() {
        return Ok(vec![read_json(&single)?]);
    }
    let mut dirs: Vec<(u64, PathBuf)> = std::fs::read_dir(out)?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_prefix("seed_")?.parse::<u64>().ok().map(|s| (s, e.path()))
        })
        .collect();
    dirs.sort();
    let reports: Vec<EvaluationReport> = dirs
        .iter()
        .map(|(_, d)| RunLayout::new(d, paths).evaluation())
        .filter(|p| p.exists())
        .map(|p| read_json(&p))
        .collect::<Result<_>>()?;
    if reports.is_empty() {
        return Err(Error::invalid(format!("no evaluation reports under {}", out.display())));
    }
    Ok(reports)
}

/// Aggregates all reports under `out` and writes `summary.txt` / `summary.json`.
pub fn report(cfg: &PipelineConfig, out: &Path) -> Result<Summary> {
    let summary = summarize(&collect_reports(out, &cfg.paths)?, &cfg.thresholds);
    std::fs::write(out.join("summary.txt"), summary.to_text())?;
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}
