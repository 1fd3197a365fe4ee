//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every entry point returns a JSON string so the page needs no glue beyond
//! `JSON.parse`.

use serde_json::{json, Value};
use stickpose::handeye::{
    build_motion_pairs, calibrate_repeated, refine, samples_from_streams, solve_tsai, CalibrationParams,
};
use stickpose::metrics::{accuracy, stability, SeriesPoint};
use stickpose::pipeline::{camera_measurements, PipelineConfig};
use stickpose::rig::{generate_scene, Controller};
use stickpose::{compose, delta, ukf, Result};
use wasm_bindgen::prelude::*;

/// Upper bound on points per plotted series.
const MAX_POINTS: usize = 600;

fn series(points: &[SeriesPoint]) -> Value {
    let step = points.len().div_ceil(MAX_POINTS).max(1);
    let picked: Vec<_> = points.iter().step_by(step).collect();
    json!({
        "t": picked.iter().map(|p| p.timestamp).collect::<Vec<_>>(),
        "mm": picked.iter().map(|p| p.delta.translation_error * 1e3).collect::<Vec<_>>(),
        "deg": picked.iter().map(|p| p.delta.rotation_error).collect::<Vec<_>>(),
    })
}

fn base_config(seed: u64, period: f64, sigma_mm: f64, sigma_deg: f64) -> PipelineConfig {
    let mut cfg = PipelineConfig::default().with_seed(seed);
    cfg.motion.period = period;
    cfg.tracking_noise.sigma_translation = sigma_mm * 1e-3;
    cfg.tracking_noise.sigma_rotation = sigma_deg;
    cfg
}

/// Relative-pose stability between the two noisy controllers.
pub fn stability_json(seed: u64, period: f64, sigma_mm: f64, sigma_deg: f64) -> Result<Value> {
    let cfg = base_config(seed, period, sigma_mm, sigma_deg);
    cfg.validate()?;
    let scene = generate_scene(&cfg.scene())?;
    let rec = &scene.tracking;
    let report = stability(&rec.controller1_noisy, &rec.controller2_noisy)?;
    Ok(json!({
        "samples": report.sample_count,
        "max": report.max_deviation,
        "std": report.std_deviation,
        "mean_distance_m": report.mean_distance,
        "mean_angle_deg": report.mean_angle,
        "series": series(&report.series),
    }))
}

/// Repeated Tsai-Lenz calibration of controller 1 plus the refined estimate.
pub fn handeye_json(seed: u64, stations: usize, set_size: usize, repetitions: usize) -> Result<Value> {
    let mut cfg = PipelineConfig::default().with_seed(seed);
    cfg.motion.period = 4.0;
    cfg.calibration_motion.stations = stations;
    cfg.handeye = CalibrationParams {
        set_size,
        repetitions,
        ..cfg.handeye
    };
    cfg.validate()?;
    let scene = generate_scene(&cfg.scene())?;
    let rec = &scene.calibration;
    let samples = samples_from_streams(&rec.controller1_noisy, &rec.controller2_noisy, &rec.observations)?;
    let truth = cfg.rig.tf_wm1_cam;

    let repeated = calibrate_repeated(&samples, &cfg.handeye)?;
    let solutions = repeated.for_controller(Controller::One);
    let refined = refine(solutions, &cfg.handeye.refinement)?;
    let raw: Vec<Value> = solutions
        .iter()
        .map(|s| {
            let d = delta(&s.tf_wm_cam, &truth);
            json!({ "mm": d.translation_error * 1e3, "deg": d.rotation_error })
        })
        .collect();
    let all = solve_tsai(&build_motion_pairs(
        &samples,
        Controller::One,
        cfg.handeye.min_rotation_deg,
    )?)?;
    let d_refined = delta(&refined, &truth);
    let d_all = delta(&all.tf_wm_cam, &truth);
    Ok(json!({
        "raw": raw,
        "refined": { "mm": d_refined.translation_error * 1e3, "deg": d_refined.rotation_error },
        "single_solve": { "mm": d_all.translation_error * 1e3, "deg": d_all.rotation_error },
    }))
}

/// Camera accuracy of each propagated stream and of the UKF fusion.
pub fn fusion_json(seed: u64, period: f64, log_jerk_psd: f64, log_angular_psd: f64) -> Result<Value> {
    let mut cfg = PipelineConfig::default().with_seed(seed);
    cfg.motion.period = period;
    cfg.ukf.jerk_psd = 10f64.powf(log_jerk_psd);
    cfg.ukf.angular_accel_psd = 10f64.powf(log_angular_psd);
    cfg.validate()?;
    let scene = generate_scene(&cfg.scene())?;
    let rec = &scene.tracking;
    let (x1, x2) = (cfg.rig.tf_wm1_cam, cfg.rig.tf_wm2_cam);
    let cam1 = rec.controller1_noisy.map_poses("camera1", |p| compose(p, &x1));
    let cam2 = rec.controller2_noisy.map_poses("camera2", |p| compose(p, &x2));
    let fused = ukf::run(
        &camera_measurements(&rec.controller1_noisy, &x1, &cfg.ukf, 1),
        &camera_measurements(&rec.controller2_noisy, &x2, &cfg.ukf, 2),
        &cfg.ukf,
    )?;
    let truth = &rec.camera_truth;
    let stream = |name: &str, acc: stickpose::metrics::Accuracy| json!({ "name": name, "stats": acc.stats, "series": series(&acc.series) });
    Ok(json!({
        "streams": [
            stream("camera1", accuracy(&cam1, truth)?),
            stream("camera2", accuracy(&cam2, truth)?),
            stream("fused", accuracy(&fused.trajectory, truth)?),
        ],
    }))
}

fn to_js(r: Result<Value>) -> std::result::Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn stability_demo(seed: u32, period: f64, sigma_mm: f64, sigma_deg: f64) -> std::result::Result<String, JsValue> {
    to_js(stability_json(seed as u64, period, sigma_mm, sigma_deg))
}

#[wasm_bindgen]
pub fn handeye_demo(seed: u32, stations: u32, set_size: u32, repetitions: u32) -> std::result::Result<String, JsValue> {
    to_js(handeye_json(
        seed as u64,
        stations as usize,
        set_size as usize,
        repetitions as usize,
    ))
}

#[wasm_bindgen]
pub fn fusion_demo(
    seed: u32,
    period: f64,
    log_jerk_psd: f64,
    log_angular_psd: f64,
) -> std::result::Result<String, JsValue> {
    to_js(fusion_json(seed as u64, period, log_jerk_psd, log_angular_psd))
}
