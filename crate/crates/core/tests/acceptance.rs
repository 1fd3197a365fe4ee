//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use stickpose::handeye::{
    build_motion_pairs, calibrate, refine_target, samples_from_streams, solve_tsai, CalibrationParams,
};
use stickpose::lighthouse::{default_lighthouses, track_with_lighthouses, SensorLayout};
use stickpose::metrics::{accuracy, improvement_factor, stability, AccuracyReport, Improvement};
use stickpose::optim::FitOptions;
use stickpose::pipeline::{camera_measurements, run_all, PipelineConfig};
use stickpose::rig::{generate_scene, observe_target, Controller, NoiseModel, SceneConfig, SimScene};
use stickpose::ukf::{predict, update, PoseMeasurement, UkfCovariance, UkfParams, UkfState};
use stickpose::{compose, delta, inverse, Pose, Trajectory};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol * target
}

fn in_range(value: f64, lo: f64, hi: f64) -> bool {
    value >= lo && value <= hi
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let t0 = Instant::now();
    let mut o = f();
    let elapsed = t0.elapsed();
    if elapsed > limit {
        o.pass = false;
    }
    o.detail = format!(
        "{} ({:.1} s, limit {} s)",
        o.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    o
}

fn scenes() -> Vec<SimScene> {
    std::thread::scope(|s| {
        let handles: Vec<_> = SEEDS
            .iter()
            .map(|&seed| {
                s.spawn(move || {
                    generate_scene(&SceneConfig {
                        seed,
                        ..SceneConfig::default()
                    })
                    .unwrap()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

fn criterion_1() -> Outcome {
    let reports: Vec<_> = scenes()
        .iter()
        .map(|s| stability(&s.tracking.controller1_noisy, &s.tracking.controller2_noisy).unwrap())
        .collect();
    let max_mm = mean(reports.iter().map(|r| r.max_deviation.mm));
    let max_deg = mean(reports.iter().map(|r| r.max_deviation.deg));
    let std_mm = mean(reports.iter().map(|r| r.std_deviation.mm));
    let std_deg = mean(reports.iter().map(|r| r.std_deviation.deg));
    Outcome {
        pass: within(max_mm, 4.99, 0.3)
            && within(max_deg, 0.5, 0.3)
            && within(std_mm, 1.29, 0.3)
            && within(std_deg, 0.13, 0.3),
        detail: format!("eps_max {max_mm:.2} mm / {max_deg:.3} deg, sigma {std_mm:.2} mm / {std_deg:.3} deg"),
    }
}

struct Calibrated {
    scene: SimScene,
    x1: Pose,
    x2: Pose,
    improvements: [Improvement; 2],
}

fn calibrate_all() -> Vec<Calibrated> {
    std::thread::scope(|s| {
        let handles: Vec<_> = SEEDS
            .iter()
            .map(|&seed| {
                s.spawn(move || {
                    let scene = generate_scene(&SceneConfig {
                        seed,
                        ..SceneConfig::default()
                    })
                    .unwrap();
                    let c = &scene.calibration;
                    let samples =
                        samples_from_streams(&c.controller1_noisy, &c.controller2_noisy, &c.observations).unwrap();
                    let cal = calibrate(&samples, &CalibrationParams::default()).unwrap();
                    let rig = scene.config.rig;
                    let improvements = [
                        improvement_factor(&cal.input_solutions.controller1, &cal.tf_wm1_cam, &rig.tf_wm1_cam).unwrap(),
                        improvement_factor(&cal.input_solutions.controller2, &cal.tf_wm2_cam, &rig.tf_wm2_cam).unwrap(),
                    ];
                    Calibrated {
                        x1: cal.tf_wm1_cam,
                        x2: cal.tf_wm2_cam,
                        improvements,
                        scene,
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

fn criterion_2(cal: &[Calibrated]) -> Outcome {
    let all: Vec<&Improvement> = cal.iter().flat_map(|c| c.improvements.iter()).collect();
    let raw_mm = mean(all.iter().map(|i| i.raw_error.mm));
    let raw_deg = mean(all.iter().map(|i| i.raw_error.deg));
    let ref_mm = mean(all.iter().map(|i| i.refined_error.mm));
    let ref_deg = mean(all.iter().map(|i| i.refined_error.deg));
    let factor = mean(all.iter().map(|i| i.translation));
    Outcome {
        pass: in_range(raw_mm, 1.5, 2.5)
            && in_range(raw_deg, 0.08, 0.14)
            && in_range(ref_mm, 0.2, 0.9)
            && in_range(ref_deg, 0.01, 0.05)
            && factor >= 2.5,
        detail: format!(
            "raw {raw_mm:.2} mm / {raw_deg:.3} deg, refined {ref_mm:.2} mm / {ref_deg:.3} deg, improvement {factor:.2}"
        ),
    }
}

fn cameras(c: &Calibrated) -> (Trajectory, Trajectory) {
    let t = &c.scene.tracking;
    (
        t.controller1_noisy.map_poses("camera1", |p| compose(p, &c.x1)),
        t.controller2_noisy.map_poses("camera2", |p| compose(p, &c.x2)),
    )
}

fn criterion_3(cal: &[Calibrated]) -> Outcome {
    let reports: Vec<_> = cal
        .iter()
        .map(|c| {
            let (a, b) = cameras(c);
            stability(&a, &b).unwrap()
        })
        .collect();
    let mm = mean(reports.iter().map(|r| r.mean_distance));
    let deg = mean(reports.iter().map(|r| r.mean_angle));
    Outcome {
        pass: within(mm, 3.53, 0.3) && within(deg, 0.21, 0.3),
        detail: format!("camera pair deviation {mm:.2} mm / {deg:.3} deg"),
    }
}

fn criterion_4(cal: &[Calibrated]) -> Outcome {
    let params = UkfParams::default();
    let reports: Vec<AccuracyReport> = std::thread::scope(|s| {
        let handles: Vec<_> = cal
            .iter()
            .map(|c| {
                let params = &params;
                s.spawn(move || {
                    let t = &c.scene.tracking;
                    let fused = stickpose::ukf::run(
                        &camera_measurements(&t.controller1_noisy, &c.x1, params, 1),
                        &camera_measurements(&t.controller2_noisy, &c.x2, params, 2),
                        params,
                    )
                    .unwrap();
                    let (a, b) = cameras(c);
                    AccuracyReport {
                        camera1: accuracy(&a, &t.camera_truth).unwrap(),
                        camera2: accuracy(&b, &t.camera_truth).unwrap(),
                        fused: accuracy(&fused.trajectory, &t.camera_truth).unwrap(),
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mm = mean(reports.iter().map(|r| r.fused.stats.mean.mm));
    let deg = mean(reports.iter().map(|r| r.fused.stats.mean.deg));
    let c_mm = mean(
        reports
            .iter()
            .flat_map(|r| [r.camera1.stats.mean.mm, r.camera2.stats.mean.mm]),
    );
    let dominant = reports.iter().filter(|r| r.fused_dominates()).count();
    Outcome {
        pass: within(mm, 2.44, 0.3) && within(deg, 0.09, 0.5) && dominant >= 4,
        detail: format!(
            "fused {mm:.2} mm / {deg:.3} deg (single streams {c_mm:.2} mm), fused best in {dominant}/5 seeds"
        ),
    }
}

fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
    let t = Uniform::new_inclusive(-5.0, 5.0).unwrap();
    let r = Uniform::new_inclusive(-3.0, 3.0).unwrap();
    Pose::from_scaled_axis(
        Vector3::from_fn(|_, _| t.sample(rng)),
        Vector3::from_fn(|_, _| r.sample(rng)),
    )
}

fn pose_gap(a: &Pose, b: &Pose) -> f64 {
    let (qa, qb) = (a.rotation().coords, b.rotation().coords);
    let dq = (qa - qb).amax().min((qa + qb).amax());
    (a.translation() - b.translation()).amax().max(dq)
}

fn criterion_5() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    // noiseless hand-eye
    let cfg = SceneConfig {
        tracking_noise: NoiseModel::zero(),
        observation_noise: NoiseModel::zero(),
        ..SceneConfig::default()
    };
    let scene = generate_scene(&cfg).unwrap();
    let c = &scene.calibration;
    let samples = samples_from_streams(&c.controller1_noisy, &c.controller2_noisy, &c.observations).unwrap();
    let mut tsai = (0.0f64, 0.0f64);
    for ctl in Controller::BOTH {
        let sol = solve_tsai(&build_motion_pairs(&samples[..50], ctl, 5.0).unwrap()).unwrap();
        let d = delta(&sol.tf_wm_cam, &cfg.rig.hand_eye(ctl));
        tsai = (tsai.0.max(d.translation_error), tsai.1.max(d.rotation_error));
    }
    pass &= tsai.0 <= 1e-9 && tsai.1 <= 1e-7;
    notes.push(format!("tsai {:.1e} m / {:.1e} deg", tsai.0, tsai.1));

    // noiseless lighthouse tracking of controller 1
    let short = SceneConfig {
        motion: stickpose::rig::SquareMotion {
            period: 8.0,
            rate: 25.0,
            ..Default::default()
        },
        ..cfg
    };
    let truth = generate_scene(&short).unwrap().tracking.controller1_truth;
    let lhs = default_lighthouses(Vector3::new(0.5, 0.5, 0.9)).unwrap();
    let track = track_with_lighthouses(&truth, &SensorLayout::controller(), &lhs, 0.0, 0).unwrap();
    let lh = truth
        .samples()
        .iter()
        .zip(track.trajectory.samples())
        .map(|(a, b)| delta(&a.pose, &b.pose))
        .fold((0.0f64, 0.0f64), |acc, d| {
            (acc.0.max(d.translation_error), acc.1.max(d.rotation_error))
        });
    pass &= lh.0 <= 1e-6 && lh.1 <= 1e-5;
    notes.push(format!("lighthouse {:.1e} m / {:.1e} deg", lh.0, lh.1));

    // group axioms
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let (a, b, c) = (random_pose(&mut rng), random_pose(&mut rng), random_pose(&mut rng));
        let assoc = pose_gap(&compose(&compose(&a, &b), &c), &compose(&a, &compose(&b, &c)));
        let inv = pose_gap(&compose(&a, &inverse(&a)), &Pose::identity());
        let ident = pose_gap(&compose(&a, &Pose::identity()), &a);
        worst = worst.max(assoc).max(inv).max(ident);
    }
    pass &= worst <= 1e-12;
    notes.push(format!("group axioms {worst:.1e}"));

    // UKF covariance health
    let params = UkfParams::default();
    let noise = Normal::new(0.0, 1e-3).unwrap();
    let first = PoseMeasurement::isotropic(0.0, Pose::identity(), 1e-3, 1e-3, 1);
    let mut state = UkfState::from_pose(&first.pose);
    let mut cov: UkfCovariance = params.initial_covariance(&first);
    let mut healthy = true;
    for k in 1..=10_000 {
        let t = k as f64 * 0.01;
        let truth = Pose::new(
            Vector3::new(t.sin(), t.cos(), 0.1 * t),
            UnitQuaternion::from_euler_angles(0.3 * t.sin(), 0.2, 0.5 * t.cos()),
        );
        let jitter = Pose::from_scaled_axis(
            Vector3::from_fn(|_, _| noise.sample(&mut rng)),
            Vector3::from_fn(|_, _| noise.sample(&mut rng)),
        );
        (state, cov) = predict(&state, &cov, 0.01, &params).unwrap();
        healthy &= symmetric_psd(&cov);
        let m = PoseMeasurement::isotropic(t, compose(&truth, &jitter), 1e-3, 1e-3, 1);
        (state, cov) = update(&state, &cov, &m, &params).unwrap();
        healthy &= symmetric_psd(&cov);
    }
    pass &= healthy;
    notes.push(format!(
        "ukf covariance {}",
        if healthy { "symmetric PSD" } else { "INVALID" }
    ));

    Outcome {
        pass,
        detail: notes.join(", "),
    }
}

fn symmetric_psd(p: &UkfCovariance) -> bool {
    let sym = (p - p.transpose()).amax() <= 1e-10 * p.amax().max(1.0);
    sym && ((p + p.transpose()) * 0.5).cholesky().is_some()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_6() -> Outcome {
    let cfg = PipelineConfig {
        seed: 7,
        ..PipelineConfig::default()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_all(&cfg, a.path()).unwrap();
    run_all(&cfg, b.path()).unwrap();
    let (fa, fb) = (files(a.path()), files(b.path()));
    let same = fa == fb;
    Outcome {
        pass: same && fa.len() >= 20,
        detail: format!(
            "{} files compared, {}",
            fa.len(),
            if same { "byte-identical" } else { "DIFFER" }
        ),
    }
}

fn criterion_7() -> Outcome {
    let cfg = SceneConfig {
        motion: stickpose::rig::SquareMotion {
            period: 10.0,
            ..Default::default()
        },
        ..SceneConfig::default()
    };
    let camera = cfg.motion.generate().unwrap();
    let opts = FitOptions::default();

    let exact = observe_target(&camera, &cfg.world_target, &NoiseModel::zero()).unwrap();
    let est = refine_target(&camera, &exact, &opts).unwrap();
    let d0 = delta(&est.pose, &cfg.world_target);

    let noisy = observe_target(&camera, &cfg.world_target, &NoiseModel::default().with_seed(99)).unwrap();
    let est = refine_target(&camera, &noisy, &opts).unwrap();
    let d1 = delta(&est.pose, &cfg.world_target);
    Outcome {
        pass: d0.translation_error <= 1e-9
            && d0.rotation_error.to_radians() <= 1e-9
            && noisy.len() == 1000
            && d1.translation_error <= 0.2e-3
            && d1.rotation_error <= 0.02,
        detail: format!(
            "noiseless {:.1e} m / {:.1e} deg, {} noisy obs {:.3} mm / {:.4} deg",
            d0.translation_error,
            d0.rotation_error,
            noisy.len(),
            d1.translation_error * 1e3,
            d1.rotation_error
        ),
    }
}

fn main() {
    let mut failed = 0;
    let mut line = |n: u32, name: &str, o: Outcome| {
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {n} {:<38} {}  {}",
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    };
    line(
        1,
        "inter-controller stability",
        timed(Duration::from_secs(30), criterion_1),
    );

    let mut cal = Vec::new();
    let c2 = timed(Duration::from_secs(60), || {
        cal = calibrate_all();
        criterion_2(&cal)
    });
    line(2, "hand-eye accuracy", c2);
    line(
        3,
        "propagated camera consistency",
        timed(Duration::from_secs(30), || criterion_3(&cal)),
    );
    line(
        4,
        "fused accuracy",
        timed(Duration::from_secs(60), || criterion_4(&cal)),
    );
    line(
        5,
        "exact-recovery properties",
        timed(Duration::from_secs(30), criterion_5),
    );
    line(6, "determinism", criterion_6());
    line(7, "target refinement", timed(Duration::from_secs(10), criterion_7));

    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
