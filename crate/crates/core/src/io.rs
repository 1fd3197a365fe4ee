//! Whitespace-separated text formats shared by every stage.
//!
//! Trajectory / observation line: `timestamp tx ty tz qx qy qz qw`
//! Sweep line: `timestamp lighthouse_id sensor_index h_angle v_angle`
//! Diagnostics line: `timestamp innovation_norm trace_cov`
//!
//! Lines starting with `#` are comments. Floats are written with Rust's
//! shortest round-trip formatting, so write/read is lossless.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Quaternion, Vector3};

use crate::error::{Error, Result};
use crate::lighthouse::SweepMeasurement;
use crate::rig::TargetObservation;
use crate::se3::{Pose, StampedPose, Trajectory};
use crate::ukf::FilterDiagnostic;

const BODY_TAG: &str = "# body_id:";

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            None
        } else {
            Some((i + 1, l.split_whitespace().collect()))
        }
    })
}

fn parse_f64(line: usize, tok: &str) -> Result<f64> {
    tok.parse::<f64>().map_err(|e| Error::Parse {
        line,
        message: format!("{tok:?}: {e}"),
    })
}

fn parse_stamped(line: usize, fields: &[&str]) -> Result<StampedPose> {
    if fields.len() != 8 {
        return Err(Error::Parse {
            line,
            message: format!("expected 8 fields, found {}", fields.len()),
        });
    }
    let v: Vec<f64> = fields.iter().map(|t| parse_f64(line, t)).collect::<Result<_>>()?;
    let pose =
        Pose::from_parts(Vector3::new(v[1], v[2], v[3]), Quaternion::new(v[7], v[4], v[5], v[6])).map_err(|e| {
            Error::Parse {
                line,
                message: e.to_string(),
            }
        })?;
    Ok(StampedPose::new(v[0], pose))
}

fn push_pose_line(out: &mut String, t: f64, p: &Pose) {
    let tr = p.translation();
    let q = p.rotation().quaternion();
    let _ = writeln!(out, "{} {} {} {} {} {} {} {}", t, tr.x, tr.y, tr.z, q.i, q.j, q.k, q.w);
}

pub fn format_trajectory(traj: &Trajectory) -> String {
    let mut out = format!("{BODY_TAG} {}\n# timestamp tx ty tz qx qy qz qw\n", traj.body_id());
    for s in traj.samples() {
        push_pose_line(&mut out, s.timestamp, &s.pose);
    }
    out
}

/// Parses a trajectory; the `# body_id:` header wins over `default_body`.
pub fn parse_trajectory(text: &str, default_body: &str) -> Result<Trajectory> {
    let body = text
        .lines()
        .find_map(|l| l.trim().strip_prefix(BODY_TAG).map(|b| b.trim().to_string()))
        .unwrap_or_else(|| default_body.to_string());
    let samples = data_lines(text)
        .map(|(line, f)| parse_stamped(line, &f))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(body, samples)
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    std::fs::write(path, format_trajectory(traj))?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("body");
    parse_trajectory(&std::fs::read_to_string(path)?, stem)
}

pub fn format_observations(obs: &[TargetObservation]) -> String {
    let mut out = String::from("# camera->target\n# timestamp tx ty tz qx qy qz qw\n");
    for o in obs {
        push_pose_line(&mut out, o.timestamp, &o.tf_cam_target);
    }
    out
}

pub fn parse_observations(text: &str) -> Result<Vec<TargetObservation>> {
    data_lines(text)
        .map(|(line, f)| {
            parse_stamped(line, &f).map(|s| TargetObservation {
                timestamp: s.timestamp,
                tf_cam_target: s.pose,
            })
        })
        .collect()
}

pub fn write_observations(path: &Path, obs: &[TargetObservation]) -> Result<()> {
    std::fs::write(path, format_observations(obs))?;
    Ok(())
}

pub fn read_observations(path: &Path) -> Result<Vec<TargetObservation>> {
    parse_observations(&std::fs::read_to_string(path)?)
}

/// One line of a sweep file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub timestamp: f64,
    pub lighthouse_id: usize,
    pub measurement: SweepMeasurement,
}

pub fn format_sweeps(records: &[SweepRecord]) -> String {
    let mut out = String::from("# timestamp lighthouse_id sensor_index h_angle v_angle\n");
    for r in records {
        let m = &r.measurement;
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            r.timestamp, r.lighthouse_id, m.sensor_index, m.horizontal_angle, m.vertical_angle
        );
    }
    out
}

pub fn parse_sweeps(text: &str) -> Result<Vec<SweepRecord>> {
    data_lines(text)
        .map(|(line, f)| {
            if f.len() != 5 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected 5 fields, found {}", f.len()),
                });
            }
            let int = |tok: &str| {
                tok.parse::<usize>().map_err(|e| Error::Parse {
                    line,
                    message: format!("{tok:?}: {e}"),
                })
            };
            Ok(SweepRecord {
                timestamp: parse_f64(line, f[0])?,
                lighthouse_id: int(f[1])?,
                measurement: SweepMeasurement {
                    sensor_index: int(f[2])?,
                    horizontal_angle: parse_f64(line, f[3])?,
                    vertical_angle: parse_f64(line, f[4])?,
                },
            })
        })
        .collect()
}

pub fn format_diagnostics(diag: &[FilterDiagnostic]) -> String {
    let mut out = String::from("# timestamp innovation_norm trace_cov\n");
    for d in diag {
        let _ = writeln!(out, "{} {} {}", d.timestamp, d.innovation_norm, d.trace_cov);
    }
    out
}

pub fn parse_diagnostics(text: &str) -> Result<Vec<FilterDiagnostic>> {
    data_lines(text)
        .map(|(line, f)| {
            if f.len() != 3 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected 3 fields, found {}", f.len()),
                });
            }
            Ok(FilterDiagnostic {
                timestamp: parse_f64(line, f[0])?,
                innovation_norm: parse_f64(line, f[1])?,
                trace_cov: parse_f64(line, f[2])?,
            })
        })
        .collect()
}
