//! Files written into a run directory, and reading them back.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use dbs_traj_core::oracle::IntensityProfile;
use dbs_traj_core::{CausticEvent, Mode, RaySample, Sample, Scenario, StepReport, TrajectoryRecord};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::plot::PlotFrame;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const TRAJECTORIES: &str = "trajectories.csv";
pub const PROFILE_LAUNCH: &str = "profile_launch.csv";
pub const PROFILE_FINAL: &str = "profile_final.csv";
pub const MANIFEST: &str = "manifest.json";
pub const TRAJECTORIES_SVG: &str = "trajectories.svg";
pub const PROFILES_SVG: &str = "profiles.svg";

/// First line of every CSV file.
pub fn header_comment() -> String {
    format!("# dbs-traj {VERSION}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub ray_index: usize,
    pub label: f64,
    pub x: f64,
    pub z: f64,
    pub px: f64,
    pub pz: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "H")]
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub x: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub scenario_path: PathBuf,
    pub output_directory: PathBuf,
    pub files: Vec<String>,
    pub wall_clock_seconds: f64,
    pub steps: usize,
    pub mode: Mode,
    pub n_rays: usize,
    pub report: Option<StepReport>,
    pub error: Option<String>,
    pub caustics: Vec<CausticEvent>,
    pub plot: Option<PlotFrame>,
    pub scenario: Scenario,
}

pub fn trajectory_rows(rec: &TrajectoryRecord) -> Vec<TrajectoryRow> {
    let mut rows = Vec::with_capacity(rec.samples.len() * rec.n_rays());
    for s in &rec.samples {
        for (i, (r, &label)) in s.rays.iter().zip(&rec.labels).enumerate() {
            rows.push(TrajectoryRow {
                t: s.t,
                ray_index: i,
                label,
                x: r.x,
                z: r.z,
                px: r.px,
                pz: r.pz,
                r: r.r,
                w: r.w,
                h: r.h,
            });
        }
    }
    rows
}

/// Rebuilds the record from rows ordered by sample, then ray index.
pub fn record_from_rows(rows: &[TrajectoryRow], manifest: &RunManifest) -> Result<TrajectoryRecord, CliError> {
    let n = manifest.n_rays;
    if n == 0 || rows.len() % n != 0 {
        return Err(CliError::Input(format!(
            "{} rows do not split into samples of {n} rays",
            rows.len()
        )));
    }
    let mut samples = Vec::with_capacity(rows.len() / n);
    for chunk in rows.chunks(n) {
        if chunk
            .iter()
            .enumerate()
            .any(|(i, r)| r.ray_index != i || r.t != chunk[0].t)
        {
            return Err(CliError::Input("trajectory rows are not grouped by sample".into()));
        }
        samples.push(Sample {
            t: chunk[0].t,
            rays: chunk
                .iter()
                .map(|r| RaySample {
                    x: r.x,
                    z: r.z,
                    px: r.px,
                    pz: r.pz,
                    r: r.r,
                    w: r.w,
                    h: r.h,
                })
                .collect(),
        });
    }
    Ok(TrajectoryRecord {
        samples,
        labels: rows.iter().take(n).map(|r| r.label).collect(),
        caustics: manifest.caustics.clone(),
        report: manifest.report,
        scenario_echo: manifest.scenario.clone(),
    })
}

pub fn profile_rows(p: &IntensityProfile) -> Vec<ProfileRow> {
    p.x.iter()
        .zip(&p.i_values)
        .map(|(&x, &intensity)| ProfileRow { x, intensity })
        .collect()
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::io(path, e)
    })
}

pub fn csv_bytes<T: Serialize>(rows: &[T], headers: &[&str]) -> Result<Vec<u8>, CliError> {
    let mut buf = format!("{}\n", header_comment()).into_bytes();
    {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut buf);
        let fail = |e: csv::Error| CliError::Input(e.to_string());
        w.write_record(headers).map_err(fail)?;
        for r in rows {
            w.serialize(r).map_err(fail)?;
        }
        w.flush().map_err(|e| CliError::Input(e.to_string()))?;
    }
    Ok(buf)
}

pub const TRAJECTORY_HEADERS: [&str; 10] = ["t", "ray_index", "label", "x", "z", "px", "pz", "R", "W", "H"];
pub const PROFILE_HEADERS: [&str; 2] = ["x", "intensity"];

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, CliError> {
    let path = dir.join(MANIFEST);
    let text =
        fs::read_to_string(&path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}
