use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dbs_traj_core::oracle::{bundle_intensity_at_plane, min_half_width, sample_profile};
use dbs_traj_core::validation::{run_suite, CriterionOutcome, Suite};
use dbs_traj_core::{load_scenario, run, Mode, TrajectoryRecord};

use crate::error::CliError;
use crate::output::{self, ProfileRow, RunManifest, TrajectoryRow};
use crate::plot;

#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub scenario: PathBuf,
    /// Falls back to the scenario's `output.directory`.
    pub out: Option<PathBuf>,
    pub plot: bool,
    pub classical: bool,
    pub relativistic: bool,
}

fn profile(rec: &TrajectoryRecord, index: usize) -> Vec<ProfileRow> {
    if rec.samples.is_empty() {
        return Vec::new();
    }
    output::profile_rows(&sample_profile(rec, index))
}

/// Runs a scenario and writes its directory. A runtime failure still writes
/// every file from the partial record before returning the error.
pub fn cmd_run(args: &RunArgs) -> Result<RunManifest, CliError> {
    let started = Instant::now();
    let mut vs = load_scenario(&args.scenario).map_err(CliError::Config)?;
    let forced = match (args.classical, args.relativistic) {
        (true, true) => return Err(CliError::Input("--classical and --relativistic are exclusive".into())),
        (true, false) => Some(Mode::Classical),
        (false, true) => Some(Mode::Relativistic),
        (false, false) => None,
    };
    if let Some(mode) = forced {
        vs = vs.with_mode(mode).map_err(CliError::Config)?;
    }
    let s = vs.scenario();
    let dir = args.out.clone().unwrap_or_else(|| s.output.directory.clone());
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;

    let outcome = run(&vs);
    let rec = &outcome.record;
    let rows = output::trajectory_rows(rec);
    let launch = profile(rec, 0);
    let last = profile(rec, rec.samples.len().saturating_sub(1));

    let mut files = Vec::new();
    let mut emit = |name: &str, bytes: &[u8]| -> Result<(), CliError> {
        output::write_atomic(&dir.join(name), bytes)?;
        files.push(name.to_string());
        Ok(())
    };
    emit(
        output::TRAJECTORIES,
        &output::csv_bytes(&rows, &output::TRAJECTORY_HEADERS)?,
    )?;
    emit(
        output::PROFILE_LAUNCH,
        &output::csv_bytes(&launch, &output::PROFILE_HEADERS)?,
    )?;
    emit(
        output::PROFILE_FINAL,
        &output::csv_bytes(&last, &output::PROFILE_HEADERS)?,
    )?;
    let mut frame = None;
    if args.plot || s.output.plot {
        let (svg, f) = plot::trajectories_svg(&rows);
        frame = Some(f);
        emit(output::TRAJECTORIES_SVG, svg.as_bytes())?;
        emit(output::PROFILES_SVG, plot::profiles_svg(&launch, &last).as_bytes())?;
    }
    files.push(output::MANIFEST.to_string());

    let manifest = RunManifest {
        tool: "dbs-traj".into(),
        version: output::VERSION.into(),
        scenario_path: args.scenario.clone(),
        output_directory: dir.clone(),
        files,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        steps: outcome.steps,
        mode: vs.mode(),
        n_rays: s.n_rays,
        report: rec.report,
        error: outcome.error.as_ref().map(|e| e.to_string()),
        caustics: rec.caustics.clone(),
        plot: frame,
        scenario: s.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    output::write_atomic(&dir.join(output::MANIFEST), json.as_bytes())?;
    match outcome.error {
        Some(e) => Err(CliError::Runtime(e)),
        None => Ok(manifest),
    }
}

pub fn summarize_run(m: &RunManifest) -> String {
    let mut lines = vec![format!("steps: {}", m.steps)];
    if let Some(r) = &m.report {
        lines.push(format!("t: {:e}", r.t));
        lines.push(format!("max |dH|/H: {:e}", r.max_dh));
    }
    lines.push(format!("caustic events: {}", m.caustics.len()));
    lines.push(format!(
        "wrote {} files to {}",
        m.files.len(),
        m.output_directory.display()
    ));
    lines.join("\n")
}

/// Rebuilds the SVG plots of a run directory from its CSV files.
pub fn replot(dir: &Path) -> Result<(String, String), CliError> {
    let rows: Vec<TrajectoryRow> = output::read_csv(&dir.join(output::TRAJECTORIES))?;
    let launch: Vec<ProfileRow> = output::read_csv(&dir.join(output::PROFILE_LAUNCH))?;
    let last: Vec<ProfileRow> = output::read_csv(&dir.join(output::PROFILE_FINAL))?;
    Ok((plot::trajectories_svg(&rows).0, plot::profiles_svg(&launch, &last)))
}

pub fn cmd_validate(suite: Suite) -> Result<Vec<CriterionOutcome>, CliError> {
    let outcomes = run_suite(suite);
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed()).count();
    if failed > 0 {
        return Err(CliError::ValidationFailed {
            failed,
            total: outcomes.len(),
        });
    }
    Ok(outcomes)
}

/// Planes at which `compare` reports widths, besides the minimum.
const COMPARE_PLANES: usize = 11;
const MIN_WIDTH_PLANES: usize = 2001;

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWidths {
    pub z: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
}

impl PlaneWidths {
    pub fn ratio(&self) -> Option<f64> {
        Some(self.a? / self.b?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub planes: Vec<PlaneWidths>,
    /// (width, z) of the narrowest plane of each run.
    pub min_a: Option<(f64, f64)>,
    pub min_b: Option<(f64, f64)>,
}

impl Comparison {
    pub fn min_ratio(&self) -> Option<f64> {
        Some(self.min_a?.0 / self.min_b?.0)
    }
}

fn load_record(dir: &Path) -> Result<TrajectoryRecord, CliError> {
    let manifest = output::read_manifest(dir)?;
    let rows: Vec<TrajectoryRow> = output::read_csv(&dir.join(output::TRAJECTORIES))?;
    output::record_from_rows(&rows, &manifest)
}

fn reach(rec: &TrajectoryRecord) -> f64 {
    rec.samples
        .last()
        .map_or(0.0, |s| s.rays.iter().map(|r| r.z).fold(f64::INFINITY, f64::min))
}

fn width_at(rec: &TrajectoryRecord, z: f64) -> Option<f64> {
    bundle_intensity_at_plane(rec, z).ok()?.half_width_1e2()
}

/// 1/e^2 half-widths of two runs at common planes, and each run's minimum.
pub fn cmd_compare(dir_a: &Path, dir_b: &Path) -> Result<Comparison, CliError> {
    let a = load_record(dir_a)?;
    let b = load_record(dir_b)?;
    if a.n_rays() != b.n_rays() {
        return Err(CliError::Input(format!(
            "ray counts differ: {} vs {}",
            a.n_rays(),
            b.n_rays()
        )));
    }
    let top = reach(&a).min(reach(&b));
    let planes = (0..COMPARE_PLANES)
        .map(|k| {
            let z = top * k as f64 / (COMPARE_PLANES - 1) as f64;
            PlaneWidths {
                z,
                a: width_at(&a, z),
                b: width_at(&b, z),
            }
        })
        .collect();
    Ok(Comparison {
        planes,
        min_a: min_half_width(&a, MIN_WIDTH_PLANES),
        min_b: min_half_width(&b, MIN_WIDTH_PLANES),
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |w| format!("{w:.6e}"))
}

pub fn format_comparison(c: &Comparison) -> String {
    let mut out = format!("{:>14} {:>14} {:>14} {:>14}\n", "z", "width A", "width B", "A/B");
    for p in &c.planes {
        out += &format!(
            "{:>14.6e} {:>14} {:>14} {:>14}\n",
            p.z,
            cell(p.a),
            cell(p.b),
            cell(p.ratio())
        );
    }
    let at = |m: Option<(f64, f64)>| m.map_or_else(|| "-".into(), |(w, z)| format!("{w:.6e} at z = {z:.6e}"));
    out += &format!("min width A: {}\n", at(c.min_a));
    out += &format!("min width B: {}\n", at(c.min_b));
    out += &format!("min width ratio A/B: {}\n", cell(c.min_ratio()));
    out
}
