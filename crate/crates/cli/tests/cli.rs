use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dbs_traj::commands::{cmd_compare, replot};
use dbs_traj::output::{read_csv, read_manifest, ProfileRow, RunManifest, TrajectoryRow, VERSION};
use dbs_traj_core::oracle::{fringe_count, IntensityProfile, FRINGE_PROMINENCE};
use dbs_traj_core::validation::fig1_gaussian;
use dbs_traj_core::Scenario;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dbs-traj"))
}

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn run(scenario: &Path, dir: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg(scenario)
        .arg("--out")
        .arg(dir)
        .args(extra)
        .output()
        .unwrap()
}

fn write_scenario(dir: &Path, s: &Scenario) -> PathBuf {
    let path = dir.join("scenario.json");
    fs::write(&path, s.to_json_pretty()).unwrap();
    path
}

fn small() -> Scenario {
    Scenario {
        n_rays: 41,
        z_max: 2000.0,
        ..fig1_gaussian()
    }
}

#[test]
fn fig1_writes_six_files_with_version_headers() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&shipped("fig1_gaussian.json"), tmp.path(), &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut names: Vec<String> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "manifest.json",
            "profile_final.csv",
            "profile_launch.csv",
            "profiles.svg",
            "trajectories.csv",
            "trajectories.svg"
        ]
    );
    let m = read_manifest(tmp.path()).unwrap();
    assert_eq!(m.version, VERSION);
    assert_eq!(m.files.len(), 6);
    assert!(m.files.iter().all(|f| tmp.path().join(f).exists()));
    assert!(m.error.is_none());
    for f in ["trajectories.csv", "profile_launch.csv", "profile_final.csv"] {
        let text = fs::read_to_string(tmp.path().join(f)).unwrap();
        assert_eq!(text.lines().next().unwrap(), format!("# dbs-traj {VERSION}"));
    }
    let text = fs::read_to_string(tmp.path().join("trajectories.csv")).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "t,ray_index,label,x,z,px,pz,R,W,H");
    for f in ["trajectories.svg", "profiles.svg"] {
        assert!(fs::read_to_string(tmp.path().join(f))
            .unwrap()
            .contains(&format!("dbs-traj {VERSION}")));
    }
}

#[test]
fn svg_is_reproduced_from_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_scenario(tmp.path(), &small());
    let dir = tmp.path().join("run");
    assert_eq!(code(&run(&path, &dir, &["--plot"])), 0);
    let (traj, prof) = replot(&dir).unwrap();
    assert_eq!(traj, fs::read_to_string(dir.join("trajectories.svg")).unwrap());
    assert_eq!(prof, fs::read_to_string(dir.join("profiles.svg")).unwrap());

    let dir2 = tmp.path().join("again");
    assert_eq!(code(&run(&path, &dir2, &["--plot"])), 0);
    for f in [
        "trajectories.csv",
        "trajectories.svg",
        "profiles.svg",
        "profile_final.csv",
    ] {
        assert_eq!(fs::read(dir.join(f)).unwrap(), fs::read(dir2.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn csv_values_round_trip_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_scenario(tmp.path(), &small());
    let dir = tmp.path().join("run");
    assert_eq!(code(&run(&path, &dir, &[])), 0);
    let vs = dbs_traj_core::load_scenario(&path).unwrap();
    let rec = dbs_traj_core::run(&vs).into_result().unwrap();
    let rows: Vec<TrajectoryRow> = read_csv(&dir.join("trajectories.csv")).unwrap();
    assert_eq!(rows.len(), rec.samples.len() * rec.n_rays());
    for (row, (t, s)) in rows
        .iter()
        .zip(rec.samples.iter().flat_map(|s| s.rays.iter().map(move |r| (s.t, r))))
    {
        assert_eq!(
            (row.t, row.x, row.z, row.px, row.pz, row.r, row.w, row.h),
            (t, s.x, s.z, s.px, s.pz, s.r, s.w, s.h)
        );
    }
}

#[test]
fn fig2_final_profile_has_fringes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&shipped("fig2_bell.json"), tmp.path(), &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<ProfileRow> = read_csv(&tmp.path().join("profile_final.csv")).unwrap();
    let p = IntensityProfile::new(
        rows.iter().map(|r| r.x).collect(),
        rows.iter().map(|r| r.intensity).collect(),
        0.0,
    );
    assert!(fringe_count(&p, FRINGE_PROMINENCE) >= 3);
}

#[test]
fn fig3_classical_records_caustics_and_compare_shows_contrast() {
    let tmp = tempfile::tempdir().unwrap();
    let classical = tmp.path().join("classical");
    let wave = tmp.path().join("wave");
    let out = run(&shipped("fig3_lens.json"), &classical, &["--classical"]);
    assert!([0, 2].contains(&code(&out)));
    let m: RunManifest = read_manifest(&classical).unwrap();
    assert!(!m.caustics.is_empty());
    assert_eq!(code(&run(&shipped("fig3_lens.json"), &wave, &[])), 0);

    let c = cmd_compare(&wave, &classical).unwrap();
    assert!(c.min_ratio().unwrap() >= 10.0);

    let same = bin().arg("compare").arg(&wave).arg(&wave).output().unwrap();
    assert_eq!(code(&same), 0);
    let c = cmd_compare(&wave, &wave).unwrap();
    assert_eq!(c.min_ratio(), Some(1.0));
    assert!(c.planes.iter().all(|p| p.ratio() == Some(1.0)));
}

#[test]
fn compare_rejects_missing_manifest_and_mismatched_rays() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let sa = tmp.path().join("sa");
    let sb = tmp.path().join("sb");
    fs::create_dir_all(&sa).unwrap();
    fs::create_dir_all(&sb).unwrap();
    assert_eq!(code(&run(&write_scenario(&sa, &small()), &a, &[])), 0);
    let other = Scenario { n_rays: 21, ..small() };
    assert_eq!(code(&run(&write_scenario(&sb, &other), &b, &[])), 0);

    let out = bin().arg("compare").arg(&a).arg(&b).output().unwrap();
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("ray counts differ"));
    let out = bin()
        .arg("compare")
        .arg(&a)
        .arg(tmp.path().join("nowhere"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn invalid_scenarios_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let even = Scenario { n_rays: 8, ..small() };
    let out = run(&write_scenario(tmp.path(), &even), &tmp.path().join("o"), &[]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_rays"));

    let text = small()
        .to_json_pretty()
        .replacen("\"z_max\"", "\"zmax\": 1, \"z_max\"", 1);
    let path = tmp.path().join("unknown.json");
    fs::write(&path, text).unwrap();
    assert_eq!(code(&run(&path, &tmp.path().join("o"), &[])), 1);
    assert_eq!(
        code(&run(&tmp.path().join("absent.json"), &tmp.path().join("o"), &[])),
        1
    );

    let out = run(
        &shipped("fig1_gaussian.json"),
        &tmp.path().join("o"),
        &["--classical", "--relativistic"],
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn runtime_error_exits_two_and_keeps_partial_record() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("x,z,V\n");
    for x in [-10.0, 10.0] {
        for z in [-1.0, 300.0] {
            csv += &format!("{x},{z},0\n");
        }
    }
    fs::write(tmp.path().join("grid.csv"), csv).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&small().to_json_pretty()).unwrap();
    json["potential"] = serde_json::json!({ "kind": { "TabulatedGrid": { "csv": "grid.csv" } } });
    let path = tmp.path().join("grid.json");
    fs::write(&path, json.to_string()).unwrap();

    let dir = tmp.path().join("run");
    let out = run(&path, &dir, &[]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let m = read_manifest(&dir).unwrap();
    assert!(m.error.unwrap().contains("outside"));
    let rows: Vec<TrajectoryRow> = read_csv(&dir.join("trajectories.csv")).unwrap();
    assert!(rows.len() >= 2 * 41);
    assert!(m.files.iter().all(|f| dir.join(f).exists()));
}

#[test]
fn validate_energy_passes() {
    let out = bin().args(["validate", "energy"]).output().unwrap();
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().next().unwrap().starts_with("PASS 4 energy conservation"));
}

#[test]
fn bad_suite_and_thread_settings_exit_one() {
    assert_eq!(code(&bin().args(["validate", "everything"]).output().unwrap()), 1);
    let out = bin()
        .args(["validate", "waist"])
        .env("DBS_TRAJ_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    let out = bin()
        .args(["validate", "waist"])
        .env("DBS_TRAJ_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
}
