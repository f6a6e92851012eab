use std::fs;
use std::path::PathBuf;

use dbs_traj_core::validation::{fig1_gaussian, fig2_bell, fig3_lens};
use dbs_traj_core::{load_scenario, run, Error, Mode, Scenario};

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

#[test]
fn shipped_files_match_presets() {
    for (name, preset) in [
        ("fig1_gaussian.json", fig1_gaussian()),
        ("fig2_bell.json", fig2_bell()),
        ("fig3_lens.json", fig3_lens()),
    ] {
        let vs = load_scenario(&shipped(name)).unwrap();
        assert_eq!(vs.scenario(), &preset, "{name}");
    }
}

#[test]
fn json_round_trip() {
    for s in [fig1_gaussian(), fig2_bell(), fig3_lens()] {
        assert_eq!(Scenario::from_json_str(&s.to_json_pretty()).unwrap(), s);
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let text = fig1_gaussian().to_json_pretty();
    let top = text.replacen("\"epsilon\"", "\"colour\": 1, \"epsilon\"", 1);
    let nested = text.replacen("\"safety\"", "\"tolerance\": 1, \"safety\"", 1);
    for bad in [top, nested] {
        match Scenario::from_json_str(&bad) {
            Err(Error::InvalidConfig { field, reason }) => {
                assert_eq!(field, "scenario");
                assert!(reason.contains("unknown field"), "{reason}");
            }
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
    }
}

fn grid_csv(z_top: f64) -> String {
    let mut s = String::from("x,z,V\n");
    for ix in 0..=20 {
        for iz in 0..=4 {
            let x = -10.0 + ix as f64;
            let z = -1.0 + iz as f64 * (z_top + 1.0) / 4.0;
            s += &format!("{x},{z},7.5\n");
        }
    }
    s
}

fn grid_scenario(dir: &std::path::Path, z_max: f64) -> PathBuf {
    let mut s = fig1_gaussian();
    s.mode = Mode::Classical;
    s.n_rays = 21;
    s.z_max = z_max;
    let mut json: serde_json::Value = serde_json::from_str(&s.to_json_pretty()).unwrap();
    json["potential"] = serde_json::json!({ "kind": { "TabulatedGrid": { "csv": "grid.csv" } } });
    let path = dir.join("grid.json");
    fs::write(&path, json.to_string()).unwrap();
    path
}

#[test]
fn flat_csv_grid_gives_straight_rays() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("grid.csv"), grid_csv(5000.0)).unwrap();
    let vs = load_scenario(&grid_scenario(dir.path(), 2000.0)).unwrap();
    let rec = run(&vs).into_result().unwrap();
    for s in &rec.samples {
        for (r, &label) in s.rays.iter().zip(&rec.labels) {
            assert_eq!(r.x, label);
            assert_eq!(r.px, 0.0);
        }
    }
}

#[test]
fn leaving_the_grid_is_a_runtime_error_with_partial_record() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("grid.csv"), grid_csv(500.0)).unwrap();
    let vs = load_scenario(&grid_scenario(dir.path(), 2000.0)).unwrap();
    let out = run(&vs);
    assert!(matches!(out.error, Some(Error::OutOfGrid { .. })), "{:?}", out.error);
    assert!(out.record.samples.len() >= 2);
    let last = out.record.samples.last().unwrap();
    assert!(last.rays[10].z > 0.0 && last.rays[10].z <= 500.0);
}

#[test]
fn grid_with_hole_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let text: String = grid_csv(5000.0).lines().take(52).collect::<Vec<_>>().join("\n");
    fs::write(dir.path().join("grid.csv"), text).unwrap();
    match load_scenario(&grid_scenario(dir.path(), 2000.0)) {
        Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "potential"),
        other => panic!("expected InvalidConfig, got {other:?}"),
    }
}
