//! Command-line behavior: input validation, exit codes and artifact contents.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use nonplanar_cli::commands::{solve_model, write_artifacts};
use nonplanar_cli::config::{load_track, load_vehicle};
use nonplanar_cli::output::CSV_COLUMNS;
use nonplanar_cli::{load_configs, RunPaths};
use nonplanar_core::surface::{Surface, SurfaceConfig};
use nonplanar_nlp::check_kkt;

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn nonplanar(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_nonplanar"))
        .args(args)
        .env_remove("RACELINE_LOG")
        .output()
        .unwrap()
}

fn vehicle_json() -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(repo("vehicles/default.json")).unwrap()).unwrap()
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn shipped_vehicle_file_holds_the_reference_car() {
    let v = load_vehicle(&repo("vehicles/default.json")).unwrap();
    assert_eq!(v.m, 2303.0);
    assert_eq!(v.l_f, 1.52);
    assert_eq!(v.tire.mu, 0.75);
    assert_eq!(v.n_max, 40000.0);
}

#[test]
fn missing_vehicle_mass_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = vehicle_json();
    v.as_object_mut().unwrap().remove("m");
    let path = dir.path().join("v.json");
    fs::write(&path, v.to_string()).unwrap();
    let e = load_vehicle(&path).unwrap_err().to_string();
    assert!(e.contains("missing field `m`"), "{e}");

    let out = nonplanar(&[
        "raceline",
        "--track",
        repo("tracks/l_track.json").to_str().unwrap(),
        "--vehicle",
        path.to_str().unwrap(),
        "--model",
        "kinematic",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`m`"));
}

#[test]
fn unknown_vehicle_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = vehicle_json();
    v.as_object_mut().unwrap().insert("mass".into(), 1.0.into());
    let path = dir.path().join("v.json");
    fs::write(&path, v.to_string()).unwrap();
    let e = load_vehicle(&path).unwrap_err().to_string();
    assert!(e.contains("unknown field `mass`"), "{e}");
}

#[test]
fn tube_wider_than_its_radius_cites_the_arc_domain() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = SurfaceConfig::flat_straight(50.0, 5.0);
    cfg.cross_curvature = 0.2;
    let path = dir.path().join("t.json");
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let e = load_track(&path).unwrap_err().to_string();
    assert!(e.contains("arc cross-section domain"), "{e}");
    assert!(e.contains("must be < 1"), "{e}");
}

#[test]
fn unknown_model_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = nonplanar(&[
        "raceline",
        "--track",
        repo("tracks/l_track.json").to_str().unwrap(),
        "--vehicle",
        repo("vehicles/default.json").to_str().unwrap(),
        "--model",
        "unicycle",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_inputs_on_a_flat_straight_keep_speed_and_lane() {
    let dir = tempfile::tempdir().unwrap();
    let track = dir.path().join("straight.json");
    fs::write(
        &track,
        serde_json::to_string(&SurfaceConfig::flat_straight(60.0, 4.0)).unwrap(),
    )
    .unwrap();
    for model in ["two_track", "kinematic", "dynamic_bicycle"] {
        let out = nonplanar(&[
            "simulate",
            "--track",
            track.to_str().unwrap(),
            "--vehicle",
            repo("vehicles/default.json").to_str().unwrap(),
            "--model",
            model,
            "--speed",
            "12",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let text = fs::read_to_string(dir.path().join(format!("{model}_simulation.csv"))).unwrap();
        let (header, rows) = parse_csv(&text);
        assert!(rows.len() > 100);
        let speed: Vec<f64> = rows.iter().map(|r| r[col(&header, "v1")].parse().unwrap()).collect();
        let lane: Vec<f64> = rows.iter().map(|r| r[col(&header, "y")].parse().unwrap()).collect();
        assert!(speed.iter().all(|v| (v - 12.0).abs() < 1e-9), "{model}");
        assert!(lane.iter().all(|y| y.abs() < 1e-9), "{model}");
        let last_s: f64 = rows.last().unwrap()[col(&header, "s")].parse().unwrap();
        assert!(last_s >= 60.0 - 1e-9);
    }
}

#[test]
fn raceline_artifacts_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let paths = RunPaths {
        track: repo("tracks/tube_turn.json"),
        vehicle: repo("vehicles/default.json"),
        models: vec!["two_track".into()],
        intervals: Some(12),
        out_dir: dir.path().to_path_buf(),
        guess_factors: Some(vec![1.0]),
        ..RunPaths::default()
    };
    let cfg = load_configs(&paths).unwrap();
    let surface = Surface::build(cfg.track.clone()).unwrap();
    let run = solve_model(cfg.models[0], &surface, &cfg).unwrap();
    assert!(run.solved());
    let artifacts = write_artifacts(dir.path(), &run, "tube_turn").unwrap();
    assert_eq!(artifacts.summary.residuals, check_kkt(&run.problem, &run.solution));
    assert_eq!(artifacts.summary.residuals, run.solution.kkt);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("two_track_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["partial"], false);
    assert_eq!(summary["iterations"], run.solution.iterations);
    assert!((summary["lap_time"].as_f64().unwrap() - run.raceline.as_ref().unwrap().lap_time).abs() < 1e-12);

    let text = fs::read_to_string(dir.path().join("two_track_raceline.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));
    let (header, rows) = parse_csv(&text);
    let samples = &run.raceline.as_ref().unwrap().trajectory.samples;
    assert_eq!(rows.len(), samples.len());
    for (row, sample) in rows.iter().zip(samples) {
        let get = |name: &str| -> f64 { row[col(&header, name)].parse().unwrap() };
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-8 * b.abs().max(1.0);
        assert!(close(get("t"), sample.t));
        assert!(close(get("s"), sample.z[0]) && close(get("y"), sample.z[1]));
        assert!(close(get("N_fl"), sample.normals[1]));
        assert!(close(get("sigma_rl"), sample.u[3]));
        // Global position re-derived from the surface at (s, y) and offset n.
        let (s, y, n) = (get("s"), get("y"), get("n"));
        let jet = surface.jet_direct(s, y);
        let (xp, en) = (jet.x_p.values(), jet.e_n.values());
        for k in 0..3 {
            let expect = xp[k] + n * en[k];
            let found = get(&format!("x_g{}", k + 1));
            assert!((found - expect).abs() < 1e-6, "x_g{}: {found} vs {expect}", k + 1);
        }
    }
    let svg = fs::read_to_string(dir.path().join("two_track_raceline.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains(r#"id="track""#) && svg.contains(r#"id="path""#));
    assert!(svg.contains(&format!("lap time {:.3} s", artifacts.summary.lap_time)));
}

#[test]
fn bicycle_csv_leaves_tire_columns_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = nonplanar(&[
        "raceline",
        "--track",
        repo("tracks/l_track.json").to_str().unwrap(),
        "--vehicle",
        repo("vehicles/default.json").to_str().unwrap(),
        "--model",
        "kinematic",
        "--intervals",
        "10",
        "--guess-factors",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = parse_csv(&fs::read_to_string(dir.path().join("kinematic_raceline.csv")).unwrap());
    for name in [
        "N_fr", "N_fl", "N_rr", "N_rl", "sigma_fr", "sigma_fl", "sigma_rr", "sigma_rl",
    ] {
        assert!(rows.iter().all(|r| r[col(&header, name)].is_empty()), "{name}");
    }
    assert!(rows.iter().all(|r| !r[col(&header, "gamma")].is_empty()));
}

#[test]
fn solver_failure_writes_labeled_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = nonplanar(&[
        "raceline",
        "--track",
        repo("tracks/l_track.json").to_str().unwrap(),
        "--vehicle",
        repo("vehicles/default.json").to_str().unwrap(),
        "--model",
        "two_track",
        "--intervals",
        "10",
        "--max-iterations",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("two_track_raceline.partial.csv").exists());
    assert!(!dir.path().join("two_track_raceline.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("two_track_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["partial"], true);
    assert_eq!(summary["status"], "max_iterations");
}

#[test]
fn compare_writes_a_table_for_the_selected_models() {
    let dir = tempfile::tempdir().unwrap();
    let out = nonplanar(&[
        "compare",
        "--track",
        repo("tracks/l_track.json").to_str().unwrap(),
        "--vehicle",
        repo("vehicles/default.json").to_str().unwrap(),
        "--models",
        "kinematic,kinematic_planar",
        "--intervals",
        "10",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("kinematic,solved,false,") && lines[2].starts_with("kinematic_planar,solved,false,"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("kinematic_planar"));
}

fn schema(name: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(repo(&format!("schemas/{name}.schema.json"))).unwrap()).unwrap()
}

fn keys(v: &serde_json::Value) -> Vec<String> {
    let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
    k.sort();
    k
}

/// Property names, required names, and closedness of an object schema.
fn schema_shape(s: &serde_json::Value) -> (Vec<String>, Vec<String>, bool) {
    let mut required: Vec<String> = s["required"]
        .as_array()
        .map(|a| a.iter().map(|v| v.as_str().unwrap().to_string()).collect())
        .unwrap_or_default();
    required.sort();
    (keys(&s["properties"]), required, s["additionalProperties"] == false)
}

#[test]
fn schemas_describe_the_loaded_structures() {
    // Serialized defaults list every field the loaders accept.
    let cases = [
        (
            "track",
            serde_json::to_value(SurfaceConfig::flat_straight(10.0, 2.0)).unwrap(),
        ),
        (
            "vehicle",
            serde_json::to_value(nonplanar_core::params::VehicleParams::default()).unwrap(),
        ),
        (
            "options",
            serde_json::to_value(nonplanar_raceline::CollocationOptions::default()).unwrap(),
        ),
        (
            "schedule",
            serde_json::to_value(nonplanar_core::simulation::InputSchedule::constant(vec![0.0; 2])).unwrap(),
        ),
    ];
    for (name, value) in cases {
        let s = schema(name);
        let (props, required, closed) = schema_shape(&s);
        assert!(closed, "{name}");
        assert_eq!(props, keys(&value), "{name}");
        // A document holding only the required keys must load, so nothing else is mandatory.
        let minimal: serde_json::Map<String, serde_json::Value> =
            required.iter().map(|k| (k.clone(), value[k].clone())).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.json");
        fs::write(&path, serde_json::Value::Object(minimal).to_string()).unwrap();
        let loaded = match name {
            "track" => load_track(&path).map(|_| ()),
            "vehicle" => load_vehicle(&path).map(|_| ()),
            "options" => nonplanar_cli::config::load_options(&path).map(|_| ()),
            _ => nonplanar_cli::config::load_schedule(&path).map(|_| ()),
        };
        assert!(loaded.is_ok(), "{name}: {loaded:?}");
        // Dropping any required key must fail.
        for k in &required {
            let mut doc = value.clone();
            doc.as_object_mut().unwrap().remove(k);
            fs::write(&path, doc.to_string()).unwrap();
            let e = match name {
                "track" => load_track(&path).map(|_| ()),
                "vehicle" => load_vehicle(&path).map(|_| ()),
                "options" => nonplanar_cli::config::load_options(&path).map(|_| ()),
                _ => nonplanar_cli::config::load_schedule(&path).map(|_| ()),
            };
            assert!(e.is_err(), "{name}: `{k}` is listed as required");
        }
    }
    let vehicle = schema("vehicle");
    for (def, value) in [
        (
            "tire",
            serde_json::to_value(nonplanar_core::tire::TireParams::default()).unwrap(),
        ),
        (
            "drag",
            serde_json::to_value(nonplanar_core::params::DragParams::default()).unwrap(),
        ),
    ] {
        let (props, _, closed) = schema_shape(&vehicle["definitions"][def]);
        assert!(closed);
        assert_eq!(props, keys(&value), "{def}");
    }
    // Shipped inputs only use documented keys.
    for (name, file) in [
        ("track", "tracks/l_track.json"),
        ("track", "tracks/tube_turn.json"),
        ("vehicle", "vehicles/default.json"),
    ] {
        let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(repo(file)).unwrap()).unwrap();
        let (props, required, _) = schema_shape(&schema(name));
        assert!(keys(&doc).iter().all(|k| props.contains(k)), "{file}");
        assert!(required.iter().all(|k| doc.get(k).is_some()), "{file}");
    }
}
