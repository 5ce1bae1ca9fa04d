mod common;

use std::fs;

use common::{netcal, path_str, two_islands, write_scene};
use nalgebra::Vector3;
use netcal::format::{load_dataset, save_dataset, DatasetFile, PosesFile};
use netcal::ply::{parse_ascii, PYRAMID_VERTICES};
use netcal::report::{CalibrationReport, MetricsReport, ScheduleRecord};
use netcal::FormatError;
use netcal_core::connectivity::{build_interaction_graph, connected_components, select_reference};
use netcal_core::dataset::build_frs;
use netcal_core::error::ValidationIssue;
use netcal_core::init::{run_initialization, InitConfig};
use netcal_core::sim::{generate_scene, Preset};
use netcal_core::{Error, ObsKey};
use tempfile::tempdir;

fn read<T: serde::de::DeserializeOwned>(p: &std::path::Path) -> T {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn noiseless_net1_calibrates_exactly() {
    let dir = tempdir().unwrap();
    write_scene(dir.path(), Preset::Net1, 0.0, 1);
    let out = dir.path().join("cal");
    let o = netcal(&out, &["calibrate", path_str(&dir.path().join("dataset.json"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: CalibrationReport = read(&out.join("report.json"));
    assert!(report.step5.rrmse < 1e-6);
    assert_eq!(report.components, 1);
    let r = report.reference;
    assert_eq!(report.poses[&format!("P{}", r.pattern)], netcal_core::Pose::identity().to_rows());
    assert_eq!(report.poses[&format!("T{}", r.time)], netcal_core::Pose::identity().to_rows());
    for f in ["solution.json", "solution_step4.json", "timing.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn mult1_report_shows_a_pair_solve() {
    let dir = tempdir().unwrap();
    write_scene(dir.path(), Preset::Mult1, 0.5, 2);
    let log = dir.path().join("init.jsonl");
    let o = netcal(
        dir.path(),
        &["calibrate", path_str(&dir.path().join("dataset.json")), "--log-init", path_str(&log)],
    );
    assert!(o.status.success());
    let report: CalibrationReport = read(&dir.path().join("report.json"));
    assert!(report.schedule.pair_solves >= 1);
    let lines: Vec<ScheduleRecord> = fs::read_to_string(&log)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), report.schedule.steps);
    assert_eq!(lines[0].task_kind, "seed");
    assert!(lines.iter().any(|l| l.task_kind == "pair" && l.variables.len() == 2));
}

#[test]
fn two_islands_exit_2_and_each_calibrates() {
    let dir = tempdir().unwrap();
    let data = dir.path().join("dataset.json");
    save_dataset(&data, &two_islands(4)).unwrap();
    let dot = dir.path().join("graph.dot");
    let o = netcal(dir.path(), &["calibrate", path_str(&data), "--emit-graph", path_str(&dot)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("2 components"));
    assert!(fs::read_to_string(&dot).unwrap().starts_with("graph interaction {"));
    for k in ["0", "1"] {
        let out = dir.path().join(k);
        let o = netcal(&out, &["calibrate", path_str(&data), "--component", k]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let report: CalibrationReport = read(&out.join("report.json"));
        assert_eq!(report.components, 1);
        assert_eq!(report.relationships, 20);
    }
}

#[test]
fn stalled_schedule_exits_3() {
    let scene = (0..40)
        .map(|seed| generate_scene(&Preset::Sim1.config(seed)).unwrap())
        .find(|s| {
            let frs = build_frs(&s.dataset, 5.0).unwrap();
            let one = connected_components(&build_interaction_graph(&frs).unwrap()).count == 1;
            one && matches!(
                run_initialization(&frs, select_reference(&frs).unwrap(), &InitConfig::default()),
                Err(Error::Stuck { .. })
            )
        })
        .expect("a stalled draw among 40");
    let dir = tempdir().unwrap();
    let data = dir.path().join("dataset.json");
    save_dataset(&data, &scene.dataset).unwrap();
    let o = netcal(dir.path(), &["calibrate", path_str(&data)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("uninitialized"));
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempdir().unwrap();
    write_scene(dir.path(), Preset::Net1, 0.5, 6);
    let data = dir.path().join("dataset.json");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(netcal(&a, &["calibrate", path_str(&data), "--threads", "1"]).status.success());
    assert!(netcal(&b, &["calibrate", path_str(&data), "--threads", "4"]).status.success());
    for f in ["report.json", "solution.json", "solution_step4.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn evaluate_truth_on_noiseless_data() {
    let dir = tempdir().unwrap();
    write_scene(dir.path(), Preset::Mult3, 0.0, 3);
    let o = netcal(
        dir.path(),
        &[
            "evaluate",
            path_str(&dir.path().join("ground_truth.json")),
            path_str(&dir.path().join("dataset.json")),
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: MetricsReport = read(&dir.path().join("metrics.json"));
    assert!(m.ae < 1e-9 && m.rrmse < 1e-9 && m.rae_median < 1e-9, "{} {} {}", m.ae, m.rrmse, m.rae_median);
    assert_eq!(m.per_point.len(), m.rae_count);
}

#[test]
fn evaluate_step4_and_step5_snapshots() {
    let dir = tempdir().unwrap();
    write_scene(dir.path(), Preset::Net2, 0.5, 1);
    let data = dir.path().join("dataset.json");
    assert!(netcal(dir.path(), &["calibrate", path_str(&data)]).status.success());
    let mut rrmse = Vec::new();
    for snap in ["solution_step4.json", "solution.json"] {
        let out = dir.path().join(snap.trim_end_matches(".json"));
        let o = netcal(&out, &["evaluate", path_str(&dir.path().join(snap)), path_str(&data)]);
        assert!(o.status.success());
        rrmse.push(read::<MetricsReport>(&out.join("metrics.json")).rrmse);
    }
    assert!(rrmse[1] < rrmse[0], "{rrmse:?}");
}

#[test]
fn evaluate_without_shared_corners_fails_cleanly() {
    // every pattern seen once: no corner can be triangulated
    let scene = netcal_core::sim::preset_scene(Preset::Mult1, 0.0, None, 0).unwrap();
    let mut d = scene.dataset.clone();
    let mut seen = std::collections::BTreeSet::new();
    d.detections.retain(|det| seen.insert(det.pattern_id));
    let dir = tempdir().unwrap();
    let data = dir.path().join("dataset.json");
    save_dataset(&data, &d).unwrap();
    netcal::format::write_json(
        &dir.path().join("truth.json"),
        &PosesFile::from_truth(&scene.truth, &scene.dataset.patterns),
    )
    .unwrap();
    let o = netcal(dir.path(), &["evaluate", path_str(&dir.path().join("truth.json")), path_str(&data)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("no pattern corner is observed in two or more"), "{err}");
    assert!(!err.contains("panicked"));
}

#[test]
fn ply_counts_match_solution() {
    let dir = tempdir().unwrap();
    write_scene(dir.path(), Preset::Mult1, 0.5, 0);
    assert!(netcal(dir.path(), &["calibrate", path_str(&dir.path().join("dataset.json"))]).status.success());
    let ply = dir.path().join("scene.ply");
    let o = netcal(dir.path(), &["export-ply", path_str(&dir.path().join("solution.json")), path_str(&ply)]);
    assert!(o.status.success());
    let mesh = parse_ascii(&fs::read_to_string(&ply).unwrap()).unwrap();
    assert_eq!(mesh.vertices.len(), 2 * PYRAMID_VERTICES + 2 * 48);
    assert_eq!(mesh.faces.len(), 10);
}

#[test]
fn turntable_virtual_track_is_a_circle() {
    let dir = tempdir().unwrap();
    write_scene(dir.path(), Preset::Rot1, 0.0, 0);
    assert!(netcal(dir.path(), &["calibrate", path_str(&dir.path().join("dataset.json"))]).status.success());
    let solution: PosesFile = read(&dir.path().join("solution.json"));
    let ply = dir.path().join("virtual.ply");
    let o = netcal(
        dir.path(),
        &["export-ply", path_str(&dir.path().join("solution.json")), path_str(&ply), "--virtual"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mesh = parse_ascii(&fs::read_to_string(&ply).unwrap()).unwrap();
    let corners: usize = solution.patterns.values().map(|p| (p.rows * p.cols) as usize).sum();
    assert_eq!(mesh.vertices.len(), 61 * PYRAMID_VERTICES + corners);
    // 6° steps: apexes 0..60 cover the circle evenly and apex 60 closes it
    let apexes: Vec<Vector3<f64>> = (0..61).map(|i| Vector3::from(mesh.vertices[i * PYRAMID_VERTICES])).collect();
    assert!((apexes[60] - apexes[0]).norm() < 1e-6);
    let centroid = apexes[..60].iter().sum::<Vector3<f64>>() / 60.0;
    let radii: Vec<f64> = apexes.iter().map(|a| (a - centroid).norm()).collect();
    let (lo, hi) = radii.iter().fold((f64::MAX, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    assert!(hi - lo < 1e-6, "{lo} {hi}");
}

#[test]
fn export_without_virtual_needs_no_single_camera() {
    let dir = tempdir().unwrap();
    write_scene(dir.path(), Preset::Net1, 0.0, 0);
    let ply = dir.path().join("v.ply");
    let o = netcal(
        dir.path(),
        &["export-ply", path_str(&dir.path().join("ground_truth.json")), path_str(&ply), "--virtual"],
    );
    assert_eq!(o.status.code(), Some(1));
    let o = netcal(dir.path(), &["export-ply", path_str(&dir.path().join("ground_truth.json")), path_str(&ply)]);
    assert!(o.status.success());
}

#[test]
fn simulate_writes_both_files() {
    let dir = tempdir().unwrap();
    let o = netcal(dir.path(), &["simulate", "--preset", "net1", "--sigma", "0", "--seed", "5"]);
    assert!(o.status.success());
    let d = load_dataset(&dir.path().join("dataset.json")).unwrap();
    assert_eq!(d.cameras.len(), 12);
    let truth = netcal::format::load_poses(&dir.path().join("ground_truth.json")).unwrap();
    assert_eq!(truth.camera_poses.len(), 12);
    assert!(truth.reference.is_none());
    let bad = netcal(dir.path(), &["simulate", "--preset", "net9", "--seed", "5"]);
    assert!(!bad.status.success());
}

#[test]
fn config_overrides_are_applied_and_checked() {
    let dir = tempdir().unwrap();
    write_scene(dir.path(), Preset::Mult1, 0.5, 1);
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"max_iterations": 1}"#).unwrap();
    let data = dir.path().join("dataset.json");
    let o = netcal(dir.path(), &["--config", path_str(&cfg), "calibrate", path_str(&data)]);
    assert!(o.status.success());
    let report: CalibrationReport = read(&dir.path().join("report.json"));
    assert_eq!(report.refinement.iterations, 1);
    assert_eq!(report.refinement.termination, "max_iterations");
    fs::write(&cfg, r#"{"lambda_zero": 1}"#).unwrap();
    let o = netcal(dir.path(), &["--config", path_str(&cfg), "calibrate", path_str(&data)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn minimal_dataset_file_loads() {
    let text = r#"{
        "schema_version": 1,
        "cameras": {"0": {"fx": 800, "fy": 800, "cx": 320, "cy": 240, "width": 640, "height": 480}},
        "patterns": {"0": {"rows": 2, "cols": 2, "square_size_mm": 30}},
        "time_count": 1,
        "detections": [{"camera": 0, "pattern": 0, "time": 0,
                        "corners": [[0, 300, 200], [1, 340, 200], [2, 300, 240], [3, 340, 241]]}]
    }"#;
    let file: DatasetFile = serde_json::from_str(text).unwrap();
    let d = file.into_dataset().unwrap();
    assert_eq!(d.detections.len(), 1);
    assert_eq!(d.cameras[&0].dist, [0.0; 5]);
}

#[test]
fn duplicate_triple_is_named() {
    let scene = netcal_core::sim::preset_scene(Preset::Mult1, 0.0, None, 0).unwrap();
    let mut d = scene.dataset.clone();
    d.detections.push(d.detections[3].clone());
    let key = d.detections[3].key();
    let dir = tempdir().unwrap();
    let path = dir.path().join("dataset.json");
    save_dataset(&path, &d).unwrap();
    match load_dataset(&path) {
        Err(FormatError::Calibration(Error::Validation(issues))) => {
            assert!(issues.contains(&ValidationIssue::DuplicateTriple { key }));
            let msg = Error::Validation(issues).to_string();
            assert!(msg.contains(&ObsKey::new(key.camera, key.pattern, key.time).to_string()));
        }
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn malformed_json_is_a_schema_error() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("dataset.json");
    fs::write(&path, "{\"schema_version\": 1, \"cameras\": 3}").unwrap();
    assert!(matches!(load_dataset(&path), Err(FormatError::Json { .. })));
}

#[test]
fn save_load_is_byte_stable() {
    let dir = tempdir().unwrap();
    let scene = netcal_core::sim::preset_scene(Preset::Mult3, 0.5, None, 2).unwrap();
    let mut d = scene.dataset.clone();
    d.detections.truncate(20);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    save_dataset(&a, &d).unwrap();
    let loaded = load_dataset(&a).unwrap();
    assert_eq!(loaded, d);
    save_dataset(&b, &loaded).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}
