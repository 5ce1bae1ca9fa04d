#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use netcal::format::{save_dataset, write_json, PosesFile};
use netcal_core::dataset::Dataset;
use netcal_core::sim::{preset_scene, Preset, SyntheticScene};

pub fn netcal(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netcal"))
        .arg("--out")
        .arg(out)
        .args(["--log-level", "warn"])
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Writes `dataset.json` and `ground_truth.json` for a preset scene.
pub fn write_scene(dir: &Path, preset: Preset, sigma: f64, seed: u64) -> SyntheticScene {
    let scene = preset_scene(preset, sigma, None, seed).unwrap();
    save_dataset(&dir.join("dataset.json"), &scene.dataset).unwrap();
    write_json(
        &dir.join("ground_truth.json"),
        &PosesFile::from_truth(&scene.truth, &scene.dataset.patterns),
    )
    .unwrap();
    scene
}

/// Two independent mult1 scenes with disjoint ids.
pub fn two_islands(seed: u64) -> Dataset {
    let a = preset_scene(Preset::Mult1, 0.5, None, seed).unwrap().dataset;
    let b = preset_scene(Preset::Mult1, 0.5, None, seed + 1).unwrap().dataset;
    let (nc, np, nt) = (a.cameras.len() as u32, a.patterns.len() as u32, a.time_count);
    let mut d = a.clone();
    for (id, k) in &b.cameras {
        d.cameras.insert(id + nc, *k);
    }
    for (id, g) in &b.patterns {
        let mut g = g.clone();
        g.pattern_id = id + np;
        d.patterns.insert(id + np, g);
    }
    for det in &b.detections {
        let mut det = det.clone();
        det.camera_id += nc;
        det.pattern_id += np;
        det.time_id += nt;
        d.detections.push(det);
    }
    d.time_count = nt + b.time_count;
    d
}
