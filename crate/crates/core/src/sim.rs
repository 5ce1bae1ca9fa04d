//! Synthetic scenes with known ground truth: camera layouts, rigid pattern
//! rigs, rig trajectories, visibility culling and noisy corner detections.
//!
//! Scenes are emitted as corner detections, not images. Every random draw
//! comes from a ChaCha stream derived from the configured seed, so a seed
//! fully determines the output.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Matrix3, Vector2, Vector3};
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::connectivity::{
    build_interaction_graph, connected_components, select_reference, Reference, VariableId,
};
use crate::dataset::{build_frs, Corner, Dataset, Detection, PatternGeometry, DEFAULT_SANITY_GATE_PX};
use crate::error::{Error, Result};
use crate::geometry::{project_point, CameraIntrinsics, Pose};
use crate::init::{run_initialization, InitConfig, VariablePool};

const STREAM_LAYOUT: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_DROPOUT: u64 = 2;

/// Shape of the camera arrangement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Layout {
    /// Cameras on the walls of a room, looking inward.
    WallRing { cameras: u32, room: [f64; 3] },
    /// Two facing walls of cameras with the rig between them.
    TwoSided { per_side: u32 },
    /// Outward-facing cameras on a moving head; patterns fixed on the walls.
    MulticamHead { cameras: u32 },
    /// One camera watching a rig on a turntable.
    Turntable { steps: u32, step_deg: f64 },
}

/// Culling rule deciding whether a camera detects a pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Visibility {
    /// Fraction of corners that must land inside the image.
    pub min_inside_fraction: f64,
    /// Cosine between the pattern normal and the viewing ray.
    pub min_facing_cosine: f64,
}

impl Default for Visibility {
    fn default() -> Self {
        Self {
            min_inside_fraction: 0.8,
            min_facing_cosine: 0.2,
        }
    }
}

/// Fully specified synthetic scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub layout: Layout,
    /// Per camera: intrinsics and world→camera pose.
    pub cameras: Vec<(CameraIntrinsics, Pose)>,
    /// Per pattern: geometry and rig→pattern pose.
    pub patterns: Vec<(PatternGeometry, Pose)>,
    /// World→rig pose per time step.
    pub trajectory: Vec<Pose>,
    /// RMS corner displacement in pixels.
    pub noise_sigma: f64,
    /// Probability that a visible pattern is missed.
    pub dropout: f64,
    pub seed: u64,
    pub visibility: Visibility,
}

/// Ground-truth transforms keyed by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub cameras: BTreeMap<u32, Pose>,
    pub patterns: BTreeMap<u32, Pose>,
    pub times: BTreeMap<u32, Pose>,
}

impl GroundTruth {
    /// Re-expresses the truth in the gauge where pattern `p*` and time `t*`
    /// are identity. Every predicted `C·T⁻¹·P⁻¹` is unchanged.
    pub fn aligned(&self, reference: Reference) -> Result<GroundTruth> {
        let u = *self
            .patterns
            .get(&reference.pattern)
            .ok_or(Error::Uninitialized(VariableId::pattern(reference.pattern)))?;
        let t_ref = self
            .times
            .get(&reference.time)
            .ok_or(Error::Uninitialized(VariableId::time(reference.time)))?;
        let w = u.compose(t_ref).inverse();
        let u_inv = u.inverse();
        Ok(GroundTruth {
            cameras: self.cameras.iter().map(|(&k, c)| (k, c.compose(&w))).collect(),
            patterns: self
                .patterns
                .iter()
                .map(|(&k, p)| {
                    let v = if k == reference.pattern { Pose::identity() } else { p.compose(&u_inv) };
                    (k, v)
                })
                .collect(),
            times: self
                .times
                .iter()
                .map(|(&k, t)| {
                    let v = if k == reference.time {
                        Pose::identity()
                    } else {
                        u.compose(t).compose(&w).renormalized()
                    };
                    (k, v)
                })
                .collect(),
        })
    }

    /// Gauge-aligned pool over every ground-truth variable.
    pub fn to_pool(&self, reference: Reference) -> Result<VariablePool> {
        let a = self.aligned(reference)?;
        let values = a
            .cameras
            .iter()
            .map(|(&k, &v)| (VariableId::camera(k), v))
            .chain(a.patterns.iter().map(|(&k, &v)| (VariableId::pattern(k), v)))
            .chain(a.times.iter().map(|(&k, &v)| (VariableId::time(k), v)))
            .collect();
        Ok(VariablePool::from_values(values, reference))
    }

    pub fn get(&self, v: VariableId) -> Option<&Pose> {
        match v.kind {
            crate::connectivity::VariableKind::Camera => self.cameras.get(&v.index),
            crate::connectivity::VariableKind::Pattern => self.patterns.get(&v.index),
            crate::connectivity::VariableKind::Time => self.times.get(&v.index),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub truth: GroundTruth,
    /// Detections before noise and dropout.
    pub noiseless: Dataset,
    pub dataset: Dataset,
    /// Connected components of the emitted dataset (0 when empty).
    pub components: usize,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Detection of pattern `geom` seen through `a` (pattern→camera), or `None`
/// when the visibility rule rejects it. Only in-image corners are kept.
pub fn observe(
    k: &CameraIntrinsics,
    geom: &PatternGeometry,
    a: &Pose,
    vis: &Visibility,
) -> Option<Vec<Corner>> {
    let centroid = a.transform_point(&geom.center());
    let normal = a.rotation() * Vector3::z();
    let cosine = normal.dot(&centroid) / centroid.norm();
    if !(cosine > vis.min_facing_cosine) {
        return None;
    }
    let mut corners = Vec::with_capacity(geom.corner_count());
    for (i, x) in geom.corner_points().iter().enumerate() {
        let px = project_point(k, a, x).ok()?;
        if k.contains(&px) {
            corners.push(Corner {
                index: i as u32,
                pixel: px,
            });
        }
    }
    let fraction = corners.len() as f64 / geom.corner_count() as f64;
    (fraction >= vis.min_inside_fraction).then_some(corners)
}

pub fn generate_scene(cfg: &SceneConfig) -> Result<SyntheticScene> {
    let mut noiseless = Dataset {
        time_count: cfg.trajectory.len() as u32,
        ..Dataset::default()
    };
    for (i, (k, _)) in cfg.cameras.iter().enumerate() {
        noiseless.cameras.insert(i as u32, *k);
    }
    for (i, (g, _)) in cfg.patterns.iter().enumerate() {
        let mut g = g.clone();
        g.pattern_id = i as u32;
        noiseless.patterns.insert(i as u32, g);
    }
    for (t, tp) in cfg.trajectory.iter().enumerate() {
        let t_inv = tp.inverse();
        for (c, (k, cp)) in cfg.cameras.iter().enumerate() {
            for (p, (g, pp)) in cfg.patterns.iter().enumerate() {
                let a = cp.compose(&t_inv).compose(&pp.inverse());
                if let Some(corners) = observe(k, g, &a, &cfg.visibility) {
                    noiseless.detections.push(Detection {
                        camera_id: c as u32,
                        pattern_id: p as u32,
                        time_id: t as u32,
                        corners,
                    });
                }
            }
        }
    }
    if noiseless.detections.is_empty() {
        return Err(Error::InfeasibleLayout);
    }
    let dataset = perturb_detections(&noiseless, cfg.noise_sigma, cfg.dropout, cfg.seed);
    let truth = GroundTruth {
        cameras: cfg.cameras.iter().enumerate().map(|(i, c)| (i as u32, c.1)).collect(),
        patterns: cfg.patterns.iter().enumerate().map(|(i, p)| (i as u32, p.1)).collect(),
        times: cfg.trajectory.iter().enumerate().map(|(i, t)| (i as u32, *t)).collect(),
    };
    Ok(SyntheticScene {
        truth,
        components: component_count(&dataset),
        noiseless,
        dataset,
    })
}

/// Number of connected components of the dataset's interaction graph.
pub fn component_count(d: &Dataset) -> usize {
    let frs: Vec<_> = d
        .detections
        .iter()
        .map(|det| {
            let mut f = crate::dataset::FoundationalRelationship {
                camera: det.camera_id,
                pattern: det.pattern_id,
                time: det.time_id,
                a: Pose::identity(),
                detection: det.clone(),
                rmse: 0.0,
            };
            f.detection.corners.clear();
            f
        })
        .collect();
    match build_interaction_graph(&frs) {
        Ok(g) => connected_components(&g).count,
        Err(_) => 0,
    }
}

/// Adds isotropic Gaussian noise (RMS displacement `sigma` px, i.e.
/// `sigma/√2` per coordinate) and drops whole detections with probability
/// `dropout`.
pub fn perturb_detections(d: &Dataset, sigma: f64, dropout: f64, seed: u64) -> Dataset {
    let mut noise_rng = rng_for(seed, STREAM_NOISE);
    let mut drop_rng = rng_for(seed, STREAM_DROPOUT);
    let normal = Normal::new(0.0, sigma.max(0.0) / 2.0.sqrt()).unwrap_or_else(|_| Normal::new(0.0, 0.0).unwrap());
    let mut out = d.clone();
    out.detections.clear();
    for det in &d.detections {
        let keep = drop_rng.random::<f64>() >= dropout;
        let mut det = det.clone();
        if sigma > 0.0 {
            for c in &mut det.corners {
                c.pixel += Vector2::new(normal.sample(&mut noise_rng), normal.sample(&mut noise_rng));
            }
        }
        if keep {
            out.detections.push(det);
        }
    }
    out
}

/// World→camera pose of a camera at `eye` looking at `target`, with image
/// `y` pointing away from `up`.
pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Pose {
    let z = (target - eye).normalize();
    let mut x = z.cross(&up);
    if x.norm() < 1e-9 {
        x = z.cross(&Vector3::x());
    }
    let x = x.normalize();
    let y = z.cross(&x);
    let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    Pose::from_parts(r, -(r * eye))
}

/// Rig→pattern pose of a board centered at `center` on a surface with
/// outward normal `outward` (rig frame). The pattern's `+z` points into the
/// surface, so cameras on the outward side see its front.
pub fn board_pose(
    geom: &PatternGeometry,
    center: Vector3<f64>,
    outward: Vector3<f64>,
    up: Vector3<f64>,
) -> Pose {
    let z = -outward.normalize();
    let mut x = up.cross(&z);
    if x.norm() < 1e-9 {
        x = Vector3::x().cross(&z);
    }
    let x = x.normalize();
    let y = z.cross(&x);
    let m = Matrix3::from_columns(&[x, y, z]);
    let origin = center - m * geom.center();
    Pose::from_parts(m, origin).inverse()
}

fn rot(axis: Vector3<f64>, deg: f64) -> Pose {
    Pose::from_axis_angle(axis, deg.to_radians(), Vector3::zeros())
}

fn uniform<R: Rng>(rng: &mut R, half: f64) -> f64 {
    rng.random_range(-half..=half)
}

/// Rig→world pose with random position, yaw and small tilts.
fn random_placement<R: Rng>(
    rng: &mut R,
    center: Vector3<f64>,
    extent: Vector3<f64>,
    yaw_deg: (f64, f64),
    tilt_deg: f64,
) -> Pose {
    let p = center
        + Vector3::new(
            uniform(rng, extent.x),
            uniform(rng, extent.y),
            uniform(rng, extent.z),
        );
    let yaw = yaw_deg.0 + uniform(rng, yaw_deg.1);
    let r = rot(Vector3::z(), yaw)
        .compose(&rot(Vector3::x(), uniform(rng, tilt_deg)))
        .compose(&rot(Vector3::y(), uniform(rng, tilt_deg)));
    Pose::from_parts(*r.rotation(), p)
}

/// Named scene shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Preset {
    Sim1,
    Sim2,
    Net1,
    Net2,
    Mult1,
    Mult2,
    Mult3,
    Rot1,
    Rot2,
}

impl Preset {
    pub const ALL: [Preset; 9] = [
        Preset::Sim1,
        Preset::Sim2,
        Preset::Net1,
        Preset::Net2,
        Preset::Mult1,
        Preset::Mult2,
        Preset::Mult3,
        Preset::Rot1,
        Preset::Rot2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Sim1 => "sim1",
            Preset::Sim2 => "sim2",
            Preset::Net1 => "net1",
            Preset::Net2 => "net2",
            Preset::Mult1 => "mult1",
            Preset::Mult2 => "mult2",
            Preset::Mult3 => "mult3",
            Preset::Rot1 => "rot1",
            Preset::Rot2 => "rot2",
        }
    }

    pub fn parse(s: &str) -> Option<Preset> {
        Preset::ALL.iter().copied().find(|p| p.name() == s)
    }

    /// `(cameras, patterns, times, relationships)` of the dataset this
    /// preset imitates.
    pub fn target_shape(&self) -> (u32, u32, u32, usize) {
        match self {
            Preset::Sim1 => (8, 4, 43, 87),
            Preset::Sim2 => (16, 4, 37, 472),
            Preset::Net1 => (12, 2, 10, 107),
            Preset::Net2 => (12, 2, 20, 211),
            Preset::Mult1 => (2, 2, 10, 20),
            Preset::Mult2 => (2, 2, 10, 20),
            Preset::Mult3 => (4, 3, 24, 72),
            Preset::Rot1 => (1, 8, 61, 162),
            Preset::Rot2 => (1, 8, 62, 163),
        }
    }

    /// Noiseless configuration for `seed`.
    pub fn config(&self, seed: u64) -> SceneConfig {
        let mut rng = rng_for(seed, STREAM_LAYOUT);
        let (layout, cameras, patterns, trajectory, dropout) = match self {
            Preset::Sim1 => room_scene(&mut rng, 8, 43, false),
            Preset::Sim2 => room_scene(&mut rng, 16, 37, true),
            Preset::Net1 => net_scene(&mut rng, 10),
            Preset::Net2 => net_scene(&mut rng, 20),
            Preset::Mult1 => head_scene(&mut rng, *self),
            Preset::Mult2 => head_scene(&mut rng, *self),
            Preset::Mult3 => head_scene(&mut rng, *self),
            Preset::Rot1 => turntable_scene(&mut rng, 61, 300.0),
            Preset::Rot2 => turntable_scene(&mut rng, 62, 650.0),
        };
        SceneConfig {
            layout,
            cameras,
            patterns,
            trajectory,
            noise_sigma: 0.0,
            dropout,
            seed,
            visibility: Visibility::default(),
        }
    }
}

impl core::fmt::Display for Preset {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

type Parts = (
    Layout,
    Vec<(CameraIntrinsics, Pose)>,
    Vec<(PatternGeometry, Pose)>,
    Vec<Pose>,
    f64,
);

/// Boards on the four sides of a box centered on the rig origin.
fn box_rig(geom: &PatternGeometry, half_width: f64) -> Vec<(PatternGeometry, Pose)> {
    (0..4)
        .map(|i| {
            let a = f64::from(i) * PI / 2.0;
            let n = Vector3::new(a.cos(), a.sin(), 0.0);
            let mut g = geom.clone();
            g.pattern_id = i;
            let pose = board_pose(&g, n * half_width, n, Vector3::z());
            (g, pose)
        })
        .collect()
}

fn room_scene<R: Rng>(rng: &mut R, n_cameras: u32, n_times: u32, two_rings: bool) -> Parts {
    let room = [8000.0, 8000.0, 3000.0];
    let (focal, spread, dropout) = if two_rings { (1600.0, 1500.0, 0.2) } else { (1400.0, 1500.0, 0.78) };
    let k = CameraIntrinsics::pinhole(focal, focal, 640.0, 480.0, 1280, 960);
    let per_ring = if two_rings { n_cameras / 2 } else { n_cameras };
    let cameras = (0..n_cameras)
        .map(|i| {
            let ring = i / per_ring;
            let a = 2.0 * PI * f64::from(i % per_ring) / f64::from(per_ring) + f64::from(ring) * PI / f64::from(per_ring);
            let radius = 0.5 * room[0] - 200.0;
            let height = if ring == 0 { 2500.0 } else { 1200.0 };
            let eye = Vector3::new(radius * a.cos(), radius * a.sin(), height);
            let target = Vector3::new(uniform(rng, spread), uniform(rng, spread), 1000.0);
            (k, look_at(eye, target, Vector3::z()))
        })
        .collect();
    let geom = PatternGeometry::new(0, 6, 8, 50.0);
    let patterns = box_rig(&geom, 200.0);
    let trajectory = (0..n_times)
        .map(|_| {
            random_placement(
                rng,
                Vector3::new(0.0, 0.0, 1100.0),
                Vector3::new(2000.0, 2000.0, 300.0),
                (0.0, 180.0),
                15.0,
            )
            .inverse()
        })
        .collect();
    (
        Layout::WallRing {
            cameras: n_cameras,
            room,
        },
        cameras,
        patterns,
        trajectory,
        dropout,
    )
}

fn net_scene<R: Rng>(rng: &mut R, n_times: u32) -> Parts {
    let k = CameraIntrinsics::pinhole(1400.0, 1400.0, 800.0, 600.0, 1600, 1200)
        .with_distortion([-0.05, 0.01, 0.0, 0.0, 0.0]);
    let mut cameras = Vec::new();
    for side in [-1.0, 1.0] {
        for row in 0..2 {
            for col in 0..3 {
                let eye = Vector3::new(
                    f64::from(col - 1) * 1000.0,
                    side * 2200.0,
                    900.0 + f64::from(row) * 900.0,
                );
                let target = Vector3::new(uniform(rng, 200.0), 0.0, 1300.0 + uniform(rng, 200.0));
                cameras.push((k, look_at(eye, target, Vector3::z())));
            }
        }
    }
    let geom = PatternGeometry::new(0, 6, 8, 60.0);
    let patterns = (0..2)
        .map(|i| {
            let n = if i == 0 { -Vector3::y() } else { Vector3::y() };
            let mut g = geom.clone();
            g.pattern_id = i;
            let pose = board_pose(&g, n * 20.0, n, Vector3::z());
            (g, pose)
        })
        .collect();
    let trajectory = (0..n_times)
        .map(|_| {
            random_placement(
                rng,
                Vector3::new(0.0, 0.0, 1300.0),
                Vector3::new(500.0, 300.0, 300.0),
                (0.0, 30.0),
                15.0,
            )
            .inverse()
        })
        .collect();
    (Layout::TwoSided { per_side: 6 }, cameras, patterns, trajectory, 0.0)
}

/// Cameras on a head (world = head frame) and boards on the room walls
/// (rig = room frame); `T` is the head pose in the room.
fn head_scene<R: Rng>(rng: &mut R, preset: Preset) -> Parts {
    let k = CameraIntrinsics::pinhole(900.0, 900.0, 640.0, 480.0, 1280, 960);
    let (n_cameras, walls, n_times): (u32, &[f64], u32) = match preset {
        Preset::Mult3 => (4, &[0.0, 90.0, 180.0], 24),
        // board 1 on the +x wall, board 0 on the -x wall
        _ => (2, &[180.0, 0.0], 10),
    };
    let cameras = (0..n_cameras)
        .map(|i| {
            let a = (f64::from(i) * 360.0 / f64::from(n_cameras)).to_radians();
            let dir = Vector3::new(a.cos(), a.sin(), 0.0);
            (k, look_at(dir * 100.0, dir * 1000.0, Vector3::z()))
        })
        .collect();
    let geom = PatternGeometry::new(0, 6, 8, 50.0);
    let patterns = walls
        .iter()
        .enumerate()
        .map(|(i, &deg)| {
            let a = deg.to_radians();
            let dir = Vector3::new(a.cos(), a.sin(), 0.0);
            let mut g = geom.clone();
            g.pattern_id = i as u32;
            let pose = board_pose(&g, dir * 1500.0, -dir, Vector3::z());
            (g, pose)
        })
        .collect();
    let trajectory = (0..n_times)
        .map(|t| {
            let heading = match preset {
                Preset::Mult2 if t >= n_times / 2 => 180.0,
                Preset::Mult3 => f64::from(t % 4) * 90.0,
                _ => 0.0,
            };
            random_placement(
                rng,
                Vector3::zeros(),
                Vector3::new(300.0, 300.0, 100.0),
                (heading, 15.0),
                10.0,
            )
        })
        .collect();
    (
        Layout::MulticamHead { cameras: n_cameras },
        cameras,
        patterns,
        trajectory,
        0.0,
    )
}

/// Two stacked cubes, the upper one turned by 45°, each carrying four
/// boards; the turntable advances 6° per step.
fn turntable_scene<R: Rng>(rng: &mut R, steps: u32, camera_height: f64) -> Parts {
    let step_deg = 6.0;
    let k = CameraIntrinsics::pinhole(1600.0, 1600.0, 960.0, 540.0, 1920, 1080)
        .with_distortion([-0.03, 0.0, 0.0, 0.0, 0.0]);
    let eye = Vector3::new(1600.0 + uniform(rng, 50.0), uniform(rng, 50.0), camera_height);
    let cameras = alloc::vec![(k, look_at(eye, Vector3::new(0.0, 0.0, 300.0), Vector3::z()))];
    let geom = PatternGeometry::new(0, 6, 8, 30.0);
    let mut patterns = Vec::new();
    for (cube, (z, offset)) in [(150.0, 0.0), (450.0, 45.0)].iter().enumerate() {
        for i in 0..4 {
            let a = (offset + f64::from(i) * 90.0_f64).to_radians();
            let n = Vector3::new(a.cos(), a.sin(), 0.0);
            let mut g = geom.clone();
            g.pattern_id = (cube * 4) as u32 + i;
            let pose = board_pose(&g, Vector3::new(0.0, 0.0, *z) + n * 150.0, n, Vector3::z());
            patterns.push((g, pose));
        }
    }
    let trajectory = (0..steps)
        .map(|t| rot(Vector3::z(), f64::from(t) * step_deg).inverse())
        .collect();
    (Layout::Turntable { steps, step_deg }, cameras, patterns, trajectory, 0.15)
}

/// Scene for a preset with the given noise level and the preset's dropout.
/// Draws to try before a preset gives up on finding a calibratable scene.
pub const PRESET_ATTEMPTS: u64 = 64;

fn attempt_seed(seed: u64, attempt: u64) -> u64 {
    seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// True when the noiseless detections form one component and the
/// closed-form schedule initializes every variable.
pub fn is_calibratable(d: &Dataset) -> bool {
    let Ok(frs) = build_frs(d, DEFAULT_SANITY_GATE_PX) else {
        return false;
    };
    let Ok(g) = build_interaction_graph(&frs) else {
        return false;
    };
    if connected_components(&g).count != 1 {
        return false;
    }
    select_reference(&frs)
        .and_then(|r| run_initialization(&frs, r, &InitConfig::default()))
        .is_ok()
}

/// Scene for a preset with noise `sigma` and optional dropout override.
///
/// Sparse presets can produce detection sets whose interaction graph is
/// split or which the closed-form schedule cannot resolve; such draws are
/// rejected and the layout, trajectory and dropout are redrawn from the
/// next derived seed. The accepted seed is stored in `SceneConfig::seed`.
pub fn preset_scene(preset: Preset, sigma: f64, dropout: Option<f64>, seed: u64) -> Result<SyntheticScene> {
    Ok(preset_scene_with_config(preset, sigma, dropout, seed)?.1)
}

pub fn preset_scene_with_config(
    preset: Preset,
    sigma: f64,
    dropout: Option<f64>,
    seed: u64,
) -> Result<(SceneConfig, SyntheticScene)> {
    for attempt in 0..PRESET_ATTEMPTS {
        let mut cfg = preset.config(attempt_seed(seed, attempt));
        cfg.noise_sigma = sigma;
        if let Some(d) = dropout {
            cfg.dropout = d;
        }
        let scene = generate_scene(&cfg)?;
        let structure = perturb_detections(&scene.noiseless, 0.0, cfg.dropout, cfg.seed);
        if is_calibratable(&structure) {
            return Ok((cfg, scene));
        }
    }
    Err(Error::InfeasibleLayout)
}

pub fn describe(scene: &SyntheticScene) -> String {
    alloc::format!(
        "{} cameras, {} patterns, {} times, {} detections, {} component(s)",
        scene.dataset.cameras.len(),
        scene.dataset.patterns.len(),
        scene.dataset.time_count,
        scene.dataset.detections.len(),
        scene.components
    )
}
