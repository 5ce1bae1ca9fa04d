//! ASCII PLY export of solved poses: each camera is a 5-vertex pyramid
//! (apex at the optical center, base on the viewing side) and every pattern
//! contributes its corner points.
//!
//! Patterns are drawn in the rig frame at the reference time, where the rig
//! pose is identity, so the scene is expressed in world coordinates.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::Vector3;
use netcal_core::dataset::PatternGeometry;
use netcal_core::geometry::Pose;

use crate::error::{FormatError, Result};

pub const PYRAMID_VERTICES: usize = 5;
pub const PYRAMID_FACES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlyOptions {
    /// Distance from apex to base, in millimeters.
    pub frustum_depth: f64,
}

impl Default for PlyOptions {
    fn default() -> Self {
        Self { frustum_depth: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub colors: Vec<[u8; 3]>,
    pub faces: Vec<Vec<usize>>,
}

const CAMERA_COLOR: [u8; 3] = [220, 60, 40];
const PATTERN_COLOR: [u8; 3] = [40, 90, 220];

impl Mesh {
    fn new() -> Self {
        Self {
            vertices: Vec::new(),
            colors: Vec::new(),
            faces: Vec::new(),
        }
    }

    fn push(&mut self, x: Vector3<f64>, color: [u8; 3]) -> usize {
        self.vertices.push([x.x, x.y, x.z]);
        self.colors.push(color);
        self.vertices.len() - 1
    }

    /// Pyramid for a world→camera pose.
    pub fn add_camera(&mut self, pose: &Pose, opts: &PlyOptions) {
        let inv = pose.inverse();
        let d = opts.frustum_depth;
        let (hw, hh) = (0.5 * d, 0.375 * d);
        let apex = self.push(inv.transform_point(&Vector3::zeros()), CAMERA_COLOR);
        let base: Vec<usize> = [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)]
            .iter()
            .map(|&(x, y)| self.push(inv.transform_point(&Vector3::new(x, y, d)), CAMERA_COLOR))
            .collect();
        for i in 0..4 {
            self.faces.push(vec![apex, base[i], base[(i + 1) % 4]]);
        }
        self.faces.push(base.iter().rev().copied().collect());
    }

    /// Corner points of a board with rig→pattern pose `pose`.
    pub fn add_pattern(&mut self, geom: &PatternGeometry, pose: &Pose) {
        let inv = pose.inverse();
        for x in geom.corner_points() {
            self.push(inv.transform_point(&x), PATTERN_COLOR);
        }
    }

    pub fn to_ascii(&self) -> String {
        let mut out = String::new();
        out.push_str("ply\nformat ascii 1.0\ncomment units mm\n");
        let _ = writeln!(out, "element vertex {}", self.vertices.len());
        out.push_str("property double x\nproperty double y\nproperty double z\n");
        out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
        let _ = writeln!(out, "element face {}", self.faces.len());
        out.push_str("property list uchar int vertex_indices\nend_header\n");
        for (v, c) in self.vertices.iter().zip(&self.colors) {
            let _ = writeln!(out, "{} {} {} {} {} {}", v[0], v[1], v[2], c[0], c[1], c[2]);
        }
        for f in &self.faces {
            let _ = write!(out, "{}", f.len());
            for i in f {
                let _ = write!(out, " {i}");
            }
            out.push('\n');
        }
        out
    }
}

/// Cameras and patterns of a solution.
pub fn scene_mesh(
    cameras: &BTreeMap<u32, Pose>,
    patterns: &BTreeMap<u32, Pose>,
    geometry: &BTreeMap<u32, PatternGeometry>,
    opts: &PlyOptions,
) -> Mesh {
    let mut mesh = Mesh::new();
    for pose in cameras.values() {
        mesh.add_camera(pose, opts);
    }
    for (id, pose) in patterns {
        if let Some(g) = geometry.get(id) {
            mesh.add_pattern(g, pose);
        }
    }
    mesh
}

/// Expected vertex count of [`scene_mesh`].
pub fn vertex_count(cameras: usize, patterns: &[&PatternGeometry]) -> usize {
    PYRAMID_VERTICES * cameras + patterns.iter().map(|g| g.corner_count()).sum::<usize>()
}

/// Parses an ASCII PLY document with `vertex` and `face` elements.
pub fn parse_ascii(text: &str) -> Result<Mesh> {
    let err = |m: &str| FormatError::Ply(m.to_string());
    let mut lines = text.lines();
    if lines.next() != Some("ply") {
        return Err(err("missing magic"));
    }
    let mut n_vertices = None;
    let mut n_faces = 0;
    let mut vertex_props = 0;
    let mut current = "";
    loop {
        let line = lines.next().ok_or_else(|| err("unterminated header"))?;
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => {}
            ["format", ..] => return Err(err("only ascii is supported")),
            ["comment", ..] => {}
            ["element", name, count] => {
                let count: usize = count.parse().map_err(|_| err("bad element count"))?;
                match *name {
                    "vertex" => n_vertices = Some(count),
                    "face" => n_faces = count,
                    _ => return Err(err("unknown element")),
                }
                current = if *name == "vertex" { "vertex" } else { "face" };
            }
            ["property", ..] if current == "vertex" => vertex_props += 1,
            ["property", ..] => {}
            _ => return Err(FormatError::Ply(format!("unexpected header line {line:?}"))),
        }
    }
    let n_vertices = n_vertices.ok_or_else(|| err("no vertex element"))?;
    let mut mesh = Mesh::new();
    for _ in 0..n_vertices {
        let line = lines.next().ok_or_else(|| err("truncated vertex list"))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err("bad vertex value"))?;
        if vals.len() != vertex_props || vals.len() < 3 {
            return Err(err("vertex property count mismatch"));
        }
        mesh.vertices.push([vals[0], vals[1], vals[2]]);
        let c = |i: usize| vals.get(i).map_or(0, |&v| v as u8);
        mesh.colors.push([c(3), c(4), c(5)]);
    }
    for _ in 0..n_faces {
        let line = lines.next().ok_or_else(|| err("truncated face list"))?;
        let idx: Vec<usize> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err("bad face index"))?;
        let (&n, rest) = idx.split_first().ok_or_else(|| err("empty face"))?;
        if rest.len() != n || rest.iter().any(|&i| i >= n_vertices) {
            return Err(err("malformed face"));
        }
        mesh.faces.push(rest.to_vec());
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pyramid_apex_is_camera_center() {
        let pose = Pose::from_axis_angle(Vector3::new(0.2, 1.0, 0.1), 0.7, Vector3::new(10.0, -20.0, 300.0));
        let mut mesh = Mesh::new();
        mesh.add_camera(&pose, &PlyOptions::default());
        let apex = Vector3::from(mesh.vertices[0]);
        assert!(pose.transform_point(&apex).norm() < 1e-9);
        for v in &mesh.vertices[1..] {
            let local = pose.transform_point(&Vector3::from(*v));
            assert!((local.z - 100.0).abs() < 1e-9);
        }
        assert_eq!(mesh.faces.len(), PYRAMID_FACES);
    }

    #[test]
    fn ascii_round_trip() {
        let mut cams = BTreeMap::new();
        cams.insert(0, Pose::identity());
        cams.insert(1, Pose::from_translation(Vector3::new(100.0, 0.0, 0.0)));
        let geom = PatternGeometry::new(0, 3, 4, 25.0);
        let pats = BTreeMap::from([(0, Pose::from_translation(Vector3::new(0.0, 0.0, 1000.0)))]);
        let geoms = BTreeMap::from([(0, geom.clone())]);
        let mesh = scene_mesh(&cams, &pats, &geoms, &PlyOptions::default());
        let back = parse_ascii(&mesh.to_ascii()).unwrap();
        assert_eq!(back, mesh);
        assert_eq!(back.vertices.len(), vertex_count(2, &[&geom]));
    }

    #[test]
    fn rejects_binary() {
        assert!(parse_ascii("ply\nformat binary_little_endian 1.0\nend_header\n").is_err());
    }
}
