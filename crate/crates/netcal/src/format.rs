//! JSON documents read and written by the tools.
//!
//! Maps are keyed by decimal id strings (`"0"`, `"1"`, …) and serialized in
//! ascending id order, so equal inputs always produce identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::Vector2;
use netcal_core::dataset::{Corner, Dataset, Detection, PatternGeometry};
use netcal_core::geometry::{CameraIntrinsics, Pose};
use netcal_core::sim::GroundTruth;
use netcal_core::{Reference, VariableId, VariablePool};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{FormatError, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub type Matrix4Rows = [[f64; 4]; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub length: String,
    pub pixel: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            length: "mm".into(),
            pixel: "px".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRecord {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(default)]
    pub skew: f64,
    #[serde(default)]
    pub dist: [f64; 5],
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternRecord {
    pub rows: u32,
    pub cols: u32,
    pub square_size_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub camera: u32,
    pub pattern: u32,
    pub time: u32,
    /// `[index, u, v]` triples.
    pub corners: Vec<(u32, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub schema_version: u32,
    #[serde(default)]
    pub units: Units,
    pub cameras: BTreeMap<u32, CameraRecord>,
    pub patterns: BTreeMap<u32, PatternRecord>,
    pub time_count: u32,
    pub detections: Vec<DetectionRecord>,
}

impl From<&Dataset> for DatasetFile {
    fn from(d: &Dataset) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            units: Units::default(),
            cameras: d
                .cameras
                .iter()
                .map(|(&id, k)| {
                    let rec = CameraRecord {
                        fx: k.fx,
                        fy: k.fy,
                        cx: k.cx,
                        cy: k.cy,
                        skew: k.skew,
                        dist: k.dist,
                        width: k.width,
                        height: k.height,
                    };
                    (id, rec)
                })
                .collect(),
            patterns: d.patterns.iter().map(|(&id, g)| (id, PatternRecord::from(g))).collect(),
            time_count: d.time_count,
            detections: d
                .detections
                .iter()
                .map(|det| DetectionRecord {
                    camera: det.camera_id,
                    pattern: det.pattern_id,
                    time: det.time_id,
                    corners: det.corners.iter().map(|c| (c.index, c.pixel.x, c.pixel.y)).collect(),
                })
                .collect(),
        }
    }
}

impl From<&PatternGeometry> for PatternRecord {
    fn from(g: &PatternGeometry) -> Self {
        Self {
            rows: g.rows,
            cols: g.cols,
            square_size_mm: g.square_size,
        }
    }
}

impl PatternRecord {
    pub fn geometry(&self, id: u32) -> PatternGeometry {
        PatternGeometry::new(id, self.rows, self.cols, self.square_size_mm)
    }
}

impl DatasetFile {
    /// Converts to the in-memory model and checks every dataset invariant.
    pub fn into_dataset(self) -> Result<Dataset> {
        check_schema(self.schema_version)?;
        let d = Dataset {
            cameras: self
                .cameras
                .into_iter()
                .map(|(id, r)| {
                    let mut k = CameraIntrinsics::pinhole(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
                        .with_distortion(r.dist);
                    k.skew = r.skew;
                    (id, k)
                })
                .collect(),
            patterns: self.patterns.iter().map(|(&id, r)| (id, r.geometry(id))).collect(),
            time_count: self.time_count,
            detections: self
                .detections
                .into_iter()
                .map(|r| Detection {
                    camera_id: r.camera,
                    pattern_id: r.pattern,
                    time_id: r.time,
                    corners: r
                        .corners
                        .into_iter()
                        .map(|(index, u, v)| Corner {
                            index,
                            pixel: Vector2::new(u, v),
                        })
                        .collect(),
                })
                .collect(),
        };
        d.validate()?;
        Ok(d)
    }
}

/// Pose sets: simulator truth, solver output and step snapshots.
///
/// `reference` is absent for ground truth. `patterns` embeds the board
/// geometry so a solution can be drawn without its dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosesFile {
    pub schema_version: u32,
    #[serde(default)]
    pub units: Units,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceRecord>,
    pub camera_poses: BTreeMap<u32, Matrix4Rows>,
    pub pattern_poses: BTreeMap<u32, Matrix4Rows>,
    pub rig_poses: BTreeMap<u32, Matrix4Rows>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub patterns: BTreeMap<u32, PatternRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceRecord {
    pub pattern: u32,
    pub time: u32,
}

impl From<Reference> for ReferenceRecord {
    fn from(r: Reference) -> Self {
        Self {
            pattern: r.pattern,
            time: r.time,
        }
    }
}

impl From<ReferenceRecord> for Reference {
    fn from(r: ReferenceRecord) -> Self {
        Reference {
            pattern: r.pattern,
            time: r.time,
        }
    }
}

fn rows_map<'a>(it: impl Iterator<Item = (u32, &'a Pose)>) -> BTreeMap<u32, Matrix4Rows> {
    it.map(|(id, p)| (id, p.to_rows())).collect()
}

fn poses_map(rows: &BTreeMap<u32, Matrix4Rows>, what: &str) -> Result<BTreeMap<u32, Pose>> {
    rows.iter()
        .map(|(&id, r)| {
            Pose::from_rows(r)
                .map(|p| (id, p))
                .map_err(|e| FormatError::Schema(format!("{what} {id}: {e}")))
        })
        .collect()
}

impl PosesFile {
    pub fn from_truth(truth: &GroundTruth, patterns: &BTreeMap<u32, PatternGeometry>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            units: Units::default(),
            reference: None,
            camera_poses: rows_map(truth.cameras.iter().map(|(&k, v)| (k, v))),
            pattern_poses: rows_map(truth.patterns.iter().map(|(&k, v)| (k, v))),
            rig_poses: rows_map(truth.times.iter().map(|(&k, v)| (k, v))),
            patterns: patterns.iter().map(|(&id, g)| (id, g.into())).collect(),
        }
    }

    pub fn from_pool(pool: &VariablePool, patterns: &BTreeMap<u32, PatternGeometry>) -> Self {
        let of_kind = |kind| {
            rows_map(
                pool.values()
                    .iter()
                    .filter(move |(v, _)| v.kind == kind)
                    .map(|(v, p)| (v.index, p)),
            )
        };
        use netcal_core::VariableKind::*;
        Self {
            schema_version: SCHEMA_VERSION,
            units: Units::default(),
            reference: Some(pool.reference().into()),
            camera_poses: of_kind(Camera),
            pattern_poses: of_kind(Pattern),
            rig_poses: of_kind(Time),
            patterns: pool
                .values()
                .keys()
                .filter(|v| v.kind == Pattern)
                .filter_map(|v| patterns.get(&v.index).map(|g| (v.index, g.into())))
                .collect(),
        }
    }

    pub fn to_truth(&self) -> Result<GroundTruth> {
        check_schema(self.schema_version)?;
        Ok(GroundTruth {
            cameras: poses_map(&self.camera_poses, "camera pose")?,
            patterns: poses_map(&self.pattern_poses, "pattern pose")?,
            times: poses_map(&self.rig_poses, "rig pose")?,
        })
    }

    /// Pool over every pose in the file. Files without a reference (ground
    /// truth) take `fallback`.
    pub fn to_pool(&self, fallback: Reference) -> Result<VariablePool> {
        let t = self.to_truth()?;
        let values = t
            .cameras
            .into_iter()
            .map(|(k, v)| (VariableId::camera(k), v))
            .chain(t.patterns.into_iter().map(|(k, v)| (VariableId::pattern(k), v)))
            .chain(t.times.into_iter().map(|(k, v)| (VariableId::time(k), v)))
            .collect();
        let reference = self.reference.map(Reference::from).unwrap_or(fallback);
        Ok(VariablePool::from_values(values, reference))
    }

    pub fn pattern_geometries(&self) -> BTreeMap<u32, PatternGeometry> {
        self.patterns.iter().map(|(&id, r)| (id, r.geometry(id))).collect()
    }
}

fn check_schema(version: u32) -> Result<()> {
    if version == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(FormatError::Schema(format!(
            "unsupported schema_version {version}, expected {SCHEMA_VERSION}"
        )))
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| FormatError::Json {
        path: path.display().to_string(),
        source: e,
    })
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize infallibly");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))?;
    }
    fs::write(path, to_json_string(value)).map_err(|e| FormatError::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    read_json::<DatasetFile>(path)?.into_dataset()
}

pub fn save_dataset(path: &Path, d: &Dataset) -> Result<()> {
    write_json(path, &DatasetFile::from(d))
}

pub fn load_poses(path: &Path) -> Result<PosesFile> {
    let f: PosesFile = read_json(path)?;
    check_schema(f.schema_version)?;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use netcal_core::sim::{preset_scene, Preset};

    #[test]
    fn dataset_round_trip() {
        let s = preset_scene(Preset::Mult1, 0.5, None, 2).unwrap();
        let file = DatasetFile::from(&s.dataset);
        let text = to_json_string(&file);
        let back: DatasetFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.into_dataset().unwrap(), s.dataset);
    }

    #[test]
    fn poses_round_trip() {
        let s = preset_scene(Preset::Net1, 0.0, None, 1).unwrap();
        let file = PosesFile::from_truth(&s.truth, &s.dataset.patterns);
        let back: PosesFile = serde_json::from_str(&to_json_string(&file)).unwrap();
        assert_eq!(back.to_truth().unwrap(), s.truth);
        assert_eq!(back.pattern_geometries(), s.dataset.patterns);
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let s = preset_scene(Preset::Mult1, 0.0, None, 0).unwrap();
        let mut file = DatasetFile::from(&s.dataset);
        file.schema_version = 7;
        assert!(matches!(file.into_dataset(), Err(FormatError::Schema(_))));
    }

    proptest::proptest! {
        #[test]
        fn pose_text_is_exact(
            w in proptest::array::uniform3(-3.0f64..3.0),
            t in proptest::array::uniform3(-1e4f64..1e4),
        ) {
            let pose = netcal_core::geometry::Pose::from_axis_angle(w.into(), 1.0, t.into());
            let rows = pose.to_rows();
            let back: Matrix4Rows = serde_json::from_str(&serde_json::to_string(&rows).unwrap()).unwrap();
            proptest::prop_assert_eq!(back, rows);
        }
    }
}
