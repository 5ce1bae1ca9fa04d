//! Dataset model: cameras, planar patterns, detections, and the
//! foundational relationships (one per detection) derived from them.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Matrix3, SMatrix, SVector, Vector2, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, ObsKey, Result, ValidationIssue};
use crate::geometry::{so3_project, AxisAngleParam, CameraIntrinsics, Pose};

/// Default single-view reprojection gate, in pixels.
pub const DEFAULT_SANITY_GATE_PX: f64 = 5.0;

/// Planar chessboard-type pattern with `rows × cols` interior corners.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternGeometry {
    pub pattern_id: u32,
    pub rows: u32,
    pub cols: u32,
    pub square_size: f64,
}

impl PatternGeometry {
    pub fn new(pattern_id: u32, rows: u32, cols: u32, square_size: f64) -> Self {
        Self {
            pattern_id,
            rows,
            cols,
            square_size,
        }
    }

    pub fn corner_count(&self) -> usize {
        (self.rows * self.cols) as usize
    }

    /// Corner `i` in row-major order: `(col·s, row·s, 0)`.
    pub fn corner_point(&self, index: u32) -> Option<Vector3<f64>> {
        if (index as usize) >= self.corner_count() {
            return None;
        }
        let row = index / self.cols;
        let col = index % self.cols;
        Some(Vector3::new(
            col as f64 * self.square_size,
            row as f64 * self.square_size,
            0.0,
        ))
    }

    pub fn corner_points(&self) -> Vec<Vector3<f64>> {
        (0..self.rows * self.cols)
            .filter_map(|i| self.corner_point(i))
            .collect()
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(
            0.5 * (self.cols.saturating_sub(1)) as f64 * self.square_size,
            0.5 * (self.rows.saturating_sub(1)) as f64 * self.square_size,
            0.0,
        )
    }

    fn validate(&self) -> core::result::Result<(), ValidationIssue> {
        let reason = if self.rows < 2 || self.cols < 2 {
            Some("needs at least 2×2 corners")
        } else if !(self.square_size > 0.0 && self.square_size.is_finite()) {
            Some("square size must be positive")
        } else {
            None
        };
        match reason {
            Some(r) => Err(ValidationIssue::BadPattern {
                pattern: self.pattern_id,
                reason: r.into(),
            }),
            None => Ok(()),
        }
    }
}

/// Observed corner: index into the pattern and pixel position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    pub index: u32,
    pub pixel: Vector2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub camera_id: u32,
    pub pattern_id: u32,
    pub time_id: u32,
    pub corners: Vec<Corner>,
}

impl Detection {
    pub fn key(&self) -> ObsKey {
        ObsKey::new(self.camera_id, self.pattern_id, self.time_id)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub cameras: BTreeMap<u32, CameraIntrinsics>,
    pub patterns: BTreeMap<u32, PatternGeometry>,
    pub detections: Vec<Detection>,
    pub time_count: u32,
}

impl Dataset {
    /// Checks every dataset invariant and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        for (&id, k) in &self.cameras {
            if let Err(e) = k.validate() {
                issues.push(ValidationIssue::BadIntrinsics {
                    camera: id,
                    reason: format!("{e}"),
                });
            }
        }
        for (&id, p) in &self.patterns {
            if p.pattern_id != id {
                issues.push(ValidationIssue::BadPattern {
                    pattern: id,
                    reason: format!("stored under id {id} but declares {}", p.pattern_id),
                });
            }
            if let Err(issue) = p.validate() {
                issues.push(issue);
            }
        }
        let mut seen = BTreeSet::new();
        for det in &self.detections {
            let key = det.key();
            if !self.cameras.contains_key(&det.camera_id) {
                issues.push(ValidationIssue::UnknownCamera { key });
            }
            if det.time_id >= self.time_count {
                issues.push(ValidationIssue::TimeOutOfRange {
                    key,
                    time_count: self.time_count,
                });
            }
            if !seen.insert(key) {
                issues.push(ValidationIssue::DuplicateTriple { key });
            }
            let Some(geom) = self.patterns.get(&det.pattern_id) else {
                issues.push(ValidationIssue::UnknownPattern { key });
                continue;
            };
            let mut indices = BTreeSet::new();
            for c in &det.corners {
                if !indices.insert(c.index) {
                    issues.push(ValidationIssue::DuplicateCorner {
                        key,
                        corner: c.index,
                    });
                }
                if geom.corner_point(c.index).is_none() {
                    issues.push(ValidationIssue::CornerOutOfRange {
                        key,
                        corner: c.index,
                    });
                }
                if !(c.pixel.x.is_finite() && c.pixel.y.is_finite()) {
                    issues.push(ValidationIssue::NonFiniteCorner {
                        key,
                        corner: c.index,
                    });
                }
            }
            if det.corners.len() < 4 {
                issues.push(ValidationIssue::TooFewCorners {
                    key,
                    count: det.corners.len(),
                });
            } else {
                let pts: Vec<Vector2<f64>> = det
                    .corners
                    .iter()
                    .filter_map(|c| geom.corner_point(c.index))
                    .map(|p| p.xy())
                    .collect();
                if is_collinear(&pts) {
                    issues.push(ValidationIssue::CollinearCorners { key });
                }
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }

    /// Total number of observed corners across all detections.
    pub fn corner_count(&self) -> usize {
        self.detections.iter().map(|d| d.corners.len()).sum()
    }
}

/// One observation `C = A·P·T` for camera `c`, pattern `p` and time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FoundationalRelationship {
    pub camera: u32,
    pub pattern: u32,
    pub time: u32,
    /// Measured pattern→camera transform.
    pub a: Pose,
    pub detection: Detection,
    /// Single-view reprojection rmse of `a`, pixels.
    pub rmse: f64,
}

impl FoundationalRelationship {
    pub fn key(&self) -> ObsKey {
        ObsKey::new(self.camera, self.pattern, self.time)
    }
}

/// Collinearity test: smallest singular value of the centered coordinates
/// must exceed 1e-6 of the largest.
pub fn is_collinear(points: &[Vector2<f64>]) -> bool {
    if points.len() < 3 {
        return true;
    }
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector2::zeros(), |acc, p| acc + p) / n;
    let mut scatter = nalgebra::Matrix2::zeros();
    for p in points {
        let d = p - mean;
        scatter += d * d.transpose();
    }
    let eig = scatter.symmetric_eigenvalues();
    let (lo, hi) = (eig.min().max(0.0).sqrt(), eig.max().max(0.0).sqrt());
    !(hi > 0.0 && lo > 1e-6 * hi)
}

/// Result of single-view planar pose estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternPose {
    pub pose: Pose,
    pub rmse: f64,
}

/// Pattern→camera pose from one detection: undistort, normalized DLT
/// homography, decomposition with `K`, SO(3) projection and a
/// Levenberg-Marquardt polish of the reprojection error.
pub fn estimate_pattern_pose(
    k: &CameraIntrinsics,
    geom: &PatternGeometry,
    det: &Detection,
) -> Result<PatternPose> {
    let mut object = Vec::with_capacity(det.corners.len());
    let mut image = Vec::with_capacity(det.corners.len());
    for c in &det.corners {
        let x = geom
            .corner_point(c.index)
            .ok_or(Error::DegenerateConfiguration)?;
        object.push(x);
        image.push(c.pixel);
    }
    if object.len() < 4 {
        return Err(Error::DegenerateConfiguration);
    }
    let planar: Vec<Vector2<f64>> = object.iter().map(|p| p.xy()).collect();
    if is_collinear(&planar) {
        return Err(Error::DegenerateConfiguration);
    }
    let normalized: Vec<Vector2<f64>> = image.iter().map(|px| k.undistort(px)).collect();
    let h = homography_dlt(&planar, &normalized)?;

    let h1 = h.column(0).into_owned();
    let h2 = h.column(1).into_owned();
    let h3 = h.column(2).into_owned();
    let scale = 2.0 / (h1.norm() + h2.norm());
    let mut best: Option<(Pose, f64)> = None;
    for sign in [1.0, -1.0] {
        let s = sign * scale;
        let r1 = h1 * s;
        let r2 = h2 * s;
        let r3 = r1.cross(&r2);
        let rot = match so3_project(&Matrix3::from_columns(&[r1, r2, r3])) {
            Ok(r) => r,
            Err(_) => continue,
        };
        let pose = Pose::from_parts(rot, h3 * s);
        if object.iter().any(|x| pose.transform_point(x).z <= 0.0) {
            continue;
        }
        let err = sum_squared_reprojection(k, &pose, &object, &image).unwrap_or(f64::INFINITY);
        if best.map_or(true, |(_, e)| err < e) {
            best = Some((pose, err));
        }
    }
    let (initial, _) = best.ok_or(Error::BehindCamera)?;
    let pose = polish_pose(k, initial, &object, &image);
    let sse = sum_squared_reprojection(k, &pose, &object, &image)?;
    Ok(PatternPose {
        pose,
        rmse: (sse / object.len() as f64).sqrt(),
    })
}

fn sum_squared_reprojection(
    k: &CameraIntrinsics,
    pose: &Pose,
    object: &[Vector3<f64>],
    image: &[Vector2<f64>],
) -> Result<f64> {
    let mut sse = 0.0;
    for (x, px) in object.iter().zip(image) {
        let (p, _) = k.project_camera_point(&pose.transform_point(x))?;
        sse += (p - px).norm_squared();
    }
    Ok(sse)
}

/// Homography mapping plane points to normalized image points, with
/// Hartley conditioning on both sides.
fn homography_dlt(src: &[Vector2<f64>], dst: &[Vector2<f64>]) -> Result<Matrix3<f64>> {
    let ts = conditioning(src);
    let td = conditioning(dst);
    let mut ata = SMatrix::<f64, 9, 9>::zeros();
    for (s, d) in src.iter().zip(dst) {
        let s = ts * Vector3::new(s.x, s.y, 1.0);
        let d = td * Vector3::new(d.x, d.y, 1.0);
        let (x, y, u, v) = (s.x / s.z, s.y / s.z, d.x / d.z, d.y / d.z);
        let r1 = SVector::<f64, 9>::from_column_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        let r2 = SVector::<f64, 9>::from_column_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
        ata += r1 * r1.transpose() + r2 * r2.transpose();
    }
    let eig = ata.symmetric_eigen();
    let imin = eig.eigenvalues.imin();
    let hv = eig.eigenvectors.column(imin);
    let hn = Matrix3::new(hv[0], hv[1], hv[2], hv[3], hv[4], hv[5], hv[6], hv[7], hv[8]);
    let td_inv = td.try_inverse().ok_or(Error::DegenerateConfiguration)?;
    let h = td_inv * hn * ts;
    if !h.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateConfiguration);
    }
    Ok(h)
}

fn conditioning(points: &[Vector2<f64>]) -> Matrix3<f64> {
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector2::zeros(), |acc, p| acc + p) / n;
    let spread = points.iter().map(|p| (p - mean).norm()).sum::<f64>() / n;
    let s = if spread > 0.0 {
        core::f64::consts::SQRT_2 / spread
    } else {
        1.0
    };
    Matrix3::new(s, 0.0, -s * mean.x, 0.0, s, -s * mean.y, 0.0, 0.0, 1.0)
}

fn polish_pose(
    k: &CameraIntrinsics,
    mut pose: Pose,
    object: &[Vector3<f64>],
    image: &[Vector2<f64>],
) -> Pose {
    let Ok(mut cost) = sum_squared_reprojection(k, &pose, object, image) else {
        return pose;
    };
    let mut lambda = 1e-4;
    for _ in 0..100 {
        let mut jtj = SMatrix::<f64, 6, 6>::zeros();
        let mut jtr = SVector::<f64, 6>::zeros();
        for (x, px) in object.iter().zip(image) {
            let rx = pose.rotation() * x;
            let Ok((p, jp)) = k.project_camera_point(&(rx + pose.translation())) else {
                return pose;
            };
            let r = p - px;
            let mut j = SMatrix::<f64, 2, 6>::zeros();
            j.fixed_view_mut::<2, 3>(0, 0)
                .copy_from(&(-(jp * crate::geometry::skew(&rx))));
            j.fixed_view_mut::<2, 3>(0, 3).copy_from(&jp);
            jtj += j.transpose() * j;
            jtr += j.transpose() * r;
        }
        if jtr.amax() < 1e-14 {
            break;
        }
        let mut improved = false;
        for _ in 0..10 {
            let mut damped = jtj;
            for i in 0..6 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = -chol.solve(&jtr);
            let candidate = pose.perturb(&AxisAngleParam::from_slice(step.as_slice()));
            match sum_squared_reprojection(k, &candidate, object, image) {
                Ok(c) if c < cost => {
                    let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
                    pose = candidate.renormalized();
                    cost = c;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = rel > 1e-15;
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !improved {
            break;
        }
    }
    pose
}

/// One relationship per detection, ordered by `(time, camera, pattern)`.
/// Detections whose single-view rmse exceeds `sanity_gate_px` are reported
/// as errors rather than silently dropped.
pub fn build_frs(d: &Dataset, sanity_gate_px: f64) -> Result<Vec<FoundationalRelationship>> {
    let mut frs = d
        .detections
        .iter()
        .map(|det| fr_from_detection(d, det, sanity_gate_px))
        .collect::<Result<Vec<_>>>()?;
    sort_frs(&mut frs);
    Ok(frs)
}

/// Canonical `(time, camera, pattern)` ordering.
pub fn sort_frs(frs: &mut [FoundationalRelationship]) {
    frs.sort_by_key(|f| (f.time, f.camera, f.pattern));
}

/// Builds the relationship for one detection of a validated dataset.
pub fn fr_from_detection(
    d: &Dataset,
    det: &Detection,
    sanity_gate_px: f64,
) -> Result<FoundationalRelationship> {
    let key = det.key();
    let wrap = |e: Error| Error::PatternPose {
        key,
        source: Box::new(e),
    };
    let k = d
        .cameras
        .get(&det.camera_id)
        .ok_or_else(|| wrap(Error::Validation(alloc::vec![ValidationIssue::UnknownCamera { key }])))?;
    let geom = d
        .patterns
        .get(&det.pattern_id)
        .ok_or_else(|| wrap(Error::Validation(alloc::vec![ValidationIssue::UnknownPattern { key }])))?;
    let est = estimate_pattern_pose(k, geom, det).map_err(wrap)?;
    if !(est.rmse <= sanity_gate_px) {
        return Err(Error::SanityGate {
            key,
            rmse: est.rmse,
            gate: sanity_gate_px,
        });
    }
    Ok(FoundationalRelationship {
        camera: det.camera_id,
        pattern: det.pattern_id,
        time: det.time_id,
        a: est.pose,
        detection: det.clone(),
        rmse: est.rmse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::geometry::project_point;

    fn setup(pose: Pose) -> (CameraIntrinsics, PatternGeometry, Detection) {
        let k = CameraIntrinsics::pinhole(1000.0, 1000.0, 640.0, 480.0, 1280, 960)
            .with_distortion([-0.05, 0.01, 0.0005, -0.0003, 0.0]);
        let geom = PatternGeometry::new(0, 5, 7, 40.0);
        let corners = (0..35)
            .map(|i| Corner {
                index: i,
                pixel: project_point(&k, &pose, &geom.corner_point(i).unwrap()).unwrap(),
            })
            .collect();
        let det = Detection {
            camera_id: 0,
            pattern_id: 0,
            time_id: 0,
            corners,
        };
        (k, geom, det)
    }

    #[test]
    fn corner_points_are_row_major() {
        let g = PatternGeometry::new(1, 3, 4, 10.0);
        let pts = g.corner_points();
        assert_eq!(pts.len(), 12);
        assert_eq!(pts[5], Vector3::new(10.0, 10.0, 0.0));
        assert!(pts.iter().all(|p| p.z == 0.0));
        assert_eq!(g.corner_point(12), None);
    }

    #[test]
    fn frontal_pose_recovered() {
        let truth = Pose::from_translation(Vector3::new(-120.0, -80.0, 1000.0));
        let (k, geom, det) = setup(truth);
        let est = estimate_pattern_pose(&k, &geom, &det).unwrap();
        let (dr, dt) = est.pose.distance(&truth);
        assert!(dr < 1e-6 && dt < 1e-3, "dr={dr} dt={dt}");
        assert!(est.rmse < 1e-6);
    }

    #[test]
    fn oblique_and_flipped_pose_recovered() {
        let truth = Pose::from_axis_angle(Vector3::new(0.3, 1.0, 2.5), 2.9, Vector3::new(50.0, 30.0, 900.0));
        let (k, geom, det) = setup(truth);
        let est = estimate_pattern_pose(&k, &geom, &det).unwrap();
        let (dr, dt) = est.pose.distance(&truth);
        assert!(dr < 1e-8 && dt < 1e-6, "dr={dr} dt={dt}");
    }

    #[test]
    fn collinear_corners_rejected() {
        let truth = Pose::from_translation(Vector3::new(0.0, 0.0, 1000.0));
        let (k, geom, mut det) = setup(truth);
        det.corners.retain(|c| c.index < 7);
        assert_eq!(
            estimate_pattern_pose(&k, &geom, &det),
            Err(Error::DegenerateConfiguration)
        );
    }

    #[test]
    fn validation_names_duplicate_triple() {
        let truth = Pose::from_translation(Vector3::new(0.0, 0.0, 1000.0));
        let (k, geom, det) = setup(truth);
        let d = Dataset {
            cameras: BTreeMap::from([(0, k)]),
            patterns: BTreeMap::from([(0, geom)]),
            detections: vec![det.clone(), det],
            time_count: 1,
        };
        match d.validate() {
            Err(Error::Validation(issues)) => assert_eq!(
                issues,
                vec![ValidationIssue::DuplicateTriple {
                    key: ObsKey::new(0, 0, 0)
                }]
            ),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_dataset_gives_no_frs() {
        assert!(build_frs(&Dataset::default(), 5.0).unwrap().is_empty());
    }
}
