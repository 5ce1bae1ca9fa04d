//! Calibration quality metrics: algebraic error, reprojection rmse and
//! reconstruction accuracy of triangulated pattern corners, plus virtual
//! cameras for the single-camera rotating-rig case.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use nalgebra::{Matrix3, OMatrix, U4, Dyn, Vector2, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::connectivity::VariableId;
use crate::dataset::{Dataset, FoundationalRelationship};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pose};
use crate::init::VariablePool;
use crate::refine::{observation_count, total_reprojection_error};

/// Minimum spread of effective camera centers for triangulation, in mm.
pub const MIN_BASELINE: f64 = 1e-6;

const GN_MAX_ITERATIONS: usize = 20;
const GN_STEP_TOLERANCE: f64 = 1e-12;

/// Mean squared Frobenius deviation `‖C − A·P·T‖²_F` over all relationships.
pub fn algebraic_error(pool: &VariablePool, frs: &[FoundationalRelationship]) -> Result<f64> {
    if frs.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for fr in frs {
        sum += pool.algebraic_residual(fr)?;
    }
    Ok(sum / frs.len() as f64)
}

/// `sqrt(re / N)` in pixels.
pub fn rrmse(pool: &VariablePool, frs: &[FoundationalRelationship], data: &Dataset) -> Result<f64> {
    let n = observation_count(frs);
    if n == 0 {
        return Ok(0.0);
    }
    Ok((total_reprojection_error(pool, frs, data)? / n as f64).sqrt())
}

/// One observation of a pattern point: intrinsics, pattern→camera pose and
/// measured pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct View {
    pub intrinsics: CameraIntrinsics,
    pub pose: Pose,
    pub pixel: Vector2<f64>,
}

fn view_residual(v: &View, x: &Vector3<f64>) -> Result<(Vector2<f64>, nalgebra::Matrix2x3<f64>)> {
    let (px, j) = v.intrinsics.project_camera_point(&v.pose.transform_point(x))?;
    Ok((px - v.pixel, j * v.pose.rotation()))
}

fn cost(views: &[View], x: &Vector3<f64>) -> Option<f64> {
    let mut c = 0.0;
    for v in views {
        c += view_residual(v, x).ok()?.0.norm_squared();
    }
    Some(c)
}

/// Sum of squared reprojection errors of `x` over `views`, or `None` when
/// `x` is behind any camera.
pub fn triangulation_cost(views: &[View], x: &Vector3<f64>) -> Option<f64> {
    cost(views, x)
}

/// Linear triangulation on undistorted coordinates.
fn dlt(views: &[View]) -> Result<Vector3<f64>> {
    let mut m = OMatrix::<f64, Dyn, U4>::zeros(2 * views.len());
    for (i, v) in views.iter().enumerate() {
        let xy = v.intrinsics.undistort(&v.pixel);
        let h = v.pose.to_homogeneous();
        for c in 0..4 {
            m[(2 * i, c)] = xy.x * h[(2, c)] - h[(0, c)];
            m[(2 * i + 1, c)] = xy.y * h[(2, c)] - h[(1, c)];
        }
    }
    let ata = m.transpose() * &m;
    let eig = ata.symmetric_eigen();
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &e)| if e < acc.1 { (i, e) } else { acc });
    let h = eig.eigenvectors.column(imin);
    if h[3].abs() < 1e-300 {
        return Err(Error::DegenerateRays);
    }
    Ok(Vector3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]))
}

/// Point minimizing the reprojection error over `views`: linear seed, then
/// Gauss-Newton.
pub fn triangulate_point(views: &[View]) -> Result<Vector3<f64>> {
    if views.len() < 2 {
        return Err(Error::DegenerateRays);
    }
    let centers: Vec<Vector3<f64>> = views
        .iter()
        .map(|v| -(v.pose.rotation().transpose() * v.pose.translation()))
        .collect();
    let spread = centers
        .iter()
        .map(|c| (c - centers[0]).norm())
        .fold(0.0, f64::max);
    if spread < MIN_BASELINE {
        return Err(Error::DegenerateRays);
    }
    let mut x = dlt(views)?;
    let Some(mut current) = cost(views, &x) else {
        return Ok(x);
    };
    for _ in 0..GN_MAX_ITERATIONS {
        let mut h = Matrix3::zeros();
        let mut g = Vector3::zeros();
        for v in views {
            let Ok((r, j)) = view_residual(v, &x) else { return Ok(x) };
            h += j.transpose() * j;
            g += j.transpose() * r;
        }
        let Some(step) = h.cholesky().map(|c| -c.solve(&g)) else {
            break;
        };
        let candidate = x + step;
        match cost(views, &candidate) {
            Some(c) if c <= current => {
                x = candidate;
                current = c;
            }
            _ => break,
        }
        if step.norm() < GN_STEP_TOLERANCE * (1.0 + x.norm()) {
            break;
        }
    }
    Ok(x)
}

/// Triangulated pattern corner and its squared error against the known
/// pattern-frame coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangulatedPoint {
    pub pattern: u32,
    pub corner: u32,
    pub estimate: Vector3<f64>,
    pub truth: Vector3<f64>,
    pub observations: usize,
    pub squared_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaeTable {
    /// In `(pattern, corner)` order.
    pub points: Vec<TriangulatedPoint>,
    /// Median of `squared_error` (mm²).
    pub median: f64,
    /// Corners seen by a single relationship.
    pub single_view: usize,
    /// Corners whose views share one effective camera center.
    pub degenerate: usize,
}

/// Median with the mean of the two central values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Groups every observed corner by `(pattern, corner)` as triangulation views.
pub fn corner_views(
    pool: &VariablePool,
    frs: &[FoundationalRelationship],
    data: &Dataset,
) -> Result<BTreeMap<(u32, u32), Vec<View>>> {
    let mut groups: BTreeMap<(u32, u32), Vec<View>> = BTreeMap::new();
    for fr in frs {
        let k = data
            .cameras
            .get(&fr.camera)
            .ok_or(Error::Uninitialized(VariableId::camera(fr.camera)))?;
        let pose = pool.predicted_a(fr.camera, fr.pattern, fr.time)?;
        for c in &fr.detection.corners {
            groups.entry((fr.pattern, c.index)).or_default().push(View {
                intrinsics: *k,
                pose,
                pixel: c.pixel,
            });
        }
    }
    Ok(groups)
}

/// Reconstruction accuracy: median squared distance between triangulated
/// and true corners over all corners seen in at least two relationships.
pub fn rae(pool: &VariablePool, frs: &[FoundationalRelationship], data: &Dataset) -> Result<RaeTable> {
    let mut points = Vec::new();
    let mut single_view = 0;
    let mut degenerate = 0;
    for ((pattern, corner), views) in corner_views(pool, frs, data)? {
        if views.len() < 2 {
            single_view += 1;
            continue;
        }
        let truth = data
            .patterns
            .get(&pattern)
            .and_then(|g| g.corner_point(corner))
            .ok_or(Error::DegenerateConfiguration)?;
        let estimate = match triangulate_point(&views) {
            Ok(x) => x,
            Err(Error::DegenerateRays) => {
                degenerate += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        points.push(TriangulatedPoint {
            pattern,
            corner,
            estimate,
            truth,
            observations: views.len(),
            squared_error: (estimate - truth).norm_squared(),
        });
    }
    let errors: Vec<f64> = points.iter().map(|p| p.squared_error).collect();
    let median = median(&errors).ok_or(Error::NoTriangulatablePoints)?;
    Ok(RaeTable {
        points,
        median,
        single_view,
        degenerate,
    })
}

/// Metric snapshot of one solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub ae: f64,
    pub rrmse: f64,
    pub rae: RaeTable,
}

impl Evaluation {
    pub fn rae_median(&self) -> f64 {
        self.rae.median
    }

    pub fn rae_count(&self) -> usize {
        self.rae.points.len()
    }
}

pub fn evaluate(pool: &VariablePool, frs: &[FoundationalRelationship], data: &Dataset) -> Result<Evaluation> {
    Ok(Evaluation {
        ae: algebraic_error(pool, frs)?,
        rrmse: rrmse(pool, frs, data)?,
        rae: rae(pool, frs, data)?,
    })
}

/// Per-time virtual cameras `C·T⁻¹` for a single physical camera.
pub fn virtual_cameras(pool: &VariablePool) -> Result<Vec<(u32, Pose)>> {
    let cameras: Vec<_> = pool.cameras().collect();
    if cameras.len() != 1 {
        return Err(Error::MultipleCameras(cameras.len()));
    }
    let c = cameras[0].1;
    Ok(pool.times().map(|(t, tp)| (t, c.compose(&tp.inverse()))).collect())
}
