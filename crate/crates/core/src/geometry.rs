//! Rigid transforms, SO(3) helpers and the pinhole camera with
//! radial-tangential distortion.
//!
//! Lengths are millimeters, image coordinates are pixels.

use core::ops::Mul;

use nalgebra::{Matrix2x3, Matrix3, Matrix4, Vector2, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Orthonormality tolerance on `‖RᵀR − I‖_F`.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Minimum camera-frame depth for a projectable point, in mm.
pub const MIN_DEPTH: f64 = 1e-9;

/// A rigid homogeneous transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose, checking that `rotation` is a proper rotation.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let deviation = orthonormality_error(&rotation);
        if !(deviation <= ROTATION_TOLERANCE) || rotation.determinant() <= 0.0 {
            return Err(Error::InvalidRotation { deviation });
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidRotation { deviation: f64::NAN });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Builds a pose whose rotation is already known to be valid.
    pub(crate) fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::from_parts(Matrix3::identity(), translation)
    }

    /// Pure rotation about `axis` (need not be normalized) by `angle` radians.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let n = axis.norm();
        let rvec = if n > 0.0 { axis * (angle / n) } else { Vector3::zeros() };
        Self::from_parts(exp_so3(&rvec), translation)
    }

    pub fn from_homogeneous(m: &Matrix4<f64>) -> Result<Self> {
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::InvalidRotation { deviation: f64::NAN });
        }
        Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Row-major 4×4 rows, the on-disk pose representation.
    pub fn to_rows(&self) -> [[f64; 4]; 4] {
        let m = self.to_homogeneous();
        let mut rows = [[0.0; 4]; 4];
        for (r, row) in rows.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = m[(r, c)];
            }
        }
        rows
    }

    pub fn from_rows(rows: &[[f64; 4]; 4]) -> Result<Self> {
        Self::from_homogeneous(&Matrix4::from_fn(|r, c| rows[r][c]))
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        compose(self, other)
    }

    pub fn inverse(&self) -> Pose {
        inverse(self)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Left-multiplicative update `(exp(ω)·R, t + δt)` used as the local
    /// parameterization of every optimizer in this crate.
    pub fn perturb(&self, delta: &AxisAngleParam) -> Pose {
        Pose::from_parts(exp_so3(&delta.rvec) * self.rotation, self.translation + delta.tvec)
    }

    /// Projects the rotation back onto SO(3) to remove accumulated rounding.
    pub fn renormalized(&self) -> Pose {
        match so3_project(&self.rotation) {
            Ok(r) => Pose::from_parts(r, self.translation),
            Err(_) => *self,
        }
    }

    /// Rotation angle of this pose, radians in `[0, π]`.
    pub fn rotation_angle(&self) -> f64 {
        rotation_angle(&self.rotation)
    }

    /// Geodesic rotation distance and Euclidean translation distance.
    pub fn distance(&self, other: &Pose) -> (f64, f64) {
        let rel = self.rotation.transpose() * other.rotation;
        (
            rotation_angle(&rel),
            (self.translation - other.translation).norm(),
        )
    }

    /// `‖self − other‖_F` over the full 4×4 matrices.
    pub fn frobenius_distance(&self, other: &Pose) -> f64 {
        (self.to_homogeneous() - other.to_homogeneous()).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.iter().chain(self.translation.iter()).all(|v| v.is_finite())
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        compose(&self, &rhs)
    }
}

impl<'a> Mul<&'a Pose> for &'a Pose {
    type Output = Pose;
    fn mul(self, rhs: &'a Pose) -> Pose {
        compose(self, rhs)
    }
}

/// Homogeneous product `a·b`.
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    Pose::from_parts(
        a.rotation * b.rotation,
        a.rotation * b.translation + a.translation,
    )
}

/// `(Rᵀ, −Rᵀt)`.
pub fn inverse(a: &Pose) -> Pose {
    let rt = a.rotation.transpose();
    Pose::from_parts(rt, -(rt * a.translation))
}

pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).norm()
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let w = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let sin = 0.5 * w.norm();
    let cos = 0.5 * (r.trace() - 1.0);
    sin.atan2(cos)
}

/// Rodrigues' formula.
pub fn exp_so3(rvec: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = rvec.norm_squared();
    let k = skew(rvec);
    let (a, b) = if theta2 < 1e-12 {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Nearest rotation in Frobenius norm, via SVD with the
/// `diag(1, 1, det(UVᵀ))` sign correction.
pub fn so3_project(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    if !m.iter().all(|v| v.is_finite()) || m.determinant().abs() <= 1e-12 {
        return Err(Error::DegenerateMatrix);
    }
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateMatrix),
    };
    let d = (u * v_t).determinant().signum();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    Ok(u * correction * v_t)
}

/// Axis-angle encoding of a pose: `rvec` is axis times angle (radians).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AxisAngleParam {
    pub rvec: Vector3<f64>,
    pub tvec: Vector3<f64>,
}

impl AxisAngleParam {
    pub fn new(rvec: Vector3<f64>, tvec: Vector3<f64>) -> Self {
        Self { rvec, tvec }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            rvec: Vector3::new(v[0], v[1], v[2]),
            tvec: Vector3::new(v[3], v[4], v[5]),
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.rvec.x,
            self.rvec.y,
            self.rvec.z,
            self.tvec.x,
            self.tvec.y,
            self.tvec.z,
        ]
    }
}

/// Canonical-branch axis-angle encoding; rejects angles within 1e-6 of π.
pub fn axis_angle_encode(p: &Pose) -> Result<AxisAngleParam> {
    let r = &p.rotation;
    let w = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]) * 0.5;
    let sin = w.norm();
    let cos = 0.5 * (r.trace() - 1.0);
    let theta = sin.atan2(cos);
    if theta > core::f64::consts::PI - 1e-6 {
        return Err(Error::NearPiRotation);
    }
    let scale = if theta < 1e-8 {
        1.0 + theta * theta / 6.0
    } else {
        theta / sin
    };
    Ok(AxisAngleParam::new(w * scale, p.translation))
}

pub fn axis_angle_decode(theta: &AxisAngleParam) -> Pose {
    Pose::from_parts(exp_so3(&theta.rvec), theta.tvec)
}

/// Pinhole intrinsics with the 5-coefficient radial-tangential model
/// `(k1, k2, p1, p2, k3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub skew: f64,
    pub dist: [f64; 5],
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn pinhole(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Self {
        Self {
            fx,
            fy,
            cx,
            cy,
            skew: 0.0,
            dist: [0.0; 5],
            width,
            height,
        }
    }

    pub fn with_distortion(mut self, dist: [f64; 5]) -> Self {
        self.dist = dist;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy, self.skew]
            .iter()
            .chain(self.dist.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidIntrinsics("non-finite parameter".into()));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidIntrinsics("focal lengths must be positive".into()));
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64) {
            return Err(Error::InvalidIntrinsics("cx outside (0, width)".into()));
        }
        if !(self.cy > 0.0 && self.cy < self.height as f64) {
            return Err(Error::InvalidIntrinsics("cy outside (0, height)".into()));
        }
        Ok(())
    }

    pub fn has_distortion(&self) -> bool {
        self.dist.iter().any(|&d| d != 0.0)
    }

    pub fn contains(&self, px: &Vector2<f64>) -> bool {
        px.x >= 0.0 && px.y >= 0.0 && px.x <= self.width as f64 && px.y <= self.height as f64
    }

    /// Applies distortion to normalized coordinates.
    pub fn distort(&self, xy: &Vector2<f64>) -> Vector2<f64> {
        self.distort_with_jacobian(xy).0
    }

    fn distort_with_jacobian(&self, xy: &Vector2<f64>) -> (Vector2<f64>, nalgebra::Matrix2<f64>) {
        let [k1, k2, p1, p2, k3] = self.dist;
        let (x, y) = (xy.x, xy.y);
        let r2 = x * x + y * y;
        let radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
        let dradial = k1 + r2 * (2.0 * k2 + 3.0 * k3 * r2);
        let xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
        let yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
        let jac = nalgebra::Matrix2::new(
            radial + 2.0 * x * x * dradial + 2.0 * p1 * y + 6.0 * p2 * x,
            2.0 * x * y * dradial + 2.0 * p1 * x + 2.0 * p2 * y,
            2.0 * x * y * dradial + 2.0 * p1 * x + 2.0 * p2 * y,
            radial + 2.0 * y * y * dradial + 6.0 * p1 * y + 2.0 * p2 * x,
        );
        (Vector2::new(xd, yd), jac)
    }

    /// Pixel of a camera-frame point, with the 2×3 Jacobian `∂pixel/∂point`.
    pub fn project_camera_point(&self, p: &Vector3<f64>) -> Result<(Vector2<f64>, Matrix2x3<f64>)> {
        if !(p.z > MIN_DEPTH) {
            return Err(Error::NonPositiveDepth { depth: p.z });
        }
        let iz = 1.0 / p.z;
        let xy = Vector2::new(p.x * iz, p.y * iz);
        let (d, jd) = self.distort_with_jacobian(&xy);
        let pixel = Vector2::new(self.fx * d.x + self.skew * d.y + self.cx, self.fy * d.y + self.cy);
        let k = nalgebra::Matrix2::new(self.fx, self.skew, 0.0, self.fy);
        let dxy = Matrix2x3::new(iz, 0.0, -xy.x * iz, 0.0, iz, -xy.y * iz);
        Ok((pixel, k * jd * dxy))
    }

    /// Inverts the intrinsic mapping and distortion, returning normalized
    /// coordinates `(x/z, y/z)`.
    pub fn undistort(&self, px: &Vector2<f64>) -> Vector2<f64> {
        let yd = (px.y - self.cy) / self.fy;
        let xd = (px.x - self.cx - self.skew * yd) / self.fx;
        let target = Vector2::new(xd, yd);
        if !self.has_distortion() {
            return target;
        }
        let mut xy = target;
        for _ in 0..30 {
            let (d, j) = self.distort_with_jacobian(&xy);
            let r = d - target;
            if r.norm() < 1e-15 {
                break;
            }
            match j.try_inverse() {
                Some(ji) => xy -= ji * r,
                None => break,
            }
        }
        xy
    }
}

/// Projects a source-frame point through `pose` (source→camera) and `k`.
pub fn project_point(k: &CameraIntrinsics, pose: &Pose, x: &Vector3<f64>) -> Result<Vector2<f64>> {
    Ok(k.project_camera_point(&pose.transform_point(x))?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_2, PI};

    fn rz(angle: f64, t: Vector3<f64>) -> Pose {
        Pose::from_axis_angle(Vector3::z(), angle, t)
    }

    fn k1000() -> CameraIntrinsics {
        CameraIntrinsics::pinhole(1000.0, 1000.0, 500.0, 500.0, 1000, 1000)
    }

    #[test]
    fn compose_rz90_by_hand() {
        let a = rz(FRAC_PI_2, Vector3::new(1.0, 0.0, 0.0));
        let b = rz(FRAC_PI_2, Vector3::zeros());
        let c = compose(&a, &b);
        let expected = rz(PI, Vector3::new(1.0, 0.0, 0.0));
        assert!(c.frobenius_distance(&expected) < 1e-12);
    }

    #[test]
    fn inverse_pure_translation() {
        let p = Pose::from_translation(Vector3::new(1.0, 2.0, 3.0));
        let inv = inverse(&p);
        assert_eq!(*inv.translation(), Vector3::new(-1.0, -2.0, -3.0));
        assert_eq!(inverse(&Pose::identity()), Pose::identity());
    }

    #[test]
    fn projection_examples() {
        let k = k1000();
        let id = Pose::identity();
        let p = project_point(&k, &id, &Vector3::new(0.0, 0.0, 1000.0)).unwrap();
        assert!((p - Vector2::new(500.0, 500.0)).norm() < 1e-12);
        let p = project_point(&k, &id, &Vector3::new(100.0, 0.0, 1000.0)).unwrap();
        assert!((p - Vector2::new(600.0, 500.0)).norm() < 1e-12);
        let kd = k.with_distortion([0.1, 0.0, 0.0, 0.0, 0.0]);
        let p = project_point(&kd, &id, &Vector3::new(100.0, 0.0, 1000.0)).unwrap();
        assert!((p - Vector2::new(600.1, 500.0)).norm() < 1e-9);
    }

    #[test]
    fn projection_behind_camera() {
        let r = project_point(&k1000(), &Pose::identity(), &Vector3::new(0.0, 0.0, -1.0));
        assert!(matches!(r, Err(Error::NonPositiveDepth { .. })));
        let r = project_point(&k1000(), &Pose::identity(), &Vector3::new(0.0, 0.0, 0.0));
        assert!(matches!(r, Err(Error::NonPositiveDepth { .. })));
    }

    #[test]
    fn undistort_inverts_distort() {
        let k = k1000().with_distortion([-0.2, 0.05, 0.001, -0.002, 0.01]);
        let x = Vector3::new(120.0, -80.0, 900.0);
        let px = project_point(&k, &Pose::identity(), &x).unwrap();
        let n = k.undistort(&px);
        assert!((n - Vector2::new(x.x / x.z, x.y / x.z)).norm() < 1e-13);
    }

    #[test]
    fn so3_project_cases() {
        assert_eq!(so3_project(&Matrix3::identity()).unwrap(), Matrix3::identity());
        let r = *rz(0.7, Vector3::zeros()).rotation();
        assert!((so3_project(&(r * 2.0)).unwrap() - r).norm() < 1e-12);
        assert_eq!(so3_project(&Matrix3::zeros()), Err(Error::DegenerateMatrix));
        // reflection gets corrected to det +1
        let refl = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!((so3_project(&refl).unwrap().determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn axis_angle_examples() {
        let e = axis_angle_encode(&Pose::identity()).unwrap();
        assert_eq!(e.rvec, Vector3::zeros());
        let d = axis_angle_decode(&AxisAngleParam::new(Vector3::new(0.0, 0.0, FRAC_PI_2), Vector3::zeros()));
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((d.rotation() - expected).norm() < 1e-15);
        let near_pi = rz(PI - 1e-8, Vector3::zeros());
        assert_eq!(axis_angle_encode(&near_pi), Err(Error::NearPiRotation));
    }

    #[test]
    fn pose_validation() {
        assert!(Pose::new(Matrix3::identity() * 1.01, Vector3::zeros()).is_err());
        let refl = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Pose::new(refl, Vector3::zeros()).is_err());
        let h = rz(0.3, Vector3::new(1.0, 2.0, 3.0)).to_homogeneous();
        let p = Pose::from_homogeneous(&h).unwrap();
        assert_eq!(p.to_homogeneous().row(3), Matrix4::<f64>::identity().row(3));
        let mut bad = h;
        bad[(3, 0)] = 1e-3;
        assert!(Pose::from_homogeneous(&bad).is_err());
    }

    #[test]
    fn projection_jacobian_matches_finite_differences() {
        let k = k1000().with_distortion([-0.1, 0.02, 0.001, 0.002, 0.003]);
        let p = Vector3::new(150.0, -60.0, 800.0);
        let (_, j) = k.project_camera_point(&p).unwrap();
        let h = 1e-4;
        for i in 0..3 {
            let mut a = p;
            let mut b = p;
            a[i] += h;
            b[i] -= h;
            let fd = (k.project_camera_point(&a).unwrap().0 - k.project_camera_point(&b).unwrap().0) / (2.0 * h);
            assert!((fd - j.column(i)).norm() < 1e-6 * (1.0 + fd.norm()));
        }
    }
}
