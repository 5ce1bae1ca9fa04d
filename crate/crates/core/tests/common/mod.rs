#![allow(dead_code)]

use nalgebra::{Matrix4, Vector2, Vector3, Vector4};
use netcal_core::dataset::{build_frs, Dataset, FoundationalRelationship};
use netcal_core::geometry::{CameraIntrinsics, Pose};
use netcal_core::sim::{preset_scene, Preset, SyntheticScene};
use netcal_core::VariablePool;
use netcal_core::connectivity::select_reference;

/// Pixel of pattern point `x` for chain `C·T⁻¹·P⁻¹`, written out with 4×4
/// matrices and the distortion polynomial expanded by hand.
pub fn oracle_pixel(k: &CameraIntrinsics, c: &Pose, p: &Pose, t: &Pose, x: &Vector3<f64>) -> Vector2<f64> {
    let m: Matrix4<f64> = c.to_homogeneous()
        * t.to_homogeneous().try_inverse().unwrap()
        * p.to_homogeneous().try_inverse().unwrap();
    let h = m * Vector4::new(x.x, x.y, x.z, 1.0);
    let (u, v) = (h[0] / h[2], h[1] / h[2]);
    let [k1, k2, p1, p2, k3] = k.dist;
    let r2 = u * u + v * v;
    let r4 = r2 * r2;
    let r6 = r4 * r2;
    let radial = 1.0 + k1 * r2 + k2 * r4 + k3 * r6;
    let ud = u * radial + 2.0 * p1 * u * v + p2 * (r2 + 2.0 * u * u);
    let vd = v * radial + p1 * (r2 + 2.0 * v * v) + 2.0 * p2 * u * v;
    Vector2::new(k.fx * ud + k.skew * vd + k.cx, k.fy * vd + k.cy)
}

pub struct Prepared {
    pub scene: SyntheticScene,
    pub frs: Vec<FoundationalRelationship>,
    pub truth: VariablePool,
}

impl Prepared {
    pub fn data(&self) -> &Dataset {
        &self.scene.dataset
    }
}

/// Scene, relationships and the gauge-aligned truth pool.
pub fn prepare(preset: Preset, sigma: f64, seed: u64) -> Prepared {
    let scene = preset_scene(preset, sigma, None, seed).unwrap();
    let frs = build_frs(&scene.dataset, 5.0).unwrap();
    let reference = select_reference(&frs).unwrap();
    let truth = scene.truth.to_pool(reference).unwrap();
    Prepared { scene, frs, truth }
}
