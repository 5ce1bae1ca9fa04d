use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use nalgebra::Vector3;
use rand::Rng;

use crate::connectivity::VariableId;
use crate::dataset::{Detection, FoundationalRelationship};
use crate::geometry::Pose;

pub fn random_pose<R: Rng>(rng: &mut R, translation_scale: f64) -> Pose {
    let axis = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let angle = rng.random_range(0.0..3.0);
    let t = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ) * translation_scale;
    Pose::from_axis_angle(axis, angle, t)
}

pub fn fr(camera: u32, pattern: u32, time: u32) -> FoundationalRelationship {
    FoundationalRelationship {
        camera,
        pattern,
        time,
        a: Pose::identity(),
        detection: Detection {
            camera_id: camera,
            pattern_id: pattern,
            time_id: time,
            corners: Vec::new(),
        },
        rmse: 0.0,
    }
}

/// Relationships whose `A` is exactly `C·T⁻¹·P⁻¹` for random truth poses.
pub fn exact_frs<R: Rng>(rng: &mut R, triples: &[(u32, u32, u32)]) -> Vec<FoundationalRelationship> {
    let mut truth: BTreeMap<VariableId, Pose> = BTreeMap::new();
    let mut get = |v: VariableId, rng: &mut R| *truth.entry(v).or_insert_with(|| random_pose(rng, 500.0));
    triples
        .iter()
        .map(|&(c, p, t)| {
            let cp = get(VariableId::camera(c), rng);
            let pp = get(VariableId::pattern(p), rng);
            let tp = get(VariableId::time(t), rng);
            let mut f = fr(c, p, t);
            f.a = cp.compose(&tp.inverse()).compose(&pp.inverse());
            f
        })
        .collect()
}
