//! Exhaustive reference versions of point association and the containment
//! merge. No indexing, no early exits.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::SparseMapPoint;
use crate::refine::{merge_volumes, volume_contains, RefineConfig};
use crate::volumes::{Aabb, BoundingVolume3D, Membership};

/// Up to `max_len` volumes of three classes scattered around a few cluster
/// centres, so nesting and chains of containment are common.
pub fn random_volumes(seed: u64, max_len: usize) -> Vec<BoundingVolume3D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(0..=max_len);
    let clusters: Vec<Vector3<f64>> = (0..rng.random_range(1..=4))
        .map(|_| Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(0.0..1.0)))
        .collect();
    (0..n)
        .map(|i| {
            let c = clusters[rng.random_range(0..clusters.len())]
                + Vector3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
            let half = Vector3::new(rng.random_range(0.1..0.6), rng.random_range(0.1..0.6), rng.random_range(0.1..0.6));
            let aabb = Aabb::new(c - half, c + half);
            let class_id = rng.random_range(1..=3);
            let mut members: Vec<u64> = (0..rng.random_range(0..6)).map(|_| rng.random_range(0..40)).collect();
            members.sort_unstable();
            members.dedup();
            BoundingVolume3D {
                class_id,
                class_name: format!("class{class_id}"),
                corners: [aabb.min, aabb.max, aabb.min, aabb.max, aabb.min, aabb.max, aabb.min, aabb.max],
                aabb,
                appearances: rng.random_range(1..=4),
                source_frames: vec![i as u64],
                member_points: members,
                front_depth: 2.0,
                depth_estimate: 2.0 * half.x,
            }
        })
        .collect()
}

/// Every (point, volume) pair is tested.
pub fn oracle_containment(points: &[SparseMapPoint], volumes: &[BoundingVolume3D]) -> Membership {
    let mut by_volume = vec![Vec::new(); volumes.len()];
    for p in points {
        let c = p.position.coords();
        for (vi, v) in volumes.iter().enumerate() {
            let inside = c.x >= v.aabb.min.x
                && c.x <= v.aabb.max.x
                && c.y >= v.aabb.min.y
                && c.y <= v.aabb.max.y
                && c.z >= v.aabb.min.z
                && c.z <= v.aabb.max.z;
            if inside {
                by_volume[vi].push(p.id);
            }
        }
    }
    for ids in &mut by_volume {
        ids.sort_unstable();
        ids.dedup();
    }
    Membership { by_volume }
}

/// Repeatedly merges the lexicographically first index pair `(a, b)`, `a < b`,
/// where either volume contains the other; the result replaces `a` and `b` is
/// dropped. Stops when a full scan of all pairs finds nothing.
pub fn oracle_merge(volumes: &[BoundingVolume3D], cfg: &RefineConfig) -> Vec<BoundingVolume3D> {
    let mut vols = volumes.to_vec();
    loop {
        let mut found = None;
        for a in 0..vols.len() {
            for b in 0..vols.len() {
                if a < b
                    && found.is_none()
                    && (volume_contains(&vols[a], &vols[b], cfg) || volume_contains(&vols[b], &vols[a], cfg))
                {
                    found = Some((a, b));
                }
            }
        }
        let Some((a, b)) = found else { return vols };
        vols[a] = merge_volumes(&vols[a], &vols[b]).expect("containment implies equal class");
        vols.remove(b);
    }
}
