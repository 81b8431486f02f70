//! Three-stage bounding-volume refinement: validity filter, containment
//! merge, appearance filter.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::volumes::BoundingVolume3D;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefineError {
    #[error("cannot merge class {0} with class {1}")]
    ClassMismatch(u32, u32),
    #[error("invalid refine config: {0}")]
    InvalidConfig(String),
}

/// Refinement thresholds. Defaults are tuning values, not measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    /// m³
    pub vol_min: f64,
    /// m³
    pub vol_max: f64,
    /// metres added to every face of the container before the test
    pub containment_margin: f64,
    pub volume_ratio_max: f64,
    pub app_min: u32,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            vol_min: 0.01,
            vol_max: 8.0,
            containment_margin: 0.10,
            volume_ratio_max: 10.0,
            app_min: 3,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<(), RefineError> {
        let bad = |m: &str| Err(RefineError::InvalidConfig(m.to_string()));
        if !(self.vol_min > 0.0 && self.vol_min < self.vol_max && self.vol_max.is_finite()) {
            return bad("need 0 < vol_min < vol_max");
        }
        if !(self.containment_margin >= 0.0 && self.containment_margin.is_finite()) {
            return bad("containment_margin must be >= 0");
        }
        if !(self.volume_ratio_max > 1.0 && self.volume_ratio_max.is_finite()) {
            return bad("volume_ratio_max must be > 1");
        }
        if self.app_min < 1 {
            return bad("app_min must be >= 1");
        }
        Ok(())
    }
}

/// Per-stage object counts plus removal reasons.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineReport {
    /// input, after validity filter, after merge, after appearance filter
    pub stage_counts: [usize; 4],
    pub removed_below_min_volume: usize,
    pub removed_above_max_volume: usize,
    pub merged: usize,
    pub removed_low_appearances: usize,
}

pub fn valid_object(v: &BoundingVolume3D, cfg: &RefineConfig) -> bool {
    let vol = v.volume();
    cfg.vol_min <= vol && vol <= cfg.vol_max
}

/// Does `a` hold `b`: same class, `b` inside `a` grown by the margin, and
/// `a` not more than `volume_ratio_max` times bigger than `b`.
pub fn volume_contains(a: &BoundingVolume3D, b: &BoundingVolume3D, cfg: &RefineConfig) -> bool {
    a.class_id == b.class_id
        && a.aabb.dilated(cfg.containment_margin).contains_aabb(&b.aabb)
        && a.volume() / b.volume() <= cfg.volume_ratio_max
}

fn sorted_union(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out.sort_unstable();
    out.dedup();
    out
}

/// Keeps the geometry of the larger operand (the first one on a tie) and
/// sums appearances.
pub fn merge_volumes(
    a: &BoundingVolume3D,
    b: &BoundingVolume3D,
) -> Result<BoundingVolume3D, RefineError> {
    if a.class_id != b.class_id {
        return Err(RefineError::ClassMismatch(a.class_id, b.class_id));
    }
    let bigger = if b.volume() > a.volume() { b } else { a };
    Ok(BoundingVolume3D {
        appearances: a.appearances + b.appearances,
        source_frames: sorted_union(&a.source_frames, &b.source_frames),
        member_points: sorted_union(&a.member_points, &b.member_points),
        ..bigger.clone()
    })
}

fn related(a: &BoundingVolume3D, b: &BoundingVolume3D, cfg: &RefineConfig) -> bool {
    volume_contains(a, b, cfg) || volume_contains(b, a, cfg)
}

/// Stage 1.
pub fn filter_valid(volumes: Vec<BoundingVolume3D>, cfg: &RefineConfig, report: &mut RefineReport) -> Vec<BoundingVolume3D> {
    volumes
        .into_iter()
        .filter(|v| {
            let vol = v.volume();
            if vol < cfg.vol_min || vol.is_nan() {
                report.removed_below_min_volume += 1;
                false
            } else if vol > cfg.vol_max {
                report.removed_above_max_volume += 1;
                false
            } else {
                true
            }
        })
        .collect()
}

/// Stage 2: merges containing pairs until none remain.
///
/// The cursor `i` walks the list; for the volume at `i` the whole list is
/// scanned for the first partner `j` that contains it or is contained by it.
/// The merge lands at `min(i, j)`, the other slot is removed, and the
/// cursor moves back to the merged slot so it is compared against everything
/// again. Everything before the cursor is pairwise unrelated, so when the
/// cursor reaches the end no containing pair is left. The merge sequence is
/// the same as repeatedly taking the lexicographically first related pair.
pub fn merge_contained(volumes: Vec<BoundingVolume3D>, cfg: &RefineConfig) -> Vec<BoundingVolume3D> {
    let mut vols = volumes;
    let mut i = 0;
    while i < vols.len() {
        let partner = (0..vols.len()).find(|&j| j != i && related(&vols[i], &vols[j], cfg));
        match partner {
            Some(j) => {
                let (lo, hi) = (i.min(j), i.max(j));
                let merged = merge_volumes(&vols[lo], &vols[hi])
                    .expect("related volumes share a class");
                vols[lo] = merged;
                vols.remove(hi);
                i = lo;
            }
            None => i += 1,
        }
    }
    vols
}

/// Stage 3.
pub fn filter_appearances(volumes: Vec<BoundingVolume3D>, cfg: &RefineConfig, report: &mut RefineReport) -> Vec<BoundingVolume3D> {
    let before = volumes.len();
    let kept: Vec<_> = volumes.into_iter().filter(|v| v.appearances >= cfg.app_min).collect();
    report.removed_low_appearances += before - kept.len();
    kept
}

pub fn refine(volumes: Vec<BoundingVolume3D>, cfg: &RefineConfig) -> (Vec<BoundingVolume3D>, RefineReport) {
    let mut report = RefineReport::default();
    report.stage_counts[0] = volumes.len();
    let v1 = filter_valid(volumes, cfg, &mut report);
    report.stage_counts[1] = v1.len();
    let v2 = merge_contained(v1, cfg);
    report.stage_counts[2] = v2.len();
    report.merged = report.stage_counts[1] - report.stage_counts[2];
    let v3 = filter_appearances(v2, cfg, &mut report);
    report.stage_counts[3] = v3.len();
    (v3, report)
}
