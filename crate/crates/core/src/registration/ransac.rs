use nalgebra::Point3;
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use super::features::{FeatureCloud, DESCRIPTOR_LEN};
use super::RegistrationParams;
use crate::geom::{fit_rigid, transform_cloud};
use crate::seed::{derive_seed, rng};
use crate::{Error, PointCloud, Pose, Result, SpatialIndex};

const SCREEN_SAMPLE: usize = 100;
const SCORE_SAMPLE: usize = 1000;
const SHORTLIST: usize = 64;

/// Coarse alignment returned by [`ransac_register`].
#[derive(Debug, Clone)]
pub struct RansacResult {
    /// Transform taking reference coordinates into the scan frame.
    pub pose: Pose,
    /// Reference keypoints mapped through `pose`.
    pub aligned: PointCloud,
    /// Fraction of scan keypoints with a reference point within the inlier threshold.
    pub inlier_fraction: f64,
}

fn sq_dist(a: &[f64; DESCRIPTOR_LEN], b: &[f64; DESCRIPTOR_LEN]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` closest reference descriptors for every scan descriptor (ties to the lower index).
pub(crate) fn match_descriptors(scan: &FeatureCloud, reference: &FeatureCloud, k: usize) -> Vec<Vec<usize>> {
    scan.descriptors
        .par_iter()
        .map(|d| {
            let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
            for (j, r) in reference.descriptors.iter().enumerate() {
                let dist = sq_dist(d, r);
                if best.len() < k || dist < best[best.len() - 1].0 {
                    let pos = best.partition_point(|&(bd, _)| bd <= dist);
                    best.insert(pos, (dist, j));
                    best.truncate(k);
                }
            }
            best.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

fn strided(n: usize, cap: usize) -> Vec<usize> {
    let stride = n.div_ceil(cap).max(1);
    (0..n).step_by(stride).collect()
}

/// Scan points (by index) whose pre-image under `pose` has a reference point within `threshold`.
fn count_inliers(pose: &Pose, scan: &[Point3<f64>], subset: &[usize], ref_index: &SpatialIndex, threshold: f64) -> usize {
    let inv = pose.inverse();
    subset
        .iter()
        .filter(|&&i| ref_index.nearest_within(&inv.transform_point(&scan[i]), threshold).is_some())
        .count()
}

fn edges_agree(s: [&Point3<f64>; 3], r: [&Point3<f64>; 3], similarity: f64) -> bool {
    [(0, 1), (1, 2), (2, 0)].iter().all(|&(a, b)| {
        let ls = (s[a] - s[b]).norm();
        let lr = (r[a] - r[b]).norm();
        let (lo, hi) = if ls < lr { (ls, lr) } else { (lr, ls) };
        hi > 0.0 && lo / hi >= similarity
    })
}

/// Feature-correspondence RANSAC.
///
/// Each hypothesis pairs three random scan keypoints with one of their closest reference
/// descriptors, rejects the sample unless corresponding edge lengths agree, and fits a rigid
/// transform. Hypotheses are screened on a small scan subsample, the best are rescored on a
/// larger one, and the winner is refitted on its inliers. Every hypothesis has its own seed, so
/// the result does not depend on the number of worker threads.
pub fn ransac_register(scan: &FeatureCloud, reference: &FeatureCloud, params: &RegistrationParams, seed: u64) -> Result<RansacResult> {
    let (ns, nr) = (scan.len(), reference.len());
    if ns < 3 || nr < 3 {
        return Err(Error::InsufficientCorrespondences { scan: ns, reference: nr });
    }
    let ref_index = SpatialIndex::new(&reference.keypoints);
    let matches = match_descriptors(scan, reference, params.ransac_candidates);
    ransac_with(scan, reference, &matches, &ref_index, params, seed)
}

/// [`ransac_register`] with precomputed descriptor matches; inliers are counted against
/// `ref_index`, which may hold a denser sampling of the reference than its keypoints.
pub(crate) fn ransac_with(
    scan: &FeatureCloud,
    reference: &FeatureCloud,
    matches: &[Vec<usize>],
    ref_index: &SpatialIndex,
    params: &RegistrationParams,
    seed: u64,
) -> Result<RansacResult> {
    let (ns, nr) = (scan.len(), reference.len());
    if ns < 3 || nr < 3 {
        return Err(Error::InsufficientCorrespondences { scan: ns, reference: nr });
    }
    let scan_pts = scan.keypoints.points();
    let ref_pts = reference.keypoints.points();
    let dense_pts = ref_index.points();
    let threshold = params.ransac_inlier_threshold;

    let screen_set = strided(ns, SCREEN_SAMPLE);
    let mut screened: Vec<(usize, usize, Pose)> = (0..params.ransac_iterations)
        .into_par_iter()
        .filter_map(|h| {
            let mut r = rng(derive_seed(seed, h as u64));
            let picks = sample(&mut r, ns, 3);
            let si = [picks.index(0), picks.index(1), picks.index(2)];
            let ri = si.map(|i| matches[i][r.random_range(0..matches[i].len())]);
            let s = si.map(|i| &scan_pts[i]);
            let rr = ri.map(|i| &ref_pts[i]);
            if !edges_agree(s, rr, params.ransac_edge_similarity) {
                return None;
            }
            let pose = fit_rigid(&rr.map(|p| *p), &s.map(|p| *p))?;
            let score = count_inliers(&pose, scan_pts, &screen_set, ref_index, threshold);
            Some((h, score, pose))
        })
        .collect();
    screened.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    screened.truncate(SHORTLIST);

    let score_set = strided(ns, SCORE_SAMPLE);
    let best = screened
        .par_iter()
        .map(|(h, _, pose)| (*h, count_inliers(pose, scan_pts, &score_set, ref_index, threshold), pose))
        .collect::<Vec<_>>()
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(_, _, p)| *p)
        .unwrap_or_else(Pose::identity);

    let all: Vec<usize> = (0..ns).collect();
    let mut pose = best;
    let mut inliers = count_inliers(&pose, scan_pts, &all, ref_index, threshold);
    for _ in 0..3 {
        let inv = pose.inverse();
        let (src, dst): (Vec<_>, Vec<_>) = scan_pts
            .iter()
            .filter_map(|s| {
                let (j, _) = ref_index.nearest_within(&inv.transform_point(s), threshold)?;
                Some((dense_pts[j], *s))
            })
            .unzip();
        let Some(refit) = fit_rigid(&src, &dst) else { break };
        let n = count_inliers(&refit, scan_pts, &all, ref_index, threshold);
        if n < inliers {
            break;
        }
        pose = refit;
        inliers = n;
    }

    Ok(RansacResult {
        aligned: transform_cloud(&reference.keypoints, &pose),
        inlier_fraction: inliers as f64 / ns as f64,
        pose,
    })
}
