//! Exact k-nearest-neighbor search over point positions and the dilated
//! neighbor selection rule.
//!
//! Neighbor order is ascending Euclidean distance with exact ties broken by
//! ascending point index; the query point itself is never returned. The
//! kd-tree and the brute-force oracle compute squared distances with the same
//! expression, so their results agree bit for bit.

mod kdtree;

use rayon::prelude::*;

pub use kdtree::SpatialIndex;

use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;

/// Ordered neighborhood of one query point.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborList {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
    pub k: usize,
    /// Dilation actually used to produce the list (after any fallback).
    pub d: usize,
}

impl NeighborList {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn max_distance(&self) -> f64 {
        self.distances.last().copied().unwrap_or(0.0)
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

pub fn build_index(cloud: &PointCloud) -> Result<SpatialIndex> {
    SpatialIndex::build(cloud)
}

/// The `k` valid points nearest to `query_index`, self excluded.
pub fn knn(index: &SpatialIndex, query_index: usize, k: usize) -> Result<NeighborList> {
    let (indices, distances) = index.k_nearest(query_index, k)?;
    Ok(NeighborList {
        indices,
        distances,
        k,
        d: 1,
    })
}

/// Dilation that fits into `available` non-self points: `d` if `k·d` of them
/// exist, otherwise `max(1, floor(available / k))`.
pub fn effective_dilation(k: usize, d: usize, available: usize) -> usize {
    match k.checked_mul(d) {
        Some(kd) if kd <= available => d,
        _ => (available / k).max(1),
    }
}

/// Dilated neighborhood: the sorted `k·d` nearest neighbors, keeping ranks
/// `d, 2d, …, k·d` (1-based). With `d = 1` this is exactly [`knn`].
pub fn dilated_neighbors(
    index: &SpatialIndex,
    query_index: usize,
    k: usize,
    d: usize,
) -> Result<NeighborList> {
    if d == 0 {
        return Err(Error::invalid("dilation must be positive"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    let available = index.len().saturating_sub(1);
    if k > available {
        return Err(Error::InsufficientPoints { needed: k, available });
    }
    let d_eff = effective_dilation(k, d, available);
    let (all_idx, all_dist) = index.k_nearest(query_index, k * d_eff)?;
    Ok(NeighborList {
        indices: every_nth(&all_idx, d_eff),
        distances: every_nth(&all_dist, d_eff),
        k,
        d: d_eff,
    })
}

/// Ranks `step, 2·step, …` (1-based) of a sorted list.
fn every_nth<T: Copy>(sorted: &[T], step: usize) -> Vec<T> {
    sorted.iter().skip(step - 1).step_by(step).copied().collect()
}

/// Dilated neighborhoods for every valid point; padding rows get `None`.
pub fn dilated_neighbor_table(index: &SpatialIndex, k: usize, d: usize) -> Result<Vec<Option<NeighborList>>> {
    (0..index.cloud_len())
        .into_par_iter()
        .map(|i| {
            if index.contains(i) {
                dilated_neighbors(index, i, k, d).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect()
}

/// Reference k-NN by a full sort of all distances. Test oracle.
pub fn brute_force_knn(cloud: &PointCloud, query_index: usize, k: usize) -> Result<NeighborList> {
    if query_index >= cloud.len() || !cloud.valid()[query_index] {
        return Err(Error::invalid(format!(
            "query {query_index} is not a valid point"
        )));
    }
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    let q = cloud.positions()[query_index];
    let mut all: Vec<(f64, usize)> = cloud
        .valid_indices()
        .filter(|&j| j != query_index)
        .map(|j| {
            let p = cloud.positions()[j];
            let dx = q[0] - p[0];
            let dy = q[1] - p[1];
            let dz = q[2] - p[2];
            (dx * dx + dy * dy + dz * dz, j)
        })
        .collect();
    if k > all.len() {
        return Err(Error::InsufficientPoints {
            needed: k,
            available: all.len(),
        });
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(k);
    Ok(NeighborList {
        indices: all.iter().map(|&(_, j)| j).collect(),
        distances: all.iter().map(|&(d2, _)| d2.sqrt()).collect(),
        k,
        d: 1,
    })
}
