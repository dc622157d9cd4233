use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;
use crate::spatial::{dilated_neighbors, knn, NeighborList, SpatialIndex};

/// Per-point aggregation sets `A_i = {i} ∪ neighbors(i)` for one `(k, d)`.
///
/// The center point comes first, followed by its neighbors in ascending
/// distance order. Padding rows have empty sets. When a cloud has fewer than
/// `k` other valid points the neighbor part is truncated to what exists.
#[derive(Clone, Debug, PartialEq)]
pub struct Neighborhoods {
    sets: Vec<Vec<usize>>,
    k: usize,
    d: usize,
}

impl Neighborhoods {
    /// Dilated neighborhoods for every valid point of the indexed cloud.
    pub fn dilated(index: &SpatialIndex, k: usize, d: usize) -> Result<Self> {
        Self::build(index, k, d, |i, k| dilated_neighbors(index, i, k, d))
    }

    /// Plain k-NN neighborhoods, without going through the dilation code.
    pub fn plain(index: &SpatialIndex, k: usize) -> Result<Self> {
        Self::build(index, k, 1, |i, k| knn(index, i, k))
    }

    fn build(
        index: &SpatialIndex,
        k: usize,
        d: usize,
        query: impl Fn(usize, usize) -> Result<NeighborList> + Sync,
    ) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::invalid("k and d must be positive"));
        }
        let k_eff = k.min(index.len() - 1);
        let sets = (0..index.cloud_len())
            .into_par_iter()
            .map(|i| {
                if !index.contains(i) {
                    return Ok(Vec::new());
                }
                let mut set = Vec::with_capacity(k_eff + 1);
                set.push(i);
                if k_eff > 0 {
                    set.extend(query(i, k_eff)?.indices);
                }
                Ok(set)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { sets, k, d })
    }

    /// Wraps explicit sets. Each valid point's set must start with itself.
    pub fn from_sets(sets: Vec<Vec<usize>>, k: usize, d: usize) -> Result<Self> {
        for (i, s) in sets.iter().enumerate() {
            if let Some(&first) = s.first() {
                if first != i {
                    return Err(Error::invalid(format!(
                        "aggregation set of point {i} must start with the point itself"
                    )));
                }
            }
            if s.iter().any(|&j| j >= sets.len()) {
                return Err(Error::invalid(format!("set of point {i} indexes out of range")));
            }
        }
        Ok(Self { sets, k, d })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn set(&self, i: usize) -> &[usize] {
        &self.sets[i]
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    /// Checks that the sets fit `cloud`: one per row, empty exactly for
    /// padding, at most `k + 1` members, only valid members.
    pub fn check_against(&self, valid: &[bool]) -> Result<()> {
        if self.sets.len() != valid.len() {
            return Err(Error::shape(format!(
                "{} neighborhoods for {} points",
                self.sets.len(),
                valid.len()
            )));
        }
        for (i, s) in self.sets.iter().enumerate() {
            if valid[i] == s.is_empty() || s.len() > self.k + 1 {
                return Err(Error::shape(format!(
                    "point {i} has an aggregation set of size {} (k = {})",
                    s.len(),
                    self.k
                )));
            }
            if s.iter().any(|&j| !valid[j]) {
                return Err(Error::shape(format!("point {i} aggregates a padding row")));
            }
        }
        Ok(())
    }
}

/// Neighborhoods for every layer of a network, computed once per distinct
/// `(k, d)` from the fixed point positions.
#[derive(Clone, Debug)]
pub struct LayerNeighborhoods {
    per_layer: Vec<Arc<Neighborhoods>>,
}

impl LayerNeighborhoods {
    pub fn compute(cloud: &PointCloud, specs: &[(usize, usize)]) -> Result<Self> {
        let index = SpatialIndex::build(cloud)?;
        Self::compute_with(&index, specs, false)
    }

    /// Like [`LayerNeighborhoods::compute`]; with `plain_when_undilated`, layers
    /// with `d = 1` use the plain k-NN routine instead of the dilated one.
    pub fn compute_with(
        index: &SpatialIndex,
        specs: &[(usize, usize)],
        plain_when_undilated: bool,
    ) -> Result<Self> {
        let mut cache: Vec<((usize, usize), Arc<Neighborhoods>)> = Vec::new();
        let mut per_layer = Vec::with_capacity(specs.len());
        for &(k, d) in specs {
            if let Some((_, n)) = cache.iter().find(|(key, _)| *key == (k, d)) {
                per_layer.push(Arc::clone(n));
                continue;
            }
            let n = if plain_when_undilated && d == 1 {
                Neighborhoods::plain(index, k)?
            } else {
                Neighborhoods::dilated(index, k, d)?
            };
            let n = Arc::new(n);
            cache.push(((k, d), Arc::clone(&n)));
            per_layer.push(n);
        }
        Ok(Self { per_layer })
    }

    pub fn from_layers(per_layer: Vec<Neighborhoods>) -> Self {
        Self {
            per_layer: per_layer.into_iter().map(Arc::new).collect(),
        }
    }

    pub fn layer(&self, l: usize) -> &Arc<Neighborhoods> {
        &self.per_layer[l]
    }

    pub fn len(&self) -> usize {
        self.per_layer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_layer.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Neighborhoods> {
        self.per_layer.iter().map(|n| n.as_ref())
    }
}
