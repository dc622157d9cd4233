use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::squared_distance;
use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;

const LEAF_SIZE: usize = 16;

/// Immutable kd-tree over the valid points of a cloud.
///
/// Nodes split at the median along the axis of widest extent; leaves hold at
/// most 16 points. Every node keeps its bounding box so pruning uses the true
/// box distance.
#[derive(Clone, Debug)]
pub struct SpatialIndex {
    /// Positions of the whole cloud, addressed by original point index.
    positions: Vec<[f64; 3]>,
    is_member: Vec<bool>,
    /// Original indices of valid points, permuted into tree order.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Clone, Debug)]
struct Node {
    lo: [f64; 3],
    hi: [f64; 3],
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl SpatialIndex {
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        let order: Vec<usize> = cloud.valid_indices().collect();
        if order.is_empty() {
            return Err(Error::EmptyInput("no valid points to index".into()));
        }
        let mut index = Self {
            positions: cloud.positions().to_vec(),
            is_member: cloud.valid().to_vec(),
            order,
            nodes: Vec::new(),
        };
        let n = index.order.len();
        index.build_node(0, n);
        Ok(index)
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let (lo, hi) = self.bounds(start, end);
        let id = self.nodes.len();
        self.nodes.push(Node {
            lo,
            hi,
            start,
            end,
            children: None,
        });
        if end - start > LEAF_SIZE {
            let axis = (0..3)
                .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
                .unwrap_or(0);
            let mid = start + (end - start) / 2;
            let positions = &self.positions;
            self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                positions[a][axis].total_cmp(&positions[b][axis]).then(a.cmp(&b))
            });
            let left = self.build_node(start, mid);
            let right = self.build_node(mid, end);
            self.nodes[id].children = Some((left, right));
        }
        id
    }

    fn bounds(&self, start: usize, end: usize) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            let p = self.positions[i];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    /// Number of indexed (valid) points.
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Row count of the cloud the index was built from, padding included.
    pub fn cloud_len(&self) -> usize {
        self.positions.len()
    }

    pub fn contains(&self, point: usize) -> bool {
        self.is_member.get(point).copied().unwrap_or(false)
    }

    pub fn position(&self, point: usize) -> [f64; 3] {
        self.positions[point]
    }

    /// The `k` nearest indexed points to `query`, excluding `query` itself,
    /// as (indices, distances) in ascending (distance, index) order.
    pub(crate) fn k_nearest(&self, query: usize, k: usize) -> Result<(Vec<usize>, Vec<f64>)> {
        if !self.contains(query) {
            return Err(Error::invalid(format!("query {query} is not an indexed point")));
        }
        if k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        let available = self.len() - 1;
        if k > available {
            return Err(Error::InsufficientPoints { needed: k, available });
        }

        let q = self.positions[query];
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if heap.len() == k {
                let worst = heap.peek().map_or(f64::INFINITY, |c| c.d2);
                // `>` keeps equal-distance boxes so index tie-breaks stay exact.
                if box_distance(&q, &node.lo, &node.hi) > worst {
                    continue;
                }
            }
            match node.children {
                Some((left, right)) => {
                    let dl = box_distance(&q, &self.nodes[left].lo, &self.nodes[left].hi);
                    let dr = box_distance(&q, &self.nodes[right].lo, &self.nodes[right].hi);
                    // push the farther child first so the nearer is explored first
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
                None => {
                    for &j in &self.order[node.start..node.end] {
                        if j == query {
                            continue;
                        }
                        let c = Candidate {
                            d2: squared_distance(&q, &self.positions[j]),
                            index: j,
                        };
                        if heap.len() < k {
                            heap.push(c);
                        } else if c < *heap.peek().expect("heap is full") {
                            heap.pop();
                            heap.push(c);
                        }
                    }
                }
            }
        }

        let sorted = heap.into_sorted_vec();
        Ok((
            sorted.iter().map(|c| c.index).collect(),
            sorted.iter().map(|c| c.d2.sqrt()).collect(),
        ))
    }
}

/// Squared distance from `q` to the box `[lo, hi]`. Never exceeds the
/// squared distance from `q` to any point inside the box, also in floating
/// point, because each term is a monotone function of a coordinate gap.
#[inline]
fn box_distance(q: &[f64; 3], lo: &[f64; 3], hi: &[f64; 3]) -> f64 {
    let mut d = [0.0; 3];
    for a in 0..3 {
        if q[a] < lo[a] {
            d[a] = q[a] - lo[a];
        } else if q[a] > hi[a] {
            d[a] = q[a] - hi[a];
        }
    }
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}
