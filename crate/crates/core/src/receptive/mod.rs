//! Receptive fields of point convolution stacks.
//!
//! The graph receptive field is defined recursively over the per-layer
//! aggregation sets `A_i`:
//!
//! ```text
//! RF⁰(i) = {i}
//! RFˡ(i) = ∪_{j ∈ A_i(layer l)} RFˡ⁻¹(j)
//! ```
//!
//! It is an upper bound on the empirical receptive field, the set of input
//! points whose features have a nonzero gradient on a unit's output; ReLUs
//! can cut paths, so the two agree only when every path stays active (see
//! [`positive_network`]).

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dpc::{trunk_backward, trunk_forward, LayerNeighborhoods, Network, NetworkConfig};
use crate::error::{Error, Result};
use crate::nn::{Matrix, Parameterized};
use crate::pointcloud::{format_ply_colored, PointCloud};
use crate::spatial::squared_distance;

pub const MEMBER_COLOR: [u8; 3] = [0, 0, 255];
pub const TARGET_COLOR: [u8; 3] = [255, 0, 0];
pub const OTHER_COLOR: [u8; 3] = [180, 180, 180];

/// Gradient magnitude above which an input point counts as influencing.
pub const EMPIRICAL_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReceptiveField {
    pub target: usize,
    pub members: BTreeSet<usize>,
    pub depth: usize,
    /// `(k, d)` of each traversed layer, bottom first.
    pub layers: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfStats {
    pub size: usize,
    /// Largest distance from the target to a member, in meters.
    pub radius: f64,
    /// Fraction of valid points that are members.
    pub coverage: f64,
    /// Members divided by the valid points inside the radius ball around the
    /// target; low values mean a sparse, dilated field.
    pub density: f64,
}

/// Graph receptive field of `target` after the first `depth` layers.
pub fn rf_compute(neighborhoods: &LayerNeighborhoods, target: usize, depth: usize) -> Result<ReceptiveField> {
    if depth > neighborhoods.len() {
        return Err(Error::invalid(format!(
            "depth {depth} exceeds the {} available layers",
            neighborhoods.len()
        )));
    }
    let n = neighborhoods.iter().next().map_or(0, |nb| nb.len());
    if depth > 0 && (target >= n || neighborhoods.layer(0).set(target).is_empty()) {
        return Err(Error::invalid(format!("target {target} is not a valid point")));
    }

    let mut frontier = vec![target];
    let mut mark = vec![false; n.max(target + 1)];
    for l in (0..depth).rev() {
        let layer = neighborhoods.layer(l);
        mark.fill(false);
        let mut next = Vec::new();
        for &j in &frontier {
            for &m in layer.set(j) {
                if !std::mem::replace(&mut mark[m], true) {
                    next.push(m);
                }
            }
        }
        frontier = next;
    }
    Ok(ReceptiveField {
        target,
        members: frontier.into_iter().collect(),
        depth,
        layers: neighborhoods
            .iter()
            .take(depth)
            .map(|nb| (nb.k(), nb.d()))
            .collect(),
    })
}

/// Input points whose features have a gradient above [`EMPIRICAL_THRESHOLD`]
/// on the sum of the last convolution's outputs at `target`. The global
/// max-pool branch is excluded, it would make every point influential.
pub fn rf_empirical(net: &Network, cloud: &PointCloud, target: usize) -> Result<BTreeSet<usize>> {
    let neighborhoods = net.compute_neighborhoods(cloud)?;
    rf_empirical_with(net, cloud, &neighborhoods, target)
}

pub fn rf_empirical_with(
    net: &Network,
    cloud: &PointCloud,
    neighborhoods: &LayerNeighborhoods,
    target: usize,
) -> Result<BTreeSet<usize>> {
    if target >= cloud.len() || !cloud.valid()[target] {
        return Err(Error::invalid(format!("target {target} is not a valid point")));
    }
    let trunk = trunk_forward(net, cloud, neighborhoods)?;
    let n = cloud.len();
    let mut grads: Vec<Matrix> = net
        .layers
        .iter()
        .map(|l| Matrix::zeros(n, l.out_features()))
        .collect();
    grads
        .last_mut()
        .expect("network has layers")
        .row_mut(target)
        .fill(1.0);
    let (_, input_grad) = trunk_backward(net, &trunk, grads)?;
    Ok((0..n)
        .filter(|&j| input_grad.row(j).iter().any(|g| g.abs() > EMPIRICAL_THRESHOLD))
        .collect())
}

/// A network whose kernels, projections and biases are all strictly positive.
/// With non-negative input features every ReLU stays active, so the
/// empirical receptive field equals the graph receptive field.
pub fn positive_network(config: NetworkConfig) -> Result<Network> {
    let mut net = Network::new(config)?;
    let params: Vec<f64> = net.parameters().iter().map(|v| v.abs() + 0.01).collect();
    net.set_parameters(&params)?;
    Ok(net)
}

pub fn rf_stats(rf: &ReceptiveField, cloud: &PointCloud) -> Result<RfStats> {
    let valid = cloud.valid_count();
    if rf.target >= cloud.len() || !cloud.valid()[rf.target] || valid == 0 {
        return Err(Error::invalid("receptive field target is not a valid point"));
    }
    let t = cloud.positions()[rf.target];
    let mut r2: f64 = 0.0;
    for &m in &rf.members {
        r2 = r2.max(squared_distance(&t, &cloud.positions()[m]));
    }
    let in_ball = cloud
        .valid_indices()
        .filter(|&j| squared_distance(&t, &cloud.positions()[j]) <= r2)
        .count();
    Ok(RfStats {
        size: rf.members.len(),
        radius: r2.sqrt(),
        coverage: rf.members.len() as f64 / valid as f64,
        density: rf.members.len() as f64 / in_ball.max(1) as f64,
    })
}

/// PLY bytes with members blue, the target red and all other valid points
/// gray. Padding rows are not written, so indices match the cloud only when
/// it has no padding.
pub fn rf_export_string(cloud: &PointCloud, rf: &ReceptiveField) -> Result<String> {
    let mut positions = Vec::with_capacity(cloud.valid_count());
    let mut colors = Vec::with_capacity(cloud.valid_count());
    for i in cloud.valid_indices() {
        positions.push(cloud.positions()[i]);
        colors.push(if i == rf.target {
            TARGET_COLOR
        } else if rf.members.contains(&i) {
            MEMBER_COLOR
        } else {
            OTHER_COLOR
        });
    }
    format_ply_colored(&positions, &colors)
}

pub fn rf_export(cloud: &PointCloud, rf: &ReceptiveField, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, rf_export_string(cloud, rf)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpc::Neighborhoods;
    use crate::spatial::SpatialIndex;

    /// Collinear points whose gaps shrink with the index, so each point's
    /// nearest neighbor is its successor.
    fn line_neighborhoods(n: usize, k: usize, depth: usize) -> (PointCloud, LayerNeighborhoods) {
        let x = |i: usize| (10 * i - i * i.saturating_sub(1) / 2) as f64;
        let cloud = PointCloud::from_positions((0..n).map(|i| [x(i), 0.0, 0.0]).collect()).unwrap();
        let index = SpatialIndex::build(&cloud).unwrap();
        let nb = Neighborhoods::dilated(&index, k, 1).unwrap();
        (cloud, LayerNeighborhoods::from_layers(vec![nb; depth]))
    }

    #[test]
    fn depth_zero_is_target() {
        let (_, nb) = line_neighborhoods(7, 1, 2);
        let rf = rf_compute(&nb, 3, 0).unwrap();
        assert_eq!(rf.members, BTreeSet::from([3]));
    }

    #[test]
    fn collinear_unrolled() {
        let (_, nb) = line_neighborhoods(7, 1, 2);
        assert_eq!(rf_compute(&nb, 0, 1).unwrap().members, BTreeSet::from([0, 1]));
        assert_eq!(rf_compute(&nb, 0, 2).unwrap().members, BTreeSet::from([0, 1, 2]));
    }

    #[test]
    fn stats_singleton_and_full() {
        let (cloud, nb) = line_neighborhoods(4, 3, 1);
        let single = rf_compute(&nb, 2, 0).unwrap();
        let s = rf_stats(&single, &cloud).unwrap();
        assert_eq!((s.size, s.radius, s.coverage), (1, 0.0, 0.25));
        let full = rf_compute(&nb, 0, 1).unwrap();
        let s = rf_stats(&full, &cloud).unwrap();
        assert_eq!(s.coverage, 1.0);
        assert_eq!(s.radius, 27.0);
        assert_eq!(s.density, 1.0);
    }

    #[test]
    fn rejects_bad_target_and_depth() {
        let (_, nb) = line_neighborhoods(4, 1, 2);
        assert!(rf_compute(&nb, 9, 1).is_err());
        assert!(rf_compute(&nb, 0, 3).is_err());
    }

    #[test]
    fn export_colors() {
        let (cloud, nb) = line_neighborhoods(5, 1, 1);
        let rf = rf_compute(&nb, 0, 1).unwrap();
        let text = rf_export_string(&cloud, &rf).unwrap();
        let lines: Vec<&str> = text.lines().skip_while(|l| *l != "end_header").skip(1).collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].ends_with("255 0 0"));
        assert!(lines[1].ends_with("0 0 255"));
        assert!(lines[2].ends_with("180 180 180"));
        assert_eq!(text, rf_export_string(&cloud, &rf).unwrap());
    }
}
