use rand::{seq::index, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CropSpec {
    #[serde(default = "default_side")]
    pub side_length: f64,
    #[serde(default = "default_budget")]
    pub point_budget: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_side() -> f64 {
    3.0
}

fn default_budget() -> usize {
    4092
}

impl Default for CropSpec {
    fn default() -> Self {
        Self {
            side_length: default_side(),
            point_budget: default_budget(),
            seed: 0,
        }
    }
}

impl CropSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.side_length > 0.0 && self.side_length.is_finite()) {
            return Err(Error::invalid("crop side_length must be positive"));
        }
        if self.point_budget == 0 {
            return Err(Error::invalid("crop point_budget must be at least 1"));
        }
        Ok(())
    }
}

/// Samples `spec.point_budget` points without replacement from the cube of
/// side `spec.side_length` centered at `center`, zero-padding the result when
/// fewer points fall inside. Selected points keep their original order.
pub fn sample_crop(cloud: &PointCloud, center: [f64; 3], spec: &CropSpec) -> Result<PointCloud> {
    spec.validate()?;
    let half = spec.side_length / 2.0;
    let inside: Vec<usize> = cloud
        .valid_indices()
        .filter(|&i| {
            let p = cloud.positions()[i];
            (0..3).all(|a| (p[a] - center[a]).abs() <= half)
        })
        .collect();

    let chosen: Vec<usize> = if inside.len() > spec.point_budget {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut picks = index::sample(&mut rng, inside.len(), spec.point_budget).into_vec();
        picks.sort_unstable();
        picks.into_iter().map(|j| inside[j]).collect()
    } else {
        inside
    };

    let budget = spec.point_budget;
    let mut positions = vec![[0.0; 3]; budget];
    let mut features = Matrix::zeros(budget, cloud.feature_dim());
    let mut valid = vec![false; budget];
    let mut labels = cloud.labels().map(|_| vec![0usize; budget]);
    for (r, &i) in chosen.iter().enumerate() {
        positions[r] = cloud.positions()[i];
        features.row_mut(r).copy_from_slice(cloud.features().row(i));
        valid[r] = true;
        if let (Some(out), Some(src)) = (labels.as_mut(), cloud.labels()) {
            out[r] = src[i];
        }
    }
    PointCloud::new(positions, features, labels, valid)
}

/// Crop center drawn uniformly from the bounding box of the valid points.
pub fn random_crop_center(cloud: &PointCloud, rng: &mut impl Rng) -> Result<[f64; 3]> {
    let (lo, hi) = cloud
        .bounding_box()
        .ok_or_else(|| Error::EmptyInput("cloud has no valid points".into()))?;
    let mut c = [0.0; 3];
    for a in 0..3 {
        c[a] = if hi[a] > lo[a] {
            rng.gen_range(lo[a]..=hi[a])
        } else {
            lo[a]
        };
    }
    Ok(c)
}
