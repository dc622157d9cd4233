use crate::error::{Error, Result};
use crate::nn::Matrix;

/// A point cloud with per-point features, optional labels and a validity
/// mask. Rows with `valid == false` are zero-padding: all-zero position and
/// features, ignored by every downstream computation.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    positions: Vec<[f64; 3]>,
    features: Matrix,
    labels: Option<Vec<usize>>,
    valid: Vec<bool>,
}

impl PointCloud {
    pub fn new(
        positions: Vec<[f64; 3]>,
        features: Matrix,
        labels: Option<Vec<usize>>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(Error::EmptyInput("point cloud has no rows".into()));
        }
        if features.rows() != n || valid.len() != n {
            return Err(Error::shape(format!(
                "{n} positions but {} feature rows and {} validity flags",
                features.rows(),
                valid.len()
            )));
        }
        if features.cols() == 0 {
            return Err(Error::shape("point cloud needs at least one feature channel"));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::shape(format!("{n} positions but {} labels", l.len())));
            }
        }
        for i in 0..n {
            let p = positions[i];
            if !p.iter().all(|v| v.is_finite()) || !features.row(i).iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("point {i}")));
            }
            if !valid[i] && (p != [0.0; 3] || features.row(i).iter().any(|&v| v != 0.0)) {
                return Err(Error::invalid(format!(
                    "padding row {i} must have zero position and features"
                )));
            }
        }
        Ok(Self {
            positions,
            features,
            labels,
            valid,
        })
    }

    /// All-valid cloud with a single constant-1.0 feature channel.
    pub fn from_positions(positions: Vec<[f64; 3]>) -> Result<Self> {
        let n = positions.len();
        Self::new(positions, Matrix::filled(n, 1, 1.0), None, vec![true; n])
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::shape(format!(
                "{} points but {} labels",
                self.len(),
                labels.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn valid_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.valid.iter().enumerate().filter_map(|(i, &v)| v.then_some(i))
    }

    /// Checks that every label of a valid point lies in `[0, classes)`.
    pub fn check_labels(&self, classes: usize) -> Result<()> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::invalid("point cloud has no labels"))?;
        for i in self.valid_indices() {
            if labels[i] >= classes {
                return Err(Error::invalid(format!(
                    "label {} at point {i} outside [0, {classes})",
                    labels[i]
                )));
            }
        }
        Ok(())
    }

    /// The single label shared by every valid point, used as the object class
    /// for classification clouds.
    pub fn class_label(&self) -> Option<usize> {
        let labels = self.labels.as_ref()?;
        let mut it = self.valid_indices().map(|i| labels[i]);
        let first = it.next()?;
        it.all(|l| l == first).then_some(first)
    }

    /// Axis-aligned bounding box of the valid points.
    pub fn bounding_box(&self) -> Option<([f64; 3], [f64; 3])> {
        let mut it = self.valid_indices();
        let first = self.positions[it.next()?];
        let (mut lo, mut hi) = (first, first);
        for i in it {
            let p = self.positions[i];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        Some((lo, hi))
    }

    /// Reorders rows so that row `r` of the result is row `order[r]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let n = self.len();
        let mut seen = vec![false; n];
        if order.len() != n
            || !order
                .iter()
                .all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
        {
            return Err(Error::invalid("order is not a permutation"));
        }
        let mut features = Matrix::zeros(n, self.feature_dim());
        for (r, &i) in order.iter().enumerate() {
            features.row_mut(r).copy_from_slice(self.features.row(i));
        }
        Ok(Self {
            positions: order.iter().map(|&i| self.positions[i]).collect(),
            features,
            labels: self
                .labels
                .as_ref()
                .map(|l| order.iter().map(|&i| l[i]).collect()),
            valid: order.iter().map(|&i| self.valid[i]).collect(),
        })
    }
}
