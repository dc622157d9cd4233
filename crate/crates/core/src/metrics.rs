//! Segmentation and classification scores from a confusion matrix.
//!
//! Classes that never occur, neither in ground truth nor in predictions, are
//! left out of the mIoU mean; classes without ground-truth support are left
//! out of the mAcc mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[g][p]` = number of scored points with ground truth `g` predicted as `p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub miou: f64,
    pub macc: f64,
    pub oacc: f64,
    pub per_class_iou: Vec<Option<f64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_counts(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::shape("confusion matrix must be square"));
        }
        Ok(Self {
            classes: k,
            counts: rows.concat(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn update(&mut self, predictions: &[usize], labels: &[usize], mask: &[bool]) -> Result<()> {
        if predictions.len() != labels.len() || labels.len() != mask.len() {
            return Err(Error::shape(format!(
                "{} predictions, {} labels, {} mask entries",
                predictions.len(),
                labels.len(),
                mask.len()
            )));
        }
        let k = self.classes;
        // validate first so a failed update leaves the matrix untouched
        for ((&p, &g), &m) in predictions.iter().zip(labels).zip(mask) {
            if m && (p >= k || g >= k) {
                return Err(Error::invalid(format!(
                    "class out of range: truth {g}, prediction {p}, K = {k}"
                )));
            }
        }
        for ((&p, &g), &m) in predictions.iter().zip(labels).zip(mask) {
            if m {
                self.counts[g * k + p] += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::shape("cannot merge confusion matrices of different sizes"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    fn true_positives(&self, c: usize) -> u64 {
        self.get(c, c)
    }

    fn support(&self, c: usize) -> u64 {
        (0..self.classes).map(|p| self.get(c, p)).sum()
    }

    fn predicted(&self, c: usize) -> u64 {
        (0..self.classes).map(|g| self.get(g, c)).sum()
    }

    fn non_empty(&self) -> Result<()> {
        if self.total() == 0 {
            return Err(Error::EmptyInput("confusion matrix has no entries".into()));
        }
        Ok(())
    }

    /// IoU per class; `None` for classes absent from both truth and predictions.
    pub fn per_class_iou(&self) -> Vec<Option<f64>> {
        (0..self.classes)
            .map(|c| {
                let tp = self.true_positives(c);
                let union = self.support(c) + self.predicted(c) - tp;
                (union > 0).then(|| tp as f64 / union as f64)
            })
            .collect()
    }

    pub fn miou(&self) -> Result<f64> {
        self.non_empty()?;
        let ious: Vec<f64> = self.per_class_iou().into_iter().flatten().collect();
        Ok(ious.iter().sum::<f64>() / ious.len() as f64)
    }

    pub fn macc(&self) -> Result<f64> {
        self.non_empty()?;
        let accs: Vec<f64> = (0..self.classes)
            .filter_map(|c| {
                let s = self.support(c);
                (s > 0).then(|| self.true_positives(c) as f64 / s as f64)
            })
            .collect();
        Ok(accs.iter().sum::<f64>() / accs.len() as f64)
    }

    pub fn oacc(&self) -> Result<f64> {
        self.non_empty()?;
        let trace: u64 = (0..self.classes).map(|c| self.true_positives(c)).sum();
        Ok(trace as f64 / self.total() as f64)
    }

    pub fn report(&self) -> Result<MetricsReport> {
        Ok(MetricsReport {
            miou: self.miou()?,
            macc: self.macc()?,
            oacc: self.oacc()?,
            per_class_iou: self.per_class_iou(),
        })
    }
}
