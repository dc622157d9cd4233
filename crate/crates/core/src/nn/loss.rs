use super::Matrix;
use crate::error::{Error, Result};

/// Mean softmax cross-entropy over the rows with `mask[r] == true`.
///
/// Returns the loss and its gradient with respect to the logits; masked-out
/// rows get a zero gradient. Uses max-subtraction so logits up to `1e6` in
/// magnitude stay finite.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize], mask: &[bool]) -> Result<(f64, Matrix)> {
    let (rows, classes) = logits.shape();
    if labels.len() != rows || mask.len() != rows {
        return Err(Error::shape(format!(
            "{rows} logit rows but {} labels and {} mask entries",
            labels.len(),
            mask.len()
        )));
    }
    let active = mask.iter().filter(|&&m| m).count();
    if active == 0 {
        return Err(Error::DegenerateBatch);
    }
    let norm = 1.0 / active as f64;

    let mut grad = Matrix::zeros(rows, classes);
    let mut loss = 0.0;
    for r in 0..rows {
        if !mask[r] {
            continue;
        }
        let label = labels[r];
        if label >= classes {
            return Err(Error::invalid(format!(
                "label {label} out of range for {classes} classes"
            )));
        }
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        let g = grad.row_mut(r);
        for (gi, &z) in g.iter_mut().zip(row) {
            let e = (z - max).exp();
            *gi = e;
            sum += e;
        }
        loss += sum.ln() - (row[label] - max);
        for gi in g.iter_mut() {
            *gi *= norm / sum;
        }
        g[label] -= norm;
    }
    Ok((loss * norm, grad))
}
