use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adam moments and step counter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(parameter_count: usize) -> Self {
        Self {
            m: vec![0.0; parameter_count],
            v: vec![0.0; parameter_count],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// One bias-corrected Adam update of `params` in place.
///
/// Non-finite gradients abort the step before anything is modified.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.len() {
        return Err(Error::shape(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Diverged(format!("gradient {i} is {}", grads[i])));
    }

    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

/// Staircase exponential decay: `lr0 · γ^floor(step / decay_steps)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub lr0: f64,
    pub decay_factor: f64,
    pub decay_steps: u64,
}

impl LrSchedule {
    pub fn new(lr0: f64, decay_factor: f64, decay_steps: u64) -> Result<Self> {
        let s = Self {
            lr0,
            decay_factor,
            decay_steps,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::invalid("lr0 must be positive and finite"));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::invalid("decay_factor must lie in (0, 1]"));
        }
        if self.decay_steps == 0 {
            return Err(Error::invalid("decay_steps must be positive"));
        }
        Ok(())
    }

    pub fn lr(&self, step: u64) -> f64 {
        let exponent = (step / self.decay_steps).min(i32::MAX as u64) as i32;
        self.lr0 * self.decay_factor.powi(exponent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_closed_form() {
        let grads = [0.5, -2.0, 1e-3];
        let mut params = [1.0, 1.0, 1.0];
        let mut state = AdamState::new(3);
        adam_step(&mut params, &grads, &mut state, 0.01).unwrap();
        for (p, g) in params.iter().zip(grads) {
            let expected = 1.0 - 0.01 * g / ((g * g).sqrt() + 1e-8);
            assert!((p - expected).abs() < 1e-15);
        }
        assert_eq!(state.t, 1);
    }

    #[test]
    fn zero_grads_leave_params() {
        let mut params = [0.3, -0.7];
        let mut state = AdamState::new(2);
        adam_step(&mut params, &[0.0, 0.0], &mut state, 0.1).unwrap();
        assert_eq!(params, [0.3, -0.7]);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn minimizes_parabola() {
        let mut x = [1.0];
        let mut state = AdamState::new(1);
        for _ in 0..500 {
            let g = [2.0 * x[0]];
            adam_step(&mut x, &g, &mut state, 0.1).unwrap();
        }
        assert!(x[0].abs() < 1e-3, "x = {}", x[0]);
    }

    #[test]
    fn non_finite_gradient_is_divergence() {
        let mut params = [1.0];
        let mut state = AdamState::new(1);
        let err = adam_step(&mut params, &[f64::NAN], &mut state, 0.1).unwrap_err();
        assert!(matches!(err, Error::Diverged(_)));
        assert_eq!(params, [1.0]);
        assert_eq!(state.t, 0);
    }

    #[test]
    fn schedule_staircase() {
        let s = LrSchedule::new(1e-3, 0.5, 10).unwrap();
        assert_eq!(s.lr(0), 1e-3);
        assert_eq!(s.lr(9), 1e-3);
        assert_eq!(s.lr(10), 5e-4);
        assert_eq!(s.lr(25), 2.5e-4);
        assert!(LrSchedule::new(1e-3, 0.0, 1).is_err());
        assert!(LrSchedule::new(1e-3, 0.5, 0).is_err());
    }
}
