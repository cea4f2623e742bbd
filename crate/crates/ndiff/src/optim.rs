//! Adam with bias correction.

use crate::error::{Result, TensorError};
use crate::params::{ParamGrads, ParamId, ParamStore};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Option<Tensor>>,
    v: Vec<Option<Tensor>>,
}

impl Default for Adam {
    fn default() -> Self {
        Self::new(0.9, 0.999, 1e-8)
    }
}

impl Adam {
    pub fn new(beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Apply one update. Parameters without a gradient keep their moments and
    /// values unchanged.
    pub fn step(&mut self, store: &mut ParamStore, grads: &ParamGrads, lr: f64) -> Result<()> {
        if self.m.len() < store.len() {
            self.m.resize(store.len(), None);
            self.v.resize(store.len(), None);
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (i, g) in grads.slots().iter().enumerate() {
            let Some(g) = g else { continue };
            let id = ParamId(i);
            let param = store.get_mut(id);
            if param.shape() != g.shape() {
                return Err(TensorError::Shape {
                    op: "adam",
                    detail: format!("param {:?} grad {:?}", param.shape(), g.shape()),
                });
            }
            let m = self.m[i].get_or_insert_with(|| g.map(|_| 0.0));
            let v = self.v[i].get_or_insert_with(|| g.map(|_| 0.0));
            for (((p, gi), mi), vi) in param
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *p -= lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(v: f64) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("x", Tensor::scalar(v)).unwrap();
        (s, id)
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let (mut s, id) = one_param(1.25);
        let mut g = ParamGrads::new(&s);
        g.add(id, &Tensor::scalar(0.0));
        let mut opt = Adam::default();
        for _ in 0..3 {
            opt.step(&mut s, &g, 0.1).unwrap();
        }
        assert_eq!(s.get(id).item(), 1.25);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let (mut s, id) = one_param(0.0);
        let mut g = ParamGrads::new(&s);
        g.add(id, &Tensor::scalar(1.0));
        Adam::default().step(&mut s, &g, 0.1).unwrap();
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((s.get(id).item() - expected).abs() < 1e-15);
    }

    /// Independent scalar transcription of the update rule.
    fn scalar_adam(theta: f64, grads: &[f64], lr: f64) -> f64 {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut th, mut m, mut v) = (theta, 0.0, 0.0);
        for (t, g) in grads.iter().enumerate() {
            let t = (t + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            th -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
        }
        th
    }

    #[test]
    fn matches_scalar_trace() {
        let (mut s, id) = one_param(0.5);
        let mut opt = Adam::default();
        let seq = [0.3, 0.3, -1.7, 2.2];
        for g in seq {
            let mut buf = ParamGrads::new(&s);
            buf.add(id, &Tensor::scalar(g));
            opt.step(&mut s, &buf, 0.01).unwrap();
        }
        assert!((s.get(id).item() - scalar_adam(0.5, &seq, 0.01)).abs() < 1e-15);
    }
}
