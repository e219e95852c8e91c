use crate::error::{contract, Result};
use crate::neural::params::Parameterized;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Bias-corrected Adam with flat moment buffers that follow the model's
/// tensor order.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(param_count: usize, learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            step: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    pub fn for_model<P: Parameterized>(model: &P, learning_rate: f64) -> Self {
        AdamState::new(model.param_count(), learning_rate)
    }

    /// One update over flat slices.
    pub fn step_flat(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(contract("adam state, parameters and gradients differ in size"));
        }
        self.step += 1;
        let (c1, c2) = self.corrections();
        update(params, grads, &mut self.m, &mut self.v, self.learning_rate, c1, c2);
        Ok(())
    }

    /// One update of every tensor of `params`.
    pub fn step<P: Parameterized>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        if params.param_count() != self.m.len() || grads.param_count() != self.m.len() {
            return Err(contract("adam state, parameters and gradients differ in size"));
        }
        self.step += 1;
        let (c1, c2) = self.corrections();
        let mut offset = 0;
        for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
            let n = p.data.len();
            let range = offset..offset + n;
            update(
                p.data,
                g.data,
                &mut self.m[range.clone()],
                &mut self.v[range],
                self.learning_rate,
                c1,
                c2,
            );
            offset += n;
        }
        Ok(())
    }

    fn corrections(&self) -> (f64, f64) {
        let t = self.step as i32;
        (1.0 - BETA1.powi(t), 1.0 - BETA2.powi(t))
    }
}

fn update(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, c1: f64, c2: f64) {
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPSILON);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut adam = AdamState::new(3, 0.1);
        let mut p = vec![1.0, -2.0, 3.0];
        for _ in 0..10 {
            adam.step_flat(&mut p, &[0.0; 3]).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn constant_gradient_descends() {
        let mut adam = AdamState::new(2, 0.01);
        let mut p = vec![0.0, 0.0];
        for _ in 0..100 {
            adam.step_flat(&mut p, &[2.0, -0.5]).unwrap();
        }
        assert!(p[0] < 0.0 && p[1] > 0.0);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut adam = AdamState::new(1, 1e-2);
        let mut x = [5.0];
        let mut reached = None;
        for step in 1..=5000 {
            let g = [2.0 * x[0]];
            adam.step_flat(&mut x, &g).unwrap();
            if x[0].abs() < 1e-3 {
                reached = Some(step);
                break;
            }
        }
        assert!(reached.is_some(), "x = {}", x[0]);
    }

    #[test]
    fn size_mismatch() {
        let mut adam = AdamState::new(2, 0.1);
        assert!(adam.step_flat(&mut [0.0; 3], &[0.0; 3]).is_err());
    }
}
