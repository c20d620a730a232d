//! Parameter update rules: SGD, AdaGrad, Adam, plus global-norm clipping.

use serde::{Deserialize, Serialize};

use crate::autodiff::tape::{GradMap, ParamStore};
use crate::autodiff::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adagrad,
    Adam,
}

/// Scales all gradients so their global L2 norm does not exceed `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut GradMap, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Stateful optimizer over a [`ParamStore`].
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    // first moment (Adam) or squared-gradient accumulator (AdaGrad)
    m: Vec<Tensor>,
    // second moment (Adam only)
    v: Vec<Tensor>,
    t: u64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store.iter().map(|(_, _, t)| Tensor::zeros(t.shape())).collect();
        Optimizer { kind, lr, m: zeros.clone(), v: zeros, t: 0 }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Applies one update. Panics if any parameter becomes non-finite.
    pub fn step(&mut self, params: &mut ParamStore, grads: &GradMap) {
        self.t += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for idx in 0..params.len() {
                    let id = crate::autodiff::tape::ParamId(idx);
                    params.get_mut(id).add_scaled(grads.get(id), -self.lr);
                }
            }
            OptimizerKind::Adagrad => {
                for idx in 0..params.len() {
                    let id = crate::autodiff::tape::ParamId(idx);
                    let g = grads.get(id);
                    let acc = &mut self.m[idx];
                    for (a, gi) in acc.data_mut().iter_mut().zip(g.data()) {
                        *a += gi * gi;
                    }
                    let p = params.get_mut(id);
                    for ((pi, gi), ai) in p.data_mut().iter_mut().zip(g.data()).zip(self.m[idx].data()) {
                        *pi -= self.lr * gi / (ai.sqrt() + EPS);
                    }
                }
            }
            OptimizerKind::Adam => {
                let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
                let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
                for idx in 0..params.len() {
                    let id = crate::autodiff::tape::ParamId(idx);
                    let g = grads.get(id);
                    for (m, gi) in self.m[idx].data_mut().iter_mut().zip(g.data()) {
                        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * gi;
                    }
                    for (v, gi) in self.v[idx].data_mut().iter_mut().zip(g.data()) {
                        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * gi * gi;
                    }
                    let p = params.get_mut(id);
                    for ((pi, mi), vi) in p
                        .data_mut()
                        .iter_mut()
                        .zip(self.m[idx].data())
                        .zip(self.v[idx].data())
                    {
                        let mhat = mi / bc1;
                        let vhat = vi / bc2;
                        *pi -= self.lr * mhat / (vhat.sqrt() + EPS);
                    }
                }
            }
        }
        assert!(params.all_finite(), "optimizer step produced non-finite parameters");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(x: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("w", Tensor::scalar(x));
        s
    }

    fn grad_of(store: &ParamStore, g: f64) -> GradMap {
        let mut gm = GradMap::zeros_like(store);
        gm.get_mut(store.id_of("w").unwrap()).data_mut()[0] = g;
        gm
    }

    #[test]
    fn sgd_basic_update() {
        let mut s = store_with(1.0);
        let g = grad_of(&s, 0.5);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.01, &s);
        opt.step(&mut s, &g);
        assert!((s.get(s.id_of("w").unwrap()).item() - 0.995).abs() < 1e-15);
    }

    #[test]
    fn sgd_zero_gradient_is_identity() {
        let mut s = store_with(1.5);
        let g = grad_of(&s, 0.0);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, &s);
        opt.step(&mut s, &g);
        assert_eq!(s.get(s.id_of("w").unwrap()).item(), 1.5);
    }

    #[test]
    fn adam_zero_gradient_from_init_is_identity() {
        let mut s = store_with(2.0);
        let g = grad_of(&s, 0.0);
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.1, &s);
        opt.step(&mut s, &g);
        assert_eq!(s.get(s.id_of("w").unwrap()).item(), 2.0);
    }

    #[test]
    fn adagrad_shrinks_effective_rate() {
        let mut s = store_with(0.0);
        let g = grad_of(&s, 1.0);
        let mut opt = Optimizer::new(OptimizerKind::Adagrad, 1.0, &s);
        opt.step(&mut s, &g);
        let after_first = s.get(s.id_of("w").unwrap()).item();
        opt.step(&mut s, &g);
        let after_second = s.get(s.id_of("w").unwrap()).item();
        let step1 = -after_first;
        let step2 = after_first - after_second;
        assert!(step2 < step1, "second step {step2} should be smaller than first {step1}");
    }

    #[test]
    fn clip_rescales_large_gradients() {
        let mut s = ParamStore::new();
        s.add("w", Tensor::vector(vec![3.0, 4.0]));
        let mut gm = GradMap::zeros_like(&s);
        gm.get_mut(s.id_of("w").unwrap()).data_mut().copy_from_slice(&[30.0, 40.0]);
        let pre = clip_global_norm(&mut gm, 5.0);
        assert!((pre - 50.0).abs() < 1e-12);
        assert!((gm.global_norm() - 5.0).abs() < 1e-12);
        // direction preserved
        let d = gm.get(s.id_of("w").unwrap()).data();
        assert!((d[0] / d[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn clip_leaves_small_gradients_alone() {
        let mut s = ParamStore::new();
        s.add("w", Tensor::vector(vec![0.3, 0.4]));
        let mut gm = GradMap::zeros_like(&s);
        gm.get_mut(s.id_of("w").unwrap()).data_mut().copy_from_slice(&[0.3, 0.4]);
        clip_global_norm(&mut gm, 5.0);
        assert_eq!(gm.get(s.id_of("w").unwrap()).data(), &[0.3, 0.4]);
    }
}
