use super::config::ModelConfig;
use super::params::Params;
use super::scalar::Scalar;

/// Inverse square-root schedule with linear warmup from `warmup_init_lr`.
/// Without warmup the rate is constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InverseSqrt {
    pub lr: f64,
    pub warmup_updates: usize,
    pub warmup_init_lr: f64,
}

impl InverseSqrt {
    pub fn from_config(c: &ModelConfig) -> Self {
        InverseSqrt {
            lr: c.lr,
            warmup_updates: c.warmup_updates,
            warmup_init_lr: c.warmup_init_lr,
        }
    }

    /// Rate for the update with 0-based index `t`.
    pub fn at(&self, t: usize) -> f64 {
        let w = self.warmup_updates;
        if w == 0 {
            self.lr
        } else if t < w {
            self.warmup_init_lr + t as f64 * (self.lr - self.warmup_init_lr) / w as f64
        } else {
            self.lr * (w as f64).sqrt() / (t as f64).sqrt()
        }
    }
}

/// Adam with bias correction and decoupled weight decay.
#[derive(Clone, Debug)]
pub struct Adam<F: Scalar> {
    m: Params<F>,
    v: Params<F>,
    t: i32,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
}

impl<F: Scalar> Adam<F> {
    pub fn new(params: &Params<F>, c: &ModelConfig) -> Self {
        Adam {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            beta1: c.adam_betas.0,
            beta2: c.adam_betas.1,
            eps: c.adam_eps,
            weight_decay: c.weight_decay,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, params: &mut Params<F>, grads: &Params<F>, lr: f64) {
        self.t += 1;
        let (b1, b2) = (F::of(self.beta1), F::of(self.beta2));
        let (c1, c2) = (F::one() - b1, F::one() - b2);
        let step = lr * (1.0 - self.beta2.powi(self.t)).sqrt() / (1.0 - self.beta1.powi(self.t));
        let step = F::of(step);
        let eps = F::of(self.eps);
        let decay = F::of(1.0 - lr * self.weight_decay);
        let tensors = params.tensors_mut().iter_mut();
        let state = self.m.tensors_mut().iter_mut().zip(self.v.tensors_mut().iter_mut());
        for ((p, (m, v)), g) in tensors.zip(state).zip(grads.tensors()) {
            let p = p.as_slice_mut().unwrap();
            let m = m.as_slice_mut().unwrap();
            let v = v.as_slice_mut().unwrap();
            let g = g.as_slice().unwrap();
            for i in 0..p.len() {
                m[i] = b1 * m[i] + c1 * g[i];
                v[i] = b2 * v[i] + c2 * g[i] * g[i];
                if self.weight_decay > 0.0 {
                    p[i] *= decay;
                }
                p[i] -= step * m[i] / (v[i].sqrt() + eps);
            }
        }
    }
}
