use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::params::{Gradients, ParamStore};

/// Optimizer choice and hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps() -> f64 {
    1e-8
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Adam {
            lr: 1e-3,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam(Adam),
}

#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Gradients,
    v: Gradients,
}

impl Optimizer {
    pub fn new(config: &OptimizerConfig, params: &ParamStore) -> Self {
        match *config {
            OptimizerConfig::Sgd { lr } => Optimizer::Sgd { lr },
            OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => Optimizer::Adam(Adam {
                lr,
                beta1,
                beta2,
                eps,
                t: 0,
                m: Gradients::zeros_like(params),
                v: Gradients::zeros_like(params),
            }),
        }
    }

    /// Apply one update. Frozen tensors are left untouched; a non-finite
    /// gradient aborts before anything is modified.
    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients) -> Result<()> {
        if let Some(name) = grads.first_non_finite(params) {
            return Err(Error::NonFinite(format!("gradient of {name}")));
        }
        match self {
            Optimizer::Sgd { lr } => {
                for id in params.ids().collect::<Vec<_>>() {
                    if params.is_frozen(id) {
                        continue;
                    }
                    let g = grads.get(id);
                    for (p, gv) in params.get_mut(id).data.iter_mut().zip(&g.data) {
                        *p -= *lr * gv;
                    }
                }
            }
            Optimizer::Adam(adam) => {
                adam.t += 1;
                let t = adam.t as i32;
                let correction1 = 1.0 - adam.beta1.powi(t);
                let correction2 = 1.0 - adam.beta2.powi(t);
                for id in params.ids().collect::<Vec<_>>() {
                    if params.is_frozen(id) {
                        continue;
                    }
                    let g = &grads.get(id).data;
                    let m = &mut adam.m.get_mut(id).data;
                    let v = &mut adam.v.get_mut(id).data;
                    let p = &mut params.get_mut(id).data;
                    for k in 0..p.len() {
                        m[k] = adam.beta1 * m[k] + (1.0 - adam.beta1) * g[k];
                        v[k] = adam.beta2 * v[k] + (1.0 - adam.beta2) * g[k] * g[k];
                        let m_hat = m[k] / correction1;
                        let v_hat = v[k] / correction2;
                        p[k] -= adam.lr * m_hat / (v_hat.sqrt() + adam.eps);
                    }
                }
            }
        }
        if !params.all_finite() {
            return Err(Error::NonFinite("parameters after update".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::params::Tensor;

    fn store() -> (ParamStore, Gradients) {
        let mut params = ParamStore::new();
        let id = params.add("w", Tensor::from_data(1, 3, vec![1.0, -2.0, 0.5]).unwrap());
        let mut grads = Gradients::zeros_like(&params);
        grads.get_mut(id).data = vec![0.5, -0.25, 2.0];
        (params, grads)
    }

    #[test]
    fn sgd_zero_grad_is_noop() {
        let (mut params, _) = store();
        let before = params.clone();
        let zeros = Gradients::zeros_like(&params);
        let mut opt = Optimizer::new(&OptimizerConfig::Sgd { lr: 0.1 }, &params);
        opt.step(&mut params, &zeros).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn sgd_unit_rate_subtracts_gradient() {
        let (mut params, grads) = store();
        let mut opt = Optimizer::new(&OptimizerConfig::Sgd { lr: 1.0 }, &params);
        opt.step(&mut params, &grads).unwrap();
        assert_eq!(
            params.get(crate::neural::ParamId(0)).data,
            vec![0.5, -1.75, -1.5]
        );
    }

    #[test]
    fn adam_first_step_uses_bias_corrected_moments() {
        let (mut params, grads) = store();
        let before = params.get(crate::neural::ParamId(0)).data.clone();
        let (lr, eps) = (0.01, 1e-8);
        let config = OptimizerConfig::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps,
        };
        let mut opt = Optimizer::new(&config, &params);
        opt.step(&mut params, &grads).unwrap();
        // m_hat = g and v_hat = g^2, so the step is lr * g / (|g| + eps).
        let g = &grads.get(crate::neural::ParamId(0)).data;
        for k in 0..3 {
            let expected = before[k] - lr * g[k] / (g[k].abs() + eps);
            let got = params.get(crate::neural::ParamId(0)).data[k];
            assert!((got - expected).abs() < 1e-15, "{got} vs {expected}");
        }
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let (mut params, mut grads) = store();
        grads.get_mut(crate::neural::ParamId(0)).data[1] = f64::NAN;
        let before = params.clone();
        let mut opt = Optimizer::new(&OptimizerConfig::default(), &params);
        assert!(matches!(
            opt.step(&mut params, &grads),
            Err(Error::NonFinite(_))
        ));
        assert_eq!(params, before);
    }

    #[test]
    fn frozen_tensor_is_not_updated() {
        let (mut params, grads) = store();
        params.set_frozen(crate::neural::ParamId(0), true);
        let before = params.clone();
        let mut opt = Optimizer::new(&OptimizerConfig::Sgd { lr: 1.0 }, &params);
        opt.step(&mut params, &grads).unwrap();
        assert_eq!(params, before);
    }
}
