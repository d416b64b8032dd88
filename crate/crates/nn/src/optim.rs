use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Float;
use crate::network::Network;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moments, one moment pair per parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Float> Adam<T> {
    pub fn new(network: &Network<T>, config: AdamConfig) -> Result<Self> {
        if !(config.learning_rate >= 0.0 && config.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be >= 0 (got {})", config.learning_rate)));
        }
        if !(0.0..1.0).contains(&config.beta1) || !(0.0..1.0).contains(&config.beta2) || !(config.eps > 0.0) {
            return Err(Error::Config("Adam needs 0 <= beta < 1 and eps > 0".into()));
        }
        let zeros = || network.params().iter().map(|p| vec![T::zero(); p.len()]).collect();
        Ok(Self {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        })
    }

    pub fn update(&mut self, network: &mut Network<T>) -> Result<()> {
        let params = network.params_mut();
        if params.len() != self.m.len() {
            return Err(Error::shape(format!("{} parameter arrays", self.m.len()), format!("{}", params.len())));
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let lr_t = c.learning_rate * (1.0 - c.beta2.powi(t)).sqrt() / (1.0 - c.beta1.powi(t));
        let eps_t = c.eps * (1.0 - c.beta2.powi(t)).sqrt();
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let (ib1, ib2) = (T::lit(1.0 - c.beta1), T::lit(1.0 - c.beta2));
        let (lr_t, eps_t) = (T::lit(lr_t), T::lit(eps_t));
        for ((p, m), v) in params.into_iter().zip(&mut self.m).zip(&mut self.v) {
            for (((w, &g), m), v) in p.value.iter_mut().zip(&p.grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + ib1 * g;
                *v = b2 * *v + ib2 * g * g;
                *w -= lr_t * *m / (v.sqrt() + eps_t);
            }
        }
        Ok(())
    }
}
