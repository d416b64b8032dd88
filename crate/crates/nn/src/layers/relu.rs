use super::Mode;
use crate::error::{Error, Result};
use crate::float::Float;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Default)]
pub struct Relu {
    active: Option<Vec<bool>>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward<T: Float>(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let y = x.map(|v| if v > T::zero() { v } else { T::zero() });
        self.active = (mode == Mode::Train).then(|| x.data().iter().map(|&v| v > T::zero()).collect());
        Ok(y)
    }

    pub fn backward<T: Float>(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let active = self.active.take().expect("Relu::backward needs a training forward pass");
        if active.len() != dy.data().len() {
            return Err(Error::shape(format!("{} values", active.len()), format!("{}", dy.data().len())));
        }
        let mut dx = dy.clone();
        for (g, &on) in dx.data_mut().iter_mut().zip(&active) {
            if !on {
                *g = T::zero();
            }
        }
        Ok(dx)
    }
}
