use super::Mode;
use crate::error::{Error, Result};
use crate::float::Float;
use crate::tensor::Tensor;

/// 2×2 max-pool with stride 2. Ties go to the first element in row-major
/// window order.
#[derive(Debug, Clone, Default)]
pub struct MaxPool2d {
    argmax: Vec<usize>,
    input_shape: Option<[usize; 4]>,
}

impl MaxPool2d {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward<T: Float>(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let [n, c, h, w] = x.shape();
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::shape("even spatial dims", format!("{h}x{w}")));
        }
        let (oh, ow) = (h / 2, w / 2);
        let mut y = Tensor::zeros([n, c, oh, ow]);
        self.argmax.clear();
        let data = x.data();
        let out = y.data_mut();
        for plane in 0..n * c {
            let base = plane * h * w;
            for i in 0..oh {
                for j in 0..ow {
                    let mut best = base + 2 * i * w + 2 * j;
                    for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * i + di) * w + 2 * j + dj;
                        if data[idx] > data[best] {
                            best = idx;
                        }
                    }
                    out[plane * oh * ow + i * ow + j] = data[best];
                    self.argmax.push(best);
                }
            }
        }
        self.input_shape = (mode == Mode::Train).then_some(x.shape());
        Ok(y)
    }

    pub fn backward<T: Float>(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.input_shape.take().expect("MaxPool2d::backward needs a training forward pass");
        if dy.data().len() != self.argmax.len() {
            return Err(Error::shape(format!("{} pooled values", self.argmax.len()), format!("{}", dy.data().len())));
        }
        let mut dx = Tensor::zeros(shape);
        let g = dx.data_mut();
        for (&idx, &v) in self.argmax.iter().zip(dy.data()) {
            g[idx] += v;
        }
        Ok(dx)
    }
}
