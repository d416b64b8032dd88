use rand::Rng;

use super::{col2im, im2col, Mode, Param};
use crate::error::{Error, Result};
use crate::float::Float;
use crate::tensor::Tensor;

/// Stride-1 convolution with odd square kernel and same-size zero padding.
///
/// Weights are laid out `[out][in][k][k]`, followed by one bias per output
/// channel.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub weight: Param<T>,
    pub bias: Param<T>,
    input: Option<Tensor<T>>,
    cols: Vec<T>,
}

impl<T: Float> Conv2d<T> {
    /// He-uniform weights, bias uniform in ±1/sqrt(fan_in).
    pub fn new<R: Rng>(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut R) -> Self {
        assert!(kernel % 2 == 1, "kernel must be odd");
        let fan_in = (in_channels * kernel * kernel) as f64;
        Self {
            in_channels,
            out_channels,
            kernel,
            weight: Param::uniform(out_channels * in_channels * kernel * kernel, (6.0 / fan_in).sqrt(), rng),
            bias: Param::uniform(out_channels, 1.0 / fan_in.sqrt(), rng),
            input: None,
            cols: Vec::new(),
        }
    }

    pub fn param_count(in_channels: usize, out_channels: usize, kernel: usize) -> usize {
        kernel * kernel * in_channels * out_channels + out_channels
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let [n, c, h, w] = x.shape();
        if c != self.in_channels {
            return Err(Error::shape(format!("{} input channels", self.in_channels), format!("{c}")));
        }
        let hw = h * w;
        let kk = self.patch_len();
        self.cols.resize(kk * hw, T::zero());
        let mut y = Tensor::zeros([n, self.out_channels, h, w]);
        for s in 0..n {
            im2col(x.sample(s), c, h, w, self.kernel, &mut self.cols);
            let out = y.sample_mut(s);
            for (co, row) in out.chunks_exact_mut(hw).enumerate() {
                row.iter_mut().for_each(|v| *v = self.bias.value[co]);
            }
            T::gemm(
                self.out_channels,
                kk,
                hw,
                T::one(),
                &self.weight.value,
                (kk as isize, 1),
                &self.cols,
                (hw as isize, 1),
                T::one(),
                out,
                hw as isize,
            );
        }
        self.input = (mode == Mode::Train).then(|| x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.input.take().expect("Conv2d::backward needs a training forward pass");
        let [n, c, h, w] = x.shape();
        if dy.shape() != [n, self.out_channels, h, w] {
            return Err(Error::shape(format!("{:?}", [n, self.out_channels, h, w]), format!("{:?}", dy.shape())));
        }
        let hw = h * w;
        let kk = self.patch_len();
        let mut dx = Tensor::zeros(x.shape());
        let mut dcols = vec![T::zero(); kk * hw];
        for s in 0..n {
            im2col(x.sample(s), c, h, w, self.kernel, &mut self.cols);
            let g = dy.sample(s);
            // dW += dY · colsᵀ
            T::gemm(
                self.out_channels,
                hw,
                kk,
                T::one(),
                g,
                (hw as isize, 1),
                &self.cols,
                (1, hw as isize),
                T::one(),
                &mut self.weight.grad,
                kk as isize,
            );
            for (co, row) in g.chunks_exact(hw).enumerate() {
                self.bias.grad[co] += row.iter().copied().sum::<T>();
            }
            // dcols = Wᵀ · dY
            T::gemm(
                kk,
                self.out_channels,
                hw,
                T::one(),
                &self.weight.value,
                (1, kk as isize),
                g,
                (hw as isize, 1),
                T::zero(),
                &mut dcols,
                hw as isize,
            );
            col2im(&dcols, c, h, w, self.kernel, dx.sample_mut(s));
        }
        Ok(dx)
    }

    pub fn params_mut(&mut self) -> [&mut Param<T>; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> [&Param<T>; 2] {
        [&self.weight, &self.bias]
    }
}
