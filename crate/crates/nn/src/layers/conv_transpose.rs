use rand::Rng;

use super::{Mode, Param};
use crate::error::{Error, Result};
use crate::float::Float;
use crate::tensor::Tensor;

const KERNEL: usize = 3;
const STRIDE: usize = 2;
const PAD: isize = 1;

/// 3×3 transposed convolution with stride 2, padding 1 and output padding
/// 1, so every spatial dimension exactly doubles.
///
/// Weights are laid out `[in][out][3][3]`, followed by one bias per output
/// channel. Input pixel `(i, j)` feeds output `(2i - 1 + a, 2j - 1 + b)`
/// through tap `(a, b)`.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub weight: Param<T>,
    pub bias: Param<T>,
    input: Option<Tensor<T>>,
    cols: Vec<T>,
}

impl<T: Float> ConvTranspose2d<T> {
    pub fn new<R: Rng>(in_channels: usize, out_channels: usize, rng: &mut R) -> Self {
        let fan_in = (in_channels * KERNEL * KERNEL) as f64;
        Self {
            in_channels,
            out_channels,
            weight: Param::uniform(in_channels * out_channels * KERNEL * KERNEL, (6.0 / fan_in).sqrt(), rng),
            bias: Param::uniform(out_channels, 1.0 / fan_in.sqrt(), rng),
            input: None,
            cols: Vec::new(),
        }
    }

    pub fn param_count(in_channels: usize, out_channels: usize) -> usize {
        KERNEL * KERNEL * in_channels * out_channels + out_channels
    }

    fn taps(&self) -> usize {
        self.out_channels * KERNEL * KERNEL
    }

    /// Visits every (column row, input pixel, output pixel) triple that
    /// lands inside the output.
    fn for_each_tap(&self, h: usize, w: usize, mut f: impl FnMut(usize, usize, usize)) {
        let (oh, ow) = (h * STRIDE, w * STRIDE);
        let hw = h * w;
        for co in 0..self.out_channels {
            for a in 0..KERNEL {
                for b in 0..KERNEL {
                    let row = (co * KERNEL + a) * KERNEL + b;
                    for i in 0..h {
                        let oi = (i * STRIDE) as isize - PAD + a as isize;
                        if oi < 0 || oi >= oh as isize {
                            continue;
                        }
                        for j in 0..w {
                            let oj = (j * STRIDE) as isize - PAD + b as isize;
                            if oj < 0 || oj >= ow as isize {
                                continue;
                            }
                            f(row * hw + i * w + j, co, oi as usize * ow + oj as usize);
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let [n, c, h, w] = x.shape();
        if c != self.in_channels {
            return Err(Error::shape(format!("{} input channels", self.in_channels), format!("{c}")));
        }
        let hw = h * w;
        let ohw = hw * STRIDE * STRIDE;
        let taps = self.taps();
        self.cols.resize(taps * hw, T::zero());
        let mut y = Tensor::zeros([n, self.out_channels, h * STRIDE, w * STRIDE]);
        for s in 0..n {
            // cols = Wᵀ · X
            T::gemm(
                taps,
                c,
                hw,
                T::one(),
                &self.weight.value,
                (1, taps as isize),
                x.sample(s),
                (hw as isize, 1),
                T::zero(),
                &mut self.cols,
                hw as isize,
            );
            let out = y.sample_mut(s);
            for (co, plane) in out.chunks_exact_mut(ohw).enumerate() {
                plane.iter_mut().for_each(|v| *v = self.bias.value[co]);
            }
            let cols = &self.cols;
            self.for_each_tap(h, w, |col, co, o| out[co * ohw + o] += cols[col]);
        }
        self.input = (mode == Mode::Train).then(|| x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.input.take().expect("ConvTranspose2d::backward needs a training forward pass");
        let [n, c, h, w] = x.shape();
        let expect = [n, self.out_channels, h * STRIDE, w * STRIDE];
        if dy.shape() != expect {
            return Err(Error::shape(format!("{expect:?}"), format!("{:?}", dy.shape())));
        }
        let hw = h * w;
        let ohw = hw * STRIDE * STRIDE;
        let taps = self.taps();
        let mut dcols = vec![T::zero(); taps * hw];
        let mut dx = Tensor::zeros(x.shape());
        for s in 0..n {
            let g = dy.sample(s);
            dcols.iter_mut().for_each(|v| *v = T::zero());
            self.for_each_tap(h, w, |col, co, o| dcols[col] = g[co * ohw + o]);
            for (co, plane) in g.chunks_exact(ohw).enumerate() {
                self.bias.grad[co] += plane.iter().copied().sum::<T>();
            }
            // dW += X · dcolsᵀ
            T::gemm(
                c,
                hw,
                taps,
                T::one(),
                x.sample(s),
                (hw as isize, 1),
                &dcols,
                (1, hw as isize),
                T::one(),
                &mut self.weight.grad,
                taps as isize,
            );
            // dX = W · dcols
            T::gemm(
                c,
                taps,
                hw,
                T::one(),
                &self.weight.value,
                (taps as isize, 1),
                &dcols,
                (hw as isize, 1),
                T::zero(),
                dx.sample_mut(s),
                hw as isize,
            );
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
