use super::{Mode, Param};
use crate::error::{Error, Result};
use crate::float::Float;
use crate::tensor::Tensor;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-channel batch normalisation over (batch, height, width).
///
/// Running variance uses the unbiased batch variance.
#[derive(Debug, Clone)]
pub struct BatchNorm2d<T> {
    pub channels: usize,
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    cache: Option<Cache<T>>,
}

#[derive(Debug, Clone)]
struct Cache<T> {
    xhat: Tensor<T>,
    inv_std: Vec<f64>,
}

impl<T: Float> BatchNorm2d<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: Param::filled(channels, T::one()),
            beta: Param::zeros(channels),
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            cache: None,
        }
    }

    pub fn param_count(channels: usize) -> usize {
        2 * channels
    }

    fn channel_values<'a>(x: &'a Tensor<T>, ch: usize) -> impl Iterator<Item = &'a [T]> + 'a {
        let plane = x.height() * x.width();
        (0..x.batch()).map(move |s| &x.sample(s)[ch * plane..(ch + 1) * plane])
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let [n, c, h, w] = x.shape();
        if c != self.channels {
            return Err(Error::shape(format!("{} channels", self.channels), format!("{c}")));
        }
        let plane = h * w;
        let count = (n * plane) as f64;
        let mut mean = vec![0.0; c];
        let mut inv_std = vec![0.0; c];
        for ch in 0..c {
            let (m, var) = match mode {
                Mode::Train => {
                    let m = Self::channel_values(x, ch).flatten().map(|v| v.as_f64()).sum::<f64>() / count;
                    let ss = Self::channel_values(x, ch)
                        .flatten()
                        .map(|v| (v.as_f64() - m).powi(2))
                        .sum::<f64>();
                    let var = ss / count;
                    let unbiased = if count > 1.0 { ss / (count - 1.0) } else { var };
                    let rm = self.running_mean[ch].as_f64();
                    let rv = self.running_var[ch].as_f64();
                    self.running_mean[ch] = T::lit((1.0 - BN_MOMENTUM) * rm + BN_MOMENTUM * m);
                    self.running_var[ch] = T::lit((1.0 - BN_MOMENTUM) * rv + BN_MOMENTUM * unbiased);
                    (m, var)
                }
                Mode::Inference => (self.running_mean[ch].as_f64(), self.running_var[ch].as_f64()),
            };
            mean[ch] = m;
            inv_std[ch] = 1.0 / (var + BN_EPS).sqrt();
        }
        let mut xhat = Tensor::zeros(x.shape());
        let mut y = Tensor::zeros(x.shape());
        for s in 0..n {
            let src = x.sample(s);
            let xh = xhat.sample_mut(s);
            for ch in 0..c {
                let (m, is) = (T::lit(mean[ch]), T::lit(inv_std[ch]));
                for p in ch * plane..(ch + 1) * plane {
                    xh[p] = (src[p] - m) * is;
                }
            }
            let out = y.sample_mut(s);
            for ch in 0..c {
                let (g, b) = (self.gamma.value[ch], self.beta.value[ch]);
                for p in ch * plane..(ch + 1) * plane {
                    out[p] = g * xh[p] + b;
                }
            }
        }
        self.cache = (mode == Mode::Train).then_some(Cache { xhat, inv_std });
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let Cache { xhat, inv_std } = self.cache.take().expect("BatchNorm2d::backward needs a training forward pass");
        if dy.shape() != xhat.shape() {
            return Err(Error::shape(format!("{:?}", xhat.shape()), format!("{:?}", dy.shape())));
        }
        let [n, c, h, w] = xhat.shape();
        let plane = h * w;
        let count = (n * plane) as f64;
        let mut dx = Tensor::zeros(xhat.shape());
        for ch in 0..c {
            let (mut sum_dy, mut sum_dy_xhat) = (0.0, 0.0);
            for s in 0..n {
                let range = ch * plane..(ch + 1) * plane;
                for (g, xh) in dy.sample(s)[range.clone()].iter().zip(&xhat.sample(s)[range]) {
                    sum_dy += g.as_f64();
                    sum_dy_xhat += g.as_f64() * xh.as_f64();
                }
            }
            self.beta.grad[ch] += T::lit(sum_dy);
            self.gamma.grad[ch] += T::lit(sum_dy_xhat);
            let gamma = self.gamma.value[ch].as_f64();
            let scale = gamma * inv_std[ch] / count;
            for s in 0..n {
                let range = ch * plane..(ch + 1) * plane;
                let g = &dy.sample(s)[range.clone()];
                let xh = &xhat.sample(s)[range.clone()];
                let out = &mut dx.sample_mut(s)[range];
                for ((o, &gv), &xv) in out.iter_mut().zip(g).zip(xh) {
                    *o = T::lit(scale * (count * gv.as_f64() - sum_dy - xv.as_f64() * sum_dy_xhat));
                }
            }
        }
        Ok(dx)
    }

    pub fn params_mut(&mut self) -> [&mut Param<T>; 2] {
        [&mut self.gamma, &mut self.beta]
    }

    pub fn params(&self) -> [&Param<T>; 2] {
        [&self.gamma, &self.beta]
    }
}
