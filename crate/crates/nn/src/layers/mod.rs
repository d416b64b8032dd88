//! Layers with explicit forward and backward passes.
//!
//! `forward` caches whatever `backward` needs; `backward` takes the loss
//! gradient with respect to the layer output, accumulates parameter
//! gradients and returns the gradient with respect to the layer input.
//! Calling `backward` without a preceding training-mode `forward` panics.

mod batch_norm;
mod conv;
mod conv_transpose;
mod pool;
mod relu;

pub use batch_norm::BatchNorm2d;
pub use conv::Conv2d;
pub use conv_transpose::ConvTranspose2d;
pub use pool::MaxPool2d;
pub use relu::Relu;

use rand::Rng;

use crate::float::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics, caches kept for backward.
    Train,
    /// Running statistics.
    Inference,
}

/// A trainable array and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub value: Vec<T>,
    pub grad: Vec<T>,
}

impl<T: Float> Param<T> {
    pub fn new(value: Vec<T>) -> Self {
        let grad = vec![T::zero(); value.len()];
        Self { value, grad }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![T::zero(); len])
    }

    pub fn filled(len: usize, v: T) -> Self {
        Self::new(vec![v; len])
    }

    /// Uniform in `[-bound, bound]`.
    pub fn uniform<R: Rng>(len: usize, bound: f64, rng: &mut R) -> Self {
        Self::new((0..len).map(|_| T::lit(rng.gen_range(-bound..=bound))).collect())
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }
}

/// Copies channel-major rows of a `(c, h, w)` image into im2col layout for a
/// stride-1 `k×k` kernel with zero padding `k/2`.
pub(crate) fn im2col<T: Float>(x: &[T], c: usize, h: usize, w: usize, k: usize, cols: &mut [T]) {
    let pad = (k / 2) as isize;
    let hw = h * w;
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for a in 0..k {
            for b in 0..k {
                let row = &mut cols[((ci * k + a) * k + b) * hw..][..hw];
                let (da, db) = (a as isize - pad, b as isize - pad);
                for i in 0..h {
                    let ii = i as isize + da;
                    let out = &mut row[i * w..(i + 1) * w];
                    if ii < 0 || ii >= h as isize {
                        out.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &plane[ii as usize * w..(ii as usize + 1) * w];
                    for (j, v) in out.iter_mut().enumerate() {
                        let jj = j as isize + db;
                        *v = if jj < 0 || jj >= w as isize {
                            T::zero()
                        } else {
                            src[jj as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates columns back into the image.
pub(crate) fn col2im<T: Float>(cols: &[T], c: usize, h: usize, w: usize, k: usize, x: &mut [T]) {
    let pad = (k / 2) as isize;
    let hw = h * w;
    for ci in 0..c {
        let plane = &mut x[ci * hw..(ci + 1) * hw];
        for a in 0..k {
            for b in 0..k {
                let row = &cols[((ci * k + a) * k + b) * hw..][..hw];
                let (da, db) = (a as isize - pad, b as isize - pad);
                for i in 0..h {
                    let ii = i as isize + da;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[ii as usize * w..(ii as usize + 1) * w];
                    for (j, &v) in row[i * w..(i + 1) * w].iter().enumerate() {
                        let jj = j as isize + db;
                        if jj >= 0 && jj < w as isize {
                            dst[jj as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::{col2im, im2col};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    proptest! {
        // <im2col(x), y> = <x, col2im(y)>
        #[test]
        fn col2im_is_the_adjoint(c in 1usize..3, h in 1usize..6, w in 1usize..6, k in prop::sample::select(vec![1usize, 3, 5]), seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..c * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..c * k * k * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut cols = vec![0.0; y.len()];
            im2col(&x, c, h, w, k, &mut cols);
            let mut back = vec![0.0; x.len()];
            col2im(&y, c, h, w, k, &mut back);
            let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}
