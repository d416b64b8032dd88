//! Central finite-difference checks of the hand-written backward passes,
//! run in `f64`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::layers::Mode;
use crate::loss::{mse_loss, mse_loss_grad};
use crate::network::{Layer, Network};
use crate::tensor::Tensor;

pub const EPS: f64 = 1e-3;
/// Absolute slack below which a mismatch is rounding noise, not a bug.
pub const ABS_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub what: String,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradReport {
    pub checked: usize,
    /// Largest `|a - n| / max(|a|, |n|)` over entries above the floor.
    pub max_rel_err: f64,
    pub worst: Option<Mismatch>,
}

impl GradReport {
    fn record(&mut self, what: impl FnOnce() -> String, analytic: f64, numeric: f64) {
        self.checked += 1;
        let err = (analytic - numeric).abs();
        if err <= ABS_FLOOR {
            return;
        }
        let rel = err / analytic.abs().max(numeric.abs());
        if rel > self.max_rel_err {
            self.max_rel_err = rel;
            self.worst = Some(Mismatch {
                what: what(),
                analytic,
                numeric,
            });
        }
    }

    pub fn passes(&self, rel_tol: f64) -> bool {
        self.checked > 0 && self.max_rel_err < rel_tol
    }
}

pub fn random_tensor(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("shape matches")
}

/// Checks input and parameter gradients of one layer under the loss
/// `sum(r * layer(x))` with a random projection `r` drawn from `seed`.
pub fn check_layer(layer: &mut Layer<f64>, x: &Tensor<f64>, seed: u64) -> Result<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = layer.forward(x, Mode::Train)?;
    let r = random_tensor(y.shape(), &mut rng);
    let loss = |layer: &mut Layer<f64>, x: &Tensor<f64>| -> Result<f64> {
        let y = layer.forward(x, Mode::Train)?;
        Ok(y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum())
    };
    for p in layer.params_mut() {
        p.zero_grad();
    }
    layer.forward(x, Mode::Train)?;
    let dx = layer.backward(&r)?;
    let kind = layer.kind_name();
    let mut report = GradReport::default();

    for i in 0..x.data().len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += EPS;
        let mut minus = x.clone();
        minus.data_mut()[i] -= EPS;
        let numeric = (loss(layer, &plus)? - loss(layer, &minus)?) / (2.0 * EPS);
        report.record(|| format!("{kind} input {i}"), dx.data()[i], numeric);
    }

    let grads: Vec<Vec<f64>> = layer.params().iter().map(|p| p.grad.clone()).collect();
    for (pi, grad) in grads.iter().enumerate() {
        for (j, &analytic) in grad.iter().enumerate() {
            layer.params_mut()[pi].value[j] += EPS;
            let up = loss(layer, x)?;
            layer.params_mut()[pi].value[j] -= 2.0 * EPS;
            let down = loss(layer, x)?;
            layer.params_mut()[pi].value[j] += EPS;
            report.record(|| format!("{kind} param {pi}[{j}]"), analytic, (up - down) / (2.0 * EPS));
        }
    }
    Ok(report)
}

/// Checks every parameter gradient of a network under the MSE loss.
pub fn check_network(net: &mut Network<f64>, x: &Tensor<f64>, target: &Tensor<f64>) -> Result<GradReport> {
    let loss = |net: &mut Network<f64>| -> Result<f64> {
        let y = net.forward(x, Mode::Train)?;
        mse_loss(&y, target)
    };
    net.zero_grad();
    let y = net.forward(x, Mode::Train)?;
    let (_, g) = mse_loss_grad(&y, target)?;
    net.backward(&g)?;
    let analytic = net.flat_grads();
    let mut report = GradReport::default();
    let mut k = 0;
    for pi in 0..net.params().len() {
        for j in 0..net.params()[pi].len() {
            net.params_mut()[pi].value[j] += EPS;
            let up = loss(net)?;
            net.params_mut()[pi].value[j] -= 2.0 * EPS;
            let down = loss(net)?;
            net.params_mut()[pi].value[j] += EPS;
            report.record(|| format!("param array {pi}[{j}]"), analytic[k], (up - down) / (2.0 * EPS));
            k += 1;
        }
    }
    Ok(report)
}
