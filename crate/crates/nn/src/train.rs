use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::float::Float;
use crate::layers::Mode;
use crate::loss::mse_loss_grad;
use crate::network::Network;
use crate::optim::{Adam, AdamConfig};
use crate::tensor::Tensor;

/// In-memory (input, target) pairs, each `h×w` single channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet<T> {
    pub inputs: Vec<T>,
    pub targets: Vec<T>,
    pub count: usize,
    pub height: usize,
    pub width: usize,
}

impl<T: Float> TrainingSet<T> {
    pub fn new(inputs: Vec<T>, targets: Vec<T>, height: usize, width: usize) -> Result<Self> {
        let px = height * width;
        if px == 0 || inputs.len() % px != 0 || inputs.len() != targets.len() {
            return Err(Error::shape(
                format!("matching multiples of {height}x{width}"),
                format!("{} inputs, {} targets", inputs.len(), targets.len()),
            ));
        }
        Ok(Self {
            count: inputs.len() / px,
            inputs,
            targets,
            height,
            width,
        })
    }

    fn gather(&self, src: &[T], indices: &[usize]) -> Tensor<T> {
        let px = self.height * self.width;
        let mut data = Vec::with_capacity(indices.len() * px);
        for &i in indices {
            data.extend_from_slice(&src[i * px..(i + 1) * px]);
        }
        Tensor::from_vec([indices.len(), 1, self.height, self.width], data).expect("sizes checked at construction")
    }

    pub fn input_batch(&self, indices: &[usize]) -> Tensor<T> {
        self.gather(&self.inputs, indices)
    }

    pub fn target_batch(&self, indices: &[usize]) -> Tensor<T> {
        self.gather(&self.targets, indices)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be >= 0 (got {})", self.learning_rate)));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training loss of each finished epoch.
    pub epoch_losses: Vec<f64>,
    /// Loss of the very first batch.
    pub initial_loss: f64,
    pub steps: u64,
}

/// One optimisation step on a batch; returns the batch loss.
pub fn train_step<T: Float>(
    network: &mut Network<T>,
    optimizer: &mut Adam<T>,
    inputs: &Tensor<T>,
    targets: &Tensor<T>,
) -> Result<f64> {
    network.zero_grad();
    let pred = network.forward(inputs, Mode::Train)?;
    let (loss, grad) = mse_loss_grad(&pred, targets)?;
    network.backward(&grad)?;
    optimizer.update(network)?;
    Ok(loss)
}

/// Minibatch Adam on the MSE loss. Single-threaded and deterministic for a
/// fixed seed. `on_epoch` sees each epoch index and mean loss as it ends.
pub fn train<T: Float>(
    network: &mut Network<T>,
    optimizer: &mut Adam<T>,
    data: &TrainingSet<T>,
    options: &TrainOptions,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainReport> {
    options.validate()?;
    if data.count == 0 {
        return Err(Error::Config("training set is empty".into()));
    }
    let spec = network.spec();
    if (spec.input_h, spec.input_w) != (data.height, data.width) {
        return Err(Error::shape(
            format!("{}x{} samples", spec.input_h, spec.input_w),
            format!("{}x{}", data.height, data.width),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut order: Vec<usize> = (0..data.count).collect();
    let mut epoch_losses = Vec::with_capacity(options.epochs);
    let mut initial = None;
    let mut strikes = 0;
    for epoch in 0..options.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(options.batch_size) {
            let loss = train_step(network, optimizer, &data.input_batch(batch), &data.target_batch(batch))?;
            initial.get_or_insert(loss);
            total += loss * batch.len() as f64;
        }
        let mean = total / data.count as f64;
        epoch_losses.push(mean);
        on_epoch(epoch, mean);
        let initial = initial.expect("at least one batch ran");
        if !(mean <= 10.0 * initial) {
            strikes += 1;
            if strikes >= 2 {
                return Err(Error::Diverged {
                    epoch,
                    loss: mean,
                    initial,
                    history: epoch_losses,
                });
            }
        } else {
            strikes = 0;
        }
    }
    Ok(TrainReport {
        epoch_losses,
        initial_loss: initial.unwrap_or(f64::NAN),
        steps: optimizer.step,
    })
}
