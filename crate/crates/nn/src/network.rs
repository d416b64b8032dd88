use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Float;
use crate::layers::{BatchNorm2d, Conv2d, ConvTranspose2d, MaxPool2d, Mode, Param, Relu};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSpec {
    pub kernel: usize,
    pub out_channels: usize,
    pub batch_norm: bool,
}

/// Convolutions followed by a 2×2 max-pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderStage {
    pub convs: Vec<ConvSpec>,
}

/// A stride-2 transposed convolution followed by convolutions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderStage {
    pub up_channels: usize,
    pub up_batch_norm: bool,
    pub convs: Vec<ConvSpec>,
}

/// Encoder-decoder architecture. Every convolution except the final linear
/// projection is followed by optional batch norm and a ReLU.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub input_h: usize,
    pub input_w: usize,
    pub encoder: Vec<EncoderStage>,
    pub decoder: Vec<DecoderStage>,
    /// Kernel of the final single-channel linear projection (with bias).
    pub head_kernel: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv { in_c: usize, out_c: usize, kernel: usize },
    BatchNorm { channels: usize },
    Relu,
    MaxPool,
    ConvTranspose { in_c: usize, out_c: usize },
}

impl NetworkSpec {
    /// Conv ×2 → pool → conv ×2 → pool → conv ×3 → pool, then three
    /// (transposed conv + conv) stages back up and a linear projection:
    /// 11 convolutions, 3 pools and 3 transposed convolutions. The first
    /// kernel is 5×5, all others 3×3.
    pub fn paper_faithful(input_h: usize, input_w: usize, widths: [usize; 3]) -> Self {
        let conv = |kernel, out_channels| ConvSpec {
            kernel,
            out_channels,
            batch_norm: true,
        };
        let [a, b, c] = widths;
        Self {
            input_h,
            input_w,
            encoder: vec![
                EncoderStage {
                    convs: vec![conv(5, a), conv(3, a)],
                },
                EncoderStage {
                    convs: vec![conv(3, b), conv(3, b)],
                },
                EncoderStage {
                    convs: vec![conv(3, c), conv(3, c), conv(3, c)],
                },
            ],
            decoder: [c, b, a]
                .into_iter()
                .map(|w| DecoderStage {
                    up_channels: w,
                    up_batch_norm: true,
                    convs: vec![conv(3, w)],
                })
                .collect(),
            head_kernel: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let stages = self.encoder.len();
        if self.decoder.len() != stages {
            return Err(Error::Spec(format!(
                "{stages} encoder stages but {} decoder stages; output dims would differ from input dims",
                self.decoder.len()
            )));
        }
        let factor = 1usize << stages;
        if self.input_h == 0 || self.input_w == 0 || self.input_h % factor != 0 || self.input_w % factor != 0 {
            return Err(Error::Spec(format!(
                "input {}x{} must be a positive multiple of {factor} for {stages} pooling stages",
                self.input_h, self.input_w
            )));
        }
        let convs = self.encoder.iter().flat_map(|s| &s.convs).chain(self.decoder.iter().flat_map(|s| &s.convs));
        for c in convs {
            if c.kernel % 2 == 0 || c.out_channels == 0 {
                return Err(Error::Spec(format!("conv {c:?} needs an odd kernel and >= 1 channel")));
            }
        }
        if self.head_kernel % 2 == 0 {
            return Err(Error::Spec("head kernel must be odd".into()));
        }
        if self.decoder.iter().any(|d| d.up_channels == 0) {
            return Err(Error::Spec("transposed convolutions need >= 1 channel".into()));
        }
        Ok(())
    }

    /// Flat layer sequence, input first.
    pub fn layers(&self) -> Result<Vec<LayerKind>> {
        self.validate()?;
        let mut out = Vec::new();
        let mut ch = 1;
        let push_conv = |out: &mut Vec<LayerKind>, ch: &mut usize, c: &ConvSpec| {
            out.push(LayerKind::Conv {
                in_c: *ch,
                out_c: c.out_channels,
                kernel: c.kernel,
            });
            if c.batch_norm {
                out.push(LayerKind::BatchNorm { channels: c.out_channels });
            }
            out.push(LayerKind::Relu);
            *ch = c.out_channels;
        };
        for stage in &self.encoder {
            for c in &stage.convs {
                push_conv(&mut out, &mut ch, c);
            }
            out.push(LayerKind::MaxPool);
        }
        for stage in &self.decoder {
            out.push(LayerKind::ConvTranspose {
                in_c: ch,
                out_c: stage.up_channels,
            });
            if stage.up_batch_norm {
                out.push(LayerKind::BatchNorm {
                    channels: stage.up_channels,
                });
            }
            out.push(LayerKind::Relu);
            ch = stage.up_channels;
            for c in &stage.convs {
                push_conv(&mut out, &mut ch, c);
            }
        }
        out.push(LayerKind::Conv {
            in_c: ch,
            out_c: 1,
            kernel: self.head_kernel,
        });
        Ok(out)
    }

    /// Trainable parameters this layout implies.
    pub fn param_count(&self) -> Result<usize> {
        Ok(self
            .layers()?
            .iter()
            .map(|l| match *l {
                LayerKind::Conv { in_c, out_c, kernel } => Conv2d::<f32>::param_count(in_c, out_c, kernel),
                LayerKind::ConvTranspose { in_c, out_c } => ConvTranspose2d::<f32>::param_count(in_c, out_c),
                LayerKind::BatchNorm { channels } => BatchNorm2d::<f32>::param_count(channels),
                LayerKind::Relu | LayerKind::MaxPool => 0,
            })
            .sum())
    }

    /// Batch-norm running statistics this layout implies.
    pub fn buffer_count(&self) -> Result<usize> {
        Ok(self
            .layers()?
            .iter()
            .map(|l| match *l {
                LayerKind::BatchNorm { channels } => 2 * channels,
                _ => 0,
            })
            .sum())
    }
}

#[derive(Debug, Clone)]
pub enum Layer<T> {
    Conv(Conv2d<T>),
    BatchNorm(BatchNorm2d<T>),
    Relu(Relu),
    MaxPool(MaxPool2d),
    ConvTranspose(ConvTranspose2d<T>),
}

impl<T: Float> Layer<T> {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::BatchNorm(_) => "batch_norm",
            Layer::Relu(_) => "relu",
            Layer::MaxPool(_) => "max_pool",
            Layer::ConvTranspose(_) => "conv_transpose",
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        match self {
            Layer::Conv(l) => l.forward(x, mode),
            Layer::BatchNorm(l) => l.forward(x, mode),
            Layer::Relu(l) => l.forward(x, mode),
            Layer::MaxPool(l) => l.forward(x, mode),
            Layer::ConvTranspose(l) => l.forward(x, mode),
        }
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Conv(l) => l.backward(dy),
            Layer::BatchNorm(l) => l.backward(dy),
            Layer::Relu(l) => l.backward(dy),
            Layer::MaxPool(l) => l.backward(dy),
            Layer::ConvTranspose(l) => l.backward(dy),
        }
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        match self {
            Layer::Conv(l) => l.params().to_vec(),
            Layer::BatchNorm(l) => l.params().to_vec(),
            Layer::ConvTranspose(l) => l.params().to_vec(),
            Layer::Relu(_) | Layer::MaxPool(_) => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        match self {
            Layer::Conv(l) => l.params_mut().into_iter().collect(),
            Layer::BatchNorm(l) => l.params_mut().into_iter().collect(),
            Layer::ConvTranspose(l) => l.params_mut().into_iter().collect(),
            Layer::Relu(_) | Layer::MaxPool(_) => Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Network<T> {
    spec: NetworkSpec,
    layers: Vec<Layer<T>>,
}

/// Builds a network with deterministic fan-in-scaled initialisation.
pub fn build_network<T: Float>(spec: &NetworkSpec, init_seed: u64) -> Result<Network<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
    let layers = spec
        .layers()?
        .into_iter()
        .map(|kind| match kind {
            LayerKind::Conv { in_c, out_c, kernel } => Layer::Conv(Conv2d::new(in_c, out_c, kernel, &mut rng)),
            LayerKind::BatchNorm { channels } => Layer::BatchNorm(BatchNorm2d::new(channels)),
            LayerKind::Relu => Layer::Relu(Relu::new()),
            LayerKind::MaxPool => Layer::MaxPool(MaxPool2d::new()),
            LayerKind::ConvTranspose { in_c, out_c } => {
                Layer::ConvTranspose(ConvTranspose2d::new(in_c, out_c, &mut rng))
            }
        })
        .collect();
    Ok(Network {
        spec: spec.clone(),
        layers,
    })
}

impl<T: Float> Network<T> {
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Running means then running variances of every batch-norm layer.
    pub fn buffers(&self) -> Vec<&Vec<T>> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::BatchNorm(b) => Some([&b.running_mean, &b.running_var]),
                _ => None,
            })
            .flatten()
            .collect()
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Vec<T>> {
        self.layers
            .iter_mut()
            .filter_map(|l| match l {
                Layer::BatchNorm(b) => Some([&mut b.running_mean, &mut b.running_var]),
                _ => None,
            })
            .flatten()
            .collect()
    }

    /// Parameters flattened in layer order.
    pub fn flat_params(&self) -> Vec<T> {
        self.params().iter().flat_map(|p| p.value.iter().copied()).collect()
    }

    pub fn flat_grads(&self) -> Vec<T> {
        self.params().iter().flat_map(|p| p.grad.iter().copied()).collect()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Zeroes the final projection's weights and bias.
    pub fn zero_head(&mut self) {
        if let Some(Layer::Conv(head)) = self.layers.last_mut() {
            head.weight.value.iter_mut().for_each(|v| *v = T::zero());
            head.bias.value.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// Maps `(batch, 1, H, W)` intensities to `(batch, 1, H, W)` phases.
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let expect = [x.batch(), 1, self.spec.input_h, self.spec.input_w];
        if x.batch() == 0 || x.shape() != expect {
            return Err(Error::shape(
                format!("[batch >= 1, 1, {}, {}]", self.spec.input_h, self.spec.input_w),
                format!("{:?}", x.shape()),
            ));
        }
        let mut act = self.layers[0].forward(x, mode)?;
        check_finite(&act, 0, self.layers[0].kind_name(), "in forward output of")?;
        for (i, layer) in self.layers.iter_mut().enumerate().skip(1) {
            act = layer.forward(&act, mode)?;
            check_finite(&act, i, layer.kind_name(), "in forward output of")?;
        }
        Ok(act)
    }

    /// Backpropagates `grad` (loss gradient w.r.t. the output) through the
    /// last training-mode forward pass, accumulating into parameter grads.
    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = grad.clone();
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            g = layer.backward(&g)?;
            check_finite(&g, i, layer.kind_name(), "in input gradient of")?;
            for p in layer.params() {
                if p.grad.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numeric {
                        layer: i,
                        kind: layer.kind_name(),
                        stage: "in parameter gradient of",
                    });
                }
            }
        }
        Ok(g)
    }

    /// Inference-mode forward in chunks of `batch` samples.
    pub fn predict(&mut self, x: &Tensor<T>, batch: usize) -> Result<Tensor<T>> {
        let [n, c, h, w] = x.shape();
        let mut out = Vec::with_capacity(n * h * w);
        let batch = batch.max(1);
        for start in (0..n).step_by(batch) {
            let end = (start + batch).min(n);
            let len = c * h * w;
            let chunk = Tensor::from_vec([end - start, c, h, w], x.data()[start * len..end * len].to_vec())?;
            out.extend_from_slice(self.forward(&chunk, Mode::Inference)?.data());
        }
        Tensor::from_vec([n, 1, h, w], out)
    }

    /// Converts every parameter and buffer to another float type.
    pub fn cast<U: Float>(&self) -> Network<U> {
        let mut out = build_network::<U>(&self.spec, 0).expect("spec already validated");
        for (dst, src) in out.params_mut().into_iter().zip(self.params()) {
            dst.value = src.value.iter().map(|&v| U::lit(v.as_f64())).collect();
        }
        for (dst, src) in out.buffers_mut().into_iter().zip(self.buffers()) {
            *dst = src.iter().map(|&v| U::lit(v.as_f64())).collect();
        }
        out
    }
}

fn check_finite<T: Float>(t: &Tensor<T>, layer: usize, kind: &'static str, stage: &'static str) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric { layer, kind, stage })
    }
}
