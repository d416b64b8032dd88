use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skyphase_nn::layers::BatchNorm2d;
use skyphase_nn::*;

fn smooth_pair(seed: u64, size: usize) -> (Vec<f32>, Vec<f32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b, c): (f32, f32, f32) = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0));
    let mut input = Vec::new();
    let mut target = Vec::new();
    for i in 0..size {
        for j in 0..size {
            let (x, y) = (i as f32 / size as f32, j as f32 / size as f32);
            input.push((a * x).sin().abs() + (b * y).cos().abs());
            target.push(c * (x - 0.5) + 0.5 * (a * y).sin());
        }
    }
    (input, target)
}

fn small_spec() -> NetworkSpec {
    NetworkSpec::paper_faithful(16, 16, [4, 4, 8])
}

fn dataset(count: usize, same: bool) -> TrainingSet<f32> {
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for i in 0..count {
        let (x, t) = smooth_pair(if same { 0 } else { i as u64 }, 16);
        inputs.extend(x);
        targets.extend(t);
    }
    TrainingSet::new(inputs, targets, 16, 16).unwrap()
}

#[test]
fn memorises_a_single_sample() {
    let data = dataset(32, true);
    let mut net = build_network::<f32>(&small_spec(), 1).unwrap();
    let mut adam = Adam::new(&net, AdamConfig::default()).unwrap();
    let batch: Vec<usize> = (0..32).collect();
    let (x, t) = (data.input_batch(&batch), data.target_batch(&batch));
    let mut last = f64::INFINITY;
    for _ in 0..200 {
        last = train_step(&mut net, &mut adam, &x, &t).unwrap();
    }
    assert!(last < 0.01, "final MSE {last}");
}

#[test]
fn zero_learning_rate_leaves_parameters() {
    let data = dataset(8, false);
    let mut net = build_network::<f32>(&small_spec(), 2).unwrap();
    let before = net.flat_params();
    let opts = TrainOptions {
        epochs: 1,
        batch_size: 4,
        learning_rate: 0.0,
        seed: 0,
    };
    let mut adam = Adam::new(&net, opts.adam()).unwrap();
    train(&mut net, &mut adam, &data, &opts, |_, _| {}).unwrap();
    assert_eq!(net.flat_params(), before);
}

#[test]
fn training_is_deterministic() {
    let data = dataset(12, false);
    let opts = TrainOptions {
        epochs: 2,
        batch_size: 4,
        learning_rate: 1e-3,
        seed: 9,
    };
    let run = || {
        let mut net = build_network::<f32>(&small_spec(), 3).unwrap();
        let mut adam = Adam::new(&net, opts.adam()).unwrap();
        let report = train(&mut net, &mut adam, &data, &opts, |_, _| {}).unwrap();
        let bytes = checkpoint::encode_checkpoint(&net, Some(&adam), &TrainingMetadata::default());
        (report, bytes)
    };
    let (r1, b1) = run();
    let (r2, b2) = run();
    assert_eq!(r1, r2);
    assert_eq!(b1, b2);
}

#[test]
fn early_epochs_do_not_increase_loss() {
    let data = dataset(64, false);
    let opts = TrainOptions {
        epochs: 3,
        batch_size: 8,
        learning_rate: 1e-3,
        seed: 4,
    };
    let mut net = build_network::<f32>(&small_spec(), 4).unwrap();
    let mut adam = Adam::new(&net, opts.adam()).unwrap();
    let report = train(&mut net, &mut adam, &data, &opts, |_, _| {}).unwrap();
    let l = &report.epoch_losses;
    assert!(l.windows(2).all(|w| w[1] <= w[0]), "{l:?}");
}

#[test]
fn huge_learning_rate_is_reported_as_divergence_or_numeric_failure() {
    let data = dataset(16, false);
    let opts = TrainOptions {
        epochs: 20,
        batch_size: 4,
        learning_rate: 1e4,
        seed: 1,
    };
    let mut net = build_network::<f32>(&small_spec(), 4).unwrap();
    let mut adam = Adam::new(&net, opts.adam()).unwrap();
    match train(&mut net, &mut adam, &data, &opts, |_, _| {}) {
        Err(Error::Diverged { history, .. }) => assert!(history.len() >= 2),
        Err(Error::Numeric { .. }) => {}
        other => panic!("expected a divergence, got {other:?}"),
    }
}

#[test]
fn batch_norm_output_is_standardised() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bn = BatchNorm2d::<f64>::new(3);
    let data: Vec<f64> = (0..4 * 3 * 8 * 8).map(|i| 5.0 * rng.gen::<f64>() + (i % 3) as f64 * 10.0).collect();
    let x = Tensor::from_vec([4, 3, 8, 8], data).unwrap();
    let y = bn.forward(&x, Mode::Train).unwrap();
    for ch in 0..3 {
        let vals: Vec<f64> = (0..4).flat_map(|s| y.sample(s)[ch * 64..(ch + 1) * 64].to_vec()).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!(mean.abs() < 1e-6, "{mean}");
        assert!((var - 1.0).abs() < 1e-5, "{var}");
    }
}

#[test]
fn inference_is_reproducible() {
    let (x, _) = smooth_pair(5, 16);
    let x = Tensor::from_vec([1, 1, 16, 16], x).unwrap();
    let out = || {
        let mut net = build_network::<f32>(&small_spec(), 6).unwrap();
        net.forward(&x, Mode::Inference).unwrap()
    };
    let (a, b) = (out(), out());
    let bits = |t: &Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert!(a.is_finite());
}
