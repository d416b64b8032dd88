use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use skyphase_core::dataset::Dataset;
use skyphase_nn::{build_network, save_checkpoint, train, Adam, TrainOptions, TrainReport, TrainingMetadata, TrainingSet};

use crate::commands::write_text;
use crate::config::TrainingConfig;
use crate::error::CliResult;

pub struct TrainOutcome {
    pub report: TrainReport,
    pub checkpoint: PathBuf,
    pub loss_csv: PathBuf,
}

/// Loads the first `count` samples of a dataset as (intensity, phase) pairs.
pub fn load_training_set(dataset: &Dataset, range: std::ops::Range<usize>) -> CliResult<TrainingSet<f32>> {
    let m = dataset.manifest();
    let samples = dataset.samples(range)?;
    let mut inputs = Vec::with_capacity(samples.len() * m.grid_h * m.grid_w);
    let mut targets = Vec::with_capacity(inputs.capacity());
    for s in samples {
        inputs.extend(s.intensity);
        targets.extend(s.phase_correction);
    }
    Ok(TrainingSet::new(inputs, targets, m.grid_h, m.grid_w)?)
}

pub fn loss_csv(losses: &[f64]) -> String {
    let mut out = String::from("epoch,train_loss\n");
    for (i, l) in losses.iter().enumerate() {
        let _ = writeln!(out, "{},{:.8e}", i + 1, l);
    }
    out
}

/// Trains on the manifest's training split and writes the checkpoint plus
/// `loss.csv` beside it.
pub fn cmd_train(training: &TrainingConfig, data_dir: &Path, checkpoint: &Path) -> CliResult<TrainOutcome> {
    training.validate()?;
    let dataset = Dataset::open(data_dir)?;
    let m = dataset.manifest();
    let data = load_training_set(&dataset, 0..m.split.train_count)?;
    let spec = training.network_spec(m.grid_h, m.grid_w);
    let mut network = build_network::<f32>(&spec, training.init_seed)?;
    let options = TrainOptions {
        epochs: training.epochs,
        batch_size: training.batch_size,
        learning_rate: training.learning_rate,
        seed: training.seed,
    };
    if training.learning_rate == 0.0 {
        eprintln!("warning: learning rate is 0; parameters will remain unchanged");
    }
    let mut adam = Adam::new(&network, options.adam())?;
    eprintln!(
        "training {} parameters on {} samples for {} epochs",
        network.param_count(),
        data.count,
        options.epochs
    );
    let report = train(&mut network, &mut adam, &data, &options, |epoch, loss| {
        eprintln!("epoch {:>3}  loss {loss:.6}", epoch + 1);
    })?;
    let metadata = TrainingMetadata {
        epochs: report.epoch_losses.len(),
        loss_history: report.epoch_losses.clone(),
        init_seed: training.init_seed,
        train_seed: training.seed,
    };
    if let Some(parent) = checkpoint.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| crate::error::CliError::dataset(format!("cannot create {}: {e}", parent.display())))?;
    }
    save_checkpoint(&network, Some(&adam), &metadata, checkpoint)?;
    let loss_path = checkpoint.with_file_name("loss.csv");
    write_text(&loss_path, &loss_csv(&report.epoch_losses))?;
    println!("wrote {} and {}", checkpoint.display(), loss_path.display());
    Ok(TrainOutcome {
        report,
        checkpoint: checkpoint.into(),
        loss_csv: loss_path,
    })
}
