use std::path::Path;

use skyphase_core::dataset::{run_campaign, Dataset, Manifest};

use crate::config::RunConfig;
use crate::error::CliResult;

#[derive(Debug, Clone, Default)]
pub struct SimulateOverrides {
    pub count: Option<usize>,
    pub seed: Option<u64>,
    pub layers: Option<usize>,
    pub shot_noise: bool,
    pub cn2_scale: Option<f64>,
}

pub fn apply(config: &mut RunConfig, o: &SimulateOverrides) {
    let c = &mut config.campaign;
    if let Some(n) = o.count {
        c.n_samples = n;
    }
    if let Some(s) = o.seed {
        c.campaign_seed = s;
    }
    if let Some(l) = o.layers {
        c.n_layers = l;
    }
    if o.shot_noise {
        c.shot_noise = true;
    }
    if let Some(x) = o.cn2_scale {
        c.cn2_scale = x;
    }
}

pub fn cmd_simulate(config: &RunConfig, out_dir: &Path) -> CliResult<Manifest> {
    config.validate()?;
    let mut settings = config.campaign;
    settings.eta_det = config.detector.eta_det;
    let manifest = run_campaign(&config.channel, &settings, out_dir)?;
    let samples = Dataset::open(out_dir)?.samples(0..manifest.sample_count)?;
    let n = samples.len() as f64;
    let gamma = samples.iter().map(|s| s.gamma_uncorrected).sum::<f64>() / n;
    let t = samples.iter().map(|s| s.transmissivity_t).sum::<f64>() / n;
    println!(
        "wrote {} samples ({}x{}) in {} shards to {}",
        manifest.sample_count,
        manifest.grid_h,
        manifest.grid_w,
        manifest.shards.len(),
        out_dir.display()
    );
    println!(
        "split {} train / {} test; {} screens, total Rytov variance {:.4}",
        manifest.split.train_count,
        manifest.split.test_count,
        manifest.plan.layers.len(),
        manifest.plan.total_rytov()
    );
    println!("mean gamma_uncorrected {gamma:.6}, mean T {t:.6}");
    Ok(manifest)
}
