//! Simulation campaigns and their on-disk form.
//!
//! A dataset directory holds `manifest.json` plus shard files
//! `shard_NNNNN.qpsd`, each a concatenation of [`format`] records. The
//! manifest is written last; a directory still carrying the
//! [`INCOMPLETE_MARKER`] file was interrupted and must not be trusted.

pub mod format;

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::atmosphere::{stratify_with, ChannelConfig, HufnagelValley, ScaledProfile, ScreenPlan, StratifyOptions};
use crate::error::{Error, Result};
use crate::optics::{make_gaussian_field, phase_correction_truth, ComplexField, SplitStep, SplitStepOptions};
use crate::qkd::{transmissivity, Aperture, DetectorParams};
use crate::seed::derive_seed;

pub use format::Sample;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

/// Stream index reserved for shot-noise draws; layer screens use 0..n_layers.
const SHOT_NOISE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSettings {
    /// Simulation samples per side, a power of two.
    pub sim_grid_n: usize,
    /// Simulation grid side, metres.
    pub sim_side: f64,
    /// Stored samples per side.
    pub sample_size: usize,
    /// Simulation pixels averaged into one stored pixel per axis.
    pub downsample: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            sim_grid_n: 256,
            sim_side: 8.0,
            sample_size: 64,
            downsample: 1,
        }
    }
}

impl GridSettings {
    pub fn sim_dx(&self) -> f64 {
        self.sim_side / self.sim_grid_n as f64
    }

    pub fn sample_dx(&self) -> f64 {
        self.sim_dx() * self.downsample as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.sim_grid_n < 32 || !self.sim_grid_n.is_power_of_two() {
            return Err(Error::config("sim_grid_n", "must be a power of two >= 32"));
        }
        if !(self.sim_side > 0.0 && self.sim_side.is_finite()) {
            return Err(Error::config("sim_side", "must be > 0"));
        }
        if self.sample_size == 0 || self.downsample == 0 {
            return Err(Error::config("sample_size", "sample size and downsample factor must be >= 1"));
        }
        if self.sample_size * self.downsample > self.sim_grid_n {
            return Err(Error::config("sample_size", "cropped window exceeds the simulation grid"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignSettings {
    pub n_samples: usize,
    pub n_layers: usize,
    pub campaign_seed: u64,
    pub grid: GridSettings,
    pub shot_noise: bool,
    /// Multiplies the whole Cn² profile; 0 gives a vacuum campaign.
    pub cn2_scale: f64,
    /// Detector efficiency folded into the stored transmissivity.
    pub eta_det: f64,
    pub shard_size: usize,
    pub split_ratio: f64,
}

impl Default for CampaignSettings {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            n_layers: 10,
            campaign_seed: 7,
            grid: GridSettings::default(),
            shot_noise: false,
            cn2_scale: 1.0,
            eta_det: DetectorParams::default().eta_det,
            shard_size: 256,
            split_ratio: 0.9,
        }
    }
}

impl CampaignSettings {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.n_samples == 0 {
            return Err(Error::config("n_samples", "must be >= 1"));
        }
        if self.n_layers == 0 {
            return Err(Error::config("n_layers", "must be >= 1"));
        }
        if !(self.cn2_scale >= 0.0 && self.cn2_scale.is_finite()) {
            return Err(Error::config("cn2_scale", "must be finite and >= 0"));
        }
        if !(self.eta_det > 0.0 && self.eta_det <= 1.0) {
            return Err(Error::config("eta_det", "must lie in (0, 1]"));
        }
        if self.shard_size == 0 {
            return Err(Error::config("shard_size", "must be >= 1"));
        }
        split_counts(self.n_samples, self.split_ratio)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train_count: usize,
    pub test_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardInfo {
    pub file: String,
    pub first_index: usize,
    pub count: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub channel_config: ChannelConfig,
    pub campaign: CampaignSettings,
    pub campaign_seed: u64,
    pub sample_count: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    pub sample_dx: f64,
    pub split: SplitCounts,
    pub plan: ScreenPlan,
    pub shards: Vec<ShardInfo>,
    /// SHA-256 of each encoded record, by sample index.
    pub sample_digests: Vec<String>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|source| Error::Manifest {
            path: path.clone(),
            source,
        })?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::Format {
                path,
                reason: format!(
                    "format version {} (this build reads {FORMAT_VERSION})",
                    manifest.format_version
                ),
            });
        }
        Ok(manifest)
    }

    pub fn record_len(&self) -> usize {
        format::record_len(self.grid_h, self.grid_w)
    }

    fn locate(&self, index: usize) -> Result<(&ShardInfo, usize)> {
        if index >= self.sample_count {
            return Err(Error::Lookup {
                index,
                count: self.sample_count,
            });
        }
        self.shards
            .iter()
            .find(|s| index >= s.first_index && index < s.first_index + s.count)
            .map(|s| (s, index - s.first_index))
            .ok_or(Error::Lookup {
                index,
                count: self.sample_count,
            })
    }
}

/// Number of training samples `ceil(ratio n)` and the remainder.
pub fn split_counts(n: usize, ratio: f64) -> Result<SplitCounts> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::config("split_ratio", format!("must lie strictly inside (0, 1) (got {ratio})")));
    }
    // the small offset keeps exact products such as 0.9 * 64000 from rounding up
    let train = ((ratio * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let train = train.min(n);
    Ok(SplitCounts {
        train_count: train,
        test_count: n - train,
    })
}

/// Contiguous index ranges `(train, test)`.
pub fn split(manifest: &Manifest, ratio: f64) -> Result<(Range<usize>, Range<usize>)> {
    let counts = split_counts(manifest.sample_count, ratio)?;
    Ok((0..counts.train_count, counts.train_count..manifest.sample_count))
}

/// Everything needed to simulate any sample of a campaign.
pub struct Campaign {
    config: ChannelConfig,
    settings: CampaignSettings,
    plan: ScreenPlan,
    input: ComplexField,
    aperture: Aperture,
}

impl Campaign {
    pub fn new(config: &ChannelConfig, settings: &CampaignSettings) -> Result<Self> {
        config.validate()?;
        settings.validate()?;
        let profile = ScaledProfile {
            inner: HufnagelValley::from_config(config),
            factor: settings.cn2_scale,
        };
        let plan = stratify_with(&profile, config, settings.n_layers, &StratifyOptions::default())?;
        let grid = &settings.grid;
        let input = make_gaussian_field(grid.sim_grid_n, grid.sim_dx(), config)?;
        let aperture = Aperture::disk(grid.sample_size, grid.sample_dx(), config.receiver_radius)?;
        Ok(Self {
            config: *config,
            settings: *settings,
            plan,
            input,
            aperture,
        })
    }

    pub fn plan(&self) -> &ScreenPlan {
        &self.plan
    }

    pub fn settings(&self) -> &CampaignSettings {
        &self.settings
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    pub fn engine(&self) -> Result<SplitStep> {
        let grid = &self.settings.grid;
        SplitStep::new(grid.sim_grid_n, grid.sim_dx(), &self.config, SplitStepOptions::default())
    }

    fn crop(&self, field: &ComplexField) -> Result<ComplexField> {
        field.crop_center(self.settings.grid.sample_size, self.settings.grid.downsample)
    }

    /// Vacuum-propagated beam over the stored window, the RLO mode shape.
    pub fn reference_patch(&self, engine: &mut SplitStep) -> Result<ComplexField> {
        let full = engine.reference(&self.input, &self.plan)?;
        self.crop(&full)
    }

    pub fn sample_seed(&self, index: usize) -> u64 {
        derive_seed(self.settings.campaign_seed, index as u64)
    }

    pub fn simulate(&self, index: usize, engine: &mut SplitStep, reference: &ComplexField) -> Result<Sample> {
        let seed = self.sample_seed(index);
        let received = engine.turbulent(&self.input, &self.plan, seed)?;
        let t = transmissivity(
            &received,
            self.input.total_power(),
            self.config.receiver_radius,
            self.settings.eta_det,
        )?
        .clamp(0.0, 1.0);
        let patch = self.crop(&received)?;
        let truth = phase_correction_truth(&patch, reference)?;
        let gamma = self.aperture.gamma(reference.values(), patch.values())?;

        let mut intensity = patch.intensity();
        if self.settings.shot_noise {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SHOT_NOISE_STREAM));
            apply_shot_noise(&mut intensity, self.config.photon_number, &mut rng)?;
        }
        let peak = intensity.iter().cloned().fold(0.0, f64::max);
        if peak > 0.0 {
            intensity.iter_mut().for_each(|v| *v /= peak);
        }
        let size = self.settings.grid.sample_size;
        Ok(Sample {
            sample_index: index,
            seed,
            height: size,
            width: size,
            intensity: intensity.iter().map(|&v| v as f32).collect(),
            phase_correction: truth.iter().map(|&v| v as f32).collect(),
            gamma_uncorrected: gamma,
            transmissivity_t: t,
        })
    }
}

/// Replaces each pixel by a Poisson count whose mean is its share of
/// `photons` total detections.
fn apply_shot_noise(intensity: &mut [f64], photons: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    let total: f64 = intensity.iter().sum();
    if total <= 0.0 {
        return Ok(());
    }
    for v in intensity.iter_mut() {
        let mean = *v / total * photons;
        *v = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| Error::domain("shot_noise", e.to_string()))?
                .sample(rng)
        } else {
            0.0
        };
    }
    Ok(())
}

/// Rebuilds the received field of a stored sample, `sqrt(I) exp(i(arg E_ref + Φ))`,
/// in the intensity units of the stored image.
pub fn received_patch(sample: &Sample, reference: &ComplexField) -> Result<ComplexField> {
    let n = reference.grid_n();
    if sample.height != n || sample.width != n {
        return Err(Error::Shape {
            expected: format!("{n}x{n} sample"),
            actual: format!("{}x{}", sample.height, sample.width),
        });
    }
    let values = sample
        .intensity
        .iter()
        .zip(&sample.phase_correction)
        .zip(reference.values())
        .map(|((&i, &p), r)| Complex64::from_polar((i.max(0.0) as f64).sqrt(), r.arg() + p as f64))
        .collect();
    ComplexField::patch(n, reference.dx(), reference.wavelength(), values)
}

fn shard_name(shard: usize) -> String {
    format!("shard_{shard:05}.qpsd")
}

fn hex_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Simulates every sample and writes the dataset into `out_dir`.
///
/// Re-running with identical inputs rewrites byte-identical files.
pub fn run_campaign(config: &ChannelConfig, settings: &CampaignSettings, out_dir: &Path) -> Result<Manifest> {
    let campaign = Campaign::new(config, settings)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let marker = out_dir.join(INCOMPLETE_MARKER);
    write_file(&marker, b"campaign in progress\n")?;
    let manifest_path = out_dir.join(MANIFEST_FILE);
    if manifest_path.exists() {
        fs::remove_file(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    }

    let reference = campaign.reference_patch(&mut campaign.engine()?)?;
    let mut shards = Vec::new();
    let mut sample_digests = Vec::with_capacity(settings.n_samples);
    for (shard, first) in (0..settings.n_samples).step_by(settings.shard_size).enumerate() {
        let last = (first + settings.shard_size).min(settings.n_samples);
        let records: Vec<Vec<u8>> = (first..last)
            .into_par_iter()
            .map_init(
                || campaign.engine(),
                |engine, index| {
                    let engine = engine.as_mut().map_err(|e| Error::config("grid", e.to_string()))?;
                    campaign
                        .simulate(index, engine, &reference)
                        .map(|s| format::encode(&s))
                },
            )
            .collect::<Result<_>>()?;
        let mut blob = Vec::with_capacity(records.iter().map(Vec::len).sum());
        for record in &records {
            sample_digests.push(hex_digest(record));
            blob.extend_from_slice(record);
        }
        let file = shard_name(shard);
        write_file(&out_dir.join(&file), &blob)?;
        shards.push(ShardInfo {
            file,
            first_index: first,
            count: last - first,
            sha256: hex_digest(&blob),
        });
    }

    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        channel_config: *config,
        campaign: *settings,
        campaign_seed: settings.campaign_seed,
        sample_count: settings.n_samples,
        grid_h: settings.grid.sample_size,
        grid_w: settings.grid.sample_size,
        sample_dx: settings.grid.sample_dx(),
        split: split_counts(settings.n_samples, settings.split_ratio)?,
        plan: campaign.plan,
        shards,
        sample_digests,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|source| Error::Manifest {
        path: manifest_path.clone(),
        source,
    })?;
    write_file(&manifest_path, json.as_bytes())?;
    fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    Ok(manifest)
}

/// Read access to a finished dataset directory.
pub struct Dataset {
    dir: PathBuf,
    manifest: Manifest,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self> {
        let marker = dir.join(INCOMPLETE_MARKER);
        if marker.exists() {
            return Err(Error::Corrupt {
                path: dir.into(),
                reason: "campaign did not finish (incomplete marker present)".into(),
            });
        }
        Ok(Self {
            dir: dir.into(),
            manifest: Manifest::load(dir)?,
        })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.manifest.sample_count
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.sample_count == 0
    }

    /// Reads and verifies one record.
    pub fn sample(&self, index: usize) -> Result<Sample> {
        let (shard, offset) = self.manifest.locate(index)?;
        let path = self.dir.join(&shard.file);
        let len = self.manifest.record_len();
        let bytes = read_range(&path, (offset * len) as u64, len)?;
        self.verify(index, &path, &bytes)?;
        format::decode(&bytes, index, &path)
    }

    /// Reads every sample in `range`, one shard read per shard touched.
    pub fn samples(&self, range: Range<usize>) -> Result<Vec<Sample>> {
        let mut out = Vec::with_capacity(range.len());
        let len = self.manifest.record_len();
        let mut index = range.start;
        while index < range.end {
            let (shard, offset) = self.manifest.locate(index)?;
            let take = (shard.count - offset).min(range.end - index);
            let path = self.dir.join(&shard.file);
            let bytes = read_range(&path, (offset * len) as u64, take * len)?;
            for (k, record) in bytes.chunks_exact(len).enumerate() {
                self.verify(index + k, &path, record)?;
                out.push(format::decode(record, index + k, &path)?);
            }
            index += take;
        }
        Ok(out)
    }

    fn verify(&self, index: usize, path: &Path, bytes: &[u8]) -> Result<()> {
        let expect = &self.manifest.sample_digests[index];
        let actual = hex_digest(bytes);
        if &actual != expect {
            return Err(Error::Corrupt {
                path: path.into(),
                reason: format!("sample {index} digest {actual} does not match manifest {expect}"),
            });
        }
        Ok(())
    }
}

fn read_range(path: &Path, offset: u64, len: usize) -> Result<Vec<u8>> {
    use std::io::{Read, Seek, SeekFrom};
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let size = file.metadata().map_err(|e| Error::io(path, e))?.len();
    if offset + len as u64 > size {
        return Err(Error::Corrupt {
            path: path.into(),
            reason: format!("file holds {size} bytes, record ends at {}", offset + len as u64),
        });
    }
    file.seek(SeekFrom::Start(offset)).map_err(|e| Error::io(path, e))?;
    let mut buf = vec![0u8; len];
    file.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

/// Reads sample `index` of the dataset in directory `path`.
pub fn read_sample(path: &Path, index: usize) -> Result<Sample> {
    Dataset::open(path)?.sample(index)
}
