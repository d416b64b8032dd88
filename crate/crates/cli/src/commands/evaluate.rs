use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use skyphase_core::dataset::{received_patch, Campaign, Dataset};
use skyphase_core::qkd::{apply_correction, scan_vmod, sig9, Aperture, ChannelStats, DetectorParams, ScanPoint};
use skyphase_nn::{load_checkpoint, Tensor};

use crate::commands::write_text;
use crate::error::{CliError, CliResult};

pub const PDF_BINS: usize = 50;
const PREDICT_BATCH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvaluationRow {
    pub sample: usize,
    pub gamma_before: f64,
    pub gamma_after: f64,
    pub gamma_oracle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSummary {
    pub gamma: f64,
    pub mean_xi_det: f64,
    pub best: ScanPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationSummary {
    pub test_samples: usize,
    pub mean_gamma_before: f64,
    pub mean_gamma_after: f64,
    pub mean_gamma_oracle: f64,
    pub mean_t: f64,
    pub mean_sqrt_t: f64,
    pub trusted_before: Option<ScanSummary>,
    pub trusted_after: Option<ScanSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub rows: Vec<EvaluationRow>,
    pub summary: EvaluationSummary,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

pub fn rows_csv(rows: &[EvaluationRow]) -> String {
    let mut out = String::from("sample,gamma_before,gamma_after,gamma_oracle\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.sample,
            sig9(r.gamma_before),
            sig9(r.gamma_after),
            sig9(r.gamma_oracle)
        );
    }
    out
}

/// Probability densities of the three efficiencies on `bins` equal bins
/// over [0, 1]; γ = 1 falls in the last bin.
pub fn pdf_csv(rows: &[EvaluationRow], bins: usize) -> String {
    let mut counts = vec![[0usize; 3]; bins];
    for r in rows {
        for (k, g) in [r.gamma_before, r.gamma_after, r.gamma_oracle].into_iter().enumerate() {
            let b = ((g * bins as f64) as usize).min(bins - 1);
            counts[b][k] += 1;
        }
    }
    let scale = bins as f64 / rows.len().max(1) as f64;
    let mut out = String::from("bin_lo,bin_hi,pdf_before,pdf_after,pdf_oracle\n");
    for (b, c) in counts.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            sig9(b as f64 / bins as f64),
            sig9((b + 1) as f64 / bins as f64),
            sig9(c[0] as f64 * scale),
            sig9(c[1] as f64 * scale),
            sig9(c[2] as f64 * scale)
        );
    }
    out
}

/// Trusted-detector scan at the ensemble ⟨T⟩, ⟨√T⟩ with detector noise
/// taken at the mean efficiency. `None` when the efficiency is zero.
fn trusted_scan(gamma: f64, mean_t: f64, mean_sqrt_t: f64, params: &DetectorParams) -> CliResult<Option<ScanSummary>> {
    if !(gamma > 0.0) || !(mean_t > 0.0) {
        return Ok(None);
    }
    let stats = ChannelStats {
        mean_t,
        mean_sqrt_t,
        mean_xi_det: None,
        gamma,
    };
    let params = params.with_trust(true);
    let scan = scan_vmod(&stats, &params, 0.0, 10.0, 500)?;
    Ok(Some(ScanSummary {
        gamma,
        mean_xi_det: stats.xi_det(&params)?,
        best: scan.best,
    }))
}

/// Scores a checkpoint on the held-out split of a dataset.
///
/// All three efficiencies are computed on the stored patch rebuilt as
/// `sqrt(I) exp(i(arg E_ref + Φ))`, so `gamma_oracle` is the phase-only
/// optimum and bounds `gamma_after` sample by sample.
pub fn evaluate(data_dir: &Path, checkpoint: &Path, detector: &DetectorParams) -> CliResult<EvaluationReport> {
    let dataset = Dataset::open(data_dir)?;
    let m = dataset.manifest().clone();
    let test = m.split.train_count..m.sample_count;
    if test.is_empty() {
        return Err(CliError::dataset(format!("{} has an empty test split", data_dir.display())));
    }
    let mut network = load_checkpoint(checkpoint)?.network;
    let spec = network.spec();
    if (spec.input_h, spec.input_w) != (m.grid_h, m.grid_w) {
        return Err(CliError::mismatch(format!(
            "checkpoint expects {}x{} inputs, dataset holds {}x{} samples",
            spec.input_h, spec.input_w, m.grid_h, m.grid_w
        )));
    }
    let campaign = Campaign::new(&m.channel_config, &m.campaign)?;
    let mut engine = campaign.engine()?;
    let reference = campaign.reference_patch(&mut engine)?;
    let aperture = Aperture::for_field(&reference, m.channel_config.receiver_radius)?;

    let samples = dataset.samples(test)?;
    let px = m.grid_h * m.grid_w;
    let mut inputs = Vec::with_capacity(samples.len() * px);
    for s in &samples {
        inputs.extend_from_slice(&s.intensity);
    }
    let x = Tensor::from_vec([samples.len(), 1, m.grid_h, m.grid_w], inputs)?;
    let predicted = network.predict(&x, PREDICT_BATCH)?;

    let mut rows = Vec::with_capacity(samples.len());
    for (k, s) in samples.iter().enumerate() {
        let rp = received_patch(s, &reference)?;
        let phi_hat: Vec<f64> = predicted.sample(k).iter().map(|&v| v as f64).collect();
        let phi: Vec<f64> = s.phase_correction.iter().map(|&v| v as f64).collect();
        let after = apply_correction(&reference, &phi_hat)?;
        let oracle = apply_correction(&reference, &phi)?;
        rows.push(EvaluationRow {
            sample: s.sample_index,
            gamma_before: aperture.gamma(reference.values(), rp.values())?,
            gamma_after: aperture.gamma(after.values(), rp.values())?,
            gamma_oracle: aperture.gamma(oracle.values(), rp.values())?,
        });
    }

    let mean_t = mean(samples.iter().map(|s| s.transmissivity_t));
    let mean_sqrt_t = mean(samples.iter().map(|s| s.transmissivity_t.sqrt()));
    let mean_before = mean(rows.iter().map(|r| r.gamma_before));
    let mean_after = mean(rows.iter().map(|r| r.gamma_after));
    let params = DetectorParams {
        eta_det: m.campaign.eta_det,
        ..*detector
    };
    let summary = EvaluationSummary {
        test_samples: rows.len(),
        mean_gamma_before: mean_before,
        mean_gamma_after: mean_after,
        mean_gamma_oracle: mean(rows.iter().map(|r| r.gamma_oracle)),
        mean_t,
        mean_sqrt_t,
        trusted_before: trusted_scan(mean_before, mean_t, mean_sqrt_t, &params)?,
        trusted_after: trusted_scan(mean_after, mean_t, mean_sqrt_t, &params)?,
    };
    Ok(EvaluationReport { rows, summary })
}

/// Writes `evaluation.csv`, `gamma_pdf.csv` and `summary.json` into `report_dir`.
pub fn cmd_evaluate(
    data_dir: &Path,
    checkpoint: &Path,
    report_dir: &Path,
    detector: &DetectorParams,
) -> CliResult<EvaluationReport> {
    let report = evaluate(data_dir, checkpoint, detector)?;
    write_text(&report_dir.join("evaluation.csv"), &rows_csv(&report.rows))?;
    write_text(&report_dir.join("gamma_pdf.csv"), &pdf_csv(&report.rows, PDF_BINS))?;
    let json = serde_json::to_string_pretty(&report.summary).expect("summary serialises");
    write_text(&report_dir.join("summary.json"), &(json + "\n"))?;
    let s = &report.summary;
    println!(
        "{} test samples: mean gamma before {:.4}, after {:.4}, oracle {:.4}",
        s.test_samples, s.mean_gamma_before, s.mean_gamma_after, s.mean_gamma_oracle
    );
    println!("wrote report to {}", report_dir.display());
    Ok(report)
}
