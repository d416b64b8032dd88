use std::path::Path;

use skyphase_core::qkd::{scan_vmod, ChannelStats, DetectorParams, VmodScan};

use crate::commands::write_text;
use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyrateArgs {
    pub gamma: f64,
    pub mean_t: f64,
    /// Defaults to √⟨T⟩, a non-fluctuating channel.
    pub mean_sqrt_t: Option<f64>,
    pub mean_xi_det: Option<f64>,
    pub trusted: bool,
    pub vmod_min: f64,
    pub vmod_max: f64,
    pub steps: usize,
}

pub fn run_keyrate(args: &KeyrateArgs, detector: &DetectorParams) -> CliResult<VmodScan> {
    let stats = ChannelStats {
        mean_t: args.mean_t,
        mean_sqrt_t: args.mean_sqrt_t.unwrap_or(args.mean_t.sqrt()),
        mean_xi_det: args.mean_xi_det,
        gamma: args.gamma,
    };
    Ok(scan_vmod(
        &stats,
        &detector.with_trust(args.trusted),
        args.vmod_min,
        args.vmod_max,
        args.steps,
    )?)
}

/// Runs the scan, writes its CSV when `out` is given and prints the maximum.
pub fn cmd_keyrate(args: &KeyrateArgs, detector: &DetectorParams, out: Option<&Path>) -> CliResult<VmodScan> {
    let scan = run_keyrate(args, detector)?;
    if let Some(path) = out {
        write_text(path, &scan.to_csv())?;
    }
    let b = scan.best;
    println!(
        "max r_sec {:.6} bits/pulse at V_mod {:.4} (I_AB {:.6}, chi_BE {:.6}, {} detector)",
        b.r_sec,
        b.v_mod,
        b.i_ab,
        b.chi_be,
        if args.trusted { "trusted" } else { "untrusted" }
    );
    Ok(scan)
}
