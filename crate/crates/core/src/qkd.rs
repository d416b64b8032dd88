//! Coherent efficiency, detector noise and the asymptotic GG02 key rate
//! with homodyne detection and reverse reconciliation.
//!
//! All variances are in shot-noise units (vacuum variance = 1).

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::ComplexField;

/// Tolerance below 1 within which a symplectic eigenvalue is treated as 1.
pub const NU_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorParams {
    pub eta_det: f64,
    pub xi_el: f64,
    pub beta_reconciliation: f64,
    pub xi_ch: f64,
    pub trusted: bool,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            eta_det: 0.95,
            xi_el: 0.010,
            beta_reconciliation: 0.95,
            xi_ch: 0.0172,
            trusted: true,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_det > 0.0 && self.eta_det <= 1.0) {
            return Err(Error::config("eta_det", "must lie in (0, 1]"));
        }
        if !(self.xi_el >= 0.0 && self.xi_el.is_finite()) {
            return Err(Error::config("xi_el", "must be >= 0"));
        }
        if !(self.beta_reconciliation > 0.0 && self.beta_reconciliation <= 1.0) {
            return Err(Error::config("beta_reconciliation", "must lie in (0, 1]"));
        }
        if !(self.xi_ch >= 0.0 && self.xi_ch.is_finite()) {
            return Err(Error::config("xi_ch", "must be >= 0"));
        }
        Ok(())
    }

    pub fn with_trust(self, trusted: bool) -> Self {
        Self { trusted, ..self }
    }
}

/// Ensemble statistics of a fading channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    /// ⟨T⟩, detector efficiency included.
    pub mean_t: f64,
    /// ⟨√T⟩.
    pub mean_sqrt_t: f64,
    /// ⟨ξ_det⟩ in SNU; derived from `gamma` when absent.
    pub mean_xi_det: Option<f64>,
    pub gamma: f64,
}

impl ChannelStats {
    /// A channel whose transmissivity does not fluctuate, ⟨√T⟩² = ⟨T⟩.
    pub fn non_fluctuating(mean_t: f64, gamma: f64, mean_xi_det: Option<f64>) -> Self {
        Self {
            mean_t,
            mean_sqrt_t: mean_t.sqrt(),
            mean_xi_det,
            gamma,
        }
    }

    pub fn xi_det(&self, params: &DetectorParams) -> Result<f64> {
        match self.mean_xi_det {
            Some(x) if x >= 0.0 && x.is_finite() => Ok(x),
            Some(x) => Err(Error::InvalidStats(format!("mean detector noise must be >= 0 (got {x})"))),
            None => detector_noise(self.gamma, params),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.mean_t > 0.0 && self.mean_t <= 1.0) {
            return Err(Error::InvalidStats(format!("<T> must lie in (0, 1] (got {})", self.mean_t)));
        }
        if !(self.mean_sqrt_t >= 0.0) {
            return Err(Error::InvalidStats(format!("<sqrt T> must be >= 0 (got {})", self.mean_sqrt_t)));
        }
        let sq = self.mean_sqrt_t * self.mean_sqrt_t;
        if sq > self.mean_t * (1.0 + 1e-12) {
            return Err(Error::InvalidStats(format!(
                "<sqrt T>² = {sq} exceeds <T> = {}",
                self.mean_t
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidStats(format!("gamma must lie in [0, 1] (got {})", self.gamma)));
        }
        Ok(())
    }
}

/// Two-mode covariance in the (a, b, c) parameterisation
/// `[[a·1, c·Z], [c·Z, b·1]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceABC {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub v_mod: f64,
    pub t_f: f64,
    pub t_f_xi_f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateResult {
    pub i_ab: f64,
    pub nu: [f64; 3],
    pub chi_be: f64,
    /// β I_AB - χ_BE as computed; negative when no key can be distilled.
    pub r_sec: f64,
    pub r_sec_clamped: f64,
    pub covariance: CovarianceABC,
}

/// Centred disk mask on a square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Aperture {
    grid_n: usize,
    mask: Vec<bool>,
}

impl Aperture {
    pub fn disk(grid_n: usize, dx: f64, radius: f64) -> Result<Self> {
        let half = grid_n as f64 * dx / 2.0;
        if !(radius >= 0.0) || radius > half {
            return Err(Error::config(
                "aperture_radius",
                format!("{radius} m does not fit inside a grid of half-width {half} m"),
            ));
        }
        let coord = |i: usize| (i as f64 - (grid_n / 2) as f64) * dx;
        let r2 = radius * radius;
        let mut mask = Vec::with_capacity(grid_n * grid_n);
        for i in 0..grid_n {
            for j in 0..grid_n {
                let (x, y) = (coord(j), coord(i));
                mask.push(x * x + y * y < r2);
            }
        }
        Ok(Self { grid_n, mask })
    }

    pub fn for_field(field: &ComplexField, radius: f64) -> Result<Self> {
        Self::disk(field.grid_n(), field.dx(), radius)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn pixel_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Coherent efficiency of two sampled fields over this aperture.
    pub fn gamma(&self, rlo: &[num_complex::Complex64], rp: &[num_complex::Complex64]) -> Result<f64> {
        let len = self.mask.len();
        if rlo.len() != len || rp.len() != len {
            return Err(Error::Shape {
                expected: format!("{len} samples"),
                actual: format!("{} and {}", rlo.len(), rp.len()),
            });
        }
        let (mut overlap, mut p_lo, mut p_rp) = (0.0, 0.0, 0.0);
        for ((&m, a), b) in self.mask.iter().zip(rlo).zip(rp) {
            if m {
                overlap += (a.conj() * b).re;
                p_lo += a.norm_sqr();
                p_rp += b.norm_sqr();
            }
        }
        if p_lo <= 0.0 || p_rp <= 0.0 {
            return Err(Error::UndefinedGamma(format!(
                "aperture power is zero (RLO {p_lo:e}, RP {p_rp:e})"
            )));
        }
        Ok((overlap * overlap / (p_lo * p_rp)).min(1.0))
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }
}

/// Squared symmetrised overlap of the RLO and RP fields over the centred
/// receiver disk, normalised by both aperture powers.
pub fn coherent_efficiency(rlo: &ComplexField, rp: &ComplexField, aperture_radius: f64) -> Result<f64> {
    rlo.same_grid(rp)?;
    Aperture::for_field(rlo, aperture_radius)?.gamma(rlo.values(), rp.values())
}

/// `E_RLO · exp(i Φ̂)` pixelwise.
pub fn apply_correction(rlo: &ComplexField, correction: &[f64]) -> Result<ComplexField> {
    let mut out = rlo.clone();
    out.apply_phase(correction)?;
    Ok(out)
}

/// Detector noise of a mode-mismatched homodyne receiver, SNU.
pub fn detector_noise(gamma: f64, params: &DetectorParams) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::domain(
            "detector_noise",
            format!("coherent efficiency must lie in (0, 1] (got {gamma})"),
        ));
    }
    Ok(((1.0 - gamma) + params.xi_el) * params.eta_det / gamma)
}

/// Received power inside the disk over transmitted power, times η_det.
pub fn transmissivity(
    received: &ComplexField,
    transmitted_power: f64,
    aperture_radius: f64,
    eta_det: f64,
) -> Result<f64> {
    if !(transmitted_power > 0.0) {
        return Err(Error::domain("transmissivity", "transmitted power must be > 0"));
    }
    if !(aperture_radius >= 0.0) {
        return Err(Error::domain("transmissivity", "aperture radius must be >= 0"));
    }
    Ok(received.power_within(aperture_radius) / transmitted_power * eta_det)
}

/// Effective transmissivity and combined excess noise `(T_f, T_f ξ_f)`.
pub fn effective_noise(stats: &ChannelStats, params: &DetectorParams, v_mod: f64) -> Result<(f64, f64)> {
    stats.validate()?;
    let xi_det = stats.xi_det(params)?;
    let fluctuation = (stats.mean_t - stats.mean_sqrt_t * stats.mean_sqrt_t).max(0.0);
    let t_f_xi_f = params.xi_ch * stats.mean_t + xi_det + fluctuation * v_mod;
    Ok((stats.mean_t, t_f_xi_f))
}

pub fn mutual_information(t_f: f64, v_mod: f64, t_f_xi_f: f64) -> Result<f64> {
    if !(v_mod > 0.0) {
        return Err(Error::domain("mutual_information", format!("V_mod must be > 0 (got {v_mod})")));
    }
    if !(t_f > 0.0 && t_f <= 1.0) {
        return Err(Error::domain("mutual_information", format!("T_f must lie in (0, 1] (got {t_f})")));
    }
    if !(t_f_xi_f >= 0.0) {
        return Err(Error::domain("mutual_information", "excess noise must be >= 0"));
    }
    Ok(0.5 * (1.0 + t_f * v_mod / (1.0 + t_f_xi_f)).log2())
}

pub fn covariance(v_mod: f64, t_f: f64, t_f_xi_f: f64, params: &DetectorParams) -> Result<CovarianceABC> {
    if !(v_mod > 0.0) {
        return Err(Error::domain("covariance", format!("V_mod must be > 0 (got {v_mod})")));
    }
    if !(t_f > 0.0 && t_f <= 1.0) {
        return Err(Error::domain("covariance", format!("T_f must lie in (0, 1] (got {t_f})")));
    }
    let a = v_mod + 1.0;
    let c = (t_f * (v_mod * v_mod + 2.0 * v_mod)).sqrt();
    let noise = if params.trusted { params.xi_ch } else { t_f_xi_f };
    let b = t_f * v_mod + 1.0 + noise;
    // Bona fide condition: the smaller symplectic eigenvalue is at least 1.
    let nu_min = 0.5 * (((a + b) * (a + b) - 4.0 * c * c).max(0.0).sqrt() - (b - a).abs());
    if nu_min < 1.0 - NU_TOLERANCE {
        return Err(Error::Unphysical(format!(
            "symplectic eigenvalue {nu_min} < 1 for (a, b, c) = ({a}, {b}, {c})"
        )));
    }
    Ok(CovarianceABC {
        a,
        b,
        c,
        v_mod,
        t_f,
        t_f_xi_f,
    })
}

/// `(ν1, ν2)` of the two-mode state and `ν3` of Alice's mode conditioned
/// on Bob's homodyne outcome.
pub fn symplectic_eigenvalues(cov: &CovarianceABC) -> Result<[f64; 3]> {
    let CovarianceABC { a, b, c, .. } = *cov;
    if !(b > 0.0) {
        return Err(Error::Unphysical(format!("b must be > 0 (got {b})")));
    }
    let disc = (a + b) * (a + b) - 4.0 * c * c;
    if disc < 0.0 {
        return Err(Error::Unphysical(format!("(a+b)² - 4c² = {disc} < 0")));
    }
    let conditional = a - c * c / b;
    if conditional < 0.0 {
        return Err(Error::Unphysical(format!("a - c²/b = {conditional} < 0")));
    }
    let z = disc.sqrt();
    let raw = [0.5 * (z + (b - a)), 0.5 * (z - (b - a)), (a * conditional).sqrt()];
    let mut nu = [0.0; 3];
    for (out, &v) in nu.iter_mut().zip(&raw) {
        if v < 1.0 - NU_TOLERANCE {
            return Err(Error::Unphysical(format!("symplectic eigenvalue {v} < 1 in {raw:?}")));
        }
        *out = v.max(1.0);
    }
    Ok(nu)
}

/// Von Neumann entropy of a thermal mode with symplectic eigenvalue `x`.
pub fn g_function(x: f64) -> Result<f64> {
    if !(x >= 1.0 - NU_TOLERANCE) {
        return Err(Error::domain("g_function", format!("argument must be >= 1 (got {x})")));
    }
    if x <= 1.0 {
        return Ok(0.0);
    }
    let plus = (x + 1.0) / 2.0;
    let minus = (x - 1.0) / 2.0;
    Ok(plus * plus.log2() - minus * minus.log2())
}

/// χ_BE = g(ν1) + g(ν2) - g(ν3).
pub fn holevo(nu: [f64; 3]) -> Result<f64> {
    let chi = g_function(nu[0])? + g_function(nu[1])? - g_function(nu[2])?;
    if chi < -NU_TOLERANCE {
        return Err(Error::Unphysical(format!("negative Holevo information {chi}")));
    }
    Ok(chi.max(0.0))
}

pub fn secure_key_rate(stats: &ChannelStats, params: &DetectorParams, v_mod: f64) -> Result<KeyRateResult> {
    params.validate()?;
    if !(v_mod > 0.0) {
        return Err(Error::domain("secure_key_rate", format!("V_mod must be > 0 (got {v_mod})")));
    }
    let (t_f, t_f_xi_f) = effective_noise(stats, params, v_mod)?;
    let i_ab = mutual_information(t_f, v_mod, t_f_xi_f)?;
    let cov = covariance(v_mod, t_f, t_f_xi_f, params)?;
    let nu = symplectic_eigenvalues(&cov)?;
    let chi_be = holevo(nu)?;
    let r_sec = params.beta_reconciliation * i_ab - chi_be;
    Ok(KeyRateResult {
        i_ab,
        nu,
        chi_be,
        r_sec,
        r_sec_clamped: r_sec.max(0.0),
        covariance: cov,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub v_mod: f64,
    pub i_ab: f64,
    pub chi_be: f64,
    pub r_sec: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VmodScan {
    pub points: Vec<ScanPoint>,
    pub best: ScanPoint,
}

impl VmodScan {
    /// `v_mod,i_ab,chi_be,r_sec` with nine significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("v_mod,i_ab,chi_be,r_sec\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                sig9(p.v_mod),
                sig9(p.i_ab),
                sig9(p.chi_be),
                sig9(p.r_sec)
            );
        }
        out
    }
}

/// Nine significant digits in scientific notation.
pub fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Samples R_sec at `steps` uniformly spaced V_mod values covering
/// `(v_min, v_max]` and reports the maximising point.
pub fn scan_vmod(
    stats: &ChannelStats,
    params: &DetectorParams,
    v_min: f64,
    v_max: f64,
    steps: usize,
) -> Result<VmodScan> {
    if steps == 0 || !(v_max > v_min) || !(v_min >= 0.0) {
        return Err(Error::domain(
            "scan_vmod",
            format!("empty V_mod range ({v_min}, {v_max}] with {steps} steps"),
        ));
    }
    let width = v_max - v_min;
    let points = (1..=steps)
        .into_par_iter()
        .map(|i| {
            let v_mod = v_min + width * i as f64 / steps as f64;
            secure_key_rate(stats, params, v_mod).map(|r| ScanPoint {
                v_mod,
                i_ab: r.i_ab,
                chi_be: r.chi_be,
                r_sec: r.r_sec,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = *points
        .iter()
        .reduce(|best, p| if p.r_sec > best.r_sec { p } else { best })
        .expect("non-empty scan");
    Ok(VmodScan { points, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn detector_noise_examples() {
        let p = DetectorParams::default();
        assert!((detector_noise(1.0, &p).unwrap() - 0.0095).abs() < 1e-15);
        let q = DetectorParams {
            xi_el: 0.0,
            eta_det: 1.0,
            ..p
        };
        assert_eq!(detector_noise(0.5, &q).unwrap(), 1.0);
        assert!(detector_noise(0.0, &p).is_err());
        assert!(detector_noise(-0.2, &p).is_err());
    }

    #[test]
    fn detector_noise_decreases_with_gamma() {
        let p = DetectorParams::default();
        let mut last = f64::INFINITY;
        for i in 1..=100 {
            let x = detector_noise(i as f64 / 100.0, &p).unwrap();
            assert!(x < last);
            last = x;
        }
    }

    #[test]
    fn non_fluctuating_drops_fading_term() {
        let p = DetectorParams::default();
        let s = ChannelStats::non_fluctuating(0.71, 0.53, Some(1.05));
        let (t, tx) = effective_noise(&s, &p, 10.0).unwrap();
        assert_eq!(t, 0.71);
        assert!((tx - (0.0172 * 0.71 + 1.05)).abs() < 1e-12);
    }

    #[test]
    fn fading_term_adds_variance_times_vmod() {
        let p = DetectorParams::default();
        let flat = ChannelStats::non_fluctuating(0.71, 0.53, Some(1.05));
        let fading = ChannelStats {
            mean_sqrt_t: 0.70f64.sqrt(),
            ..flat
        };
        let (_, a) = effective_noise(&flat, &p, 10.0).unwrap();
        let (_, b) = effective_noise(&fading, &p, 10.0).unwrap();
        assert!((b - a - 0.1).abs() < 1e-12);
    }

    #[test]
    fn invalid_stats_rejected() {
        let p = DetectorParams::default();
        let s = ChannelStats {
            mean_t: 0.5,
            mean_sqrt_t: 0.8,
            mean_xi_det: Some(1.0),
            gamma: 0.5,
        };
        assert!(matches!(effective_noise(&s, &p, 1.0), Err(Error::InvalidStats(_))));
    }

    #[test]
    fn mutual_information_limits() {
        assert_eq!(mutual_information(1.0, 3.0, 0.0).unwrap(), 1.0);
        assert!(mutual_information(0.5, 1e-12, 0.1).unwrap() < 1e-11);
        assert!(mutual_information(0.5, 0.0, 0.1).is_err());
    }

    #[test]
    fn pure_two_mode_squeezed_state() {
        let p = DetectorParams {
            xi_ch: 0.0,
            ..DetectorParams::default()
        };
        let cov = covariance(2.0, 1.0, 0.0, &p).unwrap();
        assert_eq!((cov.a, cov.b), (3.0, 3.0));
        assert!((cov.c - 8f64.sqrt()).abs() < 1e-15);
        let nu = symplectic_eigenvalues(&cov).unwrap();
        for v in nu {
            assert!((v - 1.0).abs() < 1e-9);
        }
        assert!(holevo(nu).unwrap().abs() < 1e-9);
    }

    #[test]
    fn decoupled_modes() {
        let cov = CovarianceABC {
            a: 5.0,
            b: 2.0,
            c: 0.0,
            v_mod: 4.0,
            t_f: 1.0,
            t_f_xi_f: 0.0,
        };
        let nu = symplectic_eigenvalues(&cov).unwrap();
        assert_eq!(nu, [2.0, 5.0, 5.0]);
    }

    #[test]
    fn unphysical_state_rejected() {
        let cov = CovarianceABC {
            a: 1.0,
            b: 1.0,
            c: 2.0,
            v_mod: 0.0,
            t_f: 1.0,
            t_f_xi_f: 0.0,
        };
        assert!(matches!(symplectic_eigenvalues(&cov), Err(Error::Unphysical(_))));
    }

    #[test]
    fn weak_modulation_is_physical() {
        let pure = DetectorParams {
            xi_ch: 0.0,
            ..DetectorParams::default()
        };
        for v in [1e-3, 0.02, 0.1, 0.5] {
            let cov = covariance(v, 1.0, 0.0, &pure).unwrap();
            let nu = symplectic_eigenvalues(&cov).unwrap();
            assert!(nu.iter().all(|&n| (n - 1.0).abs() < 1e-6), "{v}: {nu:?}");
            covariance(v, 0.71, 1.06221, &DetectorParams::default()).unwrap();
        }
    }

    #[test]
    fn g_function_anchors() {
        assert_eq!(g_function(1.0).unwrap(), 0.0);
        assert_eq!(g_function(3.0).unwrap(), 2.0);
        assert_eq!(g_function(1.0 - 1e-10).unwrap(), 0.0);
        assert!(g_function(0.99).is_err());
    }

    #[test]
    fn holevo_cancellation() {
        assert_eq!(holevo([1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!(holevo([1.0, 2.7, 2.7]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn lossless_noiseless_channel() {
        let p = DetectorParams {
            xi_ch: 0.0,
            xi_el: 0.0,
            ..DetectorParams::default()
        };
        let s = ChannelStats::non_fluctuating(1.0, 1.0, Some(0.0));
        for v in [0.5, 2.0, 10.0] {
            let r = secure_key_rate(&s, &p, v).unwrap();
            assert!(r.chi_be.abs() < 1e-9);
            assert!((r.r_sec - 0.95 * 0.5 * (1.0 + v).log2()).abs() < 1e-9);
        }
    }

    #[test]
    fn trust_never_hurts() {
        let p = DetectorParams::default();
        for g in [0.3, 0.5, 0.7, 0.9] {
            let s = ChannelStats::non_fluctuating(0.71, g, None);
            for v in [0.5, 2.0, 5.0, 10.0] {
                let t = secure_key_rate(&s, &p.with_trust(true), v).unwrap();
                let u = secure_key_rate(&s, &p.with_trust(false), v).unwrap();
                assert!(t.chi_be <= u.chi_be + 1e-12);
                assert!(t.r_sec >= u.r_sec - 1e-12);
            }
        }
    }

    #[test]
    fn gamma_of_identical_and_quadrature_fields() {
        let vals: Vec<Complex64> = (0..32 * 32)
            .map(|i| Complex64::from_polar(1.0 + (i % 7) as f64, (i % 5) as f64))
            .collect();
        let f = ComplexField::new(32, 0.05, 1e-6, vals.clone()).unwrap();
        assert!((coherent_efficiency(&f, &f, 0.6).unwrap() - 1.0).abs() < 1e-12);
        for theta in [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2] {
            let g = ComplexField::new(32, 0.05, 1e-6, vals.iter().map(|v| v * Complex64::from_polar(1.0, theta)).collect())
                .unwrap();
            let gamma = coherent_efficiency(&f, &g, 0.6).unwrap();
            assert!((gamma - theta.cos().powi(2)).abs() < 1e-12, "{theta}: {gamma}");
        }
        let flipped = ComplexField::new(32, 0.05, 1e-6, vals.iter().map(|v| -v).collect()).unwrap();
        let g1 = coherent_efficiency(&f, &flipped, 0.6).unwrap();
        let g2 = coherent_efficiency(&flipped, &flipped, 0.6).unwrap();
        assert!((g1 - 1.0).abs() < 1e-12 && (g2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_undefined_without_power() {
        let z = ComplexField::zeros(32, 0.05, 1e-6).unwrap();
        assert!(matches!(coherent_efficiency(&z, &z, 0.5), Err(Error::UndefinedGamma(_))));
        assert!(coherent_efficiency(&z, &z, 5.0).is_err());
    }

    #[test]
    fn transmissivity_bounds() {
        let vals = vec![Complex64::new(1.0, 0.0); 32 * 32];
        let f = ComplexField::new(32, 0.1, 1e-6, vals).unwrap();
        let p = f.total_power();
        assert!((transmissivity(&f, p, 10.0, 0.95).unwrap() - 0.95).abs() < 1e-12);
        assert_eq!(transmissivity(&f, p, 0.0, 0.95).unwrap(), 0.0);
    }

    #[test]
    fn scan_rejects_empty_range() {
        let s = ChannelStats::non_fluctuating(0.71, 0.53, Some(1.05));
        assert!(scan_vmod(&s, &DetectorParams::default(), 5.0, 5.0, 10).is_err());
        assert!(scan_vmod(&s, &DetectorParams::default(), 0.0, 10.0, 0).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let s = ChannelStats::non_fluctuating(0.71, 0.53, Some(1.05));
        let scan = scan_vmod(&s, &DetectorParams::default(), 0.0, 10.0, 4).unwrap();
        let csv = scan.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "v_mod,i_ab,chi_be,r_sec");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[4].split(',').next().unwrap(), "1.00000000e1");
    }
}
