//! FFT phase-screen synthesis with subharmonic low-frequency compensation.
//!
//! The phase power spectrum is the generalized (exponent `alpha`) modified
//! von Kármán form
//!
//! ```text
//! Φ(κ) = 2π A(α) / 0.423 · r0^(-5/3) · (κ² + κ0²)^(-α/2) · exp(-κ²/κm²)
//! ```
//!
//! with `A(α) = Γ(α-1) cos(απ/2) / 4π²`, `κ0 = 2π/L0` and `κm = c(α)/l0`.
//! At α = 11/3 this reduces to `0.49 r0^(-5/3) κ^(-11/3)` in the inertial
//! range and `c(α) = 5.92`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::gamma;

use super::fft::{angular_frequency, Fft2};
use crate::atmosphere::{ChannelConfig, Layer};
use crate::error::{Error, Result};

const SUBHARMONIC_LEVELS: u32 = 3;
/// Gauss-Legendre order for the cell integrals behind the low-frequency weights.
const QUAD_ORDER: usize = 12;

/// Shape parameters of the turbulence spectrum used for screen synthesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenSpectrum {
    pub alpha: f64,
    /// Outer scale L0 in metres; `f64::INFINITY` removes the cutoff.
    pub outer_scale: f64,
    /// Inner scale l0 in metres; zero removes the roll-off.
    pub inner_scale: f64,
    /// Stretch of the correlation length along x relative to y.
    pub anisotropy: f64,
}

impl ScreenSpectrum {
    pub fn from_config(config: &ChannelConfig) -> Self {
        Self {
            alpha: config.spectral_exponent,
            outer_scale: config.outer_scale,
            inner_scale: config.inner_scale,
            anisotropy: config.anisotropy_ratio,
        }
    }

    /// Pure Kolmogorov: α = 11/3, no outer or inner scale.
    pub fn kolmogorov() -> Self {
        Self {
            alpha: 11.0 / 3.0,
            outer_scale: f64::INFINITY,
            inner_scale: 0.0,
            anisotropy: 1.0,
        }
    }

    fn amplitude_constant(&self) -> f64 {
        gamma(self.alpha - 1.0) * (self.alpha * PI / 2.0).cos() / (4.0 * PI * PI)
    }

    fn inner_cutoff(&self) -> f64 {
        if self.inner_scale > 0.0 {
            let a = self.alpha;
            let c = ((2.0 * PI / 3.0) * gamma((5.0 - a) / 2.0) * self.amplitude_constant())
                .powf(1.0 / (a - 5.0));
            c / self.inner_scale
        } else {
            f64::INFINITY
        }
    }

    fn outer_cutoff(&self) -> f64 {
        if self.outer_scale.is_finite() {
            2.0 * PI / self.outer_scale
        } else {
            0.0
        }
    }

    /// Phase PSD at angular frequency (kx, ky) for r0 = 1 m.
    pub fn unit_psd(&self, kx: f64, ky: f64) -> f64 {
        let zeta = self.anisotropy;
        let k2 = zeta * zeta * kx * kx + ky * ky;
        let k0 = self.outer_cutoff();
        let km = self.inner_cutoff();
        let base = k2 + k0 * k0;
        if base == 0.0 {
            return 0.0;
        }
        let rolloff = if km.is_finite() { (-k2 / (km * km)).exp() } else { 1.0 };
        2.0 * PI * self.amplitude_constant() / 0.423 * zeta * base.powf(-self.alpha / 2.0) * rolloff
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 3.0 && self.alpha < 4.0) {
            return Err(Error::config("spectral_exponent_alpha", "must lie in (3, 4)"));
        }
        if !(self.outer_scale > 0.0) {
            return Err(Error::config("outer_scale_L0", "must be > 0"));
        }
        if !(self.inner_scale >= 0.0 && self.inner_scale.is_finite()) {
            return Err(Error::config("inner_scale_l0", "must be >= 0"));
        }
        if !(self.anisotropy >= 1.0 && self.anisotropy.is_finite()) {
            return Err(Error::config("anisotropy_ratio", "must be >= 1"));
        }
        Ok(())
    }
}

/// One random phase realization, radians, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseScreen {
    pub grid_n: usize,
    pub dx: f64,
    pub phase: Vec<f64>,
    pub fried_r0: f64,
    pub seed: u64,
}

/// Reusable screen generator for a fixed grid and spectrum.
pub struct ScreenGenerator {
    n: usize,
    dx: f64,
    /// sqrt(unit PSD) * dk on the FFT lattice.
    lattice: Vec<f64>,
    /// sqrt(unit PSD) * dk_p for the 3x3 subharmonic patch of each level.
    patches: Vec<[f64; 9]>,
    /// exp(i a dk_p x_j) for a in {-1, 0, 1}, per level.
    phasors: Vec<[Vec<Complex64>; 3]>,
    /// Standard deviations of the x and y tilt left below the finest patch.
    residual_tilt: [f64; 2],
    coords: Vec<f64>,
    fft: Fft2,
    buffer: Vec<Complex64>,
}

impl ScreenGenerator {
    pub fn new(grid_n: usize, dx: f64, spectrum: ScreenSpectrum) -> Result<Self> {
        spectrum.validate()?;
        if grid_n < 32 || !grid_n.is_power_of_two() {
            return Err(Error::config("grid_n", "must be a power of two >= 32"));
        }
        if !(dx > 0.0) {
            return Err(Error::config("dx", "must be > 0"));
        }
        let n = grid_n;
        let dk = 2.0 * PI / (n as f64 * dx);
        let freqs: Vec<f64> = (0..n).map(|i| angular_frequency(i, n, dx)).collect();
        let mut lattice = vec![0.0; n * n];
        for (i, &ky) in freqs.iter().enumerate() {
            for (j, &kx) in freqs.iter().enumerate() {
                lattice[i * n + j] = spectrum.unit_psd(kx, ky).sqrt() * dk;
            }
        }
        lattice[0] = 0.0;

        let coords: Vec<f64> = (0..n).map(|i| (i as f64 - (n / 2) as f64) * dx).collect();
        let mut patches = Vec::new();
        let mut phasors = Vec::new();
        for level in 1..=SUBHARMONIC_LEVELS {
            let dkp = dk / 3f64.powi(level as i32);
            let mut patch = [0.0; 9];
            for (slot, value) in patch.iter_mut().enumerate() {
                let (b, a) = (slot as i32 / 3 - 1, slot as i32 % 3 - 1);
                if a != 0 || b != 0 {
                    *value = subharmonic_weight(&spectrum, a as f64 * dkp, b as f64 * dkp, dkp).sqrt();
                }
            }
            patches.push(patch);
            let make = |a: f64| -> Vec<Complex64> {
                coords
                    .iter()
                    .map(|&x| Complex64::from_polar(1.0, a * dkp * x))
                    .collect()
            };
            phasors.push([make(-1.0), make(0.0), make(1.0)]);
        }

        let finest = dk / 3f64.powi(SUBHARMONIC_LEVELS as i32);
        let residual_tilt = residual_tilt_variance(&spectrum, finest).map(f64::sqrt);

        Ok(Self {
            n,
            dx,
            lattice,
            patches,
            phasors,
            residual_tilt,
            coords,
            fft: Fft2::new(n),
            buffer: vec![Complex64::new(0.0, 0.0); n * n],
        })
    }

    pub fn grid_n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Deterministic screen for the given Fried parameter and seed.
    pub fn generate(&mut self, fried_r0: f64, seed: u64) -> Result<PhaseScreen> {
        if !(fried_r0 > 0.0) {
            return Err(Error::domain(
                "generate_phase_screen",
                format!("Fried parameter must be > 0 (got {fried_r0})"),
            ));
        }
        let n = self.n;
        let scale = fried_r0.powf(-5.0 / 6.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };

        for (slot, &amp) in self.buffer.iter_mut().zip(&self.lattice) {
            let (re, im) = (gauss(), gauss());
            *slot = Complex64::new(re, im) * (amp * scale);
        }
        self.fft.inverse_unnormalized(&mut self.buffer);
        let mut phase: Vec<f64> = self.buffer.iter().map(|v| v.re).collect();

        let mut low = vec![0.0; n * n];
        for (patch, phasor) in self.patches.iter().zip(&self.phasors) {
            let mut coeffs = [Complex64::new(0.0, 0.0); 9];
            for (c, &amp) in coeffs.iter_mut().zip(patch.iter()) {
                let (re, im) = (gauss(), gauss());
                *c = Complex64::new(re, im) * (amp * scale);
            }
            for i in 0..n {
                // t_a = sum_b c_ab exp(i b dk y_i)
                let mut t = [Complex64::new(0.0, 0.0); 3];
                for (a, ta) in t.iter_mut().enumerate() {
                    for b in 0..3 {
                        *ta += coeffs[b * 3 + a] * phasor[b][i];
                    }
                }
                let row = &mut low[i * n..(i + 1) * n];
                for (j, v) in row.iter_mut().enumerate() {
                    *v += (t[0] * phasor[0][j] + t[1] * phasor[1][j] + t[2] * phasor[2][j]).re;
                }
            }
        }
        let (gx, gy) = (
            gauss() * self.residual_tilt[0] * scale,
            gauss() * self.residual_tilt[1] * scale,
        );
        for (i, &y) in self.coords.iter().enumerate() {
            for (j, &x) in self.coords.iter().enumerate() {
                low[i * n + j] += gx * x + gy * y;
            }
        }
        let mean = low.iter().sum::<f64>() / (n * n) as f64;
        for (p, l) in phase.iter_mut().zip(&low) {
            *p += l - mean;
        }

        Ok(PhaseScreen {
            grid_n: n,
            dx: self.dx,
            phase,
            fried_r0,
            seed,
        })
    }
}

/// Variance given to the subharmonic centred on (kx, ky) with cell width dkp.
///
/// A midpoint sample of the steep spectrum misweights the cell, so the cell
/// is integrated with a |κ|² weight, which is what the structure function
/// sees at small κr, and referred back to the midpoint.
fn subharmonic_weight(spectrum: &ScreenSpectrum, kx: f64, ky: f64, dkp: f64) -> f64 {
    let (nodes, weights) = gauss_legendre(QUAD_ORDER);
    let half = dkp / 2.0;
    let mut acc = 0.0;
    for (&u, &wu) in nodes.iter().zip(&weights) {
        for (&v, &wv) in nodes.iter().zip(&weights) {
            let (qx, qy) = (kx + half * u, ky + half * v);
            acc += wu * wv * spectrum.unit_psd(qx, qy) * (qx * qx + qy * qy);
        }
    }
    acc * half * half / (kx * kx + ky * ky)
}

/// Variance of the x and y phase gradients carried by the square
/// |κx|, |κy| < side/2 that no lattice point or subharmonic samples.
///
/// Polar coordinates with κ = R(θ) u³ keep the integrand smooth at the
/// origin for any exponent in (3, 4).
fn residual_tilt_variance(spectrum: &ScreenSpectrum, side: f64) -> [f64; 2] {
    let (nodes, weights) = gauss_legendre(QUAD_ORDER);
    let mut out = [0.0; 2];
    let sectors = 8;
    let width = 2.0 * PI / sectors as f64;
    for sector in 0..sectors {
        for (&t, &wt) in nodes.iter().zip(&weights) {
            let theta = width * (sector as f64 + 0.5 + 0.5 * t);
            let (s, c) = theta.sin_cos();
            let reach = 0.5 * side / c.abs().max(s.abs());
            let mut radial = 0.0;
            for (&u, &wu) in nodes.iter().zip(&weights) {
                let u = 0.5 * (u + 1.0);
                let k = reach * u.powi(3);
                // κ² dκ with dκ = 3R u² du, times the area element κ
                radial += 0.5 * wu * spectrum.unit_psd(k * c, k * s) * k.powi(3) * 3.0 * reach * u * u;
            }
            let w = 0.5 * width * wt * radial;
            out[0] += w * c * c;
            out[1] += w * s * s;
        }
    }
    out
}

fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(order);
    let mut weights = Vec::with_capacity(order);
    for i in 0..order {
        // Newton iteration on P_n from the Chebyshev guess.
        let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// One-off screen for a stratification layer.
pub fn generate_phase_screen(
    layer: &Layer,
    grid_n: usize,
    dx: f64,
    config: &ChannelConfig,
    seed: u64,
) -> Result<PhaseScreen> {
    ScreenGenerator::new(grid_n, dx, ScreenSpectrum::from_config(config))?.generate(layer.fried_r0, seed)
}
