use std::f64::consts::PI;

use num_complex::Complex64;

use super::fft::{angular_frequency, Fft2};
use super::field::ComplexField;
use crate::error::{Error, Result};

/// Order of the super-Gaussian edge absorber.
const ABSORBER_ORDER: i32 = 16;
/// The absorber reaches 1/e at this fraction of the half-width, so it
/// occupies roughly the outer tenth of the grid.
const ABSORBER_KNEE: f64 = 0.9;

/// Angular-spectrum propagator bound to one grid geometry.
pub struct Propagator {
    n: usize,
    dx: f64,
    wavelength: f64,
    /// kz - k on the FFT lattice; the carrier phase exp(ikz) is dropped.
    kz_offset: Vec<f64>,
    /// Evanescent decay rate, zero for propagating bins.
    decay: Vec<f64>,
    absorber: Vec<f64>,
    fft: Fft2,
}

impl Propagator {
    pub fn new(grid_n: usize, dx: f64, wavelength: f64) -> Result<Self> {
        ComplexField::zeros(grid_n, dx, wavelength)?;
        let n = grid_n;
        let k = 2.0 * PI / wavelength;
        let freqs: Vec<f64> = (0..n).map(|i| angular_frequency(i, n, dx)).collect();
        let mut kz_offset = vec![0.0; n * n];
        let mut decay = vec![0.0; n * n];
        for (i, &ky) in freqs.iter().enumerate() {
            for (j, &kx) in freqs.iter().enumerate() {
                let kt2 = kx * kx + ky * ky;
                let idx = i * n + j;
                if kt2 < k * k {
                    // sqrt(k² - kt²) - k without cancellation
                    kz_offset[idx] = -kt2 / (k + (k * k - kt2).sqrt());
                } else {
                    kz_offset[idx] = -k;
                    decay[idx] = (kt2 - k * k).sqrt();
                }
            }
        }
        let half = n as f64 * dx / 2.0;
        let profile: Vec<f64> = (0..n)
            .map(|i| {
                let x = (i as f64 - (n / 2) as f64) * dx;
                (-(x.abs() / (ABSORBER_KNEE * half)).powi(ABSORBER_ORDER)).exp()
            })
            .collect();
        let mut absorber = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                absorber[i * n + j] = profile[i] * profile[j];
            }
        }
        Ok(Self {
            n,
            dx,
            wavelength,
            kz_offset,
            decay,
            absorber,
            fft: Fft2::new(n),
        })
    }

    pub fn for_field(field: &ComplexField) -> Result<Self> {
        Self::new(field.grid_n(), field.dx(), field.wavelength())
    }

    /// Longest single step whose transfer-function chirp is adequately
    /// sampled, `n dx² / λ`.
    pub fn max_step(&self) -> f64 {
        self.n as f64 * self.dx * self.dx / self.wavelength
    }

    fn check(&self, field: &ComplexField) -> Result<()> {
        if field.grid_n() != self.n || field.dx() != self.dx || field.wavelength() != self.wavelength {
            return Err(Error::Shape {
                expected: format!("{n}x{n} at dx={} λ={}", self.dx, self.wavelength, n = self.n),
                actual: format!(
                    "{n}x{n} at dx={} λ={}",
                    field.dx(),
                    field.wavelength(),
                    n = field.grid_n()
                ),
            });
        }
        Ok(())
    }

    /// Propagates `field` by `dz` in place.
    pub fn propagate(&mut self, field: &mut ComplexField, dz: f64) -> Result<()> {
        self.check(field)?;
        if !(dz >= 0.0 && dz.is_finite()) {
            return Err(Error::Propagation {
                segment: 0,
                reason: format!("distance must be finite and >= 0 (got {dz})"),
            });
        }
        let limit = self.max_step();
        if dz > limit {
            return Err(Error::Propagation {
                segment: 0,
                reason: format!(
                    "step {dz:.6e} m exceeds the sampling limit {limit:.6e} m; split it into at least {} steps",
                    (dz / limit).ceil()
                ),
            });
        }
        if dz == 0.0 {
            return Ok(());
        }
        let data = field.values_mut();
        self.fft.forward(data);
        for ((v, &offset), &decay) in data.iter_mut().zip(&self.kz_offset).zip(&self.decay) {
            let h = if decay == 0.0 {
                Complex64::from_polar(1.0, offset * dz)
            } else {
                Complex64::from_polar((-decay * dz).exp(), offset * dz)
            };
            *v *= h;
        }
        self.fft.inverse(data);
        Ok(())
    }

    /// Propagates over `dz` in the fewest equal sub-steps the sampling limit
    /// allows, applying the edge absorber after the last one when asked.
    /// Returns the number of sub-steps used.
    pub fn propagate_segment(
        &mut self,
        field: &mut ComplexField,
        dz: f64,
        absorb: bool,
        max_substeps: usize,
    ) -> Result<usize> {
        let steps = self.substeps(dz);
        if steps > max_substeps {
            return Err(Error::Propagation {
                segment: 0,
                reason: format!("{dz:.6e} m needs {steps} sub-steps (limit {max_substeps})"),
            });
        }
        for _ in 0..steps {
            self.propagate(field, dz / steps as f64)?;
        }
        if absorb {
            self.absorb(field);
        }
        Ok(steps)
    }

    pub fn substeps(&self, dz: f64) -> usize {
        if dz <= 0.0 {
            0
        } else {
            ((dz / self.max_step()).ceil() as usize).max(1)
        }
    }

    pub fn absorb(&self, field: &mut ComplexField) {
        for (v, &a) in field.values_mut().iter_mut().zip(&self.absorber) {
            *v *= a;
        }
    }

    pub fn absorber(&self) -> &[f64] {
        &self.absorber
    }
}

/// Angular-spectrum vacuum propagation of a single valid step.
pub fn propagate_vacuum(field: &ComplexField, dz: f64) -> Result<ComplexField> {
    let mut out = field.clone();
    Propagator::for_field(field)?.propagate(&mut out, dz)?;
    Ok(out)
}
