use num_complex::Complex64;

use crate::atmosphere::ChannelConfig;
use crate::error::{Error, Result};

/// Complex optical field sampled on a square grid, row-major.
///
/// Pixel `(i, j)` sits at `x = (j - n/2) dx`, `y = (i - n/2) dx`, so the
/// optical axis passes through pixel `(n/2, n/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid_n: usize,
    dx: f64,
    wavelength: f64,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid_n: usize, dx: f64, wavelength: f64, values: Vec<Complex64>) -> Result<Self> {
        if grid_n < 32 || !grid_n.is_power_of_two() {
            return Err(Error::config(
                "grid_n",
                format!("must be a power of two >= 32 (got {grid_n})"),
            ));
        }
        check_common(grid_n, dx, wavelength, values.len())?;
        Ok(Self {
            grid_n,
            dx,
            wavelength,
            values,
        })
    }

    /// Builds a field without the power-of-two rule, for cropped or
    /// resampled apertures that are never fed to an FFT.
    pub fn patch(grid_n: usize, dx: f64, wavelength: f64, values: Vec<Complex64>) -> Result<Self> {
        if grid_n == 0 {
            return Err(Error::config("grid_n", "must be > 0"));
        }
        check_common(grid_n, dx, wavelength, values.len())?;
        Ok(Self {
            grid_n,
            dx,
            wavelength,
            values,
        })
    }

    pub fn zeros(grid_n: usize, dx: f64, wavelength: f64) -> Result<Self> {
        Self::new(grid_n, dx, wavelength, vec![Complex64::new(0.0, 0.0); grid_n * grid_n])
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.values[row * self.grid_n + col]
    }

    /// Physical coordinate of sample index `i` along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - (self.grid_n / 2) as f64) * self.dx
    }

    pub fn side_length(&self) -> f64 {
        self.grid_n as f64 * self.dx
    }

    /// Σ|E|² dx².
    pub fn total_power(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dx * self.dx
    }

    /// Power inside the centred disk of the given radius.
    pub fn power_within(&self, radius: f64) -> f64 {
        let r2 = radius * radius;
        let n = self.grid_n;
        let mut p = 0.0;
        for i in 0..n {
            let y = self.coord(i);
            for j in 0..n {
                let x = self.coord(j);
                if x * x + y * y < r2 {
                    p += self.values[i * n + j].norm_sqr();
                }
            }
        }
        p * self.dx * self.dx
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn phase(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.arg()).collect()
    }

    pub fn same_grid(&self, other: &ComplexField) -> Result<()> {
        if self.grid_n != other.grid_n || self.dx != other.dx {
            return Err(Error::Shape {
                expected: format!("{n}x{n} at dx={}", self.dx, n = self.grid_n),
                actual: format!("{n}x{n} at dx={}", other.dx, n = other.grid_n),
            });
        }
        Ok(())
    }

    /// Multiplies every sample by `exp(i phase)`.
    pub fn apply_phase(&mut self, phase: &[f64]) -> Result<()> {
        if phase.len() != self.values.len() {
            return Err(Error::Shape {
                expected: format!("{} phase samples", self.values.len()),
                actual: format!("{}", phase.len()),
            });
        }
        for (v, &p) in self.values.iter_mut().zip(phase) {
            *v *= Complex64::from_polar(1.0, p);
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    /// Centred `size`-by-`size` window, averaged in `factor`-by-`factor`
    /// blocks. Averaging is done on the complex amplitude.
    pub fn crop_center(&self, size: usize, factor: usize) -> Result<ComplexField> {
        let window = size * factor;
        if size == 0 || factor == 0 || window > self.grid_n {
            return Err(Error::config(
                "crop",
                format!(
                    "{size}x{size} output at factor {factor} does not fit a {} grid",
                    self.grid_n
                ),
            ));
        }
        let start = self.grid_n / 2 - window / 2;
        let norm = 1.0 / (factor * factor) as f64;
        let mut out = Vec::with_capacity(size * size);
        for bi in 0..size {
            for bj in 0..size {
                let mut acc = Complex64::new(0.0, 0.0);
                for di in 0..factor {
                    let row = start + bi * factor + di;
                    for dj in 0..factor {
                        acc += self.values[row * self.grid_n + start + bj * factor + dj];
                    }
                }
                out.push(acc * norm);
            }
        }
        ComplexField::patch(size, self.dx * factor as f64, self.wavelength, out)
    }
}

fn check_common(grid_n: usize, dx: f64, wavelength: f64, len: usize) -> Result<()> {
    if !(dx > 0.0 && dx.is_finite()) {
        return Err(Error::config("dx", format!("must be > 0 (got {dx})")));
    }
    if !(wavelength > 0.0 && wavelength.is_finite()) {
        return Err(Error::config("wavelength", format!("must be > 0 (got {wavelength})")));
    }
    if len != grid_n * grid_n {
        return Err(Error::Shape {
            expected: format!("{} samples", grid_n * grid_n),
            actual: format!("{len}"),
        });
    }
    Ok(())
}

/// Collimated Gaussian beam `exp(-r²/w0²)` normalised to unit total power.
pub fn make_gaussian_field(grid_n: usize, dx: f64, config: &ChannelConfig) -> Result<ComplexField> {
    let w0 = config.beam_waist;
    if (grid_n as f64) * dx < 6.0 * w0 {
        return Err(Error::config(
            "grid",
            format!(
                "grid side {} m must be at least 6 beam waists ({} m)",
                grid_n as f64 * dx,
                6.0 * w0
            ),
        ));
    }
    let mut field = ComplexField::zeros(grid_n, dx, config.wavelength)?;
    let coords: Vec<f64> = (0..grid_n).map(|i| field.coord(i)).collect();
    for (i, &y) in coords.iter().enumerate() {
        for (j, &x) in coords.iter().enumerate() {
            field.values[i * grid_n + j] = Complex64::new((-(x * x + y * y) / (w0 * w0)).exp(), 0.0);
        }
    }
    let power = field.total_power();
    field.scale(1.0 / power.sqrt());
    Ok(field)
}
