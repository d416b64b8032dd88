use std::f64::consts::PI;

use super::field::ComplexField;
use super::propagate::Propagator;
use super::screen::{ScreenGenerator, ScreenSpectrum};
use crate::atmosphere::{ChannelConfig, ScreenPlan};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitStepOptions {
    /// Apply the edge absorber after every segment of the turbulent arm
    /// that follows a turbulent screen.
    pub absorber: bool,
    /// Upper bound on the sub-steps a single segment may be split into.
    pub max_substeps: usize,
}

impl Default for SplitStepOptions {
    fn default() -> Self {
        Self {
            absorber: true,
            max_substeps: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    pub received_field: ComplexField,
    /// The same beam carried over the same distance through vacuum.
    pub reference_field: ComplexField,
    pub phase_correction: Vec<f64>,
    pub intensity: Vec<f64>,
}

/// Wraps an angle into (-π, π].
pub fn wrap_phase(angle: f64) -> f64 {
    let mut w = angle % (2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    } else if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Pixelwise `wrap(arg(received) - arg(reference))`.
pub fn phase_correction_truth(received: &ComplexField, reference: &ComplexField) -> Result<Vec<f64>> {
    received.same_grid(reference)?;
    Ok(received
        .values()
        .iter()
        .zip(reference.values())
        .map(|(r, v)| wrap_phase(r.arg() - v.arg()))
        .collect())
}

/// Split-step propagator for one grid and channel, reusable across runs.
pub struct SplitStep {
    propagator: Propagator,
    screens: ScreenGenerator,
    options: SplitStepOptions,
}

impl SplitStep {
    pub fn new(grid_n: usize, dx: f64, config: &ChannelConfig, options: SplitStepOptions) -> Result<Self> {
        config.validate()?;
        let side = grid_n as f64 * dx;
        if side < 8.0 * config.receiver_radius {
            return Err(Error::config(
                "grid",
                format!(
                    "grid side {side} m must be at least four receiver diameters ({} m)",
                    8.0 * config.receiver_radius
                ),
            ));
        }
        Self::with_spectrum(grid_n, dx, config.wavelength, ScreenSpectrum::from_config(config), options)
    }

    pub fn with_spectrum(
        grid_n: usize,
        dx: f64,
        wavelength: f64,
        spectrum: ScreenSpectrum,
        options: SplitStepOptions,
    ) -> Result<Self> {
        Ok(Self {
            propagator: Propagator::new(grid_n, dx, wavelength)?,
            screens: ScreenGenerator::new(grid_n, dx, spectrum)?,
            options,
        })
    }

    /// Path lengths between consecutive screens, transmitter first.
    fn segments(plan: &ScreenPlan) -> Result<Vec<f64>> {
        let mut z = 0.0;
        let mut segments = Vec::with_capacity(plan.layers.len() + 1);
        for (i, layer) in plan.layers.iter().enumerate() {
            let dz = layer.screen_position - z;
            if !(dz >= 0.0) {
                return Err(Error::Propagation {
                    segment: i,
                    reason: format!("screen at {} m lies behind the previous one at {z} m", layer.screen_position),
                });
            }
            segments.push(dz);
            z = layer.screen_position;
        }
        let tail = plan.total_distance - z;
        if !(tail >= 0.0) {
            return Err(Error::Propagation {
                segment: plan.layers.len(),
                reason: format!("last screen at {z} m lies beyond the receiver"),
            });
        }
        segments.push(tail);
        Ok(segments)
    }

    fn advance(&mut self, field: &mut ComplexField, segment: usize, dz: f64, absorb: bool) -> Result<()> {
        self.propagator
            .propagate_segment(field, dz, absorb, self.options.max_substeps)
            .map(|_| ())
            .map_err(|e| match e {
                Error::Propagation { reason, .. } => Error::Propagation { segment, reason },
                other => other,
            })
    }

    /// Vacuum reference over the plan's full path, using the same sub-steps
    /// as the turbulent arm.
    pub fn reference(&mut self, field: &ComplexField, plan: &ScreenPlan) -> Result<ComplexField> {
        let mut out = field.clone();
        for (segment, dz) in Self::segments(plan)?.into_iter().enumerate() {
            self.advance(&mut out, segment, dz, false)?;
        }
        Ok(out)
    }

    /// Turbulent arm only: screens drawn from `derive_seed(seed, layer)`.
    pub fn turbulent(&mut self, field: &ComplexField, plan: &ScreenPlan, seed: u64) -> Result<ComplexField> {
        let segments = Self::segments(plan)?;
        // Until the first screen the arm is identical to the vacuum arm, so
        // the absorber only starts once there is scattered light to remove.
        let mut scattered = false;
        let mut out = field.clone();
        for (segment, &dz) in segments.iter().enumerate() {
            self.advance(&mut out, segment, dz, self.options.absorber && scattered)?;
            if let Some(layer) = plan.layers.get(segment) {
                if layer.is_turbulent() {
                    let screen = self
                        .screens
                        .generate(layer.fried_r0, derive_seed(seed, segment as u64))?;
                    out.apply_phase(&screen.phase)?;
                    scattered = true;
                }
            }
        }
        Ok(out)
    }

    pub fn run(&mut self, field: &ComplexField, plan: &ScreenPlan, seed: u64) -> Result<PropagationResult> {
        let received_field = self.turbulent(field, plan, seed)?;
        let reference_field = self.reference(field, plan)?;
        let phase_correction = phase_correction_truth(&received_field, &reference_field)?;
        let intensity = received_field.intensity();
        Ok(PropagationResult {
            received_field,
            reference_field,
            phase_correction,
            intensity,
        })
    }
}

/// Propagates `field` through `plan` and returns the turbulent and vacuum
/// arms together with the truth phase correction.
pub fn split_step(
    field: &ComplexField,
    plan: &ScreenPlan,
    config: &ChannelConfig,
    seed: u64,
) -> Result<PropagationResult> {
    SplitStep::new(field.grid_n(), field.dx(), config, SplitStepOptions::default())?.run(field, plan, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn field_with(values: Vec<Complex64>) -> ComplexField {
        ComplexField::new(32, 0.1, 1e-6, values).unwrap()
    }

    #[test]
    fn wrap_convention() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert!((wrap_phase(7.0 * PI) - PI).abs() < 1e-12);
    }

    #[test]
    fn truth_of_identical_fields_is_zero() {
        let base: Vec<Complex64> = (0..1024).map(|i| Complex64::from_polar(1.0 + i as f64, i as f64 * 0.3)).collect();
        let a = field_with(base.clone());
        assert!(phase_correction_truth(&a, &a).unwrap().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn truth_of_uniform_offsets() {
        let base: Vec<Complex64> = (0..1024).map(|i| Complex64::from_polar(2.0, i as f64 * 0.7)).collect();
        let reference = field_with(base.clone());
        for (offset, expect) in [(PI / 3.0, PI / 3.0), (PI + 0.1, -PI + 0.1)] {
            let shifted = field_with(base.iter().map(|v| v * Complex64::from_polar(1.0, offset)).collect());
            for p in phase_correction_truth(&shifted, &reference).unwrap() {
                assert!((p - expect).abs() < 1e-9, "{p} vs {expect}");
            }
        }
    }

    #[test]
    fn grid_mismatch_is_a_shape_error() {
        let a = ComplexField::zeros(32, 0.1, 1e-6).unwrap();
        let b = ComplexField::zeros(64, 0.1, 1e-6).unwrap();
        assert!(matches!(phase_correction_truth(&a, &b), Err(Error::Shape { .. })));
    }
}
