//! Optical fields, phase screens and split-step propagation.

mod fft;
mod field;
mod propagate;
mod screen;
mod split_step;

pub use fft::{angular_frequency, Fft2};
pub use field::{make_gaussian_field, ComplexField};
pub use propagate::{propagate_vacuum, Propagator};
pub use screen::{generate_phase_screen, PhaseScreen, ScreenGenerator, ScreenSpectrum};
pub use split_step::{
    phase_correction_truth, split_step, wrap_phase, PropagationResult, SplitStep, SplitStepOptions,
};
