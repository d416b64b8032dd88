use std::f64::consts::PI;

use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use skyphase_core::atmosphere::{stratify, ChannelConfig};
use skyphase_core::optics::{
    make_gaussian_field, phase_correction_truth, ComplexField, Propagator, ScreenGenerator, ScreenSpectrum,
    SplitStep, SplitStepOptions,
};

/// 1/e² intensity radius from the second moment, w = 2 sqrt(<x²>).
fn second_moment_radius(f: &ComplexField) -> f64 {
    let n = f.grid_n();
    let (mut m2, mut p) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let v = f.at(i, j).norm_sqr();
            m2 += v * f.coord(j).powi(2);
            p += v;
        }
    }
    2.0 * (m2 / p).sqrt()
}

#[test]
fn gaussian_spreads_as_analytic_beam_over_the_vacuum_channel() {
    let c = ChannelConfig::channel_one();
    let z = c.satellite_altitude - c.ground_altitude;
    let mut f = make_gaussian_field(256, 8.0 / 256.0, &c).unwrap();
    let mut p = Propagator::for_field(&f).unwrap();
    p.propagate_segment(&mut f, z, false, 64).unwrap();
    let zr = PI * c.beam_waist.powi(2) / c.wavelength;
    let analytic = c.beam_waist * (1.0 + (z / zr).powi(2)).sqrt();
    assert_relative_eq!(second_moment_radius(&f), analytic, max_relative = 0.02);
    assert_relative_eq!(f.total_power(), 1.0, max_relative = 1e-9);
}

#[test]
fn zero_strength_plan_reproduces_the_vacuum_arm() {
    let c = ChannelConfig::channel_one();
    let plan = stratify(&c, 10).unwrap().without_turbulence();
    let field = make_gaussian_field(64, 0.125, &c).unwrap();
    let mut engine = SplitStep::new(64, 0.125, &c, SplitStepOptions::default()).unwrap();
    let r = engine.run(&field, &plan, 11).unwrap();
    assert!(r.phase_correction.iter().all(|p| p.abs() < 1e-9));
    for (a, b) in r.received_field.values().iter().zip(r.reference_field.values()) {
        assert!((a - b).norm() <= 1e-12 * b.norm().max(1e-300));
    }
}

#[test]
fn same_seed_same_propagation() {
    let c = ChannelConfig::channel_one();
    let plan = stratify(&c, 10).unwrap();
    let field = make_gaussian_field(64, 0.125, &c).unwrap();
    let mut engine = SplitStep::new(64, 0.125, &c, SplitStepOptions::default()).unwrap();
    let a = engine.run(&field, &plan, 5).unwrap();
    let b = engine.run(&field, &plan, 5).unwrap();
    let c2 = engine.run(&field, &plan, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.received_field, c2.received_field);
    for (i, v) in a.intensity.iter().zip(a.received_field.values()) {
        assert_eq!(*i, v.norm_sqr());
    }
}

#[test]
fn screen_ensemble_mean_is_zero() {
    let n = 32;
    let mut g = ScreenGenerator::new(n, 0.05, ScreenSpectrum::kolmogorov()).unwrap();
    let count = 400;
    let mut sum = vec![0.0; n * n];
    let mut sq = vec![0.0; n * n];
    for seed in 0..count {
        let s = g.generate(0.1, seed).unwrap();
        for (k, &p) in s.phase.iter().enumerate() {
            sum[k] += p;
            sq[k] += p * p;
        }
    }
    let m = count as f64;
    for k in 0..n * n {
        let mean = sum[k] / m;
        let sigma = (sq[k] / m - mean * mean).sqrt();
        assert!(mean.abs() < 4.0 * sigma / m.sqrt(), "pixel {k}: {mean} vs σ {sigma}");
    }
}

#[test]
fn infinite_r0_gives_flat_screen() {
    let mut g = ScreenGenerator::new(32, 0.05, ScreenSpectrum::kolmogorov()).unwrap();
    assert!(g.generate(f64::INFINITY, 1).unwrap().phase.iter().all(|p| p.abs() < 1e-12));
}

fn random_field(seed: u64, n: usize, dx: f64) -> ComplexField {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let c = (n / 2) as f64;
    let sigma = n as f64 / 8.0;
    let values = (0..n * n)
        .map(|k| {
            let (i, j) = ((k / n) as f64 - c, (k % n) as f64 - c);
            let env = (-(i * i + j * j) / (2.0 * sigma * sigma)).exp();
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * env
        })
        .collect();
    ComplexField::new(n, dx, 1e-6, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn vacuum_steps_compose(seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let f = random_field(seed, 64, 0.01);
        let mut p = Propagator::for_field(&f).unwrap();
        let (za, zb) = (a * p.max_step() / 2.0, b * p.max_step() / 2.0);
        let mut two = f.clone();
        p.propagate(&mut two, za).unwrap();
        p.propagate(&mut two, zb).unwrap();
        let mut one = f.clone();
        p.propagate(&mut one, za + zb).unwrap();
        let diff: f64 = two.values().iter().zip(one.values()).map(|(x, y)| (x - y).norm_sqr()).sum();
        let norm: f64 = one.values().iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((diff / norm).sqrt() < 1e-8);
        prop_assert!((one.total_power() / f.total_power() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn phase_screens_preserve_intensity(seed in any::<u64>()) {
        let mut f = random_field(seed, 32, 0.05);
        let before = f.intensity();
        let mut g = ScreenGenerator::new(32, 0.05, ScreenSpectrum::kolmogorov()).unwrap();
        f.apply_phase(&g.generate(0.05, seed).unwrap().phase).unwrap();
        for (x, y) in before.iter().zip(f.intensity()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.max(1e-300));
        }
    }

    #[test]
    fn truth_lies_in_half_open_interval(seed in any::<u64>(), other in any::<u64>()) {
        let a = random_field(seed, 32, 0.05);
        let b = random_field(other, 32, 0.05);
        for p in phase_correction_truth(&a, &b).unwrap() {
            prop_assert!(p > -PI && p <= PI);
        }
    }
}
