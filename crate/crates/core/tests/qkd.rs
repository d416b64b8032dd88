//! Frozen values come from `oracles/derived.py` (mpmath, 40 digits).

use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use skyphase_core::optics::ComplexField;
use skyphase_core::qkd::{
    apply_correction, coherent_efficiency, covariance, detector_noise, g_function, holevo,
    mutual_information, scan_vmod, secure_key_rate, symplectic_eigenvalues, ChannelStats, DetectorParams,
};

fn trusted() -> DetectorParams {
    DetectorParams::default()
}

fn untrusted() -> DetectorParams {
    DetectorParams::default().with_trust(false)
}

#[test]
fn chain_stages_match_oracle() {
    assert_relative_eq!(detector_noise(0.53, &trusted()).unwrap(), 0.860_377_358_490_566, max_relative = 1e-12);
    assert_relative_eq!(mutual_information(0.71, 10.0, 1.06221).unwrap(), 1.075_752_188_356_789, max_relative = 1e-12);
    let cov = covariance(10.0, 0.71, 1.06221, &trusted()).unwrap();
    assert_relative_eq!(cov.a, 11.0);
    assert_relative_eq!(cov.b, 8.1172, max_relative = 1e-12);
    assert_relative_eq!(cov.c, (0.71f64 * 120.0).sqrt(), max_relative = 1e-12);
    assert_relative_eq!(covariance(10.0, 0.71, 1.06221, &untrusted()).unwrap().b, 9.16221, max_relative = 1e-12);

    let mut printed = cov;
    printed.c = 9.2304;
    let nu = symplectic_eigenvalues(&printed).unwrap();
    for (got, want) in nu.iter().zip([1.041_853_873_449_108_3, 3.924_653_873_449_108_3, 2.353_950_386_586_392_2]) {
        assert_relative_eq!(*got, want, max_relative = 1e-9);
    }
    assert_relative_eq!(g_function(2.0).unwrap(), 1.377_443_751_081_734_3, max_relative = 1e-12);
    assert_relative_eq!(holevo([1.041, 3.924, 2.355]).unwrap(), 0.911_439_061_616_480_5, max_relative = 1e-12);
}

#[test]
fn channel_one_trusted_rate_matches_oracle() {
    let stats = ChannelStats::non_fluctuating(0.71, 0.53, Some(1.05));
    let r = secure_key_rate(&stats, &trusted(), 10.0).unwrap();
    assert_relative_eq!(r.i_ab, 1.075_751_646_231_708_8, max_relative = 1e-12);
    assert_relative_eq!(r.chi_be, 0.914_900_509_715_401_2, max_relative = 1e-9);
    assert_relative_eq!(r.r_sec, 0.107_063_554_204_722_12, max_relative = 1e-9);
}

#[test]
fn untrusted_at_eighty_percent_is_negative() {
    let stats = ChannelStats::non_fluctuating(0.71, 0.80, None);
    let r = secure_key_rate(&stats, &untrusted(), 10.0).unwrap();
    assert_relative_eq!(r.r_sec, -0.235_773_709_691_339_4, max_relative = 1e-9);
    assert_eq!(r.r_sec_clamped, 0.0);
}

/// The field pair evaluated densely by the oracle script.
fn oracle_fields() -> (ComplexField, ComplexField) {
    let (n, dx) = (64usize, 0.03);
    let mut lo = Vec::with_capacity(n * n);
    let mut rp = Vec::with_capacity(n * n);
    for i in 0..n {
        let y = (i as f64 - 32.0) * dx;
        for j in 0..n {
            let x = (j as f64 - 32.0) * dx;
            lo.push(Complex64::new((-(x * x + y * y) / 0.36).exp(), 0.0));
            let amp = (-((x - 0.1).powi(2) + y * y) / 0.25).exp() * (1.0 + 0.3 * (7.0 * x * y).sin());
            let phase = 1.3 * (4.1 * x + 0.7).sin() + 0.9 * (3.3 * y - 2.0 * x).cos() + 0.4 * (11.0 * x * y).sin();
            rp.push(Complex64::from_polar(amp, phase));
        }
    }
    (
        ComplexField::new(n, dx, 1550e-9, lo).unwrap(),
        ComplexField::new(n, dx, 1550e-9, rp).unwrap(),
    )
}

#[test]
fn distorted_field_efficiency_matches_dense_oracle() {
    let (lo, rp) = oracle_fields();
    let g = coherent_efficiency(&lo, &rp, 0.75).unwrap();
    assert!((g - 0.031_877_286_230_890_903).abs() < 1e-6, "{g}");
}

#[test]
fn truth_correction_leaves_amplitude_overlap() {
    let (lo, rp) = oracle_fields();
    let truth: Vec<f64> = rp.values().iter().zip(lo.values()).map(|(r, l)| r.arg() - l.arg()).collect();
    let corrected = apply_correction(&lo, &truth).unwrap();
    let g = coherent_efficiency(&corrected, &rp, 0.75).unwrap();
    let abs = |f: &ComplexField| {
        ComplexField::new(64, 0.03, 1550e-9, f.values().iter().map(|v| Complex64::new(v.norm(), 0.0)).collect()).unwrap()
    };
    let amplitude_only = coherent_efficiency(&abs(&lo), &abs(&rp), 0.75).unwrap();
    assert!((g - amplitude_only).abs() < 1e-12);
    assert!(g > coherent_efficiency(&lo, &rp, 0.75).unwrap());
}

#[test]
fn pure_state_identities() {
    let ideal = DetectorParams {
        xi_ch: 0.0,
        ..trusted()
    };
    for v in [0.5, 2.0, 10.0] {
        let stats = ChannelStats::non_fluctuating(1.0, 1.0, Some(0.0));
        let r = secure_key_rate(&stats, &ideal, v).unwrap();
        for nu in r.nu {
            assert!((nu - 1.0).abs() < 1e-9);
        }
        assert!(r.chi_be.abs() < 1e-9);
        assert!((r.r_sec - 0.95 * 0.5 * (1.0 + v).log2()).abs() < 1e-9);
    }
}

#[test]
fn scan_maxima_order_with_efficiency() {
    let mut last = f64::NEG_INFINITY;
    for g in [0.31, 0.42, 0.53, 0.90] {
        let stats = ChannelStats::non_fluctuating(0.71, g, None);
        let best = scan_vmod(&stats, &trusted(), 0.0, 10.0, 200).unwrap().best.r_sec;
        assert!(best >= last, "{g}: {best} < {last}");
        last = best;
    }
}

proptest! {
    #[test]
    fn efficiency_in_unit_interval_and_symmetric(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut field = || {
            let v = (0..32 * 32)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            ComplexField::new(32, 0.05, 1e-6, v).unwrap()
        };
        let (a, b) = (field(), field());
        let g = coherent_efficiency(&a, &b, 0.6).unwrap();
        prop_assert!((0.0..=1.0).contains(&g));
        prop_assert!((g - coherent_efficiency(&b, &a, 0.6).unwrap()).abs() < 1e-12);
        prop_assert!((coherent_efficiency(&a, &a, 0.6).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rate_falls_with_detector_noise(xi in 0.0f64..2.0, extra in 0.01f64..1.0, v in 0.5f64..10.0, trusted_flag: bool) {
        let p = trusted().with_trust(trusted_flag);
        let lo = secure_key_rate(&ChannelStats::non_fluctuating(0.71, 0.5, Some(xi)), &p, v).unwrap();
        let hi = secure_key_rate(&ChannelStats::non_fluctuating(0.71, 0.5, Some(xi + extra)), &p, v).unwrap();
        prop_assert!(hi.r_sec <= lo.r_sec + 1e-12);
    }

    #[test]
    fn g_is_increasing(x in 1.0f64..100.0, dx in 1e-6f64..10.0) {
        prop_assert!(g_function(x + dx).unwrap() > g_function(x).unwrap());
    }

    #[test]
    fn spectra_are_physical(v in 0.01f64..20.0, t in 0.05f64..1.0, xi in 0.0f64..3.0, trusted_flag: bool) {
        let cov = covariance(v, t, xi, &trusted().with_trust(trusted_flag)).unwrap();
        let nu = symplectic_eigenvalues(&cov).unwrap();
        prop_assert!(nu.iter().all(|&n| n >= 1.0));
        prop_assert!(holevo(nu).unwrap() >= 0.0);
    }
}
