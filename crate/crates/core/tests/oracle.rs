//! Figures of merit re-derived by brute force from the mode amplitudes,
//! without the library's beamsplitter or branch code.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use sca_core::amplifier::figures_of_merit_conditioned;
use sca_core::{AmplifierConfig, Conditioning, DetectorModel, StateSet};

struct Oracle {
    fidelity: f64,
    fraction: f64,
    success: f64,
}

#[allow(clippy::too_many_arguments)]
fn brute_force(
    n: usize,
    alpha_sq: f64,
    r1_sq: f64,
    t2_sq: f64,
    det0: (f64, f64),
    det1: (f64, f64),
    condition: Conditioning,
) -> Oracle {
    // det = (eta * l, dark probability)
    let (r1, t1) = (r1_sq.sqrt(), (1.0 - r1_sq).sqrt());
    let (t2, r2) = (t2_sq.sqrt(), (1.0 - t2_sq).sqrt());
    let g = t2 / r1;
    let alpha = alpha_sq.sqrt();
    let phase = |j: usize| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64);
    let (mut fid, mut frac, mut succ) = (0.0, 0.0, 0.0);
    for m in 0..n {
        let input = alpha * phase(m);
        let target = g * input;
        let mut weights = Vec::new();
        let mut overlaps = Vec::new();
        for k in 0..n {
            let guess = (t1 / r1) * alpha * phase(k);
            let monitor = t1 * input - r1 * guess;
            let retained = r1 * input + t1 * guess;
            let tap = r2 * retained;
            let out = t2 * retained;
            let silent0 = (1.0 - det0.1) * (-det0.0 * monitor.norm_sqr()).exp();
            let fires1 = 1.0 - (1.0 - det1.1) * (-det1.0 * tap.norm_sqr()).exp();
            let w = match condition {
                Conditioning::None => 1.0,
                Conditioning::D0Silent => silent0,
                Conditioning::D0SilentAndD1Fires => silent0 * fires1,
            } / n as f64;
            weights.push(w);
            overlaps.push((-(out - target).norm_sqr()).exp());
        }
        let total: f64 = weights.iter().sum();
        fid += weights.iter().zip(&overlaps).map(|(w, o)| w * o).sum::<f64>() / total;
        frac += weights[m] / total;
        succ += total;
    }
    let n = n as f64;
    Oracle {
        fidelity: fid / n,
        fraction: frac / n,
        success: succ / n,
    }
}

fn detector(eta_l: f64, dark: f64) -> DetectorModel {
    DetectorModel::ideal().with_efficiency(eta_l).with_dark_prob(dark)
}

#[test]
fn lab_grid_matches_oracle() {
    let det = DetectorModel::lab(0.7268);
    let eta_l = det.photon_detection_probability();
    let dark = det.dark_prob_per_gate;
    for n in [2, 4, 8] {
        for alpha_sq in [0.01, 0.1, 0.21, 0.25, 0.3, 0.5, 0.94, 1.0] {
            let cfg = AmplifierConfig::lab(alpha_sq, n).unwrap();
            for condition in Conditioning::ALL {
                let lib = figures_of_merit_conditioned(&cfg, &det, &det, condition).unwrap();
                let o = brute_force(n, alpha_sq, 0.5, 0.9, (eta_l, dark), (eta_l, dark), condition);
                assert!((lib.fidelity - o.fidelity).abs() < 1e-12, "N={n} a2={alpha_sq}");
                assert!((lib.correct_state_fraction - o.fraction).abs() < 1e-12);
                assert!((lib.success_probability - o.success).abs() < 1e-12);
            }
        }
    }
}

fn config(n: usize, alpha_sq: f64, r1_sq: f64, t2_sq: f64) -> AmplifierConfig {
    AmplifierConfig::new(
        r1_sq.sqrt(),
        t2_sq.sqrt(),
        StateSet::with_mean_photons(alpha_sq, n).unwrap(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn arbitrary_parameters_match_oracle(
        n in 1usize..=8,
        alpha_sq in 0.001..3.0f64,
        r1_sq in 0.05..0.95f64,
        t2_sq in 0.5..0.99f64,
        e0 in 0.01..1.0f64, d0 in 0.0..0.05f64,
        e1 in 0.01..1.0f64, d1 in 0.0..0.05f64,
    ) {
        let cfg = config(n, alpha_sq, r1_sq, t2_sq);
        for condition in Conditioning::ALL {
            let lib = figures_of_merit_conditioned(&cfg, &detector(e0, d0), &detector(e1, d1), condition).unwrap();
            let o = brute_force(n, alpha_sq, r1_sq, t2_sq, (e0, d0), (e1, d1), condition);
            prop_assert!((lib.fidelity - o.fidelity).abs() < 1e-12);
            prop_assert!((lib.correct_state_fraction - o.fraction).abs() < 1e-12);
            prop_assert!((lib.success_probability - o.success).abs() < 1e-12);
        }
    }

    /// Each extra heralding condition favours the correct guess: D0 is darkest
    /// and the retained light brightest on the correct branch.
    #[test]
    fn each_condition_cleans_further(
        n in 2usize..=8,
        alpha_sq in 0.001..3.0f64,
        eta in 0.01..1.0f64,
        dark in 0.0..0.05f64,
    ) {
        let cfg = config(n, alpha_sq, 0.5, 0.9);
        let det = detector(eta, dark);
        let fraction = |c| figures_of_merit_conditioned(&cfg, &det, &det, c).unwrap().correct_state_fraction;
        let none = fraction(Conditioning::None);
        let silent = fraction(Conditioning::D0Silent);
        let heralded = fraction(Conditioning::D0SilentAndD1Fires);
        prop_assert!((none - 1.0 / n as f64).abs() < 1e-12);
        prop_assert!(silent >= none - 1e-12);
        prop_assert!(heralded >= silent - 1e-12);
    }

    #[test]
    fn success_falls_with_each_condition(n in 1usize..=8, alpha_sq in 0.001..3.0f64, eta in 0.01..1.0f64) {
        let cfg = config(n, alpha_sq, 0.5, 0.9);
        let det = detector(eta, 1e-6);
        let success = |c| figures_of_merit_conditioned(&cfg, &det, &det, c).unwrap().success_probability;
        prop_assert!((success(Conditioning::None) - 1.0).abs() < 1e-12);
        prop_assert!(success(Conditioning::D0Silent) <= 1.0 + 1e-12);
        prop_assert!(success(Conditioning::D0SilentAndD1Fires) <= success(Conditioning::D0Silent) + 1e-12);
    }
}
