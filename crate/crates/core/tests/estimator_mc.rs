//! Pulse-number estimators applied to simulated counts. The tally knows how
//! many heralded pulses really came from each branch, so the estimates can
//! be checked against the truth with the exact single-pulse variance.

use sca_core::analysis::{
    estimate_class_pulses, estimate_pulse_numbers_with, port_click_probabilities, ClassCounts,
};
use sca_core::calibration::FITTED_LOSS;
use sca_core::montecarlo::{conditioned_offset_counts, simulate_run};
use sca_core::{
    conditioned_counts, enumerate_branches, AmplifierConfig, AnalysisConfig, CoherentAmplitude,
    Conditioning, DetectorModel, DetectorSet, RunSpec, VacuumRow,
};

const HERALDED: Conditioning = Conditioning::D0SilentAndD1Fires;

/// Detectors with a noisy D1 so wrong guesses are heralded often enough to
/// measure, and dark-free analysis ports so the estimators are unbiased.
fn detectors() -> DetectorSet {
    let clean = DetectorModel::lab(FITTED_LOSS).with_dark_prob(0.0);
    DetectorSet {
        d0: DetectorModel::lab(FITTED_LOSS),
        d1: DetectorModel::lab(FITTED_LOSS).with_dark_prob(0.03),
        da: clean,
        db: clean,
    }
}

fn run(alpha_sq: f64, n: usize, epsilon: f64, seed: u64) -> (RunSpec, sca_core::TallyTable) {
    let dets = detectors();
    let spec = RunSpec::new(
        AmplifierConfig::lab(alpha_sq, n).unwrap(),
        dets,
        AnalysisConfig::new(CoherentAmplitude::VACUUM, dets.da).with_epsilon(epsilon),
        2_000_000,
        seed,
    );
    let tally = simulate_run(&spec).unwrap();
    (spec, tally)
}

/// Variance per pulse of `(a + (1 - p_A) b) / (p_A + (1 - p_A) p_B)` under
/// the full (epsilon-including) joint click distribution.
fn class_variance(output: CoherentAmplitude, reference: CoherentAmplitude, epsilon: f64, det: &DetectorModel) -> f64 {
    let ideal = port_click_probabilities(output, reference, 0.0, det, det).unwrap();
    let actual = port_click_probabilities(output, reference, epsilon, det, det).unwrap();
    let pa = ideal.p_a();
    let denom = pa + (1.0 - pa) * ideal.p_b();
    let x = |a: f64, b: f64| (a + (1.0 - pa) * b) / denom;
    let second = actual.p10 * x(1.0, 0.0).powi(2)
        + actual.p01 * x(0.0, 1.0).powi(2)
        + actual.p11 * x(1.0, 1.0).powi(2);
    second - 1.0
}

#[test]
fn two_state_estimate_recovers_true_pulse_numbers() {
    let (alpha_sq, epsilon) = (0.5, 0.02);
    let (spec, tally) = run(alpha_sq, 2, epsilon, 3);
    let counts = conditioned_counts(&tally, HERALDED).as_real();
    let true_sig = tally.accepted_correct(HERALDED) as f64;
    let true_vac = (tally.accepted(HERALDED) - tally.accepted_correct(HERALDED)) as f64;
    assert!(true_vac > 1000.0, "only {true_vac} vacuum pulses");

    let target = spec.amplifier.target(0);
    let g2a2 = target.mean_photon_number();
    let eta_l = spec.detectors.da.photon_detection_probability();
    let est = estimate_pulse_numbers_with(&counts, g2a2, eta_l, VacuumRow::PortMarginal).unwrap();

    let var_sig = class_variance(target, target, epsilon, &spec.detectors.da);
    let p_vac = 1.0 - (-eta_l * g2a2 / 2.0).exp();
    let var_vac = (1.0 - p_vac) / (2.0 * p_vac);
    let z_sig = (est.signal - true_sig) / (true_sig * var_sig).sqrt();
    let z_vac = (est.vacuum - true_vac) / (true_vac * var_vac).sqrt();
    assert!(z_sig.abs() < 5.0, "signal {} vs {true_sig}, z = {z_sig}", est.signal);
    assert!(z_vac.abs() < 5.0, "vacuum {} vs {true_vac}, z = {z_vac}", est.vacuum);

    // The doubled-exponent vacuum row assumes four times the click rate and
    // so undercounts vacuum pulses well beyond the noise.
    let doubled = estimate_pulse_numbers_with(&counts, g2a2, eta_l, VacuumRow::DoubledExponent).unwrap();
    let z = (doubled.vacuum - true_vac) / (true_vac * var_vac).sqrt();
    assert!(z < -5.0, "doubled-exponent vacuum {} vs {true_vac}", doubled.vacuum);
}

#[test]
fn class_estimates_recover_every_offset() {
    let epsilon = 0.02;
    for (n, alpha_sq, seed) in [(4, 0.5, 11), (8, 0.8, 12)] {
        let (spec, tally) = run(alpha_sq, n, epsilon, seed);
        let target = spec.amplifier.target(0);
        let branches = enumerate_branches(&spec.amplifier, 0).unwrap();
        for (offset, (tally_row, branch)) in conditioned_offset_counts(&tally, HERALDED)
            .iter()
            .zip(&branches)
            .enumerate()
        {
            let truth = tally_row.pulses as f64;
            if truth < 200.0 {
                continue;
            }
            let counts = ClassCounts {
                amplitude: branch.output_amplitude,
                n_a: tally_row.n_a as f64,
                n_b: tally_row.n_b as f64,
            };
            let est = estimate_class_pulses(&counts, target, &spec.detectors.da, &spec.detectors.db).unwrap();
            let var = class_variance(branch.output_amplitude, target, epsilon, &spec.detectors.da);
            let z = (est - truth) / (truth * var).sqrt();
            assert!(z.abs() < 5.0, "N={n} offset {offset}: {est} vs {truth}, z = {z}");
        }
    }
}
