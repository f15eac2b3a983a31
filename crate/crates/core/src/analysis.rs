//! Output analysis: the outer interferometer, its photocount statistics and
//! the count-based state and fidelity estimators.
//!
//! The amplifier output is mixed with a test copy of `|g alpha>` on a 50/50
//! beamsplitter. Port A carries `(out + ref)/sqrt 2` and port B carries
//! `(out - ref)/sqrt 2`, so a perfect output sends every photon to D_A.
//!
//! Interferometer imperfection enters through `epsilon`: a probability mass
//! `epsilon * c` is moved out of the (A only) outcome, where `c` is the
//! normalized in-phase overlap between output and reference (1 for a matched
//! output, 0 for vacuum). The moved mass always fires D_B and fires D_A with
//! its usual probability. For the matched and the vacuum output this is
//! exactly the two-state photocount table used by the estimators.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplifier::{conditioned_output, AmplifierConfig, Conditioning};
use crate::coherent::{beamsplitter, overlap_sq, CoherentAmplitude, Mixture};
use crate::detector::DetectorModel;
use crate::error::{Result, ScaError};

pub const DEFAULT_PHASE_POINTS: usize = 256;
pub const MIN_PHASE_POINTS: usize = 8;

/// Below this `eta*l*g^2*alpha^2` the pulse-number estimators are undefined.
pub const MIN_SIGNAL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// The test state `|g alpha>` sent into the second input port.
    pub reference_amplitude: CoherentAmplitude,
    /// Interferometer imperfection.
    pub epsilon: f64,
    /// Model used for both D_A and D_B.
    pub detector: DetectorModel,
    /// Number of phase settings in a visibility scan.
    pub phase_points: usize,
}

impl AnalysisConfig {
    pub fn new(reference_amplitude: CoherentAmplitude, detector: DetectorModel) -> Self {
        Self {
            reference_amplitude,
            epsilon: 0.0,
            detector,
            phase_points: DEFAULT_PHASE_POINTS,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_reference(mut self, reference: CoherentAmplitude) -> Self {
        self.reference_amplitude = reference;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(ScaError::InvalidParameter {
                name: "epsilon",
                reason: format!("{} is outside [0, 1)", self.epsilon),
            });
        }
        if self.phase_points < MIN_PHASE_POINTS {
            return Err(ScaError::InvalidParameter {
                name: "phase_points",
                reason: format!("{} is below the minimum of {MIN_PHASE_POINTS}", self.phase_points),
            });
        }
        self.detector.validate()
    }
}

/// Joint click distribution of (D_A, D_B) for one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointClicks {
    pub p10: f64,
    pub p01: f64,
    pub p11: f64,
    pub p00: f64,
}

impl JointClicks {
    /// Probability that D_A fires.
    pub fn p_a(&self) -> f64 {
        self.p10 + self.p11
    }

    /// Probability that D_B fires.
    pub fn p_b(&self) -> f64 {
        self.p01 + self.p11
    }

    /// Outcomes ordered by the (A, B) bit pattern `0b_AB`: 00, 01, 10, 11.
    pub fn as_array(&self) -> [f64; 4] {
        [self.p00, self.p01, self.p10, self.p11]
    }
}

/// Normalized in-phase overlap `2 Re(out ref*) / (|out|^2 + |ref|^2)`,
/// clipped to `[0, 1]`; 1 when the output equals the reference.
fn mismatch_coupling(output: CoherentAmplitude, reference: CoherentAmplitude) -> f64 {
    let scale = output.mean_photon_number() + reference.mean_photon_number();
    if output.distance_sq(reference) <= 1e-24 * (1.0 + scale) {
        return 1.0;
    }
    let cross = 2.0 * (output.0 * reference.0.conj()).re;
    (cross / scale).clamp(0.0, 1.0)
}

/// Click statistics of D_A and D_B for a coherent output interfered with a
/// coherent reference.
pub fn port_click_probabilities(
    output: CoherentAmplitude,
    reference: CoherentAmplitude,
    epsilon: f64,
    det_a: &DetectorModel,
    det_b: &DetectorModel,
) -> Result<JointClicks> {
    let ports = beamsplitter(output, reference, FRAC_1_SQRT_2, FRAC_1_SQRT_2)?;
    let pa = det_a.click_prob(ports.retained.mean_photon_number());
    let pb = det_b.click_prob(ports.monitor.mean_photon_number());
    let mut joint = JointClicks {
        p10: pa * (1.0 - pb),
        p01: (1.0 - pa) * pb,
        p11: pa * pb,
        p00: (1.0 - pa) * (1.0 - pb),
    };
    if epsilon > 0.0 {
        let coupling = mismatch_coupling(output, reference);
        let moved = epsilon * coupling;
        if moved > joint.p10 + 1e-15 {
            return Err(ScaError::InvalidEpsilon {
                epsilon,
                limit: joint.p10 / coupling,
            });
        }
        joint.p10 = (joint.p10 - moved).max(0.0);
        joint.p11 += moved * pa;
        joint.p01 += moved * (1.0 - pa);
    }
    Ok(joint)
}

/// Photocount probabilities at D_A/D_B for a given amplifier output, using
/// the config's reference, epsilon and detector model for both ports.
pub fn count_probabilities(output: CoherentAmplitude, cfg: &AnalysisConfig) -> Result<JointClicks> {
    port_click_probabilities(
        output,
        cfg.reference_amplitude,
        cfg.epsilon,
        &cfg.detector,
        &cfg.detector,
    )
}

/// Fringe visibility of port A as the reference phase is scanned over
/// `phase_points` settings in `[0, 2 pi)`.
pub fn visibility(mixture: &Mixture, cfg: &AnalysisConfig) -> Result<f64> {
    mixture.ensure_normalized()?;
    cfg.validate()?;
    let (max, min) = (0..cfg.phase_points)
        .into_par_iter()
        .map(|j| {
            let phase = 2.0 * PI * j as f64 / cfg.phase_points as f64;
            let reference = cfg.reference_amplitude.rotate(phase);
            mixture.components().iter().try_fold(0.0, |acc, c| {
                let joint = port_click_probabilities(
                    c.amplitude,
                    reference,
                    cfg.epsilon,
                    &cfg.detector,
                    &cfg.detector,
                )?;
                Ok(acc + c.weight * joint.p_a())
            })
        })
        .map(|p: Result<f64>| p.map(|p| (p, p)))
        .try_reduce(
            || (f64::NEG_INFINITY, f64::INFINITY),
            |a, b| Ok((a.0.max(b.0), a.1.min(b.1))),
        )?;
    if max <= 0.0 {
        return Ok(0.0);
    }
    Ok(((max - min) / (max + min)).clamp(0.0, 1.0))
}

/// Visibility of the conditioned amplifier output, averaged over inputs. For
/// input `m` the reference is the target `g alpha_m`; `template` supplies
/// epsilon, the detector and the phase grid.
pub fn conditioned_visibility(
    amplifier: &AmplifierConfig,
    det0: &DetectorModel,
    det1: &DetectorModel,
    template: &AnalysisConfig,
    condition: Conditioning,
) -> Result<f64> {
    let n = amplifier.n_states();
    let mut total = 0.0;
    for m in 0..n {
        let output = conditioned_output(amplifier, det0, det1, m, condition)?;
        let cfg = template.with_reference(amplifier.target(m));
        total += visibility(&output, &cfg)?;
    }
    Ok(total / n as f64)
}

/// Counts at D_A and D_B split by whether the amplifier emitted the target
/// (`sig`) or a wrong-guess state (`vac`; exactly vacuum for two states).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountTable<T = u64> {
    pub n_a_sig: T,
    pub n_b_sig: T,
    pub n_a_vac: T,
    pub n_b_vac: T,
}

impl CountTable<u64> {
    pub fn as_real(&self) -> CountTable<f64> {
        CountTable {
            n_a_sig: self.n_a_sig as f64,
            n_b_sig: self.n_b_sig as f64,
            n_a_vac: self.n_a_vac as f64,
            n_b_vac: self.n_b_vac as f64,
        }
    }
}

impl CountTable<f64> {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_a_sig", self.n_a_sig),
            ("n_b_sig", self.n_b_sig),
            ("n_a_vac", self.n_a_vac),
            ("n_b_vac", self.n_b_vac),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ScaError::InvalidParameter {
                    name,
                    reason: format!("count {v} is negative or not finite"),
                });
            }
        }
        Ok(())
    }
}

/// How the vacuum-output pulse number is recovered from its counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VacuumRow {
    /// Counts per vacuum pulse taken as `1 - exp(-2 eta l g^2 alpha^2)` at
    /// each port, the form usually quoted with the averaged estimator.
    DoubledExponent,
    /// Counts per vacuum pulse taken as `1 - exp(-eta l g^2 alpha^2 / 2)`,
    /// the port-A/B marginal of the vacuum row of the count table.
    PortMarginal,
}

impl VacuumRow {
    /// Expected clicks per vacuum pulse at each of D_A, D_B.
    pub fn click_per_pulse(self, g2a2: f64, eta_l: f64) -> f64 {
        match self {
            VacuumRow::DoubledExponent => 1.0 - (-2.0 * eta_l * g2a2).exp(),
            VacuumRow::PortMarginal => 1.0 - (-eta_l * g2a2 / 2.0).exp(),
        }
    }
}

/// Exponent used for the vacuum term of the two-state fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentConvention {
    /// `|<g alpha|0>|^2 = exp(-g^2 alpha^2)`.
    Standard,
    /// `exp(-2 g^2 alpha^2)`, the form usually quoted with the estimator.
    DoubledExponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseNumbers {
    pub signal: f64,
    pub vacuum: f64,
}

impl PulseNumbers {
    pub fn total(&self) -> f64 {
        self.signal + self.vacuum
    }
}

fn check_signal(g2a2: f64, eta_l: f64) -> Result<()> {
    if !(eta_l > 0.0 && eta_l <= 1.0) {
        return Err(ScaError::InvalidParameter {
            name: "eta_l",
            reason: format!("{eta_l} is outside (0, 1]"),
        });
    }
    let signal = g2a2 * eta_l;
    if !(signal.is_finite() && signal >= MIN_SIGNAL) {
        return Err(ScaError::InsufficientSignal(signal));
    }
    Ok(())
}

/// Expected counts for `pulses` through a two-state analysis (forward model
/// of the estimator). Fails if `epsilon` would make a count negative.
pub fn expected_counts(
    pulses: PulseNumbers,
    g2a2: f64,
    eta_l: f64,
    epsilon: f64,
    vacuum_row: VacuumRow,
) -> Result<CountTable<f64>> {
    check_signal(g2a2, eta_l)?;
    let dark = (-2.0 * eta_l * g2a2).exp();
    let a_per_signal = 1.0 - (1.0 + epsilon) * dark;
    if a_per_signal < 0.0 {
        return Err(ScaError::InvalidEpsilon {
            epsilon,
            limit: 1.0 / dark - 1.0,
        });
    }
    let per_vac = vacuum_row.click_per_pulse(g2a2, eta_l);
    Ok(CountTable {
        n_a_sig: a_per_signal * pulses.signal,
        n_b_sig: epsilon * pulses.signal,
        n_a_vac: per_vac * pulses.vacuum,
        n_b_vac: per_vac * pulses.vacuum,
    })
}

/// Pulse numbers behind a two-state count table; the vacuum row is taken
/// with the doubled exponent (see [`estimate_pulse_numbers_with`]).
pub fn estimate_pulse_numbers(counts: &CountTable<f64>, g2a2: f64, eta_l: f64) -> Result<PulseNumbers> {
    estimate_pulse_numbers_with(counts, g2a2, eta_l, VacuumRow::DoubledExponent)
}

/// `N_sig = (n_A + n_B e^{-2x}) / (1 - e^{-2x})` with `x = eta l g^2 alpha^2`,
/// which does not depend on epsilon, and `N_vac` from the averaged vacuum
/// counts under the chosen `vacuum_row`.
pub fn estimate_pulse_numbers_with(
    counts: &CountTable<f64>,
    g2a2: f64,
    eta_l: f64,
    vacuum_row: VacuumRow,
) -> Result<PulseNumbers> {
    check_signal(g2a2, eta_l)?;
    counts.validate()?;
    let dark = (-2.0 * eta_l * g2a2).exp();
    let signal = (counts.n_a_sig + counts.n_b_sig * dark) / (1.0 - dark);
    let vacuum = (counts.n_a_vac + counts.n_b_vac)
        / (2.0 * vacuum_row.click_per_pulse(g2a2, eta_l));
    Ok(PulseNumbers {
        signal: signal.max(0.0),
        vacuum: vacuum.max(0.0),
    })
}

/// Two-state fidelity `P(g alpha) + c P(0)` from estimated pulse numbers.
pub fn estimate_fidelity(
    n_sig: f64,
    n_vac: f64,
    g2a2: f64,
    convention: ExponentConvention,
) -> Result<f64> {
    let total = n_sig + n_vac;
    if !(total > 0.0) || n_sig < 0.0 || n_vac < 0.0 {
        return Err(ScaError::InvalidParameter {
            name: "pulse_numbers",
            reason: format!("need non-negative pulse numbers with a positive sum, got ({n_sig}, {n_vac})"),
        });
    }
    let vacuum_overlap = match convention {
        ExponentConvention::Standard => (-g2a2).exp(),
        ExponentConvention::DoubledExponent => (-2.0 * g2a2).exp(),
    };
    Ok(n_sig / total + vacuum_overlap * n_vac / total)
}

/// `P(g alpha) |g alpha><g alpha| + P(0) |0><0|` from pulse numbers.
pub fn reconstruct_density(n_sig: f64, n_vac: f64, target: CoherentAmplitude) -> Result<Mixture> {
    let total = n_sig + n_vac;
    if !(total > 0.0) || n_sig < 0.0 || n_vac < 0.0 {
        return Err(ScaError::InvalidParameter {
            name: "pulse_numbers",
            reason: format!("need non-negative pulse numbers with a positive sum, got ({n_sig}, {n_vac})"),
        });
    }
    Mixture::new([
        (n_sig / total, target),
        (n_vac / total, CoherentAmplitude::VACUUM),
    ])
}

/// Counts attributed to one class of amplifier outputs (all pulses that
/// left the amplifier in the same coherent state).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub amplitude: CoherentAmplitude,
    pub n_a: f64,
    pub n_b: f64,
}

/// Number of pulses behind a class's counts.
///
/// With `p_A`, `p_B` the port click probabilities for that output, the
/// combination `n_A + (1 - p_A) n_B` is unaffected by epsilon, giving
/// `N = (n_A + (1 - p_A) n_B) / (p_A + (1 - p_A) p_B)`. For the matched
/// output without background this is the two-state signal estimator.
pub fn estimate_class_pulses(
    counts: &ClassCounts,
    reference: CoherentAmplitude,
    det_a: &DetectorModel,
    det_b: &DetectorModel,
) -> Result<f64> {
    let ideal = port_click_probabilities(counts.amplitude, reference, 0.0, det_a, det_b)?;
    let (pa, pb) = (ideal.p_a(), ideal.p_b());
    let denom = pa + (1.0 - pa) * pb;
    if denom < MIN_SIGNAL {
        return Err(ScaError::InsufficientSignal(denom));
    }
    Ok(((counts.n_a + (1.0 - pa) * counts.n_b) / denom).max(0.0))
}

/// Output state estimated from per-class counts, assuming the amplifier
/// only ever emits the listed class amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassEstimate {
    pub pulses: Vec<f64>,
    pub mixture: Mixture,
}

impl ClassEstimate {
    pub fn fidelity(&self, target: CoherentAmplitude) -> f64 {
        self.mixture
            .components()
            .iter()
            .map(|c| c.weight * overlap_sq(c.amplitude, target))
            .sum()
    }
}

pub fn estimate_class_mixture(
    classes: &[ClassCounts],
    reference: CoherentAmplitude,
    det_a: &DetectorModel,
    det_b: &DetectorModel,
) -> Result<ClassEstimate> {
    let pulses = classes
        .iter()
        .map(|c| estimate_class_pulses(c, reference, det_a, det_b))
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = pulses.iter().sum();
    if !(total > 0.0) {
        return Err(ScaError::InsufficientSignal(total));
    }
    let mixture = Mixture::new(
        classes
            .iter()
            .zip(&pulses)
            .map(|(c, n)| (n / total, c.amplitude)),
    )?;
    Ok(ClassEstimate { pulses, mixture })
}
