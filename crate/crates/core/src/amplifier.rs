//! The state comparison amplifier: input/guess sets, branch enumeration,
//! heralding weights, conditioned output states and figures of merit.
//!
//! An input `|alpha_m>` drawn from a phase-symmetric set meets a guess
//! `|(t1/r1) alpha_k>` on the comparison beamsplitter. The monitor port feeds
//! detector D0; the retained port is tapped by the subtraction beamsplitter,
//! whose reflected port feeds D1 and whose transmitted port is the output.
//! An output is accepted when D0 is silent and D1 fires.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::coherent::{beamsplitter, check_unitary, mixture_fidelity, CoherentAmplitude, Mixture};
use crate::detector::DetectorModel;
use crate::error::{Result, ScaError};

/// `N` coherent states `alpha exp(2 pi i m / N)`, `m = 0..N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSet {
    base: CoherentAmplitude,
    n_states: usize,
}

impl StateSet {
    pub fn new(base: CoherentAmplitude, n_states: usize) -> Result<Self> {
        if n_states == 0 {
            return Err(ScaError::InvalidParameter {
                name: "n_states",
                reason: "a state set needs at least one member".into(),
            });
        }
        Ok(Self { base, n_states })
    }

    /// Set with a real, non-negative base amplitude of mean photon number `alpha_sq`.
    pub fn with_mean_photons(alpha_sq: f64, n_states: usize) -> Result<Self> {
        if !(alpha_sq.is_finite() && alpha_sq >= 0.0) {
            return Err(ScaError::NegativePhotonNumber(alpha_sq));
        }
        Self::new(CoherentAmplitude::from_mean_photons(alpha_sq), n_states)
    }

    pub fn base_amplitude(&self) -> CoherentAmplitude {
        self.base
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.base.mean_photon_number()
    }

    /// Phase of member `m` relative to the base amplitude.
    pub fn phase(&self, m: usize) -> f64 {
        2.0 * PI * (m % self.n_states) as f64 / self.n_states as f64
    }

    /// Member `m`, taken modulo `N`.
    pub fn state(&self, m: usize) -> CoherentAmplitude {
        self.base.rotate(self.phase(m))
    }

    pub fn states(&self) -> impl Iterator<Item = CoherentAmplitude> + '_ {
        (0..self.n_states).map(move |m| self.state(m))
    }

    pub(crate) fn check_index(&self, index: usize) -> Result<()> {
        if index < self.n_states {
            Ok(())
        } else {
            Err(ScaError::IndexOutOfRange {
                index,
                n_states: self.n_states,
            })
        }
    }
}

/// Photon-subtraction beamsplitter: `t2` to the output, `r2` to D1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubtractionStage {
    pub transmission: f64,
    pub reflection: f64,
}

impl SubtractionStage {
    pub fn from_transmission(t2: f64) -> Self {
        Self {
            transmission: t2,
            reflection: (1.0 - t2 * t2).max(0.0).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplifierConfig {
    pub comparison_r1: f64,
    pub comparison_t1: f64,
    /// Exactly one stage is supported.
    pub subtraction: Vec<SubtractionStage>,
    pub input_set: StateSet,
    /// Probability of choosing each guess; uniform unless set explicitly.
    pub guess_distribution: Vec<f64>,
}

impl AmplifierConfig {
    /// Config with comparison reflectivity amplitude `r1` and subtraction
    /// transmission amplitude `t2`; guesses are uniform.
    pub fn new(r1: f64, t2: f64, input_set: StateSet) -> Result<Self> {
        let n = input_set.n_states();
        let cfg = Self {
            comparison_r1: r1,
            comparison_t1: (1.0 - r1 * r1).max(0.0).sqrt(),
            subtraction: vec![SubtractionStage::from_transmission(t2)],
            input_set,
            guess_distribution: vec![1.0 / n as f64; n],
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 50/50 comparison and 90:10 subtraction, as built in the lab.
    pub fn lab(alpha_sq: f64, n_states: usize) -> Result<Self> {
        Self::new(
            0.5f64.sqrt(),
            0.9f64.sqrt(),
            StateSet::with_mean_photons(alpha_sq, n_states)?,
        )
    }

    pub fn with_guess_distribution(mut self, distribution: Vec<f64>) -> Result<Self> {
        self.guess_distribution = distribution;
        self.validate()?;
        Ok(self)
    }

    pub fn with_input_set(mut self, input_set: StateSet) -> Result<Self> {
        let n = input_set.n_states();
        if n != self.input_set.n_states() {
            self.guess_distribution = vec![1.0 / n as f64; n];
        }
        self.input_set = input_set;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_unitary(self.comparison_t1, self.comparison_r1)?;
        if self.comparison_r1 <= 0.0 {
            return Err(ScaError::InvalidParameter {
                name: "comparison_r1",
                reason: "must be positive for the guess amplitude t1/r1 to exist".into(),
            });
        }
        match self.subtraction.as_slice() {
            [stage] => {
                check_unitary(stage.transmission, stage.reflection)?;
                if stage.transmission <= 0.0 {
                    return Err(ScaError::InvalidParameter {
                        name: "subtraction_t2",
                        reason: "must be positive for a non-zero gain".into(),
                    });
                }
            }
            stages => {
                return Err(ScaError::InvalidParameter {
                    name: "subtraction",
                    reason: format!("exactly one subtraction stage is supported, got {}", stages.len()),
                })
            }
        }
        let n = self.input_set.n_states();
        if self.guess_distribution.len() != n {
            return Err(ScaError::InvalidParameter {
                name: "guess_distribution",
                reason: format!("expected {n} entries, got {}", self.guess_distribution.len()),
            });
        }
        if self
            .guess_distribution
            .iter()
            .any(|p| !(p.is_finite() && *p >= 0.0))
        {
            return Err(ScaError::InvalidParameter {
                name: "guess_distribution",
                reason: "entries must be non-negative".into(),
            });
        }
        let total: f64 = self.guess_distribution.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(ScaError::InvalidParameter {
                name: "guess_distribution",
                reason: format!("entries sum to {total}, expected 1"),
            });
        }
        Ok(())
    }

    pub fn stage(&self) -> SubtractionStage {
        self.subtraction[0]
    }

    pub fn subtraction_t2(&self) -> f64 {
        self.stage().transmission
    }

    pub fn subtraction_r2(&self) -> f64 {
        self.stage().reflection
    }

    pub fn n_states(&self) -> usize {
        self.input_set.n_states()
    }

    /// Amplitude gain `g = t2 / r1`.
    pub fn nominal_gain(&self) -> f64 {
        self.subtraction_t2() / self.comparison_r1
    }

    /// Guess state `k`, scaled by `t1/r1` so that a correct guess cancels
    /// the input at the monitor port.
    pub fn guess(&self, k: usize) -> CoherentAmplitude {
        self.input_set
            .state(k)
            .scale(self.comparison_t1 / self.comparison_r1)
    }

    /// The ideal amplified state `g alpha_m`.
    pub fn target(&self, input_index: usize) -> CoherentAmplitude {
        self.input_set.state(input_index).scale(self.nominal_gain())
    }
}

/// Amplitude gain `g = t2 / r1`.
pub fn nominal_gain(cfg: &AmplifierConfig) -> f64 {
    cfg.nominal_gain()
}

/// Mode amplitudes for one (input, guess) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchOutcome {
    pub input_index: usize,
    pub guess_index: usize,
    pub d0_amplitude: CoherentAmplitude,
    pub d1_amplitude: CoherentAmplitude,
    pub output_amplitude: CoherentAmplitude,
    pub prior_probability: f64,
}

impl BranchOutcome {
    pub fn is_correct_guess(&self) -> bool {
        self.input_index == self.guess_index
    }

    /// Offset `(guess - input) mod N`.
    pub fn offset(&self, n_states: usize) -> usize {
        (self.guess_index + n_states - self.input_index % n_states) % n_states
    }
}

/// All `N` guess branches for one input state.
pub fn enumerate_branches(cfg: &AmplifierConfig, input_index: usize) -> Result<Vec<BranchOutcome>> {
    cfg.input_set.check_index(input_index)?;
    let input = cfg.input_set.state(input_index);
    let (t1, r1) = (cfg.comparison_t1, cfg.comparison_r1);
    let stage = cfg.stage();
    (0..cfg.n_states())
        .map(|guess_index| {
            let comparison = beamsplitter(input, cfg.guess(guess_index), t1, r1)?;
            // On the correct branch the monitor port is exactly dark and the
            // retained light is exactly alpha / r1; pin both so that the
            // output equals the target bit for bit.
            let (d0_amplitude, d1_amplitude, output_amplitude) = if guess_index == input_index {
                (
                    CoherentAmplitude::VACUUM,
                    input.scale(stage.reflection / r1),
                    cfg.target(input_index),
                )
            } else {
                (
                    comparison.monitor,
                    comparison.retained.scale(stage.reflection),
                    comparison.retained.scale(stage.transmission),
                )
            };
            Ok(BranchOutcome {
                input_index,
                guess_index,
                d0_amplitude,
                d1_amplitude,
                output_amplitude,
                prior_probability: cfg.guess_distribution[guess_index],
            })
        })
        .collect()
}

/// Which heralding pattern an output is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    /// Every pulse is accepted.
    None,
    /// Accept when D0 does not fire.
    D0Silent,
    /// Accept when D0 does not fire and D1 fires.
    D0SilentAndD1Fires,
}

impl Conditioning {
    pub const ALL: [Conditioning; 3] = [
        Conditioning::None,
        Conditioning::D0Silent,
        Conditioning::D0SilentAndD1Fires,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Conditioning::None => "none",
            Conditioning::D0Silent => "d0_silent",
            Conditioning::D0SilentAndD1Fires => "d0_silent_and_d1_fires",
        }
    }

    /// Does a (D0, D1) click pattern pass this condition?
    pub fn accepts(self, d0_click: bool, d1_click: bool) -> bool {
        match self {
            Conditioning::None => true,
            Conditioning::D0Silent => !d0_click,
            Conditioning::D0SilentAndD1Fires => !d0_click && d1_click,
        }
    }
}

/// Probability that a branch is chosen and passes `condition`.
pub fn branch_weight(
    branch: &BranchOutcome,
    det0: &DetectorModel,
    det1: &DetectorModel,
    condition: Conditioning,
) -> f64 {
    let mut w = branch.prior_probability;
    if matches!(
        condition,
        Conditioning::D0Silent | Conditioning::D0SilentAndD1Fires
    ) {
        w *= det0.no_click_prob(branch.d0_amplitude.mean_photon_number());
    }
    if condition == Conditioning::D0SilentAndD1Fires {
        w *= det1.click_prob(branch.d1_amplitude.mean_photon_number());
    }
    w
}

/// `prior * P(D0 silent) * P(D1 fires)`.
pub fn acceptance_weight(branch: &BranchOutcome, det0: &DetectorModel, det1: &DetectorModel) -> f64 {
    branch_weight(branch, det0, det1, Conditioning::D0SilentAndD1Fires)
}

fn normalized_output(
    branches: &[BranchOutcome],
    weights: &[f64],
    input_index: usize,
) -> Result<Mixture> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(ScaError::NeverHeralded { input_index });
    }
    Mixture::new(
        branches
            .iter()
            .zip(weights)
            .map(|(b, w)| (w / total, b.output_amplitude)),
    )
}

/// Output state for input `input_index` given the heralding `condition`.
pub fn conditioned_output(
    cfg: &AmplifierConfig,
    det0: &DetectorModel,
    det1: &DetectorModel,
    input_index: usize,
    condition: Conditioning,
) -> Result<Mixture> {
    let branches = enumerate_branches(cfg, input_index)?;
    let weights: Vec<f64> = branches
        .iter()
        .map(|b| branch_weight(b, det0, det1, condition))
        .collect();
    normalized_output(&branches, &weights, input_index)
}

/// Heralded output state (D0 silent, D1 fires) for one input.
pub fn output_mixture(
    cfg: &AmplifierConfig,
    det0: &DetectorModel,
    det1: &DetectorModel,
    input_index: usize,
) -> Result<Mixture> {
    conditioned_output(cfg, det0, det1, input_index, Conditioning::D0SilentAndD1Fires)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiguresOfMerit {
    /// Fidelity to `|g alpha>` averaged over inputs.
    pub fidelity: f64,
    /// Share of accepted outputs that came from a correct guess.
    pub correct_state_fraction: f64,
    /// Probability per pulse that the condition is met.
    pub success_probability: f64,
}

/// Figures of merit under an arbitrary heralding condition, averaged over a
/// uniform prior on the input states.
pub fn figures_of_merit_conditioned(
    cfg: &AmplifierConfig,
    det0: &DetectorModel,
    det1: &DetectorModel,
    condition: Conditioning,
) -> Result<FiguresOfMerit> {
    let n = cfg.n_states();
    let mut fidelity = 0.0;
    let mut correct = 0.0;
    let mut success = 0.0;
    for m in 0..n {
        let branches = enumerate_branches(cfg, m)?;
        let weights: Vec<f64> = branches
            .iter()
            .map(|b| branch_weight(b, det0, det1, condition))
            .collect();
        let total: f64 = weights.iter().sum();
        let output = normalized_output(&branches, &weights, m)?;
        fidelity += mixture_fidelity(&output, cfg.target(m))?;
        correct += weights[m] / total;
        success += total;
    }
    let n = n as f64;
    Ok(FiguresOfMerit {
        fidelity: fidelity / n,
        correct_state_fraction: correct / n,
        success_probability: success / n,
    })
}

/// Figures of merit for the heralded output (D0 silent, D1 fires).
pub fn figures_of_merit(
    cfg: &AmplifierConfig,
    det0: &DetectorModel,
    det1: &DetectorModel,
) -> Result<FiguresOfMerit> {
    figures_of_merit_conditioned(cfg, det0, det1, Conditioning::D0SilentAndD1Fires)
}

/// Heralded events per second at pulse repetition frequency `prf`.
pub fn success_rate(
    cfg: &AmplifierConfig,
    det0: &DetectorModel,
    det1: &DetectorModel,
    prf: f64,
) -> Result<f64> {
    if !(prf.is_finite() && prf > 0.0) {
        return Err(ScaError::InvalidParameter {
            name: "prf",
            reason: format!("{prf} is not a positive repetition rate"),
        });
    }
    let n = cfg.n_states();
    let mut total = 0.0;
    for m in 0..n {
        total += enumerate_branches(cfg, m)?
            .iter()
            .map(|b| acceptance_weight(b, det0, det1))
            .sum::<f64>();
    }
    Ok(total / n as f64 * prf)
}
