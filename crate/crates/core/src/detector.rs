//! Gated threshold (click / no-click) photodetector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Result, ScaError};

/// Mean detection efficiency of the silicon SPADs at 850 nm.
pub const LAB_EFFICIENCY: f64 = 0.405;
/// Mean background count rate seen by each detector, counts per second.
pub const LAB_BACKGROUND_RATE: f64 = 296.0;
/// Half-width of the software gate around the expected arrival time, seconds.
pub const LAB_GATE_HALFWIDTH: f64 = 2e-9;
/// Fraction of signal events kept by the software gate.
pub const LAB_SIGNAL_RETENTION: f64 = 0.965;
/// Fraction of uncorrelated background events discarded by the software gate.
pub const LAB_BACKGROUND_DISCARD: f64 = 0.97;
/// Laser pulse repetition frequency, pulses per second.
pub const LAB_PRF: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    /// Quantum efficiency `eta`.
    pub efficiency: f64,
    /// Optical transmission `l` of the path in front of the detector.
    pub loss_transmission: f64,
    /// Probability of a background click in one gate, `d`.
    pub dark_prob_per_gate: f64,
    /// Gate half-width in seconds (bookkeeping only; gates are not timed).
    pub gate_halfwidth: f64,
    /// Fraction of signal clicks surviving the software gate.
    #[serde(default = "unit")]
    pub signal_retention: f64,
}

fn unit() -> f64 {
    1.0
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl DetectorModel {
    /// Unit efficiency, no loss, no background.
    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            loss_transmission: 1.0,
            dark_prob_per_gate: 0.0,
            gate_halfwidth: LAB_GATE_HALFWIDTH,
            signal_retention: 1.0,
        }
    }

    /// Laboratory detector with the given path transmission. The dark
    /// probability is the background rate integrated over the full gate.
    pub fn lab(loss_transmission: f64) -> Self {
        Self {
            efficiency: LAB_EFFICIENCY,
            loss_transmission,
            dark_prob_per_gate: dark_prob_from_rate(
                LAB_BACKGROUND_RATE,
                2.0 * LAB_GATE_HALFWIDTH,
                1.0,
            ),
            gate_halfwidth: LAB_GATE_HALFWIDTH,
            signal_retention: LAB_SIGNAL_RETENTION,
        }
    }

    pub fn with_dark_prob(mut self, d: f64) -> Self {
        self.dark_prob_per_gate = d;
        self
    }

    pub fn with_efficiency(mut self, eta: f64) -> Self {
        self.efficiency = eta;
        self
    }

    pub fn with_loss(mut self, l: f64) -> Self {
        self.loss_transmission = l;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("efficiency", self.efficiency)?;
        check_probability("loss_transmission", self.loss_transmission)?;
        check_probability("dark_prob_per_gate", self.dark_prob_per_gate)?;
        check_probability("signal_retention", self.signal_retention)?;
        if !(self.gate_halfwidth.is_finite() && self.gate_halfwidth >= 0.0) {
            return Err(ScaError::InvalidParameter {
                name: "gate_halfwidth",
                reason: format!("{} is not a non-negative duration", self.gate_halfwidth),
            });
        }
        Ok(())
    }

    /// Overall probability that one incident photon produces a kept click.
    pub fn photon_detection_probability(&self) -> f64 {
        self.efficiency * self.loss_transmission * self.signal_retention
    }

    /// `1 - (1 - d) exp(-eta l n)` without input validation.
    #[inline]
    pub fn click_prob(&self, mean_photons: f64) -> f64 {
        1.0 - (1.0 - self.dark_prob_per_gate)
            * (-self.photon_detection_probability() * mean_photons).exp()
    }

    #[inline]
    pub fn no_click_prob(&self, mean_photons: f64) -> f64 {
        (1.0 - self.dark_prob_per_gate) * (-self.photon_detection_probability() * mean_photons).exp()
    }
}

/// The four detectors of the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSet {
    /// Comparison monitor.
    pub d0: DetectorModel,
    /// Subtraction tap.
    pub d1: DetectorModel,
    /// Analysis port A (constructive for a perfect output).
    pub da: DetectorModel,
    /// Analysis port B.
    pub db: DetectorModel,
}

impl DetectorSet {
    pub fn uniform(det: DetectorModel) -> Self {
        Self {
            d0: det,
            d1: det,
            da: det,
            db: det,
        }
    }

    pub fn ideal() -> Self {
        Self::uniform(DetectorModel::ideal())
    }

    pub fn validate(&self) -> Result<()> {
        self.d0.validate()?;
        self.d1.validate()?;
        self.da.validate()?;
        self.db.validate()
    }
}

/// Probability that a coherent pulse of `mean_photons` produces a click.
pub fn click_probability(mean_photons: f64, det: &DetectorModel) -> Result<f64> {
    if !(mean_photons.is_finite() && mean_photons >= 0.0) {
        return Err(ScaError::NegativePhotonNumber(mean_photons));
    }
    Ok(det.click_prob(mean_photons))
}

/// Per-gate dark probability from a background rate integrated over the
/// gate window, scaled by the fraction of background that survives gating.
/// Clamped to `[0, 1]`.
pub fn dark_prob_from_rate(background_rate: f64, gate_width: f64, gate_retention: f64) -> f64 {
    (background_rate * gate_width * gate_retention).clamp(0.0, 1.0)
}

/// Alternative reading: the gated background rate spread evenly over pulses.
pub fn dark_prob_per_pulse(background_rate: f64, gate_retention: f64, prf: f64) -> f64 {
    (background_rate * gate_retention / prf).clamp(0.0, 1.0)
}

/// Bernoulli draw with success probability `p`.
#[inline]
pub fn sample_click<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    rng.gen::<f64>() < p
}
