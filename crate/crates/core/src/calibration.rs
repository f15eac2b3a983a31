//! Laboratory parameter set and the one-parameter loss fit.
//!
//! Detector efficiency, background, gating and repetition rate are fixed at
//! their measured values. The optical transmission `l` in front of the
//! detectors was never reported, so it is fitted once to the measured
//! heralding rate and frozen as [`FITTED_LOSS`].

use crate::amplifier::{success_rate, AmplifierConfig};
use crate::detector::{DetectorModel, DetectorSet, LAB_PRF};
use crate::error::{Result, ScaError};

/// Fringe visibility of the inner (comparison) interferometer before filtering.
pub const LAB_INNER_VISIBILITY: f64 = 0.9241;
/// Fringe visibility of the outer (analysis) interferometer before filtering.
pub const LAB_OUTER_VISIBILITY: f64 = 0.9224;

/// Mean input photon number of the heralding-rate measurement.
pub const RATE_ANCHOR_ALPHA_SQ: f64 = 0.94;
/// Heralded events per second measured at [`RATE_ANCHOR_ALPHA_SQ`], two states.
pub const RATE_ANCHOR_PER_SECOND: f64 = 26_000.0;

/// Range searched for the path transmission.
pub const LOSS_BOUNDS: (f64, f64) = (0.3, 1.0);

/// Path transmission fitted by [`fit_loss`] to the heralding-rate anchor.
pub const FITTED_LOSS: f64 = 0.7268;

/// Interferometer imperfection matching a classical fringe visibility: the
/// share of light leaving the wrong port at the bright setting.
pub fn epsilon_from_visibility(visibility: f64) -> f64 {
    ((1.0 - visibility) / 2.0).clamp(0.0, 1.0)
}

/// All four detectors at laboratory values with transmission `loss`.
pub fn lab_detectors(loss: f64) -> DetectorSet {
    DetectorSet::uniform(DetectorModel::lab(loss))
}

/// Detectors with the frozen fitted transmission.
pub fn fitted_detectors() -> DetectorSet {
    lab_detectors(FITTED_LOSS)
}

/// Find the transmission `l` in `bounds` at which the two-state heralding
/// rate at `alpha_sq` equals `target_rate`. The rate grows monotonically
/// with `l`, so bisection converges; targets outside the reachable range are
/// rejected.
pub fn fit_loss(target_rate: f64, alpha_sq: f64, prf: f64, bounds: (f64, f64)) -> Result<f64> {
    let amp = AmplifierConfig::lab(alpha_sq, 2)?;
    let rate = |l: f64| {
        let d = DetectorModel::lab(l);
        success_rate(&amp, &d, &d, prf)
    };
    let (mut lo, mut hi) = bounds;
    let (r_lo, r_hi) = (rate(lo)?, rate(hi)?);
    if !(r_lo..=r_hi).contains(&target_rate) {
        return Err(ScaError::InvalidParameter {
            name: "target_rate",
            reason: format!("{target_rate} is outside the reachable range [{r_lo}, {r_hi}]"),
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate(mid)? < target_rate {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Fit against the laboratory rate anchor at the laboratory repetition rate.
pub fn fit_lab_loss() -> Result<f64> {
    fit_loss(RATE_ANCHOR_PER_SECOND, RATE_ANCHOR_ALPHA_SQ, LAB_PRF, LOSS_BOUNDS)
}
