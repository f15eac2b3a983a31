//! TOML run configuration. Every section and key is optional; missing values
//! take the laboratory defaults. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sca_core::calibration::{epsilon_from_visibility, FITTED_LOSS};
use sca_core::detector::{dark_prob_from_rate, DetectorModel, DetectorSet, LAB_PRF};
use sca_core::montecarlo::DEFAULT_CHUNK_SIZE;
use sca_core::{AmplifierConfig, AnalysisConfig, CoherentAmplitude, StateSet};

use crate::dataset::Format;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub amplifier: AmplifierSection,
    pub detectors: DetectorsSection,
    pub analysis: AnalysisSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmplifierSection {
    /// Intensity reflectance `r1^2` of the comparison beamsplitter.
    pub comparison_reflectance: f64,
    /// Intensity transmittance `t2^2` of the subtraction beamsplitter.
    pub subtraction_transmittance: f64,
    /// Guess probabilities; only allowed when sweeping a single N.
    pub guess_distribution: Option<Vec<f64>>,
}

impl Default for AmplifierSection {
    fn default() -> Self {
        Self {
            comparison_reflectance: 0.5,
            subtraction_transmittance: 0.9,
            guess_distribution: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorPreset {
    /// Laboratory detectors with the fitted path transmission.
    #[default]
    Fitted,
    /// Laboratory detectors with no extra path loss.
    Lab,
    /// Unit efficiency, no loss, no background.
    Ideal,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorsSection {
    pub preset: DetectorPreset,
    /// Path transmission applied to all four detectors.
    pub loss_transmission: Option<f64>,
    pub d0: DetectorOverride,
    pub d1: DetectorOverride,
    pub da: DetectorOverride,
    pub db: DetectorOverride,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorOverride {
    pub efficiency: Option<f64>,
    pub loss_transmission: Option<f64>,
    pub dark_prob_per_gate: Option<f64>,
    /// Background counts per second, integrated over the full gate.
    pub background_rate: Option<f64>,
    pub gate_halfwidth: Option<f64>,
    pub signal_retention: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub epsilon: Option<f64>,
    /// Classical fringe visibility from which epsilon is derived.
    pub visibility: Option<f64>,
    pub phase_points: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            epsilon: None,
            visibility: None,
            phase_points: sca_core::analysis::DEFAULT_PHASE_POINTS,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Analytic,
    Montecarlo,
    Both,
}

impl Mode {
    pub fn analytic(self) -> bool {
        matches!(self, Mode::Analytic | Mode::Both)
    }

    pub fn montecarlo(self) -> bool {
        matches!(self, Mode::Montecarlo | Mode::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub alpha_sq: Vec<f64>,
    pub n_states: Vec<usize>,
    pub mode: Mode,
    /// Pulses per grid point in Monte Carlo mode.
    pub n_pulses: u64,
    /// Master seed; grid point `i` uses `seed + i`.
    pub seed: u64,
    pub chunk_size: u64,
    /// Pulse repetition frequency used to turn probabilities into rates.
    pub prf: f64,
}

/// `0.01, 0.02, ..., 1.00`.
pub fn default_alpha_sq_grid() -> Vec<f64> {
    (1..=100).map(|i| i as f64 / 100.0).collect()
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            alpha_sq: default_alpha_sq_grid(),
            n_states: vec![2, 4, 8],
            mode: Mode::Analytic,
            n_pulses: 1_000_000,
            seed: 1,
            chunk_size: DEFAULT_CHUNK_SIZE,
            prf: LAB_PRF,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Destination file; standard output when absent.
    pub path: Option<PathBuf>,
    /// Inferred from the path extension when absent, CSV otherwise.
    pub format: Option<Format>,
}

impl OutputSection {
    pub fn resolved_format(&self) -> Format {
        self.format.unwrap_or_else(|| match &self.path {
            Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) => Format::Json,
            _ => Format::Csv,
        })
    }
}

impl Config {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        let sweep = &self.sweep;
        if sweep.alpha_sq.is_empty() {
            return Err(CliError::config("sweep.alpha_sq: grid is empty"));
        }
        if let Some(bad) = sweep.alpha_sq.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(CliError::config(format!(
                "sweep.alpha_sq: {bad} is not a non-negative photon number"
            )));
        }
        if sweep.alpha_sq.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::config(
                "sweep.alpha_sq: values must be distinct and sorted ascending",
            ));
        }
        if sweep.n_states.is_empty() {
            return Err(CliError::config("sweep.n_states: list is empty"));
        }
        if sweep.n_states.contains(&0) {
            return Err(CliError::config("sweep.n_states: N must be at least 1"));
        }
        if sweep.mode.montecarlo() && sweep.n_pulses == 0 {
            return Err(CliError::config("sweep.n_pulses: a Monte Carlo run needs at least one pulse"));
        }
        if sweep.chunk_size == 0 {
            return Err(CliError::config("sweep.chunk_size: must be positive"));
        }
        if !(sweep.prf.is_finite() && sweep.prf > 0.0) {
            return Err(CliError::config(format!("sweep.prf: {} is not a positive rate", sweep.prf)));
        }
        if self.amplifier.guess_distribution.is_some() && sweep.n_states.len() != 1 {
            return Err(CliError::config(
                "amplifier.guess_distribution: only allowed with a single entry in sweep.n_states",
            ));
        }
        if self.analysis.epsilon.is_some() && self.analysis.visibility.is_some() {
            return Err(CliError::config(
                "analysis: set either epsilon or visibility, not both",
            ));
        }
        if let Some(v) = self.analysis.visibility {
            if !(0.0..=1.0).contains(&v) {
                return Err(CliError::config(format!("analysis.visibility: {v} is outside [0, 1]")));
            }
        }
        let template = self.analysis_template()?;
        template
            .validate()
            .map_err(|e| CliError::config(format!("analysis: {e}")))?;
        self.detector_set()?;
        for (name, v) in [
            ("amplifier.comparison_reflectance", self.amplifier.comparison_reflectance),
            ("amplifier.subtraction_transmittance", self.amplifier.subtraction_transmittance),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(CliError::config(format!("{name}: {v} is outside (0, 1]")));
            }
        }
        for &n in &sweep.n_states {
            self.amplifier(sweep.alpha_sq[0], n)?;
        }
        Ok(())
    }

    /// The four detector models after applying preset and overrides.
    pub fn detector_set(&self) -> CliResult<DetectorSet> {
        let sec = &self.detectors;
        let mut base = match sec.preset {
            DetectorPreset::Fitted => DetectorModel::lab(FITTED_LOSS),
            DetectorPreset::Lab => DetectorModel::lab(1.0),
            DetectorPreset::Ideal => DetectorModel::ideal(),
        };
        if let Some(l) = sec.loss_transmission {
            base.loss_transmission = l;
        }
        let build = |name: &str, o: &DetectorOverride| -> CliResult<DetectorModel> {
            let mut det = base;
            if let Some(v) = o.efficiency {
                det.efficiency = v;
            }
            if let Some(v) = o.loss_transmission {
                det.loss_transmission = v;
            }
            if let Some(v) = o.gate_halfwidth {
                det.gate_halfwidth = v;
            }
            if let Some(v) = o.signal_retention {
                det.signal_retention = v;
            }
            match (o.dark_prob_per_gate, o.background_rate) {
                (Some(_), Some(_)) => {
                    return Err(CliError::config(format!(
                        "detectors.{name}: set either dark_prob_per_gate or background_rate, not both"
                    )))
                }
                (Some(d), None) => det.dark_prob_per_gate = d,
                (None, Some(rate)) => {
                    det.dark_prob_per_gate = dark_prob_from_rate(rate, 2.0 * det.gate_halfwidth, 1.0)
                }
                (None, None) => {}
            }
            det.validate()
                .map_err(|e| CliError::config(format!("detectors.{name}: {e}")))?;
            Ok(det)
        };
        Ok(DetectorSet {
            d0: build("d0", &sec.d0)?,
            d1: build("d1", &sec.d1)?,
            da: build("da", &sec.da)?,
            db: build("db", &sec.db)?,
        })
    }

    pub fn epsilon(&self) -> f64 {
        match (self.analysis.epsilon, self.analysis.visibility) {
            (Some(e), _) => e,
            (None, Some(v)) => epsilon_from_visibility(v),
            (None, None) => 0.0,
        }
    }

    /// Analysis settings; the reference is filled in per input later.
    pub fn analysis_template(&self) -> CliResult<AnalysisConfig> {
        let mut cfg = AnalysisConfig::new(CoherentAmplitude::VACUUM, self.detector_set()?.da)
            .with_epsilon(self.epsilon());
        cfg.phase_points = self.analysis.phase_points;
        Ok(cfg)
    }

    pub fn amplifier(&self, alpha_sq: f64, n_states: usize) -> CliResult<AmplifierConfig> {
        let sec = &self.amplifier;
        let set = StateSet::with_mean_photons(alpha_sq, n_states)
            .map_err(|e| CliError::config(format!("sweep: {e}")))?;
        let mut amp = AmplifierConfig::new(
            sec.comparison_reflectance.sqrt(),
            sec.subtraction_transmittance.sqrt(),
            set,
        )
        .map_err(|e| CliError::config(format!("amplifier: {e}")))?;
        if let Some(dist) = &sec.guess_distribution {
            if dist.len() != n_states {
                return Err(CliError::config(format!(
                    "amplifier.guess_distribution: {} entries for N = {n_states}",
                    dist.len()
                )));
            }
            amp = amp
                .with_guess_distribution(dist.clone())
                .map_err(|e| CliError::config(format!("amplifier.guess_distribution: {e}")))?;
        }
        Ok(amp)
    }
}
