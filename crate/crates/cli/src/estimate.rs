//! Two-state pulse-number and fidelity estimation from analysis-port counts.

use std::fmt;
use std::path::Path;

use serde::Serialize;

use sca_core::analysis::{estimate_pulse_numbers_with, reconstruct_density};
use sca_core::{estimate_fidelity, CountTable, ExponentConvention, ScaError, VacuumRow};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateParams {
    /// Target photon number `g^2 alpha^2`.
    pub g2a2: f64,
    /// Overall detection probability `eta l` at the analysis ports.
    pub eta_l: f64,
    pub vacuum_row: VacuumRow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateReport {
    pub n_sig: f64,
    pub n_vac: f64,
    pub p_signal: f64,
    pub p_vacuum: f64,
    pub fidelity_standard: f64,
    pub fidelity_doubled_exponent: f64,
    pub vacuum_row: VacuumRow,
}

/// Read a count table from TOML, or JSON when the extension is `.json`.
pub fn read_counts(path: &Path) -> CliResult<CountTable<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let malformed = |message: String| CliError::MalformedInput {
        path: path.to_path_buf(),
        message,
    };
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let counts: CountTable<f64> = if is_json {
        serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| malformed(e.to_string()))?
    };
    for (name, v) in [
        ("n_a_sig", counts.n_a_sig),
        ("n_b_sig", counts.n_b_sig),
        ("n_a_vac", counts.n_a_vac),
        ("n_b_vac", counts.n_b_vac),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(malformed(format!("{name} = {v} is not a non-negative count")));
        }
    }
    Ok(counts)
}

pub fn run_estimator(counts: &CountTable<f64>, params: &EstimateParams) -> CliResult<EstimateReport> {
    let pulses = estimate_pulse_numbers_with(counts, params.g2a2, params.eta_l, params.vacuum_row)?;
    if !(pulses.total() > 0.0) {
        return Err(ScaError::InsufficientSignal(pulses.total()).into());
    }
    let mixture = reconstruct_density(pulses.signal, pulses.vacuum, sca_core::CoherentAmplitude::VACUUM)?;
    let weights = mixture.components();
    Ok(EstimateReport {
        n_sig: pulses.signal,
        n_vac: pulses.vacuum,
        p_signal: weights[0].weight,
        p_vacuum: weights[1].weight,
        fidelity_standard: estimate_fidelity(
            pulses.signal,
            pulses.vacuum,
            params.g2a2,
            ExponentConvention::Standard,
        )?,
        fidelity_doubled_exponent: estimate_fidelity(
            pulses.signal,
            pulses.vacuum,
            params.g2a2,
            ExponentConvention::DoubledExponent,
        )?,
        vacuum_row: params.vacuum_row,
    })
}

impl fmt::Display for EstimateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let row = match self.vacuum_row {
            VacuumRow::PortMarginal => "port-marginal",
            VacuumRow::DoubledExponent => "doubled-exponent",
        };
        writeln!(f, "vacuum row convention       {row}")?;
        writeln!(f, "N_sig                       {:.6}", self.n_sig)?;
        writeln!(f, "N_vac                       {:.6}", self.n_vac)?;
        writeln!(f, "P(g alpha)                  {:.9}", self.p_signal)?;
        writeln!(f, "P(0)                        {:.9}", self.p_vacuum)?;
        writeln!(f, "fidelity, exp(-g2a2)        {:.9}", self.fidelity_standard)?;
        write!(f, "fidelity, exp(-2 g2a2)      {:.9}", self.fidelity_doubled_exponent)
    }
}
