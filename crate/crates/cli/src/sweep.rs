//! Grid sweeps over (N, alpha^2), analytic and Monte Carlo.

use rayon::prelude::*;

use sca_core::amplifier::figures_of_merit;
use sca_core::analysis::{conditioned_visibility, estimate_class_mixture, ClassCounts};
use sca_core::montecarlo::{conditioned_offset_counts, empirical_figures, simulate_run};
use sca_core::{enumerate_branches, Conditioning, EmpiricalFigures, FiguresOfMerit, RunSpec, ScaError};

use crate::config::Config;
use crate::dataset::{Dataset, Value};
use crate::error::CliResult;

pub const KEY_COLUMNS: [&str; 2] = ["n_states", "alpha_sq"];

pub const ANALYTIC_COLUMNS: [&str; 7] = [
    "fidelity",
    "correct_state_fraction",
    "success_probability",
    "success_rate",
    "visibility_unconditioned",
    "visibility_d0_silent",
    "visibility_heralded",
];

pub const MONTECARLO_COLUMNS: [&str; 10] = [
    "mc_pulses",
    "mc_accepted",
    "mc_fidelity",
    "mc_fidelity_se",
    "mc_correct_state_fraction",
    "mc_correct_state_fraction_se",
    "mc_success_probability",
    "mc_success_probability_se",
    "mc_success_rate",
    "mc_estimated_fidelity",
];

/// Heralding conditions in visibility column order.
pub const VISIBILITY_CONDITIONS: [Conditioning; 3] = [
    Conditioning::None,
    Conditioning::D0Silent,
    Conditioning::D0SilentAndD1Fires,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticPoint {
    pub figures: FiguresOfMerit,
    pub success_rate: f64,
    /// Unconditioned, D0 silent, D0 silent and D1 fires.
    pub visibility: [f64; 3],
}

pub fn analytic_point(cfg: &Config, n_states: usize, alpha_sq: f64) -> CliResult<AnalyticPoint> {
    let amp = cfg.amplifier(alpha_sq, n_states)?;
    let dets = cfg.detector_set()?;
    let template = cfg.analysis_template()?;
    let figures = figures_of_merit(&amp, &dets.d0, &dets.d1)?;
    let mut visibility = [0.0; 3];
    for (v, condition) in visibility.iter_mut().zip(VISIBILITY_CONDITIONS) {
        *v = conditioned_visibility(&amp, &dets.d0, &dets.d1, &template, condition)?;
    }
    Ok(AnalyticPoint {
        figures,
        success_rate: figures.success_probability * cfg.sweep.prf,
        visibility,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloPoint {
    pub pulses: u64,
    pub accepted: u64,
    /// `None` when some input was never heralded.
    pub figures: Option<EmpiricalFigures>,
    /// Fidelity reconstructed from the analysis-port counts alone.
    pub estimated_fidelity: Option<f64>,
}

pub fn montecarlo_point(
    cfg: &Config,
    n_states: usize,
    alpha_sq: f64,
    seed: u64,
) -> CliResult<MonteCarloPoint> {
    let amp = cfg.amplifier(alpha_sq, n_states)?;
    let dets = cfg.detector_set()?;
    let mut spec = RunSpec::new(amp.clone(), dets, cfg.analysis_template()?, cfg.sweep.n_pulses, seed);
    spec.chunk_size = cfg.sweep.chunk_size;
    let tally = simulate_run(&spec)?;
    let heralded = Conditioning::D0SilentAndD1Fires;
    let figures = match empirical_figures(&tally, &amp, heralded) {
        Ok(f) => Some(f),
        Err(ScaError::NeverHeralded { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    // Outputs of every input are rotations of those of input 0, so the
    // per-offset counts can be analysed against input 0's branches.
    let classes: Vec<ClassCounts> = conditioned_offset_counts(&tally, heralded)
        .iter()
        .zip(enumerate_branches(&amp, 0)?)
        .map(|(o, b)| ClassCounts {
            amplitude: b.output_amplitude,
            n_a: o.n_a as f64,
            n_b: o.n_b as f64,
        })
        .collect();
    let target = amp.target(0);
    let estimated_fidelity = estimate_class_mixture(&classes, target, &dets.da, &dets.db)
        .ok()
        .map(|e| e.fidelity(target));
    Ok(MonteCarloPoint {
        pulses: tally.total(),
        accepted: tally.accepted(heralded),
        figures,
        estimated_fidelity,
    })
}

/// Grid points in output order: N outer, alpha^2 inner.
pub fn grid(cfg: &Config) -> Vec<(usize, f64)> {
    cfg.sweep
        .n_states
        .iter()
        .flat_map(|&n| cfg.sweep.alpha_sq.iter().map(move |&a| (n, a)))
        .collect()
}

pub fn sweep_columns(cfg: &Config) -> Vec<&'static str> {
    let mut cols = KEY_COLUMNS.to_vec();
    if cfg.sweep.mode.analytic() {
        cols.extend(ANALYTIC_COLUMNS);
    }
    if cfg.sweep.mode.montecarlo() {
        cols.extend(MONTECARLO_COLUMNS);
    }
    cols
}

fn sweep_row(cfg: &Config, index: usize, n: usize, alpha_sq: f64) -> CliResult<Vec<Value>> {
    let mut row: Vec<Value> = vec![n.into(), alpha_sq.into()];
    if cfg.sweep.mode.analytic() {
        let p = analytic_point(cfg, n, alpha_sq)?;
        row.extend([
            p.figures.fidelity,
            p.figures.correct_state_fraction,
            p.figures.success_probability,
            p.success_rate,
        ]
        .map(Value::from));
        row.extend(p.visibility.map(Value::from));
    }
    if cfg.sweep.mode.montecarlo() {
        let seed = cfg.sweep.seed.wrapping_add(index as u64);
        let p = montecarlo_point(cfg, n, alpha_sq, seed)?;
        let f = p.figures;
        row.extend([
            Value::from(p.pulses),
            Value::from(p.accepted),
            f.map(|f| f.fidelity).into(),
            f.map(|f| f.fidelity_se).into(),
            f.map(|f| f.correct_state_fraction).into(),
            f.map(|f| f.correct_state_fraction_se).into(),
            f.map(|f| f.success_probability).into(),
            f.map(|f| f.success_probability_se).into(),
            f.map(|f| f.success_probability * cfg.sweep.prf).into(),
            p.estimated_fidelity.into(),
        ]);
    }
    Ok(row)
}

/// One row per (N, alpha^2). Grid points run in parallel; rows keep grid
/// order.
pub fn run_sweep(cfg: &Config) -> CliResult<Dataset> {
    let rows = grid(cfg)
        .into_par_iter()
        .enumerate()
        .map(|(i, (n, a))| sweep_row(cfg, i, n, a))
        .collect::<CliResult<Vec<_>>>()?;
    let mut data = Dataset::new(&sweep_columns(cfg));
    for row in rows {
        data.push(row);
    }
    Ok(data)
}
