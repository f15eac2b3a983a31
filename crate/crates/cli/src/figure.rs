//! Model curves for the published visibility, fraction/fidelity and
//! success-rate plots. Only model values are emitted, never measured points.

use rayon::prelude::*;

use crate::config::Config;
use crate::dataset::{Dataset, Value};
use crate::error::CliResult;
use crate::sweep::{analytic_point, AnalyticPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FigureId {
    /// Outer-interferometer visibility for two states, three heralding levels.
    Fig3a,
    /// Correct-state fraction and fidelity, two states.
    Fig3b,
    /// Correct-state fraction and fidelity, four states.
    Fig3c,
    /// Correct-state fraction and fidelity, eight states.
    Fig3d,
    /// Heralded success rate.
    Fig4,
}

impl FigureId {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            FigureId::Fig3a => &[
                "n_states",
                "alpha_sq",
                "visibility_unconditioned",
                "visibility_d0_silent",
                "visibility_heralded",
            ],
            FigureId::Fig3b | FigureId::Fig3c | FigureId::Fig3d => {
                &["n_states", "alpha_sq", "correct_state_fraction", "fidelity"]
            }
            FigureId::Fig4 => &["n_states", "alpha_sq", "success_probability", "success_rate"],
        }
    }

    /// Set sizes plotted; the success-rate plot uses the configured list.
    fn set_sizes(self, cfg: &Config) -> Vec<usize> {
        match self {
            FigureId::Fig3a | FigureId::Fig3b => vec![2],
            FigureId::Fig3c => vec![4],
            FigureId::Fig3d => vec![8],
            FigureId::Fig4 => cfg.sweep.n_states.clone(),
        }
    }

    fn row(self, n: usize, alpha_sq: f64, p: &AnalyticPoint) -> Vec<Value> {
        let mut row: Vec<Value> = vec![n.into(), alpha_sq.into()];
        let values: Vec<f64> = match self {
            FigureId::Fig3a => p.visibility.to_vec(),
            FigureId::Fig3b | FigureId::Fig3c | FigureId::Fig3d => {
                vec![p.figures.correct_state_fraction, p.figures.fidelity]
            }
            FigureId::Fig4 => vec![p.figures.success_probability, p.success_rate],
        };
        row.extend(values.into_iter().map(Value::from));
        row
    }
}

/// Dataset for one figure over the configured alpha^2 grid.
pub fn reproduce_figure(id: FigureId, cfg: &Config) -> CliResult<Dataset> {
    let points: Vec<(usize, f64)> = id
        .set_sizes(cfg)
        .into_iter()
        .flat_map(|n| cfg.sweep.alpha_sq.iter().map(move |&a| (n, a)))
        .collect();
    let rows = points
        .into_par_iter()
        .map(|(n, a)| analytic_point(cfg, n, a).map(|p| id.row(n, a, &p)))
        .collect::<CliResult<Vec<_>>>()?;
    let mut data = Dataset::new(id.columns());
    for row in rows {
        data.push(row);
    }
    Ok(data)
}
