//! Simulation and analysis of the quantum optical state comparison
//! amplifier: a nondeterministic device that amplifies coherent states drawn
//! from a known phase-symmetric set by comparing each input with a guess and
//! heralding on a photon-subtraction click.

pub mod amplifier;
pub mod analysis;
pub mod calibration;
pub mod coherent;
pub mod detector;
pub mod error;
pub mod montecarlo;

pub use amplifier::{
    acceptance_weight, enumerate_branches, figures_of_merit, figures_of_merit_conditioned,
    nominal_gain, output_mixture, success_rate, AmplifierConfig, BranchOutcome, Conditioning,
    FiguresOfMerit, StateSet,
};
pub use analysis::{
    count_probabilities, estimate_fidelity, estimate_pulse_numbers, reconstruct_density,
    visibility, AnalysisConfig, CountTable, ExponentConvention, JointClicks, PulseNumbers,
    VacuumRow,
};
pub use coherent::{beamsplitter, mixture_fidelity, overlap_sq, CoherentAmplitude, Mixture};
pub use detector::{click_probability, dark_prob_from_rate, sample_click, DetectorModel, DetectorSet};
pub use error::{Result, ScaError};
pub use montecarlo::{
    conditioned_counts, empirical_figures, simulate_run, standard_error, EmpiricalFigures, RunSpec,
    TallyTable,
};
