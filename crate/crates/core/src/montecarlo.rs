//! Pulse-by-pulse simulation of the amplifier and its analysis
//! interferometer.
//!
//! Each pulse draws an input and a guess, then samples D0 and D1 from their
//! click probabilities and (D_A, D_B) from their joint distribution. All four
//! detectors see different optical modes of a product of coherent states, so
//! the three draws are independent given the branch.
//!
//! Pulses are split into fixed-size chunks. Chunk `c` owns the ChaCha stream
//! `c` of the master seed, so the tally does not depend on how chunks are
//! scheduled across workers.

use std::f64::consts::PI;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplifier::{branch_weight, enumerate_branches, AmplifierConfig, Conditioning};
use crate::analysis::{port_click_probabilities, AnalysisConfig, CountTable};
use crate::detector::{sample_click, DetectorSet};
use crate::error::{Result, ScaError};

pub const DEFAULT_CHUNK_SIZE: u64 = 1 << 16;

/// Bits of a click pattern.
pub const D0_BIT: usize = 0b1000;
pub const D1_BIT: usize = 0b0100;
pub const DA_BIT: usize = 0b0010;
pub const DB_BIT: usize = 0b0001;
const PATTERNS: usize = 16;

/// Phase of the analysis reference relative to each input's target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseSchedule {
    Fixed(f64),
    /// Pulse `i` uses `phases[i % phases.len()]`.
    Cycle(Vec<f64>),
}

impl PhaseSchedule {
    /// `points` evenly spaced phases in `[0, 2 pi)`.
    pub fn scan(points: usize) -> Self {
        PhaseSchedule::Cycle(
            (0..points)
                .map(|j| 2.0 * PI * j as f64 / points as f64)
                .collect(),
        )
    }

    pub fn phases(&self) -> &[f64] {
        match self {
            PhaseSchedule::Fixed(phase) => std::slice::from_ref(phase),
            PhaseSchedule::Cycle(phases) => phases,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub amplifier: AmplifierConfig,
    pub detectors: DetectorSet,
    /// Only `epsilon` is used; the reference for input `m` is its target
    /// `g alpha_m` rotated by the scheduled phase, and D_A/D_B come from
    /// `detectors`.
    pub analysis: AnalysisConfig,
    pub phase: PhaseSchedule,
    pub n_pulses: u64,
    pub master_seed: u64,
    pub chunk_size: u64,
}

impl RunSpec {
    pub fn new(
        amplifier: AmplifierConfig,
        detectors: DetectorSet,
        analysis: AnalysisConfig,
        n_pulses: u64,
        master_seed: u64,
    ) -> Self {
        Self {
            amplifier,
            detectors,
            analysis,
            phase: PhaseSchedule::Fixed(0.0),
            n_pulses,
            master_seed,
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }

    pub fn with_phase(mut self, phase: PhaseSchedule) -> Self {
        self.phase = phase;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pulses == 0 {
            return Err(ScaError::InvalidParameter {
                name: "n_pulses",
                reason: "a run needs at least one pulse".into(),
            });
        }
        if self.chunk_size == 0 {
            return Err(ScaError::InvalidParameter {
                name: "chunk_size",
                reason: "must be positive".into(),
            });
        }
        if self.phase.phases().is_empty() {
            return Err(ScaError::InvalidParameter {
                name: "phase",
                reason: "phase schedule is empty".into(),
            });
        }
        self.amplifier.validate()?;
        self.detectors.validate()?;
        self.analysis.validate()
    }

    pub fn n_chunks(&self) -> u64 {
        self.n_pulses.div_ceil(self.chunk_size)
    }
}

/// Pulse counts per (input, guess, phase index, click pattern).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyTable {
    n_states: usize,
    n_phases: usize,
    counts: Vec<u64>,
}

impl TallyTable {
    pub fn new(n_states: usize, n_phases: usize) -> Self {
        Self {
            n_states,
            n_phases,
            counts: vec![0; n_states * n_states * n_phases * PATTERNS],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_phases(&self) -> usize {
        self.n_phases
    }

    #[inline]
    fn index(&self, input: usize, guess: usize, phase: usize, pattern: usize) -> usize {
        ((input * self.n_states + guess) * self.n_phases + phase) * PATTERNS + pattern
    }

    pub fn get(&self, input: usize, guess: usize, phase: usize, pattern: usize) -> u64 {
        self.counts[self.index(input, guess, phase, pattern)]
    }

    #[inline]
    pub fn record(&mut self, input: usize, guess: usize, phase: usize, pattern: usize) {
        let i = self.index(input, guess, phase, pattern);
        self.counts[i] += 1;
    }

    pub fn add(&mut self, input: usize, guess: usize, phase: usize, pattern: usize, count: u64) {
        let i = self.index(input, guess, phase, pattern);
        self.counts[i] += count;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Field-wise sum. Fails when the shapes differ.
    pub fn merge(mut self, other: &TallyTable) -> Result<TallyTable> {
        if (self.n_states, self.n_phases) != (other.n_states, other.n_phases) {
            return Err(ScaError::InvalidParameter {
                name: "tally",
                reason: format!(
                    "cannot merge a {}x{} tally into a {}x{} tally",
                    other.n_states, other.n_phases, self.n_states, self.n_phases
                ),
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(self)
    }

    /// Iterate over `(input, guess, phase, pattern, count)` for non-zero cells.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, usize, usize, u64)> + '_ {
        self.counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| {
            let pattern = i % PATTERNS;
            let rest = i / PATTERNS;
            let phase = rest % self.n_phases;
            let rest = rest / self.n_phases;
            (rest / self.n_states, rest % self.n_states, phase, pattern, c)
        })
    }

    fn sum_where(&self, keep: impl Fn(usize, usize, usize, usize) -> bool) -> u64 {
        self.cells()
            .filter(|&(m, k, p, pattern, _)| keep(m, k, p, pattern))
            .map(|c| c.4)
            .sum()
    }

    pub fn d0_clicks(&self) -> u64 {
        self.sum_where(|_, _, _, pat| pat & D0_BIT != 0)
    }

    pub fn d1_clicks(&self) -> u64 {
        self.sum_where(|_, _, _, pat| pat & D1_BIT != 0)
    }

    pub fn accepted(&self, condition: Conditioning) -> u64 {
        self.sum_where(|_, _, _, pat| accepts(condition, pat))
    }

    pub fn accepted_correct(&self, condition: Conditioning) -> u64 {
        self.sum_where(|m, k, _, pat| m == k && accepts(condition, pat))
    }

    /// D_A clicks among accepted pulses at each phase index.
    pub fn accepted_a_clicks_by_phase(&self, condition: Conditioning) -> Vec<(u64, u64)> {
        let mut out = vec![(0u64, 0u64); self.n_phases];
        for (_, _, p, pat, c) in self.cells() {
            if accepts(condition, pat) {
                out[p].1 += c;
                if pat & DA_BIT != 0 {
                    out[p].0 += c;
                }
            }
        }
        out
    }
}

#[inline]
fn accepts(condition: Conditioning, pattern: usize) -> bool {
    condition.accepts(pattern & D0_BIT != 0, pattern & D1_BIT != 0)
}

/// Pre-computed probabilities for one (input, guess, phase) cell.
#[derive(Debug, Clone, Copy)]
struct CellModel {
    p_d0: f64,
    p_d1: f64,
    /// Cumulative probabilities of the (A, B) patterns 00, 01, 10.
    ab_cdf: [f64; 3],
}

fn build_cells(spec: &RunSpec) -> Result<Vec<CellModel>> {
    let amp = &spec.amplifier;
    let dets = &spec.detectors;
    let phases = spec.phase.phases();
    let mut cells = Vec::with_capacity(amp.n_states() * amp.n_states() * phases.len());
    for m in 0..amp.n_states() {
        let target = amp.target(m);
        for branch in enumerate_branches(amp, m)? {
            for &phase in phases {
                let joint = port_click_probabilities(
                    branch.output_amplitude,
                    target.rotate(phase),
                    spec.analysis.epsilon,
                    &dets.da,
                    &dets.db,
                )?;
                let p = joint.as_array();
                cells.push(CellModel {
                    p_d0: dets.d0.click_prob(branch.d0_amplitude.mean_photon_number()),
                    p_d1: dets.d1.click_prob(branch.d1_amplitude.mean_photon_number()),
                    ab_cdf: [p[0], p[0] + p[1], p[0] + p[1] + p[2]],
                });
            }
        }
    }
    Ok(cells)
}

struct Sampler<'a> {
    n_states: usize,
    n_phases: usize,
    guesses: WeightedIndex<f64>,
    cells: &'a [CellModel],
}

impl Sampler<'_> {
    fn run_chunk(&self, spec: &RunSpec, chunk: u64) -> TallyTable {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.master_seed);
        rng.set_stream(chunk);
        let start = chunk * spec.chunk_size;
        let end = (start + spec.chunk_size).min(spec.n_pulses);
        let mut tally = TallyTable::new(self.n_states, self.n_phases);
        for pulse in start..end {
            let input = rng.gen_range(0..self.n_states);
            let guess = self.guesses.sample(&mut rng);
            let phase = (pulse % self.n_phases as u64) as usize;
            let cell = &self.cells[(input * self.n_states + guess) * self.n_phases + phase];
            let mut pattern = 0;
            if sample_click(cell.p_d0, &mut rng) {
                pattern |= D0_BIT;
            }
            if sample_click(cell.p_d1, &mut rng) {
                pattern |= D1_BIT;
            }
            let u: f64 = rng.gen();
            pattern |= cell.ab_cdf.iter().filter(|&&edge| u >= edge).count();
            tally.record(input, guess, phase, pattern);
        }
        tally
    }
}

/// Run the simulation on the current rayon pool.
pub fn simulate_run(spec: &RunSpec) -> Result<TallyTable> {
    spec.validate()?;
    let cells = build_cells(spec)?;
    let guesses = WeightedIndex::new(&spec.amplifier.guess_distribution).map_err(|e| {
        ScaError::InvalidParameter {
            name: "guess_distribution",
            reason: e.to_string(),
        }
    })?;
    let n_states = spec.amplifier.n_states();
    let n_phases = spec.phase.phases().len();
    let sampler = Sampler {
        n_states,
        n_phases,
        guesses,
        cells: &cells,
    };
    (0..spec.n_chunks())
        .into_par_iter()
        .map(|chunk| Ok(sampler.run_chunk(spec, chunk)))
        .try_reduce(
            || TallyTable::new(n_states, n_phases),
            |a, b| a.merge(&b),
        )
}

/// Run the simulation on a dedicated pool of `workers` threads.
pub fn simulate_run_with_workers(spec: &RunSpec, workers: usize) -> Result<TallyTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ScaError::InvalidParameter {
            name: "workers",
            reason: e.to_string(),
        })?;
    pool.install(|| simulate_run(spec))
}

/// Analysis-port counts among pulses passing `condition`, split by correct
/// guess (`sig`) and wrong guess (`vac`).
pub fn conditioned_counts(tally: &TallyTable, condition: Conditioning) -> CountTable {
    let mut out = CountTable::default();
    for (m, k, _, pat, c) in tally.cells() {
        if !accepts(condition, pat) {
            continue;
        }
        let a = if pat & DA_BIT != 0 { c } else { 0 };
        let b = if pat & DB_BIT != 0 { c } else { 0 };
        if m == k {
            out.n_a_sig += a;
            out.n_b_sig += b;
        } else {
            out.n_a_vac += a;
            out.n_b_vac += b;
        }
    }
    out
}

/// Accepted pulses and their analysis counts for one guess offset
/// `(guess - input) mod N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OffsetTally {
    pub pulses: u64,
    pub n_a: u64,
    pub n_b: u64,
}

/// Per-offset counts among pulses passing `condition`; entry `j` collects
/// every branch whose guess is `j` steps ahead of the input.
pub fn conditioned_offset_counts(tally: &TallyTable, condition: Conditioning) -> Vec<OffsetTally> {
    let n = tally.n_states();
    let mut out = vec![OffsetTally::default(); n];
    for (m, k, _, pat, c) in tally.cells() {
        if !accepts(condition, pat) {
            continue;
        }
        let slot = &mut out[(k + n - m) % n];
        slot.pulses += c;
        if pat & DA_BIT != 0 {
            slot.n_a += c;
        }
        if pat & DB_BIT != 0 {
            slot.n_b += c;
        }
    }
    out
}

/// Binomial standard error of the proportion `k / n`.
pub fn standard_error(k: u64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = k as f64 / n as f64;
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Exact per-pulse probabilities of the events a [`TallyTable`] counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRates {
    pub d0_click: f64,
    pub d1_click: f64,
    pub accepted: f64,
    pub accepted_correct: f64,
    /// Per-pulse rates of the conditioned count table.
    pub counts: CountTable<f64>,
}

impl ExpectedRates {
    pub fn correct_fraction(&self) -> f64 {
        self.accepted_correct / self.accepted
    }
}

/// Analytic counterpart of [`simulate_run`] followed by the tally
/// projections, averaged over the phase schedule.
pub fn expected_rates(spec: &RunSpec, condition: Conditioning) -> Result<ExpectedRates> {
    spec.validate()?;
    let amp = &spec.amplifier;
    let dets = &spec.detectors;
    let n = amp.n_states();
    let phases = spec.phase.phases();
    let input_prior = 1.0 / n as f64;
    let phase_prior = 1.0 / phases.len() as f64;
    let mut rates = ExpectedRates {
        d0_click: 0.0,
        d1_click: 0.0,
        accepted: 0.0,
        accepted_correct: 0.0,
        counts: CountTable::default(),
    };
    for m in 0..n {
        let target = amp.target(m);
        for branch in enumerate_branches(amp, m)? {
            let w = input_prior * branch.prior_probability;
            rates.d0_click += w * dets.d0.click_prob(branch.d0_amplitude.mean_photon_number());
            rates.d1_click += w * dets.d1.click_prob(branch.d1_amplitude.mean_photon_number());
            let acc = input_prior * branch_weight(&branch, &dets.d0, &dets.d1, condition);
            rates.accepted += acc;
            if branch.is_correct_guess() {
                rates.accepted_correct += acc;
            }
            for &phase in phases {
                let joint = port_click_probabilities(
                    branch.output_amplitude,
                    target.rotate(phase),
                    spec.analysis.epsilon,
                    &dets.da,
                    &dets.db,
                )?;
                let (a, b) = (
                    acc * phase_prior * joint.p_a(),
                    acc * phase_prior * joint.p_b(),
                );
                if branch.is_correct_guess() {
                    rates.counts.n_a_sig += a;
                    rates.counts.n_b_sig += b;
                } else {
                    rates.counts.n_a_vac += a;
                    rates.counts.n_b_vac += b;
                }
            }
        }
    }
    Ok(rates)
}

/// Figures of merit estimated from a tally, each with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalFigures {
    pub fidelity: f64,
    pub fidelity_se: f64,
    pub correct_state_fraction: f64,
    pub correct_state_fraction_se: f64,
    pub success_probability: f64,
    pub success_probability_se: f64,
}

/// Monte Carlo counterpart of the analytic figures of merit. The output of
/// each input is the mixture of branch outputs weighted by how often each
/// branch was accepted; per-input values are averaged with equal weight.
pub fn empirical_figures(
    tally: &TallyTable,
    amplifier: &AmplifierConfig,
    condition: Conditioning,
) -> Result<EmpiricalFigures> {
    let n = amplifier.n_states();
    if tally.n_states() != n {
        return Err(ScaError::InvalidParameter {
            name: "tally",
            reason: format!("tally has {} states, amplifier has {n}", tally.n_states()),
        });
    }
    let mut accepted = vec![0u64; n * n];
    for (m, k, _, pat, c) in tally.cells() {
        if accepts(condition, pat) {
            accepted[m * n + k] += c;
        }
    }
    let (mut fid, mut fid_var, mut frac, mut frac_var) = (0.0, 0.0, 0.0, 0.0);
    for m in 0..n {
        let row = &accepted[m * n..(m + 1) * n];
        let total: u64 = row.iter().sum();
        if total == 0 {
            return Err(ScaError::NeverHeralded { input_index: m });
        }
        let total_f = total as f64;
        let target = amplifier.target(m);
        let (mut mean, mut second) = (0.0, 0.0);
        for branch in enumerate_branches(amplifier, m)? {
            let share = row[branch.guess_index] as f64 / total_f;
            let o = crate::coherent::overlap_sq(branch.output_amplitude, target);
            mean += share * o;
            second += share * o * o;
        }
        fid += mean;
        fid_var += (second - mean * mean).max(0.0) / total_f;
        let f = row[m] as f64 / total_f;
        frac += f;
        frac_var += f * (1.0 - f) / total_f;
    }
    let nf = n as f64;
    let accepted_all: u64 = accepted.iter().sum();
    Ok(EmpiricalFigures {
        fidelity: fid / nf,
        fidelity_se: fid_var.sqrt() / nf,
        correct_state_fraction: frac / nf,
        correct_state_fraction_se: frac_var.sqrt() / nf,
        success_probability: accepted_all as f64 / tally.total() as f64,
        success_probability_se: standard_error(accepted_all, tally.total()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherent::CoherentAmplitude;
    use crate::detector::DetectorModel;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn spec(alpha_sq: f64, n: usize, dets: DetectorSet, pulses: u64, seed: u64) -> RunSpec {
        RunSpec::new(
            AmplifierConfig::lab(alpha_sq, n).unwrap(),
            dets,
            AnalysisConfig::new(CoherentAmplitude::VACUUM, dets.da),
            pulses,
            seed,
        )
    }

    #[test]
    fn standard_error_examples() {
        assert_eq!(standard_error(0, 10), 0.0);
        assert_eq!(standard_error(10, 10), 0.0);
        assert_abs_diff_eq!(standard_error(500, 1000), 0.015811, epsilon = 1e-6);
    }

    #[test]
    fn zero_pulse_run_rejected() {
        let s = spec(0.5, 2, DetectorSet::ideal(), 0, 1);
        assert!(matches!(
            simulate_run(&s),
            Err(ScaError::InvalidParameter { name: "n_pulses", .. })
        ));
    }

    #[test]
    fn dark_input_never_clicks() {
        let s = spec(0.0, 4, DetectorSet::ideal(), 50_000, 3);
        let t = simulate_run(&s).unwrap();
        assert_eq!(t.total(), 50_000);
        assert_eq!(t.d0_clicks(), 0);
        assert_eq!(t.d1_clicks(), 0);
        assert_eq!(t.sum_where(|_, _, _, pat| pat != 0), 0);
        assert_eq!(t.accepted(Conditioning::D0SilentAndD1Fires), 0);
    }

    #[test]
    fn ideal_two_state_heralds_only_correct_guesses() {
        let s = spec(0.8, 2, DetectorSet::ideal(), 300_000, 99);
        let t = simulate_run(&s).unwrap();
        let c = Conditioning::D0SilentAndD1Fires;
        assert!(t.accepted(c) > 0);
        assert_eq!(t.accepted(c), t.accepted_correct(c));
        let counts = conditioned_counts(&t, c);
        assert_eq!(counts.n_a_vac, 0);
        assert_eq!(counts.n_b_vac, 0);
        // A perfect output at phase 0 never reaches D_B.
        assert_eq!(counts.n_b_sig, 0);
    }

    #[test]
    fn unconditioned_counts_cover_every_pulse() {
        let dets = DetectorSet::uniform(DetectorModel::lab(0.7));
        let s = spec(0.6, 4, dets, 100_000, 5);
        let t = simulate_run(&s).unwrap();
        assert_eq!(t.total(), 100_000);
        assert_eq!(t.accepted(Conditioning::None), 100_000);
        let per_offset = conditioned_offset_counts(&t, Conditioning::None);
        assert_eq!(per_offset.iter().map(|o| o.pulses).sum::<u64>(), 100_000);
        let counts = conditioned_counts(&t, Conditioning::None);
        let a_total = t.sum_where(|_, _, _, pat| pat & DA_BIT != 0);
        assert_eq!(counts.n_a_sig + counts.n_a_vac, a_total);
    }

    #[test]
    fn projection_of_synthetic_tally() {
        let mut t = TallyTable::new(2, 1);
        t.add(0, 0, 0, D1_BIT | DA_BIT, 7); // heralded, A
        t.add(0, 0, 0, D1_BIT | DA_BIT | DB_BIT, 2); // heralded, A and B
        t.add(1, 0, 0, D1_BIT | DB_BIT, 3); // heralded wrong guess, B
        t.add(1, 1, 0, D0_BIT | D1_BIT | DA_BIT, 11); // D0 fired
        t.add(0, 1, 0, DA_BIT, 5); // D1 silent
        let full = conditioned_counts(&t, Conditioning::D0SilentAndD1Fires);
        assert_eq!(
            full,
            CountTable { n_a_sig: 9, n_b_sig: 2, n_a_vac: 0, n_b_vac: 3 }
        );
        let d0 = conditioned_counts(&t, Conditioning::D0Silent);
        assert_eq!(
            d0,
            CountTable { n_a_sig: 9, n_b_sig: 2, n_a_vac: 5, n_b_vac: 3 }
        );
        let none = conditioned_counts(&t, Conditioning::None);
        assert_eq!(none.n_a_sig, 20);
        assert_eq!(t.total(), 28);
    }

    #[test]
    fn merge_rejects_shape_mismatch() {
        assert!(TallyTable::new(2, 1).merge(&TallyTable::new(4, 1)).is_err());
    }

    #[test]
    fn same_seed_same_tally_any_worker_count() {
        let dets = DetectorSet::uniform(DetectorModel::lab(0.7).with_dark_prob(1e-3));
        let mut s = spec(0.4, 8, dets, 200_000, 1234);
        s.chunk_size = 10_000;
        let one = simulate_run_with_workers(&s, 1).unwrap();
        let four = simulate_run_with_workers(&s, 4).unwrap();
        assert_eq!(one, four);
        let mut other = s.clone();
        other.master_seed = 1235;
        assert_ne!(simulate_run_with_workers(&other, 2).unwrap(), one);
    }

    #[test]
    fn chunks_merge_to_full_run() {
        let dets = DetectorSet::uniform(DetectorModel::lab(0.9));
        let mut s = spec(0.5, 4, dets, 50_000, 77);
        s.chunk_size = 4_096;
        let cells = build_cells(&s).unwrap();
        let sampler = Sampler {
            n_states: 4,
            n_phases: 1,
            guesses: WeightedIndex::new(&s.amplifier.guess_distribution).unwrap(),
            cells: &cells,
        };
        let merged = (0..s.n_chunks())
            .rev()
            .map(|c| sampler.run_chunk(&s, c))
            .try_fold(TallyTable::new(4, 1), |acc, t| acc.merge(&t))
            .unwrap();
        assert_eq!(merged, simulate_run(&s).unwrap());
    }

    #[test]
    fn phase_cycle_tallies_each_setting() {
        let s = spec(0.5, 2, DetectorSet::ideal(), 8_000, 8).with_phase(PhaseSchedule::scan(8));
        let t = simulate_run(&s).unwrap();
        assert_eq!(t.n_phases(), 8);
        let by_phase = t.accepted_a_clicks_by_phase(Conditioning::None);
        assert!(by_phase.iter().all(|&(_, n)| n == 1_000));
    }

    #[test]
    fn empirical_figures_track_analytic() {
        let dets = DetectorSet::uniform(DetectorModel::lab(0.8));
        for n in [2, 4] {
            let s = spec(0.5, n, dets, 400_000, 77);
            let tally = simulate_run(&s).unwrap();
            let emp = empirical_figures(&tally, &s.amplifier, Conditioning::D0SilentAndD1Fires).unwrap();
            let exact = crate::amplifier::figures_of_merit(&s.amplifier, &dets.d0, &dets.d1).unwrap();
            assert!((emp.fidelity - exact.fidelity).abs() <= 5.0 * emp.fidelity_se.max(1e-12));
            assert!(
                (emp.correct_state_fraction - exact.correct_state_fraction).abs()
                    <= 5.0 * emp.correct_state_fraction_se.max(1e-12)
            );
            assert!(
                (emp.success_probability - exact.success_probability).abs()
                    <= 5.0 * emp.success_probability_se
            );
        }
    }

    #[test]
    fn empirical_figures_need_heralds() {
        let s = spec(0.5, 2, DetectorSet::ideal(), 10, 1);
        let empty = TallyTable::new(2, 1);
        assert!(matches!(
            empirical_figures(&empty, &s.amplifier, Conditioning::None),
            Err(ScaError::NeverHeralded { .. })
        ));
    }

    #[test]
    fn frequencies_match_expected_rates() {
        let dets = DetectorSet::uniform(DetectorModel::lab(0.8).with_dark_prob(1e-4));
        let s = spec(0.5, 4, dets, 400_000, 42);
        let t = simulate_run(&s).unwrap();
        let n = s.n_pulses;
        let c = Conditioning::D0SilentAndD1Fires;
        let rates = expected_rates(&s, c).unwrap();
        let check = |k: u64, p: f64| {
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            let f = k as f64 / n as f64;
            assert!((f - p).abs() <= 5.0 * sigma, "freq {f} vs {p} (sigma {sigma})");
        };
        check(t.d0_clicks(), rates.d0_click);
        check(t.d1_clicks(), rates.d1_click);
        check(t.accepted(c), rates.accepted);
        let counts = conditioned_counts(&t, c);
        check(counts.n_a_sig, rates.counts.n_a_sig);
        check(counts.n_a_vac, rates.counts.n_a_vac);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn merge_is_commutative_and_associative(
            seeds in proptest::collection::vec(0u64..1000, 3), a2 in 0.0..2.0f64
        ) {
            let dets = DetectorSet::uniform(DetectorModel::lab(0.7));
            let runs: Vec<TallyTable> = seeds
                .iter()
                .map(|&seed| simulate_run(&spec(a2, 2, dets, 500, seed)).unwrap())
                .collect();
            let left = runs[0].clone().merge(&runs[1]).unwrap().merge(&runs[2]).unwrap();
            let right = runs[0].clone().merge(&runs[2].clone().merge(&runs[1]).unwrap()).unwrap();
            prop_assert_eq!(&left, &right);
            prop_assert_eq!(left.total(), 1500);
        }
    }
}
