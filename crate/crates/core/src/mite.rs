//! Adaptive feedback controller for measurement-based imaginary time
//! evolution.
//!
//! Each round samples a photon outcome, applies the measurement operator and
//! the optional parity phase correction, then updates the cumulative counters.
//! The running energy estimate `arccos((m_c - m_d)/(m_c + m_d)) / 2τ` is
//! compared with the target; if it is out of tolerance the corrective
//! unitary is applied and the counters restart from zero.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cfunc::PhotonOutcome;
use crate::error::{Error, Result};
use crate::povm::{apply_measurement, sample_outcome, MeasurementModel, OutcomeSpace, TruncationPolicy};
use crate::statevec::{
    eigendecompose, HamiltonianSpec, Matrix, OperatorKind, PauliString, PauliTerm, StateVector,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CumulativeCounters {
    pub m_c: u64,
    pub m_d: u64,
}

impl CumulativeCounters {
    pub fn total(&self) -> u64 {
        self.m_c + self.m_d
    }

    pub fn plus(&self, outcome: PhotonOutcome) -> Self {
        Self {
            m_c: self.m_c + outcome.n_c as u64,
            m_d: self.m_d + outcome.n_d as u64,
        }
    }
}

/// Conditional phase unitary applied after each measurement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseCorrection {
    #[default]
    None,
    /// `e^{i ((n_c + n_d) mod 2) H τ}`.
    Parity,
}

/// A stage stops early once `window` consecutive rounds applied no
/// correction, every tracked fidelity moved by less than
/// `fidelity_tolerance` in each of them, and an energy estimate exists.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub window: usize,
    pub fidelity_tolerance: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            window: 10,
            fidelity_tolerance: 1e-9,
        }
    }
}

pub const DEFAULT_MAX_ROUNDS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct StageConfig {
    pub name: String,
    /// Measured Hamiltonian including any identity offset.
    pub hamiltonian: HamiltonianSpec,
    pub alpha: f64,
    pub tau: f64,
    pub e_target: f64,
    pub delta_target: f64,
    pub space: OutcomeSpace,
    pub correction: PauliString,
    pub phase_correction: PhaseCorrection,
    pub stop: StopRule,
    pub max_rounds: usize,
    pub truncation: TruncationPolicy,
}

impl StageConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{} must be positive, got {}", name, v)))
            }
        };
        positive("alpha", self.alpha)?;
        positive("tau", self.tau)?;
        if self.delta_target.is_nan() || self.delta_target <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "delta_target must be positive, got {}",
                self.delta_target
            )));
        }
        if !self.e_target.is_finite() {
            return Err(Error::InvalidParameter("e_target must be finite".into()));
        }
        if self.correction.min_qubits() > self.hamiltonian.num_qubits {
            return Err(Error::InvalidPauli(format!(
                "correction {} acts outside the {}-qubit register",
                self.correction, self.hamiltonian.num_qubits
            )));
        }
        if self.stop.window == 0 {
            return Err(Error::InvalidParameter("stop window must be at least 1".into()));
        }
        Ok(())
    }
}

/// A validated stage with its eigensystem, outcome table and phase unitary.
#[derive(Clone, Debug)]
pub struct Stage {
    config: StageConfig,
    model: MeasurementModel,
    phase_unitary: Option<Matrix>,
}

impl Stage {
    pub fn new(config: StageConfig) -> Result<Self> {
        config.validate()?;
        let eig = std::sync::Arc::new(eigendecompose(&config.hamiltonian)?);
        let phase_unitary = match config.phase_correction {
            PhaseCorrection::None => None,
            PhaseCorrection::Parity => {
                let tau = config.tau;
                Some(eig.function_of(|e| num_complex::Complex64::from_polar(1.0, e * tau)))
            }
        };
        let model = MeasurementModel::new(eig, config.tau, config.alpha, config.space)?;
        Ok(Self {
            config,
            model,
            phase_unitary,
        })
    }

    pub fn config(&self) -> &StageConfig {
        &self.config
    }

    pub fn model(&self) -> &MeasurementModel {
        &self.model
    }

    fn phase_for(&self, outcome: PhotonOutcome) -> Option<&Matrix> {
        self.phase_unitary.as_ref().filter(|_| outcome.is_odd())
    }
}

/// `arccos((m_c - m_d)/(m_c + m_d)) / 2τ`, or `None` with no counts.
pub fn estimate_energy(counters: CumulativeCounters, tau: f64) -> Option<f64> {
    let n = counters.total();
    if n == 0 {
        return None;
    }
    let r = (counters.m_c as f64 - counters.m_d as f64) / n as f64;
    Some(r.clamp(-1.0, 1.0).acos() / (2.0 * tau))
}

/// Upper end of the estimator's range, `π / 2τ`.
pub fn estimate_ceiling(tau: f64) -> f64 {
    PI / (2.0 * tau)
}

/// `true` when the corrective unitary must be applied. An absent estimate
/// counts as within tolerance.
pub fn decide_correction(e_est: Option<f64>, config: &StageConfig) -> bool {
    match e_est {
        Some(e) => (e - config.e_target).abs() >= config.delta_target || e.is_nan(),
        None => false,
    }
}

pub fn update_counters(
    counters: CumulativeCounters,
    outcome: PhotonOutcome,
    corrected: bool,
) -> CumulativeCounters {
    if corrected {
        CumulativeCounters::default()
    } else {
        counters.plus(outcome)
    }
}

/// The conditional phase unitary for `outcome`; the identity when the rule is
/// `None` or the total count is even.
pub fn phase_correction(outcome: PhotonOutcome, config: &StageConfig) -> Result<Matrix> {
    let dim = config.hamiltonian.dim();
    match config.phase_correction {
        PhaseCorrection::Parity if outcome.is_odd() => {
            crate::statevec::pauli_exponential(&config.hamiltonian, config.tau)
        }
        _ => Ok(Matrix::identity(dim, dim)),
    }
}

/// A named fidelity evaluated after every round.
#[derive(Clone, Debug, PartialEq)]
pub struct Tracker {
    pub name: String,
    pub kind: TrackerKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrackerKind {
    /// `|<target|ψ>|²`.
    Overlap(StateVector),
    /// `<ψ|(I + S)/2|ψ>` for a ±1-weighted Pauli string `S`.
    Stabilizer(PauliTerm),
}

impl Tracker {
    pub fn overlap(name: impl Into<String>, target: StateVector) -> Self {
        Self {
            name: name.into(),
            kind: TrackerKind::Overlap(target),
        }
    }

    pub fn stabilizer(name: impl Into<String>, generator: PauliTerm) -> Self {
        Self {
            name: name.into(),
            kind: TrackerKind::Stabilizer(generator),
        }
    }

    pub fn evaluate(&self, state: &StateVector) -> Result<f64> {
        match &self.kind {
            TrackerKind::Overlap(target) => target.fidelity(state),
            TrackerKind::Stabilizer(s) => {
                let e = s.coefficient * state.pauli_expectation(&s.string)?;
                Ok((0.5 * (1.0 + e)).clamp(0.0, 1.0))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundRecord {
    /// 1-based round number within the stage.
    pub round: usize,
    pub outcome: PhotonOutcome,
    /// Born probability of `outcome` in the pre-round state.
    pub probability: f64,
    /// Counters after the update of this round.
    pub counters: CumulativeCounters,
    /// Estimate from the incremented counters, the one the decision used.
    pub e_est: Option<f64>,
    pub corrected: bool,
    pub phase_applied: bool,
    pub fidelities: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub stage: String,
    pub tracker_names: Vec<String>,
    pub initial_fidelities: Vec<f64>,
    pub rounds: Vec<RoundRecord>,
    /// Largest truncated probability mass seen while sampling.
    pub max_truncated_mass: f64,
    pub final_state: StateVector,
    /// The stop rule fired before `max_rounds`.
    pub converged: bool,
}

impl TrajectoryRecord {
    pub fn final_fidelities(&self) -> &[f64] {
        self.rounds
            .last()
            .map_or(&self.initial_fidelities, |r| &r.fidelities)
    }

    pub fn tracker_index(&self, name: &str) -> Option<usize> {
        self.tracker_names.iter().position(|n| n == name)
    }

    /// Last round that applied a correction or moved any tracked fidelity by
    /// at least `tolerance`; 0 if none did.
    pub fn settled_after(&self, tolerance: f64) -> usize {
        let mut previous = &self.initial_fidelities;
        let mut last = 0;
        for r in &self.rounds {
            let moved = r
                .fidelities
                .iter()
                .zip(previous)
                .any(|(a, b)| (a - b).abs() >= tolerance);
            if r.corrected || moved {
                last = r.round;
            }
            previous = &r.fidelities;
        }
        last
    }

    /// Rounds until the stage settled: the last round that applied a
    /// correction or left tracker `index` below `threshold`, 0 if none did.
    pub fn settling_round(&self, index: usize, threshold: f64) -> usize {
        self.rounds
            .iter()
            .filter(|r| r.corrected || r.fidelities[index] < threshold)
            .map(|r| r.round)
            .max()
            .unwrap_or(0)
    }
}

fn evaluate_all(trackers: &[Tracker], state: &StateVector) -> Result<Vec<f64>> {
    trackers.iter().map(|t| t.evaluate(state)).collect()
}

struct RoundResult {
    state: StateVector,
    outcome: PhotonOutcome,
    probability: f64,
    truncated_mass: f64,
    e_est: Option<f64>,
    corrected: bool,
    phase_applied: bool,
    counters: CumulativeCounters,
}

/// One round of measurement, phase correction and feedback.
fn round<R: Rng + ?Sized>(
    stage: &Stage,
    state: &StateVector,
    counters: CumulativeCounters,
    rng: &mut R,
) -> Result<RoundResult> {
    let config = &stage.config;
    let dist = stage.model.distribution(state, &config.truncation)?;
    let outcome = sample_outcome(&dist, rng)?;
    let op = stage.model.operator(outcome)?;
    let (mut next, probability) = apply_measurement(state, &op)?;

    let phase = stage.phase_for(outcome);
    if let Some(v) = phase {
        next = next.apply_matrix(v, OperatorKind::Unitary)?;
    }

    let e_est = estimate_energy(counters.plus(outcome), config.tau);
    let corrected = decide_correction(e_est, config);
    if corrected {
        next = next.apply_pauli(&config.correction)?;
    }
    Ok(RoundResult {
        state: next,
        outcome,
        probability,
        truncated_mass: dist.truncated_mass,
        e_est,
        corrected,
        phase_applied: phase.is_some(),
        counters: update_counters(counters, outcome, corrected),
    })
}

/// Runs one stage from `state`, recording every round.
pub fn run_stage<R: Rng + ?Sized>(
    state: &StateVector,
    stage: &Stage,
    rng: &mut R,
    trackers: &[Tracker],
) -> Result<(StateVector, TrajectoryRecord)> {
    let config = &stage.config;
    if state.dim() != config.hamiltonian.dim() {
        return Err(Error::DimensionMismatch {
            expected: config.hamiltonian.dim(),
            found: state.dim(),
        });
    }
    let initial_fidelities = evaluate_all(trackers, state)?;
    let mut previous = initial_fidelities.clone();
    let mut state = state.clone();
    let mut counters = CumulativeCounters::default();
    let mut rounds: Vec<RoundRecord> = Vec::new();
    let mut max_truncated_mass: f64 = 0.0;
    // Consecutive quiet rounds: no correction and fidelity drift below tolerance.
    let mut quiet = 0usize;
    let mut converged = false;

    for index in 1..=config.max_rounds {
        let r = round(stage, &state, counters, rng)?;
        state = r.state;
        counters = r.counters;
        max_truncated_mass = max_truncated_mass.max(r.truncated_mass);

        let fidelities = evaluate_all(trackers, &state)?;
        let drift = fidelities
            .iter()
            .zip(&previous)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if !r.corrected && drift < config.stop.fidelity_tolerance {
            quiet += 1;
        } else {
            quiet = 0;
        }
        previous.clone_from(&fidelities);

        rounds.push(RoundRecord {
            round: index,
            outcome: r.outcome,
            probability: r.probability,
            counters,
            e_est: r.e_est,
            corrected: r.corrected,
            phase_applied: r.phase_applied,
            fidelities,
        });

        if quiet >= config.stop.window && counters.total() > 0 {
            converged = true;
            break;
        }
    }

    let record = TrajectoryRecord {
        stage: config.name.clone(),
        tracker_names: trackers.iter().map(|t| t.name.clone()).collect(),
        initial_fidelities,
        rounds,
        max_truncated_mass,
        final_state: state.clone(),
        converged,
    };
    Ok((state, record))
}

/// Per-trajectory seed: `master + index` with wrap-around.
pub fn trajectory_seed(master: u64, index: u64) -> u64 {
    master.wrapping_add(index)
}

pub const SEED_RULE: &str = "trajectory seed = master seed + trajectory index (wrapping u64); ChaCha8 stream";

pub fn trajectory_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trajectory_seed(master, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevec::HamiltonianSpec;
    use std::f64::consts::PI;

    fn stage1(n: usize) -> StageConfig {
        StageConfig {
            name: "zz".into(),
            hamiltonian: HamiltonianSpec::parse(n, "Z1 - Z2").unwrap(),
            alpha: 1.0,
            tau: PI / 8.0,
            e_target: 0.0,
            delta_target: 0.5,
            space: OutcomeSpace::per_mode(5),
            correction: "X1".parse().unwrap(),
            phase_correction: PhaseCorrection::None,
            stop: StopRule::default(),
            max_rounds: 100,
            truncation: TruncationPolicy::default(),
        }
    }

    fn zz_tracker() -> Tracker {
        Tracker::stabilizer("F_1", "Z1Z2".parse().unwrap())
    }

    #[test]
    fn energy_estimates() {
        let c = |m_c, m_d| CumulativeCounters { m_c, m_d };
        assert!((estimate_energy(c(3, 3), PI / 4.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(estimate_energy(c(5, 0), 0.3), Some(0.0));
        assert!((estimate_energy(c(0, 2), PI / 8.0).unwrap() - 4.0).abs() < 1e-14);
        assert_eq!(estimate_energy(c(0, 0), 0.3), None);
    }

    #[test]
    fn correction_decision() {
        let cfg = stage1(2);
        assert!(!decide_correction(Some(0.0), &cfg));
        assert!(decide_correction(Some(1.0), &cfg));
        assert!(decide_correction(Some(0.5), &cfg));
        assert!(!decide_correction(None, &cfg));
    }

    #[test]
    fn counter_updates() {
        let c = CumulativeCounters { m_c: 3, m_d: 1 };
        assert_eq!(
            update_counters(c, PhotonOutcome::new(2, 0), false),
            CumulativeCounters { m_c: 5, m_d: 1 }
        );
        assert_eq!(
            update_counters(c, PhotonOutcome::new(2, 0), true),
            CumulativeCounters::default()
        );
        let empty = CumulativeCounters::default();
        let outcome = PhotonOutcome::new(0, 0);
        let corrected = decide_correction(estimate_energy(empty.plus(outcome), 0.3), &stage1(2));
        assert!(!corrected);
        assert_eq!(update_counters(empty, outcome, corrected), empty);
    }

    #[test]
    fn parity_phase_correction() {
        let mut cfg = stage1(3);
        cfg.hamiltonian = HamiltonianSpec::parse(3, "-(X1 + X2 + X3) + 3").unwrap();
        cfg.tau = PI / 4.0;
        cfg.phase_correction = PhaseCorrection::Parity;
        let id = Matrix::identity(8, 8);
        let even = phase_correction(PhotonOutcome::new(2, 0), &cfg).unwrap();
        assert_eq!(even, id);

        // Odd parity: e^{iEπ/4} on the level with energy E = 2·(number of '-').
        let v = phase_correction(PhotonOutcome::new(1, 0), &cfg).unwrap();
        for labels in ["+++", "+-+", "--+", "---"] {
            let minus = labels.chars().filter(|&c| c == '-').count() as f64;
            let psi = StateVector::product(labels).unwrap();
            let out = psi.apply_matrix(&v, OperatorKind::Unitary).unwrap();
            let phase = num_complex::Complex64::from_polar(1.0, 2.0 * minus * PI / 4.0);
            for (a, b) in out.amplitudes().iter().zip(psi.amplitudes()) {
                assert!((a - b * phase).norm() < 1e-12);
            }
        }

        cfg.phase_correction = PhaseCorrection::None;
        assert_eq!(phase_correction(PhotonOutcome::new(1, 0), &cfg).unwrap(), id);
    }

    #[test]
    fn odd_parity_cancels_relative_sign() {
        // Outcome (1,0) gives C(0) = +c, C(π) = -c on the E = 0 and E = 4 levels;
        // after V the two components keep their relative phase.
        let mut cfg = stage1(3);
        cfg.hamiltonian = HamiltonianSpec::parse(3, "-(X1 + X2 + X3) + 3").unwrap();
        cfg.tau = PI / 4.0;
        cfg.phase_correction = PhaseCorrection::Parity;
        let stage = Stage::new(cfg.clone()).unwrap();
        let a = StateVector::product("+++").unwrap();
        let b = StateVector::product("+--").unwrap();
        let superposed: Vec<_> = a
            .amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| x + y)
            .collect();
        let psi = StateVector::new(3, superposed).unwrap();
        let op = stage.model().operator(PhotonOutcome::new(1, 0)).unwrap();
        let (measured, _) = apply_measurement(&psi, &op).unwrap();
        assert!(measured.fidelity(&psi).unwrap() < 1e-12);
        let v = phase_correction(PhotonOutcome::new(1, 0), &cfg).unwrap();
        let fixed = measured.apply_matrix(&v, OperatorKind::Unitary).unwrap();
        assert!((fixed.fidelity(&psi).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn target_eigenstate_is_a_fixed_point() {
        let stage = Stage::new(stage1(2)).unwrap();
        let psi = StateVector::from_bits("00").unwrap();
        let mut rng = trajectory_rng(5, 0);
        let (out, rec) = run_stage(&psi, &stage, &mut rng, &[zz_tracker()]).unwrap();
        assert!(rec.rounds.iter().all(|r| !r.corrected));
        assert!(rec
            .rounds
            .windows(2)
            .all(|w| w[1].counters.m_c >= w[0].counters.m_c && w[1].counters.m_d == 0));
        assert!((out.fidelity(&psi).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stage_converges_to_target_sector() {
        let stage = Stage::new(stage1(2)).unwrap();
        for seed in 0..20 {
            let mut rng = trajectory_rng(100, seed);
            let psi = StateVector::random(2, &mut rng).unwrap();
            let (out, rec) = run_stage(&psi, &stage, &mut rng, &[zz_tracker()]).unwrap();
            let f = zz_tracker().evaluate(&out).unwrap();
            assert!(f > 0.999, "seed {} F {}", seed, f);
            assert!(rec.rounds.len() <= 100);
        }
    }

    #[test]
    fn reset_happens_exactly_on_correction() {
        let stage = Stage::new(stage1(2)).unwrap();
        let mut rng = trajectory_rng(3, 1);
        let psi = StateVector::from_bits("10").unwrap();
        let (_, rec) = run_stage(&psi, &stage, &mut rng, &[zz_tracker()]).unwrap();
        assert!(rec.rounds.iter().any(|r| r.corrected));
        let mut prev = CumulativeCounters::default();
        for r in &rec.rounds {
            if r.corrected {
                assert_eq!(r.counters, CumulativeCounters::default());
            } else {
                assert_eq!(r.counters, prev.plus(r.outcome));
            }
            assert!(r.probability > 0.0);
            if let Some(e) = r.e_est {
                assert!((0.0..=estimate_ceiling(stage.config().tau) + 1e-12).contains(&e));
            }
            prev = r.counters;
        }
    }

    #[test]
    fn zero_rounds_leave_state_untouched() {
        let mut cfg = stage1(2);
        cfg.max_rounds = 0;
        let stage = Stage::new(cfg).unwrap();
        let psi = StateVector::random(2, &mut trajectory_rng(1, 1)).unwrap();
        let (out, rec) = run_stage(&psi, &stage, &mut trajectory_rng(1, 2), &[zz_tracker()]).unwrap();
        assert_eq!(out, psi);
        assert!(rec.rounds.is_empty());
        assert!(!rec.converged);
    }

    #[test]
    fn infinite_tolerance_is_pure_weak_measurement() {
        let mut cfg = stage1(2);
        cfg.delta_target = f64::INFINITY;
        cfg.max_rounds = 200;
        let stage = Stage::new(cfg).unwrap();
        for seed in 0..10 {
            let mut rng = trajectory_rng(40, seed);
            let psi = StateVector::random(2, &mut rng).unwrap();
            let (out, rec) = run_stage(&psi, &stage, &mut rng, &[]).unwrap();
            assert!(rec.rounds.iter().all(|r| !r.corrected));
            // Levels -2 and 2 share |C|, so only the split between E = 0 and
            // |E| = 2 collapses.
            let pops = stage.model().eigensystem().level_populations(out.amplitudes());
            assert!(pops[1] > 0.99 || pops[1] < 0.01, "seed {} pops {:?}", seed, pops);
        }
    }

    #[test]
    fn determinism() {
        let stage = Stage::new(stage1(4)).unwrap();
        let run = || {
            let mut rng = trajectory_rng(99, 7);
            let psi = StateVector::random(4, &mut rng).unwrap();
            run_stage(&psi, &stage, &mut rng, &[zz_tracker()]).unwrap().1
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = stage1(2);
        cfg.delta_target = 0.0;
        assert!(Stage::new(cfg).is_err());
        let mut cfg = stage1(2);
        cfg.tau = -1.0;
        assert!(Stage::new(cfg).is_err());
        let mut cfg = stage1(2);
        cfg.correction = "X3".parse().unwrap();
        assert!(Stage::new(cfg).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let stage = Stage::new(stage1(2)).unwrap();
        let psi = StateVector::from_bits("000").unwrap();
        assert!(matches!(
            run_stage(&psi, &stage, &mut trajectory_rng(0, 0), &[]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
