//! Reference experiment: four-qubit cluster-state preparation by four
//! sequential MITE stages, one per stabilizer generator.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cfunc::sin_cos;
use crate::error::{Error, Result};
use crate::mite::{
    run_stage, trajectory_rng, PhaseCorrection, Stage, StageConfig, StopRule, Tracker,
    TrajectoryRecord, DEFAULT_MAX_ROUNDS,
};
use crate::povm::{CutoffMode, OutcomeSpace, TruncationPolicy};
use crate::statevec::{
    eigendecompose, Axis, HamiltonianSpec, Matrix, PauliString, PauliTerm, StateVector,
};

/// Mutually commuting Pauli generators with ±1 coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilizerSet {
    num_qubits: usize,
    generators: Vec<PauliTerm>,
}

impl StabilizerSet {
    pub fn new(num_qubits: usize, generators: Vec<PauliTerm>) -> Result<Self> {
        for g in &generators {
            if g.coefficient.abs() != 1.0 {
                return Err(Error::InvalidPauli(format!(
                    "stabilizer {} must have coefficient +1 or -1",
                    g
                )));
            }
            if g.string.is_identity() || g.string.min_qubits() > num_qubits {
                return Err(Error::InvalidPauli(format!(
                    "stabilizer {} is not a Pauli product on {} qubits",
                    g, num_qubits
                )));
            }
        }
        for (i, a) in generators.iter().enumerate() {
            for b in &generators[i + 1..] {
                if !a.string.commutes_with(&b.string) {
                    return Err(Error::InvalidPauli(format!("{} and {} anticommute", a, b)));
                }
            }
        }
        Ok(Self {
            num_qubits,
            generators,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn generators(&self) -> &[PauliTerm] {
        &self.generators
    }

    /// Projector `∏ (I + S_i)/2` onto the joint +1 eigenspace.
    pub fn code_projector(&self) -> Result<Matrix> {
        let dim = 1usize << self.num_qubits;
        let mut p = Matrix::identity(dim, dim);
        for g in &self.generators {
            let s = g.string.to_matrix(self.num_qubits)? * num_complex::Complex64::from(g.coefficient);
            p = (Matrix::identity(dim, dim) + s) * num_complex::Complex64::from(0.5) * p;
        }
        Ok(p)
    }
}

/// `<ψ|(I + S)/2|ψ>`.
pub fn stabilizer_fidelity(state: &StateVector, generator: &PauliTerm) -> Result<f64> {
    let e = generator.coefficient * state.pauli_expectation(&generator.string)?;
    Ok((0.5 * (1.0 + e)).clamp(0.0, 1.0))
}

/// `(|0000> + |0011> + |1101> + |1110>) / 2`, qubit 1 leftmost.
pub fn cluster_state_c4() -> StateVector {
    let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); 16];
    for index in [0b0000, 0b0011, 0b1101, 0b1110] {
        amps[index] = num_complex::Complex64::new(0.5, 0.0);
    }
    StateVector::new(4, amps).expect("cluster state is normalized")
}

/// `Z1Z2`, `X3X4`, `X1X2X3`, `Z2Z3Z4`.
pub fn cluster_c4_stabilizers() -> StabilizerSet {
    let generators = ["Z1Z2", "X3X4", "X1X2X3", "Z2Z3Z4"]
        .iter()
        .map(|s| PauliTerm::unit(s.parse().expect("valid Pauli string")))
        .collect();
    StabilizerSet::new(4, generators).expect("cluster stabilizers commute")
}

/// Correction used for the `X3 - X4` stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage2Correction {
    /// `Z3`, which connects every level of `X3 - X4` with the target level.
    #[default]
    Transition,
    /// `Z1`, which commutes with the stage Hamiltonian and never corrects.
    Literal,
}

impl Stage2Correction {
    pub fn operator(self) -> PauliString {
        match self {
            Stage2Correction::Transition => PauliString::single(Axis::Z, 2),
            Stage2Correction::Literal => PauliString::single(Axis::Z, 0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct C4Options {
    pub alpha: f64,
    pub delta_target: f64,
    pub space: OutcomeSpace,
    pub max_rounds: usize,
    pub stop: StopRule,
    pub truncation: TruncationPolicy,
    pub stage2_correction: Stage2Correction,
}

impl Default for C4Options {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            delta_target: 0.5,
            space: OutcomeSpace {
                cutoff: 5,
                mode: CutoffMode::PerMode,
            },
            max_rounds: DEFAULT_MAX_ROUNDS,
            stop: StopRule::default(),
            truncation: TruncationPolicy::default(),
            stage2_correction: Stage2Correction::default(),
        }
    }
}

/// Ordered stages plus the fidelities tracked in every round.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolPlan {
    pub num_qubits: usize,
    pub stages: Vec<StageConfig>,
    pub trackers: Vec<Tracker>,
}

impl ProtocolPlan {
    pub fn new(num_qubits: usize, stages: Vec<StageConfig>, trackers: Vec<Tracker>) -> Result<Self> {
        for s in &stages {
            if s.hamiltonian.num_qubits != num_qubits {
                return Err(Error::DimensionMismatch {
                    expected: num_qubits,
                    found: s.hamiltonian.num_qubits,
                });
            }
            s.validate()?;
        }
        for t in &trackers {
            if let crate::mite::TrackerKind::Overlap(target) = &t.kind {
                if target.num_qubits() != num_qubits {
                    return Err(Error::DimensionMismatch {
                        expected: num_qubits,
                        found: target.num_qubits(),
                    });
                }
            }
        }
        Ok(Self {
            num_qubits,
            stages,
            trackers,
        })
    }

    pub fn tracker_names(&self) -> Vec<String> {
        self.trackers.iter().map(|t| t.name.clone()).collect()
    }

    /// Diagonalizes every stage and precomputes outcome tables.
    pub fn prepare(&self) -> Result<PreparedProtocol> {
        let stages = self
            .stages
            .iter()
            .cloned()
            .map(Stage::new)
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedProtocol {
            num_qubits: self.num_qubits,
            stages,
            trackers: self.trackers.clone(),
        })
    }
}

/// Trackers `F_C` and `F_1..F_4` for the cluster plan.
pub fn cluster_c4_trackers() -> Vec<Tracker> {
    let mut trackers = vec![Tracker::overlap("F_C", cluster_state_c4())];
    for (i, g) in cluster_c4_stabilizers().generators().iter().enumerate() {
        trackers.push(Tracker::stabilizer(format!("F_{}", i + 1), g.clone()));
    }
    trackers
}

/// The four cluster-state stages, in generator order.
pub fn stage_configs_c4(options: &C4Options) -> Result<ProtocolPlan> {
    let stage = |name: &str, h: &str, tau: f64, correction: PauliString, phase: PhaseCorrection| {
        Ok::<_, Error>(StageConfig {
            name: name.to_string(),
            hamiltonian: HamiltonianSpec::parse(4, h)?,
            alpha: options.alpha,
            tau,
            e_target: 0.0,
            delta_target: options.delta_target,
            space: options.space,
            correction,
            phase_correction: phase,
            stop: options.stop,
            max_rounds: options.max_rounds,
            truncation: options.truncation,
        })
    };
    let stages = vec![
        stage(
            "Z1Z2",
            "Z1 - Z2",
            PI / 8.0,
            PauliString::single(Axis::X, 0),
            PhaseCorrection::None,
        )?,
        stage(
            "X3X4",
            "X3 - X4",
            PI / 8.0,
            options.stage2_correction.operator(),
            PhaseCorrection::None,
        )?,
        stage(
            "X1X2X3",
            "-(X1 + X2 + X3) + 3",
            PI / 4.0,
            PauliString::single(Axis::Z, 0),
            PhaseCorrection::Parity,
        )?,
        stage(
            "Z2Z3Z4",
            "-(Z2 + Z3 + Z4) + 3",
            PI / 4.0,
            PauliString::single(Axis::X, 3),
            PhaseCorrection::Parity,
        )?,
    ];
    ProtocolPlan::new(4, stages, cluster_c4_trackers())
}

#[derive(Clone, Debug)]
pub struct PreparedProtocol {
    num_qubits: usize,
    stages: Vec<Stage>,
    trackers: Vec<Tracker>,
}

impl PreparedProtocol {
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn trackers(&self) -> &[Tracker] {
        &self.trackers
    }

    /// A protocol consisting of stage `index` alone.
    pub fn single_stage(&self, index: usize) -> Result<PreparedProtocol> {
        let stage = self.stages.get(index).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "stage index {} out of range (plan has {} stages)",
                index,
                self.stages.len()
            ))
        })?;
        Ok(PreparedProtocol {
            num_qubits: self.num_qubits,
            stages: vec![stage.clone()],
            trackers: self.trackers.clone(),
        })
    }
}

/// Records of every stage of one trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolRun {
    pub initial_state: StateVector,
    pub stages: Vec<TrajectoryRecord>,
    pub final_state: StateVector,
}

impl ProtocolRun {
    pub fn tracker_names(&self) -> &[String] {
        self.stages.first().map_or(&[], |s| &s.tracker_names)
    }

    pub fn final_fidelity(&self, name: &str) -> Option<f64> {
        let stage = self.stages.last()?;
        let index = stage.tracker_index(name)?;
        Some(stage.final_fidelities()[index])
    }

    pub fn total_rounds(&self) -> usize {
        self.stages.iter().map(|s| s.rounds.len()).sum()
    }
}

/// Runs all stages in order, threading the state through.
pub fn run_protocol<R: Rng + ?Sized>(
    initial: &StateVector,
    protocol: &PreparedProtocol,
    rng: &mut R,
) -> Result<ProtocolRun> {
    let mut state = initial.clone();
    let mut records = Vec::with_capacity(protocol.stages.len());
    for stage in &protocol.stages {
        let (next, record) = run_stage(&state, stage, rng, &protocol.trackers)?;
        state = next;
        records.push(record);
    }
    Ok(ProtocolRun {
        initial_state: initial.clone(),
        stages: records,
        final_state: state,
    })
}

/// Where a trajectory starts.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    /// Haar-random, drawn from the trajectory's own stream.
    Random,
    Fixed(StateVector),
}

impl InitialState {
    pub fn realize<R: Rng + ?Sized>(&self, num_qubits: usize, rng: &mut R) -> Result<StateVector> {
        match self {
            InitialState::Random => StateVector::random(num_qubits, rng),
            InitialState::Fixed(s) if s.num_qubits() == num_qubits => Ok(s.clone()),
            InitialState::Fixed(s) => Err(Error::DimensionMismatch {
                expected: 1 << num_qubits,
                found: s.dim(),
            }),
        }
    }
}

/// Trajectory `i` uses the stream seeded with `master_seed + i`.
pub fn run_trajectory(
    protocol: &PreparedProtocol,
    initial: &InitialState,
    master_seed: u64,
    index: u64,
) -> Result<ProtocolRun> {
    let mut rng = trajectory_rng(master_seed, index);
    let start = initial.realize(protocol.num_qubits, &mut rng)?;
    run_protocol(&start, protocol, &mut rng)
}

/// Independent trajectories in parallel, returned in index order.
pub fn run_ensemble(
    protocol: &PreparedProtocol,
    initial: &InitialState,
    master_seed: u64,
    trajectories: usize,
) -> Result<Vec<ProtocolRun>> {
    (0..trajectories as u64)
        .into_par_iter()
        .map(|i| run_trajectory(protocol, initial, master_seed, i))
        .collect()
}

/// Comparison of `sin(2Hτ)` against `-c·cos(π(N+1)/2)·∏σ` for `H = c·Σσ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InteractionReport {
    pub num_qubits: usize,
    pub axis: char,
    pub coefficient: f64,
    pub tau: f64,
    /// `-c·cos(π(N+1)/2)`.
    pub prefactor: f64,
    /// `<b|sin(2Hτ)|b>` on the product eigenbasis of the axis, by bit pattern.
    pub diagonal: Vec<f64>,
    /// Prediction `prefactor·(-1)^popcount(b)` on the same basis.
    pub predicted: Vec<f64>,
    /// Largest element-wise deviation between the full operators.
    pub max_deviation: f64,
}

/// Checks the long-interaction-time product identity for a total-spin
/// Hamiltonian `c·(σ_1 + ... + σ_N)`, `c = ±1`, single axis, no offset.
pub fn effective_interaction_check(h: &HamiltonianSpec, tau: f64) -> Result<InteractionReport> {
    let unsupported = |why: &str| Err(Error::Unsupported(format!("{}: {}", h, why)));
    if h.identity_offset != 0.0 {
        return unsupported("identity offset is not allowed");
    }
    let n = h.num_qubits;
    if h.terms.len() != n || n == 0 {
        return unsupported("every qubit needs exactly one single-qubit term");
    }
    let c = h.terms[0].coefficient;
    let axis = match h.terms[0].string.factors() {
        [(_, a)] => *a,
        _ => return unsupported("terms must be single-qubit"),
    };
    if c.abs() != 1.0 {
        return unsupported("coefficients must be +1 or -1");
    }
    let mut seen = vec![false; n];
    for t in &h.terms {
        match t.string.factors() {
            [(q, a)] if *a == axis && t.coefficient == c && !seen[*q] => seen[*q] = true,
            _ => return unsupported("terms must share one axis and one coefficient"),
        }
    }

    let eig = eigendecompose(h)?;
    let lhs = eig.function_of(|e| num_complex::Complex64::from(sin_cos(2.0 * e * tau).0));
    let prefactor = -c * sin_cos(PI * (n as f64 + 1.0) / 2.0).1;
    let all: Vec<usize> = (0..n).collect();
    let product = PauliString::uniform(axis, &all)?.to_matrix(n)?;
    let rhs = &product * num_complex::Complex64::from(prefactor);
    let max_deviation = (&lhs - &rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);

    let label = match axis {
        Axis::X => ('+', '-'),
        Axis::Y => ('r', 'l'),
        Axis::Z => ('0', '1'),
    };
    let mut diagonal = Vec::with_capacity(1 << n);
    let mut predicted = Vec::with_capacity(1 << n);
    for b in 0..1usize << n {
        let labels: String = (0..n)
            .map(|q| if b >> (n - 1 - q) & 1 == 0 { label.0 } else { label.1 })
            .collect();
        let basis = StateVector::product(&labels)?;
        diagonal.push(basis.expectation(&lhs)?);
        let parity = if b.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        predicted.push(prefactor * parity);
    }
    Ok(InteractionReport {
        num_qubits: n,
        axis: match axis {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        },
        coefficient: c,
        tau,
        prefactor,
        diagonal,
        predicted,
        max_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevec::OperatorKind;
    use num_complex::Complex64;

    #[test]
    fn cluster_state_amplitudes() {
        let c = cluster_state_c4();
        assert!((c.norm() - 1.0).abs() < 1e-15);
        assert_eq!(c.amplitudes()[0], Complex64::new(0.5, 0.0));
        for g in cluster_c4_stabilizers().generators() {
            let mapped = c.apply_pauli(&g.string).unwrap();
            assert!((mapped.inner(&c).unwrap() - 1.0).norm() < 1e-14);
            assert!((stabilizer_fidelity(&c, g).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn joint_eigenspace_is_the_cluster_state() {
        let p = cluster_c4_stabilizers().code_projector().unwrap();
        let trace: Complex64 = (0..16).map(|i| p[(i, i)]).sum();
        assert!((trace - 1.0).norm() < 1e-12);
        // Brute force: the only basis-state image with nonzero norm is |C4>.
        let c = cluster_state_c4();
        let projected = c.apply_matrix(&p, OperatorKind::NonUnitary).unwrap();
        assert!((projected.fidelity(&c).unwrap() - 1.0).abs() < 1e-12);
        for i in 0..16 {
            let e = StateVector::basis_state(4, i).unwrap();
            let amp = (p.column(i).iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
            let expected = c.inner(&e).unwrap().norm();
            assert!((amp - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn stabilizer_fidelity_examples() {
        let plus = StateVector::product("++++").unwrap();
        let zz = PauliTerm::unit("Z1Z2".parse().unwrap());
        assert!((stabilizer_fidelity(&plus, &zz).unwrap() - 0.5).abs() < 1e-14);
        let odd = StateVector::from_bits("0100").unwrap();
        assert!(stabilizer_fidelity(&odd, &zz).unwrap().abs() < 1e-14);
    }

    #[test]
    fn anticommuting_generators_rejected() {
        let g = |s: &str| PauliTerm::unit(s.parse().unwrap());
        assert!(StabilizerSet::new(2, vec![g("Z1"), g("X1")]).is_err());
        assert!(StabilizerSet::new(2, vec![g("Z1Z2"), g("X1X2")]).is_ok());
        let half = PauliTerm::new(0.5, "Z1".parse().unwrap()).unwrap();
        assert!(StabilizerSet::new(2, vec![half]).is_err());
    }

    #[test]
    fn plan_stage_spectra_and_generators() {
        let plan = stage_configs_c4(&C4Options::default()).unwrap();
        let energies: Vec<Vec<f64>> = plan
            .stages
            .iter()
            .map(|s| eigendecompose(&s.hamiltonian).unwrap().level_energies())
            .collect();
        assert_eq!(energies[0], vec![-2.0, 0.0, 2.0]);
        assert_eq!(energies[1], vec![-2.0, 0.0, 2.0]);
        assert_eq!(energies[2], vec![0.0, 2.0, 4.0, 6.0]);
        assert_eq!(energies[3], vec![0.0, 2.0, 4.0, 6.0]);
        for (stage, g) in plan.stages.iter().zip(cluster_c4_stabilizers().generators()) {
            assert_eq!(stage.name, g.string.to_string());
            assert!(stage.correction.min_qubits() <= 4);
        }
    }

    #[test]
    fn long_time_levels_are_cotargeted() {
        let cos2 = |e: f64| sin_cos(2.0 * e * PI / 4.0).1;
        assert_eq!(cos2(0.0), 1.0);
        assert_eq!(cos2(4.0), 1.0);
        assert_eq!(cos2(2.0), -1.0);
        assert_eq!(cos2(6.0), -1.0);
    }

    #[test]
    fn later_stages_commute_with_earlier_stabilizers() {
        // The individual terms need not commute; each round's Kraus map V·M does.
        let plan = stage_configs_c4(&C4Options::default()).unwrap();
        let protocol = plan.prepare().unwrap();
        let gens = cluster_c4_stabilizers();
        for (k, stage) in protocol.stages().iter().enumerate() {
            let config = stage.config();
            for g in &gens.generators()[..k] {
                assert!(config.correction.commutes_with(&g.string), "{} {}", config.name, g);
                let s = g.string.to_matrix(4).unwrap();
                for o in config.space.outcomes() {
                    let m = stage.model().operator(o).unwrap().to_matrix();
                    let kraus = crate::mite::phase_correction(o, config).unwrap() * m;
                    let defect = (&kraus * &s - &s * &kraus).iter().map(|z| z.norm()).fold(0.0, f64::max);
                    assert!(defect < 1e-12, "{} {} {}", config.name, g, o);
                }
            }
        }
    }

    #[test]
    fn cluster_state_is_a_fixed_point() {
        let protocol = stage_configs_c4(&C4Options::default()).unwrap().prepare().unwrap();
        let c = cluster_state_c4();
        let run = run_protocol(&c, &protocol, &mut trajectory_rng(8, 0)).unwrap();
        for stage in &run.stages {
            assert!(stage.rounds.iter().all(|r| !r.corrected));
            assert!(stage.converged);
        }
        assert!((run.final_fidelity("F_C").unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn random_states_reach_the_cluster_state() {
        let protocol = stage_configs_c4(&C4Options::default()).unwrap().prepare().unwrap();
        let runs = run_ensemble(&protocol, &InitialState::Random, 77, 8).unwrap();
        for run in &runs {
            assert!(run.final_fidelity("F_C").unwrap() > 0.99);
        }
    }

    #[test]
    fn sector_fidelity_never_degrades() {
        let protocol = stage_configs_c4(&C4Options::default()).unwrap().prepare().unwrap();
        let run = run_trajectory(&protocol, &InitialState::Random, 5, 3).unwrap();
        for (k, stage) in run.stages.iter().enumerate() {
            let index = k + 1;
            let end = stage.final_fidelities()[index];
            assert!(end > 0.999);
            for later in &run.stages[k + 1..] {
                for r in &later.rounds {
                    assert!((r.fidelities[index] - end).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn literal_stage2_correction_never_acts() {
        let options = C4Options {
            stage2_correction: Stage2Correction::Literal,
            ..C4Options::default()
        };
        let plan = stage_configs_c4(&options).unwrap();
        let h = &plan.stages[1].hamiltonian;
        assert!(h.terms.iter().all(|t| t.string.commutes_with(&plan.stages[1].correction)));
    }

    #[test]
    fn ensemble_is_deterministic_and_ordered() {
        let protocol = stage_configs_c4(&C4Options::default()).unwrap().prepare().unwrap();
        let a = run_ensemble(&protocol, &InitialState::Random, 11, 4).unwrap();
        let b = run_ensemble(&protocol, &InitialState::Random, 11, 4).unwrap();
        assert_eq!(a, b);
        let third = run_trajectory(&protocol, &InitialState::Random, 11, 2).unwrap();
        assert_eq!(a[2], third);
    }

    #[test]
    fn single_stage_slices() {
        let protocol = stage_configs_c4(&C4Options::default()).unwrap().prepare().unwrap();
        let stage3 = protocol.single_stage(2).unwrap();
        let start = StateVector::product("+++0").unwrap();
        let run = run_protocol(&start, &stage3, &mut trajectory_rng(1, 0)).unwrap();
        assert_eq!(run.stages.len(), 1);
        assert!(run.stages[0].rounds.iter().all(|r| !r.corrected));
        assert!(protocol.single_stage(4).is_err());
    }

    #[test]
    fn product_identity_small_registers() {
        let check = |n: usize, h: &str| effective_interaction_check(&HamiltonianSpec::parse(n, h).unwrap(), PI / 4.0).unwrap();
        // sin(2Hτ) = sin(-(π/2)Σσ): N = 1 gives -σ, N = 2 vanishes, N = 3 gives ∏σ.
        let r1 = check(1, "-Z1");
        assert_eq!(r1.prefactor, -1.0);
        assert!(r1.max_deviation < 1e-12);
        let r2 = check(2, "-(Z1 + Z2)");
        assert_eq!(r2.prefactor, 0.0);
        assert!(r2.diagonal.iter().all(|d| d.abs() < 1e-12));
        let r3 = check(3, "-(X1 + X2 + X3)");
        assert_eq!(r3.prefactor, 1.0);
        assert!(r3.max_deviation < 1e-12);
        for (d, p) in r3.diagonal.iter().zip(&r3.predicted) {
            assert!((d - p).abs() < 1e-12);
        }
        // Direct oracle for N = 3: E = -(3 - 2k) on k flipped spins.
        for b in 0..8usize {
            let k = b.count_ones() as f64;
            let direct = (2.0 * -(3.0 - 2.0 * k) * PI / 4.0).sin();
            assert!((r3.diagonal[b] - direct).abs() < 1e-12);
        }
        let positive = check(1, "Z1");
        assert_eq!(positive.prefactor, 1.0);
        assert!(positive.max_deviation < 1e-12);
    }

    #[test]
    fn product_identity_rejects_other_forms() {
        let h = |n, s: &str| HamiltonianSpec::parse(n, s).unwrap();
        for (n, s) in [(3, "-(X1 + X2 + X3) + 3"), (2, "Z1 + X2"), (2, "Z1Z2"), (2, "Z1 + 2*Z2"), (2, "Z1")] {
            assert!(matches!(
                effective_interaction_check(&h(n, s), PI / 4.0),
                Err(Error::Unsupported(_))
            ), "{}", s);
        }
    }

    #[test]
    fn stage3_operator_pairs_levels() {
        let protocol = stage_configs_c4(&C4Options::default()).unwrap().prepare().unwrap();
        let model = protocol.stages()[2].model();
        let levels = model.eigensystem().levels().to_vec();
        for o in OutcomeSpace::per_mode(5).outcomes() {
            let op = model.operator(o).unwrap();
            let at = |k: usize| op.diagonal_values()[levels[k].start].abs();
            assert_eq!(at(0), at(2));
            assert_eq!(at(1), at(3));
        }
    }
}
