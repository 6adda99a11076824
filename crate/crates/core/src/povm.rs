//! QND measurement operators, outcome statistics and Born-rule sampling.
//!
//! A measurement operator is diagonal in the eigenbasis of the measured
//! Hamiltonian with entries `C(E_n τ)`. Degenerate eigenvectors share one
//! value computed from their level energy, so the operator is a function of
//! `H` whatever basis the eigensolver picked inside a degenerate block.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cfunc::{c_exact_log, check_alpha, CFuncParams, PhotonOutcome, SignedLog};
use crate::error::{Error, Result};
use crate::statevec::{EigenSystem, Matrix, StateVector};

/// How the photon cutoff limits the enumerated outcomes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffMode {
    /// `n_c <= cutoff` and `n_d <= cutoff`.
    #[default]
    PerMode,
    /// `n_c + n_d <= cutoff`.
    Total,
}

/// The finite set of outcomes considered when sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeSpace {
    pub cutoff: u32,
    pub mode: CutoffMode,
}

impl OutcomeSpace {
    pub fn per_mode(cutoff: u32) -> Self {
        Self {
            cutoff,
            mode: CutoffMode::PerMode,
        }
    }

    /// Outcomes in lexicographic `(n_c, n_d)` order.
    pub fn outcomes(&self) -> Vec<PhotonOutcome> {
        let k = self.cutoff;
        (0..=k)
            .flat_map(|n_c| {
                let max_d = match self.mode {
                    CutoffMode::PerMode => k,
                    CutoffMode::Total => k - n_c,
                };
                (0..=max_d).map(move |n_d| PhotonOutcome::new(n_c, n_d))
            })
            .collect()
    }

    pub fn contains(&self, outcome: PhotonOutcome) -> bool {
        match self.mode {
            CutoffMode::PerMode => outcome.n_c <= self.cutoff && outcome.n_d <= self.cutoff,
            CutoffMode::Total => outcome.total() <= self.cutoff as u64,
        }
    }
}

/// Thresholds on the probability mass lost to the cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub warn_above: f64,
    pub fail_above: Option<f64>,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            warn_above: 0.05,
            fail_above: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MeasurementOperator {
    eigensystem: Arc<EigenSystem>,
    diagonal: Vec<f64>,
    outcome: PhotonOutcome,
    tau: f64,
    alpha: f64,
    shots: usize,
}

impl MeasurementOperator {
    pub fn eigensystem(&self) -> &Arc<EigenSystem> {
        &self.eigensystem
    }

    /// `C(E_n τ)` for each eigenvector column, in eigenvalue order.
    pub fn diagonal_values(&self) -> &[f64] {
        &self.diagonal
    }

    /// Total counts for cumulative operators.
    pub fn outcome(&self) -> PhotonOutcome {
        self.outcome
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Number of single-shot measurements folded into this operator.
    pub fn shots(&self) -> usize {
        self.shots
    }

    pub fn to_matrix(&self) -> Matrix {
        let eig = &self.eigensystem;
        let mut scaled = eig.eigenvectors().clone();
        for (col, &d) in self.diagonal.iter().enumerate() {
            scaled.column_mut(col).scale_mut(d);
        }
        scaled * eig.eigenvectors().adjoint()
    }

    fn same_stage(&self, eig: &Arc<EigenSystem>, tau: f64, alpha: f64) -> bool {
        let same_basis = Arc::ptr_eq(&self.eigensystem, eig)
            || (self.eigensystem.eigenvalues() == eig.eigenvalues()
                && self.eigensystem.eigenvectors() == eig.eigenvectors());
        same_basis && self.tau == tau && self.alpha == alpha
    }
}

fn level_values(eig: &EigenSystem, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut diagonal = vec![0.0; eig.dim()];
    for level in eig.levels() {
        diagonal[level.columns()].fill(f(level.energy));
    }
    diagonal
}

pub fn build_operator(
    eig: &Arc<EigenSystem>,
    outcome: PhotonOutcome,
    tau: f64,
    alpha: f64,
) -> Result<MeasurementOperator> {
    let params = CFuncParams::new(alpha, outcome)?;
    Ok(MeasurementOperator {
        eigensystem: Arc::clone(eig),
        diagonal: level_values(eig, |e| c_exact_log(&params, e * tau).value()),
        outcome,
        tau,
        alpha,
        shots: 1,
    })
}

/// `∏_t C_{n_c(t) n_d(t)}(χ)`, the cumulative C-function of a record.
pub fn cumulative_c_log(alpha: f64, outcomes: &[PhotonOutcome], chi: f64) -> Result<SignedLog> {
    check_alpha(alpha)?;
    let mut acc = SignedLog::ONE;
    for &outcome in outcomes {
        acc = acc * c_exact_log(&CFuncParams::new(alpha, outcome)?, chi);
    }
    Ok(acc)
}

/// Product of single-shot operators sharing one stage. An empty sequence
/// gives the identity with outcome `(0, 0)`.
pub fn cumulative_operator(
    eig: &Arc<EigenSystem>,
    tau: f64,
    alpha: f64,
    ops: &[MeasurementOperator],
) -> Result<MeasurementOperator> {
    check_alpha(alpha)?;
    if ops.iter().any(|op| !op.same_stage(eig, tau, alpha)) {
        return Err(Error::MismatchedStages);
    }
    let outcomes: Vec<PhotonOutcome> = ops.iter().map(|op| op.outcome).collect();
    let n_c = outcomes.iter().map(|o| o.n_c).sum();
    let n_d = outcomes.iter().map(|o| o.n_d).sum();
    let diagonal = level_values(eig, |e| {
        cumulative_c_log(alpha, &outcomes, e * tau)
            .expect("alpha checked")
            .value()
    });
    Ok(MeasurementOperator {
        eigensystem: Arc::clone(eig),
        diagonal,
        outcome: PhotonOutcome::new(n_c, n_d),
        tau,
        alpha,
        shots: ops.iter().map(|op| op.shots).sum(),
    })
}

/// Transforms the state by the operator and renormalizes. Returns the
/// pre-normalization squared norm, the Born probability of the outcome.
pub fn apply_measurement(state: &StateVector, op: &MeasurementOperator) -> Result<(StateVector, f64)> {
    let eig = &op.eigensystem;
    if state.dim() != eig.dim() {
        return Err(Error::DimensionMismatch {
            expected: eig.dim(),
            found: state.dim(),
        });
    }
    let mut coeffs = eig.to_eigenbasis(state.amplitudes());
    for (c, &d) in coeffs.iter_mut().zip(&op.diagonal) {
        *c *= d;
    }
    let norm_sq: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    if norm_sq.is_nan() || norm_sq < 1e-300 {
        return Err(Error::Annihilated { norm_sq });
    }
    let next = state.with_amplitudes(eig.from_eigenbasis(&coeffs))?;
    Ok((next, norm_sq))
}

/// Outcome probabilities over a finite outcome space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeDistribution {
    /// Lexicographic in `(n_c, n_d)`.
    pub entries: Vec<(PhotonOutcome, f64)>,
    /// `1 - Σ entries`: probability of outcomes beyond the cutoff.
    pub truncated_mass: f64,
    /// Set when `truncated_mass` exceeds the policy's warning level.
    pub truncation_warning: bool,
}

impl OutcomeDistribution {
    pub fn probability(&self, outcome: PhotonOutcome) -> f64 {
        self.entries
            .binary_search_by(|(o, _)| o.cmp(&outcome))
            .map_or(0.0, |k| self.entries[k].1)
    }

    pub fn kept_mass(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }
}

/// Precomputed `C(E_l τ)` for every outcome of a space and every energy level
/// of one stage.
#[derive(Clone, Debug)]
pub struct MeasurementModel {
    eigensystem: Arc<EigenSystem>,
    tau: f64,
    alpha: f64,
    space: OutcomeSpace,
    outcomes: Vec<PhotonOutcome>,
    /// `values[k][l]` for outcome `k` and level `l`.
    values: Vec<Vec<f64>>,
}

impl MeasurementModel {
    pub fn new(eig: Arc<EigenSystem>, tau: f64, alpha: f64, space: OutcomeSpace) -> Result<Self> {
        check_alpha(alpha)?;
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "interaction time must be positive, got {}",
                tau
            )));
        }
        let outcomes = space.outcomes();
        let values = outcomes
            .iter()
            .map(|&outcome| {
                let params = CFuncParams::new(alpha, outcome).expect("alpha checked");
                eig.levels()
                    .iter()
                    .map(|l| c_exact_log(&params, l.energy * tau).value())
                    .collect()
            })
            .collect();
        Ok(Self {
            eigensystem: eig,
            tau,
            alpha,
            space,
            outcomes,
            values,
        })
    }

    pub fn eigensystem(&self) -> &Arc<EigenSystem> {
        &self.eigensystem
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn space(&self) -> OutcomeSpace {
        self.space
    }

    pub fn distribution(&self, state: &StateVector, policy: &TruncationPolicy) -> Result<OutcomeDistribution> {
        let eig = &self.eigensystem;
        if state.dim() != eig.dim() {
            return Err(Error::DimensionMismatch {
                expected: eig.dim(),
                found: state.dim(),
            });
        }
        let populations = eig.level_populations(state.amplitudes());
        let entries: Vec<(PhotonOutcome, f64)> = self
            .outcomes
            .iter()
            .zip(&self.values)
            .map(|(&o, vals)| {
                let p = populations
                    .iter()
                    .zip(vals)
                    .map(|(w, c)| w * c * c)
                    .sum::<f64>();
                (o, p)
            })
            .collect();
        let kept: f64 = entries.iter().map(|(_, p)| p).sum();
        let truncated_mass = (1.0 - kept).max(0.0);
        if let Some(limit) = policy.fail_above {
            if truncated_mass > limit {
                return Err(Error::TruncationExceeded {
                    mass: truncated_mass,
                    limit,
                });
            }
        }
        Ok(OutcomeDistribution {
            entries,
            truncated_mass,
            truncation_warning: truncated_mass > policy.warn_above,
        })
    }

    /// Operator for `outcome`, reusing the table when the outcome is inside
    /// the space.
    pub fn operator(&self, outcome: PhotonOutcome) -> Result<MeasurementOperator> {
        match self.outcomes.binary_search(&outcome) {
            Ok(k) => {
                let mut diagonal = vec![0.0; self.eigensystem.dim()];
                for (level, &v) in self.eigensystem.levels().iter().zip(&self.values[k]) {
                    diagonal[level.columns()].fill(v);
                }
                Ok(MeasurementOperator {
                    eigensystem: Arc::clone(&self.eigensystem),
                    diagonal,
                    outcome,
                    tau: self.tau,
                    alpha: self.alpha,
                    shots: 1,
                })
            }
            Err(_) => build_operator(&self.eigensystem, outcome, self.tau, self.alpha),
        }
    }
}

/// Probabilities `Σ_n |ψ_n C(E_n τ)|²` for all outcomes with both counts at
/// most `cutoff`.
pub fn outcome_distribution(
    state: &StateVector,
    eig: &Arc<EigenSystem>,
    tau: f64,
    alpha: f64,
    cutoff: u32,
) -> Result<OutcomeDistribution> {
    MeasurementModel::new(Arc::clone(eig), tau, alpha, OutcomeSpace::per_mode(cutoff))?
        .distribution(state, &TruncationPolicy::default())
}

/// Inverse-CDF draw over the kept entries, renormalized by their total.
pub fn sample_outcome<R: Rng + ?Sized>(dist: &OutcomeDistribution, rng: &mut R) -> Result<PhotonOutcome> {
    let total = dist.kept_mass();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::EmptyDistribution);
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for &(o, p) in &dist.entries {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last_positive = Some(o);
        if u < acc {
            return Ok(o);
        }
    }
    last_positive.ok_or(Error::EmptyDistribution)
}

/// `Σ M†M` over `outcomes`, as a dense matrix.
pub fn completeness_sum(
    eig: &Arc<EigenSystem>,
    tau: f64,
    alpha: f64,
    outcomes: &[PhotonOutcome],
) -> Result<Matrix> {
    let dim = eig.dim();
    let mut total = Matrix::zeros(dim, dim);
    for &o in outcomes {
        let m = build_operator(eig, o, tau, alpha)?.to_matrix();
        total += m.adjoint() * &m;
    }
    Ok(total)
}
