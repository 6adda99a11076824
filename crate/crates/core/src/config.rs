//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//! trajectories = 100
//! plan = "cluster-c4"
//! initial = "random"
//! cutoff = 5
//!
//! # plan = "custom" takes its stages and trackers from the file:
//! [[stages]]
//! name = "zz"
//! hamiltonian = "Z1 - Z2"
//! tau = "pi/8"
//! correction = "X1"
//!
//! [[trackers]]
//! name = "F_1"
//! stabilizer = "Z1Z2"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mite::{PhaseCorrection, StageConfig, StopRule, Tracker, DEFAULT_MAX_ROUNDS};
use crate::povm::{CutoffMode, OutcomeSpace, TruncationPolicy};
use crate::protocols::{
    cluster_state_c4, stage_configs_c4, C4Options, InitialState, ProtocolPlan, Stage2Correction,
};
use crate::statevec::{parse_real, HamiltonianSpec, PauliString, PauliTerm, StateVector};

/// A real number written either as a literal or as an expression like `"pi/8"`.
#[derive(Clone, Debug, PartialEq)]
pub struct Real {
    value: f64,
    text: Option<String>,
}

impl Real {
    pub fn new(value: f64) -> Self {
        Self { value, text: None }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(Self {
            value: parse_real(text)?,
            text: Some(text.to_string()),
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

impl From<f64> for Real {
    fn from(value: f64) -> Self {
        Real::new(value)
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.text {
            Some(t) => f.write_str(t),
            None => write!(f, "{}", self.value),
        }
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match &self.text {
            Some(t) => s.serialize_str(t),
            None => s.serialize_f64(self.value),
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Float(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(i) => Ok(Real::new(i as f64)),
            Raw::Float(x) => Ok(Real::new(x)),
            Raw::Text(t) => Real::parse(&t).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanKind {
    #[default]
    ClusterC4,
    Custom,
}

/// One `[[stages]]` table of a custom plan. Unset fields fall back to the
/// top-level values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSection {
    pub name: Option<String>,
    pub hamiltonian: String,
    pub tau: Real,
    pub correction: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_target: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_target: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_correction: Option<PhaseCorrection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<usize>,
}

/// One `[[trackers]]` table: exactly one of `stabilizer` or `overlap`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerSection {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stabilizer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap: Option<String>,
}

fn default_trajectories() -> usize {
    1
}

fn default_initial() -> String {
    "random".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub plan: PlanKind,
    /// 1-based stage used by `run-stage`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<usize>,
    /// `random`, `cluster`, `basis:<bits>` or `product:<labels>`.
    #[serde(default = "default_initial")]
    pub initial: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_qubits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_target: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff_mode: Option<CutoffMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_warn: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_fail: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage2_correction: Option<Stage2Correction>,
    /// Subset of tracker names to evaluate; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracked: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<StageSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trackers: Vec<TrackerSection>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trajectories: default_trajectories(),
            out_dir: None,
            plan: PlanKind::default(),
            stage: None,
            initial: default_initial(),
            num_qubits: None,
            alpha: None,
            delta_target: None,
            cutoff: None,
            cutoff_mode: None,
            max_rounds: None,
            stop_window: None,
            stop_tolerance: None,
            truncation_warn: None,
            truncation_fail: None,
            stage2_correction: None,
            tracked: None,
            stages: Vec::new(),
            trackers: Vec::new(),
        }
    }
}

/// Parses `random`, `cluster`, `basis:0101`, `product:+-01`, or a bare bit
/// string.
pub fn parse_state_spec(spec: &str, num_qubits: usize) -> Result<InitialState> {
    let spec = spec.trim();
    let state = match spec.split_once(':') {
        None if spec == "random" => return Ok(InitialState::Random),
        None if spec == "cluster" => cluster_state_c4(),
        Some(("basis", bits)) => StateVector::from_bits(bits.trim())?,
        Some(("product", labels)) => StateVector::product(labels.trim())?,
        None if !spec.is_empty() && spec.chars().all(|c| c == '0' || c == '1') => {
            StateVector::from_bits(spec)?
        }
        _ => return Err(Error::Parse(format!("unknown state '{}'", spec))),
    };
    if state.num_qubits() != num_qubits {
        return Err(Error::DimensionMismatch {
            expected: 1 << num_qubits,
            found: state.dim(),
        });
    }
    Ok(InitialState::Fixed(state))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trajectories == 0 {
            return Err(Error::InvalidParameter("trajectories must be at least 1".into()));
        }
        if self.stage == Some(0) {
            return Err(Error::InvalidParameter("stage numbers start at 1".into()));
        }
        match self.plan {
            PlanKind::ClusterC4 if !self.stages.is_empty() || !self.trackers.is_empty() => {
                Err(Error::InvalidParameter(
                    "[[stages]] and [[trackers]] require plan = \"custom\"".into(),
                ))
            }
            PlanKind::Custom if self.stages.is_empty() => Err(Error::InvalidParameter(
                "a custom plan needs at least one [[stages]] table".into(),
            )),
            PlanKind::Custom if self.num_qubits.is_none() => Err(Error::InvalidParameter(
                "a custom plan needs num_qubits".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn num_qubits(&self) -> usize {
        match self.plan {
            PlanKind::ClusterC4 => 4,
            PlanKind::Custom => self.num_qubits.unwrap_or(0),
        }
    }

    fn stop_rule(&self) -> StopRule {
        let d = StopRule::default();
        StopRule {
            window: self.stop_window.unwrap_or(d.window),
            fidelity_tolerance: self.stop_tolerance.unwrap_or(d.fidelity_tolerance),
        }
    }

    fn truncation(&self) -> TruncationPolicy {
        let d = TruncationPolicy::default();
        TruncationPolicy {
            warn_above: self.truncation_warn.unwrap_or(d.warn_above),
            fail_above: self.truncation_fail.or(d.fail_above),
        }
    }

    fn space(&self, cutoff: Option<u32>) -> OutcomeSpace {
        let base = C4Options::default().space;
        OutcomeSpace {
            cutoff: cutoff.or(self.cutoff).unwrap_or(base.cutoff),
            mode: self.cutoff_mode.unwrap_or(base.mode),
        }
    }

    /// Builds the plan with every override applied.
    pub fn build_plan(&self) -> Result<ProtocolPlan> {
        self.validate()?;
        let plan = match self.plan {
            PlanKind::ClusterC4 => {
                let d = C4Options::default();
                stage_configs_c4(&C4Options {
                    alpha: self.alpha.as_ref().map_or(d.alpha, Real::value),
                    delta_target: self.delta_target.as_ref().map_or(d.delta_target, Real::value),
                    space: self.space(None),
                    max_rounds: self.max_rounds.unwrap_or(d.max_rounds),
                    stop: self.stop_rule(),
                    truncation: self.truncation(),
                    stage2_correction: self.stage2_correction.unwrap_or_default(),
                })?
            }
            PlanKind::Custom => self.custom_plan()?,
        };
        self.filter_trackers(plan)
    }

    fn custom_plan(&self) -> Result<ProtocolPlan> {
        let n = self.num_qubits();
        let defaults = C4Options::default();
        let global = |x: &Option<Real>, fallback: f64| x.as_ref().map_or(fallback, Real::value);
        let stages = self
            .stages
            .iter()
            .enumerate()
            .map(|(i, s)| {
                Ok(StageConfig {
                    name: s.name.clone().unwrap_or_else(|| format!("stage{}", i + 1)),
                    hamiltonian: HamiltonianSpec::parse(n, &s.hamiltonian)?,
                    alpha: s
                        .alpha
                        .as_ref()
                        .map_or(global(&self.alpha, defaults.alpha), Real::value),
                    tau: s.tau.value(),
                    e_target: s.e_target.as_ref().map_or(0.0, Real::value),
                    delta_target: s
                        .delta_target
                        .as_ref()
                        .map_or(global(&self.delta_target, defaults.delta_target), Real::value),
                    space: self.space(s.cutoff),
                    correction: s.correction.parse::<PauliString>()?,
                    phase_correction: s.phase_correction.unwrap_or_default(),
                    stop: self.stop_rule(),
                    max_rounds: s
                        .max_rounds
                        .or(self.max_rounds)
                        .unwrap_or(DEFAULT_MAX_ROUNDS),
                    truncation: self.truncation(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let trackers = self
            .trackers
            .iter()
            .map(|t| match (&t.stabilizer, &t.overlap) {
                (Some(s), None) => Ok(Tracker::stabilizer(t.name.clone(), s.parse::<PauliTerm>()?)),
                (None, Some(o)) => match parse_state_spec(o, n)? {
                    InitialState::Fixed(state) => Ok(Tracker::overlap(t.name.clone(), state)),
                    InitialState::Random => Err(Error::InvalidParameter(format!(
                        "tracker {} cannot target a random state",
                        t.name
                    ))),
                },
                _ => Err(Error::InvalidParameter(format!(
                    "tracker {} needs exactly one of stabilizer or overlap",
                    t.name
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        ProtocolPlan::new(n, stages, trackers)
    }

    fn filter_trackers(&self, mut plan: ProtocolPlan) -> Result<ProtocolPlan> {
        if let Some(names) = &self.tracked {
            for name in names {
                if !plan.trackers.iter().any(|t| &t.name == name) {
                    return Err(Error::InvalidParameter(format!("unknown tracker '{}'", name)));
                }
            }
            plan.trackers.retain(|t| names.contains(&t.name));
        }
        Ok(plan)
    }

    pub fn initial_state(&self) -> Result<InitialState> {
        parse_state_spec(&self.initial, self.num_qubits())
    }
}
