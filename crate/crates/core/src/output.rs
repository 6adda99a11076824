//! CSV and JSON writers for trajectories, C-function tables and ensemble
//! summaries.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use statrs::statistics::{Data, Max, Min, OrderStatistics};

use crate::cfunc::CFuncRow;
use crate::error::{Error, Result};
use crate::mite::SEED_RULE;
use crate::protocols::ProtocolRun;

/// Formats like C's `%.12g`.
pub fn format_float(x: f64) -> String {
    format_significant(x, 12)
}

/// `%.{digits}g` formatting with trailing zeros removed.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exponent) = sci.split_once('e').expect("exponent present");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if exponent < -4 || exponent >= digits as i32 {
        let mantissa = strip_zeros(mantissa);
        let sign = if exponent < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", mantissa, sign, exponent.abs())
    } else {
        let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Parse(format!("{}: {:?}", path.display(), other)),
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub const TRAJECTORY_COLUMNS: [&str; 8] =
    ["stage", "round", "n_c", "n_d", "m_c", "m_d", "E_est", "corrected"];

/// Writes one row per round; `first_stage` numbers the first record.
pub fn write_trajectory_csv<W: Write>(writer: W, run: &ProtocolRun, first_stage: usize) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = TRAJECTORY_COLUMNS.to_vec();
    header.extend(run.tracker_names().iter().map(String::as_str));
    w.write_record(&header)?;
    for (offset, stage) in run.stages.iter().enumerate() {
        let stage_number = (first_stage + offset).to_string();
        for r in &stage.rounds {
            let mut row = vec![
                stage_number.clone(),
                r.round.to_string(),
                r.outcome.n_c.to_string(),
                r.outcome.n_d.to_string(),
                r.counters.m_c.to_string(),
                r.counters.m_d.to_string(),
                r.e_est.map(format_float).unwrap_or_default(),
                (r.corrected as u8).to_string(),
            ];
            row.extend(r.fidelities.iter().map(|&f| format_float(f)));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn trajectory_csv_string(run: &ProtocolRun, first_stage: usize) -> Result<String> {
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, run, first_stage).map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

/// Long-format table: one row per outcome and grid point.
pub fn write_cfunc_csv<W: Write>(writer: W, rows: &[CFuncRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n_c", "n_d", "chi", "exact", "approx1", "approx2"])?;
    for r in rows {
        w.write_record([
            r.n_c.to_string(),
            r.n_d.to_string(),
            format_float(r.chi),
            format_float(r.exact),
            format_float(r.approx1),
            format_float(r.approx2),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_cfunc_csv(path: &Path, rows: &[CFuncRow]) -> Result<()> {
    let file = fs::File::create(path).map_err(io_error(path))?;
    write_cfunc_csv(std::io::BufWriter::new(file), rows).map_err(|e| csv_error(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    pub mean: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let mut data = Data::new(values.to_vec());
        Some(Self {
            min: data.min(),
            q25: data.lower_quartile(),
            median: data.median(),
            q75: data.upper_quartile(),
            max: data.max(),
            mean,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FidelitySummary {
    pub tracker: String,
    pub values: Vec<f64>,
    pub quantiles: Option<Quantiles>,
    pub fraction_at_least_0_99: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageSummary {
    pub stage: usize,
    pub name: String,
    pub converged_fraction: f64,
    /// Rounds executed.
    pub rounds: Option<Quantiles>,
    /// Last round with a correction or a fidelity change of at least 1e-9.
    pub settled_after: Option<Quantiles>,
    pub corrections: Option<Quantiles>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub seed: u64,
    pub seed_rule: &'static str,
    pub trajectories: usize,
    pub trackers: Vec<String>,
    pub final_fidelities: Vec<FidelitySummary>,
    pub total_rounds: Option<Quantiles>,
    pub stages: Vec<StageSummary>,
    pub max_truncated_mass: f64,
}

pub const SETTLING_TOLERANCE: f64 = 1e-9;

pub fn summarize(runs: &[ProtocolRun], seed: u64, first_stage: usize) -> EnsembleSummary {
    let trackers: Vec<String> = runs.first().map_or(Vec::new(), |r| r.tracker_names().to_vec());
    let final_fidelities = trackers
        .iter()
        .map(|name| {
            let values: Vec<f64> = runs.iter().filter_map(|r| r.final_fidelity(name)).collect();
            let good = values.iter().filter(|&&f| f >= 0.99).count();
            FidelitySummary {
                tracker: name.clone(),
                quantiles: Quantiles::of(&values),
                fraction_at_least_0_99: good as f64 / values.len().max(1) as f64,
                values,
            }
        })
        .collect();
    let stage_count = runs.first().map_or(0, |r| r.stages.len());
    let stages = (0..stage_count)
        .map(|k| {
            let records: Vec<_> = runs.iter().map(|r| &r.stages[k]).collect();
            let collect = |f: &dyn Fn(&crate::mite::TrajectoryRecord) -> f64| {
                Quantiles::of(&records.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            StageSummary {
                stage: first_stage + k,
                name: records[0].stage.clone(),
                converged_fraction: records.iter().filter(|r| r.converged).count() as f64
                    / records.len() as f64,
                rounds: collect(&|r| r.rounds.len() as f64),
                settled_after: collect(&|r| r.settled_after(SETTLING_TOLERANCE) as f64),
                corrections: collect(&|r| r.rounds.iter().filter(|x| x.corrected).count() as f64),
            }
        })
        .collect();
    let totals: Vec<f64> = runs.iter().map(|r| r.total_rounds() as f64).collect();
    let max_truncated_mass = runs
        .iter()
        .flat_map(|r| r.stages.iter().map(|s| s.max_truncated_mass))
        .fold(0.0, f64::max);
    EnsembleSummary {
        seed,
        seed_rule: SEED_RULE,
        trajectories: runs.len(),
        trackers,
        final_fidelities,
        total_rounds: Quantiles::of(&totals),
        stages,
        max_truncated_mass,
    }
}

pub fn trajectory_stem(index: usize) -> String {
    format!("trajectory_{:04}", index)
}

/// Paths written by [`write_ensemble`].
#[derive(Clone, Debug, Default)]
pub struct WrittenFiles {
    pub csv: Vec<PathBuf>,
    pub json: Vec<PathBuf>,
    pub summary: PathBuf,
}

/// Writes `trajectory_NNNN.csv`, `trajectory_NNNN.json` and `summary.json`.
pub fn write_ensemble(
    dir: &Path,
    runs: &[ProtocolRun],
    seed: u64,
    first_stage: usize,
) -> Result<WrittenFiles> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let mut written = WrittenFiles::default();
    for (i, run) in runs.iter().enumerate() {
        let csv_path = dir.join(format!("{}.csv", trajectory_stem(i)));
        let file = fs::File::create(&csv_path).map_err(io_error(&csv_path))?;
        write_trajectory_csv(std::io::BufWriter::new(file), run, first_stage)
            .map_err(|e| csv_error(&csv_path, e))?;
        written.csv.push(csv_path);

        let json_path = dir.join(format!("{}.json", trajectory_stem(i)));
        write_json(&json_path, run)?;
        written.json.push(json_path);
    }
    let summary_path = dir.join("summary.json");
    write_json(&summary_path, &summarize(runs, seed, first_stage))?;
    written.summary = summary_path;
    Ok(written)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n").map_err(io_error(path))
}
