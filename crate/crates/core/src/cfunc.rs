//! Photon-counting amplitude functions of the QND measurement.
//!
//! For an energy eigenstate with phase `χ = E·τ`, detecting `n_c` and `n_d`
//! photons in the two output ports multiplies its amplitude by
//!
//! ```text
//! C(χ) = α^(n_c+n_d) e^(-α²/2) / sqrt(n_c! n_d!) · cos^n_c(χ) · sin^n_d(χ)
//! ```
//!
//! Everything here is evaluated in log space with explicit sign tracking so
//! that large photon numbers neither overflow `α^n` nor underflow `cos^n`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Photon counts `(n_c, n_d)` in the two detectors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PhotonOutcome {
    pub n_c: u32,
    pub n_d: u32,
}

impl PhotonOutcome {
    pub const fn new(n_c: u32, n_d: u32) -> Self {
        Self { n_c, n_d }
    }

    pub fn total(&self) -> u64 {
        self.n_c as u64 + self.n_d as u64
    }

    pub fn is_odd(&self) -> bool {
        self.total() % 2 == 1
    }
}

impl fmt::Display for PhotonOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.n_c, self.n_d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CFuncParams {
    alpha: f64,
    pub outcome: PhotonOutcome,
}

impl CFuncParams {
    pub fn new(alpha: f64, outcome: PhotonOutcome) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { alpha, outcome })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "coherent amplitude must be finite and positive, got {}",
            alpha
        )));
    }
    Ok(())
}

/// A real number stored as `±exp(ln_abs)`; zero has `ln_abs = -∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedLog {
    pub ln_abs: f64,
    pub negative: bool,
}

impl SignedLog {
    pub const ONE: SignedLog = SignedLog {
        ln_abs: 0.0,
        negative: false,
    };
    pub const ZERO: SignedLog = SignedLog {
        ln_abs: f64::NEG_INFINITY,
        negative: false,
    };

    /// `x^n` with `0^0 = 1`.
    pub fn power(x: f64, n: u64) -> Self {
        if n == 0 {
            Self::ONE
        } else if x == 0.0 {
            Self::ZERO
        } else {
            Self {
                ln_abs: n as f64 * x.abs().ln(),
                negative: x < 0.0 && n % 2 == 1,
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.ln_abs == f64::NEG_INFINITY
    }

    pub fn value(&self) -> f64 {
        let m = self.ln_abs.exp();
        if self.negative {
            -m
        } else {
            m
        }
    }
}

impl std::ops::Mul for SignedLog {
    type Output = SignedLog;

    fn mul(self, rhs: SignedLog) -> SignedLog {
        if self.is_zero() || rhs.is_zero() {
            return SignedLog::ZERO;
        }
        SignedLog {
            ln_abs: self.ln_abs + rhs.ln_abs,
            negative: self.negative != rhs.negative,
        }
    }
}

pub fn ln_factorial(n: u64) -> f64 {
    statrs::function::factorial::ln_factorial(n)
}

/// `(sin χ, cos χ)` with quadrant reduction, so exact multiples of π/2 give
/// exact zeros and unit values.
pub fn sin_cos(chi: f64) -> (f64, f64) {
    let quadrant = (chi / FRAC_PI_2).round();
    let mut r = chi - quadrant * FRAC_PI_2;
    // Residues at the rounding level of χ itself are treated as exact zeros.
    if r.abs() <= 4.0 * f64::EPSILON * chi.abs() {
        r = 0.0;
    }
    let (s, c) = r.sin_cos();
    match (quadrant as i64).rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

/// `ln(α^(n_c+n_d) e^(-α²/2) / sqrt(n_c! n_d!))`.
fn ln_prefactor(alpha: f64, outcome: PhotonOutcome) -> f64 {
    outcome.total() as f64 * alpha.ln()
        - 0.5 * alpha * alpha
        - 0.5 * (ln_factorial(outcome.n_c as u64) + ln_factorial(outcome.n_d as u64))
}

/// Trigonometric part `cos^n_c(χ) sin^n_d(χ)` in log form.
pub fn trig_power(outcome: PhotonOutcome, chi: f64) -> SignedLog {
    let (s, c) = sin_cos(chi);
    SignedLog::power(c, outcome.n_c as u64) * SignedLog::power(s, outcome.n_d as u64)
}

pub fn c_exact_log(params: &CFuncParams, chi: f64) -> SignedLog {
    let prefactor = SignedLog {
        ln_abs: ln_prefactor(params.alpha, params.outcome),
        negative: false,
    };
    prefactor * trig_power(params.outcome, chi)
}

/// The exact C-function.
pub fn c_exact(params: &CFuncParams, chi: f64) -> f64 {
    c_exact_log(params, chi).value()
}

/// `f = 4 n_c n_d / (n_c + n_d)²`, in `[0, 1]`.
pub fn f_factor(outcome: PhotonOutcome) -> Result<f64> {
    let n = nonzero_total(outcome)?;
    Ok(4.0 * outcome.n_c as f64 * outcome.n_d as f64 / (n * n))
}

fn nonzero_total(outcome: PhotonOutcome) -> Result<f64> {
    match outcome.total() {
        0 => Err(Error::InvalidParameter(
            "the (0, 0) outcome has no peak or width".into(),
        )),
        n => Ok(n as f64),
    }
}

/// `(n_c - n_d) / (n_c + n_d)`, the value of `cos 2χ` at the peaks.
pub fn peak_cosine(outcome: PhotonOutcome) -> Result<f64> {
    let n = nonzero_total(outcome)?;
    Ok((outcome.n_c as f64 - outcome.n_d as f64) / n)
}

/// Gaussian width `1 / sqrt((1 + f)(n_c + n_d))` of each peak.
pub fn gaussian_width(outcome: PhotonOutcome) -> Result<f64> {
    let n = nonzero_total(outcome)?;
    Ok(1.0 / ((1.0 + f_factor(outcome)?) * n).sqrt())
}

/// Width used by the second (cosine-argument) approximation,
/// `1 / sqrt(8 ((n_c + n_d)/4)^(2 - f))`.
pub fn empirical_width(outcome: PhotonOutcome) -> Result<f64> {
    let n = nonzero_total(outcome)?;
    let f = f_factor(outcome)?;
    Ok(1.0 / (8.0 * (n / 4.0).powf(2.0 - f)).sqrt())
}

/// Triangular wave `arcsin(sin χ)`.
pub fn triangular_wave(chi: f64) -> f64 {
    sin_cos(chi).0.clamp(-1.0, 1.0).asin()
}

/// Square wave `sgn(sin x)`, taking `+1` at the zeros.
pub fn square_wave(x: f64) -> f64 {
    if sin_cos(x).0 < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Sign `q^n_c(χ + π/2) q^n_d(χ)` of the C-function peaks.
pub fn sign_factor(outcome: PhotonOutcome, chi: f64) -> f64 {
    // q(χ + π/2) = sgn(cos χ); evaluated from cos χ to avoid shifting the argument.
    let (s, c) = sin_cos(chi);
    let qc = if c < 0.0 { -1.0 } else { 1.0 };
    let qd = if s < 0.0 { -1.0 } else { 1.0 };
    let mut sign = 1.0;
    if outcome.n_c % 2 == 1 {
        sign *= qc;
    }
    if outcome.n_d % 2 == 1 {
        sign *= qd;
    }
    sign
}

/// Peak amplitude from Stirling's approximation.
pub fn amplitude_factor(alpha: f64, outcome: PhotonOutcome) -> f64 {
    let n = outcome.total();
    let mut ln_a = n as f64 * alpha.ln() - 0.5 * alpha * alpha - 0.5 * ln_factorial(n);
    if outcome.n_c > 0 && outcome.n_d > 0 {
        let g = 2.0 * PI * outcome.n_c as f64 * outcome.n_d as f64 / n as f64;
        ln_a -= 0.25 * g.ln();
    }
    ln_a.exp()
}

/// Gaussian approximation in the triangular-wave argument.
pub fn c_approx1(params: &CFuncParams, chi: f64) -> f64 {
    let outcome = params.outcome;
    let amplitude = amplitude_factor(params.alpha, outcome);
    if outcome.total() == 0 {
        return amplitude;
    }
    let centre = 0.5 * peak_cosine(outcome).expect("nonzero total").acos();
    let sigma = gaussian_width(outcome).expect("nonzero total");
    let d = triangular_wave(chi).abs() - centre;
    sign_factor(outcome, chi) * amplitude * (-d * d / (2.0 * sigma * sigma)).exp()
}

/// Gaussian approximation in `cos 2χ`; the `(0, 0)` outcome falls back to
/// the exact constant `e^(-α²/2)`.
pub fn c_approx2(params: &CFuncParams, chi: f64) -> f64 {
    let outcome = params.outcome;
    if outcome.total() == 0 {
        return (-0.5 * params.alpha * params.alpha).exp();
    }
    let amplitude = amplitude_factor(params.alpha, outcome);
    let r = peak_cosine(outcome).expect("nonzero total");
    let sigma = empirical_width(outcome).expect("nonzero total");
    let (s, c) = sin_cos(chi);
    let cos2 = c * c - s * s;
    let d = cos2 - r;
    sign_factor(outcome, chi) * amplitude * (-d * d / (8.0 * sigma * sigma)).exp()
}

/// All `χ` in `[lo, hi]` with `cos 2χ = (n_c - n_d)/(n_c + n_d)`, ascending.
pub fn peak_locations(outcome: PhotonOutcome, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let principal = 0.5 * peak_cosine(outcome)?.acos();
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Ok(Vec::new());
    }
    const EDGE: f64 = 1e-12;
    let k_lo = ((lo - principal) / PI).floor() as i64 - 1;
    let k_hi = ((hi + principal) / PI).ceil() as i64 + 1;
    let mut peaks: Vec<f64> = (k_lo..=k_hi)
        .flat_map(|k| {
            let base = k as f64 * PI;
            [base - principal, base + principal]
        })
        .filter(|&x| x >= lo - EDGE && x <= hi + EDGE)
        .collect();
    peaks.sort_by(f64::total_cmp);
    peaks.dedup_by(|a, b| (*a - *b).abs() <= EDGE);
    Ok(peaks)
}

/// Amplitude `cos^k0(x + π/4) sin^k1(x + π/4)` of the ancilla-qubit
/// measurement sequence.
pub fn ancilla_amplitude(k0: u32, k1: u32, x: f64) -> f64 {
    let (s, c) = sin_cos(x + PI / 4.0);
    (SignedLog::power(c, k0 as u64) * SignedLog::power(s, k1 as u64)).value()
}

/// Diagonal value `(cos x - (-1)^l sin x)/√2` of the ancilla measurement
/// operator with outcome `l ∈ {0, 1}` at `x = τE`.
pub fn ancilla_operator_value(l: u8, x: f64) -> f64 {
    let (s, c) = sin_cos(x);
    let sign = if l.is_multiple_of(2) { 1.0 } else { -1.0 };
    (c - sign * s) * std::f64::consts::FRAC_1_SQRT_2
}

/// Ancilla-scheme readout `arcsin((k1 - k0)/(k0 + k1)) / 2τ`.
pub fn ancilla_energy_estimate(k0: u64, k1: u64, tau: f64) -> Option<f64> {
    let n = k0 + k1;
    if n == 0 {
        return None;
    }
    let r = (k1 as f64 - k0 as f64) / n as f64;
    Some(r.clamp(-1.0, 1.0).asin() / (2.0 * tau))
}

/// One row of a C-function table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CFuncRow {
    pub n_c: u32,
    pub n_d: u32,
    pub chi: f64,
    pub exact: f64,
    pub approx1: f64,
    pub approx2: f64,
}

/// Exact and approximate C-function values for each outcome over `chi_grid`.
pub fn cfunc_table(alpha: f64, outcomes: &[PhotonOutcome], chi_grid: &[f64]) -> Result<Vec<CFuncRow>> {
    check_alpha(alpha)?;
    if chi_grid.is_empty() {
        return Err(Error::InvalidParameter("empty χ grid".into()));
    }
    if outcomes.is_empty() {
        return Err(Error::InvalidParameter("no outcomes requested".into()));
    }
    let mut rows = Vec::with_capacity(outcomes.len() * chi_grid.len());
    for &outcome in outcomes {
        let params = CFuncParams::new(alpha, outcome)?;
        for &chi in chi_grid {
            rows.push(CFuncRow {
                n_c: outcome.n_c,
                n_d: outcome.n_d,
                chi,
                exact: c_exact(&params, chi),
                approx1: c_approx1(&params, chi),
                approx2: c_approx2(&params, chi),
            });
        }
    }
    Ok(rows)
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}
