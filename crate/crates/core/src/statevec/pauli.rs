use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn from_char(c: char) -> Option<Self> {
        match c {
            'X' | 'x' => Some(Axis::X),
            'Y' | 'y' => Some(Axis::Y),
            'Z' | 'z' => Some(Axis::Z),
            _ => None,
        }
    }

    fn letter(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Pauli operators on distinct qubits.
///
/// Qubit 0 is the leftmost qubit in ket notation and the most significant bit
/// of a basis index. The text form uses 1-based labels (`X1Z3` acts on qubits
/// 0 and 2).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct PauliString {
    factors: Vec<(usize, Axis)>,
}

impl PauliString {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new(factors: impl IntoIterator<Item = (usize, Axis)>) -> Result<Self> {
        let mut factors: Vec<_> = factors.into_iter().collect();
        factors.sort_by_key(|&(q, _)| q);
        if factors.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidPauli(format!(
                "qubit indices must be distinct in {:?}",
                factors
            )));
        }
        Ok(Self { factors })
    }

    pub fn single(axis: Axis, qubit: usize) -> Self {
        Self {
            factors: vec![(qubit, axis)],
        }
    }

    /// The same axis on each of `qubits`.
    pub fn uniform(axis: Axis, qubits: &[usize]) -> Result<Self> {
        Self::new(qubits.iter().map(|&q| (q, axis)))
    }

    pub fn factors(&self) -> &[(usize, Axis)] {
        &self.factors
    }

    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }

    /// One past the highest qubit index touched, 0 for the identity.
    pub fn min_qubits(&self) -> usize {
        self.factors.last().map_or(0, |&(q, _)| q + 1)
    }

    pub fn weight(&self) -> usize {
        self.factors.len()
    }

    fn check_register(&self, num_qubits: usize) -> Result<()> {
        if self.min_qubits() > num_qubits {
            return Err(Error::InvalidPauli(format!(
                "{} acts outside a {}-qubit register",
                self, num_qubits
            )));
        }
        Ok(())
    }

    /// Bit masks (flip, phase, y-count) over an `num_qubits` register.
    fn masks(&self, num_qubits: usize) -> (usize, usize, usize) {
        let mut flip = 0;
        let mut phase = 0;
        let mut ys = 0;
        for &(q, axis) in &self.factors {
            let bit = 1usize << (num_qubits - 1 - q);
            match axis {
                Axis::X => flip |= bit,
                Axis::Y => {
                    flip |= bit;
                    phase |= bit;
                    ys += 1;
                }
                Axis::Z => phase |= bit,
            }
        }
        (flip, phase, ys)
    }

    /// Applies the string to raw amplitudes of a `num_qubits` register.
    pub fn apply_to(&self, num_qubits: usize, amplitudes: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_register(num_qubits)?;
        let dim = 1usize << num_qubits;
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: amplitudes.len(),
            });
        }
        let (flip, phase_mask, ys) = self.masks(num_qubits);
        let y_phase = Complex64::i().powu(ys as u32);
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for (i, &a) in amplitudes.iter().enumerate() {
            // Y = iXZ acting on |b>: the Z part reads the input bit.
            let sign = if (i & phase_mask).count_ones() % 2 == 1 {
                -1.0
            } else {
                1.0
            };
            out[i ^ flip] = a * y_phase * sign;
        }
        Ok(out)
    }

    pub fn to_matrix(&self, num_qubits: usize) -> Result<Matrix> {
        self.check_register(num_qubits)?;
        let dim = 1usize << num_qubits;
        let (flip, phase_mask, ys) = self.masks(num_qubits);
        let y_phase = Complex64::i().powu(ys as u32);
        let mut m = Matrix::zeros(dim, dim);
        for i in 0..dim {
            let sign = if (i & phase_mask).count_ones() % 2 == 1 {
                -1.0
            } else {
                1.0
            };
            m[(i ^ flip, i)] = y_phase * sign;
        }
        Ok(m)
    }

    /// Eigenvalue (+1 or -1) of a diagonal (Z-only) string on basis state `index`.
    pub fn diagonal_sign(&self, num_qubits: usize, index: usize) -> Option<f64> {
        let (flip, phase_mask, _) = self.masks(num_qubits);
        if flip != 0 {
            return None;
        }
        Some(if (index & phase_mask).count_ones() % 2 == 1 {
            -1.0
        } else {
            1.0
        })
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let clashes = self
            .factors
            .iter()
            .filter(|&&(q, a)| {
                other
                    .factors
                    .iter()
                    .any(|&(p, b)| p == q && a != b)
            })
            .count();
        clashes % 2 == 0
    }

    /// Product of two strings on disjoint qubits.
    fn disjoint_product(&self, other: &PauliString) -> Result<PauliString> {
        PauliString::new(self.factors.iter().chain(&other.factors).copied())
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("I");
        }
        for &(q, axis) in &self.factors {
            write!(f, "{}{}", axis.letter(), q + 1)?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let expr = LinearCombination::parse(s)?;
        match expr.terms.as_slice() {
            [(c, p)] if *c == 1.0 => Ok(p.clone()),
            [(_, p)] if p.is_identity() => Ok(PauliString::identity()),
            _ => Err(Error::Parse(format!("'{}' is not a single Pauli string", s))),
        }
    }
}

/// A real multiple of a Pauli string.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub string: PauliString,
}

impl PauliTerm {
    pub fn new(coefficient: f64, string: PauliString) -> Result<Self> {
        if !coefficient.is_finite() {
            return Err(Error::InvalidPauli(format!(
                "non-finite coefficient {}",
                coefficient
            )));
        }
        Ok(Self { coefficient, string })
    }

    pub fn unit(string: PauliString) -> Self {
        Self {
            coefficient: 1.0,
            string,
        }
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(f, self.coefficient, &self.string, true)
    }
}

impl FromStr for PauliTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let expr = LinearCombination::parse(s)?;
        match expr.terms.as_slice() {
            [(c, p)] => PauliTerm::new(*c, p.clone()),
            _ => Err(Error::Parse(format!("'{}' is not a single Pauli term", s))),
        }
    }
}

fn write_term(f: &mut fmt::Formatter<'_>, c: f64, p: &PauliString, leading: bool) -> fmt::Result {
    let magnitude = c.abs();
    if leading {
        if c < 0.0 {
            f.write_str("-")?;
        }
    } else {
        f.write_str(if c < 0.0 { " - " } else { " + " })?;
    }
    if p.is_identity() {
        write!(f, "{}", magnitude)
    } else if magnitude == 1.0 {
        write!(f, "{}", p)
    } else {
        write!(f, "{}*{}", magnitude, p)
    }
}

/// Weighted Pauli sum plus an identity offset on a fixed register.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianSpec {
    pub num_qubits: usize,
    pub terms: Vec<PauliTerm>,
    pub identity_offset: f64,
}

impl HamiltonianSpec {
    pub fn new(num_qubits: usize, terms: Vec<PauliTerm>, identity_offset: f64) -> Result<Self> {
        for t in &terms {
            if t.string.min_qubits() > num_qubits {
                return Err(Error::InvalidPauli(format!(
                    "{} acts outside a {}-qubit register",
                    t, num_qubits
                )));
            }
            if t.string.is_identity() {
                return Err(Error::InvalidPauli(
                    "identity terms belong in identity_offset".into(),
                ));
            }
        }
        if !identity_offset.is_finite() {
            return Err(Error::InvalidParameter("non-finite identity offset".into()));
        }
        Ok(Self {
            num_qubits,
            terms,
            identity_offset,
        })
    }

    /// Parses expressions such as `Z1 - Z2` or `-(X1 + X2 + X3) + 3`.
    pub fn parse(num_qubits: usize, text: &str) -> Result<Self> {
        let expr = LinearCombination::parse(text)?;
        let mut offset = 0.0;
        let mut terms = Vec::new();
        for (c, p) in expr.terms {
            if p.is_identity() {
                offset += c;
            } else if c != 0.0 {
                terms.push(PauliTerm::new(c, p)?);
            }
        }
        Self::new(num_qubits, terms, offset)
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        let dim = self.dim();
        let mut m = Matrix::identity(dim, dim) * Complex64::new(self.identity_offset, 0.0);
        for t in &self.terms {
            m += t.string.to_matrix(self.num_qubits)? * Complex64::new(t.coefficient, 0.0);
        }
        Ok(m)
    }
}

impl fmt::Display for HamiltonianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for t in &self.terms {
            write_term(f, t.coefficient, &t.string, first)?;
            first = false;
        }
        if self.identity_offset != 0.0 || first {
            write_term(f, self.identity_offset, &PauliString::identity(), first)?;
        }
        Ok(())
    }
}

/// Parsed sum of scalar multiples of Pauli strings; the identity string
/// carries the constant part.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct LinearCombination {
    pub terms: Vec<(f64, PauliString)>,
}

impl LinearCombination {
    fn scalar(c: f64) -> Self {
        Self {
            terms: vec![(c, PauliString::identity())],
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        if chars.is_empty() {
            return Err(Error::Parse("empty expression".into()));
        }
        let mut parser = Parser { chars, pos: 0, src: text };
        let expr = parser.sum()?;
        if parser.pos != parser.chars.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(expr.collected())
    }

    /// Value of an expression with no Pauli content.
    pub fn as_scalar(&self) -> Option<f64> {
        match self.terms.as_slice() {
            [] => Some(0.0),
            [(c, p)] if p.is_identity() => Some(*c),
            _ => None,
        }
    }

    fn collected(self) -> Self {
        let mut out: Vec<(f64, PauliString)> = Vec::new();
        for (c, p) in self.terms {
            match out.iter_mut().find(|(_, q)| *q == p) {
                Some(slot) => slot.0 += c,
                None => out.push((c, p)),
            }
        }
        Self { terms: out }
    }

    fn add(mut self, other: Self, sign: f64) -> Self {
        self.terms
            .extend(other.terms.into_iter().map(|(c, p)| (sign * c, p)));
        self
    }

    fn mul(self, other: Self) -> Result<Self> {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (a, p) in &self.terms {
            for (b, q) in &other.terms {
                terms.push((a * b, p.disjoint_product(q)?));
            }
        }
        Ok(Self { terms })
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn error(&self, what: &str) -> Error {
        Error::Parse(format!("{} at offset {} in '{}'", what, self.pos, self.src))
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn sum(&mut self) -> Result<LinearCombination> {
        let mut sign = 1.0;
        match self.peek() {
            Some('-') => {
                sign = -1.0;
                self.pos += 1;
            }
            Some('+') => self.pos += 1,
            _ => {}
        }
        let mut acc = LinearCombination { terms: Vec::new() }.add(self.product()?, sign);
        while let Some(c @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let rhs = self.product()?;
            acc = acc.add(rhs, if c == '-' { -1.0 } else { 1.0 });
        }
        Ok(acc)
    }

    fn product(&mut self) -> Result<LinearCombination> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    acc = acc.mul(self.factor()?)?;
                }
                Some('/') => {
                    self.pos += 1;
                    let divisor = self
                        .factor()?
                        .as_scalar()
                        .ok_or_else(|| self.error("division by a non-scalar"))?;
                    if divisor == 0.0 {
                        return Err(self.error("division by zero"));
                    }
                    acc = acc.mul(LinearCombination::scalar(1.0 / divisor))?;
                }
                // Implicit product: `2X1`, `X1X2`, `2pi`, `3(X1+X2)`.
                Some(c) if c.is_ascii_alphanumeric() || c == '(' || c == 'π' || c == '.' => {
                    acc = acc.mul(self.factor()?)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<LinearCombination> {
        let c = self.peek().ok_or_else(|| self.error("unexpected end"))?;
        if c == '(' {
            self.pos += 1;
            let inner = self.sum()?;
            if self.peek() != Some(')') {
                return Err(self.error("missing ')'"));
            }
            self.pos += 1;
            return Ok(inner);
        }
        if c == 'π' {
            self.pos += 1;
            return Ok(LinearCombination::scalar(std::f64::consts::PI));
        }
        if (c == 'p' || c == 'P') && matches!(self.chars.get(self.pos + 1), Some('i' | 'I')) {
            self.pos += 2;
            return Ok(LinearCombination::scalar(std::f64::consts::PI));
        }
        if let Some(axis) = Axis::from_char(c) {
            self.pos += 1;
            let start = self.pos;
            while self.peek().is_some_and(|d| d.is_ascii_digit()) {
                self.pos += 1;
            }
            let label: String = self.chars[start..self.pos].iter().collect();
            let qubit: usize = label
                .parse()
                .map_err(|_| self.error("expected a qubit label after the Pauli axis"))?;
            if qubit == 0 {
                return Err(self.error("qubit labels start at 1"));
            }
            return Ok(LinearCombination {
                terms: vec![(1.0, PauliString::single(axis, qubit - 1))],
            });
        }
        if c.is_ascii_digit() || c == '.' {
            let start = self.pos;
            while let Some(d) = self.peek() {
                let exponent_sign = (d == '+' || d == '-')
                    && matches!(self.chars.get(self.pos - 1), Some('e' | 'E'));
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exponent_sign {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            let literal: String = self.chars[start..self.pos].iter().collect();
            let value: f64 = literal
                .parse()
                .map_err(|_| self.error(&format!("bad number '{}'", literal)))?;
            return Ok(LinearCombination::scalar(value));
        }
        Err(self.error(&format!("unexpected '{}'", c)))
    }
}

/// Evaluates a scalar expression such as `pi/8`, `3*pi/4` or `0.5`.
pub fn parse_real(text: &str) -> Result<f64> {
    LinearCombination::parse(text)?
        .as_scalar()
        .ok_or_else(|| Error::Parse(format!("'{}' is not a real number", text)))
}
