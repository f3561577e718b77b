//! Dimensional analysis over the base dimensions mass, length and time.
//!
//! Variables are declared with an exact rational [`DimensionVector`]. A
//! [`DimensionMatrix`] collects them column by column, and a [`PiBasis`] of
//! dimensionless monomials is derived either from the rational nullspace of
//! that matrix or with the repeated-variables method.

mod basis;
mod linalg;
mod sets;

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{One, Zero};
use thiserror::Error;

pub use basis::{DimensionMatrix, PiBasis, PiGroup};
pub use linalg::{rank, rref};
pub use sets::{dynamic_variables, kinematic_variables, DYNAMIC_REPEATED, KINEMATIC_REPEATED};

/// Exact exponent type used throughout the engine.
pub type Exponent = Rational64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DimensionError {
    #[error("no variables declared")]
    Empty,
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("repeated set has {given} variables but the dimension matrix has rank {rank}")]
    RepeatedCount { given: usize, rank: usize },
    #[error("repeated variables {0:?} are dimensionally dependent")]
    DependentRepeated(Vec<String>),
    #[error("row is missing a value for `{0}`")]
    MissingVariable(String),
    #[error("degenerate row: `{0}` is zero but carries a negative exponent")]
    DegenerateRow(String),
    #[error("`{0}` is negative and carries a fractional exponent")]
    NonRealPower(String),
    #[error("missing context value for `{0}`")]
    MissingContext(String),
    #[error("group {0} does not determine a single output variable")]
    Underdetermined(usize),
    #[error("group index {0} out of range")]
    GroupIndex(usize),
    #[error("cannot parse dimension `{0}`")]
    Parse(String),
}

/// Exponents of M, L and T.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct DimensionVector {
    pub mass: Exponent,
    pub length: Exponent,
    pub time: Exponent,
}

impl DimensionVector {
    pub const BASES: [&'static str; 3] = ["M", "L", "T"];

    pub fn new(mass: i64, length: i64, time: i64) -> Self {
        Self::from_exponents([mass.into(), length.into(), time.into()])
    }

    pub fn from_exponents(e: [Exponent; 3]) -> Self {
        Self {
            mass: e[0],
            length: e[1],
            time: e[2],
        }
    }

    pub fn dimensionless() -> Self {
        Self::default()
    }

    pub fn length() -> Self {
        Self::new(0, 1, 0)
    }

    pub fn velocity() -> Self {
        Self::new(0, 1, -1)
    }

    pub fn acceleration() -> Self {
        Self::new(0, 1, -2)
    }

    pub fn force() -> Self {
        Self::new(1, 1, -2)
    }

    pub fn exponents(&self) -> [Exponent; 3] {
        [self.mass, self.length, self.time]
    }

    pub fn is_dimensionless(&self) -> bool {
        self.exponents().iter().all(Zero::is_zero)
    }
}

impl Add for DimensionVector {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            mass: self.mass + rhs.mass,
            length: self.length + rhs.length,
            time: self.time + rhs.time,
        }
    }
}

impl Sub for DimensionVector {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for DimensionVector {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            mass: -self.mass,
            length: -self.length,
            time: -self.time,
        }
    }
}

impl Mul<Exponent> for DimensionVector {
    type Output = Self;
    fn mul(self, k: Exponent) -> Self {
        Self {
            mass: self.mass * k,
            length: self.length * k,
            time: self.time * k,
        }
    }
}

impl fmt::Display for DimensionVector {
    /// `M^1 L^1 T^-2`; zero exponents are omitted and a dimensionless vector
    /// prints as `1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = Self::BASES
            .iter()
            .zip(self.exponents())
            .filter(|(_, e)| !e.is_zero())
            .map(|(b, e)| format!("{b}^{e}"))
            .collect();
        if parts.is_empty() {
            f.write_str("1")
        } else {
            f.write_str(&parts.join(" "))
        }
    }
}

impl FromStr for DimensionVector {
    type Err = DimensionError;

    /// Accepts `M^p L^q T^r` in any order, with integer or `p/q` exponents.
    /// A base without `^` has exponent 1. Empty, `1` and `-` are dimensionless.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || DimensionError::Parse(s.to_string());
        let trimmed = s.trim().trim_matches('"').trim();
        let mut exps = [Exponent::zero(); 3];
        if trimmed.is_empty() || trimmed == "1" || trimmed == "-" {
            return Ok(Self::dimensionless());
        }
        for token in trimmed.split(|c: char| c.is_whitespace() || c == '*' || c == '·') {
            if token.is_empty() {
                continue;
            }
            let (base, exp) = match token.split_once('^') {
                Some((b, e)) => (b, parse_exponent(e).ok_or_else(err)?),
                None => (token, Exponent::one()),
            };
            let slot = match base {
                "M" => 0,
                "L" => 1,
                "T" => 2,
                _ => return Err(err()),
            };
            exps[slot] += exp;
        }
        Ok(Self::from_exponents(exps))
    }
}

fn parse_exponent(s: &str) -> Option<Exponent> {
    let s = s.trim().trim_start_matches('(').trim_end_matches(')');
    match s.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.trim().parse().ok()?;
            let d: i64 = d.trim().parse().ok()?;
            (d != 0).then(|| Exponent::new(n, d))
        }
        None => s.parse::<i64>().ok().map(Exponent::from_integer),
    }
}

/// How a variable participates in the learned relationship.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Input,
    Output,
    RepeatedCandidate,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VariableDecl {
    pub name: String,
    pub dimension: DimensionVector,
    pub role: Role,
}

impl VariableDecl {
    pub fn new(name: impl Into<String>, dimension: DimensionVector, role: Role) -> Self {
        Self {
            name: name.into(),
            dimension,
            role,
        }
    }

    pub fn input(name: impl Into<String>, dimension: DimensionVector) -> Self {
        Self::new(name, dimension, Role::Input)
    }

    pub fn output(name: impl Into<String>, dimension: DimensionVector) -> Self {
        Self::new(name, dimension, Role::Output)
    }
}

/// Parses `name = "M^p L^q T^r"` lines into input declarations. Blank lines
/// and lines starting with `#` or `;` are skipped.
pub fn parse_variable_lines<'a, I>(lines: I) -> Result<Vec<VariableDecl>, DimensionError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut out = Vec::new();
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        let (name, dim) = line.split_once('=').ok_or_else(|| DimensionError::Parse(line.to_string()))?;
        let name = name.trim();
        if name.is_empty() {
            return Err(DimensionError::Parse(line.to_string()));
        }
        out.push(VariableDecl::input(name, dim.parse()?));
    }
    Ok(out)
}
