//! Bounded nonnegative test functions on `[0, 1]`.
//!
//! Both representations have a closed-form log-primitive
//! `F(x) = int_x^1 f(u) du / u`, which is all that pairing against the
//! limit measure requires. Outside `[0, 1]` every test function is zero.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TestFunctionError {
    #[error("breakpoints must increase strictly from 0 to 1")]
    BadBreakpoints,
    #[error("expected {expected} bin values, got {got}")]
    ValueCount { expected: usize, got: usize },
    #[error("values and coefficients must be finite and nonnegative")]
    Negative,
    #[error("cannot parse test function `{0}`")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// Value `values[i]` on `[breaks[i], breaks[i + 1])`; the last bin also
    /// contains 1.
    Bins { breaks: Vec<f64>, values: Vec<f64> },
    /// `sum_j coeffs[j] u^j`.
    Polynomial { coeffs: Vec<f64> },
}

fn non_negative(xs: &[f64]) -> Result<(), TestFunctionError> {
    if xs.iter().all(|v| v.is_finite() && *v >= 0.0) {
        Ok(())
    } else {
        Err(TestFunctionError::Negative)
    }
}

impl TestFunction {
    pub fn bins(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self, TestFunctionError> {
        let ok = breaks.len() >= 2
            && breaks[0] == 0.0
            && *breaks.last().unwrap() == 1.0
            && breaks.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(TestFunctionError::BadBreakpoints);
        }
        if values.len() + 1 != breaks.len() {
            return Err(TestFunctionError::ValueCount {
                expected: breaks.len() - 1,
                got: values.len(),
            });
        }
        non_negative(&values)?;
        Ok(Self::Bins { breaks, values })
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self, TestFunctionError> {
        non_negative(&coeffs)?;
        Ok(Self::Polynomial { coeffs })
    }

    pub fn constant(c: f64) -> Self {
        Self::bins(vec![0.0, 1.0], vec![c]).expect("valid constant")
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// `f(u) = u`.
    pub fn identity() -> Self {
        Self::Polynomial {
            coeffs: vec![0.0, 1.0],
        }
    }

    /// Indicator of `[a, b)`, or of `[a, 1]` when `b = 1`.
    pub fn indicator(a: f64, b: f64) -> Result<Self, TestFunctionError> {
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(TestFunctionError::BadBreakpoints);
        }
        let mut breaks = vec![0.0];
        let mut values = Vec::new();
        if a > 0.0 {
            breaks.push(a);
            values.push(0.0);
        }
        breaks.push(b);
        values.push(1.0);
        if b < 1.0 {
            breaks.push(1.0);
            values.push(0.0);
        }
        Self::bins(breaks, values)
    }

    /// Indicator of the `k`-th of `n` equal bins of `[0, 1]`.
    pub fn uniform_bin(k: usize, n: usize) -> Result<Self, TestFunctionError> {
        if k >= n {
            return Err(TestFunctionError::BadBreakpoints);
        }
        Self::indicator(k as f64 / n as f64, (k + 1) as f64 / n as f64)
    }

    /// The default library: 16 equal bins, the constant 1 and the identity.
    pub fn library() -> Vec<(String, Self)> {
        let mut out = vec![("one".to_string(), Self::one()), ("id".to_string(), Self::identity())];
        for k in 0..16 {
            out.push((format!("bin:{k}/16"), Self::uniform_bin(k, 16).unwrap()));
        }
        out
    }

    pub fn eval(&self, u: f64) -> f64 {
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        match self {
            Self::Bins { breaks, values } => {
                // index of the last breakpoint <= u, capped at the final bin
                let i = breaks.partition_point(|&b| b <= u).saturating_sub(1);
                values[i.min(values.len() - 1)]
            }
            Self::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c),
        }
    }

    pub fn bound(&self) -> f64 {
        match self {
            Self::Bins { values, .. } => values.iter().copied().fold(0.0, f64::max),
            Self::Polynomial { coeffs } => coeffs.iter().sum(),
        }
    }

    /// `F(x) = int_x^1 f(u) du / u` for `x` in `(0, 1]`, zero for `x >= 1`.
    pub fn log_primitive(&self, x: f64) -> f64 {
        if x >= 1.0 {
            return 0.0;
        }
        match self {
            Self::Bins { breaks, values } => breaks
                .windows(2)
                .zip(values)
                .filter(|(w, v)| x < w[1] && **v != 0.0)
                .map(|(w, v)| v * (w[1] / w[0].max(x)).ln())
                .sum(),
            Self::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(j, c)| {
                    if j == 0 {
                        -c * x.ln()
                    } else {
                        let j = j as i32;
                        c * (1.0 - x.powi(j)) / j as f64
                    }
                })
                .sum(),
        }
    }

    /// `self + other` for two piecewise-constant functions.
    pub fn add_bins(&self, other: &Self) -> Option<Self> {
        let (Self::Bins { breaks: b1, .. }, Self::Bins { breaks: b2, .. }) = (self, other) else {
            return None;
        };
        let mut breaks: Vec<f64> = b1.iter().chain(b2).copied().collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let values = breaks
            .windows(2)
            .map(|w| self.eval(w[0]) + other.eval(w[0]))
            .collect();
        Self::bins(breaks, values).ok()
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            Self::Bins { breaks, values } => Self::Bins {
                breaks: breaks.clone(),
                values: values.iter().map(|v| v * c).collect(),
            },
            Self::Polynomial { coeffs } => Self::Polynomial {
                coeffs: coeffs.iter().map(|v| v * c).collect(),
            },
        }
    }
}

fn parse_list(body: &str) -> Result<Vec<f64>, TestFunctionError> {
    body.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| TestFunctionError::Parse(body.to_string()))
        })
        .collect()
}

/// Accepted forms: `one`, `id`, `ind[a,b]`, `bin:k/n`, `poly[c0,c1,...]`.
impl FromStr for TestFunction {
    type Err = TestFunctionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || TestFunctionError::Parse(s.to_string());
        match s {
            "one" => return Ok(Self::one()),
            "id" => return Ok(Self::identity()),
            _ => {}
        }
        if let Some(body) = s.strip_prefix("ind[").and_then(|r| r.strip_suffix(']')) {
            let v = parse_list(body)?;
            if v.len() != 2 {
                return Err(bad());
            }
            return Self::indicator(v[0], v[1]);
        }
        if let Some(body) = s.strip_prefix("poly[").and_then(|r| r.strip_suffix(']')) {
            return Self::polynomial(parse_list(body)?);
        }
        if let Some(body) = s.strip_prefix("bin:") {
            let (k, n) = body.split_once('/').ok_or_else(bad)?;
            let k = k.trim().parse().map_err(|_| bad())?;
            let n = n.trim().parse().map_err(|_| bad())?;
            return Self::uniform_bin(k, n);
        }
        Err(bad())
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Bins { breaks, values } => {
                write!(f, "bins{breaks:?}->{values:?}")
            }
            Self::Polynomial { coeffs } => write!(f, "poly{coeffs:?}"),
        }
    }
}
