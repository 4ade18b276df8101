//! Run configuration: command-line flags over a JSON file over defaults.

use std::path::{Path, PathBuf};

use khessian::params::ProblemParams;
use khessian::Error;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

pub const DEFAULT_TOL: f64 = 1e-10;

/// An exponent given as a number or as a string such as `"13/9"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Number(f64),
    Text(String),
}

enum Parsed {
    Exact(Rational64),
    Float(f64),
}

fn parse_exponent(e: &Exponent, name: &str) -> Result<Parsed, Error> {
    let bad = |s: &str| Error::Parameter(format!("cannot parse {name} = {s:?}"));
    match e {
        Exponent::Number(v) => Ok(Parsed::Float(*v)),
        Exponent::Text(s) => {
            let s = s.trim();
            if let Some((a, b)) = s.split_once('/') {
                let a: i64 = a.trim().parse().map_err(|_| bad(s))?;
                let b: i64 = b.trim().parse().map_err(|_| bad(s))?;
                if b == 0 {
                    return Err(Error::Parameter(format!("{name} has zero denominator")));
                }
                Ok(Parsed::Exact(Rational64::new(a, b)))
            } else if let Ok(i) = s.parse::<i64>() {
                Ok(Parsed::Exact(Rational64::from_integer(i)))
            } else {
                s.parse::<f64>().map(Parsed::Float).map_err(|_| bad(s))
            }
        }
    }
}

/// Values read from `--config`; every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub n: Option<u32>,
    pub k: Option<u32>,
    pub q: Option<Exponent>,
    pub mu: Option<Exponent>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub lambda: Option<f64>,
    pub lambda_frac: Option<f64>,
    pub alpha: Option<f64>,
    pub alpha_min: Option<f64>,
    pub alpha_max: Option<f64>,
    pub samples: Option<usize>,
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub x0: Option<f64>,
    pub y0: Option<f64>,
    pub r_min: Option<f64>,
    pub zero_tol: Option<f64>,
    pub iter_cap: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parameter(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Parameter(format!("config {}: {e}", path.display())))
    }

    /// Fields of `self` replaced by those set in `over`.
    pub fn overlay(self, over: FileConfig) -> FileConfig {
        FileConfig {
            n: over.n.or(self.n),
            k: over.k.or(self.k),
            q: over.q.or(self.q),
            mu: over.mu.or(self.mu),
            tol: over.tol.or(self.tol),
            out: over.out.or(self.out),
            lambda: over.lambda.or(self.lambda),
            lambda_frac: over.lambda_frac.or(self.lambda_frac),
            alpha: over.alpha.or(self.alpha),
            alpha_min: over.alpha_min.or(self.alpha_min),
            alpha_max: over.alpha_max.or(self.alpha_max),
            samples: over.samples.or(self.samples),
            t0: over.t0.or(self.t0),
            t1: over.t1.or(self.t1),
            x0: over.x0.or(self.x0),
            y0: over.y0.or(self.y0),
            r_min: over.r_min.or(self.r_min),
            zero_tol: over.zero_tol.or(self.zero_tol),
            iter_cap: over.iter_cap.or(self.iter_cap),
        }
    }
}

/// Fully resolved settings, echoed into every JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub n: u32,
    pub k: u32,
    pub q: Exponent,
    pub mu: Exponent,
    pub tol: f64,
    pub out: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_frac: Option<f64>,
    pub alpha: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    pub t1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y0: Option<f64>,
    pub r_min: f64,
    pub zero_tol: f64,
    pub iter_cap: usize,
}

impl RunConfig {
    pub fn resolve(c: FileConfig) -> Result<Self, Error> {
        let tol = c.tol.unwrap_or(DEFAULT_TOL);
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::Parameter(format!("require 0 < tol < 1, got {tol}")));
        }
        let cfg = RunConfig {
            n: c.n.unwrap_or(11),
            k: c.k.unwrap_or(1),
            q: c.q.unwrap_or(Exponent::Number(3.0)),
            mu: c.mu.unwrap_or(Exponent::Number(2.0)),
            tol,
            out: c.out.unwrap_or_else(|| PathBuf::from("out")),
            lambda: c.lambda,
            lambda_frac: c.lambda_frac,
            alpha: c.alpha.unwrap_or(1.0),
            alpha_min: c.alpha_min.unwrap_or(1.0),
            alpha_max: c.alpha_max.unwrap_or(1e4),
            samples: c.samples.unwrap_or(200),
            t0: c.t0,
            t1: c.t1.unwrap_or(5.0),
            x0: c.x0,
            y0: c.y0,
            r_min: c.r_min.unwrap_or(1e-6),
            zero_tol: c.zero_tol.unwrap_or(10.0 * tol),
            iter_cap: c.iter_cap.unwrap_or(20_000),
        };
        Ok(cfg)
    }

    pub fn params(&self) -> Result<ProblemParams, Error> {
        let p = match (parse_exponent(&self.q, "q")?, parse_exponent(&self.mu, "mu")?) {
            (Parsed::Exact(q), Parsed::Exact(mu)) => ProblemParams::from_rationals(self.n, self.k, q, mu)?,
            (q, mu) => {
                let f = |v: Parsed| match v {
                    Parsed::Exact(r) => *r.numer() as f64 / *r.denom() as f64,
                    Parsed::Float(x) => x,
                };
                ProblemParams::new(self.n, self.k, f(q), f(mu))?
            }
        };
        match self.lambda {
            Some(l) => p.with_lambda(l),
            None => Ok(p),
        }
    }
}
