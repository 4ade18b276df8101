//! Problem parameters, structural constants and critical exponents.
//!
//! The radial problem is parametrised by the dimension `n`, the Hessian order
//! `k`, the nonlinearity exponent `q`, the weight exponent `mu` and the load
//! `lambda`. Everything that drives branching (the Tso exponent in
//! particular) is available in exact rational form so that a parameter set
//! sitting exactly on a threshold is labelled reproducibly.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rational = Ratio<i64>;

/// Relative band used to decide equality of real exponents.
pub const CRITICAL_BAND: f64 = 1e-12;

/// `c_{n,k} = C(n,k) / n` as an exact rational.
pub fn c_nk(n: u32, k: u32) -> Result<Rational> {
    if k < 1 || k > n {
        return Err(Error::Parameter(format!("require 1 <= k <= n, got n = {n}, k = {k}")));
    }
    let binom = binomial(n, k)
        .filter(|b| *b <= i64::MAX as u128)
        .ok_or_else(|| Error::Parameter(format!("C({n},{k}) overflows")))?;
    Ok(Rational::new(binom as i64, n as i64))
}

fn binomial(n: u32, k: u32) -> Option<u128> {
    let k = k.min(n - k) as u128;
    let n = n as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

fn require_supercritical_dimension(n: u32, k: u32) -> Result<()> {
    if k < 1 || n <= 2 * k {
        return Err(Error::Parameter(format!("require n > 2k, got n = {n}, k = {k}")));
    }
    Ok(())
}

/// Tso exponent `q*(k, sigma) = ((n+2)k + sigma(k+1)) / (n - 2k)`.
pub fn q_star(n: u32, k: u32, sigma: f64) -> Result<f64> {
    require_supercritical_dimension(n, k)?;
    if !(sigma >= 0.0) {
        return Err(Error::Parameter(format!("require sigma >= 0, got {sigma}")));
    }
    let (n, k) = (n as f64, k as f64);
    Ok(((n + 2.0) * k + sigma * (k + 1.0)) / (n - 2.0 * k))
}

/// Exact rational version of [`q_star`].
pub fn q_star_exact(n: u32, k: u32, sigma: Rational) -> Result<Rational> {
    require_supercritical_dimension(n, k)?;
    if sigma < Rational::from_integer(0) {
        return Err(Error::Parameter(format!("require sigma >= 0, got {sigma}")));
    }
    let (n, k) = (n as i64, k as i64);
    Ok((Rational::from_integer((n + 2) * k) + sigma * (k + 1)) / (n - 2 * k))
}

/// Joseph-Lundgren type exponent; `f64::INFINITY` when `n <= 2k + 8 + 4 sigma / k`.
pub fn q_jl(n: u32, k: u32, sigma: f64) -> Result<f64> {
    require_supercritical_dimension(n, k)?;
    if !(sigma >= 0.0) {
        return Err(Error::Parameter(format!("require sigma >= 0, got {sigma}")));
    }
    let (n, k) = (n as f64, k as f64);
    if n <= 2.0 * k + 8.0 + 4.0 * sigma / k {
        return Ok(f64::INFINITY);
    }
    let radicand = k * (2.0 * k + sigma) * ((k + 1.0) * n - k * (2.0 - sigma));
    if radicand < 0.0 {
        return Err(Error::Internal(format!("negative radicand {radicand} in q_JL")));
    }
    let root = 2.0 * radicand.sqrt();
    let num = k * (k + 1.0) * n - k * k * (2.0 - sigma) + 2.0 * k + sigma - root;
    let den = k * (k + 1.0) * n - 2.0 * k * k * (k + 3.0) - 2.0 * k * sigma - root;
    if !(den > 0.0) {
        return Err(Error::Internal(format!("non-positive denominator {den} in q_JL")));
    }
    Ok(k * num / den)
}

/// Reciprocal of `max_{[0,1]} r^(mu-2) / (1+r^2)^(mu/2)`.
pub fn d_mu(mu: f64) -> Result<f64> {
    if !(mu >= 2.0) {
        return Err(Error::Parameter(format!("require mu >= 2, got {mu}")));
    }
    Ok(if mu == 2.0 {
        1.0
    } else if mu <= 4.0 {
        let a = mu / 2.0;
        let b = (mu - 2.0) / 2.0;
        a.powf(a) / b.powf(b)
    } else {
        2f64.powf(mu / 2.0)
    })
}

/// Regime label of `q` relative to `q*(k, mu-2)` and `q_JL(k, mu-2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeClass {
    BelowCritical,
    Critical,
    SpiralWindow,
    AtOrAboveJl,
}

impl fmt::Display for RegimeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RegimeClass::BelowCritical => "below-critical",
            RegimeClass::Critical => "critical",
            RegimeClass::SpiralWindow => "spiral-window",
            RegimeClass::AtOrAboveJl => "at-or-above-jl",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regime {
    pub q_star: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub q_jl: f64,
    pub class: RegimeClass,
}

/// Serialises infinities as the string `"inf"` (JSON has no infinity).
pub fn serialize_extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ExactExponents {
    q: Rational,
    mu: Rational,
}

/// The tuple `(n, k, q, mu, lambda)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub n: u32,
    pub k: u32,
    pub q: f64,
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip)]
    exact: Option<ExactExponents>,
}

impl ProblemParams {
    pub fn new(n: u32, k: u32, q: f64, mu: f64) -> Result<Self> {
        let p = Self { n, k, q, mu, lambda: None, exact: None };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from exact exponents; regime labels then use exact comparisons.
    pub fn from_rationals(n: u32, k: u32, q: Rational, mu: Rational) -> Result<Self> {
        let to_f = |r: Rational| *r.numer() as f64 / *r.denom() as f64;
        let p = Self { n, k, q: to_f(q), mu: to_f(mu), lambda: None, exact: Some(ExactExponents { q, mu }) };
        p.validate()?;
        Ok(p)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Parameter(format!("require finite lambda >= 0, got {lambda}")));
        }
        self.lambda = Some(lambda);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        require_supercritical_dimension(self.n, self.k)?;
        if !(self.q > self.k as f64) || !self.q.is_finite() {
            return Err(Error::Parameter(format!("require q > k, got q = {}, k = {}", self.q, self.k)));
        }
        if !(self.mu >= 2.0) || !self.mu.is_finite() {
            return Err(Error::Parameter(format!("require mu >= 2, got {}", self.mu)));
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(Error::Parameter(format!("require finite lambda >= 0, got {l}")));
            }
        }
        c_nk(self.n, self.k)?;
        Ok(())
    }

    /// The load, which must be present and strictly positive.
    pub fn lambda(&self) -> Result<f64> {
        match self.lambda {
            Some(l) if l > 0.0 => Ok(l),
            Some(l) => Err(Error::Parameter(format!("operation requires lambda > 0, got {l}"))),
            None => Err(Error::Parameter("operation requires lambda".into())),
        }
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    pub fn kf(&self) -> f64 {
        self.k as f64
    }

    pub fn c_nk_exact(&self) -> Rational {
        c_nk(self.n, self.k).expect("validated on construction")
    }

    pub fn c_nk(&self) -> f64 {
        let c = self.c_nk_exact();
        *c.numer() as f64 / *c.denom() as f64
    }

    pub fn sigma(&self) -> f64 {
        self.mu - 2.0
    }

    pub fn q_star(&self) -> f64 {
        q_star(self.n, self.k, self.sigma()).expect("validated on construction")
    }

    pub fn q_jl(&self) -> Result<f64> {
        q_jl(self.n, self.k, self.sigma())
    }

    /// `2k + mu - 2`, the homogeneity degree of the source near the origin.
    pub fn source_degree(&self) -> f64 {
        2.0 * self.kf() + self.mu - 2.0
    }

    /// Scaling exponent `gamma = (q-k) / (2k + mu - 2)`.
    pub fn gamma(&self) -> f64 {
        match self.exact {
            Some(e) => {
                let g = (e.q - Rational::from_integer(self.k as i64))
                    / (e.mu + Rational::from_integer(2 * self.k as i64 - 2));
                *g.numer() as f64 / *g.denom() as f64
            }
            None => (self.q - self.kf()) / self.source_degree(),
        }
    }

    /// `rho_- = n - 2 + mu`, the x-intercept of the regular orbit's origin.
    pub fn rho_minus(&self) -> f64 {
        self.nf() - 2.0 + self.mu
    }

    pub fn rho_plus(&self) -> f64 {
        self.nf() - 2.0
    }

    /// Interior equilibrium of the t -> -infinity limit system.
    pub fn x_hat(&self) -> f64 {
        let (n, k) = (self.nf(), self.kf());
        (self.q * (n - 2.0 * k) - k * (n - 2.0 + self.mu)) / (self.q - k)
    }

    pub fn y_hat(&self) -> f64 {
        1.0 / self.gamma()
    }

    pub fn regime(&self) -> Regime {
        classify_regime(self)
    }
}

/// Classifies `q` against the exponents with `sigma = mu - 2`.
pub fn classify_regime(p: &ProblemParams) -> Regime {
    let q_star_v = p.q_star();
    let q_jl_v = p.q_jl().unwrap_or(f64::INFINITY);

    let vs_star = match p.exact {
        Some(e) => {
            let qs = q_star_exact(p.n, p.k, e.mu - Rational::from_integer(2)).expect("validated");
            e.q.cmp(&qs)
        }
        None => {
            if (p.q - q_star_v).abs() <= CRITICAL_BAND * q_star_v.abs().max(1.0) {
                std::cmp::Ordering::Equal
            } else {
                p.q.partial_cmp(&q_star_v).expect("finite")
            }
        }
    };

    let class = match vs_star {
        std::cmp::Ordering::Less => RegimeClass::BelowCritical,
        std::cmp::Ordering::Equal => RegimeClass::Critical,
        std::cmp::Ordering::Greater => {
            if q_jl_v.is_infinite() || p.q < q_jl_v * (1.0 - CRITICAL_BAND) {
                RegimeClass::SpiralWindow
            } else {
                RegimeClass::AtOrAboveJl
            }
        }
    };
    Regime { q_star: q_star_v, q_jl: q_jl_v, class }
}

/// Lower bound `d(mu) C(n,k) (2k/(q-k))^k ((q-k)/q)^q` for the extremal load.
pub fn lambda_star_lower_bound(p: &ProblemParams) -> f64 {
    let k = p.kf();
    let binom = p.c_nk() * p.nf();
    let d = d_mu(p.mu).expect("validated on construction");
    d * binom * (2.0 * k / (p.q - k)).powf(k) * ((p.q - k) / p.q).powf(p.q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(a: i64, b: i64) -> Rational {
        Rational::new(a, b)
    }

    #[test]
    fn c_nk_values() {
        assert_eq!(c_nk(3, 1).unwrap(), r(1, 1));
        assert_eq!(c_nk(11, 1).unwrap(), r(1, 1));
        assert_eq!(c_nk(13, 2).unwrap(), r(6, 1));
        assert_eq!(c_nk(4, 2).unwrap(), r(3, 2));
        assert!(matches!(c_nk(3, 4), Err(Error::Parameter(_))));
        assert!(matches!(c_nk(3, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn tso_exponent_values() {
        assert_eq!(q_star_exact(11, 1, r(0, 1)).unwrap(), r(13, 9));
        assert_eq!(q_star_exact(3, 1, r(0, 1)).unwrap(), r(5, 1));
        assert_eq!(q_star_exact(13, 2, r(0, 1)).unwrap(), r(10, 3));
        assert!((q_star(11, 1, 0.0).unwrap() - 13.0 / 9.0).abs() < 1e-15);
        assert!(matches!(q_star(4, 2, 0.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn joseph_lundgren_values() {
        assert!(q_jl(10, 1, 0.0).unwrap().is_infinite());
        let s10 = 10f64.sqrt();
        let expected = (11.0 - 2.0 * s10) / (7.0 - 2.0 * s10);
        let v = q_jl(11, 1, 0.0).unwrap();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 6.922025).abs() < 1e-6);
        let v2 = q_jl(13, 2, 0.0).unwrap();
        assert!((v2 - 17.88).abs() < 5e-3, "{v2}");
        // boundary n = 2k + 8 + 4 sigma / k is still the infinite branch
        assert!(q_jl(14, 2, 1.0).unwrap().is_infinite());
    }

    #[test]
    fn regimes() {
        let p = ProblemParams::new(11, 1, 3.0, 2.0).unwrap();
        assert_eq!(p.regime().class, RegimeClass::SpiralWindow);

        let p = ProblemParams::from_rationals(11, 1, r(13, 9), r(2, 1)).unwrap();
        assert_eq!(p.regime().class, RegimeClass::Critical);
        let p = ProblemParams::new(11, 1, 13.0 / 9.0, 2.0).unwrap();
        assert_eq!(p.regime().class, RegimeClass::Critical);

        let p = ProblemParams::new(3, 1, 5.0, 2.0).unwrap();
        let reg = p.regime();
        assert_eq!(reg.class, RegimeClass::Critical);
        assert!(reg.q_jl.is_infinite());

        let p = ProblemParams::new(11, 1, 1.2, 2.0).unwrap();
        assert_eq!(p.regime().class, RegimeClass::BelowCritical);
        let p = ProblemParams::new(11, 1, 8.0, 2.0).unwrap();
        assert_eq!(p.regime().class, RegimeClass::AtOrAboveJl);
    }

    #[test]
    fn d_mu_table() {
        assert_eq!(d_mu(2.0).unwrap(), 1.0);
        assert!((d_mu(4.0).unwrap() - 4.0).abs() < 1e-14);
        assert!((d_mu(6.0).unwrap() - 8.0).abs() < 1e-14);
        assert!(matches!(d_mu(1.5), Err(Error::Parameter(_))));
    }

    #[test]
    fn lower_bound_values() {
        let p = ProblemParams::new(11, 1, 3.0, 2.0).unwrap();
        assert!((lambda_star_lower_bound(&p) - 88.0 / 27.0).abs() < 1e-13);
        let p = ProblemParams::new(3, 1, 2.0, 2.0).unwrap();
        assert!((lambda_star_lower_bound(&p) - 1.5).abs() < 1e-14);
        // q -> k+ gives d C(n,k) (2k)^k
        let near = ProblemParams::new(11, 1, 1.0 + 1e-9, 2.0).unwrap();
        assert!((lambda_star_lower_bound(&near) - 22.0).abs() < 1e-6);
    }

    #[test]
    fn validation() {
        assert!(ProblemParams::new(3, 2, 3.0, 2.0).is_err());
        assert!(ProblemParams::new(11, 1, 1.0, 2.0).is_err());
        assert!(ProblemParams::new(11, 1, 3.0, 1.9).is_err());
        let p = ProblemParams::new(11, 1, 3.0, 2.0).unwrap();
        assert!(p.with_lambda(-1.0).is_err());
        assert!(p.lambda().is_err());
        assert_eq!(p.with_lambda(2.0).unwrap().lambda().unwrap(), 2.0);
    }

    #[test]
    fn equilibrium_constants() {
        let p = ProblemParams::new(11, 1, 3.0, 2.0).unwrap();
        assert_eq!(p.x_hat(), 8.0);
        assert_eq!(p.y_hat(), 1.0);
        assert_eq!(p.gamma(), 1.0);
        let p = ProblemParams::new(13, 2, 5.0, 2.0).unwrap();
        assert!((p.x_hat() - 19.0 / 3.0).abs() < 1e-14);
        assert!((p.y_hat() - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn star_below_jl_on_grid() {
        for k in 1..=3u32 {
            for sigma in [0.0, 1.0, 2.0] {
                for n in (2 * k + 1)..=40 {
                    let jl = q_jl(n, k, sigma).unwrap();
                    if (n as f64) > 2.0 * k as f64 + 8.0 + 4.0 * sigma / k as f64 {
                        assert!(jl.is_finite());
                        assert!(q_star(n, k, sigma).unwrap() < jl, "n={n} k={k} sigma={sigma}");
                    } else {
                        assert!(jl.is_infinite());
                    }
                }
            }
        }
    }

    #[test]
    fn classical_jl_form() {
        for n in 11..=40u32 {
            let nf = n as f64;
            let classical = 1.0 + 4.0 / (nf - 4.0 - 2.0 * (nf - 1.0).sqrt());
            assert!((q_jl(n, 1, 0.0).unwrap() - classical).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn regime_serialises_infinity_as_string() {
        let p = ProblemParams::new(10, 1, 3.0, 2.0).unwrap();
        let s = serde_json::to_string(&p.regime()).unwrap();
        assert!(s.contains("\"q_jl\":\"inf\""), "{s}");
        assert!(s.contains("spiral-window"));
    }
}
