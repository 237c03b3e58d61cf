//! Registry of test functions with exact derivatives and the smoothness data
//! needed to evaluate error-bound right-hand sides.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use crate::bernstein::Deriv;
use crate::error::{QiError, Result};
use crate::mesh::Point;
use crate::polynomial::Polynomial;

/// `C^k` class; `Smooth` means every order is available with bounded derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Smoothness {
    /// Continuous and Lipschitz, derivatives not provided.
    Lipschitz,
    Smooth,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `poly:{"a1,a2": c, ...}`.
    Poly { source: String, poly: Polynomial },
    /// `exp(x + y)`.
    ExpSum,
    /// `sin(pi x) sin(pi y)`.
    Sine,
    /// Franke's exponential test function.
    Franke,
    /// `|x - c|`.
    AbsRidge(f64),
}

/// One factor `exp(-(a u^2 + b u + c))` of a separable Gaussian term.
#[derive(Debug, Clone, Copy)]
struct Gauss1 {
    a: f64,
    b: f64,
    c: f64,
}

impl Gauss1 {
    fn deriv(self, k: u8, u: f64) -> f64 {
        let g = (-(self.a * u * u + self.b * u + self.c)).exp();
        let p1 = 2.0 * self.a * u + self.b;
        match k {
            0 => g,
            1 => -p1 * g,
            2 => (p1 * p1 - 2.0 * self.a) * g,
            _ => unreachable!("orders checked by caller"),
        }
    }
}

const fn gauss(a: f64, b: f64, c: f64) -> Gauss1 {
    Gauss1 { a, b, c }
}

/// Franke's function as four terms `w * gx(x) * gy(y)`.
const FRANKE: [(f64, Gauss1, Gauss1); 4] = [
    (0.75, gauss(81.0 / 4.0, -9.0, 1.0), gauss(81.0 / 4.0, -9.0, 1.0)),
    (0.75, gauss(81.0 / 49.0, 18.0 / 49.0, 1.0 / 49.0), gauss(0.0, 0.9, 0.1)),
    (0.5, gauss(81.0 / 4.0, -31.5, 49.0 / 4.0), gauss(81.0 / 4.0, -13.5, 9.0 / 4.0)),
    (-0.2, gauss(81.0, -72.0, 16.0), gauss(81.0, -126.0, 49.0)),
];

/// `d^k/du^k sin(u)`.
fn sin_deriv(k: u8, u: f64) -> f64 {
    match k % 4 {
        0 => u.sin(),
        1 => u.cos(),
        2 => -u.sin(),
        _ => -u.cos(),
    }
}

/// `sup |d^k/du^k sin(pi u)| / pi^k` over `[a, b]`.
fn sup_trig(k: u8, a: f64, b: f64) -> f64 {
    // |sin| peaks at half-integers, |cos| at integers
    let shift = if k % 2 == 0 { 0.5 } else { 0.0 };
    if (a - shift).ceil() <= b - shift {
        return 1.0;
    }
    sin_deriv(k, PI * a).abs().max(sin_deriv(k, PI * b).abs())
}

fn parse_poly(body: &str) -> Result<Polynomial> {
    let map: std::collections::BTreeMap<String, f64> = serde_json::from_str(body)
        .map_err(|e| QiError::Config(format!("poly coefficients must be a JSON map like {{\"2,0\":1}}: {e}")))?;
    let mut terms = Vec::with_capacity(map.len());
    for (k, c) in map {
        let exps = k
            .split_once(',')
            .and_then(|(a, b)| Some((a.trim().parse::<u32>().ok()?, b.trim().parse::<u32>().ok()?)))
            .ok_or_else(|| QiError::Config(format!("poly exponent key must look like 'a1,a2', got '{k}'")))?;
        terms.push((exps, c));
    }
    Ok(Polynomial::new(terms))
}

impl FromStr for TestFunction {
    type Err = QiError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(body) = s.strip_prefix("poly:") {
            return Ok(TestFunction::Poly { source: body.to_string(), poly: parse_poly(body)? });
        }
        if let Some(c) = s.strip_prefix("abs-ridge:") {
            let c: f64 = c
                .parse()
                .map_err(|_| QiError::Config(format!("abs-ridge needs a number, got '{c}'")))?;
            if !c.is_finite() {
                return Err(QiError::Config("abs-ridge offset must be finite".into()));
            }
            return Ok(TestFunction::AbsRidge(c));
        }
        match s {
            "exp-sum" => Ok(TestFunction::ExpSum),
            "sine" => Ok(TestFunction::Sine),
            "franke" => Ok(TestFunction::Franke),
            other => Err(QiError::Config(format!(
                "unknown function '{other}' (expected poly:<map>, exp-sum, sine, franke, abs-ridge:<c>)"
            ))),
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Poly { source, .. } => write!(f, "poly:{source}"),
            TestFunction::ExpSum => f.write_str("exp-sum"),
            TestFunction::Sine => f.write_str("sine"),
            TestFunction::Franke => f.write_str("franke"),
            TestFunction::AbsRidge(c) => write!(f, "abs-ridge:{c}"),
        }
    }
}

impl TestFunction {
    pub fn polynomial(p: Polynomial) -> Self {
        let body = p
            .terms()
            .map(|((a, b), c)| format!("\"{a},{b}\":{c}"))
            .collect::<Vec<_>>()
            .join(",");
        TestFunction::Poly { source: format!("{{{body}}}"), poly: p }
    }

    pub fn value(&self, p: Point) -> f64 {
        match self {
            TestFunction::AbsRidge(c) => (p.x - c).abs(),
            _ => self.derivative(Deriv::VALUE, p).expect("values are always available"),
        }
    }

    /// `D^alpha f(p)`, exact.
    pub fn derivative(&self, alpha: Deriv, p: Point) -> Result<f64> {
        let unavailable = || QiError::DerivativeUnavailable(alpha.dx, alpha.dy);
        Ok(match self {
            TestFunction::Poly { poly, .. } => poly.derivative(u32::from(alpha.dx), u32::from(alpha.dy)).eval(p),
            TestFunction::ExpSum => (p.x + p.y).exp(),
            TestFunction::Sine => {
                PI.powi(i32::from(alpha.order())) * sin_deriv(alpha.dx, PI * p.x) * sin_deriv(alpha.dy, PI * p.y)
            }
            TestFunction::Franke => {
                if alpha.dx > 2 || alpha.dy > 2 || alpha.order() > 2 {
                    return Err(unavailable());
                }
                FRANKE
                    .iter()
                    .map(|(w, gx, gy)| w * gx.deriv(alpha.dx, p.x) * gy.deriv(alpha.dy, p.y))
                    .sum()
            }
            TestFunction::AbsRidge(c) => {
                if alpha.order() > 0 {
                    return Err(unavailable());
                }
                (p.x - c).abs()
            }
        })
    }

    /// Declared smoothness; `None` when no bound metadata is available.
    pub fn smoothness(&self) -> Option<Smoothness> {
        match self {
            TestFunction::Poly { .. } | TestFunction::ExpSum | TestFunction::Sine => Some(Smoothness::Smooth),
            TestFunction::AbsRidge(_) => Some(Smoothness::Lipschitz),
            TestFunction::Franke => None,
        }
    }

    /// `max_{|alpha| = k} sup_Omega |D^alpha f|` (an upper bound for polynomials).
    pub fn derivative_sup(&self, k: u8, domain: [f64; 4]) -> Result<f64> {
        let [a, b, c, d] = domain;
        match self {
            TestFunction::Poly { poly, .. } => Ok(Deriv::of_order(k)
                .into_iter()
                .map(|al| poly.derivative(u32::from(al.dx), u32::from(al.dy)).sup_bound(domain))
                .fold(0.0, f64::max)),
            TestFunction::ExpSum => Ok((b + d).exp()),
            TestFunction::Sine => Ok(PI.powi(i32::from(k))
                * Deriv::of_order(k)
                    .into_iter()
                    .map(|al| sup_trig(al.dx, a, b) * sup_trig(al.dy, c, d))
                    .fold(0.0, f64::max)),
            TestFunction::AbsRidge(_) if k == 0 => Ok((a - self.offset()).abs().max((b - self.offset()).abs())),
            _ => Err(QiError::MissingSmoothness(format!("{self} has no bound for derivatives of order {k}"))),
        }
    }

    fn offset(&self) -> f64 {
        match self {
            TestFunction::AbsRidge(c) => *c,
            _ => 0.0,
        }
    }

    /// Analytic upper bound of `omega(D^k f, t) = max_{|alpha|=k} omega(D^alpha f, t)`:
    /// `t * sqrt(2) * max_{|beta|=k+1} |D^beta f|`, or exactly `t` for the ridge.
    pub fn modulus_bound(&self, k: u8, t: f64, domain: [f64; 4]) -> Result<f64> {
        match self {
            TestFunction::AbsRidge(_) if k == 0 => Ok(t),
            TestFunction::AbsRidge(_) | TestFunction::Franke => Err(QiError::MissingSmoothness(format!(
                "{self} has no modulus bound for derivatives of order {k}"
            ))),
            _ => Ok(SQRT_2 * self.derivative_sup(k + 1, domain)? * t),
        }
    }
}
