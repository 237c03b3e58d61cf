//! Sparse bivariate polynomials in the monomial basis.

use std::collections::BTreeMap;

use crate::error::{QiError, Result};
use crate::mesh::Point;

/// `sum c_{a,b} x^a y^b`, keyed by exponent pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    terms: BTreeMap<(u32, u32), f64>,
}

impl Polynomial {
    pub fn new<I: IntoIterator<Item = ((u32, u32), f64)>>(terms: I) -> Self {
        let mut map = BTreeMap::new();
        for (e, c) in terms {
            *map.entry(e).or_insert(0.0) += c;
        }
        map.retain(|_, c| *c != 0.0);
        Polynomial { terms: map }
    }

    /// The monomial `e_alpha(x, y) = x^a1 y^a2`.
    pub fn monomial(a1: u32, a2: u32) -> Self {
        Polynomial::new([((a1, a2), 1.0)])
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new([((0, 0), c)])
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), f64)> + '_ {
        self.terms.iter().map(|(&e, &c)| (e, c))
    }

    /// Total degree; zero for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|(a, b)| a + b).max().unwrap_or(0)
    }

    pub fn eval(&self, p: Point) -> f64 {
        self.terms
            .iter()
            .map(|(&(a, b), &c)| c * p.x.powi(a as i32) * p.y.powi(b as i32))
            .sum()
    }

    pub fn derivative(&self, dx: u32, dy: u32) -> Polynomial {
        Polynomial::new(self.terms.iter().filter_map(|(&(a, b), &c)| {
            if a < dx || b < dy {
                return None;
            }
            let fa: f64 = (a - dx + 1..=a).map(f64::from).product();
            let fb: f64 = (b - dy + 1..=b).map(f64::from).product();
            Some(((a - dx, b - dy), c * fa * fb))
        }))
    }

    /// Upper bound for `|p|` on `[a, b] x [c, d]` from termwise maxima.
    pub fn sup_bound(&self, domain: [f64; 4]) -> f64 {
        let mx = domain[0].abs().max(domain[1].abs());
        let my = domain[2].abs().max(domain[3].abs());
        self.terms
            .iter()
            .map(|(&(a, b), &c)| c.abs() * mx.powi(a as i32) * my.powi(b as i32))
            .sum()
    }

    /// Symmetric bilinear polar form of a polynomial of degree <= 2,
    /// evaluated at `(u, v)`; agrees with `eval` when `u == v`.
    pub fn blossom(&self, u: Point, v: Point) -> Result<f64> {
        let deg = self.degree();
        if deg > 2 {
            return Err(QiError::DegreeTooHigh(deg));
        }
        Ok(self
            .terms
            .iter()
            .map(|(&e, &c)| {
                c * match e {
                    (0, 0) => 1.0,
                    (1, 0) => 0.5 * (u.x + v.x),
                    (0, 1) => 0.5 * (u.y + v.y),
                    (2, 0) => u.x * v.x,
                    (0, 2) => u.y * v.y,
                    (1, 1) => 0.5 * (u.x * v.y + u.y * v.x),
                    _ => unreachable!("degree checked above"),
                }
            })
            .sum())
    }
}
