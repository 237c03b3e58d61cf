//! Error measurement, moduli of continuity, theorem-bound checks and
//! refinement studies.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{barycentric_lattice, BasisFamily};
use crate::bernstein::Deriv;
use crate::config::{random_mesh, UNIT_SQUARE};
use crate::error::{QiError, Result};
use crate::functions::{Smoothness, TestFunction};
use crate::mesh::{CrissCrossMesh, Point, TriangleRef};
use crate::operators::{Operator, OperatorKind, SplineFunction};

/// Error estimates, one per statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theorem {
    /// `||f - Qf|| <= C0 w(f, h/2)`.
    T1,
    /// `||f - Qf|| <= C1 h w(Df, h/2)`.
    T2,
    /// `||f - Qf|| <= C2 h^2 w(D^2 f, h/2)`.
    T3i,
    /// `||f - Qf|| <= C3 h^3 ||D^3 f||`.
    T3ii,
    /// `|alpha| = 1`: `[1 + C1bar h/delta] w(Df, h/2)`.
    T4,
    /// `|alpha| = 1`: `[1 + C2bar h/delta] h w(D^2 f, h/2)`.
    T5i,
    /// `|alpha| = 1`: `C3bar (h/delta) h^2 ||D^3 f||`.
    T5ii,
    /// `|alpha| = 2`, triangle interiors: `[1 + D2 (h/delta)^2] w(D^2 f, h/2)`.
    T6i,
    /// `|alpha| = 2`, triangle interiors: `[1 + D3 (h/delta)^2] h ||D^3 f||`.
    T6ii,
}

/// What the right-hand side is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rhs {
    Modulus(u8),
    Third,
}

impl Theorem {
    pub const ALL: [Theorem; 9] = [
        Theorem::T1,
        Theorem::T2,
        Theorem::T3i,
        Theorem::T3ii,
        Theorem::T4,
        Theorem::T5i,
        Theorem::T5ii,
        Theorem::T6i,
        Theorem::T6ii,
    ];

    /// `|alpha|` of the estimated derivative.
    pub fn derivative_order(self) -> u8 {
        match self {
            Theorem::T1 | Theorem::T2 | Theorem::T3i | Theorem::T3ii => 0,
            Theorem::T4 | Theorem::T5i | Theorem::T5ii => 1,
            Theorem::T6i | Theorem::T6ii => 2,
        }
    }

    fn rhs(self) -> Rhs {
        match self {
            Theorem::T1 => Rhs::Modulus(0),
            Theorem::T2 | Theorem::T4 => Rhs::Modulus(1),
            Theorem::T3i | Theorem::T5i | Theorem::T6i => Rhs::Modulus(2),
            Theorem::T3ii | Theorem::T5ii | Theorem::T6ii => Rhs::Third,
        }
    }

    /// Right-hand side from the constant, mesh ratios and the smoothness term.
    pub fn bound(self, kind: OperatorKind, h: f64, delta: f64, term: f64) -> f64 {
        let c = BoundTable::constant(self, kind);
        let r = h / delta;
        match self {
            Theorem::T1 => c * term,
            Theorem::T2 => c * h * term,
            Theorem::T3i => c * h * h * term,
            Theorem::T3ii => c * h.powi(3) * term,
            Theorem::T4 => (1.0 + c * r) * term,
            Theorem::T5i => (1.0 + c * r) * h * term,
            Theorem::T5ii => c * r * h * h * term,
            Theorem::T6i => (1.0 + c * r * r) * term,
            Theorem::T6ii => (1.0 + c * r * r) * h * term,
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Theorem::T1 => "1",
            Theorem::T2 => "2",
            Theorem::T3i => "3i",
            Theorem::T3ii => "3ii",
            Theorem::T4 => "4",
            Theorem::T5i => "5i",
            Theorem::T5ii => "5ii",
            Theorem::T6i => "6i",
            Theorem::T6ii => "6ii",
        })
    }
}

impl FromStr for Theorem {
    type Err = QiError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().trim_start_matches(['t', 'T']);
        Theorem::ALL
            .into_iter()
            .find(|t| t.to_string() == key)
            .ok_or_else(|| QiError::Config(format!("unknown theorem '{s}' (expected 1, 2, 3i, 3ii, 4, 5i, 5ii, 6i, 6ii)")))
    }
}

impl Serialize for TheoremName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

/// Serializes a theorem by its short name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremName(pub Theorem);

/// Constants used inside the proofs; recorded for reference only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemmaConstant {
    C1Prime,
    C2Prime,
    C2Second,
}

/// The published constants per operator.
pub struct BoundTable;

impl BoundTable {
    pub fn constant(theorem: Theorem, kind: OperatorKind) -> f64 {
        let (s2, w2) = match theorem {
            Theorem::T1 => (20.5, 12.0),
            Theorem::T2 => (3.0, 2.0),
            Theorem::T3i => (0.75, 0.5),
            Theorem::T3ii => (1.0 / 8.0, 1.0 / 12.0),
            Theorem::T4 => (120.0, 70.0),
            Theorem::T5i => (122.0, 65.0),
            Theorem::T5ii => (269.0 / 12.0, 65.0 / 6.0),
            Theorem::T6i => (183.0, 195.0 / 2.0),
            Theorem::T6ii => (269.0 / 8.0, 65.0 / 4.0),
        };
        match kind {
            OperatorKind::S2 => s2,
            OperatorKind::W2star => w2,
        }
    }

    pub fn lemma(c: LemmaConstant, kind: OperatorKind) -> f64 {
        let (s2, w2) = match c {
            LemmaConstant::C1Prime => (30.0, 35.0 / 2.0),
            LemmaConstant::C2Prime => (61.0 / 2.0, 65.0 / 4.0),
            LemmaConstant::C2Second => (269.0 / 48.0, 65.0 / 24.0),
        };
        match kind {
            OperatorKind::S2 => s2,
            OperatorKind::W2star => w2,
        }
    }
}

/// Fixed barycentric sample points per triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRule {
    /// Lattice order `d`: interior points `(i, j, k) / d` with `i, j, k >= 1`.
    pub order: usize,
}

impl Default for SampleRule {
    fn default() -> Self {
        SampleRule { order: 6 }
    }
}

impl SampleRule {
    pub fn new(order: usize) -> Result<Self> {
        if order < 3 {
            return Err(QiError::Config(format!("sample order must be >= 3, got {order}")));
        }
        Ok(SampleRule { order })
    }

    /// Interior lattice, plus the vertices when `|alpha| <= 1`.
    pub fn points(&self, alpha: Deriv) -> Vec<[f64; 3]> {
        let mut pts = barycentric_lattice(self.order, true);
        if alpha.order() <= 1 {
            pts.extend([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        }
        pts
    }

    pub fn describe(&self, alpha: Deriv) -> String {
        let interior = (self.order - 1) * (self.order - 2) / 2;
        if alpha.order() <= 1 {
            format!("{interior} interior lattice points (order {}) + 3 vertices per triangle", self.order)
        } else {
            format!("{interior} interior lattice points (order {}) per triangle", self.order)
        }
    }
}

fn cartesian(v: &[Point; 3], b: [f64; 3]) -> Point {
    Point::new(
        b[0] * v[0].x + b[1] * v[1].x + b[2] * v[2].x,
        b[0] * v[0].y + b[1] * v[1].y + b[2] * v[2].y,
    )
}

/// `max |D^alpha f - D^alpha s|` over the sample rule on every triangle.
pub fn sup_error_of(sf: &SplineFunction, f: &TestFunction, alpha: Deriv, rule: SampleRule) -> Result<f64> {
    let mesh = sf.mesh();
    f.derivative(alpha, mesh.vertex(0, 0))?;
    let pts = rule.points(alpha);
    let triangles: Vec<TriangleRef> = mesh.triangles().collect();
    triangles
        .par_iter()
        .map(|&t| {
            let v = mesh.triangle_vertices(t);
            let patch = sf.patch(t);
            pts.iter().try_fold(0.0f64, |acc, &b| {
                let exact = f.derivative(alpha, cartesian(&v, b))?;
                Ok(acc.max((exact - patch.derivative_barycentric(alpha, b)).abs()))
            })
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Measured error with, when checked against a theorem, its bound.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub operator: OperatorKind,
    pub function: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem: Option<TheoremName>,
    pub alpha: Deriv,
    pub error: f64,
    pub samples: String,
    pub m: usize,
    pub n: usize,
    pub h: f64,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub passed: Option<bool>,
    /// Analytic upper bound of the modulus used in the bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modulus_analytic: Option<f64>,
    /// Sampled lower estimate of the same modulus (informational).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modulus_sampled: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub third_derivative_norm: Option<f64>,
}

pub fn sup_error(f: &TestFunction, op: &Operator, alpha: Deriv, rule: SampleRule) -> Result<ErrorReport> {
    let sf = op.apply(|p| f.value(p))?;
    let error = sup_error_of(&sf, f, alpha, rule)?;
    Ok(plain_report(op, f, alpha, error, rule))
}

fn plain_report(op: &Operator, f: &TestFunction, alpha: Deriv, error: f64, rule: SampleRule) -> ErrorReport {
    let mesh = op.mesh();
    let r = mesh.ratios();
    ErrorReport {
        operator: op.kind(),
        function: f.to_string(),
        theorem: None,
        alpha,
        error,
        samples: rule.describe(alpha),
        m: mesh.m(),
        n: mesh.n(),
        h: r.h,
        delta: r.delta,
        bound: None,
        margin: None,
        passed: None,
        modulus_analytic: None,
        modulus_sampled: None,
        third_derivative_norm: None,
    }
}

/// Sampled `max |g(M) - g(P)|` over pairs of a `grid x grid` lattice of the
/// domain with `|MP| <= t`; a lower estimate of the modulus of continuity.
pub fn modulus<G: Fn(Point) -> f64 + Sync>(g: G, t: f64, domain: [f64; 4], grid: usize) -> Result<f64> {
    if !(t > 0.0) || grid < 2 {
        return Err(QiError::Config(format!("modulus needs t > 0 and grid >= 2 (t = {t}, grid = {grid})")));
    }
    let [a, b, c, d] = domain;
    let (dx, dy) = ((b - a) / (grid - 1) as f64, (d - c) / (grid - 1) as f64);
    let at = |i: usize, j: usize| Point::new(a + dx * i as f64, c + dy * j as f64);
    let mut values = vec![0.0; grid * grid];
    for j in 0..grid {
        for i in 0..grid {
            let p = at(i, j);
            let v = g(p);
            if !v.is_finite() {
                return Err(QiError::NonFinite { x: p.x, y: p.y, value: v });
            }
            values[j * grid + i] = v;
        }
    }
    // half-plane of offsets so every pair is visited once
    let ri = (t / dx).floor() as isize;
    let rj = (t / dy).floor() as isize;
    let mut offsets = Vec::new();
    for oj in 0..=rj {
        for oi in -ri..=ri {
            if (oj == 0 && oi <= 0) || (dx * oi as f64).hypot(dy * oj as f64) > t {
                continue;
            }
            offsets.push((oi, oj));
        }
    }
    let g = grid as isize;
    Ok((0..grid)
        .into_par_iter()
        .map(|j| {
            let mut best: f64 = 0.0;
            for i in 0..grid {
                let v = values[j * grid + i];
                for &(oi, oj) in &offsets {
                    let (ii, jj) = (i as isize + oi, j as isize + oj);
                    if ii >= 0 && ii < g && jj < g {
                        best = best.max((v - values[jj as usize * grid + ii as usize]).abs());
                    }
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max))
}

/// Options for `check_bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    pub rule: SampleRule,
    /// Grid for the informational sampled modulus; `None` skips it.
    pub modulus_grid: Option<usize>,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions { rule: SampleRule::default(), modulus_grid: Some(51) }
    }
}

fn require_smoothness(theorem: Theorem, f: &TestFunction) -> Result<()> {
    let need = match theorem {
        Theorem::T1 => Smoothness::Lipschitz,
        _ => Smoothness::Smooth,
    };
    match f.smoothness() {
        Some(s) if s >= need => Ok(()),
        Some(_) => Err(QiError::MissingSmoothness(format!(
            "{f} is not smooth enough for theorem {theorem}"
        ))),
        None => Err(QiError::MissingSmoothness(format!("{f} declares no smoothness metadata"))),
    }
}

/// Check one theorem for one derivative against an already applied spline.
pub fn check_bound_of(
    theorem: Theorem,
    op: &Operator,
    sf: &SplineFunction,
    f: &TestFunction,
    alpha: Deriv,
    opts: BoundOptions,
) -> Result<ErrorReport> {
    require_smoothness(theorem, f)?;
    if alpha.order() != theorem.derivative_order() {
        return Err(QiError::Config(format!(
            "theorem {theorem} bounds derivatives of order {}, got {alpha}",
            theorem.derivative_order()
        )));
    }
    let mesh = op.mesh();
    let domain = mesh.domain();
    let r = mesh.ratios();
    let t = r.h / 2.0;
    let mut report = plain_report(op, f, alpha, sup_error_of(sf, f, alpha, opts.rule)?, opts.rule);
    let term = match theorem.rhs() {
        Rhs::Modulus(k) => {
            let w = f.modulus_bound(k, t, domain)?;
            report.modulus_analytic = Some(w);
            if let Some(grid) = opts.modulus_grid {
                let mut sampled: f64 = 0.0;
                for beta in Deriv::of_order(k) {
                    let g = |p: Point| f.derivative(beta, p).unwrap_or(f64::NAN);
                    sampled = sampled.max(modulus(g, t, domain, grid)?);
                }
                report.modulus_sampled = Some(sampled);
            }
            w
        }
        Rhs::Third => {
            let d3 = f.derivative_sup(3, domain)?;
            report.third_derivative_norm = Some(d3);
            d3
        }
    };
    let bound = theorem.bound(op.kind(), r.h, r.delta, term);
    report.theorem = Some(TheoremName(theorem));
    report.bound = Some(bound);
    report.margin = Some(bound - report.error);
    report.passed = Some(report.error <= bound);
    Ok(report)
}

pub fn check_bound(theorem: Theorem, op: &Operator, f: &TestFunction, alpha: Deriv, opts: BoundOptions) -> Result<ErrorReport> {
    require_smoothness(theorem, f)?;
    let sf = op.apply(|p| f.value(p))?;
    check_bound_of(theorem, op, &sf, f, alpha, opts)
}

/// One report per multi-index of the theorem's derivative order.
pub fn check_theorem(theorem: Theorem, op: &Operator, f: &TestFunction, opts: BoundOptions) -> Result<Vec<ErrorReport>> {
    require_smoothness(theorem, f)?;
    let sf = op.apply(|p| f.value(p))?;
    Deriv::of_order(theorem.derivative_order())
        .into_iter()
        .map(|alpha| check_bound_of(theorem, op, &sf, f, alpha, opts))
        .collect()
}

/// Largest Lebesgue-function value on a `grid x grid` lattice of the closed domain.
pub fn lebesgue_sup(op: &Operator, grid: usize) -> Result<(f64, Point)> {
    if grid < 2 {
        return Err(QiError::Config("Lebesgue grid must be at least 2x2".into()));
    }
    let [a, b, c, d] = op.mesh().domain();
    let pts: Vec<Point> = (0..grid * grid)
        .map(|k| {
            let (i, j) = (k % grid, k / grid);
            let x = if i + 1 == grid { b } else { a + (b - a) * i as f64 / (grid - 1) as f64 };
            let y = if j + 1 == grid { d } else { c + (d - c) * j as f64 / (grid - 1) as f64 };
            Point::new(x, y)
        })
        .collect();
    pts.par_iter()
        .map(|&p| op.lebesgue_function(p).map(|v| (v, p)))
        .try_reduce(
            || (0.0, Point::new(a, c)),
            |x, y| Ok(if y.0 > x.0 || (y.0 == x.0 && (y.1.y, y.1.x) < (x.1.y, x.1.x)) { y } else { x }),
        )
}

fn default_m0() -> usize {
    4
}

fn default_sample_order() -> usize {
    SampleRule::default().order
}

fn unit_square() -> [f64; 4] {
    UNIT_SQUARE
}

/// A refinement study: level `k` uses `m0 2^k x n0 2^k` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub operator: OperatorKind,
    pub function: String,
    pub levels: usize,
    #[serde(default = "default_m0")]
    pub m0: usize,
    #[serde(default)]
    pub n0: Option<usize>,
    #[serde(default = "unit_square")]
    pub domain: [f64; 4],
    /// Random quasi-uniform levels with this ratio bound; uniform when absent.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sample_order")]
    pub sample_order: usize,
}

impl StudyConfig {
    pub fn uniform(operator: OperatorKind, function: &str, m0: usize, levels: usize) -> Self {
        StudyConfig {
            operator,
            function: function.to_string(),
            levels,
            m0,
            n0: None,
            domain: UNIT_SQUARE,
            gamma: None,
            seed: 0,
            sample_order: default_sample_order(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| QiError::Config(format!("invalid study config: {e}")))
    }

    pub fn level_mesh(&self, level: usize) -> Result<CrissCrossMesh> {
        let m = self.m0 << level;
        let n = self.n0.unwrap_or(self.m0) << level;
        match self.gamma {
            None => CrissCrossMesh::uniform(m, n, self.domain),
            Some(g) => random_mesh(m, n, g, self.seed.wrapping_add(level as u64), self.domain),
        }
    }

    /// One-line description echoed into outputs.
    pub fn header(&self) -> String {
        let meshes = match self.gamma {
            None => "uniform".to_string(),
            Some(g) => format!("random gamma={g}"),
        };
        format!(
            "operator={} function={} levels={} m0={} n0={} domain={:?} meshes={} seed={} samples={}",
            self.operator,
            self.function,
            self.levels,
            self.m0,
            self.n0.unwrap_or(self.m0),
            self.domain,
            meshes,
            self.seed,
            SampleRule { order: self.sample_order }.describe(Deriv::VALUE)
        )
    }
}

/// Errors for the six derivatives of order <= 2 at one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub m: usize,
    pub n: usize,
    pub h: f64,
    pub delta: f64,
    pub gamma: f64,
    /// In `Deriv::UP_TO_SECOND` order.
    pub errors: [f64; 6],
    /// `log(e_prev / e) / log(h_prev / h)`; absent on the first level.
    pub orders: Option<[f64; 6]>,
}

pub fn convergence_study(cfg: &StudyConfig) -> Result<Vec<ConvergenceRow>> {
    if cfg.levels == 0 {
        return Err(QiError::Config("a study needs at least one level".into()));
    }
    let f: TestFunction = cfg.function.parse()?;
    let rule = SampleRule::new(cfg.sample_order)?;
    for alpha in Deriv::UP_TO_SECOND {
        f.derivative(alpha, Point::new(cfg.domain[0], cfg.domain[2]))?;
    }
    let mut rows = (0..cfg.levels)
        .into_par_iter()
        .map(|level| {
            let mesh = cfg.level_mesh(level)?;
            let op = Operator::new(cfg.operator, std::sync::Arc::new(BasisFamily::build(&mesh)?));
            let sf = op.apply(|p| f.value(p))?;
            let mut errors = [0.0; 6];
            for (e, alpha) in errors.iter_mut().zip(Deriv::UP_TO_SECOND) {
                *e = sup_error_of(&sf, &f, alpha, rule)?;
            }
            let r = mesh.ratios();
            Ok(ConvergenceRow {
                level,
                m: mesh.m(),
                n: mesh.n(),
                h: r.h,
                delta: r.delta,
                gamma: r.gamma,
                errors,
                orders: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for k in 1..rows.len() {
        let (prev, cur) = (&rows[k - 1], &rows[k]);
        let lh = (prev.h / cur.h).ln();
        let mut ord = [0.0; 6];
        for a in 0..6 {
            ord[a] = (prev.errors[a] / cur.errors[a]).ln() / lh;
        }
        rows[k].orders = Some(ord);
    }
    Ok(rows)
}

pub const CSV_COLUMNS: &str =
    "level,m,n,h,delta,gamma,err00,err10,err01,err20,err11,err02,ord00,ord10,ord01,ord20,ord11,ord02";

fn sci(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

/// CSV with a leading `# ...` line naming the configuration and seed.
pub fn write_convergence_csv<W: Write>(mut w: W, cfg: &StudyConfig, rows: &[ConvergenceRow]) -> std::io::Result<()> {
    writeln!(w, "# {}", cfg.header())?;
    writeln!(w, "{CSV_COLUMNS}")?;
    for r in rows {
        let mut fields = vec![
            r.level.to_string(),
            r.m.to_string(),
            r.n.to_string(),
            sci(r.h),
            sci(r.delta),
            sci(r.gamma),
        ];
        fields.extend(r.errors.iter().map(|&e| sci(e)));
        match &r.orders {
            Some(o) => fields.extend(o.iter().map(|&x| sci(x))),
            None => fields.extend(std::iter::repeat_n(String::new(), 6)),
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}
