//! The quasi-interpolants `S2` and `W2*`: coefficient functionals, application
//! to a function, evaluation of the resulting spline and the Lebesgue function.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisFamily;
use crate::bernstein::{BBPatch, Deriv, BARYCENTRIC_TOL};
use crate::error::{QiError, Result};
use crate::mesh::{barycentric, CrissCrossMesh, Partition1D, Point, TriangleRef};

/// Cross weights of `S2`. Vectors are indexed `0..=m+1` / `0..=n+1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct S2Coefficients {
    a: Vec<f64>,
    c: Vec<f64>,
    a_bar: Vec<f64>,
    c_bar: Vec<f64>,
}

fn cross_weights(p: &Partition1D) -> (Vec<f64>, Vec<f64>) {
    let n = p.cells();
    (0..=n + 1)
        .map(|i| {
            if i == 0 || i == n + 1 {
                return (0.0, 0.0);
            }
            let (s, sp) = (p.sigma(i), p.sigma_prime(i + 1));
            let den = s + sp;
            (-s * s * sp / den, -s * sp * sp / den)
        })
        .unzip()
}

impl S2Coefficients {
    pub fn new(mesh: &CrissCrossMesh) -> Self {
        let (a, c) = cross_weights(mesh.px());
        let (a_bar, c_bar) = cross_weights(mesh.py());
        S2Coefficients { a, c, a_bar, c_bar }
    }

    pub fn a(&self, i: usize) -> f64 {
        self.a[i]
    }

    pub fn c(&self, i: usize) -> f64 {
        self.c[i]
    }

    pub fn a_bar(&self, j: usize) -> f64 {
        self.a_bar[j]
    }

    pub fn c_bar(&self, j: usize) -> f64 {
        self.c_bar[j]
    }

    /// `b_ij = 1 - (a_i + c_i + a_bar_j + c_bar_j)`.
    pub fn b(&self, i: usize, j: usize) -> f64 {
        1.0 - (self.a[i] + self.c[i] + self.a_bar[j] + self.c_bar[j])
    }
}

/// Canonical name of a data site, so coincident sites compare equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum DataSite {
    /// `M_{i,j}`, `0 <= i <= m+1`, `0 <= j <= n+1`, excluding the four corners.
    Center { i: usize, j: usize },
    /// `A_{i,j}`, `0 <= i <= m`, `0 <= j <= n`.
    Vertex { i: usize, j: usize },
}

impl DataSite {
    fn center(mesh: &CrissCrossMesh, i: usize, j: usize) -> Self {
        let (m, n) = (mesh.m(), mesh.n());
        let xe = i == 0 || i == m + 1;
        let ye = j == 0 || j == n + 1;
        if xe && ye {
            DataSite::Vertex { i: i.min(m), j: j.min(n) }
        } else {
            DataSite::Center { i, j }
        }
    }

    pub fn point(self, mesh: &CrissCrossMesh) -> Point {
        match self {
            DataSite::Center { i, j } => mesh.center(i, j),
            DataSite::Vertex { i, j } => mesh.vertex(i, j),
        }
    }
}

impl fmt::Display for DataSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataSite::Center { i, j } => write!(f, "M[{i},{j}]"),
            DataSite::Vertex { i, j } => write!(f, "A[{i},{j}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalTerm {
    pub site: DataSite,
    pub point: Point,
    pub weight: f64,
}

/// A linear functional `f -> sum w_k f(site_k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Functional {
    pub index: (usize, usize),
    pub terms: Vec<FunctionalTerm>,
}

impl Functional {
    /// Merge coincident sites and drop zero weights.
    fn from_raw(mesh: &CrissCrossMesh, index: (usize, usize), raw: impl IntoIterator<Item = (DataSite, f64)>) -> Self {
        let mut merged: BTreeMap<DataSite, f64> = BTreeMap::new();
        for (s, w) in raw {
            *merged.entry(s).or_insert(0.0) += w;
        }
        let terms = merged
            .into_iter()
            .filter(|&(_, w)| w != 0.0)
            .map(|(site, weight)| FunctionalTerm { site, point: site.point(mesh), weight })
            .collect();
        Functional { index, terms }
    }

    pub fn apply(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.terms.iter().map(|t| t.weight * f(t.point)).sum()
    }

    pub fn weight_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }
}

/// `mu_ij` of `S2`: the five-point cross around `M_ij`.
pub fn s2_functional(mesh: &CrissCrossMesh, coeffs: &S2Coefficients, i: usize, j: usize) -> Result<Functional> {
    mesh.check_index(i, j)?;
    let mut raw = vec![(DataSite::center(mesh, i, j), coeffs.b(i, j))];
    if coeffs.a(i) != 0.0 {
        raw.push((DataSite::center(mesh, i - 1, j), coeffs.a(i)));
    }
    if coeffs.c(i) != 0.0 {
        raw.push((DataSite::center(mesh, i + 1, j), coeffs.c(i)));
    }
    if coeffs.a_bar(j) != 0.0 {
        raw.push((DataSite::center(mesh, i, j - 1), coeffs.a_bar(j)));
    }
    if coeffs.c_bar(j) != 0.0 {
        raw.push((DataSite::center(mesh, i, j + 1), coeffs.c_bar(j)));
    }
    Ok(Functional::from_raw(mesh, (i, j), raw))
}

/// All `S2` functionals in `index_slot` order.
pub fn s2_functionals(mesh: &CrissCrossMesh) -> Vec<Functional> {
    let coeffs = S2Coefficients::new(mesh);
    mesh.all_indices()
        .map(|(i, j)| s2_functional(mesh, &coeffs, i, j).expect("index in range"))
        .collect()
}

/// `lambda_ij` of `W2*`: `2 f(M_ij)` minus the mean of the four cell corners,
/// with vertex indices clamped to the mesh.
pub fn w2star_functional(mesh: &CrissCrossMesh, i: usize, j: usize) -> Result<Functional> {
    mesh.check_index(i, j)?;
    let clamp_x = |k: isize| k.clamp(0, mesh.m() as isize) as usize;
    let clamp_y = |k: isize| k.clamp(0, mesh.n() as isize) as usize;
    let (ii, jj) = (i as isize, j as isize);
    let mut raw = vec![(DataSite::center(mesh, i, j), 2.0)];
    for (di, dj) in [(-1, -1), (-1, 0), (0, -1), (0, 0)] {
        raw.push((DataSite::Vertex { i: clamp_x(ii + di), j: clamp_y(jj + dj) }, -0.25));
    }
    Ok(Functional::from_raw(mesh, (i, j), raw))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    S2,
    W2star,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 2] = [OperatorKind::S2, OperatorKind::W2star];

    /// Site count stated by the closed-form census of each scheme.
    pub fn nominal_site_count(self, m: usize, n: usize) -> usize {
        match self {
            OperatorKind::S2 => m * n + 2 * m + 2 * n + 4,
            OperatorKind::W2star => 2 * m * n + m + n + 1,
        }
    }

    /// Upper bound on the operator norm.
    pub fn norm_bound(self) -> f64 {
        match self {
            OperatorKind::S2 => 5.0,
            OperatorKind::W2star => 3.0,
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorKind::S2 => "s2",
            OperatorKind::W2star => "w2star",
        })
    }
}

impl FromStr for OperatorKind {
    type Err = QiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s2" => Ok(OperatorKind::S2),
            "w2star" => Ok(OperatorKind::W2star),
            other => Err(QiError::Config(format!("unknown operator '{other}' (expected s2 or w2star)"))),
        }
    }
}

/// A quasi-interpolant bound to a B-spline family.
#[derive(Debug, Clone)]
pub struct Operator {
    kind: OperatorKind,
    family: Arc<BasisFamily>,
    functionals: Vec<Functional>,
    sites: Vec<(DataSite, Point)>,
    /// Per index slot: (position in `sites`, weight).
    weights: Vec<Vec<(usize, f64)>>,
}

impl Operator {
    pub fn new(kind: OperatorKind, family: Arc<BasisFamily>) -> Self {
        let mesh = family.mesh();
        let functionals: Vec<Functional> = match kind {
            OperatorKind::S2 => s2_functionals(mesh),
            OperatorKind::W2star => mesh
                .all_indices()
                .map(|(i, j)| w2star_functional(mesh, i, j).expect("index in range"))
                .collect(),
        };
        let mut table: BTreeMap<DataSite, Point> = BTreeMap::new();
        for f in &functionals {
            for t in &f.terms {
                table.insert(t.site, t.point);
            }
        }
        let sites: Vec<(DataSite, Point)> = table.into_iter().collect();
        let weights = functionals
            .iter()
            .map(|f| {
                f.terms
                    .iter()
                    .map(|t| {
                        let k = sites.binary_search_by(|(s, _)| s.cmp(&t.site)).expect("site registered");
                        (k, t.weight)
                    })
                    .collect()
            })
            .collect();
        Operator {
            kind,
            family,
            functionals,
            sites,
            weights,
        }
    }

    /// Build the basis and the operator in one go.
    pub fn build(kind: OperatorKind, mesh: &CrissCrossMesh) -> Result<Self> {
        Ok(Operator::new(kind, Arc::new(BasisFamily::build(mesh)?)))
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn family(&self) -> &Arc<BasisFamily> {
        &self.family
    }

    pub fn mesh(&self) -> &CrissCrossMesh {
        self.family.mesh()
    }

    pub fn functionals(&self) -> &[Functional] {
        &self.functionals
    }

    pub fn functional(&self, i: usize, j: usize) -> Result<&Functional> {
        self.mesh().check_index(i, j)?;
        Ok(&self.functionals[self.mesh().index_slot(i, j)])
    }

    /// Distinct data sites, sorted by canonical key.
    pub fn sites(&self) -> &[(DataSite, Point)] {
        &self.sites
    }

    pub fn data_site_count(&self) -> usize {
        self.sites.len()
    }

    /// `Qf` as a mesh-wide BB net.
    pub fn apply<F: Fn(Point) -> f64 + Sync>(&self, f: F) -> Result<SplineFunction> {
        let values = self
            .sites
            .par_iter()
            .map(|&(_, p)| {
                let v = f(p);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(QiError::NonFinite { x: p.x, y: p.y, value: v })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        self.apply_site_values(&values)
    }

    /// `Qf` from precomputed values at `sites()`.
    pub fn apply_site_values(&self, values: &[f64]) -> Result<SplineFunction> {
        if values.len() != self.sites.len() {
            return Err(QiError::InvalidMatrix(format!(
                "expected {} site values, got {}",
                self.sites.len(),
                values.len()
            )));
        }
        let lambdas: Vec<f64> = self
            .weights
            .iter()
            .map(|ws| ws.iter().map(|&(k, w)| w * values[k]).sum())
            .collect();
        let mesh = self.mesh();
        let mut coeffs = vec![0.0; mesh.dof_count()];
        for (s, &l) in self.family.splines().iter().zip(&lambdas) {
            for &(d, c) in &s.coeffs {
                coeffs[d] += l * c;
            }
        }
        Ok(SplineFunction {
            mesh: mesh.clone(),
            coeffs,
            lambdas,
        })
    }

    /// `sum_xi |sum_ij w_{ij,xi} B_ij(P)|`, the norm of `f -> Qf(P)`.
    pub fn lebesgue_function(&self, p: Point) -> Result<f64> {
        let vals = self.family.values_at(p, Deriv::VALUE)?;
        Ok(self.lebesgue_from_values(&vals))
    }

    /// Same as `lebesgue_function` at barycentric coordinates of a triangle.
    pub fn lebesgue_at(&self, t: TriangleRef, b: [f64; 3]) -> f64 {
        self.lebesgue_from_values(&self.family.active_values(t, b, Deriv::VALUE))
    }

    fn lebesgue_from_values(&self, vals: &[(usize, f64)]) -> f64 {
        let mut acc: Vec<(usize, f64)> = Vec::with_capacity(35);
        for &(slot, v) in vals {
            for &(k, w) in &self.weights[slot] {
                match acc.iter_mut().find(|(s, _)| *s == k) {
                    Some(e) => e.1 += w * v,
                    None => acc.push((k, w * v)),
                }
            }
        }
        acc.iter().map(|(_, v)| v.abs()).sum()
    }
}

/// Result of a flagged evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub value: f64,
    pub triangle: TriangleRef,
    /// Second derivative taken on a triangle boundary, where it is one-sided.
    pub on_edge: bool,
}

/// A C1 quadratic spline stored as global BB coefficients.
#[derive(Debug, Clone)]
pub struct SplineFunction {
    mesh: CrissCrossMesh,
    coeffs: Vec<f64>,
    lambdas: Vec<f64>,
}

impl SplineFunction {
    pub fn mesh(&self) -> &CrissCrossMesh {
        &self.mesh
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient functional values in `index_slot` order.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn patch(&self, t: TriangleRef) -> BBPatch {
        BBPatch::new(self.mesh.triangle_vertices(t), self.mesh.triangle_dofs(t).map(|d| self.coeffs[d]))
            .expect("proper triangle")
    }

    pub fn evaluate(&self, p: Point, alpha: Deriv) -> Result<f64> {
        Ok(self.evaluate_flagged(p, alpha)?.value)
    }

    pub fn evaluate_flagged(&self, p: Point, alpha: Deriv) -> Result<Evaluation> {
        if alpha.order() > 2 {
            return Err(QiError::DerivativeUnavailable(alpha.dx, alpha.dy));
        }
        let t = self.mesh.locate(p)?;
        let b = barycentric(&self.mesh.triangle_vertices(t), p);
        let value = self.patch(t).derivative_barycentric(alpha, b);
        let on_edge = alpha.order() == 2 && b.iter().any(|&x| x.abs() <= BARYCENTRIC_TOL);
        Ok(Evaluation { value, triangle: t, on_edge })
    }

    /// Value at barycentric coordinates of a known triangle.
    pub fn evaluate_in(&self, t: TriangleRef, b: [f64; 3], alpha: Deriv) -> f64 {
        self.patch(t).derivative_barycentric(alpha, b)
    }

    pub fn evaluate_on(&self, points: &[Point], alpha: Deriv) -> Result<Vec<f64>> {
        points.par_iter().map(|&p| self.evaluate(p, alpha)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skewed() -> CrissCrossMesh {
        CrissCrossMesh::new(
            Partition1D::new(vec![0.0, 0.1, 0.35, 0.5, 1.0]).unwrap(),
            Partition1D::new(vec![0.0, 0.4, 0.45, 1.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn uniform_interior_weights() {
        let mesh = CrissCrossMesh::uniform(4, 4, [0.0, 1.0, 0.0, 1.0]).unwrap();
        let c = S2Coefficients::new(&mesh);
        for i in 2..=3 {
            assert!((c.a(i) + 0.125).abs() < 1e-15);
            assert!((c.c(i) + 0.125).abs() < 1e-15);
            assert!((c.a_bar(i) + 0.125).abs() < 1e-15);
            assert!((c.b(i, i) - 1.5).abs() < 1e-15);
        }
        assert_eq!(c.b(0, 0), 1.0);
        assert_eq!(c.a(0), 0.0);
        assert_eq!(c.c(5), 0.0);
    }

    #[test]
    fn weights_sum_to_one_and_sites_in_domain() {
        let mesh = skewed();
        let c = S2Coefficients::new(&mesh);
        for (i, j) in mesh.all_indices() {
            for f in [s2_functional(&mesh, &c, i, j).unwrap(), w2star_functional(&mesh, i, j).unwrap()] {
                assert!((f.weight_sum() - 1.0).abs() < 1e-14);
                for t in &f.terms {
                    assert_eq!(mesh.distance_outside(t.point), 0.0);
                }
            }
        }
    }

    #[test]
    fn corner_functionals_are_point_evaluations() {
        let mesh = skewed();
        let c = S2Coefficients::new(&mesh);
        for f in [s2_functional(&mesh, &c, 0, 0).unwrap(), w2star_functional(&mesh, 0, 0).unwrap()] {
            assert_eq!(f.terms.len(), 1);
            assert_eq!(f.terms[0].site, DataSite::Vertex { i: 0, j: 0 });
            assert!((f.terms[0].weight - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn w2star_edge_and_interior_shapes() {
        let mesh = skewed();
        let edge = w2star_functional(&mesh, 2, 0).unwrap();
        let mut w: Vec<f64> = edge.terms.iter().map(|t| t.weight).collect();
        w.sort_by(f64::total_cmp);
        assert_eq!(w, vec![-0.5, -0.5, 2.0]);
        let inner = w2star_functional(&mesh, 2, 2).unwrap();
        assert_eq!(inner.terms.len(), 5);
        assert!(s2_functional(&mesh, &S2Coefficients::new(&mesh), 6, 0).is_err());
    }

    #[test]
    fn operator_kind_parsing() {
        assert_eq!("s2".parse::<OperatorKind>().unwrap(), OperatorKind::S2);
        assert_eq!("w2star".parse::<OperatorKind>().unwrap(), OperatorKind::W2star);
        assert!("w2".parse::<OperatorKind>().is_err());
        assert_eq!(OperatorKind::W2star.nominal_site_count(3, 2), 18);
    }
}
