//! Quadratic Bernstein-Bezier patches on triangles.
//!
//! Coefficients are stored in the order `(200), (110), (101), (020), (011),
//! (002)`; the multi-index counts how often each of the vertices `V1, V2, V3`
//! enters the domain point `(i V1 + j V2 + k V3) / 2`.

use serde::{Deserialize, Serialize};

use crate::error::{QiError, Result};
use crate::mesh::{barycentric, Point};
use crate::polynomial::Polynomial;

/// Barycentric slack accepted when evaluating a patch outside its triangle.
pub const BARYCENTRIC_TOL: f64 = 1e-9;

/// Partial derivative multi-index `D^(dx, dy)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Deriv {
    pub dx: u8,
    pub dy: u8,
}

impl Deriv {
    pub const VALUE: Deriv = Deriv::new(0, 0);
    pub const DX: Deriv = Deriv::new(1, 0);
    pub const DY: Deriv = Deriv::new(0, 1);
    pub const DXX: Deriv = Deriv::new(2, 0);
    pub const DXY: Deriv = Deriv::new(1, 1);
    pub const DYY: Deriv = Deriv::new(0, 2);
    /// All multi-indices with `|alpha| <= 2`, in CSV column order.
    pub const UP_TO_SECOND: [Deriv; 6] = [
        Deriv::VALUE,
        Deriv::DX,
        Deriv::DY,
        Deriv::DXX,
        Deriv::DXY,
        Deriv::DYY,
    ];

    pub const fn new(dx: u8, dy: u8) -> Self {
        Deriv { dx, dy }
    }

    pub fn order(self) -> u8 {
        self.dx + self.dy
    }

    /// Multi-indices of a given total order.
    pub fn of_order(order: u8) -> Vec<Deriv> {
        (0..=order).rev().map(|dx| Deriv::new(dx, order - dx)).collect()
    }
}

impl std::fmt::Display for Deriv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.dx, self.dy)
    }
}

impl std::str::FromStr for Deriv {
    type Err = QiError;

    /// Parses `"a1,a2"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || QiError::Config(format!("derivative must look like 'a1,a2' with a1+a2 <= 2, got '{s}'"));
        let (a, b) = s.split_once(',').ok_or_else(bad)?;
        let dx: u8 = a.trim().parse().map_err(|_| bad())?;
        let dy: u8 = b.trim().parse().map_err(|_| bad())?;
        if dx + dy > 2 {
            return Err(bad());
        }
        Ok(Deriv::new(dx, dy))
    }
}

/// Slot of the coefficient for domain point `e_i + e_j` (vertex indices 0..3).
const fn slot(i: usize, j: usize) -> usize {
    const TABLE: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
    TABLE[i][j]
}

/// Coefficient slot holding the vertex `V_{k+1}`.
pub const VERTEX_SLOTS: [usize; 3] = [0, 3, 5];

fn signed_area(v: &[Point; 3]) -> f64 {
    0.5 * ((v[1].x - v[0].x) * (v[2].y - v[0].y) - (v[2].x - v[0].x) * (v[1].y - v[0].y))
}

/// Barycentric coordinates of a direction vector (they sum to zero).
fn direction_coords(v: &[Point; 3], d: Point) -> [f64; 3] {
    let b = barycentric(v, Point::new(v[0].x + d.x, v[0].y + d.y));
    [b[0] - 1.0, b[1], b[2]]
}

fn unit_direction(axis: u8) -> Point {
    if axis == 0 {
        Point::new(1.0, 0.0)
    } else {
        Point::new(0.0, 1.0)
    }
}

/// A quadratic polynomial piece in BB form.
#[derive(Debug, Clone, PartialEq)]
pub struct BBPatch {
    vertices: [Point; 3],
    coeffs: [f64; 6],
}

impl BBPatch {
    pub fn new(vertices: [Point; 3], coeffs: [f64; 6]) -> Result<Self> {
        let area = signed_area(&vertices);
        if area == 0.0 || !area.is_finite() {
            return Err(QiError::InvalidMatrix("triangle vertices are collinear".into()));
        }
        Ok(BBPatch { vertices, coeffs })
    }

    pub fn vertices(&self) -> &[Point; 3] {
        &self.vertices
    }

    pub fn coeffs(&self) -> &[f64; 6] {
        &self.coeffs
    }

    pub fn barycentric(&self, p: Point) -> [f64; 3] {
        barycentric(&self.vertices, p)
    }

    fn checked_barycentric(&self, p: Point) -> Result<[f64; 3]> {
        let b = self.barycentric(p);
        let min = b.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -BARYCENTRIC_TOL {
            return Err(QiError::OutsideTriangle(min));
        }
        Ok(b)
    }

    /// Value at barycentric coordinates `b` (no containment check).
    pub fn eval_barycentric(&self, b: [f64; 3]) -> f64 {
        // one de Casteljau step down to a linear net, then the last one
        let lin = self.reduce(b);
        lin[0] * b[0] + lin[1] * b[1] + lin[2] * b[2]
    }

    /// First de Casteljau step with weights `w`: the linear net
    /// `d_k = sum_i w_i c_{e_k + e_i}`.
    fn reduce(&self, w: [f64; 3]) -> [f64; 3] {
        let c = &self.coeffs;
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|i| w[i] * c[slot(k, i)]).sum();
        }
        out
    }

    pub fn eval(&self, p: Point) -> Result<f64> {
        Ok(self.eval_barycentric(self.checked_barycentric(p)?))
    }

    /// Directional derivative as a linear BB net on the same triangle.
    pub fn derivative(&self, dir: Point) -> Result<LinearPatch> {
        if dir.x == 0.0 && dir.y == 0.0 {
            return Err(QiError::ZeroDirection);
        }
        let a = direction_coords(&self.vertices, dir);
        let d = self.reduce(a);
        Ok(LinearPatch {
            vertices: self.vertices,
            coeffs: d.map(|v| 2.0 * v),
        })
    }

    /// `D^alpha` at barycentric coordinates `b`, `|alpha| <= 2`.
    pub fn derivative_barycentric(&self, alpha: Deriv, b: [f64; 3]) -> f64 {
        match alpha.order() {
            0 => self.eval_barycentric(b),
            1 => {
                let dir = unit_direction(if alpha.dx == 1 { 0 } else { 1 });
                let a = direction_coords(&self.vertices, dir);
                let d = self.reduce(a);
                2.0 * (d[0] * b[0] + d[1] * b[1] + d[2] * b[2])
            }
            2 => self.second_derivative(alpha),
            o => panic!("derivative order {o} exceeds 2"),
        }
    }

    /// The constant second derivative `D^alpha`, `|alpha| = 2`.
    pub fn second_derivative(&self, alpha: Deriv) -> f64 {
        assert_eq!(alpha.order(), 2);
        let (d1, d2) = match (alpha.dx, alpha.dy) {
            (2, 0) => (0, 0),
            (1, 1) => (0, 1),
            _ => (1, 1),
        };
        let a1 = direction_coords(&self.vertices, unit_direction(d1));
        let a2 = direction_coords(&self.vertices, unit_direction(d2));
        let d = self.reduce(a1);
        2.0 * (d[0] * a2[0] + d[1] * a2[1] + d[2] * a2[2])
    }

    pub fn derivative_at(&self, alpha: Deriv, p: Point) -> Result<f64> {
        Ok(self.derivative_barycentric(alpha, self.checked_barycentric(p)?))
    }
}

/// A linear polynomial piece in BB form (values at the three vertices).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPatch {
    vertices: [Point; 3],
    coeffs: [f64; 3],
}

impl LinearPatch {
    pub fn coeffs(&self) -> &[f64; 3] {
        &self.coeffs
    }

    pub fn eval(&self, p: Point) -> f64 {
        let b = barycentric(&self.vertices, p);
        self.coeffs[0] * b[0] + self.coeffs[1] * b[1] + self.coeffs[2] * b[2]
    }

    /// Constant directional derivative.
    pub fn derivative(&self, dir: Point) -> Result<f64> {
        if dir.x == 0.0 && dir.y == 0.0 {
            return Err(QiError::ZeroDirection);
        }
        let a = direction_coords(&self.vertices, dir);
        Ok(self.coeffs[0] * a[0] + self.coeffs[1] * a[1] + self.coeffs[2] * a[2])
    }
}

/// BB form of a polynomial of total degree <= 2 on a triangle, via its
/// polar form at the domain points.
pub fn polynomial_to_patch(p: &Polynomial, vertices: [Point; 3]) -> Result<BBPatch> {
    let mut coeffs = [0.0; 6];
    for i in 0..3 {
        for j in i..3 {
            coeffs[slot(i, j)] = p.blossom(vertices[i], vertices[j])?;
        }
    }
    BBPatch::new(vertices, coeffs)
}

/// Sparse homogeneous linear row over global coefficient ids.
pub type SparseRow = Vec<(usize, f64)>;

/// A triangle seen through the global domain-point registry.
#[derive(Debug, Clone, Copy)]
pub struct GlobalTriangle<'a> {
    pub vertices: &'a [Point; 3],
    pub dofs: &'a [usize; 6],
}

/// The two C1 conditions across the edge shared by two quadratic patches.
///
/// Each row states that a coefficient of `b` next to the shared edge equals
/// the barycentric combination of the coefficients of `a` in the matching
/// subtriangle: `c_b - sum lambda_k c_a = 0`.
pub fn c1_constraint_rows(a: GlobalTriangle<'_>, b: GlobalTriangle<'_>) -> Result<[SparseRow; 2]> {
    let a_vdofs = VERTEX_SLOTS.map(|s| a.dofs[s]);
    let b_vdofs = VERTEX_SLOTS.map(|s| b.dofs[s]);
    let mut shared = Vec::with_capacity(2);
    for (ia, d) in a_vdofs.iter().enumerate() {
        if let Some(ib) = b_vdofs.iter().position(|e| e == d) {
            shared.push((ia, ib));
        }
    }
    if shared.len() != 2 {
        return Err(QiError::NotEdgeAdjacent);
    }
    let (p, pb) = shared[0];
    let (q, qb) = shared[1];
    let o = 3 - p - q;
    let ob = 3 - pb - qb;
    let lam = barycentric(a.vertices, b.vertices[ob]);

    let row = |side: usize, side_b: usize| -> SparseRow {
        vec![
            (b.dofs[slot(side_b, ob)], -1.0),
            (a.dofs[slot(side, p)], lam[p]),
            (a.dofs[slot(side, q)], lam[q]),
            (a.dofs[slot(side, o)], lam[o]),
        ]
    };
    Ok([row(p, pb), row(q, qb)])
}

/// `sum coeff * x[id]` for a sparse row.
pub fn row_residual(row: &[(usize, f64)], x: &[f64]) -> f64 {
    row.iter().map(|&(d, c)| c * x[d]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn tri() -> [Point; 3] {
        [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)]
    }

    fn skew() -> [Point; 3] {
        [Point::new(0.2, -0.1), Point::new(1.3, 0.4), Point::new(0.5, 0.9)]
    }

    fn quad() -> Polynomial {
        Polynomial::new([
            ((0, 0), 0.7),
            ((1, 0), -1.1),
            ((0, 1), 0.4),
            ((2, 0), 2.0),
            ((1, 1), -0.6),
            ((0, 2), 1.3),
        ])
    }

    #[test]
    fn partition_of_unity() {
        let p = BBPatch::new(skew(), [1.0; 6]).unwrap();
        for q in [Point::new(0.6, 0.3), Point::new(0.5, 0.5), skew()[2]] {
            assert!((p.eval(q).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_reproduction() {
        let p = polynomial_to_patch(&Polynomial::monomial(1, 0), tri()).unwrap();
        assert_eq!(p.coeffs(), &[0.0, 0.5, 0.0, 1.0, 0.5, 0.0]);
        for q in [Point::new(0.25, 0.25), Point::new(0.1, 0.7)] {
            assert!((p.eval(q).unwrap() - q.x).abs() < 1e-15);
        }
    }

    #[test]
    fn endpoint_property() {
        let p = BBPatch::new(tri(), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.eval(tri()[0]).unwrap(), 1.0);
        assert_eq!(p.eval(tri()[1]).unwrap(), 0.0);
    }

    #[test]
    fn outside_triangle_rejected() {
        let p = BBPatch::new(tri(), [1.0; 6]).unwrap();
        assert!(matches!(p.eval(Point::new(1.0, 1.0)), Err(QiError::OutsideTriangle(_))));
        assert!(p.eval(Point::new(1.0 + 1e-12, 0.0)).is_ok());
        assert!(BBPatch::new([Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(2.0, 2.0)], [0.0; 6]).is_err());
    }

    #[test]
    fn derivative_examples() {
        let c = BBPatch::new(skew(), [2.5; 6]).unwrap();
        let d = c.derivative(Point::new(0.3, 0.8)).unwrap();
        assert!(d.coeffs().iter().all(|v| v.abs() < 1e-14));
        assert_eq!(c.derivative(Point::new(0.0, 0.0)), Err(QiError::ZeroDirection));

        let sq = polynomial_to_patch(&Polynomial::monomial(2, 0), skew()).unwrap();
        let d = sq.derivative(Point::new(1.0, 0.0)).unwrap();
        for q in [Point::new(0.6, 0.3), Point::new(0.5, 0.5)] {
            assert!((d.eval(q) - 2.0 * q.x).abs() < 1e-13);
            assert!((sq.derivative_at(Deriv::DX, q).unwrap() - 2.0 * q.x).abs() < 1e-13);
        }
    }

    #[test]
    fn mixed_derivative_of_xy_is_one() {
        let p = polynomial_to_patch(&Polynomial::monomial(1, 1), skew()).unwrap();
        let dx = p.derivative(Point::new(1.0, 0.0)).unwrap();
        let dxy = dx.derivative(Point::new(0.0, 1.0)).unwrap();
        assert!((dxy - 1.0).abs() < 1e-13);
        assert!((p.second_derivative(Deriv::DXY) - 1.0).abs() < 1e-13);
        assert!(p.second_derivative(Deriv::DXX).abs() < 1e-13);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let coeffs = [0.3, -1.2, 0.8, 2.1, -0.4, 1.7];
        let p = BBPatch::new(skew(), coeffs).unwrap();
        let v = skew();
        let centroid = Point::new((v[0].x + v[1].x + v[2].x) / 3.0, (v[0].y + v[1].y + v[2].y) / 3.0);
        let diam = v[0].distance(v[1]).max(v[1].distance(v[2])).max(v[0].distance(v[2]));
        let step = 1e-6 * diam;
        for dir in [Point::new(1.0, 0.0), Point::new(0.0, 1.0), Point::new(-0.6, 0.8)] {
            let fwd = p.eval(Point::new(centroid.x + step * dir.x, centroid.y + step * dir.y)).unwrap();
            let bwd = p.eval(Point::new(centroid.x - step * dir.x, centroid.y - step * dir.y)).unwrap();
            let fd = (fwd - bwd) / (2.0 * step);
            let exact = p.derivative(dir).unwrap().eval(centroid);
            assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{fd} vs {exact}");
        }
    }

    #[test]
    fn x_squared_edge_coefficient_from_interpolation() {
        // Oracle: solve the 6x6 interpolation system at the domain points
        // with the Bernstein basis instead of using the polar form.
        let v = tri();
        let pts: Vec<Point> = (0..6)
            .map(|k| {
                let (i, j) = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)][k];
                v[i].midpoint(v[j])
            })
            .collect();
        let basis = |b: [f64; 3]| {
            [
                b[0] * b[0],
                2.0 * b[0] * b[1],
                2.0 * b[0] * b[2],
                b[1] * b[1],
                2.0 * b[1] * b[2],
                b[2] * b[2],
            ]
        };
        let a = DMatrix::from_fn(6, 6, |r, c| basis(barycentric(&v, pts[r]))[c]);
        let rhs = DVector::from_iterator(6, pts.iter().map(|p| p.x * p.x));
        let sol = a.lu().solve(&rhs).unwrap();
        let patch = polynomial_to_patch(&Polynomial::monomial(2, 0), v).unwrap();
        for k in 0..6 {
            assert!((sol[k] - patch.coeffs()[k]).abs() < 1e-13);
        }
        assert!(patch.coeffs()[1].abs() < 1e-15);
    }

    #[test]
    fn degree_three_rejected() {
        assert_eq!(
            polynomial_to_patch(&Polynomial::monomial(2, 1), tri()).unwrap_err(),
            QiError::DegreeTooHigh(3)
        );
    }

    #[test]
    fn reproduction_at_vertices_and_centroid() {
        let v = skew();
        let p = polynomial_to_patch(&quad(), v).unwrap();
        let centroid = Point::new((v[0].x + v[1].x + v[2].x) / 3.0, (v[0].y + v[1].y + v[2].y) / 3.0);
        for q in [v[0], v[1], v[2], centroid] {
            let e = quad().eval(q);
            assert!((p.eval(q).unwrap() - e).abs() <= 1e-13 * e.abs().max(1.0));
        }
    }

    fn pair(dofs_a: [usize; 6], dofs_b: [usize; 6], va: [Point; 3], vb: [Point; 3], pa: &BBPatch, pb: &BBPatch) -> Vec<f64> {
        let mut x = vec![0.0; 12];
        for k in 0..6 {
            x[dofs_a[k]] = pa.coeffs()[k];
            x[dofs_b[k]] = pb.coeffs()[k];
        }
        let rows = c1_constraint_rows(
            GlobalTriangle { vertices: &va, dofs: &dofs_a },
            GlobalTriangle { vertices: &vb, dofs: &dofs_b },
        )
        .unwrap();
        rows.iter().map(|r| row_residual(r, &x)).collect()
    }

    #[test]
    fn c1_rows_vanish_for_one_polynomial() {
        // a = (P, Q, O), b = (Q, P, O') with shared dofs 0 (P), 1 (PQ), 3 (Q)
        let (pp, qq) = (Point::new(0.0, 0.0), Point::new(1.0, 0.2));
        let va = [pp, qq, Point::new(0.3, 0.9)];
        let vb = [qq, pp, Point::new(0.6, -0.8)];
        let da = [0, 1, 2, 3, 4, 5];
        let db = [3, 1, 6, 0, 7, 8];
        let pa = polynomial_to_patch(&quad(), va).unwrap();
        let pb = polynomial_to_patch(&quad(), vb).unwrap();
        for r in pair(da, db, va, vb, &pa, &pb) {
            assert!(r.abs() < 1e-13);
        }
        // same values on the edge, different gradient across it
        let kink = Polynomial::new(quad().terms().chain([((1, 0), 0.2), ((0, 1), -1.0)]));
        let pb2 = polynomial_to_patch(&kink, vb).unwrap();
        let res = pair(da, db, va, vb, &pa, &pb2);
        assert!(res.iter().any(|r| r.abs() > 1e-3), "{res:?}");
    }

    #[test]
    fn c1_rows_need_shared_edge() {
        let va = tri();
        let vb = [Point::new(1.0, 0.0), Point::new(2.0, 0.0), Point::new(1.0, 1.0)];
        let da = [0, 1, 2, 3, 4, 5];
        let db = [3, 6, 7, 8, 9, 10];
        assert!(c1_constraint_rows(
            GlobalTriangle { vertices: &va, dofs: &da },
            GlobalTriangle { vertices: &vb, dofs: &db }
        )
        .is_err());
    }
}
