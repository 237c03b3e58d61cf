//! The B-spline family `{B_ij : 0 <= i <= m+1, 0 <= j <= n+1}` of C1
//! quadratic splines with supports inside the domain.
//!
//! Each B-spline is characterised rather than written down: its support is
//! the (clipped) octagon, it is C1 across every interior edge, vanishes with
//! its gradient on the part of the support boundary interior to the domain,
//! and restricts on the domain boundary to a clamped univariate quadratic
//! B-spline (boundary indices) or to zero (inner indices). Inner shapes are
//! then scaled so that the `S2` operator reproduces quadratics.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::bernstein::{c1_constraint_rows, BBPatch, Deriv, GlobalTriangle, SparseRow};
use crate::error::{QiError, Result};
use crate::mesh::{barycentric, CrissCrossMesh, DofKind, Partition1D, Point, TriangleKind, TriangleRef};
use crate::numeric::{nullspace, solve_least_squares, DenseMatrix, StreamingLeastSquares, DEFAULT_REL_TOL};
use crate::operators::{s2_functionals, Functional};
use crate::polynomial::Polynomial;

/// Residual allowed when fitting boundary traces.
pub const TRACE_TOL: f64 = 1e-10;
/// Relative residual allowed in the scaling system.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// The triangles forming `Sigma_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportOctagon {
    pub index: (usize, usize),
    /// Sorted by global triangle index.
    pub triangles: Vec<TriangleRef>,
}

impl SupportOctagon {
    pub fn contains(&self, mesh: &CrissCrossMesh, t: TriangleRef) -> bool {
        let k = mesh.triangle_index(t);
        self.triangles
            .binary_search_by_key(&k, |&u| mesh.triangle_index(u))
            .is_ok()
    }
}

/// The octagon around cell `(i, j)`: the 3x3 cell block minus the two
/// triangles at each outer corner, clipped to the domain.
pub fn support(mesh: &CrissCrossMesh, i: usize, j: usize) -> Result<SupportOctagon> {
    mesh.check_index(i, j)?;
    let (m, n) = (mesh.m() as isize, mesh.n() as isize);
    let (ci, cj) = (i as isize, j as isize);
    let mut triangles = Vec::new();
    for s in (cj - 1).max(1)..=(cj + 1).min(n) {
        for r in (ci - 1).max(1)..=(ci + 1).min(m) {
            let cut: &[TriangleKind] = match (r - ci, s - cj) {
                (-1, -1) => &[TriangleKind::West, TriangleKind::South],
                (1, -1) => &[TriangleKind::South, TriangleKind::East],
                (1, 1) => &[TriangleKind::East, TriangleKind::North],
                (-1, 1) => &[TriangleKind::North, TriangleKind::West],
                _ => &[],
            };
            for kind in TriangleKind::ALL {
                if !cut.contains(&kind) {
                    triangles.push(TriangleRef::new(r as usize, s as usize, kind));
                }
            }
        }
    }
    triangles.sort_by_key(|&t| mesh.triangle_index(t));
    Ok(SupportOctagon { index: (i, j), triangles })
}

/// Clamped quadratic B-spline `N_i` (`0 <= i <= N+1`) on the knots of `p`
/// with triple end knots, by the Cox-de Boor recursion.
pub fn univariate_bspline(p: &Partition1D, i: usize, x: f64) -> Result<f64> {
    let n = p.cells();
    if i > n + 1 {
        return Err(QiError::IndexOutOfRange { i, j: 0, imax: n + 1, jmax: 0 });
    }
    if !p.contains(x) {
        return Err(QiError::OutOfDomain { x, y: f64::NAN });
    }
    let mut u = Vec::with_capacity(n + 5);
    u.extend([p.start(); 2]);
    u.extend_from_slice(p.knots());
    u.extend([p.end(); 2]);

    // degree 0 on [u_k, u_{k+1}); the last nonempty interval is closed
    let mut vals: Vec<f64> = (i..i + 3)
        .map(|k| {
            let inside = u[k] <= x && x < u[k + 1];
            let at_end = x == p.end() && u[k] < u[k + 1] && u[k + 1] == p.end();
            if inside || at_end {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for deg in 1..=2 {
        vals = (0..vals.len() - 1)
            .map(|t| {
                let k = i + t;
                let left = if u[k + deg] > u[k] {
                    (x - u[k]) / (u[k + deg] - u[k]) * vals[t]
                } else {
                    0.0
                };
                let right = if u[k + deg + 1] > u[k + 1] {
                    (u[k + deg + 1] - x) / (u[k + deg + 1] - u[k + 1]) * vals[t + 1]
                } else {
                    0.0
                };
                left + right
            })
            .collect();
    }
    Ok(vals[0])
}

/// One B-spline: BB coefficients on every triangle of its support.
#[derive(Debug, Clone)]
pub struct BSpline {
    pub index: (usize, usize),
    pub support: SupportOctagon,
    /// Parallel to `support.triangles`.
    pub patches: Vec<[f64; 6]>,
    /// Nonzero global BB coefficients, sorted by dof id.
    pub coeffs: Vec<(usize, f64)>,
    /// Nullspace dimension of the homogeneous constraint system.
    pub nullity: usize,
}

impl BSpline {
    fn scaled(mut self, c: f64) -> Self {
        for p in &mut self.patches {
            for v in p.iter_mut() {
                *v *= c;
            }
        }
        for (_, v) in &mut self.coeffs {
            *v *= c;
        }
        self
    }

    pub fn coefficient(&self, dof: usize) -> f64 {
        self.coeffs
            .binary_search_by_key(&dof, |&(d, _)| d)
            .map_or(0.0, |k| self.coeffs[k].1)
    }

    /// Patch on a support triangle.
    pub fn patch(&self, mesh: &CrissCrossMesh, t: TriangleRef) -> Option<BBPatch> {
        let k = mesh.triangle_index(t);
        let pos = self
            .support
            .triangles
            .binary_search_by_key(&k, |&u| mesh.triangle_index(u))
            .ok()?;
        Some(BBPatch::new(mesh.triangle_vertices(t), self.patches[pos]).expect("mesh triangles are proper"))
    }
}

/// Expected boundary restriction of `B_ij` at a point of the boundary edge(s).
fn trace_values(mesh: &CrissCrossMesh, (i, j): (usize, usize), p: Point) -> Result<Vec<f64>> {
    let [a, b, c, d] = mesh.domain();
    let (m, n) = (mesh.m(), mesh.n());
    let mut out = Vec::new();
    if p.y == c || p.y == d {
        let edge_j = if p.y == c { 0 } else { n + 1 };
        out.push(if j == edge_j { univariate_bspline(mesh.px(), i, p.x)? } else { 0.0 });
    }
    if p.x == a || p.x == b {
        let edge_i = if p.x == a { 0 } else { m + 1 };
        out.push(if i == edge_i { univariate_bspline(mesh.py(), j, p.y)? } else { 0.0 });
    }
    Ok(out)
}

/// BB coefficient of the trace at a boundary dof; the trace is one quadratic
/// polynomial per boundary segment, so the edge coefficient is its polar form.
fn trace_coefficients(mesh: &CrissCrossMesh, index: (usize, usize), dof: usize) -> Result<Vec<f64>> {
    let (u, v) = mesh.dof_pair(dof);
    if u == v {
        return trace_values(mesh, index, u);
    }
    // an edge dof lies on exactly one boundary side; pick the matching entry
    let side = |p: Point| -> Result<f64> {
        let vals = trace_values(mesh, index, p)?;
        let horizontal = u.y == v.y;
        let [a, b, _, _] = mesh.domain();
        let corner = p.x == a || p.x == b;
        Ok(if horizontal || !corner || vals.len() == 1 {
            vals[0]
        } else {
            vals[vals.len() - 1]
        })
    };
    Ok(vec![2.0 * side(u.midpoint(v))? - 0.5 * (side(u)? + side(v)?)])
}

fn is_boundary_dof(mesh: &CrissCrossMesh, dof: usize) -> bool {
    let (m, n) = (mesh.m(), mesh.n());
    match mesh.dof_kind(dof) {
        DofKind::Vertex { i, j } => i == 0 || i == m || j == 0 || j == n,
        DofKind::HorizontalEdge { j, .. } => j == 0 || j == n,
        DofKind::VerticalEdge { i, .. } => i == 0 || i == m,
        _ => false,
    }
}

/// Triangle pairs sharing an edge with at least one side in the support.
fn support_edges(mesh: &CrissCrossMesh, sup: &SupportOctagon, in_support: &[bool]) -> Vec<(TriangleRef, TriangleRef)> {
    let mut pairs = Vec::new();
    for &t in &sup.triangles {
        let ti = mesh.triangle_index(t);
        for nb in mesh.neighbors(t).into_iter().flatten() {
            let ni = mesh.triangle_index(nb);
            if !in_support[ni] || ni > ti {
                pairs.push((t, nb));
            }
        }
    }
    pairs
}

fn global_rows(mesh: &CrissCrossMesh, t: TriangleRef, u: TriangleRef) -> Result<[SparseRow; 2]> {
    let (vt, vu) = (mesh.triangle_vertices(t), mesh.triangle_vertices(u));
    let (dt, du) = (mesh.triangle_dofs(t), mesh.triangle_dofs(u));
    c1_constraint_rows(
        GlobalTriangle { vertices: &vt, dofs: &dt },
        GlobalTriangle { vertices: &vu, dofs: &du },
    )
}

/// Unnormalized `B_ij` from its characterizing linear conditions. Boundary
/// shapes come out already normalized by their traces.
pub fn construct_bspline_shape(mesh: &CrissCrossMesh, i: usize, j: usize, rel_tol: f64) -> Result<BSpline> {
    let fail = |reason: String| QiError::Construction { i, j, reason };
    let sup = support(mesh, i, j)?;
    let mut in_support = vec![false; mesh.triangle_count()];
    for &t in &sup.triangles {
        in_support[mesh.triangle_index(t)] = true;
    }

    // dofs touched only by support triangles are free; the rest are zero
    let mut columns: HashMap<usize, usize> = HashMap::new();
    let mut free = Vec::new();
    let mut pinned = Vec::new();
    for &t in &sup.triangles {
        for d in mesh.triangle_dofs(t) {
            if columns.contains_key(&d) || pinned.contains(&d) {
                continue;
            }
            if mesh.dof_triangles(d).iter().all(|&k| in_support[k]) {
                columns.insert(d, free.len());
                free.push(d);
            } else {
                pinned.push(d);
            }
        }
    }
    let cols = free.len();

    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for (t, u) in support_edges(mesh, &sup, &in_support) {
        for row in global_rows(mesh, t, u)? {
            let entries: Vec<(usize, f64)> = row
                .iter()
                .filter_map(|&(d, c)| columns.get(&d).map(|&k| (k, c)))
                .collect();
            if !entries.is_empty() {
                rows.push((entries, 0.0));
            }
        }
    }
    let mut inhomogeneous = false;
    let mut pinned_trace_error: f64 = 0.0;
    for &d in free.iter().chain(&pinned) {
        if !is_boundary_dof(mesh, d) {
            continue;
        }
        for value in trace_coefficients(mesh, (i, j), d)? {
            match columns.get(&d) {
                Some(&k) => {
                    inhomogeneous |= value != 0.0;
                    rows.push((vec![(k, 1.0)], value));
                }
                None => pinned_trace_error = pinned_trace_error.max(value.abs()),
            }
        }
    }
    if pinned_trace_error > TRACE_TOL {
        return Err(fail(format!(
            "trace is nonzero ({pinned_trace_error:e}) where the support ends"
        )));
    }

    let mut a = DenseMatrix::zeros(rows.len().max(1), cols);
    let mut rhs = vec![0.0; rows.len().max(1)];
    for (r, (entries, b)) in rows.iter().enumerate() {
        for &(k, c) in entries {
            a.add(r, k, c);
        }
        rhs[r] = *b;
    }

    let ns = nullspace(&a, rel_tol)?;
    let (solution, nullity) = if inhomogeneous {
        if !ns.is_empty() {
            return Err(fail(format!("trace conditions leave {} free directions", ns.len())));
        }
        let (x, res) = solve_least_squares(&a, &rhs)?;
        if res > TRACE_TOL {
            return Err(fail(format!("trace residual {res:e} exceeds {TRACE_TOL:e}")));
        }
        (x, 0)
    } else {
        if ns.len() != 1 {
            return Err(fail(format!("expected a one-dimensional solution space, found {}", ns.len())));
        }
        let mut v = ns.into_iter().next().expect("one vector");
        let (imax, _) = v
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (k, x)| if x.abs() > acc.1 { (k, x.abs()) } else { acc });
        let scale = 1.0 / v[imax];
        v.iter_mut().for_each(|x| *x *= scale);
        (v, 1)
    };

    let patches = sup
        .triangles
        .iter()
        .map(|&t| mesh.triangle_dofs(t).map(|d| columns.get(&d).map_or(0.0, |&k| solution[k])))
        .collect();
    let mut coeffs: Vec<(usize, f64)> = free
        .iter()
        .zip(&solution)
        .filter(|(_, &v)| v != 0.0)
        .map(|(&d, &v)| (d, v))
        .collect();
    coeffs.sort_unstable_by_key(|&(d, _)| d);
    Ok(BSpline {
        index: (i, j),
        support: sup,
        patches,
        coeffs,
        nullity,
    })
}

/// Monomials `e_alpha`, `|alpha| <= 2`.
pub fn quadratic_monomials() -> [Polynomial; 6] {
    [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)].map(|(a, b)| Polynomial::monomial(a, b))
}

/// The normalized family with a per-triangle index of the active B-splines.
#[derive(Debug, Clone)]
pub struct BasisFamily {
    mesh: CrissCrossMesh,
    splines: Vec<BSpline>,
    scales: Vec<f64>,
    /// Per triangle: the seven (index slot, BB coefficients) pairs.
    active: Vec<Vec<(usize, [f64; 6])>>,
}

/// Solution of the scaling system.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormalizationStats {
    pub residual: f64,
    pub rhs_norm: f64,
    pub diagonal_ratio: f64,
}

fn inner_column(mesh: &CrissCrossMesh, i: usize, j: usize) -> usize {
    (j - 1) * mesh.m() + (i - 1)
}

/// Solve for the inner scales `c_ij` such that `sum mu_ij(e) c_ij b_ij = e`
/// for all six quadratic monomials, in global BB coefficients.
pub fn solve_scales(
    mesh: &CrissCrossMesh,
    shapes: &[BSpline],
    s2: &[Functional],
    rel_tol: f64,
) -> Result<(Vec<f64>, NormalizationStats)> {
    let monos = quadratic_monomials();
    let ndof = mesh.dof_count();
    let mut by_dof: Vec<Vec<(usize, f64, usize)>> = vec![Vec::new(); ndof];
    let mut adjust = vec![[0.0; 6]; ndof];
    for (shape, func) in shapes.iter().zip(s2) {
        let (i, j) = shape.index;
        let mu: Vec<f64> = monos.iter().map(|e| func.apply(|p| e.eval(p))).collect();
        if mesh.is_inner_index(i, j) {
            let col = inner_column(mesh, i, j);
            for &(d, c) in &shape.coeffs {
                by_dof[d].push((col, c, mesh.index_slot(i, j)));
            }
        } else {
            for &(d, c) in &shape.coeffs {
                for a in 0..6 {
                    adjust[d][a] += mu[a] * c;
                }
            }
        }
    }
    let mu_by_slot: Vec<[f64; 6]> = s2
        .iter()
        .map(|f| {
            let mut out = [0.0; 6];
            for (a, e) in monos.iter().enumerate() {
                out[a] = f.apply(|p| e.eval(p));
            }
            out
        })
        .collect();

    let targets: Vec<[f64; 6]> = (0..ndof)
        .map(|d| {
            let (u, v) = mesh.dof_pair(d);
            let mut t = [0.0; 6];
            for (a, e) in monos.iter().enumerate() {
                t[a] = e.blossom(u, v).expect("quadratic");
            }
            t
        })
        .collect();
    let mut weights = [0.0f64; 6];
    for t in &targets {
        for a in 0..6 {
            weights[a] = weights[a].max(t[a].abs());
        }
    }
    let weights = weights.map(|w| if w > 0.0 { 1.0 / w } else { 1.0 });

    let mut sls = StreamingLeastSquares::new(mesh.m() * mesh.n());
    let mut entries = Vec::new();
    for a in 0..6 {
        for d in 0..ndof {
            entries.clear();
            entries.extend(
                by_dof[d]
                    .iter()
                    .map(|&(col, c, slot)| (col, weights[a] * mu_by_slot[slot][a] * c)),
            );
            sls.add_row(&entries, weights[a] * (targets[d][a] - adjust[d][a]))?;
        }
    }
    let sol = sls
        .solve(rel_tol)
        .map_err(|e| QiError::Normalization(format!("scaling system is not uniquely solvable: {e}")))?;
    let stats = NormalizationStats {
        residual: sol.residual_norm,
        rhs_norm: sol.rhs_norm,
        diagonal_ratio: sol.diagonal_ratio,
    };
    if sol.residual_norm > NORMALIZATION_TOL * sol.rhs_norm.max(1.0) {
        return Err(QiError::Normalization(format!(
            "residual {:e} exceeds {:e} x {:e}",
            sol.residual_norm, NORMALIZATION_TOL, sol.rhs_norm
        )));
    }
    if let Some((k, c)) = sol.x.iter().enumerate().find(|(_, &c)| !(c > 0.0)) {
        return Err(QiError::Normalization(format!("nonpositive scale {c} in column {k}")));
    }
    Ok((sol.x, stats))
}

/// Scale the inner shapes and index the result by triangle.
pub fn normalize_basis(
    mesh: &CrissCrossMesh,
    shapes: Vec<BSpline>,
    s2: &[Functional],
    rel_tol: f64,
) -> Result<BasisFamily> {
    let (inner_scales, _) = solve_scales(mesh, &shapes, s2, rel_tol)?;
    let mut scales = vec![1.0; shapes.len()];
    let splines: Vec<BSpline> = shapes
        .into_iter()
        .map(|s| {
            let (i, j) = s.index;
            if mesh.is_inner_index(i, j) {
                let c = inner_scales[inner_column(mesh, i, j)];
                scales[mesh.index_slot(i, j)] = c;
                s.scaled(c)
            } else {
                s
            }
        })
        .collect();

    let mut active: Vec<Vec<(usize, [f64; 6])>> = vec![Vec::with_capacity(7); mesh.triangle_count()];
    for (slot, s) in splines.iter().enumerate() {
        for (t, p) in s.support.triangles.iter().zip(&s.patches) {
            active[mesh.triangle_index(*t)].push((slot, *p));
        }
    }
    for (k, list) in active.iter().enumerate() {
        let t = mesh.triangle_from_index(k);
        let mut got: Vec<usize> = list.iter().map(|&(s, _)| s).collect();
        let mut want: Vec<usize> = t.active_indices().iter().map(|&(i, j)| mesh.index_slot(i, j)).collect();
        got.sort_unstable();
        want.sort_unstable();
        if got != want {
            return Err(QiError::Normalization(format!("triangle {t} is covered by {got:?}, expected {want:?}")));
        }
    }
    Ok(BasisFamily {
        mesh: mesh.clone(),
        splines,
        scales,
        active,
    })
}

impl BasisFamily {
    /// Construct all shapes (in parallel) and normalize them.
    pub fn build(mesh: &CrissCrossMesh) -> Result<Self> {
        BasisFamily::build_with_tol(mesh, DEFAULT_REL_TOL)
    }

    pub fn build_with_tol(mesh: &CrissCrossMesh, rel_tol: f64) -> Result<Self> {
        let indices: Vec<(usize, usize)> = mesh.all_indices().collect();
        let shapes = indices
            .par_iter()
            .map(|&(i, j)| construct_bspline_shape(mesh, i, j, rel_tol))
            .collect::<Result<Vec<_>>>()?;
        let s2 = s2_functionals(mesh);
        normalize_basis(mesh, shapes, &s2, rel_tol)
    }

    pub fn mesh(&self) -> &CrissCrossMesh {
        &self.mesh
    }

    /// All B-splines in `index_slot` order.
    pub fn splines(&self) -> &[BSpline] {
        &self.splines
    }

    pub fn spline(&self, i: usize, j: usize) -> &BSpline {
        &self.splines[self.mesh.index_slot(i, j)]
    }

    pub fn scale(&self, i: usize, j: usize) -> f64 {
        self.scales[self.mesh.index_slot(i, j)]
    }

    /// The seven `(slot, BB coefficients)` pairs living on a triangle.
    pub fn active(&self, t: TriangleRef) -> &[(usize, [f64; 6])] {
        &self.active[self.mesh.triangle_index(t)]
    }

    /// `D^alpha B` of every active B-spline at barycentric coordinates `b` of `t`.
    pub fn active_values(&self, t: TriangleRef, b: [f64; 3], alpha: Deriv) -> [(usize, f64); 7] {
        let verts = self.mesh.triangle_vertices(t);
        let mut out = [(0, 0.0); 7];
        for (o, &(slot, c)) in out.iter_mut().zip(self.active(t)) {
            let patch = BBPatch::new(verts, c).expect("proper triangle");
            *o = (slot, patch.derivative_barycentric(alpha, b));
        }
        out
    }

    /// `D^alpha B_ij(p)` for every active index at `p` (located with the mesh tie-break).
    pub fn values_at(&self, p: Point, alpha: Deriv) -> Result<[(usize, f64); 7]> {
        let t = self.mesh.locate(p)?;
        let b = barycentric(&self.mesh.triangle_vertices(t), p);
        Ok(self.active_values(t, b, alpha))
    }

    /// `B_ij(p)`.
    pub fn eval(&self, i: usize, j: usize, p: Point) -> Result<f64> {
        self.mesh.check_index(i, j)?;
        let slot = self.mesh.index_slot(i, j);
        Ok(self
            .values_at(p, Deriv::VALUE)?
            .iter()
            .find(|(s, _)| *s == slot)
            .map_or(0.0, |&(_, v)| v))
    }

    pub fn diagnostics(&self) -> BasisDiagnostics {
        diagnostics(self)
    }
}

/// Barycentric lattice `{(a, b, c) / order : a + b + c = order}`, optionally
/// without the points on the triangle boundary.
pub fn barycentric_lattice(order: usize, interior_only: bool) -> Vec<[f64; 3]> {
    let mut pts = Vec::new();
    let lo = usize::from(interior_only);
    for a in lo..=order {
        for b in lo..=order - a {
            let c = order - a - b;
            if interior_only && c == 0 {
                continue;
            }
            pts.push([a as f64 / order as f64, b as f64 / order as f64, c as f64 / order as f64]);
        }
    }
    pts
}

/// Worst-case measurements of the properties the family must satisfy.
#[derive(Debug, Clone, Serialize)]
pub struct BasisDiagnostics {
    pub m: usize,
    pub n: usize,
    /// `max(0, -min B_ij)` over the samples.
    pub negativity: f64,
    pub partition_of_unity: f64,
    /// `sup |sum (-1)^{i+j} h_i k_j B_ij| / max(h_i k_j)`.
    pub dependence_relative: f64,
    pub boundary_trace: f64,
    /// Largest C1 row residual relative to the B-spline's largest coefficient.
    pub c1_relative: f64,
    pub inner_nullity_min: usize,
    pub inner_nullity_max: usize,
    /// `max sum |D^alpha B_ij| / (4 h_r^-a1 k_s^-a2)` over vertices, `|alpha| = 1`.
    pub first_sum_ratio: f64,
    /// `max sum |D^alpha B_ij| / (6 h_r^-a1 k_s^-a2)`, `|alpha| = 2`.
    pub second_sum_ratio: f64,
    /// Triangle attaining `second_sum_ratio`.
    pub second_sum_worst: String,
    /// The same ratio restricted to cells not touching the boundary.
    pub second_sum_ratio_interior: f64,
    /// Nonzero B-splines per triangle interior (min, max).
    pub active_min: usize,
    pub active_max: usize,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl BasisDiagnostics {
    /// Names of the categories exceeding `tol`; derivative-sum ratios must not exceed 1.
    pub fn violations(&self, tol: f64) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.negativity > 1e-12 {
            v.push("negativity");
        }
        for (name, val) in [
            ("partition_of_unity", self.partition_of_unity),
            ("dependence_relative", self.dependence_relative),
            ("boundary_trace", self.boundary_trace),
            ("c1_relative", self.c1_relative),
        ] {
            if !(val <= tol) {
                v.push(name);
            }
        }
        if self.inner_nullity_min != 1 || self.inner_nullity_max != 1 {
            v.push("inner_nullity");
        }
        if !(self.first_sum_ratio <= 1.0 + 1e-9) {
            v.push("first_derivative_sum");
        }
        if !(self.second_sum_ratio <= 1.0 + 1e-9) {
            v.push("second_derivative_sum");
        }
        if self.active_min != 7 || self.active_max != 7 {
            v.push("active_count");
        }
        v
    }
}

fn diagnostics(family: &BasisFamily) -> BasisDiagnostics {
    let mesh = family.mesh();
    let (m, n) = (mesh.m(), mesh.n());
    let lattice = barycentric_lattice(6, false);
    let interior = barycentric_lattice(6, true);
    let hk_max = (1..=m)
        .flat_map(|i| (1..=n).map(move |j| (i, j)))
        .map(|(i, j)| mesh.px().step(i) * mesh.py().step(j))
        .fold(0.0, f64::max);
    let dep_weight = |slot: usize| {
        let (i, j) = (slot % (m + 2), slot / (m + 2));
        if mesh.is_inner_index(i, j) {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            sign * mesh.px().step(i) * mesh.py().step(j)
        } else {
            0.0
        }
    };

    struct Acc {
        neg: f64,
        pou: f64,
        dep: f64,
        l1: f64,
        l2: f64,
        l2_at: Option<TriangleRef>,
        l2_inner: f64,
        amin: usize,
        amax: usize,
    }
    let acc = mesh
        .triangles()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&t| {
            let mut a = Acc { neg: 0.0, pou: 0.0, dep: 0.0, l1: 0.0, l2: 0.0, l2_at: None, l2_inner: 0.0, amin: 7, amax: 0 };
            for &b in &lattice {
                let vals = family.active_values(t, b, Deriv::VALUE);
                let mut sum = 0.0;
                let mut dep = 0.0;
                for &(slot, v) in &vals {
                    a.neg = a.neg.max(-v);
                    sum += v;
                    dep += dep_weight(slot) * v;
                }
                a.pou = a.pou.max((sum - 1.0).abs());
                a.dep = a.dep.max(dep.abs() / hk_max);
            }
            for &b in &interior {
                let nz = family
                    .active_values(t, b, Deriv::VALUE)
                    .iter()
                    .filter(|(_, v)| v.abs() > 1e-13)
                    .count();
                a.amin = a.amin.min(nz);
                a.amax = a.amax.max(nz);
            }
            let (hr, ks) = (mesh.px().step(t.r), mesh.py().step(t.s));
            let scale = |d: Deriv| hr.powi(-(d.dx as i32)) * ks.powi(-(d.dy as i32));
            for d in [Deriv::DX, Deriv::DY] {
                for b in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
                    let s: f64 = family.active_values(t, b, d).iter().map(|(_, v)| v.abs()).sum();
                    a.l1 = a.l1.max(s / (4.0 * scale(d)));
                }
            }
            for d in [Deriv::DXX, Deriv::DXY, Deriv::DYY] {
                let s: f64 = family
                    .active_values(t, [1.0 / 3.0; 3], d)
                    .iter()
                    .map(|(_, v)| v.abs())
                    .sum();
                let ratio = s / (6.0 * scale(d));
                if ratio > a.l2 {
                    a.l2 = ratio;
                    a.l2_at = Some(t);
                }
                if t.r > 1 && t.r < m && t.s > 1 && t.s < n {
                    a.l2_inner = a.l2_inner.max(ratio);
                }
            }
            a
        })
        .reduce(
            || Acc { neg: 0.0, pou: 0.0, dep: 0.0, l1: 0.0, l2: 0.0, l2_at: None, l2_inner: 0.0, amin: 7, amax: 0 },
            |x, y| Acc {
                neg: x.neg.max(y.neg),
                pou: x.pou.max(y.pou),
                dep: x.dep.max(y.dep),
                l1: x.l1.max(y.l1),
                l2_at: if y.l2 > x.l2 { y.l2_at } else { x.l2_at },
                l2: x.l2.max(y.l2),
                l2_inner: x.l2_inner.max(y.l2_inner),
                amin: x.amin.min(y.amin),
                amax: x.amax.max(y.amax),
            },
        );

    let trace = boundary_trace_deviation(family);
    let c1 = family
        .splines()
        .par_iter()
        .map(|s| c1_residual(mesh, s))
        .reduce(|| 0.0, f64::max);
    let inner: Vec<usize> = family
        .splines()
        .iter()
        .filter(|s| mesh.is_inner_index(s.index.0, s.index.1))
        .map(|s| s.nullity)
        .collect();
    let inner_scales: Vec<f64> = mesh.inner_indices().map(|(i, j)| family.scale(i, j)).collect();

    BasisDiagnostics {
        m,
        n,
        negativity: acc.neg.max(0.0),
        partition_of_unity: acc.pou,
        dependence_relative: acc.dep,
        boundary_trace: trace,
        c1_relative: c1,
        inner_nullity_min: inner.iter().copied().min().unwrap_or(0),
        inner_nullity_max: inner.iter().copied().max().unwrap_or(0),
        first_sum_ratio: acc.l1,
        second_sum_ratio: acc.l2,
        second_sum_worst: acc.l2_at.map_or_else(String::new, |t| t.to_string()),
        second_sum_ratio_interior: acc.l2_inner,
        active_min: acc.amin,
        active_max: acc.amax,
        scale_min: inner_scales.iter().copied().fold(f64::INFINITY, f64::min),
        scale_max: inner_scales.iter().copied().fold(0.0, f64::max),
    }
}

/// Largest C1 row residual of one B-spline over every edge of the mesh that
/// touches its support, relative to its largest coefficient.
pub fn c1_residual(mesh: &CrissCrossMesh, s: &BSpline) -> f64 {
    let mut in_support = vec![false; mesh.triangle_count()];
    for &t in &s.support.triangles {
        in_support[mesh.triangle_index(t)] = true;
    }
    let cmax = s.coeffs.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for (t, u) in support_edges(mesh, &s.support, &in_support) {
        for row in global_rows(mesh, t, u).expect("mesh neighbours share edges") {
            let r: f64 = row.iter().map(|&(d, c)| c * s.coefficient(d)).sum();
            worst = worst.max(r.abs());
        }
    }
    worst / cmax.max(f64::MIN_POSITIVE)
}

fn boundary_trace_deviation(family: &BasisFamily) -> f64 {
    let mesh = family.mesh();
    let (m, n) = (mesh.m(), mesh.n());
    let [a, b, c, d] = mesh.domain();
    let mut pts = Vec::new();
    for r in 1..=m {
        for k in 0..=6 {
            let x = mesh.px().knot(r - 1) + mesh.px().step(r) * k as f64 / 6.0;
            let x = if k == 6 { mesh.px().knot(r) } else { x };
            pts.push(Point::new(x, c));
            pts.push(Point::new(x, d));
        }
    }
    for s in 1..=n {
        for k in 0..=6 {
            let y = mesh.py().knot(s - 1) + mesh.py().step(s) * k as f64 / 6.0;
            let y = if k == 6 { mesh.py().knot(s) } else { y };
            pts.push(Point::new(a, y));
            pts.push(Point::new(b, y));
        }
    }
    let mut worst: f64 = 0.0;
    for p in pts {
        let vals = family.values_at(p, Deriv::VALUE).expect("boundary points are in the domain");
        for (i, j) in mesh.all_indices() {
            let slot = mesh.index_slot(i, j);
            let actual = vals.iter().find(|(s, _)| *s == slot).map_or(0.0, |&(_, v)| v);
            let expected = trace_values(mesh, (i, j), p).expect("in range");
            for e in expected {
                worst = worst.max((actual - e).abs());
            }
        }
    }
    worst
}

/// Dense form of the scaling system, used to cross-check the streamed solve.
pub fn scaling_system_dense(mesh: &CrissCrossMesh, shapes: &[BSpline], s2: &[Functional]) -> (DenseMatrix, Vec<f64>) {
    let monos = quadratic_monomials();
    let ndof = mesh.dof_count();
    let cols = mesh.m() * mesh.n();
    let mut a = DenseMatrix::zeros(6 * ndof, cols);
    let mut b = vec![0.0; 6 * ndof];
    for (al, e) in monos.iter().enumerate() {
        for d in 0..ndof {
            let (u, v) = mesh.dof_pair(d);
            b[al * ndof + d] = e.blossom(u, v).expect("quadratic");
        }
        for (shape, func) in shapes.iter().zip(s2) {
            let (i, j) = shape.index;
            let mu = func.apply(|p| e.eval(p));
            for &(d, c) in &shape.coeffs {
                if mesh.is_inner_index(i, j) {
                    a.add(al * ndof + d, inner_column(mesh, i, j), mu * c);
                } else {
                    b[al * ndof + d] -= mu * c;
                }
            }
        }
    }
    (a, b)
}
