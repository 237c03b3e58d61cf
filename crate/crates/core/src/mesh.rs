//! Rectangle partitions and their criss-cross triangulation.
//!
//! Index conventions: the x partition has knots `x_0 < .. < x_m` (m cells),
//! the y partition `y_0 < .. < y_n` (n cells). Cell `(r, s)` with
//! `1 <= r <= m`, `1 <= s <= n` is `[x_{r-1}, x_r] x [y_{s-1}, y_s]`, centered
//! at `M_{r,s} = (s_r, t_s)`. Data-site centers `M_{i,j}` exist for
//! `0 <= i <= m+1`, `0 <= j <= n+1`; the extra ones collapse onto boundary
//! edge midpoints and corners because of the doubled end knots.
//!
//! Every cell is split by both diagonals into four triangles, numbered
//! 1 = north, 2 = west, 3 = south, 4 = east. Triangle vertices are stored as
//! `(V1, V2, V3)` with `V1, V2` rectangle corners (counter-clockwise) and `V3`
//! the cell center.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{QiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn midpoint(self, other: Point) -> Point {
        Point::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A strictly increasing knot sequence `t_0 < .. < t_N` together with the
/// derived steps, midpoints and neighbour ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition1D {
    knots: Vec<f64>,
    /// `h_0 ..= h_{N+1}`, zero at both ends.
    steps: Vec<f64>,
    /// `s_0 ..= s_{N+1}`, endpoints at both ends.
    mids: Vec<f64>,
    /// `sigma_1 ..= sigma_{N+1}` stored at offsets `0 ..= N`.
    sigma: Vec<f64>,
    sigma_prime: Vec<f64>,
}

impl Partition1D {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 3 {
            return Err(QiError::PartitionTooShort(knots.len()));
        }
        for (i, &k) in knots.iter().enumerate() {
            if !k.is_finite() || (i > 0 && k <= knots[i - 1]) {
                return Err(QiError::NonIncreasingKnot { index: i, value: k });
            }
        }
        let n = knots.len() - 1;

        let mut steps = vec![0.0; n + 2];
        let mut mids = vec![0.0; n + 2];
        for i in 1..=n {
            steps[i] = knots[i] - knots[i - 1];
            mids[i] = 0.5 * (knots[i - 1] + knots[i]);
        }
        mids[0] = knots[0];
        mids[n + 1] = knots[n];

        let mut sigma = vec![0.0; n + 1];
        let mut sigma_prime = vec![0.0; n + 1];
        sigma[0] = 1.0;
        for i in 2..=n {
            sigma[i - 1] = steps[i] / (steps[i - 1] + steps[i]);
        }
        sigma[n] = 0.0;
        for (sp, s) in sigma_prime.iter_mut().zip(&sigma) {
            *sp = 1.0 - s;
        }

        Ok(Partition1D {
            knots,
            steps,
            mids,
            sigma,
            sigma_prime,
        })
    }

    /// Evenly spaced partition of `[a, b]` into `cells` cells.
    pub fn uniform(a: f64, b: f64, cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(QiError::PartitionTooShort(cells + 1));
        }
        let mut knots: Vec<f64> = (0..=cells)
            .map(|i| a + (b - a) * i as f64 / cells as f64)
            .collect();
        knots[cells] = b;
        Partition1D::new(knots)
    }

    /// Number of cells `N`.
    pub fn cells(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn knot(&self, i: usize) -> f64 {
        self.knots[i]
    }

    pub fn start(&self) -> f64 {
        self.knots[0]
    }

    pub fn end(&self) -> f64 {
        self.knots[self.cells()]
    }

    /// `h_i` for `0 <= i <= N+1`.
    pub fn step(&self, i: usize) -> f64 {
        self.steps[i]
    }

    /// `s_i` for `0 <= i <= N+1`.
    pub fn mid(&self, i: usize) -> f64 {
        self.mids[i]
    }

    /// `sigma_i` for `1 <= i <= N+1`.
    pub fn sigma(&self, i: usize) -> f64 {
        assert!(i >= 1 && i <= self.cells() + 1, "sigma index {i} out of range");
        self.sigma[i - 1]
    }

    /// `sigma'_i = 1 - sigma_i` for `1 <= i <= N+1`.
    pub fn sigma_prime(&self, i: usize) -> f64 {
        assert!(i >= 1 && i <= self.cells() + 1, "sigma' index {i} out of range");
        self.sigma_prime[i - 1]
    }

    pub fn max_step(&self) -> f64 {
        self.steps[1..=self.cells()].iter().copied().fold(0.0, f64::max)
    }

    pub fn min_step(&self) -> f64 {
        self.steps[1..=self.cells()]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.start() && x <= self.end()
    }

    /// Cell `r` (1-based) with `x` in `[t_{r-1}, t_r)`; the last cell is closed.
    pub fn locate_cell(&self, x: f64) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let n = self.cells();
        // number of knots <= x, minus one for t_0
        let idx = self.knots.partition_point(|&k| k <= x);
        Some(idx.clamp(1, n))
    }
}

/// One of the four triangles a cell is split into by its diagonals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TriangleKind {
    North = 1,
    West = 2,
    South = 3,
    East = 4,
}

impl TriangleKind {
    pub const ALL: [TriangleKind; 4] = [
        TriangleKind::North,
        TriangleKind::West,
        TriangleKind::South,
        TriangleKind::East,
    ];

    /// Membership test order used to break ties on shared edges.
    pub const LOCATE_ORDER: [TriangleKind; 4] = [
        TriangleKind::South,
        TriangleKind::West,
        TriangleKind::North,
        TriangleKind::East,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(l: u8) -> Option<Self> {
        match l {
            1 => Some(TriangleKind::North),
            2 => Some(TriangleKind::West),
            3 => Some(TriangleKind::South),
            4 => Some(TriangleKind::East),
            _ => None,
        }
    }

    fn offset(self) -> usize {
        self as usize - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TriangleRef {
    pub r: usize,
    pub s: usize,
    pub kind: TriangleKind,
}

impl TriangleRef {
    pub fn new(r: usize, s: usize, kind: TriangleKind) -> Self {
        TriangleRef { r, s, kind }
    }

    /// The index set of the seven B-splines whose supports meet the interior
    /// of this triangle.
    pub fn active_indices(&self) -> [(usize, usize); 7] {
        let (r, s) = (self.r, self.s);
        match self.kind {
            TriangleKind::North => [
                (r, s - 1),
                (r - 1, s),
                (r, s),
                (r + 1, s),
                (r - 1, s + 1),
                (r, s + 1),
                (r + 1, s + 1),
            ],
            TriangleKind::West => [
                (r - 1, s - 1),
                (r, s - 1),
                (r - 1, s),
                (r, s),
                (r + 1, s),
                (r - 1, s + 1),
                (r, s + 1),
            ],
            TriangleKind::South => [
                (r - 1, s - 1),
                (r, s - 1),
                (r + 1, s - 1),
                (r - 1, s),
                (r, s),
                (r + 1, s),
                (r, s + 1),
            ],
            TriangleKind::East => [
                (r, s - 1),
                (r + 1, s - 1),
                (r - 1, s),
                (r, s),
                (r + 1, s),
                (r, s + 1),
                (r + 1, s + 1),
            ],
        }
    }
}

impl fmt::Display for TriangleRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}[{},{}]", self.kind.number(), self.r, self.s)
    }
}

/// Which corner of a cell a half-diagonal midpoint sits next to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Corner {
    SouthWest = 0,
    SouthEast = 1,
    NorthEast = 2,
    NorthWest = 3,
}

/// Location of a global Bernstein-Bezier domain point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DofKind {
    /// Rectangle vertex `A_{i,j}`.
    Vertex { i: usize, j: usize },
    /// Cell center of cell `(r, s)`.
    Center { r: usize, s: usize },
    /// Midpoint of the horizontal side `A_{r-1,j} A_{r,j}`.
    HorizontalEdge { r: usize, j: usize },
    /// Midpoint of the vertical side `A_{i,s-1} A_{i,s}`.
    VerticalEdge { i: usize, s: usize },
    /// Midpoint between the center of cell `(r, s)` and one of its corners.
    HalfDiagonal { r: usize, s: usize, corner: Corner },
}

/// Mesh quantities `h = max step`, `delta = min step`, `gamma = h / delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshRatios {
    pub h: f64,
    pub delta: f64,
    pub gamma: f64,
}

/// Criss-cross triangulation of `[x_0, x_m] x [y_0, y_n]`.
#[derive(Debug, Clone)]
pub struct CrissCrossMesh {
    px: Partition1D,
    py: Partition1D,
    /// For each dof, the triangles (global indices) it belongs to.
    dof_triangles: Vec<Vec<usize>>,
}

impl CrissCrossMesh {
    pub fn new(px: Partition1D, py: Partition1D) -> Result<Self> {
        let (m, n) = (px.cells(), py.cells());
        if m < 2 || n < 2 {
            return Err(QiError::UnsupportedMesh { m, n });
        }
        let mut mesh = CrissCrossMesh {
            px,
            py,
            dof_triangles: Vec::new(),
        };
        let mut incidence = vec![Vec::new(); mesh.dof_count()];
        for t in mesh.triangles() {
            let ti = mesh.triangle_index(t);
            for d in mesh.triangle_dofs(t) {
                incidence[d].push(ti);
            }
        }
        mesh.dof_triangles = incidence;
        Ok(mesh)
    }

    pub fn uniform(m: usize, n: usize, domain: [f64; 4]) -> Result<Self> {
        if m < 2 || n < 2 {
            return Err(QiError::UnsupportedMesh { m, n });
        }
        let [a, b, c, d] = domain;
        CrissCrossMesh::new(Partition1D::uniform(a, b, m)?, Partition1D::uniform(c, d, n)?)
    }

    pub fn px(&self) -> &Partition1D {
        &self.px
    }

    pub fn py(&self) -> &Partition1D {
        &self.py
    }

    pub fn m(&self) -> usize {
        self.px.cells()
    }

    pub fn n(&self) -> usize {
        self.py.cells()
    }

    /// `[a, b, c, d]` for the domain `[a, b] x [c, d]`.
    pub fn domain(&self) -> [f64; 4] {
        [self.px.start(), self.px.end(), self.py.start(), self.py.end()]
    }

    pub fn contains(&self, p: Point) -> bool {
        self.px.contains(p.x) && self.py.contains(p.y)
    }

    /// Euclidean distance from `p` to the closed domain (zero inside).
    pub fn distance_outside(&self, p: Point) -> f64 {
        let [a, b, c, d] = self.domain();
        let dx = (a - p.x).max(0.0).max(p.x - b);
        let dy = (c - p.y).max(0.0).max(p.y - d);
        dx.hypot(dy)
    }

    /// Rectangle vertex `A_{i,j}`, `0 <= i <= m`, `0 <= j <= n`.
    pub fn vertex(&self, i: usize, j: usize) -> Point {
        Point::new(self.px.knot(i), self.py.knot(j))
    }

    /// Data-site center `M_{i,j} = (s_i, t_j)`, `0 <= i <= m+1`, `0 <= j <= n+1`.
    pub fn center(&self, i: usize, j: usize) -> Point {
        Point::new(self.px.mid(i), self.py.mid(j))
    }

    pub fn triangle_count(&self) -> usize {
        4 * self.m() * self.n()
    }

    pub fn triangle_index(&self, t: TriangleRef) -> usize {
        ((t.s - 1) * self.m() + (t.r - 1)) * 4 + t.kind.offset()
    }

    pub fn triangle_from_index(&self, idx: usize) -> TriangleRef {
        let cell = idx / 4;
        let kind = TriangleKind::ALL[idx % 4];
        TriangleRef::new(cell % self.m() + 1, cell / self.m() + 1, kind)
    }

    pub fn check_triangle(&self, t: TriangleRef) -> Result<()> {
        if t.r < 1 || t.r > self.m() || t.s < 1 || t.s > self.n() {
            return Err(QiError::IndexOutOfRange {
                i: t.r,
                j: t.s,
                imax: self.m(),
                jmax: self.n(),
            });
        }
        Ok(())
    }

    /// All triangles, ordered by global index.
    pub fn triangles(&self) -> impl Iterator<Item = TriangleRef> + '_ {
        (0..self.triangle_count()).map(|i| self.triangle_from_index(i))
    }

    pub fn cell_triangles(&self, r: usize, s: usize) -> [TriangleRef; 4] {
        TriangleKind::ALL.map(|k| TriangleRef::new(r, s, k))
    }

    /// Vertex index pairs of `(V1, V2)`; `V3` is always the cell center.
    fn corner_indices(t: TriangleRef) -> [(usize, usize); 2] {
        let (r, s) = (t.r, t.s);
        match t.kind {
            TriangleKind::North => [(r, s), (r - 1, s)],
            TriangleKind::West => [(r - 1, s), (r - 1, s - 1)],
            TriangleKind::South => [(r - 1, s - 1), (r, s - 1)],
            TriangleKind::East => [(r, s - 1), (r, s)],
        }
    }

    pub fn triangle_vertices(&self, t: TriangleRef) -> [Point; 3] {
        let [(i1, j1), (i2, j2)] = Self::corner_indices(t);
        [self.vertex(i1, j1), self.vertex(i2, j2), self.center(t.r, t.s)]
    }

    // ---- domain-point registry ----

    fn n_vertices(&self) -> usize {
        (self.m() + 1) * (self.n() + 1)
    }
    fn n_centers(&self) -> usize {
        self.m() * self.n()
    }
    fn n_hedges(&self) -> usize {
        self.m() * (self.n() + 1)
    }
    fn n_vedges(&self) -> usize {
        (self.m() + 1) * self.n()
    }

    /// Number of global quadratic BB domain points.
    pub fn dof_count(&self) -> usize {
        self.n_vertices() + self.n_centers() + self.n_hedges() + self.n_vedges() + 4 * self.n_centers()
    }

    pub fn vertex_dof(&self, i: usize, j: usize) -> usize {
        j * (self.m() + 1) + i
    }

    pub fn center_dof(&self, r: usize, s: usize) -> usize {
        self.n_vertices() + (s - 1) * self.m() + (r - 1)
    }

    pub fn hedge_dof(&self, r: usize, j: usize) -> usize {
        self.n_vertices() + self.n_centers() + j * self.m() + (r - 1)
    }

    pub fn vedge_dof(&self, i: usize, s: usize) -> usize {
        self.n_vertices() + self.n_centers() + self.n_hedges() + (s - 1) * (self.m() + 1) + i
    }

    pub fn half_diagonal_dof(&self, r: usize, s: usize, corner: Corner) -> usize {
        self.n_vertices()
            + self.n_centers()
            + self.n_hedges()
            + self.n_vedges()
            + ((s - 1) * self.m() + (r - 1)) * 4
            + corner as usize
    }

    pub fn dof_kind(&self, dof: usize) -> DofKind {
        let (m, n) = (self.m(), self.n());
        let mut d = dof;
        if d < self.n_vertices() {
            return DofKind::Vertex { i: d % (m + 1), j: d / (m + 1) };
        }
        d -= self.n_vertices();
        if d < self.n_centers() {
            return DofKind::Center { r: d % m + 1, s: d / m + 1 };
        }
        d -= self.n_centers();
        if d < self.n_hedges() {
            return DofKind::HorizontalEdge { r: d % m + 1, j: d / m };
        }
        d -= self.n_hedges();
        if d < self.n_vedges() {
            return DofKind::VerticalEdge { i: d % (m + 1), s: d / (m + 1) + 1 };
        }
        d -= self.n_vedges();
        assert!(d < 4 * m * n, "dof {dof} out of range");
        let cell = d / 4;
        let corner = [Corner::SouthWest, Corner::SouthEast, Corner::NorthEast, Corner::NorthWest][d % 4];
        DofKind::HalfDiagonal { r: cell % m + 1, s: cell / m + 1, corner }
    }

    /// The two points whose midpoint is the domain point (equal for vertices
    /// and centers). The polar form of a quadratic at this pair is its BB
    /// coefficient at the domain point.
    pub fn dof_pair(&self, dof: usize) -> (Point, Point) {
        match self.dof_kind(dof) {
            DofKind::Vertex { i, j } => (self.vertex(i, j), self.vertex(i, j)),
            DofKind::Center { r, s } => (self.center(r, s), self.center(r, s)),
            DofKind::HorizontalEdge { r, j } => (self.vertex(r - 1, j), self.vertex(r, j)),
            DofKind::VerticalEdge { i, s } => (self.vertex(i, s - 1), self.vertex(i, s)),
            DofKind::HalfDiagonal { r, s, corner } => {
                let v = match corner {
                    Corner::SouthWest => self.vertex(r - 1, s - 1),
                    Corner::SouthEast => self.vertex(r, s - 1),
                    Corner::NorthEast => self.vertex(r, s),
                    Corner::NorthWest => self.vertex(r - 1, s),
                };
                (v, self.center(r, s))
            }
        }
    }

    pub fn dof_point(&self, dof: usize) -> Point {
        let (a, b) = self.dof_pair(dof);
        a.midpoint(b)
    }

    /// Global dof ids of a triangle in BB order
    /// `(200), (110), (101), (020), (011), (002)`.
    pub fn triangle_dofs(&self, t: TriangleRef) -> [usize; 6] {
        let (r, s) = (t.r, t.s);
        let [(i1, j1), (i2, j2)] = Self::corner_indices(t);
        let (side, c1, c2) = match t.kind {
            TriangleKind::North => (self.hedge_dof(r, s), Corner::NorthEast, Corner::NorthWest),
            TriangleKind::West => (self.vedge_dof(r - 1, s), Corner::NorthWest, Corner::SouthWest),
            TriangleKind::South => (self.hedge_dof(r, s - 1), Corner::SouthWest, Corner::SouthEast),
            TriangleKind::East => (self.vedge_dof(r, s), Corner::SouthEast, Corner::NorthEast),
        };
        [
            self.vertex_dof(i1, j1),
            side,
            self.half_diagonal_dof(r, s, c1),
            self.vertex_dof(i2, j2),
            self.half_diagonal_dof(r, s, c2),
            self.center_dof(r, s),
        ]
    }

    /// Global indices of the triangles containing a domain point.
    pub fn dof_triangles(&self, dof: usize) -> &[usize] {
        &self.dof_triangles[dof]
    }

    /// Neighbours across the edges `V1V2`, `V1V3`, `V2V3` (in that order).
    pub fn neighbors(&self, t: TriangleRef) -> [Option<TriangleRef>; 3] {
        use TriangleKind::*;
        let (r, s) = (t.r, t.s);
        let (m, n) = (self.m(), self.n());
        let same = |k| Some(TriangleRef::new(r, s, k));
        match t.kind {
            North => [
                (s < n).then(|| TriangleRef::new(r, s + 1, South)),
                same(East),
                same(West),
            ],
            West => [
                (r > 1).then(|| TriangleRef::new(r - 1, s, East)),
                same(North),
                same(South),
            ],
            South => [
                (s > 1).then(|| TriangleRef::new(r, s - 1, North)),
                same(West),
                same(East),
            ],
            East => [
                (r < m).then(|| TriangleRef::new(r + 1, s, West)),
                same(South),
                same(North),
            ],
        }
    }

    /// Triangle containing `p`. Ties on shared edges resolve by testing
    /// south, west, north, east in that order; interior knots belong to the
    /// cell on their right (above), the last cell is closed.
    pub fn locate(&self, p: Point) -> Result<TriangleRef> {
        let (Some(r), Some(s)) = (self.px.locate_cell(p.x), self.py.locate_cell(p.y)) else {
            return Err(QiError::OutOfDomain { x: p.x, y: p.y });
        };
        let c = self.center(r, s);
        let u = (p.x - c.x) / (0.5 * self.px.step(r));
        let v = (p.y - c.y) / (0.5 * self.py.step(s));
        let kind = TriangleKind::LOCATE_ORDER
            .into_iter()
            .find(|k| match k {
                TriangleKind::South => v <= u && v <= -u,
                TriangleKind::West => u <= v && u <= -v,
                TriangleKind::North => v >= u && v >= -u,
                TriangleKind::East => u >= v && u >= -v,
            })
            .expect("the four diagonal sectors cover the cell");
        Ok(TriangleRef::new(r, s, kind))
    }

    pub fn ratios(&self) -> MeshRatios {
        let h = self.px.max_step().max(self.py.max_step());
        let delta = self.px.min_step().min(self.py.min_step());
        MeshRatios { h, delta, gamma: h / delta }
    }

    /// True when `(i, j)` is an inner index (`1..=m` x `1..=n`).
    pub fn is_inner_index(&self, i: usize, j: usize) -> bool {
        (1..=self.m()).contains(&i) && (1..=self.n()).contains(&j)
    }

    pub fn check_index(&self, i: usize, j: usize) -> Result<()> {
        if i > self.m() + 1 || j > self.n() + 1 {
            return Err(QiError::IndexOutOfRange {
                i,
                j,
                imax: self.m() + 1,
                jmax: self.n() + 1,
            });
        }
        Ok(())
    }

    /// All of `K_mn`, j-major.
    pub fn all_indices(&self) -> impl Iterator<Item = (usize, usize)> {
        let (m, n) = (self.m(), self.n());
        (0..=n + 1).flat_map(move |j| (0..=m + 1).map(move |i| (i, j)))
    }

    pub fn inner_indices(&self) -> impl Iterator<Item = (usize, usize)> {
        let (m, n) = (self.m(), self.n());
        (1..=n).flat_map(move |j| (1..=m).map(move |i| (i, j)))
    }

    /// Position of `(i, j)` in `all_indices`.
    pub fn index_slot(&self, i: usize, j: usize) -> usize {
        j * (self.m() + 2) + i
    }

    pub fn index_count(&self) -> usize {
        (self.m() + 2) * (self.n() + 2)
    }
}

/// Barycentric coordinates of `p` with respect to a triangle.
pub fn barycentric(v: &[Point; 3], p: Point) -> [f64; 3] {
    let det = (v[1].x - v[0].x) * (v[2].y - v[0].y) - (v[2].x - v[0].x) * (v[1].y - v[0].y);
    let l2 = ((p.x - v[0].x) * (v[2].y - v[0].y) - (v[2].x - v[0].x) * (p.y - v[0].y)) / det;
    let l3 = ((v[1].x - v[0].x) * (p.y - v[0].y) - (p.x - v[0].x) * (v[1].y - v[0].y)) / det;
    [1.0 - l2 - l3, l2, l3]
}
