//! 1-irregular quadrilateral meshes with per-element polynomial degree.
//!
//! Cells form a forest rooted at the initial grid. Vertex positions are kept on
//! an integer lattice (every refinement is dyadic), so topology queries are exact.
//! Cell ids are stable across refinement; inactive (refined) cells stay in the
//! forest to keep lineage.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use smallvec::{smallvec, SmallVec};

use crate::error::{Error, Result};

pub type CellId = usize;
pub type VertexId = usize;

/// Lattice depth: a root cell spans `2^MAX_DEPTH` lattice units.
const MAX_DEPTH: u32 = 30;
const ROOT_SIZE: i64 = 1 << MAX_DEPTH;

/// Local side of a cell, and side of the rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Bottom = 0,
    Right = 1,
    Top = 2,
    Left = 3,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    pub fn opposite(self) -> Side {
        match self {
            Side::Bottom => Side::Top,
            Side::Right => Side::Left,
            Side::Top => Side::Bottom,
            Side::Left => Side::Right,
        }
    }

    /// Local corner indices (counterclockwise numbering) spanning this side.
    pub fn corners(self) -> [usize; 2] {
        match self {
            Side::Bottom => [0, 1],
            Side::Right => [1, 2],
            Side::Top => [3, 2],
            Side::Left => [0, 3],
        }
    }

    /// True when the side runs along the reference `x` direction.
    pub fn is_horizontal(self) -> bool {
        matches!(self, Side::Bottom | Side::Top)
    }

    /// Reference-element outward normal.
    pub fn reference_normal(self) -> [f64; 2] {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Right => [1.0, 0.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
        }
    }

    /// Reference point on this side for the edge parameter `t` in `[-1, 1]`
    /// (running along increasing reference coordinate).
    pub fn reference_point(self, t: f64) -> [f64; 2] {
        match self {
            Side::Bottom => [t, -1.0],
            Side::Right => [1.0, t],
            Side::Top => [t, 1.0],
            Side::Left => [-1.0, t],
        }
    }
}

/// Axis-aligned rectangle `(x0, x1) x (y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Which domain sides carry homogeneous Dirichlet conditions; the rest are Neumann.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryLayout {
    pub dirichlet: [bool; 4],
}

impl BoundaryLayout {
    /// Clamped bottom side, traction boundary elsewhere.
    pub fn clamped_bottom() -> Self {
        Self {
            dirichlet: [true, false, false, false],
        }
    }

    pub fn kind(&self, side: Side) -> EdgeKind {
        if self.dirichlet[side as usize] {
            EdgeKind::Dirichlet
        } else {
            EdgeKind::Neumann
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Interior,
    Dirichlet,
    Neumann,
}

/// What lies across one side of an active cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    /// Domain boundary on the given domain side.
    Boundary(Side),
    /// A cell of the same size sharing the whole side.
    Same(CellId),
    /// This side is one half of a side of a coarser cell.
    Coarser(CellId),
    /// Two finer cells cover this side, ordered along the side.
    Finer([CellId; 2]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Corner vertices, counterclockwise from bottom-left.
    pub vertices: [VertexId; 4],
    pub degree: usize,
    pub level: u32,
    pub parent: Option<CellId>,
    /// Children bottom-left, bottom-right, top-right, top-left.
    pub children: Option<[CellId; 4]>,
    origin: [i64; 2],
    size: i64,
}

impl Cell {
    pub fn is_active(&self) -> bool {
        self.children.is_none()
    }
}

/// An edge of the active mesh. Hanging configurations are stored as the
/// fine segments, each listing the coarse cell first.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [VertexId; 2],
    pub kind: EdgeKind,
    pub elements: SmallVec<[CellId; 2]>,
    pub normal: [f64; 2],
    pub hanging: bool,
}

/// Lattice segment key, endpoints sorted.
type Segment = ([i64; 2], [i64; 2]);

fn segment(a: [i64; 2], b: [i64; 2]) -> Segment {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone)]
pub struct QuadMesh {
    domain: Rect,
    nx: usize,
    ny: usize,
    boundary: BoundaryLayout,
    vertices: Vec<[f64; 2]>,
    lattice: Vec<[i64; 2]>,
    vertex_index: HashMap<[i64; 2], VertexId>,
    cells: Vec<Cell>,
    active: Vec<CellId>,
    active_pos: Vec<usize>,
    neighbors: Vec<[Neighbor; 4]>,
    edges: Vec<Edge>,
}

/// Uniform `nx x ny` grid of degree-`p` cells.
pub fn build_rectangle_mesh(
    domain: Rect,
    nx: usize,
    ny: usize,
    p: usize,
    boundary: BoundaryLayout,
) -> Result<QuadMesh> {
    QuadMesh::rectangle(domain, nx, ny, p, boundary)
}

impl QuadMesh {
    pub fn rectangle(
        domain: Rect,
        nx: usize,
        ny: usize,
        p: usize,
        boundary: BoundaryLayout,
    ) -> Result<Self> {
        if !(domain.x1 > domain.x0 && domain.y1 > domain.y0)
            || !domain.area().is_finite()
        {
            return Err(Error::DegenerateDomain(format!("{domain:?}")));
        }
        if nx == 0 || ny == 0 || p == 0 {
            return Err(Error::InvalidArgument(format!(
                "need nx, ny, p >= 1 (got {nx}, {ny}, {p})"
            )));
        }
        let mut mesh = QuadMesh {
            domain,
            nx,
            ny,
            boundary,
            vertices: Vec::new(),
            lattice: Vec::new(),
            vertex_index: HashMap::new(),
            cells: Vec::new(),
            active: Vec::new(),
            active_pos: Vec::new(),
            neighbors: Vec::new(),
            edges: Vec::new(),
        };
        for j in 0..ny as i64 {
            for i in 0..nx as i64 {
                let o = [i * ROOT_SIZE, j * ROOT_SIZE];
                let vertices = mesh.corner_vertices(o, ROOT_SIZE);
                mesh.cells.push(Cell {
                    vertices,
                    degree: p,
                    level: 0,
                    parent: None,
                    children: None,
                    origin: o,
                    size: ROOT_SIZE,
                });
            }
        }
        mesh.rebuild_topology();
        Ok(mesh)
    }

    fn vertex_at(&mut self, l: [i64; 2]) -> VertexId {
        if let Some(&v) = self.vertex_index.get(&l) {
            return v;
        }
        let hx = (self.domain.x1 - self.domain.x0) / self.nx as f64;
        let hy = (self.domain.y1 - self.domain.y0) / self.ny as f64;
        let x = self.domain.x0 + (l[0] as f64 / ROOT_SIZE as f64) * hx;
        let y = self.domain.y0 + (l[1] as f64 / ROOT_SIZE as f64) * hy;
        // snap the far sides exactly
        let x = if l[0] == self.nx as i64 * ROOT_SIZE { self.domain.x1 } else { x };
        let y = if l[1] == self.ny as i64 * ROOT_SIZE { self.domain.y1 } else { y };
        let id = self.vertices.len();
        self.vertices.push([x, y]);
        self.lattice.push(l);
        self.vertex_index.insert(l, id);
        id
    }

    fn corner_vertices(&mut self, o: [i64; 2], s: i64) -> [VertexId; 4] {
        [
            self.vertex_at(o),
            self.vertex_at([o[0] + s, o[1]]),
            self.vertex_at([o[0] + s, o[1] + s]),
            self.vertex_at([o[0], o[1] + s]),
        ]
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn boundary_layout(&self) -> BoundaryLayout {
        self.boundary
    }

    pub fn root_grid(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id]
    }

    pub fn num_cells_total(&self) -> usize {
        self.cells.len()
    }

    /// Active cells in ascending id order.
    pub fn elements(&self) -> &[CellId] {
        &self.active
    }

    pub fn num_elements(&self) -> usize {
        self.active.len()
    }

    /// Position of an active cell in [`Self::elements`].
    pub fn active_index(&self, id: CellId) -> Option<usize> {
        self.active_pos
            .get(id)
            .copied()
            .filter(|&p| p != usize::MAX)
    }

    pub fn is_active(&self, id: CellId) -> bool {
        self.active_index(id).is_some()
    }

    pub fn degree(&self, id: CellId) -> usize {
        self.cells[id].degree
    }

    pub fn max_level(&self) -> u32 {
        self.active.iter().map(|&c| self.cells[c].level).max().unwrap_or(0)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbours across the four sides of an active cell.
    pub fn neighbors(&self, id: CellId) -> &[Neighbor; 4] {
        &self.neighbors[self.active_index(id).expect("active cell")]
    }

    pub fn neighbor(&self, id: CellId, side: Side) -> Neighbor {
        self.neighbors(id)[side as usize]
    }

    /// Active cells sharing (part of) a side with `id`.
    pub fn edge_neighbors(&self, id: CellId) -> SmallVec<[CellId; 8]> {
        let mut out = SmallVec::new();
        for n in self.neighbors(id) {
            match *n {
                Neighbor::Boundary(_) => {}
                Neighbor::Same(c) | Neighbor::Coarser(c) => out.push(c),
                Neighbor::Finer([a, b]) => {
                    out.push(a);
                    out.push(b);
                }
            }
        }
        out
    }

    pub fn vertex_lattice(&self, v: VertexId) -> [i64; 2] {
        self.lattice[v]
    }

    pub fn corner_points(&self, id: CellId) -> [[f64; 2]; 4] {
        self.cells[id].vertices.map(|v| self.vertices[v])
    }

    fn side_segment(&self, id: CellId, side: Side) -> Segment {
        let c = &self.cells[id];
        let [a, b] = side.corners();
        segment(self.lattice[c.vertices[a]], self.lattice[c.vertices[b]])
    }

    fn domain_side_of(&self, seg: &Segment) -> Option<Side> {
        let (a, b) = seg;
        let xmax = self.nx as i64 * ROOT_SIZE;
        let ymax = self.ny as i64 * ROOT_SIZE;
        if a[1] == 0 && b[1] == 0 {
            Some(Side::Bottom)
        } else if a[1] == ymax && b[1] == ymax {
            Some(Side::Top)
        } else if a[0] == 0 && b[0] == 0 {
            Some(Side::Left)
        } else if a[0] == xmax && b[0] == xmax {
            Some(Side::Right)
        } else {
            None
        }
    }

    /// Domain side a vertex lies on (first match in Bottom, Right, Top, Left order).
    pub fn vertex_domain_sides(&self, v: VertexId) -> SmallVec<[Side; 2]> {
        let l = self.lattice[v];
        let xmax = self.nx as i64 * ROOT_SIZE;
        let ymax = self.ny as i64 * ROOT_SIZE;
        let mut out = SmallVec::new();
        if l[1] == 0 {
            out.push(Side::Bottom);
        }
        if l[0] == xmax {
            out.push(Side::Right);
        }
        if l[1] == ymax {
            out.push(Side::Top);
        }
        if l[0] == 0 {
            out.push(Side::Left);
        }
        out
    }

    fn rebuild_topology(&mut self) {
        self.active = (0..self.cells.len())
            .filter(|&c| self.cells[c].is_active())
            .collect();
        self.active_pos = vec![usize::MAX; self.cells.len()];
        for (i, &c) in self.active.iter().enumerate() {
            self.active_pos[c] = i;
        }

        let mut owners: HashMap<Segment, SmallVec<[CellId; 2]>> = HashMap::new();
        for &c in &self.active {
            for s in Side::ALL {
                owners.entry(self.side_segment(c, s)).or_default().push(c);
            }
        }

        let mut neighbors = Vec::with_capacity(self.active.len());
        for &c in &self.active {
            let mut nb = [Neighbor::Boundary(Side::Bottom); 4];
            for s in Side::ALL {
                nb[s as usize] = self.resolve_neighbor(c, s, &owners);
            }
            neighbors.push(nb);
        }
        self.neighbors = neighbors;

        let mut edges = Vec::new();
        for (i, &c) in self.active.iter().enumerate() {
            for s in Side::ALL {
                let [a, b] = s.corners();
                let verts = [self.cells[c].vertices[a], self.cells[c].vertices[b]];
                match self.neighbors[i][s as usize] {
                    Neighbor::Boundary(ds) => edges.push(Edge {
                        vertices: verts,
                        kind: self.boundary.kind(ds),
                        elements: smallvec![c],
                        normal: ds.reference_normal(),
                        hanging: false,
                    }),
                    Neighbor::Same(n) if c < n => edges.push(Edge {
                        vertices: verts,
                        kind: EdgeKind::Interior,
                        elements: smallvec![c, n],
                        normal: self.interior_normal(verts),
                        hanging: false,
                    }),
                    Neighbor::Coarser(n) => edges.push(Edge {
                        vertices: verts,
                        kind: EdgeKind::Interior,
                        elements: smallvec![n, c],
                        normal: self.interior_normal(verts),
                        hanging: true,
                    }),
                    _ => {}
                }
            }
        }
        self.edges = edges;
    }

    /// Fixed interior-edge normal, pointing towards increasing lattice coordinates.
    fn interior_normal(&self, v: [VertexId; 2]) -> [f64; 2] {
        let (p, q) = (self.vertices[v[0]], self.vertices[v[1]]);
        let t = [q[0] - p[0], q[1] - p[1]];
        let len = t[0].hypot(t[1]);
        let mut n = [t[1] / len, -t[0] / len];
        if n[0] + 1e-3 * n[1] < 0.0 {
            n = [-n[0], -n[1]];
        }
        n
    }

    fn resolve_neighbor(
        &self,
        c: CellId,
        s: Side,
        owners: &HashMap<Segment, SmallVec<[CellId; 2]>>,
    ) -> Neighbor {
        let seg = self.side_segment(c, s);
        if let Some(ds) = self.domain_side_of(&seg) {
            return Neighbor::Boundary(ds);
        }
        if let Some(o) = owners.get(&seg) {
            if let Some(&n) = o.iter().find(|&&n| n != c) {
                return Neighbor::Same(n);
            }
        }
        let (a, b) = seg;
        let mid = [(a[0] + b[0]) / 2, (a[1] + b[1]) / 2];
        let h1 = owners.get(&segment(a, mid)).and_then(|o| o.iter().find(|&&n| n != c));
        let h2 = owners.get(&segment(mid, b)).and_then(|o| o.iter().find(|&&n| n != c));
        if let (Some(&n1), Some(&n2)) = (h1, h2) {
            return Neighbor::Finer([n1, n2]);
        }
        let d = [b[0] - a[0], b[1] - a[1]];
        for cand in [segment(a, [b[0] + d[0], b[1] + d[1]]), segment([a[0] - d[0], a[1] - d[1]], b)] {
            if let Some(o) = owners.get(&cand) {
                if let Some(&n) = o.iter().find(|&&n| n != c) {
                    return Neighbor::Coarser(n);
                }
            }
        }
        panic!("mesh is not 1-irregular at cell {c}, side {s:?}");
    }

    fn check_marked(&self, marked: &[CellId]) -> Result<()> {
        match marked.iter().find(|&&c| !self.is_active(c)) {
            Some(c) => Err(Error::InvalidArgument(format!("cell {c} is not an active element"))),
            None => Ok(()),
        }
    }

    /// Splits every marked cell into four children, adding the closure
    /// refinements needed to keep the mesh 1-irregular.
    pub fn refine(&self, marked: &[CellId]) -> Result<QuadMesh> {
        self.check_marked(marked)?;
        let mut set: BTreeSet<CellId> = marked.iter().copied().collect();
        let mut work: Vec<CellId> = set.iter().copied().collect();
        while let Some(c) = work.pop() {
            for n in self.neighbors(c) {
                if let Neighbor::Coarser(coarse) = *n {
                    if set.insert(coarse) {
                        work.push(coarse);
                    }
                }
            }
        }
        let mut out = self.clone();
        for c in set {
            out.split(c);
        }
        out.rebuild_topology();
        Ok(out)
    }

    /// Uniform refinement of every active cell.
    pub fn refine_all(&self) -> QuadMesh {
        self.refine(&self.active).expect("active cells are valid")
    }

    fn split(&mut self, c: CellId) {
        let (o, s, level, p) = {
            let cell = &self.cells[c];
            (cell.origin, cell.size / 2, cell.level + 1, cell.degree)
        };
        assert!(s >= 1, "maximum refinement depth reached");
        let origins = [o, [o[0] + s, o[1]], [o[0] + s, o[1] + s], [o[0], o[1] + s]];
        let first = self.cells.len();
        for origin in origins {
            let vertices = self.corner_vertices(origin, s);
            self.cells.push(Cell {
                vertices,
                degree: p,
                level,
                parent: Some(c),
                children: None,
                origin,
                size: s,
            });
        }
        self.cells[c].children = Some([first, first + 1, first + 2, first + 3]);
    }

    /// Raises the degree of every marked cell by one, then raises neighbours
    /// until edge-neighbour degrees differ by at most one.
    pub fn p_refine(&self, marked: &[CellId]) -> Result<QuadMesh> {
        self.check_marked(marked)?;
        let mut out = self.clone();
        let unique: BTreeSet<CellId> = marked.iter().copied().collect();
        for c in unique {
            out.cells[c].degree += 1;
        }
        out.restore_degree_comparability();
        Ok(out)
    }

    /// Sets explicit degrees (used for overkill spaces and tests), then restores comparability.
    pub fn with_degrees(&self, degree: impl Fn(CellId, usize) -> usize) -> QuadMesh {
        let mut out = self.clone();
        for &c in &self.active {
            out.cells[c].degree = degree(c, self.cells[c].degree).max(1);
        }
        out.restore_degree_comparability();
        out
    }

    fn restore_degree_comparability(&mut self) {
        loop {
            let mut changed = false;
            for i in 0..self.active.len() {
                let c = self.active[i];
                let pc = self.cells[c].degree;
                for n in self.edge_neighbors(c) {
                    if self.cells[n].degree + 1 < pc {
                        self.cells[n].degree = pc - 1;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    /// Bilinear map from the reference square `[-1,1]^2` onto the cell.
    pub fn map_point(&self, id: CellId, xr: [f64; 2]) -> [f64; 2] {
        let x = self.corner_points(id);
        let n = bilinear_shape(xr);
        let mut out = [0.0; 2];
        for k in 0..4 {
            out[0] += n[k] * x[k][0];
            out[1] += n[k] * x[k][1];
        }
        out
    }

    /// Half side lengths of a cell, computed from its lattice size so that
    /// tiny cells far from the origin keep full relative precision.
    pub fn half_extent(&self, id: CellId) -> [f64; 2] {
        let s = self.cells[id].size as f64;
        let ux = (self.domain.x1 - self.domain.x0) / (self.nx as f64 * ROOT_SIZE as f64);
        let uy = (self.domain.y1 - self.domain.y0) / (self.ny as f64 * ROOT_SIZE as f64);
        [0.5 * s * ux, 0.5 * s * uy]
    }

    /// Jacobian `d x / d xr` of the element map (row = physical component) and its determinant.
    pub fn jacobian(&self, id: CellId, _xr: [f64; 2]) -> ([[f64; 2]; 2], f64) {
        let [a, b] = self.half_extent(id);
        ([[a, 0.0], [0.0, b]], a * b)
    }

    /// Constant jacobian of the cell; every lattice cell is an axis-aligned rectangle.
    pub fn affine_jacobian(&self, id: CellId) -> Option<[[f64; 2]; 2]> {
        Some(self.jacobian(id, [0.0, 0.0]).0)
    }

    /// Newton inversion of the element map; returns the reference point
    /// (possibly outside `[-1,1]^2` if the point is outside the cell).
    pub fn inverse_map(&self, id: CellId, x: [f64; 2]) -> [f64; 2] {
        let mut xr = [0.0, 0.0];
        for _ in 0..50 {
            let f = self.map_point(id, xr);
            let r = [f[0] - x[0], f[1] - x[1]];
            let (j, det) = self.jacobian(id, xr);
            let d0 = (j[1][1] * r[0] - j[0][1] * r[1]) / det;
            let d1 = (-j[1][0] * r[0] + j[0][0] * r[1]) / det;
            xr[0] -= d0;
            xr[1] -= d1;
            if d0.abs().max(d1.abs()) <= 1e-13 {
                break;
            }
        }
        xr
    }

    /// Element diameter `h_T`.
    pub fn element_diameter(&self, id: CellId) -> f64 {
        let [a, b] = self.half_extent(id);
        2.0 * a.hypot(b)
    }

    /// Element area `|T|`.
    pub fn element_area(&self, id: CellId) -> f64 {
        let [a, b] = self.half_extent(id);
        4.0 * a * b
    }

    pub fn side_length(&self, id: CellId, side: Side) -> f64 {
        let [a, b] = self.half_extent(id);
        2.0 * if side.is_horizontal() { a } else { b }
    }

    pub fn edge_length(&self, e: &Edge) -> f64 {
        let (p, q) = (self.vertices[e.vertices[0]], self.vertices[e.vertices[1]]);
        (p[0] - q[0]).hypot(p[1] - q[1])
    }

    /// Active cell containing `x` and the reference coordinates of `x` in it,
    /// found by descending the refinement forest.
    pub fn locate(&self, x: [f64; 2]) -> Result<(CellId, [f64; 2])> {
        const TOL: f64 = 1e-10;
        let d = self.domain;
        let scale = (d.x1 - d.x0).max(d.y1 - d.y0);
        if x[0] < d.x0 - TOL * scale
            || x[0] > d.x1 + TOL * scale
            || x[1] < d.y0 - TOL * scale
            || x[1] > d.y1 + TOL * scale
        {
            return Err(Error::PointOutside { x: x[0], y: x[1] });
        }
        let fi = ((x[0] - d.x0) / (d.x1 - d.x0) * self.nx as f64).floor() as i64;
        let fj = ((x[1] - d.y0) / (d.y1 - d.y0) * self.ny as f64).floor() as i64;
        let i = fi.clamp(0, self.nx as i64 - 1) as usize;
        let j = fj.clamp(0, self.ny as i64 - 1) as usize;
        let mut c = j * self.nx + i;
        loop {
            let xr = self.inverse_map(c, x);
            match self.cells[c].children {
                None => return Ok((c, xr)),
                Some(ch) => {
                    let k = match (xr[0] >= 0.0, xr[1] >= 0.0) {
                        (false, false) => 0,
                        (true, false) => 1,
                        (true, true) => 2,
                        (false, true) => 3,
                    };
                    c = ch[k];
                }
            }
        }
    }

    /// Active cell of this mesh that contains (or equals) cell `id` of a
    /// refinement of this mesh sharing the same forest prefix.
    pub fn active_ancestor_of(&self, fine: &QuadMesh, mut id: CellId) -> Option<CellId> {
        loop {
            if id < self.cells.len() && self.is_active(id) && self.cells[id] .origin == fine.cells[id].origin {
                return Some(id);
            }
            id = fine.cells[id].parent?;
        }
    }

    /// Checks 1-irregularity, degree comparability, orientation and area coverage.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut area = 0.0;
        for &c in &self.active {
            let cell = &self.cells[c];
            for corner in [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]] {
                let (_, det) = self.jacobian(c, corner);
                if det <= 0.0 {
                    return Err(format!("cell {c} has non-positive jacobian {det}"));
                }
            }
            area += self.element_area(c);
            for (s, n) in Side::ALL.iter().zip(self.neighbors(c)) {
                let others: SmallVec<[CellId; 2]> = match *n {
                    Neighbor::Boundary(_) => smallvec![],
                    Neighbor::Same(o) => {
                        if self.cells[o].level != cell.level {
                            return Err(format!("cell {c} side {s:?}: same-size neighbour on other level"));
                        }
                        smallvec![o]
                    }
                    Neighbor::Coarser(o) => {
                        if self.cells[o].level + 1 != cell.level {
                            return Err(format!("cell {c} side {s:?}: level jump > 1"));
                        }
                        smallvec![o]
                    }
                    Neighbor::Finer([a, b]) => smallvec![a, b],
                };
                for o in others {
                    if self.cells[o].degree.abs_diff(cell.degree) > 1 {
                        return Err(format!("cells {c} and {o}: degree gap > 1"));
                    }
                }
            }
        }
        let rel = (area - self.domain.area()).abs() / self.domain.area();
        if rel > 1e-12 {
            return Err(format!("element areas sum to {area}, domain area {}", self.domain.area()));
        }
        Ok(())
    }

    /// Plain-text export: `nv ne`, vertex lines `x y`, element lines `v0 v1 v2 v3 p`.
    pub fn export_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.vertices.len(), self.active.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", v[0], v[1]);
        }
        for &c in &self.active {
            let cell = &self.cells[c];
            let v = cell.vertices;
            let _ = writeln!(s, "{} {} {} {} {}", v[0], v[1], v[2], v[3], cell.degree);
        }
        s
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.export_text().as_bytes())?;
        Ok(())
    }
}

pub(crate) fn bilinear_shape(xr: [f64; 2]) -> [f64; 4] {
    let (x, y) = (xr[0], xr[1]);
    [
        0.25 * (1.0 - x) * (1.0 - y),
        0.25 * (1.0 + x) * (1.0 - y),
        0.25 * (1.0 + x) * (1.0 + y),
        0.25 * (1.0 - x) * (1.0 + y),
    ]
}
