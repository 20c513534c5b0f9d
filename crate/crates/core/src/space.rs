//! Global numbering of the discrete spaces.
//!
//! The displacement space is built from master entities: regular vertices,
//! the interior Gauss-Lobatto nodes of master edges (with the minimum degree of
//! all cells touching the edge), and cell-interior nodes. Every local nodal value
//! of an element is an affine combination of free master values; hanging
//! vertices and higher-degree edge traces are constrained this way, and
//! Dirichlet entities are dropped.

use std::collections::HashMap;

use smallvec::SmallVec;

use crate::basis::displacement_basis;
use crate::mesh::{CellId, EdgeKind, Neighbor, QuadMesh, Side, VertexId};
use crate::quadrature::{gauss_lobatto, Lagrange1d};

/// Affine combination of free scalar DOFs.
pub type Combination = SmallVec<[(usize, f64); 4]>;

/// Local-to-global data of one element.
#[derive(Debug, Clone)]
pub struct ElementDofs {
    pub cell: CellId,
    pub degree: usize,
    /// Free scalar DOFs touching the element, ascending.
    pub dofs: Vec<usize>,
    /// Per local node: `(position in dofs, coefficient)`.
    pub nodes: Vec<SmallVec<[(u32, f64); 4]>>,
}

impl ElementDofs {
    /// Vector DOF indices `2 * dof + component`, ascending.
    pub fn vector_dofs(&self) -> Vec<usize> {
        self.dofs.iter().flat_map(|&d| [2 * d, 2 * d + 1]).collect()
    }

    /// Local nodal values of a global displacement vector.
    pub fn gather(&self, u: &[f64]) -> Vec<[f64; 2]> {
        self.nodes
            .iter()
            .map(|comb| {
                let mut v = [0.0; 2];
                for &(k, c) in comb {
                    let d = self.dofs[k as usize];
                    v[0] += c * u[2 * d];
                    v[1] += c * u[2 * d + 1];
                }
                v
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Position {
    Full,
    FirstHalf,
    SecondHalf,
}

#[derive(Debug, Clone)]
struct MasterEdge {
    start: VertexId,
    end: VertexId,
    degree: usize,
    dirichlet: bool,
    /// First free DOF of the `degree - 1` interior nodes.
    first_dof: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct DisplacementSpace {
    n_scalar: usize,
    elements: Vec<ElementDofs>,
    n_hanging: usize,
    n_dirichlet_vertices: usize,
}

struct Builder<'a> {
    mesh: &'a QuadMesh,
    masters: Vec<MasterEdge>,
    master_of: HashMap<(VertexId, VertexId), usize>,
    side_master: Vec<[(usize, Position); 4]>,
    hanging: HashMap<VertexId, usize>,
    vertex_dof: HashMap<VertexId, usize>,
    n_scalar: usize,
}

impl DisplacementSpace {
    pub fn new(mesh: &QuadMesh) -> Self {
        let mut b = Builder {
            mesh,
            masters: Vec::new(),
            master_of: HashMap::new(),
            side_master: Vec::with_capacity(mesh.num_elements()),
            hanging: HashMap::new(),
            vertex_dof: HashMap::new(),
            n_scalar: 0,
        };
        b.collect_masters();
        let interior_first = b.number();
        let elements = mesh
            .elements()
            .iter()
            .enumerate()
            .map(|(i, &c)| b.element_dofs(i, c, interior_first[i]))
            .collect();
        let layout = mesh.boundary_layout();
        let n_dirichlet_vertices = (0..mesh.vertices().len())
            .filter(|&v| {
                mesh.vertex_domain_sides(v)
                    .iter()
                    .any(|&s| layout.kind(s) == EdgeKind::Dirichlet)
            })
            .count();
        DisplacementSpace {
            n_scalar: b.n_scalar,
            elements,
            n_hanging: b.hanging.len(),
            n_dirichlet_vertices,
        }
    }

    /// Number of free vector DOFs.
    pub fn num_dofs(&self) -> usize {
        2 * self.n_scalar
    }

    pub fn num_scalar_dofs(&self) -> usize {
        self.n_scalar
    }

    pub fn num_hanging_vertices(&self) -> usize {
        self.n_hanging
    }

    pub fn num_dirichlet_vertices(&self) -> usize {
        self.n_dirichlet_vertices
    }

    /// Element data by active-element index.
    pub fn element(&self, i: usize) -> &ElementDofs {
        &self.elements[i]
    }

    pub fn elements(&self) -> &[ElementDofs] {
        &self.elements
    }

    /// Free-DOF vector interpolating a vector field at the free master nodes.
    pub fn interpolate(&self, mesh: &QuadMesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let mut u = vec![0.0; self.num_dofs()];
        let mut set = vec![false; self.n_scalar];
        for e in &self.elements {
            let nodes = displacement_basis(e.degree).node_points();
            for (comb, &xr) in e.nodes.iter().zip(&nodes) {
                // a node carries a free DOF exactly when its combination is a unit selector
                if let [(k, c)] = comb.as_slice() {
                    if *c == 1.0 {
                        let d = e.dofs[*k as usize];
                        if !set[d] {
                            let v = f(mesh.map_point(e.cell, xr));
                            u[2 * d] = v[0];
                            u[2 * d + 1] = v[1];
                            set[d] = true;
                        }
                    }
                }
            }
        }
        u
    }
}

impl Builder<'_> {
    fn master_key(&self, c: CellId, s: Side) -> (VertexId, VertexId) {
        let [a, b] = s.corners();
        let v = self.mesh.cell(c).vertices;
        (v[a], v[b])
    }

    fn collect_masters(&mut self) {
        let mesh = self.mesh;
        let layout = mesh.boundary_layout();
        for &c in mesh.elements() {
            let p = mesh.degree(c);
            let mut sides = [(0, Position::Full); 4];
            for s in Side::ALL {
                let (key, pos, dirichlet) = match mesh.neighbor(c, s) {
                    Neighbor::Boundary(ds) => (self.master_key(c, s), Position::Full, layout.kind(ds) == EdgeKind::Dirichlet),
                    Neighbor::Same(_) | Neighbor::Finer(_) => (self.master_key(c, s), Position::Full, false),
                    Neighbor::Coarser(n) => {
                        let key = self.master_key(n, s.opposite());
                        let own = self.master_key(c, s);
                        let pos = if own.0 == key.0 { Position::FirstHalf } else { Position::SecondHalf };
                        (key, pos, false)
                    }
                };
                let idx = *self.master_of.entry(key).or_insert_with(|| {
                    self.masters.push(MasterEdge {
                        start: key.0,
                        end: key.1,
                        degree: p,
                        dirichlet,
                        first_dof: None,
                    });
                    self.masters.len() - 1
                });
                let m = &mut self.masters[idx];
                m.degree = m.degree.min(p);
                if pos != Position::Full {
                    // the endpoint of the own side that is not a master endpoint hangs
                    let own = self.master_key(c, s);
                    let mid = if pos == Position::FirstHalf { own.1 } else { own.0 };
                    self.hanging.insert(mid, idx);
                }
                sides[s as usize] = (idx, pos);
            }
            self.side_master.push(sides);
        }
    }

    fn is_dirichlet_vertex(&self, v: VertexId) -> bool {
        let layout = self.mesh.boundary_layout();
        self.mesh
            .vertex_domain_sides(v)
            .iter()
            .any(|&s| layout.kind(s) == EdgeKind::Dirichlet)
    }

    /// Numbers free DOFs cell by cell; returns the first interior DOF per element.
    fn number(&mut self) -> Vec<usize> {
        let mesh = self.mesh;
        let mut interior_first = Vec::with_capacity(mesh.num_elements());
        for (i, &c) in mesh.elements().iter().enumerate() {
            for v in mesh.cell(c).vertices {
                if !self.hanging.contains_key(&v) && !self.is_dirichlet_vertex(v) && !self.vertex_dof.contains_key(&v) {
                    self.vertex_dof.insert(v, self.n_scalar);
                    self.n_scalar += 1;
                }
            }
            for s in Side::ALL {
                let m = &mut self.masters[self.side_master[i][s as usize].0];
                if !m.dirichlet && m.first_dof.is_none() {
                    m.first_dof = Some(self.n_scalar);
                    self.n_scalar += m.degree - 1;
                }
            }
            let p = mesh.degree(c);
            interior_first.push(self.n_scalar);
            self.n_scalar += (p - 1) * (p - 1);
        }
        interior_first
    }

    fn vertex_expr(&self, v: VertexId, out: &mut Combination, scale: f64) {
        if let Some(&d) = self.vertex_dof.get(&v) {
            out.push((d, scale));
        } else if let Some(&m) = self.hanging.get(&v) {
            self.edge_expr(m, 0.0, out, scale);
        }
    }

    /// Value of the master edge trace at parameter `t` in `[-1, 1]`.
    fn edge_expr(&self, m: usize, t: f64, out: &mut Combination, scale: f64) {
        let e = &self.masters[m];
        let nodes = gauss_lobatto(e.degree);
        let l = Lagrange1d::new(nodes).values(t);
        for (k, &c) in l.iter().enumerate() {
            let c = clean(c);
            if c == 0.0 {
                continue;
            }
            if k == 0 {
                self.vertex_expr(e.start, out, scale * c);
            } else if k == e.degree {
                self.vertex_expr(e.end, out, scale * c);
            } else if let Some(first) = e.first_dof {
                out.push((first + k - 1, scale * c));
            }
        }
    }

    fn element_dofs(&self, i: usize, c: CellId, interior_first: usize) -> ElementDofs {
        let mesh = self.mesh;
        let p = mesh.degree(c);
        let gl = gauss_lobatto(p);
        let verts = mesh.cell(c).vertices;
        let mut combos: Vec<Combination> = Vec::with_capacity((p + 1) * (p + 1));
        for j in 0..=p {
            for k in 0..=p {
                let mut comb = Combination::new();
                let on_x = k == 0 || k == p;
                let on_y = j == 0 || j == p;
                if on_x && on_y {
                    let corner = match (k == p, j == p) {
                        (false, false) => 0,
                        (true, false) => 1,
                        (true, true) => 2,
                        (false, true) => 3,
                    };
                    self.vertex_expr(verts[corner], &mut comb, 1.0);
                } else if on_x || on_y {
                    let (side, tau) = if j == 0 {
                        (Side::Bottom, gl[k])
                    } else if j == p {
                        (Side::Top, gl[k])
                    } else if k == 0 {
                        (Side::Left, gl[j])
                    } else {
                        (Side::Right, gl[j])
                    };
                    let (m, pos) = self.side_master[i][side as usize];
                    let t = match pos {
                        Position::Full => tau,
                        Position::FirstHalf => 0.5 * (tau - 1.0),
                        Position::SecondHalf => 0.5 * (tau + 1.0),
                    };
                    self.edge_expr(m, t, &mut comb, 1.0);
                } else {
                    comb.push((interior_first + (j - 1) * (p - 1) + (k - 1), 1.0));
                }
                combos.push(merge(comb));
            }
        }
        let mut dofs: Vec<usize> = combos.iter().flat_map(|c| c.iter().map(|&(d, _)| d)).collect();
        dofs.sort_unstable();
        dofs.dedup();
        let nodes = combos
            .iter()
            .map(|comb| {
                comb.iter()
                    .map(|&(d, w)| (dofs.binary_search(&d).expect("collected") as u32, w))
                    .collect()
            })
            .collect();
        ElementDofs {
            cell: c,
            degree: p,
            dofs,
            nodes,
        }
    }
}

/// Snaps interpolation weights that are zero or one up to roundoff.
fn clean(c: f64) -> f64 {
    if c.abs() < 1e-13 {
        0.0
    } else if (c - 1.0).abs() < 1e-13 {
        1.0
    } else {
        c
    }
}

fn merge(mut comb: Combination) -> Combination {
    comb.sort_by_key(|&(d, _)| d);
    let mut out = Combination::new();
    for (d, c) in comb {
        match out.last_mut() {
            Some((ld, lc)) if *ld == d => *lc += c,
            _ => out.push((d, c)),
        }
    }
    out.retain(|&mut (_, c)| clean(c) != 0.0);
    for (_, c) in out.iter_mut() {
        *c = clean(*c);
    }
    out
}

/// Discontinuous plastic-strain space: `p_T^2` coefficients per element,
/// numbered element by element in active order.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainSpace {
    offsets: Vec<usize>,
    degrees: Vec<usize>,
}

impl StrainSpace {
    pub fn new(mesh: &QuadMesh) -> Self {
        let mut offsets = Vec::with_capacity(mesh.num_elements() + 1);
        let mut degrees = Vec::with_capacity(mesh.num_elements());
        let mut n = 0;
        offsets.push(0);
        for &c in mesh.elements() {
            let p = mesh.degree(c);
            n += p * p;
            offsets.push(n);
            degrees.push(p);
        }
        Self { offsets, degrees }
    }

    /// Number of coefficients `N`.
    pub fn len(&self) -> usize {
        *self.offsets.last().expect("non-empty")
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coefficient range of the element with the given active index.
    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degrees[i]
    }

    pub fn num_elements(&self) -> usize {
        self.degrees.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::displacement_basis;
    use crate::mesh::{build_rectangle_mesh, BoundaryLayout, Rect};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mesh(n: usize, p: usize) -> QuadMesh {
        build_rectangle_mesh(Rect::new(-1.0, 1.0, -1.0, 1.0), n, n, p, BoundaryLayout::clamped_bottom()).unwrap()
    }

    fn eval(space: &DisplacementSpace, mesh: &QuadMesh, i: usize, u: &[f64], xr: [f64; 2]) -> [f64; 2] {
        let e = space.element(i);
        let vals = e.gather(u);
        let phi = displacement_basis(e.degree).values(xr);
        let _ = mesh;
        phi.iter().zip(&vals).fold([0.0, 0.0], |a, (f, v)| [a[0] + f * v[0], a[1] + f * v[1]])
    }

    /// Evaluates a random discrete function from both sides of every interior edge.
    fn assert_continuous(m: &QuadMesh) {
        let space = DisplacementSpace::new(m);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u: Vec<f64> = (0..space.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for e in m.edges() {
            let (a, b) = (m.vertices()[e.vertices[0]], m.vertices()[e.vertices[1]]);
            for k in 0..10 {
                let s = (k as f64 + 0.5) / 10.0;
                let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                let vals: Vec<[f64; 2]> = e
                    .elements
                    .iter()
                    .map(|&c| {
                        let i = m.active_index(c).unwrap();
                        eval(&space, m, i, &u, m.inverse_map(c, x))
                    })
                    .collect();
                if e.kind == EdgeKind::Dirichlet {
                    assert!(vals[0][0].abs() < 1e-12 && vals[0][1].abs() < 1e-12);
                }
                if vals.len() == 2 {
                    for comp in 0..2 {
                        assert!((vals[0][comp] - vals[1][comp]).abs() < 1e-12, "jump at {x:?}: {vals:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn uniform_q1_dof_count() {
        let m = mesh(2, 1);
        let s = DisplacementSpace::new(&m);
        // 9 vertices, 3 on the clamped bottom
        assert_eq!(s.num_scalar_dofs(), 6);
        assert_eq!(s.num_dofs(), 12);
    }

    #[test]
    fn uniform_q3_dof_count() {
        let m = mesh(3, 3);
        let s = DisplacementSpace::new(&m);
        // (3*3+1)^2 nodes minus the 10 bottom ones
        assert_eq!(s.num_scalar_dofs(), 100 - 10);
    }

    #[test]
    fn hanging_nodes_are_constrained() {
        let m = mesh(2, 2).refine(&[3]).unwrap();
        let s = DisplacementSpace::new(&m);
        assert_eq!(s.num_hanging_vertices(), 2);
        assert_continuous(&m);
    }

    #[test]
    fn continuity_with_mixed_degrees_and_hanging_nodes() {
        let mut m = mesh(3, 1);
        m = m.refine(&[4]).unwrap();
        let c = m.elements()[5];
        m = m.p_refine(&[c]).unwrap().p_refine(&[c]).unwrap();
        let first = m.elements()[0];
        m = m.refine(&[first]).unwrap();
        m.check_invariants().unwrap();
        assert_continuous(&m);
        let m2 = m.with_degrees(|_, p| p + 2);
        assert_continuous(&m2);
    }

    #[test]
    fn interpolation_reproduces_polynomials_of_minimal_degree() {
        let m = mesh(2, 2).refine(&[0]).unwrap().p_refine(&[1]).unwrap();
        let s = DisplacementSpace::new(&m);
        let f = |x: [f64; 2]| [(x[1] + 1.0) * x[0] * x[0], (x[1] + 1.0) * (x[1] - 0.5) * x[0]];
        let u = s.interpolate(&m, f);
        for (i, &c) in m.elements().iter().enumerate() {
            for xr in [[0.1, 0.2], [-0.9, 0.7]] {
                let v = eval(&s, &m, i, &u, xr);
                let exact = f(m.map_point(c, xr));
                assert!((v[0] - exact[0]).abs() < 1e-12 && (v[1] - exact[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn strain_space_counts() {
        let m = mesh(2, 3).p_refine(&[0]).unwrap();
        let q = StrainSpace::new(&m);
        assert_eq!(q.len(), 16 + 3 * 9);
        assert_eq!(q.range(1), 16..25);
    }
}
