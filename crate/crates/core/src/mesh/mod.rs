//! Conforming triangulations and their vertex-centered dual geometry.
//!
//! A [`Mesh`] is immutable once constructed: [`Mesh::new`] validates the
//! orientation and conformity invariants and derives the edge and
//! adjacency tables used by the eikonal solver and the finite-volume
//! scheme.

mod dual;
mod generate;
mod io;
mod locate;

use std::collections::HashMap;

use crate::error::{Error, Result};

pub use dual::{rect_moments, rect_overlap, BoundaryFacet, DualFace, DualGeometry};
pub use generate::{generate_mesh, Exit, MeshControls, Obstacle, RoomGeometry, Side};
pub use io::{load_mesh, save_mesh};
pub use locate::PointLocator;

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Wall,
    Outflow,
}

impl BoundaryTag {
    pub fn code(self) -> &'static str {
        match self {
            BoundaryTag::Wall => "W",
            BoundaryTag::Outflow => "O",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// An undirected mesh edge with its one or two incident triangles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshEdge {
    pub nodes: [usize; 2],
    pub triangles: [usize; 2],
    pub is_boundary: bool,
}

/// Compressed adjacency lists: `items[offsets[i]..offsets[i + 1]]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Adjacency {
    offsets: Vec<usize>,
    items: Vec<usize>,
}

impl Adjacency {
    fn from_lists(lists: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut items = Vec::new();
        offsets.push(0);
        for l in lists {
            items.extend(l);
            offsets.push(items.len());
        }
        Adjacency { offsets, items }
    }

    #[inline]
    pub fn of(&self, i: usize) -> &[usize] {
        &self.items[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    edges: Vec<MeshEdge>,
    node_triangles: Adjacency,
    node_neighbors: Adjacency,
}

impl Mesh {
    /// Validates and assembles a mesh. Triangles may be given in either
    /// orientation only if all of them agree; clockwise input is rejected.
    pub fn new(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Result<Self> {
        let n = nodes.len();
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        if nodes.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidMesh("non-finite node coordinate".into()));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} references a node outside 0..{n}"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
            let a = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if !(a > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} has non-positive signed area {a:e}"
                )));
            }
        }

        // Directed half-edges: an interior edge appears once in each direction.
        let mut edge_map: HashMap<(usize, usize), (usize, usize, u8)> = HashMap::new();
        let mut edge_order: Vec<(usize, usize)> = Vec::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                match edge_map.get_mut(&key) {
                    None => {
                        edge_map.insert(key, (t, usize::MAX, if a < b { 1 } else { 2 }));
                        edge_order.push(key);
                    }
                    Some(entry) => {
                        if entry.1 != usize::MAX {
                            return Err(Error::InvalidMesh(format!(
                                "edge ({}, {}) shared by more than two triangles",
                                key.0, key.1
                            )));
                        }
                        let dir = if a < b { 1 } else { 2 };
                        if dir == entry.2 {
                            return Err(Error::InvalidMesh(format!(
                                "edge ({}, {}) has inconsistent orientation",
                                key.0, key.1
                            )));
                        }
                        entry.1 = t;
                    }
                }
            }
        }

        let mut tagged: HashMap<(usize, usize), BoundaryTag> = HashMap::new();
        for be in &boundary_edges {
            let [a, b] = be.nodes;
            if a >= n || b >= n {
                return Err(Error::InvalidMesh(format!(
                    "boundary edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            let key = (a.min(b), a.max(b));
            match edge_map.get(&key) {
                Some(&(_, second, _)) if second == usize::MAX => {}
                Some(_) => {
                    return Err(Error::InvalidMesh(format!(
                        "boundary edge ({a}, {b}) is interior"
                    )))
                }
                None => {
                    return Err(Error::InvalidMesh(format!(
                        "boundary edge ({a}, {b}) is not a mesh edge"
                    )))
                }
            }
            if tagged.insert(key, be.tag).is_some() {
                return Err(Error::InvalidMesh(format!(
                    "boundary edge ({a}, {b}) tagged twice"
                )));
            }
        }

        let mut edges = Vec::with_capacity(edge_order.len());
        for key in edge_order {
            let (t0, t1, _) = edge_map[&key];
            let is_boundary = t1 == usize::MAX;
            if is_boundary && !tagged.contains_key(&key) {
                return Err(Error::InvalidMesh(format!(
                    "boundary edge ({}, {}) carries no tag",
                    key.0, key.1
                )));
            }
            edges.push(MeshEdge {
                nodes: [key.0, key.1],
                triangles: [t0, if is_boundary { t0 } else { t1 }],
                is_boundary,
            });
        }

        let mut tri_lists = vec![Vec::new(); n];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                tri_lists[v].push(t);
            }
        }
        if let Some(i) = tri_lists.iter().position(|l| l.is_empty()) {
            return Err(Error::InvalidMesh(format!("node {i} belongs to no triangle")));
        }
        let mut nbr_lists = vec![Vec::new(); n];
        for e in &edges {
            nbr_lists[e.nodes[0]].push(e.nodes[1]);
            nbr_lists[e.nodes[1]].push(e.nodes[0]);
        }

        Ok(Mesh {
            nodes,
            triangles,
            boundary_edges,
            edges,
            node_triangles: Adjacency::from_lists(tri_lists),
            node_neighbors: Adjacency::from_lists(nbr_lists),
        })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn edges(&self) -> &[MeshEdge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn node_triangles(&self) -> &Adjacency {
        &self.node_triangles
    }

    pub fn node_neighbors(&self) -> &Adjacency {
        &self.node_neighbors
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    /// Nodes touching at least one boundary edge with the given tag.
    pub fn tagged_nodes(&self, tag: BoundaryTag) -> Vec<bool> {
        let mut mark = vec![false; self.nodes.len()];
        for be in self.boundary_edges.iter().filter(|b| b.tag == tag) {
            mark[be.nodes[0]] = true;
            mark[be.nodes[1]] = true;
        }
        mark
    }

    /// Edge lengths: (min, max).
    pub fn edge_length_range(&self) -> (f64, f64) {
        self.edges.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), e| {
            let l = dist(self.nodes[e.nodes[0]], self.nodes[e.nodes[1]]);
            (lo.min(l), hi.max(l))
        })
    }

    /// Gradients of the three P1 basis functions on triangle `t`.
    pub fn basis_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        p1_gradients(self.nodes[a], self.nodes[b], self.nodes[c])
    }
}

#[inline]
pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Constant gradients of the barycentric basis functions of triangle abc.
#[inline]
pub fn p1_gradients(a: Point, b: Point, c: Point) -> [[f64; 2]; 3] {
    let two_area = 2.0 * signed_area(a, b, c);
    let g = |p: Point, q: Point| [(p[1] - q[1]) / two_area, (q[0] - p[0]) / two_area];
    [g(b, c), g(c, a), g(a, b)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Mesh {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let tris = vec![[0, 1, 2], [0, 2, 3]];
        let be = [[0, 1], [1, 2], [2, 3], [3, 0]]
            .into_iter()
            .map(|nodes| BoundaryEdge {
                nodes,
                tag: BoundaryTag::Wall,
            })
            .collect();
        Mesh::new(nodes, tris, be).unwrap()
    }

    #[test]
    fn square_topology() {
        let m = unit_square();
        assert_eq!(m.edges().len(), 5);
        assert_eq!(m.edges().iter().filter(|e| e.is_boundary).count(), 4);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        assert_eq!(m.node_triangles().of(0), &[0, 1]);
        assert_eq!(m.node_neighbors().of(1).len(), 2);
    }

    #[test]
    fn rejects_clockwise_triangle() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let err = Mesh::new(nodes, vec![[0, 2, 1]], vec![]).unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)));
    }

    #[test]
    fn rejects_untagged_boundary() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let be = vec![BoundaryEdge {
            nodes: [0, 1],
            tag: BoundaryTag::Wall,
        }];
        assert!(Mesh::new(nodes, vec![[0, 1, 2]], be).is_err());
    }

    #[test]
    fn rejects_tagged_interior_edge() {
        let m = unit_square();
        let mut be = m.boundary_edges().to_vec();
        be.push(BoundaryEdge {
            nodes: [0, 2],
            tag: BoundaryTag::Outflow,
        });
        assert!(Mesh::new(m.nodes().to_vec(), m.triangles().to_vec(), be).is_err());
    }

    #[test]
    fn basis_gradients_reproduce_linear_field() {
        let (a, b, c) = ([0.3, -0.2], [1.7, 0.4], [0.1, 2.2]);
        let g = p1_gradients(a, b, c);
        let f = |p: Point| 3.0 * p[0] - 2.0 * p[1] + 0.5;
        let grad = [
            f(a) * g[0][0] + f(b) * g[1][0] + f(c) * g[2][0],
            f(a) * g[0][1] + f(b) * g[1][1] + f(c) * g[2][1],
        ];
        assert!((grad[0] - 3.0).abs() < 1e-13 && (grad[1] + 2.0).abs() < 1e-13);
    }
}
