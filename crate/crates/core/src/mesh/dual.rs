use super::{dist, Adjacency, BoundaryTag, Mesh, Point};

/// Dual face between the cells of the two end nodes of a mesh edge.
///
/// `normal` points from `nodes[0]` towards `nodes[1]`; `length` is the norm
/// of the integrated normal over the centroid–midpoint segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualFace {
    pub nodes: [usize; 2],
    pub length: f64,
    pub normal: [f64; 2],
}

/// Half of a boundary edge, attributed to one of its end nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFacet {
    pub node: usize,
    pub boundary_edge: usize,
    pub length: f64,
    /// Outward unit normal.
    pub normal: [f64; 2],
    pub tag: BoundaryTag,
}

/// Median-dual control volumes: every triangle is split among its vertices
/// by joining its centroid to the edge midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct DualGeometry {
    pub cell_area: Vec<f64>,
    pub faces: Vec<DualFace>,
    pub boundary_facets: Vec<BoundaryFacet>,
    /// Face indices per cell; the cell is `faces[f].nodes[0]` or `nodes[1]`.
    pub cell_faces: Adjacency,
    /// Boundary facet indices per cell.
    pub cell_facets: Adjacency,
    /// Sum of dual face and boundary facet lengths per cell.
    pub cell_perimeter: Vec<f64>,
}

impl DualGeometry {
    pub fn build(mesh: &Mesh) -> Self {
        let n = mesh.node_count();
        let nodes = mesh.nodes();

        let mut cell_area = vec![0.0; n];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let third = mesh.triangle_area(t) / 3.0;
            for &v in tri {
                cell_area[v] += third;
            }
        }

        let mut faces = Vec::with_capacity(mesh.edges().len());
        for e in mesh.edges() {
            let [i, j] = e.nodes;
            let (pi, pj) = (nodes[i], nodes[j]);
            let mid = [0.5 * (pi[0] + pj[0]), 0.5 * (pi[1] + pj[1])];
            let dir = [pj[0] - pi[0], pj[1] - pi[1]];
            let mut nv = [0.0, 0.0];
            let tris: &[usize] = if e.is_boundary {
                &e.triangles[..1]
            } else {
                &e.triangles[..]
            };
            for &t in tris {
                let c = mesh.centroid(t);
                let s = [c[0] - mid[0], c[1] - mid[1]];
                let mut r = [s[1], -s[0]];
                if r[0] * dir[0] + r[1] * dir[1] < 0.0 {
                    r = [-r[0], -r[1]];
                }
                nv[0] += r[0];
                nv[1] += r[1];
            }
            let length = nv[0].hypot(nv[1]);
            faces.push(DualFace {
                nodes: [i, j],
                length,
                normal: [nv[0] / length, nv[1] / length],
            });
        }

        let edge_owner = boundary_edge_owners(mesh);
        let mut boundary_facets = Vec::with_capacity(2 * mesh.boundary_edges().len());
        for (b, be) in mesh.boundary_edges().iter().enumerate() {
            let [a, c] = be.nodes;
            let (pa, pc) = (nodes[a], nodes[c]);
            let len = dist(pa, pc);
            let mut nrm = [(pc[1] - pa[1]) / len, -(pc[0] - pa[0]) / len];
            // orient away from the owning triangle's opposite vertex
            let opp = nodes[edge_owner[b]];
            if (opp[0] - pa[0]) * nrm[0] + (opp[1] - pa[1]) * nrm[1] > 0.0 {
                nrm = [-nrm[0], -nrm[1]];
            }
            for node in [a, c] {
                boundary_facets.push(BoundaryFacet {
                    node,
                    boundary_edge: b,
                    length: 0.5 * len,
                    normal: nrm,
                    tag: be.tag,
                });
            }
        }

        let mut face_lists = vec![Vec::new(); n];
        for (f, face) in faces.iter().enumerate() {
            face_lists[face.nodes[0]].push(f);
            face_lists[face.nodes[1]].push(f);
        }
        let mut facet_lists = vec![Vec::new(); n];
        for (k, facet) in boundary_facets.iter().enumerate() {
            facet_lists[facet.node].push(k);
        }
        let mut cell_perimeter = vec![0.0; n];
        for face in &faces {
            cell_perimeter[face.nodes[0]] += face.length;
            cell_perimeter[face.nodes[1]] += face.length;
        }
        for facet in &boundary_facets {
            cell_perimeter[facet.node] += facet.length;
        }

        DualGeometry {
            cell_area,
            faces,
            boundary_facets,
            cell_faces: Adjacency::from_lists(face_lists),
            cell_facets: Adjacency::from_lists(facet_lists),
            cell_perimeter,
        }
    }

    pub fn cell_count(&self) -> usize {
        self.cell_area.len()
    }

    pub fn total_area(&self) -> f64 {
        self.cell_area.iter().sum()
    }

    /// Σ_j |e_ij| n_ij + Σ boundary facet |b| n_b for cell `i`; zero for a
    /// closed dual cell.
    pub fn closure_residual(&self, i: usize) -> [f64; 2] {
        let mut r = [0.0, 0.0];
        for &f in self.cell_faces.of(i) {
            let face = &self.faces[f];
            let sign = if face.nodes[0] == i { 1.0 } else { -1.0 };
            r[0] += sign * face.length * face.normal[0];
            r[1] += sign * face.length * face.normal[1];
        }
        for &k in self.cell_facets.of(i) {
            let b = &self.boundary_facets[k];
            r[0] += b.length * b.normal[0];
            r[1] += b.length * b.normal[1];
        }
        r
    }

    /// Length scale |C_i| / perimeter_i used by the time-step control.
    pub fn cfl_length(&self, i: usize) -> f64 {
        self.cell_area[i] / self.cell_perimeter[i]
    }
}

/// Area of each dual cell lying inside the axis-aligned box `[min, max]`.
pub fn rect_overlap(mesh: &Mesh, min: Point, max: Point) -> Vec<f64> {
    rect_moments(mesh, min, max).into_iter().map(|m| m[0]).collect()
}

/// Per dual cell, `[area, int x, int y]` of its intersection with the box
/// `[min, max]`.
pub fn rect_moments(mesh: &Mesh, min: Point, max: Point) -> Vec<[f64; 3]> {
    let nodes = mesh.nodes();
    let mut out = vec![[0.0; 3]; mesh.node_count()];
    let mid = |a: Point, b: Point| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let c = mesh.centroid(t);
        for k in 0..3 {
            let v = nodes[tri[k]];
            let next = nodes[tri[(k + 1) % 3]];
            let prev = nodes[tri[(k + 2) % 3]];
            let quad = vec![v, mid(v, next), c, mid(prev, v)];
            let m = polygon_moments(&clip_to_box(quad, min, max));
            let o = &mut out[tri[k]];
            for j in 0..3 {
                o[j] += m[j];
            }
        }
    }
    out
}

/// `[area, int x, int y]` of a simple polygon of either orientation.
fn polygon_moments(poly: &[Point]) -> [f64; 3] {
    let (mut a, mut mx, mut my) = (0.0, 0.0, 0.0);
    for k in 0..poly.len() {
        let (p, q) = (poly[k], poly[(k + 1) % poly.len()]);
        let cross = p[0] * q[1] - q[0] * p[1];
        a += cross;
        mx += (p[0] + q[0]) * cross;
        my += (p[1] + q[1]) * cross;
    }
    let s = if a < 0.0 { -1.0 } else { 1.0 };
    [0.5 * s * a, s * mx / 6.0, s * my / 6.0]
}

/// Sutherland–Hodgman clipping of a polygon against a box.
fn clip_to_box(mut poly: Vec<Point>, min: Point, max: Point) -> Vec<Point> {
    // (axis, bound, keep points with coordinate >= bound when true)
    let planes = [(0, min[0], true), (0, max[0], false), (1, min[1], true), (1, max[1], false)];
    for (axis, bound, keep_above) in planes {
        if poly.is_empty() {
            break;
        }
        let inside = |p: &Point| if keep_above { p[axis] >= bound } else { p[axis] <= bound };
        let mut next = Vec::with_capacity(poly.len() + 2);
        for k in 0..poly.len() {
            let (a, b) = (poly[k], poly[(k + 1) % poly.len()]);
            let (ia, ib) = (inside(&a), inside(&b));
            if ia {
                next.push(a);
            }
            if ia != ib {
                let s = (bound - a[axis]) / (b[axis] - a[axis]);
                let mut q = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                q[axis] = bound;
                next.push(q);
            }
        }
        poly = next;
    }
    poly
}

fn boundary_edge_owners(mesh: &Mesh) -> Vec<usize> {
    use std::collections::HashMap;
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
    for e in mesh.edges().iter().filter(|e| e.is_boundary) {
        let tri = mesh.triangles()[e.triangles[0]];
        let opp = tri
            .iter()
            .copied()
            .find(|v| *v != e.nodes[0] && *v != e.nodes[1])
            .expect("triangle has a vertex off the edge");
        lookup.insert((e.nodes[0], e.nodes[1]), opp);
    }
    mesh.boundary_edges()
        .iter()
        .map(|be| {
            let [a, b] = be.nodes;
            lookup[&(a.min(b), a.max(b))]
        })
        .collect()
}

/// Shoelace polygon area, an independent check of the median-dual split.
#[cfg(test)]
fn polygon_area(poly: &[Point]) -> f64 {
    let mut twice = 0.0;
    for k in 0..poly.len() {
        let (p, q) = (poly[k], poly[(k + 1) % poly.len()]);
        twice += (p[0] - q[0]) * (p[1] + q[1]);
    }
    0.5 * twice
}
