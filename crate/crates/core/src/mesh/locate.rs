use super::{Mesh, Point};

/// Bucket grid over a mesh for point location and P1 interpolation.
#[derive(Debug, Clone)]
pub struct PointLocator<'m> {
    mesh: &'m Mesh,
    origin: Point,
    cell: f64,
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

/// Result of interpolating a nodal field at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub value: f64,
    /// The point lay outside every triangle and the nearest triangle was used.
    pub extrapolated: bool,
}

const INSIDE_TOL: f64 = 1e-10;

impl<'m> PointLocator<'m> {
    pub fn new(mesh: &'m Mesh) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in mesh.nodes() {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let area = ((hi[0] - lo[0]) * (hi[1] - lo[1])).max(f64::MIN_POSITIVE);
        // about two triangles per bucket
        let cell = (2.0 * area / mesh.triangle_count() as f64).sqrt().max(1e-12);
        let dims = [
            (((hi[0] - lo[0]) / cell).ceil() as usize).max(1),
            (((hi[1] - lo[1]) / cell).ceil() as usize).max(1),
        ];
        let mut buckets = vec![Vec::new(); dims[0] * dims[1]];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let (mut tlo, mut thi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for &v in tri {
                let p = mesh.nodes()[v];
                for k in 0..2 {
                    tlo[k] = tlo[k].min(p[k]);
                    thi[k] = thi[k].max(p[k]);
                }
            }
            let clamp = |x: f64, k: usize| {
                (((x - lo[k]) / cell).floor().max(0.0) as usize).min(dims[k] - 1)
            };
            for by in clamp(tlo[1], 1)..=clamp(thi[1], 1) {
                for bx in clamp(tlo[0], 0)..=clamp(thi[0], 0) {
                    buckets[by * dims[0] + bx].push(t);
                }
            }
        }
        PointLocator {
            mesh,
            origin: lo,
            cell,
            dims,
            buckets,
        }
    }

    fn bucket_of(&self, p: Point) -> [isize; 2] {
        [
            ((p[0] - self.origin[0]) / self.cell).floor() as isize,
            ((p[1] - self.origin[1]) / self.cell).floor() as isize,
        ]
    }

    fn barycentric(&self, t: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.mesh.triangles()[t];
        let n = self.mesh.nodes();
        let (pa, pb, pc) = (n[a], n[b], n[c]);
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        let l1 = ((p[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (p[1] - pa[1])) / det;
        let l2 = ((pb[0] - pa[0]) * (p[1] - pa[1]) - (p[0] - pa[0]) * (pb[1] - pa[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Triangle containing `p` with its barycentric coordinates.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        self.search_bucket(self.bucket_index(p), p)
    }

    fn bucket_index(&self, p: Point) -> usize {
        let [bx, by] = self.bucket_of(p);
        let cx = bx.clamp(0, self.dims[0] as isize - 1) as usize;
        let cy = by.clamp(0, self.dims[1] as isize - 1) as usize;
        cy * self.dims[0] + cx
    }

    fn search_bucket(&self, b: usize, p: Point) -> Option<(usize, [f64; 3])> {
        self.buckets[b].iter().find_map(|&t| {
            let l = self.barycentric(t, p);
            (l.iter().all(|&x| x >= -INSIDE_TOL)).then_some((t, l))
        })
    }

    /// Among the triangles containing `p`, the one that best contains a
    /// point slightly displaced from `p` towards `toward`.
    fn locate_towards(&self, p: Point, toward: Point) -> Option<(usize, [f64; 3])> {
        let q = [p[0] + 1e-6 * (toward[0] - p[0]), p[1] + 1e-6 * (toward[1] - p[1])];
        let mut best: Option<(f64, usize, [f64; 3])> = None;
        for &t in &self.buckets[self.bucket_index(p)] {
            let l = self.barycentric(t, p);
            if l.iter().all(|&x| x >= -INSIDE_TOL) {
                let lq = self.barycentric(t, q);
                let score = lq.iter().copied().fold(f64::INFINITY, f64::min);
                if best.is_none_or(|b| score > b.0) {
                    best = Some((score, t, l));
                }
            }
        }
        best.map(|(_, t, l)| (t, l))
    }

    /// Nearest triangle by distance from `p` to the triangle, searching
    /// outward ring by ring.
    fn nearest(&self, p: Point) -> (usize, [f64; 3]) {
        let [bx, by] = self.bucket_of(p);
        let mut best: Option<(f64, usize, [f64; 3])> = None;
        let max_ring = self.dims[0].max(self.dims[1]) as isize + 1;
        for ring in 0..=max_ring {
            for dy in -ring..=ring {
                for dx in -ring..=ring {
                    if dx.abs() != ring && dy.abs() != ring {
                        continue;
                    }
                    let (x, y) = (bx + dx, by + dy);
                    if x < 0 || y < 0 || x as usize >= self.dims[0] || y as usize >= self.dims[1]
                    {
                        continue;
                    }
                    for &t in &self.buckets[y as usize * self.dims[0] + x as usize] {
                        let (d, l) = self.closest_on_triangle(t, p);
                        if best.is_none_or(|b| d < b.0) {
                            best = Some((d, t, l));
                        }
                    }
                }
            }
            if let Some((d, t, l)) = best {
                // anything in a further ring is at least `ring * cell` away
                if d <= ring as f64 * self.cell {
                    return (t, l);
                }
            }
        }
        let (_, t, l) = best.expect("mesh has at least one triangle");
        (t, l)
    }

    fn closest_on_triangle(&self, t: usize, p: Point) -> (f64, [f64; 3]) {
        let tri = self.mesh.triangles()[t];
        let n = self.mesh.nodes();
        let l = self.barycentric(t, p);
        if l.iter().all(|&x| x >= 0.0) {
            return (0.0, l);
        }
        let mut best = (f64::INFINITY, l);
        for k in 0..3 {
            let (a, b) = (n[tri[k]], n[tri[(k + 1) % 3]]);
            let ab = [b[0] - a[0], b[1] - a[1]];
            let s = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1])
                / (ab[0] * ab[0] + ab[1] * ab[1]))
                .clamp(0.0, 1.0);
            let q = [a[0] + s * ab[0], a[1] + s * ab[1]];
            let d = (p[0] - q[0]).hypot(p[1] - q[1]);
            if d < best.0 {
                let mut bl = [0.0; 3];
                bl[k] = 1.0 - s;
                bl[(k + 1) % 3] = s;
                best = (d, bl);
            }
        }
        best
    }

    /// P1 interpolation of a nodal field at `p`.
    pub fn interpolate(&self, field: &[f64], p: Point) -> Sample {
        self.sample(field, p, self.locate(p))
    }

    /// P1 interpolation at `p`; where several triangles touch `p` (on a
    /// slit both sides do) the one lying towards `toward` is used.
    pub fn interpolate_towards(&self, field: &[f64], p: Point, toward: Point) -> Sample {
        self.sample(field, p, self.locate_towards(p, toward))
    }

    fn sample(&self, field: &[f64], p: Point, found: Option<(usize, [f64; 3])>) -> Sample {
        let (t, l, extrapolated) = match found {
            Some((t, l)) => (t, l, false),
            None => {
                let (t, l) = self.nearest(p);
                (t, l, true)
            }
        };
        let tri = self.mesh.triangles()[t];
        Sample {
            value: l[0] * field[tri[0]] + l[1] * field[tri[1]] + l[2] * field[tri[2]],
            extrapolated,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, MeshControls, RoomGeometry};

    #[test]
    fn linear_field_interpolates_exactly() {
        let g = RoomGeometry::rectangle(2.0, 1.0);
        let m = generate_mesh(&g, &MeshControls::uniform(0.2)).unwrap();
        let f: Vec<f64> = m.nodes().iter().map(|p| 2.0 * p[0] - p[1] + 1.0).collect();
        let loc = PointLocator::new(&m);
        for &p in &[[0.33, 0.71], [1.999, 0.001], [2.0, 1.0], [0.0, 0.5]] {
            let s = loc.interpolate(&f, p);
            assert!(!s.extrapolated, "{p:?}");
            assert!((s.value - (2.0 * p[0] - p[1] + 1.0)).abs() < 1e-12);
        }
        let out = loc.interpolate_towards(&f, [2.5, 0.5], [1.0, 0.5]);
        assert!(out.extrapolated);
        assert!((out.value - (2.0 * 2.0 - 0.5 + 1.0)).abs() < 1e-12);
    }
}
