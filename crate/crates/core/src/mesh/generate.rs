//! Structured mesh generation for rectangular rooms.
//!
//! The room `[0, W] x [0, H]` and, for every side carrying an exit, an
//! exterior strip of depth `exterior_depth` are covered by a graded tensor
//! grid split into right triangles. Grid lines pass through the room walls,
//! the exit end points and the edges of rectangular obstacles. Circular
//! obstacles are resolved by snapping nearby nodes onto the circle before
//! the triangles whose centroid falls inside an obstacle are removed. The
//! wall separating the room from an exterior strip is a slit: nodes on it
//! outside the exit openings are duplicated so the two sides do not touch.

use std::collections::HashMap;

use super::{signed_area, BoundaryEdge, BoundaryTag, Mesh, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Bottom => "bottom",
            Side::Top => "top",
        }
    }

    pub fn parse(s: &str) -> Option<Side> {
        Side::ALL.into_iter().find(|side| side.name() == s)
    }
}

/// Door on one of the room walls. `center` is measured along the wall
/// (y for left/right walls, x for bottom/top walls).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exit {
    pub side: Side,
    pub center: f64,
    pub width: f64,
}

impl Exit {
    pub fn span(&self) -> (f64, f64) {
        (self.center - 0.5 * self.width, self.center + 0.5 * self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Obstacle {
    Circle { center: Point, radius: f64 },
    Rect { min: Point, max: Point },
}

impl Obstacle {
    /// Strict interior test.
    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Obstacle::Circle { center, radius } => {
                (p[0] - center[0]).hypot(p[1] - center[1]) < radius
            }
            Obstacle::Rect { min, max } => {
                p[0] > min[0] && p[0] < max[0] && p[1] > min[1] && p[1] < max[1]
            }
        }
    }

    fn bbox(&self) -> (Point, Point) {
        match *self {
            Obstacle::Circle { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            Obstacle::Rect { min, max } => (min, max),
        }
    }

    /// Distance from a point to the obstacle (0 inside).
    fn distance(&self, p: Point) -> f64 {
        match *self {
            Obstacle::Circle { center, radius } => {
                ((p[0] - center[0]).hypot(p[1] - center[1]) - radius).max(0.0)
            }
            Obstacle::Rect { min, max } => {
                let dx = (min[0] - p[0]).max(p[0] - max[0]).max(0.0);
                let dy = (min[1] - p[1]).max(p[1] - max[1]).max(0.0);
                dx.hypot(dy)
            }
        }
    }
}

/// A rectangular evacuation room with doors, interior obstacles and the
/// exterior strips the doors open into.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomGeometry {
    pub width: f64,
    pub height: f64,
    pub exits: Vec<Exit>,
    pub obstacles: Vec<Obstacle>,
    /// Depth of the exterior strip behind each wall carrying an exit. Zero
    /// makes the exit segments themselves the outflow boundary.
    pub exterior_depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshControls {
    pub target_h: f64,
    /// Spacing is divided by this factor near exits and obstacles.
    pub refine_factor: f64,
    /// Half-width of the refined band around exits and obstacles (m).
    pub refine_margin: f64,
}

impl MeshControls {
    pub fn uniform(target_h: f64) -> Self {
        MeshControls {
            target_h,
            refine_factor: 1.0,
            refine_margin: 0.0,
        }
    }

    pub fn graded(target_h: f64) -> Self {
        MeshControls {
            target_h,
            refine_factor: 2.0,
            refine_margin: 1.0,
        }
    }
}

const EPS: f64 = 1e-9;
/// Nodes closer than this fraction of the local spacing to a circle are
/// moved onto it.
const SNAP_FRACTION: f64 = 0.35;
/// Spacing growth rate away from refined zones.
const GRADING: f64 = 0.3;

impl RoomGeometry {
    pub fn rectangle(width: f64, height: f64) -> Self {
        RoomGeometry {
            width,
            height,
            exits: Vec::new(),
            obstacles: Vec::new(),
            exterior_depth: 0.0,
        }
    }

    fn side_length(&self, side: Side) -> f64 {
        match side {
            Side::Left | Side::Right => self.height,
            Side::Bottom | Side::Top => self.width,
        }
    }

    fn has_exterior(&self, side: Side) -> bool {
        self.exterior_depth > 0.0 && self.exits.iter().any(|e| e.side == side)
    }

    /// Exterior strips as (side, min, max).
    pub fn exterior_rects(&self) -> Vec<(Side, Point, Point)> {
        let (w, h, d) = (self.width, self.height, self.exterior_depth);
        Side::ALL
            .into_iter()
            .filter(|&s| self.has_exterior(s))
            .map(|s| match s {
                Side::Left => (s, [-d, 0.0], [0.0, h]),
                Side::Right => (s, [w, 0.0], [w + d, h]),
                Side::Bottom => (s, [0.0, -d], [w, 0.0]),
                Side::Top => (s, [0.0, h], [w, h + d]),
            })
            .collect()
    }

    /// Closed room rectangle test (the evacuation region).
    pub fn in_room(&self, p: Point) -> bool {
        p[0] >= -EPS && p[0] <= self.width + EPS && p[1] >= -EPS && p[1] <= self.height + EPS
    }

    fn in_outline(&self, p: Point) -> bool {
        self.in_room(p)
            || self.exterior_rects().iter().any(|(_, lo, hi)| {
                p[0] >= lo[0] - EPS && p[0] <= hi[0] + EPS && p[1] >= lo[1] - EPS && p[1] <= hi[1] + EPS
            })
    }

    pub fn room_area(&self) -> f64 {
        let holes: f64 = self
            .obstacles
            .iter()
            .map(|o| match *o {
                Obstacle::Circle { radius, .. } => std::f64::consts::PI * radius * radius,
                Obstacle::Rect { min, max } => (max[0] - min[0]) * (max[1] - min[1]),
            })
            .sum();
        self.width * self.height - holes
    }

    pub fn validate(&self) -> Result<()> {
        let geo = |m: String| Err(Error::Geometry(m));
        if !(self.width > 0.0 && self.height > 0.0) {
            return geo(format!("room dimensions {}x{} must be positive", self.width, self.height));
        }
        if !(self.exterior_depth >= 0.0) || !self.exterior_depth.is_finite() {
            return geo(format!("exterior depth {} must be >= 0", self.exterior_depth));
        }
        for (k, e) in self.exits.iter().enumerate() {
            let len = self.side_length(e.side);
            let (lo, hi) = e.span();
            if !(e.width > 0.0) {
                return geo(format!("exit {k} has non-positive width"));
            }
            if e.width > len + EPS {
                return geo(format!(
                    "exit {k} ({} m) is wider than the {} wall ({len} m)",
                    e.width,
                    e.side.name()
                ));
            }
            if lo < -EPS || hi > len + EPS {
                return geo(format!("exit {k} extends past the end of the {} wall", e.side.name()));
            }
            for (j, f) in self.exits.iter().enumerate().skip(k + 1) {
                let (flo, fhi) = f.span();
                if f.side == e.side && flo < hi - EPS && lo < fhi - EPS {
                    return geo(format!("exits {k} and {j} overlap"));
                }
            }
        }
        for (k, o) in self.obstacles.iter().enumerate() {
            let (lo, hi) = o.bbox();
            if let Obstacle::Circle { radius, .. } = o {
                if !(*radius > 0.0) {
                    return geo(format!("obstacle {k} has non-positive radius"));
                }
            }
            if let Obstacle::Rect { min, max } = o {
                if !(min[0] < max[0] && min[1] < max[1]) {
                    return geo(format!("obstacle {k} is an empty rectangle"));
                }
            }
            if !(lo[0] > 0.0 && lo[1] > 0.0 && hi[0] < self.width && hi[1] < self.height) {
                return geo(format!("obstacle {k} is not strictly inside the room"));
            }
            for (j, other) in self.obstacles.iter().enumerate().skip(k + 1) {
                if obstacles_overlap(o, other) {
                    return geo(format!("obstacles {k} and {j} overlap"));
                }
            }
        }
        Ok(())
    }
}

fn obstacles_overlap(a: &Obstacle, b: &Obstacle) -> bool {
    match (*a, *b) {
        (Obstacle::Circle { center: c1, radius: r1 }, Obstacle::Circle { center: c2, radius: r2 }) => {
            (c1[0] - c2[0]).hypot(c1[1] - c2[1]) <= r1 + r2
        }
        (Obstacle::Circle { center, radius }, rect @ Obstacle::Rect { .. })
        | (rect @ Obstacle::Rect { .. }, Obstacle::Circle { center, radius }) => {
            rect.distance(center) <= radius
        }
        (Obstacle::Rect { min: a0, max: a1 }, Obstacle::Rect { min: b0, max: b1 }) => {
            a0[0] <= b1[0] && b0[0] <= a1[0] && a0[1] <= b1[1] && b0[1] <= a1[1]
        }
    }
}

/// Builds a conforming mesh of the room and its exterior strips.
pub fn generate_mesh(geom: &RoomGeometry, controls: &MeshControls) -> Result<Mesh> {
    geom.validate()?;
    if !(controls.target_h > 0.0) || !controls.target_h.is_finite() {
        return Err(Error::Geometry(format!(
            "target_h must be positive, got {}",
            controls.target_h
        )));
    }
    if !(controls.refine_factor >= 1.0) {
        return Err(Error::Geometry("refine_factor must be >= 1".into()));
    }

    let (w, h, d) = (geom.width, geom.height, geom.exterior_depth);
    let ext = geom.exterior_rects();
    let has = |s: Side| ext.iter().any(|(side, _, _)| *side == s);

    let mut xb = vec![0.0, w];
    let mut yb = vec![0.0, h];
    if has(Side::Left) {
        xb.push(-d);
    }
    if has(Side::Right) {
        xb.push(w + d);
    }
    if has(Side::Bottom) {
        yb.push(-d);
    }
    if has(Side::Top) {
        yb.push(h + d);
    }
    // refined intervals per axis
    let m = controls.refine_margin;
    let mut xz: Vec<(f64, f64)> = Vec::new();
    let mut yz: Vec<(f64, f64)> = Vec::new();
    for e in &geom.exits {
        let (lo, hi) = e.span();
        match e.side {
            Side::Left | Side::Right => {
                yb.extend([lo, hi]);
                let x0 = if e.side == Side::Left { 0.0 } else { w };
                xz.push((x0 - m, x0 + m));
                yz.push((lo - m, hi + m));
            }
            Side::Bottom | Side::Top => {
                xb.extend([lo, hi]);
                let y0 = if e.side == Side::Bottom { 0.0 } else { h };
                yz.push((y0 - m, y0 + m));
                xz.push((lo - m, hi + m));
            }
        }
    }
    for o in &geom.obstacles {
        let (lo, hi) = o.bbox();
        if let Obstacle::Rect { min, max } = o {
            xb.extend([min[0], max[0]]);
            yb.extend([min[1], max[1]]);
        }
        xz.push((lo[0] - m, hi[0] + m));
        yz.push((lo[1] - m, hi[1] + m));
    }
    let spacing = |zones: &[(f64, f64)]| {
        let zones = zones.to_vec();
        let base = controls.target_h;
        let fine = base / controls.refine_factor;
        move |s: f64| {
            zones.iter().fold(base, |acc, &(a, b)| {
                let dz = (a - s).max(s - b).max(0.0);
                acc.min(fine + GRADING * dz)
            })
        }
    };
    let xs = graded_axis(&xb, spacing(&xz));
    let ys = graded_axis(&yb, spacing(&yz));
    let (nx, ny) = (xs.len(), ys.len());

    let idx = |i: usize, j: usize| j * nx + i;
    let mut pos: Vec<Point> = Vec::with_capacity(nx * ny);
    for &y in &ys {
        for &x in &xs {
            pos.push([x, y]);
        }
    }
    let mut all_tris = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let (a, b, c, dd) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            if (i + j) % 2 == 0 {
                all_tris.push([a, b, c]);
                all_tris.push([a, c, dd]);
            } else {
                all_tris.push([a, b, dd]);
                all_tris.push([b, c, dd]);
            }
        }
    }
    let local_h: Vec<f64> = (0..nx * ny)
        .map(|k| {
            let (i, j) = (k % nx, k / nx);
            let mut hl = f64::INFINITY;
            if i > 0 {
                hl = hl.min(xs[i] - xs[i - 1]);
            }
            if i + 1 < nx {
                hl = hl.min(xs[i + 1] - xs[i]);
            }
            if j > 0 {
                hl = hl.min(ys[j] - ys[j - 1]);
            }
            if j + 1 < ny {
                hl = hl.min(ys[j + 1] - ys[j]);
            }
            hl
        })
        .collect();

    // candidate snaps onto circles, strictly interior room nodes only
    let mut snaps: Vec<(usize, Point)> = Vec::new();
    for (k, p) in pos.iter().enumerate() {
        if !(p[0] > EPS && p[0] < w - EPS && p[1] > EPS && p[1] < h - EPS) {
            continue;
        }
        for o in &geom.obstacles {
            if let Obstacle::Circle { center, radius } = *o {
                let r = (p[0] - center[0]).hypot(p[1] - center[1]);
                if r > 0.0 && (r - radius).abs() < SNAP_FRACTION * local_h[k] {
                    let s = radius / r;
                    let q = [center[0] + (p[0] - center[0]) * s, center[1] + (p[1] - center[1]) * s];
                    snaps.push((k, q));
                    break;
                }
            }
        }
    }

    let min_area = |t: &[usize; 3]| 1e-3 * t.iter().map(|&v| local_h[v]).fold(f64::INFINITY, f64::min).powi(2);
    let mut active = vec![true; snaps.len()];
    let kept = loop {
        let mut p = pos.clone();
        for (s, &(k, q)) in snaps.iter().enumerate() {
            if active[s] {
                p[k] = q;
            }
        }
        let kept: Vec<[usize; 3]> = all_tris
            .iter()
            .copied()
            .filter(|t| {
                let c = [
                    (p[t[0]][0] + p[t[1]][0] + p[t[2]][0]) / 3.0,
                    (p[t[0]][1] + p[t[1]][1] + p[t[2]][1]) / 3.0,
                ];
                geom.in_outline(c) && !geom.obstacles.iter().any(|o| o.contains(c))
            })
            .collect();
        let bad = kept
            .iter()
            .find(|t| signed_area(p[t[0]], p[t[1]], p[t[2]]) < min_area(t));
        match bad {
            None => {
                pos = p;
                break kept;
            }
            Some(t) => {
                // undo the largest snap on the offending triangle
                let worst = snaps
                    .iter()
                    .enumerate()
                    .filter(|(s, (k, _))| active[*s] && t.contains(k))
                    .max_by(|a, b| {
                        let da = (a.1 .1[0] - pos[a.1 .0][0]).hypot(a.1 .1[1] - pos[a.1 .0][1]);
                        let db = (b.1 .1[0] - pos[b.1 .0][0]).hypot(b.1 .1[1] - pos[b.1 .0][1]);
                        da.total_cmp(&db)
                    })
                    .map(|(s, _)| s);
                match worst {
                    Some(s) => active[s] = false,
                    None => {
                        return Err(Error::Geometry(
                            "degenerate triangle after obstacle carving; reduce target_h".into(),
                        ))
                    }
                }
            }
        }
    };
    if kept.is_empty() {
        return Err(Error::Geometry("no triangles left after carving".into()));
    }

    // slit walls between the room and each exterior strip
    let mut dup: HashMap<usize, usize> = HashMap::new();
    let mut extra: Vec<Point> = Vec::new();
    let mut tris = kept;
    for (side, lo, hi) in &ext {
        let spans: Vec<(f64, f64)> = geom
            .exits
            .iter()
            .filter(|e| e.side == *side)
            .map(|e| e.span())
            .collect();
        let on_partition = |p: Point| -> bool {
            let (line, along) = match side {
                Side::Left => (p[0].abs(), p[1]),
                Side::Right => ((p[0] - w).abs(), p[1]),
                Side::Bottom => (p[1].abs(), p[0]),
                Side::Top => ((p[1] - h).abs(), p[0]),
            };
            line < EPS && !spans.iter().any(|&(a, b)| along >= a - EPS && along <= b + EPS)
        };
        for t in tris.iter_mut() {
            let c = [
                (pos[t[0]][0] + pos[t[1]][0] + pos[t[2]][0]) / 3.0,
                (pos[t[0]][1] + pos[t[1]][1] + pos[t[2]][1]) / 3.0,
            ];
            let in_strip = c[0] > lo[0] && c[0] < hi[0] && c[1] > lo[1] && c[1] < hi[1];
            if !in_strip {
                continue;
            }
            for v in t.iter_mut() {
                if *v < pos.len() && on_partition(pos[*v]) {
                    let next = pos.len() + extra.len();
                    let nv = *dup.entry(*v).or_insert_with(|| {
                        extra.push(pos[*v]);
                        next
                    });
                    *v = nv;
                }
            }
        }
    }
    pos.extend(extra);

    // compact to the nodes still referenced
    let mut remap = vec![usize::MAX; pos.len()];
    let mut nodes = Vec::new();
    let mut used = vec![false; pos.len()];
    for t in &tris {
        for &v in t {
            used[v] = true;
        }
    }
    for (k, p) in pos.iter().enumerate() {
        if used[k] {
            remap[k] = nodes.len();
            nodes.push(*p);
        }
    }
    for t in tris.iter_mut() {
        for v in t.iter_mut() {
            *v = remap[*v];
        }
    }

    let boundary_edges = tag_boundary(geom, &nodes, &tris);
    Mesh::new(nodes, tris, boundary_edges)
}

/// Node coordinates along one axis: every breakpoint is a node and the
/// spacing between them follows `h(s)`.
fn graded_axis(breaks: &[f64], h: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut b = breaks.to_vec();
    b.sort_by(f64::total_cmp);
    b.dedup_by(|x, y| (*x - *y).abs() < EPS);
    let mut out = vec![b[0]];
    for win in b.windows(2) {
        let (a, c) = (win[0], win[1]);
        const SUB: usize = 256;
        let ds = (c - a) / SUB as f64;
        let mut cum = Vec::with_capacity(SUB + 1);
        cum.push(0.0);
        for k in 0..SUB {
            let s = a + (k as f64 + 0.5) * ds;
            cum.push(cum[k] + ds / h(s));
        }
        let total = cum[SUB];
        let n = ((total - 1e-6).ceil() as usize).max(1);
        for m in 1..n {
            let target = total * m as f64 / n as f64;
            let k = cum.partition_point(|&v| v < target).clamp(1, SUB);
            let frac = (target - cum[k - 1]) / (cum[k] - cum[k - 1]);
            out.push(a + (k as f64 - 1.0 + frac) * ds);
        }
        out.push(c);
    }
    out
}

fn tag_boundary(geom: &RoomGeometry, nodes: &[Point], tris: &[[usize; 3]]) -> Vec<BoundaryEdge> {
    let mut count: HashMap<(usize, usize), u32> = HashMap::new();
    for t in tris {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let (w, h, d) = (geom.width, geom.height, geom.exterior_depth);
    let ext = geom.exterior_rects();
    let on = |p: Point, q: Point, axis: usize, value: f64| {
        (p[axis] - value).abs() < EPS && (q[axis] - value).abs() < EPS
    };
    let mut out = Vec::new();
    for t in tris {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if count[&(a.min(b), a.max(b))] != 1 {
                continue;
            }
            let (p, q) = (nodes[a], nodes[b]);
            let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
            let mut tag = BoundaryTag::Wall;
            for (side, _, _) in &ext {
                let far = match side {
                    Side::Left => on(p, q, 0, -d),
                    Side::Right => on(p, q, 0, w + d),
                    Side::Bottom => on(p, q, 1, -d),
                    Side::Top => on(p, q, 1, h + d),
                };
                if far {
                    tag = BoundaryTag::Outflow;
                }
            }
            if d == 0.0 {
                for e in &geom.exits {
                    let (lo, hi) = e.span();
                    let (on_wall, along) = match e.side {
                        Side::Left => (on(p, q, 0, 0.0), mid[1]),
                        Side::Right => (on(p, q, 0, w), mid[1]),
                        Side::Bottom => (on(p, q, 1, 0.0), mid[0]),
                        Side::Top => (on(p, q, 1, h), mid[0]),
                    };
                    if on_wall && along > lo && along < hi {
                        tag = BoundaryTag::Outflow;
                    }
                }
            }
            out.push(BoundaryEdge { nodes: [a, b], tag });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::DualGeometry;

    fn five_columns(r: f64) -> RoomGeometry {
        RoomGeometry {
            width: 10.0,
            height: 6.0,
            exits: vec![Exit {
                side: Side::Right,
                center: 3.0,
                width: 1.0,
            }],
            obstacles: [[9.5, 2.0], [9.0, 2.5], [8.5, 3.0], [9.0, 3.5], [9.5, 4.0]]
                .into_iter()
                .map(|center| Obstacle::Circle { center, radius: r })
                .collect(),
            exterior_depth: 0.0,
        }
    }

    fn nodes_on_circle(m: &Mesh, c: Point, r: f64) -> usize {
        m.nodes()
            .iter()
            .filter(|p| ((p[0] - c[0]).hypot(p[1] - c[1]) - r).abs() < 1e-9)
            .count()
    }

    #[test]
    fn unit_square_half_spacing() {
        let m = generate_mesh(&RoomGeometry::rectangle(1.0, 1.0), &MeshControls::uniform(0.5)).unwrap();
        assert!(m.triangle_count() >= 8);
        assert!((m.total_area() - 1.0).abs() < 1e-14);
        assert!(m.boundary_edges().iter().all(|b| b.tag == BoundaryTag::Wall));
    }

    #[test]
    fn five_column_room_is_valid_and_refines() {
        let g = five_columns(0.22);
        let coarse = generate_mesh(&g, &MeshControls::graded(0.2)).unwrap();
        let fine = generate_mesh(&g, &MeshControls::graded(0.1)).unwrap();
        for c in [[9.5, 2.0], [8.5, 3.0], [9.5, 4.0]] {
            let (nc, nf) = (nodes_on_circle(&coarse, c, 0.22), nodes_on_circle(&fine, c, 0.22));
            assert!(nc >= 6, "{nc}");
            assert!(2 * nf >= 3 * nc, "coarse {nc} fine {nf}");
        }
        let outflow: f64 = coarse
            .boundary_edges()
            .iter()
            .filter(|b| b.tag == BoundaryTag::Outflow)
            .map(|b| super::super::dist(coarse.nodes()[b.nodes[0]], coarse.nodes()[b.nodes[1]]))
            .sum();
        assert!((outflow - 1.0).abs() < 1e-12);
        let dual = DualGeometry::build(&fine);
        let rel = (dual.total_area() - fine.total_area()).abs() / fine.total_area();
        assert!(rel < 1e-12);
    }

    #[test]
    fn exterior_strip_is_separated_by_slit() {
        let mut g = RoomGeometry::rectangle(10.0, 6.0);
        g.exits.push(Exit {
            side: Side::Right,
            center: 3.0,
            width: 1.0,
        });
        g.exterior_depth = 3.0;
        let m = generate_mesh(&g, &MeshControls::graded(0.25)).unwrap();
        assert!((m.total_area() - 78.0).abs() < 1e-9);
        // the partition wall carries wall edges on both sides
        let partition_len: f64 = m
            .boundary_edges()
            .iter()
            .filter(|b| {
                let (p, q) = (m.nodes()[b.nodes[0]], m.nodes()[b.nodes[1]]);
                (p[0] - 10.0).abs() < 1e-9 && (q[0] - 10.0).abs() < 1e-9
            })
            .map(|b| super::super::dist(m.nodes()[b.nodes[0]], m.nodes()[b.nodes[1]]))
            .sum();
        assert!((partition_len - 10.0).abs() < 1e-9, "{partition_len}");
        let outflow: Vec<_> = m
            .boundary_edges()
            .iter()
            .filter(|b| b.tag == BoundaryTag::Outflow)
            .collect();
        assert!(outflow
            .iter()
            .all(|b| (m.nodes()[b.nodes[0]][0] - 13.0).abs() < 1e-9));
    }

    #[test]
    fn rejects_bad_geometry() {
        let mut g = five_columns(0.22);
        g.obstacles.push(Obstacle::Circle {
            center: [11.0, 3.0],
            radius: 0.3,
        });
        assert!(matches!(
            generate_mesh(&g, &MeshControls::uniform(0.2)),
            Err(Error::Geometry(_))
        ));

        let mut g = five_columns(0.22);
        g.exits[0].width = 7.0;
        assert!(matches!(g.validate(), Err(Error::Geometry(_))));

        let mut g = five_columns(0.22);
        g.obstacles.push(Obstacle::Circle {
            center: [9.2, 2.2],
            radius: 0.3,
        });
        assert!(matches!(g.validate(), Err(Error::Geometry(_))));

        let g = RoomGeometry::rectangle(1.0, 1.0);
        assert!(generate_mesh(&g, &MeshControls::uniform(0.0)).is_err());
    }

    #[test]
    fn graded_axis_hits_breakpoints() {
        let xs = graded_axis(&[0.0, 2.5, 10.0], |_| 0.3);
        assert!(xs.contains(&2.5));
        assert!(xs.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 0.3 + 1e-12));
    }
}
