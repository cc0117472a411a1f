//! Density-dependent eikonal problem |grad phi| = c(rho), phi = 0 on the
//! outflow boundary, and the desired-direction field derived from it.
//!
//! The discrete solution is the fixed point of a local Hopf–Lax update on
//! each triangle: the value at a vertex is the cheapest way to reach the
//! opposite edge, with phi interpolated linearly along that edge. The fixed
//! point is found by an adaptive Gauss–Seidel sweep driven by a FIFO of
//! nodes whose neighbours changed.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::mesh::{BoundaryTag, DualGeometry, Mesh, Point};
use crate::physics::{speed, CostKind, ModelParams};

/// Magnitudes of grad phi below this give a zero direction (s/m).
pub const GRAD_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CostField {
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    pub phi: Vec<f64>,
    pub grad: Vec<[f64; 2]>,
    pub mu: Vec<[f64; 2]>,
}

/// Nodal running cost: 1/V(rho) or the constant 1/v_max.
pub fn running_cost(rho: &[f64], params: &ModelParams) -> CostField {
    let c = match params.cost_kind {
        CostKind::Simple => vec![1.0 / params.v_max; rho.len()],
        CostKind::DensityDriven => rho.iter().map(|&r| 1.0 / speed(r.max(0.0), params)).collect(),
    };
    CostField { c }
}

/// Hopf–Lax update of the apex value from the opposite edge `x1 x2`:
/// `min_{l in [0,1]} l phi1 + (1 - l) phi2 + c |apex - (l x1 + (1 - l) x2)|`.
///
/// Infinite `phi1` or `phi2` marks an unset vertex; only the other one is
/// used then.
pub fn local_update(phi1: f64, phi2: f64, x1: Point, x2: Point, apex: Point, c: f64) -> f64 {
    let d1 = (apex[0] - x1[0]).hypot(apex[1] - x1[1]);
    let d2 = (apex[0] - x2[0]).hypot(apex[1] - x2[1]);
    let edge1 = phi1 + c * d1;
    let edge2 = phi2 + c * d2;
    if !phi1.is_finite() || !phi2.is_finite() {
        return edge1.min(edge2);
    }
    let best_edge = edge1.min(edge2);

    // y(l) = x2 + l e, w = x2 - apex
    let e = [x1[0] - x2[0], x1[1] - x2[1]];
    let w = [x2[0] - apex[0], x2[1] - apex[1]];
    let ee = e[0] * e[0] + e[1] * e[1];
    let len = ee.sqrt();
    // stationarity: c (w + l e).e / |w + l e| = phi2 - phi1
    let s = (phi2 - phi1) / c;
    if s.abs() >= len {
        return best_edge;
    }
    let t0 = -(w[0] * e[0] + w[1] * e[1]) / ee;
    let perp2 = (w[0] * w[0] + w[1] * w[1]) - (w[0] * e[0] + w[1] * e[1]).powi(2) / ee;
    let perp = perp2.max(0.0).sqrt();
    let u = s * perp / (ee - s * s).sqrt();
    let lam = (t0 + u / len).clamp(0.0, 1.0);
    let y = [x2[0] + lam * e[0], x2[1] + lam * e[1]];
    let interior = lam * phi1 + (1.0 - lam) * phi2 + c * (apex[0] - y[0]).hypot(apex[1] - y[1]);
    interior.min(best_edge)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EikonalOptions {
    /// Absolute change below which a node is not re-queued (s).
    pub tol: f64,
    /// Upper bound on node updates, as a multiple of the node count.
    pub max_updates_per_node: usize,
}

impl EikonalOptions {
    /// 1e-10 * diameter * max cost.
    pub fn for_problem(mesh: &Mesh, cost: &CostField) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in mesh.nodes() {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let diam = (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
        let cmax = cost.c.iter().copied().fold(0.0, f64::max);
        EikonalOptions {
            tol: 1e-10 * diam * cmax,
            max_updates_per_node: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EikonalSolution {
    pub phi: Vec<f64>,
    /// Nodes never reached from the outflow boundary (phi is infinite).
    pub unreachable: Vec<usize>,
    pub updates: usize,
}

/// Reusable eikonal solver for one mesh.
#[derive(Debug, Clone)]
pub struct EikonalSolver {
    outflow: Vec<bool>,
    sources: Vec<usize>,
    queued: Vec<bool>,
    queue: VecDeque<usize>,
}

impl EikonalSolver {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let outflow = mesh.tagged_nodes(BoundaryTag::Outflow);
        let sources: Vec<usize> = (0..outflow.len()).filter(|&i| outflow[i]).collect();
        if sources.is_empty() {
            return Err(Error::Config(
                "eikonal problem needs at least one outflow boundary node".into(),
            ));
        }
        Ok(EikonalSolver {
            outflow,
            sources,
            queued: vec![false; mesh.node_count()],
            queue: VecDeque::new(),
        })
    }

    /// Value of node `i` from all incident triangles.
    #[inline]
    fn update_value(mesh: &Mesh, phi: &[f64], c: f64, i: usize) -> f64 {
        let nodes = mesh.nodes();
        let apex = nodes[i];
        let mut best = f64::INFINITY;
        for &t in mesh.node_triangles().of(i) {
            let tri = mesh.triangles()[t];
            let k = tri.iter().position(|&v| v == i).unwrap_or(0);
            let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
            if !phi[a].is_finite() && !phi[b].is_finite() {
                continue;
            }
            let v = local_update(phi[a], phi[b], nodes[a], nodes[b], apex, c);
            best = best.min(v);
        }
        best
    }

    pub fn solve(&mut self, mesh: &Mesh, cost: &CostField, opts: &EikonalOptions) -> Result<EikonalSolution> {
        let n = mesh.node_count();
        let mut phi = vec![f64::INFINITY; n];
        self.queue.clear();
        self.queued.iter_mut().for_each(|q| *q = false);
        for &s in &self.sources {
            phi[s] = 0.0;
        }
        for &s in &self.sources {
            for &j in mesh.node_neighbors().of(s) {
                if !self.outflow[j] && !self.queued[j] {
                    self.queued[j] = true;
                    self.queue.push_back(j);
                }
            }
        }
        let budget = opts.max_updates_per_node.saturating_mul(n).max(1);
        let mut updates = 0usize;
        let mut last_change = 0.0_f64;
        while let Some(i) = self.queue.pop_front() {
            self.queued[i] = false;
            updates += 1;
            if updates > budget {
                return Err(Error::EikonalNotConverged {
                    updates,
                    residual: last_change,
                });
            }
            let v = Self::update_value(mesh, &phi, cost.c[i], i);
            let old = phi[i];
            if v < old - opts.tol || (!old.is_finite() && v.is_finite()) {
                last_change = if old.is_finite() { old - v } else { v };
                phi[i] = v;
                for &j in mesh.node_neighbors().of(i) {
                    if !self.outflow[j] && !self.queued[j] {
                        self.queued[j] = true;
                        self.queue.push_back(j);
                    }
                }
            }
        }
        let unreachable: Vec<usize> = (0..n).filter(|&i| !phi[i].is_finite()).collect();
        Ok(EikonalSolution {
            phi,
            unreachable,
            updates,
        })
    }
}

/// One-shot convenience wrapper around [`EikonalSolver`].
pub fn solve_eikonal(mesh: &Mesh, cost: &CostField) -> Result<EikonalSolution> {
    let opts = EikonalOptions::for_problem(mesh, cost);
    EikonalSolver::new(mesh)?.solve(mesh, cost, &opts)
}

/// Nodal P1 Galerkin gradient: area-weighted average of the constant
/// triangle gradients around each node.
pub fn p1_gradient(mesh: &Mesh, dual: &DualGeometry, phi: &[f64], exec: Execution) -> Vec<[f64; 2]> {
    let tri_grad: Vec<[f64; 2]> = exec::map_range(exec, mesh.triangle_count(), |t| {
        let tri = mesh.triangles()[t];
        let g = mesh.basis_gradients(t);
        let mut out = [0.0, 0.0];
        for k in 0..3 {
            out[0] += phi[tri[k]] * g[k][0];
            out[1] += phi[tri[k]] * g[k][1];
        }
        let w = mesh.triangle_area(t) / 3.0;
        [w * out[0], w * out[1]]
    });
    exec::map_range(exec, mesh.node_count(), |i| {
        let mut acc = [0.0, 0.0];
        for &t in mesh.node_triangles().of(i) {
            acc[0] += tri_grad[t][0];
            acc[1] += tri_grad[t][1];
        }
        let a = dual.cell_area[i];
        [acc[0] / a, acc[1] / a]
    })
}

/// mu = -grad / |grad|, or zero where |grad| < [`GRAD_EPS`].
pub fn direction_field(grad: &[[f64; 2]]) -> Vec<[f64; 2]> {
    grad.iter().map(|&g| direction(g)).collect()
}

#[inline]
pub fn direction(g: [f64; 2]) -> [f64; 2] {
    let norm = g[0].hypot(g[1]);
    if norm >= GRAD_EPS {
        [-g[0] / norm, -g[1] / norm]
    } else {
        [0.0, 0.0]
    }
}

/// Solves for phi and derives grad phi and mu.
pub fn potential(
    mesh: &Mesh,
    dual: &DualGeometry,
    solver: &mut EikonalSolver,
    cost: &CostField,
    exec: Execution,
) -> Result<PotentialField> {
    let opts = EikonalOptions::for_problem(mesh, cost);
    let sol = solver.solve(mesh, cost, &opts)?;
    if !sol.unreachable.is_empty() {
        log::warn!("{} nodes unreachable from the outflow boundary", sol.unreachable.len());
    }
    let finite: Vec<f64> = sol
        .phi
        .iter()
        .map(|&v| if v.is_finite() { v } else { 0.0 })
        .collect();
    let grad = p1_gradient(mesh, dual, &finite, exec);
    let mu = direction_field(&grad);
    Ok(PotentialField {
        phi: sol.phi,
        grad,
        mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, Exit, MeshControls, RoomGeometry, Side};
    use approx::assert_relative_eq;

    /// Golden-section minimisation of the Hopf–Lax functional.
    fn golden_oracle(phi1: f64, phi2: f64, x1: Point, x2: Point, apex: Point, c: f64) -> f64 {
        let f = |l: f64| {
            let y = [l * x1[0] + (1.0 - l) * x2[0], l * x1[1] + (1.0 - l) * x2[1]];
            l * phi1 + (1.0 - l) * phi2 + c * (apex[0] - y[0]).hypot(apex[1] - y[1])
        };
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (0.0, 1.0);
        for _ in 0..200 {
            let c1 = b - g * (b - a);
            let c2 = a + g * (b - a);
            if f(c1) < f(c2) {
                b = c2;
            } else {
                a = c1;
            }
        }
        f(0.5 * (a + b)).min(f(0.0)).min(f(1.0))
    }

    #[test]
    fn equilateral_update() {
        let h = 3f64.sqrt() / 2.0;
        let (x1, x2, apex) = ([0.0, 0.0], [1.0, 0.0], [0.5, h]);
        let v = local_update(0.0, 0.0, x1, x2, apex, 1.0);
        assert_relative_eq!(v, golden_oracle(0.0, 0.0, x1, x2, apex, 1.0), max_relative = 1e-10);
        assert_relative_eq!(v, h, max_relative = 1e-14);
        assert_relative_eq!(local_update(0.0, 0.0, x1, x2, apex, 2.0), 2.0 * v, max_relative = 1e-14);
    }

    #[test]
    fn one_sided_update() {
        let v = local_update(0.0, f64::INFINITY, [0.0, 0.0], [1.0, 0.0], [0.0, 1.0], 1.0);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn update_matches_oracle_on_random_triangles() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..2000 {
            let mut p = || [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let (x1, x2, apex) = (p(), p(), p());
            let phi1 = rng.gen_range(0.0..2.0);
            let phi2 = rng.gen_range(0.0..2.0);
            let c = rng.gen_range(0.1..3.0);
            let v = local_update(phi1, phi2, x1, x2, apex, c);
            let o = golden_oracle(phi1, phi2, x1, x2, apex, c);
            assert!((v - o).abs() < 1e-7 * (1.0 + o), "{v} vs {o}");
        }
    }

    #[test]
    fn running_cost_values() {
        let mut p = ModelParams::default();
        assert_relative_eq!(running_cost(&[0.0], &p).c[0], 0.5);
        assert_relative_eq!(running_cost(&[7.0], &p).c[0], (7.5f64).exp() / 2.0, max_relative = 1e-14);
        assert_relative_eq!(running_cost(&[7.0], &p).c[0], 904.0, max_relative = 1e-3);
        p.cost_kind = CostKind::Simple;
        assert_eq!(running_cost(&[3.0, 7.0], &p).c, vec![0.5, 0.5]);
    }

    #[test]
    fn directions() {
        assert_eq!(direction([1.0, 0.0]), [-1.0, 0.0]);
        let d = direction([3.0, 4.0]);
        assert_relative_eq!(d[0], -0.6, max_relative = 1e-15);
        assert_relative_eq!(d[1], -0.8, max_relative = 1e-15);
        assert_eq!(direction([0.0, 0.0]), [0.0, 0.0]);
    }

    fn strip(h: f64) -> Mesh {
        let mut g = RoomGeometry::rectangle(2.0, 0.2);
        g.exits.push(Exit {
            side: Side::Left,
            center: 0.1,
            width: 0.2,
        });
        generate_mesh(&g, &MeshControls::uniform(h)).unwrap()
    }

    #[test]
    fn constant_cost_strip_is_distance() {
        let m = strip(0.05);
        let cost = CostField {
            c: vec![0.5; m.node_count()],
        };
        let sol = solve_eikonal(&m, &cost).unwrap();
        assert!(sol.unreachable.is_empty());
        let err = m
            .nodes()
            .iter()
            .zip(&sol.phi)
            .map(|(p, v)| (v - 0.5 * p[0]).abs())
            .fold(0.0, f64::max);
        assert!(err < 0.05 * 0.5, "max error {err}");
    }

    #[test]
    fn homogeneous_in_cost() {
        let m = strip(0.1);
        let c: Vec<f64> = m.nodes().iter().map(|p| 0.5 + p[0]).collect();
        let a = solve_eikonal(&m, &CostField { c: c.clone() }).unwrap();
        let b = solve_eikonal(&m, &CostField { c: c.iter().map(|v| 3.0 * v).collect() }).unwrap();
        for (x, y) in a.phi.iter().zip(&b.phi) {
            assert!((3.0 * x - y).abs() <= 1e-12 * (1.0 + y.abs()), "{x} {y}");
        }
    }

    #[test]
    fn no_outflow_is_configuration_error() {
        let m = generate_mesh(&RoomGeometry::rectangle(1.0, 1.0), &MeshControls::uniform(0.5)).unwrap();
        assert!(matches!(EikonalSolver::new(&m), Err(Error::Config(_))));
    }

    #[test]
    fn gradient_exact_on_linear_fields() {
        let m = strip(0.05);
        let dual = DualGeometry::build(&m);
        let phi: Vec<f64> = m.nodes().iter().map(|p| 3.0 * p[0] - 2.0 * p[1]).collect();
        let g = p1_gradient(&m, &dual, &phi, Execution::Sequential);
        for v in &g {
            assert!((v[0] - 3.0).abs() < 1e-12 && (v[1] + 2.0).abs() < 1e-12, "{v:?}");
        }
        let zero = p1_gradient(&m, &dual, &vec![4.2; m.node_count()], Execution::Parallel);
        assert!(zero.iter().all(|v| v[0].abs() < 1e-12 && v[1].abs() < 1e-12));
    }
}
