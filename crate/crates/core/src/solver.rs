//! Explicit time integration of both crowd models.
//!
//! One step is split into a transport stage (finite-volume update with HLL or
//! Lax–Friedrichs fluxes), a projection removing the wall-normal velocity at
//! wall cells, and a relaxation stage for the momentum source. Face fluxes
//! are computed independently and then gathered per cell in a fixed order,
//! so results do not depend on the number of worker threads.

use thiserror::Error;

use crate::diagnostics::{total_mass, MassSeries};
use crate::eikonal::{potential, running_cost, EikonalSolver, PotentialField};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::mesh::{BoundaryTag, DualGeometry, Mesh};
use crate::physics::{
    einfeldt_speeds, ghost_state, hll_flux, hughes_boundary_flux, lax_friedrichs_flux, source,
    sound_speed, CostKind, Conserved, Flux, ModelKind, ModelParams, RHO_EPS,
};

/// Lower bound on the wave speed used by the time-step control (m/s).
pub const SIGMA_MIN: f64 = 1e-6;

/// Negative densities smaller than this fraction of rho_max are rounded to 0.
const NEG_ROUNDOFF: f64 = 1e-13;

/// Wall facets whose normals differ by more than this angle are projected
/// separately (cos 45°).
const CORNER_COS: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Per-node conserved variables. `mom` stays zero for the Hughes model.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub rho: Vec<f64>,
    pub mom: Vec<[f64; 2]>,
}

impl State {
    pub fn vacuum(n: usize) -> Self {
        State {
            rho: vec![0.0; n],
            mom: vec![[0.0, 0.0]; n],
        }
    }

    /// Density field at rest.
    pub fn at_rest(rho: Vec<f64>) -> Self {
        let n = rho.len();
        State {
            rho,
            mom: vec![[0.0, 0.0]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    #[inline]
    pub fn cell(&self, i: usize) -> Conserved {
        Conserved::new(self.rho[i], self.mom[i])
    }

    /// Velocity at every node, zero in vacuum.
    pub fn velocity(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|i| self.cell(i).velocity()).collect()
    }

    pub fn min_density(&self) -> f64 {
        self.rho.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn check_finite(&self) -> std::result::Result<(), String> {
        for i in 0..self.len() {
            if !self.rho[i].is_finite() || !self.mom[i].iter().all(|m| m.is_finite()) {
                return Err(format!("non-finite state at node {i}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimClock {
    pub t: f64,
    pub step_index: usize,
    pub dt_last: f64,
}

impl SimClock {
    fn advance(&mut self, dt: f64) {
        self.t += dt;
        self.step_index += 1;
        self.dt_last = dt;
    }
}

/// A run ends once the evacuation-region mass drops to
/// `mass_fraction * M(0)` or the clock reaches `t_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub mass_fraction: f64,
    pub t_max: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            mass_fraction: 0.01,
            t_max: 500.0,
        }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.mass_fraction) {
            return Err(Error::Config("mass_fraction must lie in [0, 1)".into()));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::Config("t_max must be a positive number".into()));
        }
        Ok(())
    }
}

/// Orthonormal wall directions per node whose normal velocity is removed.
#[derive(Debug, Clone, PartialEq)]
pub struct WallProjector {
    offsets: Vec<usize>,
    normals: Vec<[f64; 2]>,
}

impl WallProjector {
    pub fn build(dual: &DualGeometry) -> Self {
        let mut offsets = vec![0];
        let mut normals = Vec::new();
        for i in 0..dual.cell_count() {
            // length-weighted mean normal per group of similar orientation
            let mut groups: Vec<[f64; 2]> = Vec::new();
            for &k in dual.cell_facets.of(i) {
                let b = &dual.boundary_facets[k];
                if b.tag != BoundaryTag::Wall {
                    continue;
                }
                let w = [b.length * b.normal[0], b.length * b.normal[1]];
                let slot = groups.iter_mut().find(|g| {
                    let len = g[0].hypot(g[1]);
                    (g[0] * b.normal[0] + g[1] * b.normal[1]) >= CORNER_COS * len
                });
                match slot {
                    Some(g) => {
                        g[0] += w[0];
                        g[1] += w[1];
                    }
                    None => groups.push(w),
                }
            }
            let mut basis: Vec<[f64; 2]> = Vec::new();
            for g in groups {
                let len = g[0].hypot(g[1]);
                if len == 0.0 {
                    continue;
                }
                let mut r = [g[0] / len, g[1] / len];
                for b in &basis {
                    let d = r[0] * b[0] + r[1] * b[1];
                    r = [r[0] - d * b[0], r[1] - d * b[1]];
                }
                let rl = r[0].hypot(r[1]);
                if rl > 0.1 {
                    basis.push([r[0] / rl, r[1] / rl]);
                }
            }
            normals.extend(basis);
            offsets.push(normals.len());
        }
        WallProjector { offsets, normals }
    }

    /// Orthonormal directions constrained at node `i` (empty off the wall).
    pub fn normals(&self, i: usize) -> &[[f64; 2]] {
        &self.normals[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn project(&self, i: usize, mom: &mut [f64; 2]) {
        for n in self.normals(i) {
            let d = mom[0] * n[0] + mom[1] * n[1];
            mom[0] -= d * n[0];
            mom[1] -= d * n[1];
        }
    }
}

/// Stable time step `cfl * min_i d_i / sigma_i`, with `d_i` the cell's
/// area-to-perimeter ratio.
///
/// For the second-order model `sigma_i` is the largest of `|v_i| + s(rho_i)`
/// and the Einfeldt speeds over the faces and boundary facets of cell `i`,
/// at least [`SIGMA_MIN`]; for the Hughes model it is `v_max`.
pub fn cfl_dt(state: &State, dual: &DualGeometry, params: &ModelParams, exec: Execution) -> Result<f64> {
    if state.is_empty() {
        return Err(Error::Config("empty state".into()));
    }
    state
        .check_finite()
        .map_err(|msg| Error::Numerical { step: 0, msg })?;
    let sigma: Vec<f64> = match params.model_kind {
        ModelKind::Hughes => vec![params.v_max; state.len()],
        ModelKind::SecondOrder => {
            let face_speed = exec::map_range(exec, dual.faces.len(), |f| {
                let face = &dual.faces[f];
                let [i, j] = face.nodes;
                let (l, r) = einfeldt_speeds(&state.cell(i), &state.cell(j), face.normal, params);
                l.abs().max(r.abs())
            });
            exec::map_range(exec, state.len(), |i| {
                let ui = state.cell(i);
                let v = ui.velocity();
                let mut s = SIGMA_MIN.max(v[0].hypot(v[1]) + sound_speed(ui.rho.max(0.0), params));
                for &f in dual.cell_faces.of(i) {
                    s = s.max(face_speed[f]);
                }
                for &k in dual.cell_facets.of(i) {
                    let b = &dual.boundary_facets[k];
                    let g = ghost_state(&ui, b.normal, b.tag, params);
                    let (l, r) = einfeldt_speeds(&ui, &g, b.normal, params);
                    s = s.max(l.abs()).max(r.abs());
                }
                s
            })
        }
    };
    let dt = (0..state.len())
        .map(|i| dual.cfl_length(i) / sigma[i])
        .fold(f64::INFINITY, f64::min);
    Ok(params.cfl * dt)
}

/// Result of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub state: State,
    /// Net mass leaving through the boundary per unit time (ped/s).
    pub boundary_outflux: f64,
}

/// Everything a step needs besides the state: mesh geometry, wall
/// directions and parameters.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    pub dual: &'a DualGeometry,
    pub walls: WallProjector,
    pub params: ModelParams,
    pub exec: Execution,
}

impl<'a> Stepper<'a> {
    pub fn new(dual: &'a DualGeometry, params: ModelParams, exec: Execution) -> Self {
        Stepper {
            dual,
            walls: WallProjector::build(dual),
            params,
            exec,
        }
    }

    pub fn cfl_dt(&self, state: &State) -> Result<f64> {
        cfl_dt(state, self.dual, &self.params, self.exec)
    }

    /// Advances `state` by `dt` with desired directions `mu`.
    pub fn step(&self, state: &State, mu: &[[f64; 2]], dt: f64) -> Result<StepOutput> {
        let fail = |msg: String| Error::Numerical { step: 0, msg };
        state.check_finite().map_err(fail)?;
        let (mut next, outflux) = self.transport(state, mu, dt);
        self.clean(&mut next).map_err(fail)?;
        if self.params.model_kind == ModelKind::SecondOrder {
            self.project_walls(&mut next);
            source_stage(&mut next, mu, &self.params, dt, self.exec);
            next.check_finite().map_err(fail)?;
        }
        Ok(StepOutput {
            state: next,
            boundary_outflux: outflux,
        })
    }

    /// Zeroes the wall-normal momentum at every wall node.
    pub fn project_walls(&self, state: &mut State) {
        let walls = &self.walls;
        exec::for_each_mut(self.exec, &mut state.mom, |i, m| walls.project(i, m));
    }

    fn transport(&self, state: &State, mu: &[[f64; 2]], dt: f64) -> (State, f64) {
        let d = self.dual;
        let p = &self.params;
        let (face_flux, facet_flux): (Vec<Flux>, Vec<Flux>) = match p.model_kind {
            ModelKind::SecondOrder => (
                exec::map_range(self.exec, d.faces.len(), |f| {
                    let face = &d.faces[f];
                    let [i, j] = face.nodes;
                    scale(hll_flux(&state.cell(i), &state.cell(j), face.normal, p), face.length)
                }),
                exec::map_range(self.exec, d.boundary_facets.len(), |k| {
                    let b = &d.boundary_facets[k];
                    let ui = state.cell(b.node);
                    let g = ghost_state(&ui, b.normal, b.tag, p);
                    let mut f = scale(hll_flux(&ui, &g, b.normal, p), b.length);
                    if b.tag == BoundaryTag::Wall {
                        f[0] = 0.0;
                    }
                    f
                }),
            ),
            ModelKind::Hughes => (
                exec::map_range(self.exec, d.faces.len(), |f| {
                    let face = &d.faces[f];
                    let [i, j] = face.nodes;
                    let m = lax_friedrichs_flux(state.rho[i], state.rho[j], mu[i], mu[j], face.normal, p);
                    [m * face.length, 0.0, 0.0]
                }),
                exec::map_range(self.exec, d.boundary_facets.len(), |k| {
                    let b = &d.boundary_facets[k];
                    let m = hughes_boundary_flux(state.rho[b.node], mu[b.node], b.normal, b.tag, p);
                    [m * b.length, 0.0, 0.0]
                }),
            ),
        };
        let updated: Vec<(f64, [f64; 2])> = exec::map_range(self.exec, state.len(), |i| {
            let mut acc = [0.0; 3];
            for &f in d.cell_faces.of(i) {
                let s = if d.faces[f].nodes[0] == i { 1.0 } else { -1.0 };
                for c in 0..3 {
                    acc[c] += s * face_flux[f][c];
                }
            }
            for &k in d.cell_facets.of(i) {
                for c in 0..3 {
                    acc[c] += facet_flux[k][c];
                }
            }
            let r = dt / d.cell_area[i];
            (
                state.rho[i] - r * acc[0],
                [state.mom[i][0] - r * acc[1], state.mom[i][1] - r * acc[2]],
            )
        });
        let outflux: f64 = facet_flux.iter().map(|f| f[0]).sum();
        let (rho, mut mom): (Vec<f64>, Vec<[f64; 2]>) = updated.into_iter().unzip();
        if p.model_kind == ModelKind::Hughes {
            mom.iter_mut().for_each(|m| *m = [0.0, 0.0]);
        }
        (State { rho, mom }, outflux)
    }

    /// Rounds tiny negative densities to zero and zeroes vacuum momentum;
    /// fails on NaN or genuinely negative density.
    fn clean(&self, state: &mut State) -> std::result::Result<(), String> {
        let floor = -NEG_ROUNDOFF * self.params.rho_max;
        for i in 0..state.len() {
            let r = state.rho[i];
            if r.is_nan() || !state.mom[i].iter().all(|m| m.is_finite()) {
                return Err(format!("NaN produced at node {i}"));
            }
            if r < floor {
                return Err(format!("negative density {r:e} at node {i}"));
            }
            if r <= RHO_EPS {
                state.mom[i] = [0.0, 0.0];
                if r < 0.0 {
                    state.rho[i] = 0.0;
                }
            }
        }
        Ok(())
    }
}

#[inline]
fn scale(f: Flux, s: f64) -> Flux {
    [f[0] * s, f[1] * s, f[2] * s]
}

/// Explicit Euler step of the relaxation source, in place.
pub fn source_stage(state: &mut State, mu: &[[f64; 2]], params: &ModelParams, dt: f64, exec: Execution) {
    let rho = &state.rho;
    exec::for_each_mut(exec, &mut state.mom, |i, m| {
        let s = source(&Conserved::new(rho[i], *m), mu[i], params);
        m[0] += dt * s[1];
        m[1] += dt * s[2];
    });
}

/// Knobs of the driving loop.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Recompute the potential every this many steps.
    pub recompute_every: usize,
    /// Times at which snapshots are taken; the step size is shortened to
    /// land on them exactly.
    pub snapshot_times: Vec<f64>,
    /// Record every this many steps in the mass series (the final step is
    /// always recorded).
    pub series_every: usize,
    pub exec: Execution,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            recompute_every: 1,
            snapshot_times: Vec::new(),
            series_every: 1,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MassFraction,
    TimeLimit,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::MassFraction => "mass_fraction",
            StopReason::TimeLimit => "t_max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub count: usize,
}

impl Default for DtStats {
    fn default() -> Self {
        DtStats {
            min: f64::INFINITY,
            max: 0.0,
            mean: 0.0,
            count: 0,
        }
    }
}

impl DtStats {
    fn add(&mut self, dt: f64) {
        self.min = self.min.min(dt);
        self.max = self.max.max(dt);
        self.mean += (dt - self.mean) / (self.count + 1) as f64;
        self.count += 1;
    }
}

/// State handed to the snapshot callback.
pub struct SnapshotView<'s> {
    pub t: f64,
    pub state: &'s State,
    pub potential: &'s PotentialField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub series: MassSeries,
    /// `sum_n M^n dt^n` up to the stop time (ped·s).
    pub t_evac: f64,
    pub stop_reason: Option<StopReason>,
    /// Clock time at which the run stopped (s).
    pub stop_time: f64,
    pub dt_stats: DtStats,
    pub clock: SimClock,
    pub state: State,
    pub potential: Option<PotentialField>,
}

/// A failed run with everything computed before the failure.
#[derive(Debug, Error)]
#[error("run aborted at t = {t} s: {error}", t = partial.clock.t)]
pub struct RunFailure {
    #[source]
    pub error: Error,
    pub partial: Box<RunOutcome>,
}

/// A simulation ready to run: mesh, geometry, parameters, state.
pub struct Simulation<'a> {
    pub mesh: &'a Mesh,
    pub stepper: Stepper<'a>,
    pub state: State,
    /// Per-node weights of the evacuation region for M(t).
    pub evac_weights: Vec<f64>,
    eikonal: EikonalSolver,
}

impl<'a> Simulation<'a> {
    pub fn new(
        mesh: &'a Mesh,
        dual: &'a DualGeometry,
        params: ModelParams,
        state: State,
        evac_weights: Vec<f64>,
        exec: Execution,
    ) -> Result<Self> {
        params.validate()?;
        let n = mesh.node_count();
        if state.len() != n || evac_weights.len() != n || dual.cell_count() != n {
            return Err(Error::Config("state, weights and mesh sizes differ".into()));
        }
        if state.rho.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::Config("initial density must be nonnegative".into()));
        }
        let mut state = state;
        if params.model_kind == ModelKind::Hughes {
            state.mom.iter_mut().for_each(|m| *m = [0.0, 0.0]);
        }
        Ok(Simulation {
            mesh,
            stepper: Stepper::new(dual, params, exec),
            state,
            evac_weights,
            eikonal: EikonalSolver::new(mesh)?,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.stepper.params
    }

    pub fn evac_mass(&self) -> f64 {
        total_mass(&self.state.rho, &self.evac_weights)
    }

    /// Potential of the current density.
    pub fn compute_potential(&mut self) -> Result<PotentialField> {
        let cost = running_cost(&self.state.rho, &self.stepper.params);
        potential(self.mesh, self.stepper.dual, &mut self.eikonal, &cost, self.stepper.exec)
    }

    /// Runs until the stop rule fires, calling `on_snapshot` at each
    /// requested snapshot time.
    pub fn run(
        mut self,
        stop: &StopRule,
        opts: &RunOptions,
        on_snapshot: &mut dyn FnMut(&SnapshotView<'_>) -> Result<()>,
    ) -> std::result::Result<RunOutcome, RunFailure> {
        let mut out = RunOutcome {
            series: MassSeries::new(),
            t_evac: 0.0,
            stop_reason: None,
            stop_time: 0.0,
            dt_stats: DtStats::default(),
            clock: SimClock::default(),
            state: State::vacuum(0),
            potential: None,
        };
        match self.drive(stop, opts, on_snapshot, &mut out) {
            Ok(()) => {
                out.state = self.state;
                Ok(out)
            }
            Err(error) => {
                out.state = self.state;
                Err(RunFailure {
                    error,
                    partial: Box::new(out),
                })
            }
        }
    }

    fn drive(
        &mut self,
        stop: &StopRule,
        opts: &RunOptions,
        on_snapshot: &mut dyn FnMut(&SnapshotView<'_>) -> Result<()>,
        out: &mut RunOutcome,
    ) -> Result<()> {
        stop.validate()?;
        if opts.recompute_every == 0 || opts.series_every == 0 {
            return Err(Error::Config("recompute_every and series_every must be >= 1".into()));
        }
        let mut snaps: Vec<f64> = opts
            .snapshot_times
            .iter()
            .copied()
            .filter(|&t| t >= 0.0 && t <= stop.t_max)
            .collect();
        snaps.sort_by(f64::total_cmp);
        snaps.dedup();
        let mut next_snap = 0;

        let m0 = self.evac_mass();
        let mut mass = m0;
        out.series.push(0.0, m0)?;
        let fixed_cost = self.stepper.params.cost_kind == CostKind::Simple;
        let mut pot = self.compute_potential()?;
        let mut since_recompute = 0usize;

        loop {
            while next_snap < snaps.len() && snaps[next_snap] <= out.clock.t {
                on_snapshot(&SnapshotView {
                    t: out.clock.t,
                    state: &self.state,
                    potential: &pot,
                })?;
                next_snap += 1;
            }
            if mass <= stop.mass_fraction * m0 {
                out.stop_reason = Some(StopReason::MassFraction);
                break;
            }
            if out.clock.t >= stop.t_max {
                out.stop_reason = Some(StopReason::TimeLimit);
                break;
            }
            if since_recompute >= opts.recompute_every && !fixed_cost {
                pot = self.compute_potential()?;
                since_recompute = 0;
            }
            let step_no = out.clock.step_index + 1;
            let at = |e: Error| match e {
                Error::Numerical { msg, .. } => Error::Numerical { step: step_no, msg },
                other => other,
            };
            let mut dt = self.stepper.cfl_dt(&self.state).map_err(at)?;
            let mut target = stop.t_max;
            if next_snap < snaps.len() {
                target = target.min(snaps[next_snap]);
            }
            let landing = out.clock.t + dt >= target;
            if landing {
                dt = target - out.clock.t;
            }
            let res = self.stepper.step(&self.state, &pot.mu, dt).map_err(at)?;
            self.state = res.state;
            out.t_evac += mass * dt;
            out.clock.advance(dt);
            if landing {
                out.clock.t = target;
            }
            out.dt_stats.add(dt);
            since_recompute += 1;
            mass = self.evac_mass();
            out.stop_time = out.clock.t;
            let done = mass <= stop.mass_fraction * m0 || out.clock.t >= stop.t_max;
            if done || out.clock.step_index.is_multiple_of(opts.series_every) {
                out.series.push(out.clock.t, mass)?;
            }
        }
        out.stop_time = out.clock.t;
        out.potential = Some(pot);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::region_weights;
    use crate::mesh::{generate_mesh, Exit, MeshControls, RoomGeometry, Side};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn closed_room(h: f64) -> (Mesh, DualGeometry) {
        let m = generate_mesh(&RoomGeometry::rectangle(2.0, 1.5), &MeshControls::uniform(h)).unwrap();
        let d = DualGeometry::build(&m);
        (m, d)
    }

    fn random_state(n: usize, p: &ModelParams, seed: u64) -> State {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mut s = State::vacuum(n);
        for i in 0..n {
            if rng.gen_bool(0.8) {
                let r = rng.gen_range(0.0..p.rho_max);
                let a = rng.gen_range(0.0..std::f64::consts::TAU);
                let v = rng.gen_range(0.0..p.v_max);
                s.rho[i] = r;
                s.mom[i] = [r * v * a.cos(), r * v * a.sin()];
            }
        }
        s
    }

    fn mass(s: &State, d: &DualGeometry) -> f64 {
        total_mass(&s.rho, &d.cell_area)
    }

    #[test]
    fn rest_state_is_fixed_point() {
        let (m, d) = closed_room(0.25);
        let st = Stepper::new(&d, ModelParams::default(), Execution::Sequential);
        let s = State::at_rest(vec![1.7; m.node_count()]);
        let mu = vec![[0.0, 0.0]; m.node_count()];
        let dt = st.cfl_dt(&s).unwrap();
        let out = st.step(&s, &mu, dt).unwrap();
        for i in 0..m.node_count() {
            assert!((out.state.rho[i] - 1.7).abs() < 1e-13);
            assert!(out.state.mom[i][0].abs() < 1e-13 && out.state.mom[i][1].abs() < 1e-13);
        }
        let v = State::vacuum(m.node_count());
        assert_eq!(st.step(&v, &mu, dt).unwrap().state, v);
    }

    #[test]
    fn vacuum_dt_uses_sigma_floor() {
        let (m, d) = closed_room(0.5);
        let p = ModelParams::default();
        let v = State::vacuum(m.node_count());
        let dmin = (0..m.node_count()).map(|i| d.cfl_length(i)).fold(f64::INFINITY, f64::min);
        let dt = cfl_dt(&v, &d, &p, Execution::Sequential).unwrap();
        assert_relative_eq!(dt, 0.9 * dmin / SIGMA_MIN, max_relative = 1e-14);

        let h = ModelParams {
            model_kind: ModelKind::Hughes,
            ..p
        };
        let a = cfl_dt(&v, &d, &h, Execution::Sequential).unwrap();
        let b = cfl_dt(&random_state(m.node_count(), &p, 1), &d, &h, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert_relative_eq!(a, 0.9 * dmin / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn dt_bounds_each_cell_own_wave_speed() {
        let (m, d) = closed_room(0.25);
        let p = ModelParams::default();
        let s = random_state(m.node_count(), &p, 9);
        let dt = cfl_dt(&s, &d, &p, Execution::Sequential).unwrap();
        for i in 0..m.node_count() {
            let v = s.cell(i).velocity();
            let own = v[0].hypot(v[1]) + sound_speed(s.rho[i], &p);
            assert!(dt * own <= p.cfl * d.cfl_length(i) * (1.0 + 1e-12));
        }
        // a dense cell streaming into a slower, lighter neighbour
        let mut s = State::vacuum(m.node_count());
        for i in 0..m.node_count() {
            let (r, vx) = if m.nodes()[i][0] < 1.0 { (5.6, 1.9) } else { (1.1, -0.1) };
            s.rho[i] = r;
            s.mom[i] = [r * vx, 0.0];
        }
        let st = Stepper::new(&d, p, Execution::Sequential);
        let mu = vec![[1.0, 0.0]; m.node_count()];
        let dt = st.cfl_dt(&s).unwrap();
        assert!(st.step(&s, &mu, dt).unwrap().state.min_density() >= 0.0);
    }

    #[test]
    fn closed_room_conserves_mass() {
        let (m, d) = closed_room(0.2);
        let p = ModelParams::default();
        let st = Stepper::new(&d, p, Execution::Parallel);
        let mut s = random_state(m.node_count(), &p, 11);
        let mu: Vec<[f64; 2]> = (0..m.node_count()).map(|i| {
            let a = i as f64;
            [a.cos(), a.sin()]
        }).collect();
        let m0 = mass(&s, &d);
        for _ in 0..100 {
            let dt = st.cfl_dt(&s).unwrap();
            let out = st.step(&s, &mu, dt).unwrap();
            assert_eq!(out.boundary_outflux, 0.0);
            s = out.state;
            assert!(s.min_density() >= 0.0);
        }
        assert!((mass(&s, &d) - m0).abs() <= 1e-10 * m0);
    }

    #[test]
    fn wall_nodes_have_no_normal_velocity_after_projection() {
        let (m, d) = closed_room(0.25);
        let p = ModelParams::default();
        let st = Stepper::new(&d, p, Execution::Sequential);
        let mut s = random_state(m.node_count(), &p, 5);
        st.project_walls(&mut s);
        for i in 0..m.node_count() {
            for &k in d.cell_facets.of(i) {
                let b = &d.boundary_facets[k];
                let v = s.cell(i).velocity();
                assert!((v[0] * b.normal[0] + v[1] * b.normal[1]).abs() <= 1e-12 * p.v_max);
            }
        }
        // corners are fully constrained, edge nodes once, interior nodes never
        let corner = m.nodes().iter().position(|q| q[0] == 0.0 && q[1] == 0.0).unwrap();
        assert_eq!(st.walls.normals(corner).len(), 2);
        let edge = m.nodes().iter().position(|q| q[0] == 1.0 && q[1] == 0.0).unwrap();
        assert_eq!(st.walls.normals(edge).len(), 1);
    }

    #[test]
    fn outflow_accounting_matches_mass_change() {
        let mut g = RoomGeometry::rectangle(3.0, 2.0);
        g.exits.push(Exit {
            side: Side::Right,
            center: 1.0,
            width: 0.8,
        });
        let m = generate_mesh(&g, &MeshControls::uniform(0.2)).unwrap();
        let d = DualGeometry::build(&m);
        for kind in [ModelKind::SecondOrder, ModelKind::Hughes] {
            let p = ModelParams {
                model_kind: kind,
                ..ModelParams::default()
            };
            let st = Stepper::new(&d, p, Execution::Parallel);
            let mut s = random_state(m.node_count(), &p, 2);
            if kind == ModelKind::Hughes {
                s.mom.iter_mut().for_each(|q| *q = [0.0, 0.0]);
            }
            let mu = vec![[1.0, 0.0]; m.node_count()];
            for _ in 0..20 {
                let dt = st.cfl_dt(&s).unwrap();
                let before = mass(&s, &d);
                let out = st.step(&s, &mu, dt).unwrap();
                let after = mass(&out.state, &d);
                let expect = -dt * out.boundary_outflux;
                assert!(
                    ((after - before) - expect).abs() <= 1e-10 * before,
                    "{kind:?}: {} vs {expect}",
                    after - before
                );
                s = out.state;
            }
        }
    }

    #[test]
    fn relaxation_splitting_is_first_order() {
        let p = ModelParams::default();
        let mu = vec![[0.6, -0.8]];
        let rho = 2.0;
        let target = rho * crate::physics::speed(rho, &p);
        let t_end = 1.0;
        let errs: Vec<f64> = [20usize, 40, 80, 160]
            .iter()
            .map(|&n| {
                let dt = t_end / n as f64;
                let mut s = State::at_rest(vec![rho]);
                for _ in 0..n {
                    source_stage(&mut s, &mu, &p, dt, Execution::Sequential);
                }
                let exact = target * (1.0 - (-t_end / p.tau).exp());
                (s.mom[0][0] - 0.6 * exact).abs().max((s.mom[0][1] + 0.8 * exact).abs())
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 1.0).abs() < 0.1, "{order}");
        }
    }

    #[test]
    fn parallel_and_sequential_steps_are_bit_identical() {
        let (m, d) = closed_room(0.15);
        let p = ModelParams::default();
        let s = random_state(m.node_count(), &p, 9);
        let mu = vec![[0.0, 1.0]; m.node_count()];
        let a = Stepper::new(&d, p, Execution::Sequential);
        let b = Stepper::new(&d, p, Execution::Parallel);
        let dt = a.cfl_dt(&s).unwrap();
        assert_eq!(dt, b.cfl_dt(&s).unwrap());
        assert_eq!(a.step(&s, &mu, dt).unwrap(), b.step(&s, &mu, dt).unwrap());
    }

    #[test]
    fn run_evacuates_small_room() {
        let mut g = RoomGeometry::rectangle(4.0, 3.0);
        g.exits.push(Exit {
            side: Side::Right,
            center: 1.5,
            width: 1.0,
        });
        g.exterior_depth = 1.0;
        let m = generate_mesh(&g, &MeshControls::uniform(0.25)).unwrap();
        let d = DualGeometry::build(&m);
        let w = region_weights(&m, |q| g.in_room(q));
        let rho: Vec<f64> = m
            .nodes()
            .iter()
            .map(|q| if q[0] >= 1.0 && q[0] <= 3.0 && q[1] >= 1.0 && q[1] <= 2.0 { 1.0 } else { 0.0 })
            .collect();
        let sim = Simulation::new(&m, &d, ModelParams::default(), State::at_rest(rho), w, Execution::Parallel).unwrap();
        let m0 = sim.evac_mass();
        let mut shots = Vec::new();
        let opts = RunOptions {
            snapshot_times: vec![0.0, 1.0],
            ..RunOptions::default()
        };
        let out = sim
            .run(&StopRule { mass_fraction: 0.01, t_max: 60.0 }, &opts, &mut |v| {
                shots.push(v.t);
                Ok(())
            })
            .unwrap();
        assert_eq!(shots, vec![0.0, 1.0]);
        assert_eq!(out.stop_reason, Some(StopReason::MassFraction));
        assert!(out.series.last().unwrap().1 <= 0.01 * m0);
        assert_relative_eq!(out.t_evac, crate::diagnostics::evac_time(&out.series), max_relative = 1e-12);
        assert!(out.state.min_density() >= 0.0);
    }
}
