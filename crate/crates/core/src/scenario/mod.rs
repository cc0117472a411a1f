//! Scenarios: geometry, initial data, parameters and run settings, plus the
//! built-in experiment set and the driver that writes run artifacts.

mod config;

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{parse_config, serialize_config};

use crate::diagnostics::{region_weights, MassSeries};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::mesh::{
    generate_mesh, rect_moments, rect_overlap, DualGeometry, Exit, Mesh, MeshControls, Obstacle, Point,
    RoomGeometry, Side,
};
use crate::physics::{speed, CostKind, ModelParams};
use crate::solver::{DtStats, RunOptions, Simulation, State, StopReason, StopRule};
use crate::vtk;

/// Names accepted by [`builtin_scenario`].
pub const BUILTIN_NAMES: [&str; 7] = [
    "room_empty",
    "room_obstacle1",
    "room_obstacle2",
    "room_obstacle3",
    "room_five_columns",
    "corridor_two_exits",
    "strip_test1",
];

/// Initial density and velocity.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// Constant `rho0` and velocity `v0` on the box `[min, max]`, zero
    /// elsewhere. Cells straddling the box edge get the cell average.
    Block {
        min: Point,
        max: Point,
        rho0: f64,
        v0: [f64; 2],
    },
    /// Piecewise density along x used for the eikonal accuracy test on the
    /// `[0, 2] x [0, 0.2]` strip, at rest.
    StripTest1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub stop: StopRule,
    pub recompute_every: usize,
    pub snapshot_times: Vec<f64>,
    pub series_every: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            stop: StopRule::default(),
            recompute_every: 1,
            snapshot_times: Vec::new(),
            series_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub geometry: RoomGeometry,
    pub mesh: MeshControls,
    pub initial: InitialData,
    pub params: ModelParams,
    pub run: RunSettings,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.params.validate()?;
        self.run.stop.validate()?;
        if self.run.recompute_every == 0 || self.run.series_every == 0 {
            return Err(Error::Config("recompute_every and series_every must be >= 1".into()));
        }
        if !self.run.snapshot_times.windows(2).all(|w| w[0] < w[1])
            || self.run.snapshot_times.iter().any(|t| !(*t >= 0.0))
        {
            return Err(Error::Config(
                "snapshot_times must be nonnegative and strictly increasing".into(),
            ));
        }
        if let InitialData::Block { min, max, rho0, v0 } = &self.initial {
            if !(*rho0 >= 0.0 && rho0.is_finite()) || !v0.iter().all(|v| v.is_finite()) {
                return Err(Error::Config("rho0 must be >= 0 and v0 finite".into()));
            }
            let g = &self.geometry;
            if !(min[0] < max[0] && min[1] < max[1]) {
                return Err(Error::Config("initial region is empty".into()));
            }
            if min[0] < 0.0 || min[1] < 0.0 || max[0] > g.width || max[1] > g.height {
                return Err(Error::Config(format!(
                    "initial region [{}, {}] x [{}, {}] is not inside the {} x {} room",
                    min[0], max[0], min[1], max[1], g.width, g.height
                )));
            }
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        self.validate()?;
        generate_mesh(&self.geometry, &self.mesh)
    }

    /// Initial state on `mesh`.
    pub fn initial_state(&self, mesh: &Mesh, dual: &DualGeometry) -> State {
        match &self.initial {
            InitialData::Block { min, max, rho0, v0 } => {
                let overlap = rect_overlap(mesh, *min, *max);
                let rho: Vec<f64> = overlap
                    .iter()
                    .zip(&dual.cell_area)
                    .map(|(o, a)| rho0 * (o / a).min(1.0))
                    .collect();
                let mom = rho.iter().map(|r| [r * v0[0], r * v0[1]]).collect();
                State { rho, mom }
            }
            InitialData::StripTest1 => {
                let mut rho = vec![0.0; mesh.node_count()];
                for &(a, b, slope, offset) in &STRIP_PIECES {
                    let lo = if a == 0.0 { f64::NEG_INFINITY } else { a };
                    let slab = rect_moments(mesh, [lo, f64::NEG_INFINITY], [b, f64::INFINITY]);
                    for (r, m) in rho.iter_mut().zip(slab) {
                        *r += slope * m[1] + offset * m[0];
                    }
                }
                for (r, a) in rho.iter_mut().zip(&dual.cell_area) {
                    *r = (*r / a).max(0.0);
                }
                State::at_rest(rho)
            }
        }
    }

    /// Weights of the evacuation room, excluding exterior strips.
    pub fn evac_weights(&self, mesh: &Mesh) -> Vec<f64> {
        region_weights(mesh, |p| self.geometry.in_room(p))
    }
}

fn room(name: &str, obstacles: Vec<Obstacle>) -> Scenario {
    Scenario {
        name: name.to_string(),
        geometry: RoomGeometry {
            width: 10.0,
            height: 6.0,
            exits: vec![Exit {
                side: Side::Right,
                center: 3.0,
                width: 1.0,
            }],
            obstacles,
            exterior_depth: 3.0,
        },
        mesh: MeshControls::graded(0.12),
        initial: InitialData::Block {
            min: [1.0, 1.0],
            max: [5.0, 5.0],
            rho0: 1.0,
            v0: [0.0, 0.0],
        },
        params: ModelParams::default(),
        run: RunSettings::default(),
    }
}

fn circles(centers: &[Point], radius: f64) -> Vec<Obstacle> {
    centers
        .iter()
        .map(|&center| Obstacle::Circle { center, radius })
        .collect()
}

/// Column centres of the five-column configuration.
pub const FIVE_COLUMNS: [Point; 5] = [[9.5, 2.0], [9.0, 2.5], [8.5, 3.0], [9.0, 3.5], [9.5, 4.0]];

/// One of the built-in experiments. See [`BUILTIN_NAMES`].
///
/// `corridor_two_exits` places pedestrians on `[0, 50] x [6, 20]`, the
/// caption's `[6, 26]` clipped to the 20 m corridor, and uses
/// `rho_max = 7` from the same caption (the running text says 10).
pub fn builtin_scenario(name: &str) -> Result<Scenario> {
    let sc = match name {
        "room_empty" => room(name, Vec::new()),
        "room_obstacle1" => room(name, circles(&[[8.5, 3.0]], 0.3)),
        "room_obstacle2" => room(name, circles(&[[9.0, 2.5], [8.0, 3.0], [9.0, 3.5]], 0.2)),
        "room_obstacle3" => room(
            name,
            vec![
                Obstacle::Rect {
                    min: [7.5, 2.3],
                    max: [9.0, 2.5],
                },
                Obstacle::Rect {
                    min: [7.5, 3.5],
                    max: [9.0, 3.7],
                },
            ],
        ),
        "room_five_columns" => {
            let mut sc = room(name, circles(&FIVE_COLUMNS, 0.22));
            sc.run.snapshot_times = vec![9.0];
            sc
        }
        "corridor_two_exits" => Scenario {
            name: name.to_string(),
            geometry: RoomGeometry {
                width: 100.0,
                height: 20.0,
                exits: vec![
                    Exit {
                        side: Side::Bottom,
                        center: 67.0,
                        width: 1.2,
                    },
                    Exit {
                        side: Side::Bottom,
                        center: 93.0,
                        width: 1.2,
                    },
                ],
                obstacles: Vec::new(),
                exterior_depth: 3.0,
            },
            mesh: MeshControls::graded(0.4),
            initial: InitialData::Block {
                min: [0.0, 6.0],
                max: [50.0, 20.0],
                rho0: 3.0,
                v0: [0.0, 0.0],
            },
            params: ModelParams::default(),
            run: RunSettings {
                snapshot_times: vec![30.0, 40.0, 60.0],
                ..RunSettings::default()
            },
        },
        "strip_test1" => Scenario {
            name: name.to_string(),
            geometry: RoomGeometry {
                width: 2.0,
                height: 0.2,
                exits: vec![Exit {
                    side: Side::Left,
                    center: 0.1,
                    width: 0.2,
                }],
                obstacles: Vec::new(),
                exterior_depth: 0.0,
            },
            mesh: MeshControls::uniform(0.02),
            initial: InitialData::StripTest1,
            params: ModelParams::default(),
            run: RunSettings::default(),
        },
        _ => {
            return Err(Error::Config(format!(
                "unknown scenario '{name}'; valid names: {}",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    Ok(sc)
}

/// `(from, to, slope, offset)` pieces of the strip-test density.
const STRIP_PIECES: [(f64, f64, f64, f64); 4] = [
    (0.0, 0.5, 1.0, 0.0),
    (0.5, 1.0, 0.0, 1.0),
    (1.0, 1.5, 1.0, 1.0),
    (1.5, f64::INFINITY, 0.0, 2.5),
];

/// Piecewise density of the strip test:
/// x on [0, 0.5), 1 on [0.5, 1), x + 1 on [1, 1.5), 2.5 on [1.5, 2].
/// Nodes carry its dual-cell averages.
pub fn strip_test1_density(x: f64) -> f64 {
    let x = x.max(0.0);
    STRIP_PIECES
        .iter()
        .find(|p| x < p.1)
        .map_or(2.5, |&(_, _, slope, offset)| slope * x + offset)
}

/// Exact potential of the strip test, `phi(x) = int_0^x c(rho(s)) ds`,
/// by adaptive Simpson quadrature on each smooth piece.
pub fn strip_test1_potential(x: f64, params: &ModelParams) -> f64 {
    let cost = |rho: f64| match params.cost_kind {
        CostKind::Simple => 1.0 / params.v_max,
        CostKind::DensityDriven => 1.0 / speed(rho, params),
    };
    let mut total = 0.0;
    for &(a, b, slope, offset) in &STRIP_PIECES {
        let hi = b.min(x);
        if hi <= a {
            break;
        }
        total += adaptive_simpson(&|s| cost(slope * s + offset), a, hi, 1e-14);
    }
    total
}

/// x-derivative of [`strip_test1_potential`].
pub fn strip_test1_gradient_x(x: f64, params: &ModelParams) -> f64 {
    match params.cost_kind {
        CostKind::Simple => 1.0 / params.v_max,
        CostKind::DensityDriven => 1.0 / speed(strip_test1_density(x), params),
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 40)
}

/// Outcome of [`run_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub cells: usize,
    pub series: MassSeries,
    /// `sum M^n dt^n` (ped·s).
    pub t_evac: f64,
    pub stop_reason: Option<StopReason>,
    /// Clock time at which the stop rule fired (s).
    pub stop_time: f64,
    pub steps: usize,
    pub dt: DtStats,
    /// Snapshot files written, in time order.
    pub snapshots: Vec<PathBuf>,
    /// Failure message when the run was aborted.
    pub failure: Option<String>,
}

impl RunReport {
    /// `key = value` summary text.
    pub fn to_text(&self) -> String {
        let names: Vec<String> = self.snapshots.iter().map(|p| p.display().to_string()).collect();
        let mut s = String::new();
        s += &format!("scenario = {}\n", self.scenario);
        s += &format!("cells = {}\n", self.cells);
        s += &format!("steps = {}\n", self.steps);
        s += &format!(
            "stop_reason = {}\n",
            self.stop_reason.map_or("aborted", StopReason::name)
        );
        s += &format!("t_evac_ped_s = {:?}\n", self.t_evac);
        s += &format!("stop_clock_time_s = {:?}\n", self.stop_time);
        s += &format!("dt_min = {:?}\ndt_max = {:?}\ndt_mean = {:?}\n", self.dt.min, self.dt.max, self.dt.mean);
        s += &format!("snapshots = {}\n", names.join(", "));
        if let Some(f) = &self.failure {
            s += &format!("failure = {f}\n");
        }
        s
    }
}

/// A run that stopped early, with the report up to the failure.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct ScenarioFailure {
    #[source]
    pub error: Error,
    pub partial: Option<Box<RunReport>>,
}

impl From<Error> for ScenarioFailure {
    fn from(error: Error) -> Self {
        ScenarioFailure {
            error,
            partial: None,
        }
    }
}

/// Mesh and dual geometry of a scenario, shareable between runs.
pub struct Prepared {
    pub mesh: Mesh,
    pub dual: DualGeometry,
}

impl Prepared {
    pub fn new(sc: &Scenario) -> Result<Self> {
        let mesh = sc.build_mesh()?;
        let dual = DualGeometry::build(&mesh);
        Ok(Prepared { mesh, dual })
    }
}

/// Runs `sc`, writing `series.csv`, `report.txt` and snapshots into `out`
/// when given.
pub fn run_scenario(sc: &Scenario, out: Option<&Path>, exec: Execution) -> std::result::Result<RunReport, ScenarioFailure> {
    let prep = Prepared::new(sc)?;
    run_prepared(sc, &prep, out, "", exec)
}

/// Like [`run_scenario`] on an already meshed geometry. Output file names
/// are prefixed with `tag`.
pub fn run_prepared(
    sc: &Scenario,
    prep: &Prepared,
    out: Option<&Path>,
    tag: &str,
    exec: Execution,
) -> std::result::Result<RunReport, ScenarioFailure> {
    sc.validate()?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let (mesh, dual) = (&prep.mesh, &prep.dual);
    let state = sc.initial_state(mesh, dual);
    let sim = Simulation::new(mesh, dual, sc.params, state, sc.evac_weights(mesh), exec)?;
    let opts = RunOptions {
        recompute_every: sc.run.recompute_every,
        snapshot_times: sc.run.snapshot_times.clone(),
        series_every: sc.run.series_every,
        exec,
    };
    let mut snapshots = Vec::new();
    let mut on_snapshot = |v: &crate::solver::SnapshotView<'_>| -> Result<()> {
        if let Some(dir) = out {
            let path = dir.join(format!("{tag}snapshot_t{:08.3}.vtk", v.t));
            vtk::write_snapshot(&path, mesh, v.state, Some(&v.potential.phi), v.t)?;
            snapshots.push(path);
        }
        Ok(())
    };
    let result = sim.run(&sc.run.stop, &opts, &mut on_snapshot);
    let (outcome, failure) = match result {
        Ok(o) => (o, None),
        Err(f) => (*f.partial, Some(f.error)),
    };
    let report = RunReport {
        scenario: sc.name.clone(),
        cells: mesh.node_count(),
        series: outcome.series,
        t_evac: outcome.t_evac,
        stop_reason: outcome.stop_reason,
        stop_time: outcome.stop_time,
        steps: outcome.clock.step_index,
        dt: outcome.dt_stats,
        snapshots,
        failure: failure.as_ref().map(|e| e.to_string()),
    };
    if let Some(dir) = out {
        let series = dir.join(format!("{tag}series.csv"));
        fs::write(&series, report.series.to_csv()).map_err(|e| Error::io(&series, e))?;
        let text = dir.join(format!("{tag}report.txt"));
        fs::write(&text, report.to_text()).map_err(|e| Error::io(&text, e))?;
    }
    match failure {
        None => Ok(report),
        Some(error) => Err(ScenarioFailure {
            error,
            partial: Some(Box::new(report)),
        }),
    }
}
