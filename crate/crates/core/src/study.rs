//! Mesh-refinement ladders and parameter sweeps built on the scenarios.

use std::path::Path;

use crate::diagnostics::{grid_spacing, l1_error, ConvergenceStudy, Level, Reference};
use crate::eikonal::{p1_gradient, solve_eikonal, running_cost};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::mesh::{generate_mesh, DualGeometry, Mesh, MeshControls, RoomGeometry};
use crate::physics::ModelKind;
use crate::scenario::{
    builtin_scenario, run_prepared, strip_test1_gradient_x, strip_test1_potential, InitialData,
    Prepared, Scenario,
};
use crate::solver::{RunOptions, Simulation, StopReason, StopRule};

/// Area covered by the mesh of `g`: room plus exterior strips.
pub fn meshed_area(g: &RoomGeometry) -> f64 {
    g.width * g.height
        + g.exterior_rects()
            .iter()
            .map(|(_, lo, hi)| (hi[0] - lo[0]) * (hi[1] - lo[1]))
            .sum::<f64>()
}

/// Mesh of `g` whose node count is close to `cells`, found by rescaling
/// the target spacing of `base` a few times.
pub fn mesh_with_cells(g: &RoomGeometry, base: &MeshControls, cells: usize) -> Result<Mesh> {
    if cells < 4 {
        return Err(Error::Config(format!("cannot build a mesh with {cells} cells")));
    }
    let mut controls = *base;
    controls.target_h = (meshed_area(g) / cells as f64).sqrt();
    let mut mesh = generate_mesh(g, &controls)?;
    for _ in 0..4 {
        let ratio = mesh.node_count() as f64 / cells as f64;
        if (ratio - 1.0).abs() < 0.03 {
            break;
        }
        controls.target_h *= ratio.sqrt();
        mesh = generate_mesh(g, &controls)?;
    }
    Ok(mesh)
}

/// The refinement ladders offered by `crowdflow convergence`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceCase {
    /// Eikonal solution on the strip against the exact potential.
    Test1,
    /// Eikonal solution in the five-column room, empty, against the finest
    /// level.
    Test2,
    /// Second-order model in the five-column room at t = 5 s against the
    /// finest level.
    Full,
}

impl ConvergenceCase {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "test1" => Ok(Self::Test1),
            "test2" => Ok(Self::Test2),
            "full" => Ok(Self::Full),
            _ => Err(Error::Config(format!("unknown case '{s}' (test1, test2, full)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Test1 => "test1",
            Self::Test2 => "test2",
            Self::Full => "full",
        }
    }

    pub fn field_names(self) -> [&'static str; 3] {
        match self {
            Self::Test1 | Self::Test2 => ["phi", "dphi_dx", "dphi_dy"],
            Self::Full => ["density", "velocity_x", "velocity_y"],
        }
    }
}

/// Fitted studies per field of a refinement ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub case: ConvergenceCase,
    pub fields: Vec<(String, ConvergenceStudy)>,
    /// Node count of the reference mesh (0 for an exact reference).
    pub reference_cells: usize,
    /// Nodes sampled outside the reference mesh, summed over levels.
    pub extrapolated: usize,
}

struct LevelFields {
    mesh: Mesh,
    dual: DualGeometry,
    fields: [Vec<f64>; 3],
}

fn eikonal_fields(mesh: Mesh, rho: &[f64], params: &crate::physics::ModelParams, exec: Execution) -> Result<LevelFields> {
    let dual = DualGeometry::build(&mesh);
    let cost = running_cost(rho, params);
    let phi = solve_eikonal(&mesh, &cost)?.phi;
    let grad = p1_gradient(&mesh, &dual, &phi, exec);
    let gx = grad.iter().map(|g| g[0]).collect();
    let gy = grad.iter().map(|g| g[1]).collect();
    Ok(LevelFields {
        mesh,
        dual,
        fields: [phi, gx, gy],
    })
}

/// Scenario used by the `full` ladder: five-column room, second-order
/// model, rho0 = 1 on [1, 5]^2, stopped at t = 5 s.
pub fn full_case_scenario() -> Scenario {
    let mut sc = builtin_scenario("room_five_columns").expect("built-in scenario");
    sc.params.model_kind = ModelKind::SecondOrder;
    sc.params.p0 = 0.005;
    sc.params.gamma = 2.0;
    sc.initial = InitialData::Block {
        min: [1.0, 1.0],
        max: [5.0, 5.0],
        rho0: 1.0,
        v0: [0.0, 0.0],
    };
    sc.run.stop = StopRule {
        mass_fraction: 0.0,
        t_max: 5.0,
    };
    sc.run.snapshot_times.clear();
    sc
}

fn full_fields(sc: &Scenario, mesh: Mesh, exec: Execution) -> Result<LevelFields> {
    let dual = DualGeometry::build(&mesh);
    let state = sc.initial_state(&mesh, &dual);
    let sim = Simulation::new(&mesh, &dual, sc.params, state, sc.evac_weights(&mesh), exec)?;
    let opts = RunOptions {
        exec,
        ..RunOptions::default()
    };
    let out = sim.run(&sc.run.stop, &opts, &mut |_| Ok(())).map_err(|f| f.error)?;
    let v = out.state.velocity();
    let fields = [
        out.state.rho.clone(),
        v.iter().map(|v| v[0]).collect(),
        v.iter().map(|v| v[1]).collect(),
    ];
    Ok(LevelFields { mesh, dual, fields })
}

/// Runs a refinement ladder with target cell counts `levels`. For the
/// self-convergence cases the last level is the reference.
pub fn run_convergence(case: ConvergenceCase, levels: &[usize], exec: Execution) -> Result<ConvergenceReport> {
    let mut sorted = levels.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let needed = if case == ConvergenceCase::Test1 { 3 } else { 4 };
    if sorted.len() < needed {
        return Err(Error::Config(format!(
            "case {} needs at least {needed} distinct levels",
            case.name()
        )));
    }
    // independent levels run concurrently, each one sequentially inside
    let inner = if exec.is_parallel() { Execution::Sequential } else { exec };
    let computed: Vec<Result<LevelFields>> = match case {
        ConvergenceCase::Test1 => {
            let sc = builtin_scenario("strip_test1")?;
            exec::map_jobs(exec, &sorted, |&n| {
                let mesh = mesh_with_cells(&sc.geometry, &sc.mesh, n)?;
                let dual = DualGeometry::build(&mesh);
                let rho = sc.initial_state(&mesh, &dual).rho;
                eikonal_fields(mesh, &rho, &sc.params, inner)
            })
        }
        ConvergenceCase::Test2 => {
            let sc = builtin_scenario("room_five_columns")?;
            exec::map_jobs(exec, &sorted, |&n| {
                let mesh = mesh_with_cells(&sc.geometry, &sc.mesh, n)?;
                let rho = vec![0.0; mesh.node_count()];
                eikonal_fields(mesh, &rho, &sc.params, inner)
            })
        }
        ConvergenceCase::Full => {
            let sc = full_case_scenario();
            exec::map_jobs(exec, &sorted, |&n| {
                let mesh = mesh_with_cells(&sc.geometry, &sc.mesh, n)?;
                full_fields(&sc, mesh, inner)
            })
        }
    };
    let computed: Vec<LevelFields> = computed.into_iter().collect::<Result<_>>()?;

    let mut extrapolated = 0;
    let mut per_field: [Vec<Level>; 3] = Default::default();
    let reference_cells;
    if case == ConvergenceCase::Test1 {
        reference_cells = 0;
        let sc = builtin_scenario("strip_test1")?;
        let p = sc.params;
        let area = meshed_area(&sc.geometry);
        let exact_phi = |x: [f64; 2]| strip_test1_potential(x[0], &p);
        let exact_gx = |x: [f64; 2]| strip_test1_gradient_x(x[0], &p);
        let exact_gy = |_: [f64; 2]| 0.0;
        let exact: [&dyn Fn([f64; 2]) -> f64; 3] = [&exact_phi, &exact_gx, &exact_gy];
        for lv in &computed {
            let n = lv.mesh.node_count();
            for k in 0..3 {
                let e = l1_error(&lv.fields[k], &lv.mesh, &lv.dual, Reference::Analytic(exact[k]));
                per_field[k].push(Level {
                    n,
                    h: grid_spacing(area, n),
                    e: e.value,
                });
            }
        }
    } else {
        let (reference, ladder) = computed.split_last().expect("at least four levels");
        reference_cells = reference.mesh.node_count();
        for lv in ladder {
            let n = lv.mesh.node_count();
            for (k, errors) in per_field.iter_mut().enumerate() {
                let e = l1_error(
                    &lv.fields[k],
                    &lv.mesh,
                    &lv.dual,
                    Reference::Field {
                        mesh: &reference.mesh,
                        values: &reference.fields[k],
                    },
                );
                extrapolated += e.extrapolated;
                errors.push(Level {
                    n,
                    h: grid_spacing(reference_cells as f64, n),
                    e: e.value,
                });
            }
        }
    }
    let names = case.field_names();
    let mut fields = Vec::new();
    for (k, levels) in per_field.into_iter().enumerate() {
        if case == ConvergenceCase::Test1 && k == 2 {
            // the exact y-derivative vanishes; its error is not a rate
            continue;
        }
        fields.push((names[k].to_string(), ConvergenceStudy::fit(levels)?));
    }
    Ok(ConvergenceReport {
        case,
        fields,
        reference_cells,
        extrapolated,
    })
}

/// Parameter varied by `crowdflow sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    P0,
    Gamma,
    VMax,
}

impl SweepParam {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "p0" => Ok(Self::P0),
            "gamma" => Ok(Self::Gamma),
            "v_max" => Ok(Self::VMax),
            _ => Err(Error::Config(format!("unknown sweep parameter '{s}' (p0, gamma, v_max)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::P0 => "p0",
            Self::Gamma => "gamma",
            Self::VMax => "v_max",
        }
    }

    pub fn apply(self, sc: &mut Scenario, value: f64) {
        match self {
            Self::P0 => sc.params.p0 = value,
            Self::Gamma => sc.params.gamma = value,
            Self::VMax => sc.params.v_max = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub t_evac: f64,
    pub stop_time: f64,
    pub stop_reason: Option<StopReason>,
    pub failure: Option<String>,
}

/// Runs `base` once per value of `param` on a shared mesh. Per-run series
/// and reports go to `out` prefixed with the parameter value.
pub fn run_sweep(
    base: &Scenario,
    param: SweepParam,
    values: &[f64],
    out: Option<&Path>,
    exec: Execution,
) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let runs: Vec<Scenario> = values
        .iter()
        .map(|&v| {
            let mut sc = base.clone();
            param.apply(&mut sc, v);
            sc.run.snapshot_times.clear();
            sc.validate().map(|_| sc)
        })
        .collect::<Result<_>>()?;
    let prep = Prepared::new(base)?;
    let inner = if exec.is_parallel() { Execution::Sequential } else { exec };
    let points = exec::map_jobs(exec, &runs, |sc| {
        let value = match param {
            SweepParam::P0 => sc.params.p0,
            SweepParam::Gamma => sc.params.gamma,
            SweepParam::VMax => sc.params.v_max,
        };
        let tag = format!("{}_{value:?}_", param.name());
        match run_prepared(sc, &prep, out, &tag, inner) {
            Ok(r) => SweepPoint {
                value,
                t_evac: r.t_evac,
                stop_time: r.stop_time,
                stop_reason: r.stop_reason,
                failure: None,
            },
            Err(f) => {
                let partial = f.partial.as_deref();
                SweepPoint {
                    value,
                    t_evac: partial.map_or(f64::NAN, |r| r.t_evac),
                    stop_time: partial.map_or(f64::NAN, |r| r.stop_time),
                    stop_reason: None,
                    failure: Some(f.error.to_string()),
                }
            }
        }
    });
    Ok(points)
}

/// `<param>,T_evac,stop_time_s,stop_reason` rows.
pub fn sweep_csv(param: SweepParam, points: &[SweepPoint]) -> String {
    let mut s = format!("{},T_evac,stop_time_s,stop_reason\n", param.name());
    for p in points {
        let reason = match (&p.failure, p.stop_reason) {
            (Some(_), _) | (None, None) => "failed",
            (None, Some(r)) => r.name(),
        };
        s += &format!("{:?},{:?},{:?},{reason}\n", p.value, p.t_evac, p.stop_time);
    }
    s
}
