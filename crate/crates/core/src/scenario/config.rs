//! Flat `key = value` scenario files.
//!
//! ```text
//! name = room_empty
//! [geometry]
//! width = 10
//! height = 6
//! exits = right:3:1
//! circles = 8.5:3:0.3
//! target_h = 0.12
//! [initial]
//! profile = block
//! region = 1,1,5,5
//! rho0 = 1
//! [params]
//! p0 = 0.005
//! [run]
//! t_max = 500
//! ```
//!
//! Lists are comma separated; exits are `side:center:width`, circles
//! `x:y:r` and rectangles `x0:y0:x1:y1`. `#` starts a comment. Unknown or
//! repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{InitialData, RunSettings, Scenario};
use crate::error::{Error, Result};
use crate::mesh::{Exit, MeshControls, Obstacle, RoomGeometry, Side};
use crate::physics::{CostKind, HughesOutflow, ModelKind, ModelParams};
use crate::solver::StopRule;

const SECTIONS: [&str; 5] = ["", "geometry", "initial", "params", "run"];

const KNOWN: [(&str, &[&str]); 5] = [
    ("", &["name"]),
    (
        "geometry",
        &[
            "width",
            "height",
            "exits",
            "circles",
            "rects",
            "exterior_depth",
            "target_h",
            "refine_factor",
            "refine_margin",
        ],
    ),
    ("initial", &["profile", "region", "rho0", "v0"]),
    (
        "params",
        &[
            "model",
            "cost",
            "hughes_outflow",
            "v_max",
            "tau",
            "rho_max",
            "p0",
            "gamma",
            "alpha",
            "cfl",
        ],
    ),
    (
        "run",
        &["mass_fraction", "t_max", "recompute_every", "series_every", "snapshot_times"],
    ),
];

struct Entry {
    value: String,
    line: usize,
}

struct Table {
    entries: BTreeMap<(String, String), Entry>,
}

impl Table {
    fn take(&mut self, section: &str, key: &str) -> Option<Entry> {
        self.entries.remove(&(section.to_string(), key.to_string()))
    }

    fn has(&self, section: &str, key: &str) -> bool {
        self.entries.contains_key(&(section.to_string(), key.to_string()))
    }
}

fn parse_error(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn tokenize(text: &str) -> Result<Table> {
    let mut entries = BTreeMap::new();
    let mut section = String::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| parse_error(line, "unterminated section header"))?
                .trim();
            if name.is_empty() || !SECTIONS.contains(&name) {
                return Err(parse_error(line, format!("unknown section [{name}]")));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| parse_error(line, format!("expected 'key = value', got '{body}'")))?;
        let key = key.trim().to_string();
        let known = KNOWN
            .iter()
            .find(|(s, _)| *s == section)
            .is_some_and(|(_, keys)| keys.contains(&key.as_str()));
        if !known {
            let place = if section.is_empty() {
                "top level".to_string()
            } else {
                format!("[{section}]")
            };
            return Err(parse_error(line, format!("unknown key '{key}' in {place}")));
        }
        let slot = (section.clone(), key.clone());
        if let Some(prev) = entries.get(&slot) {
            let Entry { line: first, .. } = prev;
            return Err(parse_error(line, format!("key '{key}' repeated (first on line {first})")));
        }
        entries.insert(
            slot,
            Entry {
                value: value.trim().to_string(),
                line,
            },
        );
    }
    Ok(Table { entries })
}

fn number(e: &Entry) -> Result<f64> {
    e.value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_error(e.line, format!("expected a number, got '{}'", e.value)))
}

fn integer(e: &Entry) -> Result<usize> {
    e.value
        .parse::<usize>()
        .map_err(|_| parse_error(e.line, format!("expected a nonnegative integer, got '{}'", e.value)))
}

fn items(e: &Entry) -> Vec<&str> {
    e.value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

fn numbers(e: &Entry, s: &str) -> Result<Vec<f64>> {
    s.split(':')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_error(e.line, format!("bad number '{x}' in '{s}'")))
        })
        .collect()
}

fn number_list(e: &Entry) -> Result<Vec<f64>> {
    items(e)
        .into_iter()
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_error(e.line, format!("bad number '{s}'")))
        })
        .collect()
}

fn fixed<const N: usize>(e: &Entry) -> Result<[f64; N]> {
    let v = number_list(e)?;
    v.try_into()
        .map_err(|_| parse_error(e.line, format!("expected {N} comma-separated numbers")))
}

/// Parses a scenario file. See the module docs for the format.
pub fn parse_config(text: &str) -> Result<Scenario> {
    let mut t = tokenize(text)?;

    let mut missing: Vec<String> = Vec::new();
    for (sec, key) in [
        ("geometry", "width"),
        ("geometry", "height"),
        ("geometry", "exits"),
        ("geometry", "target_h"),
        ("initial", "profile"),
    ] {
        if !t.has(sec, key) {
            missing.push(format!("{sec}.{key}"));
        }
    }
    let profile = t.take("initial", "profile");
    let is_block = profile.as_ref().is_none_or(|p| p.value == "block");
    if is_block {
        for key in ["region", "rho0"] {
            if !t.has("initial", key) {
                missing.push(format!("initial.{key}"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Config(format!("missing required keys: {}", missing.join(", "))));
    }

    let name = t.take("", "name").map_or_else(|| "custom".to_string(), |e| e.value);

    let req = |t: &mut Table, s: &str, k: &str| t.take(s, k).expect("checked above");
    let width = number(&req(&mut t, "geometry", "width"))?;
    let height = number(&req(&mut t, "geometry", "height"))?;
    let exits_e = req(&mut t, "geometry", "exits");
    let mut exits = Vec::new();
    for item in items(&exits_e) {
        let mut parts = item.splitn(2, ':');
        let side_s = parts.next().unwrap_or("").trim();
        let side = Side::parse(side_s)
            .ok_or_else(|| parse_error(exits_e.line, format!("unknown wall '{side_s}'")))?;
        let nums = numbers(&exits_e, parts.next().unwrap_or(""))?;
        let [center, width] = nums[..] else {
            return Err(parse_error(exits_e.line, format!("exit '{item}' is not side:center:width")));
        };
        exits.push(Exit { side, center, width });
    }
    let mut obstacles = Vec::new();
    if let Some(e) = t.take("geometry", "circles") {
        for item in items(&e) {
            let [x, y, r] = numbers(&e, item)?[..] else {
                return Err(parse_error(e.line, format!("circle '{item}' is not x:y:r")));
            };
            obstacles.push(Obstacle::Circle {
                center: [x, y],
                radius: r,
            });
        }
    }
    if let Some(e) = t.take("geometry", "rects") {
        for item in items(&e) {
            let [x0, y0, x1, y1] = numbers(&e, item)?[..] else {
                return Err(parse_error(e.line, format!("rectangle '{item}' is not x0:y0:x1:y1")));
            };
            obstacles.push(Obstacle::Rect {
                min: [x0, y0],
                max: [x1, y1],
            });
        }
    }
    let exterior_depth = t.take("geometry", "exterior_depth").map_or(Ok(0.0), |e| number(&e))?;
    let target_h = number(&req(&mut t, "geometry", "target_h"))?;
    let mut mesh = MeshControls::uniform(target_h);
    if let Some(e) = t.take("geometry", "refine_factor") {
        mesh.refine_factor = number(&e)?;
    }
    if let Some(e) = t.take("geometry", "refine_margin") {
        mesh.refine_margin = number(&e)?;
    }

    let profile = profile.expect("checked above");
    let initial = match profile.value.as_str() {
        "block" => {
            let [x0, y0, x1, y1] = fixed::<4>(&req(&mut t, "initial", "region"))?;
            let rho0 = number(&req(&mut t, "initial", "rho0"))?;
            let v0 = t.take("initial", "v0").map_or(Ok([0.0, 0.0]), |e| fixed::<2>(&e))?;
            InitialData::Block {
                min: [x0, y0],
                max: [x1, y1],
                rho0,
                v0,
            }
        }
        "strip_test1" => {
            for key in ["region", "rho0", "v0"] {
                if let Some(e) = t.take("initial", key) {
                    return Err(parse_error(e.line, format!("'{key}' does not apply to profile strip_test1")));
                }
            }
            InitialData::StripTest1
        }
        other => {
            return Err(parse_error(
                profile.line,
                format!("unknown profile '{other}' (expected block or strip_test1)"),
            ))
        }
    };

    let mut params = ModelParams::default();
    if let Some(e) = t.take("params", "model") {
        params.model_kind = match e.value.as_str() {
            "second_order" => ModelKind::SecondOrder,
            "hughes" => ModelKind::Hughes,
            v => return Err(parse_error(e.line, format!("unknown model '{v}' (second_order, hughes)"))),
        };
    }
    if let Some(e) = t.take("params", "cost") {
        params.cost_kind = match e.value.as_str() {
            "density_driven" => CostKind::DensityDriven,
            "simple" => CostKind::Simple,
            v => return Err(parse_error(e.line, format!("unknown cost '{v}' (density_driven, simple)"))),
        };
    }
    if let Some(e) = t.take("params", "hughes_outflow") {
        params.hughes_outflow = match e.value.as_str() {
            "prescribed" => HughesOutflow::Prescribed,
            "free" => HughesOutflow::Free,
            v => return Err(parse_error(e.line, format!("unknown hughes_outflow '{v}' (prescribed, free)"))),
        };
    }
    for (key, slot) in [
        ("v_max", &mut params.v_max),
        ("tau", &mut params.tau),
        ("rho_max", &mut params.rho_max),
        ("p0", &mut params.p0),
        ("gamma", &mut params.gamma),
        ("alpha", &mut params.alpha),
        ("cfl", &mut params.cfl),
    ] {
        if let Some(e) = t.take("params", key) {
            *slot = number(&e)?;
        }
    }

    let mut run = RunSettings::default();
    if let Some(e) = t.take("run", "mass_fraction") {
        run.stop.mass_fraction = number(&e)?;
    }
    if let Some(e) = t.take("run", "t_max") {
        run.stop.t_max = number(&e)?;
    }
    if let Some(e) = t.take("run", "recompute_every") {
        run.recompute_every = integer(&e)?;
    }
    if let Some(e) = t.take("run", "series_every") {
        run.series_every = integer(&e)?;
    }
    if let Some(e) = t.take("run", "snapshot_times") {
        run.snapshot_times = number_list(&e)?;
    }
    debug_assert!(t.entries.is_empty());

    let sc = Scenario {
        name,
        geometry: RoomGeometry {
            width,
            height,
            exits,
            obstacles,
            exterior_depth,
        },
        mesh,
        initial,
        params,
        run,
    };
    sc.validate()?;
    Ok(sc)
}

fn list(values: impl IntoIterator<Item = String>) -> String {
    values.into_iter().collect::<Vec<_>>().join(", ")
}

/// Writes every field of `sc` in the format read by [`parse_config`].
pub fn serialize_config(sc: &Scenario) -> String {
    let g = &sc.geometry;
    let p = &sc.params;
    let mut s = String::new();
    let _ = writeln!(s, "name = {}", sc.name);
    let _ = writeln!(s, "\n[geometry]");
    let _ = writeln!(s, "width = {:?}", g.width);
    let _ = writeln!(s, "height = {:?}", g.height);
    let exits = g
        .exits
        .iter()
        .map(|e| format!("{}:{:?}:{:?}", e.side.name(), e.center, e.width));
    let _ = writeln!(s, "exits = {}", list(exits));
    let circles = g.obstacles.iter().filter_map(|o| match o {
        Obstacle::Circle { center, radius } => Some(format!("{:?}:{:?}:{:?}", center[0], center[1], radius)),
        Obstacle::Rect { .. } => None,
    });
    let _ = writeln!(s, "circles = {}", list(circles));
    let rects = g.obstacles.iter().filter_map(|o| match o {
        Obstacle::Rect { min, max } => Some(format!("{:?}:{:?}:{:?}:{:?}", min[0], min[1], max[0], max[1])),
        Obstacle::Circle { .. } => None,
    });
    let _ = writeln!(s, "rects = {}", list(rects));
    let _ = writeln!(s, "exterior_depth = {:?}", g.exterior_depth);
    let _ = writeln!(s, "target_h = {:?}", sc.mesh.target_h);
    let _ = writeln!(s, "refine_factor = {:?}", sc.mesh.refine_factor);
    let _ = writeln!(s, "refine_margin = {:?}", sc.mesh.refine_margin);

    let _ = writeln!(s, "\n[initial]");
    match &sc.initial {
        InitialData::Block { min, max, rho0, v0 } => {
            let _ = writeln!(s, "profile = block");
            let _ = writeln!(s, "region = {:?}, {:?}, {:?}, {:?}", min[0], min[1], max[0], max[1]);
            let _ = writeln!(s, "rho0 = {rho0:?}");
            let _ = writeln!(s, "v0 = {:?}, {:?}", v0[0], v0[1]);
        }
        InitialData::StripTest1 => {
            let _ = writeln!(s, "profile = strip_test1");
        }
    }

    let _ = writeln!(s, "\n[params]");
    let model = match p.model_kind {
        ModelKind::SecondOrder => "second_order",
        ModelKind::Hughes => "hughes",
    };
    let cost = match p.cost_kind {
        CostKind::DensityDriven => "density_driven",
        CostKind::Simple => "simple",
    };
    let outflow = match p.hughes_outflow {
        HughesOutflow::Prescribed => "prescribed",
        HughesOutflow::Free => "free",
    };
    let _ = writeln!(s, "model = {model}\ncost = {cost}\nhughes_outflow = {outflow}");
    for (key, v) in [
        ("v_max", p.v_max),
        ("tau", p.tau),
        ("rho_max", p.rho_max),
        ("p0", p.p0),
        ("gamma", p.gamma),
        ("alpha", p.alpha),
        ("cfl", p.cfl),
    ] {
        let _ = writeln!(s, "{key} = {v:?}");
    }

    let r = &sc.run;
    let StopRule { mass_fraction, t_max } = r.stop;
    let _ = writeln!(s, "\n[run]");
    let _ = writeln!(s, "mass_fraction = {mass_fraction:?}");
    let _ = writeln!(s, "t_max = {t_max:?}");
    let _ = writeln!(s, "recompute_every = {}", r.recompute_every);
    let _ = writeln!(s, "series_every = {}", r.series_every);
    let _ = writeln!(s, "snapshot_times = {}", list(r.snapshot_times.iter().map(|t| format!("{t:?}"))));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{builtin_scenario, BUILTIN_NAMES};

    const MINIMAL: &str = "\
[geometry]
width = 10
height = 6
exits = right:3:1
target_h = 0.5
[initial]
profile = block
region = 1,1,5,5
rho0 = 1
";

    #[test]
    fn round_trip_all_builtins() {
        for name in BUILTIN_NAMES {
            let sc = builtin_scenario(name).unwrap();
            let text = serialize_config(&sc);
            assert_eq!(parse_config(&text).unwrap(), sc, "{name}\n{text}");
        }
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let sc = parse_config(MINIMAL).unwrap();
        assert_eq!(sc.params, ModelParams::default());
        assert_eq!(sc.run, RunSettings::default());
        assert_eq!(sc.name, "custom");
        assert!(sc.geometry.obstacles.is_empty());
    }

    #[test]
    fn gamma_below_one_is_rejected() {
        let text = format!("{MINIMAL}[params]\ngamma = 0.5\n");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("gamma"), "{err}");
    }

    #[test]
    fn unknown_and_missing_keys() {
        let typo = MINIMAL.replace("rho0 = 1", "rh0 = 1");
        match parse_config(&typo) {
            Err(Error::Parse { line: 9, msg }) => assert!(msg.contains("rh0")),
            other => panic!("{other:?}"),
        }
        let missing = MINIMAL.replace("target_h = 0.5\n", "").replace("rho0 = 1\n", "");
        let err = parse_config(&missing).unwrap_err().to_string();
        assert!(err.contains("geometry.target_h") && err.contains("initial.rho0"), "{err}");
        let dup = format!("{MINIMAL}rho0 = 2\n");
        assert!(matches!(parse_config(&dup), Err(Error::Parse { line: 10, .. })));
        let bad_section = format!("{MINIMAL}[output]\n");
        assert!(matches!(parse_config(&bad_section), Err(Error::Parse { .. })));
    }

    #[test]
    fn obstacle_lists_parse() {
        let text = MINIMAL.replace(
            "target_h = 0.5",
            "target_h = 0.5\ncircles = 8.5:3:0.3, 2:2:0.1\nrects = 7.5:2.3:9:2.5  # wall",
        );
        let sc = parse_config(&text).unwrap();
        assert_eq!(sc.geometry.obstacles.len(), 3);
        let bad = MINIMAL.replace("exits = right:3:1", "exits = right:3");
        assert!(matches!(parse_config(&bad), Err(Error::Parse { line: 4, .. })));
    }
}
