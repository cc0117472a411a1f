use std::fs;
use std::path::Path;

use crowdflow::scenario::{builtin_scenario, parse_config, serialize_config, BUILTIN_NAMES};
use crowdflow::Error;

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.cfg"));
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn builtins_match_golden_configs() {
    for name in BUILTIN_NAMES {
        let sc = builtin_scenario(name).unwrap();
        assert_eq!(serialize_config(&sc), golden(name), "{name}");
    }
}

#[test]
fn golden_configs_parse_back_to_builtins() {
    for name in BUILTIN_NAMES {
        let parsed = parse_config(&golden(name)).unwrap();
        assert_eq!(parsed, builtin_scenario(name).unwrap(), "{name}");
    }
}

#[test]
fn every_builtin_meshes_and_has_exact_initial_mass() {
    for name in BUILTIN_NAMES {
        let sc = builtin_scenario(name).unwrap();
        let mut coarse = sc.clone();
        coarse.mesh.target_h *= 2.0;
        let mesh = coarse.build_mesh().unwrap();
        let dual = crowdflow::mesh::DualGeometry::build(&mesh);
        let state = coarse.initial_state(&mesh, &dual);
        let m0 = crowdflow::diagnostics::total_mass(&state.rho, &coarse.evac_weights(&mesh));
        assert!(m0 > 0.0, "{name}");
        assert!(state.min_density() >= 0.0, "{name}");
    }
}

#[test]
fn config_errors_carry_line_numbers() {
    let text = golden("room_empty").replace("gamma = 2.0", "gamma = 2.0\nomega = 1.0");
    match parse_config(&text) {
        Err(Error::Parse { line, msg }) => {
            assert_eq!(text.lines().nth(line - 1).unwrap(), "omega = 1.0");
            assert!(msg.contains("omega"), "{msg}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
    let missing = golden("room_empty").replace("target_h = 0.12\n", "");
    assert!(matches!(parse_config(&missing), Err(Error::Config(m)) if m.contains("target_h")));
}
