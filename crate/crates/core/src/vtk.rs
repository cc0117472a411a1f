//! Legacy-VTK ASCII snapshots of nodal fields.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::solver::State;

/// VTK cell type of a linear triangle.
pub const VTK_TRIANGLE: u8 = 5;

/// Unstructured-grid text with `density`, `velocity` and, when given,
/// `potential` point data. Non-finite potentials are written as -1.
pub fn snapshot_text(mesh: &Mesh, state: &State, potential: Option<&[f64]>, t: f64) -> String {
    let (n, nt) = (mesh.node_count(), mesh.triangle_count());
    let mut s = String::with_capacity(64 * n);
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "crowdflow snapshot t={t:?}");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {n} double");
    for p in mesh.nodes() {
        let _ = writeln!(s, "{:?} {:?} 0.0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(s, "{VTK_TRIANGLE}");
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    let _ = writeln!(s, "SCALARS density double 1");
    let _ = writeln!(s, "LOOKUP_TABLE default");
    for r in &state.rho {
        let _ = writeln!(s, "{r:?}");
    }
    let _ = writeln!(s, "VECTORS velocity double");
    for v in state.velocity() {
        let _ = writeln!(s, "{:?} {:?} 0.0", v[0], v[1]);
    }
    if let Some(phi) = potential {
        let _ = writeln!(s, "SCALARS potential double 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for v in phi {
            let v = if v.is_finite() { *v } else { -1.0 };
            let _ = writeln!(s, "{v:?}");
        }
    }
    s
}

pub fn write_snapshot(path: &Path, mesh: &Mesh, state: &State, potential: Option<&[f64]>, t: f64) -> Result<()> {
    fs::write(path, snapshot_text(mesh, state, potential, t)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, MeshControls, RoomGeometry};

    /// Minimal grammar check: section order, counts and value arity.
    fn check_grammar(text: &str, with_potential: bool) -> Vec<f64> {
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# vtk DataFile Version"));
        lines.next().unwrap();
        assert_eq!(lines.next().unwrap(), "ASCII");
        assert_eq!(lines.next().unwrap(), "DATASET UNSTRUCTURED_GRID");
        let head: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
        assert_eq!(head[0], "POINTS");
        let n: usize = head[1].parse().unwrap();
        for _ in 0..n {
            let xs: Vec<f64> = lines.next().unwrap().split_whitespace().map(|v| v.parse().unwrap()).collect();
            assert_eq!(xs.len(), 3);
        }
        let cells: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
        assert_eq!(cells[0], "CELLS");
        let nt: usize = cells[1].parse().unwrap();
        assert_eq!(cells[2].parse::<usize>().unwrap(), 4 * nt);
        for _ in 0..nt {
            let ids: Vec<usize> = lines.next().unwrap().split_whitespace().map(|v| v.parse().unwrap()).collect();
            assert_eq!(ids[0], 3);
            assert!(ids[1..].iter().all(|&i| i < n));
        }
        assert_eq!(lines.next().unwrap(), format!("CELL_TYPES {nt}"));
        for _ in 0..nt {
            assert_eq!(lines.next().unwrap(), "5");
        }
        assert_eq!(lines.next().unwrap(), format!("POINT_DATA {n}"));
        assert_eq!(lines.next().unwrap(), "SCALARS density double 1");
        assert_eq!(lines.next().unwrap(), "LOOKUP_TABLE default");
        let rho: Vec<f64> = (0..n).map(|_| lines.next().unwrap().parse().unwrap()).collect();
        assert_eq!(lines.next().unwrap(), "VECTORS velocity double");
        for _ in 0..n {
            assert_eq!(lines.next().unwrap().split_whitespace().count(), 3);
        }
        if with_potential {
            assert_eq!(lines.next().unwrap(), "SCALARS potential double 1");
            assert_eq!(lines.next().unwrap(), "LOOKUP_TABLE default");
            for _ in 0..n {
                lines.next().unwrap().parse::<f64>().unwrap();
            }
        }
        assert!(lines.next().is_none());
        rho
    }

    #[test]
    fn snapshot_conforms_and_vacuum_is_zero() {
        let m = generate_mesh(&RoomGeometry::rectangle(1.0, 1.0), &MeshControls::uniform(0.25)).unwrap();
        let s = State::vacuum(m.node_count());
        let phi = vec![f64::INFINITY; m.node_count()];
        let rho = check_grammar(&snapshot_text(&m, &s, Some(&phi), 0.0), true);
        assert!(rho.iter().all(|&r| r == 0.0));
        check_grammar(&snapshot_text(&m, &s, None, 1.5), false);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let m = generate_mesh(&RoomGeometry::rectangle(1.0, 1.0), &MeshControls::uniform(0.5)).unwrap();
        let s = State::vacuum(m.node_count());
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("missing").join("x.vtk");
        assert!(matches!(write_snapshot(&bad, &m, &s, None, 0.0), Err(Error::Io { .. })));
    }
}
