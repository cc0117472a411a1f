//! Plain-text mesh format.
//!
//! ```text
//! nodes N triangles T bedges B
//! x y            (N lines)
//! i j k          (T lines, 0-based)
//! i j TAG        (B lines, TAG is W or O)
//! ```
//! Tokens are whitespace separated and `#` starts a comment.

use std::fmt::Write as _;

use super::{BoundaryEdge, BoundaryTag, Mesh};
use crate::error::{Error, Result};

pub fn save_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "nodes {} triangles {} bedges {}",
        mesh.node_count(),
        mesh.triangle_count(),
        mesh.boundary_edges().len()
    );
    for p in mesh.nodes() {
        let _ = writeln!(out, "{:?} {:?}", p[0], p[1]);
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    for b in mesh.boundary_edges() {
        let _ = writeln!(out, "{} {} {}", b.nodes[0], b.nodes[1], b.tag.code());
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn load_mesh(text: &str) -> Result<Mesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty mesh file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 6 || h[0] != "nodes" || h[2] != "triangles" || h[4] != "bedges" {
        return Err(parse_err(
            hline,
            "expected header `nodes N triangles T bedges B`",
        ));
    }
    let count = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| parse_err(hline, format!("bad count `{s}`")))
    };
    let (n, t, b) = (count(h[1])?, count(h[3])?, count(h[5])?);
    if t == 0 {
        return Err(parse_err(hline, "mesh has no triangles"));
    }

    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| parse_err(text.lines().count() + 1, format!("missing {what} line")))
    };

    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, l) = next("node")?;
        let v: Vec<&str> = l.split_whitespace().collect();
        if v.len() != 2 {
            return Err(parse_err(ln, "expected `x y`"));
        }
        let x = v[0].parse::<f64>().map_err(|_| parse_err(ln, "bad x"))?;
        let y = v[1].parse::<f64>().map_err(|_| parse_err(ln, "bad y"))?;
        if !x.is_finite() || !y.is_finite() {
            return Err(parse_err(ln, "non-finite coordinate"));
        }
        nodes.push([x, y]);
    }

    let index = |ln: usize, s: &str| -> Result<usize> {
        let i = s
            .parse::<usize>()
            .map_err(|_| parse_err(ln, format!("bad index `{s}`")))?;
        if i >= n {
            return Err(parse_err(ln, format!("node index {i} out of range 0..{n}")));
        }
        Ok(i)
    };

    let mut triangles = Vec::with_capacity(t);
    for _ in 0..t {
        let (ln, l) = next("triangle")?;
        let v: Vec<&str> = l.split_whitespace().collect();
        if v.len() != 3 {
            return Err(parse_err(ln, "expected `i j k`"));
        }
        triangles.push([index(ln, v[0])?, index(ln, v[1])?, index(ln, v[2])?]);
    }

    let mut boundary_edges = Vec::with_capacity(b);
    for _ in 0..b {
        let (ln, l) = next("boundary edge")?;
        let v: Vec<&str> = l.split_whitespace().collect();
        if v.len() != 3 {
            return Err(parse_err(ln, "expected `i j TAG`"));
        }
        let tag = match v[2] {
            "W" => BoundaryTag::Wall,
            "O" => BoundaryTag::Outflow,
            other => return Err(parse_err(ln, format!("unknown boundary tag `{other}`"))),
        };
        boundary_edges.push(BoundaryEdge {
            nodes: [index(ln, v[0])?, index(ln, v[1])?],
            tag,
        });
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing data after declared records"));
    }

    Mesh::new(nodes, triangles, boundary_edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "# unit square\nnodes 4 triangles 2 bedges 4\n0 0\n1 0\n1 1\n0 1\n0 1 2\n0 2 3\n0 1 W\n1 2 O  # exit\n2 3 W\n3 0 W\n";

    #[test]
    fn parses_with_comments() {
        let m = load_mesh(SQUARE).unwrap();
        assert_eq!(m.node_count(), 4);
        assert_eq!(m.boundary_edges()[1].tag, BoundaryTag::Outflow);
        assert_eq!(load_mesh(&save_mesh(&m)).unwrap(), m);
    }

    #[test]
    fn index_out_of_range_reports_line() {
        let bad = SQUARE.replace("0 2 3\n", "0 2 4\n");
        match load_mesh(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_mesh_rejected() {
        let err = load_mesh("nodes 0 triangles 0 bedges 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn unknown_tag_rejected() {
        let bad = SQUARE.replace("2 3 W", "2 3 X");
        assert!(matches!(load_mesh(&bad), Err(Error::Parse { line: 11, .. })));
    }

    #[test]
    fn truncated_file_rejected() {
        let bad: String = SQUARE.lines().take(6).collect::<Vec<_>>().join("\n");
        assert!(matches!(load_mesh(&bad), Err(Error::Parse { .. })));
    }
}
