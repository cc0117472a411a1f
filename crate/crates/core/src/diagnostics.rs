//! Evacuation functionals, cross-mesh L1 errors and convergence-order fits.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mesh::{DualGeometry, Mesh, Point, PointLocator};

/// Time series of the mass remaining in the evacuation region.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MassSeries {
    samples: Vec<(f64, f64)>,
}

impl MassSeries {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a sample; times must increase strictly and masses be >= 0.
    pub fn push(&mut self, t: f64, m: f64) -> Result<()> {
        if !(t.is_finite() && m.is_finite() && m >= 0.0) {
            return Err(Error::Config(format!("invalid mass sample ({t}, {m})")));
        }
        if let Some(&(last, _)) = self.samples.last() {
            if t <= last {
                return Err(Error::Config(format!(
                    "mass sample times must increase: {t} after {last}"
                )));
            }
        }
        self.samples.push((t, m));
        Ok(())
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> Option<(f64, f64)> {
        self.samples.first().copied()
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        self.samples.last().copied()
    }

    /// Mass at time `t`, linearly interpolated between samples and held
    /// constant outside the sampled range.
    pub fn mass_at(&self, t: f64) -> Option<f64> {
        let s = &self.samples;
        let (first, last) = (s.first()?, s.last()?);
        if t <= first.0 {
            return Some(first.1);
        }
        if t >= last.0 {
            return Some(last.1);
        }
        let k = s.partition_point(|&(ts, _)| ts <= t);
        let ((t0, m0), (t1, m1)) = (s[k - 1], s[k]);
        Some(m0 + (m1 - m0) * (t - t0) / (t1 - t0))
    }

    /// CSV text with a `t,M` header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,M\n");
        for &(t, m) in &self.samples {
            let _ = writeln!(out, "{t:?},{m:?}");
        }
        out
    }
}

/// Per-node weights `w_i` such that `sum rho_i w_i` integrates density over
/// the triangles whose centroid satisfies `inside`.
pub fn region_weights(mesh: &Mesh, inside: impl Fn(Point) -> bool) -> Vec<f64> {
    let mut w = vec![0.0; mesh.node_count()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if inside(mesh.centroid(t)) {
            let third = mesh.triangle_area(t) / 3.0;
            for &v in tri {
                w[v] += third;
            }
        }
    }
    w
}

/// `sum_i rho_i w_i`, summed in node order. Passing `dual.cell_area` as the
/// weights gives the mass of the whole mesh.
pub fn total_mass(rho: &[f64], weights: &[f64]) -> f64 {
    debug_assert_eq!(rho.len(), weights.len());
    rho.iter().zip(weights).map(|(r, w)| r * w).sum()
}

/// Left-rectangle sum `sum_n M(t_n) (t_{n+1} - t_n)` over the series.
pub fn evac_time(series: &MassSeries) -> f64 {
    series
        .samples()
        .windows(2)
        .map(|w| w[0].1 * (w[1].0 - w[0].0))
        .sum()
}

/// Reference solution for [`l1_error`].
pub enum Reference<'a> {
    /// Nodal field on another mesh, sampled by P1 interpolation.
    Field { mesh: &'a Mesh, values: &'a [f64] },
    /// Exact solution evaluated pointwise.
    Analytic(&'a dyn Fn(Point) -> f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Error {
    pub value: f64,
    /// Coarse nodes lying outside the reference mesh, sampled from the
    /// nearest reference triangle.
    pub extrapolated: usize,
}

/// `sum_i |u_i - u_ref(x_i)| |C_i|` over the nodes of `mesh`. Reference
/// fields are sampled by P1 interpolation from the reference triangle on
/// the node's side (this matters on slits), and nodes outside the
/// reference mesh use the nearest reference triangle.
pub fn l1_error(field: &[f64], mesh: &Mesh, dual: &DualGeometry, reference: Reference<'_>) -> L1Error {
    let mut value = 0.0;
    let mut extrapolated = 0;
    match reference {
        Reference::Field { mesh: rm, values } => {
            let loc = PointLocator::new(rm);
            for (i, p) in mesh.nodes().iter().enumerate() {
                let s = loc.interpolate_towards(values, *p, node_side(mesh, i));
                extrapolated += s.extrapolated as usize;
                value += (field[i] - s.value).abs() * dual.cell_area[i];
            }
        }
        Reference::Analytic(f) => {
            for (i, p) in mesh.nodes().iter().enumerate() {
                value += (field[i] - f(*p)).abs() * dual.cell_area[i];
            }
        }
    }
    if extrapolated > 0 {
        log::warn!("{extrapolated} nodes fell outside the reference mesh and were extrapolated");
    }
    L1Error {
        value,
        extrapolated,
    }
}

/// Mean centroid of the triangles around node `i`.
fn node_side(mesh: &Mesh, i: usize) -> Point {
    let tris = mesh.node_triangles().of(i);
    let mut c = [0.0, 0.0];
    for &t in tris {
        let q = mesh.centroid(t);
        c[0] += q[0] / tris.len() as f64;
        c[1] += q[1] / tris.len() as f64;
    }
    c
}

/// Dimensionless grid spacing `sqrt(scale / n)`, with `scale` the reference
/// cell count or the domain area.
pub fn grid_spacing(scale: f64, n: usize) -> f64 {
    (scale / n as f64).sqrt()
}

/// One rung of a refinement ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub n: usize,
    pub h: f64,
    pub e: f64,
}

/// Least-squares fit of `log E = log C + p log h`. Returns `(p, C)`.
pub fn estimate_order(levels: &[Level]) -> Result<(f64, f64)> {
    if levels.len() < 3 {
        return Err(Error::Config(format!(
            "order estimate needs at least 3 levels, got {}",
            levels.len()
        )));
    }
    let usable: Vec<&Level> = levels
        .iter()
        .filter(|l| {
            let ok = l.e > 0.0 && l.e.is_finite() && l.h > 0.0;
            if !ok {
                log::warn!("excluding level N={} with error {} from the fit", l.n, l.e);
            }
            ok
        })
        .collect();
    if usable.len() < 2 {
        return Err(Error::Config(
            "fewer than 2 levels with a positive error remain".into(),
        ));
    }
    let k = usable.len() as f64;
    let xs: Vec<f64> = usable.iter().map(|l| l.h.ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|l| l.e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("all levels share one grid spacing".into()));
    }
    let p = sxy / sxx;
    Ok((p, (my - p * mx).exp()))
}

/// Errors on a refinement ladder with the fitted order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub levels: Vec<Level>,
    pub p: f64,
    pub c: f64,
}

impl ConvergenceStudy {
    pub fn fit(levels: Vec<Level>) -> Result<Self> {
        for w in levels.windows(2) {
            if w[1].n <= w[0].n {
                return Err(Error::Config("cell counts must increase along the ladder".into()));
            }
        }
        let (p, c) = estimate_order(&levels)?;
        Ok(ConvergenceStudy { levels, p, c })
    }

    /// `N,h,E` rows followed by a `# p,C` comment line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,h,E\n");
        for l in &self.levels {
            let _ = writeln!(out, "{},{:?},{:?}", l.n, l.h, l.e);
        }
        let _ = writeln!(out, "# p,C = {:?},{:?}", self.p, self.c);
        out
    }
}
