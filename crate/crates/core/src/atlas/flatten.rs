use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{cross3, dist3, dot3, norm3, orient2, sub3, Vec2};

use super::cut::Chart;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flattener {
    Tutte,
    Lscm,
}

impl std::str::FromStr for Flattener {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tutte" => Ok(Flattener::Tutte),
            "lscm" => Ok(Flattener::Lscm),
            other => Err(Error::Config(format!("unknown flattener {other:?}"))),
        }
    }
}

impl std::fmt::Display for Flattener {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Flattener::Tutte => "tutte",
            Flattener::Lscm => "lscm",
        })
    }
}

/// Per-vertex UVs for one chart.
#[derive(Clone, Debug, PartialEq)]
pub struct UvChart {
    pub chart: usize,
    pub uv: Vec<Vec2>,
    pub method: Flattener,
    /// True when LSCM was requested but Tutte was used.
    pub fell_back: bool,
}

impl UvChart {
    /// Triangles with non-positive signed UV area.
    pub fn flipped(&self, chart: &Chart) -> usize {
        chart
            .mesh
            .faces()
            .iter()
            .filter(|&&[a, b, c]| orient2(self.uv[a], self.uv[b], self.uv[c]) <= 0.0)
            .count()
    }

    pub fn uv_area(&self, chart: &Chart) -> f64 {
        chart
            .mesh
            .faces()
            .iter()
            .map(|&[a, b, c]| 0.5 * orient2(self.uv[a], self.uv[b], self.uv[c]))
            .sum()
    }
}

fn require_disk(chart: &Chart) -> Result<&[usize]> {
    if !chart.is_disk() {
        return Err(Error::NonDisk {
            chart: chart.index,
            euler: chart.euler,
            boundaries: chart.boundary_loops.len(),
        });
    }
    Ok(&chart.boundary_loops[0])
}

fn cholesky_solve(n: usize, coo: &CooMatrix<f64>, rhs: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let csc = CscMatrix::from(coo);
    let chol = CscCholesky::factor(&csc).map_err(|e| Error::Singular(format!("{what}: {e}")))?;
    let x = chol.solve(&rhs);
    if x.nrows() != n || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular(format!("{what}: non-finite solution")));
    }
    Ok(x)
}

/// Convex-boundary embedding: boundary on the unit circle by arc length,
/// interior vertices at the average of their neighbors.
pub fn flatten_tutte(chart: &Chart) -> Result<UvChart> {
    let boundary = require_disk(chart)?;
    let mesh = &chart.mesh;
    let n = mesh.vertex_count();
    let mut cumulative = Vec::with_capacity(boundary.len());
    let mut total = 0.0;
    for (i, &v) in boundary.iter().enumerate() {
        cumulative.push(total);
        let w = boundary[(i + 1) % boundary.len()];
        total += dist3(mesh.position(v), mesh.position(w));
    }
    if total <= 0.0 {
        return Err(Error::Degenerate(format!(
            "chart {} has zero perimeter",
            chart.index
        )));
    }
    let mut uv = vec![[0.0; 2]; n];
    let mut on_boundary = vec![false; n];
    for (&v, &s) in boundary.iter().zip(&cumulative) {
        let t = std::f64::consts::TAU * s / total;
        uv[v] = [t.cos(), t.sin()];
        on_boundary[v] = true;
    }

    let mut neighbors = vec![std::collections::BTreeSet::new(); n];
    for &[a, b, c] in mesh.faces() {
        for (p, q) in [(a, b), (b, c), (c, a)] {
            neighbors[p].insert(q);
            neighbors[q].insert(p);
        }
    }
    let interior: Vec<usize> = (0..n).filter(|&v| !on_boundary[v]).collect();
    if !interior.is_empty() {
        let mut slot = vec![usize::MAX; n];
        for (i, &v) in interior.iter().enumerate() {
            slot[v] = i;
        }
        let m = interior.len();
        let mut coo = CooMatrix::new(m, m);
        let mut rhs = DMatrix::zeros(m, 2);
        for (i, &v) in interior.iter().enumerate() {
            coo.push(i, i, neighbors[v].len() as f64);
            for &u in &neighbors[v] {
                if on_boundary[u] {
                    rhs[(i, 0)] += uv[u][0];
                    rhs[(i, 1)] += uv[u][1];
                } else {
                    coo.push(i, slot[u], -1.0);
                }
            }
        }
        let x = cholesky_solve(m, &coo, rhs, "tutte laplacian")?;
        for (i, &v) in interior.iter().enumerate() {
            uv[v] = [x[(i, 0)], x[(i, 1)]];
        }
    }
    Ok(UvChart {
        chart: chart.index,
        uv,
        method: Flattener::Tutte,
        fell_back: false,
    })
}

/// Least-squares conformal map with the two most distant boundary vertices
/// pinned at their 3D separation.
pub fn flatten_lscm(chart: &Chart) -> Result<UvChart> {
    let boundary = require_disk(chart)?;
    let mesh = &chart.mesh;
    let n = mesh.vertex_count();
    if n < 3 {
        return Err(Error::Degenerate(format!(
            "chart {} has {n} vertices",
            chart.index
        )));
    }
    let (mut pa, mut pb, mut best) = (boundary[0], boundary[1 % boundary.len()], -1.0);
    for (i, &a) in boundary.iter().enumerate() {
        for &b in &boundary[i + 1..] {
            let d = dist3(mesh.position(a), mesh.position(b));
            if d > best {
                (pa, pb, best) = (a, b, d);
            }
        }
    }
    if best <= 0.0 {
        return Err(Error::Degenerate(format!(
            "chart {} has coincident boundary",
            chart.index
        )));
    }
    // unknowns: u of every vertex then v of every vertex, pins removed
    let pinned = |k: usize| k % n == pa || k % n == pb;
    let pin_value = |k: usize| -> f64 {
        if k == pb {
            best
        } else {
            0.0
        }
    };
    let mut slot = vec![usize::MAX; 2 * n];
    let mut m = 0;
    for (k, s) in slot.iter_mut().enumerate() {
        if !pinned(k) {
            *s = m;
            m += 1;
        }
    }
    if m == 0 {
        let mut uv = vec![[0.0; 2]; n];
        uv[pb] = [best, 0.0];
        return Ok(UvChart {
            chart: chart.index,
            uv,
            method: Flattener::Lscm,
            fell_back: false,
        });
    }

    let mut coo = CooMatrix::new(m, m);
    let mut rhs = DMatrix::zeros(m, 1);
    for &tri in mesh.faces() {
        let [p0, p1, p2] = tri.map(|v| mesh.position(v));
        let e1 = sub3(p1, p0);
        let e2 = sub3(p2, p0);
        let l1 = norm3(e1);
        let twice_area = norm3(cross3(e1, e2));
        if l1 <= 0.0 || twice_area <= 1e-300 {
            continue;
        }
        let local = [[0.0, 0.0], [l1, 0.0], [dot3(e1, e2) / l1, twice_area / l1]];
        let w = 1.0 / (0.5 * twice_area).sqrt();
        // two real rows of sum_j (p_{j+2} - p_{j+1}) * (u_j + i v_j)
        let mut rows: [Vec<(usize, f64)>; 2] = [Vec::with_capacity(6), Vec::with_capacity(6)];
        for j in 0..3 {
            let d = [
                local[(j + 2) % 3][0] - local[(j + 1) % 3][0],
                local[(j + 2) % 3][1] - local[(j + 1) % 3][1],
            ];
            let (u, v) = (tri[j], n + tri[j]);
            rows[0].push((u, w * d[0]));
            rows[0].push((v, -w * d[1]));
            rows[1].push((u, w * d[1]));
            rows[1].push((v, w * d[0]));
        }
        for row in &rows {
            let fixed: f64 = row
                .iter()
                .filter(|(k, _)| pinned(*k))
                .map(|&(k, c)| c * if k < n { pin_value(k) } else { 0.0 })
                .sum();
            for &(i, ci) in row.iter().filter(|(k, _)| !pinned(*k)) {
                rhs[(slot[i], 0)] -= ci * fixed;
                for &(j, cj) in row.iter().filter(|(k, _)| !pinned(*k)) {
                    coo.push(slot[i], slot[j], ci * cj);
                }
            }
        }
    }
    let x = cholesky_solve(m, &coo, rhs, "lscm normal equations")?;
    let value = |k: usize| {
        if pinned(k) {
            if k < n {
                pin_value(k)
            } else {
                0.0
            }
        } else {
            x[(slot[k], 0)]
        }
    };
    let uv = (0..n).map(|v| [value(v), value(n + v)]).collect();
    Ok(UvChart {
        chart: chart.index,
        uv,
        method: Flattener::Lscm,
        fell_back: false,
    })
}

/// Flattens with the requested method. LSCM falls back to Tutte when its
/// solve fails or it folds any triangle.
pub fn flatten_chart(chart: &Chart, method: Flattener) -> Result<UvChart> {
    match method {
        Flattener::Tutte => flatten_tutte(chart),
        Flattener::Lscm => match flatten_lscm(chart) {
            Ok(uv) if uv.flipped(chart) == 0 => Ok(uv),
            Ok(_) | Err(Error::Singular(_)) | Err(Error::Degenerate(_)) => {
                log::debug!("chart {}: lscm unusable, using tutte", chart.index);
                let mut uv = flatten_tutte(chart)?;
                uv.fell_back = true;
                Ok(uv)
            }
            Err(e) => Err(e),
        },
    }
}
