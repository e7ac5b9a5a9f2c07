//! Lattice Laplacian Green's function and the fermion current.
//!
//! Forward differences `(D_k f)_l = f(head_l) - f(tail_l)` act on the links of
//! axis `k`; the Laplacian is `L = -sum_k D_k^T D_k`. `G` solves `L G = -2 pi`
//! times the identity, restricted to zero-mean vectors when `L` is singular.
//! The spatial current on the links of axis `k` is
//! `j_k = (1 / 2 pi) D_k G dn/dt`, and its backward divergence
//! `-sum_k D_k^T j_k` returns `-dn/dt` on the solvable subspace.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::LatticeGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Links only between lattice sites; the Laplacian has the constants as
    /// its kernel and `G` is the zero-mean pseudo-inverse.
    #[default]
    Open,
    /// Wrap-around links along every axis longer than one site.
    Periodic,
    /// Ghost sites held at zero outside the lattice; `L` is invertible.
    Dirichlet,
}

/// A link from `tail` to `head`; `None` is a ghost site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub tail: Option<usize>,
    pub head: Option<usize>,
}

fn axis_links(geometry: &LatticeGeometry, axis: usize, boundary: Boundary) -> Vec<Link> {
    let (rows, cols) = (geometry.rows(), geometry.cols());
    let (lines, len) = if axis == 0 { (rows, cols) } else { (cols, rows) };
    let site = |line: usize, pos: usize| {
        if axis == 0 {
            geometry.site_index(pos, line).expect("in range")
        } else {
            geometry.site_index(line, pos).expect("in range")
        }
    };
    let mut links = Vec::new();
    for line in 0..lines {
        if boundary == Boundary::Dirichlet {
            links.push(Link {
                tail: None,
                head: Some(site(line, 0)),
            });
        }
        for pos in 0..len.saturating_sub(1) {
            links.push(Link {
                tail: Some(site(line, pos)),
                head: Some(site(line, pos + 1)),
            });
        }
        match boundary {
            Boundary::Periodic if len > 1 => links.push(Link {
                tail: Some(site(line, len - 1)),
                head: Some(site(line, 0)),
            }),
            Boundary::Dirichlet => links.push(Link {
                tail: Some(site(line, len - 1)),
                head: None,
            }),
            _ => {}
        }
    }
    links
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeGreenFunction {
    pub geometry: LatticeGeometry,
    pub boundary: Boundary,
    /// Links per axis (x first).
    pub links: [Vec<Link>; 2],
    /// Row-major `G[r][y]`.
    pub values: Vec<Vec<f64>>,
}

impl LatticeGreenFunction {
    pub fn num_sites(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, r: usize, y: usize) -> f64 {
        self.values[r][y]
    }

    /// Whether `L` has the constants as a null vector.
    pub fn is_singular(&self) -> bool {
        self.boundary != Boundary::Dirichlet
    }

    /// `(L f)_r`.
    pub fn laplacian_apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        for links in &self.links {
            let grad = difference(links, f);
            divergence_into(links, &grad, &mut out);
        }
        out
    }

    /// `max |L G + 2 pi P|`, with `P` the projector onto the solvable subspace.
    pub fn residual(&self) -> f64 {
        let n = self.num_sites();
        let mut worst: f64 = 0.0;
        for y in 0..n {
            let col: Vec<f64> = (0..n).map(|r| self.values[r][y]).collect();
            let lg = self.laplacian_apply(&col);
            for (r, v) in lg.iter().enumerate() {
                let mut target = if r == y { 1.0 } else { 0.0 };
                if self.is_singular() {
                    target -= 1.0 / n as f64;
                }
                worst = worst.max((v + 2.0 * PI * target).abs());
            }
        }
        worst
    }

    pub fn symmetry_defect(&self) -> f64 {
        let n = self.num_sites();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for y in 0..r {
                worst = worst.max((self.values[r][y] - self.values[y][r]).abs());
            }
        }
        worst
    }

    /// `j_k = (1 / 2 pi) D_k G rate` on the links of each axis.
    pub fn current(&self, rate: &[f64]) -> [Vec<f64>; 2] {
        let g_rate: Vec<f64> = self
            .values
            .iter()
            .map(|row| row.iter().zip(rate).map(|(g, d)| g * d).sum())
            .collect();
        let f = |links: &[Link]| difference(links, &g_rate).into_iter().map(|x| x / (2.0 * PI)).collect();
        [f(&self.links[0]), f(&self.links[1])]
    }

    /// Backward divergence `sum_k Delta_k j_k` on the sites.
    pub fn divergence(&self, current: &[Vec<f64>; 2]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_sites()];
        for (links, j) in self.links.iter().zip(current) {
            divergence_into(links, j, &mut out);
        }
        out
    }
}

fn difference(links: &[Link], f: &[f64]) -> Vec<f64> {
    links
        .iter()
        .map(|l| l.head.map_or(0.0, |h| f[h]) - l.tail.map_or(0.0, |t| f[t]))
        .collect()
}

/// Accumulates `-D^T j`.
fn divergence_into(links: &[Link], j: &[f64], out: &mut [f64]) {
    for (l, v) in links.iter().zip(j) {
        if let Some(h) = l.head {
            out[h] -= v;
        }
        if let Some(t) = l.tail {
            out[t] += v;
        }
    }
}

/// Solves `sum_k Delta_k Delta_k G = -2 pi delta` with the given boundary.
pub fn lattice_green_function(geometry: LatticeGeometry, boundary: Boundary) -> Result<LatticeGreenFunction> {
    let n = geometry.num_sites();
    if n < 2 {
        return Err(Error::DegenerateGeometry(
            "a single site has no nontrivial Laplacian".into(),
        ));
    }
    let links = [axis_links(&geometry, 0, boundary), axis_links(&geometry, 1, boundary)];
    let mut lap = Mat::<f64>::zeros(n, n);
    for axis_links in &links {
        for l in axis_links {
            if let Some(h) = l.head {
                lap[(h, h)] -= 1.0;
            }
            if let Some(t) = l.tail {
                lap[(t, t)] -= 1.0;
            }
            if let (Some(h), Some(t)) = (l.head, l.tail) {
                lap[(h, t)] += 1.0;
                lap[(t, h)] += 1.0;
            }
        }
    }
    let singular = boundary != Boundary::Dirichlet;
    let shift = if singular { 1.0 / n as f64 } else { 0.0 };
    // For the connected singular case (L - J/N)^{-1} + J/N is the pseudo-inverse.
    let shifted = Mat::<f64>::from_fn(n, n, |i, j| lap[(i, j)] - shift);
    let lu = shifted.partial_piv_lu();
    let inv = lu.solve(Mat::<f64>::identity(n, n));
    let values: Vec<Vec<f64>> = (0..n)
        .map(|r| (0..n).map(|y| -2.0 * PI * (inv[(r, y)] + shift)).collect())
        .collect();
    if values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Solver {
            iterations: 0,
            residual: f64::NAN,
        });
    }
    Ok(LatticeGreenFunction {
        geometry,
        boundary,
        links,
        values,
    })
}

/// Density and current samples along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentField {
    pub times: Vec<f64>,
    pub dt: f64,
    /// `j_{r,0} = n_r(t)`, indexed `[t][r]`.
    pub density: Vec<Vec<f64>>,
    /// `dn_r/dt`, indexed `[t][r]`.
    pub rate: Vec<Vec<f64>>,
    /// Link currents per axis, indexed `[axis][t][link]`.
    pub spatial: [Vec<Vec<f64>>; 2],
}

impl CurrentField {
    /// `max_r |dn_r/dt + sum_k Delta_k j_{r,k}|` over all samples. For singular
    /// boundaries pass `projected = true` to remove the component along the
    /// constants, which no current can carry.
    pub fn continuity_residual(&self, green: &LatticeGreenFunction, projected: bool) -> f64 {
        let mut worst: f64 = 0.0;
        for (t, rate) in self.rate.iter().enumerate() {
            let div = green.divergence(&[self.spatial[0][t].clone(), self.spatial[1][t].clone()]);
            let res: Vec<f64> = rate.iter().zip(&div).map(|(a, b)| a + b).collect();
            let mean = if projected {
                res.iter().sum::<f64>() / res.len() as f64
            } else {
                0.0
            };
            worst = res.iter().fold(worst, |w, v| w.max((v - mean).abs()));
        }
        worst
    }
}

/// Time derivative of uniformly sampled data: central differences inside,
/// second-order one-sided differences at the ends.
pub fn time_derivative(samples: &[Vec<f64>], dt: f64) -> Result<Vec<Vec<f64>>> {
    let len = samples.len();
    if len < 3 {
        return Err(Error::invalid(format!("need at least 3 time samples, got {len}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    let width = samples[0].len();
    if let Some(bad) = samples.iter().find(|s| s.len() != width) {
        return Err(Error::DimensionMismatch {
            expected: width,
            actual: bad.len(),
        });
    }
    Ok((0..len)
        .map(|t| {
            (0..width)
                .map(|r| {
                    let x = |k: usize| samples[k][r];
                    if t == 0 {
                        (-3.0 * x(0) + 4.0 * x(1) - x(2)) / (2.0 * dt)
                    } else if t == len - 1 {
                        (3.0 * x(t) - 4.0 * x(t - 1) + x(t - 2)) / (2.0 * dt)
                    } else {
                        (x(t + 1) - x(t - 1)) / (2.0 * dt)
                    }
                })
                .collect()
        })
        .collect())
}

/// Current field of a uniformly sampled density trajectory.
pub fn fermion_current(density: &[Vec<f64>], t0: f64, dt: f64, green: &LatticeGreenFunction) -> Result<CurrentField> {
    let rate = time_derivative(density, dt)?;
    if rate[0].len() != green.num_sites() {
        return Err(Error::DimensionMismatch {
            expected: green.num_sites(),
            actual: rate[0].len(),
        });
    }
    let mut spatial: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
    for r in &rate {
        let [jx, jy] = green.current(r);
        spatial[0].push(jx);
        spatial[1].push(jy);
    }
    Ok(CurrentField {
        times: (0..density.len()).map(|k| t0 + k as f64 * dt).collect(),
        dt,
        density: density.to_vec(),
        rate,
        spatial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_and_symmetry_on_small_lattices() {
        for boundary in [Boundary::Open, Boundary::Periodic, Boundary::Dirichlet] {
            for (r, c) in [(3, 3), (1, 2), (2, 5), (1, 7)] {
                let g = lattice_green_function(LatticeGeometry::new(r, c).unwrap(), boundary).unwrap();
                assert!(g.residual() < 1e-10, "{boundary:?} {r}x{c}: {}", g.residual());
                assert!(g.symmetry_defect() < 1e-10);
            }
        }
    }

    #[test]
    fn two_site_pseudo_inverse() {
        // L = [[-1, 1], [1, -1]], L+ = L / 4.
        let g = lattice_green_function(LatticeGeometry::new(1, 2).unwrap(), Boundary::Open).unwrap();
        let want = [[PI / 2.0, -PI / 2.0], [-PI / 2.0, PI / 2.0]];
        for (r, row) in want.iter().enumerate() {
            for (y, w) in row.iter().enumerate() {
                assert!((g.get(r, y) - w).abs() < 1e-14);
            }
        }
        let cols = lattice_green_function(LatticeGeometry::new(2, 1).unwrap(), Boundary::Open).unwrap();
        assert!((cols.get(0, 1) + PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn open_green_function_has_zero_mean_columns() {
        let g = lattice_green_function(LatticeGeometry::new(2, 3).unwrap(), Boundary::Open).unwrap();
        for y in 0..6 {
            let sum: f64 = (0..6).map(|r| g.get(r, y)).sum();
            assert!(sum.abs() < 1e-12);
        }
    }

    #[test]
    fn single_site_is_rejected() {
        assert!(matches!(
            lattice_green_function(LatticeGeometry::new(1, 1).unwrap(), Boundary::Open),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn stationary_density_carries_no_current() {
        let g = lattice_green_function(LatticeGeometry::new(2, 2).unwrap(), Boundary::Open).unwrap();
        let density = vec![vec![0.3, 0.1, 0.9, 0.5]; 5];
        let field = fermion_current(&density, 0.0, 0.1, &g).unwrap();
        assert!(field.spatial.iter().flatten().flatten().all(|j| j.abs() < 1e-14));
    }

    #[test]
    fn linear_density_gives_constant_current() {
        let g = lattice_green_function(LatticeGeometry::new(2, 2).unwrap(), Boundary::Dirichlet).unwrap();
        let slope = [0.2, -0.1, 0.05, 0.3];
        let density: Vec<Vec<f64>> = (0..6)
            .map(|k| slope.iter().map(|a| 0.5 + a * k as f64 * 0.01).collect())
            .collect();
        let field = fermion_current(&density, 0.0, 0.01, &g).unwrap();
        for axis in 0..2 {
            for t in 1..6 {
                for (a, b) in field.spatial[axis][t].iter().zip(&field.spatial[axis][0]) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
        assert!(field.continuity_residual(&g, false) < 1e-12);
    }

    #[test]
    fn open_boundary_misses_only_the_mean_rate() {
        let g = lattice_green_function(LatticeGeometry::new(2, 2).unwrap(), Boundary::Open).unwrap();
        let density: Vec<Vec<f64>> = (0..4).map(|k| vec![0.1 * k as f64, 0.0, 0.0, 0.0]).collect();
        let field = fermion_current(&density, 0.0, 1.0, &g).unwrap();
        assert!(field.continuity_residual(&g, true) < 1e-12);
        assert!((field.continuity_residual(&g, false) - 0.025).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        let g = lattice_green_function(LatticeGeometry::new(1, 2).unwrap(), Boundary::Open).unwrap();
        assert!(fermion_current(&[vec![0.0, 0.0], vec![0.0, 0.0]], 0.0, 0.1, &g).is_err());
    }

    #[test]
    fn one_sided_derivative_is_second_order() {
        let dt = 0.1;
        let samples: Vec<Vec<f64>> = (0..5).map(|k| vec![(k as f64 * dt).powi(2)]).collect();
        let d = time_derivative(&samples, dt).unwrap();
        for (k, row) in d.iter().enumerate() {
            assert!((row[0] - 2.0 * k as f64 * dt).abs() < 1e-12);
        }
    }
}
