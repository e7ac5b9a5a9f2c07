//! Exact reference gaps by diagonalizing `H(s)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{dot, lowest_eigenpairs, EigenOptions, EigenPair};
use crate::error::{Error, Result};
use crate::instance::MaxCutInstance;
use crate::operator::AnnealingHamiltonian;

/// Gaps below this are reported as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMethod {
    Exact,
    Dft,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub s: f64,
    pub gap: f64,
    pub e0: f64,
    pub e1: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCurve {
    pub method: GapMethod,
    pub points: Vec<GapPoint>,
    pub min_gap: f64,
    pub s_star: f64,
}

impl GapCurve {
    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.s).collect()
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.gap).collect()
    }
}

/// Exact oracle bound to one instance.
#[derive(Debug, Clone)]
pub struct ExactOracle {
    hamiltonian: AnnealingHamiltonian,
    pub eigen: EigenOptions,
}

/// Uniform grid of `points` values on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| {
                if i == points - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (points - 1) as f64
                }
            })
            .collect(),
    }
}

pub(crate) fn validate_grid(grid: &[f64], lo: f64, hi: f64) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("grid is empty"));
    }
    if let Some(s) = grid.iter().find(|s| !(lo..=hi).contains(*s)) {
        return Err(Error::Domain(format!("grid point {s} outside [{lo}, {hi}]")));
    }
    Ok(())
}

/// `(min, argmin)` with ties broken toward the smaller `s`.
pub(crate) fn minimum_of<'a>(points: impl Iterator<Item = (&'a f64, &'a f64)>) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for (&s, &gap) in points {
        best = match best {
            None => Some((gap, s)),
            Some((g, bs)) if gap < g || (gap == g && s < bs) => Some((gap, s)),
            keep => keep,
        };
    }
    best
}

impl ExactOracle {
    pub fn new(instance: &MaxCutInstance) -> Result<Self> {
        Ok(Self {
            hamiltonian: AnnealingHamiltonian::new(instance)?,
            eigen: EigenOptions::default(),
        })
    }

    pub fn with_options(mut self, eigen: EigenOptions) -> Self {
        self.eigen = eigen;
        self
    }

    pub fn hamiltonian(&self) -> &AnnealingHamiltonian {
        &self.hamiltonian
    }

    pub fn eigenpairs(&self, s: f64, k: usize) -> Result<Vec<EigenPair>> {
        let h = self.hamiltonian.at(s)?;
        lowest_eigenpairs(&h, k, &self.eigen)
    }

    pub fn gap_at(&self, s: f64) -> Result<GapPoint> {
        if self.hamiltonian.problem.dim() < 2 {
            return Err(Error::invalid("gap needs at least two levels"));
        }
        let pairs = self.eigenpairs(s, 2)?;
        let gap = (pairs[1].value - pairs[0].value).max(0.0);
        Ok(GapPoint {
            s,
            gap,
            e0: pairs[0].value,
            e1: pairs[1].value,
            degenerate: gap < DEGENERACY_TOL,
        })
    }

    pub fn gap_curve(&self, grid: &[f64]) -> Result<GapCurve> {
        validate_grid(grid, 0.0, 1.0)?;
        let points = grid.par_iter().map(|&s| self.gap_at(s)).collect::<Result<Vec<_>>>()?;
        let (min_gap, s_star) = minimum_of(points.iter().map(|p| (&p.s, &p.gap))).expect("grid is nonempty");
        Ok(GapCurve {
            method: GapMethod::Exact,
            points,
            min_gap,
            s_star,
        })
    }

    /// Golden-section search for the gap minimum between the grid neighbours of
    /// the curve's minimizer. Returns `(s, gap)`.
    pub fn refine_minimum(&self, curve: &GapCurve, iterations: usize) -> Result<(f64, f64)> {
        let grid = curve.grid();
        let i = grid
            .iter()
            .position(|&s| s == curve.s_star)
            .ok_or_else(|| Error::invalid("s* not on the curve grid"))?;
        let mut a = grid[i.saturating_sub(1)];
        let mut b = grid[(i + 1).min(grid.len() - 1)];
        if a == b {
            return Ok((curve.s_star, curve.min_gap));
        }
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let mut fc = self.gap_at(c)?.gap;
        let mut fd = self.gap_at(d)?.gap;
        for _ in 0..iterations {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = self.gap_at(c)?.gap;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = self.gap_at(d)?.gap;
            }
        }
        let candidates = [(curve.s_star, curve.min_gap), (c, fc), (d, fd)];
        Ok(candidates.into_iter().fold(
            (curve.s_star, curve.min_gap),
            |best, cand| if cand.1 < best.1 { cand } else { best },
        ))
    }

    /// `M = max_s |<E_1(s)| dH/ds |E_0(s)>|` over the grid.
    pub fn adiabatic_numerator(&self, grid: &[f64]) -> Result<AdiabaticNumerator> {
        validate_grid(grid, 0.0, 1.0)?;
        let dh = self.hamiltonian.derivative();
        let dim = dh.dim();
        let per_point = grid
            .par_iter()
            .map(|&s| -> Result<Option<f64>> {
                let mut k = 3.min(dim);
                loop {
                    let pairs = self.eigenpairs(s, k)?;
                    if pairs[1].value - pairs[0].value < DEGENERACY_TOL {
                        return Ok(None);
                    }
                    let e1 = pairs[1].value;
                    let top_degenerate = pairs[k - 1].value - e1 < DEGENERACY_TOL;
                    if top_degenerate && k < dim {
                        k = (2 * k).min(dim);
                        continue;
                    }
                    let dh_e0 = dh.apply(&pairs[0].vector)?;
                    // Max over unit vectors in the degenerate E1 subspace is the
                    // norm of the projection.
                    let weight: f64 = pairs[1..]
                        .iter()
                        .take_while(|p| p.value - e1 < DEGENERACY_TOL)
                        .map(|p| dot(&p.vector, &dh_e0).norm_sqr())
                        .sum();
                    return Ok(Some(weight.sqrt()));
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut value = 0.0;
        let mut s_at_max = None;
        let mut skipped = Vec::new();
        for (&s, m) in grid.iter().zip(per_point) {
            match m {
                Some(m) if m > value || s_at_max.is_none() => {
                    value = m;
                    s_at_max = Some(s);
                }
                Some(_) => {}
                None => skipped.push(s),
            }
        }
        Ok(AdiabaticNumerator {
            value,
            s_at_max,
            skipped,
            grid_points: grid.len(),
        })
    }

    /// `<psi|H(s)|psi>` for a normalized state.
    pub fn rayleigh_quotient(&self, s: f64, psi: &[Complex64]) -> Result<f64> {
        Ok(self.hamiltonian.at(s)?.expectation(psi)?.re)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticNumerator {
    pub value: f64,
    pub s_at_max: Option<f64>,
    /// Grid points with a degenerate ground level, excluded from the maximum.
    pub skipped: Vec<f64>,
    pub grid_points: usize,
}

pub fn gap_at(instance: &MaxCutInstance, s: f64) -> Result<GapPoint> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("s must lie in [0, 1], got {s}")));
    }
    ExactOracle::new(instance)?.gap_at(s)
}

pub fn exact_gap_curve(instance: &MaxCutInstance, grid: &[f64]) -> Result<GapCurve> {
    ExactOracle::new(instance)?.gap_curve(grid)
}

pub fn adiabatic_numerator(instance: &MaxCutInstance, grid: &[f64]) -> Result<AdiabaticNumerator> {
    ExactOracle::new(instance)?.adiabatic_numerator(grid)
}
