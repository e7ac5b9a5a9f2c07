//! Correlation functionals on the site occupation function.
//!
//! Exchange vanishes identically for pinned, distinguishable fermions, so only
//! a correlation part `xi_c[n]` is modeled. Every variant is local: the energy
//! is a sum of per-site terms, `v_c` is its gradient and the adiabatic kernel
//! `f_c` is diagonal and frequency independent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "variant", content = "params", rename_all = "snake_case")]
pub enum XcFunctional {
    #[default]
    None,
    /// Per-site energy density `e(n) = sum_k c_k n^k`.
    LocalCorrelation { coefficients: Vec<f64> },
    /// Polynomial base plus `step * max(n - threshold, 0)`: the potential jumps
    /// by `step` when `n` crosses `threshold`.
    DiscontinuityProbe {
        #[serde(default)]
        coefficients: Vec<f64>,
        step: f64,
        threshold: f64,
    },
}

/// Wrapper matching the `{"xc": {...}}` block of a run configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XcConfig {
    #[serde(default)]
    pub xc: XcFunctional,
}

fn poly(c: &[f64], n: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ck| acc * n + ck)
}

fn poly_d1(c: &[f64], n: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, ck)| acc * n + k as f64 * ck)
}

fn poly_d2(c: &[f64], n: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(2)
        .rev()
        .fold(0.0, |acc, (k, ck)| acc * n + (k * (k - 1)) as f64 * ck)
}

impl XcFunctional {
    pub fn local_correlation(coefficients: Vec<f64>) -> Self {
        Self::LocalCorrelation { coefficients }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |c: &[f64]| {
            if c.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(Error::Validation("xc coefficients must be finite".into()))
            }
        };
        match self {
            Self::None => Ok(()),
            Self::LocalCorrelation { coefficients } => check(coefficients),
            Self::DiscontinuityProbe {
                coefficients,
                step,
                threshold,
            } => {
                check(coefficients)?;
                if !step.is_finite() || !(0.0..=1.0).contains(threshold) {
                    return Err(Error::Validation(format!(
                        "probe needs a finite step and a threshold in [0, 1], got step={step} threshold={threshold}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Self::None)
    }

    /// Whether `f_c` vanishes identically.
    pub fn kernel_is_zero(&self) -> bool {
        match self {
            Self::None => true,
            Self::LocalCorrelation { coefficients } | Self::DiscontinuityProbe { coefficients, .. } => {
                coefficients.iter().skip(2).all(|c| *c == 0.0)
            }
        }
    }

    fn coefficients(&self) -> &[f64] {
        match self {
            Self::None => &[],
            Self::LocalCorrelation { coefficients } | Self::DiscontinuityProbe { coefficients, .. } => coefficients,
        }
    }

    pub fn site_energy(&self, n: f64) -> f64 {
        let base = poly(self.coefficients(), n);
        match self {
            Self::DiscontinuityProbe { step, threshold, .. } => base + step * (n - threshold).max(0.0),
            _ => base,
        }
    }

    pub fn site_potential(&self, n: f64) -> f64 {
        let base = poly_d1(self.coefficients(), n);
        match self {
            Self::DiscontinuityProbe { step, threshold, .. } if n > *threshold => base + step,
            _ => base,
        }
    }

    pub fn site_kernel(&self, n: f64) -> f64 {
        poly_d2(self.coefficients(), n)
    }

    /// `xi_c[n]`.
    pub fn energy(&self, n: &[f64]) -> f64 {
        n.iter().map(|&x| self.site_energy(x)).sum()
    }

    /// `v_c[n](r) = d xi_c / d n_r`.
    pub fn potential(&self, n: &[f64]) -> Vec<f64> {
        n.iter().map(|&x| self.site_potential(x)).collect()
    }

    /// Diagonal of `f_c[n](r, r')`.
    pub fn kernel_diagonal(&self, n: &[f64]) -> Vec<f64> {
        n.iter().map(|&x| self.site_kernel(x)).collect()
    }

    pub fn kernel(&self, n: &[f64]) -> Vec<Vec<f64>> {
        let d = self.kernel_diagonal(n);
        (0..n.len())
            .map(|r| (0..n.len()).map(|rp| if r == rp { d[r] } else { 0.0 }).collect())
            .collect()
    }
}

/// Largest central-difference mismatch of `v_c` against `xi_c` and of `f_c`
/// against `v_c`, over the supplied occupations.
pub fn finite_difference_defects(xc: &XcFunctional, samples: &[f64], h: f64) -> (f64, f64) {
    let mut dv: f64 = 0.0;
    let mut df: f64 = 0.0;
    for &n in samples {
        let num_v = (xc.site_energy(n + h) - xc.site_energy(n - h)) / (2.0 * h);
        let num_f = (xc.site_potential(n + h) - xc.site_potential(n - h)) / (2.0 * h);
        dv = dv.max((num_v - xc.site_potential(n)).abs());
        df = df.max((num_f - xc.site_kernel(n)).abs());
    }
    (dv, df)
}
