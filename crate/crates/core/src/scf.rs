//! Ground-state Kohn-Sham solver.
//!
//! The JW fermions are pinned to their sites, so the non-interacting auxiliary
//! problem factorizes into one two-level system per site:
//!
//! ```text
//! h_r = [[0, (1-s) conj(q_r)], [(1-s) q_r, s v_ks_r]]   on (|0>_r, |1>_r)
//! ```
//!
//! with `|1>` the occupied state. The lower orbital is filled and the upper one
//! empty. Densities are iterated to self-consistency with linear mixing.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::lowest_eigenpairs;
use crate::error::{Error, Result};
use crate::fermion::{angle_table, winding_factor, FermionDecomposition};
use crate::instance::{LatticeGeometry, MaxCutInstance};
use crate::oracle::ExactOracle;
use crate::xc::XcFunctional;

/// Site occupation function `r -> n_r` with `0 <= n_r <= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SiteOccupation(Vec<f64>);

impl SiteOccupation {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((r, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::Validation(format!("occupation n[{r}] = {v} outside [0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Mean-field closure `q_r = exp(-i (2m+1) sum_{r' != r} Phi(r, r') n_r')`.
pub fn mean_field_q(n: &[f64], geometry: &LatticeGeometry, m: i64) -> Result<Vec<Complex64>> {
    if n.len() != geometry.num_sites() {
        return Err(Error::DimensionMismatch {
            expected: geometry.num_sites(),
            actual: n.len(),
        });
    }
    let angles = angle_table(geometry);
    let factor = winding_factor(m);
    Ok(angles
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let phase: f64 = row
                .iter()
                .zip(n)
                .enumerate()
                .filter(|(rp, _)| *rp != r)
                .map(|(_, (phi, nr))| phi * nr)
                .sum();
            Complex64::from_polar(1.0, -factor * phase)
        })
        .collect())
}

fn check_schedule(s: f64) -> Result<()> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::Domain(format!(
            "the Kohn-Sham potential carries a 1/s factor and needs 0 < s <= 1, got {s}"
        )));
    }
    Ok(())
}

/// `v_ks_r = v_r + 2 sum_{r' != r} u_{r r'} n_r' + v_c[n](r) / s`.
pub fn effective_potential(instance: &MaxCutInstance, n: &[f64], s: f64, xc: &XcFunctional) -> Result<Vec<f64>> {
    check_schedule(s)?;
    let dec = FermionDecomposition::new(instance);
    effective_potential_from(&dec, n, s, xc)
}

fn effective_potential_from(dec: &FermionDecomposition, n: &[f64], s: f64, xc: &XcFunctional) -> Result<Vec<f64>> {
    if n.len() != dec.onsite.len() {
        return Err(Error::DimensionMismatch {
            expected: dec.onsite.len(),
            actual: n.len(),
        });
    }
    let vc = xc.potential(n);
    Ok((0..n.len())
        .map(|r| {
            let hartree: f64 = (0..n.len())
                .filter(|&rp| rp != r)
                .map(|rp| dec.pair[r][rp] * n[rp])
                .sum();
            dec.onsite[r] + 2.0 * hartree + vc[r] / s
        })
        .collect())
}

/// Eigenpairs of one per-site Kohn-Sham block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteOrbitals {
    /// `(eps_-, eps_+)`.
    pub energies: [f64; 2],
    /// Filled orbital, components on `(|0>, |1>)`.
    pub lower: [Complex64; 2],
    /// Empty orbital.
    pub upper: [Complex64; 2],
}

impl SiteOrbitals {
    /// Diagonalizes `[[0, conj(b)], [b, d]]`.
    pub fn solve(b: Complex64, d: f64) -> Self {
        let rb = b.norm();
        let radius = (0.25 * d * d + rb * rb).sqrt();
        let (n, empty) = if radius == 0.0 {
            (0.0, 1.0)
        } else if d >= 0.0 {
            let n = rb * rb / (radius * (2.0 * radius + d));
            (n, (2.0 * radius + d) / (4.0 * radius))
        } else {
            let empty = rb * rb / (radius * (2.0 * radius - d));
            ((2.0 * radius - d) / (4.0 * radius), empty)
        };
        let phase = if rb > 0.0 {
            (b / rb).conj()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let (sn, se) = (n.sqrt(), empty.sqrt());
        Self {
            energies: [0.5 * d - radius, 0.5 * d + radius],
            lower: [phase * se, Complex64::new(-sn, 0.0)],
            upper: [phase * sn, Complex64::new(se, 0.0)],
        }
    }

    pub fn occupation(&self) -> f64 {
        self.lower[1].norm_sqr()
    }

    /// `omega = eps_+ - eps_-`.
    pub fn transition_energy(&self) -> f64 {
        self.energies[1] - self.energies[0]
    }

    /// `Phi = conj(phi_+(1)) phi_-(1)`.
    pub fn transition_amplitude(&self) -> Complex64 {
        self.upper[1].conj() * self.lower[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScfOptions {
    pub mixing: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Uniform starting occupation.
    pub initial_occupation: f64,
}

impl Default for ScfOptions {
    fn default() -> Self {
        Self {
            mixing: 0.3,
            tol: 1e-8,
            max_iter: 500,
            initial_occupation: 0.5,
        }
    }
}

impl ScfOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return Err(Error::Validation(format!(
                "mixing must lie in (0, 1], got {}",
                self.mixing
            )));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Validation(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Validation("max_iter must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.initial_occupation) {
            return Err(Error::Validation("initial occupation must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KohnShamState {
    pub s: f64,
    /// Converged SOF `n^g_r = |<1|phi_{r,-}>|^2`.
    pub occupation: SiteOccupation,
    pub q: Vec<Complex64>,
    pub v_ks: Vec<f64>,
    pub orbitals: Vec<SiteOrbitals>,
    pub iterations: usize,
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

impl KohnShamState {
    pub fn num_sites(&self) -> usize {
        self.orbitals.len()
    }

    pub fn transition_energies(&self) -> Vec<f64> {
        self.orbitals.iter().map(SiteOrbitals::transition_energy).collect()
    }

    pub fn transition_amplitudes(&self) -> Vec<Complex64> {
        self.orbitals.iter().map(SiteOrbitals::transition_amplitude).collect()
    }

    pub(crate) fn require_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::InvalidState("Kohn-Sham state is not converged".into()))
        }
    }

    /// Whether the residual fell over the final `window` iterations.
    pub fn residual_monotone_tail(&self, window: usize) -> bool {
        let h = &self.residual_history;
        let start = h.len().saturating_sub(window);
        h[start..].windows(2).all(|w| w[1] <= w[0])
    }
}

fn site_orbitals(s: f64, q: &[Complex64], v_ks: &[f64]) -> Vec<SiteOrbitals> {
    q.iter()
        .zip(v_ks)
        .map(|(qr, v)| SiteOrbitals::solve(*qr * (1.0 - s), s * v))
        .collect()
}

/// Self-consistent Kohn-Sham ground state at fixed `s` in `(0, 1)`.
pub fn scf_solve(instance: &MaxCutInstance, s: f64, xc: &XcFunctional, options: &ScfOptions) -> Result<KohnShamState> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("SCF needs 0 < s < 1, got {s}")));
    }
    options.validate()?;
    xc.validate()?;
    let geometry = instance.geometry();
    let dec = FermionDecomposition::new(instance);
    let mut n = vec![options.initial_occupation; instance.num_sites()];
    let mut history = Vec::new();
    for iter in 1..=options.max_iter {
        let q = mean_field_q(&n, &geometry, instance.jw_m())?;
        let v_ks = effective_potential_from(&dec, &n, s, xc)?;
        let orbitals = site_orbitals(s, &q, &v_ks);
        let next: Vec<f64> = orbitals.iter().map(SiteOrbitals::occupation).collect();
        let residual = next.iter().zip(&n).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        history.push(residual);
        if residual < options.tol {
            return Ok(KohnShamState {
                s,
                occupation: SiteOccupation::new(next.iter().map(|x| x.clamp(0.0, 1.0)).collect())?,
                q,
                v_ks,
                orbitals,
                iterations: iter,
                residual,
                residual_history: history,
                converged: true,
            });
        }
        for (x, y) in n.iter_mut().zip(&next) {
            *x = (1.0 - options.mixing) * *x + options.mixing * y;
        }
    }
    Err(Error::NonConvergence {
        iterations: options.max_iter,
        residual: history.last().copied().unwrap_or(f64::NAN),
        last_iterate: n,
    })
}

/// `E[n] = T'[n] + sum s v_r n_r + xi_H[n] + xi_c[n]` plus the identity term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyDecomposition {
    pub kinetic: f64,
    pub external: f64,
    pub hartree: f64,
    pub correlation: f64,
    /// `s` times the identity coefficient of the number-operator form.
    pub constant: f64,
    pub total: f64,
}

impl EnergyDecomposition {
    fn assemble(kinetic: f64, external: f64, hartree: f64, correlation: f64, constant: f64) -> Self {
        Self {
            kinetic,
            external,
            hartree,
            correlation,
            constant,
            total: kinetic + external + hartree + correlation + constant,
        }
    }
}

fn potential_terms(dec: &FermionDecomposition, n: &[f64], s: f64) -> (f64, f64, f64) {
    let external = s * dec.onsite.iter().zip(n).map(|(v, x)| v * x).sum::<f64>();
    let mut hartree = 0.0;
    for r in 0..n.len() {
        for rp in 0..n.len() {
            if rp != r {
                hartree += dec.pair[r][rp] * n[r] * n[rp];
            }
        }
    }
    (external, s * hartree, s * dec.constant)
}

/// Energy decomposition of a converged state; the kinetic part is read off
/// the filled orbitals.
pub fn energy_functional(
    instance: &MaxCutInstance,
    state: &KohnShamState,
    xc: &XcFunctional,
) -> Result<EnergyDecomposition> {
    state.require_converged()?;
    if state.num_sites() != instance.num_sites() {
        return Err(Error::DimensionMismatch {
            expected: instance.num_sites(),
            actual: state.num_sites(),
        });
    }
    let s = state.s;
    let dec = FermionDecomposition::new(instance);
    let kinetic: f64 = state
        .orbitals
        .iter()
        .zip(&state.q)
        .map(|(o, q)| 2.0 * (1.0 - s) * (o.lower[1].conj() * q * o.lower[0]).re)
        .sum();
    let n = state.occupation.values();
    let (external, hartree, constant) = potential_terms(&dec, n, s);
    Ok(EnergyDecomposition::assemble(
        kinetic,
        external,
        hartree,
        xc.energy(n),
        constant,
    ))
}

/// Functional evaluated at an arbitrary SOF, with each site's orbital chosen to
/// minimize the kinetic term under the density constraint:
/// `T'[n] = -2 (1 - s) sum_r sqrt(n_r (1 - n_r))`.
pub fn energy_at_density(
    instance: &MaxCutInstance,
    n: &SiteOccupation,
    s: f64,
    xc: &XcFunctional,
) -> Result<EnergyDecomposition> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("s must lie in [0, 1], got {s}")));
    }
    if n.len() != instance.num_sites() {
        return Err(Error::DimensionMismatch {
            expected: instance.num_sites(),
            actual: n.len(),
        });
    }
    let dec = FermionDecomposition::new(instance);
    let n = n.values();
    let kinetic = -2.0 * (1.0 - s) * n.iter().map(|x| (x * (1.0 - x)).sqrt()).sum::<f64>();
    let (external, hartree, constant) = potential_terms(&dec, n, s);
    Ok(EnergyDecomposition::assemble(
        kinetic,
        external,
        hartree,
        xc.energy(n),
        constant,
    ))
}

/// `<psi_0|Q_r|psi_0>` in the exact ground state, for comparison with the
/// mean-field closure.
pub fn operator_q_expectation(instance: &MaxCutInstance, s: f64) -> Result<Vec<Complex64>> {
    let oracle = ExactOracle::new(instance)?;
    let h = oracle.hamiltonian().at(s)?;
    let ground = lowest_eigenpairs(&h, 1, &Default::default())?.remove(0).vector;
    let n = instance.num_sites();
    let dim = ground.len();
    let angles = angle_table(&instance.geometry());
    let factor = winding_factor(instance.jw_m());
    Ok((0..n)
        .map(|r| {
            ground
                .iter()
                .enumerate()
                .map(|(idx, amp)| {
                    // Qubit bit 0 is an occupied site.
                    let fock = idx ^ (dim - 1);
                    let phase: f64 = (0..n)
                        .filter(|&rp| (fock >> (n - 1 - rp)) & 1 == 1)
                        .map(|rp| angles[r][rp])
                        .sum();
                    Complex64::from_polar(amp.norm_sqr(), -factor * phase)
                })
                .sum()
        })
        .collect())
}
