//! Schrödinger propagation of the annealing schedule.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{lowest_eigenpairs, EigenOptions};
use crate::error::{Error, Result};
use crate::instance::MaxCutInstance;
use crate::io::write_atomic;
use crate::operator::{check_cap, problem_diagonal, AnnealingHamiltonian, DEFAULT_HILBERT_CAP};
use crate::oracle::DEGENERACY_TOL;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const PARALLEL_DIM: usize = 1 << 14;
/// Largest tolerated `| ||psi|| - 1 |` at a renormalization point.
pub const MAX_NORM_DRIFT: f64 = 1e-6;
pub const RENORMALIZE_EVERY: usize = 1000;
/// Cap on `steps * 2^N`, the amplitude updates one propagation may perform.
pub const MAX_STEP_AMPLITUDES: usize = 1 << 34;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvolutionOptions {
    /// Defaults to `min(1e-2, T / 1e4)`.
    pub dt: Option<f64>,
    pub integrator: Integrator,
    /// Record `step, t, norm, p_inst` every this many steps.
    pub trace_every: Option<usize>,
    /// Record site occupations every this many steps.
    pub density_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub t: f64,
    pub norm: f64,
    /// Weight of the state in the instantaneous ground space.
    pub p_inst: f64,
}

/// Occupations `n_r(t) = <a_r† a_r>` on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTrajectory {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub state: Vec<Complex64>,
    pub runtime: f64,
    pub dt: f64,
    pub steps: usize,
    pub success_probability: f64,
    /// Largest norm drift seen at a renormalization point.
    pub norm_drift: f64,
    pub trace: Vec<TraceRow>,
    pub density: Option<DensityTrajectory>,
}

/// `H(s) psi` without materializing the operator: bit flips for the driver,
/// a pointwise product for the diagonal problem term.
struct MatrixFree {
    n: usize,
    diag: Vec<f64>,
}

impl MatrixFree {
    fn apply(&self, s: f64, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.n;
        let row = |i: usize| {
            let mut acc = ZERO;
            for r in 0..n {
                acc += x[i ^ (1 << (n - 1 - r))];
            }
            acc * (1.0 - s) + x[i] * (s * self.diag[i])
        };
        if x.len() >= PARALLEL_DIM {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        } else {
            y.iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        }
    }

    /// `-i H(s) x`.
    fn rhs(&self, s: f64, x: &[Complex64], y: &mut [Complex64]) {
        self.apply(s, x, y);
        for v in y.iter_mut() {
            *v = Complex64::new(v.im, -v.re);
        }
    }
}

fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
}

/// Ground state of the driver, `(|0> - |1>)/sqrt 2` on every qubit.
pub fn driver_ground_state(n: usize) -> Vec<Complex64> {
    let dim = 1usize << n;
    let amp = (dim as f64).sqrt().recip();
    (0..dim)
        .map(|i| {
            let sign = if i.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            Complex64::new(sign * amp, 0.0)
        })
        .collect()
}

/// Basis strings of the ground space of `H_P`: the maximizers under the
/// default convention.
pub fn success_set(instance: &MaxCutInstance) -> Vec<usize> {
    let diag = problem_diagonal(instance);
    let lo = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = diag.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    diag.iter()
        .enumerate()
        .filter(|(_, v)| **v - lo <= 1e-12 * scale)
        .map(|(i, _)| i)
        .collect()
}

pub fn success_probability(state: &[Complex64], instance: &MaxCutInstance) -> Result<f64> {
    let dim = 1usize << instance.num_sites();
    if state.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: state.len(),
        });
    }
    let p: f64 = success_set(instance).iter().map(|&i| state[i].norm_sqr()).sum();
    Ok(p.clamp(0.0, 1.0))
}

/// `c M / Delta^2`.
pub fn runtime_bound(m: f64, delta: f64, c: f64) -> Result<f64> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::DegenerateGap(format!(
            "runtime bound needs a positive gap, got {delta}"
        )));
    }
    if m.is_nan() || m < 0.0 || c.is_nan() || c <= 0.0 {
        return Err(Error::invalid(format!("need M >= 0 and c > 0, got M={m} c={c}")));
    }
    Ok(c * m / (delta * delta))
}

/// Occupations from a qubit state: site `r` is occupied when its bit is 0.
pub fn site_occupations(state: &[Complex64], n: usize) -> Vec<f64> {
    let mut occ = vec![0.0; n];
    for (i, a) in state.iter().enumerate() {
        let w = a.norm_sqr();
        for (r, o) in occ.iter_mut().enumerate() {
            if (i >> (n - 1 - r)) & 1 == 0 {
                *o += w;
            }
        }
    }
    occ
}

fn ground_space_weight(hamiltonian: &AnnealingHamiltonian, s: f64, state: &[Complex64]) -> Result<f64> {
    let h = hamiltonian.at(s)?;
    let k = h.dim().min(8);
    let pairs = lowest_eigenpairs(&h, k, &EigenOptions::default())?;
    let e0 = pairs[0].value;
    let nrm2: f64 = state.iter().map(Complex64::norm_sqr).sum();
    Ok(pairs
        .iter()
        .take_while(|p| p.value - e0 < DEGENERACY_TOL)
        .map(|p| crate::eigen::dot(&p.vector, state).norm_sqr())
        .sum::<f64>()
        / nrm2)
}

/// Integrates `i dpsi/dt = H(t / T) psi` from the driver ground state.
pub fn propagate(instance: &MaxCutInstance, runtime: f64, options: &EvolutionOptions) -> Result<EvolutionResult> {
    let n = instance.num_sites();
    check_cap(n, DEFAULT_HILBERT_CAP)?;
    if !(runtime > 0.0 && runtime.is_finite()) {
        return Err(Error::invalid(format!("runtime must be positive, got {runtime}")));
    }
    let requested = options.dt.unwrap_or_else(|| (runtime / 1e4).min(1e-2));
    if requested.is_nan() || requested <= 0.0 || requested > runtime / 100.0 * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "step {requested} must be positive and at most T/100 = {}",
            runtime / 100.0
        )));
    }
    let steps_f = (runtime / requested).ceil();
    let work = steps_f * (1usize << n) as f64;
    if work > MAX_STEP_AMPLITUDES as f64 {
        return Err(Error::ResourceLimit {
            what: "time steps x amplitudes",
            requested: work.min(usize::MAX as f64) as usize,
            cap: MAX_STEP_AMPLITUDES,
        });
    }
    let steps = steps_f as usize;
    let dt = runtime / steps as f64;
    let op = MatrixFree {
        n,
        diag: problem_diagonal(instance),
    };
    let hamiltonian = if options.trace_every.is_some() {
        Some(AnnealingHamiltonian::new(instance)?)
    } else {
        None
    };
    let dim = 1usize << n;
    let mut psi = driver_ground_state(n);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![ZERO; dim],
        vec![ZERO; dim],
        vec![ZERO; dim],
        vec![ZERO; dim],
        vec![ZERO; dim],
    );
    let mut trace = Vec::new();
    let mut density = options.density_every.map(|every| DensityTrajectory {
        t0: 0.0,
        dt: dt * every as f64,
        samples: vec![site_occupations(&psi, n)],
    });
    let mut drift: f64 = 0.0;
    let record = |step: usize, psi: &[Complex64], trace: &mut Vec<TraceRow>| -> Result<()> {
        if let (Some(every), Some(h)) = (options.trace_every, &hamiltonian) {
            if every > 0 && (step.is_multiple_of(every) || step == steps) {
                let t = step as f64 * dt;
                trace.push(TraceRow {
                    step,
                    t,
                    norm: norm(psi),
                    p_inst: ground_space_weight(h, (t / runtime).min(1.0), psi)?,
                });
            }
        }
        Ok(())
    };
    record(0, &psi, &mut trace)?;
    for step in 1..=steps {
        let t = (step - 1) as f64 * dt;
        let (s0, s_half, s1) = (t / runtime, (t + 0.5 * dt) / runtime, ((t + dt) / runtime).min(1.0));
        op.rhs(s0, &psi, &mut k1);
        for i in 0..dim {
            tmp[i] = psi[i] + k1[i] * (0.5 * dt);
        }
        op.rhs(s_half, &tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = psi[i] + k2[i] * (0.5 * dt);
        }
        op.rhs(s_half, &tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = psi[i] + k3[i] * dt;
        }
        op.rhs(s1, &tmp, &mut k4);
        for i in 0..dim {
            psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }
        if step.is_multiple_of(RENORMALIZE_EVERY) || step == steps {
            let nrm = norm(&psi);
            let d = (nrm - 1.0).abs();
            drift = drift.max(d);
            if d > MAX_NORM_DRIFT {
                return Err(Error::StepSize { drift: d, dt });
            }
            psi.iter_mut().for_each(|v| *v /= nrm);
        }
        if let (Some(every), Some(traj)) = (options.density_every, density.as_mut()) {
            if every > 0 && step.is_multiple_of(every) {
                traj.samples.push(site_occupations(&psi, n));
            }
        }
        record(step, &psi, &mut trace)?;
    }
    let success_probability = success_probability(&psi, instance)?;
    Ok(EvolutionResult {
        state: psi,
        runtime,
        dt,
        steps,
        success_probability,
        norm_drift: drift,
        trace,
        density,
    })
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("step,t,norm,p_inst\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.step, r.t, r.norm, r.p_inst);
    }
    out
}

pub fn write_trace_csv(rows: &[TraceRow], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), trace_csv(rows).as_bytes())
}
