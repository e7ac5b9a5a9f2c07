//! Linear response of the Kohn-Sham system and the single-pole gap.
//!
//! Each site contributes one particle-hole transition `phi_- -> phi_+` with
//! energy `omega_r` and amplitude `Phi_r = conj(phi_+(1)) phi_-(1)`, so the KS
//! susceptibility is diagonal in the sites. The kernel is the adiabatic,
//! frequency-independent `f_c` of the correlation functional plus, optionally,
//! the exact Hartree kernel `2 s u_{r r'}`.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fermion::FermionDecomposition;
use crate::instance::MaxCutInstance;
use crate::operator::sigma_x;
use crate::oracle::{ExactOracle, DEGENERACY_TOL};
use crate::scf::KohnShamState;
use crate::xc::XcFunctional;

pub const DEFAULT_ETA: f64 = 1e-6;
/// Transitions closer than this fraction of the largest one share a block.
pub const DEFAULT_GROUP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelOptions {
    /// Include `2 s u_{r r'}` from the Hartree term.
    pub hartree: bool,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { hartree: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub site: usize,
    pub omega: f64,
    pub amplitude: Complex64,
    /// `f_- - f_+`.
    pub alpha: f64,
}

pub fn transitions(state: &KohnShamState) -> Vec<Transition> {
    state
        .orbitals
        .iter()
        .enumerate()
        .map(|(site, o)| Transition {
            site,
            omega: o.transition_energy(),
            amplitude: o.transition_amplitude(),
            alpha: 1.0,
        })
        .collect()
}

/// `f(r, r')` in energy units, acting on density changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseKernel {
    pub values: Vec<Vec<f64>>,
}

impl ResponseKernel {
    pub fn new(
        instance: &MaxCutInstance,
        state: &KohnShamState,
        xc: &XcFunctional,
        options: KernelOptions,
    ) -> Result<Self> {
        state.require_converged()?;
        let n = state.num_sites();
        if instance.num_sites() != n {
            return Err(Error::DimensionMismatch {
                expected: instance.num_sites(),
                actual: n,
            });
        }
        let mut values = xc.kernel(state.occupation.values());
        if options.hartree {
            let dec = FermionDecomposition::new(instance);
            for (r, row) in values.iter_mut().enumerate() {
                for (rp, v) in row.iter_mut().enumerate() {
                    if rp != r {
                        *v += 2.0 * state.s * dec.pair[r][rp];
                    }
                }
            }
        }
        Ok(Self { values })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            values: vec![vec![0.0; n]; n],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().flatten().all(|v| *v == 0.0)
    }

    pub fn is_local(&self) -> bool {
        self.values
            .iter()
            .enumerate()
            .all(|(r, row)| row.iter().enumerate().all(|(rp, v)| rp == r || *v == 0.0))
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.values.len() != n || self.values.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.values.len(),
            });
        }
        Ok(())
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::invalid(format!("broadening must be positive, got {eta}")));
    }
    Ok(())
}

/// `chi_{r r'}(omega)`; diagonal because every transition lives on one site.
pub fn ks_susceptibility(state: &KohnShamState, omega: f64, eta: f64) -> Result<Vec<Vec<Complex64>>> {
    state.require_converged()?;
    check_eta(eta)?;
    let n = state.num_sites();
    let mut chi = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for t in transitions(state) {
        let weight = t.amplitude.norm_sqr() * t.alpha;
        let resonant = Complex64::new(omega - t.omega, eta).inv();
        let anti = Complex64::new(omega + t.omega, eta).inv();
        chi[t.site][t.site] += weight * (resonant - anti);
    }
    Ok(chi)
}

/// Solves `(1 - chi f) n1 = chi v1`.
pub fn solve_response(
    state: &KohnShamState,
    kernel: &ResponseKernel,
    probe: &[Complex64],
    omega: f64,
    eta: f64,
) -> Result<Vec<Complex64>> {
    let n = state.num_sites();
    kernel.check(n)?;
    if probe.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: probe.len(),
        });
    }
    let chi = ks_susceptibility(state, omega, eta)?;
    let rhs: Vec<Complex64> = chi
        .iter()
        .map(|row| row.iter().zip(probe).map(|(c, v)| c * v).sum())
        .collect();
    if kernel.is_zero() {
        return Ok(rhs);
    }
    for block in casida_blocks(state, kernel, None)? {
        if let Some(hit) = block.excitations.iter().find(|x| (omega - **x).abs() < eta) {
            return Err(Error::NearResonance {
                omega,
                excitation: *hit,
            });
        }
    }
    let lhs = Mat::<Complex64>::from_fn(n, n, |r, y| {
        let chi_f: Complex64 = (0..n).map(|rp| chi[r][rp] * kernel.values[rp][y]).sum();
        let delta = if r == y { 1.0 } else { 0.0 };
        Complex64::new(delta, 0.0) - chi_f
    });
    let b = Mat::<Complex64>::from_fn(n, 1, |r, _| rhs[r]);
    let x = lhs.partial_piv_lu().solve(&b);
    let out: Vec<Complex64> = (0..n).map(|r| x[(r, 0)]).collect();
    if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NearResonance {
            omega,
            excitation: omega,
        });
    }
    Ok(out)
}

/// Single-pole correction of one (possibly degenerate) KS transition energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasidaBlock {
    pub omega_star: f64,
    /// Indices into [`transitions`], equal to the site indices.
    pub members: Vec<usize>,
    pub matrix: Vec<Vec<Complex64>>,
    /// Real parts of `A^n`, ascending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<Complex64>>,
    /// `Omega^n = omega* + Re A^n`.
    pub excitations: Vec<f64>,
    /// `min_n Re A^n`.
    pub delta_e: f64,
}

impl CasidaBlock {
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.matrix.len();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((self.matrix[i][j] - self.matrix[j][i].conj()).norm());
            }
        }
        worst
    }

    pub fn lowest_excitation(&self) -> f64 {
        self.omega_star + self.delta_e
    }
}

fn coupling(kernel: &ResponseKernel, a: &Transition, b: &Transition) -> Complex64 {
    a.alpha * a.amplitude.conj() * kernel.values[a.site][b.site] * b.amplitude
}

/// Groups transitions by `|omega_i - omega_j| < tol` (default
/// `1e-8 * max omega`) and diagonalizes `M` inside every group. Blocks come
/// out in ascending `omega*`.
pub fn casida_blocks(
    state: &KohnShamState,
    kernel: &ResponseKernel,
    group_tol: Option<f64>,
) -> Result<Vec<CasidaBlock>> {
    state.require_converged()?;
    kernel.check(state.num_sites())?;
    let mut ts = transitions(state);
    if ts.is_empty() {
        return Err(Error::invalid("no transitions to correct"));
    }
    ts.sort_by(|a, b| a.omega.total_cmp(&b.omega).then(a.site.cmp(&b.site)));
    let scale = ts.iter().map(|t| t.omega.abs()).fold(0.0, f64::max);
    let tol = group_tol.unwrap_or(DEFAULT_GROUP_TOL * scale);
    let mut groups: Vec<Vec<Transition>> = Vec::new();
    for t in ts {
        match groups.last_mut() {
            Some(g) if (t.omega - g[0].omega).abs() < tol => g.push(t),
            _ => groups.push(vec![t]),
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let d = g.len();
            let matrix: Vec<Vec<Complex64>> = (0..d)
                .map(|i| (0..d).map(|j| coupling(kernel, &g[i], &g[j])).collect())
                .collect();
            let m = Mat::<Complex64>::from_fn(d, d, |i, j| 0.5 * (matrix[i][j] + matrix[j][i].conj()));
            let evd = m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Solver {
                iterations: 0,
                residual: f64::NAN,
            })?;
            let eigenvalues: Vec<f64> = (0..d).map(|k| evd.S().column_vector()[k].re).collect();
            let eigenvectors = (0..d).map(|k| (0..d).map(|i| evd.U()[(i, k)]).collect()).collect();
            let omega_star = g[0].omega;
            Ok(CasidaBlock {
                omega_star,
                members: g.iter().map(|t| t.site).collect(),
                matrix,
                excitations: eigenvalues.iter().map(|a| omega_star + a).collect(),
                delta_e: eigenvalues[0],
                eigenvalues,
                eigenvectors,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaCheck {
    pub omega: f64,
    /// Eigenvalue of the response operator nearest to one.
    pub lambda: Complex64,
    /// `|lambda - 1|`; NaN in the pole case.
    pub deviation: f64,
    /// `omega` sits on a bare KS pole with vanishing residue, so the
    /// eigenvalue is an indeterminate `0 / 0`.
    pub pole: bool,
}

/// Eigenvalue `lambda(omega)` of `K_{t t'} = M_{t t'} / (omega - omega_t')`
/// over all transitions, in the `eta -> 0` limit.
pub fn lambda_check(state: &KohnShamState, kernel: &ResponseKernel, omega: f64) -> Result<LambdaCheck> {
    state.require_converged()?;
    kernel.check(state.num_sites())?;
    let ts = transitions(state);
    let scale = ts.iter().map(|t| t.omega.abs()).fold(1.0, f64::max);
    if ts.iter().any(|t| (omega - t.omega).abs() <= 1e-14 * scale) {
        return Ok(LambdaCheck {
            omega,
            lambda: Complex64::new(f64::NAN, f64::NAN),
            deviation: f64::NAN,
            pole: true,
        });
    }
    let d = ts.len();
    let k = Mat::<Complex64>::from_fn(d, d, |i, j| coupling(kernel, &ts[i], &ts[j]) / (omega - ts[j].omega));
    let eigs = k.eigenvalues().map_err(|_| Error::Solver {
        iterations: 0,
        residual: f64::NAN,
    })?;
    let one = Complex64::new(1.0, 0.0);
    let lambda = eigs
        .into_iter()
        .min_by(|a, b| (a - one).norm().total_cmp(&(b - one).norm()))
        .expect("at least one transition");
    Ok(LambdaCheck {
        omega,
        lambda,
        deviation: (lambda - one).norm(),
        pole: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DftGap {
    pub s: f64,
    /// Smallest KS transition `eps_1 - eps_0`.
    pub omega_min: f64,
    pub delta_e: f64,
    pub gap: f64,
    /// Degeneracy of the lowest KS transition.
    pub multiplicity: usize,
    /// The corrected gap is not positive.
    pub negative: bool,
    /// A higher KS transition was corrected below the lowest one.
    pub reordered: bool,
}

impl DftGap {
    pub fn flagged(&self) -> bool {
        self.negative || self.reordered
    }
}

/// `Delta = [eps_1 - eps_0] + delta E` from the lowest Casida block.
pub fn dft_gap(state: &KohnShamState, kernel: &ResponseKernel) -> Result<DftGap> {
    let blocks = casida_blocks(state, kernel, None)?;
    let lowest = &blocks[0];
    let gap = lowest.lowest_excitation();
    let reordered = blocks[1..].iter().any(|b| b.lowest_excitation() < gap);
    Ok(DftGap {
        s: state.s,
        omega_min: lowest.omega_star,
        delta_e: lowest.delta_e,
        gap,
        multiplicity: lowest.members.len(),
        negative: gap <= 0.0,
        reordered,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungeGrossPremise {
    pub s: f64,
    /// `M_y = <psi_0| sigma_x(y) |psi_0>` per site.
    pub values: Vec<f64>,
    /// The exact ground state is degenerate, so the value depends on the
    /// chosen ground vector.
    pub degenerate: bool,
}

impl RungeGrossPremise {
    pub fn min_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
    }
}

/// Ground-state hopping expectation `<a_y† Q_y + Q_y† a_y> = <sigma_x(y)>`; it
/// must not vanish for the ground state to be outside every number sector.
pub fn runge_gross_premise(instance: &MaxCutInstance, s: f64) -> Result<RungeGrossPremise> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("s must lie in [0, 1], got {s}")));
    }
    let oracle = ExactOracle::new(instance)?;
    let n = instance.num_sites();
    let pairs = oracle.eigenpairs(s, 2.min(1 << n))?;
    let degenerate = pairs.len() > 1 && pairs[1].value - pairs[0].value < DEGENERACY_TOL;
    let psi = &pairs[0].vector;
    let values = (0..n)
        .map(|y| Ok(sigma_x(n, y).expectation(psi)?.re))
        .collect::<Result<Vec<f64>>>()?;
    Ok(RungeGrossPremise { s, values, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fermion::FermionAlgebra;
    use crate::instance::{generate_random, LatticeGeometry, RandomInstanceParams, SignConvention};
    use crate::oracle::gap_at;
    use crate::scf::{scf_solve, ScfOptions};

    fn single(w: f64) -> MaxCutInstance {
        let g = LatticeGeometry::new(1, 1).unwrap();
        MaxCutInstance::new(g, vec![w], [], 0, SignConvention::GroundEncodesMax).unwrap()
    }

    fn pair(w: f64, node: f64) -> MaxCutInstance {
        let g = LatticeGeometry::new(1, 2).unwrap();
        MaxCutInstance::new(g, vec![node, node], [(0, 1, w)], 0, SignConvention::GroundEncodesMax).unwrap()
    }

    fn solve(inst: &MaxCutInstance, s: f64, xc: &XcFunctional) -> KohnShamState {
        scf_solve(inst, s, xc, &ScfOptions::default()).unwrap()
    }

    #[test]
    fn single_site_static_susceptibility() {
        let st = solve(&single(1.0), 0.5, &XcFunctional::None);
        // d = 0.5, b = 0.5: R = sqrt(1/16 + 1/4), n(1-n) = b^2 / (4 R^2).
        let r = (0.0625f64 + 0.25).sqrt();
        let omega = 2.0 * r;
        let weight = 0.25 / (4.0 * r * r);
        let chi = ks_susceptibility(&st, 0.0, 1e-9).unwrap();
        assert!((chi[0][0].re + 2.0 * weight / omega).abs() < 1e-8);
    }

    #[test]
    fn susceptibility_limits() {
        let st = solve(&single(1.0), 0.5, &XcFunctional::None);
        let t = transitions(&st)[0];
        let far = ks_susceptibility(&st, 1e8, 1e-6).unwrap();
        assert!(far[0][0].norm() < 1e-8);
        let eta = 1e-6;
        let res = ks_susceptibility(&st, t.omega, eta).unwrap();
        assert!((res[0][0].norm() * eta / t.amplitude.norm_sqr() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn pole_positions() {
        let g = LatticeGeometry::new(1, 3).unwrap();
        let inst = MaxCutInstance::new(g, vec![0.2, 0.9, 1.7], [], 0, SignConvention::GroundEncodesMax).unwrap();
        let st = solve(&inst, 0.5, &XcFunctional::None);
        let eta = 1e-3;
        for t in transitions(&st) {
            // Local maximum of |chi| on a fine grid around the transition.
            let grid: Vec<f64> = (-200..=200).map(|k| t.omega + k as f64 * 1e-5).collect();
            let best = grid
                .iter()
                .map(|&w| (w, ks_susceptibility(&st, w, eta).unwrap()[t.site][t.site].norm()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!((best.0 - t.omega).abs() < 2.0 * eta);
        }
    }

    #[test]
    fn kernel_free_response() {
        let inst = pair(0.6, 0.4);
        let st = solve(&inst, 0.4, &XcFunctional::None);
        let kernel = ResponseKernel::zero(2);
        let probe = [Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.5)];
        let n1 = solve_response(&st, &kernel, &probe, 0.7, 1e-3).unwrap();
        let chi = ks_susceptibility(&st, 0.7, 1e-3).unwrap();
        for r in 0..2 {
            assert!((n1[r] - chi[r][r] * probe[r]).norm() < 1e-12);
        }
        let zero = solve_response(&st, &kernel, &[Complex64::new(0.0, 0.0); 2], 0.7, 1e-3).unwrap();
        assert!(zero.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn symmetric_probe_gives_symmetric_response() {
        let inst = pair(0.6, 0.4);
        let xc = XcFunctional::local_correlation(vec![0.0, 0.0, 0.2]);
        let st = solve(&inst, 0.4, &xc);
        let kernel = ResponseKernel::new(&inst, &st, &xc, KernelOptions::default()).unwrap();
        let probe = [Complex64::new(0.1, 0.0); 2];
        let n1 = solve_response(&st, &kernel, &probe, 0.3, 1e-3).unwrap();
        assert!((n1[0] - n1[1]).norm() < 1e-12);
    }

    #[test]
    fn near_resonance_is_reported() {
        let inst = pair(0.6, 0.4);
        let xc = XcFunctional::local_correlation(vec![0.0, 0.0, 0.2]);
        let st = solve(&inst, 0.4, &xc);
        let kernel = ResponseKernel::new(&inst, &st, &xc, KernelOptions::default()).unwrap();
        let omega = casida_blocks(&st, &kernel, None).unwrap()[0].excitations[0];
        let probe = [Complex64::new(0.1, 0.0); 2];
        assert!(matches!(
            solve_response(&st, &kernel, &probe, omega, 1e-6),
            Err(Error::NearResonance { .. })
        ));
    }

    #[test]
    fn zero_kernel_leaves_transitions_alone() {
        let inst = pair(0.6, 0.4);
        let st = solve(&inst, 0.4, &XcFunctional::None);
        let kernel = ResponseKernel::new(&inst, &st, &XcFunctional::None, KernelOptions { hartree: false }).unwrap();
        for b in casida_blocks(&st, &kernel, None).unwrap() {
            assert!(b.eigenvalues.iter().all(|a| *a == 0.0));
            assert!(b.excitations.iter().all(|x| *x == b.omega_star));
        }
        let gap = dft_gap(&st, &kernel).unwrap();
        assert_eq!(gap.gap, gap.omega_min);
    }

    #[test]
    fn diagonal_kernel_on_degenerate_pair() {
        let inst = pair(0.5, 0.3);
        let st = solve(&inst, 0.5, &XcFunctional::None);
        let phi2 = transitions(&st)[0].amplitude.norm_sqr();
        let f = 0.7;
        let diag = ResponseKernel {
            values: vec![vec![f, 0.0], vec![0.0, f]],
        };
        let blocks = casida_blocks(&st, &diag, None).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].members.len(), 2);
        for a in &blocks[0].eigenvalues {
            assert!((a - f * phi2).abs() < 1e-12);
        }
        // A kernel coupling both sites equally splits the pair into {0, 2 f |Phi|^2}.
        let ones = ResponseKernel {
            values: vec![vec![f, f], vec![f, f]],
        };
        let b = &casida_blocks(&st, &ones, None).unwrap()[0];
        assert!(b.eigenvalues[0].abs() < 1e-12);
        assert!((b.eigenvalues[1] - 2.0 * f * phi2).abs() < 1e-12);
        assert!(b.hermiticity_defect() < 1e-15);
        let gap = dft_gap(&st, &ones).unwrap();
        assert!((gap.delta_e - b.eigenvalues[0]).abs() < 1e-15);
    }

    #[test]
    fn single_transition_block_is_scalar() {
        let st = solve(&single(0.8), 0.3, &XcFunctional::None);
        let kernel = ResponseKernel {
            values: vec![vec![0.4]],
        };
        let b = &casida_blocks(&st, &kernel, None).unwrap()[0];
        assert!((b.eigenvalues[0] - b.matrix[0][0].re).abs() < 1e-15);
    }

    #[test]
    fn lambda_is_one_for_local_kernels() {
        let g = LatticeGeometry::new(2, 2).unwrap();
        let inst = generate_random(g, &RandomInstanceParams::default(), 3).unwrap();
        let xc = XcFunctional::local_correlation(vec![0.0, 0.0, 0.3]);
        let st = solve(&inst, 0.5, &xc);
        let kernel = ResponseKernel::new(&inst, &st, &xc, KernelOptions { hartree: false }).unwrap();
        assert!(kernel.is_local());
        for b in casida_blocks(&st, &kernel, None).unwrap() {
            for omega in &b.excitations {
                let check = lambda_check(&st, &kernel, *omega).unwrap();
                assert!(!check.pole && check.deviation < 1e-10);
            }
        }
    }

    #[test]
    fn lambda_pole_case_is_flagged() {
        let st = solve(&single(1.0), 0.5, &XcFunctional::None);
        let kernel = ResponseKernel::zero(1);
        let b = &casida_blocks(&st, &kernel, None).unwrap()[0];
        assert!(lambda_check(&st, &kernel, b.excitations[0]).unwrap().pole);
    }

    #[test]
    fn non_interacting_dft_gap_is_exact() {
        let g = LatticeGeometry::new(2, 3).unwrap();
        let inst = generate_random(g, &RandomInstanceParams::non_interacting(), 12).unwrap();
        for s in [0.05, 0.3, 0.5, 0.77, 0.95] {
            let st = solve(&inst, s, &XcFunctional::None);
            let kernel = ResponseKernel::new(&inst, &st, &XcFunctional::None, KernelOptions::default()).unwrap();
            let gap = dft_gap(&st, &kernel).unwrap();
            let exact = gap_at(&inst, s).unwrap().gap;
            assert!((gap.gap - exact).abs() < 1e-8, "s={s}: {} vs {exact}", gap.gap);
        }
    }

    #[test]
    fn hartree_kernel_splits_a_degenerate_pair_like_the_exact_spectrum() {
        // Weak coupling between two identical sites: the first two excited
        // levels split by about 2 |M_12|, which only the Hartree kernel sees.
        let w = 0.02;
        let inst = pair(w, 0.6);
        let s = 0.5;
        let st = solve(&inst, s, &XcFunctional::None);
        let oracle = ExactOracle::new(&inst).unwrap();
        let levels = oracle.eigenpairs(s, 3).unwrap();
        let exact_split = levels[2].value - levels[1].value;
        let with = ResponseKernel::new(&inst, &st, &XcFunctional::None, KernelOptions { hartree: true }).unwrap();
        let without = ResponseKernel::new(&inst, &st, &XcFunctional::None, KernelOptions { hartree: false }).unwrap();
        let split = |k: &ResponseKernel| {
            let b = &casida_blocks(&st, k, None).unwrap()[0];
            b.excitations[1] - b.excitations[0]
        };
        assert_eq!(split(&without), 0.0);
        assert!((split(&with) - exact_split).abs() < 0.05 * exact_split);
        let exact_gap = levels[1].value - levels[0].value;
        let err_with = (dft_gap(&st, &with).unwrap().gap - exact_gap).abs();
        let err_without = (dft_gap(&st, &without).unwrap().gap - exact_gap).abs();
        assert!(err_with < err_without);
    }

    #[test]
    fn runge_gross_single_site() {
        let inst = single(1.0);
        let p = runge_gross_premise(&inst, 0.5).unwrap();
        let want = -1.0 / (1.25f64).sqrt();
        assert!((p.values[0] - want).abs() < 1e-12);
        assert!((runge_gross_premise(&inst, 0.0).unwrap().values[0] + 1.0).abs() < 1e-12);
        assert!(runge_gross_premise(&inst, 1.0).unwrap().values[0].abs() < 1e-12);
    }

    #[test]
    fn hopping_expectation_matches_fermion_operators() {
        let g = LatticeGeometry::new(2, 2).unwrap();
        let inst = generate_random(g, &RandomInstanceParams::default(), 6).unwrap();
        let p = runge_gross_premise(&inst, 0.4).unwrap();
        let alg = FermionAlgebra::new(g, 0).unwrap();
        let hf = crate::fermion::build_fermionized_hamiltonian(&inst, &alg, 0.4).unwrap();
        let fock = crate::eigen::dense_lowest(&hf, 1).unwrap().remove(0).vector;
        for y in 0..4 {
            let hop = alg.sigma_x(y).expectation(&fock).unwrap();
            assert!((hop.re - p.values[y]).abs() < 1e-10 && hop.im.abs() < 1e-12);
        }
    }
}
