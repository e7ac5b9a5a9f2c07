//! Sparse Hermitian operators on the `2^N` qubit space and the annealing
//! Hamiltonians `H_0`, `H_P` and `H(s) = (1 - s) H_0 + s H_P`.
//!
//! Basis states are ordered by the integer value of the bit string with site 0
//! as the most significant bit. `sigma_z |0> = +|0>`, `sigma_z |1> = -|1>`.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::instance::{MaxCutInstance, SignConvention};

/// Default cap on the number of qubits for any explicit operator.
pub const DEFAULT_HILBERT_CAP: usize = 20;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Compressed-sparse-row matrix over the qubit (or Fock) space.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitOperator {
    n_qubits: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

pub(crate) fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap || n >= usize::BITS as usize {
        return Err(Error::ResourceLimit {
            what: "qubits",
            requested: n,
            cap,
        });
    }
    Ok(())
}

impl QubitOperator {
    pub fn zero(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            row_ptr: vec![0; (1 << n_qubits) + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Builds an operator from `(row, col, value)` triplets; duplicates are summed
    /// and exact zeros dropped.
    pub fn from_triplets(n_qubits: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        let dim = 1usize << n_qubits;
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside dimension {dim}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                cols.push(c);
                vals.push(v);
                last = Some((r, c));
            }
        }
        let mut keep_cols = Vec::with_capacity(cols.len());
        let mut keep_vals = Vec::with_capacity(vals.len());
        for ((r, c), v) in rows.into_iter().zip(cols).zip(vals) {
            if v != ZERO {
                row_ptr[r + 1] += 1;
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n_qubits,
            row_ptr,
            cols: keep_cols,
            vals: keep_vals,
        }
    }

    pub fn from_diagonal(n_qubits: usize, diag: &[f64]) -> Self {
        assert_eq!(diag.len(), 1 << n_qubits);
        let triplets = diag
            .iter()
            .enumerate()
            .map(|(i, &d)| (i, i, Complex64::new(d, 0.0)))
            .collect();
        Self::from_triplets(n_qubits, triplets)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i).re).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim()).all(|r| self.row(r).all(|(c, _)| c == r))
    }

    /// True when every stored entry has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.vals.iter().all(|v| v.im == 0.0)
    }

    /// `max |H - H^dagger|` over stored entries.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim() {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    /// `y = H x` without allocating.
    pub fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        let dim = self.dim();
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: x.len(),
            });
        }
        if y.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: y.len(),
            });
        }
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
        Ok(())
    }

    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut y = vec![ZERO; self.dim()];
        self.apply_into(x, &mut y)?;
        Ok(y)
    }

    /// `<x|H|x>`.
    pub fn expectation(&self, x: &[Complex64]) -> Result<Complex64> {
        let hx = self.apply(x)?;
        Ok(x.iter().zip(&hx).map(|(a, b)| a.conj() * b).sum())
    }

    /// `a * self + b * other`.
    pub fn linear_combination(&self, a: f64, other: &QubitOperator, b: f64) -> Result<QubitOperator> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.dim() {
            triplets.extend(self.row(r).map(|(c, v)| (r, c, v * a)));
            triplets.extend(other.row(r).map(|(c, v)| (r, c, v * b)));
        }
        Ok(Self::from_triplets(self.n_qubits, triplets))
    }

    pub fn matmul(&self, other: &QubitOperator) -> Result<QubitOperator> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        let mut triplets = Vec::new();
        for r in 0..self.dim() {
            for (k, a) in self.row(r) {
                triplets.extend(other.row(k).map(|(c, b)| (r, c, a * b)));
            }
        }
        Ok(Self::from_triplets(self.n_qubits, triplets))
    }

    pub fn adjoint(&self) -> QubitOperator {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.dim() {
            triplets.extend(self.row(r).map(|(c, v)| (c, r, v.conj())));
        }
        Self::from_triplets(self.n_qubits, triplets)
    }

    pub fn identity(n_qubits: usize) -> QubitOperator {
        Self::from_diagonal(n_qubits, &vec![1.0; 1 << n_qubits])
    }

    /// Largest entry magnitude of `self - other`.
    pub fn max_abs_diff(&self, other: &QubitOperator) -> f64 {
        match self.linear_combination(1.0, other, -1.0) {
            Ok(d) => d.vals.iter().map(|v| v.norm()).fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        }
    }

    /// Dense copy; only sensible for small operators.
    pub fn to_dense(&self) -> Mat<Complex64> {
        let dim = self.dim();
        let mut m = Mat::<Complex64>::zeros(dim, dim);
        for r in 0..dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    pub fn to_dense_real(&self) -> Mat<f64> {
        let dim = self.dim();
        let mut m = Mat::<f64>::zeros(dim, dim);
        for r in 0..dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v.re;
            }
        }
        m
    }

    /// Row-sum bound on the operator 2-norm.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim())
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// `sigma_x` acting on `site` of an `n`-qubit register.
pub fn sigma_x(n: usize, site: usize) -> QubitOperator {
    let flip = 1usize << (n - 1 - site);
    let triplets = (0..1usize << n)
        .map(|i| (i, i ^ flip, Complex64::new(1.0, 0.0)))
        .collect();
    QubitOperator::from_triplets(n, triplets)
}

/// `sigma_y` with `sigma_y |0> = i|1>`.
pub fn sigma_y(n: usize, site: usize) -> QubitOperator {
    let shift = n - 1 - site;
    let triplets = (0..1usize << n)
        .map(|i| {
            let j = i ^ (1 << shift);
            // <i| sigma_y |j>: row bit 0, column bit 1 -> -i ; row bit 1 -> +i
            let v = if (i >> shift) & 1 == 0 {
                Complex64::new(0.0, -1.0)
            } else {
                Complex64::new(0.0, 1.0)
            };
            (i, j, v)
        })
        .collect();
    QubitOperator::from_triplets(n, triplets)
}

pub fn sigma_z(n: usize, site: usize) -> QubitOperator {
    let shift = n - 1 - site;
    let diag: Vec<f64> = (0..1usize << n)
        .map(|i| if (i >> shift) & 1 == 0 { 1.0 } else { -1.0 })
        .collect();
    QubitOperator::from_diagonal(n, &diag)
}

pub fn build_driver(n: usize) -> Result<QubitOperator> {
    build_driver_with_cap(n, DEFAULT_HILBERT_CAP)
}

/// `H_0 = sum_r sigma_x(r)`.
pub fn build_driver_with_cap(n: usize, cap: usize) -> Result<QubitOperator> {
    if n == 0 {
        return Err(Error::invalid("driver needs at least one qubit"));
    }
    check_cap(n, cap)?;
    let dim = 1usize << n;
    let mut triplets = Vec::with_capacity(dim * n);
    for i in 0..dim {
        for site in 0..n {
            triplets.push((i, i ^ (1 << (n - 1 - site)), Complex64::new(1.0, 0.0)));
        }
    }
    Ok(QubitOperator::from_triplets(n, triplets))
}

/// Diagonal of `H_P` in the computational basis.
///
/// Under [`SignConvention::GroundEncodesMax`] the entry for string `s` is
/// `C - P(s)` (`sum_r w_r (1 + sz_r)/2 + sum w_rr' (1 + sz_r sz_r')/2`); under
/// [`SignConvention::PaperLiteral`] it is `P(s)`.
pub fn problem_diagonal(instance: &MaxCutInstance) -> Vec<f64> {
    let n = instance.num_sites();
    let sign = match instance.sign_convention() {
        SignConvention::GroundEncodesMax => 1.0,
        SignConvention::PaperLiteral => -1.0,
    };
    let edges: Vec<(usize, usize, f64)> = instance.edges().collect();
    (0..1usize << n)
        .map(|idx| {
            let z = |site: usize| if (idx >> (n - 1 - site)) & 1 == 0 { 1.0 } else { -1.0 };
            let nodes: f64 = (0..n)
                .map(|r| instance.node_weight(r) * (1.0 + sign * z(r)) / 2.0)
                .sum();
            let pairs: f64 = edges
                .iter()
                .map(|&(a, b, w)| w * (1.0 + sign * z(a) * z(b)) / 2.0)
                .sum();
            nodes + pairs
        })
        .collect()
}

pub fn build_problem(instance: &MaxCutInstance) -> Result<QubitOperator> {
    build_problem_with_cap(instance, DEFAULT_HILBERT_CAP)
}

pub fn build_problem_with_cap(instance: &MaxCutInstance, cap: usize) -> Result<QubitOperator> {
    let n = instance.num_sites();
    check_cap(n, cap)?;
    Ok(QubitOperator::from_diagonal(n, &problem_diagonal(instance)))
}

/// A point `s = t / T` on the annealing schedule.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SchedulePoint(f64);

impl SchedulePoint {
    pub fn new(s: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!("schedule point must lie in [0, 1], got {s}")));
        }
        Ok(Self(s))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `(1 - s) H_0 + s H_P`.
pub fn interpolate(h0: &QubitOperator, hp: &QubitOperator, point: SchedulePoint) -> Result<QubitOperator> {
    let s = point.value();
    h0.linear_combination(1.0 - s, hp, s)
}

/// The pair `(H_0, H_P)` for an instance, with `H(s)` built on demand.
#[derive(Debug, Clone)]
pub struct AnnealingHamiltonian {
    pub driver: QubitOperator,
    pub problem: QubitOperator,
}

impl AnnealingHamiltonian {
    pub fn new(instance: &MaxCutInstance) -> Result<Self> {
        Ok(Self {
            driver: build_driver(instance.num_sites())?,
            problem: build_problem(instance)?,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.driver.n_qubits()
    }

    pub fn at(&self, s: f64) -> Result<QubitOperator> {
        interpolate(&self.driver, &self.problem, SchedulePoint::new(s)?)
    }

    /// `dH/ds = H_P - H_0`.
    pub fn derivative(&self) -> QubitOperator {
        self.problem
            .linear_combination(1.0, &self.driver, -1.0)
            .expect("driver and problem share a register")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{brute_force_max, payoff, CutAssignment, LatticeGeometry};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn two_node(convention: SignConvention) -> MaxCutInstance {
        let g = LatticeGeometry::new(1, 2).unwrap();
        MaxCutInstance::new(g, vec![0.0, 0.0], [(0, 1, 1.0)], 0, convention).unwrap()
    }

    #[test]
    fn driver_single_qubit_is_sigma_x() {
        let h = build_driver(1).unwrap();
        assert_eq!(h.get(0, 1), c(1.0));
        assert_eq!(h.get(1, 0), c(1.0));
        assert_eq!(h.get(0, 0), c(0.0));
        assert_eq!(h, sigma_x(1, 0));
    }

    #[test]
    fn driver_spectrum_two_qubits() {
        let h = build_driver(2).unwrap();
        let mut ev = h.to_dense().self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        ev.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn driver_ground_state_energy() {
        let n = 5;
        let h = build_driver(n).unwrap();
        let amp = (1.0 / (1u64 << n) as f64).sqrt();
        let psi: Vec<Complex64> = (0..1usize << n)
            .map(|i| c(if i.count_ones() % 2 == 0 { amp } else { -amp }))
            .collect();
        let hpsi = h.apply(&psi).unwrap();
        for (a, b) in hpsi.iter().zip(&psi) {
            assert!((a + b * 5.0).norm() < 1e-12);
        }
        assert!(matches!(build_driver_with_cap(5, 4), Err(Error::ResourceLimit { .. })));
    }

    #[test]
    fn problem_two_nodes_both_conventions() {
        let hp = build_problem(&two_node(SignConvention::GroundEncodesMax)).unwrap();
        assert_eq!(hp.diagonal(), vec![1.0, 0.0, 0.0, 1.0]);
        assert!(hp.is_diagonal());
        let hp = build_problem(&two_node(SignConvention::PaperLiteral)).unwrap();
        assert_eq!(hp.diagonal(), vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn problem_zero_weights_is_zero() {
        let g = LatticeGeometry::new(2, 2).unwrap();
        let inst = MaxCutInstance::new(g, vec![0.0; 4], [(0, 1, 0.0)], 0, SignConvention::default()).unwrap();
        assert_eq!(build_problem(&inst).unwrap().nnz(), 0);
    }

    #[test]
    fn interpolate_endpoints_and_midpoint() {
        let g = LatticeGeometry::new(1, 1).unwrap();
        let inst = MaxCutInstance::new(g, vec![1.0], [], 0, SignConvention::PaperLiteral).unwrap();
        let h = AnnealingHamiltonian::new(&inst).unwrap();
        assert_eq!(h.at(0.0).unwrap().max_abs_diff(&h.driver), 0.0);
        assert_eq!(h.at(1.0).unwrap().max_abs_diff(&h.problem), 0.0);
        let mid = h.at(0.5).unwrap();
        assert_eq!(mid.get(0, 0), c(0.0));
        assert_eq!(mid.get(0, 1), c(0.5));
        assert_eq!(mid.get(1, 0), c(0.5));
        assert_eq!(mid.get(1, 1), c(0.5));
        assert!(SchedulePoint::new(1.5).is_err());
        assert!(interpolate(&build_driver(2).unwrap(), &h.problem, SchedulePoint::new(0.5).unwrap()).is_err());
    }

    #[test]
    fn apply_basics() {
        let h0 = build_driver(1).unwrap();
        assert_eq!(h0.apply(&[c(1.0), c(0.0)]).unwrap(), vec![c(0.0), c(1.0)]);
        assert!(h0.apply(&[c(1.0)]).is_err());

        let hp = build_problem(&two_node(SignConvention::GroundEncodesMax)).unwrap();
        let mut e3 = vec![c(0.0); 4];
        e3[3] = c(1.0);
        let out = hp.apply(&e3).unwrap();
        assert_eq!(out, vec![c(0.0), c(0.0), c(0.0), c(1.0)]);
    }

    #[test]
    fn pauli_matrices_satisfy_algebra() {
        let (x, y, z) = (sigma_x(2, 1), sigma_y(2, 1), sigma_z(2, 1));
        // xy = i z
        let xy = x.matmul(&y).unwrap();
        for r in 0..4 {
            assert!((xy.get(r, r) - Complex64::new(0.0, 1.0) * z.get(r, r)).norm() < 1e-15);
        }
        assert!(y.hermiticity_defect() < 1e-15);
    }

    #[test]
    fn ground_encodes_max_diagonal_matches_payoff() {
        let g = LatticeGeometry::new(2, 2).unwrap();
        let inst = crate::instance::generate_random(g, &Default::default(), 11).unwrap();
        let diag = problem_diagonal(&inst);
        let total = inst.total_weight();
        let literal = problem_diagonal(&inst.clone().with_sign_convention(SignConvention::PaperLiteral));
        for (idx, (d, l)) in diag.iter().zip(&literal).enumerate() {
            let p = payoff(&inst, &CutAssignment::from_index(idx, 4)).unwrap();
            assert!((d + p - total).abs() < 1e-12);
            assert!((l - p).abs() < 1e-12);
        }
        let best = brute_force_max(&inst).unwrap();
        let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
        let argmin: Vec<usize> = (0..16).filter(|&i| diag[i] <= min + 1e-12).collect();
        assert_eq!(argmin, best.maximizer_indices());
    }
}
