//! Two-dimensional Jordan-Wigner fermionization.
//!
//! The Fock basis reuses the register layout: bit `r` (site 0 most significant)
//! holds the occupation `n_r`. Canonical anticommutation is realized with a
//! one-dimensional string over row-major site order; the two-dimensional
//! disorder operators `Q_r = exp(-i phi_r)`, with
//! `phi_r = (2m + 1) sum_r' Phi(r, r') n_r'`, are then attached to rebuild the
//! Pauli operators as
//!
//! ```text
//! sigma+ = 2 a† Q,   sigma- = 2 Q† a,   sigma_z = 2 n - 1
//! ```
//!
//! where `sigma± = sigma_x ± i sigma_y`. Occupied sites therefore correspond to
//! `sigma_z = +1`, i.e. qubit value `s_r = 0`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::instance::{LatticeGeometry, MaxCutInstance, SignConvention};
use crate::operator::{check_cap, problem_diagonal, QubitOperator, DEFAULT_HILBERT_CAP};

/// Angle of `r - r'` measured from `e1`, on the branch `[0, 2 pi)`.
/// `Phi(r, r) = 0`.
pub fn angle(r: usize, r_prime: usize, geometry: &LatticeGeometry) -> f64 {
    if r == r_prime {
        return 0.0;
    }
    let (x, y) = geometry.coords(r);
    let (xp, yp) = geometry.coords(r_prime);
    let theta = (y as f64 - yp as f64).atan2(x as f64 - xp as f64);
    if theta < 0.0 {
        theta + 2.0 * PI
    } else {
        theta
    }
}

/// Full table `Phi(r, r')`.
pub fn angle_table(geometry: &LatticeGeometry) -> Vec<Vec<f64>> {
    let n = geometry.num_sites();
    (0..n)
        .map(|r| (0..n).map(|rp| angle(r, rp, geometry)).collect())
        .collect()
}

/// `1 / (2 pi theta) = 2m + 1`.
pub fn winding_factor(m: i64) -> f64 {
    (2 * m + 1) as f64
}

fn occupied(index: usize, site: usize, n: usize) -> bool {
    (index >> (n - 1 - site)) & 1 == 1
}

#[derive(Debug, Clone)]
pub struct FermionAlgebra {
    geometry: LatticeGeometry,
    m: i64,
    angles: Vec<Vec<f64>>,
    annihilators: Vec<QubitOperator>,
    disorder: Vec<QubitOperator>,
}

impl FermionAlgebra {
    pub fn new(geometry: LatticeGeometry, m: i64) -> Result<Self> {
        Self::with_cap(geometry, m, DEFAULT_HILBERT_CAP)
    }

    pub fn with_cap(geometry: LatticeGeometry, m: i64, cap: usize) -> Result<Self> {
        let n = geometry.num_sites();
        check_cap(n, cap)?;
        let dim = 1usize << n;
        let angles = angle_table(&geometry);
        let annihilators = (0..n)
            .map(|r| {
                let triplets = (0..dim)
                    .filter(|&idx| occupied(idx, r, n))
                    .map(|idx| {
                        let before = (0..r).filter(|&k| occupied(idx, k, n)).count();
                        let sign = if before % 2 == 0 { 1.0 } else { -1.0 };
                        (idx ^ (1 << (n - 1 - r)), idx, Complex64::new(sign, 0.0))
                    })
                    .collect();
                QubitOperator::from_triplets(n, triplets)
            })
            .collect();
        let factor = winding_factor(m);
        let disorder = (0..n)
            .map(|r| {
                let triplets = (0..dim)
                    .map(|idx| {
                        let phase: f64 = (0..n)
                            .filter(|&rp| occupied(idx, rp, n))
                            .map(|rp| angles[r][rp])
                            .sum::<f64>()
                            * factor;
                        (idx, idx, Complex64::from_polar(1.0, -phase))
                    })
                    .collect();
                QubitOperator::from_triplets(n, triplets)
            })
            .collect();
        Ok(Self {
            geometry,
            m,
            angles,
            annihilators,
            disorder,
        })
    }

    pub fn num_sites(&self) -> usize {
        self.geometry.num_sites()
    }

    pub fn m(&self) -> i64 {
        self.m
    }

    pub fn angles(&self) -> &[Vec<f64>] {
        &self.angles
    }

    pub fn annihilator(&self, r: usize) -> &QubitOperator {
        &self.annihilators[r]
    }

    pub fn creator(&self, r: usize) -> QubitOperator {
        self.annihilators[r].adjoint()
    }

    pub fn number(&self, r: usize) -> QubitOperator {
        let n = self.num_sites();
        let diag: Vec<f64> = (0..1usize << n)
            .map(|idx| if occupied(idx, r, n) { 1.0 } else { 0.0 })
            .collect();
        QubitOperator::from_diagonal(n, &diag)
    }

    /// `Q_r`, diagonal in the occupation basis.
    pub fn disorder(&self, r: usize) -> &QubitOperator {
        &self.disorder[r]
    }

    /// `sigma+(r) = 2 a†_r Q_r`.
    pub fn sigma_plus(&self, r: usize) -> QubitOperator {
        let op = self.creator(r).matmul(&self.disorder[r]).expect("same register");
        op.linear_combination(2.0, &op, 0.0).expect("same register")
    }

    /// `sigma-(r) = 2 Q†_r a_r`.
    pub fn sigma_minus(&self, r: usize) -> QubitOperator {
        let op = self.disorder[r]
            .adjoint()
            .matmul(&self.annihilators[r])
            .expect("same register");
        op.linear_combination(2.0, &op, 0.0).expect("same register")
    }

    /// `sigma_x = (sigma+ + sigma-) / 2 = a† Q + Q† a`.
    pub fn sigma_x(&self, r: usize) -> QubitOperator {
        self.sigma_plus(r)
            .linear_combination(0.5, &self.sigma_minus(r), 0.5)
            .expect("same register")
    }

    /// `sigma_y = (sigma+ - sigma-) / 2i`.
    pub fn sigma_y(&self, r: usize) -> QubitOperator {
        let diff = self
            .sigma_plus(r)
            .linear_combination(0.5, &self.sigma_minus(r), -0.5)
            .expect("same register");
        let n = self.num_sites();
        let minus_i =
            QubitOperator::from_triplets(n, (0..1usize << n).map(|i| (i, i, Complex64::new(0.0, -1.0))).collect());
        minus_i.matmul(&diff).expect("same register")
    }

    /// `sigma_z = 2 n - 1`.
    pub fn sigma_z(&self, r: usize) -> QubitOperator {
        let n = self.num_sites();
        self.number(r)
            .linear_combination(2.0, &QubitOperator::identity(n), -1.0)
            .expect("same register")
    }
}

/// Anticommutator `{A, B}`.
pub fn anticommutator(a: &QubitOperator, b: &QubitOperator) -> QubitOperator {
    let ab = a.matmul(b).expect("same register");
    let ba = b.matmul(a).expect("same register");
    ab.linear_combination(1.0, &ba, 1.0).expect("same register")
}

/// Commutator `[A, B]`.
pub fn commutator(a: &QubitOperator, b: &QubitOperator) -> QubitOperator {
    let ab = a.matmul(b).expect("same register");
    let ba = b.matmul(a).expect("same register");
    ab.linear_combination(1.0, &ba, -1.0).expect("same register")
}

/// Number-operator form of the problem Hamiltonian:
/// `H_P = sum_r v_r n_r + sum_{r != r'} u_{r r'} n_r n_r' + constant`
/// (ordered pair sum), with `w_r = v_r + W_r`, `W_r = sum_{r' != r} w_{r r'}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FermionDecomposition {
    /// `v_r` entering the one-body term.
    pub onsite: Vec<f64>,
    /// `W_r`.
    pub incident: Vec<f64>,
    /// Symmetric pair coefficients `u_{r r'}` of the ordered double sum.
    pub pair: Vec<Vec<f64>>,
    /// Identity term dropped from the textbook form.
    pub constant: f64,
}

impl FermionDecomposition {
    pub fn new(instance: &MaxCutInstance) -> Self {
        let n = instance.num_sites();
        let incident: Vec<f64> = (0..n).map(|r| instance.incident_weight(r)).collect();
        let excess: Vec<f64> = (0..n).map(|r| instance.node_weight(r) - incident[r]).collect();
        let w = instance.edge_matrix();
        let edge_sum: f64 = instance.edges().map(|(_, _, w)| w).sum();
        let node_sum: f64 = instance.node_weights().iter().sum();
        match instance.sign_convention() {
            SignConvention::GroundEncodesMax => Self {
                onsite: excess,
                incident,
                pair: w,
                constant: edge_sum,
            },
            SignConvention::PaperLiteral => Self {
                onsite: excess.iter().map(|v| -v).collect(),
                incident,
                pair: w.iter().map(|row| row.iter().map(|x| -x).collect()).collect(),
                constant: node_sum,
            },
        }
    }

    /// Value of the decomposed form on an occupation pattern.
    pub fn evaluate(&self, occupation: &[f64]) -> f64 {
        let n = occupation.len();
        let mut e = self.constant;
        for r in 0..n {
            e += self.onsite[r] * occupation[r];
            for rp in 0..n {
                if rp != r {
                    e += self.pair[r][rp] * occupation[r] * occupation[rp];
                }
            }
        }
        e
    }
}

/// `H_f(s)`: the annealing Hamiltonian with the Jordan-Wigner map substituted,
/// `(1 - s) sum_r [a†_r Q_r + Q†_r a_r] + s H_P(sigma_z -> 2n - 1)`.
pub fn build_fermionized_hamiltonian(
    instance: &MaxCutInstance,
    algebra: &FermionAlgebra,
    s: f64,
) -> Result<QubitOperator> {
    let n = instance.num_sites();
    if algebra.num_sites() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: algebra.num_sites(),
        });
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("s must lie in [0, 1], got {s}")));
    }
    let dim = 1usize << n;
    let mut kinetic = QubitOperator::zero(n);
    for r in 0..n {
        let hop = algebra.creator(r).matmul(algebra.disorder(r))?;
        let hop_h = hop.adjoint();
        kinetic = kinetic.linear_combination(1.0, &hop, 1.0)?;
        kinetic = kinetic.linear_combination(1.0, &hop_h, 1.0)?;
    }
    // sigma_z(r) = +1 on occupied sites, so the occupation pattern `f` carries
    // the qubit string `f XOR 1...1`.
    let qubit_diag = problem_diagonal(instance);
    let fock_diag: Vec<f64> = (0..dim).map(|f| qubit_diag[f ^ (dim - 1)]).collect();
    let potential = QubitOperator::from_diagonal(n, &fock_diag);
    kinetic.linear_combination(1.0 - s, &potential, s)
}

/// Convenience wrapper building the algebra with the instance's `m`.
pub fn fermionized_hamiltonian(instance: &MaxCutInstance, s: f64) -> Result<QubitOperator> {
    let algebra = FermionAlgebra::new(instance.geometry(), instance.jw_m())?;
    build_fermionized_hamiltonian(instance, &algebra, s)
}
