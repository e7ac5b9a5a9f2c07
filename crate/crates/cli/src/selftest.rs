//! Quick invariant checks, one line per check.

use qaegap::eigen::dense_spectrum;
use qaegap::fermion::fermionized_hamiltonian;
use qaegap::green::{lattice_green_function, Boundary};
use qaegap::instance::{generate_random, LatticeGeometry, MaxCutInstance, RandomInstanceParams, SignConvention};
use qaegap::operator::AnnealingHamiltonian;
use qaegap::oracle::{gap_at, uniform_grid, GapMethod};
use qaegap::response::{dft_gap, KernelOptions, ResponseKernel};
use qaegap::scan::{scan, ScanOptions};
use qaegap::scf::{scf_solve, ScfOptions};
use qaegap::xc::{finite_difference_defects, XcFunctional};
use qaegap::Result;

use crate::CliError;

fn jw_equivalence() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (rows, cols, seed) in [(1, 3, 1), (2, 2, 2), (2, 3, 3)] {
        let params = RandomInstanceParams {
            extra_edge_probability: 0.3,
            ..Default::default()
        };
        let inst = generate_random(LatticeGeometry::new(rows, cols)?, &params, seed)?;
        for s in [0.3, 0.7] {
            let a = dense_spectrum(&AnnealingHamiltonian::new(&inst)?.at(s)?)?;
            let b = dense_spectrum(&fermionized_hamiltonian(&inst, s)?)?;
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max((x - y).abs() / x.abs().max(1.0));
            }
        }
    }
    Ok(worst)
}

fn single_qubit_gap() -> Result<f64> {
    let inst = MaxCutInstance::new(
        LatticeGeometry::new(1, 1)?,
        vec![1.0],
        vec![],
        0,
        SignConvention::GroundEncodesMax,
    )?;
    let mut worst: f64 = 0.0;
    for s in uniform_grid(0.0, 1.0, 21) {
        let want = 2.0 * ((s / 2.0).powi(2) + (1.0 - s).powi(2)).sqrt();
        worst = worst.max((gap_at(&inst, s)?.gap - want).abs());
    }
    Ok(worst)
}

fn non_interacting_dft() -> Result<f64> {
    let params = RandomInstanceParams {
        node_weight_range: (-1.0, 1.0),
        ..RandomInstanceParams::non_interacting()
    };
    let inst = generate_random(LatticeGeometry::new(1, 4)?, &params, 5)?;
    let mut worst: f64 = 0.0;
    for s in uniform_grid(0.02, 0.98, 13) {
        let st = scf_solve(&inst, s, &XcFunctional::None, &ScfOptions::default())?;
        let kernel = ResponseKernel::new(&inst, &st, &XcFunctional::None, KernelOptions::default())?;
        worst = worst.max((dft_gap(&st, &kernel)?.gap - gap_at(&inst, s)?.gap).abs());
    }
    Ok(worst)
}

fn kernel_finite_differences() -> Result<f64> {
    let samples: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
    let xc = XcFunctional::local_correlation(vec![0.0, -0.3, 0.2, 0.05]);
    let (dv, df) = finite_difference_defects(&xc, &samples, 1e-5);
    Ok(dv.max(df))
}

fn green_residual() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for boundary in [Boundary::Open, Boundary::Periodic, Boundary::Dirichlet] {
        let g = lattice_green_function(LatticeGeometry::new(4, 4)?, boundary)?;
        worst = worst.max(g.residual());
    }
    Ok(worst)
}

fn scan_determinism() -> Result<f64> {
    let inst = generate_random(LatticeGeometry::new(2, 2)?, &RandomInstanceParams::default(), 7)?;
    let grid = uniform_grid(0.1, 0.9, 9);
    let mut differs = 0.0;
    for method in [GapMethod::Exact, GapMethod::Dft] {
        let a = scan(&inst, &grid, method, &ScanOptions::default())?.to_csv();
        let b = scan(&inst, &grid, method, &ScanOptions::default())?.to_csv();
        if a != b {
            differs = 1.0;
        }
    }
    Ok(differs)
}

type Check = (&'static str, fn() -> Result<f64>, f64);

const CHECKS: [Check; 6] = [
    ("jw_spectral_equivalence", jw_equivalence, 1e-10),
    ("single_qubit_gap", single_qubit_gap, 1e-9),
    ("non_interacting_dft_gap", non_interacting_dft, 1e-8),
    ("kernel_finite_differences", kernel_finite_differences, 1e-6),
    ("green_function_residual", green_residual, 1e-10),
    ("scan_determinism", scan_determinism, 0.5),
];

pub fn run() -> std::result::Result<String, CliError> {
    let mut failed = Vec::new();
    for (name, check, tol) in CHECKS {
        match check() {
            Ok(v) if v < tol => println!("PASS {name} value={v:.3e} tol={tol:.0e}"),
            Ok(v) => {
                println!("FAIL {name} value={v:.3e} tol={tol:.0e}");
                failed.push(name.to_string());
            }
            Err(e) => {
                println!("FAIL {name} error={e}");
                failed.push(name.to_string());
            }
        }
    }
    if failed.is_empty() {
        Ok(format!("selftest checks={} failed=0 status=ok", CHECKS.len()))
    } else {
        Err(CliError::Checks(failed))
    }
}
