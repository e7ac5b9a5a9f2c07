//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qaegap::eigen::dense_spectrum;
use qaegap::evolution::{propagate, runtime_bound, EvolutionOptions};
use qaegap::fermion::fermionized_hamiltonian;
use qaegap::green::{fermion_current, lattice_green_function, Boundary};
use qaegap::instance::{generate_random, LatticeGeometry, MaxCutInstance, RandomInstanceParams, SignConvention};
use qaegap::operator::AnnealingHamiltonian;
use qaegap::oracle::{adiabatic_numerator, gap_at, uniform_grid, ExactOracle, GapMethod};
use qaegap::response::{
    casida_blocks, dft_gap, ks_susceptibility, lambda_check, runge_gross_premise, solve_response, KernelOptions,
    ResponseKernel,
};
use qaegap::scan::{scaling_geometry, scan, ScanOptions, DFT_GRID};
use qaegap::scf::{energy_functional, scf_solve, ScfOptions};
use qaegap::xc::{finite_difference_defects, XcFunctional};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn interacting(n: usize, seed: u64) -> MaxCutInstance {
    let params = RandomInstanceParams {
        extra_edge_probability: 0.25,
        ..Default::default()
    };
    generate_random(scaling_geometry(n).unwrap(), &params, seed).unwrap()
}

fn non_interacting(n: usize, seed: u64) -> MaxCutInstance {
    let params = RandomInstanceParams {
        node_weight_range: (-1.0, 1.0),
        ..RandomInstanceParams::non_interacting()
    };
    generate_random(scaling_geometry(n).unwrap(), &params, seed).unwrap()
}

fn jw_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..20u64 {
        let n = 2 + (k as usize % 7);
        let inst = interacting(n, 100 + k).with_jw_m([0, 1, -1][k as usize % 3]);
        let hq = AnnealingHamiltonian::new(&inst).map_err(fail)?;
        for s in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let a = dense_spectrum(&hq.at(s).map_err(fail)?).map_err(fail)?;
            let b = dense_spectrum(&fermionized_hamiltonian(&inst, s).map_err(fail)?).map_err(fail)?;
            let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max((x - y).abs() / scale);
            }
        }
    }
    if worst < 1e-10 {
        Ok(format!("max relative deviation {worst:.2e} over 20 instances"))
    } else {
        Err(format!("max relative deviation {worst:.2e}"))
    }
}

fn single_qubit_gap() -> Outcome {
    let inst = MaxCutInstance::new(
        LatticeGeometry::new(1, 1).unwrap(),
        vec![1.0],
        vec![],
        0,
        SignConvention::GroundEncodesMax,
    )
    .map_err(fail)?;
    let mut worst: f64 = 0.0;
    for s in uniform_grid(0.0, 1.0, 101) {
        let want = 2.0 * ((s / 2.0).powi(2) + (1.0 - s).powi(2)).sqrt();
        worst = worst.max((gap_at(&inst, s).map_err(fail)?.gap - want).abs());
    }
    let report = scan(
        &inst,
        &uniform_grid(0.0, 1.0, 101),
        GapMethod::Exact,
        &ScanOptions::default(),
    )
    .map_err(fail)?;
    let (min_gap, s_star) = (report.min_gap.unwrap(), report.s_star.unwrap());
    let want = 2.0 * 0.2f64.sqrt();
    if worst < 1e-9 && (min_gap - want).abs() < 1e-9 && (s_star - 0.8).abs() < 1e-12 {
        Ok(format!(
            "curve deviation {worst:.2e}, min gap {min_gap:.12} at s = {s_star}"
        ))
    } else {
        Err(format!("curve deviation {worst:.2e}, min gap {min_gap} at {s_star}"))
    }
}

fn zero_interaction_dft() -> Outcome {
    let (lo, hi, k) = DFT_GRID;
    let grid = uniform_grid(lo, hi, k);
    let mut worst: f64 = 0.0;
    for n in 1..=10 {
        let inst = non_interacting(n, 7 * n as u64);
        let oracle = ExactOracle::new(&inst).map_err(fail)?;
        for &s in &grid {
            let st = scf_solve(&inst, s, &XcFunctional::None, &ScfOptions::default()).map_err(fail)?;
            let kernel =
                ResponseKernel::new(&inst, &st, &XcFunctional::None, KernelOptions::default()).map_err(fail)?;
            let dft = dft_gap(&st, &kernel).map_err(fail)?.gap;
            worst = worst.max((dft - oracle.gap_at(s).map_err(fail)?.gap).abs());
        }
    }
    if worst < 1e-8 {
        Ok(format!("max |dft - exact| {worst:.2e} for N = 1..10"))
    } else {
        Err(format!("max |dft - exact| {worst:.2e}"))
    }
}

fn kernel_free_reduction() -> Outcome {
    let no_hartree = KernelOptions { hartree: false };
    let mut worst_exc: f64 = 0.0;
    let mut worst_resp: f64 = 0.0;
    for (k, n) in [2usize, 3, 4, 6].into_iter().enumerate() {
        let inst = interacting(n, 40 + k as u64);
        for s in [0.2, 0.5, 0.8] {
            let st = scf_solve(&inst, s, &XcFunctional::None, &ScfOptions::default()).map_err(fail)?;
            let kernel = ResponseKernel::new(&inst, &st, &XcFunctional::None, no_hartree).map_err(fail)?;
            if !kernel.is_zero() {
                return Err("kernel is not zero".into());
            }
            let mut bare = st.transition_energies();
            bare.sort_by(f64::total_cmp);
            let mut corrected: Vec<f64> = casida_blocks(&st, &kernel, None)
                .map_err(fail)?
                .into_iter()
                .flat_map(|b| b.excitations)
                .collect();
            corrected.sort_by(f64::total_cmp);
            for (a, b) in bare.iter().zip(&corrected) {
                worst_exc = worst_exc.max((a - b).abs());
            }
            // chi v from the orbitals, term by term.
            let probe: Vec<Complex64> = (0..n).map(|r| Complex64::new(1.0 + r as f64, 0.5 - r as f64)).collect();
            let (omega, eta) = (0.37, 1e-3);
            let got = solve_response(&st, &kernel, &probe, omega, eta).map_err(fail)?;
            let chi = ks_susceptibility(&st, omega, eta).map_err(fail)?;
            for r in 0..n {
                let orb = &st.orbitals[r];
                let (w, phi) = (orb.transition_energy(), orb.transition_amplitude());
                let chi_rr =
                    phi.norm_sqr() * (Complex64::new(omega - w, eta).inv() - Complex64::new(omega + w, eta).inv());
                worst_resp = worst_resp.max((chi[r][r] - chi_rr).norm());
                worst_resp = worst_resp.max((got[r] - chi_rr * probe[r]).norm());
            }
        }
    }
    if worst_exc < 1e-12 && worst_resp < 1e-12 {
        Ok(format!(
            "excitation deviation {worst_exc:.2e}, response deviation {worst_resp:.2e}"
        ))
    } else {
        Err(format!(
            "excitation deviation {worst_exc:.2e}, response deviation {worst_resp:.2e}"
        ))
    }
}

fn single_pole_consistency() -> Outcome {
    let local = KernelOptions { hartree: false };
    let functionals = [
        XcFunctional::local_correlation(vec![0.0, -0.4, 0.3]),
        XcFunctional::local_correlation(vec![0.0, 0.2, -0.1, 0.15]),
    ];
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut poles = 0;
    for n in 2..=6 {
        let inst = interacting(n, 60 + n as u64);
        for xc in &functionals {
            for s in [0.2, 0.5, 0.8] {
                let st = scf_solve(&inst, s, xc, &ScfOptions::default()).map_err(fail)?;
                let kernel = ResponseKernel::new(&inst, &st, xc, local).map_err(fail)?;
                if kernel.is_zero() || !kernel.is_local() {
                    return Err("kernel must be nonzero and local".into());
                }
                for block in casida_blocks(&st, &kernel, None).map_err(fail)? {
                    for &omega in &block.excitations {
                        let check = lambda_check(&st, &kernel, omega).map_err(fail)?;
                        if check.pole {
                            poles += 1;
                        } else {
                            checked += 1;
                            worst = worst.max(check.deviation);
                        }
                    }
                }
            }
        }
    }
    if worst < 1e-6 && checked > 0 {
        Ok(format!(
            "max |lambda - 1| {worst:.2e} over {checked} excitations ({poles} on bare poles)"
        ))
    } else {
        Err(format!("max |lambda - 1| {worst:.2e} over {checked} excitations"))
    }
}

fn finite_difference_kernels() -> Outcome {
    let samples: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
    let mut worst: f64 = 0.0;
    for xc in [
        XcFunctional::None,
        XcFunctional::local_correlation(vec![0.0, -0.3, 0.2]),
        XcFunctional::local_correlation(vec![0.1, -0.5, 0.4, -0.2, 0.05]),
    ] {
        let (dv, df) = finite_difference_defects(&xc, &samples, 1e-5);
        worst = worst.max(dv).max(df);
    }
    if worst < 1e-6 {
        Ok(format!("max defect {worst:.2e}"))
    } else {
        Err(format!("max defect {worst:.2e}"))
    }
}

fn green_and_continuity() -> Outcome {
    let mut worst_g: f64 = 0.0;
    for rows in 1..=6 {
        for cols in rows..=6 {
            if rows * cols < 2 {
                continue;
            }
            for boundary in [Boundary::Open, Boundary::Periodic, Boundary::Dirichlet] {
                let g = lattice_green_function(LatticeGeometry::new(rows, cols).unwrap(), boundary).map_err(fail)?;
                worst_g = worst_g.max(g.residual());
            }
        }
    }
    let inst = interacting(4, 11);
    let opts = EvolutionOptions {
        dt: Some(1e-3),
        density_every: Some(1),
        ..Default::default()
    };
    let run = propagate(&inst, 2.0, &opts).map_err(fail)?;
    let traj = run.density.ok_or("no density recorded")?;
    let mut worst_c: f64 = 0.0;
    for (boundary, projected) in [(Boundary::Dirichlet, false), (Boundary::Open, true)] {
        let g = lattice_green_function(inst.geometry(), boundary).map_err(fail)?;
        let field = fermion_current(&traj.samples, traj.t0, traj.dt, &g).map_err(fail)?;
        worst_c = worst_c.max(field.continuity_residual(&g, projected));
    }
    if worst_g < 1e-10 && worst_c < 1e-6 {
        Ok(format!(
            "Green residual {worst_g:.2e} up to 6x6, continuity residual {worst_c:.2e}"
        ))
    } else {
        Err(format!(
            "Green residual {worst_g:.2e}, continuity residual {worst_c:.2e}"
        ))
    }
}

fn adiabatic_bound() -> Outcome {
    let inst = interacting(4, 2);
    let grid = uniform_grid(0.0, 1.0, 101);
    let m = adiabatic_numerator(&inst, &grid).map_err(fail)?.value;
    let report = scan(&inst, &grid, GapMethod::Exact, &ScanOptions::default()).map_err(fail)?;
    let delta = report.refined.map(|r| r.1).or(report.min_gap).ok_or("no gap")?;
    let unit = runtime_bound(m, delta, 1.0).map_err(fail)?;
    let ladder = [1.0, 4.0, 16.0, 64.0, 100.0];
    let mut p = Vec::new();
    for c in ladder {
        p.push(
            propagate(&inst, c * unit, &EvolutionOptions::default())
                .map_err(fail)?
                .success_probability,
        );
    }
    let mut inversions = Vec::new();
    for (i, w) in p[..4].windows(2).enumerate() {
        if w[1] < w[0] {
            inversions.push((ladder[i + 1], w[0] - w[1]));
        }
    }
    let largest = inversions.iter().map(|x| x.1).fold(0.0, f64::max);
    let detail = format!(
        "M = {m:.4}, gap = {delta:.4}, p(1,4,16,64) = {:.4} {:.4} {:.4} {:.4}, p(100) = {:.6}, inversions {:?}",
        p[0], p[1], p[2], p[3], p[4], inversions
    );
    if p[4] > 0.9 && largest < 0.01 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn variational_surrogates() -> Outcome {
    let inst = interacting(6, 5);
    let oracle = ExactOracle::new(&inst).map_err(fail)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = f64::INFINITY;
    let svals = [0.1, 0.3, 0.5, 0.7, 0.9];
    let ground = svals
        .iter()
        .map(|&s| oracle.eigenpairs(s, 1).map(|p| p.into_iter().next().unwrap()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(fail)?;
    let e0: Vec<f64> = ground.iter().map(|p| p.value).collect();
    for k in 0..1000 {
        let i = k % svals.len();
        // Every other state is a small perturbation of the ground vector.
        let (base, eps) = if k % 2 == 0 {
            (Some(&ground[i].vector), 1e-4)
        } else {
            (None, 1.0)
        };
        let mut psi: Vec<Complex64> = (0..64)
            .map(|j| {
                let noise = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * eps;
                base.map_or(noise, |v| v[j] + noise)
            })
            .collect();
        let nrm = psi.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
        psi.iter_mut().for_each(|a| *a /= nrm);
        let q = oracle.rayleigh_quotient(svals[i], &psi).map_err(fail)?;
        worst = worst.min(q - e0[i]);
    }
    let mut energy_dev: f64 = 0.0;
    for n in [1usize, 3, 4, 6] {
        let free = non_interacting(n, 90 + n as u64);
        for s in [0.1, 0.5, 0.9] {
            let st = scf_solve(&free, s, &XcFunctional::None, &ScfOptions::default()).map_err(fail)?;
            let e = energy_functional(&free, &st, &XcFunctional::None).map_err(fail)?.total;
            energy_dev = energy_dev.max((e - gap_at(&free, s).map_err(fail)?.e0).abs());
        }
    }
    if worst >= -1e-12 && energy_dev < 1e-8 {
        Ok(format!(
            "min (R - E0) {worst:.3e} over 1000 states, SCF energy deviation {energy_dev:.2e}"
        ))
    } else {
        Err(format!(
            "min (R - E0) {worst:.3e}, SCF energy deviation {energy_dev:.2e}"
        ))
    }
}

fn runge_gross() -> Outcome {
    let mut smallest = f64::INFINITY;
    let mut at_one: f64 = 0.0;
    let mut used = 0;
    let mut skipped = 0;
    for n in 1..=6 {
        for seed in 0..3u64 {
            let inst = interacting(n, 300 + 10 * n as u64 + seed);
            let premises = (1..10)
                .map(|k| runge_gross_premise(&inst, k as f64 / 10.0))
                .collect::<Result<Vec<_>, _>>()
                .map_err(fail)?;
            if premises.iter().any(|p| p.degenerate) {
                skipped += 1;
                continue;
            }
            used += 1;
            smallest = premises.iter().map(|p| p.min_abs()).fold(smallest, f64::min);
            let end = runge_gross_premise(&inst, 1.0).map_err(fail)?;
            at_one = end.values.iter().fold(at_one, |m, v| m.max(v.abs()));
        }
    }
    let detail = format!(
        "min |M_y| {smallest:.3e} on {used} instances ({skipped} degenerate skipped), max |M_y| at s = 1 {at_one:.1e}"
    );
    if used > 0 && smallest > 1e-6 && at_one < 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(fail)?;
    let inst = dir.path().join("inst.json");
    let arg = |p: &std::path::Path| p.to_str().unwrap().to_string();
    if qaegap_cli::run([
        "qaegap",
        "gen",
        "--rows",
        "2",
        "--cols",
        "2",
        "--seed",
        "7",
        "--out",
        &arg(&inst),
    ]) != 0
    {
        return Err("gen failed".into());
    }
    let mut outputs = Vec::new();
    for tag in ["a", "b"] {
        let prefix = dir.path().join(tag);
        let code = qaegap_cli::run([
            "qaegap",
            "scan",
            "--instance",
            &arg(&inst),
            "--method",
            "both",
            "--out",
            &arg(&prefix),
        ]);
        if code != 0 {
            return Err(format!("scan exited with {code}"));
        }
        let mut files = Vec::new();
        for kind in ["exact", "dft", "compare"] {
            files.push(std::fs::read(dir.path().join(format!("{tag}.{kind}.csv"))).map_err(fail)?);
        }
        outputs.push(files);
    }
    if outputs[0] == outputs[1] {
        Ok("exact, dft and compare CSV byte-identical across runs".into())
    } else {
        Err("CSV outputs differ between runs".into())
    }
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("JW spectral equivalence", jw_equivalence),
        ("analytic single-qubit gap", single_qubit_gap),
        ("zero-interaction DFT exactness", zero_interaction_dft),
        ("kernel-free reduction", kernel_free_reduction),
        ("single-pole self-consistency", single_pole_consistency),
        ("finite-difference kernel checks", finite_difference_kernels),
        ("Green's function and continuity", green_and_continuity),
        ("adiabatic bound", adiabatic_bound),
        ("variational and HK surrogates", variational_surrogates),
        ("Runge-Gross premise", runge_gross),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
