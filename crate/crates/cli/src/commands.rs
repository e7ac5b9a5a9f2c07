use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use qaegap::evolution::{propagate, runtime_bound, write_trace_csv, EvolutionOptions};
use qaegap::instance::{generate_random, read_instance, write_instance, MaxCutInstance};
use qaegap::io::write_atomic;
use qaegap::oracle::{adiabatic_numerator, GapMethod};
use qaegap::response::{dft_gap, DftGap, ResponseKernel};
use qaegap::scan::{compare, method_name, scan, write_report, Comparison, GapReport, ScalingSpec, ScanOptions};
use qaegap::scf::{energy_functional, scf_solve, EnergyDecomposition, KohnShamState};
use qaegap::Error;

use crate::config::{Format, MethodChoice, RunConfig};
use crate::{selftest, CliError, Command};

type Outcome = Result<String, CliError>;

pub fn dispatch(command: &Command, cfg: &RunConfig) -> Outcome {
    match command {
        Command::Gen => gen(cfg),
        Command::Exact => single_scan(cfg, GapMethod::Exact),
        Command::Scf => scf(cfg),
        Command::Dft => match cfg.s {
            Some(s) => dft_point(cfg, s),
            None => single_scan(cfg, GapMethod::Dft),
        },
        Command::Scan => scan_cmd(cfg),
        Command::Scale => scale(cfg),
        Command::Evolve => evolve(cfg),
        Command::Compare { reports } => compare_cmd(cfg, reports),
        Command::Selftest => selftest::run(),
    }
}

fn load(cfg: &RunConfig) -> Result<MaxCutInstance, Error> {
    read_instance(cfg.instance_path()?)
}

pub fn scan_options(cfg: &RunConfig) -> Result<ScanOptions, Error> {
    let d = ScanOptions::default();
    Ok(ScanOptions {
        xc: cfg.xc()?,
        scf: cfg.scf_options()?,
        kernel: cfg.kernel_options(),
        eta: cfg.eta()?,
        refine_iterations: cfg.refine.unwrap_or(d.refine_iterations),
        eigen: d.eigen,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    write_atomic(path, text.as_bytes())
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("value serializes")
}

fn gen(cfg: &RunConfig) -> Outcome {
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| Error::InvalidArgument("--out is required".into()))?;
    let instance = generate_random(cfg.geometry()?, &cfg.family(), cfg.seed.unwrap_or(0))?;
    write_instance(&instance, &out)?;
    Ok(format!(
        "instance N={} edges={} digest={} out={}",
        instance.num_sites(),
        instance.num_edges(),
        instance.digest(),
        out.display()
    ))
}

fn single_scan(cfg: &RunConfig, method: GapMethod) -> Outcome {
    let instance = load(cfg)?;
    let fmt = cfg.format();
    let report = scan(&instance, &cfg.grid_for(method)?, method, &scan_options(cfg)?)?;
    let out = cfg.output_path(method_name(method), fmt.ext())?;
    write_report(&report, &out, fmt == Format::Json)?;
    Ok(format!("{} status=ok out={}", report.summary(), out.display()))
}

#[derive(Serialize)]
struct ScfOutput<'a> {
    state: &'a KohnShamState,
    energy: EnergyDecomposition,
}

fn scf(cfg: &RunConfig) -> Outcome {
    let s = cfg.s.ok_or_else(|| Error::InvalidArgument("--s is required".into()))?;
    let instance = load(cfg)?;
    let xc = cfg.xc()?;
    let state = scf_solve(&instance, s, &xc, &cfg.scf_options()?)?;
    let energy = energy_functional(&instance, &state, &xc)?;
    let fmt = cfg.format();
    let text = match fmt {
        Format::Json => to_json(&ScfOutput { state: &state, energy }),
        Format::Csv => {
            let mut t = String::from("site,n,v_ks,q_re,q_im,omega\n");
            for (r, n) in state.occupation.values().iter().enumerate() {
                let _ = writeln!(
                    t,
                    "{r},{n},{},{},{},{}",
                    state.v_ks[r],
                    state.q[r].re,
                    state.q[r].im,
                    state.orbitals[r].transition_energy()
                );
            }
            t
        }
    };
    let out = cfg.output_path("scf", fmt.ext())?;
    write_text(&out, &text)?;
    Ok(format!(
        "s={s} iterations={} residual={:.3e} energy={:.10} status=converged out={}",
        state.iterations,
        state.residual,
        energy.total,
        out.display()
    ))
}

#[derive(Serialize)]
struct DftPoint {
    #[serde(flatten)]
    gap: DftGap,
    scf_iters: usize,
}

fn dft_point(cfg: &RunConfig, s: f64) -> Outcome {
    let instance = load(cfg)?;
    let xc = cfg.xc()?;
    let state = scf_solve(&instance, s, &xc, &cfg.scf_options()?)?;
    let kernel = ResponseKernel::new(&instance, &state, &xc, cfg.kernel_options())?;
    let gap = dft_gap(&state, &kernel)?;
    let status = if gap.flagged() { "flagged" } else { "ok" };
    let mut line = format!(
        "s={s} gap={:.10} omega_min={:.10} deltaE={:.10} scf_iters={} status={status}",
        gap.gap, gap.omega_min, gap.delta_e, state.iterations
    );
    if let Some(out) = &cfg.out {
        let text = match cfg.format() {
            Format::Json => to_json(&DftPoint {
                gap: gap.clone(),
                scf_iters: state.iterations,
            }),
            Format::Csv => format!(
                "s,gap,status,scf_iters,omega_min,deltaE\n{s},{},{status},{},{},{}\n",
                gap.gap, state.iterations, gap.omega_min, gap.delta_e
            ),
        };
        write_text(out, &text)?;
        let _ = write!(line, " out={}", out.display());
    }
    Ok(line)
}

fn prefix_path(prefix: &Path, tag: &str, ext: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(format!(".{tag}.{ext}"));
    PathBuf::from(name)
}

fn scan_cmd(cfg: &RunConfig) -> Outcome {
    let instance = load(cfg)?;
    let choice = cfg.method.unwrap_or(MethodChoice::Both);
    let opts = scan_options(cfg)?;
    let fmt = cfg.format();
    let prefix = match &cfg.out {
        Some(p) => p.clone(),
        None => cfg.instance_path()?.with_extension(""),
    };
    // Both methods share the DFT grid so the comparison is pointwise.
    let grid_method = if choice == MethodChoice::Exact {
        GapMethod::Exact
    } else {
        GapMethod::Dft
    };
    let grid = cfg.grid_for(grid_method)?;
    let mut reports: Vec<GapReport> = Vec::new();
    for method in choice.methods() {
        let report = scan(&instance, &grid, method, &opts)?;
        write_report(
            &report,
            &prefix_path(&prefix, method_name(method), fmt.ext()),
            fmt == Format::Json,
        )?;
        reports.push(report);
    }
    if let [a, b] = reports.as_slice() {
        let cmp = compare(a, b)?;
        let path = prefix_path(&prefix, "compare", fmt.ext());
        write_text(&path, &comparison_text(&cmp, fmt))?;
        Ok(format!(
            "exact_min_gap={} dft_min_gap={} {} status=ok out={}",
            fmt_opt(a.min_gap),
            fmt_opt(b.min_gap),
            cmp.summary(),
            prefix.display()
        ))
    } else {
        Ok(format!("{} status=ok out={}", reports[0].summary(), prefix.display()))
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |x| format!("{x:.10}"))
}

fn comparison_text(cmp: &Comparison, fmt: Format) -> String {
    match fmt {
        Format::Csv => cmp.to_csv(),
        Format::Json => cmp.to_json(),
    }
}

fn scale(cfg: &RunConfig) -> Outcome {
    let sizes = cfg
        .sizes
        .clone()
        .ok_or_else(|| Error::InvalidArgument("--sizes is required".into()))?;
    let choice = cfg.method.unwrap_or(MethodChoice::Both);
    let spec = ScalingSpec {
        family: cfg.family(),
        sizes,
        seeds: cfg.seeds.clone().unwrap_or_else(|| vec![cfg.seed.unwrap_or(0)]),
        methods: choice.methods(),
        options: scan_options(cfg)?,
        grid: if cfg.grid.is_some() || cfg.smin.is_some() || cfg.smax.is_some() {
            Some(cfg.grid_for(GapMethod::Dft)?)
        } else {
            None
        },
    };
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("scaling"));
    let table = qaegap::scan::scaling_study(&spec, &dir)?;
    let fmt = cfg.format();
    let path = dir.join(format!("scaling.{}", fmt.ext()));
    let text = match fmt {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    };
    write_text(&path, &text)?;
    let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
    Ok(format!(
        "rows={} failed={failed} status={} out={}",
        table.rows.len(),
        if failed == 0 { "ok" } else { "partial" },
        path.display()
    ))
}

#[derive(Serialize)]
struct EvolveOutput {
    #[serde(rename = "T")]
    runtime: f64,
    dt: f64,
    steps: usize,
    success_probability: f64,
    norm_drift: f64,
    numerator: Option<f64>,
    min_gap: Option<f64>,
    c: Option<f64>,
}

/// Most rows a trace file gets; longer runs are strided.
const MAX_TRACE_ROWS: usize = 10_000;

fn evolve(cfg: &RunConfig) -> Outcome {
    let instance = load(cfg)?;
    let (runtime, numerator, min_gap, c) = match cfg.runtime {
        Some(t) => (t, None, None, None),
        None => {
            let c = cfg.c.unwrap_or(100.0);
            let grid = cfg.grid_for(GapMethod::Exact)?;
            let m = adiabatic_numerator(&instance, &grid)?.value;
            let report = scan(&instance, &grid, GapMethod::Exact, &scan_options(cfg)?)?;
            let delta = report
                .refined
                .map(|r| r.1)
                .or(report.min_gap)
                .ok_or_else(|| Error::DegenerateGap("no nondegenerate grid point".into()))?;
            (runtime_bound(m, delta, c)?, Some(m), Some(delta), Some(c))
        }
    };
    let dt = cfg.dt.unwrap_or_else(|| (1e-2f64).min(runtime / 1e4));
    let steps = (runtime / dt).ceil().max(1.0) as usize;
    let opts = EvolutionOptions {
        dt: cfg.dt,
        trace_every: cfg.trace.as_ref().map(|_| steps.div_ceil(MAX_TRACE_ROWS).max(1)),
        ..Default::default()
    };
    let result = propagate(&instance, runtime, &opts)?;
    let mut line = format!(
        "T={runtime:.6} dt={:.3e} steps={} p_success={:.10} norm_drift={:.3e} status=ok",
        result.dt, result.steps, result.success_probability, result.norm_drift
    );
    if let Some(path) = &cfg.trace {
        write_trace_csv(&result.trace, path)?;
        let _ = write!(line, " trace={}", path.display());
    }
    if let Some(out) = &cfg.out {
        let summary = EvolveOutput {
            runtime,
            dt: result.dt,
            steps: result.steps,
            success_probability: result.success_probability,
            norm_drift: result.norm_drift,
            numerator,
            min_gap,
            c,
        };
        let text = match cfg.format() {
            Format::Json => to_json(&summary),
            Format::Csv => format!(
                "T,dt,steps,success_probability,norm_drift\n{runtime},{},{},{},{}\n",
                summary.dt, summary.steps, summary.success_probability, summary.norm_drift
            ),
        };
        write_text(out, &text)?;
        let _ = write!(line, " out={}", out.display());
    }
    Ok(line)
}

fn compare_cmd(cfg: &RunConfig, reports: &[PathBuf]) -> Outcome {
    let read = |p: &PathBuf| -> Result<GapReport, Error> {
        let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
            path: p.display().to_string(),
            source: e,
        })?;
        GapReport::from_json(&text)
    };
    let a = read(&reports[0])?;
    let b = read(&reports[1])?;
    let cmp = compare(&a, &b)?;
    let mut line = format!("{} status=ok", cmp.summary());
    if let Some(out) = &cfg.out {
        write_text(out, &comparison_text(&cmp, cfg.format()))?;
        let _ = write!(line, " out={}", out.display());
    }
    Ok(line)
}
