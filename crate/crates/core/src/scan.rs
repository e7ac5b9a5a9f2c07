//! Gap curves over the schedule, comparisons and size-scaling studies.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::EigenOptions;
use crate::error::{Error, Result};
use crate::instance::{generate_random, write_instance, LatticeGeometry, MaxCutInstance, RandomInstanceParams};
use crate::io::write_atomic;
use crate::oracle::{minimum_of, uniform_grid, ExactOracle, GapCurve, GapMethod, GapPoint, DEGENERACY_TOL};
use crate::response::{dft_gap, KernelOptions, ResponseKernel, DEFAULT_ETA};
use crate::scf::{scf_solve, ScfOptions};
use crate::xc::XcFunctional;

pub const DFT_GRID: (f64, f64, usize) = (0.02, 0.98, 49);
pub const EXACT_GRID: (f64, f64, usize) = (0.0, 1.0, 101);

pub fn default_grid(method: GapMethod) -> Vec<f64> {
    let (lo, hi, k) = match method {
        GapMethod::Exact => EXACT_GRID,
        GapMethod::Dft => DFT_GRID,
    };
    uniform_grid(lo, hi, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Converged,
    /// The two lowest levels coincide; excluded from the minimum.
    Degenerate,
    /// A value was produced but failed a sanity check.
    Flagged,
    Failed,
}

impl PointStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::Degenerate => "degenerate",
            Self::Flagged => "flagged",
            Self::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSample {
    pub s: f64,
    pub gap: Option<f64>,
    pub status: PointStatus,
    pub scf_iters: Option<usize>,
    pub omega_min: Option<f64>,
    pub delta_e: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub instance_digest: String,
    pub method: GapMethod,
    pub grid: Vec<f64>,
    pub samples: Vec<GapSample>,
    /// Minimum over converged samples.
    pub min_gap: Option<f64>,
    pub s_star: Option<f64>,
    /// Golden-section refinement of the exact minimum, off the grid.
    pub refined: Option<(f64, f64)>,
    pub wall_ms: u64,
}

impl GapReport {
    pub fn gaps(&self) -> Vec<Option<f64>> {
        self.samples.iter().map(|p| p.gap).collect()
    }

    pub fn count(&self, status: PointStatus) -> usize {
        self.samples.iter().filter(|p| p.status == status).count()
    }

    /// One-line description.
    pub fn summary(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| format!("{x:.10}"));
        let mut line = format!(
            "method={} min_gap={} s_star={} points={} converged={} flagged={} failed={}",
            method_name(self.method),
            fmt(self.min_gap),
            fmt(self.s_star),
            self.samples.len(),
            self.count(PointStatus::Converged),
            self.count(PointStatus::Flagged),
            self.count(PointStatus::Failed),
        );
        if let Some((s, g)) = self.refined {
            let _ = write!(line, " refined_gap={g:.10} refined_s={s:.10}");
        }
        line
    }

    /// `s,gap,status,scf_iters,omega_min,deltaE`; timing is left out so equal
    /// runs give equal bytes.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        let mut out = String::from("s,gap,status,scf_iters,omega_min,deltaE\n");
        for p in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                p.s,
                opt(p.gap),
                p.status.as_str(),
                p.scf_iters.map_or_else(String::new, |k| k.to_string()),
                opt(p.omega_min),
                opt(p.delta_e),
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            field: "report".into(),
            message: e.to_string(),
        })
    }
}

pub fn method_name(method: GapMethod) -> &'static str {
    match method {
        GapMethod::Exact => "exact",
        GapMethod::Dft => "dft",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub xc: XcFunctional,
    pub scf: ScfOptions,
    pub kernel: KernelOptions,
    /// Broadening carried for response probes; gaps use the `eta -> 0` poles.
    pub eta: f64,
    /// Golden-section steps around the exact minimum; 0 disables.
    pub refine_iterations: usize,
    pub eigen: EigenOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            xc: XcFunctional::None,
            scf: ScfOptions::default(),
            kernel: KernelOptions::default(),
            eta: DEFAULT_ETA,
            refine_iterations: 60,
            eigen: EigenOptions::default(),
        }
    }
}

fn exact_sample(oracle: &ExactOracle, s: f64) -> GapSample {
    match oracle.gap_at(s) {
        Ok(p) => GapSample {
            s,
            gap: Some(p.gap),
            status: if p.gap < DEGENERACY_TOL {
                PointStatus::Degenerate
            } else {
                PointStatus::Converged
            },
            scf_iters: None,
            omega_min: None,
            delta_e: None,
            note: None,
        },
        Err(e) => failed(s, &e),
    }
}

fn failed(s: f64, e: &Error) -> GapSample {
    GapSample {
        s,
        gap: None,
        status: PointStatus::Failed,
        scf_iters: None,
        omega_min: None,
        delta_e: None,
        note: Some(e.to_string()),
    }
}

fn dft_sample(instance: &MaxCutInstance, s: f64, options: &ScanOptions) -> GapSample {
    let run = || -> Result<GapSample> {
        let state = scf_solve(instance, s, &options.xc, &options.scf)?;
        let kernel = ResponseKernel::new(instance, &state, &options.xc, options.kernel)?;
        let g = dft_gap(&state, &kernel)?;
        let (status, note) = if g.negative {
            (PointStatus::Flagged, Some("corrected gap is not positive".to_string()))
        } else if g.reordered {
            (PointStatus::Flagged, Some("corrected levels reordered".to_string()))
        } else if g.gap < DEGENERACY_TOL {
            (PointStatus::Degenerate, None)
        } else {
            (PointStatus::Converged, None)
        };
        Ok(GapSample {
            s,
            gap: Some(g.gap),
            status,
            scf_iters: Some(state.iterations),
            omega_min: Some(g.omega_min),
            delta_e: Some(g.delta_e),
            note,
        })
    };
    run().unwrap_or_else(|e| failed(s, &e))
}

fn check_grid(grid: &[f64], method: GapMethod) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("scan grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|s| !s.is_finite()) {
        return Err(Error::invalid(format!("grid value {bad} is not finite")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("scan grid must be strictly increasing"));
    }
    let ok = |s: f64| match method {
        GapMethod::Exact => (0.0..=1.0).contains(&s),
        GapMethod::Dft => s > 0.0 && s < 1.0,
    };
    if let Some(bad) = grid.iter().find(|s| !ok(**s)) {
        return Err(Error::Domain(format!(
            "grid point {bad} outside the {} domain",
            method_name(method)
        )));
    }
    Ok(())
}

/// Gap at every grid point. Failed points are recorded, not fatal.
pub fn scan(instance: &MaxCutInstance, grid: &[f64], method: GapMethod, options: &ScanOptions) -> Result<GapReport> {
    check_grid(grid, method)?;
    let start = Instant::now();
    let oracle = match method {
        GapMethod::Exact => Some(ExactOracle::new(instance)?.with_options(options.eigen)),
        GapMethod::Dft => {
            options.scf.validate()?;
            options.xc.validate()?;
            None
        }
    };
    let samples: Vec<GapSample> = grid
        .par_iter()
        .map(|&s| match &oracle {
            Some(o) => exact_sample(o, s),
            None => dft_sample(instance, s, options),
        })
        .collect();
    if samples.iter().all(|p| p.status == PointStatus::Failed) {
        return Err(Error::Solver {
            iterations: samples.len(),
            residual: f64::NAN,
        });
    }
    let usable: Vec<(f64, f64)> = samples
        .iter()
        .filter(|p| p.status == PointStatus::Converged)
        .map(|p| (p.s, p.gap.expect("converged samples carry a gap")))
        .collect();
    let best = minimum_of(usable.iter().map(|(s, g)| (s, g)));
    let refined = match (&oracle, best) {
        (Some(o), Some((min_gap, s_star))) if options.refine_iterations > 0 => {
            let curve = GapCurve {
                method,
                points: usable
                    .iter()
                    .map(|&(s, gap)| GapPoint {
                        s,
                        gap,
                        e0: f64::NAN,
                        e1: f64::NAN,
                        degenerate: false,
                    })
                    .collect(),
                min_gap,
                s_star,
            };
            o.refine_minimum(&curve, options.refine_iterations).ok()
        }
        _ => None,
    };
    Ok(GapReport {
        instance_digest: instance.digest(),
        method,
        grid: grid.to_vec(),
        samples,
        min_gap: best.map(|b| b.0),
        s_star: best.map(|b| b.1),
        refined,
        wall_ms: start.elapsed().as_millis() as u64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub s: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub abs_diff: Option<f64>,
    pub rel_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub instance_digest: String,
    pub method_a: GapMethod,
    pub method_b: GapMethod,
    pub rows: Vec<ComparisonRow>,
    pub max_abs_diff: f64,
    pub max_rel_diff: f64,
    pub s_star_a: Option<f64>,
    pub s_star_b: Option<f64>,
    /// Minimizers lie within one grid step of each other.
    pub s_star_agree: bool,
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        let mut out = format!(
            "s,{},{},abs_diff,rel_diff\n",
            method_name(self.method_a),
            method_name(self.method_b)
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.s,
                opt(r.a),
                opt(r.b),
                opt(r.abs_diff),
                opt(r.rel_diff)
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison serializes")
    }

    pub fn summary(&self) -> String {
        format!(
            "max_abs_diff={:e} max_rel_diff={:e} s_star_agree={}",
            self.max_abs_diff, self.max_rel_diff, self.s_star_agree
        )
    }
}

/// Pointwise differences of two reports on the same instance and grid.
pub fn compare(a: &GapReport, b: &GapReport) -> Result<Comparison> {
    if a.instance_digest != b.instance_digest {
        return Err(Error::Validation(format!(
            "reports belong to different instances ({} vs {})",
            a.instance_digest, b.instance_digest
        )));
    }
    if a.grid != b.grid {
        return Err(Error::Validation("reports use different grids".into()));
    }
    let usable = |p: &GapSample| match p.status {
        PointStatus::Converged => p.gap,
        _ => None,
    };
    let rows: Vec<ComparisonRow> = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(pa, pb)| {
            let (ga, gb) = (usable(pa), usable(pb));
            let abs_diff = ga.zip(gb).map(|(x, y)| (x - y).abs());
            let rel_diff = ga
                .zip(gb)
                .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE));
            ComparisonRow {
                s: pa.s,
                a: ga,
                b: gb,
                abs_diff,
                rel_diff,
            }
        })
        .collect();
    let max_of = |f: fn(&ComparisonRow) -> Option<f64>| rows.iter().filter_map(f).fold(0.0, f64::max);
    let step = a.grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let s_star_agree = match (a.s_star, b.s_star) {
        (Some(x), Some(y)) => (x - y).abs() <= step * (1.0 + 1e-9),
        _ => false,
    };
    Ok(Comparison {
        instance_digest: a.instance_digest.clone(),
        method_a: a.method,
        method_b: b.method,
        max_abs_diff: max_of(|r| r.abs_diff),
        max_rel_diff: max_of(|r| r.rel_diff),
        rows,
        s_star_a: a.s_star,
        s_star_b: b.s_star,
        s_star_agree,
    })
}

/// Near-square lattice with `rows` the largest divisor of `n` not above `sqrt n`.
pub fn scaling_geometry(n: usize) -> Result<LatticeGeometry> {
    if n == 0 {
        return Err(Error::invalid("lattice needs at least one site"));
    }
    let rows = (1..=n)
        .take_while(|r| r * r <= n)
        .filter(|r| n.is_multiple_of(*r))
        .last()
        .unwrap_or(1);
    LatticeGeometry::new(rows, n / rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub family: RandomInstanceParams,
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub methods: Vec<GapMethod>,
    pub options: ScanOptions,
    /// Grid used for every method; `None` takes each method's default.
    pub grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub seed: u64,
    pub method: GapMethod,
    pub instance_path: PathBuf,
    pub gap_min: Option<f64>,
    pub s_star: Option<f64>,
    pub wall_ms: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
}

impl ScalingTable {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        let mut out = String::from("N,seed,method,gap_min,s_star,wall_ms\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.n,
                r.seed,
                method_name(r.method),
                opt(r.gap_min),
                opt(r.s_star),
                r.wall_ms
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

/// Seeded instances for every `(N, seed)`, stored under `out_dir`, and the
/// minimum gap of each for every method. Row failures are recorded.
pub fn scaling_study(spec: &ScalingSpec, out_dir: &Path) -> Result<ScalingTable> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let jobs: Vec<(usize, u64)> = spec
        .sizes
        .iter()
        .flat_map(|&n| spec.seeds.iter().map(move |&seed| (n, seed)))
        .collect();
    let rows: Vec<Vec<ScalingRow>> = jobs
        .par_iter()
        .map(|&(n, seed)| -> Result<Vec<ScalingRow>> {
            let path = out_dir.join(format!("instance_n{n}_seed{seed}.json"));
            let instance = scaling_geometry(n).and_then(|g| generate_random(g, &spec.family, seed))?;
            write_instance(&instance, &path)?;
            Ok(spec
                .methods
                .iter()
                .map(|&method| {
                    let start = Instant::now();
                    let grid = spec.grid.clone().unwrap_or_else(|| default_grid(method));
                    let outcome = scan(&instance, &grid, method, &spec.options);
                    let wall_ms = start.elapsed().as_millis() as u64;
                    match outcome {
                        Ok(report) => ScalingRow {
                            n,
                            seed,
                            method,
                            instance_path: path.clone(),
                            gap_min: report.min_gap,
                            s_star: report.s_star,
                            wall_ms,
                            error: None,
                        },
                        Err(e) => ScalingRow {
                            n,
                            seed,
                            method,
                            instance_path: path.clone(),
                            gap_min: None,
                            s_star: None,
                            wall_ms,
                            error: Some(e.to_string()),
                        },
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(ScalingTable {
        rows: rows.into_iter().flatten().collect(),
    })
}

pub fn write_report(report: &GapReport, path: &Path, json: bool) -> Result<()> {
    let text = if json { report.to_json() } else { report.to_csv() };
    write_atomic(path, text.as_bytes())
}
