//! Run configuration shared by every subcommand.
//!
//! The same struct is parsed from flags and from a JSON file; flags win.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use qaegap::instance::{LatticeGeometry, RandomInstanceParams, SignConvention};
use qaegap::oracle::{uniform_grid, GapMethod};
use qaegap::response::KernelOptions;
use qaegap::scan::{DFT_GRID, EXACT_GRID};
use qaegap::scf::ScfOptions;
use qaegap::xc::XcFunctional;
use qaegap::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    Exact,
    Dft,
    Both,
}

impl MethodChoice {
    pub fn methods(self) -> Vec<GapMethod> {
        match self {
            MethodChoice::Exact => vec![GapMethod::Exact],
            MethodChoice::Dft => vec![GapMethod::Dft],
            MethodChoice::Both => vec![GapMethod::Exact, GapMethod::Dft],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum XcChoice {
    None,
    LocalCorrelation,
    Probe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ConventionChoice {
    GroundEncodesMax,
    PaperLiteral,
}

/// `xc_params` in a config file is either a path or the parameter object itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum XcParams {
    Path(PathBuf),
    Inline(Value),
}

impl std::str::FromStr for XcParams {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(XcParams::Path(PathBuf::from(s)))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// JSON config file; flags given on the command line override it.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Instance JSON file.
    #[arg(long, global = true)]
    pub instance: Option<PathBuf>,
    /// Number of grid points.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub smin: Option<f64>,
    #[arg(long, global = true)]
    pub smax: Option<f64>,
    /// Single interpolation parameter for `scf` and `dft`.
    #[arg(long, global = true)]
    pub s: Option<f64>,
    #[arg(long, global = true)]
    pub method: Option<MethodChoice>,
    /// Response broadening.
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// SCF linear mixing fraction.
    #[arg(long, global = true)]
    pub mix: Option<f64>,
    /// SCF convergence tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub xc: Option<XcChoice>,
    /// JSON file with the functional parameters.
    #[arg(long, global = true)]
    pub xc_params: Option<XcParams>,
    /// Drop the Hartree part of the response kernel.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub no_hartree: Option<bool>,
    /// Golden-section refinement steps around the exact minimum.
    #[arg(long, global = true)]
    pub refine: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub format: Option<Format>,

    #[arg(long, global = true)]
    pub rows: Option<usize>,
    #[arg(long, global = true)]
    pub cols: Option<usize>,
    /// Jordan-Wigner statistics parameter.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub m: Option<i64>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub non_interacting: Option<bool>,
    /// Probability of an edge between non-neighbouring sites.
    #[arg(long, global = true)]
    pub extra_edges: Option<f64>,
    #[arg(long, global = true)]
    pub convention: Option<ConventionChoice>,

    #[arg(long, global = true, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,

    /// Total evolution time.
    #[arg(long = "T", global = true)]
    #[serde(rename = "T")]
    pub runtime: Option<f64>,
    /// Runtime constant in `T = c M / Delta^2`.
    #[arg(long, global = true)]
    pub c: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Per-step trace CSV path.
    #[arg(long, global = true)]
    pub trace: Option<PathBuf>,
}

fn parse_error(field: &str, message: impl ToString) -> Error {
    Error::Parse {
        field: field.into(),
        message: message.to_string(),
    }
}

fn read_text(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| parse_error("config", e))
    }

    /// Fields set in `self` replace those in `base`.
    pub fn over(&self, base: &RunConfig) -> Result<RunConfig, Error> {
        let mut merged = serde_json::to_value(base).map_err(|e| parse_error("config", e))?;
        let top = serde_json::to_value(self).map_err(|e| parse_error("config", e))?;
        if let (Value::Object(dst), Value::Object(src)) = (&mut merged, top) {
            for (k, v) in src {
                if !v.is_null() {
                    dst.insert(k, v);
                }
            }
        }
        let mut out: RunConfig = serde_json::from_value(merged).map_err(|e| parse_error("config", e))?;
        out.config = self.config.clone();
        Ok(out)
    }

    /// Load the file named by `--config`, if any, and lay the flags over it.
    pub fn resolve(&self) -> Result<RunConfig, Error> {
        match &self.config {
            Some(path) => self.over(&Self::from_json(&read_text(path)?)?),
            None => Ok(self.clone()),
        }
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or(Format::Csv)
    }

    pub fn instance_path(&self) -> Result<&Path, Error> {
        self.instance
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("--instance is required".into()))
    }

    /// `<instance stem>.<tag>.<ext>` next to the instance, unless `--out` is set.
    pub fn output_path(&self, tag: &str, ext: &str) -> Result<PathBuf, Error> {
        if let Some(out) = &self.out {
            return Ok(out.clone());
        }
        let inst = self.instance_path()?;
        let stem = inst.file_stem().and_then(|s| s.to_str()).unwrap_or("instance");
        Ok(inst.with_file_name(format!("{stem}.{tag}.{ext}")))
    }

    pub fn grid_for(&self, method: GapMethod) -> Result<Vec<f64>, Error> {
        let (lo, hi, k) = match method {
            GapMethod::Exact => EXACT_GRID,
            GapMethod::Dft => DFT_GRID,
        };
        let lo = self.smin.unwrap_or(lo);
        let hi = self.smax.unwrap_or(hi);
        let k = self.grid.unwrap_or(k);
        if k == 0 {
            return Err(Error::Validation("--grid must be positive".into()));
        }
        if !(lo.is_finite() && hi.is_finite()) || (k > 1 && hi <= lo) {
            return Err(Error::Validation(format!(
                "grid bounds [{lo}, {hi}] are not increasing"
            )));
        }
        Ok(uniform_grid(lo, hi, k))
    }

    pub fn scf_options(&self) -> Result<ScfOptions, Error> {
        let d = ScfOptions::default();
        let opts = ScfOptions {
            mixing: self.mix.unwrap_or(d.mixing),
            tol: self.tol.unwrap_or(d.tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            ..d
        };
        opts.validate()?;
        Ok(opts)
    }

    pub fn kernel_options(&self) -> KernelOptions {
        KernelOptions {
            hartree: !self.no_hartree.unwrap_or(false),
        }
    }

    pub fn eta(&self) -> Result<f64, Error> {
        let eta = self.eta.unwrap_or(qaegap::response::DEFAULT_ETA);
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Validation(format!("--eta must be positive, got {eta}")));
        }
        Ok(eta)
    }

    pub fn xc(&self) -> Result<XcFunctional, Error> {
        let variant = match self.xc.unwrap_or(XcChoice::None) {
            XcChoice::None => return Ok(XcFunctional::None),
            XcChoice::LocalCorrelation => "local_correlation",
            XcChoice::Probe => "discontinuity_probe",
        };
        let params = match &self.xc_params {
            Some(XcParams::Path(p)) => {
                serde_json::from_str::<Value>(&read_text(p)?).map_err(|e| parse_error("xc_params", e))?
            }
            Some(XcParams::Inline(v)) => v.clone(),
            None => return Err(Error::InvalidArgument(format!("--xc {variant} needs --xc-params"))),
        };
        let xc: XcFunctional = serde_json::from_value(serde_json::json!({ "variant": variant, "params": params }))
            .map_err(|e| parse_error("xc_params", e))?;
        xc.validate()?;
        Ok(xc)
    }

    pub fn geometry(&self) -> Result<LatticeGeometry, Error> {
        let rows = self
            .rows
            .ok_or_else(|| Error::InvalidArgument("--rows is required".into()))?;
        let cols = self
            .cols
            .ok_or_else(|| Error::InvalidArgument("--cols is required".into()))?;
        LatticeGeometry::new(rows, cols)
    }

    pub fn family(&self) -> RandomInstanceParams {
        let mut p = if self.non_interacting.unwrap_or(false) {
            RandomInstanceParams::non_interacting()
        } else {
            RandomInstanceParams::default()
        };
        if let Some(x) = self.extra_edges {
            p.extra_edge_probability = x;
        }
        if let Some(m) = self.m {
            p.jw_m = m;
        }
        if let Some(c) = self.convention {
            p.sign_convention = match c {
                ConventionChoice::GroundEncodesMax => SignConvention::GroundEncodesMax,
                ConventionChoice::PaperLiteral => SignConvention::PaperLiteral,
            };
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = RunConfig::from_json(r#"{"grid": 11, "eta": 0.01, "xc": "probe", "T": 3.0}"#).unwrap();
        let flags = RunConfig {
            grid: Some(21),
            ..Default::default()
        };
        let cfg = flags.over(&file).unwrap();
        assert_eq!(cfg.grid, Some(21));
        assert_eq!(cfg.eta, Some(0.01));
        assert_eq!(cfg.xc, Some(XcChoice::Probe));
        assert_eq!(cfg.runtime, Some(3.0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"gird": 3}"#).is_err());
    }

    #[test]
    fn inline_xc_params() {
        let cfg = RunConfig::from_json(
            r#"{"xc": "probe", "xc_params": {"coefficients": [0.0, 0.1], "step": 0.2, "threshold": 0.5}}"#,
        )
        .unwrap();
        assert_eq!(
            cfg.xc().unwrap(),
            XcFunctional::DiscontinuityProbe {
                coefficients: vec![0.0, 0.1],
                step: 0.2,
                threshold: 0.5
            }
        );
        let missing = RunConfig {
            xc: Some(XcChoice::LocalCorrelation),
            ..Default::default()
        };
        assert!(missing.xc().is_err());
    }

    #[test]
    fn default_grids_and_paths() {
        let cfg = RunConfig {
            instance: Some(PathBuf::from("dir/inst.json")),
            ..Default::default()
        };
        assert_eq!(cfg.grid_for(GapMethod::Dft).unwrap().len(), 49);
        assert_eq!(cfg.grid_for(GapMethod::Exact).unwrap().len(), 101);
        assert_eq!(
            cfg.output_path("exact", "csv").unwrap(),
            PathBuf::from("dir/inst.exact.csv")
        );
    }
}
