//! Weighted MAXCUT instances on a rectangular lattice.
//!
//! Sites are indexed row-major, `site_index(x, y) = y * cols + x`. Edge weights
//! are stored once per unordered pair `(a, b)` with `a < b`; the payoff's
//! ordered double sum is evaluated so that each stored edge contributes
//! `w * (s_a XOR s_b)`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest instance `brute_force_max` will enumerate by default.
pub const DEFAULT_ENUMERATION_CAP: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeGeometry {
    rows: usize,
    cols: usize,
}

impl LatticeGeometry {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "lattice must have positive extent, got {rows}x{cols}"
            )));
        }
        Ok(Self { rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn num_sites(&self) -> usize {
        self.rows * self.cols
    }

    pub fn site_index(&self, x: usize, y: usize) -> Option<usize> {
        (x < self.cols && y < self.rows).then(|| y * self.cols + x)
    }

    /// Inverse of [`site_index`](Self::site_index): `(x, y)` of a site.
    pub fn coords(&self, site: usize) -> (usize, usize) {
        debug_assert!(site < self.num_sites());
        (site % self.cols, site / self.cols)
    }

    /// Site reached by one step along `+e1` (`axis = 0`) or `+e2` (`axis = 1`).
    pub fn forward_neighbor(&self, site: usize, axis: usize) -> Option<usize> {
        let (x, y) = self.coords(site);
        match axis {
            0 => self.site_index(x + 1, y),
            1 => self.site_index(x, y + 1),
            _ => None,
        }
    }

    /// Nearest-neighbour pairs `(a, b)` with `a < b`.
    pub fn nearest_neighbor_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for site in 0..self.num_sites() {
            for axis in 0..2 {
                if let Some(nb) = self.forward_neighbor(site, axis) {
                    pairs.push((site, nb));
                }
            }
        }
        pairs.sort_unstable();
        pairs
    }
}

/// Which way the problem Hamiltonian encodes the payoff.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// Payoff maximizers are ground states of `H_P`.
    #[default]
    GroundEncodesMax,
    /// `H_P` exactly as the textbook expression reads; its diagonal equals `P(s)`.
    PaperLiteral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxCutInstance {
    geometry: LatticeGeometry,
    node_weights: Vec<f64>,
    edges: BTreeMap<(usize, usize), f64>,
    jw_m: i64,
    sign_convention: SignConvention,
}

impl MaxCutInstance {
    /// Builds and validates an instance. Edges may be given in either order but
    /// a pair must not appear twice with different weights.
    pub fn new(
        geometry: LatticeGeometry,
        node_weights: Vec<f64>,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
        jw_m: i64,
        sign_convention: SignConvention,
    ) -> Result<Self> {
        let n = geometry.num_sites();
        if node_weights.len() != n {
            return Err(Error::Validation(format!(
                "expected {n} node weights, got {}",
                node_weights.len()
            )));
        }
        if let Some((site, w)) = node_weights.iter().enumerate().find(|(_, w)| !w.is_finite()) {
            return Err(Error::Validation(format!(
                "node weight at site {site} is not finite ({w})"
            )));
        }
        let mut map = BTreeMap::new();
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(Error::Validation(format!(
                    "edge ({a}, {b}) references a site outside the lattice"
                )));
            }
            if a == b {
                return Err(Error::Validation(format!("self-edge at site {a}")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Validation(format!(
                    "edge ({a}, {b}) weight must be finite and nonnegative, got {w}"
                )));
            }
            let key = (a.min(b), a.max(b));
            match map.insert(key, w) {
                Some(prev) if prev != w => {
                    return Err(Error::Validation(format!(
                        "asymmetric edge ({}, {}): weights {prev} and {w}",
                        key.0, key.1
                    )));
                }
                _ => {}
            }
        }
        Ok(Self {
            geometry,
            node_weights,
            edges: map,
            jw_m,
            sign_convention,
        })
    }

    pub fn geometry(&self) -> LatticeGeometry {
        self.geometry
    }

    pub fn num_sites(&self) -> usize {
        self.geometry.num_sites()
    }

    pub fn node_weights(&self) -> &[f64] {
        &self.node_weights
    }

    pub fn node_weight(&self, site: usize) -> f64 {
        self.node_weights[site]
    }

    /// Unordered edges `(a, b, w)` with `a < b`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges.iter().map(|(&(a, b), &w)| (a, b, w))
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_weight(&self, a: usize, b: usize) -> f64 {
        self.edges.get(&(a.min(b), a.max(b))).copied().unwrap_or(0.0)
    }

    pub fn jw_m(&self) -> i64 {
        self.jw_m
    }

    pub fn sign_convention(&self) -> SignConvention {
        self.sign_convention
    }

    pub fn with_sign_convention(mut self, convention: SignConvention) -> Self {
        self.sign_convention = convention;
        self
    }

    pub fn with_jw_m(mut self, m: i64) -> Self {
        self.jw_m = m;
        self
    }

    /// Dense symmetric edge-weight matrix (zero diagonal).
    pub fn edge_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.num_sites();
        let mut w = vec![vec![0.0; n]; n];
        for (a, b, wt) in self.edges() {
            w[a][b] = wt;
            w[b][a] = wt;
        }
        w
    }

    /// `W_r = sum_{r' != r} w_{r r'}`.
    pub fn incident_weight(&self, site: usize) -> f64 {
        self.edges()
            .filter(|&(a, b, _)| a == site || b == site)
            .map(|(_, _, w)| w)
            .sum()
    }

    /// `C = sum_r w_r + sum_{unordered} w_{r r'}`, the payoff upper bound for
    /// nonnegative weights.
    pub fn total_weight(&self) -> f64 {
        self.node_weights.iter().sum::<f64>() + self.edges.values().sum::<f64>()
    }

    /// True when every edge weight is zero (the sites decouple).
    pub fn is_non_interacting(&self) -> bool {
        self.edges.values().all(|&w| w == 0.0)
    }

    /// Payoff of the assignment encoded by basis index `index` (site 0 is the
    /// most significant bit).
    pub fn payoff_index(&self, index: usize) -> f64 {
        let n = self.num_sites();
        let bit = |site: usize| (index >> (n - 1 - site)) & 1;
        let mut p = 0.0;
        for (site, &w) in self.node_weights.iter().enumerate() {
            if bit(site) == 1 {
                p += w;
            }
        }
        for (&(a, b), &w) in &self.edges {
            if bit(a) != bit(b) {
                p += w;
            }
        }
        p
    }

    /// Short stable digest used to tie reports to the instance they came from.
    pub fn digest(&self) -> String {
        // FNV-1a over the canonical JSON encoding.
        let text = serde_json::to_string(&InstanceFile::from(self)).unwrap_or_default();
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in text.bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// A binary string `s_{r_1} ... s_{r_N}` in site-index order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CutAssignment {
    bits: Vec<u8>,
}

impl CutAssignment {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::invalid(format!("cut bits must be 0 or 1, got {b}")));
        }
        Ok(Self { bits })
    }

    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![0; n] }
    }

    pub fn from_index(index: usize, n: usize) -> Self {
        let bits = (0..n).map(|site| ((index >> (n - 1 - site)) & 1) as u8).collect();
        Self { bits }
    }

    pub fn index(&self) -> usize {
        self.bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn complement(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|b| 1 - b).collect(),
        }
    }
}

impl fmt::Display for CutAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl FromStr for CutAssignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::invalid(format!("invalid cut character {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Self { bits })
    }
}

/// `P(s) = sum_r s_r w_r + sum_{r != r'} s_r (1 - s_r') w_{r r'}`.
pub fn payoff(instance: &MaxCutInstance, cut: &CutAssignment) -> Result<f64> {
    if cut.len() != instance.num_sites() {
        return Err(Error::DimensionMismatch {
            expected: instance.num_sites(),
            actual: cut.len(),
        });
    }
    Ok(instance.payoff_index(cut.index()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxCutSolution {
    pub max_payoff: f64,
    /// Complete set of maximizers, sorted by basis index.
    pub maximizers: Vec<CutAssignment>,
}

impl MaxCutSolution {
    pub fn maximizer_indices(&self) -> Vec<usize> {
        self.maximizers.iter().map(CutAssignment::index).collect()
    }
}

pub fn brute_force_max(instance: &MaxCutInstance) -> Result<MaxCutSolution> {
    brute_force_max_with_cap(instance, DEFAULT_ENUMERATION_CAP)
}

pub fn brute_force_max_with_cap(instance: &MaxCutInstance, cap: usize) -> Result<MaxCutSolution> {
    let n = instance.num_sites();
    if n > cap {
        return Err(Error::ResourceLimit {
            what: "enumeration sites",
            requested: n,
            cap,
        });
    }
    let total = 1usize << n;
    let scale = instance
        .node_weights()
        .iter()
        .map(|w| w.abs())
        .chain(instance.edges().map(|(_, _, w)| w))
        .sum::<f64>()
        .max(1.0);
    let tie = 1e-12 * scale;

    const CHUNK: usize = 1 << 12;
    let chunks: Vec<(f64, Vec<usize>)> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut best = f64::NEG_INFINITY;
            let mut args = Vec::new();
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let p = instance.payoff_index(idx);
                if p > best + tie {
                    best = p;
                    args.clear();
                    args.push(idx);
                } else if p >= best - tie {
                    args.push(idx);
                }
            }
            (best, args)
        })
        .collect();

    let max_payoff = chunks.iter().map(|(b, _)| *b).fold(f64::NEG_INFINITY, f64::max);
    let maximizers = chunks
        .into_iter()
        .flat_map(|(_, args)| args)
        .filter(|&idx| instance.payoff_index(idx) >= max_payoff - tie)
        .map(|idx| CutAssignment::from_index(idx, n))
        .collect();
    Ok(MaxCutSolution { max_payoff, maximizers })
}

/// Parameters for seeded random instance generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomInstanceParams {
    pub node_weight_range: (f64, f64),
    pub edge_weight_range: (f64, f64),
    /// Probability that each nearest-neighbour edge is present.
    pub nn_edge_probability: f64,
    /// Probability that each non-nearest-neighbour pair gets an edge.
    pub extra_edge_probability: f64,
    pub jw_m: i64,
    pub sign_convention: SignConvention,
}

impl Default for RandomInstanceParams {
    fn default() -> Self {
        Self {
            node_weight_range: (0.0, 1.0),
            edge_weight_range: (0.0, 1.0),
            nn_edge_probability: 1.0,
            extra_edge_probability: 0.0,
            jw_m: 0,
            sign_convention: SignConvention::GroundEncodesMax,
        }
    }
}

impl RandomInstanceParams {
    /// Instance family with no edges at all.
    pub fn non_interacting() -> Self {
        Self {
            nn_edge_probability: 0.0,
            extra_edge_probability: 0.0,
            ..Self::default()
        }
    }
}

fn sample_range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

pub fn generate_random(geometry: LatticeGeometry, params: &RandomInstanceParams, seed: u64) -> Result<MaxCutInstance> {
    for (name, (lo, hi)) in [
        ("node_weight_range", params.node_weight_range),
        ("edge_weight_range", params.edge_weight_range),
    ] {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::invalid(format!(
                "{name} must be a finite interval, got [{lo}, {hi}]"
            )));
        }
    }
    if params.edge_weight_range.0 < 0.0 {
        return Err(Error::invalid("edge weights must be nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = geometry.num_sites();
    let node_weights: Vec<f64> = (0..n)
        .map(|_| sample_range(&mut rng, params.node_weight_range))
        .collect();
    let nn = geometry.nearest_neighbor_pairs();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let p = if nn.binary_search(&(a, b)).is_ok() {
                params.nn_edge_probability
            } else {
                params.extra_edge_probability
            };
            // Always draw, so the stream does not depend on the probabilities.
            let u: f64 = rng.random();
            let w = sample_range(&mut rng, params.edge_weight_range);
            if u < p {
                edges.push((a, b, w));
            }
        }
    }
    MaxCutInstance::new(geometry, node_weights, edges, params.jw_m, params.sign_convention)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NodeWeightEntry {
    site: [usize; 2],
    w: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EdgeEntry {
    a: [usize; 2],
    b: [usize; 2],
    w: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    rows: usize,
    cols: usize,
    jw_m: i64,
    #[serde(default)]
    sign_convention: SignConvention,
    #[serde(default)]
    node_weights: Vec<NodeWeightEntry>,
    #[serde(default)]
    edges: Vec<EdgeEntry>,
}

impl From<&MaxCutInstance> for InstanceFile {
    fn from(inst: &MaxCutInstance) -> Self {
        let g = inst.geometry();
        let node_weights = (0..inst.num_sites())
            .map(|site| {
                let (x, y) = g.coords(site);
                NodeWeightEntry {
                    site: [x, y],
                    w: inst.node_weight(site),
                }
            })
            .collect();
        let edges = inst
            .edges()
            .map(|(a, b, w)| {
                let (ax, ay) = g.coords(a);
                let (bx, by) = g.coords(b);
                EdgeEntry {
                    a: [ax, ay],
                    b: [bx, by],
                    w,
                }
            })
            .collect();
        Self {
            rows: g.rows(),
            cols: g.cols(),
            jw_m: inst.jw_m(),
            sign_convention: inst.sign_convention(),
            node_weights,
            edges,
        }
    }
}

impl TryFrom<InstanceFile> for MaxCutInstance {
    type Error = Error;

    fn try_from(file: InstanceFile) -> Result<Self> {
        let geometry =
            LatticeGeometry::new(file.rows, file.cols).map_err(|e| Error::parse("rows/cols", e.to_string()))?;
        let site = |field: &str, [x, y]: [usize; 2]| {
            geometry.site_index(x, y).ok_or_else(|| {
                Error::parse(
                    field,
                    format!("site [{x}, {y}] outside {}x{} lattice", file.rows, file.cols),
                )
            })
        };
        let mut node_weights = vec![0.0; geometry.num_sites()];
        let mut seen = vec![false; geometry.num_sites()];
        for (i, entry) in file.node_weights.iter().enumerate() {
            let s = site(&format!("node_weights[{i}].site"), entry.site)?;
            if seen[s] {
                return Err(Error::Validation(format!(
                    "node weight for site {:?} listed twice",
                    entry.site
                )));
            }
            seen[s] = true;
            node_weights[s] = entry.w;
        }
        let edges = file
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| {
                Ok((
                    site(&format!("edges[{i}].a"), e.a)?,
                    site(&format!("edges[{i}].b"), e.b)?,
                    e.w,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        MaxCutInstance::new(geometry, node_weights, edges, file.jw_m, file.sign_convention)
    }
}

pub fn instance_from_json(text: &str) -> Result<MaxCutInstance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        // serde reports the field name inside backticks for missing/unknown fields.
        let field = msg
            .split('`')
            .nth(1)
            .map(str::to_string)
            .unwrap_or_else(|| format!("line {} column {}", e.line(), e.column()));
        Error::parse(field, msg)
    })?;
    file.try_into()
}

pub fn instance_to_json(instance: &MaxCutInstance) -> String {
    serde_json::to_string_pretty(&InstanceFile::from(instance)).expect("instance serializes")
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<MaxCutInstance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    instance_from_json(&text)
}

pub fn write_instance(instance: &MaxCutInstance, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), instance_to_json(instance).as_bytes())
}
