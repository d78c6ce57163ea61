//! Clustering baselines and the three experiment drivers.
//!
//! Every experiment is a grid of `(n, replicate)` tasks run in parallel.
//! Within a task the latent sample, the graph and the flip randomness are
//! shared by all privacy budgets, so columns of the grid are coupled and
//! smaller budgets flip a superset of the edges flipped by larger ones.

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use log::{info, warn};
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::align::d_two_infinity;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{sample_grdpg, LatentDistributionSpec, LatentPositions, ShapeParams, Signature};
use crate::privacy::edge_flip;
use crate::spectral::pase;
use crate::tda::{bottleneck, cluster_from_diagram, farthest_point_sample, rips_persistence, DEFAULT_LOF_NEIGHBORS};
use crate::util::{derive_seed, fmt_f64, rng_for, Stream};

pub type LabelVector = Vec<usize>;

const KMEANS_RESTARTS: usize = 20;
const KMEANS_MAX_ITER: usize = 300;

/// A fitted k-means partition.
#[derive(Clone, Debug)]
pub struct KMeans {
    pub labels: LabelVector,
    pub centers: DMatrix<f64>,
    pub wcss: f64,
}

fn sq_dist(points: &DMatrix<f64>, i: usize, centers: &DMatrix<f64>, c: usize) -> f64 {
    (0..points.ncols()).map(|k| (points[(i, k)] - centers[(c, k)]).powi(2)).sum()
}

fn nearest(points: &DMatrix<f64>, i: usize, centers: &DMatrix<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centers.nrows() {
        let d = sq_dist(points, i, centers, c);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_seeds<R: Rng>(points: &DMatrix<f64>, k: usize, rng: &mut R) -> DMatrix<f64> {
    let n = points.nrows();
    let mut centers = DMatrix::zeros(k, points.ncols());
    centers.row_mut(0).copy_from(&points.row(rng.random_range(0..n)));
    let mut gap: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centers, 0)).collect();
    for c in 1..k {
        let total: f64 = gap.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, g) in gap.iter().enumerate() {
                if target < *g {
                    pick = i;
                    break;
                }
                target -= g;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).copy_from(&points.row(pick));
        for (i, g) in gap.iter_mut().enumerate() {
            *g = g.min(sq_dist(points, i, &centers, c));
        }
    }
    centers
}

fn lloyd(points: &DMatrix<f64>, mut centers: DMatrix<f64>) -> KMeans {
    let (n, d) = points.shape();
    let k = centers.nrows();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for i in 0..n {
            let (c, _) = nearest(points, i, &centers);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        let mut sums = DMatrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for j in 0..d {
                sums[(labels[i], j)] += points[(i, j)];
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed at the point farthest from its own centre, taken
                // from a cluster that can spare it.
                let mut far = usize::MAX;
                let mut far_d = f64::NEG_INFINITY;
                for i in 0..n {
                    let d = sq_dist(points, i, &centers, labels[i]);
                    if counts[labels[i]] > 1 && d > far_d {
                        far = i;
                        far_d = d;
                    }
                }
                if far == usize::MAX {
                    continue;
                }
                counts[labels[far]] -= 1;
                for j in 0..d {
                    sums[(labels[far], j)] -= points[(far, j)];
                    sums[(c, j)] = points[(far, j)];
                }
                labels[far] = c;
                counts[c] = 1;
                changed = true;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..d {
                    centers[(c, j)] = sums[(c, j)] / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let wcss = (0..n).map(|i| sq_dist(points, i, &centers, labels[i])).sum();
    KMeans { labels, centers, wcss }
}

/// Renumbers labels by order of first appearance.
fn relabel(labels: &[usize]) -> LabelVector {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Best of 20 k-means++ seeded Lloyd runs by within-cluster sum of squares.
pub fn kmeans_fit(points: &DMatrix<f64>, k: usize, seed: u64) -> Result<KMeans> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::param(format!("k must lie in 1..={n}, got {k}")));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("points must be finite"));
    }
    let mut rng = rng_for(seed, Stream::Cluster);
    let mut best: Option<KMeans> = None;
    for _ in 0..KMEANS_RESTARTS {
        let fit = lloyd(points, plus_plus_seeds(points, k, &mut rng));
        if best.as_ref().is_none_or(|b| fit.wcss < b.wcss) {
            best = Some(fit);
        }
    }
    let mut best = best.expect("at least one restart");
    let order = relabel(&best.labels);
    let mut centers = best.centers.clone();
    for (old, new) in best.labels.iter().zip(&order) {
        centers.row_mut(*new).copy_from(&best.centers.row(*old));
    }
    best.labels = order;
    best.centers = centers;
    Ok(best)
}

pub fn kmeans(points: &DMatrix<f64>, k: usize, seed: u64) -> Result<LabelVector> {
    kmeans_fit(points, k, seed).map(|f| f.labels)
}

/// Adjusted Rand index from the contingency table.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::param(format!("label vectors differ in length ({} vs {})", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Ok(1.0);
    }
    let pairs = |c: usize| (c as i128) * (c as i128 - 1) / 2;
    let mut table: HashMap<(usize, usize), usize> = HashMap::new();
    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut cols: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: i128 = table.values().map(|&c| pairs(c)).sum();
    let sa: i128 = rows.values().map(|&c| pairs(c)).sum();
    let sb: i128 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(n);
    // (index − E) / (max − E) with E = sa·sb/total and max = (sa + sb)/2,
    // scaled by 2·total to stay in integers.
    let num = 2 * (index * total - sa * sb);
    let den = (sa + sb) * total - 2 * sa * sb;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Heatmap,
    Lemniscate,
    Sbm,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heatmap" => Ok(Self::Heatmap),
            "lemniscate" => Ok(Self::Lemniscate),
            "sbm" => Ok(Self::Sbm),
            _ => Err(Error::param(format!("unknown experiment '{s}'"))),
        }
    }
}

/// Sparsity schedule `ρ_n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RhoRule {
    Fixed(f64),
    /// `log⁴n / √n`.
    Log4OverSqrt,
}

impl RhoRule {
    pub fn raw(&self, n: usize) -> f64 {
        match *self {
            RhoRule::Fixed(r) => r,
            RhoRule::Log4OverSqrt => (n as f64).ln().powi(4) / (n as f64).sqrt(),
        }
    }

    /// The raw value capped so that `ρ · max_inner` stays at most 1, or at
    /// most 0.9 for the `log⁴n/√n` schedule.
    pub fn value(&self, n: usize, max_inner: f64) -> f64 {
        let raw = self.raw(n);
        let headroom = match self {
            RhoRule::Fixed(_) => 1.0,
            RhoRule::Log4OverSqrt => 0.9,
        };
        let cap = if max_inner > 0.0 { (headroom / max_inner).min(1.0) } else { 1.0 };
        if raw > cap {
            info!("rho {raw} clipped to {cap} at n = {n}");
            cap
        } else {
            raw
        }
    }
}

impl Serialize for RhoRule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RhoRule::Fixed(r) => s.serialize_f64(*r),
            RhoRule::Log4OverSqrt => s.serialize_str("log4_over_sqrt"),
        }
    }
}

impl<'de> Deserialize<'de> for RhoRule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(r) => Ok(RhoRule::Fixed(r)),
            Raw::Text(t) if t == "log4_over_sqrt" => Ok(RhoRule::Log4OverSqrt),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("unknown rho rule '{t}'"))),
        }
    }
}

fn parse_eps_list<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    Vec::<Raw>::deserialize(d)?
        .into_iter()
        .map(|r| match r {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => match t.to_ascii_lowercase().as_str() {
                "inf" | "infinity" => Ok(f64::INFINITY),
                _ => Err(serde::de::Error::custom(format!("bad eps '{t}'"))),
            },
        })
        .collect()
}

fn write_eps_list<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for e in v {
        if e.is_infinite() {
            seq.serialize_element("inf")?;
        } else {
            seq.serialize_element(e)?;
        }
    }
    seq.end()
}

fn default_contours() -> Vec<f64> {
    vec![25.0, 35.0, 55.0]
}
fn default_q() -> f64 {
    10.0
}
fn default_landmarks() -> usize {
    200
}
fn default_gamma() -> f64 {
    0.5
}
fn default_imbalance() -> f64 {
    0.25
}
fn default_lof() -> usize {
    DEFAULT_LOF_NEIGHBORS
}

/// Experiment description, read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: Vec<usize>,
    /// Privacy budgets; `"inf"` means no privacy.
    #[serde(default, deserialize_with = "parse_eps_list", serialize_with = "write_eps_list")]
    pub eps: Vec<f64>,
    /// Defaults: `log4_over_sqrt` (heatmap), `1` (lemniscate), `0.6` (sbm).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<RhoRule>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embed_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sig: Option<Signature>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Heatmap latent law; the shifted circle `(0.5, 0.3)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent: Option<LatentDistributionSpec>,
    #[serde(default = "default_contours")]
    pub contour_alphas: Vec<f64>,
    #[serde(default)]
    pub shape: ShapeParams,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_lof")]
    pub lof_neighbors: usize,
    /// Landmarks used for H1 diagrams of large point sets.
    #[serde(default = "default_landmarks")]
    pub h1_landmarks: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Probability of the minority block.
    #[serde(default = "default_imbalance")]
    pub imbalance: f64,
    /// SBM budgets given as multiples of the recovery threshold
    /// `γρ²σ⁴ = log n / n`; added to `eps` per `n`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub margins: Vec<f64>,
    /// Wall-clock timings are written only on request since they are not
    /// reproducible.
    #[serde(default)]
    pub record_runtime: bool,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, n: Vec<usize>, eps: Vec<f64>, replicates: usize, seed: u64) -> Self {
        Self {
            experiment,
            n,
            eps,
            rho: None,
            replicates,
            seed,
            embed_dim: None,
            sig: None,
            output: None,
            latent: None,
            contour_alphas: default_contours(),
            shape: ShapeParams::default(),
            q: default_q(),
            lof_neighbors: default_lof(),
            h1_landmarks: default_landmarks(),
            gamma: default_gamma(),
            imbalance: default_imbalance(),
            margins: Vec::new(),
            record_runtime: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || (self.eps.is_empty() && self.margins.is_empty()) {
            return Err(Error::param("n and eps grids must be nonempty"));
        }
        if self.replicates == 0 {
            return Err(Error::param("replicates must be at least 1"));
        }
        if self.n.iter().any(|&n| n < 4) {
            return Err(Error::param("every n must be at least 4"));
        }
        if self.eps.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::param("every eps must be positive (use \"inf\" for no privacy)"));
        }
        if self.margins.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::param("margins must be positive"));
        }
        if let Some(RhoRule::Fixed(r)) = self.rho {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::param(format!("rho must lie in (0, 1], got {r}")));
            }
        }
        if !(self.q > 0.0) {
            return Err(Error::param("q must be positive"));
        }
        if let Some(sig) = self.sig {
            if sig.dim() != self.dim() {
                return Err(Error::param("sig dimension must equal embed_dim"));
            }
        }
        Ok(())
    }

    fn rho_rule(&self) -> RhoRule {
        self.rho.unwrap_or(match self.experiment {
            ExperimentKind::Heatmap => RhoRule::Log4OverSqrt,
            ExperimentKind::Lemniscate => RhoRule::Fixed(1.0),
            ExperimentKind::Sbm => RhoRule::Fixed(0.6),
        })
    }

    fn dim(&self) -> usize {
        self.embed_dim.or(self.sig.map(|s| s.dim())).unwrap_or(2)
    }

    fn tasks(&self) -> Vec<(usize, usize)> {
        let mut t: Vec<_> = self.n.iter().flat_map(|&n| (0..self.replicates).map(move |r| (n, r))).collect();
        t.sort_unstable();
        t.dedup();
        t
    }

    fn sorted_eps(&self) -> Vec<f64> {
        let mut e = self.eps.clone();
        e.sort_by(f64::total_cmp);
        e.dedup();
        e
    }
}

/// Seeds shared by every budget in one `(n, replicate)` task.
#[derive(Clone, Copy)]
struct TaskSeeds {
    latent: u64,
    graph: u64,
    flip: u64,
    cluster: u64,
}

fn task_seeds(base: u64, n: usize, rep: usize) -> TaskSeeds {
    let s = |purpose: u64| derive_seed(base, &[n as u64, rep as u64, purpose]);
    TaskSeeds {
        latent: s(1),
        graph: s(2),
        flip: s(3),
        cluster: s(4),
    }
}

fn write_table<W: Write>(mut w: W, header: &str, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    writeln!(w, "{header}")?;
    for r in rows {
        writeln!(w, "{}", r.join(","))?;
    }
    Ok(())
}

/// Status of one grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowFlag {
    Ok,
    RescaleInvalid,
    Degenerate,
    Numeric,
}

impl RowFlag {
    fn of(e: &Error) -> Self {
        match e {
            Error::RescaleInvalid(_) => RowFlag::RescaleInvalid,
            Error::Degenerate(_) => RowFlag::Degenerate,
            _ => RowFlag::Numeric,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            RowFlag::Ok => "ok",
            RowFlag::RescaleInvalid => "rescale_invalid",
            RowFlag::Degenerate => "degenerate",
            RowFlag::Numeric => "numeric",
        }
    }
}

/// Flip at `eps`, embed, and return `X̌ / √ρ̌` with `ρ̌`.
fn private_estimate(a: &Graph, eps: f64, d: usize, flip_seed: u64) -> Result<(std::result::Result<DMatrix<f64>, Error>, f64)> {
    let z = edge_flip(a, eps, flip_seed)?;
    let out = pase(&z, eps, d)?;
    Ok((out.rescaled(), out.rho_check))
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeatmapRow {
    pub n: usize,
    pub eps: f64,
    pub replicate: usize,
    pub d2inf_error: f64,
    pub rho_check: f64,
    pub flag: RowFlag,
}

/// Reference contour `σ(αε)² = log n / √(n ρ_n²)`, solved for `ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContourRow {
    pub alpha: f64,
    pub n: usize,
    pub rho: f64,
    /// `NaN` when the right-hand side is at least 1.
    pub eps: f64,
}

#[derive(Clone, Debug, Default)]
pub struct HeatmapOutput {
    pub rows: Vec<HeatmapRow>,
    pub contours: Vec<ContourRow>,
}

impl HeatmapOutput {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_table(
            w,
            "n,eps,replicate,d2inf_error,rho_check,flag",
            self.rows.iter().map(|r| {
                vec![
                    r.n.to_string(),
                    fmt_f64(r.eps),
                    r.replicate.to_string(),
                    fmt_f64(r.d2inf_error),
                    fmt_f64(r.rho_check),
                    r.flag.as_str().into(),
                ]
            }),
        )
    }

    pub fn write_contours_csv<W: Write>(&self, w: W) -> Result<()> {
        write_table(
            w,
            "alpha,n,rho,eps",
            self.contours
                .iter()
                .map(|c| vec![fmt_f64(c.alpha), c.n.to_string(), fmt_f64(c.rho), fmt_f64(c.eps)]),
        )
    }
}

/// `ε` with `σ(αε)² = log n / √(n ρ²)`.
pub fn contour_eps(n: usize, rho: f64, alpha: f64) -> f64 {
    let level = (n as f64).ln() / ((n as f64).sqrt() * rho);
    if level >= 1.0 {
        f64::NAN
    } else {
        2.0 * level.atanh() / alpha
    }
}

fn run_parallel<T: Send, F>(tasks: &[(usize, usize)], f: F) -> Result<Vec<T>>
where
    F: Fn(usize, usize) -> Result<Vec<T>> + Sync,
{
    let chunks: Vec<Result<Vec<T>>> = tasks.par_iter().map(|&(n, r)| f(n, r)).collect();
    let mut out = Vec::new();
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

/// `d_{2,∞}(X̌/√ρ̌, X/√μ)` over the `n × ε` grid.
pub fn experiment_heatmap(cfg: &ExperimentConfig) -> Result<HeatmapOutput> {
    cfg.validate()?;
    let spec = cfg
        .latent
        .clone()
        .unwrap_or_else(|| LatentDistributionSpec::shifted_circle(0.5, 0.3));
    spec.check_admissible()?;
    let sig = cfg.sig.unwrap_or(spec.signature);
    let d = cfg.embed_dim.unwrap_or(sig.dim());
    if d != sig.dim() {
        return Err(Error::param("embed_dim must match the latent signature"));
    }
    let (_, max_inner) = spec.inner_product_bounds()?;
    let rule = cfg.rho_rule();
    let eps_grid = cfg.sorted_eps();
    let tasks = cfg.tasks();

    let mut rows = run_parallel(&tasks, |n, rep| {
        let seeds = task_seeds(cfg.seed, n, rep);
        let x = spec.sample_labeled(n, seeds.latent)?.0;
        let rho = rule.value(n, max_inner);
        let a = sample_grdpg(&x, rho, seeds.graph)?;
        let truth = x.normalized();
        let mut out = Vec::with_capacity(eps_grid.len());
        for &eps in &eps_grid {
            let (estimate, rho_check) = private_estimate(&a, eps, d, seeds.flip)?;
            let (err, flag) = match estimate.and_then(|e| d_two_infinity(&e, &truth, sig)) {
                Ok(v) => (v, RowFlag::Ok),
                Err(e @ (Error::RescaleInvalid(_) | Error::Degenerate(_) | Error::Numeric(_))) => {
                    warn!("n = {n}, eps = {eps}, replicate {rep}: {e}");
                    (f64::NAN, RowFlag::of(&e))
                }
                Err(e) => return Err(e),
            };
            out.push(HeatmapRow {
                n,
                eps,
                replicate: rep,
                d2inf_error: err,
                rho_check,
                flag,
            });
        }
        Ok(out)
    })?;
    rows.sort_by(|a, b| a.n.cmp(&b.n).then(a.eps.total_cmp(&b.eps)).then(a.replicate.cmp(&b.replicate)));

    let mut ns = cfg.n.clone();
    ns.sort_unstable();
    ns.dedup();
    let contours = cfg
        .contour_alphas
        .iter()
        .flat_map(|&alpha| {
            ns.iter().map(move |&n| {
                let rho = rule.value(n, max_inner);
                ContourRow {
                    alpha,
                    n,
                    rho,
                    eps: contour_eps(n, rho, alpha),
                }
            })
        })
        .collect();
    Ok(HeatmapOutput { rows, contours })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LemniscateRow {
    pub n: usize,
    pub eps: f64,
    pub replicate: usize,
    pub bottleneck_h0: f64,
    pub bottleneck_h1: f64,
    pub ari_topo: f64,
    pub ari_kmeans: f64,
    pub flag: RowFlag,
}

#[derive(Clone, Debug, Default)]
pub struct LemniscateOutput {
    pub rows: Vec<LemniscateRow>,
}

impl LemniscateOutput {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_table(
            w,
            "n,eps,replicate,bottleneck_h0,bottleneck_h1,ari_topo,ari_kmeans,flag",
            self.rows.iter().map(|r| {
                vec![
                    r.n.to_string(),
                    fmt_f64(r.eps),
                    r.replicate.to_string(),
                    fmt_f64(r.bottleneck_h0),
                    fmt_f64(r.bottleneck_h1),
                    fmt_f64(r.ari_topo),
                    fmt_f64(r.ari_kmeans),
                    r.flag.as_str().into(),
                ]
            }),
        )
    }
}

fn select_rows(points: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), points.ncols(), |i, k| points[(idx[i], k)])
}

/// H1 diagram on farthest-point landmarks.
fn landmark_h1(points: &DMatrix<f64>, m: usize) -> Result<crate::tda::PersistenceDiagram> {
    let idx = farthest_point_sample(points, m)?;
    rips_persistence(&select_rows(points, &idx), 1, None)
}

/// Sample of the three-component shape: `2n` circle, `n` lemniscate and
/// `n` cluster points.
pub fn lemniscate_sample(shape: &ShapeParams, n: usize, seed: u64) -> Result<(LatentPositions, LabelVector)> {
    shape.sample_stratified(Signature { p: 2, q: 0 }, [2 * n, n, n], seed)
}

/// Bottleneck recovery of the shape's diagrams and clustering quality.
pub fn experiment_lemniscate(cfg: &ExperimentConfig) -> Result<LemniscateOutput> {
    cfg.validate()?;
    let rule = cfg.rho_rule();
    let eps_grid = cfg.sorted_eps();
    let tasks = cfg.tasks();
    let mut rows = run_parallel(&tasks, |n, rep| {
        let seeds = task_seeds(cfg.seed, n, rep);
        let (x, labels) = lemniscate_sample(&cfg.shape, n, seeds.latent)?;
        let (_, max_inner) = x.inner_product_range();
        let rho = rule.value(x.n(), max_inner);
        let a = sample_grdpg(&x, rho, seeds.graph)?;
        let truth = x.normalized();
        let truth_h0 = rips_persistence(&truth, 0, None)?;
        let truth_h1 = landmark_h1(&truth, cfg.h1_landmarks)?;
        let mut out = Vec::with_capacity(eps_grid.len());
        for &eps in &eps_grid {
            let (estimate, _) = private_estimate(&a, eps, 2, seeds.flip)?;
            let row = match estimate {
                Ok(est) => {
                    let h0 = rips_persistence(&est, 0, None)?;
                    let h1 = landmark_h1(&est, cfg.h1_landmarks)?;
                    let topo = cluster_from_diagram(est.nrows(), &h0, cfg.q, cfg.lof_neighbors)?;
                    let km = kmeans(&est, 3, seeds.cluster)?;
                    LemniscateRow {
                        n,
                        eps,
                        replicate: rep,
                        bottleneck_h0: bottleneck(&h0, &truth_h0, 0),
                        bottleneck_h1: bottleneck(&h1, &truth_h1, 1),
                        ari_topo: adjusted_rand_index(&topo, &labels)?,
                        ari_kmeans: adjusted_rand_index(&km, &labels)?,
                        flag: RowFlag::Ok,
                    }
                }
                Err(e) => {
                    warn!("n = {n}, eps = {eps}, replicate {rep}: {e}");
                    LemniscateRow {
                        n,
                        eps,
                        replicate: rep,
                        bottleneck_h0: f64::NAN,
                        bottleneck_h1: f64::NAN,
                        ari_topo: f64::NAN,
                        ari_kmeans: f64::NAN,
                        flag: RowFlag::of(&e),
                    }
                }
            };
            out.push(row);
        }
        Ok(out)
    })?;
    rows.sort_by(|a, b| a.n.cmp(&b.n).then(a.eps.total_cmp(&b.eps)).then(a.replicate.cmp(&b.replicate)));
    Ok(LemniscateOutput { rows })
}

/// Budget at which `γρ²σ_ε⁴ = margin · log n / n`; infinite when even
/// `σ = 1` falls short.
pub fn sbm_threshold_eps(n: usize, gamma: f64, rho: f64, margin: f64) -> f64 {
    let sigma2 = (margin * (n as f64).ln() / (n as f64 * gamma * rho * rho)).sqrt();
    if sigma2 >= 1.0 {
        f64::INFINITY
    } else {
        2.0 * sigma2.atanh()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SbmMethod {
    PaseKmeans,
    PaseTopo,
}

impl SbmMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SbmMethod::PaseKmeans => "pase_kmeans",
            SbmMethod::PaseTopo => "pase_topo",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SbmRow {
    pub n: usize,
    pub eps: f64,
    pub replicate: usize,
    pub method: SbmMethod,
    pub ari: f64,
    /// `NaN` unless runtimes are recorded.
    pub runtime_ms: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SbmOutput {
    pub rows: Vec<SbmRow>,
}

impl SbmOutput {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_table(
            w,
            "n,eps,replicate,method,ari,runtime_ms",
            self.rows.iter().map(|r| {
                vec![
                    r.n.to_string(),
                    fmt_f64(r.eps),
                    r.replicate.to_string(),
                    r.method.as_str().into(),
                    fmt_f64(r.ari),
                    fmt_f64(r.runtime_ms),
                ]
            }),
        )
    }
}

/// Community recovery on the imbalanced two-block SBM.
pub fn experiment_sbm(cfg: &ExperimentConfig) -> Result<SbmOutput> {
    cfg.validate()?;
    let spec = LatentDistributionSpec::sbm(cfg.gamma, cfg.imbalance)?;
    let (_, max_inner) = spec.inner_product_bounds()?;
    let rule = cfg.rho_rule();
    let tasks = cfg.tasks();
    let mut rows = run_parallel(&tasks, |n, rep| {
        let seeds = task_seeds(cfg.seed, n, rep);
        let (x, labels) = spec.sample_labeled(n, seeds.latent)?;
        let rho = rule.value(n, max_inner);
        let a = sample_grdpg(&x, rho, seeds.graph)?;
        let mut budgets = cfg.eps.clone();
        budgets.extend(cfg.margins.iter().map(|&m| sbm_threshold_eps(n, cfg.gamma, rho, m)));
        budgets.sort_by(f64::total_cmp);
        budgets.dedup();
        let mut out = Vec::new();
        for eps in budgets {
            let z = edge_flip(&a, eps, seeds.flip)?;
            let start = Instant::now();
            let embedded = pase(&z, eps, 2)?;
            let pase_ms = start.elapsed().as_secs_f64() * 1e3;
            let points = &embedded.embedding.xhat;
            for method in [SbmMethod::PaseKmeans, SbmMethod::PaseTopo] {
                let start = Instant::now();
                let predicted = match method {
                    SbmMethod::PaseKmeans => kmeans(points, 2, seeds.cluster)?,
                    SbmMethod::PaseTopo => crate::tda::topo_cluster_with(points, cfg.q, cfg.lof_neighbors)?,
                };
                let elapsed = pase_ms + start.elapsed().as_secs_f64() * 1e3;
                out.push(SbmRow {
                    n,
                    eps,
                    replicate: rep,
                    method,
                    ari: adjusted_rand_index(&predicted, &labels)?,
                    runtime_ms: if cfg.record_runtime { elapsed } else { f64::NAN },
                });
            }
        }
        Ok(out)
    })?;
    rows.sort_by(|a, b| {
        a.n.cmp(&b.n)
            .then(a.eps.total_cmp(&b.eps))
            .then(a.replicate.cmp(&b.replicate))
            .then((a.method as u8).cmp(&(b.method as u8)))
    });
    Ok(SbmOutput { rows })
}

/// Result of [`run_experiment`].
#[derive(Clone, Debug)]
pub enum ExperimentOutput {
    Heatmap(HeatmapOutput),
    Lemniscate(LemniscateOutput),
    Sbm(SbmOutput),
}

impl ExperimentOutput {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        match self {
            ExperimentOutput::Heatmap(h) => h.write_csv(w),
            ExperimentOutput::Lemniscate(l) => l.write_csv(w),
            ExperimentOutput::Sbm(s) => s.write_csv(w),
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match cfg.experiment {
        ExperimentKind::Heatmap => experiment_heatmap(cfg).map(ExperimentOutput::Heatmap),
        ExperimentKind::Lemniscate => experiment_lemniscate(cfg).map(ExperimentOutput::Lemniscate),
        ExperimentKind::Sbm => experiment_sbm(cfg).map(ExperimentOutput::Sbm),
    }
}

/// Median of the finite entries; `NaN` when there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        (v[m / 2 - 1] + v[m / 2]) / 2.0
    }
}
