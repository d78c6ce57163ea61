//! Generalized random dot-product graphs: signatures, latent distributions,
//! edge-probability matrices and graph sampling.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use bitvec::prelude::*;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{pair_count, Graph};
use crate::util::{fmt_f64, parse_f64, rng_for, Stream};

/// Slack allowed when checking that a probability lies in `[0, 1]`.
const ADMISSIBILITY_TOL: f64 = 1e-12;

/// Signature `(p, q)` of the indefinite identity `I_{p,q}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub p: usize,
    pub q: usize,
}

impl Signature {
    pub fn new(p: usize, q: usize) -> Result<Self> {
        if p + q == 0 {
            return Err(Error::param("signature must have p + q >= 1"));
        }
        Ok(Self { p, q })
    }

    pub fn dim(&self) -> usize {
        self.p + self.q
    }

    /// Diagonal entry `k` of `I_{p,q}`.
    #[inline]
    pub fn sign(&self, k: usize) -> f64 {
        if k < self.p {
            1.0
        } else {
            -1.0
        }
    }

    pub fn identity(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| if i == j { self.sign(i) } else { 0.0 })
    }

    /// `aᵀ I_{p,q} b`.
    #[inline]
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim() {
            s += self.sign(k) * a[k] * b[k];
        }
        s
    }

    /// Signature with one more positive direction, as produced by edge flipping.
    pub fn lifted(&self) -> Self {
        Self {
            p: self.p + 1,
            q: self.q,
        }
    }
}

impl std::str::FromStr for Signature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (p, q) = s
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("signature {s:?} is not `p,q`")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("signature {s:?} is not `p,q`")))
        };
        Signature::new(parse(p)?, parse(q)?)
    }
}

/// `n × d` latent positions, one row per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentPositions {
    pub x: DMatrix<f64>,
    pub sig: Signature,
    /// Mean indefinite inner product `E[ξ₁ᵀ I ξ₂]` of the generating law.
    pub scale_mu: f64,
}

impl LatentPositions {
    pub fn new(x: DMatrix<f64>, sig: Signature, scale_mu: f64) -> Result<Self> {
        if x.ncols() != sig.dim() {
            return Err(Error::param(format!(
                "latent matrix has {} columns but signature dimension is {}",
                x.ncols(),
                sig.dim()
            )));
        }
        Ok(Self { x, sig, scale_mu })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    /// Row-major copy of the coordinates.
    pub(crate) fn rows(&self) -> Vec<f64> {
        let (n, d) = self.x.shape();
        let mut out = Vec::with_capacity(n * d);
        for i in 0..n {
            out.extend(self.x.row(i).iter());
        }
        out
    }

    /// Minimum and maximum of `xᵢᵀ I xⱼ` over all pairs, self pairs included.
    pub fn inner_product_range(&self) -> (f64, f64) {
        let d = self.sig.dim();
        pairwise_range(&self.rows(), d, self.sig)
    }

    /// `X / √μ`, the scale at which spectral estimates are compared.
    pub fn normalized(&self) -> DMatrix<f64> {
        &self.x / self.scale_mu.sqrt()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut s = format!(
            "dim={},p={},q={},mu={}\n",
            self.sig.dim(),
            self.sig.p,
            self.sig.q,
            fmt_f64(self.scale_mu)
        );
        push_rows(&mut s, &self.x);
        out.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let table = crate::io::read_table(input)?;
        let get = |k: &str| {
            table
                .header
                .get(k)
                .ok_or_else(|| Error::Parse(format!("latent header lacks `{k}`")))
        };
        let p = get("p")?.parse().map_err(|_| Error::Parse("bad p".into()))?;
        let q = get("q")?.parse().map_err(|_| Error::Parse("bad q".into()))?;
        let mu = parse_f64(get("mu")?).ok_or_else(|| Error::Parse("bad mu".into()))?;
        Self::new(table.matrix, Signature::new(p, q)?, mu)
    }
}

pub(crate) fn push_rows(s: &mut String, x: &DMatrix<f64>) {
    for i in 0..x.nrows() {
        let row: Vec<String> = x.row(i).iter().map(|v| fmt_f64(*v)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
}

fn pairwise_range(rows: &[f64], d: usize, sig: Signature) -> (f64, f64) {
    let n = rows.len() / d;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let a = &rows[i * d..(i + 1) * d];
        for j in i..n {
            let v = sig.inner(a, &rows[j * d..(j + 1) * d]);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo, hi)
}

/// Geometry of the three-component shape: a circle, a lemniscate and a
/// compact cluster, laid out inside the unit disk and then mapped affinely
/// into the admissible disk `{(c, 0) + r·u : ‖u‖ ≤ 1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapeParams {
    pub center_norm: f64,
    pub radius: f64,
    pub circle_radius: f64,
    pub lemniscate_center: [f64; 2],
    /// Half-width `a` of the lemniscate of Bernoulli.
    pub lemniscate_scale: f64,
    pub cluster_center: [f64; 2],
    pub cluster_radius: f64,
    /// Relative masses of circle, lemniscate and cluster.
    pub weights: [f64; 3],
}

impl Default for ShapeParams {
    fn default() -> Self {
        Self {
            center_norm: 0.586,
            radius: 0.41,
            circle_radius: 1.0,
            lemniscate_center: [0.0, 0.28],
            lemniscate_scale: 0.5,
            cluster_center: [0.0, -0.5],
            cluster_radius: 0.14,
            weights: [2.0, 1.0, 1.0],
        }
    }
}

impl ShapeParams {
    fn validate(&self) -> Result<()> {
        let inside = |c: [f64; 2], extent: f64| (c[0].hypot(c[1]) + extent) <= 1.0 + 1e-12;
        if !(self.radius > 0.0 && self.center_norm > 0.0) {
            return Err(Error::param("shape disk needs positive center_norm and radius"));
        }
        if !(self.circle_radius > 0.0 && self.circle_radius <= 1.0) {
            return Err(Error::param("circle_radius must lie in (0, 1]"));
        }
        if !inside(self.lemniscate_center, self.lemniscate_scale)
            || !inside(self.cluster_center, self.cluster_radius)
        {
            return Err(Error::param("shape components must lie inside the unit disk"));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) || self.weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::param("shape weights must be nonnegative with positive sum"));
        }
        Ok(())
    }

    fn to_disk(&self, u: [f64; 2]) -> [f64; 2] {
        [self.center_norm + self.radius * u[0], self.radius * u[1]]
    }

    /// Draws one point of `component` (0 circle, 1 lemniscate, 2 cluster) in
    /// unit-disk coordinates.
    fn draw_unit<R: Rng + ?Sized>(&self, component: usize, rng: &mut R) -> [f64; 2] {
        match component {
            0 => {
                let t = rng.random::<f64>() * 2.0 * PI;
                [self.circle_radius * t.cos(), self.circle_radius * t.sin()]
            }
            1 => {
                let t = rng.random::<f64>() * 2.0 * PI;
                let s = t.sin();
                let denom = 1.0 + s * s;
                let a = self.lemniscate_scale;
                [
                    self.lemniscate_center[0] + a * t.cos() / denom,
                    self.lemniscate_center[1] + a * s * t.cos() / denom,
                ]
            }
            _ => {
                let rad = self.cluster_radius * rng.random::<f64>().sqrt();
                let t = rng.random::<f64>() * 2.0 * PI;
                [
                    self.cluster_center[0] + rad * t.cos(),
                    self.cluster_center[1] + rad * t.sin(),
                ]
            }
        }
    }

    fn unit_mean(&self) -> [f64; 2] {
        // Each component is symmetric about its centre, so its mean is the centre.
        let total: f64 = self.weights.iter().sum();
        let centres = [[0.0, 0.0], self.lemniscate_center, self.cluster_center];
        let mut m = [0.0; 2];
        for (w, c) in self.weights.iter().zip(centres) {
            m[0] += w / total * c[0];
            m[1] += w / total * c[1];
        }
        m
    }

    /// Exactly `counts[k]` points from component `k`, in component order,
    /// with their component labels.
    pub fn sample_stratified(
        &self,
        sig: Signature,
        counts: [usize; 3],
        seed: u64,
    ) -> Result<(LatentPositions, Vec<usize>)> {
        let spec = LatentDistributionSpec {
            signature: sig,
            kind: LatentKind::LemniscateMixture(self.clone()),
            max_inner: 1.0,
        };
        spec.check_admissible()?;
        let n: usize = counts.iter().sum();
        let mut rng = rng_for(seed, Stream::Latent);
        let mut x = DMatrix::zeros(n, 2);
        let mut labels = Vec::with_capacity(n);
        let mut row = 0;
        for (component, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                let p = self.to_disk(self.draw_unit(component, &mut rng));
                x[(row, 0)] = p[0];
                x[(row, 1)] = p[1];
                labels.push(component);
                row += 1;
            }
        }
        Ok((LatentPositions::new(x, sig, spec.scale_mu())?, labels))
    }
}

/// Supported latent distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum LatentKind {
    /// Point mass; yields an Erdős–Rényi graph.
    Dirac { point: Vec<f64> },
    /// `x1` with probability `alpha`, otherwise `x2`; a two-block SBM.
    TwoPoint { x1: Vec<f64>, x2: Vec<f64>, alpha: f64 },
    /// Uniform on the circle of radius `radius` centred at `(center_norm, 0)`.
    ShiftedCircle { center_norm: f64, radius: f64 },
    LemniscateMixture(ShapeParams),
    Custom { points: Vec<Vec<f64>>, weights: Vec<f64> },
}

/// A latent law together with the signature it is declared under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentDistributionSpec {
    pub signature: Signature,
    #[serde(flatten)]
    pub kind: LatentKind,
    /// Upper admissibility bound on support inner products. Models whose
    /// probabilities carry a sparsity factor (the two-block SBM has
    /// `xᵢᵀxᵢ = 1 + γ`) raise it; `ρ · bound ≤ 1` is then checked on `P`.
    #[serde(default = "unit_bound", skip_serializing_if = "is_unit_bound")]
    pub max_inner: f64,
}

fn unit_bound() -> f64 {
    1.0
}

fn is_unit_bound(b: &f64) -> bool {
    *b == 1.0
}

const SKETCH_POINTS: usize = 1024;

impl LatentDistributionSpec {
    pub fn shifted_circle(center_norm: f64, radius: f64) -> Self {
        Self {
            signature: Signature { p: 2, q: 0 },
            kind: LatentKind::ShiftedCircle { center_norm, radius },
            max_inner: 1.0,
        }
    }

    /// Balanced or imbalanced two-block SBM built from [`sbm_latent_pair`].
    pub fn sbm(gamma: f64, alpha: f64) -> Result<Self> {
        let (x1, x2) = sbm_latent_pair(gamma)?;
        Ok(Self {
            signature: Signature { p: 2, q: 0 },
            kind: LatentKind::TwoPoint {
                x1: x1.to_vec(),
                x2: x2.to_vec(),
                alpha,
            },
            max_inner: 1.0 + gamma,
        })
    }

    fn validate(&self) -> Result<()> {
        let d = self.signature.dim();
        let check_len = |v: &[f64]| {
            if v.len() != d {
                Err(Error::param(format!(
                    "latent point has dimension {} but signature has {d}",
                    v.len()
                )))
            } else {
                Ok(())
            }
        };
        match &self.kind {
            LatentKind::Dirac { point } => check_len(point),
            LatentKind::TwoPoint { x1, x2, alpha } => {
                check_len(x1)?;
                check_len(x2)?;
                if !(0.0..=1.0).contains(alpha) {
                    return Err(Error::param("two_point alpha must lie in [0, 1]"));
                }
                Ok(())
            }
            LatentKind::ShiftedCircle { center_norm, radius } => {
                if d != 2 {
                    return Err(Error::param("shifted_circle requires a 2-dimensional signature"));
                }
                if !(*radius >= 0.0 && center_norm.is_finite()) {
                    return Err(Error::param("shifted_circle radius must be nonnegative"));
                }
                Ok(())
            }
            LatentKind::LemniscateMixture(shape) => {
                if d != 2 {
                    return Err(Error::param(
                        "lemniscate_mixture requires a 2-dimensional signature",
                    ));
                }
                shape.validate()
            }
            LatentKind::Custom { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(Error::param("custom needs one weight per point"));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::param("custom weights must be nonnegative, positive sum"));
                }
                points.iter().try_for_each(|p| check_len(p))
            }
        }
    }

    /// Finite point set whose pairwise inner products bound those of the
    /// support. For curves and disks the bound is attained on the boundary
    /// circle, since a bilinear form is extremised at extreme points.
    fn support_sketch(&self) -> Vec<Vec<f64>> {
        let circle = |cx: f64, r: f64| -> Vec<Vec<f64>> {
            (0..SKETCH_POINTS)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / SKETCH_POINTS as f64;
                    vec![cx + r * t.cos(), r * t.sin()]
                })
                .collect()
        };
        match &self.kind {
            LatentKind::Dirac { point } => vec![point.clone()],
            LatentKind::TwoPoint { x1, x2, alpha } => {
                let mut v = Vec::new();
                if *alpha > 0.0 {
                    v.push(x1.clone());
                }
                if *alpha < 1.0 {
                    v.push(x2.clone());
                }
                v
            }
            LatentKind::ShiftedCircle { center_norm, radius } => circle(*center_norm, *radius),
            LatentKind::LemniscateMixture(s) => circle(s.center_norm, s.radius),
            LatentKind::Custom { points, weights } => points
                .iter()
                .zip(weights)
                .filter(|(_, w)| **w > 0.0)
                .map(|(p, _)| p.clone())
                .collect(),
        }
    }

    /// `(min, max)` of the inner product over pairs of support points.
    pub fn inner_product_bounds(&self) -> Result<(f64, f64)> {
        self.validate()?;
        let sketch = self.support_sketch();
        let d = self.signature.dim();
        let rows: Vec<f64> = sketch.into_iter().flatten().collect();
        Ok(pairwise_range(&rows, d, self.signature))
    }

    /// Fails with the offending bound when the support is not admissible.
    pub fn check_admissible(&self) -> Result<()> {
        let (lo, hi) = self.inner_product_bounds()?;
        if lo < -ADMISSIBILITY_TOL {
            return Err(Error::Admissibility {
                what: "minimum support inner product".into(),
                value: lo,
            });
        }
        if hi > self.max_inner + ADMISSIBILITY_TOL {
            return Err(Error::Admissibility {
                what: "maximum support inner product".into(),
                value: hi,
            });
        }
        Ok(())
    }

    fn mean(&self) -> Vec<f64> {
        match &self.kind {
            LatentKind::Dirac { point } => point.clone(),
            LatentKind::TwoPoint { x1, x2, alpha } => x1
                .iter()
                .zip(x2)
                .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                .collect(),
            LatentKind::ShiftedCircle { center_norm, .. } => vec![*center_norm, 0.0],
            LatentKind::LemniscateMixture(s) => s.to_disk(s.unit_mean()).to_vec(),
            LatentKind::Custom { points, weights } => {
                let total: f64 = weights.iter().sum();
                let mut m = vec![0.0; self.signature.dim()];
                for (p, w) in points.iter().zip(weights) {
                    for (mk, pk) in m.iter_mut().zip(p) {
                        *mk += w / total * pk;
                    }
                }
                m
            }
        }
    }

    /// `E[ξ₁ᵀ I ξ₂]` for independent draws, i.e. `mᵀ I m` with `m` the mean.
    pub fn scale_mu(&self) -> f64 {
        let m = self.mean();
        self.signature.inner(&m, &m)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, sampler: &Option<WeightedIndex<f64>>) -> (Vec<f64>, usize) {
        match &self.kind {
            LatentKind::Dirac { point } => (point.clone(), 0),
            LatentKind::TwoPoint { x1, x2, alpha } => {
                if rng.random::<f64>() < *alpha {
                    (x1.clone(), 0)
                } else {
                    (x2.clone(), 1)
                }
            }
            LatentKind::ShiftedCircle { center_norm, radius } => {
                let t = rng.random::<f64>() * 2.0 * PI;
                (vec![center_norm + radius * t.cos(), radius * t.sin()], 0)
            }
            LatentKind::LemniscateMixture(s) => {
                let k = sampler.as_ref().expect("mixture sampler").sample(rng);
                (s.to_disk(s.draw_unit(k, rng)).to_vec(), k)
            }
            LatentKind::Custom { points, .. } => {
                let k = sampler.as_ref().expect("custom sampler").sample(rng);
                (points[k].clone(), k)
            }
        }
    }

    /// `n` i.i.d. draws plus the index of the mixture component each came from.
    pub fn sample_labeled(&self, n: usize, seed: u64) -> Result<(LatentPositions, Vec<usize>)> {
        if n == 0 {
            return Err(Error::param("n must be at least 1"));
        }
        self.check_admissible()?;
        let sampler = match &self.kind {
            LatentKind::LemniscateMixture(s) => Some(WeightedIndex::new(s.weights.to_vec())),
            LatentKind::Custom { weights, .. } => Some(WeightedIndex::new(weights.clone())),
            _ => None,
        }
        .transpose()
        .map_err(|e| Error::param(format!("bad mixture weights: {e}")))?;
        let d = self.signature.dim();
        let mut rng = rng_for(seed, Stream::Latent);
        let mut x = DMatrix::zeros(n, d);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let (row, label) = self.draw(&mut rng, &sampler);
            for k in 0..d {
                x[(i, k)] = row[k];
            }
            labels.push(label);
        }
        Ok((LatentPositions::new(x, self.signature, self.scale_mu())?, labels))
    }
}

/// `n` i.i.d. latent positions from `spec`.
pub fn sample_latent(spec: &LatentDistributionSpec, n: usize, seed: u64) -> Result<LatentPositions> {
    spec.sample_labeled(n, seed).map(|(x, _)| x)
}

/// Latent pair of the two-block SBM with intra/inter probabilities
/// `ρ(1 + γ)` and `ρ(1 − γ)`, placed symmetrically about the first axis.
pub fn sbm_latent_pair(gamma: f64) -> Result<([f64; 2], [f64; 2])> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::param(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let norm = (1.0 + gamma).sqrt();
    let theta = ((1.0 - gamma) / (1.0 + gamma)).acos();
    let (s, c) = (theta / 2.0).sin_cos();
    Ok(([norm * c, norm * s], [norm * c, -norm * s]))
}

/// Dense edge-probability matrix `ρ · X I Xᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMatrix {
    pub p: DMatrix<f64>,
    pub rho: f64,
}

impl ProbabilityMatrix {
    pub fn n(&self) -> usize {
        self.p.nrows()
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("rho must lie in (0, 1], got {rho}")))
    }
}

fn checked_probability(value: f64, i: usize, j: usize) -> Result<f64> {
    if (-ADMISSIBILITY_TOL..=1.0 + ADMISSIBILITY_TOL).contains(&value) {
        Ok(value.clamp(0.0, 1.0))
    } else {
        Err(Error::Admissibility {
            what: format!("P[{i},{j}]"),
            value,
        })
    }
}

pub fn probability_matrix(x: &LatentPositions, rho: f64) -> Result<ProbabilityMatrix> {
    check_rho(rho)?;
    let n = x.n();
    let d = x.sig.dim();
    let rows = x.rows();
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = checked_probability(
                rho * x.sig.inner(&rows[i * d..(i + 1) * d], &rows[j * d..(j + 1) * d]),
                i,
                j,
            )?;
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
    Ok(ProbabilityMatrix { p, rho })
}

fn sample_pairs(
    n: usize,
    seed: u64,
    mut prob: impl FnMut(usize, usize) -> Result<f64>,
) -> Result<Graph> {
    let mut rng = rng_for(seed, Stream::Graph);
    let mut bits = bitvec![u64, Lsb0; 0; pair_count(n)];
    let mut idx = 0;
    for i in 0..n {
        for j in i + 1..n {
            let p = prob(i, j)?;
            let u: f64 = rng.random();
            if u < p {
                bits.set(idx, true);
            }
            idx += 1;
        }
    }
    Ok(Graph::from_bits(n, bits))
}

/// Independent Bernoulli draws over the strict upper triangle of `P`, in
/// row-major order.
pub fn sample_graph(p: &ProbabilityMatrix, seed: u64) -> Result<Graph> {
    let n = p.n();
    sample_pairs(n, seed, |i, j| checked_probability(p.p[(i, j)], i, j))
}

/// Samples `A ~ GRDPG(X, ρ)` without materialising `P`; draws the same
/// graph as `sample_graph(&probability_matrix(x, rho)?, seed)`.
pub fn sample_grdpg(x: &LatentPositions, rho: f64, seed: u64) -> Result<Graph> {
    check_rho(rho)?;
    let d = x.sig.dim();
    let rows = x.rows();
    let sig = x.sig;
    sample_pairs(x.n(), seed, |i, j| {
        checked_probability(
            rho * sig.inner(&rows[i * d..(i + 1) * d], &rows[j * d..(j + 1) * d]),
            i,
            j,
        )
    })
}
