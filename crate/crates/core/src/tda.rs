//! Vietoris–Rips persistence in dimensions 0 and 1, bottleneck distances
//! and persistence-based clustering.
//!
//! Filtration values are raw pairwise distances. Edges are totally ordered by
//! `(length, i, j)`, triangles by the ranks of their edges from longest to
//! shortest, which makes every diagram deterministic.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::util::{fmt_f64, parse_f64};

/// Neighbourhood size used by [`persistence_outlier_filter`].
pub const DEFAULT_LOF_NEIGHBORS: usize = 5;

/// A persistence pair with the simplices that created and destroyed it.
#[derive(Clone, Debug, PartialEq)]
pub struct Feature {
    pub dim: usize,
    pub birth: f64,
    pub death: f64,
    /// H0: the vertex whose component dies (its lowest index). H1: the
    /// positive edge.
    pub creator: Vec<usize>,
    /// H0: the merging edge. H1: the filling triangle. `None` when essential.
    pub destroyer: Option<Vec<usize>>,
}

impl Feature {
    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }

    pub fn is_essential(&self) -> bool {
        self.death == f64::INFINITY
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PersistenceDiagram {
    pub features: Vec<Feature>,
}

impl PersistenceDiagram {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn in_dim(&self, dim: usize) -> impl Iterator<Item = &Feature> {
        self.features.iter().filter(move |f| f.dim == dim)
    }

    /// `(birth, death)` pairs of one homological dimension.
    pub fn pairs(&self, dim: usize) -> Vec<(f64, f64)> {
        self.in_dim(dim).map(|f| (f.birth, f.death)).collect()
    }

    /// Diagram of the point set scaled by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let features = self
            .features
            .iter()
            .map(|f| Feature {
                birth: f.birth * c,
                death: f.death * c,
                ..f.clone()
            })
            .collect();
        Self { features }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "dim,birth,death")?;
        for f in &self.features {
            writeln!(w, "{},{},{}", f.dim, fmt_f64(f.birth), fmt_f64(f.death))?;
        }
        Ok(())
    }

    /// Reads `dim,birth,death` rows. Generators are not stored in the file.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut features = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("dim")) {
                continue;
            }
            let bad = || Error::Parse(format!("line {}: expected dim,birth,death", lineno + 1));
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(bad());
            }
            let dim: usize = cols[0].parse().map_err(|_| bad())?;
            let birth = parse_f64(cols[1]).ok_or_else(bad)?;
            let death = parse_f64(cols[2]).ok_or_else(bad)?;
            if !(death >= birth) {
                return Err(Error::Parse(format!("line {}: death precedes birth", lineno + 1)));
            }
            features.push(Feature {
                dim,
                birth,
                death,
                creator: Vec::new(),
                destroyer: None,
            });
        }
        Ok(Self { features })
    }
}

/// Euclidean distance; the single definition every filtration value uses.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Row-major copy of a point matrix.
struct Cloud {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl Cloud {
    fn new(points: &DMatrix<f64>) -> Result<Self> {
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("point coordinates must be finite"));
        }
        let (n, d) = points.shape();
        let mut data = Vec::with_capacity(n * d);
        for row in points.row_iter() {
            data.extend(row.iter());
        }
        Ok(Self { n, d, data })
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    fn dist(&self, i: usize, j: usize) -> f64 {
        euclidean(self.row(i), self.row(j))
    }
}

pub fn pairwise_distances(points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cloud = Cloud::new(points)?;
    Ok(DMatrix::from_fn(cloud.n, cloud.n, |i, j| cloud.dist(i, j)))
}

/// `min_i max_j ‖xᵢ − xⱼ‖`; the Rips complex is a cone beyond this value.
pub fn enclosing_radius(points: &DMatrix<f64>) -> Result<f64> {
    let cloud = Cloud::new(points)?;
    Ok(enclosing(&cloud))
}

fn enclosing(cloud: &Cloud) -> f64 {
    (0..cloud.n)
        .map(|i| (0..cloud.n).map(|j| cloud.dist(i, j)).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Edge {
    len: f64,
    i: usize,
    j: usize,
}

impl Edge {
    fn new(len: f64, a: usize, b: usize) -> Self {
        Self {
            len,
            i: a.min(b),
            j: a.max(b),
        }
    }

    fn precedes(&self, other: &Edge) -> bool {
        (self.len, self.i, self.j) < (other.len, other.i, other.j)
    }

    fn cmp(&self, other: &Edge) -> std::cmp::Ordering {
        self.len
            .total_cmp(&other.len)
            .then(self.i.cmp(&other.i))
            .then(self.j.cmp(&other.j))
    }
}

/// Minimum spanning tree under the strict edge order, sorted by that order.
fn minimum_spanning_tree(cloud: &Cloud) -> Vec<Edge> {
    let n = cloud.n;
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best: Vec<Edge> = (0..n).map(|v| Edge::new(cloud.dist(0, v), 0, v)).collect();
    in_tree[0] = true;
    let mut tree = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut pick = usize::MAX;
        for v in 0..n {
            if !in_tree[v] && (pick == usize::MAX || best[v].precedes(&best[pick])) {
                pick = v;
            }
        }
        in_tree[pick] = true;
        tree.push(best[pick]);
        for w in 0..n {
            if !in_tree[w] {
                let cand = Edge::new(cloud.dist(pick, w), pick, w);
                if cand.precedes(&best[w]) {
                    best[w] = cand;
                }
            }
        }
    }
    tree.sort_by(Edge::cmp);
    tree
}

/// Union–find whose roots are the lowest vertex of each component.
struct ElderForest {
    parent: Vec<usize>,
}

impl ElderForest {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    /// Merges the components of `a` and `b`; returns the root that died.
    fn union(&mut self, a: usize, b: usize) -> Option<usize> {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        let (old, young) = (ra.min(rb), ra.max(rb));
        self.parent[young] = old;
        Some(young)
    }
}

fn h0_features(n: usize, tree: &[Edge], max_radius: f64) -> Vec<Feature> {
    let mut forest = ElderForest::new(n);
    let mut features = Vec::with_capacity(n);
    for e in tree.iter().take_while(|e| e.len <= max_radius) {
        let young = forest.union(e.i, e.j).expect("tree edges join distinct components");
        features.push(Feature {
            dim: 0,
            birth: 0.0,
            death: e.len,
            creator: vec![young],
            destroyer: Some(vec![e.i, e.j]),
        });
    }
    for v in 0..n {
        if forest.find(v) == v {
            features.push(Feature {
                dim: 0,
                birth: 0.0,
                death: f64::INFINITY,
                creator: vec![v],
                destroyer: None,
            });
        }
    }
    features
}

type Triangle = [u32; 3];

fn symmetric_difference(a: &[Triangle], b: &[Triangle]) -> Vec<Triangle> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// H1 by reducing the coboundary matrix of edges, longest edge first, with
/// spanning-tree edges cleared.
fn h1_features(cloud: &Cloud, tree: &[Edge], max_radius: f64) -> Result<Vec<Feature>> {
    let n = cloud.n;
    if n < 3 {
        return Ok(Vec::new());
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let len = cloud.dist(i, j);
            if len <= max_radius {
                edges.push(Edge::new(len, i, j));
            }
        }
    }
    if edges.len() >= u32::MAX as usize {
        return Err(Error::param("too many edges for H1 computation"));
    }
    edges.sort_by(Edge::cmp);
    let mut rank = vec![u32::MAX; n * n];
    for (r, e) in edges.iter().enumerate() {
        rank[e.i * n + e.j] = r as u32;
        rank[e.j * n + e.i] = r as u32;
    }
    let mut cleared = vec![false; edges.len()];
    for e in tree.iter().take_while(|e| e.len <= max_radius) {
        cleared[rank[e.i * n + e.j] as usize] = true;
    }

    let vertices = |t: &Triangle| {
        let (a, b) = (edges[t[0] as usize], edges[t[1] as usize]);
        let mut v = vec![a.i, a.j, if b.i == a.i || b.i == a.j { b.j } else { b.i }];
        v.sort_unstable();
        v
    };

    let mut reduced: HashMap<Triangle, Vec<Triangle>> = HashMap::new();
    let mut features = Vec::new();
    for r in (0..edges.len()).rev() {
        if cleared[r] {
            continue;
        }
        let e = edges[r];
        let mut column: Vec<Triangle> = (0..n)
            .filter(|&k| k != e.i && k != e.j)
            .filter_map(|k| {
                let (a, b) = (rank[e.i * n + k], rank[e.j * n + k]);
                if a == u32::MAX || b == u32::MAX {
                    return None;
                }
                let mut t = [r as u32, a, b];
                t.sort_unstable_by(|x, y| y.cmp(x));
                Some(t)
            })
            .collect();
        column.sort_unstable();
        while let Some(other) = column.first().and_then(|p| reduced.get(p)) {
            column = symmetric_difference(&column, other);
        }
        match column.first().copied() {
            None => features.push(Feature {
                dim: 1,
                birth: e.len,
                death: f64::INFINITY,
                creator: vec![e.i, e.j],
                destroyer: None,
            }),
            Some(pivot) => {
                let death = edges[pivot[0] as usize].len;
                if death > e.len {
                    features.push(Feature {
                        dim: 1,
                        birth: e.len,
                        death,
                        creator: vec![e.i, e.j],
                        destroyer: Some(vertices(&pivot)),
                    });
                }
                reduced.insert(pivot, column);
            }
        }
    }
    features.sort_by(|a, b| {
        a.birth
            .total_cmp(&b.birth)
            .then(a.death.total_cmp(&b.death))
            .then(a.creator.cmp(&b.creator))
    });
    Ok(features)
}

/// Rips persistence of the rows of `points` up to dimension `max_dim ≤ 1`.
///
/// Simplices with filtration value above `max_radius` are left out, so the
/// classes they would kill are reported with infinite death. The default is
/// the enclosing radius, which changes nothing but the cost.
pub fn rips_persistence(points: &DMatrix<f64>, max_dim: usize, max_radius: Option<f64>) -> Result<PersistenceDiagram> {
    if points.nrows() == 0 {
        return Err(Error::param("persistence of an empty point set"));
    }
    if max_dim > 1 {
        return Err(Error::param(format!("max_dim must be 0 or 1, got {max_dim}")));
    }
    if let Some(r) = max_radius {
        if !(r > 0.0) {
            return Err(Error::param(format!("max_radius must be positive, got {r}")));
        }
    }
    let cloud = Cloud::new(points)?;
    let tree = minimum_spanning_tree(&cloud);
    let radius = match (max_radius, max_dim) {
        (Some(r), _) => r,
        (None, 0) => f64::INFINITY,
        (None, _) => enclosing(&cloud),
    };
    let mut features = h0_features(cloud.n, &tree, radius);
    if max_dim == 1 {
        features.extend(h1_features(&cloud, &tree, radius)?);
    }
    Ok(PersistenceDiagram { features })
}

/// Indices of `m` landmarks chosen by farthest-point sampling from row 0.
pub fn farthest_point_sample(points: &DMatrix<f64>, m: usize) -> Result<Vec<usize>> {
    let cloud = Cloud::new(points)?;
    let m = m.min(cloud.n);
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut chosen = vec![0];
    let mut gap: Vec<f64> = (0..cloud.n).map(|v| cloud.dist(0, v)).collect();
    while chosen.len() < m {
        let mut far = 0;
        for v in 1..cloud.n {
            if gap[v] > gap[far] {
                far = v;
            }
        }
        chosen.push(far);
        for v in 0..cloud.n {
            gap[v] = gap[v].min(cloud.dist(far, v));
        }
    }
    Ok(chosen)
}

/// Outcome of a bottleneck computation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bottleneck {
    pub distance: f64,
    /// The diagrams carry different numbers of essential classes.
    pub essential_mismatch: bool,
}

#[inline]
fn linf(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

#[inline]
fn diagonal_cost(a: (f64, f64)) -> f64 {
    (a.1 - a.0) / 2.0
}

/// Points of one diagram sorted by death, for window queries.
struct Sorted {
    points: Vec<(f64, f64)>,
}

impl Sorted {
    fn new(points: &[(f64, f64)]) -> Self {
        let mut points = points.to_vec();
        points.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
        Self { points }
    }

    /// Indices within ℓ∞ distance `t` of `a`.
    fn near(&self, a: (f64, f64), t: f64, out: &mut Vec<u32>) {
        let pts = &self.points;
        let lo = pts.partition_point(|p| p.1 < a.1 && a.1 - p.1 > t);
        let hi = pts.partition_point(|p| p.1 <= a.1 || p.1 - a.1 <= t);
        out.extend((lo..hi).filter(|&k| (pts[k].0 - a.0).abs() <= t).map(|k| k as u32));
    }
}

/// Whether every point of `forced` can be matched within `t` to a distinct
/// point of `other` (Hopcroft–Karp).
fn saturates(forced: &[(f64, f64)], other: &Sorted, t: f64) -> bool {
    let (nl, nr) = (forced.len(), other.points.len());
    if nl == 0 {
        return true;
    }
    if nl > nr {
        return false;
    }
    let mut offsets = Vec::with_capacity(nl + 1);
    let mut adj = Vec::new();
    offsets.push(0);
    for &a in forced {
        other.near(a, t, &mut adj);
        if adj.len() == *offsets.last().unwrap() {
            return false;
        }
        offsets.push(adj.len());
    }
    const FREE: u32 = u32::MAX;
    let mut mate_l = vec![FREE; nl];
    let mut mate_r = vec![FREE; nr];
    let mut layer = vec![0u32; nl];
    let mut queue = Vec::with_capacity(nl);
    let mut matched = 0;
    loop {
        queue.clear();
        for u in 0..nl {
            if mate_l[u] == FREE {
                layer[u] = 0;
                queue.push(u as u32);
            } else {
                layer[u] = u32::MAX;
            }
        }
        let mut found = false;
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head] as usize;
            head += 1;
            for &v in &adj[offsets[u]..offsets[u + 1]] {
                let w = mate_r[v as usize];
                if w == FREE {
                    found = true;
                } else if layer[w as usize] == u32::MAX {
                    layer[w as usize] = layer[u] + 1;
                    queue.push(w);
                }
            }
        }
        if !found {
            break;
        }
        let mut cursor = offsets[..nl].to_vec();
        for u in 0..nl {
            if mate_l[u] == FREE && augment(u, &adj, &offsets, &mut cursor, &layer, &mut mate_l, &mut mate_r) {
                matched += 1;
            }
        }
    }
    matched == nl
}

#[allow(clippy::too_many_arguments)]
fn augment(
    u: usize,
    adj: &[u32],
    offsets: &[usize],
    cursor: &mut [usize],
    layer: &[u32],
    mate_l: &mut [u32],
    mate_r: &mut [u32],
) -> bool {
    // Iterative DFS along the BFS layers.
    let mut stack = vec![u];
    while let Some(&x) = stack.last() {
        if cursor[x] == offsets[x + 1] {
            stack.pop();
            continue;
        }
        let v = adj[cursor[x]] as usize;
        cursor[x] += 1;
        let w = mate_r[v];
        if w == u32::MAX {
            // Flip the path found on the stack.
            let mut v = v;
            while let Some(x) = stack.pop() {
                let prev = mate_l[x];
                mate_l[x] = v as u32;
                mate_r[v] = x as u32;
                v = prev as usize;
            }
            return true;
        }
        let w = w as usize;
        if layer[w] == layer[x] + 1 {
            stack.push(w);
        }
    }
    false
}

fn finite_bottleneck(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    finite_bottleneck_by(a, b, a.len().saturating_mul(b.len()) <= 1 << 20)
}

fn finite_bottleneck_by(a: &[(f64, f64)], b: &[(f64, f64)], enumerate: bool) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let (sa, sb) = (Sorted::new(a), Sorted::new(b));
    let feasible = |t: f64| {
        let fa: Vec<_> = a.iter().copied().filter(|&p| diagonal_cost(p) > t).collect();
        let fb: Vec<_> = b.iter().copied().filter(|&p| diagonal_cost(p) > t).collect();
        saturates(&fa, &sb, t) && saturates(&fb, &sa, t)
    };
    let upper = a.iter().chain(b).map(|&p| diagonal_cost(p)).fold(0.0, f64::max);
    if enumerate {
        let mut cand: Vec<f64> = a.iter().chain(b).map(|&p| diagonal_cost(p)).collect();
        for &p in a {
            cand.extend(b.iter().map(|&q| linf(p, q)));
        }
        cand.push(0.0);
        cand.retain(|&c| c <= upper);
        cand.sort_by(f64::total_cmp);
        cand.dedup();
        let k = cand.partition_point(|&t| !feasible(t));
        return cand[k.min(cand.len() - 1)];
    }
    // The optimum is one of the candidate values and feasibility only
    // changes at candidates, so bisecting the float ordering is exact.
    if feasible(0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64.to_bits(), upper.to_bits());
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if feasible(f64::from_bits(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    f64::from_bits(hi)
}

/// Exact bottleneck distance between two diagrams given as `(birth, death)`
/// pairs of a single dimension. Essential classes are matched only among
/// themselves, in birth order.
pub fn bottleneck_pairs(a: &[(f64, f64)], b: &[(f64, f64)]) -> Bottleneck {
    let split = |d: &[(f64, f64)]| {
        let (ess, fin): (Vec<(f64, f64)>, Vec<(f64, f64)>) = d.iter().copied().partition(|p| p.1 == f64::INFINITY);
        let mut births: Vec<f64> = ess.iter().map(|p| p.0).collect();
        births.sort_by(f64::total_cmp);
        (births, fin)
    };
    let (ea, fa) = split(a);
    let (eb, fb) = split(b);
    if ea.len() != eb.len() {
        warn!("diagrams carry {} and {} essential classes", ea.len(), eb.len());
        return Bottleneck {
            distance: f64::INFINITY,
            essential_mismatch: true,
        };
    }
    let essential = ea.iter().zip(&eb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Bottleneck {
        distance: essential.max(finite_bottleneck(&fa, &fb)),
        essential_mismatch: false,
    }
}

pub fn bottleneck(d1: &PersistenceDiagram, d2: &PersistenceDiagram, dim: usize) -> f64 {
    bottleneck_pairs(&d1.pairs(dim), &d2.pairs(dim)).distance
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        (v[m / 2 - 1] + v[m / 2]) / 2.0
    }
}

/// Local outlier factors of scalar values with `k = min(k_max, m − 1)`
/// nearest neighbours.
pub fn local_outlier_factors(values: &[f64], k_max: usize) -> Vec<f64> {
    let m = values.len();
    if m < 2 || k_max == 0 {
        return vec![1.0; m];
    }
    let k = k_max.min(m - 1);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut neighbours = vec![Vec::with_capacity(k); m];
    let mut kdist = vec![0.0; m];
    for (pos, &p) in order.iter().enumerate() {
        let (mut left, mut right) = (pos, pos + 1);
        let x = values[p];
        while neighbours[p].len() < k {
            let dl = if left > 0 { x - values[order[left - 1]] } else { f64::INFINITY };
            let dr = if right < m { values[order[right]] - x } else { f64::INFINITY };
            if dl <= dr {
                left -= 1;
                neighbours[p].push(order[left]);
                kdist[p] = dl;
            } else {
                neighbours[p].push(order[right]);
                right += 1;
                kdist[p] = dr;
            }
        }
    }
    let lrd: Vec<f64> = (0..m)
        .map(|p| {
            let reach: f64 = neighbours[p]
                .iter()
                .map(|&o| kdist[o].max((values[p] - values[o]).abs()))
                .sum();
            1.0 / (reach / k as f64 + 1e-10)
        })
        .collect();
    (0..m)
        .map(|p| neighbours[p].iter().map(|&o| lrd[o] / lrd[p]).sum::<f64>() / k as f64)
        .collect()
}

/// Features of dimension `dim` whose persistence is an outlier:
/// `LOF > median + q · MAD` over the finite persistences, restricted to
/// persistences above `median + q · MAD` of the persistences themselves,
/// plus every essential class. Returns indices into `diagram.features`.
pub fn persistence_outlier_filter(diagram: &PersistenceDiagram, dim: usize, q: f64) -> Result<Vec<usize>> {
    persistence_outlier_filter_with(diagram, dim, q, DEFAULT_LOF_NEIGHBORS)
}

pub fn persistence_outlier_filter_with(
    diagram: &PersistenceDiagram,
    dim: usize,
    q: f64,
    k_max: usize,
) -> Result<Vec<usize>> {
    if !(q > 0.0) {
        return Err(Error::param(format!("q must be positive, got {q}")));
    }
    let mut selected = Vec::new();
    let mut finite = Vec::new();
    for (idx, f) in diagram.features.iter().enumerate().filter(|(_, f)| f.dim == dim) {
        if f.is_essential() {
            selected.push(idx);
        } else {
            finite.push(idx);
        }
    }
    if finite.len() >= 2 {
        let deltas: Vec<f64> = finite.iter().map(|&i| diagram.features[i].persistence()).collect();
        let lof = local_outlier_factors(&deltas, k_max);
        let med = median(&lof);
        let mad = median(&lof.iter().map(|l| (l - med).abs()).collect::<Vec<_>>());
        let cut = med + q * mad;
        let dmed = median(&deltas);
        let dmad = median(&deltas.iter().map(|d| (d - dmed).abs()).collect::<Vec<_>>());
        let long = dmed + q * dmad;
        selected.extend(
            finite
                .iter()
                .zip(lof.iter().zip(&deltas))
                .filter(|(_, (&l, &d))| l > cut && d > long)
                .map(|(&i, _)| i),
        );
    }
    selected.sort_unstable();
    Ok(selected)
}

/// Clusters from the single-linkage tree cut into as many clusters as
/// there are selected H0 features: the largest-death merges are withheld.
/// Labels are numbered by lowest member index.
pub fn topo_cluster(points: &DMatrix<f64>, q: f64) -> Result<Vec<usize>> {
    topo_cluster_with(points, q, DEFAULT_LOF_NEIGHBORS)
}

pub fn topo_cluster_with(points: &DMatrix<f64>, q: f64, k_max: usize) -> Result<Vec<usize>> {
    let diagram = rips_persistence(points, 0, None)?;
    cluster_from_diagram(points.nrows(), &diagram, q, k_max)
}

/// [`topo_cluster_with`] on a precomputed H0 diagram of `n` points.
pub fn cluster_from_diagram(n: usize, diagram: &PersistenceDiagram, q: f64, k_max: usize) -> Result<Vec<usize>> {
    let selected = persistence_outlier_filter_with(diagram, 0, q, k_max)?;
    let cuts = selected.iter().filter(|&&i| !diagram.features[i].is_essential()).count();
    let mut merges: Vec<&Feature> = diagram.features.iter().filter(|f| f.dim == 0 && !f.is_essential()).collect();
    merges.sort_by(|a, b| a.death.total_cmp(&b.death));
    merges.truncate(merges.len() - cuts);
    let mut forest = ElderForest::new(n);
    for f in merges {
        if let Some(edge) = &f.destroyer {
            if edge.iter().any(|&v| v >= n) {
                return Err(Error::param("diagram refers to vertices beyond the point set"));
            }
            forest.union(edge[0], edge[1]);
        }
    }
    let mut label_of_root = HashMap::new();
    Ok((0..n)
        .map(|v| {
            let root = forest.find(v);
            let next = label_of_root.len();
            *label_of_root.entry(root).or_insert(next)
        })
        .collect())
}
