//! Simple undirected graphs stored as a packed strict upper triangle.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use bitvec::prelude::*;

use crate::error::{Error, Result};

/// Binary symmetric adjacency with zero diagonal on `n` labelled vertices.
///
/// Only the strict upper triangle is stored, in row-major order, so pair
/// `(i, j)` with `i < j` lives at bit `i * (2n - i - 1) / 2 + (j - i - 1)`.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    bits: BitVec<u64, Lsb0>,
}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Graph")
            .field("n", &self.n)
            .field("edges", &self.edge_count())
            .finish()
    }
}

pub(crate) fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            bits: bitvec![u64, Lsb0; 0; pair_count(n)],
        }
    }

    pub fn complete(n: usize) -> Self {
        Self {
            n,
            bits: bitvec![u64, Lsb0; 1; pair_count(n)],
        }
    }

    /// Builds a graph from upper-triangle bits in row-major order.
    pub(crate) fn from_bits(n: usize, bits: BitVec<u64, Lsb0>) -> Self {
        debug_assert_eq!(bits.len(), pair_count(n));
        Self { n, bits }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self::empty(n);
        for (i, j) in edges {
            if i == j || i >= n || j >= n {
                return Err(Error::param(format!("invalid edge ({i}, {j}) for n = {n}")));
            }
            g.set_edge(i, j, true);
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.bits[self.index(i, j)]
    }

    pub fn set_edge(&mut self, i: usize, j: usize, present: bool) {
        assert!(i != j, "self loops are not representable");
        let idx = self.index(i, j);
        self.bits.set(idx, present);
    }

    pub fn edge_count(&self) -> usize {
        self.bits.count_ones()
    }

    /// Fraction of the `n choose 2` vertex pairs that are edges.
    pub fn density(&self) -> f64 {
        let pairs = pair_count(self.n);
        if pairs == 0 {
            0.0
        } else {
            self.edge_count() as f64 / pairs as f64
        }
    }

    pub(crate) fn bits(&self) -> &BitSlice<u64, Lsb0> {
        &self.bits
    }

    /// Edges `(i, j)` with `i < j` in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        let mut row = 0usize;
        let mut row_start = 0usize;
        self.bits.iter_ones().map(move |idx| {
            while idx >= row_start + (n - row - 1) {
                row_start += n - row - 1;
                row += 1;
            }
            (row, row + 1 + (idx - row_start))
        })
    }

    /// Dense 0/1 matrix.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for (i, j) in self.edges() {
            m[(i, j)] = 1.0;
            m[(j, i)] = 1.0;
        }
        m
    }

    /// Compressed neighbour lists.
    pub fn adjacency_lists(&self) -> AdjacencyLists {
        let mut degree = vec![0usize; self.n];
        for (i, j) in self.edges() {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut offsets = Vec::with_capacity(self.n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..self.n].to_vec();
        let mut targets = vec![0u32; offsets[self.n]];
        for (i, j) in self.edges() {
            targets[cursor[i]] = j as u32;
            cursor[i] += 1;
            targets[cursor[j]] = i as u32;
            cursor[j] += 1;
        }
        AdjacencyLists { offsets, targets }
    }

    /// Writes the `n <N>` header followed by one `i j` line per edge.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = String::new();
        writeln!(buf, "n {}", self.n).unwrap();
        for (i, j) in self.edges() {
            writeln!(buf, "{i} {j}").unwrap();
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty graph file".into()))??;
        let n = header
            .strip_prefix("n ")
            .and_then(|s| s.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::Parse(format!("bad graph header {header:?}")))?;
        let mut g = Self::empty(n);
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace().map(str::parse::<usize>);
            match (parts.next(), parts.next(), parts.next()) {
                (Some(Ok(i)), Some(Ok(j)), None) if i < j && j < n => g.set_edge(i, j, true),
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: expected `i j` with i < j < {n}, got {line:?}",
                        lineno + 2
                    )))
                }
            }
        }
        Ok(g)
    }
}

/// CSR-style neighbour lists of a [`Graph`].
#[derive(Clone, Debug)]
pub struct AdjacencyLists {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl AdjacencyLists {
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }
}
