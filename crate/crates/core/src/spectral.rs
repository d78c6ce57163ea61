//! Adjacency spectral embedding and its privacy-adjusted variant.

use std::io::{BufRead, Write};

use log::warn;
use nalgebra::DMatrix;

use crate::eigen::{canonicalize, top_by_magnitude, EigenOptions, SymmetricOperator};
use crate::error::{Error, Result};
use crate::graph::{pair_count, AdjacencyLists, Graph};
use crate::model::Signature;
use crate::privacy::PrivacyParams;
use crate::util::{fmt_f64, parse_f64};

/// `U |Λ|^{1/2}` for the `d` eigenpairs of largest magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub xhat: DMatrix<f64>,
    /// Sign of each retained eigenvalue, positives first.
    pub eig_signs: Vec<i8>,
    pub eigvals: Vec<f64>,
}

impl Embedding {
    pub fn n(&self) -> usize {
        self.xhat.nrows()
    }

    pub fn dim(&self) -> usize {
        self.xhat.ncols()
    }

    /// Signature realised by the eigenvalue signs.
    pub fn signature(&self) -> Signature {
        let p = self.eig_signs.iter().filter(|&&s| s > 0).count();
        Signature {
            p,
            q: self.eig_signs.len() - p,
        }
    }

    pub fn sign_pattern(&self) -> String {
        self.eig_signs
            .iter()
            .map(|&s| if s > 0 { '+' } else { '-' })
            .collect()
    }

    /// CSV with header `dim=<d>,signs=<pattern>,rho_check=<value>`.
    pub fn write_csv<W: Write>(&self, rho_check: f64, mut out: W) -> Result<()> {
        let mut s = format!(
            "dim={},signs={},rho_check={}\n",
            self.dim(),
            self.sign_pattern(),
            fmt_f64(rho_check)
        );
        crate::model::push_rows(&mut s, &self.xhat);
        out.write_all(s.as_bytes())?;
        Ok(())
    }
}

/// An embedding CSV as read back from disk.
#[derive(Clone, Debug)]
pub struct EmbeddingFile {
    pub xhat: DMatrix<f64>,
    pub signs: String,
    pub rho_check: f64,
}

impl EmbeddingFile {
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let t = crate::io::read_table(input)?;
        let signs = t.header.get("signs").cloned().unwrap_or_default();
        let rho_check = t
            .header
            .get("rho_check")
            .and_then(|v| parse_f64(v))
            .ok_or_else(|| Error::Parse("embedding header lacks rho_check".into()))?;
        Ok(Self {
            xhat: t.matrix,
            signs,
            rho_check,
        })
    }
}

/// Adjacency of a graph as a sparse operator.
pub struct GraphOperator {
    adj: AdjacencyLists,
}

impl GraphOperator {
    pub fn new(graph: &Graph) -> Self {
        Self {
            adj: graph.adjacency_lists(),
        }
    }
}

impl SymmetricOperator for GraphOperator {
    fn dim(&self) -> usize {
        self.adj.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.adj.neighbors(i).iter().map(|&j| x[j as usize]).sum();
        }
    }
}

fn check_dim(n: usize, d: usize) -> Result<()> {
    if d == 0 || d >= n {
        return Err(Error::param(format!("embedding dimension must satisfy 1 <= d < n (d = {d}, n = {n})")));
    }
    Ok(())
}

/// Spectral embedding of any symmetric operator.
pub fn adjacency_spectral_embedding<A: SymmetricOperator + ?Sized>(m: &A, d: usize) -> Result<Embedding> {
    check_dim(m.dim(), d)?;
    let pairs = canonicalize(top_by_magnitude(m, d, EigenOptions::default())?);
    let mut xhat = pairs.vectors;
    for (c, lambda) in pairs.values.iter().enumerate() {
        xhat.column_mut(c).scale_mut(lambda.abs().sqrt());
    }
    Ok(Embedding {
        xhat,
        eig_signs: pairs.values.iter().map(|&v| if v >= 0.0 { 1 } else { -1 }).collect(),
        eigvals: pairs.values,
    })
}

/// Spectral embedding of a dense symmetric matrix.
pub fn embed_dense(m: &DMatrix<f64>, d: usize) -> Result<Embedding> {
    if !m.is_square() {
        return Err(Error::param("matrix must be square"));
    }
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * m.amax().max(1.0) {
        return Err(Error::param(format!("matrix is not symmetric (max asymmetry {asym})")));
    }
    adjacency_spectral_embedding(m, d)
}

/// Adjacency spectral embedding of a graph.
pub fn embed_graph(graph: &Graph, d: usize) -> Result<Embedding> {
    adjacency_spectral_embedding(&GraphOperator::new(graph), d)
}

/// `(Z − τ²·J) / σ²`, held implicitly as a sparse matrix plus a rank-one
/// shift. The diagonal equals `−τ²/σ²`.
pub struct AdjustedMatrix {
    adj: AdjacencyLists,
    edges: usize,
    pub params: PrivacyParams,
}

impl AdjustedMatrix {
    pub fn n(&self) -> usize {
        self.adj.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let z = if i != j && self.adj.neighbors(i).binary_search(&(j as u32)).is_ok() {
            1.0
        } else {
            0.0
        };
        (z - self.params.tau2()) / self.params.sigma2()
    }
}

impl SymmetricOperator for AdjustedMatrix {
    fn dim(&self) -> usize {
        self.adj.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let shift = self.params.tau2() * x.iter().sum::<f64>();
        let inv = self.params.sigma2();
        for (i, yi) in y.iter_mut().enumerate() {
            let zx: f64 = self.adj.neighbors(i).iter().map(|&j| x[j as usize]).sum();
            *yi = (zx - shift) / inv;
        }
    }
}

/// De-biases a flipped graph: `Ǎ = (Z − τ²·11ᵀ)/σ²`.
pub fn privacy_adjust(z: &Graph, eps: f64) -> Result<AdjustedMatrix> {
    let params = PrivacyParams::new(eps)?;
    if params.sigma2() == 0.0 {
        return Err(Error::Numeric("no signal at ε = 0: σ² vanishes".into()));
    }
    Ok(AdjustedMatrix {
        adj: z.adjacency_lists(),
        edges: z.edge_count(),
        params,
    })
}

/// Mean of `Ǎ` over the strict upper triangle.
pub fn estimate_sparsity(ac: &AdjustedMatrix) -> Result<f64> {
    let pairs = pair_count(ac.n());
    if pairs == 0 {
        return Err(Error::param("sparsity needs at least two vertices"));
    }
    let density = ac.edges as f64 / pairs as f64;
    Ok((density - ac.params.tau2()) / ac.params.sigma2())
}

/// Output of the privacy-adjusted spectral embedding.
#[derive(Clone, Debug)]
pub struct PaseResult {
    pub embedding: Embedding,
    pub rho_check: f64,
}

impl PaseResult {
    pub fn rescale_valid(&self) -> bool {
        self.rho_check > 0.0
    }

    /// `X̌ / √ρ̌`, the estimate of the latent positions. Withheld when the
    /// sparsity estimate is not positive.
    pub fn rescaled(&self) -> Result<DMatrix<f64>> {
        if !self.rescale_valid() {
            return Err(Error::RescaleInvalid(self.rho_check));
        }
        Ok(&self.embedding.xhat / self.rho_check.sqrt())
    }
}

/// Privacy-adjusted spectral embedding of a flipped graph.
pub fn pase(z: &Graph, eps: f64, d: usize) -> Result<PaseResult> {
    check_dim(z.n(), d)?;
    let adjusted = privacy_adjust(z, eps)?;
    let rho_check = estimate_sparsity(&adjusted)?;
    if rho_check <= 0.0 {
        warn!("estimated sparsity {rho_check} is not positive; rescaled estimate withheld");
    }
    let embedding = adjacency_spectral_embedding(&adjusted, d)?;
    Ok(PaseResult { embedding, rho_check })
}
