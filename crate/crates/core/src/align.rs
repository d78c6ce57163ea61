//! Identifiability-aware error metrics.
//!
//! Latent positions of a GRDPG are only determined up to the indefinite
//! orthogonal group `O(p, q)`. Both arguments of [`d_two_infinity`] are first
//! brought to the canonical form `U_P |Λ_P|^{1/2}` of `P = X I Xᵀ`, which
//! leaves only the compact residual freedom `O(d) ∩ O(p, q) = O(p) × O(q)`;
//! that is removed by a block-orthogonal Procrustes rotation.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};

use crate::eigen::{canonicalize, top_by_magnitude, EigenOptions, EigenPairs, SymmetricOperator};
use crate::error::{Error, Result};
use crate::model::{LatentPositions, Signature};

/// Relative eigenvalue floor below which a canonical form is refused.
const RANK_TOL: f64 = 1e-10;
/// Conditioning floor for the `d_{2,∞}` metric.
const METRIC_COND_TOL: f64 = 1e-8;

/// Largest Euclidean row norm.
pub fn two_to_infinity(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.norm()).fold(0.0, f64::max)
}

/// `U_P |Λ_P|^{1/2}` together with the eigenvalues of `P = X I Xᵀ`.
#[derive(Clone, Debug)]
pub struct CanonicalForm {
    pub xtilde: DMatrix<f64>,
    /// Signature realised by the signs of the eigenvalues.
    pub sig: Signature,
    pub eigvals: Vec<f64>,
}

impl CanonicalForm {
    fn from_pairs(pairs: EigenPairs) -> Result<Self> {
        let top = pairs.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bottom = pairs.values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if !(bottom > RANK_TOL * top) {
            return Err(Error::Degenerate(format!(
                "rank deficient: |λ_min| = {bottom:e}, |λ_max| = {top:e}"
            )));
        }
        let mut xtilde = pairs.vectors;
        for (c, lambda) in pairs.values.iter().enumerate() {
            xtilde.column_mut(c).scale_mut(lambda.abs().sqrt());
        }
        let p = pairs.values.iter().filter(|&&v| v > 0.0).count();
        Ok(Self {
            xtilde,
            sig: Signature {
                p,
                q: pairs.values.len() - p,
            },
            eigvals: pairs.values,
        })
    }

    /// `|λ|_min / |λ|_max`.
    pub fn condition_ratio(&self) -> f64 {
        let top = self.eigvals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bottom = self.eigvals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        bottom / top
    }
}

/// Canonical form of `x` under signature `sig`, computed from the `d × d`
/// Gram matrix: with `G = XᵀX` and `G^{1/2} I G^{1/2} = V Λ Vᵀ`, the columns
/// of `X G^{-1/2} V` are eigenvectors of `P` with eigenvalues `Λ`.
pub fn canonical_form_of(x: &DMatrix<f64>, sig: Signature) -> Result<CanonicalForm> {
    let d = sig.dim();
    if x.ncols() != d {
        return Err(Error::param(format!("matrix has {} columns, signature needs {d}", x.ncols())));
    }
    if x.nrows() < d {
        return Err(Error::Degenerate(format!("{} rows cannot span dimension {d}", x.nrows())));
    }
    let gram = x.transpose() * x;
    let g = SymmetricEigen::new(gram);
    let gmax = g.eigenvalues.amax();
    if !(g.eigenvalues.min() > RANK_TOL * RANK_TOL * gmax) {
        return Err(Error::Degenerate("latent matrix is not of full column rank".into()));
    }
    let root = |power: f64| {
        let diag = g.eigenvalues.map(|v| v.powf(power));
        &g.eigenvectors * DMatrix::from_diagonal(&diag) * g.eigenvectors.transpose()
    };
    let (half, inv_half) = (root(0.5), root(-0.5));
    let core = &half * sig.identity() * &half;
    let core = (&core + core.transpose()) * 0.5;
    let inner = SymmetricEigen::new(core);
    let u = x * inv_half * &inner.eigenvectors;
    CanonicalForm::from_pairs(canonicalize(EigenPairs {
        values: inner.eigenvalues.iter().copied().collect(),
        vectors: u,
    }))
}

pub fn canonical_form(x: &LatentPositions) -> Result<CanonicalForm> {
    canonical_form_of(&x.x, x.sig)
}

/// `v ↦ X I Xᵀ v` without forming the `n × n` matrix.
struct FactoredGram<'a> {
    x: &'a DMatrix<f64>,
    sig: Signature,
}

impl SymmetricOperator for FactoredGram<'_> {
    fn dim(&self) -> usize {
        self.x.nrows()
    }

    fn apply(&self, v: &[f64], y: &mut [f64]) {
        let v = nalgebra::DVector::from_column_slice(v);
        let mut t = self.x.transpose() * v;
        for k in 0..t.len() {
            t[k] *= self.sig.sign(k);
        }
        y.copy_from_slice((self.x * t).as_slice());
    }
}

/// Canonical form via a direct eigendecomposition of the `n × n` matrix
/// `P = X I Xᵀ`. Independent of the Gram route in [`canonical_form_of`].
pub fn canonical_form_spectral(x: &DMatrix<f64>, sig: Signature) -> Result<CanonicalForm> {
    let op = FactoredGram { x, sig };
    let pairs = top_by_magnitude(&op, sig.dim(), EigenOptions::default())?;
    CanonicalForm::from_pairs(canonicalize(pairs))
}

/// Block-diagonal `O ∈ O(p) × O(q)` minimising `‖A O − B‖_F`.
pub fn block_procrustes(a: &DMatrix<f64>, b: &DMatrix<f64>, sig: Signature) -> Result<DMatrix<f64>> {
    if a.shape() != b.shape() {
        return Err(Error::param(format!("shape mismatch {:?} vs {:?}", a.shape(), b.shape())));
    }
    let d = sig.dim();
    if a.ncols() != d {
        return Err(Error::param(format!("matrices have {} columns, signature needs {d}", a.ncols())));
    }
    let mut o = DMatrix::identity(d, d);
    for (start, len) in [(0, sig.p), (sig.p, sig.q)] {
        if len == 0 {
            continue;
        }
        let cross = a.columns(start, len).transpose() * b.columns(start, len);
        if cross.amax() <= f64::MIN_POSITIVE {
            continue;
        }
        let svd = cross.svd(true, true);
        let (u, vt) = match (svd.u, svd.v_t) {
            (Some(u), Some(vt)) => (u, vt),
            _ => continue,
        };
        o.view_mut((start, start), (len, len)).copy_from(&(u * vt));
    }
    Ok(o)
}

/// Value of `d_{2,∞}` with its alignment diagnostics.
#[derive(Clone, Debug)]
pub struct D2InfReport {
    pub value: f64,
    /// Block rotation applied to the canonical form of the first argument.
    pub rotation: DMatrix<f64>,
    /// `‖Ỹ − X̃ O‖_F` at the surrogate optimum.
    pub frobenius_residual: f64,
    pub sig_x: Signature,
    pub sig_y: Signature,
}

/// `d_{2,∞}(X, Y)` with the Frobenius-optimal block rotation standing in for
/// the exact `ℓ_{2,∞}` minimiser, which makes the value an upper bound.
pub fn d_two_infinity_report(x: &DMatrix<f64>, y: &DMatrix<f64>, sig: Signature) -> Result<D2InfReport> {
    if x.shape() != y.shape() {
        return Err(Error::param(format!("shape mismatch {:?} vs {:?}", x.shape(), y.shape())));
    }
    let cx = canonical_form_of(x, sig)?;
    let cy = canonical_form_of(y, sig)?;
    for (name, c) in [("first", &cx), ("second", &cy)] {
        if c.condition_ratio() < METRIC_COND_TOL {
            return Err(Error::Degenerate(format!(
                "{name} argument is ill-conditioned (|λ| ratio {:e})",
                c.condition_ratio()
            )));
        }
    }
    if cx.sig != cy.sig {
        warn!("realised signatures differ ({:?} vs {:?}); aligning under {:?}", cx.sig, cy.sig, sig);
    }
    let rotation = block_procrustes(&cx.xtilde, &cy.xtilde, sig)?;
    let diff = &cy.xtilde - &cx.xtilde * &rotation;
    Ok(D2InfReport {
        value: two_to_infinity(&diff),
        frobenius_residual: diff.norm(),
        rotation,
        sig_x: cx.sig,
        sig_y: cy.sig,
    })
}

pub fn d_two_infinity(x: &DMatrix<f64>, y: &DMatrix<f64>, sig: Signature) -> Result<f64> {
    d_two_infinity_report(x, y, sig).map(|r| r.value)
}

/// Symmetric Hausdorff distance between the row sets of `x` and `y`.
pub fn hausdorff(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::param("Hausdorff distance of an empty set"));
    }
    if x.ncols() != y.ncols() {
        return Err(Error::param("point sets live in different dimensions"));
    }
    let directed = |a: &DMatrix<f64>, b: &DMatrix<f64>| {
        a.row_iter()
            .map(|ra| {
                b.row_iter()
                    .map(|rb| (ra - rb).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    Ok(directed(x, y).max(directed(y, x)))
}
