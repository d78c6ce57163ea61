//! Partial symmetric eigendecomposition: the `k` eigenpairs of largest
//! magnitude, computed densely for small problems and by Lanczos with full
//! reorthogonalization otherwise.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::util::{rng_for, Stream};

/// A real symmetric linear operator.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;

    /// `y ← A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            m.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        m
    }
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (yi, a) in y.iter_mut().zip(self.column(j).iter()) {
                    *yi += a * xj;
                }
            }
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }
}

/// Eigenpairs with eigenvectors as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    /// Problems up to this size are solved with a dense decomposition.
    pub dense_max: usize,
    /// Relative residual at which Ritz pairs count as converged.
    pub tol: f64,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            dense_max: 400,
            tol: 1e-11,
            seed: 0x5EED,
        }
    }
}

/// Indices of the `k` largest values by magnitude. Ties go to positive values,
/// then to the lower index.
fn select_by_magnitude(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .abs()
            .total_cmp(&values[a].abs())
            .then_with(|| (values[b] > 0.0).cmp(&(values[a] > 0.0)))
            .then(a.cmp(&b))
    });
    if k < values.len() {
        let (last, next) = (values[idx[k - 1]].abs(), values[idx[k]].abs());
        if (last - next).abs() <= 1e-12 * last.max(f64::MIN_POSITIVE) {
            warn!("eigenvalue magnitude tie at position {k}: |λ| = {last}; breaking by sign then index");
        }
    }
    idx.truncate(k);
    idx
}

/// Reorders eigenpairs canonically (positive eigenvalues by descending
/// value, then negative ones by descending magnitude) and flips each
/// eigenvector so its largest-magnitude coordinate is positive.
pub fn canonicalize(pairs: EigenPairs) -> EigenPairs {
    let k = pairs.values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (pairs.values[a], pairs.values[b]);
        (y >= 0.0)
            .cmp(&(x >= 0.0))
            .then_with(|| y.abs().total_cmp(&x.abs()))
            .then(a.cmp(&b))
    });
    let n = pairs.vectors.nrows();
    let mut vectors = DMatrix::zeros(n, k);
    let mut values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        values.push(pairs.values[src]);
        let col = pairs.vectors.column(src);
        let mut best = 0;
        for i in 1..n {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        let sign = if col[best] < 0.0 { -1.0 } else { 1.0 };
        vectors.column_mut(dst).copy_from(&(col * sign));
    }
    EigenPairs { values, vectors }
}

/// The `k` eigenpairs of largest |λ|, unordered beyond magnitude.
pub fn top_by_magnitude<A: SymmetricOperator + ?Sized>(
    op: &A,
    k: usize,
    opts: EigenOptions,
) -> Result<EigenPairs> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(Error::param(format!("cannot take {k} eigenpairs of a {n}×{n} operator")));
    }
    if n <= opts.dense_max {
        dense_top(&op.to_dense(), k)
    } else {
        lanczos_top(op, k, opts)
    }
}

fn dense_top(m: &DMatrix<f64>, k: usize) -> Result<EigenPairs> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("dense symmetric eigensolver did not converge".into()))?;
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let idx = select_by_magnitude(&values, k);
    let vectors = DMatrix::from_fn(m.nrows(), k, |i, c| eig.eigenvectors[(i, idx[c])]);
    Ok(EigenPairs {
        values: idx.iter().map(|&i| values[i]).collect(),
        vectors,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    // Two passes of classical Gram-Schmidt keep the basis orthonormal to
    // working precision.
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, w);
            axpy(-c, b, w);
        }
    }
}

fn lanczos_top<A: SymmetricOperator + ?Sized>(op: &A, k: usize, opts: EigenOptions) -> Result<EigenPairs> {
    let n = op.dim();
    let mut rng = rng_for(opts.seed, Stream::Eigen);
    let mut random_unit = |basis: &[Vec<f64>]| -> Option<Vec<f64>> {
        for _ in 0..4 {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            orthogonalize(&mut v, basis);
            let norm = dot(&v, &v).sqrt();
            if norm > 1e-8 {
                v.iter_mut().for_each(|x| *x /= norm);
                return Some(v);
            }
        }
        None
    };

    let mut basis: Vec<Vec<f64>> = vec![random_unit(&[]).expect("nonzero start vector")];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut scale = 0.0f64;
    let mut next_check = (2 * k + 10).min(n);

    loop {
        let j = basis.len() - 1;
        op.apply(&basis[j], &mut w);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("operator produced non-finite values".into()));
        }
        let a = dot(&basis[j], &w);
        alpha.push(a);
        orthogonalize(&mut w, &basis);
        let b = dot(&w, &w).sqrt();
        scale = scale.max(a.abs()).max(b);
        let m = basis.len();
        let exhausted = m == n;

        if exhausted || m >= next_check {
            let t = tridiagonal(&alpha, &beta);
            let eig = SymmetricEigen::new(t);
            let theta: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            let take = k.min(m);
            let idx = select_by_magnitude(&theta, take);
            let top = theta[idx[0]].abs().max(scale * f64::EPSILON);
            let converged = take == k
                && idx
                    .iter()
                    .all(|&i| (b * eig.eigenvectors[(m - 1, i)]).abs() <= opts.tol * top);
            if converged || exhausted {
                let mut vectors = DMatrix::zeros(n, k);
                for (c, &i) in idx.iter().enumerate() {
                    let mut col = vec![0.0; n];
                    for (r, v) in basis.iter().enumerate() {
                        axpy(eig.eigenvectors[(r, i)], v, &mut col);
                    }
                    let norm = dot(&col, &col).sqrt();
                    col.iter_mut().for_each(|x| *x /= norm);
                    vectors.column_mut(c).copy_from_slice(&col);
                }
                return Ok(EigenPairs {
                    values: idx.iter().map(|&i| theta[i]).collect(),
                    vectors,
                });
            }
            next_check = (m + (m / 8).max(5)).min(n);
        }

        if b <= 1e-10 * scale.max(f64::MIN_POSITIVE) {
            // Invariant subspace found: continue from a fresh direction
            // with no coupling to the previous block.
            match random_unit(&basis) {
                Some(v) => {
                    beta.push(0.0);
                    basis.push(v);
                }
                None => return Err(Error::Numeric("Lanczos restart failed".into())),
            }
        } else {
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
    }
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}
