//! Edge-level randomized response and its latent-space geometry.
//!
//! Flipping every vertex pair independently with probability
//! `π(ε) = 1/(e^ε + 1)` is ε-edge locally private. On a GRDPG it acts on the
//! latent positions as the lift `x ↦ (τ, σ√ρ·x)` with `σ² = 1 − 2π` and
//! `τ² = π`, so the flipped graph is again a GRDPG of signature `(p+1, q)`.

use bitvec::prelude::*;
use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::LatentPositions;
use crate::util::{rng_for, Stream};

/// `(ε, π, σ, τ)` for one application of edge flipping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrivacyParams {
    /// Privacy budget; `f64::INFINITY` means no privacy.
    pub eps: f64,
    /// Per-pair flip probability.
    pub pi: f64,
    pub sigma: f64,
    pub tau: f64,
}

impl PrivacyParams {
    pub fn new(eps: f64) -> Result<Self> {
        if eps.is_nan() || eps < 0.0 {
            return Err(Error::param(format!("epsilon must be >= 0, got {eps}")));
        }
        if eps == f64::INFINITY {
            return Ok(Self {
                eps,
                pi: 0.0,
                sigma: 1.0,
                tau: 0.0,
            });
        }
        let pi = 1.0 / (eps.exp() + 1.0);
        Ok(Self {
            eps,
            pi,
            sigma: (eps / 2.0).tanh().sqrt(),
            tau: pi.sqrt(),
        })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    pub fn tau2(&self) -> f64 {
        self.tau * self.tau
    }

    pub fn is_private(&self) -> bool {
        self.eps.is_finite()
    }
}

pub fn privacy_params(eps: f64) -> Result<PrivacyParams> {
    PrivacyParams::new(eps)
}

/// Flips each vertex pair of `graph` independently with probability `π(ε)`.
///
/// Uniforms are consumed one per pair in row-major upper-triangle order, so
/// runs with the same seed and different budgets are coupled: a pair flipped
/// at budget ε is also flipped at every smaller budget.
pub fn edge_flip(graph: &Graph, eps: f64, seed: u64) -> Result<Graph> {
    let params = PrivacyParams::new(eps)?;
    if !params.is_private() {
        return Ok(graph.clone());
    }
    let mut rng = rng_for(seed, Stream::Flip);
    let src = graph.bits();
    let mut bits: BitVec<u64, Lsb0> = BitVec::with_capacity(src.len());
    for bit in src.iter().by_vals() {
        let u: f64 = rng.random();
        bits.push(bit ^ (u < params.pi));
    }
    Ok(Graph::from_bits(graph.n(), bits))
}

/// Budget and flip probability of two successive flips.
pub fn compose_privacy(eps1: f64, eps2: f64) -> Result<(f64, f64)> {
    let a = PrivacyParams::new(eps1)?;
    let b = PrivacyParams::new(eps2)?;
    let pi = a.pi + b.pi - 2.0 * a.pi * b.pi;
    let eps = if pi == 0.0 {
        f64::INFINITY
    } else {
        (1.0 / pi - 1.0).ln()
    };
    Ok((eps, pi))
}

/// Latent positions of the flipped graph: row `i` becomes `(τ, σ√ρ·xᵢ)`
/// under signature `(p+1, q)`.
pub fn lift_latents(x: &LatentPositions, eps: f64, rho: f64) -> Result<LatentPositions> {
    let params = PrivacyParams::new(eps)?;
    let (n, d) = x.x.shape();
    let scale = params.sigma * rho.sqrt();
    let lifted = DMatrix::from_fn(n, d + 1, |i, k| {
        if k == 0 {
            params.tau
        } else {
            scale * x.x[(i, k - 1)]
        }
    });
    LatentPositions::new(
        lifted,
        x.sig.lifted(),
        params.tau2() + params.sigma2() * rho * x.scale_mu,
    )
}

/// Coefficients `(a, b)` such that the double lift
/// `x ↦ (τ₂, σ₂τ₁, σ₂σ₁x)` is equivalent to `x ↦ (0, a, b·x)`.
pub fn reduce_double_lift(eps1: f64, eps2: f64) -> Result<(f64, f64)> {
    let first = PrivacyParams::new(eps1)?;
    let second = PrivacyParams::new(eps2)?;
    let a = (second.tau2() + second.sigma2() * first.tau2()).sqrt();
    Ok((a, second.sigma * first.sigma))
}

/// The `(d+2) × (d+2)` matrix, acting on column vectors, that rotates the
/// two leading coordinates of the double lift onto `(0, a)`. It is a plane
/// rotation in the positive block, hence an element of `O(p+2, q)`.
pub fn double_lift_reduction(eps1: f64, eps2: f64, d: usize) -> Result<DMatrix<f64>> {
    let first = PrivacyParams::new(eps1)?;
    let second = PrivacyParams::new(eps2)?;
    let (a, _) = reduce_double_lift(eps1, eps2)?;
    let (u, v) = (second.tau, second.sigma * first.tau);
    let mut q = DMatrix::identity(d + 2, d + 2);
    if a > 0.0 {
        let (c, s) = (v / a, u / a);
        q[(0, 0)] = c;
        q[(0, 1)] = -s;
        q[(1, 0)] = s;
        q[(1, 1)] = c;
    }
    Ok(q)
}
