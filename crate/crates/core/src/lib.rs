//! Edge-private spectral inference for generalized random dot-product graphs.
//!
//! The crate covers the whole pipeline: sampling latent positions and graphs
//! ([`model`]), privatising edges with randomized response ([`privacy`]),
//! de-biased spectral embedding ([`spectral`]), identifiability-aware error
//! metrics ([`align`]), Rips persistence and bottleneck distances ([`tda`]),
//! and the clustering baselines and experiment drivers ([`harness`]).

pub mod align;
pub mod eigen;
pub mod error;
pub mod graph;
pub mod harness;
pub mod io;
pub mod model;
pub mod privacy;
pub mod spectral;
pub mod tda;
pub mod util;

pub use error::{Error, Result};
pub use graph::Graph;
pub use model::{LatentDistributionSpec, LatentKind, LatentPositions, ProbabilityMatrix, Signature};
pub use privacy::PrivacyParams;
pub use spectral::Embedding;
