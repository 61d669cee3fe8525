//! Reproducible realizations of the approximating Gaussian fields on a grid.
//!
//! Spectral samplers (Fourier, convolution, vaguelet) return fields for
//! `β = 1`; `β` enters later, in the chaos weights. The Cholesky samplers
//! carry `β` inside their covariance matrix and say so in the provenance.

mod cholesky;
mod nested;
mod spectral;
mod vaguelet;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cholesky::{sample_cholesky_field, CholeskySampler, FactorCache};
pub use nested::{sample_nested_whitenoise, NestedWhiteNoise};
pub use spectral::{
    sample_convolution_field, sample_fourier_field, sample_spectral_coefficients, ConvolutionSampler,
    FourierSampler, SpectralCoefficients, SpectralSynth,
};
pub use vaguelet::{sample_vaguelet_field, VaguletSampler};

use crate::error::{Error, Result};
use crate::grid::GridDomain;
use crate::kernels::{CovarianceSpec, Scheme};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub stream: Option<RngStream>,
    /// Diagonal jitter used by the factorization, if any.
    pub jitter: f64,
    /// `Some(β)` when the values already include the factor `β`.
    pub beta_in_kernel: Option<f64>,
}

/// One realization of an approximating field.
#[derive(Debug, Clone)]
pub struct FieldSample {
    pub grid: GridDomain,
    pub values: Vec<f64>,
    /// `E[X(x_i)²]`, analytic.
    pub variance: Arc<[f64]>,
    /// `None` for auxiliary fields outside the covariance families.
    pub scheme: Option<Scheme>,
    pub provenance: Provenance,
}

impl FieldSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Anything that can draw a field from a stream.
pub trait FieldSampler: Send + Sync {
    fn grid(&self) -> &GridDomain;

    fn scheme(&self) -> Scheme;

    fn sample(&self, stream: RngStream) -> FieldSample;

    /// Draws one field per stream, in order.
    fn sample_batch(&self, streams: &[RngStream]) -> Vec<FieldSample> {
        streams.par_iter().map(|&s| self.sample(s)).collect()
    }
}

/// Picks the natural sampler for a covariance family.
///
/// The factorization cache is used for the Cholesky-backed schemes.
pub fn sampler_for(spec: &CovarianceSpec, grid: &GridDomain, cache: &FactorCache) -> Result<Box<dyn FieldSampler>> {
    match spec.scheme {
        Scheme::LimitCircle => Err(Error::Singular),
        Scheme::FourierPartial { n } => Ok(Box::new(FourierSampler::new(n, grid)?)),
        Scheme::ConvolutionSpectral { n, mollifier } => {
            Ok(Box::new(ConvolutionSampler::new(mollifier, n, grid)?))
        }
        Scheme::Vaguelet { n } => Ok(Box::new(VaguletSampler::new(n, grid)?)),
        Scheme::WhiteNoiseCone { .. } | Scheme::ExactConeInterval { .. } => {
            Ok(Box::new(CholeskySampler::with_cache(spec, grid, cache)?))
        }
    }
}
