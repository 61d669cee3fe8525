//! Closed-form covariance functions of every approximation scheme, and their
//! restriction to grids.

pub mod circle;
pub mod cone;
mod matrix;
pub mod vaguelet;

use serde::{Deserialize, Serialize};

pub use circle::{
    conv_multiplier, convolution_cov, fourier_cov, log_kernel_circle, spectral_cutoff, whitenoise_branch_point,
    whitenoise_cov, Mollifier, CONSTANT_MODE_VARIANCE,
};
pub use cone::exact_cone_cov_interval;
pub use matrix::{build_cov_matrix, factorize, CovMatrix, KernelTable};
pub use vaguelet::{haar_vaguelet_coeff, periodized_vaguelet, vaguelet_cov, VaguletBasis};

use crate::error::{Error, Result};
use crate::grid::{CircleDistance, DomainKind};

/// One covariance family with its truncation parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", deny_unknown_fields)]
pub enum Scheme {
    /// The log-correlated limit; infinite on the diagonal.
    LimitCircle,
    /// Partial sum of the Fourier series up to mode `n`.
    FourierPartial { n: u32 },
    /// Periodic hyperbolic white noise cut at height `e^{-t}`.
    WhiteNoiseCone { t: f64 },
    /// Convolution with `φ_{1/n}`, realized spectrally.
    ConvolutionSpectral { n: u32, mollifier: Mollifier },
    /// Haar vaguelet partial sum over levels `0..=n`.
    Vaguelet { n: u32 },
    /// Exactly scale-invariant cone field on `[0, 1]`.
    ExactConeInterval { t: f64 },
}

impl Scheme {
    /// White-noise scheme at the level matched to Fourier mode `n`: `t = ln n`.
    pub fn white_noise_for(n: u32) -> Self {
        Scheme::WhiteNoiseCone { t: (n as f64).ln() }
    }

    pub fn domain(&self) -> DomainKind {
        match self {
            Scheme::ExactConeInterval { .. } => DomainKind::Interval,
            _ => DomainKind::Circle,
        }
    }

    /// Whether the kernel depends on the points only through their distance.
    pub fn is_stationary(&self) -> bool {
        !matches!(self, Scheme::Vaguelet { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::LimitCircle => "LimitCircle",
            Scheme::FourierPartial { .. } => "FourierPartial",
            Scheme::WhiteNoiseCone { .. } => "WhiteNoiseCone",
            Scheme::ConvolutionSpectral { mollifier: Mollifier::Gaussian, .. } => "ConvolutionGaussian",
            Scheme::ConvolutionSpectral { mollifier: Mollifier::Poisson, .. } => "ConvolutionPoisson",
            Scheme::Vaguelet { .. } => "Vaguelet",
            Scheme::ExactConeInterval { .. } => "ExactConeInterval",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidLevel(msg));
        match *self {
            Scheme::FourierPartial { n } | Scheme::ConvolutionSpectral { n, .. } if n < 1 => {
                bad(format!("{} needs n ≥ 1", self.name()))
            }
            Scheme::Vaguelet { n } if n > 20 => bad(format!("vaguelet level {n} is beyond desk scale")),
            Scheme::WhiteNoiseCone { t } | Scheme::ExactConeInterval { t } if !(t > 0.0 && t.is_finite()) => {
                bad(format!("{} needs t > 0, got {t}", self.name()))
            }
            _ => Ok(()),
        }
    }

    /// Unscaled kernel at two points of the domain.
    pub fn kernel(&self, x: f64, y: f64) -> Result<f64> {
        let d = || CircleDistance::between(x, y);
        match *self {
            Scheme::LimitCircle => log_kernel_circle(d()),
            Scheme::FourierPartial { n } => fourier_cov(n, d()),
            Scheme::WhiteNoiseCone { t } => whitenoise_cov(t, d()),
            Scheme::ConvolutionSpectral { n, mollifier } => convolution_cov(mollifier, n, d()),
            Scheme::Vaguelet { n } => Ok(vaguelet_cov(n, x, y)),
            Scheme::ExactConeInterval { t } => exact_cone_cov_interval(t, x, y),
        }
    }
}

/// A covariance family together with the inverse temperature `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub scheme: Scheme,
    pub beta: f64,
}

impl CovarianceSpec {
    pub fn new(scheme: Scheme, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidBeta(beta));
        }
        scheme.validate()?;
        Ok(Self { scheme, beta })
    }

    /// `β = 1`.
    pub fn critical(scheme: Scheme) -> Result<Self> {
        Self::new(scheme, 1.0)
    }

    /// Kernel without the `β²` factor.
    pub fn kernel(&self, x: f64, y: f64) -> Result<f64> {
        self.scheme.kernel(x, y)
    }

    /// `β² · kernel(x, y)`.
    pub fn covariance(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.beta * self.beta * self.kernel(x, y)?)
    }
}
