use faer::{Mat, Side};

use super::circle::{convolution_weights, cosine_series_on_grid, fourier_weights, CONSTANT_MODE_VARIANCE};
use super::{CovarianceSpec, Scheme, VaguletBasis};
use crate::error::{Error, Result};
use crate::grid::{CircleDistance, DomainKind, GridDomain};
use crate::kernels::{exact_cone_cov_interval, log_kernel_circle, whitenoise_cov};

/// Unscaled kernel restricted to a grid.
#[derive(Debug, Clone)]
pub enum KernelTable {
    /// Value per grid lag `0..=max_lag`.
    Lag(Vec<f64>),
    /// Full row-major `m × m` matrix.
    Full(Vec<f64>),
}

impl KernelTable {
    pub fn new(scheme: &Scheme, grid: &GridDomain) -> Result<Self> {
        if scheme.domain() != grid.kind() {
            return Err(Error::InvalidGrid(format!(
                "{} lives on {:?}, grid is {:?}",
                scheme.name(),
                scheme.domain(),
                grid.kind()
            )));
        }
        let m = grid.len();
        let lags = 0..=grid.max_lag();
        let table = match *scheme {
            Scheme::LimitCircle => KernelTable::Lag(
                lags.map(|l| {
                    if l == 0 {
                        f64::INFINITY
                    } else {
                        log_kernel_circle(CircleDistance::between(0.0, grid.point(l))).expect("nonzero lag")
                    }
                })
                .collect(),
            ),
            Scheme::FourierPartial { n } => {
                let w: Vec<f64> = fourier_weights(n as usize).collect();
                let mut t = cosine_series_on_grid(CONSTANT_MODE_VARIANCE, &w, m);
                t.truncate(grid.max_lag() + 1);
                KernelTable::Lag(t)
            }
            Scheme::ConvolutionSpectral { n, mollifier } => {
                let w: Vec<f64> = convolution_weights(mollifier, n).collect();
                let mut t = cosine_series_on_grid(CONSTANT_MODE_VARIANCE, &w, m);
                t.truncate(grid.max_lag() + 1);
                KernelTable::Lag(t)
            }
            Scheme::WhiteNoiseCone { t } => KernelTable::Lag(
                lags.map(|l| whitenoise_cov(t, CircleDistance::between(0.0, grid.point(l))))
                    .collect::<Result<_>>()?,
            ),
            Scheme::ExactConeInterval { t } => KernelTable::Lag(
                lags.map(|l| exact_cone_cov_interval(t, 0.0, grid.point(l))).collect::<Result<_>>()?,
            ),
            Scheme::Vaguelet { n } => KernelTable::Full(VaguletBasis::new(n, m)?.covariance_matrix()),
        };
        Ok(table)
    }

    pub fn get(&self, grid: &GridDomain, i: usize, j: usize) -> f64 {
        match self {
            KernelTable::Lag(t) => t[grid.lag(i, j)],
            KernelTable::Full(t) => t[i * grid.len() + j],
        }
    }
}

/// Grid covariance matrix `β² K(x_i, x_j)` together with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    entries: Mat<f64>,
    factor: Mat<f64>,
    jitter: f64,
}

impl CovMatrix {
    /// Factorizes an explicit symmetric matrix with the jitter ladder.
    pub fn from_entries(entries: Mat<f64>) -> Result<Self> {
        let (factor, jitter) = factorize(&entries)?;
        Ok(Self { entries, factor, jitter })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Mat<f64> {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Lower-triangular `L` with `L Lᵀ = entries + jitter·I`.
    pub fn factor(&self) -> &Mat<f64> {
        &self.factor
    }

    /// Absolute diagonal jitter that was needed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entries[(i, i)]).collect()
    }
}

/// Cholesky with diagonal jitter: first without, then `10⁻¹²·max diag`,
/// growing tenfold up to `10⁻⁶·max diag`.
pub fn factorize(entries: &Mat<f64>) -> Result<(Mat<f64>, f64)> {
    let m = entries.nrows();
    let max_diag = (0..m).map(|i| entries[(i, i)]).fold(0.0f64, f64::max);
    let cap = 1e-6 * max_diag;
    let mut jitter = 0.0;
    loop {
        let attempt = if jitter == 0.0 {
            entries.llt(Side::Lower)
        } else {
            let mut shifted = entries.clone();
            for i in 0..m {
                shifted[(i, i)] += jitter;
            }
            shifted.llt(Side::Lower)
        };
        if let Ok(llt) = attempt {
            return Ok((llt.L().to_owned(), jitter));
        }
        jitter = if jitter == 0.0 { 1e-12 * max_diag } else { jitter * 10.0 };
        if jitter > cap * (1.0 + 1e-9) {
            return Err(Error::Factorization { max_jitter: cap });
        }
    }
}

/// Builds `β² K` on the grid and factorizes it.
pub fn build_cov_matrix(spec: &CovarianceSpec, grid: &GridDomain) -> Result<CovMatrix> {
    if matches!(spec.scheme, Scheme::LimitCircle) {
        return Err(Error::Singular);
    }
    if grid.kind() == DomainKind::Circle && !matches!(spec.scheme.domain(), DomainKind::Circle) {
        return Err(Error::InvalidGrid("interval scheme on a circle grid".into()));
    }
    let table = KernelTable::new(&spec.scheme, grid)?;
    let b2 = spec.beta * spec.beta;
    let entries = Mat::from_fn(grid.len(), grid.len(), |i, j| b2 * table.get(grid, i, j));
    CovMatrix::from_entries(entries)
}
