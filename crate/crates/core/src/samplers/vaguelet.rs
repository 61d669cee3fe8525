use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{FieldSample, FieldSampler, Provenance};
use crate::error::{Error, Result};
use crate::grid::{DomainKind, GridDomain};
use crate::kernels::{Scheme, VaguletBasis};
use crate::rng::{fill_normal, RngStream};

/// `X_n = 2√(ln 2) G + √(2π) Σ_{j≤n} Σ_k A_{j,k} ν_{j,k}`.
///
/// Each level is a circular convolution of its table with the shift
/// coefficients; all levels are accumulated in one `m`-bin spectrum.
/// Normals are drawn as `G`, then `A_{j,k}` level by level.
pub struct VaguletSampler {
    n: u32,
    grid: GridDomain,
    spectra: Vec<Arc<Vec<Complex64>>>,
    level_ffts: Vec<Arc<dyn Fft<f64>>>,
    inverse: Arc<dyn Fft<f64>>,
    variance: Arc<[f64]>,
}

impl std::fmt::Debug for VaguletSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VaguletSampler").field("n", &self.n).field("grid", &self.grid).finish()
    }
}

impl VaguletSampler {
    pub fn new(n: u32, grid: &GridDomain) -> Result<Self> {
        if grid.kind() != DomainKind::Circle {
            return Err(Error::InvalidGrid("vaguelets live on the circle".into()));
        }
        if n > 20 {
            return Err(Error::InvalidLevel(format!("vaguelet level {n} too large to sample")));
        }
        let basis = VaguletBasis::new(n, grid.len())?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            grid: *grid,
            spectra: basis.spectra(),
            level_ffts: (0..=n).map(|j| planner.plan_fft_forward(1 << j)).collect(),
            inverse: planner.plan_fft_inverse(grid.len()),
            variance: basis.variance_profile().into(),
        })
    }

    /// Number of standard normals per draw.
    pub fn dimension(&self) -> usize {
        1 << (self.n + 1)
    }

    /// Field from `G` and the concatenated level coefficients.
    pub fn from_normals(&self, constant: f64, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.dimension() - 1 {
            return Err(Error::LengthMismatch { expected: self.dimension() - 1, got: coeffs.len() });
        }
        let m = self.grid.len();
        let mut spectrum = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..=self.n {
            let count = 1usize << j;
            let a = &coeffs[count - 1..2 * count - 1];
            let mut a_hat: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            self.level_ffts[j as usize].process(&mut a_hat);
            let table = &self.spectra[j as usize];
            let r = table.len();
            let inv_r = 1.0 / r as f64;
            for (f, t) in table.iter().enumerate() {
                spectrum[f % m] += t * a_hat[f % count] * inv_r;
            }
        }
        self.inverse.process(&mut spectrum);
        let c = 2.0 * LN_2.sqrt() * constant;
        let s = (2.0 * PI).sqrt();
        Ok(spectrum.iter().map(|z| c + s * z.re).collect())
    }
}

impl FieldSampler for VaguletSampler {
    fn grid(&self) -> &GridDomain {
        &self.grid
    }

    fn scheme(&self) -> Scheme {
        Scheme::Vaguelet { n: self.n }
    }

    fn sample(&self, stream: RngStream) -> FieldSample {
        let mut z = vec![0.0; self.dimension()];
        fill_normal(&mut stream.rng(), &mut z);
        let values = self.from_normals(z[0], &z[1..]).expect("dimension matches");
        FieldSample {
            grid: self.grid,
            values,
            variance: self.variance.clone(),
            scheme: Some(self.scheme()),
            provenance: Provenance { stream: Some(stream), jitter: 0.0, beta_in_kernel: None },
        }
    }
}

/// One draw of the level-`n` vaguelet field.
pub fn sample_vaguelet_field(n: u32, grid: &GridDomain, stream: RngStream) -> Result<FieldSample> {
    Ok(VaguletSampler::new(n, grid)?.sample(stream))
}
