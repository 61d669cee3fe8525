use std::f64::consts::LN_2;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{FieldSample, FieldSampler, Provenance};
use crate::error::{Error, Result};
use crate::grid::GridDomain;
use crate::kernels::circle::{conv_multiplier, cosine_series, fourier_weights, Mollifier, CONSTANT_MODE_VARIANCE};
use crate::kernels::Scheme;
use crate::rng::{fill_normal, RngStream};

/// Independent standard normals `G`, `A_k`, `B_k` (`k = 1..=N`) of the
/// free-field trace. They are drawn in the order `G, A_1, B_1, A_2, B_2, …`
/// so a longer draw from the same stream extends a shorter one.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoefficients {
    pub constant: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl SpectralCoefficients {
    pub fn modes(&self) -> usize {
        self.cos.len()
    }
}

pub fn sample_spectral_coefficients(modes: usize, stream: RngStream) -> SpectralCoefficients {
    let mut rng = stream.rng();
    let mut buf = vec![0.0; 1 + 2 * modes];
    fill_normal(&mut rng, &mut buf);
    SpectralCoefficients {
        constant: buf[0],
        cos: buf[1..].iter().step_by(2).copied().collect(),
        sin: buf[2..].iter().step_by(2).copied().collect(),
    }
}

/// Evaluates `2√(ln 2) G + √2 Σ_k m_k k^{-1/2} (A_k cos 2πkx + B_k sin 2πkx)` on
/// the grid with one inverse FFT, folding frequencies modulo `m`.
#[derive(Clone)]
pub struct SpectralSynth {
    grid: GridDomain,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralSynth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralSynth").field("grid", &self.grid).finish()
    }
}

impl SpectralSynth {
    pub fn new(grid: &GridDomain) -> Self {
        Self { grid: *grid, fft: FftPlanner::new().plan_fft_inverse(grid.len()) }
    }

    pub fn grid(&self) -> &GridDomain {
        &self.grid
    }

    /// Uses modes `1..=modes`, each damped by `multiplier(k)`.
    pub fn synthesize(
        &self,
        coeffs: &SpectralCoefficients,
        modes: usize,
        multiplier: impl Fn(usize) -> f64,
    ) -> Result<Vec<f64>> {
        if modes > coeffs.modes() {
            return Err(Error::InvalidArgument(format!(
                "need {modes} modes, coefficients carry {}",
                coeffs.modes()
            )));
        }
        let m = self.grid.len();
        let mut spectrum = vec![Complex64::new(0.0, 0.0); m];
        for k in 1..=modes {
            let w = (2.0 / k as f64).sqrt() * multiplier(k);
            spectrum[k % m] += Complex64::new(coeffs.cos[k - 1], -coeffs.sin[k - 1]) * w;
        }
        self.fft.process(&mut spectrum);
        let c = 2.0 * LN_2.sqrt() * coeffs.constant;
        Ok(spectrum.iter().map(|z| c + z.re).collect())
    }
}

/// Draws the `n`-mode Fourier field; returns the coefficients for coupling.
pub fn sample_fourier_field(
    n: u32,
    grid: &GridDomain,
    stream: RngStream,
) -> Result<(FieldSample, SpectralCoefficients)> {
    let sampler = FourierSampler::new(n, grid)?;
    let coeffs = sample_spectral_coefficients(n as usize, stream);
    let field = sampler.from_coefficients(&coeffs, Some(stream))?;
    Ok((field, coeffs))
}

/// Partial Fourier sum `X_{2,n}`.
#[derive(Debug, Clone)]
pub struct FourierSampler {
    n: u32,
    synth: SpectralSynth,
    variance: Arc<[f64]>,
}

impl FourierSampler {
    pub fn new(n: u32, grid: &GridDomain) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidLevel("Fourier level must be ≥ 1".into()));
        }
        let var = cosine_series(CONSTANT_MODE_VARIANCE, fourier_weights(n as usize), 0.0);
        Ok(Self { n, synth: SpectralSynth::new(grid), variance: vec![var; grid.len()].into() })
    }

    /// Field from the first `n` modes of `coeffs` (which may carry more).
    pub fn from_coefficients(&self, coeffs: &SpectralCoefficients, stream: Option<RngStream>) -> Result<FieldSample> {
        let values = self.synth.synthesize(coeffs, self.n as usize, |_| 1.0)?;
        Ok(FieldSample {
            grid: self.synth.grid,
            values,
            variance: self.variance.clone(),
            scheme: Some(Scheme::FourierPartial { n: self.n }),
            provenance: Provenance { stream, jitter: 0.0, beta_in_kernel: None },
        })
    }
}

impl FieldSampler for FourierSampler {
    fn grid(&self) -> &GridDomain {
        &self.synth.grid
    }

    fn scheme(&self) -> Scheme {
        Scheme::FourierPartial { n: self.n }
    }

    fn sample(&self, stream: RngStream) -> FieldSample {
        let coeffs = sample_spectral_coefficients(self.n as usize, stream);
        self.from_coefficients(&coeffs, Some(stream)).expect("coefficients drawn to length")
    }
}

/// Modes kept for the mollifier at scale `eps`; beyond them the squared
/// multipliers contribute less than `1e-9` to the covariance.
pub(crate) fn cutoff_for_eps(mollifier: Mollifier, eps: f64) -> usize {
    let c = match mollifier {
        Mollifier::Gaussian => 4.0,
        Mollifier::Poisson => 10.0,
    };
    (c / eps - 1e-9).ceil().max(1.0) as usize
}

fn convolution_variance(mollifier: Mollifier, eps: f64) -> f64 {
    let weights = (1..=cutoff_for_eps(mollifier, eps)).map(|k| {
        let m = conv_multiplier(mollifier, eps, k as i64);
        2.0 * m * m / k as f64
    });
    cosine_series(CONSTANT_MODE_VARIANCE, weights, 0.0)
}

/// `φ_ε * X` built from shared coefficients: mode `k` of the Fourier field is
/// damped by `conv_multiplier(k, ε)`.
pub fn sample_convolution_field(
    coeffs: &SpectralCoefficients,
    mollifier: Mollifier,
    eps: f64,
    grid: &GridDomain,
) -> Result<FieldSample> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("ε must be > 0, got {eps}")));
    }
    let modes = cutoff_for_eps(mollifier, eps);
    let synth = SpectralSynth::new(grid);
    let values = synth.synthesize(coeffs, modes, |k| conv_multiplier(mollifier, eps, k as i64))?;
    let n = (1.0 / eps).round() as u32;
    Ok(FieldSample {
        grid: *grid,
        values,
        variance: vec![convolution_variance(mollifier, eps); grid.len()].into(),
        scheme: Some(Scheme::ConvolutionSpectral { n, mollifier }),
        provenance: Provenance { stream: None, jitter: 0.0, beta_in_kernel: None },
    })
}

/// Convolution field at level `n` (`ε = 1/n`) with its own coefficients.
#[derive(Debug, Clone)]
pub struct ConvolutionSampler {
    n: u32,
    mollifier: Mollifier,
    synth: SpectralSynth,
    multipliers: Vec<f64>,
    variance: Arc<[f64]>,
}

impl ConvolutionSampler {
    pub fn new(mollifier: Mollifier, n: u32, grid: &GridDomain) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidLevel("convolution level must be ≥ 1".into()));
        }
        let eps = 1.0 / n as f64;
        let multipliers = (0..=cutoff_for_eps(mollifier, eps))
            .map(|k| conv_multiplier(mollifier, eps, k as i64))
            .collect();
        Ok(Self {
            n,
            mollifier,
            synth: SpectralSynth::new(grid),
            multipliers,
            variance: vec![convolution_variance(mollifier, eps); grid.len()].into(),
        })
    }

    pub fn modes(&self) -> usize {
        self.multipliers.len() - 1
    }

    pub fn from_coefficients(&self, coeffs: &SpectralCoefficients, stream: Option<RngStream>) -> Result<FieldSample> {
        let values = self.synth.synthesize(coeffs, self.modes(), |k| self.multipliers[k])?;
        Ok(FieldSample {
            grid: self.synth.grid,
            values,
            variance: self.variance.clone(),
            scheme: Some(self.scheme()),
            provenance: Provenance { stream, jitter: 0.0, beta_in_kernel: None },
        })
    }
}

impl FieldSampler for ConvolutionSampler {
    fn grid(&self) -> &GridDomain {
        &self.synth.grid
    }

    fn scheme(&self) -> Scheme {
        Scheme::ConvolutionSpectral { n: self.n, mollifier: self.mollifier }
    }

    fn sample(&self, stream: RngStream) -> FieldSample {
        let coeffs = sample_spectral_coefficients(self.modes(), stream);
        self.from_coefficients(&coeffs, Some(stream)).expect("coefficients drawn to length")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{convolution_cov, fourier_cov};
    use crate::grid::CircleDistance;
    use crate::rng::Purpose;

    fn grid(m: usize) -> GridDomain {
        GridDomain::circle(m).unwrap()
    }

    #[test]
    fn fft_synthesis_matches_direct_sum() {
        let g = grid(16);
        // 40 modes on 16 points exercises the aliasing fold.
        let coeffs = sample_spectral_coefficients(40, RngStream::new(3, 0, Purpose::Test));
        let fast = SpectralSynth::new(&g).synthesize(&coeffs, 40, |_| 1.0).unwrap();
        for (i, v) in fast.iter().enumerate() {
            let x = g.point(i);
            let mut direct = 2.0 * LN_2.sqrt() * coeffs.constant;
            for k in 1..=40 {
                let th = 2.0 * std::f64::consts::PI * k as f64 * x;
                direct += (2.0 / k as f64).sqrt() * (coeffs.cos[k - 1] * th.cos() + coeffs.sin[k - 1] * th.sin());
            }
            assert!((v - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_and_prefix_stable() {
        let g = grid(32);
        let s = RngStream::new(9, 4, Purpose::Field);
        let (a, ca) = sample_fourier_field(8, &g, s).unwrap();
        let (b, _) = sample_fourier_field(8, &g, s).unwrap();
        assert_eq!(a.values, b.values);
        let long = sample_spectral_coefficients(100, s);
        assert_eq!(long.constant, ca.constant);
        assert_eq!(&long.cos[..8], &ca.cos[..]);
        assert_eq!(&long.sin[..8], &ca.sin[..]);
    }

    #[test]
    fn identity_multiplier_is_the_fourier_field() {
        let g = grid(64);
        let s = RngStream::new(1, 2, Purpose::Coefficients);
        let coeffs = sample_spectral_coefficients(256, s);
        let fourier = FourierSampler::new(64, &g).unwrap().from_coefficients(&coeffs, None).unwrap();
        let undamped = SpectralSynth::new(&g).synthesize(&coeffs, 64, |_| 1.0).unwrap();
        assert_eq!(fourier.values, undamped);
    }

    #[test]
    fn variance_profiles_are_kernel_diagonals() {
        let g = grid(32);
        let zero = CircleDistance::new(0.0).unwrap();
        let f = FourierSampler::new(20, &g).unwrap().sample(RngStream::new(0, 0, Purpose::Field));
        assert!(f.variance.iter().all(|&v| v == fourier_cov(20, zero).unwrap()));
        for moll in [Mollifier::Gaussian, Mollifier::Poisson] {
            let c = ConvolutionSampler::new(moll, 20, &g).unwrap().sample(RngStream::new(0, 0, Purpose::Field));
            assert!(c.variance.iter().all(|&v| v == convolution_cov(moll, 20, zero).unwrap()));
        }
    }

    #[test]
    fn vanishing_eps_recovers_partial_sum() {
        let g = grid(32);
        let coeffs = sample_spectral_coefficients(20_000, RngStream::new(5, 0, Purpose::Coefficients));
        let target = SpectralSynth::new(&g).synthesize(&coeffs, 20, |_| 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [1e-2, 1e-3, 1e-4] {
            let conv = SpectralSynth::new(&g)
                .synthesize(&coeffs, 20, |k| conv_multiplier(Mollifier::Gaussian, eps, k as i64))
                .unwrap();
            let gap = conv.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn too_few_coefficients_is_an_error() {
        let g = grid(16);
        let coeffs = sample_spectral_coefficients(10, RngStream::new(0, 0, Purpose::Test));
        assert!(sample_convolution_field(&coeffs, Mollifier::Gaussian, 0.1, &g).is_err());
        let coeffs = sample_spectral_coefficients(40, RngStream::new(0, 0, Purpose::Test));
        assert!(sample_convolution_field(&coeffs, Mollifier::Gaussian, 0.1, &g).is_ok());
    }
}
