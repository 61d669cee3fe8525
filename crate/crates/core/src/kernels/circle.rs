//! Stationary covariance functions on the unit circle.
//!
//! All kernels here are functions of the arc distance `d ∈ [0, 1/2]` and are
//! written for the critical field (the `β = 1` normalization): on the
//! diagonal they grow like `2 ln n`.

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::CircleDistance;

/// `4 ln 2`: the variance carried by the constant Fourier mode.
pub const CONSTANT_MODE_VARIANCE: f64 = 4.0 * LN_2;

/// Smoothing kernel for the convolution scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mollifier {
    /// Standard normal density.
    Gaussian,
    /// Poisson kernel of the disc; `ε = ln(1/r)` is the harmonic extension
    /// evaluated at radius `r`.
    Poisson,
}

/// Covariance of the free-field trace: `4 ln 2 + 2 ln(1/(2 sin πd))`.
pub fn log_kernel_circle(d: CircleDistance) -> Result<f64> {
    let d = d.get();
    if d == 0.0 {
        return Err(Error::Singular);
    }
    Ok(CONSTANT_MODE_VARIANCE - 2.0 * (2.0 * (PI * d).sin()).ln())
}

/// `c0 + Σ_{k=1}^{N} a_k cos(2πkd)` with `a_k = coeffs[k-1]`.
pub(crate) fn cosine_series(c0: f64, coeffs: impl IntoIterator<Item = f64>, d: f64) -> f64 {
    let mut acc = 0.0;
    for (i, a) in coeffs.into_iter().enumerate() {
        acc += a * (2.0 * PI * (i + 1) as f64 * d).cos();
    }
    c0 + acc
}

/// Evaluates the same series at every lag `d = l/m`, `l = 0..m`, by folding
/// the frequencies modulo `m` and running one inverse FFT.
pub(crate) fn cosine_series_on_grid(c0: f64, coeffs: &[f64], m: usize) -> Vec<f64> {
    let mut spectrum = vec![Complex64::new(0.0, 0.0); m];
    for (i, &a) in coeffs.iter().enumerate() {
        spectrum[(i + 1) % m].re += a;
    }
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_inverse(m);
    fft.process(&mut spectrum);
    spectrum.iter().map(|z| c0 + z.re).collect()
}

/// `2/k` for `k = 1..=n`: the covariance weights of the partial Fourier sum.
pub(crate) fn fourier_weights(n: usize) -> impl Iterator<Item = f64> {
    (1..=n).map(|k| 2.0 / k as f64)
}

/// Covariance of the `n`-th partial sum of the Fourier series:
/// `4 ln 2 + 2 Σ_{k=1}^{n} cos(2πkd)/k`.
pub fn fourier_cov(n: u32, d: CircleDistance) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidLevel("Fourier level must be ≥ 1".into()));
    }
    Ok(cosine_series(CONSTANT_MODE_VARIANCE, fourier_weights(n as usize), d.get()))
}

/// Branch point of the truncated white-noise covariance: below this distance
/// the two truncated cones overlap in their truncated part.
pub fn whitenoise_branch_point(t: f64) -> f64 {
    2.0 / PI * (PI / 2.0 * (-t).exp()).atan()
}

/// Covariance `h_t(d)` of the periodic hyperbolic white-noise field cut at
/// height `e^{-t}`.
pub fn whitenoise_cov(t: f64, d: CircleDistance) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidLevel(format!("white-noise level t must be > 0, got {t}")));
    }
    let d = d.get();
    if d > whitenoise_branch_point(t) {
        return log_kernel_circle(CircleDistance::new(d)?);
    }
    let a = PI / 2.0 * (-t).exp();
    Ok(-2.0 * d * t.exp() + 2.0 * t - 2.0 * (PI / 2.0 * d).cos().ln()
        + (PI * PI * (-2.0 * t).exp() + 4.0).ln()
        + 2.0 * a.atan() / a
        - 2.0 * PI.ln())
}

/// Field-level Fourier multiplier of the mollifier `φ_ε` at frequency `k`.
pub fn conv_multiplier(mollifier: Mollifier, eps: f64, k: i64) -> f64 {
    let k = k.unsigned_abs() as f64;
    match mollifier {
        Mollifier::Gaussian => (-2.0 * PI * PI * k * k * eps * eps).exp(),
        Mollifier::Poisson => (-k * eps).exp(),
    }
}

/// Number of modes kept when synthesizing the convolution field at level `n`
/// (`ε = 1/n`). Beyond it the squared multipliers sum to less than `1e-9`.
pub fn spectral_cutoff(mollifier: Mollifier, n: u32) -> usize {
    let n = n as usize;
    match mollifier {
        Mollifier::Gaussian => 4 * n,
        Mollifier::Poisson => 10 * n,
    }
}

pub(crate) fn convolution_weights(mollifier: Mollifier, n: u32) -> impl Iterator<Item = f64> {
    let eps = 1.0 / n as f64;
    (1..=spectral_cutoff(mollifier, n)).map(move |k| {
        let m = conv_multiplier(mollifier, eps, k as i64);
        2.0 * m * m / k as f64
    })
}

/// Covariance of `φ_{1/n} * X`:
/// `4 ln 2 + 2 Σ_k m(k, 1/n)² cos(2πkd)/k`, summed to [`spectral_cutoff`].
pub fn convolution_cov(mollifier: Mollifier, n: u32, d: CircleDistance) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidLevel("convolution level must be ≥ 1".into()));
    }
    Ok(cosine_series(CONSTANT_MODE_VARIANCE, convolution_weights(mollifier, n), d.get()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cd(d: f64) -> CircleDistance {
        CircleDistance::new(d).unwrap()
    }

    fn harmonic(n: u32) -> f64 {
        (1..=n).map(|k| 1.0 / k as f64).sum()
    }

    #[test]
    fn log_kernel_values() {
        assert_abs_diff_eq!(log_kernel_circle(cd(0.5)).unwrap(), 2.0 * LN_2, epsilon = 1e-14);
        assert_abs_diff_eq!(log_kernel_circle(cd(0.25)).unwrap(), 3.0 * LN_2, epsilon = 1e-14);
        let a = log_kernel_circle(cd(0.5)).unwrap();
        let b = log_kernel_circle(cd(0.5 - 1e-9)).unwrap();
        assert!((a - b).abs() < 1e-6);
        assert!(matches!(log_kernel_circle(cd(0.0)), Err(Error::Singular)));
    }

    #[test]
    fn fourier_diagonal_is_harmonic_number() {
        for n in [1, 2, 7, 64, 1000] {
            assert_abs_diff_eq!(
                fourier_cov(n, cd(0.0)).unwrap(),
                4.0 * LN_2 + 2.0 * harmonic(n),
                epsilon = 1e-12
            );
        }
        assert_abs_diff_eq!(fourier_cov(1, cd(0.5)).unwrap(), 4.0 * LN_2 - 2.0, epsilon = 1e-14);
        assert!(fourier_cov(0, cd(0.1)).is_err());
    }

    #[test]
    fn fourier_converges_off_diagonal() {
        let limit = log_kernel_circle(cd(0.1)).unwrap();
        let gaps: Vec<f64> = [1u32 << 8, 1 << 10, 1 << 12]
            .iter()
            .map(|&n| (fourier_cov(n, cd(0.1)).unwrap() - limit).abs())
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
        assert!(gaps[2] < 1e-3);
    }

    #[test]
    fn whitenoise_branches_agree_at_branch_point() {
        for t in [0.5, 1.0, 3.0, (64f64).ln(), (4096f64).ln(), 12.0] {
            let xt = whitenoise_branch_point(t);
            let a = PI / 2.0 * (-t).exp();
            let lower = -2.0 * xt * t.exp() + 2.0 * t - 2.0 * (PI / 2.0 * xt).cos().ln()
                + (PI * PI * (-2.0 * t).exp() + 4.0).ln()
                + 2.0 * a.atan() / a
                - 2.0 * PI.ln();
            let upper = log_kernel_circle(cd(xt)).unwrap();
            assert!((lower - upper).abs() < 1e-10, "t={t}: {lower} vs {upper}");
        }
    }

    #[test]
    fn whitenoise_diagonal_constant() {
        // h_{ln n}(0) - 2 ln n → 2 + 2 ln(2/π).
        let limit = 2.0 + 2.0 * (2.0 / PI).ln();
        let mut prev = f64::INFINITY;
        for n in [64.0f64, 1024.0, 65536.0, 1e8] {
            let t = n.ln();
            let gap = (whitenoise_cov(t, cd(0.0)).unwrap() - 2.0 * t - limit).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-12);
    }

    #[test]
    fn whitenoise_matches_limit_beyond_branch_point() {
        let t = 3.0;
        for d in [0.1, 0.2, 0.5] {
            assert_eq!(whitenoise_cov(t, cd(d)).unwrap(), log_kernel_circle(cd(d)).unwrap());
        }
        assert!(whitenoise_cov(0.0, cd(0.1)).is_err());
        assert!(whitenoise_cov(-1.0, cd(0.1)).is_err());
    }

    #[test]
    fn multipliers() {
        for m in [Mollifier::Gaussian, Mollifier::Poisson] {
            assert_eq!(conv_multiplier(m, 0.3, 0), 1.0);
            assert_eq!(conv_multiplier(m, 0.3, 5), conv_multiplier(m, 0.3, -5));
        }
        let n = 37.0;
        for k in 1..50i64 {
            let g = conv_multiplier(Mollifier::Gaussian, 1.0 / n, k);
            assert_abs_diff_eq!(g * g, (-4.0 * PI * PI * (k * k) as f64 / (n * n)).exp(), epsilon = 1e-15);
        }
        let r: f64 = 0.9;
        for k in 0..20i64 {
            assert_abs_diff_eq!(conv_multiplier(Mollifier::Poisson, (1.0 / r).ln(), k), r.powi(k as i32), epsilon = 1e-14);
        }
    }

    #[test]
    fn convolution_gap_to_fourier_within_bound() {
        let bound = 16.0 * PI * PI + 1e-3;
        for n in [1u32, 4, 64, 256] {
            for i in 0..=200 {
                let d = cd(i as f64 / 400.0);
                let gap = (convolution_cov(Mollifier::Gaussian, n, d).unwrap() - fourier_cov(n, d).unwrap()).abs();
                assert!(gap <= bound);
            }
        }
    }

    #[test]
    fn identity_multiplier_reduces_to_fourier() {
        let d = 0.137;
        let n = 50;
        let with_ones = cosine_series(CONSTANT_MODE_VARIANCE, (1..=n).map(|k| 2.0 * 1.0 * 1.0 / k as f64), d);
        assert_eq!(with_ones, fourier_cov(n as u32, cd(d)).unwrap());
    }

    #[test]
    fn grid_series_matches_pointwise() {
        let m = 64;
        let table = cosine_series_on_grid(CONSTANT_MODE_VARIANCE, &fourier_weights(200).collect::<Vec<_>>(), m);
        for (l, v) in table.iter().enumerate().take(m / 2 + 1) {
            let d = cd(l as f64 / m as f64);
            assert_abs_diff_eq!(*v, fourier_cov(200, d).unwrap(), epsilon = 1e-10);
        }
    }
}
