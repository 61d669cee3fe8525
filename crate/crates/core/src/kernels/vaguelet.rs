//! Haar vaguelets: half-integrals of the periodized Haar wavelets.
//!
//! With the Fourier convention `f̂(ξ) = ∫ f(x) e^{-2πiξx} dx`, the vaguelet
//! coefficients are `ν̂_{j,k}(n) = ψ̂_{j,k}(n) / √(2π|n|)` and `ν̂(0) = 0`.
//! Under this convention `2π Σ_{j,k} ν_{j,k}(x) ν_{j,k}(y)` sums to
//! `2 ln(1/(2|sin π(x−y)|))`, so the field needs no extra constants.
//!
//! The Fourier series of a vaguelet converges like `|n|^{-1/2}`, far too
//! slowly for synthesis. Values are instead computed in real space: the
//! half-integral of the Haar profile has the closed form
//! `ν(u) = (Φ(u) − 2Φ(u−½) + Φ(u−1)) / √(2π)` with `Φ(u) = 2 sgn(u) √|u|`,
//! and the periodization `Σ_l ν(2^j(x−l))` is summed explicitly for
//! `|l| ≤ 64` with an Euler–Maclaurin tail.

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

const PERIOD_TERMS: i64 = 64;

fn inv_sqrt_2pi() -> f64 {
    1.0 / (2.0 * PI).sqrt()
}

fn phi(u: f64) -> f64 {
    2.0 * u.signum() * u.abs().sqrt()
}

fn phi_antiderivative(u: f64) -> f64 {
    4.0 / 3.0 * u.abs().powf(1.5)
}

fn abs_rsqrt(u: f64) -> f64 {
    1.0 / u.abs().sqrt()
}

/// Half-integral of the Haar wavelet on the whole line.
pub fn haar_vaguelet_line(u: f64) -> f64 {
    inv_sqrt_2pi() * (phi(u) - 2.0 * phi(u - 0.5) + phi(u - 1.0))
}

/// `∫_{-∞}^{u} ν`.
fn line_cumulative(u: f64) -> f64 {
    inv_sqrt_2pi()
        * (phi_antiderivative(u) - 2.0 * phi_antiderivative(u - 0.5) + phi_antiderivative(u - 1.0))
}

fn line_derivative(u: f64) -> f64 {
    inv_sqrt_2pi() * (abs_rsqrt(u) - 2.0 * abs_rsqrt(u - 0.5) + abs_rsqrt(u - 1.0))
}

/// Periodized vaguelet `ν_{j,0}(x) = Σ_l ν(2^j (x − l))`.
pub fn periodized_vaguelet(j: u32, x: f64) -> f64 {
    let s = (1u64 << j) as f64;
    let x = x.rem_euclid(1.0);
    let mut sum = 0.0;
    for l in -PERIOD_TERMS..=PERIOD_TERMS {
        sum += haar_vaguelet_line(s * (x - l as f64));
    }
    let edge = PERIOD_TERMS as f64 + 0.5;
    let (lo, hi) = (s * (x - edge), s * (x + edge));
    // Midpoint Euler–Maclaurin for l > L and l < -L.
    sum += line_cumulative(lo) / s - s / 24.0 * line_derivative(lo);
    sum += -line_cumulative(hi) / s + s / 24.0 * line_derivative(hi);
    sum
}

/// Continuous Fourier transform of the Haar wavelet,
/// `ψ̂(ξ) = i e^{-iπξ} sin²(πξ/2) / (πξ/2)`.
pub fn haar_transform(xi: f64) -> Complex64 {
    if xi == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let h = PI * xi / 2.0;
    Complex64::i() * Complex64::from_polar(1.0, -PI * xi) * (h.sin().powi(2) / h)
}

/// Fourier coefficient of the periodized vaguelet `ν_{j,k}` at `freq`.
pub fn haar_vaguelet_coeff(j: u32, k: u64, freq: i64) -> Result<Complex64> {
    let scale = (1u64 << j) as f64;
    if k >= 1u64 << j {
        return Err(Error::InvalidArgument(format!("shift {k} out of range for level {j}")));
    }
    if freq == 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let f = freq as f64;
    let wavelet = haar_transform(f / scale) * scale.powf(-0.5) * Complex64::from_polar(1.0, -2.0 * PI * f * k as f64 / scale);
    Ok(wavelet / (2.0 * PI * f.abs()).sqrt())
}

/// Covariance of the vaguelet field of level `n` at arbitrary points:
/// `4 ln 2 + 2π Σ_{j≤n} Σ_k ν_{j,k}(x) ν_{j,k}(y)`.
pub fn vaguelet_cov(n: u32, x: f64, y: f64) -> f64 {
    let mut acc = 0.0;
    for j in 0..=n {
        let s = (1u64 << j) as f64;
        for k in 0..1u64 << j {
            let shift = k as f64 / s;
            acc += periodized_vaguelet(j, x - shift) * periodized_vaguelet(j, y - shift);
        }
    }
    4.0 * LN_2 + 2.0 * PI * acc
}

/// Tabulated vaguelets of levels `0..=n` on an `m`-point circle grid.
///
/// Level `j` is stored at resolution `R_j = max(m, 2^j)`, so every shift
/// `k 2^{-j}` and every grid point lands on a table node.
#[derive(Debug, Clone)]
pub struct VaguletBasis {
    m: usize,
    levels: Vec<Vec<f64>>,
}

impl VaguletBasis {
    pub fn new(n: u32, m: usize) -> Result<Self> {
        if !m.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("vaguelet tables need a power-of-two grid, got {m}")));
        }
        if n > 24 {
            return Err(Error::InvalidLevel(format!("vaguelet level {n} too large")));
        }
        let levels = (0..=n)
            .map(|j| {
                let r = m.max(1 << j);
                (0..r).map(|u| periodized_vaguelet(j, u as f64 / r as f64)).collect()
            })
            .collect();
        Ok(Self { m, levels })
    }

    pub fn level(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn grid_len(&self) -> usize {
        self.m
    }

    /// Table of `ν_{j,0}` at resolution `R_j`.
    pub fn table(&self, j: u32) -> &[f64] {
        &self.levels[j as usize]
    }

    /// `ν_{j,k}(x_i)` for grid point `i`.
    pub fn value(&self, j: u32, k: usize, i: usize) -> f64 {
        let t = &self.levels[j as usize];
        let r = t.len();
        let pos = (i * (r / self.m)) as isize - (k * (r >> j)) as isize;
        t[pos.rem_euclid(r as isize) as usize]
    }

    /// Full `m × m` covariance of the level-`n` field on the grid, row-major.
    pub fn covariance_matrix(&self) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![4.0 * LN_2; m * m];
        for j in 0..=self.level() {
            let t = &self.levels[j as usize];
            let r = t.len();
            if r > m {
                // One shift per table node: the level is translation invariant
                // on its own table, so its contribution is an autocorrelation.
                let ac = circular_autocorrelation(t);
                let step = r / m;
                for a in 0..m {
                    for b in 0..m {
                        let lag = ((a as isize - b as isize) * step as isize).rem_euclid(r as isize) as usize;
                        out[a * m + b] += 2.0 * PI * ac[lag];
                    }
                }
            } else {
                let q = m >> j;
                let count = 1usize << j;
                // Shifts by q grid points permute the translates, so row a is
                // row (a mod q) rotated by a - a mod q.
                for r0 in 0..q {
                    let mut row = vec![0.0; m];
                    for (b, slot) in row.iter_mut().enumerate() {
                        let mut s = 0.0;
                        for k in 0..count {
                            s += self.value(j, k, r0) * self.value(j, k, b);
                        }
                        *slot = s;
                    }
                    for a in (r0..m).step_by(q) {
                        let rot = a - r0;
                        for b in 0..m {
                            out[a * m + b] += 2.0 * PI * row[(b + m - rot) % m];
                        }
                    }
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                let v = 0.5 * (out[a * m + b] + out[b * m + a]);
                out[a * m + b] = v;
                out[b * m + a] = v;
            }
        }
        out
    }

    /// Variance of the level-`n` field at every grid point.
    pub fn variance_profile(&self) -> Vec<f64> {
        (0..self.m)
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..=self.level() {
                    for k in 0..1usize << j {
                        let v = self.value(j, k, i);
                        acc += v * v;
                    }
                }
                4.0 * LN_2 + 2.0 * PI * acc
            })
            .collect()
    }

    /// Per-level forward DFTs of the tables, for spectral synthesis.
    pub(crate) fn spectra(&self) -> Vec<Arc<Vec<Complex64>>> {
        let mut planner = FftPlanner::new();
        self.levels
            .iter()
            .map(|t| {
                let mut buf: Vec<Complex64> = t.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                planner.plan_fft_forward(buf.len()).process(&mut buf);
                Arc::new(buf)
            })
            .collect()
    }
}

fn circular_autocorrelation(t: &[f64]) -> Vec<f64> {
    let r = t.len();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = t.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(r).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(r).process(&mut buf);
    buf.iter().map(|z| z.re / r as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CircleDistance;
    use crate::kernels::circle::log_kernel_circle;
    use crate::quad::integrate;

    fn haar(x: f64) -> f64 {
        if (0.0..0.5).contains(&x) {
            1.0
        } else if (0.5..1.0).contains(&x) {
            -1.0
        } else {
            0.0
        }
    }

    #[test]
    fn haar_transform_matches_quadrature() {
        for freq in [1.0, 2.0, 3.0, 5.0, -4.0, 0.37] {
            let re = integrate(|x| haar(x) * (2.0 * PI * freq * x).cos(), 0.0, 1.0, 2, 1e-13, 0.0).value;
            let im = -integrate(|x| haar(x) * (2.0 * PI * freq * x).sin(), 0.0, 1.0, 2, 1e-13, 0.0).value;
            let z = haar_transform(freq);
            assert!((z.re - re).abs() < 1e-11 && (z.im - im).abs() < 1e-11, "ξ={freq}: {z} vs {re}+{im}i");
        }
    }

    #[test]
    fn zero_frequency_and_shift_modulus() {
        assert_eq!(haar_vaguelet_coeff(3, 2, 0).unwrap(), Complex64::new(0.0, 0.0));
        for f in [1, 3, 7, 20, -9] {
            let base = haar_vaguelet_coeff(3, 0, f).unwrap().norm();
            for k in 1..8 {
                assert!((haar_vaguelet_coeff(3, k, f).unwrap().norm() - base).abs() < 1e-15);
            }
        }
        assert!(haar_vaguelet_coeff(2, 4, 1).is_err());
    }

    #[test]
    fn real_space_synthesis_has_the_spectral_coefficients() {
        // The Fourier coefficients of the real-space vaguelet, computed by
        // quadrature between its cusps, must equal ψ̂_{j,k}(n)/√(2π|n|).
        for j in [0u32, 2, 5] {
            let s = (1u64 << j) as f64;
            let cusps = [0.0, 0.5 / s, 1.0 / s, 1.0];
            for freq in [1i64, 2, 3, 10, 33] {
                let (mut re, mut im) = (0.0, 0.0);
                for w in cusps.windows(2) {
                    let f = freq as f64;
                    re += integrate(|x| periodized_vaguelet(j, x) * (2.0 * PI * f * x).cos(), w[0], w[1], 8, 1e-12, 0.0).value;
                    im -= integrate(|x| periodized_vaguelet(j, x) * (2.0 * PI * f * x).sin(), w[0], w[1], 8, 1e-12, 0.0).value;
                }
                let z = haar_vaguelet_coeff(j, 0, freq).unwrap();
                assert!((z.re - re).abs() < 1e-8 && (z.im - im).abs() < 1e-8, "j={j} n={freq}: {z} vs {re}+{im}i");
            }
            let mean = integrate(|x| periodized_vaguelet(j, x), 0.0, 1.0, 64, 1e-12, 0.0).value;
            assert!(mean.abs() < 1e-8, "zero mode {mean}");
        }
    }

    #[test]
    fn covariance_is_symmetric_and_converges_off_diagonal() {
        let (x, y) = (0.23, 0.33);
        assert_eq!(vaguelet_cov(4, x, y), vaguelet_cov(4, y, x));
        let limit = log_kernel_circle(CircleDistance::between(x, y)).unwrap();
        let gaps: Vec<f64> = [6u32, 8, 10].iter().map(|&n| (vaguelet_cov(n, x, y) - limit).abs()).collect();
        assert!(gaps[0] > gaps[2], "{gaps:?}");
        assert!(gaps[2] < 0.02, "{gaps:?}");
    }

    #[test]
    fn basis_tables_agree_with_pointwise() {
        let basis = VaguletBasis::new(5, 32).unwrap();
        for j in 0..=5 {
            for k in [0usize, 1, (1 << j) - 1] {
                for i in [0usize, 3, 17, 31] {
                    let x = i as f64 / 32.0 - k as f64 / (1u64 << j) as f64;
                    assert!((basis.value(j, k, i) - periodized_vaguelet(j, x)).abs() < 1e-12);
                }
            }
        }
        let cov = basis.covariance_matrix();
        let var = basis.variance_profile();
        for a in [0usize, 5, 31] {
            assert!((cov[a * 32 + a] - var[a]).abs() < 1e-10);
            for b in [1usize, 7, 20] {
                let direct = vaguelet_cov(5, a as f64 / 32.0, b as f64 / 32.0);
                assert!((cov[a * 32 + b] - direct).abs() < 1e-9, "{a},{b}");
                assert!((cov[a * 32 + b] - cov[b * 32 + a]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn fine_levels_beyond_grid_resolution() {
        let basis = VaguletBasis::new(4, 8).unwrap();
        let cov = basis.covariance_matrix();
        for a in 0..8 {
            for b in 0..8 {
                let direct = vaguelet_cov(4, a as f64 / 8.0, b as f64 / 8.0);
                assert!((cov[a * 8 + b] - direct).abs() < 1e-9);
            }
        }
    }
}
