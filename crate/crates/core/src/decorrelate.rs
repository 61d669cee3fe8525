//! The compactly decorrelated auxiliary field `Z_ε` and a Monte Carlo
//! check of Kahane's convexity inequality.

use std::sync::Arc;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DomainKind, GridDomain};
use crate::kernels::CovMatrix;
use crate::rng::{fill_normal, RngStream};
use crate::samplers::{FieldSample, Provenance};

/// Lipschitz partition of unity subordinate to `ε`-balls around an
/// `ε/2`-separated maximal set of grid points.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    eps: f64,
    grid: GridDomain,
    centers: Vec<usize>,
    /// `parts[c][i] = p_c(x_i)`.
    parts: Vec<Vec<f64>>,
}

impl PartitionOfUnity {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn grid(&self) -> &GridDomain {
        &self.grid
    }

    /// Grid indices of the centers.
    pub fn centers(&self) -> &[usize] {
        &self.centers
    }

    pub fn part(&self, c: usize) -> &[f64] {
        &self.parts[c]
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

fn tent(eps: f64, d: f64) -> f64 {
    (2.0 * (eps - d) / eps).clamp(0.0, 1.0)
}

pub fn build_partition(eps: f64, grid: &GridDomain) -> Result<PartitionOfUnity> {
    if grid.kind() != DomainKind::Circle {
        return Err(Error::InvalidGrid("the partition lives on the circle".into()));
    }
    let m = grid.len();
    if !(eps >= 2.0 / m as f64) || eps > 0.5 {
        return Err(Error::InvalidArgument(format!("ε = {eps} not in [2/m, 1/2] for m = {m}")));
    }
    let dist = |i: usize, j: usize| grid.lag(i, j) as f64 / m as f64;
    let sep = 0.5 * eps - 1e-12;
    let mut centers: Vec<usize> = Vec::new();
    for i in 0..m {
        if centers.iter().all(|&c| dist(i, c) >= sep) {
            centers.push(i);
        }
    }
    let mut parts: Vec<Vec<f64>> =
        centers.iter().map(|&c| (0..m).map(|i| tent(eps, dist(i, c))).collect()).collect();
    for i in 0..m {
        let total: f64 = parts.iter().map(|p| p[i]).sum();
        for p in parts.iter_mut() {
            p[i] /= total;
        }
    }
    Ok(PartitionOfUnity { eps, grid: *grid, centers, parts })
}

/// `C_ε(x_i, x_j) = Σ_c √(p_c(x_i) p_c(x_j))`.
pub fn zeps_cov(part: &PartitionOfUnity, i: usize, j: usize) -> f64 {
    part.parts.iter().map(|p| (p[i] * p[j]).sqrt()).sum()
}

/// `Z_ε = Σ_c A_c √p_c` with `A_c` standard normal.
pub fn sample_zeps(part: &PartitionOfUnity, stream: RngStream) -> FieldSample {
    let m = part.grid.len();
    let mut a = vec![0.0; part.len()];
    fill_normal(&mut stream.rng(), &mut a);
    let mut values = vec![0.0; m];
    for (ac, p) in a.iter().zip(&part.parts) {
        for (v, pc) in values.iter_mut().zip(p) {
            *v += ac * pc.sqrt();
        }
    }
    let variance: Arc<[f64]> = (0..m).map(|i| part.parts.iter().map(|p| p[i]).sum()).collect::<Vec<_>>().into();
    FieldSample {
        grid: part.grid,
        values,
        variance,
        scheme: None,
        provenance: Provenance { stream: Some(stream), jitter: 0.0, beta_in_kernel: None },
    }
}

/// Concave, nonnegative test functions for the convexity inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Concave {
    Sqrt,
    Log1p,
    Min1,
}

impl Concave {
    pub const ALL: [Concave; 3] = [Concave::Sqrt, Concave::Log1p, Concave::Min1];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Concave::Sqrt => x.sqrt(),
            Concave::Log1p => x.ln_1p(),
            Concave::Min1 => x.min(1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Concave::Sqrt => "sqrt",
            Concave::Log1p => "log1p",
            Concave::Min1 => "min1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KahaneGap {
    /// `Ê f(M_A) − Ê f(M_B)`.
    pub delta: f64,
    pub stderr: f64,
    pub replicas: usize,
}

/// Normalized-Lebesgue masses `(1/m) Σ_i exp(X_i − K_ii/2)` of the chaos of
/// `X ~ N(0, K)` for both covariances, driven by common normals.
///
/// Replica `r` uses `stream.with_replica(r)` for both fields, so the estimate
/// of `Δ` is a paired difference.
pub fn paired_masses(a: &CovMatrix, b: &CovMatrix, replicas: usize, stream: RngStream) -> Result<Vec<(f64, f64)>> {
    if a.dim() != b.dim() {
        return Err(Error::LengthMismatch { expected: a.dim(), got: b.dim() });
    }
    let m = a.dim();
    let (va, vb) = (a.diagonal(), b.diagonal());
    let ids: Vec<u64> = (0..replicas as u64).collect();
    let masses = ids
        .par_chunks(512)
        .flat_map_iter(|chunk| {
            let cols: Vec<Vec<f64>> = chunk
                .iter()
                .map(|&r| {
                    let mut z = vec![0.0; m];
                    fill_normal(&mut stream.with_replica(r).rng(), &mut z);
                    z
                })
                .collect();
            let z = Mat::from_fn(m, chunk.len(), |i, r| cols[r][i]);
            let (xa, xb) = (a.factor() * &z, b.factor() * &z);
            (0..chunk.len())
                .map(|r| {
                    let mass = |x: &Mat<f64>, v: &[f64]| (0..m).map(|i| (x[(i, r)] - 0.5 * v[i]).exp()).sum::<f64>() / m as f64;
                    (mass(&xa, &va), mass(&xb, &vb))
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(masses)
}

/// Paired Monte Carlo estimate of `E f(M_A) − E f(M_B)`. When `K_A ≥ K_B`
/// pointwise, the convexity inequality predicts `Δ ≤ 0`.
pub fn kahane_gap(f: Concave, a: &CovMatrix, b: &CovMatrix, replicas: usize, stream: RngStream) -> Result<KahaneGap> {
    if replicas < 2 {
        return Err(Error::EmptySample);
    }
    let masses = paired_masses(a, b, replicas, stream)?;
    Ok(gap_from_masses(f, &masses))
}

/// `Δ` and its standard error from paired masses.
pub fn gap_from_masses(f: Concave, masses: &[(f64, f64)]) -> KahaneGap {
    let diffs: Vec<f64> = masses.iter().map(|&(ma, mb)| f.apply(ma) - f.apply(mb)).collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    KahaneGap { delta: mean, stderr: (var / n).sqrt(), replicas: diffs.len() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_eps_gives_eight_centers() {
        let g = GridDomain::circle(256).unwrap();
        let p = build_partition(0.25, &g).unwrap();
        assert_eq!(p.centers(), &[0, 32, 64, 96, 128, 160, 192, 224]);
    }

    #[test]
    fn partition_properties() {
        for (m, eps) in [(64usize, 1.0 / 8.0), (100, 0.07), (256, 1.0 / 32.0), (32, 1.0 / 16.0)] {
            let g = GridDomain::circle(m).unwrap();
            let p = build_partition(eps, &g).unwrap();
            for i in 0..m {
                let s: f64 = (0..p.len()).map(|c| p.part(c)[i]).sum();
                assert!((s - 1.0).abs() < 1e-12);
                assert!((zeps_cov(&p, i, i) - 1.0).abs() < 1e-12);
                for (c, &a) in p.centers().iter().enumerate() {
                    if g.lag(i, a) as f64 / m as f64 >= eps {
                        assert_eq!(p.part(c)[i], 0.0);
                    }
                }
                for j in 0..m {
                    let v = zeps_cov(&p, i, j);
                    assert!((-1e-15..=1.0 + 1e-12).contains(&v));
                    if g.lag(i, j) as f64 / m as f64 >= 2.0 * eps {
                        assert_eq!(v, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_unresolvable_eps() {
        let g = GridDomain::circle(64).unwrap();
        assert!(build_partition(1.0 / 64.0, &g).is_err());
        assert!(build_partition(2.0 / 64.0, &g).is_ok());
        assert!(build_partition(0.1, &GridDomain::interval(64).unwrap()).is_err());
    }

    #[test]
    fn concave_menu() {
        assert_eq!(Concave::Sqrt.apply(4.0), 2.0);
        assert_eq!(Concave::Min1.apply(3.0), 1.0);
        assert_eq!(Concave::Min1.apply(0.25), 0.25);
        assert!((Concave::Log1p.apply(1.0) - std::f64::consts::LN_2).abs() < 1e-15);
    }
}
