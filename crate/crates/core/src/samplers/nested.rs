use faer::Mat;
use rayon::prelude::*;

use super::{FieldSample, Provenance};
use crate::error::{Error, Result};
use crate::grid::GridDomain;
use crate::kernels::{factorize, CovarianceSpec, KernelTable, Scheme};
use crate::rng::{fill_normal, RngStream};

/// White-noise fields at increasing cone heights, drawn jointly.
///
/// `X_{t_ℓ}` is the sum of independent increments with covariance
/// `β² (h_{t_ℓ} − h_{t_{ℓ−1}})`, which gives `Cov(X_s(x), X_t(y)) = β² h_{min(s,t)}(x − y)`.
#[derive(Debug, Clone)]
pub struct NestedWhiteNoise {
    grid: GridDomain,
    beta: f64,
    levels: Vec<f64>,
    factors: Vec<Mat<f64>>,
    jitters: Vec<f64>,
    variances: Vec<std::sync::Arc<[f64]>>,
}

impl NestedWhiteNoise {
    pub fn new(levels: &[f64], beta: f64, grid: &GridDomain) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidLevel("no levels".into()));
        }
        if levels.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidLevel("levels must increase strictly".into()));
        }
        let m = grid.len();
        let mut prev: Option<KernelTable> = None;
        let (mut factors, mut jitters, mut variances) = (vec![], vec![], vec![]);
        for &t in levels {
            let spec = CovarianceSpec::new(Scheme::WhiteNoiseCone { t }, beta)?;
            let table = KernelTable::new(&spec.scheme, grid)?;
            let b2 = beta * beta;
            let inc = Mat::from_fn(m, m, |i, j| {
                let lower = prev.as_ref().map_or(0.0, |p| p.get(grid, i, j));
                b2 * (table.get(grid, i, j) - lower)
            });
            let (l, jitter) = factorize(&inc)?;
            factors.push(l);
            jitters.push(jitter);
            variances.push((0..m).map(|i| b2 * table.get(grid, i, i)).collect::<Vec<_>>().into());
            prev = Some(table);
        }
        Ok(Self { grid: *grid, beta, levels: levels.to_vec(), factors, jitters, variances })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    fn wrap(&self, idx: usize, values: Vec<f64>, stream: RngStream) -> FieldSample {
        FieldSample {
            grid: self.grid,
            values,
            variance: self.variances[idx].clone(),
            scheme: Some(Scheme::WhiteNoiseCone { t: self.levels[idx] }),
            provenance: Provenance {
                stream: Some(stream),
                jitter: self.jitters[idx],
                beta_in_kernel: Some(self.beta),
            },
        }
    }

    /// Paths for many streams; same values as `sample`, up to rounding.
    pub fn sample_batch(&self, streams: &[RngStream]) -> Vec<Vec<FieldSample>> {
        let m = self.grid.len();
        let depth = self.levels.len();
        streams
            .par_chunks(256)
            .flat_map_iter(|chunk| {
                let normals: Vec<Vec<f64>> = chunk
                    .iter()
                    .map(|s| {
                        let mut z = vec![0.0; m * depth];
                        fill_normal(&mut s.rng(), &mut z);
                        z
                    })
                    .collect();
                let mut acc = Mat::<f64>::zeros(m, chunk.len());
                let mut paths: Vec<Vec<FieldSample>> = vec![Vec::with_capacity(depth); chunk.len()];
                for idx in 0..depth {
                    let z = Mat::from_fn(m, chunk.len(), |i, r| normals[r][idx * m + i]);
                    acc += &self.factors[idx] * &z;
                    for (r, path) in paths.iter_mut().enumerate() {
                        path.push(self.wrap(idx, (0..m).map(|i| acc[(i, r)]).collect(), chunk[r]));
                    }
                }
                paths
            })
            .collect()
    }

    /// One coupled path, one field per level.
    pub fn sample(&self, stream: RngStream) -> Vec<FieldSample> {
        let m = self.grid.len();
        let mut rng = stream.rng();
        let mut acc = vec![0.0; m];
        let mut z = vec![0.0; m];
        let mut out = Vec::with_capacity(self.levels.len());
        for idx in 0..self.levels.len() {
            fill_normal(&mut rng, &mut z);
            let l = &self.factors[idx];
            for (i, a) in acc.iter_mut().enumerate() {
                *a += (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>();
            }
            out.push(self.wrap(idx, acc.clone(), stream));
        }
        out
    }
}

/// Coupled white-noise fields at `levels` (cone heights `t`).
pub fn sample_nested_whitenoise(
    levels: &[f64],
    beta: f64,
    grid: &GridDomain,
    stream: RngStream,
) -> Result<Vec<FieldSample>> {
    Ok(NestedWhiteNoise::new(levels, beta, grid)?.sample(stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Purpose;
    use crate::samplers::sample_cholesky_field;

    #[test]
    fn single_level_is_the_cholesky_draw() {
        let g = GridDomain::circle(32).unwrap();
        let s = RngStream::new(4, 1, Purpose::Field);
        let nested = sample_nested_whitenoise(&[2.0], 1.0, &g, s).unwrap();
        let spec = CovarianceSpec::new(Scheme::WhiteNoiseCone { t: 2.0 }, 1.0).unwrap();
        let direct = sample_cholesky_field(&spec, &g, s).unwrap();
        assert_eq!(nested[0].values, direct.values);
    }

    #[test]
    fn batch_matches_single_paths() {
        let g = GridDomain::circle(32).unwrap();
        let nested = NestedWhiteNoise::new(&[1.0, 2.0, 3.0], 0.7, &g).unwrap();
        let streams: Vec<_> = (0..4).map(|r| RngStream::new(6, r, Purpose::Field)).collect();
        let batch = nested.sample_batch(&streams);
        for (s, path) in streams.iter().zip(&batch) {
            for (a, b) in nested.sample(*s).iter().zip(path) {
                for (x, y) in a.values.iter().zip(&b.values) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_unsorted_levels() {
        let g = GridDomain::circle(16).unwrap();
        assert!(NestedWhiteNoise::new(&[2.0, 1.0], 1.0, &g).is_err());
        assert!(NestedWhiteNoise::new(&[], 1.0, &g).is_err());
    }
}
