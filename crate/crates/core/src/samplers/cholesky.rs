use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use faer::Mat;
use rayon::prelude::*;

use super::{FieldSample, FieldSampler, Provenance};
use crate::error::Result;
use crate::grid::GridDomain;
use crate::kernels::{build_cov_matrix, CovMatrix, CovarianceSpec, Scheme};
use crate::rng::{fill_normal, RngStream};

/// Columns per dense block in batched draws.
const BATCH_BLOCK: usize = 1024;

/// Factorized covariance matrices shared between threads.
#[derive(Debug, Default)]
pub struct FactorCache {
    map: RwLock<HashMap<String, Arc<CovMatrix>>>,
}

impl FactorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_build(&self, spec: &CovarianceSpec, grid: &GridDomain) -> Result<Arc<CovMatrix>> {
        let key = format!("{spec:?}|{grid:?}");
        if let Some(hit) = self.map.read().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let built = Arc::new(build_cov_matrix(spec, grid)?);
        let mut map = self.map.write().expect("cache lock");
        Ok(map.entry(key).or_insert(built).clone())
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `X = L Z` with `L L^T = β² K + jitter·I`.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    spec: CovarianceSpec,
    grid: GridDomain,
    cov: Arc<CovMatrix>,
    variance: Arc<[f64]>,
}

impl CholeskySampler {
    pub fn new(spec: &CovarianceSpec, grid: &GridDomain) -> Result<Self> {
        Ok(Self::from_matrix(spec, grid, Arc::new(build_cov_matrix(spec, grid)?)))
    }

    pub fn with_cache(spec: &CovarianceSpec, grid: &GridDomain, cache: &FactorCache) -> Result<Self> {
        Ok(Self::from_matrix(spec, grid, cache.get_or_build(spec, grid)?))
    }

    fn from_matrix(spec: &CovarianceSpec, grid: &GridDomain, cov: Arc<CovMatrix>) -> Self {
        let variance = cov.diagonal().into();
        Self { spec: *spec, grid: *grid, cov, variance }
    }

    pub fn covariance(&self) -> &CovMatrix {
        &self.cov
    }

    pub fn spec(&self) -> &CovarianceSpec {
        &self.spec
    }

    fn wrap(&self, values: Vec<f64>, stream: RngStream) -> FieldSample {
        FieldSample {
            grid: self.grid,
            values,
            variance: self.variance.clone(),
            scheme: Some(self.spec.scheme),
            provenance: Provenance {
                stream: Some(stream),
                jitter: self.cov.jitter(),
                beta_in_kernel: Some(self.spec.beta),
            },
        }
    }
}

impl FieldSampler for CholeskySampler {
    fn grid(&self) -> &GridDomain {
        &self.grid
    }

    fn scheme(&self) -> Scheme {
        self.spec.scheme
    }

    fn sample(&self, stream: RngStream) -> FieldSample {
        let m = self.grid.len();
        let mut z = vec![0.0; m];
        fill_normal(&mut stream.rng(), &mut z);
        let l = self.cov.factor();
        let values = (0..m).map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum()).collect();
        self.wrap(values, stream)
    }

    /// Same values as repeated `sample`, computed block-wise with dense products.
    fn sample_batch(&self, streams: &[RngStream]) -> Vec<FieldSample> {
        let m = self.grid.len();
        let l = self.cov.factor();
        streams
            .par_chunks(BATCH_BLOCK)
            .flat_map_iter(|chunk| {
                let cols: Vec<Vec<f64>> = chunk
                    .iter()
                    .map(|s| {
                        let mut z = vec![0.0; m];
                        fill_normal(&mut s.rng(), &mut z);
                        z
                    })
                    .collect();
                let z = Mat::from_fn(m, chunk.len(), |i, r| cols[r][i]);
                let y = l * &z;
                chunk
                    .iter()
                    .enumerate()
                    .map(|(r, &s)| self.wrap((0..m).map(|i| y[(i, r)]).collect(), s))
                    .collect::<Vec<_>>()
            })
            .collect()
    }
}

/// One draw from `N(0, β² K)` on the grid.
pub fn sample_cholesky_field(spec: &CovarianceSpec, grid: &GridDomain, stream: RngStream) -> Result<FieldSample> {
    Ok(CholeskySampler::new(spec, grid)?.sample(stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Purpose;

    fn spec(t: f64, beta: f64) -> CovarianceSpec {
        CovarianceSpec::new(Scheme::WhiteNoiseCone { t }, beta).unwrap()
    }

    #[test]
    fn batch_matches_single_draws() {
        let g = GridDomain::circle(32).unwrap();
        let sampler = CholeskySampler::new(&spec(2.0, 1.0), &g).unwrap();
        let streams: Vec<_> = (0..5).map(|r| RngStream::new(11, r, Purpose::Field)).collect();
        let batch = sampler.sample_batch(&streams);
        for (s, b) in streams.iter().zip(&batch) {
            let single = sampler.sample(*s);
            for (x, y) in single.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn beta_scales_the_field() {
        let g = GridDomain::circle(32).unwrap();
        let s = RngStream::new(2, 0, Purpose::Field);
        let full = sample_cholesky_field(&spec(2.0, 1.0), &g, s).unwrap();
        let half = sample_cholesky_field(&spec(2.0, 0.5), &g, s).unwrap();
        for (a, b) in full.values.iter().zip(&half.values) {
            assert!((a - 2.0 * b).abs() < 1e-10 * (1.0 + a.abs()));
        }
        assert_eq!(half.provenance.beta_in_kernel, Some(0.5));
    }

    #[test]
    fn cache_shares_factorizations() {
        let g = GridDomain::circle(16).unwrap();
        let cache = FactorCache::new();
        let a = cache.get_or_build(&spec(1.0, 1.0), &g).unwrap();
        let b = cache.get_or_build(&spec(1.0, 1.0), &g).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        cache.get_or_build(&spec(1.5, 1.0), &g).unwrap();
        assert_eq!(cache.len(), 2);
    }
}
