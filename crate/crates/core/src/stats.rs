//! Verification statistics.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::ChaosMeasure;
use crate::error::{Error, Result};
use crate::grid::{DomainKind, GridDomain};
use crate::kernels::{CovarianceSpec, KernelTable, Scheme};
use crate::quad::integrate;
use crate::rng::{Purpose, RngStream};
use crate::samplers::{sampler_for, FactorCache};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("NaN in sample".into()));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let c = -PI * PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=8).map(|k| ((2 * k - 1) as f64).powi(2) * c).map(f64::exp).sum();
        (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=20)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<KsResult> {
    let (x, y) = (sorted(xs)?, sorted(ys)?);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] == v {
            i += 1;
        }
        while j < m && y[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(KsResult { statistic: d, p_value: kolmogorov_survival(lambda) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub order: f64,
    pub estimate: f64,
    /// Jackknife standard error.
    pub stderr: f64,
    pub replicas: usize,
}

pub const MIN_REPLICAS: usize = 100;

/// Sample mean of `x^q` with its jackknife standard error.
pub fn empirical_moment(samples: &[f64], q: f64) -> Result<MomentReport> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if samples.len() < MIN_REPLICAS {
        return Err(Error::InvalidArgument(format!(
            "{} replicas, at least {MIN_REPLICAS} needed",
            samples.len()
        )));
    }
    if !(q >= 0.0) {
        return Err(Error::InvalidArgument(format!("moment order must be ≥ 0, got {q}")));
    }
    if q.fract() != 0.0 {
        if let Some(&x) = samples.iter().find(|&&x| x < 0.0) {
            return Err(Error::NegativeSample(x));
        }
    }
    let ys: Vec<f64> = samples.iter().map(|x| x.powf(q)).collect();
    let n = ys.len() as f64;
    // Shifted sums keep constant samples exact.
    let y0 = ys[0];
    let mean = y0 + ys.iter().map(|y| y - y0).sum::<f64>() / n;
    // Leave-one-out means are `mean + (mean − y_i)/(n − 1)`.
    let ss: f64 = ys.iter().map(|y| ((mean - y) / (n - 1.0)).powi(2)).sum();
    Ok(MomentReport { order: q, estimate: mean, stderr: ((n - 1.0) / n * ss).sqrt(), replicas: ys.len() })
}

/// `∫₀¹ e^{β² K(u)} du` for a translation-invariant circle kernel, i.e. the
/// second moment of the total mass under normalized Lebesgue reference.
///
/// `resolution` is the number of initial panels on `[0, ½]`.
pub fn second_moment_quadrature(beta: f64, scheme: &Scheme, resolution: usize) -> Result<f64> {
    if !matches!(
        scheme,
        Scheme::LimitCircle
            | Scheme::FourierPartial { .. }
            | Scheme::WhiteNoiseCone { .. }
            | Scheme::ConvolutionSpectral { .. }
    ) {
        return Err(Error::InvalidArgument(format!("{} is not translation invariant", scheme.name())));
    }
    let b2 = beta * beta;
    if b2 == 0.0 {
        return Ok(1.0);
    }
    let kernel = |u: f64| scheme.kernel(0.0, u).map(|k| (b2 * k).exp()).unwrap_or(f64::NAN);
    let panels = resolution.max(1);
    let result = if let Scheme::LimitCircle = scheme {
        if b2 >= 0.5 {
            return Err(Error::NonIntegrable(format!("β² = {b2} ≥ 1/2")));
        }
        // u = v^p removes the u^{-2β²} singularity at the origin.
        let p = 1.0 / (1.0 - 2.0 * b2);
        let top = 0.5f64.powf(1.0 / p);
        integrate(|v| kernel(v.powf(p)) * p * v.powf(p - 1.0), 0.0, top, panels, 1e-13, 1e-13)
    } else {
        integrate(kernel, 0.0, 0.5, panels, 1e-13, 1e-13)
    };
    if !result.converged || !result.value.is_finite() {
        return Err(Error::NonIntegrable(format!("quadrature did not converge (error {:e})", result.error)));
    }
    Ok(2.0 * result.value)
}

/// Kantorovich–Rubinstein distance over 1-Lipschitz potentials anchored at
/// `f(x_0) = 0`.
///
/// The supremum equals the optimal transport cost of the signed measure
/// `A − B − (mass gap)·δ_{x_0}`, computed exactly on the interval or circle.
pub fn kr_distance(a: &ChaosMeasure, b: &ChaosMeasure) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let h = a.grid.cell_width();
    let m = a.grid.len();
    let delta: Vec<f64> = a.weights.iter().zip(&b.weights).map(|(x, y)| x - y).collect();
    let gap: f64 = delta.iter().sum();
    // Flux across the edge (x_{i-1}, x_i) for i ≥ 1.
    let mut flux = Vec::with_capacity(m);
    let mut acc = -gap;
    for d in &delta {
        acc += d;
        flux.push(acc);
    }
    match a.grid.kind() {
        DomainKind::Interval => Ok(h * flux[..m - 1].iter().map(|f| f.abs()).sum::<f64>()),
        DomainKind::Circle => {
            let mut sorted = flux.clone();
            sorted.sort_by(f64::total_cmp);
            let c = sorted[m / 2];
            Ok(h * flux.iter().map(|f| (f - c).abs()).sum::<f64>())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub n: u32,
    pub sup_gap: f64,
    /// Sup gap over pairs at distance `> δ`, one per entry of `GapCurve::deltas`.
    pub off_diagonal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCurve {
    pub deltas: Vec<f64>,
    pub rows: Vec<GapRow>,
}

impl GapCurve {
    pub fn column(&self, delta_index: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.off_diagonal[delta_index]).collect()
    }

    pub fn sup_column(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.sup_gap).collect()
    }
}

/// `sup |K_A − K_B|` on the grid for paired truncation levels.
pub fn sup_cov_gap(
    scheme_a: impl Fn(u32) -> Scheme,
    scheme_b: impl Fn(u32) -> Scheme,
    grid: &GridDomain,
    levels: &[u32],
    deltas: &[f64],
) -> Result<GapCurve> {
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidLevel("levels must increase strictly".into()));
    }
    let m = grid.len();
    let mut rows = Vec::with_capacity(levels.len());
    for &n in levels {
        let (sa, sb) = (scheme_a(n), scheme_b(n));
        let (ta, tb) = (KernelTable::new(&sa, grid)?, KernelTable::new(&sb, grid)?);
        let mut sup = 0.0f64;
        let mut off = vec![0.0f64; deltas.len()];
        let mut visit = |i: usize, j: usize| {
            let gap = (ta.get(grid, i, j) - tb.get(grid, i, j)).abs();
            let gap = if gap.is_nan() { 0.0 } else { gap };
            sup = sup.max(gap);
            let d = grid.lag(i, j) as f64 / m as f64;
            for (o, &delta) in off.iter_mut().zip(deltas) {
                if d > delta {
                    *o = o.max(gap);
                }
            }
        };
        if sa.is_stationary() && sb.is_stationary() && grid.kind() == DomainKind::Circle {
            (0..=grid.max_lag()).for_each(|j| visit(0, j));
        } else {
            (0..m).for_each(|i| (0..m).for_each(|j| visit(i, j)));
        }
        rows.push(GapRow { n, sup_gap: sup, off_diagonal: off });
    }
    Ok(GapCurve { deltas: deltas.to_vec(), rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub i: usize,
    pub j: usize,
    pub empirical: f64,
    pub analytic: f64,
    pub stderr: f64,
    /// `|empirical − analytic| / stderr`.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovCheckReport {
    pub probes: Vec<ProbeResult>,
    pub max_normalized: f64,
    pub max_abs: f64,
    pub replicas: usize,
}

/// Empirical `E[X(x_i) X(x_j)]` at probe pairs against the analytic
/// covariance. Replica `r` uses `RngStream::new(seed, r, Purpose::Field)`.
pub fn mc_covariance_check(
    spec: &CovarianceSpec,
    grid: &GridDomain,
    probes: &[(usize, usize)],
    replicas: usize,
    seed: u64,
) -> Result<CovCheckReport> {
    if replicas < 1000 {
        return Err(Error::InvalidArgument(format!("{replicas} replicas, at least 1000 needed")));
    }
    if let Some(&(i, j)) = probes.iter().find(|&&(i, j)| i >= grid.len() || j >= grid.len()) {
        return Err(Error::InvalidArgument(format!("probe ({i}, {j}) outside the grid")));
    }
    let sampler = sampler_for(spec, grid, &FactorCache::new())?;
    let analytic: Vec<f64> = probes
        .iter()
        .map(|&(i, j)| spec.covariance(grid.point(i), grid.point(j)))
        .collect::<Result<_>>()?;
    let ids: Vec<u64> = (0..replicas as u64).collect();
    let partials: Vec<Vec<(f64, f64)>> = ids
        .par_chunks(1000)
        .map(|chunk| {
            let streams: Vec<_> = chunk.iter().map(|&r| RngStream::new(seed, r, Purpose::Field)).collect();
            let fields = sampler.sample_batch(&streams);
            let mut acc = vec![(0.0, 0.0); probes.len()];
            for f in &fields {
                let s = if f.provenance.beta_in_kernel.is_some() { 1.0 } else { spec.beta };
                for (a, &(i, j)) in acc.iter_mut().zip(probes) {
                    let p = s * s * f.values[i] * f.values[j];
                    a.0 += p;
                    a.1 += p * p;
                }
            }
            acc
        })
        .collect();
    let r = replicas as f64;
    let mut results = Vec::with_capacity(probes.len());
    for (k, &(i, j)) in probes.iter().enumerate() {
        let (s1, s2) = partials.iter().fold((0.0, 0.0), |(a, b), p| (a + p[k].0, b + p[k].1));
        let mean = s1 / r;
        let stderr = ((s2 / r - mean * mean).max(0.0) / (r - 1.0)).sqrt();
        let dev = (mean - analytic[k]).abs();
        results.push(ProbeResult { i, j, empirical: mean, analytic: analytic[k], stderr, z: dev / stderr });
    }
    Ok(CovCheckReport {
        max_normalized: results.iter().map(|p| p.z).fold(0.0, f64::max),
        max_abs: results.iter().map(|p| (p.empirical - p.analytic).abs()).fold(0.0, f64::max),
        probes: results,
        replicas,
    })
}

/// Twenty fixed probe pairs spread over lags, including diagonal pairs.
pub fn default_probes(grid: &GridDomain) -> Vec<(usize, usize)> {
    let m = grid.len();
    let lags = [0, 0, 0, 1, 1, 2, 3, 4, 6, 8, 11, 16, 22, 32, 45, 64, 90, 128, 181, 256];
    lags.iter()
        .enumerate()
        .map(|(k, &lag)| {
            let i = (k * 37 + 5) % m;
            (i, (i + lag.min(grid.max_lag())) % m)
        })
        .collect()
}
