//! Discrete chaos measures `e^{βX − β²E[X²]/2} dρ` on the grid cells.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridDomain;
use crate::samplers::{FieldSample, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormalizationKind {
    Lebesgue,
    SqrtLogN,
    SqrtNLog2,
    SqrtT,
}

/// Reference measure `dρ = factor · dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRule {
    pub kind: NormalizationKind,
    /// Level `n` or cone height `t`; ignored for `Lebesgue`.
    pub parameter: f64,
}

impl NormalizationRule {
    pub fn lebesgue() -> Self {
        Self { kind: NormalizationKind::Lebesgue, parameter: 0.0 }
    }

    pub fn sqrt_log_n(n: f64) -> Self {
        Self { kind: NormalizationKind::SqrtLogN, parameter: n }
    }

    pub fn sqrt_n_log2(n: f64) -> Self {
        Self { kind: NormalizationKind::SqrtNLog2, parameter: n }
    }

    pub fn sqrt_t(t: f64) -> Self {
        Self { kind: NormalizationKind::SqrtT, parameter: t }
    }
}

pub fn normalization_factor(rule: NormalizationRule) -> Result<f64> {
    let p = rule.parameter;
    let bad = |what: &str| Err(Error::InvalidArgument(format!("{what}, got {p}")));
    match rule.kind {
        NormalizationKind::Lebesgue => Ok(1.0),
        NormalizationKind::SqrtLogN if p > 1.0 => Ok(p.ln().sqrt()),
        NormalizationKind::SqrtLogN => bad("√(ln n) needs n > 1"),
        NormalizationKind::SqrtNLog2 if p > 0.0 => Ok((p * std::f64::consts::LN_2).sqrt()),
        NormalizationKind::SqrtNLog2 => bad("√(n ln 2) needs n > 0"),
        NormalizationKind::SqrtT if p > 0.0 => Ok(p.sqrt()),
        NormalizationKind::SqrtT => bad("√t needs t > 0"),
    }
}

/// Cell masses of a chaos measure; cell `i` is `[x_i, x_i + 1/m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosMeasure {
    pub grid: GridDomain,
    pub weights: Vec<f64>,
    pub beta: f64,
    pub rule: NormalizationRule,
    pub provenance: Provenance,
}

impl ChaosMeasure {
    /// A deterministic measure, e.g. for transport computations.
    pub fn from_weights(grid: GridDomain, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: weights.len() });
        }
        if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidArgument(format!("weights must be finite and nonnegative, got {w}")));
        }
        Ok(Self {
            grid,
            weights,
            beta: 0.0,
            rule: NormalizationRule::lebesgue(),
            provenance: Provenance { stream: None, jitter: 0.0, beta_in_kernel: None },
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// `weights[i] = factor · (1/m) · exp(β X_i − β² Var X_i / 2)`.
///
/// For fields whose covariance already contains `β²` (the Cholesky samplers),
/// pass `β = 1` or the same `β`; the exponent is then not rescaled.
pub fn build_measure(field: &FieldSample, beta: f64, rule: NormalizationRule) -> Result<ChaosMeasure> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidBeta(beta));
    }
    if field.variance.len() != field.values.len() {
        return Err(Error::LengthMismatch { expected: field.values.len(), got: field.variance.len() });
    }
    if field.values.len() != field.grid.len() {
        return Err(Error::LengthMismatch { expected: field.grid.len(), got: field.values.len() });
    }
    let (scale, physical) = match field.provenance.beta_in_kernel {
        None => (beta, beta),
        Some(b) if beta == 1.0 || beta == b => (1.0, b),
        Some(b) => {
            return Err(Error::InvalidArgument(format!(
                "field already carries β = {b}; pass 1 (or {b}), not {beta}"
            )))
        }
    };
    let base = normalization_factor(rule)? * field.grid.cell_width();
    let weights: Vec<f64> = field
        .values
        .iter()
        .zip(field.variance.iter())
        .map(|(&x, &v)| base * (scale * x - 0.5 * scale * scale * v).exp())
        .collect();
    check_weights(&weights)?;
    Ok(ChaosMeasure { grid: field.grid, weights, beta: physical, rule, provenance: field.provenance })
}

fn check_weights(weights: &[f64]) -> Result<()> {
    match weights.iter().find(|w| !w.is_finite()) {
        Some(&w) => Err(Error::InvalidArgument(format!("non-finite cell mass {w}"))),
        None => Ok(()),
    }
}

/// `Σ_i f(x_i) w_i`.
pub fn integrate(measure: &ChaosMeasure, f: &[f64]) -> Result<f64> {
    if f.len() != measure.weights.len() {
        return Err(Error::LengthMismatch { expected: measure.weights.len(), got: f.len() });
    }
    Ok(f.iter().zip(&measure.weights).map(|(a, w)| a * w).sum())
}

/// Reweights by `exp(Z − Var Z / 2 − E[X Z])`, with `E[X Z]` at each point in `cross_cov`.
pub fn perturb_measure(measure: &ChaosMeasure, z: &FieldSample, cross_cov: &[f64]) -> Result<ChaosMeasure> {
    if z.grid != measure.grid {
        return Err(Error::GridMismatch);
    }
    if cross_cov.len() != z.values.len() {
        return Err(Error::LengthMismatch { expected: z.values.len(), got: cross_cov.len() });
    }
    let weights: Vec<f64> = measure
        .weights
        .iter()
        .zip(&z.values)
        .zip(z.variance.iter().zip(cross_cov))
        .map(|((w, zv), (v, c))| w * (zv - 0.5 * v - c).exp())
        .collect();
    check_weights(&weights)?;
    Ok(ChaosMeasure { weights, ..measure.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{CovarianceSpec, Scheme};
    use crate::rng::{Purpose, RngStream};
    use crate::samplers::{sample_cholesky_field, sample_fourier_field};
    use std::sync::Arc;

    fn zero_field(m: usize) -> FieldSample {
        FieldSample {
            grid: GridDomain::circle(m).unwrap(),
            values: vec![0.0; m],
            variance: Arc::from(vec![0.0; m]),
            scheme: None,
            provenance: Provenance { stream: None, jitter: 0.0, beta_in_kernel: None },
        }
    }

    #[test]
    fn factors() {
        assert_eq!(normalization_factor(NormalizationRule::lebesgue()).unwrap(), 1.0);
        let f = normalization_factor(NormalizationRule::sqrt_n_log2(4.0)).unwrap();
        assert!((f - 2.0 * std::f64::consts::LN_2.sqrt()).abs() < 1e-15);
        let n: f64 = 300.0;
        assert_eq!(
            normalization_factor(NormalizationRule::sqrt_t(n.ln())).unwrap(),
            normalization_factor(NormalizationRule::sqrt_log_n(n)).unwrap()
        );
        assert!(normalization_factor(NormalizationRule::sqrt_log_n(1.0)).is_err());
        assert!(normalization_factor(NormalizationRule::sqrt_log_n(0.5)).is_err());
    }

    #[test]
    fn degenerate_field_gives_the_reference_measure() {
        let field = zero_field(8);
        let mu = build_measure(&field, 0.3, NormalizationRule::sqrt_t(4.0)).unwrap();
        assert!(mu.weights.iter().all(|&w| (w - 2.0 / 8.0).abs() < 1e-15));
        let half: Vec<f64> = (0..8).map(|i| if i < 4 { 1.0 } else { 0.0 }).collect();
        assert!((integrate(&mu, &half).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(integrate(&mu, &[1.0; 8]).unwrap(), mu.total_mass());
    }

    #[test]
    fn beta_is_applied_once() {
        let g = GridDomain::circle(16).unwrap();
        let s = RngStream::new(0, 0, Purpose::Field);
        let spec = CovarianceSpec::new(Scheme::WhiteNoiseCone { t: 1.0 }, 0.5).unwrap();
        let field = sample_cholesky_field(&spec, &g, s).unwrap();
        let a = build_measure(&field, 1.0, NormalizationRule::lebesgue()).unwrap();
        let b = build_measure(&field, 0.5, NormalizationRule::lebesgue()).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.beta, 0.5);
        assert!(build_measure(&field, 0.7, NormalizationRule::lebesgue()).is_err());
        let w0 = (field.values[0] - 0.5 * field.variance[0]).exp() / 16.0;
        assert!((a.weights[0] - w0).abs() < 1e-15 * w0.max(1.0));
    }

    #[test]
    fn perturbation_identity_and_errors() {
        let g = GridDomain::circle(16).unwrap();
        let (field, _) = sample_fourier_field(8, &g, RngStream::new(1, 0, Purpose::Field)).unwrap();
        let mu = build_measure(&field, 0.5, NormalizationRule::lebesgue()).unwrap();
        let same = perturb_measure(&mu, &zero_field(16), &[0.0; 16]).unwrap();
        assert_eq!(same.weights, mu.weights);
        assert!(perturb_measure(&mu, &zero_field(32), &[0.0; 32]).is_err());
        assert!(perturb_measure(&mu, &zero_field(16), &[0.0; 3]).is_err());
        assert!(build_measure(&field, 0.0, NormalizationRule::lebesgue()).is_err());
        assert!(integrate(&mu, &[1.0; 3]).is_err());
    }
}
