use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chaos::NormalizationRule;
use crate::error::{Error, Result};
use crate::grid::{DomainKind, GridDomain};
use crate::kernels::{Mollifier, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentKind {
    CovarianceValidation,
    GapCurves,
    CrossSchemeKS,
    CoupledConvergence,
    CriticalMassTrend,
    SecondMomentCheck,
    ZepsBounds,
    KahaneDirection,
    PerturbationCheck,
    MeanNormalization,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 10] = [
        ExperimentKind::CovarianceValidation,
        ExperimentKind::GapCurves,
        ExperimentKind::CrossSchemeKS,
        ExperimentKind::CoupledConvergence,
        ExperimentKind::CriticalMassTrend,
        ExperimentKind::SecondMomentCheck,
        ExperimentKind::ZepsBounds,
        ExperimentKind::KahaneDirection,
        ExperimentKind::PerturbationCheck,
        ExperimentKind::MeanNormalization,
    ];

    pub fn describe(self) -> &'static str {
        match self {
            Self::CovarianceValidation => "Monte Carlo covariance at probe pairs vs the analytic kernel",
            Self::GapCurves => "sup covariance gaps between two schemes across levels",
            Self::CrossSchemeKS => "two-sample KS between chaos masses of different schemes",
            Self::CoupledConvergence => "coupled Fourier/convolution mass difference across levels",
            Self::CriticalMassTrend => "median critical mass with and without the √(ln n) factor",
            Self::SecondMomentCheck => "E[mass²] against the quadrature of e^{β²K}",
            Self::ZepsBounds => "L² deviation and compact support of the decorrelating field",
            Self::KahaneDirection => "sign of E f(M_A) − E f(M_B) for dominating covariances",
            Self::PerturbationCheck => "reweighting a chaos by a regular Gaussian field",
            Self::MeanNormalization => "mean-one total mass under the Lebesgue reference",
        }
    }

    /// Tolerance keys and their defaults.
    pub fn tolerance_defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            Self::CovarianceValidation => &[("sigma", 4.0)],
            Self::GapCurves => &[("gap_ratio", 1.2), ("decrease", 0.5), ("monotone_slack", 1e-12)],
            Self::CrossSchemeKS => &[("p_value", 0.01), ("seed_fraction", 0.8)],
            Self::CoupledConvergence => &[("sigma", 2.0)],
            Self::CriticalMassTrend => &[("band_ratio", 5.0), ("decrease", 0.5)],
            Self::SecondMomentCheck => &[("sigma", 4.0), ("gamma_identity", 1e-6)],
            Self::ZepsBounds => &[("sigma", 4.0)],
            Self::KahaneDirection => &[("sigma", 2.0)],
            Self::PerturbationCheck => &[("sigma", 4.0), ("p_value", 0.01), ("pathwise", 1e-10)],
            Self::MeanNormalization => &[("sigma", 4.0)],
        }
    }
}

/// Scheme families addressed by a single level `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeName {
    LimitCircle,
    FourierPartial,
    WhiteNoiseCone,
    ConvolutionGaussian,
    ConvolutionPoisson,
    Vaguelet,
    ExactConeInterval,
}

impl SchemeName {
    pub const SAMPLED: [SchemeName; 6] = [
        SchemeName::FourierPartial,
        SchemeName::WhiteNoiseCone,
        SchemeName::ConvolutionGaussian,
        SchemeName::ConvolutionPoisson,
        SchemeName::Vaguelet,
        SchemeName::ExactConeInterval,
    ];

    /// Level `n` maps to `t = ln n` for cone fields and to `J = log₂ n`
    /// for vaguelets, matching near-diagonal variances `≈ 2 ln n`.
    pub fn at_level(self, n: u32) -> Result<Scheme> {
        let t = (n as f64).ln();
        Ok(match self {
            Self::LimitCircle => Scheme::LimitCircle,
            Self::FourierPartial => Scheme::FourierPartial { n },
            Self::WhiteNoiseCone => Scheme::WhiteNoiseCone { t },
            Self::ConvolutionGaussian => Scheme::ConvolutionSpectral { n, mollifier: Mollifier::Gaussian },
            Self::ConvolutionPoisson => Scheme::ConvolutionSpectral { n, mollifier: Mollifier::Poisson },
            Self::Vaguelet if n.is_power_of_two() => Scheme::Vaguelet { n: n.trailing_zeros() },
            Self::Vaguelet => return Err(Error::Config(format!("vaguelet level n = {n} is not a power of two"))),
            Self::ExactConeInterval => Scheme::ExactConeInterval { t },
        })
    }

    /// Reference measure at criticality for level `n`.
    pub fn critical_rule(self, n: u32) -> NormalizationRule {
        match self {
            Self::Vaguelet => NormalizationRule::sqrt_n_log2(n.trailing_zeros() as f64),
            _ => NormalizationRule::sqrt_log_n(n as f64),
        }
    }

    pub fn grid(self, m: usize) -> Result<GridDomain> {
        match self {
            Self::ExactConeInterval => GridDomain::new(DomainKind::Interval, m),
            _ => GridDomain::new(DomainKind::Circle, m),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::LimitCircle => "LimitCircle",
            Self::FourierPartial => "FourierPartial",
            Self::WhiteNoiseCone => "WhiteNoiseCone",
            Self::ConvolutionGaussian => "ConvolutionGaussian",
            Self::ConvolutionPoisson => "ConvolutionPoisson",
            Self::Vaguelet => "Vaguelet",
            Self::ExactConeInterval => "ExactConeInterval",
        }
    }
}

fn default_beta() -> f64 {
    1.0
}
fn default_m() -> usize {
    256
}
fn default_replicas() -> usize {
    10_000
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Experiment description. Kind-specific fields left empty are filled by
/// [`parse_config`] with the defaults listed in the README.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeName>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schemes: Vec<SchemeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<u32>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub betas: Vec<f64>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
}

fn powers_of_two(lo: u32, hi: u32) -> Vec<u32> {
    (lo..=hi).map(|k| 1 << k).collect()
}

impl ExperimentConfig {
    /// A config of the given kind with every default filled in.
    pub fn new(kind: ExperimentKind) -> Self {
        let mut c = Self {
            kind,
            scheme: None,
            schemes: vec![],
            n: None,
            levels: vec![],
            beta: default_beta(),
            betas: vec![],
            m: default_m(),
            replicas: default_replicas(),
            master_seed: 0,
            output_dir: default_output_dir(),
            tolerances: BTreeMap::new(),
            seeds: None,
            eps: vec![],
            pairs: None,
        };
        c.fill_defaults();
        c
    }

    pub fn tolerance(&self, key: &str) -> f64 {
        self.tolerances.get(key).copied().unwrap_or_else(|| {
            self.kind
                .tolerance_defaults()
                .iter()
                .find(|(k, _)| *k == key)
                .map(|&(_, v)| v)
                .expect("tolerance key declared for this kind")
        })
    }

    pub fn level(&self) -> u32 {
        self.n.expect("filled by defaults")
    }

    fn fill_defaults(&mut self) {
        use ExperimentKind::*;
        use SchemeName::*;
        let k = self.kind;
        if self.scheme.is_none() && matches!(k, CovarianceValidation | SecondMomentCheck | PerturbationCheck) {
            self.scheme = Some(FourierPartial);
        }
        if self.scheme.is_none() && matches!(k, CriticalMassTrend) {
            self.scheme = Some(WhiteNoiseCone);
        }
        if self.schemes.is_empty() {
            self.schemes = match k {
                GapCurves => vec![FourierPartial, WhiteNoiseCone],
                CrossSchemeKS => vec![FourierPartial, WhiteNoiseCone, Vaguelet],
                CoupledConvergence => vec![FourierPartial, ConvolutionGaussian],
                MeanNormalization => SchemeName::SAMPLED.to_vec(),
                _ => vec![],
            };
        }
        if self.n.is_none() {
            self.n = Some(match k {
                CrossSchemeKS => 1024,
                SecondMomentCheck => 256,
                _ => 64,
            });
        }
        if self.levels.is_empty() {
            self.levels = match k {
                GapCurves | CriticalMassTrend => powers_of_two(6, 12),
                CoupledConvergence => vec![64, 256, 1024, 4096],
                _ => vec![],
            };
        }
        if self.betas.is_empty() && k == MeanNormalization {
            self.betas = vec![0.5, 1.0];
        }
        if self.eps.is_empty() && k == ZepsBounds {
            self.eps = vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0];
        }
        if self.seeds.is_none() && k == CrossSchemeKS {
            self.seeds = Some(10);
        }
        if self.pairs.is_none() && k == KahaneDirection {
            self.pairs = Some(20);
        }
    }

    pub fn validate(&self) -> Result<()> {
        use ExperimentKind::*;
        let bad = |msg: String| Err(Error::Config(msg));
        if self.replicas < 100 {
            return bad(format!("replicas: {} is below the minimum of 100", self.replicas));
        }
        if !self.m.is_power_of_two() || !(32..=4096).contains(&self.m) {
            return bad(format!("m: {} must be a power of two in [32, 4096]", self.m));
        }
        for &b in std::iter::once(&self.beta).chain(&self.betas) {
            if !(b > 0.0 && b <= 1.0) {
                return bad(format!("beta: {b} not in (0, 1]"));
            }
        }
        for key in self.tolerances.keys() {
            if !self.kind.tolerance_defaults().iter().any(|(k, _)| k == key) {
                return bad(format!("tolerances: unknown key \"{key}\" for {:?}", self.kind));
            }
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) || self.levels.iter().any(|&n| n < 2) {
            return bad("levels: must be ≥ 2 and strictly increasing".into());
        }
        if self.level() < 1 {
            return bad("n: must be ≥ 1".into());
        }
        if self.seeds == Some(0) || self.pairs == Some(0) {
            return bad("seeds/pairs: must be ≥ 1".into());
        }
        for &e in &self.eps {
            if !(e >= 2.0 / self.m as f64 && e <= 0.5) {
                return bad(format!("eps: {e} not in [2/m, 1/2]"));
            }
        }
        let needs_two = matches!(self.kind, GapCurves | CrossSchemeKS | CoupledConvergence);
        if needs_two && self.schemes.len() < 2 {
            return bad(format!("schemes: {:?} compares at least two schemes", self.kind));
        }
        if self.kind == GapCurves && self.schemes.len() != 2 {
            return bad("schemes: GapCurves compares exactly two schemes".into());
        }
        if self.kind == CoupledConvergence
            && (self.schemes[0] != SchemeName::FourierPartial
                || !matches!(self.schemes[1], SchemeName::ConvolutionGaussian | SchemeName::ConvolutionPoisson))
        {
            return bad("schemes: CoupledConvergence couples FourierPartial with a convolution scheme".into());
        }
        if matches!(self.kind, SecondMomentCheck | PerturbationCheck) && self.scheme != Some(SchemeName::FourierPartial) {
            return bad(format!("scheme: {:?} is implemented for FourierPartial", self.kind));
        }
        let sampled = self.scheme.into_iter().chain(self.schemes.iter().copied());
        if self.kind != GapCurves && sampled.clone().any(|s| s == SchemeName::LimitCircle) {
            return bad("scheme: LimitCircle cannot be sampled".into());
        }
        // Resolve every scheme at every level once so errors surface early.
        let levels: Vec<u32> = if self.levels.is_empty() { vec![self.level()] } else { self.levels.clone() };
        for s in sampled {
            for &n in &levels {
                s.at_level(n)?;
            }
        }
        Ok(())
    }
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut config: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.fill_defaults();
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}
