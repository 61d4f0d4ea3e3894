//! Experiment configuration: a single JSON document, schema-validated with
//! unknown keys rejected.  Command-line flags override file fields, which
//! override built-in defaults.

use anyhow::{bail, Context};
use factorable::factorize::{default_sequences, SequencePlan};
use factorable::fields::{
    simulate_brownian, simulate_brownian_sheet, simulate_fbm, simulate_gaussian_field,
    simulate_stable, FieldEnsemble, RngStreamSpec,
};
use factorable::modulus::{DeltaGrid, NormSpec};
use factorable::orlicz::{OrliczFunction, PsiFunction};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const DEFAULT_SEED: u64 = 20260810;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generator: GeneratorSpec,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub norm: NormConfig,
    #[serde(default)]
    pub plan: PlanConfig,
    #[serde(default = "default_delta_grid")]
    pub delta_grid: DeltaGrid,
    #[serde(default = "default_pipelines")]
    pub pipelines: Vec<PipelineKind>,
    #[serde(default)]
    pub heavy_tail: HeavyTailConfig,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_delta_grid() -> DeltaGrid {
    DeltaGrid::Distinct { cap: 2048 }
}

fn default_pipelines() -> Vec<PipelineKind> {
    vec![PipelineKind::Factorize]
}

impl Default for ExperimentConfig {
    /// The canonical Wiener run: Brownian paths on [0, 1/e].
    fn default() -> Self {
        Self {
            generator: GeneratorSpec::Brownian {
                t_max: (-1.0_f64).exp(),
                points: 257,
                realizations: 2000,
            },
            seed: DEFAULT_SEED,
            norm: NormConfig::default(),
            plan: PlanConfig::default(),
            delta_grid: default_delta_grid(),
            pipelines: default_pipelines(),
            heavy_tail: HeavyTailConfig::default(),
            out_dir: None,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Brownian { t_max: f64, points: usize, realizations: usize },
    Fbm { hurst: f64, t_max: f64, points: usize, realizations: usize },
    Stable { alpha: f64, t_max: f64, points: usize, realizations: usize },
    Gaussian { covariance: CovarianceKind, t_max: f64, points: usize, realizations: usize },
    Sheet { t_max: f64, points_x: usize, points_y: usize, realizations: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CovarianceKind {
    /// min(s, t)
    Wiener,
    /// min(s, t) + drift_sd² · s · t  (Wiener plus independent random drift)
    WienerDrift { drift_sd: f64 },
    /// Identically zero (degenerate-field diagnostics)
    Zero,
}

impl GeneratorSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            GeneratorSpec::Brownian { .. } => "brownian",
            GeneratorSpec::Fbm { .. } => "fbm",
            GeneratorSpec::Stable { .. } => "stable",
            GeneratorSpec::Gaussian { .. } => "gaussian",
            GeneratorSpec::Sheet { .. } => "sheet",
        }
    }

    pub fn realizations(&self) -> usize {
        match *self {
            GeneratorSpec::Brownian { realizations, .. }
            | GeneratorSpec::Fbm { realizations, .. }
            | GeneratorSpec::Stable { realizations, .. }
            | GeneratorSpec::Gaussian { realizations, .. }
            | GeneratorSpec::Sheet { realizations, .. } => realizations,
        }
    }

    pub fn generate(&self, seed: u64) -> factorable::Result<FieldEnsemble> {
        let spec = RngStreamSpec::new(seed);
        match *self {
            GeneratorSpec::Brownian { t_max, points, realizations } => {
                simulate_brownian(&time_grid(t_max, points), realizations, spec)
            }
            GeneratorSpec::Fbm { hurst, t_max, points, realizations } => {
                simulate_fbm(hurst, &time_grid(t_max, points), realizations, spec)
            }
            GeneratorSpec::Stable { alpha, t_max, points, realizations } => {
                simulate_stable(alpha, &time_grid(t_max, points), realizations, spec)
            }
            GeneratorSpec::Gaussian { ref covariance, t_max, points, realizations } => {
                let grid = time_grid(t_max, points);
                let cov = covariance_matrix(covariance, &grid);
                simulate_gaussian_field(&grid, &cov, realizations, spec)
            }
            GeneratorSpec::Sheet { t_max, points_x, points_y, realizations } => {
                simulate_brownian_sheet(
                    &time_grid(t_max, points_x),
                    &time_grid(t_max, points_y),
                    realizations,
                    spec,
                )
            }
        }
    }
}

pub fn time_grid(t_max: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| t_max * i as f64 / (points - 1).max(1) as f64)
        .collect()
}

pub fn covariance_matrix(kind: &CovarianceKind, grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut cov = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            cov[i * n + j] = match kind {
                CovarianceKind::Wiener => grid[i].min(grid[j]),
                CovarianceKind::WienerDrift { drift_sd } => {
                    grid[i].min(grid[j]) + drift_sd * drift_sd * grid[i] * grid[j]
                }
                CovarianceKind::Zero => 0.0,
            };
        }
    }
    cov
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NormConfig {
    Power { param: f64 },
    ExpPower { param: f64 },
    Gaussian,
    Table { knots: Vec<(f64, f64)> },
    Gls { psi: PsiConfig, p_grid: Vec<f64> },
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig::Power { param: 2.0 }
    }
}

impl NormConfig {
    pub fn to_norm_spec(&self) -> factorable::Result<NormSpec> {
        Ok(match self {
            NormConfig::Power { param } => NormSpec::Luxemburg(OrliczFunction::power(*param)?),
            NormConfig::ExpPower { param } => NormSpec::Luxemburg(OrliczFunction::exp_power(*param)?),
            NormConfig::Gaussian => NormSpec::Luxemburg(OrliczFunction::gaussian()),
            NormConfig::Table { knots } => NormSpec::Luxemburg(OrliczFunction::table(knots.clone())?),
            NormConfig::Gls { psi, p_grid } => NormSpec::Gls { psi: psi.to_psi()?, p_grid: p_grid.clone() },
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PsiConfig {
    Degenerate { r: f64 },
    Constant { c: f64 },
    Power { q: f64 },
    Table { knots: Vec<(f64, f64)> },
}

impl PsiConfig {
    pub fn to_psi(&self) -> factorable::Result<PsiFunction> {
        match self {
            PsiConfig::Degenerate { r } => PsiFunction::degenerate(*r),
            PsiConfig::Constant { c } => PsiFunction::constant(*c),
            PsiConfig::Power { q } => PsiFunction::power(*q),
            PsiConfig::Table { knots } => PsiFunction::table(knots.clone()),
        }
    }
}

/// Either the default (ν, θ, N) families or explicit sequences; the two
/// styles are mutually exclusive.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_param: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self { nu: Some(1.0), theta_param: Some(1.0), n: Some(40), a: None, b: None }
    }
}

impl PlanConfig {
    pub fn to_plan(&self) -> anyhow::Result<SequencePlan> {
        match (&self.a, &self.b) {
            (Some(a), Some(b)) => {
                if self.nu.is_some() || self.theta_param.is_some() || self.n.is_some() {
                    bail!("plan: explicit sequences exclude nu/theta_param/n");
                }
                Ok(SequencePlan::explicit(a.clone(), b.clone())?)
            }
            (None, None) => {
                let nu = self.nu.unwrap_or(1.0);
                let theta = self.theta_param.unwrap_or(1.0);
                let n = self.n.unwrap_or(40);
                Ok(default_sequences(nu, theta, n)?)
            }
            _ => bail!("plan: supply both a and b, or neither"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeavyTailConfig {
    /// Exponent of the Z_m compression.
    #[serde(default = "default_zm_m")]
    pub m: f64,
    /// Moment order probed by the blow-up diagnostic.
    #[serde(default = "default_blowup_p")]
    pub p: f64,
}

fn default_zm_m() -> f64 {
    1.0
}

fn default_blowup_p() -> f64 {
    4.0
}

impl Default for HeavyTailConfig {
    fn default() -> Self {
        Self { m: default_zm_m(), p: default_blowup_p() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineKind {
    Factorize,
    EntropyBound,
    KrBound,
    Rectangle,
    HeavyTail,
}

impl PipelineKind {
    pub fn name(&self) -> &'static str {
        match self {
            PipelineKind::Factorize => "factorize",
            PipelineKind::EntropyBound => "entropy-bound",
            PipelineKind::KrBound => "kr-bound",
            PipelineKind::Rectangle => "rectangle",
            PipelineKind::HeavyTail => "heavy-tail",
        }
    }
}

/// Parse a config document, reporting the JSON path of the offending field.
pub fn parse_config(text: &str) -> anyhow::Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de)
        .map_err(|e| anyhow::anyhow!("config field `{}`: {}", e.path(), e.inner()))?;
    validate(&cfg)?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text)
}

fn validate(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    if cfg.generator.realizations() == 0 {
        bail!("config field `generator.realizations`: must be positive");
    }
    cfg.plan.to_plan().map_err(|e| anyhow::anyhow!("config field `plan`: {e}"))?;
    cfg.norm
        .to_norm_spec()
        .map_err(|e| anyhow::anyhow!("config field `norm`: {e}"))?;
    if cfg.pipelines.is_empty() {
        bail!("config field `pipelines`: select at least one pipeline");
    }
    Ok(())
}
