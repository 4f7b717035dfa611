//! Input specs. Every struct rejects unknown keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use leanexp::{
    CostModel, ExclusiveMethod, ExperimentRecord, GaussianPrior, NoiseModel, Prior, ProductionHandle, ProgramSpec,
    TestingCost, Utility, DEFAULT_PVALUE_Z,
};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// A parsed spec file with its hash and the seed it carried, if any.
pub struct Loaded<T> {
    pub spec: T,
    pub sha256: String,
    pub seed: Option<u64>,
    pub dir: PathBuf,
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Spec(format!("cannot read spec {}: {e}", path.display())))?;
    let sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    let mut value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Spec(format!("spec {}: {e}", path.display())))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| CliError::Spec(format!("spec {}: top level must be a JSON object", path.display())))?;
    let seed = match obj.remove("seed") {
        None => None,
        Some(v) => Some(
            v.as_u64()
                .ok_or_else(|| CliError::Spec(format!("spec {}: `seed` must be a non-negative integer", path.display())))?,
        ),
    };
    let spec = serde_json::from_value(value).map_err(|e| CliError::Spec(format!("spec {}: {e}", path.display())))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { spec, sha256, seed, dir })
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilitySpec {
    #[default]
    Linear,
    LossAverse {
        b: f64,
    },
}

impl UtilitySpec {
    pub fn build(self) -> Result<Utility, CliError> {
        Ok(match self {
            UtilitySpec::Linear => Utility::Linear,
            UtilitySpec::LossAverse { b } => Utility::loss_averse(b).map_err(|e| field("utility.loss_averse.b", e))?,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    /// Cost `s` paid when an idea ships.
    #[serde(default)]
    pub implementation: f64,
    /// Flat cost of running a test.
    #[serde(default)]
    pub per_test: f64,
}

impl CostSpec {
    pub fn build(self) -> Result<CostModel, CliError> {
        let testing = if self.per_test == 0.0 {
            TestingCost::Zero
        } else {
            TestingCost::FixedPerTest(self.per_test)
        };
        CostModel::new(self.implementation, testing).map_err(|e| field("cost", e))
    }
}

/// Either explicit values or a log-spaced range; values are rounded to
/// integers, deduplicated and sorted.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub values: Option<Vec<f64>>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub points: Option<usize>,
}

impl GridSpec {
    pub fn integers(&self, name: &str, min: u64) -> Result<Vec<u64>, CliError> {
        let raw: Vec<f64> = match (&self.values, self.from, self.to, self.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(k)) => {
                if !(a > 0.0 && b >= a && a.is_finite() && b.is_finite()) {
                    return Err(CliError::Spec(format!("`{name}`: need 0 < from ≤ to, got from={a}, to={b}")));
                }
                if k == 0 {
                    return Err(CliError::Spec(format!("`{name}.points` must be at least 1")));
                }
                if k == 1 {
                    vec![a]
                } else {
                    let (la, lb) = (a.ln(), b.ln());
                    (0..k).map(|i| (la + (lb - la) * i as f64 / (k - 1) as f64).exp()).collect()
                }
            }
            _ => {
                return Err(CliError::Spec(format!(
                    "`{name}`: give either `values` or all of `from`, `to`, `points`"
                )))
            }
        };
        let mut out = Vec::with_capacity(raw.len());
        for v in raw {
            if !(v.is_finite() && v.round() >= min as f64 && v.round() < 2f64.powi(63)) {
                return Err(CliError::Spec(format!("`{name}`: value {v} must be a finite integer ≥ {min}")));
            }
            out.push(v.round() as u64);
        }
        out.sort_unstable();
        out.dedup();
        if out.is_empty() {
            return Err(CliError::Spec(format!("`{name}`: grid is empty")));
        }
        Ok(out)
    }

    /// Real-valued grid; `values` are kept as given (sorted), ranges are
    /// log-spaced without rounding.
    pub fn reals(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let mut out: Vec<f64> = match (&self.values, self.from, self.to, self.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(k)) if a > 0.0 && b >= a && k >= 1 => {
                if k == 1 {
                    vec![a]
                } else {
                    let (la, lb) = (a.ln(), b.ln());
                    (0..k).map(|i| (la + (lb - la) * i as f64 / (k - 1) as f64).exp()).collect()
                }
            }
            _ => {
                return Err(CliError::Spec(format!(
                    "`{name}`: give either `values` or `from`, `to`, `points` with 0 < from ≤ to"
                )))
            }
        };
        if let Some(v) = out.iter().find(|v| !v.is_finite()) {
            return Err(CliError::Spec(format!("`{name}`: value {v} is not finite")));
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        if out.is_empty() {
            return Err(CliError::Spec(format!("`{name}`: grid is empty")));
        }
        Ok(out)
    }
}

pub(crate) fn field(name: &str, e: leanexp::Error) -> CliError {
    if e.is_numerical() {
        CliError::Core(e)
    } else {
        CliError::Spec(format!("`{name}`: {e}"))
    }
}

pub(crate) fn noise(sigma: f64) -> Result<NoiseModel, CliError> {
    NoiseModel::new(sigma).map_err(|e| field("sigma", e))
}

pub fn gaussian(prior: &Prior, command: &str) -> Result<GaussianPrior, CliError> {
    prior
        .as_gaussian()
        .copied()
        .ok_or_else(|| CliError::Spec(format!("`prior`: {command} needs a gaussian prior")))
}

pub fn handle(prior: &Prior, sigma: f64, utility: UtilitySpec, cost: CostSpec) -> Result<ProductionHandle, CliError> {
    Ok(ProductionHandle::new(prior.clone(), noise(sigma)?, utility.build()?, cost.build()?))
}

pub(crate) fn default_z() -> f64 {
    DEFAULT_PVALUE_Z
}

pub(crate) fn default_bracket() -> f64 {
    1e10
}

pub(crate) fn one() -> u64 {
    1
}

pub(crate) fn yes() -> bool {
    true
}

pub(crate) fn default_samples() -> usize {
    100_000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitPriorSpec {
    pub sigma: f64,
    pub records: Option<Vec<ExperimentRecord>>,
    /// CSV (`delta_hat,n` header) or JSON file, relative to the spec file.
    pub records_path: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductionCurveSpec {
    pub prior: Prior,
    pub sigma: f64,
    #[serde(default)]
    pub utility: UtilitySpec,
    #[serde(default)]
    pub cost: CostSpec,
    #[serde(alias = "n")]
    pub n_grid: GridSpec,
    #[serde(default = "default_z")]
    pub pvalue_z: f64,
    /// Monte Carlo draws per grid point; 0 skips the simulation columns.
    #[serde(default)]
    pub monte_carlo_samples: usize,
    #[serde(default = "default_bracket")]
    pub x_star_bracket: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocateSpec {
    pub prior: Prior,
    pub sigma: f64,
    #[serde(default)]
    pub utility: UtilitySpec,
    #[serde(default, alias = "cost")]
    pub costs: CostSpec,
    #[serde(rename = "I", alias = "ideas")]
    pub ideas: u64,
    #[serde(rename = "N", alias = "pool")]
    pub pool: u64,
    #[serde(rename = "c0", alias = "granularity", default = "one")]
    pub granularity: u64,
    #[serde(rename = "k", alias = "multiplicity", default = "one")]
    pub multiplicity: u64,
    /// Also write the frontier `F(I, b·c0)` as CSV.
    #[serde(default = "yes")]
    pub frontier_csv: bool,
    pub memory_budget_bytes: Option<u64>,
    #[serde(default = "default_bracket")]
    pub x_star_bracket: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdsSpec {
    pub prior: Prior,
    pub sigma: f64,
    #[serde(default)]
    pub utility: UtilitySpec,
    /// Only the implementation cost moves the threshold.
    #[serde(default)]
    pub cost: CostSpec,
    #[serde(alias = "n")]
    pub n_grid: GridSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostAnalysisSpec {
    pub prior: Prior,
    pub sigma: f64,
    #[serde(alias = "n")]
    pub n_grid: GridSpec,
    pub target_alpha: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSpec {
    pub size: u64,
    #[serde(default = "one")]
    pub enrollment_cap: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiProgramSpec {
    pub programs: Vec<ProgramSpec>,
    /// Shared pool for the single-pool problem.
    pub pool: Option<u64>,
    #[serde(default = "one")]
    pub block: u64,
    /// Several unit pools; switches to the pooled solver.
    pub unit_pools: Option<Vec<PoolSpec>>,
    /// Program name → indices of pools it may not use.
    #[serde(default)]
    pub excluded_pools: BTreeMap<String, Vec<usize>>,
    #[serde(default = "default_bracket")]
    pub x_star_bracket: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShareIdeasSpec {
    pub programs: Vec<ProgramSpec>,
    pub ideas: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequentialSpec {
    pub prior: Prior,
    pub sigma: f64,
    pub pool: u64,
    pub ideas: u64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExclusiveSpec {
    pub prior: Prior,
    pub sigma: f64,
    pub pool: u64,
    pub ideas: u64,
    #[serde(default = "default_method")]
    pub method: ExclusiveMethod,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Evaluate these `I₀` only instead of searching.
    pub i0: Option<Vec<u64>>,
}

pub(crate) fn default_method() -> ExclusiveMethod {
    ExclusiveMethod::MonteCarlo
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimaxSpec {
    pub sigma: f64,
    #[serde(default)]
    pub allocations: Vec<Vec<u64>>,
    /// With `ideas`, also reports the equal split of this pool.
    pub pool: Option<u64>,
    pub ideas: Option<u64>,
}
