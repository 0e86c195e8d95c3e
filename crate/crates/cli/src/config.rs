use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sextic_core::analysis::{HistogramSpec, LlnTolerances};
use sextic_core::cramer::{FdPlan, GridSpec};
use sextic_core::interaction::Interaction;
use sextic_core::sampler::{ChainPlan, ScanOrder};
use sextic_core::MeasureSpec;

/// Experiment description shared by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub measure: MeasureSpec,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_sweeps")]
    pub sweeps: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: u64,
    #[serde(default = "one")]
    pub thin: u64,
    #[serde(default = "default_chains")]
    pub chains: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub scan: ScanOrder,
    #[serde(default)]
    pub interaction: Interaction,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub cramer: CramerConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub exact: ExactConfig,
    #[serde(default)]
    pub density3: Density3Config,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CramerConfig {
    pub fd: FdPlan,
    pub landscape_n: f64,
    /// Defaults to a box of half-widths `(0.5, 0.25 sigma^2, 0.15 mu4)` around the mean triple.
    pub grid: Option<GridSpec>,
    pub limit_n: Vec<f64>,
    pub limit_points: Vec<[f64; 3]>,
}

impl Default for CramerConfig {
    fn default() -> Self {
        CramerConfig {
            fd: FdPlan::default(),
            landscape_n: 1e3,
            grid: None,
            limit_n: vec![1e3, 1e4, 1e5],
            limit_points: vec![[1.0, 1.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub ks_threshold: f64,
    pub lln: LlnTolerances,
    pub histogram: HistogramSpec,
    pub slope_band: [f64; 2],
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            ks_threshold: 0.05,
            lln: LlnTolerances::default(),
            histogram: HistogramSpec::default(),
            slope_band: [0.76, 0.92],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExactConfig {
    pub n: usize,
    /// When set, the sampler runs this many recorded sweeps per chain and is compared
    /// with the exact law.
    pub compare_sweeps: Option<u64>,
    pub tv_threshold: f64,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig {
            n: 6,
            compare_sweeps: None,
            tv_threshold: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Density3Config {
    pub cells: usize,
    pub tolerance: f64,
    pub condition_p: Vec<f64>,
    pub condition_samples: usize,
}

impl Default for Density3Config {
    fn default() -> Self {
        Density3Config {
            cells: 200,
            tolerance: 0.01,
            condition_p: vec![1.1],
            condition_samples: 1 << 20,
        }
    }
}

fn default_n_list() -> Vec<usize> {
    vec![1000]
}
fn default_sweeps() -> u64 {
    10_000
}
fn default_burn_in() -> u64 {
    1_000
}
fn one() -> u64 {
    1
}
fn default_chains() -> u32 {
    8
}
fn default_seed() -> u64 {
    2024
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// Reads TOML, or JSON when the file name ends in `.json`.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            bail!("n_list must hold positive sizes");
        }
        if self.chains == 0 {
            bail!("chains must be positive");
        }
        self.plan().validate()?;
        if self.exact.n == 0 {
            bail!("exact.n must be positive");
        }
        if self.density3.cells == 0 {
            bail!("density3.cells must be positive");
        }
        Ok(())
    }

    pub fn plan(&self) -> ChainPlan {
        ChainPlan {
            scan: self.scan,
            interaction: self.interaction,
            ..ChainPlan::new(self.sweeps, self.burn_in, self.thin)
        }
    }
}
