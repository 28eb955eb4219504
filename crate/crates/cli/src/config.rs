//! Run configuration: one JSON document per run.

use std::collections::BTreeMap;
use std::path::PathBuf;

use mfstat_core::pretentious::GridParams;
use mfstat_core::symbolic::{Letter, Mode, Quantizer};
use mfstat_core::{MultiplicativeSpec, WeightSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Sieve,
    Corr,
    Dist,
    Maperiodic,
    Scan,
    Dilate,
    Cylinder,
    Complexity,
    Spectrum,
    Weights,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Sieve => "sieve",
            Task::Corr => "corr",
            Task::Dist => "dist",
            Task::Maperiodic => "maperiodic",
            Task::Scan => "scan",
            Task::Dilate => "dilate",
            Task::Cylinder => "cylinder",
            Task::Complexity => "complexity",
            Task::Spectrum => "spectrum",
            Task::Weights => "weights",
        }
    }
}

/// One factor `b_j(n + h_j)` of a shift pattern, naming a function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorConfig {
    pub function: String,
    #[serde(default)]
    pub shift: i64,
    #[serde(default)]
    pub conjugate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub step: Option<f64>,
    #[serde(default = "default_kappa")]
    pub kappa: usize,
    #[serde(default = "default_refine_width")]
    pub refine_width: f64,
}

fn default_kappa() -> usize {
    5
}

fn default_refine_width() -> f64 {
    1e-6
}

impl From<&GridConfig> for GridParams {
    fn from(g: &GridConfig) -> Self {
        GridParams {
            step: g.step,
            kappa: g.kappa,
            refine_width: g.refine_width,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must match the subcommand when present.
    pub task: Option<Task>,
    /// Named function specs.
    pub functions: BTreeMap<String, MultiplicativeSpec>,
    /// Function for single-function tasks; defaults to the only entry.
    pub function: Option<String>,
    /// Second function for `dist`.
    pub against: Option<String>,
    /// Truncation `N`.
    pub n: Option<u64>,
    /// Several truncations (`dist`, `maperiodic`).
    pub n_list: Option<Vec<u64>>,
    pub checkpoints: Option<Vec<u64>>,
    /// Sieve length; defaults to what the task needs.
    pub table_len: Option<u64>,
    pub pattern: Option<Vec<FactorConfig>>,
    #[serde(default)]
    pub weights: WeightSpec,
    /// Prime class `d` for `dilate`.
    pub d: Option<u64>,
    /// Scan `d = 1..=d_max` in `dilate`.
    pub d_max: Option<u64>,
    pub p_max: Option<u64>,
    pub dyads: Option<u32>,
    pub t_bound: Option<f64>,
    pub grid: Option<GridConfig>,
    pub moduli: Option<Vec<u64>>,
    pub a_max: Option<u64>,
    pub m_max: Option<usize>,
    pub n_max: Option<usize>,
    /// Explicit cylinder patterns for `cylinder`.
    pub patterns: Option<Vec<Vec<Letter>>>,
    pub quantizer: Option<Quantizer>,
    #[serde(default)]
    pub mode: Mode,
    pub max_lag: Option<u64>,
    pub alphas: Option<Vec<f64>>,
    pub cache_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Seed for sampled checks in `sieve`.
    #[serde(default)]
    pub seed: u64,
    /// Number of sampled point checks in `sieve`.
    #[serde(default)]
    pub verify_samples: u64,
    pub memory_budget: Option<u64>,
}

pub const DEFAULT_T_BOUND: f64 = 100.0;

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("cannot parse config: {e}")))
    }

    pub fn lookup(&self, name: &str) -> Result<&MultiplicativeSpec, CliError> {
        self.functions
            .get(name)
            .ok_or_else(|| CliError::config(format!("unknown function `{name}`")))
    }

    /// The function named by `function`, or the only one configured.
    pub fn main_function(&self) -> Result<(&str, &MultiplicativeSpec), CliError> {
        match &self.function {
            Some(name) => Ok((name, self.lookup(name)?)),
            None if self.functions.len() == 1 => {
                let (k, v) = self.functions.iter().next().unwrap();
                Ok((k, v))
            }
            None => Err(CliError::config("several functions configured; set `function`")),
        }
    }

    pub fn require_n(&self) -> Result<u64, CliError> {
        match self.n {
            Some(n) if n >= 1 => Ok(n),
            Some(_) => Err(CliError::config("`n` must be positive")),
            None => Err(CliError::config("missing `n`")),
        }
    }

    pub fn pattern(&self) -> Result<&[FactorConfig], CliError> {
        match &self.pattern {
            Some(p) if !p.is_empty() => {
                for f in p {
                    self.lookup(&f.function)?;
                }
                Ok(p)
            }
            _ => Err(CliError::config("missing or empty `pattern`")),
        }
    }

    /// Explicit checkpoints, or `⌊10^{k/2}⌋` for `k >= 2` up to `N` (with `N`
    /// appended when it is not of that form).
    pub fn checkpoints(&self) -> Result<Vec<u64>, CliError> {
        if let Some(c) = &self.checkpoints {
            if c.is_empty() || c.windows(2).any(|w| w[0] >= w[1]) || c[0] == 0 {
                return Err(CliError::config("checkpoints must be positive and strictly increasing"));
            }
            return Ok(c.clone());
        }
        let n = self.require_n()?;
        Ok(geometric_checkpoints(n))
    }

    pub fn n_list(&self) -> Result<Vec<u64>, CliError> {
        let list = match (&self.n_list, self.n) {
            (Some(l), _) => l.clone(),
            (None, Some(n)) => vec![n],
            (None, None) => return Err(CliError::config("missing `n` or `n_list`")),
        };
        if list.is_empty() || list.iter().any(|&n| n < 2) {
            return Err(CliError::config("every N must be at least 2"));
        }
        Ok(list)
    }

    pub fn grid(&self) -> GridParams {
        self.grid.as_ref().map(GridParams::from).unwrap_or_default()
    }

    pub fn t_bound(&self) -> Result<f64, CliError> {
        let t = self.t_bound.unwrap_or(DEFAULT_T_BOUND);
        if t > 0.0 && t.is_finite() {
            Ok(t)
        } else {
            Err(CliError::config("`t_bound` must be positive"))
        }
    }

    /// Checks that every referenced name exists and bounds are positive.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.functions.is_empty() {
            return Err(CliError::config("no functions configured"));
        }
        for name in [&self.function, &self.against].into_iter().flatten() {
            self.lookup(name)?;
        }
        if let Some(p) = &self.pattern {
            for f in p {
                self.lookup(&f.function)?;
            }
        }
        for (name, v) in [
            ("d", self.d),
            ("d_max", self.d_max),
            ("p_max", self.p_max),
            ("a_max", self.a_max),
        ] {
            if v == Some(0) {
                return Err(CliError::config(format!("`{name}` must be positive")));
            }
        }
        if self.threads == Some(0) {
            return Err(CliError::config("`threads` must be positive"));
        }
        if self.checkpoints.is_some() {
            self.checkpoints()?;
        }
        if self.t_bound.is_some() {
            self.t_bound()?;
        }
        self.weights
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        Ok(())
    }
}

pub fn geometric_checkpoints(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut k = 2;
    loop {
        let c = geometric_point(k);
        if c > n {
            break;
        }
        out.push(c);
        k += 1;
    }
    if out.last() != Some(&n) {
        out.push(n);
    }
    out
}

/// `⌊10^{k/2}⌋`, exact for even `k` and via integer square root for odd `k`.
fn geometric_point(k: u32) -> u64 {
    let base = 10u64.saturating_pow(k / 2);
    if k.is_multiple_of(2) {
        base
    } else {
        // ⌊sqrt(10) · 10^{(k-1)/2}⌋ = ⌊sqrt(10^k)⌋
        let v = (base as u128) * (base as u128) * 10;
        let mut r = (v as f64).sqrt() as u128;
        while r * r > v {
            r -= 1;
        }
        while (r + 1) * (r + 1) <= v {
            r += 1;
        }
        r as u64
    }
}
