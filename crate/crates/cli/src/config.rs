//! Experiment configuration files (TOML).
//!
//! A file holds either a `[quadrature]` or a `[pinn]` section, never both,
//! plus an optional `[output]` section. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use starrad::net::{Activation, NetworkSpec};
use starrad::pde::{LossWeights, Pde, Problem};
use starrad::rad::{Criterion, DensityParams};
use starrad::train::TrainConfig;
use starrad::BenchFunction;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub quadrature: Option<QuadratureSection>,
    pub pinn: Option<PinnSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    pub function: String,
    /// Samples per sub-interval for the `|f''|` maxima.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Single run: trapezoid budget and sub-interval count.
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub sweep: Option<SweepSection>,
}

/// Every `N` in `[max(k, n_min), n_max]` for every listed `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub k: Vec<usize>,
    #[serde(default = "default_n_min")]
    pub n_min: usize,
    pub n_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinnSection {
    pub problem: String,
    pub hidden: Vec<usize>,
    pub activation: String,
    #[serde(default = "default_criteria")]
    pub criteria: Vec<String>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub c: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub n_collocation: usize,
    pub pool_size: usize,
    #[serde(default = "default_period")]
    pub resample_period: usize,
    #[serde(default = "one")]
    pub lambda_initial: f64,
    #[serde(default = "one")]
    pub lambda_boundary: f64,
    #[serde(default)]
    pub lambda_regularizer: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Map each input coordinate onto [-1, 1] ahead of the first layer.
    #[serde(default)]
    pub normalize_inputs: bool,
    /// Overrides of the problem's named constants.
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default)]
    pub emit_plots: bool,
    /// Write measured wall-clock seconds; when off the column is all zero
    /// so that output files are byte-identical across runs.
    #[serde(default = "yes")]
    pub timing: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            emit_plots: false,
            timing: true,
        }
    }
}

fn default_samples() -> usize {
    starrad::quad::DEFAULT_SAMPLES
}
fn default_n_min() -> usize {
    1
}
fn default_criteria() -> Vec<String> {
    Criterion::ALL.iter().map(|c| c.name().to_string()).collect()
}
fn default_tau() -> f64 {
    0.5
}
fn default_period() -> usize {
    1000
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

/// The validated content of a configuration file.
#[derive(Clone, Debug)]
pub enum Mode {
    Quadrature(QuadraturePlan),
    Pinn(PinnPlan),
}

#[derive(Clone, Debug, PartialEq)]
pub enum QuadratureRuns {
    Single { n: usize, k: usize },
    Sweep { pairs: Vec<(usize, usize)> },
}

#[derive(Clone, Debug)]
pub struct QuadraturePlan {
    pub function: BenchFunction,
    pub samples: usize,
    pub runs: QuadratureRuns,
}

#[derive(Clone, Debug)]
pub struct PinnPlan {
    pub criteria: Vec<Criterion>,
    pub seeds: Vec<u64>,
    /// Template run; `criterion` and `seed` are replaced per run.
    pub template: TrainConfig<f64>,
}

impl PinnPlan {
    pub fn runs(&self) -> Vec<TrainConfig<f64>> {
        self.criteria
            .iter()
            .flat_map(|c| {
                self.seeds.iter().map(move |s| TrainConfig {
                    criterion: *c,
                    seed: *s,
                    ..self.template.clone()
                })
            })
            .collect()
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).context("malformed configuration")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn mode(&self) -> Result<Mode> {
        match (&self.quadrature, &self.pinn) {
            (Some(q), None) => Ok(Mode::Quadrature(q.plan()?)),
            (None, Some(p)) => Ok(Mode::Pinn(p.plan()?)),
            (Some(_), Some(_)) => bail!("configuration has both [quadrature] and [pinn]; exactly one is allowed"),
            (None, None) => bail!("configuration needs a [quadrature] or a [pinn] section"),
        }
    }
}

impl QuadratureSection {
    pub fn plan(&self) -> Result<QuadraturePlan> {
        let function: BenchFunction = self.function.parse()?;
        if self.samples < 2 {
            bail!("samples must be at least 2");
        }
        let runs = match (self.n, self.k, &self.sweep) {
            (Some(n), Some(k), None) => {
                check_pair(n, k)?;
                QuadratureRuns::Single { n, k }
            }
            (None, None, Some(s)) => {
                if s.k.is_empty() {
                    bail!("sweep needs at least one k");
                }
                let mut pairs = Vec::new();
                for &k in &s.k {
                    if k == 0 {
                        bail!("sweep k values must be positive");
                    }
                    for n in s.n_min.max(k)..=s.n_max {
                        pairs.push((n, k));
                    }
                }
                if pairs.is_empty() {
                    bail!("sweep range [{}, {}] is empty for every k", s.n_min, s.n_max);
                }
                QuadratureRuns::Sweep { pairs }
            }
            (_, _, Some(_)) => bail!("give either n and k or a sweep, not both"),
            _ => bail!("quadrature needs both n and k, or a sweep"),
        };
        Ok(QuadraturePlan {
            function,
            samples: self.samples,
            runs,
        })
    }
}

fn check_pair(n: usize, k: usize) -> Result<()> {
    if k == 0 || n == 0 {
        bail!("n and k must be positive");
    }
    if k > n {
        bail!("k ({k}) may not exceed n ({n})");
    }
    Ok(())
}

impl PinnSection {
    pub fn plan(&self) -> Result<PinnPlan> {
        let problem: Problem<f64> = Problem::build(&self.problem, &self.constants)?;
        let activation: Activation = self.activation.parse()?;
        let mut spec = NetworkSpec::new(problem.domain().dim(), self.hidden.clone(), activation)?;
        if self.normalize_inputs {
            let bounds: Vec<(f64, f64)> = problem.domain().bounds().iter().map(|iv| (iv.lo(), iv.hi())).collect();
            spec = spec.with_input_bounds(&bounds)?;
        }
        let criteria = parse_criteria(&self.criteria)?;
        if self.seeds.is_empty() {
            bail!("at least one seed is required");
        }
        let template = TrainConfig {
            problem,
            spec,
            criterion: criteria[0],
            density: DensityParams::new(self.tau, self.c)?,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            n_collocation: self.n_collocation,
            pool_size: self.pool_size,
            resample_period: self.resample_period,
            weights: LossWeights {
                initial: self.lambda_initial,
                boundary: self.lambda_boundary,
                regularizer: self.lambda_regularizer,
            },
            seed: self.seeds[0],
        };
        template.validate()?;
        Ok(PinnPlan {
            criteria,
            seeds: self.seeds.clone(),
            template,
        })
    }
}

/// Parses criterion names, rejecting empty lists and duplicates.
pub fn parse_criteria<S: AsRef<str>>(names: &[S]) -> Result<Vec<Criterion>> {
    if names.is_empty() {
        bail!("at least one criterion is required");
    }
    let mut out: Vec<Criterion> = Vec::new();
    for n in names {
        let c: Criterion = n.as_ref().trim().parse()?;
        if out.contains(&c) {
            bail!("criterion {c} listed twice");
        }
        out.push(c);
    }
    Ok(out)
}

/// Parses a comma-separated list such as `0,1,2`.
pub fn parse_seed_list(text: &str) -> Result<Vec<u64>> {
    let seeds = text
        .split(',')
        .map(|s| s.trim().parse::<u64>().with_context(|| format!("invalid seed `{s}`")))
        .collect::<Result<Vec<_>>>()?;
    if seeds.is_empty() {
        bail!("seed list is empty");
    }
    Ok(seeds)
}
