//! Experiment configuration. The JSON schema is generated from these types
//! and published as `docs/experiment-config.schema.json`; parsing rejects
//! unknown fields, and `validate` runs every cross-field rule before any
//! computation starts.

use std::path::Path;

use multiples::constructions::{
    build_besicovitch_intervals, build_loosening, build_thin_blocks, build_union_example, Construction, ExampleName,
    IntervalParams, LooseningPlan, ThinPolicy, UnionParams,
};
use multiples::{FamilySpec, FiniteSet};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{config_err, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    DeConvergence,
    Oscillation,
    DifferenceDensity,
    CriterionScan,
    Toeplitz,
    Triples,
}

impl ExperimentName {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::DeConvergence => "de-convergence",
            ExperimentName::Oscillation => "oscillation",
            ExperimentName::DifferenceDensity => "difference-density",
            ExperimentName::CriterionScan => "criterion-scan",
            ExperimentName::Toeplitz => "toeplitz",
            ExperimentName::Triples => "triples",
        }
    }
}

/// A construction to run instead of a literal family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "builder", rename_all = "snake_case", deny_unknown_fields)]
pub enum BuilderConfig {
    BesicovitchIntervals {
        /// `epsilon`, `levels`, `n_est`, optional `mode` (strict, best_effort), `t1`, `min_growth`, `grid_ratio`.
        #[schemars(with = "Value")]
        params: IntervalParams,
    },
    ThinBlocks {
        /// Optional `t1`, `len1`, `growth`, `align_cap`.
        #[serde(default)]
        #[schemars(with = "Option<Value>")]
        policy: ThinPolicy,
        levels: usize,
        beta_target: f64,
    },
    Loosening {
        scales: Vec<u64>,
        /// Optional `levels`, `stride`, `grid_ratio`.
        #[serde(default)]
        #[schemars(with = "Option<Value>")]
        plan: LooseningPlan,
        n_cal: u64,
    },
    UnionExample {
        /// One of ex_4_1, EX1, EX2, ex_110, ex_000.
        name: String,
        #[serde(default)]
        #[schemars(with = "Option<Value>")]
        params: UnionParams,
    },
}

impl BuilderConfig {
    pub fn run(&self) -> multiples::Result<Construction> {
        match self {
            BuilderConfig::BesicovitchIntervals { params } => build_besicovitch_intervals(params),
            BuilderConfig::ThinBlocks { policy, levels, beta_target } => build_thin_blocks(policy, *levels, *beta_target),
            BuilderConfig::Loosening { scales, plan, n_cal } => {
                build_loosening(&FiniteSet::new(scales.clone())?, plan, *n_cal)
            }
            BuilderConfig::UnionExample { name, params } => {
                let name: ExampleName = name.parse()?;
                build_union_example(name, params)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ToeplitzConfig {
    /// Scanned positions n_lo..n_hi (half-open).
    pub positions: [i64; 2],
    /// Largest period tried; defaults to lcm(B) for finite B.
    #[serde(default)]
    pub s_max: Option<u64>,
    /// Window radius; defaults to max(4 s_max, s_max^2/2 + s_max).
    #[serde(default)]
    pub window: Option<u64>,
    /// Instead of `family`, scan this many random finite sets drawn with `seed`.
    #[serde(default)]
    pub random_sets: Option<usize>,
    #[serde(default = "default_lcm_cap")]
    pub lcm_cap: u64,
    #[serde(default = "default_max_element")]
    pub max_element: u64,
    #[serde(default = "default_max_size")]
    pub max_size: usize,
}

fn default_lcm_cap() -> u64 {
    10_000
}

fn default_max_element() -> u64 {
    100
}

fn default_max_size() -> usize {
    4
}

/// Output file names, relative to `--out` (default: the working directory).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default)]
    pub csv: Option<String>,
    #[serde(default)]
    pub json: Option<String>,
    #[serde(default)]
    pub plot_script: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentName,
    /// A family spec document (tagged by `variant`).
    #[serde(default)]
    #[schemars(with = "Option<Value>")]
    pub family: Option<FamilySpec>,
    #[serde(default)]
    pub builder: Option<BuilderConfig>,
    /// K grid, x grid or extra checkpoints, depending on the experiment.
    #[serde(default)]
    pub grid: Option<Vec<u64>>,
    #[serde(default)]
    pub epsilon_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub threshold: Option<f64>,
    /// Checkpoints below this are ignored by spread computations.
    #[serde(default)]
    pub burn_in: Option<u64>,
    #[serde(default)]
    pub toeplitz: Option<ToeplitzConfig>,
    /// Rows of the triples table; defaults to every example.
    #[serde(default)]
    pub examples: Option<Vec<String>>,
    /// Parameters shared by the example builders of the triples table.
    #[serde(default)]
    #[schemars(with = "Option<Value>")]
    pub example_params: Option<UnionParams>,
    #[serde(default)]
    pub outputs: OutputPaths,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
}

/// Row names accepted by the triples experiment besides the example builders.
pub const EXTRA_ROWS: [&str; 2] = ["intervals", "ex_101"];

pub fn schema() -> Value {
    serde_json::to_value(schemars::schema_for!(ExperimentConfig)).expect("schemas serialize")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every cross-field problem, reported together.
    pub fn validate(&self) -> CliResult<()> {
        let mut problems = Vec::new();
        if let Some(f) = &self.family {
            if let Err(e) = f.validate() {
                problems.push(format!("family: {e}"));
            }
        }
        if let Some(g) = &self.grid {
            if g.is_empty() || g[0] == 0 || g.windows(2).any(|w| w[0] >= w[1]) {
                problems.push("grid must be strictly increasing positive integers".into());
            }
        }
        if let Some(eps) = &self.epsilon_grid {
            if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
                problems.push("epsilon_grid values must lie in (0, 1)".into());
            }
        }
        if self.threads == Some(0) {
            problems.push("threads must be at least 1".into());
        }
        let source = match (&self.family, &self.builder) {
            (Some(_), Some(_)) => {
                problems.push("give either family or builder, not both".into());
                None
            }
            (Some(f), None) => Some(Source::Family(f)),
            (None, Some(b)) => Some(Source::Builder(b)),
            (None, None) => None,
        };
        let is_intervals = matches!(
            source,
            Some(Source::Family(FamilySpec::IntervalUnion { .. }))
                | Some(Source::Builder(BuilderConfig::BesicovitchIntervals { .. }))
        );
        let name = self.experiment.as_str();
        match self.experiment {
            ExperimentName::DeConvergence | ExperimentName::CriterionScan => {
                if source.is_none() {
                    problems.push(format!("{name} needs family or builder"));
                }
                if self.grid.is_none() {
                    problems.push(format!("{name} needs grid"));
                }
                if self.experiment == ExperimentName::CriterionScan && self.epsilon_grid.is_none() {
                    problems.push("criterion-scan needs epsilon_grid".into());
                }
            }
            ExperimentName::Oscillation | ExperimentName::DifferenceDensity => {
                if !is_intervals {
                    problems.push(format!(
                        "{name} needs an interval_union family or a besicovitch_intervals builder"
                    ));
                }
            }
            ExperimentName::Toeplitz => match &self.toeplitz {
                None => problems.push("toeplitz needs a toeplitz section".into()),
                Some(t) => {
                    if t.positions[0] >= t.positions[1] {
                        problems.push("toeplitz.positions must satisfy n_lo < n_hi".into());
                    }
                    match (t.random_sets, &source) {
                        (Some(_), Some(_)) => problems.push("toeplitz: random_sets excludes family and builder".into()),
                        (None, None) => problems.push("toeplitz needs family, builder or random_sets".into()),
                        (None, Some(Source::Family(f))) if !f.is_finite() && t.s_max.is_none() => {
                            problems.push("toeplitz: infinite families need s_max".into())
                        }
                        (None, Some(Source::Builder(_))) if t.s_max.is_none() => {
                            problems.push("toeplitz: built families need s_max".into())
                        }
                        _ => {}
                    }
                    if t.max_element == 0 || t.max_size == 0 {
                        problems.push("toeplitz: max_element and max_size must be positive".into());
                    }
                }
            },
            ExperimentName::Triples => {
                if source.is_some() {
                    problems.push("triples builds its own families; remove family and builder".into());
                }
                for e in self.examples.iter().flatten() {
                    if e.parse::<ExampleName>().is_err() && !EXTRA_ROWS.contains(&e.as_str()) {
                        problems.push(format!("unknown example {e:?}"));
                    }
                }
            }
        }
        if let Some(Source::Builder(BuilderConfig::UnionExample { name, .. })) = source {
            if name.parse::<ExampleName>().is_err() {
                problems.push(format!("unknown example {name:?}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(config_err(problems.join("; ")))
        }
    }
}

enum Source<'a> {
    Family(&'a FamilySpec),
    Builder(&'a BuilderConfig),
}
