//! Run configuration: the TOML schema, `key.path=value` overrides, problem
//! construction, and solver dispatch.
//!
//! A run file names one problem instance, one solver, and the seeds to
//! repeat it over:
//!
//! ```toml
//! [problem]
//! kind = "toy-1d"          # toy-1d | toy-2d | np-multiclass | fairness | alp
//! noise = 0.5
//!
//! [solver]
//! kind = "sfls"            # sfls | dfls | ovsmd-only
//! theta = 1.25
//! iterations = 2000
//! outer_limit = 30
//! r0 = { mode = "explicit", value = 2.0 }
//!
//! seeds = [0, 1, 2]
//! output = "out/toy"
//! ```
//!
//! Unknown keys are rejected everywhere, so typos fail before any work
//! starts. The starting level can also be derived from the problem's initial
//! point (`mode = "from-initial-point-margin"`), which evaluates the
//! objective there and adds a margin.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Deserialize;

use crate::error::{Result, SlevelError};
use crate::io::libsvm::{read_libsvm, DatasetMatrix};
use crate::levelset::{
    dfls_solve, sfls_solve, sfls_solve_reference, DflsConfig, LevelTrace, SflsConfig, StopReason,
    TraceEntry,
};
use crate::oracle::{run_ovsmd, OracleConfig};
use crate::problem::{compute_metrics, Reference, SaddleFunction, SoecProblem};
use crate::problems::{
    build_alp, build_fairness, build_np_multiclass, build_toy, AlpSpec, FairnessSpec,
    MulticlassNpSpec, PerishableMdpSpec, ToyVariant,
};
use crate::rng;

/// A full experiment description, as loaded from a TOML file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    /// Seeds to repeat the run over; one metrics table per seed.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Output directory for metrics tables and the run summary.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Optimality reference for relative gaps.
    #[serde(default)]
    pub reference: Option<ReferenceConfig>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(config_err("seeds", "need at least one seed"));
        }
        let mut seen = BTreeSet::new();
        for s in &self.seeds {
            if !seen.insert(s) {
                return Err(config_err("seeds", &format!("seed {s} appears twice")));
            }
        }
        self.problem.validate()?;
        self.solver.validate()?;
        if let Some(r) = &self.reference {
            if !(r.baseline > r.f_star) {
                return Err(config_err(
                    "reference",
                    &format!("baseline {} must exceed f_star {}", r.baseline, r.f_star),
                ));
            }
        }
        Ok(())
    }

    /// The optimality reference, if one was configured.
    pub fn optimality_reference(&self) -> Result<Option<Reference>> {
        self.reference
            .as_ref()
            .map(|r| Reference::new(r.f_star, r.baseline))
            .transpose()
    }
}

/// Reference values for the relative-gap column.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Optimal value in the problem's minimization orientation.
    pub f_star: f64,
    /// Gap normalizer: gaps are (f₀ − f*)/(baseline − f*).
    pub baseline: f64,
}

/// Problem selection; `kind` picks the family, the remaining keys are the
/// family's parameters.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemConfig {
    #[serde(rename = "toy-1d")]
    Toy1d(ToyParams),
    #[serde(rename = "toy-2d")]
    Toy2d(ToyParams),
    NpMulticlass(NpParams),
    Fairness(FairnessParams),
    Alp(AlpParams),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyParams {
    /// Amplitude of the uniform noise added to every sampled value.
    #[serde(default)]
    pub noise: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NpParams {
    /// LIBSVM file with one class per label. Mutually exclusive with the
    /// synthetic-instance fields below.
    #[serde(default)]
    pub data: Option<PathBuf>,
    /// Feature-dimension override for the data file.
    #[serde(default)]
    pub feature_dim: Option<usize>,
    /// Synthetic instance: number of Gaussian classes.
    #[serde(default)]
    pub classes: Option<usize>,
    #[serde(default)]
    pub points_per_class: Option<usize>,
    #[serde(default)]
    pub dim: Option<usize>,
    /// Distance of the synthetic class means from the origin.
    #[serde(default = "default_np_spread")]
    pub spread: f64,
    /// Ball radius λ of every per-class model.
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Seed for synthetic data generation.
    #[serde(default)]
    pub build_seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FairnessParams {
    pub n_labeled: usize,
    pub n_group: usize,
    pub dim: usize,
    /// Disparity budget κ ∈ (0, 1].
    pub kappa: f64,
    /// Classifier ball radius λ.
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default)]
    pub build_seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlpParams {
    #[serde(default = "default_cost_holding")]
    pub cost_holding: f64,
    #[serde(default = "default_cost_disposal")]
    pub cost_disposal: f64,
    #[serde(default = "default_cost_backlog")]
    pub cost_backlog: f64,
    /// Number of sampled state-action constraints.
    #[serde(default = "default_alp_constraints")]
    pub constraints: usize,
    /// Freeze the demand distribution to this many shared draws, making the
    /// constraints finite sums with exact evaluators.
    #[serde(default)]
    pub frozen_samples: Option<usize>,
    #[serde(default)]
    pub build_seed: u64,
}

impl ProblemConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            ProblemConfig::Toy1d(p) | ProblemConfig::Toy2d(p) => {
                if !(p.noise >= 0.0 && p.noise.is_finite()) {
                    return Err(config_err("problem.noise", &format!("must be ≥ 0, got {}", p.noise)));
                }
            }
            ProblemConfig::NpMulticlass(p) => {
                if p.data.is_some() {
                    if p.classes.is_some()
                        || p.points_per_class.is_some()
                        || p.dim.is_some()
                        || p.build_seed.is_some()
                    {
                        return Err(config_err(
                            "problem.data",
                            "is mutually exclusive with the synthetic fields \
                             (classes, points_per_class, dim, build_seed)",
                        ));
                    }
                } else {
                    if p.feature_dim.is_some() {
                        return Err(config_err(
                            "problem.feature_dim",
                            "only applies when loading from a data file",
                        ));
                    }
                    for (key, value) in [
                        ("problem.classes", p.classes),
                        ("problem.points_per_class", p.points_per_class),
                        ("problem.dim", p.dim),
                    ] {
                        match value {
                            None => {
                                return Err(config_err(
                                    key,
                                    "is required for a synthetic instance (or set problem.data)",
                                ))
                            }
                            Some(0) => return Err(config_err(key, "must be ≥ 1")),
                            Some(_) => {}
                        }
                    }
                    if p.classes == Some(1) {
                        return Err(config_err("problem.classes", "need at least 2 classes"));
                    }
                    if !(p.spread >= 0.0 && p.spread.is_finite()) {
                        return Err(config_err(
                            "problem.spread",
                            &format!("must be ≥ 0, got {}", p.spread),
                        ));
                    }
                }
                if !(p.radius > 0.0 && p.radius.is_finite()) {
                    return Err(config_err(
                        "problem.radius",
                        &format!("must be positive, got {}", p.radius),
                    ));
                }
            }
            ProblemConfig::Fairness(p) => {
                for (key, value) in [
                    ("problem.n_labeled", p.n_labeled),
                    ("problem.n_group", p.n_group),
                    ("problem.dim", p.dim),
                ] {
                    if value == 0 {
                        return Err(config_err(key, "must be ≥ 1"));
                    }
                }
                if !(p.kappa > 0.0 && p.kappa <= 1.0) {
                    return Err(config_err(
                        "problem.kappa",
                        &format!("must lie in (0, 1], got {}", p.kappa),
                    ));
                }
                if !(p.radius > 0.0 && p.radius.is_finite()) {
                    return Err(config_err(
                        "problem.radius",
                        &format!("must be positive, got {}", p.radius),
                    ));
                }
            }
            ProblemConfig::Alp(p) => {
                for (key, value) in [
                    ("problem.cost_holding", p.cost_holding),
                    ("problem.cost_disposal", p.cost_disposal),
                    ("problem.cost_backlog", p.cost_backlog),
                ] {
                    if !(value > 0.0 && value.is_finite()) {
                        return Err(config_err(key, &format!("must be positive, got {value}")));
                    }
                }
                if p.constraints == 0 {
                    return Err(config_err("problem.constraints", "must be ≥ 1"));
                }
                if p.frozen_samples == Some(0) {
                    return Err(config_err("problem.frozen_samples", "must be ≥ 1"));
                }
            }
        }
        Ok(())
    }

    /// Construct the problem instance this configuration describes.
    pub fn build(&self) -> Result<SoecProblem> {
        self.validate()?;
        match self {
            ProblemConfig::Toy1d(p) => build_toy(ToyVariant::OneD, p.noise),
            ProblemConfig::Toy2d(p) => build_toy(ToyVariant::TwoD, p.noise),
            ProblemConfig::NpMulticlass(p) => {
                let spec = match &p.data {
                    Some(path) => {
                        let matrix = read_libsvm(path, p.feature_dim)?;
                        np_spec_from_dataset(&matrix, p.radius)?
                    }
                    None => MulticlassNpSpec::synthetic_gaussians(
                        p.classes.expect("validated above"),
                        p.points_per_class.expect("validated above"),
                        p.dim.expect("validated above"),
                        p.spread,
                        p.radius,
                        p.build_seed.unwrap_or(0),
                    ),
                };
                build_np_multiclass(&spec)
            }
            ProblemConfig::Fairness(p) => {
                let spec = FairnessSpec::synthetic(
                    p.n_labeled,
                    p.n_group,
                    p.dim,
                    p.kappa,
                    p.radius,
                    p.build_seed,
                );
                build_fairness(&spec)
            }
            ProblemConfig::Alp(p) => {
                let mdp =
                    PerishableMdpSpec::benchmark(p.cost_holding, p.cost_disposal, p.cost_backlog);
                let mut spec = AlpSpec::benchmark(mdp, p.constraints);
                spec.frozen_demand_samples = p.frozen_samples;
                build_alp(&spec, p.build_seed)
            }
        }
    }
}

/// Group a dataset's rows by class into a multi-class instance. Rows are
/// densified one at a time; the per-class model radius is λ.
pub fn np_spec_from_dataset(matrix: &DatasetMatrix, radius: f64) -> Result<MulticlassNpSpec> {
    if matrix.num_classes() < 2 {
        return Err(SlevelError::InvalidArgument(format!(
            "a multi-class dataset needs at least 2 label values, found {}",
            matrix.num_classes()
        )));
    }
    let mut classes = vec![Vec::new(); matrix.num_classes()];
    let mut dense = vec![0.0; matrix.feature_dim()];
    for row in 0..matrix.rows() {
        matrix.dense_row_into(row, &mut dense);
        classes[matrix.label(row)].push(dense.clone());
    }
    Ok(MulticlassNpSpec { classes, radius })
}

/// Solver selection and its parameters.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Level-update damping θ > 1.
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Oracle iterations per outer step (inner iterations for the
    /// deterministic baseline).
    pub iterations: usize,
    /// Step constant c in γₜ = 1/(c·√(t+1)).
    #[serde(default = "default_step_constant")]
    pub step_constant: f64,
    /// Scenario draws per stochastic subgradient.
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Total confidence budget δ ∈ (0, 1).
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Outer-iteration limit K.
    pub outer_limit: usize,
    /// Halt when the certified upper bound reaches −eps_opt.
    #[serde(default)]
    pub eps_opt: Option<f64>,
    /// Oracle choice inside the level-set loop; `smd` swaps in the
    /// exact-evaluation reference oracle. Only valid with `kind = "sfls"`.
    #[serde(default)]
    pub oracle: Option<OracleKind>,
    /// How to choose the starting level r⁽⁰⁾.
    pub r0: LevelStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Sfls,
    Dfls,
    OvsmdOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Ovsmd,
    Smd,
}

/// Starting-level policy.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum LevelStart {
    /// A fixed level value.
    Explicit(ExplicitLevel),
    /// Objective value at the problem's initial point, plus a margin.
    FromInitialPointMargin(MarginLevel),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitLevel {
    pub value: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginLevel {
    #[serde(default)]
    pub margin: f64,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 1.0 && self.theta.is_finite()) {
            return Err(config_err("solver.theta", &format!("must exceed 1, got {}", self.theta)));
        }
        if self.iterations == 0 {
            return Err(config_err("solver.iterations", "must be ≥ 1"));
        }
        if !(self.step_constant > 0.0 && self.step_constant.is_finite()) {
            return Err(config_err(
                "solver.step_constant",
                &format!("must be positive, got {}", self.step_constant),
            ));
        }
        if self.batch_size == 0 {
            return Err(config_err("solver.batch_size", "must be ≥ 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(config_err(
                "solver.delta",
                &format!("must lie in (0, 1), got {}", self.delta),
            ));
        }
        if self.outer_limit == 0 {
            return Err(config_err("solver.outer_limit", "must be ≥ 1"));
        }
        if let Some(e) = self.eps_opt {
            if !(e > 0.0 && e.is_finite()) {
                return Err(config_err("solver.eps_opt", &format!("must be positive, got {e}")));
            }
        }
        if self.oracle.is_some() && self.kind != SolverKind::Sfls {
            return Err(config_err(
                "solver.oracle",
                "the oracle choice only applies to the sfls solver",
            ));
        }
        match &self.r0 {
            LevelStart::Explicit(e) if !e.value.is_finite() => {
                return Err(config_err("solver.r0.value", &format!("must be finite, got {}", e.value)));
            }
            LevelStart::FromInitialPointMargin(m) if !m.margin.is_finite() => {
                return Err(config_err(
                    "solver.r0.margin",
                    &format!("must be finite, got {}", m.margin),
                ));
            }
            _ => {}
        }
        Ok(())
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_theta() -> f64 {
    1.1
}
fn default_step_constant() -> f64 {
    1.0
}
fn default_batch_size() -> usize {
    1000
}
fn default_delta() -> f64 {
    0.1
}
fn default_np_spread() -> f64 {
    0.6
}
fn default_radius() -> f64 {
    5.0
}
fn default_cost_holding() -> f64 {
    2.0
}
fn default_cost_disposal() -> f64 {
    10.0
}
fn default_cost_backlog() -> f64 {
    10.0
}
fn default_alp_constraints() -> usize {
    50
}

fn config_err(path: &str, message: &str) -> SlevelError {
    SlevelError::Config(format!("{path}: {message}"))
}

/// Load and validate a run file, applying `key.path=value` overrides.
pub fn load_run_config(path: impl AsRef<Path>, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_run_config(&text, overrides)
}

/// Parse TOML text into a validated [`RunConfig`].
pub fn parse_run_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let config: RunConfig = if overrides.is_empty() {
        // The direct path keeps line/column information in schema errors.
        toml::from_str(text).map_err(|e| SlevelError::Config(e.to_string()))?
    } else {
        let mut value: toml::Value =
            toml::from_str(text).map_err(|e| SlevelError::Config(e.to_string()))?;
        for spec in overrides {
            apply_override(&mut value, spec)?;
        }
        value.try_into().map_err(|e: toml::de::Error| SlevelError::Config(e.to_string()))?
    };
    config.validate()?;
    Ok(config)
}

/// Apply one `key.path=value` override to a parsed TOML document. The
/// right-hand side is read as a TOML literal (so `theta=1.5`, `seeds=[1,2]`,
/// and `kind="dfls"` all work); anything that fails to parse becomes a
/// string, which lets bare words stand for themselves (`kind=dfls`).
pub fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| {
        SlevelError::Config(format!("override '{spec}' must have the form key.path=value"))
    })?;
    let (path, raw) = (path.trim(), raw.trim());
    let segments: Vec<&str> = path.split('.').collect();
    if path.is_empty() || segments.iter().any(|s| s.is_empty()) {
        return Err(SlevelError::Config(format!("override '{spec}' has an empty key segment")));
    }

    let mut node = &mut *root;
    for (depth, segment) in segments[..segments.len() - 1].iter().enumerate() {
        let table = node.as_table_mut().ok_or_else(|| {
            SlevelError::Config(format!(
                "override '{path}': '{}' is not a table",
                segments[..depth].join(".")
            ))
        })?;
        node = table
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
    }
    let table = node.as_table_mut().ok_or_else(|| {
        SlevelError::Config(format!(
            "override '{path}': '{}' is not a table",
            segments[..segments.len() - 1].join(".")
        ))
    })?;
    table.insert(segments[segments.len() - 1].to_string(), parse_override_value(raw));
    Ok(())
}

fn parse_override_value(raw: &str) -> toml::Value {
    // `FromStr` reads a single TOML value expression; bare words fail and
    // fall back to strings.
    raw.parse().unwrap_or_else(|_| toml::Value::String(raw.to_string()))
}

/// Resolve the starting level for one seed.
fn resolve_level_start(problem: &SoecProblem, solver: &SolverConfig, seed: u64) -> Result<f64> {
    match &solver.r0 {
        LevelStart::Explicit(e) => Ok(e.value),
        LevelStart::FromInitialPointMargin(m) => {
            let x0 = match problem.initial_point() {
                Some(x) => x.to_vec(),
                None => problem.domain().omega_argmin(),
            };
            // A dedicated evaluation tag keeps this off the per-iteration
            // metric streams.
            let mode = problem.metrics_mode(seed, u64::MAX);
            let values = problem.values(&x0, mode)?;
            Ok(values[0] + m.margin)
        }
    }
}

/// Run the configured solver for one seed.
pub fn solve_configured(
    problem: &SoecProblem,
    solver: &SolverConfig,
    seed: u64,
    reference: Option<&Reference>,
) -> Result<LevelTrace> {
    solver.validate()?;
    let r0 = resolve_level_start(problem, solver, seed)?;
    match solver.kind {
        SolverKind::Sfls => {
            let oracle = OracleConfig::new(solver.iterations, solver.step_constant)?
                .with_batch(solver.batch_size)?;
            let mut config = SflsConfig::new(r0, solver.theta, solver.outer_limit, oracle)?
                .with_delta(solver.delta)?;
            if let Some(e) = solver.eps_opt {
                config = config.with_eps_opt(e)?;
            }
            match solver.oracle.unwrap_or(OracleKind::Ovsmd) {
                OracleKind::Ovsmd => sfls_solve(problem, &config, seed, reference),
                OracleKind::Smd => sfls_solve_reference(problem, &config, seed, reference),
            }
        }
        SolverKind::Dfls => {
            let mut config =
                DflsConfig::new(r0, solver.outer_limit, solver.iterations, solver.step_constant)?;
            if let Some(e) = solver.eps_opt {
                config = config.with_eps_opt(e)?;
            }
            dfls_solve(problem, &config, reference)
        }
        SolverKind::OvsmdOnly => {
            let oracle = OracleConfig::new(solver.iterations, solver.step_constant)?
                .with_batch(solver.batch_size)?;
            let start = Instant::now();
            let saddle = SaddleFunction::new(problem, r0);
            let run = run_ovsmd(&saddle, &oracle, rng::mix3(seed, rng::salt::ORACLE, 0))?;
            let metrics =
                compute_metrics(problem, &run.x_bar, problem.metrics_mode(seed, 0), reference)?;
            Ok(LevelTrace {
                entries: vec![TraceEntry {
                    outer_iter: 0,
                    r: r0,
                    u_hat: run.upper,
                    delta_k: solver.delta,
                    x: run.x_bar,
                    metrics,
                    grad_iters: oracle.iterations as u64,
                    data_passes: run.scenarios as f64 / problem.dataset_size(),
                    wall_ms: start.elapsed().as_secs_f64() * 1e3,
                }],
                stop: StopReason::OuterLimit,
                warnings: Vec::new(),
            })
        }
    }
}
