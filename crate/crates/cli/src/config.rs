//! Run configuration: a TOML file with one table per experiment, presets
//! that fill unset keys, and a canonical emitter for reproducible runs.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use blockgrad::experiments::{
    ComparatorConfig, DiagnosticsConfig, LayerwiseConfig, MinNormConfig, NonconvexConfig,
    PartitionSpec, RegretConfig, StabilityConfig,
};
use blockgrad::models::{Activation, FeatureBlock, StreamSpec};
use blockgrad::optim::DEFAULT_EPSILON;
use blockgrad::schedules::{MomentumSchedule, StepsizeSchedule};
use blockgrad::Error;
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_SEED: u64 = 42;

fn bad(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Regret,
    Nonconvex,
    Minnorm,
    Layerwise,
    Stability,
    Diag,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Regret,
        Experiment::Nonconvex,
        Experiment::Minnorm,
        Experiment::Layerwise,
        Experiment::Stability,
        Experiment::Diag,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Regret => "regret",
            Experiment::Nonconvex => "nonconvex",
            Experiment::Minnorm => "minnorm",
            Experiment::Layerwise => "layerwise",
            Experiment::Stability => "stability",
            Experiment::Diag => "diag",
        }
    }

    /// Default artifact written when `--out` is not given.
    pub fn default_output(self) -> &'static str {
        match self {
            Experiment::Regret => "regret.csv",
            Experiment::Nonconvex => "nonconvex.csv",
            Experiment::Minnorm => "minnorm.csv",
            Experiment::Layerwise => "layerwise.csv",
            Experiment::Stability => "stability.csv",
            Experiment::Diag => "diagnostics.csv",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| bad("experiment", format!("unknown experiment `{s}`")))
    }
}

/// Default values for unset keys.
///
/// `default` uses `ε = 1e-3`; `paper` copies the published synthetic setups
/// (including `ε = 1e-8`); `quick` is a reduced `paper` run for smoke tests;
/// `check` is `paper` plus pass/fail assertions on the outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preset {
    #[default]
    Default,
    Paper,
    Quick,
    Check,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Default => "default",
            Preset::Paper => "paper",
            Preset::Quick => "quick",
            Preset::Check => "check",
        }
    }

    /// Accepts `NAME` or `EXPERIMENT-NAME` (e.g. `regret-paper`).
    pub fn parse_for(
        s: &str,
        experiment: Option<Experiment>,
    ) -> Result<(Preset, Option<Experiment>), Error> {
        let (exp, name) = match s.split_once('-') {
            Some((e, n)) => (
                Some(
                    e.parse::<Experiment>()
                        .map_err(|_| bad("preset", format!("unknown preset `{s}`")))?,
                ),
                n,
            ),
            None => (None, s),
        };
        if let (Some(a), Some(b)) = (exp, experiment) {
            if a != b {
                return Err(bad(
                    "preset",
                    format!("preset `{s}` does not belong to experiment `{b}`"),
                ));
            }
        }
        let preset = match name {
            "default" => Preset::Default,
            "paper" => Preset::Paper,
            "quick" => Preset::Quick,
            "check" => Preset::Check,
            _ => return Err(bad("preset", format!("unknown preset `{s}`"))),
        };
        Ok((preset, exp.or(experiment)))
    }

    fn eps(self) -> f64 {
        match self {
            Preset::Default => DEFAULT_EPSILON,
            _ => 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Regret(RegretConfig),
    Nonconvex(NonconvexConfig),
    Minnorm {
        config: MinNormConfig,
        /// CSV file with `(X, y)`; a Gaussian instance when absent.
        data: Option<PathBuf>,
    },
    Layerwise(LayerwiseConfig),
    Stability(StabilityConfig),
    Diag(DiagnosticsConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub preset: Preset,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub threads: Option<usize>,
    pub job: Job,
}

/// Values given on the command line; they take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub experiment: Option<Experiment>,
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<String>,
    preset: Option<String>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
    threads: Option<usize>,
    regret: Option<RawRegret>,
    nonconvex: Option<RawNonconvex>,
    minnorm: Option<RawMinnorm>,
    layerwise: Option<RawLayerwise>,
    stability: Option<RawStability>,
    diag: Option<RawDiag>,
    stream: Option<RawStream>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegret {
    horizon: Option<usize>,
    repetitions: Option<usize>,
    partitions: Option<Vec<String>>,
    eta: Option<f64>,
    epsilon: Option<f64>,
    comparator_max_iters: Option<usize>,
    comparator_window: Option<usize>,
    comparator_tol: Option<f64>,
    comparator_eta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNonconvex {
    steps: Option<usize>,
    repetitions: Option<usize>,
    partitions: Option<Vec<String>>,
    weight_seq: Option<String>,
    momentum: Option<String>,
    stepsize: Option<String>,
    epsilon: Option<f64>,
    pool_size: Option<usize>,
    stride: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMinnorm {
    n: Option<usize>,
    d: Option<usize>,
    partition: Option<String>,
    iterations: Option<usize>,
    tolerance: Option<f64>,
    eta: Option<f64>,
    epsilon: Option<f64>,
    data: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayerwise {
    layers: Option<usize>,
    d: Option<usize>,
    n: Option<usize>,
    activation: Option<String>,
    slope: Option<f64>,
    iterations: Option<usize>,
    tolerance: Option<f64>,
    eta: Option<f64>,
    epsilon: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStability {
    n: Option<usize>,
    partitions: Option<Vec<String>>,
    steps: Option<usize>,
    repetitions: Option<usize>,
    probes: Option<usize>,
    eta: Option<f64>,
    epsilon: Option<f64>,
    beta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiag {
    n: Option<usize>,
    epochs: Option<usize>,
    partition: Option<String>,
    eta: Option<f64>,
    beta: Option<f64>,
    epsilon: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStream {
    blocks: Vec<RawFeatureBlock>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeatureBlock {
    width: usize,
    prob: f64,
    mean: f64,
    std: f64,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn partitions(key: &str, v: &[String]) -> Result<Vec<PartitionSpec>, Error> {
    if v.is_empty() {
        return Err(bad(key, "must not be empty"));
    }
    v.iter()
        .map(|s| {
            s.parse::<PartitionSpec>()
                .map_err(|e| bad(key, e.to_string()))
        })
        .collect()
}

fn positive(key: &str, v: f64) -> Result<f64, Error> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(bad(key, format!("must be positive, got {v}")))
    }
}

fn at_least_one(key: &str, v: usize) -> Result<usize, Error> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(bad(key, "must be at least 1"))
    }
}

fn activation(name: &str, slope: f64) -> Result<Activation, Error> {
    match name {
        "leaky_relu" => Activation::leaky_relu(slope),
        "tanh" => Ok(Activation::Tanh),
        "identity" => Ok(Activation::Identity),
        _ => Err(bad(
            "activation",
            format!("expected leaky_relu, tanh or identity, got `{name}`"),
        )),
    }
}

fn preset_job(experiment: Experiment, preset: Preset, seed: u64) -> Result<Job, Error> {
    let eps = preset.eps();
    let quick = preset == Preset::Quick;
    Ok(match experiment {
        Experiment::Regret => {
            let mut c = RegretConfig::paper(seed);
            c.eps = eps;
            if quick {
                c.horizon = 200;
                c.repetitions = 10;
            }
            Job::Regret(c)
        }
        Experiment::Nonconvex => {
            let mut c = NonconvexConfig::paper(seed);
            c.eps = eps;
            if quick {
                c.steps = 200;
                c.repetitions = 2;
                c.pool_size = 2000;
            }
            Job::Nonconvex(c)
        }
        Experiment::Minnorm => {
            let mut c = MinNormConfig::new(5, 20, PartitionSpec::Single, seed);
            c.eps = eps;
            Job::Minnorm {
                config: c,
                data: None,
            }
        }
        Experiment::Layerwise => {
            let mut c = LayerwiseConfig::new(2, 8, 4, 0.1, seed)?;
            c.eps = eps;
            Job::Layerwise(c)
        }
        Experiment::Stability => {
            let mut c = StabilityConfig::paper(seed);
            c.eps = eps;
            if quick {
                c.steps = 200;
                c.repetitions = 5;
            }
            Job::Stability(c)
        }
        Experiment::Diag => {
            let mut c = DiagnosticsConfig::paper(seed);
            c.eps = eps;
            if quick {
                c.n = 200;
                c.epochs = 2;
            }
            Job::Diag(c)
        }
    })
}

fn apply_stream(target: &mut StreamSpec, raw: Option<RawStream>) -> Result<(), Error> {
    if let Some(raw) = raw {
        *target = StreamSpec {
            blocks: raw
                .blocks
                .into_iter()
                .map(|b| FeatureBlock {
                    width: b.width,
                    prob: b.prob,
                    mean_scale: b.mean,
                    std: b.std,
                })
                .collect(),
        };
        target.validate()?;
    }
    Ok(())
}

fn resolve(raw: RawConfig, ov: Overrides) -> Result<RunConfig, Error> {
    let file_experiment = raw
        .experiment
        .as_deref()
        .map(str::parse::<Experiment>)
        .transpose()?;
    if let (Some(a), Some(b)) = (file_experiment, ov.experiment) {
        if a != b {
            return Err(bad(
                "experiment",
                format!("config is for `{a}`, but `{b}` was requested"),
            ));
        }
    }
    let mut experiment = ov.experiment.or(file_experiment);
    let preset_text = ov.preset.or(raw.preset);
    let preset = match preset_text {
        Some(p) => {
            let (preset, exp) = Preset::parse_for(&p, experiment)?;
            experiment = exp;
            preset
        }
        None => Preset::Default,
    };
    let experiment = experiment.ok_or_else(|| bad("experiment", "no experiment selected"))?;
    let seed = ov.seed.or(raw.seed).unwrap_or(DEFAULT_SEED);
    let threads = ov.threads.or(raw.threads);
    if threads == Some(0) {
        return Err(bad("threads", "must be at least 1"));
    }

    let mut job = preset_job(experiment, preset, seed)?;
    match &mut job {
        Job::Regret(c) => {
            let r = raw.regret.unwrap_or_default();
            set(&mut c.horizon, r.horizon);
            set(&mut c.repetitions, r.repetitions);
            if let Some(p) = r.partitions {
                c.partitions = partitions("partitions", &p)?;
            }
            set(&mut c.eta, r.eta);
            set(&mut c.eps, r.epsilon);
            let cmp: &mut ComparatorConfig = &mut c.comparator;
            set(&mut cmp.max_iters, r.comparator_max_iters);
            set(&mut cmp.window, r.comparator_window);
            set(&mut cmp.tol, r.comparator_tol);
            set(&mut cmp.eta, r.comparator_eta);
            positive("comparator_eta", cmp.eta)?;
            at_least_one("comparator_window", cmp.window)?;
            apply_stream(&mut c.stream, raw.stream)?;
            c.validate()?;
        }
        Job::Nonconvex(c) => {
            let r = raw.nonconvex.unwrap_or_default();
            set(&mut c.steps, r.steps);
            set(&mut c.repetitions, r.repetitions);
            if let Some(p) = r.partitions {
                c.partitions = partitions("partitions", &p)?;
            }
            if let Some(w) = r.weight_seq {
                c.weights = w.parse()?;
            }
            if let Some(m) = r.momentum {
                c.momentum = m.parse()?;
            }
            match r.stepsize {
                Some(s) => c.stepsize = StepsizeSchedule::parse(&s, c.momentum)?,
                None => {
                    if let StepsizeSchedule::BiasCorrectedInvSqrt { eta, .. } = c.stepsize {
                        c.stepsize = StepsizeSchedule::bias_corrected(eta, c.momentum)?;
                    }
                }
            }
            set(&mut c.eps, r.epsilon);
            set(&mut c.pool_size, r.pool_size);
            set(&mut c.stride, r.stride);
            apply_stream(&mut c.stream, raw.stream)?;
            c.validate()?;
        }
        Job::Minnorm { config: c, data } => {
            let r = raw.minnorm.unwrap_or_default();
            set(&mut c.n, r.n);
            set(&mut c.d, r.d);
            if let Some(p) = r.partition {
                c.partition = p
                    .parse()
                    .map_err(|e: Error| bad("partition", e.to_string()))?;
            }
            set(&mut c.iterations, r.iterations);
            set(&mut c.tolerance, r.tolerance);
            set(&mut c.eta, r.eta);
            set(&mut c.eps, r.epsilon);
            *data = r.data;
            if data.is_none() {
                at_least_one("n", c.n)?;
                at_least_one("d", c.d)?;
                c.partition
                    .build(c.d)
                    .map_err(|e| bad("partition", e.to_string()))?;
            }
            positive("eta", c.eta)?;
            if !(c.eps.is_finite() && c.eps > 0.0) {
                return Err(bad("epsilon", format!("must be positive, got {}", c.eps)));
            }
            if !c.tolerance.is_finite() {
                return Err(bad("tolerance", "must be finite"));
            }
        }
        Job::Layerwise(c) => {
            let r = raw.layerwise.unwrap_or_default();
            set(&mut c.layers, r.layers);
            set(&mut c.d, r.d);
            set(&mut c.n, r.n);
            let slope = match c.activation {
                Activation::LeakyRelu { slope } => slope,
                _ => 0.1,
            };
            let slope = r.slope.unwrap_or(slope);
            let name = r.activation.as_deref().unwrap_or(match c.activation {
                Activation::LeakyRelu { .. } => "leaky_relu",
                Activation::Tanh => "tanh",
                Activation::Identity => "identity",
            });
            c.activation = activation(name, slope).map_err(|e| match e {
                Error::Config { key, reason } if key == "slope" => bad("slope", reason),
                other => other,
            })?;
            set(&mut c.iterations, r.iterations);
            set(&mut c.tolerance, r.tolerance);
            set(&mut c.eta, r.eta);
            set(&mut c.eps, r.epsilon);
            at_least_one("layers", c.layers)?;
            at_least_one("n", c.n)?;
            if c.n >= c.d {
                return Err(bad("n", format!("must be smaller than d = {}", c.d)));
            }
            positive("eta", c.eta)?;
            positive("epsilon", c.eps)?;
        }
        Job::Stability(c) => {
            let r = raw.stability.unwrap_or_default();
            set(&mut c.n, r.n);
            if let Some(p) = r.partitions {
                c.partitions = partitions("partitions", &p)?;
            }
            set(&mut c.steps, r.steps);
            set(&mut c.repetitions, r.repetitions);
            set(&mut c.probes, r.probes);
            set(&mut c.eta, r.eta);
            set(&mut c.eps, r.epsilon);
            set(&mut c.beta, r.beta);
            apply_stream(&mut c.stream, raw.stream)?;
            c.validate()?;
        }
        Job::Diag(c) => {
            let r = raw.diag.unwrap_or_default();
            set(&mut c.n, r.n);
            set(&mut c.epochs, r.epochs);
            if let Some(p) = r.partition {
                c.partition = p
                    .parse()
                    .map_err(|e: Error| bad("partition", e.to_string()))?;
            }
            set(&mut c.eta, r.eta);
            set(&mut c.beta, r.beta);
            set(&mut c.eps, r.epsilon);
            apply_stream(&mut c.stream, raw.stream)?;
            at_least_one("n", c.n)?;
            at_least_one("epochs", c.epochs)?;
            positive("eta", c.eta)?;
            positive("epsilon", c.eps)?;
            MomentumSchedule::constant(c.beta)?;
            c.partition
                .build(c.stream.dim())
                .map_err(|e| bad("partition", e.to_string()))?;
        }
    }
    Ok(RunConfig {
        experiment,
        preset,
        seed,
        out: ov.out.or(raw.out),
        checkpoint: ov.checkpoint.or(raw.checkpoint),
        threads,
        job,
    })
}

/// Parses and validates a config file, filling unset keys from the preset.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    parse_config_with(text, Overrides::default())
}

pub fn parse_config_with(text: &str, overrides: Overrides) -> Result<RunConfig, CliError> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
    Ok(resolve(raw, overrides)?)
}

fn partition_list(p: &[PartitionSpec]) -> String {
    let items: Vec<String> = p.iter().map(|s| format!("\"{s}\"")).collect();
    format!("[{}]", items.join(", "))
}

fn stream_table(s: &StreamSpec) -> String {
    let mut out = String::from("\n[stream]\nblocks = [\n");
    for b in &s.blocks {
        out.push_str(&format!(
            "  {{ width = {}, prob = {:?}, mean = {:?}, std = {:?} }},\n",
            b.width, b.prob, b.mean_scale, b.std
        ));
    }
    out.push_str("]\n");
    out
}

fn quote_path(p: &std::path::Path) -> String {
    toml::Value::String(p.to_string_lossy().into_owned()).to_string()
}

impl RunConfig {
    /// Fully explicit TOML for this configuration; parsing it back yields an
    /// equal value.
    pub fn to_canonical(&self) -> String {
        let mut s = format!(
            "experiment = \"{}\"\npreset = \"{}\"\nseed = {}\n",
            self.experiment,
            self.preset.name(),
            self.seed
        );
        if let Some(p) = &self.out {
            s.push_str(&format!("out = {}\n", quote_path(p)));
        }
        if let Some(p) = &self.checkpoint {
            s.push_str(&format!("checkpoint = {}\n", quote_path(p)));
        }
        if let Some(t) = self.threads {
            s.push_str(&format!("threads = {t}\n"));
        }
        match &self.job {
            Job::Regret(c) => {
                s.push_str(&format!(
                    "\n[regret]\nhorizon = {}\nrepetitions = {}\npartitions = {}\neta = {:?}\nepsilon = {:?}\n\
                     comparator_max_iters = {}\ncomparator_window = {}\ncomparator_tol = {:?}\ncomparator_eta = {:?}\n",
                    c.horizon,
                    c.repetitions,
                    partition_list(&c.partitions),
                    c.eta,
                    c.eps,
                    c.comparator.max_iters,
                    c.comparator.window,
                    c.comparator.tol,
                    c.comparator.eta
                ));
                s.push_str(&stream_table(&c.stream));
            }
            Job::Nonconvex(c) => {
                s.push_str(&format!(
                    "\n[nonconvex]\nsteps = {}\nrepetitions = {}\npartitions = {}\nweight_seq = \"{}\"\n\
                     momentum = \"{}\"\nstepsize = \"{}\"\nepsilon = {:?}\npool_size = {}\nstride = {}\n",
                    c.steps,
                    c.repetitions,
                    partition_list(&c.partitions),
                    c.weights,
                    c.momentum,
                    c.stepsize,
                    c.eps,
                    c.pool_size,
                    c.stride
                ));
                s.push_str(&stream_table(&c.stream));
            }
            Job::Minnorm { config: c, data } => {
                s.push_str(&format!(
                    "\n[minnorm]\nn = {}\nd = {}\npartition = \"{}\"\niterations = {}\ntolerance = {:?}\neta = {:?}\nepsilon = {:?}\n",
                    c.n, c.d, c.partition, c.iterations, c.tolerance, c.eta, c.eps
                ));
                if let Some(p) = data {
                    s.push_str(&format!("data = {}\n", quote_path(p)));
                }
            }
            Job::Layerwise(c) => {
                let (name, slope) = match c.activation {
                    Activation::LeakyRelu { slope } => ("leaky_relu", slope),
                    Activation::Tanh => ("tanh", 0.1),
                    Activation::Identity => ("identity", 0.1),
                };
                s.push_str(&format!(
                    "\n[layerwise]\nlayers = {}\nd = {}\nn = {}\nactivation = \"{name}\"\nslope = {slope:?}\n\
                     iterations = {}\ntolerance = {:?}\neta = {:?}\nepsilon = {:?}\n",
                    c.layers, c.d, c.n, c.iterations, c.tolerance, c.eta, c.eps
                ));
            }
            Job::Stability(c) => {
                s.push_str(&format!(
                    "\n[stability]\nn = {}\npartitions = {}\nsteps = {}\nrepetitions = {}\nprobes = {}\neta = {:?}\nepsilon = {:?}\nbeta = {:?}\n",
                    c.n,
                    partition_list(&c.partitions),
                    c.steps,
                    c.repetitions,
                    c.probes,
                    c.eta,
                    c.eps,
                    c.beta
                ));
                s.push_str(&stream_table(&c.stream));
            }
            Job::Diag(c) => {
                s.push_str(&format!(
                    "\n[diag]\nn = {}\nepochs = {}\npartition = \"{}\"\neta = {:?}\nbeta = {:?}\nepsilon = {:?}\n",
                    c.n, c.epochs, c.partition, c.eta, c.beta, c.eps
                ));
                s.push_str(&stream_table(&c.stream));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_names() {
        assert_eq!(
            Preset::parse_for("regret-paper", None).unwrap(),
            (Preset::Paper, Some(Experiment::Regret))
        );
        assert_eq!(
            Preset::parse_for("quick", Some(Experiment::Diag))
                .unwrap()
                .0,
            Preset::Quick
        );
        assert!(Preset::parse_for("regret-paper", Some(Experiment::Diag)).is_err());
        assert!(Preset::parse_for("fast", None).is_err());
    }

    #[test]
    fn default_epsilon_unless_paper() {
        let c = parse_config("experiment = \"regret\"").unwrap();
        match c.job {
            Job::Regret(r) => assert_eq!(r.eps, DEFAULT_EPSILON),
            _ => unreachable!(),
        }
    }
}
