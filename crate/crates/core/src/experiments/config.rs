//! TOML experiment configuration.
//!
//! ```toml
//! [run]
//! methods = ["rennala", "ringmaster"]
//! seeds = [1, 2, 3]
//!
//! [problem]
//! kind = "logistic"        # quadratic | logistic
//! noise = "gaussian"       # exact | gaussian | single-sample
//! sigma2 = 1.0
//! epsilon = 0.01
//!
//! [timing]
//! regime = "slow-comm"     # classical | slow-comm | hetero-compute | hetero-comm | custom
//! n = 16
//!
//! [hyper]
//! B = [16, "auto"]
//! gamma = [0.5, 0.1]
//!
//! [stop]
//! max_sim_time = 5000.0
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::algorithms::StrategyKind;
use crate::problems::NoiseKind;

use super::regimes::Regime;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    run: RawRun,
    problem: RawProblem,
    timing: RawTiming,
    #[serde(default)]
    hyper: toml::Table,
    #[serde(default)]
    stop: RawStop,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    #[serde(default)]
    method: Option<String>,
    #[serde(default)]
    methods: Option<Vec<String>>,
    #[serde(default)]
    seeds: Option<Vec<u64>>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    eval_every: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    kind: String,
    #[serde(default)]
    mu: Option<f64>,
    #[serde(default, rename = "L")]
    l: Option<f64>,
    #[serde(default)]
    x0: Option<Vec<f64>>,
    #[serde(default)]
    csv: Option<PathBuf>,
    #[serde(default)]
    samples: Option<usize>,
    #[serde(default)]
    dim: Option<usize>,
    #[serde(default)]
    l2: Option<f64>,
    #[serde(default)]
    data_seed: Option<u64>,
    #[serde(default)]
    noise: Option<String>,
    #[serde(default)]
    sigma2: Option<f64>,
    #[serde(default)]
    epsilon: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTiming {
    regime: String,
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    h: Option<Vec<f64>>,
    #[serde(default)]
    tau: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStop {
    max_sim_time: Option<f64>,
    max_branch_len: Option<usize>,
    grad_norm_target: Option<f64>,
    target_loss: Option<f64>,
    target_fraction: Option<f64>,
    #[serde(default)]
    stop_at_target: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    #[serde(default)]
    curves: bool,
    #[serde(default)]
    tree: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic { samples: usize, dim: usize, seed: u64 },
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemConfig {
    Quadratic { mu: f64, l: f64 },
    Logistic { source: DataSource, l2: f64 },
}

/// An integer hyperparameter value: fixed, or derived from `σ²/ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntSetting {
    Fixed(usize),
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSetting {
    Fixed(f64),
    /// The step size of the method's own theorem.
    Theorem,
}

/// Value lists for every hyperparameter. A method only expands the lists
/// it uses.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    pub b: Vec<IntSetting>,
    pub m: Vec<IntSetting>,
    pub s: Vec<IntSetting>,
    pub g: Vec<IntSetting>,
    pub k: Vec<IntSetting>,
    pub groups: Vec<usize>,
    pub clusters: Vec<usize>,
    /// `None` means clusters never sync on their own.
    pub cluster_b: Vec<Option<usize>>,
    pub strategy: Vec<StrategyKind>,
    pub gamma: Vec<GammaSetting>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            b: vec![IntSetting::Auto],
            m: vec![IntSetting::Auto],
            s: vec![IntSetting::Auto],
            g: vec![IntSetting::Auto],
            k: vec![IntSetting::Auto],
            groups: vec![2],
            clusters: vec![2],
            cluster_b: vec![None],
            strategy: vec![StrategyKind::RandomSubset],
            gamma: vec![GammaSetting::Theorem],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StopConfig {
    pub max_sim_time: Option<f64>,
    pub max_branch_len: Option<usize>,
    pub grad_norm_target: Option<f64>,
    pub target_loss: Option<f64>,
    /// Target `f* + fraction·(f(x⁰) − f*)`.
    pub target_fraction: Option<f64>,
    pub stop_at_target: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub methods: Vec<String>,
    pub seeds: Vec<u64>,
    pub eval_every: usize,
    pub problem: ProblemConfig,
    pub x0: Option<Vec<f64>>,
    pub noise: NoiseKind,
    /// Variance used by the theory (step sizes, `auto` values).
    pub sigma2: f64,
    pub epsilon: f64,
    pub regime: Regime,
    pub n: usize,
    pub hyper: HyperGrid,
    pub stop: StopConfig,
    pub out_dir: Option<PathBuf>,
    pub write_curves: bool,
    pub write_tree: bool,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        // relative dataset paths are relative to the config file
        if let ProblemConfig::Logistic {
            source: DataSource::Csv(p),
            ..
        } = &mut cfg.problem
        {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;

        let methods = match (raw.run.method, raw.run.methods) {
            (Some(m), None) => vec![m],
            (None, Some(ms)) => ms,
            (Some(_), Some(_)) => return invalid("set either run.method or run.methods, not both"),
            (None, None) => return invalid("run.methods is required"),
        };
        if methods.is_empty() {
            return invalid("run.methods is empty");
        }
        let known: BTreeSet<&str> = crate::algorithms::Method::NAMES.into_iter().collect();
        for m in &methods {
            if !known.contains(m.as_str()) {
                return invalid(format!("unknown method `{m}`"));
            }
        }
        let seeds = match (raw.run.seed, raw.run.seeds) {
            (Some(s), None) => vec![s],
            (None, Some(s)) => s,
            (None, None) => vec![0],
            (Some(_), Some(_)) => return invalid("set either run.seed or run.seeds, not both"),
        };
        if seeds.is_empty() {
            return invalid("run.seeds is empty");
        }
        let eval_every = raw.run.eval_every.unwrap_or(1);
        if eval_every == 0 {
            return invalid("run.eval_every must be at least 1");
        }

        let p = raw.problem;
        let problem = match p.kind.as_str() {
            "quadratic" => {
                let mu = p.mu.unwrap_or(0.01);
                let l = p.l.unwrap_or(1.0);
                if !(mu > 0.0 && l >= mu) {
                    return invalid("quadratic needs 0 < mu <= L");
                }
                ProblemConfig::Quadratic { mu, l }
            }
            "logistic" => {
                let source = match p.csv {
                    Some(path) => DataSource::Csv(path),
                    None => DataSource::Synthetic {
                        samples: p.samples.unwrap_or(200),
                        dim: p.dim.unwrap_or(10),
                        seed: p.data_seed.unwrap_or(20240601),
                    },
                };
                let l2 = p.l2.unwrap_or(1e-3);
                if !(l2 >= 0.0) {
                    return invalid("problem.l2 must be non-negative");
                }
                ProblemConfig::Logistic { source, l2 }
            }
            other => return invalid(format!("unknown problem kind `{other}`")),
        };
        let sigma2 = p.sigma2.unwrap_or(0.0);
        if !(sigma2 >= 0.0) {
            return invalid("problem.sigma2 must be non-negative");
        }
        let epsilon = p.epsilon.unwrap_or(0.01);
        if !(epsilon > 0.0) {
            return invalid("problem.epsilon must be positive");
        }
        let noise = match p.noise.as_deref().unwrap_or("gaussian") {
            "exact" => NoiseKind::Exact,
            "gaussian" => NoiseKind::Gaussian { sigma2 },
            "single-sample" => NoiseKind::SingleSample,
            other => return invalid(format!("unknown noise kind `{other}`")),
        };

        let t = raw.timing;
        let n = match (&t.h, t.n) {
            (Some(h), None) => h.len(),
            (_, Some(n)) => n,
            (None, None) => return invalid("timing.n is required"),
        };
        if n == 0 {
            return invalid("timing.n must be at least 1");
        }
        let regime = match t.regime.as_str() {
            "custom" => {
                let h = match t.h {
                    Some(h) => h,
                    None => return invalid("custom regime needs timing.h"),
                };
                let tau = t.tau.unwrap_or_else(|| vec![0.0; h.len()]);
                if h.len() != n || tau.len() != n {
                    return invalid("timing.h and timing.tau must both have n entries");
                }
                Regime::Custom { h, tau }
            }
            name => {
                if t.h.is_some() || t.tau.is_some() {
                    return invalid("timing.h/tau are only allowed with regime = \"custom\"");
                }
                match Regime::from_name(name) {
                    Some(r) => r,
                    None => return invalid(format!("unknown regime `{name}`")),
                }
            }
        };

        let hyper = parse_hyper(&raw.hyper)?;

        let s = raw.stop;
        let stop = StopConfig {
            max_sim_time: s.max_sim_time,
            max_branch_len: s.max_branch_len,
            grad_norm_target: s.grad_norm_target,
            target_loss: s.target_loss,
            target_fraction: s.target_fraction,
            stop_at_target: s.stop_at_target,
        };
        if stop.target_loss.is_some() && stop.target_fraction.is_some() {
            return invalid("set either stop.target_loss or stop.target_fraction, not both");
        }
        if let Some(f) = stop.target_fraction {
            if !(f > 0.0 && f < 1.0) {
                return invalid("stop.target_fraction must lie in (0, 1)");
            }
        }
        if stop.max_sim_time.is_none() && stop.max_branch_len.is_none() {
            return invalid("set stop.max_sim_time or stop.max_branch_len");
        }

        Ok(ExperimentConfig {
            methods,
            seeds,
            eval_every,
            problem,
            x0: p.x0,
            noise,
            sigma2,
            epsilon,
            regime,
            n,
            hyper,
            stop,
            out_dir: raw.output.dir,
            write_curves: raw.output.curves,
            write_tree: raw.output.tree,
        })
    }
}

fn as_list(v: &toml::Value) -> Vec<&toml::Value> {
    match v {
        toml::Value::Array(a) => a.iter().collect(),
        other => vec![other],
    }
}

fn int_settings(key: &str, v: &toml::Value) -> Result<Vec<IntSetting>, ConfigError> {
    let mut out = Vec::new();
    for item in as_list(v) {
        out.push(match item {
            toml::Value::Integer(i) if *i >= 1 => IntSetting::Fixed(*i as usize),
            toml::Value::String(s) if s == "auto" => IntSetting::Auto,
            other => return invalid(format!("hyper.{key}: expected a positive integer or \"auto\", got {other}")),
        });
    }
    if out.is_empty() {
        return invalid(format!("hyper.{key} is empty"));
    }
    Ok(out)
}

fn plain_ints(key: &str, v: &toml::Value) -> Result<Vec<usize>, ConfigError> {
    int_settings(key, v)?
        .into_iter()
        .map(|s| match s {
            IntSetting::Fixed(i) => Ok(i),
            IntSetting::Auto => invalid(format!("hyper.{key} does not accept \"auto\"")),
        })
        .collect()
}

fn parse_hyper(t: &toml::Table) -> Result<HyperGrid, ConfigError> {
    let mut g = HyperGrid::default();
    for (key, v) in t {
        match key.as_str() {
            "B" => g.b = int_settings(key, v)?,
            "M" => g.m = int_settings(key, v)?,
            "s" => g.s = int_settings(key, v)?,
            "G" => g.g = int_settings(key, v)?,
            "K" => g.k = int_settings(key, v)?,
            "groups" => g.groups = plain_ints(key, v)?,
            "clusters" => g.clusters = plain_ints(key, v)?,
            "cluster_B" => {
                let mut out = Vec::new();
                for item in as_list(v) {
                    out.push(match item {
                        toml::Value::Integer(i) if *i >= 1 => Some(*i as usize),
                        toml::Value::String(s) if s == "never" => None,
                        other => return invalid(format!("hyper.cluster_B: expected a positive integer or \"never\", got {other}")),
                    });
                }
                if out.is_empty() {
                    return invalid("hyper.cluster_B is empty");
                }
                g.cluster_b = out;
            }
            "strategy" => {
                let mut out = Vec::new();
                for item in as_list(v) {
                    match item.as_str().and_then(StrategyKind::parse) {
                        Some(s) => out.push(s),
                        None => return invalid(format!("hyper.strategy: unknown strategy {item}")),
                    }
                }
                if out.is_empty() {
                    return invalid("hyper.strategy is empty");
                }
                g.strategy = out;
            }
            "gamma" => {
                let mut out = Vec::new();
                for item in as_list(v) {
                    out.push(match item {
                        toml::Value::Float(f) if *f > 0.0 && f.is_finite() => GammaSetting::Fixed(*f),
                        toml::Value::Integer(i) if *i > 0 => GammaSetting::Fixed(*i as f64),
                        toml::Value::String(s) if s == "theorem" => GammaSetting::Theorem,
                        other => return invalid(format!("hyper.gamma: expected a positive number or \"theorem\", got {other}")),
                    });
                }
                if out.is_empty() {
                    return invalid("hyper.gamma is empty");
                }
                g.gamma = out;
            }
            other => return invalid(format!("unknown hyperparameter `{other}`")),
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN: &str = r#"
[run]
methods = ["rennala", "vanilla"]
[problem]
kind = "quadratic"
[timing]
regime = "classical"
n = 4
[stop]
max_sim_time = 100.0
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::parse(MIN).unwrap();
        assert_eq!(c.methods, vec!["rennala", "vanilla"]);
        assert_eq!(c.seeds, vec![0]);
        assert_eq!(c.hyper.b, vec![IntSetting::Auto]);
        assert_eq!(c.regime, Regime::Classical);
    }

    #[test]
    fn hyper_lists_and_scalars() {
        let text = format!("{MIN}[hyper]\nB = [4, \"auto\"]\ngamma = 0.5\ncluster_B = [\"never\", 3]\n");
        let c = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(c.hyper.b, vec![IntSetting::Fixed(4), IntSetting::Auto]);
        assert_eq!(c.hyper.gamma, vec![GammaSetting::Fixed(0.5)]);
        assert_eq!(c.hyper.cluster_b, vec![None, Some(3)]);
    }

    #[test]
    fn bad_values_are_rejected() {
        for extra in [
            "[hyper]\nB = []\n",
            "[hyper]\nB = 0\n",
            "[hyper]\nB = -3\n",
            "[hyper]\ngamma = -1.0\n",
            "[hyper]\nwidth = 3\n",
            "[hyper]\nstrategy = \"sometimes\"\n",
        ] {
            let text = format!("{MIN}{extra}");
            assert!(
                matches!(ExperimentConfig::parse(&text), Err(ConfigError::Invalid(_))),
                "{extra}"
            );
        }
        let bad_regime = MIN.replace("classical", "tropical");
        assert!(ExperimentConfig::parse(&bad_regime).is_err());
        let bad_method = MIN.replace("vanilla", "adam");
        assert!(ExperimentConfig::parse(&bad_method).is_err());
        assert!(matches!(
            ExperimentConfig::parse("[run]\nmethods=[\"vanilla\"]\n[problem]\nkind=\"quadratic\"\n[timing]\nregime=\"classical\"\nn=2\nextra=1\n"),
            Err(ConfigError::Syntax(_))
        ));
    }

    #[test]
    fn custom_regime_needs_matching_lengths() {
        let text = MIN.replace("regime = \"classical\"\nn = 4", "regime = \"custom\"\nh = [1.0, 2.0]\ntau = [0.0]");
        assert!(ExperimentConfig::parse(&text).is_err());
        let ok = MIN.replace("regime = \"classical\"\nn = 4", "regime = \"custom\"\nh = [1.0, 2.0]");
        let c = ExperimentConfig::parse(&ok).unwrap();
        assert_eq!(c.n, 2);
    }
}
