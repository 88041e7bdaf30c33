//! Flat `key = value` configuration files.
//!
//! Keys use dotted section prefixes (`plant.cart_mass`). Values are numbers,
//! booleans, bare words, vectors `[a, b]` or matrices `[[a, b], [c, d]]`.
//! `#` starts a comment. Unknown keys are rejected so typos never fall back
//! to defaults silently.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use phydrl_core::agent::AgentConfig;
use phydrl_core::phy::{RewardConfig, RewardVariant};
use phydrl_core::plant::{InitRegion, Integrator, PlantParams, STATE_DIM};
use phydrl_core::safety::SafetySpec;
use phydrl_core::{Mat, Vector};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Scalar(String),
    List(Vec<Value>),
}

fn parse_value(text: &str) -> Result<Value, String> {
    let mut chars = text.trim().chars().peekable();
    let v = parse_inner(&mut chars)?;
    if chars.any(|c| !c.is_whitespace()) {
        return Err(format!("trailing characters in `{text}`"));
    }
    Ok(v)
}

fn parse_inner(chars: &mut std::iter::Peekable<std::str::Chars<'_>>) -> Result<Value, String> {
    while chars.peek().is_some_and(|c| c.is_whitespace()) {
        chars.next();
    }
    if chars.peek() == Some(&'[') {
        chars.next();
        let mut items = Vec::new();
        loop {
            while chars.peek().is_some_and(|c| c.is_whitespace()) {
                chars.next();
            }
            match chars.peek() {
                Some(']') => {
                    chars.next();
                    return Ok(Value::List(items));
                }
                None => return Err("unterminated `[`".into()),
                _ => {}
            }
            items.push(parse_inner(chars)?);
            while chars.peek().is_some_and(|c| c.is_whitespace()) {
                chars.next();
            }
            match chars.next() {
                Some(',') => {}
                Some(']') => return Ok(Value::List(items)),
                other => return Err(format!("expected `,` or `]`, found {other:?}")),
            }
        }
    }
    let mut word = String::new();
    while let Some(&c) = chars.peek() {
        if c == ',' || c == ']' || c == '[' {
            break;
        }
        word.push(c);
        chars.next();
    }
    let word = word.trim().to_string();
    if word.is_empty() {
        return Err("empty value".into());
    }
    Ok(Value::Scalar(word))
}

/// Raw key/value pairs with usage tracking.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
    used: std::cell::RefCell<BTreeSet<String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {line_no}: expected `key = value`")))?;
            let key = key.trim();
            if key.is_empty()
                || !key
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '.')
            {
                return Err(CliError::Config(format!("line {line_no}: invalid key `{key}`")));
            }
            if entries
                .insert(key.to_string(), (line_no, value.trim().to_string()))
                .is_some()
            {
                return Err(CliError::Config(format!("line {line_no}: duplicate key `{key}`")));
            }
        }
        Ok(Self {
            entries,
            used: Default::default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Inserts or replaces a key (command-line overrides).
    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), (0, value.to_string()));
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.used.borrow_mut().insert(key.to_string());
        self.entries.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn err(key: &str, line: usize, msg: impl std::fmt::Display) -> CliError {
        if line == 0 {
            CliError::Config(format!("`{key}`: {msg}"))
        } else {
            CliError::Config(format!("line {line}: `{key}`: {msg}"))
        }
    }

    fn parsed<T>(&self, key: &str, f: impl FnOnce(&str) -> Result<T, String>) -> Result<Option<T>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, text)) => f(text).map(Some).map_err(|m| Self::err(key, line, m)),
        }
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.parsed(key, parse_f64)
    }

    pub fn f64_req(&self, key: &str) -> Result<f64, CliError> {
        self.f64_opt(key)?
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, CliError> {
        Ok(self
            .parsed(key, |t| t.parse::<u64>().map_err(|e| format!("{e}")))?
            .unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        Ok(self
            .parsed(key, |t| t.parse::<usize>().map_err(|e| format!("{e}")))?
            .unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, CliError> {
        Ok(self
            .parsed(key, |t| match t {
                "true" => Ok(true),
                "false" => Ok(false),
                other => Err(format!("expected true or false, found `{other}`")),
            })?
            .unwrap_or(default))
    }

    pub fn word_or(&self, key: &str, default: &str) -> Result<String, CliError> {
        Ok(self.raw(key).map(|(_, v)| v.to_string()).unwrap_or_else(|| default.to_string()))
    }

    /// `none` maps to `None`.
    pub fn f64_or_none(&self, key: &str, default: Option<f64>) -> Result<Option<f64>, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some((_, "none")) => Ok(None),
            Some((line, t)) => parse_f64(t).map(Some).map_err(|m| Self::err(key, line, m)),
        }
    }

    pub fn vector_opt(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.parsed(key, |t| parse_vector(&parse_value(t)?))
    }

    pub fn vector_req(&self, key: &str) -> Result<Vec<f64>, CliError> {
        self.vector_opt(key)?
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    pub fn matrix_opt(&self, key: &str) -> Result<Option<Mat>, CliError> {
        self.parsed(key, |t| parse_matrix(&parse_value(t)?))
    }

    pub fn matrix_req(&self, key: &str) -> Result<Mat, CliError> {
        self.matrix_opt(key)?
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    /// Keys present in the file that were never read.
    pub fn unused_keys(&self) -> Vec<String> {
        let used = self.used.borrow();
        self.entries.keys().filter(|k| !used.contains(*k)).cloned().collect()
    }
}

fn parse_f64(t: &str) -> Result<f64, String> {
    let v: f64 = t.parse().map_err(|_| format!("expected a number, found `{t}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("value `{t}` is not finite"))
    }
}

fn parse_vector(v: &Value) -> Result<Vec<f64>, String> {
    match v {
        Value::List(items) => items
            .iter()
            .map(|i| match i {
                Value::Scalar(s) => parse_f64(s),
                Value::List(_) => Err("expected a flat list".into()),
            })
            .collect(),
        Value::Scalar(_) => Err("expected a list `[a, b, ...]`".into()),
    }
}

fn parse_matrix(v: &Value) -> Result<Mat, String> {
    let Value::List(rows) = v else {
        return Err("expected a matrix `[[a, b], [c, d]]`".into());
    };
    let rows: Vec<Vec<f64>> = rows.iter().map(parse_vector).collect::<Result<_, _>>()?;
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err("matrix must be non-empty".into());
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err("matrix rows have different lengths".into());
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Shortest round-trip representation of a float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn fmt_vector(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
    format!("[{}]", items.join(", "))
}

pub fn fmt_matrix(m: &Mat) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| fmt_vector(&m.row(i).iter().copied().collect::<Vec<_>>()))
        .collect();
    format!("[{}]", rows.join(", "))
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegionSpec {
    Envelope { level: f64 },
    Box { half_widths: [f64; STATE_DIM] },
}

impl RegionSpec {
    pub fn to_region(&self, p: &Mat) -> InitRegion {
        match self {
            RegionSpec::Envelope { level } => InitRegion::Envelope {
                p: p.clone(),
                level: *level,
            },
            RegionSpec::Box { half_widths } => InitRegion::Box {
                half_widths: *half_widths,
            },
        }
    }

    fn read(raw: &RawConfig, prefix: &str, default_level: f64) -> Result<Self, CliError> {
        let kind = raw.word_or(&format!("{prefix}.init"), "envelope")?;
        match kind.as_str() {
            "envelope" => Ok(RegionSpec::Envelope {
                level: raw.f64_or(&format!("{prefix}.init_level"), default_level)?,
            }),
            "box" => {
                let key = format!("{prefix}.init_half_widths");
                let w = raw.vector_req(&key)?;
                let half_widths: [f64; STATE_DIM] = w
                    .try_into()
                    .map_err(|_| CliError::Config(format!("`{key}` needs {STATE_DIM} entries")))?;
                Ok(RegionSpec::Box { half_widths })
            }
            other => Err(CliError::Config(format!(
                "`{prefix}.init` must be envelope or box, found `{other}`"
            ))),
        }
    }

    fn write(&self, out: &mut String, prefix: &str) {
        match self {
            RegionSpec::Envelope { level } => {
                let _ = writeln!(out, "{prefix}.init = envelope");
                let _ = writeln!(out, "{prefix}.init_level = {}", fmt_f64(*level));
            }
            RegionSpec::Box { half_widths } => {
                let _ = writeln!(out, "{prefix}.init = box");
                let _ = writeln!(out, "{prefix}.init_half_widths = {}", fmt_vector(half_widths));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub alpha: f64,
    pub force_bound: Option<f64>,
    pub min_margin: f64,
    pub center: bool,
    pub verify_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSection {
    pub residual: bool,
    pub total_steps: u64,
    pub max_episode_steps: usize,
    pub warmup_steps: usize,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub eval_horizon: usize,
    pub init: RegionSpec,
    pub eval_init: RegionSpec,
    pub stop_at_eval_return: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSection {
    pub episodes: usize,
    pub horizon: usize,
    pub init: RegionSpec,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSection {
    pub beta_kind: String,
    pub headroom: f64,
    pub beta_rollouts: usize,
    pub beta_horizon: usize,
    pub envelope_samples: usize,
    pub invariance_rollouts: usize,
    pub boundary_starts: usize,
    pub horizon: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareSection {
    pub seeds: Vec<u64>,
    pub threshold: f64,
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub plant: PlantParams,
    pub model_a: Mat,
    pub model_b: Mat,
    pub safety: SafetySpec,
    pub synth: SynthConfig,
    /// Optional inline gain for `verify`.
    pub gain_p: Option<Mat>,
    pub gain_f: Option<Mat>,
    pub agent: AgentConfig,
    pub reward: RewardConfig,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub analysis: AnalysisSection,
    pub compare: CompareSection,
    pub seed: u64,
}

fn variant_name(v: RewardVariant) -> &'static str {
    match v {
        RewardVariant::SafetyAndStability => "safety_and_stability",
        RewardVariant::StabilityOnly => "stability_only",
    }
}

fn integrator_name(i: Integrator) -> &'static str {
    match i {
        Integrator::Euler => "euler",
        Integrator::SemiImplicitEuler => "semi_implicit_euler",
    }
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let integrator = match raw.word_or("plant.integrator", "euler")?.as_str() {
            "euler" => Integrator::Euler,
            "semi_implicit_euler" => Integrator::SemiImplicitEuler,
            other => {
                return Err(CliError::Config(format!(
                    "`plant.integrator` must be euler or semi_implicit_euler, found `{other}`"
                )))
            }
        };
        let plant = PlantParams {
            cart_mass: raw.f64_req("plant.cart_mass")?,
            pole_mass: raw.f64_req("plant.pole_mass")?,
            pole_half_length: raw.f64_req("plant.pole_half_length")?,
            gravity: raw.f64_req("plant.gravity")?,
            cart_friction: raw.f64_req("plant.cart_friction")?,
            pole_friction: raw.f64_req("plant.pole_friction")?,
            dt: raw.f64_req("plant.dt")?,
            force_limit: raw.f64_req("plant.force_limit")?,
            integrator,
        };
        plant.validate()?;

        let model_a = raw.matrix_req("model.a")?;
        let model_b = raw.matrix_req("model.b")?;
        if model_a.shape() != (STATE_DIM, STATE_DIM) || model_b.shape() != (STATE_DIM, 1) {
            return Err(CliError::Config(format!(
                "`model.a` must be {STATE_DIM}x{STATE_DIM} and `model.b` {STATE_DIM}x1"
            )));
        }

        let d = raw.matrix_req("safety.d")?;
        let v = Vector::from_vec(raw.vector_req("safety.v")?);
        let v_upper = Vector::from_vec(raw.vector_req("safety.v_upper")?);
        let v_lower = Vector::from_vec(raw.vector_req("safety.v_lower")?);
        let safety = SafetySpec::new(d, v, v_upper, v_lower)?;

        let alpha = raw.f64_req("synth.alpha")?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CliError::Config(format!("`synth.alpha` must lie in (0, 1), got {alpha}")));
        }
        let synth = SynthConfig {
            alpha,
            force_bound: raw.f64_or_none("synth.force_bound", Some(plant.force_limit))?,
            min_margin: raw.f64_or("synth.min_margin", 1e-6)?,
            center: raw.bool_or("synth.center", true)?,
            verify_tol: raw.f64_or("synth.verify_tol", 1e-3)?,
        };

        let gain_p = raw.matrix_opt("gain.p")?;
        let gain_f = raw.matrix_opt("gain.f")?;

        let seed = raw.u64_or("seed", 0)?;
        let defaults = AgentConfig::new(STATE_DIM, plant.force_limit);
        let hidden = match raw.vector_opt("agent.hidden_sizes")? {
            None => defaults.hidden_sizes.clone(),
            Some(v) => v
                .iter()
                .map(|x| {
                    if *x >= 1.0 && x.fract() == 0.0 {
                        Ok(*x as usize)
                    } else {
                        Err(CliError::Config(format!("`agent.hidden_sizes` entries must be positive integers, got {x}")))
                    }
                })
                .collect::<Result<_, _>>()?,
        };
        let action_scale = raw.f64_or("agent.action_scale", plant.force_limit)?;
        let agent = AgentConfig {
            state_dim: STATE_DIM,
            gamma: raw.f64_or("agent.gamma", defaults.gamma)?,
            tau: raw.f64_or("agent.tau", defaults.tau)?,
            actor_lr: raw.f64_or("agent.actor_lr", defaults.actor_lr)?,
            critic_lr: raw.f64_or("agent.critic_lr", defaults.critic_lr)?,
            hidden_sizes: hidden,
            batch_size: raw.usize_or("agent.batch_size", defaults.batch_size)?,
            buffer_capacity: raw.usize_or("agent.buffer_capacity", defaults.buffer_capacity)?,
            exploration_noise_std: raw.f64_or("agent.exploration_noise_std", 0.1 * action_scale)?,
            action_scale,
            seed,
        };
        agent.validate()?;

        let variant = match raw.word_or("reward.variant", "safety_and_stability")?.as_str() {
            "safety_and_stability" => RewardVariant::SafetyAndStability,
            "stability_only" => RewardVariant::StabilityOnly,
            other => {
                return Err(CliError::Config(format!(
                    "`reward.variant` must be safety_and_stability or stability_only, found `{other}`"
                )))
            }
        };
        let reward = RewardConfig {
            performance_weight: raw.f64_or("reward.performance_weight", 1.0)?,
            variant,
        };
        if !(reward.performance_weight >= 0.0) {
            return Err(CliError::Config("`reward.performance_weight` must be non-negative".into()));
        }

        let train = TrainSection {
            residual: raw.bool_or("train.residual", true)?,
            total_steps: raw.u64_or("train.total_steps", 200_000)?,
            max_episode_steps: raw.usize_or("train.max_episode_steps", 1000)?,
            warmup_steps: raw.usize_or("train.warmup_steps", 1000)?,
            eval_interval: raw.u64_or("train.eval_interval", 5000)?,
            eval_episodes: raw.usize_or("train.eval_episodes", 10)?,
            eval_horizon: raw.usize_or("train.eval_horizon", 1000)?,
            init: RegionSpec::read(raw, "train", 1.0)?,
            eval_init: RegionSpec::read(raw, "train.eval", 1.0)?,
            stop_at_eval_return: raw.f64_or_none("train.stop_at_eval_return", None)?,
        };
        if train.max_episode_steps == 0 {
            return Err(CliError::Config("`train.max_episode_steps` must be at least 1".into()));
        }

        let eval = EvalSection {
            episodes: raw.usize_or("eval.episodes", 10)?,
            horizon: raw.usize_or("eval.horizon", 1000)?,
            init: RegionSpec::read(raw, "eval", 1.0)?,
            seed: raw.u64_or("eval.seed", 1000)?,
        };

        let analysis = AnalysisSection {
            beta_kind: raw.word_or("analysis.beta_kind", "constant")?,
            headroom: raw.f64_or("analysis.headroom", 0.05)?,
            beta_rollouts: raw.usize_or("analysis.beta_rollouts", 20)?,
            beta_horizon: raw.usize_or("analysis.beta_horizon", 1000)?,
            envelope_samples: raw.usize_or("analysis.envelope_samples", 10_000)?,
            invariance_rollouts: raw.usize_or("analysis.invariance_rollouts", 20)?,
            boundary_starts: raw.usize_or("analysis.boundary_starts", 2)?,
            horizon: raw.usize_or("analysis.horizon", 1000)?,
            seed: raw.u64_or("analysis.seed", 2000)?,
        };
        if !matches!(analysis.beta_kind.as_str(), "constant" | "quadratic") {
            return Err(CliError::Config(format!(
                "`analysis.beta_kind` must be constant or quadratic, found `{}`",
                analysis.beta_kind
            )));
        }

        let seeds = match raw.vector_opt("compare.seeds")? {
            None => vec![0, 1, 2],
            Some(v) => v
                .iter()
                .map(|x| {
                    if *x >= 0.0 && x.fract() == 0.0 {
                        Ok(*x as u64)
                    } else {
                        Err(CliError::Config(format!("`compare.seeds` entries must be non-negative integers, got {x}")))
                    }
                })
                .collect::<Result<_, _>>()?,
        };
        let compare = CompareSection {
            seeds,
            threshold: raw.f64_or("compare.threshold", 1000.0)?,
        };

        let unused = raw.unused_keys();
        if !unused.is_empty() {
            return Err(CliError::Config(format!("unknown keys: {}", unused.join(", "))));
        }

        Ok(Self {
            plant,
            model_a,
            model_b,
            safety,
            synth,
            gain_p,
            gain_f,
            agent,
            reward,
            train,
            eval,
            analysis,
            compare,
            seed,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    /// Every setting, defaults included, in a stable order that parses back to `self`.
    pub fn resolved_text(&self) -> String {
        let mut o = String::new();
        let p = &self.plant;
        let _ = writeln!(o, "seed = {}", self.seed);
        let _ = writeln!(o, "plant.cart_mass = {}", fmt_f64(p.cart_mass));
        let _ = writeln!(o, "plant.pole_mass = {}", fmt_f64(p.pole_mass));
        let _ = writeln!(o, "plant.pole_half_length = {}", fmt_f64(p.pole_half_length));
        let _ = writeln!(o, "plant.gravity = {}", fmt_f64(p.gravity));
        let _ = writeln!(o, "plant.cart_friction = {}", fmt_f64(p.cart_friction));
        let _ = writeln!(o, "plant.pole_friction = {}", fmt_f64(p.pole_friction));
        let _ = writeln!(o, "plant.dt = {}", fmt_f64(p.dt));
        let _ = writeln!(o, "plant.force_limit = {}", fmt_f64(p.force_limit));
        let _ = writeln!(o, "plant.integrator = {}", integrator_name(p.integrator));
        let _ = writeln!(o, "model.a = {}", fmt_matrix(&self.model_a));
        let _ = writeln!(o, "model.b = {}", fmt_matrix(&self.model_b));
        let s = &self.safety;
        let _ = writeln!(o, "safety.d = {}", fmt_matrix(s.d()));
        let _ = writeln!(o, "safety.v = {}", fmt_vector(s.v().as_slice()));
        let _ = writeln!(o, "safety.v_upper = {}", fmt_vector(s.v_upper().as_slice()));
        let _ = writeln!(o, "safety.v_lower = {}", fmt_vector(s.v_lower().as_slice()));
        let y = &self.synth;
        let _ = writeln!(o, "synth.alpha = {}", fmt_f64(y.alpha));
        let _ = writeln!(
            o,
            "synth.force_bound = {}",
            y.force_bound.map_or("none".to_string(), fmt_f64)
        );
        let _ = writeln!(o, "synth.min_margin = {}", fmt_f64(y.min_margin));
        let _ = writeln!(o, "synth.center = {}", y.center);
        let _ = writeln!(o, "synth.verify_tol = {}", fmt_f64(y.verify_tol));
        if let Some(gp) = &self.gain_p {
            let _ = writeln!(o, "gain.p = {}", fmt_matrix(gp));
        }
        if let Some(gf) = &self.gain_f {
            let _ = writeln!(o, "gain.f = {}", fmt_matrix(gf));
        }
        let a = &self.agent;
        let _ = writeln!(o, "agent.gamma = {}", fmt_f64(a.gamma));
        let _ = writeln!(o, "agent.tau = {}", fmt_f64(a.tau));
        let _ = writeln!(o, "agent.actor_lr = {}", fmt_f64(a.actor_lr));
        let _ = writeln!(o, "agent.critic_lr = {}", fmt_f64(a.critic_lr));
        let hidden: Vec<String> = a.hidden_sizes.iter().map(|h| h.to_string()).collect();
        let _ = writeln!(o, "agent.hidden_sizes = [{}]", hidden.join(", "));
        let _ = writeln!(o, "agent.batch_size = {}", a.batch_size);
        let _ = writeln!(o, "agent.buffer_capacity = {}", a.buffer_capacity);
        let _ = writeln!(o, "agent.exploration_noise_std = {}", fmt_f64(a.exploration_noise_std));
        let _ = writeln!(o, "agent.action_scale = {}", fmt_f64(a.action_scale));
        let _ = writeln!(o, "reward.variant = {}", variant_name(self.reward.variant));
        let _ = writeln!(o, "reward.performance_weight = {}", fmt_f64(self.reward.performance_weight));
        let t = &self.train;
        let _ = writeln!(o, "train.residual = {}", t.residual);
        let _ = writeln!(o, "train.total_steps = {}", t.total_steps);
        let _ = writeln!(o, "train.max_episode_steps = {}", t.max_episode_steps);
        let _ = writeln!(o, "train.warmup_steps = {}", t.warmup_steps);
        let _ = writeln!(o, "train.eval_interval = {}", t.eval_interval);
        let _ = writeln!(o, "train.eval_episodes = {}", t.eval_episodes);
        let _ = writeln!(o, "train.eval_horizon = {}", t.eval_horizon);
        t.init.write(&mut o, "train");
        t.eval_init.write(&mut o, "train.eval");
        let _ = writeln!(
            o,
            "train.stop_at_eval_return = {}",
            t.stop_at_eval_return.map_or("none".to_string(), fmt_f64)
        );
        let e = &self.eval;
        let _ = writeln!(o, "eval.episodes = {}", e.episodes);
        let _ = writeln!(o, "eval.horizon = {}", e.horizon);
        e.init.write(&mut o, "eval");
        let _ = writeln!(o, "eval.seed = {}", e.seed);
        let n = &self.analysis;
        let _ = writeln!(o, "analysis.beta_kind = {}", n.beta_kind);
        let _ = writeln!(o, "analysis.headroom = {}", fmt_f64(n.headroom));
        let _ = writeln!(o, "analysis.beta_rollouts = {}", n.beta_rollouts);
        let _ = writeln!(o, "analysis.beta_horizon = {}", n.beta_horizon);
        let _ = writeln!(o, "analysis.envelope_samples = {}", n.envelope_samples);
        let _ = writeln!(o, "analysis.invariance_rollouts = {}", n.invariance_rollouts);
        let _ = writeln!(o, "analysis.boundary_starts = {}", n.boundary_starts);
        let _ = writeln!(o, "analysis.horizon = {}", n.horizon);
        let _ = writeln!(o, "analysis.seed = {}", n.seed);
        let seeds: Vec<String> = self.compare.seeds.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(o, "compare.seeds = [{}]", seeds.join(", "));
        let _ = writeln!(o, "compare.threshold = {}", fmt_f64(self.compare.threshold));
        o
    }

    /// Same configuration with a different seed (agent seed included).
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        c.agent.seed = seed;
        c
    }
}
