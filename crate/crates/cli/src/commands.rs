//! Subcommand implementations. Every command writes `resolved.cfg` and
//! updates `manifest.txt` in its output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use phydrl_core::agent::AgentParams;
use phydrl_core::analysis::{self, AuditReport, BetaEstimate, BetaKind, InvarianceReport, TheoremReport};
use phydrl_core::lmi::{self, LmiReport, SolveOptions, SynthesisProblem, SynthesisSolution};
use phydrl_core::phy::{self, EnvelopeGain, RewardConfig, RewardVariant};
use phydrl_core::plant::{self, PlantParams};
use phydrl_core::rollout::{self, Controller, RolloutOptions, Trajectory, ZeroPolicy};
use phydrl_core::safety::{build_normalized, Envelope};
use phydrl_core::train::{self, EpisodeRecord, EvalRecord, TrainConfig, TrainEnv, TrainOutcome};
use phydrl_core::{linalg, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::formats::{self, csv_f64, Csv, Manifest};

pub const RESOLVED_CONFIG: &str = "resolved.cfg";
pub const CHECKPOINT: &str = "checkpoint.bin";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const EVAL_LOG: &str = "eval_log.csv";

pub const TRAIN_LOG_HEADER: [&str; 5] = ["step", "episode", "return", "critic_loss", "actor_loss"];
pub const TRAJECTORY_HEADER: [&str; 11] = [
    "step", "x", "v", "theta", "omega", "a_phy", "a_drl", "a_total", "reward", "V", "r_term",
];

/// Output directory plus the run's resolved configuration.
#[derive(Debug)]
pub struct Run {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    pub config_hash: [u8; 32],
    pub manifest: Manifest,
}

impl Run {
    pub fn open(cfg: ExperimentConfig, out: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(out).map_err(CliError::io(out))?;
        let text = cfg.resolved_text();
        let config_hash: [u8; 32] = {
            use sha2::Digest;
            sha2::Sha256::digest(text.as_bytes()).into()
        };
        let mut manifest = Manifest::open(out)?;
        manifest.write(RESOLVED_CONFIG, "config/1", text.as_bytes())?;
        Ok(Self {
            cfg,
            out: out.to_path_buf(),
            config_hash,
            manifest,
        })
    }

    pub fn finish(&self) -> Result<(), CliError> {
        self.manifest.save()
    }

    fn write_matrix(&mut self, rel: &str, m: &Mat) -> Result<(), CliError> {
        self.manifest.write(rel, "matrix/1", formats::matrix_to_text(m).as_bytes())
    }

    fn write_csv(&mut self, rel: &str, schema: &str, csv: &Csv) -> Result<(), CliError> {
        self.manifest.write(rel, schema, csv.as_str().as_bytes())
    }
}

pub fn synthesis_problem(cfg: &ExperimentConfig) -> Result<SynthesisProblem, CliError> {
    let ns = build_normalized(&cfg.safety)?;
    let mut problem = SynthesisProblem::new(cfg.model_a.clone(), cfg.model_b.clone(), cfg.synth.alpha, ns)?;
    if let Some(bound) = cfg.synth.force_bound {
        problem = problem.with_force_bound(bound)?;
    }
    Ok(problem)
}

pub fn report_text(report: &LmiReport, f: Option<&Mat>) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "feasible = {}", report.feasible);
    let _ = writeln!(o, "min_margin = {:e}", report.min_margin());
    let _ = writeln!(o, "contraction_margin = {:e}", report.schur_margin);
    let _ = writeln!(o, "box_margin = {:e}", report.box_margin);
    for (i, s) in report.diag_slacks.iter().enumerate() {
        let _ = writeln!(o, "diag_slack_{i} = {s:e}");
    }
    if let Some(fm) = report.force_margin {
        let _ = writeln!(o, "force_margin = {fm:e}");
    }
    if let Some(f) = f {
        let _ = writeln!(o, "gain = {}", crate::config::fmt_matrix(f));
    }
    o
}

#[derive(Debug, Clone)]
pub struct SynthOutcome {
    pub solution: SynthesisSolution,
    pub report: LmiReport,
    pub spectral_radius: f64,
}

/// Solves the LMIs and writes `P.txt`, `F.txt`, `Q.txt`, `R.txt` and `lmi_report.txt`.
pub fn cmd_synth(run: &mut Run) -> Result<SynthOutcome, CliError> {
    let problem = synthesis_problem(&run.cfg)?;
    let opts = SolveOptions {
        min_margin: run.cfg.synth.min_margin,
        center: run.cfg.synth.center,
        ..SolveOptions::default()
    };
    let solution = lmi::solve(&problem, &opts)?;
    let report = lmi::verify(&problem, &solution.q, &solution.r, 0.0)?;
    let a_bar = problem.a() + problem.b() * &solution.f;
    let spectral_radius = linalg::spectral_radius(&a_bar);
    run.write_matrix("P.txt", &solution.p)?;
    run.write_matrix("F.txt", &solution.f)?;
    run.write_matrix("Q.txt", &solution.q)?;
    run.write_matrix("R.txt", &solution.r)?;
    let mut text = report_text(&report, Some(&solution.f));
    let _ = writeln!(text, "spectral_radius = {spectral_radius:e}");
    run.manifest.write("lmi_report.txt", "report/1", text.as_bytes())?;
    run.finish()?;
    Ok(SynthOutcome {
        solution,
        report,
        spectral_radius,
    })
}

/// Checks a given `(P, F)`: inline `gain.p`/`gain.f` if configured, else `P.txt`/`F.txt`.
pub fn cmd_verify(run: &mut Run) -> Result<LmiReport, CliError> {
    let problem = synthesis_problem(&run.cfg)?;
    let (p, f) = match (&run.cfg.gain_p, &run.cfg.gain_f) {
        (Some(p), Some(f)) => (p.clone(), f.clone()),
        (None, None) => (
            formats::read_matrix(&run.out.join("P.txt"))?,
            formats::read_matrix(&run.out.join("F.txt"))?,
        ),
        _ => return Err(CliError::Config("`gain.p` and `gain.f` must be given together".into())),
    };
    let sol = SynthesisSolution::from_pf(p, f)?;
    let report = lmi::verify(&problem, &sol.q, &sol.r, run.cfg.synth.verify_tol)?;
    let text = report_text(&report, Some(&sol.f));
    run.manifest.write("verify_report.txt", "report/1", text.as_bytes())?;
    run.finish()?;
    Ok(report)
}

/// Loads `P.txt`/`F.txt` from the run directory, synthesizing them first if absent.
pub fn load_or_synth_gain(run: &mut Run) -> Result<EnvelopeGain, CliError> {
    let (p_path, f_path) = (run.out.join("P.txt"), run.out.join("F.txt"));
    let (p, f) = if p_path.exists() && f_path.exists() {
        (formats::read_matrix(&p_path)?, formats::read_matrix(&f_path)?)
    } else {
        let outcome = cmd_synth(run)?;
        (outcome.solution.p, outcome.solution.f)
    };
    Ok(EnvelopeGain::new(&run.cfg.model_a, &run.cfg.model_b, p, f, run.cfg.synth.alpha)?)
}

pub fn train_config(cfg: &ExperimentConfig, p: &Mat) -> TrainConfig {
    let t = &cfg.train;
    TrainConfig {
        total_steps: t.total_steps,
        max_episode_steps: t.max_episode_steps,
        warmup_steps: t.warmup_steps,
        eval_interval: t.eval_interval,
        eval_episodes: t.eval_episodes,
        eval_horizon: t.eval_horizon,
        residual: t.residual,
        reward: cfg.reward,
        init_region: t.init.to_region(p),
        eval_region: t.eval_init.to_region(p),
        stop_at_eval_return: t.stop_at_eval_return,
        seed: cfg.seed,
    }
}

fn nan_free(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        csv_f64(v)
    }
}

pub fn train_log_row(e: &EpisodeRecord) -> Vec<String> {
    vec![
        e.step.to_string(),
        e.episode.to_string(),
        csv_f64(e.episode_return),
        nan_free(e.critic_loss),
        nan_free(e.actor_loss),
    ]
}

fn eval_log_row(e: &EvalRecord) -> Vec<String> {
    vec![e.step.to_string(), csv_f64(e.eval_return), e.exits.to_string()]
}

/// Trains without touching the file system.
pub fn train_in_memory(cfg: &ExperimentConfig, gain: &EnvelopeGain) -> Result<TrainOutcome, CliError> {
    let env = TrainEnv {
        plant: &cfg.plant,
        safety: &cfg.safety,
        gain,
    };
    Ok(train::train(&env, &cfg.agent, &train_config(cfg, gain.p()), |_| {}, |_| {})?)
}

/// Trains and writes `train_log.csv`, `eval_log.csv` and `checkpoint.bin`.
pub fn cmd_train(run: &mut Run) -> Result<TrainOutcome, CliError> {
    let gain = load_or_synth_gain(run)?;
    let outcome = train_in_memory(&run.cfg, &gain)?;
    let mut log = Csv::new(&TRAIN_LOG_HEADER);
    for e in &outcome.episodes {
        log.row(&train_log_row(e));
    }
    let mut evals = Csv::new(&["step", "eval_return", "exits"]);
    for e in &outcome.evals {
        evals.row(&eval_log_row(e));
    }
    run.write_csv(TRAIN_LOG, "train_log/1", &log)?;
    run.write_csv(EVAL_LOG, "eval_log/1", &evals)?;
    let ck = formats::encode_checkpoint(&outcome.agent, run.config_hash);
    run.manifest.write(CHECKPOINT, "checkpoint/1", &ck)?;
    if let Some(err) = &outcome.aborted {
        let mut dump = format!("error = {err}\nsteps = {}\nepisodes = {}\n", outcome.steps, outcome.episodes.len());
        for e in outcome.episodes.iter().rev().take(10) {
            let _ = writeln!(dump, "episode {} step {} return {:?} critic_loss {:?} actor_loss {:?}", e.episode, e.step, e.episode_return, e.critic_loss, e.actor_loss);
        }
        run.manifest.write("abort.txt", "report/1", dump.as_bytes())?;
        run.finish()?;
        return Err(CliError::TrainingAborted(err.to_string()));
    }
    run.finish()?;
    Ok(outcome)
}

pub fn load_agent(run: &Run, checkpoint: Option<&Path>) -> Result<AgentParams, CliError> {
    let path = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| run.out.join(CHECKPOINT));
    let (_, agent) = formats::read_checkpoint(&path, &run.cfg.agent)?;
    Ok(agent)
}

/// Per-step trajectory table.
pub fn trajectory_csv(traj: &Trajectory, gain: &EnvelopeGain, reward: &RewardConfig) -> Result<Csv, CliError> {
    let mut csv = Csv::new(&TRAJECTORY_HEADER);
    for (k, rec) in traj.steps.iter().enumerate() {
        let s = &rec.state;
        let r = phy::reward(gain, reward, s, rec.command.a_drl, &rec.next)?;
        let v = phy::lyapunov_value(gain.p(), s)?;
        let rt = phy::r_term(gain, s, &rec.next)?;
        csv.row(&[
            k.to_string(),
            csv_f64(s[0]),
            csv_f64(s[1]),
            csv_f64(s[2]),
            csv_f64(s[3]),
            csv_f64(rec.command.a_phy),
            csv_f64(rec.command.a_drl),
            csv_f64(rec.command.applied.value),
            csv_f64(r),
            csv_f64(v),
            csv_f64(rt),
        ]);
    }
    Ok(csv)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub safety_exit: Option<usize>,
    pub steps: usize,
    pub final_abs_x: f64,
    pub final_abs_theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub model_based: Vec<EpisodeMetrics>,
    pub phydrl: Vec<EpisodeMetrics>,
}

impl EvalSummary {
    pub fn model_based_exits(&self) -> usize {
        self.model_based.iter().filter(|m| m.safety_exit.is_some()).count()
    }

    pub fn phydrl_exits(&self) -> usize {
        self.phydrl.iter().filter(|m| m.safety_exit.is_some()).count()
    }
}

fn metrics(traj: &Trajectory) -> EpisodeMetrics {
    let last = traj.final_state();
    EpisodeMetrics {
        safety_exit: traj.safety_exit,
        steps: traj.steps.len(),
        final_abs_x: last[0].abs(),
        final_abs_theta: last[2].abs(),
    }
}

/// Model-based-only and Phy-DRL rollouts from matched initial states, in memory.
pub fn evaluate_in_memory(
    cfg: &ExperimentConfig,
    gain: &EnvelopeGain,
    agent: &AgentParams,
) -> Result<(Vec<Trajectory>, Vec<Trajectory>), CliError> {
    let region = cfg.eval.init.to_region(gain.p());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.eval.seed);
    let inits = (0..cfg.eval.episodes)
        .map(|_| region.sample(&mut rng).map(|s| s.to_vector()))
        .collect::<Result<Vec<_>, _>>()?;
    let opts = RolloutOptions {
        horizon: cfg.eval.horizon,
        stop_on_exit: true,
    };
    let model_based = Controller::residual(&ZeroPolicy, gain.f());
    let phydrl = if cfg.train.residual {
        Controller::residual(agent, gain.f())
    } else {
        Controller::policy_only(agent)
    };
    let mut mb = Vec::new();
    let mut pd = Vec::new();
    for s0 in &inits {
        mb.push(rollout::rollout(&cfg.plant, &model_based, Some(&cfg.safety), s0, opts)?);
        pd.push(rollout::rollout(&cfg.plant, &phydrl, Some(&cfg.safety), s0, opts)?);
    }
    Ok((mb, pd))
}

/// Writes `eval/<controller>_<k>.csv` trajectories and `eval/metrics.csv`.
pub fn cmd_eval(run: &mut Run, checkpoint: Option<&Path>) -> Result<EvalSummary, CliError> {
    let gain = load_or_synth_gain(run)?;
    let agent = load_agent(run, checkpoint)?;
    let (mb, pd) = evaluate_in_memory(&run.cfg, &gain, &agent)?;
    let mut table = Csv::new(&[
        "controller",
        "init",
        "safety_exit",
        "exit_step",
        "steps",
        "final_abs_x",
        "final_abs_theta",
    ]);
    let mut summary = EvalSummary {
        model_based: Vec::new(),
        phydrl: Vec::new(),
    };
    for (name, trajs) in [("model_based", &mb), ("phydrl", &pd)] {
        for (k, traj) in trajs.iter().enumerate() {
            let csv = trajectory_csv(traj, &gain, &run.cfg.reward)?;
            run.write_csv(&format!("eval/{name}_{k}.csv"), "trajectory/1", &csv)?;
            let m = metrics(traj);
            table.row(&[
                name.to_string(),
                k.to_string(),
                if m.safety_exit.is_some() { "y" } else { "n" }.to_string(),
                m.safety_exit.map_or(String::new(), |s| s.to_string()),
                m.steps.to_string(),
                csv_f64(m.final_abs_x),
                csv_f64(m.final_abs_theta),
            ]);
            if name == "model_based" {
                summary.model_based.push(m);
            } else {
                summary.phydrl.push(m);
            }
        }
    }
    run.write_csv("eval/metrics.csv", "eval_metrics/1", &table)?;
    run.finish()?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct AnalysisSummary {
    pub beta: BetaEstimate,
    pub theorem: TheoremReport,
    pub invariance: InvarianceReport,
    pub audit: AuditReport,
    pub beta_underestimate: bool,
}

impl AnalysisSummary {
    pub fn text(&self) -> String {
        let mut o = String::new();
        let b = &self.beta;
        let _ = writeln!(o, "beta.kind = {:?}", b.kind);
        let _ = writeln!(o, "beta.const_bound = {:e}", b.const_bound);
        let _ = writeln!(o, "beta.quad_trace = {:e}", b.quad_matrix.trace());
        let _ = writeln!(o, "beta.samples = {}", b.sample_count);
        let _ = writeln!(o, "beta.max_observed_r = {:e}", b.max_observed_r);
        let _ = writeln!(o, "beta.headroom = {}", b.headroom);
        let t = &self.theorem;
        let _ = writeln!(o, "theorem.states = {}", t.states_checked);
        let _ = writeln!(o, "theorem.safety_condition = {}", t.safety_condition_holds);
        let _ = writeln!(o, "theorem.worst_safety_ratio = {:e}", t.worst_safety_ratio);
        let _ = writeln!(o, "theorem.stability_condition = {}", t.stability_condition_holds);
        let _ = writeln!(o, "theorem.worst_stability_margin = {:e}", t.worst_stability_margin);
        let _ = writeln!(o, "theorem.violations = {}", t.violating_states.len());
        let verdict = match t.verdict() {
            analysis::Verdict::SafetyAndStability => "safety and stability guaranteed",
            analysis::Verdict::SafetyOnly => "only safety guaranteed",
            analysis::Verdict::StabilityOnly => "stability condition only (safety not guaranteed)",
            analysis::Verdict::Neither => "no guarantee",
        };
        let _ = writeln!(o, "theorem.verdict = {verdict}");
        let i = &self.invariance;
        let _ = writeln!(o, "invariance.rollouts = {}", i.records.len());
        let _ = writeln!(o, "invariance.boundary_starts = {}", i.boundary_starts());
        let _ = writeln!(o, "invariance.exits = {}", i.exits());
        let _ = writeln!(o, "invariance.max_level = {:e}", i.max_level());
        let a = &self.audit;
        let _ = writeln!(o, "audit.steps = {}", a.steps);
        let _ = writeln!(o, "audit.max_residual = {:e}", a.max_residual);
        let _ = writeln!(o, "audit.slack_min = {:e}", a.slack_min);
        let _ = writeln!(o, "audit.slack_max = {:e}", a.slack_max);
        let _ = writeln!(o, "beta_underestimate = {}", self.beta_underestimate);
        o
    }
}

/// Runs every analysis in memory.
pub fn analyze_in_memory(
    cfg: &ExperimentConfig,
    gain: &EnvelopeGain,
    agent: &AgentParams,
) -> Result<AnalysisSummary, CliError> {
    let a = &cfg.analysis;
    let controller = if cfg.train.residual {
        Controller::residual(agent, gain.f())
    } else {
        Controller::policy_only(agent)
    };
    let env = Envelope::new(gain.p().clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);

    let beta_inits = analysis::sample_envelope(&env, a.beta_rollouts, 0, &mut rng)?;
    let opts = RolloutOptions {
        horizon: a.beta_horizon,
        stop_on_exit: true,
    };
    let beta_trajs = beta_inits
        .iter()
        .map(|s0| rollout::rollout(&cfg.plant, &controller, Some(&cfg.safety), s0, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let kind = if a.beta_kind == "quadratic" {
        BetaKind::QuadraticInState
    } else {
        BetaKind::Constant
    };
    let beta = analysis::estimate_beta(&beta_trajs, gain, kind, a.headroom)?;

    let states = analysis::sample_envelope(&env, a.envelope_samples, 0, &mut rng)?;
    let theorem = analysis::check_theorem(&beta, gain, &states);

    let inits = analysis::sample_envelope(&env, a.invariance_rollouts, a.boundary_starts, &mut rng)?;
    let (invariance, inv_trajs) = analysis::invariance_rollout(&controller, gain, &cfg.plant, &inits, a.horizon)?;

    let mut audit = AuditReport {
        max_residual: 0.0,
        slack_min: f64::INFINITY,
        slack_max: f64::NEG_INFINITY,
        steps: 0,
    };
    for t in beta_trajs.iter().chain(&inv_trajs) {
        let r = analysis::lyapunov_audit(t, gain)?;
        if r.steps > 0 {
            audit.max_residual = audit.max_residual.max(r.max_residual);
            audit.slack_min = audit.slack_min.min(r.slack_min);
            audit.slack_max = audit.slack_max.max(r.slack_max);
            audit.steps += r.steps;
        }
    }
    let beta_underestimate = analysis::beta_underestimate(&theorem, &invariance);
    Ok(AnalysisSummary {
        beta,
        theorem,
        invariance,
        audit,
        beta_underestimate,
    })
}

/// Writes `analysis/summary.txt` and `analysis/invariance.csv`.
pub fn cmd_analyze(run: &mut Run, checkpoint: Option<&Path>) -> Result<AnalysisSummary, CliError> {
    let gain = load_or_synth_gain(run)?;
    let agent = load_agent(run, checkpoint)?;
    let summary = analyze_in_memory(&run.cfg, &gain, &agent)?;
    let mut csv = Csv::new(&[
        "init",
        "initial_level",
        "boundary_start",
        "max_level",
        "exit_step",
        "v_nonincreasing",
        "steps",
    ]);
    for (k, r) in summary.invariance.records.iter().enumerate() {
        csv.row(&[
            k.to_string(),
            csv_f64(r.initial_level),
            r.boundary_start.to_string(),
            csv_f64(r.max_level),
            r.exit_step.map_or(String::new(), |s| s.to_string()),
            r.v_nonincreasing.to_string(),
            r.steps.to_string(),
        ]);
    }
    run.write_csv("analysis/invariance.csv", "invariance/1", &csv)?;
    run.manifest
        .write("analysis/summary.txt", "report/1", summary.text().as_bytes())?;
    run.finish()?;
    Ok(summary)
}

/// One cell of the {reward variant} x {residual} comparison matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arm {
    pub variant: RewardVariant,
    pub residual: bool,
}

impl Arm {
    pub const ALL: [Arm; 4] = [
        Arm {
            variant: RewardVariant::SafetyAndStability,
            residual: true,
        },
        Arm {
            variant: RewardVariant::SafetyAndStability,
            residual: false,
        },
        Arm {
            variant: RewardVariant::StabilityOnly,
            residual: true,
        },
        Arm {
            variant: RewardVariant::StabilityOnly,
            residual: false,
        },
    ];

    pub fn label(&self) -> String {
        let v = match self.variant {
            RewardVariant::SafetyAndStability => "ss",
            RewardVariant::StabilityOnly => "s",
        };
        format!("{v}_{}", if self.residual { "residual" } else { "no_residual" })
    }

    pub fn apply(&self, cfg: &ExperimentConfig) -> ExperimentConfig {
        let mut c = cfg.clone();
        c.reward.variant = self.variant;
        c.train.residual = self.residual;
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmResult {
    pub arm: Arm,
    pub seed: u64,
    pub steps_to_threshold: Option<u64>,
    pub final_eval_return: Option<f64>,
}

/// Median with unreached thresholds ordered last.
pub fn median_steps(values: &[Option<u64>]) -> Option<u64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<u64> = values.iter().map(|x| x.unwrap_or(u64::MAX)).collect();
    v.sort_unstable();
    let m = v[(v.len() - 1) / 2];
    (m != u64::MAX).then_some(m)
}

/// Trains every arm for every `compare.seeds` entry, stopping each run once its
/// evaluation reaches `compare.threshold`.
pub fn cmd_compare(run: &mut Run) -> Result<Vec<ArmResult>, CliError> {
    let gain = load_or_synth_gain(run)?;
    let threshold = run.cfg.compare.threshold;
    let mut results = Vec::new();
    let mut table = Csv::new(&["arm", "seed", "steps_to_threshold", "final_eval_return"]);
    for arm in Arm::ALL {
        for &seed in &run.cfg.compare.seeds.clone() {
            let mut cfg = arm.apply(&run.cfg).with_seed(seed);
            cfg.train.stop_at_eval_return = Some(threshold);
            let outcome = train_in_memory(&cfg, &gain)?;
            if let Some(err) = &outcome.aborted {
                return Err(CliError::TrainingAborted(format!("{} seed {seed}: {err}", arm.label())));
            }
            let mut log = Csv::new(&TRAIN_LOG_HEADER);
            for e in &outcome.episodes {
                log.row(&train_log_row(e));
            }
            run.write_csv(&format!("compare/{}_seed{seed}.csv", arm.label()), "train_log/1", &log)?;
            let r = ArmResult {
                arm,
                seed,
                steps_to_threshold: outcome.steps_to_threshold(threshold),
                final_eval_return: outcome.evals.last().map(|e| e.eval_return),
            };
            table.row(&[
                arm.label(),
                seed.to_string(),
                r.steps_to_threshold.map_or(String::new(), |s| s.to_string()),
                r.final_eval_return.map_or(String::new(), csv_f64),
            ]);
            results.push(r);
        }
    }
    run.write_csv("compare/summary.csv", "compare/1", &table)?;
    run.finish()?;
    Ok(results)
}

/// Fits plant masses and length to `model.a`/`model.b`; writes `calibration.txt`.
pub fn cmd_calibrate(run: &mut Run) -> Result<(PlantParams, Mat, Mat), CliError> {
    let start = run.cfg.plant.frictionless();
    let fitted = plant::calibrate(&run.cfg.model_a, &run.cfg.model_b, &start)?;
    let (a, b) = plant::linearize(&fitted);
    let mut text = String::new();
    let _ = writeln!(text, "plant.cart_mass = {:.6}", fitted.cart_mass);
    let _ = writeln!(text, "plant.pole_mass = {:.6}", fitted.pole_mass);
    let _ = writeln!(text, "plant.pole_half_length = {:.6}", fitted.pole_half_length);
    let _ = writeln!(text, "# linearized A = {}", crate::config::fmt_matrix(&a));
    let _ = writeln!(text, "# linearized B = {}", crate::config::fmt_matrix(&b));
    run.manifest.write("calibration.txt", "report/1", text.as_bytes())?;
    run.finish()?;
    Ok((fitted, a, b))
}

