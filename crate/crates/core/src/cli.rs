//! Command-line front end: `gen`, `solve`, `train`, `eval`, `bound-check`,
//! `sweep`, `plot`.
//!
//! `--config PATH` names a `key = value` file whose keys are long flag names;
//! its entries are applied first so explicit flags win. Exit codes: 0 success,
//! 1 usage error, 2 runtime failure (including a failed bound check).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::agents::{run_skipper, AgentConfig, AgentKind, Curriculum, TrainingLog, Variant};
use crate::dp::oracle_csv;
use crate::experiments::{bound_check, plot_svg, sweep, sweep_csv, sweep_summary, BoundConfig, SweepSpec};
use crate::generator::{CandidateSource, GeneratorConfig, TargetGenerator};
use crate::gridworld::{ActionSpace, EnvJson, Task, TaskSpec};
use crate::proxy::build_proxy;
use crate::replay::MixtureSpec;
use crate::search::{heuristic_success, Heuristic};
use crate::{Code, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "tapkit", version, about = "Tabular checkpoint planning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Emit an environment instance as JSON.
    Gen(GenArgs),
    /// Emit the pairwise oracle CSV of an instance.
    Solve(SolveArgs),
    /// Train an agent and emit its log CSV.
    Train(TrainArgs),
    /// Zero-shot success per difficulty, for a trained agent or tree-search MPC.
    Eval(EvalArgs),
    /// Check the composite-value error bound on random proxy instances.
    BoundCheck(BoundArgs),
    /// Seed × configuration grid of training runs.
    Sweep(SweepArgs),
    /// Render a log CSV as SVG line charts.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EnvKind {
    Rds,
    Ssm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ActionArg {
    Tof,
    Abs,
    Taf,
}

#[derive(Args, Debug)]
struct IoArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key = value` defaults, overridden by flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EnvArgs {
    #[arg(long, value_enum, default_value = "rds")]
    env: EnvKind,
    #[arg(long, num_args = 2, value_names = ["W", "H"], default_values_t = [6, 6])]
    size: Vec<usize>,
    #[arg(long, default_value_t = 0.25)]
    difficulty: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "abs")]
    action_space: ActionArg,
    #[arg(long, default_value_t = 0.0)]
    action_noise: f64,
}

impl EnvArgs {
    fn spec(&self) -> TaskSpec {
        let (w, h) = (self.size[0], self.size[1]);
        let base = match self.env {
            EnvKind::Rds => TaskSpec::rds(w, h, self.difficulty, self.seed),
            EnvKind::Ssm => TaskSpec::ssm(w, h, self.difficulty, self.seed),
        };
        let space = match self.action_space {
            ActionArg::Tof => ActionSpace::TurnOrForward,
            ActionArg::Abs => ActionSpace::AbsoluteDirection,
            ActionArg::Taf => ActionSpace::TurnAndForward,
        };
        base.with_action_space(space).with_noise(self.action_noise)
    }
}

#[derive(Args, Debug)]
struct AgentArgs {
    /// q, skipper-once, skipper-regen, dyna or dyna-plus.
    #[arg(long, default_value = "skipper-once")]
    agent: String,
    /// Relabel mixture: episode, future, pertask, generate, eg, ep, epg.
    #[arg(long, default_value = "epg")]
    relabel: String,
    #[arg(long, default_value_t = 20_000)]
    steps: u64,
    /// Training instances drawn from the environment flags.
    #[arg(long, default_value_t = 1)]
    n_train: usize,
    /// Zero-shot instances per OOD difficulty (0 disables).
    #[arg(long, default_value_t = 0)]
    n_ood: usize,
    /// Log every N steps; 0 logs once at the end.
    #[arg(long, default_value_t = 0)]
    eval_every: u64,
    #[arg(long, default_value_t = 1)]
    eval_episodes: usize,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    /// Reject checkpoints the evaluator judges infeasible.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    gated: bool,
    /// Generator G1 injection rate.
    #[arg(long, default_value_t = 0.03)]
    g1_rate: f64,
    /// Generator G2 injection rate.
    #[arg(long, default_value_t = 0.05)]
    g2_rate: f64,
    /// Dyna hallucinated next-state rate.
    #[arg(long, default_value_t = 0.0)]
    inject_rate: f64,
    /// Feasibility-error sample size per class.
    #[arg(long, default_value_t = 200)]
    error_pairs: usize,
}

impl AgentArgs {
    fn config(&self, seed: u64) -> Result<AgentConfig> {
        Ok(AgentConfig {
            gamma: self.gamma,
            batch_size: self.batch_size,
            mixture: MixtureSpec::parse(&self.relabel)?,
            seed,
            steps: self.steps,
            eval_every: self.eval_every,
            eval_episodes: self.eval_episodes,
            generator: GeneratorConfig { g1_rate: self.g1_rate, g2_rate: self.g2_rate, ..GeneratorConfig::default() },
            gated: self.gated,
            error_pairs: self.error_pairs,
            inject_rate: self.inject_rate,
            ..AgentConfig::default()
        })
    }
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct GenArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct SolveArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    /// Discount defining the goal-reaching policy.
    #[arg(long, default_value_t = 0.95)]
    gamma_int: f64,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct TrainArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[command(flatten)]
    agent: AgentArgs,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct EvalArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[command(flatten)]
    agent: AgentArgs,
    /// Evaluate tree-search MPC instead of a trained agent.
    #[arg(long)]
    heuristic: Option<String>,
    #[arg(long, default_value_t = 15)]
    budget: usize,
    /// Write the proxy problem built at the first training start state as JSON.
    #[arg(long)]
    dump_proxy: Option<PathBuf>,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct BoundArgs {
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-4)]
    eps_v: f64,
    #[arg(long, default_value_t = 1e-4)]
    eps_gamma: f64,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// All edge errors at full size with the same sign.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    aligned: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct SweepArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// `--agent` and `--relabel` accept comma-separated lists here.
    #[command(flatten)]
    agent: AgentArgs,
    /// Number of agent seeds, 0..N.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Per-configuration summary of final rows.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct PlotArgs {
    /// Training log CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "training log")]
    title: String,
    #[command(flatten)]
    io: IoArgs,
}

/// Parse a `key = value` file into flag tokens.
pub fn config_tokens(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("config line {}: expected `key = value`", n + 1)))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(Error::Usage(format!("config line {}: bad key", n + 1)));
        }
        out.push(format!("--{key}"));
        out.extend(value.split_whitespace().map(str::to_string));
    }
    Ok(out)
}

/// Splice config-file flags right after the subcommand so explicit flags override them.
fn expand_config(argv: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Usage(format!("cannot read config {path}: {e}")))?;
    let tokens = config_tokens(&text)?;
    let Some(sub) = argv.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1) else {
        return Ok(argv);
    };
    let mut out = argv[..=sub].to_vec();
    out.extend(tokens);
    out.extend_from_slice(&argv[sub + 1..]);
    Ok(out)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn curriculum(env: &EnvArgs, agent: &AgentArgs) -> Result<Curriculum> {
    let spec = env.spec();
    spec.validate().map_err(|e| Error::Usage(e.to_string()))?;
    Curriculum::standard(&spec, agent.n_train.max(1), agent.n_ood)
}

fn gen(a: GenArgs) -> Result<()> {
    let spec = a.env.spec();
    spec.validate().map_err(|e| Error::Usage(e.to_string()))?;
    let task = Task::new(spec)?;
    let json = serde_json::to_string_pretty(&EnvJson::new(&task.spec, &task.layout))?;
    emit(a.io.out.as_deref(), &(json + "\n"))
}

fn solve(a: SolveArgs) -> Result<()> {
    let spec = a.env.spec();
    spec.validate().map_err(|e| Error::Usage(e.to_string()))?;
    let task = Task::new(spec)?;
    emit(a.io.out.as_deref(), &oracle_csv(&task, a.gamma, a.gamma_int))
}

fn train(a: TrainArgs) -> Result<()> {
    let kind = AgentKind::parse(&a.agent.agent).map_err(usage)?;
    let cfg = a.agent.config(a.env.seed).map_err(usage)?;
    let curr = curriculum(&a.env, &a.agent)?;
    let log = crate::agents::run_agent(kind, &curr, &cfg)?;
    emit(a.io.out.as_deref(), &log.to_csv())
}

const EVAL_HEADER: &str = "agent,split,difficulty,instances,episodes,success_rate\n";

fn eval_rows(out: &mut String, name: &str, curr: &Curriculum, episodes: usize, rates: &[f64]) {
    writeln!(out, "{name},train,{},{},{episodes},{:.6}", curr.train[0].spec.difficulty, curr.train.len(), rates[0])
        .unwrap();
    for (i, (d, tasks)) in curr.ood.iter().enumerate() {
        writeln!(out, "{name},ood,{d},{},{episodes},{:.6}", tasks.len(), rates[i + 1]).unwrap();
    }
}

fn eval(mut a: EvalArgs) -> Result<()> {
    if a.agent.n_ood == 0 {
        a.agent.n_ood = 5;
    }
    let curr = curriculum(&a.env, &a.agent)?;
    let mut out = String::from(EVAL_HEADER);
    if let Some(h) = &a.heuristic {
        if a.dump_proxy.is_some() {
            return Err(Error::Usage("--dump-proxy needs a checkpoint-planning agent, not --heuristic".into()));
        }
        let heuristic = Heuristic::parse(h).map_err(usage)?;
        let episodes = a.agent.eval_episodes.max(1);
        let mean = |tasks: &[Task]| {
            let r = heuristic_success(tasks, a.agent.gamma, a.budget, heuristic, episodes, a.env.seed);
            r.iter().sum::<f64>() / r.len().max(1) as f64
        };
        let mut rates = vec![mean(&curr.train)];
        rates.extend(curr.ood.iter().map(|(_, t)| mean(t)));
        eval_rows(&mut out, heuristic.name(), &curr, episodes, &rates);
        return emit(a.io.out.as_deref(), &out);
    }
    let kind = AgentKind::parse(&a.agent.agent).map_err(usage)?;
    let cfg = a.agent.config(a.env.seed).map_err(usage)?;
    let log = match (kind, &a.dump_proxy) {
        (AgentKind::SkipperOnce | AgentKind::SkipperRegen, Some(path)) => {
            let variant = if kind == AgentKind::SkipperOnce { Variant::Once } else { Variant::Regen };
            let run = run_skipper(&curr, &cfg, variant)?;
            let task = &curr.train[0];
            let generator = TargetGenerator::new(
                GeneratorConfig { source: CandidateSource::FullEnumeration, ..cfg.generator },
                &curr.train,
                None,
            );
            let est = &run.estimators;
            let gate = |f: Code, t: Code| est.evaluator.feasible(f, t, cfg.gate_threshold);
            let start = task.code_of(task.mdp.sample_initial(&mut crate::rng(cfg.seed)));
            let proxy = build_proxy(
                0,
                start,
                &generator,
                &est.edges(task),
                cfg.gated.then_some(&gate as crate::proxy::Gate),
                &cfg.proxy,
                &mut crate::rng(cfg.seed ^ 0xd0),
            )?;
            std::fs::write(path, proxy.to_json()? + "\n")?;
            run.log
        }
        (_, Some(_)) => return Err(Error::Usage("--dump-proxy needs --agent skipper-once or skipper-regen".into())),
        (_, None) => crate::agents::run_agent(kind, &curr, &cfg)?,
    };
    let row = log.last().ok_or_else(|| Error::Usage("--steps must be positive".into()))?;
    let mut rates = vec![row.train_success];
    rates.extend(row.ood.iter().take(curr.ood.len()).copied());
    eval_rows(&mut out, kind.name(), &curr, cfg.eval_episodes, &rates);
    emit(a.io.out.as_deref(), &out)
}

fn bound(a: BoundArgs) -> Result<bool> {
    let cfg = BoundConfig {
        gamma: a.gamma,
        eps_v: a.eps_v,
        eps_gamma: a.eps_gamma,
        trials: a.trials,
        aligned: a.aligned,
        seed: a.seed,
        ..BoundConfig::default()
    };
    let report = bound_check(&cfg)?;
    if let Some(p) = &a.io.out {
        std::fs::write(p, report.to_csv())?;
    }
    println!("{}", report.summary());
    Ok(report.passed())
}

fn run_sweep(a: SweepArgs) -> Result<()> {
    let agents = a.agent.agent.split(',').map(|s| AgentKind::parse(s.trim())).collect::<Result<Vec<_>>>().map_err(usage)?;
    let relabels: Vec<String> = a.agent.relabel.split(',').map(|s| s.trim().to_string()).collect();
    for r in &relabels {
        MixtureSpec::parse(r).map_err(usage)?;
    }
    let base = AgentArgs { relabel: relabels[0].clone(), ..a.agent };
    let spec =
        SweepSpec { agents, relabels, seeds: (0..a.seeds).collect(), base: base.config(0).map_err(usage)? };
    let curr = curriculum(&a.env, &base)?;
    let runs = sweep(&curr, &spec)?;
    if let Some(p) = &a.summary {
        std::fs::write(p, sweep_summary(&runs))?;
    }
    emit(a.io.out.as_deref(), &sweep_csv(&runs))
}

fn plot(a: PlotArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.input)?;
    let log = TrainingLog::from_csv(&text)?;
    emit(a.io.out.as_deref(), &plot_svg(&log, &a.title))
}

fn usage(e: Error) -> Error {
    match e {
        Error::Usage(_) => e,
        other => Error::Usage(other.to_string()),
    }
}

/// Run with an explicit argv (first element is the program name); returns the exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::BoundCheck(a) => match bound(a) {
            Ok(true) => Ok(()),
            Ok(false) => return 2,
            Err(e) => Err(e),
        },
        Command::Sweep(a) => run_sweep(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => 0,
        Err(e @ Error::Usage(_)) | Err(e @ Error::InvalidSpec(_)) => {
            eprintln!("error: {e}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_lines_become_flags() {
        let t = config_tokens("# c\nsize = 8 8\naction_noise=0.1\n\n").unwrap();
        assert_eq!(t, ["--size", "8", "8", "--action-noise", "0.1"]);
        assert!(config_tokens("nonsense").is_err());
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run(vec!["tapkit".into(), "gen".into(), "--bogus".into()]), 1);
    }
}
