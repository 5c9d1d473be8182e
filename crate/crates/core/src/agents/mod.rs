//! Agent loops: tabular Q-learning, the checkpoint-planning agent, and Dyna.
//!
//! Every runner is a pure function of `(curriculum, config)`; all randomness
//! flows from `config.seed`.

mod dyna;
mod q;
mod skipper;

pub use dyna::{run_dyna, CorruptedModel, DynaRun};
pub use q::{greedy_success, q_error, run_q_baseline, CodeQ, QRun};
pub use skipper::{
    evaluate as evaluate_skipper, run_skipper, skipper_episode, EpisodeResult, Estimators, PlannerParts, Selection, SkipperRun, Variant,
};

use std::fmt::Write as _;

use rand::Rng as _;

use crate::generator::GeneratorConfig;
use crate::gridworld::{Task, TaskSpec};
use crate::proxy::ProxyConfig;
use crate::replay::MixtureSpec;
use crate::{Error, Result, Rng};

pub const LOG_HEADER: &str =
    "step,train_success,ood_025,ood_035,ood_045,ood_055,e0_err,e1_err,e2_err,delusion_freq_g1,delusion_freq_g2,reject_rate";

pub const OOD_DIFFICULTIES: [f64; 4] = [0.25, 0.35, 0.45, 0.55];

/// Linear ε annealing from `start` to `end` over `anneal_steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExplorationSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_steps: u64,
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        Self { start: 1.0, end: 0.05, anneal_steps: 50_000 }
    }
}

impl ExplorationSchedule {
    pub fn epsilon(&self, step: u64) -> f64 {
        if step >= self.anneal_steps || self.anneal_steps == 0 {
            return self.end;
        }
        let f = step as f64 / self.anneal_steps as f64;
        self.start + f * (self.end - self.start)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AgentKind {
    Q,
    SkipperOnce,
    SkipperRegen,
    Dyna,
    DynaPlus,
}

impl AgentKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "q" => AgentKind::Q,
            "skipper-once" => AgentKind::SkipperOnce,
            "skipper-regen" => AgentKind::SkipperRegen,
            "dyna" => AgentKind::Dyna,
            "dyna-plus" => AgentKind::DynaPlus,
            _ => return Err(Error::Usage(format!("unknown agent {s:?}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Q => "q",
            AgentKind::SkipperOnce => "skipper-once",
            AgentKind::SkipperRegen => "skipper-regen",
            AgentKind::Dyna => "dyna",
            AgentKind::DynaPlus => "dyna-plus",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    /// Discount of the intrinsic reaching reward.
    pub gamma_int: f64,
    pub replan_interval: usize,
    pub train_every: usize,
    /// Relabeled pairs per transition at episode end.
    pub relabel_count: usize,
    pub batch_size: usize,
    pub mixture: MixtureSpec,
    pub seed: u64,
    pub steps: u64,
    /// 0 logs only at the end.
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub exploration: ExplorationSchedule,
    pub generator: GeneratorConfig,
    pub proxy: ProxyConfig,
    /// Reject checkpoints the evaluator judges infeasible.
    pub gated: bool,
    pub gate_threshold: f64,
    /// Per-class sample size for feasibility errors.
    pub error_pairs: usize,
    pub inject_rate: f64,
    /// Dyna+ acceptance threshold on p(D = 1).
    pub accept_threshold: f64,
    /// Default 2·W·H.
    pub episode_limit: Option<usize>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gamma_int: 0.95,
            replan_interval: 8,
            train_every: 4,
            relabel_count: 4,
            batch_size: 16,
            mixture: MixtureSpec::epg(),
            seed: 0,
            steps: 100_000,
            eval_every: 0,
            eval_episodes: 1,
            exploration: ExplorationSchedule::default(),
            generator: GeneratorConfig::default(),
            proxy: ProxyConfig::default(),
            gated: false,
            gate_threshold: 0.5,
            error_pairs: 200,
            inject_rate: 0.0,
            accept_threshold: 0.5,
            episode_limit: None,
        }
    }
}

impl AgentConfig {
    pub fn episode_limit(&self, task: &Task) -> usize {
        self.episode_limit.unwrap_or(2 * task.spec.width * task.spec.height)
    }

    /// Whether a log row is due after `step` steps.
    pub(crate) fn log_due(&self, step: u64) -> bool {
        step == self.steps || (self.eval_every > 0 && step % self.eval_every == 0)
    }
}

/// Training instances plus zero-shot evaluation instances per difficulty.
#[derive(Clone, Debug)]
pub struct Curriculum {
    pub train: Vec<Task>,
    /// `(difficulty, instances)` in `OOD_DIFFICULTIES` order; may be empty.
    pub ood: Vec<(f64, Vec<Task>)>,
}

impl Curriculum {
    /// `n_train` instances at `base.difficulty` and `n_ood` per OOD difficulty,
    /// seeds derived from `base.seed`. Seeds whose generation fails are skipped.
    pub fn standard(base: &TaskSpec, n_train: usize, n_ood: usize) -> Result<Self> {
        let mut seeds = crate::rng(base.seed ^ 0x5eed_c0de);
        let mut draw = |difficulty: f64, n: usize| -> Result<Vec<Task>> {
            let mut out = Vec::with_capacity(n);
            let mut tries = 0;
            while out.len() < n {
                tries += 1;
                if tries > 20 * n.max(1) {
                    return Err(Error::GenerationFailed { attempts: tries });
                }
                let spec = TaskSpec { difficulty, seed: seeds.gen(), ..base.clone() };
                match Task::new(spec) {
                    Ok(t) => out.push(t),
                    Err(Error::GenerationFailed { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            Ok(out)
        };
        let train = draw(base.difficulty, n_train)?;
        let mut ood = Vec::new();
        if n_ood > 0 {
            for d in OOD_DIFFICULTIES {
                ood.push((d, draw(d, n_ood)?));
            }
        }
        Ok(Self { train, ood })
    }

    /// One training instance, no OOD evaluation.
    pub fn single(task: Task) -> Self {
        Self { train: vec![task], ood: Vec::new() }
    }
}

/// One log line; `NaN` marks a column the agent does not produce.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub step: u64,
    pub train_success: f64,
    pub ood: [f64; 4],
    pub errors: [f64; 3],
    pub delusion: [f64; 2],
    pub reject_rate: f64,
}

impl LogRow {
    pub fn new(step: u64) -> Self {
        Self { step, train_success: f64::NAN, ood: [f64::NAN; 4], errors: [f64::NAN; 3], delusion: [f64::NAN; 2], reject_rate: f64::NAN }
    }

    pub fn values(&self) -> [f64; 11] {
        let mut v = [0.0; 11];
        v[0] = self.train_success;
        v[1..5].copy_from_slice(&self.ood);
        v[5..8].copy_from_slice(&self.errors);
        v[8..10].copy_from_slice(&self.delusion);
        v[10] = self.reject_rate;
        v
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(LOG_HEADER);
        out.push('\n');
        for r in &self.rows {
            write!(out, "{}", r.step).unwrap();
            for x in r.values() {
                write!(out, ",{x:.6}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(LOG_HEADER) {
            return Err(Error::Usage("not a training log: header mismatch".into()));
        }
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 12 {
                return Err(Error::Usage(format!("bad log row: {line}")));
            }
            let bad = |_| Error::Usage(format!("bad log row: {line}"));
            let mut row = LogRow::new(cells[0].parse().map_err(|_| Error::Usage(format!("bad step: {line}")))?);
            let v: Vec<f64> = cells[1..].iter().map(|c| c.parse::<f64>().map_err(bad)).collect::<Result<_>>()?;
            row.train_success = v[0];
            row.ood.copy_from_slice(&v[1..5]);
            row.errors.copy_from_slice(&v[5..8]);
            row.delusion.copy_from_slice(&v[8..10]);
            row.reject_rate = v[10];
            rows.push(row);
        }
        Ok(Self { rows })
    }

    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }
}

/// Draw an index from a probability vector.
pub(crate) fn sample_index(dist: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Dispatch by agent kind; returns the training log.
pub fn run_agent(kind: AgentKind, curriculum: &Curriculum, cfg: &AgentConfig) -> Result<TrainingLog> {
    Ok(match kind {
        AgentKind::Q => run_q_baseline(curriculum, cfg)?.log,
        AgentKind::SkipperOnce => run_skipper(curriculum, cfg, Variant::Once)?.log,
        AgentKind::SkipperRegen => run_skipper(curriculum, cfg, Variant::Regen)?.log,
        AgentKind::Dyna => run_dyna(curriculum, cfg, false)?.log,
        AgentKind::DynaPlus => run_dyna(curriculum, cfg, true)?.log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_is_monotone() {
        let s = ExplorationSchedule { start: 1.0, end: 0.1, anneal_steps: 10 };
        let e: Vec<f64> = (0..15).map(|t| s.epsilon(t)).collect();
        assert!(e.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(e[0], 1.0);
        assert_eq!(e[14], 0.1);
    }

    #[test]
    fn log_round_trip() {
        let mut log = TrainingLog::default();
        let mut r = LogRow::new(5);
        r.train_success = 0.5;
        log.rows.push(r);
        let csv = log.to_csv();
        assert!(csv.starts_with(LOG_HEADER));
        let back = TrainingLog::from_csv(&csv).unwrap();
        assert_eq!(back.rows[0].step, 5);
        assert_eq!(back.rows[0].train_success, 0.5);
        assert!(back.rows[0].reject_rate.is_nan());
    }
}
