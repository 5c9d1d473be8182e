use rand::Rng as _;

use super::q::eval_rng;
use super::{sample_index, AgentConfig, Curriculum, LogRow, TrainingLog};
use crate::dp::{classify_target, TargetClass};
use crate::estimators::{
    q_learning_goal_update, update_distance_estimate, update_feasibility, update_reward_estimate, FeasibilityTable,
    GoalConditionedQ, GoalTable, LearningRate,
};
use crate::experiments::{delusion_frequency, feasibility_errors, ErrorSample};
use crate::generator::{CandidateSource, GeneratorConfig, Provenance, TargetGenerator};
use crate::gridworld::{StateCodec, Task};
use crate::proxy::{build_proxy, smdp_value_iteration, EdgeEstimator, Gate, LearnedEdges, ProxyConfig, ProxyProblem, Sweeps};
use crate::replay::{relabel_at, sample_pair, ReplayBuffer, SourceTargetPair, Trajectory, Transition};
use crate::{Code, Error, Result, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Build one proxy per episode; re-solve it from the current state on triggers.
    Once,
    /// Rebuild the proxy on every trigger.
    Regen,
}

const SWEEPS: Sweeps = Sweeps::Converge { tol: 1e-9, max: 64 };

/// The learned quantities: goal-conditioned Q, V̂, D̂ and the feasibility evaluator.
#[derive(Clone, Debug)]
pub struct Estimators {
    pub q: GoalConditionedQ,
    pub value: GoalTable,
    pub distance: GoalTable,
    pub evaluator: FeasibilityTable,
    pub gamma: f64,
    pub gamma_int: f64,
}

impl Estimators {
    pub fn new(codec: &StateCodec, n_actions: usize, gamma: f64, gamma_int: f64) -> Self {
        Self {
            q: GoalConditionedQ::for_codec(codec, n_actions),
            value: GoalTable::value_for(codec, n_actions, gamma).with_backoff(*codec),
            distance: GoalTable::distance_for(codec, n_actions).with_backoff(*codec),
            evaluator: FeasibilityTable::for_codec(codec).with_backoff(*codec),
            gamma,
            gamma_int,
        }
    }

    pub fn train(&mut self, pair: &SourceTargetPair) {
        let lr = LearningRate::default();
        q_learning_goal_update(&mut self.q, pair, self.gamma_int, lr);
        update_distance_estimate(&mut self.distance, pair, &self.q, lr);
        update_reward_estimate(&mut self.value, pair, &self.q, self.gamma, lr);
        update_feasibility(&mut self.evaluator, pair, &self.q, lr);
    }

    pub fn edges<'a>(&'a self, task: &'a Task) -> LearnedEdges<'a> {
        LearnedEdges { task, reward: &self.value, distance: &self.distance, policy: &self.q, gamma: self.gamma }
    }
}

/// One checkpoint choice made by the planner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    pub task: u32,
    pub step: u64,
    pub source: Code,
    pub target: Code,
    pub provenance: Provenance,
    pub class: TargetClass,
}

/// Planner state within one episode.
#[derive(Clone, Debug, Default)]
struct PlanState {
    proxy: Option<ProxyProblem>,
    target: Option<Code>,
    since: usize,
}

impl PlanState {
    fn due(&self, current: Code, interval: usize) -> bool {
        self.target.is_none_or(|t| t == current) || self.since >= interval
    }

    #[allow(clippy::too_many_arguments)]
    fn replan(
        &mut self,
        task: &Task,
        task_id: u32,
        current: Code,
        generator: &TargetGenerator,
        est: &dyn EdgeEstimator,
        gate: Option<Gate>,
        proxy_cfg: &ProxyConfig,
        variant: Variant,
        step: u64,
        rng: &mut Rng,
    ) -> Result<Option<Selection>> {
        self.since = 0;
        match (&mut self.proxy, variant) {
            (Some(p), Variant::Once) => p.reroot(current, est, proxy_cfg.threshold, gate),
            _ => self.proxy = Some(build_proxy(task_id, current, generator, est, gate, proxy_cfg, rng)?),
        }
        let proxy = self.proxy.as_ref().unwrap();
        match smdp_value_iteration(proxy, SWEEPS) {
            Ok(plan) => {
                let c = proxy.vertices[plan.selected];
                self.target = Some(c.code);
                let source = task.decode(current).expect("agent state is on the MDP");
                Ok(Some(Selection {
                    task: task_id,
                    step,
                    source: current,
                    target: c.code,
                    provenance: c.provenance,
                    class: classify_target(task, source, c.code),
                }))
            }
            Err(Error::NoPlan) => {
                self.target = None;
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }
}

/// Everything the planner consults during an evaluation episode.
pub struct PlannerParts<'a> {
    pub edges: &'a dyn EdgeEstimator,
    /// Greedy goal-conditioned action.
    pub policy: &'a dyn Fn(Code, Code) -> usize,
    pub generator: &'a TargetGenerator<'a>,
    pub gate: Option<Gate<'a>>,
    pub proxy: ProxyConfig,
    pub variant: Variant,
    pub replan_interval: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeResult {
    pub success: bool,
    pub steps: usize,
    pub selections: Vec<Selection>,
    /// Target the policy was conditioned on at each action.
    pub conditioned: Vec<Code>,
    pub states: Vec<Code>,
}

/// One greedy planning episode from MDP state `start`.
pub fn skipper_episode(
    task: &Task,
    task_id: u32,
    start: usize,
    parts: &PlannerParts,
    limit: usize,
    rng: &mut Rng,
) -> Result<EpisodeResult> {
    let mut plan = PlanState::default();
    let mut out = EpisodeResult::default();
    let mut s = start;
    out.states.push(task.code_of(s));
    for step in 0..limit {
        let code = task.code_of(s);
        if plan.due(code, parts.replan_interval) {
            let sel = plan.replan(
                task,
                task_id,
                code,
                parts.generator,
                parts.edges,
                parts.gate,
                &parts.proxy,
                parts.variant,
                step as u64,
                rng,
            )?;
            out.selections.extend(sel);
        }
        let target = plan.target.unwrap_or_else(|| task.goal_code());
        let a = (parts.policy)(code, target);
        let (next, r) = task.mdp.sample(s, a, rng);
        plan.since += 1;
        out.conditioned.push(target);
        out.steps += 1;
        s = next;
        out.states.push(task.code_of(s));
        if task.mdp.is_terminal(s) {
            out.success = r > 0.0;
            break;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SkipperRun {
    pub log: TrainingLog,
    pub estimators: Estimators,
    /// Selections of the final evaluation on the training instances.
    pub eval_selections: Vec<Selection>,
    pub train_selections: Vec<Selection>,
}

fn eval_generator_config(cfg: &AgentConfig) -> GeneratorConfig {
    GeneratorConfig { source: CandidateSource::FullEnumeration, ..cfg.generator }
}

/// Greedy evaluation on a task set; returns (success rate, selections).
///
/// `cfg.gated` decides whether the evaluator filters checkpoints, so one set
/// of trained estimators can be scored both ways.
pub fn evaluate(
    tasks: &[Task],
    est: &Estimators,
    cfg: &AgentConfig,
    variant: Variant,
    rng: &mut Rng,
) -> Result<(f64, Vec<Selection>)> {
    if tasks.is_empty() {
        return Ok((f64::NAN, Vec::new()));
    }
    let generator = TargetGenerator::new(eval_generator_config(cfg), tasks, None);
    let gate = |f: Code, t: Code| est.evaluator.feasible(f, t, cfg.gate_threshold);
    let policy = |s: Code, g: Code| est.q.greedy(s, g);
    let (mut wins, mut total) = (0, 0);
    let mut selections = Vec::new();
    for (i, task) in tasks.iter().enumerate() {
        let edges = est.edges(task);
        let parts = PlannerParts {
            edges: &edges,
            policy: &policy,
            generator: &generator,
            gate: cfg.gated.then_some(&gate as Gate),
            proxy: cfg.proxy,
            variant,
            replan_interval: cfg.replan_interval,
        };
        for _ in 0..cfg.eval_episodes {
            let start = sample_index(task.eval_initial(), rng);
            let ep = skipper_episode(task, i as u32, start, &parts, cfg.episode_limit(task), rng)?;
            wins += ep.success as usize;
            total += 1;
            selections.extend(ep.selections);
        }
    }
    Ok((wins as f64 / total as f64, selections))
}

/// Train the checkpoint-planning agent on the curriculum's training instances.
pub fn run_skipper(curr: &Curriculum, cfg: &AgentConfig, variant: Variant) -> Result<SkipperRun> {
    cfg.mixture.validate()?;
    let first = &curr.train[0];
    let codec = first.codec;
    let mut est = Estimators::new(&codec, first.spec.n_actions(), cfg.gamma, cfg.gamma_int);
    let mut replay = ReplayBuffer::new(ReplayBuffer::DEFAULT_CAPACITY);
    let mut rng = crate::rng(cfg.seed);
    let samples = if cfg.error_pairs > 0 {
        Some(ErrorSample::draw(&curr.train, cfg.error_pairs, cfg.gamma_int, &mut crate::rng(cfg.seed ^ 0xe44)))
    } else {
        None
    };
    let mut log = TrainingLog::default();
    let mut train_selections = Vec::new();
    let mut eval_selections = Vec::new();
    let mut step = 0u64;
    let mut episode = 0u64;

    while step < cfg.steps {
        let task_id = rng.gen_range(0..curr.train.len()) as u32;
        let task = &curr.train[task_id as usize];
        let mut s = task.mdp.sample_initial(&mut rng);
        let mut traj = Trajectory { task: task_id, episode, transitions: Vec::new() };
        episode += 1;
        let mut plan = PlanState::default();
        let mut explore_until = 0usize;
        for t in 0..cfg.episode_limit(task) {
            let code = task.code_of(s);
            if t >= explore_until && plan.due(code, cfg.replan_interval) {
                if replay.task_states(task_id).is_some() {
                    let generator = TargetGenerator::new(cfg.generator, &curr.train, Some(&replay));
                    let gate = |f: Code, g: Code| est.evaluator.feasible(f, g, cfg.gate_threshold);
                    let edges = est.edges(task);
                    let sel = plan.replan(
                        task,
                        task_id,
                        code,
                        &generator,
                        &edges,
                        cfg.gated.then_some(&gate as Gate),
                        &cfg.proxy,
                        variant,
                        step,
                        &mut rng,
                    )?;
                    if sel.is_none() {
                        explore_until = t + cfg.replan_interval;
                    }
                    train_selections.extend(sel);
                } else {
                    plan.target = None;
                    explore_until = t + cfg.replan_interval;
                }
            }
            let target = plan.target.unwrap_or_else(|| task.goal_code());
            let a = est.q.behavior_action(code, target, cfg.exploration.epsilon(step), &mut rng);
            let (next, r) = task.mdp.sample(s, a, &mut rng);
            let terminal = task.mdp.is_terminal(next);
            traj.transitions.push(Transition { state: code, action: a as u8, reward: r, next: task.code_of(next), terminal });
            plan.since += 1;
            step += 1;

            if step % cfg.train_every as u64 == 0 && !replay.is_empty() {
                let generator = TargetGenerator::new(cfg.generator, &curr.train, Some(&replay));
                for _ in 0..cfg.batch_size {
                    let pair = sample_pair(&replay, &cfg.mixture, Some(&generator), &mut rng)?;
                    est.train(&pair);
                }
            }
            if cfg.log_due(step) {
                let mut erng = eval_rng(cfg, step);
                let mut row = LogRow::new(step);
                let (success, sels) = evaluate(&curr.train, &est, cfg, variant, &mut erng)?;
                row.train_success = success;
                let (g1, g2) = delusion_frequency(&sels);
                row.delusion = [g1, g2];
                eval_selections = sels;
                for (i, (_, tasks)) in curr.ood.iter().enumerate().take(4) {
                    row.ood[i] = evaluate(tasks, &est, cfg, variant, &mut erng)?.0;
                }
                if let Some(samples) = &samples {
                    row.errors = feasibility_errors(&est.evaluator, samples).means();
                }
                log.rows.push(row);
            }
            s = next;
            if terminal || step >= cfg.steps {
                break;
            }
        }
        // hindsight conversion of the finished episode
        let len = traj.len();
        replay.push(traj);
        if let Some(stored) = replay.episodes().last().cloned() {
            let generator = TargetGenerator::new(cfg.generator, &curr.train, Some(&replay));
            for t in 0..len {
                for _ in 0..cfg.relabel_count {
                    let pair = relabel_at(&replay, &cfg.mixture, Some(&generator), &stored, t, &mut rng)?;
                    est.train(&pair);
                }
            }
        }
    }
    Ok(SkipperRun { log, estimators: est, eval_selections, train_selections })
}
