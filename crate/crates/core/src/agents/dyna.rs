use std::collections::BTreeMap;

use rand::Rng as _;

use super::q::{success_row, CodeQ};
use super::{AgentConfig, Curriculum, TrainingLog};
use crate::estimators::{
    q_learning_goal_update, update_feasibility, FeasibilityTable, GoalConditionedQ, LearningRate,
};
use crate::gridworld::Task;
use crate::replay::{relabel_episode, sample_pair, ReplayBuffer, TargetProposer, Trajectory, Transition};
use crate::{Code, Result, Rng};

type Key = (u32, usize, usize);

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Counted {
    count: u32,
    reward: f64,
}

/// Empirical one-step model that hallucinates at a fixed rate.
///
/// A hallucinated successor is a non-terminal state that no action reaches
/// from the source in one step.
#[derive(Clone, Debug)]
pub struct CorruptedModel<'a> {
    tasks: &'a [Task],
    pub inject_rate: f64,
    counts: BTreeMap<Key, BTreeMap<usize, Counted>>,
    keys: Vec<Key>,
}

/// One simulated transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Simulated {
    pub next: usize,
    pub reward: f64,
    pub terminal: bool,
    pub injected: bool,
}

impl<'a> CorruptedModel<'a> {
    pub fn new(tasks: &'a [Task], inject_rate: f64) -> Self {
        Self { tasks, inject_rate, counts: BTreeMap::new(), keys: Vec::new() }
    }

    pub fn record(&mut self, task: u32, s: usize, a: usize, next: usize, reward: f64) {
        let entry = self.counts.entry((task, s, a)).or_insert_with(|| {
            self.keys.push((task, s, a));
            BTreeMap::new()
        });
        let c = entry.entry(next).or_default();
        c.count += 1;
        c.reward += (reward - c.reward) / c.count as f64;
    }

    pub fn n_pairs(&self) -> usize {
        self.keys.len()
    }

    /// Uniformly chosen experienced (task, s, a).
    pub fn sample_key(&self, rng: &mut Rng) -> Option<Key> {
        (!self.keys.is_empty()).then(|| self.keys[rng.gen_range(0..self.keys.len())])
    }

    fn hallucinate(&self, task: u32, s: usize, rng: &mut Rng) -> Option<usize> {
        let t = &self.tasks[task as usize];
        let mdp = &t.mdp;
        let adjacent = |x: usize| (0..mdp.n_actions()).any(|b| mdp.outcomes(s, b).iter().any(|o| o.next == x));
        let pool: Vec<usize> = t.non_terminal_states().filter(|&x| x != s && !adjacent(x)).collect();
        (!pool.is_empty()).then(|| pool[rng.gen_range(0..pool.len())])
    }

    /// Next state from counts, replaced by a hallucination at `inject_rate`.
    pub fn simulate(&self, task: u32, s: usize, a: usize, rng: &mut Rng) -> Option<Simulated> {
        let row = self.counts.get(&(task, s, a))?;
        if self.inject_rate > 0.0 && rng.gen_bool(self.inject_rate) {
            if let Some(next) = self.hallucinate(task, s, rng) {
                return Some(Simulated { next, reward: 0.0, terminal: false, injected: true });
            }
        }
        let total: u32 = row.values().map(|c| c.count).sum();
        let mut k = rng.gen_range(0..total);
        for (&next, c) in row {
            if k < c.count {
                let terminal = self.tasks[task as usize].mdp.is_terminal(next);
                return Some(Simulated { next, reward: c.reward, terminal, injected: false });
            }
            k -= c.count;
        }
        unreachable!()
    }
}

impl TargetProposer for CorruptedModel<'_> {
    /// Successor of the source under a random action, as the model imagines it.
    fn propose_target(&self, task: u32, source: Code, rng: &mut Rng) -> Result<Code> {
        let t = &self.tasks[task as usize];
        let Some(s) = t.decode(source) else { return Ok(source) };
        let a = rng.gen_range(0..t.mdp.n_actions());
        Ok(self.simulate(task, s, a, rng).map_or(source, |x| t.code_of(x.next)))
    }
}

#[derive(Clone, Debug)]
pub struct DynaRun {
    pub log: TrainingLog,
    pub q: CodeQ,
    pub simulated: u64,
    pub injected: u64,
    pub rejected: u64,
    pub rejected_injected: u64,
}

/// Dyna-Q with a corrupted learned model; `plus` gates simulated updates on
/// the evaluator's one-step feasibility p(D = 1) ≥ θ.
pub fn run_dyna(curr: &Curriculum, cfg: &AgentConfig, plus: bool) -> Result<DynaRun> {
    let first = &curr.train[0];
    let codec = first.codec;
    let na = first.spec.n_actions();
    let mut q = CodeQ::for_task(first);
    let mut model = CorruptedModel::new(&curr.train, cfg.inject_rate);
    let mut replay = ReplayBuffer::new(ReplayBuffer::DEFAULT_CAPACITY);
    let mut goal_q = plus.then(|| GoalConditionedQ::for_codec(&codec, na));
    let mut evaluator = plus.then(|| FeasibilityTable::for_codec(&codec));
    let lr = LearningRate::default();
    let mut rng = crate::rng(cfg.seed);
    let mut log = TrainingLog::default();
    let mut out = DynaRun { log: TrainingLog::default(), q: q.clone(), simulated: 0, injected: 0, rejected: 0, rejected_injected: 0 };
    let (mut window_sim, mut window_rej) = (0u64, 0u64);
    let mut step = 0u64;
    let mut episode = 0u64;

    while step < cfg.steps {
        let task_id = rng.gen_range(0..curr.train.len()) as u32;
        let task = &curr.train[task_id as usize];
        let mut s = task.mdp.sample_initial(&mut rng);
        let mut traj = Trajectory { task: task_id, episode, transitions: Vec::new() };
        episode += 1;
        for _ in 0..cfg.episode_limit(task) {
            let code = task.code_of(s);
            let a = q.behavior(code, cfg.exploration.epsilon(step), &mut rng);
            let (next, r) = task.mdp.sample(s, a, &mut rng);
            let terminal = task.mdp.is_terminal(next);
            let next_code = task.code_of(next);
            q.update(code, a, q.td_target(r, next_code, terminal, cfg.gamma), lr);
            model.record(task_id, s, a, next, r);
            traj.transitions.push(Transition { state: code, action: a as u8, reward: r, next: next_code, terminal });

            // one simulated update
            if let Some((k_task, ks, ka)) = model.sample_key(&mut rng) {
                let t = &curr.train[k_task as usize];
                let sim = model.simulate(k_task, ks, ka, &mut rng).unwrap();
                let (sc, nc) = (t.code_of(ks), t.code_of(sim.next));
                let accept = evaluator.as_ref().is_none_or(|e| e.masses(sc, nc)[0] >= cfg.accept_threshold);
                out.simulated += 1;
                window_sim += 1;
                out.injected += sim.injected as u64;
                if accept {
                    q.update(sc, ka, q.td_target(sim.reward, nc, sim.terminal, cfg.gamma), lr);
                } else {
                    out.rejected += 1;
                    window_rej += 1;
                    out.rejected_injected += sim.injected as u64;
                }
            }

            step += 1;
            if let (Some(gq), Some(ev)) = (goal_q.as_mut(), evaluator.as_mut()) {
                if step % cfg.train_every as u64 == 0 && !replay.is_empty() {
                    for _ in 0..cfg.batch_size {
                        let pair = sample_pair(&replay, &cfg.mixture, Some(&model), &mut rng)?;
                        q_learning_goal_update(gq, &pair, cfg.gamma_int, lr);
                        update_feasibility(ev, &pair, &*gq, lr);
                    }
                }
            }
            if cfg.log_due(step) {
                let mut row = success_row(curr, &|c| q.greedy(c), cfg, step);
                if plus {
                    row.reject_rate = if window_sim == 0 { f64::NAN } else { window_rej as f64 / window_sim as f64 };
                }
                (window_sim, window_rej) = (0, 0);
                log.rows.push(row);
            }
            s = next;
            if terminal || step >= cfg.steps {
                break;
            }
        }
        if let (Some(gq), Some(ev)) = (goal_q.as_mut(), evaluator.as_mut()) {
            for t in 0..traj.len() {
                for _ in 0..cfg.relabel_count {
                    let pair = relabel_episode(&traj, t, &mut rng);
                    q_learning_goal_update(gq, &pair, cfg.gamma_int, lr);
                    update_feasibility(ev, &pair, &*gq, lr);
                }
            }
        }
        replay.push(traj);
    }
    out.log = log;
    out.q = q;
    Ok(out)
}
