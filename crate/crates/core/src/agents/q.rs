use rand::Rng as _;

use super::{sample_index, AgentConfig, Curriculum, LogRow, TrainingLog};
use crate::dp::{q_from_v, value_iteration};
use crate::estimators::{random_argmax, LearningRate, StepSize};
use crate::gridworld::Task;
use crate::mdp::argmax;
use crate::{Code, Result, Rng};

/// Action values keyed by state code, shared by every instance of one codec.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeQ {
    pub n_actions: usize,
    q: Vec<f64>,
    visits: Vec<u32>,
}

impl CodeQ {
    pub fn new(n_codes: usize, n_actions: usize) -> Self {
        Self { n_actions, q: vec![0.0; n_codes * n_actions], visits: vec![0; n_codes * n_actions] }
    }

    pub fn for_task(task: &Task) -> Self {
        Self::new(task.codec.total_codes(), task.spec.n_actions())
    }

    pub fn values(&self, s: Code) -> &[f64] {
        let o = s as usize * self.n_actions;
        &self.q[o..o + self.n_actions]
    }

    pub fn get(&self, s: Code, a: usize) -> f64 {
        self.q[s as usize * self.n_actions + a]
    }

    pub fn max(&self, s: Code) -> f64 {
        self.values(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn greedy(&self, s: Code) -> usize {
        argmax(self.values(s))
    }

    pub fn behavior(&self, s: Code, eps: f64, rng: &mut Rng) -> usize {
        if eps > 0.0 && rng.gen_bool(eps) {
            return rng.gen_range(0..self.n_actions);
        }
        random_argmax(self.values(s), rng)
    }

    /// Move Q(s, a) toward `target`; returns the step size used.
    pub fn update(&mut self, s: Code, a: usize, target: f64, step: impl StepSize) -> f64 {
        let i = s as usize * self.n_actions + a;
        self.visits[i] += 1;
        let alpha = step.alpha(self.visits[i]);
        self.q[i] += alpha * (target - self.q[i]);
        alpha
    }

    /// One-step Q-learning target r + γ·max Q(s').
    pub fn td_target(&self, reward: f64, next: Code, terminal: bool, gamma: f64) -> f64 {
        if terminal {
            reward
        } else {
            reward + gamma * self.max(next)
        }
    }
}

#[derive(Clone, Debug)]
pub struct QRun {
    pub log: TrainingLog,
    pub q: CodeQ,
}

/// max over non-terminal states and actions of |Q − q_*|.
pub fn q_error(q: &CodeQ, task: &Task, gamma: f64) -> f64 {
    let (v, _) = value_iteration(&task.mdp, gamma, 1e-12);
    let qs = q_from_v(&task.mdp, &v.v, gamma);
    let mut worst: f64 = 0.0;
    for s in task.non_terminal_states() {
        for a in 0..q.n_actions {
            worst = worst.max((q.get(task.code_of(s), a) - qs.get(s, a)).abs());
        }
    }
    worst
}

/// Fraction of greedy rollouts from the evaluation spawn that reach the goal.
pub fn greedy_success(tasks: &[Task], policy: &dyn Fn(Code) -> usize, cfg: &AgentConfig, rng: &mut Rng) -> f64 {
    if tasks.is_empty() {
        return f64::NAN;
    }
    let mut wins = 0;
    let mut total = 0;
    for task in tasks {
        for _ in 0..cfg.eval_episodes {
            let mut s = sample_index(task.eval_initial(), rng);
            total += 1;
            for _ in 0..cfg.episode_limit(task) {
                let (next, r) = task.mdp.sample(s, policy(task.code_of(s)), rng);
                s = next;
                if task.mdp.is_terminal(s) {
                    if r > 0.0 {
                        wins += 1;
                    }
                    break;
                }
            }
        }
    }
    wins as f64 / total as f64
}

pub(crate) fn eval_rng(cfg: &AgentConfig, step: u64) -> Rng {
    crate::rng(cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ step ^ 0xe7a1)
}

/// Success columns for a greedy code policy.
pub(crate) fn success_row(curr: &Curriculum, policy: &dyn Fn(Code) -> usize, cfg: &AgentConfig, step: u64) -> LogRow {
    let mut rng = eval_rng(cfg, step);
    let mut row = LogRow::new(step);
    row.train_success = greedy_success(&curr.train, policy, cfg, &mut rng);
    for (i, (_, tasks)) in curr.ood.iter().enumerate().take(4) {
        row.ood[i] = greedy_success(tasks, policy, cfg, &mut rng);
    }
    row
}

/// ε-greedy tabular Q-learning over codes.
pub fn run_q_baseline(curr: &Curriculum, cfg: &AgentConfig) -> Result<QRun> {
    let mut q = CodeQ::for_task(&curr.train[0]);
    let mut rng = crate::rng(cfg.seed);
    let mut log = TrainingLog::default();
    let lr = LearningRate::default();
    let mut step = 0;
    while step < cfg.steps {
        let task = &curr.train[rng.gen_range(0..curr.train.len())];
        let mut s = task.mdp.sample_initial(&mut rng);
        for _ in 0..cfg.episode_limit(task) {
            let code = task.code_of(s);
            let a = q.behavior(code, cfg.exploration.epsilon(step), &mut rng);
            let (next, r) = task.mdp.sample(s, a, &mut rng);
            let terminal = task.mdp.is_terminal(next);
            let target = q.td_target(r, task.code_of(next), terminal, cfg.gamma);
            q.update(code, a, target, lr);
            step += 1;
            if cfg.log_due(step) {
                log.rows.push(success_row(curr, &|c| q.greedy(c), cfg, step));
            }
            s = next;
            if terminal || step >= cfg.steps {
                break;
            }
        }
    }
    Ok(QRun { log, q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::TaskSpec;

    #[test]
    fn gamma_zero_learns_immediate_reward() {
        let task = Task::new(TaskSpec::rds(6, 6, 0.0, 2)).unwrap();
        let cfg = AgentConfig { gamma: 0.0, steps: 20_000, ..AgentConfig::default() };
        let run = run_q_baseline(&Curriculum::single(task.clone()), &cfg).unwrap();
        for s in task.non_terminal_states() {
            for a in 0..4 {
                let r = task.mdp.expected_reward(s, a);
                if run.q.visits[task.code_of(s) as usize * 4 + a] > 0 {
                    assert!((run.q.get(task.code_of(s), a) - r).abs() < 1e-12);
                }
            }
        }
    }
}
