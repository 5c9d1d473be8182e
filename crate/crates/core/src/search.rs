//! Prioritized tree-search MPC over a deterministic sample model.
//!
//! Branches `(node, action)` wait in a priority queue; each pop spends one
//! model call. Terminal nodes go to a second queue scored by their simulated
//! return. When the budget runs out the best expandable branch competes with
//! the best terminal node and the winner's root action is returned.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng as _;
use serde::Serialize;

use crate::dp::QTable;
use crate::gridworld::Task;
use crate::mdp::{argmax, TabularMdp};
use crate::{Error, Result, Rng};

pub const DEFAULT_DEPTH_CAP: usize = 5;

/// Deterministic simulator: `(s, a) -> (s', r, terminal)`.
pub trait SampleModel {
    fn simulate(&self, s: usize, a: usize) -> (usize, f64, bool);
}

/// Action values consulted for priorities and the fallback.
pub trait ActionValues {
    fn q(&self, s: usize, a: usize) -> f64;
}

impl ActionValues for QTable {
    fn q(&self, s: usize, a: usize) -> f64 {
        self.get(s, a)
    }
}

impl<F: Fn(usize, usize) -> f64> ActionValues for F {
    fn q(&self, s: usize, a: usize) -> f64 {
        self(s, a)
    }
}

/// Most likely outcome of each (s, a) of a tabular MDP; exact when the MDP is deterministic.
pub struct ExactModel<'a> {
    pub mdp: &'a TabularMdp,
}

impl SampleModel for ExactModel<'_> {
    fn simulate(&self, s: usize, a: usize) -> (usize, f64, bool) {
        let o = self
            .mdp
            .outcomes(s, a)
            .iter()
            .fold(None, |best: Option<&crate::mdp::Outcome>, o| match best {
                Some(b) if b.prob >= o.prob => Some(b),
                _ => Some(o),
            })
            .expect("simulate called on a terminal state");
        (o.next, o.reward, self.mdp.is_terminal(o.next))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Heuristic {
    BestFirst,
    Random,
}

impl Heuristic {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "best-first" => Ok(Heuristic::BestFirst),
            "random" => Ok(Heuristic::Random),
            _ => Err(Error::Usage(format!("unknown heuristic {s:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::BestFirst => "best-first",
            Heuristic::Random => "random",
        }
    }
}

/// Maximum number of model calls per decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchBudget(usize);

impl SearchBudget {
    pub fn new(calls: usize) -> Result<Self> {
        if calls == 0 {
            return Err(Error::Usage("search budget must be at least 1".into()));
        }
        Ok(Self(calls))
    }

    pub fn calls(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchNode {
    pub state: usize,
    pub depth: usize,
    /// Discounted simulated return from the root.
    pub sigma: f64,
    /// First action on the path from the root; `None` at the root.
    pub root_action: Option<usize>,
    pub terminal: bool,
    pub parent: Option<usize>,
    /// Action taken at the parent.
    pub action: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchConfig {
    pub gamma: f64,
    pub budget: usize,
    pub heuristic: Heuristic,
    pub depth_cap: usize,
}

impl SearchConfig {
    pub fn new(gamma: f64, budget: usize, heuristic: Heuristic) -> Self {
        Self { gamma, budget, heuristic, depth_cap: DEFAULT_DEPTH_CAP }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub action: usize,
    /// Actions from the root along the winning branch.
    pub path: Vec<usize>,
    pub model_calls: usize,
    /// The node arena; index 0 is the root.
    pub nodes: Vec<SearchNode>,
}

#[derive(Clone, Copy, Debug)]
struct Branch {
    node: usize,
    action: usize,
    value: f64,
    priority: f64,
    seq: usize,
}

impl PartialEq for Branch {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Branch {}

impl PartialOrd for Branch {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Branch {
    // max-heap on priority, earliest insertion first among equals
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority).then(other.seq.cmp(&self.seq))
    }
}

/// Highest value, earliest insertion among equals.
fn best_by_value<'b>(it: impl Iterator<Item = &'b Branch>) -> Option<&'b Branch> {
    it.fold(None, |best: Option<&Branch>, b| match best {
        Some(x) if x.value > b.value || (x.value == b.value && x.seq < b.seq) => Some(x),
        _ => Some(b),
    })
}

fn path_to(nodes: &[SearchNode], mut i: usize) -> Vec<usize> {
    let mut path = Vec::new();
    while let Some(a) = nodes[i].action {
        path.push(a);
        i = nodes[i].parent.unwrap();
    }
    path.reverse();
    path
}

/// One decision of prioritized tree search from `s0`.
pub fn tree_search(
    s0: usize,
    n_actions: usize,
    model: &dyn SampleModel,
    q: &dyn ActionValues,
    cfg: &SearchConfig,
    rng: &mut Rng,
) -> SearchOutcome {
    let mut nodes = vec![SearchNode {
        state: s0,
        depth: 0,
        sigma: 0.0,
        root_action: None,
        terminal: false,
        parent: None,
        action: None,
    }];
    let mut queue: BinaryHeap<Branch> = BinaryHeap::new();
    // branches below the depth cap: eligible for the final choice, never simulated
    let mut frontier: Vec<Branch> = Vec::new();
    let mut terminals: Vec<(usize, f64, usize)> = Vec::new();
    let mut seq = 0;
    let mut calls = 0;
    let mut fresh = 0;

    loop {
        let n = nodes[fresh];
        if n.terminal {
            terminals.push((fresh, n.sigma, seq));
            seq += 1;
        } else {
            let disc = cfg.gamma.powi(n.depth as i32);
            for a in 0..n_actions {
                let value = n.sigma + disc * q.q(n.state, a);
                let priority = match cfg.heuristic {
                    Heuristic::BestFirst => value,
                    Heuristic::Random => rng.gen(),
                };
                let b = Branch { node: fresh, action: a, value, priority, seq };
                seq += 1;
                if n.depth >= cfg.depth_cap {
                    frontier.push(b);
                } else {
                    queue.push(b);
                }
            }
        }
        if queue.is_empty() || calls >= cfg.budget {
            break;
        }
        let b = queue.pop().unwrap();
        let parent = nodes[b.node];
        let (s, r, terminal) = model.simulate(parent.state, b.action);
        calls += 1;
        nodes.push(SearchNode {
            state: s,
            depth: parent.depth + 1,
            sigma: parent.sigma + cfg.gamma.powi(parent.depth as i32) * r,
            root_action: Some(parent.root_action.unwrap_or(b.action)),
            terminal,
            parent: Some(b.node),
            action: Some(b.action),
        });
        fresh = nodes.len() - 1;
    }

    let expandable = best_by_value(queue.iter().chain(frontier.iter())).copied();
    let best_terminal = terminals
        .iter()
        .fold(None, |best: Option<(usize, f64, usize)>, &t| match best {
            Some(x) if x.1 >= t.1 => Some(x),
            _ => Some(t),
        });
    let terminal_wins = best_terminal.is_some_and(|(_, v, _)| expandable.is_none_or(|e| v >= e.value));
    let (action, path) = match (expandable, best_terminal) {
        (_, Some((t, _, _))) if terminal_wins => (nodes[t].root_action.unwrap(), path_to(&nodes, t)),
        (Some(e), _) => {
            let mut path = path_to(&nodes, e.node);
            path.push(e.action);
            (nodes[e.node].root_action.unwrap_or(e.action), path)
        }
        (None, _) => {
            let qs: Vec<f64> = (0..n_actions).map(|a| q.q(s0, a)).collect();
            let a = argmax(&qs);
            (a, vec![a])
        }
    };
    SearchOutcome { action, path, model_calls: calls, nodes }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub success: bool,
}

/// Run one episode in the real MDP, searching every `replan_every` steps and
/// following the searched path in between.
#[allow(clippy::too_many_arguments)]
pub fn plan_episode(
    mdp: &TabularMdp,
    start: usize,
    q: &dyn ActionValues,
    model: &dyn SampleModel,
    cfg: &SearchConfig,
    replan_every: usize,
    max_steps: usize,
    rng: &mut Rng,
) -> EpisodeTrace {
    let replan_every = replan_every.max(1);
    let mut s = start;
    let mut trace = EpisodeTrace { states: vec![s], actions: vec![], rewards: vec![], success: false };
    let mut pending: Vec<usize> = Vec::new();
    let mut since = replan_every;
    for _ in 0..max_steps {
        if mdp.is_terminal(s) {
            break;
        }
        if since >= replan_every || pending.is_empty() {
            pending = tree_search(s, mdp.n_actions(), model, q, cfg, rng).path;
            pending.reverse();
            since = 0;
        }
        let a = pending.pop().unwrap_or_else(|| argmax(&(0..mdp.n_actions()).map(|a| q.q(s, a)).collect::<Vec<_>>()));
        let (next, r) = mdp.sample(s, a, rng);
        since += 1;
        trace.actions.push(a);
        trace.rewards.push(r);
        trace.states.push(next);
        if r > 0.0 {
            trace.success = true;
        }
        s = next;
    }
    trace
}

/// Per-task success rate of tree-search MPC with exact model and optimal Q.
pub fn heuristic_success(
    tasks: &[Task],
    gamma: f64,
    budget: usize,
    heuristic: Heuristic,
    episodes: usize,
    seed: u64,
) -> Vec<f64> {
    tasks
        .iter()
        .enumerate()
        .map(|(i, task)| {
            let (v, _) = crate::dp::value_iteration(&task.mdp, gamma, 1e-10);
            let q = crate::dp::q_from_v(&task.mdp, &v.v, gamma);
            let model = ExactModel { mdp: &task.mdp };
            let cfg = SearchConfig::new(gamma, budget, heuristic);
            let mut rng = crate::rng(seed.wrapping_add(i as u64));
            let max_steps = 4 * task.spec.width * task.spec.height;
            let wins = (0..episodes)
                .filter(|_| {
                    let start = sample(task.eval_initial(), &mut rng);
                    plan_episode(&task.mdp, start, &q, &model, &cfg, 1, max_steps, &mut rng).success
                })
                .count();
            wins as f64 / episodes.max(1) as f64
        })
        .collect()
}

/// Both heuristics side by side.
/// CSV columns: `heuristic,instance,budget,episodes,success_rate`.
pub fn compare_heuristics(tasks: &[Task], gamma: f64, budget: usize, episodes: usize, seed: u64) -> String {
    let mut out = String::from("heuristic,instance,budget,episodes,success_rate\n");
    for heuristic in [Heuristic::BestFirst, Heuristic::Random] {
        for (i, rate) in heuristic_success(tasks, gamma, budget, heuristic, episodes, seed).into_iter().enumerate() {
            out.push_str(&format!("{},{i},{budget},{episodes},{rate:.4}\n", heuristic.name()));
        }
    }
    out
}

fn sample(dist: &[f64], rng: &mut Rng) -> usize {
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

#[cfg(test)]
mod tests {
    use super::*;

    /// Table-driven model: `next[(s, a)] = (s', r, terminal)`.
    struct Table(Vec<(usize, usize, usize, f64, bool)>);

    impl SampleModel for Table {
        fn simulate(&self, s: usize, a: usize) -> (usize, f64, bool) {
            let &(_, _, n, r, t) = self.0.iter().find(|e| e.0 == s && e.1 == a).unwrap();
            (n, r, t)
        }
    }

    fn walkthrough() -> (Table, impl Fn(usize, usize) -> f64) {
        let model = Table(vec![(0, 0, 1, 0.0, false), (0, 2, 2, 0.0, false), (2, 0, 3, 0.4, true)]);
        let q = |s: usize, a: usize| match (s, a) {
            (0, 0) => 0.5,
            (0, 1) => 0.1,
            (0, 2) => 0.45,
            (1, 0) => 0.2,
            (1, 1) => 0.1,
            (2, 0) => 0.42,
            (2, 1) => 0.1,
            _ => 0.0,
        };
        (model, q)
    }

    #[test]
    fn budget_one_single_action() {
        let model = Table(vec![(0, 0, 1, 0.0, false)]);
        let q = |_: usize, _: usize| 0.3;
        let out = tree_search(0, 1, &model, &q, &SearchConfig::new(0.9, 1, Heuristic::BestFirst), &mut crate::rng(0));
        assert_eq!(out.action, 0);
        assert_eq!(out.model_calls, 1);
    }

    #[test]
    fn walkthrough_picks_terminal_branch() {
        let (model, q) = walkthrough();
        let out = tree_search(0, 3, &model, &q, &SearchConfig::new(1.0, 3, Heuristic::BestFirst), &mut crate::rng(0));
        assert_eq!(out.model_calls, 3);
        assert_eq!(out.action, 2);
        assert_eq!(out.path, vec![2, 0]);
        let s3 = out.nodes.iter().find(|n| n.state == 3).unwrap();
        assert!(s3.terminal && (s3.sigma - 0.4).abs() < 1e-12);
    }

    #[test]
    fn zero_budget_is_greedy() {
        let (model, q) = walkthrough();
        let out = tree_search(0, 3, &model, &q, &SearchConfig::new(1.0, 0, Heuristic::BestFirst), &mut crate::rng(0));
        assert_eq!((out.action, out.model_calls), (0, 0));
    }
}
