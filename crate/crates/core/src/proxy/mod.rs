//! Proxy problems: a small checkpoint graph with estimated cumulative-reward
//! and cumulative-discount edges, solved by SMDP value iteration.

mod kmedoids;

pub use kmedoids::{kmedoids, kmedoids_prune, symmetrize_truncated, total_cost, KMedoids};

use serde::Serialize;

use crate::dp::{pairwise_distance, pairwise_reward_discount, DistanceMatrix, Matrix};
use crate::estimators::{GoalConditionedQ, GoalTable, TargetPolicy};
use crate::generator::{Candidate, Provenance, TargetGenerator};
use crate::gridworld::Task;
use crate::mdp::GoalPolicy;
use crate::{Code, Error, Result, Rng};

/// Estimated edge between two encoded states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeEstimate {
    pub reward: f64,
    pub discount: f64,
    pub distance: f64,
}

/// Source of edge annotations.
pub trait EdgeEstimator {
    fn edge(&self, from: Code, to: Code) -> EdgeEstimate;
    /// Exact terminal flag; off-MDP codes are not terminal.
    fn is_terminal(&self, code: Code) -> bool;
}

/// Edges read from learned V̂ and D̂ under the greedy goal-conditioned policy.
pub struct LearnedEdges<'a> {
    pub task: &'a Task,
    pub reward: &'a GoalTable,
    pub distance: &'a GoalTable,
    pub policy: &'a GoalConditionedQ,
    pub gamma: f64,
}

impl EdgeEstimator for LearnedEdges<'_> {
    fn edge(&self, from: Code, to: Code) -> EdgeEstimate {
        let a = self.policy.action(from, to);
        EdgeEstimate {
            reward: self.reward.mean(from, a, to),
            discount: self.distance.discount(from, a, to, self.gamma),
            distance: self.distance.mean(from, a, to),
        }
    }

    fn is_terminal(&self, code: Code) -> bool {
        self.task.decode(code).is_some_and(|s| self.task.is_terminal(s))
    }
}

/// Exact edges from DP under a goal-conditioned policy.
pub struct OracleEdges<'a> {
    pub task: &'a Task,
    pub reward: Matrix,
    pub discount: Matrix,
    pub distance: DistanceMatrix,
}

impl<'a> OracleEdges<'a> {
    pub fn new(task: &'a Task, policy: &dyn GoalPolicy, gamma: f64) -> Self {
        let (reward, discount) = pairwise_reward_discount(&task.mdp, policy, gamma);
        let distance = pairwise_distance(&task.mdp, policy, crate::dp::default_horizon(task));
        Self { task, reward, discount, distance }
    }
}

impl EdgeEstimator for OracleEdges<'_> {
    fn edge(&self, from: Code, to: Code) -> EdgeEstimate {
        match (self.task.decode(from), self.task.decode(to)) {
            (Some(i), Some(j)) => EdgeEstimate {
                reward: self.reward.get(i, j),
                discount: self.discount.get(i, j),
                distance: self.distance.get(i, j),
            },
            _ => EdgeEstimate { reward: 0.0, discount: 0.0, distance: f64::INFINITY },
        }
    }

    fn is_terminal(&self, code: Code) -> bool {
        self.task.decode(code).is_some_and(|s| self.task.is_terminal(s))
    }
}

/// Checkpoint graph; vertex 0 is the current state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProxyProblem {
    pub vertices: Vec<Candidate>,
    pub reward: Vec<Vec<f64>>,
    pub discount: Vec<Vec<f64>>,
    pub distance: Vec<Vec<f64>>,
    /// `pruned[i][j]`: edge excluded from planning.
    pub pruned: Vec<Vec<bool>>,
    pub terminal: Vec<bool>,
}

impl ProxyProblem {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Whether the edge i → j takes part in planning.
    pub fn usable(&self, i: usize, j: usize) -> bool {
        i != j && j != 0 && !self.terminal[i] && !self.pruned[i][j]
    }

    /// Assemble from raw matrices, enforcing the zero diagonal, zero column 0
    /// and zero terminal rows.
    pub fn from_parts(
        vertices: Vec<Candidate>,
        mut reward: Vec<Vec<f64>>,
        mut discount: Vec<Vec<f64>>,
        mut distance: Vec<Vec<f64>>,
        terminal: Vec<bool>,
        threshold: f64,
    ) -> Self {
        let n = vertices.len();
        for i in 0..n {
            for j in 0..n {
                if i == j || j == 0 || terminal[i] {
                    reward[i][j] = 0.0;
                    discount[i][j] = 0.0;
                    distance[i][j] = if i == j { 0.0 } else { f64::INFINITY };
                }
            }
        }
        let mut pruned = prune_edges(&distance, threshold);
        for (i, row) in pruned.iter_mut().enumerate() {
            row[i] = true;
            row[0] = true;
        }
        Self { vertices, reward, discount, distance, pruned, terminal }
    }

    /// Move vertex 0 to `current` and re-annotate its outgoing edges.
    pub fn reroot(&mut self, current: Code, est: &dyn EdgeEstimator, threshold: f64, gate: Option<Gate>) {
        self.vertices[0] = Candidate { code: current, provenance: Provenance::Current };
        self.terminal[0] = est.is_terminal(current);
        for j in 1..self.len() {
            let to = self.vertices[j].code;
            let e = if self.terminal[0] {
                EdgeEstimate { reward: 0.0, discount: 0.0, distance: f64::INFINITY }
            } else {
                est.edge(current, to)
            };
            self.reward[0][j] = e.reward;
            self.discount[0][j] = e.discount;
            self.distance[0][j] = e.distance;
            self.pruned[0][j] = !(e.distance <= threshold) || to == current || gate.is_some_and(|g| !g(current, to));
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// R̂, Γ̂, D̂ between every pair of vertices.
pub fn annotate_edges(
    vertices: &[Code],
    est: &dyn EdgeEstimator,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<bool>) {
    let n = vertices.len();
    let mut r = vec![vec![0.0; n]; n];
    let mut g = vec![vec![0.0; n]; n];
    let mut d = vec![vec![f64::INFINITY; n]; n];
    let terminal: Vec<bool> = vertices.iter().map(|&v| est.is_terminal(v)).collect();
    for i in 0..n {
        d[i][i] = 0.0;
        if terminal[i] {
            continue;
        }
        for j in 1..n {
            if i == j {
                continue;
            }
            let e = est.edge(vertices[i], vertices[j]);
            r[i][j] = e.reward;
            g[i][j] = e.discount;
            d[i][j] = e.distance;
        }
    }
    (r, g, d, terminal)
}

/// `mask[i][j]` is true when D̂[i][j] exceeds the threshold.
pub fn prune_edges(distance: &[Vec<f64>], threshold: f64) -> Vec<Vec<bool>> {
    distance.iter().map(|row| row.iter().map(|&d| !(d <= threshold)).collect()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sweeps {
    Fixed(usize),
    /// Until the sup-norm change is below `tol`.
    Converge { tol: f64, max: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub selected: usize,
    pub values: Vec<f64>,
    /// Q[0, ·] at the final values.
    pub root_q: Vec<f64>,
}

/// Synchronous SMDP value iteration: Q = R̂ + Γ̂V over usable edges, V = row max.
pub fn smdp_value_iteration(proxy: &ProxyProblem, sweeps: Sweeps) -> Result<Plan> {
    let n = proxy.len();
    let backup = |v: &[f64], i: usize| -> f64 {
        (0..n)
            .filter(|&j| proxy.usable(i, j))
            .map(|j| proxy.reward[i][j] + proxy.discount[i][j] * v[j])
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0)
    };
    let mut v = vec![0.0; n];
    let (limit, tol) = match sweeps {
        Sweeps::Fixed(k) => (k, -1.0),
        Sweeps::Converge { tol, max } => (max, tol),
    };
    for _ in 0..limit {
        let next: Vec<f64> = (0..n).map(|i| backup(&v, i)).collect();
        let delta = crate::dp::sup_diff(&next, &v);
        v = next;
        if delta < tol {
            break;
        }
    }
    let root_q: Vec<f64> = (0..n)
        .map(|j| if proxy.usable(0, j) { proxy.reward[0][j] + proxy.discount[0][j] * v[j] } else { f64::NEG_INFINITY })
        .collect();
    let mut selected = None;
    for j in 0..n {
        if proxy.usable(0, j) && selected.is_none_or(|s: usize| root_q[j] > root_q[s]) {
            selected = Some(j);
        }
    }
    let selected = selected.ok_or(Error::NoPlan)?;
    Ok(Plan { selected, values: v, root_q })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProxyConfig {
    pub n_gen: usize,
    pub k: usize,
    pub threshold: f64,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        Self { n_gen: 32, k: 12, threshold: 8.0 }
    }
}

/// Feasibility gate consulted while building: `gate(from, to)` false rejects.
pub type Gate<'a> = &'a dyn Fn(Code, Code) -> bool;

/// Propose, dedupe, drop unreachable, k-medoids prune (goal forced), annotate, prune edges.
#[allow(clippy::too_many_arguments)]
pub fn build_proxy(
    task_id: u32,
    current: Code,
    generator: &TargetGenerator,
    est: &dyn EdgeEstimator,
    gate: Option<Gate>,
    cfg: &ProxyConfig,
    rng: &mut Rng,
) -> Result<ProxyProblem> {
    let set = generator.propose(task_id, current, cfg.n_gen, rng)?;
    let mut vertices = vec![Candidate { code: current, provenance: Provenance::Current }];
    for c in set.candidates {
        if vertices.iter().any(|v| v.code == c.code) {
            continue;
        }
        let reachable = est.edge(current, c.code).discount > 0.0;
        let admitted = gate.is_none_or(|g| g(current, c.code));
        if (reachable && admitted) || c.provenance == Provenance::Goal {
            vertices.push(c);
        }
    }
    let codes: Vec<Code> = vertices.iter().map(|v| v.code).collect();
    let n = codes.len();
    if n > cfg.k + 1 {
        let mut d = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    d.set(i, j, est.edge(codes[i], codes[j]).distance);
                }
            }
        }
        let mut forced = vec![0];
        forced.extend(vertices.iter().position(|v| v.provenance == Provenance::Goal));
        let kept = kmedoids_prune(&d, cfg.k + 1, &forced, 2.0 * cfg.threshold);
        vertices = kept.into_iter().map(|i| vertices[i]).collect();
    }
    let codes: Vec<Code> = vertices.iter().map(|v| v.code).collect();
    let (r, g, d, terminal) = annotate_edges(&codes, est);
    let mut proxy = ProxyProblem::from_parts(vertices, r, g, d, terminal, cfg.threshold);
    if let Some(gate) = gate {
        for i in 0..codes.len() {
            for j in 1..codes.len() {
                if i != j && !proxy.pruned[i][j] && !gate(codes[i], codes[j]) {
                    proxy.pruned[i][j] = true;
                }
            }
        }
    }
    Ok(proxy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(code: Code) -> Candidate {
        Candidate { code, provenance: Provenance::Experienced }
    }

    #[test]
    fn two_vertices_reward_one() {
        let p = ProxyProblem::from_parts(
            vec![cand(0), cand(1)],
            vec![vec![0.0, 1.0], vec![0.0, 0.0]],
            vec![vec![0.0, 0.9], vec![0.0, 0.0]],
            vec![vec![0.0, 1.0], vec![f64::INFINITY, 0.0]],
            vec![false, true],
            8.0,
        );
        let plan = smdp_value_iteration(&p, Sweeps::Fixed(5)).unwrap();
        assert_eq!(plan.selected, 1);
        assert_eq!(plan.values[0], 1.0);
    }

    #[test]
    fn prune_threshold() {
        let m = prune_edges(&[vec![1.0, 9.0, 8.0]], 8.0);
        assert_eq!(m[0], vec![false, true, false]);
    }

    #[test]
    fn all_pruned_is_no_plan() {
        let p = ProxyProblem::from_parts(
            vec![cand(0), cand(1)],
            vec![vec![0.0, 1.0], vec![0.0, 0.0]],
            vec![vec![0.0, 0.1], vec![0.0, 0.0]],
            vec![vec![0.0, 20.0], vec![f64::INFINITY, 0.0]],
            vec![false, true],
            8.0,
        );
        assert!(matches!(smdp_value_iteration(&p, Sweeps::Fixed(5)), Err(Error::NoPlan)));
    }
}
