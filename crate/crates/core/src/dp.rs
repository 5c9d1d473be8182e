//! Exact dynamic-programming ground truths over tabular MDPs.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::gridworld::Task;
use crate::mdp::{argmax, GoalActionTable, GoalPolicy, TabularMdp, TabularPolicy};
use crate::{Code, Error, Result};

pub const EXACT_TOL: f64 = 1e-10;
pub const ITERATIVE_TOL: f64 = 1e-9;
const MAX_ITERS: usize = 1_000_000;

/// State values with the discount that produced them. Terminal states are 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    pub v: Vec<f64>,
    pub gamma: f64,
}

/// Action values, row-major `(s, a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    pub n_actions: usize,
    pub q: Vec<f64>,
}

impl QTable {
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.q[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// Greedy deterministic policy, lowest action index on ties.
    pub fn greedy(&self) -> TabularPolicy {
        let n = self.q.len() / self.n_actions;
        let actions: Vec<usize> = (0..n).map(|s| argmax(self.row(s))).collect();
        TabularPolicy::deterministic(&actions, self.n_actions)
    }
}

/// One application of B_π.
pub fn bellman_operator(mdp: &TabularMdp, policy: &TabularPolicy, gamma: f64, v: &[f64]) -> Vec<f64> {
    (0..mdp.n_states())
        .map(|s| {
            if mdp.is_terminal(s) {
                return 0.0;
            }
            let pi = policy.row(s);
            let mut total = 0.0;
            for (a, &p) in pi.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for o in mdp.outcomes(s, a) {
                    total += p * o.prob * (o.reward + gamma * v[o.next]);
                }
            }
            total
        })
        .collect()
}

fn terminates_surely(mdp: &TabularMdp, policy: &TabularPolicy) -> bool {
    // states that can reach a terminal under π, by backward fixed point
    let n = mdp.n_states();
    let mut ok: Vec<bool> = (0..n).map(|s| mdp.is_terminal(s)).collect();
    loop {
        let mut changed = false;
        for s in 0..n {
            if ok[s] {
                continue;
            }
            let reaches = policy.row(s).iter().enumerate().any(|(a, &p)| {
                p > 0.0 && mdp.outcomes(s, a).iter().any(|o| o.prob > 0.0 && ok[o.next])
            });
            if reaches {
                ok[s] = true;
                changed = true;
            }
        }
        if !changed {
            return ok.into_iter().all(|b| b);
        }
    }
}

/// Solve (I − γP_π) v = r_π directly.
pub fn policy_evaluation_exact(mdp: &TabularMdp, policy: &TabularPolicy, gamma: f64) -> Result<ValueTable> {
    if gamma >= 1.0 && !terminates_surely(mdp, policy) {
        return Err(Error::NoUniqueValue);
    }
    let n = mdp.n_states();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for s in 0..n {
        if mdp.is_terminal(s) {
            continue;
        }
        for (act, &p) in policy.row(s).iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for o in mdp.outcomes(s, act) {
                a[(s, o.next)] -= gamma * p * o.prob;
                b[s] += p * o.prob * o.reward;
            }
        }
    }
    let x = a.clone().lu().solve(&b).ok_or(Error::NoUniqueValue)?;
    let residual = (&a * &x - &b).amax();
    if !x.iter().all(|v| v.is_finite()) || residual > EXACT_TOL * (1.0 + x.amax()) {
        return Err(Error::NoUniqueValue);
    }
    Ok(ValueTable { v: x.iter().copied().collect(), gamma })
}

/// Repeated B_π until the sup-norm change drops below `tol`.
pub fn policy_evaluation_iterative(mdp: &TabularMdp, policy: &TabularPolicy, gamma: f64, tol: f64) -> Result<ValueTable> {
    policy_evaluation_iterative_with_limit(mdp, policy, gamma, tol, MAX_ITERS)
}

pub fn policy_evaluation_iterative_with_limit(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    gamma: f64,
    tol: f64,
    max_iters: usize,
) -> Result<ValueTable> {
    let mut v = vec![0.0; mdp.n_states()];
    for _ in 0..max_iters {
        let next = bellman_operator(mdp, policy, gamma, &v);
        let delta = sup_diff(&next, &v);
        v = next;
        if delta < tol {
            return Ok(ValueTable { v, gamma });
        }
    }
    Err(Error::MaxIterations(max_iters))
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// q(s,a) = r(s,a) + γ Σ p(s'|s,a) v(s').
pub fn q_from_v(mdp: &TabularMdp, v: &[f64], gamma: f64) -> QTable {
    let na = mdp.n_actions();
    let mut q = vec![0.0; mdp.n_states() * na];
    for s in 0..mdp.n_states() {
        if mdp.is_terminal(s) {
            continue;
        }
        for a in 0..na {
            q[s * na + a] = mdp.outcomes(s, a).iter().map(|o| o.prob * (o.reward + gamma * v[o.next])).sum();
        }
    }
    QTable { n_actions: na, q }
}

fn optimality_sweep(mdp: &TabularMdp, v: &[f64], gamma: f64) -> Vec<f64> {
    let q = q_from_v(mdp, v, gamma);
    (0..mdp.n_states())
        .map(|s| if mdp.is_terminal(s) { 0.0 } else { q.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max) })
        .collect()
}

/// Optimal values and the greedy deterministic policy (lowest index on ties).
pub fn value_iteration(mdp: &TabularMdp, gamma: f64, tol: f64) -> (ValueTable, TabularPolicy) {
    let mut v = vec![0.0; mdp.n_states()];
    for _ in 0..MAX_ITERS {
        let next = optimality_sweep(mdp, &v, gamma);
        let delta = sup_diff(&next, &v);
        v = next;
        if delta < tol {
            break;
        }
    }
    let policy = q_from_v(mdp, &v, gamma).greedy();
    (ValueTable { v, gamma }, policy)
}

/// Greedy policy after each of `sweeps` VI sweeps from v = 0.
pub fn value_iteration_trace(mdp: &TabularMdp, gamma: f64, sweeps: usize) -> Vec<(Vec<f64>, TabularPolicy)> {
    let mut v = vec![0.0; mdp.n_states()];
    let mut out = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        v = optimality_sweep(mdp, &v, gamma);
        out.push((v.clone(), q_from_v(mdp, &v, gamma).greedy()));
    }
    out
}

/// Expected first-hitting steps, clipped at the horizon, with a "never" flag.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    pub n: usize,
    pub horizon: usize,
    /// `d[s * n + g]` = E[min(T, H)]
    pub d: Vec<f64>,
    /// true when the hitting probability within H is exactly zero
    pub never: Vec<bool>,
}

impl DistanceMatrix {
    /// Distance, or +∞ when the target is never hit.
    pub fn get(&self, s: usize, g: usize) -> f64 {
        if self.never[s * self.n + g] {
            f64::INFINITY
        } else {
            self.d[s * self.n + g]
        }
    }
}

/// P(T ≤ t) for t = 0..=horizon, for every source, with `hit` absorbing.
///
/// Returns the per-source hit probability at the horizon and Σ_{t<H} P(T > t).
fn hitting_sums(
    mdp: &TabularMdp,
    probs: &dyn Fn(usize) -> Vec<f64>,
    hit: &dyn Fn(usize) -> bool,
    horizon: usize,
) -> (Vec<f64>, Vec<f64>) {
    let n = mdp.n_states();
    let pis: Vec<Vec<f64>> = (0..n).map(|s| if mdp.is_terminal(s) { Vec::new() } else { probs(s) }).collect();
    let mut q = vec![0.0; n];
    let mut sum = vec![0.0; n];
    for t in 0..horizon {
        // sum accumulates P(T > t) = 1 − q_t
        for s in 0..n {
            sum[s] += 1.0 - q[s];
        }
        let next: Vec<f64> = (0..n)
            .map(|s| {
                if mdp.is_terminal(s) {
                    return 0.0;
                }
                let mut total = 0.0;
                for (a, &p) in pis[s].iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    for o in mdp.outcomes(s, a) {
                        total += p * o.prob * if hit(o.next) { 1.0 } else { q[o.next] };
                    }
                }
                total
            })
            .collect();
        let settled = next == q;
        q = next;
        if settled {
            let remaining = (horizon - t - 1) as f64;
            for s in 0..n {
                sum[s] += remaining * (1.0 - q[s]);
            }
            break;
        }
    }
    (q, sum)
}

/// First-hitting distances under a (possibly goal-conditioned) policy.
pub fn pairwise_distance(mdp: &TabularMdp, policy: &dyn GoalPolicy, horizon: usize) -> DistanceMatrix {
    let n = mdp.n_states();
    let mut d = vec![0.0; n * n];
    let mut never = vec![false; n * n];
    for g in 0..n {
        let (q, sum) = hitting_sums(mdp, &|s| policy.action_probs(s, g), &|x| x == g, horizon);
        for s in 0..n {
            d[s * n + g] = sum[s];
            never[s * n + g] = q[s] == 0.0;
        }
    }
    DistanceMatrix { n, horizon, d, never }
}

/// P(D_π(s, g) ≤ τ) with g absorbing.
pub fn tau_feasibility_true(mdp: &TabularMdp, policy: &dyn GoalPolicy, s: usize, g: usize, tau: usize) -> f64 {
    hitting_sums(mdp, &|x| policy.action_probs(x, g), &|x| x == g, tau).0[s]
}

/// τ-feasibility of a set-valued target for every source state.
pub fn tau_feasibility_set(
    mdp: &TabularMdp,
    probs: &dyn Fn(usize) -> Vec<f64>,
    hit: &dyn Fn(usize) -> bool,
    tau: usize,
) -> Vec<f64> {
    hitting_sums(mdp, probs, hit, tau).0
}

/// Dense row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        self.data[i * self.n + j] = x;
    }
}

/// Cumulative reward and discount from i until first reaching j (j absorbing).
///
/// `v_ij` includes the reward of the transition into j; episodes ending in
/// another terminal stop accumulating. `γ_ij = E[γ^T 1{hit j}]`.
pub fn pairwise_reward_discount(mdp: &TabularMdp, policy: &dyn GoalPolicy, gamma: f64) -> (Matrix, Matrix) {
    let n = mdp.n_states();
    let mut vm = Matrix::zeros(n);
    let mut gm = Matrix::zeros(n);
    for j in 0..n {
        let mut a = DMatrix::<f64>::identity(n, n);
        let mut b = DMatrix::<f64>::zeros(n, 2);
        for s in 0..n {
            if mdp.is_terminal(s) {
                continue;
            }
            for (act, p) in policy.action_probs(s, j).into_iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for o in mdp.outcomes(s, act) {
                    let w = p * o.prob;
                    b[(s, 0)] += w * o.reward;
                    if o.next == j {
                        b[(s, 1)] += w * gamma;
                    } else if !mdp.is_terminal(o.next) {
                        a[(s, o.next)] -= gamma * w;
                    }
                }
            }
        }
        let x = a.lu().solve(&b).expect("γ < 1 keeps the system nonsingular");
        for s in 0..n {
            vm.set(s, j, x[(s, 0)]);
            gm.set(s, j, x[(s, 1)]);
        }
    }
    (vm, gm)
}

/// Optimal goal-conditioned policy: for each target, VI on the goal-augmented
/// MDP (reward 1 on hitting, target absorbing, discount `gamma`).
pub fn optimal_goal_policy(mdp: &TabularMdp, gamma: f64) -> GoalActionTable {
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let mut actions = vec![0; n * n];
    for g in 0..n {
        let mut v = vec![0.0; n];
        let q_of = |v: &[f64], s: usize, a: usize| -> f64 {
            mdp.outcomes(s, a)
                .iter()
                .map(|o| {
                    o.prob
                        * if o.next == g {
                            1.0
                        } else if mdp.is_terminal(o.next) {
                            0.0
                        } else {
                            gamma * v[o.next]
                        }
                })
                .sum()
        };
        for _ in 0..MAX_ITERS {
            let next: Vec<f64> = (0..n)
                .map(|s| {
                    if mdp.is_terminal(s) {
                        0.0
                    } else {
                        (0..na).map(|a| q_of(&v, s, a)).fold(f64::NEG_INFINITY, f64::max)
                    }
                })
                .collect();
            let delta = sup_diff(&next, &v);
            v = next;
            if delta < 1e-13 {
                break;
            }
        }
        for s in 0..n {
            if !mdp.is_terminal(s) {
                let q: Vec<f64> = (0..na).map(|a| q_of(&v, s, a)).collect();
                actions[g * n + s] = argmax(&q);
            }
        }
    }
    GoalActionTable { n_states: n, n_actions: na, actions }
}

/// Graph reachability (≥ 1 step, any policy) between MDP states.
#[derive(Clone, Debug, PartialEq)]
pub struct Reachability {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl Reachability {
    pub fn new(mdp: &TabularMdp) -> Self {
        let n = mdp.n_states();
        let words = n.div_ceil(64);
        let mut bits = vec![0u64; n * words];
        let succ: Vec<Vec<usize>> = (0..n)
            .map(|s| {
                let mut v: Vec<usize> = (0..mdp.n_actions())
                    .flat_map(|a| mdp.outcomes(s, a).iter().filter(|o| o.prob > 0.0).map(|o| o.next))
                    .collect();
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        let mut stack = Vec::new();
        for s in 0..n {
            let row = &mut bits[s * words..(s + 1) * words];
            stack.clear();
            stack.extend_from_slice(&succ[s]);
            while let Some(x) = stack.pop() {
                let (w, b) = (x / 64, x % 64);
                if row[w] >> b & 1 == 1 {
                    continue;
                }
                row[w] |= 1 << b;
                stack.extend_from_slice(&succ[x]);
            }
        }
        Self { n, words, bits }
    }

    /// Whether some policy reaches `g` from `s` in at least one step.
    pub fn reachable(&self, s: usize, g: usize) -> bool {
        debug_assert!(s < self.n && g < self.n);
        self.bits[s * self.words + g / 64] >> (g % 64) & 1 == 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TargetClass {
    G0,
    G1,
    G2,
}

impl TargetClass {
    pub fn name(self) -> &'static str {
        match self {
            TargetClass::G0 => "G0",
            TargetClass::G1 => "G1",
            TargetClass::G2 => "G2",
        }
    }
}

/// G1 if the code is off-MDP; G2 if valid but unreachable from `source`; else G0.
pub fn classify_target(task: &Task, source: usize, candidate: Code) -> TargetClass {
    match task.decode(candidate) {
        None => TargetClass::G1,
        Some(g) if g == source || task.reachability().reachable(source, g) => TargetClass::G0,
        Some(_) => TargetClass::G2,
    }
}

/// Default truncation horizon 4·W·H.
pub fn default_horizon(task: &Task) -> usize {
    4 * task.spec.width * task.spec.height
}

/// Oracle dump `s,g,d_true,gamma_true,v_true,class` under the optimal
/// goal-conditioned policy. `s` and `g` are state codes.
pub fn oracle_csv(task: &Task, gamma: f64, goal_gamma: f64) -> String {
    let mdp = &task.mdp;
    let policy = optimal_goal_policy(mdp, goal_gamma);
    let dist = pairwise_distance(mdp, &policy, default_horizon(task));
    let (vm, gm) = pairwise_reward_discount(mdp, &policy, gamma);
    let mut out = String::from("s,g,d_true,gamma_true,v_true,class\n");
    for s in task.non_terminal_states() {
        for g in 0..mdp.n_states() {
            let d = dist.get(s, g);
            let d_txt = if d.is_infinite() { "inf".to_string() } else { format!("{d}") };
            let class = classify_target(task, s, task.code_of(g));
            writeln!(
                out,
                "{},{},{},{},{},{}",
                task.code_of(s),
                task.code_of(g),
                d_txt,
                gm.get(s, g),
                vm.get(s, g),
                class.name()
            )
            .unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Outcome;

    fn chain() -> TabularMdp {
        TabularMdp::new(
            2,
            1,
            vec![vec![Outcome { next: 1, prob: 1.0, reward: 1.0 }], vec![]],
            vec![false, true],
            vec![1.0, 0.0],
        )
    }

    #[test]
    fn one_step_chain() {
        let m = chain();
        let p = TabularPolicy::uniform(2, 1);
        let v = policy_evaluation_exact(&m, &p, 0.9).unwrap();
        assert!((v.v[0] - 1.0).abs() < 1e-12);
        assert_eq!(v.v[1], 0.0);
    }

    #[test]
    fn zero_rewards_zero_values() {
        let mut rng = crate::rng(1);
        let m = TabularMdp::random(10, 2, 0.2, &mut rng);
        let rows: Vec<Vec<_>> = (0..10 * 2)
            .map(|i| m.outcomes(i / 2, i % 2).iter().map(|o| Outcome { reward: 0.0, ..*o }).collect())
            .collect();
        let z = TabularMdp::new(10, 2, rows, m.terminal_flags().to_vec(), m.initial().to_vec());
        let v = policy_evaluation_exact(&z, &TabularPolicy::uniform(10, 2), 0.95).unwrap();
        assert!(v.v.iter().all(|&x| x.abs() < 1e-14));
    }

    #[test]
    fn gamma_one_self_loop_is_singular() {
        let m = TabularMdp::new(1, 1, vec![vec![Outcome { next: 0, prob: 1.0, reward: 0.0 }]], vec![false], vec![1.0]);
        let p = TabularPolicy::uniform(1, 1);
        assert!(matches!(policy_evaluation_exact(&m, &p, 1.0), Err(Error::NoUniqueValue)));
        assert!(matches!(
            policy_evaluation_iterative_with_limit(&TabularMdp::new(1, 1, vec![vec![Outcome { next: 0, prob: 1.0, reward: 1.0 }]], vec![false], vec![1.0]), &p, 1.0, 1e-9, 100),
            Err(Error::MaxIterations(100))
        ));
    }

    #[test]
    fn single_application_gives_reward() {
        let mut rng = crate::rng(2);
        let m = TabularMdp::random(12, 3, 0.2, &mut rng);
        let p = TabularPolicy::random(12, 3, &mut rng);
        let v = bellman_operator(&m, &p, 0.9, &vec![0.0; 12]);
        for s in 0..12 {
            let r: f64 = (0..3).map(|a| p.row(s)[a] * m.expected_reward(s, a)).sum();
            assert!((v[s] - r).abs() < 1e-14);
        }
    }

    #[test]
    fn single_state_vi() {
        let m = TabularMdp::new(1, 1, vec![vec![Outcome { next: 0, prob: 1.0, reward: 0.0 }]], vec![false], vec![1.0]);
        let (v, pi) = value_iteration(&m, 0.9, 1e-12);
        assert_eq!(v.v, vec![0.0]);
        assert_eq!(pi.action(0), 0);
    }

    #[test]
    fn q_from_zero_v_is_reward() {
        let mut rng = crate::rng(4);
        let m = TabularMdp::random(8, 2, 0.2, &mut rng);
        let q = q_from_v(&m, &vec![0.0; 8], 0.9);
        for s in 0..8 {
            for a in 0..2 {
                assert!((q.get(s, a) - m.expected_reward(s, a)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn forced_successor_distance_and_tau() {
        // 0 -> 1 -> 2 -> 3 (terminal)
        let rows = (0..4)
            .map(|s| if s < 3 { vec![Outcome { next: s + 1, prob: 1.0, reward: 0.0 }] } else { vec![] })
            .collect();
        let m = TabularMdp::new(4, 1, rows, vec![false, false, false, true], vec![1.0, 0.0, 0.0, 0.0]);
        let p = TabularPolicy::uniform(4, 1);
        let d = pairwise_distance(&m, &p, 16);
        assert_eq!(d.get(0, 1), 1.0);
        assert_eq!(d.get(0, 3), 3.0);
        assert!(d.get(1, 0).is_infinite());
        assert_eq!(tau_feasibility_true(&m, &p, 0, 3, 2), 0.0);
        assert_eq!(tau_feasibility_true(&m, &p, 0, 3, 3), 1.0);
        let (_, g) = pairwise_reward_discount(&m, &p, 0.9);
        assert!((g.get(0, 1) - 0.9).abs() < 1e-12);
        assert_eq!(g.get(1, 0), 0.0);
    }
}
