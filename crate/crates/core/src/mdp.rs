//! Enumerated tabular MDPs and stochastic policies over them.

use rand::Rng as _;

use crate::Rng;

/// One possible result of taking an action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
}

/// Finite MDP with sparse transition rows.
///
/// Terminal states have no outgoing transitions; their value is 0 by convention.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    rows: Vec<Vec<Outcome>>,
    terminal: Vec<bool>,
    initial: Vec<f64>,
}

impl TabularMdp {
    /// `rows[s * n_actions + a]` lists the outcomes of `(s, a)`; terminal rows must be empty.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        rows: Vec<Vec<Outcome>>,
        terminal: Vec<bool>,
        initial: Vec<f64>,
    ) -> Self {
        assert_eq!(rows.len(), n_states * n_actions);
        assert_eq!(terminal.len(), n_states);
        assert_eq!(initial.len(), n_states);
        Self { n_states, n_actions, rows, terminal, initial }
    }

    /// Random MDP for property tests. Roughly `terminal_frac` of states are
    /// terminal; each (s, a) reaches 1..=3 successors with rewards in [0, 1).
    pub fn random(n_states: usize, n_actions: usize, terminal_frac: f64, rng: &mut Rng) -> Self {
        let mut terminal: Vec<bool> = (0..n_states).map(|_| rng.gen_bool(terminal_frac)).collect();
        terminal[0] = false;
        let mut rows = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            for _ in 0..n_actions {
                if terminal[s] {
                    rows.push(Vec::new());
                    continue;
                }
                let k = rng.gen_range(1..=3usize.min(n_states));
                let mut weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
                let total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|w| *w /= total);
                let mut row: Vec<Outcome> = Vec::with_capacity(k);
                for w in weights {
                    let next = rng.gen_range(0..n_states);
                    let reward = rng.gen_range(0.0..1.0);
                    row.push(Outcome { next, prob: w, reward });
                }
                rows.push(row);
            }
        }
        let initial = {
            let mut v = vec![0.0; n_states];
            v[0] = 1.0;
            v
        };
        Self::new(n_states, n_actions, rows, std::mem::take(&mut terminal), initial)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn outcomes(&self, s: usize, a: usize) -> &[Outcome] {
        &self.rows[s * self.n_actions + a]
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal_flags(&self) -> &[bool] {
        &self.terminal
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn set_initial(&mut self, initial: Vec<f64>) {
        assert_eq!(initial.len(), self.n_states);
        self.initial = initial;
    }

    /// r(s, a) = Σ p(s'|s,a) R(s,a,s').
    pub fn expected_reward(&self, s: usize, a: usize) -> f64 {
        self.outcomes(s, a).iter().map(|o| o.prob * o.reward).sum()
    }

    /// Sample a successor. Panics on terminal states.
    pub fn sample(&self, s: usize, a: usize, rng: &mut Rng) -> (usize, f64) {
        let row = self.outcomes(s, a);
        assert!(!row.is_empty(), "sampling from terminal state {s}");
        let mut u: f64 = rng.gen();
        for o in row {
            if u < o.prob {
                return (o.next, o.reward);
            }
            u -= o.prob;
        }
        let o = row.last().unwrap();
        (o.next, o.reward)
    }

    /// Sample an initial state.
    pub fn sample_initial(&self, rng: &mut Rng) -> usize {
        let mut u: f64 = rng.gen();
        let mut last = 0;
        for (s, &p) in self.initial.iter().enumerate() {
            if p > 0.0 {
                last = s;
                if u < p {
                    return s;
                }
                u -= p;
            }
        }
        last
    }

    /// True when every (s, a) has a single successor.
    pub fn is_deterministic(&self) -> bool {
        self.rows.iter().all(|r| r.len() <= 1)
    }
}

/// Stochastic policy stored as one probability row per state.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularPolicy {
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self { n_actions, probs: vec![1.0 / n_actions as f64; n_states * n_actions] }
    }

    pub fn deterministic(actions: &[usize], n_actions: usize) -> Self {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * n_actions + a] = 1.0;
        }
        Self { n_actions, probs }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n_actions = rows.first().map_or(0, |r| r.len());
        Self { n_actions, probs: rows.into_iter().flatten().collect() }
    }

    pub fn random(n_states: usize, n_actions: usize, rng: &mut Rng) -> Self {
        let mut rows = Vec::with_capacity(n_states);
        for _ in 0..n_states {
            let mut r: Vec<f64> = (0..n_actions).map(|_| rng.gen_range(0.0..1.0)).collect();
            let t: f64 = r.iter().sum();
            r.iter_mut().for_each(|x| *x /= t);
            rows.push(r);
        }
        Self::from_rows(rows)
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// Highest-probability action, lowest index on ties.
    pub fn action(&self, s: usize) -> usize {
        argmax(self.row(s))
    }
}

/// A policy that may depend on the pursued target state.
pub trait GoalPolicy {
    /// Action probabilities at MDP state `s` when pursuing MDP state `target`.
    fn action_probs(&self, s: usize, target: usize) -> Vec<f64>;
}

impl GoalPolicy for TabularPolicy {
    fn action_probs(&self, s: usize, _target: usize) -> Vec<f64> {
        self.row(s).to_vec()
    }
}

/// Goal-conditioned policy given as one deterministic action per (state, target).
#[derive(Clone, Debug)]
pub struct GoalActionTable {
    pub n_states: usize,
    pub n_actions: usize,
    /// `actions[target * n_states + s]`
    pub actions: Vec<usize>,
}

impl GoalPolicy for GoalActionTable {
    fn action_probs(&self, s: usize, target: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.n_actions];
        p[self.actions[target * self.n_states + s]] = 1.0;
        p
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_rows_are_stochastic() {
        let mut rng = crate::rng(3);
        let m = TabularMdp::random(30, 4, 0.2, &mut rng);
        for s in 0..30 {
            for a in 0..4 {
                let row = m.outcomes(s, a);
                if m.is_terminal(s) {
                    assert!(row.is_empty());
                } else {
                    let t: f64 = row.iter().map(|o| o.prob).sum();
                    assert!((t - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }
}
