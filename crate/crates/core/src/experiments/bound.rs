use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::dp::{optimal_goal_policy, pairwise_reward_discount, policy_evaluation_exact};
use crate::mdp::{GoalActionTable, Outcome, TabularMdp, TabularPolicy};
use crate::{Error, Result, Rng};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundConfig {
    pub gamma: f64,
    pub eps_v: f64,
    pub eps_gamma: f64,
    pub trials: usize,
    pub n_states: usize,
    pub n_actions: usize,
    /// Checkpoints in the cyclic plan.
    pub chain_len: usize,
    /// Push every edge error in the same direction at full size.
    pub aligned: bool,
    pub seed: u64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self { gamma: 0.9, eps_v: 1e-4, eps_gamma: 1e-4, trials: 50, n_states: 10, n_actions: 3, chain_len: 4, aligned: false, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundTrial {
    pub exact: f64,
    pub estimate: f64,
    /// 2·[ε_v·v_range/(1−γ) + ε_γ·v_range/(1−γ)²]
    pub bound: f64,
}

impl BoundTrial {
    pub fn error(&self) -> f64 {
        (self.estimate - self.exact).abs()
    }

    /// error / bound; with a zero bound, 0 for round-off sized errors.
    pub fn ratio(&self) -> f64 {
        if self.bound == 0.0 {
            if self.error() <= 1e-12 { 0.0 } else { f64::INFINITY }
        } else {
            self.error() / self.bound
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub config: BoundConfig,
    pub trials: Vec<BoundTrial>,
}

impl BoundReport {
    pub fn max_ratio(&self) -> f64 {
        self.trials.iter().map(BoundTrial::ratio).fold(0.0, f64::max)
    }

    pub fn max_error(&self) -> f64 {
        self.trials.iter().map(BoundTrial::error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.trials.iter().all(|t| t.error() <= t.bound + 1e-12)
    }

    pub fn summary(&self) -> String {
        let ok = self.trials.iter().filter(|t| t.error() <= t.bound + 1e-12).count();
        format!(
            "{}: {}/{} trials within bound, max |v_hat - v| = {:.3e}, max ratio = {:.4}",
            if self.passed() { "PASS" } else { "FAIL" },
            ok,
            self.trials.len(),
            self.max_error(),
            self.max_ratio()
        )
    }

    /// CSV `trial,exact,estimate,error,bound,ratio`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,exact,estimate,error,bound,ratio\n");
        for (i, t) in self.trials.iter().enumerate() {
            out.push_str(&format!("{i},{:.12},{:.12},{:.6e},{:.6e},{:.6}\n", t.exact, t.estimate, t.error(), t.bound, t.ratio()));
        }
        out
    }
}

/// Value of cycling through `chain` under the goal-conditioned `policy`,
/// computed exactly on the phase-augmented MDP.
pub fn composite_value(mdp: &TabularMdp, policy: &GoalActionTable, chain: &[usize], gamma: f64) -> Result<f64> {
    let n = mdp.n_states();
    let k = chain.len();
    let mut rows = Vec::with_capacity(n * k);
    let mut terminal = vec![false; n * k];
    for phase in 0..k {
        let target = chain[(phase + 1) % k];
        for s in 0..n {
            terminal[phase * n + s] = mdp.is_terminal(s);
            if mdp.is_terminal(s) {
                rows.push(Vec::new());
                continue;
            }
            let a = policy.actions[target * n + s];
            rows.push(
                mdp.outcomes(s, a)
                    .iter()
                    .map(|o| {
                        let next_phase = if o.next == target { (phase + 1) % k } else { phase };
                        Outcome { next: next_phase * n + o.next, ..*o }
                    })
                    .collect(),
            );
        }
    }
    let mut initial = vec![0.0; n * k];
    initial[chain[0]] = 1.0;
    let aug = TabularMdp::new(n * k, 1, rows, terminal, initial);
    let v = policy_evaluation_exact(&aug, &TabularPolicy::uniform(n * k, 1), gamma)?;
    Ok(v.v[chain[0]])
}

/// Σ_k v̂_k Π_{l<k} γ̂_l over the repeating cycle of hops.
pub fn hop_product(values: &[f64], discounts: &[f64]) -> f64 {
    let mut partial = 0.0;
    let mut prod = 1.0;
    for (v, g) in values.iter().zip(discounts) {
        partial += prod * v;
        prod *= g;
    }
    partial / (1.0 - prod)
}

fn check_preconditions(cfg: &BoundConfig) -> Result<()> {
    let g = cfg.gamma;
    if !(0.0..1.0).contains(&g) || g == 0.0 {
        return Err(Error::Precondition(format!("gamma must be in (0, 1), got {g}")));
    }
    if cfg.eps_v < 0.0 || cfg.eps_v > 0.1 * (1.0 - g) {
        return Err(Error::Precondition(format!("eps_v = {} is not << 1 - gamma = {}", cfg.eps_v, 1.0 - g)));
    }
    if cfg.eps_gamma < 0.0 || cfg.eps_gamma > 0.1 * (1.0 - g).powi(2) {
        return Err(Error::Precondition(format!("eps_gamma = {} is not << (1 - gamma)^2 = {}", cfg.eps_gamma, (1.0 - g).powi(2))));
    }
    if cfg.chain_len < 2 || cfg.chain_len > cfg.n_states {
        return Err(Error::Precondition("chain length must be in 2..=n_states".into()));
    }
    Ok(())
}

fn perturb(x: f64, eps: f64, aligned: bool, rng: &mut Rng) -> f64 {
    if aligned {
        x + eps
    } else {
        x + rng.gen_range(-eps..=eps)
    }
}

/// Compare the hop-product estimate with perturbed edges against the exact
/// composite value on random MDPs.
pub fn bound_check(cfg: &BoundConfig) -> Result<BoundReport> {
    check_preconditions(cfg)?;
    let mut rng = crate::rng(cfg.seed);
    let g = cfg.gamma;
    // rewards lie in [0, 1)
    let v_range = 1.0 / (1.0 - g);
    let bound = 2.0 * (cfg.eps_v * v_range / (1.0 - g) + cfg.eps_gamma * v_range / (1.0 - g).powi(2));
    let mut trials = Vec::with_capacity(cfg.trials);
    while trials.len() < cfg.trials {
        let mdp = TabularMdp::random(cfg.n_states, cfg.n_actions, 0.1, &mut rng);
        let policy = optimal_goal_policy(&mdp, g);
        let (vm, gm) = pairwise_reward_discount(&mdp, &policy, g);
        let candidates: Vec<usize> = (0..cfg.n_states).filter(|&s| !mdp.is_terminal(s)).collect();
        if candidates.len() < cfg.chain_len {
            continue;
        }
        let chain: Vec<usize> = candidates.choose_multiple(&mut rng, cfg.chain_len).copied().collect();
        let hops: Vec<(usize, usize)> = (0..chain.len()).map(|i| (chain[i], chain[(i + 1) % chain.len()])).collect();
        if hops.iter().any(|&(i, j)| gm.get(i, j) < 1e-3) {
            continue;
        }
        let exact = composite_value(&mdp, &policy, &chain, g)?;
        let values: Vec<f64> = hops.iter().map(|&(i, j)| perturb(vm.get(i, j), cfg.eps_v * v_range, cfg.aligned, &mut rng)).collect();
        let discounts: Vec<f64> = hops.iter().map(|&(i, j)| perturb(gm.get(i, j), cfg.eps_gamma, cfg.aligned, &mut rng)).collect();
        trials.push(BoundTrial { exact, estimate: hop_product(&values, &discounts), bound });
    }
    Ok(BoundReport { config: *cfg, trials })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_error_is_exact() {
        let cfg = BoundConfig { eps_v: 0.0, eps_gamma: 0.0, trials: 10, ..BoundConfig::default() };
        let r = bound_check(&cfg).unwrap();
        assert!(r.max_error() <= 1e-9, "{}", r.max_error());
    }

    #[test]
    fn loose_epsilon_refused() {
        let cfg = BoundConfig { eps_gamma: 0.01, ..BoundConfig::default() };
        assert!(matches!(bound_check(&cfg), Err(Error::Precondition(_))));
    }
}
