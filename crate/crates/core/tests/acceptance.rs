//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! `cargo test --test acceptance` runs everything; trailing numbers select
//! criteria, e.g. `cargo test --test acceptance -- 1 5 7`.

use std::collections::{BTreeSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng as _;
use tapkit::agents::{evaluate_skipper, q_error, run_dyna, run_skipper, AgentConfig, Curriculum, Variant};
use tapkit::distributional::{support_swap_to_discount, Histogram, Horizon, Support};
use tapkit::dp::{
    bellman_operator, optimal_goal_policy, pairwise_distance, pairwise_reward_discount, policy_evaluation_exact,
    policy_evaluation_iterative, q_from_v, sup_diff, tau_feasibility_set, value_iteration, Matrix,
};
use tapkit::estimators::{
    update_distance_estimate, update_feasibility_with, update_reward_estimate, FeasibilityTable, GoalTable, LearningRate,
    TargetPolicy,
};
use tapkit::experiments::{bound_check, delusion_frequency, mean_ci95, welch_t_test, BoundConfig};
use tapkit::gridworld::{Dir, Task, TaskSpec};
use tapkit::mdp::{TabularMdp, TabularPolicy};
use tapkit::proxy::{kmedoids, total_cost};
use tapkit::replay::{MixtureSpec, SourceTargetPair, Strategy, Transition};
use tapkit::search::{tree_search, ExactModel, Heuristic, SampleModel, SearchConfig};
use tapkit::Code;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Criterion = (usize, &'static str, Duration, fn() -> Outcome);

fn main() {
    let only: BTreeSet<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [Criterion; 11] = [
        (1, "oracle consistency", Duration::from_secs(10), c1_oracle_consistency),
        (2, "value iteration on open grid", Duration::from_secs(60), c2_value_iteration),
        (3, "tree search", Duration::from_secs(30), c3_tree_search),
        (4, "update-rule fixed points", Duration::from_secs(120), c4_fixed_points),
        (5, "support swap", Duration::from_secs(60), c5_support_swap),
        (6, "k-medoids", Duration::from_secs(10), c6_kmedoids),
        (7, "composite value bound", Duration::from_secs(60), c7_bound),
        (8, "feasibility rejection", Duration::from_secs(20 * 60), c8_feasibility_rejection),
        (9, "dyna+ rejection", Duration::from_secs(10 * 60), c9_dyna),
        (10, "feasibility reduction", Duration::from_secs(5 * 60), c10_reduction),
        (11, "cli determinism", Duration::from_secs(5 * 60), c11_determinism),
    ];
    let mut failed = 0;
    for (n, name, budget, run) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = t.elapsed();
        let in_time = elapsed <= budget;
        let pass = result.pass && in_time;
        failed += !pass as usize;
        println!(
            "criterion {n:>2} {name:<30} {}  {:.1}s/{}s  {}{}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            result.detail,
            if in_time { "" } else { "  [over time budget]" }
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

// 1 ------------------------------------------------------------------------

fn c1_oracle_consistency() -> Outcome {
    let mut rng = tapkit::rng(1);
    let mut worst_eval: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut pairs = 0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=50);
        let na = rng.gen_range(1..=4);
        let gamma = rng.gen_range(0.5..0.99);
        let mdp = TabularMdp::random(n, na, 0.1, &mut rng);
        let pi = TabularPolicy::random(n, na, &mut rng);
        let exact = policy_evaluation_exact(&mdp, &pi, gamma).unwrap();
        let iter = policy_evaluation_iterative(&mdp, &pi, gamma, 1e-12).unwrap();
        worst_eval = worst_eval.max(sup_diff(&exact.v, &iter.v));
        for _ in 0..10 {
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let before = sup_diff(&u, &w);
            let after = sup_diff(&bellman_operator(&mdp, &pi, gamma, &u), &bellman_operator(&mdp, &pi, gamma, &w));
            worst_ratio = worst_ratio.max(after / before / gamma);
            pairs += 1;
        }
    }
    outcome(
        worst_eval <= 1e-8 && worst_ratio <= 1.0 + 1e-12,
        format!("max |exact - iterative| = {worst_eval:.2e}; max contraction ratio / gamma = {worst_ratio:.6} over {pairs} pairs"),
    )
}

// 2 ------------------------------------------------------------------------

fn bfs_to_goal(task: &Task) -> Vec<Option<usize>> {
    let l = &task.layout;
    let idx = |c: (usize, usize)| c.1 * l.width + c.0;
    let mut dist = vec![None; l.width * l.height];
    dist[idx(l.goal)] = Some(0);
    let mut queue = VecDeque::from([l.goal]);
    while let Some(c) = queue.pop_front() {
        let d = dist[idx(c)].unwrap();
        for k in 0..4 {
            if let Some(nb) = l.neighbor(c, Dir::from_index(k)) {
                if !l.is_lava(nb) && dist[idx(nb)].is_none() {
                    dist[idx(nb)] = Some(d + 1);
                    queue.push_back(nb);
                }
            }
        }
    }
    dist
}

fn c2_value_iteration() -> Outcome {
    let gamma = 0.99;
    let mut worst: f64 = 0.0;
    let mut suboptimal = 0;
    let mut checked = 0;
    for seed in 0..5 {
        let task = Task::new(TaskSpec::rds(6, 6, 0.0, seed)).unwrap();
        let bfs = bfs_to_goal(&task);
        let at = |s: usize| {
            let p = task.state(s).pos;
            bfs[p.1 * task.layout.width + p.0].unwrap()
        };
        let (v, pi) = value_iteration(&task.mdp, gamma, 1e-13);
        for s in task.non_terminal_states() {
            let d = at(s);
            worst = worst.max((v.v[s] - gamma.powi(d as i32 - 1)).abs());
            let next = task.mdp.outcomes(s, pi.action(s))[0].next;
            suboptimal += (at(next) + 1 != d) as usize;
            checked += 1;
        }
    }
    outcome(
        worst <= 1e-9 && suboptimal == 0,
        format!("max |v* - 0.99^(BFS-1)| = {worst:.2e}; {suboptimal}/{checked} greedy moves off a shortest path"),
    )
}

// 3 ------------------------------------------------------------------------

struct Table(Vec<(usize, usize, usize, f64, bool)>);

impl SampleModel for Table {
    fn simulate(&self, s: usize, a: usize) -> (usize, f64, bool) {
        self.0.iter().find(|t| t.0 == s && t.1 == a).map(|t| (t.2, t.3, t.4)).unwrap_or((s, 0.0, false))
    }
}

fn c3_tree_search() -> Outcome {
    // root 0: action 0 looks best by Q but leads nowhere; action 2 reaches a
    // terminal worth 0.4 two steps down
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
    let out = tree_search(0, 3, &model, &q, &SearchConfig::new(1.0, 3, Heuristic::BestFirst), &mut tapkit::rng(0));
    let terminal_return = out.nodes.iter().find(|n| n.terminal).map(|n| n.sigma);
    let walkthrough = out.action == 2 && out.path == [2, 0] && terminal_return.is_some_and(|r| (r - 0.4).abs() < 1e-12);

    let gamma = 0.99;
    let (mut agree, mut total) = (0, 0);
    for seed in 0..10 {
        let task = Task::new(TaskSpec::rds(6, 6, 0.25, seed)).unwrap();
        let (v, _) = value_iteration(&task.mdp, gamma, 1e-13);
        let qs = q_from_v(&task.mdp, &v.v, gamma);
        let model = ExactModel { mdp: &task.mdp };
        let cfg = SearchConfig::new(gamma, 15, Heuristic::BestFirst);
        let mut rng = tapkit::rng(seed);
        for s in task.non_terminal_states() {
            let a = tree_search(s, task.mdp.n_actions(), &model, &qs, &cfg, &mut rng).action;
            let best = qs.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max);
            agree += ((qs.get(s, a) - best).abs() < 1e-9) as usize;
            total += 1;
        }
    }
    let rate = agree as f64 / total as f64;
    outcome(
        walkthrough && rate >= 0.99,
        format!(
            "walkthrough action {} path {:?} terminal return {:?}; budget 15 agrees with DP on {agree}/{total} ({:.1}%)",
            out.action,
            out.path,
            terminal_return,
            rate * 100.0
        ),
    )
}

// 4 ------------------------------------------------------------------------

fn c4_fixed_points() -> Outcome {
    let gamma = 0.99;
    let mut worst_d: f64 = 0.0;
    let mut worst_v: f64 = 0.0;
    let mut n_d = 0;
    for seed in 0..2 {
        let task = Task::new(TaskSpec::rds(6, 6, 0.0, seed)).unwrap();
        let mdp = &task.mdp;
        let n = mdp.n_states();
        let na = mdp.n_actions();
        let goal_policy = optimal_goal_policy(mdp, 0.95);
        let pi = |s: Code, g: Code| {
            let (s, g) = (task.decode(s).unwrap(), task.decode(g).unwrap());
            goal_policy.actions[g * n + s]
        };
        let mut dist = GoalTable::distance_for(&task.codec, na);
        let mut value = GoalTable::value_for(&task.codec, na, gamma);
        let mut pairs = Vec::new();
        for s in task.non_terminal_states() {
            for a in 0..na {
                for o in mdp.outcomes(s, a) {
                    let tr = Transition {
                        state: task.code_of(s),
                        action: a as u8,
                        reward: o.reward,
                        next: task.code_of(o.next),
                        terminal: mdp.is_terminal(o.next),
                    };
                    for g in 0..n {
                        pairs.push(SourceTargetPair { transition: tr, task: 0, target: task.code_of(g), strategy: Strategy::Episode });
                    }
                }
            }
        }
        for _ in 0..3000 {
            let mut change: f64 = 0.0;
            for p in &pairs {
                let (s, a, g) = (p.transition.state, p.transition.action as usize, p.target);
                let before = (dist.mean(s, a, g), value.mean(s, a, g));
                update_distance_estimate(&mut dist, p, &pi, LearningRate::default());
                update_reward_estimate(&mut value, p, &pi, gamma, LearningRate::default());
                change = change.max((dist.mean(s, a, g) - before.0).abs()).max((value.mean(s, a, g) - before.1).abs());
            }
            if change < 1e-10 {
                break;
            }
        }
        let truth_d = pairwise_distance(mdp, &goal_policy, 64);
        let (truth_v, _) = pairwise_reward_discount(mdp, &goal_policy, gamma);
        for s in task.non_terminal_states() {
            for g in 0..n {
                let a = goal_policy.actions[g * n + s];
                let (sc, gc) = (task.code_of(s), task.code_of(g));
                let d = truth_d.get(s, g);
                if d < 16.0 {
                    worst_d = worst_d.max((dist.mean(sc, a, gc) - d).abs());
                    n_d += 1;
                }
                worst_v = worst_v.max((value.mean(sc, a, gc) - truth_v.get(s, g)).abs());
            }
        }
    }
    outcome(
        worst_d <= 0.01 && worst_v <= 0.01,
        format!("max distance error {worst_d:.2e} over {n_d} pairs below T; max reward error {worst_v:.2e}"),
    )
}

// 5 ------------------------------------------------------------------------

fn c5_support_swap() -> Outcome {
    let mut rng = tapkit::rng(5);
    let support = Arc::new(Support::distance(16));
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mut m: Vec<f64> = (0..16).map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen::<f64>() }).collect();
        m[rng.gen_range(0..16)] += 0.1;
        let total: f64 = m.iter().sum();
        m.iter_mut().for_each(|x| *x /= total);
        let h = Histogram::new(support.clone(), m.clone()).unwrap();
        let gamma: f64 = rng.gen_range(0.5..0.999);
        // bins hold distances 1..=16, the last one meaning "never"
        let direct: f64 = (0..15).map(|i| m[i] * gamma.powi(i as i32 + 1)).sum();
        worst = worst.max((support_swap_to_discount(&h, gamma, Horizon::Infinite) - direct).abs());
        let tau = rng.gen_range(1..=16usize);
        let direct_tau: f64 = (0..16).map(|i| m[i] * gamma.powi((i + 1).min(tau) as i32)).sum();
        worst = worst.max((support_swap_to_discount(&h, gamma, Horizon::Finite(tau)) - direct_tau).abs());
    }
    let mut m = vec![0.0; 16];
    m[0] = 0.5;
    m[2] = 0.5;
    let h = Histogram::new(support, m).unwrap();
    let swapped = support_swap_to_discount(&h, 0.9, Horizon::Infinite);
    let plug_in = 0.9f64.powf(h.expectation());
    let jensen = (swapped - 0.8145).abs() < 1e-12 && (plug_in - 0.81).abs() < 1e-12;
    outcome(
        worst <= 1e-12 && jensen,
        format!("max |swap - enumeration| = {worst:.2e} on 2000 evaluations; E[0.9^D] = {swapped:.4} vs 0.9^E[D] = {plug_in:.4}"),
    )
}

// 6 ------------------------------------------------------------------------

fn random_points(n: usize, rng: &mut tapkit::Rng) -> Matrix {
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0))).collect();
    let mut d = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            d.set(i, j, ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt());
        }
    }
    d
}

fn c6_kmedoids() -> Outcome {
    let mut rng = tapkit::rng(6);
    let mut lost_forced = 0;
    let mut increases = 0;
    for _ in 0..100 {
        let n = rng.gen_range(4..=30);
        let k = rng.gen_range(1..n);
        let d = random_points(n, &mut rng);
        let forced = rng.gen_range(0..n);
        let r = kmedoids(&d, k, &[forced]);
        lost_forced += !r.medoids.contains(&forced) as usize;
        increases += r.cost_history.windows(2).filter(|w| w[1] > w[0] + 1e-12).count();
    }
    let mut matched = 0;
    let trials = 50;
    for _ in 0..trials {
        let d = random_points(12, &mut rng);
        let got = total_cost(&d, &kmedoids(&d, 3, &[]).medoids);
        let mut best = f64::INFINITY;
        for a in 0..12 {
            for b in a + 1..12 {
                for c in b + 1..12 {
                    best = best.min(total_cost(&d, &[a, b, c]));
                }
            }
        }
        matched += ((got - best).abs() <= 1e-9) as usize;
    }
    outcome(
        lost_forced == 0 && increases == 0 && matched == trials,
        format!(
            "forced member dropped {lost_forced}/100; cost increases {increases}; exhaustive optimum matched {matched}/{trials} (n=12, k=3)"
        ),
    )
}

// 7 ------------------------------------------------------------------------

fn c7_bound() -> Outcome {
    let cfg = BoundConfig { gamma: 0.9, eps_v: 1e-4, eps_gamma: 1e-4, trials: 50, ..BoundConfig::default() };
    let report = bound_check(&cfg).unwrap();
    let aligned = bound_check(&BoundConfig { aligned: true, seed: 1, ..cfg }).unwrap();
    let exact = bound_check(&BoundConfig { eps_v: 0.0, eps_gamma: 0.0, ..cfg }).unwrap();
    outcome(
        report.passed() && aligned.passed() && exact.max_error() <= 1e-9,
        format!(
            "random errors: {}; aligned errors: max ratio {:.4}; zero error: max {:.1e}",
            report.summary(),
            aligned.max_ratio(),
            exact.max_error()
        ),
    )
}

// 8 ------------------------------------------------------------------------

const C8_SEEDS: u64 = 20;
const C8_EPISODE_ONLY_SEEDS: u64 = 8;

fn c8_config(seed: u64, mixture: MixtureSpec) -> AgentConfig {
    AgentConfig { steps: 500_000, batch_size: 128, mixture, gated: true, eval_episodes: 20, seed, ..AgentConfig::default() }
}

fn c8_curriculum(seed: u64) -> Curriculum {
    Curriculum::standard(&TaskSpec::ssm(8, 8, 0.25, 1000 + seed), 1, 0).unwrap()
}

fn c8_feasibility_rejection() -> Outcome {
    let (mut e1, mut e2, mut gated, mut ungated, mut diff) = (vec![], vec![], vec![], vec![], vec![]);
    for seed in 0..C8_SEEDS {
        let curr = c8_curriculum(seed);
        let cfg = c8_config(seed, MixtureSpec::epg());
        let run = run_skipper(&curr, &cfg, Variant::Once).unwrap();
        let errors = run.log.last().unwrap().errors;
        e1.push(errors[1]);
        e2.push(errors[2]);
        // same estimators, same evaluation episodes; only the gate differs
        let mut freq = [0.0; 2];
        for (i, gate) in [true, false].into_iter().enumerate() {
            let c = AgentConfig { gated: gate, ..cfg.clone() };
            let (_, sel) = evaluate_skipper(&curr.train, &run.estimators, &c, Variant::Once, &mut tapkit::rng(77 + seed)).unwrap();
            let (g1, g2) = delusion_frequency(&sel);
            freq[i] = if sel.is_empty() { 0.0 } else { g1 + g2 };
        }
        gated.push(freq[0]);
        ungated.push(freq[1]);
        diff.push(freq[1] - freq[0]);
    }
    let mut episode_e2 = vec![];
    for seed in 0..C8_EPISODE_ONLY_SEEDS {
        let run = run_skipper(&c8_curriculum(seed), &c8_config(seed, MixtureSpec::episode_only()), Variant::Once).unwrap();
        episode_e2.push(run.log.last().unwrap().errors[2]);
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let (d_mean, d_half) = mean_ci95(&diff);
    let checks = [
        mean(&e1) <= 0.5,
        mean(&e2) <= 0.5,
        mean(&episode_e2) >= 5.0,
        mean(&gated) < 0.2 * mean(&ungated),
        d_mean - d_half > 0.0,
    ];
    outcome(
        checks.iter().all(|&c| c),
        format!(
            "EPG E1 {:.2} E2 {:.2} (<= 0.5); episode-only E2 {:.2} (>= 5, {} seeds); delusion gated {:.4} vs ungated {:.4}; \
             paired difference {:.4} +- {:.4}; checks {:?}",
            mean(&e1),
            mean(&e2),
            mean(&episode_e2),
            C8_EPISODE_ONLY_SEEDS,
            mean(&gated),
            mean(&ungated),
            d_mean,
            d_half,
            checks
        ),
    )
}

// 9 ------------------------------------------------------------------------

fn c9_dyna() -> Outcome {
    let err = |inject: f64, plus: bool| -> Vec<f64> {
        (0..20)
            .map(|seed| {
                let curr = Curriculum::standard(&TaskSpec::rds(6, 6, 0.25, seed), 1, 0).unwrap();
                let cfg = AgentConfig { steps: 50_000, inject_rate: inject, seed, ..AgentConfig::default() };
                let run = run_dyna(&curr, &cfg, plus).unwrap();
                q_error(&run.q, &curr.train[0], cfg.gamma)
            })
            .collect()
    };
    let (dyna, plus) = (err(0.1, false), err(0.1, true));
    let (dyna0, plus0) = (err(0.0, false), err(0.0, true));
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let paired_ok = dyna.iter().zip(&plus).filter(|(d, p)| **p <= 0.5 * **d).count();
    let p_clean = welch_t_test(&dyna0, &plus0);
    outcome(
        mean(&plus) <= 0.5 * mean(&dyna) && p_clean > 0.05,
        format!(
            "10% injection: Dyna+ {:.4} vs Dyna {:.4} (Dyna+ <= half in {paired_ok}/20 pairs); clean: {:.2e} vs {:.2e}, Welch p = {p_clean:.3}",
            mean(&plus),
            mean(&dyna),
            mean(&plus0),
            mean(&dyna0)
        ),
    )
}

// 10 -----------------------------------------------------------------------

/// Uniformly random behavior: every action is one π may take.
struct Uniform;

impl TargetPolicy for Uniform {
    fn action(&self, _: Code, _: Code) -> usize {
        0
    }

    fn admits(&self, _: Code, _: usize, _: Code) -> bool {
        true
    }
}

fn c10_reduction() -> Outcome {
    const TAU: usize = 8;
    let mut worst_learned: f64 = 0.0;
    let mut worst_truth: f64 = 0.0;
    let mut compared = 0;
    for seed in 0..4 {
        let task = Task::new(TaskSpec::ssm(6, 6, 0.25, seed)).unwrap();
        let mdp = &task.mdp;
        let n = mdp.n_states();
        let na = mdp.n_actions();
        let mut rng = tapkit::rng(seed);
        // a source holding the sword: itemless states are unreachable from it
        let sources: Vec<usize> = task.non_terminal_states().filter(|&s| task.state(s).has_sword).collect();
        let s0 = sources[rng.gen_range(0..sources.len())];
        let reach = task.reachability();
        let closure: Vec<usize> = (0..n).filter(|&s| s == s0 || reach.reachable(s0, s)).collect();
        let g0: Vec<usize> = closure.iter().copied().filter(|&s| s != s0).take(200).collect();
        let mut reduced: Vec<Code> = (0..4).map(|_| task.code_of(g0[rng.gen_range(0..g0.len())])).collect();
        reduced.sort_unstable();
        reduced.dedup();
        let mut mixed = reduced.clone();
        for _ in 0..3 {
            mixed.push(task.codec.twin(task.code_of(g0[rng.gen_range(0..g0.len())])));
        }
        let unreachable: Vec<usize> = (0..n).filter(|s| !closure.contains(s)).collect();
        for _ in 0..3 {
            mixed.push(task.code_of(unreachable[rng.gen_range(0..unreachable.len())]));
        }
        let sets = [mixed, reduced];
        let hit = |next: Code, g: Code| sets[g as usize].contains(&next);

        let mut table = FeasibilityTable::new(task.codec.total_codes(), 2, 16);
        let starts: Vec<usize> = task.non_terminal_states().collect();
        for _ in 0..20_000 {
            let mut s = starts[rng.gen_range(0..starts.len())];
            for _ in 0..30 {
                let a = rng.gen_range(0..na);
                let (next, reward) = mdp.sample(s, a, &mut rng);
                let tr = Transition {
                    state: task.code_of(s),
                    action: a as u8,
                    reward,
                    next: task.code_of(next),
                    terminal: mdp.is_terminal(next),
                };
                for g in 0..2 {
                    let pair = SourceTargetPair { transition: tr, task: 0, target: g, strategy: Strategy::Episode };
                    update_feasibility_with(&mut table, &pair, &Uniform, &hit, LearningRate::default());
                }
                if mdp.is_terminal(next) {
                    break;
                }
                s = next;
            }
        }

        let uniform = |_: usize| vec![1.0 / na as f64; na];
        let truth: Vec<Vec<f64>> = sets
            .iter()
            .map(|set| {
                let members: Vec<Option<usize>> = set.iter().map(|&c| task.decode(c)).collect();
                tau_feasibility_set(mdp, &uniform, &|x| members.contains(&Some(x)), TAU)
            })
            .collect();
        for &s in closure.iter().filter(|&&s| !mdp.is_terminal(s)) {
            let c = task.code_of(s);
            if table.visits(c, 0) == 0 {
                continue;
            }
            let learned = [0, 1].map(|g| table.tau_feasibility(c, g, TAU).unwrap());
            worst_learned = worst_learned.max((learned[0] - learned[1]).abs());
            worst_truth = worst_truth.max((truth[0][s] - truth[1][s]).abs());
            compared += 1;
        }
    }
    outcome(
        worst_learned <= 0.02 && worst_truth <= 1e-12 && compared > 0,
        format!(
            "max |F(mixed) - F(G0 part)| learned {worst_learned:.2e}, oracle {worst_truth:.2e} over {compared} sources (tau = {TAU})"
        ),
    )
}

// 11 -----------------------------------------------------------------------

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_tapkit");
    let cases: Vec<Vec<&str>> = vec![
        vec!["gen", "--env", "rds", "--size", "8", "8", "--difficulty", "0.4", "--seed", "3"],
        vec!["gen", "--env", "ssm", "--size", "6", "6", "--seed", "9"],
        vec!["solve", "--env", "rds", "--size", "6", "6", "--seed", "2"],
        vec!["solve", "--env", "ssm", "--size", "6", "6", "--seed", "4"],
        vec!["train", "--agent", "q", "--steps", "5000", "--seed", "1"],
        vec!["train", "--agent", "skipper-once", "--steps", "5000", "--seed", "2", "--gated", "true"],
        vec!["train", "--agent", "skipper-regen", "--env", "ssm", "--steps", "3000", "--seed", "3", "--relabel", "e"],
        vec!["train", "--agent", "dyna-plus", "--steps", "5000", "--seed", "4", "--inject-rate", "0.1"],
    ];
    let mut mismatched = vec![];
    for (i, args) in cases.iter().enumerate() {
        let outputs: Vec<(Vec<u8>, Vec<u8>)> = (0..2)
            .map(|rep| {
                let path = dir.path().join(format!("case{i}_{rep}.out"));
                let status = Command::new(bin).args(args).arg("--out").arg(&path).output().unwrap();
                assert!(status.status.success(), "{args:?}: {}", String::from_utf8_lossy(&status.stderr));
                (std::fs::read(&path).unwrap(), status.stdout)
            })
            .collect();
        if outputs[0] != outputs[1] || outputs[0].0.is_empty() {
            mismatched.push(args.join(" "));
        }
    }
    outcome(mismatched.is_empty(), format!("{} invocations repeated; differing: {:?}", cases.len(), mismatched))
}
