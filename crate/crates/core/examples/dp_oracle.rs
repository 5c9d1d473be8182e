//! Ground truths on a small gridworld: policy evaluation two ways, value
//! iteration, pairwise distances and τ-feasibility under the optimal
//! goal-conditioned policy.

use tapkit::dp::{
    bellman_operator, default_horizon, optimal_goal_policy, pairwise_distance, pairwise_reward_discount,
    policy_evaluation_exact, policy_evaluation_iterative, sup_diff, tau_feasibility_true, value_iteration,
};
use tapkit::gridworld::{Task, TaskSpec};
use tapkit::mdp::{TabularMdp, TabularPolicy};

fn main() -> tapkit::Result<()> {
    let mut rng = tapkit::rng(11);

    // Exact (linear solve) and iterative evaluation agree on a random MDP.
    let mdp = TabularMdp::random(30, 3, 0.1, &mut rng);
    let policy = TabularPolicy::random(30, 3, &mut rng);
    let exact = policy_evaluation_exact(&mdp, &policy, 0.9)?;
    let iter = policy_evaluation_iterative(&mdp, &policy, 0.9, 1e-12)?;
    println!("random MDP, 30 states: |v_exact - v_iter|_inf = {:.2e}", sup_diff(&exact.v, &iter.v));

    // The Bellman operator contracts by at most γ.
    let a: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
    let b: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).cos() * 3.0).collect();
    let ratio = sup_diff(&bellman_operator(&mdp, &policy, 0.9, &a), &bellman_operator(&mdp, &policy, 0.9, &b)) / sup_diff(&a, &b);
    println!("contraction ratio {ratio:.4} <= 0.9");

    // On an empty 6x6 grid v*(s) = γ^(BFS(s) - 1).
    let task = Task::new(TaskSpec::rds(6, 6, 0.0, 0))?;
    let (v, greedy) = value_iteration(&task.mdp, 0.99, 1e-12);
    let s = task.eval_initial().iter().position(|&p| p > 0.0).unwrap();
    println!("6x6 empty grid: v*(spawn) = {:.6}, greedy action {}", v.v[s], greedy.action(s));

    // Goal-conditioned ground truths between every pair of states.
    let pol = optimal_goal_policy(&task.mdp, 0.95);
    let dist = pairwise_distance(&task.mdp, &pol, default_horizon(&task));
    let (reward, discount) = pairwise_reward_discount(&task.mdp, &pol, 0.99);
    let g = task.goal_state();
    println!(
        "spawn -> goal: distance {}, cumulative reward {:.4}, cumulative discount {:.4}",
        dist.get(s, g),
        reward.get(s, g),
        discount.get(s, g)
    );
    let d = dist.get(s, g) as usize;
    for tau in [d - 1, d] {
        println!("  p(D <= {tau}) = {}", tau_feasibility_true(&task.mdp, &pol, s, g, tau));
    }
    Ok(())
}
