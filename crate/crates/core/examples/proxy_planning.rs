//! Build a checkpoint graph from exact edge annotations, solve it with SMDP
//! value iteration and follow the hop-by-hop plan to the goal.

use tapkit::agents::{skipper_episode, PlannerParts, Variant};
use tapkit::dp::optimal_goal_policy;
use tapkit::generator::{CandidateSource, GeneratorConfig, TargetGenerator};
use tapkit::gridworld::{render_ascii, Task, TaskSpec};
use tapkit::proxy::{build_proxy, smdp_value_iteration, OracleEdges, ProxyConfig, Sweeps};
use tapkit::Code;

fn main() -> tapkit::Result<()> {
    let tasks = vec![Task::new(TaskSpec::rds(8, 8, 0.3, 21))?];
    let task = &tasks[0];
    println!("{}", render_ascii(&task.layout, None));

    let goal_policy = optimal_goal_policy(&task.mdp, 0.95);
    let edges = OracleEdges::new(task, &goal_policy, 0.99);
    let generator = TargetGenerator::new(
        GeneratorConfig { source: CandidateSource::FullEnumeration, ..GeneratorConfig::clean() },
        &tasks,
        None,
    );
    let cfg = ProxyConfig::default();
    let mut rng = tapkit::rng(3);
    let start = task.eval_initial().iter().position(|&p| p > 0.0).unwrap();

    let proxy = build_proxy(0, task.code_of(start), &generator, &edges, None, &cfg, &mut rng)?;
    let usable = (0..proxy.len()).flat_map(|i| (0..proxy.len()).map(move |j| (i, j))).filter(|&(i, j)| proxy.usable(i, j)).count();
    println!("{} checkpoints after k-medoids (k = {}), {usable} edges within {} steps", proxy.len(), cfg.k, cfg.threshold);

    let plan = smdp_value_iteration(&proxy, Sweeps::Fixed(5))?;
    for (j, v) in proxy.vertices.iter().enumerate() {
        let pos = task.decode(v.code).map(|s| task.state(s).pos);
        let mark = if j == plan.selected { "  <- first hop" } else { "" };
        println!("  {j:>2} {:<12} {pos:?} V = {:.4}{mark}", format!("{:?}", v.provenance), plan.values[j]);
    }

    let policy = |s: Code, g: Code| match (task.decode(s), task.decode(g)) {
        (Some(i), Some(j)) => goal_policy.actions[j * goal_policy.n_states + i],
        _ => 0,
    };
    let parts = PlannerParts {
        edges: &edges,
        policy: &policy,
        generator: &generator,
        gate: None,
        proxy: cfg,
        variant: Variant::Once,
        replan_interval: 8,
    };
    let ep = skipper_episode(task, 0, start, &parts, 256, &mut rng)?;
    println!("hopping with exact edges: success = {}, {} steps, {} checkpoint selections", ep.success, ep.steps, ep.selections.len());
    Ok(())
}
