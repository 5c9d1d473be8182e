use tapkit::agents::{
    q_error, run_agent, run_q_baseline, run_skipper, skipper_episode, AgentConfig, AgentKind, Curriculum, PlannerParts,
    Variant,
};
use tapkit::dp::optimal_goal_policy;
use tapkit::generator::{CandidateSource, GeneratorConfig, TargetGenerator};
use tapkit::gridworld::{Task, TaskSpec};
use tapkit::proxy::{OracleEdges, ProxyConfig};
use tapkit::Code;

fn single(spec: TaskSpec) -> Curriculum {
    Curriculum::single(Task::new(spec).unwrap())
}

#[test]
fn q_learning_converges_on_an_open_grid() {
    let curr = single(TaskSpec::rds(6, 6, 0.0, 0));
    let cfg = AgentConfig { steps: 200_000, seed: 1, ..AgentConfig::default() };
    let run = run_q_baseline(&curr, &cfg).unwrap();
    let err = q_error(&run.q, &curr.train[0], cfg.gamma);
    assert!(err <= 0.01, "max |Q - q*| = {err}");
    assert_eq!(run.log.last().unwrap().train_success, 1.0);
}

#[test]
fn planning_over_oracle_edges_reaches_the_goal() {
    for seed in 0..4 {
        let task = Task::new(TaskSpec::rds(8, 8, 0.35, seed)).unwrap();
        let goal_policy = optimal_goal_policy(&task.mdp, 0.95);
        let edges = OracleEdges::new(&task, &goal_policy, 0.99);
        let tasks = std::slice::from_ref(&task);
        let generator = TargetGenerator::new(
            GeneratorConfig { source: CandidateSource::FullEnumeration, ..GeneratorConfig::clean() },
            tasks,
            None,
        );
        let policy = |s: Code, g: Code| match (task.decode(s), task.decode(g)) {
            (Some(s), Some(g)) => goal_policy.actions[g * task.n_states() + s],
            _ => 0,
        };
        let parts = PlannerParts {
            edges: &edges,
            policy: &policy,
            generator: &generator,
            gate: None,
            proxy: ProxyConfig::default(),
            variant: Variant::Regen,
            replan_interval: 8,
        };
        let mut rng = tapkit::rng(seed);
        let start = task.eval_initial().iter().position(|&p| p > 0.0).unwrap();
        let ep = skipper_episode(&task, 0, start, &parts, 128, &mut rng).unwrap();
        assert!(ep.success, "seed {seed}: {} steps", ep.steps);
        assert!(!ep.selections.is_empty());
    }
}

#[test]
fn training_logs_are_deterministic() {
    let curr = single(TaskSpec::ssm(6, 6, 0.25, 2));
    let cfg = AgentConfig { steps: 3_000, eval_every: 1_000, eval_episodes: 2, error_pairs: 20, seed: 5, ..AgentConfig::default() };
    for kind in [AgentKind::Q, AgentKind::SkipperOnce, AgentKind::SkipperRegen, AgentKind::Dyna, AgentKind::DynaPlus] {
        let a = run_agent(kind, &curr, &cfg).unwrap().to_csv();
        let b = run_agent(kind, &curr, &cfg).unwrap().to_csv();
        assert_eq!(a, b, "{}", kind.name());
        assert_eq!(a.lines().count(), 4, "{}", kind.name());
    }
}

#[test]
fn skipper_learns_a_small_layout() {
    let curr = single(TaskSpec::rds(6, 6, 0.25, 0));
    let cfg = AgentConfig { steps: 60_000, eval_episodes: 10, error_pairs: 0, seed: 0, ..AgentConfig::default() };
    let run = run_skipper(&curr, &cfg, Variant::Once).unwrap();
    let success = run.log.last().unwrap().train_success;
    assert!(success >= 0.8, "success {success}");
}
