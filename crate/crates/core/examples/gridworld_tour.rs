//! Generate RDS and SSM instances, render them, step the dynamics and
//! inspect the compiled tabular MDP.

use tapkit::dp::{classify_target, value_iteration, TargetClass};
use tapkit::gridworld::{render_ascii, ActionSpace, EnvJson, Task, TaskSpec};

fn main() -> tapkit::Result<()> {
    let rds = Task::new(TaskSpec::rds(6, 6, 0.35, 7))?;
    println!("RDS 6x6, difficulty 0.35, seed 7");
    println!("{}", render_ascii(&rds.layout, None));
    println!(
        "{} states ({} terminal), {} actions, lava cells: {}",
        rds.n_states(),
        (0..rds.n_states()).filter(|&s| rds.is_terminal(s)).count(),
        rds.spec.n_actions(),
        rds.lava_cells().len()
    );

    // Roll out the optimal policy from the evaluation spawn; cells are (x, y).
    let (_, policy) = value_iteration(&rds.mdp, 0.99, 1e-12);
    let mut rng = tapkit::rng(0);
    let mut s = rds.eval_initial().iter().position(|&p| p > 0.0).expect("spawn exists");
    let mut path = vec![rds.state(s).pos];
    let mut reward = 0.0;
    while !rds.is_terminal(s) && path.len() < 40 {
        let (next, r) = rds.mdp.sample(s, policy.action(s), &mut rng);
        s = next;
        reward = r;
        path.push(rds.state(s).pos);
    }
    println!("optimal rollout: {path:?}, final reward {reward}");

    let ssm = Task::new(TaskSpec::ssm(6, 6, 0.2, 3).with_action_space(ActionSpace::AbsoluteDirection))?;
    println!("\nSSM 6x6: sword and shield must be collected before the monster");
    println!("{}", render_ascii(&ssm.layout, None));
    println!("codec: {} product codes, {} codes including twins and the dead sink", ssm.codec.product_size(), ssm.codec.total_codes());

    // Target classes from a late-situation source.
    let late = ssm.non_terminal_states().find(|&s| ssm.state(s).situation() == 3).expect("holding both items");
    let early = ssm.non_terminal_states().find(|&s| ssm.state(s).situation() == 0).expect("empty-handed");
    let twin = ssm.codec.twin(ssm.code_of(early));
    for (label, code) in [("itself", ssm.code_of(late)), ("empty-handed state", ssm.code_of(early)), ("off-grid twin", twin)] {
        let class = classify_target(&ssm, late, code);
        println!("  from a state holding both items, target {label:<19} is {}", class.name());
        debug_assert!(class != TargetClass::G0 || label == "itself");
    }

    let json = serde_json::to_string(&EnvJson::new(&ssm.spec, &ssm.layout))?;
    println!("\nlayout JSON is {} bytes; first 80: {}", json.len(), &json[..80.min(json.len())]);
    Ok(())
}
