//! Fill a replay with random-walk episodes on an SSM instance, relabel with
//! each strategy and count which target classes each one exposes.

use std::collections::BTreeMap;

use rand::Rng as _;
use tapkit::dp::classify_target;
use tapkit::generator::{GeneratorConfig, TargetGenerator};
use tapkit::gridworld::{Task, TaskSpec};
use tapkit::replay::{sample_training_batch, MixtureSpec, ReplayBuffer, Trajectory, Transition};

fn main() -> tapkit::Result<()> {
    let tasks = vec![Task::new(TaskSpec::ssm(6, 6, 0.2, 5))?];
    let task = &tasks[0];
    let mut rng = tapkit::rng(2);
    let mut replay = ReplayBuffer::new(500);
    for episode in 0..200 {
        let mut s = task.mdp.sample_initial(&mut rng);
        let mut transitions = Vec::new();
        for _ in 0..40 {
            let a = rng.gen_range(0..task.spec.n_actions());
            let (next, reward) = task.mdp.sample(s, a, &mut rng);
            let terminal = task.is_terminal(next);
            transitions.push(Transition { state: task.code_of(s), action: a as u8, reward, next: task.code_of(next), terminal });
            s = next;
            if terminal {
                break;
            }
        }
        replay.push(Trajectory { task: 0, episode, transitions });
    }
    println!("replay: {} episodes, {} transitions", replay.n_episodes(), replay.n_transitions());

    let generator = TargetGenerator::new(GeneratorConfig::default(), &tasks, Some(&replay));
    let mixtures = [
        ("episode", MixtureSpec::episode_only()),
        ("future", MixtureSpec::parse("future")?),
        ("pertask", MixtureSpec::parse("pertask")?),
        ("generate", MixtureSpec::parse("generate")?),
        ("EPG", MixtureSpec::epg()),
    ];
    println!("{:<9} {:>6} {:>6} {:>6}", "strategy", "G0", "G1", "G2");
    for (name, mix) in mixtures {
        let batch = sample_training_batch(&replay, &mix, Some(&generator), 4000, &mut rng)?;
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for p in &batch {
            let source = task.decode(p.transition.state).expect("sources are real states");
            *counts.entry(classify_target(task, source, p.target).name()).or_default() += 1;
        }
        let pct = |k: &str| 100.0 * *counts.get(k).unwrap_or(&0) as f64 / batch.len() as f64;
        println!("{name:<9} {:>5.1}% {:>5.1}% {:>5.1}%", pct("G0"), pct("G1"), pct("G2"));
    }
    Ok(())
}
