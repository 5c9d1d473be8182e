//! Train the feasibility evaluator offline on a random-walk replay of a 4x4
//! SSM instance with two relabeling mixtures, then score E0/E1/E2 errors
//! against DP ground truth and query τ-feasibility.

use rand::Rng as _;
use tapkit::agents::Estimators;
use tapkit::dp::TargetClass;
use tapkit::experiments::{feasibility_errors, ErrorSample};
use tapkit::generator::{GeneratorConfig, TargetGenerator};
use tapkit::gridworld::{Task, TaskSpec};
use tapkit::replay::{sample_pair, MixtureSpec, ReplayBuffer, Trajectory, Transition};

fn random_replay(task: &Task, episodes: u64, rng: &mut tapkit::Rng) -> ReplayBuffer {
    let mut replay = ReplayBuffer::new(episodes as usize);
    for episode in 0..episodes {
        let mut s = task.mdp.sample_initial(rng);
        let mut transitions = Vec::new();
        for _ in 0..64 {
            let a = rng.gen_range(0..task.spec.n_actions());
            let (next, reward) = task.mdp.sample(s, a, rng);
            let terminal = task.is_terminal(next);
            transitions.push(Transition { state: task.code_of(s), action: a as u8, reward, next: task.code_of(next), terminal });
            s = next;
            if terminal {
                break;
            }
        }
        replay.push(Trajectory { task: 0, episode, transitions });
    }
    replay
}

fn main() -> tapkit::Result<()> {
    let tasks = vec![Task::new(TaskSpec::ssm(4, 4, 0.0, 1))?];
    let task = &tasks[0];
    let mut rng = tapkit::rng(4);
    let replay = random_replay(task, 2000, &mut rng);
    let sample = ErrorSample::draw(&tasks, 200, 0.95, &mut tapkit::rng(9));
    let generator = TargetGenerator::new(GeneratorConfig::default(), &tasks, Some(&replay));

    for (name, mix) in [("episode only", MixtureSpec::episode_only()), ("EPG", MixtureSpec::epg())] {
        let mut est = Estimators::new(&task.codec, task.spec.n_actions(), 0.99, 0.95);
        let mut rng = tapkit::rng(1);
        for _ in 0..400_000 {
            let pair = sample_pair(&replay, &mix, Some(&generator), &mut rng)?;
            est.train(&pair);
        }
        let [e0, e1, e2] = feasibility_errors(&est.evaluator, &sample).means();
        println!("{name:<12}  E0 {e0:5.2}  E1 {e1:5.2}  E2 {e2:5.2}  (mean |E[D] - truth| in bins)");

        let infeasible: Vec<_> = sample.pairs.iter().filter(|p| p.class != TargetClass::G0).collect();
        let accepted = infeasible.iter().filter(|p| est.evaluator.feasible(p.source, p.target, 0.5)).count();
        println!("              infeasible targets judged reachable: {accepted}/{}", infeasible.len());
        let p = &sample.pairs[0];
        println!("              p(D <= 4) for one reachable pair: {:.3}", est.evaluator.tau_feasibility(p.source, p.target, 4)?);
    }
    Ok(())
}
