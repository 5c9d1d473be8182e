//! Dyna-Q with a model that hallucinates successors, with and without the
//! feasibility check that rejects simulated transitions judged unreachable in
//! one step.

use tapkit::agents::{q_error, run_dyna, AgentConfig, Curriculum};
use tapkit::gridworld::TaskSpec;

fn main() -> tapkit::Result<()> {
    let curr = Curriculum::standard(&TaskSpec::rds(6, 6, 0.25, 8), 1, 0)?;
    let task = &curr.train[0];
    for inject in [0.0, 0.1] {
        for plus in [false, true] {
            let cfg = AgentConfig { steps: 50_000, inject_rate: inject, seed: 1, ..AgentConfig::default() };
            let run = run_dyna(&curr, &cfg, plus)?;
            println!(
                "inject {:>3.0}%  {:<5}  max|Q - q*| = {:.4}  simulated {}  hallucinated {}  rejected {} ({} hallucinated)",
                inject * 100.0,
                if plus { "Dyna+" } else { "Dyna" },
                q_error(&run.q, task, cfg.gamma),
                run.simulated,
                run.injected,
                run.rejected,
                run.rejected_injected
            );
        }
    }
    Ok(())
}
