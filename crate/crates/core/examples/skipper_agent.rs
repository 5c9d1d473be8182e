//! Train the checkpoint-planning agent on an RDS instance and evaluate it
//! zero-shot on other layouts; the log is the same CSV the CLI writes.
//!
//! Tables are keyed by layout-free state codes, so several training layouts
//! would share (and corrupt) entries; one instance is the tabular setting.

use tapkit::agents::{run_skipper, AgentConfig, Curriculum, Variant};
use tapkit::experiments::plot_svg;
use tapkit::gridworld::TaskSpec;

fn main() -> tapkit::Result<()> {
    let curr = Curriculum::standard(&TaskSpec::rds(8, 8, 0.4, 0), 1, 5)?;
    let cfg = AgentConfig { steps: 150_000, eval_every: 30_000, eval_episodes: 5, gated: true, ..AgentConfig::default() };
    let t = std::time::Instant::now();
    let run = run_skipper(&curr, &cfg, Variant::Once)?;
    print!("{}", run.log.to_csv());
    println!("trained in {:.1}s; {} checkpoint selections during training", t.elapsed().as_secs_f64(), run.train_selections.len());

    let path = std::env::temp_dir().join("skipper_log.svg");
    std::fs::write(&path, plot_svg(&run.log, "skipper on 8x8 RDS"))?;
    println!("learning curves: {}", path.display());
    Ok(())
}
