use std::fmt::Write as _;

use rayon::prelude::*;

use super::metrics::mean_ci95;
use crate::agents::{run_agent, AgentConfig, AgentKind, Curriculum, TrainingLog, LOG_HEADER};
use crate::replay::MixtureSpec;
use crate::Result;

/// A seed × (agent, relabel) grid over one curriculum.
#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub agents: Vec<AgentKind>,
    pub relabels: Vec<String>,
    pub seeds: Vec<u64>,
    pub base: AgentConfig,
}

#[derive(Clone, Debug)]
pub struct SweepRun {
    pub agent: AgentKind,
    pub relabel: String,
    pub seed: u64,
    pub log: TrainingLog,
}

/// Run every cell in parallel; results come back in grid order.
pub fn sweep(curriculum: &Curriculum, spec: &SweepSpec) -> Result<Vec<SweepRun>> {
    let mut cells = Vec::new();
    for &agent in &spec.agents {
        for relabel in &spec.relabels {
            for &seed in &spec.seeds {
                cells.push((agent, relabel.clone(), seed));
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(agent, relabel, seed)| {
            let cfg = AgentConfig { mixture: MixtureSpec::parse(&relabel)?, seed, ..spec.base.clone() };
            let log = run_agent(agent, curriculum, &cfg)?;
            Ok(SweepRun { agent, relabel, seed, log })
        })
        .collect()
}

/// All log rows with `agent,relabel,seed` prefixed.
pub fn sweep_csv(runs: &[SweepRun]) -> String {
    let mut out = format!("agent,relabel,seed,{LOG_HEADER}\n");
    for run in runs {
        let body = run.log.to_csv();
        for line in body.lines().skip(1) {
            writeln!(out, "{},{},{},{line}", run.agent.name(), run.relabel, run.seed).unwrap();
        }
    }
    out
}

/// Mean and 95% half-width of each final-row column per (agent, relabel).
pub fn sweep_summary(runs: &[SweepRun]) -> String {
    let names: Vec<&str> = LOG_HEADER.split(',').skip(1).collect();
    let mut out = String::from("agent,relabel,n,column,mean,ci95\n");
    let mut groups: Vec<(AgentKind, String)> = Vec::new();
    for r in runs {
        if !groups.iter().any(|(a, l)| *a == r.agent && *l == r.relabel) {
            groups.push((r.agent, r.relabel.clone()));
        }
    }
    for (agent, relabel) in groups {
        let finals: Vec<[f64; 11]> = runs
            .iter()
            .filter(|r| r.agent == agent && r.relabel == relabel)
            .filter_map(|r| r.log.last().map(|row| row.values()))
            .collect();
        for (i, name) in names.iter().enumerate() {
            let xs: Vec<f64> = finals.iter().map(|v| v[i]).filter(|x| x.is_finite()).collect();
            if xs.is_empty() {
                continue;
            }
            let (m, h) = mean_ci95(&xs);
            writeln!(out, "{},{relabel},{},{name},{m:.6},{h:.6}", agent.name(), xs.len()).unwrap();
        }
    }
    out
}
