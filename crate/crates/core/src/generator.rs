//! Tabular checkpoint generator with hallucination injection.
//!
//! Proposals are experienced (or enumerated) states reachable from the
//! current state. Each proposal is independently replaced by an off-MDP
//! target (G1) or a valid but unreachable one (G2) at configured rates.

use rand::Rng as _;
use serde::Serialize;

use crate::dp::{classify_target, TargetClass};
use crate::gridworld::Task;
use crate::replay::{ReplayBuffer, TargetProposer};
use crate::{Code, Error, Result, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CandidateSource {
    Replay,
    FullEnumeration,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub g1_rate: f64,
    pub g2_rate: f64,
    pub source: CandidateSource,
    pub include_goal: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self { g1_rate: 0.03, g2_rate: 0.05, source: CandidateSource::Replay, include_goal: true }
    }
}

impl GeneratorConfig {
    pub fn clean() -> Self {
        Self { g1_rate: 0.0, g2_rate: 0.0, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Current,
    Experienced,
    InjectedG1,
    InjectedG2,
    Goal,
}

impl Provenance {
    /// The class this tag promises.
    pub fn expected_class(self) -> TargetClass {
        match self {
            Provenance::Current | Provenance::Experienced | Provenance::Goal => TargetClass::G0,
            Provenance::InjectedG1 => TargetClass::G1,
            Provenance::InjectedG2 => TargetClass::G2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Candidate {
    pub code: Code,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    /// Whether every tag agrees with the oracle classification from `current`.
    pub fn verify(&self, task: &Task, current: usize) -> bool {
        self.candidates.iter().all(|c| classify_target(task, current, c.code) == c.provenance.expected_class())
    }
}

/// Generator bound to a set of tasks (task id = index) and, optionally, a replay.
pub struct TargetGenerator<'a> {
    pub config: GeneratorConfig,
    tasks: &'a [Task],
    replay: Option<&'a ReplayBuffer>,
}

const TRIES: usize = 64;

impl<'a> TargetGenerator<'a> {
    pub fn new(config: GeneratorConfig, tasks: &'a [Task], replay: Option<&'a ReplayBuffer>) -> Self {
        Self { config, tasks, replay }
    }

    fn task(&self, id: u32) -> Result<&'a Task> {
        self.tasks.get(id as usize).ok_or_else(|| Error::Generator(format!("unknown task {id}")))
    }

    /// `n` candidates for an agent at `current`, plus the goal when configured.
    pub fn propose(&self, task_id: u32, current: Code, n: usize, rng: &mut Rng) -> Result<CandidateSet> {
        let task = self.task(task_id)?;
        let cur = task.decode(current).ok_or_else(|| Error::Generator("current state is off-MDP".into()))?;
        let mut candidates = Vec::with_capacity(n + 1);
        for _ in 0..n {
            candidates.push(self.one(task, task_id, cur, rng)?);
        }
        if self.config.include_goal {
            candidates.push(Candidate { code: task.goal_code(), provenance: Provenance::Goal });
        }
        Ok(CandidateSet { candidates })
    }

    fn one(&self, task: &Task, task_id: u32, cur: usize, rng: &mut Rng) -> Result<Candidate> {
        let u: f64 = rng.gen();
        if u < self.config.g1_rate {
            return self.inject_g1(task, task_id, cur, rng);
        }
        if u < self.config.g1_rate + self.config.g2_rate {
            return match self.sample_pool(task, task_id, rng, |s| s != cur && !task.reachability().reachable(cur, s))? {
                Some(s) => Ok(Candidate { code: task.code_of(s), provenance: Provenance::InjectedG2 }),
                None => self.inject_g1(task, task_id, cur, rng),
            };
        }
        let s = self.experienced(task, task_id, cur, rng)?;
        Ok(Candidate { code: task.code_of(s), provenance: Provenance::Experienced })
    }

    fn experienced(&self, task: &Task, task_id: u32, cur: usize, rng: &mut Rng) -> Result<usize> {
        let reach = task.reachability();
        Ok(self.sample_pool(task, task_id, rng, |s| s == cur || reach.reachable(cur, s))?.unwrap_or(cur))
    }

    fn inject_g1(&self, task: &Task, task_id: u32, cur: usize, rng: &mut Rng) -> Result<Candidate> {
        let base = task.state(self.experienced(task, task_id, cur, rng)?);
        let lava = &task.layout.lava;
        let code = if !lava.is_empty() && rng.gen_bool(0.5) {
            let cell = *lava.iter().nth(rng.gen_range(0..lava.len())).unwrap();
            task.codec.with_parts(cell, base.facing, base.situation())
        } else {
            task.codec.twin(task.codec.encode(base))
        };
        Ok(Candidate { code, provenance: Provenance::InjectedG1 })
    }

    /// Uniform draw from the candidate pool restricted to non-terminal states passing `keep`.
    fn sample_pool(
        &self,
        task: &Task,
        task_id: u32,
        rng: &mut Rng,
        keep: impl Fn(usize) -> bool,
    ) -> Result<Option<usize>> {
        let ok = |s: usize| !task.is_terminal(s) && keep(s);
        match self.config.source {
            CandidateSource::Replay => {
                let replay = self.replay.ok_or_else(|| Error::Generator("replay source without replay".into()))?;
                let pool = replay.task_states(task_id).ok_or_else(|| Error::Generator("empty replay".into()))?;
                for _ in 0..TRIES {
                    if let Some(s) = task.decode(pool[rng.gen_range(0..pool.len())]).filter(|&s| ok(s)) {
                        return Ok(Some(s));
                    }
                }
                let counts = replay.task_state_counts(task_id).unwrap_or(&[]);
                let hits: Vec<(usize, u32)> = counts
                    .iter()
                    .enumerate()
                    .filter(|&(_, &n)| n > 0)
                    .filter_map(|(c, &n)| task.decode(c as Code).filter(|&s| ok(s)).map(|s| (s, n)))
                    .collect();
                let total: u64 = hits.iter().map(|&(_, n)| n as u64).sum();
                if total == 0 {
                    return Ok(None);
                }
                let mut u = rng.gen_range(0..total);
                for &(s, n) in &hits {
                    if u < n as u64 {
                        return Ok(Some(s));
                    }
                    u -= n as u64;
                }
                unreachable!()
            }
            CandidateSource::FullEnumeration => {
                let n = task.n_states();
                for _ in 0..TRIES {
                    let s = rng.gen_range(0..n);
                    if ok(s) {
                        return Ok(Some(s));
                    }
                }
                let hits: Vec<usize> = (0..n).filter(|&s| ok(s)).collect();
                Ok((!hits.is_empty()).then(|| hits[rng.gen_range(0..hits.len())]))
            }
        }
    }
}

impl TargetProposer for TargetGenerator<'_> {
    fn propose_target(&self, task: u32, source: Code, rng: &mut Rng) -> Result<Code> {
        let t = self.task(task)?;
        let cur = t.decode(source).ok_or_else(|| Error::Generator("source is off-MDP".into()))?;
        Ok(self.one(t, task, cur, rng)?.code)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::TaskSpec;

    #[test]
    fn clean_rates_only_experienced() {
        let tasks = vec![Task::new(TaskSpec::rds(6, 6, 0.3, 1)).unwrap()];
        let g = TargetGenerator::new(
            GeneratorConfig { source: CandidateSource::FullEnumeration, ..GeneratorConfig::clean() },
            &tasks,
            None,
        );
        let mut rng = crate::rng(0);
        let cur = tasks[0].code_of(tasks[0].non_terminal_states().next().unwrap());
        let set = g.propose(0, cur, 32, &mut rng).unwrap();
        assert_eq!(set.candidates.len(), 33);
        assert!(set.candidates[..32].iter().all(|c| c.provenance == Provenance::Experienced));
        assert_eq!(set.candidates[32].code, tasks[0].goal_code());
    }

    #[test]
    fn ssm_start_situation_falls_back_to_g1() {
        let tasks = vec![Task::new(TaskSpec::ssm(6, 6, 0.2, 3)).unwrap()];
        let t = &tasks[0];
        let cfg = GeneratorConfig { g1_rate: 0.0, g2_rate: 1.0, source: CandidateSource::FullEnumeration, include_goal: false };
        let g = TargetGenerator::new(cfg, &tasks, None);
        let mut rng = crate::rng(1);
        let cur = t.non_terminal_states().find(|&s| t.state(s).situation() == 0).unwrap();
        let set = g.propose(0, t.code_of(cur), 50, &mut rng).unwrap();
        assert!(set.candidates.iter().all(|c| c.provenance == Provenance::InjectedG1));
        assert!(set.verify(t, cur));
        let later = t.non_terminal_states().find(|&s| t.state(s).situation() == 3).unwrap();
        let set = g.propose(0, t.code_of(later), 50, &mut rng).unwrap();
        assert!(set.candidates.iter().all(|c| c.provenance == Provenance::InjectedG2));
        assert!(set.verify(t, later));
    }
}
