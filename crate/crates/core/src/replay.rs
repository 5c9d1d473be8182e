//! Trajectory replay and hindsight relabeling.

use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, Write};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::{Code, Error, Result, Rng};

/// ⟨s_t, a_t, r_{t+1}, s_{t+1}, ω_{t+1}⟩ with states as codes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Code,
    pub action: u8,
    pub reward: f64,
    pub next: Code,
    pub terminal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task: u32,
    pub episode: u64,
    pub transitions: Vec<Transition>,
}

impl Trajectory {
    /// Number of transitions, T_⊥.
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// s_t for t in 0..=T_⊥.
    pub fn state_at(&self, t: usize) -> Code {
        if t < self.transitions.len() {
            self.transitions[t].state
        } else {
            self.transitions[t - 1].next
        }
    }

    pub fn states(&self) -> impl Iterator<Item = Code> + '_ {
        (0..=self.len()).map(|t| self.state_at(t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Episode,
    Future,
    Pertask,
    Generate,
}

/// A replayed transition paired with the target it is relabeled toward.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceTargetPair {
    pub transition: Transition,
    pub task: u32,
    pub target: Code,
    pub strategy: Strategy,
}

/// Proportions over the atomic strategies plus a JIT generate probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureSpec {
    pub episode: f64,
    pub future: f64,
    pub pertask: f64,
    pub generate: f64,
}

impl MixtureSpec {
    /// Episode only.
    pub fn episode_only() -> Self {
        Self { episode: 1.0, future: 0.0, pertask: 0.0, generate: 0.0 }
    }

    /// Half episode, half generate.
    pub fn eg() -> Self {
        Self { generate: 0.5, ..Self::episode_only() }
    }

    /// Half episode, half pertask.
    pub fn ep() -> Self {
        Self { episode: 0.5, future: 0.0, pertask: 0.5, generate: 0.0 }
    }

    /// 2/3 episode + 1/3 pertask, with a 1/4 chance of generate.
    pub fn epg() -> Self {
        Self { episode: 2.0 / 3.0, future: 0.0, pertask: 1.0 / 3.0, generate: 0.25 }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "e" | "episode" => Ok(Self::episode_only()),
            "future" => Ok(Self { episode: 0.0, future: 1.0, ..Self::episode_only() }),
            "pertask" => Ok(Self { episode: 0.0, pertask: 1.0, ..Self::episode_only() }),
            "generate" => Ok(Self { generate: 1.0, ..Self::episode_only() }),
            "eg" | "feg" => Ok(Self::eg()),
            "ep" => Ok(Self::ep()),
            "epg" => Ok(Self::epg()),
            other => Err(Error::Usage(format!("unknown relabel mixture '{other}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.episode, self.future, self.pertask];
        let sum: f64 = parts.iter().sum();
        if parts.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 || !(0.0..=1.0).contains(&self.generate) {
            return Err(Error::Precondition("mixture proportions must be ≥0 and sum to 1".into()));
        }
        Ok(())
    }

    pub fn uses_generator(&self) -> bool {
        self.generate > 0.0
    }
}

/// Anything that can propose a target just in time for a source state.
pub trait TargetProposer {
    fn propose_target(&self, task: u32, source: Code, rng: &mut Rng) -> Result<Code>;
}

/// FIFO replay of whole episodes.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    episodes: VecDeque<Trajectory>,
    front_id: u64,
    index: VecDeque<(u64, u32)>,
    task_states: BTreeMap<u32, VecDeque<Code>>,
    /// Multiplicity of each code in `task_states`.
    task_counts: BTreeMap<u32, Vec<u32>>,
}

impl ReplayBuffer {
    pub const DEFAULT_CAPACITY: usize = 10_000;

    pub fn new(capacity_episodes: usize) -> Self {
        Self {
            capacity: capacity_episodes.max(1),
            episodes: VecDeque::new(),
            front_id: 0,
            index: VecDeque::new(),
            task_states: BTreeMap::new(),
            task_counts: BTreeMap::new(),
        }
    }

    /// Store an episode, evicting the oldest whole episodes beyond capacity.
    pub fn push(&mut self, traj: Trajectory) {
        if traj.is_empty() {
            return;
        }
        while self.episodes.len() >= self.capacity {
            self.evict_front();
        }
        let id = self.front_id + self.episodes.len() as u64;
        for t in 0..traj.len() {
            self.index.push_back((id, t as u32));
        }
        let counts = self.task_counts.entry(traj.task).or_default();
        for c in traj.states() {
            if counts.len() <= c as usize {
                counts.resize(c as usize + 1, 0);
            }
            counts[c as usize] += 1;
        }
        self.task_states.entry(traj.task).or_default().extend(traj.states());
        self.episodes.push_back(traj);
    }

    fn evict_front(&mut self) {
        let Some(old) = self.episodes.pop_front() else { return };
        self.index.drain(..old.len());
        if let Some(q) = self.task_states.get_mut(&old.task) {
            let counts = self.task_counts.get_mut(&old.task).expect("counts track states");
            for c in q.drain(..old.len() + 1) {
                counts[c as usize] -= 1;
            }
            if q.is_empty() {
                self.task_states.remove(&old.task);
                self.task_counts.remove(&old.task);
            }
        }
        self.front_id += 1;
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn n_episodes(&self) -> usize {
        self.episodes.len()
    }

    pub fn n_transitions(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn episodes(&self) -> impl Iterator<Item = &Trajectory> {
        self.episodes.iter()
    }

    /// Uniform transition; returns the episode and the step index.
    pub fn sample_transition(&self, rng: &mut Rng) -> Result<(&Trajectory, usize)> {
        if self.index.is_empty() {
            return Err(Error::EmptyReplay);
        }
        let (id, t) = self.index[rng.gen_range(0..self.index.len())];
        Ok((&self.episodes[(id - self.front_id) as usize], t as usize))
    }

    /// Stored states of one task (with multiplicity).
    pub fn task_states(&self, task: u32) -> Option<&VecDeque<Code>> {
        self.task_states.get(&task)
    }

    /// Per-code multiplicity of the stored states of one task.
    pub fn task_state_counts(&self, task: u32) -> Option<&[u32]> {
        self.task_counts.get(&task).map(Vec::as_slice)
    }

    pub fn sample_task_state(&self, task: u32, rng: &mut Rng) -> Result<Code> {
        let q = self.task_states.get(&task).ok_or(Error::EmptyTaskReplay(task))?;
        Ok(q[rng.gen_range(0..q.len())])
    }

    pub fn dump_jsonl(&self, mut w: impl Write) -> Result<()> {
        for e in &self.episodes {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn load_jsonl(r: impl BufRead, capacity: usize) -> Result<Self> {
        let mut buf = Self::new(capacity);
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            buf.push(serde_json::from_str(&line)?);
        }
        Ok(buf)
    }
}

/// Target s_{t'} with t' uniform over 0..=T_⊥ (t' = t allowed).
pub fn relabel_episode(traj: &Trajectory, t: usize, rng: &mut Rng) -> SourceTargetPair {
    let tp = rng.gen_range(0..=traj.len());
    SourceTargetPair { transition: traj.transitions[t], task: traj.task, target: traj.state_at(tp), strategy: Strategy::Episode }
}

/// Target s_{t'} with t' uniform over (t, T_⊥].
pub fn relabel_future(traj: &Trajectory, t: usize, rng: &mut Rng) -> Result<SourceTargetPair> {
    if t >= traj.len() {
        return Err(Error::NoFuture(t));
    }
    let tp = rng.gen_range(t + 1..=traj.len());
    Ok(SourceTargetPair { transition: traj.transitions[t], task: traj.task, target: traj.state_at(tp), strategy: Strategy::Future })
}

/// Target uniform over every state stored for the task.
pub fn relabel_pertask(
    replay: &ReplayBuffer,
    task: u32,
    transition: Transition,
    rng: &mut Rng,
) -> Result<SourceTargetPair> {
    let target = replay.sample_task_state(task, rng)?;
    Ok(SourceTargetPair { transition, task, target, strategy: Strategy::Pertask })
}

/// Target proposed just in time for the transition's source state.
pub fn relabel_generate(
    generator: &dyn TargetProposer,
    task: u32,
    transition: Transition,
    rng: &mut Rng,
) -> Result<SourceTargetPair> {
    let target = generator.propose_target(task, transition.state, rng)?;
    Ok(SourceTargetPair { transition, task, target, strategy: Strategy::Generate })
}

/// `n` relabeled pairs from uniformly sampled transitions.
pub fn sample_training_batch(
    replay: &ReplayBuffer,
    mixture: &MixtureSpec,
    generator: Option<&dyn TargetProposer>,
    n: usize,
    rng: &mut Rng,
) -> Result<Vec<SourceTargetPair>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(sample_pair(replay, mixture, generator, rng)?);
    }
    Ok(out)
}

pub fn sample_pair(
    replay: &ReplayBuffer,
    mixture: &MixtureSpec,
    generator: Option<&dyn TargetProposer>,
    rng: &mut Rng,
) -> Result<SourceTargetPair> {
    let (traj, t) = replay.sample_transition(rng)?;
    relabel_at(replay, mixture, generator, traj, t, rng)
}

/// Relabel transition `t` of `traj` by one draw from the mixture.
pub fn relabel_at(
    replay: &ReplayBuffer,
    mixture: &MixtureSpec,
    generator: Option<&dyn TargetProposer>,
    traj: &Trajectory,
    t: usize,
    rng: &mut Rng,
) -> Result<SourceTargetPair> {
    if mixture.generate > 0.0 && rng.gen_bool(mixture.generate) {
        let g = generator.ok_or_else(|| Error::Generator("mixture requests generate but no generator".into()))?;
        return relabel_generate(g, traj.task, traj.transitions[t], rng);
    }
    let u: f64 = rng.gen::<f64>() * (mixture.episode + mixture.future + mixture.pertask);
    if u < mixture.episode {
        Ok(relabel_episode(traj, t, rng))
    } else if u < mixture.episode + mixture.future {
        relabel_future(traj, t, rng).or_else(|_| Ok(relabel_episode(traj, t, rng)))
    } else {
        relabel_pertask(replay, traj.task, traj.transitions[t], rng)
    }
}
