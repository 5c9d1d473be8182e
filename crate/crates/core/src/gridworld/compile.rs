use std::collections::BTreeMap;

use super::{apply_action, generate_task, Cell, Dir, EnvState, GridLayout, StateCodec, TaskKind, TaskSpec};
use crate::dp::Reachability;
use crate::mdp::{Outcome, TabularMdp};
use crate::{Code, Result};

/// Which initial distribution the compiled MDP carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMode {
    /// Uniform over every non-terminal state, items held or not.
    Training,
    /// The layout's fixed spawn cells.
    Evaluation,
}

const NONE: u32 = u32::MAX;

/// A compiled task: layout, exact MDP and the code ↔ state maps.
#[derive(Clone, Debug)]
pub struct Task {
    pub spec: TaskSpec,
    pub layout: GridLayout,
    pub mdp: TabularMdp,
    pub codec: StateCodec,
    states: Vec<EnvState>,
    codes: Vec<Code>,
    lookup: Vec<u32>,
    dead: Option<usize>,
    goal_state: usize,
    eval_initial: Vec<f64>,
    reach: Reachability,
}

/// Compile with the training initial distribution.
pub fn compile_mdp(layout: &GridLayout, spec: &TaskSpec) -> TabularMdp {
    Task::from_layout(spec.clone(), layout.clone()).mdp
}

impl Task {
    pub fn new(spec: TaskSpec) -> Result<Self> {
        let layout = generate_task(&spec)?;
        Ok(Self::from_layout(spec, layout))
    }

    pub fn from_layout(spec: TaskSpec, layout: GridLayout) -> Self {
        let codec = StateCodec::for_spec(&spec);
        let mut states = Vec::new();
        for code in 0..codec.product_size() as Code {
            let (cell, facing, sit) = codec.parts(code).unwrap();
            if let Some(s) = valid_state(&layout, cell, facing, sit) {
                states.push(s);
            }
        }
        let mut codes: Vec<Code> = states.iter().map(|s| codec.encode(s)).collect();
        let dead = if layout.lava.is_empty() {
            None
        } else {
            let first = *layout.lava.iter().next().unwrap();
            states.push(EnvState { terminal: true, ..EnvState::at(first, None) });
            codes.push(codec.dead_code());
            Some(states.len() - 1)
        };
        let mut lookup = vec![NONE; codec.total_codes()];
        for (i, &c) in codes.iter().enumerate() {
            lookup[c as usize] = i as u32;
        }

        let n = states.len();
        let n_actions = spec.n_actions();
        let index_of = |s: &EnvState| -> usize {
            if layout.is_lava(s.pos) {
                dead.unwrap()
            } else {
                lookup[codec.encode(s) as usize] as usize
            }
        };
        let mut rows = Vec::with_capacity(n * n_actions);
        for s in &states {
            for a in 0..n_actions {
                if s.terminal {
                    rows.push(Vec::new());
                    continue;
                }
                let mut merged: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
                let eps = spec.action_noise;
                for b in 0..n_actions {
                    let w = if b == a { 1.0 - eps } else { 0.0 } + eps / n_actions as f64;
                    if w == 0.0 {
                        continue;
                    }
                    let (next, r) = apply_action(&layout, &spec, s, b);
                    let e = merged.entry(index_of(&next)).or_insert((0.0, r));
                    e.0 += w;
                }
                rows.push(merged.into_iter().map(|(next, (prob, reward))| Outcome { next, prob, reward }).collect());
            }
        }
        let terminal: Vec<bool> = states.iter().map(|s| s.terminal).collect();

        let train: Vec<bool> = states.iter().map(|s| !s.terminal).collect();
        let k = train.iter().filter(|&&b| b).count() as f64;
        let initial: Vec<f64> = train.iter().map(|&b| if b { 1.0 / k } else { 0.0 }).collect();

        let mut eval_initial = vec![0.0; n];
        for &c in &layout.spawn {
            let facing = spec.action_space.has_facing().then(|| inward(&layout, c));
            let i = lookup[codec.encode(&EnvState::at(c, facing)) as usize];
            eval_initial[i as usize] += 1.0 / layout.spawn.len() as f64;
        }

        let goal_state = {
            let goal_env = match spec.kind {
                TaskKind::Rds => EnvState {
                    terminal: true,
                    ..EnvState::at(layout.goal, spec.action_space.has_facing().then_some(Dir::Right))
                },
                TaskKind::Ssm => EnvState { has_sword: true, has_shield: true, terminal: true, ..EnvState::at(layout.goal, None) },
            };
            lookup[codec.encode(&goal_env) as usize] as usize
        };

        let mdp = TabularMdp::new(n, n_actions, rows, terminal, initial);
        let reach = Reachability::new(&mdp);
        Self { spec, layout, mdp, codec, states, codes, lookup, dead, goal_state, eval_initial, reach }
    }

    /// Same task with the chosen initial distribution.
    pub fn with_init(mut self, mode: InitMode) -> Self {
        if mode == InitMode::Evaluation {
            self.mdp.set_initial(self.eval_initial.clone());
        }
        self
    }

    pub fn eval_initial(&self) -> &[f64] {
        &self.eval_initial
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> &EnvState {
        &self.states[i]
    }

    pub fn states(&self) -> &[EnvState] {
        &self.states
    }

    pub fn code_of(&self, i: usize) -> Code {
        self.codes[i]
    }

    /// MDP state of a code, `None` for off-MDP encodings.
    pub fn decode(&self, code: Code) -> Option<usize> {
        match self.lookup.get(code as usize) {
            Some(&i) if i != NONE => Some(i as usize),
            _ => None,
        }
    }

    pub fn encode_state(&self, s: &EnvState) -> Code {
        if self.layout.is_lava(s.pos) && s.terminal {
            self.codec.dead_code()
        } else {
            self.codec.encode(s)
        }
    }

    pub fn index_of(&self, s: &EnvState) -> Option<usize> {
        self.decode(self.encode_state(s))
    }

    pub fn dead_state(&self) -> Option<usize> {
        self.dead
    }

    /// The rewarding terminal state.
    pub fn goal_state(&self) -> usize {
        self.goal_state
    }

    pub fn goal_code(&self) -> Code {
        self.codes[self.goal_state]
    }

    pub fn is_terminal(&self, i: usize) -> bool {
        self.states[i].terminal
    }

    pub fn non_terminal_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.states.len()).filter(|&i| !self.states[i].terminal)
    }

    pub fn reachability(&self) -> &Reachability {
        &self.reach
    }

    pub fn lava_cells(&self) -> Vec<Cell> {
        self.layout.lava.iter().copied().collect()
    }
}

fn valid_state(layout: &GridLayout, cell: Cell, facing: Option<Dir>, sit: usize) -> Option<EnvState> {
    if layout.is_lava(cell) {
        return None;
    }
    let has_sword = sit & 1 == 1;
    let has_shield = sit & 2 == 2;
    if layout.sword == Some(cell) && !has_sword || layout.shield == Some(cell) && !has_shield {
        return None;
    }
    let terminal = layout.is_terminal_cell(cell);
    if terminal && facing.is_some_and(|f| f != Dir::Right) {
        return None;
    }
    Some(EnvState { pos: cell, facing, has_sword, has_shield, terminal })
}

fn inward(layout: &GridLayout, c: Cell) -> Dir {
    if c.0 == 0 {
        Dir::Right
    } else if c.0 + 1 == layout.width {
        Dir::Left
    } else if c.1 == 0 {
        Dir::Down
    } else {
        Dir::Up
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{step, ActionSpace};

    #[test]
    fn six_by_six_abs_has_36_states() {
        let t = Task::new(TaskSpec::rds(6, 6, 0.0, 1)).unwrap();
        assert_eq!(t.n_states(), 36);
        assert!(t.dead_state().is_none());
    }

    #[test]
    fn rows_sum_to_one() {
        for (spec, eps) in [
            (TaskSpec::rds(6, 6, 0.3, 2).with_action_space(ActionSpace::TurnOrForward), 0.1),
            (TaskSpec::rds(6, 5, 0.3, 3).with_action_space(ActionSpace::TurnAndForward), 0.0),
            (TaskSpec::ssm(5, 5, 0.2, 4), 0.1),
        ] {
            let t = Task::new(spec.with_noise(eps)).unwrap();
            for s in 0..t.n_states() {
                for a in 0..t.mdp.n_actions() {
                    let row = t.mdp.outcomes(s, a);
                    if t.is_terminal(s) {
                        assert!(row.is_empty());
                    } else {
                        let total: f64 = row.iter().map(|o| o.prob).sum();
                        assert!((total - 1.0).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn noise_mixes_rows() {
        let t = Task::new(TaskSpec::rds(6, 6, 0.0, 1).with_noise(0.1)).unwrap();
        let s = t.index_of(&EnvState::at((2, 2), None)).unwrap();
        let right = t.index_of(&EnvState::at((3, 2), None)).unwrap();
        let row = t.mdp.outcomes(s, Dir::Right.index());
        let p = row.iter().find(|o| o.next == right).unwrap().prob;
        assert!((p - (0.9 + 0.025)).abs() < 1e-12);
        assert_eq!(row.len(), 4);
    }

    #[test]
    fn ssm_is_about_four_times_rds() {
        let ssm = Task::new(TaskSpec::ssm(4, 4, 0.0, 0)).unwrap();
        let n = ssm.n_states() as f64;
        assert!((n / 16.0 - 4.0).abs() < 0.5, "{n}");
    }

    #[test]
    fn step_agrees_with_compiled_rows() {
        let t = Task::new(TaskSpec::ssm(6, 6, 0.3, 9)).unwrap();
        let mut rng = crate::rng(0);
        for s in t.non_terminal_states().collect::<Vec<_>>() {
            for a in 0..4 {
                let (n, r, done) = step(&t.layout, &t.spec, t.state(s), a, &mut rng).unwrap();
                let o = t.mdp.outcomes(s, a);
                assert_eq!(o.len(), 1);
                assert_eq!(t.index_of(&n), Some(o[0].next));
                assert_eq!(r, o[0].reward);
                assert_eq!(done, t.is_terminal(o[0].next));
            }
        }
    }

    #[test]
    fn codes_round_trip() {
        let t = Task::new(TaskSpec::rds(6, 6, 0.3, 5).with_action_space(ActionSpace::TurnOrForward)).unwrap();
        for i in 0..t.n_states() {
            assert_eq!(t.decode(t.code_of(i)), Some(i));
        }
        let first_lava = t.lava_cells()[0];
        assert_eq!(t.decode(t.codec.with_parts(first_lava, Some(Dir::Up), 0)), None);
        assert_eq!(t.decode(t.codec.twin(t.code_of(0))), None);
    }
}
