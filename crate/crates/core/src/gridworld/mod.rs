//! RDS (lava navigation) and SSM (sword, shield, monster) gridworlds.
//!
//! Coordinates are `(x, y)` with `y = 0` the top row.

mod codec;
mod compile;
mod generate;

pub use codec::StateCodec;
pub use compile::{compile_mdp, InitMode, Task};
pub use generate::{generate_task, generate_task_with, LayoutOptions};

use std::collections::BTreeSet;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Rng};

pub type Cell = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Rds,
    Ssm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionSpace {
    #[serde(rename = "tof")]
    TurnOrForward,
    #[serde(rename = "abs")]
    AbsoluteDirection,
    #[serde(rename = "taf")]
    TurnAndForward,
}

impl ActionSpace {
    pub fn n_actions(self) -> usize {
        match self {
            ActionSpace::TurnOrForward => 3,
            ActionSpace::AbsoluteDirection | ActionSpace::TurnAndForward => 4,
        }
    }

    /// Whether facing is part of the state.
    pub fn has_facing(self) -> bool {
        self != ActionSpace::AbsoluteDirection
    }
}

/// Which pair of opposite edges an RDS instance spans.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    LeftRight,
    TopBottom,
}

/// Facing, indexed clockwise from east.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dir {
    Right = 0,
    Down = 1,
    Left = 2,
    Up = 3,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::Right, Dir::Down, Dir::Left, Dir::Up];

    pub fn from_index(i: usize) -> Dir {
        Dir::ALL[i % 4]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn cw(self) -> Dir {
        Dir::from_index(self.index() + 1)
    }

    pub fn ccw(self) -> Dir {
        Dir::from_index(self.index() + 3)
    }

    pub fn delta(self) -> (isize, isize) {
        match self {
            Dir::Right => (1, 0),
            Dir::Down => (0, 1),
            Dir::Left => (-1, 0),
            Dir::Up => (0, -1),
        }
    }

    pub fn glyph(self) -> char {
        match self {
            Dir::Right => '>',
            Dir::Down => 'v',
            Dir::Left => '<',
            Dir::Up => '^',
        }
    }
}

/// Everything that determines a task instance.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub width: usize,
    pub height: usize,
    pub difficulty: f64,
    pub seed: u64,
    pub action_space: ActionSpace,
    pub action_noise: f64,
    /// RDS only; `None` draws it from the seed.
    pub orientation: Option<Orientation>,
}

impl TaskSpec {
    pub fn rds(width: usize, height: usize, difficulty: f64, seed: u64) -> Self {
        Self {
            kind: TaskKind::Rds,
            width,
            height,
            difficulty,
            seed,
            action_space: ActionSpace::AbsoluteDirection,
            action_noise: 0.0,
            orientation: None,
        }
    }

    pub fn ssm(width: usize, height: usize, difficulty: f64, seed: u64) -> Self {
        Self { kind: TaskKind::Ssm, ..Self::rds(width, height, difficulty, seed) }
    }

    pub fn with_action_space(mut self, a: ActionSpace) -> Self {
        self.action_space = a;
        self
    }

    pub fn with_noise(mut self, eps: f64) -> Self {
        self.action_noise = eps;
        self
    }

    pub fn with_orientation(mut self, o: Orientation) -> Self {
        self.orientation = Some(o);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.difficulty) {
            return Err(Error::InvalidSpec(format!("difficulty {} outside [0,1]", self.difficulty)));
        }
        if !(0.0..=1.0).contains(&self.action_noise) {
            return Err(Error::InvalidSpec(format!("action noise {} outside [0,1]", self.action_noise)));
        }
        if self.width < 4 || self.height < 4 {
            return Err(Error::InvalidSpec("width and height must be at least 4".into()));
        }
        if self.width > 64 || self.height > 64 {
            return Err(Error::InvalidSpec("width and height must be at most 64".into()));
        }
        if self.kind == TaskKind::Ssm && self.action_space != ActionSpace::AbsoluteDirection {
            return Err(Error::InvalidSpec("SSM supports only absolute-direction actions".into()));
        }
        Ok(())
    }

    pub fn n_actions(&self) -> usize {
        self.action_space.n_actions()
    }
}

/// Static contents of a grid. `spawn` is the fixed evaluation spawn; training
/// spawns are every non-terminal cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridLayout {
    pub width: usize,
    pub height: usize,
    pub lava: BTreeSet<Cell>,
    pub goal: Cell,
    pub spawn: Vec<Cell>,
    pub sword: Option<Cell>,
    pub shield: Option<Cell>,
    pub monster: Option<Cell>,
}

impl GridLayout {
    pub fn empty(width: usize, height: usize, goal: Cell) -> Self {
        Self {
            width,
            height,
            lava: BTreeSet::new(),
            goal,
            spawn: vec![(0, 0)],
            sword: None,
            shield: None,
            monster: None,
        }
    }

    pub fn is_lava(&self, c: Cell) -> bool {
        self.lava.contains(&c)
    }

    /// Cells where an episode ends on arrival (goal or monster; lava handled separately).
    pub fn is_terminal_cell(&self, c: Cell) -> bool {
        match self.monster {
            Some(m) => c == m,
            None => c == self.goal,
        }
    }

    pub fn neighbor(&self, c: Cell, d: Dir) -> Option<Cell> {
        let (dx, dy) = d.delta();
        let x = c.0 as isize + dx;
        let y = c.1 as isize + dy;
        if x < 0 || y < 0 || x >= self.width as isize || y >= self.height as isize {
            None
        } else {
            Some((x as usize, y as usize))
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| (x, y)))
    }
}

/// Agent configuration within a layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EnvState {
    pub pos: Cell,
    pub facing: Option<Dir>,
    pub has_sword: bool,
    pub has_shield: bool,
    pub terminal: bool,
}

impl EnvState {
    pub fn at(pos: Cell, facing: Option<Dir>) -> Self {
        Self { pos, facing, has_sword: false, has_shield: false, terminal: false }
    }

    /// Situation index `sword + 2·shield`.
    pub fn situation(&self) -> usize {
        self.has_sword as usize | (self.has_shield as usize) << 1
    }
}

/// Deterministic effect of an action (no noise).
pub fn apply_action(layout: &GridLayout, spec: &TaskSpec, state: &EnvState, action: usize) -> (EnvState, f64) {
    let mut next = *state;
    let move_dir = match spec.action_space {
        ActionSpace::AbsoluteDirection => Some(Dir::from_index(action)),
        ActionSpace::TurnOrForward => {
            let f = state.facing.unwrap_or(Dir::Right);
            match action {
                0 => {
                    next.facing = Some(f.ccw());
                    None
                }
                1 => {
                    next.facing = Some(f.cw());
                    None
                }
                _ => Some(f),
            }
        }
        ActionSpace::TurnAndForward => {
            let f = state.facing.unwrap_or(Dir::Right);
            let nf = match action {
                0 => f,
                1 => f.ccw(),
                2 => f.cw(),
                _ => f.cw().cw(),
            };
            next.facing = Some(nf);
            Some(nf)
        }
    };
    let Some(d) = move_dir else { return (next, 0.0) };
    let Some(cell) = layout.neighbor(state.pos, d) else { return (next, 0.0) };
    next.pos = cell;
    if layout.is_lava(cell) {
        next.terminal = true;
        return (next, 0.0);
    }
    if layout.is_terminal_cell(cell) {
        next.terminal = true;
        if next.facing.is_some() {
            next.facing = Some(Dir::Right);
        }
        let reward = match spec.kind {
            TaskKind::Rds => 1.0,
            TaskKind::Ssm if state.has_sword && state.has_shield => 1.0,
            TaskKind::Ssm => 0.0,
        };
        return (next, reward);
    }
    if Some(cell) == layout.sword {
        next.has_sword = true;
    }
    if Some(cell) == layout.shield {
        next.has_shield = true;
    }
    (next, 0.0)
}

/// One environment step; with probability ε_act the action is replaced uniformly at random.
pub fn step(
    layout: &GridLayout,
    spec: &TaskSpec,
    state: &EnvState,
    action: usize,
    rng: &mut Rng,
) -> Result<(EnvState, f64, bool)> {
    if state.terminal {
        return Err(Error::StepOnTerminal);
    }
    let mut a = action;
    if spec.action_noise > 0.0 && rng.gen_bool(spec.action_noise) {
        a = rng.gen_range(0..spec.n_actions());
    }
    let (next, r) = apply_action(layout, spec, state, a);
    Ok((next, r, next.terminal))
}

/// One character per cell, rows separated by `\n`. The agent glyph wins over cell contents.
pub fn render_ascii(layout: &GridLayout, state: Option<&EnvState>) -> String {
    let mut rows = Vec::with_capacity(layout.height);
    for y in 0..layout.height {
        let mut row = String::with_capacity(layout.width);
        for x in 0..layout.width {
            let c = (x, y);
            let ch = match state {
                Some(s) if s.pos == c => s.facing.map_or('A', Dir::glyph),
                _ if layout.is_lava(c) => 'L',
                _ if layout.monster == Some(c) => 'M',
                _ if layout.sword == Some(c) => 'S',
                _ if layout.shield == Some(c) => 'H',
                _ if layout.monster.is_none() && layout.goal == c => 'G',
                _ => '.',
            };
            row.push(ch);
        }
        rows.push(row);
    }
    rows.join("\n")
}

/// On-disk form of a task: spec fields plus layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvJson {
    pub kind: TaskKind,
    pub width: usize,
    pub height: usize,
    pub difficulty: f64,
    pub seed: u64,
    pub action_space: ActionSpace,
    pub action_noise: f64,
    pub lava: Vec<[usize; 2]>,
    pub goal: [usize; 2],
    pub spawn: Vec<[usize; 2]>,
    pub sword: Option<[usize; 2]>,
    pub shield: Option<[usize; 2]>,
    pub monster: Option<[usize; 2]>,
}

fn arr(c: Cell) -> [usize; 2] {
    [c.0, c.1]
}

fn cell(a: [usize; 2]) -> Cell {
    (a[0], a[1])
}

impl EnvJson {
    pub fn new(spec: &TaskSpec, layout: &GridLayout) -> Self {
        Self {
            kind: spec.kind,
            width: spec.width,
            height: spec.height,
            difficulty: spec.difficulty,
            seed: spec.seed,
            action_space: spec.action_space,
            action_noise: spec.action_noise,
            lava: layout.lava.iter().copied().map(arr).collect(),
            goal: arr(layout.goal),
            spawn: layout.spawn.iter().copied().map(arr).collect(),
            sword: layout.sword.map(arr),
            shield: layout.shield.map(arr),
            monster: layout.monster.map(arr),
        }
    }

    pub fn into_parts(self) -> (TaskSpec, GridLayout) {
        let spec = TaskSpec {
            kind: self.kind,
            width: self.width,
            height: self.height,
            difficulty: self.difficulty,
            seed: self.seed,
            action_space: self.action_space,
            action_noise: self.action_noise,
            orientation: None,
        };
        let layout = GridLayout {
            width: self.width,
            height: self.height,
            lava: self.lava.into_iter().map(cell).collect(),
            goal: cell(self.goal),
            spawn: self.spawn.into_iter().map(cell).collect(),
            sword: self.sword.map(cell),
            shield: self.shield.map(cell),
            monster: self.monster.map(cell),
        };
        (spec, layout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_examples() {
        let mut l = GridLayout::empty(2, 2, (1, 1));
        l.goal = (5, 5);
        assert_eq!(render_ascii(&l, None), "..\n..");
        let l = GridLayout::empty(2, 2, (1, 1));
        assert_eq!(render_ascii(&l, None), "..\n.G");
        let s = EnvState::at((1, 1), Some(Dir::Up));
        assert_eq!(render_ascii(&l, Some(&s)), "..\n.^");
        let s = EnvState::at((1, 1), None);
        assert_eq!(render_ascii(&l, Some(&s)), "..\n.A");
    }

    #[test]
    fn turn_actions_keep_position() {
        let l = GridLayout::empty(4, 4, (3, 3));
        let spec = TaskSpec::rds(4, 4, 0.0, 0).with_action_space(ActionSpace::TurnOrForward);
        let s = EnvState::at((1, 1), Some(Dir::Right));
        let (n, _) = apply_action(&l, &spec, &s, 0);
        assert_eq!((n.pos, n.facing), ((1, 1), Some(Dir::Up)));
        let (n, _) = apply_action(&l, &spec, &s, 1);
        assert_eq!(n.facing, Some(Dir::Down));
        let (n, _) = apply_action(&l, &spec, &s, 2);
        assert_eq!(n.pos, (2, 1));
    }

    #[test]
    fn turn_and_forward_moves() {
        let l = GridLayout::empty(4, 4, (3, 3));
        let spec = TaskSpec::rds(4, 4, 0.0, 0).with_action_space(ActionSpace::TurnAndForward);
        let s = EnvState::at((1, 1), Some(Dir::Right));
        assert_eq!(apply_action(&l, &spec, &s, 3).0.pos, (0, 1));
        assert_eq!(apply_action(&l, &spec, &s, 1).0.pos, (1, 0));
    }

    #[test]
    fn walls_block() {
        let l = GridLayout::empty(4, 4, (3, 3));
        let spec = TaskSpec::rds(4, 4, 0.0, 0);
        let s = EnvState::at((0, 0), None);
        assert_eq!(apply_action(&l, &spec, &s, Dir::Up.index()).0, s);
    }
}
