use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{Cell, Dir, GridLayout, Orientation, TaskKind, TaskSpec};
use crate::{Error, Result, Rng};

/// How the path guarantee is enforced.
#[derive(Clone, Copy, Debug)]
pub struct LayoutOptions {
    pub max_resamples: usize,
    /// Carve a path through lava once resampling is exhausted.
    pub carve: bool,
}

impl Default for LayoutOptions {
    fn default() -> Self {
        Self { max_resamples: 64, carve: true }
    }
}

/// Deterministic layout for `spec` with the default resample-then-carve policy.
pub fn generate_task(spec: &TaskSpec) -> Result<GridLayout> {
    generate_task_with(spec, LayoutOptions::default())
}

pub fn generate_task_with(spec: &TaskSpec, opts: LayoutOptions) -> Result<GridLayout> {
    spec.validate()?;
    let mut rng = crate::rng(spec.seed);
    let mut last = None;
    for _ in 0..opts.max_resamples.max(1) {
        let layout = match spec.kind {
            TaskKind::Rds => sample_rds(spec, &mut rng),
            TaskKind::Ssm => sample_ssm(spec, &mut rng),
        };
        if path_guarantee_holds(&layout) {
            return Ok(fill_pockets(layout));
        }
        last = Some(layout);
    }
    if !opts.carve {
        return Err(Error::GenerationFailed { attempts: opts.max_resamples.max(1) });
    }
    let mut layout = last.expect("at least one sample");
    let start = layout.spawn[0];
    let targets: Vec<Cell> = match layout.monster {
        Some(m) => vec![layout.sword.unwrap(), layout.shield.unwrap(), m],
        None => vec![layout.goal],
    };
    for t in targets {
        carve(&mut layout, start, t, &mut rng);
    }
    debug_assert!(path_guarantee_holds(&layout));
    Ok(fill_pockets(layout))
}

fn sample_rds(spec: &TaskSpec, rng: &mut Rng) -> GridLayout {
    let (w, h) = (spec.width, spec.height);
    let orientation = spec
        .orientation
        .unwrap_or(if rng.gen_bool(0.5) { Orientation::LeftRight } else { Orientation::TopBottom });
    let (spawn, goal) = match orientation {
        Orientation::LeftRight => ((0, rng.gen_range(0..h)), (w - 1, rng.gen_range(0..h))),
        Orientation::TopBottom => ((rng.gen_range(0..w), 0), (rng.gen_range(0..w), h - 1)),
    };
    let mut lava = BTreeSet::new();
    for y in 0..h {
        for x in 0..w {
            let interior = match orientation {
                Orientation::LeftRight => x > 0 && x + 1 < w,
                Orientation::TopBottom => y > 0 && y + 1 < h,
            };
            if interior && rng.gen_bool(spec.difficulty) {
                lava.insert((x, y));
            }
        }
    }
    GridLayout { width: w, height: h, lava, goal, spawn: vec![spawn], sword: None, shield: None, monster: None }
}

fn sample_ssm(spec: &TaskSpec, rng: &mut Rng) -> GridLayout {
    let (w, h) = (spec.width, spec.height);
    let all: Vec<Cell> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).collect();
    let monster = *all.choose(rng).unwrap();
    let edge: Vec<Cell> =
        all.iter().copied().filter(|&(x, y)| x == 0 || y == 0 || x + 1 == w || y + 1 == h).collect();
    let far = edge.iter().map(|&c| manhattan(c, monster)).max().unwrap();
    let far_cells: Vec<Cell> = edge.into_iter().filter(|&c| manhattan(c, monster) == far).collect();
    let spawn = *far_cells.choose(rng).unwrap();
    let rest: Vec<Cell> = all.iter().copied().filter(|&c| c != monster && c != spawn).collect();
    let mut picks = rest.choose_multiple(rng, 2);
    let sword = *picks.next().unwrap();
    let shield = *picks.next().unwrap();
    let mut lava = BTreeSet::new();
    for &c in &all {
        if c != monster && c != spawn && c != sword && c != shield && rng.gen_bool(spec.difficulty) {
            lava.insert(c);
        }
    }
    GridLayout {
        width: w,
        height: h,
        lava,
        goal: monster,
        spawn: vec![spawn],
        sword: Some(sword),
        shield: Some(shield),
        monster: Some(monster),
    }
}

fn manhattan(a: Cell, b: Cell) -> usize {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1)
}

/// Cells reachable from `start` without entering lava or terminal cells.
pub(crate) fn open_component(layout: &GridLayout, start: Cell) -> BTreeSet<Cell> {
    let mut seen = BTreeSet::new();
    if layout.is_lava(start) || layout.is_terminal_cell(start) {
        return seen;
    }
    let mut queue = VecDeque::from([start]);
    seen.insert(start);
    while let Some(c) = queue.pop_front() {
        for d in Dir::ALL {
            if let Some(n) = layout.neighbor(c, d) {
                if !layout.is_lava(n) && !layout.is_terminal_cell(n) && seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
    }
    seen
}

fn touches(layout: &GridLayout, comp: &BTreeSet<Cell>, target: Cell) -> bool {
    Dir::ALL.iter().any(|&d| layout.neighbor(target, d).is_some_and(|n| comp.contains(&n)))
}

fn path_guarantee_holds(layout: &GridLayout) -> bool {
    let comp = open_component(layout, layout.spawn[0]);
    match layout.monster {
        Some(m) => {
            comp.contains(&layout.sword.unwrap()) && comp.contains(&layout.shield.unwrap()) && touches(layout, &comp, m)
        }
        None => touches(layout, &comp, layout.goal),
    }
}

/// Delete lava along a randomized shortest path from `from` to `to`.
fn carve(layout: &mut GridLayout, from: Cell, to: Cell, rng: &mut Rng) {
    let mut prev = vec![None; layout.width * layout.height];
    let idx = |c: Cell| c.1 * layout.width + c.0;
    let mut queue = VecDeque::from([from]);
    let mut seen = BTreeSet::from([from]);
    while let Some(c) = queue.pop_front() {
        if c == to {
            break;
        }
        let mut dirs = Dir::ALL;
        dirs.shuffle(rng);
        for d in dirs {
            if let Some(n) = layout.neighbor(c, d) {
                let blocked = n != to && layout.is_terminal_cell(n);
                if !blocked && seen.insert(n) {
                    prev[idx(n)] = Some(c);
                    queue.push_back(n);
                }
            }
        }
    }
    let mut c = to;
    while let Some(p) = prev[idx(c)] {
        layout.lava.remove(&c);
        c = p;
    }
}

/// Open cells cut off from the spawn become lava, so non-terminal cells form one component.
fn fill_pockets(mut layout: GridLayout) -> GridLayout {
    let comp = open_component(&layout, layout.spawn[0]);
    let cells: Vec<Cell> = layout.cells().collect();
    for c in cells {
        if !layout.is_lava(c) && !layout.is_terminal_cell(c) && !comp.contains(&c) {
            layout.lava.insert(c);
        }
    }
    layout
}
