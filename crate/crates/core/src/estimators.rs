//! Tabular goal-conditioned estimators: cumulative reward V̂, distance D̂,
//! the state-level feasibility evaluator and the intrinsic-reward Q.
//!
//! Tables are keyed by codes so they are shared across instances of the same
//! size and kind. Rows are allocated on first write; unvisited entries read as
//! the prior, or through the codec's back-off alias when one is configured.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng as _;

use crate::distributional::{discount_of, expectation_of, mix_into, shift_into, two_hot_into, Histogram, Horizon, Support};
use crate::gridworld::StateCodec;
use crate::mdp::argmax;
use crate::replay::SourceTargetPair;
use crate::{Code, Error, Result, Rng};

pub const DEFAULT_BINS: usize = 16;

/// α_k = max(base, 1/√k) for the k-th update of an entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearningRate {
    pub base: f64,
}

impl Default for LearningRate {
    fn default() -> Self {
        Self { base: 0.1 }
    }
}

impl LearningRate {
    pub fn at(&self, k: u32) -> f64 {
        (1.0 / (k.max(1) as f64).sqrt()).max(self.base)
    }
}

/// Fixed α regardless of visit count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantRate(pub f64);

/// Step-size rule keyed by visit count.
pub trait StepSize: Copy {
    fn alpha(&self, k: u32) -> f64;
}

impl StepSize for LearningRate {
    fn alpha(&self, k: u32) -> f64 {
        self.at(k)
    }
}

impl StepSize for ConstantRate {
    fn alpha(&self, _k: u32) -> f64 {
        self.0
    }
}

/// Target policy used inside bootstraps.
pub trait TargetPolicy {
    fn action(&self, state: Code, target: Code) -> usize;

    /// Whether `action` is one π may take at `state`; evaluator updates use
    /// only such transitions.
    fn admits(&self, state: Code, action: usize, target: Code) -> bool {
        self.action(state, target) == action
    }
}

impl<F: Fn(Code, Code) -> usize> TargetPolicy for F {
    fn action(&self, state: Code, target: Code) -> usize {
        self(state, target)
    }
}

/// Target-hit indicator h.
pub trait HitTest {
    fn hit(&self, next: Code, target: Code) -> bool;
}

/// Exact encoding equality.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactHit;

impl HitTest for ExactHit {
    fn hit(&self, next: Code, target: Code) -> bool {
        next == target
    }
}

impl<F: Fn(Code, Code) -> bool> HitTest for F {
    fn hit(&self, next: Code, target: Code) -> bool {
        self(next, target)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupportKind {
    Value,
    Distance,
}

impl SupportKind {
    pub fn name(self) -> &'static str {
        match self {
            SupportKind::Value => "value",
            SupportKind::Distance => "distance",
        }
    }
}

/// Lazily allocated `rows × cols × slots × bins` histogram store.
#[derive(Clone, Debug)]
struct HistStore {
    cols: usize,
    slots: usize,
    bins: usize,
    data: Vec<Option<Box<[f64]>>>,
    visits: Vec<u32>,
    prior: Vec<f64>,
}

impl HistStore {
    fn new(rows: usize, cols: usize, slots: usize, prior: Vec<f64>) -> Self {
        let bins = prior.len();
        Self { cols, slots, bins, data: vec![None; rows], visits: vec![0; rows * cols * slots], prior }
    }

    fn key(&self, row: usize, col: usize, slot: usize) -> usize {
        (row * self.cols + col) * self.slots + slot
    }

    fn visits(&self, row: usize, col: usize, slot: usize) -> u32 {
        if row >= self.data.len() || col >= self.cols {
            return 0;
        }
        self.visits[self.key(row, col, slot)]
    }

    fn supported(&self, row: usize, col: usize, min: u32) -> Option<&[f64]> {
        if self.visits(row, col, 0) < min {
            return None;
        }
        self.own(row, col, 0)
    }

    fn own(&self, row: usize, col: usize, slot: usize) -> Option<&[f64]> {
        if self.visits(row, col, slot) == 0 {
            return None;
        }
        let block = self.data[row].as_ref()?;
        let off = (col * self.slots + slot) * self.bins;
        Some(&block[off..off + self.bins])
    }

    fn read(&self, row: usize, col: usize, slot: usize, backoff: Option<(&StateCodec, Code)>) -> &[f64] {
        if let Some(m) = self.own(row, col, slot) {
            return m;
        }
        if let Some((codec, source)) = backoff {
            if let Some(alias) = codec.fuse(source, col as Code) {
                if let Some(m) = self.own(row, alias as usize, slot) {
                    return m;
                }
            }
        }
        &self.prior
    }

    /// Mix the entry toward `target`; returns the step size used.
    fn mix(&mut self, row: usize, col: usize, slot: usize, target: &[f64], step: impl StepSize) -> f64 {
        let key = self.key(row, col, slot);
        let k = self.visits[key] + 1;
        let alpha = step.alpha(k);
        let (cols, slots, bins) = (self.cols, self.slots, self.bins);
        let block = self.data[row].get_or_insert_with(|| vec![0.0; cols * slots * bins].into_boxed_slice());
        let off = (col * slots + slot) * bins;
        let entry = &mut block[off..off + bins];
        if self.visits[key] == 0 {
            entry.copy_from_slice(&self.prior);
        }
        mix_into(entry, target, alpha);
        self.visits[key] = k;
        alpha
    }
}

/// Goal-conditioned histograms keyed by (state, action, target).
#[derive(Clone, Debug)]
pub struct GoalTable {
    kind: SupportKind,
    support: Arc<Support>,
    n_actions: usize,
    store: HistStore,
    backoff: Option<StateCodec>,
}

impl GoalTable {
    /// Distance table over 1..=bins; the prior is uniform.
    pub fn distance(rows: usize, n_actions: usize, cols: usize, bins: usize) -> Self {
        let support = Arc::new(Support::distance(bins));
        let prior = vec![1.0 / bins as f64; bins];
        Self { kind: SupportKind::Distance, support, n_actions, store: HistStore::new(rows, cols, n_actions, prior), backoff: None }
    }

    /// Cumulative-reward table over [0, r_max/(1−γ)]; the prior is a point mass at 0.
    pub fn value(rows: usize, n_actions: usize, cols: usize, gamma: f64, reward_max: f64) -> Self {
        let support = Arc::new(Support::value(gamma, reward_max));
        let mut prior = vec![0.0; support.len()];
        prior[0] = 1.0;
        Self { kind: SupportKind::Value, support, n_actions, store: HistStore::new(rows, cols, n_actions, prior), backoff: None }
    }

    /// Sized for a codec: rows are placement codes, columns every code.
    pub fn distance_for(codec: &StateCodec, n_actions: usize) -> Self {
        Self::distance(codec.product_size(), n_actions, codec.total_codes(), DEFAULT_BINS)
    }

    pub fn value_for(codec: &StateCodec, n_actions: usize, gamma: f64) -> Self {
        Self::value(codec.product_size(), n_actions, codec.total_codes(), gamma, 1.0)
    }

    /// Read unvisited entries through the codec's partial-description alias.
    pub fn with_backoff(mut self, codec: StateCodec) -> Self {
        self.backoff = Some(codec);
        self
    }

    pub fn kind(&self) -> SupportKind {
        self.kind
    }

    pub fn support(&self) -> &Arc<Support> {
        &self.support
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn masses(&self, s: Code, a: usize, g: Code) -> &[f64] {
        self.store.read(s as usize, g as usize, a, self.backoff.as_ref().map(|c| (c, s)))
    }

    pub fn histogram(&self, s: Code, a: usize, g: Code) -> Histogram {
        Histogram::new(self.support.clone(), self.masses(s, a, g).to_vec()).expect("normalized")
    }

    pub fn mean(&self, s: Code, a: usize, g: Code) -> f64 {
        expectation_of(&self.support, self.masses(s, a, g))
    }

    /// E[γ^D] with the last bin read as "never".
    pub fn discount(&self, s: Code, a: usize, g: Code, gamma: f64) -> f64 {
        discount_of(self.support.atoms(), self.masses(s, a, g), gamma, Horizon::Infinite)
    }

    pub fn visits(&self, s: Code, a: usize, g: Code) -> u32 {
        self.store.visits(s as usize, g as usize, a)
    }

    /// Mix one entry toward a target histogram.
    pub fn mix(&mut self, s: Code, a: usize, g: Code, target: &[f64], step: impl StepSize) {
        self.store.mix(s as usize, g as usize, a, target, step);
    }

    /// CSV `s,a,g,support_kind,bin_0..` over visited entries.
    pub fn to_csv(&self) -> String {
        let mut out = csv_header(self.support.len());
        for (row, block) in self.store.data.iter().enumerate() {
            if block.is_none() {
                continue;
            }
            for col in 0..self.store.cols {
                for a in 0..self.n_actions {
                    if let Some(m) = self.store.own(row, col, a) {
                        write_row(&mut out, row, &a.to_string(), col, self.kind.name(), m);
                    }
                }
            }
        }
        out
    }
}

fn csv_header(bins: usize) -> String {
    let mut out = String::from("s,a,g,support_kind");
    for i in 0..bins {
        write!(out, ",bin_{i}").unwrap();
    }
    out.push('\n');
    out
}

fn write_row(out: &mut String, s: usize, a: &str, g: usize, kind: &str, m: &[f64]) {
    write!(out, "{s},{a},{g},{kind}").unwrap();
    for x in m {
        write!(out, ",{x}").unwrap();
    }
    out.push('\n');
}

/// Visits before an exact or situation-level evaluator entry answers reads
/// on its own when back-off is enabled.
pub const MIN_SUPPORT: u32 = 4;

/// Back-off level that answered a feasibility read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Resolution {
    Exact,
    Situation,
    Descriptor,
    Alias,
    Prior,
}

/// State-level distance histograms D_π(s, g⊙) over 1..=T.
#[derive(Clone, Debug)]
pub struct FeasibilityTable {
    support: Arc<Support>,
    store: HistStore,
    backoff: Option<StateCodec>,
    /// Entries shared by every source in the same situation, keyed by (situation, target).
    context: Option<HistStore>,
    /// Coarsest level keyed by (source situation, twin flag × target situation).
    coarse: Option<HistStore>,
}

impl FeasibilityTable {
    pub fn new(rows: usize, cols: usize, bins: usize) -> Self {
        let prior = vec![1.0 / bins as f64; bins];
        Self {
            support: Arc::new(Support::distance(bins)),
            store: HistStore::new(rows, cols, 1, prior),
            backoff: None,
            context: None,
            coarse: None,
        }
    }

    pub fn for_codec(codec: &StateCodec) -> Self {
        Self::new(codec.product_size(), codec.total_codes(), DEFAULT_BINS)
    }

    /// Unvisited reads fall back to the situation-level entry for the same
    /// target, then to a target-descriptor entry, then the partial-description
    /// alias, then the prior. Updates train every level.
    pub fn with_backoff(mut self, codec: StateCodec) -> Self {
        let prior = self.store.prior.clone();
        self.context = Some(HistStore::new(codec.situations, self.store.cols, 1, prior.clone()));
        self.coarse = Some(HistStore::new(codec.situations, 2 * codec.situations, 1, prior));
        self.backoff = Some(codec);
        self
    }

    fn situation(&self, s: Code) -> Option<usize> {
        self.backoff.as_ref()?.parts(s).map(|p| p.2)
    }

    /// Twin flag and situation of a target encoding.
    fn descriptor(&self, g: Code) -> Option<usize> {
        let codec = self.backoff.as_ref()?;
        let (_, _, sit) = codec.parts(g)?;
        Some(codec.is_twin(g) as usize * codec.situations + sit)
    }

    pub fn bins(&self) -> usize {
        self.support.len()
    }

    pub fn masses(&self, s: Code, g: Code) -> &[f64] {
        self.resolve(s, g).1
    }

    pub fn histogram(&self, s: Code, g: Code) -> Histogram {
        Histogram::new(self.support.clone(), self.masses(s, g).to_vec()).expect("normalized")
    }

    pub fn mean(&self, s: Code, g: Code) -> f64 {
        expectation_of(&self.support, self.masses(s, g))
    }

    pub fn visits(&self, s: Code, g: Code) -> u32 {
        self.store.visits(s as usize, g as usize, 0)
    }

    /// Which level `masses(s, g)` reads from.
    pub fn resolution(&self, s: Code, g: Code) -> Resolution {
        self.resolve(s, g).0
    }

    fn resolve(&self, s: Code, g: Code) -> (Resolution, &[f64]) {
        let Some(codec) = &self.backoff else {
            return match self.store.own(s as usize, g as usize, 0) {
                Some(m) => (Resolution::Exact, m),
                None => (Resolution::Prior, &self.store.prior),
            };
        };
        if let Some(m) = self.store.supported(s as usize, g as usize, MIN_SUPPORT) {
            return (Resolution::Exact, m);
        }
        if let (Some(ctx), Some(sit)) = (&self.context, self.situation(s)) {
            if let Some(m) = ctx.supported(sit, g as usize, MIN_SUPPORT) {
                return (Resolution::Situation, m);
            }
            if let (Some(coarse), Some(d)) = (&self.coarse, self.descriptor(g)) {
                if let Some(m) = coarse.own(sit, d, 0) {
                    return (Resolution::Descriptor, m);
                }
            }
        }
        if let Some(m) = self.store.own(s as usize, g as usize, 0) {
            return (Resolution::Exact, m);
        }
        if let Some(alias) = codec.fuse(s, g) {
            if let Some(m) = self.store.own(s as usize, alias as usize, 0) {
                return (Resolution::Alias, m);
            }
        }
        (Resolution::Prior, &self.store.prior)
    }

    /// p(D ≤ τ) for τ < T.
    pub fn tau_feasibility(&self, s: Code, g: Code, tau: usize) -> Result<f64> {
        tau_feasibility(self, s, g, tau)
    }

    /// Whether the target is judged reachable before the "never" bin.
    pub fn feasible(&self, s: Code, g: Code, threshold: f64) -> bool {
        let m = self.masses(s, g);
        1.0 - m[m.len() - 1] >= threshold
    }

    pub fn mix(&mut self, s: Code, g: Code, target: &[f64], step: impl StepSize) {
        if let Some(sit) = self.situation(s) {
            if let Some(ctx) = &mut self.context {
                ctx.mix(sit, g as usize, 0, target, step);
            }
            if let Some(d) = self.descriptor(g) {
                if let Some(coarse) = &mut self.coarse {
                    coarse.mix(sit, d, 0, target, step);
                }
            }
        }
        self.store.mix(s as usize, g as usize, 0, target, step);
    }

    pub fn to_csv(&self) -> String {
        let mut out = csv_header(self.support.len());
        for (row, block) in self.store.data.iter().enumerate() {
            if block.is_none() {
                continue;
            }
            for col in 0..self.store.cols {
                if let Some(m) = self.store.own(row, col, 0) {
                    write_row(&mut out, row, "", col, "distance", m);
                }
            }
        }
        out
    }
}

/// Σ_{t=1..τ} p(D = t).
pub fn tau_feasibility(evaluator: &FeasibilityTable, s: Code, g: Code, tau: usize) -> Result<f64> {
    let bins = evaluator.bins();
    if tau == 0 || tau >= bins {
        return Err(Error::TauOutOfRange { tau, max: bins });
    }
    Ok(evaluator.masses(s, g)[..tau].iter().sum())
}

/// Scalar Q over (state, target, action) for the intrinsic reaching reward.
#[derive(Clone, Debug)]
pub struct GoalConditionedQ {
    n_actions: usize,
    cols: usize,
    rows: usize,
    q: Vec<f64>,
    visits: Vec<u32>,
}

impl GoalConditionedQ {
    pub fn new(rows: usize, n_actions: usize, cols: usize) -> Self {
        Self { n_actions, cols, rows, q: vec![0.0; rows * cols * n_actions], visits: vec![0; rows * cols * n_actions] }
    }

    pub fn for_codec(codec: &StateCodec, n_actions: usize) -> Self {
        Self::new(codec.product_size(), n_actions, codec.total_codes())
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn off(&self, s: Code, g: Code) -> usize {
        (s as usize * self.cols + g as usize) * self.n_actions
    }

    /// Q(s, ·, g); zeros for codes outside the table.
    pub fn values(&self, s: Code, g: Code) -> &[f64] {
        if s as usize >= self.rows || g as usize >= self.cols {
            return &ZEROS[..self.n_actions];
        }
        let o = self.off(s, g);
        &self.q[o..o + self.n_actions]
    }

    pub fn get(&self, s: Code, a: usize, g: Code) -> f64 {
        self.values(s, g)[a]
    }

    /// Greedy action, lowest index on ties.
    pub fn greedy(&self, s: Code, g: Code) -> usize {
        argmax(self.values(s, g))
    }

    /// ε-greedy with uniformly random tie-breaking.
    pub fn behavior_action(&self, s: Code, g: Code, eps: f64, rng: &mut Rng) -> usize {
        if eps > 0.0 && rng.gen_bool(eps) {
            return rng.gen_range(0..self.n_actions);
        }
        random_argmax(self.values(s, g), rng)
    }

    fn update(&mut self, s: Code, a: usize, g: Code, target: f64, step: impl StepSize) {
        let o = self.off(s, g) + a;
        self.visits[o] += 1;
        let alpha = step.alpha(self.visits[o]);
        self.q[o] += alpha * (target - self.q[o]);
    }
}

static ZEROS: [f64; 8] = [0.0; 8];

/// Argmax with uniform tie-breaking.
pub fn random_argmax(xs: &[f64], rng: &mut Rng) -> usize {
    let best = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties = xs.iter().filter(|&&x| x == best).count();
    let mut k = if ties > 1 { rng.gen_range(0..ties) } else { 0 };
    for (i, &x) in xs.iter().enumerate() {
        if x == best {
            if k == 0 {
                return i;
            }
            k -= 1;
        }
    }
    0
}

impl TargetPolicy for GoalConditionedQ {
    fn action(&self, state: Code, target: Code) -> usize {
        self.greedy(state, target)
    }

    /// Any tied greedy action: π breaks ties uniformly at random.
    fn admits(&self, state: Code, action: usize, target: Code) -> bool {
        let q = self.values(state, target);
        q[action] == q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Cumulative-reward rule: R on hit or termination, else R + γ·E[V̂(s', π(s'), g)].
pub fn update_reward_estimate(
    table: &mut GoalTable,
    pair: &SourceTargetPair,
    policy: &impl TargetPolicy,
    gamma: f64,
    step: impl StepSize,
) {
    let tr = &pair.transition;
    let g = pair.target;
    let x = if tr.next == g || tr.terminal {
        tr.reward
    } else {
        tr.reward + gamma * table.mean(tr.next, policy.action(tr.next, g), g)
    };
    let mut target = [0.0; 64];
    let target = &mut target[..table.support.len()];
    two_hot_into(&table.support, x, target);
    table.mix(tr.state, tr.action as usize, g, target, step);
}

fn fixed_target(out: &mut [f64], hit: bool) {
    out.iter_mut().for_each(|m| *m = 0.0);
    let last = out.len() - 1;
    out[if hit { 0 } else { last }] = 1.0;
}

/// Distance rule: one-hot(1) on hit, "never" on other terminals, else 1 + D̂(s', π(s'), g).
pub fn update_distance_estimate(table: &mut GoalTable, pair: &SourceTargetPair, policy: &impl TargetPolicy, step: impl StepSize) {
    let tr = &pair.transition;
    let g = pair.target;
    let mut buf = [0.0; 64];
    let out = &mut buf[..table.support.len()];
    let hit = tr.next == g;
    if hit || tr.terminal {
        fixed_target(out, hit);
    } else {
        let next = table.masses(tr.next, policy.action(tr.next, g), g);
        shift_into(next, out);
    }
    table.mix(tr.state, tr.action as usize, g, out, step);
}

/// Feasibility rule with exact hits.
pub fn update_feasibility(
    evaluator: &mut FeasibilityTable,
    pair: &SourceTargetPair,
    policy: &impl TargetPolicy,
    step: impl StepSize,
) -> bool {
    update_feasibility_with(evaluator, pair, policy, &ExactHit, step)
}

/// Action-marginalized distance rule for the evaluator.
///
/// Only transitions whose action π could have taken are used, which keeps the
/// table an estimate under π. Returns whether the pair
/// was applied.
pub fn update_feasibility_with(
    evaluator: &mut FeasibilityTable,
    pair: &SourceTargetPair,
    policy: &impl TargetPolicy,
    hit: &impl HitTest,
    step: impl StepSize,
) -> bool {
    let tr = &pair.transition;
    let g = pair.target;
    if !policy.admits(tr.state, tr.action as usize, g) {
        return false;
    }
    let mut buf = [0.0; 64];
    let out = &mut buf[..evaluator.bins()];
    let is_hit = hit.hit(tr.next, g);
    if is_hit || tr.terminal {
        fixed_target(out, is_hit);
    } else {
        shift_into(evaluator.masses(tr.next, g), out);
    }
    evaluator.mix(tr.state, g, out, step);
    true
}

/// Q-learning on the goal-augmented MDP: 1 on hit, 0 on other terminals.
pub fn q_learning_goal_update(q: &mut GoalConditionedQ, pair: &SourceTargetPair, gamma_int: f64, step: impl StepSize) {
    q_learning_goal_update_with(q, pair, &ExactHit, gamma_int, step)
}

pub fn q_learning_goal_update_with(
    q: &mut GoalConditionedQ,
    pair: &SourceTargetPair,
    hit: &impl HitTest,
    gamma_int: f64,
    step: impl StepSize,
) {
    let tr = &pair.transition;
    let g = pair.target;
    let target = if hit.hit(tr.next, g) {
        1.0
    } else if tr.terminal {
        0.0
    } else {
        gamma_int * q.values(tr.next, g).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    };
    q.update(tr.state, tr.action as usize, g, target, step);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replay::{Strategy, Transition};

    fn pair(state: Code, action: u8, reward: f64, next: Code, terminal: bool, target: Code) -> SourceTargetPair {
        SourceTargetPair { transition: Transition { state, action, reward, next, terminal }, task: 0, target, strategy: Strategy::Episode }
    }

    #[test]
    fn hit_gives_one_hot_distance() {
        let mut t = GoalTable::distance(4, 1, 5, 16);
        let zero = |_: Code, _: Code| 0usize;
        update_distance_estimate(&mut t, &pair(0, 0, 0.0, 1, false, 1), &zero, LearningRate::default());
        assert_eq!(t.masses(0, 0, 1)[0], 1.0);
        update_distance_estimate(&mut t, &pair(0, 0, 0.0, 4, true, 2), &zero, LearningRate::default());
        assert_eq!(t.masses(0, 0, 2)[15], 1.0);
    }

    #[test]
    fn reward_hit_target() {
        let mut t = GoalTable::value(4, 1, 5, 0.9, 1.0);
        let zero = |_: Code, _: Code| 0usize;
        update_reward_estimate(&mut t, &pair(0, 0, 1.0, 1, true, 1), &zero, 0.9, LearningRate::default());
        assert!((t.mean(0, 0, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn feasibility_examples() {
        let mut e = FeasibilityTable::new(4, 6, 16);
        let zero = |_: Code, _: Code| 0usize;
        assert!(update_feasibility(&mut e, &pair(0, 0, 0.0, 1, false, 1), &zero, LearningRate::default()));
        assert_eq!(e.tau_feasibility(0, 1, 1).unwrap(), 1.0);
        assert!(!update_feasibility(&mut e, &pair(0, 1, 0.0, 1, false, 1), &zero, LearningRate::default()));
        for _ in 0..200 {
            update_feasibility(&mut e, &pair(2, 0, 0.0, 3, true, 5), &zero, LearningRate::default());
        }
        for tau in 1..16 {
            assert!(e.tau_feasibility(2, 5, tau).unwrap() < 1e-12);
        }
        assert!(matches!(e.tau_feasibility(2, 5, 16), Err(Error::TauOutOfRange { .. })));
    }

    #[test]
    fn q_targets() {
        let mut q = GoalConditionedQ::new(4, 2, 4);
        q_learning_goal_update(&mut q, &pair(0, 1, 0.0, 2, false, 2), 0.95, LearningRate::default());
        assert_eq!(q.get(0, 1, 2), 1.0);
        q_learning_goal_update(&mut q, &pair(1, 0, 0.0, 3, true, 2), 0.95, LearningRate::default());
        assert_eq!(q.get(1, 0, 2), 0.0);
    }

    #[test]
    fn backoff_reads_alias() {
        let codec = StateCodec { width: 4, height: 4, facings: 1, situations: 4 };
        let mut e = FeasibilityTable::for_codec(&codec).with_backoff(codec);
        let s = codec.with_parts((0, 0), None, 1);
        let g_same = codec.with_parts((1, 0), None, 1);
        let g_other = codec.with_parts((1, 0), None, 2);
        let mut one = vec![0.0; 16];
        one[0] = 1.0;
        e.mix(s, g_same, &one, LearningRate::default());
        assert_eq!(e.masses(s, g_other)[0], 1.0);
        let mut never = vec![0.0; 16];
        never[15] = 1.0;
        e.mix(s, g_other, &never, LearningRate::default());
        assert_eq!(e.masses(s, g_other)[15], 1.0);
    }
}
