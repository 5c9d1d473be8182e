//! C51-style histograms over fixed scalar supports.
//!
//! Hot loops in the estimator tables work on raw mass slices through the
//! `*_into` functions; [`Histogram`] is the owned value type on top.

use std::sync::Arc;

use crate::{Error, Result};

/// Strictly increasing bin centers.
#[derive(Clone, Debug, PartialEq)]
pub struct Support {
    atoms: Vec<f64>,
}

impl Support {
    pub fn new(atoms: Vec<f64>) -> Result<Self> {
        if atoms.len() < 2 || atoms.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Precondition("support must be strictly increasing with ≥2 atoms".into()));
        }
        Ok(Self { atoms })
    }

    /// `n` evenly spaced atoms from `lo` to `hi`.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        let step = (hi - lo) / (n as f64 - 1.0);
        Self::new((0..n).map(|i| lo + step * i as f64).collect())
    }

    /// Integer distances 1..=t. Bin `t` doubles as "≥ t or never".
    pub fn distance(t: usize) -> Self {
        Self::new((1..=t).map(|x| x as f64).collect()).expect("t >= 2")
    }

    /// 16 bins over [0, r_max / (1 − γ)].
    pub fn value(gamma: f64, reward_max: f64) -> Self {
        Self::uniform(0.0, reward_max / (1.0 - gamma), 16).expect("valid range")
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.atoms[0]
    }

    pub fn max(&self) -> f64 {
        self.atoms[self.atoms.len() - 1]
    }
}

/// Normalized masses over a shared support.
#[derive(Clone, Debug)]
pub struct Histogram {
    support: Arc<Support>,
    masses: Vec<f64>,
}

impl PartialEq for Histogram {
    fn eq(&self, other: &Self) -> bool {
        same_support(&self.support, &other.support) && self.masses == other.masses
    }
}

fn same_support(a: &Arc<Support>, b: &Arc<Support>) -> bool {
    Arc::ptr_eq(a, b) || a.atoms == b.atoms
}

impl Histogram {
    /// Masses are renormalized; negative or all-zero input is rejected.
    pub fn new(support: Arc<Support>, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != support.len() || masses.iter().any(|&m| !(m >= 0.0)) {
            return Err(Error::Precondition("masses must be non-negative and match the support".into()));
        }
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            return Err(Error::Precondition("histogram has zero mass".into()));
        }
        Ok(Self { support, masses: masses.into_iter().map(|m| m / total).collect() })
    }

    pub fn one_hot(support: Arc<Support>, bin: usize) -> Self {
        let mut masses = vec![0.0; support.len()];
        masses[bin] = 1.0;
        Self { support, masses }
    }

    pub fn uniform(support: Arc<Support>) -> Self {
        let n = support.len();
        Self { support, masses: vec![1.0 / n as f64; n] }
    }

    pub fn support(&self) -> &Arc<Support> {
        &self.support
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn expectation(&self) -> f64 {
        expectation_of(&self.support, &self.masses)
    }

    /// (1 − α)·self + α·target.
    pub fn mix_toward(&self, target: &Histogram, alpha: f64) -> Result<Histogram> {
        if !same_support(&self.support, &target.support) {
            return Err(Error::SupportMismatch);
        }
        let mut masses = self.masses.clone();
        mix_into(&mut masses, &target.masses, alpha);
        Ok(Histogram { support: self.support.clone(), masses })
    }
}

/// Project a scalar onto its two neighbouring bins, clipping to the support range.
pub fn two_hot(support: Arc<Support>, x: f64) -> Histogram {
    let mut masses = vec![0.0; support.len()];
    two_hot_into(&support, x, &mut masses);
    Histogram { support, masses }
}

/// Σ p_i · z_i.
pub fn expectation(h: &Histogram) -> f64 {
    h.expectation()
}

/// Convex mix of two histograms on the same support.
pub fn mix_toward(current: &Histogram, target: &Histogram, alpha: f64) -> Result<Histogram> {
    current.mix_toward(target, alpha)
}

/// Distance bootstrap `1 + D`: every bin moves up one, the last bin absorbs.
pub fn shift_discount_target(next: &Histogram) -> Histogram {
    let mut masses = vec![0.0; next.masses.len()];
    shift_into(&next.masses, &mut masses);
    Histogram { support: next.support.clone(), masses }
}

/// How the absorbing last distance bin is read when swapping to discounts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Horizon {
    /// Last bin means "never": contributes 0.
    Infinite,
    /// Exponents are capped at τ; the last bin counts as distance min(T, τ).
    Finite(usize),
}

/// E[γ^D] from a distance histogram over 1..T.
pub fn support_swap_to_discount(h: &Histogram, gamma: f64, horizon: Horizon) -> f64 {
    discount_of(h.support.atoms(), &h.masses, gamma, horizon)
}

pub(crate) fn discount_of(atoms: &[f64], masses: &[f64], gamma: f64, horizon: Horizon) -> f64 {
    let last = masses.len() - 1;
    let mut total = 0.0;
    for (i, (&t, &p)) in atoms.iter().zip(masses).enumerate() {
        if p == 0.0 {
            continue;
        }
        let term = match horizon {
            Horizon::Infinite if i == last => 0.0,
            Horizon::Infinite => pow_atom(gamma, t),
            Horizon::Finite(tau) => pow_atom(gamma, t.min(tau as f64)),
        };
        total += p * term;
    }
    total
}

fn pow_atom(gamma: f64, t: f64) -> f64 {
    if t.fract() == 0.0 && t.abs() < 1e6 {
        gamma.powi(t as i32)
    } else {
        gamma.powf(t)
    }
}

pub(crate) fn expectation_of(support: &Support, masses: &[f64]) -> f64 {
    support.atoms.iter().zip(masses).map(|(z, p)| z * p).sum()
}

pub(crate) fn two_hot_into(support: &Support, x: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|m| *m = 0.0);
    let atoms = &support.atoms;
    let n = atoms.len();
    if x <= atoms[0] {
        out[0] = 1.0;
        return;
    }
    if x >= atoms[n - 1] {
        out[n - 1] = 1.0;
        return;
    }
    // first atom strictly above x
    let hi = atoms.partition_point(|&z| z <= x);
    let lo = hi - 1;
    if atoms[lo] == x {
        out[lo] = 1.0;
        return;
    }
    let w = (x - atoms[lo]) / (atoms[hi] - atoms[lo]);
    out[lo] = 1.0 - w;
    out[hi] = w;
}

pub(crate) fn shift_into(next: &[f64], out: &mut [f64]) {
    let n = next.len();
    out[0] = 0.0;
    out[1..n].copy_from_slice(&next[..n - 1]);
    out[n - 1] += next[n - 1];
}

pub(crate) fn mix_into(current: &mut [f64], target: &[f64], alpha: f64) {
    let mut total = 0.0;
    for (c, &t) in current.iter_mut().zip(target) {
        *c = (1.0 - alpha) * *c + alpha * t;
        total += *c;
    }
    if total != 1.0 && total > 0.0 {
        current.iter_mut().for_each(|c| *c /= total);
    }
}
