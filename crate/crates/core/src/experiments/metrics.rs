use std::collections::BTreeMap;

use rand::Rng as _;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::agents::Selection;
use crate::dp::{default_horizon, optimal_goal_policy, pairwise_distance, TargetClass};
use crate::estimators::{FeasibilityTable, DEFAULT_BINS};
use crate::generator::{CandidateSource, GeneratorConfig, TargetGenerator};
use crate::gridworld::Task;
use crate::replay::TargetProposer;
use crate::{Code, Rng};

/// Expected first-hitting distance as some estimator sees it.
pub trait ExpectedDistance {
    fn expected_distance(&self, s: Code, g: Code) -> f64;
}

impl ExpectedDistance for FeasibilityTable {
    fn expected_distance(&self, s: Code, g: Code) -> f64 {
        self.mean(s, g)
    }
}

impl<F: Fn(Code, Code) -> f64> ExpectedDistance for F {
    fn expected_distance(&self, s: Code, g: Code) -> f64 {
        self(s, g)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorPair {
    pub task: usize,
    pub source: Code,
    pub target: Code,
    pub class: TargetClass,
    /// clip(D_true, T); T for G1 and G2.
    pub truth: f64,
}

/// Fixed (source, target) pairs per class with their ground-truth distances.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorSample {
    pub pairs: Vec<ErrorPair>,
    pub bins: usize,
}

impl ErrorSample {
    /// `per_class` pairs per class. Sources are uniform non-terminal states;
    /// targets come from the injector configured for a single class. G0
    /// truths use the optimal goal-conditioned policy at `gamma_int`.
    pub fn draw(tasks: &[Task], per_class: usize, gamma_int: f64, rng: &mut Rng) -> Self {
        let bins = DEFAULT_BINS;
        let cap = bins as f64;
        let mut pairs = Vec::new();
        let mut truths: BTreeMap<usize, crate::dp::DistanceMatrix> = BTreeMap::new();
        let configs = [
            (TargetClass::G0, GeneratorConfig { g1_rate: 0.0, g2_rate: 0.0, source: CandidateSource::FullEnumeration, include_goal: false }),
            (TargetClass::G1, GeneratorConfig { g1_rate: 1.0, g2_rate: 0.0, source: CandidateSource::FullEnumeration, include_goal: false }),
            (TargetClass::G2, GeneratorConfig { g1_rate: 0.0, g2_rate: 1.0, source: CandidateSource::FullEnumeration, include_goal: false }),
        ];
        for (class, config) in configs {
            let generator = TargetGenerator::new(config, tasks, None);
            let mut got = 0;
            let mut tries = 0;
            while got < per_class && tries < 50 * per_class.max(1) {
                tries += 1;
                let ti = rng.gen_range(0..tasks.len());
                let task = &tasks[ti];
                let sources: Vec<usize> = task.non_terminal_states().collect();
                let s = sources[rng.gen_range(0..sources.len())];
                let Ok(g) = generator.propose_target(ti as u32, task.code_of(s), rng) else { continue };
                if g == task.code_of(s) || crate::dp::classify_target(task, s, g) != class {
                    continue;
                }
                let truth = if class == TargetClass::G0 {
                    let dm = truths.entry(ti).or_insert_with(|| {
                        let pol = optimal_goal_policy(&task.mdp, gamma_int);
                        pairwise_distance(&task.mdp, &pol, default_horizon(task))
                    });
                    dm.get(s, task.decode(g).unwrap()).min(cap)
                } else {
                    cap
                };
                pairs.push(ErrorPair { task: ti, source: task.code_of(s), target: g, class, truth });
                got += 1;
            }
        }
        Self { pairs, bins }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    /// Mean |E[D̂] − truth| per class; `None` when the class had no pairs.
    pub mean: [Option<f64>; 3],
    pub count: [usize; 3],
    /// E0 errors bucketed by true distance: (sum, count).
    pub e0_by_distance: BTreeMap<usize, (f64, usize)>,
}

impl ErrorReport {
    /// Means with `NaN` for omitted classes.
    pub fn means(&self) -> [f64; 3] {
        self.mean.map(|m| m.unwrap_or(f64::NAN))
    }
}

fn class_index(c: TargetClass) -> usize {
    match c {
        TargetClass::G0 => 0,
        TargetClass::G1 => 1,
        TargetClass::G2 => 2,
    }
}

/// E0, E1, E2: mean absolute error of the expected distance per class.
pub fn feasibility_errors(est: &dyn ExpectedDistance, sample: &ErrorSample) -> ErrorReport {
    let mut sum = [0.0; 3];
    let mut count = [0usize; 3];
    let mut by_distance: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for p in &sample.pairs {
        let err = (est.expected_distance(p.source, p.target) - p.truth).abs();
        let k = class_index(p.class);
        sum[k] += err;
        count[k] += 1;
        if k == 0 {
            let e = by_distance.entry(p.truth.round() as usize).or_default();
            e.0 += err;
            e.1 += 1;
        }
    }
    let mean = [0, 1, 2].map(|k| (count[k] > 0).then(|| sum[k] / count[k] as f64));
    ErrorReport { mean, count, e0_by_distance: by_distance }
}

/// Fractions of selections whose target is G1 and G2; `NaN` with no selections.
pub fn delusion_frequency(selections: &[Selection]) -> (f64, f64) {
    if selections.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = selections.len() as f64;
    let g1 = selections.iter().filter(|s| s.class == TargetClass::G1).count() as f64;
    let g2 = selections.iter().filter(|s| s.class == TargetClass::G2).count() as f64;
    (g1 / n, g2 / n)
}

/// Mean and half-width of a 95% Student-t interval.
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).unwrap().inverse_cdf(0.975);
    (mean, t * (var / n as f64).sqrt())
}

/// Two-sided Welch t-test p-value; identical constant samples give 1.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> f64 {
    let stats = |xs: &[f64]| {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (n, m, v)
    };
    let (na, ma, va) = stats(a);
    let (nb, mb, vb) = stats(b);
    let se2 = va / na + vb / nb;
    if se2 == 0.0 {
        return if ma == mb { 1.0 } else { 0.0 };
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    2.0 * (1.0 - StudentsT::new(0.0, 1.0, df).unwrap().cdf(t.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_and_test_basics() {
        let (m, h) = mean_ci95(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((h - 2.484).abs() < 1e-3);
        assert_eq!(welch_t_test(&[1.0, 1.0], &[1.0, 1.0]), 1.0);
        assert!(welch_t_test(&[0.0, 0.1, 0.2, 0.1], &[5.0, 5.1, 5.2, 5.1]) < 1e-6);
    }
}
