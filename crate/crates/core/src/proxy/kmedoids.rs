//! k-medoids with forced members: Voronoi iteration plus PAM swaps.

use crate::dp::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct KMedoids {
    /// Sorted medoid indices.
    pub medoids: Vec<usize>,
    /// Total cost after initialization and after every accepted move.
    pub cost_history: Vec<f64>,
}

/// min(min(d_ij, cap), min(d_ji, cap)).
pub fn symmetrize_truncated(d: &Matrix, cap: f64) -> Matrix {
    let n = d.n;
    let mut out = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                out.set(i, j, d.get(i, j).min(cap).min(d.get(j, i).min(cap)));
            }
        }
    }
    out
}

/// Σ over points of the distance to the nearest medoid.
pub fn total_cost(d: &Matrix, medoids: &[usize]) -> f64 {
    (0..d.n).map(|p| medoids.iter().map(|&m| d.get(p, m)).fold(f64::INFINITY, f64::min)).sum()
}

/// Medoids of a symmetric dissimilarity matrix; forced members are always kept.
/// With `k ≥ n` every point is returned.
pub fn kmedoids(d: &Matrix, k: usize, forced: &[usize]) -> KMedoids {
    let n = d.n;
    let mut fixed: Vec<usize> = forced.iter().copied().filter(|&f| f < n).collect();
    fixed.sort_unstable();
    fixed.dedup();
    if k >= n {
        return KMedoids { medoids: (0..n).collect(), cost_history: vec![0.0] };
    }
    let k = k.max(fixed.len()).max(1);
    let is_fixed = |m: usize| fixed.binary_search(&m).is_ok();

    // BUILD: greedily add the point that lowers cost the most
    let mut medoids = fixed.clone();
    while medoids.len() < k {
        let mut best = (f64::INFINITY, usize::MAX);
        for c in 0..n {
            if medoids.contains(&c) {
                continue;
            }
            medoids.push(c);
            let cost = total_cost(d, &medoids);
            medoids.pop();
            if cost < best.0 {
                best = (cost, c);
            }
        }
        medoids.push(best.1);
    }
    let mut cost = total_cost(d, &medoids);
    let mut history = vec![cost];

    loop {
        let mut improved = false;
        // Voronoi step: recenter each free medoid within its cluster
        let assign: Vec<usize> = (0..n)
            .map(|p| {
                let mut best = 0;
                for (i, &m) in medoids.iter().enumerate() {
                    if d.get(p, m) < d.get(p, medoids[best]) {
                        best = i;
                    }
                }
                best
            })
            .collect();
        for i in 0..medoids.len() {
            if is_fixed(medoids[i]) {
                continue;
            }
            let members: Vec<usize> = (0..n).filter(|&p| assign[p] == i).collect();
            for &c in &members {
                if medoids.contains(&c) {
                    continue;
                }
                let old = medoids[i];
                medoids[i] = c;
                let new_cost = total_cost(d, &medoids);
                if new_cost < cost - 1e-12 {
                    cost = new_cost;
                    history.push(cost);
                    improved = true;
                } else {
                    medoids[i] = old;
                }
            }
        }
        // PAM swap step: best single swap of a free medoid with a non-medoid
        let mut best = (cost, usize::MAX, usize::MAX);
        for i in 0..medoids.len() {
            if is_fixed(medoids[i]) {
                continue;
            }
            for c in 0..n {
                if medoids.contains(&c) {
                    continue;
                }
                let old = medoids[i];
                medoids[i] = c;
                let new_cost = total_cost(d, &medoids);
                medoids[i] = old;
                if new_cost < best.0 - 1e-12 {
                    best = (new_cost, i, c);
                }
            }
        }
        if best.1 != usize::MAX {
            medoids[best.1] = best.2;
            cost = best.0;
            history.push(cost);
            improved = true;
        }
        if !improved {
            break;
        }
    }
    medoids.sort_unstable();
    KMedoids { medoids, cost_history: history }
}

/// Kept candidate indices after symmetrizing the truncated estimate.
pub fn kmedoids_prune(d_hat: &Matrix, k: usize, forced: &[usize], cap: f64) -> Vec<usize> {
    kmedoids(&symmetrize_truncated(d_hat, cap), k, forced).medoids
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, (i as f64 - j as f64).abs());
            }
        }
        m
    }

    #[test]
    fn n_equals_k_is_identity() {
        assert_eq!(kmedoids(&line(5), 5, &[]).medoids, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn forced_member_kept() {
        let r = kmedoids(&line(10), 2, &[9]);
        assert!(r.medoids.contains(&9));
    }

    #[test]
    fn truncation_and_symmetry() {
        let mut d = Matrix::zeros(2);
        d.set(0, 1, 3.0);
        d.set(1, 0, 40.0);
        let s = symmetrize_truncated(&d, 16.0);
        assert_eq!((s.get(0, 1), s.get(1, 0)), (3.0, 3.0));
    }
}
