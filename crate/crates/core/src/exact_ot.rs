//! Exact W₂ between equal-size uniform point clouds.
//!
//! With uniform weights and equal sizes the optimal coupling is a
//! permutation, so `W₂² = min_σ (1/n) Σ ‖xᵢ − y_σ(i)‖²` is a linear assignment
//! problem. It is solved with the shortest-augmenting-path Hungarian method
//! (O(n³)), which also yields dual potentials used to certify optimality.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::dist_sq;
use crate::ot1d::PointCloud;
use crate::{Error, Result};

/// Largest cloud size accepted by [`w2_exact`].
pub const EXACT_LIMIT: usize = 10_000;

/// Largest cloud size accepted by [`w2_bruteforce`].
pub const BRUTEFORCE_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    /// `permutation[i]` is the column assigned to row `i`.
    pub permutation: Vec<usize>,
    /// Mean cost `(1/n) Σ c(i, σ(i))`; for clouds this is `W₂²`.
    pub cost: f64,
    /// Relative gap between the primal cost and the dual objective, plus the
    /// largest relative violation of `u_i + v_j ≤ c_ij`.
    pub dual_residual: f64,
}

/// Solves `min_σ Σ c(i, σ(i))` for a dense row-major `n × n` cost matrix.
pub fn solve_assignment(costs: &[f64], n: usize) -> Result<AssignmentResult> {
    if n == 0 {
        return Err(Error::domain("assignment needs n >= 1"));
    }
    if costs.len() != n * n {
        return Err(Error::Shape { expected: n * n, got: costs.len() });
    }
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(Error::domain("assignment costs must be finite"));
    }
    let c = |i: usize, j: usize| costs[i * n + j];

    // Potentials u (rows), v (columns); p[j] is the row matched to column j.
    // Index 0 is a virtual row/column, real ones are 1..=n.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = c(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut permutation = vec![0usize; n];
    for j in 1..=n {
        permutation[p[j] - 1] = j - 1;
    }
    let primal: f64 = permutation.iter().enumerate().map(|(i, &j)| c(i, j)).sum();
    let dual: f64 = u[1..].iter().sum::<f64>() + v[1..].iter().sum::<f64>();
    let scale = primal.abs().max(costs.iter().fold(0.0f64, |m, x| m.max(x.abs()))).max(f64::MIN_POSITIVE);
    let mut violation = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            violation = violation.max(u[i + 1] + v[j + 1] - c(i, j));
        }
    }
    Ok(AssignmentResult {
        permutation,
        cost: primal / n as f64,
        dual_residual: (primal - dual).abs() / scale + violation.max(0.0) / scale,
    })
}

fn check_clouds(x: &PointCloud, y: &PointCloud) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::Shape { expected: x.dim(), got: y.dim() });
    }
    if x.len() != y.len() {
        return Err(Error::unsupported(alloc::format!("exact W2 needs equal sizes, got {} and {}", x.len(), y.len())));
    }
    if !x.is_uniform() || !y.is_uniform() {
        return Err(Error::unsupported("exact W2 needs uniform weights"));
    }
    Ok(())
}

/// Squared-distance cost matrix, row-major.
pub fn squared_distance_matrix(x: &PointCloud, y: &PointCloud) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() * y.len());
    for a in x.rows() {
        out.extend(y.rows().map(|b| dist_sq(a, b)));
    }
    out
}

/// Optimal assignment between two equal-size uniform clouds; `cost` is `W₂²`.
pub fn w2_assignment(x: &PointCloud, y: &PointCloud) -> Result<AssignmentResult> {
    check_clouds(x, y)?;
    if x.len() > EXACT_LIMIT {
        return Err(Error::SizeLimit { what: "exact W2 cloud size", got: x.len(), limit: EXACT_LIMIT });
    }
    solve_assignment(&squared_distance_matrix(x, y), x.len())
}

/// `W₂(X, Y)` for equal-size uniform clouds.
pub fn w2_exact(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    w2_assignment(x, y).map(|r| libm::sqrt(r.cost.max(0.0)))
}

/// `W₂(X, Y)` by enumerating all permutations (Heap's algorithm), `n ≤ 8`.
pub fn w2_bruteforce(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    check_clouds(x, y)?;
    let n = x.len();
    if n > BRUTEFORCE_LIMIT {
        return Err(Error::SizeLimit { what: "brute-force W2 cloud size", got: n, limit: BRUTEFORCE_LIMIT });
    }
    let costs = squared_distance_matrix(x, y);
    let total = |perm: &[usize]| perm.iter().enumerate().map(|(i, &j)| costs[i * n + j]).sum::<f64>();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = total(&perm);
    let mut counters = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            best = best.min(total(&perm));
            counters[i] += 1;
            i = 0;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    Ok(libm::sqrt(best / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot1d::{project, wasserstein_1d};
    use crate::rng::seeded_rng;
    use crate::sw::{estimate_sw, EstimatorSpec, Scheme};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = seeded_rng(seed);
        PointCloud::new(3, (0..3 * n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
    }

    #[test]
    fn examples() {
        let x = random_cloud(7, 1);
        assert_eq!(w2_exact(&x, &x).unwrap(), 0.0);
        let a = PointCloud::new(3, vec![0.0, 0.0, 0.0]).unwrap();
        let b = PointCloud::new(3, vec![3.0, 4.0, 0.0]).unwrap();
        assert_eq!(w2_exact(&a, &b).unwrap(), 5.0);
        assert_eq!(w2_bruteforce(&a, &b).unwrap(), 5.0);
    }

    #[test]
    fn errors() {
        let x = random_cloud(4, 1);
        let y = random_cloud(5, 2);
        assert!(matches!(w2_exact(&x, &y), Err(Error::Unsupported(_))));
        let w = PointCloud::weighted(3, vec![0.0; 12], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(matches!(w2_exact(&x, &w), Err(Error::Unsupported(_))));
        assert!(matches!(w2_bruteforce(&random_cloud(9, 1), &random_cloud(9, 2)), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn agrees_with_brute_force() {
        for s in 0..100 {
            let x = random_cloud(6, 2 * s);
            let y = random_cloud(6, 2 * s + 1);
            let r = w2_assignment(&x, &y).unwrap();
            assert!(r.dual_residual < 1e-9);
            assert!((libm::sqrt(r.cost) - w2_bruteforce(&x, &y).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn permuted_copy_has_zero_distance() {
        let x = random_cloud(8, 3);
        let mut rows: Vec<Vec<f64>> = x.rows().map(|r| r.to_vec()).collect();
        rows.shuffle(&mut seeded_rng(4));
        let y = PointCloud::new(3, rows.concat()).unwrap();
        assert_eq!(w2_bruteforce(&x, &y).unwrap(), 0.0);
        assert_eq!(w2_exact(&x, &y).unwrap(), 0.0);
    }

    #[test]
    fn one_dimensional_clouds_match_sorted_pairing() {
        let mut rng = seeded_rng(5);
        for _ in 0..50 {
            let n = rng.random_range(1..=8);
            let line = |rng: &mut crate::rng::SeededRng| {
                let pts: Vec<f64> = (0..n).flat_map(|_| [rng.random_range(-3.0..3.0), 0.0, 0.0]).collect();
                PointCloud::new(3, pts).unwrap()
            };
            let (x, y) = (line(&mut rng), line(&mut rng));
            let axis = [1.0, 0.0, 0.0];
            let w1d = wasserstein_1d(&project(&x, &axis).unwrap(), &project(&y, &axis).unwrap(), 2.0).unwrap();
            assert!((w2_exact(&x, &y).unwrap() - libm::sqrt(w1d)).abs() < 1e-9);
            if n <= 8 {
                assert!((w2_bruteforce(&x, &y).unwrap() - libm::sqrt(w1d)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sliced_distance_is_a_lower_bound() {
        for s in 0..10 {
            let x = random_cloud(12, 10 + s);
            let y = random_cloud(12, 40 + s);
            let spec = EstimatorSpec::new(2.0, 10_000, Scheme::MonteCarlo).with_seed(s);
            let sw = libm::sqrt(estimate_sw(&x, &y, &spec).unwrap().value);
            assert!(sw <= w2_exact(&x, &y).unwrap() + 1e-12);
        }
    }

    #[test]
    fn larger_instance_certifies_itself() {
        let r = w2_assignment(&random_cloud(300, 1), &random_cloud(300, 2)).unwrap();
        assert!(r.dual_residual < 1e-9, "{}", r.dual_residual);
        let mut seen = r.permutation.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..300).collect::<Vec<_>>());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn metric_axioms(seed in 0u64..10_000, n in 1usize..=6) {
            let (x, y, z) = (random_cloud(n, seed), random_cloud(n, seed + 1), random_cloud(n, seed + 2));
            let xy = w2_exact(&x, &y).unwrap();
            prop_assert!((xy - w2_exact(&y, &x).unwrap()).abs() < 1e-9);
            prop_assert!(xy <= w2_exact(&x, &z).unwrap() + w2_exact(&z, &y).unwrap() + 1e-9);
        }

        #[test]
        fn translation_invariance(seed in 0u64..10_000, c in proptest::array::uniform3(-10.0f64..10.0)) {
            let (x, y) = (random_cloud(6, seed), random_cloud(6, seed + 7));
            let moved = w2_exact(&x.translated(&c).unwrap(), &y.translated(&c).unwrap()).unwrap();
            prop_assert!((moved - w2_exact(&x, &y).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn assignment_beats_random_permutations(seed in 0u64..10_000, n in 1usize..=20) {
            let mut rng = seeded_rng(seed);
            let costs: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..10.0)).collect();
            let r = solve_assignment(&costs, n).unwrap();
            let mut seen = r.permutation.clone();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
            let recomputed: f64 = r.permutation.iter().enumerate().map(|(i, &j)| costs[i * n + j]).sum::<f64>() / n as f64;
            prop_assert!((recomputed - r.cost).abs() < 1e-10);
            for _ in 0..20 {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                let c: f64 = perm.iter().enumerate().map(|(i, &j)| costs[i * n + j]).sum::<f64>() / n as f64;
                prop_assert!(r.cost <= c + 1e-12);
            }
        }
    }
}
