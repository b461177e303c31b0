//! One-dimensional optimal transport between projected empirical measures.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{dot, norm};
use crate::{Error, Result};

/// `n` support points in R^dim with optional weights (uniform when `None`).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    points: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl PointCloud {
    /// Uniform-weight cloud from row-major coordinates.
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::UnsupportedDimension { dim, supported: ">= 1" });
        }
        if points.is_empty() {
            return Err(Error::domain("point cloud must have at least one point"));
        }
        if points.len() % dim != 0 {
            return Err(Error::Shape { expected: dim, got: points.len() % dim });
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("point coordinates must be finite"));
        }
        Ok(Self { dim, points, weights: None })
    }

    /// Weighted cloud; weights must be non-negative and sum to 1 within 1e-12.
    pub fn weighted(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let mut cloud = Self::new(dim, points)?;
        if weights.len() != cloud.len() {
            return Err(Error::Shape { expected: cloud.len(), got: weights.len() });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::domain("weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("weights sum to {total}, expected 1")));
        }
        cloud.weights = Some(weights);
        Ok(cloud)
    }

    /// Rows given as fixed-size arrays.
    pub fn from_rows<const D: usize>(rows: &[[f64; D]]) -> Result<Self> {
        Self::new(D, rows.iter().flatten().copied().collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> core::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.points
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.points
    }

    pub fn into_points(self) -> Vec<f64> {
        self.points
    }

    /// Explicit weights, or `None` for uniform.
    pub fn explicit_weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.len() as f64,
        }
    }

    pub fn is_uniform(&self) -> bool {
        self.weights.is_none()
    }

    /// Same weights, new coordinates.
    pub fn with_points(&self, points: Vec<f64>) -> Result<Self> {
        if points.len() != self.points.len() {
            return Err(Error::Shape { expected: self.points.len(), got: points.len() });
        }
        Ok(Self { dim: self.dim, points, weights: self.weights.clone() })
    }

    /// Every coordinate multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { dim: self.dim, points: self.points.iter().map(|x| c * x).collect(), weights: self.weights.clone() }
    }

    /// Every point translated by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim {
            return Err(Error::Shape { expected: self.dim, got: shift.len() });
        }
        let mut points = self.points.clone();
        for row in points.chunks_exact_mut(self.dim) {
            row.iter_mut().zip(shift).for_each(|(x, s)| *x += s);
        }
        Ok(Self { dim: self.dim, points, weights: self.weights.clone() })
    }
}

/// Values `⟨θ, xᵢ⟩` of a projected cloud with their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Projected1D {
    pub values: Vec<f64>,
    /// `None` means uniform.
    pub weights: Option<Vec<f64>>,
    /// Original index of each entry; a permutation of `0..n`.
    pub order: Vec<usize>,
    pub sorted: bool,
    /// Set when the direction was not unit length and had to be rescaled.
    pub renormalized_direction: bool,
}

impl Projected1D {
    /// Uniform-weight measure on `values` (unsorted).
    pub fn uniform(values: Vec<f64>) -> Self {
        let order = (0..values.len()).collect();
        Self { values, weights: None, order, sorted: false, renormalized_direction: false }
    }

    /// Weighted measure on `values`; weights are taken as given.
    pub fn weighted(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != values.len() {
            return Err(Error::Shape { expected: values.len(), got: weights.len() });
        }
        let order = (0..values.len()).collect();
        Ok(Self { values, weights: Some(weights), order, sorted: false, renormalized_direction: false })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.values.len() as f64,
        }
    }

    /// Sorts ascending; ties keep the original index order.
    pub fn sort(&mut self) {
        if self.sorted {
            return;
        }
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]).then(self.order[a].cmp(&self.order[b])));
        self.values = idx.iter().map(|&i| self.values[i]).collect();
        self.order = idx.iter().map(|&i| self.order[i]).collect();
        if let Some(w) = &self.weights {
            self.weights = Some(idx.iter().map(|&i| w[i]).collect());
        }
        self.sorted = true;
    }

    pub fn into_sorted(mut self) -> Self {
        self.sort();
        self
    }
}

/// `θ♯μ`: values `⟨θ, xᵢ⟩`. A direction whose norm is off by more than 1e-9
/// is normalized first and flagged.
pub fn project(cloud: &PointCloud, direction: &[f64]) -> Result<Projected1D> {
    if direction.len() != cloud.dim {
        return Err(Error::Shape { expected: cloud.dim, got: direction.len() });
    }
    let n = norm(direction);
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::domain("projection direction must be non-zero and finite"));
    }
    let renormalize = (n - 1.0).abs() > 1e-9;
    let values = if renormalize {
        let unit: Vec<f64> = direction.iter().map(|x| x / n).collect();
        cloud.rows().map(|p| dot(&unit, p)).collect()
    } else {
        cloud.rows().map(|p| dot(direction, p)).collect()
    };
    Ok(Projected1D {
        values,
        weights: cloud.weights.clone(),
        order: (0..cloud.len()).collect(),
        sorted: false,
        renormalized_direction: renormalize,
    })
}

/// `|x|^p` with exact fast paths for `p = 1` and `p = 2`.
pub fn pow_abs(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else if p == 1.0 {
        x.abs()
    } else {
        libm::pow(x.abs(), p)
    }
}

fn check_order(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::domain(format!("order p = {p} must be a finite number >= 1")));
    }
    Ok(())
}

/// One piece of the monotone coupling: `mass` moves from entry `source` of
/// `a` to entry `target` of `b`, both original indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

fn sorted_view(m: &Projected1D) -> Result<Projected1D> {
    if m.is_empty() {
        return Err(Error::domain("empty measure"));
    }
    Ok(if m.sorted { m.clone() } else { m.clone().into_sorted() })
}

/// Merge of the two cumulative weight partitions of `[0, 1]`: calls `f(i, j,
/// mass)` for every quantile piece, with `i`, `j` positions in the sorted
/// views.
fn merge_quantiles(a: &Projected1D, b: &Projected1D, mut f: impl FnMut(usize, usize, f64)) {
    let cumulative = |m: &Projected1D| {
        let mut acc = 0.0;
        let mut c: Vec<f64> = (0..m.len())
            .map(|i| {
                acc += m.weight(i);
                acc
            })
            .collect();
        // both partitions end exactly at 1
        *c.last_mut().unwrap() = 1.0;
        c
    };
    let (ca, cb) = (cumulative(a), cumulative(b));
    let (mut i, mut j, mut prev) = (0, 0, 0.0);
    while i < ca.len() && j < cb.len() {
        let next = ca[i].min(cb[j]);
        if next > prev {
            f(i, j, next - prev);
            prev = next;
        }
        if ca[i] <= next {
            i += 1;
        }
        if cb[j] <= next {
            j += 1;
        }
    }
}

/// `W_p^p(a, b) = ∫₀¹ |F_a⁻¹(z) − F_b⁻¹(z)|^p dz`.
///
/// Equal-size uniform measures take the sort-and-pair path; anything else
/// integrates the piecewise-constant quantile difference exactly.
pub fn wasserstein_1d(a: &Projected1D, b: &Projected1D, p: f64) -> Result<f64> {
    check_order(p)?;
    let a = sorted_view(a)?;
    let b = sorted_view(b)?;
    if a.weights.is_none() && b.weights.is_none() && a.len() == b.len() {
        return Ok(sorted_uniform_cost(&a.values, &b.values, p));
    }
    Ok(quantile_merge_cost(&a, &b, p))
}

/// Sum over sorted pairs divided by `n`; inputs must be sorted and equal length.
pub fn sorted_uniform_cost(a: &[f64], b: &[f64], p: f64) -> f64 {
    let total: f64 = a.iter().zip(b).map(|(x, y)| pow_abs(x - y, p)).sum();
    total / a.len() as f64
}

/// General path: exact integral over the merged quantile partition.
pub fn quantile_merge_cost(a: &Projected1D, b: &Projected1D, p: f64) -> f64 {
    let a = if a.sorted { a.clone() } else { a.clone().into_sorted() };
    let b = if b.sorted { b.clone() } else { b.clone().into_sorted() };
    let mut total = 0.0;
    merge_quantiles(&a, &b, |i, j, mass| total += mass * pow_abs(a.values[i] - b.values[j], p));
    total
}

/// Monotone (quantile) coupling between `a` and `b`, as original-index pairs.
pub fn sorted_pairing(a: &Projected1D, b: &Projected1D) -> Result<Vec<Pair>> {
    let a = sorted_view(a)?;
    let b = sorted_view(b)?;
    if a.weights.is_none() && b.weights.is_none() && a.len() == b.len() {
        let mass = 1.0 / a.len() as f64;
        return Ok(a.order.iter().zip(&b.order).map(|(&s, &t)| Pair { source: s, target: t, mass }).collect());
    }
    let mut pairs = Vec::new();
    merge_quantiles(&a, &b, |i, j, mass| pairs.push(Pair { source: a.order[i], target: b.order[j], mass }));
    Ok(pairs)
}

/// Monotone matching for equal-size uniform measures: `m[i]` is the index in
/// `b` paired with entry `i` of `a`. Ties are broken by original index.
pub fn monotone_matching(a: &[f64], b: &[f64]) -> Result<Vec<usize>> {
    if a.len() != b.len() {
        return Err(Error::Shape { expected: a.len(), got: b.len() });
    }
    if a.is_empty() {
        return Err(Error::domain("empty measure"));
    }
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&x, &y| v[x].total_cmp(&v[y]).then(x.cmp(&y)));
        idx
    };
    let (ra, rb) = (rank(a), rank(b));
    let mut m = vec![0; a.len()];
    for (ia, ib) in ra.into_iter().zip(rb) {
        m[ia] = ib;
    }
    Ok(m)
}

/// Cost of a coupling: `Σ mass |a_s − b_t|^p` over original-index pairs.
pub fn coupling_cost(a: &Projected1D, b: &Projected1D, pairs: &[Pair], p: f64) -> f64 {
    let pos = |m: &Projected1D, i: usize| -> f64 {
        if m.sorted {
            let k = m.order.iter().position(|&o| o == i).unwrap();
            m.values[k]
        } else {
            m.values[i]
        }
    };
    pairs.iter().map(|q| q.mass * pow_abs(pos(a, q.source) - pos(b, q.target), p)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn u(values: &[f64]) -> Projected1D {
        Projected1D::uniform(values.to_vec())
    }

    /// Minimum over all permutations, by Heap's algorithm.
    fn brute_force(a: &[f64], b: &[f64], p: f64) -> f64 {
        let n = a.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let cost = |perm: &[usize]| a.iter().zip(perm).map(|(x, &j)| pow_abs(x - b[j], p)).sum::<f64>() / n as f64;
        let mut best = cost(&perm);
        let mut c = vec![0usize; n];
        let mut i = 0;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    perm.swap(0, i)
                } else {
                    perm.swap(c[i], i)
                }
                best = best.min(cost(&perm));
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        best
    }

    #[test]
    fn examples() {
        assert_eq!(wasserstein_1d(&u(&[1.0, 2.0]), &u(&[2.0, 1.0]), 2.0).unwrap(), 0.0);
        for p in [1.0, 1.5, 2.0, 3.0] {
            assert_eq!(wasserstein_1d(&u(&[0.0]), &u(&[1.0]), p).unwrap(), 1.0);
        }
        assert_eq!(wasserstein_1d(&u(&[0.0, 2.0]), &u(&[1.0, 3.0]), 2.0).unwrap(), 1.0);
        assert_eq!(wasserstein_1d(&u(&[0.0, 1.0]), &u(&[0.5]), 1.0).unwrap(), 0.5);
        assert!(wasserstein_1d(&u(&[]), &u(&[1.0]), 1.0).is_err());
        assert!(wasserstein_1d(&u(&[0.0]), &u(&[1.0]), 0.5).is_err());
    }

    #[test]
    fn projection_examples() {
        let cloud = PointCloud::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let pr = project(&cloud, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(pr.values, vec![1.0, 0.0]);
        assert!(!pr.renormalized_direction);
        let pr = project(&cloud, &[2.0, 0.0, 0.0]).unwrap();
        assert_eq!(pr.values, vec![1.0, 0.0]);
        assert!(pr.renormalized_direction);
        assert!(matches!(project(&cloud, &[1.0, 0.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn pairing_examples() {
        let a = u(&[3.0, 1.0, 2.0]);
        let b = u(&[10.0, 30.0, 20.0]);
        let pairs = sorted_pairing(&a, &b).unwrap();
        let as_tuples: Vec<(usize, usize)> = pairs.iter().map(|q| (q.source, q.target)).collect();
        assert_eq!(as_tuples, vec![(1, 0), (2, 2), (0, 1)]);
        assert_eq!(monotone_matching(&a.values, &b.values).unwrap(), vec![1, 0, 2]);
    }

    #[test]
    fn ties_follow_original_index() {
        let a = u(&[1.0, 1.0, 1.0]);
        let b = u(&[5.0, 4.0, 6.0]);
        assert_eq!(monotone_matching(&a.values, &b.values).unwrap(), vec![1, 0, 2]);
    }

    #[test]
    fn weighted_path_examples() {
        let a = Projected1D::weighted(vec![0.0, 1.0], vec![0.25, 0.75]).unwrap();
        let b = u(&[0.0]);
        // 3/4 of the mass travels a distance of 1
        assert!((wasserstein_1d(&a, &b, 2.0).unwrap() - 0.75).abs() < 1e-15);
        let pairs = sorted_pairing(&a, &b).unwrap();
        assert_eq!(pairs.len(), 2);
        assert!((pairs.iter().map(|q| q.mass).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn brute_force_agreement_small_n() {
        use rand::Rng;
        let mut rng = crate::rng::seeded_rng(8);
        for _ in 0..200 {
            let n = rng.random_range(1..=6);
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            for p in [1.0, 2.0] {
                let fast = wasserstein_1d(&u(&a), &u(&b), p).unwrap();
                assert!((fast - brute_force(&a, &b, p)).abs() < 1e-12);
            }
        }
    }

    fn values(n: core::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-100.0f64..100.0, n)
    }

    proptest! {
        #[test]
        fn fast_and_general_paths_agree(a in values(1..=16), shift in -5.0f64..5.0, p in 1.0f64..4.0) {
            let b: Vec<f64> = a.iter().rev().map(|x| x * 0.7 + shift).collect();
            let fast = wasserstein_1d(&u(&a), &u(&b), p).unwrap();
            let w = vec![1.0 / a.len() as f64; a.len()];
            let aw = Projected1D::weighted(a.clone(), w.clone()).unwrap();
            let bw = Projected1D::weighted(b.clone(), w).unwrap();
            let general = quantile_merge_cost(&aw, &bw, p);
            prop_assert!((fast - general).abs() <= 1e-12 * fast.max(1.0));
        }

        #[test]
        fn metric_axioms(a in values(1..=16), b in values(1..=16)) {
            let n = a.len().min(b.len());
            let (a, b) = (&a[..n], &b[..n]);
            let ab = wasserstein_1d(&u(a), &u(b), 2.0).unwrap();
            let ba = wasserstein_1d(&u(b), &u(a), 2.0).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ab >= 0.0);
            let mut sa = a.to_vec();
            sa.sort_by(f64::total_cmp);
            let mut sb = b.to_vec();
            sb.sort_by(f64::total_cmp);
            prop_assert_eq!(ab == 0.0, sa == sb);
            let mut reversed = a.to_vec();
            reversed.reverse();
            prop_assert_eq!(wasserstein_1d(&u(a), &u(&reversed), 2.0).unwrap(), 0.0);
        }

        #[test]
        fn translation_invariance(a in values(1..=16), c in -50.0f64..50.0) {
            let b: Vec<f64> = a.iter().map(|x| x * 0.5 - 1.0).collect();
            let base = wasserstein_1d(&u(&a), &u(&b), 1.0).unwrap();
            let at: Vec<f64> = a.iter().map(|x| x + c).collect();
            let bt: Vec<f64> = b.iter().map(|x| x + c).collect();
            let shifted = wasserstein_1d(&u(&at), &u(&bt), 1.0).unwrap();
            prop_assert!((base - shifted).abs() <= 1e-12 * base.max(1.0) * 100.0);
        }

        #[test]
        fn pairing_conserves_mass_and_reproduces_cost(
            a in values(1..=12),
            b in values(1..=12),
            wa in proptest::collection::vec(0.01f64..1.0, 12),
            wb in proptest::collection::vec(0.01f64..1.0, 12),
        ) {
            let normalize = |w: &[f64]| { let s: f64 = w.iter().sum(); w.iter().map(|x| x / s).collect::<Vec<_>>() };
            let wa = normalize(&wa[..a.len()]);
            let wb = normalize(&wb[..b.len()]);
            let pa = Projected1D::weighted(a.clone(), wa.clone()).unwrap();
            let pb = Projected1D::weighted(b.clone(), wb.clone()).unwrap();
            let pairs = sorted_pairing(&pa, &pb).unwrap();
            let mut out = vec![0.0; a.len()];
            let mut inn = vec![0.0; b.len()];
            for q in &pairs {
                out[q.source] += q.mass;
                inn[q.target] += q.mass;
            }
            for (o, w) in out.iter().zip(&wa) { prop_assert!((o - w).abs() < 1e-12); }
            for (i, w) in inn.iter().zip(&wb) { prop_assert!((i - w).abs() < 1e-12); }
            let cost = coupling_cost(&pa, &pb, &pairs, 2.0);
            let w = wasserstein_1d(&pa, &pb, 2.0).unwrap();
            prop_assert!((cost - w).abs() <= 1e-12 * w.max(1.0));
        }

        #[test]
        fn projection_is_linear_and_lipschitz(
            pts in proptest::collection::vec(-10.0f64..10.0, 3..=30),
            dir in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            prop_assume!(norm(&dir) > 1e-3);
            let n = pts.len() / 3 * 3;
            let cloud = PointCloud::new(3, pts[..n].to_vec()).unwrap();
            let unit: Vec<f64> = dir.iter().map(|x| x / norm(&dir)).collect();
            let neg: Vec<f64> = unit.iter().map(|x| -x).collect();
            let a = project(&cloud, &unit).unwrap();
            let b = project(&cloud, &neg).unwrap();
            let max_norm = cloud.rows().map(norm).fold(0.0, f64::max);
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert_eq!(*x, -*y);
                prop_assert!(x.abs() <= max_norm + 1e-12);
            }
        }
    }
}
