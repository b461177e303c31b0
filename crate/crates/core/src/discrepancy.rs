//! Spherical cap discrepancy on S².
//!
//! `sup_{w,t} |#{θᵢ : ⟨w,θᵢ⟩ ≤ t}/L − σ(C(w,t))|`, evaluated over a finite
//! family of candidate caps. Normals come from the points (±θᵢ) and from
//! pairs (±normalize(θᵢ+θⱼ), ±normalize(θᵢ×θⱼ)); thresholds are the projected
//! values, each taken closed and open, plus ±1. The result is a lower bound
//! on the supremum that is exact whenever an extremal cap has at most two
//! points on its boundary.

use alloc::vec::Vec;

use crate::linalg::{cross3, dot, normalize};
use crate::sphere::SpherePointSet;
use crate::{Error, Result};

/// Threshold offset realizing an open cap boundary.
pub const OPEN_EPS: f64 = 1e-9;

/// Largest point count accepted by [`spherical_cap_discrepancy`].
pub const CAP_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundarySide {
    Closed,
    Open,
}

/// The cap `{x : ⟨normal, x⟩ ≤ threshold}`; an open cap uses
/// `threshold − OPEN_EPS` as its effective threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapCandidate {
    pub normal: [f64; 3],
    pub threshold: f64,
    pub boundary_side: BoundarySide,
}

impl CapCandidate {
    pub fn effective_threshold(&self) -> f64 {
        match self.boundary_side {
            BoundarySide::Closed => self.threshold,
            BoundarySide::Open => (self.threshold - OPEN_EPS).max(-1.0),
        }
    }

    /// Fraction of `points` inside the cap.
    pub fn empirical_mass(&self, points: &SpherePointSet) -> f64 {
        let t = self.effective_threshold();
        let inside = points.rows().filter(|p| dot(&self.normal, p) <= t).count();
        inside as f64 / points.len() as f64
    }

    /// `|F_L(C) − σ(C)|` for this cap.
    pub fn local_discrepancy(&self, points: &SpherePointSet) -> f64 {
        let measure = (1.0 + self.effective_threshold()) / 2.0;
        (self.empirical_mass(points) - measure).abs()
    }
}

/// Uniform measure of `{x ∈ S² : ⟨w,x⟩ ≤ t}`, which is `(1+t)/2` for every unit `w`.
pub fn cap_measure(t: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&t) {
        return Err(Error::domain(alloc::format!("cap threshold {t} outside [-1, 1]")));
    }
    Ok((1.0 + t) / 2.0)
}

/// Largest local discrepancy over the candidate family together with the
/// cap attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapDiscrepancy {
    pub value: f64,
    pub witness: CapCandidate,
}

struct Best {
    value: f64,
    witness: CapCandidate,
}

impl Best {
    fn offer(&mut self, value: f64, normal: &[f64; 3], threshold: f64, side: BoundarySide) {
        if value > self.value {
            self.value = value;
            self.witness = CapCandidate { normal: *normal, threshold, boundary_side: side };
        }
    }
}

/// Scans every threshold for one normal. `sorted` holds the ascending
/// projections of the points onto `normal`.
fn scan_normal(sorted: &[f64], normal: &[f64; 3], best: &mut Best) {
    let n = sorted.len() as f64;
    let mut k = 0;
    while k < sorted.len() {
        let t = sorted[k].clamp(-1.0, 1.0);
        // closed: every point with projection ≤ t
        let mut end = k;
        while end < sorted.len() && sorted[end] <= sorted[k] {
            end += 1;
        }
        best.offer((end as f64 / n - (1.0 + t) / 2.0).abs(), normal, t, BoundarySide::Closed);
        // open: effective threshold t − ε
        let te = (t - OPEN_EPS).max(-1.0);
        let below = sorted.partition_point(|&s| s <= te);
        best.offer((below as f64 / n - (1.0 + te) / 2.0).abs(), normal, t, BoundarySide::Open);
        k = end;
    }
    let at_south = sorted.partition_point(|&s| s <= -1.0);
    best.offer(at_south as f64 / n, normal, -1.0, BoundarySide::Closed);
    let at_north = sorted.partition_point(|&s| s <= 1.0);
    best.offer((at_north as f64 / n - 1.0).abs(), normal, 1.0, BoundarySide::Closed);
}

fn check(points: &SpherePointSet) -> Result<()> {
    if points.dim() != 3 {
        return Err(Error::UnsupportedDimension { dim: points.dim(), supported: "3" });
    }
    if points.len() > CAP_LIMIT {
        return Err(Error::SizeLimit {
            what: "spherical cap discrepancy point count",
            got: points.len(),
            limit: CAP_LIMIT,
        });
    }
    Ok(())
}

/// Candidate-family spherical cap discrepancy with its witness cap.
pub fn spherical_cap_discrepancy_witness(points: &SpherePointSet) -> Result<CapDiscrepancy> {
    check(points)?;
    let rows: Vec<[f64; 3]> = points.rows().map(|r| [r[0], r[1], r[2]]).collect();
    let mut best = Best {
        value: -1.0,
        witness: CapCandidate { normal: [0.0, 0.0, 1.0], threshold: 1.0, boundary_side: BoundarySide::Closed },
    };
    let mut values = Vec::with_capacity(rows.len());
    let mut flipped = Vec::with_capacity(rows.len());

    let mut visit = |w: [f64; 3], best: &mut Best| {
        values.clear();
        values.extend(rows.iter().map(|p| dot(&w, p)));
        values.sort_unstable_by(f64::total_cmp);
        scan_normal(&values, &w, best);
        flipped.clear();
        flipped.extend(values.iter().rev().map(|v| -v));
        scan_normal(&flipped, &[-w[0], -w[1], -w[2]], best);
    };

    for p in &rows {
        visit(*p, &mut best);
    }
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            let mut sum = [rows[i][0] + rows[j][0], rows[i][1] + rows[j][1], rows[i][2] + rows[j][2]];
            if normalize(&mut sum) > 1e-12 {
                visit(sum, &mut best);
            }
            let mut cross = cross3(&rows[i], &rows[j]);
            if normalize(&mut cross) > 1e-12 {
                visit(cross, &mut best);
            }
        }
    }
    Ok(CapDiscrepancy { value: best.value.clamp(0.0, 1.0), witness: best.witness })
}

/// Candidate-family spherical cap discrepancy of a point set on S².
pub fn spherical_cap_discrepancy(points: &SpherePointSet) -> Result<f64> {
    spherical_cap_discrepancy_witness(points).map(|d| d.value)
}

/// Fit of `D(L) ≤ C · L^{-3/4} √(log L)` over a discrepancy curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEnvelope {
    /// Smallest constant that bounds every sample.
    pub constant: f64,
    /// Least-squares slope of `log(D / rate)` against `log L`; near zero or
    /// negative when the curve decays at least as fast as the rate.
    pub ratio_slope: f64,
}

/// `L^{-3/4} √(ln L)`.
pub fn cap_rate(len: usize) -> f64 {
    let l = len as f64;
    libm::pow(l, -0.75) * libm::sqrt(libm::log(l))
}

/// Fits [`RateEnvelope`] to `(L, D(L))` samples with `L ≥ 2`.
pub fn fit_rate_envelope(samples: &[(usize, f64)]) -> Result<RateEnvelope> {
    if samples.len() < 2 || samples.iter().any(|&(l, d)| l < 2 || !(d > 0.0)) {
        return Err(Error::domain("envelope fit needs at least two samples with L >= 2 and D > 0"));
    }
    let pts: Vec<(f64, f64)> =
        samples.iter().map(|&(l, d)| (libm::log(l as f64), libm::log(d / cap_rate(l)))).collect();
    let constant = pts.iter().map(|&(_, r)| libm::exp(r)).fold(0.0, f64::max);
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("envelope fit needs at least two distinct L"));
    }
    Ok(RateEnvelope { constant, ratio_slope: sxy / sxx })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmc::CubeRandomization;
    use crate::qmc::{halton_generate, sobol_generate};
    use crate::sphere::{
        build_construction, equal_area_map, gaussian_map, pushforward_randomized, random_rotation_of, random_uniform,
        scaled_map_baseline, spiral_points, Construction, OptimizerConfig, PushforwardMap, SpherePointSet,
    };
    use alloc::vec;

    fn set(rows: Vec<f64>) -> SpherePointSet {
        SpherePointSet::from_rows(3, rows, Construction::Spiral).unwrap()
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    #[test]
    fn cap_measure_examples() {
        assert_eq!(cap_measure(-1.0).unwrap(), 0.0);
        assert_eq!(cap_measure(1.0).unwrap(), 1.0);
        assert_eq!(cap_measure(0.0).unwrap(), 0.5);
        assert!(cap_measure(1.5).is_err());
    }

    #[test]
    fn hand_examples() {
        let one = spherical_cap_discrepancy(&set(vec![0.0, 0.0, 1.0])).unwrap();
        assert!((one - 1.0).abs() < 1e-6, "{one}");
        let pair = spherical_cap_discrepancy(&set(vec![0.0, 0.0, 1.0, 0.0, 0.0, -1.0])).unwrap();
        assert!((pair - 0.5).abs() < 1e-6, "{pair}");
    }

    #[test]
    fn witness_reproduces_value() {
        let s = spiral_points(37).unwrap();
        let d = spherical_cap_discrepancy_witness(&s).unwrap();
        assert!((d.witness.local_discrepancy(&s) - d.value).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let g = gaussian_map(&sobol_generate(4, 10, 2).unwrap()).unwrap();
        assert!(matches!(spherical_cap_discrepancy(&g), Err(Error::UnsupportedDimension { .. })));
        let big = spiral_points(CAP_LIMIT + 1).unwrap();
        assert!(matches!(spherical_cap_discrepancy(&big), Err(Error::SizeLimit { .. })));
    }

    /// Dense random-cap search; its value never exceeds the candidate family's.
    #[test]
    fn random_caps_never_beat_the_candidate_family() {
        use rand::Rng;
        let s = random_uniform(12, 3, 3).unwrap();
        let d = spherical_cap_discrepancy(&s).unwrap();
        let mut rng = crate::rng::seeded_rng(11);
        let normals = random_uniform(20_000, 3, 99).unwrap();
        for w in normals.rows() {
            let t: f64 = rng.random_range(-1.0..1.0);
            let c = CapCandidate { normal: [w[0], w[1], w[2]], threshold: t, boundary_side: BoundarySide::Closed };
            assert!(c.local_discrepancy(&s) <= d + 1e-9);
        }
    }

    #[test]
    fn rotation_invariance() {
        let s = spiral_points(50).unwrap();
        let d = spherical_cap_discrepancy(&s).unwrap();
        for seed in 0..5 {
            let r = spherical_cap_discrepancy(&random_rotation_of(&s, seed).unwrap()).unwrap();
            assert!((r - d).abs() < 1e-9, "{r} vs {d}");
        }
    }

    #[test]
    fn spiral_beats_random_points() {
        let spiral = spherical_cap_discrepancy(&spiral_points(100).unwrap()).unwrap();
        let wins = (0..20)
            .filter(|&s| spiral < spherical_cap_discrepancy(&random_uniform(100, 3, s).unwrap()).unwrap())
            .count();
        assert!(wins > 10, "{wins}");
    }

    #[test]
    fn scaled_baseline_is_worse_than_spiral() {
        let base = scaled_map_baseline(&halton_generate(3, 100).unwrap()).unwrap();
        assert!(
            spherical_cap_discrepancy(&base).unwrap()
                > spherical_cap_discrepancy(&spiral_points(100).unwrap()).unwrap()
        );
    }

    #[test]
    fn construction_ordering() {
        let config = OptimizerConfig::default();
        for l in [10usize, 50, 100] {
            let d = |c| spherical_cap_discrepancy(&build_construction(c, 3, l, &config).unwrap()).unwrap();
            let spiral = d(Construction::Spiral);
            let ea = d(Construction::EqualArea);
            let gm = d(Construction::GaussianMap);
            let rnd = median(
                (0..20).map(|s| spherical_cap_discrepancy(&random_uniform(l, 3, s).unwrap()).unwrap()).collect(),
            );
            assert!(spiral <= 1.1 * ea, "L={l} spiral {spiral} ea {ea}");
            assert!(ea <= 1.1 * gm, "L={l} ea {ea} gm {gm}");
            assert!(gm <= 1.1 * rnd, "L={l} gm {gm} random {rnd}");
        }
    }

    #[test]
    fn pushforward_scramble_keeps_low_discrepancy() {
        for l in [50usize, 100] {
            let base = spherical_cap_discrepancy(&equal_area_map(&sobol_generate(2, l, 0).unwrap()).unwrap()).unwrap();
            let ok = (0..20)
                .filter(|&s| {
                    let r = pushforward_randomized(PushforwardMap::EqualArea, CubeRandomization::Scramble, 3, l, s)
                        .unwrap();
                    spherical_cap_discrepancy(&r).unwrap() <= 1.5 * base
                })
                .count();
            assert!(ok > 10, "L={l}: {ok}/20");
        }
    }

    #[test]
    fn rate_envelope_fit() {
        let exact: Vec<(usize, f64)> = [16, 64, 256].iter().map(|&l| (l, 0.5 * cap_rate(l))).collect();
        let fit = fit_rate_envelope(&exact).unwrap();
        assert!((fit.constant - 0.5).abs() < 1e-12 && fit.ratio_slope.abs() < 1e-12);
        let slow: Vec<(usize, f64)> = [16, 64, 256].iter().map(|&l| (l, libm::pow(l as f64, -0.25))).collect();
        assert!(fit_rate_envelope(&slow).unwrap().ratio_slope > 0.2);
        assert!(fit_rate_envelope(&[(16, 0.1)]).is_err());
        assert!(fit_rate_envelope(&[(16, 0.1), (16, 0.2)]).is_err());
    }

    #[test]
    fn spiral_meets_rate_envelope() {
        let curve: Vec<(usize, f64)> = [16, 32, 64, 128, 256, 512]
            .iter()
            .map(|&l| (l, spherical_cap_discrepancy(&spiral_points(l).unwrap()).unwrap()))
            .collect();
        let fit = fit_rate_envelope(&curve).unwrap();
        assert!(fit.ratio_slope <= 0.1, "{fit:?} {curve:?}");
    }
}
