//! Sliced Wasserstein estimators.
//!
//! `SW_p^p(μ, ν) ≈ (1/L) Σ_l W_p^p(θ_l♯μ, θ_l♯ν)` where the directions
//! `θ_1..θ_L` are i.i.d. uniform (Monte Carlo), a deterministic QMC point set
//! (QSW) or a randomized QMC point set (RQSW). Gradients with respect to the
//! support points and confidence intervals over RQSW replicates are here too.
//!
//! Scheme names accepted by [`Scheme::from_str`](core::str::FromStr):
//!
//! | Name | Scheme |
//! |------|--------|
//! | `SW`, `mc` | Monte Carlo |
//! | `GQSW`, `EQSW`, `SQSW`, `DQSW`, `CQSW` | QSW with Gaussian map, equal-area, spiral, max-distance, min-Coulomb |
//! | `RGQSW`, `REQSW` | scrambled Sobol pushed to the sphere |
//! | `RGQSW-shift`, `REQSW-shift` | shifted Sobol pushed to the sphere |
//! | `RRGQSW`, `RREQSW`, `RSQSW`, `RDQSW`, `RCQSW` | random rotation of a QMC set |
//!
//! Long forms such as `qsw:spiral`, `rqsw-rotation:min_coulomb` and
//! `rqsw-pushforward:equal_area:shift` are accepted too.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::normal::inverse_normal_cdf;
use crate::ot1d::{monotone_matching, project, sorted_uniform_cost, wasserstein_1d, PointCloud};
use crate::qmc::CubeRandomization;
use crate::rng::{derive_seed, seeded_rng, stream};
use crate::sphere::{
    cached_construction, pushforward_randomized, random_rotation_of, random_uniform, Construction, OptimizerConfig,
    PointSetCache, PushforwardMap, SpherePointSet, SphereRandomization,
};
pub use crate::sphere::{CacheKey, MemoryCache, NoCache};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    MonteCarlo,
    Qsw(Construction),
    RqswPushforward { map: PushforwardMap, randomization: CubeRandomization },
    RqswRotation(Construction),
}

impl Scheme {
    /// The seven randomized variants with scrambled push-forward.
    pub const RQSW_VARIANTS: [Scheme; 7] = [
        Scheme::RqswPushforward { map: PushforwardMap::GaussianMap, randomization: CubeRandomization::Scramble },
        Scheme::RqswRotation(Construction::GaussianMap),
        Scheme::RqswPushforward { map: PushforwardMap::EqualArea, randomization: CubeRandomization::Scramble },
        Scheme::RqswRotation(Construction::EqualArea),
        Scheme::RqswRotation(Construction::Spiral),
        Scheme::RqswRotation(Construction::MaxDistance),
        Scheme::RqswRotation(Construction::MinCoulomb),
    ];

    pub fn is_stochastic(self) -> bool {
        !matches!(self, Scheme::Qsw(_))
    }

    pub fn is_randomized_qmc(self) -> bool {
        matches!(self, Scheme::RqswPushforward { .. } | Scheme::RqswRotation(_))
    }

    /// Short name (`SW`, `CQSW`, `RCQSW`, ...) when one exists, else the long form.
    pub fn short_name(self) -> String {
        let letter = |c: Construction| match c {
            Construction::GaussianMap => Some("G"),
            Construction::EqualArea => Some("E"),
            Construction::Spiral => Some("S"),
            Construction::MaxDistance => Some("D"),
            Construction::MinCoulomb => Some("C"),
            _ => None,
        };
        match self {
            Scheme::MonteCarlo => "SW".into(),
            Scheme::Qsw(c) => letter(c).map_or_else(|| self.to_string(), |l| format!("{l}QSW")),
            Scheme::RqswRotation(c) => match c {
                Construction::GaussianMap | Construction::EqualArea => format!("RR{}QSW", letter(c).unwrap()),
                _ => letter(c).map_or_else(|| self.to_string(), |l| format!("R{l}QSW")),
            },
            Scheme::RqswPushforward { map, randomization } => {
                let l = letter(map.construction()).unwrap();
                match randomization {
                    CubeRandomization::Scramble => format!("R{l}QSW"),
                    _ => format!("R{l}QSW-shift"),
                }
            }
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            Scheme::Qsw(Construction::RandomUniform) => {
                Err(Error::config("random_uniform directions are the Monte Carlo scheme"))
            }
            Scheme::RqswRotation(c) if !Construction::QMC.contains(&c) => {
                Err(Error::config(format!("random rotation needs a QMC construction, got {}", c.name())))
            }
            Scheme::RqswPushforward { randomization: CubeRandomization::None, .. } => {
                Err(Error::config("push-forward randomization must be scramble or shift"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::MonteCarlo => f.write_str("mc"),
            Scheme::Qsw(c) => write!(f, "qsw:{}", c.name()),
            Scheme::RqswRotation(c) => write!(f, "rqsw-rotation:{}", c.name()),
            Scheme::RqswPushforward { map, randomization } => {
                let r = match randomization {
                    CubeRandomization::Scramble => "scramble",
                    CubeRandomization::Shift => "shift",
                    CubeRandomization::None => "none",
                };
                write!(f, "rqsw-pushforward:{}:{r}", map.construction().name())
            }
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let short = |l: &str| match l {
            "G" => Some(Construction::GaussianMap),
            "E" => Some(Construction::EqualArea),
            "S" => Some(Construction::Spiral),
            "D" => Some(Construction::MaxDistance),
            "C" => Some(Construction::MinCoulomb),
            _ => None,
        };
        let map_of = |c: Construction| match c {
            Construction::GaussianMap => Some(PushforwardMap::GaussianMap),
            Construction::EqualArea => Some(PushforwardMap::EqualArea),
            _ => None,
        };
        let bad = || Error::config(format!("unknown scheme '{s}'"));
        let upper = s.to_ascii_uppercase();

        let scheme = if upper == "SW" || upper == "MC" {
            Scheme::MonteCarlo
        } else if let Some(rest) = upper.strip_suffix("QSW-SHIFT") {
            let c = rest.strip_prefix('R').and_then(short).ok_or_else(bad)?;
            Scheme::RqswPushforward { map: map_of(c).ok_or_else(bad)?, randomization: CubeRandomization::Shift }
        } else if let Some(rest) = upper.strip_suffix("QSW").filter(|r| !r.is_empty() && r.len() <= 2) {
            match rest.len() {
                1 => Scheme::Qsw(short(rest).ok_or_else(bad)?),
                _ if rest == "RG" || rest == "RE" => Scheme::RqswPushforward {
                    map: map_of(short(&rest[1..]).unwrap()).unwrap(),
                    randomization: CubeRandomization::Scramble,
                },
                _ => Scheme::RqswRotation(short(rest.strip_prefix('R').ok_or_else(bad)?).ok_or_else(bad)?),
            }
        } else if upper == "RRGQSW" || upper == "RREQSW" {
            Scheme::RqswRotation(short(&upper[2..3]).unwrap())
        } else {
            let parts: Vec<&str> = s.split(':').collect();
            let construction = |name: &str| Construction::from_name(name).ok_or_else(bad);
            match parts.as_slice() {
                ["qsw", c] => Scheme::Qsw(construction(c)?),
                ["rqsw-rotation", c] => Scheme::RqswRotation(construction(c)?),
                ["rqsw-pushforward", c, r] => Scheme::RqswPushforward {
                    map: map_of(construction(c)?).ok_or_else(bad)?,
                    randomization: match *r {
                        "scramble" => CubeRandomization::Scramble,
                        "shift" => CubeRandomization::Shift,
                        _ => return Err(bad()),
                    },
                },
                _ => return Err(bad()),
            }
        };
        scheme.validate()?;
        Ok(scheme)
    }
}

/// Order, projection count, direction scheme and seed of an estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSpec {
    pub p: f64,
    pub projections: usize,
    pub scheme: Scheme,
    /// Required for Monte Carlo and RQSW schemes.
    pub seed: Option<u64>,
    /// Settings for the energy-optimized constructions.
    pub optimizer: OptimizerConfig,
}

impl EstimatorSpec {
    pub fn new(p: f64, projections: usize, scheme: Scheme) -> Self {
        Self { p, projections, scheme, seed: None, optimizer: OptimizerConfig::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return Err(Error::config(format!("order p = {} must be >= 1", self.p)));
        }
        if self.projections == 0 {
            return Err(Error::config("projection count L must be at least 1"));
        }
        self.scheme.validate()?;
        if self.scheme.is_stochastic() && self.seed.is_none() {
            return Err(Error::config(format!("scheme {} needs a seed", self.scheme)));
        }
        Ok(())
    }
}

/// Where the directions of an estimate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectionProvenance {
    pub construction: Construction,
    pub randomization: SphereRandomization,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwEstimate {
    /// Estimate of `SW_p^p`.
    pub value: f64,
    /// `W_p^p(θ_l♯μ, θ_l♯ν)` for each direction, in direction order.
    pub per_projection: Vec<f64>,
    pub spec: EstimatorSpec,
    pub provenance: DirectionProvenance,
}

impl SwEstimate {
    /// `SW_p = (SW_p^p)^{1/p}`.
    pub fn distance(&self) -> f64 {
        libm::pow(self.value, 1.0 / self.spec.p)
    }
}

/// Directions for `spec` in dimension `dim`. Deterministic sets go through
/// `cache`; stochastic ones are drawn from `derive_seed(seed, DIRECTIONS)`.
pub fn resolve_directions(spec: &EstimatorSpec, dim: usize, cache: &mut dyn PointSetCache) -> Result<SpherePointSet> {
    spec.validate()?;
    let l = spec.projections;
    let seed = spec.seed.map(|s| derive_seed(s, stream::DIRECTIONS));
    match spec.scheme {
        Scheme::MonteCarlo => random_uniform(l, dim, seed.unwrap()),
        Scheme::Qsw(c) => cached_construction(c, dim, l, &spec.optimizer, cache),
        Scheme::RqswPushforward { map, randomization } => {
            pushforward_randomized(map, randomization, dim, l, seed.unwrap())
        }
        Scheme::RqswRotation(c) => {
            let base = cached_construction(c, dim, l, &spec.optimizer, cache)?;
            random_rotation_of(&base, seed.unwrap())
        }
    }
}

fn check_pair(mu: &PointCloud, nu: &PointCloud) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(Error::Shape { expected: mu.dim(), got: nu.dim() });
    }
    Ok(())
}

/// Per-direction `W_p^p` terms for a given direction set.
pub fn per_projection_costs(mu: &PointCloud, nu: &PointCloud, directions: &SpherePointSet, p: f64) -> Result<Vec<f64>> {
    check_pair(mu, nu)?;
    if directions.dim() != mu.dim() {
        return Err(Error::Shape { expected: mu.dim(), got: directions.dim() });
    }
    let fast = mu.is_uniform() && nu.is_uniform() && mu.len() == nu.len();
    let mut out = Vec::with_capacity(directions.len());
    for theta in directions.rows() {
        let mut a = project(mu, theta)?;
        let mut b = project(nu, theta)?;
        if fast {
            a.values.sort_unstable_by(f64::total_cmp);
            b.values.sort_unstable_by(f64::total_cmp);
            out.push(sorted_uniform_cost(&a.values, &b.values, p));
        } else {
            a.sort();
            b.sort();
            out.push(wasserstein_1d(&a, &b, p)?);
        }
    }
    Ok(out)
}

fn provenance(directions: &SpherePointSet) -> DirectionProvenance {
    DirectionProvenance {
        construction: directions.construction,
        randomization: directions.randomization,
        seed: directions.seed,
    }
}

/// Equal-weight average over an explicit direction set; terms are summed in
/// index order.
pub fn estimate_with_directions(
    mu: &PointCloud,
    nu: &PointCloud,
    spec: &EstimatorSpec,
    directions: &SpherePointSet,
) -> Result<SwEstimate> {
    let per_projection = per_projection_costs(mu, nu, directions, spec.p)?;
    let value = per_projection.iter().sum::<f64>() / per_projection.len() as f64;
    Ok(SwEstimate { value, per_projection, spec: *spec, provenance: provenance(directions) })
}

/// [`estimate_sw`] with deterministic point sets served from `cache`.
pub fn estimate_sw_cached(
    mu: &PointCloud,
    nu: &PointCloud,
    spec: &EstimatorSpec,
    cache: &mut dyn PointSetCache,
) -> Result<SwEstimate> {
    check_pair(mu, nu)?;
    let directions = resolve_directions(spec, mu.dim(), cache)?;
    estimate_with_directions(mu, nu, spec, &directions)
}

/// Estimate of `SW_p^p(μ, ν)` under `spec`.
pub fn estimate_sw(mu: &PointCloud, nu: &PointCloud, spec: &EstimatorSpec) -> Result<SwEstimate> {
    estimate_sw_cached(mu, nu, spec, &mut NoCache)
}

/// Quantity differentiated by [`grad_sw`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientTarget {
    /// `SW_p^p`.
    SwPP,
    /// `SW_p = (SW_p^p)^{1/p}`.
    SwP,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwGradient {
    /// Estimate of `SW_p^p` at `z`.
    pub value: f64,
    /// Row-major `n × d` gradient with respect to the points of `z`.
    pub gradient: Vec<f64>,
}

fn check_gradient_regime(mu: &PointCloud, z: &PointCloud, p: f64) -> Result<()> {
    check_pair(mu, z)?;
    if p != 2.0 {
        return Err(Error::unsupported(format!("gradients are implemented for p = 2 only, got p = {p}")));
    }
    if !mu.is_uniform() || !z.is_uniform() || mu.len() != z.len() {
        return Err(Error::unsupported("gradients need uniform weights and equal sizes"));
    }
    Ok(())
}

/// Gradient with respect to `z` over an explicit direction set.
///
/// For `p = 2` the `SW_2^2` gradient at `zᵢ` is
/// `(2/(nL)) Σ_l θ_l (θ_lᵀzᵢ − θ_lᵀy_{m_l(i)})` with `m_l` the monotone
/// matching. The root form multiplies by `(1/p) value^{1/p − 1}` and is the
/// zero matrix when the value is 0.
pub fn grad_with_directions(
    mu_fixed: &PointCloud,
    z: &PointCloud,
    p: f64,
    target: GradientTarget,
    directions: &SpherePointSet,
) -> Result<SwGradient> {
    check_gradient_regime(mu_fixed, z, p)?;
    if directions.dim() != z.dim() {
        return Err(Error::Shape { expected: z.dim(), got: directions.dim() });
    }
    let n = z.len();
    let d = z.dim();
    let l = directions.len();
    let mut gradient = vec![0.0; n * d];
    let mut total = 0.0;
    let scale = 2.0 / (n as f64 * l as f64);
    for theta in directions.rows() {
        let pz = project(z, theta)?;
        let py = project(mu_fixed, theta)?;
        let m = monotone_matching(&pz.values, &py.values)?;
        let mut cost = 0.0;
        for i in 0..n {
            let diff = pz.values[i] - py.values[m[i]];
            cost += diff * diff;
            let g = &mut gradient[i * d..(i + 1) * d];
            for (gk, tk) in g.iter_mut().zip(theta) {
                *gk += scale * diff * tk;
            }
        }
        total += cost / n as f64;
    }
    let value = total / l as f64;
    if target == GradientTarget::SwP {
        if value == 0.0 {
            gradient.iter_mut().for_each(|g| *g = 0.0);
        } else {
            let chain = libm::pow(value, 1.0 / p - 1.0) / p;
            gradient.iter_mut().for_each(|g| *g *= chain);
        }
    }
    Ok(SwGradient { value, gradient })
}

/// Gradient of the `spec` estimate with respect to the points of `z`.
pub fn grad_sw(
    mu_fixed: &PointCloud,
    z: &PointCloud,
    spec: &EstimatorSpec,
    target: GradientTarget,
    cache: &mut dyn PointSetCache,
) -> Result<SwGradient> {
    check_gradient_regime(mu_fixed, z, spec.p)?;
    let directions = resolve_directions(spec, z.dim(), cache)?;
    grad_with_directions(mu_fixed, z, spec.p, target, &directions)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalMethod {
    Clt,
    Bootstrap { resamples: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceInterval {
    /// Sample mean of the replicates.
    pub center: f64,
    pub lo: f64,
    pub hi: f64,
    /// Nominal coverage `1 − α`.
    pub level: f64,
    pub method: IntervalMethod,
    pub replicates: Vec<f64>,
}

impl ConfidenceInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }
}

/// Type-7 sample quantile (linear interpolation) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sample mean and (n − 1)-normalized standard deviation.
pub fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

/// Interval from precomputed replicate values. The CLT interval is
/// `mean ± z_{α/2} sd/√M`; the bootstrap interval takes the `α/2` and
/// `1 − α/2` percentiles of resampled means drawn from `seed`, widened if
/// needed so that it contains the sample mean.
pub fn interval_from_replicates(
    replicates: Vec<f64>,
    alpha: f64,
    method: IntervalMethod,
    seed: u64,
) -> Result<ConfidenceInterval> {
    if replicates.len() < 2 {
        return Err(Error::config("a confidence interval needs at least 2 replicates"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::config(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    let m = replicates.len();
    let (mean, sd) = mean_and_sd(&replicates);
    let (lo, hi) = match method {
        IntervalMethod::Clt => {
            let z = inverse_normal_cdf(1.0 - alpha / 2.0);
            let half = z * sd / libm::sqrt(m as f64);
            (mean - half, mean + half)
        }
        IntervalMethod::Bootstrap { resamples } => {
            if resamples < 100 {
                return Err(Error::config("bootstrap needs at least 100 resamples"));
            }
            let mut rng = seeded_rng(derive_seed(seed, stream::BOOTSTRAP));
            let mut means: Vec<f64> = (0..resamples)
                .map(|_| (0..m).map(|_| replicates[rng.random_range(0..m)]).sum::<f64>() / m as f64)
                .collect();
            means.sort_by(f64::total_cmp);
            let lo = quantile_sorted(&means, alpha / 2.0);
            let hi = quantile_sorted(&means, 1.0 - alpha / 2.0);
            (lo.min(mean), hi.max(mean))
        }
    };
    Ok(ConfidenceInterval { center: mean, lo, hi, level: 1.0 - alpha, method, replicates })
}

/// `M` independent RQSW replicates (seeds `derive_seed(seed, REPLICATE + r)`)
/// summarized as a `1 − α` confidence interval for `SW_p^p`.
pub fn confidence_interval(
    mu: &PointCloud,
    nu: &PointCloud,
    spec: &EstimatorSpec,
    replicates: usize,
    alpha: f64,
    method: IntervalMethod,
    cache: &mut dyn PointSetCache,
) -> Result<ConfidenceInterval> {
    if !spec.scheme.is_randomized_qmc() {
        return Err(Error::config(format!("confidence intervals need an RQSW scheme, got {}", spec.scheme)));
    }
    spec.validate()?;
    if replicates < 2 {
        return Err(Error::config("a confidence interval needs at least 2 replicates"));
    }
    let seed = spec.seed.unwrap();
    let values = (0..replicates as u64)
        .map(|r| {
            let rep = spec.with_seed(derive_seed(seed, stream::REPLICATE + r));
            estimate_sw_cached(mu, nu, &rep, cache).map(|e| e.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    interval_from_replicates(values, alpha, method, seed)
}
