//! Experiment drivers behind the subcommands. Each returns a [`Report`]
//! whose config echo is enough to rerun it.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde_json::{json, Value};

use qsw_core::discrepancy::{fit_rate_envelope, spherical_cap_discrepancy, CAP_LIMIT};
use qsw_core::exact_ot::w2_exact;
use qsw_core::flows::{
    color_transfer, euler_interpolate_with, Clock, ColorTransfer, FlowConfig, FlowTrace, GradientForm, RgbImage,
};
use qsw_core::ot1d::PointCloud;
use qsw_core::qmc::CubeRandomization;
use qsw_core::rng::{derive_seed, stream};
use qsw_core::sphere::{
    cached_construction, random_uniform, CacheKey, Construction, OptimizerConfig, PointSetCache, PushforwardMap,
    SpherePointSet,
};
use qsw_core::sw::{
    confidence_interval, estimate_sw_cached, quantile_sorted, resolve_directions, EstimatorSpec, IntervalMethod, Scheme,
};
use qsw_core::Error;

use crate::error::{CliError, Result};
use crate::report::Report;

/// Wall-clock [`Clock`] measured from construction.
#[derive(Debug, Clone, Copy)]
pub struct InstantClock {
    start: Instant,
}

impl InstantClock {
    pub fn new() -> Self {
        Self { start: Instant::now() }
    }
}

impl Default for InstantClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for InstantClock {
    fn now_nanos(&mut self) -> u64 {
        self.start.elapsed().as_nanos() as u64
    }
}

fn optimizer_json(o: &OptimizerConfig) -> Value {
    json!({
        "iterations": o.iterations,
        "initial_step": o.initial_step,
        "backtrack": o.backtrack,
        "tolerance": o.tolerance,
    })
}

fn names(cs: &[Construction]) -> Vec<&'static str> {
    cs.iter().map(|c| c.name()).collect()
}

/// How `gen-points` randomizes a construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SetRandomization {
    #[default]
    None,
    Scramble,
    Shift,
    Rotation,
}

impl FromStr for SetRandomization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "none" => SetRandomization::None,
            "scramble" => SetRandomization::Scramble,
            "shift" => SetRandomization::Shift,
            "rotation" => SetRandomization::Rotation,
            _ => return Err(format!("unknown randomization `{s}` (none, scramble, shift, rotation)")),
        })
    }
}

impl fmt::Display for SetRandomization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SetRandomization::None => "none",
            SetRandomization::Scramble => "scramble",
            SetRandomization::Shift => "shift",
            SetRandomization::Rotation => "rotation",
        })
    }
}

/// Scheme whose directions are `construction` under `randomization`.
pub fn scheme_for(construction: Construction, randomization: SetRandomization) -> Result<Scheme> {
    let map = match construction {
        Construction::GaussianMap => Some(PushforwardMap::GaussianMap),
        Construction::EqualArea => Some(PushforwardMap::EqualArea),
        _ => None,
    };
    Ok(match (randomization, map) {
        (SetRandomization::None, _) if construction == Construction::RandomUniform => Scheme::MonteCarlo,
        (SetRandomization::None, _) => Scheme::Qsw(construction),
        (SetRandomization::Scramble, Some(map)) => {
            Scheme::RqswPushforward { map, randomization: CubeRandomization::Scramble }
        }
        (SetRandomization::Shift, Some(map)) => {
            Scheme::RqswPushforward { map, randomization: CubeRandomization::Shift }
        }
        (SetRandomization::Rotation, _) if Construction::QMC.contains(&construction) => {
            Scheme::RqswRotation(construction)
        }
        _ => {
            return Err(CliError::config(format!(
                "randomization `{randomization}` does not apply to construction `{}`",
                construction.name()
            )))
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenPoints {
    pub construction: Construction,
    pub dim: usize,
    pub len: usize,
    pub randomization: SetRandomization,
    pub seed: Option<u64>,
    pub optimizer: OptimizerConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPoints {
    pub set: SpherePointSet,
    /// Optimizer fingerprint recorded in the file header.
    pub config_hash: u64,
    /// Spherical cap discrepancy, for `dim = 3` and `len ≤ CAP_LIMIT`.
    pub discrepancy: Option<f64>,
}

/// Builds the set exactly as an estimator with the same scheme and seed
/// would draw it.
pub fn gen_points(cfg: &GenPoints, cache: &mut dyn PointSetCache) -> Result<GeneratedPoints> {
    let scheme = scheme_for(cfg.construction, cfg.randomization)?;
    let spec = EstimatorSpec { p: 2.0, projections: cfg.len, scheme, seed: cfg.seed, optimizer: cfg.optimizer };
    let set = resolve_directions(&spec, cfg.dim, cache)?;
    let config_hash = CacheKey::new(cfg.construction, cfg.dim, cfg.len, &cfg.optimizer).config_hash;
    let discrepancy = if cfg.dim == 3 && cfg.len <= CAP_LIMIT { Some(spherical_cap_discrepancy(&set)?) } else { None };
    Ok(GeneratedPoints { set, config_hash, discrepancy })
}

/// Ground truth for [`approx_error`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    MonteCarlo { projections: usize, seed: u64 },
    ClosedForm(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxError {
    pub p: f64,
    pub grid: Vec<usize>,
    pub reference: Reference,
    pub mc_seeds: Vec<u64>,
    pub constructions: Vec<Construction>,
    pub optimizer: OptimizerConfig,
}

/// Seeds `derive_seed(master, REPLICATE + i)` for `i < count`.
pub fn replicate_seeds(master: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| derive_seed(master, stream::REPLICATE + i)).collect()
}

/// `|estimate − reference|` for Monte Carlo (mean over seeds) and each
/// QSW construction at each L. Columns: `method, L, estimate, abs_error`.
pub fn approx_error(
    a: &PointCloud,
    b: &PointCloud,
    cfg: &ApproxError,
    cache: &mut dyn PointSetCache,
) -> Result<Report> {
    let max_l = cfg.grid.iter().copied().max().ok_or_else(|| CliError::config("empty L grid"))?;
    if cfg.mc_seeds.is_empty() {
        return Err(CliError::config("approx-error needs at least one Monte Carlo seed"));
    }
    let spec = |l: usize, scheme: Scheme| EstimatorSpec {
        p: cfg.p,
        projections: l,
        scheme,
        seed: None,
        optimizer: cfg.optimizer,
    };
    let mut report = Report::new("approx-error", &["method", "L", "estimate", "abs_error"]);
    report
        .config("p", cfg.p)
        .config("L", &cfg.grid)
        .config("mc_seeds", &cfg.mc_seeds)
        .config("constructions", names(&cfg.constructions))
        .config("optimizer", optimizer_json(&cfg.optimizer));
    let truth = match cfg.reference {
        Reference::MonteCarlo { projections, seed } => {
            if projections < 10 * max_l {
                return Err(CliError::config(format!(
                    "reference L = {projections} must be at least 10 × the largest grid L ({max_l})"
                )));
            }
            report.config("reference", json!({"kind": "monte_carlo", "L": projections, "seed": seed}));
            estimate_sw_cached(a, b, &spec(projections, Scheme::MonteCarlo).with_seed(seed), cache)?.value
        }
        Reference::ClosedForm(v) => {
            report.config("reference", json!({"kind": "closed_form", "value": v}));
            v
        }
    };
    report.summary("reference", truth);
    for &l in &cfg.grid {
        let mut sum = 0.0;
        let mut abs = 0.0;
        for &seed in &cfg.mc_seeds {
            let v = estimate_sw_cached(a, b, &spec(l, Scheme::MonteCarlo).with_seed(seed), cache)?.value;
            sum += v;
            abs += (v - truth).abs();
        }
        let n = cfg.mc_seeds.len() as f64;
        report.push_row(vec![json!("SW"), json!(l), json!(sum / n), json!(abs / n)]);
        for &c in &cfg.constructions {
            let scheme = Scheme::Qsw(c);
            let v = estimate_sw_cached(a, b, &spec(l, scheme), cache)?.value;
            report.push_row(vec![json!(scheme.short_name()), json!(l), json!(v), json!((v - truth).abs())]);
        }
    }
    Ok(report)
}

/// `SW_p^p` between the dirac at the origin and the dirac at `offset` in R³:
/// `|offset|^p / (p + 1)`.
pub fn dirac_truth(offset: [f64; 3], p: f64) -> f64 {
    let r = offset.iter().map(|x| x * x).sum::<f64>().sqrt();
    r.powf(p) / (p + 1.0)
}

fn flow_config_echo(report: &mut Report, cfg: &FlowConfig) {
    let e = &cfg.estimator;
    report
        .config("scheme", e.scheme.to_string())
        .config("L", e.projections)
        .config("p", e.p)
        .config("seed", e.seed)
        .config("steps", cfg.steps)
        .config("eta", cfg.step_size)
        .config("checkpoints", &cfg.checkpoints)
        .config("reseed_per_step", cfg.reseed_per_step)
        .config(
            "gradient",
            match cfg.gradient {
                GradientForm::Root => "root",
                GradientForm::Squared => "squared",
            },
        )
        .config("optimizer", optimizer_json(&e.optimizer));
}

/// Checkpoints every `steps / 5` steps (every step when `steps < 5`).
pub fn default_checkpoints(steps: usize) -> Vec<usize> {
    if steps < 5 {
        return (1..=steps).collect();
    }
    let every = steps / 5;
    let mut c: Vec<usize> = (1..=5).map(|i| i * every).collect();
    *c.last_mut().unwrap() = steps;
    c
}

/// Euler flow with exact W₂ at the checkpoints. Columns: `step, w2`.
pub fn interpolate(
    source: &PointCloud,
    target: &PointCloud,
    cfg: &FlowConfig,
    cache: &mut dyn PointSetCache,
    clock: &mut dyn Clock,
) -> Result<(Report, FlowTrace)> {
    if source.len() != target.len() {
        return Err(CliError::config(format!(
            "interpolation needs equal-size clouds, got {} and {}",
            source.len(),
            target.len()
        )));
    }
    let trace = euler_interpolate_with(source, target, cfg, cache, clock)?;
    let mut report = Report::new("interpolate", &["step", "w2"]);
    flow_config_echo(&mut report, cfg);
    for c in &trace.checkpoints {
        report.push_row(vec![json!(c.step), json!(c.w2)]);
    }
    Ok((report, trace))
}

/// Palette color transfer. Columns: `step, w2` (real-valued palette);
/// the summary holds the rounded final palette W₂ and the palette size.
pub fn style_transfer(
    source: &RgbImage,
    target: &RgbImage,
    cfg: &FlowConfig,
    k: usize,
    kmeans_seed: u64,
    cache: &mut dyn PointSetCache,
    clock: &mut dyn Clock,
) -> Result<(Report, ColorTransfer)> {
    let out = color_transfer(source, target, cfg, k, kmeans_seed, cache, clock)?;
    let mut report = Report::new("style-transfer", &["step", "w2"]);
    flow_config_echo(&mut report, cfg);
    report.config("k", k).config("kmeans_seed", kmeans_seed);
    for c in &out.trace.checkpoints {
        report.push_row(vec![json!(c.step), json!(c.w2)]);
    }
    report.summary("palette_w2", out.palette_w2).summary("palette_size", out.final_palette.len());
    Ok((report, out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyCurve {
    pub constructions: Vec<Construction>,
    pub grid: Vec<usize>,
    /// Seeds for `random_uniform`; its row holds the median.
    pub random_seeds: Vec<u64>,
    pub optimizer: OptimizerConfig,
}

/// Cap discrepancy per construction and L on S². Columns:
/// `construction, L, discrepancy, replicates`. The summary holds the fitted
/// `L^{-3/4} √(log L)` envelope per construction.
pub fn discrepancy_curve(cfg: &DiscrepancyCurve, cache: &mut dyn PointSetCache) -> Result<Report> {
    if let Some(&big) = cfg.grid.iter().find(|&&l| l > CAP_LIMIT) {
        return Err(
            Error::SizeLimit { what: "spherical cap discrepancy point count", got: big, limit: CAP_LIMIT }.into()
        );
    }
    if cfg.constructions.contains(&Construction::RandomUniform) && cfg.random_seeds.is_empty() {
        return Err(CliError::config("random_uniform needs at least one seed"));
    }
    let mut report = Report::new("discrepancy-curve", &["construction", "L", "discrepancy", "replicates"]);
    report
        .config("constructions", names(&cfg.constructions))
        .config("L", &cfg.grid)
        .config("random_seeds", &cfg.random_seeds)
        .config("optimizer", optimizer_json(&cfg.optimizer));
    for &c in &cfg.constructions {
        let mut curve = Vec::new();
        for &l in &cfg.grid {
            let (d, reps) = if c == Construction::RandomUniform {
                let mut ds = cfg
                    .random_seeds
                    .iter()
                    .map(|&s| spherical_cap_discrepancy(&random_uniform(l, 3, s)?))
                    .collect::<qsw_core::Result<Vec<f64>>>()?;
                ds.sort_by(f64::total_cmp);
                (quantile_sorted(&ds, 0.5), ds.len())
            } else {
                (spherical_cap_discrepancy(&cached_construction(c, 3, l, &cfg.optimizer, cache)?)?, 1)
            };
            curve.push((l, d));
            report.push_row(vec![json!(c.name()), json!(l), json!(d), json!(reps)]);
        }
        if let Ok(fit) = fit_rate_envelope(&curve) {
            report
                .summary(&format!("envelope_C.{}", c.name()), fit.constant)
                .summary(&format!("envelope_slope.{}", c.name()), fit.ratio_slope);
        }
    }
    Ok(report)
}

/// Optional confidence interval for [`estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalRequest {
    pub replicates: usize,
    pub alpha: f64,
    pub method: IntervalMethod,
}

/// One-row SW estimate. Columns: `scheme, L, p, estimate, distance, ci_lo,
/// ci_hi, ci_level`; interval cells are empty without a request.
pub fn estimate(
    a: &PointCloud,
    b: &PointCloud,
    spec: &EstimatorSpec,
    interval: Option<IntervalRequest>,
    cache: &mut dyn PointSetCache,
) -> Result<Report> {
    let mut report =
        Report::new("estimate", &["scheme", "L", "p", "estimate", "distance", "ci_lo", "ci_hi", "ci_level"]);
    report
        .config("scheme", spec.scheme.to_string())
        .config("L", spec.projections)
        .config("p", spec.p)
        .config("seed", spec.seed)
        .config("optimizer", optimizer_json(&spec.optimizer));
    let name = json!(spec.scheme.short_name());
    let row = match interval {
        None => {
            let e = estimate_sw_cached(a, b, spec, cache)?;
            vec![json!(e.value), json!(e.distance()), Value::Null, Value::Null, Value::Null]
        }
        Some(req) => {
            let method = match req.method {
                IntervalMethod::Clt => json!("clt"),
                IntervalMethod::Bootstrap { resamples } => json!({"bootstrap": resamples}),
            };
            report.config("replicates", req.replicates).config("alpha", req.alpha).config("interval", method);
            let ci = confidence_interval(a, b, spec, req.replicates, req.alpha, req.method, cache)?;
            let root = ci.center.max(0.0).powf(1.0 / spec.p);
            vec![json!(ci.center), json!(root), json!(ci.lo), json!(ci.hi), json!(ci.level)]
        }
    };
    let mut cells = vec![name, json!(spec.projections), json!(spec.p)];
    cells.extend(row);
    report.push_row(cells);
    Ok(report)
}

/// Exact W₂ between equal-size uniform clouds. Columns: `n, w2`.
pub fn exact_w2(a: &PointCloud, b: &PointCloud) -> Result<Report> {
    let mut report = Report::new("w2", &["n", "w2"]);
    report.push_row(vec![json!(a.len()), json!(w2_exact(a, b)?)]);
    Ok(report)
}

/// Constructions and sizes that [`warm_cache`] precomputes.
pub const WARM_CONSTRUCTIONS: [Construction; 2] = [Construction::MaxDistance, Construction::MinCoulomb];
pub const WARM_SIZES: [usize; 5] = [10, 50, 100, 500, 1000];

/// Builds (or confirms) cached optimized sets. Columns:
/// `construction, L, jittered`.
pub fn warm_cache(
    constructions: &[Construction],
    sizes: &[usize],
    optimizer: &OptimizerConfig,
    cache: &mut dyn PointSetCache,
) -> Result<Report> {
    let mut report = Report::new("warm-cache", &["construction", "L", "jittered"]);
    report
        .config("constructions", names(constructions))
        .config("L", sizes)
        .config("optimizer", optimizer_json(optimizer));
    for &c in constructions {
        for &l in sizes {
            let set = cached_construction(c, 3, l, optimizer, cache)?;
            report.push_row(vec![json!(c.name()), json!(l), json!(set.jittered)]);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use qsw_core::sphere::MemoryCache;
    use qsw_core::synth;

    #[test]
    fn scheme_mapping() {
        use Construction::*;
        assert_eq!(scheme_for(Spiral, SetRandomization::None).unwrap(), Scheme::Qsw(Spiral));
        assert_eq!(scheme_for(RandomUniform, SetRandomization::None).unwrap(), Scheme::MonteCarlo);
        assert_eq!(scheme_for(MinCoulomb, SetRandomization::Rotation).unwrap(), Scheme::RqswRotation(MinCoulomb));
        assert!(matches!(
            scheme_for(EqualArea, SetRandomization::Shift).unwrap(),
            Scheme::RqswPushforward { randomization: CubeRandomization::Shift, .. }
        ));
        assert!(scheme_for(Spiral, SetRandomization::Scramble).is_err());
        assert!(scheme_for(RandomUniform, SetRandomization::Rotation).is_err());
    }

    #[test]
    fn gen_points_reports_discrepancy() {
        let mut cache = MemoryCache::new();
        let cfg = |c| GenPoints {
            construction: c,
            dim: 3,
            len: 100,
            randomization: SetRandomization::None,
            seed: None,
            optimizer: OptimizerConfig::default(),
        };
        let s = gen_points(&cfg(Construction::Spiral), &mut cache).unwrap();
        let g = gen_points(&cfg(Construction::GaussianMap), &mut cache).unwrap();
        assert_eq!(s.set.len(), 100);
        assert!(g.discrepancy.unwrap() > s.discrepancy.unwrap());
        assert!(gen_points(&cfg(Construction::RandomUniform), &mut cache).is_err());
    }

    #[test]
    fn identical_clouds_have_zero_error() {
        let a = synth::gaussian_blobs(40, 3, 2, 1).unwrap();
        let cfg = ApproxError {
            p: 2.0,
            grid: vec![10, 20],
            reference: Reference::MonteCarlo { projections: 1000, seed: 3 },
            mc_seeds: replicate_seeds(0, 3),
            constructions: vec![Construction::Spiral, Construction::EqualArea],
            optimizer: OptimizerConfig::default(),
        };
        let r = approx_error(&a, &a, &cfg, &mut MemoryCache::new()).unwrap();
        assert_eq!(r.rows.len(), 6);
        assert!(r.f64_column("abs_error").unwrap().iter().all(|&e| e == 0.0));
        let bad = ApproxError { reference: Reference::MonteCarlo { projections: 100, seed: 3 }, ..cfg };
        assert!(matches!(approx_error(&a, &a, &bad, &mut MemoryCache::new()), Err(CliError::Config(_))));
    }

    #[test]
    fn dirac_mode_uses_closed_form() {
        assert!((dirac_truth([1.0, 0.0, 0.0], 2.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((dirac_truth([0.0, 2.0, 0.0], 1.0) - 1.0).abs() < 1e-15);
        let (a, b) = synth::dirac_pair([1.0, 0.0, 0.0]);
        let cfg = ApproxError {
            p: 2.0,
            grid: vec![256],
            reference: Reference::ClosedForm(1.0 / 3.0),
            mc_seeds: replicate_seeds(0, 2),
            constructions: vec![Construction::Spiral],
            optimizer: OptimizerConfig::default(),
        };
        let r = approx_error(&a, &b, &cfg, &mut MemoryCache::new()).unwrap();
        let err = r.f64_column("abs_error").unwrap();
        assert!(err[1] < 1e-3 && err[1] < err[0]);
    }

    #[test]
    fn checkpoints_default() {
        assert_eq!(default_checkpoints(500), vec![100, 200, 300, 400, 500]);
        assert_eq!(default_checkpoints(12), vec![2, 4, 6, 8, 12]);
        assert_eq!(default_checkpoints(3), vec![1, 2, 3]);
    }

    #[test]
    fn discrepancy_curve_budget_and_summary() {
        let cfg = DiscrepancyCurve {
            constructions: vec![Construction::Spiral, Construction::RandomUniform],
            grid: vec![16, 32, 64],
            random_seeds: vec![1, 2, 3],
            optimizer: OptimizerConfig::default(),
        };
        let r = discrepancy_curve(&cfg, &mut MemoryCache::new()).unwrap();
        assert_eq!(r.rows.len(), 6);
        assert!(r.summary.contains_key("envelope_C.spiral"));
        let d = r.f64_column("discrepancy").unwrap();
        assert!((0..3).all(|i| d[3 + i] > d[i]));
        let big = DiscrepancyCurve { grid: vec![CAP_LIMIT + 1], ..cfg };
        assert!(matches!(
            discrepancy_curve(&big, &mut MemoryCache::new()),
            Err(CliError::Core(Error::SizeLimit { .. }))
        ));
    }

    #[test]
    fn estimate_with_and_without_interval() {
        let (a, b) = synth::dirac_pair([1.0, 0.0, 0.0]);
        let spec = EstimatorSpec::new(2.0, 64, Scheme::RqswRotation(Construction::Spiral)).with_seed(4);
        let plain = estimate(&a, &b, &spec, None, &mut MemoryCache::new()).unwrap();
        assert!(plain.rows[0][5].is_null());
        let req = IntervalRequest { replicates: 10, alpha: 0.05, method: IntervalMethod::Clt };
        let ci = estimate(&a, &b, &spec, Some(req), &mut MemoryCache::new()).unwrap();
        let row: Vec<f64> = ci.rows[0][3..].iter().map(|v| v.as_f64().unwrap()).collect();
        assert!(row[2] <= row[0] && row[0] <= row[3] && (row[4] - 0.95).abs() < 1e-12);
    }
}
