//! Euler gradient flows driven by sliced Wasserstein gradients.
//!
//! [`euler_interpolate`] moves a point cloud toward a target with
//! `Z ← Z − n η ∇_Z SW₂(P_Z, P_Y)` and records exact W₂ at checkpoints.
//! [`color_transfer`] runs the same flow between k-means color palettes of
//! two images and repaints the source.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::exact_ot::w2_exact;
use crate::linalg::{dist_sq, norm};
use crate::ot1d::PointCloud;
use crate::rng::{derive_seed, seeded_rng, stream};
use crate::sphere::{NoCache, PointSetCache};
use crate::sw::{grad_with_directions, resolve_directions, EstimatorSpec, GradientTarget};
use crate::{Error, Result};

/// Which quantity the flow descends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientForm {
    /// `SW₂`, the default.
    Root,
    /// `SW₂²`.
    Squared,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub steps: usize,
    pub step_size: f64,
    pub estimator: EstimatorSpec,
    /// Steps (in `1..=steps`) after which a snapshot and exact W₂ are taken.
    pub checkpoints: Vec<usize>,
    /// Draw fresh directions at every step from `derive_seed(seed, FLOW_STEP + t)`.
    pub reseed_per_step: bool,
    pub gradient: GradientForm,
}

impl FlowConfig {
    /// Root-form flow that reseeds every step exactly when the scheme is stochastic.
    pub fn new(steps: usize, step_size: f64, estimator: EstimatorSpec) -> Self {
        Self {
            steps,
            step_size,
            estimator,
            checkpoints: Vec::new(),
            reseed_per_step: estimator.scheme.is_stochastic(),
            gradient: GradientForm::Root,
        }
    }

    pub fn with_checkpoints(mut self, checkpoints: impl IntoIterator<Item = usize>) -> Self {
        self.checkpoints = checkpoints.into_iter().collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("flow needs at least one step"));
        }
        if !(self.step_size >= 0.0) || !self.step_size.is_finite() {
            return Err(Error::config(format!("step size {} must be finite and >= 0", self.step_size)));
        }
        if let Some(&bad) = self.checkpoints.iter().find(|&&c| c == 0 || c > self.steps) {
            return Err(Error::config(format!("checkpoint {bad} outside 1..={}", self.steps)));
        }
        if self.reseed_per_step && !self.estimator.scheme.is_stochastic() {
            return Err(Error::config(format!(
                "scheme {} is deterministic and cannot be reseeded per step",
                self.estimator.scheme
            )));
        }
        self.estimator.validate()
    }
}

/// Source of per-step wall-clock timings.
pub trait Clock {
    fn now_nanos(&mut self) -> u64;
}

/// Clock that always reads zero.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_nanos(&mut self) -> u64 {
        0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: usize,
    pub points: PointCloud,
    /// Exact W₂ between the snapshot and the target.
    pub w2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    pub checkpoints: Vec<Checkpoint>,
    pub final_points: PointCloud,
    /// Frobenius norm of the gradient applied at each step.
    pub grad_norms: Vec<f64>,
    /// Wall-clock time of each step as reported by the clock.
    pub step_nanos: Vec<u64>,
}

impl FlowTrace {
    pub fn w2_series(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|c| c.w2).collect()
    }
}

/// [`euler_interpolate_with`] without a cache or clock.
pub fn euler_interpolate(source: &PointCloud, target: &PointCloud, config: &FlowConfig) -> Result<FlowTrace> {
    euler_interpolate_with(source, target, config, &mut NoCache, &mut NoClock)
}

/// Runs `config.steps` Euler steps from `source` toward `target`.
pub fn euler_interpolate_with(
    source: &PointCloud,
    target: &PointCloud,
    config: &FlowConfig,
    cache: &mut dyn PointSetCache,
    clock: &mut dyn Clock,
) -> Result<FlowTrace> {
    config.validate()?;
    if source.dim() != target.dim() {
        return Err(Error::Shape { expected: target.dim(), got: source.dim() });
    }
    if source.len() != target.len() || !source.is_uniform() || !target.is_uniform() {
        return Err(Error::unsupported("flows need equal-size uniform clouds"));
    }
    let n = source.len() as f64;
    let spec = config.estimator;
    let form = match config.gradient {
        GradientForm::Root => GradientTarget::SwP,
        GradientForm::Squared => GradientTarget::SwPP,
    };
    let fixed = if config.reseed_per_step { None } else { Some(resolve_directions(&spec, source.dim(), cache)?) };

    let mut z = source.clone();
    let mut trace = FlowTrace {
        checkpoints: Vec::new(),
        final_points: source.clone(),
        grad_norms: Vec::with_capacity(config.steps),
        step_nanos: Vec::with_capacity(config.steps),
    };
    for t in 1..=config.steps {
        let start = clock.now_nanos();
        let fresh;
        let dirs = match &fixed {
            Some(d) => d,
            None => {
                let seed = derive_seed(spec.seed.expect("validated"), stream::FLOW_STEP + t as u64);
                fresh = resolve_directions(&spec.with_seed(seed), source.dim(), cache)?;
                &fresh
            }
        };
        let g = grad_with_directions(target, &z, 2.0, form, dirs)?;
        let scale = n * config.step_size;
        for (x, gx) in z.as_mut_slice().iter_mut().zip(&g.gradient) {
            *x -= scale * gx;
        }
        trace.grad_norms.push(norm(&g.gradient));
        trace.step_nanos.push(clock.now_nanos().saturating_sub(start));
        if config.checkpoints.contains(&t) {
            let w2 = w2_exact(&z, target)?;
            trace.checkpoints.push(Checkpoint { step: t, points: z.clone(), w2 });
        }
    }
    trace.final_points = z;
    Ok(trace)
}

/// 8-bit RGB image, row-major pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Shape { expected: width * height, got: pixels.len() });
        }
        if pixels.is_empty() {
            return Err(Error::domain("image has no pixels"));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn distinct_colors(&self) -> usize {
        let mut seen: Vec<[u8; 3]> = self.pixels.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansPalette {
    /// `k` centroid colors weighted by cluster size.
    pub centroids: PointCloud,
    /// Cluster of every pixel.
    pub labels: Vec<usize>,
    /// Quantization error (mean squared distance to the assigned centroid)
    /// after each assignment step.
    pub inertia_history: Vec<f64>,
}

impl KMeansPalette {
    pub fn inertia(&self) -> f64 {
        *self.inertia_history.last().unwrap()
    }

    /// Centroids with uniform weights.
    pub fn uniform_centroids(&self) -> PointCloud {
        PointCloud::new(3, self.centroids.as_slice().to_vec()).expect("centroids are finite")
    }
}

/// Nearest centroid (lowest index on ties) and its squared distance.
fn nearest(c: &[f64], centroids: &[[f64; 3]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, m) in centroids.iter().enumerate() {
        let d = dist_sq(c, m);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations on pixel colors.
///
/// Runs on the histogram of distinct colors, which gives the same result
/// as clustering every pixel. Empty clusters keep their centroid.
pub fn kmeans_palette(image: &RgbImage, k: usize, seed: u64, max_iters: usize) -> Result<KMeansPalette> {
    if k == 0 || k > image.pixels.len() {
        return Err(Error::domain(format!("k = {k} must lie in 1..={}", image.pixels.len())));
    }
    let mut histogram: BTreeMap<[u8; 3], usize> = BTreeMap::new();
    for p in &image.pixels {
        *histogram.entry(*p).or_insert(0) += 1;
    }
    let colors: Vec<[f64; 3]> = histogram.keys().map(|c| [c[0] as f64, c[1] as f64, c[2] as f64]).collect();
    let counts: Vec<f64> = histogram.values().map(|&c| c as f64).collect();
    let total = image.pixels.len() as f64;
    let mut rng = seeded_rng(derive_seed(seed, stream::KMEANS));

    // k-means++: first centre by pixel frequency, then by frequency × D².
    let pick = |weights: &[f64], rng: &mut crate::rng::SeededRng| -> Option<usize> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return None;
        }
        let mut r = rng.random_range(0.0..sum);
        for (i, w) in weights.iter().enumerate() {
            if r < *w {
                return Some(i);
            }
            r -= w;
        }
        weights.iter().rposition(|&w| w > 0.0)
    };
    let mut centroids: Vec<[f64; 3]> = Vec::with_capacity(k);
    centroids.push(colors[pick(&counts, &mut rng).unwrap()]);
    let mut d2: Vec<f64> = colors.iter().map(|c| dist_sq(c, &centroids[0])).collect();
    while centroids.len() < k {
        let weights: Vec<f64> = d2.iter().zip(&counts).map(|(d, c)| d * c).collect();
        let next = match pick(&weights, &mut rng) {
            Some(i) => colors[i],
            // every color already is a centre
            None => colors[rng.random_range(0..colors.len())],
        };
        centroids.push(next);
        for (d, c) in d2.iter_mut().zip(&colors) {
            *d = d.min(dist_sq(c, &next));
        }
    }

    let mut assignment = vec![usize::MAX; colors.len()];
    let mut inertia_history = Vec::new();
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, c) in colors.iter().enumerate() {
            let (j, d) = nearest(c, &centroids);
            changed |= assignment[i] != j;
            assignment[i] = j;
            inertia += counts[i] * d;
        }
        inertia_history.push(inertia / total);
        if !changed {
            break;
        }
        let mut sums = vec![[0.0f64; 3]; k];
        let mut sizes = vec![0.0f64; k];
        for (i, c) in colors.iter().enumerate() {
            let j = assignment[i];
            sizes[j] += counts[i];
            for ch in 0..3 {
                sums[j][ch] += counts[i] * c[ch];
            }
        }
        for j in 0..k {
            if sizes[j] > 0.0 {
                centroids[j] = [sums[j][0] / sizes[j], sums[j][1] / sizes[j], sums[j][2] / sizes[j]];
            }
        }
    }

    let mut sizes = vec![0.0f64; k];
    for (i, &j) in assignment.iter().enumerate() {
        sizes[j] += counts[i];
    }
    let mut weights: Vec<f64> = sizes.iter().map(|s| s / total).collect();
    let drift = 1.0 - weights.iter().sum::<f64>();
    if let Some(w) = weights.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *w += drift;
    }
    let index: BTreeMap<[u8; 3], usize> = histogram.keys().copied().zip(assignment.iter().copied()).collect();
    let labels = image.pixels.iter().map(|p| index[p]).collect();
    Ok(KMeansPalette { centroids: PointCloud::weighted(3, centroids.concat(), weights)?, labels, inertia_history })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorTransfer {
    pub image: RgbImage,
    pub source_palette: KMeansPalette,
    pub target_palette: KMeansPalette,
    /// Moved source palette after rounding to integers in [0, 255].
    pub final_palette: Vec<[u8; 3]>,
    /// Exact W₂ between the rounded final palette and the target palette.
    pub palette_w2: f64,
    pub trace: FlowTrace,
}

/// Flows the source palette toward the target palette and repaints the
/// source image. Both palettes have `min(k, distinct colors of each image)`
/// uniform-weight entries; palettes are seeded from `kmeans_seed`.
pub fn color_transfer(
    source: &RgbImage,
    target: &RgbImage,
    config: &FlowConfig,
    k: usize,
    kmeans_seed: u64,
    cache: &mut dyn PointSetCache,
    clock: &mut dyn Clock,
) -> Result<ColorTransfer> {
    config.validate()?;
    if k == 0 {
        return Err(Error::domain("palette size k must be at least 1"));
    }
    let k = k.min(source.distinct_colors()).min(target.distinct_colors());
    let iters = 100;
    let source_palette = kmeans_palette(source, k, kmeans_seed, iters)?;
    let target_palette = kmeans_palette(target, k, derive_seed(kmeans_seed, 1), iters)?;
    let from = source_palette.uniform_centroids();
    let to = target_palette.uniform_centroids();
    let trace = euler_interpolate_with(&from, &to, config, cache, clock)?;

    let final_palette: Vec<[u8; 3]> = trace
        .final_points
        .rows()
        .map(|c| {
            let q = |x: f64| libm::round(x).clamp(0.0, 255.0) as u8;
            [q(c[0]), q(c[1]), q(c[2])]
        })
        .collect();
    let rounded: Vec<f64> = final_palette.iter().flat_map(|c| c.iter().map(|&x| x as f64)).collect();
    let palette_w2 = w2_exact(&PointCloud::new(3, rounded)?, &to)?;
    let pixels = source_palette.labels.iter().map(|&j| final_palette[j]).collect();
    Ok(ColorTransfer {
        image: RgbImage::new(source.width, source.height, pixels)?,
        source_palette,
        target_palette,
        final_palette,
        palette_w2,
        trace,
    })
}
