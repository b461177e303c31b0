//! Point sets on the unit sphere.
//!
//! Deterministic constructions: Gaussian map of Sobol points, Lambert
//! equal-area map of 2D Sobol points, the generalized spiral, and the two
//! energy optimizers (maximal pairwise distance, minimal Coulomb energy) that
//! start from the spiral. Randomizations: push-forward of a randomized cube
//! set and a uniform random orthogonal transform.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{dot, norm, normalize};
use crate::normal::inverse_normal_cdf;
use crate::qmc::{self, CubePointSet, CubeRandomization};
use crate::rng::{derive_seed, seeded_rng, stream};
use crate::{Error, Result};

/// Cube coordinates are clamped into `[CUBE_EPS, 1 - CUBE_EPS]` before the
/// Gaussian push-forward of randomized sets (a scrambled digit word can be 0).
pub const CUBE_EPS: f64 = 1.0 / 8_589_934_592.0;

/// First Sobol index used by the deterministic Gaussian map.
pub const GAUSSIAN_SOBOL_OFFSET: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Construction {
    GaussianMap,
    EqualArea,
    Spiral,
    MaxDistance,
    MinCoulomb,
    ScaledMapBaseline,
    RandomUniform,
}

impl Construction {
    /// The five QMC constructions.
    pub const QMC: [Construction; 5] = [
        Construction::GaussianMap,
        Construction::EqualArea,
        Construction::Spiral,
        Construction::MaxDistance,
        Construction::MinCoulomb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Construction::GaussianMap => "gaussian_map",
            Construction::EqualArea => "equal_area",
            Construction::Spiral => "spiral",
            Construction::MaxDistance => "max_distance",
            Construction::MinCoulomb => "min_coulomb",
            Construction::ScaledMapBaseline => "scaled_map_baseline",
            Construction::RandomUniform => "random_uniform",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        let all = [
            Construction::GaussianMap,
            Construction::EqualArea,
            Construction::Spiral,
            Construction::MaxDistance,
            Construction::MinCoulomb,
            Construction::ScaledMapBaseline,
            Construction::RandomUniform,
        ];
        all.into_iter().find(|c| c.name() == s)
    }

    /// True for the constructions defined only on S² (d = 3).
    pub fn sphere_only(self) -> bool {
        matches!(
            self,
            Construction::EqualArea | Construction::Spiral | Construction::MaxDistance | Construction::MinCoulomb
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SphereRandomization {
    None,
    PushforwardScramble,
    PushforwardShift,
    RandomRotation,
}

/// `len` unit vectors in R^dim, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePointSet {
    dim: usize,
    directions: Vec<f64>,
    pub construction: Construction,
    pub randomization: SphereRandomization,
    pub seed: Option<u64>,
    /// Set when an optimizer had to separate coincident points.
    pub jittered: bool,
}

impl SpherePointSet {
    /// Wraps rows that are already unit vectors (checked to 1e-9).
    pub fn from_rows(dim: usize, directions: Vec<f64>, construction: Construction) -> Result<Self> {
        if dim < 2 {
            return Err(Error::UnsupportedDimension { dim, supported: ">= 2" });
        }
        if directions.is_empty() || directions.len() % dim != 0 {
            return Err(Error::Shape { expected: dim, got: directions.len() });
        }
        for (i, row) in directions.chunks_exact(dim).enumerate() {
            if (norm(row) - 1.0).abs() > 1e-9 {
                return Err(Error::domain(format!("row {i} is not a unit vector")));
            }
        }
        Ok(Self::raw(dim, directions, construction))
    }

    fn raw(dim: usize, directions: Vec<f64>, construction: Construction) -> Self {
        Self { dim, directions, construction, randomization: SphereRandomization::None, seed: None, jittered: false }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.directions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn direction(&self, i: usize) -> &[f64] {
        &self.directions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> core::slice::ChunksExact<'_, f64> {
        self.directions.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.directions
    }

    /// Matrix of pairwise inner products, row-major `len × len`.
    pub fn gram(&self) -> Vec<f64> {
        let n = self.len();
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                g[i * n + j] = dot(self.direction(i), self.direction(j));
            }
        }
        g
    }
}

/// Orthogonal `dim × dim` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl RotationMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self { dim, entries }
    }

    pub fn from_rows(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Shape { expected: dim * dim, got: entries.len() });
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    /// Largest entry of |UᵀU - I|.
    pub fn orthogonality_error(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let s: f64 = (0..d).map(|k| self.get(k, i) * self.get(k, j)).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    pub fn determinant(&self) -> f64 {
        // Gaussian elimination with partial pivoting on a copy.
        let d = self.dim;
        let mut a = self.entries.clone();
        let mut det = 1.0;
        for c in 0..d {
            let pivot = (c..d).max_by(|&x, &y| a[x * d + c].abs().total_cmp(&a[y * d + c].abs())).unwrap();
            if a[pivot * d + c] == 0.0 {
                return 0.0;
            }
            if pivot != c {
                for k in 0..d {
                    a.swap(c * d + k, pivot * d + k);
                }
                det = -det;
            }
            det *= a[c * d + c];
            for r in (c + 1)..d {
                let f = a[r * d + c] / a[c * d + c];
                for k in c..d {
                    a[r * d + k] -= f * a[c * d + k];
                }
            }
        }
        det
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (i, o) in out.iter_mut().enumerate().take(d) {
            *o = dot(&self.entries[i * d..(i + 1) * d], v);
        }
    }
}

/// θ = Φ⁻¹(x) / ‖Φ⁻¹(x)‖ row by row. Coordinates must lie strictly inside (0, 1).
pub fn gaussian_map(cube: &CubePointSet) -> Result<SpherePointSet> {
    let dim = cube.dim();
    if dim < 2 {
        return Err(Error::UnsupportedDimension { dim, supported: ">= 2" });
    }
    let mut out = Vec::with_capacity(cube.len() * dim);
    for (i, row) in cube.rows().enumerate() {
        if row.iter().any(|&x| x <= 0.0 || x >= 1.0) {
            return Err(Error::BoundaryPoint { index: i });
        }
        let start = out.len();
        out.extend(row.iter().map(|&x| inverse_normal_cdf(x)));
        if normalize(&mut out[start..]) == 0.0 {
            return Err(Error::DegeneratePoint { index: i });
        }
    }
    Ok(SpherePointSet::raw(dim, out, Construction::GaussianMap))
}

/// Lambert cylindrical equal-area map
/// `(x, y) ↦ (2√(y−y²) cos 2πx, 2√(y−y²) sin 2πx, 1 − 2y)`.
pub fn equal_area_map(cube: &CubePointSet) -> Result<SpherePointSet> {
    if cube.dim() != 2 {
        return Err(Error::Shape { expected: 2, got: cube.dim() });
    }
    let mut out = Vec::with_capacity(cube.len() * 3);
    for row in cube.rows() {
        let (x, y) = (row[0], row[1]);
        let r = 2.0 * libm::sqrt((y - y * y).max(0.0));
        let phi = 2.0 * PI * x;
        out.extend_from_slice(&[r * libm::cos(phi), r * libm::sin(phi), 1.0 - 2.0 * y]);
    }
    Ok(SpherePointSet::raw(3, out, Construction::EqualArea))
}

/// Generalized spiral: `z_i = 1 − (2i − 1)/L`, `φ₁ = acos z_i`,
/// `φ₂ = 1.8 √L φ₁ mod 2π`, for `i = 1..=L`.
pub fn spiral_points(len: usize) -> Result<SpherePointSet> {
    if len == 0 {
        return Err(Error::domain("point count must be at least 1"));
    }
    let l = len as f64;
    let mut out = Vec::with_capacity(len * 3);
    for i in 1..=len {
        let z = 1.0 - (2.0 * i as f64 - 1.0) / l;
        let polar = libm::acos(z);
        let azimuth = (1.8 * libm::sqrt(l) * polar) % (2.0 * PI);
        let r = libm::sqrt((1.0 - z * z).max(0.0));
        out.extend_from_slice(&[r * libm::cos(azimuth), r * libm::sin(azimuth), z]);
    }
    Ok(SpherePointSet::raw(3, out, Construction::Spiral))
}

/// x / ‖x‖ of the rows; the naive Halton baseline.
pub fn scaled_map_baseline(cube: &CubePointSet) -> Result<SpherePointSet> {
    let dim = cube.dim();
    if dim < 2 {
        return Err(Error::UnsupportedDimension { dim, supported: ">= 2" });
    }
    let mut out = cube.as_slice().to_vec();
    for (i, row) in out.chunks_exact_mut(dim).enumerate() {
        if normalize(row) == 0.0 {
            return Err(Error::DegeneratePoint { index: i });
        }
    }
    Ok(SpherePointSet::raw(dim, out, Construction::ScaledMapBaseline))
}

/// `len` i.i.d. uniform directions: normalized standard normal vectors.
pub fn random_uniform(len: usize, dim: usize, seed: u64) -> Result<SpherePointSet> {
    if dim < 2 {
        return Err(Error::UnsupportedDimension { dim, supported: ">= 2" });
    }
    if len == 0 {
        return Err(Error::domain("point count must be at least 1"));
    }
    let mut rng = seeded_rng(seed);
    let mut out = vec![0.0; len * dim];
    for row in out.chunks_exact_mut(dim) {
        loop {
            for x in row.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            if normalize(row) > 0.0 {
                break;
            }
        }
    }
    let mut set = SpherePointSet::raw(dim, out, Construction::RandomUniform);
    set.seed = Some(seed);
    Ok(set)
}

/// Uniform orthogonal matrix: Gram–Schmidt on the columns of a standard
/// normal matrix (positive diagonal in the triangular factor).
pub fn sample_rotation(dim: usize, seed: u64) -> Result<RotationMatrix> {
    if dim < 2 {
        return Err(Error::UnsupportedDimension { dim, supported: ">= 2" });
    }
    let mut attempt = 0u64;
    loop {
        let sub = if attempt == 0 { seed } else { derive_seed(seed, stream::RESAMPLE + attempt) };
        if let Some(q) = gram_schmidt_normal(dim, sub) {
            return Ok(q);
        }
        attempt += 1;
    }
}

fn gram_schmidt_normal(dim: usize, seed: u64) -> Option<RotationMatrix> {
    let mut rng = seeded_rng(seed);
    // columns[c] is the c-th column
    let mut columns: Vec<Vec<f64>> = (0..dim).map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect()).collect();
    for c in 0..dim {
        // modified Gram–Schmidt, two passes for stability
        for _ in 0..2 {
            for prev in 0..c {
                let (done, rest) = columns.split_at_mut(c);
                let proj = dot(&done[prev], &rest[0]);
                for (x, q) in rest[0].iter_mut().zip(&done[prev]) {
                    *x -= proj * q;
                }
            }
        }
        if normalize(&mut columns[c]) < 1e-10 {
            return None;
        }
    }
    let mut entries = vec![0.0; dim * dim];
    for (c, col) in columns.iter().enumerate() {
        for (r, &x) in col.iter().enumerate() {
            entries[r * dim + c] = x;
        }
    }
    Some(RotationMatrix { dim, entries })
}

/// θ'_i = U θ_i.
pub fn rotate_pointset(points: &SpherePointSet, rotation: &RotationMatrix) -> Result<SpherePointSet> {
    if rotation.dim != points.dim {
        return Err(Error::Shape { expected: points.dim, got: rotation.dim });
    }
    let mut out = vec![0.0; points.directions.len()];
    for (src, dst) in points.rows().zip(out.chunks_exact_mut(points.dim)) {
        rotation.apply(src, dst);
    }
    let mut set = points.clone();
    set.directions = out;
    set.randomization = SphereRandomization::RandomRotation;
    Ok(set)
}

/// Pairwise energy optimized on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairEnergy {
    /// Σ_{i≠j} ‖θᵢ − θⱼ‖, maximized.
    Distance,
    /// Σ_{i≠j} 1/‖θᵢ − θⱼ‖, minimized.
    Coulomb,
}

impl PairEnergy {
    /// Energy over ordered pairs `i ≠ j`.
    pub fn energy(self, set: &SpherePointSet) -> f64 {
        let n = set.len();
        let mut total = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let r = libm::sqrt(crate::linalg::dist_sq(set.direction(i), set.direction(j)));
                total += match self {
                    PairEnergy::Distance => r,
                    PairEnergy::Coulomb => 1.0 / r,
                };
            }
        }
        2.0 * total
    }

    /// Loss minimized by the optimizer.
    fn loss(self, set: &SpherePointSet) -> f64 {
        match self {
            PairEnergy::Distance => -self.energy(set),
            PairEnergy::Coulomb => self.energy(set),
        }
    }

    /// Euclidean gradient of [`loss`](Self::loss) with respect to each point.
    fn loss_gradient(self, set: &SpherePointSet, grad: &mut [f64]) {
        let n = set.len();
        let d = set.dim;
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (set.direction(i), set.direction(j));
                let r2 = crate::linalg::dist_sq(a, b);
                let r = libm::sqrt(r2);
                // d/dθᵢ of 2·e(‖θᵢ − θⱼ‖) = 2 e'(r) (θᵢ − θⱼ)/r
                let coef = match self {
                    PairEnergy::Distance => -2.0 / r,
                    PairEnergy::Coulomb => -2.0 / (r2 * r),
                };
                for k in 0..d {
                    let diff = coef * (a[k] - b[k]);
                    grad[i * d + k] += diff;
                    grad[j * d + k] -= diff;
                }
            }
        }
    }
}

/// Settings for the projected-gradient energy optimizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub iterations: usize,
    /// Largest per-point displacement of the first trial step; `None` means
    /// `0.1 / √L`.
    pub initial_step: Option<f64>,
    pub backtrack: f64,
    pub tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { iterations: 1000, initial_step: None, backtrack: 0.5, tolerance: 1e-10 }
    }
}

impl OptimizerConfig {
    /// FNV-1a hash of the settings, used in cache keys.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        eat(&(self.iterations as u64).to_le_bytes());
        eat(&self.initial_step.map_or(u64::MAX, f64::to_bits).to_le_bytes());
        eat(&self.backtrack.to_bits().to_le_bytes());
        eat(&self.tolerance.to_bits().to_le_bytes());
        h
    }
}

/// Outcome of an energy optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeReport {
    pub points: SpherePointSet,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub iterations: usize,
    pub jittered: bool,
}

fn separate_coincident(set: &mut SpherePointSet) -> bool {
    let n = set.len();
    let d = set.dim;
    let mut any = false;
    let mut rng = seeded_rng(derive_seed(n as u64, stream::JITTER));
    for i in 0..n {
        for j in (i + 1)..n {
            if crate::linalg::dist_sq(set.direction(i), set.direction(j)) < 1e-24 {
                any = true;
                // 1e-8 tangent jitter on point j
                let p: Vec<f64> = set.direction(j).to_vec();
                let mut t: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let along = dot(&t, &p);
                t.iter_mut().zip(&p).for_each(|(x, q)| *x -= along * q);
                normalize(&mut t);
                let row = &mut set.directions[j * d..(j + 1) * d];
                row.iter_mut().zip(&t).for_each(|(x, v)| *x += 1e-8 * v);
                normalize(row);
            }
        }
    }
    any
}

/// Projected gradient descent of `energy`'s loss on the sphere with
/// backtracking; every accepted step strictly lowers the loss.
pub fn optimize_energy(init: &SpherePointSet, energy: PairEnergy, config: &OptimizerConfig) -> Result<OptimizeReport> {
    let n = init.len();
    let d = init.dim;
    if n < 2 {
        return Err(Error::domain("energy optimization needs at least two points"));
    }
    let construction = match energy {
        PairEnergy::Distance => Construction::MaxDistance,
        PairEnergy::Coulomb => Construction::MinCoulomb,
    };

    let mut current = init.clone();
    let jittered = separate_coincident(&mut current);
    let initial_energy = energy.energy(init);
    let max_step = config.initial_step.unwrap_or(0.1 / libm::sqrt(n as f64));
    let mut step = max_step;
    let mut grad = vec![0.0; n * d];
    let mut loss = energy.loss(&current);
    let mut trial = current.clone();
    let mut iterations = 0;

    while iterations < config.iterations {
        iterations += 1;
        energy.loss_gradient(&current, &mut grad);
        // project onto tangent planes
        let mut largest = 0.0f64;
        for (g, p) in grad.chunks_exact_mut(d).zip(current.rows()) {
            let along = dot(g, p);
            g.iter_mut().zip(p).for_each(|(x, q)| *x -= along * q);
            largest = largest.max(norm(g));
        }
        if largest == 0.0 || !largest.is_finite() {
            break;
        }

        let mut accepted = None;
        for _ in 0..60 {
            let scale = step / largest;
            for ((t, p), g) in trial.directions.chunks_exact_mut(d).zip(current.rows()).zip(grad.chunks_exact(d)) {
                for k in 0..d {
                    t[k] = p[k] - scale * g[k];
                }
                normalize(t);
            }
            let trial_loss = energy.loss(&trial);
            if trial_loss < loss {
                accepted = Some(trial_loss);
                break;
            }
            step *= config.backtrack;
        }
        let Some(new_loss) = accepted else { break };
        core::mem::swap(&mut current, &mut trial);
        let change = (loss - new_loss).abs() / loss.abs().max(f64::MIN_POSITIVE);
        loss = new_loss;
        step = (step * 1.2).min(max_step);
        if change < config.tolerance {
            break;
        }
    }

    current.construction = construction;
    current.randomization = SphereRandomization::None;
    current.seed = None;
    current.jittered = jittered;
    Ok(OptimizeReport { final_energy: energy.energy(&current), points: current, initial_energy, iterations, jittered })
}

/// Maximizes Σ_{i≠j} ‖θᵢ − θⱼ‖ starting from `init`.
pub fn optimize_max_distance(init: &SpherePointSet, config: &OptimizerConfig) -> Result<SpherePointSet> {
    optimize_energy(init, PairEnergy::Distance, config).map(|r| r.points)
}

/// Minimizes Σ_{i≠j} 1/‖θᵢ − θⱼ‖ starting from `init`.
pub fn optimize_min_coulomb(init: &SpherePointSet, config: &OptimizerConfig) -> Result<SpherePointSet> {
    optimize_energy(init, PairEnergy::Coulomb, config).map(|r| r.points)
}

fn require_dim(construction: Construction, dim: usize) -> Result<()> {
    if construction.sphere_only() && dim != 3 {
        return Err(Error::unsupported(format!(
            "{} is defined only on S² (d = 3), got d = {dim}",
            construction.name()
        )));
    }
    if dim < 2 {
        return Err(Error::UnsupportedDimension { dim, supported: ">= 2" });
    }
    Ok(())
}

/// Builds a deterministic construction of `len` points.
///
/// Gaussian map uses Sobol indices `2..len + 2` (index 0 is the origin and
/// index 1 is the centre, which maps to the zero vector), the
/// equal-area map uses 2D Sobol indices `0..len`, the optimizers start from
/// the spiral and the baseline normalizes Halton points.
pub fn build_construction(
    construction: Construction,
    dim: usize,
    len: usize,
    config: &OptimizerConfig,
) -> Result<SpherePointSet> {
    require_dim(construction, dim)?;
    match construction {
        Construction::GaussianMap => gaussian_map(&qmc::sobol_generate(dim, len, GAUSSIAN_SOBOL_OFFSET)?),
        Construction::EqualArea => equal_area_map(&qmc::sobol_generate(2, len, 0)?),
        Construction::Spiral => spiral_points(len),
        Construction::MaxDistance => {
            if len < 2 {
                return spiral_points(len).map(|mut s| {
                    s.construction = Construction::MaxDistance;
                    s
                });
            }
            optimize_max_distance(&spiral_points(len)?, config)
        }
        Construction::MinCoulomb => {
            if len < 2 {
                return spiral_points(len).map(|mut s| {
                    s.construction = Construction::MinCoulomb;
                    s
                });
            }
            optimize_min_coulomb(&spiral_points(len)?, config)
        }
        Construction::ScaledMapBaseline => scaled_map_baseline(&qmc::halton_generate(dim, len)?),
        Construction::RandomUniform => Err(Error::config("random_uniform needs a seed; use random_uniform()")),
    }
}

/// Cube map used by push-forward randomization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PushforwardMap {
    GaussianMap,
    EqualArea,
}

impl PushforwardMap {
    pub fn construction(self) -> Construction {
        match self {
            PushforwardMap::GaussianMap => Construction::GaussianMap,
            PushforwardMap::EqualArea => Construction::EqualArea,
        }
    }
}

/// Randomizes a Sobol set on the cube (scramble or shift) and maps it to the
/// sphere. Uses Sobol indices `0..len`; coordinates are clamped into
/// `[CUBE_EPS, 1 − CUBE_EPS]` for the Gaussian map.
pub fn pushforward_randomized(
    map: PushforwardMap,
    randomization: CubeRandomization,
    dim: usize,
    len: usize,
    seed: u64,
) -> Result<SpherePointSet> {
    let cube_dim = match map {
        PushforwardMap::GaussianMap => {
            require_dim(Construction::GaussianMap, dim)?;
            dim
        }
        PushforwardMap::EqualArea => {
            require_dim(Construction::EqualArea, dim)?;
            2
        }
    };
    let base = qmc::sobol_generate(cube_dim, len, 0)?;
    let (cube, tag) = match randomization {
        CubeRandomization::Scramble => {
            (qmc::scramble_randomize(&base, seed)?, SphereRandomization::PushforwardScramble)
        }
        CubeRandomization::Shift => (qmc::shift_randomize(&base, seed), SphereRandomization::PushforwardShift),
        CubeRandomization::None => return Err(Error::config("push-forward randomization needs scramble or shift")),
    };
    let mut set = match map {
        PushforwardMap::GaussianMap => {
            let clamped: Vec<f64> = cube.as_slice().iter().map(|x| x.clamp(CUBE_EPS, 1.0 - CUBE_EPS)).collect();
            let mut c = CubePointSet::from_rows(cube_dim, clamped, cube.generator)?;
            c.randomization = cube.randomization;
            gaussian_map(&c)?
        }
        PushforwardMap::EqualArea => equal_area_map(&cube)?,
    };
    set.randomization = tag;
    set.seed = Some(seed);
    Ok(set)
}

/// Applies a uniform random orthogonal transform drawn from `seed`.
pub fn random_rotation_of(base: &SpherePointSet, seed: u64) -> Result<SpherePointSet> {
    let u = sample_rotation(base.dim, seed)?;
    let mut set = rotate_pointset(base, &u)?;
    set.seed = Some(seed);
    Ok(set)
}

/// Identity of a cached deterministic point set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CacheKey {
    pub construction: Construction,
    pub dim: usize,
    pub len: usize,
    pub config_hash: u64,
}

impl CacheKey {
    pub fn new(construction: Construction, dim: usize, len: usize, config: &OptimizerConfig) -> Self {
        let config_hash = match construction {
            Construction::MaxDistance | Construction::MinCoulomb => config.fingerprint(),
            _ => 0,
        };
        Self { construction, dim, len, config_hash }
    }

    /// Stable file stem for on-disk caches: `<construction>_d<dim>_L<len>_<hash>`.
    pub fn file_stem(&self) -> String {
        format!("{}_d{}_L{}_{:016x}", self.construction.name(), self.dim, self.len, self.config_hash)
    }
}

/// Storage for deterministic point sets, so constructions run once.
pub trait PointSetCache {
    fn load(&mut self, key: &CacheKey) -> Option<SpherePointSet>;
    fn store(&mut self, key: &CacheKey, set: &SpherePointSet);
}

/// Cache that never stores anything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoCache;

impl PointSetCache for NoCache {
    fn load(&mut self, _key: &CacheKey) -> Option<SpherePointSet> {
        None
    }
    fn store(&mut self, _key: &CacheKey, _set: &SpherePointSet) {}
}

#[derive(Debug, Default, Clone)]
pub struct MemoryCache {
    sets: BTreeMap<CacheKey, SpherePointSet>,
}

impl MemoryCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

impl PointSetCache for MemoryCache {
    fn load(&mut self, key: &CacheKey) -> Option<SpherePointSet> {
        self.sets.get(key).cloned()
    }
    fn store(&mut self, key: &CacheKey, set: &SpherePointSet) {
        self.sets.insert(key.clone(), set.clone());
    }
}

/// [`build_construction`] through `cache`.
pub fn cached_construction(
    construction: Construction,
    dim: usize,
    len: usize,
    config: &OptimizerConfig,
    cache: &mut dyn PointSetCache,
) -> Result<SpherePointSet> {
    let key = CacheKey::new(construction, dim, len, config);
    if let Some(hit) = cache.load(&key) {
        if hit.dim == dim && hit.len() == len {
            return Ok(hit);
        }
    }
    let set = build_construction(construction, dim, len, config)?;
    cache.store(&key, &set);
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmc::{sobol_generate, CubePointSet, Generator};

    fn assert_unit(set: &SpherePointSet) {
        for row in set.rows() {
            assert!((norm(row) - 1.0).abs() < 1e-12, "norm {}", norm(row));
        }
    }

    fn pairwise_dots(set: &SpherePointSet) -> Vec<f64> {
        let n = set.len();
        let mut v = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    v.push(dot(set.direction(i), set.direction(j)));
                }
            }
        }
        v
    }

    #[test]
    fn gaussian_map_examples() {
        let c = CubePointSet::from_rows(3, vec![0.5, 0.5, 0.841_344_7], Generator::Sobol).unwrap();
        let s = gaussian_map(&c).unwrap();
        assert!((s.direction(0)[2] - 1.0).abs() < 1e-12);
        assert!(s.direction(0)[0].abs() < 1e-12 && s.direction(0)[1].abs() < 1e-12);

        let c = CubePointSet::from_rows(3, vec![0.5, 0.5, 0.5], Generator::Sobol).unwrap();
        assert_eq!(gaussian_map(&c), Err(Error::DegeneratePoint { index: 0 }));

        let c = CubePointSet::from_rows(3, vec![0.2, 0.3, 0.4, 0.0, 0.5, 0.5], Generator::Sobol).unwrap();
        assert_eq!(gaussian_map(&c), Err(Error::BoundaryPoint { index: 1 }));

        assert_unit(&gaussian_map(&sobol_generate(3, 500, 2).unwrap()).unwrap());
        assert_unit(&gaussian_map(&sobol_generate(7, 100, 2).unwrap()).unwrap());
    }

    #[test]
    fn equal_area_examples() {
        let c = CubePointSet::from_rows(2, vec![0.0, 0.5, 0.5, 0.5, 0.3, 0.0], Generator::Sobol).unwrap();
        let s = equal_area_map(&c).unwrap();
        let close = |a: &[f64], b: [f64; 3]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15);
        assert!(close(s.direction(0), [1.0, 0.0, 0.0]));
        assert!(close(s.direction(1), [-1.0, 0.0, 0.0]));
        assert!(close(s.direction(2), [0.0, 0.0, 1.0]));
        assert_unit(&equal_area_map(&sobol_generate(2, 256, 0).unwrap()).unwrap());
    }

    #[test]
    fn equal_area_preserves_uniform_law() {
        // Each z-band of equal height carries equal area on S²: the map
        // sends y-strips of equal width to equal-height bands.
        let s = equal_area_map(&sobol_generate(2, 1024, 0).unwrap()).unwrap();
        let mut bands = [0usize; 8];
        for row in s.rows() {
            bands[(((1.0 - row[2]) / 2.0 * 8.0) as usize).min(7)] += 1;
        }
        assert!(bands.iter().all(|&b| b == 128), "{bands:?}");
    }

    #[test]
    fn spiral_examples() {
        let one = spiral_points(1).unwrap();
        assert_eq!(one.direction(0)[2], 0.0);
        let two = spiral_points(2).unwrap();
        assert_eq!([two.direction(0)[2], two.direction(1)[2]], [0.5, -0.5]);
        for l in [3usize, 10, 57, 100, 1000] {
            let s = spiral_points(l).unwrap();
            assert_unit(&s);
            let z: Vec<f64> = s.rows().map(|r| r[2]).collect();
            for w in z.windows(2) {
                assert!(w[0] > w[1]);
            }
            for i in 0..l {
                assert!((z[i] + z[l - 1 - i]).abs() < 1e-12);
                assert_eq!(z[i], 1.0 - (2.0 * (i + 1) as f64 - 1.0) / l as f64);
            }
        }
    }

    #[test]
    fn max_distance_two_points_go_antipodal() {
        let init = SpherePointSet::from_rows(3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0], Construction::Spiral).unwrap();
        let out = optimize_max_distance(&init, &OptimizerConfig::default()).unwrap();
        assert!((dot(out.direction(0), out.direction(1)) + 1.0).abs() < 1e-6);
    }

    #[test]
    fn coulomb_two_points_go_antipodal() {
        let init = spiral_points(2).unwrap();
        let r = optimize_energy(&init, PairEnergy::Coulomb, &OptimizerConfig::default()).unwrap();
        assert!((dot(r.points.direction(0), r.points.direction(1)) + 1.0).abs() < 1e-6);
        assert!((r.final_energy - 1.0).abs() < 1e-6);
    }

    #[test]
    fn optimizers_never_worsen_the_objective() {
        for l in [3usize, 7, 20, 64] {
            let init = spiral_points(l).unwrap();
            let d = optimize_energy(&init, PairEnergy::Distance, &OptimizerConfig::default()).unwrap();
            assert!(d.final_energy >= d.initial_energy - 1e-12);
            let c = optimize_energy(&init, PairEnergy::Coulomb, &OptimizerConfig::default()).unwrap();
            assert!(c.final_energy <= c.initial_energy + 1e-12);
            assert_unit(&d.points);
            assert_unit(&c.points);
        }
    }

    /// Best objective over random restarts; the oracle for the known optima.
    fn best_of_restarts(energy: PairEnergy, l: usize, restarts: u64) -> f64 {
        (0..restarts)
            .map(|s| {
                let init = random_uniform(l, 3, 500 + s).unwrap();
                optimize_energy(&init, energy, &OptimizerConfig { iterations: 3000, ..Default::default() })
                    .unwrap()
                    .final_energy
            })
            .fold(
                match energy {
                    PairEnergy::Distance => f64::MIN,
                    PairEnergy::Coulomb => f64::MAX,
                },
                |acc, e| match energy {
                    PairEnergy::Distance => acc.max(e),
                    PairEnergy::Coulomb => acc.min(e),
                },
            )
    }

    #[test]
    fn four_points_maximizing_distance_form_a_tetrahedron() {
        let out = build_construction(Construction::MaxDistance, 3, 4, &OptimizerConfig::default()).unwrap();
        for g in pairwise_dots(&out) {
            assert!((g + 1.0 / 3.0).abs() < 1e-3, "dot {g}");
        }
        let restart_best = best_of_restarts(PairEnergy::Distance, 4, 10);
        assert!(PairEnergy::Distance.energy(&out) >= restart_best - 1e-6);
    }

    #[test]
    fn six_points_minimizing_coulomb_form_an_octahedron() {
        let out = build_construction(Construction::MinCoulomb, 3, 6, &OptimizerConfig::default()).unwrap();
        let dots = pairwise_dots(&out);
        assert_eq!(dots.len(), 30);
        let zeros = dots.iter().filter(|g| g.abs() < 1e-3).count();
        let antipodes = dots.iter().filter(|g| (**g + 1.0).abs() < 1e-3).count();
        assert_eq!((zeros, antipodes), (24, 6));
        let restart_best = best_of_restarts(PairEnergy::Coulomb, 6, 10);
        assert!(PairEnergy::Coulomb.energy(&out) <= restart_best + 1e-6);
    }

    #[test]
    fn coincident_points_are_jittered() {
        let init =
            SpherePointSet::from_rows(3, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0], Construction::Spiral)
                .unwrap();
        let r = optimize_energy(&init, PairEnergy::Coulomb, &OptimizerConfig::default()).unwrap();
        assert!(r.jittered && r.points.jittered);
        assert!(r.final_energy.is_finite());
        assert_unit(&r.points);
    }

    #[test]
    fn optimizers_are_deterministic() {
        let a = build_construction(Construction::MinCoulomb, 3, 30, &OptimizerConfig::default()).unwrap();
        let b = build_construction(Construction::MinCoulomb, 3, 30, &OptimizerConfig::default()).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn scaled_baseline_examples() {
        let c = CubePointSet::from_rows(3, vec![0.5, 0.0, 0.0], Generator::Halton).unwrap();
        assert_eq!(scaled_map_baseline(&c).unwrap().as_slice(), &[1.0, 0.0, 0.0]);
        let h = scaled_map_baseline(&qmc::halton_generate(3, 100).unwrap()).unwrap();
        assert!(h.as_slice().iter().all(|&x| x >= 0.0));
        let zero = CubePointSet::from_rows(3, vec![0.0, 0.0, 0.0], Generator::Halton).unwrap();
        assert_eq!(scaled_map_baseline(&zero), Err(Error::DegeneratePoint { index: 0 }));
    }

    #[test]
    fn random_uniform_examples() {
        let s = random_uniform(100_000, 3, 42).unwrap();
        assert_unit(&s);
        for k in 0..3 {
            let mean: f64 = s.rows().map(|r| r[k]).sum::<f64>() / 1e5;
            assert!(mean.abs() < 0.01, "mean {mean}");
        }
        assert_eq!(random_uniform(50, 4, 7).unwrap(), random_uniform(50, 4, 7).unwrap());
    }

    #[test]
    fn rotations_are_orthogonal_and_isometric() {
        let base = spiral_points(40).unwrap();
        let g0 = base.gram();
        for seed in 0..50 {
            let u = sample_rotation(3, seed).unwrap();
            assert!(u.orthogonality_error() < 1e-10);
            assert!((u.determinant().abs() - 1.0).abs() < 1e-10);
            let rotated = rotate_pointset(&base, &u).unwrap();
            assert_unit(&rotated);
            for (a, b) in g0.iter().zip(rotated.gram()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        for d in [2usize, 5, 9] {
            assert!(sample_rotation(d, 1).unwrap().orthogonality_error() < 1e-10);
        }
    }

    #[test]
    fn rotation_draws_both_determinant_signs() {
        let signs: Vec<bool> = (0..64).map(|s| sample_rotation(3, s).unwrap().determinant() > 0.0).collect();
        assert!(signs.iter().any(|&s| s) && signs.iter().any(|&s| !s));
    }

    #[test]
    fn rotated_fixed_vector_is_uniform() {
        let v = [0.0, 0.0, 1.0];
        let mut sum = [0.0; 3];
        let mut out = [0.0; 3];
        for seed in 0..10_000 {
            sample_rotation(3, seed).unwrap().apply(&v, &mut out);
            for k in 0..3 {
                sum[k] += out[k];
            }
        }
        for s in sum {
            assert!((s / 1e4).abs() < 0.03);
        }
    }

    #[test]
    fn identity_rotation_and_shape_check() {
        let s = spiral_points(10).unwrap();
        assert_eq!(rotate_pointset(&s, &RotationMatrix::identity(3)).unwrap().as_slice(), s.as_slice());
        assert!(matches!(rotate_pointset(&s, &RotationMatrix::identity(4)), Err(Error::Shape { .. })));
    }

    fn mean_resultant_length(draw: impl Fn(u64) -> Vec<f64>) -> f64 {
        let mut sum = [0.0; 3];
        for seed in 0..10_000u64 {
            let v = draw(seed);
            for k in 0..3 {
                sum[k] += v[k];
            }
        }
        libm::sqrt(sum.iter().map(|s| (s / 1e4) * (s / 1e4)).sum())
    }

    #[test]
    fn randomized_single_directions_are_uniform() {
        let config = OptimizerConfig::default();
        for map in [PushforwardMap::GaussianMap, PushforwardMap::EqualArea] {
            for rand in [CubeRandomization::Scramble, CubeRandomization::Shift] {
                let r = mean_resultant_length(|seed| {
                    pushforward_randomized(map, rand, 3, 16, seed).unwrap().direction(5).to_vec()
                });
                assert!(r < 0.03, "{map:?} {rand:?} resultant {r}");
            }
        }
        for c in Construction::QMC {
            let base = build_construction(c, 3, 16, &config).unwrap();
            let r = mean_resultant_length(|seed| random_rotation_of(&base, seed).unwrap().direction(3).to_vec());
            assert!(r < 0.03, "{c:?} resultant {r}");
        }
    }

    #[test]
    fn sphere_only_constructions_reject_other_dimensions() {
        let config = OptimizerConfig::default();
        for c in [Construction::EqualArea, Construction::Spiral, Construction::MinCoulomb] {
            assert!(matches!(build_construction(c, 4, 10, &config), Err(Error::Unsupported(_))));
        }
        assert_eq!(build_construction(Construction::GaussianMap, 5, 10, &config).unwrap().dim(), 5);
    }

    #[test]
    fn cache_round_trip() {
        let mut cache = MemoryCache::new();
        let config = OptimizerConfig::default();
        let a = cached_construction(Construction::MinCoulomb, 3, 12, &config, &mut cache).unwrap();
        assert_eq!(cache.len(), 1);
        let b = cached_construction(Construction::MinCoulomb, 3, 12, &config, &mut cache).unwrap();
        assert_eq!(a, b);
        let other = OptimizerConfig { iterations: 10, ..config };
        assert_ne!(
            CacheKey::new(Construction::MinCoulomb, 3, 12, &config),
            CacheKey::new(Construction::MinCoulomb, 3, 12, &other)
        );
        assert_eq!(CacheKey::new(Construction::Spiral, 3, 12, &config).file_stem(), "spiral_d3_L12_0000000000000000");
    }
}
