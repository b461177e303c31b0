//! Low-discrepancy sequences on the unit cube and their randomizations.
//!
//! * [`sobol_generate`]: Sobol points in Gray-code (Antonov–Saleev) order from
//!   the bundled direction-number table, 32-bit digits.
//! * [`halton_generate`]: radical inverses in the first ten primes,
//!   starting at index 1 so that no point sits at the origin.
//! * [`shift_randomize`]: Cranley–Patterson rotation `(x + U) mod 1`.
//! * [`scramble_randomize`]: random linear matrix scrambling plus a random
//!   digital shift, per dimension, on the 32 base-2 digits.
//! * [`star_discrepancy`]: exact D* for small instances, used as an oracle.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::rng::seeded_rng;
use crate::{Error, Result};

/// Number of base-2 digits carried by every digital operation.
pub const DIGITS: u32 = 32;
const TWO_POW_32: f64 = 4_294_967_296.0;

/// Largest dimension [`halton_generate`] supports.
pub const HALTON_MAX_DIM: usize = 10;
const PRIMES: [u64; HALTON_MAX_DIM] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

/// Point-count limits of the exact [`star_discrepancy`] evaluator.
pub const STAR_LIMIT_2D: usize = 512;
pub const STAR_LIMIT_3D: usize = 128;

static BUNDLED_TABLE: &str = include_str!("../data/new-joe-kuo-6.21.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Generator {
    Sobol,
    Halton,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CubeRandomization {
    None,
    Shift,
    Scramble,
}

/// `len` points in `[0, 1)^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CubePointSet {
    dim: usize,
    points: Vec<f64>,
    pub generator: Generator,
    pub randomization: CubeRandomization,
    pub seed: Option<u64>,
}

impl CubePointSet {
    /// Wraps raw rows; every coordinate must lie in `[0, 1)`.
    pub fn from_rows(dim: usize, points: Vec<f64>, generator: Generator) -> Result<Self> {
        if dim == 0 {
            return Err(Error::UnsupportedDimension { dim, supported: ">= 1" });
        }
        if points.is_empty() || points.len() % dim != 0 {
            return Err(Error::Shape { expected: dim, got: points.len() });
        }
        if let Some(x) = points.iter().find(|x| !(0.0..1.0).contains(*x)) {
            return Err(Error::domain(alloc::format!("coordinate {x} outside [0, 1)")));
        }
        Ok(Self { dim, points, generator, randomization: CubeRandomization::None, seed: None })
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
}

/// Primitive polynomial and initial values for one Sobol dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SobolDimension {
    pub degree: u32,
    /// a_1 .. a_(s-1) packed with a_1 as the most significant bit.
    pub coefficients: u32,
    pub initial: Vec<u32>,
}

impl SobolDimension {
    /// The 32 direction integers `v_k = m_k · 2^(32-k)`, k = 1..=32.
    pub fn direction_integers(&self) -> [u32; DIGITS as usize] {
        let s = self.degree as usize;
        let mut m = [0u64; DIGITS as usize];
        for (k, &mk) in self.initial.iter().enumerate().take(DIGITS as usize) {
            m[k] = mk as u64;
        }
        for k in s..DIGITS as usize {
            // m_k = 2 a_1 m_(k-1) ⊕ 4 a_2 m_(k-2) ⊕ … ⊕ 2^s m_(k-s) ⊕ m_(k-s)
            let mut value = m[k - s] ^ (m[k - s] << s);
            for i in 1..s {
                let a_i = (self.coefficients >> (s - 1 - i)) & 1;
                if a_i == 1 {
                    value ^= m[k - i] << i;
                }
            }
            m[k] = value;
        }
        let mut v = [0u32; DIGITS as usize];
        for k in 0..DIGITS as usize {
            v[k] = (m[k] << (DIGITS as usize - 1 - k)) as u32;
        }
        v
    }
}

/// Direction-number table; dimension 1 (the van der Corput sequence) is
/// implicit and not stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SobolDirectionTable {
    dimensions: Vec<SobolDimension>,
}

impl SobolDirectionTable {
    /// The table shipped with the crate (dimensions 1..=21).
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_TABLE).expect("bundled direction table is valid")
    }

    /// Parses the plain-text format documented in `data/new-joe-kuo-6.21.txt`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut dimensions = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: &str| Error::Parse { line: line_no, message: message.to_string() };
            let mut fields = line.split_whitespace().map(|f| f.parse::<u32>());
            let degree = fields
                .next()
                .ok_or_else(|| parse_err("missing degree"))?
                .map_err(|_| parse_err("degree is not an integer"))?;
            let coefficients = fields
                .next()
                .ok_or_else(|| parse_err("missing coefficients"))?
                .map_err(|_| parse_err("coefficients are not an integer"))?;
            let initial = fields
                .collect::<core::result::Result<Vec<u32>, _>>()
                .map_err(|_| parse_err("initial value is not an integer"))?;
            if degree == 0 || degree > DIGITS {
                return Err(parse_err("degree out of range"));
            }
            if degree > 1 && coefficients >= 1 << (degree - 1) {
                return Err(parse_err("coefficients need more than degree-1 bits"));
            }
            if initial.len() != degree as usize {
                return Err(parse_err("number of initial values differs from degree"));
            }
            for (k, &m) in initial.iter().enumerate() {
                if m % 2 == 0 || (m as u64) >= 1u64 << (k + 1) {
                    return Err(parse_err("initial values must be odd with m_k < 2^k"));
                }
            }
            dimensions.push(SobolDimension { degree, coefficients, initial });
        }
        Ok(Self { dimensions })
    }

    /// Number of dimensions covered, counting the implicit first one.
    pub fn max_dim(&self) -> usize {
        self.dimensions.len() + 1
    }

    /// Stored entry for 1-based dimension `j ≥ 2`.
    pub fn entry(&self, j: usize) -> Option<&SobolDimension> {
        j.checked_sub(2).and_then(|i| self.dimensions.get(i))
    }

    /// Direction integers for 1-based dimension `j`.
    pub fn direction_integers(&self, j: usize) -> Option<[u32; DIGITS as usize]> {
        if j == 1 {
            let mut v = [0u32; DIGITS as usize];
            for (k, vk) in v.iter_mut().enumerate() {
                *vk = 1u32 << (DIGITS as usize - 1 - k);
            }
            Some(v)
        } else {
            self.entry(j).map(SobolDimension::direction_integers)
        }
    }
}

/// Raw 32-bit Sobol digits of points `offset..offset+len`, row-major.
pub fn sobol_digits(dim: usize, len: usize, offset: u64) -> Result<Vec<u32>> {
    let table = SobolDirectionTable::bundled();
    if dim == 0 || dim > table.max_dim() {
        return Err(Error::UnsupportedDimension { dim, supported: "1..=21 (bundled Sobol table)" });
    }
    if len == 0 {
        return Err(Error::domain("point count must be at least 1"));
    }
    let last = offset.checked_add(len as u64 - 1).ok_or(Error::IndexRange { index: u64::MAX })?;
    if last > u32::MAX as u64 {
        return Err(Error::IndexRange { index: last });
    }
    let directions: Vec<[u32; 32]> =
        (1..=dim).map(|j| table.direction_integers(j).expect("dimension checked above")).collect();

    let mut out = Vec::with_capacity(dim * len);
    for i in offset..=last {
        let gray = (i ^ (i >> 1)) as u32;
        for v in &directions {
            let mut x = 0u32;
            let mut bits = gray;
            while bits != 0 {
                let k = bits.trailing_zeros() as usize;
                x ^= v[k];
                bits &= bits - 1;
            }
            out.push(x);
        }
    }
    Ok(out)
}

/// Points `offset..offset+len` of the `dim`-dimensional Sobol sequence.
/// Index 0 is the origin.
pub fn sobol_generate(dim: usize, len: usize, offset: u64) -> Result<CubePointSet> {
    let digits = sobol_digits(dim, len, offset)?;
    let points = digits.into_iter().map(|x| x as f64 / TWO_POW_32).collect();
    Ok(CubePointSet { dim, points, generator: Generator::Sobol, randomization: CubeRandomization::None, seed: None })
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut acc = 0.0;
    while i > 0 {
        acc += (i % base) as f64 * scale;
        i /= base;
        scale *= inv;
    }
    acc
}

/// Halton points with indices `1..=len`.
pub fn halton_generate(dim: usize, len: usize) -> Result<CubePointSet> {
    if dim == 0 || dim > HALTON_MAX_DIM {
        return Err(Error::UnsupportedDimension { dim, supported: "1..=10 (Halton)" });
    }
    if len == 0 {
        return Err(Error::domain("point count must be at least 1"));
    }
    let mut points = Vec::with_capacity(dim * len);
    for i in 1..=len as u64 {
        points.extend(PRIMES[..dim].iter().map(|&b| radical_inverse(i, b)));
    }
    Ok(CubePointSet { dim, points, generator: Generator::Halton, randomization: CubeRandomization::None, seed: None })
}

/// `len` i.i.d. uniform points; the MC baseline on the cube.
pub fn random_cube(dim: usize, len: usize, seed: u64) -> Result<CubePointSet> {
    if dim == 0 {
        return Err(Error::UnsupportedDimension { dim, supported: ">= 1" });
    }
    if len == 0 {
        return Err(Error::domain("point count must be at least 1"));
    }
    let mut rng = seeded_rng(seed);
    let points = (0..dim * len).map(|_| rng.random::<f64>()).collect();
    Ok(CubePointSet {
        dim,
        points,
        generator: Generator::Random,
        randomization: CubeRandomization::None,
        seed: Some(seed),
    })
}

/// Adds `shift` to every point modulo 1.
pub fn shift_by(points: &CubePointSet, shift: &[f64]) -> Result<CubePointSet> {
    if shift.len() != points.dim {
        return Err(Error::Shape { expected: points.dim, got: shift.len() });
    }
    let mut out = points.clone();
    for row in out.points.chunks_exact_mut(points.dim) {
        for (x, u) in row.iter_mut().zip(shift) {
            let mut y = *x + u;
            if y >= 1.0 {
                y -= 1.0;
            }
            // x + u can round up to exactly 1.0 before the subtraction.
            if y >= 1.0 {
                y = 0.0;
            }
            *x = y;
        }
    }
    out.randomization = CubeRandomization::Shift;
    Ok(out)
}

/// Cranley–Patterson rotation by one uniform vector drawn from `seed`.
pub fn shift_randomize(points: &CubePointSet, seed: u64) -> CubePointSet {
    let mut rng = seeded_rng(seed);
    let shift: Vec<f64> = (0..points.dim).map(|_| rng.random::<f64>()).collect();
    let mut out = shift_by(points, &shift).expect("shift has the point dimension");
    out.seed = Some(seed);
    out
}

/// Linear matrix scramble plus digital shift for every dimension.
///
/// `columns[j][b]` is the image of input digit bit `b` (bit 31 is the most
/// significant digit). Each column has its own bit set and arbitrary bits
/// below it, which makes the scramble matrix lower triangular with a unit
/// diagonal in digit order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitalScramble {
    columns: Vec<[u32; DIGITS as usize]>,
    shifts: Vec<u32>,
}

impl DigitalScramble {
    pub fn identity(dim: usize) -> Self {
        let mut col = [0u32; DIGITS as usize];
        for (b, c) in col.iter_mut().enumerate() {
            *c = 1 << b;
        }
        Self { columns: vec![col; dim], shifts: vec![0; dim] }
    }

    pub fn random(dim: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let mut columns = Vec::with_capacity(dim);
        let mut shifts = Vec::with_capacity(dim);
        for _ in 0..dim {
            let mut col = [0u32; DIGITS as usize];
            for (b, c) in col.iter_mut().enumerate() {
                let below = if b == 0 { 0 } else { rng.random::<u32>() & ((1u32 << b) - 1) };
                *c = (1u32 << b) | below;
            }
            columns.push(col);
            shifts.push(rng.random::<u32>());
        }
        Self { columns, shifts }
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// Scrambles one 32-bit digit word of dimension `j`.
    #[inline]
    pub fn apply_digits(&self, j: usize, x: u32) -> u32 {
        let col = &self.columns[j];
        let mut y = self.shifts[j];
        let mut bits = x;
        while bits != 0 {
            let b = bits.trailing_zeros() as usize;
            y ^= col[b];
            bits &= bits - 1;
        }
        y
    }

    pub fn apply(&self, points: &CubePointSet) -> Result<CubePointSet> {
        if points.generator != Generator::Sobol || points.randomization != CubeRandomization::None {
            return Err(Error::UnsupportedRandomization(
                "digital scrambling needs an unrandomized base-2 digital (Sobol) point set",
            ));
        }
        if self.dim() != points.dim {
            return Err(Error::Shape { expected: points.dim, got: self.dim() });
        }
        let mut out = points.clone();
        for row in out.points.chunks_exact_mut(points.dim) {
            for (j, x) in row.iter_mut().enumerate() {
                let digits = (*x * TWO_POW_32) as u32;
                *x = self.apply_digits(j, digits) as f64 / TWO_POW_32;
            }
        }
        out.randomization = CubeRandomization::Scramble;
        Ok(out)
    }
}

/// Random linear matrix scramble + digital shift drawn from `seed`.
pub fn scramble_randomize(points: &CubePointSet, seed: u64) -> Result<CubePointSet> {
    let mut out = DigitalScramble::random(points.dim, seed).apply(points)?;
    out.seed = Some(seed);
    Ok(out)
}

/// Exact star discrepancy
/// `sup_x |#{x_i ∈ [0, x]} / L - vol([0, x])|` by enumerating box corners on
/// the coordinate grid, with both closed and open boxes at each corner.
///
/// Limits: `L ≤ 512` for `d ≤ 2`, `L ≤ 128` for `d = 3`; larger `d` is refused.
pub fn star_discrepancy(points: &CubePointSet) -> Result<f64> {
    let d = points.dim;
    let n = points.len();
    let limit = match d {
        1 | 2 => STAR_LIMIT_2D,
        3 => STAR_LIMIT_3D,
        _ => return Err(Error::UnsupportedDimension { dim: d, supported: "1..=3 (exact star discrepancy)" }),
    };
    if n > limit {
        return Err(Error::SizeLimit { what: "exact star discrepancy", got: n, limit });
    }

    // Per-dimension candidate upper corners: distinct coordinates plus 1.
    let grids: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut g: Vec<f64> = points.rows().map(|r| r[j]).collect();
            g.push(1.0);
            g.sort_by(f64::total_cmp);
            g.dedup();
            g
        })
        .collect();

    let inv_n = 1.0 / n as f64;
    let mut worst = 0.0f64;
    let mut idx = vec![0usize; d];
    let mut corner = vec![0.0; d];
    loop {
        for j in 0..d {
            corner[j] = grids[j][idx[j]];
        }
        let volume: f64 = corner.iter().product();
        let mut closed = 0usize;
        let mut open = 0usize;
        for row in points.rows() {
            let mut in_closed = true;
            let mut in_open = true;
            for (x, c) in row.iter().zip(&corner) {
                if x > c {
                    in_closed = false;
                    in_open = false;
                    break;
                }
                if x == c {
                    in_open = false;
                }
            }
            closed += in_closed as usize;
            open += in_open as usize;
        }
        worst = worst.max(closed as f64 * inv_n - volume).max(volume - open as f64 * inv_n);

        // odometer over the grid
        let mut j = 0;
        loop {
            if j == d {
                return Ok(worst);
            }
            idx[j] += 1;
            if idx[j] < grids[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}
