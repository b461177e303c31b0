//! Seeded synthetic point clouds for tests and experiments.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::normalize;
use crate::ot1d::PointCloud;
use crate::rng::seeded_rng;
use crate::{Error, Result};

/// `n` points from `k` isotropic Gaussian blobs (σ = 0.3) whose centres are
/// drawn from N(0, 4 I).
pub fn gaussian_blobs(n: usize, dim: usize, k: usize, seed: u64) -> Result<PointCloud> {
    if k == 0 || n == 0 {
        return Err(Error::domain("gaussian_blobs needs n >= 1 and k >= 1"));
    }
    let mut rng = seeded_rng(seed);
    let centres: Vec<f64> = (0..k * dim).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut points = Vec::with_capacity(n * dim);
    for i in 0..n {
        let c = &centres[(i % k) * dim..(i % k + 1) * dim];
        points.extend(c.iter().map(|m| m + 0.3 * rng.sample::<f64, _>(StandardNormal)));
    }
    PointCloud::new(dim, points)
}

/// `n` points uniform on the sphere of radius `radius` in R³.
pub fn sphere_shell(n: usize, radius: f64, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::domain("sphere_shell needs n >= 1"));
    }
    let mut rng = seeded_rng(seed);
    let mut points = Vec::with_capacity(n * 3);
    for _ in 0..n {
        let mut v = [0.0; 3];
        while {
            v.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
            normalize(&mut v) == 0.0
        } {}
        points.extend(v.iter().map(|x| radius * x));
    }
    PointCloud::new(3, points)
}

/// `n` points on a torus with tube centre radius `major` and tube radius
/// `minor`, angles drawn uniformly.
pub fn torus(n: usize, major: f64, minor: f64, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::domain("torus needs n >= 1"));
    }
    let mut rng = seeded_rng(seed);
    let mut points = Vec::with_capacity(n * 3);
    for _ in 0..n {
        let u: f64 = rng.random_range(0.0..2.0 * PI);
        let v: f64 = rng.random_range(0.0..2.0 * PI);
        let r = major + minor * libm::cos(v);
        points.extend_from_slice(&[r * libm::cos(u), r * libm::sin(u), minor * libm::sin(v)]);
    }
    PointCloud::new(3, points)
}

/// One-point clouds at the origin and at `offset`.
pub fn dirac_pair(offset: [f64; 3]) -> (PointCloud, PointCloud) {
    (PointCloud::new(3, alloc::vec![0.0; 3]).expect("finite"), PointCloud::new(3, offset.to_vec()).expect("finite"))
}

/// `n` points uniform in the cube `[-1, 1]³`.
pub fn uniform_cube(n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::domain("uniform_cube needs n >= 1"));
    }
    let mut rng = seeded_rng(seed);
    PointCloud::new(3, (0..3 * n).map(|_| rng.random_range(-1.0..1.0)).collect())
}
