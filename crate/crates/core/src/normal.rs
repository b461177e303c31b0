//! Standard normal CDF and its inverse.
//!
//! The inverse uses Acklam's rational approximation (relative error about
//! 1.15e-9) followed by one Halley step against the `erfc`-based CDF, which
//! brings the absolute error below 1e-12 on (1e-10, 1 - 1e-10).

use core::f64::consts::{PI, SQRT_2};

// Acklam's coefficients.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [7.784_695_709_041_462e-3, 3.224_671_290_700_398e-1, 2.445_134_137_142_996, 3.754_408_661_907_416];
const P_LOW: f64 = 0.02425;

/// Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Φ⁻¹(p) for p in (0, 1). Returns ±∞ at the endpoints and NaN outside.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }

    let x = if p < P_LOW {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * libm::log(1.0 - p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // Halley refinement.
    let e = normal_cdf(x) - p;
    let u = e * libm::sqrt(2.0 * PI) * libm::exp(0.5 * x * x);
    x - u / (1.0 + 0.5 * x * u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_quantiles() {
        assert_eq!(inverse_normal_cdf(0.5), 0.0);
        assert!((inverse_normal_cdf(0.841_344_746_068_542_9) - 1.0).abs() < 1e-12);
        assert!((inverse_normal_cdf(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((inverse_normal_cdf(0.025) + 1.959_963_984_540_054).abs() < 1e-12);
        assert!((inverse_normal_cdf(1e-10) + 6.361_340_902_404_056).abs() < 1e-9);
    }

    #[test]
    fn round_trip_through_cdf() {
        // The implied quantile error is (Φ(x) - p) / φ(x); the second term
        // is the rounding floor of evaluating Φ(x) - p itself.
        for k in 0..=100 {
            let tail = libm::pow(10.0, -(k as f64) / 10.0) * 0.5;
            for p in [tail, 1.0 - tail] {
                let x = inverse_normal_cdf(p);
                let density = libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * PI);
                let implied = (normal_cdf(x) - p).abs() / density;
                let floor = 8.0 * f64::EPSILON * p / density;
                assert!(implied <= 1e-12 + floor, "p={p} x={x} implied={implied}");
            }
        }
    }

    #[test]
    fn symmetric() {
        for &p in &[1e-8, 0.001, 0.01, 0.2, 0.4] {
            // q and 1 - q are both exact, so the pair is truly symmetric
            let q = 1.0 - p;
            assert!((inverse_normal_cdf(1.0 - q) + inverse_normal_cdf(q)).abs() < 1e-9);
        }
    }

    #[test]
    fn endpoints() {
        assert_eq!(inverse_normal_cdf(0.0), f64::NEG_INFINITY);
        assert_eq!(inverse_normal_cdf(1.0), f64::INFINITY);
        assert!(inverse_normal_cdf(1.5).is_nan());
    }
}
