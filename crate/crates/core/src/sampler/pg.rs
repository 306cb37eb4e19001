//! Pólya-Gamma PG(b, z) variates for integer b.
//!
//! PG(1, z) is drawn with Devroye's alternating-series accept/reject scheme
//! for the Jacobi distribution J*(1, z/2), using PG(1, z) = J*(1, z/2) / 4.
//! The proposal mixes a truncated inverse-Gaussian on (0, t] with an
//! exponential tail on (t, inf), t = 0.64.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use statrs::function::erf::erfc;

use super::SamplerError;

const TRUNC: f64 = 0.64;
const PI_SQ_8: f64 = PI * PI / 8.0;

/// Draws from PG(b, z). Only `b >= 1` is supported; PG(b, z) is the sum of
/// `b` independent PG(1, z) draws.
pub fn pg_draw<R: Rng + ?Sized>(b: u32, z: f64, rng: &mut R) -> Result<f64, SamplerError> {
    if !z.is_finite() {
        return Err(SamplerError::InvalidArgument(format!("Pólya-Gamma tilt must be finite, got {z}")));
    }
    if b == 0 {
        return Err(SamplerError::InvalidArgument("Pólya-Gamma shape must be at least 1".into()));
    }
    Ok((0..b).map(|_| pg1(z, rng)).sum())
}

/// PG(1, z) mean, `tanh(z/2) / (2z)`, with its limit 1/4 at zero.
pub fn pg_mean(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        0.25 - z * z / 48.0
    } else {
        (0.5 * z).tanh() / (2.0 * z)
    }
}

pub(crate) fn pg1<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    let z = 0.5 * z.abs();
    let k = PI_SQ_8 + 0.5 * z * z;
    let p = FRAC_PI_2 / k * (-k * TRUNC).exp();
    let q = 2.0 * (-z).exp() * inverse_gaussian_cdf_at_trunc(z);
    let left_tail = p / (p + q);

    loop {
        let x = if rng.random::<f64>() < left_tail {
            let e: f64 = Exp1.sample(rng);
            TRUNC + e / k
        } else {
            truncated_inverse_gaussian(z, rng)
        };
        let mut s = series_coef(0, x);
        let y = rng.random::<f64>() * s;
        let mut n = 0u32;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= series_coef(n, x);
                if y <= s {
                    return 0.25 * x;
                }
            } else {
                s += series_coef(n, x);
                if y > s {
                    break;
                }
            }
        }
    }
}

/// Coefficient `a_n(x)` of the alternating series for the J*(1) density,
/// switching representation at the truncation point.
fn series_coef(n: u32, x: f64) -> f64 {
    let k = f64::from(n) + 0.5;
    if x > TRUNC {
        PI * k * (-0.5 * k * k * PI * PI * x).exp()
    } else {
        PI * k * (2.0 / (PI * x)).powf(1.5) * (-2.0 * k * k / x).exp()
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// CDF at `TRUNC` of the inverse Gaussian with mean 1/z and shape 1.
fn inverse_gaussian_cdf_at_trunc(z: f64) -> f64 {
    let root = TRUNC.sqrt();
    let first = std_normal_cdf((TRUNC * z - 1.0) / root);
    let tail = std_normal_cdf(-(TRUNC * z + 1.0) / root);
    // exp(2z) * tail, kept in log space so large z cannot overflow.
    let second = if tail > 0.0 { (2.0 * z + tail.ln()).exp() } else { 0.0 };
    first + second
}

/// Inverse Gaussian with mean 1/z and shape 1, truncated to (0, TRUNC].
fn truncated_inverse_gaussian<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    if z < 1.0 / TRUNC {
        // Mean beyond the truncation point: propose from a truncated
        // 1/chi^2_1 and accept with the exponential tilt.
        loop {
            let x = loop {
                let e1: f64 = Exp1.sample(rng);
                let e2: f64 = Exp1.sample(rng);
                if e1 * e1 <= 2.0 * e2 / TRUNC {
                    break TRUNC / (1.0 + TRUNC * e1).powi(2);
                }
            };
            if rng.random::<f64>() <= (-0.5 * z * z * x).exp() {
                return x;
            }
        }
    }
    let mu = 1.0 / z;
    loop {
        let n: f64 = StandardNormal.sample(rng);
        let y = n * n;
        let muy = mu * y;
        let mut x = mu + 0.5 * mu * muy - 0.5 * mu * (4.0 * muy + muy * muy).sqrt();
        if rng.random::<f64>() > mu / (mu + x) {
            x = mu * mu / x;
        }
        if x <= TRUNC {
            return x;
        }
    }
}
