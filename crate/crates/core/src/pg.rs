//! Polya-Gamma PG(1, z) random variates.
//!
//! `pg_draw` is the exact rejection sampler built on the alternating-series
//! bound of the Jacobi-type density: propose from a truncated inverse
//! Gaussian below the pivot point and from a tilted exponential tail above
//! it, then accept by comparing a uniform against the partial sums of the
//! series. Expected iterations stay O(1) uniformly in z.
//!
//! `pg_oracle_draw` is a deliberately different route, the truncated
//! infinite convolution of gammas, kept as an independent check on
//! `pg_draw`. It is biased slightly low by the truncation (relative error
//! around 2.5e-4 at 200 terms) and costs 200 exponential draws per sample,
//! so it is only suitable as a test oracle.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use statrs::function::erf::erfc;
use std::f64::consts::{FRAC_2_PI, PI};

/// Proposal split point for the rejection sampler.
const PIVOT: f64 = FRAC_2_PI;

/// Terms of the gamma-convolution oracle.
const ORACLE_TERMS: usize = 200;

#[inline]
fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// n-th coefficient of the alternating series for the Jacobi-type density
/// at x, using the small-x (inverse-Gaussian-like) form below the pivot and
/// the large-x (exponential-like) form above it.
#[inline]
fn series_coef(n: usize, x: f64) -> f64 {
    let k = n as f64 + 0.5;
    if x > PIVOT {
        PI * k * (-k * k * PI * PI * x / 2.0).exp()
    } else {
        (2.0 / (PI * x)).powf(1.5) * PI * k * (-2.0 * k * k / x).exp()
    }
}

/// Probability that the proposal comes from the exponential tail rather than
/// the truncated inverse Gaussian, for half-tilt z.
fn tail_mass(z: f64, tilt_rate: f64) -> f64 {
    let t = PIVOT;
    let inv_sqrt_t = 1.0 / t.sqrt();
    let b = inv_sqrt_t * (t * z - 1.0);
    let a = -inv_sqrt_t * (t * z + 1.0);
    let x0 = tilt_rate.ln() + tilt_rate * t;
    let xb = x0 - z + norm_cdf(b).ln();
    let xa = x0 + z + norm_cdf(a).ln();
    let q_over_p = 4.0 / PI * (xb.exp() + xa.exp());
    1.0 / (1.0 + q_over_p)
}

/// Inverse Gaussian with mean 1/z and shape 1, conditioned on (0, pivot].
/// Two regimes: for small z the mean sits far right of the pivot, so sample
/// the truncation region directly and thin by the tilt; otherwise use the
/// standard transform sampler and retry until inside the region.
fn truncated_inv_gauss<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    let t = PIVOT;
    if z * t < 1.0 {
        loop {
            let e1: f64 = rng.sample(Exp1);
            let e2: f64 = rng.sample(Exp1);
            if e1 * e1 > 2.0 * e2 / t {
                continue;
            }
            let x = t / (1.0 + t * e1) / (1.0 + t * e1);
            if rng.gen::<f64>() <= (-0.5 * z * z * x).exp() {
                return x;
            }
        }
    } else {
        let mu = 1.0 / z;
        loop {
            let y: f64 = rng.sample::<f64, _>(StandardNormal).powi(2);
            let muy = mu * y;
            let mut x = mu + 0.5 * mu * muy - 0.5 * mu * (4.0 * muy + muy * muy).sqrt();
            if rng.gen::<f64>() > mu / (mu + x) {
                x = mu * mu / x;
            }
            if x <= t {
                return x;
            }
        }
    }
}

/// Exact draw from PG(1, tilt). The tilt enters through its absolute value;
/// PG(1, z) and PG(1, -z) coincide.
pub fn pg_draw<R: Rng + ?Sized>(tilt: f64, rng: &mut R) -> f64 {
    let z = tilt.abs() * 0.5;
    let tilt_rate = PI * PI / 8.0 + z * z / 2.0;
    let p_tail = tail_mass(z, tilt_rate);
    loop {
        let x = if rng.gen::<f64>() < p_tail {
            let e: f64 = rng.sample(Exp1);
            PIVOT + e / tilt_rate
        } else {
            truncated_inv_gauss(z, rng)
        };
        // Alternating partial sums: odd terms bound from below (accept),
        // even terms from above (reject and retry).
        let s0 = series_coef(0, x);
        let y = rng.gen::<f64>() * s0;
        let mut s = s0;
        let mut n = 0;
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

/// Oracle draw: truncated convolution-of-gammas representation,
/// sum_{k=1..K} g_k / ((k - 1/2)^2 + (z / 2 pi)^2) / (2 pi^2), g_k ~ Exp(1).
pub fn pg_oracle_draw<R: Rng + ?Sized>(tilt: f64, rng: &mut R) -> f64 {
    let c = (tilt.abs() / (2.0 * PI)).powi(2);
    let mut sum = 0.0;
    for k in 1..=ORACLE_TERMS {
        let g: f64 = rng.sample(Exp1);
        let km = k as f64 - 0.5;
        sum += g / (km * km + c);
    }
    sum / (2.0 * PI * PI)
}

/// Mean of PG(1, z): tanh(z/2) / (2 z), continuously extended to 1/4 at 0.
pub fn pg_mean(tilt: f64) -> f64 {
    let z = tilt.abs();
    if z < 1e-8 {
        0.25
    } else {
        (z / 2.0).tanh() / (2.0 * z)
    }
}
