//! Truncated normal draws.
//!
//! Central regions use inversion of the normal CDF, working in whichever tail
//! keeps the probabilities away from 1. Regions lying entirely beyond
//! [`TAIL_CUTOFF`] standard deviations use Robert's translated-exponential
//! rejection sampler (or a uniform proposal for very narrow windows).

use rand::Rng;
use rand_distr::{Distribution, Exp, Uniform};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

pub const TAIL_CUTOFF: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationBounds {
    lower: f64,
    upper: f64,
}

impl TruncationBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::InvalidArgument(format!(
                "invalid truncation bounds [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse standard normal CDF.
pub fn std_normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

pub fn sample_truncated_normal<R: Rng + ?Sized>(
    mean: f64,
    sd: f64,
    bounds: TruncationBounds,
    rng: &mut R,
) -> Result<f64> {
    if !mean.is_finite() || !sd.is_finite() || sd <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "truncated normal needs finite mean and positive sd, got ({mean}, {sd})"
        )));
    }
    let a = (bounds.lower - mean) / sd;
    let b = (bounds.upper - mean) / sd;
    let z = standard_truncated(a, b, rng);
    let mut x = mean + sd * z;
    // rounding in the affine map can land on or past a bound
    if x <= bounds.lower {
        x = bounds.lower.next_up();
    }
    if x >= bounds.upper {
        x = bounds.upper.next_down();
    }
    Ok(x.clamp(bounds.lower, bounds.upper))
}

fn standard_truncated<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if a >= TAIL_CUTOFF {
        right_tail(a, b, rng)
    } else if b <= -TAIL_CUTOFF {
        -right_tail(-b, -a, rng)
    } else {
        inversion(a, b, rng)
    }
}

fn unit_open<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

fn inversion<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let u = unit_open(rng);
    if a >= 0.0 {
        // upper-tail probabilities keep precision when both bounds are positive
        let qa = std_normal_cdf(-a);
        let qb = std_normal_cdf(-b);
        let q = qb + u * (qa - qb);
        -std_normal_quantile(q)
    } else {
        let pa = std_normal_cdf(a);
        let pb = std_normal_cdf(b);
        let p = pa + u * (pb - pa);
        std_normal_quantile(p)
    }
}

/// Draws from N(0,1) restricted to `[a, b]` with `a >= TAIL_CUTOFF`.
fn right_tail<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if b.is_finite() && (b - a) < 1.0 / a {
        let unif = Uniform::new(a, b).expect("a < b");
        loop {
            let z = unif.sample(rng);
            if unit_open(rng) <= (0.5 * (a * a - z * z)).exp() {
                return z;
            }
        }
    }
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    let exp = Exp::new(rate).expect("positive rate");
    loop {
        let z = a + exp.sample(rng);
        if z > b {
            continue;
        }
        if unit_open(rng) <= (-0.5 * (z - rate) * (z - rate)).exp() {
            return z;
        }
    }
}
