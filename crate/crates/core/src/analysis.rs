//! Analytic fill-fraction expectations and level/depth predictors.
//!
//! All logarithms of probabilities are natural unless a name says
//! otherwise; entropies and depth constants are in bits.

use std::f64::consts::{LN_2, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::source::check_p;
use crate::trie::check_alpha;

/// Number of keys: fixed, or Poisson with mean `lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Size {
    Fixed { n: u64 },
    Poisson { lambda: f64 },
}

impl Size {
    pub fn value(&self) -> f64 {
        match *self {
            Size::Fixed { n } => n as f64,
            Size::Poisson { lambda } => lambda,
        }
    }

    pub fn model_name(&self) -> &'static str {
        match self {
            Size::Fixed { .. } => "fixed",
            Size::Poisson { .. } => "poisson",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub p: f64,
    pub alpha: f64,
    pub size: Size,
}

impl ModelParams {
    pub fn new(p: f64, alpha: f64, size: Size) -> Result<Self> {
        check_p(p)?;
        check_alpha(alpha)?;
        if let Size::Poisson { lambda } = size {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::param("lambda", lambda, "must be positive and finite"));
            }
        }
        Ok(ModelParams { p, alpha, size })
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DerivedConstants {
    /// Shannon entropy, bits per symbol.
    pub h: f64,
    /// Rényi entropy of infinite order, `log2(1 / min(p, q))`.
    pub h_inf: f64,
    /// `log2(1 / sqrt(pq))`.
    pub b: f64,
    pub kappa: f64,
    pub rho: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthVariant {
    AlphaLc,
    FullLc,
}

/// `P(Po(mu) >= 2) = 1 - (1 + mu) e^-mu`.
pub fn prob_poisson_ge2(mu: f64) -> Result<f64> {
    if !(mu >= 0.0) {
        return Err(Error::param("mu", mu, "must be non-negative"));
    }
    Ok(poisson_ge2(mu))
}

fn poisson_ge2(mu: f64) -> f64 {
    if mu < 0.1 {
        // sum_{m>=2} (-1)^m (m-1) mu^m / m!
        let mut term = mu * mu / 2.0;
        let mut sum = term;
        for m in 3..40u32 {
            let m = m as f64;
            term *= -mu * (m - 1.0) / (m * (m - 2.0));
            sum += term;
            if term.abs() <= f64::EPSILON * 1e-3 * sum {
                break;
            }
        }
        sum
    } else {
        -(-mu).exp_m1() - mu * (-mu).exp()
    }
}

/// `P(Bin(n, q) >= 2)`.
pub fn prob_binomial_ge2(n: u64, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::param("q", q, "must lie in [0, 1]"));
    }
    Ok(binomial_ge2(n, q))
}

fn binomial_ge2(n: u64, q: f64) -> f64 {
    if n < 2 || q == 0.0 {
        return 0.0;
    }
    if q == 1.0 {
        return 1.0;
    }
    let nf = n as f64;
    let ln_keep = (-q).ln_1p();
    if nf * q < 0.5 {
        // Few successes expected: sum the upper pmf directly.
        let ln_pairs = (nf * (nf - 1.0) / 2.0).ln();
        let mut term = (ln_pairs + 2.0 * q.ln() + (nf - 2.0) * ln_keep).exp();
        let mut sum = term;
        let ratio = q / (1.0 - q);
        let mut i = 2.0;
        while i < nf {
            term *= (nf - i) / (i + 1.0) * ratio;
            sum += term;
            if term <= f64::EPSILON * 1e-3 * sum {
                break;
            }
            i += 1.0;
        }
        sum
    } else {
        let at_most_one = ((nf - 1.0) * ln_keep).exp() * (1.0 + (nf - 1.0) * q);
        (1.0 - at_most_one).max(0.0)
    }
}

/// `lambda p^j q^(k-j)`.
pub fn mu_j(lambda: f64, k: usize, j: usize, p: f64) -> Result<f64> {
    check_p(p)?;
    if j > k {
        return Err(Error::param("j", j as f64, "must not exceed k"));
    }
    let ln_prefix = j as f64 * p.ln() + (k - j) as f64 * (1.0 - p).ln();
    Ok((lambda.ln() + ln_prefix).exp())
}

pub(crate) fn ln_choose(k: usize, j: usize) -> f64 {
    let (k, j) = (k as f64, j as f64);
    ln_gamma(k + 1.0) - ln_gamma(j + 1.0) - ln_gamma(k - j + 1.0)
}

/// `E[X_k / 2^k]` under the fixed-n or Poisson model.
pub fn expected_fill_fraction(params: &ModelParams, k: usize) -> f64 {
    fill_fraction(params.p, params.size, k)
}

pub(crate) fn fill_fraction(p: f64, size: Size, k: usize) -> f64 {
    let (ln_p, ln_q) = (p.ln(), (1.0 - p).ln());
    let ln_half_k = -(k as f64) * LN_2;
    let mut total = 0.0;
    for j in 0..=k {
        let weight = (ln_choose(k, j) + ln_half_k).exp();
        if weight == 0.0 {
            continue;
        }
        let ln_prob = j as f64 * ln_p + (k - j) as f64 * ln_q;
        let filled = match size {
            Size::Poisson { lambda } => poisson_ge2((lambda.ln() + ln_prob).exp()),
            Size::Fixed { n } => binomial_ge2(n, ln_prob.exp()),
        };
        total += weight * filled;
    }
    total.min(1.0)
}

/// The real `gamma` with `lambda p^gamma q^(k - gamma) = 1`.
pub fn gamma_threshold(k: usize, lambda: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    let q = 1.0 - p;
    let ln_rho = (p / q).ln();
    if ln_rho == 0.0 {
        return Err(Error::param("p", p, "threshold undefined for p = 1/2"));
    }
    Ok((k as f64 * (1.0 / q).ln() - lambda.ln()) / ln_rho)
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of [`normal_cdf`]: rational approximation plus one Newton step.
pub fn normal_quantile(a: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::param("a", a, "must lie strictly between 0 and 1"));
    }
    let x = quantile_rational(a);
    // Newton against the upper tail when it is the smaller side.
    let step = if a < 0.5 {
        (normal_cdf(x) - a) / normal_pdf(x)
    } else {
        ((1.0 - a) - normal_cdf(-x)) / normal_pdf(x)
    };
    Ok(x - step)
}

// Acklam's coefficients, relative error about 1.2e-9 before refinement.
const QA: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383_577_518_672_69e2,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const QB: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const QC: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const QD: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];

fn quantile_rational(a: f64) -> f64 {
    const LOW: f64 = 0.02425;
    let tail = |t: f64| {
        let r = (-2.0 * t.ln()).sqrt();
        (((((QC[0] * r + QC[1]) * r + QC[2]) * r + QC[3]) * r + QC[4]) * r + QC[5])
            / ((((QD[0] * r + QD[1]) * r + QD[2]) * r + QD[3]) * r + 1.0)
    };
    if a < LOW {
        tail(a)
    } else if a > 1.0 - LOW {
        -tail(1.0 - a)
    } else {
        let t = a - 0.5;
        let r = t * t;
        (((((QA[0] * r + QA[1]) * r + QA[2]) * r + QA[3]) * r + QA[4]) * r + QA[5]) * t
            / (((((QB[0] * r + QB[1]) * r + QB[2]) * r + QB[3]) * r + QB[4]) * r + 1.0)
    }
}

/// Normal approximation `1 - Phi((gamma - k/2) / sqrt(k/4))` of
/// `P(Bin(k, 1/2) >= gamma)`.
pub fn binomial_tail_normal_approx(k: usize, gamma: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("k", 0.0, "must be at least 1"));
    }
    let k = k as f64;
    let z = (gamma - k / 2.0) / (k / 4.0).sqrt();
    Ok(normal_cdf(-z))
}

pub fn derived_constants(p: f64) -> Result<DerivedConstants> {
    check_p(p)?;
    let q = 1.0 - p;
    let h = -(p * p.log2() + q * q.log2());
    let h_inf = -p.min(q).log2();
    let b = -0.5 * (p * q).log2();
    Ok(DerivedConstants {
        h,
        h_inf,
        b,
        kappa: h / b,
        rho: p / q,
    })
}

fn check_open_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", alpha, "must lie strictly between 0 and 1"))
    }
}

/// Leading two terms of the concentration level, with the O(1) term set to 0.
pub fn predict_level_closed_form(size: f64, alpha: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    check_open_alpha(alpha)?;
    if !(size > 1.0 && size.is_finite()) {
        return Err(Error::param("size", size, "must exceed 1"));
    }
    let ln_b = -0.5 * (p * (1.0 - p)).ln();
    let ln_size = size.ln();
    let coeff = (p / (1.0 - p)).ln().abs() / (2.0 * ln_b.powf(1.5));
    Ok(ln_size / ln_b - coeff * normal_quantile(alpha)? * ln_size.sqrt())
}

/// Deepest level whose expected fill fraction is at least `alpha`.
pub fn predict_level_calibrated(params: &ModelParams) -> Result<usize> {
    let size = params.size.value();
    if size < 2.0 {
        return Err(Error::param("size", size, "must be at least 2"));
    }
    let cap = (8.0 * size.log2()).ceil() as usize;
    for k in 0..=cap {
        if expected_fill_fraction(params, k) < params.alpha {
            return k.checked_sub(1).ok_or(Error::NoFilledLevel);
        }
    }
    Err(Error::SearchCapExceeded { cap })
}

/// Coefficient of `log2 log2 n` in the typical depth.
pub fn depth_constant(p: f64, variant: DepthVariant) -> Result<f64> {
    let c = derived_constants(p)?;
    if p == 0.5 {
        return Err(Error::param("p", p, "depth constant degenerates at p = 1/2"));
    }
    let denom = match variant {
        DepthVariant::AlphaLc => c.b,
        DepthVariant::FullLc => c.h_inf,
    };
    Ok(1.0 / -(1.0 - c.h / denom).log2())
}

/// Full (alpha = 1) fillup level `(log n - log log log n) / log(1/p_min)`,
/// O(1) term dropped.
pub fn predict_full_fillup(n: f64, p: f64) -> Result<f64> {
    let c = derived_constants(p)?;
    if p == 0.5 {
        return Err(Error::param("p", p, "formula requires p != 1/2"));
    }
    if !(n >= 16.0) {
        return Err(Error::param("n", n, "must be at least 16"));
    }
    Ok((n.log2() - n.log2().log2().log2()) / c.h_inf)
}
