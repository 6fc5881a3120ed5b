//! Closed-form quantities of the random dataset model.
//!
//! Growth scales Δ and Λ, the categorical survival factor ζ, unit-ball
//! volumes, Bernoulli deviation tails and a symmetric local-lemma
//! certificate for the random batch assignment. All arithmetic that can
//! overflow (binomials, powers of `q`) is carried out in log space.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROB_TOL: f64 = 1e-12;

/// Model parameters that the bounds depend on.
///
/// `p0` is the probability that a point is corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub n: usize,
    pub d: usize,
    pub r_n: f64,
    pub p0: f64,
    pub p_up: f64,
    pub p_low: f64,
    pub cat_size: usize,
}

impl TheoryParams {
    pub fn new(
        n: usize,
        d: usize,
        r_n: f64,
        p0: f64,
        p_up: f64,
        p_low: f64,
        cat_size: usize,
    ) -> Result<Self> {
        let p = TheoryParams {
            n,
            d,
            r_n,
            p0,
            p_up,
            p_low,
            cat_size,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.cat_size == 0 {
            return Err(Error::invalid("n, d and cat_size must be positive"));
        }
        if !(self.r_n.is_finite() && self.r_n >= 0.0) {
            return Err(Error::invalid(format!("r_n must be >= 0, got {}", self.r_n)));
        }
        if !(0.0..=1.0).contains(&self.p0) {
            return Err(Error::invalid(format!("p0 must lie in [0,1], got {}", self.p0)));
        }
        for (name, v) in [("p_up", self.p_up), ("p_low", self.p_low)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0,1], got {v}")));
            }
        }
        let uniform = 1.0 / self.cat_size as f64;
        if self.p_low > uniform + PROB_TOL || uniform > self.p_up + PROB_TOL {
            return Err(Error::invalid(format!(
                "need p_low <= 1/#Y <= p_up, got {} <= {} <= {}",
                self.p_low, uniform, self.p_up
            )));
        }
        Ok(())
    }
}

/// Empirical constants for the order-of-magnitude bounds.
///
/// The model only determines these up to unknown absolute factors, so they
/// are always fitted from measurements (see `harness::fit_constants`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedConstants {
    pub gamma1: f64,
    pub gamma2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub beta1: f64,
    pub c_upper: f64,
}

impl FittedConstants {
    /// All constants equal to one: predictions degenerate to the raw scales.
    pub fn unit() -> Self {
        FittedConstants {
            gamma1: 1.0,
            gamma2: 1.0,
            lambda1: 1.0,
            lambda2: 1.0,
            beta1: 1.0,
            c_upper: 1.0,
        }
    }
}

impl Default for FittedConstants {
    fn default() -> Self {
        Self::unit()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub delta: f64,
    pub lambda: f64,
    pub zeta: f64,
    /// Lower bound on the probability that a fresh point is similar to none
    /// of the `n - 1` earlier ones.
    pub admit_bound: f64,
    pub pred_degree_range: (f64, f64),
    pub pred_tau_range: (f64, f64),
    pub pred_nsim_range: (f64, f64),
}

/// Returns `(Δ, Λ)`.
pub fn delta_lambda(p: &TheoryParams) -> (f64, f64) {
    let scale = p.n as f64 * p.p_up;
    let ball = libm::pow(p.r_n, p.d as f64);
    let geometric = ball * (1.0 - p.p0);
    let delta = scale * geometric.max(p.p0);
    let lambda = if p.p0 > 0.0 {
        scale * geometric.min(p.p0)
    } else {
        scale * ball
    };
    (delta, lambda)
}

/// Volume of the unit ball in `d` dimensions, `π^{d/2} / Γ(d/2 + 1)`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    libm::exp(half * libm::log(PI) - libm::lgamma(half + 1.0))
}

fn check_probabilities(cat_probs: &[f64]) -> Result<()> {
    if cat_probs.is_empty() {
        return Err(Error::invalid("empty categorical distribution"));
    }
    if cat_probs.iter().any(|&q| !(0.0..=1.0).contains(&q)) {
        return Err(Error::invalid("categorical probabilities must lie in [0,1]"));
    }
    let total: f64 = cat_probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "categorical probabilities sum to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Average over symbols of `exp(-ε_up π_d n r^d p(y) / k)`.
pub fn zeta(p: &TheoryParams, k: usize, eps_up: f64, cat_probs: &[f64]) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    check_probabilities(cat_probs)?;
    let scale =
        eps_up * unit_ball_volume(p.d) * p.n as f64 * libm::pow(p.r_n, p.d as f64) / k as f64;
    let sum: f64 = cat_probs.iter().map(|&q| libm::exp(-scale * q)).sum();
    Ok(sum / cat_probs.len() as f64)
}

/// `Σ_y (1 - θ(y))^{n-1} p(y)` with `θ(y) = ε_up π_d r^d p(y)`.
pub fn admit_probability_bound(
    n: usize,
    d: usize,
    r_n: f64,
    eps_up: f64,
    cat_probs: &[f64],
) -> Result<f64> {
    check_probabilities(cat_probs)?;
    let ball = eps_up * unit_ball_volume(d) * libm::pow(r_n, d as f64);
    let exponent = n.saturating_sub(1) as f64;
    Ok(cat_probs
        .iter()
        .map(|&q| libm::pow((1.0 - ball * q).max(0.0), exponent) * q)
        .sum())
}

/// Two-sided Bernoulli-sum deviation tail `2 exp(-γ² θ / 4)`.
///
/// The value is returned as computed even when it exceeds one.
pub fn chernoff_tail(theta: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 0.5) {
        return Err(Error::invalid(format!("gamma must lie in (0, 1/2], got {gamma}")));
    }
    if theta.is_nan() || theta < 0.0 {
        return Err(Error::invalid(format!("mean must be >= 0, got {theta}")));
    }
    Ok(2.0 * libm::exp(-gamma * gamma * theta / 4.0))
}

/// Outcome of the symmetric local-lemma check for a random assignment into
/// `q` batches with budget `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LllCertificate {
    pub feasible: bool,
    /// `q^{-k}`, the probability that a fixed `(k+1)`-set lands in one batch.
    pub event_prob: f64,
    pub ln_event_prob: f64,
    /// `(k+1)·(d̂e/k)^k`, saturated at `u64::MAX`.
    pub dependency_degree: u64,
    pub ln_dependency_degree: f64,
    /// `θ = q k / d̂` implied by this `q`.
    pub implied_theta: f64,
    /// Whether `implied_theta >= 8e`.
    pub theta_sufficient: bool,
}

/// Checks `e · p · (D + 1) <= 1` for `p = q^{-k}` and
/// `D = (k+1) (d̂ e / k)^k`.
pub fn lll_certificate(max_degree: usize, k: usize, q: usize) -> Result<LllCertificate> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if q < 2 {
        return Err(Error::invalid("q must be >= 2"));
    }
    if k > max_degree {
        return Err(Error::invalid(format!(
            "k = {k} exceeds max degree {max_degree}"
        )));
    }
    let (kf, df) = (k as f64, max_degree as f64);
    let ln_event_prob = -kf * libm::log(q as f64);
    let ln_l = kf * libm::log(df * E / kf);
    let ln_dependency_degree = libm::log(kf + 1.0) + ln_l;
    let feasible = 1.0 + ln_event_prob + ln_one_plus_exp(ln_dependency_degree) <= 0.0;
    let dependency_degree = if ln_dependency_degree >= libm::log(u64::MAX as f64) {
        u64::MAX
    } else {
        libm::exp(ln_dependency_degree).ceil() as u64
    };
    let implied_theta = q as f64 * kf / df;
    Ok(LllCertificate {
        feasible,
        event_prob: libm::exp(ln_event_prob),
        ln_event_prob,
        dependency_degree,
        ln_dependency_degree,
        implied_theta,
        theta_sufficient: implied_theta >= 8.0 * E,
    })
}

/// `ln(1 + e^x)` without overflow.
fn ln_one_plus_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// Smallest `q >= 2` for which [`lll_certificate`] is feasible.
pub fn min_feasible_q(max_degree: usize, k: usize) -> Result<usize> {
    let probe = lll_certificate(max_degree, k, 2)?;
    if probe.feasible {
        return Ok(2);
    }
    let ln_d_plus_one = ln_one_plus_exp(probe.ln_dependency_degree);
    let mut q = libm::exp((1.0 + ln_d_plus_one) / k as f64).floor().max(2.0) as usize;
    while q > 2 && lll_certificate(max_degree, k, q - 1)?.feasible {
        q -= 1;
    }
    while !lll_certificate(max_degree, k, q)?.feasible {
        q += 1;
    }
    Ok(q)
}

/// Full report for one parameter point, with predicted ranges scaled by
/// `constants`.
pub fn bound_report(
    p: &TheoryParams,
    k: usize,
    eps_up: f64,
    cat_probs: &[f64],
    constants: &FittedConstants,
) -> Result<BoundReport> {
    p.validate()?;
    let (delta, lambda) = delta_lambda(p);
    let zeta = zeta(p, k, eps_up, cat_probs)?;
    let admit_bound = admit_probability_bound(p.n, p.d, p.r_n, eps_up, cat_probs)?;
    let kf = k as f64;
    let n = p.n as f64;
    let volume = libm::pow(p.r_n, p.d as f64);
    let nsim_scale = if volume > 0.0 {
        kf * p.cat_size as f64 / volume
    } else {
        f64::INFINITY
    };
    let nsim_lo = (constants.beta1 * nsim_scale * (1.0 - zeta)).min(n);
    let nsim_hi = (constants.c_upper * nsim_scale).min(n).max(nsim_lo);
    Ok(BoundReport {
        delta,
        lambda,
        zeta,
        admit_bound,
        pred_degree_range: ordered(constants.gamma1 * delta, constants.gamma2 * delta),
        pred_tau_range: ordered(
            constants.lambda1 * delta / kf,
            constants.lambda2 * delta / kf,
        ),
        pred_nsim_range: (nsim_lo, nsim_hi),
    })
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    (a.min(b), a.max(b))
}
