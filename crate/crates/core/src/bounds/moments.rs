//! Path-sum moment bounds and the Markov step.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::paths::PathEnumeration;

/// `g(η) = 1 + η + η²/2`.
pub fn g_of_eta(eta: f64) -> f64 {
    1.0 + eta + 0.5 * eta * eta
}

/// `β_k` for the static bound, or the neighbourhood weights `w_k = Σ_Δ b²`
/// for the Brownian one (where the rate is `w_k/p`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSchedule {
    Constant(f64),
    /// Entry `k` applies to the segment `[t_k, t_{k+1}]`, with `t_0 = 0`.
    PerStep(Vec<f64>),
}

impl BetaSchedule {
    fn for_length(&self, l: usize) -> Result<Vec<f64>> {
        match self {
            BetaSchedule::Constant(b) => Ok(vec![*b; l + 1]),
            BetaSchedule::PerStep(v) if v.len() > l => Ok(v[..=l].to_vec()),
            BetaSchedule::PerStep(v) => invalid(format!(
                "per-step schedule has {} entries, paths of length {l} need {}",
                v.len(),
                l + 1
            )),
        }
    }
}

/// Parameters shared by the moment bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentBoundParams {
    pub p: f64,
    pub beta_schedule: BetaSchedule,
    pub eta: f64,
    pub g_eta: f64,
    pub local_dim: usize,
    pub d_p: f64,
}

impl MomentBoundParams {
    pub fn new(p: f64, beta_schedule: BetaSchedule) -> Self {
        MomentBoundParams {
            p,
            beta_schedule,
            eta: 0.0,
            g_eta: 1.0,
            local_dim: 2,
            d_p: 1.0,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self.g_eta = g_of_eta(eta);
        self
    }

    pub fn with_projector_rank(mut self, d_p: f64) -> Self {
        self.d_p = d_p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 2.0) || !self.p.is_finite() {
            return invalid(format!("moment order p must be >= 2, got {}", self.p));
        }
        let betas: &[f64] = match &self.beta_schedule {
            BetaSchedule::Constant(b) => std::slice::from_ref(b),
            BetaSchedule::PerStep(v) => v,
        };
        if betas.is_empty() || betas.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
            return invalid("every β must be positive and finite");
        }
        if !(self.eta >= 0.0) || (g_of_eta(self.eta) - self.g_eta).abs() > 1e-12 * self.g_eta.max(1.0) {
            return invalid(format!("g_eta {} does not match g({})", self.g_eta, self.eta));
        }
        if self.local_dim < 2 {
            return invalid("local dimension must be >= 2");
        }
        if !(self.d_p >= 1.0) {
            return invalid("D_P must be >= 1");
        }
        Ok(())
    }
}

/// The standard choice `β = √(4(p−1)·Σ_Δ b²)`.
pub fn default_beta(p: f64, step_weight: f64) -> f64 {
    (4.0 * (p - 1.0) * step_weight).sqrt()
}

/// Total `Π b²` per path length.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PathWeights {
    pub by_length: Vec<(usize, f64)>,
    pub truncated: bool,
}

impl PathWeights {
    pub fn single(length: usize, weight: f64) -> Self {
        PathWeights {
            by_length: vec![(length, weight)],
            truncated: false,
        }
    }
}

impl From<&PathEnumeration> for PathWeights {
    fn from(e: &PathEnumeration) -> Self {
        PathWeights {
            by_length: e.total_weight_by_length.iter().map(|(&l, &w)| (l, w)).collect(),
            truncated: e.truncated,
        }
    }
}

/// A moment bound on `|||·|||²` together with its logarithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentBound {
    pub value: f64,
    pub ln_value: f64,
    pub warning: Option<String>,
}

fn ln_factorial(l: usize) -> f64 {
    (2..=l).map(|k| (k as f64).ln()).sum()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln ∫_{0<t_1<…<t_ℓ<t} Π_{k=0}^{ℓ} e^{β_k(t_{k+1}−t_k)}` with `t_0 = 0`, `t_{ℓ+1} = t`.
///
/// Equal rates use `βt + ln(t^ℓ/ℓ!)`; otherwise the last entry of
/// `exp(A t)e_0` for the lower-bidiagonal `A` with diagonal `β` and unit
/// subdiagonal, shifted by the largest rate to keep the exponential bounded.
pub fn ln_simplex_integral(betas: &[f64], t: f64) -> f64 {
    let l = betas.len() - 1;
    if t == 0.0 {
        return if l == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let b0 = betas[0];
    if betas.iter().all(|&b| b == b0) {
        return b0 * t + l as f64 * t.ln() - ln_factorial(l);
    }
    let shift = betas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a = DMatrix::from_fn(l + 1, l + 1, |i, j| {
        if i == j {
            (betas[i] - shift) * t
        } else if i == j + 1 {
            t
        } else {
            0.0
        }
    });
    shift * t + a.exp()[(l, 0)].ln()
}

fn path_sum(
    paths: &PathWeights,
    params: &MomentBoundParams,
    time: f64,
    rates: impl Fn(&[f64]) -> Vec<f64>,
    ln_step: impl Fn(&[f64], usize) -> f64,
) -> Result<MomentBound> {
    params.validate()?;
    if !(time >= 0.0) || !time.is_finite() {
        return invalid(format!("time must be finite and >= 0, got {time}"));
    }
    let mut terms = Vec::with_capacity(paths.by_length.len());
    for &(l, w) in &paths.by_length {
        if w < 0.0 {
            return invalid("path weights must be non-negative");
        }
        if w == 0.0 {
            continue;
        }
        let sched = params.beta_schedule.for_length(l)?;
        let r = rates(&sched);
        let steps: f64 = (1..=l).map(|k| ln_step(&sched, k)).sum();
        terms.push(w.ln() + steps + ln_simplex_integral(&r, time));
    }
    let ln_value = log_sum_exp(&terms) + 2.0 / params.p * params.d_p.ln();
    let ln_value = if terms.is_empty() { f64::NEG_INFINITY } else { ln_value };
    Ok(MomentBound {
        value: ln_value.exp(),
        ln_value,
        warning: paths
            .truncated
            .then(|| "path enumeration truncated at L_max; longer paths are not included".to_string()),
    })
}

/// Static bound `D_P^{2/p} Σ_Γ ∫ Π_k e^{β_k(t_{k+1}−t_k)}·4p b²_{X_k}/β_k`.
///
/// With a constant β this is `D_P^{2/p} Σ_ℓ W_ℓ e^{βt}(4p/β)^ℓ t^ℓ/ℓ!`.
pub fn static_moment_bound(paths: &PathWeights, t: f64, params: &MomentBoundParams) -> Result<MomentBound> {
    let p = params.p;
    path_sum(paths, params, t, |s| s.to_vec(), |s, k| (4.0 * p / s[k]).ln())
}

/// Brownian bound `D_P^{2/p} Σ_Γ ∫ Π_k exp(w_k(τ_{k+1}−τ_k)/p)·8p b²_{X_k}`,
/// reading the schedule entries as neighbourhood weights `w_k`.
pub fn brownian_moment_bound(paths: &PathWeights, tau: f64, params: &MomentBoundParams) -> Result<MomentBound> {
    let p = params.p;
    path_sum(
        paths,
        params,
        tau,
        |s| s.iter().map(|w| w / p).collect(),
        |_, _| (8.0 * p).ln(),
    )
}

/// Outcome of a Markov conversion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovTail {
    /// `min(1, bound(p*)^{p*/2}/ε^{p*})`.
    pub probability: f64,
    /// Unclamped natural log of the bound.
    pub ln_probability: f64,
    pub p_star: f64,
    pub vacuous: bool,
}

fn markov_at(ln_moment: &dyn Fn(f64) -> f64, eps: f64, p: f64) -> MarkovTail {
    let ln = 0.5 * p * ln_moment(p) - p * eps.ln();
    let ln = if ln.is_nan() { f64::INFINITY } else { ln };
    MarkovTail {
        probability: ln.exp().min(1.0),
        ln_probability: ln,
        p_star: p,
        vacuous: ln >= 0.0,
    }
}

/// Markov's inequality on a squared-norm moment bound, `ln_moment(p) = ln |||X|||_p²`,
/// at the order chosen by `p_rule(ε)` (never below 2).
pub fn markov_tail(ln_moment: impl Fn(f64) -> f64, eps: f64, p_rule: impl Fn(f64) -> f64) -> Result<MarkovTail> {
    if !(eps > 0.0) {
        return invalid(format!("ε must be positive, got {eps}"));
    }
    let p = p_rule(eps).max(2.0);
    Ok(markov_at(&ln_moment, eps, p))
}

/// Best bound over `n` log-spaced orders in `[p_lo, p_hi]`.
pub fn markov_grid_search(
    ln_moment: impl Fn(f64) -> f64,
    eps: f64,
    p_lo: f64,
    p_hi: f64,
    n: usize,
) -> Result<MarkovTail> {
    if !(eps > 0.0) || !(p_lo >= 2.0) || !(p_hi >= p_lo) || n < 2 {
        return invalid("grid search needs ε > 0, 2 <= p_lo <= p_hi and n >= 2");
    }
    let step = (p_hi / p_lo).ln() / (n - 1) as f64;
    Ok((0..n)
        .map(|i| markov_at(&ln_moment, eps, p_lo * (step * i as f64).exp()))
        .min_by(|a, b| a.ln_probability.total_cmp(&b.ln_probability))
        .expect("n >= 2"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_couplings_give_zero() {
        let params = MomentBoundParams::new(2.0, BetaSchedule::Constant(1.0));
        let b = static_moment_bound(&PathWeights::single(3, 0.0), 1.0, &params).unwrap();
        assert_eq!(b.value, 0.0);
    }

    #[test]
    fn tau_zero_gives_zero() {
        let params = MomentBoundParams::new(2.0, BetaSchedule::Constant(1.0));
        let b = brownian_moment_bound(&PathWeights::single(1, 1.0), 0.0, &params).unwrap();
        assert_eq!(b.value, 0.0);
    }

    #[test]
    fn brownian_single_step() {
        let (p, b2, tau) = (3.0, 0.7, 1.3);
        let params = MomentBoundParams::new(p, BetaSchedule::Constant(b2));
        let got = brownian_moment_bound(&PathWeights::single(1, b2), tau, &params)
            .unwrap()
            .value;
        let want = (b2 * tau / p).exp() * 8.0 * p * b2 * tau;
        assert!((got / want - 1.0).abs() < 1e-13);
    }

    #[test]
    fn static_single_path_closed_form() {
        let (p, beta, b2, t, r): (f64, f64, f64, f64, usize) = (4.0, 2.0, 0.5, 0.8, 5);
        let params = MomentBoundParams::new(p, BetaSchedule::Constant(beta));
        let got = static_moment_bound(&PathWeights::single(r, b2.powi(r as i32)), t, &params)
            .unwrap()
            .value;
        let fact: f64 = (1..=r).map(|k| k as f64).product();
        let want = (beta * t).exp() * (4.0 * p * b2 / beta).powi(r as i32) * t.powi(r as i32) / fact;
        assert!((got / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bidiagonal_exponential_matches_equal_rates() {
        let v = ln_simplex_integral(&[1.5, 1.5 + 1e-9, 1.5, 1.5 - 1e-9], 2.0);
        let w = ln_simplex_integral(&[1.5; 4], 2.0);
        assert!((v - w).abs() < 1e-7);
    }

    #[test]
    fn two_rate_integral() {
        // ∫_0^t e^{a s} e^{b(t−s)} ds = (e^{at} − e^{bt})/(a − b)
        let (a, b, t): (f64, f64, f64) = (0.3, 1.7, 1.1);
        let want = ((a * t).exp() - (b * t).exp()) / (a - b);
        assert!((ln_simplex_integral(&[a, b], t) - want.ln()).abs() < 1e-12);
    }

    #[test]
    fn closed_form_p_rule_example() {
        let (lambda, r, eps) = (0.05f64, 4.0, 0.01f64);
        let raw = eps.powf(2.0 / r) / (std::f64::consts::E * lambda);
        assert!((raw - 0.7358).abs() < 1e-4);
        let t = markov_tail(
            |p| r * (p * lambda).ln(),
            eps,
            |e| e.powf(2.0 / r) / (std::f64::consts::E * lambda),
        )
        .unwrap();
        assert_eq!(t.p_star, 2.0);
    }

    #[test]
    fn vacuous_tail_is_flagged() {
        let t = markov_tail(|_| 0.0, 2.0, |_| 2.0).unwrap();
        assert!(!t.vacuous);
        let t = markov_tail(|_| 0.0, 0.5, |_| 2.0).unwrap();
        assert!(t.vacuous && t.probability == 1.0);
    }

    #[test]
    fn truncation_warning() {
        let mut w = PathWeights::single(2, 1.0);
        w.truncated = true;
        let params = MomentBoundParams::new(2.0, BetaSchedule::Constant(1.0));
        assert!(static_moment_bound(&w, 1.0, &params).unwrap().warning.is_some());
    }

    #[test]
    fn validation() {
        let params = MomentBoundParams::new(1.5, BetaSchedule::Constant(1.0));
        assert!(params.validate().is_err());
        let mut params = MomentBoundParams::new(2.0, BetaSchedule::Constant(1.0)).with_eta(0.2);
        assert!(params.validate().is_ok());
        params.g_eta = 1.0;
        assert!(params.validate().is_err());
        let short = MomentBoundParams::new(2.0, BetaSchedule::PerStep(vec![1.0, 1.0]));
        assert!(static_moment_bound(&PathWeights::single(3, 1.0), 1.0, &short).is_err());
    }
}
