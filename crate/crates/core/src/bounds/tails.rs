//! System-specific tail bounds, their inversions, and light-cone extracts.

use std::f64::consts::{E, SQRT_2};

use serde::{Deserialize, Serialize};

use super::moments::g_of_eta;
use super::powerlaw::{light_cone_exponent, powerlaw_constants, AlphaRegime, PowerLawCase, PowerLawConstants};
use crate::error::{Error, Result};

/// The nine bounded systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TailSystem {
    NN1dBrownianOTOC,
    NN1dBrownianSpectral,
    NNdBrownianOTOC,
    KLocalStaticOTOC,
    KLocalBrownianOTOC,
    PowerLawStaticOTOC,
    PowerLawStaticSpectral,
    PowerLawBrownianOTOC,
    PowerLawBrownianSpectral,
}

/// What a system's bound constrains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundQuantity {
    /// `½‖[A_r, O_0]P‖` for a rank-`D_P` projector.
    ProjectedHalfNorm,
    /// `½‖[A_r, O_0]‖`.
    HalfSpectral,
}

impl TailSystem {
    pub const ALL: [TailSystem; 9] = [
        TailSystem::NN1dBrownianOTOC,
        TailSystem::NN1dBrownianSpectral,
        TailSystem::NNdBrownianOTOC,
        TailSystem::KLocalStaticOTOC,
        TailSystem::KLocalBrownianOTOC,
        TailSystem::PowerLawStaticOTOC,
        TailSystem::PowerLawStaticSpectral,
        TailSystem::PowerLawBrownianOTOC,
        TailSystem::PowerLawBrownianSpectral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TailSystem::NN1dBrownianOTOC => "NN1dBrownianOTOC",
            TailSystem::NN1dBrownianSpectral => "NN1dBrownianSpectral",
            TailSystem::NNdBrownianOTOC => "NNdBrownianOTOC",
            TailSystem::KLocalStaticOTOC => "KLocalStaticOTOC",
            TailSystem::KLocalBrownianOTOC => "KLocalBrownianOTOC",
            TailSystem::PowerLawStaticOTOC => "PowerLawStaticOTOC",
            TailSystem::PowerLawStaticSpectral => "PowerLawStaticSpectral",
            TailSystem::PowerLawBrownianOTOC => "PowerLawBrownianOTOC",
            TailSystem::PowerLawBrownianSpectral => "PowerLawBrownianSpectral",
        }
    }

    pub fn is_brownian(self) -> bool {
        !matches!(
            self,
            TailSystem::KLocalStaticOTOC | TailSystem::PowerLawStaticOTOC | TailSystem::PowerLawStaticSpectral
        )
    }

    pub fn quantity(self) -> BoundQuantity {
        match self {
            TailSystem::NN1dBrownianSpectral
            | TailSystem::PowerLawStaticSpectral
            | TailSystem::PowerLawBrownianSpectral => BoundQuantity::HalfSpectral,
            _ => BoundQuantity::ProjectedHalfNorm,
        }
    }

    /// Systems whose tail comes from a single Markov step on a moment bound.
    pub fn has_moment_bound(self) -> bool {
        self.quantity() == BoundQuantity::ProjectedHalfNorm
    }

    fn powerlaw_case(self) -> Option<PowerLawCase> {
        match self {
            TailSystem::PowerLawStaticOTOC => Some(PowerLawCase::StaticOtoc),
            TailSystem::PowerLawStaticSpectral => Some(PowerLawCase::StaticSpectral),
            TailSystem::PowerLawBrownianOTOC => Some(PowerLawCase::BrownianOtoc),
            TailSystem::PowerLawBrownianSpectral => Some(PowerLawCase::BrownianSpectral),
            _ => None,
        }
    }
}

impl std::fmt::Display for TailSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TailSystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TailSystem::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown tail system `{s}`")))
    }
}

/// Step size and step count of a discrete Brownian circuit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    pub xi: f64,
    pub steps: u64,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn two_usize() -> usize {
    2
}
fn half() -> f64 {
    0.5
}

/// Parameters of one bound evaluation. Fields a system does not use are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailParams {
    pub system: TailSystem,
    /// `a` for nearest-neighbour and power-law chains, `J` for k-local.
    #[serde(default = "one")]
    pub coupling: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "one_usize")]
    pub r: usize,
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub k: usize,
    /// `t` for static systems, `τ` for Brownian ones; ignored when `discrete` is set.
    #[serde(default)]
    pub time: f64,
    /// Discrete circuit form, nearest-neighbour systems only.
    #[serde(default)]
    pub discrete: Option<Discretization>,
    #[serde(default = "two_usize")]
    pub local_dim: usize,
    #[serde(default = "one")]
    pub d_p: f64,
    #[serde(default = "one_usize")]
    pub lattice_dim: usize,
    /// `λ` splitting the failure probability of the 1d spectral bound.
    #[serde(default = "half")]
    pub split: f64,
}

impl TailParams {
    pub fn new(system: TailSystem, time: f64) -> Self {
        TailParams {
            system,
            coupling: 1.0,
            alpha: 0.0,
            r: 1,
            n: 0,
            k: 0,
            time,
            discrete: None,
            local_dim: 2,
            d_p: 1.0,
            lattice_dim: 1,
            split: 0.5,
        }
    }

    /// Brownian time `τ = Tξ²` of a discrete circuit, else `time`.
    pub fn effective_time(&self) -> f64 {
        match self.discrete {
            Some(d) => d.steps as f64 * d.xi * d.xi,
            None => self.time,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        let s = self.system;
        if !(self.coupling > 0.0) || !self.coupling.is_finite() {
            return bad(format!("coupling must be positive, got {}", self.coupling));
        }
        if !(self.d_p >= 1.0) || !self.d_p.is_finite() {
            return bad(format!("D_P must be >= 1, got {}", self.d_p));
        }
        if self.local_dim < 2 {
            return bad(format!("local dimension must be >= 2, got {}", self.local_dim));
        }
        match self.discrete {
            Some(d) => {
                if !matches!(
                    s,
                    TailSystem::NN1dBrownianOTOC | TailSystem::NN1dBrownianSpectral | TailSystem::NNdBrownianOTOC
                ) {
                    return Err(Error::Regime(format!("{s} has only a continuum form")));
                }
                if !(d.xi > 0.0) || !d.xi.is_finite() || d.steps == 0 {
                    return bad("discrete form needs ξ > 0 and T >= 1".into());
                }
            }
            None => {
                if !(self.time > 0.0) || !self.time.is_finite() {
                    return bad(format!("time must be positive, got {}", self.time));
                }
            }
        }
        match s {
            TailSystem::KLocalStaticOTOC | TailSystem::KLocalBrownianOTOC => {
                if self.k < 2 || self.n < self.k {
                    return bad(format!(
                        "k-local bound needs 2 <= k <= N, got k={} N={}",
                        self.k, self.n
                    ));
                }
            }
            _ => {
                if self.r == 0 {
                    return bad("r must be >= 1".into());
                }
            }
        }
        if s == TailSystem::NNdBrownianOTOC && self.lattice_dim < 1 {
            return bad("lattice dimension must be >= 1".into());
        }
        if s == TailSystem::NN1dBrownianSpectral && !(self.split > 0.0 && self.split < 1.0) {
            return bad(format!("λ must lie in (0,1), got {}", self.split));
        }
        if let Some(case) = s.powerlaw_case() {
            light_cone_exponent(case, self.alpha)?;
        }
        Ok(())
    }
}

/// Which piece of a piecewise bound was used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// The exponential-tail piece (small δ / large ε).
    Exponential,
    /// The second-moment piece.
    Polynomial,
    /// Bounds given by a single expression.
    Single,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Exponential => "exponential",
            Branch::Polynomial => "polynomial",
            Branch::Single => "single",
        }
    }
}

/// `ε(δ)` for one system and δ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub system: TailSystem,
    pub delta: f64,
    pub epsilon: f64,
    pub branch: Branch,
    /// δ threshold separating the branches.
    pub boundary: Option<f64>,
    /// `ε ≥ 1` (or not finite): no constraint on a unit-norm commutator.
    pub vacuous: bool,
}

/// Both branches evaluated at the same δ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchValues {
    pub boundary: f64,
    pub exponential: f64,
    pub polynomial: f64,
    pub discontinuity: f64,
}

/// Tail probability for one system and ε.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailProbability {
    pub system: TailSystem,
    pub epsilon: f64,
    pub probability: f64,
    pub ln_probability: f64,
    pub branch: Branch,
    /// Moment order of the closed-form Markov rule, when there is one.
    pub p_star: Option<f64>,
    pub vacuous: bool,
}

/// Quantities of the nearest-neighbour forms: `K` in the light-cone ratio and
/// `E` in the `e^E` prefactor.
struct NnScales {
    k: f64,
    e: f64,
}

fn nn_scales(p: &TailParams) -> NnScales {
    let a2 = p.coupling * p.coupling;
    let r = p.r as f64;
    let d = p.lattice_dim as f64;
    let (k, e1) = match p.discrete {
        Some(dz) => {
            let eta = p.coupling * dz.xi;
            let t = dz.steps as f64;
            let eta2 = eta * eta;
            (eta2 * g_of_eta(eta) * (t + r - 1.0), eta2 * t / 2.0)
        }
        None => (a2 * p.time, a2 * p.time / 2.0),
    };
    let e = match p.system {
        // e^{η²RT/2} with R = 2d
        TailSystem::NNdBrownianOTOC => 2.0 * d * e1,
        _ => e1,
    };
    NnScales { k, e }
}

/// `K′` in the 1d spectral bound.
fn nn_spectral_scale(p: &TailParams) -> f64 {
    match p.discrete {
        Some(dz) => {
            let eta = p.coupling * dz.xi;
            dz.steps as f64 * eta * eta * g_of_eta(eta)
        }
        None => p.coupling * p.coupling * p.time,
    }
}

/// Time variable of the power-law forms with the coupling absorbed.
fn powerlaw_time(p: &TailParams) -> f64 {
    if p.system.is_brownian() {
        p.coupling * p.coupling * p.time
    } else {
        p.coupling * p.time
    }
}

fn pl_constants(p: &TailParams) -> Result<PowerLawConstants> {
    let case = p.system.powerlaw_case().expect("power-law system");
    powerlaw_constants(p.alpha, case, p.r)
}

/// `(ln ε_exp, ln ε_poly, boundary)` for two-branch systems.
fn two_branch(p: &TailParams, delta: f64) -> Result<Option<(f64, f64, f64)>> {
    let ld = delta.ln();
    let ldp = p.d_p.ln();
    let r = p.r as f64;
    Ok(Some(match p.system {
        TailSystem::NN1dBrownianOTOC => {
            let NnScales { k, e } = nn_scales(p);
            let exp = 0.5 * r * (16.0 * E * E * k / (r * r) * (e + ldp - ld)).ln();
            let poly = 0.5 * (ldp - ld + e + r * (16.0 * E * k / r).ln());
            (exp, poly, ldp + e - r)
        }
        TailSystem::NNdBrownianOTOC => {
            let NnScales { k, e } = nn_scales(p);
            let d = p.lattice_dim as f64;
            let lc = -(1.0 - 1.0 / E).ln();
            let exp = 0.5 * r * (32.0 * E * E * d * k / (r * r) * (e + ldp + lc - ld)).ln();
            let x = 32.0 * E * d * k / r;
            let poly = if x >= 1.0 {
                f64::INFINITY
            } else {
                0.5 * (ldp - ld + e + r * x.ln() - (1.0 - x).ln())
            };
            (exp, poly, ldp + lc + e - r)
        }
        TailSystem::KLocalStaticOTOC => {
            let jt = p.coupling * p.time;
            let lk = ((p.k as f64 - 1.0) / p.n as f64).ln();
            let exp = 0.5 * (lk + 6.0 * ((ldp - ld) * jt * jt).cbrt());
            let poly = 0.5 * (ldp + 4.0 * jt + lk - ld);
            (exp, poly, ldp + (4.0 - 6.0 * SQRT_2) * jt)
        }
        TailSystem::KLocalBrownianOTOC => {
            let j2t = p.coupling * p.coupling * p.time;
            let lk = ((p.k as f64 - 1.0) / p.n as f64).ln();
            let exp = 0.5 * (lk + (32.0 * j2t * (j2t / 2.0 - ld + ldp)).sqrt());
            let poly = 0.5 * (ldp + 8.5 * j2t + lk - ld);
            (exp, poly, ldp - 11.5 * j2t)
        }
        TailSystem::PowerLawStaticOTOC | TailSystem::PowerLawBrownianOTOC => {
            let c = pl_constants(p)?;
            let scale = otoc_scale(p, &c);
            let exp = 0.5 * (c.c_alpha.ln() + (ldp - ld).ln() + scale);
            let poly = 0.5 * (ldp + c.c_alpha.ln() - 1.0 - ld + scale);
            (exp, poly, ldp - 1.0)
        }
        _ => return Ok(None),
    }))
}

/// `ln(t²/r^{2β})` (static) or `ln(τ/r^β)` (Brownian).
fn otoc_scale(p: &TailParams, c: &PowerLawConstants) -> f64 {
    let t = powerlaw_time(p);
    let r = p.r as f64;
    if p.system.is_brownian() {
        t.ln() - c.beta * r.ln()
    } else {
        2.0 * t.ln() - 2.0 * c.beta * r.ln()
    }
}

fn is_vacuous_eps(eps: f64) -> bool {
    !(eps < 1.0)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Regime(format!("δ must lie in (0,1], got {delta}")));
    }
    Ok(())
}

/// Evaluates the closed-form `ε(δ)`.
///
/// Two-branch systems use the exponential piece when `δ` is strictly below
/// the threshold and the second-moment piece otherwise.
pub fn epsilon_of_delta(params: &TailParams, delta: f64) -> Result<TailBound> {
    params.validate()?;
    check_delta(delta)?;
    let s = params.system;
    let (epsilon, branch, boundary) = if let Some((le, lp, lb)) = two_branch(params, delta)? {
        let b = lb.exp();
        // Compare against the reported threshold so the two always agree.
        if delta < b {
            (le.exp(), Branch::Exponential, Some(b))
        } else {
            (lp.exp(), Branch::Polynomial, Some(b))
        }
    } else {
        (single_branch_epsilon(params, delta)?, Branch::Single, None)
    };
    let epsilon = if epsilon.is_nan() { f64::INFINITY } else { epsilon };
    Ok(TailBound {
        system: s,
        delta,
        epsilon,
        branch,
        boundary,
        vacuous: is_vacuous_eps(epsilon),
    })
}

/// Both branch formulas at `δ`, for probing the threshold.
pub fn branch_values(params: &TailParams, delta: f64) -> Result<Option<BranchValues>> {
    params.validate()?;
    check_delta(delta)?;
    Ok(two_branch(params, delta)?.map(|(le, lp, lb)| {
        let (x, y) = (le.exp(), lp.exp());
        BranchValues {
            boundary: lb.exp(),
            exponential: x,
            polynomial: y,
            discontinuity: (x - y).abs(),
        }
    }))
}

fn single_branch_epsilon(p: &TailParams, delta: f64) -> Result<f64> {
    let ld = delta.ln();
    let r = p.r as f64;
    match p.system {
        TailSystem::NN1dBrownianSpectral => {
            let d0 = delta * (1.0 - p.split);
            let x = ((2.0 * p.local_dim as f64 / p.split).ln() + 1.0 / (16.0 * E * E) - d0.ln() / r)
                * 16.0
                * E
                * E
                * nn_spectral_scale(p)
                / r;
            Ok(if x >= 1.0 {
                f64::INFINITY
            } else {
                (0.5 * r * x.ln()).exp() / (1.0 - x.sqrt())
            })
        }
        TailSystem::PowerLawStaticSpectral | TailSystem::PowerLawBrownianSpectral => {
            let c = pl_constants(p)?;
            let ln_d = (p.local_dim as f64).ln();
            let t = powerlaw_time(p);
            let a = c.a_alpha.expect("spectral alias");
            let b = c.b_alpha.expect("spectral alias");
            let val = match (p.system, c.regime) {
                (TailSystem::PowerLawStaticSpectral, AlphaRegime::Linear) => {
                    t / r * ((a * ln_d - ld) / c.c_alpha).sqrt()
                }
                (TailSystem::PowerLawStaticSpectral, AlphaRegime::Algebraic) => {
                    let s = 1.0 - 2.0 * p.alpha / 5.0;
                    t / r.powf(p.alpha - 1.5) * ((a * ln_d - (ld - b.ln()) / r.powf(s)) / c.c_alpha).sqrt()
                }
                (_, AlphaRegime::Linear) => ((a * ln_d - ld) * t / (c.c_alpha * r)).sqrt(),
                (_, AlphaRegime::Algebraic) => {
                    let s = 1.0 - p.alpha / 2.0;
                    (t / (c.c_alpha * r.powf(1.5 * p.alpha - 2.0)) * (a * ln_d * r.powf(s) - (ld - b.ln()))).sqrt()
                }
            };
            Ok(val)
        }
        _ => unreachable!("two-branch system"),
    }
}

/// The simplified 1d spectral form `[(ln 4D + 1/16e² − ln δ0/r)·32e²K′/r]^{r/2}/(1 − 1/√2)`,
/// valid with failure probability `2δ0`.
pub fn nn_spectral_simplified(params: &TailParams, delta0: f64) -> Result<TailBound> {
    if params.system != TailSystem::NN1dBrownianSpectral {
        return Err(Error::InvalidInput(format!(
            "simplified spectral form is defined for NN1dBrownianSpectral, not {}",
            params.system
        )));
    }
    params.validate()?;
    check_delta(delta0)?;
    let r = params.r as f64;
    let x = ((4.0 * params.local_dim as f64).ln() + 1.0 / (16.0 * E * E) - delta0.ln() / r)
        * 32.0
        * E
        * E
        * nn_spectral_scale(params)
        / r;
    let epsilon = (0.5 * r * x.ln()).exp() / (1.0 - 1.0 / SQRT_2);
    Ok(TailBound {
        system: params.system,
        delta: (2.0 * delta0).min(1.0),
        epsilon,
        branch: Branch::Single,
        boundary: None,
        vacuous: is_vacuous_eps(epsilon),
    })
}

/// `ln |||·|||²` moment bound at order `p` for the systems with a single Markov step.
pub fn ln_moment_bound(params: &TailParams, p: f64) -> Result<f64> {
    params.validate()?;
    if !(p >= 2.0) {
        return Err(Error::InvalidInput(format!("p must be >= 2, got {p}")));
    }
    let r = params.r as f64;
    let lead = 2.0 / p * params.d_p.ln();
    match params.system {
        TailSystem::NN1dBrownianOTOC => {
            let NnScales { k, e } = nn_scales(params);
            let lambda = 8.0 * E * k / r;
            Ok(lead + 2.0 * e / p + r * (p * lambda).ln())
        }
        TailSystem::NNdBrownianOTOC => {
            let NnScales { k, e } = nn_scales(params);
            let lambda = 16.0 * E * params.lattice_dim as f64 * k / r;
            let x = p * lambda;
            Ok(if x >= 1.0 {
                f64::INFINITY
            } else {
                lead + 2.0 * e / p + r * x.ln() - (1.0 - x).ln()
            })
        }
        TailSystem::KLocalStaticOTOC => {
            let jt = params.coupling * params.time;
            // √(p−1) is kept at p = 2 and relaxed to √p above it.
            let s = if p == 2.0 { 1.0 } else { p.sqrt() };
            Ok(lead + 4.0 * jt * s + ((params.k as f64 - 1.0) / params.n as f64).ln())
        }
        TailSystem::KLocalBrownianOTOC => {
            let j2t = params.coupling * params.coupling * params.time;
            Ok(lead + j2t / p + ((params.k as f64 - 1.0) / params.n as f64).ln() + 8.0 * p * j2t)
        }
        TailSystem::PowerLawStaticOTOC | TailSystem::PowerLawBrownianOTOC => {
            let c = pl_constants(params)?;
            let k = (c.c_alpha / (2.0 * E)).ln() + otoc_scale(params, &c);
            Ok(lead + p.ln() + k)
        }
        s => Err(Error::Unsupported(format!(
            "{s} is assembled from a union bound and has no single moment bound"
        ))),
    }
}

/// The closed-form moment order `p*(ε)` (before clamping to 2).
pub fn printed_p_star(params: &TailParams, eps: f64) -> Result<f64> {
    params.validate()?;
    let r = params.r as f64;
    let l = || ((params.n as f64) * eps * eps / (params.k as f64 - 1.0)).ln();
    match params.system {
        TailSystem::NN1dBrownianOTOC => {
            let lambda = 8.0 * E * nn_scales(params).k / r;
            Ok(eps.powf(2.0 / r) / (E * lambda))
        }
        TailSystem::NNdBrownianOTOC => {
            let lambda = 16.0 * E * params.lattice_dim as f64 * nn_scales(params).k / r;
            Ok(eps.powf(2.0 / r) / (E * lambda))
        }
        TailSystem::KLocalStaticOTOC => Ok((l() / (6.0 * params.coupling * params.time)).powi(2)),
        TailSystem::KLocalBrownianOTOC => Ok(l() / (16.0 * params.time * params.coupling * params.coupling)),
        TailSystem::PowerLawStaticOTOC | TailSystem::PowerLawBrownianOTOC => {
            let c = pl_constants(params)?;
            let k = c.c_alpha / (2.0 * E) * otoc_scale(params, &c).exp();
            Ok(eps * eps / (E * k))
        }
        s => Err(Error::Unsupported(format!("{s} has no closed-form moment order"))),
    }
}

/// The closed-form tail `P[quantity ≥ ε] ≤ …`, clamped to 1.
///
/// For the 1d spectral bound, which is a union over support sizes rather than
/// one Markov step, the tail is the δ solving `ε(δ) = ε`.
pub fn tail_probability(params: &TailParams, eps: f64) -> Result<TailProbability> {
    params.validate()?;
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("ε must be positive, got {eps}")));
    }
    let s = params.system;
    let r = params.r as f64;
    let ldp = params.d_p.ln();
    let le = eps.ln();
    let p_star = printed_p_star(params, eps).ok().map(|p| p.max(2.0));
    let (ln_p, branch) = match s {
        TailSystem::NN1dBrownianOTOC => {
            let NnScales { k, e } = nn_scales(params);
            let z = 16.0 * E * E * k / r;
            if r * z.ln() < 2.0 * le {
                (
                    ldp + e - (2.0 * le / r).exp() * r * r / (16.0 * E * E * k),
                    Branch::Exponential,
                )
            } else {
                (ldp + e - 2.0 * le + r * (16.0 * E * k / r).ln(), Branch::Polynomial)
            }
        }
        TailSystem::NNdBrownianOTOC => {
            let NnScales { k, e } = nn_scales(params);
            let d = params.lattice_dim as f64;
            let z = 32.0 * E * E * d * k / r;
            if r * z.ln() < 2.0 * le {
                let v = ldp - (1.0 - 1.0 / E).ln() + e - (2.0 * le / r).exp() * r * r / (32.0 * E * E * d * k);
                (v, Branch::Exponential)
            } else {
                let x = 32.0 * E * d * k / r;
                let v = if x >= 1.0 {
                    f64::INFINITY
                } else {
                    ldp + e - 2.0 * le + r * x.ln() - (1.0 - x).ln()
                };
                (v, Branch::Polynomial)
            }
        }
        TailSystem::KLocalStaticOTOC => {
            let jt = params.coupling * params.time;
            let l = (params.n as f64 * eps * eps / (params.k as f64 - 1.0)).ln();
            if (l / (6.0 * jt)).powi(2) > 2.0 {
                (ldp - (l / 6.0).powi(3) / (jt * jt), Branch::Exponential)
            } else {
                (ldp + 4.0 * jt - l, Branch::Polynomial)
            }
        }
        TailSystem::KLocalBrownianOTOC => {
            let j2t = params.coupling * params.coupling * params.time;
            let l = (params.n as f64 * eps * eps / (params.k as f64 - 1.0)).ln();
            if l / (16.0 * j2t) > 2.0 {
                (ldp + j2t / 2.0 - l * l / (32.0 * j2t), Branch::Exponential)
            } else {
                (ldp + 8.5 * j2t - l, Branch::Polynomial)
            }
        }
        TailSystem::PowerLawStaticOTOC | TailSystem::PowerLawBrownianOTOC => {
            let c = pl_constants(params)?;
            let scale = otoc_scale(params, &c);
            let ratio = c.c_alpha.ln() + scale;
            if 2.0 * le >= ratio {
                (ldp - (2.0 * le - ratio).exp(), Branch::Exponential)
            } else {
                (ldp + ratio - 1.0 - 2.0 * le, Branch::Polynomial)
            }
        }
        TailSystem::PowerLawStaticSpectral | TailSystem::PowerLawBrownianSpectral => {
            let c = pl_constants(params)?;
            let t = powerlaw_time(params);
            let ln_d = (params.local_dim as f64).ln();
            let a = c.a_alpha.expect("spectral alias");
            let b = c.b_alpha.expect("spectral alias");
            let v = match (s, c.regime) {
                (TailSystem::PowerLawStaticSpectral, AlphaRegime::Linear) => {
                    a * ln_d - c.c_alpha * r * r * eps * eps / (t * t)
                }
                (TailSystem::PowerLawStaticSpectral, AlphaRegime::Algebraic) => {
                    let al = params.alpha;
                    b.ln() + a * r.powf(1.0 - 2.0 * al / 5.0) * ln_d
                        - c.c_alpha * eps * eps * r.powf(8.0 * al / 5.0 - 2.0) / (t * t)
                }
                (_, AlphaRegime::Linear) => a * ln_d - c.c_alpha * r * eps * eps / t,
                (_, AlphaRegime::Algebraic) => {
                    let al = params.alpha;
                    b.ln() + a * r.powf(1.0 - al / 2.0) * ln_d - c.c_alpha * eps * eps * r.powf(1.5 * al - 2.0) / t
                }
            };
            (v, Branch::Single)
        }
        TailSystem::NN1dBrownianSpectral => (invert_spectral(params, eps)?, Branch::Single),
    };
    let ln_p = if ln_p.is_nan() { f64::INFINITY } else { ln_p };
    Ok(TailProbability {
        system: s,
        epsilon: eps,
        probability: ln_p.exp().min(1.0),
        ln_probability: ln_p,
        branch,
        p_star,
        vacuous: ln_p >= 0.0,
    })
}

/// `ln δ` with `ε(δ) = ε`, by bisection on `ln δ`; 0 when even `δ = 1` is not enough.
fn invert_spectral(params: &TailParams, eps: f64) -> Result<f64> {
    let eps_at = |ld: f64| single_branch_epsilon(params, ld.exp());
    if eps_at(0.0)? > eps {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (-1.0f64, 0.0f64);
    while eps_at(lo)? <= eps {
        hi = lo;
        lo *= 2.0;
        if lo < -1e6 {
            return Ok(lo);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eps_at(mid)? <= eps {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(hi)
}

/// What a velocity extract measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityKind {
    LinearVelocity,
    AlgebraicExponent,
    ScramblingTimeRatio,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityEstimate {
    pub kind: VelocityKind,
    pub value: f64,
    pub almost_sure: bool,
}

/// Asymptotic light-cone quantity of a system.
pub fn velocity(params: &TailParams) -> Result<VelocityEstimate> {
    let a2 = params.coupling * params.coupling;
    let v = |kind, value| VelocityEstimate {
        kind,
        value,
        almost_sure: true,
    };
    Ok(match params.system {
        TailSystem::NN1dBrownianOTOC => v(VelocityKind::LinearVelocity, 16.0 * E * (1.0 / (32.0 * E)).exp() * a2),
        TailSystem::NNdBrownianOTOC => v(
            VelocityKind::LinearVelocity,
            32.0 * E * params.lattice_dim as f64 * (1.0 / (32.0 * E)).exp() * a2,
        ),
        TailSystem::NN1dBrownianSpectral => v(
            VelocityKind::LinearVelocity,
            16.0 * E * E * a2 * ((2.0 * params.local_dim as f64).ln() + 1.0 / (16.0 * E * E)),
        ),
        TailSystem::KLocalStaticOTOC => v(VelocityKind::ScramblingTimeRatio, 0.25),
        TailSystem::KLocalBrownianOTOC => v(VelocityKind::ScramblingTimeRatio, 2.0 / 17.0),
        s => {
            let case = s.powerlaw_case().expect("power-law system");
            v(
                VelocityKind::AlgebraicExponent,
                light_cone_exponent(case, params.alpha)?,
            )
        }
    })
}

/// Time at which the k-local second-moment bound equals `N^{−ζ}`.
pub fn k_local_scrambling_time(params: &TailParams, zeta: f64) -> Result<f64> {
    let n = params.n as f64;
    let lhs = (n / (params.k as f64 - 1.0)).ln() - zeta * n.ln() - params.d_p.ln();
    match params.system {
        TailSystem::KLocalStaticOTOC => Ok(lhs / (4.0 * params.coupling)),
        TailSystem::KLocalBrownianOTOC => Ok(lhs / (8.5 * params.coupling * params.coupling)),
        s => Err(Error::InvalidInput(format!("{s} is not a k-local system"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nn1d(r: usize, tau: f64) -> TailParams {
        TailParams {
            r,
            ..TailParams::new(TailSystem::NN1dBrownianOTOC, tau)
        }
    }

    fn klocal(system: TailSystem, t: f64) -> TailParams {
        TailParams {
            n: 64,
            k: 4,
            ..TailParams::new(system, t)
        }
    }

    #[test]
    fn velocity_nn_1d() {
        let v = velocity(&nn1d(3, 1.0)).unwrap();
        assert!((v.value - 44.0).abs() < 0.05, "{}", v.value);
    }

    #[test]
    fn k_local_brownian_second_branch() {
        let p = TailParams {
            d_p: 2.0,
            ..klocal(TailSystem::KLocalBrownianOTOC, 0.1)
        };
        let b = epsilon_of_delta(&p, 0.9).unwrap();
        assert_eq!(b.branch, Branch::Polynomial);
        let want = (2.0 * (8.5f64 * 0.1).exp() * 3.0 / (64.0 * 0.9)).sqrt();
        assert!((b.epsilon / want - 1.0).abs() < 1e-13);
    }

    #[test]
    fn nn1d_epsilon_reference() {
        // a=1, τ=1, r=10, D_P=1: the exponential branch needs δ < e^{0.5−10}.
        let b = epsilon_of_delta(&nn1d(10, 1.0), 1e-5).unwrap();
        assert_eq!(b.branch, Branch::Exponential);
        let want = (16.0 * E * E / 100.0 * (0.5 + 1e5f64.ln())).powi(5);
        assert!((b.epsilon / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tie_goes_to_second_branch() {
        let p = nn1d(4, 0.5);
        let lb = two_branch(&p, 0.5).unwrap().unwrap().2;
        let b = epsilon_of_delta(&p, lb.exp()).unwrap();
        assert_eq!(b.branch, Branch::Polynomial);
    }

    #[test]
    fn branch_values_report_discontinuity() {
        let p = klocal(TailSystem::KLocalStaticOTOC, 0.3);
        let bv = branch_values(&p, 0.2).unwrap().unwrap();
        assert!(bv.discontinuity >= 0.0 && bv.boundary > 0.0);
        assert!(
            branch_values(&TailParams::new(TailSystem::NN1dBrownianSpectral, 1.0), 0.1)
                .unwrap()
                .is_none()
        );
    }

    #[test]
    fn out_of_regime_errors() {
        let p = TailParams {
            alpha: 1.2,
            r: 8,
            ..TailParams::new(TailSystem::PowerLawBrownianSpectral, 1.0)
        };
        assert!(matches!(epsilon_of_delta(&p, 0.1), Err(Error::Regime(_))));
        assert!(matches!(epsilon_of_delta(&nn1d(3, 1.0), 0.0), Err(Error::Regime(_))));
        let p = TailParams {
            discrete: Some(Discretization { xi: 0.1, steps: 10 }),
            ..klocal(TailSystem::KLocalBrownianOTOC, 1.0)
        };
        assert!(matches!(p.validate(), Err(Error::Regime(_))));
    }

    #[test]
    fn spectral_inversion_round_trips() {
        let p = TailParams {
            r: 12,
            ..TailParams::new(TailSystem::NN1dBrownianSpectral, 0.01)
        };
        let b = epsilon_of_delta(&p, 0.01).unwrap();
        assert!(!b.vacuous, "{}", b.epsilon);
        let t = tail_probability(&p, b.epsilon).unwrap();
        assert!((t.probability / 0.01 - 1.0).abs() < 1e-9, "{}", t.probability);
    }

    #[test]
    fn velocity_ratios() {
        assert_eq!(
            velocity(&klocal(TailSystem::KLocalStaticOTOC, 1.0)).unwrap().value,
            0.25
        );
        assert_eq!(
            velocity(&klocal(TailSystem::KLocalBrownianOTOC, 1.0)).unwrap().value,
            2.0 / 17.0
        );
    }

    #[test]
    fn names_round_trip() {
        for s in TailSystem::ALL {
            assert_eq!(s.name().parse::<TailSystem>().unwrap(), s);
        }
    }
}
