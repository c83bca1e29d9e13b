//! Scale-decomposition constants for power-law chains.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four power-law bound families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerLawCase {
    StaticOtoc,
    StaticSpectral,
    BrownianOtoc,
    BrownianSpectral,
}

impl PowerLawCase {
    pub const ALL: [PowerLawCase; 4] = [
        PowerLawCase::StaticOtoc,
        PowerLawCase::StaticSpectral,
        PowerLawCase::BrownianOtoc,
        PowerLawCase::BrownianSpectral,
    ];

    /// Smallest α covered at all.
    pub fn lower_threshold(self) -> f64 {
        match self {
            PowerLawCase::StaticOtoc | PowerLawCase::BrownianOtoc => 1.0,
            PowerLawCase::StaticSpectral | PowerLawCase::BrownianSpectral => 1.5,
        }
    }

    /// α above which the light cone is linear.
    pub fn critical_alpha(self) -> f64 {
        match self {
            PowerLawCase::StaticOtoc => 2.0,
            PowerLawCase::BrownianOtoc => 1.5,
            PowerLawCase::StaticSpectral => 2.5,
            PowerLawCase::BrownianSpectral => 2.0,
        }
    }

    /// Exponent `e_c` in `2^{−k·e_c}` of the `N_k` schedule; zero at the critical α.
    pub fn schedule_exponent(self, alpha: f64) -> f64 {
        match self {
            PowerLawCase::StaticOtoc => (alpha - 2.0) / 2.0,
            PowerLawCase::BrownianOtoc => (2.0 * alpha - 3.0) / 3.0,
            PowerLawCase::StaticSpectral => (2.0 * alpha - 5.0) / 5.0,
            PowerLawCase::BrownianSpectral => (2.0 * alpha - 4.0) / 4.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PowerLawCase::StaticOtoc => "static_otoc",
            PowerLawCase::StaticSpectral => "static_spectral",
            PowerLawCase::BrownianOtoc => "brownian_otoc",
            PowerLawCase::BrownianSpectral => "brownian_spectral",
        }
    }

    pub fn is_spectral(self) -> bool {
        matches!(self, PowerLawCase::StaticSpectral | PowerLawCase::BrownianSpectral)
    }
}

/// Which side of the critical α a parameter sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaRegime {
    /// Above the critical value: linear light cone.
    Linear,
    /// Between the lower threshold and the critical value.
    Algebraic,
}

/// Classifies α, rejecting values outside the supported range or exactly at a boundary.
pub fn alpha_regime(case: PowerLawCase, alpha: f64) -> Result<AlphaRegime> {
    let lo = case.lower_threshold();
    let crit = case.critical_alpha();
    if !alpha.is_finite() || alpha <= lo {
        return Err(Error::Regime(format!("{} requires α > {lo}, got {alpha}", case.name())));
    }
    if alpha == crit {
        return Err(Error::Regime(format!(
            "{} is not covered at the boundary α = {crit}",
            case.name()
        )));
    }
    Ok(if alpha > crit {
        AlphaRegime::Linear
    } else {
        AlphaRegime::Algebraic
    })
}

/// Light-cone exponent β from the regime table.
pub fn light_cone_exponent(case: PowerLawCase, alpha: f64) -> Result<f64> {
    Ok(match alpha_regime(case, alpha)? {
        AlphaRegime::Linear => 1.0,
        AlphaRegime::Algebraic => match case {
            PowerLawCase::StaticOtoc => alpha - 1.0,
            PowerLawCase::BrownianOtoc => 2.0 * alpha - 2.0,
            PowerLawCase::StaticSpectral => alpha - 1.5,
            PowerLawCase::BrownianSpectral => 2.0 * alpha - 3.0,
        },
    })
}

/// Every intermediate of the scale decomposition for one `(α, case, r)`.
///
/// Fields that a chain does not define are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawConstants {
    pub alpha: f64,
    pub case: PowerLawCase,
    pub r: usize,
    pub regime: AlphaRegime,
    pub beta: f64,
    pub schedule_exponent: f64,
    pub n_star: usize,
    pub k_star: usize,
    /// `N_1, …, N_{n_*+1}`; the last entry is the first `k > n_*`.
    pub n_schedule: Vec<u64>,
    pub m: f64,
    pub m_prime: f64,
    pub b1: Option<f64>,
    pub b2: Option<f64>,
    pub c: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c2_prime: Option<f64>,
    pub c_prime: Option<f64>,
    pub a_prime: Option<f64>,
    pub c0: Option<f64>,
    pub c3: Option<f64>,
    pub a_alpha: Option<f64>,
    pub b_alpha: Option<f64>,
    pub c_alpha: f64,
}

/// `n_* = max(1, ⌊log₂ r⌋)`.
pub fn n_star(r: usize) -> usize {
    if r < 2 {
        1
    } else {
        (usize::BITS - 1 - r.leading_zeros()) as usize
    }
}

/// `1/(1 − 2^{−(α−1)})`, the geometric factor for scales beyond `k_*`.
fn tail_factor(alpha: f64) -> f64 {
    1.0 / (1.0 - 2f64.powf(-(alpha - 1.0)))
}

fn pair_constant(b1: f64, b2: f64, doubled: bool) -> f64 {
    if doubled {
        4.0 * b1 / (1.0 - b1 / (2.0 * (2.0 * b1 + b2))) + 2.0 * b2
    } else {
        2.0 * b1 / (1.0 - b1 / (2.0 * (b1 + b2))) + 2.0 * b2
    }
}

/// Evaluates the constant chain for `case` at distance `r ≥ 1`.
pub fn powerlaw_constants(alpha: f64, case: PowerLawCase, r: usize) -> Result<PowerLawConstants> {
    if r == 0 {
        return Err(Error::InvalidInput("r must be >= 1".into()));
    }
    let regime = alpha_regime(case, alpha)?;
    let beta = light_cone_exponent(case, alpha)?;
    let ec = case.schedule_exponent(alpha);
    let ns = n_star(r);
    let rf = r as f64;
    let m: f64 = (1..=ns).map(|k| 2f64.powf(-(k as f64) * ec)).sum();
    let m_prime = if ec > 0.0 {
        1.0 / (1.0 - 2f64.powf(-ec))
    } else {
        rf.powf(-ec) / (1.0 - 2f64.powf(ec))
    };
    let mut n_schedule: Vec<u64> = (1..=ns)
        .map(|k| {
            let kf = k as f64;
            (0.5 * 2f64.powf(-kf * ec) / m * rf / 2f64.powf(kf)).ceil().max(1.0) as u64
        })
        .collect();
    n_schedule.push(1);
    let k_star = n_schedule.iter().position(|&n| n == 1).map_or(ns + 1, |i| i + 1);
    // In the algebraic regime the r-dependence of M′ is pulled out; q stands in for 1/M′.
    let q = 1.0 - 2f64.powf(ec);
    let linear = regime == AlphaRegime::Linear;
    let fix = tail_factor(alpha);

    let mut out = PowerLawConstants {
        alpha,
        case,
        r,
        regime,
        beta,
        schedule_exponent: ec,
        n_star: ns,
        k_star,
        n_schedule,
        m,
        m_prime,
        b1: None,
        b2: None,
        c: 0.0,
        a: None,
        b: None,
        c1: None,
        c2: None,
        c2_prime: None,
        c_prime: None,
        a_prime: None,
        c0: None,
        c3: None,
        a_alpha: None,
        b_alpha: None,
        c_alpha: 0.0,
    };
    let e2 = E * E;
    let e3 = e2 * E;
    match case {
        PowerLawCase::StaticOtoc => {
            let (b1, b2) = if linear {
                let mp2 = m_prime * m_prime;
                (
                    e2 * 2f64.powf(4.0 + alpha) * mp2,
                    4.0 * e2 * 2f64.powf(2.0 + alpha) * mp2 * fix,
                )
            } else {
                let q2 = q * q;
                (
                    e2 * 2f64.powf(4.0 + alpha) / q2,
                    4.0 * e2 * 2f64.powf(2.0 + alpha) / q2 * fix,
                )
            };
            let c = pair_constant(b1, b2, !linear);
            out.b1 = Some(b1);
            out.b2 = Some(b2);
            out.c = c;
            out.c_alpha = 2.0 * E * c * c;
        }
        PowerLawCase::BrownianOtoc => {
            let (b1, b2) = if linear {
                let mp = m_prime;
                let b1 = (1.0 / (e3 * e3 * 1024.0 * mp * mp)).exp()
                    * (e3 * 2f64.powf(8.0 + 2.0 * alpha) * mp.powi(3)).sqrt();
                let b2 = (1.0 / (128.0 * e3 * mp * mp)).exp()
                    * 4.0
                    * E
                    * E.sqrt()
                    * (2f64.powf(2.0 * alpha + 2.0) * mp.powi(3)).sqrt()
                    * fix;
                (b1, b2)
            } else {
                let b1 = (q * q / (e3 * 1024.0 * 2f64.powf(4.0 * alpha / 3.0 - 1.0))).exp()
                    * (e3 * 2f64.powf(8.0 + 2.0 * alpha) / q.powi(3)).sqrt();
                let b2 = (q.powf(3.0 / alpha) / (128.0 * e3 * 8f64.powf(1.0 / alpha))).exp()
                    * 4.0
                    * (2.0 * E).sqrt()
                    * E
                    * fix
                    * (4.0 / q.powi(3)).sqrt();
                (b1, b2)
            };
            let k = pair_constant(b1, b2, !linear);
            let c = k * k;
            out.b1 = Some(b1);
            out.b2 = Some(b2);
            out.c = c;
            out.c_alpha = 2.0 * E * c;
        }
        PowerLawCase::StaticSpectral => {
            let c2 = (1.0 / (1.0 - 2f64.powf(-alpha / 5.0))).exp() * 2.0 / (1.0 - 2f64.powf(-alpha + 1.0));
            out.c2 = Some(c2);
            if linear {
                let a = 4.0 * m_prime * 2f64.powf(2.0 * alpha / 5.0);
                let b = e2 * 2f64.powf(4.0 + 4.0 * alpha / 5.0) * m_prime * m_prime;
                let c2p = 2.0 * c2;
                let c = (c2p * b / (1.0 - 1.0 / c2p)).powi(2);
                out.a = Some(a);
                out.b = Some(b);
                out.c2_prime = Some(c2p);
                out.c = c;
                out.a_alpha = Some(a);
                out.b_alpha = Some(1.0);
                out.c_alpha = 1.0 / (2.0 * E * c);
            } else {
                let b = e2 * 2f64.powf(4.0 + 4.0 * alpha / 5.0) / (q * q);
                let cp = (c2 * b / (1.0 - 1.0 / c2)).powi(2);
                let c = 1.0 / (2.0 * E * cp);
                let a_prime = 2f64.powf(2.0 + 2.0 * alpha / 5.0) / q;
                let c0 = c * (1.0 - 2f64.powf(1.5 - alpha)).powi(2);
                let c3 = 1.0 / (E * (1.0 - 1.0 / E) * (1.0 - 2.0 * alpha / 5.0));
                out.b = Some(b);
                out.c_prime = Some(cp);
                out.c = c;
                out.a_prime = Some(a_prime);
                out.c0 = Some(c0);
                out.c3 = Some(c3);
                out.a_alpha = Some(a_prime);
                out.b_alpha = Some(E * c3);
                out.c_alpha = c0;
            }
        }
        PowerLawCase::BrownianSpectral => {
            let c2 = (1.0 / (1.0 - 2f64.powf(-alpha / 4.0))).exp() * 2.0 / (1.0 - 2f64.powf(-2.0 * alpha + 2.0));
            out.c2 = Some(c2);
            if linear {
                let mp3 = m_prime.powi(3);
                let a = 8.0 * m_prime * 2f64.powf(alpha / 2.0);
                let c1 = (1.0 / (4.0 * e3 * 2f64.powf(8.0 - alpha / 2.0) * mp3)).exp();
                let b = c1 * e3 * 2f64.powf(8.0 + 1.5 * alpha) * mp3;
                let c2p = c2 / (1.0 - 1.0 / 2f64.sqrt());
                let c = c2p * c2p * b / (1.0 - 1.0 / c2p).powi(2);
                out.a = Some(a);
                out.b = Some(b);
                out.c1 = Some(c1);
                out.c2_prime = Some(c2p);
                out.c = c;
                out.a_alpha = Some(a / 2.0);
                out.b_alpha = Some(1.0);
                out.c_alpha = 1.0 / (2.0 * E * c);
            } else {
                let q3 = q.powi(3);
                let c1 = (q * q * 2f64.powf(2.0 * alpha) / (8.0 * e3 * 2f64.powf(8.0 + 1.5 * alpha))).exp();
                let b = c1 * e3 * 2f64.powf(8.0 + 1.5 * alpha) / q3;
                let cp = c2 * c2 * b / (1.0 - 1.0 / c2).powi(2);
                let c = 1.0 / (2.0 * E * cp);
                let a_prime = 2f64.powf(2.0 + alpha / 2.0) / q;
                let c0 = c * (1.0 - 2f64.powf(1.5 - alpha)).powi(2);
                let c3 = 1.0 / (E * (1.0 - 1.0 / E) * (1.0 - alpha / 2.0));
                out.b = Some(b);
                out.c1 = Some(c1);
                out.c_prime = Some(cp);
                out.c = c;
                out.a_prime = Some(a_prime);
                out.c0 = Some(c0);
                out.c3 = Some(c3);
                out.a_alpha = Some(a_prime);
                out.b_alpha = Some(E * c3);
                out.c_alpha = c0;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_otoc_m_prime_at_three() {
        let c = powerlaw_constants(3.0, PowerLawCase::StaticOtoc, 64).unwrap();
        assert!((c.m_prime - 3.414_213_562_373_095).abs() < 1e-12);
        assert_eq!(c.beta, 1.0);
    }

    #[test]
    fn beta_table() {
        let rows = [
            (PowerLawCase::BrownianOtoc, 1.25, 0.5),
            (PowerLawCase::BrownianOtoc, 2.0, 1.0),
            (PowerLawCase::StaticOtoc, 1.5, 0.5),
            (PowerLawCase::StaticOtoc, 3.0, 1.0),
            (PowerLawCase::BrownianSpectral, 1.75, 0.5),
            (PowerLawCase::BrownianSpectral, 3.0, 1.0),
            (PowerLawCase::StaticSpectral, 2.0, 0.5),
            (PowerLawCase::StaticSpectral, 3.0, 1.0),
        ];
        for (case, alpha, beta) in rows {
            assert_eq!(light_cone_exponent(case, alpha).unwrap(), beta, "{case:?} {alpha}");
        }
    }

    #[test]
    fn regime_errors_name_condition() {
        let e = powerlaw_constants(1.4, PowerLawCase::BrownianSpectral, 8).unwrap_err();
        assert!(e.to_string().contains("α > 1.5"), "{e}");
        assert!(matches!(
            powerlaw_constants(2.0, PowerLawCase::StaticOtoc, 8),
            Err(Error::Regime(_))
        ));
    }

    #[test]
    fn n_star_values() {
        assert_eq!(n_star(1), 1);
        assert_eq!(n_star(2), 1);
        assert_eq!(n_star(7), 2);
        assert_eq!(n_star(8), 3);
        assert_eq!(n_star(1000), 9);
    }

    #[test]
    fn k_star_matches_threshold_scan() {
        for case in PowerLawCase::ALL {
            for alpha in [1.6, 1.9, 2.2, 2.4, 2.7, 3.5] {
                if alpha_regime(case, alpha).is_err() {
                    continue;
                }
                for r in [2usize, 5, 17, 100, 1000, 5000] {
                    let c = powerlaw_constants(alpha, case, r).unwrap();
                    let th = 1.0 + c.schedule_exponent;
                    let scan = (1..=c.n_star)
                        .find(|&k| c.m / r as f64 >= 2f64.powf(-(1.0 + k as f64 * th)))
                        .unwrap_or(c.n_star + 1);
                    assert_eq!(c.k_star, scan, "{case:?} α={alpha} r={r}");
                }
            }
        }
    }

    #[test]
    fn aliases_present_for_spectral() {
        for (case, alpha) in [
            (PowerLawCase::StaticSpectral, 2.0),
            (PowerLawCase::StaticSpectral, 3.0),
            (PowerLawCase::BrownianSpectral, 1.75),
            (PowerLawCase::BrownianSpectral, 2.5),
        ] {
            let c = powerlaw_constants(alpha, case, 16).unwrap();
            assert!(c.a_alpha.unwrap() > 0.0 && c.b_alpha.unwrap() > 0.0 && c.c_alpha > 0.0);
            assert!(c.c.is_finite() && c.c > 0.0);
        }
    }
}
