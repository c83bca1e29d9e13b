#![allow(clippy::neg_cmp_op_on_partial_ord)]

use liebrob::bounds::{
    brownian_moment_bound, epsilon_of_delta, ln_moment_bound, markov_grid_search, markov_tail, printed_p_star,
    static_moment_bound, tail_probability, BetaSchedule, Branch, Discretization, MomentBoundParams, PathWeights,
    TailParams, TailSystem,
};
use liebrob::ensemble::{build_terms, EnsembleSpec, Geometry};
use liebrob::paths::{enumerate_paths, InteractionGraph};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gauss–Legendre nodes and weights on [-1, 1].
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            loop {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    let (mut q0, mut q1) = (1.0, x);
                    for k in 2..=n {
                        let q2 = ((2 * k - 1) as f64 * x * q1 - (k - 1) as f64 * q0) / k as f64;
                        q0 = q1;
                        q1 = q2;
                    }
                    let d = n as f64 * (x * q1 - q0) / (x * x - 1.0);
                    return (x, 2.0 / ((1.0 - x * x) * d * d));
                }
            }
        })
        .collect()
}

/// `∫_{0<t_1<…<t_ℓ<t} Π_{k=0}^{ℓ} e^{β_k(t_{k+1}−t_k)}` by nested quadrature.
fn nested_quadrature(betas: &[f64], t: f64, rule: &[(f64, f64)]) -> f64 {
    fn inner(k: usize, s: f64, betas: &[f64], t: f64, rule: &[(f64, f64)]) -> f64 {
        let l = betas.len() - 1;
        if k == l {
            return (betas[l] * (t - s)).exp();
        }
        let half = 0.5 * (t - s);
        rule.iter()
            .map(|&(x, w)| {
                let u = s + half * (x + 1.0);
                w * half * (betas[k] * (u - s)).exp() * inner(k + 1, u, betas, t, rule)
            })
            .sum()
    }
    inner(0, 0.0, betas, t, rule)
}

#[test]
fn simplex_integral_matches_nested_quadrature() {
    let rule = gauss_legendre(14);
    let (p, b2, t): (f64, f64, f64) = (3.0, 0.4, 1.7);
    for l in 1..=6usize {
        let beta = 1.3;
        let params = MomentBoundParams::new(p, BetaSchedule::Constant(beta));
        let got = static_moment_bound(&PathWeights::single(l, b2.powi(l as i32)), t, &params)
            .unwrap()
            .value;
        let quad = nested_quadrature(&vec![beta; l + 1], t, &rule) * (4.0 * p * b2 / beta).powi(l as i32);
        assert!((got / quad - 1.0).abs() < 1e-6, "static ℓ={l}: {got} vs {quad}");

        let w = 0.9;
        let params = MomentBoundParams::new(p, BetaSchedule::Constant(w));
        let got = brownian_moment_bound(&PathWeights::single(l, b2.powi(l as i32)), t, &params)
            .unwrap()
            .value;
        let quad = nested_quadrature(&vec![w / p; l + 1], t, &rule) * (8.0 * p * b2).powi(l as i32);
        assert!((got / quad - 1.0).abs() < 1e-6, "brownian ℓ={l}: {got} vs {quad}");

        let rates: Vec<f64> = (0..=l).map(|k| 0.4 + 0.35 * k as f64).collect();
        let params = MomentBoundParams::new(p, BetaSchedule::PerStep(rates.clone()));
        let got = static_moment_bound(&PathWeights::single(l, 1.0), t, &params)
            .unwrap()
            .value;
        let steps: f64 = rates[1..].iter().map(|b| 4.0 * p / b).product();
        let quad = nested_quadrature(&rates, t, &rule) * steps;
        assert!((got / quad - 1.0).abs() < 1e-6, "per-step ℓ={l}: {got} vs {quad}");
    }
}

#[test]
fn k_local_moment_closed_form() {
    // Complete 2-local, N = 6: R = (k−1)C(N,k)/(N/k) = 5 and the path
    // overcount R^{ℓ−1}·R(k−1)/N with Rb² = J².
    let (n, k, j, tau, p, d_p) = (6.0f64, 2.0f64, 0.7f64, 0.3f64, 4.0f64, 2.0f64);
    let r = 5.0;
    let b2 = j * j / r;
    let by_length: Vec<(usize, f64)> = (1..=80)
        .map(|l| (l, (k - 1.0) / n * r.powi(l as i32) * b2.powi(l as i32)))
        .collect();
    let params = MomentBoundParams::new(p, BetaSchedule::Constant(r * b2)).with_projector_rank(d_p);
    let got = brownian_moment_bound(
        &PathWeights {
            by_length,
            truncated: false,
        },
        tau,
        &params,
    )
    .unwrap()
    .value;
    let closed = d_p.powf(2.0 / p) * (j * j * tau / p).exp() * (k - 1.0) / n * (8.0 * p * j * j * tau).exp();
    // The sum starts at ℓ = 1, so it misses exactly the ℓ = 0 term of e^{8pJ²τ}.
    let missing = d_p.powf(2.0 / p) * (j * j * tau / p).exp() * (k - 1.0) / n;
    assert!(((got + missing) / closed - 1.0).abs() < 1e-12);

    // Enumerated paths with the true coefficient stay below the closed form.
    let spec = EnsembleSpec::new(Geometry::CompleteKLocal { n: 6, k: 2 }, j);
    let graph = InteractionGraph::new(build_terms(&spec).unwrap()).unwrap();
    let e = enumerate_paths(&graph, &[0], &[5], 10, false).unwrap();
    let w = graph.terms[0].bound.powi(2) * r;
    let params = MomentBoundParams::new(p, BetaSchedule::Constant(w)).with_projector_rank(d_p);
    let enumerated = brownian_moment_bound(&PathWeights::from(&e), tau, &params)
        .unwrap()
        .value;
    assert!(enumerated <= closed);
}

fn params_for(system: TailSystem, rng: &mut impl Rng) -> TailParams {
    let base = TailParams {
        coupling: rng.random_range(0.3..2.0),
        r: rng.random_range(1..40),
        d_p: [1.0, 2.0, 8.0][rng.random_range(0..3)],
        ..TailParams::new(system, rng.random_range(0.05..3.0))
    };
    match system {
        TailSystem::NNdBrownianOTOC => TailParams {
            lattice_dim: rng.random_range(1..4),
            ..base
        },
        TailSystem::NN1dBrownianSpectral => TailParams {
            split: rng.random_range(0.1..0.9),
            ..base
        },
        TailSystem::KLocalStaticOTOC | TailSystem::KLocalBrownianOTOC => TailParams {
            n: rng.random_range(10..1_000_000),
            k: rng.random_range(2..5),
            ..base
        },
        TailSystem::PowerLawStaticOTOC | TailSystem::PowerLawBrownianOTOC => TailParams {
            alpha: rng.random_range(1.05..4.0),
            r: rng.random_range(2..200),
            ..base
        },
        TailSystem::PowerLawStaticSpectral | TailSystem::PowerLawBrownianSpectral => TailParams {
            alpha: rng.random_range(1.55..4.0),
            r: rng.random_range(2..200),
            ..base
        },
        _ => base,
    }
}

fn regime_ok(p: &TailParams) -> bool {
    // Static spectral needs α > 3/2 and leaves the boundary α = 5/2 uncovered.
    p.validate().is_ok() && epsilon_of_delta(p, 0.5).is_ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn epsilon_monotone_per_branch(seed in any::<u64>(), which in 0usize..9) {
        let system = TailSystem::ALL[which];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = params_for(system, &mut rng);
        prop_assume!(regime_ok(&p));
        let deltas: Vec<f64> = (0..160).map(|i| 10f64.powf(-14.0 + 14.0 * i as f64 / 159.0)).collect();
        let evals: Vec<_> = deltas.iter().map(|&d| epsilon_of_delta(&p, d).unwrap()).collect();
        for w in evals.windows(2) {
            if w[0].branch == w[1].branch {
                prop_assert!(w[1].epsilon <= w[0].epsilon * (1.0 + 1e-12), "{system}: {:?} then {:?}", w[0], w[1]);
            }
        }
        for e in &evals {
            prop_assert_eq!(e.vacuous, !(e.epsilon < 1.0));
        }
    }

    #[test]
    fn moment_to_tail_consistency(seed in any::<u64>(), which in 0usize..5, eps in 1e-4f64..0.999) {
        let system = [
            TailSystem::NN1dBrownianOTOC,
            TailSystem::NNdBrownianOTOC,
            TailSystem::KLocalStaticOTOC,
            TailSystem::PowerLawStaticOTOC,
            TailSystem::PowerLawBrownianOTOC,
        ][which];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = params_for(system, &mut rng);
        prop_assume!(regime_ok(&p));
        let tail = tail_probability(&p, eps).unwrap();
        // The d > 1 first branch carries a loosened prefactor; only the
        // second-moment branch is the same algebra.
        prop_assume!(!(system == TailSystem::NNdBrownianOTOC && tail.branch == Branch::Exponential));
        let m = markov_tail(|q| ln_moment_bound(&p, q).unwrap(), eps, |e| printed_p_star(&p, e).unwrap()).unwrap();
        prop_assert_eq!(m.p_star, tail.p_star.unwrap());
        if tail.ln_probability.is_finite() {
            let tol = 1e-12 * tail.ln_probability.abs().max(1.0);
            prop_assert!((m.ln_probability - tail.ln_probability).abs() <= tol,
                "{system}: markov {} closed form {}", m.ln_probability, tail.ln_probability);
        } else {
            prop_assert!(m.ln_probability.is_infinite());
        }
    }
}

#[test]
fn printed_p_star_is_within_five_percent_of_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let systems = [
        TailSystem::NN1dBrownianOTOC,
        TailSystem::KLocalStaticOTOC,
        TailSystem::KLocalBrownianOTOC,
        TailSystem::PowerLawStaticOTOC,
        TailSystem::PowerLawBrownianOTOC,
    ];
    let mut draws = 0;
    while draws < 20 {
        let system = systems[draws % systems.len()];
        let p = params_for(system, &mut rng);
        if !regime_ok(&p) {
            continue;
        }
        let eps = rng.random_range(1e-3..0.9);
        let ln_m = |q: f64| ln_moment_bound(&p, q).unwrap();
        let rule = markov_tail(ln_m, eps, |e| printed_p_star(&p, e).unwrap()).unwrap();
        let grid = markov_grid_search(ln_m, eps, 2.0, 200.0, 4000).unwrap();
        assert!(
            grid.ln_probability >= rule.ln_probability + 0.95f64.ln(),
            "{system}: grid {} rule {}",
            grid.ln_probability,
            rule.ln_probability
        );
        draws += 1;
    }
}

fn nn1d_discrete(xi: f64, r: usize) -> TailParams {
    let steps = (1.0 / (xi * xi)).round() as u64;
    TailParams {
        r,
        discrete: Some(Discretization { xi, steps }),
        ..TailParams::new(TailSystem::NN1dBrownianOTOC, 0.0)
    }
}

#[test]
fn discrete_bound_converges_to_continuum() {
    let cont = TailParams {
        r: 5,
        ..TailParams::new(TailSystem::NN1dBrownianOTOC, 1.0)
    };
    for delta in [0.5, 0.1, 1e-3, 1e-8] {
        let target = epsilon_of_delta(&cont, delta).unwrap().epsilon;
        let mut xi = 0.2;
        let mut gaps = Vec::new();
        for _ in 0..6 {
            let e = epsilon_of_delta(&nn1d_discrete(xi, 5), delta).unwrap().epsilon;
            gaps.push((xi, e - target));
            xi /= 2.0;
        }
        for w in gaps.windows(2) {
            assert!(w[1].1.abs() < w[0].1.abs(), "δ={delta}: {gaps:?}");
        }
        let (xi0, g0) = gaps[0];
        let (xi5, g5) = gaps[5];
        assert!(g5.abs() <= 2.0 * g0.abs() / xi0 * xi5, "δ={delta}: {gaps:?}");
    }
}

#[test]
fn light_cone_crosses_threshold_once() {
    // The exponential branch holds for r < a²τ/2 + ln(1/δ), so small δ gives a long window.
    for (a, tau, delta) in [(1.0, 1.0, 1e-30), (0.5, 3.0, 1e-12), (1.5, 0.4, 1e-60)] {
        let evals: Vec<(usize, f64)> = (1..=400)
            .filter_map(|r| {
                let p = TailParams {
                    coupling: a,
                    r,
                    ..TailParams::new(TailSystem::NN1dBrownianOTOC, tau)
                };
                let b = epsilon_of_delta(&p, delta).unwrap();
                (b.branch == Branch::Exponential).then_some((r, b.epsilon))
            })
            .collect();
        assert!(evals.len() > 10);
        for eps0 in [0.9, 0.5, 1e-3, 1e-9] {
            let crossings = evals
                .windows(2)
                .filter(|w| (w[0].1 >= eps0) != (w[1].1 >= eps0))
                .count();
            let below_end = evals.last().unwrap().1 < eps0;
            let above_start = evals[0].1 >= eps0;
            assert_eq!(
                crossings,
                usize::from(below_end && above_start),
                "a={a} τ={tau} ε0={eps0}"
            );
        }
        for w in evals.windows(2).filter(|w| w[0].1 < 1.0) {
            assert!(w[1].1 < w[0].1);
        }
    }
}

#[test]
fn epsilon_grows_with_time_and_shrinks_with_distance() {
    let delta = 1e-4;
    for system in [
        TailSystem::NN1dBrownianOTOC,
        TailSystem::PowerLawBrownianOTOC,
        TailSystem::PowerLawStaticSpectral,
    ] {
        let mut prev: Option<f64> = None;
        for i in 0..120 {
            let p = TailParams {
                alpha: 3.0,
                r: 30,
                ..TailParams::new(system, 0.01 + 0.02 * i as f64)
            };
            let b = epsilon_of_delta(&p, delta).unwrap();
            if let Some(q) = prev {
                assert!(b.epsilon >= q * (1.0 - 1e-12), "{system} τ grid");
            }
            prev = Some(b.epsilon);
        }
        let mut prev: Option<(Branch, f64)> = None;
        for r in 2..120 {
            let p = TailParams {
                alpha: 3.0,
                r,
                ..TailParams::new(system, 0.5)
            };
            let b = epsilon_of_delta(&p, delta).unwrap();
            if let Some((br, q)) = prev {
                if br == b.branch && b.epsilon < 1.0 {
                    assert!(b.epsilon <= q * (1.0 + 1e-12), "{system} r grid at r={r}");
                }
            }
            prev = Some((b.branch, b.epsilon));
        }
    }
}
