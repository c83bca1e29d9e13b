//! Exact and Monte Carlo checks of the matrix martingale inequalities.

use std::f64::consts::E;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::sample_seed;
use crate::error::{invalid, Error, Result};
use crate::linalg::{hermitian_eigen, hermitian_exponential, pauli_string, schatten_norm, Pauli, C64, HERMITIAN_TOL};
use crate::ComplexMatrix;

/// Largest number of joint atoms an exact computation may visit.
pub const MAX_JOINT_ATOMS: u128 = 1_000_000;

const PROB_TOL: f64 = 1e-12;
const MEAN_TOL: f64 = 1e-12;

/// A matrix-valued random variable with finitely many atoms, optionally with
/// one conditional distribution per atom.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMatrixDistribution {
    pub atoms: Vec<(ComplexMatrix, f64)>,
    pub children: Option<Vec<FiniteMatrixDistribution>>,
}

impl FiniteMatrixDistribution {
    pub fn new(atoms: Vec<(ComplexMatrix, f64)>) -> Result<Self> {
        let d = FiniteMatrixDistribution { atoms, children: None };
        d.validate()?;
        Ok(d)
    }

    pub fn deterministic(m: ComplexMatrix) -> Self {
        FiniteMatrixDistribution {
            atoms: vec![(m, 1.0)],
            children: None,
        }
    }

    /// `Σ_j s_j B_j` over all `2^m` sign patterns, each with probability `2^{−m}`.
    pub fn rademacher_sum(bs: &[ComplexMatrix]) -> Result<Self> {
        if bs.is_empty() || bs.len() > 20 {
            return invalid("rademacher_sum needs between 1 and 20 matrices");
        }
        let dim = bs[0].dim();
        let n = 1usize << bs.len();
        let w = 1.0 / n as f64;
        let mut atoms = Vec::with_capacity(n);
        for mask in 0..n {
            let mut s = ComplexMatrix::zeros(dim);
            for (j, b) in bs.iter().enumerate() {
                let sign = if mask >> j & 1 == 1 { -1.0 } else { 1.0 };
                s = s.add(&b.scale_real(sign))?;
            }
            atoms.push((s, w));
        }
        Self::new(atoms)
    }

    /// Attaches `Y | X = atom_i` for every atom.
    pub fn with_children(mut self, children: Vec<FiniteMatrixDistribution>) -> Result<Self> {
        if children.len() != self.atoms.len() {
            return invalid(format!(
                "{} conditional distributions for {} atoms",
                children.len(),
                self.atoms.len()
            ));
        }
        self.children = Some(children);
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.atoms.first().map_or(0, |a| a.0.dim())
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return invalid("distribution has no atoms");
        }
        let dim = self.dim();
        let mut total = 0.0;
        for (m, p) in &self.atoms {
            if !(*p > 0.0) {
                return invalid(format!("atom probability must be positive, got {p}"));
            }
            if m.dim() != dim {
                return invalid("atoms have different dimensions");
            }
            total += p;
        }
        if (total - 1.0).abs() > PROB_TOL {
            return invalid(format!("probabilities sum to {total}"));
        }
        if let Some(ch) = &self.children {
            for c in ch {
                c.validate()?;
                if c.dim() != dim {
                    return invalid("conditional atoms have a different dimension");
                }
            }
        }
        Ok(())
    }

    /// Atoms counted with every conditional expanded.
    pub fn joint_count(&self) -> u128 {
        match &self.children {
            None => self.atoms.len() as u128,
            Some(ch) => ch.iter().map(|c| c.joint_count()).sum(),
        }
    }

    /// Largest entry of `Σ_i p_i Y_i` over all conditionals.
    pub fn conditional_mean_defect(&self) -> f64 {
        self.children.as_ref().map_or(0.0, |ch| {
            ch.iter()
                .map(|c| {
                    let dim = c.dim();
                    let mut m = ComplexMatrix::zeros(dim);
                    for (y, p) in &c.atoms {
                        m = m.add(&y.scale_real(*p)).expect("same dimension");
                    }
                    m.max_abs_entry()
                })
                .fold(0.0, f64::max)
        })
    }

    fn check_size(&self) -> Result<()> {
        let n = self.joint_count();
        if n > MAX_JOINT_ATOMS {
            return Err(Error::Resource {
                what: "joint atoms".into(),
                required: n,
                allowed: MAX_JOINT_ATOMS,
            });
        }
        Ok(())
    }
}

/// Which expected norm was computed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    SchattenP,
    SchattenPWithProjector { rank: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub kind: NormKind,
    pub p: f64,
    pub value: f64,
    pub exact: bool,
    pub variance_proxy: Option<f64>,
}

fn rank_of_projector(p: &ComplexMatrix) -> usize {
    p.trace().re.round() as usize
}

fn norm_with(m: &ComplexMatrix, p: f64, projector: Option<&ComplexMatrix>) -> Result<f64> {
    match projector {
        Some(pr) => schatten_norm(&m.matmul(pr)?, p),
        None => schatten_norm(m, p),
    }
}

/// `(Σ_i w_i ‖M_i‖_p^q)^{1/q}`, scaled to avoid overflow.
fn lq_of(weighted_norms: &[(f64, f64)], q: f64) -> f64 {
    let top = weighted_norms.iter().map(|x| x.0).fold(0.0, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    let s: f64 = weighted_norms.iter().map(|(n, w)| w * (n / top).powf(q)).sum();
    top * s.powf(1.0 / q)
}

/// `(E‖M‖_p^p)^{1/p}` over the atoms, or `(E‖MP‖_p^p)^{1/p}` with a projector.
pub fn exact_expected_norm(
    dist: &FiniteMatrixDistribution,
    p: f64,
    projector: Option<&ComplexMatrix>,
) -> Result<MomentEstimate> {
    dist.validate()?;
    dist.check_size()?;
    let norms = dist
        .atoms
        .iter()
        .map(|(m, w)| Ok((norm_with(m, p, projector)?, *w)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentEstimate {
        kind: projector.map_or(NormKind::SchattenP, |pr| NormKind::SchattenPWithProjector {
            rank: rank_of_projector(pr),
        }),
        p,
        value: lq_of(&norms, p),
        exact: true,
        variance_proxy: None,
    })
}

/// Joint atoms `(X, Y, prob)` of a distribution whose children are `Y | X`.
fn joint(x: &FiniteMatrixDistribution) -> Result<Vec<(&ComplexMatrix, &ComplexMatrix, f64)>> {
    let ch = x
        .children
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("distribution has no conditional part".into()))?;
    Ok(x.atoms
        .iter()
        .zip(ch)
        .flat_map(|((xm, px), c)| c.atoms.iter().map(move |(ym, py)| (xm, ym, px * py)))
        .collect())
}

fn require_zero_mean(x: &FiniteMatrixDistribution) -> Result<()> {
    let defect = x.conditional_mean_defect();
    if defect > MEAN_TOL {
        return Err(Error::Precondition(format!("E[Y|X] deviates from zero by {defect:e}")));
    }
    Ok(())
}

/// `S = |||X|||² + C·|||Y|||² − |||X+Y|||²` for one norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessSlack {
    pub p: f64,
    pub q: f64,
    pub constant: f64,
    pub x_sq: f64,
    pub y_sq: f64,
    pub sum_sq: f64,
    pub slack: f64,
    /// Smallest constant for which the inequality holds on this instance.
    pub min_constant: f64,
    pub pass: bool,
}

/// Tolerance on smoothness and domination slacks.
pub const SLACK_TOL: f64 = 1e-10;

fn smoothness_from(p: f64, q: f64, constant: f64, x_sq: f64, y_sq: f64, sum_sq: f64) -> SmoothnessSlack {
    let slack = x_sq + constant * y_sq - sum_sq;
    let min_constant = if y_sq > 0.0 {
        ((sum_sq - x_sq) / y_sq).max(0.0)
    } else {
        0.0
    };
    SmoothnessSlack {
        p,
        q,
        constant,
        x_sq,
        y_sq,
        sum_sq,
        slack,
        min_constant,
        pass: slack >= -SLACK_TOL,
    }
}

/// Squared `(E‖·P‖_p^q)^{1/q}` of X, Y and X+Y over the joint atoms.
fn joint_norms(
    x: &FiniteMatrixDistribution,
    p: f64,
    q: f64,
    projector: Option<&ComplexMatrix>,
) -> Result<(f64, f64, f64)> {
    x.validate()?;
    x.check_size()?;
    require_zero_mean(x)?;
    let mut nx = Vec::new();
    let mut ny = Vec::new();
    let mut ns = Vec::new();
    for (xm, ym, w) in joint(x)? {
        nx.push((norm_with(xm, p, projector)?, w));
        ny.push((norm_with(ym, p, projector)?, w));
        ns.push((norm_with(&xm.add(ym)?, p, projector)?, w));
    }
    Ok((lq_of(&nx, q).powi(2), lq_of(&ny, q).powi(2), lq_of(&ns, q).powi(2)))
}

/// Uniform smoothness `|||X+Y|||_p² ≤ |||X|||_p² + (p−1)|||Y|||_p²` with `Y | X`
/// given by the children of `x`.
pub fn check_uniform_smoothness(x: &FiniteMatrixDistribution, p: f64) -> Result<SmoothnessSlack> {
    if !(p >= 2.0) {
        return invalid(format!("p must be >= 2, got {p}"));
    }
    let (a, b, c) = joint_norms(x, p, p, None)?;
    Ok(smoothness_from(p, p, p - 1.0, a, b, c))
}

/// The rank-`D_P` variant: each norm is the largest over the given projectors.
pub fn check_uniform_smoothness_projected(
    x: &FiniteMatrixDistribution,
    p: f64,
    projectors: &[ComplexMatrix],
) -> Result<SmoothnessSlack> {
    if !(p >= 2.0) {
        return invalid(format!("p must be >= 2, got {p}"));
    }
    if projectors.is_empty() {
        return invalid("need at least one projector");
    }
    let (mut a, mut b, mut c) = (0.0f64, 0.0f64, 0.0f64);
    for pr in projectors {
        let (x2, y2, s2) = joint_norms(x, p, p, Some(pr))?;
        a = a.max(x2);
        b = b.max(y2);
        c = c.max(s2);
    }
    Ok(smoothness_from(p, p, p - 1.0, a, b, c))
}

/// `L_q(S_p)` smoothness with the trial constant `C = 4(p+q)`; the record
/// also carries the smallest constant that works on the instance.
pub fn check_lq_sp_smoothness(x: &FiniteMatrixDistribution, p: f64, q: f64) -> Result<SmoothnessSlack> {
    if !(p >= 2.0 && q >= 2.0) {
        return invalid(format!("p and q must be >= 2, got {p}, {q}"));
    }
    let (a, b, c) = joint_norms(x, p, q, None)?;
    Ok(smoothness_from(p, q, 4.0 * (p + q), a, b, c))
}

/// Slack of the mixed-state to pure-state domination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationSlack {
    pub p: f64,
    pub mixed: f64,
    pub best_pure: f64,
    pub states_tried: usize,
    pub slack: f64,
    pub pass: bool,
}

fn state_moment(dist: &FiniteMatrixDistribution, psi: &[C64], p: f64) -> f64 {
    let vals: Vec<(f64, f64)> = dist
        .atoms
        .iter()
        .map(|(x, w)| {
            let m = x.as_dmatrix();
            let v = nalgebra::DVector::from_column_slice(psi);
            let xv = m * v;
            (xv.norm_squared().sqrt(), *w)
        })
        .collect();
    // E[⟨ψ|X†X|ψ⟩^{p/2}]^{2/p} = (E‖Xψ‖^p)^{2/p}
    lq_of(&vals, p).powi(2)
}

/// Haar-random unit vector.
pub fn random_pure_state(rng: &mut impl Rng, dim: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

/// Matrix with independent standard complex Gaussian entries.
pub fn random_complex_matrix(rng: &mut impl Rng, dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// `X` with `x_atoms` random atoms and, for each atom, its own conditional
/// Rademacher sum `Y | X = Σ_j s_j B_j` over `y_terms` random matrices.
pub fn random_smoothness_instance(
    seed: u64,
    dim: usize,
    x_atoms: usize,
    y_terms: usize,
) -> Result<FiniteMatrixDistribution> {
    if dim == 0 || x_atoms == 0 {
        return invalid("dimension and atom count must be >= 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut atoms = Vec::with_capacity(x_atoms);
    let mut children = Vec::with_capacity(x_atoms);
    for _ in 0..x_atoms {
        let scale = rng.random_range(0.1..2.0);
        atoms.push((
            random_complex_matrix(&mut rng, dim).scale_real(scale),
            1.0 / x_atoms as f64,
        ));
        let y_scale = rng.random_range(0.05..1.0);
        let bs: Vec<ComplexMatrix> = (0..y_terms)
            .map(|_| random_complex_matrix(&mut rng, dim).scale_real(y_scale))
            .collect();
        children.push(FiniteMatrixDistribution::rademacher_sum(&bs)?);
    }
    FiniteMatrixDistribution::new(atoms)?.with_children(children)
}

/// Projector onto the span of `rank` random vectors.
pub fn random_projector(rng: &mut impl Rng, dim: usize, rank: usize) -> Result<ComplexMatrix> {
    if rank == 0 || rank > dim {
        return invalid(format!("projector rank {rank} not in 1..={dim}"));
    }
    let g = random_complex_matrix(rng, dim);
    let q = g.as_dmatrix().clone().qr().q();
    let cols = q.columns(0, rank);
    ComplexMatrix::from_dmatrix(cols * cols.adjoint())
}

/// Density matrix `Σ λ_i |v_i⟩⟨v_i|` with random orthonormal `v_i` and random weights.
pub fn random_density_matrix(rng: &mut impl Rng, dim: usize, rank: usize) -> Result<ComplexMatrix> {
    if rank == 0 || rank > dim {
        return invalid(format!("rank {rank} not in 1..={dim}"));
    }
    let g = random_complex_matrix(rng, dim);
    let q = g.as_dmatrix().clone().qr().q();
    let w: Vec<f64> = (0..rank).map(|_| rng.random::<f64>() + 0.05).collect();
    let s: f64 = w.iter().sum();
    let mut rho = nalgebra::DMatrix::<C64>::zeros(dim, dim);
    for (i, wi) in w.iter().enumerate() {
        let c = q.column(i);
        rho += c * c.adjoint() * C64::new(wi / s, 0.0);
    }
    ComplexMatrix::from_dmatrix(rho)
}

fn validate_density(rho: &ComplexMatrix) -> Result<crate::linalg::HermitianEigen> {
    if rho.hermiticity_defect() > HERMITIAN_TOL * rho.dim() as f64 {
        return invalid("ρ is not Hermitian");
    }
    let eig = hermitian_eigen(rho)?;
    if eig.values.iter().any(|&l| l < -1e-12) {
        return invalid("ρ has a negative eigenvalue");
    }
    if (rho.trace().re - 1.0).abs() > 1e-10 {
        return invalid(format!("Tr ρ = {}", rho.trace().re));
    }
    Ok(eig)
}

/// `E[Tr(ρX†X)^{p/2}]^{2/p} ≤ max_ψ E[⟨ψ|X†X|ψ⟩^{p/2}]^{2/p}`, with ψ over the
/// eigenvectors of ρ and `extra_states` random pure states.
pub fn check_low_rank_domination(
    dist: &FiniteMatrixDistribution,
    rho: &ComplexMatrix,
    p: f64,
    extra_states: usize,
    seed: u64,
) -> Result<DominationSlack> {
    dist.validate()?;
    dist.check_size()?;
    if !(p >= 2.0) {
        return invalid(format!("p must be >= 2, got {p}"));
    }
    if rho.dim() != dist.dim() {
        return invalid("ρ and the distribution differ in dimension");
    }
    let eig = validate_density(rho)?;
    let vals: Vec<(f64, f64)> = dist
        .atoms
        .iter()
        .map(|(x, w)| {
            let g = x.adjoint().matmul(x).and_then(|g| rho.matmul(&g))?;
            Ok((g.trace().re.max(0.0).sqrt(), *w))
        })
        .collect::<Result<_>>()?;
    let mixed = lq_of(&vals, p).powi(2);
    let dim = rho.dim();
    let mut states: Vec<Vec<C64>> = (0..dim)
        .filter(|&i| eig.values[i] > 1e-14)
        .map(|i| eig.vectors.column(i).iter().copied().collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    states.extend((0..extra_states).map(|_| random_pure_state(&mut rng, dim)));
    let best_pure = states.iter().map(|s| state_moment(dist, s, p)).fold(0.0, f64::max);
    let slack = best_pure - mixed;
    Ok(DominationSlack {
        p,
        mixed,
        best_pure,
        states_tried: states.len(),
        slack,
        pass: slack >= -SLACK_TOL,
    })
}

/// One ε-grid point of the sum-of-bounded-matrices comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub epsilon: f64,
    pub empirical: f64,
    pub bound: f64,
    /// `ε² > 2e²v`: the exponential form applies.
    pub exponential_region: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumMatricesReport {
    pub dim: usize,
    pub n_terms: usize,
    pub samples: usize,
    pub variance: f64,
    pub spectral: Vec<TailPoint>,
    pub frobenius: Vec<TailPoint>,
    pub projected: Vec<TailPoint>,
    pub mean_spectral: f64,
    pub standard_error: f64,
    /// `√(v ln D)`; zero for `D = 1`.
    pub spectral_scale: f64,
    pub mean_frobenius: f64,
    pub mean_projected: f64,
    pub pass: bool,
}

fn tail_points(values: &[f64], prefactor: f64, v: f64, grid: &[f64]) -> Vec<TailPoint> {
    let n = values.len() as f64;
    grid.iter()
        .map(|&eps| {
            let empirical = values.iter().filter(|&&x| x >= eps).count() as f64 / n;
            let exponential_region = eps * eps > 2.0 * E * E * v;
            let bound = if exponential_region {
                prefactor * (-eps * eps / (E * E * v)).exp()
            } else {
                prefactor * v / (eps * eps)
            }
            .min(1.0);
            TailPoint {
                epsilon: eps,
                empirical,
                bound,
                exponential_region,
                pass: empirical <= bound,
            }
        })
        .collect()
}

/// Non-identity Pauli string for term `i` (or the scalar 1 when `dim = 1`).
fn demo_term(seed: u64, i: usize, qubits: usize) -> ComplexMatrix {
    if qubits == 0 {
        return ComplexMatrix::identity(1);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, i as u64) ^ 0x5eed_7e57);
    loop {
        let ops: Vec<Pauli> = (0..qubits).map(|_| Pauli::ALL[rng.random_range(0..4)]).collect();
        if ops.iter().any(|&p| p != Pauli::I) {
            return pauli_string(&ops);
        }
    }
}

/// Samples `S = Σ_i s_i b_i P_i` with Rademacher signs and fixed Pauli strings,
/// and compares empirical tails with the analytic bounds. `dim` must be a power of two.
pub fn sum_matrices_demo(dim: usize, bounds: &[f64], samples: usize, seed: u64) -> Result<SumMatricesReport> {
    if samples < 100 {
        return invalid("at least 100 samples are required");
    }
    if !dim.is_power_of_two() {
        return invalid(format!("dimension {dim} is not a power of two"));
    }
    if bounds.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
        return invalid("term bounds must be finite and >= 0");
    }
    let qubits = dim.trailing_zeros() as usize;
    let terms: Vec<ComplexMatrix> = bounds
        .iter()
        .enumerate()
        .map(|(i, &b)| demo_term(seed, i, qubits).scale_real(b))
        .collect();
    let v: f64 = bounds.iter().map(|b| b * b).sum();
    let norms: Vec<(f64, f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, s as u64));
            let mut acc = nalgebra::DMatrix::<C64>::zeros(dim, dim);
            for t in &terms {
                if rng.random::<bool>() {
                    acc += t.as_dmatrix();
                } else {
                    acc -= t.as_dmatrix();
                }
            }
            let m = ComplexMatrix::from_dmatrix(acc).expect("finite sum");
            let spec = schatten_norm(&m, f64::INFINITY).expect("finite");
            let frob = m.frobenius_norm() / (dim as f64).sqrt();
            let col0 = m.as_dmatrix().column(0).norm();
            (spec, frob, col0)
        })
        .collect();
    let spec: Vec<f64> = norms.iter().map(|x| x.0).collect();
    let frob: Vec<f64> = norms.iter().map(|x| x.1).collect();
    let proj: Vec<f64> = norms.iter().map(|x| x.2).collect();
    // Reach twice the edge of the exponential region so it is always sampled.
    let top = spec.iter().copied().fold(2.0 * E * (2.0 * v).sqrt(), f64::max);
    let grid: Vec<f64> = if top == 0.0 {
        (1..=20).map(|i| i as f64 * 0.05).collect()
    } else {
        (1..=40).map(|i| top * i as f64 / 40.0).collect()
    };
    let (spectral, frobenius, projected) = if v == 0.0 {
        let zero = |vals: &[f64]| {
            grid.iter()
                .map(|&eps| TailPoint {
                    epsilon: eps,
                    empirical: vals.iter().filter(|&&x| x >= eps).count() as f64 / vals.len() as f64,
                    bound: 0.0,
                    exponential_region: true,
                    pass: vals.iter().all(|&x| x < eps),
                })
                .collect::<Vec<_>>()
        };
        (zero(&spec), zero(&frob), zero(&proj))
    } else {
        (
            tail_points(&spec, dim as f64, v, &grid),
            tail_points(&frob, 1.0, v, &grid),
            tail_points(&proj, 1.0, v, &grid),
        )
    };
    let n = samples as f64;
    let mean = spec.iter().sum::<f64>() / n;
    let var = spec.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let pass = spectral.iter().chain(&frobenius).chain(&projected).all(|t| t.pass);
    Ok(SumMatricesReport {
        dim,
        n_terms: bounds.len(),
        samples,
        variance: v,
        spectral,
        frobenius,
        projected,
        mean_spectral: mean,
        standard_error: (var / n).sqrt(),
        spectral_scale: (v * (dim as f64).ln()).sqrt(),
        mean_frobenius: frob.iter().sum::<f64>() / n,
        mean_projected: proj.iter().sum::<f64>() / n,
        pass,
    })
}

/// One deterministic `A`, a unitary `U` and two random operators on a shared
/// probability space (`o[i]` and `o2[i]` occur together with `probs[i]`).
#[derive(Clone, Debug)]
pub struct NormFactInstance {
    pub a: ComplexMatrix,
    pub u: ComplexMatrix,
    pub o: Vec<ComplexMatrix>,
    pub o2: Vec<ComplexMatrix>,
    pub probs: Vec<f64>,
}

impl NormFactInstance {
    /// Random instance with `atoms` atoms; `U = exp(−i(A + A†))`.
    pub fn random(rng: &mut impl Rng, dim: usize, atoms: usize) -> Result<Self> {
        let a = random_complex_matrix(rng, dim).scale_real(0.5);
        let h = a.add(&a.adjoint())?;
        let u = hermitian_exponential(&h, 1.0)?;
        let o = (0..atoms).map(|_| random_complex_matrix(rng, dim)).collect();
        let o2 = (0..atoms).map(|_| random_complex_matrix(rng, dim)).collect();
        let w: Vec<f64> = (0..atoms).map(|_| rng.random::<f64>() + 0.1).collect();
        let s: f64 = w.iter().sum();
        Ok(NormFactInstance {
            a,
            u,
            o,
            o2,
            probs: w.into_iter().map(|x| x / s).collect(),
        })
    }
}

/// Largest violation of one fact across instances and norms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactResult {
    pub fact: String,
    pub max_violation: f64,
    pub pass: bool,
}

fn expected_norm_of(ms: &[ComplexMatrix], probs: &[f64], p: f64, projectors: &[Option<&ComplexMatrix>]) -> Result<f64> {
    let mut best = 0.0f64;
    for pr in projectors {
        let v = ms
            .iter()
            .zip(probs)
            .map(|(m, w)| Ok((norm_with(m, p, *pr)?, *w)))
            .collect::<Result<Vec<_>>>()?;
        best = best.max(lq_of(&v, p));
    }
    Ok(best)
}

/// Minkowski, left/right ideal and unitary invariance for `|||·|||_p`, and
/// Minkowski, left ideal and unitary invariance for the projector variant
/// (supremum over `projectors`).
pub fn check_norm_facts(
    instances: &[NormFactInstance],
    p: f64,
    projectors: &[ComplexMatrix],
) -> Result<Vec<FactResult>> {
    const TOL: f64 = 1e-10;
    let mut viol = [0.0f64; 7];
    let full: [Option<&ComplexMatrix>; 1] = [None];
    let proj: Vec<Option<&ComplexMatrix>> = projectors.iter().map(Some).collect();
    for inst in instances {
        if inst.o.len() != inst.probs.len() || inst.o2.len() != inst.probs.len() {
            return invalid("instance atoms and probabilities differ in length");
        }
        let an = schatten_norm(&inst.a, f64::INFINITY)?;
        let mapped =
            |f: &dyn Fn(&ComplexMatrix) -> Result<ComplexMatrix>| inst.o.iter().map(f).collect::<Result<Vec<_>>>();
        let sum: Vec<ComplexMatrix> = inst
            .o
            .iter()
            .zip(&inst.o2)
            .map(|(x, y)| x.add(y))
            .collect::<Result<_>>()?;
        let ao = mapped(&|m| inst.a.matmul(m))?;
        let oa = mapped(&|m| m.matmul(&inst.a))?;
        let uo = mapped(&|m| inst.u.matmul(m))?;
        let n = |ms: &[ComplexMatrix], set: &[Option<&ComplexMatrix>]| expected_norm_of(ms, &inst.probs, p, set);
        let scale = |x: f64| TOL * x.max(1.0);
        for (k, set) in [(0usize, &full[..]), (4, &proj[..])] {
            if set.is_empty() {
                continue;
            }
            let o = n(&inst.o, set)?;
            let mink = n(&sum, set)? - o - n(&inst.o2, set)?;
            let ideal_l = n(&ao, set)? - an * o;
            let unit = (n(&uo, set)? - o).abs();
            viol[k] = viol[k].max(mink - scale(o));
            viol[k + 1] = viol[k + 1].max(ideal_l - scale(an * o));
            viol[k + 2] = viol[k + 2].max(unit - scale(o));
            if k == 0 {
                let ideal_r = n(&oa, set)? - an * o;
                viol[3] = viol[3].max(ideal_r - scale(an * o));
            }
        }
    }
    let names = [
        "minkowski",
        "left_ideal",
        "unitary_invariance",
        "right_ideal",
        "projected_minkowski",
        "projected_left_ideal",
        "projected_unitary_invariance",
    ];
    Ok(names
        .iter()
        .zip(viol)
        .filter(|(name, _)| !projectors.is_empty() || !name.starts_with("projected"))
        .map(|(name, v)| FactResult {
            fact: name.to_string(),
            max_violation: v.max(0.0),
            pass: v <= 0.0,
        })
        .collect())
}
