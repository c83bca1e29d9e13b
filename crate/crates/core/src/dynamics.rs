//! Heisenberg-picture evolution of local operators under sampled
//! Hamiltonians, and the commutator observables the bounds control.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{
    build_terms, check_dim_cap, term_layouts, EnsembleSample, EnsembleSpec, Geometry, InteractionTerm, DEFAULT_DIM_CAP,
};
use crate::error::{invalid, Error, Result};
use crate::linalg::{
    commutator, conjugate_local_in_place, conjugate_trusted, embed_local, hermitian_eigen, hermitian_exponential,
    spectral_norm, ComplexMatrix, LocalLayout, Pauli, C64,
};

/// How an operator is evolved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvolutionPlan {
    Static { t: f64 },
    Brownian { xi: f64, steps: u64 },
    Brickwall { xi: f64, rounds: u64 },
}

impl EvolutionPlan {
    /// Brownian time `τ = ξ²T`, when defined.
    pub fn tau(&self) -> Option<f64> {
        match *self {
            EvolutionPlan::Static { .. } => None,
            EvolutionPlan::Brownian { xi, steps } => Some(xi * xi * steps as f64),
            EvolutionPlan::Brickwall { xi, rounds } => Some(xi * xi * rounds as f64),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EvolutionPlan::Static { t } if !(t >= 0.0) || !t.is_finite() => {
                invalid(format!("static time must be finite and >= 0, got {t}"))
            }
            EvolutionPlan::Brownian { xi, .. } | EvolutionPlan::Brickwall { xi, .. } if !(xi > 0.0) => {
                invalid(format!("step xi must be > 0, got {xi}"))
            }
            _ => Ok(()),
        }
    }
}

/// `e^{iHt} O e^{−iHt}`.
pub fn evolve_static(h: &ComplexMatrix, t: f64, o: &ComplexMatrix) -> Result<ComplexMatrix> {
    if h.dim() != o.dim() {
        return invalid(format!("dimension mismatch: H is {}, O is {}", h.dim(), o.dim()));
    }
    let u = hermitian_exponential(h, -t)?;
    Ok(conjugate_trusted(&u, o))
}

/// Layers of a brick-wall round as term indices: even edges first, then odd.
///
/// On a grid an edge along axis `μ` starting at coordinate `x` is even when
/// `x_μ` is even; within each parity the axes are taken in order, so every
/// layer consists of disjoint edges.
pub fn brickwall_layers(spec: &EnsembleSpec, terms: &[InteractionTerm]) -> Result<Vec<Vec<usize>>> {
    match &spec.geometry {
        Geometry::Chain { .. } => {
            let even = terms.iter().filter(|t| t.support[0] % 2 == 0).map(|t| t.id).collect();
            let odd = terms.iter().filter(|t| t.support[0] % 2 == 1).map(|t| t.id).collect();
            Ok(vec![even, odd])
        }
        Geometry::Grid { dims } => {
            let mut layers = vec![Vec::new(); 2 * dims.len()];
            for t in terms {
                let a = Geometry::grid_coords(dims, t.support[0]);
                let b = Geometry::grid_coords(dims, t.support[1]);
                let axis = (0..dims.len()).find(|&i| a[i] != b[i]).expect("edge spans one axis");
                let parity = a[axis].min(b[axis]) % 2;
                layers[parity * dims.len() + axis].push(t.id);
            }
            Ok(layers.into_iter().filter(|l| !l.is_empty()).collect())
        }
        g => Err(Error::Unsupported(format!(
            "brick-wall plan needs a chain or grid geometry, got {g:?}"
        ))),
    }
}

struct Prepared {
    terms: Vec<InteractionTerm>,
    layouts: Vec<LocalLayout>,
}

fn prepare(spec: &EnsembleSpec) -> Result<Prepared> {
    check_dim_cap(spec, DEFAULT_DIM_CAP)?;
    let terms = build_terms(spec)?;
    let layouts = term_layouts(spec, &terms)?;
    Ok(Prepared { terms, layouts })
}

/// Evolves `o` under the sample keyed by `seed`, keeping only terms accepted
/// by `keep`. Static plans use step index 0; stepped plans use `1..=T`.
pub fn evolve_filtered(
    seed: u64,
    spec: &EnsembleSpec,
    plan: &EvolutionPlan,
    o: &ComplexMatrix,
    keep: &dyn Fn(&InteractionTerm) -> bool,
) -> Result<ComplexMatrix> {
    plan.validate()?;
    let prep = prepare(spec)?;
    if o.dim() != spec.hilbert_dim()? {
        return invalid(format!("operator dimension {} does not match the ensemble", o.dim()));
    }
    match *plan {
        EvolutionPlan::Static { t } => {
            let sample = EnsembleSample::draw(seed, spec, &prep.terms, 0);
            let h = sample.hamiltonian_filtered(spec, &prep.layouts, keep)?;
            evolve_static(&h, t, o)
        }
        EvolutionPlan::Brownian { xi, steps } => {
            let mut cur = o.clone();
            for step in 1..=steps {
                let sample = EnsembleSample::draw(seed, spec, &prep.terms, step);
                let h = sample.hamiltonian_filtered(spec, &prep.layouts, keep)?;
                let eig = hermitian_eigen(&h)?;
                let u = crate::linalg::exp_from_eigen(&eig, -xi);
                cur = conjugate_trusted(&u, &cur);
            }
            Ok(cur)
        }
        EvolutionPlan::Brickwall { xi, rounds } => {
            let layers = brickwall_layers(spec, &prep.terms)?;
            let mut cur = o.clone();
            for round in 1..=rounds {
                for layer in &layers {
                    for &id in layer {
                        let term = &prep.terms[id];
                        if term.coefficient == 0.0 || !keep(term) {
                            continue;
                        }
                        let raw = crate::ensemble::sample_term_for(seed, round, term, spec);
                        let gate = hermitian_exponential(&raw.scale_real(term.coefficient), -xi)?;
                        conjugate_local_in_place(&mut cur, &gate, &prep.layouts[id]);
                    }
                }
            }
            Ok(cur)
        }
    }
}

/// Applies, for steps `1..=T`, conjugation by `exp(−iH^{(T′)}ξ)` with a fresh
/// sample each step (or each brick-wall round).
pub fn evolve_brownian(
    seed: u64,
    spec: &EnsembleSpec,
    plan: &EvolutionPlan,
    o: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    if let EvolutionPlan::Static { .. } = plan {
        return invalid("evolve_brownian needs a brownian or brickwall plan");
    }
    evolve_filtered(seed, spec, plan, o, &|_| true)
}

/// Evolution under any plan with all terms.
pub fn evolve(seed: u64, spec: &EnsembleSpec, plan: &EvolutionPlan, o: &ComplexMatrix) -> Result<ComplexMatrix> {
    evolve_filtered(seed, spec, plan, o, &|_| true)
}

/// Background state for the state-weighted OTOC.
#[derive(Clone, Debug, PartialEq)]
pub enum ProbeState {
    MaximallyMixed,
    PureBasis(usize),
    Custom(ComplexMatrix),
}

/// Operators and state entering the commutator observables.
#[derive(Clone, Debug)]
pub struct CommutatorProbe {
    pub o0: ComplexMatrix,
    pub a_r: ComplexMatrix,
    pub o0_support: Vec<usize>,
    pub ar_support: Vec<usize>,
    pub distance: usize,
    pub state: ProbeState,
    /// `P` projects onto the first `projector_rank` computational basis states.
    pub projector_rank: usize,
}

impl CommutatorProbe {
    /// General probe from local Hermitian operators of unit norm.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        o0_local: &ComplexMatrix,
        o0_support: &[usize],
        ar_local: &ComplexMatrix,
        ar_support: &[usize],
        n_sites: usize,
        local_dim: usize,
        state: ProbeState,
        projector_rank: usize,
    ) -> Result<Self> {
        for (name, op) in [("O_0", o0_local), ("A_r", ar_local)] {
            if !op.is_hermitian() {
                return invalid(format!("{name} must be Hermitian"));
            }
            let norm = spectral_norm(op)?;
            if (norm - 1.0).abs() > 1e-10 {
                return invalid(format!("{name} must have unit norm, got {norm}"));
            }
        }
        let o0 = embed_local(o0_local, o0_support, n_sites, local_dim)?;
        let a_r = embed_local(ar_local, ar_support, n_sites, local_dim)?;
        let dim = o0.dim();
        if projector_rank == 0 || projector_rank > dim {
            return invalid(format!("projector rank must be in [1, {dim}], got {projector_rank}"));
        }
        validate_state(&state, dim)?;
        let distance = o0_support
            .iter()
            .flat_map(|a| ar_support.iter().map(move |b| a.abs_diff(*b)))
            .min()
            .unwrap_or(0);
        Ok(Self {
            o0,
            a_r,
            o0_support: o0_support.to_vec(),
            ar_support: ar_support.to_vec(),
            distance,
            state,
            projector_rank,
        })
    }

    /// Pauli-X on `source` and on `target`, maximally mixed state.
    pub fn pauli_x(n_sites: usize, source: usize, target: usize, projector_rank: usize) -> Result<Self> {
        let x = Pauli::X.matrix();
        Self::new(
            &x,
            &[source],
            &x,
            &[target],
            n_sites,
            2,
            ProbeState::MaximallyMixed,
            projector_rank,
        )
    }
}

fn validate_state(state: &ProbeState, dim: usize) -> Result<()> {
    match state {
        ProbeState::MaximallyMixed => Ok(()),
        ProbeState::PureBasis(i) if *i < dim => Ok(()),
        ProbeState::PureBasis(i) => invalid(format!("basis state {i} outside dimension {dim}")),
        ProbeState::Custom(rho) => {
            if rho.dim() != dim {
                return invalid(format!("state dimension {} does not match {dim}", rho.dim()));
            }
            let tr = rho.trace();
            if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
                return invalid(format!("state trace must be 1, got {tr}"));
            }
            if !rho.is_hermitian() {
                return invalid("state must be Hermitian");
            }
            let eig = hermitian_eigen(rho)?;
            if eig.values.iter().any(|&v| v < -1e-10) {
                return invalid("state must be positive semidefinite");
            }
            Ok(())
        }
    }
}

/// Commutator observables for one evolved operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorResult {
    /// `½‖[O_t, A_r]‖`.
    pub half_spectral: f64,
    /// `Tr(C†C)/Tr I`.
    pub frobenius_otoc: f64,
    /// `Tr(ρC†C)`, not square-rooted.
    pub state_otoc: f64,
    /// `½‖C P‖`.
    pub projected_half_norm: f64,
    pub seed: Option<u64>,
    pub tau: Option<f64>,
}

/// Computes `C = [O_t, A_r]` and the four observables.
pub fn measure(o_t: &ComplexMatrix, probe: &CommutatorProbe) -> Result<CommutatorResult> {
    validate_state(&probe.state, probe.a_r.dim())?;
    let c = commutator(o_t, &probe.a_r)?;
    let dim = c.dim();
    let cm = c.as_dmatrix();
    let fro_sq: f64 = cm.iter().map(|z| z.norm_sqr()).sum();
    let col_norm_sq = |j: usize| cm.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>();
    let state_otoc = match &probe.state {
        ProbeState::MaximallyMixed => fro_sq / dim as f64,
        ProbeState::PureBasis(i) => col_norm_sq(*i),
        ProbeState::Custom(rho) => {
            let gram = cm.ad_mul(cm);
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..dim {
                for j in 0..dim {
                    acc += rho.get(i, j) * gram[(j, i)];
                }
            }
            acc.re
        }
    };
    let projected = {
        let k = probe.projector_rank;
        if k == 1 {
            col_norm_sq(0).sqrt()
        } else {
            let sub = cm.columns(0, k).into_owned();
            let gram = ComplexMatrix::wrap(sub.ad_mul(&sub));
            let eig = hermitian_eigen(&gram)?;
            eig.values.iter().copied().fold(0.0, f64::max).max(0.0).sqrt()
        }
    };
    Ok(CommutatorResult {
        half_spectral: 0.5 * spectral_norm(&c)?,
        frobenius_otoc: fro_sq / dim as f64,
        state_otoc,
        projected_half_norm: 0.5 * projected,
        seed: None,
        tau: None,
    })
}

/// Which observable a quantile or exceedance refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    HalfSpectral,
    FrobeniusOtoc,
    StateOtoc,
    ProjectedHalfNorm,
}

impl Observable {
    pub const ALL: [Observable; 4] = [
        Observable::HalfSpectral,
        Observable::FrobeniusOtoc,
        Observable::StateOtoc,
        Observable::ProjectedHalfNorm,
    ];

    pub fn of(self, r: &CommutatorResult) -> f64 {
        match self {
            Observable::HalfSpectral => r.half_spectral,
            Observable::FrobeniusOtoc => r.frobenius_otoc,
            Observable::StateOtoc => r.state_otoc,
            Observable::ProjectedHalfNorm => r.projected_half_norm,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Observable::HalfSpectral => "half_spectral",
            Observable::FrobeniusOtoc => "frobenius_otoc",
            Observable::StateOtoc => "state_otoc",
            Observable::ProjectedHalfNorm => "projected_half_norm",
        }
    }
}

/// Empirical quantile by the inverse empirical CDF.
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuantileRow {
    pub observable: Observable,
    pub level: f64,
    pub value: f64,
}

/// All per-sample results, ordered by sample index, with quantiles.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonteCarloRecord {
    pub seed: u64,
    pub tau: Option<f64>,
    pub results: Vec<CommutatorResult>,
    pub quantiles: Vec<QuantileRow>,
}

impl MonteCarloRecord {
    pub fn values(&self, obs: Observable) -> Vec<f64> {
        self.results.iter().map(|r| obs.of(r)).collect()
    }

    /// Number of samples with observable ≥ `threshold`.
    pub fn exceedances(&self, obs: Observable, threshold: f64) -> usize {
        self.results.iter().filter(|r| obs.of(r) >= threshold).count()
    }
}

/// Seed of sample `index`: `seed ⊕ index`.
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    seed ^ index
}

/// Runs `samples` independent evolutions and measurements of `probe.o0`.
pub fn monte_carlo(
    spec: &EnsembleSpec,
    plan: &EvolutionPlan,
    probe: &CommutatorProbe,
    samples: usize,
    seed: u64,
    quantile_levels: &[f64],
) -> Result<MonteCarloRecord> {
    if samples == 0 {
        return invalid("Monte Carlo needs at least one sample");
    }
    let tau = plan.tau();
    let results: Vec<CommutatorResult> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let s = sample_seed(seed, i);
            let o_t = evolve(s, spec, plan, &probe.o0)?;
            let mut r = measure(&o_t, probe)?;
            r.seed = Some(s);
            r.tau = tau;
            Ok(r)
        })
        .collect::<Result<_>>()?;
    let mut quantiles = Vec::new();
    for obs in Observable::ALL {
        let mut v: Vec<f64> = results.iter().map(|r| obs.of(r)).collect();
        v.sort_by(f64::total_cmp);
        for &level in quantile_levels {
            quantiles.push(QuantileRow {
                observable: obs,
                level,
                value: empirical_quantile(&v, level),
            });
        }
    }
    Ok(MonteCarloRecord {
        seed,
        tau,
        results,
        quantiles,
    })
}

/// Reach components `O_ℓ` for `ℓ = 0..=max_ell`.
///
/// `H_{<ℓ}` keeps the terms whose sites all lie in `0..=ℓ`, so `O_ℓ` acts
/// trivially beyond site `ℓ`. Component 0 is the evolution with no terms
/// reaching past site 0; for `ℓ ≥ 1` the component is the difference of the
/// evolutions with cutoffs `ℓ` and `ℓ−1`. The same realization is used for
/// every cutoff, so the components add up to the full evolution.
pub fn reach_components(
    seed: u64,
    spec: &EnsembleSpec,
    plan: &EvolutionPlan,
    o: &ComplexMatrix,
    max_ell: usize,
) -> Result<Vec<ComplexMatrix>> {
    if !matches!(spec.geometry, Geometry::Chain { .. }) {
        return Err(Error::Unsupported(format!(
            "reach profile needs a chain geometry, got {:?}",
            spec.geometry
        )));
    }
    let cut = |ell: usize| move |t: &InteractionTerm| t.support.iter().all(|&s| s <= ell);
    let mut prev = evolve_filtered(seed, spec, plan, o, &cut(0))?;
    let mut out = vec![prev.clone()];
    for ell in 1..=max_ell {
        let cur = evolve_filtered(seed, spec, plan, o, &cut(ell))?;
        out.push(cur.sub(&prev)?);
        prev = cur;
    }
    Ok(out)
}

/// `(ℓ, ‖O_ℓ‖)` for each requested cutoff.
pub fn reach_profile(
    seed: u64,
    spec: &EnsembleSpec,
    plan: &EvolutionPlan,
    o: &ComplexMatrix,
    cutoffs: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let max_ell = cutoffs.iter().copied().max().unwrap_or(0);
    let comps = reach_components(seed, spec, plan, o, max_ell)?;
    cutoffs
        .iter()
        .map(|&ell| Ok((ell, spectral_norm(&comps[ell])?)))
        .collect()
}
