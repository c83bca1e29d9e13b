//! Interaction geometries and samplers for zero-mean, norm-bounded random
//! Hermitian terms.
//!
//! Every sampled matrix comes from a ChaCha stream keyed on
//! `(seed, step, term id)`, so a realization never depends on the order in
//! which terms or time steps are drawn.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{embed_with_layout, full_dim, pauli_string, spectral_norm, ComplexMatrix, LocalLayout, Pauli, C64};

/// Default cap on the full Hilbert-space dimension.
pub const DEFAULT_DIM_CAP: usize = 1 << 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    Chain { n: usize },
    Grid { dims: Vec<usize> },
    CompleteKLocal { n: usize, k: usize },
    PowerlawChain { n: usize, alpha: f64 },
}

impl Geometry {
    pub fn n_sites(&self) -> usize {
        match self {
            Geometry::Chain { n } | Geometry::CompleteKLocal { n, .. } | Geometry::PowerlawChain { n, .. } => *n,
            Geometry::Grid { dims } => dims.iter().product(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        match self {
            Geometry::Chain { n } if *n < 2 => bad(format!("chain needs N >= 2, got {n}")),
            Geometry::Grid { dims } if dims.is_empty() || dims.contains(&0) => {
                bad(format!("grid dimensions must be non-empty and positive, got {dims:?}"))
            }
            Geometry::Grid { dims } if dims.iter().product::<usize>() < 2 => bad("grid needs at least 2 sites".into()),
            Geometry::CompleteKLocal { n, k } if *n < 2 || *k < 2 || k > n => {
                bad(format!("complete k-local needs 2 <= k <= N, got N={n}, k={k}"))
            }
            Geometry::PowerlawChain { n, .. } if *n < 2 => bad(format!("power-law chain needs N >= 2, got {n}")),
            Geometry::PowerlawChain { alpha, .. } if !(*alpha > 1.0) => {
                bad(format!("power-law chain needs alpha > 1, got {alpha}"))
            }
            _ => Ok(()),
        }
    }

    /// Grid coordinates of a site, first axis most significant.
    pub fn grid_coords(dims: &[usize], site: usize) -> Vec<usize> {
        let mut rem = site;
        let mut out = vec![0; dims.len()];
        for (axis, &len) in dims.iter().enumerate().rev() {
            out[axis] = rem % len;
            rem /= len;
        }
        out
    }

    fn grid_site(dims: &[usize], coords: &[usize]) -> usize {
        coords.iter().zip(dims).fold(0, |acc, (&c, &len)| acc * len + c)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    #[default]
    RademacherPauli,
    SignedNormalizedGaussian,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeModel {
    #[default]
    Static,
    Brownian {
        xi: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub geometry: Geometry,
    #[serde(default = "default_local_dim")]
    pub local_dim: usize,
    /// `a` for nearest-neighbour and power-law geometries, `J` for k-local.
    pub coupling: f64,
    #[serde(default)]
    pub sampler: Sampler,
    #[serde(default)]
    pub time_model: TimeModel,
}

fn default_local_dim() -> usize {
    2
}

impl EnsembleSpec {
    pub fn new(geometry: Geometry, coupling: f64) -> Self {
        Self {
            geometry,
            local_dim: 2,
            coupling,
            sampler: Sampler::RademacherPauli,
            time_model: TimeModel::Static,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.local_dim < 2 {
            return Err(Error::InvalidSpec(format!(
                "local_dim must be >= 2, got {}",
                self.local_dim
            )));
        }
        if self.sampler == Sampler::RademacherPauli && self.local_dim != 2 {
            return Err(Error::InvalidSpec(
                "rademacher_pauli needs local_dim = 2 (Hermitian Pauli strings)".into(),
            ));
        }
        if !(self.coupling >= 0.0) || !self.coupling.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "coupling must be finite and >= 0, got {}",
                self.coupling
            )));
        }
        if let TimeModel::Brownian { xi } = self.time_model {
            if !(xi > 0.0) {
                return Err(Error::InvalidSpec(format!("Brownian step xi must be > 0, got {xi}")));
            }
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.geometry.n_sites()
    }

    pub fn hilbert_dim(&self) -> Result<usize> {
        full_dim(self.n_sites(), self.local_dim)
    }
}

/// One random Hamiltonian term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionTerm {
    pub id: usize,
    pub support: Vec<usize>,
    /// Norm ceiling `b_X` of the sampled term including its coefficient.
    pub bound: f64,
    pub coefficient: f64,
}

impl InteractionTerm {
    fn new(id: usize, support: Vec<usize>, coefficient: f64) -> Self {
        Self {
            id,
            support,
            bound: coefficient,
            coefficient,
        }
    }
}

/// Coefficient `√(J²(k−1)!/(k N^{k−1}))` of a complete k-local term.
pub fn k_local_coefficient(j: f64, n: usize, k: usize) -> f64 {
    let fact: f64 = (1..k).map(|i| i as f64).product();
    (j * j * fact / (k as f64 * (n as f64).powi(k as i32 - 1))).sqrt()
}

/// Coefficient `a·|i−j|^{−α}` of a power-law pair.
pub fn powerlaw_coefficient(a: f64, i: usize, j: usize, alpha: f64) -> f64 {
    a * (i.abs_diff(j) as f64).powf(-alpha)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        while i > 0 && cur[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Deterministic term list for the spec's geometry.
pub fn build_terms(spec: &EnsembleSpec) -> Result<Vec<InteractionTerm>> {
    spec.validate()?;
    let a = spec.coupling;
    let supports_coeffs: Vec<(Vec<usize>, f64)> = match &spec.geometry {
        Geometry::Chain { n } => (0..n - 1).map(|i| (vec![i, i + 1], a)).collect(),
        Geometry::Grid { dims } => {
            let total: usize = dims.iter().product();
            let mut edges = Vec::new();
            for site in 0..total {
                let coords = Geometry::grid_coords(dims, site);
                for axis in 0..dims.len() {
                    if coords[axis] + 1 < dims[axis] {
                        let mut next = coords.clone();
                        next[axis] += 1;
                        edges.push((vec![site, Geometry::grid_site(dims, &next)], a));
                    }
                }
            }
            edges
        }
        Geometry::CompleteKLocal { n, k } => {
            let c = k_local_coefficient(a, *n, *k);
            k_subsets(*n, *k).into_iter().map(|s| (s, c)).collect()
        }
        Geometry::PowerlawChain { n, alpha } => k_subsets(*n, 2)
            .into_iter()
            .map(|s| {
                let c = powerlaw_coefficient(a, s[0], s[1], *alpha);
                (s, c)
            })
            .collect(),
    };
    Ok(supports_coeffs
        .into_iter()
        .enumerate()
        .map(|(id, (s, c))| InteractionTerm::new(id, s, c))
        .collect())
}

/// Counter-based stream for `(seed, step, term id)`.
pub fn term_stream(seed: u64, step: u64, term_id: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&step.to_le_bytes());
    key[16..24].copy_from_slice(&term_id.to_le_bytes());
    key[24..32].copy_from_slice(b"liebrob1");
    ChaCha8Rng::from_seed(key)
}

/// Draws one raw term (norm ≤ 1) on `support_len` sites.
pub fn sample_term(rng: &mut ChaCha8Rng, support_len: usize, local_dim: usize, sampler: Sampler) -> ComplexMatrix {
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    match sampler {
        Sampler::RademacherPauli => {
            let count = 4usize.pow(support_len as u32);
            let mut idx = rng.random_range(1..count);
            let mut ops = vec![Pauli::I; support_len];
            for slot in ops.iter_mut().rev() {
                *slot = Pauli::ALL[idx % 4];
                idx /= 4;
            }
            pauli_string(&ops).scale_real(sign)
        }
        Sampler::SignedNormalizedGaussian => {
            let dim = local_dim.pow(support_len as u32);
            loop {
                let a = DMatrix::<C64>::from_fn(dim, dim, |_, _| {
                    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                });
                let h = ComplexMatrix::wrap((&a + a.adjoint()) * C64::new(0.5, 0.0));
                let norm = spectral_norm(&h).expect("finite Gaussian draw");
                if norm > 0.0 {
                    return h.scale_real(sign / norm);
                }
            }
        }
    }
}

/// Draw of a single term from its own stream.
pub fn sample_term_for(seed: u64, step: u64, term: &InteractionTerm, spec: &EnsembleSpec) -> ComplexMatrix {
    let mut rng = term_stream(seed, step, term.id as u64);
    sample_term(&mut rng, term.support.len(), spec.local_dim, spec.sampler)
}

/// One realization of all terms at a given time step.
#[derive(Clone, Debug)]
pub struct EnsembleSample {
    pub seed: u64,
    pub step_index: u64,
    pub terms: Vec<InteractionTerm>,
    /// Raw sampled matrices, one per term, each with norm ≤ 1.
    pub raw: Vec<ComplexMatrix>,
}

impl EnsembleSample {
    pub fn draw(seed: u64, spec: &EnsembleSpec, terms: &[InteractionTerm], step_index: u64) -> Self {
        let raw = terms
            .iter()
            .map(|t| sample_term_for(seed, step_index, t, spec))
            .collect();
        Self {
            seed,
            step_index,
            terms: terms.to_vec(),
            raw,
        }
    }

    /// Embedded Hamiltonian built from the terms selected by `keep`.
    pub fn hamiltonian_filtered(
        &self,
        spec: &EnsembleSpec,
        layouts: &[LocalLayout],
        keep: impl Fn(&InteractionTerm) -> bool,
    ) -> Result<ComplexMatrix> {
        let dim = spec.hilbert_dim()?;
        let mut h = ComplexMatrix::zeros(dim);
        for ((term, raw), layout) in self.terms.iter().zip(&self.raw).zip(layouts) {
            if term.coefficient == 0.0 || !keep(term) {
                continue;
            }
            let e = embed_with_layout(&raw.scale_real(term.coefficient), layout)?;
            *h.as_dmatrix_mut() += e.as_dmatrix();
        }
        Ok(h)
    }
}

/// Checks the Hilbert dimension against `cap`.
pub fn check_dim_cap(spec: &EnsembleSpec, cap: usize) -> Result<usize> {
    let required = (spec.local_dim as u128).saturating_pow(spec.n_sites() as u32);
    if required > cap as u128 {
        return Err(Error::Resource {
            what: "Hilbert-space dimension".into(),
            required,
            allowed: cap as u128,
        });
    }
    Ok(required as usize)
}

pub fn term_layouts(spec: &EnsembleSpec, terms: &[InteractionTerm]) -> Result<Vec<LocalLayout>> {
    terms
        .iter()
        .map(|t| LocalLayout::new(&t.support, spec.n_sites(), spec.local_dim))
        .collect()
}

/// Samples every term at `step_index` and returns the embedded Hamiltonian.
pub fn sample_hamiltonian(seed: u64, spec: &EnsembleSpec, step_index: u64) -> Result<(EnsembleSample, ComplexMatrix)> {
    sample_hamiltonian_capped(seed, spec, step_index, DEFAULT_DIM_CAP)
}

pub fn sample_hamiltonian_capped(
    seed: u64,
    spec: &EnsembleSpec,
    step_index: u64,
    cap: usize,
) -> Result<(EnsembleSample, ComplexMatrix)> {
    check_dim_cap(spec, cap)?;
    let terms = build_terms(spec)?;
    let layouts = term_layouts(spec, &terms)?;
    let sample = EnsembleSample::draw(seed, spec, &terms, step_index);
    let h = sample.hamiltonian_filtered(spec, &layouts, |_| true)?;
    Ok((sample, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::embed_local;

    #[test]
    fn chain_terms() {
        let terms = build_terms(&EnsembleSpec::new(Geometry::Chain { n: 5 }, 1.0)).unwrap();
        assert_eq!(terms.len(), 4);
        assert!(terms.iter().all(|t| t.bound == 1.0 && t.support.len() == 2));
    }

    #[test]
    fn k_local_terms() {
        let terms = build_terms(&EnsembleSpec::new(Geometry::CompleteKLocal { n: 4, k: 2 }, 1.0)).unwrap();
        assert_eq!(terms.len(), 6);
        for t in &terms {
            assert_eq!(t.coefficient, (1.0f64 / 8.0).sqrt());
        }
    }

    #[test]
    fn powerlaw_terms() {
        let spec = EnsembleSpec::new(Geometry::PowerlawChain { n: 4, alpha: 2.0 }, 1.0);
        let terms = build_terms(&spec).unwrap();
        assert_eq!(terms.len(), 6);
        let t03 = terms.iter().find(|t| t.support == vec![0, 3]).unwrap();
        assert_eq!(t03.coefficient, 1.0 / 9.0);
    }

    #[test]
    fn grid_edges() {
        let terms = build_terms(&EnsembleSpec::new(Geometry::Grid { dims: vec![3, 3] }, 1.0)).unwrap();
        assert_eq!(terms.len(), 12);
    }

    #[test]
    fn invalid_specs() {
        for g in [
            Geometry::Chain { n: 1 },
            Geometry::CompleteKLocal { n: 3, k: 4 },
            Geometry::PowerlawChain { n: 4, alpha: 1.0 },
        ] {
            assert!(matches!(
                build_terms(&EnsembleSpec::new(g, 1.0)),
                Err(Error::InvalidSpec(_))
            ));
        }
    }

    #[test]
    fn pauli_sampler_hits_non_identity_strings() {
        let mut rng = term_stream(1, 0, 0);
        let strings: Vec<ComplexMatrix> = (0..16)
            .map(|i| {
                let ops = [Pauli::ALL[i / 4], Pauli::ALL[i % 4]];
                pauli_string(&ops)
            })
            .collect();
        for _ in 0..200 {
            let m = sample_term(&mut rng, 2, 2, Sampler::RademacherPauli);
            let hit = strings[1..]
                .iter()
                .any(|s| m.sub(s).unwrap().max_abs_entry() == 0.0 || m.add(s).unwrap().max_abs_entry() == 0.0);
            assert!(hit);
        }
    }

    #[test]
    fn samplers_bounded_and_zero_mean() {
        for sampler in [Sampler::RademacherPauli, Sampler::SignedNormalizedGaussian] {
            let n = 10_000;
            let mut mean = ComplexMatrix::zeros(2);
            for i in 0..n {
                let mut rng = term_stream(99, i, 0);
                let m = sample_term(&mut rng, 1, 2, sampler);
                assert!(spectral_norm(&m).unwrap() <= 1.0 + 1e-12);
                mean = mean.add(&m).unwrap();
            }
            let mean = mean.scale_real(1.0 / n as f64);
            assert!(mean.max_abs_entry() <= 4.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn hamiltonian_single_term_and_determinism() {
        let spec = EnsembleSpec::new(Geometry::Chain { n: 2 }, 0.7);
        let (s, h) = sample_hamiltonian(5, &spec, 0).unwrap();
        let expected = embed_local(&s.raw[0].scale_real(0.7), &[0, 1], 2, 2).unwrap();
        assert_eq!(h, expected);
        let (_, h2) = sample_hamiltonian(5, &spec, 0).unwrap();
        assert_eq!(h, h2);
    }

    #[test]
    fn dimension_cap() {
        let spec = EnsembleSpec::new(Geometry::Chain { n: 6 }, 1.0);
        assert!(matches!(
            sample_hamiltonian_capped(0, &spec, 0, 32),
            Err(Error::Resource {
                required: 64,
                allowed: 32,
                ..
            })
        ));
    }
}
