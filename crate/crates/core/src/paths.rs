//! Self-avoiding interaction paths between a source and a target support.
//!
//! A path `Γ = (X_1, …, X_ℓ)` is a sequence of terms where consecutive terms
//! overlap, non-consecutive terms are disjoint, `X_1` is the only term
//! touching the source and `X_ℓ` is the only term touching the target.
//! Enumeration runs backward from the target: the next step after a partial
//! path `γ` is drawn from `Δ(γ)`, the terms that meet the last element of `γ`
//! and avoid everything before it (the target included).

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::InteractionTerm;
use crate::error::{invalid, Error, Result};

/// Site set as a bit mask; graphs are limited to 128 sites.
pub type SiteMask = u128;

pub const MAX_SITES: usize = 128;

pub fn mask_of(sites: &[usize]) -> Result<SiteMask> {
    let mut m = 0;
    for &s in sites {
        if s >= MAX_SITES {
            return Err(Error::Unsupported(format!(
                "site {s} exceeds the {MAX_SITES}-site path limit"
            )));
        }
        m |= 1u128 << s;
    }
    Ok(m)
}

pub fn sites_of(mask: SiteMask) -> Vec<usize> {
    (0..MAX_SITES).filter(|&s| mask >> s & 1 == 1).collect()
}

/// Terms plus their overlap relation.
#[derive(Clone, Debug)]
pub struct InteractionGraph {
    pub terms: Vec<InteractionTerm>,
    masks: Vec<SiteMask>,
    /// `overlaps[i]` lists terms `j ≠ i` sharing a site with term `i`.
    pub overlaps: Vec<Vec<usize>>,
}

impl InteractionGraph {
    pub fn new(terms: Vec<InteractionTerm>) -> Result<Self> {
        for (i, t) in terms.iter().enumerate() {
            if t.id != i {
                return invalid(format!("term ids must be 0..n in order; position {i} has id {}", t.id));
            }
        }
        let masks: Vec<SiteMask> = terms.iter().map(|t| mask_of(&t.support)).collect::<Result<_>>()?;
        let overlaps = (0..terms.len())
            .map(|i| {
                (0..terms.len())
                    .filter(|&j| j != i && masks[i] & masks[j] != 0)
                    .collect()
            })
            .collect();
        Ok(Self { terms, masks, overlaps })
    }

    pub fn mask(&self, id: usize) -> SiteMask {
        self.masks[id]
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn weight(&self, id: usize) -> f64 {
        let b = self.terms[id].bound;
        b * b
    }
}

/// A complete path, stored from `X_1` (source side) to `X_ℓ` (target side).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfAvoidingPath {
    pub term_ids: Vec<usize>,
    /// `Π b_{X_k}²`.
    pub weight: f64,
}

impl SelfAvoidingPath {
    pub fn len(&self) -> usize {
        self.term_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.term_ids.is_empty()
    }

    /// One line of comma-separated term ids.
    pub fn dump_line(&self) -> String {
        self.term_ids
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Checks every path invariant directly from the definitions.
pub fn is_self_avoiding_path(graph: &InteractionGraph, ids: &[usize], source: SiteMask, target: SiteMask) -> bool {
    let l = ids.len();
    if l == 0 {
        return false;
    }
    let m = |k: usize| graph.mask(ids[k]);
    for i in 0..l {
        for j in i + 1..l {
            let meet = m(i) & m(j) != 0;
            if (j == i + 1) != meet {
                return false;
            }
        }
        if (m(i) & source != 0) != (i == 0) {
            return false;
        }
        if (m(i) & target != 0) != (i == l - 1) {
            return false;
        }
    }
    true
}

/// Counts, weights and optionally materialized paths.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PathEnumeration {
    pub counts_by_length: BTreeMap<usize, u64>,
    pub total_weight_by_length: BTreeMap<usize, f64>,
    pub paths: Option<Vec<SelfAvoidingPath>>,
    pub l_max: usize,
    /// Set when some partial path could have been extended past `l_max`.
    pub truncated: bool,
    /// Largest `Σ_{X∈Δ(γ)} b_X²` over all visited partial paths, anchor included.
    pub max_step_weight: f64,
}

impl PathEnumeration {
    pub fn total_count(&self) -> u64 {
        self.counts_by_length.values().sum()
    }

    fn merge(&mut self, other: PathEnumeration) {
        for (l, c) in other.counts_by_length {
            *self.counts_by_length.entry(l).or_default() += c;
        }
        for (l, w) in other.total_weight_by_length {
            *self.total_weight_by_length.entry(l).or_default() += w;
        }
        if let Some(p) = other.paths {
            self.paths.get_or_insert_with(Vec::new).extend(p);
        }
        self.truncated |= other.truncated;
        self.max_step_weight = self.max_step_weight.max(other.max_step_weight);
    }

    /// One line per path, comma-separated term ids from `X_1` to `X_ℓ`.
    pub fn dump(&self) -> String {
        self.paths
            .as_deref()
            .unwrap_or(&[])
            .iter()
            .map(|p| p.dump_line() + "\n")
            .collect()
    }
}

/// `Δ(γ)` for a partial path listed from the target backward.
///
/// For the empty anchor the result is every term meeting the target. Otherwise
/// it holds the terms, other than the last element, that meet the last element
/// and avoid the target and every earlier element.
pub fn next_steps(graph: &InteractionGraph, gamma_backward: &[usize], target: SiteMask) -> Vec<usize> {
    match gamma_backward.split_last() {
        None => (0..graph.len()).filter(|&i| graph.mask(i) & target != 0).collect(),
        Some((&last, earlier)) => {
            let avoid = earlier.iter().fold(target, |acc, &i| acc | graph.mask(i));
            graph.overlaps[last]
                .iter()
                .copied()
                .filter(|&j| graph.mask(j) & avoid == 0)
                .collect()
        }
    }
}

/// `V_k^Γ` for a complete path `Γ = (X_1, …, X_ℓ)` and `0 ≤ k < ℓ`:
/// the target for `k = ℓ−1`, otherwise `∪_{m=k+2}^{ℓ} X_m`.
pub fn excluded_set(graph: &InteractionGraph, path: &[usize], k: usize, target: SiteMask) -> Result<SiteMask> {
    let l = path.len();
    if k >= l {
        return invalid(format!("excluded set index {k} out of range for path of length {l}"));
    }
    if k == l - 1 {
        return Ok(target);
    }
    // X_m is path[m-1].
    Ok(path[k + 1..].iter().fold(0, |acc, &i| acc | graph.mask(i)))
}

fn touching(graph: &InteractionGraph, v: SiteMask) -> Vec<bool> {
    (0..graph.len()).map(|i| graph.mask(i) & v != 0).collect()
}

/// Candidates for step `k` (1-based) of a complete path from the excluded
/// sets: terms touching `V_{k−1}` but not `V_k`, with `V_ℓ = ∅`.
pub fn next_steps_from_excluded(
    graph: &InteractionGraph,
    path: &[usize],
    k: usize,
    target: SiteMask,
) -> Result<Vec<usize>> {
    let l = path.len();
    if k == 0 || k > l {
        return invalid(format!("step {k} out of range for path of length {l}"));
    }
    let outer = touching(graph, excluded_set(graph, path, k - 1, target)?);
    let inner = if k == l {
        vec![false; graph.len()]
    } else {
        touching(graph, excluded_set(graph, path, k, target)?)
    };
    Ok((0..graph.len()).filter(|&i| outer[i] && !inner[i]).collect())
}

/// A place where the two definitions of the next-step set disagree.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaDivergence {
    pub path: Vec<usize>,
    pub step: usize,
    pub operational: Vec<usize>,
    pub from_excluded: Vec<usize>,
}

/// Compares [`next_steps`] with [`next_steps_from_excluded`] along every
/// step of every given complete path.
pub fn cross_check_delta(
    graph: &InteractionGraph,
    paths: &[SelfAvoidingPath],
    target: SiteMask,
) -> Result<Vec<DeltaDivergence>> {
    let mut out = Vec::new();
    for p in paths {
        let ids = &p.term_ids;
        let l = ids.len();
        for k in 1..=l {
            // Partial path already fixed when X_k is chosen: X_ℓ, …, X_{k+1}.
            let gamma: Vec<usize> = ids[k..].iter().rev().copied().collect();
            let mut a = next_steps(graph, &gamma, target);
            let mut b = next_steps_from_excluded(graph, ids, k, target)?;
            a.sort_unstable();
            b.sort_unstable();
            if a != b {
                out.push(DeltaDivergence {
                    path: ids.clone(),
                    step: k,
                    operational: a,
                    from_excluded: b,
                });
            }
        }
    }
    Ok(out)
}

struct Walker<'a> {
    graph: &'a InteractionGraph,
    source: SiteMask,
    target: SiteMask,
    l_max: usize,
    materialize: bool,
    out: PathEnumeration,
    stack: Vec<usize>,
}

impl Walker<'_> {
    fn record(&mut self) {
        let l = self.stack.len();
        let w: f64 = self.stack.iter().map(|&i| self.graph.weight(i)).product();
        *self.out.counts_by_length.entry(l).or_default() += 1;
        *self.out.total_weight_by_length.entry(l).or_default() += w;
        if self.materialize {
            let ids: Vec<usize> = self.stack.iter().rev().copied().collect();
            self.out.paths.get_or_insert_with(Vec::new).push(SelfAvoidingPath {
                term_ids: ids,
                weight: w,
            });
        }
    }

    fn visit(&mut self, avoid: SiteMask) {
        let last = *self.stack.last().expect("non-empty");
        if self.graph.mask(last) & self.source != 0 {
            self.record();
            return;
        }
        let steps: Vec<usize> = self.graph.overlaps[last]
            .iter()
            .copied()
            .filter(|&j| self.graph.mask(j) & avoid == 0)
            .collect();
        let step_weight: f64 = steps.iter().map(|&j| self.graph.weight(j)).sum();
        self.out.max_step_weight = self.out.max_step_weight.max(step_weight);
        if steps.is_empty() {
            return;
        }
        if self.stack.len() >= self.l_max {
            self.out.truncated = true;
            return;
        }
        let next_avoid = avoid | self.graph.mask(last);
        for j in steps {
            self.stack.push(j);
            self.visit(next_avoid);
            self.stack.pop();
        }
    }
}

/// Depth-first enumeration of all paths up to length `l_max`, backward from
/// the target. With `materialize = false` only counts and weights are kept.
pub fn enumerate_paths(
    graph: &InteractionGraph,
    source_support: &[usize],
    target_support: &[usize],
    l_max: usize,
    materialize: bool,
) -> Result<PathEnumeration> {
    if l_max == 0 {
        return invalid("L_max must be >= 1");
    }
    let source = mask_of(source_support)?;
    let target = mask_of(target_support)?;
    let anchor = next_steps(graph, &[], target);
    let anchor_weight: f64 = anchor.iter().map(|&i| graph.weight(i)).sum();
    let parts: Vec<PathEnumeration> = anchor
        .par_iter()
        .map(|&first| {
            let mut w = Walker {
                graph,
                source,
                target,
                l_max,
                materialize,
                out: PathEnumeration::default(),
                stack: vec![first],
            };
            w.visit(w.target);
            w.out
        })
        .collect();
    let mut out = PathEnumeration {
        l_max,
        max_step_weight: anchor_weight,
        paths: materialize.then(Vec::new),
        ..Default::default()
    };
    for p in parts {
        out.merge(p);
    }
    Ok(out)
}

/// Result of [`weighted_path_sum`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedSum {
    pub value: f64,
    /// Truncated enumeration and a factor still growing at `L_max`.
    pub truncation_tail: bool,
}

/// `Σ_ℓ total_weight(ℓ)·f(ℓ)`.
pub fn weighted_path_sum(e: &PathEnumeration, f: impl Fn(usize) -> f64) -> WeightedSum {
    let value = e.total_weight_by_length.iter().map(|(&l, &w)| w * f(l)).sum();
    let growing = f(e.l_max + 1) > f(e.l_max);
    WeightedSum {
        value,
        truncation_tail: e.truncated && growing,
    }
}

/// Number of next-step candidates `R = (k−1)·C(N,k)/(N/k)` in a complete
/// k-local graph.
pub fn k_local_branching(n: usize, k: usize) -> f64 {
    let binom: f64 = (0..k).map(|i| (n - i) as f64 / (i + 1) as f64).product();
    (k as f64 - 1.0) * binom / (n as f64 / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{build_terms, EnsembleSpec, Geometry};

    fn graph(g: Geometry) -> InteractionGraph {
        InteractionGraph::new(build_terms(&EnsembleSpec::new(g, 1.0)).unwrap()).unwrap()
    }

    #[test]
    fn chain_single_path() {
        let g = graph(Geometry::Chain { n: 8 });
        for r in 1..8 {
            let e = enumerate_paths(&g, &[0], &[r], r + 3, true).unwrap();
            assert_eq!(e.counts_by_length.len(), 1);
            assert_eq!(e.counts_by_length[&r], 1);
            assert_eq!(e.paths.as_ref().unwrap()[0].term_ids, (0..r).collect::<Vec<_>>());
        }
    }

    #[test]
    fn isolated_source_target() {
        let terms = vec![InteractionTerm {
            id: 0,
            support: vec![1, 2],
            bound: 1.0,
            coefficient: 1.0,
        }];
        let g = InteractionGraph::new(terms).unwrap();
        assert_eq!(enumerate_paths(&g, &[0], &[0], 4, false).unwrap().total_count(), 0);
    }

    #[test]
    fn delta_examples() {
        let g = graph(Geometry::Chain { n: 8 });
        let r = 5;
        let target = mask_of(&[r]).unwrap();
        let last = r - 1; // term {r-1, r}
        assert_eq!(next_steps(&g, &[last], target), vec![r - 2]);
        let k = graph(Geometry::CompleteKLocal { n: 4, k: 2 });
        let anchor = next_steps(&k, &[], mask_of(&[1]).unwrap());
        assert_eq!(anchor.len(), 3);
        assert_eq!(k_local_branching(4, 2), 3.0);
    }

    #[test]
    fn excluded_sets() {
        let g = graph(Geometry::Chain { n: 8 });
        let target = mask_of(&[4]).unwrap();
        let path = [0, 1, 2, 3];
        assert_eq!(excluded_set(&g, &path, 3, target).unwrap(), target);
        assert_eq!(sites_of(excluded_set(&g, &path, 0, target).unwrap()), vec![1, 2, 3, 4]);
        assert!(excluded_set(&g, &path, 4, target).is_err());
        assert_eq!(excluded_set(&g, &[3], 0, target).unwrap(), target);
    }

    #[test]
    fn weighted_sum_single_chain_path() {
        let terms = build_terms(&EnsembleSpec::new(Geometry::Chain { n: 6 }, 0.5)).unwrap();
        let g = InteractionGraph::new(terms).unwrap();
        let e = enumerate_paths(&g, &[0], &[4], 6, false).unwrap();
        let s = weighted_path_sum(&e, |l| l as f64);
        assert!((s.value - 0.25f64.powi(4) * 4.0).abs() < 1e-15);
        assert!(!s.truncation_tail);
    }
}
