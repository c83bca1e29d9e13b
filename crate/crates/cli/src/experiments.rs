//! Running each experiment kind and writing its artifacts.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use liebrob::bounds::{epsilon_of_delta, powerlaw_constants, velocity, TailBound, TailSystem, VelocityEstimate};
use liebrob::dynamics::{
    empirical_quantile, evolve, measure, sample_seed, CommutatorProbe, CommutatorResult, EvolutionPlan, Observable,
    ProbeState,
};
use liebrob::ensemble::{build_terms, EnsembleSpec};
use liebrob::martingale::{
    check_uniform_smoothness, random_smoothness_instance, sum_matrices_demo, FiniteMatrixDistribution,
    SumMatricesReport, TailPoint,
};
use liebrob::paths::{cross_check_delta, enumerate_paths, mask_of, InteractionGraph};
use liebrob::ComplexMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    bound_point, point_spec, tail_params_for, target_site, ExperimentConfig, ExperimentKind, MartingaleBlock,
    StateBlock, SweepPoint,
};
use crate::output::{fmt_f64, render_dat, slug, Artifacts, Csv};
use crate::stats::clopper_pearson_upper;
use crate::HarnessError;

/// Confidence level of the exceedance upper limit.
pub const CONFIDENCE: f64 = 0.95;

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Report {
    Simulate(SimulateReport),
    Bound(BoundReport),
    Paths(PathsReport),
    Verify(VerificationReport),
    Martingale(MartingaleReport),
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    /// False only when a verification or check failed.
    pub pass: bool,
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    pub report: Report,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a ExperimentConfig,
    seed: u64,
    version: &'static str,
    wall_time_seconds: f64,
    files: Vec<String>,
}

/// Validates `config` with the overrides applied, runs it and writes every artifact.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome, HarnessError> {
    let mut cfg = config.clone();
    if opts.seed.is_some() {
        cfg.seed = opts.seed;
    }
    if opts.output_dir.is_some() {
        cfg.output_dir = opts.output_dir.clone();
    }
    let out_missing = cfg.output_dir.is_none();
    match (cfg.validate(), out_missing) {
        (Ok(()), false) => {}
        (Ok(()), true) => {
            return Err(HarnessError::Invalid(vec![
                "output_dir is missing (set `output_dir` or pass --out)".into(),
            ]))
        }
        (Err(HarnessError::Invalid(mut v)), missing) => {
            if missing {
                v.push("output_dir is missing (set `output_dir` or pass --out)".into());
            }
            return Err(HarnessError::Invalid(v));
        }
        (Err(e), _) => return Err(e),
    }
    let seed = cfg.seed.expect("validated");
    let out_dir = cfg.output_dir.clone().expect("validated");
    let start = Instant::now();
    let mut art = Artifacts::create(&out_dir)?;
    let (pass, report) = match cfg.kind {
        ExperimentKind::Simulate => {
            let r = run_simulate(&cfg, seed, &mut art)?;
            (true, Report::Simulate(r))
        }
        ExperimentKind::Verify => {
            let r = run_verify(&cfg, seed, &mut art)?;
            (r.all_pass, Report::Verify(r))
        }
        ExperimentKind::Bound => (true, Report::Bound(run_bound(&cfg, &mut art)?)),
        ExperimentKind::Paths => (true, Report::Paths(run_paths(&cfg, &mut art)?)),
        ExperimentKind::Martingale => {
            let r = run_martingale(cfg.martingale.as_ref().expect("validated"), seed, &mut art)?;
            (r.pass, Report::Martingale(r))
        }
    };
    art.write_json("summary.json", &report)?;
    let mut files = art.files().to_vec();
    files.push("manifest.json".into());
    let manifest = Manifest {
        config: &cfg,
        seed,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        files: files.clone(),
    };
    art.write_json("manifest.json", &manifest)?;
    Ok(RunOutcome {
        pass,
        output_dir: out_dir,
        files,
        report,
    })
}

/// Samples of every point sharing one evolution, in sweep order.
#[derive(Clone, Debug)]
pub struct GroupSamples {
    pub spec: EnsembleSpec,
    pub plan: EvolutionPlan,
    pub points: Vec<SweepPoint>,
    /// `results[sample][j]` belongs to `points[j]`.
    pub results: Vec<Vec<CommutatorResult>>,
}

fn groups(points: &[SweepPoint]) -> Vec<Vec<SweepPoint>> {
    let mut out: Vec<Vec<SweepPoint>> = Vec::new();
    for p in points {
        match out.last_mut() {
            Some(g) if g[0].group_key() == p.group_key() => g.push(*p),
            _ => out.push(vec![*p]),
        }
    }
    out
}

/// Evolves `O_0` once per sample and measures it against every `A_r` of the
/// group, so all distances share the same realizations.
pub fn simulate_groups(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<GroupSamples>, HarnessError> {
    let base = cfg.ensemble.as_ref().expect("validated");
    let plan0 = cfg.evolution.as_ref().expect("validated");
    let pb = cfg.probe.as_ref().expect("validated");
    let samples = cfg.samples.expect("validated");
    let mut out = Vec::new();
    for g in groups(&cfg.sweep.points()) {
        let (spec, plan) = point_spec(base, plan0, &g[0]);
        let n = spec.n_sites();
        let state = match pb.state {
            StateBlock::MaximallyMixed => ProbeState::MaximallyMixed,
            StateBlock::PureBasis { index } => ProbeState::PureBasis(index),
        };
        let probes: Vec<CommutatorProbe> = g
            .iter()
            .map(|pt| {
                let r = pt.r.expect("validated");
                let target = target_site(&spec.geometry, pb.source, r).map_err(HarnessError::Mismatch)?;
                CommutatorProbe::new(
                    &pb.o0.pauli().matrix(),
                    &[pb.source],
                    &pb.a_r.pauli().matrix(),
                    &[target],
                    n,
                    spec.local_dim,
                    state.clone(),
                    pb.projector_rank,
                )
                .map_err(HarnessError::from)
            })
            .collect::<Result<_, _>>()?;
        let o0: &ComplexMatrix = &probes[0].o0;
        let tau = plan.tau();
        let results: Vec<Vec<CommutatorResult>> = (0..samples as u64)
            .into_par_iter()
            .map(|i| {
                let s = sample_seed(seed, i);
                let o_t = evolve(s, &spec, &plan, o0)?;
                probes
                    .iter()
                    .map(|p| {
                        let mut r = measure(&o_t, p)?;
                        r.seed = Some(s);
                        r.tau = tau;
                        Ok(r)
                    })
                    .collect::<liebrob::Result<Vec<_>>>()
            })
            .collect::<liebrob::Result<_>>()?;
        out.push(GroupSamples {
            spec,
            plan,
            points: g,
            results,
        });
    }
    Ok(out)
}

fn plan_time(plan: &EvolutionPlan) -> f64 {
    match *plan {
        EvolutionPlan::Static { t } => t,
        _ => plan.tau().expect("Brownian plan"),
    }
}

fn plan_steps(plan: &EvolutionPlan) -> u64 {
    match *plan {
        EvolutionPlan::Static { .. } => 0,
        EvolutionPlan::Brownian { steps, .. } => steps,
        EvolutionPlan::Brickwall { rounds, .. } => rounds,
    }
}

fn samples_csv(groups: &[GroupSamples]) -> Csv {
    let mut csv = Csv::new(&[
        "point",
        "n",
        "r",
        "time",
        "steps",
        "sample",
        "seed",
        "half_spectral",
        "frobenius_otoc",
        "state_otoc",
        "projected_half_norm",
    ]);
    let mut rows: Vec<(usize, usize, Vec<String>)> = Vec::new();
    for g in groups {
        for (j, pt) in g.points.iter().enumerate() {
            for (i, s) in g.results.iter().enumerate() {
                let r = &s[j];
                rows.push((
                    pt.index,
                    i,
                    vec![
                        pt.index.to_string(),
                        g.spec.n_sites().to_string(),
                        pt.r.expect("validated").to_string(),
                        fmt_f64(plan_time(&g.plan)),
                        plan_steps(&g.plan).to_string(),
                        i.to_string(),
                        r.seed.unwrap_or_default().to_string(),
                        fmt_f64(r.half_spectral),
                        fmt_f64(r.frobenius_otoc),
                        fmt_f64(r.state_otoc),
                        fmt_f64(r.projected_half_norm),
                    ],
                ));
            }
        }
    }
    rows.sort_by_key(|r| (r.0, r.1));
    for (_, _, row) in rows {
        csv.push(row);
    }
    csv
}

#[derive(Clone, Debug, Serialize)]
pub struct PointSummary {
    pub point: SweepPoint,
    pub n: usize,
    pub time: f64,
    pub means: BTreeMap<&'static str, f64>,
    pub quantiles: Vec<QuantileEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuantileEntry {
    pub observable: Observable,
    pub level: f64,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulateReport {
    pub samples: usize,
    pub points: Vec<PointSummary>,
}

fn summarize(groups: &[GroupSamples], levels: &[f64]) -> Vec<PointSummary> {
    let mut out = Vec::new();
    for g in groups {
        for (j, pt) in g.points.iter().enumerate() {
            let mut means = BTreeMap::new();
            let mut quantiles = Vec::new();
            for obs in Observable::ALL {
                let mut v: Vec<f64> = g.results.iter().map(|s| obs.of(&s[j])).collect();
                means.insert(obs.name(), v.iter().sum::<f64>() / v.len() as f64);
                v.sort_by(f64::total_cmp);
                for &level in levels {
                    quantiles.push(QuantileEntry {
                        observable: obs,
                        level,
                        value: empirical_quantile(&v, level),
                    });
                }
            }
            out.push(PointSummary {
                point: *pt,
                n: g.spec.n_sites(),
                time: plan_time(&g.plan),
                means,
                quantiles,
            });
        }
    }
    out.sort_by_key(|p| p.point.index);
    out
}

fn run_simulate(cfg: &ExperimentConfig, seed: u64, art: &mut Artifacts) -> Result<SimulateReport, HarnessError> {
    let groups = simulate_groups(cfg, seed)?;
    art.write_csv("samples.csv", &samples_csv(&groups))?;
    let points = summarize(&groups, &cfg.quantile_levels);
    let mut q = Csv::new(&["point", "r", "time", "observable", "level", "value"]);
    for p in &points {
        for e in &p.quantiles {
            q.push(vec![
                p.point.index.to_string(),
                p.point.r.expect("validated").to_string(),
                fmt_f64(p.time),
                e.observable.name().into(),
                fmt_f64(e.level),
                fmt_f64(e.value),
            ]);
        }
    }
    art.write_csv("quantiles.csv", &q)?;
    for (gi, g) in groups.iter().enumerate() {
        let rows: Vec<&PointSummary> = points
            .iter()
            .filter(|p| g.points.iter().any(|x| x.index == p.point.index))
            .collect();
        for obs in Observable::ALL {
            let curve: Vec<(f64, f64)> = rows
                .iter()
                .map(|p| (p.point.r.expect("validated") as f64, p.means[obs.name()]))
                .collect();
            art.write(
                &format!("mean_g{gi}_{}.dat", obs.name()),
                &render_dat(
                    &format!("mean {} vs r, group {gi}", obs.name()),
                    "r",
                    obs.name(),
                    &curve,
                ),
            )?;
            for &level in &cfg.quantile_levels {
                let curve: Vec<(f64, f64)> = rows
                    .iter()
                    .map(|p| {
                        let v = p
                            .quantiles
                            .iter()
                            .find(|e| e.observable == obs && e.level == level)
                            .expect("present")
                            .value;
                        (p.point.r.expect("validated") as f64, v)
                    })
                    .collect();
                art.write(
                    &format!("quantile_g{gi}_{}_q{}.dat", obs.name(), slug(level)),
                    &render_dat(
                        &format!("quantile {level} of {} vs r, group {gi}", obs.name()),
                        "r",
                        obs.name(),
                        &curve,
                    ),
                )?;
            }
        }
    }
    Ok(SimulateReport {
        samples: cfg.samples.expect("validated"),
        points,
    })
}

/// One (sweep point, δ) row of a verification.
#[derive(Clone, Debug, Serialize)]
pub struct VerificationRow {
    pub point: usize,
    pub r: usize,
    pub time: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub branch: &'static str,
    pub vacuous: bool,
    pub exceedances: usize,
    pub samples: usize,
    pub frequency: f64,
    pub upper_confidence: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub system: TailSystem,
    pub observable: Observable,
    pub confidence: f64,
    pub rows: Vec<VerificationRow>,
    pub all_pass: bool,
}

/// Compares bound and samples for one point: pass iff the upper limit is ≤ δ or the bound is vacuous.
pub fn verification_row(point: &SweepPoint, time: f64, bound: &TailBound, values: &[f64]) -> VerificationRow {
    let samples = values.len();
    let exceedances = values.iter().filter(|&&v| v >= bound.epsilon).count();
    let upper_confidence = clopper_pearson_upper(exceedances, samples, CONFIDENCE);
    VerificationRow {
        point: point.index,
        r: point.r.unwrap_or_default(),
        time,
        delta: bound.delta,
        epsilon: bound.epsilon,
        branch: bound.branch.name(),
        vacuous: bound.vacuous,
        exceedances,
        samples,
        frequency: exceedances as f64 / samples as f64,
        upper_confidence,
        pass: bound.vacuous || upper_confidence <= bound.delta,
    }
}

fn run_verify(cfg: &ExperimentConfig, seed: u64, art: &mut Artifacts) -> Result<VerificationReport, HarnessError> {
    let vb = cfg.verify.as_ref().expect("validated");
    let pb = cfg.probe.as_ref().expect("validated");
    let groups = simulate_groups(cfg, seed)?;
    art.write_csv("samples.csv", &samples_csv(&groups))?;
    let mut observable = None;
    let mut rows = Vec::new();
    for g in &groups {
        let obs =
            crate::config::check_pairing(vb.system, &g.spec, &g.plan, pb.observable).map_err(HarnessError::Mismatch)?;
        observable = Some(obs);
        for (j, pt) in g.points.iter().enumerate() {
            let mut params = tail_params_for(vb, &g.spec, &g.plan, pb, pt.r.expect("validated"));
            if let Some(c) = vb.bound_coupling {
                params.coupling = c;
            }
            let values: Vec<f64> = g.results.iter().map(|s| obs.of(&s[j])).collect();
            for &delta in &cfg.deltas {
                let b = epsilon_of_delta(&params, delta)?;
                rows.push(verification_row(pt, params.effective_time(), &b, &values));
            }
        }
    }
    rows.sort_by(|a, b| a.point.cmp(&b.point).then(a.delta.total_cmp(&b.delta).reverse()));
    let mut csv = Csv::new(&[
        "point",
        "r",
        "time",
        "delta",
        "epsilon",
        "branch",
        "vacuous",
        "exceedances",
        "samples",
        "frequency",
        "upper_confidence",
        "pass",
    ]);
    for r in &rows {
        csv.push(vec![
            r.point.to_string(),
            r.r.to_string(),
            fmt_f64(r.time),
            fmt_f64(r.delta),
            fmt_f64(r.epsilon),
            r.branch.into(),
            r.vacuous.to_string(),
            r.exceedances.to_string(),
            r.samples.to_string(),
            fmt_f64(r.frequency),
            fmt_f64(r.upper_confidence),
            r.pass.to_string(),
        ]);
    }
    art.write_csv("verification.csv", &csv)?;
    for (gi, g) in groups.iter().enumerate() {
        for &delta in &cfg.deltas {
            let sel: Vec<&VerificationRow> = rows
                .iter()
                .filter(|r| r.delta == delta && g.points.iter().any(|p| p.index == r.point))
                .collect();
            let eps: Vec<(f64, f64)> = sel.iter().map(|r| (r.r as f64, r.epsilon)).collect();
            let up: Vec<(f64, f64)> = sel.iter().map(|r| (r.r as f64, r.upper_confidence)).collect();
            art.write(
                &format!("epsilon_g{gi}_delta{}.dat", slug(delta)),
                &render_dat(
                    &format!("epsilon at delta {delta} vs r, group {gi}"),
                    "r",
                    "epsilon",
                    &eps,
                ),
            )?;
            art.write(
                &format!("upper_g{gi}_delta{}.dat", slug(delta)),
                &render_dat(
                    &format!("95% upper exceedance at delta {delta} vs r, group {gi}"),
                    "r",
                    "upper",
                    &up,
                ),
            )?;
        }
    }
    let all_pass = rows.iter().all(|r| r.pass);
    Ok(VerificationReport {
        system: vb.system,
        observable: observable.expect("at least one group"),
        confidence: CONFIDENCE,
        rows,
        all_pass,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundRow {
    pub point: SweepPoint,
    pub bound: TailBound,
    pub time: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub system: TailSystem,
    pub rows: Vec<BoundRow>,
    pub velocities: Vec<(usize, VelocityEstimate)>,
}

fn run_bound(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<BoundReport, HarnessError> {
    let base = cfg.bound.as_ref().expect("validated");
    let points = cfg.sweep.points();
    let mut rows = Vec::new();
    let mut velocities = Vec::new();
    let mut constants = Vec::new();
    for pt in &points {
        let p = bound_point(base, pt);
        velocities.push((pt.index, velocity(&p)?));
        if let Some(case) = powerlaw_case(p.system) {
            constants.push((pt.index, powerlaw_constants(p.alpha, case, p.r)?));
        }
        for &delta in &cfg.deltas {
            rows.push(BoundRow {
                point: *pt,
                bound: epsilon_of_delta(&p, delta)?,
                time: p.effective_time(),
            });
        }
    }
    let mut csv = Csv::new(&[
        "point", "system", "r", "n", "k", "alpha", "time", "delta", "epsilon", "branch", "boundary", "vacuous",
    ]);
    for row in &rows {
        let p = bound_point(base, &row.point);
        csv.push(vec![
            row.point.index.to_string(),
            p.system.name().into(),
            p.r.to_string(),
            p.n.to_string(),
            p.k.to_string(),
            fmt_f64(p.alpha),
            fmt_f64(row.time),
            fmt_f64(row.bound.delta),
            fmt_f64(row.bound.epsilon),
            row.bound.branch.name().into(),
            row.bound.boundary.map(fmt_f64).unwrap_or_default(),
            row.bound.vacuous.to_string(),
        ]);
    }
    art.write_csv("bounds.csv", &csv)?;
    if !constants.is_empty() {
        art.write_json("powerlaw_constants.json", &constants)?;
    }
    let (axis, x_of): (&str, fn(&SweepPoint) -> f64) = if cfg.sweep.r.as_ref().is_some_and(|v| v.len() > 1) {
        ("r", |p: &SweepPoint| p.r.unwrap_or_default() as f64)
    } else if cfg.sweep.time.as_ref().is_some_and(|v| v.len() > 1) {
        ("time", |p: &SweepPoint| p.time.unwrap_or_default())
    } else if cfg.sweep.alpha.as_ref().is_some_and(|v| v.len() > 1) {
        ("alpha", |p: &SweepPoint| p.alpha.unwrap_or_default())
    } else if cfg.sweep.n.as_ref().is_some_and(|v| v.len() > 1) {
        ("n", |p: &SweepPoint| p.n.unwrap_or_default() as f64)
    } else {
        ("point", |p: &SweepPoint| p.index as f64)
    };
    for &delta in &cfg.deltas {
        let curve: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.bound.delta == delta)
            .map(|r| (x_of(&r.point), r.bound.epsilon))
            .collect();
        art.write(
            &format!("epsilon_delta{}.dat", slug(delta)),
            &render_dat(
                &format!("{} epsilon at delta {delta}", base.system),
                axis,
                "epsilon",
                &curve,
            ),
        )?;
    }
    Ok(BoundReport {
        system: base.system,
        rows,
        velocities,
    })
}

fn powerlaw_case(s: TailSystem) -> Option<liebrob::bounds::PowerLawCase> {
    use liebrob::bounds::PowerLawCase as C;
    match s {
        TailSystem::PowerLawStaticOTOC => Some(C::StaticOtoc),
        TailSystem::PowerLawStaticSpectral => Some(C::StaticSpectral),
        TailSystem::PowerLawBrownianOTOC => Some(C::BrownianOtoc),
        TailSystem::PowerLawBrownianSpectral => Some(C::BrownianSpectral),
        _ => None,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PathsPoint {
    pub point: SweepPoint,
    pub counts_by_length: BTreeMap<usize, u64>,
    pub total_weight_by_length: BTreeMap<usize, f64>,
    pub truncated: bool,
    pub max_step_weight: f64,
    /// Paths whose recursive next-step sets disagree with the excluded-set form.
    pub delta_divergences: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PathsReport {
    pub points: Vec<PathsPoint>,
}

fn run_paths(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<PathsReport, HarnessError> {
    let pb = cfg.paths.as_ref().expect("validated");
    let base = cfg.ensemble.as_ref().expect("validated");
    let mut points = Vec::new();
    let mut csv = Csv::new(&["point", "n", "length", "count", "total_weight"]);
    for pt in cfg.sweep.points() {
        let (spec, _) = point_spec(base, &EvolutionPlan::Static { t: 0.0 }, &pt);
        let graph = InteractionGraph::new(build_terms(&spec)?)?;
        let e = enumerate_paths(&graph, &pb.source, &pb.target, pb.l_max, pb.materialize)?;
        let delta_divergences = match &e.paths {
            Some(paths) => {
                art.write(&format!("paths_p{}.txt", pt.index), &e.dump())?;
                Some(cross_check_delta(&graph, paths, mask_of(&pb.target)?)?.len())
            }
            None => None,
        };
        for (&l, &c) in &e.counts_by_length {
            csv.push(vec![
                pt.index.to_string(),
                spec.n_sites().to_string(),
                l.to_string(),
                c.to_string(),
                fmt_f64(e.total_weight_by_length.get(&l).copied().unwrap_or_default()),
            ]);
        }
        let curve: Vec<(f64, f64)> = e.counts_by_length.iter().map(|(&l, &c)| (l as f64, c as f64)).collect();
        art.write(
            &format!("counts_p{}.dat", pt.index),
            &render_dat(&format!("path counts, {}", pt.label()), "length", "count", &curve),
        )?;
        points.push(PathsPoint {
            point: pt,
            counts_by_length: e.counts_by_length,
            total_weight_by_length: e.total_weight_by_length,
            truncated: e.truncated,
            max_step_weight: e.max_step_weight,
            delta_divergences,
        });
    }
    art.write_csv("path_counts.csv", &csv)?;
    Ok(PathsReport { points })
}

/// Slack of one smoothness instance at one `p`.
#[derive(Clone, Debug, Serialize)]
pub struct SmoothnessRow {
    pub instance: usize,
    pub dim: usize,
    pub x_atoms: usize,
    pub y_terms: usize,
    pub p: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Shape and seed of instance `i`: dimensions cycle through `2..=max_dim`,
/// one or two atoms for `X`, one to three Rademacher terms for `Y`.
pub fn smoothness_instance(
    seed: u64,
    i: usize,
    max_dim: usize,
) -> Result<(usize, usize, usize, FiniteMatrixDistribution), HarnessError> {
    let dim = 2 + i % (max_dim - 1);
    let x_atoms = 1 + (i / 3) % 2;
    let y_terms = 1 + (i / 2) % 3;
    let d = random_smoothness_instance(sample_seed(seed, i as u64), dim, x_atoms, y_terms)?;
    Ok((dim, x_atoms, y_terms, d))
}

/// Exact smoothness slacks of `count` random instances at each `p`, ordered by instance.
pub fn smoothness_sweep(
    seed: u64,
    count: usize,
    max_dim: usize,
    ps: &[f64],
) -> Result<Vec<SmoothnessRow>, HarnessError> {
    let per: Vec<Vec<SmoothnessRow>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let (dim, x_atoms, y_terms, d) = smoothness_instance(seed, i, max_dim)?;
            ps.iter()
                .map(|&p| {
                    let s = check_uniform_smoothness(&d, p)?;
                    Ok(SmoothnessRow {
                        instance: i,
                        dim,
                        x_atoms,
                        y_terms,
                        p,
                        slack: s.slack,
                        pass: s.pass,
                    })
                })
                .collect::<Result<Vec<_>, HarnessError>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(per.into_iter().flatten().collect())
}

/// Largest `|slack|` at `p = 2` over commuting scalar instances, where equality holds.
pub fn scalar_equality_gap(seed: u64, count: usize) -> Result<f64, HarnessError> {
    let mut worst = 0.0f64;
    for i in 0..count {
        let d = random_smoothness_instance(sample_seed(seed, i as u64) ^ 0x5ca1a, 1, 1 + i % 2, 1 + i % 3)?;
        let real = |m: &ComplexMatrix| ComplexMatrix::identity(1).scale_real(m.get(0, 0).re);
        let atoms = d.atoms.iter().map(|(m, w)| (real(m), *w)).collect();
        let children = d
            .children
            .as_ref()
            .expect("instance has children")
            .iter()
            .map(|c| FiniteMatrixDistribution::new(c.atoms.iter().map(|(m, w)| (real(m), *w)).collect()))
            .collect::<liebrob::Result<Vec<_>>>()?;
        let scalar = FiniteMatrixDistribution::new(atoms)?.with_children(children)?;
        worst = worst.max(check_uniform_smoothness(&scalar, 2.0)?.slack.abs());
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct MartingaleReport {
    pub demo: SumMatricesReport,
    /// `E‖S‖ ≤ 3√(v ln D)`.
    pub mean_within_scale: bool,
    pub smoothness_instances: usize,
    pub smoothness_min_slack: f64,
    pub smoothness_pass: bool,
    pub scalar_equality_gap: f64,
    pub pass: bool,
}

fn run_martingale(m: &MartingaleBlock, seed: u64, art: &mut Artifacts) -> Result<MartingaleReport, HarnessError> {
    let demo = sum_matrices_demo(m.dim, &vec![m.term_bound; m.n_terms], m.demo_samples, seed)?;
    let mut tails = Csv::new(&["norm", "epsilon", "empirical", "bound", "exponential_region", "pass"]);
    let curves: [(&str, &[TailPoint]); 3] = [
        ("spectral", &demo.spectral),
        ("frobenius", &demo.frobenius),
        ("projected", &demo.projected),
    ];
    for (name, pts) in curves {
        for t in pts {
            tails.push(vec![
                name.into(),
                fmt_f64(t.epsilon),
                fmt_f64(t.empirical),
                fmt_f64(t.bound),
                t.exponential_region.to_string(),
                t.pass.to_string(),
            ]);
        }
        let emp: Vec<(f64, f64)> = pts.iter().map(|t| (t.epsilon, t.empirical)).collect();
        let bnd: Vec<(f64, f64)> = pts.iter().map(|t| (t.epsilon, t.bound)).collect();
        art.write(
            &format!("tail_{name}_empirical.dat"),
            &render_dat(&format!("{name} empirical tail"), "epsilon", "probability", &emp),
        )?;
        art.write(
            &format!("tail_{name}_bound.dat"),
            &render_dat(&format!("{name} tail bound"), "epsilon", "probability", &bnd),
        )?;
    }
    art.write_csv("tails.csv", &tails)?;
    let rows = smoothness_sweep(seed, m.smoothness_instances, m.max_dim, &m.p_values)?;
    let mut sm = Csv::new(&["instance", "dim", "x_atoms", "y_terms", "p", "slack", "pass"]);
    for r in &rows {
        sm.push(vec![
            r.instance.to_string(),
            r.dim.to_string(),
            r.x_atoms.to_string(),
            r.y_terms.to_string(),
            fmt_f64(r.p),
            fmt_f64(r.slack),
            r.pass.to_string(),
        ]);
    }
    art.write_csv("smoothness.csv", &sm)?;
    let gap = scalar_equality_gap(seed, 50)?;
    let mean_within_scale = demo.dim == 1 || demo.mean_spectral <= 3.0 * demo.spectral_scale;
    let smoothness_pass = rows.iter().all(|r| r.pass);
    let pass = demo.pass && mean_within_scale && smoothness_pass && gap < 1e-12;
    Ok(MartingaleReport {
        smoothness_instances: m.smoothness_instances,
        smoothness_min_slack: rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min),
        smoothness_pass,
        scalar_equality_gap: gap,
        mean_within_scale,
        pass,
        demo,
    })
}
