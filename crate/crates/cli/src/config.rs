//! Experiment configuration: parsing, validation and sweep expansion.

use std::path::{Path, PathBuf};

use liebrob::bounds::{TailParams, TailSystem};
use liebrob::dynamics::{EvolutionPlan, Observable};
use liebrob::ensemble::{check_dim_cap, EnsembleSpec, Geometry, TimeModel, DEFAULT_DIM_CAP};
use liebrob::linalg::Pauli;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    Bound,
    Paths,
    Verify,
    Martingale,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Bound => "bound",
            ExperimentKind::Paths => "paths",
            ExperimentKind::Verify => "verify",
            ExperimentKind::Martingale => "martingale",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PauliLabel {
    #[default]
    X,
    Y,
    Z,
}

impl PauliLabel {
    pub fn pauli(self) -> Pauli {
        match self {
            PauliLabel::X => Pauli::X,
            PauliLabel::Y => Pauli::Y,
            PauliLabel::Z => Pauli::Z,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateBlock {
    #[default]
    MaximallyMixed,
    PureBasis {
        index: usize,
    },
}

fn one() -> usize {
    1
}

/// Probe operators: `O_0` at `source`, `A_r` at distance `r` from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeBlock {
    #[serde(default)]
    pub source: usize,
    #[serde(default)]
    pub o0: PauliLabel,
    #[serde(default)]
    pub a_r: PauliLabel,
    #[serde(default = "one")]
    pub projector_rank: usize,
    #[serde(default)]
    pub state: StateBlock,
    /// Observable compared with the bound in `verify`; defaults to the one the system bounds.
    #[serde(default)]
    pub observable: Option<Observable>,
}

/// Lists of values; the run visits their Cartesian product.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    pub r: Option<Vec<usize>>,
    /// `t` for static plans, `τ` for Brownian ones.
    pub time: Option<Vec<f64>>,
    pub xi: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    pub n: Option<Vec<usize>>,
    pub k: Option<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundForm {
    /// Discrete-circuit form where one exists, else the continuum one.
    #[default]
    Discrete,
    Continuum,
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    pub system: TailSystem,
    #[serde(default)]
    pub form: BoundForm,
    /// `λ` of the 1d spectral bound.
    #[serde(default = "half")]
    pub split: f64,
    /// Coupling used in the bound; any value at least the ensemble's gives a valid bound.
    #[serde(default)]
    pub bound_coupling: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsBlock {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
    pub l_max: usize,
    #[serde(default)]
    pub materialize: bool,
}

fn default_ps() -> Vec<f64> {
    vec![2.0, 3.0, 4.0, 8.0, 16.0]
}
fn default_instances() -> usize {
    500
}
fn default_max_dim() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MartingaleBlock {
    /// Dimension `D` of the sum-of-matrices demo (a power of two).
    pub dim: usize,
    pub n_terms: usize,
    #[serde(default = "one_f")]
    pub term_bound: f64,
    pub demo_samples: usize,
    #[serde(default = "default_instances")]
    pub smoothness_instances: usize,
    #[serde(default = "default_ps")]
    pub p_values: Vec<f64>,
    #[serde(default = "default_max_dim")]
    pub max_dim: usize,
}

fn one_f() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub samples: Option<usize>,
    #[serde(default)]
    pub quantile_levels: Vec<f64>,
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub dim_cap: Option<usize>,
    pub ensemble: Option<EnsembleSpec>,
    pub evolution: Option<EvolutionPlan>,
    pub probe: Option<ProbeBlock>,
    #[serde(default)]
    pub sweep: SweepAxes,
    pub bound: Option<TailParams>,
    pub verify: Option<VerifyBlock>,
    pub paths: Option<PathsBlock>,
    pub martingale: Option<MartingaleBlock>,
}

/// One point of the sweep grid; `None` keeps the block's own value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub alpha: Option<f64>,
    pub xi: Option<f64>,
    pub time: Option<f64>,
    pub r: Option<usize>,
}

/// `(n, k, α, ξ, time)` with floats compared bitwise.
pub type GroupKey = (Option<usize>, Option<usize>, Option<u64>, Option<u64>, Option<u64>);

impl SweepPoint {
    /// Key shared by points that differ only in `r`.
    pub fn group_key(&self) -> GroupKey {
        (
            self.n,
            self.k,
            self.alpha.map(f64::to_bits),
            self.xi.map(f64::to_bits),
            self.time.map(f64::to_bits),
        )
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(v) = self.n {
            parts.push(format!("n={v}"));
        }
        if let Some(v) = self.k {
            parts.push(format!("k={v}"));
        }
        if let Some(v) = self.alpha {
            parts.push(format!("alpha={v}"));
        }
        if let Some(v) = self.xi {
            parts.push(format!("xi={v}"));
        }
        if let Some(v) = self.time {
            parts.push(format!("time={v}"));
        }
        if let Some(v) = self.r {
            parts.push(format!("r={v}"));
        }
        format!("sweep point {} ({})", self.index, parts.join(", "))
    }
}

fn axis<T: Copy>(v: &Option<Vec<T>>) -> Vec<Option<T>> {
    match v {
        Some(xs) => xs.iter().copied().map(Some).collect(),
        None => vec![None],
    }
}

impl SweepAxes {
    /// Cartesian product in the order n, k, α, ξ, time, r (r varies fastest).
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for n in axis(&self.n) {
            for k in axis(&self.k) {
                for alpha in axis(&self.alpha) {
                    for xi in axis(&self.xi) {
                        for time in axis(&self.time) {
                            for r in axis(&self.r) {
                                out.push(SweepPoint {
                                    index: out.len(),
                                    n,
                                    k,
                                    alpha,
                                    xi,
                                    time,
                                    r,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn present_axes(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (name, present) in [
            ("r", self.r.is_some()),
            ("time", self.time.is_some()),
            ("xi", self.xi.is_some()),
            ("alpha", self.alpha.is_some()),
            ("n", self.n.is_some()),
            ("k", self.k.is_some()),
        ] {
            if present {
                out.push(name);
            }
        }
        out
    }

    fn empty_axes(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let checks: [(&str, bool); 6] = [
            ("r", self.r.as_ref().is_some_and(Vec::is_empty)),
            ("time", self.time.as_ref().is_some_and(Vec::is_empty)),
            ("xi", self.xi.as_ref().is_some_and(Vec::is_empty)),
            ("alpha", self.alpha.as_ref().is_some_and(Vec::is_empty)),
            ("n", self.n.as_ref().is_some_and(Vec::is_empty)),
            ("k", self.k.as_ref().is_some_and(Vec::is_empty)),
        ];
        for (name, empty) in checks {
            if empty {
                out.push(name);
            }
        }
        out
    }
}

/// Ensemble and evolution plan at a sweep point.
pub fn point_spec(spec: &EnsembleSpec, plan: &EvolutionPlan, pt: &SweepPoint) -> (EnsembleSpec, EvolutionPlan) {
    let mut spec = spec.clone();
    let mut plan = *plan;
    match &mut spec.geometry {
        Geometry::Chain { n } => {
            if let Some(v) = pt.n {
                *n = v;
            }
        }
        Geometry::CompleteKLocal { n, k } => {
            if let Some(v) = pt.n {
                *n = v;
            }
            if let Some(v) = pt.k {
                *k = v;
            }
        }
        Geometry::PowerlawChain { n, alpha } => {
            if let Some(v) = pt.n {
                *n = v;
            }
            if let Some(v) = pt.alpha {
                *alpha = v;
            }
        }
        Geometry::Grid { .. } => {}
    }
    if let Some(x) = pt.xi {
        match &mut plan {
            EvolutionPlan::Brownian { xi, .. } | EvolutionPlan::Brickwall { xi, .. } => *xi = x,
            EvolutionPlan::Static { .. } => {}
        }
    }
    if let Some(t) = pt.time {
        plan = match plan {
            EvolutionPlan::Static { .. } => EvolutionPlan::Static { t },
            EvolutionPlan::Brownian { xi, .. } => EvolutionPlan::Brownian {
                xi,
                steps: (t / (xi * xi)).round() as u64,
            },
            EvolutionPlan::Brickwall { xi, .. } => EvolutionPlan::Brickwall {
                xi,
                rounds: (t / (xi * xi)).round() as u64,
            },
        };
    }
    if let (
        TimeModel::Brownian { xi },
        EvolutionPlan::Brownian { xi: px, .. } | EvolutionPlan::Brickwall { xi: px, .. },
    ) = (&mut spec.time_model, &plan)
    {
        *xi = *px;
    }
    (spec, plan)
}

/// Site at distance `r` from `source`: along the first axis on a grid, `source + r` otherwise.
pub fn target_site(geometry: &Geometry, source: usize, r: usize) -> Result<usize, String> {
    let n = geometry.n_sites();
    match geometry {
        Geometry::Grid { dims } => {
            let coords = Geometry::grid_coords(dims, source);
            if coords[0] + r >= dims[0] {
                return Err(format!("distance {r} from site {source} leaves the grid {dims:?}"));
            }
            let stride: usize = dims[1..].iter().product();
            Ok(source + r * stride)
        }
        _ => {
            if source + r >= n {
                Err(format!("distance {r} from site {source} exceeds the {n} sites"))
            } else {
                Ok(source + r)
            }
        }
    }
}

/// Bound parameters matching a simulated point.
pub fn tail_params_for(
    verify: &VerifyBlock,
    spec: &EnsembleSpec,
    plan: &EvolutionPlan,
    probe: &ProbeBlock,
    r: usize,
) -> TailParams {
    let s = verify.system;
    let mut p = TailParams::new(s, 0.0);
    p.coupling = spec.coupling;
    p.r = r;
    p.local_dim = spec.local_dim;
    p.d_p = probe.projector_rank as f64;
    p.split = verify.split;
    match &spec.geometry {
        Geometry::Grid { dims } => p.lattice_dim = dims.len(),
        Geometry::CompleteKLocal { n, k } => {
            p.n = *n;
            p.k = *k;
        }
        Geometry::PowerlawChain { alpha, .. } => p.alpha = *alpha,
        Geometry::Chain { .. } => {}
    }
    let nn = matches!(
        s,
        TailSystem::NN1dBrownianOTOC | TailSystem::NN1dBrownianSpectral | TailSystem::NNdBrownianOTOC
    );
    match *plan {
        EvolutionPlan::Static { t } => p.time = t,
        EvolutionPlan::Brownian { xi, steps } | EvolutionPlan::Brickwall { xi, rounds: steps } => {
            p.time = xi * xi * steps as f64;
            if nn && verify.form == BoundForm::Discrete {
                p.discrete = Some(liebrob::bounds::Discretization { xi, steps });
            }
        }
    }
    p
}

/// Checks that a bound system describes the simulated geometry and time model.
pub fn check_pairing(
    system: TailSystem,
    spec: &EnsembleSpec,
    plan: &EvolutionPlan,
    observable: Option<Observable>,
) -> Result<Observable, String> {
    let geometry_ok = match system {
        TailSystem::NN1dBrownianOTOC | TailSystem::NN1dBrownianSpectral => {
            matches!(spec.geometry, Geometry::Chain { .. })
        }
        TailSystem::NNdBrownianOTOC => matches!(spec.geometry, Geometry::Chain { .. } | Geometry::Grid { .. }),
        TailSystem::KLocalStaticOTOC | TailSystem::KLocalBrownianOTOC => {
            matches!(spec.geometry, Geometry::CompleteKLocal { .. })
        }
        _ => matches!(spec.geometry, Geometry::PowerlawChain { .. }),
    };
    if !geometry_ok {
        return Err(format!(
            "bound system {system} does not describe geometry {:?}",
            spec.geometry
        ));
    }
    let static_plan = matches!(plan, EvolutionPlan::Static { .. });
    if static_plan == system.is_brownian() {
        return Err(format!(
            "bound system {system} does not describe evolution plan {plan:?}"
        ));
    }
    let wanted = match system.quantity() {
        liebrob::bounds::BoundQuantity::ProjectedHalfNorm => Observable::ProjectedHalfNorm,
        liebrob::bounds::BoundQuantity::HalfSpectral => Observable::HalfSpectral,
    };
    match observable {
        Some(o) if o != wanted => Err(format!(
            "bound system {system} controls {} but the probe asks for {}",
            wanted.name(),
            o.name()
        )),
        _ => Ok(wanted),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Parse(m) => HarnessError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn dim_cap(&self) -> usize {
        self.dim_cap.unwrap_or(DEFAULT_DIM_CAP)
    }

    /// Collects every problem instead of stopping at the first.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut errs: Vec<String> = Vec::new();
        let kind = self.kind;
        if self.seed.is_none() {
            errs.push("seed is missing (set `seed` or pass --seed)".into());
        }
        for name in self.sweep.empty_axes() {
            errs.push(format!("sweep axis `{name}` is empty"));
        }
        for name in self.sweep.present_axes() {
            let applies = match kind {
                ExperimentKind::Simulate | ExperimentKind::Verify | ExperimentKind::Bound => true,
                ExperimentKind::Paths => matches!(name, "n" | "k" | "alpha"),
                ExperimentKind::Martingale => false,
            };
            if !applies {
                errs.push(format!("sweep axis `{name}` does not apply to {}", kind.name()));
            }
        }
        for &q in &self.quantile_levels {
            if !(q > 0.0 && q <= 1.0) {
                errs.push(format!("quantile level {q} is outside (0,1]"));
            }
        }
        let need = |present: bool, block: &str, errs: &mut Vec<String>| {
            if !present {
                errs.push(format!("`{block}` block is required for {}", kind.name()));
            }
            present
        };
        let needs_deltas = matches!(kind, ExperimentKind::Bound | ExperimentKind::Verify);
        if needs_deltas {
            if self.deltas.is_empty() {
                errs.push("`deltas` is empty".into());
            }
            for &d in &self.deltas {
                if !(d > 0.0 && d <= 1.0) {
                    errs.push(format!("δ = {d} is outside (0,1]"));
                }
            }
        }
        match kind {
            ExperimentKind::Simulate | ExperimentKind::Verify => {
                match self.samples {
                    None => errs.push(format!("`samples` is required for {}", kind.name())),
                    Some(0) => errs.push("`samples` must be >= 1".into()),
                    _ => {}
                }
                if self.sweep.r.is_none() {
                    errs.push(format!("sweep axis `r` is required for {}", kind.name()));
                }
                let has = need(self.ensemble.is_some(), "ensemble", &mut errs)
                    & need(self.evolution.is_some(), "evolution", &mut errs)
                    & need(self.probe.is_some(), "probe", &mut errs);
                let verify = if kind == ExperimentKind::Verify {
                    need(self.verify.is_some(), "verify", &mut errs);
                    self.verify.as_ref()
                } else {
                    None
                };
                if has {
                    self.validate_dynamics(verify, &mut errs);
                }
            }
            ExperimentKind::Bound => {
                if need(self.bound.is_some(), "bound", &mut errs) {
                    let base = self.bound.as_ref().expect("checked");
                    for pt in self.sweep.points() {
                        if let Err(e) = bound_point(base, &pt).validate() {
                            errs.push(format!("{}: {e}", pt.label()));
                        }
                    }
                }
            }
            ExperimentKind::Paths => {
                let has = need(self.ensemble.is_some(), "ensemble", &mut errs)
                    & need(self.paths.is_some(), "paths", &mut errs);
                if has {
                    let pb = self.paths.as_ref().expect("checked");
                    if pb.l_max == 0 {
                        errs.push("paths.l_max must be >= 1".into());
                    }
                    if pb.source.is_empty() || pb.target.is_empty() {
                        errs.push("paths.source and paths.target must be non-empty".into());
                    }
                    for pt in self.sweep.points() {
                        let (spec, _) = point_spec(
                            self.ensemble.as_ref().expect("checked"),
                            &EvolutionPlan::Static { t: 0.0 },
                            &pt,
                        );
                        if let Err(e) = spec.validate() {
                            errs.push(format!("{}: {e}", pt.label()));
                            continue;
                        }
                        let n = spec.n_sites();
                        if pb.source.iter().chain(&pb.target).any(|&s| s >= n) {
                            errs.push(format!("{}: path endpoints must be below {n}", pt.label()));
                        }
                    }
                }
            }
            ExperimentKind::Martingale => {
                if need(self.martingale.is_some(), "martingale", &mut errs) {
                    let m = self.martingale.as_ref().expect("checked");
                    if !m.dim.is_power_of_two() {
                        errs.push(format!("martingale.dim = {} is not a power of two", m.dim));
                    }
                    if m.n_terms == 0 {
                        errs.push("martingale.n_terms must be >= 1".into());
                    }
                    if m.demo_samples < 100 {
                        errs.push("martingale.demo_samples must be >= 100".into());
                    }
                    if !(m.term_bound >= 0.0) || !m.term_bound.is_finite() {
                        errs.push("martingale.term_bound must be finite and >= 0".into());
                    }
                    if m.max_dim < 2 || m.max_dim > 8 {
                        errs.push("martingale.max_dim must lie in 2..=8".into());
                    }
                    if m.p_values.is_empty() || m.p_values.iter().any(|p| !(*p >= 2.0)) {
                        errs.push("martingale.p_values must be non-empty and >= 2".into());
                    }
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Invalid(errs))
        }
    }

    fn validate_dynamics(&self, verify: Option<&VerifyBlock>, errs: &mut Vec<String>) {
        let spec = self.ensemble.as_ref().expect("checked");
        let plan = self.evolution.as_ref().expect("checked");
        let probe = self.probe.as_ref().expect("checked");
        if spec.local_dim != 2 {
            errs.push("probe operators are Pauli matrices and need ensemble.local_dim = 2".into());
        }
        if let (
            TimeModel::Brownian { xi },
            EvolutionPlan::Brownian { xi: px, .. } | EvolutionPlan::Brickwall { xi: px, .. },
        ) = (spec.time_model, plan)
        {
            if self.sweep.xi.is_none() && xi != *px {
                errs.push(format!(
                    "ensemble.time_model.xi = {xi} differs from evolution.xi = {px}"
                ));
            }
        }
        for pt in self.sweep.points() {
            let (s, p) = point_spec(spec, plan, &pt);
            let label = pt.label();
            if let Err(e) = s.validate() {
                errs.push(format!("{label}: {e}"));
                continue;
            }
            if let Err(e) = p.validate() {
                errs.push(format!("{label}: {e}"));
            }
            if let Err(e) = check_dim_cap(&s, self.dim_cap()) {
                errs.push(format!("{label}: {e}"));
                continue;
            }
            let n = s.n_sites();
            if probe.source >= n {
                errs.push(format!(
                    "{label}: probe.source {} is outside the {n} sites",
                    probe.source
                ));
                continue;
            }
            let dim = 1usize << n;
            if probe.projector_rank == 0 || probe.projector_rank > dim {
                errs.push(format!("{label}: probe.projector_rank must lie in 1..={dim}"));
            }
            if let StateBlock::PureBasis { index } = probe.state {
                if index >= dim {
                    errs.push(format!("{label}: basis state {index} outside dimension {dim}"));
                }
            }
            if let Some(r) = pt.r {
                if r == 0 {
                    errs.push(format!("{label}: r must be >= 1"));
                } else if let Err(e) = target_site(&s.geometry, probe.source, r) {
                    errs.push(format!("{label}: {e}"));
                }
            }
            if let Some(v) = verify {
                if let Err(e) = check_pairing(v.system, &s, &p, probe.observable) {
                    errs.push(format!("{label}: {e}"));
                } else if let Some(r) = pt.r.filter(|&r| r > 0) {
                    let mut params = tail_params_for(v, &s, &p, probe, r);
                    match v.bound_coupling {
                        Some(c) if !(c >= s.coupling) => {
                            errs.push(format!(
                                "{label}: verify.bound_coupling {c} is below the ensemble coupling {}",
                                s.coupling
                            ));
                        }
                        Some(c) => params.coupling = c,
                        None if s.coupling == 0.0 => {
                            errs.push(format!(
                                "{label}: zero ensemble coupling needs a positive verify.bound_coupling"
                            ));
                            continue;
                        }
                        None => {}
                    }
                    if let Err(e) = params.validate() {
                        errs.push(format!("{label}: {e}"));
                    }
                }
            }
        }
    }
}

/// Bound parameters with a sweep point applied.
pub fn bound_point(base: &TailParams, pt: &SweepPoint) -> TailParams {
    let mut p = base.clone();
    if let Some(v) = pt.r {
        p.r = v;
    }
    if let Some(v) = pt.n {
        p.n = v;
    }
    if let Some(v) = pt.k {
        p.k = v;
    }
    if let Some(v) = pt.alpha {
        p.alpha = v;
    }
    if let Some(t) = pt.time {
        p.time = t;
    }
    match (pt.xi, p.discrete.as_mut()) {
        (Some(x), Some(d)) => {
            let tau = d.xi * d.xi * d.steps as f64;
            d.xi = x;
            d.steps = (pt.time.unwrap_or(tau) / (x * x)).round() as u64;
        }
        (None, Some(d)) if pt.time.is_some() => {
            d.steps = (pt.time.expect("checked") / (d.xi * d.xi)).round() as u64;
        }
        _ => {}
    }
    p
}
