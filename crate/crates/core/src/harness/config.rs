//! Scenario configuration: a JSON document describing one scenario.
//!
//! Node indices are zero-based. Unknown keys are rejected at every level.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::dynamics::{ControlLaw, Disturbance, Scenario, Topology, DEFAULT_STEP};
use crate::graph::{Horizon, Mode, SwitchingSignal, WeightedDigraph};
use crate::linalg::Matrix;
use crate::objectives::{ConvexComponent, ConvexSet, ObjectiveSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub m: usize,
    pub nodes: usize,
    pub objectives: Vec<ComponentConfig>,
    pub topology: TopologyConfig,
    pub law: LawConfig,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub x0: InitialState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<DisturbanceConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ComponentConfig {
    /// `½ (x - c)ᵀ Q (x - c)`
    Quadratic {
        q: Vec<Vec<f64>>,
        c: Vec<f64>,
    },
    /// `½ |x - c|²`
    Isotropic {
        c: Vec<f64>,
    },
    Zero,
    SqDist {
        set: SetConfig,
    },
    Sum {
        parts: Vec<ComponentConfig>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetConfig {
    Point {
        at: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// `null` marks an unbounded side.
    Box {
        lower: Vec<Option<f64>>,
        upper: Vec<Option<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcConfig {
    pub from: usize,
    pub to: usize,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalConfig {
    pub start: f64,
    pub arcs: Vec<ArcConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologyConfig {
    Fixed {
        arcs: Vec<ArcConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weight_bounds: Option<[f64; 2]>,
    },
    Switching {
        dwell: f64,
        /// Exactly one of `period` / `end`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        end: Option<f64>,
        intervals: Vec<IntervalConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weight_bounds: Option<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    Jstar,
    Jk { k: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default)]
    pub t0: f64,
    pub tf: f64,
}

fn default_h() -> f64 {
    DEFAULT_STEP
}

/// Analysis settings; every tolerance left out falls back to the suite's
/// default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_star: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ujsc_window: Option<f64>,
    /// Number of consecutive seeds (starting at `seed`) used by the suites.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consensus_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov_spread_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dini_slack: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomBox {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    /// One row per node.
    Explicit(Vec<Vec<f64>>),
    /// Every coordinate uniform in `[lower, upper]`, seeded.
    Random { random_box: RandomBox },
}

/// Uniform in `[-5, 5]^m` per node.
impl Default for InitialState {
    fn default() -> Self {
        InitialState::Random {
            random_box: RandomBox {
                lower: -5.0,
                upper: 5.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceConfig {
    /// `w_i(t) = e^{-t} v_i`
    ExpDecay { v: Vec<Vec<f64>> },
}

fn semantic(path: impl Into<String>, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Reads, parses and validates a scenario file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, HarnessError> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| HarnessError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn check_len(path: &str, expected: usize, v: &[f64]) -> Result<(), HarnessError> {
    if v.len() != expected {
        return Err(semantic(
            path,
            format!("expected {expected} entries, found {}", v.len()),
        ));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(semantic(path, "entries must be finite"));
    }
    Ok(())
}

impl ScenarioConfig {
    /// Semantic checks with field paths; also builds every component once.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.m == 0 {
            return Err(semantic("m", "state dimension must be positive"));
        }
        if self.nodes == 0 {
            return Err(semantic("nodes", "need at least one node"));
        }
        if self.objectives.len() != self.nodes {
            return Err(semantic(
                "objectives",
                format!(
                    "expected {} components, found {}",
                    self.nodes,
                    self.objectives.len()
                ),
            ));
        }
        self.objective_set()?;
        self.check_topology()?;
        self.topology()?;
        if let LawConfig::Jk { k } = self.law {
            if !(k >= 0.0) || !k.is_finite() {
                return Err(semantic("law.k", "gain must be finite and nonnegative"));
            }
        }
        let it = &self.integrator;
        if !(it.h > 0.0) || !it.h.is_finite() {
            return Err(semantic("integrator.h", "step must be positive"));
        }
        if !(it.tf > it.t0) {
            return Err(semantic("integrator.tf", "tf must exceed t0"));
        }
        match &self.x0 {
            InitialState::Explicit(rows) => {
                if rows.len() != self.nodes {
                    return Err(semantic("x0", format!("expected {} rows", self.nodes)));
                }
                for (i, r) in rows.iter().enumerate() {
                    check_len(&format!("x0[{i}]"), self.m, r)?;
                }
            }
            InitialState::Random { random_box } => {
                if !(random_box.lower <= random_box.upper) {
                    return Err(semantic("x0.random_box", "lower must not exceed upper"));
                }
            }
        }
        let a = &self.analysis;
        if let Some(z) = &a.z_star {
            check_len("analysis.z_star", self.m, z)?;
        }
        if let Some(grid) = &a.k_grid {
            if grid.is_empty() || grid.iter().any(|k| !(*k >= 0.0) || !k.is_finite()) {
                return Err(semantic(
                    "analysis.k_grid",
                    "gains must be finite and nonnegative",
                ));
            }
        }
        if a.ujsc_window.is_some_and(|w| !(w > 0.0)) {
            return Err(semantic("analysis.ujsc_window", "window must be positive"));
        }
        if a.seeds == Some(0) {
            return Err(semantic("analysis.seeds", "need at least one seed"));
        }
        if let Some(DisturbanceConfig::ExpDecay { v }) = &self.disturbance {
            if v.len() != self.nodes {
                return Err(semantic(
                    "disturbance.v",
                    format!("expected {} rows", self.nodes),
                ));
            }
            for (i, r) in v.iter().enumerate() {
                check_len(&format!("disturbance.v[{i}]"), self.m, r)?;
            }
        }
        Ok(())
    }

    fn check_arcs(
        &self,
        path: &str,
        arcs: &[ArcConfig],
        bounds: Option<[f64; 2]>,
    ) -> Result<(), HarnessError> {
        for (k, a) in arcs.iter().enumerate() {
            let p = format!("{path}[{k}]");
            if a.from >= self.nodes || a.to >= self.nodes {
                return Err(semantic(
                    &p,
                    format!("node index outside 0..{}", self.nodes),
                ));
            }
            if a.from == a.to {
                return Err(semantic(&p, "self-loops are not allowed"));
            }
            if !(a.weight > 0.0) || !a.weight.is_finite() {
                return Err(semantic(
                    format!("{p}.weight"),
                    "weights must be positive (A8)",
                ));
            }
            if let Some([lo, hi]) = bounds {
                if a.weight < lo || a.weight > hi {
                    return Err(semantic(
                        format!("{p}.weight"),
                        format!(
                            "weight {} outside declared bounds [{lo}, {hi}] (A8)",
                            a.weight
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    fn check_topology(&self) -> Result<(), HarnessError> {
        match &self.topology {
            TopologyConfig::Fixed {
                arcs,
                weight_bounds,
            } => {
                check_bounds(weight_bounds)?;
                self.check_arcs("topology.arcs", arcs, *weight_bounds)
            }
            TopologyConfig::Switching {
                dwell,
                period,
                end,
                intervals,
                weight_bounds,
            } => {
                check_bounds(weight_bounds)?;
                if !(*dwell > 0.0) {
                    return Err(semantic(
                        "topology.dwell",
                        "dwell time must be positive (A6)",
                    ));
                }
                if period.is_some() == end.is_some() {
                    return Err(semantic(
                        "topology",
                        "give exactly one of `period` or `end`",
                    ));
                }
                if intervals.is_empty() {
                    return Err(semantic("topology.intervals", "need at least one interval"));
                }
                for (k, iv) in intervals.iter().enumerate() {
                    self.check_arcs(
                        &format!("topology.intervals[{k}].arcs"),
                        &iv.arcs,
                        *weight_bounds,
                    )?;
                    if k > 0 {
                        let gap = iv.start - intervals[k - 1].start;
                        if !(gap > 0.0) {
                            return Err(semantic(
                                format!("topology.intervals[{k}].start"),
                                "interval starts must strictly increase",
                            ));
                        }
                        if gap < *dwell - 1e-12 {
                            return Err(semantic(
                                format!("topology.intervals[{k}].start"),
                                format!("switch gap {gap} is below the dwell time {dwell} (A6)"),
                            ));
                        }
                    }
                }
                if let Some(p) = period {
                    let wrap = intervals[0].start + p - intervals[intervals.len() - 1].start;
                    if !(wrap > 0.0) {
                        return Err(semantic(
                            "topology.period",
                            "period must exceed the span of starts",
                        ));
                    }
                    if intervals.len() > 1 && wrap < *dwell - 1e-12 {
                        return Err(semantic(
                            "topology.period",
                            format!("wrap-around switch gap {wrap} is below the dwell time {dwell} (A6)"),
                        ));
                    }
                }
                if let Some(e) = end {
                    if self.integrator.tf > *e {
                        return Err(semantic(
                            "topology.end",
                            "schedule ends before integrator.tf",
                        ));
                    }
                }
                if self.integrator.t0 < intervals[0].start {
                    return Err(semantic("integrator.t0", "t0 precedes the first interval"));
                }
                Ok(())
            }
        }
    }

    pub fn objective_set(&self) -> Result<ObjectiveSet<f64>, HarnessError> {
        let comps = self
            .objectives
            .iter()
            .enumerate()
            .map(|(i, c)| build_component(&format!("objectives[{i}]"), self.m, c))
            .collect::<Result<Vec<_>, _>>()?;
        ObjectiveSet::new(self.m, comps).map_err(|e| semantic("objectives", e.to_string()))
    }

    fn graph(&self, path: &str, arcs: &[ArcConfig]) -> Result<WeightedDigraph<f64>, HarnessError> {
        WeightedDigraph::from_arcs(self.nodes, arcs.iter().map(|a| (a.from, a.to, a.weight)))
            .map_err(|e| semantic(path, e.to_string()))
    }

    pub fn topology(&self) -> Result<Topology<f64>, HarnessError> {
        match &self.topology {
            TopologyConfig::Fixed { arcs, .. } => {
                Ok(Topology::Fixed(self.graph("topology.arcs", arcs)?))
            }
            TopologyConfig::Switching {
                dwell,
                period,
                end,
                intervals,
                ..
            } => {
                let modes = intervals
                    .iter()
                    .enumerate()
                    .map(|(k, iv)| {
                        Ok(Mode {
                            start: iv.start,
                            graph: self
                                .graph(&format!("topology.intervals[{k}].arcs"), &iv.arcs)?,
                        })
                    })
                    .collect::<Result<Vec<_>, HarnessError>>()?;
                let horizon = match (period, end) {
                    (Some(p), _) => Horizon::Periodic(*p),
                    (None, Some(e)) => Horizon::Until(*e),
                    (None, None) => return Err(semantic("topology", "missing `period` or `end`")),
                };
                SwitchingSignal::new(modes, *dwell, horizon)
                    .map(Topology::Switching)
                    .map_err(|e| semantic("topology", e.to_string()))
            }
        }
    }

    pub fn law(&self) -> ControlLaw<f64> {
        match self.law {
            LawConfig::Jstar => ControlLaw::JStar,
            LawConfig::Jk { k } => ControlLaw::JK(k),
        }
    }

    /// Stacked initial state for the given seed.
    pub fn initial_state(&self, seed: u64) -> Vec<f64> {
        match &self.x0 {
            InitialState::Explicit(rows) => rows.iter().flatten().copied().collect(),
            InitialState::Random { random_box } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..self.nodes * self.m)
                    .map(|_| rng.gen_range(random_box.lower..=random_box.upper))
                    .collect()
            }
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        let n = self.analysis.seeds.unwrap_or(1) as u64;
        (0..n).map(|k| self.seed.wrapping_add(k)).collect()
    }

    /// Full scenario for one seed, with an optional law override.
    pub fn scenario(
        &self,
        seed: u64,
        law: Option<ControlLaw<f64>>,
    ) -> Result<Scenario<f64>, HarnessError> {
        let it = &self.integrator;
        let s = Scenario::new(
            self.objective_set()?,
            self.topology()?,
            law.unwrap_or_else(|| self.law()),
            self.initial_state(seed),
            it.t0,
            it.tf,
        )
        .and_then(|s| s.with_step(it.h))
        .map_err(|e| semantic("scenario", e.to_string()))?;
        Ok(match &self.disturbance {
            Some(DisturbanceConfig::ExpDecay { v }) => {
                s.with_disturbance(Disturbance::exp_decay(v.clone()))
            }
            None => s,
        })
    }
}

fn check_bounds(b: &Option<[f64; 2]>) -> Result<(), HarnessError> {
    match b {
        Some([lo, hi]) if !(*lo > 0.0 && lo <= hi) => Err(semantic(
            "topology.weight_bounds",
            "bounds need 0 < lower <= upper (A8)",
        )),
        _ => Ok(()),
    }
}

fn build_set(path: &str, m: usize, s: &SetConfig) -> Result<ConvexSet<f64>, HarnessError> {
    let err = |e: crate::Error| semantic(path, e.to_string());
    match s {
        SetConfig::Point { at } => {
            check_len(&format!("{path}.at"), m, at)?;
            Ok(ConvexSet::point(at.clone()))
        }
        SetConfig::Ball { center, radius } => {
            check_len(&format!("{path}.center"), m, center)?;
            ConvexSet::ball(center.clone(), *radius).map_err(err)
        }
        SetConfig::Box { lower, upper } => {
            if lower.len() != m || upper.len() != m {
                return Err(semantic(path, format!("box bounds need {m} entries")));
            }
            let lo = lower
                .iter()
                .map(|v| v.unwrap_or(f64::NEG_INFINITY))
                .collect();
            let hi = upper.iter().map(|v| v.unwrap_or(f64::INFINITY)).collect();
            ConvexSet::boxed(lo, hi).map_err(err)
        }
    }
}

fn build_component(
    path: &str,
    m: usize,
    c: &ComponentConfig,
) -> Result<ConvexComponent<f64>, HarnessError> {
    let err = |e: crate::Error| semantic(path, e.to_string());
    match c {
        ComponentConfig::Quadratic { q, c } => {
            check_len(&format!("{path}.c"), m, c)?;
            let q = Matrix::from_rows(q).map_err(err)?;
            if q.rows() != m || q.cols() != m {
                return Err(semantic(format!("{path}.q"), format!("Q must be {m}x{m}")));
            }
            ConvexComponent::quadratic(q, c.clone()).map_err(err)
        }
        ComponentConfig::Isotropic { c } => {
            check_len(&format!("{path}.c"), m, c)?;
            Ok(ConvexComponent::isotropic(c.clone()))
        }
        ComponentConfig::Zero => Ok(ConvexComponent::zero(m)),
        ComponentConfig::SqDist { set } => Ok(ConvexComponent::sq_dist(build_set(
            &format!("{path}.set"),
            m,
            set,
        )?)),
        ComponentConfig::Sum { parts } => {
            let parts = parts
                .iter()
                .enumerate()
                .map(|(k, p)| build_component(&format!("{path}.parts[{k}]"), m, p))
                .collect::<Result<Vec<_>, _>>()?;
            ConvexComponent::sum(parts).map_err(err)
        }
    }
}
