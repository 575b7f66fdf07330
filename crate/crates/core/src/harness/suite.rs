//! Verification suites, gain sweeps and graph/oracle reports.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::config::{LawConfig, ScenarioConfig};
use super::report::{ClaimResult, RunReport};
use super::trace::{write_trace, TraceColumn, TraceMeta};
use super::{io_err, HarnessError};
use crate::analysis::{
    self, check_disagreement_bound, consensus_diameter, detect_convergence, diameter_series,
    dini_nonincreasing, estimate_l0, interior_witnesses, lyapunov_trace, node_optimum_residuals,
    sphere_intersection, stationary_linear, stationary_quadratic, Convergence, Slack,
    StationaryPoint,
};
use crate::dynamics::{integrate, ControlLaw, Topology, Trajectory};
use crate::graph::{Horizon, WeightedDigraph};
use crate::linalg;
use crate::objectives::{global_min, Intersection, MinMethod, ObjectiveSet};

const CONSENSUS_TOL: f64 = 1e-4;
const SWITCHING_TOL: f64 = 1e-3;
const GAP_TOL: f64 = 1e-6;
const ORACLE_TOL: f64 = 1e-6;
const STATIONARY_RESIDUAL_TOL: f64 = 1e-9;
const DEFAULT_K_GRID: [f64; 3] = [1.0, 10.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Simulate,
    VerifyThm1,
    VerifyThm2,
    VerifyThm34,
    Audit,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Simulate,
        Suite::VerifyThm1,
        Suite::VerifyThm2,
        Suite::VerifyThm34,
        Suite::Audit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Simulate => "simulate",
            Suite::VerifyThm1 => "verify-thm1",
            Suite::VerifyThm2 => "verify-thm2",
            Suite::VerifyThm34 => "verify-thm34",
            Suite::Audit => "audit",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown suite `{s}`"))
    }
}

/// Command-line overrides and output location.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Traces and the report go here; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub h: Option<f64>,
}

impl RunOptions {
    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        RunOptions {
            out_dir: Some(dir.into()),
            ..Default::default()
        }
    }
}

/// Applies overrides and re-validates.
fn resolve(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<ScenarioConfig, HarnessError> {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(h) = opts.h {
        cfg.integrator.h = h;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Content hash of a resolved config.
pub fn fingerprint(cfg: &ScenarioConfig) -> String {
    let text = serde_json::to_string(cfg).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn requirement(msg: impl Into<String>) -> HarnessError {
    HarnessError::Requirement(msg.into())
}

struct Ctx<'a> {
    cfg: &'a ScenarioConfig,
    suite: Suite,
    fingerprint: String,
    out_dir: Option<&'a Path>,
    artifacts: Vec<String>,
}

impl Ctx<'_> {
    /// Integrates one scenario per seed, in parallel; results keep seed order.
    fn simulate(
        &self,
        law: &ControlLaw<f64>,
        seeds: &[u64],
    ) -> Result<Vec<Trajectory<f64>>, HarnessError> {
        let scenarios = seeds
            .iter()
            .map(|&s| self.cfg.scenario(s, Some(law.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let results: Vec<_> = std::thread::scope(|scope| {
            let handles: Vec<_> = scenarios
                .iter()
                .map(|s| scope.spawn(move || integrate(s)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("integration thread panicked"))
                .collect()
        });
        results
            .into_iter()
            .map(|r| {
                let mut t = r?;
                t.fingerprint = Some(self.fingerprint.clone());
                Ok(t)
            })
            .collect()
    }

    fn emit(
        &mut self,
        label: &str,
        seed: u64,
        law: &ControlLaw<f64>,
        traj: &Trajectory<f64>,
        extra: &[TraceColumn],
    ) -> Result<(), HarnessError> {
        let Some(dir) = self.out_dir else {
            return Ok(());
        };
        let path = dir.join(format!("{}_{}_{label}.csv", self.cfg.name, self.suite));
        let meta = TraceMeta::new(
            &self.cfg.name,
            seed,
            &law_name(law),
            self.cfg.integrator.h,
            traj,
        );
        write_trace(&path, traj, &meta, extra)?;
        self.artifacts.push(path.display().to_string());
        Ok(())
    }

    /// Standard metric columns: diameter, per-node residuals and, given a
    /// witness, per-node Lyapunov values.
    fn columns(
        &self,
        obj: &ObjectiveSet<f64>,
        traj: &Trajectory<f64>,
        z: Option<&[f64]>,
    ) -> Vec<TraceColumn> {
        let mut cols = vec![TraceColumn::global(&diameter_series(traj), traj.n_nodes)];
        if let Ok(res) = node_optimum_residuals(traj, obj) {
            cols.push(TraceColumn::per_node("residual", &res));
        }
        if let Some(Ok(v)) = z.map(|z| lyapunov_trace(traj, z)) {
            cols.push(TraceColumn::per_node("V", &v.nodes));
        }
        cols
    }
}

fn law_name(law: &ControlLaw<f64>) -> String {
    match law {
        ControlLaw::JStar => "jstar".into(),
        ControlLaw::JK(k) => format!("jk(K={k})"),
        ControlLaw::Custom(l) => l.name().to_string(),
    }
}

/// Runs a suite. Claim failures are reported in the returned report (see
/// [`RunReport::exit_code`]); config problems, unmet suite requirements and
/// numerical failures are errors.
pub fn run(
    cfg: &ScenarioConfig,
    suite: Suite,
    opts: &RunOptions,
) -> Result<RunReport, HarnessError> {
    let started = Instant::now();
    let cfg = resolve(cfg, opts)?;
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut ctx = Ctx {
        cfg: &cfg,
        suite,
        fingerprint: fingerprint(&cfg),
        out_dir: opts.out_dir.as_deref(),
        artifacts: Vec::new(),
    };
    let claims = match suite {
        Suite::Simulate => simulate(&mut ctx)?,
        Suite::VerifyThm1 => verify_thm1(&mut ctx)?,
        Suite::VerifyThm2 => verify_thm2(&mut ctx)?,
        Suite::VerifyThm34 => verify_thm34(&mut ctx)?,
        Suite::Audit => audit(&ctx)?,
    };
    let mut report = RunReport::new(&cfg.name, &ctx.fingerprint, suite.as_str(), claims);
    report.artifacts = std::mem::take(&mut ctx.artifacts);
    if let Some(dir) = &opts.out_dir {
        let path = dir.join(format!("{}_{suite}_report.json", cfg.name));
        report.artifacts.push(path.display().to_string());
        report.wall_clock_ms = started.elapsed().as_millis() as u64;
        report.write(&path)?;
    } else {
        report.wall_clock_ms = started.elapsed().as_millis() as u64;
    }
    Ok(report)
}

fn simulate(ctx: &mut Ctx) -> Result<Vec<ClaimResult>, HarnessError> {
    let cfg = ctx.cfg;
    let obj = cfg.objective_set()?;
    let law = cfg.law();
    let seeds = cfg.seeds();
    let trajs = ctx.simulate(&law, &seeds)?;
    let mut details = Vec::new();
    for (&seed, traj) in seeds.iter().zip(&trajs) {
        let conv = detect_convergence(
            traj,
            &obj,
            analysis::CONVERGENCE_TOL,
            analysis::CONVERGENCE_WINDOW,
        )?;
        let status = match conv {
            Convergence::Converged { at } => format!("converged at t={at}"),
            Convergence::HorizonReached => "horizon reached".to_string(),
        };
        details.push(format!(
            "seed {seed}: terminal diameter {:.3e}, {status}",
            consensus_diameter(traj.last_state(), traj.m)
        ));
        let cols = ctx.columns(&obj, traj, None);
        ctx.emit(&format!("seed{seed}"), seed, &law, traj, &cols)?;
    }
    Ok(vec![ClaimResult::new(
        "simulate.completed",
        "Definition 1",
        true,
        details.join("; "),
    )])
}

fn require_jstar(cfg: &ScenarioConfig, suite: Suite) -> Result<(), HarnessError> {
    if cfg.law != LawConfig::Jstar {
        return Err(requirement(format!(
            "{suite} runs the jstar law; set law.type = \"jstar\""
        )));
    }
    Ok(())
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn verify_thm1(ctx: &mut Ctx) -> Result<Vec<ClaimResult>, HarnessError> {
    let cfg = ctx.cfg;
    require_jstar(cfg, Suite::VerifyThm1)?;
    let obj = cfg.objective_set()?;
    let topo = cfg.topology()?;
    let Some(g) = topo.fixed_graph() else {
        return Err(requirement(
            "verify-thm1 needs a fixed graph; use verify-thm34 for switching signals",
        ));
    };
    if !g.is_strongly_connected() {
        return Err(requirement("verify-thm1 needs a strongly connected graph"));
    }
    let law = ControlLaw::JStar;
    let seeds = cfg.seeds();
    let a = &cfg.analysis;
    let consensus_tol = a.consensus_tol.unwrap_or(CONSENSUS_TOL);
    match obj.common_minimizers()? {
        Intersection::NonEmpty { witness } => {
            let gm = global_min(&obj)?;
            let trajs = ctx.simulate(&law, &seeds)?;
            let (mut diam, mut resid, mut gap) = (0.0f64, 0.0f64, 0.0f64);
            for (&seed, traj) in seeds.iter().zip(&trajs) {
                let x = traj.last_state();
                diam = diam.max(consensus_diameter(x, traj.m));
                let res = node_optimum_residuals(traj, &obj)?;
                resid = resid.max(max_of(res.iter().filter_map(|s| s.last())));
                for xi in x.chunks(traj.m) {
                    gap = gap.max((obj.total(xi)? - gm.value).abs());
                }
                let cols = ctx.columns(&obj, traj, Some(&witness));
                ctx.emit(&format!("seed{seed}"), seed, &law, traj, &cols)?;
            }
            let n = seeds.len();
            Ok(vec![
                ClaimResult::at_most(
                    "thm1.consensus",
                    "Theorem 1",
                    &format!("max terminal diameter over {n} seeds"),
                    diam,
                    consensus_tol,
                ),
                ClaimResult::at_most(
                    "thm1.node_optimum",
                    "Theorem 1",
                    &format!("max terminal node-optimum residual over {n} seeds"),
                    resid,
                    a.residual_tol.unwrap_or(CONSENSUS_TOL),
                ),
                ClaimResult::at_most(
                    "thm1.optimality_gap",
                    "Definition 1",
                    &format!("max |F(x_i) - F*| over {n} seeds"),
                    gap,
                    a.gap_tol.unwrap_or(GAP_TOL),
                ),
            ])
        }
        Intersection::Empty => {
            let trajs = ctx.simulate(&law, &seeds)?;
            let oracle = stationary_linear(&obj, g, 1.0).ok();
            let mut diam = 0.0f64;
            let mut oracle_err = 0.0f64;
            for (&seed, traj) in seeds.iter().zip(&trajs) {
                let x = traj.last_state();
                diam = diam.max(consensus_diameter(x, traj.m));
                if let Some(sp) = &oracle {
                    oracle_err = oracle_err.max(linalg::max_abs(&linalg::sub(x, &sp.x)));
                }
                let cols = ctx.columns(&obj, traj, None);
                ctx.emit(&format!("seed{seed}"), seed, &law, traj, &cols)?;
            }
            let mut claims = Vec::new();
            match &oracle {
                Some(sp) => {
                    let expected = consensus_diameter(&sp.x, obj.dim());
                    let err = (diam - expected).abs();
                    let pass = err <= consensus_tol && expected > consensus_tol;
                    claims.push(
                        ClaimResult::new(
                            "thm1.necessity",
                            "Theorem 1",
                            pass,
                            format!(
                                "exact optimal consensus NOT reached; terminal diameter {diam:.3}±{consensus_tol:.0e} \
                                 (equilibrium {expected:.6}); consistent with necessity"
                            ),
                        )
                        .with_margin(consensus_tol - err),
                    );
                    claims.push(ClaimResult::at_most(
                        "thm1.necessity.oracle",
                        "Theorem 1",
                        "max |x(tf) - x_eq|",
                        oracle_err,
                        a.oracle_tol.unwrap_or(ORACLE_TOL),
                    ));
                }
                None => claims.push(
                    ClaimResult::new(
                        "thm1.necessity",
                        "Theorem 1",
                        diam > consensus_tol,
                        format!(
                            "terminal diameter {diam:.3e} with empty argmin intersection; \
                             consistent with necessity when nonzero"
                        ),
                    )
                    .with_margin(diam - consensus_tol),
                ),
            }
            Ok(claims)
        }
        Intersection::Undecided => Err(requirement(
            "cannot decide whether the component argmin sets intersect",
        )),
    }
}

fn verify_thm2(ctx: &mut Ctx) -> Result<Vec<ClaimResult>, HarnessError> {
    let cfg = ctx.cfg;
    let obj = cfg.objective_set()?;
    let topo = cfg.topology()?;
    let g = thm2_graph(&topo)?;
    if obj.quadratic_blocks().is_none() {
        return Err(requirement("verify-thm2 needs quadratic objectives"));
    }
    let grid = cfg
        .analysis
        .k_grid
        .clone()
        .ok_or_else(|| requirement("verify-thm2 needs analysis.k_grid"))?;
    if grid.iter().any(|&k| k <= 0.0) {
        return Err(requirement("verify-thm2 needs positive gains"));
    }
    let lambda2 = g.lambda2()?;
    let points = grid
        .iter()
        .map(|&k| stationary_quadratic(&obj, g, k))
        .collect::<Result<Vec<_>, _>>()?;
    let l0 = estimate_l0(&obj, &points)?;
    let seeds = cfg.seeds();
    let a = &cfg.analysis;
    let diam_tol = a.consensus_tol.unwrap_or(CONSENSUS_TOL);
    let oracle_tol = a.oracle_tol.unwrap_or(ORACLE_TOL);
    let mut claims = Vec::new();
    for (&k, sp) in grid.iter().zip(&points) {
        let law = ControlLaw::JK(k);
        let trajs = ctx.simulate(&law, &seeds)?;
        let expected = consensus_diameter(&sp.x, obj.dim());
        let (mut diam_err, mut state_err) = (0.0f64, 0.0f64);
        for (&seed, traj) in seeds.iter().zip(&trajs) {
            let x = traj.last_state();
            diam_err = diam_err.max((consensus_diameter(x, traj.m) - expected).abs());
            state_err = state_err.max(linalg::max_abs(&linalg::sub(x, &sp.x)));
            let cols = ctx.columns(&obj, traj, None);
            ctx.emit(&format!("K{k}_seed{seed}"), seed, &law, traj, &cols)?;
        }
        let bc = check_disagreement_bound(sp, l0, lambda2)?;
        claims.push(ClaimResult::at_most(
            format!("thm2.K={k}.stationary_residual"),
            "Theorem 2",
            "stationary-set residual",
            sp.residual,
            STATIONARY_RESIDUAL_TOL,
        ));
        claims.push(ClaimResult::at_most(
            format!("thm2.K={k}.oracle"),
            "Theorem 2",
            "max |x(tf) - x_K|",
            state_err,
            oracle_tol,
        ));
        claims.push(ClaimResult::at_most(
            format!("thm2.K={k}.diameter"),
            "Theorem 2",
            &format!("|diameter(tf) - {expected:.6e}|"),
            diam_err,
            diam_tol,
        ));
        claims.push(
            ClaimResult::new(
                format!("thm2.K={k}.disagreement_bound"),
                "Theorem 2",
                bc.holds,
                format!(
                    "|p|_M = {:.6e} <= L0/(K lambda2) = {:.6e} (grid-sup L0 = {l0:.6e}, lambda2 = {lambda2:.6e})",
                    sp.disagreement, bc.bound
                ),
            )
            .with_margin(bc.margin),
        );
    }
    Ok(claims)
}

fn thm2_graph(topo: &Topology<f64>) -> Result<&WeightedDigraph<f64>, HarnessError> {
    match topo.fixed_graph() {
        Some(g) if g.is_bidirectional() && g.has_symmetric_weights() => Ok(g),
        Some(_) => Err(requirement(
            "needs a bidirectional graph with symmetric weights",
        )),
        None => Err(requirement("needs a fixed graph")),
    }
}

fn verify_thm34(ctx: &mut Ctx) -> Result<Vec<ClaimResult>, HarnessError> {
    let cfg = ctx.cfg;
    require_jstar(cfg, Suite::VerifyThm34)?;
    let obj = cfg.objective_set()?;
    let topo = cfg.topology()?;
    let sets = obj.argmin_sets()?;
    let z = match (&cfg.analysis.z_star, obj.common_minimizers()?) {
        (Some(z), _) => {
            for (i, s) in sets.iter().enumerate() {
                if !s.contains(z, 1e-9)? {
                    return Err(requirement(format!("analysis.z_star is not in argmin f_{i}")));
                }
            }
            z.clone()
        }
        (None, Intersection::NonEmpty { witness }) => witness,
        (None, Intersection::Empty) => {
            return Err(requirement(
                "argmin intersection is empty; Lyapunov checks are disabled (use verify-thm1 or verify-thm2)",
            ))
        }
        (None, Intersection::Undecided) => {
            return Err(requirement("argmin intersection undecided; supply analysis.z_star"))
        }
    };
    let a = &cfg.analysis;
    let mut claims = Vec::new();
    match &topo {
        Topology::Switching(sig) => {
            let window = a
                .ujsc_window
                .or(match sig.horizon() {
                    Horizon::Periodic(p) => Some(p),
                    Horizon::Until(_) => None,
                })
                .ok_or_else(|| requirement("verify-thm34 needs analysis.ujsc_window"))?;
            claims.push(ClaimResult::new(
                "switching.ujsc",
                "Theorem 4",
                sig.check_ujsc(window),
                format!("uniformly jointly strongly connected with window T = {window}"),
            ));
        }
        Topology::Fixed(g) => claims.push(ClaimResult::new(
            "switching.ujsc",
            "Theorem 4",
            g.is_strongly_connected(),
            "fixed graph strongly connected",
        )),
    }
    let law = ControlLaw::JStar;
    let seeds = cfg.seeds();
    let trajs = ctx.simulate(&law, &seeds)?;
    let witnesses = interior_witnesses(&sets, &z).ok();
    let slack = a.dini_slack.unwrap_or(analysis::DINI_RELATIVE_SLACK);
    let spread_tol = a.lyapunov_spread_tol.unwrap_or(SWITCHING_TOL);
    let resid_tol = a.residual_tol.unwrap_or(SWITCHING_TOL);
    let cons_tol = a.consensus_tol.unwrap_or(SWITCHING_TOL);

    let mut dini_ok = true;
    let mut dini_worst = f64::NEG_INFINITY;
    let mut first_violation = None;
    let (mut spread, mut resid, mut limit_err) = (0.0f64, 0.0f64, 0.0f64);
    let mut recon_failures = Vec::new();
    for (&seed, traj) in seeds.iter().zip(&trajs) {
        let v = lyapunov_trace(traj, &z)?;
        let mc = dini_nonincreasing(&v.max, Slack::Relative(slack))?;
        dini_ok &= mc.holds;
        dini_worst = dini_worst.max(mc.worst_excess);
        if first_violation.is_none() {
            first_violation = mc.first_violation;
        }
        let last: Vec<f64> = v.nodes.iter().filter_map(|s| s.last()).collect();
        let hi = last.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = last.iter().copied().fold(f64::INFINITY, f64::min);
        spread = spread.max(hi - lo);
        let res = node_optimum_residuals(traj, &obj)?;
        resid = resid.max(max_of(res.iter().filter_map(|s| s.last())));
        if let Some(w) = &witnesses {
            match limit_point(traj, w) {
                Ok(p) => {
                    let x = traj.last_state();
                    let mut e = max_of(x.chunks(traj.m).map(|xi| linalg::dist(xi, &p)));
                    for s in &sets {
                        e = e.max(s.distance(&p)?);
                    }
                    limit_err = limit_err.max(e);
                }
                Err(err) => recon_failures.push(format!("seed {seed}: {err}")),
            }
        }
        let cols = ctx.columns(&obj, traj, Some(&z));
        ctx.emit(&format!("seed{seed}"), seed, &law, traj, &cols)?;
    }
    let mut dini = ClaimResult::new(
        "lyapunov.nonincreasing",
        "Lemma 5",
        dini_ok,
        format!("forward differences of V = max_i |x_i - z*|^2 within slack {slack:.0e}*max(1,V); worst excess {dini_worst:.3e}"),
    )
    .with_margin(-dini_worst);
    dini.first_violation = first_violation;
    claims.push(dini);
    claims.push(ClaimResult::at_most(
        "lyapunov.common_limit",
        "Lemma 6",
        "max_ij |V_i(tf) - V_j(tf)|",
        spread,
        spread_tol,
    ));
    claims.push(ClaimResult::at_most(
        "switching.node_optimum",
        "Lemma 7",
        "max terminal node-optimum residual",
        resid,
        resid_tol,
    ));
    claims.push(match (&witnesses, recon_failures.is_empty()) {
        (None, _) => ClaimResult::new(
            "switching.optimal_consensus",
            "Lemma 8",
            false,
            "no interior point of the argmin intersection; limit reconstruction undecided",
        ),
        (Some(_), false) => ClaimResult::new(
            "switching.optimal_consensus",
            "Lemma 8",
            false,
            format!(
                "sphere reconstruction failed: {}",
                recon_failures.join("; ")
            ),
        ),
        (Some(_), true) => ClaimResult::at_most(
            "switching.optimal_consensus",
            "Lemma 8",
            "max distance of nodes (and of argmin sets) to the reconstructed limit",
            limit_err,
            cons_tol,
        ),
    });
    Ok(claims)
}

/// Point determined by the node-averaged terminal squared distances to the
/// witnesses.
fn limit_point(traj: &Trajectory<f64>, witnesses: &[Vec<f64>]) -> crate::Result<Vec<f64>> {
    let x = traj.last_state();
    let n = traj.n_nodes as f64;
    let d: Vec<f64> = witnesses
        .iter()
        .map(|w| {
            x.chunks(traj.m)
                .map(|xi| {
                    let r = linalg::dist(xi, w);
                    r * r
                })
                .sum::<f64>()
                / n
        })
        .collect();
    sphere_intersection(witnesses, &d).or_else(|e| match e {
        // Averaging distances of nearly-agreeing nodes leaves a small
        // inconsistency; the linear part still pins down the point.
        crate::Error::NoSolution(_) => least_inconsistent(witnesses, &d),
        e => Err(e),
    })
}

fn least_inconsistent(witnesses: &[Vec<f64>], d: &[f64]) -> crate::Result<Vec<f64>> {
    let z1 = &witnesses[0];
    let n1 = linalg::dot(z1, z1);
    let rows: Vec<Vec<f64>> = witnesses[1..].iter().map(|z| linalg::sub(z, z1)).collect();
    let rhs: Vec<f64> = witnesses[1..]
        .iter()
        .zip(&d[1..])
        .map(|(z, dj)| 0.5 * (d[0] - dj + linalg::dot(z, z) - n1))
        .collect();
    linalg::Matrix::from_rows(&rows)?.solve(&rhs)
}

fn audit(ctx: &Ctx) -> Result<Vec<ClaimResult>, HarnessError> {
    let cfg = ctx.cfg;
    let s = cfg.scenario(cfg.seed, None)?;
    let grid = cfg
        .analysis
        .k_grid
        .clone()
        .unwrap_or_else(|| DEFAULT_K_GRID.to_vec());
    let rep = analysis::audit_assumptions(&s, &grid)?;
    let tri = |v: Option<bool>| match v {
        Some(true) => "holds",
        Some(false) => "violated",
        None => "unverifiable",
    };
    let mut claims = vec![
        ClaimResult::new(
            "audit.coercive",
            "Assumption A4",
            true,
            format!("separable objective coercive: {}", rep.coercive),
        ),
        ClaimResult::new(
            "audit.bounded_minimizers",
            "Assumption A4",
            rep.a4 != Some(false),
            format!("bounded argmin of F: {}", tri(rep.a4)),
        ),
        ClaimResult::new(
            "audit.minimizer_exists",
            "Assumption A5",
            rep.minimizer_exists != Some(false),
            format!(
                "argmin F nonempty: {}{}",
                tri(rep.minimizer_exists),
                rep.global_min
                    .as_ref()
                    .map(|g| format!("; F* = {:.6e} ({})", g.value, method_name(&g.method)))
                    .unwrap_or_default()
            ),
        ),
        ClaimResult::new(
            "audit.stationary_grid",
            "Assumption A5",
            rep.grid_bounded != Some(false),
            format!(
                "stationary sets bounded over K grid {grid:?}: {}",
                tri(rep.grid_bounded)
            ),
        ),
    ];
    let connectivity = match &s.topology {
        Topology::Fixed(g) => (
            g.is_strongly_connected(),
            "fixed graph strongly connected".to_string(),
        ),
        Topology::Switching(sig) => match cfg.analysis.ujsc_window {
            Some(w) => (sig.check_ujsc(w), format!("UJSC with window {w}")),
            None => (
                true,
                "switching signal; no ujsc_window given, not checked".to_string(),
            ),
        },
    };
    claims.push(ClaimResult::new(
        "audit.connectivity",
        "Theorem 1",
        connectivity.0,
        connectivity.1,
    ));
    if !rep.notes.is_empty() {
        claims[0]
            .detail
            .push_str(&format!(" [{}]", rep.notes.join("; ")));
    }
    Ok(claims)
}

fn method_name(m: &MinMethod<f64>) -> String {
    match m {
        MinMethod::ClosedForm => "closed form".into(),
        MinMethod::Intersection => "argmin intersection".into(),
        MinMethod::Numerical { grad_norm } => format!("numerical, |grad| = {grad_norm:.1e}"),
    }
}

/// One line of a gain sweep. Simulation columns are empty for `K = 0`,
/// oracle columns when the objectives are not plain quadratics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub k: f64,
    pub terminal_diameter: Option<f64>,
    /// `max_i F(x_i(tf)) - F*`
    pub optimality_gap: Option<f64>,
    pub oracle_diameter: Option<f64>,
    /// `|p|_M` of the stationary point
    pub oracle_disagreement: Option<f64>,
    /// `max |x(tf) - x_K|`
    pub oracle_error: Option<f64>,
    pub bound: Option<f64>,
    pub bound_margin: Option<f64>,
}

/// Terminal metrics per gain with the stationary-set oracle alongside.
/// Writes `<name>_sweep.csv` when an output directory is given.
pub fn sweep_k(
    cfg: &ScenarioConfig,
    k_grid: &[f64],
    opts: &RunOptions,
) -> Result<Vec<SweepRow>, HarnessError> {
    let cfg = resolve(cfg, opts)?;
    if k_grid.iter().any(|&k| !(k >= 0.0) || !k.is_finite()) {
        return Err(requirement("gains must be finite and nonnegative"));
    }
    let obj = cfg.objective_set()?;
    let topo = cfg.topology()?;
    let g = thm2_graph(&topo)?;
    let plain_quadratic = obj.quadratic_blocks().is_some();
    let sq_dist_or_quadratic = obj.components().iter().all(|c| {
        matches!(
            c,
            crate::objectives::ConvexComponent::Quadratic { .. }
                | crate::objectives::ConvexComponent::SqDist(_)
        )
    });
    if !plain_quadratic && !sq_dist_or_quadratic {
        return Err(requirement(
            "sweep-k needs quadratic or squared-distance objectives",
        ));
    }
    let f_star = global_min(&obj)?.value;
    let points: Vec<Option<StationaryPoint<f64>>> = k_grid
        .iter()
        .map(|&k| {
            if plain_quadratic {
                stationary_quadratic(&obj, g, k).ok()
            } else {
                None
            }
        })
        .collect();
    let present: Vec<StationaryPoint<f64>> = points.iter().flatten().cloned().collect();
    let l0 = if present.is_empty() {
        None
    } else {
        Some(estimate_l0(&obj, &present)?)
    };
    let lambda2 = g.lambda2().ok();

    let fp = fingerprint(&cfg);
    let mut rows = Vec::with_capacity(k_grid.len());
    for (&k, sp) in k_grid.iter().zip(&points) {
        let mut row = SweepRow {
            k,
            terminal_diameter: None,
            optimality_gap: None,
            oracle_diameter: sp.as_ref().map(|p| consensus_diameter(&p.x, obj.dim())),
            oracle_disagreement: sp.as_ref().map(|p| p.disagreement),
            oracle_error: None,
            bound: None,
            bound_margin: None,
        };
        if k > 0.0 {
            let mut s = cfg.scenario(cfg.seed, Some(ControlLaw::JK(k)))?;
            s.law = ControlLaw::JK(k);
            let mut traj = integrate(&s)?;
            traj.fingerprint = Some(fp.clone());
            let x = traj.last_state();
            row.terminal_diameter = Some(consensus_diameter(x, traj.m));
            row.optimality_gap = Some(
                x.chunks(traj.m)
                    .map(|xi| obj.total(xi).map(|f| f - f_star))
                    .collect::<crate::Result<Vec<_>>>()?
                    .into_iter()
                    .fold(f64::NEG_INFINITY, f64::max),
            );
            if let (Some(sp), Some(l0), Some(l2)) = (sp, l0, lambda2) {
                row.oracle_error = Some(linalg::max_abs(&linalg::sub(x, &sp.x)));
                let bc = check_disagreement_bound(sp, l0, l2)?;
                row.bound = Some(bc.bound);
                row.bound_margin = Some(bc.margin);
            }
        }
        rows.push(row);
    }
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(format!("{}_sweep.csv", cfg.name));
        let mut w =
            csv::Writer::from_path(&path).map_err(|e| HarnessError::Trace(e.to_string()))?;
        for r in &rows {
            w.serialize(r)
                .map_err(|e| HarnessError::Trace(e.to_string()))?;
        }
        w.flush().map_err(io_err(&path))?;
    }
    Ok(rows)
}

fn graph_json(g: &WeightedDigraph<f64>) -> Value {
    json!({
        "arcs": g.arcs().map(|(f, t, w)| json!({"from": f, "to": t, "weight": w})).collect::<Vec<_>>(),
        "strongly_connected": g.is_strongly_connected(),
        "spanning_tree": g.has_spanning_tree(),
        "bidirectional": g.is_bidirectional(),
        "symmetric_weights": g.has_symmetric_weights(),
        "lambda2": g.lambda2().ok(),
    })
}

/// Connectivity facts about the configured topology.
pub fn graph_report(cfg: &ScenarioConfig) -> Result<Value, HarnessError> {
    Ok(match cfg.topology()? {
        Topology::Fixed(g) => {
            json!({"type": "fixed", "n_nodes": g.n_nodes(), "graph": graph_json(&g)})
        }
        Topology::Switching(sig) => {
            let (horizon, default_window) = match sig.horizon() {
                Horizon::Periodic(p) => (json!({"period": p}), Some(p)),
                Horizon::Until(e) => (json!({"end": e}), None),
            };
            let window = cfg.analysis.ujsc_window.or(default_window);
            json!({
                "type": "switching",
                "n_nodes": sig.n_nodes(),
                "dwell": sig.dwell(),
                "horizon": horizon,
                "modes": sig.modes().iter().map(|m| json!({"start": m.start, "graph": graph_json(&m.graph)})).collect::<Vec<_>>(),
                "window": window,
                "ujsc": window.map(|w| sig.check_ujsc(w)),
                "ujqsc": window.map(|w| sig.check_ujqsc(w)),
            })
        }
    })
}

/// Global minimum of `F` and, on a fixed graph with quadratic objectives,
/// the stationary points for the configured gains.
pub fn oracle_report(cfg: &ScenarioConfig) -> Result<Value, HarnessError> {
    let obj = cfg.objective_set()?;
    let gm = global_min(&obj)?;
    let intersection = match obj.common_minimizers() {
        Ok(Intersection::NonEmpty { witness }) => json!({"status": "nonempty", "witness": witness}),
        Ok(Intersection::Empty) => json!({"status": "empty"}),
        Ok(Intersection::Undecided) => json!({"status": "undecided"}),
        Err(e) => json!({"status": "unsupported", "reason": e.to_string()}),
    };
    let mut out = json!({
        "global_min": {"value": gm.value, "minimizer": gm.minimizer, "method": method_name(&gm.method)},
        "argmin_intersection": intersection,
    });
    let topo = cfg.topology()?;
    if let (Some(g), Some(_)) = (topo.fixed_graph(), obj.quadratic_blocks()) {
        let gains = match (&cfg.analysis.k_grid, &cfg.law) {
            (Some(grid), _) => grid.clone(),
            (None, LawConfig::Jk { k }) => vec![*k],
            (None, LawConfig::Jstar) => vec![1.0],
        };
        let mut rows = Vec::new();
        for k in gains {
            rows.push(match stationary_linear(&obj, g, k) {
                Ok(sp) => json!({
                    "k": k,
                    "x": sp.x,
                    "residual": sp.residual,
                    "diameter": consensus_diameter(&sp.x, obj.dim()),
                    "disagreement": sp.disagreement,
                }),
                Err(e) => json!({"k": k, "error": e.to_string()}),
            });
        }
        out["stationary"] = Value::Array(rows);
    }
    Ok(out)
}
