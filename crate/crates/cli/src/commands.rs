//! `fuse`, `union` and `deconflict`.

use std::time::Instant;

use clap::ValueEnum;
use covfuse_core::estimate::mahalanobis;
use covfuse_core::mee::{cross_check, solve_mee};
use covfuse_core::{ci_fuse, cu_union, gcu_direct, kalman_fuse, Estimate, SearchStatus};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::record::{finite, Branch, CrossCheckSummary, Diagnostics, PairDistance, RunRecord, SolverSummary};
use crate::scenario::{digest, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FuseMethod {
    Kf,
    Ci,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnionMethod {
    #[default]
    Cu,
    GcuDirect,
    GcuMee,
}

impl FuseMethod {
    pub fn name(self) -> &'static str {
        match self {
            FuseMethod::Kf => "kf",
            FuseMethod::Ci => "ci",
        }
    }
}

impl UnionMethod {
    pub fn name(self) -> &'static str {
        match self {
            UnionMethod::Cu => "cu",
            UnionMethod::GcuDirect => "gcu-direct",
            UnionMethod::GcuMee => "gcu-mee",
        }
    }
}

/// A parsed scenario with the digest of the bytes it came from.
#[derive(Debug, Clone)]
pub struct Input {
    pub scenario: Scenario,
    pub digest: String,
    pub seed: u64,
}

impl Input {
    pub fn parse(bytes: &[u8], env_seed: Option<&str>, flag_seed: Option<u64>) -> CliResult<Self> {
        let scenario = Scenario::from_json(bytes)?;
        let seed = crate::scenario::resolve_seed(scenario.config.seed, env_seed, flag_seed)?;
        Ok(Self { scenario, digest: digest(bytes), seed })
    }

    pub fn from_scenario(scenario: Scenario) -> CliResult<Self> {
        scenario.validate()?;
        let seed = scenario.config.seed;
        let digest = digest(scenario.to_json().as_bytes());
        Ok(Self { scenario, digest, seed })
    }

    fn record(&self, command: &str, method: &str) -> RunRecord {
        RunRecord {
            command: command.into(),
            method: method.into(),
            input_digest: self.digest.clone(),
            seed: self.seed,
            inputs: self.scenario.estimates.clone(),
            results: Vec::new(),
            weights: None,
            objective: None,
            diagnostics: Diagnostics::default(),
            wall_time_ms: 0.0,
        }
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

pub fn cmd_fuse(input: &Input, method: FuseMethod) -> CliResult<RunRecord> {
    let start = Instant::now();
    let mut rec = input.record("fuse", method.name());
    let es = &input.scenario.estimates;
    let r = match method {
        FuseMethod::Kf => kalman_fuse(es)?,
        FuseMethod::Ci if es.len() == 1 => kalman_fuse(es).map(|mut r| {
            r.weights = Some(covfuse_core::OmegaWeights(vec![1.0]));
            r
        })?,
        FuseMethod::Ci => ci_fuse(es, &input.scenario.config.ci)?,
    };
    rec.results = vec![r.estimate];
    rec.weights = r.weights.map(|w| w.0);
    rec.objective = finite(r.objective);
    rec.diagnostics.status = Some(r.status);
    rec.wall_time_ms = elapsed_ms(start);
    Ok(rec)
}

fn run_union(input: &Input, method: UnionMethod, rec: &mut RunRecord) -> CliResult<()> {
    let cfg = &input.scenario.config;
    let es = &input.scenario.estimates;
    match method {
        UnionMethod::Cu | UnionMethod::GcuDirect => {
            let r = if method == UnionMethod::Cu {
                cu_union(es, &cfg.union_config())?
            } else {
                gcu_direct(es, &cfg.union_config())?
            };
            rec.objective = finite(r.objective);
            rec.results = vec![r.estimate];
            rec.weights = r.omegas.map(|w| w.0);
            rec.diagnostics.active = Some(r.active);
            rec.diagnostics.status = Some(r.status);
        }
        UnionMethod::GcuMee => {
            let r = solve_mee(es, &cfg.mee_config())?;
            rec.objective = finite(r.objective);
            rec.results = vec![r.estimate];
            rec.diagnostics.active = Some(r.active);
            rec.diagnostics.tau = Some(r.tau);
            rec.diagnostics.nested = r.nested;
            rec.diagnostics.solver = r.report.as_ref().map(SolverSummary::from);
            rec.diagnostics.status = Some(SearchStatus::Converged);
        }
    }
    Ok(())
}

pub fn cmd_union(input: &Input, method: UnionMethod, check: bool) -> CliResult<RunRecord> {
    let start = Instant::now();
    let mut rec = input.record("union", method.name());
    run_union(input, method, &mut rec)?;
    if check {
        let cfg = input.scenario.config.cross_check_config();
        let c = cross_check(&input.scenario.estimates, &cfg)?;
        let summary = CrossCheckSummary {
            direct_objective: c.direct.objective,
            mee_objective: c.mee.objective,
            logdet_gap: c.logdet_gap,
            logdet_tol: cfg.logdet_tol,
            direct_encloses: c.direct_encloses,
            mee_gcu_feasible: c.mee_gcu_feasible,
            containment: c.containment,
            max_tau: c.mee.tau.iter().copied().fold(0.0, f64::max),
            passed: c.passed(cfg.logdet_tol),
        };
        if !summary.passed {
            rec.diagnostics.check_failures.push(format!(
                "direct and enclosing-ellipsoid solutions disagree (log det gap {:e}, direct encloses {}, \
                 enclosing ellipsoid GCU-feasible {}, sampled containment {})",
                summary.logdet_gap, summary.direct_encloses, summary.mee_gcu_feasible, summary.containment
            ));
        }
        rec.diagnostics.cross_check = Some(summary);
    }
    rec.wall_time_ms = elapsed_ms(start);
    Ok(rec)
}

/// Squared Mahalanobis distance of every pair of inputs.
pub fn pairwise_distances(es: &[Estimate]) -> CliResult<Vec<PairDistance>> {
    let mut out = Vec::new();
    for i in 0..es.len() {
        for j in i + 1..es.len() {
            out.push(PairDistance { i, j, distance: mahalanobis(&es[i], &es[j])? });
        }
    }
    Ok(out)
}

/// Fusion when every pair passes the gate, union otherwise.
pub fn choose_branch(distances: &[PairDistance], gate: f64) -> Branch {
    if distances.iter().any(|d| d.distance > gate) {
        Branch::Union
    } else {
        Branch::Fusion
    }
}

pub fn cmd_deconflict(input: &Input, gate: Option<f64>, method: UnionMethod) -> CliResult<RunRecord> {
    let start = Instant::now();
    let gate = gate.unwrap_or(input.scenario.config.gate);
    if !(gate.is_finite() && gate >= 0.0) {
        return Err(CliError::Input(format!("gate must be a nonnegative number, got {gate}")));
    }
    let distances = pairwise_distances(&input.scenario.estimates)?;
    let branch = choose_branch(&distances, gate);
    let mut rec = match branch {
        Branch::Union => {
            let mut rec = input.record("deconflict", method.name());
            run_union(input, method, &mut rec)?;
            rec
        }
        Branch::Fusion => {
            let mut rec = cmd_fuse(input, FuseMethod::Ci)?;
            rec.command = "deconflict".into();
            rec
        }
    };
    rec.diagnostics.branch = Some(branch);
    rec.diagnostics.gate = Some(gate);
    rec.diagnostics.distances = Some(distances);
    rec.wall_time_ms = elapsed_ms(start);
    Ok(rec)
}

/// Result estimate to draw for a record: the first result.
pub fn solution(rec: &RunRecord) -> CliResult<&Estimate> {
    rec.results
        .first()
        .ok_or_else(|| CliError::Input("record holds no result estimate".into()))
}
