//! Alternating optimization: projected gradient descent on the precoder with
//! the layout fixed, then a layout-only swarm with the precoder fixed.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::upa_layout;
use crate::channel::{ChannelCovariance, CovarianceModel, Layout, Scenario};
use crate::constraints::{penalized_fitness, project_power, FitnessValue, PenaltyConfig};
use crate::error::{Error, Result};
use crate::kgr::{kgr, kgr_gradient, Precoder};
use crate::pso::{encode_layout, random_precoder, LayoutProblem, Objective};
use crate::rng::Streams;
use crate::swarm::{run_swarm, PsoConfig};
use crate::trace::OptTrace;
use crate::C64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PgdConfig {
    pub max_steps: usize,
    /// Initial step size tried at every iteration.
    pub step_size: f64,
    /// Step shrink factor for backtracking.
    pub backtrack: f64,
    pub max_halvings: usize,
    /// Stop once the sphere-tangent gradient norm falls below this.
    pub grad_tol: f64,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self { max_steps: 100, step_size: 0.1, backtrack: 0.5, max_halvings: 20, grad_tol: 1e-6 }
    }
}

impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.grad_tol > 0.0 && self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidConfig("pgd step_size, grad_tol must be positive and backtrack in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PgdRun {
    pub precoder: Precoder,
    /// Loss `-R_sk` at the start and after every accepted step.
    pub losses: Vec<f64>,
    /// Sphere-tangent gradient norm at the returned precoder.
    pub tangent_norm: f64,
}

impl PgdRun {
    pub fn accepted_steps(&self) -> usize {
        self.losses.len() - 1
    }
}

fn frob(m: &crate::CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Projected gradient descent on `-R_sk` over the power sphere from `start`.
///
/// Each step tries `P - eta grad`, projected, halving `eta` until the loss
/// does not increase; a step that cannot be made ends the run.
pub fn pgd_from(start: &Precoder, r: &ChannelCovariance, scenario: &Scenario, cfg: &PgdConfig) -> Result<PgdRun> {
    cfg.validate()?;
    let noise = scenario.noise_var;
    let mut p = project_power(start, scenario.p_max)?;
    let mut loss = -kgr(&p, r, noise)?.bits;
    let mut grad = kgr_gradient(&p, r, noise)?;
    let mut tangent_norm = frob(&grad.tangent_to(&p));
    let mut losses = vec![loss];

    for _ in 0..cfg.max_steps {
        if tangent_norm < cfg.grad_tol {
            break;
        }
        let mut eta = cfg.step_size;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let moved = Precoder::new(&p.matrix - &grad.matrix * C64::new(eta, 0.0));
            if let Ok(cand) = project_power(&moved, scenario.p_max) {
                if let Ok(v) = kgr(&cand, r, noise) {
                    if -v.bits <= loss {
                        if let Ok(g) = kgr_gradient(&cand, r, noise) {
                            accepted = Some((cand, -v.bits, g));
                            break;
                        }
                    }
                }
            }
            eta *= cfg.backtrack;
        }
        let Some((cand, l, g)) = accepted else { break };
        p = cand;
        loss = l;
        grad = g;
        tangent_norm = frob(&grad.tangent_to(&p));
        losses.push(loss);
    }
    Ok(PgdRun { precoder: p, losses, tangent_norm })
}

/// Phase 1: PGD on the precoder for a fixed layout, from a random start.
pub fn pgd_precoder(
    layout: &Layout,
    scenario: &Scenario,
    model: &CovarianceModel,
    cfg: &PgdConfig,
    streams: Streams,
) -> Result<PgdRun> {
    let r = model.covariance(layout);
    let start = random_precoder(scenario, &mut streams.child("pgd-init", 0));
    pgd_from(&start, &r, scenario, cfg)
}

/// Phase 2: layout swarm with the precoder frozen. `incumbent`, if given,
/// seeds the first particle.
pub fn pso_layout(
    precoder: &Precoder,
    scenario: &Scenario,
    model: &CovarianceModel,
    cfg: &PsoConfig,
    penalty: PenaltyConfig,
    incumbent: Option<&Layout>,
    streams: Streams,
) -> Result<(Layout, OptTrace)> {
    cfg.validate()?;
    let problem = LayoutProblem { objective: Objective { scenario, model, penalty }, precoder: precoder.clone() };
    let seeds: Vec<Vec<f64>> = incumbent.map(encode_layout).into_iter().collect();
    let run = run_swarm(&problem, cfg, streams, &seeds);
    let layout = Layout::new(run.best_position.chunks_exact(2).map(|c| [c[0], c[1]]).collect());
    let trace = OptTrace { records: run.records, best_precoder: precoder.clone(), best_layout: layout.clone(), best: run.best };
    Ok((layout, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AoConfig {
    pub pgd: PgdConfig,
    pub pso: PsoConfig,
    /// Number of (PGD, swarm) passes; each pass starts from the incumbent.
    pub n_rounds: usize,
}

impl Default for AoConfig {
    fn default() -> Self {
        Self { pgd: PgdConfig::default(), pso: PsoConfig::layout_phase(), n_rounds: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct AoRound {
    pub pgd: PgdRun,
    pub pso: OptTrace,
    /// Penalized objective at the end of the round.
    pub best: FitnessValue,
}

#[derive(Debug, Clone)]
pub struct AoResult {
    pub best_precoder: Precoder,
    pub best_layout: Layout,
    pub best: FitnessValue,
    pub initial_layout: Layout,
    pub rounds: Vec<AoRound>,
    pub elapsed_ms: f64,
}

impl AoResult {
    pub fn best_kgr(&self) -> f64 {
        self.best.raw_kgr
    }

    /// KGR reached by the first PGD phase alone, on the initial layout.
    pub fn phase1_kgr(&self) -> f64 {
        -self.rounds[0].pgd.losses.last().copied().unwrap_or(f64::NAN)
    }

    /// `phase,round,iteration,objective` rows: PGD losses then swarm fitness.
    pub fn to_csv(&self, header: &str) -> String {
        use crate::trace::fmt_float;
        use std::fmt::Write as _;
        let mut out = String::from(header);
        out.push_str("phase,round,iteration,objective\n");
        for (k, round) in self.rounds.iter().enumerate() {
            for (i, l) in round.pgd.losses.iter().enumerate() {
                let _ = writeln!(out, "pgd,{},{},{}", k + 1, i, fmt_float(*l));
            }
            for r in &round.pso.records {
                let _ = writeln!(out, "pso,{},{},{}", k + 1, r.iteration, fmt_float(r.best_fitness));
            }
        }
        out
    }
}

/// Alternating optimization from the UPA layout.
pub fn run_ao(
    scenario: &Scenario,
    model: &CovarianceModel,
    cfg: &AoConfig,
    penalty: PenaltyConfig,
    streams: Streams,
) -> Result<AoResult> {
    scenario.validate()?;
    cfg.pgd.validate()?;
    cfg.pso.validate()?;
    let start = Instant::now();
    let initial_layout = upa_layout(scenario)?;
    let mut layout = initial_layout.clone();
    let mut precoder = random_precoder(scenario, &mut streams.child("pgd-init", 0));
    let mut rounds = Vec::with_capacity(cfg.n_rounds.max(1));

    for k in 0..cfg.n_rounds.max(1) {
        let r = model.covariance(&layout);
        let pgd = pgd_from(&precoder, &r, scenario, &cfg.pgd)?;
        precoder = pgd.precoder.clone();
        let (best_layout, trace) =
            pso_layout(&precoder, scenario, model, &cfg.pso, penalty, Some(&layout), streams.fork("layout", k as u64))?;
        layout = best_layout;
        rounds.push(AoRound { pgd, best: trace.best.clone(), pso: trace });
    }

    let r = model.covariance(&layout);
    let best = penalized_fitness(&precoder, &layout, &r, scenario.noise_var, &penalty);
    Ok(AoResult {
        best_precoder: precoder,
        best_layout: layout,
        best,
        initial_layout,
        rounds,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
