//! Reference strategies: a fixed uniform planar array (UPA) whose precoder is
//! tuned by the swarm, and independent random feasible draws.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{CovarianceModel, Layout, Scenario};
use crate::constraints::{penalized_fitness, FitnessValue, PenaltyConfig};
use crate::error::{Error, Result};
use crate::pso::{decode, encode_layout, random_layout, random_precoder, Objective, PrecoderProblem};
use crate::rng::Streams;
use crate::swarm::{run_swarm, PsoConfig};
use crate::trace::{OptTrace, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineKind {
    UpaPrecoderPso,
    RandomStrategy,
}

/// Most-square grid with `rows * cols >= n`: `cols = ceil(sqrt n)`.
fn grid_shape(n: usize) -> (usize, usize) {
    let cols = (n as f64).sqrt().ceil() as usize;
    (n.div_ceil(cols), cols)
}

/// Regular grid with spacing `d_min`, anchored `d_min` inside the region's
/// lower-left corner and filled row by row.
pub fn upa_layout(scenario: &Scenario) -> Result<Layout> {
    let n = scenario.n_antennas;
    let (rows, cols) = grid_shape(n);
    let d = scenario.d_min;
    let r = scenario.region;
    let x_end = r.x.0 + cols as f64 * d;
    let y_end = r.y.0 + rows as f64 * d;
    if x_end > r.x.1 || y_end > r.y.1 {
        return Err(Error::LayoutDoesNotFit(format!("{rows}x{cols} grid at spacing {d} needs ({x_end}, {y_end})")));
    }
    let positions = (0..n)
        .map(|k| {
            let (row, col) = (k / cols, k % cols);
            [r.x.0 + (col + 1) as f64 * d, r.y.0 + (row + 1) as f64 * d]
        })
        .collect();
    Ok(Layout::new(positions))
}

/// Precoder-only swarm on the fixed UPA.
pub fn run_upa_baseline(
    scenario: &Scenario,
    model: &CovarianceModel,
    cfg: &PsoConfig,
    penalty: PenaltyConfig,
    streams: Streams,
) -> Result<OptTrace> {
    scenario.validate()?;
    cfg.validate()?;
    let layout = upa_layout(scenario)?;
    let problem = PrecoderProblem::new(Objective { scenario, model, penalty }, layout.clone());
    let run = run_swarm(&problem, cfg, streams, &[]);
    let mut full = run.best_position.clone();
    full.extend(encode_layout(&layout));
    let (best_precoder, _) = decode(&full, scenario.n_antennas, scenario.n_pilots)?;
    Ok(OptTrace { records: run.records, best_precoder, best_layout: layout, best: run.best })
}

/// Outcome of the random strategy: the running-maximum trace plus the raw
/// per-trial rates.
#[derive(Debug, Clone)]
pub struct RandomRun {
    pub trace: OptTrace,
    pub per_trial: Vec<f64>,
}

/// Draw attempts per trial before giving up on a feasible layout.
pub const RANDOM_LAYOUT_TRIES: usize = 1000;

/// Independent feasible draws of `(P, T)`; the trace holds the running best
/// after each trial.
pub fn run_random_baseline(
    scenario: &Scenario,
    model: &CovarianceModel,
    n_trials: usize,
    streams: Streams,
) -> Result<RandomRun> {
    scenario.validate()?;
    if n_trials == 0 {
        return Err(Error::InvalidConfig("n_trials must be at least 1".into()));
    }
    let start = std::time::Instant::now();
    let penalty = PenaltyConfig { coefficient: 0.0, d_min: scenario.d_min };
    let draws: Vec<(crate::kgr::Precoder, Layout, FitnessValue)> = (0..n_trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.child("trial", i as u64);
            let p = random_precoder(scenario, &mut rng);
            let (layout, feasible) = random_layout(scenario, &mut rng, RANDOM_LAYOUT_TRIES);
            if !feasible {
                return Err(Error::SamplingExhausted(RANDOM_LAYOUT_TRIES));
            }
            let r = model.covariance(&layout);
            let f = penalized_fitness(&p, &layout, &r, scenario.noise_var, &penalty);
            Ok((p, layout, f))
        })
        .collect::<Result<_>>()?;

    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let mut best_idx = 0;
    let mut records = Vec::with_capacity(n_trials);
    for (i, (_, _, f)) in draws.iter().enumerate() {
        if f.fitness > draws[best_idx].2.fitness {
            best_idx = i;
        }
        records.push(TraceRecord::new(i, &draws[best_idx].2, elapsed));
    }
    let per_trial = draws.iter().map(|d| d.2.raw_kgr).collect();
    let (p, l, f) = draws.into_iter().nth(best_idx).expect("n_trials >= 1");
    Ok(RandomRun { trace: OptTrace { records, best_precoder: p, best_layout: l, best: f }, per_trial })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_paths, Region};
    use crate::constraints::spacing_penalty;

    #[test]
    fn upa_two_by_two() {
        let s = Scenario { wavelength: 1.0, d_min: 0.5, ..Scenario::default() };
        let l = upa_layout(&s).unwrap();
        assert_eq!(l.positions, vec![[0.5, 0.5], [1.0, 0.5], [0.5, 1.0], [1.0, 1.0]]);
        assert_eq!(spacing_penalty(&l, s.d_min), 0.0);
    }

    #[test]
    fn upa_shapes() {
        let s = Scenario { n_antennas: 9, ..Scenario::default() };
        let l = upa_layout(&s).unwrap();
        assert_eq!(l.len(), 9);
        assert_eq!(l.positions[8], [1.5, 1.5]);
        assert_eq!(spacing_penalty(&l, s.d_min), 0.0);
        assert_eq!(grid_shape(5), (2, 3));
        assert_eq!(grid_shape(7), (3, 3));
        let s = Scenario { n_antennas: 5, ..Scenario::default() };
        let l = upa_layout(&s).unwrap();
        assert_eq!(l.positions[3], [0.5, 1.0]);
        assert!(l.positions.iter().all(|&p| s.region.contains(p)));
    }

    #[test]
    fn upa_must_fit() {
        let s = Scenario { n_antennas: 4, region: Region::square(0.0, 0.9), ..Scenario::default() };
        assert!(matches!(upa_layout(&s), Err(Error::LayoutDoesNotFit(_))));
    }

    #[test]
    fn upa_baseline_searches_precoder_only() {
        let s = Scenario { seed: 2, ..Scenario::default() };
        let m = CovarianceModel::analytic(&s, sample_paths(&s));
        let problem = PrecoderProblem::new(
            Objective { scenario: &s, model: &m, penalty: PenaltyConfig::default() },
            upa_layout(&s).unwrap(),
        );
        assert_eq!(crate::swarm::SwarmProblem::dim(&problem), 2 * 4 * 4);
        let cfg = PsoConfig { n_particles: 10, max_iters: 20, ..PsoConfig::default() };
        let t = run_upa_baseline(&s, &m, &cfg, PenaltyConfig::default(), Streams::new(3)).unwrap();
        assert!(t.is_monotone());
        assert_eq!(t.best_layout, upa_layout(&s).unwrap());
        assert!((t.best_precoder.power() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn random_baseline_properties() {
        let s = Scenario { seed: 4, ..Scenario::default() };
        let m = CovarianceModel::analytic(&s, sample_paths(&s));
        let run = run_random_baseline(&s, &m, 64, Streams::new(1)).unwrap();
        assert_eq!(run.trace.records.len(), 64);
        assert!(run.trace.is_monotone());
        let max = run.per_trial.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(run.trace.final_kgr(), max);
        assert_eq!(spacing_penalty(&run.trace.best_layout, s.d_min), 0.0);
        assert!((run.trace.best_precoder.power() - 1.0).abs() < 1e-9);
        assert!(run_random_baseline(&s, &m, 0, Streams::new(1)).is_err());
    }

    #[test]
    fn random_baseline_exhausts_on_cramped_region() {
        // Feasible in principle (corners of the square) but practically never drawn.
        let s = Scenario { n_antennas: 4, region: Region::square(0.0, 0.5), ..Scenario::default() };
        let m = CovarianceModel::analytic(&s, sample_paths(&s));
        assert!(matches!(run_random_baseline(&s, &m, 2, Streams::new(1)), Err(Error::SamplingExhausted(_))));
    }
}
