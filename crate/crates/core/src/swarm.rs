//! Particle swarm engine with a linearly decreasing inertia weight.
//!
//! Each iteration moves every particle with
//! `v <- w v + c1 r1 o (pbest - x) + c2 r2 o (gbest - x)`, `x <- x + v`,
//! repairs the position onto the problem's feasible set, and evaluates it.
//! Evaluations run in parallel; personal and global bests are then updated
//! in particle order with strict improvement, so results do not depend on
//! the worker count.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::FitnessValue;
use crate::error::{Error, Result};
use crate::rng::{StreamRng, Streams};
use crate::trace::TraceRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsoConfig {
    pub n_particles: usize,
    pub max_iters: usize,
    pub c1: f64,
    pub c2: f64,
    pub w_max: f64,
    pub w_min: f64,
    /// Velocity clamp per dimension, as a fraction of that dimension's range.
    pub v_max: Option<f64>,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self { n_particles: 50, max_iters: 200, c1: 1.5, c2: 1.5, w_max: 0.9, w_min: 0.4, v_max: Some(0.1) }
    }
}

impl PsoConfig {
    /// Smaller swarm used for the layout phase of alternating optimization.
    pub fn layout_phase() -> Self {
        Self { n_particles: 30, max_iters: 150, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_particles == 0 {
            return bad("n_particles must be positive");
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return bad("c1 and c2 must be positive");
        }
        if !(self.w_max >= self.w_min) {
            return bad("w_max must be at least w_min");
        }
        if let Some(v) = self.v_max {
            if !(v > 0.0) {
                return bad("v_max must be positive");
            }
        }
        Ok(())
    }
}

/// `w(t) = w_max - (w_max - w_min) t / T_max`.
pub fn inertia_weight(t: usize, cfg: &PsoConfig) -> f64 {
    if cfg.max_iters == 0 {
        return cfg.w_max;
    }
    cfg.w_max - (cfg.w_max - cfg.w_min) / cfg.max_iters as f64 * t as f64
}

/// A search space the swarm can explore.
pub trait SwarmProblem: Sync {
    fn dim(&self) -> usize;

    /// Width of each coordinate's nominal range, used for velocity limits.
    fn spans(&self) -> Vec<f64>;

    /// Random feasible starting point.
    fn initial_position(&self, rng: &mut StreamRng) -> Vec<f64>;

    /// Maps a raw position back onto the feasible set in place.
    fn repair(&self, x: &mut [f64]);

    fn evaluate(&self, x: &[f64]) -> FitnessValue;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub personal_best_position: Vec<f64>,
    pub personal_best: FitnessValue,
}

#[derive(Debug, Clone)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub global_best_position: Vec<f64>,
    pub global_best: FitnessValue,
    /// Number of completed update steps.
    pub iteration: usize,
    v_limit: Option<Vec<f64>>,
    streams: Streams,
}

impl Swarm {
    /// Initializes the swarm. The first `seeds.len()` particles start at the
    /// given positions (after repair); the rest start at random.
    pub fn new<P: SwarmProblem>(problem: &P, cfg: &PsoConfig, streams: Streams, seeds: &[Vec<f64>]) -> Self {
        let dim = problem.dim();
        let spans = problem.spans();
        let v_limit = cfg.v_max.map(|f| spans.iter().map(|s| f * s).collect::<Vec<f64>>());

        let starts: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.n_particles)
            .map(|m| {
                let mut rng = streams.child("init", m as u64);
                let mut x = match seeds.get(m) {
                    Some(s) => s.clone(),
                    None => problem.initial_position(&mut rng),
                };
                assert_eq!(x.len(), dim, "seed position has wrong dimension");
                problem.repair(&mut x);
                let v = match &v_limit {
                    Some(lim) => lim.iter().map(|&l| if l > 0.0 { rng.random_range(-l..=l) } else { 0.0 }).collect(),
                    None => vec![0.0; dim],
                };
                (x, v)
            })
            .collect();
        let fits: Vec<FitnessValue> = starts.par_iter().map(|(x, _)| problem.evaluate(x)).collect();

        let particles: Vec<Particle> = starts
            .into_iter()
            .zip(fits)
            .map(|((x, v), f)| Particle { personal_best_position: x.clone(), position: x, velocity: v, personal_best: f })
            .collect();
        let mut best = 0;
        for (m, p) in particles.iter().enumerate() {
            if p.personal_best.fitness > particles[best].personal_best.fitness {
                best = m;
            }
        }
        Self {
            global_best_position: particles[best].position.clone(),
            global_best: particles[best].personal_best.clone(),
            particles,
            iteration: 0,
            v_limit,
            streams,
        }
    }

    /// One synchronous velocity/position update of every particle.
    pub fn step<P: SwarmProblem>(&mut self, problem: &P, cfg: &PsoConfig) {
        let t = self.iteration + 1;
        let w = inertia_weight(t, cfg);
        let gbest = &self.global_best_position;
        let v_limit = self.v_limit.as_deref();
        let streams = self.streams;
        let n = self.particles.len() as u64;

        let fits: Vec<FitnessValue> = self
            .particles
            .par_iter_mut()
            .enumerate()
            .map(|(m, p)| {
                let mut rng = streams.child("step", t as u64 * n + m as u64);
                for d in 0..p.position.len() {
                    let r1: f64 = rng.random();
                    let r2: f64 = rng.random();
                    let x = p.position[d];
                    let mut v = w * p.velocity[d]
                        + cfg.c1 * r1 * (p.personal_best_position[d] - x)
                        + cfg.c2 * r2 * (gbest[d] - x);
                    if let Some(lim) = v_limit {
                        v = v.clamp(-lim[d], lim[d]);
                    }
                    p.velocity[d] = v;
                    p.position[d] = x + v;
                }
                problem.repair(&mut p.position);
                problem.evaluate(&p.position)
            })
            .collect();

        for (p, f) in self.particles.iter_mut().zip(fits) {
            if f.fitness > p.personal_best.fitness {
                p.personal_best_position.clone_from(&p.position);
                p.personal_best = f.clone();
            }
            if f.fitness > self.global_best.fitness {
                self.global_best_position.clone_from(&p.position);
                self.global_best = f;
            }
        }
        self.iteration = t;
    }
}

/// Result of a complete swarm run.
#[derive(Debug, Clone)]
pub struct SwarmRun {
    pub records: Vec<TraceRecord>,
    pub best_position: Vec<f64>,
    pub best: FitnessValue,
}

/// Initializes and iterates `cfg.max_iters` steps, recording the global best
/// after initialization and after every step.
pub fn run_swarm<P: SwarmProblem>(problem: &P, cfg: &PsoConfig, streams: Streams, seeds: &[Vec<f64>]) -> SwarmRun {
    let start = Instant::now();
    let ms = |s: &Instant| s.elapsed().as_secs_f64() * 1e3;
    let mut swarm = Swarm::new(problem, cfg, streams, seeds);
    let mut records = vec![TraceRecord::new(0, &swarm.global_best, ms(&start))];
    for _ in 0..cfg.max_iters {
        swarm.step(problem, cfg);
        records.push(TraceRecord::new(swarm.iteration, &swarm.global_best, ms(&start)));
    }
    SwarmRun { records, best_position: swarm.global_best_position, best: swarm.global_best }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    /// Concave bowl `-(x - c)^2` on a box, with a log of every evaluation.
    struct Bowl {
        center: Vec<f64>,
        log: Mutex<Vec<f64>>,
    }

    impl SwarmProblem for Bowl {
        fn dim(&self) -> usize {
            self.center.len()
        }
        fn spans(&self) -> Vec<f64> {
            vec![10.0; self.center.len()]
        }
        fn initial_position(&self, rng: &mut StreamRng) -> Vec<f64> {
            (0..self.dim()).map(|_| rng.random_range(-5.0..5.0)).collect()
        }
        fn repair(&self, x: &mut [f64]) {
            x.iter_mut().for_each(|v| *v = v.clamp(-5.0, 5.0));
        }
        fn evaluate(&self, x: &[f64]) -> FitnessValue {
            let f = -x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>();
            self.log.lock().unwrap().push(f);
            FitnessValue::new(f, 0.0, 0.0)
        }
    }

    fn bowl() -> Bowl {
        Bowl { center: vec![1.0, -2.0, 0.5], log: Mutex::new(Vec::new()) }
    }

    #[test]
    fn inertia_schedule() {
        let cfg = PsoConfig { max_iters: 200, ..PsoConfig::default() };
        assert_eq!(inertia_weight(0, &cfg), 0.9);
        assert!((inertia_weight(200, &cfg) - 0.4).abs() < 1e-15);
        assert!((inertia_weight(100, &cfg) - 0.65).abs() < 1e-15);
    }

    #[test]
    fn converges_on_bowl_and_tracks_max() {
        let p = bowl();
        let run = run_swarm(&p, &PsoConfig::default(), Streams::new(1), &[]);
        assert!(run.best.fitness > -1e-3, "best {}", run.best.fitness);
        assert!(run.records.windows(2).all(|w| w[1].best_fitness >= w[0].best_fitness));
        let max_seen = p.log.lock().unwrap().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(run.best.fitness, max_seen);
        assert_eq!(run.records.len(), 201);
    }

    #[test]
    fn zero_iterations_keeps_best_initial() {
        let p = bowl();
        let cfg = PsoConfig { max_iters: 0, ..PsoConfig::default() };
        let run = run_swarm(&p, &cfg, Streams::new(2), &[]);
        assert_eq!(run.records.len(), 1);
        let max_seen = p.log.lock().unwrap().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(run.best.fitness, max_seen);
    }

    #[test]
    fn degenerate_coefficients_freeze_positions() {
        let p = bowl();
        let cfg = PsoConfig { c1: 0.0, c2: 0.0, w_max: 0.0, w_min: 0.0, n_particles: 5, ..PsoConfig::default() };
        let mut swarm = Swarm::new(&p, &cfg, Streams::new(3), &[]);
        let before: Vec<Vec<f64>> = swarm.particles.iter().map(|q| q.position.clone()).collect();
        let best = swarm.global_best.clone();
        for _ in 0..5 {
            swarm.step(&p, &cfg);
        }
        for (q, b) in swarm.particles.iter().zip(&before) {
            for (x, y) in q.position.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        assert_eq!(swarm.global_best.fitness, best.fitness);
    }

    #[test]
    fn seeded_particle_is_used() {
        let p = bowl();
        let cfg = PsoConfig { max_iters: 0, ..PsoConfig::default() };
        let run = run_swarm(&p, &cfg, Streams::new(4), &[p.center.clone()]);
        assert_eq!(run.best.fitness, 0.0);
        assert_eq!(run.best_position, p.center);
    }

    #[test]
    fn deterministic_across_pool_sizes() {
        let cfg = PsoConfig { max_iters: 30, ..PsoConfig::default() };
        let a = run_swarm(&bowl(), &cfg, Streams::new(9), &[]);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_swarm(&bowl(), &cfg, Streams::new(9), &[]));
        assert_eq!(a.best_position, b.best_position);
        let fa: Vec<f64> = a.records.iter().map(|r| r.best_fitness).collect();
        let fb: Vec<f64> = b.records.iter().map(|r| r.best_fitness).collect();
        assert_eq!(fa, fb);
    }

    #[test]
    fn config_validation() {
        assert!(PsoConfig::default().validate().is_ok());
        assert!(PsoConfig { w_max: 0.1, w_min: 0.5, ..PsoConfig::default() }.validate().is_err());
        assert!(PsoConfig { c1: 0.0, ..PsoConfig::default() }.validate().is_err());
        assert!(PsoConfig { n_particles: 0, ..PsoConfig::default() }.validate().is_err());
    }
}
