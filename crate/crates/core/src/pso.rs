//! Joint particle swarm over the precoder and the antenna layout.
//!
//! A particle is the real vector `Re(P) | Im(P) | x_1 y_1 ... x_N y_N`
//! (`2NS + 2N` coordinates, matrices row-major). After each move the precoder
//! block is rescaled onto the power sphere and the layout block clamped into
//! the region; minimum spacing is enforced only through the fitness penalty.

use rand::Rng;

use crate::channel::{CovarianceModel, Layout, Scenario};
use crate::constraints::{clamp_region, penalized_fitness, project_power, spacing_penalty, FitnessValue, PenaltyConfig};
use crate::error::{Error, Result};
use crate::kgr::Precoder;
use crate::rng::{StreamRng, Streams};
use crate::swarm::{run_swarm, PsoConfig, SwarmProblem};
use crate::trace::OptTrace;
use crate::{CMatrix, C64};

pub fn encode(p: &Precoder, layout: &Layout) -> Vec<f64> {
    let mut v = encode_precoder(p);
    v.extend(encode_layout(layout));
    v
}

pub fn decode(v: &[f64], n: usize, s: usize) -> Result<(Precoder, Layout)> {
    let want = 2 * n * s + 2 * n;
    if v.len() != want {
        return Err(Error::DimensionMismatch(format!("particle of length {} for N={n}, S={s} (expected {want})", v.len())));
    }
    let (pv, lv) = v.split_at(2 * n * s);
    Ok((decode_precoder(pv, n, s), decode_layout(lv)))
}

pub fn encode_precoder(p: &Precoder) -> Vec<f64> {
    let (n, s) = (p.n_antennas(), p.n_pilots());
    let mut v = Vec::with_capacity(2 * n * s);
    for part in [|z: C64| z.re, |z: C64| z.im] {
        for i in 0..n {
            for j in 0..s {
                v.push(part(p.matrix[(i, j)]));
            }
        }
    }
    v
}

fn decode_precoder(v: &[f64], n: usize, s: usize) -> Precoder {
    let (re, im) = v.split_at(n * s);
    Precoder::new(CMatrix::from_fn(n, s, |i, j| C64::new(re[i * s + j], im[i * s + j])))
}

pub fn encode_layout(layout: &Layout) -> Vec<f64> {
    layout.positions.iter().flat_map(|p| [p[0], p[1]]).collect()
}

fn decode_layout(v: &[f64]) -> Layout {
    Layout::new(v.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
}

/// Rescales the precoder block in place; an all-zero block is left alone.
fn repair_precoder(v: &mut [f64], p_max: f64) {
    let power: f64 = v.iter().map(|x| x * x).sum();
    if power > 0.0 && power.is_finite() {
        let scale = (p_max / power).sqrt();
        v.iter_mut().for_each(|x| *x *= scale);
    }
}

fn repair_layout(v: &mut [f64], scenario: &Scenario) {
    let r = scenario.region;
    for c in v.chunks_exact_mut(2) {
        c[0] = c[0].clamp(r.x.0, r.x.1);
        c[1] = c[1].clamp(r.y.0, r.y.1);
    }
}

fn precoder_spans(scenario: &Scenario) -> Vec<f64> {
    vec![2.0 * scenario.p_max.sqrt(); 2 * scenario.n_antennas * scenario.n_pilots]
}

fn layout_spans(scenario: &Scenario) -> Vec<f64> {
    let (w, h) = (scenario.region.width(), scenario.region.height());
    (0..scenario.n_antennas).flat_map(|_| [w, h]).collect()
}

/// Random precoder on the power sphere.
pub fn random_precoder<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Precoder {
    loop {
        let p = Precoder::random_gaussian(scenario.n_antennas, scenario.n_pilots, rng);
        if let Ok(p) = project_power(&p, scenario.p_max) {
            return p;
        }
    }
}

/// Uniform layout in the region, resampled up to `tries` times toward
/// pairwise feasibility. Returns the last draw if none was feasible.
pub fn random_layout<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R, tries: usize) -> (Layout, bool) {
    let mut last = None;
    for _ in 0..tries.max(1) {
        let l = Layout::new((0..scenario.n_antennas).map(|_| scenario.region.sample(rng)).collect());
        if spacing_penalty(&l, scenario.d_min) == 0.0 {
            return (l, true);
        }
        last = Some(l);
    }
    (last.expect("at least one draw"), false)
}

const INIT_LAYOUT_TRIES: usize = 100;

/// Shared objective context for the three swarm problems.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    pub scenario: &'a Scenario,
    pub model: &'a CovarianceModel,
    pub penalty: PenaltyConfig,
}

impl Objective<'_> {
    pub fn fitness(&self, p: &Precoder, layout: &Layout) -> FitnessValue {
        let r = self.model.covariance(layout);
        penalized_fitness(p, layout, &r, self.scenario.noise_var, &self.penalty)
    }
}

/// Search over `(P, T)` jointly.
pub struct JointProblem<'a>(pub Objective<'a>);

impl SwarmProblem for JointProblem<'_> {
    fn dim(&self) -> usize {
        let s = self.0.scenario;
        2 * s.n_antennas * s.n_pilots + 2 * s.n_antennas
    }

    fn spans(&self) -> Vec<f64> {
        let mut v = precoder_spans(self.0.scenario);
        v.extend(layout_spans(self.0.scenario));
        v
    }

    fn initial_position(&self, rng: &mut StreamRng) -> Vec<f64> {
        let p = random_precoder(self.0.scenario, rng);
        let (l, _) = random_layout(self.0.scenario, rng, INIT_LAYOUT_TRIES);
        encode(&p, &l)
    }

    fn repair(&self, x: &mut [f64]) {
        let s = self.0.scenario;
        let (pv, lv) = x.split_at_mut(2 * s.n_antennas * s.n_pilots);
        repair_precoder(pv, s.p_max);
        repair_layout(lv, s);
    }

    fn evaluate(&self, x: &[f64]) -> FitnessValue {
        let s = self.0.scenario;
        let (p, l) = decode(x, s.n_antennas, s.n_pilots).expect("particle length fixed by dim()");
        self.0.fitness(&p, &l)
    }
}

/// Search over the layout with the precoder frozen.
pub struct LayoutProblem<'a> {
    pub objective: Objective<'a>,
    pub precoder: Precoder,
}

impl SwarmProblem for LayoutProblem<'_> {
    fn dim(&self) -> usize {
        2 * self.objective.scenario.n_antennas
    }

    fn spans(&self) -> Vec<f64> {
        layout_spans(self.objective.scenario)
    }

    fn initial_position(&self, rng: &mut StreamRng) -> Vec<f64> {
        encode_layout(&random_layout(self.objective.scenario, rng, INIT_LAYOUT_TRIES).0)
    }

    fn repair(&self, x: &mut [f64]) {
        repair_layout(x, self.objective.scenario);
    }

    fn evaluate(&self, x: &[f64]) -> FitnessValue {
        self.objective.fitness(&self.precoder, &decode_layout(x))
    }
}

/// Search over the precoder with the layout frozen. The covariance is
/// computed once.
pub struct PrecoderProblem<'a> {
    pub objective: Objective<'a>,
    pub layout: Layout,
    covariance: crate::channel::ChannelCovariance,
}

impl<'a> PrecoderProblem<'a> {
    pub fn new(objective: Objective<'a>, layout: Layout) -> Self {
        let covariance = objective.model.covariance(&layout);
        Self { objective, layout, covariance }
    }
}

impl SwarmProblem for PrecoderProblem<'_> {
    fn dim(&self) -> usize {
        let s = self.objective.scenario;
        2 * s.n_antennas * s.n_pilots
    }

    fn spans(&self) -> Vec<f64> {
        precoder_spans(self.objective.scenario)
    }

    fn initial_position(&self, rng: &mut StreamRng) -> Vec<f64> {
        encode_precoder(&random_precoder(self.objective.scenario, rng))
    }

    fn repair(&self, x: &mut [f64]) {
        repair_precoder(x, self.objective.scenario.p_max);
    }

    fn evaluate(&self, x: &[f64]) -> FitnessValue {
        let s = self.objective.scenario;
        let p = decode_precoder(x, s.n_antennas, s.n_pilots);
        penalized_fitness(&p, &self.layout, &self.covariance, s.noise_var, &self.objective.penalty)
    }
}

/// Joint swarm over `(P, T)`.
pub fn run_pso(
    scenario: &Scenario,
    model: &CovarianceModel,
    cfg: &PsoConfig,
    penalty: PenaltyConfig,
    streams: Streams,
) -> Result<OptTrace> {
    scenario.validate()?;
    cfg.validate()?;
    let problem = JointProblem(Objective { scenario, model, penalty });
    let run = run_swarm(&problem, cfg, streams, &[]);
    let (best_precoder, best_layout) = decode(&run.best_position, scenario.n_antennas, scenario.n_pilots)?;
    debug_assert_eq!(clamp_region(&best_layout, &scenario.region), best_layout);
    Ok(OptTrace { records: run.records, best_precoder, best_layout, best: run.best })
}
