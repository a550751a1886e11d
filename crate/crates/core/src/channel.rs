//! Geometric multipath channel seen by a planar array of movable antennas.
//!
//! The response at position `t` is `h(t) = sum_l g_l exp(j 2pi/lambda t.rho_l)`
//! with `rho_l = [sin(theta_l) cos(phi_l), cos(theta_l)]`. Path gains are
//! zero-mean, mutually uncorrelated circular Gaussians, so the covariance
//! `E{h h^H}` has a closed form that depends only on antenna displacements.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Streams;
use crate::{CMatrix, C64};

/// Axis-aligned rectangle `[x.0, x.1] x [y.0, y.1]`, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Region {
    pub fn square(lo: f64, hi: f64) -> Self {
        Self { x: (lo, hi), y: (lo, hi) }
    }

    pub fn width(&self) -> f64 {
        self.x.1 - self.x.0
    }

    pub fn height(&self) -> f64 {
        self.y.1 - self.y.0
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x.0 && p[0] <= self.x.1 && p[1] >= self.y.0 && p[1] <= self.y.1
    }

    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].clamp(self.x.0, self.x.1), p[1].clamp(self.y.0, self.y.1)]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        [rng.random_range(self.x.0..=self.x.1), rng.random_range(self.y.0..=self.y.1)]
    }
}

/// Physical and experimental constants of one simulated system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub n_antennas: usize,
    pub n_pilots: usize,
    pub n_paths: usize,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    pub p_max: f64,
    pub noise_var: f64,
    /// Minimum pairwise antenna spacing in meters.
    pub d_min: f64,
    pub region: Region,
    /// Samples per Monte-Carlo covariance estimate.
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for Scenario {
    /// Four antennas, four pilots, eight paths, `sigma^2 = 0.1`, unit power,
    /// half-wavelength spacing inside a `20 lambda` square.
    fn default() -> Self {
        let wavelength = 1.0;
        Self {
            n_antennas: 4,
            n_pilots: 4,
            n_paths: 8,
            wavelength,
            p_max: 1.0,
            noise_var: 0.1,
            d_min: wavelength / 2.0,
            region: Region::square(0.0, 20.0 * wavelength),
            mc_samples: 1000,
            seed: 0,
        }
    }
}

impl Scenario {
    /// Checks every invariant, including whether the region can hold
    /// `n_antennas` antennas at pairwise spacing `d_min` (grid packing test).
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if self.n_antennas == 0 || self.n_pilots == 0 || self.n_paths == 0 {
            return bad("n_antennas, n_pilots and n_paths must be positive".into());
        }
        if self.mc_samples == 0 {
            return bad("mc_samples must be positive".into());
        }
        for (name, v) in [
            ("wavelength", self.wavelength),
            ("p_max", self.p_max),
            ("noise_var", self.noise_var),
            ("d_min", self.d_min),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be finite and positive, got {v}"));
            }
        }
        let (w, h) = (self.region.width(), self.region.height());
        if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
            return bad(format!("region sides must be positive, got {w} x {h}"));
        }
        let cols = (w / self.d_min).floor() as usize + 1;
        let rows = (h / self.d_min).floor() as usize + 1;
        if cols.saturating_mul(rows) < self.n_antennas {
            return bad(format!(
                "region {w} x {h} cannot hold {} antennas at spacing {}",
                self.n_antennas, self.d_min
            ));
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }
}

/// Antenna positions `t_n = [x_n, y_n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Layout {
    pub positions: Vec<[f64; 2]>,
}

impl Layout {
    pub fn new(positions: Vec<[f64; 2]>) -> Self {
        Self { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn translated(&self, offset: [f64; 2]) -> Layout {
        Layout::new(self.positions.iter().map(|p| [p[0] + offset[0], p[1] + offset[1]]).collect())
    }

    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.positions.iter().enumerate() {
            for b in &self.positions[i + 1..] {
                best = best.min(distance(*a, *b));
            }
        }
        best
    }
}

pub(crate) fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Direction vector `[sin(theta) cos(phi), cos(theta)]`. Its norm is at most 1.
pub fn direction(elevation: f64, azimuth: f64) -> [f64; 2] {
    [elevation.sin() * azimuth.cos(), elevation.cos()]
}

/// The propagation environment: `L` path directions and their gain variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "PathSetRecord", into = "PathSetRecord")]
pub struct PathSet {
    pub elevations: Vec<f64>,
    pub azimuths: Vec<f64>,
    pub directions: Vec<[f64; 2]>,
    pub gain_vars: Vec<f64>,
    /// Seed of the scenario the paths were drawn for.
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathSetRecord {
    seed: u64,
    elevations: Vec<f64>,
    azimuths: Vec<f64>,
    gain_vars: Vec<f64>,
}

impl From<PathSetRecord> for PathSet {
    fn from(r: PathSetRecord) -> Self {
        PathSet::from_angles(r.elevations, r.azimuths, r.gain_vars, r.seed)
    }
}

impl From<PathSet> for PathSetRecord {
    fn from(p: PathSet) -> Self {
        PathSetRecord { seed: p.seed, elevations: p.elevations, azimuths: p.azimuths, gain_vars: p.gain_vars }
    }
}

impl PathSet {
    /// Builds a path set from angles; directions are derived.
    ///
    /// Panics if the three lists differ in length.
    pub fn from_angles(elevations: Vec<f64>, azimuths: Vec<f64>, gain_vars: Vec<f64>, seed: u64) -> Self {
        assert_eq!(elevations.len(), azimuths.len(), "angle lists differ in length");
        assert_eq!(elevations.len(), gain_vars.len(), "gain list length differs from path count");
        let directions = elevations.iter().zip(&azimuths).map(|(&t, &p)| direction(t, p)).collect();
        Self { elevations, azimuths, directions, gain_vars, seed }
    }

    /// Draws `L` angle pairs i.i.d. uniform on `[0, pi]^2` and splits unit
    /// channel power equally among the paths.
    pub fn sample<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Self {
        let l = scenario.n_paths;
        let mut elevations = Vec::with_capacity(l);
        let mut azimuths = Vec::with_capacity(l);
        for _ in 0..l {
            elevations.push(rng.random_range(0.0..=PI));
            azimuths.push(rng.random_range(0.0..=PI));
        }
        Self::from_angles(elevations, azimuths, vec![1.0 / l as f64; l], scenario.seed)
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn total_power(&self) -> f64 {
        self.gain_vars.iter().sum()
    }
}

/// Paths for a scenario, drawn from the scenario seed's `"paths"` stream.
pub fn sample_paths(scenario: &Scenario) -> PathSet {
    PathSet::sample(scenario, &mut Streams::new(scenario.seed).child("paths", 0))
}

/// Channel response vector `h[n] = sum_l gains[l] exp(j k t_n.rho_l)`.
pub fn channel_response(layout: &Layout, paths: &PathSet, gains: &[C64], wavelength: f64) -> Result<Vec<C64>> {
    if gains.len() != paths.len() {
        return Err(Error::DimensionMismatch(format!("{} gains for {} paths", gains.len(), paths.len())));
    }
    let k = 2.0 * PI / wavelength;
    Ok(layout
        .positions
        .iter()
        .map(|t| {
            paths
                .directions
                .iter()
                .zip(gains)
                .map(|(rho, g)| g * C64::cis(k * (t[0] * rho[0] + t[1] * rho[1])))
                .sum()
        })
        .collect())
}

/// Hermitian covariance `E{h h^H}` of the channel vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelCovariance {
    pub matrix: CMatrix,
}

impl ChannelCovariance {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest elementwise deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let m = &self.matrix;
        let mut worst = 0.0f64;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.matrix.clone().symmetric_eigenvalues().iter().copied().collect()
    }

    /// Applies a row/column permutation: `out[i, j] = R[perm[i], perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> ChannelCovariance {
        let n = self.dim();
        ChannelCovariance { matrix: CMatrix::from_fn(n, n, |i, j| self.matrix[(perm[i], perm[j])]) }
    }
}

/// Closed-form covariance `R[i,j] = sum_l v_l exp(j k (t_i - t_j).rho_l)`.
pub fn analytic_covariance(layout: &Layout, paths: &PathSet, wavelength: f64) -> ChannelCovariance {
    let n = layout.len();
    let k = 2.0 * PI / wavelength;
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(paths.total_power(), 0.0);
        for j in i + 1..n {
            let d = [
                layout.positions[i][0] - layout.positions[j][0],
                layout.positions[i][1] - layout.positions[j][1],
            ];
            let v: C64 = paths
                .directions
                .iter()
                .zip(&paths.gain_vars)
                .map(|(rho, &g)| g * C64::cis(k * (d[0] * rho[0] + d[1] * rho[1])))
                .sum();
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
    ChannelCovariance { matrix: m }
}

/// Sample covariance `(1/M) sum_m h_m h_m^H` over explicit gain draws,
/// Hermitized as `(R + R^H)/2`.
pub fn sample_covariance(layout: &Layout, paths: &PathSet, wavelength: f64, draws: &[Vec<C64>]) -> Result<ChannelCovariance> {
    let n = layout.len();
    let mut acc = CMatrix::zeros(n, n);
    for gains in draws {
        let h = nalgebra::DVector::from_vec(channel_response(layout, paths, gains, wavelength)?);
        acc += &h * h.adjoint();
    }
    Ok(finish_sample(acc, draws.len()))
}

fn finish_sample(acc: CMatrix, count: usize) -> ChannelCovariance {
    let avg = acc / C64::new(count.max(1) as f64, 0.0);
    let herm = (&avg + avg.adjoint()) * C64::new(0.5, 0.0);
    ChannelCovariance { matrix: herm }
}

const MC_CHUNK: usize = 256;

/// Monte-Carlo estimate of `E{h h^H}` with `gains[l] ~ CN(0, v_l)`.
///
/// Samples are drawn in fixed chunks, each from its own child stream, so the
/// estimate does not depend on the rayon pool size.
pub fn mc_covariance(layout: &Layout, paths: &PathSet, wavelength: f64, samples: usize, streams: &Streams) -> ChannelCovariance {
    let n = layout.len();
    let chunks = samples.div_ceil(MC_CHUNK);
    let k = 2.0 * PI / wavelength;
    // steering[l][n] = exp(j k t_n.rho_l)
    let steering: Vec<Vec<C64>> = paths
        .directions
        .iter()
        .map(|rho| layout.positions.iter().map(|t| C64::cis(k * (t[0] * rho[0] + t[1] * rho[1]))).collect())
        .collect();
    let scales: Vec<Normal<f64>> =
        paths.gain_vars.iter().map(|&v| Normal::new(0.0, (v / 2.0).sqrt()).expect("finite variance")).collect();

    let partials: Vec<CMatrix> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = streams.child("mc-covariance", c as u64);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut acc = CMatrix::zeros(n, n);
            let mut h = vec![C64::new(0.0, 0.0); n];
            for _ in 0..count {
                h.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
                for (a, dist) in steering.iter().zip(&scales) {
                    let g = C64::new(dist.sample(&mut rng), dist.sample(&mut rng));
                    for (hn, an) in h.iter_mut().zip(a) {
                        *hn += g * an;
                    }
                }
                for i in 0..n {
                    for j in 0..n {
                        acc[(i, j)] += h[i] * h[j].conj();
                    }
                }
            }
            acc
        })
        .collect();
    let total = partials.into_iter().fold(CMatrix::zeros(n, n), |a, b| a + b);
    finish_sample(total, samples)
}

/// Which covariance estimator the optimizers evaluate against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMode {
    #[default]
    Analytic,
    MonteCarlo,
}

/// A covariance estimator bound to a fixed environment.
///
/// In Monte-Carlo mode every evaluation reuses the same seed, so the fitness
/// landscape is deterministic.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    pub paths: PathSet,
    pub wavelength: f64,
    pub mode: CovarianceMode,
    pub mc_samples: usize,
    pub mc_streams: Streams,
}

impl CovarianceModel {
    pub fn analytic(scenario: &Scenario, paths: PathSet) -> Self {
        Self::new(scenario, paths, CovarianceMode::Analytic)
    }

    pub fn new(scenario: &Scenario, paths: PathSet, mode: CovarianceMode) -> Self {
        Self {
            paths,
            wavelength: scenario.wavelength,
            mode,
            mc_samples: scenario.mc_samples,
            mc_streams: Streams::new(scenario.seed).fork("mc-eval", 0),
        }
    }

    pub fn covariance(&self, layout: &Layout) -> ChannelCovariance {
        match self.mode {
            CovarianceMode::Analytic => analytic_covariance(layout, &self.paths, self.wavelength),
            CovarianceMode::MonteCarlo => mc_covariance(layout, &self.paths, self.wavelength, self.mc_samples, &self.mc_streams),
        }
    }
}
