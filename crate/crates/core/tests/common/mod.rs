//! Independent reference computations shared by the integration targets.
#![allow(dead_code)]

use fakgr::channel::{Layout, PathSet};
use fakgr::kgr::{kgr, Precoder};
use fakgr::{ChannelCovariance, CMatrix, C64};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `sum_l v_l exp(j k (t_i - t_j).rho_l)` written out entry by entry.
pub fn naive_covariance(layout: &Layout, elevations: &[f64], azimuths: &[f64], vars: &[f64], wavelength: f64) -> CMatrix {
    let n = layout.len();
    let k = 2.0 * PI / wavelength;
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for l in 0..vars.len() {
                let rx = elevations[l].sin() * azimuths[l].cos();
                let ry = elevations[l].cos();
                let dx = layout.positions[i][0] - layout.positions[j][0];
                let dy = layout.positions[i][1] - layout.positions[j][1];
                acc += C64::from_polar(vars[l], k * (dx * rx + dy * ry));
            }
            out[(i, j)] = acc;
        }
    }
    out
}

pub fn random_paths<R: Rng>(rng: &mut R, l: usize) -> PathSet {
    let el: Vec<f64> = (0..l).map(|_| rng.random_range(0.0..PI)).collect();
    let az: Vec<f64> = (0..l).map(|_| rng.random_range(0.0..PI)).collect();
    let raw: Vec<f64> = (0..l).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    PathSet::from_angles(el, az, raw.iter().map(|v| v / total).collect(), 0)
}

pub fn random_layout<R: Rng>(rng: &mut R, n: usize, side: f64) -> Layout {
    Layout::new((0..n).map(|_| [rng.random_range(0.0..side), rng.random_range(0.0..side)]).collect())
}

pub fn gaussian<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    use rand_distr::{Distribution, StandardNormal};
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    })
}

/// Wishart-type covariance `G G^H / m`, full rank when `m >= n`.
pub fn random_covariance<R: Rng>(rng: &mut R, n: usize, m: usize) -> ChannelCovariance {
    let g = gaussian(rng, n, m);
    ChannelCovariance { matrix: &g * g.adjoint() / C64::new(m as f64, 0.0) }
}

pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
    gaussian(rng, n, n).qr().q()
}

/// Key rate of one antenna and one pilot from the correlation coefficient
/// between the two observations.
pub fn scalar_kgr_oracle(p: C64, r: f64, noise: f64) -> f64 {
    let g = p.norm_sqr();
    let cross = g * r;
    let var_a = g * (r + noise);
    let var_b = g * r + noise;
    let rho2 = cross * cross / (var_a * var_b);
    -(1.0 - rho2).log2()
}

/// Central differences of `-kgr` in bits, packed like the analytic gradient.
pub fn fd_gradient(p: &Precoder, r: &ChannelCovariance, noise: f64, h: f64) -> CMatrix {
    let loss = |m: &CMatrix| -kgr(&Precoder::new(m.clone()), r, noise).unwrap().bits;
    let mut out = CMatrix::zeros(p.n_antennas(), p.n_pilots());
    for i in 0..p.n_antennas() {
        for j in 0..p.n_pilots() {
            let mut d = [0.0; 2];
            for (part, unit) in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)].into_iter().enumerate() {
                let mut plus = p.matrix.clone();
                let mut minus = p.matrix.clone();
                plus[(i, j)] += unit * h;
                minus[(i, j)] -= unit * h;
                d[part] = (loss(&plus) - loss(&minus)) / (2.0 * h);
            }
            out[(i, j)] = C64::new(d[0], d[1]);
        }
    }
    out
}

/// Largest entrywise deviation relative to the largest reference entry.
pub fn max_relative_error(got: &CMatrix, reference: &CMatrix) -> f64 {
    let scale = reference.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let diff = got.iter().zip(reference.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    diff / scale
}

pub fn frobenius(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Drops the `elapsed_ms` column (if any) so timing does not enter
/// byte-level comparisons.
pub fn strip_timing(csv: &str) -> String {
    let mut drop_col = None;
    let mut out = String::new();
    for line in csv.lines() {
        if line.starts_with('#') {
            out.push_str(line);
        } else {
            let cols: Vec<&str> = line.split(',').collect();
            if drop_col.is_none() {
                drop_col = Some(cols.iter().position(|c| *c == "elapsed_ms"));
            }
            let keep: Vec<&str> =
                cols.iter().enumerate().filter(|(i, _)| Some(*i) != drop_col.flatten()).map(|(_, c)| *c).collect();
            out.push_str(&keep.join(","));
        }
        out.push('\n');
    }
    out
}
