//! Key generation rate of the precoded channel-probing exchange.
//!
//! With `C = P^T R P*`, Alice's estimate has covariance
//! `R_a = C + sigma^2 P^T P*`, Bob's `R_b = C + sigma^2 I_S`, and their
//! cross-covariance is `C`. The rate is the Gaussian mutual information
//!
//! ```text
//! R_sk = log2( det(R_a) det(R_b) / det([[R_a, C], [C, R_b]]) )
//! ```
//!
//! evaluated in the log domain through Cholesky factors.

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelCovariance;
use crate::error::{Error, Result};
use crate::{CMatrix, C64};

/// `N x S` complex precoding matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub matrix: CMatrix,
}

impl Precoder {
    pub fn new(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn zeros(n: usize, s: usize) -> Self {
        Self { matrix: CMatrix::zeros(n, s) }
    }

    pub fn n_antennas(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_pilots(&self) -> usize {
        self.matrix.ncols()
    }

    /// `Tr(P P^H)`, the squared Frobenius norm.
    pub fn power(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Draws i.i.d. standard complex Gaussian entries (unit variance).
    pub fn random_gaussian<R: rand::Rng + ?Sized>(n: usize, s: usize, rng: &mut R) -> Self {
        use rand_distr::{Distribution, StandardNormal};
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = CMatrix::zeros(n, s);
        for z in m.iter_mut() {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *z = C64::new(re * h, im * h);
        }
        Self { matrix: m }
    }

    /// Real/imaginary parts as serializable row-major arrays.
    pub fn to_parts(&self) -> PrecoderParts {
        let rows = |f: fn(&C64) -> f64| {
            (0..self.matrix.nrows()).map(|i| (0..self.matrix.ncols()).map(|j| f(&self.matrix[(i, j)])).collect()).collect()
        };
        PrecoderParts { re: rows(|z| z.re), im: rows(|z| z.im) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecoderParts {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// A key rate in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct KgrValue {
    pub bits: f64,
}

/// Gradient of `-R_sk` (bits) packed as `d/dRe(P) + j d/dIm(P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KgrGradient {
    pub matrix: CMatrix,
}

impl KgrGradient {
    pub fn norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Component orthogonal to `P` under the real inner product
    /// `<A, B> = Re tr(A^H B)`, i.e. tangent to the power sphere at `P`.
    pub fn tangent_to(&self, p: &Precoder) -> CMatrix {
        let pp = p.power();
        if pp == 0.0 {
            return self.matrix.clone();
        }
        let inner: f64 = self.matrix.iter().zip(p.matrix.iter()).map(|(g, q)| (g.conj() * q).re).sum();
        &self.matrix - &p.matrix * C64::new(inner / pp, 0.0)
    }
}

/// The three `S x S` blocks of the joint observation covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderStats {
    pub r_a: CMatrix,
    pub r_b: CMatrix,
    pub cross: CMatrix,
}

impl SecondOrderStats {
    /// `[[R_a, C], [C, R_b]]`.
    pub fn joint(&self) -> CMatrix {
        let s = self.r_a.nrows();
        let mut j = CMatrix::zeros(2 * s, 2 * s);
        j.view_mut((0, 0), (s, s)).copy_from(&self.r_a);
        j.view_mut((0, s), (s, s)).copy_from(&self.cross);
        j.view_mut((s, 0), (s, s)).copy_from(&self.cross);
        j.view_mut((s, s), (s, s)).copy_from(&self.r_b);
        j
    }
}

fn check_dims(p: &Precoder, r: &ChannelCovariance) -> Result<()> {
    if r.matrix.nrows() != r.matrix.ncols() {
        return Err(Error::DimensionMismatch(format!("covariance is {}x{}", r.matrix.nrows(), r.matrix.ncols())));
    }
    if p.n_antennas() != r.dim() {
        return Err(Error::DimensionMismatch(format!(
            "precoder has {} rows, covariance is {}x{}",
            p.n_antennas(),
            r.dim(),
            r.dim()
        )));
    }
    Ok(())
}

pub fn second_order_stats(p: &Precoder, r: &ChannelCovariance, noise_var: f64) -> Result<SecondOrderStats> {
    check_dims(p, r)?;
    let pt = p.matrix.transpose();
    let pc = p.matrix.map(|z| z.conj());
    let cross = &pt * &r.matrix * &pc;
    let r_a = &cross + (&pt * &pc) * C64::new(noise_var, 0.0);
    let s = p.n_pilots();
    let r_b = &cross + CMatrix::identity(s, s) * C64::new(noise_var, 0.0);
    Ok(SecondOrderStats { r_a, r_b, cross })
}

/// Cholesky factor of a Hermitian matrix, with a tiny diagonal jitter for
/// matrices that are PSD up to rounding.
struct HermitianFactor {
    chol: Cholesky<C64, nalgebra::Dyn>,
    logdet: f64,
}

const NEG_EIG_TOL: f64 = 1e-8;
const JITTER: f64 = 1e-12;
const MIN_DET_LN: f64 = -690.775_527_898_213_7; // ln(1e-300)

/// Cholesky that rejects non-positive pivots. The complex square root never
/// fails, so a negative pivot shows up as an imaginary diagonal entry.
fn checked_cholesky(m: CMatrix) -> Option<Cholesky<C64, nalgebra::Dyn>> {
    let chol = m.cholesky()?;
    let ok = chol.l_dirty().diagonal().iter().all(|d| d.re > 0.0 && d.im.abs() < d.re);
    ok.then_some(chol)
}

impl HermitianFactor {
    fn new(m: &CMatrix) -> Result<Self> {
        let chol = match checked_cholesky(m.clone()) {
            Some(c) => c,
            None => {
                let eig = m.clone().symmetric_eigenvalues();
                let min_eig = eig.min();
                let max_eig = eig.max();
                let singular = Error::SingularCovariance { min_eig, max_eig };
                if !(max_eig > 0.0 && min_eig > -NEG_EIG_TOL * max_eig) {
                    return Err(singular);
                }
                let trace: f64 = m.diagonal().iter().map(|z| z.re).sum();
                let n = m.nrows();
                let jittered = m + CMatrix::identity(n, n) * C64::new(JITTER * trace, 0.0);
                checked_cholesky(jittered).ok_or(singular)?
            }
        };
        let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|z| z.re.ln()).sum::<f64>();
        if !(logdet.is_finite() && logdet >= MIN_DET_LN) {
            let eig = m.clone().symmetric_eigenvalues();
            return Err(Error::SingularCovariance { min_eig: eig.min(), max_eig: eig.max() });
        }
        Ok(Self { chol, logdet })
    }

    fn inverse(&self) -> CMatrix {
        self.chol.inverse()
    }
}

fn is_zero(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re == 0.0 && z.im == 0.0)
}

/// Mutual information in nats, plus the factors needed for the gradient.
fn kgr_nats(stats: &SecondOrderStats) -> Result<Option<(f64, [HermitianFactor; 3])>> {
    if is_zero(&stats.cross) {
        return Ok(None);
    }
    let fa = HermitianFactor::new(&stats.r_a)?;
    let fb = HermitianFactor::new(&stats.r_b)?;
    let fj = HermitianFactor::new(&stats.joint())?;
    let nats = fa.logdet + fb.logdet - fj.logdet;
    Ok(Some((nats, [fa, fb, fj])))
}

/// Key generation rate in bits. Exactly zero when the cross-covariance
/// vanishes (e.g. `P = 0`).
pub fn kgr(p: &Precoder, r: &ChannelCovariance, noise_var: f64) -> Result<KgrValue> {
    let stats = second_order_stats(p, r, noise_var)?;
    let bits = match kgr_nats(&stats)? {
        None => 0.0,
        Some((nats, _)) => (nats / std::f64::consts::LN_2).max(0.0),
    };
    Ok(KgrValue { bits })
}

/// Gradient of `-R_sk` with respect to `P` in the real/imaginary split.
///
/// For `X = P^T M P*` with Hermitian `M` and any Hermitian weight `K`,
/// `d tr(K dX) = Re sum conj(G) o dP` with `G = 2 conj(M P* K)`. The rate is
/// `logdet R_a + logdet R_b - logdet J`, and `tr(J^{-1} dJ)` splits into
/// `tr(K11 dR_a) + tr((K12 + K21 + K22) dC)` since `dR_b = dC`.
pub fn kgr_gradient(p: &Precoder, r: &ChannelCovariance, noise_var: f64) -> Result<KgrGradient> {
    let stats = second_order_stats(p, r, noise_var)?;
    let (n, s) = (p.n_antennas(), p.n_pilots());
    let Some((_, [fa, fb, fj])) = kgr_nats(&stats)? else {
        return Ok(KgrGradient { matrix: CMatrix::zeros(n, s) });
    };
    let pc = p.matrix.map(|z| z.conj());
    let r_noisy = &r.matrix + CMatrix::identity(n, n) * C64::new(noise_var, 0.0);
    let term = |m: &CMatrix, k: &CMatrix| -> CMatrix { (m * &pc * k).map(|z| z.conj() * 2.0) };

    let jinv = fj.inverse();
    let k11 = jinv.view((0, 0), (s, s)).into_owned();
    let k_rest = jinv.view((0, s), (s, s)) + jinv.view((s, 0), (s, s)) + jinv.view((s, s), (s, s));

    let grad_nats =
        term(&r_noisy, &fa.inverse()) + term(&r.matrix, &fb.inverse()) - term(&r_noisy, &k11) - term(&r.matrix, &k_rest);
    Ok(KgrGradient { matrix: grad_nats * C64::new(-1.0 / std::f64::consts::LN_2, 0.0) })
}
