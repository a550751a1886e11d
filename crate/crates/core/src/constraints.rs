//! Feasible-set handling shared by every optimizer: the trace-power sphere,
//! the minimum-spacing penalty, region clamping, and the penalized fitness.

use serde::{Deserialize, Serialize};

use crate::channel::{distance, ChannelCovariance, Layout, Region};
use crate::error::{Error, Result};
use crate::kgr::{kgr, Precoder};
use crate::C64;

/// Weight of the spacing penalty. Not to be confused with the wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltyConfig {
    pub coefficient: f64,
    pub d_min: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self { coefficient: 100.0, d_min: 0.5 }
    }
}

/// Penalized objective with its parts kept for diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessValue {
    pub raw_kgr: f64,
    pub penalty: f64,
    pub fitness: f64,
    /// Set when the rate could not be evaluated; `fitness` is then `-inf`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl FitnessValue {
    pub fn new(raw_kgr: f64, penalty: f64, coefficient: f64) -> Self {
        Self { raw_kgr, penalty, fitness: raw_kgr - coefficient * penalty, failure: None }
    }

    pub fn failed(err: &Error, penalty: f64) -> Self {
        Self { raw_kgr: f64::NEG_INFINITY, penalty, fitness: f64::NEG_INFINITY, failure: Some(err.to_string()) }
    }
}

/// Scales `P` onto `Tr(P P^H) = p_max`.
pub fn project_power(p: &Precoder, p_max: f64) -> Result<Precoder> {
    let power = p.power();
    if power == 0.0 || !power.is_finite() {
        return Err(Error::ZeroPrecoder);
    }
    Ok(Precoder::new(&p.matrix * C64::new((p_max / power).sqrt(), 0.0)))
}

/// `sum_{i<j} max(d_min - |t_i - t_j|, 0)^2`.
pub fn spacing_penalty(layout: &Layout, d_min: f64) -> f64 {
    let pos = &layout.positions;
    let mut total = 0.0;
    for i in 0..pos.len() {
        for j in i + 1..pos.len() {
            let gap = d_min - distance(pos[i], pos[j]);
            if gap > 0.0 {
                total += gap * gap;
            }
        }
    }
    total
}

pub fn clamp_region(layout: &Layout, region: &Region) -> Layout {
    Layout::new(layout.positions.iter().map(|&p| region.clamp(p)).collect())
}

/// `kgr(P, R) - coefficient * spacing_penalty(layout)`. A failed rate
/// evaluation yields `-inf` fitness instead of an error.
pub fn penalized_fitness(
    p: &Precoder,
    layout: &Layout,
    r: &ChannelCovariance,
    noise_var: f64,
    cfg: &PenaltyConfig,
) -> FitnessValue {
    let penalty = spacing_penalty(layout, cfg.d_min);
    match kgr(p, r, noise_var) {
        Ok(v) => FitnessValue::new(v.bits, penalty, cfg.coefficient),
        Err(e) => FitnessValue::failed(&e, penalty),
    }
}
