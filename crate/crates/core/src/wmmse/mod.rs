//! Weighted-MMSE reformulation of the sum-rate objective.
//!
//! For a link with effective gain `s = c^H d` and interference-plus-noise
//! `e > 0`, define the MSE-like quantity
//!
//! ```text
//! z(α, e, c, d) = |1 - α* s|² + |α|² e
//! g(η, α, e, c, d) = ln η - η z + 1
//! ```
//!
//! Then `max_{η>0, α} g = ln(1 + |s|²/e)`, attained at `α = s / (|s|² + e)`
//! and `η = 1/z`. Summing `g` over users gives an objective whose maximization
//! over `(α, η, W, X)` is equivalent to sum-rate maximization, and whose
//! blocks admit closed-form or convex updates. The driver lives in
//! [`engine`].

mod engine;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::metrics::effective_gains;
use crate::{CMatrix, CVector, Error, Result, C64};

pub use engine::{solve, AlgoParams, AoStep, ChannelSource, Placement, SolveReport, SolveSetup};

/// Which constant the per-user utility carries. `Corrected` includes the `+1`
/// that makes the maximum equal the rate; `Printed` omits it. Maximizers are
/// identical, so iterates do not depend on this choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaForm {
    #[default]
    Corrected,
    Printed,
}

impl LemmaForm {
    pub(crate) fn offset(self) -> f64 {
        match self {
            LemmaForm::Corrected => 1.0,
            LemmaForm::Printed => 0.0,
        }
    }
}

/// `z(α, e, s) = |1 - α* s|² + |α|² e` with `s = c^H d`.
#[inline]
pub fn mse(alpha: C64, e: f64, signal: C64) -> f64 {
    (C64::new(1.0, 0.0) - alpha.conj() * signal).norm_sqr() + alpha.norm_sqr() * e
}

/// Per-user utility `ln η - η z + 1` for a scalar gain `signal = c^H d`.
pub fn utility(eta: f64, alpha: C64, e: f64, signal: C64, form: LemmaForm) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("eta must be positive, got {eta}")));
    }
    if !(e > 0.0) {
        return Err(Error::Domain(format!("interference-plus-noise must be positive, got {e}")));
    }
    Ok(eta.ln() - eta * mse(alpha, e, signal) + form.offset())
}

/// `g(η, α, e, c, d)` with the `+1` constant.
pub fn wmmse_g(eta: f64, alpha: C64, e: f64, c: &CVector, d: &CVector) -> Result<f64> {
    utility(eta, alpha, e, c.dotc(d), LemmaForm::Corrected)
}

/// Closed-form maximizers `(α*, η*)` of `g` for gain `signal` and
/// interference-plus-noise `e`.
pub fn optimal_pair(e: f64, signal: C64) -> (C64, f64) {
    let alpha = signal / (signal.norm_sqr() + e);
    (alpha, 1.0 / mse(alpha, e, signal))
}

/// Auxiliary variables of the reformulation, one pair per secondary user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryState {
    pub alpha: Vec<C64>,
    pub eta: Vec<f64>,
}

impl AuxiliaryState {
    /// `α = 0`, `η = 1`.
    pub fn initial(num_secondary: usize) -> Self {
        Self {
            alpha: vec![C64::new(0.0, 0.0); num_secondary],
            eta: vec![1.0; num_secondary],
        }
    }
}

/// Signal gain `h_k^H w_k` and interference-plus-noise `Σ_{j≠k} |h_k^H w_j|² + σ²`.
fn link_terms(gains: &CMatrix, k: usize, noise_power: f64) -> (C64, f64) {
    let signal = gains[(k, k)];
    let interference: f64 = gains
        .row(k)
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != k)
        .map(|(_, z)| z.norm_sqr())
        .sum();
    (signal, interference + noise_power)
}

/// `α_k = h_k^H w_k / (Σ_j |h_k^H w_j|² + σ²)`; the sum includes `j = k`.
pub fn update_alpha(k: usize, w: &CMatrix, ch: &ChannelSet, noise_power: f64) -> C64 {
    let gains = effective_gains(w, ch);
    let (signal, e) = link_terms(&gains, k, noise_power);
    signal / (signal.norm_sqr() + e)
}

/// `η_k = 1 / z(α_k, Σ_{j≠k} |h_k^H w_j|² + σ², h_k, w_k)`.
pub fn update_eta(k: usize, alpha_k: C64, w: &CMatrix, ch: &ChannelSet, noise_power: f64) -> Result<f64> {
    let gains = effective_gains(w, ch);
    let (signal, e) = link_terms(&gains, k, noise_power);
    eta_from(alpha_k, e, signal)
}

fn eta_from(alpha: C64, e: f64, signal: C64) -> Result<f64> {
    let z = mse(alpha, e, signal);
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Numerical(format!("mse weight z = {z} is not positive")));
    }
    Ok(1.0 / z)
}

/// Updates every `α_k`, keeping `η`.
pub fn update_alphas(aux: &mut AuxiliaryState, w: &CMatrix, ch: &ChannelSet, noise_power: f64) {
    let gains = effective_gains(w, ch);
    for (k, a) in aux.alpha.iter_mut().enumerate() {
        let (signal, e) = link_terms(&gains, k, noise_power);
        *a = signal / (signal.norm_sqr() + e);
    }
}

/// Updates every `η_k` for the current `α`.
pub fn update_etas(aux: &mut AuxiliaryState, w: &CMatrix, ch: &ChannelSet, noise_power: f64) -> Result<()> {
    let gains = effective_gains(w, ch);
    for k in 0..aux.eta.len() {
        let (signal, e) = link_terms(&gains, k, noise_power);
        aux.eta[k] = eta_from(aux.alpha[k], e, signal)?;
    }
    Ok(())
}

/// `Σ_k g(η_k, α_k, Σ_{j≠k}|h_k^H w_j|² + σ², h_k, w_k)`.
pub fn reformulated_objective(
    aux: &AuxiliaryState,
    w: &CMatrix,
    ch: &ChannelSet,
    noise_power: f64,
    form: LemmaForm,
) -> Result<f64> {
    let gains = effective_gains(w, ch);
    let mut total = 0.0;
    for k in 0..aux.alpha.len() {
        let (signal, e) = link_terms(&gains, k, noise_power);
        total += utility(aux.eta[k], aux.alpha[k], e, signal, form)?;
    }
    Ok(total)
}
