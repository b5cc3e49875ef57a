//! SINR, rate and interference-temperature evaluation.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::config::ScenarioConfig;
use crate::geometry::{deployment_violations, Deployment};
use crate::{CMatrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub sinr: Vec<f64>,
    /// Per-user rate `ln(1 + SINR_k)` in nats.
    pub rates: Vec<f64>,
    pub sum_rate: f64,
}

/// Gram matrix of effective gains: entry `(k, j)` is `h_k^H w_j`.
pub fn effective_gains(w: &CMatrix, ch: &ChannelSet) -> CMatrix {
    ch.h.ad_mul(w)
}

pub fn sinr_and_rates(w: &CMatrix, ch: &ChannelSet, noise_power: f64) -> RateReport {
    let gains = effective_gains(w, ch);
    let k_count = gains.nrows();
    let mut sinr = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let total: f64 = gains.row(k).iter().map(|z| z.norm_sqr()).sum();
        let signal = gains[(k, k)].norm_sqr();
        let interference = (total - signal).max(0.0);
        sinr.push(signal / (interference + noise_power));
    }
    let rates: Vec<f64> = sinr.iter().map(|s| s.ln_1p()).collect();
    let sum_rate = rates.iter().sum();
    RateReport {
        sinr,
        rates,
        sum_rate,
    }
}

/// `IT_p = ‖W^H g_p‖²` for every primary user.
pub fn interference_temperature(w: &CMatrix, ch: &ChannelSet) -> Vec<f64> {
    let wg = w.ad_mul(&ch.g);
    wg.column_iter().map(|c| c.norm_squared()).collect()
}

/// `tr(W^H W)`.
pub fn transmit_power(w: &CMatrix) -> f64 {
    w.norm_squared()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub power: f64,
    pub power_ok: bool,
    pub interference: Vec<f64>,
    pub interference_ok: bool,
    pub placement_ok: bool,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.power_ok && self.interference_ok && self.placement_ok
    }
}

/// Checks power, interference and placement constraints. `rel_tol` is the
/// relative slack granted on the power and interference bounds; `ch` must be
/// in physical units.
pub fn check_feasibility(
    w: &CMatrix,
    x: Option<&Deployment>,
    ch: &ChannelSet,
    cfg: &ScenarioConfig,
    rel_tol: f64,
) -> Result<FeasibilityReport> {
    let power = transmit_power(w);
    let interference = interference_temperature(w, ch);
    let interference_ok = interference
        .iter()
        .zip(&cfg.it_thresholds)
        .all(|(it, g)| *it <= g * (1.0 + rel_tol));
    let placement_ok = match x {
        Some(x) => deployment_violations(x, cfg)?.is_empty(),
        None => true,
    };
    Ok(FeasibilityReport {
        power_ok: power <= cfg.power_budget * (1.0 + rel_tol),
        power,
        interference,
        interference_ok,
        placement_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    fn channels(h: CMatrix, g: CMatrix) -> ChannelSet {
        ChannelSet::from_slices(vec![h], vec![g], 1.0).unwrap()
    }

    fn cm(rows: usize, cols: usize, v: &[(f64, f64)]) -> CMatrix {
        CMatrix::from_iterator(rows, cols, v.iter().map(|&(re, im)| C64::new(re, im)))
    }

    #[test]
    fn zero_precoder_gives_zero_rate_and_interference() {
        let ch = channels(
            cm(2, 2, &[(1.0, 0.5), (0.2, -1.0), (0.3, 0.0), (-0.7, 0.1)]),
            cm(2, 1, &[(0.4, 0.4), (1.0, 0.0)]),
        );
        let w = CMatrix::zeros(2, 2);
        let r = sinr_and_rates(&w, &ch, 0.1);
        assert_eq!(r.sum_rate, 0.0);
        assert!(r.sinr.iter().all(|&s| s == 0.0));
        assert_eq!(interference_temperature(&w, &ch), vec![0.0]);
    }

    #[test]
    fn single_user_has_no_interference() {
        let h = cm(2, 1, &[(1.0, 0.5), (0.2, -1.0)]);
        let w = cm(2, 1, &[(0.3, 0.1), (-0.4, 0.9)]);
        let ch = channels(h.clone(), CMatrix::zeros(2, 0));
        let r = sinr_and_rates(&w, &ch, 0.5);
        let expected = h.ad_mul(&w)[(0, 0)].norm_sqr() / 0.5;
        assert!((r.sinr[0] - expected).abs() < 1e-14);
        assert!((r.rates[0] - expected.ln_1p()).abs() < 1e-14);
    }

    #[test]
    fn orthogonal_precoder_leaks_nothing() {
        let g = cm(2, 1, &[(1.0, 1.0), (0.0, 0.0)]);
        let w = cm(2, 1, &[(0.0, 0.0), (2.0, -1.0)]);
        let ch = channels(CMatrix::zeros(2, 1), g);
        assert_eq!(interference_temperature(&w, &ch), vec![0.0]);
    }
}
