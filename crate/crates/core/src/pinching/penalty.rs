//! Outer penalty loop: block-coordinate descent for a fixed `τ`, then shrink
//! `τ` until the equality residuals fall below tolerance.

use serde::{Deserialize, Serialize};

use super::search::{sweep_all_elements, SearchGrid};
use super::{
    build_pinching_subproblem, penalty_objective, update_q, update_t, update_tm_qm, violation, PenaltyState,
    ViolationReport,
};
use crate::channel::{ChannelSet, PassChannelModel};
use crate::geometry::Deployment;
use crate::metrics::{interference_temperature, transmit_power};
use crate::par::Execution;
use crate::wmmse::AuxiliaryState;
use crate::{CMatrix, Result, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub tau_init: f64,
    /// Factor `ω ∈ (0, 1)` applied to `τ` after each outer iteration.
    pub tau_shrink: f64,
    /// Relative objective change that ends the inner block loop.
    pub inner_tolerance: f64,
    /// Max-abs equality residual that ends the outer loop.
    pub violation_tolerance: f64,
    pub max_inner_iters: usize,
    pub max_sweep_passes: usize,
    /// Below this `τ` the loop stops with a warning.
    pub min_tau: f64,
    pub execution: Execution,
    pub record_trace: bool,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        Self {
            tau_init: 10.0,
            tau_shrink: 0.1,
            inner_tolerance: 1e-3,
            violation_tolerance: 1e-6,
            max_inner_iters: 50,
            max_sweep_passes: 10,
            min_tau: 1e-12,
            execution: Execution::Sequential,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Q,
    T,
    Slices,
    X,
}

/// Penalized objective around one block update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockStep {
    pub outer: usize,
    pub inner: usize,
    pub block: Block,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyReport {
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub final_tau: f64,
    pub violation: ViolationReport,
    /// Max-abs residual at the end of each outer iteration.
    pub violation_trace: Vec<f64>,
    pub converged: bool,
    pub warning: Option<String>,
    pub steps: Vec<BlockStep>,
}

/// Runs the penalty method from placement `x0`. `thresholds` must be in the
/// same units as the channels produced by `model`.
pub fn penalty_solve(
    aux: &AuxiliaryState,
    w: &CMatrix,
    x0: &Deployment,
    model: &PassChannelModel,
    thresholds: &[f64],
    grid: &SearchGrid,
    params: &PenaltyParams,
) -> Result<(Deployment, PenaltyReport)> {
    let sub = build_pinching_subproblem(aux, w);
    let mut x = x0.clone();
    let mut ch = model.assemble(&x)?;
    let mut st = PenaltyState::from_channels(&ch, params.tau_init);
    st.q = update_q(&st, w, thresholds);

    let mut steps = Vec::new();
    let mut violation_trace = Vec::new();
    let mut inner_total = 0;
    let mut outer = 0;
    let mut converged = false;
    let mut warning = None;
    let mut report;

    loop {
        let mut prev = penalty_objective(&st, &sub, &ch);
        for inner in 0..params.max_inner_iters {
            inner_total += 1;
            let mut record = |block: Block, before: f64, after: f64| {
                if params.record_trace {
                    steps.push(BlockStep {
                        outer,
                        inner,
                        block,
                        before,
                        after,
                    });
                }
            };

            let before = prev;
            st.q = update_q(&st, w, thresholds);
            let after_q = penalty_objective(&st, &sub, &ch);
            record(Block::Q, before, after_q);

            st.t = update_t(&st, &sub)?;
            let after_t = penalty_objective(&st, &sub, &ch);
            record(Block::T, after_q, after_t);

            let (t_m, q_m) = update_tm_qm(&st, &ch);
            st.t_m = t_m;
            st.q_m = q_m;
            let after_slices = penalty_objective(&st, &sub, &ch);
            record(Block::Slices, after_t, after_slices);

            let (next_x, _) = sweep_all_elements(
                &st,
                model,
                &x,
                grid,
                params.inner_tolerance,
                params.max_sweep_passes,
                params.execution,
            );
            x = next_x;
            ch = model.assemble(&x)?;
            let after_x = penalty_objective(&st, &sub, &ch);
            record(Block::X, after_slices, after_x);

            let change = (prev - after_x).abs() / prev.abs().max(f64::MIN_POSITIVE);
            prev = after_x;
            if change < params.inner_tolerance {
                break;
            }
        }
        outer += 1;
        report = violation(&st, &ch);
        violation_trace.push(report.max_residual());
        if report.max_residual() < params.violation_tolerance {
            converged = true;
            break;
        }
        let next_tau = st.tau * params.tau_shrink;
        if next_tau < params.min_tau {
            let msg = format!(
                "penalty parameter reached {next_tau:e} with residual {:e}",
                report.max_residual()
            );
            log::warn!("{msg}");
            warning = Some(msg);
            break;
        }
        st.tau = next_tau;
    }

    Ok((
        x,
        PenaltyReport {
            outer_iters: outer,
            inner_iters: inner_total,
            final_tau: st.tau,
            violation: report,
            violation_trace,
            converged,
            warning,
            steps,
        },
    ))
}

/// Scales `W` down just enough to satisfy the power budget and every
/// interference threshold on channels `ch`. Returns `W` unchanged if it is
/// already feasible.
pub fn finalize_feasibility(w: &CMatrix, ch: &ChannelSet, power_budget: f64, thresholds: &[f64]) -> CMatrix {
    let mut ratio: f64 = 1.0;
    let power = transmit_power(w);
    if power > power_budget {
        ratio = ratio.min(power_budget / power);
    }
    for (it, gamma) in interference_temperature(w, ch).iter().zip(thresholds) {
        if it > gamma {
            ratio = ratio.min(gamma / it);
        }
    }
    if ratio < 1.0 {
        w * C64::new(ratio.sqrt(), 0.0)
    } else {
        w.clone()
    }
}
