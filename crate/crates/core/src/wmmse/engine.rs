//! Alternating-optimization driver.
//!
//! Each outer iteration updates `α`, then `η`, then the precoder `W` (convex
//! QCQP), then, for pinching arrays, the antenna positions by the penalty
//! method. The loop runs in noise-normalized units: channels are scaled by
//! `1/σ`, so the noise power is 1 and thresholds become `γ_p/σ²`; precoders
//! are unaffected by the scaling.

use serde::{Deserialize, Serialize};

use super::{reformulated_objective, update_alphas, update_etas, AuxiliaryState, LemmaForm};
use crate::channel::{ChannelSet, PassChannelModel};
use crate::config::ScenarioConfig;
use crate::digital::{build_subproblem, initial_precoder, solve_qcqp, QcqpOptions, QcqpPath};
use crate::geometry::Deployment;
use crate::metrics::{check_feasibility, interference_temperature, sinr_and_rates, FeasibilityReport, RateReport};
use crate::par::Execution;
use crate::pinching::{finalize_feasibility, penalty_solve, PenaltyParams, PenaltyReport, SearchGrid};
use crate::{CMatrix, Error, Result};

/// Relative slack used when judging an iterate feasible.
const FEASIBILITY_RTOL: f64 = 1e-9;

/// Solver parameters. Every field has a default, so an empty `[solver]`
/// table is valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgoParams {
    /// Relative change of the reformulated objective that ends the outer loop.
    pub outer_tolerance: f64,
    pub max_outer_iters: usize,
    /// Relative change of the penalized objective that ends the inner loop.
    pub inner_tolerance: f64,
    /// Equality residual that ends the penalty loop.
    pub violation_tolerance: f64,
    pub tau_init: f64,
    pub tau_shrink: f64,
    pub min_tau: f64,
    /// Candidates per element search.
    pub grid_points: usize,
    pub refine_grid: bool,
    pub max_sweep_passes: usize,
    pub max_inner_iters: usize,
    pub qcqp_max_iters: usize,
    pub lemma_form: LemmaForm,
    pub execution: Execution,
    /// Keep per-step objective values and penalty reports.
    pub record_traces: bool,
}

impl Default for AlgoParams {
    fn default() -> Self {
        Self {
            outer_tolerance: 1e-3,
            max_outer_iters: 50,
            inner_tolerance: 1e-3,
            violation_tolerance: 1e-6,
            tau_init: 10.0,
            tau_shrink: 0.1,
            min_tau: 1e-12,
            grid_points: 200,
            refine_grid: true,
            max_sweep_passes: 10,
            max_inner_iters: 50,
            qcqp_max_iters: 5000,
            lemma_form: LemmaForm::Corrected,
            execution: Execution::default(),
            record_traces: false,
        }
    }
}

impl AlgoParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("outer_tolerance", self.outer_tolerance),
            ("inner_tolerance", self.inner_tolerance),
            ("violation_tolerance", self.violation_tolerance),
            ("tau_init", self.tau_init),
            ("min_tau", self.min_tau),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("solver.{name} must be positive, got {v}")));
            }
        }
        if !(self.tau_shrink > 0.0 && self.tau_shrink < 1.0) {
            return Err(Error::Config(format!(
                "solver.tau_shrink must lie in (0, 1), got {}",
                self.tau_shrink
            )));
        }
        let counts = [
            ("max_outer_iters", self.max_outer_iters),
            ("grid_points", self.grid_points),
            ("max_sweep_passes", self.max_sweep_passes),
            ("max_inner_iters", self.max_inner_iters),
            ("qcqp_max_iters", self.qcqp_max_iters),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("solver.{name} must be at least 1")));
            }
        }
        Ok(())
    }

    pub fn penalty_params(&self) -> PenaltyParams {
        PenaltyParams {
            tau_init: self.tau_init,
            tau_shrink: self.tau_shrink,
            inner_tolerance: self.inner_tolerance,
            violation_tolerance: self.violation_tolerance,
            max_inner_iters: self.max_inner_iters,
            max_sweep_passes: self.max_sweep_passes,
            min_tau: self.min_tau,
            execution: self.execution,
            record_trace: self.record_traces,
        }
    }
}

/// How antenna positions are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Placement {
    /// Continuous positions, searched on a uniform grid.
    Grid,
    /// Positions restricted to the given sockets.
    Sockets(Vec<f64>),
    /// Positions kept at their initial values.
    Frozen,
}

#[derive(Debug, Clone)]
pub enum ChannelSource {
    Pass {
        model: PassChannelModel,
        initial: Deployment,
        placement: Placement,
    },
    /// Position-independent channels in physical units.
    Fixed(ChannelSet),
}

#[derive(Debug, Clone)]
pub struct SolveSetup {
    pub cfg: ScenarioConfig,
    pub channels: ChannelSource,
}

/// Objective values around the blocks of one outer iteration, in normalized
/// units. `after_x` is taken after the feasibility repair that follows the
/// position update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoStep {
    pub iteration: usize,
    pub before: f64,
    pub after_alpha: f64,
    pub after_eta: f64,
    pub after_w: f64,
    pub after_x: Option<f64>,
    pub sum_rate: f64,
    pub qcqp_path: QcqpPath,
    pub qcqp_iterations: usize,
    pub qcqp_gap: f64,
    pub penalty: Option<PenaltyReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    /// Best feasible precoder found.
    pub w: CMatrix,
    pub deployment: Option<Deployment>,
    pub rates: RateReport,
    /// `1 - IT_p/γ_p` for every primary user.
    pub it_margins: Vec<f64>,
    pub feasibility: FeasibilityReport,
    /// Sum rate of the initial point and after every outer iteration.
    pub sum_rate_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Outer iteration that produced the returned point (0 = initial point).
    pub best_iteration: usize,
    pub steps: Vec<AoStep>,
    pub warnings: Vec<String>,
}

impl SolveReport {
    pub fn sum_rate(&self) -> f64 {
        self.rates.sum_rate
    }
}

struct Best {
    rate: f64,
    w: CMatrix,
    x: Option<Deployment>,
    iteration: usize,
}

pub fn solve(setup: &SolveSetup, params: &AlgoParams) -> Result<SolveReport> {
    let cfg = &setup.cfg;
    cfg.validate()?;
    params.validate()?;
    let noise = 1.0;
    let sigma2 = cfg.noise_power;
    let thresholds: Vec<f64> = cfg.it_thresholds.iter().map(|g| g / sigma2).collect();
    let budget = cfg.power_budget;

    let (model, mut x, grid, mut ch) = match &setup.channels {
        ChannelSource::Pass {
            model,
            initial,
            placement,
        } => {
            let model = model.clone().normalized();
            let ch = model.assemble(initial)?;
            let grid = match placement {
                Placement::Grid => Some(SearchGrid::Uniform {
                    points: params.grid_points,
                    refine: params.refine_grid,
                }),
                Placement::Sockets(z) => Some(SearchGrid::Sockets(z.clone())),
                Placement::Frozen => None,
            };
            (Some(model), Some(initial.clone()), grid, ch)
        }
        ChannelSource::Fixed(ch) => (None, None, None, ch.scaled(1.0 / sigma2.sqrt())),
    };

    let penalty_params = params.penalty_params();
    let qcqp_opts = QcqpOptions {
        max_iters: params.qcqp_max_iters,
    };
    let form = params.lemma_form;

    let mut w = initial_precoder(&ch, budget, &thresholds)?;
    let mut aux = AuxiliaryState::initial(cfg.num_secondary);
    let mut rate = sinr_and_rates(&w, &ch, noise).sum_rate;
    let mut trace = vec![rate];
    // The stopping rule always sees the corrected utility so that both lemma
    // forms stop at the same iteration.
    let shift = cfg.num_secondary as f64 * (LemmaForm::Corrected.offset() - form.offset());
    let mut objective = reformulated_objective(&aux, &w, &ch, noise, form)? + shift;
    let mut best = Best {
        rate,
        w: w.clone(),
        x: x.clone(),
        iteration: 0,
    };
    let mut steps = Vec::new();
    let mut warnings = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=params.max_outer_iters {
        iterations = it;
        let before = reformulated_objective(&aux, &w, &ch, noise, form)?;
        update_alphas(&mut aux, &w, &ch, noise);
        let after_alpha = reformulated_objective(&aux, &w, &ch, noise, form)?;
        update_etas(&mut aux, &w, &ch, noise)?;
        let after_eta = reformulated_objective(&aux, &w, &ch, noise, form)?;

        let sub = build_subproblem(&aux, &ch, budget, &thresholds);
        let sol = solve_qcqp(&sub, &qcqp_opts);
        if !sol.converged {
            warnings.push(format!("iteration {it}: precoder subproblem hit its iteration cap"));
        }
        w = sol.w.clone();
        let after_w = reformulated_objective(&aux, &w, &ch, noise, form)?;

        let mut after_x = None;
        let mut penalty = None;
        if let (Some(model), Some(grid), Some(xc)) = (&model, &grid, &x) {
            let (next_x, report) = penalty_solve(&aux, &w, xc, model, &thresholds, grid, &penalty_params)?;
            if let Some(msg) = &report.warning {
                warnings.push(format!("iteration {it}: {msg}"));
            }
            ch = model.assemble(&next_x)?;
            x = Some(next_x);
            w = finalize_feasibility(&w, &ch, budget, &thresholds);
            after_x = Some(reformulated_objective(&aux, &w, &ch, noise, form)?);
            if params.record_traces {
                penalty = Some(report);
            }
        }

        let prev = objective;
        objective = after_x.unwrap_or(after_w) + shift;
        rate = sinr_and_rates(&w, &ch, noise).sum_rate;
        trace.push(rate);
        log::debug!("outer iteration {it}: sum rate {rate:.6} nats");
        if params.record_traces {
            steps.push(AoStep {
                iteration: it,
                before,
                after_alpha,
                after_eta,
                after_w,
                after_x,
                sum_rate: rate,
                qcqp_path: sol.path,
                qcqp_iterations: sol.iterations,
                qcqp_gap: sol.relative_gap(),
                penalty,
            });
        }
        if rate > best.rate && feasible_normalized(&w, &ch, budget, &thresholds) {
            best = Best {
                rate,
                w: w.clone(),
                x: x.clone(),
                iteration: it,
            };
        }
        if (objective - prev).abs() <= params.outer_tolerance * prev.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    let physical = match (&setup.channels, &best.x) {
        (ChannelSource::Pass { model, .. }, Some(bx)) => model.assemble(bx)?,
        (ChannelSource::Fixed(ch), _) => ch.clone(),
        _ => unreachable!("pinching setups always carry a deployment"),
    };
    let rates = sinr_and_rates(&best.w, &physical, cfg.noise_power);
    let feasibility = check_feasibility(&best.w, best.x.as_ref(), &physical, cfg, FEASIBILITY_RTOL)?;
    let it_margins = feasibility
        .interference
        .iter()
        .zip(&cfg.it_thresholds)
        .map(|(it, g)| 1.0 - it / g)
        .collect();

    Ok(SolveReport {
        w: best.w,
        deployment: best.x,
        rates,
        it_margins,
        feasibility,
        sum_rate_trace: trace,
        iterations,
        converged,
        best_iteration: best.iteration,
        steps,
        warnings,
    })
}

fn feasible_normalized(w: &CMatrix, ch: &ChannelSet, budget: f64, thresholds: &[f64]) -> bool {
    w.norm_squared() <= budget * (1.0 + FEASIBILITY_RTOL)
        && interference_temperature(w, ch)
            .iter()
            .zip(thresholds)
            .all(|(it, g)| *it <= g * (1.0 + FEASIBILITY_RTOL))
}
