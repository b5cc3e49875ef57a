//! Element-wise one-dimensional search over antenna positions.
//!
//! With every other block fixed, the X-subproblem separates into a sum of
//! per-antenna terms `‖T^m[n,:] - H^m[n,:](x)‖² + ‖Q^m[n,:] - G^m[n,:](x)‖²`.
//! Each antenna is moved within the interval left open by its neighbours.
//! Waveguides never interact, so columns can be swept concurrently with the
//! same result as a sequential sweep.

use serde::{Deserialize, Serialize};

use super::PenaltyState;
use crate::channel::PassChannelModel;
use crate::geometry::Deployment;
use crate::par::{self, Execution};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchGrid {
    /// `points` equally spaced candidates covering the feasible interval,
    /// optionally refined on finer local grids around the coarse winner and
    /// the current position.
    Uniform { points: usize, refine: bool },
    /// Only the given socket positions are allowed.
    Sockets(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementSearch {
    pub position: f64,
    pub objective: f64,
}

/// Restricted X-objective of antenna `(m, n)` placed at `x`.
pub fn element_objective(state: &PenaltyState, model: &PassChannelModel, m: usize, n: usize, x: f64) -> f64 {
    let tm = &state.t_m[m];
    let qm = &state.q_m[m];
    let mut total = 0.0;
    for (k, u) in model.secondary_users().iter().enumerate() {
        total += (tm[(n, k)] - model.pa_entry(n, x, u)).norm_sqr();
    }
    for (p, u) in model.primary_users().iter().enumerate() {
        total += (qm[(n, p)] - model.pa_entry(n, x, u)).norm_sqr();
    }
    total
}

/// `Σ_m ‖T^m - H^m(X)‖² + ‖Q^m - G^m(X)‖²`.
pub fn placement_objective(state: &PenaltyState, model: &PassChannelModel, x: &Deployment) -> f64 {
    let mut total = 0.0;
    for n in 0..x.num_waveguides() {
        for m in 0..x.pas_per_waveguide() {
            total += element_objective(state, model, m, n, x.get(m, n));
        }
    }
    total
}

/// Candidate positions inside `[lo, hi]`, in increasing order.
pub fn search_candidates(lo: f64, hi: f64, grid: &SearchGrid) -> Vec<f64> {
    if lo > hi {
        return Vec::new();
    }
    match grid {
        SearchGrid::Uniform { points, .. } => uniform_points(lo, hi, *points),
        SearchGrid::Sockets(z) => z.iter().copied().filter(|&s| s >= lo && s <= hi).collect(),
    }
}

fn uniform_points(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        q => {
            let step = (hi - lo) / (q - 1) as f64;
            (0..q)
                .map(|i| if i + 1 == q { hi } else { (lo + i as f64 * step).min(hi) })
                .collect()
        }
    }
}

fn best_of(
    candidates: &[f64],
    start: Option<ElementSearch>,
    eval: &impl Fn(f64) -> f64,
) -> Option<ElementSearch> {
    let mut best = start;
    for &x in candidates {
        let f = eval(x);
        if best.is_none_or(|b| f < b.objective) {
            best = Some(ElementSearch {
                position: x,
                objective: f,
            });
        }
    }
    best
}

/// Number of successive zoom levels used by refinement.
const ZOOM_LEVELS: usize = 2;

/// Repeatedly re-grids `±cell` around the incumbent with `points` candidates.
fn zoom(
    best: ElementSearch,
    center: f64,
    mut cell: f64,
    lo: f64,
    hi: f64,
    points: usize,
    eval: &impl Fn(f64) -> f64,
) -> ElementSearch {
    let mut best = best;
    let mut center = center;
    for _ in 0..ZOOM_LEVELS {
        let rlo = (center - cell).max(lo);
        let rhi = (center + cell).min(hi);
        if rhi <= rlo {
            break;
        }
        best = best_of(&uniform_points(rlo, rhi, points), Some(best), eval).unwrap_or(best);
        cell = (rhi - rlo) / (points - 1) as f64;
        center = best.position;
    }
    best
}

fn search_interval(
    state: &PenaltyState,
    model: &PassChannelModel,
    m: usize,
    n: usize,
    (lo, hi): (f64, f64),
    current: Option<f64>,
    grid: &SearchGrid,
) -> Option<ElementSearch> {
    let eval = |x: f64| element_objective(state, model, m, n, x);
    let coarse = best_of(&search_candidates(lo, hi, grid), None, &eval)?;
    match grid {
        SearchGrid::Uniform { points, refine: true } if *points > 1 && hi > lo => {
            // The channel phase turns over every few millimetres, far below
            // the coarse spacing, so both the coarse winner and the current
            // position are refined locally.
            let cell = (hi - lo) / (*points - 1) as f64;
            let mut best = zoom(coarse, coarse.position, cell, lo, hi, *points, &eval);
            if let Some(x) = current.filter(|x| (lo..=hi).contains(x)) {
                let here = ElementSearch {
                    position: x,
                    objective: eval(x),
                };
                let local = zoom(here, x, cell, lo, hi, *points, &eval);
                if local.objective < best.objective {
                    best = local;
                }
            }
            Some(best)
        }
        _ => Some(coarse),
    }
}

/// Best grid position for antenna `(m, n)` with its neighbours fixed. Ties go
/// to the smallest position. With refinement, the coarse winner and the
/// current position are each refined on successively finer local grids, and
/// a refined point replaces the incumbent only if strictly better. Returns
/// `None` when no candidate is feasible.
pub fn element_search(
    state: &PenaltyState,
    model: &PassChannelModel,
    x: &Deployment,
    m: usize,
    n: usize,
    grid: &SearchGrid,
) -> Option<ElementSearch> {
    let cfg = model.config();
    let interval = x.feasible_interval(m, n, cfg.waveguide_length, cfg.min_pa_spacing);
    search_interval(state, model, m, n, interval, Some(x.get(m, n)), grid)
}

/// One pass over the antennas of waveguide `n`, in order of `m`. A move is
/// accepted only if it strictly lowers the element objective.
fn sweep_column(state: &PenaltyState, model: &PassChannelModel, col: &mut [f64], n: usize, grid: &SearchGrid) {
    let cfg = model.config();
    let len = col.len();
    for m in 0..len {
        let lo = if m > 0 { (col[m - 1] + cfg.min_pa_spacing).max(0.0) } else { 0.0 };
        let hi = if m + 1 < len {
            (col[m + 1] - cfg.min_pa_spacing).min(cfg.waveguide_length)
        } else {
            cfg.waveguide_length
        };
        let current = element_objective(state, model, m, n, col[m]);
        if let Some(best) = search_interval(state, model, m, n, (lo, hi), Some(col[m]), grid) {
            if best.objective < current {
                col[m] = best.position;
            }
        }
    }
}

fn sweep_pass(
    state: &PenaltyState,
    model: &PassChannelModel,
    x: &Deployment,
    grid: &SearchGrid,
    exec: Execution,
) -> Deployment {
    let cols = x.columns();
    let swept = par::map_range(exec, cols.len(), |n| {
        let mut col = cols[n].clone();
        sweep_column(state, model, &mut col, n, grid);
        col
    });
    Deployment::from_fn(x.pas_per_waveguide(), x.num_waveguides(), |m, n| swept[n][m])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTrace {
    /// Placement objective before the first pass and after each pass.
    pub objectives: Vec<f64>,
}

impl SweepTrace {
    pub fn passes(&self) -> usize {
        self.objectives.len().saturating_sub(1)
    }
}

/// Repeated element-wise sweeps until the placement objective decreases by
/// less than `tolerance` (relative) or `max_passes` is reached.
pub fn sweep_all_elements(
    state: &PenaltyState,
    model: &PassChannelModel,
    x: &Deployment,
    grid: &SearchGrid,
    tolerance: f64,
    max_passes: usize,
    exec: Execution,
) -> (Deployment, SweepTrace) {
    let mut x = x.clone();
    let mut obj = placement_objective(state, model, &x);
    let mut objectives = vec![obj];
    for _ in 0..max_passes {
        x = sweep_pass(state, model, &x, grid, exec);
        let next = placement_objective(state, model, &x);
        objectives.push(next);
        let decrease = (obj - next) / obj.abs().max(f64::MIN_POSITIVE);
        obj = next;
        if decrease < tolerance {
            break;
        }
    }
    (x, SweepTrace { objectives })
}

/// With a single antenna per waveguide the elements are fully decoupled, so a
/// single concurrent pass solves the X-subproblem over the grid.
pub fn parallel_single_pa_update(
    state: &PenaltyState,
    model: &PassChannelModel,
    x: &Deployment,
    grid: &SearchGrid,
    exec: Execution,
) -> Result<Deployment> {
    if x.pas_per_waveguide() != 1 {
        return Err(Error::Contract(format!(
            "concurrent single-antenna update needs one antenna per waveguide, got {}",
            x.pas_per_waveguide()
        )));
    }
    Ok(sweep_pass(state, model, x, grid, exec))
}
