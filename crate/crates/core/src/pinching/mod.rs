//! Penalty-based pinching beamforming.
//!
//! With `α`, `η` and `W` fixed, the antenna positions enter the objective only
//! through the channels. Introducing copies `T = Σ_m T^m`, `Q = Σ_m Q^m` of the
//! secondary and primary channels, with `T^m = H^m(X)` and `Q^m = G^m(X)`, and
//! moving those equalities into a quadratic penalty weighted by `1/τ` gives
//!
//! ```text
//! Σ_k t_k^H D_k t_k - 2 Σ_k Re(v_k^H t_k)
//!   + (1/τ) [ ‖T - Σ_m T^m‖² + Σ_m ‖T^m - H^m‖² + ‖Q - Σ_m Q^m‖² + Σ_m ‖Q^m - G^m‖² ]
//! ```
//!
//! minimized over `Q` (subject to `‖W^H q_p‖² ≤ γ_p`), `T`, `{T^m, Q^m}` and
//! `X` in turn; every block but `X` has a closed-form minimizer. `τ` shrinks
//! geometrically until the equality residuals vanish.

mod penalty;
mod search;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::linalg::{identity, inner, max_abs, solve_hpd, HermitianEigen};
use crate::wmmse::AuxiliaryState;
use crate::{CMatrix, CVector, Error, Result, C64};

pub use penalty::{finalize_feasibility, penalty_solve, Block, BlockStep, PenaltyParams, PenaltyReport};
pub use search::{
    element_objective, element_search, parallel_single_pa_update, placement_objective, search_candidates,
    sweep_all_elements, ElementSearch, SearchGrid, SweepTrace,
};

/// Channel-domain form of the WMMSE objective for fixed `α`, `η`, `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct PinchingSubproblem {
    /// `D_k = η_k |α_k|² Σ_j w_j w_j^H`.
    pub d: Vec<CMatrix>,
    /// Column `k` is `v_k = η_k α_k^* w_k`.
    pub v: CMatrix,
}

pub fn build_pinching_subproblem(aux: &AuxiliaryState, w: &CMatrix) -> PinchingSubproblem {
    let s = w * w.adjoint();
    let d = aux
        .alpha
        .iter()
        .zip(&aux.eta)
        .map(|(a, e)| &s * C64::new(e * a.norm_sqr(), 0.0))
        .collect();
    let mut v = w.clone();
    for (k, mut col) in v.column_iter_mut().enumerate() {
        col *= aux.alpha[k].conj() * aux.eta[k];
    }
    PinchingSubproblem { d, v }
}

impl PinchingSubproblem {
    /// `Σ_k h_k^H D_k h_k - 2 Σ_k Re(v_k^H h_k)` for channel matrix `h`.
    pub fn objective(&self, h: &CMatrix) -> f64 {
        let mut total = 0.0;
        for (k, dk) in self.d.iter().enumerate() {
            let hk = h.column(k);
            total += (hk.adjoint() * dk * hk)[(0, 0)].re;
            total -= 2.0 * self.v.column(k).dotc(&hk).re;
        }
        total
    }
}

/// Auxiliary variables of the penalty method.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyState {
    pub t: CMatrix,
    pub q: CMatrix,
    pub t_m: Vec<CMatrix>,
    pub q_m: Vec<CMatrix>,
    pub tau: f64,
}

impl PenaltyState {
    /// Consistent state `T^m = H^m`, `Q^m = G^m`, `T = H`, `Q = G`.
    pub fn from_channels(ch: &ChannelSet, tau: f64) -> Self {
        Self {
            t: ch.h.clone(),
            q: ch.g.clone(),
            t_m: ch.per_pa_h.clone(),
            q_m: ch.per_pa_g.clone(),
            tau,
        }
    }

    pub fn sum_t_m(&self) -> CMatrix {
        sum_slices(&self.t_m, self.t.shape())
    }

    pub fn sum_q_m(&self) -> CMatrix {
        sum_slices(&self.q_m, self.q.shape())
    }
}

fn sum_slices(slices: &[CMatrix], shape: (usize, usize)) -> CMatrix {
    let mut acc = CMatrix::zeros(shape.0, shape.1);
    for s in slices {
        acc += s;
    }
    acc
}

/// `Σ_k t_k^H D_k t_k - 2 Σ_k Re(v_k^H t_k)`.
pub fn data_term(state: &PenaltyState, sub: &PinchingSubproblem) -> f64 {
    sub.objective(&state.t)
}

/// Unweighted penalty `‖T - ΣT^m‖² + Σ‖T^m - H^m‖² + ‖Q - ΣQ^m‖² + Σ‖Q^m - G^m‖²`.
pub fn penalty_terms(state: &PenaltyState, ch: &ChannelSet) -> f64 {
    let mut total = (&state.t - state.sum_t_m()).norm_squared() + (&state.q - state.sum_q_m()).norm_squared();
    for (tm, hm) in state.t_m.iter().zip(&ch.per_pa_h) {
        total += (tm - hm).norm_squared();
    }
    for (qm, gm) in state.q_m.iter().zip(&ch.per_pa_g) {
        total += (qm - gm).norm_squared();
    }
    total
}

pub fn penalty_objective(state: &PenaltyState, sub: &PinchingSubproblem, ch: &ChannelSet) -> f64 {
    data_term(state, sub) + penalty_terms(state, ch) / state.tau
}

/// Projection of `a` onto `{q : ‖W^H q‖² ≤ γ}`, given the eigen-decomposition
/// of `W W^H`: `q = (I + μ W W^H)^{-1} a` with `μ = 0` if `a` is feasible and
/// otherwise the root of `‖W^H q(μ)‖² = γ`.
pub fn project_interference(a: &CVector, wwh: &HermitianEigen, gamma: f64) -> (CVector, f64) {
    let b = wwh.vectors.ad_mul(a);
    let lam: Vec<f64> = wwh.values.iter().map(|l| l.max(0.0)).collect();
    let leak = |mu: f64| -> f64 {
        lam.iter()
            .zip(b.iter())
            .map(|(&l, bi)| l * bi.norm_sqr() / (1.0 + mu * l).powi(2))
            .sum()
    };
    if leak(0.0) <= gamma {
        return (a.clone(), 0.0);
    }
    let lmax = lam.iter().copied().fold(0.0, f64::max);
    let mut lo = 0.0;
    let mut hi = 1.0 / lmax;
    while leak(hi) > gamma {
        lo = hi;
        hi *= 4.0;
        if !hi.is_finite() {
            break;
        }
    }
    for _ in 0..300 {
        if hi - lo <= 1e-16 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if leak(mid) > gamma {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = wwh.apply_spectral(&CMatrix::from_column_slice(a.len(), 1, a.as_slice()), |l| {
        1.0 / (1.0 + hi * l.max(0.0))
    });
    (CVector::from_column_slice(q.as_slice()), hi)
}

/// Q-block update: column `p` is the projection of `[Σ_m Q^m]_{:,p}` onto the
/// interference constraint of primary user `p`.
pub fn update_q(state: &PenaltyState, w: &CMatrix, thresholds: &[f64]) -> CMatrix {
    let target = state.sum_q_m();
    if target.ncols() == 0 {
        return target;
    }
    let wwh = HermitianEigen::new(&(w * w.adjoint()));
    let mut q = target.clone();
    for (p, &gamma) in thresholds.iter().enumerate() {
        let a = target.column(p).into_owned();
        let (qp, _) = project_interference(&a, &wwh, gamma);
        q.set_column(p, &qp);
    }
    q
}

/// T-block update `t_k = (I/τ + D_k)^{-1} (v_k + [Σ_m T^m]_{:,k} / τ)`.
pub fn update_t(state: &PenaltyState, sub: &PinchingSubproblem) -> Result<CMatrix> {
    let n = state.t.nrows();
    let inv_tau = 1.0 / state.tau;
    let sum = state.sum_t_m();
    let mut t = CMatrix::zeros(n, state.t.ncols());
    for (k, dk) in sub.d.iter().enumerate() {
        let a = identity(n) * C64::new(inv_tau, 0.0) + dk;
        let rhs = sub.v.column(k) + sum.column(k) * C64::new(inv_tau, 0.0);
        let rhs = CMatrix::from_column_slice(n, 1, rhs.as_slice());
        let tk = solve_hpd(&a, &rhs)
            .ok_or_else(|| Error::Numerical("T-update system is not positive definite".into()))?;
        t.set_column(k, &tk.column(0));
    }
    Ok(t)
}

/// `{T^m, Q^m}` update: `T^m = H^m + (T - Σ_i H^i)/(M+1)` and likewise for `Q^m`.
pub fn update_tm_qm(state: &PenaltyState, ch: &ChannelSet) -> (Vec<CMatrix>, Vec<CMatrix>) {
    let scale = C64::new(1.0 / (ch.per_pa_h.len() as f64 + 1.0), 0.0);
    let dt = (&state.t - &ch.h) * scale;
    let dq = (&state.q - &ch.g) * scale;
    let t_m = ch.per_pa_h.iter().map(|hm| hm + &dt).collect();
    let q_m = ch.per_pa_g.iter().map(|gm| gm + &dq).collect();
    (t_m, q_m)
}

/// Residuals of the equality constraints relaxed by the penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    /// Largest entry magnitude of `T - Σ_m T^m`.
    pub t_sum_max: f64,
    pub q_sum_max: f64,
    /// Largest entry magnitude over all `T^m - H^m`.
    pub t_slice_max: f64,
    pub q_slice_max: f64,
    pub t_sum_fro: f64,
    pub q_sum_fro: f64,
    pub t_slice_fro: f64,
    pub q_slice_fro: f64,
}

impl ViolationReport {
    pub fn max_residual(&self) -> f64 {
        self.t_sum_max
            .max(self.q_sum_max)
            .max(self.t_slice_max)
            .max(self.q_slice_max)
    }
}

pub fn violation(state: &PenaltyState, ch: &ChannelSet) -> ViolationReport {
    let t_sum = &state.t - state.sum_t_m();
    let q_sum = &state.q - state.sum_q_m();
    let mut t_slice_max: f64 = 0.0;
    let mut q_slice_max: f64 = 0.0;
    let mut t_slice_sq = 0.0;
    let mut q_slice_sq = 0.0;
    for (tm, hm) in state.t_m.iter().zip(&ch.per_pa_h) {
        let r = tm - hm;
        t_slice_max = t_slice_max.max(max_abs(&r));
        t_slice_sq += r.norm_squared();
    }
    for (qm, gm) in state.q_m.iter().zip(&ch.per_pa_g) {
        let r = qm - gm;
        q_slice_max = q_slice_max.max(max_abs(&r));
        q_slice_sq += r.norm_squared();
    }
    ViolationReport {
        t_sum_max: max_abs(&t_sum),
        q_sum_max: max_abs(&q_sum),
        t_slice_max,
        q_slice_max,
        t_sum_fro: t_sum.norm(),
        q_sum_fro: q_sum.norm(),
        t_slice_fro: t_slice_sq.sqrt(),
        q_slice_fro: q_slice_sq.sqrt(),
    }
}

/// `Re tr(A^H B)`; exposed for residual checks in tests.
pub fn real_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    inner(a, b).re
}
