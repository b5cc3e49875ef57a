//! Digital precoder subproblem
//!
//! ```text
//! min_W  Σ_k w_k^H C w_k - 2 Σ_k Re(u_k^H w_k)
//! s.t.   tr(W^H W) ≤ P_b,   ‖W^H g_p‖² ≤ γ_p  ∀p
//! ```
//!
//! solved through its Lagrange dual. For multipliers `μ = (μ_0, μ_1..μ_P)` the
//! Lagrangian is minimized in closed form by
//! `w_k = (C + μ_0 I + Σ_p μ_p g_p g_p^H)^{-1} u_k`; the dual function is
//! concave in `μ ≥ 0` and has at most `1 + P` variables. After trying the
//! interior solution and single-active-constraint bisections, it is maximized
//! by a log-barrier Newton path, which stays in `μ > 0` where the dual is
//! smooth even when `C` is rank deficient.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::linalg::{identity, inner, HermitianEigen};
use crate::metrics::interference_temperature;
use crate::wmmse::AuxiliaryState;
use crate::{CMatrix, Error, Result, C64};

/// Relative eigenvalue level below which the system matrix is treated as
/// singular on that subspace.
const SINGULAR_RTOL: f64 = 1e-12;
/// Relative slack within which a bisected constraint counts as active.
const TIGHT_RTOL: f64 = 1e-9;
/// Relative duality gap at which the barrier path stops.
const GAP_RTOL: f64 = 1e-10;
/// Relative duality gap accepted from a path that stalled before `GAP_RTOL`.
const FALLBACK_GAP_RTOL: f64 = 1e-8;
/// Newton decrement, relative to the barrier objective, that ends centring.
const CENTRING_RTOL: f64 = 1e-15;
const MAX_CENTRING_STEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct DigitalSubproblem {
    /// `C = Σ_j η_j |α_j|² h_j h_j^H`, Hermitian PSD.
    pub c: CMatrix,
    /// Column `k` is `u_k = η_k α_k h_k`.
    pub u: CMatrix,
    /// Primary-user channels, column `p` is `g_p`.
    pub g: CMatrix,
    pub power_budget: f64,
    /// `γ_p`; `f64::INFINITY` disables a constraint.
    pub it_thresholds: Vec<f64>,
}

impl DigitalSubproblem {
    pub fn objective(&self, w: &CMatrix) -> f64 {
        inner(w, &(&self.c * w)).re - 2.0 * inner(&self.u, w).re
    }

    /// `[tr(W^H W), ‖W^H g_1‖², …]`.
    pub fn constraint_values(&self, w: &CMatrix) -> Vec<f64> {
        let mut out = vec![w.norm_squared()];
        out.extend(w.ad_mul(&self.g).column_iter().map(|c| c.norm_squared()));
        out
    }

    /// `[P_b, γ_1, …]`.
    pub fn bounds(&self) -> Vec<f64> {
        let mut out = vec![self.power_budget];
        out.extend(self.it_thresholds.iter().copied());
        out
    }

    /// `C + μ_0 I + Σ_p μ_p g_p g_p^H`.
    pub fn system_matrix(&self, duals: &DualVariables) -> CMatrix {
        let n = self.c.nrows();
        let mut a = &self.c + identity(n) * C64::new(duals.power, 0.0);
        for (p, &mu) in duals.interference.iter().enumerate() {
            if mu != 0.0 {
                let gp = self.g.column(p);
                a += (gp * gp.adjoint()) * C64::new(mu, 0.0);
            }
        }
        a
    }
}

/// Builds `C` and `U` from the auxiliary variables and channels.
pub fn build_subproblem(
    aux: &AuxiliaryState,
    ch: &ChannelSet,
    power_budget: f64,
    it_thresholds: &[f64],
) -> DigitalSubproblem {
    let n = ch.num_antennas();
    let k_count = ch.num_secondary();
    let mut c = CMatrix::zeros(n, n);
    let mut u = CMatrix::zeros(n, k_count);
    for k in 0..k_count {
        let hk = ch.h.column(k);
        let weight = aux.eta[k] * aux.alpha[k].norm_sqr();
        if weight != 0.0 {
            c += (hk * hk.adjoint()) * C64::new(weight, 0.0);
        }
        u.set_column(k, &(hk * (aux.alpha[k] * aux.eta[k])));
    }
    DigitalSubproblem {
        c,
        u,
        g: ch.g.clone(),
        power_budget,
        it_thresholds: it_thresholds.to_vec(),
    }
}

/// Multipliers of the power (`power`) and interference (`interference[p]`)
/// constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualVariables {
    pub power: f64,
    pub interference: Vec<f64>,
}

impl DualVariables {
    pub fn zeros(num_primary: usize) -> Self {
        Self {
            power: 0.0,
            interference: vec![0.0; num_primary],
        }
    }

    fn from_vec(v: &[f64]) -> Self {
        Self {
            power: v[0],
            interference: v[1..].to_vec(),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = vec![self.power];
        out.extend(self.interference.iter().copied());
        out
    }
}

/// Minimizer of the Lagrangian for fixed multipliers.
#[derive(Debug, Clone)]
pub struct PrecoderOfDuals {
    pub w: CMatrix,
    /// Set when the system matrix was singular and the solve fell back to its
    /// numerical range (minimum-norm solution).
    pub singular: bool,
}

/// `w_k = (C + μ_0 I + Σ_p μ_p g_p g_p^H)^{-1} u_k`.
///
/// When the system matrix is singular the minimum-norm minimizer is returned
/// and `singular` is set; this is exact whenever the columns of `U` lie in the
/// range of `C`, which holds for subproblems built from auxiliary variables.
pub fn precoder_of_duals(sub: &DigitalSubproblem, duals: &DualVariables) -> PrecoderOfDuals {
    let inv = RangeInverse::new(sub, duals);
    PrecoderOfDuals {
        w: inv.apply(&sub.u),
        singular: inv.singular,
    }
}

/// Spectral inverse of the system matrix restricted to its numerical range.
struct RangeInverse {
    eig: HermitianEigen,
    threshold: f64,
    singular: bool,
}

impl RangeInverse {
    fn new(sub: &DigitalSubproblem, duals: &DualVariables) -> Self {
        let eig = HermitianEigen::new(&sub.system_matrix(duals));
        let lmax = eig.max_value().max(0.0);
        let threshold = if lmax > 0.0 { SINGULAR_RTOL * lmax } else { f64::MIN_POSITIVE };
        let singular = eig.min_value() <= threshold;
        Self {
            eig,
            threshold,
            singular,
        }
    }

    fn apply(&self, b: &CMatrix) -> CMatrix {
        let t = self.threshold;
        self.eig.apply_spectral(b, |l| if l > t { 1.0 / l } else { 0.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QcqpOptions {
    pub max_iters: usize,
}

impl Default for QcqpOptions {
    fn default() -> Self {
        Self { max_iters: 5000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QcqpPath {
    /// The unconstrained minimizer was feasible.
    Interior,
    /// One constraint active, multiplier found by bisection.
    SingleActive,
    /// Barrier path following on all multipliers.
    DualAscent,
}

#[derive(Debug, Clone)]
pub struct QcqpSolution {
    pub w: CMatrix,
    pub duals: DualVariables,
    pub objective: f64,
    pub dual_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub singular: bool,
    pub path: QcqpPath,
}

impl QcqpSolution {
    /// `objective - dual_value`, relative to `max(|objective|, 1e-300)`.
    pub fn relative_gap(&self) -> f64 {
        (self.objective - self.dual_value) / self.objective.abs().max(1e-300)
    }
}

struct DualEval {
    w: CMatrix,
    cons: Vec<f64>,
    value: f64,
    singular: bool,
    inv: RangeInverse,
}

struct DualProblem<'a> {
    sub: &'a DigitalSubproblem,
    bounds: Vec<f64>,
    /// Indices of constraints with a finite bound.
    finite: Vec<usize>,
}

impl<'a> DualProblem<'a> {
    fn new(sub: &'a DigitalSubproblem) -> Self {
        let bounds = sub.bounds();
        let finite = (0..bounds.len()).filter(|&i| bounds[i].is_finite()).collect();
        Self { sub, bounds, finite }
    }

    fn eval(&self, mu: &[f64]) -> DualEval {
        let duals = DualVariables::from_vec(mu);
        let inv = RangeInverse::new(self.sub, &duals);
        let w = inv.apply(&self.sub.u);
        let cons = self.sub.constraint_values(&w);
        // Lagrangian at its minimizer: -Re tr(U^H W) - μ·b.
        let mut value = -inner(&self.sub.u, &w).re;
        for &i in &self.finite {
            value -= mu[i] * self.bounds[i];
        }
        DualEval {
            singular: inv.singular,
            w,
            cons,
            value,
            inv,
        }
    }

    /// `∂²d/∂μ_i∂μ_j = -2 Re⟨B_i W, A^{-1} B_j W⟩` with `B_0 = I`,
    /// `B_p = g_p g_p^H`.
    fn hessian(&self, ev: &DualEval, free: &[usize]) -> Vec<Vec<f64>> {
        let bw: Vec<CMatrix> = free
            .iter()
            .map(|&i| {
                if i == 0 {
                    ev.w.clone()
                } else {
                    let gp = self.sub.g.column(i - 1);
                    gp * (gp.adjoint() * &ev.w)
                }
            })
            .collect();
        let abw: Vec<CMatrix> = bw.iter().map(|b| ev.inv.apply(b)).collect();
        let f = free.len();
        let mut h = vec![vec![0.0; f]; f];
        for a in 0..f {
            for b in a..f {
                let v = -2.0 * inner(&bw[a], &abw[b]).re;
                h[a][b] = v;
                h[b][a] = v;
            }
        }
        h
    }

    /// Positive starting multipliers of the magnitude that would make each
    /// constraint tight on its own.
    fn initial_multipliers(&self) -> Vec<f64> {
        let unorm = self.sub.u.norm();
        let mut mu = vec![0.0; self.bounds.len()];
        for &i in &self.finite {
            let bnorm = if i == 0 { 1.0 } else { self.sub.g.column(i - 1).norm_squared() };
            let v = unorm / (self.bounds[i] * bnorm).sqrt();
            mu[i] = if v.is_finite() && v > 0.0 { v } else { 1.0 };
        }
        mu
    }

    fn feasible(&self, cons: &[f64], rtol: f64) -> bool {
        self.finite.iter().all(|&i| cons[i] <= self.bounds[i] * (1.0 + rtol))
    }

    /// Bisection on one multiplier with all others zero so that constraint
    /// `i` holds with equality. Returns the multiplier on the feasible side.
    fn bisect_single(&self, i: usize) -> Option<(Vec<f64>, DualEval)> {
        let dim = self.bounds.len();
        let b = self.bounds[i];
        let at = |m: f64| {
            let mut mu = vec![0.0; dim];
            mu[i] = m;
            let ev = self.eval(&mu);
            (mu, ev)
        };
        let scale = self.sub.c.norm().max(self.sub.u.norm()).max(1e-300);
        let gnorm = if i == 0 { 1.0 } else { self.sub.g.column(i - 1).norm_squared() };
        let mut lo = 0.0;
        let mut hi = scale / gnorm.max(1e-300);
        let mut hi_eval = at(hi);
        let mut expansions = 0;
        while hi_eval.1.cons[i] > b {
            lo = hi;
            hi *= 4.0;
            hi_eval = at(hi);
            expansions += 1;
            if expansions > 400 || !hi.is_finite() {
                return None;
            }
        }
        for _ in 0..200 {
            if hi - lo <= 1e-15 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let ev = at(mid);
            if ev.1.cons[i] > b {
                lo = mid;
            } else {
                hi = mid;
                hi_eval = ev;
            }
        }
        Some(hi_eval)
    }
}

/// Solves the precoder QCQP. Never fails: on hitting the iteration cap the
/// last iterate is scaled to feasibility and returned with
/// `converged = false`.
pub fn solve_qcqp(sub: &DigitalSubproblem, opts: &QcqpOptions) -> QcqpSolution {
    let dp = DualProblem::new(sub);
    let zero = vec![0.0; dp.bounds.len()];
    let ev = dp.eval(&zero);
    if dp.feasible(&ev.cons, 0.0) {
        return finish(sub, &dp, zero, ev, 0, true, QcqpPath::Interior);
    }

    let mut iterations = 0;
    for &i in &dp.finite {
        iterations += 1;
        if let Some((m, e)) = dp.bisect_single(i) {
            // With a singular system matrix the constraint can jump past its
            // bound; only a tight, feasible point satisfies the KKT conditions.
            let tight = (e.cons[i] - dp.bounds[i]).abs() <= TIGHT_RTOL * dp.bounds[i];
            if tight && dp.feasible(&e.cons, 0.0) {
                return finish(sub, &dp, m, e, iterations, true, QcqpPath::SingleActive);
            }
        }
    }

    // Log-barrier path following on the multipliers of the finite
    // constraints. Iterates stay strictly positive; a centred iterate for
    // barrier weight `t` gives a strictly feasible precoder whose duality gap
    // is `m t`.
    let idx = dp.finite.clone();
    let m = idx.len() as f64;
    let mut mu = dp.initial_multipliers();
    let mut ev = dp.eval(&mu);
    let mut t = (ev.value.abs() / m).max(f64::MIN_POSITIVE);
    let barrier = |value: f64, mu: &[f64], t: f64| value + t * idx.iter().map(|&i| mu[i].ln()).sum::<f64>();
    let mut converged = false;
    // Last centred iterate whose precoder is feasible.
    let mut good: Option<(Vec<f64>, DualEval)> = None;
    'path: while iterations < opts.max_iters {
        for _ in 0..MAX_CENTRING_STEPS {
            if iterations >= opts.max_iters {
                break 'path;
            }
            iterations += 1;
            let grad: Vec<f64> = idx.iter().map(|&i| ev.cons[i] - dp.bounds[i] + t / mu[i]).collect();
            let mut h = dp.hessian(&ev, &idx);
            for (a, &i) in idx.iter().enumerate() {
                h[a][a] -= t / (mu[i] * mu[i]);
            }
            let Some(dir) = newton_direction(&h, &grad) else {
                break 'path;
            };
            let decrement: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
            let phi = barrier(ev.value, &mu, t);
            if !(decrement > CENTRING_RTOL * phi.abs().max(f64::MIN_POSITIVE)) {
                break;
            }
            let mut step: f64 = 1.0;
            for (a, &i) in idx.iter().enumerate() {
                if dir[a] < 0.0 {
                    step = step.min(-0.99 * mu[i] / dir[a]);
                }
            }
            let mut accepted = None;
            for _ in 0..60 {
                let mut cand = mu.clone();
                for (a, &i) in idx.iter().enumerate() {
                    cand[i] = mu[i] + step * dir[a];
                }
                let e = dp.eval(&cand);
                if barrier(e.value, &cand, t) >= phi + 0.25 * step * decrement {
                    accepted = Some((cand, e));
                    break;
                }
                step *= 0.5;
            }
            match accepted {
                Some((c, e)) => {
                    mu = c;
                    ev = e;
                }
                // Centred to machine precision.
                None => break,
            }
        }
        let small_gap = m * t <= GAP_RTOL * ev.value.abs().max(f64::MIN_POSITIVE);
        if dp.feasible(&ev.cons, 0.0) {
            if small_gap {
                converged = true;
                break;
            }
            good = Some((mu.clone(), dp.eval(&mu)));
        } else if small_gap {
            // Centred but a round-off away from feasible; finish() rescales.
            break;
        }
        t *= 0.1;
    }
    let last = finish(sub, &dp, mu, ev, iterations, converged, QcqpPath::DualAscent);
    if converged {
        return last;
    }
    let mut out = match good {
        Some((m, e)) => {
            let g = finish(sub, &dp, m, e, iterations, false, QcqpPath::DualAscent);
            if g.objective < last.objective { g } else { last }
        }
        None => last,
    };
    out.converged = out.relative_gap() <= FALLBACK_GAP_RTOL;
    if !out.converged {
        log::warn!("dual path following stopped after {iterations} iterations");
    }
    out
}

fn newton_direction(h: &[Vec<f64>], grad: &[f64]) -> Option<Vec<f64>> {
    let f = grad.len();
    if f == 0 {
        return None;
    }
    let trace: f64 = (0..f).map(|i| -h[i][i]).sum();
    let reg = 1e-14 * trace.abs().max(f64::MIN_POSITIVE);
    let m = nalgebra::DMatrix::from_fn(f, f, |i, j| -h[i][j] + if i == j { reg } else { 0.0 });
    let b = nalgebra::DVector::from_column_slice(grad);
    m.lu().solve(&b).map(|d| d.iter().copied().collect()).filter(|d: &Vec<f64>| d.iter().all(|v| v.is_finite()))
}

fn finish(
    sub: &DigitalSubproblem,
    dp: &DualProblem<'_>,
    mu: Vec<f64>,
    ev: DualEval,
    iterations: usize,
    converged: bool,
    path: QcqpPath,
) -> QcqpSolution {
    let mut w = ev.w;
    // Pull round-off violations back onto the feasible set.
    let mut s: f64 = 1.0;
    for &i in &dp.finite {
        if ev.cons[i] > dp.bounds[i] {
            s = s.min((dp.bounds[i] / ev.cons[i]).sqrt());
        }
    }
    if s < 1.0 {
        w *= C64::new(s, 0.0);
    }
    QcqpSolution {
        objective: sub.objective(&w),
        dual_value: ev.value,
        w,
        duals: DualVariables::from_vec(&mu),
        iterations,
        converged,
        singular: ev.singular,
        path,
    }
}

/// Residuals of the KKT conditions at `(w, duals)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KktResiduals {
    /// `‖A(μ) W - U‖_F / max(‖U‖_F, 1e-300)`.
    pub stationarity: f64,
    /// `|μ_i (c_i(W) - b_i)| / max(1, b_i)` per constraint.
    pub complementary: Vec<f64>,
    /// `max(0, c_i(W) - b_i) / b_i` per constraint.
    pub primal: Vec<f64>,
    pub dual_feasible: bool,
}

pub fn kkt_residuals(sub: &DigitalSubproblem, w: &CMatrix, duals: &DualVariables) -> KktResiduals {
    let a = sub.system_matrix(duals);
    let stationarity = (a * w - &sub.u).norm() / sub.u.norm().max(1e-300);
    let cons = sub.constraint_values(w);
    let bounds = sub.bounds();
    let mu = duals.to_vec();
    let mut complementary = Vec::new();
    let mut primal = Vec::new();
    for i in 0..bounds.len() {
        if bounds[i].is_finite() {
            complementary.push((mu[i] * (cons[i] - bounds[i])).abs() / bounds[i].max(1.0));
            primal.push((cons[i] - bounds[i]).max(0.0) / bounds[i]);
        } else {
            complementary.push(0.0);
            primal.push(0.0);
        }
    }
    KktResiduals {
        stationarity,
        complementary,
        primal,
        dual_feasible: mu.iter().all(|&m| m >= 0.0),
    }
}

/// Largest `s²` with `s W` inside the power budget and every interference
/// threshold, and whether an interference threshold set it.
fn feasible_scale(w: &CMatrix, ch: &ChannelSet, power_budget: f64, it_thresholds: &[f64]) -> (f64, bool) {
    let power = power_budget / w.norm_squared();
    let mut s2 = power;
    for (it, &gamma) in interference_temperature(w, ch).iter().zip(it_thresholds) {
        if *it > 0.0 {
            s2 = s2.min(gamma / it);
        }
    }
    (s2, s2 < power)
}

/// Matched filter `W = H` with one global scale onto the feasible set. When
/// an interference threshold limits that scale and the primary channels leave
/// a nontrivial orthogonal complement, the matched filter is first projected
/// onto that complement.
pub fn initial_precoder(ch: &ChannelSet, power_budget: f64, it_thresholds: &[f64]) -> Result<CMatrix> {
    let mut w = ch.h.clone();
    let total = w.norm_squared();
    if !(total > 0.0) {
        return Err(Error::Degenerate("every secondary channel is zero".into()));
    }
    let (mut s2, it_bound) = feasible_scale(&w, ch, power_budget, it_thresholds);
    if it_bound {
        if let Some(p) = project_out_primaries(&w, &ch.g) {
            if p.norm_squared() > 1e-12 * total {
                w = p;
                s2 = feasible_scale(&w, ch, power_budget, it_thresholds).0;
            }
        }
    }
    if !(s2 > 0.0) {
        return Err(Error::Degenerate(
            "a zero interference threshold forces the all-zero precoder".into(),
        ));
    }
    Ok(w * C64::new(s2.sqrt(), 0.0))
}

/// `(I - G (G^H G)^{-1} G^H) W`, or `None` when `G` has no orthogonal
/// complement or is rank deficient.
fn project_out_primaries(w: &CMatrix, g: &CMatrix) -> Option<CMatrix> {
    if g.ncols() == 0 || g.ncols() >= g.nrows() {
        return None;
    }
    let gram = g.adjoint() * g;
    let inv = gram.try_inverse()?;
    let p = w - g * (inv * g.ad_mul(w));
    p.iter().all(|z| z.is_finite()).then_some(p)
}
