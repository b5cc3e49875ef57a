//! Reference solvers and random instance builders shared by the integration
//! and acceptance tests. Everything here is written independently of the
//! library's solvers and only uses its plain data types.
#![allow(dead_code)]

use pass_cr::digital::DigitalSubproblem;
use pass_cr::pinching::PenaltyState;
use pass_cr::wmmse::AuxiliaryState;
use pass_cr::{CMatrix, CVector, C64};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn gaussian(rng: &mut impl Rng) -> C64 {
    // Box-Muller on two uniforms, unit variance per complex entry.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    let r = (-u1.ln()).sqrt();
    let th = 2.0 * std::f64::consts::PI * u2;
    c(r * th.cos(), r * th.sin())
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn random_vector(rng: &mut impl Rng, len: usize) -> CVector {
    CVector::from_fn(len, |_, _| gaussian(rng))
}

/// Precoder QCQP instance. With `engine_like`, `C` and `U` are built the way
/// the alternating loop builds them (rank `K`, `U` inside the range of `C`);
/// otherwise `C` is a generic full-rank Hermitian PSD matrix.
pub fn random_qcqp(rng: &mut impl Rng, n: usize, k: usize, p: usize, engine_like: bool) -> DigitalSubproblem {
    let (cm, u) = if engine_like {
        let h = random_matrix(rng, n, k);
        let mut cm = CMatrix::zeros(n, n);
        let mut u = CMatrix::zeros(n, k);
        for j in 0..k {
            let eta: f64 = rng.gen_range(0.5..5.0);
            let alpha = gaussian(rng) * 0.5;
            let hj = h.column(j);
            cm += hj * hj.adjoint() * c(eta * alpha.norm_sqr(), 0.0);
            u.set_column(j, &(hj * (alpha * eta)));
        }
        (cm, u)
    } else {
        let a = random_matrix(rng, n, n);
        (&a * a.adjoint() * c(0.5, 0.0), random_matrix(rng, n, k))
    };
    let g = random_matrix(rng, n, p);
    // Budgets chosen so that each constraint is sometimes active.
    let w0 = pseudo_solve(&cm, &u);
    let p0 = w0.norm_squared();
    let power_budget = p0 * rng.gen_range(0.2..1.5);
    let it_thresholds = (0..p)
        .map(|i| {
            let it = (w0.adjoint() * g.column(i)).norm_squared();
            (it * rng.gen_range(0.05..1.5)).max(1e-3)
        })
        .collect();
    DigitalSubproblem {
        c: cm,
        u,
        g,
        power_budget,
        it_thresholds,
    }
}

/// Minimum-norm solution of `C W = U` through an SVD pseudo-inverse.
pub fn pseudo_solve(cm: &CMatrix, u: &CMatrix) -> CMatrix {
    let svd = cm.clone().svd(true, true);
    let tol = 1e-12 * svd.singular_values.max();
    svd.solve(u, tol).expect("svd solve")
}

pub fn qcqp_objective(sub: &DigitalSubproblem, w: &CMatrix) -> f64 {
    let mut total = 0.0;
    for k in 0..w.ncols() {
        let wk = w.column(k);
        total += (wk.adjoint() * &sub.c * wk)[(0, 0)].re;
        total -= 2.0 * sub.u.column(k).dotc(&wk).re;
    }
    total
}

/// Constraint values `[‖W‖², |g_1^H W|², ...]`.
pub fn qcqp_constraints(sub: &DigitalSubproblem, w: &CMatrix) -> Vec<f64> {
    let mut out = vec![w.norm_squared()];
    for p in 0..sub.g.ncols() {
        out.push((sub.g.column(p).adjoint() * w).norm_squared());
    }
    out
}

/// Euclidean projection onto `{W : ‖g^H W‖² ≤ γ}`: only the component of `W`
/// along `g` is constrained.
fn project_slab(w: &CMatrix, g: &CVector, gamma: f64) -> CMatrix {
    let gn2 = g.norm_squared();
    let row = g.adjoint() * w;
    let r2 = row.norm_squared();
    if r2 <= gamma {
        return w.clone();
    }
    let shrink = 1.0 - (gamma / r2).sqrt();
    w - (g * row) * c(shrink / gn2, 0.0)
}

fn project_ball(w: &CMatrix, radius2: f64) -> CMatrix {
    let n2 = w.norm_squared();
    if n2 <= radius2 {
        w.clone()
    } else {
        w * c((radius2 / n2).sqrt(), 0.0)
    }
}

/// Dykstra's alternating projections onto the intersection of the power ball
/// and the interference slabs.
pub fn project_feasible(sub: &DigitalSubproblem, w: &CMatrix, cycles: usize) -> CMatrix {
    let sets = 1 + sub.g.ncols();
    let mut x = w.clone();
    let mut incr = vec![CMatrix::zeros(w.nrows(), w.ncols()); sets];
    for _ in 0..cycles {
        let start = x.clone();
        for (s, inc) in incr.iter_mut().enumerate() {
            let y = &x + &*inc;
            let proj = if s == 0 {
                project_ball(&y, sub.power_budget)
            } else {
                let g = sub.g.column(s - 1).into_owned();
                project_slab(&y, &g, sub.it_thresholds[s - 1])
            };
            *inc = &y - &proj;
            x = proj;
        }
        if (&x - &start).norm() <= 1e-15 * (1.0 + x.norm()) {
            break;
        }
    }
    x
}

/// Scales `w` onto the feasible set when round-off leaves it just outside.
pub fn pull_inside(sub: &DigitalSubproblem, w: &CMatrix) -> CMatrix {
    let cons = qcqp_constraints(sub, w);
    let mut bounds = vec![sub.power_budget];
    bounds.extend(sub.it_thresholds.iter().copied());
    let mut s: f64 = 1.0;
    for (v, b) in cons.iter().zip(&bounds) {
        if *v > *b {
            s = s.min((b / v).sqrt());
        }
    }
    w * c(s, 0.0)
}

/// Accelerated projected gradient on the precoder QCQP, run for a long fixed
/// horizon from `W = 0`.
pub fn projected_gradient_reference(sub: &DigitalSubproblem, steps: usize) -> CMatrix {
    let lmax = sub.c.clone().symmetric_eigenvalues().max().max(1e-12);
    let step = 1.0 / (2.0 * lmax);
    let shape = sub.u.shape();
    let mut x = CMatrix::zeros(shape.0, shape.1);
    let mut y = x.clone();
    let mut t: f64 = 1.0;
    let mut best = x.clone();
    let mut best_val = 0.0;
    for it in 0..steps {
        let grad = (&sub.c * &y - &sub.u) * c(2.0, 0.0);
        let next = project_feasible(sub, &(&y - grad * c(step, 0.0)), 200);
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mut mom = (t - 1.0) / tn;
        // Restart the momentum whenever the objective goes up.
        if qcqp_objective(sub, &next) > qcqp_objective(sub, &x) {
            mom = 0.0;
            t = 1.0;
        } else {
            t = tn;
        }
        y = &next + (&next - &x) * c(mom, 0.0);
        x = next;
        if it % 16 == 0 || it + 1 == steps {
            let feas = pull_inside(sub, &x);
            let v = qcqp_objective(sub, &feas);
            if v < best_val {
                best_val = v;
                best = feas;
            }
        }
    }
    best
}

/// Numerical Wirtinger gradient of a real function of one complex matrix.
pub fn numeric_gradient(f: impl Fn(&CMatrix) -> f64, w: &CMatrix, h: f64) -> CMatrix {
    let mut g = CMatrix::zeros(w.nrows(), w.ncols());
    for i in 0..w.nrows() {
        for j in 0..w.ncols() {
            let mut p = w.clone();
            let mut m = w.clone();
            p[(i, j)] += c(h, 0.0);
            m[(i, j)] -= c(h, 0.0);
            let dre = (f(&p) - f(&m)) / (2.0 * h);
            let mut p = w.clone();
            let mut m = w.clone();
            p[(i, j)] += c(0.0, h);
            m[(i, j)] -= c(0.0, h);
            let dim = (f(&p) - f(&m)) / (2.0 * h);
            g[(i, j)] = c(dre, dim);
        }
    }
    g
}

/// Channels written straight from the propagation model, one antenna at a
/// time: `(1/√M) e^{-jκ_g x} · λ e^{-jκ r} / (4π r)`.
pub fn naive_pass_channels(
    cfg: &pass_cr::config::ScenarioConfig,
    layout: &pass_cr::geometry::UserLayout,
    x: &pass_cr::geometry::Deployment,
) -> (CMatrix, CMatrix) {
    let lambda = 299_792_458.0 / cfg.consts.carrier_frequency;
    let kc = 2.0 * std::f64::consts::PI / lambda;
    let kg = cfg.consts.effective_refractive_index * kc;
    let m_count = cfg.pas_per_waveguide;
    let build = |users: &[pass_cr::geometry::Point3]| {
        CMatrix::from_fn(cfg.num_waveguides, users.len(), |n, k| {
            let feed_y = (2.0 * n as f64 + 1.0) * cfg.area_y / (2.0 * cfg.num_waveguides as f64);
            let u = &users[k];
            let mut acc = c(0.0, 0.0);
            for m in 0..m_count {
                let xm = x.get(m, n);
                let r = ((xm - u.x).powi(2) + (feed_y - u.y).powi(2) + (cfg.waveguide_height - u.z).powi(2)).sqrt();
                let guide = C64::from_polar(1.0 / (m_count as f64).sqrt(), -kg * xm);
                let air = C64::from_polar(lambda / (4.0 * std::f64::consts::PI * r), -kc * r);
                acc += guide * air;
            }
            acc
        })
    };
    (build(&layout.secondary), build(&layout.primary))
}

/// Constraint violations of a returned solution, checked against channels
/// rebuilt by [`naive_pass_channels`]. Empty when everything holds.
pub fn audit_solution(
    cfg: &pass_cr::config::ScenarioConfig,
    layout: &pass_cr::geometry::UserLayout,
    rep: &pass_cr::wmmse::SolveReport,
) -> Vec<String> {
    let mut out = Vec::new();
    let power = rep.w.norm_squared();
    if power > cfg.power_budget * (1.0 + 1e-6) {
        out.push(format!("power {power} over budget {}", cfg.power_budget));
    }
    let Some(x) = &rep.deployment else {
        return out;
    };
    let half = 0.5 * 299_792_458.0 / cfg.consts.carrier_frequency;
    for n in 0..cfg.num_waveguides {
        for m in 0..cfg.pas_per_waveguide {
            let v = x.get(m, n);
            if !(0.0..=cfg.waveguide_length).contains(&v) {
                out.push(format!("antenna ({m},{n}) at {v} outside the waveguide"));
            }
            if m > 0 && v - x.get(m - 1, n) < half - 1e-12 {
                out.push(format!("antennas ({},{n}) and ({m},{n}) closer than λ/2", m - 1));
            }
        }
    }
    let (_, g) = naive_pass_channels(cfg, layout, x);
    for (p, gamma) in cfg.it_thresholds.iter().enumerate() {
        let it: f64 = (0..rep.w.ncols())
            .map(|k| (g.column(p).adjoint() * rep.w.column(k))[(0, 0)].norm_sqr())
            .sum();
        if it > gamma * (1.0 + 1e-9) {
            out.push(format!("interference {it} at primary {p} over {gamma}"));
        }
    }
    out
}

/// Breaches of the ascent property of the outer blocks and the descent
/// property of the penalty blocks, with tolerance `tol` scaled by magnitude.
pub fn audit_monotonicity(rep: &pass_cr::wmmse::SolveReport, tol: f64) -> Vec<String> {
    let slack = |v: f64| tol * v.abs().max(1.0);
    let mut out = Vec::new();
    for s in &rep.steps {
        let chain = [("alpha", s.before, s.after_alpha), ("eta", s.after_alpha, s.after_eta), ("w", s.after_eta, s.after_w)];
        for (name, a, b) in chain {
            if b < a - slack(a) {
                out.push(format!("iteration {}: {name} step {a} -> {b}", s.iteration));
            }
        }
        if let Some(p) = &s.penalty {
            for b in &p.steps {
                if b.after > b.before + slack(b.before) {
                    out.push(format!(
                        "iteration {} penalty ({}, {}) {:?}: {} -> {}",
                        s.iteration, b.outer, b.inner, b.block, b.before, b.after
                    ));
                }
            }
        }
    }
    out
}

pub fn random_state(r: &mut impl Rng, n: usize, k: usize, p: usize, m: usize, tau: f64) -> PenaltyState {
    PenaltyState {
        t: random_matrix(r, n, k),
        q: random_matrix(r, n, p),
        t_m: (0..m).map(|_| random_matrix(r, n, k)).collect(),
        q_m: (0..m).map(|_| random_matrix(r, n, p)).collect(),
        tau,
    }
}

pub fn random_aux(r: &mut impl Rng, k: usize) -> AuxiliaryState {
    AuxiliaryState {
        alpha: (0..k).map(|_| gaussian(r) * 0.5).collect(),
        eta: (0..k).map(|_| r.gen_range(0.5..4.0)).collect(),
    }
}

/// Closest point to `a` on `{q : |w^H q|² = γ}` for a single column `w`,
/// found by a dense sweep over the phase of the constrained component; the
/// free component is the exact least-squares fit for each phase.
pub fn grid_projection(a: &CVector, w: &CVector, gamma: f64) -> CVector {
    let wn = w.norm();
    let u = w / c(wn, 0.0);
    let radius = gamma.sqrt() / wn;
    let free = a - &u * u.dotc(a);
    let mut best = (f64::INFINITY, a.clone());
    let steps = 200_000;
    for i in 0..steps {
        let th = 2.0 * std::f64::consts::PI * i as f64 / steps as f64;
        let q = &free + &u * c(radius * th.cos(), radius * th.sin());
        let d = (&q - a).norm_squared();
        if d < best.0 {
            best = (d, q);
        }
    }
    best.1
}
