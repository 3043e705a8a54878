//! First-order conic solver.
//!
//! Solves `min c'x  s.t.  Ax = b, x in K` together with its dual by
//! operator splitting on the homogeneous self-dual embedding: iterates
//! `u = (x, y, tau)` and `v = (s, 0, kappa)` satisfy `Q u = v` at a
//! solution, where `Q` is the skew matrix built from `(A, b, c)`. Each
//! iteration solves one fixed quasidefinite linear system (factored
//! once, with a rank-one correction for the embedding column) and
//! projects onto the cone. A solution with `tau > 0` yields an optimal
//! primal-dual pair after division by `tau`; a vanishing `tau` yields an
//! infeasibility or unboundedness certificate. Convergence is declared
//! on the five error measures of the original unscaled problem.
//!
//! Everything here is deterministic: no randomization, no threading, no
//! wall-clock dependence.

mod ldl;
mod scaling;

pub use ldl::{amd_order_upper, KktSolver, LdlError, LdlFactor};
pub use scaling::{equilibrate, Scaling};

use crate::cones;
use crate::diagnostics::Dimacs;
use crate::linalg;
use crate::relax::ConeLP;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    /// Tolerance on the primal equality and cone measures.
    pub eps_primal: f64,
    /// Tolerance on the dual equality and cone measures.
    pub eps_dual: f64,
    /// Tolerance on the normalized objective gap.
    pub eps_gap: f64,
    pub max_iters: usize,
    /// Over-relaxation parameter in (0, 2).
    pub alpha: f64,
    /// Convergence is tested every this many iterations.
    pub check_every: usize,
    /// Equilibration sweeps before solving.
    pub scale_iters: usize,
    /// Static diagonal regularization of the projection system.
    pub regularization: f64,
    /// Refinement steps per linear solve.
    pub refine_steps: usize,
    /// Quality required of an infeasibility or unboundedness certificate.
    pub cert_tol: f64,
    /// Prints per-check progress to stderr.
    pub verbose: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            eps_primal: 1e-6,
            eps_dual: 1e-6,
            eps_gap: 1e-6,
            max_iters: 20_000,
            alpha: 1.5,
            check_every: 25,
            scale_iters: 10,
            regularization: 1e-7,
            refine_steps: 2,
            cert_tol: 1e-7,
            verbose: false,
        }
    }
}

impl Settings {
    /// One tolerance for all five convergence measures.
    pub fn with_eps(eps: f64) -> Self {
        Settings { eps_primal: eps, eps_dual: eps, eps_gap: eps, ..Settings::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIters,
    InfeasibleCertificate,
    UnboundedCertificate,
    NumericalError,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIters => "max_iters",
            SolveStatus::InfeasibleCertificate => "infeasible_certificate",
            SolveStatus::UnboundedCertificate => "unbounded_certificate",
            SolveStatus::NumericalError => "numerical_error",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    /// Primal point; for an unbounded certificate, the normalized ray.
    pub x: Vec<f64>,
    /// Equality multipliers; for an infeasibility certificate, the
    /// normalized dual ray.
    pub y: Vec<f64>,
    /// Dual slacks.
    pub s: Vec<f64>,
    /// `c'x` plus the problem offset.
    pub objective: f64,
    /// `b'y` plus the problem offset.
    pub dual_objective: f64,
    pub iters: usize,
    /// Error measures of the returned triple against the problem; for
    /// certificate statuses these describe the ray, not a solution.
    pub metrics: Dimacs,
}

impl Solution {
    fn packaged(
        lp: &ConeLP,
        status: SolveStatus,
        x: Vec<f64>,
        y: Vec<f64>,
        s: Vec<f64>,
        iters: usize,
    ) -> Self {
        let metrics = Dimacs::measure(lp, &x, &y, &s);
        Solution {
            status,
            objective: lp.objective(&x),
            dual_objective: linalg::dot(&lp.b, &y) + lp.offset,
            x,
            y,
            s,
            iters,
            metrics,
        }
    }
}

/// Raw optimality residuals of a candidate triple: `(Ax - b, A'y + s - c,
/// c'x - b'y)`, unnormalized.
pub fn residuals(lp: &ConeLP, x: &[f64], y: &[f64], s: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let mut rp = lp.a.mul_vec(x);
    for (r, b) in rp.iter_mut().zip(&lp.b) {
        *r -= b;
    }
    let mut rd: Vec<f64> = s.iter().zip(&lp.c).map(|(s, c)| s - c).collect();
    lp.a.gemv_t(1.0, y, &mut rd);
    let gap = linalg::dot(&lp.c, x) - linalg::dot(&lp.b, y);
    (rp, rd, gap)
}

/// Minimum tau for forming a primal-dual candidate; below it only
/// certificates are meaningful.
const TAU_FLOOR: f64 = 1e-9;

pub fn solve(lp: &ConeLP, settings: &Settings) -> Solution {
    lp.validate().expect("inconsistent problem dimensions");
    let (n, m) = (lp.n_var(), lp.n_row());
    let dim = n + m + 1;
    let zeros = |iters| {
        Solution::packaged(
            lp,
            SolveStatus::NumericalError,
            vec![0.0; n],
            vec![0.0; m],
            vec![0.0; n],
            iters,
        )
    };

    let (scaled, sc) = equilibrate(lp, settings.scale_iters);
    let kkt = match KktSolver::new(&scaled.a, settings.regularization, settings.refine_steps) {
        Ok(k) => k,
        Err(_) => return zeros(0),
    };

    // g = P^-1 q for the rank-one embedding column, q = (c, -b).
    let mut gx = scaled.c.clone();
    let mut gy: Vec<f64> = scaled.b.iter().map(|v| -v).collect();
    kkt.solve_in_place(&mut gx, &mut gy);
    let denom = 1.0 + linalg::dot(&scaled.c, &gx) - linalg::dot(&scaled.b, &gy);
    if !denom.is_finite() || denom <= 0.0 {
        return zeros(0);
    }

    // u = (x, y, tau), v = (s, 0, kappa).
    let mut u = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    u[dim - 1] = 1.0;
    v[dim - 1] = 1.0;

    let mut wx = vec![0.0; n];
    let mut wy = vec![0.0; m];
    let mut relaxed = vec![0.0; dim];
    let mut u_next = vec![0.0; dim];
    let mut best: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let mut iters = 0;
    while iters < settings.max_iters {
        iters += 1;

        // Linear step: (I + Q) u~ = u + v, via the quasidefinite solve
        // plus the rank-one tau column.
        for k in 0..n {
            wx[k] = u[k] + v[k];
        }
        for k in 0..m {
            wy[k] = u[n + k] + v[n + k];
        }
        let wt = u[dim - 1] + v[dim - 1];
        kkt.solve_in_place(&mut wx, &mut wy);
        let qtz = linalg::dot(&scaled.c, &wx) - linalg::dot(&scaled.b, &wy);
        let tau_t = (wt + qtz) / denom;

        // Over-relaxed point, then cone projection and dual update.
        let alpha = settings.alpha;
        for k in 0..n {
            relaxed[k] = alpha * (wx[k] - tau_t * gx[k]) + (1.0 - alpha) * u[k];
        }
        for k in 0..m {
            relaxed[n + k] = alpha * (wy[k] - tau_t * gy[k]) + (1.0 - alpha) * u[n + k];
        }
        relaxed[dim - 1] = alpha * tau_t + (1.0 - alpha) * u[dim - 1];

        for k in 0..dim {
            u_next[k] = relaxed[k] - v[k];
        }
        cones::project_into(&scaled.blocks, &mut u_next[..n]);
        if u_next[dim - 1] < 0.0 {
            u_next[dim - 1] = 0.0;
        }
        for k in 0..dim {
            v[k] += u_next[k] - relaxed[k];
        }
        std::mem::swap(&mut u, &mut u_next);

        if iters % settings.check_every != 0 && iters < settings.max_iters {
            continue;
        }
        if !u.iter().chain(v.iter()).all(|t| t.is_finite()) {
            return zeros(iters);
        }

        let tau = u[dim - 1];
        if tau > TAU_FLOOR {
            let xt: Vec<f64> = u[..n].iter().map(|t| t / tau).collect();
            let yt: Vec<f64> = u[n..n + m].iter().map(|t| t / tau).collect();
            let st: Vec<f64> = v[..n].iter().map(|t| t / tau).collect();
            let x = sc.unscale_x(&xt);
            let y = sc.unscale_y(&yt);
            let s = sc.unscale_s(&st);
            let metrics = Dimacs::measure(lp, &x, &y, &s);
            if settings.verbose {
                eprintln!(
                    "iter {iters:6}  r_p {:.3e}  r_d {:.3e}  gap {:+.3e}",
                    metrics.primal_res.max(metrics.primal_cone),
                    metrics.dual_res.max(metrics.dual_cone),
                    metrics.gap,
                );
            }
            if metrics.meets(settings.eps_primal, settings.eps_dual, settings.eps_gap) {
                return Solution::packaged(lp, SolveStatus::Optimal, x, y, s, iters);
            }
            best = Some((x, y, s));
        }

        // Infeasibility: a dual ray with b'y = 1 and -A'y in the dual
        // cone.
        let y_dir = sc.unscale_y(&u[n..n + m]);
        let bty = linalg::dot(&lp.b, &y_dir);
        if bty > 0.0 {
            let yhat: Vec<f64> = y_dir.iter().map(|t| t / bty).collect();
            let mut neg_aty = vec![0.0; n];
            lp.a.gemv_t(-1.0, &yhat, &mut neg_aty);
            if cones::distance(&lp.blocks, &neg_aty) <= settings.cert_tol {
                let s_cert = cones::project(&lp.blocks, &neg_aty);
                return Solution::packaged(
                    lp,
                    SolveStatus::InfeasibleCertificate,
                    vec![0.0; n],
                    yhat,
                    s_cert,
                    iters,
                );
            }
        }

        // Unboundedness: a primal ray with c'x = -1, Ax = 0, x in K.
        let x_dir = sc.unscale_x(&u[..n]);
        let ctx = linalg::dot(&lp.c, &x_dir);
        if ctx < 0.0 {
            let xhat: Vec<f64> = x_dir.iter().map(|t| t / -ctx).collect();
            let ax = lp.a.mul_vec(&xhat);
            if linalg::norm2(&ax) <= settings.cert_tol
                && cones::distance(&lp.blocks, &xhat) <= settings.cert_tol
            {
                return Solution::packaged(
                    lp,
                    SolveStatus::UnboundedCertificate,
                    xhat,
                    vec![0.0; m],
                    vec![0.0; n],
                    iters,
                );
            }
        }
    }

    match best {
        Some((x, y, s)) => Solution::packaged(lp, SolveStatus::MaxIters, x, y, s, iters),
        None => Solution { status: SolveStatus::MaxIters, ..zeros(iters) },
    }
}
