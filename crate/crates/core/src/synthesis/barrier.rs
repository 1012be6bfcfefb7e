//! Dense log-barrier interior-point method for margin maximization over
//! affine symmetric blocks.

use nalgebra::Cholesky;

use super::{BackendStatus, LmiProblem, MarginBackend, MarginSolution, SolverOptions};
use crate::numerics::{min_sym_eigenvalue, Matrix, Vector};

/// Maximizes `t` subject to `F_j(c) - t I ≻ 0` by following the central path
/// of `-τ t - Σ_j log det(F_j(c) - t I)` with damped Newton steps.
#[derive(Debug, Clone, Copy, Default)]
pub struct BarrierBackend;

#[derive(Clone)]
struct Point {
    c: Vector,
    t: f64,
}

/// Cholesky factors of every shifted block, or `None` when one is not
/// positive definite.
fn factor(prob: &LmiProblem, p: &Point) -> Option<Vec<Cholesky<f64, nalgebra::Dyn>>> {
    prob.blocks
        .iter()
        .map(|b| {
            let mut f = b.eval(&p.c);
            for i in 0..f.nrows() {
                f[(i, i)] -= p.t;
            }
            Cholesky::new(f)
        })
        .collect()
}

fn log_det(ch: &Cholesky<f64, nalgebra::Dyn>) -> f64 {
    2.0 * ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

fn objective(tau: f64, t: f64, chol: &[Cholesky<f64, nalgebra::Dyn>]) -> f64 {
    -tau * t - chol.iter().map(log_det).sum::<f64>()
}

/// Gradient and Hessian in the stacked variable `(c, t)`.
fn derivatives(prob: &LmiProblem, tau: f64, chol: &[Cholesky<f64, nalgebra::Dyn>]) -> (Vector, Matrix) {
    let d = prob.dim;
    let mut g = Vector::zeros(d + 1);
    let mut h = Matrix::zeros(d + 1, d + 1);
    g[d] = -tau;
    for (block, ch) in prob.blocks.iter().zip(chol) {
        let w = ch.inverse();
        let s = w.nrows();
        // P_i = W F_i, stored alongside its transpose for trace products.
        let mut p = Vec::with_capacity(d);
        let mut pt = Vec::with_capacity(d);
        for fi in &block.fi {
            let pi = &w * fi;
            pt.push(pi.transpose());
            p.push(pi);
        }
        for i in 0..d {
            g[i] -= p[i].trace();
            let cross: f64 = p[i].iter().zip(w.iter()).map(|(a, b)| a * b).sum();
            h[(i, d)] -= cross;
            h[(d, i)] -= cross;
            for k in 0..=i {
                let v: f64 = p[i].iter().zip(pt[k].iter()).map(|(a, b)| a * b).sum();
                h[(i, k)] += v;
                if k != i {
                    h[(k, i)] += v;
                }
            }
        }
        g[d] += w.trace();
        h[(d, d)] += w.norm_squared();
        debug_assert_eq!(s, block.f0.nrows());
    }
    (g, h)
}

/// Solves `H s = -g` after symmetric diagonal equilibration, with one
/// round of iterative refinement. Near the boundary the entries of `H`
/// span many orders of magnitude.
fn newton_step(h: &Matrix, g: &Vector) -> Option<Vector> {
    let d = h.diagonal().map(|x| if x > 0.0 { 1.0 / x.sqrt() } else { 1.0 });
    let hs = Matrix::from_fn(h.nrows(), h.ncols(), |i, j| d[i] * h[(i, j)] * d[j]);
    let ch = Cholesky::new(hs)?;
    let rhs = -g.component_mul(&d);
    let mut y = ch.solve(&rhs);
    let step = |y: &Vector| y.component_mul(&d);
    let r = -g - h * step(&y);
    y += ch.solve(&r.component_mul(&d));
    Some(step(&y))
}

/// Upper bound on the optimal margin from a point with barrier parameter
/// `τ` and Newton decrement `β < 1`, for a barrier of parameter `θ`.
fn margin_upper_bound(t: f64, tau: f64, theta: f64, beta: f64) -> f64 {
    t + (theta + (beta + theta.sqrt()) * beta / (1.0 - beta)) / tau
}

struct Run {
    pt: Point,
    /// Last point on the central path. A stall returns this rather than a
    /// mid-centering iterate, which depends on round-off.
    centered: Option<Point>,
    log: Vec<String>,
    newton: usize,
    upper: f64,
}

impl Run {
    fn finish(mut self, status: BackendStatus, why: Option<String>) -> MarginSolution {
        if let Some(why) = why {
            self.log.push(why);
        }
        if status == BackendStatus::Stalled {
            if let Some(p) = self.centered.take() {
                self.pt = p;
            }
        }
        MarginSolution {
            c: self.pt.c,
            t: self.pt.t,
            upper_bound: self.upper,
            status,
            iterations: self.newton,
            log: self.log,
        }
    }
}

impl MarginBackend for BarrierBackend {
    fn maximize_margin(&self, prob: &LmiProblem, opts: &SolverOptions) -> MarginSolution {
        let d = prob.dim;
        let theta: f64 = prob.blocks.iter().map(|b| b.f0.nrows() as f64).sum();
        let start = Vector::zeros(d);
        let lam0 = prob
            .blocks
            .iter()
            .map(|b| min_sym_eigenvalue(&b.eval(&start)))
            .fold(f64::INFINITY, f64::min);
        let mut run = Run {
            pt: Point {
                c: start,
                t: lam0 - 1.0,
            },
            centered: None,
            log: Vec::new(),
            newton: 0,
            upper: f64::INFINITY,
        };
        let mut tau = opts.tau0;

        // Every failure below leaves `run.pt` interior, so only a lost
        // factorization or non-finite arithmetic is a hard failure.
        loop {
            let mut centered = false;
            for _ in 0..opts.max_newton_per_center {
                let Some(chol) = factor(prob, &run.pt) else {
                    return run.finish(
                        BackendStatus::NumericalFailure,
                        Some("iterate left the interior".into()),
                    );
                };
                let phi = objective(tau, run.pt.t, &chol);
                let (g, h) = derivatives(prob, tau, &chol);
                let Some(step) = newton_step(&h, &g) else {
                    let why = format!("Hessian lost definiteness at τ = {tau:e}");
                    return run.finish(BackendStatus::Stalled, Some(why));
                };
                let dec2 = -g.dot(&step);
                run.newton += 1;
                if !dec2.is_finite() {
                    return run.finish(
                        BackendStatus::NumericalFailure,
                        Some("non-finite Newton decrement".into()),
                    );
                }
                let beta = dec2.max(0.0).sqrt();
                if beta < 0.5 {
                    run.upper = run.upper.min(margin_upper_bound(run.pt.t, tau, theta, beta));
                }
                // Decreases below a few ulps of φ cannot be observed by the
                // line search, so the decrement is floored there.
                let floor = 1e3 * f64::EPSILON * phi.abs().max(1.0);
                if dec2 / 2.0 <= opts.newton_tol.max(floor) {
                    centered = true;
                    break;
                }
                let mut s = 1.0;
                let mut accepted = false;
                while s > 1e-14 {
                    let trial = Point {
                        c: &run.pt.c + step.rows(0, d) * s,
                        t: run.pt.t + step[d] * s,
                    };
                    if let Some(tc) = factor(prob, &trial) {
                        // Strict decrease: once the Armijo slack is below an
                        // ulp of φ, equal values would accept null steps.
                        let trial_phi = objective(tau, trial.t, &tc);
                        if trial_phi <= phi - 0.25 * s * dec2 && trial_phi < phi {
                            run.pt = trial;
                            accepted = true;
                            break;
                        }
                    }
                    s *= 0.5;
                }
                if !accepted {
                    // Round-off floor: the decrement cannot be reduced further.
                    if dec2 < 1e3 * floor {
                        centered = true;
                        break;
                    }
                    let why = format!("line search stalled at τ = {tau:e}");
                    return run.finish(BackendStatus::Stalled, Some(why));
                }
            }
            if !centered {
                let why = format!("centering did not converge at τ = {tau:e}");
                return run.finish(BackendStatus::Stalled, Some(why));
            }
            let line = format!(
                "τ = {tau:.1e}: t = {:.6e}, bound {:.6e}, Newton steps so far {}",
                run.pt.t, run.upper, run.newton
            );
            run.log.push(line);
            run.centered = Some(run.pt.clone());
            if theta / tau < opts.gap_tol {
                return run.finish(BackendStatus::Converged, None);
            }
            if run.upper <= opts.feas_tol {
                return run.finish(
                    BackendStatus::Converged,
                    Some("margin bound certifies infeasibility".into()),
                );
            }
            if run.newton >= opts.max_newton_total {
                return run.finish(BackendStatus::Stalled, Some("iteration limit reached".into()));
            }
            tau *= opts.tau_growth;
        }
    }
}
