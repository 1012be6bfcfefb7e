//! Feasibility SDP in `(X, Y)` from designer-visible data, gain extraction
//! `K = U1 Y X⁻¹`, and a-priori feasibility diagnostics.
//!
//! The equality `[X; 0] = [Ψ0; M̂] Y` is eliminated exactly: `Y` ranges over
//! an affine subspace on which `Ψ0 Y` is symmetric with trace `ν` and
//! `M̂ Y = 0`, and `X := Ψ0 Y`. What remains is to maximize the margin `t`
//! with `X ⪰ t I` and `[[X, Ψ1 Y], [(Ψ1 Y)ᵀ, X]] ⪰ t I`, handed to a
//! [`MarginBackend`].

mod barrier;

pub use barrier::BarrierBackend;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exo_factorization::{reduce_to_full_row_rank, Regressor};
use crate::experiment::DataMatrices;
use crate::numerics::{min_sym_eigenvalue, pinv, rank_with_tol, symmetrize, Matrix, Vector, DEFAULT_RANK_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Declared feasible iff the recomputed margin exceeds this.
    pub feas_tol: f64,
    pub tau0: f64,
    pub tau_growth: f64,
    /// Stop once the barrier gap bound `θ/τ` falls below this. Pushing it
    /// much lower buys little margin while `K` becomes sensitive to
    /// round-off along flat directions of the optimal face.
    pub gap_tol: f64,
    /// Half the squared Newton decrement at which a center is accepted.
    pub newton_tol: f64,
    pub max_newton_per_center: usize,
    pub max_newton_total: usize,
    /// Relative singular-value cutoff for the constraint nullspace and the
    /// reparametrization.
    pub rank_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-6,
            tau0: 1.0,
            tau_growth: 10.0,
            gap_tol: 1e-7,
            newton_tol: 1e-10,
            max_newton_per_center: 200,
            max_newton_total: 2000,
            rank_tol: 1e-10,
        }
    }
}

/// `F(c) = f0 + Σ c_i fi[i]`, all symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub f0: Matrix,
    pub fi: Vec<Matrix>,
}

impl LmiBlock {
    pub fn eval(&self, c: &Vector) -> Matrix {
        let mut f = self.f0.clone();
        for (ci, fi) in c.iter().zip(&self.fi) {
            f += fi * *ci;
        }
        f
    }
}

/// Maximize `t` subject to `F_j(c) ⪰ t I` for every block.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem {
    pub dim: usize,
    pub blocks: Vec<LmiBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendStatus {
    Converged,
    /// Stopped early at an interior point; the margin was not maximized.
    Stalled,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginSolution {
    pub c: Vector,
    pub t: f64,
    /// Certified upper bound on the optimal margin; infinite if none.
    pub upper_bound: f64,
    pub status: BackendStatus,
    pub iterations: usize,
    pub log: Vec<String>,
}

/// Pluggable optimizer for [`LmiProblem`].
pub trait MarginBackend {
    fn maximize_margin(&self, prob: &LmiProblem, opts: &SolverOptions) -> MarginSolution;
}

/// Designer-visible SDP data.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub u1: Matrix,
    pub psi0: Matrix,
    pub psi1: Matrix,
    pub mhat: Matrix,
}

impl SdpProblem {
    pub fn nu(&self) -> usize {
        self.psi0.nrows()
    }
    /// `N = T - ℓ + 1`.
    pub fn n_cols(&self) -> usize {
        self.psi0.ncols()
    }
    pub fn nhat_w(&self) -> usize {
        self.mhat.nrows()
    }
}

pub fn assemble_sdp(data: &DataMatrices, reg: &Regressor) -> Result<SdpProblem> {
    let mhat = match &reg.selection {
        Some(_) => reg.mhat(),
        None => reduce_to_full_row_rank(&reg.m, DEFAULT_RANK_TOL).0,
    };
    assemble_sdp_from_parts(&data.u1, &data.psi0, &data.psi1, &mhat)
}

pub fn assemble_sdp_from_parts(u1: &Matrix, psi0: &Matrix, psi1: &Matrix, mhat: &Matrix) -> Result<SdpProblem> {
    let (nu, n) = psi0.shape();
    if psi1.shape() != (nu, n) {
        return Err(Error::DimensionMismatch(format!(
            "Ψ1 is {:?}, Ψ0 is {:?}",
            psi1.shape(),
            psi0.shape()
        )));
    }
    if u1.ncols() != n || mhat.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "U1 has {} and M̂ has {} columns, expected N = {n}",
            u1.ncols(),
            mhat.ncols()
        )));
    }
    if nu == 0 || n == 0 {
        return Err(Error::EmptyInput);
    }
    for (m, what) in [(u1, "U1"), (psi0, "Ψ0"), (psi1, "Ψ1"), (mhat, "M̂")] {
        crate::numerics::ensure_finite(m, what)?;
    }
    Ok(SdpProblem {
        u1: u1.clone(),
        psi0: psi0.clone(),
        psi1: psi1.clone(),
        mhat: mhat.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisStatus {
    Feasible,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub status: SynthesisStatus,
    /// Smallest eigenvalue over both LMI blocks at the returned point.
    pub margin: f64,
    #[serde(with = "crate::numerics::serde_rows")]
    pub x: Matrix,
    #[serde(with = "crate::numerics::serde_rows")]
    pub y: Matrix,
    /// Present when `status` is feasible.
    #[serde(with = "crate::numerics::serde_rows_opt")]
    pub k: Option<Matrix>,
    /// `‖[K; I; 0] - [U1; Ψ0; M̂] Y X⁻¹‖` when `k` is present.
    pub gain_identity_residual: Option<f64>,
    pub newton_steps: usize,
    pub diagnostics: Vec<String>,
}

impl SynthesisResult {
    pub fn is_feasible(&self) -> bool {
        self.status == SynthesisStatus::Feasible
    }
}

/// Independent re-evaluation of the SDP constraints at `(X, Y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub x_min_eig: f64,
    pub schur_min_eig: f64,
    /// `‖X - Xᵀ‖`.
    pub x_asymmetry: f64,
    /// `‖Ψ0 Y - X‖ / ‖X‖`.
    pub equality_residual: f64,
    /// `‖M̂ Y‖ / ‖Y‖`.
    pub annihilation_residual: f64,
}

pub fn schur_block(x: &Matrix, z: &Matrix) -> Matrix {
    let nu = x.nrows();
    let mut s = Matrix::zeros(2 * nu, 2 * nu);
    s.view_mut((0, 0), (nu, nu)).copy_from(x);
    s.view_mut((nu, nu), (nu, nu)).copy_from(x);
    s.view_mut((0, nu), (nu, nu)).copy_from(z);
    s.view_mut((nu, 0), (nu, nu)).copy_from(&z.transpose());
    s
}

pub fn check_constraints(prob: &SdpProblem, x: &Matrix, y: &Matrix) -> ConstraintCheck {
    let rel = |num: f64, den: f64| if den > 0.0 { num / den } else { num };
    ConstraintCheck {
        x_min_eig: min_sym_eigenvalue(x),
        schur_min_eig: min_sym_eigenvalue(&schur_block(x, &(&prob.psi1 * y))),
        x_asymmetry: (x - x.transpose()).norm(),
        equality_residual: rel((&prob.psi0 * y - x).norm(), x.norm()),
        annihilation_residual: rel((&prob.mhat * y).norm(), y.norm()),
    }
}

/// Column-major reshape of `z` into the `N x ν` matrix `Y`.
fn unvec(z: &Vector, n: usize, nu: usize) -> Matrix {
    Matrix::from_column_slice(n, nu, z.as_slice())
}

/// Linear constraints `E vec(Y) = r` describing the eliminated equality.
fn constraint_system(prob: &SdpProblem) -> (Matrix, Vector) {
    let (nu, n) = prob.psi0.shape();
    let nh = prob.nhat_w();
    let rows = nu * (nu - 1) / 2 + nh * nu + 1;
    let mut e = Matrix::zeros(rows, n * nu);
    let mut r = Vector::zeros(rows);
    let mut row = 0;
    // (Ψ0 Y)_ij - (Ψ0 Y)_ji = 0
    for i in 0..nu {
        for j in i + 1..nu {
            for k in 0..n {
                e[(row, k + j * n)] += prob.psi0[(i, k)];
                e[(row, k + i * n)] -= prob.psi0[(j, k)];
            }
            row += 1;
        }
    }
    // (M̂ Y)_rj = 0
    for a in 0..nh {
        for j in 0..nu {
            for k in 0..n {
                e[(row, k + j * n)] = prob.mhat[(a, k)];
            }
            row += 1;
        }
    }
    // trace(Ψ0 Y) = ν
    for i in 0..nu {
        for k in 0..n {
            e[(row, k + i * n)] = prob.psi0[(i, k)];
        }
    }
    r[row] = nu as f64;
    (e, r)
}

/// Orthonormal basis of the nullspace of `e`, one column per direction.
fn nullspace(e: &Matrix, rel_tol: f64) -> Matrix {
    let cols = e.ncols();
    // Pad to at least square so the SVD returns a complete right basis.
    let padded = if e.nrows() < cols {
        let mut p = Matrix::zeros(cols, cols);
        p.view_mut((0, 0), e.shape()).copy_from(e);
        p
    } else {
        e.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let smax = svd.singular_values.max();
    let cut = rel_tol * smax.max(f64::MIN_POSITIVE);
    let keep: Vec<usize> = (0..vt.nrows()).filter(|&i| svd.singular_values[i] <= cut).collect();
    Matrix::from_fn(cols, keep.len(), |r, c| vt[(keep[c], r)])
}

fn infeasible_trivially(prob: &SdpProblem, why: String) -> SynthesisResult {
    let (nu, n) = prob.psi0.shape();
    SynthesisResult {
        status: SynthesisStatus::Infeasible,
        margin: 0.0,
        x: Matrix::zeros(nu, nu),
        y: Matrix::zeros(n, nu),
        k: None,
        gain_identity_residual: None,
        newton_steps: 0,
        diagnostics: vec![why],
    }
}

/// Solve with the built-in barrier backend.
pub fn solve_feasibility_sdp(prob: &SdpProblem, opts: &SolverOptions) -> SynthesisResult {
    solve_feasibility_sdp_with(prob, opts, &BarrierBackend)
}

pub fn solve_feasibility_sdp_with(
    prob: &SdpProblem,
    opts: &SolverOptions,
    backend: &dyn MarginBackend,
) -> SynthesisResult {
    let (nu, n) = prob.psi0.shape();
    let (e, r) = constraint_system(prob);
    let z0 = pinv(&e) * &r;
    let consistency = (&e * &z0 - &r).norm() / r.norm();
    if consistency > 1e-8 {
        return infeasible_trivially(
            prob,
            format!(
                "trace(Ψ0 Y) = ν is unattainable on the constraint set (residual {consistency:.3e}); X = 0 is forced"
            ),
        );
    }
    let null = nullspace(&e, opts.rank_tol);

    // Map each nullspace direction to (vec X, vec Ψ1 Y) and drop directions
    // that move neither, then whiten so the map is an isometry.
    let image = |z: &Vector| -> (Matrix, Matrix) {
        let y = unvec(z, n, nu);
        (symmetrize(&(&prob.psi0 * &y)), &prob.psi1 * &y)
    };
    let mut jac = Matrix::zeros(2 * nu * nu, null.ncols());
    for i in 0..null.ncols() {
        let (x, z) = image(&null.column(i).into_owned());
        jac.view_mut((0, i), (nu * nu, 1)).copy_from_slice(x.as_slice());
        jac.view_mut((nu * nu, i), (nu * nu, 1)).copy_from_slice(z.as_slice());
    }
    let basis = if null.ncols() == 0 {
        null
    } else {
        let svd = jac.svd(false, true);
        let vt = svd.v_t.expect("requested V");
        // The nullspace basis is orthonormal, so singular values of the map
        // are bounded by the data norms; cut relative to those rather than
        // to the largest singular value, which may itself be round-off.
        let scale = prob.psi0.norm().max(prob.psi1.norm()).max(f64::MIN_POSITIVE);
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > opts.rank_tol * scale)
            .collect();
        let mut w = Matrix::zeros(null.ncols(), keep.len());
        for (c, &i) in keep.iter().enumerate() {
            w.set_column(c, &(vt.row(i).transpose() / svd.singular_values[i]));
        }
        &null * w
    };

    let (x0, z0img) = image(&z0);
    let mut fx = Vec::with_capacity(basis.ncols());
    let mut fs = Vec::with_capacity(basis.ncols());
    for i in 0..basis.ncols() {
        let (x, z) = image(&basis.column(i).into_owned());
        fs.push(schur_block(&x, &z));
        fx.push(x);
    }
    let lmi = LmiProblem {
        dim: basis.ncols(),
        blocks: vec![
            LmiBlock { f0: x0.clone(), fi: fx },
            LmiBlock {
                f0: schur_block(&x0, &z0img),
                fi: fs,
            },
        ],
    };
    let sol = backend.maximize_margin(&lmi, opts);
    let mut diagnostics = vec![format!(
        "ν = {nu}, N = {n}, n̂_w = {}, free directions {}",
        prob.nhat_w(),
        lmi.dim
    )];
    diagnostics.extend(sol.log.iter().cloned());

    let z = &z0 + &basis * &sol.c;
    let y = unvec(&z, n, nu);
    let x = symmetrize(&(&prob.psi0 * &y));
    let check = check_constraints(prob, &x, &y);
    let margin = check.x_min_eig.min(check.schur_min_eig);
    diagnostics.push(format!(
        "backend t = {:.6e}, bound {:.6e}, recomputed margin = {margin:.6e}",
        sol.t, sol.upper_bound
    ));

    let status = match sol.status {
        BackendStatus::NumericalFailure => SynthesisStatus::NumericalFailure,
        // An interior point with a positive margin certifies feasibility
        // even if the margin was not maximized.
        _ if margin > opts.feas_tol => SynthesisStatus::Feasible,
        _ if sol.upper_bound <= opts.feas_tol => SynthesisStatus::Infeasible,
        BackendStatus::Converged => SynthesisStatus::Infeasible,
        BackendStatus::Stalled => SynthesisStatus::NumericalFailure,
    };
    let (k, gain_identity_residual) = if status == SynthesisStatus::Feasible {
        match extract_gain(prob, &x, &y) {
            Ok(g) => (Some(g.k), Some(g.identity_residual)),
            Err(err) => {
                diagnostics.push(format!("gain extraction failed: {err}"));
                (None, None)
            }
        }
    } else {
        (None, None)
    };
    let status = if status == SynthesisStatus::Feasible && k.is_none() {
        SynthesisStatus::NumericalFailure
    } else {
        status
    };
    SynthesisResult {
        status,
        margin,
        x,
        y,
        k,
        gain_identity_residual,
        newton_steps: sol.iterations,
        diagnostics,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gain {
    pub k: Matrix,
    /// `G = Y X⁻¹`.
    pub g: Matrix,
    /// `‖[K; I; 0] - [U1; Ψ0; M̂] G‖`.
    pub identity_residual: f64,
}

pub const GAIN_IDENTITY_TOL: f64 = 1e-6;

/// `K = U1 Y X⁻¹`, checked against `[K; I; 0] = [U1; Ψ0; M̂] Y X⁻¹`.
pub fn extract_gain(prob: &SdpProblem, x: &Matrix, y: &Matrix) -> Result<Gain> {
    let lmin = min_sym_eigenvalue(x);
    if lmin.is_nan() || lmin <= 1e-10 {
        return Err(Error::SingularX(lmin));
    }
    let xinv = symmetrize(x).cholesky().ok_or(Error::SingularX(lmin))?.inverse();
    let g = y * xinv;
    let k = &prob.u1 * &g;
    let nu = prob.nu();
    let top = (&prob.u1 * &g - &k).norm_squared();
    let mid = (&prob.psi0 * &g - Matrix::identity(nu, nu)).norm_squared();
    let bot = (&prob.mhat * &g).norm_squared();
    let identity_residual = (top + mid + bot).sqrt();
    if identity_residual > GAIN_IDENTITY_TOL {
        return Err(Error::Config(format!(
            "[K; I; 0] = [U1; Ψ0; M̂] Y X⁻¹ violated by {identity_residual:.3e}"
        )));
    }
    Ok(Gain {
        k,
        g,
        identity_residual,
    })
}

/// Outcome of [`feasibility_precheck`]; warnings never block synthesis.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Precheck {
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

pub const PROP_INFEASIBLE_WARNING: &str = "SDP provably infeasible: p·ℓ > n with full-row-rank M̂";

/// Cheap a-priori diagnostics.
///
/// With the true state dimension (harness mode) the condition `p·ℓ > n`
/// together with a full-row-rank `M̂` rules out feasibility. Without it, a
/// rank test of `[Ψ0; M̂]` is reported as a heuristic only.
pub fn feasibility_precheck(p: usize, ell: usize, mhat: &Matrix, psi0: &Matrix, n_truth: Option<usize>) -> Precheck {
    let mut out = Precheck::default();
    let (nu, n) = psi0.shape();
    let nh = mhat.nrows();
    if let Some(n_true) = n_truth {
        if p * ell > n_true && nh > 0 {
            out.warnings
                .push(format!("{PROP_INFEASIBLE_WARNING} (p·ℓ = {} > n = {n_true})", p * ell));
        }
    }
    if nh > 0 {
        let stacked = crate::numerics::vstack(&[psi0, mhat]);
        if let Ok(rank) = rank_with_tol(&stacked, DEFAULT_RANK_TOL) {
            if rank < nu + nh {
                out.warnings.push(format!(
                    "heuristic: rank [Ψ0; M̂] = {rank} < ν + n̂_w = {}; X is confined to a proper subspace image and may be unable to be positive definite",
                    nu + nh
                ));
            }
        }
    }
    out.notes.push(format!(
        "experiment length: N = {n} columns, ν + n̂_w = {}{}",
        nu + nh,
        if n >= nu + nh {
            ""
        } else {
            " (consider a longer experiment)"
        }
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::from_rows;

    #[test]
    fn psi0_zero_is_infeasible() {
        let prob = assemble_sdp_from_parts(
            &Matrix::zeros(1, 3),
            &Matrix::zeros(2, 3),
            &Matrix::from_element(2, 3, 1.0),
            &Matrix::zeros(0, 3),
        )
        .unwrap();
        let res = solve_feasibility_sdp(&prob, &SolverOptions::default());
        assert_eq!(res.status, SynthesisStatus::Infeasible);
        assert!(res.margin <= 1e-6);
        assert!(res.k.is_none());
    }

    #[test]
    fn shapes_checked() {
        assert!(assemble_sdp_from_parts(
            &Matrix::zeros(1, 3),
            &Matrix::zeros(2, 3),
            &Matrix::zeros(2, 4),
            &Matrix::zeros(0, 3),
        )
        .is_err());
    }

    #[test]
    fn scalar_stable_system_is_feasible() {
        // One-dimensional "state" with Ψ1 = 0.5 Ψ0: any Y works, X = Ψ0 Y.
        let psi0 = from_rows(&[&[1.0, 2.0, -1.0]]);
        let psi1 = &psi0 * 0.5;
        let u1 = from_rows(&[&[0.3, -0.2, 0.1]]);
        let prob = assemble_sdp_from_parts(&u1, &psi0, &psi1, &Matrix::zeros(0, 3)).unwrap();
        let res = solve_feasibility_sdp(&prob, &SolverOptions::default());
        assert_eq!(res.status, SynthesisStatus::Feasible, "{:?}", res.diagnostics);
        // X = 1 by normalization; the Schur block [[1, .5],[.5, 1]] has min eig 0.5.
        assert!((res.x[(0, 0)] - 1.0).abs() < 1e-9);
        assert!((res.margin - 0.5).abs() < 1e-6);
        let check = check_constraints(&prob, &res.x, &res.y);
        assert!(check.equality_residual < 1e-7);
        assert!(res.gain_identity_residual.unwrap() < 1e-6);
    }

    #[test]
    fn unstable_scalar_is_infeasible() {
        let psi0 = from_rows(&[&[1.0, 2.0, -1.0]]);
        let psi1 = &psi0 * 1.5;
        let prob = assemble_sdp_from_parts(&Matrix::zeros(1, 3), &psi0, &psi1, &Matrix::zeros(0, 3)).unwrap();
        let res = solve_feasibility_sdp(&prob, &SolverOptions::default());
        assert_eq!(res.status, SynthesisStatus::Infeasible, "{:?}", res.diagnostics);
        assert!(res.margin <= 1e-6);
    }

    #[test]
    fn precheck_warnings() {
        let psi0 = Matrix::identity(4, 6);
        let mhat = from_rows(&[&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]]);
        let pc = feasibility_precheck(1, 4, &mhat, &psi0, Some(4));
        assert!(pc.warnings.iter().all(|w| !w.contains("provably")));
        let pc = feasibility_precheck(2, 2, &mhat, &psi0, Some(3));
        assert!(pc.warnings.iter().any(|w| w.contains("provably infeasible")));
        let pc = feasibility_precheck(2, 2, &Matrix::zeros(0, 6), &psi0, Some(3));
        assert!(pc.warnings.is_empty());
        assert_eq!(pc.notes.len(), 1);
    }

    #[test]
    fn constraint_rows_match_definition() {
        let psi0 = from_rows(&[&[1.0, 2.0, 0.5], &[0.0, -1.0, 3.0]]);
        let mhat = from_rows(&[&[1.0, 1.0, 1.0]]);
        let prob = assemble_sdp_from_parts(&Matrix::zeros(1, 3), &psi0, &psi0, &mhat).unwrap();
        let (e, r) = constraint_system(&prob);
        let y = from_rows(&[&[0.2, -1.0], &[0.7, 0.4], &[-0.3, 2.0]]);
        let z = Vector::from_column_slice(y.as_slice());
        let lhs = &e * &z;
        let py = &psi0 * &y;
        let my = &mhat * &y;
        assert!((lhs[0] - (py[(0, 1)] - py[(1, 0)])).abs() < 1e-12);
        assert!((lhs[1] - my[(0, 0)]).abs() < 1e-12);
        assert!((lhs[2] - my[(0, 1)]).abs() < 1e-12);
        assert!((lhs[3] - py.trace()).abs() < 1e-12);
        assert_eq!(r[3], 2.0);
    }
}
