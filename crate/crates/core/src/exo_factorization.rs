//! Known regressors `M` with `W0 = L0 · M`: the Jordan-structure
//! construction, the Krylov alternative, and full-row-rank reduction.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{binomial_ext, eigenvalues, pinv, rank_with_tol, Matrix, Vector, DEFAULT_RANK_TOL};
use crate::plant::ExoMatrix;

/// Real Jordan structure of `S`. Complex blocks stand for a conjugate pair
/// `ρ e^{±iθ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JordanSpec {
    /// `(λ, k)`.
    pub real_blocks: Vec<(f64, usize)>,
    /// `(ρ, θ, k)` with `θ ∈ (0, π)`.
    pub complex_blocks: Vec<(f64, f64, usize)>,
}

impl JordanSpec {
    pub fn new(real_blocks: Vec<(f64, usize)>, complex_blocks: Vec<(f64, f64, usize)>) -> Self {
        Self {
            real_blocks,
            complex_blocks,
        }
    }

    pub fn n_w(&self) -> usize {
        self.real_blocks.iter().map(|b| b.1).sum::<usize>() + 2 * self.complex_blocks.iter().map(|b| b.2).sum::<usize>()
    }

    pub fn max_block(&self) -> usize {
        self.real_blocks
            .iter()
            .map(|b| b.1)
            .chain(self.complex_blocks.iter().map(|b| b.2))
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::JordanSpecMismatch(msg));
        for &(lambda, k) in &self.real_blocks {
            if k == 0 || !lambda.is_finite() {
                return bad(format!("invalid real block ({lambda}, {k})"));
            }
            if lambda.abs() < 1.0 - 1e-9 {
                return Err(Error::ExoEigenInsideUnitCircle { modulus: lambda.abs() });
            }
        }
        for &(rho, theta, k) in &self.complex_blocks {
            if k == 0 || !rho.is_finite() || !theta.is_finite() {
                return bad(format!("invalid complex block ({rho}, {theta}, {k})"));
            }
            if rho < 1.0 - 1e-9 {
                return Err(Error::ExoEigenInsideUnitCircle { modulus: rho });
            }
            if !(theta > 0.0 && theta < PI) {
                return bad(format!("angle {theta} outside (0, π)"));
            }
        }
        Ok(())
    }

    /// Eigenvalues with algebraic multiplicity, one representative per
    /// conjugate pair (positive imaginary part).
    fn eigen_groups(&self) -> Vec<(Complex64, usize)> {
        self.real_blocks
            .iter()
            .map(|&(l, k)| (Complex64::new(l, 0.0), k))
            .chain(
                self.complex_blocks
                    .iter()
                    .map(|&(r, th, k)| (Complex64::from_polar(r, th), k)),
            )
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorizationMethod {
    Jordan,
    Krylov,
}

impl std::str::FromStr for FactorizationMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jordan" => Ok(Self::Jordan),
            "krylov" => Ok(Self::Krylov),
            other => Err(Error::Config(format!("unknown factorization `{other}`"))),
        }
    }
}

/// How [`analyze_exosystem`] obtains the Jordan structure.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisMode {
    Declared(JordanSpec),
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    /// `n_w x (T-ℓ+1)`, columns indexed by `t = ℓ, ..., T`.
    pub m: Matrix,
    pub method: FactorizationMethod,
    /// Rows of `m` kept in `M̂`, once reduced.
    pub selection: Option<Vec<usize>>,
}

impl Regressor {
    /// Fill in `selection` by greedy full-row-rank reduction.
    pub fn reduce(&mut self, tol: f64) {
        let (_, sel) = reduce_to_full_row_rank(&self.m, tol);
        self.selection = Some(sel);
    }

    /// `M̂`: the selected rows, or `M` itself before reduction.
    pub fn mhat(&self) -> Matrix {
        match &self.selection {
            Some(sel) => select_rows(&self.m, sel),
            None => self.m.clone(),
        }
    }

    /// One row per line, first column the row index, header `row,t=ℓ,...`.
    pub fn write_csv<W: Write>(&self, out: W, ell: usize) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["row".to_string()];
        header.extend((0..self.m.ncols()).map(|j| format!("t={}", ell + j)));
        wtr.write_record(&header)?;
        for i in 0..self.m.nrows() {
            let mut row = vec![i.to_string()];
            row.extend(self.m.row(i).iter().map(|x| format!("{x:e}")));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn select_rows(m: &Matrix, sel: &[usize]) -> Matrix {
    Matrix::from_fn(sel.len(), m.ncols(), |i, j| m[(sel[i], j)])
}

/// Default eigenvalue clustering radius, relative to `‖S‖`.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;

/// Clusters closer than this (relative to `‖S‖`) are checked jointly for
/// defectiveness, because a perturbed Jordan block of size `k` splits its
/// eigenvalue by roughly `ε^{1/k}`.
const MERGE_RADIUS: f64 = 1e-4;

/// Recover or validate the Jordan structure of `S`.
///
/// `tol` is the eigenvalue clustering radius relative to `‖S‖`.
pub fn analyze_exosystem(exo: &ExoMatrix, mode: &AnalysisMode, tol: f64) -> Result<JordanSpec> {
    let s = exo.s();
    let scale = s.norm().max(1.0);
    let eigs = eigenvalues(s)?;
    match mode {
        AnalysisMode::Declared(spec) => {
            check_declared(s, &eigs, spec, tol, scale)?;
            Ok(spec.clone())
        }
        AnalysisMode::Auto => auto_structure(s, &eigs, tol, scale),
    }
}

fn check_declared(s: &Matrix, eigs: &[Complex64], spec: &JordanSpec, tol: f64, scale: f64) -> Result<()> {
    spec.validate()?;
    let n = s.nrows();
    if spec.n_w() != n {
        return Err(Error::JordanSpecMismatch(format!(
            "block sizes sum to {}, S is {n}x{n}",
            spec.n_w()
        )));
    }
    // A size-k block is only determined to about ε^{1/k}.
    let kmax = spec.max_block().max(1) as f64;
    let match_tol = (tol * scale).max(10.0 * (1e-15 * scale).powf(1.0 / kmax) * scale.max(1.0));
    let mut expected: Vec<Complex64> = Vec::with_capacity(n);
    for (mu, k) in spec.eigen_groups() {
        for _ in 0..k {
            expected.push(mu);
            if mu.im != 0.0 {
                expected.push(mu.conj());
            }
        }
    }
    let mut used = vec![false; eigs.len()];
    for mu in &expected {
        let best = eigs
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, e)| (i, (e - mu).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((i, d)) if d <= match_tol => used[i] = true,
            _ => {
                return Err(Error::JordanSpecMismatch(format!(
                    "declared eigenvalue {mu} not in the spectrum of S"
                )))
            }
        }
    }

    // The implied minimal polynomial must annihilate S, which rules out
    // declaring a defective eigenvalue as semisimple.
    let mut distinct: Vec<(Complex64, usize)> = Vec::new();
    for (mu, k) in spec.eigen_groups() {
        match distinct.iter_mut().find(|(d, _)| (d - mu).norm() <= match_tol) {
            Some(entry) => entry.1 = entry.1.max(k),
            None => distinct.push((mu, k)),
        }
    }
    let id = Matrix::identity(n, n);
    let mut poly = id.clone();
    let mut bound = 1.0;
    for (mu, k) in distinct {
        let factor = if mu.im == 0.0 {
            s - &id * mu.re
        } else {
            s * s - s * (2.0 * mu.re) + &id * mu.norm_sqr()
        };
        let fnorm = if mu.im == 0.0 {
            scale + mu.norm()
        } else {
            (scale + mu.norm()).powi(2)
        };
        for _ in 0..k {
            poly = &poly * &factor;
            bound *= fnorm;
        }
    }
    if poly.norm() > 1e-6 * bound {
        return Err(Error::JordanSpecMismatch(format!(
            "declared blocks do not annihilate S (residual {:.3e})",
            poly.norm() / bound
        )));
    }
    Ok(())
}

fn auto_structure(s: &Matrix, eigs: &[Complex64], tol: f64, scale: f64) -> Result<JordanSpec> {
    let n = s.nrows();
    let radius = tol * scale;
    // Representatives with Im ≥ 0; conjugates are implied.
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for e in eigs.iter().filter(|e| e.im >= -radius) {
        let e = Complex64::new(e.re, if e.im.abs() <= radius { 0.0 } else { e.im });
        match clusters.iter_mut().find(|(c, _)| (c - e).norm() <= radius) {
            Some(c) => {
                c.0 = (c.0 * c.1 as f64 + e) / (c.1 + 1) as f64;
                c.1 += 1;
            }
            None => clusters.push((e, 1)),
        }
    }
    // Merge nearby clusters so split defective eigenvalues are tested together.
    let mut groups: Vec<(Complex64, usize)> = Vec::new();
    for (c, k) in clusters {
        match groups.iter_mut().find(|(g, _)| (g - c).norm() <= MERGE_RADIUS * scale) {
            Some(g) => {
                g.0 = (g.0 * g.1 as f64 + c * k as f64) / (g.1 + k) as f64;
                g.1 += k;
            }
            None => groups.push((c, k)),
        }
    }
    let mut real = Vec::new();
    let mut complex = Vec::new();
    for (mu, k) in groups {
        let is_real = mu.im.abs() <= MERGE_RADIUS * scale;
        let rank = if is_real {
            let m = s - Matrix::identity(n, n) * mu.re;
            rank_with_tol(&m, DEFAULT_RANK_TOL)?
        } else {
            // Rank of S - μI over ℂ is half the rank of its real form.
            let mut m = Matrix::zeros(2 * n, 2 * n);
            let shifted = s - Matrix::identity(n, n) * mu.re;
            let im = Matrix::identity(n, n) * mu.im;
            m.view_mut((0, 0), (n, n)).copy_from(&shifted);
            m.view_mut((n, n), (n, n)).copy_from(&shifted);
            m.view_mut((0, n), (n, n)).copy_from(&im);
            m.view_mut((n, 0), (n, n)).copy_from(&(-&im));
            rank_with_tol(&m, DEFAULT_RANK_TOL)? / 2
        };
        if n - rank < k {
            return Err(Error::DefectiveExosystem);
        }
        if is_real {
            real.extend(std::iter::repeat_n((mu.re, 1), k));
        } else {
            complex.extend(std::iter::repeat_n((mu.norm(), mu.arg(), 1), k));
        }
    }
    real.sort_by(|a, b| a.0.total_cmp(&b.0));
    complex.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    let spec = JordanSpec::new(real, complex);
    if spec.n_w() != n {
        return Err(Error::EigenFailure);
    }
    spec.validate()?;
    Ok(spec)
}

/// Weight `C(t, e) ρ^e` for exponent `e = t - k + j`, zero when `e < 0`.
fn weight(t: usize, e: i64, rho: f64) -> f64 {
    let b = binomial_ext(t as i64, e).expect("exponent never exceeds t");
    if b == 0 {
        0.0
    } else {
        b as f64 * rho.powi(e as i32)
    }
}

/// Jordan-structure regressor, real blocks first, then complex blocks.
pub fn build_m_jordan(spec: &JordanSpec, ell: usize, t: usize) -> Result<Regressor> {
    if t < ell {
        return Err(Error::ExperimentTooShort { t, ell });
    }
    spec.validate()?;
    let cols = t - ell + 1;
    let mut m = Matrix::zeros(spec.n_w(), cols);
    for c in 0..cols {
        let time = ell + c;
        let mut r = 0;
        for &(lambda, k) in &spec.real_blocks {
            for j in 1..=k {
                let e = time as i64 - k as i64 + j as i64;
                let b = binomial_ext(time as i64, e)?;
                m[(r, c)] = if b == 0 { 0.0 } else { b as f64 * lambda.powi(e as i32) };
                r += 1;
            }
        }
        for &(rho, theta, k) in &spec.complex_blocks {
            for j in 1..=k {
                let e = time as i64 - k as i64 + j as i64;
                let w = weight(time, e, rho);
                let ang = theta * e as f64;
                m[(r, c)] = w * ang.cos();
                m[(r + 1, c)] = w * ang.sin();
                r += 2;
            }
        }
    }
    Ok(Regressor {
        m,
        method: FactorizationMethod::Jordan,
        selection: None,
    })
}

/// Krylov regressor `[w⋆, S w⋆, ..., S^{T-ℓ} w⋆]`.
pub fn build_m_krylov(exo: &ExoMatrix, w_star: &Vector, ell: usize, t: usize) -> Result<Regressor> {
    let n_w = exo.n_w();
    if w_star.len() != n_w {
        return Err(Error::DimensionMismatch(format!(
            "w⋆ has {} entries, n_w = {n_w}",
            w_star.len()
        )));
    }
    if t < ell {
        return Err(Error::ExperimentTooShort { t, ell });
    }
    let cols = t - ell + 1;
    if cols < n_w {
        return Err(Error::KrylovTooShort { cols, n_w });
    }
    let mut m = Matrix::zeros(n_w, cols);
    let mut v = w_star.clone();
    for c in 0..cols {
        m.set_column(c, &v);
        v = exo.s() * v;
    }
    let rank = rank_with_tol(&m, DEFAULT_RANK_TOL)?;
    if rank < n_w {
        return Err(Error::NotCyclic { rank, n_w });
    }
    Ok(Regressor {
        m,
        method: FactorizationMethod::Krylov,
        selection: None,
    })
}

/// Greedy earliest-row basis of the row space of `m`.
///
/// A row is kept when its component orthogonal to the rows already kept
/// exceeds `tol` times its own norm. Rows with norm below `tol` times the
/// largest row norm count as zero and are dropped, so the zero matrix
/// reduces to an empty `M̂`.
pub fn reduce_to_full_row_rank(m: &Matrix, tol: f64) -> (Matrix, Vec<usize>) {
    let max_norm = (0..m.nrows()).map(|i| m.row(i).norm()).fold(0.0, f64::max);
    let mut basis: Vec<Vector> = Vec::new();
    let mut sel = Vec::new();
    for i in 0..m.nrows() {
        let row: Vector = m.row(i).transpose();
        let norm = row.norm();
        if max_norm == 0.0 || norm <= tol * max_norm {
            continue;
        }
        let mut r = row.clone();
        // Two passes of classical Gram-Schmidt keep the basis orthonormal.
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&r);
                r -= q * c;
            }
        }
        let rn = r.norm();
        if rn > tol * norm {
            basis.push(r / rn);
            sel.push(i);
        }
    }
    (select_rows(m, &sel), sel)
}

/// Relative residual of the least-squares fit `W0 ≈ L · M`.
pub fn factorization_residual(w0: &Matrix, m: &Matrix) -> f64 {
    let n = w0.norm();
    if n == 0.0 {
        return 0.0;
    }
    if m.nrows() == 0 {
        return 1.0;
    }
    let l = w0 * pinv(m);
    (w0 - l * m).norm() / n
}
