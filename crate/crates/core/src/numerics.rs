//! Dense real-matrix primitives: tolerant rank, eigenvalues, least squares,
//! minimal polynomial, Sylvester solve and the extended binomial coefficient.
//!
//! Every rank decision in the crate routes through [`rank_with_tol`].

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative singular-value threshold used for rank decisions by default.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Minimum pairwise eigenvalue distance accepted by [`solve_sylvester`].
pub const RESONANCE_TOL: f64 = 1e-9;

pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub fn ensure_square(m: &Matrix, what: &'static str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::NotSquare {
            what,
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

/// Number of singular values above `rel_tol` times the largest one.
pub fn rank_with_tol(m: &Matrix, rel_tol: f64) -> Result<usize> {
    if m.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > rel_tol * smax).count())
}

/// Moore-Penrose pseudo-inverse with a relative singular-value cutoff.
pub fn pinv(m: &Matrix) -> Matrix {
    if m.is_empty() {
        return Matrix::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cut = smax * f64::EPSILON * m.nrows().max(m.ncols()) as f64;
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut sinv = Matrix::zeros(vt.nrows(), u.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cut {
            sinv[(i, i)] = 1.0 / s;
        }
    }
    vt.transpose() * sinv * u.transpose()
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq(a: &Matrix, b: &Matrix) -> Matrix {
    pinv(a) * b
}

pub fn matrix_power(a: &Matrix, k: usize) -> Matrix {
    let mut out = Matrix::identity(a.nrows(), a.ncols());
    for _ in 0..k {
        out = &out * a;
    }
    out
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_sym_eigenvalue(m: &Matrix) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    symmetrize(m).symmetric_eigenvalues().min()
}

/// Eigenvalues of a general real square matrix via the real Schur form.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex64>> {
    ensure_square(m, "eigenvalues")?;
    if m.is_empty() {
        return Ok(Vec::new());
    }
    ensure_finite(m, "eigenvalue input")?;
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 100_000).ok_or(Error::EigenFailure)?;
    let ev = schur.complex_eigenvalues();
    Ok(ev.iter().copied().collect())
}

pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Monic minimal polynomial `s_0 + s_1 λ + ... + s_{d-1} λ^{d-1} + λ^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimalPolynomial {
    coeffs: Vec<f64>,
}

impl MinimalPolynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "minimal polynomial has degree >= 1");
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    /// `s_0, ..., s_{d-1}`; the leading coefficient is implicitly 1.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        // Horner, starting from the implicit leading 1.
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(1.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn eval_matrix(&self, s: &Matrix) -> Matrix {
        let n = s.nrows();
        let id = Matrix::identity(n, n);
        self.coeffs.iter().rev().fold(id.clone(), |acc, &c| &acc * s + &id * c)
    }

    /// Round every coefficient lying within `tol` of an integer.
    pub fn snapped(&self, tol: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .map(|&c| if (c - c.round()).abs() <= tol { c.round() } else { c })
            .collect();
        Self { coeffs }
    }
}

/// Smallest `d` such that `vec(S^d)` lies in the span of
/// `vec(S^0), ..., vec(S^{d-1})` up to relative residual `tol`.
///
/// The search runs on `S / ‖S‖` and rescales the coefficients afterwards so
/// the power basis stays well scaled.
pub fn minimal_polynomial(s: &Matrix, tol: f64) -> Result<MinimalPolynomial> {
    ensure_square(s, "minimal_polynomial")?;
    if s.is_empty() {
        return Err(Error::EmptyInput);
    }
    ensure_finite(s, "minimal_polynomial input")?;
    let n = s.nrows();
    let scale = s.norm();
    if scale == 0.0 {
        return Ok(MinimalPolynomial::new(vec![0.0]));
    }
    let sn = s / scale;

    let mut powers: Vec<Matrix> = vec![Matrix::identity(n, n)];
    for d in 1..=n {
        let next = &powers[d - 1] * &sn;
        let mut basis = Matrix::zeros(n * n, d);
        for (j, p) in powers.iter().enumerate() {
            basis.set_column(j, &Vector::from_column_slice(p.as_slice()));
        }
        let target = Matrix::from_column_slice(n * n, 1, next.as_slice());
        let c = lstsq(&basis, &target);
        let resid = (&basis * &c - &target).norm();
        let tnorm = target.norm();
        if d == n || resid <= tol * tnorm.max(f64::MIN_POSITIVE) || tnorm == 0.0 {
            // S̃^d = Σ c_i S̃^i  ⇒  s̃_i = -c_i, and s_i = s̃_i · scale^{d-i}.
            let coeffs = (0..d).map(|i| -c[(i, 0)] * scale.powi((d - i) as i32)).collect();
            return Ok(MinimalPolynomial::new(coeffs));
        }
        powers.push(next);
    }
    unreachable!("Cayley-Hamilton bounds the degree by n")
}

/// Solve `A Π - Π S = Q` for `Π`.
///
/// Reduces `S` to real Schur form `S = U T Uᵀ` and sweeps the columns of
/// `Π U`, solving a dense system per 1x1 or 2x2 diagonal block of `T`.
pub fn solve_sylvester(a: &Matrix, s: &Matrix, q: &Matrix) -> Result<Matrix> {
    ensure_square(a, "solve_sylvester: A")?;
    ensure_square(s, "solve_sylvester: S")?;
    let (n, k) = (a.nrows(), s.nrows());
    if q.nrows() != n || q.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "Q is {}x{}, expected {}x{}",
            q.nrows(),
            q.ncols(),
            n,
            k
        )));
    }
    if n == 0 || k == 0 {
        return Ok(Matrix::zeros(n, k));
    }

    let ea = eigenvalues(a)?;
    let es = eigenvalues(s)?;
    for la in &ea {
        for ls in &es {
            if (la - ls).norm() < RESONANCE_TOL {
                return Err(Error::ResonantSpectra(la.to_string(), ls.to_string()));
            }
        }
    }

    let schur = Schur::try_new(s.clone(), f64::EPSILON, 100_000).ok_or(Error::EigenFailure)?;
    let (u, t) = schur.unpack();
    let qt = q * &u;
    let tnorm = t.norm().max(f64::MIN_POSITIVE);
    let mut pit = Matrix::zeros(n, k);
    let id = Matrix::identity(n, n);

    let mut j = 0;
    while j < k {
        let pair = j + 1 < k && t[(j + 1, j)].abs() > 1e-14 * tnorm;
        let rhs_col = |col: usize, pit: &Matrix| -> Vector {
            let mut r: Vector = qt.column(col).into_owned();
            for i in 0..j {
                r += pit.column(i) * t[(i, col)];
            }
            r
        };
        if pair {
            let mut sys = Matrix::zeros(2 * n, 2 * n);
            sys.view_mut((0, 0), (n, n)).copy_from(&(a - &id * t[(j, j)]));
            sys.view_mut((0, n), (n, n)).copy_from(&(&id * -t[(j + 1, j)]));
            sys.view_mut((n, 0), (n, n)).copy_from(&(&id * -t[(j, j + 1)]));
            sys.view_mut((n, n), (n, n)).copy_from(&(a - &id * t[(j + 1, j + 1)]));
            let mut rhs = Vector::zeros(2 * n);
            rhs.rows_mut(0, n).copy_from(&rhs_col(j, &pit));
            rhs.rows_mut(n, n).copy_from(&rhs_col(j + 1, &pit));
            let sol = sys
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::ResonantSpectra("A".into(), format!("S block at {j}")))?;
            pit.set_column(j, &sol.rows(0, n));
            pit.set_column(j + 1, &sol.rows(n, n));
            j += 2;
        } else {
            let sys = a - &id * t[(j, j)];
            let sol = sys
                .lu()
                .solve(&rhs_col(j, &pit))
                .ok_or_else(|| Error::ResonantSpectra("A".into(), format!("{}", t[(j, j)])))?;
            pit.set_column(j, &sol);
            j += 1;
        }
    }
    Ok(pit * u.transpose())
}

/// Binomial coefficient extended by the convention `C(p, q) = 0` for
/// `p >= 0 > q`. Requires `p >= q` and `p >= 0`.
pub fn binomial_ext(p: i64, q: i64) -> Result<u64> {
    if p < 0 || p < q {
        return Err(Error::OutOfConventionDomain { p, q });
    }
    if q < 0 {
        return Ok(0);
    }
    let k = q.min(p - q) as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc · (p - i) / (i + 1) stays integral at every step.
        acc = acc.checked_mul(p as u128 - i).ok_or(Error::BinomialOverflow { p, q })? / (i + 1);
    }
    u64::try_from(acc).map_err(|_| Error::BinomialOverflow { p, q })
}

/// Serde adapter storing a [`Matrix`] as a row-major array of rows.
pub mod serde_rows {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{matrix_to_rows, rows_to_matrix, Matrix};

    pub fn serialize<S: Serializer>(m: &Matrix, ser: S) -> Result<S::Ok, S::Error> {
        matrix_to_rows(m).serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(de)?;
        rows_to_matrix(&rows).map_err(serde::de::Error::custom)
    }
}

/// [`serde_rows`] for an optional matrix, `null` when absent.
pub mod serde_rows_opt {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{matrix_to_rows, rows_to_matrix, Matrix};

    pub fn serialize<S: Serializer>(m: &Option<Matrix>, ser: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(matrix_to_rows).serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Option<Matrix>, D::Error> {
        Option::<Vec<Vec<f64>>>::deserialize(de)?
            .map(|rows| rows_to_matrix(&rows).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// Row-major nested vectors to a matrix; rows must share a length.
pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<Matrix> {
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != c) {
        return Err(Error::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok(Matrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Build a matrix from row-major nested slices.
pub fn from_rows(rows: &[&[f64]]) -> Matrix {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    Matrix::from_fn(r, c, |i, j| rows[i][j])
}

/// Vertical concatenation of matrices sharing a column count.
pub fn vstack(blocks: &[&Matrix]) -> Matrix {
    let cols = blocks.iter().map(|b| b.ncols()).max().unwrap_or(0);
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        debug_assert!(b.nrows() == 0 || b.ncols() == cols);
        if b.nrows() > 0 {
            out.view_mut((r, 0), (b.nrows(), b.ncols())).copy_from(*b);
        }
        r += b.nrows();
    }
    out
}

/// Horizontal concatenation of matrices sharing a row count.
pub fn hstack(blocks: &[&Matrix]) -> Matrix {
    let rows = blocks.iter().map(|b| b.nrows()).max().unwrap_or(0);
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        if b.ncols() > 0 {
            out.view_mut((0, c), (b.nrows(), b.ncols())).copy_from(*b);
        }
        c += b.ncols();
    }
    out
}

/// Stack a sequence of equally sized vectors into one column.
pub fn stack_vectors<'a>(parts: impl IntoIterator<Item = &'a Vector>) -> Vector {
    let mut data = Vec::new();
    for p in parts {
        data.extend_from_slice(p.as_slice());
    }
    Vector::from_vec(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rotation() -> Matrix {
        from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]])
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_with_tol(&Matrix::identity(3, 3), 1e-8).unwrap(), 3);
        assert_eq!(rank_with_tol(&Matrix::zeros(2, 2), 1e-8).unwrap(), 0);
        let m = from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(rank_with_tol(&m, 1e-8).unwrap(), 1);
        assert!(matches!(
            rank_with_tol(&Matrix::zeros(0, 3), 1e-8),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn minimal_polynomial_examples() {
        let m = minimal_polynomial(&Matrix::identity(2, 2), 1e-8).unwrap();
        assert_eq!(m.degree(), 1);
        assert!((m.coeffs()[0] + 1.0).abs() < 1e-12);

        let m = minimal_polynomial(&rotation(), 1e-8).unwrap();
        assert_eq!(m.degree(), 2);
        assert!((m.coeffs()[0] - 1.0).abs() < 1e-12);
        assert!(m.coeffs()[1].abs() < 1e-12);

        // (λ-2)(λ-3) = λ² - 5λ + 6
        let s = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 2.0, 3.0]));
        let m = minimal_polynomial(&s, 1e-8).unwrap();
        assert_eq!(m.degree(), 2);
        assert!((m.coeffs()[0] - 6.0).abs() < 1e-9);
        assert!((m.coeffs()[1] + 5.0).abs() < 1e-9);
    }

    #[test]
    fn minimal_polynomial_degree_matches_brute_force() {
        // Brute force: the lowest degree whose monic candidate built from
        // known roots annihilates S.
        let s = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 2.0, 3.0]));
        let id = Matrix::identity(3, 3);
        let candidates: [&[f64]; 3] = [&[2.0], &[3.0], &[2.0, 3.0]];
        let brute = candidates
            .iter()
            .find(|roots| {
                let p = roots.iter().fold(id.clone(), |acc, &r| acc * (&s - &id * r));
                p.norm() < 1e-12
            })
            .map(|r| r.len())
            .unwrap();
        assert_eq!(minimal_polynomial(&s, 1e-8).unwrap().degree(), brute);
    }

    #[test]
    fn jordan_block_minimal_polynomial_is_squared() {
        let j2 = from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        let m = minimal_polynomial(&j2, 1e-8).unwrap();
        assert_eq!(m.degree(), 2);
        // (λ-1)² = λ² - 2λ + 1
        assert!((m.coeffs()[0] - 1.0).abs() < 1e-9);
        assert!((m.coeffs()[1] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn spectral_radius_examples() {
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![0.5, -0.25]));
        assert!((spectral_radius(&d).unwrap() - 0.5).abs() < 1e-12);
        assert!((spectral_radius(&rotation()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sylvester_scalar_and_zero() {
        let pi = solve_sylvester(&from_rows(&[&[0.5]]), &from_rows(&[&[2.0]]), &from_rows(&[&[1.5]])).unwrap();
        assert!((pi[(0, 0)] + 1.0).abs() < 1e-14);

        let a = from_rows(&[&[0.3, 0.1], &[0.0, -0.2]]);
        let pi = solve_sylvester(&a, &rotation(), &Matrix::zeros(2, 2)).unwrap();
        assert!(pi.norm() < 1e-15);
    }

    #[test]
    fn sylvester_rejects_resonance() {
        let a = from_rows(&[&[1.0]]);
        let s = from_rows(&[&[1.0]]);
        assert!(matches!(
            solve_sylvester(&a, &s, &from_rows(&[&[1.0]])),
            Err(Error::ResonantSpectra(..))
        ));
    }

    /// Kronecker oracle: (I ⊗ A - Sᵀ ⊗ I) vec Π = vec Q.
    fn sylvester_by_vectorization(a: &Matrix, s: &Matrix, q: &Matrix) -> Matrix {
        let (n, k) = (a.nrows(), s.nrows());
        let big = Matrix::identity(k, k).kronecker(a) - s.transpose().kronecker(&Matrix::identity(n, n));
        let rhs = Vector::from_column_slice(q.as_slice());
        let sol = big.lu().solve(&rhs).unwrap();
        Matrix::from_column_slice(n, k, sol.as_slice())
    }

    #[test]
    fn sylvester_matches_vectorized_oracle() {
        let a = from_rows(&[&[0.4, 0.3, -0.1], &[0.0, -0.5, 0.2], &[0.1, 0.0, 0.6]]);
        let s = rotation();
        let q = from_rows(&[&[1.0, -2.0], &[0.5, 0.25], &[-1.5, 3.0]]);
        let pi = solve_sylvester(&a, &s, &q).unwrap();
        let oracle = sylvester_by_vectorization(&a, &s, &q);
        assert!((&pi - &oracle).norm() < 1e-12);
        let resid = (&a * &pi - &pi * &s - &q).norm();
        assert!(resid < 1e-9);
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(binomial_ext(3, 1).unwrap(), 3);
        assert_eq!(binomial_ext(2, -1).unwrap(), 0);
        assert_eq!(binomial_ext(0, 0).unwrap(), 1);
        assert_eq!(binomial_ext(25, 12).unwrap(), 5_200_300);
        assert!(matches!(binomial_ext(1, 2), Err(Error::OutOfConventionDomain { .. })));
        assert!(matches!(binomial_ext(-1, -3), Err(Error::OutOfConventionDomain { .. })));
    }

    fn well_conditioned(seed: &[f64]) -> Matrix {
        // I + 0.3·(entries in [-1, 1]) keeps the condition number small.
        let n = (seed.len() as f64).sqrt() as usize;
        Matrix::identity(n, n) + Matrix::from_row_slice(n, n, &seed[..n * n]) * 0.3 / n as f64
    }

    proptest! {
        #[test]
        fn pascal_identity(p in 1i64..60, q in -5i64..60) {
            prop_assume!(p >= q);
            let lhs = binomial_ext(p, q).unwrap();
            let rhs = binomial_ext(p - 1, q - 1).unwrap()
                + if p > q { binomial_ext(p - 1, q).unwrap() } else { 0 };
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn rank_invariant_under_permutation_and_conditioning(
            entries in proptest::collection::vec(-1.0f64..1.0, 12),
            mix in proptest::collection::vec(-1.0f64..1.0, 16),
            drop in 0usize..3,
        ) {
            // 4x3 matrix with `drop` columns made dependent.
            let mut m = Matrix::from_row_slice(4, 3, &entries);
            for j in 0..drop {
                let c = m.column(0) * (j as f64 + 2.0);
                m.set_column(2 - j, &c);
            }
            let base = rank_with_tol(&m, 1e-8).unwrap();
            let mut permuted = m.clone();
            permuted.swap_rows(0, 3);
            permuted.swap_columns(0, 2);
            prop_assert_eq!(rank_with_tol(&permuted, 1e-8).unwrap(), base);
            let v = well_conditioned(&mix);
            prop_assert_eq!(rank_with_tol(&(&v * &m), 1e-8).unwrap(), base);
        }

        #[test]
        fn minimal_polynomial_annihilates(
            angle in 0.1f64..3.0,
            lam in prop_oneof![Just(1.0f64), Just(-1.0f64), 1.0f64..2.0],
            mix in proptest::collection::vec(-1.0f64..1.0, 9),
        ) {
            let (c, s) = (angle.cos(), angle.sin());
            let base = from_rows(&[&[c, s, 0.0], &[-s, c, 0.0], &[0.0, 0.0, lam]]);
            let v = well_conditioned(&mix);
            let sm = &v * base * v.clone().try_inverse().unwrap();
            let mp = minimal_polynomial(&sm, 1e-8).unwrap();
            let bound = 1e-8 * sm.norm().powi(mp.degree() as i32);
            prop_assert!(mp.eval_matrix(&sm).norm() < bound.max(1e-8));
        }
    }
}
