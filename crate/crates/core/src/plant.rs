//! Ground-truth plant and exosystem, their simulation, and the structural
//! matrices `O`, `T_u`, `T_w`, `R_u`, `R_w` built from them.
//!
//! Everything here is oracle-side: the designer never sees a [`PlantTruth`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    eigenvalues, ensure_finite, ensure_square, matrix_power, matrix_to_rows, pinv, rank_with_tol, rows_to_matrix,
    Matrix, Vector, DEFAULT_RANK_TOL,
};

/// States whose norm exceeds this are treated as a diverged simulation.
pub const DIVERGENCE_GUARD: f64 = 1e12;

/// Hidden plant `x⁺ = A x + B u + P w`, `y = C x + Q w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantTruth {
    #[serde(with = "crate::numerics::serde_rows")]
    pub a: Matrix,
    #[serde(with = "crate::numerics::serde_rows")]
    pub b: Matrix,
    #[serde(with = "crate::numerics::serde_rows")]
    pub p: Matrix,
    #[serde(with = "crate::numerics::serde_rows")]
    pub c: Matrix,
    #[serde(with = "crate::numerics::serde_rows")]
    pub q: Matrix,
}

impl PlantTruth {
    pub fn new(a: Matrix, b: Matrix, p: Matrix, c: Matrix, q: Matrix) -> Result<Self> {
        let plant = Self { a, b, p, c, q };
        plant.validate()?;
        Ok(plant)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn p_out(&self) -> usize {
        self.c.nrows()
    }
    pub fn n_w(&self) -> usize {
        self.p.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        ensure_square(&self.a, "plant A")?;
        let n = self.n();
        let mismatch = |what: &str| Err(Error::DimensionMismatch(what.to_string()));
        if self.b.nrows() != n {
            return mismatch("B rows must equal n");
        }
        if self.p.nrows() != n {
            return mismatch("P rows must equal n");
        }
        if self.c.ncols() != n {
            return mismatch("C columns must equal n");
        }
        if self.q.nrows() != self.c.nrows() || self.q.ncols() != self.p.ncols() {
            return mismatch("Q must be p x n_w");
        }
        for (m, what) in [
            (&self.a, "A"),
            (&self.b, "B"),
            (&self.p, "P"),
            (&self.c, "C"),
            (&self.q, "Q"),
        ] {
            ensure_finite(m, what)?;
        }
        Ok(())
    }
}

/// Known exosystem matrix `S` of `w⁺ = S w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct ExoMatrix {
    s: Matrix,
}

impl ExoMatrix {
    /// Checks squareness, invertibility and that no eigenvalue lies strictly
    /// inside the unit circle.
    pub fn new(s: Matrix) -> Result<Self> {
        ensure_square(&s, "exosystem S")?;
        if s.is_empty() {
            return Err(Error::EmptyInput);
        }
        ensure_finite(&s, "S")?;
        // A defective eigenvalue splits into a ring of radius ~ε^{1/k} around
        // its true value, so test the centroid of each nearby group instead of
        // the individual computed eigenvalues.
        let radius = 1e-4 * s.norm().max(1.0);
        let mut groups: Vec<(Complex64, usize)> = Vec::new();
        for ev in eigenvalues(&s)? {
            match groups.iter_mut().find(|(c, k)| (c / *k as f64 - ev).norm() <= radius) {
                Some(g) => {
                    g.0 += ev;
                    g.1 += 1;
                }
                None => groups.push((ev, 1)),
            }
        }
        for (sum, k) in groups {
            let modulus = (sum / k as f64).norm();
            if modulus < 1.0 - 1e-9 {
                return Err(Error::ExoEigenInsideUnitCircle { modulus });
            }
        }
        if rank_with_tol(&s, DEFAULT_RANK_TOL)? < s.nrows() {
            return Err(Error::SingularExosystem);
        }
        Ok(Self { s })
    }

    pub fn s(&self) -> &Matrix {
        &self.s
    }

    pub fn n_w(&self) -> usize {
        self.s.nrows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for ExoMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows_to_matrix(&rows)?)
    }
}

impl From<ExoMatrix> for Vec<Vec<f64>> {
    fn from(exo: ExoMatrix) -> Self {
        matrix_to_rows(&exo.s)
    }
}

/// Full state history of one open-loop run.
///
/// `w`, `x`, `y` hold `steps + 1` samples; `u` holds the `steps` inputs that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: usize,
    pub w: Vec<Vector>,
    pub x: Vec<Vector>,
    pub y: Vec<Vector>,
    pub u: Vec<Vector>,
}

impl Trajectory {
    /// Largest deviation from the plant recursion over the stored samples.
    pub fn recursion_residual(&self, plant: &PlantTruth, exo: &ExoMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.steps {
            let x_next = &plant.a * &self.x[k] + &plant.b * &self.u[k] + &plant.p * &self.w[k];
            worst = worst.max((&self.x[k + 1] - x_next).norm());
            worst = worst.max((&self.w[k + 1] - exo.s() * &self.w[k]).norm());
        }
        for k in 0..=self.steps {
            let y = &plant.c * &self.x[k] + &plant.q * &self.w[k];
            worst = worst.max((&self.y[k] - y).norm());
        }
        worst
    }
}

/// Structural matrices for window length `ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralMatrices {
    pub ell: usize,
    pub o: Matrix,
    pub t_u: Matrix,
    pub t_w: Matrix,
    pub r_u: Matrix,
    pub r_w: Matrix,
    /// Moore-Penrose left inverse of `o`.
    pub o_left: Matrix,
}

fn observability_matrix(a: &Matrix, c: &Matrix, depth: usize) -> Matrix {
    let (p, n) = (c.nrows(), c.ncols());
    let mut o = Matrix::zeros(p * depth, n);
    let mut block = c.clone();
    for i in 0..depth {
        o.view_mut((i * p, 0), (p, n)).copy_from(&block);
        block = &block * a;
    }
    o
}

/// Smallest `l` with `rank [C; CA; ...; CA^{l-1}] = n`.
pub fn observability_index(a: &Matrix, c: &Matrix) -> Result<usize> {
    ensure_square(a, "observability_index: A")?;
    let n = a.nrows();
    if c.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "C has {} columns, A is {n}x{n}",
            c.ncols()
        )));
    }
    if n == 0 || c.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rank = 0;
    for l in 1..=n {
        rank = rank_with_tol(&observability_matrix(a, c, l), DEFAULT_RANK_TOL)?;
        if rank == n {
            return Ok(l);
        }
    }
    Err(Error::UnobservablePair { rank, n })
}

fn check_state(v: &Vector, step: usize) -> Result<()> {
    let norm = v.norm();
    if !norm.is_finite() || norm > DIVERGENCE_GUARD {
        return Err(Error::Divergence { step, norm });
    }
    Ok(())
}

/// Roll the plant and exosystem forward `steps` times from `(w0, x0)`.
pub fn simulate_plant(
    plant: &PlantTruth,
    exo: &ExoMatrix,
    w0: &Vector,
    x0: &Vector,
    u_seq: &[Vector],
    steps: usize,
) -> Result<Trajectory> {
    plant.validate()?;
    if exo.n_w() != plant.n_w() {
        return Err(Error::DimensionMismatch(format!(
            "S is {0}x{0} but P has {1} columns",
            exo.n_w(),
            plant.n_w()
        )));
    }
    if w0.len() != plant.n_w() || x0.len() != plant.n() {
        return Err(Error::DimensionMismatch("initial condition size".into()));
    }
    if u_seq.len() < steps {
        return Err(Error::DimensionMismatch(format!(
            "{} inputs supplied for {steps} steps",
            u_seq.len()
        )));
    }
    if let Some(bad) = u_seq[..steps].iter().position(|u| u.len() != plant.m()) {
        return Err(Error::DimensionMismatch(format!("input {bad} has wrong size")));
    }

    let mut w = Vec::with_capacity(steps + 1);
    let mut x = Vec::with_capacity(steps + 1);
    let mut y = Vec::with_capacity(steps + 1);
    w.push(w0.clone());
    x.push(x0.clone());
    for k in 0..steps {
        y.push(&plant.c * &x[k] + &plant.q * &w[k]);
        let x_next = &plant.a * &x[k] + &plant.b * &u_seq[k] + &plant.p * &w[k];
        check_state(&x_next, k + 1)?;
        x.push(x_next);
        w.push(exo.s() * &w[k]);
    }
    y.push(&plant.c * &x[steps] + &plant.q * &w[steps]);
    Ok(Trajectory {
        steps,
        w,
        x,
        y,
        u: u_seq[..steps].to_vec(),
    })
}

/// Block lower-triangular Toeplitz matrix with `diag` on the diagonal and
/// `C A^{i-j-1} E` below it.
fn toeplitz(a: &Matrix, c: &Matrix, e: &Matrix, diag: &Matrix, ell: usize) -> Matrix {
    let (p, cols) = (c.nrows(), e.ncols());
    let mut t = Matrix::zeros(p * ell, cols * ell);
    // markov[k] = C A^k E
    let mut markov = Vec::with_capacity(ell);
    let mut ak_e = e.clone();
    for _ in 0..ell {
        markov.push(c * &ak_e);
        ak_e = a * ak_e;
    }
    for i in 0..ell {
        t.view_mut((i * p, i * cols), (p, cols)).copy_from(diag);
        for j in 0..i {
            t.view_mut((i * p, j * cols), (p, cols)).copy_from(&markov[i - j - 1]);
        }
    }
    t
}

/// `[A^{ℓ-1} E, ..., A E, E]`.
fn reachability(a: &Matrix, e: &Matrix, ell: usize) -> Matrix {
    let (n, cols) = (a.nrows(), e.ncols());
    let mut r = Matrix::zeros(n, cols * ell);
    for j in 0..ell {
        let block = matrix_power(a, ell - 1 - j) * e;
        r.view_mut((0, j * cols), (n, cols)).copy_from(&block);
    }
    r
}

pub fn build_structural_matrices(plant: &PlantTruth, ell: usize) -> Result<StructuralMatrices> {
    plant.validate()?;
    if ell == 0 {
        return Err(Error::Config("ℓ must be at least 1".into()));
    }
    let n = plant.n();
    let o = observability_matrix(&plant.a, &plant.c, ell);
    let rank = rank_with_tol(&o, DEFAULT_RANK_TOL)?;
    if rank < n {
        return Err(Error::EllBelowObservabilityIndex { ell, rank, n });
    }
    let p = plant.p_out();
    let t_u = toeplitz(&plant.a, &plant.c, &plant.b, &Matrix::zeros(p, plant.m()), ell);
    let t_w = toeplitz(&plant.a, &plant.c, &plant.p, &plant.q, ell);
    let r_u = reachability(&plant.a, &plant.b, ell);
    let r_w = reachability(&plant.a, &plant.p, ell);
    let o_left = pinv(&o);
    Ok(StructuralMatrices {
        ell,
        o,
        t_u,
        t_w,
        r_u,
        r_w,
        o_left,
    })
}

/// Stack `seq[start..start+len]` into one column vector.
pub fn window(seq: &[Vector], start: usize, len: usize) -> Vector {
    crate::numerics::stack_vectors(&seq[start..start + len])
}
