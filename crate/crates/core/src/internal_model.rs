//! Internal model `η⁺ = Φ η + G y` built from the minimal polynomial of `S`.

use crate::error::{Error, Result};
use crate::numerics::{minimal_polynomial, Matrix, MinimalPolynomial, Vector};
use crate::plant::ExoMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct InternalModel {
    /// Block companion matrix, `pd x pd`.
    pub phi: Matrix,
    /// Last-block-row injector, `pd x p`.
    pub g: Matrix,
    pub minpoly: MinimalPolynomial,
    pub outputs: usize,
}

impl InternalModel {
    pub fn degree(&self) -> usize {
        self.minpoly.degree()
    }

    pub fn dim(&self) -> usize {
        self.outputs * self.degree()
    }
}

/// Block companion `(Φ, G)` for `p` outputs.
///
/// `snap_coeffs_tol`, when set, rounds minimal-polynomial coefficients that
/// lie within the tolerance of an integer.
pub fn build_internal_model(
    exo: &ExoMatrix,
    p: usize,
    tol: f64,
    snap_coeffs_tol: Option<f64>,
) -> Result<InternalModel> {
    if p == 0 {
        return Err(Error::Config("internal model needs at least one output".into()));
    }
    // ExoMatrix construction already enforced the unit-circle condition.
    let mut minpoly = minimal_polynomial(exo.s(), tol)?;
    if let Some(snap) = snap_coeffs_tol {
        minpoly = minpoly.snapped(snap);
    }
    Ok(companion(&minpoly, p))
}

pub(crate) fn companion(minpoly: &MinimalPolynomial, p: usize) -> InternalModel {
    let d = minpoly.degree();
    let dim = p * d;
    let mut phi = Matrix::zeros(dim, dim);
    for i in 0..d - 1 {
        for r in 0..p {
            phi[(i * p + r, (i + 1) * p + r)] = 1.0;
        }
    }
    for (j, &s) in minpoly.coeffs().iter().enumerate() {
        for r in 0..p {
            phi[((d - 1) * p + r, j * p + r)] = -s;
        }
    }
    let mut g = Matrix::zeros(dim, p);
    for r in 0..p {
        g[((d - 1) * p + r, r)] = 1.0;
    }
    InternalModel {
        phi,
        g,
        minpoly: minpoly.clone(),
        outputs: p,
    }
}

/// Returns `η(0), ..., η(len(y_seq))`.
pub fn simulate_internal_model(im: &InternalModel, eta0: &Vector, y_seq: &[Vector]) -> Result<Vec<Vector>> {
    if eta0.len() != im.dim() {
        return Err(Error::DimensionMismatch(format!(
            "η0 has {} entries, internal model has {}",
            eta0.len(),
            im.dim()
        )));
    }
    let mut eta = Vec::with_capacity(y_seq.len() + 1);
    eta.push(eta0.clone());
    for (k, y) in y_seq.iter().enumerate() {
        if y.len() != im.outputs {
            return Err(Error::DimensionMismatch(format!("y({k}) has wrong size")));
        }
        let next = &im.phi * &eta[k] + &im.g * y;
        eta.push(next);
    }
    Ok(eta)
}
