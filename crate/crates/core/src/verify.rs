//! Oracle-side checks: the auxiliary system built from the true plant, the
//! identities relating it to the data, and closed-loop stability and
//! regulation of a synthesized gain.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{DataMatrices, ExperimentRecord};
use crate::internal_model::InternalModel;
use crate::numerics::{hstack, matrix_power, solve_sylvester, spectral_radius, stack_vectors, vstack, Matrix, Vector};
use crate::plant::{window, ExoMatrix, PlantTruth, StructuralMatrices, DIVERGENCE_GUARD};

/// Auxiliary-system matrices. `z1`, `z2` and everything built from them
/// depend on the hidden plant.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryMatrices {
    pub ell: usize,
    pub m: usize,
    pub p: usize,
    pub n_w: usize,
    /// Internal model dimension `pd`.
    pub eta_dim: usize,
    pub f: Matrix,
    pub l: Matrix,
    pub b_aux: Matrix,
    /// `[S^{-ℓ}; ...; S^{-1}; I]`.
    pub bold_s: Matrix,
    pub z1: Matrix,
    pub z2: Matrix,
    /// `F + L Z1`.
    pub a_aux: Matrix,
    pub a_bar: Matrix,
    pub b_bar: Matrix,
    pub p_bar: Matrix,
}

impl AuxiliaryMatrices {
    /// `(m+p)ℓ`.
    pub fn chi_dim(&self) -> usize {
        (self.m + self.p) * self.ell
    }
    /// `ν = (m+p)ℓ + pd`.
    pub fn nu(&self) -> usize {
        self.chi_dim() + self.eta_dim
    }
}

/// Shift-register matrices `(F, L, B)` acting on `χ = (y-window, u-window)`.
pub fn shift_register(p: usize, m: usize, ell: usize) -> (Matrix, Matrix, Matrix) {
    let dim = (p + m) * ell;
    let mut f = Matrix::zeros(dim, dim);
    for i in 0..ell - 1 {
        for r in 0..p {
            f[(i * p + r, (i + 1) * p + r)] = 1.0;
        }
        for r in 0..m {
            f[(p * ell + i * m + r, p * ell + (i + 1) * m + r)] = 1.0;
        }
    }
    let mut l = Matrix::zeros(dim, p);
    for r in 0..p {
        l[((ell - 1) * p + r, r)] = 1.0;
    }
    let mut b = Matrix::zeros(dim, m);
    for r in 0..m {
        b[(p * ell + (ell - 1) * m + r, r)] = 1.0;
    }
    (f, l, b)
}

pub fn build_auxiliary_matrices(
    plant: &PlantTruth,
    sm: &StructuralMatrices,
    exo: &ExoMatrix,
    im: &InternalModel,
) -> Result<AuxiliaryMatrices> {
    let ell = sm.ell;
    let (n, m, p, n_w) = (plant.n(), plant.m(), plant.p_out(), exo.n_w());
    if plant.n_w() != n_w || im.outputs != p {
        return Err(Error::DimensionMismatch(
            "plant, exosystem and internal model disagree".into(),
        ));
    }
    let s_inv = exo.s().clone().try_inverse().ok_or(Error::SingularExosystem)?;
    let mut bold_s = Matrix::zeros((ell + 1) * n_w, n_w);
    for i in 0..=ell {
        bold_s
            .view_mut((i * n_w, 0), (n_w, n_w))
            .copy_from(&matrix_power(&s_inv, ell - i));
    }
    let ca_l = &plant.c * matrix_power(&plant.a, ell);
    let ca_l_ol = &ca_l * &sm.o_left;
    let z1 = hstack(&[&ca_l_ol, &(&plant.c * &sm.r_u - &ca_l_ol * &sm.t_u)]);
    let z2 = hstack(&[&(&plant.c * &sm.r_w - &ca_l_ol * &sm.t_w), &plant.q]);
    debug_assert_eq!(z1.ncols(), (p + m) * ell);
    debug_assert_eq!(n, sm.o.ncols());

    let (f, l, b_aux) = shift_register(p, m, ell);
    let a_aux = &f + &l * &z1;
    let chi = (p + m) * ell;
    let pd = im.dim();
    let mut a_bar = Matrix::zeros(chi + pd, chi + pd);
    a_bar.view_mut((0, 0), (chi, chi)).copy_from(&a_aux);
    a_bar.view_mut((chi, 0), (pd, chi)).copy_from(&(&im.g * &z1));
    a_bar.view_mut((chi, chi), (pd, pd)).copy_from(&im.phi);
    let b_bar = vstack(&[&b_aux, &Matrix::zeros(pd, m)]);
    let p_bar = vstack(&[&(&l * &z2), &(&im.g * &z2)]);
    Ok(AuxiliaryMatrices {
        ell,
        m,
        p,
        n_w,
        eta_dim: pd,
        f,
        l,
        b_aux,
        bold_s,
        z1,
        z2,
        a_aux,
        a_bar,
        b_bar,
        p_bar,
    })
}

/// `‖Ψ1 - Ā Ψ0 - B̄ U1 - P̄ S W0‖ / max(1, ‖Ψ1‖)`.
pub fn check_data_identity(data: &DataMatrices, aux: &AuxiliaryMatrices, w0_oracle: &Matrix) -> f64 {
    let rhs = &aux.a_bar * &data.psi0 + &aux.b_bar * &data.u1 + &aux.p_bar * &aux.bold_s * w0_oracle;
    (&data.psi1 - rhs).norm() / data.psi1.norm().max(1.0)
}

/// Window, state and output identities of the sliding-window state
/// reconstruction, each as a maximum over `k ≥ ℓ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Claim1Residuals {
    pub window: f64,
    pub state: f64,
    pub output: f64,
}

impl Claim1Residuals {
    pub fn max(&self) -> f64 {
        self.window.max(self.state).max(self.output)
    }
}

fn sup_norm(seqs: &[&[Vector]]) -> f64 {
    seqs.iter().flat_map(|s| s.iter()).map(|v| v.amax()).fold(0.0, f64::max)
}

/// Residuals relative to `max(1, sup-norm of the trajectory)`.
pub fn check_claim1(rec: &ExperimentRecord, plant: &PlantTruth, sm: &StructuralMatrices) -> Result<Claim1Residuals> {
    let (Some(w), Some(x)) = (rec.oracle_w(), rec.oracle_x()) else {
        return Err(Error::Config("claim check needs oracle state and exosignal".into()));
    };
    let ell = sm.ell;
    if rec.t < ell {
        return Err(Error::ExperimentTooShort { t: rec.t, ell });
    }
    let scale = sup_norm(&[&rec.u, &rec.y, w, x]).max(1.0);
    let a_l = matrix_power(&plant.a, ell);
    let al_ol = &a_l * &sm.o_left;
    let x_u = &sm.r_u - &al_ol * &sm.t_u;
    let x_w = &sm.r_w - &al_ol * &sm.t_w;
    let mut res = Claim1Residuals {
        window: 0.0,
        state: 0.0,
        output: 0.0,
    };
    for k in ell..=rec.t {
        let yw = window(&rec.y, k - ell, ell);
        let uw = window(&rec.u, k - ell, ell);
        let ww = window(w, k - ell, ell);
        let yw_pred = &sm.o * &x[k - ell] + &sm.t_u * &uw + &sm.t_w * &ww;
        res.window = res.window.max((yw - yw_pred).norm());
        let yw = window(&rec.y, k - ell, ell);
        let x_pred = &al_ol * &yw + &x_u * &uw + &x_w * &ww;
        res.state = res.state.max((&x[k] - &x_pred).norm());
        let y_pred = &plant.c * &x_pred + &plant.q * &w[k];
        res.output = res.output.max((&rec.y[k] - y_pred).norm());
    }
    res.window /= scale;
    res.state /= scale;
    res.output /= scale;
    Ok(res)
}

/// `ξ(ℓ)` matching a run from `(w0, x0)` under inputs `u(0..ℓ)`.
pub fn initial_xi(
    plant: &PlantTruth,
    sm: &StructuralMatrices,
    exo: &ExoMatrix,
    w0: &Vector,
    x0: &Vector,
    u: &[Vector],
) -> Vector {
    let ell = sm.ell;
    let mut ws = Vec::with_capacity(ell);
    let mut wk = w0.clone();
    for _ in 0..ell {
        ws.push(wk.clone());
        wk = exo.s() * wk;
    }
    let uw = window(u, 0, ell);
    let yw = &sm.o * x0 + &sm.t_u * &uw + &sm.t_w * stack_vectors(&ws);
    debug_assert_eq!(yw.len(), plant.p_out() * ell);
    stack_vectors([&yw, &uw])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceResiduals {
    /// `max_k ‖ξ(k) - χ(k)‖`, where `χ(k)` equals the stacked past window.
    pub xi: f64,
    /// `max_k ‖φ(k) - y(k)‖`.
    pub phi: f64,
}

/// Run the plant with its shift register and the auxiliary system in
/// lockstep for `steps` steps under the same inputs.
///
/// Residuals are relative to `max(1, sup-norm of the plant trajectory)`.
#[allow(clippy::too_many_arguments)]
pub fn check_solution_correspondence(
    plant: &PlantTruth,
    sm: &StructuralMatrices,
    aux: &AuxiliaryMatrices,
    exo: &ExoMatrix,
    steps: usize,
    inputs: &[Vector],
    w0: &Vector,
    x0: &Vector,
    chi0: &Vector,
) -> Result<CorrespondenceResiduals> {
    let ell = aux.ell;
    if inputs.len() <= steps || steps < ell {
        return Err(Error::DimensionMismatch(format!(
            "need at least {} inputs and steps ≥ ℓ",
            steps + 1
        )));
    }
    let mut w = w0.clone();
    let mut x = x0.clone();
    let mut chi = chi0.clone();
    let mut omega = Vector::zeros(aux.n_w);
    let mut xi = Vector::zeros(aux.chi_dim());
    let mut scale: f64 = 1.0;
    let (mut r_xi, mut r_phi): (f64, f64) = (0.0, 0.0);
    for k in 0..=steps {
        let y = &plant.c * &x + &plant.q * &w;
        if k == ell {
            omega = matrix_power(exo.s(), ell) * w0;
            xi = initial_xi(plant, sm, exo, w0, x0, inputs);
        }
        if k >= ell {
            let phi = &aux.z1 * &xi + &aux.z2 * &aux.bold_s * &omega;
            r_xi = r_xi.max((&xi - &chi).norm());
            r_phi = r_phi.max((&phi - &y).norm());
        }
        scale = scale.max(x.amax()).max(y.amax()).max(w.amax()).max(inputs[k].amax());
        let u = &inputs[k];
        let chi_next = &aux.f * &chi + &aux.l * &y + &aux.b_aux * u;
        let x_next = &plant.a * &x + &plant.b * u + &plant.p * &w;
        if k >= ell {
            let xi_next = &aux.a_aux * &xi + &aux.b_aux * u + &aux.l * &aux.z2 * &aux.bold_s * &omega;
            xi = xi_next;
            omega = exo.s() * &omega;
        }
        let norm = x_next.norm();
        if !norm.is_finite() || norm > DIVERGENCE_GUARD {
            return Err(Error::Divergence { step: k + 1, norm });
        }
        chi = chi_next;
        x = x_next;
        w = exo.s() * &w;
    }
    Ok(CorrespondenceResiduals {
        xi: r_xi / scale,
        phi: r_phi / scale,
    })
}

/// Closed loop of plant, shift register, internal model and `u = K [χ; η]`
/// as one linear map on `(w, x, χ, η)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopModel {
    pub n_w: usize,
    pub n: usize,
    pub chi_dim: usize,
    pub eta_dim: usize,
    pub map: Matrix,
    /// `y = C x + Q w` on the full state.
    pub output: Matrix,
    /// `u = K [χ; η]` on the full state.
    pub input: Matrix,
}

impl ClosedLoopModel {
    pub fn dim(&self) -> usize {
        self.n_w + self.n + self.chi_dim + self.eta_dim
    }

    /// The `(x, χ, η)` block, i.e. the map with `w ≡ 0`.
    pub fn internal_map(&self) -> Matrix {
        let d = self.dim() - self.n_w;
        self.map.view((self.n_w, self.n_w), (d, d)).into_owned()
    }
}

pub fn assemble_closed_loop(
    plant: &PlantTruth,
    exo: &ExoMatrix,
    aux: &AuxiliaryMatrices,
    im: &InternalModel,
    k: &Matrix,
) -> Result<ClosedLoopModel> {
    let (n_w, n, m, p) = (exo.n_w(), plant.n(), plant.m(), plant.p_out());
    let (nc, pd) = (aux.chi_dim(), im.dim());
    if k.nrows() != m || k.ncols() != nc + pd {
        return Err(Error::DimensionMismatch(format!(
            "K is {}x{}, expected {m}x{}",
            k.nrows(),
            k.ncols(),
            nc + pd
        )));
    }
    let dim = n_w + n + nc + pd;
    let (ow, ox, oc, oe) = (0, n_w, n_w + n, n_w + n + nc);
    let mut output = Matrix::zeros(p, dim);
    output.view_mut((0, ow), (p, n_w)).copy_from(&plant.q);
    output.view_mut((0, ox), (p, n)).copy_from(&plant.c);
    let mut input = Matrix::zeros(m, dim);
    input.view_mut((0, oc), (m, nc + pd)).copy_from(k);

    let mut map = Matrix::zeros(dim, dim);
    map.view_mut((ow, ow), (n_w, n_w)).copy_from(exo.s());
    // x⁺ = A x + B u + P w
    let mut xrow = &plant.b * &input;
    xrow.view_mut((0, ox), (n, n)).add_assign_from(&plant.a);
    xrow.view_mut((0, ow), (n, n_w)).add_assign_from(&plant.p);
    map.view_mut((ox, 0), (n, dim)).copy_from(&xrow);
    // χ⁺ = F χ + L y + B u
    let mut crow = &aux.l * &output + &aux.b_aux * &input;
    crow.view_mut((0, oc), (nc, nc)).add_assign_from(&aux.f);
    map.view_mut((oc, 0), (nc, dim)).copy_from(&crow);
    // η⁺ = Φ η + G y
    let mut erow = &im.g * &output;
    erow.view_mut((0, oe), (pd, pd)).add_assign_from(&im.phi);
    map.view_mut((oe, 0), (pd, dim)).copy_from(&erow);
    Ok(ClosedLoopModel {
        n_w,
        n,
        chi_dim: nc,
        eta_dim: pd,
        map,
        output,
        input,
    })
}

trait AddAssignFrom {
    fn add_assign_from(self, other: &Matrix);
}

impl AddAssignFrom for nalgebra::DMatrixViewMut<'_, f64> {
    fn add_assign_from(mut self, other: &Matrix) {
        self += other;
    }
}

/// Spectral radius of the closed loop with `w ≡ 0`.
pub fn check_internal_stability(cl: &ClosedLoopModel) -> Result<f64> {
    spectral_radius(&cl.internal_map())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegulationMetrics {
    /// `max ‖y(k)‖` over the tail window.
    pub tail_max_y: f64,
    pub tail_start: usize,
    /// First step from which `‖y‖ < ε_reg` holds for the rest of the run.
    pub settle_step: Option<usize>,
    pub initial_internal_norm: f64,
    pub final_internal_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRun {
    /// Full states `(w, x, χ, η)` for `k = 0..=steps`.
    pub states: Vec<Vector>,
    pub y: Vec<Vector>,
    pub u: Vec<Vector>,
    pub metrics: RegulationMetrics,
}

impl ClosedLoopRun {
    /// Columns `k`, then `w_*`, `x_*` (only with `unmask`), `y_*`, `u_*`,
    /// `chi_*`, `eta_*`.
    pub fn write_csv<W: Write>(&self, cl: &ClosedLoopModel, out: W, unmask: bool) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let p = self.y[0].len();
        let m = self.u[0].len();
        let mut header = vec!["k".to_string()];
        let names = |prefix: &'static str, n: usize| (1..=n).map(move |i| format!("{prefix}_{i}"));
        if unmask {
            header.extend(names("w", cl.n_w));
            header.extend(names("x", cl.n));
        }
        header.extend(names("y", p));
        header.extend(names("u", m));
        header.extend(names("chi", cl.chi_dim));
        header.extend(names("eta", cl.eta_dim));
        wtr.write_record(&header)?;
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>();
        for (k, s) in self.states.iter().enumerate() {
            let mut row = vec![k.to_string()];
            if unmask {
                row.extend(fmt(&s.as_slice()[..cl.n_w + cl.n]));
            }
            row.extend(fmt(self.y[k].as_slice()));
            row.extend(fmt(self.u[k].as_slice()));
            row.extend(fmt(&s.as_slice()[cl.n_w + cl.n..]));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Simulate `steps` steps from `(w0, x0, χ0, η0)`. The tail window covers
/// the last `tail_fraction` of the horizon.
#[allow(clippy::too_many_arguments)]
pub fn simulate_closed_loop(
    cl: &ClosedLoopModel,
    w0: &Vector,
    x0: &Vector,
    chi0: &Vector,
    eta0: &Vector,
    steps: usize,
    tail_fraction: f64,
    eps_reg: f64,
) -> Result<ClosedLoopRun> {
    if w0.len() != cl.n_w || x0.len() != cl.n || chi0.len() != cl.chi_dim || eta0.len() != cl.eta_dim {
        return Err(Error::DimensionMismatch("closed-loop initial condition size".into()));
    }
    let mut s = stack_vectors([w0, x0, chi0, eta0]);
    let internal_norm = |s: &Vector| s.rows(cl.n_w, s.len() - cl.n_w).norm();
    let initial_internal_norm = internal_norm(&s);
    let mut states = Vec::with_capacity(steps + 1);
    let mut y = Vec::with_capacity(steps + 1);
    let mut u = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        y.push(&cl.output * &s);
        u.push(&cl.input * &s);
        let next = &cl.map * &s;
        states.push(s);
        if k < steps {
            let norm = next.norm();
            if !norm.is_finite() || norm > DIVERGENCE_GUARD {
                return Err(Error::Divergence { step: k + 1, norm });
            }
        }
        s = next;
    }
    let tail_len = ((steps as f64) * tail_fraction).round() as usize;
    let tail_start = steps - tail_len.min(steps);
    let tail_max_y = y[tail_start..].iter().map(|v| v.norm()).fold(0.0, f64::max);
    let settle_step = match y.iter().rposition(|v| v.norm() >= eps_reg) {
        None => Some(0),
        Some(last) if last < steps => Some(last + 1),
        Some(_) => None,
    };
    let final_internal_norm = internal_norm(&states[steps]);
    Ok(ClosedLoopRun {
        states,
        y,
        u,
        metrics: RegulationMetrics {
            tail_max_y,
            tail_start,
            settle_step,
            initial_internal_norm,
            final_internal_norm,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorSolution {
    pub pi: Matrix,
    /// `‖Z2 S + Z1 Π_ξ‖`.
    pub identity_residual: f64,
    /// `‖A Π - Π S + P̄ S‖ / max(1, ‖P̄ S‖ + (‖A‖ + ‖S‖) ‖Π‖)`.
    pub sylvester_residual: f64,
}

/// Solve `(Ψ1 G) Π - Π S = -P̄ S` and test the regulator identity on the
/// `ξ` block of `Π`.
pub fn check_regulator_equations(
    aux: &AuxiliaryMatrices,
    exo: &ExoMatrix,
    psi1g: &Matrix,
) -> Result<RegulatorSolution> {
    let rhs = -(&aux.p_bar * &aux.bold_s);
    let s = exo.s();
    let pi = solve_sylvester(psi1g, s, &rhs)?;
    let res = psi1g * &pi - &pi * s - &rhs;
    let denom = (rhs.norm() + (psi1g.norm() + s.norm()) * pi.norm()).max(1.0);
    let pi_xi = pi.rows(0, aux.chi_dim()).into_owned();
    let identity = &aux.z2 * &aux.bold_s + &aux.z1 * pi_xi;
    Ok(RegulatorSolution {
        identity_residual: identity.norm(),
        sylvester_residual: res.norm() / denom,
        pi,
    })
}

/// `|ρ(Ψ1 Y X⁻¹) - ρ(Ā + B̄ K)|` and the norm of the matrix difference.
pub fn check_representation(aux: &AuxiliaryMatrices, psi1g: &Matrix, k: &Matrix) -> Result<(f64, f64)> {
    let model = &aux.a_bar + &aux.b_bar * k;
    let gap = (spectral_radius(psi1g)? - spectral_radius(&model)?).abs();
    Ok((gap, (psi1g - model).norm()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// Passes when `value < threshold`.
    Below,
    /// Passes when `value > threshold`.
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

/// Named residual checks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckEntry>,
}

impl VerificationReport {
    /// Passes when `value < threshold`.
    pub fn push(&mut self, name: impl Into<String>, value: f64, threshold: f64) {
        self.checks.push(CheckEntry {
            name: name.into(),
            value,
            threshold,
            comparison: Comparison::Below,
            pass: value < threshold,
        });
    }

    /// Passes when `value > threshold`.
    pub fn push_above(&mut self, name: impl Into<String>, value: f64, threshold: f64) {
        self.checks.push(CheckEntry {
            name: name.into(),
            value,
            threshold,
            comparison: Comparison::Above,
            pass: value > threshold,
        });
    }

    /// Record a check that could not be evaluated.
    pub fn push_failed(&mut self, name: impl Into<String>, threshold: f64) {
        self.checks.push(CheckEntry {
            name: name.into(),
            // Finite so the report stays valid JSON.
            value: f64::MAX,
            threshold,
            comparison: Comparison::Below,
            pass: false,
        });
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&CheckEntry> {
        self.checks.iter().find(|c| c.name == name)
    }
}
