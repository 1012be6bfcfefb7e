//! Data collection on plant plus internal model, and the sliding-window data
//! matrices `U1`, `Ψ0`, `Ψ1` built from one record.
//!
//! The exosignal and state sequences are recorded too, but only for the
//! oracle: [`DataMatrices`] never carries them, and the synthesis API only
//! accepts [`DataMatrices`].

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::internal_model::{simulate_internal_model, InternalModel};
use crate::numerics::{Matrix, Vector};
use crate::plant::{simulate_plant, window, ExoMatrix, PlantTruth};
use crate::scenarios;

/// How the experiment excites the plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum InputPolicy {
    /// Explicit samples `u(0), ..., u(T)`.
    Explicit { values: Vec<Vec<f64>> },
    /// Standard normal samples from ChaCha8 seeded with `seed`, drawn
    /// time-major (all channels of `u(0)`, then `u(1)`, ...).
    Gaussian { seed: u64 },
}

impl InputPolicy {
    pub const GENERATOR: &'static str = "chacha8/standard-normal/time-major";

    pub fn realize(&self, m: usize, count: usize) -> Result<Vec<Vector>> {
        match self {
            InputPolicy::Explicit { values } => {
                if values.len() < count {
                    return Err(Error::Config(format!(
                        "explicit input has {} samples, {count} required",
                        values.len()
                    )));
                }
                values[..count]
                    .iter()
                    .enumerate()
                    .map(|(k, v)| {
                        if v.len() != m {
                            Err(Error::DimensionMismatch(format!(
                                "u({k}) has {} entries, m = {m}",
                                v.len()
                            )))
                        } else {
                            Ok(Vector::from_column_slice(v))
                        }
                    })
                    .collect()
            }
            InputPolicy::Gaussian { seed } => {
                let mut rng = scenarios::rng(*seed);
                Ok((0..count).map(|_| scenarios::normal_vector(&mut rng, m)).collect())
            }
        }
    }
}

/// One data-collection run of length `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub t: usize,
    pub ell: usize,
    /// `u(0), ..., u(T)`.
    pub u: Vec<Vector>,
    /// `y(0), ..., y(T)`.
    pub y: Vec<Vector>,
    /// `η(0), ..., η(T+1)`.
    pub eta: Vec<Vector>,
    hidden_w: Option<Vec<Vector>>,
    hidden_x: Option<Vec<Vector>>,
}

impl ExperimentRecord {
    /// Designer-side record without oracle sequences.
    pub fn from_measurements(ell: usize, u: Vec<Vector>, y: Vec<Vector>, eta: Vec<Vector>) -> Result<Self> {
        let t = u.len().checked_sub(1).ok_or(Error::EmptyInput)?;
        let rec = Self {
            t,
            ell,
            u,
            y,
            eta,
            hidden_w: None,
            hidden_x: None,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t < self.ell {
            return Err(Error::ExperimentTooShort {
                t: self.t,
                ell: self.ell,
            });
        }
        if self.u.len() != self.t + 1 || self.y.len() != self.t + 1 || self.eta.len() != self.t + 2 {
            return Err(Error::DimensionMismatch(format!(
                "record lengths u={}, y={}, η={} inconsistent with T={}",
                self.u.len(),
                self.y.len(),
                self.eta.len(),
                self.t
            )));
        }
        let uniform = |seq: &[Vector]| seq.windows(2).all(|w| w[0].len() == w[1].len());
        if !uniform(&self.u) || !uniform(&self.y) || !uniform(&self.eta) {
            return Err(Error::DimensionMismatch("ragged record".into()));
        }
        Ok(())
    }

    /// Largest deviation of the recorded `η` from `η⁺ = Φ η + G y`.
    pub fn eta_residual(&self, im: &InternalModel) -> f64 {
        (0..=self.t)
            .map(|k| (&self.eta[k + 1] - (&im.phi * &self.eta[k] + &im.g * &self.y[k])).norm())
            .fold(0.0, f64::max)
    }

    pub fn m(&self) -> usize {
        self.u[0].len()
    }
    pub fn p(&self) -> usize {
        self.y[0].len()
    }
    pub fn eta_dim(&self) -> usize {
        self.eta[0].len()
    }

    /// Oracle access: `w(0), ..., w(T)` when the record came from a simulation.
    pub fn oracle_w(&self) -> Option<&[Vector]> {
        self.hidden_w.as_deref()
    }

    /// Oracle access: `x(0), ..., x(T)` when the record came from a simulation.
    pub fn oracle_x(&self) -> Option<&[Vector]> {
        self.hidden_x.as_deref()
    }

    pub fn write_csv<W: Write>(&self, out: W, unmask: bool) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let (m, p, e) = (self.m(), self.p(), self.eta_dim());
        let hidden = if unmask { self.hidden_w.as_ref() } else { None };
        let n_w = hidden.map_or(0, |w| w[0].len());
        let mut header = vec!["k".to_string()];
        header.extend((1..=m).map(|i| format!("u_{i}")));
        header.extend((1..=p).map(|i| format!("y_{i}")));
        header.extend((1..=e).map(|i| format!("eta_{i}")));
        header.extend((1..=n_w).map(|i| format!("w_{i}")));
        wtr.write_record(&header)?;
        for k in 0..=self.t + 1 {
            let mut row = vec![k.to_string()];
            let in_range = k <= self.t;
            let mut push = |v: Option<&Vector>, len: usize| match v {
                Some(v) => row.extend(v.iter().map(|x| format!("{x:e}"))),
                None => row.extend(std::iter::repeat_n(String::new(), len)),
            };
            push(in_range.then(|| &self.u[k]), m);
            push(in_range.then(|| &self.y[k]), p);
            push(Some(&self.eta[k]), e);
            if let Some(w) = hidden {
                push(in_range.then(|| &w[k]), n_w);
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Parse a record written by [`write_csv`](Self::write_csv). Oracle
    /// columns, if present, are loaded as hidden sequences.
    pub fn read_csv<R: Read>(input: R, ell: usize) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.clone();
        let cols = |prefix: &str| -> Vec<usize> {
            header
                .iter()
                .enumerate()
                .filter(|(_, h)| h.starts_with(prefix))
                .map(|(i, _)| i)
                .collect()
        };
        let (uc, yc, ec, wc) = (cols("u_"), cols("y_"), cols("eta_"), cols("w_"));
        if uc.is_empty() || yc.is_empty() || ec.is_empty() {
            return Err(Error::Config("record CSV needs u_*, y_* and eta_* columns".into()));
        }
        let mut u = Vec::new();
        let mut y = Vec::new();
        let mut eta = Vec::new();
        let mut w = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let parse = |idx: &[usize]| -> Result<Option<Vector>> {
                if idx.iter().all(|&i| row.get(i).unwrap_or("").is_empty()) {
                    return Ok(None);
                }
                let vals = idx
                    .iter()
                    .map(|&i| {
                        row.get(i)
                            .unwrap_or("")
                            .trim()
                            .parse::<f64>()
                            .map_err(|e| Error::Config(format!("bad CSV number: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Some(Vector::from_vec(vals)))
            };
            if let Some(v) = parse(&uc)? {
                u.push(v);
            }
            if let Some(v) = parse(&yc)? {
                y.push(v);
            }
            if let Some(v) = parse(&ec)? {
                eta.push(v);
            }
            if !wc.is_empty() {
                if let Some(v) = parse(&wc)? {
                    w.push(v);
                }
            }
        }
        let mut rec = Self::from_measurements(ell, u, y, eta)?;
        if !w.is_empty() {
            rec.hidden_w = Some(w);
        }
        Ok(rec)
    }
}

/// Run the experiment: the plant under `policy`, with the internal model
/// driven by the measured output.
#[allow(clippy::too_many_arguments)]
pub fn collect_experiment(
    plant: &PlantTruth,
    exo: &ExoMatrix,
    im: &InternalModel,
    w0: &Vector,
    x0: &Vector,
    eta0: &Vector,
    policy: &InputPolicy,
    t: usize,
    ell: usize,
) -> Result<ExperimentRecord> {
    if t < ell {
        return Err(Error::ExperimentTooShort { t, ell });
    }
    if im.outputs != plant.p_out() {
        return Err(Error::DimensionMismatch(
            "internal model output count differs from plant".into(),
        ));
    }
    let u = policy.realize(plant.m(), t + 1)?;
    let traj = simulate_plant(plant, exo, w0, x0, &u, t)?;
    let eta = simulate_internal_model(im, eta0, &traj.y)?;
    Ok(ExperimentRecord {
        t,
        ell,
        u,
        y: traj.y,
        eta,
        hidden_w: Some(traj.w),
        hidden_x: Some(traj.x),
    })
}

/// Designer-visible data matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrices {
    pub ell: usize,
    pub t: usize,
    pub m: usize,
    pub p: usize,
    /// Internal model dimension `pd`.
    pub eta_dim: usize,
    pub u1: Matrix,
    pub psi0: Matrix,
    pub psi1: Matrix,
}

impl DataMatrices {
    /// `ν = (m+p)ℓ + pd`.
    pub fn nu(&self) -> usize {
        (self.m + self.p) * self.ell + self.eta_dim
    }

    /// `N = T - ℓ + 1`.
    pub fn columns(&self) -> usize {
        self.t - self.ell + 1
    }

    /// Multiply every data matrix by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            u1: &self.u1 * alpha,
            psi0: &self.psi0 * alpha,
            psi1: &self.psi1 * alpha,
            ..self.clone()
        }
    }
}

fn psi_column(rec: &ExperimentRecord, start: usize) -> Vector {
    let ell = rec.ell;
    crate::numerics::stack_vectors([
        &window(&rec.y, start, ell),
        &window(&rec.u, start, ell),
        &rec.eta[start + ell],
    ])
}

pub fn assemble_data_matrices(rec: &ExperimentRecord) -> Result<DataMatrices> {
    rec.validate()?;
    let (ell, t) = (rec.ell, rec.t);
    let cols = t - ell + 1;
    let (m, p, e) = (rec.m(), rec.p(), rec.eta_dim());
    let nu = (m + p) * ell + e;
    let mut u1 = Matrix::zeros(m, cols);
    let mut psi0 = Matrix::zeros(nu, cols);
    let mut psi1 = Matrix::zeros(nu, cols);
    for j in 0..cols {
        u1.set_column(j, &rec.u[ell + j]);
        psi0.set_column(j, &psi_column(rec, j));
        psi1.set_column(j, &psi_column(rec, j + 1));
    }
    Ok(DataMatrices {
        ell,
        t,
        m,
        p,
        eta_dim: e,
        u1,
        psi0,
        psi1,
    })
}

/// Oracle-only `W0 = [w(ℓ), ..., w(T)]`.
pub fn oracle_w0(rec: &ExperimentRecord) -> Option<Matrix> {
    let w = rec.oracle_w()?;
    let cols = rec.t - rec.ell + 1;
    let n_w = w[0].len();
    let mut w0 = Matrix::zeros(n_w, cols);
    for j in 0..cols {
        w0.set_column(j, &w[rec.ell + j]);
    }
    Some(w0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::internal_model::build_internal_model;
    use crate::numerics::from_rows;

    fn vtol_record(seed: u64) -> ExperimentRecord {
        let plant = scenarios::vtol_plant();
        let exo = ExoMatrix::new(scenarios::rotation()).unwrap();
        let im = build_internal_model(&exo, 1, 1e-8, None).unwrap();
        let (w0, x0) = scenarios::vtol_initial();
        collect_experiment(
            &plant,
            &exo,
            &im,
            &w0,
            &x0,
            &scenarios::vtol_eta0(),
            &InputPolicy::Gaussian { seed },
            scenarios::VTOL_T,
            scenarios::VTOL_ELL,
        )
        .unwrap()
    }

    #[test]
    fn zero_everything_gives_zero_record() {
        let plant = scenarios::vtol_plant();
        let exo = ExoMatrix::new(scenarios::rotation()).unwrap();
        let im = build_internal_model(&exo, 1, 1e-8, None).unwrap();
        let rec = collect_experiment(
            &plant,
            &exo,
            &im,
            &Vector::zeros(2),
            &Vector::zeros(4),
            &Vector::zeros(2),
            &InputPolicy::Explicit {
                values: vec![vec![0.0]; 9],
            },
            8,
            4,
        )
        .unwrap();
        assert!(rec.y.iter().chain(&rec.eta).chain(&rec.u).all(|v| v.norm() == 0.0));
    }

    #[test]
    fn vtol_record_shapes() {
        let rec = vtol_record(1);
        assert_eq!(rec.u.len(), 21);
        assert_eq!(rec.y.len(), 21);
        assert_eq!(rec.eta.len(), 22);
        let dm = assemble_data_matrices(&rec).unwrap();
        assert_eq!(dm.u1.shape(), (1, 17));
        assert_eq!(dm.psi0.shape(), (10, 17));
        assert_eq!(dm.psi1.shape(), (10, 17));
        assert_eq!(dm.nu(), 10);
    }

    #[test]
    fn scalar_hand_recursion() {
        let plant = PlantTruth::new(
            from_rows(&[&[0.5]]),
            from_rows(&[&[1.0]]),
            from_rows(&[&[0.0]]),
            from_rows(&[&[1.0]]),
            from_rows(&[&[0.0]]),
        )
        .unwrap();
        let exo = ExoMatrix::new(from_rows(&[&[1.0]])).unwrap();
        let im = build_internal_model(&exo, 1, 1e-8, None).unwrap();
        let x0 = 2.0;
        let rec = collect_experiment(
            &plant,
            &exo,
            &im,
            &Vector::zeros(1),
            &Vector::from_vec(vec![x0]),
            &Vector::zeros(1),
            &InputPolicy::Explicit {
                values: vec![vec![1.0], vec![0.0]],
            },
            1,
            1,
        )
        .unwrap();
        assert_eq!(rec.y[0][0], x0);
        assert_eq!(rec.y[1][0], 0.5 * x0 + 1.0);
    }

    #[test]
    fn too_short_experiment() {
        let plant = scenarios::vtol_plant();
        let exo = ExoMatrix::new(scenarios::rotation()).unwrap();
        let im = build_internal_model(&exo, 1, 1e-8, None).unwrap();
        let (w0, x0) = scenarios::vtol_initial();
        let err = collect_experiment(
            &plant,
            &exo,
            &im,
            &w0,
            &x0,
            &scenarios::vtol_eta0(),
            &InputPolicy::Gaussian { seed: 0 },
            3,
            4,
        )
        .unwrap_err();
        assert!(err.to_string().contains("experiment too short"));
    }

    #[test]
    fn degenerate_single_window() {
        let plant = scenarios::vtol_plant();
        let exo = ExoMatrix::new(scenarios::rotation()).unwrap();
        let im = build_internal_model(&exo, 1, 1e-8, None).unwrap();
        let (w0, x0) = scenarios::vtol_initial();
        let rec = collect_experiment(
            &plant,
            &exo,
            &im,
            &w0,
            &x0,
            &scenarios::vtol_eta0(),
            &InputPolicy::Gaussian { seed: 3 },
            4,
            4,
        )
        .unwrap();
        let dm = assemble_data_matrices(&rec).unwrap();
        assert_eq!(dm.psi0.ncols(), 1);
        assert_eq!(dm.u1.ncols(), 1);
        assert_eq!(oracle_w0(&rec).unwrap().ncols(), 1);
    }

    #[test]
    fn sliding_window_consistency_and_layout() {
        let rec = vtol_record(11);
        let dm = assemble_data_matrices(&rec).unwrap();
        let (ell, p, m) = (rec.ell, rec.p(), rec.m());
        for j in 0..dm.columns() {
            // Row layout: y-window, u-window, η.
            for i in 0..ell {
                assert_eq!(dm.psi0[(i * p, j)], rec.y[j + i][0]);
                assert_eq!(dm.psi0[(p * ell + i * m, j)], rec.u[j + i][0]);
            }
            assert_eq!(dm.psi0[((p + m) * ell, j)], rec.eta[ell + j][0]);
            assert_eq!(dm.u1[(0, j)], rec.u[ell + j][0]);
            if j + 1 < dm.columns() {
                assert_eq!(dm.psi1.column(j).into_owned(), dm.psi0.column(j + 1).into_owned());
            }
        }
        assert!(
            rec.eta_residual(
                &build_internal_model(&ExoMatrix::new(scenarios::rotation()).unwrap(), 1, 1e-8, None).unwrap()
            ) < 1e-10
        );
    }

    #[test]
    fn same_seed_same_data() {
        let a = assemble_data_matrices(&vtol_record(5)).unwrap();
        let b = assemble_data_matrices(&vtol_record(5)).unwrap();
        assert_eq!(a, b);
        let c = assemble_data_matrices(&vtol_record(6)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn csv_round_trip_masks_oracle() {
        let rec = vtol_record(2);
        let mut masked = Vec::new();
        rec.write_csv(&mut masked, false).unwrap();
        let text = String::from_utf8(masked.clone()).unwrap();
        assert!(text.starts_with("k,u_1,y_1,eta_1,eta_2\n"));
        let back = ExperimentRecord::read_csv(masked.as_slice(), rec.ell).unwrap();
        assert!(back.oracle_w().is_none());
        assert_eq!(back.t, rec.t);
        for (a, b) in back.y.iter().zip(&rec.y) {
            assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0));
        }

        let mut unmasked = Vec::new();
        rec.write_csv(&mut unmasked, true).unwrap();
        let back = ExperimentRecord::read_csv(unmasked.as_slice(), rec.ell).unwrap();
        assert_eq!(back.oracle_w().unwrap().len(), rec.t + 1);
    }
}
