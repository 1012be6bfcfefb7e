//! Canned plants and seeded random scenario generators shared by the
//! pipeline, the benches and the test suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::exo_factorization::JordanSpec;
use crate::numerics::{from_rows, spectral_radius, Matrix, Vector};
use crate::plant::{observability_index, ExoMatrix, PlantTruth};

/// `[[0, 1], [-1, 0]]`, a quarter-turn rotation.
pub fn rotation() -> Matrix {
    from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]])
}

pub fn rotation_by(theta: f64) -> Matrix {
    let (c, s) = (theta.cos(), theta.sin());
    from_rows(&[&[c, s], &[-s, c]])
}

/// Discretized linearized VTOL aircraft with a sinusoidal output disturbance.
pub fn vtol_plant() -> PlantTruth {
    PlantTruth::new(
        from_rows(&[
            &[1.0000, 0.2500, 0.0, 0.0],
            &[0.0, 1.0000, 0.0, 0.0],
            &[-0.3066, -0.0255, 1.0000, 0.2500],
            &[-2.4525, -0.3066, 0.0, 1.0000],
        ]),
        from_rows(&[&[0.4396], &[3.5172], &[-0.0152], &[-0.3015]]),
        Matrix::zeros(4, 2),
        from_rows(&[&[1.0, 0.0, 1.0, 0.0]]),
        from_rows(&[&[1.0, 0.0]]),
    )
    .expect("VTOL plant is well formed")
}

/// `(w(0), x(0))` of the VTOL data-collection run.
pub fn vtol_initial() -> (Vector, Vector) {
    (
        Vector::from_vec(vec![0.0538, 0.1834]),
        Vector::from_vec(vec![-2.2588, 0.8622, 0.3188, -1.3077]),
    )
}

pub fn vtol_eta0() -> Vector {
    Vector::from_vec(vec![-0.4336, 0.3426])
}

pub const VTOL_ELL: usize = 4;
pub const VTOL_T: usize = 20;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vector(rng: &mut impl Rng, n: usize) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

pub fn normal_matrix(rng: &mut impl Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_iterator(r, c, (0..r * c).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// `I + 0.3/n · U[-1, 1]`: condition number stays well below 10.
pub fn well_conditioned(rng: &mut impl Rng, n: usize) -> Matrix {
    let noise = Matrix::from_iterator(n, n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)));
    Matrix::identity(n, n) + noise * (0.3 / n as f64)
}

/// Exosystem spectra exercised by the randomized suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExoKind {
    /// Constant signal, `S = [1]`.
    Step,
    /// Constant plus ramp, `S ~ J_2(1)`.
    Ramp,
    /// One rotation pair at a random frequency.
    Sinusoid,
    /// Step plus sinusoid.
    Mixed,
    /// Alternating sign plus two sinusoids.
    Rich,
}

impl ExoKind {
    pub const ALL: [ExoKind; 5] = [
        ExoKind::Step,
        ExoKind::Ramp,
        ExoKind::Sinusoid,
        ExoKind::Mixed,
        ExoKind::Rich,
    ];
}

/// Random exosystem of the requested kind, hidden behind a well-conditioned
/// similarity. Returns `S` and its Jordan structure.
pub fn random_exosystem(rng: &mut impl Rng, kind: ExoKind) -> (ExoMatrix, JordanSpec) {
    let mut theta = || rng.random_range(0.3..2.8);
    let (base, spec) = match kind {
        ExoKind::Step => (Matrix::identity(1, 1), JordanSpec::new(vec![(1.0, 1)], vec![])),
        ExoKind::Ramp => (
            from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]),
            JordanSpec::new(vec![(1.0, 2)], vec![]),
        ),
        ExoKind::Sinusoid => {
            let th = theta();
            (rotation_by(th), JordanSpec::new(vec![], vec![(1.0, th, 1)]))
        }
        ExoKind::Mixed => {
            let th = theta();
            let mut s = Matrix::identity(3, 3);
            s.view_mut((1, 1), (2, 2)).copy_from(&rotation_by(th));
            (s, JordanSpec::new(vec![(1.0, 1)], vec![(1.0, th, 1)]))
        }
        ExoKind::Rich => {
            let (t1, t2) = (theta(), theta());
            let t2 = if (t1 - t2).abs() < 0.2 { t1 + 0.25 } else { t2 };
            let mut s = Matrix::zeros(5, 5);
            s[(0, 0)] = -1.0;
            s.view_mut((1, 1), (2, 2)).copy_from(&rotation_by(t1));
            s.view_mut((3, 3), (2, 2)).copy_from(&rotation_by(t2));
            (s, JordanSpec::new(vec![(-1.0, 1)], vec![(1.0, t1, 1), (1.0, t2, 1)]))
        }
    };
    let n = base.nrows();
    let v = well_conditioned(rng, n);
    let s = &v * base * v.clone().try_inverse().expect("well conditioned");
    (ExoMatrix::new(s).expect("unit-circle spectrum"), spec)
}

/// Random observable plant whose `A` has spectral radius `radius`.
pub fn random_plant(rng: &mut impl Rng, n: usize, m: usize, p: usize, n_w: usize, radius: f64) -> PlantTruth {
    loop {
        let mut a = normal_matrix(rng, n, n);
        let rho = spectral_radius(&a).unwrap_or(0.0);
        if rho < 1e-6 {
            continue;
        }
        a *= radius / rho;
        let plant = PlantTruth::new(
            a,
            normal_matrix(rng, n, m),
            normal_matrix(rng, n, n_w),
            normal_matrix(rng, p, n),
            normal_matrix(rng, p, n_w),
        )
        .expect("random plant is well formed");
        if observability_index(&plant.a, &plant.c).is_ok() {
            return plant;
        }
    }
}

/// A complete oracle scenario: plant, exosystem, and initial conditions.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub plant: PlantTruth,
    pub exo: ExoMatrix,
    pub jordan: JordanSpec,
    pub w0: Vector,
    pub x0: Vector,
}

pub fn random_scenario(rng: &mut impl Rng, n: usize, m: usize, p: usize, kind: ExoKind, radius: f64) -> Scenario {
    let (exo, jordan) = random_exosystem(rng, kind);
    let plant = random_plant(rng, n, m, p, exo.n_w(), radius);
    let w0 = normal_vector(rng, exo.n_w());
    let x0 = normal_vector(rng, n);
    Scenario {
        plant,
        exo,
        jordan,
        w0,
        x0,
    }
}
