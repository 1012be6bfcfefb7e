//! Config-driven runs: collect, factorize, synthesize, verify, report.

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exo_factorization::{
    analyze_exosystem, build_m_jordan, build_m_krylov, factorization_residual, AnalysisMode, FactorizationMethod,
    JordanSpec, Regressor, DEFAULT_CLUSTER_TOL,
};
use crate::experiment::{assemble_data_matrices, collect_experiment, oracle_w0, ExperimentRecord, InputPolicy};
use crate::internal_model::{build_internal_model, InternalModel};
use crate::numerics::{eigenvalues, minimal_polynomial, Matrix, Vector, DEFAULT_RANK_TOL};
use crate::plant::{build_structural_matrices, observability_index, ExoMatrix, PlantTruth};
use crate::scenarios::{self, ExoKind, Scenario};
use crate::synthesis::{
    assemble_sdp, check_constraints, feasibility_precheck, solve_feasibility_sdp, ConstraintCheck, Precheck,
    SolverOptions, SynthesisResult,
};
use crate::verify::{
    assemble_closed_loop, build_auxiliary_matrices, check_claim1, check_data_identity, check_internal_stability,
    check_regulator_equations, check_representation, check_solution_correspondence, simulate_closed_loop,
    ClosedLoopModel, ClosedLoopRun, RegulationMetrics, VerificationReport,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorizationConfig {
    /// Jordan regressor; the structure of `S` is detected when `spec` is
    /// absent, which requires a diagonalizable `S`.
    Jordan {
        #[serde(default)]
        spec: Option<JordanSpec>,
    },
    Krylov {
        w_star: Vec<f64>,
    },
}

impl FactorizationConfig {
    pub fn method(&self) -> FactorizationMethod {
        match self {
            FactorizationConfig::Jordan { .. } => FactorizationMethod::Jordan,
            FactorizationConfig::Krylov { .. } => FactorizationMethod::Krylov,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConditions {
    pub w0: Vec<f64>,
    pub x0: Vec<f64>,
    pub eta0: Vec<f64>,
}

/// Closed-loop simulation settings. Initial conditions default to those of
/// the experiment, with `χ(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClosedLoopConfig {
    pub steps: usize,
    pub tail_fraction: f64,
    pub eps_reg: f64,
    pub w0: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
    pub chi0: Option<Vec<f64>>,
    pub eta0: Option<Vec<f64>>,
}

impl Default for ClosedLoopConfig {
    fn default() -> Self {
        Self {
            steps: 300,
            tail_fraction: 0.1,
            eps_reg: 1e-4,
            w0: None,
            x0: None,
            chi0: None,
            eta0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub rank_tol: f64,
    /// Eigenvalue clustering radius relative to `‖S‖`.
    pub cluster_tol: f64,
    /// Round minimal-polynomial coefficients within this of an integer.
    pub snap_coeffs: Option<f64>,
    pub identity_tol: f64,
    pub regulator_tol: f64,
    pub representation_tol: f64,
    pub im_root_tol: f64,
    pub minpoly_tol: f64,
    /// `‖(x, χ, η)(steps)‖ / ‖(x, χ, η)(0)‖` bound for the `w ≡ 0` run.
    pub decay_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
            cluster_tol: DEFAULT_CLUSTER_TOL,
            snap_coeffs: None,
            identity_tol: 1e-8,
            regulator_tol: 1e-6,
            representation_tol: 1e-8,
            im_root_tol: 1e-6,
            minpoly_tol: 1e-8,
            decay_tol: 1e-6,
        }
    }
}

/// One run. With `plant` present the data are simulated and every oracle
/// check runs; without it the data come from `record_csv` and only the
/// designer-side checks run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub plant: Option<PlantTruth>,
    pub exosystem: ExoMatrix,
    pub factorization: FactorizationConfig,
    /// Required without a plant; defaults to the observability index.
    #[serde(default)]
    pub ell: Option<usize>,
    /// Experiment length `T`.
    pub t: usize,
    #[serde(default = "default_input")]
    pub input: InputPolicy,
    #[serde(default)]
    pub initial: Option<InitialConditions>,
    #[serde(default)]
    pub record_csv: Option<String>,
    #[serde(default)]
    pub closed_loop: ClosedLoopConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default = "default_correspondence_steps")]
    pub correspondence_steps: usize,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn default_input() -> InputPolicy {
    InputPolicy::Gaussian { seed: 0 }
}

fn default_correspondence_steps() -> usize {
    30
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(plant) = &self.plant {
            plant.validate()?;
            if plant.n_w() != self.exosystem.n_w() {
                return Err(Error::Config("P and Q must have n_w columns".into()));
            }
            let init = self
                .initial
                .as_ref()
                .ok_or_else(|| Error::Config("simulated runs need `initial`".into()))?;
            if init.w0.len() != plant.n_w() || init.x0.len() != plant.n() {
                return Err(Error::Config("initial condition sizes do not match the plant".into()));
            }
        } else {
            if self.record_csv.is_none() {
                return Err(Error::Config("either `plant` or `record_csv` is required".into()));
            }
            if self.ell.is_none() {
                return Err(Error::Config("`ell` is required without a plant".into()));
            }
        }
        if let FactorizationConfig::Krylov { w_star } = &self.factorization {
            if w_star.len() != self.exosystem.n_w() {
                return Err(Error::Config("w_star must have n_w entries".into()));
            }
        }
        if !(self.closed_loop.tail_fraction > 0.0 && self.closed_loop.tail_fraction <= 1.0) {
            return Err(Error::Config("tail_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Canonical JSON with every default filled in.
    pub fn effective_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact canonical JSON.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Replace the input seed; explicit inputs are left alone.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let InputPolicy::Gaussian { seed: s } = &mut self.input {
            *s = seed;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dimensions {
    pub m: usize,
    pub p: usize,
    pub n_w: usize,
    pub ell: usize,
    pub t: usize,
    /// `ν = (m+p)ℓ + pd`.
    pub nu: usize,
    /// `N = T - ℓ + 1`.
    pub n_cols: usize,
    pub nhat_w: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub harness: bool,
    pub dims: Dimensions,
    pub factorization: FactorizationMethod,
    pub factorization_residual: Option<f64>,
    pub precheck: Precheck,
    pub synthesis: SynthesisResult,
    pub constraints: ConstraintCheck,
    pub spectral_radius: Option<f64>,
    /// `1 - ρ`.
    pub stability_margin: Option<f64>,
    pub regulation: Option<RegulationMetrics>,
    pub checks: VerificationReport,
    pub all_pass: bool,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub report: RunReport,
    pub record: ExperimentRecord,
    pub regressor: Regressor,
    pub closed_loop: Option<(ClosedLoopModel, ClosedLoopRun)>,
}

impl RunOutcome {
    /// `report.json`, `effective_config.json`, `experiment.csv`,
    /// `regressor.csv` and, when a gain exists, `closed_loop.csv`.
    pub fn write_artifacts(&self, dir: &Path, unmask: bool) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let report = serde_json::to_string_pretty(&self.report)?;
        std::fs::write(dir.join("report.json"), report + "\n")?;
        std::fs::write(dir.join("effective_config.json"), self.config.effective_json() + "\n")?;
        self.record
            .write_csv(BufWriter::new(File::create(dir.join("experiment.csv"))?), unmask)?;
        self.regressor.write_csv(
            BufWriter::new(File::create(dir.join("regressor.csv"))?),
            self.report.dims.ell,
        )?;
        if let Some((cl, run)) = &self.closed_loop {
            run.write_csv(cl, BufWriter::new(File::create(dir.join("closed_loop.csv"))?), unmask)?;
        }
        Ok(())
    }
}

fn vec_of(v: &[f64]) -> Vector {
    Vector::from_column_slice(v)
}

fn build_regressor(cfg: &RunConfig, ell: usize) -> Result<Regressor> {
    let exo = &cfg.exosystem;
    let mut reg = match &cfg.factorization {
        FactorizationConfig::Jordan { spec } => {
            let mode = match spec {
                Some(s) => AnalysisMode::Declared(s.clone()),
                None => AnalysisMode::Auto,
            };
            let spec = analyze_exosystem(exo, &mode, cfg.tolerances.cluster_tol)?;
            build_m_jordan(&spec, ell, cfg.t)?
        }
        FactorizationConfig::Krylov { w_star } => build_m_krylov(exo, &vec_of(w_star), ell, cfg.t)?,
    };
    reg.reduce(cfg.tolerances.rank_tol);
    Ok(reg)
}

/// Largest `|m_S(λ)|` over eigenvalues `λ` of `Φ`, and `‖m_S(S)‖`.
pub fn internal_model_residuals(im: &InternalModel, exo: &ExoMatrix) -> Result<(f64, f64)> {
    let roots = eigenvalues(&im.phi)?
        .into_iter()
        .map(|z| im.minpoly.eval(z).norm())
        .fold(0.0, f64::max);
    Ok((roots, im.minpoly.eval_matrix(exo.s()).norm()))
}

/// The experiment record, `ℓ` and the internal model: simulated in harness
/// mode, read from `record_csv` otherwise.
pub fn collect(cfg: &RunConfig) -> Result<(ExperimentRecord, usize, InternalModel)> {
    cfg.validate()?;
    let exo = &cfg.exosystem;
    let tol = &cfg.tolerances;
    match &cfg.plant {
        Some(plant) => {
            let ell = match cfg.ell {
                Some(l) => l,
                None => observability_index(&plant.a, &plant.c).map_err(|e| e.in_stage("collect"))?,
            };
            let im = build_internal_model(exo, plant.p_out(), tol.rank_tol, tol.snap_coeffs)
                .map_err(|e| e.in_stage("internal model"))?;
            let init = cfg.initial.as_ref().expect("validated");
            let rec = collect_experiment(
                plant,
                exo,
                &im,
                &vec_of(&init.w0),
                &vec_of(&init.x0),
                &vec_of(&init.eta0),
                &cfg.input,
                cfg.t,
                ell,
            )
            .map_err(|e| e.in_stage("collect"))?;
            Ok((rec, ell, im))
        }
        None => {
            let ell = cfg.ell.expect("validated");
            let path = cfg.record_csv.as_ref().expect("validated");
            let rec = File::open(path)
                .map_err(Error::from)
                .and_then(|f| ExperimentRecord::read_csv(f, ell))
                .map_err(|e| e.in_stage("collect"))?;
            if rec.t != cfg.t {
                let msg = format!("record has T = {}, config says {}", rec.t, cfg.t);
                return Err(Error::Config(msg).in_stage("collect"));
            }
            let im = build_internal_model(exo, rec.p(), tol.rank_tol, tol.snap_coeffs)
                .map_err(|e| e.in_stage("internal model"))?;
            Ok((rec, ell, im))
        }
    }
}

/// Full pipeline. In harness mode the oracle checks and the closed-loop
/// simulation run after synthesis.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunOutcome> {
    run_stages(cfg, true)
}

/// Collect, factorize and synthesize with the designer-side checks only,
/// even when plant matrices are present.
pub fn run_synthesis(cfg: &RunConfig) -> Result<RunOutcome> {
    run_stages(cfg, false)
}

fn run_stages(cfg: &RunConfig, harness: bool) -> Result<RunOutcome> {
    let exo = &cfg.exosystem;
    let tol = &cfg.tolerances;
    let (record, ell, im) = collect(cfg)?;

    let data = assemble_data_matrices(&record).map_err(|e| e.in_stage("assemble"))?;
    let regressor = build_regressor(cfg, ell).map_err(|e| e.in_stage("factorize"))?;
    let prob = assemble_sdp(&data, &regressor).map_err(|e| e.in_stage("synthesize"))?;
    let precheck = feasibility_precheck(data.p, ell, &prob.mhat, &prob.psi0, cfg.plant.as_ref().map(|pl| pl.n()));
    let synthesis = solve_feasibility_sdp(&prob, &cfg.solver);
    let constraints = check_constraints(&prob, &synthesis.x, &synthesis.y);

    let mut checks = VerificationReport::default();
    checks.push_above("sdp_margin", synthesis.margin, cfg.solver.feas_tol);
    if synthesis.k.is_none() {
        checks.push_failed("gain_available", 0.0);
    }
    if synthesis.is_feasible() {
        checks.push("sdp_equality", constraints.equality_residual, 1e-7);
        checks.push("sdp_annihilation", constraints.annihilation_residual, 1e-7);
        checks.push(
            "gain_identity",
            synthesis.gain_identity_residual.unwrap_or(f64::MAX),
            crate::synthesis::GAIN_IDENTITY_TOL,
        );
    }
    let (im_roots, im_minpoly) = internal_model_residuals(&im, exo).map_err(|e| e.in_stage("verify"))?;
    checks.push("internal_model_roots", im_roots, tol.im_root_tol);
    checks.push("minimal_polynomial_annihilates_s", im_minpoly, tol.minpoly_tol);

    let dims = Dimensions {
        m: data.m,
        p: data.p,
        n_w: exo.n_w(),
        ell,
        t: cfg.t,
        nu: data.nu(),
        n_cols: data.columns(),
        nhat_w: prob.nhat_w(),
    };
    let mut report = RunReport {
        config_hash: cfg.hash(),
        harness: harness && cfg.plant.is_some(),
        dims,
        factorization: cfg.factorization.method(),
        factorization_residual: None,
        precheck,
        synthesis,
        constraints,
        spectral_radius: None,
        stability_margin: None,
        regulation: None,
        checks,
        all_pass: false,
    };
    let mut closed_loop = None;

    if let Some(plant) = cfg.plant.as_ref().filter(|_| harness) {
        let v = verify_harness(cfg, plant, &im, &record, &data, &regressor, &mut report)
            .map_err(|e| e.in_stage("verify"))?;
        closed_loop = v;
    }
    report.all_pass = report.checks.all_pass();
    Ok(RunOutcome {
        config: cfg.clone(),
        report,
        record,
        regressor,
        closed_loop,
    })
}

fn verify_harness(
    cfg: &RunConfig,
    plant: &PlantTruth,
    im: &InternalModel,
    record: &ExperimentRecord,
    data: &crate::experiment::DataMatrices,
    regressor: &Regressor,
    report: &mut RunReport,
) -> Result<Option<(ClosedLoopModel, ClosedLoopRun)>> {
    let exo = &cfg.exosystem;
    let tol = &cfg.tolerances;
    let ell = report.dims.ell;
    let sm = build_structural_matrices(plant, ell)?;
    let aux = build_auxiliary_matrices(plant, &sm, exo, im)?;
    let w0m = oracle_w0(record).expect("simulated record");
    let checks = &mut report.checks;

    let fres = factorization_residual(&w0m, &regressor.m);
    report.factorization_residual = Some(fres);
    checks.push("factorization_residual", fres, tol.identity_tol);
    checks.push("data_identity", check_data_identity(data, &aux, &w0m), tol.identity_tol);
    checks.push("claim1", check_claim1(record, plant, &sm)?.max(), tol.identity_tol);

    let init = cfg.initial.as_ref().expect("validated");
    let cl_cfg = &cfg.closed_loop;
    let pick = |o: &Option<Vec<f64>>, d: &[f64]| vec_of(o.as_deref().unwrap_or(d));
    let w0 = pick(&cl_cfg.w0, &init.w0);
    let x0 = pick(&cl_cfg.x0, &init.x0);
    let chi0 = match &cl_cfg.chi0 {
        Some(c) => vec_of(c),
        None => Vector::zeros(aux.chi_dim()),
    };
    let eta0 = pick(&cl_cfg.eta0, &init.eta0);

    let Some(k) = report.synthesis.k.clone() else {
        // Without a gain, check the lockstep correspondence on the
        // experiment inputs, padded with zeros.
        let steps = cfg.correspondence_steps.max(ell);
        let mut u = record.u.clone();
        u.resize(steps + 1, Vector::zeros(plant.m()));
        let c = check_solution_correspondence(plant, &sm, &aux, exo, steps, &u, &w0, &x0, &chi0)?;
        checks.push("correspondence_xi", c.xi, tol.identity_tol);
        checks.push("correspondence_phi", c.phi, tol.identity_tol);
        return Ok(None);
    };

    let cl = assemble_closed_loop(plant, exo, &aux, im, &k)?;
    let rho = check_internal_stability(&cl)?;
    report.spectral_radius = Some(rho);
    report.stability_margin = Some(1.0 - rho);
    checks.push("spectral_radius", rho, 1.0);

    let xinv = report
        .synthesis
        .x
        .clone()
        .try_inverse()
        .ok_or(Error::SingularX(report.constraints.x_min_eig))?;
    let psi1g = &data.psi1 * &report.synthesis.y * xinv;
    let (gap, _) = check_representation(&aux, &psi1g, &k)?;
    checks.push("representation_gap", gap, tol.representation_tol);
    match check_regulator_equations(&aux, exo, &psi1g) {
        Ok(reg) => {
            checks.push("regulator_identity", reg.identity_residual, tol.regulator_tol);
            checks.push("regulator_sylvester", reg.sylvester_residual, tol.identity_tol);
        }
        Err(_) => {
            checks.push_failed("regulator_identity", tol.regulator_tol);
            checks.push_failed("regulator_sylvester", tol.identity_tol);
        }
    }

    let run = match simulate_closed_loop(
        &cl,
        &w0,
        &x0,
        &chi0,
        &eta0,
        cl_cfg.steps,
        cl_cfg.tail_fraction,
        cl_cfg.eps_reg,
    ) {
        Ok(run) => run,
        Err(Error::Divergence { .. }) => {
            checks.push_failed("regulation_tail", cl_cfg.eps_reg);
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    checks.push("regulation_tail", run.metrics.tail_max_y, cl_cfg.eps_reg);
    report.regulation = Some(run.metrics);

    // The same loop with w ≡ 0 must decay.
    let decay = simulate_closed_loop(
        &cl,
        &Vector::zeros(exo.n_w()),
        &x0,
        &chi0,
        &eta0,
        cl_cfg.steps,
        cl_cfg.tail_fraction,
        cl_cfg.eps_reg,
    )
    .map(|r| r.metrics.final_internal_norm / r.metrics.initial_internal_norm.max(f64::MIN_POSITIVE))
    .unwrap_or(f64::MAX);
    checks.push("zero_exosignal_decay", decay, tol.decay_tol);

    // Lockstep correspondence under the closed-loop input sequence.
    let steps = cfg.correspondence_steps.min(cl_cfg.steps);
    if steps >= ell {
        let c = check_solution_correspondence(plant, &sm, &aux, exo, steps, &run.u, &w0, &x0, &chi0)?;
        checks.push("correspondence_xi", c.xi, tol.identity_tol);
        checks.push("correspondence_phi", c.phi, tol.identity_tol);
    }
    Ok(Some((cl, run)))
}

/// The VTOL scenario with `T = 20`, `ℓ = 4` and Gaussian inputs from `seed`.
pub fn paper_example_config(seed: u64, method: FactorizationMethod) -> RunConfig {
    let (w0, x0) = scenarios::vtol_initial();
    let factorization = match method {
        FactorizationMethod::Jordan => FactorizationConfig::Jordan {
            spec: Some(JordanSpec::new(vec![], vec![(1.0, PI / 2.0, 1)])),
        },
        FactorizationMethod::Krylov => FactorizationConfig::Krylov { w_star: vec![1.0, 0.0] },
    };
    RunConfig {
        plant: Some(scenarios::vtol_plant()),
        exosystem: ExoMatrix::new(scenarios::rotation()).expect("rotation is admissible"),
        factorization,
        ell: Some(scenarios::VTOL_ELL),
        t: scenarios::VTOL_T,
        input: InputPolicy::Gaussian { seed },
        initial: Some(InitialConditions {
            w0: w0.as_slice().to_vec(),
            x0: x0.as_slice().to_vec(),
            eta0: scenarios::vtol_eta0().as_slice().to_vec(),
        }),
        record_csv: None,
        closed_loop: ClosedLoopConfig::default(),
        tolerances: Tolerances::default(),
        solver: SolverOptions::default(),
        correspondence_steps: default_correspondence_steps(),
        output_dir: None,
    }
}

/// Run the VTOL scenario. With `zero_w0` the closed loop starts from
/// `w(0) = 0`.
pub fn reproduce_paper_example(seed: u64, method: FactorizationMethod, zero_w0: bool) -> Result<RunOutcome> {
    let mut cfg = paper_example_config(seed, method);
    if zero_w0 {
        cfg.closed_loop.w0 = Some(vec![0.0; 2]);
    }
    run_pipeline(&cfg)
}

/// Harness config for an oracle scenario with Gaussian inputs from `seed`
/// and a zero internal-model state.
pub fn scenario_config(sc: &Scenario, factorization: FactorizationConfig, t: usize, seed: u64) -> RunConfig {
    let d = minimal_polynomial(sc.exo.s(), DEFAULT_RANK_TOL).map_or(sc.exo.n_w(), |mp| mp.degree());
    RunConfig {
        plant: Some(sc.plant.clone()),
        exosystem: sc.exo.clone(),
        factorization,
        ell: None,
        t,
        input: InputPolicy::Gaussian { seed },
        initial: Some(InitialConditions {
            w0: sc.w0.as_slice().to_vec(),
            x0: sc.x0.as_slice().to_vec(),
            eta0: vec![0.0; sc.plant.p_out() * d],
        }),
        record_csv: None,
        closed_loop: ClosedLoopConfig::default(),
        tolerances: Tolerances::default(),
        solver: SolverOptions::default(),
        correspondence_steps: default_correspondence_steps(),
        output_dir: None,
    }
}

/// A plant with `p = 2`, `n = 3` and observability index 2 tracking a
/// sinusoid. Here `pℓ > n` and `M̂` has full row rank, so the SDP has no
/// solution.
pub fn overdetermined_output_config(seed: u64) -> RunConfig {
    let mut rng = scenarios::rng(seed);
    loop {
        let sc = scenarios::random_scenario(&mut rng, 3, 1, 2, ExoKind::Sinusoid, 0.9);
        if observability_index(&sc.plant.a, &sc.plant.c).ok() != Some(2) {
            continue;
        }
        let spec = Some(sc.jordan.clone());
        return scenario_config(&sc, FactorizationConfig::Jordan { spec }, 30, seed);
    }
}

/// Gain of a report, if any, for callers that only need `K`.
pub fn gain(report: &RunReport) -> Option<&Matrix> {
    report.synthesis.k.as_ref()
}
