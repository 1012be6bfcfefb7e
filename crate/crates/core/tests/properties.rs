use outreg_core::exo_factorization::factorization_residual;
use outreg_core::exo_factorization::{build_m_jordan, FactorizationMethod};
use outreg_core::experiment::{assemble_data_matrices, oracle_w0};
use outreg_core::numerics::{binomial_ext, minimal_polynomial, rank_with_tol, spectral_radius};
use outreg_core::pipeline::{paper_example_config, run_pipeline, scenario_config, FactorizationConfig};
use outreg_core::scenarios::{self, normal_matrix, random_exosystem, random_scenario, well_conditioned, ExoKind};
use outreg_core::synthesis::{assemble_sdp, check_constraints, solve_feasibility_sdp, SolverOptions};
use outreg_core::Matrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn kind(i: usize) -> ExoKind {
    ExoKind::ALL[i % ExoKind::ALL.len()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rank_survives_permutation_and_conditioning(seed in 0u64..10_000, r in 1usize..6, c in 1usize..6, k in 0usize..5) {
        let mut rng = scenarios::rng(seed);
        let k = k.min(r).min(c);
        let m = normal_matrix(&mut rng, r, k) * normal_matrix(&mut rng, k, c);
        let base = rank_with_tol(&m, 1e-8).unwrap();
        prop_assert_eq!(base, k);

        let mut rows: Vec<usize> = (0..r).collect();
        let mut cols: Vec<usize> = (0..c).collect();
        rows.shuffle(&mut rng);
        cols.shuffle(&mut rng);
        let permuted = Matrix::from_fn(r, c, |i, j| m[(rows[i], cols[j])]);
        prop_assert_eq!(rank_with_tol(&permuted, 1e-8).unwrap(), base);

        let v = well_conditioned(&mut rng, r);
        let cond = {
            let sv = v.clone().singular_values();
            sv.max() / sv.min()
        };
        prop_assume!(cond < 1e3);
        prop_assert_eq!(rank_with_tol(&(v * &m), 1e-8).unwrap(), base);
    }

    #[test]
    fn minimal_polynomial_annihilates(seed in 0u64..10_000, i in 0usize..5) {
        let mut rng = scenarios::rng(seed);
        let (exo, spec) = random_exosystem(&mut rng, kind(i));
        let mp = minimal_polynomial(exo.s(), 1e-8).unwrap();
        let d = mp.degree();
        prop_assert!(d <= exo.n_w());
        let s_norm = exo.s().norm();
        prop_assert!(mp.eval_matrix(exo.s()).norm() < 1e-8 * s_norm.powi(d as i32).max(1.0));
        // Degree equals the sum of the largest block per eigenvalue.
        prop_assert_eq!(d, spec.n_w());
    }

    #[test]
    fn oracle_identities_hold_on_random_records(seed in 0u64..10_000, i in 0usize..5, n in 1usize..6, t_extra in 0usize..20) {
        let mut rng = scenarios::rng(seed);
        let sc = random_scenario(&mut rng, n, 1 + seed as usize % 2, 1 + i % 2, kind(i), if seed % 3 == 0 { 1.2 } else { 0.8 });
        let mut cfg = scenario_config(&sc, FactorizationConfig::Jordan { spec: Some(sc.jordan.clone()) }, 8 + t_extra, seed);
        cfg.closed_loop.steps = 60;
        let out = run_pipeline(&cfg).unwrap();
        let checks = &out.report.checks;
        for name in ["data_identity", "claim1", "factorization_residual", "correspondence_xi", "correspondence_phi"] {
            let c = checks.get(name).unwrap();
            prop_assert!(c.pass, "{} = {:e}", name, c.value);
        }
        let w0 = oracle_w0(&out.record).unwrap();
        prop_assert!(factorization_residual(&w0, &out.regressor.m) < 1e-8);
    }

    #[test]
    fn diagonalizable_unit_circle_regressor_is_bounded(seed in 0u64..10_000, i in 0usize..5, t in 1usize..40) {
        let mut rng = scenarios::rng(seed);
        let (_, spec) = random_exosystem(&mut rng, kind(i));
        prop_assume!(spec.max_block() == 1);
        let m = build_m_jordan(&spec, 0, t).unwrap().m;
        let bound = binomial_ext(t as i64, t as i64).unwrap() as f64;
        prop_assert!(m.amax() <= bound + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn feasible_designs_are_schur_and_satisfy_constraints(seed in 0u64..10_000, i in 0usize..5, n in 2usize..5) {
        let mut rng = scenarios::rng(seed);
        let sc = random_scenario(&mut rng, n, 1, 1, kind(i), 0.8);
        let cfg = scenario_config(&sc, FactorizationConfig::Jordan { spec: Some(sc.jordan.clone()) }, 40, seed);
        let mut cfg = cfg;
        let first = run_pipeline(&cfg).unwrap();
        prop_assume!(first.report.synthesis.is_feasible());
        // Regulation is asymptotic; size the horizon so ρ^k has decayed.
        let rho = first.report.spectral_radius.unwrap();
        prop_assert!(rho < 1.0);
        cfg.closed_loop.steps = cfg.closed_loop.steps.max((-25.0 / rho.ln()).ceil() as usize);
        let out = run_pipeline(&cfg).unwrap();
        let syn = &out.report.synthesis;
        let data = assemble_data_matrices(&out.record).unwrap();
        let prob = assemble_sdp(&data, &out.regressor).unwrap();
        let check = check_constraints(&prob, &syn.x, &syn.y);
        prop_assert!(check.x_min_eig > 1e-6 && check.schur_min_eig > 1e-6);
        prop_assert!(check.equality_residual < 1e-7 && check.annihilation_residual < 1e-7);
        let psi1g = &data.psi1 * &syn.y * syn.x.clone().try_inverse().unwrap();
        prop_assert!(spectral_radius(&psi1g).unwrap() < 1.0);
        prop_assert!(out.report.all_pass);
    }
}

#[test]
fn gain_is_scale_invariant() {
    let opts = SolverOptions::default();
    let mut cases: Vec<_> = (0..3)
        .flat_map(|seed| [FactorizationMethod::Jordan, FactorizationMethod::Krylov].map(|m| (seed, m)))
        .map(|(seed, m)| run_pipeline(&paper_example_config(seed, m)).unwrap())
        .collect();
    let mut rng = scenarios::rng(5);
    let sc = random_scenario(&mut rng, 3, 1, 1, ExoKind::Mixed, 0.8);
    let cfg = scenario_config(
        &sc,
        FactorizationConfig::Jordan {
            spec: Some(sc.jordan.clone()),
        },
        30,
        5,
    );
    cases.push(run_pipeline(&cfg).unwrap());
    for out in cases {
        let data = assemble_data_matrices(&out.record).unwrap();
        let base = solve_feasibility_sdp(&assemble_sdp(&data, &out.regressor).unwrap(), &opts);
        let k = base.k.expect("feasible");
        for alpha in [0.1, 2.0, 10.0] {
            let scaled = solve_feasibility_sdp(&assemble_sdp(&data.scaled(alpha), &out.regressor).unwrap(), &opts);
            let ks = scaled.k.expect("feasible after scaling");
            let diff = (&ks - &k).amax();
            assert!(diff < 1e-6, "α = {alpha}: max |ΔK| = {diff:e}");
        }
    }
}

#[test]
fn synthesis_is_deterministic() {
    let out = run_pipeline(&paper_example_config(1, FactorizationMethod::Jordan)).unwrap();
    let data = assemble_data_matrices(&out.record).unwrap();
    let prob = assemble_sdp(&data, &out.regressor).unwrap();
    let a = solve_feasibility_sdp(&prob, &SolverOptions::default());
    let b = solve_feasibility_sdp(&prob, &SolverOptions::default());
    assert_eq!(a.status, b.status);
    assert!((a.k.unwrap() - b.k.unwrap()).amax() <= 1e-9);
}

#[test]
fn report_is_reproducible_from_config() {
    let cfg = paper_example_config(7, FactorizationMethod::Krylov);
    let text = cfg.effective_json();
    let first = run_pipeline(&cfg).unwrap();
    let second = run_pipeline(&outreg_core::pipeline::RunConfig::from_json(&text).unwrap()).unwrap();
    let a = serde_json::to_string(&first.report).unwrap();
    let b = serde_json::to_string(&second.report).unwrap();
    assert_eq!(a, b);
    assert_eq!(first.report.config_hash, cfg.hash());
}
