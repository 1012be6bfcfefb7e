use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use outreg_core::exo_factorization::FactorizationMethod;
use outreg_core::pipeline::{collect as collect_record, paper_example_config, FactorizationConfig};
use outreg_core::{run_pipeline, run_synthesis, Error, RunConfig, RunOutcome};

use crate::{summary, Common, ExampleArgs, Method, Overrides, RunArgs};

pub const OK: i32 = 0;
pub const CHECKS_FAILED: i32 = 1;
pub const ERROR: i32 = 2;

fn report_error(context: Option<&Path>, e: &Error) {
    let mut err = std::io::stderr().lock();
    match context {
        Some(p) => {
            let _ = writeln!(err, "error: {}: {e}", p.display());
        }
        None => {
            let _ = writeln!(err, "error: {e}");
        }
    }
    if let Some(h) = e.hint() {
        let _ = writeln!(err, "hint: {h}");
    }
}

fn apply(mut cfg: RunConfig, o: Overrides) -> RunConfig {
    if let Some(seed) = o.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(m) = o.factorization {
        let method: FactorizationMethod = m.into();
        if cfg.factorization.method() != method {
            cfg.factorization = match m {
                Method::Jordan => FactorizationConfig::Jordan { spec: None },
                Method::Krylov => {
                    let mut w_star = vec![0.0; cfg.exosystem.n_w()];
                    w_star[0] = 1.0;
                    FactorizationConfig::Krylov { w_star }
                }
            };
        }
    }
    cfg
}

fn load(path: &Path, o: Overrides) -> Result<RunConfig, Error> {
    let cfg = apply(RunConfig::load(path)?, o);
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(flag: &Option<PathBuf>, cfg: &RunConfig) -> Option<PathBuf> {
    flag.clone().or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
}

/// Prints the summary, writes artifacts and maps the outcome to an exit code.
fn finish(out: &RunOutcome, dir: Option<PathBuf>, unmask: bool) -> i32 {
    print!("{}", summary::render(&out.report));
    if let Some(dir) = dir {
        if let Err(e) = out.write_artifacts(&dir, unmask) {
            report_error(Some(&dir), &e);
            return ERROR;
        }
        println!("artifacts {}", dir.display());
    }
    if out.report.all_pass {
        OK
    } else {
        CHECKS_FAILED
    }
}

pub fn collect(a: &Common) -> i32 {
    let result = load(&a.config, a.overrides).and_then(|cfg| {
        let (record, _, _) = collect_record(&cfg)?;
        match out_dir(&a.out, &cfg) {
            Some(dir) => {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("effective_config.json"), cfg.effective_json() + "\n")?;
                let f = std::fs::File::create(dir.join("experiment.csv"))?;
                record.write_csv(std::io::BufWriter::new(f), a.unmask)?;
                eprintln!("wrote {}", dir.join("experiment.csv").display());
            }
            None => record.write_csv(std::io::stdout().lock(), a.unmask)?,
        }
        Ok(())
    });
    match result {
        Ok(()) => OK,
        Err(e) => {
            report_error(Some(&a.config), &e);
            ERROR
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Synthesize,
    Verify,
    Run,
}

fn single(a: &Common, mode: Mode) -> i32 {
    let cfg = match load(&a.config, a.overrides) {
        Ok(c) => c,
        Err(e) => {
            report_error(Some(&a.config), &e);
            return ERROR;
        }
    };
    if mode == Mode::Verify && cfg.plant.is_none() {
        let e = Error::Config("verify needs plant matrices; use `synthesize` for measured data".into());
        report_error(Some(&a.config), &e);
        return ERROR;
    }
    let result = match mode {
        Mode::Synthesize => run_synthesis(&cfg),
        Mode::Verify | Mode::Run => run_pipeline(&cfg),
    };
    match result {
        Ok(out) => finish(&out, out_dir(&a.out, &cfg), a.unmask),
        Err(e) => {
            report_error(Some(&a.config), &e);
            ERROR
        }
    }
}

pub fn synthesize(a: &Common) -> i32 {
    single(a, Mode::Synthesize)
}

pub fn verify(a: &Common) -> i32 {
    single(a, Mode::Verify)
}

pub fn run(a: &RunArgs) -> i32 {
    match &a.config {
        Some(config) => {
            let common = Common {
                config: config.clone(),
                overrides: a.overrides,
                unmask: a.unmask,
                out: a.out.clone(),
            };
            single(&common, Mode::Run)
        }
        None => sweep(a),
    }
}

/// Distinct directory names from config file stems.
fn sweep_dirs(paths: &[PathBuf]) -> Vec<String> {
    let mut seen = HashSet::new();
    paths
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let stem = p
                .file_stem()
                .map_or("config".into(), |s| s.to_string_lossy().into_owned());
            if seen.insert(stem.clone()) {
                stem
            } else {
                format!("{stem}-{i}")
            }
        })
        .collect()
}

enum SweepResult {
    Done(Box<RunOutcome>),
    Failed(Error),
}

fn sweep(a: &RunArgs) -> i32 {
    let paths = &a.sweep;
    let names = sweep_dirs(paths);
    let jobs = a
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, paths.len());

    // Worker j takes configs j, j + jobs, ...; results come back through the
    // join handles.
    let mut results: Vec<Option<SweepResult>> = (0..paths.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|j| {
                let overrides = a.overrides;
                scope.spawn(move || {
                    (j..paths.len())
                        .step_by(jobs)
                        .map(|i| {
                            let r = load(&paths[i], overrides).and_then(|cfg| run_pipeline(&cfg));
                            let r = match r {
                                Ok(out) => SweepResult::Done(Box::new(out)),
                                Err(e) => SweepResult::Failed(e),
                            };
                            (i, r)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("sweep worker panicked") {
                results[i] = Some(r);
            }
        }
    });

    let mut worst = OK;
    for ((path, name), r) in paths.iter().zip(&names).zip(results) {
        match r.expect("every config is assigned") {
            SweepResult::Done(out) => {
                let dir = a
                    .out
                    .as_ref()
                    .map(|d| d.join(name))
                    .or_else(|| out_dir(&None, &out.config));
                println!("== {}", path.display());
                let code = finish(&out, dir, a.unmask);
                worst = worst.max(code);
            }
            SweepResult::Failed(e) => {
                println!("== {}", path.display());
                report_error(Some(path), &e);
                worst = ERROR;
            }
        }
    }
    let failed = worst != OK;
    println!(
        "sweep     {} configs, {}",
        paths.len(),
        if failed { "some failed" } else { "all pass" }
    );
    worst
}

pub fn paper_example(a: &ExampleArgs) -> i32 {
    let mut cfg = paper_example_config(a.seed, a.factorization.into());
    if a.zero_w0 {
        cfg.closed_loop.w0 = Some(vec![0.0; cfg.exosystem.n_w()]);
    }
    if a.emit_config {
        println!("{}", cfg.effective_json());
        return OK;
    }
    let out = match run_pipeline(&cfg) {
        Ok(o) => o,
        Err(e) => {
            report_error(None, &e);
            return ERROR;
        }
    };
    let code = finish(&out, a.out.clone(), a.unmask);
    let r = &out.report;
    let tail = r.regulation.as_ref().map(|g| g.tail_max_y);
    let bundle = [
        ("feasible", r.synthesis.is_feasible()),
        ("rho < 1", r.spectral_radius.is_some_and(|x| x < 1.0)),
        ("tail |y| < 1e-4", tail.is_some_and(|x| x < 1e-4)),
    ];
    for (name, ok) in bundle {
        println!("bundle    {} {name}", if ok { "PASS" } else { "FAIL" });
    }
    if bundle.iter().all(|b| b.1) {
        code
    } else {
        CHECKS_FAILED
    }
}
