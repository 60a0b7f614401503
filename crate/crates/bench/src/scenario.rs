//! Instance generation, solver runs and the desk-scale grid.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use blws::prox::SvdBackend;
use blws::solvers::{mc_svt, rpca_adm, AdmOptions, GroundTruth, McProblem, RpcaProblem, SolverStats, SvtOptions};
use blws::synth::{gen_mc, gen_rpca};
use log::info;

use crate::config::{Backend, Problem, ScenarioConfig};
use crate::error::{BenchError, Result};
use crate::report::{McRow, ReportRow, RpcaRow};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "BLWS_NNM_THREADS";

#[derive(Debug, Clone)]
pub struct Outcome {
    pub row: ReportRow,
    pub stats: SolverStats,
}

fn svd_backend(cfg: &ScenarioConfig) -> SvdBackend {
    match cfg.backend {
        Backend::Full => SvdBackend::ExactFull,
        Backend::Lanczos => SvdBackend::lanczos(),
        Backend::Blws => SvdBackend::blws().with_steps(cfg.k),
    }
}

/// Generation failures come from parameters the solver cannot accept.
fn as_config(e: blws::Error) -> BenchError {
    BenchError::Config(e.to_string())
}

/// Generates the instance described by `cfg`, solves it and reports the
/// solve (generation time excluded).
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Outcome> {
    cfg.validate()?;
    let backend = svd_backend(cfg);
    info!("running {} m = {} seed = {}", cfg.method(), cfg.m, cfg.seed);
    match cfg.problem {
        Problem::Rpca => {
            let inst = gen_rpca(cfg.m, cfg.rank_frac, cfg.corrupt_frac, cfg.seed).map_err(as_config)?;
            let problem = RpcaProblem::new(inst.d, None)?;
            let defaults = AdmOptions::default();
            let opts = AdmOptions {
                tol: cfg.tol.unwrap_or(defaults.tol),
                max_iter: cfg.max_iter.unwrap_or(defaults.max_iter),
                seed: cfg.seed,
                ..defaults
            };
            let sol = rpca_adm(&problem, backend, &opts, Some(GroundTruth::Dense(inst.a_true.view())))?;
            let st = sol.stats;
            let row = ReportRow::Rpca(RpcaRow {
                m: cfg.m,
                method: cfg.method().into(),
                rel_err: st.rel_err.unwrap_or(f64::NAN),
                rank_hat: st.rank_hat,
                e_l0: st.e_l0.unwrap_or(0),
                iters: st.iterations,
                time_s: st.wall_time,
                matvecs: st.matvecs,
                converged: st.converged,
            });
            Ok(Outcome { row, stats: st })
        }
        Problem::Mc => {
            let inst = gen_mc(cfg.m, cfg.rank, cfg.ratio, cfg.seed).map_err(as_config)?;
            let problem = McProblem::new(cfg.m, cfg.m, &inst.omega, &inst.observed(), None, None)?;
            let defaults = SvtOptions::default();
            let opts = SvtOptions {
                tol: cfg.tol.unwrap_or(defaults.tol),
                max_iter: cfg.max_iter.unwrap_or(defaults.max_iter),
                seed: cfg.seed,
                ..defaults
            };
            let truth = GroundTruth::Factors(inst.left.view(), inst.right.view());
            let sol = mc_svt(&problem, backend, &opts, Some(truth))?;
            let st = sol.stats;
            let row = ReportRow::Mc(McRow {
                m: cfg.m,
                r: cfg.rank,
                s_dr: cfg.ratio,
                s_m2: inst.omega.len() as f64 / (cfg.m * cfg.m) as f64,
                algorithm: cfg.method().into(),
                time_s: st.wall_time,
                iters: st.iterations,
                rel_err: st.rel_err.unwrap_or(f64::NAN),
                matvecs: st.matvecs,
                converged: st.converged,
            });
            Ok(Outcome { row, stats: st })
        }
    }
}

/// Worker count: `requested`, capped by [`THREADS_ENV`] when it is set.
pub fn worker_slots(requested: usize) -> Result<usize> {
    let cap = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| BenchError::Config(format!("{THREADS_ENV} = {v:?} is not a positive integer")))?,
        Err(_) => usize::MAX,
    };
    Ok(requested.max(1).min(cap))
}

/// Runs every scenario on up to `workers` threads; outcomes keep the order
/// of `configs`.
pub fn run_all(configs: &[ScenarioConfig], workers: usize) -> Result<Vec<Outcome>> {
    for cfg in configs {
        cfg.validate()?;
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Outcome>>>> = Mutex::new((0..configs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, configs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cfg) = configs.get(i) else { break };
                let out = run_scenario(cfg);
                results.lock().expect("no worker panicked")[i] = Some(out);
            });
        }
    });
    results.into_inner().expect("no worker panicked").into_iter().map(|r| r.expect("every slot filled")).collect()
}

/// The desk-scale grid: robust PCA at `rpca_sizes` and completion with
/// `r = 10`, `s/d_r = 6` at `mc_sizes`, each with the baseline and the
/// block Lanczos backend.
pub fn repro_grid(rpca_sizes: &[usize], mc_sizes: &[usize], seed: u64, k: usize) -> Vec<ScenarioConfig> {
    let mut grid = Vec::new();
    for &m in rpca_sizes {
        for backend in [Backend::Lanczos, Backend::Blws] {
            grid.push(ScenarioConfig { seed, k, ..ScenarioConfig::rpca(m, backend) });
        }
    }
    for &m in mc_sizes {
        for backend in [Backend::Lanczos, Backend::Blws] {
            grid.push(ScenarioConfig { seed, k, ..ScenarioConfig::mc(m, 10, 6.0, backend) });
        }
    }
    grid
}
