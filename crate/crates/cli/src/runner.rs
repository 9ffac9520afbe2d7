//! Builds the configured problem, runs the chosen algorithm, and streams the
//! trace to CSV.
//!
//! CSV schema: `iter,queries,phi,grad_phi_norm,delta_t,Delta_t`, UTF-8, LF
//! line endings, `.` decimal separator, empty fields for absent diagnostics.
//! Rows are appended as they complete and flushed at every evaluation point,
//! so the file is valid even after abnormal termination. When loss
//! evaluation itself consumes oracle queries (the DRO inner solve), those
//! are reported in a `<out>.eval_queries` side file and excluded from the
//! algorithmic `queries` column.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, ArrayView1};
use zo_minimax::baselines::{zo_sgda_run, zo_sgdmsa_run, BaselineParams};
use zo_minimax::dro::{parse_libsvm, subsample_unbalanced_with, DroInstance};
use zo_minimax::isarah::{isarah_defaults, isarah_run, IsarahHooks, SnapshotMode};
use zo_minimax::problems::{MinimaxProblem, NegatedInner, Regime};
use zo_minimax::quadratic::QuadraticSaddle;
use zo_minimax::rng::{gaussian_vector, substream};
use zo_minimax::trace::{PhiOracle, PhiPoint, RunHooks, RunTrace, TraceRow};
use zo_minimax::vrgda::{vrgda_defaults, vrgda_run, Profile};
use zo_minimax::{Error as CoreError, QueryCounter};

use crate::config::{Algo, ExperimentConfig, ProblemConfig, ProfileKind};

pub const CSV_HEADER: &str = "iter,queries,phi,grad_phi_norm,delta_t,Delta_t";

pub enum RunError {
    Config(String),
    Oracle(String),
    Io(std::io::Error),
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::OracleFailure { .. } => RunError::Oracle(e.to_string()),
            CoreError::Io(io) => RunError::Io(io),
            other => RunError::Config(other.to_string()),
        }
    }
}

#[allow(clippy::large_enum_variant)]
enum Problem {
    Quadratic(QuadraticSaddle),
    Dro(DroInstance),
}

impl Problem {
    fn as_minimax(&self) -> &dyn MinimaxProblem {
        match self {
            Problem::Quadratic(q) => q,
            Problem::Dro(d) => d,
        }
    }
}

fn build_problem(cfg: &ExperimentConfig) -> Result<(Problem, Array1<f64>), RunError> {
    match &cfg.problem {
        ProblemConfig::Quadratic {
            d1,
            d2,
            kappa,
            l,
            sigma,
            finite_sum,
            x0_scale,
        } => {
            let regime = match finite_sum {
                Some(n) => Regime::FiniteSum(*n),
                None => Regime::Online,
            };
            let mut rng = substream(cfg.seed, "instance");
            let q = QuadraticSaddle::generate(*d1, *d2, *kappa, *l, *sigma, regime, &mut rng)?;
            let x0 = gaussian_vector(&mut substream(cfg.seed, "x0"), *d1) * *x0_scale;
            Ok((Problem::Quadratic(q), x0))
        }
        ProblemConfig::Dro {
            dataset,
            minority_count,
            majority_ratio,
            minority_positive,
            reg_weight,
            declared_l,
            declared_sigma,
            x0_scale,
        } => {
            let file = File::open(dataset).map_err(|e| {
                RunError::Config(format!("cannot open dataset {}: {e}", dataset.display()))
            })?;
            let mut ds = parse_libsvm(std::io::BufReader::new(file))?;
            if let Some(mc) = minority_count {
                let mut rng = substream(cfg.seed, "subsample");
                ds = subsample_unbalanced_with(&ds, *mc, *majority_ratio, *minority_positive, &mut rng)?;
            }
            let mut inst = DroInstance::new(ds, *reg_weight)?;
            if let Some(l) = declared_l {
                inst = inst.with_constants(*l, *declared_sigma);
            }
            let d = inst.dim();
            let x0 = gaussian_vector(&mut substream(cfg.seed, "x0"), d) * *x0_scale;
            Ok((Problem::Dro(inst), x0))
        }
    }
}

struct CsvSink {
    writer: BufWriter<File>,
    eval_writer: Option<BufWriter<File>>,
    eval_queries_per_point: u64,
    eval_total: u64,
    rows: usize,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl CsvSink {
    fn create(path: &Path, eval_queries_per_point: u64) -> Result<Self, RunError> {
        let mut writer = BufWriter::new(File::create(path)?);
        writeln!(writer, "{CSV_HEADER}")?;
        writer.flush()?;
        let eval_writer = if eval_queries_per_point > 0 {
            let mut p = path.as_os_str().to_owned();
            p.push(".eval_queries");
            let mut w = BufWriter::new(File::create(PathBuf::from(p))?);
            writeln!(w, "iter,eval_queries")?;
            w.flush()?;
            Some(w)
        } else {
            None
        };
        Ok(Self {
            writer,
            eval_writer,
            eval_queries_per_point,
            eval_total: 0,
            rows: 0,
        })
    }

    fn write_row(&mut self, row: &TraceRow) {
        self.rows += 1;
        let _ = writeln!(
            self.writer,
            "{},{},{},{},{},{}",
            row.iter,
            row.queries,
            fmt_opt(row.phi),
            fmt_opt(row.grad_phi_norm),
            fmt_opt(row.delta_t),
            fmt_opt(row.big_delta_t),
        );
        if row.phi.is_some() || row.delta_t.is_some() {
            let _ = self.writer.flush();
            if row.phi.is_some() {
                self.eval_total += self.eval_queries_per_point;
                if let Some(w) = self.eval_writer.as_mut() {
                    let _ = writeln!(w, "{},{}", row.iter, self.eval_total);
                    let _ = w.flush();
                }
            }
        }
    }

    fn finish(mut self) -> Result<usize, RunError> {
        self.writer.flush()?;
        if let Some(mut w) = self.eval_writer.take() {
            w.flush()?;
        }
        Ok(self.rows)
    }
}

struct QuadraticPhi<'a> {
    q: &'a QuadraticSaddle,
}

impl PhiOracle for QuadraticPhi<'_> {
    fn eval(&self, x: ArrayView1<f64>) -> PhiPoint {
        let (phi, grad) = self.q.phi_and_grad(x);
        PhiPoint {
            phi,
            grad_phi_norm: Some(grad.dot(&grad).sqrt()),
            queries: 0,
        }
    }
}

struct DroPhi<'a> {
    inst: &'a DroInstance,
}

impl PhiOracle for DroPhi<'_> {
    fn eval(&self, x: ArrayView1<f64>) -> PhiPoint {
        match self.inst.envelope_report(x) {
            Ok((phi, gnorm, queries)) => PhiPoint {
                phi,
                grad_phi_norm: Some(gnorm),
                queries,
            },
            Err(_) => PhiPoint {
                phi: f64::NAN,
                grad_phi_norm: None,
                queries: 0,
            },
        }
    }
}

pub struct RunSummary {
    pub rows: usize,
    pub total_queries: u64,
    pub eval_queries: u64,
    pub output_index: Option<usize>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary, RunError> {
    let (problem, x0) = build_problem(cfg)?;
    let eval_cost = match (&problem, cfg.algo) {
        // the standalone initializer reports from losses cached at x0
        (Problem::Dro(_), Algo::ZoIsarah) => 0,
        (Problem::Dro(inst), _) => inst.n() as u64,
        (Problem::Quadratic(_), _) => 0,
    };
    let mut sink = CsvSink::create(&cfg.out, eval_cost)?;

    let result: Result<RunTrace, RunError> = {
        let phi_oracle: Box<dyn PhiOracle> = match &problem {
            Problem::Quadratic(q) => Box::new(QuadraticPhi { q }),
            Problem::Dro(inst) => Box::new(DroPhi { inst }),
        };
        let p = problem.as_minimax();
        let constants = p.constants();
        let d1 = p.d1();
        let d2 = p.d2();
        let y_uniform = Array1::from_elem(d2, 1.0 / d2 as f64);
        let y0 = p.y_constraint().map(|_| y_uniform.view());

        match cfg.algo {
            Algo::ZoVrgda => {
                let gap = match cfg.phi_gap {
                    Some(g) => g,
                    None => estimate_gap(&problem, x0.view()),
                };
                let profile = match cfg.profile {
                    ProfileKind::Theory => Profile::Theory,
                    ProfileKind::Practical => Profile::Practical,
                };
                let params = vrgda_defaults(
                    profile,
                    constants.lipschitz_l,
                    constants.strong_concavity_mu,
                    constants.variance_sigma,
                    d1,
                    d2,
                    cfg.eps,
                    gap,
                    p.regime(),
                )?;
                let mut on_row = |row: &TraceRow| sink.write_row(row);
                let hooks = RunHooks {
                    eval_every: cfg.eval_every,
                    phi: Some(phi_oracle.as_ref()),
                    query_budget: Some(cfg.query_budget),
                    on_row: Some(&mut on_row),
                };
                vrgda_run(p, x0.view(), y0, &params, cfg.seed, hooks).map_err(Into::into)
            }
            Algo::ZoSgda | Algo::ZoSgdmsa => {
                let kappa = constants.condition_number();
                let smoothing = zo_minimax::SmoothingConfig {
                    mu1: cfg.eps / (kappa.powf(2.5) * constants.lipschitz_l * (d1 as f64 + 6.0).powf(1.5)),
                    mu2: cfg.eps / (kappa.powf(2.5) * constants.lipschitz_l * (d2 as f64 + 6.0).powf(1.5)),
                    tau: cfg.eps / (kappa.powf(2.5) * constants.lipschitz_l * ((d1 + d2) as f64 + 6.0).powf(1.5)),
                    delta: cfg.eps / (kappa * constants.lipschitz_l * ((d1 + d2) as f64).sqrt()),
                };
                let mut params = BaselineParams::experiment_defaults(d1, d2, cfg.eps, smoothing);
                params.eta = cfg.eta;
                params.kappa_pow3 = cfg.kappa_pow3;
                params.msa_inner_len = cfg.msa_inner;
                let b = |d: usize| ((cfg.batch_c * d as f64 / (cfg.eps * cfg.eps)).ceil() as usize).max(1);
                params.batch_x = b(d1);
                params.batch_y = b(d2);
                let mut on_row = |row: &TraceRow| sink.write_row(row);
                let hooks = RunHooks {
                    eval_every: cfg.eval_every,
                    phi: Some(phi_oracle.as_ref()),
                    query_budget: Some(cfg.query_budget),
                    on_row: Some(&mut on_row),
                };
                let y_start: Array1<f64> = match y0 {
                    Some(y) => y.to_owned(),
                    None => Array1::zeros(d2),
                };
                let run = match cfg.algo {
                    Algo::ZoSgda => {
                        zo_sgda_run(p, x0.view(), y_start.view(), &params, cfg.seed, hooks)
                    }
                    _ => zo_sgdmsa_run(p, x0.view(), y_start.view(), &params, cfg.seed, hooks),
                };
                run.map_err(Into::into)
            }
            Algo::ZoIsarah => {
                return run_isarah(cfg, &problem, x0, sink);
            }
        }
    };

    match result {
        Ok(trace) => {
            let rows = sink.finish()?;
            Ok(RunSummary {
                rows,
                total_queries: trace.counter.total(),
                eval_queries: trace.eval_queries,
                output_index: Some(trace.output_index),
            })
        }
        Err(e) => {
            let _ = sink.finish();
            Err(e)
        }
    }
}

fn estimate_gap(problem: &Problem, x0: ArrayView1<f64>) -> f64 {
    match problem {
        Problem::Quadratic(q) => {
            let (phi0, _) = q.phi_and_grad(x0);
            match q.phi_minimum() {
                Some((_, phi_min)) => (phi0 - phi_min).max(1e-6),
                None => 1.0,
            }
        }
        Problem::Dro(inst) => {
            // Losses are nonnegative, so phi* >= 0 and phi(x0) bounds the gap.
            inst.envelope_report(x0)
                .map(|(phi, _, _)| phi.max(1e-6))
                .unwrap_or(1.0)
        }
    }
}

/// Standalone ZO-iSARAH on the initialization subproblem: minimize
/// `-f(x0, .)` over the inner variable to squared-gradient accuracy `eps`.
fn run_isarah(
    cfg: &ExperimentConfig,
    problem: &Problem,
    x0: Array1<f64>,
    mut sink: CsvSink,
) -> Result<RunSummary, RunError> {
    let p = problem.as_minimax();
    let constants = p.constants();
    let d2 = p.d2();
    let w0 = match p.y_constraint() {
        Some(_) => Array1::from_elem(d2, 1.0 / d2 as f64),
        None => Array1::zeros(d2),
    };
    let neg = NegatedInner::new(p, x0.view());
    let mut counter = QueryCounter::new();
    let mut rng = substream(cfg.seed, "init");
    let probe_delta = cfg.eps.sqrt() / (constants.lipschitz_l * (d2 as f64).sqrt());
    let grad0 = zo_minimax::isarah::estimate_grad0_norm_sq(
        &neg,
        w0.view(),
        probe_delta,
        &mut rng,
        &mut counter,
    )?
    .max(cfg.eps * 1e-12);
    let mut params = isarah_defaults(
        constants.lipschitz_l,
        constants.strong_concavity_mu,
        constants.variance_sigma,
        d2,
        cfg.eps,
        grad0,
    )?;
    if p.regime() != Regime::Online {
        params = params.with_snapshot_mode(SnapshotMode::FullSum);
    }

    // The objective value and exact gradient of the negated inner problem
    // are reportable in closed form for both problem kinds.
    type Report<'a> = Box<dyn Fn(ArrayView1<f64>) -> (f64, Option<f64>) + 'a>;
    let report: Report = match problem {
        Problem::Quadratic(q) => Box::new(move |w: ArrayView1<f64>| {
            let value = -q.mean_value(x0.view(), w);
            let grad = q
                .true_grad(x0.view(), w)
                .map(|(_, gy)| gy.dot(&gy).sqrt());
            (value, grad)
        }),
        Problem::Dro(inst) => {
            let losses = inst.losses(x0.view());
            let inst_ref = inst;
            Box::new(move |w: ArrayView1<f64>| {
                let mut value = inst_ref.r(w);
                for i in 0..w.len() {
                    value -= w[i] * losses[i];
                }
                let c = 1.0 / w.len() as f64;
                let g: f64 = (0..w.len())
                    .map(|i| {
                        let gi = losses[i] - 2.0 * inst_ref.reg_weight() * (w[i] - c);
                        gi * gi
                    })
                    .sum();
                (value, Some(g.sqrt()))
            })
        }
    };
    let eval_cost = match problem {
        Problem::Quadratic(_) => 0u64,
        // losses at the frozen x0 are computed once up front
        Problem::Dro(inst) => inst.n() as u64,
    };
    {
        let mut on_outer = |t: usize, w: ArrayView1<f64>, _snap: Option<f64>, queries: u64| {
            let (value, grad) = report(w);
            let row = TraceRow {
                iter: t,
                queries,
                x: w.to_owned(),
                phi: Some(value),
                grad_phi_norm: grad,
                delta_t: None,
                big_delta_t: None,
            };
            sink.write_row(&row);
        };
        isarah_run(
            &neg,
            w0.view(),
            &params,
            &mut rng,
            &mut counter,
            IsarahHooks {
                query_budget: Some(cfg.query_budget),
                on_outer: Some(&mut on_outer),
            },
        )?;
    }
    let total = counter.total();
    let written = sink.finish()?;
    Ok(RunSummary {
        rows: written,
        total_queries: total,
        eval_queries: if eval_cost > 0 { eval_cost } else { 0 },
        output_index: None,
    })
}
