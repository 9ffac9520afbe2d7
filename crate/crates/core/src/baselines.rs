//! Reference zeroth-order baselines for query-complexity comparisons.
//!
//! The cited descriptions leave the pseudocode to their sources, so these
//! are reconstructions: ZO-SGDA is two-timescale simultaneous stochastic
//! gradient descent ascent (fast y step `eta`, slow x step `eta / kappa^3`);
//! ZO-SGDMSA performs several ascent steps on y per outer step, then one x
//! descent step, all at step `eta`. Both use the Gaussian forward-difference
//! estimators and honor the problem's simplex constraint when present.

use ndarray::{Array1, ArrayView1};

use crate::counter::{phase, QueryCounter};
use crate::error::{Error, Result};
use crate::estimators::SmoothingConfig;
use crate::estimators::{gauss_grad_x, gauss_grad_y};
use crate::problems::{
    estimation_error, sample_batch, tracking_error, MinimaxProblem, YConstraint,
};
use crate::rng::{gaussian_directions, substream, uniform_index};
use crate::trace::{RunHooks, RunTrace, TraceRow};

#[derive(Debug, Clone)]
pub struct BaselineParams {
    /// Fast-timescale step size.
    pub eta: f64,
    /// Two-timescale ratio; the x step of ZO-SGDA is `eta / kappa_pow3`.
    pub kappa_pow3: f64,
    pub batch_x: usize,
    pub batch_y: usize,
    pub smoothing: SmoothingConfig,
    pub outer_len: usize,
    /// Ascent steps per outer iteration of ZO-SGDMSA.
    pub msa_inner_len: usize,
}

impl BaselineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::invalid("eta must be finite and >= 0"));
        }
        if !(self.kappa_pow3 > 0.0 && !self.kappa_pow3.is_nan()) {
            return Err(Error::invalid("kappa_pow3 must be > 0"));
        }
        if self.batch_x == 0 || self.batch_y == 0 {
            return Err(Error::invalid("batch sizes must be >= 1"));
        }
        if self.outer_len == 0 || self.msa_inner_len == 0 {
            return Err(Error::invalid("loop lengths must be >= 1"));
        }
        self.smoothing.validate()
    }

    /// Experiment-style configuration: minibatches `C d / eps^2` per block,
    /// `eta = 0.01`, slow step `eta / 10`, ten ascent steps for the
    /// multi-step variant.
    pub fn experiment_defaults(d1: usize, d2: usize, eps: f64, smoothing: SmoothingConfig) -> Self {
        let c = 0.1;
        let b = |d: usize| ((c * d as f64 / (eps * eps)).ceil() as usize).max(1);
        Self {
            eta: 0.01,
            kappa_pow3: 10.0,
            batch_x: b(d1),
            batch_y: b(d2),
            smoothing,
            outer_len: usize::MAX / 2,
            msa_inner_len: 10,
        }
    }

    /// Queries per ZO-SGDA iteration.
    pub fn sgda_queries_per_iter(&self) -> u64 {
        2 * (self.batch_x as u64 + self.batch_y as u64)
    }

    /// Queries per ZO-SGDMSA outer iteration.
    pub fn sgdmsa_queries_per_iter(&self) -> u64 {
        2 * (self.batch_x as u64 + self.msa_inner_len as u64 * self.batch_y as u64)
    }
}

struct LoopCtx<'a, 'h, P: ?Sized> {
    problem: &'a P,
    hooks: RunHooks<'h>,
    counter: QueryCounter,
    eval_queries: u64,
    rows: Vec<TraceRow>,
}

impl<'a, 'h, P: MinimaxProblem + ?Sized> LoopCtx<'a, 'h, P> {
    fn over_budget(&self) -> bool {
        self.hooks
            .query_budget
            .map(|b| self.counter.total() >= b)
            .unwrap_or(false)
    }

    fn record(
        &mut self,
        t: usize,
        x: &Array1<f64>,
        y: &Array1<f64>,
        v: &Array1<f64>,
        u: &Array1<f64>,
    ) {
        let (phi, grad_phi_norm) = if self.hooks.should_eval(t) {
            match self.hooks.phi {
                Some(oracle) => {
                    let p = oracle.eval(x.view());
                    self.eval_queries += p.queries;
                    (Some(p.phi), p.grad_phi_norm)
                }
                None => (None, None),
            }
        } else {
            (None, None)
        };
        let (delta_t, big_delta_t) = if self.hooks.should_eval(t) {
            (
                tracking_error(self.problem, x.view(), y.view()).ok(),
                estimation_error(self.problem, x.view(), y.view(), v.view(), u.view()).ok(),
            )
        } else {
            (None, None)
        };
        let row = TraceRow {
            iter: t,
            queries: self.counter.total(),
            x: x.clone(),
            phi,
            grad_phi_norm,
            delta_t,
            big_delta_t,
        };
        if let Some(cb) = self.hooks.on_row.as_mut() {
            cb(&row);
        }
        self.rows.push(row);
    }

    fn finish(self, rng_output: &mut crate::rng::Stream) -> Result<RunTrace> {
        if self.rows.is_empty() {
            return Err(Error::invalid("query budget exhausted before the first iteration"));
        }
        let output_index = uniform_index(rng_output, self.rows.len());
        Ok(RunTrace {
            output: self.rows[output_index].x.clone(),
            output_index,
            rows: self.rows,
            counter: self.counter,
            eval_queries: self.eval_queries,
        })
    }
}

fn project_if_needed<P: MinimaxProblem + ?Sized>(problem: &P, y: &mut Array1<f64>) {
    if let Some(YConstraint::Simplex) = problem.y_constraint() {
        *y = crate::dro::project_simplex(y.view());
    }
}

/// Two-timescale simultaneous descent ascent: per iteration one x-block and
/// one y-block Gaussian estimate, then `x -= (eta/kappa^3) v` and
/// `y += eta u` (projected).
pub fn zo_sgda_run<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x0: ArrayView1<f64>,
    y0: ArrayView1<f64>,
    params: &BaselineParams,
    seed: u64,
    hooks: RunHooks<'_>,
) -> Result<RunTrace> {
    params.validate()?;
    let mut rng = substream(seed, "sgda");
    let mut rng_output = substream(seed, "output");
    let mut x = x0.to_owned();
    let mut y = y0.to_owned();
    project_if_needed(problem, &mut y);
    let eta_x = params.eta / params.kappa_pow3;

    let mut ctx = LoopCtx {
        problem,
        hooks,
        counter: QueryCounter::new(),
        eval_queries: 0,
        rows: Vec::new(),
    };
    for t in 0..params.outer_len {
        if ctx.over_budget() {
            break;
        }
        let batch_x = sample_batch(problem, params.batch_x, &mut rng)?;
        let dirs_x = gaussian_directions(&mut rng, params.batch_x, problem.d1());
        let (v, qx) = gauss_grad_x(
            problem,
            x.view(),
            y.view(),
            &batch_x,
            &dirs_x,
            params.smoothing.mu1,
        )?;
        ctx.counter.add(phase::GRAD_X, qx);
        let batch_y = sample_batch(problem, params.batch_y, &mut rng)?;
        let dirs_y = gaussian_directions(&mut rng, params.batch_y, problem.d2());
        let (u, qy) = gauss_grad_y(
            problem,
            x.view(),
            y.view(),
            &batch_y,
            &dirs_y,
            params.smoothing.mu2,
        )?;
        ctx.counter.add(phase::GRAD_Y, qy);

        ctx.record(t, &x, &y, &v, &u);
        x -= &(&v * eta_x);
        y += &(&u * params.eta);
        project_if_needed(problem, &mut y);
    }
    ctx.finish(&mut rng_output)
}

/// Multi-step ascent: per outer iteration, `msa_inner_len` projected ascent
/// steps on y, then one descent step on x, all at step `eta`.
pub fn zo_sgdmsa_run<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x0: ArrayView1<f64>,
    y0: ArrayView1<f64>,
    params: &BaselineParams,
    seed: u64,
    hooks: RunHooks<'_>,
) -> Result<RunTrace> {
    params.validate()?;
    let mut rng = substream(seed, "sgdmsa");
    let mut rng_output = substream(seed, "output");
    let mut x = x0.to_owned();
    let mut y = y0.to_owned();
    project_if_needed(problem, &mut y);

    let mut ctx = LoopCtx {
        problem,
        hooks,
        counter: QueryCounter::new(),
        eval_queries: 0,
        rows: Vec::new(),
    };
    for t in 0..params.outer_len {
        if ctx.over_budget() {
            break;
        }
        let mut u = Array1::zeros(problem.d2());
        for _ in 0..params.msa_inner_len {
            let batch_y = sample_batch(problem, params.batch_y, &mut rng)?;
            let dirs_y = gaussian_directions(&mut rng, params.batch_y, problem.d2());
            let (uk, qy) = gauss_grad_y(
                problem,
                x.view(),
                y.view(),
                &batch_y,
                &dirs_y,
                params.smoothing.mu2,
            )?;
            ctx.counter.add(phase::GRAD_Y, qy);
            y += &(&uk * params.eta);
            project_if_needed(problem, &mut y);
            u = uk;
        }
        let batch_x = sample_batch(problem, params.batch_x, &mut rng)?;
        let dirs_x = gaussian_directions(&mut rng, params.batch_x, problem.d1());
        let (v, qx) = gauss_grad_x(
            problem,
            x.view(),
            y.view(),
            &batch_x,
            &dirs_x,
            params.smoothing.mu1,
        )?;
        ctx.counter.add(phase::GRAD_X, qx);

        ctx.record(t, &x, &y, &v, &u);
        x -= &(&v * params.eta);
    }
    ctx.finish(&mut rng_output)
}
