//! ZO-VRGDA: the outer variance-reduced gradient descent ascent driver.
//!
//! Every `epoch_len` iterations the estimator pair is re-anchored with a
//! coordinate-wise snapshot over a large batch (or over every component in
//! the finite-sum mode); in between, the pair carried out of the inner loop
//! is reused. Each iteration descends x with a constant step and then runs
//! the concave maximizer to advance y. The returned iterate is drawn
//! uniformly from all outer iterates.

use ndarray::{Array1, ArrayView1};

use crate::counter::{phase, QueryCounter};
use crate::error::{Error, Result};
use crate::estimators::{coord_grad, Block, SmoothingConfig};
use crate::inner::{maximize_step, InnerState};
use crate::isarah::{
    estimate_grad0_norm_sq, isarah_defaults, isarah_run, IsarahHooks, SnapshotMode,
};
use crate::problems::{
    estimation_error, full_sum_batch, sample_batch, tracking_error, MinimaxProblem, NegatedInner,
    Regime, YConstraint,
};
use crate::rng::{substream, uniform_index};
use crate::trace::{RunHooks, RunTrace, TraceRow};

/// How the epoch snapshot is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotSize {
    Batch(usize),
    FullSum,
}

/// Parameter profile: `Theory` instantiates the published schedule exactly;
/// `Practical` keeps its structure with the large constants divided down and
/// is what experiments and acceptance runs use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Theory,
    Practical,
}

#[derive(Debug, Clone)]
pub struct VrgdaParams {
    /// Initialization accuracy for the inner variable.
    pub zeta: f64,
    /// Constant x step size.
    pub alpha: f64,
    /// Inner ascent step size.
    pub beta: f64,
    /// Snapshot period q.
    pub epoch_len: usize,
    /// Inner loop length m.
    pub inner_len: usize,
    pub snapshot_batch: SnapshotSize,
    pub batch_x: usize,
    pub batch_y: usize,
    /// Outer iteration count T.
    pub outer_len: usize,
    pub smoothing: SmoothingConfig,
}

impl VrgdaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.zeta > 0.0) {
            return Err(Error::invalid("step sizes and zeta must be > 0"));
        }
        if self.epoch_len == 0 || self.outer_len == 0 {
            return Err(Error::invalid("epoch_len and outer_len must be >= 1"));
        }
        if self.batch_x == 0 || self.batch_y == 0 {
            return Err(Error::invalid("batch sizes must be >= 1"));
        }
        if let SnapshotSize::Batch(0) = self.snapshot_batch {
            return Err(Error::invalid("snapshot batch must be >= 1"));
        }
        self.smoothing.validate()
    }

    /// Closed-form query total of a full-length run, excluding
    /// initialization: snapshots charge `2 S1 (d1+d2)` per epoch and each
    /// outer iteration runs `m + 2` recursive updates at
    /// `4 (S2x + S2y)` queries each.
    pub fn query_formula(&self, d1: usize, d2: usize, n: Option<usize>) -> u64 {
        let t = self.outer_len as u64;
        let epochs = (self.outer_len as u64).div_ceil(self.epoch_len as u64);
        let s1 = match self.snapshot_batch {
            SnapshotSize::Batch(s) => s as u64,
            SnapshotSize::FullSum => n.expect("FullSum needs n") as u64,
        };
        let snapshot = epochs * 2 * s1 * (d1 as u64 + d2 as u64);
        let inner = t * 4 * (self.batch_x as u64 + self.batch_y as u64) * (self.inner_len as u64 + 2);
        snapshot + inner
    }
}

fn ceil_at_least_one(x: f64) -> usize {
    if x <= 1.0 {
        1
    } else {
        x.ceil() as usize
    }
}

/// Builds the parameter bundle for target accuracy `eps` from the declared
/// constants and an estimate of the initial optimality gap in the envelope.
///
/// The theory profile follows the published schedule exactly, including the
/// finite-sum variants (full-sum snapshots with `sqrt(n)`-scaled inner
/// batches when `n >= kappa^2`, the small-batch `q = 1` regime otherwise).
/// The practical profile keeps the structural scalings with constants
/// divided down and caps batch sizes at `n` in the finite-sum regime.
#[allow(clippy::too_many_arguments)]
pub fn vrgda_defaults(
    profile: Profile,
    l: f64,
    mu: f64,
    sigma: f64,
    d1: usize,
    d2: usize,
    eps: f64,
    phi_gap_estimate: f64,
    regime: Regime,
) -> Result<VrgdaParams> {
    if !(l > 0.0 && mu > 0.0 && sigma >= 0.0 && eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(
            "need l > 0, mu > 0, sigma >= 0 and eps in (0, 1)",
        ));
    }
    let kappa = l / mu;
    if kappa < 1.0 {
        return Err(Error::PreconditionViolation("condition number below 1".into()));
    }
    let gap = phi_gap_estimate.max(0.0);
    let (df1, df2) = (d1 as f64, d2 as f64);
    let zeta = 1.0 / kappa;

    match profile {
        Profile::Theory => {
            let alpha;
            let q;
            let s1;
            let s2x;
            let s2y;
            let t;
            match regime {
                Regime::FiniteSum(n) if (n as f64) < kappa * kappa => {
                    // Small-component-count finite-sum regime.
                    alpha = 1.0 / (8.0 * (kappa + 1.0) * l);
                    q = 1;
                    s1 = SnapshotSize::FullSum;
                    s2x = 56 * (d1 + 4) + 420;
                    s2y = 56 * (d2 + 4) + 420;
                    t = ceil_at_least_one(
                        (640.0 * (kappa + 1.0) * l * gap / (eps * eps))
                            .max(380.0 * kappa / (eps * eps)),
                    );
                }
                Regime::FiniteSum(n) => {
                    let rn = (n as f64).sqrt();
                    alpha = 1.0 / (24.0 * (kappa + 1.0) * l);
                    q = ceil_at_least_one(2800.0 * kappa * rn / (13.0 * (kappa + 1.0)));
                    s1 = SnapshotSize::FullSum;
                    s2x = ceil_at_least_one(5600.0 * (df1 + 4.0) * kappa * rn);
                    s2y = ceil_at_least_one(5600.0 * (df2 + 4.0) * kappa * rn);
                    t = ceil_at_least_one(
                        (1728.0 * (kappa + 1.0) * l * gap / (eps * eps))
                            .max(810.0 * kappa / (eps * eps)),
                    );
                }
                Regime::Online => {
                    alpha = 1.0 / (24.0 * (kappa + 1.0) * l);
                    q = ceil_at_least_one(2800.0 * kappa / (13.0 * eps * (kappa + 1.0)));
                    s1 = SnapshotSize::Batch(ceil_at_least_one(
                        40320.0 * sigma * sigma * kappa * kappa / (eps * eps),
                    ));
                    s2x = ceil_at_least_one(5600.0 * (df1 + 4.0) * kappa / eps);
                    s2y = ceil_at_least_one(5600.0 * (df2 + 4.0) * kappa / eps);
                    t = ceil_at_least_one(
                        (1728.0 * (kappa + 1.0) * l * gap / (eps * eps))
                            .max(810.0 * kappa / (eps * eps)),
                    );
                }
            }
            Ok(VrgdaParams {
                zeta,
                alpha,
                beta: 2.0 / (13.0 * l),
                epoch_len: q,
                inner_len: ceil_at_least_one(104.0 * kappa - 1.0),
                snapshot_batch: s1,
                batch_x: s2x,
                batch_y: s2y,
                outer_len: t,
                smoothing: SmoothingConfig {
                    delta: eps / (71.0 * kappa * l * (df1 + df2).sqrt()),
                    mu1: eps / (71.0 * kappa.powf(2.5) * l * (df1 + 6.0).powf(1.5)),
                    mu2: eps / (71.0 * kappa.powf(2.5) * l * (df2 + 6.0).powf(1.5)),
                    tau: eps / (71.0 * kappa.powf(2.5) * l * (df1 + df2 + 6.0).powf(1.5)),
                },
            })
        }
        Profile::Practical => {
            let cap = |v: usize| match regime {
                Regime::FiniteSum(n) => v.min(n).max(1),
                Regime::Online => v,
            };
            let s1_raw = ceil_at_least_one(sigma * sigma * kappa * kappa / (eps * eps));
            let snapshot_batch = match regime {
                Regime::FiniteSum(n) if s1_raw >= n => SnapshotSize::FullSum,
                _ => SnapshotSize::Batch(cap(s1_raw)),
            };
            Ok(VrgdaParams {
                zeta,
                alpha: 1.0 / (2.0 * (kappa + 1.0) * l),
                beta: 1.0 / (3.0 * l),
                epoch_len: ceil_at_least_one(1.0 / eps),
                inner_len: ceil_at_least_one(2.0 * kappa),
                snapshot_batch,
                batch_x: cap(ceil_at_least_one((df1 + 4.0) * kappa / eps)),
                batch_y: cap(ceil_at_least_one((df2 + 4.0) * kappa / eps)),
                outer_len: ceil_at_least_one(((kappa + 1.0) * l * gap).max(kappa) / (eps * eps)),
                smoothing: SmoothingConfig {
                    delta: eps / (kappa * l * (df1 + df2).sqrt()),
                    mu1: eps / (kappa.powf(2.5) * l * (df1 + 6.0).powf(1.5)),
                    mu2: eps / (kappa.powf(2.5) * l * (df2 + 6.0).powf(1.5)),
                    tau: eps / (kappa.powf(2.5) * l * (df1 + df2 + 6.0).powf(1.5)),
                },
            })
        }
    }
}

/// Runs ZO-VRGDA from `x0`. All randomness derives from `seed` through the
/// named sub-streams `init`, `snapshot`, `inner` and `output`.
///
/// `y0` seeds the initialization solver (zeros when absent; problems with a
/// simplex constraint get the projected result).
pub fn vrgda_run<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x0: ArrayView1<f64>,
    y0: Option<ArrayView1<f64>>,
    params: &VrgdaParams,
    seed: u64,
    mut hooks: RunHooks<'_>,
) -> Result<RunTrace> {
    params.validate()?;
    let d1 = problem.d1();
    let d2 = problem.d2();
    if x0.len() != d1 {
        return Err(Error::invalid("x0 dimension mismatch"));
    }
    let constants = problem.constants();
    constants.validate()?;
    let mut counter = QueryCounter::new();
    let mut eval_queries = 0u64;

    let mut rng_init = substream(seed, "init");
    let mut rng_snapshot = substream(seed, "snapshot");
    let mut rng_inner = substream(seed, "inner");
    let mut rng_output = substream(seed, "output");

    // Initialization: minimize -f(x0, .) to squared-gradient accuracy zeta.
    let neg = NegatedInner::new(problem, x0);
    let y_guess = match y0 {
        Some(y) => y.to_owned(),
        None => Array1::zeros(d2),
    };
    let grad0 = estimate_grad0_norm_sq(
        &neg,
        y_guess.view(),
        params.smoothing.delta,
        &mut rng_init,
        &mut counter,
    )?
    .max(params.zeta * 1e-12);
    let mut iparams = isarah_defaults(
        constants.lipschitz_l,
        constants.strong_concavity_mu,
        constants.variance_sigma,
        d2,
        params.zeta,
        grad0,
    )?;
    if problem.regime() != Regime::Online {
        iparams = iparams.with_snapshot_mode(SnapshotMode::FullSum);
    }
    let init_counter_before = counter.total();
    let init = {
        let mut init_counter = QueryCounter::new();
        let res = isarah_run(
            &neg,
            y_guess.view(),
            &iparams,
            &mut rng_init,
            &mut init_counter,
            IsarahHooks {
                query_budget: hooks.query_budget.map(|b| b.saturating_sub(counter.total())),
                on_outer: None,
            },
        )?;
        counter.add(phase::INIT, init_counter.total());
        res
    };
    let _ = init_counter_before;
    let mut y = init.w_out;
    if let Some(YConstraint::Simplex) = problem.y_constraint() {
        y = crate::dro::project_simplex(y.view());
    }

    let mut x = x0.to_owned();
    let mut carry: Option<(Array1<f64>, Array1<f64>)> = None;
    let mut rows: Vec<TraceRow> = Vec::new();

    for t in 0..params.outer_len {
        if let Some(budget) = hooks.query_budget {
            if counter.total() >= budget {
                break;
            }
        }

        let (v, u) = if t.is_multiple_of(params.epoch_len) {
            let batch = match params.snapshot_batch {
                SnapshotSize::Batch(s1) => sample_batch(problem, s1, &mut rng_snapshot)?,
                SnapshotSize::FullSum => match problem.regime() {
                    Regime::FiniteSum(n) => full_sum_batch(n),
                    Regime::Online => {
                        return Err(Error::invalid("FullSum snapshots require a finite-sum problem"))
                    }
                },
            };
            let est = coord_grad(
                problem,
                x.view(),
                y.view(),
                &batch,
                params.smoothing.delta,
                Block::Both,
            )?;
            counter.add(phase::SNAPSHOT, est.queries_used);
            (est.v, est.u)
        } else {
            carry.take().ok_or_else(|| {
                Error::Internal("no carried estimators outside a snapshot iteration".into())
            })?
        };

        // Diagnostics describe the iterate pair the step starts from.
        let (phi, grad_phi_norm) = if hooks.should_eval(t) {
            match hooks.phi {
                Some(oracle) => {
                    let p = oracle.eval(x.view());
                    eval_queries += p.queries;
                    (Some(p.phi), p.grad_phi_norm)
                }
                None => (None, None),
            }
        } else {
            (None, None)
        };
        let (delta_t, big_delta_t) = if hooks.should_eval(t) {
            let dt = tracking_error(problem, x.view(), y.view()).ok();
            let bdt = estimation_error(problem, x.view(), y.view(), v.view(), u.view()).ok();
            (dt, bdt)
        } else {
            (None, None)
        };

        let x_next = &x - &(&v * params.alpha);
        let inner = maximize_step(
            &InnerState {
                x_old: x.clone(),
                x_new: x_next.clone(),
                y: y.clone(),
                v: v.clone(),
                u,
                step_beta: params.beta,
                m: params.inner_len,
                batch_x: params.batch_x,
                batch_y: params.batch_y,
            },
            problem,
            &params.smoothing,
            problem.y_constraint(),
            &mut rng_inner,
            &mut counter,
        )?;

        let row = TraceRow {
            iter: t,
            queries: counter.total(),
            x: x.clone(),
            phi,
            grad_phi_norm,
            delta_t,
            big_delta_t,
        };
        if let Some(cb) = hooks.on_row.as_mut() {
            cb(&row);
        }
        rows.push(row);

        y = inner.y_next;
        carry = Some((inner.v_carry, inner.u_carry));
        x = x_next;
    }

    if rows.is_empty() {
        return Err(Error::invalid("query budget exhausted before the first iteration"));
    }
    let output_index = uniform_index(&mut rng_output, rows.len());
    Ok(RunTrace {
        output: rows[output_index].x.clone(),
        output_index,
        rows,
        counter,
        eval_queries,
    })
}
