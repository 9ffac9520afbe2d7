//! ZO-iSARAH: zeroth-order recursive variance-reduced minimization for
//! strongly convex objectives.
//!
//! Each outer loop anchors the gradient estimate with a coordinate-wise
//! snapshot (over a large sample batch online, or over every component in
//! the finite-sum variant), then performs recursive difference updates with
//! the joint Gaussian estimator and a constant step, and finally picks the
//! next anchor point uniformly from the iterates of the loop.
//!
//! The solver doubles as the initializer of the minimax driver, where it
//! minimizes the negated inner function.

use ndarray::{Array1, ArrayView1};

use crate::counter::{phase, QueryCounter};
use crate::error::{Error, Result};
use crate::estimators::{coord_grad_objective, gauss_grad_joint};
use crate::problems::{full_sum_batch, sample_batch_objective, Regime, StochasticObjective};
use crate::rng::{gaussian_directions, uniform_index, Stream};

/// How the per-epoch anchor gradient is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotMode {
    /// Coordinate differences averaged over a sampled batch.
    LargeBatch,
    /// Coordinate differences averaged over every component (finite sum).
    FullSum,
}

/// Hyperparameters of one ZO-iSARAH run.
#[derive(Debug, Clone)]
pub struct IsarahParams {
    /// Step size.
    pub gamma: f64,
    /// Inner-loop length; each outer loop visits `inner_len + 1` iterates.
    pub inner_len: usize,
    /// Number of outer loops.
    pub outer_len: usize,
    /// Snapshot batch size (ignored in `FullSum` mode).
    pub snapshot_batch: usize,
    /// Samples and directions per recursive inner step.
    pub inner_batch: usize,
    /// Gaussian radius of the joint estimator.
    pub tau: f64,
    /// Coordinate central-difference step.
    pub delta: f64,
    pub snapshot_mode: SnapshotMode,
}

impl IsarahParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma must be > 0"));
        }
        if self.inner_len == 0 || self.outer_len == 0 {
            return Err(Error::invalid("loop lengths must be >= 1"));
        }
        if self.snapshot_batch == 0 || self.inner_batch == 0 {
            return Err(Error::invalid("batch sizes must be >= 1"));
        }
        if !(self.tau > 0.0 && self.delta > 0.0) {
            return Err(Error::invalid("smoothing radii must be > 0"));
        }
        Ok(())
    }

    pub fn with_snapshot_mode(mut self, mode: SnapshotMode) -> Self {
        self.snapshot_mode = mode;
        self
    }

    /// Closed-form query total of a full run, matching the exact counter.
    pub fn query_formula(&self, dim: usize, n: Option<usize>) -> u64 {
        let snapshot = match self.snapshot_mode {
            SnapshotMode::LargeBatch => 2 * dim as u64 * self.snapshot_batch as u64,
            SnapshotMode::FullSum => 2 * dim as u64 * n.expect("FullSum needs n") as u64,
        };
        let inner = 4 * self.inner_batch as u64 * (self.inner_len as u64 - 1);
        self.outer_len as u64 * (snapshot + inner)
    }
}

/// Schedule achieving squared-gradient accuracy `eps` on an `l`-smooth,
/// `mu`-strongly-convex objective of dimension `d` with component-gradient
/// variance `sigma^2`, starting from squared gradient norm `grad0_norm_sq`:
/// step `2/(9l)`, inner length `ceil(36 kappa) - 1`, snapshot batch
/// `ceil(25 sigma^2 / eps)`, inner batch `d`,
/// `ceil(log2(5 grad0 / eps))` outer loops,
/// `delta = 2 sqrt(eps) / (5 l sqrt(d))`, and
/// `tau = min(sqrt(eps) / (3 l (d+3)^1.5), sqrt(2 eps / (5 l mu d)))`.
pub fn isarah_defaults(
    l: f64,
    mu: f64,
    sigma: f64,
    d: usize,
    eps: f64,
    grad0_norm_sq: f64,
) -> Result<IsarahParams> {
    if !(l > 0.0 && mu > 0.0 && eps > 0.0 && grad0_norm_sq > 0.0 && sigma >= 0.0) {
        return Err(Error::invalid(
            "isarah_defaults requires positive l, mu, eps, grad0_norm_sq and sigma >= 0",
        ));
    }
    let kappa = l / mu;
    let outer_len = if eps >= grad0_norm_sq {
        log::warn!(
            "requested accuracy {eps} is not below the initial squared gradient norm \
             {grad0_norm_sq}; clamping to a single outer loop"
        );
        1
    } else {
        ((5.0 * grad0_norm_sq / eps).log2().ceil() as usize).max(1)
    };
    let df = d as f64;
    Ok(IsarahParams {
        gamma: 2.0 / (9.0 * l),
        inner_len: (((36.0 * kappa).ceil() as usize).saturating_sub(1)).max(1),
        outer_len,
        snapshot_batch: ((25.0 * sigma * sigma / eps).ceil() as usize).max(1),
        inner_batch: d,
        tau: (eps.sqrt() / (3.0 * l * (df + 3.0).powf(1.5)))
            .min((2.0 * eps / (5.0 * l * mu * df)).sqrt()),
        delta: 2.0 * eps.sqrt() / (5.0 * l * df.sqrt()),
        snapshot_mode: SnapshotMode::LargeBatch,
    })
}

/// One row of the per-outer-loop trace.
#[derive(Debug, Clone)]
pub struct IsarahTraceRow {
    pub outer_iter: usize,
    /// Squared norm of the snapshot estimate at the loop's anchor, when one
    /// was computed.
    pub snapshot_grad_norm_sq: Option<f64>,
    /// Cumulative queries after the loop finished.
    pub queries: u64,
}

#[derive(Debug, Clone)]
pub struct IsarahResult {
    pub w_out: Array1<f64>,
    pub trace: Vec<IsarahTraceRow>,
}

/// Observation hooks for a run; rows are reported as soon as they complete.
#[derive(Default)]
pub struct IsarahHooks<'a> {
    pub query_budget: Option<u64>,
    #[allow(clippy::type_complexity)]
    pub on_outer: Option<&'a mut dyn FnMut(usize, ArrayView1<f64>, Option<f64>, u64)>,
}

/// Runs ZO-iSARAH from `w0`. Descent uses `w_{k+1} = w_k - gamma v_k` at
/// every step; each outer loop selects its output uniformly from all
/// `inner_len + 1` iterates it produced.
pub fn isarah_run<O: StochasticObjective + ?Sized>(
    objective: &O,
    w0: ArrayView1<f64>,
    params: &IsarahParams,
    rng: &mut Stream,
    counter: &mut QueryCounter,
    mut hooks: IsarahHooks<'_>,
) -> Result<IsarahResult> {
    params.validate()?;
    let d = objective.dim();
    if w0.len() != d {
        return Err(Error::invalid("w0 dimension mismatch"));
    }
    if params.snapshot_mode == SnapshotMode::FullSum && objective.regime() == Regime::Online {
        return Err(Error::invalid("FullSum snapshots require a finite-sum objective"));
    }

    let mut anchor = w0.to_owned();
    let mut trace = Vec::with_capacity(params.outer_len);

    for t in 1..=params.outer_len {
        if let Some(budget) = hooks.query_budget {
            if counter.total() >= budget {
                break;
            }
        }
        let snapshot_batch = match params.snapshot_mode {
            SnapshotMode::LargeBatch => {
                sample_batch_objective(objective, params.snapshot_batch, rng)?
            }
            SnapshotMode::FullSum => match objective.regime() {
                Regime::FiniteSum(n) => full_sum_batch(n),
                Regime::Online => unreachable!(),
            },
        };
        let (v0, q) = coord_grad_objective(objective, anchor.view(), &snapshot_batch, params.delta)?;
        counter.add(phase::SNAPSHOT, q);
        let snapshot_norm_sq = v0.dot(&v0);

        let mut iterates = Vec::with_capacity(params.inner_len + 1);
        iterates.push(anchor.clone());
        let mut w_prev = anchor.clone();
        let mut w_curr = &anchor - &(&v0 * params.gamma);
        iterates.push(w_curr.clone());
        let mut v = v0;

        for _k in 1..params.inner_len {
            let batch = sample_batch_objective(objective, params.inner_batch, rng)?;
            let dirs = gaussian_directions(rng, params.inner_batch, d);
            let (psi_new, q1) =
                gauss_grad_joint(objective, w_curr.view(), &batch, &dirs, params.tau)?;
            let (psi_old, q2) =
                gauss_grad_joint(objective, w_prev.view(), &batch, &dirs, params.tau)?;
            counter.add(phase::INNER, q1 + q2);
            v += &psi_new;
            v -= &psi_old;
            let w_next = &w_curr - &(&v * params.gamma);
            iterates.push(w_next.clone());
            w_prev = w_curr;
            w_curr = w_next;
        }

        anchor = iterates[uniform_index(rng, iterates.len())].clone();
        let row = IsarahTraceRow {
            outer_iter: t,
            snapshot_grad_norm_sq: Some(snapshot_norm_sq),
            queries: counter.total(),
        };
        if let Some(cb) = hooks.on_outer.as_mut() {
            cb(t, anchor.view(), row.snapshot_grad_norm_sq, row.queries);
        }
        trace.push(row);
    }

    Ok(IsarahResult {
        w_out: anchor,
        trace,
    })
}

/// Estimates the squared gradient norm at `w0` with one coordinate-difference
/// pass over a single sample; used to size the outer-loop count when the
/// caller has no better value.
pub fn estimate_grad0_norm_sq<O: StochasticObjective + ?Sized>(
    objective: &O,
    w0: ArrayView1<f64>,
    delta: f64,
    rng: &mut Stream,
    counter: &mut QueryCounter,
) -> Result<f64> {
    let batch = sample_batch_objective(objective, 1, rng)?;
    let (g, q) = coord_grad_objective(objective, w0, &batch, delta)?;
    counter.add(phase::INIT, q);
    Ok(g.dot(&g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{InstrumentedObjective, Sample};
    use crate::quadratic::QuadraticObjective;
    use crate::rng::substream;
    use ndarray::{Array1, Array2};

    fn sphere(d: usize, sigma: f64, regime: Regime, seed: u64) -> QuadraticObjective {
        let mut rng = substream(seed, "objective");
        QuadraticObjective::new(Array2::eye(d), Array1::zeros(d), sigma, regime, &mut rng).unwrap()
    }

    #[test]
    fn defaults_match_schedule_arithmetic() {
        let p = isarah_defaults(1.0, 0.1, 1.0, 10, 0.04, 1.0).unwrap();
        assert!((p.gamma - 2.0 / 9.0).abs() < 1e-15);
        assert_eq!(p.inner_len, 359);
        assert_eq!(p.snapshot_batch, 625);
        assert_eq!(p.inner_batch, 10);
        assert_eq!(p.outer_len, 7);
        let delta_want = 2.0 * 0.2 / (5.0 * 10f64.sqrt());
        assert!((p.delta - delta_want).abs() < 1e-15);
        assert!((p.delta - 0.02529822128).abs() < 1e-9);
        // tau = min(sqrt(eps)/(3 l (d+3)^1.5), sqrt(2 eps/(5 l mu d)))
        let tau_first = 0.2 / (3.0 * 13f64.powf(1.5));
        let tau_second = (2.0f64 * 0.04 / (5.0 * 1.0 * 0.1 * 10.0)).sqrt();
        assert!((tau_first - 1.4223081954493056e-3).abs() < 1e-12);
        assert!((tau_second - 0.126491106).abs() < 1e-8);
        assert!((p.tau - tau_first).abs() < 1e-15);
    }

    #[test]
    fn defaults_edge_cases() {
        // kappa = 1
        assert_eq!(isarah_defaults(1.0, 1.0, 1.0, 4, 0.1, 1.0).unwrap().inner_len, 35);
        // B1 scales with sigma^2: doubling sigma quadruples the batch.
        assert_eq!(isarah_defaults(1.0, 0.1, 1.0, 4, 0.04, 1.0).unwrap().snapshot_batch, 625);
        assert_eq!(isarah_defaults(1.0, 0.1, 2.0, 4, 0.04, 1.0).unwrap().snapshot_batch, 2500);
        // eps >= grad0 clamps to a single outer loop.
        assert_eq!(isarah_defaults(1.0, 0.5, 0.0, 4, 2.0, 1.0).unwrap().outer_len, 1);
    }

    #[test]
    fn noiseless_sphere_reaches_target_within_schedule_budget() {
        let d = 6;
        let obj = sphere(d, 0.0, Regime::FiniteSum(1), 1);
        let eps = 1e-4;
        let mut w0 = Array1::zeros(d);
        w0[0] = 1.0; // unit initial gradient norm
        let params = isarah_defaults(1.0, 1.0, 0.0, d, eps, 1.0)
            .unwrap()
            .with_snapshot_mode(SnapshotMode::FullSum);
        let mut counter = QueryCounter::new();
        let res = isarah_run(
            &obj,
            w0.view(),
            &params,
            &mut substream(3, "run"),
            &mut counter,
            IsarahHooks::default(),
        )
        .unwrap();
        let g = obj.grad(res.w_out.view());
        assert!(g.dot(&g) <= eps, "final squared grad {}", g.dot(&g));
        // Queries stay strictly increasing along the trace.
        for pair in res.trace.windows(2) {
            assert!(pair[1].queries > pair[0].queries);
        }
    }

    #[test]
    fn optimum_is_a_fixed_point_without_noise() {
        let d = 4;
        let obj = sphere(d, 0.0, Regime::FiniteSum(1), 2);
        let params = IsarahParams {
            gamma: 0.2,
            inner_len: 8,
            outer_len: 3,
            snapshot_batch: 1,
            inner_batch: 2,
            tau: 0.05,
            delta: 0.05,
            snapshot_mode: SnapshotMode::FullSum,
        };
        let mut counter = QueryCounter::new();
        let res = isarah_run(
            &obj,
            Array1::zeros(d).view(),
            &params,
            &mut substream(4, "run"),
            &mut counter,
            IsarahHooks::default(),
        )
        .unwrap();
        // Central differences at the optimum of 1/2||w||^2 are exactly zero,
        // so every iterate stays put.
        assert!(res.w_out.iter().all(|e| e.abs() < 1e-14));
    }

    #[test]
    fn query_counter_matches_closed_form() {
        let d = 5;
        let obj = InstrumentedObjective::new(sphere(d, 0.3, Regime::FiniteSum(12), 5));
        let params = IsarahParams {
            gamma: 0.1,
            inner_len: 7,
            outer_len: 3,
            snapshot_batch: 4,
            inner_batch: 3,
            tau: 0.03,
            delta: 0.03,
            snapshot_mode: SnapshotMode::LargeBatch,
        };
        let mut counter = QueryCounter::new();
        isarah_run(
            &obj,
            Array1::zeros(d).view(),
            &params,
            &mut substream(6, "run"),
            &mut counter,
            IsarahHooks::default(),
        )
        .unwrap();
        let want = params.query_formula(d, None);
        assert_eq!(counter.total(), want);
        assert_eq!(obj.calls(), want);

        // FullSum variant charges 2*d*n per snapshot.
        let obj = InstrumentedObjective::new(sphere(d, 0.3, Regime::FiniteSum(12), 5));
        let params = params.with_snapshot_mode(SnapshotMode::FullSum);
        let mut counter = QueryCounter::new();
        isarah_run(
            &obj,
            Array1::zeros(d).view(),
            &params,
            &mut substream(6, "run"),
            &mut counter,
            IsarahHooks::default(),
        )
        .unwrap();
        let want = params.query_formula(d, Some(12));
        assert_eq!(counter.total(), want);
        assert_eq!(obj.calls(), want);
    }

    #[test]
    fn oracle_failure_aborts() {
        struct Bad;
        impl StochasticObjective for Bad {
            fn dim(&self) -> usize {
                2
            }
            fn regime(&self) -> Regime {
                Regime::FiniteSum(1)
            }
            fn eval(&self, w: ArrayView1<f64>, _xi: &Sample) -> f64 {
                if w[0] > 0.4 {
                    f64::NAN
                } else {
                    w.dot(&w)
                }
            }
        }
        let params = IsarahParams {
            gamma: 1.0,
            inner_len: 4,
            outer_len: 2,
            snapshot_batch: 1,
            inner_batch: 1,
            tau: 0.5,
            delta: 0.5,
            snapshot_mode: SnapshotMode::FullSum,
        };
        let mut counter = QueryCounter::new();
        let r = isarah_run(
            &Bad,
            Array1::zeros(2).view(),
            &params,
            &mut substream(7, "run"),
            &mut counter,
            IsarahHooks::default(),
        );
        assert!(matches!(r, Err(Error::OracleFailure { .. })));
    }

    #[test]
    fn full_sum_requires_finite_sum_regime() {
        let obj = sphere(3, 0.1, Regime::Online, 8);
        let params = isarah_defaults(1.0, 1.0, 0.1, 3, 0.01, 1.0)
            .unwrap()
            .with_snapshot_mode(SnapshotMode::FullSum);
        let mut counter = QueryCounter::new();
        let r = isarah_run(
            &obj,
            Array1::zeros(3).view(),
            &params,
            &mut substream(9, "run"),
            &mut counter,
            IsarahHooks::default(),
        );
        assert!(r.is_err());
    }
}
