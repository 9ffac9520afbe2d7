//! The variance-reduced concave maximizer: advances the inner variable by
//! recursive zeroth-order ascent steps after each outer descent step and
//! hands the recursively updated estimator pair back to the outer loop.
//!
//! One call performs a bridge update that carries the estimators across the
//! x-move (y frozen), then `m + 1` recursive passes, each drawing fresh
//! samples and directions, updating the pair with a shared-draw difference,
//! and ascending y. The candidates eligible for selection are the iterates
//! of indices `0..=m` together with the estimator pair of the same index;
//! one of them is drawn uniformly. The final iterate of the last pass is
//! computed but never selected.

use ndarray::Array1;

use crate::counter::{phase, QueryCounter};
use crate::error::{Error, Result};
use crate::estimators::{spider_update, GradEstimate, SmoothingConfig};
use crate::problems::{sample_batch, MinimaxProblem, YConstraint};
use crate::rng::{gaussian_directions, uniform_index, Stream};

/// Inputs of one inner loop: the x-move, the current inner iterate, and the
/// estimator pair the outer loop carried (produced at `(x_old, y)`).
#[derive(Debug, Clone)]
pub struct InnerState {
    pub x_old: Array1<f64>,
    pub x_new: Array1<f64>,
    pub y: Array1<f64>,
    pub v: Array1<f64>,
    pub u: Array1<f64>,
    pub step_beta: f64,
    pub m: usize,
    pub batch_x: usize,
    pub batch_y: usize,
}

/// Output of one inner loop.
#[derive(Debug, Clone)]
pub struct InnerResult {
    pub y_next: Array1<f64>,
    /// Estimator pair recorded at `chosen_index`; the outer loop carries it
    /// into the next iteration.
    pub v_carry: Array1<f64>,
    pub u_carry: Array1<f64>,
    pub chosen_index: usize,
    pub queries: u64,
}

/// Runs the inner loop once. When `projection` is set, every ascent step
/// projects the iterate; carried estimators are never re-projected.
pub fn maximize_step<P: MinimaxProblem + ?Sized>(
    state: &InnerState,
    problem: &P,
    cfg: &SmoothingConfig,
    projection: Option<YConstraint>,
    rng: &mut Stream,
    counter: &mut QueryCounter,
) -> Result<InnerResult> {
    cfg.validate()?;
    if !(state.step_beta > 0.0 && state.step_beta.is_finite()) {
        return Err(Error::invalid("step_beta must be > 0"));
    }
    if state.batch_x == 0 || state.batch_y == 0 {
        return Err(Error::invalid("inner batch sizes must be >= 1"));
    }
    let carried = GradEstimate {
        v: state.v.clone(),
        u: state.u.clone(),
        queries_used: 0,
    };
    if !carried.is_finite() {
        return Err(Error::invalid("carried estimators contain non-finite entries"));
    }

    let project = |y: &mut Array1<f64>| {
        if let Some(YConstraint::Simplex) = projection {
            *y = crate::dro::project_simplex(y.view());
        }
    };

    let draw = |rng: &mut Stream| -> Result<_> {
        let batch_x = sample_batch(problem, state.batch_x, rng)?;
        let dirs_x = gaussian_directions(rng, state.batch_x, problem.d1());
        let batch_y = sample_batch(problem, state.batch_y, rng)?;
        let dirs_y = gaussian_directions(rng, state.batch_y, problem.d2());
        Ok((batch_x, dirs_x, batch_y, dirs_y))
    };

    let mut queries = 0u64;
    // Candidate list: (iterate, estimator pair), indices 0..=m.
    let mut candidates: Vec<(Array1<f64>, Array1<f64>, Array1<f64>)> =
        Vec::with_capacity(state.m + 1);

    // Bridge across the x-move with y frozen.
    let (batch_x, dirs_x, batch_y, dirs_y) = draw(rng)?;
    let est0 = spider_update(
        &carried,
        (state.x_new.view(), state.y.view()),
        (state.x_old.view(), state.y.view()),
        problem,
        &batch_x,
        &batch_y,
        &dirs_x,
        &dirs_y,
        cfg,
    )?;
    queries += est0.queries_used;
    candidates.push((state.y.clone(), est0.v.clone(), est0.u.clone()));

    // First ascent step.
    let mut y_prev = state.y.clone();
    let mut y_curr = &state.y + &(&est0.u * state.step_beta);
    project(&mut y_curr);
    let mut est = est0;

    for k in 1..=state.m + 1 {
        let (batch_x, dirs_x, batch_y, dirs_y) = draw(rng)?;
        est = spider_update(
            &est,
            (state.x_new.view(), y_curr.view()),
            (state.x_new.view(), y_prev.view()),
            problem,
            &batch_x,
            &batch_y,
            &dirs_x,
            &dirs_y,
            cfg,
        )?;
        queries += est.queries_used;
        if k <= state.m {
            candidates.push((y_curr.clone(), est.v.clone(), est.u.clone()));
        }
        let mut y_next = &y_curr + &(&est.u * state.step_beta);
        project(&mut y_next);
        y_prev = y_curr;
        y_curr = y_next;
    }

    counter.add(phase::INNER, queries);
    let chosen_index = uniform_index(rng, state.m + 1);
    let (y_next, v_carry, u_carry) = candidates.swap_remove(chosen_index);
    Ok(InnerResult {
        y_next,
        v_carry,
        u_carry,
        chosen_index,
        queries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Instrumented, MinimaxProblem, ProblemConstants, Regime, Sample};
    use crate::quadratic::QuadraticSaddle;
    use crate::rng::substream;
    use ndarray::{array, Array2, ArrayView1};

    fn smoothing() -> SmoothingConfig {
        SmoothingConfig {
            mu1: 1e-3,
            mu2: 1e-3,
            tau: 1e-3,
            delta: 1e-3,
        }
    }

    /// f(x, y) = b'y: the inner gradient is constant, so shared-draw
    /// differences cancel exactly and the carried estimator never changes.
    struct LinearY {
        b: Array1<f64>,
    }

    impl MinimaxProblem for LinearY {
        fn d1(&self) -> usize {
            1
        }
        fn d2(&self) -> usize {
            self.b.len()
        }
        fn regime(&self) -> Regime {
            Regime::FiniteSum(1)
        }
        fn constants(&self) -> ProblemConstants {
            ProblemConstants {
                lipschitz_l: 1.0,
                strong_concavity_mu: 1.0,
                variance_sigma: 0.0,
            }
        }
        fn eval(&self, _x: ArrayView1<f64>, y: ArrayView1<f64>, _xi: &Sample) -> f64 {
            self.b.dot(&y)
        }
    }

    #[test]
    fn degenerate_loop_has_one_candidate() {
        let p = LinearY {
            b: array![1.0, -2.0],
        };
        let wrapped = Instrumented::new(p);
        let state = InnerState {
            x_old: array![0.0],
            x_new: array![0.1],
            y: array![0.3, 0.4],
            v: array![0.0],
            u: array![1.0, -2.0],
            step_beta: 0.25,
            m: 0,
            batch_x: 3,
            batch_y: 2,
        };
        let mut counter = QueryCounter::new();
        let res = maximize_step(
            &state,
            &wrapped,
            &smoothing(),
            None,
            &mut substream(1, "inner"),
            &mut counter,
        )
        .unwrap();
        assert_eq!(res.chosen_index, 0);
        // y is returned before any ascent step when m = 0.
        assert_eq!(res.y_next, state.y);
        // Bridge plus one loop pass.
        assert_eq!(res.queries, 4 * (3 + 2) * 2);
        assert_eq!(wrapped.calls(), res.queries);
        assert_eq!(counter.total(), res.queries);
    }

    #[test]
    fn chosen_estimators_match_chosen_iterate_index() {
        // On a y-linear oracle the pair stays equal to the carried gradient
        // and iterates walk in exact beta*b increments, so the index is
        // recoverable from the returned iterate.
        let b = array![2.0, -1.0, 0.5];
        let p = LinearY { b: b.clone() };
        let beta = 0.2;
        let cfg = SmoothingConfig {
            mu1: 0.5,
            mu2: 0.5,
            tau: 0.5,
            delta: 0.5,
        };
        for seed in 0..20 {
            let state = InnerState {
                x_old: array![0.0],
                x_new: array![0.0],
                y: Array1::zeros(3),
                v: array![0.0],
                u: b.clone(),
                step_beta: beta,
                m: 6,
                batch_x: 2,
                batch_y: 2,
            };
            let mut counter = QueryCounter::new();
            let res = maximize_step(
                &state,
                &p,
                &cfg,
                None,
                &mut substream(seed, "inner"),
                &mut counter,
            )
            .unwrap();
            for i in 0..3 {
                assert!(
                    (res.u_carry[i] - b[i]).abs() < 1e-10,
                    "carried pair drifted: {:?}",
                    res.u_carry
                );
                let implied = res.y_next[i] / (beta * b[i]);
                assert!(
                    (implied - res.chosen_index as f64).abs() < 1e-6,
                    "iterate does not sit at its reported index: seed {seed}"
                );
            }
            assert!(res.chosen_index <= 6);
        }
    }

    #[test]
    fn first_ascent_step_is_exact_with_exact_carry() {
        // f = -||y||^2/2 with x decoupled; the bridge leaves the carried
        // exact gradient untouched (identical points cancel), so candidate 1
        // is exactly (1 - beta) * y0.
        let q = QuadraticSaddle::deterministic(
            Array2::zeros((1, 1)),
            Array2::zeros((1, 3)),
            Array2::eye(3),
            Array1::zeros(1),
            Array1::zeros(3),
        )
        .unwrap();
        let y0 = array![1.0, -2.0, 0.5];
        let beta = 1.0 / 3.0;
        let state = InnerState {
            x_old: array![0.0],
            x_new: array![0.0],
            y: y0.clone(),
            v: array![0.0],
            u: -y0.clone(),
            step_beta: beta,
            m: 1,
            batch_x: 1,
            batch_y: 1,
        };
        // Scan seeds until the uniform draw picks index 1.
        let mut seen = false;
        for seed in 0..32 {
            let mut counter = QueryCounter::new();
            let res = maximize_step(
                &state,
                &q,
                &smoothing(),
                None,
                &mut substream(seed, "inner"),
                &mut counter,
            )
            .unwrap();
            if res.chosen_index == 1 {
                seen = true;
                for i in 0..3 {
                    assert!((res.y_next[i] - (1.0 - beta) * y0[i]).abs() < 1e-12);
                }
            }
        }
        assert!(seen, "no seed selected index 1");
    }

    #[test]
    fn pure_concave_ascent_contracts_geometrically() {
        // Statistical version of the closed-form decay: with large batches
        // and a tiny radius the recursive pair tracks -y closely, so each
        // recorded step contracts the iterate by about (1 - beta).
        let q = QuadraticSaddle::deterministic(
            Array2::zeros((1, 1)),
            Array2::zeros((1, 2)),
            Array2::eye(2),
            Array1::zeros(1),
            Array1::zeros(2),
        )
        .unwrap();
        let y0 = array![2.0, -1.5];
        let beta = 0.3;
        let m = 4;
        let state = InnerState {
            x_old: array![0.0],
            x_new: array![0.0],
            y: y0.clone(),
            v: array![0.0],
            u: -y0.clone(),
            step_beta: beta,
            m,
            batch_x: 4,
            batch_y: 8192,
        };
        let mut counter = QueryCounter::new();
        let res = maximize_step(
            &state,
            &q,
            &smoothing(),
            None,
            &mut substream(5, "inner"),
            &mut counter,
        )
        .unwrap();
        let k = res.chosen_index as i32;
        let want = (1.0 - beta).powi(k);
        let got = (res.y_next.dot(&res.y_next) / y0.dot(&y0)).sqrt();
        assert!(
            (got - want).abs() <= 0.15 * want.max(1e-2),
            "decay {got} vs geometric {want} at k={k}"
        );
    }

    #[test]
    fn query_formula_holds_for_various_m() {
        let mut rng = substream(7, "instance");
        let q = QuadraticSaddle::generate(2, 2, 2.0, 1.0, 0.2, Regime::FiniteSum(5), &mut rng)
            .unwrap();
        for m in [0usize, 1, 3, 7] {
            let wrapped = Instrumented::new(
                QuadraticSaddle::generate(2, 2, 2.0, 1.0, 0.2, Regime::FiniteSum(5), &mut rng)
                    .unwrap(),
            );
            let (gx, gy) = q.true_grad(array![0.1, 0.2].view(), array![0.3, 0.4].view()).unwrap();
            let state = InnerState {
                x_old: array![0.1, 0.2],
                x_new: array![0.05, 0.25],
                y: array![0.3, 0.4],
                v: gx,
                u: gy,
                step_beta: 0.1,
                m,
                batch_x: 3,
                batch_y: 5,
            };
            let mut counter = QueryCounter::new();
            let res = maximize_step(
                &state,
                &wrapped,
                &smoothing(),
                None,
                &mut substream(m as u64, "inner"),
                &mut counter,
            )
            .unwrap();
            let want = 4 * (3 + 5) as u64 * (m as u64 + 2);
            assert_eq!(res.queries, want);
            assert_eq!(wrapped.calls(), want);
        }
    }

    #[test]
    fn projection_keeps_iterates_on_simplex() {
        let mut rng = substream(8, "instance");
        let q = QuadraticSaddle::generate(2, 4, 2.0, 1.0, 0.1, Regime::FiniteSum(6), &mut rng)
            .unwrap();
        let y0 = array![0.25, 0.25, 0.25, 0.25];
        let (gx, gy) = q.true_grad(array![0.0, 0.0].view(), y0.view()).unwrap();
        let state = InnerState {
            x_old: array![0.0, 0.0],
            x_new: array![-0.1, 0.2],
            y: y0,
            v: gx,
            u: gy,
            step_beta: 0.4,
            m: 5,
            batch_x: 2,
            batch_y: 2,
        };
        for seed in 0..10 {
            let mut counter = QueryCounter::new();
            let res = maximize_step(
                &state,
                &q,
                &smoothing(),
                Some(YConstraint::Simplex),
                &mut substream(seed, "inner"),
                &mut counter,
            )
            .unwrap();
            let sum: f64 = res.y_next.sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(res.y_next.iter().all(|e| *e >= -1e-15));
        }
    }

    #[test]
    fn tracking_error_contracts_across_most_outer_iterations() {
        // Published-schedule beta and m (the loop-structure parameters),
        // moderate batches: after each inner loop the tracking error at the
        // new x must be below its value before the loop in at least 90% of
        // iterations across seeds. The expectation-level contraction allows
        // individual violations.
        let kappa = 1.5f64;
        let mut rng = substream(40, "instance");
        let q = QuadraticSaddle::generate(2, 2, kappa, 1.0, 0.05, Regime::Online, &mut rng)
            .unwrap();
        let beta = 2.0 / 13.0;
        let m = (104.0 * kappa - 1.0).ceil() as usize;
        let cfg = SmoothingConfig {
            mu1: 1e-4,
            mu2: 1e-4,
            tau: 1e-4,
            delta: 1e-4,
        };
        let mut improved = 0usize;
        let mut total = 0usize;
        for seed in 0..20u64 {
            let mut inner_rng = substream(200 + seed, "inner");
            let mut x = crate::rng::gaussian_vector(&mut inner_rng, 2);
            let mut y = crate::rng::gaussian_vector(&mut inner_rng, 2);
            // A persistent outer drift keeps the maximizer moving, so every
            // inner loop starts with real tracking debt.
            let drift = {
                let g = crate::rng::gaussian_vector(&mut inner_rng, 2);
                let n = g.dot(&g).sqrt();
                g / n * 1.2
            };
            let (mut v, mut u) = q.true_grad(x.view(), y.view()).unwrap();
            for _t in 0..10 {
                let x_next = &x + &drift;
                let before = crate::problems::tracking_error(&q, x_next.view(), y.view()).unwrap();
                let mut counter = QueryCounter::new();
                let res = maximize_step(
                    &InnerState {
                        x_old: x.clone(),
                        x_new: x_next.clone(),
                        y: y.clone(),
                        v: v.clone(),
                        u: u.clone(),
                        step_beta: beta,
                        m,
                        batch_x: 150,
                        batch_y: 150,
                    },
                    &q,
                    &cfg,
                    None,
                    &mut inner_rng,
                    &mut counter,
                )
                .unwrap();
                let after =
                    crate::problems::tracking_error(&q, x_next.view(), res.y_next.view()).unwrap();
                total += 1;
                if after < before {
                    improved += 1;
                }
                x = x_next;
                y = res.y_next;
                v = res.v_carry;
                u = res.u_carry;
            }
        }
        let frac = improved as f64 / total as f64;
        assert!(frac >= 0.9, "tracking error improved in only {frac:.2} of iterations");
    }

    #[test]
    fn non_finite_carry_is_rejected() {
        let p = LinearY { b: array![1.0] };
        let state = InnerState {
            x_old: array![0.0],
            x_new: array![0.0],
            y: array![0.0],
            v: array![f64::INFINITY],
            u: array![0.0],
            step_beta: 0.1,
            m: 0,
            batch_x: 1,
            batch_y: 1,
        };
        let mut counter = QueryCounter::new();
        assert!(maximize_step(
            &state,
            &p,
            &smoothing(),
            None,
            &mut substream(0, "inner"),
            &mut counter
        )
        .is_err());
    }
}
