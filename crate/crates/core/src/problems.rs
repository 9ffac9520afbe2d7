//! The minimax problem abstraction: black-box component oracles, sampling
//! regimes, declared problem constants, and the tracking/estimation-error
//! diagnostics.

use std::sync::{
    atomic::{AtomicU64, Ordering},
    Arc,
};

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Whether samples are drawn fresh (online) or from a fixed set of `n`
/// components (finite sum).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Online,
    FiniteSum(usize),
}

impl Regime {
    pub fn component_count(&self) -> Option<usize> {
        match self {
            Regime::Online => None,
            Regime::FiniteSum(n) => Some(*n),
        }
    }
}

/// One stochastic sample handed to the component oracle: either an index
/// into a finite component set, or an owned draw whose payload the problem
/// interprets (online regime).
#[derive(Debug, Clone)]
pub enum Sample {
    Index(usize),
    Draw(Arc<[f64]>),
}

impl Sample {
    pub fn index(&self) -> Option<usize> {
        match self {
            Sample::Index(i) => Some(*i),
            Sample::Draw(_) => None,
        }
    }
}

/// Constants the user declares about the problem. They are inputs, not
/// quantities the library estimates.
#[derive(Debug, Clone, Copy)]
pub struct ProblemConstants {
    /// Averaged gradient-Lipschitz constant of the component function.
    pub lipschitz_l: f64,
    /// Strong-concavity modulus of the objective in the inner variable.
    pub strong_concavity_mu: f64,
    /// Bound on the component-gradient standard deviation.
    pub variance_sigma: f64,
}

impl ProblemConstants {
    pub fn condition_number(&self) -> f64 {
        self.lipschitz_l / self.strong_concavity_mu
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lipschitz_l >= 0.0 && self.lipschitz_l.is_finite()) {
            return Err(Error::invalid("lipschitz constant must be finite and >= 0"));
        }
        if !(self.strong_concavity_mu > 0.0 && self.strong_concavity_mu.is_finite()) {
            return Err(Error::invalid("strong concavity modulus must be > 0"));
        }
        if !(self.variance_sigma >= 0.0 && self.variance_sigma.is_finite()) {
            return Err(Error::invalid("variance bound must be finite and >= 0"));
        }
        if self.condition_number() < 1.0 {
            return Err(Error::PreconditionViolation(
                "condition number l/mu must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Feasible set of the inner variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YConstraint {
    Simplex,
}

/// A stochastic minimax problem `min_x max_y E[F(x, y; xi)]` exposed through
/// component-function values only.
///
/// Oracles are pure given `(x, y, xi)` and safe to evaluate concurrently.
pub trait MinimaxProblem: Sync {
    fn d1(&self) -> usize;
    fn d2(&self) -> usize;
    fn regime(&self) -> Regime;
    fn constants(&self) -> ProblemConstants;

    /// Component function value `F(x, y; xi)`.
    fn eval(&self, x: ArrayView1<f64>, y: ArrayView1<f64>, xi: &Sample) -> f64;

    /// Draws one sample from the problem's stream. Finite-sum problems draw
    /// a uniform index with replacement; online problems materialize a fresh
    /// perturbation.
    fn draw(&self, rng: &mut Stream) -> Sample {
        match self.regime() {
            Regime::FiniteSum(n) => Sample::Index(crate::rng::uniform_index(rng, n)),
            Regime::Online => unreachable!("online problems must override draw()"),
        }
    }

    fn y_constraint(&self) -> Option<YConstraint> {
        None
    }

    /// Exact gradients of `f = E[F]`, available on test problems only.
    fn true_grad(&self, _x: ArrayView1<f64>, _y: ArrayView1<f64>) -> Option<(Array1<f64>, Array1<f64>)> {
        None
    }

    /// Exact gradients of the component `F(.,.; xi)`, when available.
    fn component_grad(
        &self,
        _x: ArrayView1<f64>,
        _y: ArrayView1<f64>,
        _xi: &Sample,
    ) -> Option<(Array1<f64>, Array1<f64>)> {
        None
    }
}

/// A stochastic minimization objective `min_w E[P(w; xi)]`; the shape the
/// initialization solver works on.
pub trait StochasticObjective: Sync {
    fn dim(&self) -> usize;
    fn regime(&self) -> Regime;
    fn eval(&self, w: ArrayView1<f64>, xi: &Sample) -> f64;

    fn draw(&self, rng: &mut Stream) -> Sample {
        match self.regime() {
            Regime::FiniteSum(n) => Sample::Index(crate::rng::uniform_index(rng, n)),
            Regime::Online => unreachable!("online objectives must override draw()"),
        }
    }
}

/// The inner maximization of a minimax problem at frozen `x`, negated into
/// a minimization objective over `y`.
pub struct NegatedInner<'a, P: MinimaxProblem + ?Sized> {
    problem: &'a P,
    x: Array1<f64>,
}

impl<'a, P: MinimaxProblem + ?Sized> NegatedInner<'a, P> {
    pub fn new(problem: &'a P, x: ArrayView1<f64>) -> Self {
        Self {
            problem,
            x: x.to_owned(),
        }
    }
}

impl<P: MinimaxProblem + ?Sized> StochasticObjective for NegatedInner<'_, P> {
    fn dim(&self) -> usize {
        self.problem.d2()
    }

    fn regime(&self) -> Regime {
        self.problem.regime()
    }

    fn eval(&self, w: ArrayView1<f64>, xi: &Sample) -> f64 {
        -self.problem.eval(self.x.view(), w, xi)
    }

    fn draw(&self, rng: &mut Stream) -> Sample {
        self.problem.draw(rng)
    }
}

/// Draws `size` samples from the problem's regime (i.i.d. online draws, or
/// uniform indices with replacement in the finite-sum case).
pub fn sample_batch<P: MinimaxProblem + ?Sized>(
    problem: &P,
    size: usize,
    rng: &mut Stream,
) -> Result<Vec<Sample>> {
    if size == 0 {
        return Err(Error::invalid("batch size must be >= 1"));
    }
    Ok((0..size).map(|_| problem.draw(rng)).collect())
}

/// Same as [`sample_batch`] for minimization objectives.
pub fn sample_batch_objective<O: StochasticObjective + ?Sized>(
    objective: &O,
    size: usize,
    rng: &mut Stream,
) -> Result<Vec<Sample>> {
    if size == 0 {
        return Err(Error::invalid("batch size must be >= 1"));
    }
    Ok((0..size).map(|_| objective.draw(rng)).collect())
}

/// Every component exactly once; the full-sum "batch" used by snapshot
/// estimators in the finite-sum regime.
pub fn full_sum_batch(n: usize) -> Vec<Sample> {
    (0..n).map(Sample::Index).collect()
}

/// Tracking error: squared norm of the inner gradient at `(x, y)`. Zero
/// exactly when `y` maximizes the inner problem.
pub fn tracking_error<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x: ArrayView1<f64>,
    y: ArrayView1<f64>,
) -> Result<f64> {
    let (_, gy) = problem
        .true_grad(x, y)
        .ok_or(Error::UnsupportedDiagnostic("problem has no exact gradient"))?;
    Ok(gy.dot(&gy))
}

/// Estimation error: squared deviation of the estimator pair `(v, u)` from
/// the exact gradients at `(x, y)`.
pub fn estimation_error<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x: ArrayView1<f64>,
    y: ArrayView1<f64>,
    v: ArrayView1<f64>,
    u: ArrayView1<f64>,
) -> Result<f64> {
    let (gx, gy) = problem
        .true_grad(x, y)
        .ok_or(Error::UnsupportedDiagnostic("problem has no exact gradient"))?;
    let dv = &v.to_owned() - &gx;
    let du = &u.to_owned() - &gy;
    Ok(dv.dot(&dv) + du.dot(&du))
}

/// Wraps a problem and counts every oracle evaluation. Used to check the
/// analytic query accounting against reality.
pub struct Instrumented<P> {
    inner: P,
    calls: AtomicU64,
}

impl<P> Instrumented<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: MinimaxProblem> MinimaxProblem for Instrumented<P> {
    fn d1(&self) -> usize {
        self.inner.d1()
    }
    fn d2(&self) -> usize {
        self.inner.d2()
    }
    fn regime(&self) -> Regime {
        self.inner.regime()
    }
    fn constants(&self) -> ProblemConstants {
        self.inner.constants()
    }
    fn eval(&self, x: ArrayView1<f64>, y: ArrayView1<f64>, xi: &Sample) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.eval(x, y, xi)
    }
    fn draw(&self, rng: &mut Stream) -> Sample {
        self.inner.draw(rng)
    }
    fn y_constraint(&self) -> Option<YConstraint> {
        self.inner.y_constraint()
    }
    fn true_grad(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Option<(Array1<f64>, Array1<f64>)> {
        self.inner.true_grad(x, y)
    }
    fn component_grad(
        &self,
        x: ArrayView1<f64>,
        y: ArrayView1<f64>,
        xi: &Sample,
    ) -> Option<(Array1<f64>, Array1<f64>)> {
        self.inner.component_grad(x, y, xi)
    }
}

/// Instrumented wrapper for minimization objectives.
pub struct InstrumentedObjective<O> {
    inner: O,
    calls: AtomicU64,
}

impl<O> InstrumentedObjective<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: StochasticObjective> StochasticObjective for InstrumentedObjective<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn regime(&self) -> Regime {
        self.inner.regime()
    }
    fn eval(&self, w: ArrayView1<f64>, xi: &Sample) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.eval(w, xi)
    }
    fn draw(&self, rng: &mut Stream) -> Sample {
        self.inner.draw(rng)
    }
}
