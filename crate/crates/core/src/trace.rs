//! Shared run traces and observation hooks for the minimax solvers.

use ndarray::{Array1, ArrayView1};

use crate::counter::QueryCounter;

/// Loss reporting for a trace point. `queries` is the number of component
/// evaluations the report itself consumed; those are accounted separately
/// from the algorithm's own counter so cost curves reflect algorithmic
/// queries only.
#[derive(Debug, Clone, Copy)]
pub struct PhiPoint {
    pub phi: f64,
    pub grad_phi_norm: Option<f64>,
    pub queries: u64,
}

/// Evaluates the inner-maximized objective at an outer iterate.
pub trait PhiOracle: Sync {
    fn eval(&self, x: ArrayView1<f64>) -> PhiPoint;
}

impl<F> PhiOracle for F
where
    F: Fn(ArrayView1<f64>) -> PhiPoint + Sync,
{
    fn eval(&self, x: ArrayView1<f64>) -> PhiPoint {
        self(x)
    }
}

/// One per-iteration record. `queries` is the cumulative algorithmic count
/// after the iteration completed; diagnostics refer to the iterate pair the
/// iteration started from.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub iter: usize,
    pub queries: u64,
    pub x: Array1<f64>,
    pub phi: Option<f64>,
    pub grad_phi_norm: Option<f64>,
    pub delta_t: Option<f64>,
    pub big_delta_t: Option<f64>,
}

/// Full outcome of a run: every iterate's record, the uniformly drawn
/// output iterate, and the query accounting.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub output: Array1<f64>,
    pub output_index: usize,
    pub counter: QueryCounter,
    /// Component evaluations spent on loss reporting, kept out of `counter`.
    pub eval_queries: u64,
}

impl RunTrace {
    /// The iterate with the smallest recorded loss, when any was evaluated.
    pub fn best_by_phi(&self) -> Option<&TraceRow> {
        self.rows
            .iter()
            .filter(|r| r.phi.is_some())
            .min_by(|a, b| a.phi.unwrap().partial_cmp(&b.phi.unwrap()).unwrap())
    }
}

/// Run control and observation. Rows are handed to `on_row` as soon as they
/// are complete so sinks can flush incrementally.
#[derive(Default)]
pub struct RunHooks<'a> {
    /// Iterations between loss/diagnostic evaluations; 0 disables them.
    pub eval_every: usize,
    pub phi: Option<&'a dyn PhiOracle>,
    /// Stop before starting an iteration once this many queries were spent.
    pub query_budget: Option<u64>,
    #[allow(clippy::type_complexity)]
    pub on_row: Option<&'a mut dyn FnMut(&TraceRow)>,
}

impl<'a> RunHooks<'a> {
    pub fn none() -> Self {
        Self::default()
    }

    pub(crate) fn should_eval(&self, t: usize) -> bool {
        self.eval_every > 0 && t.is_multiple_of(self.eval_every)
    }
}
