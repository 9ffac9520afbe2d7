//! Zeroth-order gradient estimators with exact per-call query accounting.
//!
//! Three families are provided:
//! - Gaussian-smoothing forward differences along random directions, for the
//!   x block, the y block, and a joint variable;
//! - coordinate-wise central differences along unit basis vectors, used for
//!   epoch snapshots;
//! - the recursive variance-reduced difference update, which re-evaluates a
//!   Gaussian estimator at two points with shared samples and directions and
//!   adds the difference to a carried estimate.
//!
//! Every operation reports the exact number of component-function
//! evaluations it performed; a forward or central difference charges two
//! evaluations per (sample, direction) or (sample, coordinate) pair.

use ndarray::{Array1, ArrayView1};

use crate::batch::map_indexed;
use crate::error::{Error, Result};
use crate::problems::{MinimaxProblem, Sample, StochasticObjective};

/// Smoothing radii for the Gaussian estimators and the coordinate step.
#[derive(Debug, Clone, Copy)]
pub struct SmoothingConfig {
    /// Gaussian radius for the x block.
    pub mu1: f64,
    /// Gaussian radius for the y block.
    pub mu2: f64,
    /// Gaussian radius for joint-variable estimators.
    pub tau: f64,
    /// Coordinate central-difference step.
    pub delta: f64,
}

impl SmoothingConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("tau", self.tau),
            ("delta", self.delta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!(
                    "smoothing radius {name} must be strictly positive and finite"
                )));
            }
        }
        Ok(())
    }
}

/// A paired gradient estimate for the two blocks, with the query cost of
/// producing it.
#[derive(Debug, Clone)]
pub struct GradEstimate {
    pub v: Array1<f64>,
    pub u: Array1<f64>,
    pub queries_used: u64,
}

impl GradEstimate {
    pub fn is_finite(&self) -> bool {
        self.v.iter().all(|e| e.is_finite()) && self.u.iter().all(|e| e.is_finite())
    }
}

/// Which coordinate block a coordinate-wise estimator covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    X,
    Y,
    Both,
}

fn ensure_finite(value: f64, phase: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::OracleFailure {
            phase,
            detail: format!("component function returned {value}"),
        })
    }
}

fn check_batch_dirs(batch: &[Sample], dirs: &[Array1<f64>], dim: usize) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::invalid("batch must contain at least one sample"));
    }
    if batch.len() != dirs.len() {
        return Err(Error::invalid(format!(
            "batch ({}) and direction ({}) counts differ",
            batch.len(),
            dirs.len()
        )));
    }
    if dirs.iter().any(|d| d.len() != dim) {
        return Err(Error::invalid("direction dimension mismatch"));
    }
    Ok(())
}

/// Gaussian forward-difference estimate of the x-block gradient:
/// averages `[F(x + mu1 v_i, y; xi_i) - F(x, y; xi_i)] / mu1 * v_i`.
/// Charges `2 * batch` queries.
pub fn gauss_grad_x<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x: ArrayView1<f64>,
    y: ArrayView1<f64>,
    batch: &[Sample],
    dirs: &[Array1<f64>],
    mu1: f64,
) -> Result<(Array1<f64>, u64)> {
    check_batch_dirs(batch, dirs, x.len())?;
    if !(mu1 > 0.0 && mu1.is_finite()) {
        return Err(Error::invalid("mu1 must be strictly positive"));
    }
    let contributions = map_indexed(batch.len(), |i| {
        let shifted =
            Array1::from_iter(x.iter().zip(dirs[i].iter()).map(|(a, b)| a + mu1 * b));
        let f_plus = problem.eval(shifted.view(), y, &batch[i]);
        let f_base = problem.eval(x, y, &batch[i]);
        (f_plus, f_base)
    });
    let mut acc = Array1::<f64>::zeros(x.len());
    for (i, (f_plus, f_base)) in contributions.into_iter().enumerate() {
        let coeff = (ensure_finite(f_plus, "gauss-grad-x")? - ensure_finite(f_base, "gauss-grad-x")?) / mu1;
        acc.scaled_add(coeff, &dirs[i]);
    }
    acc /= batch.len() as f64;
    Ok((acc, 2 * batch.len() as u64))
}

/// Mirror of [`gauss_grad_x`] with directions perturbing the y block.
pub fn gauss_grad_y<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x: ArrayView1<f64>,
    y: ArrayView1<f64>,
    batch: &[Sample],
    dirs: &[Array1<f64>],
    mu2: f64,
) -> Result<(Array1<f64>, u64)> {
    check_batch_dirs(batch, dirs, y.len())?;
    if !(mu2 > 0.0 && mu2.is_finite()) {
        return Err(Error::invalid("mu2 must be strictly positive"));
    }
    let contributions = map_indexed(batch.len(), |i| {
        let shifted =
            Array1::from_iter(y.iter().zip(dirs[i].iter()).map(|(a, b)| a + mu2 * b));
        let f_plus = problem.eval(x, shifted.view(), &batch[i]);
        let f_base = problem.eval(x, y, &batch[i]);
        (f_plus, f_base)
    });
    let mut acc = Array1::<f64>::zeros(y.len());
    for (i, (f_plus, f_base)) in contributions.into_iter().enumerate() {
        let coeff = (ensure_finite(f_plus, "gauss-grad-y")? - ensure_finite(f_base, "gauss-grad-y")?) / mu2;
        acc.scaled_add(coeff, &dirs[i]);
    }
    acc /= batch.len() as f64;
    Ok((acc, 2 * batch.len() as u64))
}

/// Joint-variable Gaussian estimator over a minimization objective:
/// averages `[P(w + tau psi_i; xi_i) - P(w; xi_i)] / tau * psi_i`.
pub fn gauss_grad_joint<O: StochasticObjective + ?Sized>(
    objective: &O,
    w: ArrayView1<f64>,
    batch: &[Sample],
    dirs: &[Array1<f64>],
    tau: f64,
) -> Result<(Array1<f64>, u64)> {
    check_batch_dirs(batch, dirs, w.len())?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid("tau must be strictly positive"));
    }
    let contributions = map_indexed(batch.len(), |i| {
        let shifted =
            Array1::from_iter(w.iter().zip(dirs[i].iter()).map(|(a, b)| a + tau * b));
        let f_plus = objective.eval(shifted.view(), &batch[i]);
        let f_base = objective.eval(w, &batch[i]);
        (f_plus, f_base)
    });
    let mut acc = Array1::<f64>::zeros(w.len());
    for (i, (f_plus, f_base)) in contributions.into_iter().enumerate() {
        let coeff =
            (ensure_finite(f_plus, "gauss-grad-joint")? - ensure_finite(f_base, "gauss-grad-joint")?) / tau;
        acc.scaled_add(coeff, &dirs[i]);
    }
    acc /= batch.len() as f64;
    Ok((acc, 2 * batch.len() as u64))
}

/// Coordinate-wise central-difference estimate over the requested block(s),
/// averaged over the batch. Charges `2 * batch * (coordinates requested)`.
///
/// The block that was not requested comes back as an empty array.
pub fn coord_grad<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x: ArrayView1<f64>,
    y: ArrayView1<f64>,
    batch: &[Sample],
    delta: f64,
    block: Block,
) -> Result<GradEstimate> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid("delta must be strictly positive"));
    }
    if batch.is_empty() {
        return Err(Error::invalid("batch must contain at least one sample"));
    }
    let (want_x, want_y) = match block {
        Block::X => (true, false),
        Block::Y => (false, true),
        Block::Both => (true, true),
    };
    let d1 = x.len();
    let d2 = y.len();
    let per_sample = map_indexed(batch.len(), |i| {
        let xi = &batch[i];
        let mut gx = vec![0.0; if want_x { d1 } else { 0 }];
        let mut gy = vec![0.0; if want_y { d2 } else { 0 }];
        if want_x {
            let mut xp = x.to_owned();
            for j in 0..d1 {
                let orig = xp[j];
                xp[j] = orig + delta;
                let f_plus = problem.eval(xp.view(), y, xi);
                xp[j] = orig - delta;
                let f_minus = problem.eval(xp.view(), y, xi);
                xp[j] = orig;
                gx[j] = (f_plus - f_minus) / (2.0 * delta);
            }
        }
        if want_y {
            let mut yp = y.to_owned();
            for j in 0..d2 {
                let orig = yp[j];
                yp[j] = orig + delta;
                let f_plus = problem.eval(x, yp.view(), xi);
                yp[j] = orig - delta;
                let f_minus = problem.eval(x, yp.view(), xi);
                yp[j] = orig;
                gy[j] = (f_plus - f_minus) / (2.0 * delta);
            }
        }
        (gx, gy)
    });
    let mut v = Array1::<f64>::zeros(if want_x { d1 } else { 0 });
    let mut u = Array1::<f64>::zeros(if want_y { d2 } else { 0 });
    for (gx, gy) in per_sample {
        for (acc, g) in v.iter_mut().zip(&gx) {
            *acc += ensure_finite(*g, "coord-grad")?;
        }
        for (acc, g) in u.iter_mut().zip(&gy) {
            *acc += ensure_finite(*g, "coord-grad")?;
        }
    }
    let s = batch.len() as f64;
    v /= s;
    u /= s;
    let coords = (if want_x { d1 } else { 0 }) + (if want_y { d2 } else { 0 });
    Ok(GradEstimate {
        v,
        u,
        queries_used: 2 * batch.len() as u64 * coords as u64,
    })
}

/// Coordinate-wise central differences over every coordinate of a
/// minimization objective.
pub fn coord_grad_objective<O: StochasticObjective + ?Sized>(
    objective: &O,
    w: ArrayView1<f64>,
    batch: &[Sample],
    delta: f64,
) -> Result<(Array1<f64>, u64)> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid("delta must be strictly positive"));
    }
    if batch.is_empty() {
        return Err(Error::invalid("batch must contain at least one sample"));
    }
    let d = w.len();
    let per_sample = map_indexed(batch.len(), |i| {
        let xi = &batch[i];
        let mut g = vec![0.0; d];
        let mut wp = w.to_owned();
        for j in 0..d {
            let orig = wp[j];
            wp[j] = orig + delta;
            let f_plus = objective.eval(wp.view(), xi);
            wp[j] = orig - delta;
            let f_minus = objective.eval(wp.view(), xi);
            wp[j] = orig;
            g[j] = (f_plus - f_minus) / (2.0 * delta);
        }
        g
    });
    let mut acc = Array1::<f64>::zeros(d);
    for g in per_sample {
        for (a, gi) in acc.iter_mut().zip(&g) {
            *a += ensure_finite(*gi, "coord-grad")?;
        }
    }
    acc /= batch.len() as f64;
    Ok((acc, 2 * batch.len() as u64 * d as u64))
}

/// Recursive variance-reduced update: re-evaluates the Gaussian estimators
/// at `point_new` and `point_old` with the *same* samples and directions and
/// adds the difference to `prev`. Sharing the draws across the two points is
/// the variance-reduction coupling; draws are never shared across steps.
///
/// Charges `4 * (|batch_x| + |batch_y|)` queries: two base-point evaluations
/// per sample per block.
#[allow(clippy::too_many_arguments)]
pub fn spider_update<P: MinimaxProblem + ?Sized>(
    prev: &GradEstimate,
    point_new: (ArrayView1<f64>, ArrayView1<f64>),
    point_old: (ArrayView1<f64>, ArrayView1<f64>),
    problem: &P,
    batch_x: &[Sample],
    batch_y: &[Sample],
    dirs_x: &[Array1<f64>],
    dirs_y: &[Array1<f64>],
    cfg: &SmoothingConfig,
) -> Result<GradEstimate> {
    if !prev.is_finite() {
        return Err(Error::invalid("carried estimate contains non-finite entries"));
    }
    let (gx_new, q1) = gauss_grad_x(problem, point_new.0, point_new.1, batch_x, dirs_x, cfg.mu1)?;
    let (gx_old, q2) = gauss_grad_x(problem, point_old.0, point_old.1, batch_x, dirs_x, cfg.mu1)?;
    let (gy_new, q3) = gauss_grad_y(problem, point_new.0, point_new.1, batch_y, dirs_y, cfg.mu2)?;
    let (gy_old, q4) = gauss_grad_y(problem, point_old.0, point_old.1, batch_y, dirs_y, cfg.mu2)?;
    let v = &(&prev.v + &gx_new) - &gx_old;
    let u = &(&prev.u + &gy_new) - &gy_old;
    Ok(GradEstimate {
        v,
        u,
        queries_used: q1 + q2 + q3 + q4,
    })
}
