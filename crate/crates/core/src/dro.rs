//! Distributionally robust logistic regression benchmark.
//!
//! The adversary re-weights the per-sample losses over the probability
//! simplex, penalized by `reg * sum((y_i - 1/n)^2)`:
//!
//! `min_x max_{y in simplex}  sum_i y_i f_i(x) - r(y)`
//!
//! with `f_i(x) = phi(l(x; s_i, z_i))`, `phi(t) = 2 log(1 + t/2)` and
//! `l(x; s, z) = log(1 + exp(-z x's))`. The component oracle is
//! `F(x, y; i) = n y_i f_i(x) - r(y)`, scaled so its uniform average over i
//! equals the full objective.

use std::io::{BufRead, Write};

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::problems::{MinimaxProblem, ProblemConstants, Regime, Sample, YConstraint};
use crate::rng::Stream;

/// One labeled sparse row; indices are 1-based as in the LIBSVM format and
/// kept strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub label: f64,
    pub features: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseDataset {
    pub rows: Vec<SparseRow>,
    pub num_features: usize,
}

impl SparseDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn count_label(&self, label: f64) -> usize {
        self.rows.iter().filter(|r| r.label == label).count()
    }
}

fn parse_label(tok: &str, line: usize) -> Result<f64> {
    match tok {
        "+1" | "1" | "1.0" => Ok(1.0),
        "-1" | "-1.0" => Ok(-1.0),
        // 0/1-encoded files get remapped to -1/+1.
        "0" | "0.0" => Ok(-1.0),
        other => Err(Error::Parse {
            line,
            msg: format!("label {other:?} is not one of +1, -1, 1, 0"),
        }),
    }
}

/// Parses LIBSVM text: one `label idx:val idx:val ...` record per nonempty
/// line, 1-based strictly increasing indices. `num_features` becomes the
/// largest index seen.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<SparseDataset> {
    let mut rows = Vec::new();
    let mut num_features = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let label = parse_label(toks.next().unwrap(), lineno)?;
        let mut features = Vec::new();
        let mut last_idx = 0usize;
        for tok in toks {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected idx:val, got {tok:?}"),
            })?;
            let idx: usize = idx_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad feature index {idx_s:?}"),
            })?;
            let val: f64 = val_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad feature value {val_s:?}"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "feature indices are 1-based".into(),
                });
            }
            if idx <= last_idx {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("feature indices must be strictly increasing (saw {idx} after {last_idx})"),
                });
            }
            last_idx = idx;
            features.push((idx, val));
        }
        num_features = num_features.max(last_idx);
        rows.push(SparseRow { label, features });
    }
    Ok(SparseDataset { rows, num_features })
}

/// Writes the dataset back out in the same format.
pub fn serialize_libsvm<W: Write>(ds: &SparseDataset, mut w: W) -> Result<()> {
    for row in &ds.rows {
        if row.label > 0.0 {
            write!(w, "+1")?;
        } else {
            write!(w, "-1")?;
        }
        for (idx, val) in &row.features {
            write!(w, " {idx}:{val}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Draws `minority_count` rows of the minority class and
/// `ratio * minority_count` of the majority class (without replacement) and
/// shuffles the result; deterministic given the stream. By default the
/// positive class is the minority.
pub fn subsample_unbalanced(
    ds: &SparseDataset,
    minority_count: usize,
    ratio: usize,
    rng: &mut Stream,
) -> Result<SparseDataset> {
    subsample_unbalanced_with(ds, minority_count, ratio, true, rng)
}

pub fn subsample_unbalanced_with(
    ds: &SparseDataset,
    minority_count: usize,
    ratio: usize,
    minority_positive: bool,
    rng: &mut Stream,
) -> Result<SparseDataset> {
    if minority_count == 0 || ratio == 0 {
        return Err(Error::invalid("minority count and ratio must be >= 1"));
    }
    let minority_label = if minority_positive { 1.0 } else { -1.0 };
    let mut minority: Vec<usize> = Vec::new();
    let mut majority: Vec<usize> = Vec::new();
    for (i, row) in ds.rows.iter().enumerate() {
        if row.label == minority_label {
            minority.push(i);
        } else {
            majority.push(i);
        }
    }
    let majority_count = ratio * minority_count;
    if minority.len() < minority_count || majority.len() < majority_count {
        return Err(Error::invalid(format!(
            "dataset has {}/{} rows per class, need {minority_count}/{majority_count}",
            minority.len(),
            majority.len()
        )));
    }
    let mut pick = |pool: &mut Vec<usize>, count: usize| -> Vec<usize> {
        let mut chosen = Vec::with_capacity(count);
        for _ in 0..count {
            let j = crate::rng::uniform_index(rng, pool.len());
            chosen.push(pool.swap_remove(j));
        }
        chosen
    };
    let mut indices = pick(&mut minority, minority_count);
    indices.extend(pick(&mut majority, majority_count));
    // Fisher-Yates shuffle of the combined order.
    for i in (1..indices.len()).rev() {
        let j = crate::rng::uniform_index(rng, i + 1);
        indices.swap(i, j);
    }
    Ok(SparseDataset {
        rows: indices.iter().map(|&i| ds.rows[i].clone()).collect(),
        num_features: ds.num_features,
    })
}

/// The DRO minimax instance over a dataset. `x` has the feature dimension,
/// `y` lives on the n-dimensional probability simplex.
pub struct DroInstance {
    data: SparseDataset,
    reg_weight: f64,
    declared_l: f64,
    declared_sigma: f64,
}

impl DroInstance {
    pub fn new(data: SparseDataset, reg_weight: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("dataset must contain at least one row"));
        }
        if data.num_features == 0 {
            return Err(Error::invalid("dataset must have at least one feature"));
        }
        if !(reg_weight.is_finite() && reg_weight > 0.0) {
            return Err(Error::invalid("regularizer weight must be > 0"));
        }
        // Default declared smoothness: the regularizer contributes 2*reg to
        // the y block; the loss curvature is bounded by the largest squared
        // row norm (|phi'| <= 1, |phi''| <= 1/2, sigmoid curvature <= 1/4).
        let max_row_sq = data
            .rows
            .iter()
            .map(|r| r.features.iter().map(|(_, v)| v * v).sum::<f64>())
            .fold(0.0f64, f64::max);
        let n = data.len() as f64;
        Ok(Self {
            declared_l: 2.0 * reg_weight + n.sqrt() * max_row_sq.max(1.0),
            declared_sigma: 1.0,
            data,
            reg_weight,
        })
    }

    /// Overrides the declared constants used by parameter schedules.
    pub fn with_constants(mut self, l: f64, sigma: f64) -> Self {
        self.declared_l = l;
        self.declared_sigma = sigma;
        self
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }

    pub fn dim(&self) -> usize {
        self.data.num_features
    }

    pub fn dataset(&self) -> &SparseDataset {
        &self.data
    }

    pub fn reg_weight(&self) -> f64 {
        self.reg_weight
    }

    fn margin(&self, x: ArrayView1<f64>, i: usize) -> f64 {
        let row = &self.data.rows[i];
        let mut dot = 0.0;
        for (idx, val) in &row.features {
            dot += x[*idx - 1] * val;
        }
        -row.label * dot
    }

    /// Robust logistic loss of sample `i`:
    /// `phi(log(1 + exp(-z x's)))` with `phi(t) = 2 log(1 + t/2)`.
    pub fn f_i(&self, x: ArrayView1<f64>, i: usize) -> f64 {
        let t = ln_1p_exp(self.margin(x, i));
        2.0 * (1.0 + 0.5 * t).ln()
    }

    /// Gradient of `f_i` with respect to `x`.
    pub fn grad_f_i(&self, x: ArrayView1<f64>, i: usize) -> Array1<f64> {
        let m = self.margin(x, i);
        let t = ln_1p_exp(m);
        // d phi/dt = 1/(1 + t/2); dl/dm = sigmoid(m); dm/dx = -z * s
        let coeff = sigmoid(m) / (1.0 + 0.5 * t);
        let row = &self.data.rows[i];
        let mut g = Array1::zeros(self.dim());
        for (idx, val) in &row.features {
            g[*idx - 1] = coeff * (-row.label) * val;
        }
        g
    }

    /// Regularizer `r(y) = reg * sum((y_i - 1/n)^2)`.
    pub fn r(&self, y: ArrayView1<f64>) -> f64 {
        let c = 1.0 / self.n() as f64;
        self.reg_weight * y.iter().map(|yi| (yi - c) * (yi - c)).sum::<f64>()
    }

    /// Full objective `sum_i y_i f_i(x) - r(y)`.
    pub fn objective(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n() {
            s += y[i] * self.f_i(x, i);
        }
        s - self.r(y)
    }

    /// All per-sample losses at `x`; costs `n` component evaluations.
    pub fn losses(&self, x: ArrayView1<f64>) -> Array1<f64> {
        Array1::from_iter((0..self.n()).map(|i| self.f_i(x, i)))
    }

    /// Exact inner maximizer and envelope value at `x`.
    ///
    /// The inner problem is a concave diagonal quadratic over the simplex;
    /// the KKT system reduces to `y_i = max(0, 1/n + (f_i - lambda)/(2 reg))`
    /// with the scalar multiplier found by bisection.
    pub fn solve_inner_max(&self, x: ArrayView1<f64>) -> Result<(Array1<f64>, f64)> {
        let f = self.losses(x);
        let y = self.solve_inner_max_losses(&f)?;
        let mut phi = -self.r(y.view());
        for i in 0..self.n() {
            phi += y[i] * f[i];
        }
        Ok((y, phi))
    }

    pub(crate) fn solve_inner_max_losses(&self, f: &Array1<f64>) -> Result<Array1<f64>> {
        let n = self.n();
        let c = 1.0 / n as f64;
        let scale = 2.0 * self.reg_weight;
        let y_of = |lambda: f64| -> Array1<f64> {
            Array1::from_iter((0..n).map(|i| (c + (f[i] - lambda) / scale).max(0.0)))
        };
        let sum_of = |lambda: f64| -> f64 { y_of(lambda).sum() };
        let mut lo = f.iter().cloned().fold(f64::INFINITY, f64::min) - scale;
        let mut hi = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + scale;
        if !(sum_of(lo) >= 1.0 && sum_of(hi) <= 1.0) {
            return Err(Error::Internal("inner KKT bisection is not bracketed".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sum_of(mid) >= 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // The bisected multiplier pins the active set; recompute the exact
        // multiplier for that set so the constraint closes to fp precision.
        let probe = y_of(0.5 * (lo + hi));
        let active: Vec<usize> = (0..n).filter(|&i| probe[i] > 0.0).collect();
        let sum_active: f64 = active.iter().map(|&i| c + f[i] / scale).sum();
        let lambda = (sum_active - 1.0) * scale / active.len() as f64;
        Ok(y_of(lambda))
    }

    /// Envelope gradient at `x` through the exact inner maximizer:
    /// `grad phi(x) = sum_i y*_i grad f_i(x)`.
    pub fn grad_phi(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        let (y, _) = self.solve_inner_max(x)?;
        let mut g = Array1::zeros(self.dim());
        for i in 0..self.n() {
            if y[i] > 0.0 {
                g.scaled_add(y[i], &self.grad_f_i(x, i));
            }
        }
        Ok(g)
    }

    /// Envelope value and gradient norm at `x` in one pass, for trace
    /// reporting. The returned query count is the `n` loss evaluations; the
    /// closed-form gradients are reporting-side information and not charged.
    pub fn envelope_report(&self, x: ArrayView1<f64>) -> Result<(f64, f64, u64)> {
        let f = self.losses(x);
        let y = self.solve_inner_max_losses(&f)?;
        let mut phi = -self.r(y.view());
        let mut g = Array1::zeros(self.dim());
        for i in 0..self.n() {
            phi += y[i] * f[i];
            if y[i] > 0.0 {
                g.scaled_add(y[i], &self.grad_f_i(x, i));
            }
        }
        Ok((phi, g.dot(&g).sqrt(), self.n() as u64))
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(t)) without overflow.
fn ln_1p_exp(t: f64) -> f64 {
    if t > 35.0 {
        t
    } else {
        t.exp().ln_1p()
    }
}

/// The component view `F(x, y; i) = n y_i f_i(x) - r(y)`; its uniform
/// average over i is the full objective.
pub fn dro_component(inst: &DroInstance, x: ArrayView1<f64>, y: ArrayView1<f64>, i: usize) -> f64 {
    inst.n() as f64 * y[i] * inst.f_i(x, i) - inst.r(y)
}

impl MinimaxProblem for DroInstance {
    fn d1(&self) -> usize {
        self.dim()
    }

    fn d2(&self) -> usize {
        self.n()
    }

    fn regime(&self) -> Regime {
        Regime::FiniteSum(self.n())
    }

    fn constants(&self) -> ProblemConstants {
        ProblemConstants {
            lipschitz_l: self.declared_l,
            // -r contributes a -2*reg*I Hessian block in y.
            strong_concavity_mu: 2.0 * self.reg_weight,
            variance_sigma: self.declared_sigma,
        }
    }

    fn eval(&self, x: ArrayView1<f64>, y: ArrayView1<f64>, xi: &Sample) -> f64 {
        match xi {
            Sample::Index(i) => dro_component(self, x, y, *i),
            Sample::Draw(_) => f64::NAN,
        }
    }

    fn y_constraint(&self) -> Option<YConstraint> {
        Some(YConstraint::Simplex)
    }

    fn true_grad(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Option<(Array1<f64>, Array1<f64>)> {
        let mut gx = Array1::zeros(self.dim());
        let mut gy = Array1::zeros(self.n());
        let c = 1.0 / self.n() as f64;
        for i in 0..self.n() {
            gx.scaled_add(y[i], &self.grad_f_i(x, i));
            gy[i] = self.f_i(x, i) - 2.0 * self.reg_weight * (y[i] - c);
        }
        Some((gx, gy))
    }

    fn component_grad(
        &self,
        x: ArrayView1<f64>,
        y: ArrayView1<f64>,
        xi: &Sample,
    ) -> Option<(Array1<f64>, Array1<f64>)> {
        let i = xi.index()?;
        let n = self.n() as f64;
        let gx = self.grad_f_i(x, i).mapv(|g| n * y[i] * g);
        let c = 1.0 / n;
        let mut gy = Array1::from_iter(
            (0..self.n()).map(|j| -2.0 * self.reg_weight * (y[j] - c)),
        );
        gy[i] += n * self.f_i(x, i);
        Some((gx, gy))
    }
}

/// Euclidean projection onto the probability simplex by sorting and
/// thresholding. Output sums to one within 1e-12 with nonnegative entries.
pub fn project_simplex(v: ArrayView1<f64>) -> Array1<f64> {
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &vj) in sorted.iter().enumerate() {
        cumsum += vj;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if vj - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    v.mapv(|vi| (vi - theta).max(0.0))
}

/// Tiny synthetic LIBSVM fixture generator: `features` sparse columns,
/// labels correlated with a planted direction so the classes are separable
/// enough to be interesting. Returns the text of the file.
pub fn synthetic_libsvm(
    rows: usize,
    features: usize,
    nnz_per_row: usize,
    rng: &mut Stream,
) -> String {
    use rand::Rng;
    let planted: Vec<f64> = (0..features)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    let mut out = String::new();
    for _ in 0..rows {
        let mut idxs: Vec<usize> = (0..nnz_per_row)
            .map(|_| crate::rng::uniform_index(rng, features) + 1)
            .collect();
        idxs.sort_unstable();
        idxs.dedup();
        let vals: Vec<f64> = idxs
            .iter()
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let score: f64 = idxs
            .iter()
            .zip(&vals)
            .map(|(i, v)| planted[i - 1] * v)
            .sum::<f64>()
            + 0.3 * rng.sample::<f64, _>(rand_distr::StandardNormal);
        let label = if score > 0.0 { "+1" } else { "-1" };
        out.push_str(label);
        for (i, v) in idxs.iter().zip(&vals) {
            out.push_str(&format!(" {}:{:.6}", i, v));
        }
        out.push('\n');
    }
    out
}
