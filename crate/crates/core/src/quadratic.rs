//! Quadratic saddle test problems with closed-form inner maximizers.
//!
//! `f(x, y) = 1/2 x'Px + a'x + x'By - 1/2 y'Cy + b'y` with C positive
//! definite, so `y*(x) = C^{-1}(B'x + b)` and the envelope
//! `phi(x) = f(x, y*(x))` are available exactly. Stochastic components
//! perturb only the linear terms `(a, b)`, which keeps the per-component
//! gradient-Lipschitz constant equal to the deterministic one.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::linalg::{min_eig_spd, spectral_norm_sym, Cholesky};
use crate::problems::{MinimaxProblem, ProblemConstants, Regime, Sample, StochasticObjective};
use crate::rng::{gaussian_vector, Stream};

fn noise_split(payload: &[f64], d1: usize) -> (&[f64], &[f64]) {
    payload.split_at(d1)
}

// Allocation-free kernels for the oracle hot path; estimator batches call
// eval millions of times.
fn dot_s(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn quad_form(m: &Array2<f64>, v: ArrayView1<f64>) -> f64 {
    match (m.as_slice(), v.as_slice()) {
        (Some(ms), Some(vs)) => {
            let n = vs.len();
            let mut acc = 0.0;
            for (i, vi) in vs.iter().enumerate() {
                acc += vi * dot_s(&ms[i * n..(i + 1) * n], vs);
            }
            acc
        }
        _ => v.dot(&m.dot(&v)),
    }
}

fn bilinear(x: ArrayView1<f64>, m: &Array2<f64>, y: ArrayView1<f64>) -> f64 {
    match (m.as_slice(), x.as_slice(), y.as_slice()) {
        (Some(ms), Some(xs), Some(ys)) => {
            let cols = ys.len();
            let mut acc = 0.0;
            for (i, xi) in xs.iter().enumerate() {
                acc += xi * dot_s(&ms[i * cols..(i + 1) * cols], ys);
            }
            acc
        }
        _ => x.dot(&m.dot(&y)),
    }
}

fn dot_v(a: &Array1<f64>, v: ArrayView1<f64>) -> f64 {
    match (a.as_slice(), v.as_slice()) {
        (Some(s1), Some(s2)) => dot_s(s1, s2),
        _ => a.dot(&v),
    }
}

/// Quadratic minimax test problem. See the module docs for the functional
/// form; `sigma` is realized by scaling a standard Gaussian perturbation of
/// the linear terms to `sigma / sqrt(d1 + d2)` per coordinate.
pub struct QuadraticSaddle {
    p: Array2<f64>,
    b_mat: Array2<f64>,
    c: Array2<f64>,
    a: Array1<f64>,
    b: Array1<f64>,
    sigma: f64,
    regime: Regime,
    chol_c: Cholesky,
    lipschitz_l: f64,
    mu: f64,
    /// Pre-materialized noise rows for the finite-sum regime.
    noise: Vec<Arc<[f64]>>,
    /// Empirical mean of the materialized noise; the finite-sum average
    /// objective sees shifted linear terms.
    noise_mean: Array1<f64>,
    noise_scale: f64,
}

impl QuadraticSaddle {
    /// Builds an instance from explicit matrices. `c` must be symmetric
    /// positive definite. The Lipschitz constant is the spectral norm of the
    /// full quadratic form and `mu` the smallest eigenvalue of `c`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        p: Array2<f64>,
        b_mat: Array2<f64>,
        c: Array2<f64>,
        a: Array1<f64>,
        b: Array1<f64>,
        sigma: f64,
        regime: Regime,
        noise_rng: &mut Stream,
    ) -> Result<Self> {
        let d1 = a.len();
        let d2 = b.len();
        if d1 == 0 || d2 == 0 {
            return Err(Error::invalid("dimensions must be >= 1"));
        }
        if p.dim() != (d1, d1) || b_mat.dim() != (d1, d2) || c.dim() != (d2, d2) {
            return Err(Error::invalid("matrix dimensions do not match (d1, d2)"));
        }
        if let Regime::FiniteSum(n) = regime {
            if n == 0 {
                return Err(Error::invalid("finite-sum component count must be >= 1"));
            }
        }
        let chol_c = Cholesky::new(c.view())?;
        let mu = min_eig_spd(c.view(), 600)?;

        // Spectral norm of the symmetric block matrix [[P, B], [B', -C]].
        let d = d1 + d2;
        let mut j = Array2::<f64>::zeros((d, d));
        for i in 0..d1 {
            for k in 0..d1 {
                j[(i, k)] = p[(i, k)];
            }
            for k in 0..d2 {
                j[(i, d1 + k)] = b_mat[(i, k)];
                j[(d1 + k, i)] = b_mat[(i, k)];
            }
        }
        for i in 0..d2 {
            for k in 0..d2 {
                j[(d1 + i, d1 + k)] = -c[(i, k)];
            }
        }
        let lipschitz_l = spectral_norm_sym(j.view(), 600);

        let noise_scale = sigma / (d as f64).sqrt();
        let (noise, noise_mean) = match regime {
            Regime::FiniteSum(n) if sigma > 0.0 => {
                let mut mean = Array1::<f64>::zeros(d);
                let rows: Vec<Arc<[f64]>> = (0..n)
                    .map(|_| {
                        let z = gaussian_vector(noise_rng, d) * noise_scale;
                        mean += &z;
                        Arc::from(z.to_vec().into_boxed_slice())
                    })
                    .collect();
                mean /= n as f64;
                (rows, mean)
            }
            Regime::FiniteSum(n) => {
                let zero: Arc<[f64]> = Arc::from(vec![0.0; d].into_boxed_slice());
                ((0..n).map(|_| zero.clone()).collect(), Array1::zeros(d))
            }
            Regime::Online => (Vec::new(), Array1::zeros(d)),
        };

        Ok(Self {
            p,
            b_mat,
            c,
            a,
            b,
            sigma,
            regime,
            chol_c,
            lipschitz_l,
            mu,
            noise,
            noise_mean,
            noise_scale,
        })
    }

    /// Deterministic noiseless instance.
    pub fn deterministic(
        p: Array2<f64>,
        b_mat: Array2<f64>,
        c: Array2<f64>,
        a: Array1<f64>,
        b: Array1<f64>,
    ) -> Result<Self> {
        let mut rng = crate::rng::substream(0, "unused");
        Self::new(p, b_mat, c, a, b, 0.0, Regime::FiniteSum(1), &mut rng)
    }

    /// Generates a coupled instance with exact Lipschitz constant `l` and
    /// strong-concavity modulus `l / kappa`.
    ///
    /// The construction uses diagonal blocks `P = p_frac*l*I`,
    /// `B = rho_frac*l*I` and a diagonal `C` whose largest entry is chosen so
    /// that the most negative eigenvalue of the full quadratic form is
    /// exactly `-l`; every other eigenvalue then has magnitude below `l`.
    pub fn generate(
        d1: usize,
        d2: usize,
        kappa: f64,
        l: f64,
        sigma: f64,
        regime: Regime,
        rng: &mut Stream,
    ) -> Result<Self> {
        if kappa < 1.0 || l <= 0.0 {
            return Err(Error::invalid("need kappa >= 1 and l > 0"));
        }
        let mu = l / kappa;
        let p_frac = 0.8;
        let rho_frac = 0.3;
        let p_diag = p_frac * l;
        let rho = rho_frac * l;
        // c_max solves (p - c)/2 - sqrt(((p + c)/2)^2 + rho^2) = -l.
        let c_max = (l * l + l * p_diag - rho * rho) / (l + p_diag);
        let (coupled, c_diag, rho_used) = if c_max >= mu {
            let k = d1.min(d2);
            let c_diag: Vec<f64> = (0..d2)
                .map(|j| {
                    if d2 == 1 {
                        c_max
                    } else {
                        mu + (c_max - mu) * (j as f64) / ((d2 - 1) as f64)
                    }
                })
                .collect();
            (k, c_diag, rho)
        } else {
            // Nearly unit condition number: fall back to a decoupled
            // instance whose constants are still exact.
            let c_diag: Vec<f64> = (0..d2)
                .map(|j| {
                    if d2 == 1 {
                        l
                    } else {
                        mu + (l - mu) * (j as f64) / ((d2 - 1) as f64)
                    }
                })
                .collect();
            (0, c_diag, 0.0)
        };

        let mut p = Array2::<f64>::zeros((d1, d1));
        for i in 0..d1 {
            p[(i, i)] = if coupled > 0 { p_diag } else { 0.0 };
        }
        let mut b_mat = Array2::<f64>::zeros((d1, d2));
        for i in 0..coupled {
            b_mat[(i, i)] = rho_used;
        }
        let mut c = Array2::<f64>::zeros((d2, d2));
        for (j, cj) in c_diag.iter().enumerate() {
            c[(j, j)] = *cj;
        }
        let a = gaussian_vector(rng, d1);
        let b = gaussian_vector(rng, d2);
        let mut inst = Self::new(p, b_mat, c, a, b, sigma, regime, rng)?;
        // The construction pins the constants; overwrite the iterative
        // estimates with the exact values.
        inst.lipschitz_l = l;
        inst.mu = mu;
        Ok(inst)
    }

    fn effective_a(&self) -> Array1<f64> {
        if self.noise_mean.len() == self.d1() + self.d2() {
            &self.a + &self.noise_mean.slice(ndarray::s![..self.d1()])
        } else {
            self.a.clone()
        }
    }

    fn effective_b(&self) -> Array1<f64> {
        if self.noise_mean.len() == self.d1() + self.d2() {
            &self.b + &self.noise_mean.slice(ndarray::s![self.d1()..])
        } else {
            self.b.clone()
        }
    }

    /// Inner maximizer `y*(x) = C^{-1}(B'x + b)` of the averaged objective.
    pub fn y_star(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let rhs = &self.b_mat.t().dot(&x) + &self.effective_b();
        self.chol_c.solve(rhs.view())
    }

    /// Envelope value and gradient: `phi(x) = f(x, y*(x))`,
    /// `grad phi(x) = Px + a + B y*(x)`.
    pub fn phi_and_grad(&self, x: ArrayView1<f64>) -> (f64, Array1<f64>) {
        let ys = self.y_star(x);
        let phi = self.mean_value(x, ys.view());
        let grad = &(&self.p.dot(&x) + &self.effective_a()) + &self.b_mat.dot(&ys);
        (phi, grad)
    }

    /// Value of the averaged objective `f(x, y)`.
    pub fn mean_value(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
        0.5 * x.dot(&self.p.dot(&x)) + self.effective_a().dot(&x) + x.dot(&self.b_mat.dot(&y))
            - 0.5 * y.dot(&self.c.dot(&y))
            + self.effective_b().dot(&y)
    }

    /// Minimizer of `phi` when the envelope Hessian `P + B C^{-1} B'` is
    /// positive definite; used to compute optimality gaps for schedules.
    pub fn phi_minimum(&self) -> Option<(Array1<f64>, f64)> {
        let d1 = self.d1();
        let mut h = self.p.clone();
        for j in 0..self.d2() {
            // rank-one style accumulation of B C^{-1} B'
            let mut e = Array1::<f64>::zeros(self.d2());
            e[j] = 1.0;
            let col = self.chol_c.solve(e.view());
            let bc = self.b_mat.dot(&col);
            for i in 0..d1 {
                for k in 0..d1 {
                    h[(i, k)] += bc[i] * self.b_mat[(k, j)];
                }
            }
        }
        let chol = Cholesky::new(h.view()).ok()?;
        // grad phi(x) = P x + a + B C^{-1}(B'x + b) = H x + a + B C^{-1} b
        let rhs = &self.effective_a() + &self.b_mat.dot(&self.chol_c.solve(self.effective_b().view()));
        let x_star = chol.solve(rhs.view()) * -1.0;
        let (phi, _) = self.phi_and_grad(x_star.view());
        Some((x_star, phi))
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn noise_for<'s>(&'s self, xi: &'s Sample) -> Option<&'s [f64]> {
        match xi {
            Sample::Index(i) => {
                if self.noise.is_empty() {
                    None
                } else {
                    Some(&self.noise[*i])
                }
            }
            Sample::Draw(payload) => Some(payload),
        }
    }
}

impl MinimaxProblem for QuadraticSaddle {
    fn d1(&self) -> usize {
        self.a.len()
    }

    fn d2(&self) -> usize {
        self.b.len()
    }

    fn regime(&self) -> Regime {
        self.regime
    }

    fn constants(&self) -> ProblemConstants {
        ProblemConstants {
            lipschitz_l: self.lipschitz_l,
            strong_concavity_mu: self.mu,
            variance_sigma: self.sigma,
        }
    }

    fn eval(&self, x: ArrayView1<f64>, y: ArrayView1<f64>, xi: &Sample) -> f64 {
        let base = 0.5 * quad_form(&self.p, x) + dot_v(&self.a, x) + bilinear(x, &self.b_mat, y)
            - 0.5 * quad_form(&self.c, y)
            + dot_v(&self.b, y);
        match self.noise_for(xi) {
            Some(payload) => {
                let (ea, eb) = noise_split(payload, self.d1());
                let mut s = base;
                for (xi_, ei) in x.iter().zip(ea) {
                    s += xi_ * ei;
                }
                for (yi, ei) in y.iter().zip(eb) {
                    s += yi * ei;
                }
                s
            }
            None => base,
        }
    }

    fn draw(&self, rng: &mut Stream) -> Sample {
        match self.regime {
            Regime::FiniteSum(n) => Sample::Index(crate::rng::uniform_index(rng, n)),
            Regime::Online => {
                let d = self.d1() + self.d2();
                if self.sigma == 0.0 {
                    return Sample::Draw(Arc::from(vec![0.0; d].into_boxed_slice()));
                }
                let z = gaussian_vector(rng, d) * self.noise_scale;
                Sample::Draw(Arc::from(z.to_vec().into_boxed_slice()))
            }
        }
    }

    fn true_grad(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Option<(Array1<f64>, Array1<f64>)> {
        let gx = &(&self.p.dot(&x) + &self.effective_a()) + &self.b_mat.dot(&y);
        let gy = &(&self.b_mat.t().dot(&x) - &self.c.dot(&y)) + &self.effective_b();
        Some((gx, gy))
    }

    fn component_grad(
        &self,
        x: ArrayView1<f64>,
        y: ArrayView1<f64>,
        xi: &Sample,
    ) -> Option<(Array1<f64>, Array1<f64>)> {
        let mut gx = &self.p.dot(&x) + &self.a;
        gx += &self.b_mat.dot(&y);
        let mut gy = &self.b_mat.t().dot(&x) - &self.c.dot(&y);
        gy += &self.b;
        if let Some(payload) = self.noise_for(xi) {
            let (ea, eb) = noise_split(payload, self.d1());
            for (g, e) in gx.iter_mut().zip(ea) {
                *g += e;
            }
            for (g, e) in gy.iter_mut().zip(eb) {
                *g += e;
            }
        }
        Some((gx, gy))
    }
}

/// Envelope value and gradient of a quadratic saddle instance.
///
/// Fails only if the instance could not have been constructed (C singular),
/// so this is a thin wrapper kept for symmetry with the solvers' needs.
pub fn quad_phi_and_grad(q: &QuadraticSaddle, x: ArrayView1<f64>) -> (f64, Array1<f64>) {
    q.phi_and_grad(x)
}

/// Strongly convex quadratic minimization objective
/// `p(w) = 1/2 w'Hw + c'w` with Gaussian perturbation of the linear term.
pub struct QuadraticObjective {
    h: Array2<f64>,
    c: Array1<f64>,
    sigma: f64,
    regime: Regime,
    noise: Vec<Arc<[f64]>>,
    noise_mean: Array1<f64>,
    noise_scale: f64,
}

impl QuadraticObjective {
    pub fn new(
        h: Array2<f64>,
        c: Array1<f64>,
        sigma: f64,
        regime: Regime,
        noise_rng: &mut Stream,
    ) -> Result<Self> {
        let d = c.len();
        if h.dim() != (d, d) {
            return Err(Error::invalid("H must be d x d"));
        }
        let noise_scale = sigma / (d as f64).sqrt();
        let (noise, noise_mean) = match regime {
            Regime::FiniteSum(n) if sigma > 0.0 => {
                let mut mean = Array1::<f64>::zeros(d);
                let rows: Vec<Arc<[f64]>> = (0..n)
                    .map(|_| {
                        let z = gaussian_vector(noise_rng, d) * noise_scale;
                        mean += &z;
                        Arc::from(z.to_vec().into_boxed_slice())
                    })
                    .collect();
                mean /= n as f64;
                (rows, mean)
            }
            Regime::FiniteSum(n) => {
                let zero: Arc<[f64]> = Arc::from(vec![0.0; d].into_boxed_slice());
                ((0..n).map(|_| zero.clone()).collect(), Array1::zeros(d))
            }
            Regime::Online => (Vec::new(), Array1::zeros(d)),
        };
        Ok(Self {
            h,
            c,
            sigma,
            regime,
            noise,
            noise_mean,
            noise_scale,
        })
    }

    /// Gradient of the averaged objective.
    pub fn grad(&self, w: ArrayView1<f64>) -> Array1<f64> {
        &(&self.h.dot(&w) + &self.c) + &self.noise_mean
    }

    pub fn value(&self, w: ArrayView1<f64>) -> f64 {
        0.5 * w.dot(&self.h.dot(&w)) + self.c.dot(&w) + self.noise_mean.dot(&w)
    }
}

impl StochasticObjective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn regime(&self) -> Regime {
        self.regime
    }

    fn eval(&self, w: ArrayView1<f64>, xi: &Sample) -> f64 {
        let base = 0.5 * quad_form(&self.h, w) + dot_v(&self.c, w);
        let payload: Option<&[f64]> = match xi {
            Sample::Index(i) => {
                if self.noise.is_empty() {
                    None
                } else {
                    Some(&self.noise[*i])
                }
            }
            Sample::Draw(p) => Some(p),
        };
        match payload {
            Some(eps) => {
                let mut s = base;
                for (wi, ei) in w.iter().zip(eps) {
                    s += wi * ei;
                }
                s
            }
            None => base,
        }
    }

    fn draw(&self, rng: &mut Stream) -> Sample {
        match self.regime {
            Regime::FiniteSum(n) => Sample::Index(crate::rng::uniform_index(rng, n)),
            Regime::Online => {
                let d = self.dim();
                if self.sigma == 0.0 {
                    return Sample::Draw(Arc::from(vec![0.0; d].into_boxed_slice()));
                }
                let z = gaussian_vector(rng, d) * self.noise_scale;
                Sample::Draw(Arc::from(z.to_vec().into_boxed_slice()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{sample_batch, tracking_error, estimation_error};
    use crate::rng::substream;
    use ndarray::array;

    fn identity_instance() -> QuadraticSaddle {
        QuadraticSaddle::deterministic(
            Array2::zeros((2, 2)),
            Array2::eye(2),
            Array2::eye(2),
            Array1::zeros(2),
            Array1::zeros(2),
        )
        .unwrap()
    }

    #[test]
    fn phi_of_identity_coupling_is_half_norm_sq() {
        // P=0, a=0, b=0, B=I, C=I: y*(x) = x and phi(x) = ||x||^2 / 2.
        let q = identity_instance();
        let x = array![1.0, 2.0];
        let (phi, grad) = quad_phi_and_grad(&q, x.view());
        assert!((phi - 2.5).abs() < 1e-14);
        assert!((grad[0] - 1.0).abs() < 1e-14);
        assert!((grad[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn phi_constant_when_x_decoupled() {
        let mut rng = substream(3, "instance");
        let q = QuadraticSaddle::new(
            Array2::zeros((2, 3)).dot(&Array2::zeros((3, 2))), // 2x2 zeros
            Array2::zeros((2, 3)),
            Array2::eye(3) * 0.7,
            Array1::zeros(2),
            array![0.3, -0.1, 0.2],
            0.0,
            Regime::Online,
            &mut rng,
        )
        .unwrap();
        for t in 0..5 {
            let x = array![t as f64, -(t as f64) * 0.5];
            let (_, grad) = q.phi_and_grad(x.view());
            assert!(grad.iter().all(|g| g.abs() < 1e-14));
        }
    }

    #[test]
    fn singular_c_is_rejected() {
        let r = QuadraticSaddle::deterministic(
            Array2::zeros((2, 2)),
            Array2::zeros((2, 2)),
            Array2::zeros((2, 2)),
            Array1::zeros(2),
            Array1::zeros(2),
        );
        assert!(matches!(r, Err(Error::PreconditionViolation(_))));
    }

    #[test]
    fn grad_phi_matches_central_difference() {
        let mut rng = substream(11, "instance");
        let q = QuadraticSaddle::generate(3, 3, 4.0, 1.3, 0.0, Regime::Online, &mut rng).unwrap();
        let x = gaussian_vector(&mut rng, 3);
        let (_, grad) = q.phi_and_grad(x.view());
        let h = 1e-5;
        for j in 0..3 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let (fp, _) = q.phi_and_grad(xp.view());
            let (fm, _) = q.phi_and_grad(xm.view());
            let fd = (fp - fm) / (2.0 * h);
            assert!(
                (fd - grad[j]).abs() <= 1e-6 * grad[j].abs().max(1.0),
                "coordinate {j}: fd={fd} analytic={}",
                grad[j]
            );
        }
    }

    #[test]
    fn tracking_error_vanishes_at_maximizer() {
        let mut rng = substream(5, "instance");
        let q = QuadraticSaddle::generate(2, 2, 3.0, 1.0, 0.0, Regime::Online, &mut rng).unwrap();
        let x = array![0.4, -1.0];
        let ys = q.y_star(x.view());
        assert!(tracking_error(&q, x.view(), ys.view()).unwrap() < 1e-20);
    }

    #[test]
    fn estimation_error_identity_and_brute_force() {
        let mut rng = substream(6, "instance");
        let q = QuadraticSaddle::generate(2, 2, 2.0, 1.0, 0.0, Regime::Online, &mut rng).unwrap();
        let x = array![0.5, 0.2];
        let y = array![-0.3, 0.9];
        let (gx, gy) = q.true_grad(x.view(), y.view()).unwrap();
        assert!(estimation_error(&q, x.view(), y.view(), gx.view(), gy.view()).unwrap() < 1e-28);

        let v = array![0.1, 0.2];
        let u = array![-0.5, 0.25];
        let got = estimation_error(&q, x.view(), y.view(), v.view(), u.view()).unwrap();
        let mut want = 0.0;
        for i in 0..2 {
            want += (v[i] - gx[i]).powi(2) + (u[i] - gy[i]).powi(2);
        }
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn diagnostics_require_true_grad() {
        struct Opaque;
        impl MinimaxProblem for Opaque {
            fn d1(&self) -> usize {
                1
            }
            fn d2(&self) -> usize {
                1
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
            fn eval(&self, _: ArrayView1<f64>, _: ArrayView1<f64>, _: &Sample) -> f64 {
                0.0
            }
        }
        let e = tracking_error(&Opaque, array![0.0].view(), array![0.0].view());
        assert!(matches!(e, Err(Error::UnsupportedDiagnostic(_))));
    }

    #[test]
    fn finite_sum_component_average_matches_true_grad() {
        let mut rng = substream(9, "instance");
        let n = 17;
        let q = QuadraticSaddle::generate(3, 2, 5.0, 1.0, 0.7, Regime::FiniteSum(n), &mut rng)
            .unwrap();
        let x = gaussian_vector(&mut rng, 3);
        let y = gaussian_vector(&mut rng, 2);
        let mut sx = Array1::<f64>::zeros(3);
        let mut sy = Array1::<f64>::zeros(2);
        for i in 0..n {
            let (gx, gy) = q
                .component_grad(x.view(), y.view(), &Sample::Index(i))
                .unwrap();
            sx += &gx;
            sy += &gy;
        }
        sx /= n as f64;
        sy /= n as f64;
        let (tx, ty) = q.true_grad(x.view(), y.view()).unwrap();
        assert!((&sx - &tx).iter().all(|e| e.abs() < 1e-12));
        assert!((&sy - &ty).iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn inner_problem_is_strongly_concave() {
        let mut rng = substream(12, "instance");
        let q = QuadraticSaddle::generate(4, 4, 5.0, 1.0, 0.0, Regime::Online, &mut rng).unwrap();
        let mut draw = substream(13, "points");
        for _ in 0..10 {
            let x = gaussian_vector(&mut draw, 4);
            let ys = q.y_star(x.view());
            let best = q.mean_value(x.view(), ys.view());
            for _ in 0..100 {
                let y = gaussian_vector(&mut draw, 4) * 2.0;
                assert!(q.mean_value(x.view(), y.view()) <= best + 1e-12);
            }
        }
    }

    #[test]
    fn sample_batches_are_deterministic_per_seed() {
        let mut rng = substream(21, "instance");
        let q = QuadraticSaddle::generate(2, 2, 2.0, 1.0, 0.3, Regime::FiniteSum(5), &mut rng)
            .unwrap();
        let batch1: Vec<usize> = sample_batch(&q, 8, &mut substream(42, "s"))
            .unwrap()
            .iter()
            .map(|s| s.index().unwrap())
            .collect();
        let batch2: Vec<usize> = sample_batch(&q, 8, &mut substream(42, "s"))
            .unwrap()
            .iter()
            .map(|s| s.index().unwrap())
            .collect();
        assert_eq!(batch1, batch2);
    }

    #[test]
    fn single_component_batches_hit_only_index_zero() {
        let mut rng = substream(2, "instance");
        let q = QuadraticSaddle::generate(2, 2, 2.0, 1.0, 0.0, Regime::FiniteSum(1), &mut rng)
            .unwrap();
        let batch = sample_batch(&q, 3, &mut substream(1, "s")).unwrap();
        assert!(batch.iter().all(|s| s.index() == Some(0)));
        assert!(sample_batch(&q, 0, &mut substream(1, "s")).is_err());
    }

    #[test]
    fn index_frequencies_are_uniform() {
        let mut rng = substream(77, "instance");
        let q = QuadraticSaddle::generate(2, 2, 2.0, 1.0, 0.0, Regime::FiniteSum(4), &mut rng)
            .unwrap();
        let n = 100_000;
        let batch = sample_batch(&q, n, &mut substream(4242, "s")).unwrap();
        let mut counts = [0usize; 4];
        for s in &batch {
            counts[s.index().unwrap()] += 1;
        }
        for c in counts {
            let freq = c as f64 / n as f64;
            assert!((freq - 0.25).abs() < 0.01, "frequency {freq}");
        }
    }

    #[test]
    fn phi_minimum_is_stationary_and_minimal() {
        let mut rng = substream(33, "instance");
        let q = QuadraticSaddle::generate(5, 4, 4.0, 1.0, 0.2, Regime::FiniteSum(7), &mut rng)
            .unwrap();
        let (x_star, phi_min) = q.phi_minimum().unwrap();
        let (_, grad) = q.phi_and_grad(x_star.view());
        assert!(grad.iter().all(|g| g.abs() < 1e-10), "{grad:?}");
        for _ in 0..50 {
            let x = &x_star + &gaussian_vector(&mut rng, 5);
            let (phi, _) = q.phi_and_grad(x.view());
            assert!(phi >= phi_min - 1e-12);
        }
    }

    #[test]
    fn generated_constants_are_exact() {
        let mut rng = substream(30, "instance");
        let q = QuadraticSaddle::generate(10, 10, 5.0, 1.0, 0.0, Regime::Online, &mut rng).unwrap();
        let c = q.constants();
        assert!((c.lipschitz_l - 1.0).abs() < 1e-12);
        assert!((c.strong_concavity_mu - 0.2).abs() < 1e-12);
        // Cross-check against the iterative estimates on the raw matrices.
        let mut j = Array2::<f64>::zeros((20, 20));
        for i in 0..10 {
            for k in 0..10 {
                j[(i, k)] = q.p[(i, k)];
                j[(10 + i, 10 + k)] = -q.c[(i, k)];
            }
            for k in 0..10 {
                j[(i, 10 + k)] = q.b_mat[(i, k)];
                j[(10 + k, i)] = q.b_mat[(i, k)];
            }
        }
        assert!((spectral_norm_sym(j.view(), 2000) - 1.0).abs() < 1e-6);
        assert!((min_eig_spd(q.c.view(), 2000).unwrap() - 0.2).abs() < 1e-9);
    }
}
