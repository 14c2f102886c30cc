//! Conditional maximum likelihood with analytic scores and Hessians.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, ObservationSeries, OrderedChoiceSpec, PoissonLink, PoissonSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Convergence threshold on the sup-norm of the score.
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { max_iter: 200, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta: Vec<f64>,
    pub loglik: f64,
    pub score: Vec<f64>,
    /// Observed information (negative Hessian) at `theta`.
    pub information: DMatrix<f64>,
    /// From the inverse observed information; NaN when it is not positive definite.
    pub std_errors: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Order {
    Value,
    Gradient,
    Hessian,
}

struct Eval {
    loglik: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

fn evaluate(spec: &ModelSpec, theta: &[f64], series: &ObservationSeries, order: Order) -> Result<Eval> {
    spec.check_series(series)?;
    spec.validate(theta)?;
    let d = spec.n_params();
    let mut out = Eval {
        loglik: 0.0,
        grad: DVector::zeros(if order >= Order::Gradient { d } else { 0 }),
        hess: DMatrix::zeros(if order >= Order::Hessian { d } else { 0 }, if order >= Order::Hessian { d } else { 0 }),
    };
    match spec {
        ModelSpec::Ordered(s) => ordered_terms(s, theta, series, order, &mut out)?,
        ModelSpec::Poisson(s) => poisson_terms(s, theta, series, order, &mut out)?,
    }
    Ok(out)
}

fn ordered_terms(
    s: &OrderedChoiceSpec,
    theta: &[f64],
    series: &ObservationSeries,
    order: Order,
    out: &mut Eval,
) -> Result<()> {
    let params = s.split(theta)?;
    let d = s.n_params();
    let top = s.categories;
    let tau0 = s.tau_offset();
    let mut da = DVector::zeros(d);
    let mut db = DVector::zeros(d);
    for t in 0..series.len() {
        let x = series.x_row(t);
        let lag = series.lag(t);
        let eta = s.index(&params, &x, lag)?;
        let k = series.y()[t];
        let a = s.threshold(&params, k - 1) - eta;
        let b = s.threshold(&params, k) - eta;
        let f = s.link.interval(a, b);
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::InvalidLikelihood { t: t + 1 });
        }
        out.loglik += f.ln();
        if order == Order::Value {
            continue;
        }
        // ∂a and ∂b: minus the index gradient, plus the own threshold.
        let di = s.index_gradient(&x, lag);
        da.fill(0.0);
        db.fill(0.0);
        if k > 1 {
            for j in 0..d {
                da[j] = -di[j];
            }
            da[tau0 + k as usize - 2] += 1.0;
        }
        if k < top {
            for j in 0..d {
                db[j] = -di[j];
            }
            db[tau0 + k as usize - 1] += 1.0;
        }
        let (pa, pb) = (s.link.pdf(a), s.link.pdf(b));
        let g = (&db * pb - &da * pa) / f;
        out.grad += &g;
        if order == Order::Hessian {
            let (sa, sb) = (s.link.pdf_slope(a), s.link.pdf_slope(b));
            out.hess += (&db * db.transpose() * sb - &da * da.transpose() * sa) / f - &g * g.transpose();
        }
    }
    Ok(())
}

fn poisson_terms(
    s: &PoissonSpec,
    theta: &[f64],
    series: &ObservationSeries,
    order: Order,
    out: &mut Eval,
) -> Result<()> {
    let path = ModelSpec::poisson_path(s, theta, series, order == Order::Hessian)?;
    let d = s.n_params();
    for (t, &lam) in path.lambda.iter().enumerate() {
        let y = f64::from(series.y()[t] - 1);
        let lp = y * lam.ln() - lam - statrs::function::gamma::ln_gamma(y + 1.0);
        if !lp.is_finite() {
            return Err(Error::InvalidLikelihood { t: t + 1 });
        }
        out.loglik += lp;
        if order == Order::Value {
            continue;
        }
        let w = y / lam - 1.0;
        let g = path.grad_at(t);
        for (acc, gi) in out.grad.iter_mut().zip(g) {
            *acc += w * gi;
        }
        if order == Order::Hessian {
            let h = path.hess_at(t);
            let c = y / (lam * lam);
            for i in 0..d {
                for j in 0..d {
                    out.hess[(i, j)] += w * h[i * d + j] - c * g[i] * g[j];
                }
            }
        }
    }
    Ok(())
}

/// `Σ_t log f_θ(Y_t | Ω_t)`.
pub fn loglik(spec: &ModelSpec, theta: &[f64], series: &ObservationSeries) -> Result<f64> {
    Ok(evaluate(spec, theta, series, Order::Value)?.loglik)
}

/// `Σ_t s_t(Y_t)` with `s_t = ḟ_t / f_t`.
pub fn score(spec: &ModelSpec, theta: &[f64], series: &ObservationSeries) -> Result<Vec<f64>> {
    Ok(evaluate(spec, theta, series, Order::Gradient)?.grad.iter().copied().collect())
}

/// Observed information: the negative Hessian of the log-likelihood.
pub fn information(spec: &ModelSpec, theta: &[f64], series: &ObservationSeries) -> Result<DMatrix<f64>> {
    Ok(-evaluate(spec, theta, series, Order::Hessian)?.hess)
}

/// Conditional expected information `Σ_t Σ_k ḟ_t(k) ḟ_t(k)' / f_t(k)`.
pub fn expected_information(spec: &ModelSpec, theta: &[f64], series: &ObservationSeries) -> Result<DMatrix<f64>> {
    let d = spec.n_params();
    let mut info = DMatrix::zeros(d, d);
    for jet in spec.jets(theta, series)? {
        for k in 1..=jet.law.top() {
            let g = DVector::from_vec(jet.pmf_grad(k));
            info += &g * g.transpose() / jet.law.pmf(k);
        }
    }
    Ok(info)
}

/// Map between the constrained parameter and an unconstrained vector.
#[derive(Debug, Clone, Copy)]
enum Reparam {
    /// Thresholds as `τ₁` followed by log-gaps.
    Thresholds { offset: usize, count: usize },
    /// `α₀ = softplus(z₀)`, `(α₁, ρ) = (e^{z₁}, e^{z₂}) / (1 + e^{z₁} + e^{z₂})`.
    IdentityAr,
    Identity,
}

impl Reparam {
    fn for_spec(spec: &ModelSpec) -> Self {
        match spec {
            ModelSpec::Ordered(s) => Reparam::Thresholds { offset: s.tau_offset(), count: s.categories as usize - 1 },
            ModelSpec::Poisson(s) if s.link == PoissonLink::IdentityAr => Reparam::IdentityAr,
            ModelSpec::Poisson(_) => Reparam::Identity,
        }
    }

    fn to_free(self, theta: &[f64]) -> Vec<f64> {
        let mut z = theta.to_vec();
        match self {
            Reparam::Thresholds { offset, count } => {
                for i in 1..count {
                    z[offset + i] = (theta[offset + i] - theta[offset + i - 1]).ln();
                }
            }
            Reparam::IdentityAr => {
                // softplus⁻¹(a) = a + ln(1 - e^{-a})
                z[0] = theta[0] + (-(-theta[0]).exp_m1()).ln();
                let rest = 1.0 - theta[1] - theta[2];
                z[1] = (theta[1] / rest).ln();
                z[2] = (theta[2] / rest).ln();
            }
            Reparam::Identity => {}
        }
        z
    }

    fn to_theta(self, z: &[f64]) -> Vec<f64> {
        let mut theta = z.to_vec();
        match self {
            Reparam::Thresholds { offset, count } => {
                for i in 1..count {
                    theta[offset + i] = theta[offset + i - 1] + z[offset + i].exp();
                }
            }
            Reparam::IdentityAr => {
                theta[0] = softplus(z[0]);
                let (e1, e2) = (z[1].exp(), z[2].exp());
                let den = 1.0 + e1 + e2;
                theta[1] = e1 / den;
                theta[2] = e2 / den;
            }
            Reparam::Identity => {}
        }
        theta
    }

    /// `∂θ/∂z`.
    fn jacobian(self, z: &[f64]) -> DMatrix<f64> {
        let d = z.len();
        let mut j = DMatrix::identity(d, d);
        match self {
            Reparam::Thresholds { offset, count } => {
                for k in 1..count {
                    j[(offset + k, offset)] = 1.0;
                    for i in 1..=k {
                        j[(offset + k, offset + i)] = z[offset + i].exp();
                    }
                }
            }
            Reparam::IdentityAr => {
                j[(0, 0)] = 1.0 / (1.0 + (-z[0]).exp());
                let (e1, e2) = (z[1].exp(), z[2].exp());
                let den = 1.0 + e1 + e2;
                let (p1, p2) = (e1 / den, e2 / den);
                j[(1, 1)] = p1 * (1.0 - p1);
                j[(1, 2)] = -p1 * p2;
                j[(2, 1)] = -p1 * p2;
                j[(2, 2)] = p2 * (1.0 - p2);
            }
            Reparam::Identity => {}
        }
        j
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Smallest to largest eigenvalue ratio of the centered regressor cross-product.
fn check_rank(columns: &[Vec<f64>]) -> Result<()> {
    let p = columns.len();
    if p == 0 {
        return Ok(());
    }
    let n = columns[0].len() as f64;
    let centered: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let m = c.iter().sum::<f64>() / n;
            c.iter().map(|v| v - m).collect()
        })
        .collect();
    let gram = DMatrix::from_fn(p, p, |i, j| centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum::<f64>() / n);
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let hi = eig.max();
    let lo = eig.min();
    if !(hi > 0.0) || lo <= 1e-10 * hi {
        return Err(Error::RankDeficient(
            "regressors are constant or collinear once the thresholds absorb the location".into(),
        ));
    }
    Ok(())
}

fn ordered_start(s: &OrderedChoiceSpec, series: &ObservationSeries) -> Result<Vec<f64>> {
    let k = s.categories;
    let n = series.len() as f64;
    let mut counts = vec![0usize; k as usize];
    for &y in series.y() {
        counts[y as usize - 1] += 1;
    }
    if let Some(j) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Separation(j as u32 + 1));
    }
    let mut columns: Vec<Vec<f64>> = (0..s.n_covariates).map(|j| series.x().column(j).iter().copied().collect()).collect();
    if s.dynamic {
        columns.push((0..series.len()).map(|t| series.lag(t).map_or(0.0, f64::from)).collect());
    }
    check_rank(&columns)?;
    let mut theta = vec![0.0; s.n_params()];
    let mut cum = 0usize;
    for j in 0..k as usize - 1 {
        cum += counts[j];
        theta[s.tau_offset() + j] = s.link.quantile(cum as f64 / n);
    }
    Ok(theta)
}

/// Least squares of `log(Y* + 1/2)` on the covariates.
fn log_count_regression(series: &ObservationSeries) -> Result<Vec<f64>> {
    let x = series.x();
    let y = DVector::from_iterator(series.len(), series.counts().iter().map(|&c| (f64::from(c) + 0.5).ln()));
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    let chol = xtx
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("covariate matrix is singular".into()))?;
    Ok(chol.solve(&xty).iter().copied().collect())
}

fn poisson_start(s: &PoissonSpec, series: &ObservationSeries) -> Result<Vec<f64>> {
    let counts: Vec<f64> = series.counts().iter().map(|&c| f64::from(c)).collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::Data("counts have zero variance".into()));
    }
    match s.link {
        PoissonLink::ExpStatic => log_count_regression(series),
        PoissonLink::LogAr => {
            let mut b = log_count_regression(series)?;
            b.push(0.0);
            Ok(b)
        }
        PoissonLink::IdentityAr => {
            let acf = counts.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / (n * var);
            let persistence = acf.clamp(0.1, 0.8);
            Ok(vec![mean.max(0.1) * (1.0 - persistence), 0.5 * persistence, 0.5 * persistence])
        }
    }
}

/// Deterministic starting point for [`fit_mle`].
pub fn initial_theta(spec: &ModelSpec, series: &ObservationSeries) -> Result<Vec<f64>> {
    spec.check_series(series)?;
    match spec {
        ModelSpec::Ordered(s) => ordered_start(s, series),
        ModelSpec::Poisson(s) => poisson_start(s, series),
    }
}

fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Damped Newton ascent in the unconstrained space, falling back to gradient
/// steps when the information is not positive definite.
pub fn fit_mle(spec: &ModelSpec, series: &ObservationSeries, options: FitOptions) -> Result<FitResult> {
    let start = initial_theta(spec, series)?;
    fit_from(spec, series, &start, options)
}

/// [`fit_mle`] from a caller-supplied admissible start.
pub fn fit_from(spec: &ModelSpec, series: &ObservationSeries, start: &[f64], options: FitOptions) -> Result<FitResult> {
    let map = Reparam::for_spec(spec);
    let mut z = map.to_free(start);
    let mut theta = map.to_theta(&z);
    let mut cur = evaluate(spec, &theta, series, Order::Hessian)?;
    let mut iterations = 0;
    let mut converged = sup_norm(&cur.grad) <= options.tol;
    while !converged && iterations < options.max_iter {
        iterations += 1;
        let jac = map.jacobian(&z);
        let gz = jac.transpose() * &cur.grad;
        let info_z = jac.transpose() * (-&cur.hess) * &jac;
        let newton = info_z.clone().cholesky().map(|c| c.solve(&gz));
        let (dir, is_newton) = match newton {
            Some(step) if step.iter().all(|v| v.is_finite()) => (step, true),
            _ => (&gz / sup_norm(&gz).max(1.0), false),
        };
        let slope = gz.dot(&dir);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial_z: Vec<f64> = z.iter().zip(dir.iter()).map(|(a, b)| a + step * b).collect();
            let trial = map.to_theta(&trial_z);
            if let Ok(v) = evaluate(spec, &trial, series, Order::Value) {
                let gain = v.loglik - cur.loglik;
                let slack = 1e-12 * cur.loglik.abs().max(1.0);
                if gain >= 1e-4 * step * slope || (is_newton && gain >= -slack && step == 1.0) {
                    accepted = Some((trial_z, trial));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((nz, nt)) = accepted else {
            log::debug!("line search failed after {iterations} iterations");
            break;
        };
        z = nz;
        theta = nt;
        cur = evaluate(spec, &theta, series, Order::Hessian)?;
        converged = sup_norm(&cur.grad) <= options.tol;
    }
    let information = -cur.hess.clone();
    let std_errors = match information.clone().cholesky() {
        Some(c) => c.inverse().diagonal().iter().map(|v| v.sqrt()).collect(),
        None => vec![f64::NAN; theta.len()],
    };
    Ok(FitResult {
        theta,
        loglik: cur.loglik,
        score: cur.grad.iter().copied().collect(),
        information,
        std_errors,
        converged,
        iterations,
    })
}
