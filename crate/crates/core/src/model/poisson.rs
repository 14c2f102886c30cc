//! Conditional Poisson count models on the shifted support `Y = Y* + 1`.

use serde::{Deserialize, Serialize};

use super::law::ConditionalLaw;
use crate::error::{Error, Result};

/// Tail mass below which the Poisson support is truncated.
pub const TAIL_MASS: f64 = 1e-12;
/// Hard cap on the truncated support size.
pub const SUPPORT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoissonLink {
    /// `λ_t = exp(x_t'β)`, `θ = β`.
    ExpStatic,
    /// `λ_t = α0 + α1 λ_{t-1} + ρ Y*_{t-1}`, `θ = (α0, α1, ρ)`.
    IdentityAr,
    /// `log λ_t = x_t'β + ρ e_{t-1}` with `e = (Y* - λ)/λ`, `θ = (β, ρ)`.
    LogAr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonSpec {
    pub link: PoissonLink,
    pub n_covariates: usize,
    /// Intensity before the first observation, for the autoregressive links.
    pub lambda0: f64,
}

/// Intensity path with its first (and optionally second) parameter derivatives.
#[derive(Debug, Clone)]
pub struct LambdaPath {
    pub lambda: Vec<f64>,
    /// `T × d`, row-major.
    pub grad: Vec<f64>,
    /// `T × d × d`, row-major; empty unless requested.
    pub hess: Vec<f64>,
    pub dim: usize,
}

impl LambdaPath {
    pub fn grad_at(&self, t: usize) -> &[f64] {
        &self.grad[t * self.dim..(t + 1) * self.dim]
    }

    pub fn hess_at(&self, t: usize) -> &[f64] {
        let d2 = self.dim * self.dim;
        &self.hess[t * d2..(t + 1) * d2]
    }
}

impl PoissonSpec {
    pub fn new(link: PoissonLink, n_covariates: usize, lambda0: f64) -> Result<Self> {
        if link == PoissonLink::IdentityAr && n_covariates != 0 {
            return Err(Error::InvalidParameter(
                "identity-ar intensity takes no covariates".into(),
            ));
        }
        if !(lambda0 > 0.0 && lambda0.is_finite()) {
            return Err(Error::InvalidState(format!("initial intensity {lambda0} must be positive")));
        }
        Ok(PoissonSpec { link, n_covariates, lambda0 })
    }

    pub fn n_params(&self) -> usize {
        match self.link {
            PoissonLink::ExpStatic => self.n_covariates,
            PoissonLink::IdentityAr => 3,
            PoissonLink::LogAr => self.n_covariates + 1,
        }
    }

    pub fn is_dynamic(&self) -> bool {
        self.link != PoissonLink::ExpStatic
    }

    pub fn param_names(&self) -> Vec<String> {
        match self.link {
            PoissonLink::IdentityAr => vec!["alpha0".into(), "alpha1".into(), "rho".into()],
            PoissonLink::ExpStatic => (1..=self.n_covariates).map(|j| format!("beta{j}")).collect(),
            PoissonLink::LogAr => {
                let mut v: Vec<String> =
                    (1..=self.n_covariates).map(|j| format!("beta{j}")).collect();
                v.push("rho".into());
                v
            }
        }
    }

    pub fn validate(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::Dimension(format!(
                "Poisson model expects {} parameters, got {}",
                self.n_params(),
                theta.len()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite parameter".into()));
        }
        if self.link == PoissonLink::IdentityAr {
            let (a0, a1, rho) = (theta[0], theta[1], theta[2]);
            if !(a0 > 0.0 && a1 >= 0.0 && rho >= 0.0 && a1 + rho < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "identity-ar needs α0 > 0, α1 >= 0, ρ >= 0, α1 + ρ < 1; got ({a0}, {a1}, {rho})"
                )));
            }
        }
        Ok(())
    }

    /// Forward intensity recursion and its parameter derivatives.
    ///
    /// `counts[t]` is `Y*_t`, `x` is row-major `T × p`, `y0` is `Y*_0`.
    pub fn lambda_path(
        &self,
        theta: &[f64],
        counts: &[u32],
        x: &[f64],
        y0: Option<u32>,
        with_hessian: bool,
    ) -> Result<LambdaPath> {
        self.validate(theta)?;
        let n = counts.len();
        let p = self.n_covariates;
        if x.len() != n * p {
            return Err(Error::Dimension(format!("covariate block has {} entries, expected {}", x.len(), n * p)));
        }
        let d = self.n_params();
        let mut lambda = Vec::with_capacity(n);
        let mut grad = vec![0.0; n * d];
        let mut hess = if with_hessian { vec![0.0; n * d * d] } else { Vec::new() };
        let need_y0 = || y0.ok_or_else(|| Error::InvalidState("autoregressive intensity needs Y*_0".into()));

        match self.link {
            PoissonLink::ExpStatic => {
                for t in 0..n {
                    let row = &x[t * p..(t + 1) * p];
                    let lam = row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>().exp();
                    lambda.push(lam);
                    for j in 0..d {
                        grad[t * d + j] = lam * row[j];
                    }
                    if with_hessian {
                        for i in 0..d {
                            for j in 0..d {
                                hess[(t * d + i) * d + j] = lam * row[i] * row[j];
                            }
                        }
                    }
                }
            }
            PoissonLink::IdentityAr => {
                let (a0, a1, rho) = (theta[0], theta[1], theta[2]);
                let mut prev_lam = self.lambda0;
                let mut prev_y = f64::from(need_y0()?);
                let mut prev_g = [0.0; 3];
                let mut prev_h = [0.0; 9];
                for t in 0..n {
                    let lam = a0 + a1 * prev_lam + rho * prev_y;
                    let g = [
                        1.0 + a1 * prev_g[0],
                        prev_lam + a1 * prev_g[1],
                        prev_y + a1 * prev_g[2],
                    ];
                    grad[t * 3..t * 3 + 3].copy_from_slice(&g);
                    if with_hessian {
                        // ∂²λ_t = α1 ∂²λ_{t-1} + e_α1 ∂λ_{t-1}' + ∂λ_{t-1} e_α1'
                        let mut h = [0.0; 9];
                        for i in 0..3 {
                            for j in 0..3 {
                                let mut v = a1 * prev_h[i * 3 + j];
                                if i == 1 {
                                    v += prev_g[j];
                                }
                                if j == 1 {
                                    v += prev_g[i];
                                }
                                h[i * 3 + j] = v;
                            }
                        }
                        hess[t * 9..t * 9 + 9].copy_from_slice(&h);
                        prev_h = h;
                    }
                    if !(lam > 0.0) {
                        return Err(Error::InvalidState(format!("λ_{} = {lam} is not positive", t + 1)));
                    }
                    lambda.push(lam);
                    prev_lam = lam;
                    prev_y = f64::from(counts[t]);
                    prev_g = g;
                }
            }
            PoissonLink::LogAr => {
                let rho = theta[p];
                let y_init = f64::from(need_y0()?);
                // e_{t-1} and its derivative; the initial state is fixed.
                let mut prev_e = (y_init - self.lambda0) / self.lambda0;
                let mut prev_de = vec![0.0; d];
                let mut prev_d2e = vec![0.0; d * d];
                for t in 0..n {
                    let row = &x[t * p..(t + 1) * p];
                    let log_lam = row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() + rho * prev_e;
                    let lam = log_lam.exp();
                    if !(lam > 0.0 && lam.is_finite()) {
                        return Err(Error::InvalidState(format!("λ_{} = {lam} is not positive and finite", t + 1)));
                    }
                    // ∂ log λ_t
                    let mut dl = vec![0.0; d];
                    dl[..p].copy_from_slice(row);
                    dl[p] = prev_e;
                    for j in 0..d {
                        dl[j] += rho * prev_de[j];
                    }
                    for j in 0..d {
                        grad[t * d + j] = lam * dl[j];
                    }
                    let mut d2l = vec![0.0; d * d];
                    if with_hessian {
                        for i in 0..d {
                            for j in 0..d {
                                let mut v = rho * prev_d2e[i * d + j];
                                if i == p {
                                    v += prev_de[j];
                                }
                                if j == p {
                                    v += prev_de[i];
                                }
                                d2l[i * d + j] = v;
                                hess[(t * d + i) * d + j] = lam * (dl[i] * dl[j] + v);
                            }
                        }
                    }
                    // e_t = Y*_t / λ_t - 1, ∂e_t = -(Y*/λ) ∂log λ_t.
                    let ratio = f64::from(counts[t]) / lam;
                    prev_e = ratio - 1.0;
                    if with_hessian {
                        for i in 0..d {
                            for j in 0..d {
                                prev_d2e[i * d + j] = ratio * (dl[i] * dl[j] - d2l[i * d + j]);
                            }
                        }
                    }
                    for j in 0..d {
                        prev_de[j] = -ratio * dl[j];
                    }
                    lambda.push(lam);
                }
            }
        }
        Ok(LambdaPath { lambda, grad, hess, dim: d })
    }
}

/// `P(Y* <= k - 1)` for `Y* ~ Poisson(λ)`, i.e. the cdf at shifted category `k`.
///
/// Values within [`TAIL_MASS`] of one are returned as exactly one.
pub fn poisson_cdf(lambda: f64, k: u32) -> Result<f64> {
    check_lambda(lambda)?;
    if k == 0 {
        return Ok(0.0);
    }
    let ln_lam = lambda.ln();
    let mut ln_p = -lambda;
    let mut acc = ln_p.exp();
    for j in 1..k {
        ln_p += ln_lam - f64::from(j).ln();
        acc += ln_p.exp();
        if acc >= 1.0 - TAIL_MASS {
            return Ok(1.0);
        }
    }
    Ok(if acc >= 1.0 - TAIL_MASS { 1.0 } else { acc })
}

/// The Poisson law truncated at the first `k` with `F(k) >= 1 - 1e-12`.
pub fn poisson_law(lambda: f64) -> Result<ConditionalLaw> {
    check_lambda(lambda)?;
    let ln_lam = lambda.ln();
    let mut ln_p = -lambda;
    let mut acc = ln_p.exp();
    let mut values = vec![acc];
    let mut j = 0u32;
    while acc < 1.0 - TAIL_MASS && values.len() < SUPPORT_CAP {
        j += 1;
        ln_p += ln_lam - f64::from(j).ln();
        acc += ln_p.exp();
        values.push(acc);
    }
    *values.last_mut().unwrap() = 1.0;
    ConditionalLaw::from_cdf_with_floor(&values, 0.0)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidState(format!("intensity {lambda} must be positive")));
    }
    Ok(())
}
