//! Ordered choice models: `Y_t = k` iff `τ_{k-1} < x_t'β + ρ y_{t-1} + ε_t <= τ_k`.

use serde::{Deserialize, Serialize};

use super::link::Link;
use super::law::ConditionalLaw;
use crate::error::{Error, Result};

/// Parameter layout: `θ = (β_1..β_p, [ρ], τ_1..τ_{K-1})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderedChoiceSpec {
    pub link: Link,
    pub categories: u32,
    pub dynamic: bool,
    pub n_covariates: usize,
}

/// Borrowed view of an ordered-choice parameter vector.
#[derive(Debug, Clone, Copy)]
pub struct OrderedParams<'a> {
    pub beta: &'a [f64],
    pub rho: f64,
    pub tau: &'a [f64],
}

impl OrderedChoiceSpec {
    pub fn new(link: Link, categories: u32, dynamic: bool, n_covariates: usize) -> Result<Self> {
        if categories < 2 {
            return Err(Error::InvalidParameter(format!(
                "ordered model needs K >= 2 categories, got {categories}"
            )));
        }
        Ok(OrderedChoiceSpec { link, categories, dynamic, n_covariates })
    }

    pub fn n_params(&self) -> usize {
        self.n_covariates + usize::from(self.dynamic) + (self.categories as usize - 1)
    }

    pub fn rho_index(&self) -> Option<usize> {
        self.dynamic.then_some(self.n_covariates)
    }

    /// Position of `τ_1` in the parameter vector.
    pub fn tau_offset(&self) -> usize {
        self.n_covariates + usize::from(self.dynamic)
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.n_covariates).map(|j| format!("beta{j}")).collect();
        if self.dynamic {
            names.push("rho".into());
        }
        names.extend((1..self.categories).map(|k| format!("tau{k}")));
        names
    }

    /// Split `θ`, rejecting wrong lengths and non-increasing thresholds.
    pub fn split<'a>(&self, theta: &'a [f64]) -> Result<OrderedParams<'a>> {
        if theta.len() != self.n_params() {
            return Err(Error::Dimension(format!(
                "ordered model expects {} parameters, got {}",
                self.n_params(),
                theta.len()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite parameter".into()));
        }
        let off = self.tau_offset();
        let tau = &theta[off..];
        if tau.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter(format!(
                "thresholds must be strictly increasing: {tau:?}"
            )));
        }
        Ok(OrderedParams {
            beta: &theta[..self.n_covariates],
            rho: self.rho_index().map_or(0.0, |i| theta[i]),
            tau,
        })
    }

    /// Latent index `x'β + ρ·y_{t-1}`.
    pub fn index(&self, params: &OrderedParams<'_>, x_row: &[f64], lag: Option<u32>) -> Result<f64> {
        if x_row.len() != self.n_covariates {
            return Err(Error::Dimension(format!(
                "expected {} covariates, got {}",
                self.n_covariates,
                x_row.len()
            )));
        }
        let mut eta: f64 = x_row.iter().zip(params.beta).map(|(x, b)| x * b).sum();
        if self.dynamic {
            let lag = lag.ok_or_else(|| {
                Error::InvalidState("dynamic model needs the lagged outcome".into())
            })?;
            eta += params.rho * f64::from(lag);
        }
        Ok(eta)
    }

    /// `τ_k` with `τ_0 = -∞`, `τ_K = +∞`.
    pub fn threshold(&self, params: &OrderedParams<'_>, k: u32) -> f64 {
        if k == 0 {
            f64::NEG_INFINITY
        } else if k >= self.categories {
            f64::INFINITY
        } else {
            params.tau[k as usize - 1]
        }
    }

    /// `F(k | x, y_{t-1}) = F_ε(τ_k - x'β - ρ y_{t-1})`.
    pub fn cdf(&self, theta: &[f64], x_row: &[f64], lag: Option<u32>, k: u32) -> Result<f64> {
        if k > self.categories {
            return Err(Error::Domain(format!(
                "category {k} outside 0..={}",
                self.categories
            )));
        }
        let params = self.split(theta)?;
        let eta = self.index(&params, x_row, lag)?;
        Ok(self.link.cdf(self.threshold(&params, k) - eta))
    }

    pub fn law(&self, theta: &[f64], x_row: &[f64], lag: Option<u32>) -> Result<ConditionalLaw> {
        let params = self.split(theta)?;
        let eta = self.index(&params, x_row, lag)?;
        self.law_at(&params, eta)
    }

    pub(crate) fn law_at(&self, params: &OrderedParams<'_>, eta: f64) -> Result<ConditionalLaw> {
        let values: Vec<f64> = (1..=self.categories)
            .map(|k| self.link.cdf(self.threshold(params, k) - eta))
            .collect();
        ConditionalLaw::from_cdf(&values)
    }

    /// `∂η/∂θ`: the covariates, the lag, and zeros for the thresholds.
    pub(crate) fn index_gradient(&self, x_row: &[f64], lag: Option<u32>) -> Vec<f64> {
        let mut g = vec![0.0; self.n_params()];
        g[..self.n_covariates].copy_from_slice(x_row);
        if let Some(i) = self.rho_index() {
            g[i] = lag.map_or(0.0, f64::from);
        }
        g
    }

    /// Gradient of `F(k)` in `θ`.
    pub(crate) fn cdf_gradient(
        &self,
        params: &OrderedParams<'_>,
        eta: f64,
        index_grad: &[f64],
        k: u32,
    ) -> Vec<f64> {
        let mut g = vec![0.0; self.n_params()];
        if k == 0 || k >= self.categories {
            return g;
        }
        let dens = self.link.pdf(self.threshold(params, k) - eta);
        for (gi, di) in g.iter_mut().zip(index_grad) {
            *gi = -dens * di;
        }
        g[self.tau_offset() + k as usize - 1] += dens;
        g
    }
}
