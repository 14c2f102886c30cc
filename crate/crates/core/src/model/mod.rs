//! Conditional discrete model families and their observation container.

mod law;
mod link;
mod ordered;
mod poisson;

pub use law::{mixture_law, ConditionalLaw, PMF_FLOOR};
pub use link::Link;
pub use ordered::{OrderedChoiceSpec, OrderedParams};
pub use poisson::{poisson_cdf, poisson_law, LambdaPath, PoissonLink, PoissonSpec, SUPPORT_CAP, TAIL_MASS};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::open_unit;
use crate::transform::{PitPair, TransformSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    Finite(u32),
    CountablyInfinite,
}

/// The sample `{Y_t, X_t}`: categories coded `1..=K` (counts shifted by one),
/// a `T × p` covariate matrix, and the pre-sample outcome used as the lag at
/// `t = 1` by dynamic models.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    y: Vec<u32>,
    x: DMatrix<f64>,
    support: Support,
    presample: Option<u32>,
}

impl ObservationSeries {
    pub fn new(y: Vec<u32>, x: DMatrix<f64>, support: Support) -> Result<Self> {
        if y.len() < 2 {
            return Err(Error::Data(format!("need at least 2 observations, got {}", y.len())));
        }
        if x.nrows() != y.len() {
            return Err(Error::Dimension(format!(
                "{} outcomes but {} covariate rows",
                y.len(),
                x.nrows()
            )));
        }
        for (t, &v) in y.iter().enumerate() {
            check_category(v, support).map_err(|e| Error::Data(format!("row {}: {e}", t + 1)))?;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite covariate".into()));
        }
        Ok(ObservationSeries { y, x, support, presample: None })
    }

    /// Outcomes only, no covariates.
    pub fn without_covariates(y: Vec<u32>, support: Support) -> Result<Self> {
        let n = y.len();
        Self::new(y, DMatrix::zeros(n, 0), support)
    }

    pub fn with_presample(mut self, y0: u32) -> Result<Self> {
        check_category(y0, self.support)?;
        self.presample = Some(y0);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn y(&self) -> &[u32] {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn n_covariates(&self) -> usize {
        self.x.ncols()
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn presample(&self) -> Option<u32> {
        self.presample
    }

    pub fn x_row(&self, t: usize) -> Vec<f64> {
        self.x.row(t).iter().copied().collect()
    }

    /// Row-major copy of the covariates.
    pub fn x_row_major(&self) -> Vec<f64> {
        (0..self.len()).flat_map(|t| self.x.row(t).iter().copied().collect::<Vec<_>>()).collect()
    }

    /// `Y_{t-1}`, using the pre-sample value at `t = 0`.
    pub fn lag(&self, t: usize) -> Option<u32> {
        if t == 0 {
            self.presample
        } else {
            Some(self.y[t - 1])
        }
    }

    /// Shifted counts `Y* = Y - 1`.
    pub fn counts(&self) -> Vec<u32> {
        self.y.iter().map(|v| v - 1).collect()
    }
}

fn check_category(v: u32, support: Support) -> Result<()> {
    match support {
        Support::Finite(k) if v < 1 || v > k => {
            Err(Error::Data(format!("category {v} outside 1..={k}")))
        }
        Support::CountablyInfinite if v < 1 => Err(Error::Data("shifted count must be >= 1".into())),
        _ => Ok(()),
    }
}

/// A fitted-or-fittable conditional model family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    Ordered(OrderedChoiceSpec),
    Poisson(PoissonSpec),
}

/// A conditional law together with the parameter gradient of its cdf.
#[derive(Debug, Clone)]
pub struct LawJet {
    pub law: ConditionalLaw,
    kind: JetKind,
}

#[derive(Debug, Clone)]
enum JetKind {
    Ordered { spec: OrderedChoiceSpec, theta: Vec<f64>, eta: f64, index_grad: Vec<f64> },
    Poisson { lambda_grad: Vec<f64> },
}

impl LawJet {
    /// `∂F(k)/∂θ`.
    pub fn cdf_grad(&self, k: u32) -> Vec<f64> {
        match &self.kind {
            JetKind::Ordered { spec, theta, eta, index_grad } => {
                let params = spec.split(theta).expect("validated at construction");
                spec.cdf_gradient(&params, *eta, index_grad, k)
            }
            JetKind::Poisson { lambda_grad } => {
                // d/dλ P(Y* <= k-1) = -P(Y* = k-1); the folded top cell is constant.
                if k == 0 || k >= self.law.top() {
                    vec![0.0; lambda_grad.len()]
                } else {
                    let p = self.law.pmf(k);
                    lambda_grad.iter().map(|g| -p * g).collect()
                }
            }
        }
    }

    /// `∂f(k)/∂θ`.
    pub fn pmf_grad(&self, k: u32) -> Vec<f64> {
        let hi = self.cdf_grad(k);
        let lo = self.cdf_grad(k.saturating_sub(1));
        hi.iter().zip(&lo).map(|(a, b)| a - b).collect()
    }
}

impl ModelSpec {
    pub fn n_params(&self) -> usize {
        match self {
            ModelSpec::Ordered(s) => s.n_params(),
            ModelSpec::Poisson(s) => s.n_params(),
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        match self {
            ModelSpec::Ordered(s) => s.param_names(),
            ModelSpec::Poisson(s) => s.param_names(),
        }
    }

    pub fn support(&self) -> Support {
        match self {
            ModelSpec::Ordered(s) => Support::Finite(s.categories),
            ModelSpec::Poisson(_) => Support::CountablyInfinite,
        }
    }

    pub fn n_covariates(&self) -> usize {
        match self {
            ModelSpec::Ordered(s) => s.n_covariates,
            ModelSpec::Poisson(s) => s.n_covariates,
        }
    }

    pub fn is_dynamic(&self) -> bool {
        match self {
            ModelSpec::Ordered(s) => s.dynamic,
            ModelSpec::Poisson(s) => s.is_dynamic(),
        }
    }

    pub fn validate(&self, theta: &[f64]) -> Result<()> {
        match self {
            ModelSpec::Ordered(s) => s.split(theta).map(|_| ()),
            ModelSpec::Poisson(s) => s.validate(theta),
        }
    }

    /// Check that a series can be evaluated under this spec.
    pub fn check_series(&self, series: &ObservationSeries) -> Result<()> {
        if series.support() != self.support() {
            return Err(Error::Dimension(format!(
                "series support {:?} does not match model support {:?}",
                series.support(),
                self.support()
            )));
        }
        if series.n_covariates() != self.n_covariates() {
            return Err(Error::Dimension(format!(
                "series has {} covariates, model expects {}",
                series.n_covariates(),
                self.n_covariates()
            )));
        }
        if self.is_dynamic() && series.presample().is_none() {
            return Err(Error::InvalidState("dynamic model needs a pre-sample outcome".into()));
        }
        Ok(())
    }

    pub(crate) fn poisson_path(
        spec: &PoissonSpec,
        theta: &[f64],
        series: &ObservationSeries,
        with_hessian: bool,
    ) -> Result<LambdaPath> {
        spec.lambda_path(
            theta,
            &series.counts(),
            &series.x_row_major(),
            series.presample().map(|v| v - 1),
            with_hessian,
        )
    }

    /// The conditional law `F_{t,θ}(· | Ω_t)` for every `t`.
    pub fn laws(&self, theta: &[f64], series: &ObservationSeries) -> Result<Vec<ConditionalLaw>> {
        self.check_series(series)?;
        match self {
            ModelSpec::Ordered(s) => {
                let params = s.split(theta)?;
                (0..series.len())
                    .map(|t| {
                        let eta = s.index(&params, &series.x_row(t), series.lag(t))?;
                        s.law_at(&params, eta)
                    })
                    .collect()
            }
            ModelSpec::Poisson(s) => {
                let path = Self::poisson_path(s, theta, series, false)?;
                path.lambda.iter().map(|&l| poisson_law(l)).collect()
            }
        }
    }

    /// Laws with cdf gradients, for drift and information computations.
    pub fn jets(&self, theta: &[f64], series: &ObservationSeries) -> Result<Vec<LawJet>> {
        self.check_series(series)?;
        match self {
            ModelSpec::Ordered(s) => {
                let params = s.split(theta)?;
                (0..series.len())
                    .map(|t| {
                        let x = series.x_row(t);
                        let lag = series.lag(t);
                        let eta = s.index(&params, &x, lag)?;
                        Ok(LawJet {
                            law: s.law_at(&params, eta)?,
                            kind: JetKind::Ordered {
                                spec: *s,
                                theta: theta.to_vec(),
                                eta,
                                index_grad: s.index_gradient(&x, lag),
                            },
                        })
                    })
                    .collect()
            }
            ModelSpec::Poisson(s) => {
                let path = Self::poisson_path(s, theta, series, false)?;
                (0..series.len())
                    .map(|t| {
                        Ok(LawJet {
                            law: poisson_law(path.lambda[t])?,
                            kind: JetKind::Poisson { lambda_grad: path.grad_at(t).to_vec() },
                        })
                    })
                    .collect()
            }
        }
    }

    /// PIT pairs `(F(Y_t - 1), F(Y_t))` of the observed outcomes.
    pub fn transform_series(&self, theta: &[f64], series: &ObservationSeries) -> Result<TransformSeries> {
        self.check_series(series)?;
        let pairs = match self {
            ModelSpec::Ordered(s) => {
                let params = s.split(theta)?;
                (0..series.len())
                    .map(|t| {
                        let eta = s.index(&params, &series.x_row(t), series.lag(t))?;
                        let k = series.y()[t];
                        let lo = s.link.cdf(s.threshold(&params, k - 1) - eta);
                        let hi = s.link.cdf(s.threshold(&params, k) - eta);
                        PitPair::new(lo, hi)
                            .map_err(|_| Error::Degenerate(format!("observation {} has a null cell", t + 1)))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            ModelSpec::Poisson(s) => {
                let path = Self::poisson_path(s, theta, series, false)?;
                path.lambda
                    .iter()
                    .zip(series.y())
                    .map(|(&l, &k)| Ok(poisson_law(l)?.pit_pair(k)))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        Ok(TransformSeries::new(pairs))
    }

    /// Simulate `Y_t = F_t^{-1}(Z_t)` forward in time, rebuilding the lag from
    /// simulated outcomes. `x` rows give the covariate path.
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        theta: &[f64],
        x: &DMatrix<f64>,
        presample: Option<u32>,
        rng: &mut R,
    ) -> Result<ObservationSeries> {
        self.validate(theta)?;
        let n = x.nrows();
        if x.ncols() != self.n_covariates() {
            return Err(Error::Dimension(format!(
                "covariate path has {} columns, model expects {}",
                x.ncols(),
                self.n_covariates()
            )));
        }
        if self.is_dynamic() && presample.is_none() {
            return Err(Error::InvalidState("dynamic simulation needs a pre-sample outcome".into()));
        }
        let mut y = Vec::with_capacity(n);
        match self {
            ModelSpec::Ordered(s) => {
                let params = s.split(theta)?;
                let mut lag = presample;
                for t in 0..n {
                    let row: Vec<f64> = x.row(t).iter().copied().collect();
                    let eta = s.index(&params, &row, lag)?;
                    let k = s.law_at(&params, eta)?.quantile(open_unit(rng))?;
                    y.push(k);
                    lag = Some(k);
                }
            }
            ModelSpec::Poisson(s) => {
                let p = s.n_covariates;
                let mut prev_lam = s.lambda0;
                let mut prev_count = presample.map_or(0.0, |v| f64::from(v - 1));
                for t in 0..n {
                    let xb: f64 = (0..p).map(|j| x[(t, j)] * theta[j]).sum();
                    let lam = match s.link {
                        PoissonLink::ExpStatic => xb.exp(),
                        PoissonLink::IdentityAr => theta[0] + theta[1] * prev_lam + theta[2] * prev_count,
                        PoissonLink::LogAr => (xb + theta[p] * (prev_count - prev_lam) / prev_lam).exp(),
                    };
                    let k = poisson_law(lam)?.quantile(open_unit(rng))?;
                    y.push(k);
                    prev_lam = lam;
                    prev_count = f64::from(k - 1);
                }
            }
        }
        let out = ObservationSeries::new(y, x.clone(), self.support())?;
        match presample {
            Some(v) => out.with_presample(v),
            None => Ok(out),
        }
    }
}
