use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::bootstrap::McDesign;
use crate::error::{Error, Result};
use crate::model::{Link, ModelSpec, OrderedChoiceSpec};
use crate::rng::stream;

/// Synthetic covariate paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovariateGen {
    /// Independent standard normals.
    IidNormal { dim: usize },
    /// Stationary Gaussian AR(1) with unit marginal variance.
    Ar1 { dim: usize, coef: f64 },
}

impl CovariateGen {
    pub fn dim(&self) -> usize {
        match *self {
            CovariateGen::IidNormal { dim } | CovariateGen::Ar1 { dim, .. } => dim,
        }
    }

    pub fn generate(&self, n: usize, seed: u64, id: u64) -> Result<DMatrix<f64>> {
        let mut rng = stream(seed, id);
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        match *self {
            CovariateGen::IidNormal { dim } => Ok(DMatrix::from_fn(n, dim, |_, _| draw())),
            CovariateGen::Ar1 { dim, coef } => {
                if !(coef.abs() < 1.0) {
                    return Err(Error::Config(format!("AR(1) coefficient {coef} is not stationary")));
                }
                let sd = (1.0 - coef * coef).sqrt();
                let mut x = DMatrix::zeros(n, dim);
                for j in 0..dim {
                    let mut prev = draw();
                    for t in 0..n {
                        prev = coef * prev + sd * draw();
                        x[(t, j)] = prev;
                    }
                }
                Ok(x)
            }
        }
    }
}

/// A size or power experiment: data from `truth`, tested against `null`.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub name: String,
    pub description: String,
    pub truth: ModelSpec,
    pub truth_theta: Vec<f64>,
    pub null: ModelSpec,
    pub covariates: CovariateGen,
    pub t: usize,
    pub burn_in: usize,
    pub presample: Option<u32>,
}

/// Probit coefficients of the built-in designs; logit versions scale by
/// [`LOGIT_SCALE`]. With unit-variance covariates the index has unit variance.
const BETA: [f64; 2] = [0.8, -0.6];
const RHO: f64 = -1.0;
/// Thresholds giving category shares near 15/20/50/15%, a dominant
/// no-change class as in policy-rate data. Static ones are normal quantiles
/// of the index plus noise (variance 2). A thinner lowest class leaves it
/// empty or nearly separated in too many samples of 100.
const TAU_STATIC: [f64; 3] = [-1.466, -0.545, 1.466];
/// Same shares once the lag enters, calibrated by long simulation.
const TAU_DYNAMIC: [f64; 3] = [-4.2, -3.23, -1.11];
/// Approximate ratio of logit to probit coefficients.
pub const LOGIT_SCALE: f64 = 1.7;
const AR_COEF: f64 = 0.8;
const DYNAMIC_BURN_IN: usize = 50;

fn ordered(link: Link, dynamic: bool) -> ModelSpec {
    ModelSpec::Ordered(OrderedChoiceSpec::new(link, 4, dynamic, 2).expect("valid built-in spec"))
}

fn static_theta(scale: f64) -> Vec<f64> {
    BETA.iter().chain(&TAU_STATIC).map(|v| v * scale).collect()
}

fn dynamic_theta(scale: f64) -> Vec<f64> {
    BETA.iter().chain(&[RHO]).chain(&TAU_DYNAMIC).map(|v| v * scale).collect()
}

/// The built-in scenario names.
pub const SCENARIOS: [&str; 5] = ["size1", "size2", "power1", "power2", "power3"];

impl ScenarioSpec {
    pub fn builtin(name: &str, t: usize) -> Result<Self> {
        if t < 10 {
            return Err(Error::Config(format!("scenario sample size {t} is too small")));
        }
        let (truth, truth_theta, null, description) = match name {
            "size1" => (ordered(Link::Probit, false), static_theta(1.0), ordered(Link::Probit, false), "H0: static probit"),
            "size2" => (
                ordered(Link::Logit, false),
                static_theta(LOGIT_SCALE),
                ordered(Link::Logit, false),
                "H0: static logit",
            ),
            "power1" => (
                ordered(Link::Logit, false),
                static_theta(LOGIT_SCALE),
                ordered(Link::Probit, false),
                "H0: static probit vs H1: static logit",
            ),
            "power2" => (
                ordered(Link::Probit, true),
                dynamic_theta(1.0),
                ordered(Link::Probit, false),
                "H0: static probit vs H1: dynamic probit",
            ),
            "power3" => (
                ordered(Link::Logit, true),
                dynamic_theta(LOGIT_SCALE),
                ordered(Link::Probit, false),
                "H0: static probit vs H1: dynamic logit",
            ),
            other => {
                return Err(Error::Config(format!("unknown scenario `{other}`; expected one of {}", SCENARIOS.join(", "))))
            }
        };
        let dynamic = truth.is_dynamic();
        Ok(ScenarioSpec {
            name: name.to_string(),
            description: description.to_string(),
            truth,
            truth_theta,
            null,
            covariates: CovariateGen::Ar1 { dim: 2, coef: AR_COEF },
            t,
            burn_in: if dynamic { DYNAMIC_BURN_IN } else { 0 },
            presample: if dynamic { Some(2) } else { None },
        })
    }

    /// Fix the covariate design once per scenario from `(seed, stream id)`.
    pub fn design(&self, seed: u64, id: u64) -> Result<McDesign> {
        let x = self.covariates.generate(self.burn_in + self.t, seed, id)?;
        Ok(McDesign {
            name: self.name.clone(),
            truth: self.truth,
            truth_theta: self.truth_theta.clone(),
            null: self.null,
            x,
            burn_in: self.burn_in,
            presample: self.presample,
        })
    }
}
