use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::erf::erfc_inv;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Law of the latent shock in the ordered choice model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Probit,
    Logit,
}

impl Link {
    pub fn cdf(self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        match self {
            Link::Probit => 0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2),
            Link::Logit => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// `1 - cdf(x)` without cancellation in the upper tail.
    pub fn sf(self, x: f64) -> f64 {
        self.cdf(-x)
    }

    pub fn pdf(self, x: f64) -> f64 {
        if x.is_infinite() {
            return 0.0;
        }
        match self {
            Link::Probit => FRAC_1_SQRT_2PI * (-0.5 * x * x).exp(),
            Link::Logit => {
                let e = (-x.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
        }
    }

    /// Derivative of the density.
    pub fn pdf_slope(self, x: f64) -> f64 {
        if x.is_infinite() {
            return 0.0;
        }
        match self {
            Link::Probit => -x * self.pdf(x),
            Link::Logit => self.pdf(x) * (self.sf(x) - self.cdf(x)),
        }
    }

    /// Inverse cdf on `(0, 1)`.
    pub fn quantile(self, p: f64) -> f64 {
        match self {
            Link::Probit => -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p),
            Link::Logit => (p / (1.0 - p)).ln(),
        }
    }

    /// `cdf(hi) - cdf(lo)` evaluated on the side of zero that keeps precision.
    pub fn interval(self, lo: f64, hi: f64) -> f64 {
        if lo > 0.0 {
            self.sf(lo) - self.sf(hi)
        } else {
            self.cdf(hi) - self.cdf(lo)
        }
    }
}
