use crate::error::{Error, Result};
use crate::transform::PitPair;

/// Cells with probability at or below this are treated as degenerate.
pub const PMF_FLOOR: f64 = 1e-12;

/// A discrete conditional law on `{1, ..., K}`, stored as its cdf table.
///
/// `cdf[0] = 0` and `cdf[K] = 1` exactly. Infinite supports are represented
/// after truncation, with the tail mass folded into the top cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalLaw {
    cdf: Vec<f64>,
}

impl ConditionalLaw {
    /// Build from cell probabilities `f(1), ..., f(K)`.
    pub fn from_pmf(pmf: &[f64]) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::Degenerate("empty support".into()));
        }
        let mut cdf = Vec::with_capacity(pmf.len() + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for (i, &p) in pmf.iter().enumerate() {
            if !(p > PMF_FLOOR) || !p.is_finite() {
                return Err(Error::Degenerate(format!("f({}) = {p:e}", i + 1)));
            }
            acc += p;
            cdf.push(acc);
        }
        if (acc - 1.0).abs() > 1e-10 {
            return Err(Error::Degenerate(format!("probabilities sum to {acc}")));
        }
        *cdf.last_mut().unwrap() = 1.0;
        Ok(ConditionalLaw { cdf })
    }

    /// Build from `F(1), ..., F(K)`; the last value is forced to exactly one.
    pub fn from_cdf(values: &[f64]) -> Result<Self> {
        Self::from_cdf_with_floor(values, PMF_FLOOR)
    }

    pub(crate) fn from_cdf_with_floor(values: &[f64], floor: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Degenerate("empty support".into()));
        }
        let last = *values.last().unwrap();
        if (last - 1.0).abs() > 1e-10 {
            return Err(Error::Degenerate(format!("cdf ends at {last}")));
        }
        let mut cdf = Vec::with_capacity(values.len() + 1);
        cdf.push(0.0);
        cdf.extend_from_slice(values);
        *cdf.last_mut().unwrap() = 1.0;
        for k in 1..cdf.len() {
            let f = cdf[k] - cdf[k - 1];
            if !(f > floor) {
                return Err(Error::Degenerate(format!("f({k}) = {f:e}")));
            }
        }
        Ok(ConditionalLaw { cdf })
    }

    /// Number of support points `K`.
    pub fn top(&self) -> u32 {
        (self.cdf.len() - 1) as u32
    }

    /// `F(k)`, with `F(0) = 0` and `F(k) = 1` for `k >= K`.
    pub fn cdf(&self, k: u32) -> f64 {
        self.cdf.get(k as usize).copied().unwrap_or(1.0)
    }

    pub fn pmf(&self, k: u32) -> f64 {
        if k == 0 || k > self.top() {
            0.0
        } else {
            self.cdf(k) - self.cdf(k - 1)
        }
    }

    pub fn pmf_vec(&self) -> Vec<f64> {
        (1..=self.top()).map(|k| self.pmf(k)).collect()
    }

    pub fn cdf_table(&self) -> &[f64] {
        &self.cdf
    }

    /// Smallest support point `y` with `F(y) >= u`.
    pub fn quantile(&self, u: f64) -> Result<u32> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::Domain(format!("quantile level {u} outside (0, 1]")));
        }
        let k = self.cdf[1..].partition_point(|&c| c < u) + 1;
        Ok(k.min(self.cdf.len() - 1) as u32)
    }

    /// `(F(k-1), F(k))`; outcomes above the top cell map to the top cell.
    pub fn pit_pair(&self, k: u32) -> PitPair {
        let k = k.clamp(1, self.top());
        PitPair::from_raw(self.cdf(k - 1), self.cdf(k))
    }

    /// The nonrandomized transform `I_F(k, u)`.
    pub fn transform(&self, k: u32, u: f64) -> f64 {
        self.pit_pair(k).transform(u)
    }
}

/// The local-alternative law `(1 - δ/√T) F + (δ/√T) H`.
pub fn mixture_law(
    f: &ConditionalLaw,
    h: &ConditionalLaw,
    delta: f64,
    t: usize,
) -> Result<ConditionalLaw> {
    let root = (t as f64).sqrt();
    if !(delta >= 0.0 && delta < root) {
        return Err(Error::Domain(format!("delta = {delta} outside [0, sqrt(T) = {root})")));
    }
    if f.top() != h.top() {
        return Err(Error::Dimension(format!(
            "support sizes differ: {} vs {}",
            f.top(),
            h.top()
        )));
    }
    let w = delta / root;
    let cdf = f
        .cdf
        .iter()
        .zip(&h.cdf)
        .map(|(a, b)| (1.0 - w) * a + w * b)
        .collect::<Vec<_>>();
    ConditionalLaw::from_cdf_with_floor(&cdf[1..], 0.0)
}
