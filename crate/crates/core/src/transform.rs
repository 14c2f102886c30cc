//! The nonrandomized transform, its jittered variants, and the closed-form
//! helper functionals used to describe its moments and drift.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{ConditionalLaw, LawJet};
use crate::rng::stream;

/// `(F(Y - 1), F(Y))` for one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitPair {
    pub lower: f64,
    pub upper: f64,
}

impl PitPair {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(0.0 <= lower && lower < upper && upper <= 1.0) {
            return Err(Error::Degenerate(format!("invalid PIT pair ({lower}, {upper})")));
        }
        Ok(PitPair { lower, upper })
    }

    /// Trusted constructor for pairs read off a validated law.
    pub(crate) fn from_raw(lower: f64, upper: f64) -> Self {
        debug_assert!(lower < upper);
        PitPair { lower, upper }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// `I(u)`: 0 below the cell, linear across it, 1 above.
    #[inline]
    pub fn transform(&self, u: f64) -> f64 {
        if u <= self.lower {
            0.0
        } else if u >= self.upper {
            1.0
        } else {
            (u - self.lower) / (self.upper - self.lower)
        }
    }

    /// Jittered PIT `U⁻ + z (U - U⁻)`.
    #[inline]
    pub fn randomized(&self, z: f64) -> f64 {
        self.lower + z * (self.upper - self.lower)
    }

    /// Share of the jittered draws at or below `u`.
    pub fn m_random(&self, z_row: &[f64], u: f64) -> Result<f64> {
        if z_row.is_empty() {
            return Err(Error::Domain("M-random transform needs M >= 1".into()));
        }
        let hits = z_row.iter().filter(|&&z| self.randomized(z) <= u).count();
        Ok(hits as f64 / z_row.len() as f64)
    }
}

/// The PIT pairs of a sample and the breakpoints they induce on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformSeries {
    pairs: Vec<PitPair>,
    breakpoints: Vec<f64>,
}

impl TransformSeries {
    pub fn new(pairs: Vec<PitPair>) -> Self {
        let mut bp = Vec::with_capacity(2 * pairs.len() + 2);
        bp.push(0.0);
        bp.push(1.0);
        for p in &pairs {
            bp.push(p.lower);
            bp.push(p.upper);
        }
        bp.sort_by(f64::total_cmp);
        bp.dedup();
        TransformSeries { pairs, breakpoints: bp }
    }

    pub fn pairs(&self) -> &[PitPair] {
        &self.pairs
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `I_t(u)` for every `t`.
    pub fn transform_at(&self, u: f64) -> Vec<f64> {
        self.pairs.iter().map(|p| p.transform(u)).collect()
    }
}

/// `T × M` uniform noise, one column per independent jitter sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    seed: Option<(u64, u64)>,
}

impl NoiseMatrix {
    /// Draws from `[0, 1)`, row-major.
    pub fn draw<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Self> {
        if cols == 0 {
            return Err(Error::Domain("noise needs M >= 1 columns".into()));
        }
        let data = (0..rows * cols).map(|_| rng.random::<f64>()).collect();
        Ok(NoiseMatrix { rows, cols, data, seed: None })
    }

    /// Reproducible draw from `(master, stream id)`.
    pub fn seeded(rows: usize, cols: usize, master: u64, id: u64) -> Result<Self> {
        let mut m = Self::draw(rows, cols, &mut stream(master, id))?;
        m.seed = Some((master, id));
        Ok(m)
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::Domain("noise needs M >= 1 columns".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!("{} noise values for a {rows}×{cols} matrix", data.len())));
        }
        if data.iter().any(|z| !(0.0..1.0).contains(z)) {
            return Err(Error::Domain("noise values must lie in [0, 1)".into()));
        }
        Ok(NoiseMatrix { rows, cols, data, seed: None })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }

    pub fn get(&self, t: usize, m: usize) -> f64 {
        self.data[t * self.cols + m]
    }

    pub fn seed(&self) -> Option<(u64, u64)> {
        self.seed
    }

    /// The first `m` columns.
    pub fn leading(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.cols {
            return Err(Error::Dimension(format!("cannot take {m} of {} noise columns", self.cols)));
        }
        let data = (0..self.rows).flat_map(|t| self.row(t)[..m].to_vec()).collect();
        Ok(NoiseMatrix { rows: self.rows, cols: m, data, seed: self.seed })
    }
}

fn check_level(u: f64) -> Result<()> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::Domain(format!("level {u} outside (0, 1]")));
    }
    Ok(())
}

/// `(F(F⁻¹u) - u) / f(F⁻¹u)`, the relative position of `u` below its cell top.
pub fn delta_f(law: &ConditionalLaw, u: f64) -> Result<f64> {
    check_level(u)?;
    let k = law.quantile(u)?;
    Ok((law.cdf(k) - u) / law.pmf(k))
}

/// `E[I(u) I(v)] = u ∧ v - γ(u, v)`; nonzero only when `u` and `v` share a cell.
///
/// A zero level gives zero.
pub fn gamma(law: &ConditionalLaw, u: f64, v: f64) -> Result<f64> {
    if u == 0.0 || v == 0.0 {
        return Ok(0.0);
    }
    check_level(u)?;
    check_level(v)?;
    let k = law.quantile(u)?;
    if k != law.quantile(v)? {
        return Ok(0.0);
    }
    let (hi, lo) = (u.max(v), u.min(v));
    Ok((law.cdf(k) - hi) * (lo - law.cdf(k - 1)) / law.pmf(k))
}

/// The two-level form `(δ(u ∨ v) - δ(u)δ(v)) f(k) 1{same cell}`; equal to [`gamma`].
pub fn delta_f_pair(law: &ConditionalLaw, u: f64, v: f64) -> Result<f64> {
    let k = law.quantile(u)?;
    if k != law.quantile(v)? {
        return Ok(0.0);
    }
    let c = delta_f(law, u.max(v))? - delta_f(law, u)? * delta_f(law, v)?;
    Ok(c * law.pmf(k))
}

fn same_support(g: &ConditionalLaw, f: &ConditionalLaw) -> Result<()> {
    if g.top() != f.top() {
        return Err(Error::Dimension(format!("support sizes differ: {} vs {}", g.top(), f.top())));
    }
    Ok(())
}

/// `d(G, F, u) = E_G[I_F(Y, u)] - u`, in closed form.
pub fn discrepancy_d(g: &ConditionalLaw, f: &ConditionalLaw, u: f64) -> Result<f64> {
    same_support(g, f)?;
    if u == 0.0 {
        return Ok(0.0);
    }
    let k = f.quantile(u)?;
    Ok(g.cdf(k) - f.cdf(k) - delta_f(f, u)? * (g.pmf(k) - f.pmf(k)))
}

/// Second-moment drift: `E_G[I_F(u) I_F(v)] = u ∧ v - γ_F(u, v) + d(G, F, u, v)`.
pub fn discrepancy_d2(g: &ConditionalLaw, f: &ConditionalLaw, u: f64, v: f64) -> Result<f64> {
    same_support(g, f)?;
    if u == 0.0 || v == 0.0 {
        return Ok(0.0);
    }
    let base = discrepancy_d(g, f, u.min(v))?;
    let k = f.quantile(u)?;
    if k != f.quantile(v)? {
        return Ok(base);
    }
    let c = delta_f(f, u.max(v))? - delta_f(f, u)? * delta_f(f, v)?;
    Ok(base - c * (g.pmf(k) - f.pmf(k)))
}

/// `∂/∂θ d(F_{θ+h}, F_θ, u)` at `h = 0`: `Ḟ(k) - δ_F(u) ḟ(k)` with `k = F⁻¹u`.
pub fn nabla_drift(jet: &LawJet, u: f64) -> Result<Vec<f64>> {
    check_level(u)?;
    let k = jet.law.quantile(u)?;
    let delta = delta_f(&jet.law, u)?;
    let cdf_grad = jet.cdf_grad(k);
    let pmf_grad = jet.pmf_grad(k);
    Ok(cdf_grad.iter().zip(&pmf_grad).map(|(a, b)| a - delta * b).collect())
}
