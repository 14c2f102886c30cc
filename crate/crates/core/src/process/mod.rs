//! Empirical processes built from the transform, in exact piecewise form.
//!
//! Univariate processes are piecewise affine between knots and are stored as
//! the pair of one-sided values on every knot interval. Bivariate processes
//! are either bilinear on a rectangular grid or, for jittered indicators, a
//! cellwise constant minus a multiple of `u₁u₂`.

mod marked;

pub use marked::MarkedProcess;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::transform::{NoiseMatrix, TransformSeries};

/// When to replace exact bivariate cells by a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSettings {
    /// Largest knot count evaluated exactly.
    pub exact_limit: usize,
    /// Nodes per axis of the fallback grid.
    pub grid: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings { exact_limit: 1024, grid: 101 }
    }
}

impl GridSettings {
    pub fn exact() -> Self {
        GridSettings { exact_limit: usize::MAX, grid: 101 }
    }

    fn use_grid(&self, knots: usize) -> bool {
        knots > self.exact_limit
    }
}

fn uniform_grid(n: usize) -> Vec<f64> {
    let n = n.max(2);
    let step = (n - 1) as f64;
    (0..n).map(|i| i as f64 / step).collect()
}

/// A piecewise affine function on `[0, 1]`, possibly with jumps at knots.
///
/// On `[knots[i], knots[i+1])` the function runs linearly from `start[i]` to
/// the left limit `end[i]`; `terminal` is the value at `u = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile1d {
    knots: Vec<f64>,
    start: Vec<f64>,
    end: Vec<f64>,
    terminal: f64,
}

impl Profile1d {
    /// A continuous profile from its values at strictly increasing knots.
    pub fn continuous(knots: Vec<f64>, values: Vec<f64>) -> Self {
        assert!(knots.len() >= 2 && knots.len() == values.len());
        let terminal = *values.last().unwrap();
        let start = values[..values.len() - 1].to_vec();
        let end = values[1..].to_vec();
        Profile1d { knots, start, end, terminal }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn end(&self) -> &[f64] {
        &self.end
    }

    pub fn terminal(&self) -> f64 {
        self.terminal
    }

    pub fn eval(&self, u: f64) -> f64 {
        let n = self.knots.len();
        if u >= self.knots[n - 1] {
            return self.terminal;
        }
        let i = self.knots.partition_point(|&k| k <= u).saturating_sub(1);
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        self.start[i] + (self.end[i] - self.start[i]) * (u - a) / (b - a)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Profile1d {
            knots: self.knots.clone(),
            start: self.start.iter().map(|v| c * v).collect(),
            end: self.end.iter().map(|v| c * v).collect(),
            terminal: c * self.terminal,
        }
    }
}

/// A bivariate process on a shared knot vector for both axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface2d {
    knots: Vec<f64>,
    shape: SurfaceShape,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceShape {
    /// Values at every knot pair; bilinear inside cells.
    Bilinear(DMatrix<f64>),
    /// `levels[(i, j)] - slope · u₁u₂` on `[k_i, k_{i+1}) × [k_j, k_{j+1})`;
    /// the last row and column cover the lines `u = 1`.
    Step { levels: DMatrix<f64>, slope: f64 },
}

impl Surface2d {
    /// A bilinear surface from its values at every knot pair.
    pub fn bilinear(knots: Vec<f64>, values: DMatrix<f64>) -> Self {
        assert!(knots.len() >= 2 && values.nrows() == knots.len() && values.ncols() == knots.len());
        Surface2d { knots, shape: SurfaceShape::Bilinear(values) }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn shape(&self) -> &SurfaceShape {
        &self.shape
    }

    fn locate(&self, u: f64) -> usize {
        let n = self.knots.len();
        if u >= self.knots[n - 1] {
            n - 1
        } else {
            self.knots.partition_point(|&k| k <= u).saturating_sub(1)
        }
    }

    pub fn eval(&self, u1: f64, u2: f64) -> f64 {
        let (i, j) = (self.locate(u1), self.locate(u2));
        match &self.shape {
            SurfaceShape::Step { levels, slope } => levels[(i, j)] - slope * u1 * u2,
            SurfaceShape::Bilinear(v) => {
                let n = self.knots.len();
                let (i, j) = (i.min(n - 2), j.min(n - 2));
                let (a0, a1) = (self.knots[i], self.knots[i + 1]);
                let (b0, b1) = (self.knots[j], self.knots[j + 1]);
                let s = (u1 - a0) / (a1 - a0);
                let r = (u2 - b0) / (b1 - b0);
                (1.0 - s) * (1.0 - r) * v[(i, j)]
                    + s * (1.0 - r) * v[(i + 1, j)]
                    + (1.0 - s) * r * v[(i, j + 1)]
                    + s * r * v[(i + 1, j + 1)]
            }
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let shape = match &self.shape {
            SurfaceShape::Bilinear(v) => SurfaceShape::Bilinear(v * c),
            SurfaceShape::Step { levels, slope } => SurfaceShape::Step { levels: levels * c, slope: slope * c },
        };
        Surface2d { knots: self.knots.clone(), shape }
    }
}

/// Either a univariate or a bivariate process.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessHandle {
    Univariate(Profile1d),
    Bivariate(Surface2d),
}

fn check_noise(ts: &TransformSeries, noise: &NoiseMatrix) -> Result<()> {
    if noise.rows() != ts.len() {
        return Err(Error::Dimension(format!(
            "noise has {} rows for {} observations",
            noise.rows(),
            ts.len()
        )));
    }
    Ok(())
}

fn check_bivariate(ts: &TransformSeries) -> Result<()> {
    if ts.len() < 2 {
        return Err(Error::Dimension("bivariate process needs T >= 2".into()));
    }
    Ok(())
}

/// `T^{-1/2} Σ_t (I_t(u) - u)`.
pub fn s1_eval(ts: &TransformSeries, u: f64) -> f64 {
    let n = ts.len() as f64;
    ts.pairs().iter().map(|p| p.transform(u) - u).sum::<f64>() / n.sqrt()
}

/// `(T-1)^{-1/2} Σ_{t≥2} (I_t(u₁) I_{t-1}(u₂) - u₁u₂)`.
pub fn s2_eval(ts: &TransformSeries, u1: f64, u2: f64) -> Result<f64> {
    check_bivariate(ts)?;
    let p = ts.pairs();
    let acc: f64 = p.windows(2).map(|w| w[1].transform(u1) * w[0].transform(u2) - u1 * u2).sum();
    Ok(acc / ((p.len() - 1) as f64).sqrt())
}

/// `T^{1/2} (M^{-1} T^{-1} Σ_{t,m} 1{U^r_{t,m} ≤ u} - u)`.
pub fn r1m_eval(ts: &TransformSeries, noise: &NoiseMatrix, u: f64) -> Result<f64> {
    check_noise(ts, noise)?;
    let mut acc = 0.0;
    for (t, p) in ts.pairs().iter().enumerate() {
        acc += p.m_random(noise.row(t), u)? - u;
    }
    Ok(acc / (ts.len() as f64).sqrt())
}

/// Jittered analogue of [`s2_eval`]; noise column `m` pairs `t` with `t - 1`.
pub fn r2m_eval(ts: &TransformSeries, noise: &NoiseMatrix, u1: f64, u2: f64) -> Result<f64> {
    check_noise(ts, noise)?;
    check_bivariate(ts)?;
    let p = ts.pairs();
    let m = noise.cols();
    let mut acc = 0.0;
    for t in 1..p.len() {
        let hits = (0..m)
            .filter(|&c| p[t].randomized(noise.get(t, c)) <= u1 && p[t - 1].randomized(noise.get(t - 1, c)) <= u2)
            .count();
        acc += hits as f64 / m as f64 - u1 * u2;
    }
    Ok(acc / ((p.len() - 1) as f64).sqrt())
}

/// Exact profile of `S₁`; knots are the transform breakpoints.
pub fn s1_profile(ts: &TransformSeries) -> Profile1d {
    let knots = ts.breakpoints().to_vec();
    let values = knots.iter().map(|&u| s1_eval(ts, u)).collect();
    Profile1d::continuous(knots, values)
}

/// Jittered PIT values `U^r_{t,m}`, row-major.
fn jittered(ts: &TransformSeries, noise: &NoiseMatrix) -> Vec<f64> {
    let m = noise.cols();
    let mut out = Vec::with_capacity(ts.len() * m);
    for (t, p) in ts.pairs().iter().enumerate() {
        out.extend(noise.row(t).iter().map(|&z| p.randomized(z)));
    }
    debug_assert_eq!(out.len(), ts.len() * m);
    out
}

fn sorted_knots(values: &[f64]) -> Vec<f64> {
    let mut k = Vec::with_capacity(values.len() + 2);
    k.push(0.0);
    k.push(1.0);
    k.extend_from_slice(values);
    k.sort_by(f64::total_cmp);
    k.dedup();
    k
}

/// Exact step profile of `R_{1T,M}`.
pub fn r1m_profile(ts: &TransformSeries, noise: &NoiseMatrix) -> Result<Profile1d> {
    check_noise(ts, noise)?;
    let mut draws = jittered(ts, noise);
    draws.sort_by(f64::total_cmp);
    let knots = sorted_knots(&draws);
    let total = draws.len() as f64;
    let root = (ts.len() as f64).sqrt();
    let mut start = Vec::with_capacity(knots.len() - 1);
    let mut end = Vec::with_capacity(knots.len() - 1);
    let mut seen = 0usize;
    for w in knots.windows(2) {
        while seen < draws.len() && draws[seen] <= w[0] {
            seen += 1;
        }
        let level = seen as f64 / total;
        start.push(root * (level - w[0]));
        end.push(root * (level - w[1]));
    }
    Ok(Profile1d { knots, start, end, terminal: 0.0 })
}

/// `I_t(k_i)` for every `t` (rows) and knot (columns).
fn transform_matrix(ts: &TransformSeries, knots: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(ts.len(), knots.len(), |t, i| ts.pairs()[t].transform(knots[i]))
}

/// `S₂` as a bilinear surface: exact on the breakpoint grid, or sampled on a
/// uniform grid when the breakpoint count exceeds `settings.exact_limit`.
pub fn s2_surface(ts: &TransformSeries, settings: GridSettings) -> Result<Surface2d> {
    check_bivariate(ts)?;
    let knots = if settings.use_grid(ts.breakpoints().len()) {
        uniform_grid(settings.grid)
    } else {
        ts.breakpoints().to_vec()
    };
    let a = transform_matrix(ts, &knots);
    let n = ts.len();
    let lead = a.rows(1, n - 1);
    let lag = a.rows(0, n - 1);
    let mut v = lead.transpose() * lag;
    let pairs = (n - 1) as f64;
    let scale = pairs.sqrt().recip();
    for i in 0..knots.len() {
        for j in 0..knots.len() {
            v[(i, j)] = scale * (v[(i, j)] - pairs * knots[i] * knots[j]);
        }
    }
    Ok(Surface2d { knots, shape: SurfaceShape::Bilinear(v) })
}

/// Count of jittered pairs `(U^r_{t,m}, U^r_{t-1,m})` at or below each knot pair.
fn pair_counts(draws: &[f64], m: usize, n: usize, knots: &[f64]) -> DMatrix<f64> {
    let g = knots.len();
    let bin = |x: f64| knots.partition_point(|&k| k < x).min(g - 1);
    let mut hist = DMatrix::<f64>::zeros(g, g);
    for t in 1..n {
        for c in 0..m {
            hist[(bin(draws[t * m + c]), bin(draws[(t - 1) * m + c]))] += 1.0;
        }
    }
    for i in 0..g {
        for j in 1..g {
            hist[(i, j)] += hist[(i, j - 1)];
        }
    }
    for i in 1..g {
        for j in 0..g {
            hist[(i, j)] += hist[(i - 1, j)];
        }
    }
    hist
}

/// `R_{2T,M}`: exact cellwise form, or node values on a uniform grid (treated
/// as bilinear) when the jittered knot count exceeds `settings.exact_limit`.
pub fn r2m_surface(ts: &TransformSeries, noise: &NoiseMatrix, settings: GridSettings) -> Result<Surface2d> {
    check_noise(ts, noise)?;
    check_bivariate(ts)?;
    let (n, m) = (ts.len(), noise.cols());
    let draws = jittered(ts, noise);
    let exact_knots = sorted_knots(&draws);
    let pairs = (n - 1) as f64;
    let scale = pairs.sqrt().recip();
    let per_noise = 1.0 / m as f64;
    if settings.use_grid(exact_knots.len()) {
        let knots = uniform_grid(settings.grid);
        let counts = pair_counts(&draws, m, n, &knots);
        let v = DMatrix::from_fn(knots.len(), knots.len(), |i, j| {
            scale * (counts[(i, j)] * per_noise - pairs * knots[i] * knots[j])
        });
        Ok(Surface2d { knots, shape: SurfaceShape::Bilinear(v) })
    } else {
        let counts = pair_counts(&draws, m, n, &exact_knots);
        let levels = counts * (scale * per_noise);
        Ok(Surface2d { knots: exact_knots, shape: SurfaceShape::Step { levels, slope: pairs.sqrt() } })
    }
}
