//! Parametric bootstrap of the test statistics and the warp-speed Monte Carlo.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{fit_mle, FitOptions, FitResult};
use crate::model::{ModelSpec, ObservationSeries};
use crate::process::{r1m_profile, r2m_surface, s1_profile, s2_surface, GridSettings, MarkedProcess};
use crate::rng::{stream, StreamRng};
use crate::stat::{cvm_1d, cvm_2d, ks_1d, ks_2d, Measure, Norm};
use crate::transform::NoiseMatrix;

/// Which process a statistic is built on. `m` is the number of jitter draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProcessKind {
    S1,
    S2,
    R1 { m: usize },
    R2 { m: usize },
    Z,
}

impl ProcessKind {
    /// Parse labels such as `S2`, `R1`, `R2M(25)`, `Z`.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        let with_m = |rest: &str| -> Result<usize> {
            let inner = rest
                .strip_prefix("M(")
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| Error::Config(format!("unrecognized process `{t}`")))?;
            let m: usize = inner.parse().map_err(|_| Error::Config(format!("bad jitter count in `{t}`")))?;
            if m == 0 {
                return Err(Error::Config(format!("`{t}` needs M >= 1")));
            }
            Ok(m)
        };
        match t {
            "S1" => Ok(ProcessKind::S1),
            "S2" => Ok(ProcessKind::S2),
            "R1" => Ok(ProcessKind::R1 { m: 1 }),
            "R2" => Ok(ProcessKind::R2 { m: 1 }),
            "Z" => Ok(ProcessKind::Z),
            _ if t.starts_with("R1") => Ok(ProcessKind::R1 { m: with_m(&t[2..])? }),
            _ if t.starts_with("R2") => Ok(ProcessKind::R2 { m: with_m(&t[2..])? }),
            _ => Err(Error::Config(format!("unrecognized process `{t}`"))),
        }
    }

    fn jitter(self) -> Option<usize> {
        match self {
            ProcessKind::R1 { m } | ProcessKind::R2 { m } => Some(m),
            _ => None,
        }
    }
}

impl fmt::Display for ProcessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessKind::S1 => write!(f, "S1"),
            ProcessKind::S2 => write!(f, "S2"),
            ProcessKind::R1 { m: 1 } => write!(f, "R1"),
            ProcessKind::R2 { m: 1 } => write!(f, "R2"),
            ProcessKind::R1 { m } => write!(f, "R1M({m})"),
            ProcessKind::R2 { m } => write!(f, "R2M({m})"),
            ProcessKind::Z => write!(f, "Z"),
        }
    }
}

/// One (process, norm) combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StatKey {
    pub kind: ProcessKind,
    pub norm: Norm,
}

impl fmt::Display for StatKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.kind, self.norm.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatPlan {
    pub keys: Vec<StatKey>,
    pub grid: GridSettings,
}

impl StatPlan {
    /// Every process paired with every norm, processes outermost.
    pub fn product(kinds: &[ProcessKind], norms: &[Norm], grid: GridSettings) -> Self {
        let keys = kinds.iter().flat_map(|&kind| norms.iter().map(move |&norm| StatKey { kind, norm })).collect();
        StatPlan { keys, grid }
    }

    /// The nine-column battery: S2, R2M(50), R2M(25), R2, S1, R1M(50), R1M(25), R1, Z.
    pub fn battery(norms: &[Norm]) -> Self {
        use ProcessKind::*;
        let kinds = [S2, R2 { m: 50 }, R2 { m: 25 }, R2 { m: 1 }, S1, R1 { m: 50 }, R1 { m: 25 }, R1 { m: 1 }, Z];
        Self::product(&kinds, norms, GridSettings::default())
    }
}

/// Evaluate every statistic of `plan` at `theta`, drawing fresh jitter noise
/// from `rng`. Noise for a given `M` is shared by `R1M(M)` and `R2M(M)`.
pub fn compute_statistics(
    spec: &ModelSpec,
    theta: &[f64],
    series: &ObservationSeries,
    plan: &StatPlan,
    rng: &mut StreamRng,
) -> Result<Vec<f64>> {
    let ts = spec.transform_series(theta, series)?;
    let n = ts.len();
    let mut noise = BTreeMap::new();
    let mut ms: Vec<usize> = plan.keys.iter().filter_map(|k| k.kind.jitter()).collect();
    ms.sort_unstable();
    ms.dedup();
    for m in ms {
        noise.insert(m, NoiseMatrix::draw(n, m, rng)?);
    }
    let mut marked = None;
    let mut out = Vec::with_capacity(plan.keys.len());
    for key in &plan.keys {
        let measure = Measure::Lebesgue;
        let v = match key.kind {
            ProcessKind::S1 => {
                let p = s1_profile(&ts);
                match key.norm {
                    Norm::Ks => ks_1d(&p).value,
                    Norm::Cvm => cvm_1d(&p, measure).value,
                }
            }
            ProcessKind::R1 { m } => {
                let p = r1m_profile(&ts, &noise[&m])?;
                match key.norm {
                    Norm::Ks => ks_1d(&p).value,
                    Norm::Cvm => cvm_1d(&p, measure).value,
                }
            }
            ProcessKind::S2 => {
                let s = s2_surface(&ts, plan.grid)?;
                match key.norm {
                    Norm::Ks => ks_2d(&s).value,
                    Norm::Cvm => cvm_2d(&s, measure).value,
                }
            }
            ProcessKind::R2 { m } => {
                let s = r2m_surface(&ts, &noise[&m], plan.grid)?;
                match key.norm {
                    Norm::Ks => ks_2d(&s).value,
                    Norm::Cvm => cvm_2d(&s, measure).value,
                }
            }
            ProcessKind::Z => {
                if marked.is_none() {
                    marked = Some(MarkedProcess::new(spec, theta, series)?);
                }
                let z = marked.as_ref().unwrap();
                match key.norm {
                    Norm::Ks => z.pooled_ks(),
                    Norm::Cvm => z.pooled_cvm(),
                }
            }
        };
        out.push(v);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Extra simulated periods discarded before each bootstrap sample.
    pub burn_in: usize,
    pub fit: FitOptions,
}

impl BootstrapOptions {
    pub fn new(replicates: usize, alpha: f64, seed: u64) -> Self {
        BootstrapOptions { replicates, alpha, seed, burn_in: 0, fit: FitOptions::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.replicates < 19 {
            return Err(Error::Config(format!("B = {} is below the minimum of 19", self.replicates)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha = {} outside (0, 1)", self.alpha)));
        }
        Ok(())
    }
}

/// Share of dropped replicates above which a result is flagged.
pub const MAX_DROP_SHARE: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct BootstrapResult {
    pub keys: Vec<StatKey>,
    pub observed: Vec<f64>,
    /// `replicates[j]` holds the retained draws of statistic `j`, in replicate order.
    pub replicates: Vec<Vec<f64>>,
    pub critical: Vec<f64>,
    pub p_values: Vec<f64>,
    pub alpha: f64,
    pub seed: u64,
    pub requested: usize,
    /// Per replicate: whether the refit succeeded and was kept.
    pub kept: Vec<bool>,
    pub fit: FitResult,
}

impl BootstrapResult {
    pub fn dropped(&self) -> usize {
        self.kept.iter().filter(|k| !**k).count()
    }

    pub fn unreliable(&self) -> bool {
        self.dropped() as f64 > MAX_DROP_SHARE * self.requested as f64
    }

    pub fn rejects(&self, j: usize) -> bool {
        self.observed[j] > self.critical[j]
    }
}

/// Empirical `(1 - α)` percentile: the `⌈(1 - α) n⌉`-th order statistic.
pub fn upper_quantile(values: &[f64], alpha: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((1.0 - alpha) * v.len() as f64 - 1e-9).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

/// `(1 + #{η* ≥ η}) / (B + 1)`.
pub fn p_value(observed: f64, draws: &[f64]) -> f64 {
    let above = draws.iter().filter(|&&d| d >= observed).count();
    (1 + above) as f64 / (draws.len() + 1) as f64
}

/// Simulate from `theta` along the covariates and pre-sample of `series`.
pub fn simulate_like(
    spec: &ModelSpec,
    theta: &[f64],
    series: &ObservationSeries,
    burn_in: usize,
    rng: &mut StreamRng,
) -> Result<ObservationSeries> {
    if burn_in == 0 {
        return spec.simulate(theta, series.x(), series.presample(), rng);
    }
    let (n, p) = (series.len(), series.n_covariates());
    // Burn-in periods reuse the first covariate row.
    let x = DMatrix::from_fn(burn_in + n, p, |t, j| series.x()[(t.saturating_sub(burn_in), j)]);
    let long = spec.simulate(theta, &x, series.presample(), rng)?;
    let out = ObservationSeries::new(long.y()[burn_in..].to_vec(), series.x().clone(), series.support())?;
    match series.presample() {
        Some(_) => out.with_presample(long.y()[burn_in - 1]),
        None => Ok(out),
    }
}

/// One bootstrap draw: simulate from the fitted null, refit, recompute.
fn replicate(
    spec: &ModelSpec,
    theta: &[f64],
    series: &ObservationSeries,
    plan: &StatPlan,
    burn_in: usize,
    fit: FitOptions,
    rng: &mut StreamRng,
) -> Option<Vec<f64>> {
    let sim = simulate_like(spec, theta, series, burn_in, rng).ok()?;
    let refit = fit_mle(spec, &sim, fit).ok()?;
    if !refit.converged {
        return None;
    }
    compute_statistics(spec, &refit.theta, &sim, plan, rng).ok()
}

/// Fit, compute the observed statistics, and bootstrap their null law.
///
/// Replicate `b` draws from stream `b + 1` of the master seed; the observed
/// statistics use stream 0. Failed or non-converged refits are dropped.
pub fn parametric_bootstrap(
    series: &ObservationSeries,
    spec: &ModelSpec,
    plan: &StatPlan,
    options: &BootstrapOptions,
) -> Result<BootstrapResult> {
    options.validate()?;
    let fit = fit_mle(spec, series, options.fit)?;
    if !fit.converged {
        return Err(Error::NonConvergence(format!(
            "original fit stopped after {} iterations with score sup-norm {:e}",
            fit.iterations,
            fit.score.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        )));
    }
    let observed = compute_statistics(spec, &fit.theta, series, plan, &mut stream(options.seed, 0))?;
    let draws: Vec<Option<Vec<f64>>> = (0..options.replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(options.seed, b as u64 + 1);
            replicate(spec, &fit.theta, series, plan, options.burn_in, options.fit, &mut rng)
        })
        .collect();
    let kept: Vec<bool> = draws.iter().map(Option::is_some).collect();
    let mut replicates = vec![Vec::new(); plan.keys.len()];
    for d in draws.into_iter().flatten() {
        for (j, v) in d.into_iter().enumerate() {
            replicates[j].push(v);
        }
    }
    let critical = replicates.iter().map(|r| upper_quantile(r, options.alpha)).collect();
    let p_values = observed.iter().zip(&replicates).map(|(&o, r)| p_value(o, r)).collect();
    let result = BootstrapResult {
        keys: plan.keys.clone(),
        observed,
        replicates,
        critical,
        p_values,
        alpha: options.alpha,
        seed: options.seed,
        requested: options.replicates,
        kept,
        fit,
    };
    if result.unreliable() {
        log::warn!("{} of {} bootstrap refits failed; result flagged unreliable", result.dropped(), result.requested);
    }
    Ok(result)
}

/// A Monte Carlo design: data from `truth`, tested against `null`.
#[derive(Debug, Clone)]
pub struct McDesign {
    pub name: String,
    pub truth: ModelSpec,
    pub truth_theta: Vec<f64>,
    pub null: ModelSpec,
    /// Covariates for the burn-in periods followed by the `T` sample periods.
    pub x: DMatrix<f64>,
    pub burn_in: usize,
    /// Pre-sample outcome for the first burn-in period.
    pub presample: Option<u32>,
}

impl McDesign {
    pub fn sample_size(&self) -> usize {
        self.x.nrows() - self.burn_in
    }

    /// Draw one sample from the truth, discarding the burn-in.
    pub fn draw(&self, rng: &mut StreamRng) -> Result<ObservationSeries> {
        let long = self.truth.simulate(&self.truth_theta, &self.x, self.presample, rng)?;
        let x = self.x.rows(self.burn_in, self.sample_size()).into_owned();
        let out = ObservationSeries::new(long.y()[self.burn_in..].to_vec(), x, long.support())?;
        let pre = if self.burn_in > 0 { Some(long.y()[self.burn_in - 1]) } else { self.presample };
        match pre {
            Some(v) => out.with_presample(v),
            None => Ok(out),
        }
    }
}

#[derive(Debug, Clone)]
pub struct McResult {
    pub keys: Vec<StatKey>,
    pub replications: usize,
    /// Replications whose original fit failed.
    pub failed_fits: usize,
    /// Replications whose single bootstrap refit failed.
    pub failed_replicates: usize,
    pub observed: Vec<Vec<f64>>,
    pub pooled: Vec<Vec<f64>>,
    pub critical: Vec<f64>,
    pub rejection: Vec<f64>,
}

struct McDraw {
    observed: Option<Vec<f64>>,
    boot: Option<Vec<f64>>,
}

/// Warp-speed Monte Carlo: one bootstrap replicate per replication, pooled
/// across replications as the null reference.
///
/// Replication `r` uses streams `2r` (data and observed noise) and `2r + 1`
/// (bootstrap replicate) of `seed`.
pub fn warp_mc(design: &McDesign, plan: &StatPlan, replications: usize, alpha: f64, seed: u64, fit: FitOptions) -> Result<McResult> {
    if replications == 0 {
        return Err(Error::Config("need at least one Monte Carlo replication".into()));
    }
    if design.truth.support() != design.null.support() {
        return Err(Error::Config(format!("scenario `{}`: truth and null supports differ", design.name)));
    }
    let draws: Vec<McDraw> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, 2 * r as u64);
            let series = match design.draw(&mut rng) {
                Ok(s) => s,
                Err(_) => return McDraw { observed: None, boot: None },
            };
            let fitted = match fit_mle(&design.null, &series, fit) {
                Ok(f) if f.converged => f,
                _ => return McDraw { observed: None, boot: None },
            };
            let observed = compute_statistics(&design.null, &fitted.theta, &series, plan, &mut rng).ok();
            let mut brng = stream(seed, 2 * r as u64 + 1);
            let boot = replicate(&design.null, &fitted.theta, &series, plan, 0, fit, &mut brng);
            McDraw { observed, boot }
        })
        .collect();
    let k = plan.keys.len();
    let mut observed = vec![Vec::new(); k];
    let mut pooled = vec![Vec::new(); k];
    let mut failed_fits = 0;
    let mut failed_replicates = 0;
    for d in draws {
        match d.observed {
            Some(o) => o.into_iter().enumerate().for_each(|(j, v)| observed[j].push(v)),
            None => {
                failed_fits += 1;
                continue;
            }
        }
        match d.boot {
            Some(b) => b.into_iter().enumerate().for_each(|(j, v)| pooled[j].push(v)),
            None => failed_replicates += 1,
        }
    }
    let critical: Vec<f64> = pooled.iter().map(|p| upper_quantile(p, alpha)).collect();
    let rejection = observed
        .iter()
        .zip(&critical)
        .map(|(o, &c)| {
            if o.is_empty() || c.is_nan() {
                f64::NAN
            } else {
                o.iter().filter(|&&v| v > c).count() as f64 / o.len() as f64
            }
        })
        .collect();
    Ok(McResult { keys: plan.keys.clone(), replications, failed_fits, failed_replicates, observed, pooled, critical, rejection })
}
