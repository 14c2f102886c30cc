//! The four command-line verbs as library functions returning report files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::bootstrap::{parametric_bootstrap, warp_mc, BootstrapOptions, McResult, ProcessKind, StatPlan, MAX_DROP_SHARE};
use crate::error::{Error, Result};
use crate::estimate::{fit_mle, FitOptions};
use crate::model::{ModelSpec, Support};
use crate::rng::stream;

use super::config::{CovariateConfig, ModelConfig, RunConfig};
use super::ingest::{ingest_csv, ColumnMap, Ingested, OutcomeColumn, RATE_THRESHOLDS};
use super::report;
use super::scenario::{CovariateGen, ScenarioSpec, SCENARIOS};

/// Stream ids reserved for `simulate`, far from the low ids the bootstrap and
/// Monte Carlo use, so simulating and testing with one seed shares no draws.
pub const SIMULATE_OUTCOME_STREAM: u64 = u64::MAX - 1000;
pub const SIMULATE_COVARIATE_STREAM: u64 = u64::MAX - 1001;

/// Replication counts below this get a warning.
pub const MIN_SENSIBLE_REPLICATIONS: usize = 100;

/// Named output files and a human-readable summary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub files: Vec<(String, String)>,
    pub summary: String,
    /// Set when estimation failed too often for the numbers to be trusted.
    /// The files are still complete.
    pub failure: Option<String>,
}

impl Report {
    /// Write every file under `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, text) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, text)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn column_map(cfg: &RunConfig, model: &ModelConfig) -> Result<ColumnMap> {
    let data = cfg.data.as_ref().ok_or_else(|| Error::Config("a [data] section is required".into()))?;
    let outcome = match (&data.y, &data.rate) {
        (Some(y), None) => OutcomeColumn::Coded(y.clone()),
        (None, Some(r)) => OutcomeColumn::Discretized {
            column: r.clone(),
            thresholds: data.thresholds.clone().unwrap_or_else(|| RATE_THRESHOLDS.to_vec()),
        },
        _ => return Err(Error::Config("[data] needs exactly one of `y` and `rate`".into())),
    };
    if let OutcomeColumn::Discretized { thresholds, .. } = &outcome {
        if thresholds.windows(2).any(|w| w[0] >= w[1]) || thresholds.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("[data] thresholds must be finite and increasing".into()));
        }
    }
    Ok(ColumnMap { outcome, covariates: model.covariates.clone() })
}

fn load(cfg: &RunConfig, model: &ModelConfig, spec: &ModelSpec) -> Result<Ingested> {
    let data = cfg.data.as_ref().ok_or_else(|| Error::Config("a [data] section is required".into()))?;
    let map = column_map(cfg, model)?;
    let ingested = ingest_csv(&cfg.resolve(&data.path), &map, spec.support(), spec.is_dynamic())?;
    spec.check_series(&ingested.series)?;
    Ok(ingested)
}

fn models(cfg: &RunConfig) -> Result<Vec<(&ModelConfig, ModelSpec)>> {
    if cfg.models.is_empty() {
        return Err(Error::Config("at least one [[model]] is required".into()));
    }
    cfg.models.iter().map(|m| Ok((m, m.spec()?))).collect()
}

/// The marked-residual process needs a single-index ordered model.
fn plan_for(spec: &ModelSpec, plan: &StatPlan) -> StatPlan {
    let keys = plan
        .keys
        .iter()
        .copied()
        .filter(|k| k.kind != ProcessKind::Z || matches!(spec, ModelSpec::Ordered(_)))
        .collect();
    StatPlan { keys, grid: plan.grid }
}

fn mapping_file(cfg: &RunConfig) -> String {
    cfg.data
        .as_ref()
        .and_then(|d| d.mapping.as_ref())
        .and_then(|p| p.file_name())
        .map_or_else(|| "mapping.csv".to_string(), |n| n.to_string_lossy().into_owned())
}

/// Fit every configured model by maximum likelihood.
pub fn run_fit(cfg: &RunConfig) -> Result<Report> {
    let mut out = Report::default();
    let mut text = String::new();
    let mut mapping = None;
    for (model, spec) in models(cfg)? {
        let data = load(cfg, model, &spec)?;
        let fit = fit_mle(&spec, &data.series, FitOptions::default())?;
        if !fit.converged {
            log::warn!("model `{}` did not converge in {} iterations", model.name, fit.iterations);
            out.failure = Some(format!("model `{}` did not converge", model.name));
        }
        let names = spec.param_names();
        out.files.push((format!("fit_{}.csv", model.name), report::fit_csv(&model.name, &names, &fit)));
        text.push_str(&report::fit_text(&model.name, &names, &fit));
        text.push('\n');
        if mapping.is_none() && !data.mapping.is_empty() {
            mapping = Some(data.mapping_csv());
        }
    }
    if let Some(m) = mapping {
        out.files.push((mapping_file(cfg), m));
    }
    out.files.push(("fit.txt".into(), text.clone()));
    out.summary = text;
    Ok(out)
}

/// Bootstrap goodness-of-fit tests for every configured model.
pub fn run_test(cfg: &RunConfig) -> Result<Report> {
    let seed = cfg.require_seed()?;
    let plan = cfg.plan.plan()?;
    let kinds = cfg.plan.kinds()?;
    let mut options = BootstrapOptions::new(cfg.bootstrap.replicates, cfg.bootstrap.alpha, seed);
    options.burn_in = cfg.bootstrap.burn_in;
    let mut results = Vec::new();
    let mut mapping = None;
    for (model, spec) in models(cfg)? {
        let data = load(cfg, model, &spec)?;
        let plan = plan_for(&spec, &plan);
        if plan.keys.is_empty() {
            return Err(Error::Config(format!("model `{}`: no applicable processes in the plan", model.name)));
        }
        log::info!("model `{}`: T = {}, B = {}", model.name, data.series.len(), options.replicates);
        let result = parametric_bootstrap(&data.series, &spec, &plan, &options)?;
        if mapping.is_none() && !data.mapping.is_empty() {
            mapping = Some(data.mapping_csv());
        }
        results.push((model.name.clone(), result));
    }
    let text = report::test_text(&results, &kinds, &cfg.plan.norms);
    let mut out = Report::default();
    out.files.push(("test.csv".into(), report::test_csv(&results)));
    out.files.push(("test.txt".into(), text.clone()));
    if let Some(m) = mapping {
        out.files.push((mapping_file(cfg), m));
    }
    out.summary = text;
    for (name, r) in &results {
        if r.unreliable() {
            let msg = format!("model `{name}` dropped {} of {} bootstrap replicates", r.dropped(), r.requested);
            let _ = writeln!(out.summary, "warning: {msg}");
            out.failure = Some(msg);
        }
    }
    Ok(out)
}

/// Simulate a series from a configured model at given parameters.
///
/// Draws come from the reserved simulation streams of the seed. For dynamic
/// models the first row carries the pre-sample outcome, so the file
/// reads back with the same convention `fit` and `test` use.
pub fn run_simulate(cfg: &RunConfig) -> Result<Report> {
    let seed = cfg.require_seed()?;
    let sim = cfg.simulate.as_ref().ok_or_else(|| Error::Config("a [simulate] section is required".into()))?;
    let model = cfg.model(&sim.model)?;
    let spec = model.spec()?;
    spec.validate(&sim.theta)?;
    if sim.t < 2 {
        return Err(Error::Config("simulate.t must be at least 2".into()));
    }
    let p = spec.n_covariates();
    let gen = match sim.covariates {
        CovariateConfig::Iid => CovariateGen::IidNormal { dim: p },
        CovariateConfig::Ar1 { coef } => CovariateGen::Ar1 { dim: p, coef },
    };
    let lead = usize::from(spec.is_dynamic());
    let x = gen.generate(lead + sim.t, seed, SIMULATE_COVARIATE_STREAM)?;
    let presample = match (spec.is_dynamic(), sim.presample) {
        (true, None) => return Err(Error::Config("simulate.presample is required for a dynamic model".into())),
        (_, pre) => pre,
    };
    if let (Support::Finite(k), Some(v)) = (spec.support(), presample) {
        if v == 0 || v > k {
            return Err(Error::Config(format!("simulate.presample {v} is outside 1..={k}")));
        }
    }
    let body = x.rows(lead, sim.t).into_owned();
    let series = spec.simulate(&sim.theta, &body, presample, &mut stream(seed, SIMULATE_OUTCOME_STREAM))?;

    let names: Vec<String> =
        if model.covariates.is_empty() { (1..=p).map(|j| format!("x{j}")).collect() } else { model.covariates.clone() };
    let coded = |v: u32| match spec.support() {
        Support::Finite(_) => v,
        Support::CountablyInfinite => v - 1,
    };
    let mut csv = String::from("y");
    for n in &names {
        csv.push(',');
        csv.push_str(n);
    }
    csv.push('\n');
    let mut row = |y: u32, t: usize| {
        csv.push_str(&coded(y).to_string());
        for j in 0..p {
            let _ = write!(csv, ",{:.10}", x[(t, j)]);
        }
        csv.push('\n');
    };
    if let (true, Some(v)) = (spec.is_dynamic(), presample) {
        row(v, 0);
    }
    for (t, &y) in series.y().iter().enumerate() {
        row(y, lead + t);
    }
    let summary = format!("simulated {} observations from `{}` (seed {seed})\n", sim.t, model.name);
    Ok(Report { files: vec![("simulated.csv".into(), csv)], summary, failure: None })
}

/// Warp-speed Monte Carlo for one built-in scenario.
///
/// The covariate design is fixed from the seed and the scenario's position in
/// the built-in list, so adding or reordering scenarios in a config does not
/// change any one scenario's numbers.
pub fn scenario_mc(name: &str, t: usize, plan: &StatPlan, replications: usize, alpha: f64, seed: u64) -> Result<McResult> {
    let sc = ScenarioSpec::builtin(name, t)?;
    let id = SCENARIOS.iter().position(|s| *s == name).unwrap_or(0) as u64;
    let design = sc.design(seed, u64::MAX - id)?;
    log::info!("scenario `{name}`: {}", sc.description);
    warp_mc(&design, plan, replications, alpha, seed, FitOptions::default())
}

/// Warp-speed Monte Carlo size and power study over built-in scenarios.
pub fn run_mc(cfg: &RunConfig) -> Result<Report> {
    let seed = cfg.require_seed()?;
    let mc = cfg.mc.as_ref().ok_or_else(|| Error::Config("an [mc] section is required".into()))?;
    if mc.scenarios.is_empty() {
        return Err(Error::Config("mc.scenarios is empty".into()));
    }
    if mc.replications < MIN_SENSIBLE_REPLICATIONS {
        log::warn!("only {} Monte Carlo replications; rejection rates will be noisy", mc.replications);
    }
    let alpha = cfg.bootstrap.alpha;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha {alpha} is outside (0, 1)")));
    }
    let plan = cfg.plan.plan()?;
    let mut results = Vec::new();
    for name in &mc.scenarios {
        let r = scenario_mc(name, mc.t, &plan, mc.replications, alpha, seed)?;
        results.push((name.clone(), mc.t, r));
    }
    let text = report::mc_text(&results, alpha, seed);
    let mut summary = text.clone();
    let mut failure = None;
    for (name, _, r) in &results {
        if r.failed_fits + r.failed_replicates > 0 {
            let _ = writeln!(
                summary,
                "note: `{name}` had {} failed fits and {} failed bootstrap refits",
                r.failed_fits, r.failed_replicates
            );
        }
        if (r.failed_fits + r.failed_replicates) as f64 > MAX_DROP_SHARE * r.replications as f64 {
            failure = Some(format!("scenario `{name}`: too many failed fits"));
        }
    }
    Ok(Report {
        files: vec![("mc.csv".into(), report::mc_csv(&results, alpha, seed)), ("mc.txt".into(), text)],
        summary,
        failure,
    })
}
