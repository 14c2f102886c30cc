//! CSV and aligned-text tables. Every CSV row carries its seed and B/R.

use std::fmt::Write;

use crate::bootstrap::{BootstrapResult, McResult, ProcessKind, StatKey};
use crate::estimate::FitResult;
use crate::stat::Norm;

fn num(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v:.6}")
    }
}

fn pct(v: f64) -> String {
    if v.is_nan() {
        "-".to_string()
    } else {
        format!("{:.1}", 100.0 * v)
    }
}

fn csv_line(fields: &[String]) -> String {
    let mut out = fields
        .iter()
        .map(|f| if f.contains([',', '"', '\n']) { format!("\"{}\"", f.replace('"', "\"\"")) } else { f.clone() })
        .collect::<Vec<_>>()
        .join(",");
    out.push('\n');
    out
}

/// Fixed-width table with a left-aligned first column.
fn aligned(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width = header.iter().map(|h| h.chars().count()).collect::<Vec<_>>();
    for r in rows {
        for (i, c) in r.iter().enumerate().take(cols) {
            width[i] = width[i].max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: &[String], out: &mut String| {
        for (i, c) in cells.iter().enumerate() {
            if i == 0 {
                let _ = write!(out, "{c:<w$}", w = width[0]);
            } else {
                let _ = write!(out, "  {c:>w$}", w = width[i]);
            }
        }
        out.push('\n');
    };
    line(header, &mut out);
    let total = width.iter().sum::<usize>() + 2 * (cols - 1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for r in rows {
        line(r, &mut out);
    }
    out
}

/// Distinct process kinds and norms in key order.
fn layout(keys: &[StatKey]) -> (Vec<ProcessKind>, Vec<Norm>) {
    let mut kinds = Vec::new();
    let mut norms = Vec::new();
    for k in keys {
        if !kinds.contains(&k.kind) {
            kinds.push(k.kind);
        }
        if !norms.contains(&k.norm) {
            norms.push(k.norm);
        }
    }
    (kinds, norms)
}

pub fn fit_csv(model: &str, names: &[String], fit: &FitResult) -> String {
    let mut out = csv_line(&["model", "parameter", "estimate", "std_error", "loglik", "converged", "iterations"].map(String::from));
    for (i, name) in names.iter().enumerate() {
        out.push_str(&csv_line(&[
            model.to_string(),
            name.clone(),
            num(fit.theta[i]),
            num(fit.std_errors[i]),
            num(fit.loglik),
            fit.converged.to_string(),
            fit.iterations.to_string(),
        ]));
    }
    out
}

pub fn fit_text(model: &str, names: &[String], fit: &FitResult) -> String {
    let header = vec![model.to_string(), "estimate".into(), "std.err".into()];
    let rows: Vec<Vec<String>> =
        names.iter().enumerate().map(|(i, n)| vec![n.clone(), num(fit.theta[i]), num(fit.std_errors[i])]).collect();
    let mut out = aligned(&header, &rows);
    let _ = writeln!(out, "loglik = {}, converged = {}, iterations = {}", num(fit.loglik), fit.converged, fit.iterations);
    out
}

/// One row per (model, statistic).
pub fn test_csv(results: &[(String, BootstrapResult)]) -> String {
    let mut out = csv_line(
        &["model", "process", "norm", "statistic", "critical", "p_value", "reject", "alpha", "B", "kept", "unreliable", "seed"]
            .map(String::from),
    );
    for (model, r) in results {
        let kept = r.kept.iter().filter(|k| **k).count();
        for (j, key) in r.keys.iter().enumerate() {
            out.push_str(&csv_line(&[
                model.clone(),
                key.kind.to_string(),
                key.norm.label().to_string(),
                num(r.observed[j]),
                num(r.critical[j]),
                num(r.p_values[j]),
                r.rejects(j).to_string(),
                format!("{}", r.alpha),
                r.requested.to_string(),
                kept.to_string(),
                r.unreliable().to_string(),
                r.seed.to_string(),
            ]));
        }
    }
    out
}

/// p-value tables, one block per norm: rows are models, columns processes.
pub fn test_text(results: &[(String, BootstrapResult)], kinds: &[ProcessKind], norms: &[Norm]) -> String {
    let mut out = String::new();
    for &norm in norms {
        let mut header = vec![format!("p-values ({})", norm.label())];
        header.extend(kinds.iter().map(|k| k.to_string()));
        let rows: Vec<Vec<String>> = results
            .iter()
            .map(|(model, r)| {
                let mut row = vec![model.clone()];
                for kind in kinds {
                    let cell = r
                        .keys
                        .iter()
                        .position(|k| k.kind == *kind && k.norm == norm)
                        .map_or("-".to_string(), |j| format!("{:.3}", r.p_values[j]));
                    row.push(cell);
                }
                row
            })
            .collect();
        out.push_str(&aligned(&header, &rows));
        out.push('\n');
    }
    if let Some((_, r)) = results.first() {
        let _ = writeln!(out, "B = {}, alpha = {}, seed = {}", r.requested, r.alpha, r.seed);
    }
    out
}

/// One row per (scenario, statistic).
pub fn mc_csv(results: &[(String, usize, McResult)], alpha: f64, seed: u64) -> String {
    let mut out = csv_line(
        &["scenario", "T", "process", "norm", "rejection_pct", "critical", "alpha", "R", "failed_fits", "failed_replicates", "seed"]
            .map(String::from),
    );
    for (name, t, r) in results {
        for (j, key) in r.keys.iter().enumerate() {
            out.push_str(&csv_line(&[
                name.clone(),
                t.to_string(),
                key.kind.to_string(),
                key.norm.label().to_string(),
                pct(r.rejection[j]),
                num(r.critical[j]),
                format!("{alpha}"),
                r.replications.to_string(),
                r.failed_fits.to_string(),
                r.failed_replicates.to_string(),
                seed.to_string(),
            ]));
        }
    }
    out
}

/// Rejection rates in percent, one block per norm.
pub fn mc_text(results: &[(String, usize, McResult)], alpha: f64, seed: u64) -> String {
    let Some((_, _, first)) = results.first() else {
        return String::new();
    };
    let (kinds, norms) = layout(&first.keys);
    let mut out = String::new();
    for norm in norms {
        let mut header = vec![format!("rejection % ({})", norm.label())];
        header.extend(kinds.iter().map(|k| k.to_string()));
        let rows: Vec<Vec<String>> = results
            .iter()
            .map(|(name, t, r)| {
                let mut row = vec![format!("{name} (T={t})")];
                for kind in &kinds {
                    let cell = r
                        .keys
                        .iter()
                        .position(|k| k.kind == *kind && k.norm == norm)
                        .map_or("-".to_string(), |j| pct(r.rejection[j]));
                    row.push(cell);
                }
                row
            })
            .collect();
        out.push_str(&aligned(&header, &rows));
        out.push('\n');
    }
    let _ = writeln!(out, "R = {}, alpha = {alpha}, seed = {seed}", first.replications);
    out
}
