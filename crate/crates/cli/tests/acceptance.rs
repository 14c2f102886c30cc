//! Acceptance suite. Each criterion prints one `PASS` or `FAIL` line with its
//! measured values; the process exits non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use discgof::bootstrap::{ProcessKind, StatKey, StatPlan};
use discgof::estimate::{fit_mle, information, loglik, score, FitOptions};
use discgof::harness::run::scenario_mc;
use discgof::model::{ConditionalLaw, Link, ModelSpec, ObservationSeries, OrderedChoiceSpec, PoissonLink, PoissonSpec};
use discgof::process::{
    r1m_eval, r1m_profile, r2m_eval, r2m_surface, s1_eval, s1_profile, s2_eval, s2_surface, GridSettings,
};
use discgof::rng::{stream, StreamRng};
use discgof::stat::{cvm_1d, cvm_2d, ks_1d, ks_2d, Measure, Norm};
use discgof::transform::{delta_f, discrepancy_d, discrepancy_d2, gamma, NoiseMatrix, PitPair, TransformSeries};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn run(name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut out = f();
    let took = start.elapsed();
    if let Some(b) = budget {
        if took > b {
            out.pass = false;
            out.detail.push_str(&format!("; over the {}s budget", b.as_secs()));
        }
    }
    println!(
        "{} {name}: {} [{:.1}s]",
        if out.pass { "PASS" } else { "FAIL" },
        out.detail,
        took.as_secs_f64()
    );
    out.pass
}

fn random_law(rng: &mut StreamRng, k: usize) -> ConditionalLaw {
    let w: Vec<f64> = (0..k).map(|_| 0.02 + rng.random::<f64>()).collect();
    let s: f64 = w.iter().sum();
    ConditionalLaw::from_pmf(&w.iter().map(|v| v / s).collect::<Vec<_>>()).unwrap()
}

/// A law on the same support as `f`, either close to it or unrelated.
fn partner_law(rng: &mut StreamRng, f: &ConditionalLaw) -> ConditionalLaw {
    let k = f.top() as usize;
    if rng.random::<bool>() {
        let eps = 10f64.powf(-3.0 * rng.random::<f64>());
        let w: Vec<f64> = f.pmf_vec().iter().map(|p| p * (1.0 + eps * (rng.random::<f64>() - 0.5))).collect();
        let s: f64 = w.iter().sum();
        ConditionalLaw::from_pmf(&w.iter().map(|v| v / s).collect::<Vec<_>>()).unwrap()
    } else {
        random_law(rng, k)
    }
}

/// Random levels in `(0, 1]` plus every cell edge of `law`.
fn levels(rng: &mut StreamRng, law: &ConditionalLaw, n: usize) -> Vec<f64> {
    let mut u: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
    u.extend(&law.cdf_table()[1..]);
    u
}

fn identity_suite() -> bool {
    let started = Instant::now();
    let mut pass = true;
    pass &= run("identity: mean E_F[I_F(Y,u)] = u", None, || {
        let mut rng = stream(SEED, 1);
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let k = rng.random_range(2..=12);
            let f = random_law(&mut rng, k);
            for u in levels(&mut rng, &f, 60) {
                let m: f64 = (1..=f.top()).map(|y| f.pmf(y) * f.transform(y, u)).sum();
                worst = worst.max((m - u).abs());
            }
        }
        Outcome { pass: worst <= 1e-12, detail: format!("max error {worst:.2e} over 200 laws x 60+ levels (tol 1e-12)") }
    });
    pass &= run("identity: second moment E_F[I(u)I(v)] = min(u,v) - gamma(u,v)", None, || {
        let mut rng = stream(SEED, 2);
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let k = rng.random_range(2..=12);
            let f = random_law(&mut rng, k);
            let lv = levels(&mut rng, &f, 60);
            for &u in &lv {
                for &v in lv.iter().step_by(3) {
                    let m: f64 = (1..=f.top()).map(|y| f.pmf(y) * f.transform(y, u) * f.transform(y, v)).sum();
                    let rhs = u.min(v) - gamma(&f, u, v).unwrap();
                    worst = worst.max((m - rhs).abs());
                }
            }
        }
        Outcome { pass: worst <= 1e-12, detail: format!("max error {worst:.2e} (tol 1e-12)") }
    });
    pass &= run("identity: product I(u)I(v) = I(u^v) - (delta(u v v) - delta(u)delta(v)) 1{same cell}", None, || {
        let mut rng = stream(SEED, 3);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let k = rng.random_range(2..=10);
            let f = random_law(&mut rng, k);
            let mut grid: Vec<f64> = (1..=80).map(|i| i as f64 / 80.0).collect();
            grid.extend(&f.cdf_table()[1..]);
            for y in 1..=f.top() {
                for &u in &grid {
                    for &v in &grid {
                        let lhs = f.transform(y, u) * f.transform(y, v);
                        let cell = f.quantile(u).unwrap();
                        let same = y == cell && cell == f.quantile(v).unwrap();
                        let corr = if same {
                            delta_f(&f, u.max(v)).unwrap() - delta_f(&f, u).unwrap() * delta_f(&f, v).unwrap()
                        } else {
                            0.0
                        };
                        let rhs = f.transform(y, u.min(v)) - corr;
                        worst = worst.max((lhs - rhs).abs());
                    }
                }
            }
        }
        Outcome { pass: worst <= 1e-14, detail: format!("max error {worst:.2e} over full support x 81^2 grid (rounding only)") }
    });
    pass &= run("identity: perturbation bound (factor 9) and increment bound", None, || {
        let mut rng = stream(SEED, 4);
        let mut viol = 0usize;
        let mut checks = 0usize;
        let mut worst_ratio = 0.0f64;
        let grid: Vec<f64> = (1..=50).map(|i| i as f64 / 50.0).collect();
        for _ in 0..500 {
            let k = rng.random_range(2..=10);
            let f = random_law(&mut rng, k);
            let h = partner_law(&mut rng, &f);
            let sup = (1..=f.top()).map(|j| (f.cdf(j) - h.cdf(j)).abs()).fold(0.0, f64::max);
            let mut us = grid.clone();
            us.extend(&f.cdf_table()[1..]);
            us.extend(&h.cdf_table()[1..]);
            for &u in &us {
                let second: f64 = (1..=f.top()).map(|y| f.pmf(y) * (f.transform(y, u) - h.transform(y, u)).powi(2)).sum();
                checks += 1;
                if second > 9.0 * sup + 1e-15 {
                    viol += 1;
                }
                if sup > 0.0 {
                    worst_ratio = worst_ratio.max(second / sup);
                }
                for y in 1..=f.top() {
                    let diff = (f.transform(y, u) - h.transform(y, u)).abs();
                    let num = (f.cdf(y) - h.cdf(y)).abs().max((f.cdf(y - 1) - h.cdf(y - 1)).abs());
                    let bound = 1f64.min(num / f.pmf(y).max(h.pmf(y)));
                    checks += 1;
                    if diff > bound + 1e-12 {
                        viol += 1;
                    }
                }
            }
            // Increment bound, its equality case, and the modulus bound on short intervals.
            for y in 1..=f.top() {
                let (lo, hi) = (f.cdf(y - 1), f.cdf(y));
                let g = |u: f64| f.transform(y, u) - u;
                for &u in grid.iter().step_by(2) {
                    for &v in grid.iter().step_by(3) {
                        let inc = (g(u) - g(v)).abs();
                        checks += 1;
                        if inc > (u - v).abs().max(1.0 - f.pmf(y)) + 1e-12 {
                            viol += 1;
                        }
                        if (u <= lo && v <= lo) || (u >= hi && v >= hi) {
                            checks += 1;
                            if (inc - (u - v).abs()).abs() > 1e-12 {
                                viol += 1;
                            }
                        }
                    }
                }
            }
            let eps = 0.05 + 0.3 * rng.random::<f64>();
            let a = rng.random::<f64>() * (1.0 - eps * eps);
            let b = a + eps * eps;
            let modulus: f64 = (1..=f.top())
                .map(|y| {
                    let g = |u: f64| f.transform(y, u) - u;
                    let mut pts = vec![a, b];
                    pts.extend(f.cdf_table().iter().copied().filter(|c| *c > a && *c < b));
                    let vals: Vec<f64> = pts.iter().map(|&u| g(u)).collect();
                    let spread = vals.iter().fold(f64::MIN, |m, v| m.max(*v)) - vals.iter().fold(f64::MAX, |m, v| m.min(*v));
                    f.pmf(y) * spread * spread
                })
                .sum();
            checks += 1;
            if modulus > 4.0 * eps * eps + 1e-15 {
                viol += 1;
            }
        }
        Outcome {
            pass: viol == 0,
            detail: format!("{viol} violations in {checks} checks on 500 law pairs; max E|I_F-I_H|^2 / sup|F-H| = {worst_ratio:.3} (bound 9)"),
        }
    });
    pass &= run("identity: d(G,F,u) and d(G,F,u,v) equal brute-force expectations", None, || {
        let mut rng = stream(SEED, 5);
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let k = rng.random_range(2..=12);
            let f = random_law(&mut rng, k);
            let g = partner_law(&mut rng, &f);
            let lv = levels(&mut rng, &f, 60);
            for &u in &lv {
                let brute: f64 = (1..=f.top()).map(|y| g.pmf(y) * f.transform(y, u)).sum::<f64>() - u;
                worst = worst.max((discrepancy_d(&g, &f, u).unwrap() - brute).abs());
                for &v in lv.iter().step_by(7) {
                    let second: f64 = (1..=f.top()).map(|y| g.pmf(y) * f.transform(y, u) * f.transform(y, v)).sum();
                    let brute2 = second - (u.min(v) - gamma(&f, u, v).unwrap());
                    worst = worst.max((discrepancy_d2(&g, &f, u, v).unwrap() - brute2).abs());
                }
            }
        }
        Outcome { pass: worst <= 1e-12, detail: format!("max error {worst:.2e} (tol 1e-12)") }
    });
    let took = started.elapsed().as_secs_f64();
    pass &= run("identity suite runtime", None, || Outcome { pass: took < 5.0, detail: format!("{took:.2}s for all identities (limit 5s)") });
    pass
}

/// PIT pairs of `n` draws, each from its own random law; every third period
/// reuses the previous law so breakpoints repeat.
fn random_series(rng: &mut StreamRng, n: usize) -> TransformSeries {
    let mut pairs = Vec::with_capacity(n);
    let mut law = random_law(rng, 4);
    for t in 0..n {
        if t % 3 != 2 {
            let k = rng.random_range(2..=6);
            law = random_law(rng, k);
        }
        let y = law.quantile(1.0 - rng.random::<f64>()).unwrap();
        pairs.push(law.pit_pair(y));
    }
    TransformSeries::new(pairs)
}

/// Smallest `z` in `[0, 1]` whose jittered value exceeds `u`, by bisection on
/// the jitter map alone: the probability that one uniform draw lands at or
/// below `u`.
fn hit_probability(p: &PitPair, u: f64) -> f64 {
    if p.randomized(1.0) <= u {
        return 1.0;
    }
    if p.randomized(0.0) > u {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if p.randomized(mid) <= u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn noise_suite() -> bool {
    run("noise decomposition: E[R1M R1M] = (1/M)E[R1 R1] + (1-1/M) S1 S1", Some(Duration::from_secs(60)), || {
        let mut rng = stream(SEED, 10);
        let ts = random_series(&mut rng, 50);
        let n = ts.len() as f64;
        let pairs_uv = [(0.2, 0.2), (0.3, 0.7), (0.5, 0.5), (0.8, 0.45), (0.9, 0.9)];

        // Per-period closed forms against jitter-map probabilities.
        let mut worst_t = 0.0f64;
        for p in ts.pairs() {
            for &(u, v) in &pairs_uv {
                let (cu, cv) = (hit_probability(p, u), hit_probability(p, v));
                worst_t = worst_t.max((cu - p.transform(u)).abs());
                for m in [1usize, 5, 25] {
                    let mf = m as f64;
                    let exact = cu.min(cv) / mf + (1.0 - 1.0 / mf) * cu * cv;
                    let closed = p.transform(u.min(v)) / mf + (1.0 - 1.0 / mf) * p.transform(u) * p.transform(v);
                    worst_t = worst_t.max((exact - closed).abs());
                }
            }
        }

        let closed = |m: usize, u: f64, v: f64| {
            let jitter: f64 = ts.pairs().iter().map(|p| p.transform(u.min(v)) - p.transform(u) * p.transform(v)).sum::<f64>() / n;
            let r1r1 = s1_eval(&ts, u) * s1_eval(&ts, v) + jitter;
            r1r1 / m as f64 + (1.0 - 1.0 / m as f64) * s1_eval(&ts, u) * s1_eval(&ts, v)
        };
        let draws = 10_000usize;
        let mut worst_z = 0.0f64;
        for m in [1usize, 5, 25] {
            let sums: Vec<(f64, f64)> = (0..draws)
                .into_par_iter()
                .map(|d| {
                    let noise = NoiseMatrix::seeded(ts.len(), m, SEED + m as u64, d as u64).unwrap();
                    pairs_uv
                        .iter()
                        .map(|&(u, v)| r1m_eval(&ts, &noise, u).unwrap() * r1m_eval(&ts, &noise, v).unwrap())
                        .collect::<Vec<f64>>()
                })
                .collect::<Vec<_>>()
                .into_iter()
                .fold(vec![(0.0, 0.0); pairs_uv.len()], |mut acc, prods| {
                    for (a, x) in acc.iter_mut().zip(prods) {
                        a.0 += x;
                        a.1 += x * x;
                    }
                    acc
                });
            for (j, &(u, v)) in pairs_uv.iter().enumerate() {
                let mean = sums[j].0 / draws as f64;
                let var = (sums[j].1 / draws as f64 - mean * mean).max(0.0);
                let se = (var / draws as f64).sqrt();
                worst_z = worst_z.max((mean - closed(m, u, v)).abs() / se);
            }
        }
        Outcome {
            pass: worst_t <= 1e-12 && worst_z <= 3.0,
            detail: format!(
                "per-period closed form max error {worst_t:.1e}; noise MC (1e4 draws, T=50, M=1,5,25) worst deviation {worst_z:.2} SE (limit 3)"
            ),
        }
    })
}

/// Three-point Gauss-Legendre nodes and weights on [0, 1]; interior only, so
/// right-continuous jumps on cell edges do not leak into a cell.
const GL3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];
const LEFT: f64 = 1e-13;

fn merged(knots: &[f64], dense: usize) -> Vec<f64> {
    let mut g: Vec<f64> = (0..=dense).map(|i| i as f64 / dense as f64).collect();
    g.extend(knots.iter().copied().filter(|k| (0.0..=1.0).contains(k)));
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

fn oracle_1d(eval: &dyn Fn(f64) -> f64, knots: &[f64], dense: usize) -> (f64, f64) {
    let g = merged(knots, dense);
    let mut sup = 0.0f64;
    for &u in &g {
        sup = sup.max(eval(u).abs());
        if u > LEFT {
            sup = sup.max(eval(u - LEFT).abs());
        }
    }
    let mut cvm = 0.0;
    for w in g.windows(2) {
        let h = w[1] - w[0];
        cvm += GL3.iter().map(|(x, wt)| wt * eval(w[0] + x * h).powi(2)).sum::<f64>() * h;
    }
    (sup, cvm)
}

fn oracle_2d(eval: &dyn Fn(f64, f64) -> f64, knots: &[f64], dense: usize) -> (f64, f64) {
    let g = merged(knots, dense);
    let mut sup = 0.0f64;
    for &a in &g {
        for &b in &g {
            for (da, db) in [(0.0, 0.0), (LEFT, 0.0), (0.0, LEFT), (LEFT, LEFT)] {
                if a >= da && b >= db {
                    sup = sup.max(eval(a - da, b - db).abs());
                }
            }
        }
    }
    let mut cvm = 0.0;
    for wa in g.windows(2) {
        let ha = wa[1] - wa[0];
        for wb in g.windows(2) {
            let hb = wb[1] - wb[0];
            let mut cell = 0.0;
            for (xa, wta) in GL3 {
                for (xb, wtb) in GL3 {
                    cell += wta * wtb * eval(wa[0] + xa * ha, wb[0] + xb * hb).powi(2);
                }
            }
            cvm += cell * ha * hb;
        }
    }
    (sup, cvm)
}

fn jitter_knots(ts: &TransformSeries, noise: &NoiseMatrix) -> Vec<f64> {
    let mut k: Vec<f64> = (0..ts.len())
        .flat_map(|t| (0..noise.cols()).map(move |m| (t, m)))
        .map(|(t, m)| ts.pairs()[t].randomized(noise.get(t, m)))
        .collect();
    k.sort_by(f64::total_cmp);
    k.dedup();
    k
}

fn norm_suite() -> bool {
    let datasets: Vec<(TransformSeries, NoiseMatrix, NoiseMatrix)> = (0..20u64)
        .map(|d| {
            let mut rng = stream(SEED, 100 + d);
            let n = rng.random_range(8..=50);
            let ts = random_series(&mut rng, n);
            let n1 = NoiseMatrix::seeded(n, 1 + (d as usize % 5), SEED, 200 + d).unwrap();
            let n2 = NoiseMatrix::seeded(n, 1 + (d as usize % 3), SEED, 300 + d).unwrap();
            (ts, n1, n2)
        })
        .collect();
    let mut pass = run("norm exactness 1D: exact KS/CvM of S1 and R1M vs dense-grid oracle", None, || {
        let mut worst = 0.0f64;
        for (ts, noise, _) in &datasets {
            let s1 = s1_profile(ts);
            let (sup, cvm) = oracle_1d(&|u| s1_eval(ts, u), ts.breakpoints(), 10_000);
            worst = worst.max((ks_1d(&s1).value - sup).abs()).max((cvm_1d(&s1, Measure::Lebesgue).value - cvm).abs());
            let r1 = r1m_profile(ts, noise).unwrap();
            let (sup, cvm) = oracle_1d(&|u| r1m_eval(ts, noise, u).unwrap(), &jitter_knots(ts, noise), 10_000);
            worst = worst.max((ks_1d(&r1).value - sup).abs()).max((cvm_1d(&r1, Measure::Lebesgue).value - cvm).abs());
        }
        Outcome { pass: worst <= 1e-8, detail: format!("max |exact - oracle| {worst:.2e} on 20 datasets, T <= 50 (tol 1e-8)") }
    });
    pass &= run("norm exactness 2D: exact KS/CvM of S2 and R2M vs dense-grid oracle", None, || {
        let worst = datasets
            .par_iter()
            .map(|(ts, _, noise)| {
                let exact = GridSettings::exact();
                let s2 = s2_surface(ts, exact).unwrap();
                let (sup, cvm) = oracle_2d(&|a, b| s2_eval(ts, a, b).unwrap(), ts.breakpoints(), 64);
                let mut w = (ks_2d(&s2).value - sup).abs().max((cvm_2d(&s2, Measure::Lebesgue).value - cvm).abs());
                let r2 = r2m_surface(ts, noise, exact).unwrap();
                let (sup, cvm) = oracle_2d(&|a, b| r2m_eval(ts, noise, a, b).unwrap(), &jitter_knots(ts, noise), 64);
                w = w.max((ks_2d(&r2).value - sup).abs()).max((cvm_2d(&r2, Measure::Lebesgue).value - cvm).abs());
                w
            })
            .reduce(|| 0.0, f64::max);
        Outcome { pass: worst <= 1e-6, detail: format!("max |exact - oracle| {worst:.2e} on 20 datasets, T <= 50 (tol 1e-6)") }
    });
    pass
}

fn ordered(link: Link, dynamic: bool) -> ModelSpec {
    ModelSpec::Ordered(OrderedChoiceSpec::new(link, 4, dynamic, 2).unwrap())
}

fn estimation_designs() -> Vec<(&'static str, ModelSpec, Vec<f64>)> {
    let logit = 1.7;
    let stat = vec![0.8, -0.6, -1.0, 0.0, 1.0];
    let dynamic = vec![0.8, -0.6, -0.5, -2.25, -1.25, -0.25];
    vec![
        ("static probit", ordered(Link::Probit, false), stat.clone()),
        ("static logit", ordered(Link::Logit, false), stat.iter().map(|v| v * logit).collect()),
        ("dynamic probit", ordered(Link::Probit, true), dynamic.clone()),
        ("dynamic logit", ordered(Link::Logit, true), dynamic.iter().map(|v| v * logit).collect()),
        (
            "identity-ar Poisson",
            ModelSpec::Poisson(PoissonSpec::new(PoissonLink::IdentityAr, 0, 2.0).unwrap()),
            vec![1.0, 0.3, 0.4],
        ),
    ]
}

fn draw(spec: &ModelSpec, theta: &[f64], t: usize, rep: u64) -> ObservationSeries {
    let p = spec.n_covariates();
    let mut rng = stream(SEED + 7, rep);
    let x = DMatrix::from_fn(t, p, |_, _| StandardNormal.sample(&mut rng));
    let pre = spec.is_dynamic().then_some(2);
    spec.simulate(theta, &x, pre, &mut rng).unwrap()
}

fn estimation_suite() -> bool {
    let mut pass = run("estimation: theta-hat +- 3 SE covers theta0, T=2000, 200 replications", None, || {
        let mut lines = Vec::new();
        let mut ok = true;
        for (name, spec, theta) in estimation_designs() {
            let hits: Vec<Vec<bool>> = (0..200u64)
                .into_par_iter()
                .map(|r| {
                    let s = draw(&spec, &theta, 2000, r);
                    match fit_mle(&spec, &s, FitOptions::default()) {
                        Ok(f) if f.converged => {
                            f.theta.iter().zip(&f.std_errors).zip(&theta).map(|((e, se), t)| (e - t).abs() <= 3.0 * se).collect()
                        }
                        _ => vec![false; theta.len()],
                    }
                })
                .collect();
            let worst = (0..theta.len())
                .map(|j| hits.iter().filter(|h| h[j]).count() as f64 / hits.len() as f64)
                .fold(1.0, f64::min);
            ok &= worst >= 0.93;
            lines.push(format!("{name} {:.1}%", 100.0 * worst));
        }
        Outcome { pass: ok, detail: format!("lowest componentwise coverage: {} (need >= 93%)", lines.join(", ")) }
    });
    pass &= run("estimation: analytic score/information vs central finite differences", None, || {
        let mut extra = estimation_designs();
        extra.push(("exp-static Poisson", ModelSpec::Poisson(PoissonSpec::new(PoissonLink::ExpStatic, 2, 1.0).unwrap()), vec![0.5, -0.3]));
        extra.push(("log-ar Poisson", ModelSpec::Poisson(PoissonSpec::new(PoissonLink::LogAr, 2, 1.0).unwrap()), vec![0.3, -0.2, 0.4]));
        let (mut ws, mut wi) = (0.0f64, 0.0f64);
        for (_, spec, theta) in &extra {
            let s = draw(spec, theta, 2000, 999);
            let at: Vec<f64> = theta.iter().map(|v| v * 0.97 + 0.01).collect();
            let g = score(spec, &at, &s).unwrap();
            let h = information(spec, &at, &s).unwrap();
            let e = 1e-5;
            for i in 0..at.len() {
                let (mut up, mut dn) = (at.clone(), at.clone());
                up[i] += e;
                dn[i] -= e;
                let fd = (loglik(spec, &up, &s).unwrap() - loglik(spec, &dn, &s).unwrap()) / (2.0 * e);
                ws = ws.max((fd - g[i]).abs() / g[i].abs().max(1.0));
                let (su, sd) = (score(spec, &up, &s).unwrap(), score(spec, &dn, &s).unwrap());
                for j in 0..at.len() {
                    let fdh = -(su[j] - sd[j]) / (2.0 * e);
                    wi = wi.max((fdh - h[(j, i)]).abs() / h[(j, i)].abs().max(1.0));
                }
            }
        }
        Outcome {
            pass: ws <= 1e-5 && wi <= 1e-4,
            detail: format!("max relative error: score {ws:.1e} (tol 1e-5), information {wi:.1e} (tol 1e-4), 7 model types"),
        }
    });
    pass
}

fn rate(r: &discgof::bootstrap::McResult, kind: ProcessKind, norm: Norm) -> f64 {
    let j = r.keys.iter().position(|k| *k == StatKey { kind, norm }).unwrap();
    100.0 * r.rejection[j]
}

fn mc_suite() -> bool {
    use ProcessKind::*;
    let plan = StatPlan::battery(&[Norm::Cvm, Norm::Ks]);
    let mc = |name: &str| scenario_mc(name, 100, &plan, 500, 0.05, SEED).unwrap();
    let mut pass = run("bootstrap size: static probit, T=100, R=500, 5%", Some(Duration::from_secs(15 * 60)), || {
        let r = mc("size1");
        let mut ok = true;
        let mut cells = Vec::new();
        for kind in [S1, S2] {
            for norm in [Norm::Ks, Norm::Cvm] {
                let v = rate(&r, kind, norm);
                ok &= (2.5..=8.5).contains(&v);
                cells.push(format!("{kind}-{} {v:.1}%", norm.label()));
            }
        }
        Outcome { pass: ok, detail: format!("{} (band 2.5-8.5%)", cells.join(", ")) }
    });
    pass &= run("power ordering: static probit null vs dynamic probit truth, T=100, R=500", Some(Duration::from_secs(30 * 60)), || {
        let r = mc("power2");
        let s2 = rate(&r, S2, Norm::Cvm);
        let r2 = rate(&r, R2 { m: 1 }, Norm::Cvm);
        let a = s2 >= r2 + 20.0;
        let mut b = true;
        let mut c = true;
        let mut worst_c = String::new();
        for norm in [Norm::Cvm, Norm::Ks] {
            b &= rate(&r, S1, norm) >= rate(&r, R1 { m: 1 }, norm);
            for (bi, uni) in [(S2, S1), (R2 { m: 50 }, R1 { m: 50 }), (R2 { m: 25 }, R1 { m: 25 }), (R2 { m: 1 }, R1 { m: 1 })] {
                if rate(&r, bi, norm) < rate(&r, uni, norm) {
                    c = false;
                    worst_c = format!(" ({bi} < {uni} under {})", norm.label());
                }
            }
        }
        Outcome {
            pass: a && b && c,
            detail: format!(
                "(a) S2-CvM {s2:.1}% vs R2-CvM {r2:.1}% [{}]; (b) S1 {:.1}/{:.1}% vs R1 {:.1}/{:.1}% (CvM/KS) [{}]; (c) bivariate >= univariate [{}]{worst_c}",
                if a { "ok" } else { "no" },
                rate(&r, S1, Norm::Cvm),
                rate(&r, S1, Norm::Ks),
                rate(&r, R1 { m: 1 }, Norm::Cvm),
                rate(&r, R1 { m: 1 }, Norm::Ks),
                if b { "ok" } else { "no" },
                if c { "ok" } else { "no" },
            ),
        }
    });
    pass &= run("probit vs logit: static probit null vs static logit truth, T=100, R=500", None, || {
        let r = mc("power1");
        let (j, worst) = r.rejection.iter().enumerate().fold((0, 0.0f64), |b, (j, v)| if *v > b.1 { (j, *v) } else { b });
        let key = r.keys[j];
        Outcome {
            pass: 100.0 * worst <= 15.0,
            detail: format!("highest rejection {:.1}% ({}-{}) over all 18 statistics (limit 15%)", 100.0 * worst, key.kind, key.norm.label()),
        }
    });
    pass
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_discgof")).args(args).output().expect("binary runs")
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism_suite() -> bool {
    run("determinism: repeated `mc` and `test` runs give byte-identical tables", None, || {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        fs::write(
            &cfg,
            r#"
seed = 99
[[model]]
name = "static"
family = "ordered"
link = "probit"
categories = 4
covariates = ["x1", "x2"]
[[model]]
name = "dynamic"
family = "ordered"
link = "logit"
categories = 4
dynamic = true
covariates = ["x1", "x2"]
[simulate]
model = "dynamic"
theta = [1.3, -1.0, -1.7, -6.0, -4.3, -2.4]
t = 120
presample = 3
[data]
path = "sim/simulated.csv"
y = "y"
[bootstrap]
replicates = 39
[mc]
scenarios = ["size1", "power2"]
replications = 100
t = 100
"#,
        )
        .unwrap();
        let c = cfg.to_str().unwrap();
        let sim = dir.path().join("sim");
        let mut notes = Vec::new();
        let mut ok = cli(&["simulate", "--config", c, "--out", sim.to_str().unwrap()]).status.success();
        let mut runs = Vec::new();
        for (verb, threads) in [("mc", "1"), ("mc", "2"), ("test", "1"), ("test", "2")] {
            let out = dir.path().join(format!("{verb}-{threads}"));
            let o = cli(&[verb, "--config", c, "--threads", threads, "--out", out.to_str().unwrap()]);
            ok &= o.status.success();
            if !o.status.success() {
                notes.push(format!("{verb} exited {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr).trim()));
            }
            runs.push((verb, tree(&out)));
        }
        for pair in runs.chunks(2) {
            let same = pair[0].1 == pair[1].1 && !pair[0].1.is_empty();
            ok &= same;
            notes.push(format!("{} ({} files) {}", pair[0].0, pair[0].1.len(), if same { "identical" } else { "DIFFERENT" }));
        }
        Outcome { pass: ok, detail: format!("{} across 1 and 2 worker threads", notes.join(", ")) }
    })
}

fn main() {
    let started = Instant::now();
    let results = [identity_suite(), noise_suite(), norm_suite(), estimation_suite(), mc_suite(), determinism_suite()];
    let failed = results.iter().filter(|r| !**r).count();
    println!("acceptance: {} of {} suites passed in {:.0}s", results.len() - failed, results.len(), started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
