//! Kolmogorov–Smirnov and Cramér–von Mises functionals, evaluated exactly on
//! the piecewise structure of each process.

use serde::{Deserialize, Serialize};

use crate::process::{Profile1d, SurfaceShape, Surface2d};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Ks,
    Cvm,
}

impl Norm {
    pub fn label(self) -> &'static str {
        match self {
            Norm::Ks => "KS",
            Norm::Cvm => "CvM",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestStatistic {
    pub norm: Norm,
    pub dim: usize,
    pub value: f64,
    /// Location of the supremum for KS; empty for CvM.
    pub argmax: Vec<f64>,
}

/// Integrating measure on `[0, 1]` (or its product square in two dimensions).
#[derive(Debug, Clone, Copy, Default)]
pub enum Measure {
    #[default]
    Lebesgue,
    /// Absolutely continuous with the given density. Integration uses a
    /// 2-point rule per piece, so it is exact only for polynomial densities
    /// of low degree.
    Density(fn(f64) -> f64),
}

impl Measure {
    #[inline]
    fn weight(&self, u: f64) -> f64 {
        match self {
            Measure::Lebesgue => 1.0,
            Measure::Density(f) => f(u),
        }
    }
}

// Two-point Gauss–Legendre nodes on [0, 1], each with weight 1/2.
const GL: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// Largest `|value|`, ties going to the lexicographically smallest location.
struct Best {
    value: f64,
    at: Vec<f64>,
}

impl Best {
    fn new(dim: usize) -> Self {
        Best { value: -1.0, at: vec![0.0; dim] }
    }

    fn offer(&mut self, value: f64, at: &[f64]) {
        let v = value.abs();
        if v > self.value || (v == self.value && at < self.at.as_slice()) {
            self.value = v;
            self.at.clear();
            self.at.extend_from_slice(at);
        }
    }
}

/// Exact supremum of `|S(u)|`, including one-sided limits at jumps.
pub fn ks_1d(p: &Profile1d) -> TestStatistic {
    let k = p.knots();
    let mut best = Best::new(1);
    for i in 0..p.start().len() {
        best.offer(p.start()[i], &[k[i]]);
        best.offer(p.end()[i], &[k[i + 1]]);
    }
    best.offer(p.terminal(), &[k[k.len() - 1]]);
    TestStatistic { norm: Norm::Ks, dim: 1, value: best.value.max(0.0), argmax: best.at }
}

/// `∫ S(u)² dφ(u)`; exact for Lebesgue measure since `S²` is quadratic per piece.
pub fn cvm_1d(p: &Profile1d, measure: Measure) -> TestStatistic {
    let k = p.knots();
    let mut acc = 0.0;
    for i in 0..p.start().len() {
        let h = k[i + 1] - k[i];
        let (a, b) = (p.start()[i], p.end()[i]);
        for g in GL {
            let v = a + (b - a) * g;
            acc += 0.5 * h * v * v * measure.weight(k[i] + g * h);
        }
    }
    TestStatistic { norm: Norm::Cvm, dim: 1, value: acc, argmax: Vec::new() }
}

pub fn ks_2d(s: &Surface2d) -> TestStatistic {
    let k = s.knots();
    let n = k.len();
    let mut best = Best::new(2);
    match s.shape() {
        SurfaceShape::Bilinear(v) => {
            for i in 0..n {
                for j in 0..n {
                    best.offer(v[(i, j)], &[k[i], k[j]]);
                }
            }
        }
        SurfaceShape::Step { levels, slope } => {
            // Each cell value decreases in both coordinates, so its extremes
            // sit at the lower corner and the upper-corner limit.
            for i in 0..n {
                let i1 = (i + 1).min(n - 1);
                for j in 0..n {
                    let j1 = (j + 1).min(n - 1);
                    let c = levels[(i, j)];
                    best.offer(c - slope * k[i] * k[j], &[k[i], k[j]]);
                    best.offer(c - slope * k[i1] * k[j1], &[k[i1], k[j1]]);
                }
            }
        }
    }
    TestStatistic { norm: Norm::Ks, dim: 2, value: best.value.max(0.0), argmax: best.at }
}

/// Tensor 2×2 Gauss–Legendre per cell; exact for Lebesgue measure.
pub fn cvm_2d(s: &Surface2d, measure: Measure) -> TestStatistic {
    let k = s.knots();
    let n = k.len();
    let mut acc = 0.0;
    for i in 0..n - 1 {
        let hx = k[i + 1] - k[i];
        for j in 0..n - 1 {
            let hy = k[j + 1] - k[j];
            let mut cell = 0.0;
            for gx in GL {
                let u1 = k[i] + gx * hx;
                for gy in GL {
                    let u2 = k[j] + gy * hy;
                    let v = match s.shape() {
                        SurfaceShape::Bilinear(c) => {
                            (1.0 - gx) * (1.0 - gy) * c[(i, j)]
                                + gx * (1.0 - gy) * c[(i + 1, j)]
                                + (1.0 - gx) * gy * c[(i, j + 1)]
                                + gx * gy * c[(i + 1, j + 1)]
                        }
                        SurfaceShape::Step { levels, slope } => levels[(i, j)] - slope * u1 * u2,
                    };
                    cell += v * v * measure.weight(u1) * measure.weight(u2);
                }
            }
            acc += 0.25 * hx * hy * cell;
        }
    }
    TestStatistic { norm: Norm::Cvm, dim: 2, value: acc, argmax: Vec::new() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{s1_profile, s2_surface, GridSettings};
    use crate::transform::{PitPair, TransformSeries};
    use approx::assert_abs_diff_eq;

    fn two_point() -> TransformSeries {
        TransformSeries::new(vec![PitPair::new(0.0, 0.2).unwrap(), PitPair::new(0.7, 1.0).unwrap()])
    }

    #[test]
    fn ks_1d_example() {
        let s = ks_1d(&s1_profile(&two_point()));
        assert_abs_diff_eq!(s.value, 0.6 / 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(s.argmax, vec![0.2]);
    }

    #[test]
    fn ks_2d_example() {
        let ts = two_point();
        let s = ks_2d(&s2_surface(&ts, GridSettings::default()).unwrap());
        let grid = [0.0, 0.2, 0.7, 1.0];
        let mut want: f64 = 0.0;
        for &a in &grid {
            for &b in &grid {
                let p = ts.pairs();
                want = want.max((p[1].transform(a) * p[0].transform(b) - a * b).abs());
            }
        }
        assert_abs_diff_eq!(s.value, want, epsilon = 1e-15);
    }

    #[test]
    fn closed_form_integrals() {
        let line = Profile1d::continuous(vec![0.0, 1.0], vec![0.5f64.sqrt(), -(0.5f64.sqrt())]);
        assert_abs_diff_eq!(cvm_1d(&line, Measure::Lebesgue).value, 1.0 / 6.0, epsilon = 1e-15);
        let prod = Surface2d::bilinear(vec![0.0, 1.0], nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]));
        assert_abs_diff_eq!(cvm_2d(&prod, Measure::Lebesgue).value, 1.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_processes() {
        let p = s1_profile(&two_point()).scaled(0.0);
        assert_eq!(ks_1d(&p).value, 0.0);
        assert_eq!(cvm_1d(&p, Measure::Lebesgue).value, 0.0);
        let s = s2_surface(&two_point(), GridSettings::default()).unwrap().scaled(0.0);
        assert_eq!(ks_2d(&s).value, 0.0);
        assert_eq!(cvm_2d(&s, Measure::Lebesgue).value, 0.0);
    }

    #[test]
    fn norms_scale() {
        let ts = two_point();
        let p = s1_profile(&ts);
        let s = s2_surface(&ts, GridSettings::default()).unwrap();
        for c in [-2.5, 0.3, 4.0] {
            assert_abs_diff_eq!(ks_1d(&p.scaled(c)).value, c.abs() * ks_1d(&p).value, epsilon = 1e-14);
            assert_abs_diff_eq!(
                cvm_1d(&p.scaled(c), Measure::Lebesgue).value,
                c * c * cvm_1d(&p, Measure::Lebesgue).value,
                epsilon = 1e-14
            );
            assert_abs_diff_eq!(ks_2d(&s.scaled(c)).value, c.abs() * ks_2d(&s).value, epsilon = 1e-14);
            assert_abs_diff_eq!(
                cvm_2d(&s.scaled(c), Measure::Lebesgue).value,
                c * c * cvm_2d(&s, Measure::Lebesgue).value,
                epsilon = 1e-14
            );
        }
    }
}
