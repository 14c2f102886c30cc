use crate::error::{Error, Result};
use crate::model::{ModelSpec, ObservationSeries};

/// Marked residual process over the fitted single index of an ordered model.
///
/// The index is `x'β + ρ y_{t-1} - τ₁`; mark `j` at time `t` is
/// `1{Y_t = j} - P_j(index_t)`. Experimental: no bootstrap theory backs it.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedProcess {
    index: Vec<f64>,
    /// `marks[j][t]` for category `j + 1`.
    marks: Vec<Vec<f64>>,
    /// Cumulative sums at each observation's own index, ties included.
    at_points: Vec<Vec<f64>>,
}

impl MarkedProcess {
    pub fn new(spec: &ModelSpec, theta: &[f64], series: &ObservationSeries) -> Result<Self> {
        let ModelSpec::Ordered(ord) = spec else {
            return Err(Error::InvalidParameter("the marked process needs an ordered-choice model".into()));
        };
        spec.check_series(series)?;
        let params = ord.split(theta)?;
        let laws = spec.laws(theta, series)?;
        let shift = ord.threshold(&params, 1);
        let n = series.len();
        let mut index = Vec::with_capacity(n);
        for t in 0..n {
            index.push(ord.index(&params, &series.x_row(t), series.lag(t))? - shift);
        }
        let k = ord.categories as usize;
        let marks: Vec<Vec<f64>> = (1..=k as u32)
            .map(|j| {
                (0..n)
                    .map(|t| f64::from(u8::from(series.y()[t] == j)) - laws[t].pmf(j))
                    .collect()
            })
            .collect();

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| index[a].total_cmp(&index[b]));
        let root = (n as f64).sqrt();
        let at_points = marks
            .iter()
            .map(|m| {
                let mut out = vec![0.0; n];
                let mut acc = 0.0;
                let mut i = 0;
                while i < n {
                    let mut j = i;
                    while j < n && index[order[j]] == index[order[i]] {
                        acc += m[order[j]];
                        j += 1;
                    }
                    for &o in &order[i..j] {
                        out[o] = acc / root;
                    }
                    i = j;
                }
                out
            })
            .collect();
        Ok(MarkedProcess { index, marks, at_points })
    }

    pub fn index(&self) -> &[f64] {
        &self.index
    }

    pub fn categories(&self) -> usize {
        self.marks.len()
    }

    /// `Z_j(y) = T^{-1/2} Σ_t 1{index_t ≤ y} mark_{j,t}` for category `j` in `1..=K`.
    pub fn eval(&self, j: u32, y: f64) -> Result<f64> {
        let m = self
            .marks
            .get((j as usize).wrapping_sub(1))
            .ok_or_else(|| Error::Domain(format!("category {j} outside 1..={}", self.marks.len())))?;
        let n = self.index.len() as f64;
        let acc: f64 = self.index.iter().zip(m).filter(|(x, _)| **x <= y).map(|(_, v)| v).sum();
        Ok(acc / n.sqrt())
    }

    fn sums(&self) -> impl Iterator<Item = f64> + '_ {
        self.at_points.iter().map(|z| z.iter().map(|v| v * v).sum::<f64>())
    }

    /// `T^{-1} Σ_j Σ_t Z_j(index_t)²`.
    pub fn pooled_cvm(&self) -> f64 {
        self.sums().sum::<f64>() / self.index.len() as f64
    }

    /// `T^{-1} max_j Σ_t Z_j(index_t)²`.
    pub fn pooled_ks(&self) -> f64 {
        self.sums().fold(0.0, f64::max) / self.index.len() as f64
    }
}
