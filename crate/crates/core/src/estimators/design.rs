use crate::datagen::{rescale_trend, MetaDataset};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::spec::{DummySet, Grouping, SpecKind};

const NO_DUMMY: u32 = u32::MAX;

/// Regression design stored as a dense block plus 0/1 indicator columns.
///
/// Every row has the same `dense_cols` leading values and at most `slots`
/// indicator columns set to one, which keeps cross products linear in the
/// number of dummies rather than quadratic.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    rows: usize,
    dense_cols: usize,
    dense: Vec<f64>,
    slots: usize,
    dummies: Vec<u32>,
    names: Vec<String>,
    trend_column: Option<usize>,
}

impl Design {
    /// Dense design from a matrix.
    pub fn from_matrix(x: &Matrix) -> Self {
        Self {
            rows: x.rows(),
            dense_cols: x.cols(),
            dense: x.as_slice().to_vec(),
            slots: 0,
            dummies: Vec::new(),
            names: (0..x.cols()).map(|j| format!("c{j}")).collect(),
            trend_column: None,
        }
    }

    pub(crate) fn dense_only(rows: usize, dense: Vec<f64>, names: Vec<String>) -> Self {
        debug_assert_eq!(dense.len(), rows * names.len());
        Self {
            rows,
            dense_cols: names.len(),
            dense,
            slots: 0,
            dummies: Vec::new(),
            names,
            trend_column: None,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.names.len()
    }

    pub fn dense_cols(&self) -> usize {
        self.dense_cols
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn trend_column(&self) -> Option<usize> {
        self.trend_column
    }

    pub fn dense_row(&self, i: usize) -> &[f64] {
        &self.dense[i * self.dense_cols..(i + 1) * self.dense_cols]
    }

    /// Indicator columns set in row `i`.
    pub fn dummy_row(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.dummies[i * self.slots..(i + 1) * self.slots]
            .iter()
            .filter(|&&c| c != NO_DUMMY)
            .map(|&c| c as usize)
    }

    /// Fitted value `x_i · beta`.
    pub fn dot_row(&self, i: usize, beta: &[f64]) -> f64 {
        let mut s: f64 = self.dense_row(i).iter().zip(beta).map(|(a, b)| a * b).sum();
        for c in self.dummy_row(i) {
            s += beta[c];
        }
        s
    }

    pub fn to_matrix(&self) -> Matrix {
        let p = self.cols();
        let mut m = Matrix::zeros(self.rows, p);
        for i in 0..self.rows {
            let row = m.row_mut(i);
            row[..self.dense_cols].copy_from_slice(self.dense_row(i));
            for c in self.dummies[i * self.slots..(i + 1) * self.slots].iter() {
                if *c != NO_DUMMY {
                    row[*c as usize] = 1.0;
                }
            }
        }
        m
    }

    /// `(XᵀWX, XᵀWy)`.
    pub fn cross_products(&self, y: &[f64], w: &[f64]) -> (Matrix, Vec<f64>) {
        let p = self.cols();
        let d = self.dense_cols;
        let mut xtx = Matrix::zeros(p, p);
        let mut xty = vec![0.0; p];
        let mut idx = Vec::with_capacity(self.slots);
        for i in 0..self.rows {
            let wi = w[i];
            let wy = wi * y[i];
            let r = self.dense_row(i);
            for a in 0..d {
                let wa = wi * r[a];
                if wa == 0.0 {
                    continue;
                }
                xty[a] += wa * y[i];
                let row = xtx.row_mut(a);
                for b in 0..=a {
                    row[b] += wa * r[b];
                }
            }
            idx.clear();
            idx.extend(self.dummy_row(i));
            for (m, &c) in idx.iter().enumerate() {
                xty[c] += wy;
                let row = xtx.row_mut(c);
                row[c] += wi;
                for a in 0..d {
                    row[a] += wi * r[a];
                }
                for &c2 in &idx[..m] {
                    let (hi, lo) = if c > c2 { (c, c2) } else { (c2, c) };
                    xtx[(hi, lo)] += wi;
                }
            }
        }
        for a in 0..p {
            for b in (a + 1)..p {
                xtx[(a, b)] = xtx[(b, a)];
            }
        }
        (xtx, xty)
    }

    /// Copy with dense column `j` removed.
    pub fn without_dense_column(&self, j: usize) -> Design {
        assert!(j < self.dense_cols);
        let d = self.dense_cols;
        let mut dense = Vec::with_capacity(self.rows * (d - 1));
        for i in 0..self.rows {
            let r = self.dense_row(i);
            dense.extend_from_slice(&r[..j]);
            dense.extend_from_slice(&r[j + 1..]);
        }
        let dummies = self
            .dummies
            .iter()
            .map(|&c| if c == NO_DUMMY { c } else { c - 1 })
            .collect();
        let mut names = self.names.clone();
        names.remove(j);
        let trend_column = match self.trend_column {
            Some(t) if t == j => None,
            Some(t) if t > j => Some(t - 1),
            other => other,
        };
        Design {
            rows: self.rows,
            dense_cols: d - 1,
            dense,
            slots: self.slots,
            dummies,
            names,
            trend_column,
        }
    }
}

/// Dense group ids for `grouping`, and the number of groups.
pub fn group_labels(data: &MetaDataset, grouping: Grouping) -> (Vec<usize>, usize) {
    let raw: Vec<usize> = match grouping {
        Grouping::Study => data.study.clone(),
        Grouping::Location => data.location.clone(),
        Grouping::Time => data.time.iter().map(|t| t - 1).collect(),
        Grouping::Cell => data
            .location
            .iter()
            .zip(&data.time)
            .map(|(l, t)| l * data.n_times + (t - 1))
            .collect(),
    };
    compress(&raw)
}

fn compress(raw: &[usize]) -> (Vec<usize>, usize) {
    let max = raw.iter().copied().max().unwrap_or(0);
    let mut map = vec![usize::MAX; max + 1];
    for &r in raw {
        map[r] = 0;
    }
    let mut next = 0;
    for m in map.iter_mut() {
        if *m == 0 {
            *m = next;
            next += 1;
        }
    }
    (raw.iter().map(|&r| map[r]).collect(), next)
}

/// Rescaled trend value of every row.
pub fn trend_values(data: &MetaDataset) -> Result<Vec<f64>> {
    if data.n_times < 2 {
        return Err(Error::Domain("a trend needs at least two time periods".into()));
    }
    let grid: Vec<f64> = (1..=data.n_times)
        .map(|t| rescale_trend(t, data.n_times))
        .collect::<Result<_>>()?;
    Ok(data.time.iter().map(|&t| grid[t - 1]).collect())
}

/// Design matrix for `spec` and each row's weight group.
///
/// Columns: intercept, `x1..xk`, the rescaled trend for trend specs, then
/// the spec's dummy block with the lowest group id dropped.
pub fn build_design(data: &MetaDataset, spec: SpecKind) -> Result<(Design, Vec<usize>)> {
    let n = data.len();
    let k = data.k;
    let trend = if spec.has_trend() { Some(trend_values(data)?) } else { None };
    let d = 1 + k + usize::from(trend.is_some());

    let mut names = vec!["intercept".to_string()];
    names.extend((1..=k).map(|j| format!("x{j}")));
    if trend.is_some() {
        names.push("trend".into());
    }

    let mut blocks: Vec<(Vec<usize>, usize, &str)> = Vec::new();
    let mut add = |g: Grouping, prefix: &'static str| {
        let (labels, count) = group_labels(data, g);
        blocks.push((labels, count, prefix));
    };
    match spec.dummies() {
        DummySet::None => {}
        DummySet::Study => add(Grouping::Study, "study"),
        DummySet::Location => add(Grouping::Location, "location"),
        DummySet::Time => add(Grouping::Time, "time"),
        DummySet::LocationTime => {
            add(Grouping::Location, "location");
            add(Grouping::Time, "time");
        }
    }

    let slots = blocks.len();
    let mut dummies = vec![NO_DUMMY; n * slots];
    let mut offset = d;
    for (b, (labels, count, prefix)) in blocks.iter().enumerate() {
        for g in 1..*count {
            names.push(format!("{prefix}_{g}"));
        }
        for (i, &g) in labels.iter().enumerate() {
            if g > 0 {
                dummies[i * slots + b] = (offset + g - 1) as u32;
            }
        }
        offset += count - 1;
    }

    let mut dense = Vec::with_capacity(n * d);
    for i in 0..n {
        dense.push(1.0);
        dense.extend_from_slice(data.x_row(i));
        if let Some(t) = &trend {
            dense.push(t[i]);
        }
    }
    let design = Design {
        rows: n,
        dense_cols: d,
        dense,
        slots,
        dummies,
        names,
        trend_column: trend.as_ref().map(|_| 1 + k),
    };
    let (labels, _) = group_labels(data, spec.grouping());
    Ok((design, labels))
}
