//! Calibration from observed meta-regression data and pre-modeling
//! heterogeneity diagnostics.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::datagen::{CaseSpec, JointDistribution, MetaDataset, SimulationConfig};
use crate::error::{Error, Result};
use crate::numerics::special::incomplete_beta;
use crate::numerics::Matrix;

/// Reads a `y,x1..xk,study,location,time` file. Labels are re-indexed
/// densely in sorted order (times to `1..=T`); unbalanced panels load fine.
pub fn load_dataset(path: &Path) -> Result<MetaDataset> {
    let file = std::fs::File::open(path)?;
    let mut data = read_dataset(file)?;
    data.provenance = Some(path.display().to_string());
    Ok(data)
}

pub fn read_dataset<R: std::io::Read>(reader: R) -> Result<MetaDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 1,
            column: "header".into(),
            message: e.to_string(),
        })?
        .clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    let k = cols.len().saturating_sub(4);
    let mut expected = vec!["y".to_string()];
    expected.extend((1..=k).map(|j| format!("x{j}")));
    expected.extend(["study", "location", "time"].map(String::from));
    if cols.len() < 5 || cols != expected {
        return Err(Error::Parse {
            row: 1,
            column: "header".into(),
            message: format!("expected `{}`, found `{}`", expected.join(","), cols.join(",")),
        });
    }

    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut raw_labels: [Vec<i64>; 3] = Default::default();
    for (r, rec) in rdr.records().enumerate() {
        // data rows are numbered from 1, the header is row 0
        let row = r + 1;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            column: "?".into(),
            message: e.to_string(),
        })?;
        if rec.len() != cols.len() {
            return Err(Error::Parse {
                row,
                column: "?".into(),
                message: format!("expected {} fields, found {}", cols.len(), rec.len()),
            });
        }
        for (c, field) in rec.iter().enumerate() {
            let field = field.trim();
            let name = cols[c];
            if field.is_empty() || field.eq_ignore_ascii_case("na") || field.eq_ignore_ascii_case("nan") {
                return Err(Error::MissingValue {
                    row,
                    column: name.into(),
                });
            }
            let parse_err = |m: String| Error::Parse {
                row,
                column: name.into(),
                message: m,
            };
            if c <= k {
                let v: f64 = field.parse().map_err(|e| parse_err(format!("`{field}`: {e}")))?;
                if !v.is_finite() {
                    return Err(parse_err(format!("`{field}` is not finite")));
                }
                if c == 0 {
                    y.push(v);
                } else {
                    x.push(v);
                }
            } else {
                let v: i64 = field.parse().map_err(|e| parse_err(format!("`{field}`: {e}")))?;
                raw_labels[c - k - 1].push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(Error::Validation("dataset has no rows".into()));
    }
    let [study, location, time] = raw_labels;
    let time = dense(&time).into_iter().map(|t| t + 1).collect();
    MetaDataset::from_columns(y, x, k, dense(&study), dense(&location), time)
}

fn dense(raw: &[i64]) -> Vec<usize> {
    let mut sorted = raw.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    raw.iter()
        .map(|v| sorted.binary_search(v).expect("value is present"))
        .collect()
}

/// Moments of `(Y, X1..Xk)` and the location/time structure of `Y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractedParameters {
    #[serde(skip)]
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub location_mu_y: Vec<f64>,
    pub time_mu_y: Vec<f64>,
    /// Row counts, `cells[l][t-1]`.
    pub cells: Vec<Vec<usize>>,
}

fn variables(data: &MetaDataset) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut names = vec!["y".to_string()];
    names.extend((1..=data.k).map(|j| format!("x{j}")));
    let mut cols = vec![data.y.clone()];
    for j in 0..data.k {
        cols.push((0..data.len()).map(|i| data.x[i * data.k + j]).collect());
    }
    (names, cols)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn group_means(values: &[f64], labels: &[usize], groups: usize) -> Vec<f64> {
    let mut s = vec![0.0; groups];
    let mut c = vec![0usize; groups];
    for (&v, &g) in values.iter().zip(labels) {
        s[g] += v;
        c[g] += 1;
    }
    s.iter()
        .zip(&c)
        .map(|(s, &c)| if c == 0 { f64::NAN } else { s / c as f64 })
        .collect()
}

/// Sample means and `n − 1` covariances of every variable, plus location and
/// time means of `Y`.
pub fn extract_parameters(data: &MetaDataset) -> Result<ExtractedParameters> {
    let n = data.len();
    if n < 2 {
        return Err(Error::Validation("at least two rows are needed".into()));
    }
    let (names, cols) = variables(data);
    let means: Vec<f64> = cols.iter().map(|c| mean(c)).collect();
    let p = cols.len();
    let mut covariance = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in 0..=a {
            let s: f64 = cols[a]
                .iter()
                .zip(&cols[b])
                .map(|(u, v)| (u - means[a]) * (v - means[b]))
                .sum();
            covariance[a][b] = s / (n - 1) as f64;
            covariance[b][a] = covariance[a][b];
        }
    }
    let variances: Vec<f64> = (0..p).map(|j| covariance[j][j]).collect();
    for (j, v) in variances.iter().enumerate() {
        if *v <= 1e-14 * (1.0 + means[j] * means[j]) {
            return Err(Error::DegenerateVariable(names[j].clone()));
        }
    }
    let times: Vec<usize> = data.time.iter().map(|t| t - 1).collect();
    Ok(ExtractedParameters {
        names,
        location_mu_y: group_means(&data.y, &data.location, data.n_locations),
        time_mu_y: group_means(&data.y, &times, data.n_times),
        cells: data.cell_counts(),
        means,
        variances,
        covariance,
    })
}

/// Simulation settings fitted to an observed dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// Pooled within-(location, time) covariance with the covariate means.
    pub distribution: JointDistribution,
    /// Location base means and the least-squares yearly increment of `Y`.
    pub case: CaseSpec,
    pub time_periods: usize,
    /// Average rows per (location, time) cell, rounded.
    pub n: usize,
}

impl Calibration {
    pub fn config(&self, iterations: usize, seed: u64) -> SimulationConfig {
        let mut c = SimulationConfig::new(self.case.clone(), self.n, self.distribution.k())
            .with_distribution(self.distribution.clone())
            .with_seed(seed)
            .with_iterations(iterations);
        c.time_periods = self.time_periods;
        c
    }
}

/// Turns a dataset into a custom case plus joint distribution that the
/// generator can re-simulate.
pub fn calibrate(data: &MetaDataset) -> Result<Calibration> {
    let params = extract_parameters(data)?;
    let t = data.n_times;
    if t < 2 {
        return Err(Error::InsufficientGroups("calibration needs at least two time periods".into()));
    }
    let cells: Vec<usize> = data
        .location
        .iter()
        .zip(&data.time)
        .map(|(l, tt)| l * t + (tt - 1))
        .collect();
    let n_cells = data.n_locations * t;
    let (_, cols) = variables(data);
    let cell_means: Vec<Vec<f64>> = cols.iter().map(|c| group_means(c, &cells, n_cells)).collect();
    let occupied = data.cell_counts().iter().flatten().filter(|&&c| c > 0).count();
    let dof = data.len() - occupied;
    if dof == 0 {
        return Err(Error::Validation("every cell holds a single row".into()));
    }
    let p = cols.len();
    let mut within = Matrix::zeros(p, p);
    for i in 0..data.len() {
        let g = cells[i];
        for a in 0..p {
            let da = cols[a][i] - cell_means[a][g];
            for b in 0..=a {
                within[(a, b)] += da * (cols[b][i] - cell_means[b][g]);
            }
        }
    }
    for a in 0..p {
        for b in 0..=a {
            within[(a, b)] /= dof as f64;
            within[(b, a)] = within[(a, b)];
        }
    }
    let distribution = JointDistribution::custom(params.means[1..].to_vec(), within)?;

    // least-squares slope of time means over t = 1..T
    let ts: Vec<f64> = (1..=t).map(|v| v as f64).collect();
    let t_bar = mean(&ts);
    let valid: Vec<(f64, f64)> = ts
        .iter()
        .zip(&params.time_mu_y)
        .filter(|(_, m)| m.is_finite())
        .map(|(a, b)| (*a, *b))
        .collect();
    let m_bar = valid.iter().map(|v| v.1).sum::<f64>() / valid.len() as f64;
    let sxx: f64 = valid.iter().map(|(a, _)| (a - t_bar).powi(2)).sum();
    let sxy: f64 = valid.iter().map(|(a, b)| (a - t_bar) * (b - m_bar)).sum();
    let increment = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let offset = increment * (t - 1) as f64 / 2.0;
    let bases = params.location_mu_y.iter().map(|m| m - offset).collect();
    Ok(Calibration {
        distribution,
        case: CaseSpec::custom(bases, increment)?,
        time_periods: t,
        n: ((data.len() as f64) / occupied as f64).round() as usize,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub id: usize,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

/// One-way analysis of variance of `Y` across groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FTest {
    pub statistic: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityCheck {
    pub variable: String,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// `g1 / sqrt(6/n)`.
    pub z_skewness: f64,
    /// `g2 / sqrt(24/n)`.
    pub z_kurtosis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub locations: Vec<GroupSummary>,
    pub times: Vec<GroupSummary>,
    /// `trend_deltas[l][t-2]` = mean of `Y` at `(l, t)` minus at `(l, t−1)`.
    pub trend_deltas: Vec<Vec<f64>>,
    pub location_test: Option<FTest>,
    pub time_test: Option<FTest>,
    pub normality: Vec<NormalityCheck>,
    pub notes: Vec<String>,
}

/// Upper tail of the F distribution.
pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if !(f > 0.0) {
        return 1.0;
    }
    let denom = d2 + d1 * f;
    incomplete_beta(0.5 * d2, 0.5 * d1, d2 / denom, d1 * f / denom)
}

pub fn one_way_f(values: &[f64], labels: &[usize]) -> Result<FTest> {
    let groups = labels.iter().max().map_or(0, |m| m + 1);
    let mut count = vec![0usize; groups];
    for &g in labels {
        count[g] += 1;
    }
    let used = count.iter().filter(|&&c| c > 0).count();
    if used < 2 {
        return Err(Error::InsufficientGroups(format!("{used} non-empty group(s)")));
    }
    let n = values.len();
    if n <= used {
        return Err(Error::InsufficientGroups("no within-group degrees of freedom".into()));
    }
    let means = group_means(values, labels, groups);
    let grand = mean(values);
    let ssb: f64 = means
        .iter()
        .zip(&count)
        .filter(|(_, &c)| c > 0)
        .map(|(m, &c)| c as f64 * (m - grand).powi(2))
        .sum();
    let ssw: f64 = values.iter().zip(labels).map(|(v, &g)| (v - means[g]).powi(2)).sum();
    let (d1, d2) = (used - 1, n - used);
    let statistic = (ssb / d1 as f64) / (ssw / d2 as f64);
    Ok(FTest {
        statistic,
        df_between: d1,
        df_within: d2,
        p_value: f_sf(statistic, d1 as f64, d2 as f64).clamp(0.0, 1.0),
    })
}

fn summaries(values: &[f64], labels: &[usize], groups: usize) -> Vec<GroupSummary> {
    let means = group_means(values, labels, groups);
    let mut ss = vec![0.0; groups];
    let mut count = vec![0usize; groups];
    for (&v, &g) in values.iter().zip(labels) {
        ss[g] += (v - means[g]).powi(2);
        count[g] += 1;
    }
    (0..groups)
        .map(|g| GroupSummary {
            id: g,
            n: count[g],
            mean: means[g],
            sd: if count[g] > 1 {
                (ss[g] / (count[g] - 1) as f64).sqrt()
            } else {
                f64::NAN
            },
        })
        .collect()
}

fn normality(name: &str, v: &[f64]) -> NormalityCheck {
    let n = v.len() as f64;
    let m = mean(v);
    let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = v.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let g1 = m3 / m2.powf(1.5);
    let g2 = m4 / (m2 * m2) - 3.0;
    NormalityCheck {
        variable: name.into(),
        skewness: g1,
        excess_kurtosis: g2,
        z_skewness: g1 / (6.0 / n).sqrt(),
        z_kurtosis: g2 / (24.0 / n).sqrt(),
    }
}

/// Location and time F tests on `Y`, group summaries, trend deltas and
/// moment-based normality scores. Advisory only.
pub fn heterogeneity_diagnostics(data: &MetaDataset) -> Result<DiagnosticsReport> {
    if data.n_locations < 2 && data.n_times < 2 {
        return Err(Error::InsufficientGroups(
            "need at least two locations or two time periods".into(),
        ));
    }
    let times: Vec<usize> = data.time.iter().map(|t| t - 1).collect();
    let mut notes = Vec::new();
    let location_test = match one_way_f(&data.y, &data.location) {
        Ok(t) => Some(t),
        Err(e) => {
            notes.push(format!("location test skipped: {e}"));
            None
        }
    };
    let time_test = match one_way_f(&data.y, &times) {
        Ok(t) => Some(t),
        Err(e) => {
            notes.push(format!("time test skipped: {e}"));
            None
        }
    };

    let t = data.n_times;
    let cells: Vec<usize> = data.location.iter().zip(&times).map(|(l, tt)| l * t + tt).collect();
    let cm = group_means(&data.y, &cells, data.n_locations * t);
    let trend_deltas = (0..data.n_locations)
        .map(|l| (1..t).map(|tt| cm[l * t + tt] - cm[l * t + tt - 1]).collect())
        .collect();

    let (names, cols) = variables(data);
    let normality = names.iter().zip(&cols).map(|(n, c)| normality(n, c)).collect();

    let significant = |t: &Option<FTest>| t.is_some_and(|f| f.p_value < 0.05);
    match (significant(&location_test), significant(&time_test)) {
        (true, true) => notes.push(
            "location and time heterogeneity both detected: consider FE_lTrend (or FE_lt) and compare against FE_s".into(),
        ),
        (true, false) => notes.push("location heterogeneity detected: consider FE_s or FE_l; RE_s if studies are a random draw".into()),
        (false, true) => notes.push("time heterogeneity detected: consider FE_lTrend or FE_s".into()),
        (false, false) => notes.push("no heterogeneity detected at the 5% level: RE_s or FE_s are adequate".into()),
    }
    Ok(DiagnosticsReport {
        locations: summaries(&data.y, &data.location, data.n_locations),
        times: summaries(&data.y, &times, data.n_times),
        trend_deltas,
        location_test,
        time_test,
        normality,
        notes,
    })
}

impl DiagnosticsReport {
    /// Plain-text rendering for terminals and `diagnostics.txt`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let test = |s: &mut String, name: &str, t: &Option<FTest>| match t {
            Some(f) => {
                let _ = writeln!(
                    s,
                    "{name:<9} F({}, {}) = {:.4}  p = {:.4e}",
                    f.df_between, f.df_within, f.statistic, f.p_value
                );
            }
            None => {
                let _ = writeln!(s, "{name:<9} not available");
            }
        };
        let _ = writeln!(s, "heterogeneity tests on y");
        test(&mut s, "location", &self.location_test);
        test(&mut s, "time", &self.time_test);
        for (title, rows) in [("location", &self.locations), ("time", &self.times)] {
            let _ = writeln!(s, "\n{title:<9} {:>7} {:>12} {:>12}", "n", "mean", "sd");
            for r in rows {
                let _ = writeln!(s, "{:<9} {:>7} {:>12.5} {:>12.5}", r.id, r.n, r.mean, r.sd);
            }
        }
        let _ = writeln!(s, "\ntrend deltas of mean y by location");
        for (l, d) in self.trend_deltas.iter().enumerate() {
            let cells: Vec<String> = d.iter().map(|v| format!("{v:+.4}")).collect();
            let _ = writeln!(s, "{l:<9} {}", cells.join(" "));
        }
        let _ = writeln!(s, "\n{:<9} {:>10} {:>10} {:>10} {:>10}", "variable", "skew", "z", "ex.kurt", "z");
        for c in &self.normality {
            let _ = writeln!(
                s,
                "{:<9} {:>10.4} {:>10.3} {:>10.4} {:>10.3}",
                c.variable, c.skewness, c.z_skewness, c.excess_kurtosis, c.z_kurtosis
            );
        }
        let _ = writeln!(s);
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<MetaDataset> {
        read_dataset(text.as_bytes())
    }

    #[test]
    fn two_point_covariance() {
        let d = parse("y,x1,study,location,time\n0,0,0,0,1\n2,2,1,1,1\n").unwrap();
        let p = extract_parameters(&d).unwrap();
        assert_eq!(p.means, vec![1.0, 1.0]);
        assert_eq!(p.covariance[0][1], 2.0);
        assert_eq!(p.variances, vec![2.0, 2.0]);
    }

    #[test]
    fn missing_and_malformed_fields() {
        let e = parse("y,x1,study,location,time\n1,2,0,0,1\n,3,0,0,1\n").unwrap_err();
        assert_eq!(e, Error::MissingValue { row: 2, column: "y".into() });
        let e = parse("y,x1,study,location,time\n1,abc,0,0,1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { row: 1, ref column, .. } if column == "x1"));
        assert!(matches!(parse("y,x2,study,location,time\n1,2,0,0,1\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn study_in_two_locations_is_invalid() {
        let e = parse("y,x1,study,location,time\n1,2,7,0,1\n2,1,7,1,1\n").unwrap_err();
        assert!(matches!(e, Error::Validation(_)));
    }

    #[test]
    fn labels_are_reindexed() {
        let d = parse("y,x1,study,location,time\n1,2,10,5,2001\n2,1,20,9,2003\n3,0,20,9,2003\n").unwrap();
        assert_eq!(d.study, vec![0, 1, 1]);
        assert_eq!(d.location, vec![0, 1, 1]);
        assert_eq!(d.time, vec![1, 2, 2]);
        assert!(!d.is_balanced());
    }

    #[test]
    fn constant_variable_is_degenerate() {
        let d = parse("y,x1,study,location,time\n1,5,0,0,1\n2,5,0,0,1\n").unwrap();
        assert_eq!(extract_parameters(&d), Err(Error::DegenerateVariable("x1".into())));
    }

    #[test]
    fn single_location_skips_location_test() {
        let mut text = String::from("y,x1,study,location,time\n");
        for i in 0..20 {
            let t = 1 + i % 2;
            text.push_str(&format!("{},{},{},0,{}\n", i as f64 * 0.1 + t as f64, (i * 7 % 5) as f64, t - 1, t));
        }
        let r = heterogeneity_diagnostics(&parse(&text).unwrap()).unwrap();
        assert!(r.location_test.is_none());
        assert!(r.time_test.is_some());
        assert!(r.to_text().contains("location  not available"));
    }

    #[test]
    fn f_tail_matches_closed_form() {
        // F(2, d2) upper tail is (1 + 2f/d2)^(-d2/2)
        for &(f, d2) in &[(0.5, 10.0), (3.0, 40.0), (12.0, 7.0)] {
            let want = (1.0_f64 + 2.0 * f / d2).powf(-d2 / 2.0);
            assert!((f_sf(f, 2.0, d2) - want).abs() < 1e-13);
        }
    }
}
