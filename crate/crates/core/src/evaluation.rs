//! Angular-error summary statistics, k-fold cross-validation and report
//! rendering.
//!
//! Quantiles use linear interpolation at position `q·(n − 1)` of the sorted
//! sample. Tail means (best/worst 25%) use the `⌈n/4⌉` smallest/largest
//! values. All sums run over the sorted sample so the statistics do not
//! depend on input order.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::loss;
use crate::vector::Vec3;

pub const COLUMNS: [&str; 7] = [
    "Mean",
    "Med",
    "Tri",
    "Std",
    "Best 25%",
    "Worst 25%",
    "95th perc",
];

/// Summary of a set of angular errors, all in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub mean: f64,
    pub median: f64,
    pub trimean: f64,
    pub std: f64,
    pub best25: f64,
    pub worst25: f64,
    pub p95: f64,
}

impl ErrorStats {
    pub fn values(&self) -> [f64; 7] {
        [
            self.mean,
            self.median,
            self.trimean,
            self.std,
            self.best25,
            self.worst25,
            self.p95,
        ]
    }

    fn from_values(v: [f64; 7]) -> Self {
        Self {
            mean: v[0],
            median: v[1],
            trimean: v[2],
            std: v[3],
            best25: v[4],
            worst25: v[5],
            p95: v[6],
        }
    }

    /// Field-wise mean of several summaries (fold-averaged aggregation).
    pub fn average(stats: &[ErrorStats]) -> Result<Self> {
        if stats.is_empty() {
            return Err(Error::contract("cannot average zero summaries"));
        }
        let n = stats.len() as f64;
        let mut acc = [0.0; 7];
        for s in stats {
            for (a, v) in acc.iter_mut().zip(s.values()) {
                *a += v;
            }
        }
        Ok(Self::from_values(acc.map(|a| a / n)))
    }
}

/// Quantile of an ascending slice, interpolated at `q·(n − 1)`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn compute_stats(errors_deg: &[f64]) -> Result<ErrorStats> {
    if errors_deg.is_empty() {
        return Err(Error::contract("no errors to summarize"));
    }
    if let Some(bad) = errors_deg.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(Error::contract(format!(
            "angular errors must be finite and >= 0, got {bad}"
        )));
    }
    let mut v = errors_deg.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mean = mean_of(&v);
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    let (q1, q2, q3) = (
        quantile_sorted(&v, 0.25),
        quantile_sorted(&v, 0.5),
        quantile_sorted(&v, 0.75),
    );
    let tail = n.div_ceil(4);
    Ok(ErrorStats {
        mean,
        median: q2,
        trimean: (q1 + 2.0 * q2 + q3) / 4.0,
        std: var.sqrt(),
        best25: mean_of(&v[..tail]),
        worst25: mean_of(&v[n - tail..]),
        p95: quantile_sorted(&v, 0.95),
    })
}

/// Assignment of every sample to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Ascending sample indices held out in `fold`.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded shuffle of `0..n` followed by round-robin assignment to `k` folds.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 || n == 0 {
        return Err(Error::contract("need at least one sample and one fold"));
    }
    if k > n {
        return Err(Error::contract(format!(
            "cannot split {n} samples into {k} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % k;
    }
    Ok(FoldPlan { k, assignment })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub per_fold: Vec<ErrorStats>,
    /// Statistics over all per-sample errors pooled across folds.
    pub pooled: ErrorStats,
    /// Field-wise mean of the per-fold statistics.
    pub fold_averaged: ErrorStats,
    /// `(sample id, error in degrees)`, ordered by sample id.
    pub per_sample_errors: Vec<(usize, f64)>,
}

/// Runs k-fold cross-validation.
///
/// For every fold, `fit(fold, train_indices)` builds a predictor from the
/// complement; the predictor maps a held-out sample index to a raw
/// illuminant estimate, which is scored against `truths` by angular error.
pub fn cross_validate<F, P>(truths: &[Vec3], k: usize, seed: u64, mut fit: F) -> Result<CvResult>
where
    F: FnMut(usize, &[usize]) -> Result<P>,
    P: FnMut(usize) -> Result<Vec3>,
{
    let plan = make_folds(truths.len(), k, seed)?;
    let mut errors: Vec<Option<f64>> = vec![None; truths.len()];
    let mut per_fold = Vec::with_capacity(k);
    for fold in 0..k {
        let mut predict = fit(fold, &plan.train_indices(fold))?;
        let mut fold_errors = Vec::new();
        for i in plan.test_indices(fold) {
            let err = loss::angular_error_deg(&predict(i)?, &truths[i])?;
            debug_assert!(errors[i].is_none());
            errors[i] = Some(err);
            fold_errors.push(err);
        }
        per_fold.push(compute_stats(&fold_errors)?);
    }
    let per_sample_errors: Vec<(usize, f64)> = errors
        .into_iter()
        .enumerate()
        .map(|(i, e)| (i, e.expect("every sample is tested exactly once")))
        .collect();
    let all: Vec<f64> = per_sample_errors.iter().map(|(_, e)| *e).collect();
    Ok(CvResult {
        pooled: compute_stats(&all)?,
        fold_averaged: ErrorStats::average(&per_fold)?,
        per_fold,
        per_sample_errors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    Csv,
    #[default]
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format '{other}' (csv|markdown)")),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "markdown",
        })
    }
}

/// Renders a results table with the columns of [`COLUMNS`], values at two
/// decimals.
pub fn render_report(rows: &[(String, ErrorStats)], format: ReportFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::contract("report needs at least one row"));
    }
    let cells = |s: &ErrorStats| s.values().map(|v| format!("{v:.2}"));
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["Method"];
            header.extend(COLUMNS);
            let io = |e: csv::Error| Error::contract(format!("csv rendering failed: {e}"));
            w.write_record(&header).map_err(io)?;
            for (label, stats) in rows {
                let mut rec = vec![label.clone()];
                rec.extend(cells(stats));
                w.write_record(&rec).map_err(io)?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| Error::contract(format!("csv rendering failed: {e}")))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Markdown => {
            let mut out = format!("| Method | {} |\n", COLUMNS.join(" | "));
            out.push_str(&format!("|---|{}\n", "---:|".repeat(COLUMNS.len())));
            for (label, stats) in rows {
                let label = label.replace('|', "\\|");
                out.push_str(&format!("| {label} | {} |\n", cells(stats).join(" | ")));
            }
            Ok(out)
        }
    }
}

/// `sample_id,error_deg` dump of per-sample errors.
pub fn render_sample_errors(errors: &[(usize, f64)]) -> String {
    let mut out = String::from("sample_id,error_deg\n");
    for (id, e) in errors {
        out.push_str(&format!("{id},{e:.6}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let s = compute_stats(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((s.mean, s.median), (2.5, 2.5));

        let s = compute_stats(&[5.0, 3.0, 1.0, 4.0, 2.0]).unwrap();
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.25), 2.0);
        assert_eq!(quantile_sorted(&v, 0.75), 4.0);
        assert_eq!(s.median, 3.0);
        assert_eq!(s.trimean, 3.0);

        let s = compute_stats(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        assert_eq!(s.best25, 1.5);
        assert_eq!(s.worst25, 7.5);
        // position 0.95 * 7 = 6.65 -> 7 + 0.65
        assert!((s.p95 - 7.65).abs() < 1e-12);
    }

    #[test]
    fn single_value_and_errors() {
        let s = compute_stats(&[2.5]).unwrap();
        assert_eq!(s.values(), [2.5, 2.5, 2.5, 0.0, 2.5, 2.5, 2.5]);
        assert!(compute_stats(&[]).is_err());
        assert!(compute_stats(&[1.0, f64::NAN]).is_err());
        assert!(compute_stats(&[-1.0]).is_err());
    }

    #[test]
    fn fold_examples() {
        let p = make_folds(4, 4, 1).unwrap();
        assert_eq!(p.fold_sizes(), vec![1; 4]);
        let p = make_folds(10, 3, 1).unwrap();
        let mut sizes = p.fold_sizes();
        sizes.sort();
        assert_eq!(sizes, vec![3, 3, 4]);
        assert_eq!(p, make_folds(10, 3, 1).unwrap());
        assert!(make_folds(3, 4, 0).is_err());
        assert!(make_folds(3, 0, 0).is_err());
    }

    #[test]
    fn leave_one_out_has_zero_fold_spread() {
        let truths = vec![[1.0, 1.0, 1.0], [1.0, 2.0, 1.0], [2.0, 1.0, 1.0]];
        let cv = cross_validate(&truths, 3, 5, |_, train| {
            assert_eq!(train.len(), 2);
            Ok(|_i: usize| Ok([1.0, 1.0, 1.0]))
        })
        .unwrap();
        assert_eq!(cv.per_fold.len(), 3);
        assert!(cv.per_fold.iter().all(|s| s.std == 0.0));
        assert_eq!(cv.per_sample_errors[0], (0, 0.0));
        assert_eq!(cv.per_sample_errors.len(), 3);
    }

    #[test]
    fn report_shapes() {
        let zeros = ErrorStats::from_values([0.0; 7]);
        let csv = render_report(&[("a".into(), zeros)], ReportFormat::Csv).unwrap();
        assert_eq!(
            csv,
            "Method,Mean,Med,Tri,Std,Best 25%,Worst 25%,95th perc\na,0.00,0.00,0.00,0.00,0.00,0.00,0.00\n"
        );
        let md = render_report(
            &[("x".into(), zeros), ("y, z".into(), zeros)],
            ReportFormat::Markdown,
        )
        .unwrap();
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines.len(), 1 + 1 + 2);
        assert!(lines[0].starts_with("| Method | Mean | Med | Tri | Std |"));
        assert!(render_report(&[], ReportFormat::Csv).is_err());
    }

    #[test]
    fn csv_report_parses_back() {
        let s = compute_stats(&[0.5, 1.25, 3.333, 7.1, 2.0]).unwrap();
        let text = render_report(&[("GoogLeNet + Angular Loss".into(), s)], ReportFormat::Csv)
            .unwrap();
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let rec = rdr.records().next().unwrap().unwrap();
        assert_eq!(&rec[0], "GoogLeNet + Angular Loss");
        for (i, v) in s.values().iter().enumerate() {
            let back: f64 = rec[i + 1].parse().unwrap();
            assert!((back - v).abs() <= 0.005 + 1e-12);
        }
    }
}
