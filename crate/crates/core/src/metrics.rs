//! Robustness statistics: dispersion, run summaries, mCV quadrant placement,
//! family aggregates and rank/linear correlation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{parse_label, Condition, GridError};
use crate::results::RunResults;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("statistic of an empty sample")]
    Empty,
    #[error("coefficient of variation is undefined for a zero mean")]
    ZeroMean,
    #[error("samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("correlation is undefined for a constant sample")]
    ConstantInput,
    #[error("results miss {} condition(s): {}", .0.len(), join_ordinals(.0))]
    MissingConditions(Vec<u32>),
    #[error("{0} has no accuracy on the clean condition")]
    MissingClean(String),
    #[error(transparent)]
    Label(#[from] GridError),
}

fn join_ordinals(ordinals: &[u32]) -> String {
    ordinals
        .iter()
        .map(|o| format!("#{o}"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn mean(values: &[f64]) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Population standard deviation (divides by `n`).
pub fn pop_stddev(values: &[f64]) -> Result<f64, MetricsError> {
    let mu = mean(values)?;
    let ss: f64 = values.iter().map(|x| (x - mu).powi(2)).sum();
    Ok((ss / values.len() as f64).sqrt())
}

/// Population standard deviation as a percentage of the mean.
pub fn cv_percent(values: &[f64]) -> Result<f64, MetricsError> {
    let mu = mean(values)?;
    if mu == 0.0 {
        return Err(MetricsError::ZeroMean);
    }
    Ok(100.0 * pop_stddev(values)? / mu)
}

/// Statistics of one trained classifier over all test conditions, in percent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub classifier_name: String,
    pub training_label: String,
    pub mean_accuracy: f64,
    pub stddev: f64,
    pub cv: f64,
    pub min_accuracy: f64,
    pub max_accuracy: f64,
    /// Absent when the condition grid has no clean condition.
    pub accu_clean: Option<f64>,
}

impl RunSummary {
    /// `Classifier(training_label)`, the name used in tables and plots.
    pub fn display_name(&self) -> String {
        format!("{}({})", self.classifier_name, self.training_label)
    }
}

/// Mean, CV, extremes and clean accuracy over every condition of `conditions`.
pub fn summarize_run(
    results: &RunResults,
    conditions: &[Condition],
) -> Result<RunSummary, MetricsError> {
    let by_ordinal: BTreeMap<u32, f64> = results
        .rows
        .iter()
        .map(|r| (r.condition_ordinal, r.accuracy))
        .collect();
    let missing: Vec<u32> = conditions
        .iter()
        .map(|c| c.ordinal)
        .filter(|o| !by_ordinal.contains_key(o))
        .collect();
    if !missing.is_empty() {
        return Err(MetricsError::MissingConditions(missing));
    }

    let percents: Vec<f64> = conditions
        .iter()
        .map(|c| 100.0 * by_ordinal[&c.ordinal])
        .collect();
    let mean_accuracy = mean(&percents)?;
    let stddev = pop_stddev(&percents)?;
    let cv = cv_percent(&percents)?;
    let accu_clean = conditions
        .iter()
        .find(|c| c.is_clean())
        .map(|c| 100.0 * by_ordinal[&c.ordinal]);

    Ok(RunSummary {
        classifier_name: results.classifier_name.clone(),
        training_label: results.training_label.clone(),
        mean_accuracy,
        stddev,
        cv,
        min_accuracy: percents.iter().copied().fold(f64::INFINITY, f64::min),
        max_accuracy: percents.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        accu_clean,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuadrantGroup {
    I,
    II,
    III,
    IV,
}

impl fmt::Display for QuadrantGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let numeral = match self {
            QuadrantGroup::I => "I",
            QuadrantGroup::II => "II",
            QuadrantGroup::III => "III",
            QuadrantGroup::IV => "IV",
        };
        write!(f, "Group {numeral}")
    }
}

/// Places `(ma, cv)` relative to a reference point. Both comparisons against
/// the reference are inclusive in the classifier's favour.
pub fn classify_quadrant(ma: f64, cv: f64, ref_ma: f64, ref_cv: f64) -> QuadrantGroup {
    match (ma >= ref_ma, cv <= ref_cv) {
        (true, true) => QuadrantGroup::I,
        (true, false) => QuadrantGroup::II,
        (false, true) => QuadrantGroup::III,
        (false, false) => QuadrantGroup::IV,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Clean,
    SingleFactor,
    TwoFactor,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Clean => "clean",
            Family::SingleFactor => "single_factor",
            Family::TwoFactor => "two_factor",
        })
    }
}

/// Family of a training label, by its number of effective perturbations.
pub fn family_of(training_label: &str) -> Result<Family, MetricsError> {
    match parse_label(training_label)?.len() {
        0 => Ok(Family::Clean),
        1 => Ok(Family::SingleFactor),
        2 => Ok(Family::TwoFactor),
        n => Err(MetricsError::Label(GridError::BadLabel {
            label: training_label.to_string(),
            reason: format!("{n} perturbations; families cover at most two"),
        })),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyStats {
    pub count: usize,
    pub cv: f64,
    pub mean_accuracy: f64,
    pub min_accuracy: f64,
    pub max_accuracy: f64,
}

/// Unweighted per-family means. Families with no runs are absent from the map.
pub fn family_aggregate(
    summaries: &[RunSummary],
) -> Result<BTreeMap<Family, FamilyStats>, MetricsError> {
    let mut groups: BTreeMap<Family, Vec<&RunSummary>> = BTreeMap::new();
    for s in summaries {
        groups.entry(family_of(&s.training_label)?).or_default().push(s);
    }
    let mut out = BTreeMap::new();
    for (family, runs) in groups {
        let avg = |f: fn(&RunSummary) -> f64| {
            runs.iter().map(|s| f(s)).sum::<f64>() / runs.len() as f64
        };
        out.insert(
            family,
            FamilyStats {
                count: runs.len(),
                cv: avg(|s| s.cv),
                mean_accuracy: avg(|s| s.mean_accuracy),
                min_accuracy: avg(|s| s.min_accuracy),
                max_accuracy: avg(|s| s.max_accuracy),
            },
        );
    }
    Ok(out)
}

fn check_pairs(x: &[f64], y: &[f64]) -> Result<(), MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(MetricsError::TooFewPairs(x.len()));
    }
    Ok(())
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    check_pairs(x, y)?;
    let mx = mean(x)?;
    let my = mean(y)?;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::ConstantInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation. Without ties this is `1 - 6 Σd² / (n(n²-1))`;
/// with ties it is Pearson's coefficient of the fractional ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    check_pairs(x, y)?;
    let rx = fractional_ranks(x);
    let ry = fractional_ranks(y);
    let distinct = |v: &[f64]| v.iter().map(|r| r.to_bits()).collect::<BTreeSet<_>>().len();
    let n = x.len();
    if distinct(&rx) == n && distinct(&ry) == n {
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
        let n = n as f64;
        return Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)));
    }
    pearson(&rx, &ry)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub pairing: String,
    pub spearman: f64,
    pub pearson: f64,
}

/// The three pairings of CV, mean accuracy and clean accuracy across runs.
pub fn correlation_table(summaries: &[RunSummary]) -> Result<Vec<CorrelationRow>, MetricsError> {
    let cv: Vec<f64> = summaries.iter().map(|s| s.cv).collect();
    let mean_acc: Vec<f64> = summaries.iter().map(|s| s.mean_accuracy).collect();
    let clean = summaries
        .iter()
        .map(|s| s.accu_clean.ok_or_else(|| MetricsError::MissingClean(s.display_name())))
        .collect::<Result<Vec<f64>, _>>()?;
    let pairings = [
        ("CV & mean Accu(all images)", &cv, &mean_acc),
        ("CV & Accu(clean images)", &cv, &clean),
        ("mean Accu(all images) & Accu(clean images)", &mean_acc, &clean),
    ];
    pairings
        .into_iter()
        .map(|(name, x, y)| {
            Ok(CorrelationRow {
                pairing: name.to_string(),
                spearman: spearman(x, y)?,
                pearson: pearson(x, y)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{enumerate_conditions, GridConfig};
    use crate::results::ResultRow;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn stddev_examples() {
        assert_eq!(pop_stddev(&[2.0, 2.0, 2.0]).unwrap(), 0.0);
        // variance 1.25
        assert!(close(pop_stddev(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 1.25f64.sqrt(), 1e-12));
        assert!(close(pop_stddev(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 1.118034, 1e-6));
        assert_eq!(pop_stddev(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn stddev_recovered_from_published_cv() {
        // sigma = CV * mean / 100
        assert!(close(2.28 * 85.25 / 100.0, 1.9437, 1e-4));
    }

    #[test]
    fn cv_examples() {
        assert_eq!(cv_percent(&[5.0; 4]).unwrap(), 0.0);
        assert!(close(cv_percent(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 44.7214, 1e-4));
        assert_eq!(cv_percent(&[-1.0, 1.0]), Err(MetricsError::ZeroMean));
    }

    fn run(accuracies: &[f64], conditions: &[Condition]) -> RunResults {
        RunResults {
            classifier_name: "Net".into(),
            training_label: "clean".into(),
            manifest_digest: None,
            rows: conditions
                .iter()
                .zip(accuracies)
                .map(|(c, &a)| ResultRow {
                    condition_ordinal: c.ordinal,
                    canonical_label: c.canonical_label.clone(),
                    correct: (a * 100.0).round() as u64,
                    total: 100,
                    accuracy: a,
                })
                .collect(),
        }
    }

    #[test]
    fn constant_run_summary() {
        let conditions = enumerate_conditions(&GridConfig::default()).unwrap();
        let s = summarize_run(&run(&[0.85; 69], &conditions), &conditions).unwrap();
        assert!(close(s.mean_accuracy, 85.0, 1e-9));
        assert_eq!(s.cv, 0.0);
        assert_eq!(s.min_accuracy, s.max_accuracy);
        assert!(close(s.min_accuracy, 85.0, 1e-9));
        assert!(close(s.accu_clean.unwrap(), 85.0, 1e-9));
    }

    #[test]
    fn two_condition_summary() {
        let conditions = enumerate_conditions(&GridConfig::default()).unwrap();
        let two = &conditions[..2];
        let s = summarize_run(&run(&[0.8, 0.9], two), two).unwrap();
        assert!(close(s.mean_accuracy, 85.0, 1e-9));
        assert!(close(s.stddev, 5.0, 1e-9));
        assert!(close(s.cv, 100.0 * 5.0 / 85.0, 1e-9));
        assert!(close(s.cv, 5.882, 1e-3));
        assert!(close(s.accu_clean.unwrap(), 80.0, 1e-9));
    }

    #[test]
    fn missing_conditions_are_listed() {
        let conditions = enumerate_conditions(&GridConfig::default()).unwrap();
        let mut results = run(&[0.5; 69], &conditions);
        results.rows.retain(|r| r.condition_ordinal != 7 && r.condition_ordinal != 30);
        assert_eq!(
            summarize_run(&results, &conditions),
            Err(MetricsError::MissingConditions(vec![7, 30]))
        );
    }

    #[test]
    fn quadrant_examples() {
        assert_eq!(classify_quadrant(88.39, 1.92, 85.25, 2.28), QuadrantGroup::I);
        assert_eq!(classify_quadrant(85.75, 3.33, 85.25, 2.28), QuadrantGroup::II);
        assert_eq!(classify_quadrant(80.0, 2.0, 85.25, 2.28), QuadrantGroup::III);
        assert_eq!(classify_quadrant(80.0, 3.0, 85.25, 2.28), QuadrantGroup::IV);
        assert_eq!(classify_quadrant(85.25, 2.28, 85.25, 2.28), QuadrantGroup::I);
        assert_eq!(QuadrantGroup::III.to_string(), "Group III");
    }

    #[test]
    fn families() {
        assert_eq!(family_of("clean").unwrap(), Family::Clean);
        assert_eq!(family_of("RL30").unwrap(), Family::SingleFactor);
        assert_eq!(family_of("GA0.1SP0.1").unwrap(), Family::TwoFactor);
        assert!(family_of("SP0.1GA0.1RL30").is_err());
        assert!(family_of("bogus").is_err());
    }

    #[test]
    fn empty_family_is_absent() {
        let s = RunSummary {
            classifier_name: "N".into(),
            training_label: "SP0.1".into(),
            mean_accuracy: 80.0,
            stddev: 1.0,
            cv: 1.25,
            min_accuracy: 78.0,
            max_accuracy: 82.0,
            accu_clean: Some(81.0),
        };
        let agg = family_aggregate(&[s]).unwrap();
        assert_eq!(agg.len(), 1);
        assert!(!agg.contains_key(&Family::Clean));
        assert_eq!(agg[&Family::SingleFactor].count, 1);
    }

    #[test]
    fn spearman_examples() {
        assert!(close(spearman(&[1.0, 2.0, 3.0], &[1.0, 5.0, 9.0]).unwrap(), 1.0, 1e-12));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap(), -0.5);
        assert_eq!(spearman(&[1.0], &[1.0]), Err(MetricsError::TooFewPairs(1)));
        assert_eq!(
            spearman(&[1.0, 2.0], &[1.0]),
            Err(MetricsError::LengthMismatch(2, 1))
        );
    }

    #[test]
    fn ties_use_fractional_ranks() {
        assert_eq!(fractional_ranks(&[1.33, 0.5, 1.33, 2.0]), vec![2.5, 1.0, 2.5, 4.0]);
        // Pearson on ranks (1, 2.5, 2.5, 4) vs (1, 2, 3, 4): sxy = 4.5, sxx = 4.5, syy = 5
        let r = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(close(r, 4.5 / (4.5f64 * 5.0).sqrt(), 1e-12));
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!(close(pearson(&x, &x).unwrap(), 1.0, 1e-12));
        assert!(close(pearson(&x, &neg).unwrap(), -1.0, 1e-12));
        assert!(close(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(), 0.981981, 1e-6));
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(MetricsError::ConstantInput));
    }

    fn sample() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..30).prop_flat_map(|n| {
            (
                proptest::collection::vec(-100.0f64..100.0, n),
                proptest::collection::vec(-100.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn cv_is_scale_invariant(
            values in proptest::collection::vec(1.0f64..100.0, 2..40),
            alpha in 0.01f64..1000.0,
        ) {
            let scaled: Vec<f64> = values.iter().map(|v| v * alpha).collect();
            let a = cv_percent(&values).unwrap();
            let b = cv_percent(&scaled).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }

        #[test]
        fn correlations_are_symmetric_and_bounded((x, y) in sample()) {
            if let (Ok(a), Ok(b)) = (pearson(&x, &y), pearson(&y, &x)) {
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&a));
            }
            if let (Ok(a), Ok(b)) = (spearman(&x, &y), spearman(&y, &x)) {
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&a));
            }
        }

        #[test]
        fn spearman_ignores_monotone_transforms((x, y) in sample()) {
            let warped: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0 * v).collect();
            if let (Ok(a), Ok(b)) = (spearman(&x, &y), spearman(&warped, &y)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn pearson_ignores_positive_affine_maps((x, y) in sample(), k in 0.1f64..10.0, c in -50.0f64..50.0) {
            let moved: Vec<f64> = y.iter().map(|v| k * v + c).collect();
            if let (Ok(a), Ok(b)) = (pearson(&x, &y), pearson(&x, &moved)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn quadrant_is_monotone(
            ma in 0.0f64..100.0, cv in 0.0f64..10.0, bump in 0.0f64..20.0,
            rma in 0.0f64..100.0, rcv in 0.0f64..10.0,
        ) {
            use QuadrantGroup::*;
            let before = classify_quadrant(ma, cv, rma, rcv);
            let higher = classify_quadrant(ma + bump, cv, rma, rcv);
            if matches!(before, I | II) {
                prop_assert!(matches!(higher, I | II));
            }
            let steadier = classify_quadrant(ma, cv - bump, rma, rcv);
            if matches!(before, I | III) {
                prop_assert!(matches!(steadier, I | III));
            }
        }
    }
}
