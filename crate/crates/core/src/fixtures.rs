//! Published benchmark rows and synthetic per-condition results built from them.
//!
//! Each row summarises one CIFAR-10 classifier (AlexNet, ResNet50, VGG-19)
//! trained on one of nine training sets and tested on all 69 conditions.
//! Only the summary statistics are published, so [`synthesize_results`]
//! constructs per-condition accuracies whose mean, CV, extremes and clean
//! accuracy reproduce a row to two decimals.

use thiserror::Error;

use crate::grid::Condition;
use crate::metrics::RunSummary;
use crate::results::{ResultRow, RunResults};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PublishedRun {
    pub classifier: &'static str,
    pub training_label: &'static str,
    pub cv: f64,
    pub mean_accuracy: f64,
    pub accu_clean: f64,
    pub min_accuracy: f64,
    pub max_accuracy: f64,
}

const fn row(
    classifier: &'static str,
    training_label: &'static str,
    [cv, mean_accuracy, accu_clean, min_accuracy, max_accuracy]: [f64; 5],
) -> PublishedRun {
    PublishedRun {
        classifier,
        training_label,
        cv,
        mean_accuracy,
        accu_clean,
        min_accuracy,
        max_accuracy,
    }
}

/// Columns: CV %, mean accuracy %, clean accuracy %, min %, max %.
pub const PUBLISHED_RUNS: [PublishedRun; 27] = [
    row("AlexNet", "clean", [2.28, 85.25, 92.08, 83.18, 92.08]),
    row("AlexNet", "GA0.1", [1.50, 89.60, 90.9, 87.22, 91.7]),
    row("AlexNet", "GA0.1SP0.1", [1.33, 89.75, 90.82, 87.62, 91.42]),
    row("AlexNet", "RL30", [3.33, 85.75, 90.72, 82.12, 91.42]),
    row("AlexNet", "RR30", [3.07, 86.33, 90.74, 82.64, 91.7]),
    row("AlexNet", "SP0.1", [1.33, 89.44, 90.78, 86.68, 91.18]),
    row("AlexNet", "SP0.1GA0.1", [1.04, 89.67, 91.3, 87.96, 91.38]),
    row("AlexNet", "SP0.1RL30", [1.92, 88.39, 89.96, 85.3, 91.6]),
    row("AlexNet", "SP0.1RR30", [1.56, 88.79, 90.52, 85.98, 91.36]),
    row("ResNet50", "clean", [2.56, 88.56, 91.18, 85.46, 91.5]),
    row("ResNet50", "GA0.1", [0.22, 81.98, 82.4, 81.68, 82.4]),
    row("ResNet50", "GA0.1SP0.1", [0.37, 82.17, 82.56, 81.6, 82.64]),
    row("ResNet50", "RL30", [2.50, 84.83, 83.8, 83.12, 89.48]),
    row("ResNet50", "RR30", [2.62, 85.20, 83.68, 83.2, 90.0]),
    row("ResNet50", "SP0.1", [0.29, 82.27, 82.86, 82.0, 82.86]),
    row("ResNet50", "SP0.1GA0.1", [0.12, 81.97, 81.9, 81.72, 82.18]),
    row("ResNet50", "SP0.1RL30", [1.85, 84.66, 84.16, 82.86, 88.04]),
    row("ResNet50", "SP0.1RR30", [2.62, 83.54, 82.34, 81.68, 88.22]),
    row("VGG-19", "clean", [3.98, 91.13, 94.92, 86.38, 94.92]),
    row("VGG-19", "GA0.1", [2.81, 89.78, 92.48, 85.22, 92.48]),
    row("VGG-19", "GA0.1SP0.1", [1.83, 91.18, 92.82, 88.94, 92.94]),
    row("VGG-19", "RL30", [1.51, 89.94, 90.32, 87.26, 92.9]),
    row("VGG-19", "RR30", [1.36, 89.34, 90.04, 86.96, 91.6]),
    row("VGG-19", "SP0.1", [1.37, 90.72, 92.28, 88.96, 92.36]),
    row("VGG-19", "SP0.1GA0.1", [2.07, 89.77, 92.16, 87.06, 92.16]),
    row("VGG-19", "SP0.1RL30", [1.04, 90.08, 90.48, 87.78, 91.92]),
    row("VGG-19", "SP0.1RR30", [1.24, 88.30, 88.72, 86.1, 90.92]),
];

impl PublishedRun {
    pub fn display_name(&self) -> String {
        format!("{}({})", self.classifier, self.training_label)
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            classifier_name: self.classifier.to_string(),
            training_label: self.training_label.to_string(),
            mean_accuracy: self.mean_accuracy,
            stddev: self.cv * self.mean_accuracy / 100.0,
            cv: self.cv,
            min_accuracy: self.min_accuracy,
            max_accuracy: self.max_accuracy,
            accu_clean: Some(self.accu_clean),
        }
    }
}

pub fn published_summaries() -> Vec<RunSummary> {
    PUBLISHED_RUNS.iter().map(PublishedRun::summary).collect()
}

#[derive(Debug, Error, PartialEq)]
pub enum FixtureError {
    #[error("the condition list has no clean condition")]
    NoClean,
    #[error("need at least 5 conditions, got {0}")]
    TooFewConditions(usize),
    #[error("no bounded sample of {n} values reaches the moments of {name}")]
    Infeasible { name: String, n: usize },
}

/// Completes `fixed` with `free` more values in `[lo, hi]` so the whole set
/// has sum `sum` and sum of squares `sum_sq`. The free values are `low`
/// copies of `lo`, `free - 2 - low` copies of some level `h`, and one pair
/// solving the remaining two moment equations exactly.
fn complete_sample(
    free: usize,
    lo: f64,
    hi: f64,
    sum: f64,
    sum_sq: f64,
) -> Option<Vec<f64>> {
    const STEPS: usize = 4000;
    for low in 0..=free - 2 {
        let bulk = (free - 2 - low) as f64;
        for step in 0..=STEPS {
            let h = lo + (hi - lo) * step as f64 / STEPS as f64;
            let s2 = sum - low as f64 * lo - bulk * h;
            let q2 = sum_sq - low as f64 * lo * lo - bulk * h * h;
            let disc = q2 / 2.0 - s2 * s2 / 4.0;
            if disc < 0.0 {
                continue;
            }
            let (a, b) = (s2 / 2.0 - disc.sqrt(), s2 / 2.0 + disc.sqrt());
            if a >= lo && b <= hi {
                let mut values = vec![lo; low];
                values.extend(std::iter::repeat_n(h, free - 2 - low));
                values.extend([a, b]);
                return Some(values);
            }
        }
    }
    None
}

/// Per-condition results (each with `total` test images) whose summary
/// matches `run`. Requires a clean condition among `conditions`.
pub fn synthesize_results(
    run: &PublishedRun,
    conditions: &[Condition],
    total: u64,
) -> Result<RunResults, FixtureError> {
    let n = conditions.len();
    if n < 5 {
        return Err(FixtureError::TooFewConditions(n));
    }
    let clean_at = conditions
        .iter()
        .position(Condition::is_clean)
        .ok_or(FixtureError::NoClean)?;

    let mut fixed = vec![run.accu_clean];
    if run.max_accuracy != run.accu_clean {
        fixed.push(run.max_accuracy);
    }
    if run.min_accuracy != run.accu_clean {
        fixed.push(run.min_accuracy);
    }
    let sigma = run.cv * run.mean_accuracy / 100.0;
    let sum = n as f64 * run.mean_accuracy - fixed.iter().sum::<f64>();
    let sum_sq = n as f64 * (sigma * sigma + run.mean_accuracy * run.mean_accuracy)
        - fixed.iter().map(|v| v * v).sum::<f64>();
    let free = complete_sample(
        n - fixed.len(),
        run.min_accuracy,
        run.max_accuracy,
        sum,
        sum_sq,
    )
    .ok_or_else(|| FixtureError::Infeasible {
        name: run.display_name(),
        n,
    })?;

    let mut percents: Vec<f64> = fixed[1..].iter().copied().chain(free).collect();
    percents.insert(clean_at, run.accu_clean);
    let lo = (run.min_accuracy / 100.0 * total as f64).round() as u64;
    let hi = (run.max_accuracy / 100.0 * total as f64).round() as u64;

    Ok(RunResults {
        classifier_name: run.classifier.to_string(),
        training_label: run.training_label.to_string(),
        manifest_digest: None,
        rows: conditions
            .iter()
            .zip(percents)
            .map(|(c, p)| {
                let correct = ((p / 100.0 * total as f64).round() as u64).clamp(lo, hi);
                ResultRow::new(c.ordinal, &c.canonical_label, correct, total)
            })
            .collect(),
    })
}
