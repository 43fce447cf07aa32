//! Two-factor image perturbation benchmark toolkit.
//!
//! * [`perturb`]: deterministic salt & pepper, Gaussian and rotation kernels
//! * [`grid`]: the test-condition grid and its label grammar
//! * [`corpus`]: corpus generation, manifests and validation
//! * [`results`]: per-condition classifier results (CSV + sidecar)
//! * [`metrics`]: CV, run summaries, mCV quadrants, families, correlations
//! * [`report`]: mCV plots as SVG and summary tables

pub mod corpus;
pub mod fixtures;
pub mod grid;
pub mod image;
pub mod metrics;
pub mod perturb;
pub mod report;
pub mod results;
pub mod rng;

pub use corpus::{
    generate_corpus, load_manifest, validate_manifest, verify_regeneration, BenchmarkManifest,
    CorpusError, Violation,
};
pub use grid::{canonical_label, enumerate_conditions, Condition, Grid, GridConfig};
pub use image::Image;
pub use metrics::{
    classify_quadrant, cv_percent, family_aggregate, family_of, pearson, pop_stddev, spearman,
    summarize_run, Family, QuadrantGroup, RunSummary,
};
pub use perturb::{
    apply_sequence, gaussian_noise, rotate, salt_pepper, PerturbationKind, PerturbationSpec,
};
pub use report::{render_mcv_svg, render_table, McvPlotSpec, McvPoint, TableFormat};
pub use results::{load_results, validate_results, RunResults};
pub use rng::{derive_stream, RandomStream};
