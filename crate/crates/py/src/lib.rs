//! Python bindings for the mcvbench toolkit.
//!
//! Images cross the boundary as packed RGB8 `bytes`. Perturbation kinds are
//! the strings `"salt_pepper"`, `"gaussian"` and `"rotation"`; grids are
//! `"SP_GA"`, `"GA_SP"`, `"SP_RO"` and `"RO_SP"`.

use std::fmt::Display;
use std::path::PathBuf;

use mcvbench_core::corpus::{self, BenchmarkManifest, CorpusError};
use mcvbench_core::fixtures;
use mcvbench_core::grid::{self, Condition, Grid, GridConfig};
use mcvbench_core::metrics::{self, RunSummary};
use mcvbench_core::perturb::{self, PerturbationKind, PerturbationSpec};
use mcvbench_core::report::{self, McvPlotSpec, TableFormat};
use mcvbench_core::results;
use mcvbench_core::rng;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn value_error(e: impl Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn corpus_error(e: CorpusError) -> PyErr {
    match e {
        CorpusError::Io { .. } => PyOSError::new_err(e.to_string()),
        other => value_error(other),
    }
}

fn parse_kind(kind: &str) -> PyResult<PerturbationKind> {
    match kind {
        "salt_pepper" => Ok(PerturbationKind::SaltPepper),
        "gaussian" => Ok(PerturbationKind::Gaussian),
        "rotation" => Ok(PerturbationKind::Rotation),
        other => Err(value_error(format!("unknown perturbation kind {other:?}"))),
    }
}

fn kind_name(kind: PerturbationKind) -> &'static str {
    match kind {
        PerturbationKind::SaltPepper => "salt_pepper",
        PerturbationKind::Gaussian => "gaussian",
        PerturbationKind::Rotation => "rotation",
    }
}

fn parse_grid(name: &str) -> PyResult<Grid> {
    match name {
        "SP_GA" => Ok(Grid::SpGa),
        "GA_SP" => Ok(Grid::GaSp),
        "SP_RO" => Ok(Grid::SpRo),
        "RO_SP" => Ok(Grid::RoSp),
        "CLEAN" => Ok(Grid::Clean),
        other => Err(value_error(format!("unknown grid {other:?}"))),
    }
}

fn specs_to_tuples(specs: &[PerturbationSpec]) -> Vec<(&'static str, f64)> {
    specs.iter().map(|s| (kind_name(s.kind), s.severity)).collect()
}

fn grid_config(
    sp_levels: Option<Vec<f64>>,
    ga_levels: Option<Vec<f64>>,
    ro_levels: Option<Vec<f64>>,
) -> GridConfig {
    let default = GridConfig::default();
    GridConfig {
        sp_levels: sp_levels.unwrap_or(default.sp_levels),
        ga_levels: ga_levels.unwrap_or(default.ga_levels),
        ro_levels: ro_levels.unwrap_or(default.ro_levels),
    }
}

/// An RGB8 image.
#[pyclass(name = "Image", module = "mcvbench", frozen)]
struct PyImage(mcvbench_core::Image);

#[pymethods]
impl PyImage {
    #[new]
    fn new(width: u32, height: u32, data: &[u8]) -> PyResult<Self> {
        mcvbench_core::Image::new(width, height, data.to_vec())
            .map(Self)
            .map_err(value_error)
    }

    #[staticmethod]
    fn filled(width: u32, height: u32, value: u8) -> PyResult<Self> {
        mcvbench_core::Image::filled(width, height, value)
            .map(Self)
            .map_err(value_error)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.0.height()
    }

    #[getter]
    fn data<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.0.data())
    }

    fn pixel(&self, x: u32, y: u32) -> PyResult<(u8, u8, u8)> {
        if x >= self.0.width() || y >= self.0.height() {
            return Err(value_error(format!("pixel ({x}, {y}) outside the image")));
        }
        let [r, g, b] = self.0.pixel(x, y);
        Ok((r, g, b))
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.0.width(), self.0.height())
    }
}

/// SplitMix64 stream; uniform draws lie in `[0, 1)`.
#[pyclass(name = "RandomStream", module = "mcvbench")]
struct PyRandomStream(rng::RandomStream);

#[pymethods]
impl PyRandomStream {
    #[new]
    fn new(state: u64) -> Self {
        Self(rng::RandomStream::from_state(state))
    }

    #[getter]
    fn state(&self) -> u64 {
        self.0.state()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn next_f64(&mut self) -> f64 {
        self.0.next_f64()
    }
}

#[pyfunction]
fn derive_stream(master_seed: u64, condition_ordinal: u64, image_index: u64) -> PyRandomStream {
    PyRandomStream(rng::derive_stream(master_seed, condition_ordinal, image_index))
}

#[pyfunction]
fn salt_pepper(img: &PyImage, density: f64, stream: &mut PyRandomStream) -> PyResult<PyImage> {
    perturb::salt_pepper(&img.0, density, &mut stream.0)
        .map(PyImage)
        .map_err(value_error)
}

#[pyfunction]
fn gaussian_noise(img: &PyImage, variance: f64, stream: &mut PyRandomStream) -> PyResult<PyImage> {
    perturb::gaussian_noise(&img.0, variance, &mut stream.0)
        .map(PyImage)
        .map_err(value_error)
}

#[pyfunction]
fn rotate(img: &PyImage, degrees: f64) -> PyImage {
    PyImage(perturb::rotate(&img.0, degrees))
}

/// Applies `(kind, severity)` steps in order, sharing one stream.
#[pyfunction]
fn apply_sequence(
    img: &PyImage,
    specs: Vec<(String, f64)>,
    stream: &mut PyRandomStream,
) -> PyResult<PyImage> {
    let specs = specs
        .iter()
        .map(|(kind, severity)| {
            PerturbationSpec::new(parse_kind(kind)?, *severity).map_err(value_error)
        })
        .collect::<PyResult<Vec<_>>>()?;
    perturb::apply_sequence(&img.0, &specs, &mut stream.0)
        .map(PyImage)
        .map_err(value_error)
}

/// One test condition of the grid.
#[pyclass(name = "Condition", module = "mcvbench", frozen)]
struct PyCondition(Condition);

#[pymethods]
impl PyCondition {
    #[getter]
    fn ordinal(&self) -> u32 {
        self.0.ordinal
    }

    #[getter]
    fn grid(&self) -> String {
        match self.0.grid {
            Grid::Clean => "CLEAN".to_string(),
            g => g.to_string(),
        }
    }

    #[getter]
    fn cell(&self) -> (f64, f64) {
        self.0.cell
    }

    #[getter]
    fn specs(&self) -> Vec<(&'static str, f64)> {
        specs_to_tuples(&self.0.specs)
    }

    #[getter]
    fn canonical_label(&self) -> String {
        self.0.canonical_label.clone()
    }

    #[getter]
    fn directory(&self) -> String {
        self.0.directory()
    }

    fn is_clean(&self) -> bool {
        self.0.is_clean()
    }

    fn __repr__(&self) -> String {
        format!("Condition({}, {:?})", self.0.ordinal, self.0.canonical_label)
    }
}

#[pyfunction]
#[pyo3(signature = (sp_levels=None, ga_levels=None, ro_levels=None))]
fn enumerate_conditions(
    sp_levels: Option<Vec<f64>>,
    ga_levels: Option<Vec<f64>>,
    ro_levels: Option<Vec<f64>>,
) -> PyResult<Vec<PyCondition>> {
    let config = grid_config(sp_levels, ga_levels, ro_levels);
    grid::enumerate_conditions(&config)
        .map(|cs| cs.into_iter().map(PyCondition).collect())
        .map_err(value_error)
}

#[pyfunction]
fn canonical_label(grid_name: &str, cell: (f64, f64)) -> PyResult<String> {
    Ok(grid::canonical_label(parse_grid(grid_name)?, cell))
}

#[pyfunction]
fn parse_label(label: &str) -> PyResult<Vec<(&'static str, f64)>> {
    grid::parse_label(label)
        .map(|specs| specs_to_tuples(&specs))
        .map_err(value_error)
}

#[pyfunction]
fn pop_stddev(values: Vec<f64>) -> PyResult<f64> {
    metrics::pop_stddev(&values).map_err(value_error)
}

#[pyfunction]
fn cv_percent(values: Vec<f64>) -> PyResult<f64> {
    metrics::cv_percent(&values).map_err(value_error)
}

#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    metrics::pearson(&x, &y).map_err(value_error)
}

#[pyfunction]
fn spearman(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    metrics::spearman(&x, &y).map_err(value_error)
}

/// Returns `"Group I"` .. `"Group IV"`.
#[pyfunction]
fn classify_quadrant(ma: f64, cv: f64, ref_ma: f64, ref_cv: f64) -> String {
    metrics::classify_quadrant(ma, cv, ref_ma, ref_cv).to_string()
}

#[pyfunction]
fn family_of(training_label: &str) -> PyResult<String> {
    metrics::family_of(training_label)
        .map(|f| f.to_string())
        .map_err(value_error)
}

/// Summary statistics of one classifier run.
#[pyclass(name = "RunSummary", module = "mcvbench", frozen, get_all, from_py_object)]
#[derive(Clone)]
struct PyRunSummary {
    classifier_name: String,
    training_label: String,
    mean_accuracy: f64,
    stddev: f64,
    cv: f64,
    min_accuracy: f64,
    max_accuracy: f64,
    accu_clean: Option<f64>,
}

impl From<RunSummary> for PyRunSummary {
    fn from(s: RunSummary) -> Self {
        Self {
            classifier_name: s.classifier_name,
            training_label: s.training_label,
            mean_accuracy: s.mean_accuracy,
            stddev: s.stddev,
            cv: s.cv,
            min_accuracy: s.min_accuracy,
            max_accuracy: s.max_accuracy,
            accu_clean: s.accu_clean,
        }
    }
}

impl From<&PyRunSummary> for RunSummary {
    fn from(s: &PyRunSummary) -> Self {
        RunSummary {
            classifier_name: s.classifier_name.clone(),
            training_label: s.training_label.clone(),
            mean_accuracy: s.mean_accuracy,
            stddev: s.stddev,
            cv: s.cv,
            min_accuracy: s.min_accuracy,
            max_accuracy: s.max_accuracy,
            accu_clean: s.accu_clean,
        }
    }
}

fn to_core(summaries: &[PyRunSummary]) -> Vec<RunSummary> {
    summaries.iter().map(RunSummary::from).collect()
}

#[pymethods]
impl PyRunSummary {
    #[new]
    #[pyo3(signature = (classifier_name, training_label, mean_accuracy, cv, min_accuracy, max_accuracy, accu_clean=None))]
    fn new(
        classifier_name: String,
        training_label: String,
        mean_accuracy: f64,
        cv: f64,
        min_accuracy: f64,
        max_accuracy: f64,
        accu_clean: Option<f64>,
    ) -> Self {
        Self {
            classifier_name,
            training_label,
            mean_accuracy,
            stddev: cv * mean_accuracy / 100.0,
            cv,
            min_accuracy,
            max_accuracy,
            accu_clean,
        }
    }

    fn display_name(&self) -> String {
        format!("{}({})", self.classifier_name, self.training_label)
    }

    fn __repr__(&self) -> String {
        format!(
            "RunSummary({}, mean={:.2}, cv={:.2})",
            self.display_name(),
            self.mean_accuracy,
            self.cv
        )
    }
}

/// The 27 published benchmark rows.
#[pyfunction]
fn published_summaries() -> Vec<PyRunSummary> {
    fixtures::published_summaries()
        .into_iter()
        .map(PyRunSummary::from)
        .collect()
}

/// `(pairing, spearman, pearson)` for each metric pairing.
#[pyfunction]
fn correlation_table(summaries: Vec<PyRunSummary>) -> PyResult<Vec<(String, f64, f64)>> {
    metrics::correlation_table(&to_core(&summaries))
        .map(|rows| {
            rows.into_iter()
                .map(|r| (r.pairing, r.spearman, r.pearson))
                .collect()
        })
        .map_err(value_error)
}

/// `format` is `"markdown"` or `"csv"`.
#[pyfunction]
#[pyo3(signature = (summaries, format="markdown"))]
fn render_table(summaries: Vec<PyRunSummary>, format: &str) -> PyResult<String> {
    let format = match format {
        "markdown" => TableFormat::Markdown,
        "csv" => TableFormat::Csv,
        other => return Err(value_error(format!("unknown table format {other:?}"))),
    };
    Ok(report::render_table(&to_core(&summaries), format))
}

#[pyfunction]
#[pyo3(signature = (summaries, reference, title=None))]
fn render_mcv_svg(
    summaries: Vec<PyRunSummary>,
    reference: &str,
    title: Option<String>,
) -> PyResult<String> {
    let mut spec = McvPlotSpec::from_summaries(&to_core(&summaries), reference).map_err(value_error)?;
    spec.title = title;
    report::render_mcv_svg(&spec).map_err(value_error)
}

/// A generated benchmark corpus description (`manifest.json`).
#[pyclass(name = "Manifest", module = "mcvbench", frozen)]
struct PyManifest(BenchmarkManifest);

#[pymethods]
impl PyManifest {
    #[getter]
    fn digest(&self) -> String {
        self.0.digest.clone()
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.0.master_seed
    }

    #[getter]
    fn image_count(&self) -> usize {
        self.0.corpus.image_count
    }

    fn file_count(&self) -> usize {
        self.0.file_count()
    }

    fn conditions(&self) -> Vec<PyCondition> {
        self.0.condition_list().into_iter().map(PyCondition).collect()
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    /// Problems found under `root`; empty when the corpus matches.
    fn validate(&self, root: PathBuf) -> Vec<String> {
        corpus::validate_manifest(&self.0, &root)
            .iter()
            .map(ToString::to_string)
            .collect()
    }

    /// Regenerates every file from `source_dir` and reports differences.
    #[pyo3(signature = (source_dir, workers=1))]
    fn verify_regeneration(
        &self,
        py: Python<'_>,
        source_dir: PathBuf,
        workers: usize,
    ) -> PyResult<Vec<String>> {
        let found = py
            .detach(|| corpus::verify_regeneration(&self.0, &source_dir, workers))
            .map_err(corpus_error)?;
        Ok(found.iter().map(ToString::to_string).collect())
    }

    /// Summarises a results CSV (with its `.json` sidecar) against this
    /// manifest. Raises `ValueError` listing any gaps.
    fn summarize(&self, results_csv: PathBuf) -> PyResult<PyRunSummary> {
        let run = results::load_results(&results_csv).map_err(|e| match e {
            results::ResultsError::Io { .. } => PyOSError::new_err(e.to_string()),
            other => value_error(other),
        })?;
        let gaps = results::validate_results(&run, &self.0);
        if !gaps.is_empty() {
            let lines: Vec<String> = gaps.iter().map(ToString::to_string).collect();
            return Err(value_error(lines.join("; ")));
        }
        metrics::summarize_run(&run, &self.0.condition_list())
            .map(PyRunSummary::from)
            .map_err(value_error)
    }
}

#[pyfunction]
#[pyo3(signature = (source_dir, out_dir, master_seed, sp_levels=None, ga_levels=None, ro_levels=None, workers=1))]
#[allow(clippy::too_many_arguments)]
fn generate_corpus(
    py: Python<'_>,
    source_dir: PathBuf,
    out_dir: PathBuf,
    master_seed: u64,
    sp_levels: Option<Vec<f64>>,
    ga_levels: Option<Vec<f64>>,
    ro_levels: Option<Vec<f64>>,
    workers: usize,
) -> PyResult<PyManifest> {
    let config = grid_config(sp_levels, ga_levels, ro_levels);
    py.detach(|| corpus::generate_corpus(&source_dir, &out_dir, &config, master_seed, workers))
        .map(PyManifest)
        .map_err(corpus_error)
}

#[pyfunction]
fn load_manifest(path: PathBuf) -> PyResult<PyManifest> {
    corpus::load_manifest(&path).map(PyManifest).map_err(corpus_error)
}

#[pymodule]
fn mcvbench(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyRandomStream>()?;
    m.add_class::<PyCondition>()?;
    m.add_class::<PyRunSummary>()?;
    m.add_class::<PyManifest>()?;
    m.add_function(wrap_pyfunction!(derive_stream, m)?)?;
    m.add_function(wrap_pyfunction!(salt_pepper, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_noise, m)?)?;
    m.add_function(wrap_pyfunction!(rotate, m)?)?;
    m.add_function(wrap_pyfunction!(apply_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_conditions, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_label, m)?)?;
    m.add_function(wrap_pyfunction!(parse_label, m)?)?;
    m.add_function(wrap_pyfunction!(pop_stddev, m)?)?;
    m.add_function(wrap_pyfunction!(cv_percent, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(classify_quadrant, m)?)?;
    m.add_function(wrap_pyfunction!(family_of, m)?)?;
    m.add_function(wrap_pyfunction!(published_summaries, m)?)?;
    m.add_function(wrap_pyfunction!(correlation_table, m)?)?;
    m.add_function(wrap_pyfunction!(render_table, m)?)?;
    m.add_function(wrap_pyfunction!(render_mcv_svg, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(load_manifest, m)?)?;
    Ok(())
}
