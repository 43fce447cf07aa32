//! `mcvbench`: generate perturbed benchmark corpora, analyse classifier
//! results against them, and report mCV plots, tables and correlations.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 validation failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use mcvbench_core::corpus::{self, generate_corpus, load_manifest, validate_manifest};
use mcvbench_core::grid::GridConfig;
use mcvbench_core::metrics::{
    classify_quadrant, correlation_table, family_aggregate, summarize_run, RunSummary,
};
use mcvbench_core::report::{render_mcv_svg, render_table, McvPlotSpec, TableFormat};
use mcvbench_core::results::{load_results, validate_results};
use serde_json::json;

#[derive(Parser)]
#[command(name = "mcvbench", version, about = "Two-factor perturbation benchmark toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply every test condition to a directory of PNG images.
    Generate(GenerateArgs),
    /// Check a generated corpus against its manifest.
    Validate(ValidateArgs),
    /// Summarise classifier results and place them in mCV quadrants.
    Analyze(AnalyzeArgs),
    /// Write the mCV plot (SVG) and the summary table.
    Report(ReportArgs),
    /// Spearman and Pearson correlations between CV, mean and clean accuracy.
    Correlate(CorrelateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Directory of source PNG images (all the same size).
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory for the perturbed sets and manifest.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "MCVBENCH_SEED")]
    seed: u64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0.1,0.15,0.2")]
    sp_levels: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0.1,0.15,0.2")]
    ga_levels: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-60,-30,0,30,60")]
    ro_levels: Vec<f64>,
    /// Worker threads (output does not depend on this).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Corpus root; defaults to the manifest's directory.
    #[arg(long)]
    root: Option<PathBuf>,
    /// Source directory; when given, every file is regenerated and compared.
    #[arg(long)]
    source: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Results CSV files (each with a `.json` sidecar).
    #[arg(long, num_args = 1.., required = true)]
    results: Vec<PathBuf>,
    /// Reference run, e.g. `AlexNet(clean)`.
    #[arg(long)]
    reference: String,
    /// Directory for summaries.json and analysis.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    summaries: PathBuf,
    #[arg(long)]
    out_plot: PathBuf,
    /// Table path; `.csv` selects CSV, anything else Markdown.
    #[arg(long)]
    out_table: PathBuf,
    /// Reference run; defaults to the only run trained on `clean`.
    #[arg(long)]
    reference: Option<String>,
    #[arg(long)]
    title: Option<String>,
}

#[derive(Args)]
struct CorrelateArgs {
    #[arg(long)]
    summaries: PathBuf,
}

/// Inputs were readable but do not check out; exits with status 3.
#[derive(Debug)]
struct ValidationFailed(Vec<String>);

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "validation failed: {} problem(s)", self.0.len())
    }
}

impl std::error::Error for ValidationFailed {}

type CmdResult = anyhow::Result<()>;

fn workers(requested: Option<usize>) -> usize {
    requested.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    })
}

fn generate(args: GenerateArgs) -> CmdResult {
    let config = GridConfig {
        sp_levels: args.sp_levels,
        ga_levels: args.ga_levels,
        ro_levels: args.ro_levels,
    };
    let manifest = generate_corpus(&args.corpus, &args.out, &config, args.seed, workers(args.workers))
        .context("generation failed")?;
    println!(
        "{} conditions, {} images",
        manifest.conditions.len(),
        manifest.file_count()
    );
    println!("digest {}", manifest.digest);
    Ok(())
}

fn validate(args: ValidateArgs) -> CmdResult {
    let manifest = load_manifest(&args.manifest)?;
    let root = args.root.unwrap_or_else(|| {
        args.manifest
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default()
    });
    let mut violations = validate_manifest(&manifest, &root);
    if let Some(source) = &args.source {
        violations.extend(corpus::verify_regeneration(
            &manifest,
            source,
            workers(args.workers),
        )?);
    }
    if !violations.is_empty() {
        return Err(ValidationFailed(violations.iter().map(ToString::to_string).collect()).into());
    }
    println!("manifest OK: {} files verified", manifest.file_count());
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> CmdResult {
    let manifest = load_manifest(&args.manifest)?;
    let conditions = manifest.condition_list();

    let mut runs = Vec::new();
    let mut gaps = Vec::new();
    for path in &args.results {
        let results = load_results(path)?;
        gaps.extend(
            validate_results(&results, &manifest)
                .into_iter()
                .map(|g| format!("{}: {g}", path.display())),
        );
        runs.push(results);
    }
    if !gaps.is_empty() {
        return Err(ValidationFailed(gaps).into());
    }

    let summaries = runs
        .iter()
        .map(|r| summarize_run(r, &conditions))
        .collect::<Result<Vec<_>, _>>()
        .context("summarising runs")?;
    let Some(reference) = summaries.iter().find(|s| s.display_name() == args.reference) else {
        bail!("reference {:?} is not among the analysed runs", args.reference);
    };
    let families = family_aggregate(&summaries).context("grouping runs by training family")?;

    let mut quadrants = Vec::new();
    for s in &summaries {
        let group = classify_quadrant(s.mean_accuracy, s.cv, reference.mean_accuracy, reference.cv);
        println!(
            "{}\t{group}\tmean {:.2}\tcv {:.2}",
            s.display_name(),
            s.mean_accuracy,
            s.cv
        );
        quadrants.push(json!({
            "run": s.display_name(),
            "group": group,
            "mean_accuracy": s.mean_accuracy,
            "cv": s.cv,
        }));
    }
    for (family, stats) in &families {
        println!(
            "family {family}\tn {}\tmean cv {:.2}\tmean accu {:.2}\tmean min {:.2}\tmean max {:.2}",
            stats.count, stats.cv, stats.mean_accuracy, stats.min_accuracy, stats.max_accuracy
        );
    }

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let analysis = json!({
        "manifest_digest": manifest.digest,
        "reference": args.reference,
        "quadrants": quadrants,
        "families": families,
    });
    write_json(&args.out.join("summaries.json"), &serde_json::to_value(&summaries).unwrap())?;
    write_json(&args.out.join("analysis.json"), &analysis)?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_summaries(path: &Path) -> anyhow::Result<Vec<RunSummary>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn report(args: ReportArgs) -> CmdResult {
    let summaries = read_summaries(&args.summaries)?;
    let format = match args.out_table.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => TableFormat::Csv,
        _ => TableFormat::Markdown,
    };
    fs::write(&args.out_table, render_table(&summaries, format))
        .with_context(|| format!("writing {}", args.out_table.display()))?;

    let reference = match args.reference {
        Some(name) => name,
        None => {
            let clean: Vec<_> = summaries
                .iter()
                .filter(|s| s.training_label == "clean")
                .collect();
            match clean.as_slice() {
                [one] => one.display_name(),
                [] => bail!("no run trained on clean; pass --reference"),
                _ => bail!("several runs trained on clean; pass --reference"),
            }
        }
    };
    let mut spec = McvPlotSpec::from_summaries(&summaries, &reference)?;
    spec.title = args.title;
    let svg = render_mcv_svg(&spec)?;
    fs::write(&args.out_plot, svg).with_context(|| format!("writing {}", args.out_plot.display()))?;
    Ok(())
}

fn correlate(args: CorrelateArgs) -> CmdResult {
    let summaries = read_summaries(&args.summaries)?;
    if summaries.len() < 2 {
        bail!("correlation needs at least 2 summaries, got {}", summaries.len());
    }
    let rows = correlation_table(&summaries).context("computing correlations")?;
    println!("pairing\tspearman\tpearson");
    for row in rows {
        println!("{}\t{:.4}\t{:.4}", row.pairing, row.spearman, row.pearson);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Validate(a) => validate(a),
        Command::Analyze(a) => analyze(a),
        Command::Report(a) => report(a),
        Command::Correlate(a) => correlate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match e.downcast_ref::<ValidationFailed>() {
            Some(failed) => {
                for problem in &failed.0 {
                    eprintln!("{problem}");
                }
                eprintln!("{failed}");
                ExitCode::from(3)
            }
            None => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn negative_rotation_levels_parse() {
        let cli = Cli::try_parse_from([
            "mcvbench", "generate", "--corpus", "a", "--out", "b", "--seed", "1",
            "--ro-levels", "-45,0,45",
        ])
        .unwrap();
        let Command::Generate(args) = cli.command else { panic!() };
        assert_eq!(args.ro_levels, vec![-45.0, 0.0, 45.0]);
        assert_eq!(args.sp_levels, vec![0.0, 0.1, 0.15, 0.2]);
    }
}
