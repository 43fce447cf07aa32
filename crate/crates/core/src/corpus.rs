//! On-disk benchmark corpora and their manifests.
//!
//! Layout of a generated corpus:
//!
//! ```text
//! out_dir/
//!   manifest.json
//!   clean#1/<source>.png
//!   SP0.1#2/<source>.png
//!   ...
//! ```
//!
//! The bytes of every output file are a pure function of the source bytes,
//! the grid and the master seed, whatever the worker count.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder, ImageFormat};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::grid::{enumerate_conditions, Condition, GridConfig, GridError};
use crate::image::Image;
use crate::perturb::{apply_sequence, PerturbError};
use crate::rng::derive_stream;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: cannot decode image: {message}", path.display())]
    Decode { path: PathBuf, message: String },
    #[error("{}: image is {}x{}, expected {}x{} like the other sources", path.display(), actual.0, actual.1, expected.0, expected.1)]
    SizeMismatch {
        path: PathBuf,
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("{}: no PNG images found", .0.display())]
    NoImages(PathBuf),
    #[error("{}: file name is not valid UTF-8", .0.display())]
    BadFileName(PathBuf),
    #[error("{}: malformed manifest: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("unsupported manifest schema_version {0} (expected {SCHEMA_VERSION})")]
    UnsupportedSchema(u64),
    #[error("PNG encoding failed: {0}")]
    Encode(String),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusInfo {
    pub image_count: usize,
    pub width: u32,
    pub height: u32,
    /// Content hashes of the source files, in index order.
    pub sources: Vec<FileDigest>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    #[serde(flatten)]
    pub condition: Condition,
    pub directory: String,
    pub files: Vec<FileDigest>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkManifest {
    pub schema_version: u32,
    pub master_seed: u64,
    pub grid_config: GridConfig,
    pub corpus: CorpusInfo,
    pub conditions: Vec<ConditionEntry>,
    /// SHA-256 over the manifest serialized with this field empty.
    pub digest: String,
}

impl BenchmarkManifest {
    pub fn compute_digest(&self) -> String {
        let mut unsealed = self.clone();
        unsealed.digest.clear();
        let bytes = serde_json::to_vec(&unsealed).expect("manifest serializes");
        sha256_hex(&bytes)
    }

    pub fn seal(&mut self) {
        self.digest = self.compute_digest();
    }

    pub fn condition_list(&self) -> Vec<Condition> {
        self.conditions.iter().map(|e| e.condition.clone()).collect()
    }

    pub fn file_count(&self) -> usize {
        self.conditions.iter().map(|e| e.files.len()).sum()
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }

    pub fn write(&self, path: &Path) -> Result<(), CorpusError> {
        fs::write(path, self.to_json()).map_err(io_err(path))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Lossless PNG encoding of an RGB image.
pub fn encode_png(img: &Image) -> Result<Vec<u8>, CorpusError> {
    let mut buf = Vec::new();
    PngEncoder::new(&mut buf)
        .write_image(img.data(), img.width(), img.height(), ExtendedColorType::Rgb8)
        .map_err(|e| CorpusError::Encode(e.to_string()))?;
    Ok(buf)
}

pub fn decode_png(bytes: &[u8], path: &Path) -> Result<Image, CorpusError> {
    image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map(|img| Image::from(img.to_rgb8()))
        .map_err(|e| CorpusError::Decode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

#[derive(Clone, Debug)]
pub struct SourceImage {
    pub name: String,
    pub sha256: String,
    pub image: Image,
}

/// Reads every `*.png` in `dir`, sorted by file name. All images must share
/// one size.
pub fn load_sources(dir: &Path) -> Result<Vec<SourceImage>, CorpusError> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            paths.push(path);
        }
    }
    if paths.is_empty() {
        return Err(CorpusError::NoImages(dir.to_path_buf()));
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));

    let mut sources: Vec<SourceImage> = Vec::with_capacity(paths.len());
    for path in paths {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| CorpusError::BadFileName(path.clone()))?
            .to_string();
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let image = decode_png(&bytes, &path)?;
        if let Some(first) = sources.first() {
            let expected = (first.image.width(), first.image.height());
            let actual = (image.width(), image.height());
            if expected != actual {
                return Err(CorpusError::SizeMismatch {
                    path,
                    expected,
                    actual,
                });
            }
        }
        sources.push(SourceImage {
            name,
            sha256: sha256_hex(&bytes),
            image,
        });
    }
    Ok(sources)
}

/// PNG bytes of source image `index` under `condition`.
pub fn render_condition_image(
    source: &Image,
    condition: &Condition,
    master_seed: u64,
    index: usize,
) -> Result<Vec<u8>, CorpusError> {
    let mut stream = derive_stream(master_seed, u64::from(condition.ordinal), index as u64);
    let out = apply_sequence(source, &condition.specs, &mut stream)?;
    encode_png(&out)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, CorpusError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CorpusError::Pool(e.to_string()))
}

/// Renders every `(condition, image)` pair with `workers` threads and hands
/// each encoded file to `sink`. Returns the per-condition file digests in
/// manifest order.
fn render_all<F>(
    sources: &[SourceImage],
    conditions: &[Condition],
    master_seed: u64,
    workers: usize,
    sink: F,
) -> Result<Vec<Vec<FileDigest>>, CorpusError>
where
    F: Fn(&Condition, &SourceImage, &[u8]) -> Result<(), CorpusError> + Sync,
{
    let jobs: Vec<(usize, usize)> = (0..conditions.len())
        .flat_map(|c| (0..sources.len()).map(move |i| (c, i)))
        .collect();
    let digests: Vec<String> = pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|&(c, i)| {
                let bytes =
                    render_condition_image(&sources[i].image, &conditions[c], master_seed, i)?;
                sink(&conditions[c], &sources[i], &bytes)?;
                Ok(sha256_hex(&bytes))
            })
            .collect::<Result<_, CorpusError>>()
    })?;

    Ok(digests
        .chunks(sources.len())
        .map(|chunk| {
            chunk
                .iter()
                .zip(sources)
                .map(|(sha, src)| FileDigest {
                    name: src.name.clone(),
                    sha256: sha.clone(),
                })
                .collect()
        })
        .collect())
}

/// Applies every condition of `config` to every PNG in `source_dir`, writes
/// the perturbed sets under `out_dir` and `out_dir/manifest.json`.
pub fn generate_corpus(
    source_dir: &Path,
    out_dir: &Path,
    config: &GridConfig,
    master_seed: u64,
    workers: usize,
) -> Result<BenchmarkManifest, CorpusError> {
    let conditions = enumerate_conditions(config)?;
    let sources = load_sources(source_dir)?;

    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    for condition in &conditions {
        let dir = out_dir.join(condition.directory());
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }

    let files = render_all(&sources, &conditions, master_seed, workers, |c, src, bytes| {
        let path = out_dir.join(c.directory()).join(&src.name);
        fs::write(&path, bytes).map_err(io_err(&path))
    })?;

    let first = &sources[0].image;
    let mut manifest = BenchmarkManifest {
        schema_version: SCHEMA_VERSION,
        master_seed,
        grid_config: config.clone(),
        corpus: CorpusInfo {
            image_count: sources.len(),
            width: first.width(),
            height: first.height(),
            sources: sources
                .iter()
                .map(|s| FileDigest {
                    name: s.name.clone(),
                    sha256: s.sha256.clone(),
                })
                .collect(),
        },
        conditions: conditions
            .into_iter()
            .zip(files)
            .map(|(condition, files)| ConditionEntry {
                directory: condition.directory(),
                condition,
                files,
            })
            .collect(),
        digest: String::new(),
    };
    manifest.seal();
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<BenchmarkManifest, CorpusError> {
    let json_err = |source| CorpusError::Json {
        path: path.to_path_buf(),
        source,
    };
    let value: serde_json::Value = serde_json::from_str(text).map_err(json_err)?;
    let version = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| {
            json_err(serde::de::Error::custom(
                "missing or non-integer schema_version",
            ))
        })?;
    if version != u64::from(SCHEMA_VERSION) {
        return Err(CorpusError::UnsupportedSchema(version));
    }
    serde_json::from_value(value).map_err(json_err)
}

pub fn load_manifest(path: &Path) -> Result<BenchmarkManifest, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_manifest(&text, path)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    DigestMismatch { recorded: String, computed: String },
    ConditionsMismatch(String),
    MissingFile(PathBuf),
    HashMismatch { path: PathBuf, recorded: String, actual: String },
    SourceMismatch(String),
    RegenerationMismatch(PathBuf),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DigestMismatch { recorded, computed } => write!(
                f,
                "manifest digest mismatch: recorded {recorded}, contents hash to {computed}"
            ),
            Violation::ConditionsMismatch(detail) => {
                write!(f, "condition list does not match grid_config: {detail}")
            }
            Violation::MissingFile(path) => write!(f, "missing file {}", path.display()),
            Violation::HashMismatch {
                path,
                recorded,
                actual,
            } => write!(
                f,
                "content hash mismatch for {}: recorded {recorded}, found {actual}",
                path.display()
            ),
            Violation::SourceMismatch(detail) => write!(f, "source corpus differs: {detail}"),
            Violation::RegenerationMismatch(path) => {
                write!(f, "regenerated bytes differ for {}", path.display())
            }
        }
    }
}

fn check_conditions(manifest: &BenchmarkManifest) -> Option<String> {
    let expected = match enumerate_conditions(&manifest.grid_config) {
        Ok(c) => c,
        Err(e) => return Some(e.to_string()),
    };
    if expected.len() != manifest.conditions.len() {
        return Some(format!(
            "expected {} conditions, manifest lists {}",
            expected.len(),
            manifest.conditions.len()
        ));
    }
    for (want, got) in expected.iter().zip(&manifest.conditions) {
        if *want != got.condition || got.directory != want.directory() {
            return Some(format!("condition #{} differs", want.ordinal));
        }
        if got.files.len() != manifest.corpus.image_count {
            return Some(format!(
                "condition #{} lists {} files, corpus has {} images",
                want.ordinal,
                got.files.len(),
                manifest.corpus.image_count
            ));
        }
    }
    None
}

/// Checks the manifest's own digest, its condition list, and re-hashes every
/// referenced file under `root`. An empty result means the corpus is intact.
pub fn validate_manifest(manifest: &BenchmarkManifest, root: &Path) -> Vec<Violation> {
    let mut violations = Vec::new();
    let computed = manifest.compute_digest();
    if computed != manifest.digest {
        violations.push(Violation::DigestMismatch {
            recorded: manifest.digest.clone(),
            computed,
        });
    }
    if let Some(detail) = check_conditions(manifest) {
        violations.push(Violation::ConditionsMismatch(detail));
    }
    for entry in &manifest.conditions {
        for file in &entry.files {
            let rel = Path::new(&entry.directory).join(&file.name);
            match fs::read(root.join(&rel)) {
                Err(_) => violations.push(Violation::MissingFile(rel)),
                Ok(bytes) => {
                    let actual = sha256_hex(&bytes);
                    if actual != file.sha256 {
                        violations.push(Violation::HashMismatch {
                            path: rel,
                            recorded: file.sha256.clone(),
                            actual,
                        });
                    }
                }
            }
        }
    }
    violations
}

/// Regenerates every file in memory from `source_dir` and compares against
/// the recorded hashes.
pub fn verify_regeneration(
    manifest: &BenchmarkManifest,
    source_dir: &Path,
    workers: usize,
) -> Result<Vec<Violation>, CorpusError> {
    let sources = load_sources(source_dir)?;
    let recorded: Vec<_> = manifest.corpus.sources.iter().collect();
    let found: Vec<_> = sources
        .iter()
        .map(|s| FileDigest {
            name: s.name.clone(),
            sha256: s.sha256.clone(),
        })
        .collect();
    if recorded.len() != found.len() || recorded.iter().zip(&found).any(|(a, b)| *a != b) {
        return Ok(vec![Violation::SourceMismatch(format!(
            "{} has {} images that do not match the {} recorded sources",
            source_dir.display(),
            found.len(),
            recorded.len()
        ))]);
    }

    let conditions = manifest.condition_list();
    let files = render_all(&sources, &conditions, manifest.master_seed, workers, |_, _, _| {
        Ok(())
    })?;
    let mut violations = Vec::new();
    for (entry, regenerated) in manifest.conditions.iter().zip(files) {
        for (want, got) in entry.files.iter().zip(regenerated) {
            if want.sha256 != got.sha256 {
                violations.push(Violation::RegenerationMismatch(
                    Path::new(&entry.directory).join(&want.name),
                ));
            }
        }
    }
    Ok(violations)
}

/// Source-file hashes shared by two corpora (e.g. a training and a testing
/// corpus, which should be disjoint).
pub fn source_overlap(a: &BenchmarkManifest, b: &BenchmarkManifest) -> Vec<String> {
    let theirs: HashSet<&str> = b.corpus.sources.iter().map(|s| s.sha256.as_str()).collect();
    let mut shared: Vec<String> = a
        .corpus
        .sources
        .iter()
        .filter(|s| theirs.contains(s.sha256.as_str()))
        .map(|s| s.sha256.clone())
        .collect();
    shared.sort();
    shared.dedup();
    shared
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_sources(dir: &Path, count: usize, size: u32) {
        for i in 0..count {
            let data = (0..size * size * 3)
                .map(|j| ((j as usize * 7 + i * 31) % 256) as u8)
                .collect();
            let img = Image::new(size, size, data).unwrap();
            fs::write(dir.join(format!("img{i:03}.png")), encode_png(&img).unwrap()).unwrap();
        }
    }

    fn small_config() -> GridConfig {
        GridConfig {
            sp_levels: vec![0.0, 0.1],
            ga_levels: vec![0.0, 0.1],
            ro_levels: vec![0.0, 30.0],
        }
    }

    #[test]
    fn png_round_trip_is_lossless() {
        let img = Image::new(3, 2, (0..18).map(|v| v * 14).collect()).unwrap();
        let bytes = encode_png(&img).unwrap();
        assert_eq!(decode_png(&bytes, Path::new("x.png")).unwrap(), img);
    }

    #[test]
    fn generates_expected_layout() {
        let src = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        write_sources(src.path(), 3, 8);
        let config = small_config();
        let manifest = generate_corpus(src.path(), out.path(), &config, 5, 2).unwrap();

        assert_eq!(manifest.conditions.len(), config.condition_count());
        assert_eq!(manifest.file_count(), 3 * config.condition_count());
        assert!(out.path().join("clean#1").join("img000.png").is_file());
        assert!(validate_manifest(&manifest, out.path()).is_empty());

        let reloaded = load_manifest(&out.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(reloaded, manifest);
    }

    #[test]
    fn clean_condition_reencodes_sources() {
        let src = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        write_sources(src.path(), 2, 6);
        generate_corpus(src.path(), out.path(), &small_config(), 1, 1).unwrap();
        for name in ["img000.png", "img001.png"] {
            let a = fs::read(src.path().join(name)).unwrap();
            let b = fs::read(out.path().join("clean#1").join(name)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn mixed_sizes_name_the_offending_file() {
        let src = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        write_sources(src.path(), 1, 8);
        let odd = Image::filled(9, 8, 10).unwrap();
        fs::write(src.path().join("zz.png"), encode_png(&odd).unwrap()).unwrap();
        let err = generate_corpus(src.path(), out.path(), &small_config(), 1, 1).unwrap_err();
        assert!(matches!(err, CorpusError::SizeMismatch { .. }));
        assert!(err.to_string().contains("zz.png"));
    }

    #[test]
    fn undecodable_and_empty_inputs() {
        let src = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        assert!(matches!(
            generate_corpus(src.path(), out.path(), &small_config(), 1, 1),
            Err(CorpusError::NoImages(_))
        ));
        fs::write(src.path().join("bad.png"), b"not a png").unwrap();
        let err = generate_corpus(src.path(), out.path(), &small_config(), 1, 1).unwrap_err();
        assert!(matches!(err, CorpusError::Decode { .. }));
        assert!(err.to_string().contains("bad.png"));
    }

    #[test]
    fn schema_checks() {
        let p = Path::new("m.json");
        assert!(matches!(
            parse_manifest("{not json", p),
            Err(CorpusError::Json { .. })
        ));
        assert!(matches!(
            parse_manifest(r#"{"schema_version": 7}"#, p),
            Err(CorpusError::UnsupportedSchema(7))
        ));
        assert!(matches!(
            parse_manifest(r#"{"schema_version": 1}"#, p),
            Err(CorpusError::Json { .. })
        ));
    }

    #[test]
    fn deleted_file_is_the_only_violation() {
        let src = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        write_sources(src.path(), 2, 6);
        let manifest = generate_corpus(src.path(), out.path(), &small_config(), 1, 1).unwrap();
        let victim = Path::new(&manifest.conditions[2].directory).join("img001.png");
        fs::remove_file(out.path().join(&victim)).unwrap();
        let violations = validate_manifest(&manifest, out.path());
        assert_eq!(violations, vec![Violation::MissingFile(victim.clone())]);
        assert!(violations[0].to_string().contains("img001.png"));
    }

    #[test]
    fn overlap_detects_shared_sources() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_sources(a.path(), 3, 4);
        write_sources(b.path(), 1, 4);
        let out_a = tempfile::tempdir().unwrap();
        let out_b = tempfile::tempdir().unwrap();
        let ma = generate_corpus(a.path(), out_a.path(), &small_config(), 1, 1).unwrap();
        let mb = generate_corpus(b.path(), out_b.path(), &small_config(), 1, 1).unwrap();
        assert_eq!(source_overlap(&ma, &mb), vec![mb.corpus.sources[0].sha256.clone()]);
    }
}
