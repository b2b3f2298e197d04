//! Command-line front end. Every subcommand is a thin shell over the library.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O or format, 3 domain.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::default_shape_metrics;
use crate::grid::{BinaryMask, ProbabilityMap, RealGrid};
use crate::io::json::{render, to_value, KeyOrder};
use crate::io::{manifest, pmap, png as pngio, write_atomic};
use crate::metrics;
use crate::ontology::Ontology;
use crate::recognition::{recognize, TargetMaps, DEFAULT_LAMBDA};
use crate::shapemap::{default_shift_searches, ensemble_shapes_with, ensemble_volume};
use crate::split::{split_grouped, DEFAULT_RATIO, DEFAULT_SEED};
use crate::validity::{
    fit_validity_model, test_image, GrayscalePolicy, TrainingImage, ValidityModel, ValidityOptions, DEFAULT_CUTOFF,
    DEFAULT_THRESHOLD,
};

pub const THREADS_ENV: &str = "BIOPARSE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "bioparse",
    version,
    about = "Shape metrics, prompt validity, recognition and evaluation for biomedical segmentation maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Grayscale {
    Replicate,
    Skip,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Box ratio, convex ratio and IRI of a mask PNG.
    Irregularity {
        #[arg(long)]
        mask: PathBuf,
        /// Comma-separated subset of metrics (default: all).
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<String>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Fit or apply per-object-type validity models.
    #[command(subcommand)]
    Validity(ValidityCommand),
    /// Two-stage multi-target recognition over per-target maps.
    Recognize {
        /// Directory of one .pmap per candidate target.
        #[arg(long)]
        pmaps: PathBuf,
        /// JSON object mapping each pmap stem to a target id.
        #[arg(long = "legend-in")]
        legend_in: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        legend: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Align and average maps into one shape map.
    Shapemap {
        #[arg(long)]
        pmaps: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        png: Option<PathBuf>,
        /// Manifest whose group_id pools slices (matched by image stem) into volumes.
        #[arg(long = "volume-groups")]
        volume_groups: Option<PathBuf>,
        /// Shift search strategy.
        #[arg(long, default_value = "exhaustive")]
        align: String,
    },
    /// Evaluation metrics.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Volume-grouped train/test split of a manifest.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RATIO)]
        ratio: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Resolve a text prompt against the ontology.
    Resolve {
        /// Ontology JSON (default: the bundled reference ontology).
        #[arg(long)]
        ontology: Option<PathBuf>,
        #[arg(long)]
        prompt: String,
    },
}

#[derive(Debug, Subcommand)]
enum ValidityCommand {
    Fit(FitArgs),
    Test(TestArgs),
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    pmaps: PathBuf,
    #[arg(long)]
    images: PathBuf,
    #[arg(long = "object-type")]
    object_type: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    pmap: PathBuf,
    #[arg(long)]
    image: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CUTOFF)]
    cutoff: f64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, value_enum, default_value = "replicate")]
    grayscale: Grayscale,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Per-instance Dice over mask PNGs paired by stem.
    Dice {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        weighted: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Object-type identification precision, recall and F1.
    Identify {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
    },
    /// AUROC from a `score,label` CSV.
    Auroc {
        #[arg(long)]
        scores: PathBuf,
    },
    /// Wilcoxon signed-rank test from a `first,second` CSV.
    Wilcoxon {
        #[arg(long)]
        pairs: PathBuf,
    },
    /// Silhouette score from a `label,x1,x2,...` CSV.
    Silhouette {
        #[arg(long)]
        points: PathBuf,
    },
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run(args: Vec<OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = thread_pool().and_then(|pool| pool.install(|| dispatch(cli.command)));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("bioparse: {e}");
            e.kind().exit_code()
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(text) => text
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Usage(format!("{THREADS_ENV}={text:?} is not a thread count")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("{THREADS_ENV}: {e}")))
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Irregularity { mask, metrics, format } => irregularity(&mask, &metrics, format),
        Command::Validity(ValidityCommand::Fit(args)) => validity_fit(&args),
        Command::Validity(ValidityCommand::Test(args)) => validity_test(&args),
        Command::Recognize {
            pmaps,
            legend_in,
            lambda,
            out,
            legend,
            report,
        } => recognize_cmd(&pmaps, &legend_in, lambda, &out, &legend, report.as_deref()),
        Command::Shapemap {
            pmaps,
            out,
            png,
            volume_groups,
            align,
        } => shapemap(&pmaps, &out, png.as_deref(), volume_groups.as_deref(), &align),
        Command::Eval(cmd) => eval(cmd),
        Command::Split {
            manifest,
            ratio,
            seed,
            out,
        } => split(&manifest, ratio, seed, &out),
        Command::Resolve { ontology, prompt } => resolve(ontology.as_deref(), &prompt),
    }
}

fn emit(value: &Value) -> Result<()> {
    print_text(&render(value, KeyOrder::Sorted))
}

fn print_text(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|()| out.flush())
        .map_err(|e| Error::io("<stdout>", e))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    write_atomic(path, render(value, KeyOrder::Sorted).as_bytes())
}

fn check_flag(ok: bool, flag: &str, value: f64, range: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Usage(format!("--{flag} {value} must be in {range}")))
    }
}

fn check_unit(flag: &str, value: f64) -> Result<()> {
    check_flag((0.0..=1.0).contains(&value), flag, value, "[0, 1]")
}

/// Files in `dir` with extension `ext`, keyed by stem.
fn files_by_stem(dir: &Path, ext: &str) -> Result<BTreeMap<String, PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let matches = path
            .extension()
            .is_some_and(|x| x.to_string_lossy().eq_ignore_ascii_case(ext));
        if !matches || !path.is_file() {
            continue;
        }
        if let Some(stem) = path.file_stem() {
            out.insert(stem.to_string_lossy().into_owned(), path);
        }
    }
    if out.is_empty() {
        return Err(Error::Usage(format!("{}: no .{ext} files", dir.display())));
    }
    Ok(out)
}

/// Pairs two directory listings by stem; any unpaired file is a usage error.
fn pair_by_stem(a: BTreeMap<String, PathBuf>, b: BTreeMap<String, PathBuf>) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    if let Some((_, path)) = a.iter().find(|(stem, _)| !b.contains_key(*stem)) {
        return Err(Error::Usage(format!(
            "{}: no counterpart with the same stem",
            path.display()
        )));
    }
    if let Some((_, path)) = b.iter().find(|(stem, _)| !a.contains_key(*stem)) {
        return Err(Error::Usage(format!(
            "{}: no counterpart with the same stem",
            path.display()
        )));
    }
    Ok(a.into_iter()
        .zip(b)
        .map(|((stem, pa), (_, pb))| (stem, pa, pb))
        .collect())
}

fn stem_of(path: &str) -> String {
    Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn irregularity(mask_path: &Path, names: &[String], format: Format) -> Result<()> {
    let registry = default_shape_metrics();
    let selected: Vec<&str> = if names.is_empty() {
        registry.names()
    } else {
        names.iter().map(String::as_str).collect()
    };
    let metrics = selected.iter().map(|n| registry.get(n)).collect::<Result<Vec<_>>>()?;
    let mask = pngio::read_mask(mask_path)?;
    let mut row = BTreeMap::new();
    for metric in metrics {
        row.insert(metric.name(), metric.compute(&mask)?);
    }
    match format {
        Format::Json => emit(&to_value(&row)?),
        Format::Csv => {
            let header: Vec<&str> = row.keys().copied().collect();
            let values: Vec<String> = row.values().map(|&v| crate::io::json::format_real(v)).collect();
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&header)
                .and_then(|()| w.write_record(&values))
                .map_err(csv_error("<stdout>"))?;
            print_text(&String::from_utf8_lossy(
                &w.into_inner().map_err(|e| Error::format("csv", e.to_string()))?,
            ))
        }
    }
}

fn csv_error(context: &str) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::format(context, e.to_string())
}

fn resolve_relative(base: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn validity_fit(args: &FitArgs) -> Result<()> {
    let entries = manifest::read_manifest(&args.manifest)?;
    let wanted = crate::ontology::normalize(&args.object_type);
    let base = args.manifest.parent().unwrap_or(Path::new("."));
    let selected: Vec<&manifest::ManifestEntry> = entries
        .iter()
        .filter(|e| crate::ontology::normalize(&e.object_type) == wanted)
        .collect();
    if selected.is_empty() {
        return Err(Error::domain(format!(
            "{}: no entries for object type {:?}",
            args.manifest.display(),
            args.object_type
        )));
    }
    let mut loaded = Vec::with_capacity(selected.len());
    for entry in selected {
        let file_name = Path::new(&entry.image_path).file_name().ok_or_else(|| {
            Error::format(
                args.manifest.display().to_string(),
                format!("bad image_path {:?}", entry.image_path),
            )
        })?;
        let image = pngio::read_image(&args.images.join(file_name))?;
        let map = pmap::read_pmap(&args.pmaps.join(format!("{}.pmap", stem_of(&entry.image_path))))?;
        let gold = pngio::read_mask(&resolve_relative(base, &entry.mask_path))?;
        loaded.push((map, image, gold));
    }
    let training: Vec<TrainingImage<'_>> = loaded
        .iter()
        .map(|(map, image, gold)| TrainingImage { map, image, gold })
        .collect();
    let model = fit_validity_model(&training, &wanted)?;
    let text = model.to_json()?;
    write_atomic(&args.out, text.as_bytes())?;
    print_text(&text)
}

fn validity_test(args: &TestArgs) -> Result<()> {
    check_unit("cutoff", args.cutoff)?;
    check_unit("threshold", args.threshold)?;
    let model = ValidityModel::load(&args.model)?;
    let map = pmap::read_pmap(&args.pmap)?;
    let image = pngio::read_image(&args.image)?;
    let options = ValidityOptions {
        cutoff: args.cutoff,
        grayscale: match args.grayscale {
            Grayscale::Replicate => GrayscalePolicy::Replicate,
            Grayscale::Skip => GrayscalePolicy::SkipChannels,
        },
    };
    let report = test_image(&model, &map, &image, args.threshold, &options)?;
    emit(&to_value(&report)?)
}

fn read_json_file<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

fn recognize_cmd(
    dir: &Path,
    legend_in: &Path,
    lambda: f64,
    out: &Path,
    legend_out: &Path,
    report: Option<&Path>,
) -> Result<()> {
    check_flag(lambda.is_finite() && lambda >= 0.0, "lambda", lambda, "[0, inf)")?;
    let files = files_by_stem(dir, "pmap")?;
    let ids: BTreeMap<String, String> = read_json_file(legend_in)?;
    if let Some(stem) = ids.keys().find(|s| !files.contains_key(*s)) {
        return Err(Error::Usage(format!(
            "{}: target {stem:?} has no pmap in {}",
            legend_in.display(),
            dir.display()
        )));
    }
    if let Some((_, path)) = files.iter().find(|(s, _)| !ids.contains_key(*s)) {
        return Err(Error::Usage(format!(
            "{}: stem missing from {}",
            path.display(),
            legend_in.display()
        )));
    }
    if files.len() > pngio::MAX_LABELS {
        return Err(Error::Usage(format!(
            "{} targets exceed the label PNG limit of {}",
            files.len(),
            pngio::MAX_LABELS
        )));
    }
    let mut targets = Vec::with_capacity(files.len());
    let mut maps = Vec::with_capacity(files.len());
    for (stem, path) in &files {
        targets.push(ids[stem].clone());
        maps.push(pmap::read_pmap(path)?);
    }
    let inputs = TargetMaps::new(targets, maps)?;
    let result = recognize(&inputs, lambda)?;

    let mut legend = Map::new();
    legend.insert("0".into(), Value::Null);
    for (i, id) in result.targets.iter().enumerate() {
        legend.insert((i + 1).to_string(), Value::from(id.as_str()));
    }
    let summary = json!({
        "targets": result.targets,
        "selected": result.selected_ids(),
        "original_areas": result.selection.original_areas,
        "final_areas": result.selection.final_areas,
        "lambda": lambda,
    });
    pngio::write_labels(out, &result.labels, result.targets.len())?;
    write_json(legend_out, &Value::Object(legend))?;
    if let Some(path) = report {
        write_json(path, &summary)?;
    }
    emit(&summary)
}

fn shapemap(dir: &Path, out: &Path, png: Option<&Path>, groups: Option<&Path>, align: &str) -> Result<()> {
    let searches = default_shift_searches();
    let search = searches.get(align)?;
    let files = files_by_stem(dir, "pmap")?;

    // (label, slices) in fold order
    let mut units: Vec<(String, Vec<String>)> = match groups {
        None => files.keys().map(|s| (s.clone(), vec![s.clone()])).collect(),
        Some(path) => {
            let entries = manifest::read_manifest(path)?;
            let mut by_group: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
            let mut grouped = BTreeSet::new();
            for e in &entries {
                let stem = stem_of(&e.image_path);
                if files.contains_key(&stem) {
                    by_group.entry(e.group_id.clone()).or_default().insert(stem.clone());
                    grouped.insert(stem);
                }
            }
            if let Some((_, path)) = files.iter().find(|(s, _)| !grouped.contains(*s)) {
                return Err(Error::Usage(format!(
                    "{}: no manifest entry in its volume grouping",
                    path.display()
                )));
            }
            by_group
                .into_iter()
                .map(|(g, s)| (g, s.into_iter().collect()))
                .collect()
        }
    };
    units.retain(|(_, slices)| !slices.is_empty());

    let mut volumes = Vec::with_capacity(units.len());
    for (_, slices) in &units {
        let grids = slices
            .iter()
            .map(|s| pmap::read_pmap(&files[s]).map(|m| RealGrid::from(&m)))
            .collect::<Result<Vec<_>>>()?;
        volumes.push(if grids.len() == 1 {
            grids.into_iter().next().expect("one grid")
        } else {
            ensemble_volume(&grids)?
        });
    }
    let acc = ensemble_shapes_with(&volumes, search)?;
    let shape = acc.finish();
    let map: ProbabilityMap = shape.to_probability_map()?;
    pmap::write_pmap(out, &map)?;
    if let Some(path) = png {
        write_atomic(path, &pngio::encode_rendering(&shape)?)?;
    }
    let order: Vec<Value> = units
        .iter()
        .zip(acc.shifts())
        .map(|((label, slices), shift)| json!({ "unit": label, "slices": slices, "shift": [shift.d_row, shift.d_col] }))
        .collect();
    emit(&json!({ "align": search.name(), "count": acc.count(), "order": order }))
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let context = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::format(&context, format!("{other:?}")),
        })?;
    let header = reader
        .headers()
        .map_err(csv_error(&context))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = reader
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(csv_error(&context))?;
    Ok((header, rows))
}

fn parse_real(field: &str, path: &Path, line: usize) -> Result<f64> {
    field.parse::<f64>().map_err(|_| {
        Error::format(
            format!("{}:{line}", path.display()),
            format!("{field:?} is not a number"),
        )
    })
}

fn parse_label(field: &str, path: &Path, line: usize) -> Result<bool> {
    match field.to_ascii_lowercase().as_str() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        _ => Err(Error::format(
            format!("{}:{line}", path.display()),
            format!("label {field:?} is not 0/1"),
        )),
    }
}

fn line_of(row: &csv::StringRecord, fallback: usize) -> usize {
    row.position().map_or(fallback, |p| p.line() as usize)
}

fn eval(cmd: EvalCommand) -> Result<()> {
    match cmd {
        EvalCommand::Dice {
            pred,
            gold,
            weighted,
            format,
        } => {
            let pairs = pair_by_stem(files_by_stem(&pred, "png")?, files_by_stem(&gold, "png")?)?;
            let masks: Vec<(String, BinaryMask, BinaryMask)> = pairs
                .into_iter()
                .map(|(stem, p, g)| Ok((stem, pngio::read_mask(&p)?, pngio::read_mask(&g)?)))
                .collect::<Result<_>>()?;
            let scores: Vec<f64> = masks
                .iter()
                .map(|(_, p, g)| metrics::dice(p, g))
                .collect::<Result<_>>()?;
            if format == Format::Csv {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["instance", "dice"]).map_err(csv_error("<stdout>"))?;
                for ((stem, _, _), d) in masks.iter().zip(&scores) {
                    w.write_record([stem.as_str(), &crate::io::json::format_real(*d)])
                        .map_err(csv_error("<stdout>"))?;
                }
                let bytes = w.into_inner().map_err(|e| Error::format("csv", e.to_string()))?;
                return print_text(&String::from_utf8_lossy(&bytes));
            }
            let rows: Vec<Value> = masks
                .iter()
                .zip(&scores)
                .map(|((stem, _, _), d)| json!({ "instance": stem, "dice": d }))
                .collect();
            let mut out = json!({ "rows": rows, "summary": to_value(&metrics::summarize(&scores)?)? });
            if weighted {
                let w = metrics::weighted_dice(masks.iter().map(|(_, p, g)| (p, g)))?;
                out["weighted_dice"] = Value::from(w);
            }
            emit(&out)
        }
        EvalCommand::Identify { pred, gold } => identify(&pred, &gold),
        EvalCommand::Auroc { scores } => {
            let (_, rows) = read_csv(&scores)?;
            let mut values = Vec::with_capacity(rows.len());
            let mut labels = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                let line = line_of(row, i + 2);
                if row.len() != 2 {
                    return Err(Error::format(
                        format!("{}:{line}", scores.display()),
                        "expected score,label",
                    ));
                }
                values.push(parse_real(&row[0], &scores, line)?);
                labels.push(parse_label(&row[1], &scores, line)?);
            }
            let auc = metrics::auroc(&values, &labels)?;
            let positives = labels.iter().filter(|&&l| l).count();
            emit(
                &json!({ "auroc": auc, "n": values.len(), "positives": positives, "negatives": values.len() - positives }),
            )
        }
        EvalCommand::Wilcoxon { pairs } => {
            let (_, rows) = read_csv(&pairs)?;
            let mut first = Vec::with_capacity(rows.len());
            let mut second = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                let line = line_of(row, i + 2);
                if row.len() != 2 {
                    return Err(Error::format(
                        format!("{}:{line}", pairs.display()),
                        "expected first,second",
                    ));
                }
                first.push(parse_real(&row[0], &pairs, line)?);
                second.push(parse_real(&row[1], &pairs, line)?);
            }
            let test = metrics::wilcoxon_signed_rank(&metrics::PairedSamples::new(first, second)?)?;
            emit(&to_value(&test)?)
        }
        EvalCommand::Silhouette { points } => {
            let (_, rows) = read_csv(&points)?;
            let mut labels = Vec::with_capacity(rows.len());
            let mut coords = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                let line = line_of(row, i + 2);
                if row.len() < 2 {
                    return Err(Error::format(
                        format!("{}:{line}", points.display()),
                        "expected label,x1[,x2...]",
                    ));
                }
                labels.push(row[0].to_string());
                coords.push(
                    row.iter()
                        .skip(1)
                        .map(|f| parse_real(f, &points, line))
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            let score = metrics::silhouette(&coords, &labels)?;
            emit(&json!({ "silhouette": score, "n": coords.len() }))
        }
    }
}

#[derive(Debug, Deserialize)]
struct IdentifyRow {
    image: String,
    object_types: Vec<String>,
}

fn read_identify(path: &Path) -> Result<BTreeMap<String, BTreeSet<String>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = format!("{}:{}", path.display(), i + 1);
        let row: IdentifyRow = serde_json::from_str(line).map_err(|e| Error::format(&at, e.to_string()))?;
        let types = row.object_types.iter().map(|t| crate::ontology::normalize(t)).collect();
        if out.insert(row.image.clone(), types).is_some() {
            return Err(Error::format(at, format!("duplicate image {:?}", row.image)));
        }
    }
    Ok(out)
}

fn identify(pred: &Path, gold: &Path) -> Result<()> {
    let p = read_identify(pred)?;
    let g = read_identify(gold)?;
    if let Some(image) = p.keys().find(|k| !g.contains_key(*k)) {
        return Err(Error::Usage(format!(
            "{}: image {image:?} missing from {}",
            pred.display(),
            gold.display()
        )));
    }
    if let Some(image) = g.keys().find(|k| !p.contains_key(*k)) {
        return Err(Error::Usage(format!(
            "{}: image {image:?} missing from {}",
            gold.display(),
            pred.display()
        )));
    }
    let images: Vec<&String> = g.keys().collect();
    let predicted: Vec<BTreeSet<String>> = images.iter().map(|k| p[*k].clone()).collect();
    let expected: Vec<BTreeSet<String>> = images.iter().map(|k| g[*k].clone()).collect();
    let id = metrics::identification_prf(&predicted, &expected)?;
    let rows: Vec<Value> = images
        .iter()
        .zip(&id.per_image)
        .map(|(image, prf)| json!({ "image": image, "precision": prf.precision, "recall": prf.recall, "f1": prf.f1 }))
        .collect();
    let f1: Vec<f64> = id.per_image.iter().map(|r| r.f1).collect();
    emit(&json!({
        "micro": to_value(&id.micro)?,
        "macro": to_value(&id.macro_)?,
        "counts": to_value(&id.counts)?,
        "rows": rows,
        "summary": to_value(&metrics::summarize(&f1)?)?,
    }))
}

fn split(path: &Path, ratio: f64, seed: u64, out: &Path) -> Result<()> {
    check_flag(ratio > 0.0 && ratio < 1.0, "ratio", ratio, "(0, 1)")?;
    let entries = manifest::read_manifest(path)?;
    let assignment = split_grouped(&entries, ratio, seed)?;
    manifest::write_manifest(out, &assignment.apply(&entries)?)?;
    let train = assignment.train_groups();
    emit(&json!({
        "groups": assignment.groups.len(),
        "train_groups": train,
        "test_groups": assignment.groups.len() - train,
        "entries": entries.len(),
        "ratio": ratio,
        "seed": seed,
    }))
}

fn resolve(ontology: Option<&Path>, prompt: &str) -> Result<()> {
    let ontology = match ontology {
        Some(path) => Ontology::load(path)?,
        None => Ontology::shipped(),
    };
    emit(&to_value(&ontology.resolve_prompt(prompt)?)?)
}
