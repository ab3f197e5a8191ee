//! `ctprog`: phantom generation, feature extraction, reduction/classifier
//! training, cross-validation, and report rendering over the synthetic
//! chest-CT pipeline. Every run writes a config echo file with the fully
//! resolved parameter set; all randomness flows from --seed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ctprog_core::catalog::{
    extract_table, read_feature_csv, write_feature_csv, CatalogConfig, FeatureCatalog,
};
use ctprog_core::classify::{classifier_by_name, ModelFile, MODEL_FILE_VERSION};
use ctprog_core::deepnet::{NetworkSpec, TrainConfig};
use ctprog_core::error::{Error, Result};
use ctprog_core::eval::{
    run_crossval_deepnet, run_crossval_radiomics, write_metrics_csv, write_roc_csv,
    write_summary, EvalReport, StudyKey,
};
use ctprog_core::reduce::reduction_by_name;
use ctprog_core::synthio::{generate_cohort, load_manifest, write_manifest};
use ctprog_core::volume::{FeatureTable, StudyRecord};

#[derive(Debug, Parser, Serialize)]
#[command(name = "ctprog", version, about = "volumetric prognostics toolkit")]
struct Cli {
    /// Master seed; every stochastic step derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker thread cap; results are independent of this value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
enum Command {
    /// Generate a matched case/control phantom cohort with a manifest.
    Phantom(PhantomArgs),
    /// Extract the radiomics feature table from a manifest.
    Extract(ExtractArgs),
    /// Fit a feature reduction on a full table and write the transform.
    Reduce(ReduceArgs),
    /// Train a reduction + classifier pipeline on a full table.
    Train(TrainArgs),
    /// Run matched k-fold cross-validation and write report files.
    Crossval(CrossvalArgs),
    /// Re-render report files from a stored report without recomputation.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
struct PhantomArgs {
    #[arg(long)]
    n_pairs: usize,
    /// Volume dims as WxHxD, e.g. 32x32x8.
    #[arg(long, default_value = "32x32x8")]
    dims: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Gray-level count for texture quantization.
    #[arg(long, default_value_t = 32)]
    levels: usize,
    #[arg(long, default_value_t = 64)]
    hist_bins: usize,
    #[arg(long, default_value_t = 1)]
    glcm_distance: i32,
    /// Zone connectivity: slice8 or full26.
    #[arg(long, default_value = "slice8")]
    connectivity: String,
    /// Fixed HU window lo:hi; default is the per-anatomy in-mask range.
    #[arg(long)]
    hu_window: Option<String>,
}

#[derive(Debug, Args, Serialize)]
struct ReduceArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// identity | lasso | pca
    #[arg(long)]
    reduction: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    reduction: String,
    /// lsvm | nlsvm | rf
    #[arg(long)]
    classifier: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct CrossvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Precomputed feature CSV; extracted with default catalog flags when
    /// omitted (radiomics pipeline only).
    #[arg(long)]
    features: Option<PathBuf>,
    /// radiomics | deepnet
    #[arg(long, default_value = "radiomics")]
    pipeline: String,
    #[arg(long, default_value = "lasso")]
    reduction: String,
    #[arg(long, default_value = "nlsvm")]
    classifier: String,
    #[arg(long, default_value_t = 6)]
    folds: usize,
    /// Deepnet training epochs.
    #[arg(long, default_value_t = 120)]
    epochs: usize,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    /// Deepnet dropout rate.
    #[arg(long, default_value_t = 0.35)]
    dropout: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ReportArgs {
    /// Stored report.json from a crossval run.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_dims(text: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<usize> = text
        .split('x')
        .map(|p| p.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidArgument(format!("bad dims '{text}': {e}")))?;
    match parts.as_slice() {
        [w, h, d] => Ok((*w, *h, *d)),
        _ => Err(Error::InvalidArgument(format!(
            "dims '{text}' must be WxHxD"
        ))),
    }
}

fn parse_window(text: &str) -> Result<(f64, f64)> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidArgument(format!("bad hu window '{text}': {e}")))?;
    match parts.as_slice() {
        [lo, hi] => Ok((*lo, *hi)),
        _ => Err(Error::InvalidArgument(format!(
            "hu window '{text}' must be lo:hi"
        ))),
    }
}

fn write_config_echo(dir: &Path, cli: &Cli) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join("run-config.json");
    let text = serde_json::to_string_pretty(cli)? + "\n";
    std::fs::write(&path, text).map_err(|source| Error::Io { path, source })
}

/// Echo directory for single-file outputs: the file's parent.
fn echo_dir(out: &Path) -> PathBuf {
    out.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn load_keys(manifest: &Path) -> Result<(Vec<StudyRecord>, Vec<StudyKey>)> {
    let records = load_manifest(manifest)?;
    let keys = records.iter().map(StudyKey::from_study).collect();
    Ok((records, keys))
}

/// Labels aligned with the feature table's row order.
fn labels_for(table: &FeatureTable, keys: &[StudyKey]) -> Result<Vec<f64>> {
    table
        .study_ids()
        .iter()
        .map(|id| {
            keys.iter()
                .find(|k| &k.id == id)
                .map(|k| k.label as f64)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("study '{id}' missing from manifest"))
                })
        })
        .collect()
}

fn catalog_version_for(features: &Path) -> String {
    let meta = features.with_extension("meta.json");
    std::fs::read_to_string(&meta)
        .ok()
        .and_then(|text| serde_json::from_str::<serde_json::Value>(&text).ok())
        .and_then(|v| v["catalog_version"].as_str().map(String::from))
        .unwrap_or_else(|| "unknown".to_string())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Phantom(args) => {
            let dims = parse_dims(&args.dims)?;
            let records = generate_cohort(args.n_pairs, dims, cli.seed)?;
            std::fs::create_dir_all(&args.out).map_err(|source| Error::Io {
                path: args.out.clone(),
                source,
            })?;
            let manifest = write_manifest(&records, &args.out)?;
            write_config_echo(&args.out, cli)?;
            log::info!(
                "wrote {} studies, manifest {}",
                records.len(),
                manifest.display()
            );
            Ok(())
        }
        Command::Extract(args) => {
            let records = load_manifest(&args.manifest)?;
            let slice_connectivity = match args.connectivity.as_str() {
                "slice8" => true,
                "full26" => false,
                other => {
                    return Err(Error::UnknownStrategy {
                        family: "connectivity",
                        name: other.to_string(),
                        known: vec!["slice8", "full26"],
                    })
                }
            };
            let hu_window = args.hu_window.as_deref().map(parse_window).transpose()?;
            let config = CatalogConfig {
                levels: args.levels,
                hu_window,
                hist_bins: args.hist_bins,
                glcm_distance: args.glcm_distance,
                slice_connectivity,
                ..CatalogConfig::default()
            };
            let catalog = FeatureCatalog::new(config);
            let table = extract_table(&records, &catalog)?;
            write_feature_csv(&table, &catalog, &args.out)?;
            write_config_echo(&echo_dir(&args.out), cli)?;
            log::info!(
                "extracted {} features for {} studies",
                table.ncols(),
                table.nrows()
            );
            Ok(())
        }
        Command::Reduce(args) => {
            let table = read_feature_csv(&args.features)?;
            let (_, keys) = load_keys(&args.manifest)?;
            let labels = labels_for(&table, &keys)?;
            let reduction = reduction_by_name(&args.reduction)?;
            let rows: Vec<Vec<f64>> = (0..table.nrows()).map(|i| table.row(i).to_vec()).collect();
            let transform = reduction.fit(&rows, &labels)?;
            let text = serde_json::to_string_pretty(&transform)? + "\n";
            std::fs::write(&args.out, text).map_err(|source| Error::Io {
                path: args.out.clone(),
                source,
            })?;
            write_config_echo(&echo_dir(&args.out), cli)?;
            log::info!(
                "fitted {} -> {} features",
                table.ncols(),
                transform.output_dim()
            );
            Ok(())
        }
        Command::Train(args) => {
            let table = read_feature_csv(&args.features)?;
            let (_, keys) = load_keys(&args.manifest)?;
            let labels = labels_for(&table, &keys)?;
            let labels_u8: Vec<u8> = labels.iter().map(|&l| l as u8).collect();
            let reduction = reduction_by_name(&args.reduction)?;
            let classifier = classifier_by_name(&args.classifier)?;
            let rows: Vec<Vec<f64>> = (0..table.nrows()).map(|i| table.row(i).to_vec()).collect();
            let transform = reduction.fit(&rows, &labels)?;
            let reduced = transform.apply_rows(&rows)?;
            let trained = classifier.train(&reduced, &labels_u8, cli.seed)?;
            let model = ModelFile {
                version: MODEL_FILE_VERSION,
                catalog_version: catalog_version_for(&args.features),
                reduction: transform,
                classifier: trained,
            };
            model.save(&args.out)?;
            write_config_echo(&echo_dir(&args.out), cli)?;
            log::info!("trained {} model -> {}", args.classifier, args.out.display());
            Ok(())
        }
        Command::Crossval(args) => {
            // Strategy names are validated before any file IO so a typo is
            // reported as a usage error regardless of manifest state.
            if !matches!(args.pipeline.as_str(), "radiomics" | "deepnet") {
                return Err(Error::UnknownStrategy {
                    family: "pipeline",
                    name: args.pipeline.clone(),
                    known: vec!["radiomics", "deepnet"],
                });
            }
            if args.pipeline == "radiomics" {
                reduction_by_name(&args.reduction)?;
                classifier_by_name(&args.classifier)?;
            }
            let (records, keys) = load_keys(&args.manifest)?;
            let report = match args.pipeline.as_str() {
                "radiomics" => {
                    let (table, catalog_version) = match &args.features {
                        Some(path) => (read_feature_csv(path)?, catalog_version_for(path)),
                        None => {
                            let catalog = FeatureCatalog::default();
                            (extract_table(&records, &catalog)?, catalog.version.clone())
                        }
                    };
                    let reduction = reduction_by_name(&args.reduction)?;
                    let classifier = classifier_by_name(&args.classifier)?;
                    run_crossval_radiomics(
                        &table,
                        &keys,
                        reduction.as_ref(),
                        classifier.as_ref(),
                        &catalog_version,
                        args.folds,
                        cli.seed,
                    )?
                }
                "deepnet" => {
                    let dims = records
                        .first()
                        .map(|r| r.volume.dims())
                        .ok_or_else(|| Error::Eval("empty cohort".into()))?;
                    let spec = NetworkSpec::desk(dims);
                    let cfg = TrainConfig {
                        epochs: args.epochs,
                        batch_size: args.batch_size,
                        dropout: args.dropout,
                        seed: cli.seed,
                        ..TrainConfig::default()
                    };
                    run_crossval_deepnet(&records, &spec, &cfg, args.folds, cli.seed)?
                }
                other => {
                    return Err(Error::UnknownStrategy {
                        family: "pipeline",
                        name: other.to_string(),
                        known: vec!["radiomics", "deepnet"],
                    })
                }
            };
            std::fs::create_dir_all(&args.out_dir).map_err(|source| Error::Io {
                path: args.out_dir.clone(),
                source,
            })?;
            emit_report(&args.out_dir, &report)?;
            write_config_echo(&args.out_dir, cli)?;
            log::info!(
                "{}: mean accuracy {:.3}, mean auc {:.3}",
                report.model_name,
                report.mean_accuracy,
                report.mean_auc
            );
            Ok(())
        }
        Command::Report(args) => {
            let text = std::fs::read_to_string(&args.report).map_err(|source| Error::Io {
                path: args.report.clone(),
                source,
            })?;
            let report: EvalReport = serde_json::from_str(&text)?;
            std::fs::create_dir_all(&args.out_dir).map_err(|source| Error::Io {
                path: args.out_dir.clone(),
                source,
            })?;
            emit_report(&args.out_dir, &report)?;
            write_config_echo(&args.out_dir, cli)?;
            Ok(())
        }
    }
}

fn emit_report(dir: &Path, report: &EvalReport) -> Result<()> {
    let reports = std::slice::from_ref(report);
    write_metrics_csv(&dir.join("metrics.csv"), reports)?;
    write_roc_csv(&dir.join("roc.csv"), reports)?;
    write_summary(&dir.join("summary.txt"), reports)?;
    let path = dir.join("report.json");
    let text = serde_json::to_string_pretty(report)? + "\n";
    std::fs::write(&path, text).map_err(|source| Error::Io { path, source })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::UnknownStrategy { .. }) => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
