use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dnaood::metrics::{DEFAULT_PERMUTATIONS, DEFAULT_SEED};
use dnaood::pipeline::default_q_grid;
use dnaood::*;
use serde_json::json;

use crate::settings::Settings;
use crate::{CorrelateArgs, DistancesArgs, EvaluateArgs, ExperimentArgs, SweepArgs, SynthArgs};

const EXPERIMENT_KEYS: [&str; 6] = ["logits", "classes", "fasta", "outlier", "method", "distance"];

fn keys(extra: &[&'static str]) -> Vec<&'static str> {
    EXPERIMENT_KEYS.iter().chain(extra).copied().collect()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

/// Writes to `path`, or to standard output when there is none.
fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, contents),
        None => std::io::stdout()
            .write_all(contents.as_bytes())
            .context("cannot write to standard output"),
    }
}

fn out_dir(settings: &Settings, flag: Option<PathBuf>) -> Result<PathBuf> {
    let dir = settings.require_path(flag, "out-dir")?;
    fs::create_dir_all(&dir).with_context(|| format!("cannot create directory {}", dir.display()))?;
    Ok(dir)
}

fn load_fasta(path: &Path) -> Result<Alignment> {
    read_fasta(path).with_context(|| format!("invalid FASTA file {}", path.display()))
}

fn distance_method(settings: &Settings, flag: Option<DistanceMethod>) -> Result<DistanceMethod> {
    settings.value_or(flag, "distance", DistanceMethod::default())
}

pub fn distances(args: DistancesArgs) -> Result<()> {
    let settings = Settings::load(args.config.config.as_deref(), &["fasta", "distance", "out"])?;
    let fasta = settings.require_path(args.fasta, "fasta")?;
    let method = distance_method(&settings, args.distance)?;
    let alignment = load_fasta(&fasta)?;
    let matrix = distance_matrix(&alignment, method)
        .with_context(|| format!("cannot compute {method} distances for {}", fasta.display()))?;
    emit(settings.path(args.out, "out").as_deref(), &matrix.to_csv())
}

struct LoadedExperiment {
    table: LogitTable,
    alignment: Alignment,
    config: ExperimentConfig,
    logits: PathBuf,
}

fn load_experiment(args: ExperimentArgs, settings: &Settings) -> Result<LoadedExperiment> {
    let logits = settings.require_path(args.logits, "logits")?;
    let classes = settings.require_path(args.classes, "classes")?;
    let fasta = settings.require_path(args.fasta, "fasta")?;
    let outlier: String = settings.require(args.outlier, "outlier")?;
    let ood_method = settings.value_or(args.method, "method", OodMethod::Entropy)?;
    let distance_method = distance_method(settings, args.distance)?;
    let table = load_logit_table(&logits, &classes)?;
    let alignment = load_fasta(&fasta)?;
    Ok(LoadedExperiment {
        table,
        alignment,
        config: ExperimentConfig {
            outlier_taxon: outlier,
            ood_method,
            distance_method,
            reordering: Reordering::Baseline,
        },
        logits,
    })
}

fn experiment_context(exp: &LoadedExperiment) -> String {
    format!(
        "experiment with outlier taxon '{}' ({})",
        exp.config.outlier_taxon,
        exp.logits.display()
    )
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let settings = Settings::load(
        args.experiment.config.config.as_deref(),
        &keys(&["reordering", "q", "out-dir"]),
    )?;
    let q: Option<f64> = settings.value(args.q, "q")?;
    let reordering_name: String = settings.value_or(args.reordering, "reordering", "dna-quantile".into())?;
    let reordering = Reordering::parse(&reordering_name, q)?;
    if q.is_some() && reordering.q().is_none() {
        bail!("--q only applies to the dna-quantile reordering, not '{reordering_name}'");
    }
    let dir = out_dir(&settings, args.out_dir)?;
    let mut exp = load_experiment(args.experiment, &settings)?;
    exp.config.reordering = reordering;

    let outcome = run_experiment(&exp.table, &exp.alignment, &exp.config).with_context(|| experiment_context(&exp))?;
    let config = &exp.config;
    let dna_ranking = outcome.dna_ranking.as_ref().map(|r| r.ranked_inliers());
    let report = json!({
        "outlier_taxon": config.outlier_taxon,
        "ood_method": config.ood_method,
        "distance_method": config.distance_method,
        "reordering": reordering.name(),
        "q": reordering.q(),
        "n_images": outcome.ranked.len(),
        "score_warnings": outcome.warnings,
        "metrics": outcome.report,
        "dna_ranking": dna_ranking,
    });
    write_file(
        &dir.join("report.json"),
        &format!("{}\n", serde_json::to_string_pretty(&report)?),
    )?;
    write_file(&dir.join("curves.csv"), &outcome.curve.to_csv())?;
    write_file(&dir.join("ranking.csv"), &outcome.ranked.to_csv())?;

    let m = &outcome.report;
    println!("outlier     {}", config.outlier_taxon);
    println!("method      {}", config.ood_method);
    println!("distance    {}", config.distance_method);
    println!("ordering    {reordering}");
    println!(
        "images      {} ({} outliers, {} inliers)",
        m.n_outliers + m.n_inliers,
        m.n_outliers,
        m.n_inliers
    );
    println!("AUROC       {:.4}", m.auroc);
    println!("AUPRC       {:.4}", m.auprc);
    println!("FPR@95TPR   {:.4}", m.fpr_at_95tpr);
    if outcome.warnings > 0 {
        println!(
            "warnings    {} images with non-positive maximum logit",
            outcome.warnings
        );
    }
    println!("wrote       {}", dir.display());
    Ok(())
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let grid = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .with_context(|| format!("invalid q value '{s}' in --grid"))
        })
        .collect::<Result<Vec<_>>>()?;
    if grid.is_empty() {
        bail!("--grid is empty");
    }
    Ok(grid)
}

pub fn sweep_q(args: SweepArgs) -> Result<()> {
    let settings = Settings::load(args.experiment.config.config.as_deref(), &keys(&["grid", "out"]))?;
    let grid = match settings.value::<String>(args.grid, "grid")? {
        Some(text) => parse_grid(&text)?,
        None => default_q_grid(),
    };
    let out = settings.path(args.out, "out");
    let exp = load_experiment(args.experiment, &settings)?;
    let reports =
        dnaood::sweep_q(&exp.table, &exp.alignment, &exp.config, &grid).with_context(|| experiment_context(&exp))?;
    let mut csv = String::from("q,auroc,auprc,fpr_at_95tpr,n_outliers,n_inliers\n");
    for (q, r) in &reports {
        csv.push_str(&format!(
            "{q},{},{},{},{},{}\n",
            r.auroc, r.auprc, r.fpr_at_95tpr, r.n_outliers, r.n_inliers
        ));
    }
    emit(out.as_deref(), &csv)?;
    if out.is_some() {
        println!("{:>6}  {:>7}  {:>7}  {:>9}", "q", "AUROC", "AUPRC", "FPR@95TPR");
        for (q, r) in &reports {
            println!("{q:>6.3}  {:>7.4}  {:>7.4}  {:>9.4}", r.auroc, r.auprc, r.fpr_at_95tpr);
        }
    }
    Ok(())
}

#[derive(Debug)]
struct ManifestEntry {
    outlier: String,
    logits: PathBuf,
    classes: PathBuf,
}

fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let name = path.display();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read manifest {name}"))?;
    let header = rdr
        .headers()
        .with_context(|| format!("cannot read manifest {name}"))?
        .clone();
    let column = |key: &str| {
        header.iter().position(|h| h == key).with_context(|| {
            format!("manifest {name}: missing column '{key}' (expected outlier_taxon,logits,class_map)")
        })
    };
    let (c_outlier, c_logits, c_classes) = (column("outlier_taxon")?, column("logits")?, column("class_map")?);
    let base = path.parent().unwrap_or(Path::new(""));
    let mut entries = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.with_context(|| format!("manifest {name}, line {line}"))?;
        let field = |c: usize| record.get(c).filter(|v| !v.is_empty());
        let (Some(outlier), Some(logits), Some(classes)) = (field(c_outlier), field(c_logits), field(c_classes)) else {
            bail!("manifest {name}, line {line}: empty field");
        };
        entries.push(ManifestEntry {
            outlier: outlier.to_string(),
            logits: base.join(logits),
            classes: base.join(classes),
        });
    }
    if entries.is_empty() {
        bail!("manifest {name} lists no experiments");
    }
    Ok(entries)
}

pub fn correlate(args: CorrelateArgs) -> Result<()> {
    let settings = Settings::load(
        args.config.config.as_deref(),
        &["manifest", "fasta", "distance", "permutations", "seed", "out-dir"],
    )?;
    let manifest = settings.require_path(args.manifest, "manifest")?;
    let fasta = settings.require_path(args.fasta, "fasta")?;
    let method = distance_method(&settings, args.distance)?;
    let options = CorrelationOptions {
        permutations: settings.value_or(args.permutations, "permutations", DEFAULT_PERMUTATIONS)?,
        seed: settings.value_or(args.seed, "seed", DEFAULT_SEED)?,
    };
    let dir = out_dir(&settings, args.out_dir)?;

    let entries = read_manifest(&manifest)?;
    let tables = entries
        .iter()
        .map(|e| load_logit_table(&e.logits, &e.classes).map_err(anyhow::Error::from))
        .collect::<Result<Vec<_>>>()?;
    let alignment = load_fasta(&fasta)?;
    let inputs: Vec<ExperimentInput> = entries
        .iter()
        .zip(&tables)
        .map(|(e, table)| ExperimentInput {
            outlier: &e.outlier,
            table,
        })
        .collect();
    let report = correlate_experiments(&inputs, &alignment, method, options)
        .with_context(|| format!("correlation over experiments in {}", manifest.display()))?;

    let summary = json!({
        "distance_method": method,
        "experiments": entries.len(),
        "pearson_r": report.pearson_r,
        "p_value": report.p_value,
        "n_pairs": report.n_pairs,
        "permutations": report.permutations,
        "seed": report.seed,
    });
    write_file(
        &dir.join("correlation.json"),
        &format!("{}\n", serde_json::to_string_pretty(&summary)?),
    )?;
    write_file(&dir.join("scatter.csv"), &report.scatter_csv())?;
    println!("experiments {}", entries.len());
    println!("pairs       {}", report.n_pairs);
    println!("pearson r   {:.4}", report.pearson_r);
    println!(
        "p-value     {:.4} ({} permutations)",
        report.p_value, report.permutations
    );
    println!("wrote       {}", dir.display());
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let settings = Settings::load(
        args.config.config.as_deref(),
        &[
            "n-classes",
            "images-per-class",
            "outlier-index",
            "coupling",
            "logit-noise",
            "barcode-length",
            "seed",
            "all-outliers",
            "out-dir",
        ],
    )?;
    let d = SynthConfig::default();
    let config = SynthConfig {
        n_classes: settings.value_or(args.n_classes, "n-classes", d.n_classes)?,
        images_per_class: settings.value_or(args.images_per_class, "images-per-class", d.images_per_class)?,
        outlier_index: settings.value_or(args.outlier_index, "outlier-index", d.outlier_index)?,
        coupling: settings.value_or(args.coupling, "coupling", d.coupling)?,
        logit_noise: settings.value_or(args.logit_noise, "logit-noise", d.logit_noise)?,
        barcode_length: settings.value_or(args.barcode_length, "barcode-length", d.barcode_length)?,
        seed: settings.value_or(args.seed, "seed", d.seed)?,
    };
    let all = settings.flag(args.all_outliers, "all-outliers")?;
    let dir = out_dir(&settings, args.out_dir)?;
    let world = SynthWorld::generate(&config)?;

    write_file(&dir.join("barcodes.fasta"), &world.alignment().to_fasta())?;
    let outliers: Vec<usize> = if all {
        (0..config.n_classes).collect()
    } else {
        vec![config.outlier_index]
    };
    let mut manifest = String::from("outlier_taxon,logits,class_map\n");
    for &o in &outliers {
        let taxon = &world.taxa()[o];
        let (logits, classes) = if all {
            (format!("logits_{taxon}.csv"), format!("classes_{taxon}.csv"))
        } else {
            ("logits.csv".to_string(), "classes.csv".to_string())
        };
        let table = world.experiment(o)?;
        write_file(&dir.join(&logits), &table.logits_csv())?;
        write_file(&dir.join(&classes), &table.class_map_csv())?;
        manifest.push_str(&format!("{taxon},{logits},{classes}\n"));
    }
    write_file(&dir.join("manifest.csv"), &manifest)?;
    println!(
        "wrote {} experiment(s), {} taxa, {} images each, to {}",
        outliers.len(),
        config.n_classes,
        config.n_classes * config.images_per_class,
        dir.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0, 0.5,1").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_grid("0,x").unwrap_err().to_string().contains("'x'"));
        assert!(parse_grid(" , ").is_err());
    }

    #[test]
    fn manifest_paths_are_relative_to_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        fs::write(&path, "outlier_taxon,logits,class_map\nt1,sub/l.csv,c.csv\n").unwrap();
        let entries = read_manifest(&path).unwrap();
        assert_eq!(entries[0].outlier, "t1");
        assert_eq!(entries[0].logits, dir.path().join("sub/l.csv"));
        assert_eq!(entries[0].classes, dir.path().join("c.csv"));

        fs::write(&path, "outlier,logits\nt1,l.csv\n").unwrap();
        let err = read_manifest(&path).unwrap_err().to_string();
        assert!(err.contains("outlier_taxon"), "{err}");
        fs::write(&path, "outlier_taxon,logits,class_map\nt1,,c.csv\n").unwrap();
        assert!(read_manifest(&path).unwrap_err().to_string().contains("line 2"));
    }
}
