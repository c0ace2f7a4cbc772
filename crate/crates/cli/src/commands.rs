use std::fs::File;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use typodist_core::aggregate::AggregatedMatrix;
use typodist_core::distance::DistanceRecord;
use typodist_core::engine::QUALITY_FILE;
use typodist_core::evalkit::{
    coverage_report, knn_select_k, quality_test, read_case_study_path, run_case_study, DEFAULT_FOLDS, DEFAULT_KS,
};
use typodist_core::impute::{ExternalImputer, Imputer};
use typodist_core::ingest::{
    read_language_records, read_raw_path, read_rules_path, IdResolutionTable, IngestSchema, Ingestor,
};
use typodist_core::kb::REGISTRIES_FILE;
use typodist_core::{
    AggregationMode, DistanceRequest, FeatureSelector, FeatureTensor, ImputeMethod, KnowledgeBase, SourceSelector,
};

use crate::config::{CliConfig, ImputerChoice};
use crate::{
    AggregateArgs, CaseStudyArgs, CliError, ConfidenceArgs, DistanceArgs, FeatureArgs, ImputeArgs, IngestArgs,
    MatrixArgs, QualityArgs,
};

type Out = Result<Value, CliError>;

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

/// Missing inputs are query errors, not format errors.
fn require(path: &Path) -> Result<&Path, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::Query(format!("input not found: {}", path.display())))
    }
}

fn open_kb(config: &CliConfig) -> Result<KnowledgeBase, CliError> {
    if !config.data_dir.join(REGISTRIES_FILE).exists() {
        return Err(CliError::Query(format!(
            "no knowledge base in {}; run `typodist ingest` first",
            config.data_dir.display()
        )));
    }
    Ok(KnowledgeBase::open(&config.data_dir)?)
}

fn source_selector(sources: &[String]) -> SourceSelector {
    match sources {
        [] => SourceSelector::AllSources,
        [one] => SourceSelector::OneSource(one.clone()),
        many => SourceSelector::Subset(many.to_vec()),
    }
}

fn feature_selector(args: &FeatureArgs) -> FeatureSelector {
    if !args.features.is_empty() {
        FeatureSelector::ExplicitList(args.features.clone())
    } else if let Some(c) = args.category {
        FeatureSelector::Category(c)
    } else {
        FeatureSelector::All
    }
}

/// Turns a command-line imputer into a concrete method, running the k
/// search when no k was given.
fn resolve_method(choice: &ImputerChoice, matrix: &AggregatedMatrix, seed: u64) -> Result<ImputeMethod, CliError> {
    Ok(match choice {
        ImputerChoice::KnnAuto => ImputeMethod::Knn { k: knn_select_k(matrix, &DEFAULT_KS, DEFAULT_FOLDS, seed)?.k },
        ImputerChoice::Fixed(ImputeMethod::SoftImpute(c)) => {
            let mut c = c.clone();
            c.seed = seed;
            ImputeMethod::SoftImpute(c)
        }
        ImputerChoice::Fixed(m) => m.clone(),
    })
}

fn build_imputer(
    method: &ImputeMethod,
    external_file: Option<&Path>,
    mode: AggregationMode,
) -> Result<Box<dyn Imputer>, CliError> {
    match method {
        ImputeMethod::External { name } => {
            let path = external_file
                .ok_or_else(|| CliError::Query(format!("external imputer `{name}` needs --external-file")))?;
            let file = File::open(require(path)?).map_err(|e| CliError::Query(e.to_string()))?;
            let filled = AggregatedMatrix::read_csv(file, mode, &path.display().to_string())?;
            Ok(Box::new(ExternalImputer::new(name.clone(), filled)))
        }
        other => Ok(Box::new(other.clone())),
    }
}

pub fn ingest(config: &CliConfig, args: IngestArgs) -> Out {
    let schema = IngestSchema::from_path(require(&args.schema)?)?;
    let mut table = IdResolutionTable::builtin_replacements();
    for path in args.resolution.iter().chain(&config.resolution_table) {
        table.merge(&IdResolutionTable::from_path(require(path)?)?)?;
    }
    let rules = match args.rules.as_ref().or(config.rules_file.as_ref()) {
        Some(p) => read_rules_path(require(p)?)?,
        None => Vec::new(),
    };
    let languages = match &args.languages {
        Some(p) => {
            let file = File::open(require(p)?).map_err(|e| CliError::Query(e.to_string()))?;
            read_language_records(file, &p.display().to_string())?
        }
        None => Vec::new(),
    };
    let mut sources = Vec::new();
    for arg in &args.sources {
        let (name, path) =
            arg.split_once('=').ok_or_else(|| CliError::Query(format!("--source expects NAME=PATH, got `{arg}`")))?;
        let path = PathBuf::from(path);
        sources.push((name.to_string(), read_raw_path(require(&path)?, name, &schema)?));
    }

    let dir = &config.data_dir;
    let mut tensor = if dir.join(REGISTRIES_FILE).exists() { FeatureTensor::load(dir)? } else { FeatureTensor::new() };
    let report = Ingestor::new(&schema, &table).with_languages(languages).ingest_into(
        &mut tensor,
        &sources,
        &rules,
        args.overwrite,
    )?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Query(format!("{}: {e}", dir.display())))?;
    tensor.save(dir)?;

    let mut out = to_value(&report);
    out["languages"] = json!(tensor.languages().len());
    out["features"] = json!(tensor.features().len());
    out["sources_total"] = json!(tensor.sources().len());
    Ok(out)
}

fn matrix_for(config: &CliConfig, args: &MatrixArgs) -> (AggregationMode, SourceSelector) {
    (args.mode.unwrap_or(config.aggregation), source_selector(&args.sources))
}

pub fn aggregate(config: &CliConfig, args: AggregateArgs) -> Out {
    let kb = open_kb(config)?;
    let (mode, sources) = matrix_for(config, &args.matrix);
    let matrix = kb.matrix(mode, &sources)?;
    let file = File::create(&args.output).map_err(|e| CliError::Query(format!("{}: {e}", args.output.display())))?;
    matrix.write_csv(file)?;
    Ok(json!({
        "output": args.output.display().to_string(),
        "mode": mode,
        "sources": matrix.sources,
        "languages": matrix.n_languages(),
        "features": matrix.n_features(),
        "observed_cells": matrix.observed_count(),
        "missing_cells": matrix.cells().len() - matrix.observed_count(),
    }))
}

pub fn impute(config: &CliConfig, args: ImputeArgs) -> Out {
    let mut kb = open_kb(config)?;
    kb.dialect_fill = args.dialect_fill;
    let (mode, sources) = matrix_for(config, &args.matrix);
    let seed = args.seed.unwrap_or(config.seed);
    let matrix = kb.matrix(mode, &sources)?;
    let method = resolve_method(args.imputer.as_ref().unwrap_or(&config.imputer), &matrix, seed)?;
    let imputer = build_imputer(&method, args.external_file.as_deref(), mode)?;
    let imputed = kb.imputed(mode, &sources, imputer.as_ref())?;

    let mask_path = args.output.with_extension("mask.csv");
    let create = |p: &Path| File::create(p).map_err(|e| CliError::Query(format!("{}: {e}", p.display())));
    imputed.write_csv(create(&args.output)?)?;
    imputed.write_mask_csv(create(&mask_path)?)?;
    Ok(json!({
        "output": args.output.display().to_string(),
        "mask": mask_path.display().to_string(),
        "mode": mode,
        "method": imputer.label(),
        "dialect_fill": args.dialect_fill,
        "languages": imputed.n_languages(),
        "features": imputed.n_features(),
        "imputed_cells": imputed.imputed_count(),
        "iterations": imputed.diagnostics.iterations,
        "converged": imputed.diagnostics.converged,
        "lambda": imputed.diagnostics.lambda,
        "all_missing_columns": imputed.diagnostics.all_missing_columns,
    }))
}

pub fn distance(config: &CliConfig, args: DistanceArgs) -> Out {
    let mut kb = open_kb(config)?;
    kb.dialect_fill = args.dialect_fill;
    let mode = args.aggregation.unwrap_or(config.aggregation);
    let sources = source_selector(&args.sources);
    let imputer = match &args.impute {
        Some(choice) => {
            let matrix = kb.matrix(mode, &sources)?;
            Some(resolve_method(choice, &matrix, args.seed.unwrap_or(config.seed))?)
        }
        None => None,
    };
    if matches!(imputer, Some(ImputeMethod::External { .. })) {
        return Err(CliError::Query("external imputers are only supported by `impute`".into()));
    }
    let langs = &args.languages;
    let template = DistanceRequest::new(&langs[0], &langs[1])
        .metric(args.metric.unwrap_or(config.metric))
        .aggregation(mode)
        .features(feature_selector(&args.features))
        .sources(sources)
        .imputer(imputer);

    if langs.len() == 2 {
        return Ok(to_value(kb.distance(&template)?.record(&langs[0], &langs[1])));
    }
    let grid = kb.distances(langs, &template)?;
    let mut records: Vec<DistanceRecord> = Vec::new();
    for i in 0..langs.len() {
        for j in i + 1..langs.len() {
            records.push(grid[i][j].record(&langs[i], &langs[j]));
        }
    }
    Ok(to_value(records))
}

pub fn confidence(config: &CliConfig, args: ConfidenceArgs) -> Out {
    let kb = open_kb(config)?;
    let mode = args.aggregation.unwrap_or(config.aggregation);
    let method = match &args.impute {
        Some(choice) => Some(resolve_method(choice, &*kb.matrix(mode, &SourceSelector::AllSources)?, config.seed)?),
        None => None,
    };
    let report = kb.confidence(&args.lang_a, &args.lang_b, &feature_selector(&args.features), method.as_ref(), mode)?;
    Ok(to_value(report))
}

pub fn quality(config: &CliConfig, args: QualityArgs) -> Out {
    let mut kb = open_kb(config)?;
    let (mode, sources) = matrix_for(config, &args.matrix);
    let seed = args.seed.unwrap_or(config.seed);
    let matrix = kb.matrix(mode, &sources)?;
    let method = resolve_method(args.imputer.as_ref().unwrap_or(&config.imputer), &matrix, seed)?;
    if matches!(method, ImputeMethod::External { .. }) {
        return Err(CliError::Query("external imputers cannot be re-run on masked data".into()));
    }
    let report = quality_test(&matrix, &method, seed, !args.no_dialect_fill)?;
    if args.record {
        kb.quality_mut().record(&report);
        kb.quality().save(&config.data_dir.join(QUALITY_FILE))?;
    }
    Ok(to_value(report))
}

pub fn casestudy(config: &CliConfig, args: CaseStudyArgs) -> Out {
    let rows = read_case_study_path(require(&args.input)?)?;
    let report = run_case_study(&rows, args.iterations, args.seed.unwrap_or(config.seed))?;
    Ok(to_value(report))
}

pub fn coverage(config: &CliConfig) -> Out {
    let kb = open_kb(config)?;
    Ok(to_value(coverage_report(kb.tensor(), None)))
}
