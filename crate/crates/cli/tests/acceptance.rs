//! End-to-end acceptance checks, one test per criterion. Each prints a
//! PASS/FAIL line (visible with `--nocapture`).

#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use typodist_core::aggregate::aggregate;
use typodist_core::confidence::{completeness, consistency};
use typodist_core::distance::{distance_matrix, language_distance};
use typodist_core::evalkit::synthetic::{clustered_binary, low_rank_continuous};
use typodist_core::evalkit::{
    knn_select_k, perm_both_test, quality_run, read_case_study_path, score_against_truth, DEFAULT_FOLDS, DEFAULT_KS,
};
use typodist_core::impute::{Lambda, SoftImputeConfig};
use typodist_core::ingest::{
    apply_inference, read_raw_records, resolve_language, IdResolutionTable, InferenceRule, IngestSchema, Ingestor,
    RuleDirection,
};
use typodist_core::kb::{FeatureOrigin, REGISTRIES_FILE};
use typodist_core::{
    AggregatedMatrix, AggregationMode, Batch, CellValue, DistanceRequest, DistanceResult, FeatureCategory,
    FeatureDescriptor, FeatureSelector, FeatureTensor, ImputeMethod, Imputer, LanguageRecord, Metric, NotComputable,
};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    }};
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn cli_json(args: &[&str]) -> Result<(Value, Duration), String> {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_typodist"))
        .env_remove("TYPODIST_CONFIG")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    Ok((serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?, took))
}

fn casestudy_taus() -> Check {
    let input = data("table5.csv");
    let (r, took) = cli_json(&["eval", "casestudy", "--input", input.to_str().unwrap(), "--seed", "0"])?;
    let tau_a = r["tau_a"]["tau"].as_f64().ok_or("tau_a missing")?;
    let tau_b = r["tau_b"]["tau"].as_f64().ok_or("tau_b missing")?;
    ensure!(r["n_pairs"] == 20, "expected 20 pairs, got {}", r["n_pairs"]);
    ensure!((tau_a - -0.05).abs() <= 0.01, "tau_a = {tau_a}");
    ensure!((tau_b - 0.19).abs() <= 0.01, "tau_b = {tau_b}");
    ensure!(took < Duration::from_secs(1), "took {took:?}");
    Ok(format!("tau_a={tau_a:.4} tau_b={tau_b:.4} in {took:?}"))
}

fn perm_both_plausible() -> Check {
    let rows = read_case_study_path(&data("table5.csv")).map_err(|e| e.to_string())?;
    let a: Vec<f64> = rows.iter().map(|r| r.dist_a).collect();
    let b: Vec<f64> = rows.iter().map(|r| r.dist_b).collect();
    let g: Vec<f64> = rows.iter().map(|r| r.g_d).collect();
    let mut ps = Vec::new();
    for seed in 0..5 {
        let start = Instant::now();
        let r = perm_both_test(&a, &b, &g, 10_000, seed).map_err(|e| e.to_string())?;
        let took = start.elapsed();
        ensure!(took < Duration::from_secs(5), "seed {seed} took {took:?}");
        ensure!(r.p_value > 0.05 && (0.15..=0.50).contains(&r.p_value), "seed {seed}: p = {}", r.p_value);
        ps.push(r.p_value);
    }
    Ok(format!("p over seeds 0..5 = {ps:.4?}"))
}

fn imputation_ordering() -> Check {
    let cont = low_rank_continuous(200, 100, 5, 0.2, 11);
    let rmse = |m: &dyn Imputer| -> Result<f64, String> {
        let imputed = m.impute(&cont.holed).map_err(|e| e.to_string())?;
        score_against_truth(&cont.truth, &cont.holed, &imputed).rmse().ok_or_else(|| "no rmse".to_string())
    };
    let (mean_rmse, soft_rmse) = (rmse(&ImputeMethod::Mean)?, rmse(&ImputeMethod::SoftImpute(Default::default()))?);
    ensure!(soft_rmse < mean_rmse, "softimpute rmse {soft_rmse} >= mean {mean_rmse}");

    let bin = clustered_binary(200, 100, 5, 0.1, 0.2, 11);
    let k = knn_select_k(&bin.holed, &DEFAULT_KS, DEFAULT_FOLDS, 11).map_err(|e| e.to_string())?.k;
    let f1 = |m: &dyn Imputer| -> Result<f64, String> {
        let imputed = m.impute(&bin.holed).map_err(|e| e.to_string())?;
        score_against_truth(&bin.truth, &bin.holed, &imputed).f1().ok_or_else(|| "no f1".to_string())
    };
    let mean_f1 = f1(&ImputeMethod::Mean)?;
    let knn_f1 = f1(&ImputeMethod::Knn { k })?;
    let soft_f1 = f1(&ImputeMethod::SoftImpute(Default::default()))?;
    ensure!(knn_f1 > mean_f1, "knn f1 {knn_f1} <= mean {mean_f1}");
    ensure!(soft_f1 > mean_f1, "softimpute f1 {soft_f1} <= mean {mean_f1}");
    Ok(format!(
        "rmse mean={mean_rmse:.4} soft={soft_rmse:.4}; f1 mean={mean_f1:.4} knn(k={k})={knn_f1:.4} soft={soft_f1:.4}"
    ))
}

fn random_matrix(
    rng: &mut ChaCha8Rng,
    mode: AggregationMode,
    rows: usize,
    cols: usize,
    density: f64,
) -> AggregatedMatrix {
    let languages: Vec<LanguageRecord> = (0..rows).map(|i| LanguageRecord::new(format!("rand{i:04}"))).collect();
    let features: Vec<FeatureDescriptor> =
        (0..cols).map(|j| FeatureDescriptor::native(format!("S_R{j:03}")).unwrap()).collect();
    let cells = (0..rows * cols)
        .map(|_| {
            if !rng.random_bool(density) {
                CellValue::Missing
            } else if mode == AggregationMode::Union {
                CellValue::Known(if rng.random_bool(0.4) { 1.0 } else { 0.0 })
            } else {
                CellValue::Known(rng.random())
            }
        })
        .collect();
    AggregatedMatrix::from_cells(mode, languages, features, cells).unwrap()
}

fn quality_protocol() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut runs = 0;
    for trial in 0..6 {
        let mode = if trial % 2 == 0 { AggregationMode::Union } else { AggregationMode::Average };
        let matrix = random_matrix(&mut rng, mode, 25, 12, 0.6);
        let n = matrix.observed_count();
        let imputers = [
            ImputeMethod::Mean,
            ImputeMethod::Knn { k: 3 },
            ImputeMethod::SoftImpute(SoftImputeConfig::fixed(0.5)),
            ImputeMethod::SoftImpute(SoftImputeConfig::default()),
        ];
        for imputer in &imputers {
            for dialect_fill in [false, true] {
                let seed = 100 + trial;
                let run = quality_run(&matrix, imputer, seed, dialect_fill).map_err(|e| e.to_string())?;
                ensure!(run.report.masked_count == n / 5, "masked {} of {n}", run.report.masked_count);
                ensure!(run.masked.len() == n / 5, "mask list length {}", run.masked.len());
                for (l, f) in matrix.observed_positions() {
                    if run.masked.binary_search(&(l, f)).is_ok() {
                        continue;
                    }
                    let orig = matrix.get(l, f).value().unwrap();
                    let got = run.imputed.get(l, f);
                    ensure!(got.to_bits() == orig.to_bits(), "{} changed ({l},{f}): {orig} -> {got}", imputer.key());
                }
                let again = quality_run(&matrix, imputer, seed, dialect_fill).map_err(|e| e.to_string())?;
                let (x, y) =
                    (serde_json::to_string(&run.report).unwrap(), serde_json::to_string(&again.report).unwrap());
                ensure!(x == y && run.report == again.report, "{} not reproducible", imputer.key());
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} seeded runs, masks exact, observed cells bit-identical, reports reproducible"))
}

fn random_tensor(rng: &mut ChaCha8Rng) -> FeatureTensor {
    let n_lang = rng.random_range(2..6);
    let n_feat = rng.random_range(1..8);
    let mut batch = Batch::new();
    batch.sources = vec!["SA".into(), "SB".into(), "SC".into()];
    for l in 0..n_lang {
        batch.languages.push(LanguageRecord::new(format!("lang{l:04}")));
    }
    for f in 0..n_feat {
        batch.features.push(FeatureDescriptor::native(format!("P_F{f}")).unwrap());
    }
    let density = rng.random_range(0.05..0.9);
    for l in 0..n_lang {
        for f in 0..n_feat {
            for s in ["SA", "SB", "SC"] {
                if rng.random_bool(density) {
                    let v = if rng.random_bool(0.7) { f64::from(rng.random_bool(0.5) as u8) } else { rng.random() };
                    batch.push(&format!("lang{l:04}"), &format!("P_F{f}"), s, v);
                }
            }
        }
    }
    let mut t = FeatureTensor::new();
    t.extend_with(batch, false).unwrap();
    t
}

fn distance_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut values, mut not_computable) = (0usize, 0usize);
    for fixture in 0..1000 {
        let tensor = random_tensor(&mut rng);
        let union = aggregate(&tensor, AggregationMode::Union, None).unwrap();
        let average = aggregate(&tensor, AggregationMode::Average, None).unwrap();
        for (u, a) in union.cells().iter().zip(average.cells()) {
            ensure!(u.is_known() == a.is_known(), "fixture {fixture}: observed sets differ");
            if let (Some(u), Some(a)) = (u.value(), a.value()) {
                ensure!(u >= a, "fixture {fixture}: union {u} < average {a}");
            }
        }
        let metric = if fixture % 2 == 0 { Metric::Angular } else { Metric::Cosine };
        for matrix in [&union, &average] {
            let langs: Vec<String> = matrix.languages.iter().map(|l| l.glottocode.clone()).collect();
            let template = DistanceRequest::new(&langs[0], &langs[1]).metric(metric).aggregation(matrix.mode);
            let grid = distance_matrix(&langs, &template, matrix).unwrap();
            for i in 0..langs.len() {
                for j in 0..langs.len() {
                    let d = &grid[i][j];
                    ensure!(d == &grid[j][i], "fixture {fixture}: asymmetric at ({i},{j})");
                    let shared: Vec<usize> = (0..matrix.n_features())
                        .filter(|&f| matrix.get(i, f).is_known() && matrix.get(j, f).is_known())
                        .collect();
                    let zero = |l: usize| shared.iter().all(|&f| matrix.get(l, f).value() == Some(0.0));
                    match d {
                        DistanceResult::Value { d, shared_features, .. } => {
                            ensure!((0.0..=1.0).contains(d), "fixture {fixture}: d = {d}");
                            ensure!(*shared_features == shared.len(), "fixture {fixture}: shared count");
                            ensure!(i != j || *d == 0.0, "fixture {fixture}: d(a,a) = {d}");
                            values += 1;
                        }
                        DistanceResult::NotComputable(NotComputable::NoSharedData) => {
                            ensure!(shared.is_empty(), "fixture {fixture}: NA with {} shared", shared.len());
                            not_computable += 1;
                        }
                        DistanceResult::NotComputable(NotComputable::ZeroVector) => {
                            ensure!(
                                !shared.is_empty() && (zero(i) || zero(j)),
                                "fixture {fixture}: spurious zero vector"
                            );
                        }
                    }
                    if shared.is_empty() {
                        ensure!(!d.is_computable(), "fixture {fixture}: value without shared data");
                    }
                }
            }

            // a column missing for one side of the pair never moves the distance
            let (n_l, n_f) = (matrix.n_languages(), matrix.n_features());
            let mut features = matrix.features.clone();
            features.push(FeatureDescriptor::native("P_EXTRA").unwrap());
            let mut cells = Vec::new();
            for l in 0..n_l {
                cells.extend((0..n_f).map(|f| matrix.get(l, f)));
                cells.push(if l == 0 { CellValue::Missing } else { CellValue::Known(rng.random()) });
            }
            let padded = AggregatedMatrix::from_cells(matrix.mode, matrix.languages.clone(), features, cells).unwrap();
            for j in 0..n_l {
                let req = template.with_pair(&langs[0], &langs[j]);
                let before = language_distance(&req, matrix).unwrap();
                let after = language_distance(&req, &padded).unwrap();
                ensure!(before == after, "fixture {fixture}: masked column changed {before:?} -> {after:?}");
            }
        }
    }
    Ok(format!("1000 fixtures, {values} values and {not_computable} NA results checked"))
}

/// Per language, one string per feature with one char per source:
/// `0`, `1` or `.` for missing.
const CONFIDENCE_FIXTURE: [(&str, [&str; 6]); 4] = [
    ("aaaa1111", ["111", "10.", "...", "0..", "01.", "000"]),
    ("bbbb2222", ["1..", "...", "...", "...", "11.", "..."]),
    ("cccc3333", ["..0", "...", "101", "...", "...", "..."]),
    ("dddd4444", ["110", "011", "101", "0.1", ".10", "1.0"]),
];
const CONFIDENCE_FEATURES: [&str; 6] = ["S_ONE", "S_TWO", "S_THREE", "P_FOUR", "P_FIVE", "P_SIX"];
const CONFIDENCE_SOURCES: [&str; 3] = ["SA", "SB", "SC"];

fn sheet_missing(grid: &[&str; 6], cols: &[usize]) -> f64 {
    cols.iter().filter(|&&c| grid[c] == "...").count() as f64 / cols.len() as f64
}

fn sheet_agreement(grid: &[&str; 6], cols: &[usize]) -> f64 {
    let mut per_feature = Vec::new();
    for &c in cols {
        let zeros = grid[c].chars().filter(|&x| x == '0').count();
        let ones = grid[c].chars().filter(|&x| x == '1').count();
        if zeros + ones > 0 {
            per_feature.push(zeros.max(ones) as f64 / (zeros + ones) as f64);
        }
    }
    per_feature.iter().sum::<f64>() / per_feature.len() as f64
}

fn confidence_oracle() -> Check {
    let mut batch = Batch::new();
    batch.sources = CONFIDENCE_SOURCES.iter().map(|s| s.to_string()).collect();
    batch.features = CONFIDENCE_FEATURES.iter().map(|f| FeatureDescriptor::native(*f).unwrap()).collect();
    for (lang, grid) in &CONFIDENCE_FIXTURE {
        batch.languages.push(LanguageRecord::new(*lang));
        for (f, cell) in grid.iter().enumerate() {
            for (s, ch) in cell.chars().enumerate() {
                if ch != '.' {
                    batch.push(lang, CONFIDENCE_FEATURES[f], CONFIDENCE_SOURCES[s], if ch == '1' { 1.0 } else { 0.0 });
                }
            }
        }
    }
    let mut tensor = FeatureTensor::new();
    tensor.extend_with(batch, false).map_err(|e| e.to_string())?;

    // hand evaluation of the first pair over all features
    let all: Vec<usize> = (0..6).collect();
    let g = &CONFIDENCE_FIXTURE;
    ensure!(
        (1.0 - (sheet_missing(&g[0].1, &all) + sheet_missing(&g[1].1, &all)) / 2.0 - 7.0 / 12.0).abs() < 1e-15,
        "oracle self-check"
    );

    let scopes = [
        (FeatureSelector::All, vec![0, 1, 2, 3, 4, 5]),
        (FeatureSelector::Category(FeatureCategory::Syntactic), vec![0, 1, 2]),
        (FeatureSelector::Category(FeatureCategory::Phonological), vec![3, 4, 5]),
        (FeatureSelector::ExplicitList(vec!["S_TWO".into(), "P_FIVE".into()]), vec![1, 4]),
    ];
    let mut compared = 0;
    for (scope, cols) in &scopes {
        for (a, ga) in g {
            for (b, gb) in g {
                let want_c = 1.0 - (sheet_missing(ga, cols) + sheet_missing(gb, cols)) / 2.0;
                let got_c = completeness(a, b, &tensor, scope).map_err(|e| e.to_string())?;
                ensure!((want_c - got_c).abs() <= 1e-12, "completeness {a},{b} {scope:?}: {got_c} vs {want_c}");
                let sourced = |gr: &[&str; 6]| cols.iter().any(|&c| gr[c] != "...");
                match consistency(a, b, &tensor, scope) {
                    Ok(got) => {
                        let want = (sheet_agreement(ga, cols) + sheet_agreement(gb, cols)) / 2.0;
                        ensure!((want - got).abs() <= 1e-12, "consistency {a},{b} {scope:?}: {got} vs {want}");
                    }
                    Err(_) => ensure!(!sourced(ga) || !sourced(gb), "consistency {a},{b} {scope:?} failed"),
                }
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} pair/scope combinations within 1e-12"))
}

fn softimpute_numerics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..20 {
        let matrix = random_matrix(&mut rng, AggregationMode::Average, 30, 20, 0.7);
        let lambda = [0.01, 0.1, 0.5, 1.0, 3.0][trial % 5];
        let config = SoftImputeConfig { tol: 1e-9, max_iter: 300, ..SoftImputeConfig::fixed(lambda) };
        let out = ImputeMethod::SoftImpute(config).impute(&matrix).map_err(|e| e.to_string())?;
        let trace = &out.diagnostics.objective_trace;
        for w in trace.windows(2) {
            ensure!(w[1] <= w[0] * (1.0 + 1e-10) + 1e-12, "trial {trial}: objective rose {} -> {}", w[0], w[1]);
        }
    }

    let u = [0.2, 0.4, 0.6, 0.8, 1.0];
    let v = [0.3, 0.6, 0.9, 0.5];
    let rows: Vec<Vec<Option<f64>>> = u
        .iter()
        .enumerate()
        .map(|(i, a)| v.iter().enumerate().map(|(j, b)| ((i, j) != (2, 1)).then_some(a * b)).collect())
        .collect();
    let langs = ["rank0001", "rank0002", "rank0003", "rank0004", "rank0005"];
    let matrix = AggregatedMatrix::from_rows(AggregationMode::Average, &langs, &["S_A", "S_B", "S_C", "S_D"], &rows)
        .map_err(|e| e.to_string())?;
    let config =
        SoftImputeConfig { lambda: Lambda::Fixed(1e-8), rank_cap: Some(1), tol: 1e-12, max_iter: 5000, seed: 0 };
    let out = ImputeMethod::SoftImpute(config).impute(&matrix).map_err(|e| e.to_string())?;
    let recovered = out.get(2, 1);
    ensure!((recovered - 0.6 * 0.6).abs() < 1e-6, "rank-1 entry {recovered}");

    // the Frobenius norm of the mean-filled start bounds its top singular value
    let mut big = random_matrix(&mut rng, AggregationMode::Average, 15, 10, 0.6);
    let means: Vec<f64> = (0..big.n_features())
        .map(|f| {
            let known: Vec<f64> = (0..big.n_languages()).filter_map(|l| big.get(l, f).value()).collect();
            if known.is_empty() {
                0.0
            } else {
                known.iter().sum::<f64>() / known.len() as f64
            }
        })
        .collect();
    let frob = (0..big.n_languages())
        .flat_map(|l| (0..big.n_features()).map(move |f| (l, f)))
        .map(|(l, f)| big.get(l, f).value().unwrap_or(means[f]).powi(2))
        .sum::<f64>()
        .sqrt();
    big.set(0, 0, CellValue::Missing);
    let out =
        ImputeMethod::SoftImpute(SoftImputeConfig::fixed(1.01 * frob + 1.0)).impute(&big).map_err(|e| e.to_string())?;
    for l in 0..big.n_languages() {
        for f in 0..big.n_features() {
            if big.get(l, f).is_missing() {
                ensure!(out.get(l, f) == 0.0, "cell ({l},{f}) = {} above the threshold", out.get(l, f));
            }
        }
    }
    Ok(format!("monotone objective over 20 runs; rank-1 entry {recovered:.9}; large lambda gives zeros"))
}

const ROUND_TRIP_SCHEMA: &str = r#"{
    "features": {
        "word order": {"kind": "nominal", "category": "syntactic", "categories": ["SOV", "SVO", "VSO", "free"]},
        "adjective before noun": {"kind": "binary", "category": "syntactic"},
        "case suffixes": {"kind": "binary", "category": "morphological"},
        "tone": {"kind": "ordinal", "category": "phonological", "max_level": 3}
    }
}"#;

fn round_trip_records(seed: u64) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let langs = ["alb", "ara", "aze", "zho", "ekk", "msa", "orm", "fas", "swa", "stan1293"];
    let orders = ["SOV", "SVO", "VSO", "free"];
    let mut sources = Vec::new();
    for source in ["WALS", "GRAMBANK"] {
        let mut text = String::from("language,feature,value\n");
        for lang in langs {
            if rng.random_bool(0.8) {
                text += &format!("{lang},word order,{}\n", orders[rng.random_range(0..4)]);
            }
            text += &format!("{lang},adjective before noun,{}\n", rng.random_range(0..2));
            if rng.random_bool(0.5) {
                text += &format!("{lang},case suffixes,{}\n", rng.random_range(0..2));
            }
            text += &format!("{lang},tone,{}\n", rng.random_range(0..4));
        }
        sources.push((source.to_string(), text));
    }
    sources
}

fn ingest_round_trip() -> Check {
    let schema = IngestSchema::from_json(ROUND_TRIP_SCHEMA).map_err(|e| e.to_string())?;
    let table = IdResolutionTable::builtin_replacements();
    let expected = [
        ("alb", "alba1267"),
        ("ara", "stan1318"),
        ("aze", "nort2697"),
        ("zho", "mand1415"),
        ("ekk", "esto1258"),
        ("msa", "stan1306"),
        ("orm", "east2652"),
        ("fas", "west2369"),
        ("swa", "swah1253"),
    ];
    for (iso, glotto) in expected {
        let got = resolve_language(iso, &table).map_err(|e| e.to_string())?;
        ensure!(got == glotto, "{iso} -> {got}, expected {glotto}");
    }

    let rules = vec![InferenceRule::new(
        "S_ADJECTIVE_BEFORE_NOUN",
        "M_CASE_SUFFIXES",
        RuleDirection::Implies,
        vec![(1.0, 0.0)],
    )
    .map_err(|e| e.to_string())?];
    let mut names: Option<Vec<String>> = None;
    for seed in 0..5 {
        let mut ingestor = Ingestor::new(&schema, &table);
        let mut batch = Batch::new();
        for (source, text) in round_trip_records(seed) {
            let records = read_raw_records(text.as_bytes(), &source, "fixture", &schema).map_err(|e| e.to_string())?;
            batch.merge(ingestor.source_batch(&source, &records).map_err(|e| e.to_string())?);
        }
        let once = apply_inference(&rules, batch, None).map_err(|e| e.to_string())?;
        let twice = apply_inference(&rules, once.batch.clone(), None).map_err(|e| e.to_string())?;
        ensure!(twice.batch == once.batch && twice.inferred_cells == 0, "seed {seed}: inference not idempotent");

        let mut tensor = FeatureTensor::new();
        tensor.extend_with(once.batch, false).map_err(|e| e.to_string())?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        tensor.save(dir.path()).map_err(|e| e.to_string())?;
        ensure!(dir.path().join(REGISTRIES_FILE).exists(), "registries not written");
        let tensor = FeatureTensor::load(dir.path()).map_err(|e| e.to_string())?;

        let mut groups: BTreeMap<(usize, usize, String), (f64, usize)> = BTreeMap::new();
        for (l, f, s, v) in tensor.known_cells() {
            if let FeatureOrigin::BinarizedNominal { parent_feature, .. } = &tensor.features()[f].origin {
                let e = groups.entry((l, s, parent_feature.clone())).or_default();
                e.0 += v;
                e.1 += 1;
            }
        }
        ensure!(!groups.is_empty(), "seed {seed}: no one-hot groups");
        for ((l, s, parent), (sum, n)) in &groups {
            ensure!(*sum == 1.0 && *n == 4, "seed {seed}: group {parent} at ({l},{s}) sums to {sum} over {n}");
        }

        let mut current: Vec<String> = tensor.features().iter().map(|f| f.name.clone()).collect();
        current.sort();
        match &names {
            None => names = Some(current),
            Some(first) => ensure!(first == &current, "seed {seed}: feature names differ {first:?} vs {current:?}"),
        }
    }
    let names = names.unwrap();
    ensure!(
        names.contains(&"S_WORD_ORDER_FREE".to_string()) && names.contains(&"P_TONE".to_string()),
        "names {names:?}"
    );
    Ok(format!(
        "9 replacement codes exact; one-hot sums, idempotent inference and {} stable names over 5 runs",
        names.len()
    ))
}

/// Prints the outcome line and fails the test on a failed check.
fn report(name: &str, check: fn() -> Check) {
    let start = Instant::now();
    match check() {
        Ok(detail) => println!("PASS  {name}: {detail} [{:?}]", start.elapsed()),
        Err(why) => {
            println!("FAIL  {name}: {why}");
            panic!("{name}: {why}");
        }
    }
}

#[test]
fn acceptance_case_study_rank_correlations() {
    report("1 case study rank correlations", casestudy_taus);
}

#[test]
fn acceptance_perm_both_p_value_range() {
    report("2 perm-both p-value range", perm_both_plausible);
}

#[test]
fn acceptance_imputation_ordering_on_synthetic_data() {
    report("3 imputation ordering on synthetic data", imputation_ordering);
}

#[test]
fn acceptance_quality_test_protocol() {
    report("4 quality-test protocol", quality_protocol);
}

#[test]
fn acceptance_distance_invariants_over_random_fixtures() {
    report("5 distance invariants", distance_invariants);
}

#[test]
fn acceptance_confidence_matches_hand_evaluation() {
    report("6 confidence against hand evaluation", confidence_oracle);
}

#[test]
fn acceptance_softimpute_numerics() {
    report("7 softimpute numerics", softimpute_numerics);
}

#[test]
fn acceptance_ingestion_round_trip() {
    report("8 ingestion round trip", ingest_round_trip);
}
