use std::path::{Path, PathBuf};

use serde::Deserialize;
use typodist_core::{AggregationMode, ImputeMethod, Metric};

use crate::CliError;

pub const DEFAULT_DATA_DIR: &str = "typodist-data";

/// Optional TOML config. Relative paths are taken relative to the file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    data_dir: Option<PathBuf>,
    aggregation: Option<AggregationMode>,
    metric: Option<Metric>,
    imputer: Option<String>,
    seed: Option<u64>,
    resolution_table: Option<PathBuf>,
    rules_file: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct CliConfig {
    pub data_dir: PathBuf,
    pub aggregation: AggregationMode,
    pub metric: Metric,
    pub imputer: ImputerChoice,
    pub seed: u64,
    pub resolution_table: Option<PathBuf>,
    pub rules_file: Option<PathBuf>,
}

/// An imputer as given on the command line. Bare `knn` means "pick k by
/// cross-validation".
#[derive(Debug, Clone, PartialEq)]
pub enum ImputerChoice {
    Fixed(ImputeMethod),
    KnnAuto,
}

impl std::str::FromStr for ImputerChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim().eq_ignore_ascii_case("knn") {
            Ok(ImputerChoice::KnnAuto)
        } else {
            s.parse().map(ImputerChoice::Fixed)
        }
    }
}

fn anchored(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_relative() {
        base.join(p)
    } else {
        p
    }
}

impl CliConfig {
    /// Reads `path` if given. `data_dir` from the command line or
    /// environment wins over the file.
    pub fn load(path: Option<&Path>, data_dir: Option<PathBuf>) -> Result<Self, CliError> {
        let (file, base) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Query(format!("cannot read config {}: {e}", p.display())))?;
                let file: ConfigFile =
                    toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
                (file, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (ConfigFile::default(), PathBuf::new()),
        };
        let imputer = match file.imputer {
            Some(s) => s.parse().map_err(|e| CliError::Input(format!("config imputer: {e}")))?,
            None => ImputerChoice::Fixed("softimpute".parse().expect("valid default")),
        };
        let resolution_table = file.resolution_table.map(|p| anchored(&base, p));
        let rules_file = file.rules_file.map(|p| anchored(&base, p));
        for p in resolution_table.iter().chain(&rules_file) {
            if !p.exists() {
                return Err(CliError::Input(format!("config references missing file {}", p.display())));
            }
        }
        Ok(CliConfig {
            data_dir: data_dir
                .or(file.data_dir.map(|p| anchored(&base, p)))
                .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR)),
            aggregation: file.aggregation.unwrap_or_default(),
            metric: file.metric.unwrap_or_default(),
            imputer,
            seed: file.seed.unwrap_or(0),
            resolution_table,
            rules_file,
        })
    }
}
