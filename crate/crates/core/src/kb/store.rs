//! On-disk layout: `registries.json` plus `sources/<source>.csv` with
//! header `language,feature,value`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{format_value, parse_value, Batch, CellValue, FeatureDescriptor, FeatureTensor, LanguageRecord};
use crate::error::{Error, Result};

pub const REGISTRIES_FILE: &str = "registries.json";
pub const SOURCES_DIR: &str = "sources";

#[derive(Serialize, Deserialize)]
struct Registries {
    languages: Vec<LanguageRecord>,
    features: Vec<FeatureDescriptor>,
    #[serde(default)]
    sources: Vec<String>,
}

#[derive(Deserialize)]
struct Row {
    language: String,
    feature: String,
    value: String,
}

impl FeatureTensor {
    pub fn save(&self, dir: &Path) -> Result<()> {
        let sources_dir = dir.join(SOURCES_DIR);
        fs::create_dir_all(&sources_dir).map_err(|e| Error::io(&sources_dir, e))?;
        let registries = Registries {
            languages: self.languages().to_vec(),
            features: self.features().to_vec(),
            sources: self.sources().to_vec(),
        };
        let path = dir.join(REGISTRIES_FILE);
        let json = serde_json::to_string_pretty(&registries)?;
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;

        let mut writers = self
            .sources()
            .iter()
            .map(|s| {
                let path = sources_dir.join(format!("{s}.csv"));
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(["language", "feature", "value"])?;
                Ok(w)
            })
            .collect::<Result<Vec<_>>>()?;
        for (l, f, s, v) in self.known_cells() {
            writers[s].write_record([
                self.languages()[l].glottocode.as_str(),
                self.features()[f].name.as_str(),
                &format_value(CellValue::Known(v)),
            ])?;
        }
        for mut w in writers {
            w.flush().map_err(|e| Error::io(&sources_dir, e))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(REGISTRIES_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let registries: Registries = serde_json::from_str(&text)?;

        // Parents may appear after their dialects in the file; register
        // everything in one batch so ordering is irrelevant.
        let mut batch = Batch {
            languages: registries.languages,
            features: registries.features,
            sources: registries.sources.clone(),
            cells: Vec::new(),
        };
        for source in &registries.sources {
            let path = dir.join(SOURCES_DIR).join(format!("{source}.csv"));
            if !path.exists() {
                continue;
            }
            read_source_rows(&path, source, &mut batch)?;
        }
        let mut tensor = FeatureTensor::new();
        tensor.extend_with(batch, false)?;
        Ok(tensor)
    }
}

fn read_source_rows(path: &Path, source: &str, batch: &mut Batch) -> Result<()> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["language", "feature", "value"] {
        return Err(Error::format(&display, 1, "expected header `language,feature,value`"));
    }
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row: Row = record.deserialize(Some(&headers)).map_err(|e| Error::format(&display, line, e.to_string()))?;
        match parse_value(&row.value).map_err(|m| Error::format(&display, line, m))? {
            CellValue::Known(v) => batch.push(&row.language, &row.feature, source, v),
            CellValue::Missing => {}
        }
    }
    Ok(())
}
