use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How an external identifier was turned into a glottocode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolvedVia {
    Passthrough,
    Iso,
    Retired,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Resolution {
    pub glottocode: String,
    pub via: ResolvedVia,
}

/// Maps ISO 639-3 codes (current and retired) onto glottocodes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdResolutionTable {
    iso_to_glotto: BTreeMap<String, String>,
    retired_iso: BTreeMap<String, String>,
}

/// Glottocodes are four lowercase alphanumerics followed by four digits.
pub fn is_glottocode(id: &str) -> bool {
    let b = id.as_bytes();
    b.len() == 8
        && b[..4].iter().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
        && b[4..].iter().all(u8::is_ascii_digit)
}

#[derive(Deserialize)]
struct Row {
    external_id: String,
    glottocode: String,
    #[serde(default)]
    retired_flag: String,
}

fn parse_flag(text: &str) -> Option<bool> {
    match text.trim().to_ascii_lowercase().as_str() {
        "" | "0" | "false" | "no" => Some(false),
        "1" | "true" | "yes" => Some(true),
        _ => None,
    }
}

impl IdResolutionTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// ISO codes that have no direct glottocode and the replacements used
    /// for them in downstream experiments.
    pub fn builtin_replacements() -> Self {
        let mut table = Self::new();
        let rows = [
            ("alb", "alba1267", true),
            ("ara", "stan1318", false),
            ("aze", "nort2697", false),
            ("zho", "mand1415", false),
            ("ekk", "esto1258", false),
            ("msa", "stan1306", false),
            ("orm", "east2652", false),
            ("fas", "west2369", false),
            ("swa", "swah1253", false),
        ];
        for (iso, glotto, retired) in rows {
            table.insert(iso, glotto, retired).expect("builtin rows are valid");
        }
        table
    }

    pub fn insert(&mut self, external_id: &str, glottocode: &str, retired: bool) -> Result<()> {
        let external_id = external_id.trim();
        let glottocode = glottocode.trim();
        if external_id.is_empty() {
            return Err(Error::UnresolvableId(String::new()));
        }
        if !is_glottocode(glottocode) {
            return Err(Error::InvalidLanguage(glottocode.to_string(), "not a glottocode".into()));
        }
        let (target, other) = if retired {
            (&mut self.retired_iso, &self.iso_to_glotto)
        } else {
            (&mut self.iso_to_glotto, &self.retired_iso)
        };
        let clashes = other.get(external_id).is_some_and(|g| g != glottocode)
            || target.get(external_id).is_some_and(|g| g != glottocode);
        if clashes {
            return Err(Error::InvalidLanguage(external_id.to_string(), "mapped to two different glottocodes".into()));
        }
        target.insert(external_id.to_string(), glottocode.to_string());
        Ok(())
    }

    /// Reads `external_id,glottocode,retired_flag` rows.
    pub fn from_reader(reader: impl Read, origin: &str) -> Result<Self> {
        let mut table = Self::new();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let row: Row =
                record.deserialize(Some(&headers)).map_err(|e| Error::format(origin, line, e.to_string()))?;
            let retired = parse_flag(&row.retired_flag)
                .ok_or_else(|| Error::format(origin, line, format!("bad retired_flag `{}`", row.retired_flag)))?;
            table
                .insert(&row.external_id, &row.glottocode, retired)
                .map_err(|e| Error::format(origin, line, e.to_string()))?;
        }
        Ok(table)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, &path.display().to_string())
    }

    /// Adds every row of `other`; a code mapped differently in both tables
    /// is an error.
    pub fn merge(&mut self, other: &IdResolutionTable) -> Result<()> {
        for (id, g) in &other.iso_to_glotto {
            self.insert(id, g, false)?;
        }
        for (id, g) in &other.retired_iso {
            self.insert(id, g, true)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.iso_to_glotto.len() + self.retired_iso.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Glottocodes pass through; ISO codes map through the current table,
    /// then the retired one.
    pub fn resolve(&self, external_id: &str) -> Result<Resolution> {
        let id = external_id.trim();
        if is_glottocode(id) {
            return Ok(Resolution { glottocode: id.to_string(), via: ResolvedVia::Passthrough });
        }
        if let Some(g) = self.iso_to_glotto.get(id) {
            return Ok(Resolution { glottocode: g.clone(), via: ResolvedVia::Iso });
        }
        if let Some(g) = self.retired_iso.get(id) {
            return Ok(Resolution { glottocode: g.clone(), via: ResolvedVia::Retired });
        }
        Err(Error::UnresolvableId(id.to_string()))
    }
}

pub fn resolve_language(external_id: &str, table: &IdResolutionTable) -> Result<String> {
    table.resolve(external_id).map(|r| r.glottocode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_rows_resolve() {
        let t = IdResolutionTable::builtin_replacements();
        assert_eq!(resolve_language("alb", &t).unwrap(), "alba1267");
        assert_eq!(resolve_language("swa", &t).unwrap(), "swah1253");
        assert_eq!(t.resolve("alb").unwrap().via, ResolvedVia::Retired);
        assert_eq!(t.len(), 9);
    }

    #[test]
    fn glottocodes_pass_through() {
        let t = IdResolutionTable::new();
        assert_eq!(resolve_language("stan1293", &t).unwrap(), "stan1293");
        assert!(matches!(resolve_language("xxx", &t), Err(Error::UnresolvableId(_))));
    }

    #[test]
    fn csv_table_with_retired_codes() {
        let text = "external_id,glottocode,retired_flag\nell,mode1248,0\ngre,mode1248,1\n";
        let t = IdResolutionTable::from_reader(text.as_bytes(), "t.csv").unwrap();
        assert_eq!(t.resolve("gre").unwrap(), Resolution { glottocode: "mode1248".into(), via: ResolvedVia::Retired });
        assert_eq!(t.resolve("ell").unwrap().via, ResolvedVia::Iso);
    }

    #[test]
    fn csv_table_errors_carry_line() {
        let text = "external_id,glottocode,retired_flag\nell,mode1248,0\ngre,notaglotto,1\n";
        match IdResolutionTable::from_reader(text.as_bytes(), "t.csv") {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let clash = "external_id,glottocode,retired_flag\nell,mode1248,0\nell,stan1293,1\n";
        assert!(IdResolutionTable::from_reader(clash.as_bytes(), "t.csv").is_err());
    }

    #[test]
    fn merge_keeps_builtin_rows() {
        let mut t = IdResolutionTable::builtin_replacements();
        let extra =
            IdResolutionTable::from_reader("external_id,glottocode,retired_flag\ngre,mode1248,1\n".as_bytes(), "t.csv")
                .unwrap();
        t.merge(&extra).unwrap();
        assert_eq!(t.len(), 10);
        assert_eq!(resolve_language("gre", &t).unwrap(), "mode1248");
        let clash =
            IdResolutionTable::from_reader("external_id,glottocode,retired_flag\nalb,stan1293,1\n".as_bytes(), "t.csv")
                .unwrap();
        assert!(t.merge(&clash).is_err());
    }

    #[test]
    fn glottocode_shape() {
        assert!(is_glottocode("nort2697"));
        assert!(is_glottocode("b10b1234"));
        assert!(!is_glottocode("alb"));
        assert!(!is_glottocode("Nort2697"));
        assert!(!is_glottocode("nort269"));
    }
}
