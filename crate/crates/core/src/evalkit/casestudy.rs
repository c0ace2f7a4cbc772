use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::rank::{kendall_tau, perm_both_test, CorrelationResult, PermTestResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyRow {
    pub pair: String,
    pub dist_a: f64,
    pub dist_b: f64,
    pub g_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseStudyReport {
    pub n_pairs: usize,
    pub tau_a: CorrelationResult,
    pub tau_b: CorrelationResult,
    pub perm_both: PermTestResult,
}

/// Reads `pair,dist_a,dist_b,g_d` rows.
pub fn read_case_study(reader: impl Read, origin: &str) -> Result<Vec<CaseStudyRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["pair", "dist_a", "dist_b", "g_d"] {
        return Err(Error::format(origin, 1, "expected header `pair,dist_a,dist_b,g_d`"));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::format(origin, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let row: CaseStudyRow =
            record.deserialize(Some(&headers)).map_err(|e| Error::format(origin, line, e.to_string()))?;
        if ![row.dist_a, row.dist_b, row.g_d].iter().all(|v| v.is_finite()) {
            return Err(Error::format(origin, line, "distances must be finite"));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_case_study_path(path: &Path) -> Result<Vec<CaseStudyRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_case_study(file, &path.display().to_string())
}

/// Correlates both distance columns with the reference and tests whether
/// the two correlations differ.
pub fn run_case_study(rows: &[CaseStudyRow], iterations: usize, seed: u64) -> Result<CaseStudyReport> {
    let a: Vec<f64> = rows.iter().map(|r| r.dist_a).collect();
    let b: Vec<f64> = rows.iter().map(|r| r.dist_b).collect();
    let g: Vec<f64> = rows.iter().map(|r| r.g_d).collect();
    Ok(CaseStudyReport {
        n_pairs: rows.len(),
        tau_a: kendall_tau(&a, &g)?,
        tau_b: kendall_tau(&b, &g)?,
        perm_both: perm_both_test(&a, &b, &g, iterations, seed)?,
    })
}
