use std::collections::{HashMap, HashSet};

use crate::aggregate::AggregatedMatrix;
use crate::kb::{CellValue, LanguageRecord};

/// Copies the nearest ancestor's known value into each missing cell of a
/// language that has a parent. Observed cells are never touched.
///
/// Parent links come from `registry`, falling back to the matrix's own
/// records. Ancestors that are not rows of the matrix are skipped over but
/// their parents are still followed.
pub fn fill_dialects(matrix: &AggregatedMatrix, registry: &[LanguageRecord]) -> AggregatedMatrix {
    let mut parents: HashMap<&str, &str> = HashMap::new();
    for rec in matrix.languages.iter().chain(registry) {
        if let Some(p) = rec.parent.as_deref() {
            parents.insert(rec.glottocode.as_str(), p);
        }
    }
    let rows: HashMap<&str, usize> =
        matrix.languages.iter().enumerate().map(|(i, l)| (l.glottocode.as_str(), i)).collect();

    let mut out = matrix.clone();
    for (l, lang) in matrix.languages.iter().enumerate() {
        let mut chain = Vec::new();
        let mut seen = HashSet::from([lang.glottocode.as_str()]);
        let mut cur = lang.glottocode.as_str();
        while let Some(&p) = parents.get(cur) {
            if !seen.insert(p) {
                break;
            }
            if let Some(&row) = rows.get(p) {
                chain.push(row);
            }
            cur = p;
        }
        if chain.is_empty() {
            continue;
        }
        for f in 0..matrix.n_features() {
            if matrix.get(l, f).is_known() {
                continue;
            }
            if let Some(v) = chain.iter().find_map(|&a| matrix.get(a, f).value()) {
                out.set(l, f, CellValue::Known(v));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::AggregationMode;

    fn chain(rows: &[Vec<Option<f64>>]) -> (AggregatedMatrix, Vec<LanguageRecord>) {
        let ids = ["dial1234", "pare1234", "gran1234"];
        let m = AggregatedMatrix::from_rows(AggregationMode::Union, &ids[..rows.len()], &["S_A"], rows).unwrap();
        let registry = vec![
            LanguageRecord::new("dial1234").with_parent("pare1234"),
            LanguageRecord::new("pare1234").with_parent("gran1234"),
            LanguageRecord::new("gran1234"),
        ];
        (m, registry)
    }

    #[test]
    fn parent_value_fills_missing_dialect() {
        let (m, reg) = chain(&[vec![None], vec![Some(1.0)]]);
        assert_eq!(fill_dialects(&m, &reg).get(0, 0), CellValue::Known(1.0));
    }

    #[test]
    fn observed_dialect_value_wins() {
        let (m, reg) = chain(&[vec![Some(0.0)], vec![Some(1.0)]]);
        assert_eq!(fill_dialects(&m, &reg).get(0, 0), CellValue::Known(0.0));
    }

    #[test]
    fn grandparent_is_used_when_parent_is_missing() {
        let (m, reg) = chain(&[vec![None], vec![None], vec![Some(1.0)]]);
        let out = fill_dialects(&m, &reg);
        // brute-force transitive closure over the chain
        for l in 0..3 {
            let expected = (l..3).find_map(|a| m.get(a, 0).value());
            assert_eq!(out.get(l, 0).value(), expected);
        }
    }

    #[test]
    fn ancestors_outside_the_matrix_are_followed() {
        let m = AggregatedMatrix::from_rows(
            AggregationMode::Union,
            &["dial1234", "gran1234"],
            &["S_A"],
            &[vec![None], vec![Some(1.0)]],
        )
        .unwrap();
        let (_, reg) = chain(&[vec![None]]);
        assert_eq!(fill_dialects(&m, &reg).get(0, 0), CellValue::Known(1.0));
    }

    #[test]
    fn parentless_languages_pass_through() {
        let m = AggregatedMatrix::from_rows(AggregationMode::Union, &["aaaa1111"], &["S_A"], &[vec![None]]).unwrap();
        assert_eq!(fill_dialects(&m, &[]), m);
    }
}
