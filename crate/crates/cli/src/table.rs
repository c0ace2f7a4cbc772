//! Plain-text rendering of JSON reports. Every scalar in the JSON appears in
//! the table, so both formats carry the same information.

use serde_json::Value;

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "null".into(),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&key(k), v, out);
            }
        }
        Value::Array(items) if items.iter().all(|v| !v.is_object() && !v.is_array()) => {
            out.push((prefix.to_string(), items.iter().map(scalar).collect::<Vec<_>>().join(",")));
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), v, out);
            }
        }
        other => out.push((prefix.to_string(), scalar(other))),
    }
}

fn grid(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    out += &line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>());
    for row in rows {
        out += &line(row);
    }
    out
}

/// Lists of objects become one row per object; anything else becomes a
/// two-column key/value listing.
pub fn render(value: &Value) -> String {
    if let Value::Array(items) = value {
        if !items.is_empty() && items.iter().all(Value::is_object) {
            let flat: Vec<Vec<(String, String)>> = items
                .iter()
                .map(|v| {
                    let mut out = Vec::new();
                    flatten("", v, &mut out);
                    out
                })
                .collect();
            let mut header: Vec<String> = Vec::new();
            for row in &flat {
                for (k, _) in row {
                    if !header.contains(k) {
                        header.push(k.clone());
                    }
                }
            }
            let rows: Vec<Vec<String>> = flat
                .iter()
                .map(|row| {
                    header
                        .iter()
                        .map(|h| row.iter().find(|(k, _)| k == h).map_or_else(|| "-".to_string(), |(_, v)| v.clone()))
                        .collect()
                })
                .collect();
            return grid(&header, &rows);
        }
    }
    let mut out = Vec::new();
    flatten("", value, &mut out);
    let rows: Vec<Vec<String>> = out.into_iter().map(|(k, v)| vec![k, v]).collect();
    grid(&["field".to_string(), "value".to_string()], &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn object_becomes_key_value_rows() {
        let t = render(&json!({"pair": ["a", "b"], "distance": 0.5, "nested": {"x": 1}}));
        assert_eq!(t, "field     value\n--------  -----\npair      a,b\ndistance  0.5\nnested.x  1\n");
    }

    #[test]
    fn list_of_records_becomes_a_grid() {
        let t =
            render(&json!([{"pair": ["a", "b"], "distance": 0.5}, {"pair": ["a", "c"], "status": "not_computable"}]));
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "pair  distance  status");
        assert_eq!(lines[2], "a,b   0.5       -");
        assert_eq!(lines[3], "a,c   -         not_computable");
    }
}
