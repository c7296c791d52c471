//! Plain-text rendering of report JSON.

use std::fmt::Write;

use serde_json::Value;

/// Longest numeric array printed inline; longer ones are summarized.
const INLINE_LIMIT: usize = 12;

/// Scalars as `key: value` lines (nested objects use dotted keys), arrays of
/// records as aligned tables.
pub fn render(value: &Value) -> String {
    let mut out = String::new();
    let mut tables = Vec::new();
    render_into(&mut out, &mut tables, "", value);
    for (key, rows) in tables {
        let _ = writeln!(out, "\n{key}:");
        out.push_str(&record_table(rows));
    }
    out
}

fn render_into<'a>(
    out: &mut String,
    tables: &mut Vec<(String, &'a [Value])>,
    prefix: &str,
    value: &'a Value,
) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                render_into(out, tables, &key, v);
            }
        }
        Value::Array(items) if !items.is_empty() && items.iter().all(Value::is_object) => {
            tables.push((prefix.to_string(), items));
        }
        Value::Array(items) if items.len() > INLINE_LIMIT => {
            let _ = writeln!(out, "{prefix}: [{} values]", items.len());
        }
        other => {
            let _ = writeln!(out, "{prefix}: {}", scalar(other));
        }
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::String(s) => s.clone(),
        Value::Array(items) => {
            let inner: Vec<String> = items.iter().map(scalar).collect();
            format!("[{}]", inner.join(", "))
        }
        other => other.to_string(),
    }
}

fn record_table(rows: &[Value]) -> String {
    let mut columns: Vec<String> = Vec::new();
    for row in rows {
        if let Value::Object(map) = row {
            for (k, v) in map {
                if !v.is_object() && !columns.contains(k) {
                    columns.push(k.clone());
                }
            }
        }
    }
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            columns
                .iter()
                .map(|c| row.get(c).map(scalar).unwrap_or_else(|| "-".into()))
                .collect()
        })
        .collect();
    let widths: Vec<usize> = columns
        .iter()
        .enumerate()
        .map(|(i, c)| cells.iter().map(|r| r[i].len()).fold(c.len(), usize::max))
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, items: &[String]| {
        let padded: Vec<String> = items
            .iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:>w$}"))
            .collect();
        let _ = writeln!(out, "  {}", padded.join("  "));
    };
    line(&mut out, &columns);
    for r in &cells {
        line(&mut out, r);
    }
    out
}
