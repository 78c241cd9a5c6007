use std::io::Write;

use serde_json::{json, Map, Value};

use crate::args::{Cli, Command, Format};

/// Wraps a result with the tool version, the resolved configuration and the
/// seed, and writes it as JSON or as a CSV projection.
pub fn emit(cli: &Cli, result: Value, exit_code: i32) -> std::io::Result<()> {
    let report = json!({
        "tool": { "name": "khintchine", "version": env!("CARGO_PKG_VERSION") },
        "command": command_name(&cli.command),
        "config": { "global": cli.global, "args": cli.command },
        "seed": cli.global.seed,
        "exit_code": exit_code,
        "result": result,
    });
    let text = match cli.global.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report).expect("json");
            s.push('\n');
            s
        }
        Format::Csv => to_csv(&report["result"])?,
    };
    match &cli.global.out {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn command_name(cmd: &Command) -> String {
    let v = serde_json::to_value(cmd).expect("json");
    let mut parts = Vec::new();
    let mut cur = &v;
    while let Value::Object(m) = cur {
        match m.iter().next() {
            Some((k, inner)) if m.len() == 1 => {
                parts.push(k.clone());
                cur = inner;
            }
            _ => break,
        }
    }
    if let Value::String(s) = cur {
        parts.push(s.clone());
    }
    parts.join(" ")
}

/// The first array of objects in the result becomes a table; without one,
/// the scalar fields become `key,value` rows.
fn to_csv(result: &Value) -> std::io::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let table = result.as_object().and_then(|m| {
        m.values()
            .chain(
                m.get("details")
                    .and_then(Value::as_object)
                    .into_iter()
                    .flat_map(Map::values),
            )
            .find_map(|v| v.as_array().filter(|a| a.first().is_some_and(Value::is_object)))
    });
    match table {
        Some(rows) => {
            let cols: Vec<String> = rows[0]
                .as_object()
                .unwrap()
                .iter()
                .filter(|(_, v)| is_scalar(v))
                .map(|(k, _)| k.clone())
                .collect();
            w.write_record(&cols)?;
            for r in rows {
                w.write_record(cols.iter().map(|c| cell(&r[c])))?;
            }
        }
        None if !parallel_columns(result).is_empty() => {
            let cols = parallel_columns(result);
            w.write_record(cols.iter().map(|(k, _)| k.as_str()))?;
            for i in 0..cols[0].1.len() {
                w.write_record(cols.iter().map(|(_, a)| cell(&a[i])))?;
            }
        }
        None => {
            w.write_record(["key", "value"])?;
            let mut rows = Vec::new();
            flatten("", result, &mut rows);
            for row in rows {
                w.write_record(row)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf8"))
}

/// Top-level arrays of scalars sharing the length of the first one, such as
/// an entropy profile's `eps_grid`, `h` and `counts`.
fn parallel_columns(result: &Value) -> Vec<(String, &Vec<Value>)> {
    let Some(m) = result.as_object() else { return Vec::new() };
    let arrays: Vec<(String, &Vec<Value>)> = m
        .iter()
        .filter_map(|(k, v)| v.as_array().map(|a| (k.clone(), a)))
        .filter(|(_, a)| !a.is_empty() && a.iter().all(is_scalar))
        .collect();
    let Some(len) = arrays.first().map(|(_, a)| a.len()) else {
        return Vec::new();
    };
    let cols: Vec<_> = arrays.into_iter().filter(|(_, a)| a.len() == len).collect();
    if cols.len() >= 2 {
        cols
    } else {
        Vec::new()
    }
}

/// Scalar leaves of nested objects as `a.b` keys; arrays are skipped.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<[String; 2]>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, x, out);
            }
        }
        Value::Array(_) => {}
        scalar => out.push([prefix.to_string(), cell(scalar)]),
    }
}

fn is_scalar(v: &Value) -> bool {
    !(v.is_object() || v.is_array())
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}
