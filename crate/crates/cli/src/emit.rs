//! Plot-ready CSV and JSON output.
//!
//! Records are flat serde structs. Columns follow field order, floats are
//! written with 9 significant digits, and files are replaced atomically.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::CliError;

pub const SIGNIFICANT_DIGITS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// A record type with a fixed column list, so an empty result set still
/// gets a header.
pub trait Record: Serialize + DeserializeOwned {
    fn columns() -> Vec<&'static str>;
}

macro_rules! record_from_header {
    ($($t:ty),*) => {$(
        impl Record for $t {
            fn columns() -> Vec<&'static str> {
                <$t>::csv_header().split(',').collect()
            }
        }
    )*};
}

record_from_header!(
    afclab_core::codec::PerPoint,
    afclab_core::pipeline::SweepRecord,
    afclab_core::training::LossRecord,
    afclab_core::analysis::FpgaRow
);

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

fn number_text(n: &Number) -> String {
    if n.is_f64() {
        let x = round_sig(n.as_f64().unwrap_or(f64::NAN));
        if x != 0.0 && !(1e-4..1e15).contains(&x.abs()) {
            format!("{x:e}")
        } else {
            format!("{x}")
        }
    } else {
        n.to_string()
    }
}

fn flatten<T: Serialize>(r: &T, columns: &[&str]) -> Result<Vec<Value>, CliError> {
    let v = serde_json::to_value(r).map_err(|e| CliError::Internal(e.to_string()))?;
    let Value::Object(map) = v else {
        return Err(CliError::Internal("records must serialize to objects".into()));
    };
    if map.len() != columns.len() || map.keys().zip(columns).any(|(k, c)| k != c) {
        return Err(CliError::Internal(format!(
            "record keys {:?} do not match columns {columns:?}",
            map.keys().collect::<Vec<_>>()
        )));
    }
    map.into_iter()
        .map(|(k, v)| match v {
            Value::Array(_) | Value::Object(_) => Err(CliError::Internal(format!("column {k} is not a scalar"))),
            other => Ok(other),
        })
        .collect()
}

fn csv_field(v: &Value) -> String {
    let s = match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => number_text(n),
        Value::String(s) => s.clone(),
        _ => unreachable!("flatten rejects nested values"),
    };
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

fn rounded(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            Number::from_f64(round_sig(n.as_f64().unwrap_or(0.0))).map(Value::Number).unwrap_or(Value::Null)
        }
        other => other,
    }
}

/// Renders records to bytes.
pub fn render<T: Record>(records: &[T], format: Format) -> Result<Vec<u8>, CliError> {
    let columns = T::columns();
    let rows = records.iter().map(|r| flatten(r, &columns)).collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    match format {
        Format::Csv => {
            out.extend_from_slice(columns.join(",").as_bytes());
            out.push(b'\n');
            for row in rows {
                let line: Vec<String> = row.iter().map(csv_field).collect();
                out.extend_from_slice(line.join(",").as_bytes());
                out.push(b'\n');
            }
        }
        Format::Json => {
            let arr: Vec<Value> = rows
                .into_iter()
                .map(|row| {
                    let m: Map<String, Value> =
                        columns.iter().map(|c| c.to_string()).zip(row.into_iter().map(rounded)).collect();
                    Value::Object(m)
                })
                .collect();
            serde_json::to_writer_pretty(&mut out, &arr).map_err(|e| CliError::Internal(e.to_string()))?;
            out.push(b'\n');
        }
    }
    Ok(out)
}

/// Writes `bytes` to `path` through a temporary file in the same
/// directory, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn emit_results<T: Record>(records: &[T], format: Format, path: &Path) -> Result<(), CliError> {
    write_atomic(path, &render(records, format)?)
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => fields.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    fields.push(cur);
    fields
}

fn parse_scalar(s: &str) -> Value {
    if s.is_empty() {
        return Value::Null;
    }
    if let Ok(i) = s.parse::<u64>() {
        return Value::from(i);
    }
    if let Ok(i) = s.parse::<i64>() {
        return Value::from(i);
    }
    if let Ok(x) = s.parse::<f64>() {
        if let Some(n) = Number::from_f64(x) {
            return Value::Number(n);
        }
    }
    match s {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => Value::String(s.to_string()),
    }
}

/// Reads back output of [`render`]. CSV cells that look numeric are
/// parsed as numbers, so string columns must not hold numeric text.
pub fn parse<T: Record>(bytes: &[u8], format: Format) -> Result<Vec<T>, CliError> {
    let bad = |m: String| CliError::Internal(m);
    match format {
        Format::Json => serde_json::from_slice(bytes).map_err(|e| bad(e.to_string())),
        Format::Csv => {
            let text = std::str::from_utf8(bytes).map_err(|e| bad(e.to_string()))?;
            let mut lines = text.lines();
            let header = split_csv_line(lines.next().ok_or_else(|| bad("missing header".into()))?);
            lines
                .map(|line| {
                    let cells = split_csv_line(line);
                    if cells.len() != header.len() {
                        return Err(bad(format!("row has {} cells, header {}", cells.len(), header.len())));
                    }
                    let m: Map<String, Value> =
                        header.iter().cloned().zip(cells.iter().map(|c| parse_scalar(c))).collect();
                    serde_json::from_value(Value::Object(m)).map_err(|e| bad(e.to_string()))
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use afclab_core::pipeline::{Mode, SweepRecord};
    use proptest::prelude::*;

    #[test]
    fn worked_example_row() {
        let r =
            SweepRecord { delta_ms: 10.0, delta_tilde_ms: 4.0, mode: Mode::Async, delta_prime_ms: 3.0, total_ms: 69.0 };
        let out = String::from_utf8(render(&[r], Format::Csv).unwrap()).unwrap();
        assert_eq!(out, "delta_ms,delta_tilde_ms,mode,delta_prime_ms,total_ms\n10,4,async,3,69\n");
    }

    #[test]
    fn empty_is_header_only() {
        let out = render::<SweepRecord>(&[], Format::Csv).unwrap();
        assert_eq!(out, b"delta_ms,delta_tilde_ms,mode,delta_prime_ms,total_ms\n");
        assert_eq!(render::<SweepRecord>(&[], Format::Json).unwrap(), b"[]\n");
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(round_sig(0.434_426_229_508_196_7), 0.434_426_230);
        assert_eq!(round_sig(122.0), 122.0);
        assert_eq!(round_sig(-1.234_567_891_23e-7), -1.234_567_89e-7);
        assert_eq!(round_sig(0.0), 0.0);
    }

    #[test]
    fn tiny_and_huge_values_use_exponents() {
        let n = |x: f64| number_text(&Number::from_f64(x).unwrap());
        assert_eq!(n(2.515_764_573e-9), "2.51576457e-9");
        assert_eq!(n(3.0e20), "3e20");
        assert_eq!(n(0.00015), "0.00015");
        assert_eq!(n(0.0), "0");
    }

    #[test]
    fn quoting() {
        assert_eq!(csv_field(&Value::String("a,b".into())), "\"a,b\"");
        assert_eq!(split_csv_line("\"a,\"\"b\",c"), vec!["a,\"b", "c"]);
    }

    fn nine_digit() -> impl Strategy<Value = f64> {
        (-999_999_999i64..=999_999_999, -12i32..12).prop_map(|(m, e)| round_sig(m as f64 * 10f64.powi(e)))
    }

    proptest! {
        #[test]
        fn round_trip(rows in prop::collection::vec(
            (nine_digit(), nine_digit(), any::<bool>(), nine_digit(), nine_digit()), 0..20)
        ) {
            let recs: Vec<SweepRecord> = rows.into_iter().map(|(a, b, m, c, d)| SweepRecord {
                delta_ms: a, delta_tilde_ms: b, mode: if m { Mode::Sync } else { Mode::Async },
                delta_prime_ms: c, total_ms: d,
            }).collect();
            for f in [Format::Csv, Format::Json] {
                let back: Vec<SweepRecord> = parse(&render(&recs, f).unwrap(), f).unwrap();
                prop_assert_eq!(&back, &recs);
            }
        }

        #[test]
        fn rendering_is_idempotent_after_rounding(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            prop_assert_eq!(round_sig(round_sig(x)), round_sig(x));
        }
    }
}
