//! Output side: every invocation emits one structured document on stdout
//! (or aligned text tables under `--pretty`) and maps its status to the
//! process exit code.

use serde_json::{Map, Value};

/// Outcome classes. `Ok` exits 0; the other three are expected negative
/// results and exit 1. Usage errors never reach this type — they exit 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Violation,
    Infeasible,
    BudgetExhausted,
}

impl Status {
    pub fn word(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Violation => "violation",
            Status::Infeasible => "infeasible",
            Status::BudgetExhausted => "budget-exhausted",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            _ => 1,
        }
    }
}

/// One command's result: a status plus ordered payload fields. The document
/// is rendered with `status` first and the fields in insertion order, so
/// output is deterministic for fixed inputs and flags.
pub struct Outcome {
    pub status: Status,
    fields: Vec<(&'static str, Value)>,
}

impl Outcome {
    pub fn new(status: Status) -> Self {
        Outcome {
            status,
            fields: Vec::new(),
        }
    }

    pub fn ok() -> Self {
        Outcome::new(Status::Ok)
    }

    pub fn field(mut self, key: &'static str, value: impl Into<Value>) -> Self {
        self.fields.push((key, value.into()));
        self
    }

    pub fn document(&self) -> Value {
        let mut doc = Map::new();
        doc.insert("status".into(), Value::String(self.status.word().into()));
        for (k, v) in &self.fields {
            doc.insert((*k).into(), v.clone());
        }
        Value::Object(doc)
    }

    pub fn render(&self, pretty: bool) -> String {
        let doc = self.document();
        if pretty {
            pretty_tables(&doc)
        } else {
            doc.to_string()
        }
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Human-readable rendering: scalars as `key: value` lines, arrays of
/// scalars comma-joined, arrays of objects as aligned tables. No ANSI.
fn pretty_tables(doc: &Value) -> String {
    let Value::Object(map) = doc else {
        return scalar_text(doc);
    };
    let mut out = String::new();
    for (key, value) in map {
        match value {
            Value::Array(rows) if rows.iter().all(|r| r.is_object()) && !rows.is_empty() => {
                out.push_str(key);
                out.push_str(":\n");
                out.push_str(&table(rows));
            }
            Value::Array(items) => {
                let joined: Vec<String> = items.iter().map(scalar_text).collect();
                out.push_str(&format!("{key}: {}\n", joined.join(", ")));
            }
            Value::Object(inner) => {
                for (sub, v) in inner {
                    out.push_str(&format!("{key}.{sub}: {}\n", scalar_text(v)));
                }
            }
            scalar => out.push_str(&format!("{key}: {}\n", scalar_text(scalar))),
        }
    }
    out
}

fn table(rows: &[Value]) -> String {
    // Column order follows first appearance across rows.
    let mut columns: Vec<&str> = Vec::new();
    for row in rows {
        if let Value::Object(m) = row {
            for k in m.keys() {
                if !columns.iter().any(|c| c == k) {
                    columns.push(k);
                }
            }
        }
    }
    let cell = |row: &Value, col: &str| -> String {
        row.get(col).map(scalar_text).unwrap_or_default()
    };
    let mut widths: Vec<usize> = columns.iter().map(|c| c.len()).collect();
    for row in rows {
        for (j, col) in columns.iter().enumerate() {
            widths[j] = widths[j].max(cell(row, col).len());
        }
    }
    let mut out = String::new();
    let mut line = String::from(" ");
    for (j, col) in columns.iter().enumerate() {
        line.push_str(&format!(" {col:<w$}", w = widths[j]));
    }
    out.push_str(line.trim_end());
    out.push('\n');
    for row in rows {
        let mut line = String::from(" ");
        for (j, col) in columns.iter().enumerate() {
            line.push_str(&format!(" {:<w$}", cell(row, col), w = widths[j]));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}
