//! Flat key/value reports with optional tables, rendered as a single JSON
//! document or as CSV.
//!
//! Numbers are printed with six significant digits: fixed notation for
//! magnitudes in [1e-5, 1e6), scientific otherwise. Output depends only on
//! the values, so identical inputs give byte-identical reports.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    /// Absent value: `null` in JSON, empty cell in CSV.
    Null,
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as i64)
    }
}

impl From<u64> for Value {
    fn from(x: u64) -> Self {
        Value::Int(x as i64)
    }
}

impl From<u32> for Value {
    fn from(x: u32) -> Self {
        Value::Int(i64::from(x))
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(x: Option<T>) -> Self {
        x.map_or(Value::Null, Into::into)
    }
}

impl From<bool> for Value {
    fn from(x: bool) -> Self {
        Value::Bool(x)
    }
}

impl From<&str> for Value {
    fn from(x: &str) -> Self {
        Value::Text(x.to_owned())
    }
}

impl From<String> for Value {
    fn from(x: String) -> Self {
        Value::Text(x)
    }
}

/// Six significant digits.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".to_owned()
        } else if x > 0.0 {
            "inf".to_owned()
        } else {
            "-inf".to_owned()
        };
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

fn json_string(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

fn json_value(out: &mut String, v: &Value) {
    match v {
        Value::Num(x) if x.is_finite() => out.push_str(&format_number(*x)),
        Value::Num(_) => out.push_str("null"),
        Value::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Text(s) => json_string(out, s),
        Value::Null => out.push_str("null"),
    }
}

fn csv_value(v: &Value) -> String {
    match v {
        Value::Num(x) => format_number(*x),
        Value::Int(i) => i.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::Text(s) => s.clone(),
        Value::Null => String::new(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_owned(),
            columns: columns.iter().map(|c| (*c).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(csv_value).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Output of one command. Keys carry their unit (`_uj`, `_v`, `_s`, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub fields: Vec<(String, Value)>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_owned(),
            fields: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn field(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.fields.push((key.to_owned(), value.into()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// `key,value` rows for the scalar fields.
    pub fn fields_csv(&self) -> String {
        let mut out = String::from("key,value\n");
        for (k, v) in &self.fields {
            let _ = writeln!(out, "{k},{}", csv_value(v));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut out = String::from("{\n  \"command\": ");
        json_string(&mut out, &self.command);
        out.push_str(",\n  \"fields\": {");
        for (i, (k, v)) in self.fields.iter().enumerate() {
            out.push_str(if i == 0 { "\n    " } else { ",\n    " });
            json_string(&mut out, k);
            out.push_str(": ");
            json_value(&mut out, v);
        }
        out.push_str(if self.fields.is_empty() { "}" } else { "\n  }" });
        out.push_str(",\n  \"tables\": {");
        for (i, t) in self.tables.iter().enumerate() {
            out.push_str(if i == 0 { "\n    " } else { ",\n    " });
            json_string(&mut out, &t.name);
            out.push_str(": {\n      \"columns\": [");
            for (c, name) in t.columns.iter().enumerate() {
                if c > 0 {
                    out.push_str(", ");
                }
                json_string(&mut out, name);
            }
            out.push_str("],\n      \"rows\": [");
            for (r, row) in t.rows.iter().enumerate() {
                out.push_str(if r == 0 {
                    "\n        ["
                } else {
                    ",\n        ["
                });
                for (c, v) in row.iter().enumerate() {
                    if c > 0 {
                        out.push_str(", ");
                    }
                    json_value(&mut out, v);
                }
                out.push(']');
            }
            out.push_str(if t.rows.is_empty() {
                "]\n    }"
            } else {
                "\n      ]\n    }"
            });
        }
        out.push_str(if self.tables.is_empty() {
            "}\n}\n"
        } else {
            "\n  }\n}\n"
        });
        out
    }
}
