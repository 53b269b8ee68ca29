use serde::Serialize;

/// 17 significant digits round-trips every f64 and is stable across runs.
pub fn fnum(x: f64) -> String {
    format!("{:.16e}", x)
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
}

pub fn check(name: impl Into<String>, measured: f64, bound: f64, passed: bool) -> Check {
    Check {
        name: name.into(),
        passed,
        measured,
        bound,
    }
}

/// Top-level JSON report: configuration echo first, then the verdicts,
/// then the raw result payload.
#[derive(Serialize)]
pub struct Envelope<'a, C: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub threads: usize,
    pub config: &'a C,
    pub checks: &'a [Check],
    pub result: &'a serde_json::Value,
}

/// RFC 4180 flavored table: header row, CRLF line endings, quoting only
/// where a field contains a comma, quote, or line break.
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "csv row arity");
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        fn emit(out: &mut String, cells: &[String]) {
            for (i, c) in cells.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                quote_into(out, c);
            }
            out.push_str("\r\n");
        }
        let mut out = String::new();
        emit(&mut out, &self.header);
        for r in &self.rows {
            emit(&mut out, r);
        }
        out.into_bytes()
    }
}

fn quote_into(out: &mut String, field: &str) {
    let needs = field.contains(',') || field.contains('"') || field.contains('\n') || field.contains('\r');
    if !needs {
        out.push_str(field);
        return;
    }
    out.push('"');
    for ch in field.chars() {
        if ch == '"' {
            out.push('"');
        }
        out.push(ch);
    }
    out.push('"');
}
