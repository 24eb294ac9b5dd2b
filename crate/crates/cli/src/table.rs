//! Orbit sample table: header `t,q1,...,qn`, then `N + 1` rows at
//! `t_k = k T / N`, the last repeating the `t = 0` sample at `t = T`.
//! Values are written with 17 significant digits, which round-trips `f64`.
//! Every line, including the last, ends in a newline.

use std::fmt::Write as _;

use hamloop::loopspace::MIN_NODES;
use hamloop::LoopPath;

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitTable {
    pub period: f64,
    /// `q(t_k)` for `k < N`.
    pub samples: LoopPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableError {
    /// 1-based line number; 0 for whole-file problems.
    pub line: usize,
    pub message: String,
}

impl std::error::Error for TableError {}

impl std::fmt::Display for TableError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.line == 0 {
            write!(f, "malformed orbit table: {}", self.message)
        } else {
            write!(f, "malformed orbit table at line {}: {}", self.line, self.message)
        }
    }
}

fn fmt_value(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn render(samples: &LoopPath, period: f64) -> String {
    let n = samples.len();
    let mut out = String::from("t");
    for c in 1..=samples.dim() {
        write!(out, ",q{c}").unwrap();
    }
    out.push('\n');
    for k in 0..=n {
        let t = if k == n { period } else { k as f64 * period / n as f64 };
        out.push_str(&fmt_value(t));
        for x in samples.node(k % n) {
            out.push(',');
            out.push_str(&fmt_value(*x));
        }
        out.push('\n');
    }
    out
}

pub fn parse(text: &str) -> Result<OrbitTable, TableError> {
    let err = |line: usize, message: String| TableError { line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| err(0, "file is empty".into()))?;
    // A cut inside the last number can still leave a valid-looking row.
    if !text.ends_with('\n') {
        return Err(err(text.lines().count(), "last line is not newline-terminated (truncated?)".into()));
    }
    let columns: Vec<&str> = header.trim().split(',').collect();
    let dim = columns.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("t".to_string()).chain((1..=dim).map(|c| format!("q{c}"))).collect();
    if dim == 0 || columns != expected {
        return Err(err(1, format!("header must be t,q1,...,qn, found '{header}'")));
    }

    let mut times = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut last_line = 1;
    for (number, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        last_line = number;
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != dim + 1 {
            return Err(err(number, format!("expected {} fields, found {}", dim + 1, fields.len())));
        }
        let mut values = Vec::with_capacity(dim + 1);
        for field in fields {
            let v: f64 = field.trim().parse().map_err(|_| err(number, format!("'{field}' is not a number")))?;
            if !v.is_finite() {
                return Err(err(number, format!("non-finite value '{field}'")));
            }
            values.push(v);
        }
        times.push(values[0]);
        rows.push(values[1..].to_vec());
    }

    if rows.len() < MIN_NODES + 1 {
        return Err(err(last_line, format!("need at least {} rows, found {} (truncated?)", MIN_NODES + 1, rows.len())));
    }
    let n = rows.len() - 1;
    let period = times[n];
    if !(period > 0.0) || times[0] != 0.0 {
        return Err(err(0, "time column must start at 0 and end at T > 0".into()));
    }
    for (k, t) in times.iter().enumerate() {
        let expected = k as f64 * period / n as f64;
        if (t - expected).abs() > 1e-12 * period {
            return Err(err(
                k + 2,
                format!("time {t} is off the uniform grid (expected {expected}); truncated or reordered?"),
            ));
        }
    }
    if rows[n] != rows[0] {
        return Err(err(last_line, "closing row does not repeat the t = 0 sample (truncated?)".into()));
    }
    rows.truncate(n);
    let samples = LoopPath::new(rows).map_err(|e| err(0, e.to_string()))?;
    Ok(OrbitTable { period, samples })
}
