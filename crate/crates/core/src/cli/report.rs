//! Ordered `key = value` reports and CSV field grids.

use std::fmt::Write as _;
use std::path::Path;

use crate::calculus::{Chart, Field};
use crate::error::{Error, Result};

/// 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else {
        format!("{x:.16e}")
    }
}

/// A report section under construction; keys keep insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    lines: Vec<(String, String)>,
    failures: Vec<String>,
    warnings: Vec<String>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(&mut self, key: &str, v: impl Into<String>) {
        self.lines.push((key.to_string(), v.into()));
    }

    pub fn num(&mut self, key: &str, v: f64) {
        self.text(key, num(v));
    }

    pub fn int(&mut self, key: &str, v: usize) {
        self.text(key, v.to_string());
    }

    /// `key.value`, `key.tolerance`, `key.pass`; a failed check is recorded.
    pub fn check(&mut self, key: &str, value: f64, tolerance: f64, pass: bool) -> bool {
        self.num(&format!("{key}.value"), value);
        self.num(&format!("{key}.tolerance"), tolerance);
        self.text(&format!("{key}.pass"), pass.to_string());
        if !pass {
            self.failures.push(key.to_string());
        }
        pass
    }

    /// `value ≤ tolerance` check.
    pub fn bound(&mut self, key: &str, value: f64, tolerance: f64) -> bool {
        self.check(key, value, tolerance, value <= tolerance)
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub fn fail(&mut self, key: &str) {
        self.failures.push(key.to_string());
    }

    pub fn failures(&self) -> &[String] {
        &self.failures
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Appends `other` with every key prefixed by `prefix.`.
    pub fn section(&mut self, prefix: &str, other: Report) {
        for (k, v) in other.lines {
            self.lines.push((format!("{prefix}.{k}"), v));
        }
        self.failures.extend(other.failures.into_iter().map(|f| format!("{prefix}.{f}")));
        self.warnings.extend(other.warnings);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.lines {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Columns of one exported field.
#[derive(Clone, Debug)]
pub struct FieldExport {
    pub name: String,
    pub columns: Vec<(String, Field)>,
}

impl FieldExport {
    pub fn scalar(name: &str, f: Field) -> Self {
        Self { name: name.into(), columns: vec![(name.into(), f)] }
    }
}

/// One row per node: coordinates, values (`NA` where masked) and a mask flag.
pub fn to_csv(chart: &Chart, export: &FieldExport) -> String {
    let grid = chart.grid();
    let mut s = String::new();
    let coords: Vec<String> = (0..grid.m()).map(|k| format!("x{k}")).collect();
    let names: Vec<&str> = export.columns.iter().map(|(n, _)| n.as_str()).collect();
    let _ = writeln!(s, "{},{},masked", coords.join(","), names.join(","));
    let vals: Vec<Vec<f64>> = export.columns.iter().map(|(_, f)| f.values()).collect();
    for n in 0..grid.node_count() {
        let mut row: Vec<String> = grid.coords(n).into_iter().map(num).collect();
        let mut masked = false;
        for v in &vals {
            masked |= v[n].is_nan();
            row.push(num(v[n]));
        }
        let _ = writeln!(s, "{},{}", row.join(","), u8::from(masked));
    }
    s
}

pub fn write_csv(dir: &Path, chart: &Chart, export: &FieldExport) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir)?;
    let p = dir.join(format!("{}.csv", export.name));
    std::fs::write(&p, to_csv(chart, export))?;
    Ok(p)
}

/// Parses a CSV written by [`to_csv`]: header and rows, `NA` as NaN.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::TaskFailed("empty csv".into()))?
        .split(',')
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for l in lines {
        let r = l
            .split(',')
            .map(|x| if x == "NA" { Ok(f64::NAN) } else { x.parse::<f64>() })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::TaskFailed(format!("bad csv value: {e}")))?;
        if r.len() != header.len() {
            return Err(Error::TaskFailed("ragged csv row".into()));
        }
        rows.push(r);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{Axis, ParamGrid, StencilConfig};

    #[test]
    fn checks_record_failures_in_order() {
        let mut r = Report::new();
        r.bound("a", 1e-9, 1e-8);
        r.bound("b", 1.0, 1e-8);
        let mut top = Report::new();
        top.text("x", "y");
        top.section("t", r);
        assert_eq!(top.failures(), &["t.b".to_string()]);
        assert_eq!(top.get("t.a.pass"), Some("true"));
        assert!(top.render().starts_with("x = y\nt.a.value = 1.0000000000000001e-9\n"));
    }

    #[test]
    fn csv_round_trip() {
        let g = ParamGrid::new(vec![Axis::new(0.0, 1.0, 5, false), Axis::new(0.0, 1.0, 6, true)]).unwrap();
        let c = Chart::new(g, StencilConfig::finite_difference(2).unwrap()).unwrap();
        let mut v: Vec<f64> = (0..30).map(|k| (k as f64).sqrt() / 3.0).collect();
        v[7] = f64::NAN;
        let f = Field::from_values(&c, v.clone());
        let text = to_csv(&c, &FieldExport::scalar("tau", f));
        assert!(text.lines().nth(8).unwrap().contains(",NA,1"));
        let (h, rows) = read_csv(&text).unwrap();
        assert_eq!(h, vec!["x0", "x1", "tau", "masked"]);
        assert_eq!(rows.len(), 30);
        for (n, r) in rows.iter().enumerate() {
            if n == 7 {
                assert!(r[2].is_nan());
            } else {
                assert_eq!(r[2], v[n]);
            }
        }
    }
}
