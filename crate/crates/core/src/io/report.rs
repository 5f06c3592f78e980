use std::fmt::Display;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Tab-separated table with a `# key = value` header block. Numbers are
/// written in shortest round-trip form so reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    meta: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn meta(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn row(&mut self, values: Vec<f64>) -> &mut Self {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push(values);
        self
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k} = {v}");
        }
        let _ = writeln!(s, "{}", self.columns.join("\t"));
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(s, "{}", cells.join("\t"));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

/// Key/value report, one `key<TAB>value` line per entry under the header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    meta: Vec<(String, String)>,
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn meta(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn num(&mut self, key: &str, value: f64) -> &mut Self {
        self.entries.push((key.to_string(), format!("{value:e}")));
        self
    }

    pub fn text(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k} = {v}");
        }
        let _ = writeln!(s, "key\tvalue");
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}\t{v}");
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

type Parsed = (Vec<(String, String)>, Vec<String>, Vec<(usize, Vec<f64>)>);

/// Splits a table file into header entries, column names and numeric rows
/// (tagged with 1-based line numbers).
pub(crate) fn parse_header(text: &str) -> Result<Parsed> {
    let mut meta = Vec::new();
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        if let Some(h) = l.strip_prefix('#') {
            let (k, v) = h.split_once('=').ok_or_else(|| Error::Format {
                line,
                message: "header lines must read `# key = value`".into(),
            })?;
            meta.push((k.trim().to_string(), v.trim().to_string()));
            continue;
        }
        match &columns {
            None => columns = Some(l.split('\t').map(|c| c.trim().to_string()).collect()),
            Some(cols) => {
                let vals: Vec<f64> = l
                    .split('\t')
                    .map(|c| c.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Format {
                        line,
                        message: "non-numeric cell".into(),
                    })?;
                if vals.len() != cols.len() {
                    return Err(Error::Format {
                        line,
                        message: format!("expected {} cells, found {}", cols.len(), vals.len()),
                    });
                }
                rows.push((line, vals));
            }
        }
    }
    let columns = columns.ok_or_else(|| Error::Format {
        line: 0,
        message: "missing column header".into(),
    })?;
    Ok((meta, columns, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_render_and_parse() {
        let mut t = Table::new(&["a", "b"]);
        t.meta("k", 3).row(vec![0.1, 1e-300]).row(vec![-2.5, 7.0]);
        let text = t.render();
        let (meta, cols, rows) = parse_header(&text).unwrap();
        assert_eq!(meta, vec![("k".to_string(), "3".to_string())]);
        assert_eq!(cols, vec!["a", "b"]);
        assert_eq!(rows[0].1, vec![0.1, 1e-300]);
        assert_eq!(rows[1].0, 4);
    }

    #[test]
    fn report_lookup() {
        let mut r = Report::new();
        r.num("gamma_sq", 45.5).text("family", "coherent");
        assert_eq!(r.get("gamma_sq"), Some("4.55e1"));
        assert!(r.render().contains("family\tcoherent\n"));
    }
}
