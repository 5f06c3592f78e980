use std::path::Path;

use crate::error::{Error, Result};
use crate::spectro::{BasisTag, RabiTrace};

use super::report::{parse_header, Table};

/// A Rabi trace on disk with the provenance needed to reproduce it.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub trace: RabiTrace,
    pub seed: u64,
    pub config_digest: String,
}

impl TraceFile {
    pub fn to_table(&self) -> Table {
        let se = self.trace.stderr();
        let mut t = Table::new(&["time_s", "p_down", "stderr"]);
        t.meta("basis_tag", self.trace.basis_tag.as_str());
        t.meta("shots", self.trace.shots);
        t.meta("seed", self.seed);
        t.meta("config_digest", &self.config_digest);
        for i in 0..self.trace.len() {
            t.row(vec![self.trace.times[i], self.trace.p_down[i], se[i]]);
        }
        t
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.to_table().write(path)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (meta, cols, rows) = parse_header(text)?;
        let get = |k: &str| {
            meta.iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| Error::Format {
                    line: 0,
                    message: format!("header lacks `{k}`"),
                })
        };
        let basis_tag = BasisTag::parse(&get("basis_tag")?).map_err(|e| Error::Format {
            line: 0,
            message: e.to_string(),
        })?;
        let num = |k: &str| -> Result<u64> {
            get(k)?.parse().map_err(|_| Error::Format {
                line: 0,
                message: format!("`{k}` is not an unsigned integer"),
            })
        };
        let shots = u32::try_from(num("shots")?).map_err(|_| Error::Format {
            line: 0,
            message: "shots out of range".into(),
        })?;
        let seed = num("seed")?;
        let config_digest = get("config_digest")?;
        if cols.len() < 2 || cols[0] != "time_s" || cols[1] != "p_down" {
            return Err(Error::Format {
                line: 0,
                message: "expected columns time_s, p_down[, stderr]".into(),
            });
        }
        let mut times = Vec::with_capacity(rows.len());
        let mut p_down = Vec::with_capacity(rows.len());
        for (line, row) in &rows {
            if let Some(prev) = times.last() {
                if row[0] < *prev {
                    return Err(Error::Format {
                        line: *line,
                        message: "rows are not sorted by time".into(),
                    });
                }
            }
            times.push(row[0]);
            p_down.push(row[1]);
        }
        let trace = RabiTrace::new(times, p_down, shots, basis_tag).map_err(|e| Error::Format {
            line: 0,
            message: e.to_string(),
        })?;
        Ok(Self {
            trace,
            seed,
            config_digest,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
