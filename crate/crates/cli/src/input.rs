// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV ingestion.
//!
//! Accepted layouts (header row required):
//! - `value`: one series, index implicit, named after the file stem.
//! - `date,value`: one monthly series with `YYYY-MM` dates.
//! - `date,s1,s2,...`: several monthly series sharing a date column.

use std::collections::HashSet;
use std::path::Path;

use bmdl_core::{CalendarMonth, TimeSeries};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug)]
pub struct NamedSeries {
    pub name: String,
    pub series: TimeSeries,
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into())
}

pub fn read_series(path: &Path, period: usize) -> CliResult<Vec<NamedSeries>> {
    let shown = path.display();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{shown}: {e}")))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{shown}: line 1: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();

    let dated = match headers.first().map(String::as_str) {
        Some("value") if headers.len() == 1 => false,
        Some("date") if headers.len() >= 2 => true,
        _ => {
            return Err(CliError::Input(format!(
                "{shown}: line 1: expected header `value`, `date,value` or `date,<series>,...`; got {:?}",
                headers.join(",")
            )))
        }
    };
    let names: Vec<String> = if dated {
        headers[1..]
            .iter()
            .map(|h| {
                if h == "value" && headers.len() == 2 {
                    stem(path)
                } else {
                    h.clone()
                }
            })
            .collect()
    } else {
        vec![stem(path)]
    };
    let mut seen = HashSet::new();
    for name in &names {
        if name.is_empty() || !seen.insert(name) {
            return Err(CliError::Input(format!(
                "{shown}: line 1: series names must be nonempty and distinct; got {name:?}"
            )));
        }
    }

    let offset = usize::from(dated);
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut start: Option<CalendarMonth> = None;
    let mut previous: Option<CalendarMonth> = None;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Input(format!("{shown}: line {line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if dated {
            let date: CalendarMonth = record[0].parse().map_err(|_| {
                CliError::Input(format!(
                    "{shown}: line {line}: cannot parse date {:?}; expected YYYY-MM",
                    &record[0]
                ))
            })?;
            if let Some(prev) = previous {
                if date != prev.add_months(1) {
                    return Err(CliError::Input(format!(
                        "{shown}: line {line}: date {date} does not follow {prev}; monthly dates must be consecutive"
                    )));
                }
            }
            start.get_or_insert(date);
            previous = Some(date);
        }
        for (j, column) in columns.iter_mut().enumerate() {
            let cell = &record[j + offset];
            let value: f64 = cell.parse().map_err(|_| {
                CliError::Input(format!(
                    "{shown}: line {line}: cannot parse {cell:?} as a number (column {:?})",
                    names[j]
                ))
            })?;
            if !value.is_finite() {
                return Err(CliError::Input(format!(
                    "{shown}: line {line}: non-finite value {cell:?} (column {:?})",
                    names[j]
                )));
            }
            column.push(value);
        }
    }

    names
        .into_iter()
        .zip(columns)
        .map(|(name, values)| {
            if values.is_empty() {
                return Err(CliError::Input(format!("{shown}: no data rows")));
            }
            let series = TimeSeries::new(values, period)
                .map_err(|e| CliError::Input(format!("{shown}: series {name:?}: {e}")))?;
            let series = match start {
                Some(s) => series.with_start_label(s),
                None => series,
            };
            Ok(NamedSeries { name, series })
        })
        .collect()
}

/// Reads every file and checks that series names stay unique.
pub fn read_all(paths: &[impl AsRef<Path>], period: usize) -> CliResult<Vec<NamedSeries>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for path in paths {
        for s in read_series(path.as_ref(), period)? {
            if !seen.insert(s.name.clone()) {
                return Err(CliError::Input(format!(
                    "series name {:?} appears in more than one input",
                    s.name
                )));
            }
            out.push(s);
        }
    }
    Ok(out)
}

/// Picks the series called `name`, or the only series when `name` is absent.
pub fn select(mut all: Vec<NamedSeries>, name: Option<&str>) -> CliResult<NamedSeries> {
    match name {
        Some(name) => {
            let i = all
                .iter()
                .position(|s| s.name == name)
                .ok_or_else(|| CliError::Input(format!("no series named {name:?} in the input")))?;
            Ok(all.swap_remove(i))
        }
        None if all.len() == 1 => Ok(all.pop().unwrap()),
        None => Err(CliError::Input(format!(
            "input holds {} series; pick one with --series",
            all.len()
        ))),
    }
}

/// A file-name-safe rendering of a series name.
pub fn file_stem_for(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn single_value_column() {
        let f = write("value\n1\n2.5\n-3e1\n");
        let s = read_series(f.path(), 12).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].series.values(), &[1.0, 2.5, -30.0]);
        assert!(s[0].series.start_label().is_none());
    }

    #[test]
    fn dated_wide_layout() {
        let f = write("date,seattle,boston\n2013-04,1,10\n2013-05,2,20\n2013-06,3,30\n");
        let s = read_series(f.path(), 12).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].name, "boston");
        assert_eq!(s[1].series.values(), &[10.0, 20.0, 30.0]);
        assert_eq!(s[0].series.label(2).as_deref(), Some("2013-05"));
    }

    #[test]
    fn errors_cite_lines() {
        let f = write("value\n1\nabc\n");
        let err = read_series(f.path(), 12).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        let f = write("date,value\n2013-01,1\n2013-03,2\n");
        let err = read_series(f.path(), 12).unwrap_err().to_string();
        assert!(
            err.contains("line 3") && err.contains("consecutive"),
            "{err}"
        );
        let f = write("x,y\n1,2\n");
        assert!(read_series(f.path(), 12).is_err());
        let f = write("value\n");
        assert!(read_series(f.path(), 12).is_err());
        let f = write("value\nNaN\n");
        assert!(read_series(f.path(), 12).is_err());
    }

    #[test]
    fn file_stems_are_sanitized() {
        assert_eq!(file_stem_for("San Jose/CA"), "San_Jose_CA");
    }
}
