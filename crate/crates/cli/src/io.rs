//! CSV ingestion and atomic output.
//!
//! Training and test files carry a header `f1,...,fd,label`; node files a
//! header `f1,...,fd`; distance files are `M` headerless rows of `M` reals.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim};
use mltrp::{DistanceMatrix, FeatureVector, Label, LabeledDataset, NodeSet};
use serde::Serialize;

use crate::error::{CliError, Result};

fn invalid(path: &Path, line: u64, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{}:{line}: {msg}", path.display()))
}

fn open(path: &Path, headers: bool) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(ReaderBuilder::new()
        .has_headers(headers)
        .flexible(true)
        .trim(Trim::All)
        .from_reader(file))
}

fn line_of(rec: &StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn records(path: &Path, reader: &mut csv::Reader<std::fs::File>) -> Result<Vec<StringRecord>> {
    reader
        .records()
        .map(|r| r.map_err(|e| CliError::Validation(format!("{}: {e}", path.display()))))
        .collect()
}

fn header(path: &Path, reader: &mut csv::Reader<std::fs::File>) -> Result<Vec<String>> {
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(invalid(path, 1, "missing header row"));
    }
    let mut seen = HashSet::new();
    for name in &names {
        if name.is_empty() {
            return Err(invalid(path, 1, "empty column name in header"));
        }
        if !seen.insert(name.as_str()) {
            return Err(invalid(path, 1, format!("duplicate column '{name}' in header")));
        }
    }
    Ok(names)
}

fn parse_field(path: &Path, line: u64, column: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .parse()
        .map_err(|_| invalid(path, line, format!("column '{column}': cannot parse '{raw}' as a number")))?;
    if !v.is_finite() {
        return Err(invalid(path, line, format!("column '{column}': value '{raw}' is not finite")));
    }
    Ok(v)
}

fn check_width(path: &Path, rec: &StringRecord, expected: usize) -> Result<()> {
    if rec.len() != expected {
        return Err(invalid(
            path,
            line_of(rec),
            format!("expected {expected} fields, found {}", rec.len()),
        ));
    }
    Ok(())
}

fn feature_rows(path: &Path, names: &[String], recs: &[StringRecord]) -> Result<Vec<Vec<f64>>> {
    recs.iter()
        .map(|rec| {
            let line = line_of(rec);
            names
                .iter()
                .zip(rec.iter())
                .map(|(name, raw)| parse_field(path, line, name, raw))
                .collect()
        })
        .collect()
}

/// Reads a labeled CSV whose last column is `label` with values ±1.
pub fn read_labeled(path: &Path) -> Result<LabeledDataset> {
    let mut reader = open(path, true)?;
    let names = header(path, &mut reader)?;
    if names.last().map(String::as_str) != Some("label") {
        return Err(invalid(path, 1, "the last header column must be 'label'"));
    }
    if names.len() < 2 {
        return Err(invalid(path, 1, "need at least one feature column before 'label'"));
    }
    let recs = records(path, &mut reader)?;
    if recs.is_empty() {
        return Err(CliError::Validation(format!("{}: no examples", path.display())));
    }
    let d = names.len() - 1;
    let mut labels = Vec::with_capacity(recs.len());
    for rec in &recs {
        check_width(path, rec, names.len())?;
        let raw = &rec[d];
        let v = parse_field(path, line_of(rec), "label", raw)?;
        let label = if v == 1.0 {
            Label::Positive
        } else if v == -1.0 {
            Label::Negative
        } else {
            return Err(invalid(path, line_of(rec), format!("label must be -1 or +1, got '{raw}'")));
        };
        labels.push(label);
    }
    let rows = feature_rows(path, &names[..d], &recs)?;
    let features = rows.into_iter().map(FeatureVector::new).collect::<mltrp::Result<Vec<_>>>()?;
    Ok(LabeledDataset::new(features, labels)?)
}

/// Reads graph-node features.
pub fn read_nodes(path: &Path) -> Result<NodeSet> {
    let mut reader = open(path, true)?;
    let names = header(path, &mut reader)?;
    let recs = records(path, &mut reader)?;
    if recs.is_empty() {
        return Err(CliError::Validation(format!("{}: no nodes", path.display())));
    }
    for rec in &recs {
        check_width(path, rec, names.len())?;
    }
    Ok(NodeSet::from_rows(feature_rows(path, &names, &recs)?)?)
}

/// Reads a square distance matrix; asymmetric entries are kept as given.
pub fn read_distances(path: &Path) -> Result<DistanceMatrix> {
    let mut reader = open(path, false)?;
    let recs = records(path, &mut reader)?;
    let m = recs.len();
    if m == 0 {
        return Err(CliError::Validation(format!("{}: empty distance matrix", path.display())));
    }
    let mut rows = Vec::with_capacity(m);
    for rec in &recs {
        check_width(path, rec, m)?;
        let line = line_of(rec);
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, raw)| parse_field(path, line, &format!("{}", j + 1), raw))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    DistanceMatrix::new(rows).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn feature_header(d: usize) -> String {
    (1..=d).map(|i| format!("f{i}")).collect::<Vec<_>>().join(",")
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

pub fn labeled_csv(data: &LabeledDataset) -> String {
    let mut out = format!("{},label\n", feature_header(data.dim()));
    for (x, y) in data.iter() {
        let _ = writeln!(out, "{},{}", join(x.coords()), y.sign());
    }
    out
}

pub fn nodes_csv(nodes: &NodeSet) -> String {
    let mut out = feature_header(nodes.dim());
    out.push('\n');
    for x in nodes.nodes() {
        out.push_str(&join(x.coords()));
        out.push('\n');
    }
    out
}

pub fn distances_csv(dist: &DistanceMatrix) -> String {
    dist.rows().map(|r| join(r) + "\n").collect()
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let wrap = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(wrap)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(wrap)?;
    tmp.write_all(contents).map_err(wrap)?;
    tmp.as_file().sync_all().map_err(wrap)?;
    tmp.persist(path).map_err(|e| wrap(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
