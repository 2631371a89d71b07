//! CSV input and output of datasets and posteriors.

use std::fs::File;
use std::path::Path;

use lcmix_core::{Dataset, Posteriors};

use crate::colspec::{ColumnSpec, Role};
use crate::error::{CliError, CliResult};

/// A dataset read from CSV with the bookkeeping of dropped rows.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub data: Dataset,
    pub rows_read: usize,
    /// Rows with an empty or `NA` value in a used column.
    pub dropped_missing: usize,
    /// Rows whose external value was not positive under the log directive.
    pub dropped_nonpositive: usize,
}

impl Ingested {
    pub fn summary(&self) -> String {
        format!(
            "read {} rows, dropped {} with missing values and {} with non-positive external values; {} used",
            self.rows_read,
            self.dropped_missing,
            self.dropped_nonpositive,
            self.data.n()
        )
    }
}

fn is_missing(v: &str) -> bool {
    let v = v.trim();
    v.is_empty() || v.eq_ignore_ascii_case("na")
}

/// Reads `csv_path` according to `spec`. `force_log` applies the log
/// transform even when the spec does not ask for it.
pub fn ingest(csv_path: &Path, spec: &ColumnSpec, force_log: bool) -> CliResult<Ingested> {
    let file = File::open(csv_path).map_err(|e| CliError::io(csv_path, e))?;
    ingest_reader(file, spec, force_log).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", csv_path.display())),
        other => other,
    })
}

pub fn ingest_reader(reader: impl std::io::Read, spec: &ColumnSpec, force_log: bool) -> CliResult<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| CliError::input(format!("cannot read header: {e}")))?.clone();
    let position = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::input(format!("column `{name}` not found in header")))
    };
    let items: Vec<_> = spec.indicators().collect();
    let item_cols = items.iter().map(|c| position(&c.name)).collect::<CliResult<Vec<_>>>()?;
    let ext = spec.external();
    let ext_col = position(&ext.name)?;
    let log = ext.log || force_log;

    let mut rows = Vec::new();
    let mut z = Vec::new();
    let mut rows_read = 0;
    let mut dropped_missing = 0;
    let mut dropped_nonpositive = 0;
    for (i, record) in rdr.records().enumerate() {
        // Line 1 is the header.
        let line = i + 2;
        let record = record.map_err(|e| CliError::input(format!("line {line}: {e}")))?;
        rows_read += 1;
        let used = item_cols.iter().chain(std::iter::once(&ext_col));
        if used.map(|&c| record.get(c).unwrap_or("")).any(is_missing) {
            dropped_missing += 1;
            continue;
        }
        let mut codes = Vec::with_capacity(items.len());
        for (def, &col) in items.iter().zip(&item_cols) {
            let label = &record[col];
            let code = def.code_of(label).ok_or_else(|| {
                CliError::input(format!(
                    "line {line}, column `{}`: unknown category label `{label}` (expected one of {})",
                    def.name,
                    def.labels.join(", ")
                ))
            })?;
            codes.push(code);
        }
        let raw = &record[ext_col];
        let value: f64 = raw.parse().map_err(|_| {
            CliError::input(format!("line {line}, column `{}`: `{raw}` is not a number", ext.name))
        })?;
        if !value.is_finite() {
            return Err(CliError::input(format!("line {line}, column `{}`: value is not finite", ext.name)));
        }
        let value = if log {
            if value <= 0.0 {
                dropped_nonpositive += 1;
                continue;
            }
            value.ln()
        } else {
            value
        };
        rows.push(codes);
        z.push(value);
    }
    if rows.is_empty() {
        return Err(CliError::input(format!(
            "no usable rows ({rows_read} read, {dropped_missing} missing, {dropped_nonpositive} non-positive)"
        )));
    }
    let cards: Vec<usize> = items.iter().map(|c| c.kind.n_categories().unwrap_or(0)).collect();
    let names: Vec<String> = items
        .iter()
        .map(|c| c.name.clone())
        .chain(std::iter::once(ext.name.clone()))
        .collect();
    let data = Dataset::new(rows, cards, z, names)?;
    Ok(Ingested {
        data,
        rows_read,
        dropped_missing,
        dropped_nonpositive,
    })
}

/// Writes `data` with integer codes as labels, matching
/// [`ColumnSpec::simulated`] for binary items.
pub fn write_dataset(data: &Dataset, path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let wrap = |e: csv::Error| CliError::input(format!("{}: {e}", path.display()));
    w.write_record(data.column_names()).map_err(wrap)?;
    let mut record = Vec::with_capacity(data.n_items() + 1);
    for i in 0..data.n() {
        record.clear();
        record.extend(data.row(i).iter().map(|c| c.to_string()));
        // `{}` on f64 prints the shortest string that parses back exactly.
        record.push(format!("{}", data.z()[i]));
        w.write_record(&record).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Column spec for a dataset written by [`write_dataset`].
pub fn spec_for(data: &Dataset) -> ColumnSpec {
    let mut spec = ColumnSpec::simulated(data.n_items());
    let names = data.column_names();
    for (def, (name, &k)) in spec.columns.iter_mut().zip(names.iter().zip(data.cardinalities())) {
        def.name = name.clone();
        if k != 2 {
            def.kind = crate::colspec::ColumnType::Nominal(k);
        }
        def.labels = (0..k).map(|c| c.to_string()).collect();
    }
    let ext = spec.columns.last_mut().expect("external column");
    debug_assert_eq!(ext.role, Role::External);
    ext.name = names[data.n_items()].clone();
    spec
}

/// Posterior probabilities with the modal class, one row per observation.
pub fn write_posteriors(post: &Posteriors, path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let wrap = |e: csv::Error| CliError::input(format!("{}: {e}", path.display()));
    let s = post.n_classes();
    let mut header: Vec<String> = (1..=s).map(|c| format!("class{c}")).collect();
    header.push("modal".into());
    w.write_record(&header).map_err(wrap)?;
    let modal = lcmix_core::diagnostics::modal_assignment(post);
    for (i, row) in post.rows().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|p| format!("{p}")).collect();
        rec.push((modal.labels[i] + 1).to_string());
        w.write_record(&rec).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads a file written by [`write_posteriors`].
pub fn read_posteriors(path: &Path) -> CliResult<Posteriors> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let header = rdr.headers().map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let s = header.iter().filter(|h| h.starts_with("class")).count();
    if s == 0 {
        return Err(CliError::input(format!("{}: no class columns", path.display())));
    }
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        for c in 0..s {
            let v: f64 = rec[c].parse().map_err(|_| {
                CliError::input(format!("{}: line {}: bad probability `{}`", path.display(), i + 2, &rec[c]))
            })?;
            values.push(v);
        }
    }
    Ok(Posteriors::from_rows(s, values)?)
}
