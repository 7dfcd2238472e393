//! CSV input and output.

use std::path::Path;

use dip_core::{Column, ColumnKind, DataTable};

use crate::error::CliError;
use crate::schema::Schema;

/// Raw CSV: header plus string cells, row-major.
pub struct RawCsv {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// 1-based line number of every row.
    pub lines: Vec<u64>,
}

pub fn read_csv(path: &Path) -> Result<RawCsv, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record?;
        lines.push(record.position().map_or(0, |p| p.line()));
        rows.push(record.iter().map(|s| s.trim().to_string()).collect());
    }
    Ok(RawCsv { headers, rows, lines })
}

/// Resolve columns against the schema and parse every cell.
pub fn to_table(raw: &RawCsv, schema: &Schema) -> Result<DataTable, CliError> {
    let mut columns = Vec::with_capacity(raw.headers.len());
    for h in &raw.headers {
        let spec = schema
            .column(h)
            .ok_or_else(|| CliError::Data(format!("column `{h}` is not declared in the schema")))?;
        columns.push(Column::new(h.clone(), spec.column_kind()?));
    }
    if let Some(extra) = schema.columns.iter().find(|c| !raw.headers.contains(&c.name)) {
        return Err(CliError::Data(format!(
            "schema column `{}` is missing from the input",
            extra.name
        )));
    }
    let mut data = vec![Vec::with_capacity(raw.rows.len()); columns.len()];
    for (row, line) in raw.rows.iter().zip(&raw.lines) {
        for (c, column) in columns.iter().enumerate() {
            let cell = &row[c];
            let at = || format!("line {line}, column `{}`", column.name);
            let value = match &column.kind {
                ColumnKind::Categorical(levels) => levels
                    .iter()
                    .position(|l| l == cell)
                    .ok_or_else(|| CliError::Data(format!("{}: unknown level `{cell}`", at())))?
                    as f64,
                _ => {
                    let v: f64 = cell
                        .parse()
                        .map_err(|_| CliError::Data(format!("{}: cannot parse `{cell}` as a number", at())))?;
                    if !v.is_finite() {
                        return Err(CliError::Data(format!("{}: value `{cell}` is not finite", at())));
                    }
                    v
                }
            };
            data[c].push(value);
        }
    }
    DataTable::new(columns, data).map_err(CliError::from)
}

pub fn format_value(kind: &ColumnKind, v: f64) -> String {
    match kind {
        ColumnKind::Categorical(levels) => levels[v as usize].clone(),
        _ => v.to_string(),
    }
}

pub fn write_table(table: &DataTable, path: &Path) -> Result<(), CliError> {
    let mut w =
        csv::Writer::from_path(path).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    w.write_record(table.columns().iter().map(|c| c.name.as_str()))?;
    for i in 0..table.n_rows() {
        w.write_record(
            table
                .columns()
                .iter()
                .enumerate()
                .map(|(c, col)| format_value(&col.kind, table.column(c)[i])),
        )?;
    }
    w.flush()?;
    Ok(())
}
