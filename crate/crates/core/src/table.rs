//! CSV output with a one-line schema marker ahead of the header row.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// Writes `# <schema>` followed by a header row and one row per record.
pub fn write_csv<W: Write, S: Serialize>(mut w: W, schema: &str, rows: &[S]) -> Result<()> {
    writeln!(w, "# {schema}")?;
    let mut writer = csv::Writer::from_writer(w);
    for row in rows {
        writer.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Same as [`write_csv`] but emits the header even with zero rows.
pub fn write_csv_with_header<W: Write, S: Serialize>(
    mut w: W,
    schema: &str,
    header: &[&str],
    rows: &[S],
) -> Result<()> {
    if rows.is_empty() {
        writeln!(w, "# {schema}")?;
        writeln!(w, "{}", header.join(","))?;
        return Ok(());
    }
    write_csv(w, schema, rows)
}
