use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ensure_parent, Experiment, OutputFormat};
use crate::error::{Error, Result};

/// A row type with a fixed column order.
pub trait Record: Serialize {
    const HEADER: &'static [&'static str];
}

/// CSV header of the main table of `experiment`; for `single` the top-level
/// keys of the JSON report.
pub fn schema(experiment: Experiment) -> String {
    let columns: &[&str] = match experiment {
        Experiment::Fig1 => super::Fig1Row::HEADER,
        Experiment::Fig2 => super::Fig2Row::HEADER,
        Experiment::Fig3 => super::Fig3Row::HEADER,
        Experiment::Single => super::single::REPORT_KEYS,
    };
    columns.join(",")
}

/// `dir/stem_suffix.ext` next to `path`.
pub fn sidecar_path(path: &Path, suffix: &str, format: OutputFormat) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".to_owned());
    path.with_file_name(format!("{stem}_{suffix}.{}", format.extension()))
}

/// Write `rows` as CSV (header always present, `\n` line endings) or as a
/// JSON array.
pub fn write_rows<T: Record>(path: &Path, format: OutputFormat, rows: &[T]) -> Result<()> {
    ensure_parent(path)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        OutputFormat::Csv => {
            let mut writer = csv::WriterBuilder::new()
                .has_headers(false)
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut out);
            writer.write_record(T::HEADER)?;
            for row in rows {
                writer.serialize(row)?;
            }
            writer.flush().map_err(|e| Error::io(path, e))?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, rows)?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::*;

    fn header_of<T: Record>(row: &T) -> String {
        let mut writer = csv::WriterBuilder::new()
            .has_headers(true)
            .from_writer(vec![]);
        writer.serialize(row).unwrap();
        let text = String::from_utf8(writer.into_inner().unwrap()).unwrap();
        text.lines().next().unwrap().to_owned()
    }

    #[test]
    fn headers_match_field_order() {
        let row = Fig1Row {
            gamma: 0.5,
            proportion_true: 1.0,
            n: 1,
        };
        assert_eq!(header_of(&row), Fig1Row::HEADER.join(","));
        let detail = Fig1Detail::default();
        assert_eq!(header_of(&detail), Fig1Detail::HEADER.join(","));
        assert_eq!(header_of(&Fig2Row::default()), Fig2Row::HEADER.join(","));
        assert_eq!(
            header_of(&Fig2Blackwell::default()),
            Fig2Blackwell::HEADER.join(",")
        );
        assert_eq!(
            header_of(&Fig2MeanBias::default()),
            Fig2MeanBias::HEADER.join(",")
        );
        assert_eq!(header_of(&Fig3Row::default()), Fig3Row::HEADER.join(","));
    }

    #[test]
    fn sidecar_names() {
        let p = sidecar_path(Path::new("out/run.csv"), "detail", OutputFormat::Csv);
        assert_eq!(p, PathBuf::from("out/run_detail.csv"));
        let p = sidecar_path(Path::new("run.json"), "blackwell", OutputFormat::Json);
        assert_eq!(p, PathBuf::from("run_blackwell.json"));
    }

    #[test]
    fn empty_table_still_has_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_rows::<Fig1Row>(&path, OutputFormat::Csv, &[]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{}\n", schema(Experiment::Fig1)));
    }
}
