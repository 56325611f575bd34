//! Writing and reading run artifacts.
//!
//! An output directory holds:
//!
//! * `metrics.json`: a [`MetricsReport`] (see `docs/metrics.schema.json`).
//! * `<label>.rep<r>.samples.csv`: one row per collected state. The leading
//!   columns index the row (`path`, plus `particle` for the double well), the
//!   rest are coordinates: `x` or `x0, x1, …`, attribute names for bridge
//!   regression, `a_i_k, b_k_j, s_i_j` factor entries for denoising.
//! * `<label>.rep<r>.hist.csv`: `column, bin_lower, bin_upper, count, density`
//!   when histograms were requested.
//! * `<label>.rep<r>.pgm`, `clean.pgm`, `corrupted.pgm` for denoising.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so reading
//! a samples file back gives bit-identical values.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::file_stem;
use crate::error::{HarnessError, Result};
use crate::experiments::{ExperimentOutput, RunOutput};
use crate::report::{ColumnHistogram, MetricsReport, Provenance, RunEntry, SampleTable};

pub const METRICS_FILE: &str = "metrics.json";

fn run_stem(run: &RunOutput) -> String {
    format!("{}.rep{}", file_stem(&run.label), run.repetition)
}

/// The metrics report for `output`, naming the files [`emit_artifacts`] writes.
pub fn metrics_report(output: &ExperimentOutput) -> MetricsReport {
    let runs = output
        .runs
        .iter()
        .map(|run| {
            let stem = run_stem(run);
            RunEntry {
                label: run.label.clone(),
                repetition: run.repetition,
                stream: run.stream,
                samples_file: format!("{stem}.samples.csv"),
                histogram_file: (!run.histograms.is_empty()).then(|| format!("{stem}.hist.csv")),
                image_file: run.image.as_ref().map(|_| format!("{stem}.pgm")),
                metrics: run.metrics.clone(),
            }
        })
        .collect();
    MetricsReport {
        experiment: output.config.experiment.id().to_string(),
        provenance: Provenance::for_config(&output.config),
        runs,
    }
}

fn csv_error(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_samples_csv(table: &SampleTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    w.write_record(&table.columns).map_err(csv_error(path))?;
    let mut record = Vec::with_capacity(table.width());
    for row in table.rows() {
        record.clear();
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record).map_err(csv_error(path))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Reads a samples file written by [`write_samples_csv`].
///
/// `index_columns` is taken from the header: `particle` and `path` lead the row.
pub fn read_samples_csv(path: &Path) -> Result<SampleTable> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error(path))?;
    let columns: Vec<String> = r.headers().map_err(csv_error(path))?.iter().map(str::to_owned).collect();
    let index_columns = columns.iter().take_while(|c| matches!(c.as_str(), "particle" | "path")).count();
    let mut values = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(csv_error(path))?;
        for field in record.iter() {
            let v = field.parse::<f64>().map_err(|_| qhmc_core::Error::Parse {
                path: path.to_path_buf(),
                line: line + 2,
                reason: format!("not a number: {field:?}"),
            })?;
            values.push(v);
        }
    }
    Ok(SampleTable {
        columns,
        index_columns,
        values,
    })
}

pub fn write_histogram_csv(histograms: &[ColumnHistogram], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    w.write_record(["column", "bin_lower", "bin_upper", "count", "density"]).map_err(csv_error(path))?;
    for h in histograms {
        let s = &h.summary;
        for (i, (count, density)) in s.counts.iter().zip(&s.density).enumerate() {
            w.write_record([
                h.column.clone(),
                s.edges[i].to_string(),
                s.edges[i + 1].to_string(),
                count.to_string(),
                density.to_string(),
            ])
            .map_err(csv_error(path))?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Writes every artifact of `output` into `dir`, creating it if needed.
/// Returns the paths written, metrics file last.
pub fn emit_artifacts(output: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let report = metrics_report(output);
    let mut written = Vec::new();
    for (run, entry) in output.runs.iter().zip(&report.runs) {
        let path = dir.join(&entry.samples_file);
        write_samples_csv(&run.samples, &path)?;
        written.push(path);
        if let Some(name) = &entry.histogram_file {
            let path = dir.join(name);
            write_histogram_csv(&run.histograms, &path)?;
            written.push(path);
        }
        if let (Some(name), Some(image)) = (&entry.image_file, &run.image) {
            let path = dir.join(name);
            image.write_pgm(&path)?;
            written.push(path);
        }
    }
    for (name, image) in &output.inputs {
        let path = dir.join(format!("{name}.pgm"));
        image.write_pgm(&path)?;
        written.push(path);
    }
    let path = dir.join(METRICS_FILE);
    fs::write(&path, report.to_json()).map_err(|e| HarnessError::io(&path, e))?;
    written.push(path);
    Ok(written)
}

pub fn read_metrics(path: &Path) -> Result<MetricsReport> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    MetricsReport::from_json(&text)
}
