//! Plain CSV output. Floats are written with 17 significant digits so every
//! value parses back to the identical double.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::ensemble::{EnsembleSummary, Method, ScanResult, SpikeStatistics};
use crate::model::{NetworkSpec, SimulationConfig};
use crate::observables::{ObservableSeries, WindowAverage};
use crate::stats::Histogram;
use crate::{Error, Result, C64};

pub const SERIES_HEADER: &str = "time,re_mean,im_mean,std_error,n_samples";
pub const HISTOGRAM_HEADER: &str = "bin_left,bin_right,probability";

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_lines(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{header}").map_err(io)?;
    for row in rows {
        writeln!(out, "{row}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn write_series(path: &Path, series: &ObservableSeries) -> Result<()> {
    let rows = (0..series.len()).map(|k| {
        format!(
            "{},{},{},{},{}",
            format_float(series.times[k]),
            format_float(series.mean[k].re),
            format_float(series.mean[k].im),
            format_float(series.std_error[k]),
            series.n_samples[k]
        )
    });
    write_lines(path, SERIES_HEADER, rows)
}

/// Reads a file written by [`write_series`]; the name is the file stem.
pub fn read_series(path: &Path) -> Result<ObservableSeries> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: String| Error::Config {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = BufReader::new(file).lines();
    let header = lines.next().transpose().map_err(|e| Error::io(path, e))?;
    if header.as_deref() != Some(SERIES_HEADER) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut series = ObservableSeries {
        name: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        times: Vec::new(),
        mean: Vec::new(),
        std_error: Vec::new(),
        n_samples: Vec::new(),
    };
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.split(',').collect();
        let float = |i: usize| -> Result<f64> {
            fields
                .get(i)
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| bad(format!("row {}: field {i} is not a number", k + 1)))
        };
        series.times.push(float(0)?);
        series.mean.push(C64::new(float(1)?, float(2)?));
        series.std_error.push(float(3)?);
        series.n_samples.push(
            fields
                .get(4)
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| bad(format!("row {}: bad sample count", k + 1)))?,
        );
    }
    Ok(series)
}

pub fn write_histogram(path: &Path, histogram: &Histogram) -> Result<()> {
    let rows = histogram.probability.iter().enumerate().map(|(k, p)| {
        format!(
            "{},{},{}",
            format_float(histogram.edges[k]),
            format_float(histogram.edges[k + 1]),
            format_float(*p)
        )
    });
    write_lines(path, HISTOGRAM_HEADER, rows)
}

/// One row per scanned value: value, window mean, its error and the number
/// of broken trajectories.
pub fn write_scan(path: &Path, scan: &ScanResult) -> Result<()> {
    let header = format!("{},re_mean,im_mean,std_error,n_trajectories,n_broken", scan.parameter.name());
    let rows = scan.points.iter().map(|p| {
        format!(
            "{},{},{},{},{},{}",
            format_float(p.value),
            format_float(p.average.mean.re),
            format_float(p.average.mean.im),
            format_float(p.average.std_error),
            p.average.n_trajectories,
            p.n_broken
        )
    });
    write_lines(path, &header, rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

/// Run metadata written next to the series files. Wall-clock time is left
/// out so that repeated runs produce identical files.
#[derive(Serialize)]
struct SummaryFile<'a> {
    method: Method,
    spec: &'a NetworkSpec,
    config: &'a SimulationConfig,
    spikes: &'a SpikeStatistics,
    window_averages: &'a [WindowAverage],
    histogram: Option<&'a Histogram>,
    files: Vec<String>,
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Writes `<name>.csv` for every series, the histogram if present, and
/// `summary.json`. Returns the paths written.
pub fn write_ensemble(dir: &Path, summary: &EnsembleSummary) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for series in summary.series.iter().chain(&summary.homodyne) {
        let path = dir.join(format!("{}.csv", series.name));
        write_series(&path, series)?;
        written.push(path);
    }
    if let Some(h) = &summary.histogram {
        let path = dir.join("histogram_current.csv");
        write_histogram(&path, h)?;
        written.push(path);
    }
    if let Some(h) = &summary.spikes.failure_histogram {
        let path = dir.join("histogram_failure_times.csv");
        write_histogram(&path, h)?;
        written.push(path);
    }
    let path = dir.join("summary.json");
    let files = written.iter().map(|p| file_name(p)).collect();
    write_json(
        &path,
        &SummaryFile {
            method: summary.method,
            spec: &summary.spec,
            config: &summary.config,
            spikes: &summary.spikes,
            window_averages: &summary.window_averages,
            histogram: summary.histogram.as_ref(),
            files,
        },
    )?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let series = ObservableSeries {
            name: "n_0".into(),
            times: vec![0.0, 0.1, 1.0 / 3.0],
            mean: vec![C64::new(std::f64::consts::PI, -1e-300), C64::new(1e300, 0.0), C64::new(-0.0, 5e-324)],
            std_error: vec![0.0, 0.123456789012345678, f64::MIN_POSITIVE],
            n_samples: vec![10, 9, 8],
        };
        let path = dir.path().join("n_0.csv");
        write_series(&path, &series).unwrap();
        let back = read_series(&path).unwrap();
        assert_eq!(back, series);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(SERIES_HEADER));
        assert!(text.contains("3.1415926535897931e0"));
    }

    #[test]
    fn histogram_rows() {
        let dir = tempfile::tempdir().unwrap();
        let h = Histogram::from_values(&[0.1, 0.6, 0.7], 2, (0.0, 1.0));
        let path = dir.path().join("h.csv");
        write_histogram(&path, &h).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], HISTOGRAM_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("5.0000000000000000e-1,1.0000000000000000e0,"));
    }

    #[test]
    fn bad_files_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "time,oops\n").unwrap();
        assert!(matches!(read_series(&path), Err(Error::Config { .. })));
        assert!(matches!(read_series(&dir.path().join("missing.csv")), Err(Error::Io { .. })));
    }
}
