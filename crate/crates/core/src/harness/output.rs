//! Run artifacts: CSV samples and metrics, JSON-lines traces, atomic writes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::sampler::{StepSummary, TraceRecord};

pub const SAMPLES_FILE: &str = "samples.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const STEPS_FILE: &str = "steps.csv";
pub const CONFIG_FILE: &str = "config.toml";

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Renders rows as CSV, quoting fields only where needed.
pub(crate) fn csv_string<I, R>(rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(row).expect("rows of one table share a width");
    }
    let bytes = w.into_inner().expect("writing to memory cannot fail");
    String::from_utf8(bytes).expect("fields are UTF-8")
}

pub fn samples_csv(positions: &[Vec<f64>], values: &[Vec<f64>], log_likelihoods: &[f64]) -> String {
    let d = positions.first().map_or(0, Vec::len);
    let m = values.first().map_or(0, Vec::len);
    let mut header = vec!["particle".to_string()];
    header.extend((0..d).map(|j| format!("x{j}")));
    header.extend((0..m).map(|k| format!("f{k}")));
    header.push("log_likelihood".into());
    let rows = positions.iter().zip(values).zip(log_likelihoods).enumerate().map(|(i, ((x, f), ll))| {
        let mut row = vec![i.to_string()];
        row.extend(x.iter().chain(f).chain([ll]).map(|v| fmt_f64(*v)));
        row
    });
    csv_string(std::iter::once(header).chain(rows))
}

/// Identification of a run alongside its metric report.
#[derive(Debug, Clone, PartialEq)]
pub struct RunHeader<'a> {
    pub label: &'a str,
    pub method: &'a str,
    pub seed: u64,
    pub fallbacks: usize,
}

pub fn metrics_csv(header: &RunHeader<'_>, r: &MetricReport) -> String {
    let m = r.hv_reference.len();
    let mut cols: Vec<String> = ["label", "method", "seed", "m", "n_points", "hv", "hv_std_error"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend((0..m).map(|k| format!("hv_ref_{k}")));
    cols.extend(
        [
            "emd",
            "mean_front_distance",
            "mean_log_likelihood",
            "pct_stationary",
            "n_nondominated",
            "spread",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    cols.extend((0..m).map(|k| format!("mean_f{k}")));
    cols.push("fallbacks".into());

    let mut row = vec![
        header.label.to_string(),
        header.method.to_string(),
        header.seed.to_string(),
        m.to_string(),
        r.n_points.to_string(),
        fmt_f64(r.hv),
        fmt_f64(r.hv_std_error),
    ];
    row.extend(r.hv_reference.iter().map(|v| fmt_f64(*v)));
    row.extend([
        fmt_opt(r.emd),
        fmt_opt(r.mean_front_distance),
        fmt_f64(r.mean_log_likelihood),
        fmt_f64(r.pct_stationary),
        r.n_nondominated.to_string(),
        fmt_f64(r.spread),
    ]);
    row.extend(r.mean_objectives.iter().map(|v| fmt_f64(*v)));
    row.push(header.fallbacks.to_string());
    csv_string([cols, row])
}

pub fn trace_jsonl(records: &[TraceRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        let line = serde_json::to_string(r)
            .map_err(|e| Error::InvalidArgument(format!("trace serialization: {e}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

pub fn steps_csv(summaries: &[StepSummary]) -> String {
    let header = ["step", "active", "neg_inf", "fallbacks", "mean_mgd_norm"].map(String::from);
    let rows = summaries.iter().map(|s| {
        [
            s.step.to_string(),
            s.active_count.to_string(),
            s.neg_inf_count.to_string(),
            s.fallbacks.to_string(),
            fmt_f64(s.mean_mgd_norm),
        ]
    });
    csv_string(std::iter::once(header).chain(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips() {
        for v in [0.1, 1.0, 1e-20, 5.0 / 96.0, -3.25e21, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_f64(0.1), "0.1");
    }

    #[test]
    fn samples_layout() {
        let csv = samples_csv(&[vec![1.0, 2.0]], &[vec![0.5]], &[-1.5]);
        assert_eq!(csv, "particle,x0,x1,f0,log_likelihood\n0,1.0,2.0,0.5,-1.5\n");
    }

    #[test]
    fn fields_with_separators_are_quoted() {
        let csv = csv_string([["a,b", "say \"hi\"", "plain"]]);
        assert_eq!(csv, "\"a,b\",\"say \"\"hi\"\"\",plain\n");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
