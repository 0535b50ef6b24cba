//! Side-by-side table of finished runs, with mean and standard deviation per
//! label when a label has several runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::output::{csv_string, fmt_f64, METRICS_FILE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub dir: PathBuf,
    pub label: String,
    pub method: String,
    pub seed: u64,
    pub m: usize,
    pub hv: f64,
    pub emd: Option<f64>,
    pub mean_log_likelihood: f64,
    pub pct_stationary: f64,
}

fn parse_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Reads the `metrics.csv` of one run directory.
pub fn load_run(dir: &Path) -> Result<RunRow> {
    let path = dir.join(METRICS_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_err(&path, e.to_string()))?
        .clone();
    let row = match reader.records().next() {
        Some(r) => r.map_err(|e| parse_err(&path, e.to_string()))?,
        None => return Err(parse_err(&path, "missing data row")),
    };
    let field = |name: &str| -> Result<&str> {
        header
            .iter()
            .position(|h| h == name)
            .and_then(|i| row.get(i))
            .ok_or_else(|| parse_err(&path, format!("missing column `{name}`")))
    };
    let num = |name: &str| -> Result<f64> {
        field(name)?
            .parse()
            .map_err(|_| parse_err(&path, format!("column `{name}` is not a number")))
    };
    let int = |name: &str| -> Result<u64> {
        field(name)?
            .parse()
            .map_err(|_| parse_err(&path, format!("column `{name}` is not an integer")))
    };
    let emd = match field("emd")? {
        "" => None,
        _ => Some(num("emd")?),
    };
    Ok(RunRow {
        dir: dir.to_path_buf(),
        label: field("label")?.to_string(),
        method: field("method")?.to_string(),
        seed: int("seed")?,
        m: int("m")? as usize,
        hv: num("hv")?,
        emd,
        mean_log_likelihood: num("mean_log_likelihood")?,
        pct_stationary: num("pct_stationary")?,
    })
}

/// Sample mean and standard deviation; the deviation is zero for one value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

const HEADER: [&str; 9] = [
    "kind",
    "label",
    "method",
    "seed",
    "m",
    "hv",
    "emd",
    "mean_log_likelihood",
    "pct_stationary",
];

/// CSV with one `run` row per directory followed by an `aggregate` row of
/// `mean±std` for every label that has at least two runs.
pub fn compare(dirs: &[PathBuf]) -> Result<String> {
    if dirs.is_empty() {
        return Err(Error::Empty("run directories"));
    }
    let rows = dirs
        .iter()
        .map(|d| load_run(d))
        .collect::<Result<Vec<_>>>()?;
    let m = rows[0].m;
    if let Some(r) = rows.iter().find(|r| r.m != m) {
        return Err(Error::InvalidArgument(format!(
            "cannot compare runs with different objective counts: {} has m={}, {} has m={m}",
            r.dir.display(),
            r.m,
            rows[0].dir.display()
        )));
    }

    let mut table = vec![HEADER.map(String::from).to_vec()];
    for r in &rows {
        table.push(vec![
            "run".into(),
            r.label.clone(),
            r.method.clone(),
            r.seed.to_string(),
            r.m.to_string(),
            fmt_f64(r.hv),
            r.emd.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.mean_log_likelihood),
            fmt_f64(r.pct_stationary),
        ]);
    }

    let mut groups: BTreeMap<&str, Vec<&RunRow>> = BTreeMap::new();
    for r in &rows {
        groups.entry(r.label.as_str()).or_default().push(r);
    }
    let pm = |vals: Vec<f64>| {
        let (mean, std) = mean_std(&vals);
        format!("{}±{}", fmt_f64(mean), fmt_f64(std))
    };
    for (label, group) in groups.into_iter().filter(|(_, g)| g.len() >= 2) {
        let method = if group.iter().all(|r| r.method == group[0].method) {
            group[0].method.clone()
        } else {
            "mixed".into()
        };
        let emds: Option<Vec<f64>> = group.iter().map(|r| r.emd).collect();
        table.push(vec![
            "aggregate".into(),
            label.to_string(),
            method,
            format!("n={}", group.len()),
            m.to_string(),
            pm(group.iter().map(|r| r.hv).collect()),
            emds.map(pm).unwrap_or_default(),
            pm(group.iter().map(|r| r.mean_log_likelihood).collect()),
            pm(group.iter().map(|r| r.pct_stationary).collect()),
        ]);
    }
    Ok(csv_string(table))
}
