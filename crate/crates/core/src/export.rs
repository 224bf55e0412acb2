//! CSV traces, JSON summaries and long-format plot data.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{OracleRecord, RunSummary, RunTrace, StepRecord};

const BASE_COLUMNS: [&str; 10] = [
    "t",
    "f_t",
    "pi_t",
    "q_t",
    "accuracy",
    "drift_rate",
    "delta_t",
    "ghat",
    "lambda_t",
    "update_grad_norm",
];
const ORACLE_COLUMNS: [&str; 3] = ["grad_norm_true", "drift_loss", "pool_loss"];

// Shortest representation that parses back to the same bits.
fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Header of a trace with `k` composition columns.
pub fn trace_header(k: usize, oracle: bool) -> Vec<String> {
    let mut h: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    h.extend((0..k).map(|i| format!("comp_{i}")));
    if oracle {
        h.extend(ORACLE_COLUMNS.iter().map(|s| s.to_string()));
    }
    h
}

pub fn write_trace_csv(trace: &RunTrace, path: &Path) -> Result<()> {
    let k = trace.records.first().map_or(0, |r| r.composition.len());
    let oracle = trace.has_oracle();
    let mut w = csv::Writer::from_writer(create(path)?);
    let csv_err = |e: csv::Error| Error::format(path, e);
    w.write_record(trace_header(k, oracle)).map_err(csv_err)?;
    for r in &trace.records {
        let mut row = vec![
            r.t.to_string(),
            fmt(r.f_t),
            u8::from(r.pi_t).to_string(),
            fmt(r.q_t),
            fmt(r.accuracy),
            fmt(r.drift_rate),
            fmt(r.delta_t),
            fmt(r.ghat),
            fmt(r.lambda_t),
            fmt(r.update_grad_norm),
        ];
        row.extend(r.composition.iter().map(|&c| fmt(c)));
        if let Some(o) = r.oracle.filter(|_| oracle) {
            row.extend([fmt(o.grad_norm_true), fmt(o.drift_loss), fmt(o.pool_loss)]);
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<StepRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rd = csv::Reader::from_reader(file);
    let bad = |m: String| Error::format(path, m);
    let header: Vec<String> = rd
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < BASE_COLUMNS.len() || header[..BASE_COLUMNS.len()] != BASE_COLUMNS {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let k = header.iter().filter(|h| h.starts_with("comp_")).count();
    let oracle = header.len() == BASE_COLUMNS.len() + k + ORACLE_COLUMNS.len();
    if header.len() != BASE_COLUMNS.len() + k + if oracle { ORACLE_COLUMNS.len() } else { 0 } {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}: column {}: {e}", line + 2, header[i])))
        };
        let t = rec[0]
            .parse::<usize>()
            .map_err(|e| bad(format!("row {}: t: {e}", line + 2)))?;
        let pi_t = match &rec[2] {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("row {}: pi_t must be 0 or 1, got {other}", line + 2))),
        };
        let b = BASE_COLUMNS.len();
        let composition = (b..b + k).map(num).collect::<Result<Vec<_>>>()?;
        let oracle = if oracle {
            Some(OracleRecord {
                grad_norm_true: num(b + k)?,
                drift_loss: num(b + k + 1)?,
                pool_loss: num(b + k + 2)?,
            })
        } else {
            None
        };
        out.push(StepRecord {
            t,
            f_t: num(1)?,
            pi_t,
            q_t: num(3)?,
            accuracy: num(4)?,
            drift_rate: num(5)?,
            delta_t: num(6)?,
            ghat: num(7)?,
            lambda_t: num(8)?,
            update_grad_norm: num(9)?,
            composition,
            oracle,
        });
    }
    Ok(out)
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::format(path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| Error::format(path, e))
}

#[derive(Serialize, Deserialize)]
struct TraceMeta {
    config_digest: String,
    summary: RunSummary,
}

/// Path of the JSON summary that accompanies a CSV trace.
pub fn summary_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes the trace as CSV plus its summary as JSON next to it.
pub fn export_trace(trace: &RunTrace, csv_path: &Path) -> Result<()> {
    write_trace_csv(trace, csv_path)?;
    let meta = TraceMeta {
        config_digest: trace.config_digest.clone(),
        summary: trace.summary.clone(),
    };
    write_json(&meta, &summary_path(csv_path))
}

pub fn import_trace(csv_path: &Path) -> Result<RunTrace> {
    let records = read_trace_csv(csv_path)?;
    let meta: TraceMeta = read_json(&summary_path(csv_path))?;
    Ok(RunTrace {
        config_digest: meta.config_digest,
        records,
        summary: meta.summary,
    })
}

/// File stem for an episode's outputs.
pub fn trace_stem(summary: &RunSummary) -> String {
    let clean = |s: &str| {
        s.chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect::<String>()
    };
    format!("{}__{}__seed{}", clean(&summary.policy), clean(&summary.schedule), summary.seed)
}

/// Long-format series for plotting: one row per (episode, step, series).
/// Series are accuracy, loss, cumulative update rate, queue and each
/// composition share.
pub fn write_plot_data<'a, I>(traces: I, path: &Path) -> Result<()>
where
    I: IntoIterator<Item = &'a RunTrace>,
{
    let mut w = csv::Writer::from_writer(create(path)?);
    let csv_err = |e: csv::Error| Error::format(path, e);
    w.write_record(["policy", "schedule", "seed", "t", "series", "value"])
        .map_err(csv_err)?;
    for trace in traces {
        let s = &trace.summary;
        let seed = s.seed.to_string();
        let mut updates = 0usize;
        for r in &trace.records {
            updates += usize::from(r.pi_t);
            let t = r.t.to_string();
            let mut series = vec![
                ("loss".to_string(), r.f_t),
                ("update_rate".to_string(), updates as f64 / (r.t + 1) as f64),
                ("queue".to_string(), r.q_t),
            ];
            if !r.accuracy.is_nan() {
                series.push(("accuracy".to_string(), r.accuracy));
            }
            series.extend(r.composition.iter().enumerate().map(|(k, &c)| (format!("comp_{k}"), c)));
            for (name, v) in series {
                w.write_record([s.policy.as_str(), &s.schedule, &seed, &t, &name, &fmt(v)])
                    .map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per step: `t,drift_rate,delta_t,comp_0..`.
pub fn write_schedule_preview(preview: &crate::harness::SchedulePreview, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let csv_err = |e: csv::Error| Error::format(path, e);
    let k = preview.composition.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string(), "drift_rate".into(), "delta_t".into()];
    header.extend((0..k).map(|i| format!("comp_{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for (t, comp) in preview.composition.iter().enumerate() {
        let mut row = vec![t.to_string(), fmt(preview.drift_rate[t]), fmt(preview.delta[t])];
        row.extend(comp.iter().map(|&c| fmt(c)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
