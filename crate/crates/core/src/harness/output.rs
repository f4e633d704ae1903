use std::io::Write;
use std::path::{Path, PathBuf};

use super::aggregate::Summary;
use super::run::DropRecord;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 13] = [
    "scheme", "snr_db", "eps", "drop", "k", "l", "r", "C", "goodput", "worst_user_rate", "sum_rate", "ao_iters", "cert_ok",
];

pub const SUMMARY_HEADER: [&str; 11] = [
    "scheme",
    "snr_db",
    "eps",
    "drops",
    "failures",
    "cert_failures",
    "mean_worst_user_rate",
    "se_worst_user_rate",
    "mean_sum_rate",
    "se_sum_rate",
    "mean_ao_iters",
];

fn csv_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Paths written next to the main CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub traces: PathBuf,
}

impl OutputPaths {
    pub fn for_csv(csv: &Path) -> Self {
        let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
        OutputPaths {
            csv: csv.to_path_buf(),
            summary: csv.with_file_name(format!("{stem}.summary.csv")),
            traces: csv.with_file_name(format!("{stem}.traces.jsonl")),
        }
    }
}

/// Per-stream rows followed by one aggregate row per cell (`k = l = 0`,
/// `drop` = number of drops, rates are means).
pub fn write_csv<W: Write>(w: W, records: &[DropRecord], summaries: &[Summary]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for rec in records {
        for s in &rec.streams {
            out.write_record([
                rec.scheme.to_string(),
                rec.snr_db.to_string(),
                rec.eps.to_string(),
                rec.drop.to_string(),
                (s.k + 1).to_string(),
                (s.l + 1).to_string(),
                s.r.to_string(),
                s.c.to_string(),
                s.goodput.to_string(),
                rec.worst_user_rate.to_string(),
                rec.sum_rate.to_string(),
                rec.ao_iters.to_string(),
                rec.cert_ok.to_string(),
            ])?;
        }
    }
    for s in summaries {
        out.write_record([
            s.scheme.to_string(),
            s.snr_db.to_string(),
            s.eps.to_string(),
            s.drops.to_string(),
            "0".into(),
            "0".into(),
            String::new(),
            String::new(),
            String::new(),
            s.mean_worst_user_rate.to_string(),
            s.mean_sum_rate.to_string(),
            s.mean_ao_iters.to_string(),
            (s.cert_failures == 0).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(w: W, summaries: &[Summary]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_HEADER)?;
    for s in summaries {
        out.write_record([
            s.scheme.to_string(),
            s.snr_db.to_string(),
            s.eps.to_string(),
            s.drops.to_string(),
            s.failures.to_string(),
            s.cert_failures.to_string(),
            s.mean_worst_user_rate.to_string(),
            s.se_worst_user_rate.to_string(),
            s.mean_sum_rate.to_string(),
            s.se_sum_rate.to_string(),
            s.mean_ao_iters.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One JSON object per AO run, tagged with its drop and grid point.
pub fn write_traces<W: Write>(mut w: W, records: &[DropRecord]) -> std::io::Result<()> {
    for rec in records {
        if let Some(trace) = &rec.trace {
            let line = serde_json::json!({
                "drop": rec.drop,
                "scheme": rec.scheme,
                "snr_db": rec.snr_db,
                "eps": rec.eps,
                "converged": trace.converged,
                "failed": rec.failed,
                "records": trace.records,
            });
            writeln!(w, "{line}")?;
        }
    }
    w.flush()
}

/// Writes the CSV, summary and trace files; returns their paths.
pub fn write_all(csv_path: &Path, records: &[DropRecord], summaries: &[Summary]) -> Result<OutputPaths> {
    let paths = OutputPaths::for_csv(csv_path);
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| csv_err(dir, e))?;
    }
    let open = |p: &Path| std::fs::File::create(p).map(std::io::BufWriter::new).map_err(|e| csv_err(p, e));
    write_csv(open(&paths.csv)?, records, summaries).map_err(|e| csv_err(&paths.csv, e))?;
    write_summary(open(&paths.summary)?, summaries).map_err(|e| csv_err(&paths.summary, e))?;
    write_traces(open(&paths.traces)?, records).map_err(|e| csv_err(&paths.traces, e))?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::aggregate::aggregate;
    use crate::harness::config::Scheme;
    use crate::harness::run::StreamRecord;

    #[test]
    fn rows_and_aggregate_flags() {
        let rec = DropRecord {
            drop: 0,
            scheme: Scheme::MaxSinr,
            snr_db: 10.0,
            eps: 0.1,
            streams: vec![
                StreamRecord { k: 0, l: 0, r: 3.0, c: 3.5, goodput: 3.0 },
                StreamRecord { k: 1, l: 0, r: 3.0, c: 2.9, goodput: 0.0 },
            ],
            worst_user_rate: 0.0,
            sum_rate: 3.0,
            ao_iters: 0,
            cert_ok: true,
            failed: None,
            trace: None,
        };
        let recs = vec![rec];
        let mut buf = Vec::new();
        write_csv(&mut buf, &recs, &aggregate(&recs)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert_eq!(lines[1], "max_sinr,10,0.1,0,1,1,3,3.5,3,0,3,0,true");
        assert_eq!(lines[2], "max_sinr,10,0.1,0,2,1,3,2.9,0,0,3,0,true");
        assert_eq!(lines[3], "max_sinr,10,0.1,1,0,0,,,,0,3,0,true");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn sibling_paths() {
        let p = OutputPaths::for_csv(Path::new("out/run.csv"));
        assert_eq!(p.summary, Path::new("out/run.summary.csv"));
        assert_eq!(p.traces, Path::new("out/run.traces.jsonl"));
    }
}
