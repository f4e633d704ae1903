use serde::Serialize;

use super::config::Scheme;
use super::run::DropRecord;

/// Averages over drops for one `(scheme, snr, ε)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub eps: f64,
    pub drops: usize,
    pub failures: usize,
    pub cert_failures: usize,
    pub mean_worst_user_rate: f64,
    pub se_worst_user_rate: f64,
    pub mean_sum_rate: f64,
    pub se_sum_rate: f64,
    pub mean_ao_iters: f64,
}

/// Mean and sample standard error. A single value has zero error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn cell_order(a: &DropRecord, b: &DropRecord) -> std::cmp::Ordering {
    a.scheme
        .cmp(&b.scheme)
        .then(a.snr_db.total_cmp(&b.snr_db))
        .then(a.eps.total_cmp(&b.eps))
        .then(a.drop.cmp(&b.drop))
}

/// One summary per cell, sorted by scheme, SNR, then `ε`. Records are sorted
/// before summing, so the result does not depend on their input order.
pub fn aggregate(records: &[DropRecord]) -> Vec<Summary> {
    let mut sorted: Vec<&DropRecord> = records.iter().collect();
    sorted.sort_by(|a, b| cell_order(a, b));
    sorted
        .chunk_by(|a, b| a.scheme == b.scheme && a.snr_db == b.snr_db && a.eps == b.eps)
        .map(|cell| {
            let worst: Vec<f64> = cell.iter().map(|r| r.worst_user_rate).collect();
            let sum: Vec<f64> = cell.iter().map(|r| r.sum_rate).collect();
            let (mean_worst_user_rate, se_worst_user_rate) = mean_se(&worst);
            let (mean_sum_rate, se_sum_rate) = mean_se(&sum);
            Summary {
                scheme: cell[0].scheme,
                snr_db: cell[0].snr_db,
                eps: cell[0].eps,
                drops: cell.len(),
                failures: cell.iter().filter(|r| r.failed.is_some()).count(),
                cert_failures: cell.iter().filter(|r| !r.cert_ok).count(),
                mean_worst_user_rate,
                se_worst_user_rate,
                mean_sum_rate,
                se_sum_rate,
                mean_ao_iters: cell.iter().map(|r| r.ao_iters as f64).sum::<f64>() / cell.len() as f64,
            }
        })
        .collect()
}

/// The summary for one cell, if present.
pub fn find(summaries: &[Summary], scheme: Scheme, snr_db: f64, eps: f64) -> Option<&Summary> {
    summaries
        .iter()
        .find(|s| s.scheme == scheme && s.snr_db == snr_db && s.eps == eps)
}
