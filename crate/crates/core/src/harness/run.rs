use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, Schedule, Scheme};
use crate::ao::{solve_max_min, AoConfig, AoTrace};
use crate::error::{Error, Result};
use crate::model::{derive_csi, generate_channels, sample_delta, stream_rng, ChannelSet, CsiView, RngPurpose, SystemDims, TransceiverSet};
use crate::sinr::{actual_sinr, mutual_info, stream_ids, worst_case_sinr};

/// Rates of one stream in one drop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamRecord {
    pub k: usize,
    pub l: usize,
    /// Scheduled rate from the SINR the transmitter believes in.
    pub r: f64,
    /// Mutual information at the true channel.
    pub c: f64,
    pub goodput: f64,
}

/// `r` if it fits under `c`, otherwise nothing gets through.
pub fn goodput(r: f64, c: f64) -> f64 {
    if r <= c {
        r
    } else {
        0.0
    }
}

/// Outcome of one scheme on one drop at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DropRecord {
    pub drop: usize,
    pub scheme: Scheme,
    pub snr_db: f64,
    pub eps: f64,
    pub streams: Vec<StreamRecord>,
    /// Smallest per-user goodput.
    pub worst_user_rate: f64,
    pub sum_rate: f64,
    pub ao_iters: usize,
    pub cert_ok: bool,
    /// Set when the scheme failed; its goodput then counts as zero.
    pub failed: Option<String>,
    #[serde(skip)]
    pub trace: Option<AoTrace>,
}

impl DropRecord {
    fn from_streams(drop: usize, scheme: Scheme, snr_db: f64, eps: f64, streams: Vec<StreamRecord>, users: usize) -> Self {
        let mut per_user = vec![0.0; users];
        for s in &streams {
            per_user[s.k] += s.goodput;
        }
        DropRecord {
            drop,
            scheme,
            snr_db,
            eps,
            worst_user_rate: per_user.iter().copied().fold(f64::INFINITY, f64::min),
            sum_rate: per_user.iter().sum(),
            streams,
            ao_iters: 0,
            cert_ok: true,
            failed: None,
            trace: None,
        }
    }
}

/// Seed of drop `d`, derived from the experiment seed.
pub fn drop_seed(seed: u64, d: usize) -> u64 {
    stream_rng(seed, RngPurpose::Drop, d as u64).next_u64()
}

/// Per-stream rates of a designed transceiver set.
pub fn evaluate(
    h: &ChannelSet,
    csi: &CsiView,
    tx: &TransceiverSet,
    noise: f64,
    schedule: Schedule,
) -> Result<Vec<StreamRecord>> {
    stream_ids(tx)
        .map(|s| {
            let believed = match schedule {
                Schedule::Nominal => actual_sinr(&csi.estimates, tx, s, noise)?,
                Schedule::WorstCase => worst_case_sinr(csi, tx, s, noise)?.max(0.0),
            };
            let r = mutual_info(believed)?;
            let c = mutual_info(actual_sinr(h, tx, s, noise)?)?;
            Ok(StreamRecord {
                k: s.k,
                l: s.l,
                r,
                c,
                goodput: goodput(r, c),
            })
        })
        .collect()
}

fn design(scheme: Scheme, csi: &CsiView, dims: &SystemDims, cfg: &ExperimentConfig, seed: u64) -> std::result::Result<(TransceiverSet, Option<AoTrace>), (Error, Option<AoTrace>)> {
    match scheme.baseline() {
        Some(kind) => kind
            .run(csi, dims, cfg.baseline_sweeps)
            .map(|tx| (tx, None))
            .map_err(|e| (e, None)),
        None => {
            let ao = AoConfig {
                max_iters: cfg.ao_max_iters,
                seed,
                ..AoConfig::default()
            };
            solve_max_min(csi, dims, &ao)
                .map(|(tx, trace)| (tx, Some(trace)))
                .map_err(|e| (e.error, Some(e.trace)))
        }
    }
}

/// Every scheme at every grid point for drop `d`. The true channel is shared
/// by all grid points; the error direction is shared across `ε` values.
pub fn run_drop(cfg: &ExperimentConfig, d: usize) -> Result<Vec<DropRecord>> {
    let seed = drop_seed(cfg.seed, d);
    let shape = cfg.dims(cfg.snr_db[0], 0.0)?;
    let h = generate_channels(&shape, seed);
    let users = cfg.k;
    let mut out = Vec::new();
    for &eps in &cfg.eps {
        let delta = sample_delta(&shape.with_eps(eps), seed, cfg.delta_mode);
        let csi = derive_csi(&h, &delta, eps)?;
        for &snr_db in &cfg.snr_db {
            let dims = cfg.dims(snr_db, eps)?;
            for &scheme in &cfg.schemes {
                let designed = design(scheme, &csi, &dims, cfg, seed);
                let rec = match designed.and_then(|(tx, trace)| match evaluate(&h, &csi, &tx, dims.noise, cfg.schedule) {
                    Ok(streams) => Ok((streams, trace)),
                    Err(e) => Err((e, trace)),
                }) {
                    Ok((streams, trace)) => {
                        let mut rec = DropRecord::from_streams(d, scheme, snr_db, eps, streams, users);
                        if let Some(t) = &trace {
                            rec.ao_iters = t.records.len();
                            rec.cert_ok = t.cert_ok();
                        }
                        rec.trace = trace;
                        rec
                    }
                    Err((e, trace)) => {
                        log::warn!("drop {d} {scheme} snr={snr_db} eps={eps}: {e}");
                        let zeros = (0..users)
                            .flat_map(|k| (0..cfg.l).map(move |l| StreamRecord { k, l, r: 0.0, c: 0.0, goodput: 0.0 }))
                            .collect();
                        let mut rec = DropRecord::from_streams(d, scheme, snr_db, eps, zeros, users);
                        rec.ao_iters = trace.as_ref().map_or(0, |t| t.records.len());
                        rec.cert_ok = false;
                        rec.failed = Some(e.to_string());
                        rec.trace = trace;
                        rec
                    }
                };
                out.push(rec);
            }
        }
    }
    Ok(out)
}

/// Worker count: `IC_MAXMIN_THREADS` when set, otherwise rayon's default.
pub fn thread_count() -> Option<usize> {
    std::env::var("IC_MAXMIN_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs every drop on a worker pool sized by [`thread_count`]; records come
/// back in drop order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<DropRecord>> {
    run_experiment_on(cfg, thread_count())
}

/// As [`run_experiment`] with an explicit worker count.
pub fn run_experiment_on(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<DropRecord>> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let per_drop: Vec<Result<Vec<DropRecord>>> = pool.install(|| (0..cfg.drops).into_par_iter().map(|d| run_drop(cfg, d)).collect());
    let mut out = Vec::new();
    for r in per_drop {
        out.extend(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn cfg(eps: Vec<f64>) -> ExperimentConfig {
        ExperimentConfig {
            k: 3,
            m: 2,
            n: 2,
            l: 1,
            snr_db: vec![10.0],
            eps,
            drops: 2,
            schemes: Scheme::ALL.to_vec(),
            seed: 5,
            out: PathBuf::from("unused.csv"),
            delta_mode: Default::default(),
            schedule: Schedule::Nominal,
            baseline_sweeps: 10,
            ao_max_iters: 50,
        }
    }

    #[test]
    fn goodput_rule() {
        assert_eq!(goodput(3.0, 3.5), 3.0);
        assert_eq!(goodput(3.0, 2.9), 0.0);
        assert_eq!(goodput(3.0, 3.0), 3.0);
    }

    #[test]
    fn perfect_csi_schedules_capacity() {
        let recs = run_drop(&cfg(vec![0.0]), 0).unwrap();
        assert_eq!(recs.len(), 4);
        for rec in &recs {
            assert!(rec.failed.is_none(), "{:?}", rec.failed);
            for s in &rec.streams {
                assert_eq!(s.r, s.c);
                assert_eq!(s.goodput, s.r);
            }
        }
    }

    #[test]
    fn records_are_consistent() {
        let recs = run_drop(&cfg(vec![0.05, 0.1]), 1).unwrap();
        assert_eq!(recs.len(), 8);
        for rec in &recs {
            for s in &rec.streams {
                assert_eq!(s.goodput, goodput(s.r, s.c));
            }
            let per_user: Vec<f64> = (0..3)
                .map(|k| rec.streams.iter().filter(|s| s.k == k).map(|s| s.goodput).sum())
                .collect();
            assert_eq!(rec.sum_rate, per_user.iter().sum::<f64>());
            assert_eq!(rec.worst_user_rate, per_user.iter().copied().fold(f64::INFINITY, f64::min));
            if rec.scheme == Scheme::Proposed {
                assert!(rec.ao_iters >= 1);
            }
        }
    }

    #[test]
    fn failed_scheme_is_recorded_not_fatal() {
        let mut c = cfg(vec![0.05]);
        c.k = 2;
        let recs = run_drop(&c, 0).unwrap();
        let ia = recs.iter().find(|r| r.scheme == Scheme::IA3).unwrap();
        assert!(ia.failed.as_deref().unwrap().contains("K=3"));
        assert_eq!(ia.sum_rate, 0.0);
        assert!(!ia.cert_ok);
        assert!(recs.iter().filter(|r| r.scheme != Scheme::IA3).all(|r| r.failed.is_none()));
    }

    #[test]
    fn deterministic_and_order_preserving() {
        let c = cfg(vec![0.05]);
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().map(|r| r.drop).collect::<Vec<_>>(), vec![0, 0, 0, 0, 1, 1, 1, 1]);
        assert_ne!(drop_seed(5, 0), drop_seed(5, 1));
    }
}
