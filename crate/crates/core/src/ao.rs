//! Alternating optimization for robust max-min fair transceivers.
//!
//! Each iteration re-optimizes the receive filters, reads off the current
//! worst surrogate SINR `γ̂`, finds the least-power precoders that keep every
//! stream at `γ̂`, and scales them back up to the power budget. The minimum
//! surrogate SINR after the rescale never decreases from one iteration to the
//! next.

use serde::{Deserialize, Serialize};

use crate::decorrelator::optimize_all_decorrelators;
use crate::error::{Error, Result};
use crate::model::{complex_gaussian, stream_rng, transmit_power, CsiView, RngPurpose, SystemDims, TransceiverSet};
use crate::numerics::{orthonormalize, top_right_singular, CMat};
use crate::precoder::{build_qv, certify, extract_precoders, qv_options, solve_qv};
use crate::sdp::SdpOptions;
use crate::sinr::min_worst_case_sinr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Top right singular vectors of each direct channel estimate.
    #[default]
    RightSingular,
    /// Seeded random orthonormal columns.
    RandomOrthonormal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub init_mode: InitMode,
    pub seed: u64,
    pub sdp: SdpOptions,
}

impl Default for AoConfig {
    fn default() -> Self {
        AoConfig {
            max_iters: 50,
            rel_tol: 1e-5,
            init_mode: InitMode::RightSingular,
            seed: 0,
            sdp: qv_options(),
        }
    }
}

impl AoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Config("rel_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Bookkeeping for one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoRecord {
    pub iter: usize,
    /// Minimum surrogate SINR after the receive-filter update.
    pub gamma_hat: f64,
    /// Optimal load `Ξ` of the precoder problem.
    pub beta: f64,
    /// Minimum surrogate SINR after rescaling to the budget.
    pub gamma: f64,
    pub max_rank_ratio: f64,
    pub cert_ok: bool,
    pub sdp_iterations: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AoTrace {
    pub records: Vec<AoRecord>,
    pub converged: bool,
}

impl AoTrace {
    /// Post-rescale `γ̃` per iteration.
    pub fn gammas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gamma).collect()
    }

    pub fn final_gamma(&self) -> Option<f64> {
        self.records.last().map(|r| r.gamma)
    }

    /// Largest drop of `γ̃` between consecutive iterations (0 if none).
    pub fn max_decrease(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[0].gamma - w[1].gamma)
            .fold(0.0, f64::max)
    }

    pub fn cert_ok(&self) -> bool {
        self.records.iter().all(|r| r.cert_ok)
    }

    /// One JSON object per line.
    pub fn to_json_lines(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }
}

/// Failure inside the loop, with the iterations completed so far.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{error} (after {} iterations)", trace.records.len())]
pub struct AoError {
    #[source]
    pub error: Error,
    pub trace: AoTrace,
}

/// Full-power precoders and matching receive filters.
pub fn initialize(dims: &SystemDims, csi: &CsiView, cfg: &AoConfig) -> Result<TransceiverSet> {
    dims.validate()?;
    let m = dims.tx_antennas;
    let mut precoders = Vec::with_capacity(dims.users);
    for k in 0..dims.users {
        let l = dims.streams[k];
        let basis: CMat = match cfg.init_mode {
            InitMode::RightSingular => top_right_singular(csi.hat(k, k), l)?,
            InitMode::RandomOrthonormal => {
                let mut rng = stream_rng(cfg.seed, RngPurpose::Init, k as u64);
                orthonormalize(&complex_gaussian(&mut rng, m, l))
            }
        };
        precoders.push(basis.scale((dims.power[k] / l as f64).sqrt()));
    }
    let tx = TransceiverSet {
        decorrelators: dims.streams.iter().map(|&l| CMat::zeros(dims.rx_antennas, l)).collect(),
        precoders,
    };
    optimize_all_decorrelators(csi, &tx, dims.noise)
}

/// One pass of filter update, target evaluation, power minimization and rescale.
pub fn ao_step(tx: &TransceiverSet, csi: &CsiView, dims: &SystemDims, cfg: &AoConfig, iter: usize) -> Result<(TransceiverSet, AoRecord)> {
    let noise = dims.noise;
    let tx1 = optimize_all_decorrelators(csi, tx, noise)?;
    let (gamma_hat, _) = min_worst_case_sinr(csi, &tx1, noise)?;
    if !(gamma_hat > 0.0) {
        return Err(Error::NonPositiveSinr(gamma_hat));
    }

    let inst = build_qv(csi, &tx1.decorrelators, gamma_hat, dims)?;
    let sol = solve_qv(&inst, &cfg.sdp)?;
    let cert = certify(&inst, &sol)?;
    let mut warnings = cert.violations(dims.tx_antennas, sol.xi);
    let cert_ok = warnings.is_empty();
    let ext = extract_precoders(&inst, &sol)?;
    if ext.repair_scale != 1.0 {
        warnings.push(format!("rank-one repair scale {:.6}", ext.repair_scale));
    }

    let mut next = TransceiverSet {
        precoders: ext.precoders,
        decorrelators: tx1.decorrelators.clone(),
    };
    let beta = (0..dims.users)
        .map(|j| transmit_power(&next, j) / dims.rho(j))
        .fold(0.0, f64::max);
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::NumericalFailure(format!("required power {beta}")));
    }
    next.scale_precoders((dims.min_power() / beta).sqrt());
    let (mut gamma, _) = min_worst_case_sinr(csi, &next, noise)?;

    // The incumbent reaches γ̂ at full power; keep it if the new point, within
    // solver tolerance, came out worse.
    if gamma < gamma_hat {
        warnings.push(format!("rescaled point {gamma:.12e} below target {gamma_hat:.12e}; kept incumbent"));
        log::debug!("iteration {iter}: {}", warnings.last().unwrap());
        next = tx1;
        gamma = gamma_hat;
    }
    let record = AoRecord {
        iter,
        gamma_hat,
        beta: sol.xi,
        gamma,
        max_rank_ratio: cert.max_ratio(),
        cert_ok,
        sdp_iterations: sol.iterations,
        warnings,
    };
    Ok((next, record))
}

/// Runs the alternating optimization to convergence or the iteration cap.
pub fn solve_max_min(csi: &CsiView, dims: &SystemDims, cfg: &AoConfig) -> std::result::Result<(TransceiverSet, AoTrace), AoError> {
    let fail = |error: Error, trace: &AoTrace| AoError {
        error,
        trace: trace.clone(),
    };
    let mut trace = AoTrace::default();
    cfg.validate().map_err(|e| fail(e, &trace))?;
    let mut tx = initialize(dims, csi, cfg).map_err(|e| fail(e, &trace))?;
    let mut prev = 0.0;
    for iter in 1..=cfg.max_iters {
        let (next, record) = ao_step(&tx, csi, dims, cfg, iter).map_err(|e| fail(e, &trace))?;
        let gamma = record.gamma;
        log::debug!("ao iter {iter}: gamma_hat={:.9e} beta={:.9e} gamma={gamma:.9e}", record.gamma_hat, record.beta);
        trace.records.push(record);
        tx = next;
        if (gamma - prev) / gamma.max(1e-12) < cfg.rel_tol {
            trace.converged = true;
            break;
        }
        prev = gamma;
    }
    Ok((tx, trace))
}

/// Outcome of re-solving the power problem at the achieved SINR.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InverseMapReport {
    pub gamma: f64,
    /// Required load `Ξ`, `None` when the target was infeasible.
    pub beta: Option<f64>,
    /// Reference budget `P̃`.
    pub budget: f64,
}

impl InverseMapReport {
    pub fn ratio(&self) -> Option<f64> {
        self.beta.map(|b| b / self.budget)
    }
}

/// Solves the power problem for `gamma` with the decorrelators of `tx` and
/// compares the required load against the budget.
pub fn inverse_map_check(csi: &CsiView, dims: &SystemDims, tx: &TransceiverSet, gamma: f64, opts: &SdpOptions) -> Result<InverseMapReport> {
    let inst = build_qv(csi, &tx.decorrelators, gamma, dims)?;
    let beta = match solve_qv(&inst, opts) {
        Ok(sol) => Some(sol.xi),
        Err(Error::Infeasible) => None,
        Err(e) => return Err(e),
    };
    Ok(InverseMapReport {
        gamma,
        beta,
        budget: dims.min_power(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{derive_csi, generate_channels, sample_delta, ChannelSet, DeltaMode};
    use crate::numerics::c;

    fn drop(seed: u64, k: usize, m: usize, l: usize, eps: f64, snr_db: f64) -> (SystemDims, CsiView) {
        let dims = SystemDims::uniform(k, m, m, l, 1.0, 10f64.powf(-snr_db / 10.0), eps).unwrap();
        let h = generate_channels(&dims, seed);
        let csi = derive_csi(&h, &sample_delta(&dims, seed, DeltaMode::Boundary), eps).unwrap();
        (dims, csi)
    }

    #[test]
    fn initialization_is_full_power() {
        for mode in [InitMode::RightSingular, InitMode::RandomOrthonormal] {
            let (dims, csi) = drop(1, 3, 4, 2, 0.05, 10.0);
            let cfg = AoConfig { init_mode: mode, seed: 3, ..Default::default() };
            let tx = initialize(&dims, &csi, &cfg).unwrap();
            for k in 0..3 {
                assert!((transmit_power(&tx, k) - 1.0).abs() < 1e-12);
            }
            assert_eq!(tx, initialize(&dims, &csi, &cfg).unwrap());
        }
    }

    #[test]
    fn scalar_initialization() {
        let dims = SystemDims::uniform(1, 1, 1, 1, 4.0, 1.0, 0.0).unwrap();
        let h = ChannelSet::from_fn(1, 1, 1, |_, _| CMat::from_element(1, 1, c(0.5, 0.5))).unwrap();
        let tx = initialize(&dims, &CsiView::perfect(&h), &AoConfig::default()).unwrap();
        assert!((tx.precoders[0][(0, 0)].norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_user_matched_filter() {
        for seed in 0..5 {
            let (dims, csi) = drop(seed, 1, 3, 1, 0.0, 10.0);
            let smax2 = crate::numerics::spectral_norm2(csi.hat(0, 0)).unwrap();
            let want = smax2 * dims.power[0] / dims.noise;
            let (_, trace) = solve_max_min(&csi, &dims, &AoConfig::default()).unwrap();
            let got = trace.final_gamma().unwrap();
            assert!((got - want).abs() <= 1e-6 * want, "{got} vs {want}");
            // From a random start the loop behaves like a power iteration.
            let cfg = AoConfig { init_mode: InitMode::RandomOrthonormal, seed, rel_tol: 1e-12, ..Default::default() };
            let (_, trace) = solve_max_min(&csi, &dims, &cfg).unwrap();
            let got = trace.final_gamma().unwrap();
            assert!((got - want).abs() <= 1e-6 * want, "{got} vs {want}");
        }
    }

    #[test]
    fn monotone_and_on_budget() {
        for seed in 0..5 {
            let (dims, csi) = drop(seed, 3, 2, 1, 0.05, 10.0);
            let (tx, trace) = solve_max_min(&csi, &dims, &AoConfig::default()).unwrap();
            assert!(trace.records.len() <= 50);
            assert!(trace.max_decrease() <= 1e-9, "{:?}", trace.gammas());
            let max_power = (0..3).map(|k| transmit_power(&tx, k)).fold(0.0, f64::max);
            assert!((max_power - 1.0).abs() < 1e-9);
            for k in 0..3 {
                assert!(transmit_power(&tx, k) <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn inverse_map_at_fixed_point() {
        let (dims, csi) = drop(11, 3, 2, 1, 0.05, 10.0);
        let (tx, trace) = solve_max_min(&csi, &dims, &AoConfig::default()).unwrap();
        let g = trace.final_gamma().unwrap();
        let opts = qv_options();
        let at = inverse_map_check(&csi, &dims, &tx, g, &opts).unwrap();
        assert!((at.ratio().unwrap() - 1.0).abs() < 1e-4, "{:?}", at);
        let low = inverse_map_check(&csi, &dims, &tx, 0.5 * g, &opts).unwrap();
        assert!(low.ratio().unwrap() < 1.0);
        let high = inverse_map_check(&csi, &dims, &tx, 2.0 * g, &opts).unwrap();
        assert!(high.ratio().map_or(true, |r| r > 1.0));
    }

    #[test]
    fn large_error_radius_is_reported() {
        let dims = SystemDims::uniform(1, 1, 1, 1, 1.0, 1.0, 0.5).unwrap();
        let h = ChannelSet::from_fn(1, 1, 1, |_, _| CMat::from_element(1, 1, c(0.1, 0.0))).unwrap();
        let csi = CsiView { estimates: h, eps: 0.5 };
        let err = solve_max_min(&csi, &dims, &AoConfig::default()).unwrap_err();
        assert!(matches!(err.error, Error::NonPositiveSinr(_)), "{err}");
        assert!(err.trace.records.is_empty());
    }

    #[test]
    fn trace_serializes_as_json_lines() {
        let (dims, csi) = drop(4, 2, 2, 1, 0.05, 10.0);
        let (_, trace) = solve_max_min(&csi, &dims, &AoConfig::default()).unwrap();
        let text = trace.to_json_lines();
        assert_eq!(text.lines().count(), trace.records.len());
        let first: AoRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first, trace.records[0]);
    }

    #[test]
    fn invalid_config() {
        let cfg = AoConfig { max_iters: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = AoConfig { rel_tol: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
