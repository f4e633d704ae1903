//! Closed-form receive filters with the precoders held fixed.
//!
//! For stream `(k, l)` the surrogate SINR is the generalized Rayleigh quotient
//! `u†Eu / u†Fu`. Its maximizer is `F^{-1/2} w` with `w` the principal
//! eigenvector of `F^{-1/2} E F^{-1/2}`; every stream is solved independently.

use crate::error::{Error, Result};
use crate::model::TransceiverSet;
use crate::model::CsiView;
use crate::numerics::{self, hermitian_eig, identity, inv_sqrt_pd, norm2, outer, CMat, CVec};
use crate::sinr::{stream_ids, StreamId};

/// Numerator (`E`) and denominator (`F`) matrices of the SINR quotient.
#[derive(Debug, Clone)]
pub struct EfPair {
    pub e: CMat,
    pub f: CMat,
}

impl EfPair {
    pub fn quotient(&self, u: &CVec) -> f64 {
        let num = u.dotc(&(&self.e * u)).re;
        let den = u.dotc(&(&self.f * u)).re;
        num / den
    }
}

pub fn build_ef(csi: &CsiView, tx: &TransceiverSet, s: StreamId, noise: f64) -> Result<EfPair> {
    let n = csi.estimates.rx_antennas();
    let eps = csi.eps;
    let v_own = tx.precoder(s.k, s.l);
    let own_dir = csi.hat(s.k, s.k) * &v_own;
    let own_allowance = eps * norm2(&v_own);

    let mut f = CMat::zeros(n, n);
    let mut total_power = 0.0;
    for (j, v) in tx.precoders.iter().enumerate() {
        let hv = csi.hat(s.k, j) * v;
        f += &hv * hv.adjoint();
        total_power += numerics::frob2(v);
    }
    let e = outer(&own_dir) - identity(n).scale(own_allowance);
    f -= outer(&own_dir);
    for i in 0..n {
        f[(i, i)].re += eps * total_power - own_allowance + noise;
    }
    Ok(EfPair { e, f })
}

/// Result of optimizing one receive filter.
#[derive(Debug, Clone)]
pub struct DecorrelatorSolution {
    /// Unit-norm filter, leading entry real-positive.
    pub u: CVec,
    /// Principal eigenvalue of `F^{-1/2} E F^{-1/2}` (the optimal quotient).
    pub quotient: f64,
}

pub fn optimize_decorrelator(
    csi: &CsiView,
    tx: &TransceiverSet,
    s: StreamId,
    noise: f64,
) -> Result<DecorrelatorSolution> {
    let ef = build_ef(csi, tx, s, noise)?;
    let f_isqrt = inv_sqrt_pd(&ef.f).map_err(|e| match e {
        Error::NotPositiveDefinite(_) => Error::FNotPositiveDefinite(s),
        other => other,
    })?;
    let whitened = &f_isqrt * &ef.e * &f_isqrt;
    let eig = hermitian_eig(&whitened)?;
    let mut u = &f_isqrt * eig.vector(0);
    let nrm = norm2(&u).sqrt();
    if !(nrm > 0.0 && nrm.is_finite()) {
        return Err(Error::NumericalFailure(format!("degenerate decorrelator for stream {s}")));
    }
    u.unscale_mut(nrm);
    numerics::phase_normalize(&mut u);
    Ok(DecorrelatorSolution {
        u,
        quotient: eig.max(),
    })
}

/// Output of a full decorrelator sweep.
#[derive(Debug, Clone)]
pub struct DecorrelatorSweep {
    pub tx: TransceiverSet,
    /// Optimal quotient per stream, in `stream_ids` order.
    pub quotients: Vec<f64>,
    /// Streams whose principal eigenvalue came out negative (error radius too
    /// large for that stream at these precoders).
    pub negative: Vec<StreamId>,
}

pub fn sweep_decorrelators(csi: &CsiView, tx: &TransceiverSet, noise: f64) -> Result<DecorrelatorSweep> {
    let mut out = tx.clone();
    let mut quotients = Vec::new();
    let mut negative = Vec::new();
    for s in stream_ids(tx) {
        let sol = optimize_decorrelator(csi, tx, s, noise).map_err(|e| match e {
            e @ Error::FNotPositiveDefinite(_) => e,
            other => other.at(s),
        })?;
        out.decorrelators[s.k].set_column(s.l, &sol.u);
        if sol.quotient < 0.0 {
            negative.push(s);
        }
        quotients.push(sol.quotient);
    }
    Ok(DecorrelatorSweep {
        tx: out,
        quotients,
        negative,
    })
}

/// Replaces every decorrelator with its optimum for the current precoders.
pub fn optimize_all_decorrelators(csi: &CsiView, tx: &TransceiverSet, noise: f64) -> Result<TransceiverSet> {
    Ok(sweep_decorrelators(csi, tx, noise)?.tx)
}
