//! Forward/reverse iterations on the estimated network: receive filters are
//! updated in the forward network, precoders as receive filters of the
//! reciprocal network (channels `Ĥ^(k,j)†`).

use crate::error::{Error, Result};
use crate::model::{CsiView, SystemDims, TransceiverSet};
use crate::numerics::{hermitian_eig, top_right_singular, CMat};

use super::stream_amplitude;

/// A network view: `chan(k, j)` maps transmitter `j` to receiver `k`.
trait Network {
    fn chan(&self, k: usize, j: usize) -> CMat;
    fn users(&self) -> usize;
    fn rx_dim(&self) -> usize;
}

struct Forward<'a>(&'a CsiView);
struct Reverse<'a>(&'a CsiView);

impl Network for Forward<'_> {
    fn chan(&self, k: usize, j: usize) -> CMat {
        self.0.hat(k, j).clone()
    }
    fn users(&self) -> usize {
        self.0.users()
    }
    fn rx_dim(&self) -> usize {
        self.0.estimates.rx_antennas()
    }
}

impl Network for Reverse<'_> {
    fn chan(&self, k: usize, j: usize) -> CMat {
        self.0.hat(j, k).adjoint()
    }
    fn users(&self) -> usize {
        self.0.users()
    }
    fn rx_dim(&self) -> usize {
        self.0.estimates.tx_antennas()
    }
}

/// Per-stream SINR-maximizing unit filters `B⁻¹ a` for transmit matrices `tx`
/// (columns carry their amplitude).
fn max_sinr_filters(net: &impl Network, tx: &[CMat], noise: f64) -> Result<Vec<CMat>> {
    let n = net.rx_dim();
    let mut out = Vec::with_capacity(net.users());
    for k in 0..net.users() {
        let mut cov = CMat::identity(n, n).scale(noise);
        for (j, t) in tx.iter().enumerate() {
            let r = net.chan(k, j) * t;
            cov += &r * r.adjoint();
        }
        let direct = net.chan(k, k) * &tx[k];
        let mut uk = CMat::zeros(n, tx[k].ncols());
        for l in 0..tx[k].ncols() {
            let a = direct.column(l).into_owned();
            let b = &cov - &a * a.adjoint();
            let chol = b.cholesky().ok_or(Error::SingularCovariance)?;
            let mut u = chol.solve(&a);
            let nrm = u.norm();
            if !(nrm > 0.0 && nrm.is_finite()) {
                return Err(Error::SingularCovariance);
            }
            u.unscale_mut(nrm);
            uk.set_column(l, &u);
        }
        out.push(uk);
    }
    Ok(out)
}

/// Least-dominant eigenvectors of each receiver's leakage covariance.
fn min_leakage_filters(net: &impl Network, tx: &[CMat]) -> Result<Vec<CMat>> {
    let n = net.rx_dim();
    let mut out = Vec::with_capacity(net.users());
    for k in 0..net.users() {
        let mut q = CMat::zeros(n, n);
        for (j, t) in tx.iter().enumerate().filter(|(j, _)| *j != k) {
            let r = net.chan(k, j) * t;
            q += &r * r.adjoint();
        }
        let eig = hermitian_eig(&q)?;
        let l = tx[k].ncols();
        let cols: Vec<_> = (0..l).map(|i| eig.vector(n - 1 - i)).collect();
        out.push(CMat::from_columns(&cols));
    }
    Ok(out)
}

fn scaled(filters: Vec<CMat>, dims: &SystemDims) -> Vec<CMat> {
    filters
        .into_iter()
        .enumerate()
        .map(|(k, f)| f.scale(stream_amplitude(dims, k)))
        .collect()
}

fn initial_precoders(csi: &CsiView, dims: &SystemDims) -> Result<Vec<CMat>> {
    (0..dims.users)
        .map(|k| Ok(top_right_singular(csi.hat(k, k), dims.streams[k])?.scale(stream_amplitude(dims, k))))
        .collect()
}

/// Receive filters that maximize each stream's nominal SINR at `precoders`.
pub fn forward_max_sinr_filters(csi: &CsiView, precoders: &[CMat], noise: f64) -> Result<Vec<CMat>> {
    max_sinr_filters(&Forward(csi), precoders, noise)
}

/// Iterative per-stream SINR maximization on the estimates.
pub fn max_sinr_baseline(csi: &CsiView, dims: &SystemDims, sweeps: usize) -> Result<TransceiverSet> {
    let mut v = initial_precoders(csi, dims)?;
    for _ in 0..sweeps {
        let u = max_sinr_filters(&Forward(csi), &v, dims.noise)?;
        v = scaled(max_sinr_filters(&Reverse(csi), &scaled(u, dims), dims.noise)?, dims);
    }
    let decorrelators = max_sinr_filters(&Forward(csi), &v, dims.noise)?;
    Ok(TransceiverSet { precoders: v, decorrelators })
}

/// Iterative leakage minimization on the estimates.
pub fn min_leakage_baseline(csi: &CsiView, dims: &SystemDims, sweeps: usize) -> Result<TransceiverSet> {
    let mut v = initial_precoders(csi, dims)?;
    for _ in 0..sweeps {
        let u = min_leakage_filters(&Forward(csi), &v)?;
        v = scaled(min_leakage_filters(&Reverse(csi), &scaled(u, dims))?, dims);
    }
    let decorrelators = min_leakage_filters(&Forward(csi), &v)?;
    Ok(TransceiverSet { precoders: v, decorrelators })
}

/// `Σ_k Σ_{j≠k} ‖U^(k)† Ĥ^(k,j) V^(j)‖²`.
pub fn total_leakage(csi: &CsiView, tx: &TransceiverSet) -> f64 {
    let mut total = 0.0;
    for k in 0..tx.users() {
        for j in (0..tx.users()).filter(|&j| j != k) {
            total += (tx.decorrelators[k].adjoint() * csi.hat(k, j) * &tx.precoders[j]).norm_squared();
        }
    }
    total
}
