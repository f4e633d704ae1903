//! Closed-form alignment for three users with `M = N = 2d` antennas and `d`
//! streams each.

use crate::error::{Error, Result};
use crate::model::{CsiView, SystemDims, TransceiverSet};
use crate::numerics::{hermitian_eig, orthonormalize, CMat};

use super::stream_amplitude;

fn inverse(csi: &CsiView, k: usize, j: usize) -> Result<CMat> {
    let h = csi.hat(k, j);
    let sv = h.singular_values();
    if sv.min() <= 1e-9 * sv.max().max(1.0) {
        return Err(Error::SingularChannel(k, j));
    }
    h.clone().try_inverse().ok_or(Error::SingularChannel(k, j))
}

/// Precoders align all interference at each receiver into a `d`-dimensional
/// subspace; each receiver projects onto the complement and zero-forces its
/// own streams.
pub fn ia3_closed_form(csi: &CsiView, dims: &SystemDims) -> Result<TransceiverSet> {
    let (m, n) = (dims.tx_antennas, dims.rx_antennas);
    if dims.users != 3 || m != n || m % 2 != 0 || dims.streams.iter().any(|&l| 2 * l != m) {
        return Err(Error::NotFeasible(format!(
            "closed-form alignment needs K=3, M=N even and L=M/2 (got K={}, M={m}, N={n}, L={:?})",
            dims.users, dims.streams
        )));
    }
    let d = m / 2;
    let h = |k: usize, j: usize| csi.hat(k, j);

    // Interference from users 2 and 3 aligned at receiver 1, 1 and 3 at
    // receiver 2, 1 and 2 at receiver 3.
    let e = inverse(csi, 2, 0)? * h(2, 1) * inverse(csi, 0, 1)? * h(0, 2) * inverse(csi, 1, 2)? * h(1, 0);
    let schur = e
        .try_schur(1e-14, 10_000)
        .ok_or_else(|| Error::NumericalFailure("Schur decomposition did not converge".into()))?;
    let (q, _) = schur.unpack();
    // The leading Schur vectors span an invariant subspace of `e`.
    let v1 = q.columns(0, d).into_owned();
    let v2 = inverse(csi, 2, 1)? * h(2, 0) * &v1;
    let v3 = inverse(csi, 1, 2)? * h(1, 0) * &v1;
    let precoders: Vec<CMat> = [v1, v2, v3]
        .iter()
        .enumerate()
        .map(|(k, v)| orthonormalize(v).scale(stream_amplitude(dims, k)))
        .collect();

    let mut decorrelators = Vec::with_capacity(3);
    for k in 0..3 {
        let others: Vec<usize> = (0..3).filter(|&j| j != k).collect();
        let mut interference = CMat::zeros(n, 2 * d);
        for (slot, &j) in others.iter().enumerate() {
            interference
                .columns_mut(slot * d, d)
                .copy_from(&(h(k, j) * &precoders[j]));
        }
        // The d weakest eigenvectors of R R† span the interference-free space.
        let eig = hermitian_eig(&(&interference * interference.adjoint()))?;
        let comp = CMat::from_columns(&(d..n).map(|i| eig.vector(i)).collect::<Vec<_>>());
        let desired = comp.adjoint() * h(k, k) * &precoders[k];
        let dinv = desired
            .try_inverse()
            .ok_or_else(|| Error::NumericalFailure(format!("desired signal space of user {k} is degenerate")))?;
        let mut uk = comp * dinv.adjoint();
        for mut col in uk.column_iter_mut() {
            let nrm = col.norm();
            col.unscale_mut(nrm);
        }
        decorrelators.push(uk);
    }
    Ok(TransceiverSet { precoders, decorrelators })
}
