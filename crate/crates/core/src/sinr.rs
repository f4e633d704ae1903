//! SINR and rate functionals.
//!
//! `actual_sinr` evaluates the post-decorrelator SINR against a channel grid
//! taken as truth. `worst_case_sinr` is the robust surrogate evaluated from the
//! estimates and the error radius; a negative value means the desired-signal
//! term is swamped by the error allowance and no rate can be guaranteed.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelSet, CsiView, TransceiverSet};
use crate::numerics::{bilinear_power, frob2, min_eigenvalue, norm2, trace_prod, trace_re, CMat, CVec};

/// Stream `l` of user `k`, both zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub k: usize,
    pub l: usize,
}

impl StreamId {
    pub fn new(k: usize, l: usize) -> Self {
        StreamId { k, l }
    }
}

impl fmt::Display for StreamId {
    /// One-based, matching how streams are labelled in output files.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.k + 1, self.l + 1)
    }
}

/// All stream ids in lexicographic order.
pub fn stream_ids(tx: &TransceiverSet) -> impl Iterator<Item = StreamId> + '_ {
    tx.precoders
        .iter()
        .enumerate()
        .flat_map(|(k, v)| (0..v.ncols()).map(move |l| StreamId::new(k, l)))
}

fn decorrelator(tx: &TransceiverSet, s: StreamId) -> Result<CVec> {
    let u = tx.decorrelator(s.k, s.l);
    if norm2(&u) == 0.0 {
        return Err(Error::ZeroDecorrelator(s));
    }
    Ok(u)
}

/// SINR of stream `s` through the channels `h` (treated as the truth).
pub fn actual_sinr(h: &ChannelSet, tx: &TransceiverSet, s: StreamId, noise: f64) -> Result<f64> {
    let u = decorrelator(tx, s)?;
    let own = h.get(s.k, s.k);
    let desired = bilinear_power(&u, own, &tx.precoder(s.k, s.l));
    let mut interference = noise * norm2(&u);
    for (j, v) in tx.precoders.iter().enumerate() {
        let hj = h.get(s.k, j);
        for m in 0..v.ncols() {
            if j == s.k && m == s.l {
                continue;
            }
            interference += bilinear_power(&u, hj, &v.column(m).into_owned());
        }
    }
    Ok(desired / interference)
}

/// `log₂(1 + sinr)` in bits/s/Hz.
pub fn mutual_info(sinr: f64) -> Result<f64> {
    if sinr < 0.0 || sinr.is_nan() {
        return Err(Error::NegativeSinr(sinr));
    }
    Ok((1.0 + sinr).log2())
}

/// Numerator and denominator of the robust SINR surrogate.
fn worst_case_terms(csi: &CsiView, tx: &TransceiverSet, s: StreamId, noise: f64) -> Result<(f64, f64)> {
    let u = decorrelator(tx, s)?;
    let u2 = norm2(&u);
    let v_own = tx.precoder(s.k, s.l);
    let own_signal = bilinear_power(&u, csi.hat(s.k, s.k), &v_own);
    let own_allowance = csi.eps * u2 * norm2(&v_own);

    let mut received = 0.0;
    let mut total_power = 0.0;
    for (j, v) in tx.precoders.iter().enumerate() {
        let hj = csi.hat(s.k, j);
        for m in 0..v.ncols() {
            received += bilinear_power(&u, hj, &v.column(m).into_owned());
        }
        total_power += frob2(v);
    }
    let numerator = own_signal - own_allowance;
    let denominator =
        received + csi.eps * u2 * total_power - own_signal - own_allowance + noise * u2;
    Ok((numerator, denominator))
}

/// Robust SINR surrogate for stream `s` from the CSI estimates.
///
/// The numerator is returned unclamped, so the result can be negative.
pub fn worst_case_sinr(csi: &CsiView, tx: &TransceiverSet, s: StreamId, noise: f64) -> Result<f64> {
    let (num, den) = worst_case_terms(csi, tx, s, noise)?;
    if den <= 0.0 {
        return Err(Error::NonPositiveDenominator { stream: s, value: den });
    }
    Ok(num / den)
}

/// The surrogate in lifted form, with `grams[j][m]` standing in for `v_m^(j) v_m^(j)†`.
pub fn worst_case_sinr_gram(
    csi: &CsiView,
    grams: &[Vec<CMat>],
    u: &CVec,
    s: StreamId,
    noise: f64,
) -> Result<f64> {
    let u2 = norm2(u);
    if u2 == 0.0 {
        return Err(Error::ZeroDecorrelator(s));
    }
    for g in grams.iter().flatten() {
        let scale = trace_re(g).abs().max(f64::MIN_POSITIVE);
        let lo = min_eigenvalue(g)?;
        if lo < -1e-10 * scale {
            return Err(Error::NotPsd(lo));
        }
    }
    let lifted = |h: &CMat| {
        let w = h.adjoint() * u;
        crate::numerics::outer(&w)
    };
    let own_lift = lifted(csi.hat(s.k, s.k));
    let own_gram = &grams[s.k][s.l];
    let own_signal = trace_prod(&own_lift, own_gram);
    let own_allowance = csi.eps * u2 * trace_re(own_gram);

    let mut received = 0.0;
    let mut total_power = 0.0;
    for (j, user) in grams.iter().enumerate() {
        let lift = lifted(csi.hat(s.k, j));
        for g in user {
            received += trace_prod(&lift, g);
            total_power += trace_re(g);
        }
    }
    let numerator = own_signal - own_allowance;
    let denominator =
        received + csi.eps * u2 * total_power - own_signal - own_allowance + noise * u2;
    if denominator <= 0.0 {
        return Err(Error::NonPositiveDenominator { stream: s, value: denominator });
    }
    Ok(numerator / denominator)
}

/// Minimum surrogate SINR over all streams; ties go to the smallest `(k, l)`.
pub fn min_worst_case_sinr(csi: &CsiView, tx: &TransceiverSet, noise: f64) -> Result<(f64, StreamId)> {
    let mut best: Option<(f64, StreamId)> = None;
    for s in stream_ids(tx) {
        let g = worst_case_sinr(csi, tx, s, noise)?;
        match best {
            Some((b, _)) if g >= b => {}
            _ => best = Some((g, s)),
        }
    }
    best.ok_or_else(|| Error::DimensionMismatch("no streams".into()))
}

/// Surrogate SINR for every stream, in `stream_ids` order.
pub fn all_worst_case_sinr(csi: &CsiView, tx: &TransceiverSet, noise: f64) -> Result<Vec<f64>> {
    stream_ids(tx).map(|s| worst_case_sinr(csi, tx, s, noise)).collect()
}

/// Actual SINR for every stream, in `stream_ids` order.
pub fn all_actual_sinr(h: &ChannelSet, tx: &TransceiverSet, noise: f64) -> Result<Vec<f64>> {
    stream_ids(tx).map(|s| actual_sinr(h, tx, s, noise)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_channels, sample_delta, derive_csi, complex_gaussian, stream_rng, DeltaMode, RngPurpose, SystemDims};
    use crate::numerics::{c, outer};

    fn scalar(x: f64) -> CMat {
        CMat::from_element(1, 1, c(x, 0.0))
    }

    fn scalar_tx(v: &[f64], u: &[f64]) -> TransceiverSet {
        TransceiverSet {
            precoders: v.iter().map(|&x| scalar(x)).collect(),
            decorrelators: u.iter().map(|&x| scalar(x)).collect(),
        }
    }

    fn random_instance(seed: u64, k: usize, m: usize, n: usize, l: usize, eps: f64) -> (CsiView, TransceiverSet) {
        let dims = SystemDims::uniform(k, m, n, l, 1.0, 0.1, eps).unwrap();
        let h = generate_channels(&dims, seed);
        let csi = derive_csi(&h, &sample_delta(&dims, seed, DeltaMode::Interior), eps).unwrap();
        let mut rng = stream_rng(seed, RngPurpose::Test, 0);
        let tx = TransceiverSet {
            precoders: (0..k).map(|_| complex_gaussian(&mut rng, m, l).scale(0.5)).collect(),
            decorrelators: (0..k).map(|_| complex_gaussian(&mut rng, n, l)).collect(),
        };
        (csi, tx)
    }

    #[test]
    fn actual_sinr_scalar_examples() {
        let h = ChannelSet::from_fn(1, 1, 1, |_, _| scalar(2.0)).unwrap();
        let tx = scalar_tx(&[1.0], &[1.0]);
        assert!((actual_sinr(&h, &tx, StreamId::new(0, 0), 1.0).unwrap() - 4.0).abs() < 1e-15);

        let h = ChannelSet::from_fn(2, 1, 1, |k, j| scalar(if k == j { 1.0 } else { 0.5 })).unwrap();
        let tx = scalar_tx(&[1.0, 1.0], &[1.0, 1.0]);
        let g = actual_sinr(&h, &tx, StreamId::new(0, 0), 0.1).unwrap();
        assert!((g - 1.0 / 0.35).abs() < 1e-12);

        let zero = scalar_tx(&[1.0, 1.0], &[0.0, 1.0]);
        assert!(matches!(
            actual_sinr(&h, &zero, StreamId::new(0, 0), 0.1),
            Err(Error::ZeroDecorrelator(_))
        ));
    }

    #[test]
    fn actual_sinr_is_scale_invariant_in_u() {
        let (csi, tx) = random_instance(3, 3, 2, 2, 1, 0.1);
        let s = StreamId::new(1, 0);
        let base = actual_sinr(&csi.estimates, &tx, s, 0.1).unwrap();
        let mut scaled = tx.clone();
        scaled.decorrelators[1].scale_mut(-3.7);
        let g = actual_sinr(&csi.estimates, &scaled, s, 0.1).unwrap();
        assert!((g - base).abs() <= 1e-12 * base);
    }

    #[test]
    fn mutual_info_examples() {
        assert_eq!(mutual_info(0.0).unwrap(), 0.0);
        assert!((mutual_info(3.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((mutual_info(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(mutual_info(-0.5), Err(Error::NegativeSinr(_))));
    }

    #[test]
    fn worst_case_scalar_example() {
        let csi = CsiView {
            estimates: ChannelSet::from_fn(1, 1, 1, |_, _| scalar(1.0)).unwrap(),
            eps: 0.1,
        };
        let tx = scalar_tx(&[1.0], &[1.0]);
        let g = worst_case_sinr(&csi, &tx, StreamId::new(0, 0), 0.1).unwrap();
        assert!((g - 9.0).abs() < 1e-12);
    }

    #[test]
    fn worst_case_reduces_to_actual_without_error() {
        for seed in 0..10 {
            let (mut csi, tx) = random_instance(seed, 3, 3, 2, 2, 0.0);
            csi.eps = 0.0;
            for s in stream_ids(&tx) {
                let wc = worst_case_sinr(&csi, &tx, s, 0.1).unwrap();
                let act = actual_sinr(&csi.estimates, &tx, s, 0.1).unwrap();
                assert!((wc - act).abs() <= 1e-12 * act.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn worst_case_negative_numerator_is_returned() {
        let csi = CsiView {
            estimates: ChannelSet::from_fn(1, 1, 1, |_, _| scalar(0.1)).unwrap(),
            eps: 0.5,
        };
        let tx = scalar_tx(&[1.0], &[1.0]);
        let g = worst_case_sinr(&csi, &tx, StreamId::new(0, 0), 1.0).unwrap();
        assert!(g < 0.0);
        assert!((g - (0.01 - 0.5) / 1.0).abs() < 1e-12);
    }

    #[test]
    fn worst_case_is_scale_invariant_in_u() {
        for seed in 0..10 {
            let (csi, tx) = random_instance(seed, 3, 2, 3, 1, 0.05);
            for s in stream_ids(&tx) {
                let base = worst_case_sinr(&csi, &tx, s, 0.1).unwrap();
                let mut scaled = tx.clone();
                scaled.decorrelators[s.k].column_mut(s.l).scale_mut(2.5e3);
                let g = worst_case_sinr(&csi, &scaled, s, 0.1).unwrap();
                assert!((g - base).abs() <= 1e-10 * base.abs());
            }
        }
    }

    fn rank1_grams(tx: &TransceiverSet) -> Vec<Vec<CMat>> {
        tx.precoders
            .iter()
            .map(|v| (0..v.ncols()).map(|m| outer(&v.column(m).into_owned())).collect())
            .collect()
    }

    #[test]
    fn gram_form_matches_vector_form() {
        let csi = CsiView {
            estimates: ChannelSet::from_fn(1, 1, 1, |_, _| scalar(1.0)).unwrap(),
            eps: 0.1,
        };
        let tx = scalar_tx(&[1.0], &[1.0]);
        let g = worst_case_sinr_gram(&csi, &rank1_grams(&tx), &tx.decorrelator(0, 0), StreamId::new(0, 0), 0.1)
            .unwrap();
        assert!((g - 9.0).abs() < 1e-12);

        for seed in 0..20 {
            let (csi, tx) = random_instance(seed, 2 + seed as usize % 2, 3, 2, 2, 0.08);
            let grams = rank1_grams(&tx);
            for s in stream_ids(&tx) {
                let a = worst_case_sinr(&csi, &tx, s, 0.1).unwrap();
                let b = worst_case_sinr_gram(&csi, &grams, &tx.decorrelator(s.k, s.l), s, 0.1).unwrap();
                assert!((a - b).abs() <= 1e-10 * a.abs());
            }
        }
    }

    #[test]
    fn gram_form_only_desired_nonzero() {
        let (csi, tx) = random_instance(7, 2, 2, 2, 1, 0.05);
        let mut grams = rank1_grams(&tx);
        grams[1][0] = CMat::zeros(2, 2);
        let s = StreamId::new(0, 0);
        let u = tx.decorrelator(0, 0);
        let v = tx.precoder(0, 0);
        let u2 = norm2(&u);
        let num = bilinear_power(&u, csi.hat(0, 0), &v) - 0.05 * u2 * norm2(&v);
        let expect = num / (0.1 * u2);
        let g = worst_case_sinr_gram(&csi, &grams, &u, s, 0.1).unwrap();
        assert!((g - expect).abs() <= 1e-12 * expect.abs());
    }

    #[test]
    fn gram_form_rejects_indefinite() {
        let (csi, tx) = random_instance(1, 1, 2, 2, 1, 0.05);
        let mut grams = rank1_grams(&tx);
        grams[0][0] = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        let r = worst_case_sinr_gram(&csi, &grams, &tx.decorrelator(0, 0), StreamId::new(0, 0), 0.1);
        assert!(matches!(r, Err(Error::NotPsd(_))));
    }

    #[test]
    fn min_over_streams_and_tie_break() {
        let csi = CsiView {
            estimates: ChannelSet::from_fn(1, 1, 1, |_, _| scalar(1.0)).unwrap(),
            eps: 0.1,
        };
        let tx = scalar_tx(&[1.0], &[1.0]);
        let (g, s) = min_worst_case_sinr(&csi, &tx, 0.1).unwrap();
        assert!((g - 9.0).abs() < 1e-12);
        assert_eq!(s, StreamId::new(0, 0));

        // two identical users
        let csi = CsiView {
            estimates: ChannelSet::from_fn(2, 1, 1, |k, j| scalar(if k == j { 1.0 } else { 0.3 })).unwrap(),
            eps: 0.0,
        };
        let tx = scalar_tx(&[1.0, 1.0], &[1.0, 1.0]);
        let (g, s) = min_worst_case_sinr(&csi, &tx, 0.1).unwrap();
        assert_eq!(s, StreamId::new(0, 0));
        assert!((g - 1.0 / 0.19).abs() < 1e-12);

        // asymmetric: h11=1, h12=0.5, h21=0.2, h22=0.8, v=(1, 2), eps=0.01, N0=0.1
        let gains = [[1.0, 0.5], [0.2, 0.8]];
        let csi = CsiView {
            estimates: ChannelSet::from_fn(2, 1, 1, |k, j| scalar(gains[k][j])).unwrap(),
            eps: 0.01,
        };
        let tx = scalar_tx(&[1.0, 2.0], &[1.0, 1.0]);
        // user 1: (1 - 0.01) / (0.25*4 + 0.01*4 + 0.1) ; user 2: (0.64*4 - 0.04) / (0.04 + 0.01*1 + 0.1)
        let g1: f64 = 0.99 / (1.0 + 0.04 + 0.1);
        let g2 = (2.56 - 0.04) / (0.04 + 0.01 + 0.1);
        let (g, s) = min_worst_case_sinr(&csi, &tx, 0.1).unwrap();
        assert!((g - g1.min(g2)).abs() < 1e-12);
        assert_eq!(s, StreamId::new(0, 0));
    }

    #[test]
    fn non_positive_denominator_is_an_error() {
        // single stream, zero noise would make the denominator vanish; force it negative via eps
        let csi = CsiView {
            estimates: ChannelSet::from_fn(1, 1, 1, |_, _| scalar(1.0)).unwrap(),
            eps: 0.0,
        };
        let tx = scalar_tx(&[1.0], &[1.0]);
        let r = worst_case_sinr(&csi, &tx, StreamId::new(0, 0), -1.0);
        assert!(matches!(r, Err(Error::NonPositiveDenominator { .. })));
    }
}
