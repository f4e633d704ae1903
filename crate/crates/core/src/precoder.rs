//! Power-minimizing precoders for fixed decorrelators.
//!
//! With every receive filter fixed, "surrogate SINR ≥ γ on every stream" is a
//! set of linear inequalities in the stream gram matrices `V = v v†`. Dropping
//! the rank constraint gives an SDP in which the largest load-normalized user
//! power `Ξ` is minimized; its solutions come out rank one, which
//! [`certify`] checks numerically.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CsiView, SystemDims};
use crate::numerics::{self, hermitian_eig, identity, norm2, projected_gram, trace_prod, trace_re, CMat, CVec};
use crate::sdp::{self, BlockKind, BlockValue, Constraint, Sense, SdpOptions, SdpProblem, SdpStatus, Term};

/// Rank ratio above which a gram block is not treated as rank one.
pub const RANK_RATIO_TOL: f64 = 1e-6;
/// Relative eigenvalue cutoff for the numerical rank of a dual block.
pub const Z_RANK_CUTOFF: f64 = 1e-6;

/// Constraint data of the fixed-decorrelator precoder problem.
///
/// Constraint `i` (stream order) reads `Σ_j Σ_m tr(a[i][j][m] V_m^(j)) ≥ b[i]`.
#[derive(Debug, Clone)]
pub struct QvInstance {
    pub streams: Vec<usize>,
    pub tx_antennas: usize,
    pub a: Vec<Vec<Vec<CMat>>>,
    pub b: Vec<f64>,
    pub rho: Vec<f64>,
    pub gamma: f64,
}

impl QvInstance {
    pub fn num_streams(&self) -> usize {
        self.streams.iter().sum()
    }

    /// Flat block index of stream `(j, m)`.
    fn block(&self, j: usize, m: usize) -> usize {
        self.streams[..j].iter().sum::<usize>() + m
    }

    /// Left-hand sides of the SINR constraints at the given grams.
    pub fn evaluate(&self, grams: &[Vec<CMat>]) -> Vec<f64> {
        self.a
            .iter()
            .map(|row| {
                row.iter()
                    .zip(grams)
                    .flat_map(|(aj, gj)| aj.iter().zip(gj))
                    .map(|(a, g)| trace_prod(a, g))
                    .sum()
            })
            .collect()
    }

    /// The SDP relaxation. Blocks are the stream grams in stream order followed
    /// by the scalar `Ξ`; the SINR constraints come first, normalized by `b`,
    /// then one power constraint per user.
    pub fn to_sdp(&self) -> SdpProblem {
        let s = self.num_streams();
        let m = self.tx_antennas;
        let mut blocks = vec![BlockKind::Hermitian(m); s];
        blocks.push(BlockKind::Scalar);
        let mut constraints = Vec::with_capacity(s + self.streams.len());
        for (row, &bi) in self.a.iter().zip(&self.b) {
            let mut terms = Vec::with_capacity(s);
            for (j, aj) in row.iter().enumerate() {
                for (mm, a) in aj.iter().enumerate() {
                    terms.push(Term::herm(self.block(j, mm), a.unscale(bi)));
                }
            }
            constraints.push(Constraint {
                terms,
                sense: Sense::Ge,
                rhs: 1.0,
            });
        }
        for (j, &lj) in self.streams.iter().enumerate() {
            let mut terms: Vec<Term> = (0..lj).map(|mm| Term::herm(self.block(j, mm), identity(m))).collect();
            terms.push(Term::scalar(s, -self.rho[j]));
            constraints.push(Constraint {
                terms,
                sense: Sense::Le,
                rhs: 0.0,
            });
        }
        SdpProblem {
            blocks,
            objective: vec![Term::scalar(s, 1.0)],
            constraints,
        }
    }
}

/// Builds the SINR constraints for target `gamma` around the decorrelators `u`
/// (one `N×L_k` matrix per user).
pub fn build_qv(csi: &CsiView, u: &[CMat], gamma: f64, dims: &SystemDims) -> Result<QvInstance> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidGamma(gamma));
    }
    let m = dims.tx_antennas;
    let eps = csi.eps;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (k, uk) in u.iter().enumerate() {
        for l in 0..uk.ncols() {
            let ukl: CVec = uk.column(l).into_owned();
            let u2 = norm2(&ukl);
            if u2 == 0.0 {
                return Err(Error::ZeroDecorrelator(crate::sinr::StreamId::new(k, l)));
            }
            let mut row = Vec::with_capacity(dims.users);
            for (j, &lj) in dims.streams.iter().enumerate() {
                let lift = projected_gram(csi.hat(k, j), &ukl);
                let own = lift.clone() - identity(m).scale(eps * u2);
                let other = (lift + identity(m).scale(eps * u2)).scale(-gamma);
                row.push(
                    (0..lj)
                        .map(|mm| if j == k && mm == l { own.clone() } else { other.clone() })
                        .collect(),
                );
            }
            a.push(row);
            b.push(gamma * dims.noise * u2);
        }
    }
    Ok(QvInstance {
        streams: dims.streams.clone(),
        tx_antennas: m,
        a,
        b,
        rho: (0..dims.users).map(|k| dims.rho(k)).collect(),
        gamma,
    })
}

/// Numerical evidence that the relaxation was tight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankCertificate {
    /// `λ₂/λ₁` per gram block.
    pub ratios: Vec<f64>,
    /// Numerical rank of each dual block, expected `M − 1`.
    pub z_ranks: Vec<usize>,
    /// `|tr(Z V)|` per block.
    pub slackness: Vec<f64>,
    pub gap: f64,
    /// Smallest SINR-constraint multiplier, expected positive.
    pub min_multiplier: f64,
}

impl RankCertificate {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_slackness(&self) -> f64 {
        self.slackness.iter().copied().fold(0.0, f64::max)
    }

    /// Descriptions of every failed check; empty when the certificate holds.
    pub fn violations(&self, tx_antennas: usize, xi: f64) -> Vec<String> {
        let mut out = Vec::new();
        for (i, r) in self.ratios.iter().enumerate() {
            if *r > RANK_RATIO_TOL {
                out.push(format!("block {i}: rank ratio {r:.3e}"));
            }
        }
        for (i, r) in self.z_ranks.iter().enumerate() {
            if *r + 1 != tx_antennas {
                out.push(format!("block {i}: Z rank {r}, expected {}", tx_antennas - 1));
            }
        }
        for (i, s) in self.slackness.iter().enumerate() {
            if *s > 1e-6 {
                out.push(format!("block {i}: slackness residual {s:.3e}"));
            }
        }
        if self.gap > 1e-7 * (1.0 + xi.abs()) {
            out.push(format!("duality gap {:.3e}", self.gap));
        }
        if !(self.min_multiplier > 0.0) {
            out.push(format!("multiplier {:.3e} not positive", self.min_multiplier));
        }
        out
    }

    pub fn ok(&self, tx_antennas: usize, xi: f64) -> bool {
        self.violations(tx_antennas, xi).is_empty()
    }
}

/// Solution of the relaxed precoder problem.
#[derive(Debug, Clone)]
pub struct QvSolution {
    pub status: SdpStatus,
    pub xi: f64,
    /// `grams[j][m]` is the optimal `V_m^(j)`.
    pub grams: Vec<Vec<CMat>>,
    /// Dual blocks `Z_m^(j)`, same layout as `grams`.
    pub z: Vec<Vec<CMat>>,
    /// SINR-constraint multipliers, stream order, in the units of `b`.
    pub sinr_multipliers: Vec<f64>,
    pub power_multipliers: Vec<f64>,
    pub gap: f64,
    pub iterations: usize,
}

/// Solves the relaxation. `Infeasible` and `MaxIter` statuses become errors.
pub fn solve_qv(inst: &QvInstance, opts: &SdpOptions) -> Result<QvSolution> {
    let p = inst.to_sdp();
    let sol = sdp::solve_sdp(&p, opts)?;
    match sol.status {
        SdpStatus::Optimal => {}
        SdpStatus::Infeasible => return Err(Error::Infeasible),
        SdpStatus::MaxIter => return Err(Error::MaxIter),
        SdpStatus::Unbounded => return Err(Error::NumericalFailure("precoder SDP reported unbounded".into())),
    }
    let s = inst.num_streams();
    let regroup = |vals: &[BlockValue]| -> Vec<Vec<CMat>> {
        inst.streams
            .iter()
            .enumerate()
            .map(|(j, &lj)| {
                (0..lj)
                    .map(|m| vals[inst.block(j, m)].as_hermitian().cloned().unwrap_or_default())
                    .collect()
            })
            .collect()
    };
    Ok(QvSolution {
        status: sol.status,
        xi: sol.primal[s].as_scalar().unwrap_or(f64::NAN),
        grams: regroup(&sol.primal),
        z: regroup(&sol.dual_slack),
        sinr_multipliers: sol.multipliers[..s].iter().zip(&inst.b).map(|(y, b)| y / b).collect(),
        power_multipliers: sol.multipliers[s..].to_vec(),
        gap: sol.gap,
        iterations: sol.iterations,
    })
}

/// Principal component `√λ₁ q₁` of a gram block and the ratio `λ₂/λ₁`.
pub fn extract_rank1(gram: &CMat) -> Result<(CVec, f64)> {
    if trace_re(gram) <= 1e-12 {
        return Err(Error::ZeroBlock(trace_re(gram)));
    }
    let eig = hermitian_eig(gram)?;
    let l1 = eig.max();
    let l2 = eig.values.get(1).copied().unwrap_or(0.0).max(0.0);
    let ratio = if l1 > 0.0 { l2 / l1 } else { 0.0 };
    let mut v = eig.vector(0).scale(l1.max(0.0).sqrt());
    numerics::phase_normalize(&mut v);
    Ok((v, ratio))
}

/// Checks the rank-one certificate of a solved instance.
pub fn certify(inst: &QvInstance, sol: &QvSolution) -> Result<RankCertificate> {
    let mut ratios = Vec::new();
    let mut z_ranks = Vec::new();
    let mut slackness = Vec::new();
    for (j, (gj, zj)) in sol.grams.iter().zip(&sol.z).enumerate() {
        for (m, (g, z)) in gj.iter().zip(zj).enumerate() {
            let ratio = match extract_rank1(g) {
                Ok((_, r)) => r,
                Err(Error::ZeroBlock(_)) => 0.0,
                Err(e) => return Err(e),
            };
            ratios.push(ratio);
            // Z = x_j I − Σ_i y_i A_i; the size of those terms sets the rank cutoff
            // (a plain λ_max(Z) reference breaks down when Z is numerically zero).
            let terms: f64 = sol.power_multipliers[j] * (inst.tx_antennas as f64).sqrt()
                + sol
                    .sinr_multipliers
                    .iter()
                    .zip(&inst.a)
                    .map(|(y, row)| y.abs() * row[j][m].norm())
                    .sum::<f64>();
            let eig = hermitian_eig(z)?;
            let reference = eig.max().max(terms);
            z_ranks.push(eig.values.iter().filter(|&&v| v > Z_RANK_CUTOFF * reference).count());
            slackness.push(trace_prod(z, g).abs());
        }
    }
    Ok(RankCertificate {
        ratios,
        z_ranks,
        slackness,
        gap: sol.gap,
        min_multiplier: sol.sinr_multipliers.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

/// Rank-one precoders recovered from a solution.
#[derive(Debug, Clone)]
pub struct ExtractedPrecoders {
    /// One `M×L_j` matrix per user.
    pub precoders: Vec<CMat>,
    pub max_ratio: f64,
    /// Common power scale applied to re-satisfy the SINR constraints (1 when
    /// every block was rank one).
    pub repair_scale: f64,
}

/// Extracts one precoder per stream. When a block is not rank one the
/// principal components are scaled up by the smallest common factor that
/// restores every SINR constraint.
pub fn extract_precoders(inst: &QvInstance, sol: &QvSolution) -> Result<ExtractedPrecoders> {
    let mut precoders = Vec::with_capacity(sol.grams.len());
    let mut max_ratio: f64 = 0.0;
    for gj in &sol.grams {
        let mut vj = CMat::zeros(inst.tx_antennas, gj.len());
        for (m, g) in gj.iter().enumerate() {
            let (v, r) = extract_rank1(g)?;
            max_ratio = max_ratio.max(r);
            vj.set_column(m, &v);
        }
        precoders.push(vj);
    }
    let mut repair_scale = 1.0;
    if max_ratio > RANK_RATIO_TOL {
        let grams: Vec<Vec<CMat>> = precoders
            .iter()
            .map(|vj| vj.column_iter().map(|c| c * c.adjoint()).collect())
            .collect();
        // Every constraint is linear in a common scale of all grams.
        for (lhs, b) in inst.evaluate(&grams).iter().zip(&inst.b) {
            if *lhs <= 0.0 {
                return Err(Error::NumericalFailure(format!(
                    "rank-one extraction cannot be repaired (ratio {max_ratio:.3e})"
                )));
            }
            repair_scale = f64::max(repair_scale, b / lhs);
        }
        log::warn!("rank-one certificate violated (ratio {max_ratio:.3e}); power scaled by {repair_scale:.6}");
        for v in &mut precoders {
            v.scale_mut(repair_scale.sqrt());
        }
    }
    Ok(ExtractedPrecoders {
        precoders,
        max_ratio,
        repair_scale,
    })
}

/// Default solver options for the precoder problem.
pub fn qv_options() -> SdpOptions {
    SdpOptions {
        tol: 1e-10,
        ..SdpOptions::default()
    }
}
