//! Infeasible-start primal-dual path-following method with Nesterov–Todd
//! scaling and a Mehrotra predictor-corrector, on real symmetric blocks plus a
//! non-negative orthant.
//!
//! Inequalities become equalities through one slack per constraint, so the
//! core solves the standard pair
//!
//! ```text
//! min ⟨C, X⟩  s.t.  A(X) = b, X ⪰ 0        max bᵀy  s.t.  C − Aᵀy = Z ⪰ 0
//! ```

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{
    collapse_embedded, embed_unchecked, BlockKind, BlockValue, Coef, SdpOptions, SdpProblem,
    SdpSolution, SdpStatus, Sense,
};
use crate::error::Result;
use crate::numerics::symmetrized;

/// A point in the product cone: symmetric blocks and an orthant vector.
#[derive(Debug, Clone)]
struct Pt {
    s: Vec<DMatrix<f64>>,
    l: DVector<f64>,
}

impl Pt {
    fn zeros(dims: &[usize], nlp: usize) -> Self {
        Pt {
            s: dims.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
            l: DVector::zeros(nlp),
        }
    }

    fn dot(&self, o: &Pt) -> f64 {
        self.s.iter().zip(&o.s).map(|(a, b)| a.dot(b)).sum::<f64>() + self.l.dot(&o.l)
    }

    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    fn axpy(&mut self, alpha: f64, o: &Pt) {
        for (a, b) in self.s.iter_mut().zip(&o.s) {
            *a += b.scale(alpha);
        }
        self.l.axpy(alpha, &o.l, 1.0);
    }

    fn sub(&self, o: &Pt) -> Pt {
        let mut out = self.clone();
        out.axpy(-1.0, o);
        out
    }
}

enum Slot {
    Psd(usize),
    Lp(usize),
}

/// Problem data after embedding.
struct Embedded {
    dims: Vec<usize>,
    nlp: usize,
    slots: Vec<Slot>,
    c: Pt,
    a: Vec<Pt>,
    /// `nonzero[i][b]`: constraint `i` touches symmetric block `b`.
    nonzero: Vec<Vec<bool>>,
    b: DVector<f64>,
}

impl Embedded {
    fn build(p: &SdpProblem) -> Result<Self> {
        let mut dims = Vec::new();
        let mut slots = Vec::new();
        let mut nscalar = 0;
        for kind in &p.blocks {
            match kind {
                BlockKind::Hermitian(n) => {
                    slots.push(Slot::Psd(dims.len()));
                    dims.push(2 * n);
                }
                BlockKind::Scalar => {
                    slots.push(Slot::Lp(nscalar));
                    nscalar += 1;
                }
            }
        }
        let m = p.constraints.len();
        let nlp = nscalar + m;

        // Hermitian coefficients are halved so that ⟨embed(A)/2, embed(X)⟩ = tr(AX).
        let fill = |terms: &[super::Term], pt: &mut Pt, nz: &mut Vec<bool>| -> Result<()> {
            for t in terms {
                match (&slots[t.block], &t.coef) {
                    (Slot::Psd(i), Coef::Hermitian(a)) => {
                        let a = symmetrized(a)?;
                        pt.s[*i] += embed_unchecked(&a).scale(0.5);
                        nz[*i] = true;
                    }
                    (Slot::Lp(i), Coef::Scalar(x)) => pt.l[*i] += x,
                    _ => unreachable!("validated"),
                }
            }
            Ok(())
        };

        let mut c = Pt::zeros(&dims, nlp);
        let mut scratch = vec![false; dims.len()];
        fill(&p.objective, &mut c, &mut scratch)?;

        let mut a = Vec::with_capacity(m);
        let mut nonzero = Vec::with_capacity(m);
        let mut b = DVector::zeros(m);
        for (i, con) in p.constraints.iter().enumerate() {
            let mut pt = Pt::zeros(&dims, nlp);
            let mut nz = vec![false; dims.len()];
            fill(&con.terms, &mut pt, &mut nz)?;
            pt.l[nscalar + i] = match con.sense {
                Sense::Ge => -1.0,
                Sense::Le => 1.0,
            };
            b[i] = con.rhs;
            a.push(pt);
            nonzero.push(nz);
        }
        Ok(Embedded {
            dims,
            nlp,
            slots,
            c,
            a,
            nonzero,
            b,
        })
    }

    fn apply_a(&self, x: &Pt) -> DVector<f64> {
        DVector::from_iterator(self.a.len(), self.a.iter().map(|ai| ai.dot(x)))
    }

    fn apply_at(&self, y: &DVector<f64>) -> Pt {
        let mut out = Pt::zeros(&self.dims, self.nlp);
        for (ai, &yi) in self.a.iter().zip(y.iter()) {
            out.axpy(yi, ai);
        }
        out
    }

    fn degree(&self) -> f64 {
        (self.dims.iter().sum::<usize>() + self.nlp) as f64
    }
}

/// Lower bound on [`centrality`] accepted for a new iterate.
const CENTRALITY: f64 = 1e-3;

/// Nesterov–Todd scaling of one symmetric block: `W = G Gᵀ`, with
/// `Gᵀ Z G = G⁻¹ X G⁻ᵀ = diag(λ)`.
struct BlockScaling {
    g: DMatrix<f64>,
    w: DMatrix<f64>,
    lam: DVector<f64>,
}

fn sym_sqrt(x: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = SymmetricEigen::new(x.clone());
    if eig.eigenvalues.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let mut q = eig.eigenvectors.clone();
    for (i, v) in eig.eigenvalues.iter().enumerate() {
        q.column_mut(i).scale_mut(v.sqrt());
    }
    Some(&q * eig.eigenvectors.transpose())
}

fn nt_block(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<BlockScaling> {
    let xs = sym_sqrt(x)?;
    // X^{1/2} Z X^{1/2} = Q diag(λ²) Qᵀ, G = X^{1/2} Q diag(λ)^{-1/2}.
    let inner = &xs * z * &xs;
    let eig = SymmetricEigen::new((&inner + inner.transpose()).scale(0.5));
    if eig.eigenvalues.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let lam = eig.eigenvalues.map(f64::sqrt);
    let mut g = &xs * &eig.eigenvectors;
    for (i, s) in lam.iter().enumerate() {
        g.column_mut(i).scale_mut(1.0 / s.sqrt());
    }
    let w = &g * g.transpose();
    Some(BlockScaling { g, w, lam })
}

struct Scaling {
    blocks: Vec<BlockScaling>,
    lp_g: DVector<f64>,
    lp_lam: DVector<f64>,
}

impl Scaling {
    fn new(x: &Pt, z: &Pt) -> Option<Self> {
        let blocks = x
            .s
            .iter()
            .zip(&z.s)
            .map(|(xb, zb)| nt_block(xb, zb))
            .collect::<Option<Vec<_>>>()?;
        if x.l.iter().chain(z.l.iter()).any(|&v| !(v > 0.0)) {
            return None;
        }
        let lp_g = x.l.zip_map(&z.l, |a, b| (a / b).sqrt());
        let lp_lam = x.l.zip_map(&z.l, |a, b| (a * b).sqrt());
        Some(Scaling { blocks, lp_g, lp_lam })
    }

    /// `G S Gᵀ` (and `g ∘ s` on the orthant).
    fn unscale_primal(&self, s: &Pt) -> Pt {
        Pt {
            s: self
                .blocks
                .iter()
                .zip(&s.s)
                .map(|(b, sb)| &b.g * sb * b.g.transpose())
                .collect(),
            l: self.lp_g.component_mul(&s.l),
        }
    }

    /// `W D W` (and `w ∘ d`).
    fn w_apply(&self, d: &Pt) -> Pt {
        Pt {
            s: self
                .blocks
                .iter()
                .zip(&d.s)
                .map(|(b, db)| &b.w * db * &b.w)
                .collect(),
            l: self.lp_g.component_mul(&self.lp_g).component_mul(&d.l),
        }
    }

    /// `Gᵀ D G` (and `g ∘ d`).
    fn scale_dual(&self, d: &Pt) -> Pt {
        Pt {
            s: self
                .blocks
                .iter()
                .zip(&d.s)
                .map(|(b, db)| b.g.transpose() * db * &b.g)
                .collect(),
            l: self.lp_g.component_mul(&d.l),
        }
    }

    /// `λ ∘ λ` as a point.
    fn lam_sq(&self) -> Pt {
        Pt {
            s: self
                .blocks
                .iter()
                .map(|b| DMatrix::from_diagonal(&b.lam.map(|v| v * v)))
                .collect(),
            l: self.lp_lam.map(|v| v * v),
        }
    }

    /// Solves `λ ∘ S = R` for `S`.
    fn lam_solve(&self, r: &Pt) -> Pt {
        Pt {
            s: self
                .blocks
                .iter()
                .zip(&r.s)
                .map(|(b, rb)| {
                    DMatrix::from_fn(rb.nrows(), rb.ncols(), |i, j| 2.0 * rb[(i, j)] / (b.lam[i] + b.lam[j]))
                })
                .collect(),
            l: r.l.component_div(&self.lp_lam),
        }
    }

    /// Largest step keeping `λ + α D ⪰ 0` for a scaled direction `D`.
    fn max_step(&self, d: &Pt) -> f64 {
        let mut alpha = f64::INFINITY;
        for (b, db) in self.blocks.iter().zip(&d.s) {
            let inv = b.lam.map(|v| 1.0 / v.sqrt());
            let m = DMatrix::from_fn(db.nrows(), db.ncols(), |i, j| inv[i] * db[(i, j)] * inv[j]);
            let m = (&m + m.transpose()).scale(0.5);
            let lo = m.symmetric_eigenvalues().min();
            if lo < 0.0 {
                alpha = alpha.min(-1.0 / lo);
            }
        }
        for (lam, di) in self.lp_lam.iter().zip(d.l.iter()) {
            if *di < 0.0 {
                alpha = alpha.min(-lam / di);
            }
        }
        alpha
    }
}

/// Smallest eigenvalue of `X^{1/2} Z X^{1/2}` (or `x_i z_i`) over all blocks,
/// relative to `μ`. Zero or negative when the point is not interior.
fn centrality(x: &Pt, z: &Pt, nu: f64) -> f64 {
    let mu = x.dot(z) / nu;
    if !(mu > 0.0) {
        return 0.0;
    }
    let mut lo = f64::INFINITY;
    for (xb, zb) in x.s.iter().zip(&z.s) {
        let Some(ch) = xb.clone().cholesky() else {
            return 0.0;
        };
        let l = ch.l();
        let p = l.transpose() * zb * &l;
        lo = lo.min(((&p + p.transpose()) * 0.5).symmetric_eigenvalues().min());
    }
    for (a, b) in x.l.iter().zip(z.l.iter()) {
        if !(*a > 0.0 && *b > 0.0) {
            return 0.0;
        }
        lo = lo.min(a * b);
    }
    lo / mu
}

fn jordan(a: &Pt, b: &Pt) -> Pt {
    Pt {
        s: a
            .s
            .iter()
            .zip(&b.s)
            .map(|(x, y)| {
                let p = x * y;
                (&p + p.transpose()).scale(0.5)
            })
            .collect(),
        l: a.l.component_mul(&b.l),
    }
}

/// Projects every block onto symmetric matrices of the form `[[A, −B], [B, A]]`,
/// the image of the Hermitian embedding. Exact directions stay in that
/// subspace; rounding drifts out of it and splits eigenvalue pairs, which near
/// the optimum pushes the smaller one of a pair below zero.
fn symmetrize(p: &mut Pt) {
    for b in &mut p.s {
        let t = b.transpose();
        *b += t;
        b.scale_mut(0.5);
        let n = b.nrows() / 2;
        for j in 0..n {
            for i in 0..n {
                let re = 0.5 * (b[(i, j)] + b[(i + n, j + n)]);
                let im = 0.5 * (b[(i + n, j)] - b[(i, j + n)]);
                b[(i, j)] = re;
                b[(i + n, j + n)] = re;
                b[(i + n, j)] = im;
                b[(i, j + n)] = -im;
            }
        }
    }
}

struct Direction {
    dx: Pt,
    dy: DVector<f64>,
    dz: Pt,
    dx_scaled: Pt,
    dz_scaled: Pt,
}

enum Factor {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            Factor::Chol(c) => Some(c.solve(rhs)),
            Factor::Lu(lu) => lu.solve(rhs),
        }
    }
}

/// Cholesky of the Schur complement, with a growing diagonal shift when
/// near-dependent constraints make it numerically singular.
fn factorize(m: DMatrix<f64>) -> Factor {
    let scale = m.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut shift = 0.0;
    for _ in 0..8 {
        let mut shifted = m.clone();
        for i in 0..m.nrows() {
            shifted[(i, i)] += shift;
        }
        if let Some(ch) = shifted.cholesky() {
            return Factor::Chol(ch);
        }
        shift = if shift == 0.0 { 1e-14 * scale } else { shift * 100.0 };
    }
    Factor::Lu(m.lu())
}

fn schur(data: &Embedded, sc: &Scaling) -> DMatrix<f64> {
    let m = data.a.len();
    let mut out = DMatrix::zeros(m, m);
    let w_lp = sc.lp_g.component_mul(&sc.lp_g);
    for j in 0..m {
        let aj = &data.a[j];
        let waw: Vec<Option<DMatrix<f64>>> = sc
            .blocks
            .iter()
            .enumerate()
            .map(|(b, s)| data.nonzero[j][b].then(|| &s.w * &aj.s[b] * &s.w))
            .collect();
        let wl = w_lp.component_mul(&aj.l);
        for i in 0..=j {
            let ai = &data.a[i];
            let mut v = ai.l.dot(&wl);
            for (b, blk) in waw.iter().enumerate() {
                if let (Some(blk), true) = (blk, data.nonzero[i][b]) {
                    v += ai.s[b].dot(blk);
                }
            }
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

fn direction(
    data: &Embedded,
    sc: &Scaling,
    factor: &Factor,
    rp: &DVector<f64>,
    rd: &Pt,
    s: &Pt,
) -> Option<Direction> {
    let gsg = sc.unscale_primal(s);
    let wrw = sc.w_apply(rd);
    let rhs = rp - data.apply_a(&gsg.sub(&wrw));
    let dy = factor.solve(&rhs)?;
    let mut dz = rd.sub(&data.apply_at(&dy));
    symmetrize(&mut dz);
    let mut dx = gsg.sub(&sc.w_apply(&dz));
    symmetrize(&mut dx);
    let dz_scaled = sc.scale_dual(&dz);
    let dx_scaled = s.sub(&dz_scaled);
    if !dy.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some(Direction {
        dx,
        dy,
        dz,
        dx_scaled,
        dz_scaled,
    })
}

fn initial_point(data: &Embedded) -> (Pt, Pt) {
    let m = data.a.len();
    let mut x = Pt::zeros(&data.dims, data.nlp);
    let mut z = Pt::zeros(&data.dims, data.nlp);
    for (bi, &n) in data.dims.iter().enumerate() {
        let nf = n as f64;
        let mut xi: f64 = 10f64.max(nf.sqrt());
        let mut eta: f64 = 10f64.max(nf.sqrt()).max(data.c.s[bi].norm());
        for i in 0..m {
            let an = data.a[i].s[bi].norm();
            xi = xi.max(nf * (1.0 + data.b[i].abs()) / (1.0 + an));
            eta = eta.max(an);
        }
        x.s[bi] = DMatrix::identity(n, n).scale(xi);
        z.s[bi] = DMatrix::identity(n, n).scale(eta);
    }
    if data.nlp > 0 {
        let nf = data.nlp as f64;
        let mut xi: f64 = 10f64.max(nf.sqrt());
        let mut eta: f64 = 10f64.max(nf.sqrt()).max(data.c.l.norm());
        for i in 0..m {
            let an = data.a[i].l.norm();
            xi = xi.max(nf * (1.0 + data.b[i].abs()) / (1.0 + an));
            eta = eta.max(an);
        }
        x.l.fill(xi);
        z.l.fill(eta);
    }
    (x, z)
}

/// Solves `p`. Never panics on numerical trouble; the status reports the outcome.
pub fn solve_sdp(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    p.validate()?;
    let data = Embedded::build(p)?;
    let m = data.a.len();
    let nu = data.degree();
    let b_norm = data.b.norm();
    let c_norm = data.c.norm();

    let (mut x, mut z) = initial_point(&data);
    let mut y = DVector::zeros(m);
    let mut status = SdpStatus::MaxIter;
    let mut iterations = 0;
    let mut stalls = 0;
    // Best iterate so far, for runs that reach the accuracy floor and then drift.
    let mut best: Option<(f64, Pt, DVector<f64>, Pt)> = None;

    for it in 0..=opts.max_iter {
        iterations = it;
        let rp = &data.b - data.apply_a(&x);
        let rd = data.c.sub(&z).sub(&data.apply_at(&y));
        let pobj = data.c.dot(&x);
        let dobj = data.b.dot(&y);
        let xz = x.dot(&z);
        let pinf = rp.norm() / (1.0 + b_norm);
        let dinf = rd.norm() / (1.0 + c_norm);
        let denom = 1.0 + pobj.abs() + dobj.abs();
        let gap = (pobj - dobj).abs().max(xz) / denom;
        log::trace!("ipm it={it} pobj={pobj:.10e} dobj={dobj:.10e} pinf={pinf:.2e} dinf={dinf:.2e} gap={gap:.2e}");

        let residual = pinf.max(dinf).max(gap);
        if residual <= opts.tol {
            status = SdpStatus::Optimal;
            break;
        }
        if residual <= opts.reduced_tol && best.as_ref().is_none_or(|b| residual < b.0) {
            best = Some((residual, x.clone(), y.clone(), z.clone()));
        }
        // Rays: y with bᵀy > 0 and Aᵀy ⪯ 0 certifies primal infeasibility;
        // X with ⟨C, X⟩ < 0 and A(X) = 0 certifies an unbounded primal.
        let aty_z = data.c.sub(&rd).norm();
        if dobj > 0.0 && dobj > opts.infeasibility_ratio * aty_z.max(f64::MIN_POSITIVE) * (1.0 + c_norm) {
            status = SdpStatus::Infeasible;
            break;
        }
        let ax = (&data.b - &rp).norm();
        if pobj < 0.0 && -pobj > opts.infeasibility_ratio * ax.max(f64::MIN_POSITIVE) * (1.0 + b_norm) {
            status = SdpStatus::Unbounded;
            break;
        }
        if it == opts.max_iter {
            break;
        }

        let Some(sc) = Scaling::new(&x, &z) else {
            log::debug!("ipm: lost interiority at iteration {it}");
            break;
        };
        let mmat = schur(&data, &sc);
        let factor = factorize(mmat);
        let mu = xz / nu;

        // predictor
        let lam_sq = sc.lam_sq();
        let mut s_aff = sc.lam_solve(&lam_sq);
        s_aff.s.iter_mut().for_each(|b| b.neg_mut());
        s_aff.l.neg_mut();
        let Some(aff) = direction(&data, &sc, &factor, &rp, &rd, &s_aff) else {
            break;
        };
        let ap = sc.max_step(&aff.dx_scaled).min(1.0);
        let ad = sc.max_step(&aff.dz_scaled).min(1.0);
        let mut xa = x.clone();
        xa.axpy(ap, &aff.dx);
        let mut za = z.clone();
        za.axpy(ad, &aff.dz);
        let sigma = (xa.dot(&za) / xz).clamp(0.0, 1.0).powi(3);

        // corrector
        let mut rc = jordan(&aff.dx_scaled, &aff.dz_scaled);
        rc.axpy(1.0, &lam_sq);
        let mut target = Pt::zeros(&data.dims, data.nlp);
        for blk in &mut target.s {
            blk.fill_with_identity();
            blk.scale_mut(sigma * mu);
        }
        target.l.fill(sigma * mu);
        let rc = target.sub(&rc);
        let s_cor = sc.lam_solve(&rc);
        let Some(dir) = direction(&data, &sc, &factor, &rp, &rd, &s_cor) else {
            break;
        };
        let tau = if gap < 1e-3 { 0.995 } else { 0.98 };
        let mut ap = (tau * sc.max_step(&dir.dx_scaled)).min(1.0);
        let mut ad = (tau * sc.max_step(&dir.dz_scaled)).min(1.0);
        // Shorten the step while a block runs ahead to the boundary, which
        // would ruin later directions. Divergent (infeasible) runs never get
        // central again, so after a few tries the full step is taken anyway.
        let step = |ap: f64, ad: f64| {
            let mut xn = x.clone();
            xn.axpy(ap, &dir.dx);
            let mut zn = z.clone();
            zn.axpy(ad, &dir.dz);
            symmetrize(&mut xn);
            symmetrize(&mut zn);
            (xn, zn)
        };
        let (full_p, full_d) = (ap, ad);
        let mut next = step(ap, ad);
        let mut tries = 0;
        while centrality(&next.0, &next.1, nu) < CENTRALITY {
            tries += 1;
            if tries > 20 {
                (ap, ad) = (full_p, full_d);
                next = step(ap, ad);
                break;
            }
            ap *= 0.8;
            ad *= 0.8;
            next = step(ap, ad);
        }
        (x, z) = next;
        y.axpy(ad, &dir.dy, 1.0);

        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
            if stalls >= 3 {
                log::debug!("ipm: stalled at iteration {it}");
                break;
            }
        } else {
            stalls = 0;
        }
    }

    if status == SdpStatus::MaxIter {
        if let Some((r, bx, by, bz)) = best {
            log::debug!("ipm: accepting reduced accuracy {r:.2e} after {iterations} iterations");
            (x, y, z) = (bx, by, bz);
            status = SdpStatus::Optimal;
        }
    }
    Ok(extract(p, &data, &x, &y, &z, status, iterations))
}

fn extract(
    p: &SdpProblem,
    data: &Embedded,
    x: &Pt,
    y: &DVector<f64>,
    z: &Pt,
    status: SdpStatus,
    iterations: usize,
) -> SdpSolution {
    let value = |pt: &Pt, slot: &Slot, dual: bool| match slot {
        Slot::Psd(i) => {
            let h = collapse_embedded(&pt.s[*i]);
            BlockValue::Hermitian(if dual { h.scale(2.0) } else { h })
        }
        Slot::Lp(i) => BlockValue::Scalar(pt.l[*i]),
    };
    let primal: Vec<BlockValue> = data.slots.iter().map(|s| value(x, s, false)).collect();
    let dual_slack: Vec<BlockValue> = data.slots.iter().map(|s| value(z, s, true)).collect();
    let multipliers = p
        .constraints
        .iter()
        .zip(y.iter())
        .map(|(con, &yi)| match con.sense {
            Sense::Ge => yi,
            Sense::Le => -yi,
        })
        .collect();
    let primal_objective = SdpProblem::evaluate(&p.objective, &primal);
    let dual_objective = data.b.dot(y);
    let max_violation = p
        .constraints
        .iter()
        .map(|con| {
            let lhs = SdpProblem::evaluate(&con.terms, &primal);
            match con.sense {
                Sense::Ge => (con.rhs - lhs).max(0.0),
                Sense::Le => (lhs - con.rhs).max(0.0),
            }
        })
        .fold(0.0, f64::max);
    SdpSolution {
        status,
        primal,
        dual_slack,
        multipliers,
        primal_objective,
        dual_objective,
        gap: (primal_objective - dual_objective).abs(),
        max_violation,
        iterations,
    }
}
