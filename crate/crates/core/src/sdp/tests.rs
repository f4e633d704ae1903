use super::*;
use crate::model::{complex_gaussian, stream_rng, RngPurpose};
use crate::numerics::{hermitian_eig, identity, min_eigenvalue, trace_prod};

fn herm(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

fn random_herm(seed: u64, idx: u64, n: usize) -> CMat {
    let mut rng = stream_rng(seed, RngPurpose::Test, idx);
    herm(&complex_gaussian(&mut rng, n, n))
}

/// Feasibility, weak duality and complementary slackness of a returned point.
fn check_certificate(p: &SdpProblem, sol: &SdpSolution, tol: f64) {
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!(sol.max_violation <= tol, "violation {}", sol.max_violation);
    let scale = 1.0 + sol.primal_objective.abs();
    assert!(sol.gap <= tol * scale, "gap {}", sol.gap);
    for (i, x) in sol.primal.iter().enumerate() {
        match (x, &sol.dual_slack[i]) {
            (BlockValue::Hermitian(x), BlockValue::Hermitian(z)) => {
                assert!(min_eigenvalue(x).unwrap() >= -tol);
                assert!(min_eigenvalue(z).unwrap() >= -tol * scale);
                assert!(trace_prod(x, z).abs() <= tol * scale * 10.0);
            }
            (BlockValue::Scalar(x), BlockValue::Scalar(z)) => {
                assert!(*x >= -tol && *z >= -tol * scale);
                assert!((x * z).abs() <= tol * scale * 10.0);
            }
            _ => panic!("block kind mismatch"),
        }
    }
    for m in &sol.multipliers {
        assert!(*m >= -tol * scale);
    }
    // Z = C − Σ y A, recomputed from the problem data.
    for (b, kind) in p.blocks.iter().enumerate() {
        let coef = |terms: &[Term]| -> Coef {
            let mut out = match kind {
                BlockKind::Hermitian(n) => Coef::Hermitian(CMat::zeros(*n, *n)),
                BlockKind::Scalar => Coef::Scalar(0.0),
            };
            for t in terms.iter().filter(|t| t.block == b) {
                match (&mut out, &t.coef) {
                    (Coef::Hermitian(o), Coef::Hermitian(a)) => *o += a,
                    (Coef::Scalar(o), Coef::Scalar(a)) => *o += a,
                    _ => unreachable!(),
                }
            }
            out
        };
        let mut z = coef(&p.objective);
        for (con, y) in p.constraints.iter().zip(&sol.multipliers) {
            let sign = match con.sense {
                Sense::Ge => 1.0,
                Sense::Le => -1.0,
            };
            match (&mut z, coef(&con.terms)) {
                (Coef::Hermitian(o), Coef::Hermitian(a)) => *o -= a.scale(sign * y),
                (Coef::Scalar(o), Coef::Scalar(a)) => *o -= sign * y * a,
                _ => unreachable!(),
            }
        }
        let err = match (&z, &sol.dual_slack[b]) {
            (Coef::Hermitian(a), BlockValue::Hermitian(zz)) => (a - zz).norm(),
            (Coef::Scalar(a), BlockValue::Scalar(zz)) => (a - zz).abs(),
            _ => unreachable!(),
        };
        assert!(err <= 1e-6 * scale, "dual slack mismatch {err}");
    }
}

#[test]
fn embedding_of_two_by_two() {
    let x = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
    let y = embed_complex(&x).unwrap();
    let mut ev: Vec<f64> = y.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for (a, b) in ev.iter().zip([3.0, 3.0, 1.0, 1.0]) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((collapse_embedded(&y) - x).norm() < 1e-15);
}

#[test]
fn embedding_of_scalar() {
    let y = embed_complex(&CMat::from_element(1, 1, c(5.0, 0.0))).unwrap();
    assert_eq!(y, DMatrix::from_row_slice(2, 2, &[5.0, 0.0, 0.0, 5.0]));
}

#[test]
fn embedding_doubles_trace_products() {
    for seed in 0..20 {
        let a = random_herm(seed, 0, 3);
        let b = random_herm(seed, 1, 3);
        let lhs = embed_complex(&a).unwrap().dot(&embed_complex(&b).unwrap());
        assert!((lhs - 2.0 * trace_prod(&a, &b)).abs() < 1e-10);
    }
}

#[test]
fn embedding_preserves_psd() {
    for seed in 0..20 {
        let a = random_herm(seed, 2, 3);
        let lo_c = min_eigenvalue(&a).unwrap();
        let lo_r = embed_complex(&a).unwrap().symmetric_eigenvalues().min();
        assert!((lo_c - lo_r).abs() < 1e-10);
    }
}

#[test]
fn embedding_rejects_non_hermitian() {
    let x = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    assert!(matches!(embed_complex(&x), Err(Error::NotHermitian(_))));
}

#[test]
fn scalar_lp() {
    // min Ξ  s.t.  x ≤ Ξ, x ≥ 1
    let p = SdpProblem {
        blocks: vec![BlockKind::Scalar, BlockKind::Scalar],
        objective: vec![Term::scalar(1, 1.0)],
        constraints: vec![
            Constraint {
                terms: vec![Term::scalar(0, 1.0), Term::scalar(1, -1.0)],
                sense: Sense::Le,
                rhs: 0.0,
            },
            Constraint {
                terms: vec![Term::scalar(0, 1.0)],
                sense: Sense::Ge,
                rhs: 1.0,
            },
        ],
    };
    let sol = solve_sdp(&p, &SdpOptions::default()).unwrap();
    assert!((sol.primal_objective - 1.0).abs() < 1e-7);
    check_certificate(&p, &sol, 1e-6);
}

#[test]
fn single_link_power_minimization() {
    // min Ξ  s.t.  v ≤ Ξ,  (h² − ε) v ≥ γ N0,  one 1×1 Hermitian block
    let (h2, eps, gamma, n0) = (4.0, 0.5, 2.0, 0.1);
    let p = SdpProblem {
        blocks: vec![BlockKind::Hermitian(1), BlockKind::Scalar],
        objective: vec![Term::scalar(1, 1.0)],
        constraints: vec![
            Constraint {
                terms: vec![Term::herm(0, identity(1)), Term::scalar(1, -1.0)],
                sense: Sense::Le,
                rhs: 0.0,
            },
            Constraint {
                terms: vec![Term::herm(0, identity(1).scale(h2 - eps))],
                sense: Sense::Ge,
                rhs: gamma * n0,
            },
        ],
    };
    let sol = solve_sdp(&p, &SdpOptions::default()).unwrap();
    let want = gamma * n0 / (h2 - eps);
    assert!((sol.primal_objective - want).abs() < 1e-8 * (1.0 + want));
    check_certificate(&p, &sol, 1e-6);
}

#[test]
fn infeasible_is_reported() {
    // x ≥ 2 and x ≤ 1
    let p = SdpProblem {
        blocks: vec![BlockKind::Hermitian(2)],
        objective: vec![Term::herm(0, identity(2))],
        constraints: vec![
            Constraint {
                terms: vec![Term::herm(0, identity(2))],
                sense: Sense::Ge,
                rhs: 2.0,
            },
            Constraint {
                terms: vec![Term::herm(0, identity(2))],
                sense: Sense::Le,
                rhs: 1.0,
            },
        ],
    };
    let sol = solve_sdp(&p, &SdpOptions::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Infeasible);
}

#[test]
fn gain_below_error_radius_is_infeasible() {
    let p = SdpProblem {
        blocks: vec![BlockKind::Hermitian(1)],
        objective: vec![Term::herm(0, identity(1))],
        constraints: vec![Constraint {
            terms: vec![Term::herm(0, identity(1).scale(0.1 - 0.5))],
            sense: Sense::Ge,
            rhs: 0.1,
        }],
    };
    let sol = solve_sdp(&p, &SdpOptions::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Infeasible);
}

#[test]
fn unbounded_is_reported() {
    let p = SdpProblem {
        blocks: vec![BlockKind::Scalar, BlockKind::Scalar],
        objective: vec![Term::scalar(0, -1.0)],
        constraints: vec![Constraint {
            terms: vec![Term::scalar(0, 1.0), Term::scalar(1, -1.0)],
            sense: Sense::Le,
            rhs: 1.0,
        }],
    };
    let sol = solve_sdp(&p, &SdpOptions::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Unbounded);
}

#[test]
fn trace_one_gives_smallest_eigenvalue() {
    // min tr(CX) s.t. tr X = 1 has value λ_min(C), attained at the eigenprojector.
    for seed in 0..15 {
        let n = 1 + seed as usize % 3;
        let cm = random_herm(seed, 3, n);
        let p = SdpProblem {
            blocks: vec![BlockKind::Hermitian(n)],
            objective: vec![Term::herm(0, cm.clone())],
            constraints: [Sense::Ge, Sense::Le]
                .into_iter()
                .map(|sense| Constraint {
                    terms: vec![Term::herm(0, identity(n))],
                    sense,
                    rhs: 1.0,
                })
                .collect(),
        };
        let sol = solve_sdp(&p, &SdpOptions::default()).unwrap();
        let eig = hermitian_eig(&cm).unwrap();
        let lo = *eig.values.last().unwrap();
        assert!((sol.primal_objective - lo).abs() < 1e-7, "seed {seed}");
        check_certificate(&p, &sol, 1e-6);
    }
}

#[test]
fn random_feasible_sdps_certify() {
    // Constraints built around a known interior point so feasibility is guaranteed,
    // objective PD so the problem is bounded.
    for seed in 0..20 {
        let n1 = 1 + seed as usize % 3;
        let n2 = 1 + (seed as usize / 3) % 3;
        let x1 = {
            let g = complex_gaussian(&mut stream_rng(seed, RngPurpose::Test, 10), n1, n1);
            &g * g.adjoint() + identity(n1)
        };
        let x2 = {
            let g = complex_gaussian(&mut stream_rng(seed, RngPurpose::Test, 11), n2, n2);
            &g * g.adjoint() + identity(n2)
        };
        let c1 = {
            let g = complex_gaussian(&mut stream_rng(seed, RngPurpose::Test, 12), n1, n1);
            &g * g.adjoint() + identity(n1).scale(0.1)
        };
        let mut constraints = Vec::new();
        for i in 0..4 {
            let a1 = random_herm(seed, 20 + i, n1);
            let a2 = random_herm(seed, 40 + i, n2);
            let val = trace_prod(&a1, &x1) + trace_prod(&a2, &x2) + 0.3 * (i % 2) as f64;
            let sense = if i % 2 == 0 { Sense::Ge } else { Sense::Le };
            let rhs = if sense == Sense::Ge { val - 0.5 } else { val + 0.5 };
            constraints.push(Constraint {
                terms: vec![Term::herm(0, a1), Term::herm(1, a2), Term::scalar(2, 1.0)],
                sense,
                rhs,
            });
        }
        let p = SdpProblem {
            blocks: vec![BlockKind::Hermitian(n1), BlockKind::Hermitian(n2), BlockKind::Scalar],
            objective: vec![Term::herm(0, c1), Term::herm(1, identity(n2)), Term::scalar(2, 1.0)],
            constraints,
        };
        let sol = solve_sdp(&p, &SdpOptions::default()).unwrap();
        check_certificate(&p, &sol, 1e-6);
        // The known interior point can only do worse.
        let interior = [BlockValue::Hermitian(x1), BlockValue::Hermitian(x2), BlockValue::Scalar(0.0)];
        assert!(sol.primal_objective <= SdpProblem::evaluate(&p.objective, &interior) + 1e-7);
    }
}

#[test]
fn invalid_problems_are_rejected() {
    let p = SdpProblem {
        blocks: vec![BlockKind::Hermitian(2)],
        objective: vec![Term::herm(0, identity(3))],
        constraints: vec![],
    };
    assert!(matches!(solve_sdp(&p, &SdpOptions::default()), Err(Error::DimensionMismatch(_))));
    let p = SdpProblem {
        blocks: vec![BlockKind::Scalar],
        objective: vec![Term::herm(0, identity(1))],
        constraints: vec![],
    };
    assert!(p.validate().is_err());
}

#[test]
fn json_dump_lists_blocks_and_constraints() {
    let p = SdpProblem {
        blocks: vec![BlockKind::Hermitian(1), BlockKind::Scalar],
        objective: vec![Term::scalar(1, 1.0)],
        constraints: vec![Constraint {
            terms: vec![Term::herm(0, identity(1))],
            sense: Sense::Ge,
            rhs: 0.5,
        }],
    };
    let j = p.to_json();
    assert_eq!(j["blocks"].as_array().unwrap().len(), 2);
    assert_eq!(j["constraints"][0]["sense"], ">=");
    assert_eq!(j["constraints"][0]["terms"][0]["re"][0][0], 1.0);
}
