//! The acceptance gate: twelve end-to-end criteria, one test each. Every
//! test prints a single summary line; the assertions behind it are exact
//! (no tolerances anywhere).

use std::str::FromStr;
use std::time::Instant;

use num_rational::BigRational;

use qbrst_core::brst::{
    assemble_q_abstract, build_x_tower, recurrence_residual, representative_residual, x_candidate,
    x_initial,
};
use qbrst_core::fock::{operator_matrix, HodgeContext, StateSpace};
use qbrst_core::glq::{build_instance, classical_algebra, classical_limit, nf_mat, nf_poly};
use qbrst_core::ncring::NCPoly;
use qbrst_core::qla::{derive_from_glq, gl11, sl2};
use qbrst_core::wedge::{build_tower, compute_height, Height};
use qbrst_core::{rmat, Expr, Scalar};

fn line(n: usize, what: &str) {
    println!("criterion {n:02}: {what} -> PASS");
}

#[test]
fn criterion_01_hecke_and_trace_invariants() {
    for n in 1..=3usize {
        let t0 = Instant::now();
        let r = rmat::rhat(n, 1, 2);
        let rr = r.mul(&r);
        let hecke = rr.sub(&r.scale(&Scalar::lambda())).sub(&Expr::identity(&[
            (1, n),
            (2, n),
        ]));
        assert!(hecke.is_zero(), "Hecke fails at N = {n}");
        let ri = rmat::rhat_inv(n, 1, 2);
        assert!(r.mul(&ri).sub(&Expr::identity(&[(1, n), (2, n)])).is_zero());
        let tr_ri = rmat::qtrace(&ri, n, 1);
        assert!(tr_ri.sub(&Expr::identity(&[(2, n)])).is_zero());
        let tr_r = rmat::qtrace(&r, n, 1);
        let q2n = Scalar::q_pow(2 * n as i64);
        assert!(tr_r.sub(&Expr::identity(&[(2, n)]).scale(&q2n)).is_zero());
        assert!(t0.elapsed().as_secs() < 1, "N = {n} exceeded one second");
    }
    line(1, "Hecke condition and weighted traces, N = 1, 2, 3, each < 1 s");
}

#[test]
fn criterion_02_axiom_suite_with_corruption_control() {
    let t0 = Instant::now();
    for (name, qla) in [
        ("sl2", sl2()),
        ("gl11", gl11()),
        ("glq2", derive_from_glq(2).unwrap()),
    ] {
        let rep = qla.check_axioms();
        assert!(rep.all_pass(), "{name}: {:?}", rep.residual_counts());
    }
    let mut bad = sl2();
    bad.c.set(vec![0, 0, 0], Scalar::q());
    assert!(!bad.check_axioms().all_pass(), "corruption went unnoticed");
    assert!(t0.elapsed().as_secs() < 10);
    line(2, "axiom suite passes for sl2, gl11, glq2; a corrupted C fails");
}

#[test]
fn criterion_03_extended_s_matrix_ybe() {
    let t0 = Instant::now();
    for (name, qla) in [
        ("sl2", sl2()),
        ("gl11", gl11()),
        ("glq2", derive_from_glq(2).unwrap()),
    ] {
        assert!(
            qla.extended_s_ybe_residual().is_zero(),
            "extended S YBE fails for {name}"
        );
    }
    assert!(t0.elapsed().as_secs() < 10);
    line(3, "extended S-matrix braid relation holds for every instance");
}

#[test]
fn criterion_04_antisymmetrizer_heights() {
    let t0 = Instant::now();
    // permutation braiding: exterior algebra of C^N, height N
    for n in 1..=4usize {
        let h = compute_height(&rmat::perm(n, 1, 2), n + 2).unwrap();
        assert_eq!(h, Height::Found(n), "permutation height at N = {n}");
    }
    // the om braiding of the N = 2 calculus: height 4
    let qla = derive_from_glq(2).unwrap();
    let tower = build_tower(&qla.sigma_expr(1, 2), 6).unwrap();
    assert_eq!(tower.height, Height::Found(4));
    assert!(!tower.level(4).is_zero());
    assert!(tower.level(5).is_zero());
    assert!(t0.elapsed().as_secs() < 60);
    line(4, "both recursions agree; heights N (permutation) and 4 (om braid)");
}

#[test]
fn criterion_05_x_recurrence_levels() {
    let t0 = Instant::now();
    let qla = derive_from_glq(2).unwrap();
    let tower = build_tower(&qla.sigma_expr(1, 2), 6).unwrap();
    let (x1, _) = x_initial(&qla).unwrap();
    assert!(recurrence_residual(&qla, &tower, 1, &x1, None).is_zero());
    let x2 = x_candidate(&qla, 2);
    assert!(representative_residual(&qla, &tower, 2, &x2, &x1).is_zero());
    let x3 = x_candidate(&qla, 3);
    assert!(representative_residual(&qla, &tower, 3, &x3, &x2).is_zero());
    // the generic solver covers the same three levels; closed forms lie in
    // the solution sets up to sandwich equivalence (kernel directions)
    let xt = build_x_tower(&qla, 6).unwrap();
    assert_eq!(xt.levels.len(), 3);
    // involutive braiding: everything above the initial level may be zero
    let cl = sl2();
    let xt_cl = build_x_tower(&cl, cl.n_gen + 2).unwrap();
    for r in 2..=xt_cl.levels.len() {
        assert!(xt_cl.level_expr(r).is_zero());
    }
    let q_cl = assemble_q_abstract(cl.n_gen, &xt_cl);
    assert!(q_cl.terms.keys().all(|w| w.len() <= 3), "two-term operator");
    assert!(t0.elapsed().as_secs() < 600);
    line(5, "coefficient recurrence solved at levels 1, 2, 3; closed forms verified");
}

#[test]
fn criterion_06_brst_suite_n2() {
    let t0 = Instant::now();
    let inst = build_instance(2).unwrap();
    let q = inst.build_q().unwrap();
    println!("criterion 06: charge has {} terms", q.terms.len());
    let rep = inst.verify_brst_identities(&q).unwrap();
    for e in &rep.entries {
        println!(
            "criterion 06: {} -> {} residual terms in {} ms",
            e.name, e.residual_terms, e.millis
        );
    }
    assert!(rep.all_pass(), "{:?}", rep.failures());
    let secs = t0.elapsed().as_secs();
    assert!(secs < 1800, "stress suite took {secs} s");
    println!("criterion 06: total {secs} s (budget 1800 s)");
    line(6, "full N = 2 BRST suite exact, within the time budget");
}

#[test]
fn criterion_07_anti_brst_suite_n2() {
    let inst = build_instance(2).unwrap();
    let qstar = inst.build_qstar();
    let rep = inst.verify_qstar_identities(&qstar).unwrap();
    assert!(rep.all_pass(), "{:?}", rep.failures());
    // the signs below are the ones forced by the algebra; flipping either
    // one leaves a nonzero residual, so the checks pin them down exactly
    let t = inst.t();
    let j = inst.j();
    let q4 = Scalar::q_pow(4);
    let printed_sign = t.map(|e| qstar.mul(e).sub(&e.mul(&qstar))).sub(&t.mul(&j).scale(&q4));
    assert!(!nf_mat(&inst.rels, &printed_sign).is_zero());
    let printed_j = j
        .map(|e| qstar.mul(e).add(&e.mul(&qstar)))
        .add(&j.mul(&j).scale(&q4));
    assert!(!nf_mat(&inst.rels, &printed_j).is_zero());
    line(7, "anti-BRST suite exact for N = 2 (module action signs corrected)");
}

#[test]
fn criterion_08_laplacian_n2() {
    let inst = build_instance(2).unwrap();
    let q = inst.build_q().unwrap();
    let qstar = inst.build_qstar();
    let (delta, rep) = inst.verify_laplacian_identities(&q, &qstar).unwrap();
    assert!(rep.all_pass(), "{:?}", rep.failures());
    assert!(!delta.is_zero());
    line(8, "Laplacian trace forms, reflection equation and commutation exact");
}

#[test]
fn criterion_09_cohomology_n2() {
    let inst = build_instance(2).unwrap();
    let q = inst.build_q().unwrap();
    let rep = inst.verify_cohomology(&q);
    assert!(rep.all_pass(), "{:?}", rep.failures());
    let gens = inst.cohomology_generators();
    assert_eq!(gens.len(), 2);
    assert!(gens.iter().all(|g| !g.is_zero()));
    line(9, "even traces vanish, odd generators closed and anticommuting");
}

#[test]
fn criterion_10_classical_limit() {
    let ca = classical_algebra(2).unwrap();
    let rep = ca.verify();
    assert!(rep.all_pass(), "{:?}", rep.failures());
    let inst = build_instance(2).unwrap();
    let q = inst.build_q().unwrap();
    let limit = classical_limit(&inst, &q, &ca).unwrap();
    let residual = ca.rels.normal_form(&limit.sub(&ca.build_q()));
    assert!(residual.is_zero(), "{} stray terms", residual.terms.len());
    line(10, "q = 1 charge squares to zero and matches the quantum limit");
}

#[test]
fn criterion_11_hodge_decomposition() {
    let q0 = BigRational::from_str("3/2").unwrap();
    let inst = build_instance(2).unwrap();
    let ctx = HodgeContext::new(&inst).unwrap();
    for t in 0..=1usize {
        for w in 0..=2usize {
            // the Laplacian matrix is the anticommutator of the charges
            let sp = StateSpace::new(&inst, t, w).unwrap();
            let (dm, _) = operator_matrix(&ctx.delta, &sp).unwrap();
            let (q_out, up) = operator_matrix(&ctx.q, &sp).unwrap();
            let (qs_out, _) = operator_matrix(&ctx.qstar, &sp).unwrap();
            let q_in = if w == 0 {
                qbrst_core::Mat::zeros(sp.dim(), 0)
            } else {
                let below = StateSpace::new(&inst, t, w - 1).unwrap();
                operator_matrix(&ctx.q, &below).unwrap().0
            };
            let (qs_in, _) = operator_matrix(&ctx.qstar, &up).unwrap();
            let anti = q_in.mul(&qs_out);
            let anti2 = qs_in.mul(&q_out);
            let mut sum = qbrst_core::Mat::zeros(sp.dim(), sp.dim());
            for r in 0..sp.dim() {
                for c in 0..sp.dim() {
                    sum.set(r, c, &anti.get(r, c) + &anti2.get(r, c));
                }
            }
            assert!(dm.sub(&sum).is_zero(), "component ({t}, {w})");
            // the three subspaces fill the component at q0 = 3/2
            let rs = ctx.rank_summary(t, w, &q0).unwrap();
            assert!(rs.direct_sum(), "component ({t}, {w}): {rs:?}");
        }
    }
    // a sampled state round-trips through the decomposition exactly
    let sp = StateSpace::new(&inst, 1, 1).unwrap();
    let mut state = NCPoly::zero();
    for (i, b) in sp.basis.iter().enumerate() {
        state.add_term(b.clone(), Scalar::from_int(2 * i as i64 - 3));
    }
    let d = ctx.decompose(&state, 1, 1, &q0).unwrap();
    assert_eq!(d.harmonic.add(&d.q_exact).add(&d.qstar_exact), state);
    line(11, "Hodge split on (t <= 1, w <= 2), N = 2, q0 = 3/2, exact round trip");
}

#[test]
fn criterion_12_flatness_up_to_length_four() {
    let inst = build_instance(2).unwrap();
    let rep = inst.flatness_report(4).unwrap();
    for c in &rep.per_class {
        assert!(
            c.flat(),
            "class {}: generic {:?} != q = 1 {:?}",
            c.class,
            c.generic,
            c.specialized
        );
    }
    line(12, "graded dimensions match the q = 1 count up to letter count 4");
}

/// The differential of T is right multiplication by om, stated on the state
/// space rather than the algebra: one cheap cross-check tying the suites to
/// the module actions.
#[test]
fn vacuum_action_agrees_with_the_module_action() {
    let inst = build_instance(2).unwrap();
    let q = inst.build_q().unwrap();
    let t = inst.t();
    let tw = nf_mat(&inst.rels, &t.mul(&inst.omega()));
    for lo in 0..2 {
        for up in 0..2 {
            let lhs = qbrst_core::fock::act(&inst, &q, &t.e[lo][up]).unwrap();
            let rhs = nf_poly(&inst.rels, &tw.e[lo][up]);
            assert_eq!(lhs, rhs);
        }
    }
}
