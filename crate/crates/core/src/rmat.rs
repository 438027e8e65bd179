//! The GL_q(N) braid matrix, the D-matrix twist, and the quantum trace.
//!
//! `rhat` is the permuted Drinfeld-Jimbo R-matrix. It satisfies the Hecke
//! condition R̂² = λR̂ + 1 and the braid relation, and the q-trace built
//! from `dinv` obeys Tr_{q1}(R̂) = q^{2N}·1 and Tr₁(D₁⁻¹R̂⁻¹) = 1.

use crate::qfield::Scalar;
use crate::tensor::Expr;

/// Permutation operator on two labels of equal dimension.
pub fn perm(dim: usize, l1: u32, l2: u32) -> Expr {
    let mut e = Expr::zero(vec![(l1, dim), (l2, dim)], vec![(l1, dim), (l2, dim)]);
    for a in 0..dim as u16 {
        for b in 0..dim as u16 {
            let (k, br) = if l1 < l2 {
                (vec![a, b], vec![b, a])
            } else {
                (vec![b, a], vec![a, b])
            };
            e.set(k, br, Scalar::one());
        }
    }
    e
}

/// R̂ on labels (l1, l2), dimension n each. Entry R̂^{ab}_{cd}:
/// the swap part δ^a_d δ^b_c weighted q for a = b, plus λ δ^a_c δ^b_d for
/// a < b.
pub fn rhat(n: usize, l1: u32, l2: u32) -> Expr {
    assert!(l1 < l2, "rhat expects ordered labels");
    let lam = Scalar::lambda();
    let mut e = Expr::zero(vec![(l1, n), (l2, n)], vec![(l1, n), (l2, n)]);
    for a in 0..n as u16 {
        for b in 0..n as u16 {
            let w = if a == b { Scalar::q() } else { Scalar::one() };
            e.set(vec![a, b], vec![b, a], w);
            if a < b {
                let cur = &e.get(&[a, b], &[a, b]) + &lam;
                e.set(vec![a, b], vec![a, b], cur);
            }
        }
    }
    e
}

/// R̂⁻¹ = R̂ − λ (from the Hecke condition).
pub fn rhat_inv(n: usize, l1: u32, l2: u32) -> Expr {
    let id = Expr::identity(&[(l1, n), (l2, n)]);
    rhat(n, l1, l2).sub(&id.scale(&Scalar::lambda()))
}

/// Diagonal D⁻¹ with (D⁻¹)^i_i = q^{2(N−i)+1}, i = 1..N.
pub fn dinv(n: usize, label: u32) -> Expr {
    let mut e = Expr::zero(vec![(label, n)], vec![(label, n)]);
    for i in 0..n as u16 {
        let exp = 2 * (n as i64 - 1 - i as i64) + 1;
        e.set(vec![i], vec![i], Scalar::q_pow(exp));
    }
    e
}

/// Quantum trace over one label: Tr_q(Y) = Tr(D⁻¹ Y) on that leg pair.
pub fn qtrace(y: &Expr, n: usize, label: u32) -> Expr {
    dinv(n, label).mul(y).traced(label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::embed_chain;

    #[test]
    fn hecke_condition() {
        for n in 1..=3usize {
            let r = rhat(n, 1, 2);
            let id = Expr::identity(&[(1, n), (2, n)]);
            let res = r
                .mul(&r)
                .sub(&r.scale(&Scalar::lambda()))
                .sub(&id);
            assert!(res.is_zero(), "Hecke fails at N={}", n);
        }
    }

    #[test]
    fn rhat_inverse() {
        for n in 1..=3usize {
            let r = rhat(n, 1, 2);
            let ri = rhat_inv(n, 1, 2);
            let id = Expr::identity(&[(1, n), (2, n)]);
            assert_eq!(r.mul(&ri), id);
            assert_eq!(ri.mul(&r), id);
        }
    }

    #[test]
    fn braid_relation() {
        for n in 2..=3usize {
            let r = rhat(n, 1, 2);
            let lhs = embed_chain(&r, 3, true, 1).mul(&rhat(n, 1, 2));
            let rhs = embed_chain(&r, 3, false, 1).mul(&rhat(n, 2, 3));
            // R1 R2 R1 = R2 R1 R2 written via chains: asc(1) = R1 R2,
            // desc(1) = R2 R1
            assert_eq!(lhs, rhs, "braid fails at N={}", n);
        }
    }

    #[test]
    fn qtrace_of_rhat_is_q2n() {
        for n in 1..=3usize {
            let r = rhat(n, 1, 2);
            let t = qtrace(&r, n, 1);
            let expect = Expr::identity(&[(2, n)]).scale(&Scalar::q_pow(2 * n as i64));
            assert_eq!(t, expect, "Tr_q1(rhat) at N={}", n);
            let ri = rhat_inv(n, 1, 2);
            let lam_id = Expr::identity(&[(1, n), (2, n)]).scale(&Scalar::lambda());
            let t2 = qtrace(&ri.add(&lam_id), n, 1);
            assert_eq!(t2, expect, "Tr_q1(rhat_inv + lambda) at N={}", n);
        }
    }

    #[test]
    fn qtrace_of_rhat_inv_is_identity() {
        for n in 1..=3usize {
            let t = qtrace(&rhat_inv(n, 1, 2), n, 1);
            assert_eq!(t, Expr::identity(&[(2, n)]), "at N={}", n);
        }
    }

    #[test]
    fn dinv_trace_value() {
        // Tr(D⁻¹) = (q^{2N} − 1)/λ
        for n in 1..=3usize {
            let tr = dinv(n, 1).traced(1).get(&[], &[]);
            let expect = &(&Scalar::q_pow(2 * n as i64) - &Scalar::one()) / &Scalar::lambda();
            assert_eq!(tr, expect);
        }
    }
}
