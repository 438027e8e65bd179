//! Antisymmetrizer towers for a braiding σ and their heights.
//!
//! A_{1→1} = 1, A_{1→2} = 1 − σ, and each further level is produced by two
//! different recursions (peeling the last leg or the first leg). The two
//! recursions agree exactly iff σ satisfies the braid relation, so the
//! builder cross-checks them. The height h is the last n with A_{1→n} ≠ 0.

use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::qfield::Scalar;
use crate::tensor::{embed_chain, Expr, Tensor};

#[derive(Debug, Error)]
pub enum WedgeError {
    /// The two recursions disagree, which means the supplied braiding does
    /// not satisfy the braid relation.
    #[error("antisymmetrizer recursions disagree at level {0}")]
    RecursionMismatch(usize),
}

/// Height of a braiding: the tower vanishes first at level h+1, or never
/// does within the search cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Height {
    Found(usize),
    ExceedsCap(usize),
}

impl Serialize for Height {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Height::Found(h) => s.serialize_u64(*h as u64),
            Height::ExceedsCap(_) => s.serialize_str("exceeds cap"),
        }
    }
}

impl<'de> Deserialize<'de> for Height {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::Number(n) => n
                .as_u64()
                .map(|h| Height::Found(h as usize))
                .ok_or_else(|| D::Error::custom("height must be a positive integer")),
            serde_json::Value::String(s) if s == "exceeds cap" => Ok(Height::ExceedsCap(0)),
            _ => Err(D::Error::custom("height must be an integer or \"exceeds cap\"")),
        }
    }
}

/// The tower A_{1→1}, A_{1→2}, ... for one braiding, kept up to the last
/// nonzero level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AntisymTower {
    pub sigma: Tensor,
    pub levels: Vec<Tensor>,
    pub height: Height,
}

impl AntisymTower {
    /// A_{1→n} as an Expr on labels 1..=n. Levels beyond the stored ones
    /// are zero.
    pub fn level(&self, n: usize) -> Expr {
        let d = self.sigma.legs()[0].dim;
        if n == 0 || n > self.levels.len() {
            let legs: Vec<(u32, usize)> = (1..=n as u32).map(|l| (l, d)).collect();
            return Expr::zero(legs.clone(), legs);
        }
        let mut labels: Vec<u32> = (1..=n as u32).collect();
        labels.extend(1..=n as u32);
        self.levels[n - 1].to_expr(&labels)
    }
}

fn sigma_dim(sigma: &Expr) -> usize {
    assert_eq!(sigma.kets().len(), 2, "braiding must act on two legs");
    assert_eq!(sigma.bras().len(), 2, "braiding must act on two legs");
    sigma.kets()[0].1
}

/// One step of the first recursion in terms of the previous level:
/// A_{1→n} = (1 − Σ_{k=1}^{n−1} (−1)^{n−k−1} σ_{k→n}) A_{1→n−1}.
fn step_last_leg(sigma: &Expr, prev: &Expr, n: usize) -> Expr {
    let d = sigma_dim(sigma);
    let labels: Vec<(u32, usize)> = (1..=n as u32).map(|l| (l, d)).collect();
    let mut op = Expr::identity(&labels);
    for k in 1..n {
        let chain = embed_chain(sigma, n as u32, true, k as u32);
        let term = if (n - k - 1) % 2 == 0 {
            chain
        } else {
            chain.neg()
        };
        op = op.sub(&term);
    }
    op.mul(prev)
}

/// One step of the second recursion, peeling the first leg instead:
/// A_{1→n} = (1 − Σ_{k=2}^{n} (−1)^k σ_{k←1}) A_{2→n}, where A_{2→n} is the
/// previous level shifted by one label.
fn step_first_leg(sigma: &Expr, prev: &Expr, n: usize) -> Expr {
    let d = sigma_dim(sigma);
    let labels: Vec<(u32, usize)> = (1..=n as u32).map(|l| (l, d)).collect();
    let mut op = Expr::identity(&labels);
    for k in 2..=n {
        // descending chain sigma_{k-1,k} ... sigma_{12} padded with identity
        // on labels k+1..n
        let mut chain = embed_chain(sigma, k as u32, false, 1);
        if k < n {
            let rest: Vec<(u32, usize)> = (k as u32 + 1..=n as u32).map(|l| (l, d)).collect();
            chain = chain.mul(&Expr::identity(&rest));
        }
        let term = if k % 2 == 0 { chain } else { chain.neg() };
        op = op.sub(&term);
    }
    let shifted = prev.relabel(|l| l + 1);
    op.mul(&shifted)
}

/// A_{1→n} on labels 1..=n, built by the first recursion with the second
/// evaluated as an independent cross-check.
pub fn build_antisymmetrizer(sigma: &Expr, n: usize) -> Result<Expr, WedgeError> {
    assert!(n >= 1);
    let d = sigma_dim(sigma);
    let mut level = Expr::identity(&[(1, d)]);
    for m in 2..=n {
        let a = step_last_leg(sigma, &level, m);
        let b = step_first_leg(sigma, &level, m);
        if a != b {
            return Err(WedgeError::RecursionMismatch(m));
        }
        level = a;
    }
    Ok(level)
}

/// Smallest h ≤ cap with A_{1→h} ≠ 0 and A_{1→h+1} = 0.
pub fn compute_height(sigma: &Expr, cap: usize) -> Result<Height, WedgeError> {
    Ok(build_tower(sigma, cap)?.height)
}

/// Build the full tower up to the height (or the cap). Levels are stored up
/// to the last nonzero one.
pub fn build_tower(sigma: &Expr, cap: usize) -> Result<AntisymTower, WedgeError> {
    assert!(cap >= 1);
    let d = sigma_dim(sigma);
    let mut levels: Vec<Expr> = vec![Expr::identity(&[(1, d)])];
    let mut height = Height::ExceedsCap(cap);
    for m in 2..=cap + 1 {
        let prev = levels.last().unwrap();
        let a = step_last_leg(sigma, prev, m);
        let b = step_first_leg(sigma, prev, m);
        if a != b {
            return Err(WedgeError::RecursionMismatch(m));
        }
        if a.is_zero() {
            height = Height::Found(m - 1);
            break;
        }
        levels.push(a);
    }
    if let Height::Found(h) = height {
        levels.truncate(h);
    }
    Ok(AntisymTower {
        sigma: Tensor::from_expr(sigma),
        levels: levels.iter().map(Tensor::from_expr).collect(),
        height,
    })
}

/// Whether A_{1→n} factors through A_{1→k} on the right, i.e. some Z solves
/// A_{1→n} = Z · (A_{1→k} ⊗ 1). Solvability is checked exactly.
pub fn factors_through(tower: &AntisymTower, n: usize, k: usize) -> bool {
    assert!(k >= 1 && k < n);
    let d = tower.sigma.legs()[0].dim;
    let a_n = tower.level(n);
    let mut a_k = tower.level(k);
    let rest: Vec<(u32, usize)> = (k as u32 + 1..=n as u32).map(|l| (l, d)).collect();
    if !rest.is_empty() {
        a_k = a_k.mul(&Expr::identity(&rest));
    }
    // Z · A_k = A_n transposes to A_kᵀ Zᵀ = A_nᵀ, solvable by elimination.
    let lhs = a_k.to_mat().transpose();
    let rhs = a_n.to_mat().transpose();
    lhs.solve(&rhs).is_ok()
}

/// Exchange braid for a supercommutative model: the signed permutation
/// σ(a,b) = (−1)^{p(a)p(b)} (b,a) on the given parity vector.
pub fn signed_permutation(parities: &[u8]) -> Expr {
    let d = parities.len();
    let mut e = Expr::zero(vec![(1, d), (2, d)], vec![(1, d), (2, d)]);
    for a in 0..d as u16 {
        for b in 0..d as u16 {
            let sign = if parities[a as usize] & parities[b as usize] & 1 == 1 {
                -Scalar::one()
            } else {
                Scalar::one()
            };
            e.set(vec![a, b], vec![b, a], sign);
        }
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qla::derive_from_glq;
    use crate::rmat::perm;

    #[test]
    fn level_two_is_one_minus_sigma() {
        let sigma = perm(3, 1, 2);
        let a2 = build_antisymmetrizer(&sigma, 2).unwrap();
        let expect = Expr::identity(&[(1, 3), (2, 3)]).sub(&sigma);
        assert_eq!(a2, expect);
    }

    #[test]
    fn permutation_heights_match_exterior_algebra() {
        for n in 1..=4usize {
            let sigma = perm(n, 1, 2);
            let h = compute_height(&sigma, n + 2).unwrap();
            assert_eq!(h, Height::Found(n), "height of swap on dim {}", n);
        }
    }

    #[test]
    fn permutation_level_three_on_two_dims_vanishes() {
        let sigma = perm(2, 1, 2);
        let a3 = build_antisymmetrizer(&sigma, 3).unwrap();
        assert!(a3.is_zero());
        let a2 = build_antisymmetrizer(&sigma, 2).unwrap();
        assert_eq!(a2.to_mat().rank(), 1);
    }

    #[test]
    fn classical_levels_are_scaled_antisymmetrizers() {
        // For the plain swap the recursion yields the unnormalized
        // antisymmetrizer: A² = n!·A at each level.
        let sigma = perm(3, 1, 2);
        let tower = build_tower(&sigma, 5).unwrap();
        for n in 2..=3usize {
            let a = tower.level(n);
            let mut fact = Scalar::one();
            for m in 2..=n {
                fact = &fact * &Scalar::from_int(m as i64);
            }
            assert_eq!(a.mul(&a), a.scale(&fact), "A_{{1->{}}}", n);
        }
    }

    #[test]
    fn braid_violation_is_reported() {
        // A non-braid sigma must be caught by the cross-check.
        let mut sigma = perm(2, 1, 2);
        sigma.set(vec![0, 1], vec![0, 0], Scalar::one());
        match build_antisymmetrizer(&sigma, 3) {
            Err(WedgeError::RecursionMismatch(3)) => {}
            other => panic!("expected mismatch at level 3, got {:?}", other),
        }
    }

    #[test]
    fn glq2_exchange_braid_has_height_four() {
        let qla = derive_from_glq(2).unwrap();
        let sigma = qla.sigma_expr(1, 2);
        let tower = build_tower(&sigma, 6).unwrap();
        assert_eq!(tower.height, Height::Found(4));
        assert!(tower.level(5).is_zero());
        assert!(!tower.level(4).is_zero());
    }

    #[test]
    fn glq2_tower_factors_through_lower_levels() {
        let qla = derive_from_glq(2).unwrap();
        let sigma = qla.sigma_expr(1, 2);
        let tower = build_tower(&sigma, 6).unwrap();
        for n in 3..=4usize {
            for k in 2..n {
                assert!(factors_through(&tower, n, k), "A_{} through A_{}", n, k);
            }
        }
    }

    #[test]
    fn odd_generator_tower_never_terminates() {
        // One odd generator: sigma = -1 on a one dimensional space, so
        // every level is n! times the identity.
        let sigma = signed_permutation(&[1]);
        let h = compute_height(&sigma, 7).unwrap();
        assert_eq!(h, Height::ExceedsCap(7));
    }

    #[test]
    fn tower_json_round_trip() {
        let sigma = perm(2, 1, 2);
        let tower = build_tower(&sigma, 4).unwrap();
        let s = serde_json::to_string(&tower).unwrap();
        let back: AntisymTower = serde_json::from_str(&s).unwrap();
        assert_eq!(back.height, Height::Found(2));
        assert_eq!(back.levels.len(), tower.levels.len());
        assert_eq!(back.level(2), tower.level(2));
    }
}
