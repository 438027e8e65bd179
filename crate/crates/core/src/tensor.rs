//! Sparse multi-leg tensors over Q(q) and exact linear algebra.
//!
//! Two views of the same data coexist here:
//!
//! * [`Tensor`] is the interchange type: an ordered list of legs (each an
//!   "in" or "out" leg of some dimension) plus sparse entries, serialized
//!   with 1-based indices.
//! * [`Expr`] is the computational type: every leg carries a numeric label,
//!   and multiplication contracts matching labels in written order (bras of
//!   the left factor against kets of the right factor). Labels that appear
//!   in only one summand of an addition are padded with identity legs, which
//!   matches the usual convention that sigma_1 really means sigma_12 x id_3.
//!
//! Row index = ket (in) legs, column index = bra (out) legs throughout.

use crate::qfield::{QFieldError, Scalar};
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("linear system is inconsistent")]
    Inconsistent,
    #[error(transparent)]
    Field(#[from] QFieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LegKind {
    In,
    Out,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leg {
    pub dim: usize,
    pub kind: LegKind,
}

/// Interchange tensor: ordered legs, sparse entries, 0-based internally,
/// 1-based in JSON.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tensor {
    legs: Vec<Leg>,
    entries: BTreeMap<Vec<u16>, Scalar>,
}

impl Tensor {
    pub fn new(legs: Vec<Leg>) -> Self {
        Tensor {
            legs,
            entries: BTreeMap::new(),
        }
    }

    pub fn legs(&self) -> &[Leg] {
        &self.legs
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<u16>, &Scalar)> {
        self.entries.iter()
    }

    pub fn set(&mut self, idx: Vec<u16>, val: Scalar) {
        assert_eq!(idx.len(), self.legs.len(), "index arity mismatch");
        for (i, leg) in idx.iter().zip(&self.legs) {
            assert!((*i as usize) < leg.dim, "index out of range");
        }
        if val.is_zero() {
            self.entries.remove(&idx);
        } else {
            self.entries.insert(idx, val);
        }
    }

    pub fn get(&self, idx: &[u16]) -> Scalar {
        self.entries.get(idx).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Attach labels to the legs (one per leg, in order) and produce the
    /// computational form. In-legs become kets, out-legs become bras.
    pub fn to_expr(&self, labels: &[u32]) -> Expr {
        assert_eq!(labels.len(), self.legs.len());
        let mut kets = Vec::new();
        let mut bras = Vec::new();
        // remember, per leg, where its index lands in the (ket, bra) key
        let mut slot: Vec<(bool, usize)> = Vec::with_capacity(self.legs.len());
        let mut kidx: Vec<(u32, usize)> = Vec::new();
        let mut bidx: Vec<(u32, usize)> = Vec::new();
        for (pos, (leg, &lab)) in self.legs.iter().zip(labels).enumerate() {
            match leg.kind {
                LegKind::In => kidx.push((lab, pos)),
                LegKind::Out => bidx.push((lab, pos)),
            }
        }
        kidx.sort_by_key(|t| t.0);
        bidx.sort_by_key(|t| t.0);
        slot.resize(self.legs.len(), (false, 0));
        for (i, &(lab, pos)) in kidx.iter().enumerate() {
            kets.push((lab, self.legs[pos].dim));
            slot[pos] = (true, i);
        }
        for (i, &(lab, pos)) in bidx.iter().enumerate() {
            bras.push((lab, self.legs[pos].dim));
            slot[pos] = (false, i);
        }
        assert!(
            kets.windows(2).all(|w| w[0].0 < w[1].0) && bras.windows(2).all(|w| w[0].0 < w[1].0),
            "duplicate leg labels"
        );
        let mut e = Expr::zero(kets, bras);
        for (idx, val) in &self.entries {
            let mut k = vec![0u16; e.kets.len()];
            let mut b = vec![0u16; e.bras.len()];
            for (pos, &i) in idx.iter().enumerate() {
                let (is_ket, at) = slot[pos];
                if is_ket {
                    k[at] = i;
                } else {
                    b[at] = i;
                }
            }
            e.entries.insert((k, b), val.clone());
        }
        e
    }

    /// Inverse of [`Tensor::to_expr`]: legs ordered kets first (ascending
    /// label), then bras (ascending label).
    pub fn from_expr(e: &Expr) -> Tensor {
        let mut legs = Vec::new();
        for &(_, d) in &e.kets {
            legs.push(Leg {
                dim: d,
                kind: LegKind::In,
            });
        }
        for &(_, d) in &e.bras {
            legs.push(Leg {
                dim: d,
                kind: LegKind::Out,
            });
        }
        let mut t = Tensor::new(legs);
        for ((k, b), v) in &e.entries {
            let mut idx = k.clone();
            idx.extend_from_slice(b);
            t.entries.insert(idx, v.clone());
        }
        t
    }
}

#[derive(Serialize, Deserialize)]
struct EntryJson {
    idx: Vec<usize>,
    val: String,
}

#[derive(Serialize, Deserialize)]
struct TensorJson {
    legs: Vec<Leg>,
    entries: Vec<EntryJson>,
}

impl Serialize for Tensor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let entries = self
            .entries
            .iter()
            .map(|(idx, v)| EntryJson {
                idx: idx.iter().map(|&i| i as usize + 1).collect(),
                val: v.to_canonical_string(),
            })
            .collect();
        TensorJson {
            legs: self.legs.clone(),
            entries,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Tensor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let j = TensorJson::deserialize(d)?;
        let mut t = Tensor::new(j.legs);
        for e in j.entries {
            if e.idx.len() != t.legs.len() {
                return Err(D::Error::custom("entry index arity mismatch"));
            }
            let mut idx = Vec::with_capacity(e.idx.len());
            for (&i, leg) in e.idx.iter().zip(&t.legs) {
                if i == 0 || i > leg.dim {
                    return Err(D::Error::custom("entry index out of range (1-based)"));
                }
                idx.push((i - 1) as u16);
            }
            let val = Scalar::parse(&e.val).map_err(D::Error::custom)?;
            t.set(idx, val);
        }
        Ok(t)
    }
}

/// Labeled sparse tensor. Kets and bras are kept sorted by label; the entry
/// keys are index vectors aligned with those sorted lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    kets: Vec<(u32, usize)>,
    bras: Vec<(u32, usize)>,
    entries: BTreeMap<(Vec<u16>, Vec<u16>), Scalar>,
}

impl Expr {
    pub fn zero(mut kets: Vec<(u32, usize)>, mut bras: Vec<(u32, usize)>) -> Self {
        kets.sort_by_key(|t| t.0);
        bras.sort_by_key(|t| t.0);
        assert!(kets.windows(2).all(|w| w[0].0 < w[1].0), "duplicate ket label");
        assert!(bras.windows(2).all(|w| w[0].0 < w[1].0), "duplicate bra label");
        Expr {
            kets,
            bras,
            entries: BTreeMap::new(),
        }
    }

    pub fn scalar(v: Scalar) -> Self {
        let mut e = Expr::zero(vec![], vec![]);
        if !v.is_zero() {
            e.entries.insert((vec![], vec![]), v);
        }
        e
    }

    pub fn one() -> Self {
        Expr::scalar(Scalar::one())
    }

    /// Identity operator on the given labels (same label as ket and bra).
    pub fn identity(labels: &[(u32, usize)]) -> Self {
        let mut e = Expr::zero(labels.to_vec(), labels.to_vec());
        let dims: Vec<usize> = e.kets.iter().map(|t| t.1).collect();
        for idx in MultiIndex::new(&dims) {
            e.entries.insert((idx.clone(), idx), Scalar::one());
        }
        e
    }

    /// Kronecker delta mapping bra label to ket label: one ket leg, one bra
    /// leg, diagonal entries.
    pub fn delta(ket_label: u32, bra_label: u32, dim: usize) -> Self {
        let mut e = Expr::zero(vec![(ket_label, dim)], vec![(bra_label, dim)]);
        for i in 0..dim as u16 {
            e.entries.insert((vec![i], vec![i]), Scalar::one());
        }
        e
    }

    pub fn kets(&self) -> &[(u32, usize)] {
        &self.kets
    }

    pub fn bras(&self) -> &[(u32, usize)] {
        &self.bras
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn support(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(Vec<u16>, Vec<u16>), &Scalar)> {
        self.entries.iter()
    }

    pub fn set(&mut self, k: Vec<u16>, b: Vec<u16>, val: Scalar) {
        assert_eq!(k.len(), self.kets.len());
        assert_eq!(b.len(), self.bras.len());
        if val.is_zero() {
            self.entries.remove(&(k, b));
        } else {
            self.entries.insert((k, b), val);
        }
    }

    pub fn get(&self, k: &[u16], b: &[u16]) -> Scalar {
        self.entries
            .get(&(k.to_vec(), b.to_vec()))
            .cloned()
            .unwrap_or_else(Scalar::zero)
    }

    fn ket_dim(&self, label: u32) -> Option<usize> {
        self.kets
            .binary_search_by_key(&label, |t| t.0)
            .ok()
            .map(|i| self.kets[i].1)
    }

    fn bra_dim(&self, label: u32) -> Option<usize> {
        self.bras
            .binary_search_by_key(&label, |t| t.0)
            .ok()
            .map(|i| self.bras[i].1)
    }

    /// Rename labels. The map must be injective on the labels present.
    pub fn relabel(&self, f: impl Fn(u32) -> u32) -> Expr {
        let mut new_kets: Vec<(u32, usize)> = self.kets.iter().map(|&(l, d)| (f(l), d)).collect();
        let mut new_bras: Vec<(u32, usize)> = self.bras.iter().map(|&(l, d)| (f(l), d)).collect();
        let kperm = sort_perm(&mut new_kets);
        let bperm = sort_perm(&mut new_bras);
        let mut e = Expr::zero(new_kets, new_bras);
        for ((k, b), v) in &self.entries {
            let nk = apply_perm(k, &kperm);
            let nb = apply_perm(b, &bperm);
            e.entries.insert((nk, nb), v.clone());
        }
        e
    }

    /// Written-order product: bras of self contract against matching ket
    /// labels of other; unmatched legs pass through.
    pub fn mul(&self, other: &Expr) -> Expr {
        let mut contracted: Vec<u32> = Vec::new();
        for &(l, d) in &self.bras {
            if let Some(d2) = other.ket_dim(l) {
                assert_eq!(d, d2, "dimension mismatch on label {}", l);
                contracted.push(l);
            }
        }
        for &(l, _) in &self.kets {
            assert!(
                !(other.ket_dim(l).is_some() && !contracted.contains(&l)),
                "ket label {} collides",
                l
            );
        }
        for &(l, _) in &other.bras {
            assert!(
                !(self.bra_dim(l).is_some() && !contracted.contains(&l)),
                "bra label {} collides",
                l
            );
        }

        // result legs with their sources
        #[derive(Clone, Copy)]
        enum Src {
            LeftKet(usize),
            RightKet(usize),
            LeftBra(usize),
            RightBra(usize),
        }
        let mut rkets: Vec<(u32, usize, Src)> = Vec::new();
        for (i, &(l, d)) in self.kets.iter().enumerate() {
            rkets.push((l, d, Src::LeftKet(i)));
        }
        for (i, &(l, d)) in other.kets.iter().enumerate() {
            if !contracted.contains(&l) {
                rkets.push((l, d, Src::RightKet(i)));
            }
        }
        rkets.sort_by_key(|t| t.0);
        let mut rbras: Vec<(u32, usize, Src)> = Vec::new();
        for (i, &(l, d)) in other.bras.iter().enumerate() {
            rbras.push((l, d, Src::RightBra(i)));
        }
        for (i, &(l, d)) in self.bras.iter().enumerate() {
            if !contracted.contains(&l) {
                rbras.push((l, d, Src::LeftBra(i)));
            }
        }
        rbras.sort_by_key(|t| t.0);
        assert!(
            rkets.windows(2).all(|w| w[0].0 < w[1].0),
            "duplicate ket label in product"
        );
        assert!(
            rbras.windows(2).all(|w| w[0].0 < w[1].0),
            "duplicate bra label in product"
        );

        let cpos_left: Vec<usize> = contracted
            .iter()
            .map(|l| self.bras.iter().position(|t| t.0 == *l).unwrap())
            .collect();
        let cpos_right: Vec<usize> = contracted
            .iter()
            .map(|l| other.kets.iter().position(|t| t.0 == *l).unwrap())
            .collect();

        let mut index: HashMap<Vec<u16>, Vec<(&Vec<u16>, &Vec<u16>, &Scalar)>> = HashMap::new();
        for ((k2, b2), c2) in &other.entries {
            let ckey: Vec<u16> = cpos_right.iter().map(|&p| k2[p]).collect();
            index.entry(ckey).or_default().push((k2, b2, c2));
        }

        let mut out = Expr::zero(
            rkets.iter().map(|t| (t.0, t.1)).collect(),
            rbras.iter().map(|t| (t.0, t.1)).collect(),
        );
        for ((k1, b1), c1) in &self.entries {
            let ckey: Vec<u16> = cpos_left.iter().map(|&p| b1[p]).collect();
            let Some(matches) = index.get(&ckey) else {
                continue;
            };
            for (k2, b2, c2) in matches {
                let pick = |s: &Src| match *s {
                    Src::LeftKet(i) => k1[i],
                    Src::RightKet(i) => k2[i],
                    Src::LeftBra(i) => b1[i],
                    Src::RightBra(i) => b2[i],
                };
                let nk: Vec<u16> = rkets.iter().map(|t| pick(&t.2)).collect();
                let nb: Vec<u16> = rbras.iter().map(|t| pick(&t.2)).collect();
                let prod = &(*c1).clone() * c2;
                if prod.is_zero() {
                    continue;
                }
                match out.entries.get_mut(&(nk.clone(), nb.clone())) {
                    Some(acc) => {
                        *acc = &*acc + &prod;
                        if acc.is_zero() {
                            out.entries.remove(&(nk, nb));
                        }
                    }
                    None => {
                        out.entries.insert((nk, nb), prod);
                    }
                }
            }
        }
        out
    }

    /// Tensor with identity legs on labels present in `target` but absent
    /// here. Such a label must be both a ket and a bra of `target`.
    fn pad_to(&self, target: &Expr) -> Expr {
        let mut missing: Vec<(u32, usize)> = Vec::new();
        for &(l, d) in &target.kets {
            if self.ket_dim(l).is_none() && self.bra_dim(l).is_none() {
                assert_eq!(
                    target.bra_dim(l),
                    Some(d),
                    "cannot pad label {}: not a ket/bra pair",
                    l
                );
                missing.push((l, d));
            }
        }
        for &(l, _) in &target.bras {
            if self.ket_dim(l).is_none() && self.bra_dim(l).is_none() {
                assert!(
                    target.ket_dim(l).is_some(),
                    "cannot pad label {}: not a ket/bra pair",
                    l
                );
            }
        }
        if missing.is_empty() {
            return self.clone();
        }
        let mut kets = self.kets.clone();
        let mut bras = self.bras.clone();
        kets.extend_from_slice(&missing);
        bras.extend_from_slice(&missing);
        let kperm = sort_perm(&mut kets);
        let bperm = sort_perm(&mut bras);
        let mut e = Expr::zero(kets, bras);
        let dims: Vec<usize> = missing.iter().map(|t| t.1).collect();
        for ((k, b), v) in &self.entries {
            for diag in MultiIndex::new(&dims) {
                let mut nk = k.clone();
                nk.extend_from_slice(&diag);
                let mut nb = b.clone();
                nb.extend_from_slice(&diag);
                e.entries
                    .insert((apply_perm(&nk, &kperm), apply_perm(&nb, &bperm)), v.clone());
            }
        }
        e
    }

    pub fn add(&self, other: &Expr) -> Expr {
        if self.is_zero() && self.kets.is_empty() && self.bras.is_empty() {
            return other.clone();
        }
        if other.is_zero() && other.kets.is_empty() && other.bras.is_empty() {
            return self.clone();
        }
        let mut a = self.pad_to(other);
        let b = other.pad_to(self);
        assert_eq!(a.kets, b.kets, "leg mismatch in sum");
        assert_eq!(a.bras, b.bras, "leg mismatch in sum");
        for (key, v) in &b.entries {
            match a.entries.get_mut(key) {
                Some(acc) => {
                    *acc = &*acc + v;
                    if acc.is_zero() {
                        a.entries.remove(key);
                    }
                }
                None => {
                    a.entries.insert(key.clone(), v.clone());
                }
            }
        }
        a
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Expr {
        self.scale(&-&Scalar::one())
    }

    pub fn scale(&self, c: &Scalar) -> Expr {
        let mut e = Expr::zero(self.kets.clone(), self.bras.clone());
        if c.is_zero() {
            return e;
        }
        for (key, v) in &self.entries {
            e.entries.insert(key.clone(), v * c);
        }
        e
    }

    /// Contract ket and bra carrying the same label (partial trace).
    pub fn traced(&self, label: u32) -> Expr {
        let kp = self
            .kets
            .iter()
            .position(|t| t.0 == label)
            .expect("trace: no such ket");
        let bp = self
            .bras
            .iter()
            .position(|t| t.0 == label)
            .expect("trace: no such bra");
        let mut kets = self.kets.clone();
        kets.remove(kp);
        let mut bras = self.bras.clone();
        bras.remove(bp);
        let mut e = Expr::zero(kets, bras);
        for ((k, b), v) in &self.entries {
            if k[kp] != b[bp] {
                continue;
            }
            let mut nk = k.clone();
            nk.remove(kp);
            let mut nb = b.clone();
            nb.remove(bp);
            match e.entries.get_mut(&(nk.clone(), nb.clone())) {
                Some(acc) => {
                    *acc = &*acc + v;
                    if acc.is_zero() {
                        e.entries.remove(&(nk, nb));
                    }
                }
                None => {
                    e.entries.insert((nk, nb), v.clone());
                }
            }
        }
        e
    }

    /// Entrywise specialization at a rational point; fails at poles.
    pub fn specialize(&self, q0: &BigRational) -> Result<Expr, QFieldError> {
        let mut e = Expr::zero(self.kets.clone(), self.bras.clone());
        for (key, v) in &self.entries {
            let r = v.eval_at(q0)?;
            if !r.is_zero() {
                let s = Scalar::parse(&format!("({})/({})", r.numer(), r.denom()))
                    .expect("rational reparse");
                e.entries.insert(key.clone(), s);
            }
        }
        Ok(e)
    }

    /// Flatten to a matrix: kets (sorted by label) to rows, bras to columns,
    /// row-major strides.
    pub fn to_mat(&self) -> Mat {
        let kdims: Vec<usize> = self.kets.iter().map(|t| t.1).collect();
        let bdims: Vec<usize> = self.bras.iter().map(|t| t.1).collect();
        let nrows = kdims.iter().product::<usize>();
        let ncols = bdims.iter().product::<usize>();
        let mut m = Mat::zeros(nrows.max(1), ncols.max(1));
        for ((k, b), v) in &self.entries {
            m.set(flatten(k, &kdims), flatten(b, &bdims), v.clone());
        }
        m
    }
}

fn sort_perm(legs: &mut Vec<(u32, usize)>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..legs.len()).collect();
    order.sort_by_key(|&i| legs[i].0);
    let sorted: Vec<(u32, usize)> = order.iter().map(|&i| legs[i]).collect();
    assert!(
        sorted.windows(2).all(|w| w[0].0 < w[1].0),
        "duplicate label after relabel"
    );
    // perm[new position] = old position
    *legs = sorted;
    order
}

fn apply_perm(idx: &[u16], perm: &[usize]) -> Vec<u16> {
    perm.iter().map(|&old| idx[old]).collect()
}

pub fn flatten(idx: &[u16], dims: &[usize]) -> usize {
    let mut acc = 0usize;
    for (i, d) in idx.iter().zip(dims) {
        acc = acc * d + *i as usize;
    }
    acc
}

pub fn unflatten(mut i: usize, dims: &[usize]) -> Vec<u16> {
    let mut out = vec![0u16; dims.len()];
    for p in (0..dims.len()).rev() {
        out[p] = (i % dims[p]) as u16;
        i /= dims[p];
    }
    out
}

/// Iterator over all multi-indices of the given dimensions.
pub struct MultiIndex {
    dims: Vec<usize>,
    next: Option<Vec<u16>>,
}

impl MultiIndex {
    pub fn new(dims: &[usize]) -> Self {
        let next = if dims.iter().any(|&d| d == 0) {
            None
        } else {
            Some(vec![0u16; dims.len()])
        };
        MultiIndex {
            dims: dims.to_vec(),
            next,
        }
    }
}

impl Iterator for MultiIndex {
    type Item = Vec<u16>;
    fn next(&mut self) -> Option<Vec<u16>> {
        let cur = self.next.take()?;
        let mut nxt = cur.clone();
        let mut p = self.dims.len();
        loop {
            if p == 0 {
                self.next = None;
                break;
            }
            p -= 1;
            nxt[p] += 1;
            if (nxt[p] as usize) < self.dims[p] {
                self.next = Some(nxt);
                break;
            }
            nxt[p] = 0;
        }
        Some(cur)
    }
}

/// Chain product of a two-leg braid embedded on legs k..n of an n-leg space
/// (labels 1..=n, all of dimension d). Ascending gives
/// sigma_{k,k+1} sigma_{k+1,k+2} ... sigma_{n-1,n}; descending the reverse
/// order.
pub fn embed_chain(sigma: &Expr, n: u32, ascending: bool, k: u32) -> Expr {
    assert!(k < n, "chain needs k < n");
    assert_eq!(sigma.kets().len(), 2, "braid must have two kets");
    let d = sigma.kets()[0].1;
    let base = sigma.kets()[0].0;
    let factor = |i: u32| {
        // braid acting on legs (i, i+1)
        sigma.relabel(|l| if l == base { i } else { i + 1 })
    };
    let mut acc = Expr::identity(&(1..=n).map(|i| (i, d)).collect::<Vec<_>>());
    if ascending {
        for i in k..n {
            acc = acc.mul(&factor(i));
        }
    } else {
        for i in (k..n).rev() {
            acc = acc.mul(&factor(i));
        }
    }
    acc
}

/// Sparse matrix over Q(q) with exact Gaussian elimination.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub nrows: usize,
    pub ncols: usize,
    rows: Vec<BTreeMap<usize, Scalar>>,
}

impl Mat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Mat {
            nrows,
            ncols,
            rows: vec![BTreeMap::new(); nrows],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Scalar::one());
        }
        m
    }

    pub fn set(&mut self, r: usize, c: usize, v: Scalar) {
        assert!(r < self.nrows && c < self.ncols);
        if v.is_zero() {
            self.rows[r].remove(&c);
        } else {
            self.rows[r].insert(c, v);
        }
    }

    pub fn get(&self, r: usize, c: usize) -> Scalar {
        self.rows[r].get(&c).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn row(&self, r: usize) -> &BTreeMap<usize, Scalar> {
        &self.rows[r]
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(|r| r.is_empty())
    }

    pub fn transpose(&self) -> Mat {
        let mut m = Mat::zeros(self.ncols, self.nrows);
        for (r, row) in self.rows.iter().enumerate() {
            for (&c, v) in row {
                m.rows[c].insert(r, v.clone());
            }
        }
        m
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.ncols, other.nrows, "matrix product shape mismatch");
        let mut m = Mat::zeros(self.nrows, other.ncols);
        for (r, row) in self.rows.iter().enumerate() {
            let mut acc: BTreeMap<usize, Scalar> = BTreeMap::new();
            for (&k, v) in row {
                for (&c, w) in &other.rows[k] {
                    let p = v * w;
                    if p.is_zero() {
                        continue;
                    }
                    match acc.get_mut(&c) {
                        Some(a) => {
                            *a = &*a + &p;
                        }
                        None => {
                            acc.insert(c, p);
                        }
                    }
                }
            }
            acc.retain(|_, v| !v.is_zero());
            m.rows[r] = acc;
        }
        m
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut m = self.clone();
        for (r, row) in other.rows.iter().enumerate() {
            for (&c, v) in row {
                let cur = &m.get(r, c) - v;
                m.set(r, c, cur);
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &[Scalar]) -> Vec<Scalar> {
        assert_eq!(v.len(), self.ncols);
        self.rows
            .iter()
            .map(|row| {
                let mut acc = Scalar::zero();
                for (&c, w) in row {
                    acc += &(w * &v[c]);
                }
                acc
            })
            .collect()
    }

    /// Reduced row echelon form with deterministic pivoting: columns in
    /// increasing order, first remaining row wins.
    pub fn rref(&self) -> Rref {
        let mut rows: Vec<BTreeMap<usize, Scalar>> =
            self.rows.iter().filter(|r| !r.is_empty()).cloned().collect();
        let mut pivots: Vec<usize> = Vec::new();
        let mut done = 0usize;
        for col in 0..self.ncols {
            let Some(sel) = (done..rows.len()).find(|&r| rows[r].contains_key(&col)) else {
                continue;
            };
            rows.swap(done, sel);
            let inv = rows[done][&col].inverse().expect("pivot nonzero");
            if !inv.is_one() {
                let row = std::mem::take(&mut rows[done]);
                rows[done] = row.into_iter().map(|(c, v)| (c, &v * &inv)).collect();
            }
            let pivot_row = rows[done].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r == done {
                    continue;
                }
                let Some(f) = row.get(&col).cloned() else {
                    continue;
                };
                for (&c, v) in &pivot_row {
                    let cur = match row.get(&c) {
                        Some(x) => x - &(v * &f),
                        None => -&(v * &f),
                    };
                    if cur.is_zero() {
                        row.remove(&c);
                    } else {
                        row.insert(c, cur);
                    }
                }
            }
            pivots.push(col);
            done += 1;
            rows.retain(|r| !r.is_empty());
            if done >= rows.len() {
                break;
            }
        }
        rows.truncate(pivots.len());
        Rref {
            ncols: self.ncols,
            rows,
            pivots,
        }
    }

    pub fn rank(&self) -> usize {
        self.rref().rows.len()
    }

    /// Rank factorization self = C * R with C the pivot columns and R the
    /// reduced echelon rows.
    pub fn rank_factor(&self) -> (Mat, Mat) {
        let rr = self.rref();
        let r = rr.pivots.len();
        let mut c = Mat::zeros(self.nrows, r.max(1));
        if r == 0 {
            return (c, Mat::zeros(1, self.ncols));
        }
        for (j, &pc) in rr.pivots.iter().enumerate() {
            for i in 0..self.nrows {
                let v = self.get(i, pc);
                if !v.is_zero() {
                    c.set(i, j, v);
                }
            }
        }
        let mut rm = Mat::zeros(r, self.ncols);
        for (i, row) in rr.rows.iter().enumerate() {
            rm.rows[i] = row.clone();
        }
        (c, rm)
    }

    /// Kernel basis (right null space), deterministic order by free column.
    pub fn kernel_basis(&self) -> Vec<Vec<Scalar>> {
        self.rref().kernel_basis()
    }

    /// Solve self * X = rhs for all columns of rhs simultaneously.
    pub fn solve(&self, rhs: &Mat) -> Result<LinSolve, TensorError> {
        assert_eq!(self.nrows, rhs.nrows, "rhs row count mismatch");
        // augmented elimination
        let mut aug = Mat::zeros(self.nrows, self.ncols + rhs.ncols);
        for (r, row) in self.rows.iter().enumerate() {
            for (&c, v) in row {
                aug.rows[r].insert(c, v.clone());
            }
        }
        for (r, row) in rhs.rows.iter().enumerate() {
            for (&c, v) in row {
                aug.rows[r].insert(self.ncols + c, v.clone());
            }
        }
        let rr = aug.rref();
        if rr.pivots.iter().any(|&p| p >= self.ncols) {
            return Err(TensorError::Inconsistent);
        }
        let mut particular = Mat::zeros(self.ncols, rhs.ncols);
        for (i, &p) in rr.pivots.iter().enumerate() {
            for (&c, v) in &rr.rows[i] {
                if c >= self.ncols {
                    particular.set(p, c - self.ncols, v.clone());
                }
            }
        }
        // kernel of the coefficient part
        let sub = Rref {
            ncols: self.ncols,
            pivots: rr.pivots.clone(),
            rows: rr
                .rows
                .iter()
                .map(|row| {
                    row.iter()
                        .filter(|(&c, _)| c < self.ncols)
                        .map(|(&c, v)| (c, v.clone()))
                        .collect()
                })
                .collect(),
        };
        Ok(LinSolve {
            particular,
            kernel: sub.kernel_basis(),
        })
    }
}

pub struct LinSolve {
    /// One column per right-hand side column.
    pub particular: Mat,
    pub kernel: Vec<Vec<Scalar>>,
}

pub struct Rref {
    pub ncols: usize,
    pub rows: Vec<BTreeMap<usize, Scalar>>,
    pub pivots: Vec<usize>,
}

impl Rref {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn kernel_basis(&self) -> Vec<Vec<Scalar>> {
        let pivot_set: std::collections::BTreeSet<usize> = self.pivots.iter().copied().collect();
        let mut basis = Vec::new();
        for free in 0..self.ncols {
            if pivot_set.contains(&free) {
                continue;
            }
            let mut v = vec![Scalar::zero(); self.ncols];
            v[free] = Scalar::one();
            for (i, &p) in self.pivots.iter().enumerate() {
                if let Some(c) = self.rows[i].get(&free) {
                    v[p] = -c;
                }
            }
            basis.push(v);
        }
        basis
    }

    /// Reduce a dense vector against the echelon rows; the remainder has no
    /// support on pivot columns.
    pub fn reduce(&self, v: &mut [Scalar]) {
        for (i, &p) in self.pivots.iter().enumerate() {
            if v[p].is_zero() {
                continue;
            }
            let f = v[p].clone();
            for (&c, w) in &self.rows[i] {
                v[c] = &v[c] - &(w * &f);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qfield::Scalar;

    fn perm2() -> Expr {
        // permutation on labels (1,2), dim 2
        let mut e = Expr::zero(vec![(1, 2), (2, 2)], vec![(1, 2), (2, 2)]);
        for i in 0..2u16 {
            for j in 0..2u16 {
                e.set(vec![i, j], vec![j, i], Scalar::one());
            }
        }
        e
    }

    #[test]
    fn permutation_squares_to_identity() {
        let p = perm2();
        let id = Expr::identity(&[(1, 2), (2, 2)]);
        assert_eq!(p.mul(&p), id);
    }

    #[test]
    fn chain_of_transpositions_is_a_cycle() {
        // P_{12} P_{23} maps |abc> to |bca> read as operator product
        let p = perm2();
        let chain = embed_chain(&p, 3, true, 1);
        // entry check: row (a,b,c), col must be the image indices
        for ((k, b), v) in chain.entries() {
            assert!(v.is_one());
            // P12 P23: column = (k2, k3, k1)
            assert_eq!(b.as_slice(), &[k[1], k[2], k[0]]);
        }
        assert_eq!(chain.support(), 8);
        // descending from the same data gives the inverse cycle
        let down = embed_chain(&p, 3, false, 1);
        let id = Expr::identity(&[(1, 2), (2, 2), (3, 2)]);
        assert_eq!(chain.mul(&down), id);
    }

    #[test]
    fn addition_pads_identity_legs() {
        // sigma_1 + sigma_2 on three legs: both summands must agree with
        // explicit identity-padded versions
        let p = perm2();
        let s1 = p.clone();
        let s2 = p.relabel(|l| l + 1);
        let sum = s1.add(&s2);
        let id = Expr::identity(&[(3, 2)]);
        let explicit = s1.mul(&id); // tensors in the extra leg? mul with disjoint labels
        let explicit = explicit.add(&s2.mul(&Expr::identity(&[(1, 2)])));
        assert_eq!(sum, explicit);
        assert_eq!(sum.kets().len(), 3);
    }

    #[test]
    fn trace_of_identity_counts_dimension() {
        let id = Expr::identity(&[(1, 3)]);
        let t = id.traced(1);
        assert_eq!(t.get(&[], &[]), Scalar::from_int(3));
    }

    #[test]
    fn solve_scalar_equation() {
        // (q - q^-1) x = q^2 - q^-2
        let lam = Scalar::lambda();
        let rhs_val = &Scalar::q_pow(2) - &Scalar::q_pow(-2);
        let mut m = Mat::zeros(1, 1);
        m.set(0, 0, lam);
        let mut rhs = Mat::zeros(1, 1);
        rhs.set(0, 0, rhs_val);
        let sol = m.solve(&rhs).unwrap();
        assert_eq!(sol.particular.get(0, 0), &Scalar::q() + &Scalar::q_pow(-1));
        assert!(sol.kernel.is_empty());
    }

    #[test]
    fn solve_zero_system() {
        let m = Mat::zeros(2, 3);
        let rhs = Mat::zeros(2, 1);
        let sol = m.solve(&rhs).unwrap();
        assert!(sol.particular.is_zero());
        assert_eq!(sol.kernel.len(), 3);
    }

    #[test]
    fn solve_detects_inconsistency() {
        let mut m = Mat::zeros(2, 1);
        m.set(0, 0, Scalar::one());
        let mut rhs = Mat::zeros(2, 1);
        rhs.set(0, 0, Scalar::one());
        rhs.set(1, 0, Scalar::one());
        assert!(matches!(m.solve(&rhs), Err(TensorError::Inconsistent)));
    }

    #[test]
    fn rank_factorization_reconstructs() {
        let mut m = Mat::zeros(3, 3);
        // rank 2 example with q entries
        m.set(0, 0, Scalar::one());
        m.set(0, 1, Scalar::q());
        m.set(1, 0, Scalar::q());
        m.set(1, 1, Scalar::q_pow(2));
        m.set(2, 2, Scalar::lambda());
        let (c, r) = m.rank_factor();
        assert_eq!(c.ncols, 2);
        assert_eq!(c.mul(&r), m);
    }

    #[test]
    fn kernel_vectors_annihilate() {
        let mut m = Mat::zeros(1, 2);
        m.set(0, 0, Scalar::one());
        m.set(0, 1, Scalar::q());
        for v in m.kernel_basis() {
            let out = m.mul_vec(&v);
            assert!(out.iter().all(|x| x.is_zero()));
        }
        assert_eq!(m.kernel_basis().len(), 1);
    }

    #[test]
    fn mul_is_associative_with_partial_overlap() {
        let p = perm2();
        let a = p.relabel(|l| l); // (1,2)
        let b = p.relabel(|l| l + 1); // (2,3)
        let c = p.relabel(|l| l + 2); // (3,4)
        let lhs = a.mul(&b).mul(&c);
        let rhs = a.mul(&b.mul(&c));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn tensor_json_round_trip() {
        let p = perm2();
        let t = Tensor::from_expr(&p);
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("\"idx\""));
        let back: Tensor = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn specialization_drops_vanishing_entries() {
        let mut e = Expr::zero(vec![(1, 2)], vec![(1, 2)]);
        e.set(vec![0], vec![0], Scalar::lambda());
        e.set(vec![1], vec![1], Scalar::q());
        let one = num_rational::BigRational::from_integer(1.into());
        let s = e.specialize(&one).unwrap();
        assert_eq!(s.support(), 1);
        assert!(s.get(&[1], &[1]).is_one());
    }
}
