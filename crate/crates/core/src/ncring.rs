//! Noncommutative graded polynomial engine.
//!
//! Words are sequences of indexed generators from a declared alphabet.
//! Families carry a class number; the normal order sorts letters by
//! ascending class. Cross-class exchange rules (derived from matrix sandwich
//! relations by exact linear solves) bubble letters into class order, then
//! each same-class block is reduced against the linear span of the class
//! relations to a fixed echelon complement. The outcome is canonical: two
//! expressions are equal in the algebra iff their normal forms coincide.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use serde_json::{json, Value};
use thiserror::Error;

use crate::qfield::Scalar;
use crate::tensor::{Expr, Mat, MultiIndex, TensorError};

#[derive(Debug, Error)]
pub enum NcError {
    #[error("exchange system is singular: the rule is not determined")]
    Singular,
    #[error("exchange system is inconsistent or unsolvable: {0}")]
    Linear(#[from] TensorError),
    #[error("unexpected word shape in relation: {0}")]
    BadShape(String),
    #[error("malformed polynomial JSON: {0}")]
    Json(String),
}

/// One generator family: `slots` indices, each ranging over `dim` values.
#[derive(Debug, Clone)]
pub struct Family {
    pub name: String,
    pub dim: usize,
    pub slots: usize,
    pub grading: i64,
    pub class: u8,
}

/// Ordered list of families; ascending class number is the normal order.
#[derive(Debug, Clone)]
pub struct GeneratorAlphabet {
    pub families: Vec<Family>,
}

impl GeneratorAlphabet {
    pub fn new(families: Vec<Family>) -> Self {
        let mut names = BTreeSet::new();
        for f in &families {
            assert!(names.insert(f.name.clone()), "duplicate family {}", f.name);
        }
        GeneratorAlphabet { families }
    }

    pub fn fam_id(&self, name: &str) -> u8 {
        self.families
            .iter()
            .position(|f| f.name == name)
            .unwrap_or_else(|| panic!("unknown family {}", name)) as u8
    }

    pub fn class_of(&self, fam: u8) -> u8 {
        self.families[fam as usize].class
    }

    pub fn letters(&self, fam: u8) -> Vec<Letter> {
        let f = &self.families[fam as usize];
        MultiIndex::new(&vec![f.dim; f.slots])
            .map(|idx| Letter { fam, idx })
            .collect()
    }

    pub fn class_letters(&self, class: u8) -> Vec<Letter> {
        let mut out = Vec::new();
        for (i, f) in self.families.iter().enumerate() {
            if f.class == class {
                out.extend(self.letters(i as u8));
            }
        }
        out
    }

    pub fn word_grading(&self, w: &[Letter]) -> i64 {
        w.iter()
            .map(|l| self.families[l.fam as usize].grading)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter {
    pub fam: u8,
    pub idx: Vec<u16>,
}

pub type Word = Vec<Letter>;

/// Sparse noncommutative polynomial: word -> coefficient.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NCPoly {
    pub terms: BTreeMap<Word, Scalar>,
}

impl NCPoly {
    pub fn zero() -> Self {
        NCPoly::default()
    }

    pub fn scalar(c: Scalar) -> Self {
        let mut p = NCPoly::zero();
        p.add_term(Vec::new(), c);
        p
    }

    pub fn one() -> Self {
        NCPoly::scalar(Scalar::one())
    }

    pub fn letter(l: Letter) -> Self {
        let mut p = NCPoly::zero();
        p.add_term(vec![l], Scalar::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, w: Word, c: Scalar) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&w) {
            Some(cur) => {
                *cur = &*cur + &c;
                if cur.is_zero() {
                    self.terms.remove(&w);
                }
            }
            None => {
                self.terms.insert(w, c);
            }
        }
    }

    pub fn add(&self, other: &NCPoly) -> NCPoly {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &NCPoly) -> NCPoly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> NCPoly {
        NCPoly {
            terms: self.terms.iter().map(|(w, c)| (w.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, f: &Scalar) -> NCPoly {
        if f.is_zero() {
            return NCPoly::zero();
        }
        NCPoly {
            terms: self.terms.iter().map(|(w, c)| (w.clone(), c * f)).collect(),
        }
    }

    pub fn mul(&self, other: &NCPoly) -> NCPoly {
        let mut out = NCPoly::zero();
        for (w1, c1) in &self.terms {
            for (w2, c2) in &other.terms {
                let c = c1 * c2;
                if c.is_zero() {
                    continue;
                }
                let mut w = w1.clone();
                w.extend_from_slice(w2);
                out.add_term(w, c);
            }
        }
        out
    }

    pub fn max_word_len(&self) -> usize {
        self.terms.keys().map(|w| w.len()).max().unwrap_or(0)
    }

    /// Common grading of all terms, if the polynomial is homogeneous.
    pub fn grading(&self, alph: &GeneratorAlphabet) -> Option<i64> {
        let mut it = self.terms.keys().map(|w| alph.word_grading(w));
        let first = it.next()?;
        it.all(|g| g == first).then_some(first)
    }

    /// JSON form: list of {"word": [[family, [1-based indices]], ...],
    /// "coeff": canonical Scalar string}.
    pub fn to_json(&self, alph: &GeneratorAlphabet) -> Value {
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|(w, c)| {
                let word: Vec<Value> = w
                    .iter()
                    .map(|l| {
                        let idx: Vec<u64> = l.idx.iter().map(|&i| i as u64 + 1).collect();
                        json!([alph.families[l.fam as usize].name, idx])
                    })
                    .collect();
                json!({"word": word, "coeff": c.to_canonical_string()})
            })
            .collect();
        Value::Array(terms)
    }

    pub fn from_json(v: &Value, alph: &GeneratorAlphabet) -> Result<NCPoly, NcError> {
        let arr = v.as_array().ok_or_else(|| NcError::Json("not an array".into()))?;
        let mut p = NCPoly::zero();
        for t in arr {
            let word = t
                .get("word")
                .and_then(Value::as_array)
                .ok_or_else(|| NcError::Json("missing word".into()))?;
            let coeff = t
                .get("coeff")
                .and_then(Value::as_str)
                .ok_or_else(|| NcError::Json("missing coeff".into()))?;
            let mut w = Vec::new();
            for l in word {
                let pair = l.as_array().filter(|a| a.len() == 2);
                let pair = pair.ok_or_else(|| NcError::Json("bad letter".into()))?;
                let name = pair[0]
                    .as_str()
                    .ok_or_else(|| NcError::Json("bad family name".into()))?;
                let idx: Vec<u16> = pair[1]
                    .as_array()
                    .ok_or_else(|| NcError::Json("bad index list".into()))?
                    .iter()
                    .map(|i| i.as_u64().map(|x| (x - 1) as u16))
                    .collect::<Option<_>>()
                    .ok_or_else(|| NcError::Json("bad index".into()))?;
                w.push(Letter {
                    fam: alph.fam_id(name),
                    idx,
                });
            }
            let c = Scalar::parse(coeff).map_err(|e| NcError::Json(e.to_string()))?;
            p.add_term(w, c);
        }
        Ok(p)
    }
}

/// Square matrix with NCPoly entries; rows are the lower (incoming) index,
/// columns the upper one, and the product keeps the written word order.
#[derive(Clone)]
pub struct MatNc {
    pub dim: usize,
    pub e: Vec<Vec<NCPoly>>,
}

impl MatNc {
    pub fn zeros(dim: usize) -> Self {
        MatNc {
            dim,
            e: vec![vec![NCPoly::zero(); dim]; dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = MatNc::zeros(dim);
        for i in 0..dim {
            m.e[i][i] = NCPoly::one();
        }
        m
    }

    /// Scalar coefficient matrix from a tensor expression (same layout as
    /// Expr::to_mat: rows = kets, columns = bras).
    pub fn from_expr(x: &Expr) -> MatNc {
        let m = x.to_mat();
        assert_eq!(m.nrows, m.ncols);
        let mut out = MatNc::zeros(m.nrows);
        for r in 0..m.nrows {
            for (&c, v) in m.row(r) {
                out.e[r][c] = NCPoly::scalar(v.clone());
            }
        }
        out
    }

    /// Generator matrix on a single space: entry with upper index u, lower
    /// index l is the letter with idx [u, l].
    pub fn gen(fam: u8, n: usize) -> MatNc {
        let mut m = MatNc::zeros(n);
        for u in 0..n {
            for l in 0..n {
                m.e[l][u] = NCPoly::letter(Letter {
                    fam,
                    idx: vec![u as u16, l as u16],
                });
            }
        }
        m
    }

    /// X ⊗ 1 on the pair space of two n-dim factors.
    pub fn gen1(fam: u8, n: usize) -> MatNc {
        let dim = n * n;
        let mut m = MatNc::zeros(dim);
        for u1 in 0..n {
            for l1 in 0..n {
                for u2 in 0..n {
                    m.e[l1 * n + u2][u1 * n + u2] = NCPoly::letter(Letter {
                        fam,
                        idx: vec![u1 as u16, l1 as u16],
                    });
                }
            }
        }
        m
    }

    /// 1 ⊗ X on the pair space of two n-dim factors.
    pub fn gen2(fam: u8, n: usize) -> MatNc {
        let dim = n * n;
        let mut m = MatNc::zeros(dim);
        for u1 in 0..n {
            for u2 in 0..n {
                for l2 in 0..n {
                    m.e[u1 * n + l2][u1 * n + u2] = NCPoly::letter(Letter {
                        fam,
                        idx: vec![u2 as u16, l2 as u16],
                    });
                }
            }
        }
        m
    }

    /// self ⊗ 1 on the pair space of two factors of size self.dim.
    pub fn space1(&self) -> MatNc {
        let n = self.dim;
        let mut m = MatNc::zeros(n * n);
        for u1 in 0..n {
            for l1 in 0..n {
                if self.e[l1][u1].is_zero() {
                    continue;
                }
                for u2 in 0..n {
                    m.e[l1 * n + u2][u1 * n + u2] = self.e[l1][u1].clone();
                }
            }
        }
        m
    }

    /// 1 ⊗ self on the pair space of two factors of size self.dim.
    pub fn space2(&self) -> MatNc {
        let n = self.dim;
        let mut m = MatNc::zeros(n * n);
        for u2 in 0..n {
            for l2 in 0..n {
                if self.e[l2][u2].is_zero() {
                    continue;
                }
                for u1 in 0..n {
                    m.e[u1 * n + l2][u1 * n + u2] = self.e[l2][u2].clone();
                }
            }
        }
        m
    }

    pub fn mul(&self, other: &MatNc) -> MatNc {
        assert_eq!(self.dim, other.dim);
        let mut out = MatNc::zeros(self.dim);
        for l in 0..self.dim {
            for u in 0..self.dim {
                let mut acc = NCPoly::zero();
                for m in 0..self.dim {
                    if self.e[l][m].is_zero() || other.e[m][u].is_zero() {
                        continue;
                    }
                    acc = acc.add(&self.e[l][m].mul(&other.e[m][u]));
                }
                out.e[l][u] = acc;
            }
        }
        out
    }

    pub fn add(&self, other: &MatNc) -> MatNc {
        assert_eq!(self.dim, other.dim);
        let mut out = MatNc::zeros(self.dim);
        for l in 0..self.dim {
            for u in 0..self.dim {
                out.e[l][u] = self.e[l][u].add(&other.e[l][u]);
            }
        }
        out
    }

    pub fn sub(&self, other: &MatNc) -> MatNc {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> MatNc {
        self.map(|p| p.neg())
    }

    pub fn scale(&self, f: &Scalar) -> MatNc {
        self.map(|p| p.scale(f))
    }

    pub fn map(&self, f: impl Fn(&NCPoly) -> NCPoly) -> MatNc {
        MatNc {
            dim: self.dim,
            e: self
                .e
                .iter()
                .map(|row| row.iter().map(&f).collect())
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.e.iter().flatten().all(NCPoly::is_zero)
    }

    /// Weighted trace Σ_i w_i · e[i][i].
    pub fn trace_weighted(&self, w: &[Scalar]) -> NCPoly {
        assert_eq!(w.len(), self.dim);
        let mut out = NCPoly::zero();
        for i in 0..self.dim {
            out = out.add(&self.e[i][i].scale(&w[i]));
        }
        out
    }
}

/// Rewrites an adjacent out-of-order letter pair (left·right) into a linear
/// combination of in-order pairs plus shorter tails.
#[derive(Debug, Clone)]
pub struct ExchangeRule {
    pub left: u8,
    pub right: u8,
    table: BTreeMap<(Vec<u16>, Vec<u16>), Vec<(Word, Scalar)>>,
}

impl ExchangeRule {
    pub fn from_table(
        left: u8,
        right: u8,
        table: BTreeMap<(Vec<u16>, Vec<u16>), Vec<(Word, Scalar)>>,
    ) -> Self {
        ExchangeRule { left, right, table }
    }

    pub fn replacement(&self, li: &[u16], ri: &[u16]) -> &[(Word, Scalar)] {
        self.table
            .get(&(li.to_vec(), ri.to_vec()))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }
}

/// Derive the exchange rule eliminating words letter(left)·letter(right)
/// from a sandwich relation written as lhs − rhs = 0. Every other word in
/// the relation must be in-order (right before left) or strictly shorter.
pub fn derive_exchange(
    alph: &GeneratorAlphabet,
    diff: &MatNc,
    left: u8,
    right: u8,
) -> Result<ExchangeRule, NcError> {
    let bad_words: Vec<(Vec<u16>, Vec<u16>)> = alph
        .letters(left)
        .into_iter()
        .flat_map(|a| {
            alph.letters(right)
                .into_iter()
                .map(move |b| (a.idx.clone(), b.idx))
        })
        .collect();
    let bad_pos: HashMap<(Vec<u16>, Vec<u16>), usize> = bad_words
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, w)| (w, i))
        .collect();

    let mut others: BTreeSet<Word> = BTreeSet::new();
    for row in &diff.e {
        for p in row {
            for w in p.terms.keys() {
                if w.len() == 2 && w[0].fam == left && w[1].fam == right {
                    continue;
                }
                if w.len() == 2 && !(w[0].fam == right && w[1].fam == left) {
                    return Err(NcError::BadShape(format!(
                        "length-2 word with families ({}, {})",
                        w[0].fam, w[1].fam
                    )));
                }
                if w.len() > 2 {
                    return Err(NcError::BadShape("word longer than 2".into()));
                }
                others.insert(w.clone());
            }
        }
    }
    let others: Vec<Word> = others.into_iter().collect();
    let oth_pos: HashMap<&Word, usize> = others.iter().enumerate().map(|(i, w)| (w, i)).collect();

    let neq = diff.dim * diff.dim;
    let mut m_bad = Mat::zeros(neq, bad_words.len());
    let mut m_oth = Mat::zeros(neq, others.len().max(1));
    for (l, row) in diff.e.iter().enumerate() {
        for (u, p) in row.iter().enumerate() {
            let eq = l * diff.dim + u;
            for (w, c) in &p.terms {
                if w.len() == 2 && w[0].fam == left && w[1].fam == right {
                    let col = bad_pos[&(w[0].idx.clone(), w[1].idx.clone())];
                    m_bad.set(eq, col, &m_bad.get(eq, col) + c);
                } else {
                    let col = oth_pos[w];
                    m_oth.set(eq, col, &m_oth.get(eq, col) - c);
                }
            }
        }
    }
    let sol = m_bad.solve(&m_oth)?;
    if !sol.kernel.is_empty() {
        return Err(NcError::Singular);
    }
    let mut table = BTreeMap::new();
    for (bi, bw) in bad_words.iter().enumerate() {
        let mut repl = Vec::new();
        for (oi, ow) in others.iter().enumerate() {
            let v = sol.particular.get(bi, oi);
            if !v.is_zero() {
                repl.push((ow.clone(), v));
            }
        }
        if !repl.is_empty() {
            table.insert(bw.clone(), repl);
        }
    }
    Ok(ExchangeRule { left, right, table })
}

/// Relation vectors, one per matrix component of lhs − rhs = 0.
pub fn relation_vectors(diff: &MatNc) -> Vec<BTreeMap<Word, Scalar>> {
    diff.e
        .iter()
        .flatten()
        .filter(|p| !p.is_zero())
        .map(|p| p.terms.clone())
        .collect()
}

/// Echelonized span of all embeddings u·rel·v of the class relations inside
/// the filtered word span of one class, up to a fixed length cap. Columns
/// are ordered longer words first, so pivots land on the words that get
/// rewritten and the complement is the canonical basis.
struct BlockReducer {
    words: Vec<Word>,
    pos: HashMap<Word, usize>,
    rref: crate::tensor::Rref,
}

impl BlockReducer {
    fn build(letters: &[Letter], rels: &[BTreeMap<Word, Scalar>], cap: usize) -> BlockReducer {
        let mut words: Vec<Word> = vec![Vec::new()];
        let mut by_len: Vec<Vec<Word>> = vec![vec![Vec::new()]];
        for l in 1..=cap {
            let mut next = Vec::new();
            for w in &by_len[l - 1] {
                for a in letters {
                    let mut nw = w.clone();
                    nw.push(a.clone());
                    next.push(nw);
                }
            }
            words.extend(next.iter().cloned());
            by_len.push(next);
        }
        // longer first so pivots rewrite long words; lex-descending tie so
        // the surviving complement monomials are the ascending ones
        words.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| b.cmp(a)));
        let pos: HashMap<Word, usize> = words
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, w)| (w, i))
            .collect();

        let mut rows: Vec<BTreeMap<usize, Scalar>> = Vec::new();
        for rel in rels {
            let rel_len = rel.keys().map(|w| w.len()).max().unwrap_or(0);
            for a in 0..=cap.saturating_sub(rel_len) {
                for b in 0..=cap.saturating_sub(rel_len + a) {
                    for u in &by_len[a] {
                        for v in &by_len[b] {
                            let mut row: BTreeMap<usize, Scalar> = BTreeMap::new();
                            for (w, c) in rel {
                                let mut full = u.clone();
                                full.extend_from_slice(w);
                                full.extend_from_slice(v);
                                let p = pos[&full];
                                let cur = match row.get(&p) {
                                    Some(x) => x + c,
                                    None => c.clone(),
                                };
                                if cur.is_zero() {
                                    row.remove(&p);
                                } else {
                                    row.insert(p, cur);
                                }
                            }
                            if !row.is_empty() {
                                rows.push(row);
                            }
                        }
                    }
                }
            }
        }
        let mut m = Mat::zeros(rows.len().max(1), words.len());
        for (i, row) in rows.into_iter().enumerate() {
            for (c, v) in row {
                m.set(i, c, v);
            }
        }
        BlockReducer {
            rref: m.rref(),
            words,
            pos,
        }
    }

    fn reduce_word(&self, w: &Word) -> Vec<(Word, Scalar)> {
        let mut v = vec![Scalar::zero(); self.words.len()];
        v[self.pos[w]] = Scalar::one();
        self.rref.reduce(&mut v);
        v.into_iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| (self.words[i].clone(), c))
            .collect()
    }

    /// Words not hit by a pivot, bucketed by length.
    fn complement_dims(&self, cap: usize) -> Vec<usize> {
        let pivots: BTreeSet<usize> = self.rref.pivots.iter().copied().collect();
        let mut dims = vec![0usize; cap + 1];
        for (i, w) in self.words.iter().enumerate() {
            if !pivots.contains(&i) {
                dims[w.len()] += 1;
            }
        }
        dims
    }
}

/// Dimensions of the canonical complement per word length for one class,
/// used to compare against classical Poincaré series.
pub fn complement_dims(
    letters: &[Letter],
    rels: &[BTreeMap<Word, Scalar>],
    cap: usize,
) -> Vec<usize> {
    BlockReducer::build(letters, rels, cap).complement_dims(cap)
}

/// Full relation data of an algebra: cross-class exchange rules plus
/// same-class relation spans.
pub struct RelationSet {
    pub alphabet: GeneratorAlphabet,
    cross: HashMap<(u8, u8), ExchangeRule>,
    class_rels: HashMap<u8, Vec<BTreeMap<Word, Scalar>>>,
    class_caps: HashMap<u8, usize>,
    nil_len: HashMap<u8, usize>,
    reducers: Mutex<HashMap<u8, Arc<BlockReducer>>>,
    word_cache: Mutex<HashMap<Word, Arc<Vec<(Word, Scalar)>>>>,
}

impl RelationSet {
    pub fn new(alphabet: GeneratorAlphabet) -> Self {
        RelationSet {
            alphabet,
            cross: HashMap::new(),
            class_rels: HashMap::new(),
            class_caps: HashMap::new(),
            nil_len: HashMap::new(),
            reducers: Mutex::new(HashMap::new()),
            word_cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn add_cross_rule(&mut self, rule: ExchangeRule) {
        let lc = self.alphabet.class_of(rule.left);
        let rc = self.alphabet.class_of(rule.right);
        assert!(lc > rc, "cross rule must swap toward normal order");
        self.cross.insert((rule.left, rule.right), rule);
    }

    /// Declare the relations of one class and the block length cap the
    /// reducer is built at.
    pub fn add_class(&mut self, class: u8, rels: Vec<BTreeMap<Word, Scalar>>, cap: usize) {
        self.class_rels.insert(class, rels);
        self.class_caps.insert(class, cap);
    }

    fn reducer(&self, class: u8) -> Arc<BlockReducer> {
        let mut cache = self.reducers.lock().unwrap();
        cache
            .entry(class)
            .or_insert_with(|| {
                let letters = self.alphabet.class_letters(class);
                let rels = self.class_rels.get(&class).cloned().unwrap_or_default();
                let cap = self.class_caps.get(&class).copied().unwrap_or(2);
                Arc::new(BlockReducer::build(&letters, &rels, cap))
            })
            .clone()
    }

    /// Check that every word of the class with exactly `len` letters reduces
    /// to zero; on success the class is marked nilpotent from that length on.
    pub fn establish_nilpotency(&mut self, class: u8, len: usize) -> bool {
        assert!(
            len <= self.class_caps.get(&class).copied().unwrap_or(0),
            "nilpotency length beyond reducer cap"
        );
        let red = self.reducer(class);
        let all_die = red
            .words
            .iter()
            .filter(|w| w.len() == len)
            .all(|w| red.reduce_word(w).is_empty());
        if all_die {
            self.nil_len.insert(class, len);
        }
        all_die
    }

    pub fn nil_len(&self, class: u8) -> Option<usize> {
        self.nil_len.get(&class).copied()
    }

    /// Block length the class reducer was built at.
    pub fn class_cap(&self, class: u8) -> usize {
        self.class_caps.get(&class).copied().unwrap_or(2)
    }

    /// Canonical complement dimensions per block length for one class.
    pub fn class_complement_dims(&self, class: u8) -> Vec<usize> {
        let cap = self.class_caps.get(&class).copied().unwrap_or(2);
        self.reducer(class).complement_dims(cap)
    }

    /// The canonical basis monomials of one class: words up to the cap not
    /// rewritten by the reducer.
    pub fn class_complement_words(&self, class: u8) -> Vec<Word> {
        let red = self.reducer(class);
        let pivots: BTreeSet<usize> = red.rref.pivots.iter().copied().collect();
        red.words
            .iter()
            .enumerate()
            .filter(|(i, _)| !pivots.contains(i))
            .map(|(_, w)| w.clone())
            .collect()
    }

    fn first_inversion(&self, w: &[Letter]) -> Option<usize> {
        (0..w.len().saturating_sub(1)).find(|&i| {
            self.alphabet.class_of(w[i].fam) > self.alphabet.class_of(w[i + 1].fam)
        })
    }

    fn block_reduce(&self, class: u8, block: &Word) -> Arc<Vec<(Word, Scalar)>> {
        if let Some(nil) = self.nil_len.get(&class) {
            if block.len() >= *nil {
                return Arc::new(Vec::new());
            }
        }
        if let Some(hit) = self.word_cache.lock().unwrap().get(block) {
            return hit.clone();
        }
        let cap = self.class_caps.get(&class).copied().unwrap_or(2);
        assert!(
            block.len() <= cap,
            "class {} block of length {} exceeds reducer cap {}",
            class,
            block.len(),
            cap
        );
        let red = self.reducer(class);
        let out = Arc::new(red.reduce_word(block));
        self.word_cache
            .lock()
            .unwrap()
            .insert(block.clone(), out.clone());
        out
    }

    /// Canonical form: bubble cross-class inversions with the exchange
    /// rules, then reduce every class block to the echelon complement.
    pub fn normal_form(&self, p: &NCPoly) -> NCPoly {
        let mut pending: BTreeMap<Word, Scalar> = p.terms.clone();
        let mut sorted: BTreeMap<Word, Scalar> = BTreeMap::new();
        let merge = |map: &mut BTreeMap<Word, Scalar>, w: Word, c: Scalar| {
            if c.is_zero() {
                return;
            }
            match map.get_mut(&w) {
                Some(cur) => {
                    *cur = &*cur + &c;
                    if cur.is_zero() {
                        map.remove(&w);
                    }
                }
                None => {
                    map.insert(w, c);
                }
            }
        };
        while let Some((w, c)) = pending.pop_last() {
            match self.first_inversion(&w) {
                None => merge(&mut sorted, w, c),
                Some(i) => {
                    let key = (w[i].fam, w[i + 1].fam);
                    let rule = self.cross.get(&key).unwrap_or_else(|| {
                        panic!(
                            "no exchange rule for families ({}, {})",
                            self.alphabet.families[key.0 as usize].name,
                            self.alphabet.families[key.1 as usize].name
                        )
                    });
                    for (rw, rc) in rule.replacement(&w[i].idx, &w[i + 1].idx) {
                        let mut nw = w[..i].to_vec();
                        nw.extend_from_slice(rw);
                        nw.extend_from_slice(&w[i + 2..]);
                        merge(&mut pending, nw, &c * rc);
                    }
                }
            }
        }

        let mut out = NCPoly::zero();
        'term: for (w, c) in sorted {
            // split into class blocks and reduce each
            let mut parts: Vec<Arc<Vec<(Word, Scalar)>>> = Vec::new();
            let mut i = 0;
            while i < w.len() {
                let class = self.alphabet.class_of(w[i].fam);
                let mut j = i + 1;
                while j < w.len() && self.alphabet.class_of(w[j].fam) == class {
                    j += 1;
                }
                let red = self.block_reduce(class, &w[i..j].to_vec());
                if red.is_empty() {
                    continue 'term;
                }
                parts.push(red);
                i = j;
            }
            // cartesian expansion of the reduced blocks
            let mut acc: Vec<(Word, Scalar)> = vec![(Vec::new(), c)];
            for part in &parts {
                let mut next = Vec::with_capacity(acc.len() * part.len());
                for (w0, c0) in &acc {
                    for (w1, c1) in part.iter() {
                        let mut nw = w0.clone();
                        nw.extend_from_slice(w1);
                        next.push((nw, c0 * c1));
                    }
                }
                acc = next;
            }
            // a reduced block can be a shorter word of the same class, so
            // recombined words may need one more pass
            for (nw, nc) in acc {
                if nc.is_zero() {
                    continue;
                }
                if self.first_inversion(&nw).is_some() {
                    let mut again = NCPoly::zero();
                    again.add_term(nw, nc);
                    out = out.add(&self.normal_form(&again));
                } else {
                    out.add_term(nw, nc);
                }
            }
        }
        out
    }

    pub fn is_zero(&self, p: &NCPoly) -> bool {
        self.normal_form(p).is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rmat::perm;

    fn toy_alphabet() -> GeneratorAlphabet {
        // t: two commuting even letters, g: two anticommuting odd letters
        GeneratorAlphabet::new(vec![
            Family {
                name: "t".into(),
                dim: 2,
                slots: 1,
                grading: 0,
                class: 0,
            },
            Family {
                name: "g".into(),
                dim: 2,
                slots: 1,
                grading: 1,
                class: 1,
            },
        ])
    }

    fn lt(fam: u8, i: u16) -> Letter {
        Letter { fam, idx: vec![i] }
    }

    fn toy_relations() -> RelationSet {
        let alph = toy_alphabet();
        let mut rels = RelationSet::new(alph.clone());
        let comm = |a: Letter, b: Letter, sign: i64| {
            let mut r: BTreeMap<Word, Scalar> = BTreeMap::new();
            r.insert(vec![a.clone(), b.clone()], Scalar::one());
            r.insert(vec![b, a], Scalar::from_int(-sign));
            r
        };
        let t0 = || lt(0, 0);
        let t1 = || lt(0, 1);
        let g0 = || lt(1, 0);
        let g1 = || lt(1, 1);
        let mut grels = vec![comm(g0(), g1(), -1)];
        for g in [g0(), g1()] {
            let mut sq: BTreeMap<Word, Scalar> = BTreeMap::new();
            sq.insert(vec![g.clone(), g], Scalar::one());
            grels.push(sq);
        }
        rels.add_class(0, vec![comm(t0(), t1(), 1)], 4);
        rels.add_class(1, grels, 3);
        // g past t: plain supercommutation (they commute)
        let mut table = BTreeMap::new();
        for gi in 0..2u16 {
            for ti in 0..2u16 {
                table.insert(
                    (vec![gi], vec![ti]),
                    vec![(vec![lt(0, ti), lt(1, gi)], Scalar::one())],
                );
            }
        }
        rels.add_cross_rule(ExchangeRule::from_table(1, 0, table));
        rels
    }

    #[test]
    fn toy_normal_form_sorts_and_reduces() {
        let rels = toy_relations();
        // g0 t1 t0 -> t0 t1 g0
        let p = NCPoly::letter(lt(1, 0))
            .mul(&NCPoly::letter(lt(0, 1)))
            .mul(&NCPoly::letter(lt(0, 0)));
        let nf = rels.normal_form(&p);
        let mut expect = NCPoly::zero();
        expect.add_term(vec![lt(0, 0), lt(0, 1), lt(1, 0)], Scalar::one());
        assert_eq!(nf, expect);
        // anticommutator of distinct odd letters vanishes
        let ac = NCPoly::letter(lt(1, 0))
            .mul(&NCPoly::letter(lt(1, 1)))
            .add(&NCPoly::letter(lt(1, 1)).mul(&NCPoly::letter(lt(1, 0))));
        assert!(rels.is_zero(&ac));
        // square of an odd letter vanishes
        let sq = NCPoly::letter(lt(1, 1)).mul(&NCPoly::letter(lt(1, 1)));
        assert!(rels.is_zero(&sq));
        assert!(!rels.is_zero(&NCPoly::letter(lt(1, 1))));
    }

    #[test]
    fn toy_nilpotency_and_flatness() {
        let mut rels = toy_relations();
        assert!(rels.establish_nilpotency(1, 3));
        assert_eq!(rels.nil_len(1), Some(3));
        // exterior algebra on 2 letters: 1, 2, 1
        assert_eq!(rels.class_complement_dims(1)[..3], [1, 2, 1]);
        // symmetric algebra on 2 letters: 1, 2, 3, 4, 5
        assert_eq!(rels.class_complement_dims(0), vec![1, 2, 3, 4, 5]);
        // any length-4 word of odd letters dies through the nil cutoff
        let w: Word = vec![lt(1, 0), lt(1, 1), lt(1, 0), lt(1, 1)];
        let mut p = NCPoly::zero();
        p.add_term(w, Scalar::one());
        assert!(rels.is_zero(&p));
    }

    #[test]
    fn toy_normal_form_is_idempotent_and_compatible() {
        let rels = toy_relations();
        let letters: Vec<Letter> = vec![lt(0, 0), lt(0, 1), lt(1, 0), lt(1, 1)];
        // deterministic sweep over all words of length 3 stands in for a
        // randomized compatibility check at this size
        for a in &letters {
            for b in &letters {
                for c in &letters {
                    let p = NCPoly::letter(a.clone()).mul(&NCPoly::letter(b.clone()));
                    let q = NCPoly::letter(c.clone());
                    let nf = rels.normal_form(&p.mul(&q));
                    assert_eq!(rels.normal_form(&nf), nf, "idempotency");
                    let split = rels.normal_form(&rels.normal_form(&p).mul(&rels.normal_form(&q)));
                    assert_eq!(nf, split, "compatibility");
                }
            }
        }
    }

    #[test]
    fn exchange_rule_from_permutation_sandwich() {
        // with the plain permutation in place of the braid, om1 t2 = t2 P om2 P
        // must yield letterwise transposition
        let alph = GeneratorAlphabet::new(vec![
            Family {
                name: "t".into(),
                dim: 2,
                slots: 2,
                grading: 0,
                class: 0,
            },
            Family {
                name: "om".into(),
                dim: 2,
                slots: 2,
                grading: 1,
                class: 1,
            },
        ]);
        let p = MatNc::from_expr(&perm(2, 1, 2));
        let lhs = MatNc::gen1(1, 2).mul(&MatNc::gen2(0, 2));
        let rhs = MatNc::gen2(0, 2).mul(&p).mul(&MatNc::gen2(1, 2)).mul(&p);
        let rule = derive_exchange(&alph, &lhs.sub(&rhs), 1, 0).unwrap();
        for a in alph.letters(1) {
            for b in alph.letters(0) {
                let repl = rule.replacement(&a.idx, &b.idx);
                assert_eq!(repl.len(), 1);
                assert_eq!(repl[0].0, vec![b.clone(), a.clone()]);
                assert!(repl[0].1.is_one());
            }
        }
    }

    #[test]
    fn ncpoly_json_round_trip() {
        let alph = toy_alphabet();
        let mut p = NCPoly::zero();
        p.add_term(vec![lt(0, 1), lt(1, 0)], Scalar::lambda());
        p.add_term(Vec::new(), Scalar::from_int(-3));
        let v = p.to_json(&alph);
        let back = NCPoly::from_json(&v, &alph).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn grading_tracks_families() {
        let alph = toy_alphabet();
        let mut p = NCPoly::zero();
        p.add_term(vec![lt(1, 0), lt(0, 0)], Scalar::one());
        p.add_term(vec![lt(0, 1), lt(1, 1)], Scalar::q());
        assert_eq!(p.grading(&alph), Some(1));
        p.add_term(vec![lt(0, 0)], Scalar::one());
        assert_eq!(p.grading(&alph), None);
    }
}
