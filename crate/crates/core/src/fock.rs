//! Polynomial state space in the T and om generators.
//!
//! The algebra acts on itself from the left; L, L inverse and J act on the
//! empty word as annihilation operators (L and its inverse leave a Kronecker
//! delta, J kills the term). What survives is again a polynomial in T and
//! om, so every operator restricts to a matrix between graded components.
//! The harmonic decomposition is computed at an exact rational value of q,
//! with genericity certified against the symbolic ranks.

use std::collections::BTreeMap;

use num_rational::BigRational;
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::glq::{nf_poly, GlqError, GlqInstance, FAM_J, FAM_L, FAM_LI, FAM_T, FAM_W};
use crate::ncring::{GeneratorAlphabet, NCPoly, Word};
use crate::qfield::{QFieldError, Scalar};
use crate::tensor::Mat;

#[derive(Debug, Error)]
pub enum FockError {
    #[error("operator is not degree homogeneous: {0}")]
    MixedDegrees(String),
    #[error("state contains a non-creation letter: {0}")]
    NotAState(String),
    #[error("monomial {0} falls outside the expected graded component")]
    OutsideComponent(String),
    #[error("degree {0} of the {1} family exceeds the reducer cap {2}")]
    DegreeBeyondCap(usize, &'static str, usize),
    #[error("q0 = {0} is not generic: {1} rank dropped from {2} to {3}")]
    NonGeneric(BigRational, &'static str, usize, usize),
    #[error("decomposition system is inconsistent on this component")]
    Inconsistent,
    #[error(transparent)]
    Field(#[from] QFieldError),
    #[error(transparent)]
    Glq(#[from] GlqError),
}

fn word_poly(w: Word) -> NCPoly {
    let mut p = NCPoly::zero();
    p.add_term(w, Scalar::one());
    p
}

fn word_label(alph: &GeneratorAlphabet, w: &Word) -> String {
    if w.is_empty() {
        return "1".into();
    }
    w.iter()
        .map(|l| {
            let idx: Vec<String> = l.idx.iter().map(|i| i.to_string()).collect();
            format!("{}[{}]", alph.families[l.fam as usize].name, idx.join(","))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// One graded component of the polynomial state space: the canonical basis
/// monomials with exactly `t_degree` T letters and `w_degree` om letters.
pub struct StateSpace<'a> {
    pub inst: &'a GlqInstance,
    pub t_degree: usize,
    pub w_degree: usize,
    pub basis: Vec<Word>,
    index: BTreeMap<Word, usize>,
}

impl<'a> StateSpace<'a> {
    pub fn new(inst: &'a GlqInstance, t_degree: usize, w_degree: usize) -> Result<Self, FockError> {
        let rels = &inst.rels;
        for (deg, fam, name) in [(t_degree, FAM_T, "T"), (w_degree, FAM_W, "om")] {
            let class = rels.alphabet.class_of(fam);
            let cap = rels.class_cap(class);
            // beyond a nilpotency bound the component is honestly empty;
            // beyond a mere reducer cap the basis would be silently wrong
            if deg > cap && rels.nil_len(class).is_none() {
                return Err(FockError::DegreeBeyondCap(deg, name, cap));
            }
        }
        let t_class = rels.alphabet.class_of(FAM_T);
        let w_class = rels.alphabet.class_of(FAM_W);
        let t_words: Vec<Word> = rels
            .class_complement_words(t_class)
            .into_iter()
            .filter(|w| w.len() == t_degree)
            .collect();
        let w_words: Vec<Word> = rels
            .class_complement_words(w_class)
            .into_iter()
            .filter(|w| w.len() == w_degree)
            .collect();
        let mut basis: Vec<Word> = t_words
            .iter()
            .flat_map(|tw| {
                w_words.iter().map(move |ww| {
                    let mut m = tw.clone();
                    m.extend(ww.iter().cloned());
                    m
                })
            })
            .collect();
        basis.sort();
        let index = basis.iter().cloned().zip(0..).collect();
        Ok(StateSpace {
            inst,
            t_degree,
            w_degree,
            basis,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Coordinates of a normal-form state in the component basis.
    pub fn coordinates(&self, state: &NCPoly) -> Result<Vec<Scalar>, FockError> {
        let mut v = vec![Scalar::zero(); self.dim()];
        for (w, c) in &state.terms {
            let Some(&i) = self.index.get(w) else {
                return Err(FockError::OutsideComponent(word_label(
                    &self.inst.rels.alphabet,
                    w,
                )));
            };
            v[i] = c.clone();
        }
        Ok(v)
    }

    pub fn from_coordinates(&self, v: &[Scalar]) -> NCPoly {
        let mut p = NCPoly::zero();
        for (i, c) in v.iter().enumerate() {
            if !c.is_zero() {
                p.add_term(self.basis[i].clone(), c.clone());
            }
        }
        p
    }
}

/// Erase the annihilation tail of every normal-form term: J kills the term,
/// L and its inverse contract to deltas, T and om survive.
fn vacuum_erase(p: &NCPoly) -> NCPoly {
    let mut out = NCPoly::zero();
    'term: for (w, c) in &p.terms {
        let mut kept = Vec::with_capacity(w.len());
        for l in w {
            match l.fam {
                FAM_J => continue 'term,
                FAM_L | FAM_LI => {
                    if l.idx[0] != l.idx[1] {
                        continue 'term;
                    }
                }
                _ => kept.push(l.clone()),
            }
        }
        out.add_term(kept, c.clone());
    }
    out
}

/// Left action of an operator on a T, om polynomial state.
pub fn act(inst: &GlqInstance, op: &NCPoly, state: &NCPoly) -> Result<NCPoly, FockError> {
    for w in state.terms.keys() {
        if let Some(l) = w.iter().find(|l| l.fam != FAM_T && l.fam != FAM_W) {
            return Err(FockError::NotAState(word_label(
                &inst.rels.alphabet,
                &vec![l.clone()],
            )));
        }
    }
    let nf = nf_poly(&inst.rels, &op.mul(state));
    Ok(vacuum_erase(&nf))
}

/// Degree shift of a homogeneous operator: change in T letter count and in
/// grading. Every relation conserves the T count and the grading, and the
/// vacuum erasure drops only degree-zero tails, so these two numbers fix
/// the target component.
fn operator_shifts(alph: &GeneratorAlphabet, op: &NCPoly) -> Result<(i64, i64), FockError> {
    let mut shift: Option<(i64, i64)> = None;
    for w in op.terms.keys() {
        let t = w.iter().filter(|l| l.fam == FAM_T).count() as i64;
        let g = alph.word_grading(w);
        match shift {
            None => shift = Some((t, g)),
            Some(s) if s == (t, g) => {}
            Some(_) => return Err(FockError::MixedDegrees(word_label(alph, w))),
        }
    }
    Ok(shift.unwrap_or((0, 0)))
}

/// Exact matrix of an operator from `src` into the component it maps to.
/// Columns follow the source basis, rows the target basis.
pub fn operator_matrix<'a>(
    op: &NCPoly,
    src: &StateSpace<'a>,
) -> Result<(Mat, StateSpace<'a>), FockError> {
    let inst = src.inst;
    let alph = &inst.rels.alphabet;
    let (dt, dw) = operator_shifts(alph, op)?;
    let t2 = src.t_degree as i64 + dt;
    let w2 = src.w_degree as i64 + dw;
    if t2 < 0 || w2 < 0 {
        // only reachable for pure annihilators; the action must vanish
        for b in &src.basis {
            let img = act(inst, op, &word_poly(b.clone()))?;
            if !img.is_zero() {
                return Err(FockError::OutsideComponent(word_label(alph, b)));
            }
        }
        let dst = StateSpace::new(inst, 0, 0)?;
        return Ok((Mat::zeros(0, src.dim()), dst));
    }
    let dst = StateSpace::new(inst, t2 as usize, w2 as usize)?;
    let cols: Vec<Result<Vec<Scalar>, FockError>> = src
        .basis
        .par_iter()
        .map(|b| {
            let img = act(inst, op, &word_poly(b.clone()))?;
            dst.coordinates(&img)
        })
        .collect();
    let mut m = Mat::zeros(dst.dim(), src.dim());
    for (j, col) in cols.into_iter().enumerate() {
        for (i, c) in col?.into_iter().enumerate() {
            if !c.is_zero() {
                m.set(i, j, c);
            }
        }
    }
    Ok((m, dst))
}

fn mat_at(m: &Mat, q0: &BigRational) -> Result<Mat, FockError> {
    let mut out = Mat::zeros(m.nrows, m.ncols);
    for r in 0..m.nrows {
        for (&c, v) in m.row(r) {
            let val = v.eval_at(q0)?;
            out.set(r, c, Scalar::from_rational(&val));
        }
    }
    Ok(out)
}

/// The Laplacian together with the two boundary maps of one component:
/// everything needed for the harmonic analysis there.
pub struct ComponentMaps<'a> {
    pub space: StateSpace<'a>,
    pub delta: Mat,
    /// image map from (t, w - 1), zero columns when w = 0
    pub q_in: Mat,
    /// image map from (t, w + 1)
    pub qstar_in: Mat,
}

/// Rank bookkeeping of one component at a rational q0.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RankSummary {
    pub t_degree: usize,
    pub w_degree: usize,
    pub dim: usize,
    pub kernel_dim: usize,
    pub rank_q_in: usize,
    pub rank_qstar_in: usize,
    /// the three subspaces span independently iff this equals `dim`
    pub span: usize,
}

impl RankSummary {
    pub fn direct_sum(&self) -> bool {
        self.kernel_dim + self.rank_q_in + self.rank_qstar_in == self.dim && self.span == self.dim
    }
}

/// One state split into harmonic, exact and co-exact pieces at q = q0.
pub struct HodgeDecomposition {
    pub harmonic: NCPoly,
    pub q_exact: NCPoly,
    pub qstar_exact: NCPoly,
    pub ranks: RankSummary,
}

impl HodgeDecomposition {
    pub fn to_json(&self, alph: &GeneratorAlphabet) -> Value {
        json!({
            "harmonic": self.harmonic.to_json(alph),
            "q_exact": self.q_exact.to_json(alph),
            "qstar_exact": self.qstar_exact.to_json(alph),
            "ranks": serde_json::to_value(&self.ranks).unwrap(),
        })
    }
}

/// Holds the three operators once; components are analyzed on demand.
pub struct HodgeContext<'a> {
    pub inst: &'a GlqInstance,
    pub q: NCPoly,
    pub qstar: NCPoly,
    pub delta: NCPoly,
}

impl<'a> HodgeContext<'a> {
    pub fn new(inst: &'a GlqInstance) -> Result<Self, FockError> {
        let q = inst.build_q()?;
        let qstar = inst.build_qstar();
        let delta = inst.build_laplacian(&q, &qstar);
        Ok(HodgeContext {
            inst,
            q,
            qstar,
            delta,
        })
    }

    pub fn component(&self, t_degree: usize, w_degree: usize) -> Result<ComponentMaps<'a>, FockError> {
        let space = StateSpace::new(self.inst, t_degree, w_degree)?;
        let (delta, dsp) = operator_matrix(&self.delta, &space)?;
        debug_assert_eq!((dsp.t_degree, dsp.w_degree), (t_degree, w_degree));
        let q_in = if w_degree == 0 {
            Mat::zeros(space.dim(), 0)
        } else {
            let below = StateSpace::new(self.inst, t_degree, w_degree - 1)?;
            operator_matrix(&self.q, &below)?.0
        };
        let above = StateSpace::new(self.inst, t_degree, w_degree + 1)?;
        let qstar_in = operator_matrix(&self.qstar, &above)?.0;
        Ok(ComponentMaps {
            space,
            delta,
            q_in,
            qstar_in,
        })
    }

    /// Specialize the component maps at q0, refusing any rank drop against
    /// the symbolic ranks.
    fn specialized(
        &self,
        maps: &ComponentMaps<'a>,
        q0: &BigRational,
    ) -> Result<(Mat, Mat, Mat), FockError> {
        let pairs: [(&Mat, &'static str); 3] = [
            (&maps.delta, "Laplacian"),
            (&maps.q_in, "Q image"),
            (&maps.qstar_in, "Qstar image"),
        ];
        let mut out = Vec::with_capacity(3);
        for (m, name) in pairs {
            let s = mat_at(m, q0)?;
            let (rs, rm) = (s.rank(), m.rank());
            if rs != rm {
                return Err(FockError::NonGeneric(q0.clone(), name, rm, rs));
            }
            out.push(s);
        }
        let mut it = out.into_iter();
        Ok((it.next().unwrap(), it.next().unwrap(), it.next().unwrap()))
    }

    pub fn rank_summary(
        &self,
        t_degree: usize,
        w_degree: usize,
        q0: &BigRational,
    ) -> Result<RankSummary, FockError> {
        let maps = self.component(t_degree, w_degree)?;
        let (delta, q_in, qstar_in) = self.specialized(&maps, q0)?;
        let dim = maps.space.dim();
        let kernel = delta.kernel_basis();
        let span_m = assemble(dim, &kernel, &q_in, &qstar_in);
        Ok(RankSummary {
            t_degree,
            w_degree,
            dim,
            kernel_dim: kernel.len(),
            rank_q_in: q_in.rank(),
            rank_qstar_in: qstar_in.rank(),
            span: span_m.rank(),
        })
    }

    pub fn decompose(
        &self,
        state: &NCPoly,
        t_degree: usize,
        w_degree: usize,
        q0: &BigRational,
    ) -> Result<HodgeDecomposition, FockError> {
        let maps = self.component(t_degree, w_degree)?;
        let (delta, q_in, qstar_in) = self.specialized(&maps, q0)?;
        let dim = maps.space.dim();
        let kernel = delta.kernel_basis();
        let b = assemble(dim, &kernel, &q_in, &qstar_in);

        let coords = maps.space.coordinates(state)?;
        let mut rhs = Mat::zeros(dim, 1);
        for (i, c) in coords.iter().enumerate() {
            let v = c.eval_at(q0)?;
            rhs.set(i, 0, Scalar::from_rational(&v));
        }
        let sol = b.solve(&rhs).map_err(|_| FockError::Inconsistent)?;

        let h = kernel.len();
        let nq = q_in.ncols;
        let z = |lo: usize, hi: usize| -> Vec<Scalar> {
            (lo..hi).map(|r| sol.particular.get(r, 0)).collect()
        };
        let piece = |m: &Mat, zv: &[Scalar]| -> NCPoly {
            if zv.is_empty() {
                return NCPoly::zero();
            }
            maps.space.from_coordinates(&m.mul_vec(zv))
        };
        let mut hk = Mat::zeros(dim, h);
        for (j, v) in kernel.iter().enumerate() {
            for (i, c) in v.iter().enumerate() {
                if !c.is_zero() {
                    hk.set(i, j, c.clone());
                }
            }
        }
        let ranks = RankSummary {
            t_degree,
            w_degree,
            dim,
            kernel_dim: h,
            rank_q_in: q_in.rank(),
            rank_qstar_in: qstar_in.rank(),
            span: b.rank(),
        };
        Ok(HodgeDecomposition {
            harmonic: piece(&hk, &z(0, h)),
            q_exact: piece(&q_in, &z(h, h + nq)),
            qstar_exact: piece(&qstar_in, &z(h + nq, h + nq + qstar_in.ncols)),
            ranks,
        })
    }
}

/// Column concatenation [kernel | q_in | qstar_in].
fn assemble(dim: usize, kernel: &[Vec<Scalar>], q_in: &Mat, qstar_in: &Mat) -> Mat {
    let mut b = Mat::zeros(dim, kernel.len() + q_in.ncols + qstar_in.ncols);
    for (j, v) in kernel.iter().enumerate() {
        for (i, c) in v.iter().enumerate() {
            if !c.is_zero() {
                b.set(i, j, c.clone());
            }
        }
    }
    for r in 0..dim {
        for (&c, v) in q_in.row(r) {
            b.set(r, kernel.len() + c, v.clone());
        }
        for (&c, v) in qstar_in.row(r) {
            b.set(r, kernel.len() + q_in.ncols + c, v.clone());
        }
    }
    b
}
