//! Quantum Lie algebras: a pair of tensors (sigma, C) subject to the
//! Yang-Baxter equation, a deformed Jacobi identity and two mixed
//! sigma-C identities, plus the projector condition P_(1) C = 0.
//!
//! Index conventions follow the bra-ket matrix notation: upper indices are
//! outcoming (bras), lower indices incoming (kets), and juxtaposition
//! contracts the left factor's upper indices with the right factor's lower
//! indices. That is exactly what [`Expr::mul`] does.

use crate::qfield::Scalar;
use crate::rmat;
use crate::tensor::{unflatten, Expr, Leg, LegKind, Mat, Tensor, TensorError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantumLieAlgebra {
    pub n_gen: usize,
    /// Braiding on generator pairs: legs [in, in, out, out], each of
    /// dimension n_gen. Entry (a, b, c, d) is sigma^{cd}_{ab}.
    pub sigma: Tensor,
    /// Structure constants: legs [in, in, out]. Entry (a, b, e) is C^e_{ab}.
    #[serde(rename = "C")]
    pub c: Tensor,
}

impl QuantumLieAlgebra {
    pub fn new(n_gen: usize, sigma: Tensor, c: Tensor) -> Self {
        assert_eq!(sigma.legs().len(), 4);
        assert_eq!(c.legs().len(), 3);
        QuantumLieAlgebra { n_gen, sigma, c }
    }

    /// sigma acting on labels (l1, l2), l1 < l2.
    pub fn sigma_expr(&self, l1: u32, l2: u32) -> Expr {
        assert!(l1 < l2);
        self.sigma.to_expr(&[l1, l2, l1, l2])
    }

    /// C with incoming legs (l1, l2) and outcoming leg `out`.
    pub fn c_expr(&self, l1: u32, l2: u32, out: u32) -> Expr {
        assert!(l1 < l2);
        self.c.to_expr(&[l1, l2, out])
    }

    pub fn check_axioms(&self) -> AxiomReport {
        let n = self.n_gen;
        let s12 = self.sigma_expr(1, 2);
        let s23 = self.sigma_expr(2, 3);
        let s13 = self.sigma_expr(1, 3);
        // C^{<1|}_{|12>}, C^{<3|}_{|23>}, C^{<4|}_{|13>}
        let c1 = self.c_expr(1, 2, 1);
        let c3 = self.c_expr(2, 3, 3);
        let c4 = self.c_expr(1, 3, 4);

        let yang_baxter = s12
            .mul(&s23)
            .mul(&s12)
            .sub(&s23.mul(&s12).mul(&s23));

        // C^{<1|} C^{<4|} = sigma_23 C^{<1|} C^{<4|} + C^{<3|} C^{<4|}
        let jacobi = c1
            .mul(&c4)
            .sub(&s23.mul(&c1).mul(&c4))
            .sub(&c3.mul(&c4));

        // C^{<1|} sigma_13 = sigma_23 sigma_12 C^{<3|}
        let mixed = c1.mul(&s13).sub(&s23.mul(&s12).mul(&c3));

        // (sigma_23 C^{<1|} + C^{<3|}) sigma_13 = sigma_12 (same bracket)
        let bracket = s23.mul(&c1).add(&c3);
        let mixed_a = bracket.mul(&s13).sub(&s12.mul(&bracket));

        let p1c = self.p1().mul(&self.c_expr(1, 2, 3));

        // only the difference of the two mixed identities enters the
        // quadratic part of the cubic-reordering consistency identity
        let combined = bracket
            .mul(&s13)
            .sub(&s12.mul(&bracket))
            .sub(&c1.mul(&s13).sub(&s23.mul(&s12).mul(&c3)));
        let _ = n;

        AxiomReport {
            yang_baxter: Tensor::from_expr(&yang_baxter),
            jacobi: Tensor::from_expr(&jacobi),
            mixed: Tensor::from_expr(&mixed),
            mixed_a: Tensor::from_expr(&mixed_a),
            p1c: Tensor::from_expr(&p1c),
            combined: Tensor::from_expr(&combined),
        }
    }

    /// Projector onto the eigenvalue-1 eigenspace of sigma, computed as the
    /// Fitting projector of (sigma - 1): kernel of the stabilized power
    /// along its image. For diagonalizable sigma this is the plain
    /// eigenprojector.
    pub fn p1(&self) -> Expr {
        let n = self.n_gen;
        let dim = n * n;
        let m = self.sigma_expr(1, 2).to_mat();
        let shifted = m.sub(&Mat::identity(dim));
        let mut pw = Mat::identity(dim);
        for _ in 0..dim {
            pw = pw.mul(&shifted);
        }
        let kernel = pw.kernel_basis();
        let (col_basis, _) = pw.rank_factor();
        let k = kernel.len();
        assert!(k > 0, "sigma has no eigenvalue 1");
        // B = [kernel | image] is invertible; P = [kernel | 0] B^{-1}
        let mut b = Mat::zeros(dim, dim);
        for (j, v) in kernel.iter().enumerate() {
            for (i, x) in v.iter().enumerate() {
                if !x.is_zero() {
                    b.set(i, j, x.clone());
                }
            }
        }
        for j in 0..dim - k {
            for i in 0..dim {
                let v = col_basis.get(i, j);
                if !v.is_zero() {
                    b.set(i, k + j, v);
                }
            }
        }
        let binv = b
            .solve(&Mat::identity(dim))
            .expect("Fitting basis must be invertible")
            .particular;
        let mut kpart = Mat::zeros(dim, dim);
        for (j, v) in kernel.iter().enumerate() {
            for (i, x) in v.iter().enumerate() {
                if !x.is_zero() {
                    kpart.set(i, j, x.clone());
                }
            }
        }
        let mut ext = Mat::zeros(dim, dim);
        for r in 0..dim {
            for c in 0..k {
                let v = kpart.get(r, c);
                if !v.is_zero() {
                    ext.set(r, c, v);
                }
            }
        }
        let p = ext.mul(&binv);
        let mut e = Expr::zero(vec![(1, n), (2, n)], vec![(1, n), (2, n)]);
        for r in 0..dim {
            for c in 0..dim {
                let v = p.get(r, c);
                if !v.is_zero() {
                    e.set(unflatten(r, &[n, n]), unflatten(c, &[n, n]), v);
                }
            }
        }
        e
    }

    /// Encode (sigma, C) into one braiding on the extended index set
    /// {0} + generators: sigma on the generator block, C on the block with
    /// upper pair (0, j), and the index 0 braids past everything by a plain
    /// swap (the extra index stands for the unit, which commutes). All
    /// other components are zero.
    pub fn build_extended_s(&self) -> Tensor {
        let n = self.n_gen;
        let d = n + 1;
        let mut e = Expr::zero(vec![(1, d), (2, d)], vec![(1, d), (2, d)]);
        for (idx, v) in self.sigma.entries() {
            // lower (a,b), upper (c,d) shift by one
            e.set(
                vec![idx[0] + 1, idx[1] + 1],
                vec![idx[2] + 1, idx[3] + 1],
                v.clone(),
            );
        }
        for (idx, v) in self.c.entries() {
            // upper (0, j), lower (k, l)
            e.set(vec![idx[0] + 1, idx[1] + 1], vec![0, idx[2] + 1], v.clone());
        }
        for a in 0..d as u16 {
            // swap blocks: lower (0, A) -> upper (A, 0) and vice versa
            e.set(vec![0, a], vec![a, 0], Scalar::one());
            if a != 0 {
                e.set(vec![a, 0], vec![0, a], Scalar::one());
            }
        }
        Tensor::from_expr(&e)
    }

    /// Residual of the Yang-Baxter equation for the extended S-matrix.
    pub fn extended_s_ybe_residual(&self) -> Tensor {
        let s = self.build_extended_s();
        let s12 = s.to_expr(&[1, 2, 1, 2]);
        let s23 = s12.relabel(|l| l + 1);
        let res = s12
            .mul(&s23)
            .mul(&s12)
            .sub(&s23.mul(&s12).mul(&s23));
        Tensor::from_expr(&res)
    }
}

/// Exact residual tensors for the axiom suite; all must be zero for a
/// valid instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxiomReport {
    pub yang_baxter: Tensor,
    pub jacobi: Tensor,
    pub mixed: Tensor,
    pub mixed_a: Tensor,
    pub p1c: Tensor,
    pub combined: Tensor,
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        self.yang_baxter.is_zero()
            && self.jacobi.is_zero()
            && self.mixed.is_zero()
            && self.mixed_a.is_zero()
            && self.p1c.is_zero()
            && self.combined.is_zero()
    }

    pub fn residual_counts(&self) -> Vec<(&'static str, usize)> {
        vec![
            ("yang_baxter", self.yang_baxter.entries().count()),
            ("jacobi", self.jacobi.entries().count()),
            ("mixed", self.mixed.entries().count()),
            ("mixed_a", self.mixed_a.entries().count()),
            ("p1c", self.p1c.entries().count()),
            ("combined", self.combined.entries().count()),
        ]
    }
}

/// Words in the entries of one noncommuting matrix generator, with Scalar
/// coefficients. Used to expand matrix relations symbolically before
/// extracting (sigma, C) by linear algebra.
#[derive(Debug, Clone, Default, PartialEq)]
struct NcEntry(BTreeMap<Vec<u16>, Scalar>);

impl NcEntry {
    fn scalar(s: Scalar) -> Self {
        let mut m = BTreeMap::new();
        if !s.is_zero() {
            m.insert(Vec::new(), s);
        }
        NcEntry(m)
    }

    fn letter(g: u16) -> Self {
        let mut m = BTreeMap::new();
        m.insert(vec![g], Scalar::one());
        NcEntry(m)
    }

    fn add_assign(&mut self, other: &NcEntry) {
        for (w, c) in &other.0 {
            let cur = match self.0.get(w) {
                Some(x) => x + c,
                None => c.clone(),
            };
            if cur.is_zero() {
                self.0.remove(w);
            } else {
                self.0.insert(w.clone(), cur);
            }
        }
    }

    fn mul(&self, other: &NcEntry) -> NcEntry {
        let mut out: BTreeMap<Vec<u16>, Scalar> = BTreeMap::new();
        for (w1, c1) in &self.0 {
            for (w2, c2) in &other.0 {
                let mut w = w1.clone();
                w.extend_from_slice(w2);
                let c = c1 * c2;
                if c.is_zero() {
                    continue;
                }
                let cur = match out.get(&w) {
                    Some(x) => x + &c,
                    None => c,
                };
                if cur.is_zero() {
                    out.remove(&w);
                } else {
                    out.insert(w, cur);
                }
            }
        }
        NcEntry(out)
    }

    fn neg(&self) -> NcEntry {
        NcEntry(self.0.iter().map(|(w, c)| (w.clone(), -c)).collect())
    }
}

/// Square matrix with noncommutative-word entries, rows = lower (incoming)
/// index, columns = upper (outcoming) index, product mirroring Expr::mul.
struct NcMat {
    dim: usize,
    e: Vec<Vec<NcEntry>>,
}

impl NcMat {
    fn from_expr(x: &Expr) -> NcMat {
        let m = x.to_mat();
        assert_eq!(m.nrows, m.ncols);
        let dim = m.nrows;
        let mut e = vec![vec![NcEntry::default(); dim]; dim];
        for r in 0..dim {
            for (&c, v) in m.row(r) {
                e[r][c] = NcEntry::scalar(v.clone());
            }
        }
        NcMat { dim, e }
    }

    /// The generator matrix acting on the second of two spaces of size n:
    /// entry with upper pair (u1, u2), lower pair (l1, l2) is
    /// delta^{u1}_{l1} X^{u2}_{l2}, letter id u2 * n + l2.
    fn x2(n: usize) -> NcMat {
        let dim = n * n;
        let mut e = vec![vec![NcEntry::default(); dim]; dim];
        for u1 in 0..n {
            for u2 in 0..n {
                for l2 in 0..n {
                    let up = u1 * n + u2;
                    let lo = u1 * n + l2;
                    e[lo][up] = NcEntry::letter((u2 * n + l2) as u16);
                }
            }
        }
        NcMat { dim, e }
    }

    fn mul(&self, other: &NcMat) -> NcMat {
        assert_eq!(self.dim, other.dim);
        let dim = self.dim;
        let mut e = vec![vec![NcEntry::default(); dim]; dim];
        for l in 0..dim {
            for u in 0..dim {
                let mut acc = NcEntry::default();
                for m in 0..dim {
                    if self.e[l][m].0.is_empty() || other.e[m][u].0.is_empty() {
                        continue;
                    }
                    acc.add_assign(&self.e[l][m].mul(&other.e[m][u]));
                }
                e[l][u] = acc;
            }
        }
        NcMat { dim, e }
    }

    fn sub(&self, other: &NcMat) -> NcMat {
        let dim = self.dim;
        let mut e = vec![vec![NcEntry::default(); dim]; dim];
        for l in 0..dim {
            for u in 0..dim {
                let mut acc = self.e[l][u].clone();
                acc.add_assign(&other.e[l][u].neg());
                e[l][u] = acc;
            }
        }
        NcMat { dim, e }
    }

    /// Coefficient matrix of words of the given length: rows are matrix
    /// components (lower * dim + upper), columns are flattened words.
    fn word_coeffs(&self, len: usize, n_letters: usize) -> Mat {
        let ncols = n_letters.pow(len as u32);
        let mut m = Mat::zeros(self.dim * self.dim, ncols);
        for l in 0..self.dim {
            for u in 0..self.dim {
                for (w, c) in &self.e[l][u].0 {
                    if w.len() != len {
                        continue;
                    }
                    let mut col = 0usize;
                    for &g in w {
                        col = col * n_letters + g as usize;
                    }
                    m.set(l * self.dim + u, col, c.clone());
                }
            }
        }
        m
    }

    fn max_word_len(&self) -> usize {
        self.e
            .iter()
            .flatten()
            .flat_map(|p| p.0.keys().map(|w| w.len()))
            .max()
            .unwrap_or(0)
    }
}

/// Extract the quantum Lie algebra on N^2 generators from the reflection
/// relation of the quantum-group vector fields: substituting L = 1 + lambda X
/// into L2 R L2 R = R L2 R L2 and using the Hecke condition gives
/// X2 R X2 R - R X2 R X2 = R X2 - X2 R, which is of the defining form.
pub fn derive_from_glq(n: usize) -> Result<QuantumLieAlgebra, TensorError> {
    assert!(n >= 1);
    let r = NcMat::from_expr(&rmat::rhat(n, 1, 2));
    let x2 = NcMat::x2(n);
    let n_gen = n * n;

    let quad_lhs = x2.mul(&r).mul(&x2).mul(&r);
    let quad_rhs = r.mul(&x2).mul(&r).mul(&x2);
    let lin = r.mul(&x2).sub(&x2.mul(&r));
    debug_assert_eq!(quad_lhs.max_word_len(), 2);

    let m_a = quad_lhs.word_coeffs(2, n_gen);
    let m_b = quad_rhs.word_coeffs(2, n_gen);
    let m_lin = lin.word_coeffs(1, n_gen);

    // chi_a chi_b = (M_A^{-1} M_B) chi chi + (M_A^{-1} M_lin) chi
    let sol_sigma = m_a.solve(&m_b)?;
    assert!(
        sol_sigma.kernel.is_empty(),
        "quadratic coefficient matrix must be invertible"
    );
    let sol_c = m_a.solve(&m_lin)?;

    let mut sigma = Tensor::new(vec![
        Leg { dim: n_gen, kind: LegKind::In },
        Leg { dim: n_gen, kind: LegKind::In },
        Leg { dim: n_gen, kind: LegKind::Out },
        Leg { dim: n_gen, kind: LegKind::Out },
    ]);
    for row in 0..n_gen * n_gen {
        for col in 0..n_gen * n_gen {
            let v = sol_sigma.particular.get(row, col);
            if !v.is_zero() {
                let ab = unflatten(row, &[n_gen, n_gen]);
                let cd = unflatten(col, &[n_gen, n_gen]);
                sigma.set(vec![ab[0], ab[1], cd[0], cd[1]], v);
            }
        }
    }
    let mut c = Tensor::new(vec![
        Leg { dim: n_gen, kind: LegKind::In },
        Leg { dim: n_gen, kind: LegKind::In },
        Leg { dim: n_gen, kind: LegKind::Out },
    ]);
    for row in 0..n_gen * n_gen {
        for col in 0..n_gen {
            let v = sol_c.particular.get(row, col);
            if !v.is_zero() {
                let ab = unflatten(row, &[n_gen, n_gen]);
                c.set(vec![ab[0], ab[1], col as u16], v);
            }
        }
    }
    Ok(QuantumLieAlgebra::new(n_gen, sigma, c))
}

fn permutation_sigma(n: usize) -> Tensor {
    let mut t = Tensor::new(vec![
        Leg { dim: n, kind: LegKind::In },
        Leg { dim: n, kind: LegKind::In },
        Leg { dim: n, kind: LegKind::Out },
        Leg { dim: n, kind: LegKind::Out },
    ]);
    for a in 0..n as u16 {
        for b in 0..n as u16 {
            t.set(vec![a, b, b, a], Scalar::one());
        }
    }
    t
}

fn super_permutation_sigma(parities: &[u8]) -> Tensor {
    let n = parities.len();
    let mut t = Tensor::new(vec![
        Leg { dim: n, kind: LegKind::In },
        Leg { dim: n, kind: LegKind::In },
        Leg { dim: n, kind: LegKind::Out },
        Leg { dim: n, kind: LegKind::Out },
    ]);
    for a in 0..n {
        for b in 0..n {
            // sigma^{mk}_{ij} = (-1)^{(m)(k)} delta^m_j delta^k_i
            let sign = if parities[b] & parities[a] & 1 == 1 {
                -&Scalar::one()
            } else {
                Scalar::one()
            };
            t.set(vec![a as u16, b as u16, b as u16, a as u16], sign);
        }
    }
    t
}

type M2 = [[Scalar; 2]; 2];

fn m2_mul(a: &M2, b: &M2) -> M2 {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut acc = Scalar::zero();
            for (k, row) in b.iter().enumerate() {
                acc += &(&a[i][k] * &row[j]);
            }
            acc
        })
    })
}

fn m2_sub(a: &M2, b: &M2) -> M2 {
    std::array::from_fn(|i| std::array::from_fn(|j| &a[i][j] - &b[i][j]))
}

fn e_mat(i: usize, j: usize) -> M2 {
    let mut m: M2 = std::array::from_fn(|_| std::array::from_fn(|_| Scalar::zero()));
    m[i][j] = Scalar::one();
    m
}

/// Classical sl(2): sigma is the permutation, C from commutators of the
/// defining representation e = E12, h = E11 - E22, f = E21. Computed from
/// 2x2 matrix algebra, independently of the axiom formulas.
pub fn sl2() -> QuantumLieAlgebra {
    let gens: [M2; 3] = [
        e_mat(0, 1),
        m2_sub(&e_mat(0, 0), &e_mat(1, 1)),
        e_mat(1, 0),
    ];
    let mut c = Tensor::new(vec![
        Leg { dim: 3, kind: LegKind::In },
        Leg { dim: 3, kind: LegKind::In },
        Leg { dim: 3, kind: LegKind::Out },
    ]);
    for i in 0..3 {
        for j in 0..3 {
            let comm = m2_sub(&m2_mul(&gens[i], &gens[j]), &m2_mul(&gens[j], &gens[i]));
            // traceless: coefficients of (e, h, f)
            let coeffs = [comm[0][1].clone(), comm[0][0].clone(), comm[1][0].clone()];
            for (k, v) in coeffs.into_iter().enumerate() {
                if !v.is_zero() {
                    c.set(vec![i as u16, j as u16, k as u16], v);
                }
            }
        }
    }
    QuantumLieAlgebra::new(3, permutation_sigma(3), c)
}

/// gl(1|1): generators E11, E12, E21, E22 with parities (0,1,1,0); sigma is
/// the super-permutation and C comes from supercommutators of elementary
/// 2x2 matrices.
pub fn gl11() -> QuantumLieAlgebra {
    let parities = [0u8, 1, 1, 0];
    let gens: [M2; 4] = [e_mat(0, 0), e_mat(0, 1), e_mat(1, 0), e_mat(1, 1)];
    let mut c = Tensor::new(vec![
        Leg { dim: 4, kind: LegKind::In },
        Leg { dim: 4, kind: LegKind::In },
        Leg { dim: 4, kind: LegKind::Out },
    ]);
    for i in 0..4 {
        for j in 0..4 {
            let mut second = m2_mul(&gens[j], &gens[i]);
            if parities[i] & parities[j] & 1 == 1 {
                second = std::array::from_fn(|a| std::array::from_fn(|b| -&second[a][b]));
            }
            let br = m2_sub(&m2_mul(&gens[i], &gens[j]), &second);
            // expand in the elementary-matrix basis E11, E12, E21, E22
            for (k, (a, b)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                let v = br[a][b].clone();
                if !v.is_zero() {
                    c.set(vec![i as u16, j as u16, k as u16], v);
                }
            }
        }
    }
    QuantumLieAlgebra::new(4, super_permutation_sigma(&parities), c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Sl2,
    Gl11,
    Glq,
}

impl std::str::FromStr for Model {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sl2" | "classical_lie" => Ok(Model::Sl2),
            "gl11" | "super_lie" => Ok(Model::Gl11),
            "glq" => Ok(Model::Glq),
            other => Err(format!("unknown model {:?}", other)),
        }
    }
}

/// Construct and axiom-check a library model; a failing axiom suite is an
/// error carrying the report.
pub fn model_library(model: Model, n: usize) -> Result<QuantumLieAlgebra, Box<AxiomReport>> {
    let qla = match model {
        Model::Sl2 => sl2(),
        Model::Gl11 => gl11(),
        Model::Glq => derive_from_glq(n).expect("glq extraction is always consistent"),
    };
    let report = qla.check_axioms();
    if report.all_pass() {
        Ok(qla)
    } else {
        Err(Box::new(report))
    }
}
