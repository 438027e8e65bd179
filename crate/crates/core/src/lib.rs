//! Exact symbolic engine for quantum Lie algebras and the BRST/anti-BRST
//! calculus on the quantum group GL_q(N).
//!
//! Everything is computed over the field Q(q) of rational functions in the
//! deformation parameter; there is no floating point anywhere in the core.
//! The main entry points are:
//!
//! * [`qfield::Scalar`] — exact arithmetic in Q(q),
//! * [`tensor`] — sparse multi-leg tensors and exact linear solving,
//! * [`qla`] — quantum Lie algebras and their axiom suite,
//! * [`wedge`] — antisymmetrizer towers and heights,
//! * [`brst`] — the X-tensor recurrence and the abstract BRST operator,
//! * [`ncring`] — the noncommutative normal-ordering engine,
//! * [`glq`] — the GL_q(N) differential algebra and its identity suite,
//! * [`fock`] — the polynomial state space and the Hodge decomposition.

pub mod qfield;
pub mod tensor;
pub mod rmat;
pub mod qla;
pub mod wedge;
pub mod brst;
pub mod ncring;
pub mod glq;
pub mod fock;

pub use qfield::Scalar;
pub use tensor::{Expr, Mat, Tensor};
