//! Reverse-mode differentiation over dense row-major `f64` matrices.
//!
//! A [`Graph`] is a tape: every operation appends a node holding its value and
//! the operands it was computed from, so parents always precede children.
//! [`Graph::backward`] walks the tape in reverse from a scalar loss and returns
//! one gradient per entry of the [`ParamStore`] (zeros for parameters the
//! graph never touched).
//!
//! ```
//! use polysrl::autodiff::{Graph, ParamStore, Tensor};
//!
//! let mut store = ParamStore::new();
//! let x = store.add("x", Tensor::scalar(3.0)).unwrap();
//! let mut g = Graph::new();
//! let xv = g.param(&store, x);
//! let sq = g.mul(xv, xv).unwrap();
//! let loss = g.sum(sq);
//! let grads = g.backward(loss, &store).unwrap();
//! assert_eq!(grads.get(x).data(), &[6.0]);
//! ```

mod check;
mod graph;
mod tensor;

pub use check::{grad_check, grad_check_with, relative_error, GradCheck, Stencil, FIVE_POINT_EPS};
pub use graph::{Gradients, Graph, ParamId, ParamStore, Var, MASK_VALUE};
pub use tensor::Tensor;
