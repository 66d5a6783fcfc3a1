//! Desk-scale laboratory for states on CCR (Weyl) algebras.
//!
//! * [`hilbert`]: mode-indexed vectors, the symplectic form, windowed maps.
//! * [`weyl`]: exact symbolic algebra of Weyl polynomials.
//! * [`states`]: closed-form characteristic functionals.
//! * [`positivity`]: moment matrices and violation search.
//! * [`fock`]: truncated Fock-space numerics.
//! * [`tomography`]: recovery of the mixing measure over quasi-free states.
//! * [`dsl`] and [`cli`]: expression language and command-line front end.

pub mod cli;
pub mod dsl;
pub mod error;
pub mod fock;
pub mod hilbert;
pub mod positivity;
pub mod states;
pub mod tomography;
pub mod weyl;

pub use error::{Error, Result};
pub use hilbert::{apply_linear, build_g_n, inner_product, symplectic_form, CVector, FiniteUnitary, MapKind};
