//! Melnikov analysis and limit-cycle counting for piecewise-smooth Abel
//! differential equations.
//!
//! The crate studies scalar periodic equations
//!
//! ```text
//! dx/dtheta = A(theta) x^p + B(theta) x^q
//! ```
//!
//! whose trigonometric-polynomial coefficients switch once per period, at
//! `theta1`. It provides:
//!
//! * exact kernel integrals `int cos(k theta) |1 + rho - cos(theta)|^beta`
//!   and friends, their interval identities and `rho`-derivatives
//!   ([`quad`]);
//! * the first- and second-order displacement coefficients of the return
//!   map, both by direct nested quadrature and as structured kernel
//!   combinations ([`melnikov`]);
//! * extended-Chebyshev verification of the function families those
//!   combinations live in, plus certified zero counting ([`chebyshev`]);
//! * synthesis of equations whose displacement coefficients attain the
//!   maximal zero counts, realizing the sharp bounds ([`synthesis`]);
//! * direct numerical integration of the flow as an independent check
//!   ([`flow`]).

pub mod chebyshev;
mod dd;
pub mod equation;
mod error;
pub mod flow;
pub mod melnikov;
pub mod quad;
pub mod synthesis;

pub use error::{Error, Result};
