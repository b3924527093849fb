//! Energy-focusing transmission design for wireless power transfer with
//! dynamic metasurface antennas (DMAs) in the radiating near-field.
//!
//! The crate is organised bottom-up:
//!
//! * [`scenario`] – array geometry, receivers and field-region classification.
//! * [`propagation`] – near-field channel vectors and the in-waveguide
//!   propagation matrix.
//! * [`dma`] – Lorentzian-constrained element weights, the block-diagonal
//!   weight operator and the reduced quadratic form used for the weight update.
//! * [`model`] – channels and waveguide of a scenario bundled for the solvers.
//! * [`precoder`] – closed-form digital precoder from the dominant eigenvector
//!   of the energy matrix.
//! * [`manifold`] – Riemannian conjugate gradient over a product of unit circles.
//! * [`solver`] – alternating optimisation of precoder and DMA weights.
//! * [`field`] – received-power evaluation over planar grids.
//! * [`cli`] – the `dma-wpt` command-line front end.
//!
//! All element-indexed vectors use microstrip-major ordering: element `l` of
//! microstrip `i` sits at flat index `i * n_e + l` (both zero-based).

pub mod cli;
pub mod dma;
pub mod error;
pub mod field;
pub mod linalg;
pub mod manifold;
pub mod model;
pub mod precoder;
pub mod propagation;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use num_complex::Complex64;
