//! Hermitian-symplectic flow on flat complex tori and the exponential-type
//! volume along it.
//!
//! `forms` is pointwise algebra, `torus` lifts it to spectral fields, `flow`
//! integrates the evolution and `volume` analyses it. The guide in `book/`
//! walks through each layer.

pub mod error;
pub mod flow;
pub mod forms;
mod linalg;
pub mod torus;
pub mod volume;

pub use error::{Error, Result};

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/forms.md")]
    mod forms {}
    #[doc = include_str!("../../../book/src/torus.md")]
    mod torus {}
    #[doc = include_str!("../../../book/src/flow.md")]
    mod flow {}
    #[doc = include_str!("../../../book/src/volume.md")]
    mod volume {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
