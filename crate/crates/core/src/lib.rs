//! Reduced Hamiltonian model of a sine-Gordon kink crossing a point defect.

pub mod cli;
pub mod closedforms;
pub mod config;
pub mod criticality;
pub mod dd;
pub mod error;
pub mod integrator;
pub mod manifolds;
pub mod melnikov;
pub mod model;
pub mod real;
mod tableau;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/integrator.md")]
    mod integrator {}
    #[doc = include_str!("../../../book/src/manifolds.md")]
    mod manifolds {}
    #[doc = include_str!("../../../book/src/melnikov.md")]
    mod melnikov {}
    #[doc = include_str!("../../../book/src/criticality.md")]
    mod criticality {}
    #[doc = include_str!("../../../book/src/precision.md")]
    mod precision {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
