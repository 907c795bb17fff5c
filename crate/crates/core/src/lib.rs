pub mod channel;
pub mod constellation;
pub mod error;
pub mod fmt;
pub mod liegroup;
pub mod metrics;
pub mod optimize;

pub use error::{Error, Result};

/// Library version, recorded in CLI provenance blocks.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

// The guide's snippets run as doctests.
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/constellations.md")]
mod book_constellations {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cutoff-rate.md")]
mod book_cutoff_rate {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/rotation-family.md")]
mod book_rotation_family {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/geodesic-descent.md")]
mod book_geodesic_descent {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/local-diversity.md")]
mod book_local_diversity {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/nuqam.md")]
mod book_nuqam {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/simulation.md")]
mod book_simulation {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}
