pub mod analysis;
pub mod cli;
pub mod config;
pub mod contact;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod jump;
pub mod md;
pub mod ou;
pub mod record;
pub mod gibbs;
pub mod rng;
pub mod scattering;
pub mod vec2;

pub use error::{Error, Result};
pub use vec2::Vec2;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/scattering.md")]
    mod scattering {}
    #[doc = include_str!("../../../book/src/md.md")]
    mod md {}
    #[doc = include_str!("../../../book/src/jump.md")]
    mod jump {}
    #[doc = include_str!("../../../book/src/ou.md")]
    mod ou {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
