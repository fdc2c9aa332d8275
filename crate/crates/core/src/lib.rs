pub mod data;
pub mod dsp;
pub mod encoders;
pub mod error;
pub mod fusion;
pub mod graph;
pub mod losses;
pub mod nn;
pub mod tensor;
pub mod text;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Float, Tensor};

/// The guide in `book/`, compiled so every snippet runs as a doctest.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/tensors.md")]
    pub mod tensors {}
    #[doc = include_str!("../../../book/src/audio.md")]
    pub mod audio {}
    #[doc = include_str!("../../../book/src/fusion.md")]
    pub mod fusion {}
    #[doc = include_str!("../../../book/src/genre-graph.md")]
    pub mod genre_graph {}
    #[doc = include_str!("../../../book/src/losses.md")]
    pub mod losses {}
    #[doc = include_str!("../../../book/src/training.md")]
    pub mod training {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
    #[doc = include_str!("../../../book/src/formats.md")]
    pub mod formats {}
}
