//! Exhaustive analog beam sweeping for phased-array links.
//!
//! The crate models a pair of uniform linear arrays with quantized phase
//! shifters in a rectangular room, sweeps every precoder/combiner pair of two
//! codebooks, and scores each pair by the error vector magnitude of a
//! simulated BPSK link.
//!
//! ```
//! use beamsweep::array::ArrayGeometry;
//! use beamsweep::channel::{build_channel, ChannelParams};
//! use beamsweep::codebook::default_codebook;
//! use beamsweep::campaign::oracle_search;
//!
//! let geometry = ArrayGeometry::default();
//! let codebook = default_codebook(&geometry, 2).unwrap();
//! let channel = build_channel(&ChannelParams::default()).unwrap();
//! let best = oracle_search(&codebook, &codebook, &channel).unwrap();
//! assert!(best.best_tx_index < codebook.len());
//! ```
//!
//! | module | contents |
//! |---|---|
//! | [`array`] | steering vectors, phase quantization, beamforming gain |
//! | [`channel`] | room geometry and multipath channel matrices |
//! | [`codebook`] | beamsteering codebooks and their text format |
//! | [`baseband`] | BPSK streams, noise and EVM |
//! | [`protocol`] | the sweep handshake and its transports |
//! | [`campaign`] | configuration, search and CSV output |

pub mod array;
pub mod baseband;
pub mod campaign;
pub mod channel;
pub mod codebook;
pub mod protocol;

pub use array::{ArrayGeometry, PhaseWeights, SteeringAngle};
pub use baseband::{compute_evm, EvmConvention, EvmReport};
pub use campaign::{oracle_search, run_campaign, CampaignConfig, CampaignResult, Mode};
pub use channel::{build_channel, ChannelMatrix, ChannelParams, RoomGeometry};
pub use codebook::{generate_beamsteering_codebook, Codebook};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/arrays.md")]
    mod arrays {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/codebooks.md")]
    mod codebooks {}
    #[doc = include_str!("../../../book/src/evm.md")]
    mod evm {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/campaigns.md")]
    mod campaigns {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
