//! Bigram language models, looped unit networks and token-passing Viterbi
//! decoding.

mod bigram;
mod network;
mod viterbi;

pub use bigram::{estimate_bigram, BigramModel, DEFAULT_DISCOUNT, SENT_END, SENT_START};
pub use network::{build_network, NetArc, NetworkOptions, UnitNetwork};
pub use viterbi::{decode, DecodeParams, DecodeResult, PenaltyBase};
