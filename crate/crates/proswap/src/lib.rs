//! Probabilistic atomic swaps over a simulated ledger.
//!
//! A dealer sells a lottery: the counterparty pays one coin and wins a pot of
//! `nu` coins with probability exactly `2^-ell`. The construction combines
//! Schnorr adaptor signatures, a blinded keyed hash evaluated obliviously, a
//! cut-and-choose well-formedness argument, and timelocked outputs on an
//! append-only ledger, so that neither side can bias the outcome or walk away
//! with the other's funds.
//!
//! Modules are layered bottom-up: [`group`] and [`transcript`] provide the
//! algebra, [`adaptor`] / [`elgamal`] / [`oprf`] / [`proofs`] the
//! cryptographic building blocks, [`twoparty`] the distributed key and
//! pre-signature sessions, [`ledger`] the chain simulation, and [`swap`] the
//! end-to-end protocol.

pub mod adaptor;
pub mod elgamal;
pub mod group;
pub mod ledger;
pub mod oprf;
pub mod proofs;
pub mod swap;
pub mod transcript;
pub mod twoparty;
