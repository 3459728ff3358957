//! Fiat-Shamir transcripts.
//!
//! A transcript is a label plus an ordered sequence of tagged, length
//! prefixed absorptions. Challenges are pure functions of the accumulated
//! bytes, so prover and verifier derive identical values by replaying the
//! same absorptions in the same order.

use crate::group::{hash_to_scalar, point_to_bytes, scalar_to_bytes, Point, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha512};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TranscriptError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

#[derive(Clone, Debug)]
pub struct Transcript {
    bytes: Vec<u8>,
}

impl Transcript {
    pub fn new(label: &[u8]) -> Self {
        let mut bytes = Vec::with_capacity(64 + label.len());
        bytes.extend_from_slice(b"proswap/transcript");
        bytes.extend_from_slice(&(label.len() as u32).to_be_bytes());
        bytes.extend_from_slice(label);
        Transcript { bytes }
    }

    /// Appends a tagged, length prefixed byte string.
    pub fn absorb(&mut self, tag: &[u8], data: &[u8]) {
        self.bytes.extend_from_slice(&(tag.len() as u32).to_be_bytes());
        self.bytes.extend_from_slice(tag);
        self.bytes.extend_from_slice(&(data.len() as u32).to_be_bytes());
        self.bytes.extend_from_slice(data);
    }

    pub fn absorb_point(&mut self, tag: &[u8], p: &Point) {
        self.absorb(tag, &point_to_bytes(p));
    }

    pub fn absorb_scalar(&mut self, tag: &[u8], s: &Scalar) {
        self.absorb(tag, &scalar_to_bytes(s));
    }

    pub fn absorb_u64(&mut self, tag: &[u8], v: u64) {
        self.absorb(tag, &v.to_be_bytes());
    }

    /// A copy of this transcript with a branch tag absorbed, for deriving
    /// sub-contexts that stay bound to everything absorbed so far.
    pub fn fork(&self, tag: &[u8]) -> Transcript {
        let mut t = self.clone();
        t.absorb(b"fork", tag);
        t
    }

    /// The Fiat-Shamir challenge for the current transcript state.
    pub fn challenge(&self) -> Scalar {
        hash_to_scalar(b"fs-challenge", &[&self.bytes])
    }

    /// A deterministic vector of `count` challenge scalars.
    pub fn challenge_scalars(&self, count: usize) -> Vec<Scalar> {
        (0..count)
            .map(|i| {
                hash_to_scalar(b"fs-vector", &[&self.bytes, &(i as u32).to_be_bytes()])
            })
            .collect()
    }

    /// Derives a uniformly distributed k-subset of the 1-based index range
    /// `{1, ..., n}`, returned sorted ascending.
    pub fn subset(&self, n: usize, k: usize) -> Result<Vec<usize>, TranscriptError> {
        if k > n {
            return Err(TranscriptError::InvalidParameter(
                "subset size exceeds index range",
            ));
        }
        let mut h = Sha512::new();
        h.update(b"proswap/fs-subset");
        h.update(&self.bytes);
        h.update((n as u64).to_be_bytes());
        h.update((k as u64).to_be_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest[..32]);
        let mut rng = ChaCha20Rng::from_seed(seed);

        // Partial Fisher-Yates: after k steps the prefix is a uniform
        // k-permutation, so the chosen set is a uniform k-subset.
        let mut indices: Vec<usize> = (1..=n).collect();
        for i in 0..k {
            let j = rng.gen_range(i..n);
            indices.swap(i, j);
        }
        let mut chosen = indices[..k].to_vec();
        chosen.sort_unstable();
        Ok(chosen)
    }
}
