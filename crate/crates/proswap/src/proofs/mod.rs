//! Non-interactive zero-knowledge proofs.
//!
//! All proofs are sigma protocols made non-interactive with Fiat-Shamir over
//! a caller-supplied [`Transcript`] context. Provers fork the context, absorb
//! the statement and their first-round commitments, and derive the challenge;
//! verifiers replay the identical absorptions. A proof therefore only
//! verifies under the context it was produced for.
//!
//! Proof objects serialize to a tag byte followed by their fields in fixed
//! order, with element counts for the variable-length parts. Serialization is
//! canonical: decoding accepts exactly the bytes encoding produces.

pub mod batched;
pub mod cut_choose;
pub mod or_guess;
pub mod schnorr;

pub use batched::{BatchedYwinProof, DualBaseEqProof, HiddenBaseProof, OrWfProof};
pub use cut_choose::{CutChooseProof, OpenedInstance};
pub use or_guess::OrProof;
pub use schnorr::{DlProof, EncProof, OpenProof};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProofError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("witness does not satisfy the statement: {0}")]
    InvalidWitness(&'static str),
}

/// Minimal canonical reader/writer for proof encodings.
pub(crate) mod wire {
    use crate::group::{point_from_bytes, point_to_bytes, scalar_from_bytes, scalar_to_bytes, Point, Scalar};

    pub fn put_point(out: &mut Vec<u8>, p: &Point) {
        out.extend_from_slice(&point_to_bytes(p));
    }

    pub fn put_scalar(out: &mut Vec<u8>, s: &Scalar) {
        out.extend_from_slice(&scalar_to_bytes(s));
    }

    pub fn put_u32(out: &mut Vec<u8>, v: u32) {
        out.extend_from_slice(&v.to_be_bytes());
    }

    pub struct Reader<'a> {
        bytes: &'a [u8],
        pos: usize,
    }

    impl<'a> Reader<'a> {
        pub fn new(bytes: &'a [u8]) -> Self {
            Reader { bytes, pos: 0 }
        }

        fn take(&mut self, n: usize) -> Option<&'a [u8]> {
            let end = self.pos.checked_add(n)?;
            if end > self.bytes.len() {
                return None;
            }
            let slice = &self.bytes[self.pos..end];
            self.pos = end;
            Some(slice)
        }

        pub fn u8(&mut self) -> Option<u8> {
            Some(self.take(1)?[0])
        }

        pub fn u32(&mut self) -> Option<u32> {
            Some(u32::from_be_bytes(self.take(4)?.try_into().ok()?))
        }

        pub fn point(&mut self) -> Option<Point> {
            point_from_bytes(self.take(32)?)
        }

        pub fn scalar(&mut self) -> Option<Scalar> {
            scalar_from_bytes(self.take(32)?)
        }

        /// Decoding must consume every byte; trailing garbage is rejected.
        pub fn finish(&self) -> Option<()> {
            (self.pos == self.bytes.len()).then_some(())
        }
    }
}
