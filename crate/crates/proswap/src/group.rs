//! Prime-order group layer.
//!
//! Everything above this module works with an abstract prime-order group; the
//! concrete instantiation is ristretto255. Encodings are fixed here once and
//! reused by every protocol: group elements serialize as 32-byte canonical
//! compressed encodings, scalars as 32-byte big-endian integers below the
//! group order. Decoders reject anything non-canonical.

use curve25519_dalek::ristretto::CompressedRistretto;
pub use curve25519_dalek::ristretto::RistrettoPoint as Point;
pub use curve25519_dalek::scalar::Scalar;
use curve25519_dalek::traits::Identity;
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha512};
use std::sync::OnceLock;

/// Identifier of the concrete group backing this crate.
pub const GROUP_ID: &str = "ristretto255";

/// Byte length of an encoded group element or scalar.
pub const ELEMENT_LEN: usize = 32;

/// The fixed generator `g`.
pub fn generator() -> Point {
    curve25519_dalek::constants::RISTRETTO_BASEPOINT_POINT
}

/// `g^x` via the precomputed basepoint table.
pub fn base_mul(x: &Scalar) -> Point {
    Point::mul_base(x)
}

/// The group identity element.
pub fn identity() -> Point {
    Point::identity()
}

/// A second generator `u` with unknown discrete log relative to `g`,
/// derived by hashing a fixed tag to the group.
pub fn second_generator() -> Point {
    static U: OnceLock<Point> = OnceLock::new();
    *U.get_or_init(|| hash_to_group(b"proswap/u"))
}

/// Canonical 32-byte encoding of a group element.
pub fn point_to_bytes(p: &Point) -> [u8; ELEMENT_LEN] {
    p.compress().to_bytes()
}

/// Decodes a canonical group element encoding. Returns `None` for wrong
/// lengths and non-canonical or invalid encodings.
pub fn point_from_bytes(bytes: &[u8]) -> Option<Point> {
    if bytes.len() != ELEMENT_LEN {
        return None;
    }
    CompressedRistretto::from_slice(bytes).ok()?.decompress()
}

/// Canonical 32-byte big-endian encoding of a scalar.
pub fn scalar_to_bytes(s: &Scalar) -> [u8; ELEMENT_LEN] {
    let mut out = s.to_bytes();
    out.reverse();
    out
}

/// Decodes a big-endian scalar encoding, rejecting values at or above the
/// group order.
pub fn scalar_from_bytes(bytes: &[u8]) -> Option<Scalar> {
    if bytes.len() != ELEMENT_LEN {
        return None;
    }
    let mut le = [0u8; ELEMENT_LEN];
    le.copy_from_slice(bytes);
    le.reverse();
    Option::from(Scalar::from_canonical_bytes(le))
}

/// Hashes a domain tag plus message parts to a scalar. Each part is length
/// prefixed so distinct part boundaries can never collide.
pub fn hash_to_scalar(domain: &[u8], parts: &[&[u8]]) -> Scalar {
    let mut h = Sha512::new();
    h.update(b"proswap/h2s");
    h.update((domain.len() as u32).to_be_bytes());
    h.update(domain);
    for part in parts {
        h.update((part.len() as u32).to_be_bytes());
        h.update(part);
    }
    Scalar::from_bytes_mod_order_wide(&h.finalize().into())
}

/// Deterministically maps arbitrary bytes to a group element. Never returns
/// the identity: in the (cryptographically unreachable) case the uniform map
/// lands there, a counter byte is appended and the input re-hashed.
pub fn hash_to_group(input: &[u8]) -> Point {
    let mut ctr: u8 = 0;
    loop {
        let mut h = Sha512::new();
        h.update(b"proswap/h2g");
        h.update((input.len() as u32).to_be_bytes());
        h.update(input);
        if ctr > 0 {
            h.update([ctr]);
        }
        let p = Point::from_uniform_bytes(&h.finalize().into());
        if p != Point::identity() {
            return p;
        }
        ctr = ctr.checked_add(1).expect("hash_to_group exhausted retries");
    }
}

/// Samples a uniformly random nonzero scalar.
pub fn random_nonzero_scalar<R: RngCore + CryptoRng>(rng: &mut R) -> Scalar {
    loop {
        let s = Scalar::random(rng);
        if s != Scalar::ZERO {
            return s;
        }
    }
}
