//! ElGamal encryption of group elements.
//!
//! Used to lock the blinded evaluation result under a key whose secret
//! doubles as an adaptor statement witness: the decryption key `z` for
//! `Z = g^z` is exactly what a completed pre-signature on the claim
//! transaction reveals.

use crate::group::{
    base_mul, point_from_bytes, point_to_bytes, random_nonzero_scalar, Point, Scalar,
};
use rand::{CryptoRng, RngCore};

/// `(c1, c2) = (g^alpha, Z^alpha * m)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ciphertext {
    pub c1: Point,
    pub c2: Point,
}

pub const CIPHERTEXT_LEN: usize = 64;

impl Ciphertext {
    pub fn to_bytes(&self) -> [u8; CIPHERTEXT_LEN] {
        let mut out = [0u8; CIPHERTEXT_LEN];
        out[..32].copy_from_slice(&point_to_bytes(&self.c1));
        out[32..].copy_from_slice(&point_to_bytes(&self.c2));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Ciphertext> {
        if bytes.len() != CIPHERTEXT_LEN {
            return None;
        }
        Some(Ciphertext {
            c1: point_from_bytes(&bytes[..32])?,
            c2: point_from_bytes(&bytes[32..])?,
        })
    }
}

/// Samples a keypair `(Z, z)` with `Z = g^z`, `z` nonzero.
pub fn eg_keygen<R: RngCore + CryptoRng>(rng: &mut R) -> (Point, Scalar) {
    let z = random_nonzero_scalar(rng);
    (base_mul(&z), z)
}

/// Encrypts a group element, returning the ciphertext and the encryption
/// randomness `alpha` (the caller proves statements about it).
pub fn eg_enc<R: RngCore + CryptoRng>(
    pk: &Point,
    msg: &Point,
    rng: &mut R,
) -> (Ciphertext, Scalar) {
    let alpha = random_nonzero_scalar(rng);
    let ct = Ciphertext { c1: base_mul(&alpha), c2: pk * alpha + msg };
    (ct, alpha)
}

/// `m = c2 / c1^z`.
pub fn eg_dec(sk: &Scalar, ct: &Ciphertext) -> Point {
    ct.c2 - ct.c1 * sk
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::hash_to_group;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn encryption_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let (pk, sk) = eg_keygen(&mut rng);
        let msg = hash_to_group(b"plaintext element");
        let (ct, _alpha) = eg_enc(&pk, &msg, &mut rng);
        assert_eq!(eg_dec(&sk, &ct), msg);
    }

    #[test]
    fn wrong_key_fails_to_decrypt() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let (pk, _sk) = eg_keygen(&mut rng);
        let (_pk2, sk2) = eg_keygen(&mut rng);
        let msg = hash_to_group(b"plaintext element");
        let (ct, _alpha) = eg_enc(&pk, &msg, &mut rng);
        assert_ne!(eg_dec(&sk2, &ct), msg);
    }

    #[test]
    fn ciphertext_serialization_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let (pk, _sk) = eg_keygen(&mut rng);
        let (ct, _alpha) = eg_enc(&pk, &hash_to_group(b"m"), &mut rng);
        assert_eq!(Ciphertext::from_bytes(&ct.to_bytes()), Some(ct));
        // Non-canonical field encodings are rejected; short input too.
        assert_eq!(Ciphertext::from_bytes(&[0xffu8; 64]), None);
        assert_eq!(Ciphertext::from_bytes(&ct.to_bytes()[..63]), None);
    }
}
