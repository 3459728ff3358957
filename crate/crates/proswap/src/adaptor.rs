//! Schnorr signatures with an adaptor (pre-signature) mode.
//!
//! A pre-signature binds a message to a statement `Y = g^y`: anyone holding
//! the witness `y` can complete it into an ordinary signature, and anyone
//! seeing both the pre-signature and the completed signature can extract `y`.
//! Ordinary signing is the special case where the statement is the identity
//! element.

use crate::group::{
    base_mul, hash_to_scalar, identity, point_from_bytes, point_to_bytes, random_nonzero_scalar,
    scalar_from_bytes, scalar_to_bytes, Point, Scalar,
};
use rand::{CryptoRng, RngCore};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AdaptorError {
    #[error("signature does not correspond to the pre-signature")]
    ExtractionMismatch,
}

#[derive(Clone, Copy, Debug)]
pub struct SigKeyPair {
    pub sk: Scalar,
    pub pk: Point,
}

/// A completed signature `(R, s)` satisfying `g^s = R * pk^c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Signature {
    pub rhat: Point,
    pub s: Scalar,
}

/// A pre-signature `(R, s~)` satisfying `g^s~ * Y = R * pk^c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PreSignature {
    pub rhat: Point,
    pub s_tilde: Scalar,
}

pub const SIGNATURE_LEN: usize = 64;

impl Signature {
    pub fn to_bytes(&self) -> [u8; SIGNATURE_LEN] {
        let mut out = [0u8; SIGNATURE_LEN];
        out[..32].copy_from_slice(&point_to_bytes(&self.rhat));
        out[32..].copy_from_slice(&scalar_to_bytes(&self.s));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Signature> {
        if bytes.len() != SIGNATURE_LEN {
            return None;
        }
        Some(Signature {
            rhat: point_from_bytes(&bytes[..32])?,
            s: scalar_from_bytes(&bytes[32..])?,
        })
    }
}

impl PreSignature {
    pub fn to_bytes(&self) -> [u8; SIGNATURE_LEN] {
        let mut out = [0u8; SIGNATURE_LEN];
        out[..32].copy_from_slice(&point_to_bytes(&self.rhat));
        out[32..].copy_from_slice(&scalar_to_bytes(&self.s_tilde));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<PreSignature> {
        if bytes.len() != SIGNATURE_LEN {
            return None;
        }
        Some(PreSignature {
            rhat: point_from_bytes(&bytes[..32])?,
            s_tilde: scalar_from_bytes(&bytes[32..])?,
        })
    }
}

pub fn keygen<R: RngCore + CryptoRng>(rng: &mut R) -> SigKeyPair {
    let sk = random_nonzero_scalar(rng);
    SigKeyPair { sk, pk: base_mul(&sk) }
}

/// The signature challenge. Shared by ordinary and adaptor verification, and
/// by the two-party signing sessions which recompute it over the joint nonce.
pub fn challenge(pk: &Point, rhat: &Point, msg: &[u8]) -> Scalar {
    hash_to_scalar(b"sig", &[&point_to_bytes(pk), &point_to_bytes(rhat), msg])
}

pub fn sign<R: RngCore + CryptoRng>(kp: &SigKeyPair, msg: &[u8], rng: &mut R) -> Signature {
    let pre = psign(kp, msg, &identity(), rng);
    Signature { rhat: pre.rhat, s: pre.s_tilde }
}

pub fn vrfy(pk: &Point, msg: &[u8], sig: &Signature) -> bool {
    let c = challenge(pk, &sig.rhat, msg);
    // g^s = R * pk^c, rearranged for one variable-time double mul.
    Point::vartime_double_scalar_mul_basepoint(&-c, pk, &sig.s) == sig.rhat
}

pub fn psign<R: RngCore + CryptoRng>(
    kp: &SigKeyPair,
    msg: &[u8],
    statement: &Point,
    rng: &mut R,
) -> PreSignature {
    let r = random_nonzero_scalar(rng);
    let rhat = base_mul(&r) + statement;
    let c = challenge(&kp.pk, &rhat, msg);
    PreSignature { rhat, s_tilde: r + c * kp.sk }
}

pub fn pvrfy(pk: &Point, msg: &[u8], statement: &Point, pre: &PreSignature) -> bool {
    let c = challenge(pk, &pre.rhat, msg);
    // g^s~ * Y = R * pk^c.
    Point::vartime_double_scalar_mul_basepoint(&-c, pk, &pre.s_tilde) + statement == pre.rhat
}

/// Completes a pre-signature with the witness for its statement. The result
/// verifies as an ordinary signature on the same message.
pub fn adapt(pre: &PreSignature, witness: &Scalar) -> Signature {
    Signature { rhat: pre.rhat, s: pre.s_tilde + witness }
}

/// Recovers the witness from a pre-signature and its completion. Fails when
/// the two signatures do not share a nonce point.
pub fn extract(pre: &PreSignature, sig: &Signature) -> Result<Scalar, AdaptorError> {
    if pre.rhat != sig.rhat {
        return Err(AdaptorError::ExtractionMismatch);
    }
    Ok(sig.s - pre.s_tilde)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(42)
    }

    #[test]
    fn sign_verify_roundtrip() {
        let mut rng = rng();
        let kp = keygen(&mut rng);
        let sig = sign(&kp, b"a message", &mut rng);
        assert!(vrfy(&kp.pk, b"a message", &sig));
        assert!(!vrfy(&kp.pk, b"another message", &sig));
        let other = keygen(&mut rng);
        assert!(!vrfy(&other.pk, b"a message", &sig));
    }

    #[test]
    fn adaptor_roundtrip_extracts_witness() {
        let mut rng = rng();
        let kp = keygen(&mut rng);
        let y = random_nonzero_scalar(&mut rng);
        let statement = base_mul(&y);

        let pre = psign(&kp, b"locked", &statement, &mut rng);
        assert!(pvrfy(&kp.pk, b"locked", &statement, &pre));
        assert!(!pvrfy(&kp.pk, b"other", &statement, &pre));

        let sig = adapt(&pre, &y);
        assert!(vrfy(&kp.pk, b"locked", &sig));
        assert_eq!(extract(&pre, &sig), Ok(y));
    }

    #[test]
    fn extraction_requires_matching_nonce() {
        let mut rng = rng();
        let kp = keygen(&mut rng);
        let y = random_nonzero_scalar(&mut rng);
        let statement = base_mul(&y);
        let pre = psign(&kp, b"msg", &statement, &mut rng);
        let unrelated = sign(&kp, b"msg", &mut rng);
        assert_eq!(extract(&pre, &unrelated), Err(AdaptorError::ExtractionMismatch));
    }

    #[test]
    fn presignature_does_not_verify_as_signature() {
        let mut rng = rng();
        let kp = keygen(&mut rng);
        let y = random_nonzero_scalar(&mut rng);
        let pre = psign(&kp, b"msg", &base_mul(&y), &mut rng);
        let as_sig = Signature { rhat: pre.rhat, s: pre.s_tilde };
        assert!(!vrfy(&kp.pk, b"msg", &as_sig));
    }

    #[test]
    fn serialization_roundtrip() {
        let mut rng = rng();
        let kp = keygen(&mut rng);
        let y = random_nonzero_scalar(&mut rng);
        let pre = psign(&kp, b"msg", &base_mul(&y), &mut rng);
        let sig = adapt(&pre, &y);
        assert_eq!(PreSignature::from_bytes(&pre.to_bytes()), Some(pre));
        assert_eq!(Signature::from_bytes(&sig.to_bytes()), Some(sig));
        assert_eq!(Signature::from_bytes(&[0u8; 63]), None);
    }
}
