//! Blinded evaluation of a keyed hash with per-instance exponents.
//!
//! The evaluator holds a key `sk` with commitment `X = g^sk` plus a list of
//! instance exponents `alpha_i` with commitments `A_i = g^{alpha_i}`. The
//! full function on a guess `x` under instance `i` is
//!
//! ```text
//!   F(sk, alpha_i, x) = H_p(pk, H_G(x)^{sk * alpha_i})
//! ```
//!
//! where `pk` is the serialized commitment list and `H_p` hashes to a scalar.
//! A client blinds `H_G(x)` with a random exponent, the evaluator raises the
//! blinded point to `sk`, and the client finishes the job locally once it
//! learns an `alpha_i`. The evaluator never sees `x`; the client learns
//! nothing about evaluations it did not perform.
//!
//! Guesses live in the domain `[0, 2^ell)` for a bit length `ell` and are
//! hashed through a fixed-width little-endian encoding of `ceil(ell/8)`
//! bytes, so equal integers always map to equal base points for a given
//! `ell`.

use crate::group::{
    base_mul, hash_to_group, hash_to_scalar, identity, point_to_bytes, random_nonzero_scalar,
    Point, Scalar,
};
use rand::{CryptoRng, RngCore};
use thiserror::Error;

/// Largest supported guess bit length.
pub const MAX_ELL: u32 = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OprfError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("guess is outside the domain for the given bit length")]
    GuessOutOfRange,
    #[error("request point is not a valid blinded base")]
    InvalidRequest,
}

/// Public commitments `(X, A_1, ..., A_lambda)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OprfPublicKey {
    pub x: Point,
    pub a: Vec<Point>,
}

impl OprfPublicKey {
    pub fn lambda(&self) -> usize {
        self.a.len()
    }

    /// Serialization that keys the output hash: `X || A_1 || ... || A_lambda`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 * (1 + self.a.len()));
        out.extend_from_slice(&point_to_bytes(&self.x));
        for a in &self.a {
            out.extend_from_slice(&point_to_bytes(a));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct OprfKeyPair {
    pub sk: Scalar,
    pub alphas: Vec<Scalar>,
    pub public: OprfPublicKey,
}

/// Client-side blinding state for one request.
#[derive(Clone, Debug)]
pub struct ClientState {
    pub x: u64,
    pub ell: u32,
    r: Scalar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Request {
    pub point: Point,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Response {
    pub point: Point,
}

fn check_ell(ell: u32) -> Result<(), OprfError> {
    if ell == 0 || ell > MAX_ELL {
        return Err(OprfError::InvalidParameter("bit length out of range"));
    }
    Ok(())
}

/// Fixed-width little-endian encoding of a guess, `ceil(ell/8)` bytes.
pub fn encode_guess(x: u64, ell: u32) -> Result<Vec<u8>, OprfError> {
    check_ell(ell)?;
    if x >= 1u64 << ell {
        return Err(OprfError::GuessOutOfRange);
    }
    let width = ell.div_ceil(8) as usize;
    Ok(x.to_le_bytes()[..width].to_vec())
}

/// `H_G(x)`: the hashed base point for a guess.
pub fn guess_base(x: u64, ell: u32) -> Result<Point, OprfError> {
    Ok(hash_to_group(&encode_guess(x, ell)?))
}

/// Samples a key: `sk` plus `lambda` instance exponents, all nonzero.
/// `lambda` must be even and at least 2.
pub fn oprf_keygen<R: RngCore + CryptoRng>(
    lambda: usize,
    rng: &mut R,
) -> Result<OprfKeyPair, OprfError> {
    if lambda < 2 || lambda % 2 != 0 {
        return Err(OprfError::InvalidParameter(
            "instance count must be even and at least 2",
        ));
    }
    let sk = random_nonzero_scalar(rng);
    let alphas: Vec<Scalar> = (0..lambda).map(|_| random_nonzero_scalar(rng)).collect();
    let a = alphas.iter().map(base_mul).collect();
    Ok(OprfKeyPair {
        sk,
        alphas,
        public: OprfPublicKey { x: base_mul(&sk), a },
    })
}

/// Blinds a guess: the request point is `H_G(x)^r` for fresh nonzero `r`.
pub fn request<R: RngCore + CryptoRng>(
    x: u64,
    ell: u32,
    rng: &mut R,
) -> Result<(ClientState, Request), OprfError> {
    let base = guess_base(x, ell)?;
    let r = random_nonzero_scalar(rng);
    Ok((ClientState { x, ell, r }, Request { point: base * r }))
}

/// Evaluator side: raises the blinded point to `sk`.
pub fn blind_eval(sk: &Scalar, req: &Request) -> Result<Response, OprfError> {
    if req.point == identity() {
        return Err(OprfError::InvalidRequest);
    }
    Ok(Response { point: req.point * sk })
}

/// The output hash `H_p(pk, point)`, keyed on the full serialized public key.
fn output_hash(pk_bytes: &[u8], point: &Point) -> Scalar {
    hash_to_scalar(b"proswap/hp", &[pk_bytes, &point_to_bytes(point)])
}

/// Client side: unblinds the response and applies instance exponent `alpha`,
/// producing `H_p(pk, res^(alpha/r)) = F(sk, alpha, x)`.
pub fn finalize_with_alpha(
    pk_bytes: &[u8],
    st: &ClientState,
    res: &Response,
    alpha: &Scalar,
) -> Scalar {
    let unblinded = res.point * (alpha * st.r.invert());
    output_hash(pk_bytes, &unblinded)
}

/// Direct evaluation `F(sk, alpha, x)` by a holder of the secrets.
pub fn eval(
    sk: &Scalar,
    alpha: &Scalar,
    pk_bytes: &[u8],
    x: u64,
    ell: u32,
) -> Result<Scalar, OprfError> {
    let base = guess_base(x, ell)?;
    Ok(output_hash(pk_bytes, &(base * (sk * alpha))))
}

/// The inner group element `H_G(x)^(sk * alpha)` of a direct evaluation,
/// before output hashing. The commitment phase of the cut-and-choose argument
/// publishes blinded copies of these.
pub fn eval_element(sk: &Scalar, alpha: &Scalar, base: &Point) -> Point {
    base * (sk * alpha)
}

/// Output hash over an explicit inner element; callers that transport the
/// element (for example out of a decrypted response) finish with this.
pub fn finalize_element(pk_bytes: &[u8], element: &Point) -> Scalar {
    output_hash(pk_bytes, element)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn guess_encoding_width_tracks_bit_length() {
        assert_eq!(encode_guess(0, 1).unwrap(), vec![0]);
        assert_eq!(encode_guess(1, 8).unwrap(), vec![1]);
        assert_eq!(encode_guess(300, 9).unwrap(), vec![44, 1]);
        assert_eq!(encode_guess(65535, 16).unwrap(), vec![255, 255]);
        assert_eq!(encode_guess(2, 1), Err(OprfError::GuessOutOfRange));
        assert_eq!(encode_guess(256, 8), Err(OprfError::GuessOutOfRange));
        assert!(encode_guess(0, 0).is_err());
        assert!(encode_guess(0, 17).is_err());
    }

    #[test]
    fn same_guess_same_base_across_widths() {
        // Width only depends on ell; the same (x, ell) pair is stable.
        assert_eq!(guess_base(3, 4).unwrap(), guess_base(3, 4).unwrap());
        // Different widths hash different strings even for equal integers.
        assert_ne!(guess_base(3, 8).unwrap(), guess_base(3, 9).unwrap());
    }

    #[test]
    fn keygen_validates_lambda() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert!(oprf_keygen(0, &mut rng).is_err());
        assert!(oprf_keygen(3, &mut rng).is_err());
        let kp = oprf_keygen(4, &mut rng).unwrap();
        assert_eq!(kp.public.lambda(), 4);
        assert_eq!(kp.public.to_bytes().len(), 32 * 5);
    }

    #[test]
    fn blinded_evaluation_matches_direct() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let kp = oprf_keygen(6, &mut rng).unwrap();
        let pk_bytes = kp.public.to_bytes();
        for trial in 0..32 {
            let ell = 1 + (trial % 16) as u32;
            let x = rng.gen_range(0..(1u64 << ell));
            let alpha = &kp.alphas[trial % 6];
            let (st, req) = request(x, ell, &mut rng).unwrap();
            let res = blind_eval(&kp.sk, &req).unwrap();
            let via_protocol = finalize_with_alpha(&pk_bytes, &st, &res, alpha);
            let direct = eval(&kp.sk, alpha, &pk_bytes, x, ell).unwrap();
            assert_eq!(via_protocol, direct);
        }
    }

    #[test]
    fn output_is_keyed_on_public_key() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let kp1 = oprf_keygen(2, &mut rng).unwrap();
        let kp2 = OprfKeyPair {
            public: OprfPublicKey {
                x: kp1.public.x,
                a: vec![kp1.public.a[1], kp1.public.a[0]],
            },
            ..kp1.clone()
        };
        let a = eval(&kp1.sk, &kp1.alphas[0], &kp1.public.to_bytes(), 1, 2).unwrap();
        let b = eval(&kp2.sk, &kp2.alphas[0], &kp2.public.to_bytes(), 1, 2).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn blind_eval_rejects_identity_request() {
        let req = Request { point: identity() };
        assert_eq!(
            blind_eval(&Scalar::from(5u64), &req),
            Err(OprfError::InvalidRequest)
        );
    }
}
