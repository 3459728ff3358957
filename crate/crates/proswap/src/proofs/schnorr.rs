//! Single-statement Schnorr-style proofs: discrete log knowledge, Pedersen
//! commitment opening, and correctness of an ElGamal encryption of a blinded
//! evaluation.

use crate::elgamal::Ciphertext;
use crate::group::{base_mul, random_nonzero_scalar, Point, Scalar};
use crate::proofs::wire::{self, Reader};
use crate::transcript::Transcript;
use rand::{CryptoRng, RngCore};

const TAG_DL: u8 = 0x01;
const TAG_OPEN: u8 = 0x02;
const TAG_ENC: u8 = 0x03;

/// Proof of knowledge of `sk` with `pk = g^sk`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DlProof {
    pub big_r: Point,
    pub z: Scalar,
}

pub fn prove_dl<R: RngCore + CryptoRng>(
    pk: &Point,
    sk: &Scalar,
    ctx: &Transcript,
    rng: &mut R,
) -> DlProof {
    let r = random_nonzero_scalar(rng);
    let big_r = base_mul(&r);
    let c = dl_challenge(pk, &big_r, ctx);
    DlProof { big_r, z: r + c * sk }
}

pub fn verify_dl(pk: &Point, proof: &DlProof, ctx: &Transcript) -> bool {
    let c = dl_challenge(pk, &proof.big_r, ctx);
    Point::vartime_double_scalar_mul_basepoint(&-c, pk, &proof.z) == proof.big_r
}

fn dl_challenge(pk: &Point, big_r: &Point, ctx: &Transcript) -> Scalar {
    let mut t = ctx.fork(b"dl");
    t.absorb_point(b"pk", pk);
    t.absorb_point(b"R", big_r);
    t.challenge()
}

impl DlProof {
    pub(crate) fn encode_into(&self, out: &mut Vec<u8>) {
        wire::put_point(out, &self.big_r);
        wire::put_scalar(out, &self.z);
    }

    pub(crate) fn decode(r: &mut Reader) -> Option<DlProof> {
        Some(DlProof { big_r: r.point()?, z: r.scalar()? })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![TAG_DL];
        self.encode_into(&mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<DlProof> {
        let mut r = Reader::new(bytes);
        if r.u8()? != TAG_DL {
            return None;
        }
        let proof = Self::decode(&mut r)?;
        r.finish()?;
        Some(proof)
    }
}

/// Proof of opening knowledge for a two-base commitment
/// `commitment = base_a^sk * base_b^omega`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OpenProof {
    pub big_r: Point,
    pub z_sk: Scalar,
    pub z_omega: Scalar,
}

pub fn prove_open<R: RngCore + CryptoRng>(
    commitment: &Point,
    base_a: &Point,
    base_b: &Point,
    sk: &Scalar,
    omega: &Scalar,
    ctx: &Transcript,
    rng: &mut R,
) -> OpenProof {
    let r1 = random_nonzero_scalar(rng);
    let r2 = random_nonzero_scalar(rng);
    let big_r = base_a * r1 + base_b * r2;
    let c = open_challenge(commitment, base_a, base_b, &big_r, ctx);
    OpenProof { big_r, z_sk: r1 + c * sk, z_omega: r2 + c * omega }
}

pub fn verify_open(
    commitment: &Point,
    base_a: &Point,
    base_b: &Point,
    proof: &OpenProof,
    ctx: &Transcript,
) -> bool {
    let c = open_challenge(commitment, base_a, base_b, &proof.big_r, ctx);
    base_a * proof.z_sk + base_b * proof.z_omega == proof.big_r + commitment * c
}

fn open_challenge(
    commitment: &Point,
    base_a: &Point,
    base_b: &Point,
    big_r: &Point,
    ctx: &Transcript,
) -> Scalar {
    let mut t = ctx.fork(b"open");
    t.absorb_point(b"C", commitment);
    t.absorb_point(b"base-a", base_a);
    t.absorb_point(b"base-b", base_b);
    t.absorb_point(b"R", big_r);
    t.challenge()
}

impl OpenProof {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![TAG_OPEN];
        wire::put_point(&mut out, &self.big_r);
        wire::put_scalar(&mut out, &self.z_sk);
        wire::put_scalar(&mut out, &self.z_omega);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<OpenProof> {
        let mut r = Reader::new(bytes);
        if r.u8()? != TAG_OPEN {
            return None;
        }
        let proof = OpenProof { big_r: r.point()?, z_sk: r.scalar()?, z_omega: r.scalar()? };
        r.finish()?;
        Some(proof)
    }
}

/// Proof that an ElGamal ciphertext `(c1, c2)` under key `enc_pk` encrypts
/// `req^sk` where `pk = g^sk`: ties the evaluator's response to its committed
/// key without revealing the response.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncProof {
    pub r1: Point,
    pub r2: Point,
    pub r3: Point,
    pub z_sk: Scalar,
    pub z_alpha: Scalar,
}

#[allow(clippy::too_many_arguments)]
pub fn prove_enc<R: RngCore + CryptoRng>(
    pk: &Point,
    enc_pk: &Point,
    req: &Point,
    ct: &Ciphertext,
    sk: &Scalar,
    alpha: &Scalar,
    ctx: &Transcript,
    rng: &mut R,
) -> EncProof {
    let r_sk = random_nonzero_scalar(rng);
    let r_alpha = random_nonzero_scalar(rng);
    let r1 = base_mul(&r_sk);
    let r2 = base_mul(&r_alpha);
    let r3 = enc_pk * r_alpha + req * r_sk;
    let c = enc_challenge(pk, enc_pk, req, ct, &r1, &r2, &r3, ctx);
    EncProof { r1, r2, r3, z_sk: r_sk + c * sk, z_alpha: r_alpha + c * alpha }
}

pub fn verify_enc(
    pk: &Point,
    enc_pk: &Point,
    req: &Point,
    ct: &Ciphertext,
    proof: &EncProof,
    ctx: &Transcript,
) -> bool {
    let c = enc_challenge(pk, enc_pk, req, ct, &proof.r1, &proof.r2, &proof.r3, ctx);
    base_mul(&proof.z_sk) == proof.r1 + pk * c
        && base_mul(&proof.z_alpha) == proof.r2 + ct.c1 * c
        && enc_pk * proof.z_alpha + req * proof.z_sk == proof.r3 + ct.c2 * c
}

#[allow(clippy::too_many_arguments)]
fn enc_challenge(
    pk: &Point,
    enc_pk: &Point,
    req: &Point,
    ct: &Ciphertext,
    r1: &Point,
    r2: &Point,
    r3: &Point,
    ctx: &Transcript,
) -> Scalar {
    let mut t = ctx.fork(b"enc");
    t.absorb_point(b"pk", pk);
    t.absorb_point(b"enc-pk", enc_pk);
    t.absorb_point(b"req", req);
    t.absorb_point(b"c1", &ct.c1);
    t.absorb_point(b"c2", &ct.c2);
    t.absorb_point(b"R1", r1);
    t.absorb_point(b"R2", r2);
    t.absorb_point(b"R3", r3);
    t.challenge()
}

impl EncProof {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![TAG_ENC];
        wire::put_point(&mut out, &self.r1);
        wire::put_point(&mut out, &self.r2);
        wire::put_point(&mut out, &self.r3);
        wire::put_scalar(&mut out, &self.z_sk);
        wire::put_scalar(&mut out, &self.z_alpha);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<EncProof> {
        let mut r = Reader::new(bytes);
        if r.u8()? != TAG_ENC {
            return None;
        }
        let proof = EncProof {
            r1: r.point()?,
            r2: r.point()?,
            r3: r.point()?,
            z_sk: r.scalar()?,
            z_alpha: r.scalar()?,
        };
        r.finish()?;
        Some(proof)
    }
}
