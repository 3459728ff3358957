//! OR-composition proof that a published evaluation element matches one of
//! the guess bases.
//!
//! Statement: `(pk, A, T, ell)` with `pk = g^sk` and `A = g^alpha`. The
//! prover shows knowledge of `(sk, alpha)` together with some guess
//! `y in [0, 2^ell)` such that `T = H_G(y)^(sk * alpha)`, without revealing
//! which guess. One simulated sigma run per non-witness branch, challenges
//! summing to the global Fiat-Shamir challenge.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use crate::group::{base_mul, random_nonzero_scalar, Point, Scalar};
use crate::oprf::{guess_base, MAX_ELL};
use crate::proofs::wire::{self, Reader};
use crate::proofs::ProofError;
use crate::transcript::Transcript;
use curve25519_dalek::traits::VartimeMultiscalarMul;
use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha512};

const TAG_OR: u8 = 0x04;

/// One branch: `B` is the claimed `H_G(y)^alpha` for this branch's guess,
/// `a1..a4` the sigma commitments, `(c, z_alpha, z_sk)` the responses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrBranch {
    pub b: Point,
    pub a1: Point,
    pub a2: Point,
    pub a3: Point,
    pub a4: Point,
    pub c: Scalar,
    pub z_alpha: Scalar,
    pub z_sk: Scalar,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrProof {
    pub branches: Vec<OrBranch>,
}

fn check_ell(ell: u32) -> Result<(), ProofError> {
    if ell == 0 || ell > MAX_ELL {
        return Err(ProofError::InvalidParameter("bit length out of range"));
    }
    Ok(())
}

// The base table is fixed per bit length and rebuilt constantly by provers
// and verifiers; memoize it per thread.
thread_local! {
    static DOMAIN_BASES: RefCell<BTreeMap<u32, Rc<Vec<Point>>>> =
        RefCell::new(BTreeMap::new());
}

fn domain_bases(ell: u32) -> Rc<Vec<Point>> {
    DOMAIN_BASES.with(|cache| {
        Rc::clone(cache.borrow_mut().entry(ell).or_insert_with(|| {
            Rc::new(
                (0..1u64 << ell)
                    .map(|i| guess_base(i, ell).expect("bit length validated"))
                    .collect(),
            )
        }))
    })
}

fn global_challenge(
    pk: &Point,
    a_cap: &Point,
    t_cap: &Point,
    ell: u32,
    branches: &[OrBranch],
    ctx: &Transcript,
) -> Scalar {
    let mut t = ctx.fork(b"or-guess");
    t.absorb_point(b"pk", pk);
    t.absorb_point(b"A", a_cap);
    t.absorb_point(b"T", t_cap);
    t.absorb_u64(b"ell", ell as u64);
    for (i, br) in branches.iter().enumerate() {
        t.absorb_u64(b"branch", i as u64);
        t.absorb_point(b"B", &br.b);
        t.absorb_point(b"a1", &br.a1);
        t.absorb_point(b"a2", &br.a2);
        t.absorb_point(b"a3", &br.a3);
        t.absorb_point(b"a4", &br.a4);
    }
    t.challenge()
}

/// Proves the statement for witness `(sk, alpha, y)`. Refuses guesses outside
/// the domain; consistency of the witness with `(pk, A, T)` is the prover's
/// responsibility, an inconsistent witness yields a proof that never
/// verifies.
#[allow(clippy::too_many_arguments)]
pub fn prove_or<R: RngCore + CryptoRng>(
    pk: &Point,
    a_cap: &Point,
    t_cap: &Point,
    ell: u32,
    sk: &Scalar,
    alpha: &Scalar,
    y: u64,
    ctx: &Transcript,
    rng: &mut R,
) -> Result<OrProof, ProofError> {
    check_ell(ell)?;
    let n = 1usize << ell;
    if y >= n as u64 {
        return Err(ProofError::InvalidWitness("guess outside domain"));
    }
    let bases = domain_bases(ell);
    let mut branches = Vec::with_capacity(n);
    let mut c_sum = Scalar::ZERO;
    let mut real_t_alpha = Scalar::ZERO;
    let mut real_t_sk = Scalar::ZERO;
    for (i, h) in bases.iter().enumerate() {
        if i as u64 == y {
            let t_alpha = random_nonzero_scalar(rng);
            let t_sk = random_nonzero_scalar(rng);
            let b = h * alpha;
            branches.push(OrBranch {
                b,
                a1: base_mul(&t_alpha),
                a2: h * t_alpha,
                a3: base_mul(&t_sk),
                a4: b * t_sk,
                c: Scalar::ZERO,
                z_alpha: Scalar::ZERO,
                z_sk: Scalar::ZERO,
            });
            real_t_alpha = t_alpha;
            real_t_sk = t_sk;
        } else {
            // Simulated branch: every operand below is published in the
            // proof, so variable-time recombination leaks nothing.
            let c = Scalar::random(rng);
            let z_alpha = Scalar::random(rng);
            let z_sk = Scalar::random(rng);
            let beta = random_nonzero_scalar(rng);
            let b = h * beta;
            branches.push(OrBranch {
                b,
                a1: Point::vartime_double_scalar_mul_basepoint(&-c, a_cap, &z_alpha),
                a2: Point::vartime_multiscalar_mul([z_alpha, -c], [*h, b]),
                a3: Point::vartime_double_scalar_mul_basepoint(&-c, pk, &z_sk),
                a4: Point::vartime_multiscalar_mul([z_sk, -c], [b, *t_cap]),
                c,
                z_alpha,
                z_sk,
            });
            c_sum += c;
        }
    }

    let c_global = global_challenge(pk, a_cap, t_cap, ell, &branches, ctx);
    let real = &mut branches[y as usize];
    real.c = c_global - c_sum;
    real.z_alpha = real_t_alpha + real.c * alpha;
    real.z_sk = real_t_sk + real.c * sk;
    Ok(OrProof { branches })
}

/// Verifies all branch equations plus the challenge-sum constraint. The four
/// per-branch equations are folded into a single multiscalar identity with
/// weights derived from a hash of the statement and proof; an exact proof
/// passes for every weight choice, a violated equation survives folding with
/// probability about 2^-128.
pub fn verify_or(
    pk: &Point,
    a_cap: &Point,
    t_cap: &Point,
    ell: u32,
    proof: &OrProof,
    ctx: &Transcript,
) -> bool {
    if check_ell(ell).is_err() {
        return false;
    }
    let n = 1usize << ell;
    if proof.branches.len() != n {
        return false;
    }
    let c_global = global_challenge(pk, a_cap, t_cap, ell, &proof.branches, ctx);
    let c_sum: Scalar = proof.branches.iter().map(|b| b.c).sum();
    if c_sum != c_global {
        return false;
    }

    let bases = domain_bases(ell);
    let mut weights = weight_stream(&[
        b"or-guess",
        &crate::group::point_to_bytes(pk),
        &crate::group::point_to_bytes(a_cap),
        &crate::group::point_to_bytes(t_cap),
        &proof.to_bytes(),
    ]);

    // Folded equations, one scalar per point:
    //   eq1: g^z_alpha = a1 * A^c      eq2: h^z_alpha = a2 * B^c
    //   eq3: g^z_sk    = a3 * pk^c     eq4: B^z_sk    = a4 * T^c
    let mut scalars = Vec::with_capacity(6 * n + 4);
    let mut points = Vec::with_capacity(6 * n + 4);
    let mut g_coeff = Scalar::ZERO;
    let mut a_coeff = Scalar::ZERO;
    let mut pk_coeff = Scalar::ZERO;
    let mut t_coeff = Scalar::ZERO;
    for (br, h) in proof.branches.iter().zip(bases.iter()) {
        let (w1, w2, w3, w4) = (weights.next_weight(), weights.next_weight(), weights.next_weight(), weights.next_weight());
        g_coeff += w1 * br.z_alpha + w3 * br.z_sk;
        a_coeff -= w1 * br.c;
        pk_coeff -= w3 * br.c;
        t_coeff -= w4 * br.c;
        scalars.push(-w1);
        points.push(br.a1);
        scalars.push(-w2);
        points.push(br.a2);
        scalars.push(-w3);
        points.push(br.a3);
        scalars.push(-w4);
        points.push(br.a4);
        scalars.push(w4 * br.z_sk - w2 * br.c);
        points.push(br.b);
        scalars.push(w2 * br.z_alpha);
        points.push(*h);
    }
    scalars.push(g_coeff);
    points.push(base_mul(&Scalar::ONE));
    scalars.push(a_coeff);
    points.push(*a_cap);
    scalars.push(pk_coeff);
    points.push(*pk);
    scalars.push(t_coeff);
    points.push(*t_cap);

    Point::vartime_multiscalar_mul(scalars.iter(), points.iter()) == crate::group::identity()
}

/// Deterministic 128-bit folding weights seeded from context bytes.
pub(crate) struct WeightStream {
    rng: ChaCha20Rng,
}

impl WeightStream {
    pub(crate) fn next_weight(&mut self) -> Scalar {
        Scalar::from(self.rng.gen::<u128>())
    }
}

pub(crate) fn weight_stream(parts: &[&[u8]]) -> WeightStream {
    let mut h = Sha512::new();
    h.update(b"proswap/fold");
    for p in parts {
        h.update((p.len() as u32).to_be_bytes());
        h.update(p);
    }
    let digest = h.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest[..32]);
    WeightStream { rng: ChaCha20Rng::from_seed(seed) }
}

impl OrProof {
    pub(crate) fn encode_into(&self, out: &mut Vec<u8>) {
        wire::put_u32(out, self.branches.len() as u32);
        for br in &self.branches {
            wire::put_point(out, &br.b);
            wire::put_point(out, &br.a1);
            wire::put_point(out, &br.a2);
            wire::put_point(out, &br.a3);
            wire::put_point(out, &br.a4);
            wire::put_scalar(out, &br.c);
            wire::put_scalar(out, &br.z_alpha);
            wire::put_scalar(out, &br.z_sk);
        }
    }

    pub(crate) fn decode(r: &mut Reader) -> Option<OrProof> {
        let n = r.u32()? as usize;
        if n == 0 || n > 1 << MAX_ELL {
            return None;
        }
        let mut branches = Vec::with_capacity(n);
        for _ in 0..n {
            branches.push(OrBranch {
                b: r.point()?,
                a1: r.point()?,
                a2: r.point()?,
                a3: r.point()?,
                a4: r.point()?,
                c: r.scalar()?,
                z_alpha: r.scalar()?,
                z_sk: r.scalar()?,
            });
        }
        Some(OrProof { branches })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![TAG_OR];
        self.encode_into(&mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<OrProof> {
        let mut r = Reader::new(bytes);
        if r.u8()? != TAG_OR {
            return None;
        }
        let proof = Self::decode(&mut r)?;
        r.finish()?;
        Some(proof)
    }
}
