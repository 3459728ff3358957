//! Aggregated well-formedness argument.
//!
//! The per-instance argument in [`cut_choose`](crate::proofs::cut_choose)
//! repeats a `2^ell`-branch OR proof for every opened instance, so its size
//! grows with `lambda * 2^ell`. Here the branch structure is shared: the
//! prover commits once to the hidden base `h = H_G(y)^sk` as `V = h * g^rho`
//! with `U = u^rho`, proves in a single OR run that `h` matches an in-domain
//! guess, and ties every opened evaluation element to that one commitment
//! through a random linear combination: for transcript-derived weights `w_j`
//! the aggregates `Tbar = prod T_j^(w_j)` and `Abar = prod A_j^(w_j)` satisfy
//! `Tbar = h^abar` with `abar = log_g Abar`, which is proven with one
//! hidden-base exponent proof plus one cross-base equality proof. Any opened
//! element inconsistent with `h` survives the weighting with negligible
//! probability.
//!
//! The commit phase, subset derivation, unopened reveals and witness
//! recovery are identical to the per-instance variant, so the two proofs are
//! interchangeable at the protocol level.

use crate::group::{
    base_mul, random_nonzero_scalar, second_generator, Point, Scalar,
};
use crate::oprf::{finalize_element, guess_base, OprfKeyPair, OprfPublicKey, MAX_ELL};
use crate::proofs::cut_choose::{
    commit_instances, commit_transcript, InstanceCommitment, UnopenedReveal,
};
use crate::proofs::wire::{self, Reader};
use crate::proofs::ProofError;
use crate::transcript::Transcript;
use curve25519_dalek::traits::VartimeMultiscalarMul;
use rand::{CryptoRng, RngCore};
use std::collections::BTreeMap;

const TAG_OR_WF: u8 = 0x06;
const TAG_HIDDEN: u8 = 0x07;
const TAG_BATCHED: u8 = 0x08;
const TAG_BASE_EQ: u8 = 0x09;

/// One branch of the shared OR run. `M` is the claimed hidden base for this
/// branch's guess; the responses cover the key exponent and the mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrWfBranch {
    pub m: Point,
    pub a1: Point,
    pub a2: Point,
    pub a3: Point,
    pub a4: Point,
    pub c: Scalar,
    pub z_sk: Scalar,
    pub z_rho: Scalar,
}

/// Proof that `V = H_G(y)^sk * g^rho` and `U = u^rho` for some in-domain
/// guess `y`, with `pk = g^sk`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrWfProof {
    pub branches: Vec<OrWfBranch>,
}

fn check_ell(ell: u32) -> Result<(), ProofError> {
    if ell == 0 || ell > MAX_ELL {
        return Err(ProofError::InvalidParameter("bit length out of range"));
    }
    Ok(())
}

fn orwf_challenge(
    pk: &Point,
    u_cap: &Point,
    v_cap: &Point,
    ell: u32,
    branches: &[OrWfBranch],
    ctx: &Transcript,
) -> Scalar {
    let mut t = ctx.fork(b"or-wf");
    t.absorb_point(b"pk", pk);
    t.absorb_point(b"U", u_cap);
    t.absorb_point(b"V", v_cap);
    t.absorb_u64(b"ell", ell as u64);
    for (i, br) in branches.iter().enumerate() {
        t.absorb_u64(b"branch", i as u64);
        t.absorb_point(b"M", &br.m);
        t.absorb_point(b"a1", &br.a1);
        t.absorb_point(b"a2", &br.a2);
        t.absorb_point(b"a3", &br.a3);
        t.absorb_point(b"a4", &br.a4);
    }
    t.challenge()
}

#[allow(clippy::too_many_arguments)]
pub fn prove_orwf<R: RngCore + CryptoRng>(
    pk: &Point,
    u_cap: &Point,
    v_cap: &Point,
    ell: u32,
    sk: &Scalar,
    rho: &Scalar,
    y: u64,
    ctx: &Transcript,
    rng: &mut R,
) -> Result<OrWfProof, ProofError> {
    check_ell(ell)?;
    let n = 1usize << ell;
    if y >= n as u64 {
        return Err(ProofError::InvalidWitness("guess outside domain"));
    }
    let u = second_generator();

    let mut branches = Vec::with_capacity(n);
    let mut c_sum = Scalar::ZERO;
    let mut real_t_sk = Scalar::ZERO;
    let mut real_t_rho = Scalar::ZERO;
    for i in 0..n as u64 {
        let h = guess_base(i, ell).expect("bit length validated");
        if i == y {
            let t_sk = random_nonzero_scalar(rng);
            let t_rho = random_nonzero_scalar(rng);
            branches.push(OrWfBranch {
                m: h * sk,
                a1: base_mul(&t_sk),
                a2: h * t_sk,
                a3: u * t_rho,
                a4: base_mul(&t_rho),
                c: Scalar::ZERO,
                z_sk: Scalar::ZERO,
                z_rho: Scalar::ZERO,
            });
            real_t_sk = t_sk;
            real_t_rho = t_rho;
        } else {
            let c = Scalar::random(rng);
            let z_sk = Scalar::random(rng);
            let z_rho = Scalar::random(rng);
            let m = h * random_nonzero_scalar(rng);
            branches.push(OrWfBranch {
                m,
                a1: Point::vartime_double_scalar_mul_basepoint(&-c, pk, &z_sk),
                a2: h * z_sk - m * c,
                a3: u * z_rho - u_cap * c,
                a4: base_mul(&z_rho) - (v_cap - m) * c,
                c,
                z_sk,
                z_rho,
            });
            c_sum += c;
        }
    }

    let c_global = orwf_challenge(pk, u_cap, v_cap, ell, &branches, ctx);
    let real = &mut branches[y as usize];
    real.c = c_global - c_sum;
    real.z_sk = real_t_sk + real.c * sk;
    real.z_rho = real_t_rho + real.c * rho;
    Ok(OrWfProof { branches })
}

pub fn verify_orwf(
    pk: &Point,
    u_cap: &Point,
    v_cap: &Point,
    ell: u32,
    proof: &OrWfProof,
    ctx: &Transcript,
) -> bool {
    if check_ell(ell).is_err() {
        return false;
    }
    let n = 1usize << ell;
    if proof.branches.len() != n {
        return false;
    }
    let c_global = orwf_challenge(pk, u_cap, v_cap, ell, &proof.branches, ctx);
    let c_sum: Scalar = proof.branches.iter().map(|b| b.c).sum();
    if c_sum != c_global {
        return false;
    }

    let u = second_generator();
    let mut weights = crate::proofs::or_guess::weight_stream(&[
        b"or-wf",
        &crate::group::point_to_bytes(pk),
        &crate::group::point_to_bytes(u_cap),
        &crate::group::point_to_bytes(v_cap),
        &proof.to_bytes(),
    ]);

    // Folded equations, per branch:
    //   eq1: g^z_sk  = a1 * pk^c      eq2: h^z_sk  = a2 * M^c
    //   eq3: u^z_rho = a3 * U^c       eq4: g^z_rho = a4 * (V / M)^c
    let mut scalars = Vec::with_capacity(6 * n + 5);
    let mut points = Vec::with_capacity(6 * n + 5);
    let mut g_coeff = Scalar::ZERO;
    let mut u_coeff = Scalar::ZERO;
    let mut pk_coeff = Scalar::ZERO;
    let mut ucap_coeff = Scalar::ZERO;
    let mut vcap_coeff = Scalar::ZERO;
    for (i, br) in proof.branches.iter().enumerate() {
        let h = guess_base(i as u64, ell).expect("bit length validated");
        let (w1, w2, w3, w4) = (
            weights.next_weight(),
            weights.next_weight(),
            weights.next_weight(),
            weights.next_weight(),
        );
        g_coeff += w1 * br.z_sk + w4 * br.z_rho;
        u_coeff += w3 * br.z_rho;
        pk_coeff -= w1 * br.c;
        ucap_coeff -= w3 * br.c;
        vcap_coeff -= w4 * br.c;
        scalars.push(-w1);
        points.push(br.a1);
        scalars.push(-w2);
        points.push(br.a2);
        scalars.push(-w3);
        points.push(br.a3);
        scalars.push(-w4);
        points.push(br.a4);
        scalars.push(w4 * br.c - w2 * br.c);
        points.push(br.m);
        scalars.push(w2 * br.z_sk);
        points.push(h);
    }
    scalars.push(g_coeff);
    points.push(base_mul(&Scalar::ONE));
    scalars.push(u_coeff);
    points.push(u);
    scalars.push(pk_coeff);
    points.push(*pk);
    scalars.push(ucap_coeff);
    points.push(*u_cap);
    scalars.push(vcap_coeff);
    points.push(*v_cap);

    Point::vartime_multiscalar_mul(scalars.iter(), points.iter()) == crate::group::identity()
}

impl OrWfProof {
    pub(crate) fn encode_into(&self, out: &mut Vec<u8>) {
        wire::put_u32(out, self.branches.len() as u32);
        for br in &self.branches {
            wire::put_point(out, &br.m);
            wire::put_point(out, &br.a1);
            wire::put_point(out, &br.a2);
            wire::put_point(out, &br.a3);
            wire::put_point(out, &br.a4);
            wire::put_scalar(out, &br.c);
            wire::put_scalar(out, &br.z_sk);
            wire::put_scalar(out, &br.z_rho);
        }
    }

    pub(crate) fn decode(r: &mut Reader) -> Option<OrWfProof> {
        let n = r.u32()? as usize;
        if n == 0 || n > 1 << MAX_ELL {
            return None;
        }
        let mut branches = Vec::with_capacity(n);
        for _ in 0..n {
            branches.push(OrWfBranch {
                m: r.point()?,
                a1: r.point()?,
                a2: r.point()?,
                a3: r.point()?,
                a4: r.point()?,
                c: r.scalar()?,
                z_sk: r.scalar()?,
                z_rho: r.scalar()?,
            });
        }
        Some(OrWfProof { branches })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![TAG_OR_WF];
        self.encode_into(&mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<OrWfProof> {
        let mut r = Reader::new(bytes);
        if r.u8()? != TAG_OR_WF {
            return None;
        }
        let proof = Self::decode(&mut r)?;
        r.finish()?;
        Some(proof)
    }
}

/// Proof for the hidden-base relation: given `X = h * g^rho`, `Y = h^alpha`,
/// `U_rho = u^rho`, `U_alpha = u^alpha` and `T_u = u^(rho * alpha)`, the
/// prover knows `(rho, alpha)` making all five hold for some base `h`. The
/// auxiliary point `T_g = g^(rho * alpha)` travels with the proof. Three
/// equal-exponent subproofs share one challenge:
/// `alpha` over `(u, U_rho) -> (U_alpha, T_u)`, the product `rho * alpha`
/// over `(u, g) -> (T_u, T_g)`, and `alpha` over `(u, X) -> (U_alpha, Y * T_g)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HiddenBaseProof {
    pub t_g: Point,
    pub a11: Point,
    pub a12: Point,
    pub a21: Point,
    pub a22: Point,
    pub a31: Point,
    pub a32: Point,
    pub z1: Scalar,
    pub z2: Scalar,
    pub z3: Scalar,
}

#[allow(clippy::too_many_arguments)]
fn hidden_challenge(
    x_cap: &Point,
    y_cap: &Point,
    u_rho: &Point,
    u_alpha: &Point,
    t_u: &Point,
    proof_head: &[&Point; 7],
    ctx: &Transcript,
) -> Scalar {
    let mut t = ctx.fork(b"hidden-base");
    t.absorb_point(b"X", x_cap);
    t.absorb_point(b"Y", y_cap);
    t.absorb_point(b"U-rho", u_rho);
    t.absorb_point(b"U-alpha", u_alpha);
    t.absorb_point(b"T-u", t_u);
    for (tag, p) in [b"T-g" as &[u8], b"a11", b"a12", b"a21", b"a22", b"a31", b"a32"]
        .into_iter()
        .zip(proof_head.iter())
    {
        t.absorb_point(tag, p);
    }
    t.challenge()
}

#[allow(clippy::too_many_arguments)]
pub fn prove_hidden_base<R: RngCore + CryptoRng>(
    x_cap: &Point,
    y_cap: &Point,
    u_rho: &Point,
    u_alpha: &Point,
    t_u: &Point,
    rho: &Scalar,
    alpha: &Scalar,
    ctx: &Transcript,
    rng: &mut R,
) -> HiddenBaseProof {
    let u = second_generator();
    let delta = rho * alpha;
    let t_g = base_mul(&delta);
    let r1 = random_nonzero_scalar(rng);
    let r2 = random_nonzero_scalar(rng);
    let r3 = random_nonzero_scalar(rng);
    let a11 = u * r1;
    let a12 = u_rho * r1;
    let a21 = u * r2;
    let a22 = base_mul(&r2);
    let a31 = u * r3;
    let a32 = x_cap * r3;
    let c = hidden_challenge(
        x_cap,
        y_cap,
        u_rho,
        u_alpha,
        t_u,
        &[&t_g, &a11, &a12, &a21, &a22, &a31, &a32],
        ctx,
    );
    HiddenBaseProof {
        t_g,
        a11,
        a12,
        a21,
        a22,
        a31,
        a32,
        z1: r1 + c * alpha,
        z2: r2 + c * delta,
        z3: r3 + c * alpha,
    }
}

pub fn verify_hidden_base(
    x_cap: &Point,
    y_cap: &Point,
    u_rho: &Point,
    u_alpha: &Point,
    t_u: &Point,
    proof: &HiddenBaseProof,
    ctx: &Transcript,
) -> bool {
    let u = second_generator();
    let c = hidden_challenge(
        x_cap,
        y_cap,
        u_rho,
        u_alpha,
        t_u,
        &[
            &proof.t_g, &proof.a11, &proof.a12, &proof.a21, &proof.a22, &proof.a31, &proof.a32,
        ],
        ctx,
    );
    u * proof.z1 == proof.a11 + u_alpha * c
        && u_rho * proof.z1 == proof.a12 + t_u * c
        && u * proof.z2 == proof.a21 + t_u * c
        && base_mul(&proof.z2) == proof.a22 + proof.t_g * c
        && u * proof.z3 == proof.a31 + u_alpha * c
        && x_cap * proof.z3 == proof.a32 + (y_cap + proof.t_g) * c
}

impl HiddenBaseProof {
    pub(crate) fn encode_into(&self, out: &mut Vec<u8>) {
        for p in [
            &self.t_g, &self.a11, &self.a12, &self.a21, &self.a22, &self.a31, &self.a32,
        ] {
            wire::put_point(out, p);
        }
        for s in [&self.z1, &self.z2, &self.z3] {
            wire::put_scalar(out, s);
        }
    }

    pub(crate) fn decode(r: &mut Reader) -> Option<HiddenBaseProof> {
        Some(HiddenBaseProof {
            t_g: r.point()?,
            a11: r.point()?,
            a12: r.point()?,
            a21: r.point()?,
            a22: r.point()?,
            a31: r.point()?,
            a32: r.point()?,
            z1: r.scalar()?,
            z2: r.scalar()?,
            z3: r.scalar()?,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![TAG_HIDDEN];
        self.encode_into(&mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<HiddenBaseProof> {
        let mut r = Reader::new(bytes);
        if r.u8()? != TAG_HIDDEN {
            return None;
        }
        let proof = Self::decode(&mut r)?;
        r.finish()?;
        Some(proof)
    }
}

/// Equal discrete log across the two fixed generators: `P = u^w`, `Q = g^w`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DualBaseEqProof {
    pub a_u: Point,
    pub a_g: Point,
    pub z: Scalar,
}

fn base_eq_challenge(p: &Point, q: &Point, a_u: &Point, a_g: &Point, ctx: &Transcript) -> Scalar {
    let mut t = ctx.fork(b"base-eq");
    t.absorb_point(b"P", p);
    t.absorb_point(b"Q", q);
    t.absorb_point(b"a-u", a_u);
    t.absorb_point(b"a-g", a_g);
    t.challenge()
}

pub fn prove_base_eq<R: RngCore + CryptoRng>(
    p: &Point,
    q: &Point,
    w: &Scalar,
    ctx: &Transcript,
    rng: &mut R,
) -> DualBaseEqProof {
    let u = second_generator();
    let r = random_nonzero_scalar(rng);
    let a_u = u * r;
    let a_g = base_mul(&r);
    let c = base_eq_challenge(p, q, &a_u, &a_g, ctx);
    DualBaseEqProof { a_u, a_g, z: r + c * w }
}

pub fn verify_base_eq(p: &Point, q: &Point, proof: &DualBaseEqProof, ctx: &Transcript) -> bool {
    let u = second_generator();
    let c = base_eq_challenge(p, q, &proof.a_u, &proof.a_g, ctx);
    u * proof.z == proof.a_u + p * c && base_mul(&proof.z) == proof.a_g + q * c
}

impl DualBaseEqProof {
    pub(crate) fn encode_into(&self, out: &mut Vec<u8>) {
        wire::put_point(out, &self.a_u);
        wire::put_point(out, &self.a_g);
        wire::put_scalar(out, &self.z);
    }

    pub(crate) fn decode(r: &mut Reader) -> Option<DualBaseEqProof> {
        Some(DualBaseEqProof { a_u: r.point()?, a_g: r.point()?, z: r.scalar()? })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![TAG_BASE_EQ];
        self.encode_into(&mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<DualBaseEqProof> {
        let mut r = Reader::new(bytes);
        if r.u8()? != TAG_BASE_EQ {
            return None;
        }
        let proof = Self::decode(&mut r)?;
        r.finish()?;
        Some(proof)
    }
}

/// Opening of a checked instance in the aggregated argument: no per-instance
/// OR proof, just the blinding and the element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchedOpened {
    pub r: Scalar,
    pub t: Point,
}

/// Aggregated counterpart of
/// [`CutChooseProof`](crate::proofs::cut_choose::CutChooseProof).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchedYwinProof {
    pub commitments: Vec<InstanceCommitment>,
    pub opened: BTreeMap<usize, BatchedOpened>,
    pub unopened: BTreeMap<usize, UnopenedReveal>,
    pub u_cap: Point,
    pub v_cap: Point,
    pub or_wf: OrWfProof,
    pub u_alpha: Point,
    pub t_u: Point,
    pub hidden: HiddenBaseProof,
    pub link: DualBaseEqProof,
}

/// Extends the commit transcript with the opened reveals and the shared
/// commitment pair; the aggregation weights and all sub-proof contexts are
/// derived from the result.
fn absorb_batched_head(
    t: &mut Transcript,
    opened: &BTreeMap<usize, BatchedOpened>,
    u_cap: &Point,
    v_cap: &Point,
) {
    for (&j, inst) in opened {
        t.absorb_u64(b"opened", j as u64);
        t.absorb_scalar(b"r", &inst.r);
        t.absorb_point(b"T", &inst.t);
    }
    t.absorb_point(b"U", u_cap);
    t.absorb_point(b"V", v_cap);
}

pub fn prove_ywin_batched<R: RngCore + CryptoRng>(
    kp: &OprfKeyPair,
    y_tgt: u64,
    w_win: &Scalar,
    ell: u32,
    ctx: &Transcript,
    rng: &mut R,
) -> Result<BatchedYwinProof, ProofError> {
    check_ell(ell)?;
    if y_tgt >= 1u64 << ell {
        return Err(ProofError::InvalidWitness("target guess outside domain"));
    }
    let lambda = kp.alphas.len();
    if lambda < 2 || lambda % 2 != 0 {
        return Err(ProofError::InvalidParameter(
            "instance count must be even and at least 2",
        ));
    }
    let u = second_generator();
    let y_win = base_mul(w_win);
    let target_base = guess_base(y_tgt, ell).expect("domain checked");
    let (commitments, blindings, elements) = commit_instances(kp, &target_base, rng);
    let mut t = commit_transcript(b"ywin-batched", &kp.public, &y_win, ell, &commitments, ctx);
    let subset = t
        .subset(lambda, lambda / 2)
        .map_err(|_| ProofError::InvalidParameter("subset derivation failed"))?;

    let mut opened = BTreeMap::new();
    for &j in &subset {
        opened.insert(j, BatchedOpened { r: blindings[j - 1], t: elements[j - 1] });
    }
    let mut unopened = BTreeMap::new();
    for k in 1..=lambda {
        if !opened.contains_key(&k) {
            unopened.insert(
                k,
                UnopenedReveal { alpha: kp.alphas[k - 1], s: blindings[k - 1] + w_win },
            );
        }
    }

    let rho = random_nonzero_scalar(rng);
    let u_cap = u * rho;
    let v_cap = target_base * kp.sk + base_mul(&rho);
    absorb_batched_head(&mut t, &opened, &u_cap, &v_cap);

    let or_wf = prove_orwf(
        &kp.public.x,
        &u_cap,
        &v_cap,
        ell,
        &kp.sk,
        &rho,
        y_tgt,
        &t.fork(b"orwf"),
        rng,
    )?;
    t.absorb(b"orwf-bytes", &or_wf.to_bytes());

    // Aggregation weights bind every committed element and the shared pair.
    let weights = t.challenge_scalars(subset.len());
    let mut alpha_bar = Scalar::ZERO;
    let mut t_points = Vec::with_capacity(subset.len());
    let mut a_points = Vec::with_capacity(subset.len());
    for (&j, w) in subset.iter().zip(weights.iter()) {
        alpha_bar += w * kp.alphas[j - 1];
        t_points.push(elements[j - 1]);
        a_points.push(kp.public.a[j - 1]);
    }
    let t_bar = Point::vartime_multiscalar_mul(weights.iter(), t_points.iter());
    let a_bar = Point::vartime_multiscalar_mul(weights.iter(), a_points.iter());

    let u_alpha = u * alpha_bar;
    let t_u = u * (rho * alpha_bar);
    let hidden = prove_hidden_base(
        &v_cap,
        &t_bar,
        &u_cap,
        &u_alpha,
        &t_u,
        &rho,
        &alpha_bar,
        &t.fork(b"hidden"),
        rng,
    );
    let link = prove_base_eq(&u_alpha, &a_bar, &alpha_bar, &t.fork(b"link"), rng);

    Ok(BatchedYwinProof {
        commitments,
        opened,
        unopened,
        u_cap,
        v_cap,
        or_wf,
        u_alpha,
        t_u,
        hidden,
        link,
    })
}

pub fn verify_ywin_batched(
    pk: &OprfPublicKey,
    y_win: &Point,
    ell: u32,
    proof: &BatchedYwinProof,
    ctx: &Transcript,
) -> bool {
    let lambda = pk.lambda();
    if check_ell(ell).is_err()
        || lambda < 2
        || lambda % 2 != 0
        || proof.commitments.len() != lambda
    {
        return false;
    }
    if proof
        .commitments
        .iter()
        .zip(pk.a.iter())
        .any(|(cm, a)| cm.a != *a)
    {
        return false;
    }

    let mut t = commit_transcript(b"ywin-batched", pk, y_win, ell, &proof.commitments, ctx);
    let subset = match t.subset(lambda, lambda / 2) {
        Ok(s) => s,
        Err(_) => return false,
    };
    if proof.opened.len() != subset.len()
        || !subset.iter().all(|j| proof.opened.contains_key(j))
        || proof.opened.len() + proof.unopened.len() != lambda
        || proof.unopened.keys().any(|k| proof.opened.contains_key(k))
    {
        return false;
    }

    let pk_bytes = pk.to_bytes();
    for (&j, inst) in &proof.opened {
        let cm = &proof.commitments[j - 1];
        if base_mul(&inst.r) != cm.big_r
            || finalize_element(&pk_bytes, &inst.t) + inst.r != cm.c
        {
            return false;
        }
    }
    for (&k, reveal) in &proof.unopened {
        if k == 0 || k > lambda {
            return false;
        }
        let cm = &proof.commitments[k - 1];
        if base_mul(&reveal.s) != y_win + cm.big_r
            || base_mul(&reveal.alpha) != cm.a
        {
            return false;
        }
    }

    absorb_batched_head(&mut t, &proof.opened, &proof.u_cap, &proof.v_cap);
    if !verify_orwf(
        &pk.x,
        &proof.u_cap,
        &proof.v_cap,
        ell,
        &proof.or_wf,
        &t.fork(b"orwf"),
    ) {
        return false;
    }
    t.absorb(b"orwf-bytes", &proof.or_wf.to_bytes());

    let weights = t.challenge_scalars(subset.len());
    let mut t_points = Vec::with_capacity(subset.len());
    let mut a_points = Vec::with_capacity(subset.len());
    for &j in &subset {
        t_points.push(proof.opened[&j].t);
        a_points.push(pk.a[j - 1]);
    }
    let t_bar = Point::vartime_multiscalar_mul(weights.iter(), t_points.iter());
    let a_bar = Point::vartime_multiscalar_mul(weights.iter(), a_points.iter());

    verify_hidden_base(
        &proof.v_cap,
        &t_bar,
        &proof.u_cap,
        &proof.u_alpha,
        &proof.t_u,
        &proof.hidden,
        &t.fork(b"hidden"),
    ) && verify_base_eq(&proof.u_alpha, &a_bar, &proof.link, &t.fork(b"link"))
}

impl BatchedYwinProof {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![TAG_BATCHED];
        wire::put_u32(&mut out, self.commitments.len() as u32);
        for cm in &self.commitments {
            wire::put_scalar(&mut out, &cm.c);
            wire::put_point(&mut out, &cm.big_r);
            wire::put_point(&mut out, &cm.a);
        }
        wire::put_u32(&mut out, self.opened.len() as u32);
        for (&j, inst) in &self.opened {
            wire::put_u32(&mut out, j as u32);
            wire::put_scalar(&mut out, &inst.r);
            wire::put_point(&mut out, &inst.t);
        }
        wire::put_u32(&mut out, self.unopened.len() as u32);
        for (&k, reveal) in &self.unopened {
            wire::put_u32(&mut out, k as u32);
            wire::put_scalar(&mut out, &reveal.alpha);
            wire::put_scalar(&mut out, &reveal.s);
        }
        wire::put_point(&mut out, &self.u_cap);
        wire::put_point(&mut out, &self.v_cap);
        self.or_wf.encode_into(&mut out);
        wire::put_point(&mut out, &self.u_alpha);
        wire::put_point(&mut out, &self.t_u);
        self.hidden.encode_into(&mut out);
        self.link.encode_into(&mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<BatchedYwinProof> {
        let mut r = Reader::new(bytes);
        if r.u8()? != TAG_BATCHED {
            return None;
        }
        let lambda = r.u32()? as usize;
        if lambda == 0 || lambda > 4096 {
            return None;
        }
        let mut commitments = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            commitments.push(InstanceCommitment {
                c: r.scalar()?,
                big_r: r.point()?,
                a: r.point()?,
            });
        }
        let opened_len = r.u32()? as usize;
        let mut opened = BTreeMap::new();
        let mut prev = 0usize;
        for _ in 0..opened_len {
            let j = r.u32()? as usize;
            if j <= prev || j > lambda {
                return None;
            }
            prev = j;
            opened.insert(j, BatchedOpened { r: r.scalar()?, t: r.point()? });
        }
        let unopened_len = r.u32()? as usize;
        if opened_len + unopened_len != lambda {
            return None;
        }
        let mut unopened = BTreeMap::new();
        prev = 0;
        for _ in 0..unopened_len {
            let k = r.u32()? as usize;
            if k <= prev || k > lambda || opened.contains_key(&k) {
                return None;
            }
            prev = k;
            unopened.insert(k, UnopenedReveal { alpha: r.scalar()?, s: r.scalar()? });
        }
        let proof = BatchedYwinProof {
            commitments,
            opened,
            unopened,
            u_cap: r.point()?,
            v_cap: r.point()?,
            or_wf: OrWfProof::decode(&mut r)?,
            u_alpha: r.point()?,
            t_u: r.point()?,
            hidden: HiddenBaseProof::decode(&mut r)?,
            link: DualBaseEqProof::decode(&mut r)?,
        };
        r.finish()?;
        Some(proof)
    }
}

/// Witness candidates, identical in shape to the per-instance variant.
pub fn witness_candidates_batched(
    proof: &BatchedYwinProof,
    finalized: &BTreeMap<usize, Scalar>,
) -> BTreeMap<usize, Scalar> {
    let mut out = BTreeMap::new();
    for (&k, reveal) in &proof.unopened {
        let Some(h_k) = finalized.get(&k) else { continue };
        let Some(cm) = proof.commitments.get(k - 1) else { continue };
        out.insert(k, reveal.s - cm.c + h_k);
    }
    out
}

pub fn recover_witness_batched(
    proof: &BatchedYwinProof,
    y_win: &Point,
    finalized: &BTreeMap<usize, Scalar>,
) -> Option<Scalar> {
    witness_candidates_batched(proof, finalized)
        .into_values()
        .find(|w| base_mul(w) == *y_win)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::hash_to_group;
    use crate::oprf::{eval, oprf_keygen};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn ctx() -> Transcript {
        Transcript::new(b"batched-tests")
    }

    #[test]
    fn orwf_proves_all_positions() {
        let mut rng = ChaCha20Rng::seed_from_u64(30);
        let sk = crate::group::random_nonzero_scalar(&mut rng);
        let pk = base_mul(&sk);
        let u = second_generator();
        for ell in [1u32, 2] {
            for y in 0..1u64 << ell {
                let rho = crate::group::random_nonzero_scalar(&mut rng);
                let u_cap = u * rho;
                let v_cap = guess_base(y, ell).unwrap() * sk + base_mul(&rho);
                let proof =
                    prove_orwf(&pk, &u_cap, &v_cap, ell, &sk, &rho, y, &ctx(), &mut rng).unwrap();
                assert!(verify_orwf(&pk, &u_cap, &v_cap, ell, &proof, &ctx()));
                assert!(!verify_orwf(&pk, &u_cap, &v_cap, ell, &proof, &Transcript::new(b"o")));
                let bad_v = v_cap + base_mul(&Scalar::ONE);
                assert!(!verify_orwf(&pk, &u_cap, &bad_v, ell, &proof, &ctx()));
            }
        }
    }

    #[test]
    fn orwf_rejects_out_of_domain_base() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let sk = crate::group::random_nonzero_scalar(&mut rng);
        let rho = crate::group::random_nonzero_scalar(&mut rng);
        let u_cap = second_generator() * rho;
        let v_cap = hash_to_group(b"rogue") * sk + base_mul(&rho);
        let proof = prove_orwf(&base_mul(&sk), &u_cap, &v_cap, 2, &sk, &rho, 0, &ctx(), &mut rng)
            .unwrap();
        assert!(!verify_orwf(&base_mul(&sk), &u_cap, &v_cap, 2, &proof, &ctx()));
    }

    #[test]
    fn hidden_base_relation_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(32);
        let u = second_generator();
        let h = hash_to_group(b"some base") * crate::group::random_nonzero_scalar(&mut rng);
        let rho = crate::group::random_nonzero_scalar(&mut rng);
        let alpha = crate::group::random_nonzero_scalar(&mut rng);
        let x_cap = h + base_mul(&rho);
        let y_cap = h * alpha;
        let u_rho = u * rho;
        let u_alpha = u * alpha;
        let t_u = u * (rho * alpha);
        let proof =
            prove_hidden_base(&x_cap, &y_cap, &u_rho, &u_alpha, &t_u, &rho, &alpha, &ctx(), &mut rng);
        assert!(verify_hidden_base(&x_cap, &y_cap, &u_rho, &u_alpha, &t_u, &proof, &ctx()));

        let bad_y = y_cap + base_mul(&Scalar::ONE);
        assert!(!verify_hidden_base(&x_cap, &bad_y, &u_rho, &u_alpha, &t_u, &proof, &ctx()));
    }

    #[test]
    fn hidden_base_degenerate_identity_base_verifies() {
        // h equal to the identity makes X a plain g-power; the relation still
        // holds and the proof must accept.
        let mut rng = ChaCha20Rng::seed_from_u64(33);
        let u = second_generator();
        let rho = crate::group::random_nonzero_scalar(&mut rng);
        let alpha = crate::group::random_nonzero_scalar(&mut rng);
        let x_cap = base_mul(&rho);
        let y_cap = crate::group::identity();
        let proof = prove_hidden_base(
            &x_cap,
            &y_cap,
            &(u * rho),
            &(u * alpha),
            &(u * (rho * alpha)),
            &rho,
            &alpha,
            &ctx(),
            &mut rng,
        );
        assert!(verify_hidden_base(
            &x_cap,
            &y_cap,
            &(u * rho),
            &(u * alpha),
            &(u * (rho * alpha)),
            &proof,
            &ctx()
        ));
    }

    #[test]
    fn base_eq_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(34);
        let w = crate::group::random_nonzero_scalar(&mut rng);
        let p = second_generator() * w;
        let q = base_mul(&w);
        let proof = prove_base_eq(&p, &q, &w, &ctx(), &mut rng);
        assert!(verify_base_eq(&p, &q, &proof, &ctx()));
        assert!(!verify_base_eq(&q, &p, &proof, &ctx()));
    }

    #[test]
    fn batched_argument_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(35);
        for (lambda, ell) in [(4usize, 1u32), (6, 2), (8, 3)] {
            let kp = oprf_keygen(lambda, &mut rng).unwrap();
            let w = crate::group::random_nonzero_scalar(&mut rng);
            let y_tgt = 1u64 % (1 << ell);
            let proof = prove_ywin_batched(&kp, y_tgt, &w, ell, &ctx(), &mut rng).unwrap();
            assert!(verify_ywin_batched(&kp.public, &base_mul(&w), ell, &proof, &ctx()));
            assert!(!verify_ywin_batched(
                &kp.public,
                &base_mul(&(w + Scalar::ONE)),
                ell,
                &proof,
                &ctx()
            ));
        }
    }

    #[test]
    fn batched_refuses_out_of_domain_target() {
        let mut rng = ChaCha20Rng::seed_from_u64(36);
        let kp = oprf_keygen(4, &mut rng).unwrap();
        let w = crate::group::random_nonzero_scalar(&mut rng);
        assert!(matches!(
            prove_ywin_batched(&kp, 8, &w, 3, &ctx(), &mut rng),
            Err(ProofError::InvalidWitness(_))
        ));
    }

    #[test]
    fn batched_witness_recovery_matches_per_instance_semantics() {
        let mut rng = ChaCha20Rng::seed_from_u64(37);
        let kp = oprf_keygen(6, &mut rng).unwrap();
        let pk_bytes = kp.public.to_bytes();
        let w = crate::group::random_nonzero_scalar(&mut rng);
        let (ell, y_tgt) = (3u32, 5u64);
        let proof = prove_ywin_batched(&kp, y_tgt, &w, ell, &ctx(), &mut rng).unwrap();
        let y_win = base_mul(&w);

        let mut finalized = BTreeMap::new();
        for (&k, reveal) in &proof.unopened {
            finalized.insert(k, eval(&kp.sk, &reveal.alpha, &pk_bytes, y_tgt, ell).unwrap());
        }
        assert_eq!(recover_witness_batched(&proof, &y_win, &finalized), Some(w));

        let mut wrong = BTreeMap::new();
        for (&k, reveal) in &proof.unopened {
            wrong.insert(k, eval(&kp.sk, &reveal.alpha, &pk_bytes, (y_tgt + 1) % 8, ell).unwrap());
        }
        assert_eq!(recover_witness_batched(&proof, &y_win, &wrong), None);
    }

    #[test]
    fn batched_serialization_roundtrip_and_size() {
        let mut rng = ChaCha20Rng::seed_from_u64(38);
        let (lambda, ell) = (8usize, 2u32);
        let kp = oprf_keygen(lambda, &mut rng).unwrap();
        let w = crate::group::random_nonzero_scalar(&mut rng);
        let proof = prove_ywin_batched(&kp, 2, &w, ell, &ctx(), &mut rng).unwrap();
        let bytes = proof.to_bytes();
        // Layout arithmetic: tag, commitments, opened, unopened, shared pair,
        // OR branches, aggregate points, hidden-base proof, link proof.
        let expected = 1
            + 4 + lambda * 96
            + 4 + (lambda / 2) * 68
            + 4 + (lambda / 2) * 68
            + 64
            + 4 + (1usize << ell) * 256
            + 64
            + 320
            + 96;
        assert_eq!(bytes.len(), expected);
        let decoded = BatchedYwinProof::from_bytes(&bytes).unwrap();
        assert_eq!(decoded, proof);
        assert_eq!(decoded.to_bytes(), bytes);
    }
}
