//! Two-party distributed key generation and pre-signing.
//!
//! Both protocols are message-driven state machines between roles `P0` and
//! `P1`. Key generation is commit-then-reveal: `P0` commits to its share,
//! `P1` reveals first, both prove knowledge of their share, and the joint key
//! is the product. Pre-signing nests the same commit-reveal exchange for the
//! nonce, then exchanges partial responses over the joint challenge; each
//! side checks the assembled pre-signature before accepting, and `P1`
//! accepts one step before `P0`.
//!
//! A failed check aborts the session permanently: an aborted session never
//! emits another message, so no partial or secret escapes after an abort.

use crate::adaptor::{challenge, pvrfy, PreSignature};
use crate::group::{
    base_mul, hash_to_scalar, point_to_bytes, random_nonzero_scalar, scalar_to_bytes, Point,
    Scalar,
};
use crate::proofs::schnorr::{prove_dl, verify_dl, DlProof};
use crate::proofs::wire::Reader;
use crate::transcript::Transcript;
use rand::{CryptoRng, RngCore};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TwoPartyError {
    /// A peer message failed verification; the session is dead.
    #[error("protocol aborted: {0}")]
    AbortProtocol(&'static str),
    /// A message arrived that the current phase does not accept.
    #[error("protocol state violation: {0}")]
    ProtocolState(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    P0,
    P1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DkgPhase {
    Init,
    Committed,
    Revealed,
    Done,
    Aborted,
}

/// Wire messages of the key generation protocol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DkgMsg {
    /// `P0`'s hash commitment to its share.
    Commit { commitment: Scalar },
    /// `P1`'s share and knowledge proof.
    Share { pk: Point, proof: DlProof },
    /// `P0`'s opening: share and knowledge proof.
    Open { pk: Point, proof: DlProof },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DkgOutput {
    pub joint_pk: Point,
    pub sk_share: Scalar,
}

fn share_commitment(pk: &Point) -> Scalar {
    hash_to_scalar(b"dkg-commit", &[&point_to_bytes(pk)])
}

#[derive(Clone, Debug)]
pub struct DkgSession {
    role: Role,
    phase: DkgPhase,
    sk_share: Scalar,
    pk_share: Point,
    ctx: Transcript,
    peer_commitment: Option<Scalar>,
}

impl DkgSession {
    pub fn phase(&self) -> DkgPhase {
        self.phase
    }

    pub fn role(&self) -> Role {
        self.role
    }
}

/// Starts a key generation session. `P0` emits its commitment immediately;
/// `P1` emits nothing until the commitment arrives.
pub fn dkg_start<R: RngCore + CryptoRng>(
    role: Role,
    ctx: &Transcript,
    rng: &mut R,
) -> (DkgSession, Option<DkgMsg>) {
    let sk_share = random_nonzero_scalar(rng);
    let pk_share = base_mul(&sk_share);
    let session_ctx = ctx.fork(b"dkg");
    match role {
        Role::P0 => {
            let commitment = share_commitment(&pk_share);
            let session = DkgSession {
                role,
                phase: DkgPhase::Committed,
                sk_share,
                pk_share,
                ctx: session_ctx,
                peer_commitment: Some(commitment),
            };
            (session, Some(DkgMsg::Commit { commitment }))
        }
        Role::P1 => {
            let session = DkgSession {
                role,
                phase: DkgPhase::Init,
                sk_share,
                pk_share,
                ctx: session_ctx,
                peer_commitment: None,
            };
            (session, None)
        }
    }
}

/// Proof context for `P1`'s share, bound to the commitment.
fn share_proof_ctx(ctx: &Transcript, commitment: &Scalar) -> Transcript {
    let mut t = ctx.fork(b"share");
    t.absorb_scalar(b"commitment", commitment);
    t
}

/// Proof context for `P0`'s opening, bound to the commitment and `P1`'s
/// share.
fn open_proof_ctx(ctx: &Transcript, commitment: &Scalar, peer_pk: &Point) -> Transcript {
    let mut t = ctx.fork(b"open");
    t.absorb_scalar(b"commitment", commitment);
    t.absorb_point(b"peer-pk", peer_pk);
    t
}

/// Advances a session with one inbound message. Returns the outbound message
/// and, once the exchange completes, the joint key output.
pub fn dkg_step<R: RngCore + CryptoRng>(
    session: &mut DkgSession,
    msg: &DkgMsg,
    rng: &mut R,
) -> Result<(Option<DkgMsg>, Option<DkgOutput>), TwoPartyError> {
    match (session.role, session.phase, msg) {
        (Role::P1, DkgPhase::Init, DkgMsg::Commit { commitment }) => {
            session.peer_commitment = Some(*commitment);
            let proof_ctx = share_proof_ctx(&session.ctx, commitment);
            let proof = prove_dl(&session.pk_share, &session.sk_share, &proof_ctx, rng);
            session.phase = DkgPhase::Revealed;
            Ok((Some(DkgMsg::Share { pk: session.pk_share, proof }), None))
        }
        (Role::P0, DkgPhase::Committed, DkgMsg::Share { pk, proof }) => {
            let commitment = session.peer_commitment.expect("set at start");
            let proof_ctx = share_proof_ctx(&session.ctx, &commitment);
            if !verify_dl(pk, proof, &proof_ctx) {
                session.phase = DkgPhase::Aborted;
                return Err(TwoPartyError::AbortProtocol("share proof invalid"));
            }
            let open_ctx = open_proof_ctx(&session.ctx, &commitment, pk);
            let own_proof = prove_dl(&session.pk_share, &session.sk_share, &open_ctx, rng);
            session.phase = DkgPhase::Done;
            Ok((
                Some(DkgMsg::Open { pk: session.pk_share, proof: own_proof }),
                Some(DkgOutput {
                    joint_pk: session.pk_share + pk,
                    sk_share: session.sk_share,
                }),
            ))
        }
        (Role::P1, DkgPhase::Revealed, DkgMsg::Open { pk, proof }) => {
            let commitment = session.peer_commitment.expect("set on commit");
            if share_commitment(pk) != commitment {
                session.phase = DkgPhase::Aborted;
                return Err(TwoPartyError::AbortProtocol("commitment opening mismatch"));
            }
            let open_ctx = open_proof_ctx(&session.ctx, &commitment, &session.pk_share);
            if !verify_dl(pk, proof, &open_ctx) {
                session.phase = DkgPhase::Aborted;
                return Err(TwoPartyError::AbortProtocol("opening proof invalid"));
            }
            session.phase = DkgPhase::Done;
            Ok((
                None,
                Some(DkgOutput {
                    joint_pk: session.pk_share + pk,
                    sk_share: session.sk_share,
                }),
            ))
        }
        (_, DkgPhase::Aborted, _) => Err(TwoPartyError::ProtocolState("session aborted")),
        (_, DkgPhase::Done, _) => Err(TwoPartyError::ProtocolState("session complete")),
        _ => Err(TwoPartyError::ProtocolState("message out of order")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PresignPhase {
    Init,
    NonceCommitted,
    NonceRevealed,
    Done,
    Aborted,
}

/// Wire messages of the pre-signing protocol. The nonce agreement mirrors
/// key generation; `P0`'s opening carries its partial response so the whole
/// exchange stays strictly alternating.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PresignMsg {
    NonceCommit { commitment: Scalar },
    NonceShare { nonce_pk: Point, proof: DlProof },
    NonceOpen { nonce_pk: Point, proof: DlProof, partial: Scalar },
    Partial { partial: Scalar },
}

#[derive(Clone, Debug)]
pub struct PresignSession {
    role: Role,
    phase: PresignPhase,
    sk_share: Scalar,
    joint_pk: Point,
    msg: Vec<u8>,
    statement: Point,
    ctx: Transcript,
    nonce_share: Scalar,
    nonce_pk: Point,
    nonce_commitment: Option<Scalar>,
    peer_nonce_pk: Option<Point>,
    own_partial: Option<Scalar>,
}

impl PresignSession {
    pub fn phase(&self) -> PresignPhase {
        self.phase
    }

    pub fn role(&self) -> Role {
        self.role
    }
}

/// Starts a pre-signing session over `msg` for the adaptor statement
/// `statement`, producing shares of a pre-signature under `joint_pk`.
pub fn presign_start<R: RngCore + CryptoRng>(
    role: Role,
    sk_share: &Scalar,
    joint_pk: &Point,
    msg: &[u8],
    statement: &Point,
    ctx: &Transcript,
    rng: &mut R,
) -> (PresignSession, Option<PresignMsg>) {
    let mut session_ctx = ctx.fork(b"presign");
    session_ctx.absorb_point(b"joint-pk", joint_pk);
    session_ctx.absorb_point(b"statement", statement);
    session_ctx.absorb(b"msg", msg);

    let nonce_share = random_nonzero_scalar(rng);
    let nonce_pk = base_mul(&nonce_share);
    let mut session = PresignSession {
        role,
        phase: PresignPhase::Init,
        sk_share: *sk_share,
        joint_pk: *joint_pk,
        msg: msg.to_vec(),
        statement: *statement,
        ctx: session_ctx,
        nonce_share,
        nonce_pk,
        nonce_commitment: None,
        peer_nonce_pk: None,
        own_partial: None,
    };
    match role {
        Role::P0 => {
            let commitment = share_commitment(&nonce_pk);
            session.nonce_commitment = Some(commitment);
            session.phase = PresignPhase::NonceCommitted;
            (session, Some(PresignMsg::NonceCommit { commitment }))
        }
        Role::P1 => (session, None),
    }
}

fn nonce_share_ctx(ctx: &Transcript, commitment: &Scalar) -> Transcript {
    let mut t = ctx.fork(b"nonce-share");
    t.absorb_scalar(b"commitment", commitment);
    t
}

fn nonce_open_ctx(ctx: &Transcript, commitment: &Scalar, peer_nonce: &Point) -> Transcript {
    let mut t = ctx.fork(b"nonce-open");
    t.absorb_scalar(b"commitment", commitment);
    t.absorb_point(b"peer-nonce", peer_nonce);
    t
}

/// Assembles the joint pre-signature from a nonce pair and both partials and
/// checks it. The challenge is the ordinary signature challenge over the
/// adapted nonce point.
fn assemble(
    session: &PresignSession,
    joint_nonce: &Point,
    partial_sum: &Scalar,
) -> Option<PreSignature> {
    let rhat = joint_nonce + session.statement;
    let pre = PreSignature { rhat, s_tilde: *partial_sum };
    pvrfy(&session.joint_pk, &session.msg, &session.statement, &pre).then_some(pre)
}

fn own_partial(session: &PresignSession, joint_nonce: &Point) -> Scalar {
    let rhat = joint_nonce + session.statement;
    let c = challenge(&session.joint_pk, &rhat, &session.msg);
    session.sk_share * c + session.nonce_share
}

/// Advances a pre-signing session with one inbound message. `P1` outputs the
/// joint pre-signature when it releases its partial; `P0` outputs one step
/// later, after checking the assembled result.
pub fn presign_step<R: RngCore + CryptoRng>(
    session: &mut PresignSession,
    msg: &PresignMsg,
    rng: &mut R,
) -> Result<(Option<PresignMsg>, Option<PreSignature>), TwoPartyError> {
    match (session.role, session.phase, msg) {
        (Role::P1, PresignPhase::Init, PresignMsg::NonceCommit { commitment }) => {
            session.nonce_commitment = Some(*commitment);
            let proof_ctx = nonce_share_ctx(&session.ctx, commitment);
            let proof = prove_dl(&session.nonce_pk, &session.nonce_share, &proof_ctx, rng);
            session.phase = PresignPhase::NonceCommitted;
            Ok((
                Some(PresignMsg::NonceShare { nonce_pk: session.nonce_pk, proof }),
                None,
            ))
        }
        (Role::P0, PresignPhase::NonceCommitted, PresignMsg::NonceShare { nonce_pk, proof }) => {
            let commitment = session.nonce_commitment.expect("set at start");
            let proof_ctx = nonce_share_ctx(&session.ctx, &commitment);
            if !verify_dl(nonce_pk, proof, &proof_ctx) {
                session.phase = PresignPhase::Aborted;
                return Err(TwoPartyError::AbortProtocol("nonce share proof invalid"));
            }
            session.peer_nonce_pk = Some(*nonce_pk);
            let joint_nonce = session.nonce_pk + nonce_pk;
            let partial = own_partial(session, &joint_nonce);
            session.own_partial = Some(partial);
            let open_ctx = nonce_open_ctx(&session.ctx, &commitment, nonce_pk);
            let own_proof = prove_dl(&session.nonce_pk, &session.nonce_share, &open_ctx, rng);
            session.phase = PresignPhase::NonceRevealed;
            Ok((
                Some(PresignMsg::NonceOpen {
                    nonce_pk: session.nonce_pk,
                    proof: own_proof,
                    partial,
                }),
                None,
            ))
        }
        (
            Role::P1,
            PresignPhase::NonceCommitted,
            PresignMsg::NonceOpen { nonce_pk, proof, partial },
        ) => {
            let commitment = session.nonce_commitment.expect("set on commit");
            if share_commitment(nonce_pk) != commitment {
                session.phase = PresignPhase::Aborted;
                return Err(TwoPartyError::AbortProtocol("nonce opening mismatch"));
            }
            let open_ctx = nonce_open_ctx(&session.ctx, &commitment, &session.nonce_pk);
            if !verify_dl(nonce_pk, proof, &open_ctx) {
                session.phase = PresignPhase::Aborted;
                return Err(TwoPartyError::AbortProtocol("nonce opening proof invalid"));
            }
            let joint_nonce = session.nonce_pk + nonce_pk;
            let own = own_partial(session, &joint_nonce);
            // Check the assembled pre-signature before releasing the partial:
            // an invalid peer contribution aborts with nothing sent.
            let Some(pre) = assemble(session, &joint_nonce, &(own + partial)) else {
                session.phase = PresignPhase::Aborted;
                return Err(TwoPartyError::AbortProtocol("assembled pre-signature invalid"));
            };
            session.phase = PresignPhase::Done;
            Ok((Some(PresignMsg::Partial { partial: own }), Some(pre)))
        }
        (Role::P0, PresignPhase::NonceRevealed, PresignMsg::Partial { partial }) => {
            let joint_nonce =
                session.nonce_pk + session.peer_nonce_pk.expect("set on nonce share");
            let own = session.own_partial.expect("set on nonce share");
            let Some(pre) = assemble(session, &joint_nonce, &(own + partial)) else {
                session.phase = PresignPhase::Aborted;
                return Err(TwoPartyError::AbortProtocol("assembled pre-signature invalid"));
            };
            session.phase = PresignPhase::Done;
            Ok((None, Some(pre)))
        }
        (_, PresignPhase::Aborted, _) => Err(TwoPartyError::ProtocolState("session aborted")),
        (_, PresignPhase::Done, _) => Err(TwoPartyError::ProtocolState("session complete")),
        _ => Err(TwoPartyError::ProtocolState("message out of order")),
    }
}

const TAG_DKG_COMMIT: u8 = 0x10;
const TAG_DKG_SHARE: u8 = 0x11;
const TAG_DKG_OPEN: u8 = 0x12;
const TAG_PS_NONCE_COMMIT: u8 = 0x20;
const TAG_PS_NONCE_SHARE: u8 = 0x21;
const TAG_PS_NONCE_OPEN: u8 = 0x22;
const TAG_PS_PARTIAL: u8 = 0x23;

impl DkgMsg {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            DkgMsg::Commit { commitment } => {
                out.push(TAG_DKG_COMMIT);
                out.extend_from_slice(&scalar_to_bytes(commitment));
            }
            DkgMsg::Share { pk, proof } => {
                out.push(TAG_DKG_SHARE);
                out.extend_from_slice(&point_to_bytes(pk));
                proof.encode_into(&mut out);
            }
            DkgMsg::Open { pk, proof } => {
                out.push(TAG_DKG_OPEN);
                out.extend_from_slice(&point_to_bytes(pk));
                proof.encode_into(&mut out);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<DkgMsg> {
        let mut r = Reader::new(bytes);
        let msg = match r.u8()? {
            TAG_DKG_COMMIT => DkgMsg::Commit { commitment: r.scalar()? },
            TAG_DKG_SHARE => DkgMsg::Share { pk: r.point()?, proof: DlProof::decode(&mut r)? },
            TAG_DKG_OPEN => DkgMsg::Open { pk: r.point()?, proof: DlProof::decode(&mut r)? },
            _ => return None,
        };
        r.finish()?;
        Some(msg)
    }
}

impl PresignMsg {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            PresignMsg::NonceCommit { commitment } => {
                out.push(TAG_PS_NONCE_COMMIT);
                out.extend_from_slice(&scalar_to_bytes(commitment));
            }
            PresignMsg::NonceShare { nonce_pk, proof } => {
                out.push(TAG_PS_NONCE_SHARE);
                out.extend_from_slice(&point_to_bytes(nonce_pk));
                proof.encode_into(&mut out);
            }
            PresignMsg::NonceOpen { nonce_pk, proof, partial } => {
                out.push(TAG_PS_NONCE_OPEN);
                out.extend_from_slice(&point_to_bytes(nonce_pk));
                proof.encode_into(&mut out);
                out.extend_from_slice(&scalar_to_bytes(partial));
            }
            PresignMsg::Partial { partial } => {
                out.push(TAG_PS_PARTIAL);
                out.extend_from_slice(&scalar_to_bytes(partial));
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<PresignMsg> {
        let mut r = Reader::new(bytes);
        let msg = match r.u8()? {
            TAG_PS_NONCE_COMMIT => PresignMsg::NonceCommit { commitment: r.scalar()? },
            TAG_PS_NONCE_SHARE => {
                PresignMsg::NonceShare { nonce_pk: r.point()?, proof: DlProof::decode(&mut r)? }
            }
            TAG_PS_NONCE_OPEN => PresignMsg::NonceOpen {
                nonce_pk: r.point()?,
                proof: DlProof::decode(&mut r)?,
                partial: r.scalar()?,
            },
            TAG_PS_PARTIAL => PresignMsg::Partial { partial: r.scalar()? },
            _ => return None,
        };
        r.finish()?;
        Some(msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptor::{adapt, extract, vrfy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn ctx() -> Transcript {
        Transcript::new(b"twoparty-tests")
    }

    fn run_dkg(rng: &mut ChaCha20Rng) -> (DkgOutput, DkgOutput) {
        let (mut p0, first) = dkg_start(Role::P0, &ctx(), rng);
        let (mut p1, none) = dkg_start(Role::P1, &ctx(), rng);
        assert!(none.is_none());

        let commit = first.expect("P0 commits first");
        let (share, out) = dkg_step(&mut p1, &commit, rng).unwrap();
        assert!(out.is_none());
        let (open, out0) = dkg_step(&mut p0, &share.unwrap(), rng).unwrap();
        let out0 = out0.expect("P0 completes first");
        assert_eq!(p0.phase(), DkgPhase::Done);
        let (none, out1) = dkg_step(&mut p1, &open.unwrap(), rng).unwrap();
        assert!(none.is_none());
        let out1 = out1.expect("P1 completes on opening");
        (out0, out1)
    }

    #[test]
    fn dkg_produces_matching_joint_key() {
        let mut rng = ChaCha20Rng::seed_from_u64(50);
        let (out0, out1) = run_dkg(&mut rng);
        assert_eq!(out0.joint_pk, out1.joint_pk);
        assert_eq!(base_mul(&(out0.sk_share + out1.sk_share)), out0.joint_pk);
    }

    #[test]
    fn dkg_rejects_bad_share_proof() {
        let mut rng = ChaCha20Rng::seed_from_u64(51);
        let (mut p0, first) = dkg_start(Role::P0, &ctx(), &mut rng);
        let (mut p1, _) = dkg_start(Role::P1, &ctx(), &mut rng);
        let (share, _) = dkg_step(&mut p1, &first.unwrap(), &mut rng).unwrap();
        let DkgMsg::Share { pk, mut proof } = share.unwrap() else { panic!() };
        proof.z += Scalar::ONE;
        let err = dkg_step(&mut p0, &DkgMsg::Share { pk, proof }, &mut rng).unwrap_err();
        assert!(matches!(err, TwoPartyError::AbortProtocol(_)));
        assert_eq!(p0.phase(), DkgPhase::Aborted);
        // An aborted session refuses everything, including a now-valid retry.
        let err = dkg_step(&mut p0, &DkgMsg::Share { pk, proof }, &mut rng).unwrap_err();
        assert!(matches!(err, TwoPartyError::ProtocolState(_)));
    }

    #[test]
    fn dkg_rejects_commitment_mismatch() {
        let mut rng = ChaCha20Rng::seed_from_u64(52);
        let (mut p0, first) = dkg_start(Role::P0, &ctx(), &mut rng);
        let (mut p1, _) = dkg_start(Role::P1, &ctx(), &mut rng);
        let (share, _) = dkg_step(&mut p1, &first.unwrap(), &mut rng).unwrap();
        let (open, _) = dkg_step(&mut p0, &share.unwrap(), &mut rng).unwrap();
        let DkgMsg::Open { pk, proof } = open.unwrap() else { panic!() };
        // Substitute a different share at opening time.
        let fake = DkgMsg::Open { pk: pk + base_mul(&Scalar::ONE), proof };
        let err = dkg_step(&mut p1, &fake, &mut rng).unwrap_err();
        assert!(matches!(err, TwoPartyError::AbortProtocol(_)));
    }

    #[test]
    fn dkg_rejects_out_of_order_and_replay() {
        let mut rng = ChaCha20Rng::seed_from_u64(53);
        let (mut p0, first) = dkg_start(Role::P0, &ctx(), &mut rng);
        let commit = first.unwrap();
        // P0 does not accept a commit.
        let err = dkg_step(&mut p0, &commit, &mut rng).unwrap_err();
        assert!(matches!(err, TwoPartyError::ProtocolState(_)));

        let (mut p1, _) = dkg_start(Role::P1, &ctx(), &mut rng);
        let (share, _) = dkg_step(&mut p1, &commit, &mut rng).unwrap();
        // Replayed commit is out of order for P1 now.
        let err = dkg_step(&mut p1, &commit, &mut rng).unwrap_err();
        assert!(matches!(err, TwoPartyError::ProtocolState(_)));

        let (open, _) = dkg_step(&mut p0, &share.unwrap(), &mut rng).unwrap();
        let open = open.unwrap();
        let (_, out) = dkg_step(&mut p1, &open, &mut rng).unwrap();
        assert!(out.is_some());
        let err = dkg_step(&mut p1, &open, &mut rng).unwrap_err();
        assert!(matches!(err, TwoPartyError::ProtocolState(_)));
    }

    fn run_presign(
        rng: &mut ChaCha20Rng,
        out0: &DkgOutput,
        out1: &DkgOutput,
        msg: &[u8],
        statement: &Point,
    ) -> (PreSignature, PreSignature) {
        let (mut s0, m1) =
            presign_start(Role::P0, &out0.sk_share, &out0.joint_pk, msg, statement, &ctx(), rng);
        let (mut s1, none) =
            presign_start(Role::P1, &out1.sk_share, &out1.joint_pk, msg, statement, &ctx(), rng);
        assert!(none.is_none());

        let (m2, o) = presign_step(&mut s1, &m1.unwrap(), rng).unwrap();
        assert!(o.is_none());
        let (m3, o) = presign_step(&mut s0, &m2.unwrap(), rng).unwrap();
        assert!(o.is_none());
        let (m4, pre1) = presign_step(&mut s1, &m3.unwrap(), rng).unwrap();
        let pre1 = pre1.expect("P1 outputs first");
        assert_eq!(s1.phase(), PresignPhase::Done);
        assert_eq!(s0.phase(), PresignPhase::NonceRevealed);
        let (none, pre0) = presign_step(&mut s0, &m4.unwrap(), rng).unwrap();
        assert!(none.is_none());
        (pre0.unwrap(), pre1)
    }

    #[test]
    fn presign_yields_valid_joint_presignature() {
        let mut rng = ChaCha20Rng::seed_from_u64(54);
        let (out0, out1) = run_dkg(&mut rng);
        let y = random_nonzero_scalar(&mut rng);
        let statement = base_mul(&y);
        let (pre0, pre1) = run_presign(&mut rng, &out0, &out1, b"spend tx", &statement);
        assert_eq!(pre0, pre1);
        assert!(pvrfy(&out0.joint_pk, b"spend tx", &statement, &pre0));

        // Completing and extracting round-trips through the joint key.
        let sig = adapt(&pre0, &y);
        assert!(vrfy(&out0.joint_pk, b"spend tx", &sig));
        assert_eq!(extract(&pre0, &sig), Ok(y));
    }

    #[test]
    fn presign_aborts_on_bad_partial_without_releasing_own() {
        let mut rng = ChaCha20Rng::seed_from_u64(55);
        let (out0, out1) = run_dkg(&mut rng);
        let statement = base_mul(&random_nonzero_scalar(&mut rng));
        let (mut s0, m1) = presign_start(
            Role::P0,
            &out0.sk_share,
            &out0.joint_pk,
            b"tx",
            &statement,
            &ctx(),
            &mut rng,
        );
        let (mut s1, _) = presign_start(
            Role::P1,
            &out1.sk_share,
            &out1.joint_pk,
            b"tx",
            &statement,
            &ctx(),
            &mut rng,
        );
        let (m2, _) = presign_step(&mut s1, &m1.unwrap(), &mut rng).unwrap();
        let (m3, _) = presign_step(&mut s0, &m2.unwrap(), &mut rng).unwrap();
        let PresignMsg::NonceOpen { nonce_pk, proof, partial } = m3.unwrap() else { panic!() };
        let bad = PresignMsg::NonceOpen { nonce_pk, proof, partial: partial + Scalar::ONE };
        let err = presign_step(&mut s1, &bad, &mut rng).unwrap_err();
        assert!(matches!(err, TwoPartyError::AbortProtocol(_)));
        assert_eq!(s1.phase(), PresignPhase::Aborted);
        // The aborted P1 never sent its partial; P0 cannot finish.
        let err = presign_step(&mut s1, &bad, &mut rng).unwrap_err();
        assert!(matches!(err, TwoPartyError::ProtocolState(_)));
    }

    #[test]
    fn message_serialization_roundtrips() {
        let mut rng = ChaCha20Rng::seed_from_u64(56);
        let (mut p0, first) = dkg_start(Role::P0, &ctx(), &mut rng);
        let (mut p1, _) = dkg_start(Role::P1, &ctx(), &mut rng);
        let commit = first.unwrap();
        assert_eq!(DkgMsg::from_bytes(&commit.to_bytes()), Some(commit.clone()));
        let (share, _) = dkg_step(&mut p1, &commit, &mut rng).unwrap();
        let share = share.unwrap();
        assert_eq!(DkgMsg::from_bytes(&share.to_bytes()), Some(share.clone()));
        let (open, _) = dkg_step(&mut p0, &share, &mut rng).unwrap();
        let open = open.unwrap();
        assert_eq!(DkgMsg::from_bytes(&open.to_bytes()), Some(open));
        assert_eq!(DkgMsg::from_bytes(&[0xee]), None);

        let (out0, out1) = run_dkg(&mut rng);
        let statement = base_mul(&random_nonzero_scalar(&mut rng));
        let (mut s0, m1) = presign_start(
            Role::P0,
            &out0.sk_share,
            &out0.joint_pk,
            b"tx",
            &statement,
            &ctx(),
            &mut rng,
        );
        let (mut s1, _) = presign_start(
            Role::P1,
            &out1.sk_share,
            &out1.joint_pk,
            b"tx",
            &statement,
            &ctx(),
            &mut rng,
        );
        let m1 = m1.unwrap();
        assert_eq!(PresignMsg::from_bytes(&m1.to_bytes()), Some(m1.clone()));
        let (m2, _) = presign_step(&mut s1, &m1, &mut rng).unwrap();
        let m2 = m2.unwrap();
        assert_eq!(PresignMsg::from_bytes(&m2.to_bytes()), Some(m2.clone()));
        let (m3, _) = presign_step(&mut s0, &m2, &mut rng).unwrap();
        let m3 = m3.unwrap();
        assert_eq!(PresignMsg::from_bytes(&m3.to_bytes()), Some(m3.clone()));
        let (m4, _) = presign_step(&mut s1, &m3, &mut rng).unwrap();
        let m4 = m4.unwrap();
        assert_eq!(PresignMsg::from_bytes(&m4.to_bytes()), Some(m4));
    }

    #[test]
    fn sessions_bound_to_context() {
        // Pre-signatures from sessions in one context do not verify against
        // another message; the tx bytes enter the challenge directly.
        let mut rng = ChaCha20Rng::seed_from_u64(57);
        let (out0, out1) = run_dkg(&mut rng);
        let statement = base_mul(&random_nonzero_scalar(&mut rng));
        let (pre, _) = run_presign(&mut rng, &out0, &out1, b"tx-a", &statement);
        assert!(pvrfy(&out0.joint_pk, b"tx-a", &statement, &pre));
        assert!(!pvrfy(&out0.joint_pk, b"tx-b", &statement, &pre));
    }
}
