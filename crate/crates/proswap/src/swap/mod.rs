//! Dealer and party state machines for the probabilistic swap.
//!
//! The dealer stakes `nu` coins against the party's single coin. Five
//! phases: setup (the dealer publishes the winning statement with its
//! well-formedness argument), funding (a joint temporary key locks both
//! stakes behind two-branch timelocks), claim dealer (the party's blinded
//! guess is served under an encryption key whose secret the dealer must burn
//! on-chain to collect its coin), claim party (the party decrypts with the
//! extracted key and claims the stake exactly when its guess hit the
//! target), and timeout (fallback refunds). The dealer is always paid one
//! coin on completion; the party wins `nu` with probability `2^-ell`.
//!
//! `run_swap` drives both machines over one or two simulated chains,
//! optionally following a scripted deviation, and records an auditable event
//! trace. All randomness derives from the caller's seed, so a `(config,
//! seed)` pair replays to an identical outcome.

use crate::adaptor::{adapt, extract, keygen, sign, vrfy, PreSignature, SigKeyPair};
use crate::elgamal::{eg_dec, eg_enc, eg_keygen, Ciphertext};
use crate::group::{base_mul, hash_to_group, random_nonzero_scalar, Point, Scalar};
use crate::ledger::{Amount, Ledger, LedgerError, OutPoint, SpendCondition, Transaction, TxId};
use crate::oprf::{
    blind_eval, finalize_with_alpha, oprf_keygen, request, ClientState, OprfKeyPair,
    OprfPublicKey, Response, MAX_ELL,
};
use crate::proofs::cut_choose::{forge_ywin_with_base, prove_ywin, recover_witness, verify_ywin};
use crate::proofs::schnorr::{prove_enc, verify_enc};
use crate::proofs::CutChooseProof;
use crate::transcript::Transcript;
use crate::twoparty::{dkg_start, dkg_step, presign_start, presign_step, PresignMsg, Role};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha512};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SwapError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    /// A condition the protocol guarantees failed anyway; never part of a
    /// normal outcome.
    #[error("invariant violated: {0}")]
    Invariant(&'static str),
}

/// Protocol constants of one swap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SwapParams {
    /// Dealer stake; the party's stake is fixed at one coin.
    pub nu: Amount,
    /// Guess bit length; the party wins with probability `2^-ell`.
    pub ell: u32,
    /// Cut-and-choose instance count, even.
    pub lambda: usize,
    /// Party refund height. The claim phases must finish before it.
    pub t_p: u64,
    /// Dealer refund height, strictly after `t_p`.
    pub t_d: u64,
}

impl SwapParams {
    pub fn validate(&self) -> Result<(), SwapError> {
        if self.nu.is_zero() {
            return Err(SwapError::InvalidParameter("stake must be positive"));
        }
        if self.ell == 0 || self.ell > MAX_ELL {
            return Err(SwapError::InvalidParameter("bit length out of range"));
        }
        if self.lambda < 2 || self.lambda % 2 != 0 {
            return Err(SwapError::InvalidParameter("instance count must be even and at least 2"));
        }
        if self.t_d <= self.t_p {
            return Err(SwapError::InvalidParameter("dealer timeout must exceed party timeout"));
        }
        Ok(())
    }
}

/// Scripted deviations; every one leaves the honest counterparty no worse
/// than its starting balance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Honest,
    /// Dealer completes both pre-signing sessions but never posts its claim.
    WithholdClaim,
    /// Dealer publishes a winning statement built over an out-of-domain
    /// target.
    MalformedWinProof,
    /// Dealer serves a ciphertext that does not encrypt the evaluation.
    MalformedCiphertext,
    /// Dealer sends a corrupted partial response in pre-signing.
    WrongPartial,
    /// Party tries to refund its stake before its timeout.
    PrematureRefund,
    /// Dealer sits out the claim window, then tries to claim anyway.
    PostTimeoutClaim,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Honest,
        Scenario::WithholdClaim,
        Scenario::MalformedWinProof,
        Scenario::MalformedCiphertext,
        Scenario::WrongPartial,
        Scenario::PrematureRefund,
        Scenario::PostTimeoutClaim,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Honest => "honest",
            Scenario::WithholdClaim => "withhold-claim",
            Scenario::MalformedWinProof => "malformed-win-proof",
            Scenario::MalformedCiphertext => "malformed-ciphertext",
            Scenario::WrongPartial => "wrong-partial",
            Scenario::PrematureRefund => "premature-refund",
            Scenario::PostTimeoutClaim => "post-timeout-claim",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = SwapError;

    fn from_str(s: &str) -> Result<Scenario, SwapError> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or(SwapError::InvalidParameter("unknown scenario"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SwapConfig {
    pub params: SwapParams,
    pub scenario: Scenario,
    /// Two independent chains: the dealer's stake locks on the first, the
    /// party's on the second.
    pub cross_chain: bool,
    /// Test hook: fix the dealer's target instead of sampling it.
    pub forced_target: Option<u64>,
    /// Test hook: fix the party's guess instead of sampling it.
    pub forced_guess: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DealerPhase {
    Setup,
    Funded,
    Served,
    Claimed,
    Refunded,
    Done,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartyPhase {
    AwaitSetup,
    Funded,
    Guessed,
    Decided,
    Won,
    Lost,
    Refunded,
}

impl fmt::Display for DealerPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DealerPhase::Setup => "setup",
            DealerPhase::Funded => "funded",
            DealerPhase::Served => "served",
            DealerPhase::Claimed => "claimed",
            DealerPhase::Refunded => "refunded",
            DealerPhase::Done => "done",
        })
    }
}

impl fmt::Display for PartyPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartyPhase::AwaitSetup => "await-setup",
            PartyPhase::Funded => "funded",
            PartyPhase::Guessed => "guessed",
            PartyPhase::Decided => "decided",
            PartyPhase::Won => "won",
            PartyPhase::Lost => "lost",
            PartyPhase::Refunded => "refunded",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SwapEvent {
    Phase(&'static str),
    TxAccepted { label: &'static str, txid: TxId },
    TxRejected { label: &'static str, reason: &'static str },
    Aborted(&'static str),
    Resolved { won: bool },
}

impl fmt::Display for SwapEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SwapEvent::Phase(name) => write!(f, "phase {name}"),
            SwapEvent::TxAccepted { label, txid } => write!(f, "tx {label} {txid}"),
            SwapEvent::TxRejected { label, reason } => write!(f, "rejected {label} {reason}"),
            SwapEvent::Aborted(reason) => write!(f, "abort {reason}"),
            SwapEvent::Resolved { won } => write!(f, "resolved win={won}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwapOutcome {
    pub dealer_paid: bool,
    pub party_won: bool,
    pub abort: Option<&'static str>,
    pub y_tgt: u64,
    pub y_gss: Option<u64>,
    /// Value spendable by the dealer key at the end, across all chains.
    pub dealer_balance: Amount,
    pub party_balance: Amount,
    pub dealer_phase: DealerPhase,
    pub party_phase: PartyPhase,
    pub history: Vec<SwapEvent>,
    /// Final transaction log of every chain the run touched, in the
    /// line format accepted by [`parse_export`](crate::ledger::parse_export).
    pub exports: Vec<String>,
}

impl SwapOutcome {
    /// Line-delimited key-value record of the run.
    pub fn render(&self, seed: u64) -> String {
        let mut out = String::new();
        out.push_str(&format!("seed {seed}\n"));
        out.push_str(&format!("target {}\n", self.y_tgt));
        match self.y_gss {
            Some(g) => out.push_str(&format!("guess {g}\n")),
            None => out.push_str("guess none\n"),
        }
        out.push_str(&format!("dealer-paid {}\n", self.dealer_paid));
        out.push_str(&format!("party-won {}\n", self.party_won));
        out.push_str(&format!("abort {}\n", self.abort.unwrap_or("none")));
        out.push_str(&format!("dealer-phase {}\n", self.dealer_phase));
        out.push_str(&format!("party-phase {}\n", self.party_phase));
        out.push_str(&format!("balance-dealer {}\n", self.dealer_balance));
        out.push_str(&format!("balance-party {}\n", self.party_balance));
        for event in &self.history {
            out.push_str(&format!("event {event}\n"));
        }
        out
    }
}

/// Derives an independent sub-seed; used to split one experiment seed into
/// per-role and per-trial streams.
pub fn derive_seed(seed: u64, label: &[u8]) -> u64 {
    let mut h = Sha512::new();
    h.update(b"proswap/seed");
    h.update(seed.to_be_bytes());
    h.update((label.len() as u32).to_be_bytes());
    h.update(label);
    let digest = h.finalize();
    u64::from_be_bytes(digest[..8].try_into().expect("digest is wide enough"))
}

/// The dealer's published setup: winning statement, well-formedness
/// argument, and the evaluator public key, echoing the parameters they were
/// built for.
#[derive(Clone, Debug)]
pub struct SetupMsg {
    pub oprf_pk: OprfPublicKey,
    pub y_win: Point,
    pub proof: CutChooseProof,
    pub ell: u32,
}

/// The dealer's setup secrets.
#[derive(Clone, Debug)]
pub struct DealerSetup {
    pub oprf: OprfKeyPair,
    pub y_tgt: u64,
    pub w_win: Scalar,
}

fn setup_with_target(
    params: &SwapParams,
    y_tgt: u64,
    ctx: &Transcript,
    rng: &mut ChaCha20Rng,
) -> Result<(DealerSetup, SetupMsg), SwapError> {
    let oprf = oprf_keygen(params.lambda, rng)
        .map_err(|_| SwapError::InvalidParameter("bad evaluator parameters"))?;
    let w_win = random_nonzero_scalar(rng);
    let y_win = base_mul(&w_win);
    let proof = prove_ywin(&oprf, y_tgt, &w_win, params.ell, ctx, rng)
        .map_err(|_| SwapError::InvalidParameter("target outside the guess domain"))?;
    let msg = SetupMsg { oprf_pk: oprf.public.clone(), y_win, proof, ell: params.ell };
    Ok((DealerSetup { oprf, y_tgt, w_win }, msg))
}

/// Samples the dealer's target and builds its setup message.
pub fn dealer_setup(
    params: &SwapParams,
    ctx: &Transcript,
    rng: &mut ChaCha20Rng,
) -> Result<(DealerSetup, SetupMsg), SwapError> {
    params.validate()?;
    let y_tgt = rng.gen_range(0..1u64 << params.ell);
    setup_with_target(params, y_tgt, ctx, rng)
}

/// Party-side acceptance of a setup message: parameters must echo and the
/// well-formedness argument must verify.
pub fn party_check_setup(params: &SwapParams, msg: &SetupMsg, ctx: &Transcript) -> bool {
    msg.ell == params.ell
        && msg.oprf_pk.lambda() == params.lambda
        && verify_ywin(&msg.oprf_pk, &msg.y_win, params.ell, &msg.proof, ctx)
}

fn reject_reason(err: &LedgerError) -> &'static str {
    match err {
        LedgerError::InvalidParameter(s) => s,
        LedgerError::UnknownOutpoint => "unknown-outpoint",
        LedgerError::DuplicateInput => "duplicate-input",
        LedgerError::Unauthorized => "unauthorized",
        LedgerError::Timelock => "timelock",
        LedgerError::Conservation => "conservation",
    }
}

/// One or two chains; with one, both accessors alias it.
struct Chains {
    dealer: Ledger,
    party: Option<Ledger>,
}

impl Chains {
    fn new(cfg: &SwapConfig, pk_d: &Point, pk_p: &Point) -> Chains {
        let one = Amount::from_int(1).expect("one is a valid amount");
        if cfg.cross_chain {
            Chains {
                dealer: Ledger::genesis(&[(*pk_d, cfg.params.nu)]),
                party: Some(Ledger::genesis(&[(*pk_p, one)])),
            }
        } else {
            Chains {
                dealer: Ledger::genesis(&[(*pk_d, cfg.params.nu), (*pk_p, one)]),
                party: None,
            }
        }
    }

    fn dealer_chain(&mut self) -> &mut Ledger {
        &mut self.dealer
    }

    fn party_chain(&mut self) -> &mut Ledger {
        self.party.as_mut().unwrap_or(&mut self.dealer)
    }

    fn party_chain_ref(&self) -> &Ledger {
        self.party.as_ref().unwrap_or(&self.dealer)
    }

    fn height(&self) -> u64 {
        self.dealer.height()
    }

    /// Advances every chain to `target` in lockstep.
    fn tick_to(&mut self, target: u64) {
        for ledger in std::iter::once(&mut self.dealer).chain(self.party.iter_mut()) {
            let h = ledger.height();
            if h < target {
                ledger.tick(target - h).expect("positive delta");
            }
        }
    }

    fn balance(&self, pk: &Point) -> Amount {
        let mut total = self.dealer.balance(pk);
        if let Some(p) = &self.party {
            total = total.checked_add(&p.balance(pk)).expect("balances stay in range");
        }
        total
    }

    fn totals(&self) -> Vec<Amount> {
        std::iter::once(&self.dealer)
            .chain(self.party.iter())
            .map(|l| l.total())
            .collect()
    }

    fn exports(&self) -> Vec<String> {
        std::iter::once(&self.dealer)
            .chain(self.party.iter())
            .map(|l| l.export())
            .collect()
    }
}

/// One-input one-output spend signed by its owner key.
fn keyed_spend(
    outpoint: OutPoint,
    value: Amount,
    condition: SpendCondition,
    signer: &SigKeyPair,
    rng: &mut ChaCha20Rng,
) -> Transaction {
    let mut tx = Transaction {
        inputs: vec![outpoint],
        outputs: vec![(value, condition)],
        witness: vec![],
    };
    let msg = tx.message();
    tx.witness.push(sign(signer, &msg, rng));
    tx
}

struct Dealer {
    phase: DealerPhase,
    kp: SigKeyPair,
    setup: DealerSetup,
    tmp_share: Option<Scalar>,
    joint_pk: Option<Point>,
    fund_outpoint: Option<OutPoint>,
    z: Option<Scalar>,
    presig_pd: Option<PreSignature>,
    rng: ChaCha20Rng,
}

struct Party {
    phase: PartyPhase,
    kp: SigKeyPair,
    setup: SetupMsg,
    y_gss: Option<u64>,
    client: Option<ClientState>,
    tmp_share: Option<Scalar>,
    joint_pk: Option<Point>,
    fund_outpoint: Option<OutPoint>,
    big_z: Option<Point>,
    ct: Option<Ciphertext>,
    presig_dp: Option<PreSignature>,
    presig_pd: Option<PreSignature>,
    rng: ChaCha20Rng,
}

enum Step {
    Continue,
    Abort(&'static str),
}

struct Run {
    cfg: SwapConfig,
    t: Transcript,
    chains: Chains,
    dealer: Dealer,
    party: Party,
    events: Vec<SwapEvent>,
}

impl Run {
    fn event(&mut self, event: SwapEvent) {
        self.events.push(event);
    }

    fn post(
        &mut self,
        on_dealer_chain: bool,
        label: &'static str,
        tx: &Transaction,
    ) -> Result<TxId, LedgerError> {
        let ledger =
            if on_dealer_chain { self.chains.dealer_chain() } else { self.chains.party_chain() };
        match ledger.post(tx) {
            Ok(txid) => {
                self.events.push(SwapEvent::TxAccepted { label, txid });
                Ok(txid)
            }
            Err(err) => {
                self.events
                    .push(SwapEvent::TxRejected { label, reason: reject_reason(&err) });
                Err(err)
            }
        }
    }

    /// Joint temporary key, then both locking transactions.
    fn funding(&mut self) -> Result<Step, SwapError> {
        self.event(SwapEvent::Phase("funding"));

        let (mut d_sess, first) = dkg_start(Role::P0, &self.t, &mut self.dealer.rng);
        let (mut p_sess, _) = dkg_start(Role::P1, &self.t, &mut self.party.rng);
        let first = first.expect("initiator commits");
        let share = match dkg_step(&mut p_sess, &first, &mut self.party.rng) {
            Ok((Some(msg), _)) => msg,
            _ => return Ok(Step::Abort("key generation failed")),
        };
        let (open, d_out) = match dkg_step(&mut d_sess, &share, &mut self.dealer.rng) {
            Ok((Some(msg), Some(out))) => (msg, out),
            _ => return Ok(Step::Abort("key generation failed")),
        };
        let p_out = match dkg_step(&mut p_sess, &open, &mut self.party.rng) {
            Ok((None, Some(out))) => out,
            _ => return Ok(Step::Abort("key generation failed")),
        };
        if d_out.joint_pk != p_out.joint_pk {
            return Err(SwapError::Invariant("joint key disagreement"));
        }
        let joint_pk = d_out.joint_pk;
        self.dealer.tmp_share = Some(d_out.sk_share);
        self.party.tmp_share = Some(p_out.sk_share);
        self.dealer.joint_pk = Some(joint_pk);
        self.party.joint_pk = Some(joint_pk);

        let genesis_box = |ledger: &Ledger, pk: &Point| {
            ledger
                .boxes()
                .iter()
                .find(|(_, b)| b.condition == SpendCondition::SingleKey(*pk))
                .map(|(op, b)| (*op, b.value))
        };

        let (d_op, d_val) = genesis_box(self.chains.dealer_chain(), &self.dealer.kp.pk)
            .ok_or(SwapError::Invariant("dealer stake missing"))?;
        let lock_d = SpendCondition::TimeLocked {
            pk_tmp: joint_pk,
            unlock_height: self.cfg.params.t_d,
            pk_fallback: self.dealer.kp.pk,
        };
        let dealer_kp = self.dealer.kp;
        let tx_d = keyed_spend(d_op, d_val, lock_d, &dealer_kp, &mut self.dealer.rng);
        let txid_d = self
            .post(true, "fund-dealer", &tx_d)
            .map_err(|_| SwapError::Invariant("funding rejected"))?;
        self.dealer.fund_outpoint = Some(OutPoint { txid: txid_d, index: 0 });

        let (p_op, p_val) = genesis_box(self.chains.party_chain(), &self.party.kp.pk)
            .ok_or(SwapError::Invariant("party stake missing"))?;
        let lock_p = SpendCondition::TimeLocked {
            pk_tmp: joint_pk,
            unlock_height: self.cfg.params.t_p,
            pk_fallback: self.party.kp.pk,
        };
        let party_kp = self.party.kp;
        let tx_p = keyed_spend(p_op, p_val, lock_p, &party_kp, &mut self.party.rng);
        let txid_p = self
            .post(false, "fund-party", &tx_p)
            .map_err(|_| SwapError::Invariant("funding rejected"))?;
        self.party.fund_outpoint = Some(OutPoint { txid: txid_p, index: 0 });

        self.dealer.phase = DealerPhase::Funded;
        self.party.phase = PartyPhase::Funded;
        self.chains.tick_to(self.chains.height() + 1);
        Ok(Step::Continue)
    }

    /// The claim-side transactions both pre-signing sessions commit to.
    fn reward_tx(&self) -> Transaction {
        Transaction {
            inputs: vec![self.dealer.fund_outpoint.expect("funded")],
            outputs: vec![(self.cfg.params.nu, SpendCondition::SingleKey(self.party.kp.pk))],
            witness: vec![],
        }
    }

    fn payment_tx(&self) -> Transaction {
        let one = Amount::from_int(1).expect("one is a valid amount");
        Transaction {
            inputs: vec![self.party.fund_outpoint.expect("funded")],
            outputs: vec![(one, SpendCondition::SingleKey(self.dealer.kp.pk))],
            witness: vec![],
        }
    }

    /// One pre-signing session between the two machines. `dealer_is_p1`
    /// fixes who initiates; the corrupt flag makes the dealer damage the
    /// final partial it sends as initiand (the scripted wrong-partial
    /// deviation).
    fn presign_pair(
        &mut self,
        label: &'static [u8],
        msg: &[u8],
        statement: &Point,
        dealer_is_p1: bool,
        corrupt_final: bool,
    ) -> Result<(PreSignature, PreSignature), &'static str> {
        let ctx = self.t.fork(label);
        let joint_pk = self.dealer.joint_pk.expect("funded");
        let d_share = self.dealer.tmp_share.expect("funded");
        let p_share = self.party.tmp_share.expect("funded");
        let err = "pre-signing aborted";

        if dealer_is_p1 {
            let (mut sp, m1) = presign_start(
                Role::P0, &p_share, &joint_pk, msg, statement, &ctx, &mut self.party.rng,
            );
            let (mut sd, _) = presign_start(
                Role::P1, &d_share, &joint_pk, msg, statement, &ctx, &mut self.dealer.rng,
            );
            let m1 = m1.expect("initiator commits");
            let (m2, _) = presign_step(&mut sd, &m1, &mut self.dealer.rng).map_err(|_| err)?;
            let (m3, _) = presign_step(&mut sp, &m2.expect("nonce share"), &mut self.party.rng)
                .map_err(|_| err)?;
            let (m4, d_pre) =
                presign_step(&mut sd, &m3.expect("nonce opening"), &mut self.dealer.rng)
                    .map_err(|_| err)?;
            let mut m4 = m4.expect("final partial");
            if corrupt_final {
                if let PresignMsg::Partial { partial } = m4 {
                    m4 = PresignMsg::Partial { partial: partial + Scalar::ONE };
                }
            }
            let (_, p_pre) = presign_step(&mut sp, &m4, &mut self.party.rng).map_err(|_| err)?;
            Ok((d_pre.ok_or(err)?, p_pre.ok_or(err)?))
        } else {
            let (mut sd, m1) = presign_start(
                Role::P0, &d_share, &joint_pk, msg, statement, &ctx, &mut self.dealer.rng,
            );
            let (mut sp, _) = presign_start(
                Role::P1, &p_share, &joint_pk, msg, statement, &ctx, &mut self.party.rng,
            );
            let m1 = m1.expect("initiator commits");
            let (m2, _) = presign_step(&mut sp, &m1, &mut self.party.rng).map_err(|_| err)?;
            let (m3, _) = presign_step(&mut sd, &m2.expect("nonce share"), &mut self.dealer.rng)
                .map_err(|_| err)?;
            let (m4, p_pre) =
                presign_step(&mut sp, &m3.expect("nonce opening"), &mut self.party.rng)
                    .map_err(|_| err)?;
            let (_, d_pre) =
                presign_step(&mut sd, &m4.expect("final partial"), &mut self.dealer.rng)
                    .map_err(|_| err)?;
            Ok((d_pre.ok_or(err)?, p_pre.ok_or(err)?))
        }
    }

    /// Guess service and the dealer's unconditional one-coin claim.
    fn claim_dealer(&mut self) -> Result<Step, SwapError> {
        self.event(SwapEvent::Phase("claim-dealer"));
        let params = self.cfg.params;

        if self.chains.height() >= params.t_p {
            return Ok(Step::Abort("claim window closed"));
        }

        // Party blinds its guess.
        let y_gss = match self.cfg.forced_guess {
            Some(y) => y,
            None => self.party.rng.gen_range(0..1u64 << params.ell),
        };
        let (client, req) = request(y_gss, params.ell, &mut self.party.rng)
            .map_err(|_| SwapError::Invariant("guess sampling left the domain"))?;
        self.party.y_gss = Some(y_gss);
        self.party.client = Some(client);
        self.party.phase = PartyPhase::Guessed;

        // Dealer serves the evaluation under a fresh encryption key.
        let res = blind_eval(&self.dealer.setup.oprf.sk, &req)
            .map_err(|_| SwapError::Invariant("blinded request degenerate"))?;
        let (big_z, z) = eg_keygen(&mut self.dealer.rng);
        let (mut ct, enc_r) = eg_enc(&big_z, &res.point, &mut self.dealer.rng);
        let enc_ctx = self.t.fork(b"serve");
        let enc_proof = prove_enc(
            &self.dealer.setup.oprf.public.x,
            &big_z,
            &req.point,
            &ct,
            &self.dealer.setup.oprf.sk,
            &enc_r,
            &enc_ctx,
            &mut self.dealer.rng,
        );
        if self.cfg.scenario == Scenario::MalformedCiphertext {
            ct.c2 += base_mul(&Scalar::ONE);
        }
        self.dealer.z = Some(z);

        // Party accepts the served evaluation only with a valid proof, and
        // only then enters pre-signing.
        if !verify_enc(
            &self.party.setup.oprf_pk.x,
            &big_z,
            &req.point,
            &ct,
            &enc_proof,
            &enc_ctx,
        ) {
            return Ok(Step::Abort("served ciphertext rejected"));
        }
        self.party.big_z = Some(big_z);
        self.party.ct = Some(ct);

        // Reward pre-signature first: the party must hold it before the
        // dealer learns the payment pre-signature.
        let reward_msg = self.reward_tx().message();
        let y_win = self.party.setup.y_win;
        let corrupt = self.cfg.scenario == Scenario::WrongPartial;
        let (_, p_pre) =
            match self.presign_pair(b"reward", &reward_msg, &y_win, true, corrupt) {
                Ok(pair) => pair,
                Err(reason) => return Ok(Step::Abort(reason)),
            };
        self.party.presig_dp = Some(p_pre);

        let payment_msg = self.payment_tx().message();
        let (d_pre, p_pre) = match self.presign_pair(b"payment", &payment_msg, &big_z, false, false)
        {
            Ok(pair) => pair,
            Err(reason) => return Ok(Step::Abort(reason)),
        };
        self.dealer.presig_pd = Some(d_pre);
        self.party.presig_pd = Some(p_pre);
        self.dealer.phase = DealerPhase::Served;

        match self.cfg.scenario {
            // The dealer never claims; its decryption key stays private and
            // the party's coin stays refundable.
            Scenario::WithholdClaim => return Ok(Step::Abort("claim withheld")),
            Scenario::PostTimeoutClaim => {
                self.chains.tick_to(params.t_p);
                self.refund_party();
                let mut tx = self.payment_tx();
                let sigma_pd = adapt(
                    self.dealer.presig_pd.as_ref().expect("served"),
                    self.dealer.z.as_ref().expect("served"),
                );
                tx.witness.push(sigma_pd);
                if self.post(false, "claim-dealer", &tx).is_ok() {
                    return Err(SwapError::Invariant("claim accepted after refund"));
                }
                return Ok(Step::Abort("claim attempted after the window"));
            }
            _ => {}
        }

        // The claim burns z into the chain: the posted signature minus the
        // pre-signature is exactly the decryption key.
        let mut tx = self.payment_tx();
        let sigma_pd = adapt(
            self.dealer.presig_pd.as_ref().expect("served"),
            self.dealer.z.as_ref().expect("served"),
        );
        tx.witness.push(sigma_pd);
        if self.chains.height() >= params.t_p {
            return Ok(Step::Abort("claim window closed"));
        }
        self.post(false, "claim-dealer", &tx)
            .map_err(|_| SwapError::Invariant("well-formed claim rejected"))?;
        self.dealer.phase = DealerPhase::Claimed;
        self.chains.tick_to(self.chains.height() + 1);
        Ok(Step::Continue)
    }

    /// The party extracts the decryption key from the on-chain claim,
    /// decides the outcome, and on a hit posts the reward transaction.
    fn claim_party(&mut self) -> Result<Step, SwapError> {
        self.event(SwapEvent::Phase("claim-party"));
        let params = self.cfg.params;
        if self.chains.height() >= params.t_d {
            return Ok(Step::Abort("reward window closed"));
        }

        // The decryption key exists for the party only through the chain.
        let payment_txid = self.payment_tx().txid();
        let presig_pd = self.party.presig_pd.clone().expect("pre-signed");
        let sigma_pd = self
            .chains
            .party_chain_ref()
            .read()
            .iter()
            .find(|e| e.txid == payment_txid)
            .map(|e| e.tx.witness[0])
            .ok_or(SwapError::Invariant("claim transaction missing from the log"))?;
        let z = extract(&presig_pd, &sigma_pd)
            .map_err(|_| SwapError::Invariant("claim signature does not open the pre-signature"))?;

        let ct = self.party.ct.expect("served");
        let res_point = eg_dec(&z, &ct);
        let pk_bytes = self.party.setup.oprf_pk.to_bytes();
        let client = self.party.client.as_ref().expect("guessed");
        let response = Response { point: res_point };
        let finalized = self
            .party
            .setup
            .proof
            .unopened
            .iter()
            .map(|(&k, reveal)| {
                (k, finalize_with_alpha(&pk_bytes, client, &response, &reveal.alpha))
            })
            .collect();
        self.party.phase = PartyPhase::Decided;
        let recovered =
            recover_witness(&self.party.setup.proof, &self.party.setup.y_win, &finalized);

        match recovered {
            Some(w) => {
                let mut tx = self.reward_tx();
                let sigma_dp = adapt(self.party.presig_dp.as_ref().expect("pre-signed"), &w);
                let joint_pk = self.party.joint_pk.expect("funded");
                if !vrfy(&joint_pk, &tx.message(), &sigma_dp) {
                    return Err(SwapError::Invariant("adapted reward signature invalid"));
                }
                tx.witness.push(sigma_dp);
                self.post(true, "claim-party", &tx)
                    .map_err(|_| SwapError::Invariant("well-formed reward claim rejected"))?;
                self.party.phase = PartyPhase::Won;
                self.dealer.phase = DealerPhase::Done;
                self.event(SwapEvent::Resolved { won: true });
            }
            None => {
                self.party.phase = PartyPhase::Lost;
                self.event(SwapEvent::Resolved { won: false });
            }
        }
        Ok(Step::Continue)
    }

    fn refund_party(&mut self) {
        let Some(outpoint) = self.party.fund_outpoint else { return };
        if !self.chains.party_chain_ref().boxes().contains_key(&outpoint) {
            return;
        }
        let one = Amount::from_int(1).expect("one is a valid amount");
        let kp = self.party.kp;
        let tx =
            keyed_spend(outpoint, one, SpendCondition::SingleKey(kp.pk), &kp, &mut self.party.rng);
        if self.post(false, "refund-party", &tx).is_ok() {
            self.party.phase = PartyPhase::Refunded;
        }
    }

    fn refund_dealer(&mut self) {
        let Some(outpoint) = self.dealer.fund_outpoint else { return };
        if !self.chains.dealer.boxes().contains_key(&outpoint) {
            return;
        }
        let kp = self.dealer.kp;
        let nu = self.cfg.params.nu;
        let tx =
            keyed_spend(outpoint, nu, SpendCondition::SingleKey(kp.pk), &kp, &mut self.dealer.rng);
        if self.post(true, "refund-dealer", &tx).is_ok() {
            self.dealer.phase = DealerPhase::Refunded;
        }
    }

    /// Fallback refunds for whatever is still locked.
    fn timeout(&mut self) {
        self.event(SwapEvent::Phase("timeout"));
        self.chains.tick_to(self.cfg.params.t_p);
        self.refund_party();
        self.chains.tick_to(self.cfg.params.t_d);
        self.refund_dealer();
    }
}

/// Drives one full swap. Scripted deviations end in an outcome, not an
/// error; `Err` means invalid configuration or a broken run invariant.
pub fn run_swap(cfg: &SwapConfig, seed: u64) -> Result<SwapOutcome, SwapError> {
    cfg.params.validate()?;
    let domain = 1u64 << cfg.params.ell;
    if cfg.forced_target.is_some_and(|y| y >= domain)
        || cfg.forced_guess.is_some_and(|y| y >= domain)
    {
        return Err(SwapError::InvalidParameter("forced guess outside domain"));
    }

    let mut dealer_rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, b"dealer"));
    let mut party_rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, b"party"));
    let dealer_kp = keygen(&mut dealer_rng);
    let party_kp = keygen(&mut party_rng);

    let mut t = Transcript::new(b"proswap/swap");
    t.absorb_u64(b"stake-numer", cfg.params.nu.numer() as u64);
    t.absorb_u64(b"stake-denom", cfg.params.nu.denom() as u64);
    t.absorb_u64(b"ell", cfg.params.ell as u64);
    t.absorb_u64(b"lambda", cfg.params.lambda as u64);
    t.absorb_u64(b"t-p", cfg.params.t_p);
    t.absorb_u64(b"t-d", cfg.params.t_d);
    t.absorb_point(b"dealer-pk", &dealer_kp.pk);
    t.absorb_point(b"party-pk", &party_kp.pk);

    let events = vec![SwapEvent::Phase("setup")];

    // Setup runs before any funds move.
    let setup_ctx = t.fork(b"ywin-setup");
    let y_tgt = match cfg.forced_target {
        Some(y) => y,
        None => dealer_rng.gen_range(0..domain),
    };
    let (dealer_setup_state, setup_msg) = if cfg.scenario == Scenario::MalformedWinProof {
        // The dealer runs its full prover over an element that matches no
        // in-domain guess, bypassing the honest domain refusal.
        let oprf = oprf_keygen(cfg.params.lambda, &mut dealer_rng)
            .map_err(|_| SwapError::InvalidParameter("bad evaluator parameters"))?;
        let w_win = random_nonzero_scalar(&mut dealer_rng);
        let y_win = base_mul(&w_win);
        let rogue = hash_to_group(b"swap rogue target");
        let proof = forge_ywin_with_base(
            &oprf,
            &rogue,
            y_tgt,
            &w_win,
            cfg.params.ell,
            &setup_ctx,
            &mut dealer_rng,
        )
        .map_err(|_| SwapError::Invariant("forged prover run failed to produce output"))?;
        let msg = SetupMsg { oprf_pk: oprf.public.clone(), y_win, proof, ell: cfg.params.ell };
        (DealerSetup { oprf, y_tgt, w_win }, msg)
    } else {
        setup_with_target(&cfg.params, y_tgt, &setup_ctx, &mut dealer_rng)?
    };

    let chains = Chains::new(cfg, &dealer_kp.pk, &party_kp.pk);
    let genesis_totals = chains.totals();

    let mut run = Run {
        cfg: *cfg,
        chains,
        dealer: Dealer {
            phase: DealerPhase::Setup,
            kp: dealer_kp,
            setup: dealer_setup_state,
            tmp_share: None,
            joint_pk: None,
            fund_outpoint: None,
            z: None,
            presig_pd: None,
            rng: dealer_rng,
        },
        party: Party {
            phase: PartyPhase::AwaitSetup,
            kp: party_kp,
            setup: setup_msg,
            y_gss: None,
            client: None,
            tmp_share: None,
            joint_pk: None,
            fund_outpoint: None,
            big_z: None,
            ct: None,
            presig_dp: None,
            presig_pd: None,
            rng: party_rng,
        },
        events,
        t,
    };

    let mut abort: Option<&'static str> = None;

    if !party_check_setup(&run.cfg.params, &run.party.setup, &setup_ctx) {
        abort = Some("setup rejected");
    } else {
        match run.funding()? {
            Step::Abort(reason) => abort = Some(reason),
            Step::Continue => {
                if run.cfg.scenario == Scenario::PrematureRefund {
                    // The party tries its fallback branch before its
                    // timeout, then stalls the protocol.
                    let outpoint = run.party.fund_outpoint.expect("funded");
                    let one = Amount::from_int(1).expect("one is a valid amount");
                    let kp = run.party.kp;
                    let tx = keyed_spend(
                        outpoint,
                        one,
                        SpendCondition::SingleKey(kp.pk),
                        &kp,
                        &mut run.party.rng,
                    );
                    match run.post(false, "refund-party", &tx) {
                        Ok(_) => {
                            return Err(SwapError::Invariant("early fallback spend accepted"))
                        }
                        Err(LedgerError::Timelock) => {}
                        Err(_) => {
                            return Err(SwapError::Invariant(
                                "early fallback spend rejected for the wrong reason",
                            ))
                        }
                    }
                    abort = Some("premature refund attempted");
                } else {
                    match run.claim_dealer()? {
                        Step::Abort(reason) => abort = Some(reason),
                        Step::Continue => match run.claim_party()? {
                            Step::Abort(reason) => abort = Some(reason),
                            Step::Continue => {}
                        },
                    }
                }
            }
        }
    }

    if let Some(reason) = abort {
        run.event(SwapEvent::Aborted(reason));
    }

    let completed = abort.is_none()
        && matches!(run.party.phase, PartyPhase::Won | PartyPhase::Lost);
    if !completed {
        run.timeout();
    } else if run.party.phase == PartyPhase::Lost {
        // The dealer's stake stays locked; it comes back via the fallback
        // branch once the dealer timeout passes.
        run.event(SwapEvent::Phase("timeout"));
        run.chains.tick_to(run.cfg.params.t_d);
        run.refund_dealer();
        run.dealer.phase = DealerPhase::Done;
    }

    if run.chains.totals() != genesis_totals {
        return Err(SwapError::Invariant("value conservation broken"));
    }

    let dealer_paid = run
        .events
        .iter()
        .any(|e| matches!(e, SwapEvent::TxAccepted { label: "claim-dealer", .. }));
    let party_won = run
        .events
        .iter()
        .any(|e| matches!(e, SwapEvent::TxAccepted { label: "claim-party", .. }));
    if party_won && !dealer_paid {
        return Err(SwapError::Invariant("reward claimed without payment"));
    }

    Ok(SwapOutcome {
        dealer_paid,
        party_won,
        abort,
        y_tgt: run.dealer.setup.y_tgt,
        y_gss: run.party.y_gss,
        dealer_balance: run.chains.balance(&run.dealer.kp.pk),
        party_balance: run.chains.balance(&run.party.kp.pk),
        dealer_phase: run.dealer.phase,
        party_phase: run.party.phase,
        exports: run.chains.exports(),
        history: run.events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SwapParams {
        SwapParams {
            nu: Amount::from_int(2).unwrap(),
            ell: 2,
            lambda: 4,
            t_p: 10,
            t_d: 20,
        }
    }

    fn config(scenario: Scenario) -> SwapConfig {
        SwapConfig {
            params: params(),
            scenario,
            cross_chain: false,
            forced_target: None,
            forced_guess: None,
        }
    }

    #[test]
    fn params_are_validated() {
        let mut p = params();
        p.t_d = p.t_p;
        assert!(p.validate().is_err());
        let mut p = params();
        p.lambda = 3;
        assert!(p.validate().is_err());
        let mut p = params();
        p.ell = 0;
        assert!(p.validate().is_err());
        let mut p = params();
        p.nu = Amount::zero();
        assert!(p.validate().is_err());
        assert!(params().validate().is_ok());

        let mut cfg = config(Scenario::Honest);
        cfg.forced_guess = Some(4);
        assert!(run_swap(&cfg, 1).is_err());
    }

    #[test]
    fn forced_win_pays_both_sides() {
        let mut cfg = config(Scenario::Honest);
        cfg.forced_target = Some(3);
        cfg.forced_guess = Some(3);
        let out = run_swap(&cfg, 7).unwrap();
        assert!(out.dealer_paid);
        assert!(out.party_won);
        assert_eq!(out.abort, None);
        // Dealer nets +1 -nu, party nets +nu -1.
        assert_eq!(out.dealer_balance, Amount::from_int(1).unwrap());
        assert_eq!(out.party_balance, Amount::from_int(2).unwrap());
        assert_eq!(out.dealer_phase, DealerPhase::Done);
        assert_eq!(out.party_phase, PartyPhase::Won);
        // Exactly four transactions on the winning path.
        let txs = out
            .history
            .iter()
            .filter(|e| matches!(e, SwapEvent::TxAccepted { .. }))
            .count();
        assert_eq!(txs, 4);
    }

    #[test]
    fn forced_loss_pays_dealer_only() {
        let mut cfg = config(Scenario::Honest);
        cfg.forced_target = Some(1);
        cfg.forced_guess = Some(2);
        let out = run_swap(&cfg, 8).unwrap();
        assert!(out.dealer_paid);
        assert!(!out.party_won);
        assert_eq!(out.abort, None);
        assert_eq!(out.dealer_balance, Amount::from_int(3).unwrap());
        assert_eq!(out.party_balance, Amount::zero());
        assert_eq!(out.party_phase, PartyPhase::Lost);
        assert_eq!(out.dealer_phase, DealerPhase::Done);
    }

    #[test]
    fn runs_replay_deterministically() {
        let cfg = config(Scenario::Honest);
        let a = run_swap(&cfg, 42).unwrap();
        let b = run_swap(&cfg, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.render(42), b.render(42));
        let c = run_swap(&cfg, 43).unwrap();
        assert!(a.y_tgt != c.y_tgt || a.y_gss != c.y_gss || a.render(42) != c.render(43));
    }

    #[test]
    fn cross_chain_matches_same_chain_logic() {
        let mut cfg = config(Scenario::Honest);
        cfg.cross_chain = true;
        cfg.forced_target = Some(0);
        cfg.forced_guess = Some(0);
        let out = run_swap(&cfg, 9).unwrap();
        assert!(out.dealer_paid && out.party_won);
        assert_eq!(out.dealer_balance, Amount::from_int(1).unwrap());
        assert_eq!(out.party_balance, Amount::from_int(2).unwrap());

        cfg.forced_guess = Some(1);
        let out = run_swap(&cfg, 10).unwrap();
        assert!(out.dealer_paid && !out.party_won);
        assert_eq!(out.dealer_balance, Amount::from_int(3).unwrap());
        assert_eq!(out.party_balance, Amount::zero());
    }

    #[test]
    fn scripted_deviations_never_cost_the_honest_side() {
        for scenario in [
            Scenario::WithholdClaim,
            Scenario::MalformedWinProof,
            Scenario::MalformedCiphertext,
            Scenario::WrongPartial,
            Scenario::PrematureRefund,
            Scenario::PostTimeoutClaim,
        ] {
            let out = run_swap(&config(scenario), 11).unwrap();
            assert!(!out.dealer_paid, "{scenario}");
            assert!(!out.party_won, "{scenario}");
            assert!(out.abort.is_some(), "{scenario}");
            // Both stakes come back in full.
            assert_eq!(out.dealer_balance, Amount::from_int(2).unwrap(), "{scenario}");
            assert_eq!(out.party_balance, Amount::from_int(1).unwrap(), "{scenario}");
        }
    }

    #[test]
    fn withheld_claim_keeps_decryption_key_private() {
        let out = run_swap(&config(Scenario::WithholdClaim), 12).unwrap();
        // No claim ever hit the chain, and the party refunded at its
        // timeout rather than deciding the lottery.
        assert!(out
            .history
            .iter()
            .all(|e| !matches!(e, SwapEvent::TxAccepted { label: "claim-dealer", .. })));
        assert_eq!(out.party_phase, PartyPhase::Refunded);
        assert_eq!(out.dealer_phase, DealerPhase::Refunded);
    }

    #[test]
    fn malformed_win_proof_rejected_before_funding() {
        let out = run_swap(&config(Scenario::MalformedWinProof), 13).unwrap();
        assert_eq!(out.abort, Some("setup rejected"));
        // No transaction of any kind was posted.
        assert!(out
            .history
            .iter()
            .all(|e| !matches!(e, SwapEvent::TxAccepted { .. })));
        assert_eq!(out.party_phase, PartyPhase::AwaitSetup);
    }

    #[test]
    fn late_claim_is_rejected_by_the_chain() {
        let out = run_swap(&config(Scenario::PostTimeoutClaim), 14).unwrap();
        assert!(out.history.iter().any(|e| matches!(
            e,
            SwapEvent::TxRejected { label: "claim-dealer", reason: "unknown-outpoint" }
        )));
        assert_eq!(out.party_phase, PartyPhase::Refunded);
    }

    #[test]
    fn premature_refund_is_rejected_then_honored_at_timeout() {
        let out = run_swap(&config(Scenario::PrematureRefund), 15).unwrap();
        let rejected_pos = out.history.iter().position(|e| {
            matches!(e, SwapEvent::TxRejected { label: "refund-party", reason: "timelock" })
        });
        let accepted_pos = out
            .history
            .iter()
            .position(|e| matches!(e, SwapEvent::TxAccepted { label: "refund-party", .. }));
        assert!(rejected_pos.is_some() && accepted_pos.is_some());
        assert!(rejected_pos.unwrap() < accepted_pos.unwrap());
    }

    #[test]
    fn honest_outcome_matches_guess_equality() {
        for seed in 0..12u64 {
            let out = run_swap(&config(Scenario::Honest), seed).unwrap();
            assert!(out.dealer_paid);
            assert_eq!(out.abort, None);
            assert_eq!(out.party_won, Some(out.y_tgt) == out.y_gss, "seed {seed}");
        }
    }

    #[test]
    fn seed_derivation_is_stable_and_label_separated() {
        assert_eq!(derive_seed(5, b"dealer"), derive_seed(5, b"dealer"));
        assert_ne!(derive_seed(5, b"dealer"), derive_seed(5, b"party"));
        assert_ne!(derive_seed(5, b"dealer"), derive_seed(6, b"dealer"));
    }

    #[test]
    fn scenario_names_round_trip() {
        for sc in Scenario::ALL {
            assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
        }
        assert!("bogus".parse::<Scenario>().is_err());
    }

    #[test]
    fn render_lists_key_fields() {
        let mut cfg = config(Scenario::Honest);
        cfg.forced_target = Some(1);
        cfg.forced_guess = Some(1);
        let out = run_swap(&cfg, 16).unwrap();
        let text = out.render(16);
        assert!(text.contains("seed 16\n"));
        assert!(text.contains("party-won true\n"));
        assert!(text.contains("event phase funding\n"));
        assert!(text.contains("event tx claim-dealer "));
    }
}
