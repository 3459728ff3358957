//! Simulated append-only ledger with signature-gated spending.
//!
//! Coins live in lock boxes addressed by outpoint. A box is either spendable
//! by a single key or carries a two-branch timelock: a temporary key that
//! spends at any height and a fallback key that spends only once the chain
//! height reaches the unlock height. Posting is atomic and fee-free, so the
//! total live value is invariant across every accepted transaction. The
//! clock advances only through explicit ticks.

use crate::adaptor::{vrfy, Signature, SIGNATURE_LEN};
use crate::group::{point_from_bytes, point_to_bytes, Point};
use num_rational::Ratio;
use num_traits::CheckedAdd;
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    /// An input refers to no live box.
    #[error("unknown outpoint")]
    UnknownOutpoint,
    /// The same box appears twice in one transaction.
    #[error("duplicate input")]
    DuplicateInput,
    /// No authorized branch key signed the transaction message.
    #[error("unauthorized spend")]
    Unauthorized,
    /// Fallback-branch spend before the unlock height.
    #[error("timelock not expired")]
    Timelock,
    /// Input and output values differ.
    #[error("value not conserved")]
    Conservation,
}

/// Exact non-negative coin value. Construction rejects negative values and
/// zero denominators, so every held `Amount` is a valid reduced rational.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Amount(Ratio<i64>);

impl Amount {
    pub fn zero() -> Amount {
        Amount(Ratio::from_integer(0))
    }

    pub fn from_int(value: i64) -> Result<Amount, LedgerError> {
        if value < 0 {
            return Err(LedgerError::InvalidParameter("negative amount"));
        }
        Ok(Amount(Ratio::from_integer(value)))
    }

    pub fn new(numer: i64, denom: i64) -> Result<Amount, LedgerError> {
        if denom == 0 {
            return Err(LedgerError::InvalidParameter("zero denominator"));
        }
        let ratio = Ratio::new(numer, denom);
        if ratio < Ratio::from_integer(0) {
            return Err(LedgerError::InvalidParameter("negative amount"));
        }
        Ok(Amount(ratio))
    }

    pub fn checked_add(&self, other: &Amount) -> Option<Amount> {
        self.0.checked_add(&other.0).map(Amount)
    }

    pub fn is_zero(&self) -> bool {
        self.0 == Ratio::from_integer(0)
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self.0.denom() == 1 {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for Amount {
    type Err = LedgerError;

    fn from_str(s: &str) -> Result<Amount, LedgerError> {
        let parse_int =
            |t: &str| t.parse::<i64>().map_err(|_| LedgerError::InvalidParameter("bad amount"));
        match s.split_once('/') {
            Some((n, d)) => Amount::new(parse_int(n)?, parse_int(d)?),
            None => Amount::from_int(parse_int(s)?),
        }
    }
}

/// Transaction identifier: hash of the canonical transaction message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TxId(pub [u8; 32]);

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct OutPoint {
    pub txid: TxId,
    pub index: u32,
}

impl fmt::Display for OutPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.txid, self.index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpendCondition {
    /// Spendable by `pk` at any height.
    SingleKey(Point),
    /// Spendable by `pk_tmp` at any height, and by `pk_fallback` only at
    /// height >= `unlock_height`.
    TimeLocked { pk_tmp: Point, unlock_height: u64, pk_fallback: Point },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LockBox {
    pub value: Amount,
    pub condition: SpendCondition,
}

/// Inputs and witnesses are parallel lists: `witness[i]` must sign the
/// transaction message under the key authorized to spend `inputs[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transaction {
    pub inputs: Vec<OutPoint>,
    pub outputs: Vec<(Amount, SpendCondition)>,
    pub witness: Vec<Signature>,
}

fn put_amount(out: &mut Vec<u8>, amount: &Amount) {
    out.extend_from_slice(&amount.numer().to_be_bytes());
    out.extend_from_slice(&amount.denom().to_be_bytes());
}

fn put_condition(out: &mut Vec<u8>, condition: &SpendCondition) {
    match condition {
        SpendCondition::SingleKey(pk) => {
            out.push(0x01);
            out.extend_from_slice(&point_to_bytes(pk));
        }
        SpendCondition::TimeLocked { pk_tmp, unlock_height, pk_fallback } => {
            out.push(0x02);
            out.extend_from_slice(&point_to_bytes(pk_tmp));
            out.extend_from_slice(&unlock_height.to_be_bytes());
            out.extend_from_slice(&point_to_bytes(pk_fallback));
        }
    }
}

impl Transaction {
    /// Canonical signing message: inputs and outputs only, no witnesses, so
    /// the message is fixed before any signature exists.
    pub fn message(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"proswap/tx");
        out.extend_from_slice(&(self.inputs.len() as u32).to_be_bytes());
        for input in &self.inputs {
            out.extend_from_slice(&input.txid.0);
            out.extend_from_slice(&input.index.to_be_bytes());
        }
        out.extend_from_slice(&(self.outputs.len() as u32).to_be_bytes());
        for (value, condition) in &self.outputs {
            put_amount(&mut out, value);
            put_condition(&mut out, condition);
        }
        out
    }

    pub fn txid(&self) -> TxId {
        TxId(Sha256::digest(self.message()).into())
    }
}

/// One accepted transaction with the height it entered the chain at.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogEntry {
    pub height: u64,
    pub txid: TxId,
    pub tx: Transaction,
}

#[derive(Clone, Debug)]
pub struct Ledger {
    height: u64,
    boxes: BTreeMap<OutPoint, LockBox>,
    log: Vec<LogEntry>,
}

impl Ledger {
    /// Creates a chain at height 0 holding one single-key box per
    /// allocation. The genesis allocation is not a transaction and does not
    /// appear in the log.
    pub fn genesis(allocations: &[(Point, Amount)]) -> Ledger {
        let mut digest = Sha256::new();
        digest.update(b"proswap/genesis");
        for (pk, value) in allocations {
            digest.update(point_to_bytes(pk));
            digest.update(value.numer().to_be_bytes());
            digest.update(value.denom().to_be_bytes());
        }
        let genesis_id = TxId(digest.finalize().into());
        let boxes = allocations
            .iter()
            .enumerate()
            .map(|(i, (pk, value))| {
                let outpoint = OutPoint { txid: genesis_id, index: i as u32 };
                (outpoint, LockBox { value: *value, condition: SpendCondition::SingleKey(*pk) })
            })
            .collect();
        Ledger { height: 0, boxes, log: Vec::new() }
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    /// Live boxes, keyed by outpoint.
    pub fn boxes(&self) -> &BTreeMap<OutPoint, LockBox> {
        &self.boxes
    }

    /// Full log of accepted transactions with their witnesses.
    pub fn read(&self) -> &[LogEntry] {
        &self.log
    }

    /// Total value of boxes the key can spend at the current height.
    pub fn balance(&self, pk: &Point) -> Amount {
        self.boxes
            .values()
            .filter(|b| match &b.condition {
                SpendCondition::SingleKey(owner) => owner == pk,
                SpendCondition::TimeLocked { pk_tmp, unlock_height, pk_fallback } => {
                    pk_tmp == pk || (pk_fallback == pk && self.height >= *unlock_height)
                }
            })
            .fold(Amount::zero(), |acc, b| {
                acc.checked_add(&b.value).expect("ledger totals stay in range")
            })
    }

    /// Total live value across all boxes.
    pub fn total(&self) -> Amount {
        self.boxes.values().fold(Amount::zero(), |acc, b| {
            acc.checked_add(&b.value).expect("ledger totals stay in range")
        })
    }

    pub fn tick(&mut self, delta: u64) -> Result<(), LedgerError> {
        if delta == 0 {
            return Err(LedgerError::InvalidParameter("tick of zero"));
        }
        self.height += delta;
        Ok(())
    }

    /// Which error a signature earns against a condition at this height:
    /// the temporary branch always spends, the fallback branch only once the
    /// unlock height is reached.
    fn authorize(&self, condition: &SpendCondition, sig: &Signature, msg: &[u8]) -> Result<(), LedgerError> {
        match condition {
            SpendCondition::SingleKey(pk) => {
                if vrfy(pk, msg, sig) {
                    Ok(())
                } else {
                    Err(LedgerError::Unauthorized)
                }
            }
            SpendCondition::TimeLocked { pk_tmp, unlock_height, pk_fallback } => {
                if vrfy(pk_tmp, msg, sig) {
                    Ok(())
                } else if vrfy(pk_fallback, msg, sig) {
                    if self.height >= *unlock_height {
                        Ok(())
                    } else {
                        Err(LedgerError::Timelock)
                    }
                } else {
                    Err(LedgerError::Unauthorized)
                }
            }
        }
    }

    /// Validates and applies a transaction atomically. Accepted iff every
    /// input is a distinct live box, each witness signs the transaction
    /// message under a branch key authorized at the current height, and
    /// value is exactly conserved.
    pub fn post(&mut self, tx: &Transaction) -> Result<TxId, LedgerError> {
        if tx.inputs.is_empty() {
            return Err(LedgerError::InvalidParameter("transaction has no inputs"));
        }
        if tx.witness.len() != tx.inputs.len() {
            return Err(LedgerError::InvalidParameter("witness count mismatch"));
        }
        let distinct: BTreeSet<&OutPoint> = tx.inputs.iter().collect();
        if distinct.len() != tx.inputs.len() {
            return Err(LedgerError::DuplicateInput);
        }

        let msg = tx.message();
        let mut input_total = Amount::zero();
        for (outpoint, sig) in tx.inputs.iter().zip(tx.witness.iter()) {
            let lock_box = self.boxes.get(outpoint).ok_or(LedgerError::UnknownOutpoint)?;
            self.authorize(&lock_box.condition, sig, &msg)?;
            input_total = input_total
                .checked_add(&lock_box.value)
                .ok_or(LedgerError::InvalidParameter("amount overflow"))?;
        }
        let mut output_total = Amount::zero();
        for (value, _) in &tx.outputs {
            output_total = output_total
                .checked_add(value)
                .ok_or(LedgerError::InvalidParameter("amount overflow"))?;
        }
        if input_total != output_total {
            return Err(LedgerError::Conservation);
        }

        let txid = tx.txid();
        for outpoint in &tx.inputs {
            self.boxes.remove(outpoint);
        }
        for (i, (value, condition)) in tx.outputs.iter().enumerate() {
            let outpoint = OutPoint { txid, index: i as u32 };
            self.boxes.insert(outpoint, LockBox { value: *value, condition: *condition });
        }
        self.log.push(LogEntry { height: self.height, txid, tx: tx.clone() });
        Ok(txid)
    }

    /// Line-delimited log export: one record per accepted transaction, in
    /// acceptance order.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for entry in &self.log {
            out.push_str(&format_entry(entry));
            out.push('\n');
        }
        out
    }
}

fn format_condition(condition: &SpendCondition) -> String {
    match condition {
        SpendCondition::SingleKey(pk) => format!("key:{}", hex::encode(point_to_bytes(pk))),
        SpendCondition::TimeLocked { pk_tmp, unlock_height, pk_fallback } => format!(
            "lock:{}:{}:{}",
            hex::encode(point_to_bytes(pk_tmp)),
            unlock_height,
            hex::encode(point_to_bytes(pk_fallback))
        ),
    }
}

fn format_entry(entry: &LogEntry) -> String {
    let inputs: Vec<String> = entry.tx.inputs.iter().map(|o| o.to_string()).collect();
    let outputs: Vec<String> = entry
        .tx
        .outputs
        .iter()
        .map(|(value, condition)| format!("{}@{}", value, format_condition(condition)))
        .collect();
    let witness: Vec<String> =
        entry.tx.witness.iter().map(|sig| hex::encode(sig.to_bytes())).collect();
    format!(
        "tx {} h {} in {} out {} wit {}",
        entry.txid,
        entry.height,
        inputs.join(","),
        outputs.join(","),
        witness.join(",")
    )
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {reason}")]
pub struct ExportParseError {
    pub line: usize,
    pub reason: &'static str,
}

fn parse_txid(s: &str) -> Option<TxId> {
    let bytes = hex::decode(s).ok()?;
    Some(TxId(bytes.try_into().ok()?))
}

fn parse_point(s: &str) -> Option<Point> {
    point_from_bytes(&hex::decode(s).ok()?)
}

fn parse_outpoint(s: &str) -> Option<OutPoint> {
    let (txid, index) = s.split_once(':')?;
    Some(OutPoint { txid: parse_txid(txid)?, index: index.parse().ok()? })
}

fn parse_condition(s: &str) -> Option<SpendCondition> {
    if let Some(rest) = s.strip_prefix("key:") {
        return Some(SpendCondition::SingleKey(parse_point(rest)?));
    }
    let rest = s.strip_prefix("lock:")?;
    let mut parts = rest.splitn(3, ':');
    let pk_tmp = parse_point(parts.next()?)?;
    let unlock_height = parts.next()?.parse().ok()?;
    let pk_fallback = parse_point(parts.next()?)?;
    Some(SpendCondition::TimeLocked { pk_tmp, unlock_height, pk_fallback })
}

fn parse_output(s: &str) -> Option<(Amount, SpendCondition)> {
    let (value, condition) = s.split_once('@')?;
    Some((value.parse().ok()?, parse_condition(condition)?))
}

fn parse_signature(s: &str) -> Option<Signature> {
    let bytes = hex::decode(s).ok()?;
    if bytes.len() != SIGNATURE_LEN {
        return None;
    }
    Signature::from_bytes(&bytes)
}

fn parse_entry(line: &str) -> Result<LogEntry, &'static str> {
    let mut fields = line.split(' ');
    if fields.next() != Some("tx") {
        return Err("record must start with 'tx'");
    }
    let txid = fields
        .next()
        .and_then(parse_txid)
        .ok_or("malformed transaction id")?;
    if fields.next() != Some("h") {
        return Err("expected 'h' field");
    }
    let height: u64 =
        fields.next().and_then(|s| s.parse().ok()).ok_or("malformed height")?;
    if fields.next() != Some("in") {
        return Err("expected 'in' field");
    }
    let inputs: Vec<OutPoint> = fields
        .next()
        .ok_or("missing inputs")?
        .split(',')
        .map(parse_outpoint)
        .collect::<Option<_>>()
        .ok_or("malformed outpoint")?;
    if fields.next() != Some("out") {
        return Err("expected 'out' field");
    }
    let outputs: Vec<(Amount, SpendCondition)> = fields
        .next()
        .ok_or("missing outputs")?
        .split(',')
        .map(parse_output)
        .collect::<Option<_>>()
        .ok_or("malformed output")?;
    if fields.next() != Some("wit") {
        return Err("expected 'wit' field");
    }
    let witness: Vec<Signature> = fields
        .next()
        .ok_or("missing witnesses")?
        .split(',')
        .map(parse_signature)
        .collect::<Option<_>>()
        .ok_or("malformed signature")?;
    if fields.next().is_some() {
        return Err("trailing fields");
    }
    if witness.len() != inputs.len() {
        return Err("witness count mismatch");
    }
    let tx = Transaction { inputs, outputs, witness };
    if tx.txid() != txid {
        return Err("transaction id does not match contents");
    }
    Ok(LogEntry { height, txid, tx })
}

/// Parses an exported log. Any malformed record fails with its 1-based line
/// number.
pub fn parse_export(text: &str) -> Result<Vec<LogEntry>, ExportParseError> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let entry =
            parse_entry(line).map_err(|reason| ExportParseError { line: i + 1, reason })?;
        entries.push(entry);
    }
    Ok(entries)
}
