//! Command-line front end for the probabilistic swap library: single demo
//! runs, seeded Monte-Carlo experiments, scripted adversary replays, proof
//! benchmarks, and ledger log inspection.
//!
//! Every sampling site is driven by an explicit seed (`--seed`, falling
//! back to `PROSWAP_SEED`, then zero), so identical invocations produce
//! byte-identical protocol output. Exit codes: 0 success, 1 usage error,
//! 2 protocol abort, 3 invariant violation.

use std::fmt::Write as _;
use std::fs;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use proswap::group::{base_mul, point_to_bytes, random_nonzero_scalar};
use proswap::ledger::{parse_export, Amount, SpendCondition};
use proswap::oprf::{oprf_keygen, MAX_ELL};
use proswap::proofs::batched::{prove_ywin_batched, verify_ywin_batched};
use proswap::swap::{
    derive_seed, run_swap, Scenario, SwapConfig, SwapError, SwapOutcome, SwapParams,
};
use proswap::transcript::Transcript;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Parser)]
#[command(
    name = "proswap",
    about = "Probabilistic atomic swaps on a simulated ledger",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one swap end to end and print the outcome record.
    Run(RunArgs),
    /// Run many independently seeded swaps and report the win rate.
    Montecarlo(MonteArgs),
    /// Replay a scripted deviation and check the honest side's safety.
    Adversary(AdvArgs),
    /// Time the aggregated well-formedness proof over a range of bit lengths.
    Bench(BenchArgs),
    /// Pretty-print a ledger log export.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct ProtocolArgs {
    /// Guess bit length; the win probability is 2^-ell.
    #[arg(long, default_value_t = 8)]
    ell: u32,
    /// Cut-and-choose instance count, even and at least 2.
    #[arg(long, default_value_t = 16)]
    lambda: usize,
    /// Dealer stake in coins; accepts integers or ratios like 3/2.
    #[arg(long, default_value = "256", value_parser = Amount::from_str)]
    nu: Amount,
    /// Party refund height.
    #[arg(long = "t-p", default_value_t = 10)]
    t_p: u64,
    /// Dealer refund height, strictly after the party's.
    #[arg(long = "t-d", default_value_t = 20)]
    t_d: u64,
    /// Experiment seed; falls back to PROSWAP_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Scripted deviation to play.
    #[arg(long, default_value = "honest", value_parser = Scenario::from_str)]
    scenario: Scenario,
    /// Lock the two stakes on two independent chains.
    #[arg(long = "cross-chain")]
    cross_chain: bool,
    /// Write the machine-readable part of the output to this file.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    proto: ProtocolArgs,
}

#[derive(Args)]
struct MonteArgs {
    #[command(flatten)]
    proto: ProtocolArgs,
    /// Number of independent trials, at least 100.
    #[arg(long, default_value_t = 1000)]
    trials: u64,
}

#[derive(Args)]
struct AdvArgs {
    #[command(flatten)]
    proto: ProtocolArgs,
    /// Seeded repetitions of the scenario.
    #[arg(long, default_value_t = 1)]
    trials: u64,
}

#[derive(Args)]
struct BenchArgs {
    /// Largest bit length to measure; rows cover 1 through this value.
    #[arg(long, default_value_t = 8)]
    ell: u32,
    /// Cut-and-choose instance count, even and at least 2.
    #[arg(long, default_value_t = 80)]
    lambda: usize,
    /// Experiment seed; falls back to PROSWAP_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the CSV to this file instead of standard output.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct InspectArgs {
    /// Ledger export file to render.
    path: String,
}

enum Failure {
    Usage(String),
    Abort(String),
    Invariant(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Abort(_) => 2,
            Failure::Invariant(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Abort(m) | Failure::Invariant(m) => m,
        }
    }
}

fn from_swap_error(err: SwapError) -> Failure {
    match err {
        SwapError::InvalidParameter(m) => Failure::Usage(m.to_string()),
        SwapError::Invariant(m) => Failure::Invariant(m.to_string()),
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, Failure> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("PROSWAP_SEED") {
        Ok(text) => text
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("PROSWAP_SEED is not a 64-bit integer: {text}"))),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(std::env::VarError::NotUnicode(_)) => {
            Err(Failure::Usage("PROSWAP_SEED is not valid text".into()))
        }
    }
}

fn build_config(proto: &ProtocolArgs) -> SwapConfig {
    SwapConfig {
        params: SwapParams {
            nu: proto.nu,
            ell: proto.ell,
            lambda: proto.lambda,
            t_p: proto.t_p,
            t_d: proto.t_d,
        },
        scenario: proto.scenario,
        cross_chain: proto.cross_chain,
        forced_target: None,
        forced_guess: None,
    }
}

fn write_output(path: &str, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {path}: {e}")))
}

/// Report output goes through here so a reader that closes stdout early
/// (`proswap inspect log | head`) ends the process quietly instead of
/// panicking on the broken pipe.
fn emit(text: &str) {
    use std::io::Write as _;
    let mut out = std::io::stdout().lock();
    if out.write_all(text.as_bytes()).and_then(|()| out.flush()).is_err() {
        std::process::exit(0);
    }
}

macro_rules! emitln {
    ($($arg:tt)*) => {{
        let mut line = format!($($arg)*);
        line.push('\n');
        emit(&line);
    }};
}

fn trial_seed(seed: u64, trial: u64) -> u64 {
    let label = format!("trial-{trial}");
    derive_seed(seed, label.as_bytes())
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let seed = resolve_seed(args.proto.seed)?;
    let cfg = build_config(&args.proto);
    let outcome = run_swap(&cfg, seed).map_err(from_swap_error)?;
    emit(&outcome.render(seed));
    if let Some(path) = &args.proto.out {
        write_output(path, &outcome.exports.concat())?;
    }
    match outcome.abort {
        Some(reason) => Err(Failure::Abort(reason.to_string())),
        None => Ok(()),
    }
}

fn cmd_montecarlo(args: &MonteArgs) -> Result<(), Failure> {
    if args.trials < 100 {
        return Err(Failure::Usage("at least 100 trials required".into()));
    }
    let seed = resolve_seed(args.proto.seed)?;
    let cfg = build_config(&args.proto);
    cfg.params.validate().map_err(from_swap_error)?;
    let mut wins = 0u64;
    let mut aborts = 0u64;
    let mut csv = String::from("trial,seed,won\n");
    for trial in 0..args.trials {
        let sub_seed = trial_seed(seed, trial);
        let outcome = run_swap(&cfg, sub_seed).map_err(from_swap_error)?;
        if outcome.party_won {
            wins += 1;
        }
        if outcome.abort.is_some() {
            aborts += 1;
        }
        let _ = writeln!(csv, "{trial},{sub_seed},{}", u8::from(outcome.party_won));
    }
    let n = args.trials as f64;
    let p_hat = wins as f64 / n;
    let p = 0.5f64.powi(cfg.params.ell as i32);
    let sigma = (p * (1.0 - p) / n).sqrt();
    let lo = p - 3.0 * sigma;
    let hi = p + 3.0 * sigma;
    emitln!("trials {}", args.trials);
    emitln!("wins {wins}");
    emitln!("aborts {aborts}");
    emitln!("p-hat {p_hat:.6}");
    emitln!("p-expected {p:.6}");
    emitln!("sigma {sigma:.6}");
    emitln!("ci-3-sigma [{lo:.6}, {hi:.6}]");
    emitln!("within-3-sigma {}", p_hat >= lo && p_hat <= hi);
    match &args.proto.out {
        Some(path) => write_output(path, &csv)?,
        None => emit(&csv),
    }
    Ok(())
}

/// The property the verdict asserts: whichever side plays honestly in the
/// scenario ends no poorer than it started, and a claimed reward implies
/// the dealer was paid.
fn safety_holds(cfg: &SwapConfig, outcome: &SwapOutcome) -> bool {
    let one = Amount::from_int(1).expect("one is a valid amount");
    let paid_iff_won = !outcome.party_won || outcome.dealer_paid;
    paid_iff_won
        && match cfg.scenario {
            Scenario::Honest => outcome.abort.is_none() && outcome.dealer_paid,
            Scenario::PrematureRefund => outcome.dealer_balance == cfg.params.nu,
            _ => outcome.party_balance == one,
        }
}

fn cmd_adversary(args: &AdvArgs) -> Result<(), Failure> {
    if args.trials == 0 {
        return Err(Failure::Usage("at least one trial required".into()));
    }
    let seed = resolve_seed(args.proto.seed)?;
    let cfg = build_config(&args.proto);
    cfg.params.validate().map_err(from_swap_error)?;
    let mut safe = 0u64;
    for trial in 0..args.trials {
        let outcome = run_swap(&cfg, trial_seed(seed, trial)).map_err(from_swap_error)?;
        if safety_holds(&cfg, &outcome) {
            safe += 1;
        }
    }
    emitln!("scenario {}", cfg.scenario);
    emitln!("trials {}", args.trials);
    emitln!("safe {safe}");
    let pass = safe == args.trials;
    emitln!("verdict {}", if pass { "pass" } else { "fail" });
    if pass {
        Ok(())
    } else {
        Err(Failure::Invariant("honest side lost funds".into()))
    }
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Failure> {
    if args.ell == 0 || args.ell > MAX_ELL {
        return Err(Failure::Usage(format!("bit length must be between 1 and {MAX_ELL}")));
    }
    if args.lambda < 2 || args.lambda % 2 != 0 {
        return Err(Failure::Usage("instance count must be even and at least 2".into()));
    }
    let seed = resolve_seed(args.seed)?;
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, b"bench"));
    let mut csv = String::from("ell,prove_s,verify_s,proof_bytes\n");
    for ell in 1..=args.ell {
        let kp = oprf_keygen(args.lambda, &mut rng)
            .map_err(|e| Failure::Usage(format!("evaluator key generation failed: {e}")))?;
        let w_win = random_nonzero_scalar(&mut rng);
        let y_win = base_mul(&w_win);
        let ctx = Transcript::new(b"proswap/bench");
        let start = Instant::now();
        let proof = prove_ywin_batched(&kp, 0, &w_win, ell, &ctx, &mut rng)
            .map_err(|e| Failure::Invariant(format!("prover failed: {e}")))?;
        let prove_s = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let ok = verify_ywin_batched(&kp.public, &y_win, ell, &proof, &ctx);
        let verify_s = start.elapsed().as_secs_f64();
        if !ok {
            return Err(Failure::Invariant("honest benchmark proof rejected".into()));
        }
        let bytes = proof.to_bytes().len();
        let _ = writeln!(csv, "{ell},{prove_s:.6},{verify_s:.6},{bytes}");
    }
    match &args.out {
        Some(path) => write_output(path, &csv)?,
        None => emit(&csv),
    }
    Ok(())
}

fn short_hex(bytes: &[u8]) -> String {
    let full = hex::encode(bytes);
    format!("{}..", &full[..12])
}

fn condition_summary(condition: &SpendCondition) -> String {
    match condition {
        SpendCondition::SingleKey(pk) => format!("key {}", short_hex(&point_to_bytes(pk))),
        SpendCondition::TimeLocked { pk_tmp, unlock_height, pk_fallback } => format!(
            "lock tmp {} fallback {} after height {}",
            short_hex(&point_to_bytes(pk_tmp)),
            short_hex(&point_to_bytes(pk_fallback)),
            unlock_height
        ),
    }
}

fn cmd_inspect(args: &InspectArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", args.path)))?;
    let entries = parse_export(&text).map_err(|e| Failure::Usage(e.to_string()))?;
    emitln!("entries {}", entries.len());
    for entry in &entries {
        emitln!("tx {} height {}", entry.txid, entry.height);
        for outpoint in &entry.tx.inputs {
            emitln!("  in  {outpoint}");
        }
        for (value, condition) in &entry.tx.outputs {
            emitln!("  out {value} via {}", condition_summary(condition));
        }
        emitln!("  wit {} signature(s)", entry.tx.witness.len());
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Montecarlo(args) => cmd_montecarlo(args),
        Cmd::Adversary(args) => cmd_adversary(args),
        Cmd::Bench(args) => cmd_bench(args),
        Cmd::Inspect(args) => cmd_inspect(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version renderings are not errors; everything else
            // is a usage problem and exits 1.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome_template() -> SwapOutcome {
        SwapOutcome {
            dealer_paid: false,
            party_won: false,
            abort: Some("setup rejected"),
            y_tgt: 0,
            y_gss: None,
            dealer_balance: Amount::from_int(2).unwrap(),
            party_balance: Amount::from_int(1).unwrap(),
            dealer_phase: proswap::swap::DealerPhase::Refunded,
            party_phase: proswap::swap::PartyPhase::Refunded,
            history: vec![],
            exports: vec![String::new()],
        }
    }

    fn config(scenario: Scenario) -> SwapConfig {
        SwapConfig {
            params: SwapParams {
                nu: Amount::from_int(2).unwrap(),
                ell: 2,
                lambda: 4,
                t_p: 10,
                t_d: 20,
            },
            scenario,
            cross_chain: false,
            forced_target: None,
            forced_guess: None,
        }
    }

    #[test]
    fn safety_tracks_the_honest_side() {
        // Dealer deviations: the party must keep its coin.
        let cfg = config(Scenario::MalformedCiphertext);
        let whole = outcome_template();
        assert!(safety_holds(&cfg, &whole));
        let mut robbed = outcome_template();
        robbed.party_balance = Amount::zero();
        assert!(!safety_holds(&cfg, &robbed));

        // Party deviation: the dealer must keep its stake.
        let cfg = config(Scenario::PrematureRefund);
        assert!(safety_holds(&cfg, &whole));
        let mut robbed = outcome_template();
        robbed.dealer_balance = Amount::zero();
        assert!(!safety_holds(&cfg, &robbed));

        // Honest play must complete with the dealer paid.
        let cfg = config(Scenario::Honest);
        assert!(!safety_holds(&cfg, &whole));
        let mut done = outcome_template();
        done.abort = None;
        done.dealer_paid = true;
        assert!(safety_holds(&cfg, &done));

        // A reward without payment is never safe.
        let mut stolen = outcome_template();
        stolen.abort = None;
        stolen.party_won = true;
        stolen.dealer_paid = false;
        assert!(!safety_holds(&config(Scenario::WithholdClaim), &stolen));
    }

    #[test]
    fn trial_seeds_are_label_separated() {
        assert_ne!(trial_seed(7, 0), trial_seed(7, 1));
        assert_ne!(trial_seed(7, 0), trial_seed(8, 0));
        assert_eq!(trial_seed(7, 3), trial_seed(7, 3));
    }

    #[test]
    fn flag_seed_beats_environment() {
        // The explicit flag short-circuits before the environment is read.
        assert!(matches!(resolve_seed(Some(41)), Ok(41)));
    }
}
