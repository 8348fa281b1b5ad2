use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use lorcheck::circuit::{add_stuttering, build_miter, encode, load, parse_circuit, TransitionSystem};
use lorcheck::dimacs::{parse_pqe, write_clauses};
use lorcheck::pclor::{check, CheckError, CheckOptions, CheckResult, Engine, Guess, Witness};
use lorcheck::pqe::{take_out, PqeError, PqeOptions};
use lorcheck::qe_oracle::check_pqe;
use lorcheck::witness::{parse_invariant, parse_trace, verify_invariant, verify_trace, write_invariant, write_trace};

const HOLDS: u8 = 0;
const FAILS: u8 = 1;
const UNKNOWN: u8 = 2;
const INPUT_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "lorcheck", version, about = "Safety checking of sequential circuits by logic relaxation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the property of a circuit.
    Check {
        file: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Check two circuits for sequential equivalence through their miter.
    Sec {
        file_n: PathBuf,
        file_k: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Take the A clauses of an extended DIMACS task out of the quantifier.
    Pqe {
        file: PathBuf,
        /// Cross-check the answer by exhaustive elimination.
        #[arg(long)]
        verify: bool,
        #[arg(long)]
        pqe_budget: Option<u64>,
    },
    /// Replay a trace or check an invariant against a circuit.
    VerifyWitness {
        circuit: PathBuf,
        witness: PathBuf,
        /// Treat the circuit as one half of a miter with this circuit.
        #[arg(long)]
        miter_with: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunFlags {
    /// lor or lor-ic; `sec` defaults to lor-ic.
    #[arg(long)]
    engine: Option<Engine>,
    /// drop:<tag> or drop:all; `sec` defaults to drop:interface.
    #[arg(long)]
    guess: Option<Guess>,
    /// Run without an initial relaxation even where one is the default.
    #[arg(long, conflicts_with = "guess")]
    no_guess: bool,
    #[arg(long)]
    max_frames: Option<usize>,
    /// Branch nodes per quantifier elimination call.
    #[arg(long)]
    pqe_budget: Option<u64>,
    /// Accepted for reproducibility; every choice is already deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Check the written witness independently before exiting.
    #[arg(long)]
    verify: bool,
    /// Where to write the invariant or trace.
    #[arg(long)]
    witness: Option<PathBuf>,
    /// Check every frame against explicit reachability (small circuits).
    #[arg(long)]
    oracle_check: bool,
}

struct InputError(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.into())
    }
}

fn read(p: &Path) -> Result<String, InputError> {
    Ok(fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Check { file, run } => cmd_check(&file, run),
        Cmd::Sec { file_n, file_k, run } => cmd_sec(&file_n, &file_k, run),
        Cmd::Pqe {
            file,
            verify,
            pqe_budget,
        } => cmd_pqe(&file, verify, pqe_budget),
        Cmd::VerifyWitness {
            circuit,
            witness,
            miter_with,
        } => cmd_verify_witness(&circuit, &witness, miter_with.as_deref()),
    };
    match r {
        Ok(code) => ExitCode::from(code),
        Err(InputError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(INPUT_ERROR)
        }
    }
}

struct Labels {
    holds: &'static str,
    fails: &'static str,
}

fn sibling(file: &Path, ext: &str) -> PathBuf {
    file.with_extension(ext)
}

fn run(orig: &TransitionSystem, flags: &RunFlags, defaults: (Engine, Option<Guess>), base: &Path, labels: Labels) -> Result<u8, InputError> {
    let ts = if orig.stuttered { orig.clone() } else { add_stuttering(orig)? };
    let guess = if flags.no_guess { None } else { flags.guess.clone().or(defaults.1) };
    let mut pqe = PqeOptions::default();
    if let Some(b) = flags.pqe_budget {
        pqe.node_budget = b;
    }
    let opts = CheckOptions {
        engine: flags.engine.unwrap_or(defaults.0),
        max_frames: flags.max_frames,
        pqe,
        guess,
        seed_with_prop: None,
        check_co: flags.oracle_check,
        oracle_check: flags.oracle_check,
    };
    let start = Instant::now();
    let res = check(&ts, &opts);
    let elapsed = start.elapsed();
    let r: CheckResult = match res {
        Ok(r) => r,
        Err(e @ (CheckError::Pqe { .. } | CheckError::MaxFrames(_))) => {
            println!("verdict: unknown ({e})");
            if let CheckError::Pqe { frames, .. } = &e {
                let counts: Vec<String> = frames.iter().map(|f| f.len().to_string()).collect();
                println!("clauses per frame: {}", counts.join(" "));
            }
            return Ok(UNKNOWN);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(UNKNOWN);
        }
    };
    let (verdict, code, text, ext) = match &r.witness {
        Witness::Invariant(inv) => (labels.holds, HOLDS, write_invariant(orig, inv), "inv"),
        Witness::Counterexample(t) => (labels.fails, FAILS, write_trace(t), "trace"),
    };
    let path = flags.witness.clone().unwrap_or_else(|| sibling(base, ext));
    fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
    println!("verdict: {verdict}");
    println!("engine: {}", if opts.engine == Engine::Lor { "lor" } else { "lor-ic" });
    if let Some(g) = &opts.guess {
        println!("guess: {g}");
    }
    println!("frames: {}", r.frames);
    if let Some(last) = r.iterations.last() {
        let counts: Vec<String> = last.clause_counts.iter().map(usize::to_string).collect();
        println!("clauses per frame: {}", counts.join(" "));
    }
    println!("pqe nodes: {}", r.pqe_nodes);
    println!("seed: {}", flags.seed);
    println!("time: {:.3}s", elapsed.as_secs_f64());
    println!("witness: {}", path.display());
    if flags.oracle_check {
        let bad = r.iterations.iter().find(|it| {
            it.boundary == Some(false) || it.co.as_ref().is_some_and(|c| !c.passes())
        });
        match bad {
            None => println!("oracle check: ok"),
            Some(it) => {
                println!("oracle check: FAILED at depth {}", it.j);
                return Ok(UNKNOWN);
            }
        }
    }
    if flags.verify {
        match verify_text(orig, &fs::read_to_string(&path)?) {
            Ok(()) => println!("witness check: verified"),
            Err(msg) => {
                println!("witness check: FAILED: {msg}");
                return Ok(UNKNOWN);
            }
        }
    }
    Ok(code)
}

fn cmd_check(file: &Path, flags: RunFlags) -> Result<u8, InputError> {
    let (_, ts) = load(&read(file)?).with_context(|| format!("in {}", file.display()))?;
    let labels = Labels {
        holds: "holds",
        fails: "fails",
    };
    run(&ts, &flags, (Engine::Lor, None), file, labels)
}

fn miter_system(file_n: &Path, file_k: &Path) -> Result<TransitionSystem, InputError> {
    let n = parse_circuit(&read(file_n)?).with_context(|| format!("in {}", file_n.display()))?;
    let k = parse_circuit(&read(file_k)?).with_context(|| format!("in {}", file_k.display()))?;
    let (m, prop) = build_miter(&n, &k)?;
    Ok(encode(&m, &prop)?)
}

fn cmd_sec(file_n: &Path, file_k: &Path, flags: RunFlags) -> Result<u8, InputError> {
    let ts = miter_system(file_n, file_k)?;
    let labels = Labels {
        holds: "equivalent",
        fails: "inequivalent",
    };
    let guess = Guess::DropTag(lorcheck::circuit::INTERFACE_TAG.to_string());
    run(&ts, &flags, (Engine::LorIc, Some(guess)), &sibling(file_n, "sec"), labels)
}

fn cmd_pqe(file: &Path, verify: bool, budget: Option<u64>) -> Result<u8, InputError> {
    let task = parse_pqe(&read(file)?).with_context(|| format!("in {}", file.display()))?;
    let mut opts = PqeOptions::default();
    if let Some(b) = budget {
        opts.node_budget = b;
    }
    let out = match take_out(&task, &opts) {
        Ok(o) => o,
        Err(e @ PqeError::Budget(_)) => {
            eprintln!("{e}");
            return Ok(UNKNOWN);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(UNKNOWN);
        }
    };
    print!("{}", write_clauses(&out.a_star));
    if verify {
        match check_pqe(&task.quantified, &task.a, &task.b, &out.a_star) {
            Ok(true) => println!("c verified"),
            Ok(false) => {
                println!("c verification FAILED");
                return Ok(FAILS);
            }
            Err(e) => println!("c verification skipped: {e}"),
        }
    }
    Ok(HOLDS)
}

/// Replays a trace or checks an invariant, telling them apart by content.
fn verify_text(ts: &TransitionSystem, text: &str) -> Result<(), String> {
    let is_trace = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .is_some_and(|l| l.starts_with("step"));
    if is_trace {
        let t = parse_trace(text).map_err(|e| e.to_string())?;
        verify_trace(ts, &t).map_err(|e| e.to_string())
    } else {
        let (names, inv) = parse_invariant(text).map_err(|e| e.to_string())?;
        verify_invariant(ts, &names, &inv).map_err(|e| e.to_string())
    }
}

fn cmd_verify_witness(circuit: &Path, witness: &Path, miter_with: Option<&Path>) -> Result<u8, InputError> {
    let ts = match miter_with {
        Some(k) => miter_system(circuit, k)?,
        None => load(&read(circuit)?).with_context(|| format!("in {}", circuit.display()))?.1,
    };
    match verify_text(&ts, &read(witness)?) {
        Ok(()) => {
            println!("ok");
            Ok(HOLDS)
        }
        Err(msg) => {
            println!("invalid witness: {msg}");
            Ok(FAILS)
        }
    }
}
