use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use twinsec::harness::{self, RunError, Scenario, ScenarioError};
use twinsec::netsim::read_jsonl;
use twinsec::plant::format_nanos;
use twinsec::wire::{builtin_schemas, decode_message, encode_message, split_message};

#[derive(Parser)]
#[command(name = "twinsec", version, about = "Person-in-the-middle attacks on a simulated digital-twin command link")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or builtin and write its outputs
    Run {
        /// Path to a scenario JSON file, or the name of a builtin
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Output root; files go to <DIR>/<scenario name>/
        #[arg(long, env = "TWINSEC_OUT", default_value = "twinsec-out")]
        out: PathBuf,
        /// Drop the attack plan
        #[arg(long)]
        no_attack: bool,
        /// Tag every message and verify tags on receipt
        #[arg(long)]
        auth: bool,
        /// Enable the scenario's anomaly limits on the plant topic
        #[arg(long)]
        anomaly: bool,
    },
    /// Pretty-print a trace, decoding headers and known message types
    Inspect { trace: PathBuf },
    /// Decode hex bytes with a schema, then re-encode and compare
    Codec {
        #[arg(long)]
        schema: String,
        #[arg(long)]
        hex: String,
    },
    /// List the embedded scenarios
    ListBuiltins,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Scenario(e) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn resolve(arg: &str) -> Result<Scenario, Failure> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(s) = harness::builtin(arg) {
            return Ok(s);
        }
    }
    Ok(harness::load_scenario(path)?)
}

fn run(
    scenario: &str,
    seed: Option<u64>,
    out: &Path,
    no_attack: bool,
    auth: bool,
    anomaly: bool,
) -> Result<(), Failure> {
    let mut s = resolve(scenario)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if no_attack {
        s.attack = None;
    }
    s.guards.auth.enabled |= auth;
    s.guards.anomaly.enabled |= anomaly;
    s.validate()?;
    let dir = out.join(&s.name);
    let report = harness::run_scenario(&s, &dir)?;
    println!("scenario      {} (seed {})", report.scenario, report.seed);
    println!("output        {}", dir.display());
    println!("max divergence {}", report.safety.max_divergence);
    match &report.safety.first_violation {
        Some(v) => println!("first violation {:?} at t={}", v.kind, format_nanos(v.t)),
        None => println!("first violation none"),
    }
    println!(
        "attacker      seen {} mutated {}",
        report.msgs_seen(),
        report.msgs_mutated()
    );
    println!("rejected      {}", report.msgs_rejected());
    if report.auth_enabled {
        println!("note          {}", report.integrity_note);
    }
    println!("wall clock    {:.3} s", report.wall_clock.as_secs_f64());
    Ok(())
}

fn inspect(path: &Path) -> Result<(), Failure> {
    let file = File::open(path).map_err(|e| Failure::Usage(format!("cannot open {}: {e}", path.display())))?;
    let records = read_jsonl(BufReader::new(file))
        .map_err(|e| Failure::Usage(format!("cannot parse {}: {e}", path.display())))?;
    print!("{}", harness::inspect_trace(&records));
    Ok(())
}

fn codec(schema: &str, hex_bytes: &str) -> Result<(), Failure> {
    let schema = builtin_schemas()
        .lookup(schema)
        .ok_or_else(|| Failure::Usage(format!("unknown schema {schema}")))?;
    let cleaned: String = hex_bytes.chars().filter(|c| !c.is_whitespace()).collect();
    let bytes = hex::decode(&cleaned).map_err(|e| Failure::Usage(format!("bad hex: {e}")))?;
    let (msg, trailer) =
        split_message(&bytes).ok_or_else(|| Failure::Runtime("buffer shorter than its length prefix".into()))?;
    let value = decode_message(&schema, msg).map_err(|e| Failure::Runtime(format!("decode failed: {e}")))?;
    print!("{}", value.render());
    if !trailer.is_empty() {
        println!("trailer {} ({} bytes)", hex::encode(trailer), trailer.len());
    }
    let again = encode_message(&schema, &value).map_err(|e| Failure::Runtime(e.to_string()))?;
    if again == msg {
        println!("re-encode identical ({} bytes)", again.len());
        Ok(())
    } else {
        Err(Failure::Runtime(format!("re-encode differs: {}", hex::encode(again))))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run {
            scenario,
            seed,
            out,
            no_attack,
            auth,
            anomaly,
        } => run(&scenario, seed, &out, no_attack, auth, anomaly),
        Command::Inspect { trace } => inspect(&trace),
        Command::Codec { schema, hex } => codec(&schema, &hex),
        Command::ListBuiltins => {
            for name in harness::builtin_names() {
                println!("{name}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
