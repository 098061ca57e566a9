//! Command-line front end for the atlr model checker.
//!
//! Exit codes: 0 clean evaluation, 1 the formula is false at the requested
//! state (including false-up-to-bound), 2 input error, 3 resource cap
//! exceeded, 4 reduction/oracle discrepancy in `--mode both`.
//!
//! Stdout is deterministic byte-for-byte for fixed inputs and caps; timing
//! goes to stderr.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use atlr_core::{
    check_flat_all, load_model_str, oracle_check_flat_all, parse_formula, witness_to_string, Caps,
    Cgm, FlatResult, Formula, Verdict,
};

#[derive(Parser)]
#[command(name = "atlr", version, about = "Model checking for ATL with ability refinement")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a formula on a model, optionally emitting a witness refinement.
    Check(CheckArgs),
}

#[derive(Args)]
struct CheckArgs {
    /// Model file
    #[arg(long)]
    model: PathBuf,
    /// Formula text
    #[arg(long, required_unless_present = "formula_file", conflicts_with = "formula_file")]
    formula: Option<String>,
    /// File containing the formula
    #[arg(long)]
    formula_file: Option<PathBuf>,
    /// State to check (default: every state)
    #[arg(long)]
    state: Option<String>,
    /// Engine to run
    #[arg(long, value_enum, default_value_t = Mode::Reduction)]
    mode: Mode,
    /// Per-sub-agent alphabet bound (default: max(2, |Act_i|) per element)
    #[arg(long)]
    bound: Option<usize>,
    /// Cap on enumerated assignments per chain
    #[arg(long, default_value_t = 50_000)]
    max_assignments: usize,
    /// Cap on DNF clauses per constraint
    #[arg(long, default_value_t = 20_000)]
    max_dnf: usize,
    /// Search node budget per one-step satisfiability call (and the
    /// candidate budget of the oracle)
    #[arg(long, default_value_t = 2_000_000)]
    max_nodes: usize,
    /// Write the witness of the first chain proven at --state to this path
    #[arg(long, requires = "state")]
    witness: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Reduction,
    Oracle,
    Both,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Cmd::Check(args) = cli.cmd;
    match run_check(&args) {
        Ok((report, code)) => {
            // tolerate a closed pipe (e.g. piping into `head`)
            use std::io::Write;
            let _ = std::io::stdout().write_all(report.as_bytes());
            ExitCode::from(code)
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::True => "true",
        Verdict::False => "false",
        Verdict::FalseUpToBound => "false-up-to-bound",
        Verdict::ResourceExceeded => "resource-exceeded",
    }
}

/// The bound shared by both engines: the override, or the largest
/// per-element default among the formula's chains.
fn shared_bound(m: &Cgm, f: &Formula, args: &CheckArgs) -> usize {
    if let Some(b) = args.bound {
        return b;
    }
    let mut bound = 2;
    if let Ok(d) = atlr_core::flat_decompose(f) {
        for chain in &d.chains {
            for (agent, _) in &chain.elements {
                if let Ok(i) = m.agent_index(agent) {
                    bound = bound.max(m.alphabet(i).len());
                }
            }
        }
    }
    bound
}

fn run_check(args: &CheckArgs) -> Result<(String, u8), String> {
    use std::fmt::Write as _;
    let mut out = String::new();
    let started = Instant::now();
    let model_text = std::fs::read_to_string(&args.model)
        .map_err(|e| format!("cannot read model `{}`: {e}", args.model.display()))?;
    let model = load_model_str(&model_text).map_err(|e| e.to_string())?;

    let formula_text = match (&args.formula, &args.formula_file) {
        (Some(t), _) => t.clone(),
        (None, Some(p)) => std::fs::read_to_string(p)
            .map_err(|e| format!("cannot read formula file `{}`: {e}", p.display()))?,
        (None, None) => unreachable!("clap enforces one of --formula/--formula-file"),
    };
    let ambient: BTreeSet<String> = model.agents().iter().cloned().collect();
    let formula = parse_formula(formula_text.trim(), &ambient).map_err(|e| e.to_string())?;

    let states: Vec<usize> = match &args.state {
        Some(name) => vec![model.state_index(name).map_err(|e| e.to_string())?],
        None => (0..model.n_states()).collect(),
    };

    let bound = shared_bound(&model, &formula, args);
    let caps = Caps {
        bound: Some(bound),
        max_assignments: args.max_assignments,
        max_dnf: args.max_dnf,
        max_nodes: args.max_nodes,
    };

    let reduction: Option<FlatResult> = match args.mode {
        Mode::Reduction | Mode::Both => {
            Some(check_flat_all(&model, &formula, &caps).map_err(|e| e.to_string())?)
        }
        Mode::Oracle => None,
    };
    let oracle: Option<FlatResult> = match args.mode {
        Mode::Oracle | Mode::Both => Some(
            oracle_check_flat_all(&model, &formula, bound, args.max_nodes)
                .map_err(|e| e.to_string())?,
        ),
        Mode::Reduction => None,
    };

    let _ = writeln!(out, "formula: {formula}");
    let _ = writeln!(out, "bound: {bound}");
    let mut discrepancy = false;
    let mut any_resource = false;
    let mut single_verdict: Option<Verdict> = None;
    for &w in &states {
        let name = model.state_name(w);
        match (&reduction, &oracle) {
            (Some(r), None) => {
                let v = r.verdict(w);
                push_state_line(&mut out, name, v, r, w);
                record(&mut any_resource, &mut single_verdict, v, states.len());
            }
            (None, Some(o)) => {
                let v = o.verdict(w);
                push_state_line(&mut out, name, v, o, w);
                record(&mut any_resource, &mut single_verdict, v, states.len());
            }
            (Some(r), Some(o)) => {
                let rv = r.verdict(w);
                let ov = o.verdict(w);
                // the oracle's bounded search is sound but stays open on
                // anything it cannot witness directly, so only its definite
                // verdicts are binding; both engines search the same bound
                let agree = match (rv, ov) {
                    (Verdict::ResourceExceeded, _) | (_, Verdict::ResourceExceeded) => true,
                    (rv, Verdict::True) => rv == Verdict::True,
                    (rv, Verdict::False) => rv == Verdict::False,
                    _ => true,
                };
                let tag = if agree { "agree" } else { "DISCREPANCY" };
                let _ = writeln!(
                    out,
                    "state {name}: reduction={} oracle={} {tag}",
                    verdict_str(rv),
                    verdict_str(ov)
                );
                if let Some((k, homs)) = r.witness_at(w) {
                    let _ = writeln!(out, "  witness: chain {k} {}", summarize(homs));
                }
                if !agree {
                    discrepancy = true;
                }
                record(&mut any_resource, &mut single_verdict, rv, states.len());
                if ov == Verdict::ResourceExceeded {
                    any_resource = true;
                }
            }
            (None, None) => unreachable!(),
        }
    }

    if let Some(path) = &args.witness {
        let w = states[0];
        let source = reduction.as_ref().or(oracle.as_ref()).unwrap();
        match source.witness_at(w) {
            Some((_, homs)) => {
                let header = vec![
                    format!("formula: {formula}"),
                    format!("state: {}", model.state_name(w)),
                ];
                let text =
                    witness_to_string(&model, homs, &header).map_err(|e| e.to_string())?;
                std::fs::write(path, text)
                    .map_err(|e| format!("cannot write witness `{}`: {e}", path.display()))?;
                let _ = writeln!(out, "witness: written to {}", path.display());
            }
            None => {
                let _ = writeln!(out, "witness: none available at the requested state");
            }
        }
    }

    eprintln!("elapsed: {:.1} ms", started.elapsed().as_secs_f64() * 1000.0);

    if discrepancy {
        let _ = writeln!(out, "result: discrepancy");
        return Ok((out, 4));
    }
    let _ = writeln!(out, "result: ok");
    if any_resource {
        return Ok((out, 3));
    }
    if let Some(v) = single_verdict {
        let code = match v {
            Verdict::True => 0,
            Verdict::False | Verdict::FalseUpToBound => 1,
            Verdict::ResourceExceeded => 3,
        };
        return Ok((out, code));
    }
    Ok((out, 0))
}

fn record(any_resource: &mut bool, single: &mut Option<Verdict>, v: Verdict, n_states: usize) {
    if v == Verdict::ResourceExceeded {
        *any_resource = true;
    }
    if n_states == 1 {
        *single = Some(v);
    }
}

fn push_state_line(out: &mut String, name: &str, v: Verdict, r: &FlatResult, w: usize) {
    use std::fmt::Write as _;
    let _ = writeln!(out, "state {name}: {}", verdict_str(v));
    if let Some((k, homs)) = r.witness_at(w) {
        let _ = writeln!(out, "  witness: chain {k} {}", summarize(homs));
    }
}

fn summarize(homs: &[atlr_core::Homomorphism]) -> String {
    homs.iter()
        .map(|h| {
            let sizes: Vec<String> = h.sub_sizes().iter().map(|n| n.to_string()).collect();
            format!("{} -> {{{}}} [{}]", h.refined_agent, h.subagents.join(","), sizes.join("x"))
        })
        .collect::<Vec<_>>()
        .join("; ")
}
