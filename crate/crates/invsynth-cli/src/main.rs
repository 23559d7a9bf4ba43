//! `invsynth`: check, synthesize and eliminate over problem files.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use invsynth::hierarchy::{dump_smt2, dump_text, reduce_chain};
use invsynth::invariant_loop::{exit, run, trace_lines, Check, EliminatePolicy, LoopConfig, LoopOutcome, Problem};
use invsynth::logic::{Clause, ClauseSet, Formula, Name, Term};
use invsynth::qelim::{self, QeConfig};
use invsynth::smt::{SmtClient, SolverConfig};
use invsynth::specfile::{self, Mode, ProblemSpec};
use invsynth::symbol_elim::{cleanup, eliminate_symbols, verify_gamma};
use report::{Failure, RunReport};

#[derive(Parser)]
#[command(name = "invsynth", version, about = "Synthesis of universally quantified inductive invariants")]
struct Cli {
    /// Solver executable (default: $INVSYNTH_SOLVER or z3).
    #[arg(long, global = true)]
    solver: Option<PathBuf>,
    /// Extra solver argument; replaces the default `-in -smt2` when given.
    #[arg(long = "solver-arg", global = true, allow_hyphen_values = true)]
    solver_arg: Vec<String>,
    /// Per-query solver timeout in seconds.
    #[arg(long, global = true)]
    timeout: Option<f64>,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Records,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LoopMode {
    Naive,
    Refined,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ElimModeArg {
    Full,
    Split,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Smt2,
    Trace,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DumpFormat {
    Text,
    Smt2,
}

#[derive(Args, Clone, Default)]
struct LoopArgs {
    /// Iteration budget.
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<LoopMode>,
    /// Kept symbols, comma separated.
    #[arg(long, value_delimiter = ',')]
    keep: Option<Vec<String>>,
    /// Kept constants eliminated anyway, comma separated.
    #[arg(long = "eliminate-const", value_delimiter = ',')]
    eliminate_const: Vec<String>,
    /// Eliminate every kept constant not occurring below a kept function.
    #[arg(long = "eliminate-unguarded", conflicts_with = "eliminate_const")]
    eliminate_unguarded: bool,
    /// Stop when a strengthening leaves the array property fragment.
    #[arg(long = "apf-guard")]
    apf_guard: bool,
    /// Re-check every strengthening against the query it refutes.
    #[arg(long)]
    verify: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check whether the property (or a candidate) is an inductive invariant.
    Check {
        spec: PathBuf,
        /// File of clause statements to check instead of the property.
        #[arg(long)]
        candidate: Option<PathBuf>,
        #[command(flatten)]
        opts: LoopArgs,
        #[arg(long, value_enum)]
        emit: Vec<Emit>,
        #[arg(long = "out-dir", default_value = "invsynth-out")]
        out_dir: PathBuf,
    },
    /// Strengthen the property into an inductive invariant.
    Synth {
        spec: PathBuf,
        #[command(flatten)]
        opts: LoopArgs,
        /// Artifacts written to the output directory.
        #[arg(long, value_enum)]
        emit: Vec<Emit>,
        #[arg(long = "out-dir", default_value = "invsynth-out")]
        out_dir: PathBuf,
        /// Write the iteration trace to this file.
        #[arg(long = "dump-trace")]
        dump_trace: Option<PathBuf>,
    },
    /// One symbol elimination step on the negated property.
    Elim {
        spec: PathBuf,
        #[arg(long, value_delimiter = ',')]
        keep: Option<Vec<String>>,
        #[arg(long = "eliminate-const", value_delimiter = ',')]
        eliminate_const: Vec<String>,
        #[arg(long, value_enum, default_value_t = ElimModeArg::Full)]
        mode: ElimModeArg,
        /// Print the reduced query before elimination.
        #[arg(long = "dump-reduction", value_enum)]
        dump_reduction: Option<DumpFormat>,
        #[arg(long)]
        verify: bool,
    },
    /// Quantifier elimination on a formula over the signature of a spec.
    Qe {
        spec: PathBuf,
        /// Constants to eliminate, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        vars: Vec<String>,
        formula: String,
    },
}

fn solver_config(cli: &Cli) -> Result<SolverConfig, Failure> {
    let mut cfg = SolverConfig::from_env();
    if let Some(s) = &cli.solver {
        cfg.executable = s.clone();
    }
    if !cli.solver_arg.is_empty() {
        cfg.args = cli.solver_arg.clone();
    }
    if let Some(t) = cli.timeout {
        if !t.is_finite() || t <= 0.0 {
            return Err(Failure::spec("timeout must be a positive number of seconds"));
        }
        cfg = cfg.with_timeout(Duration::from_secs_f64(t)).map_err(|e| Failure::spec(e.to_string()))?;
    }
    Ok(cfg)
}

fn load(path: &Path, rep: &mut RunReport) -> Result<ProblemSpec, Failure> {
    let src = std::fs::read_to_string(path).map_err(|e| Failure::spec(format!("{}: {}", path.display(), e)))?;
    rep.set_spec(path, &src);
    specfile::parse(&src).map_err(|e| Failure::spec(format!("{}:{}", path.display(), e)))
}

fn names(v: &[String]) -> Vec<Name> {
    v.iter().map(|s| Name::from(s.as_str())).collect()
}

fn loop_config(spec: &ProblemSpec, a: &LoopArgs) -> LoopConfig {
    let mut cfg = LoopConfig::from_spec(spec);
    if let Some(n) = a.max_iters {
        cfg.max_iterations = n;
    }
    if let Some(m) = a.mode {
        cfg.mode = if m == LoopMode::Refined { Mode::Refined } else { Mode::Naive };
    }
    if let Some(k) = &a.keep {
        cfg.keep = Some(names(k));
    }
    if a.eliminate_unguarded {
        cfg.eliminate = EliminatePolicy::Unguarded;
    } else if !a.eliminate_const.is_empty() {
        cfg.eliminate = EliminatePolicy::Explicit(names(&a.eliminate_const));
    }
    cfg.apf_guard |= a.apf_guard;
    cfg.verify |= a.verify;
    cfg
}

fn client(cfg: SolverConfig, emit: &[Emit], out_dir: &Path, rep: &mut RunReport) -> Result<SmtClient, Failure> {
    let c = SmtClient::new(cfg);
    if emit.contains(&Emit::Smt2) {
        let dir = out_dir.join("smt2");
        std::fs::create_dir_all(&dir).map_err(|e| Failure::io(format!("{}: {}", dir.display(), e)))?;
        rep.artifacts.push(dir.display().to_string());
        return Ok(c.with_emit_dir(dir));
    }
    Ok(c)
}

fn write_file(path: &Path, text: &str, rep: &mut RunReport) -> Result<(), Failure> {
    if let Some(d) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d).map_err(|e| Failure::io(format!("{}: {}", d.display(), e)))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::io(format!("{}: {}", path.display(), e)))?;
    rep.artifacts.push(path.display().to_string());
    Ok(())
}

fn cmd_check(cli: &Cli, rep: &mut RunReport) -> Result<i32, Failure> {
    let Cmd::Check { spec, candidate, opts, emit, out_dir } = &cli.cmd else { unreachable!() };
    let spec = load(spec, rep)?;
    let cand = match candidate {
        Some(p) => {
            let src = std::fs::read_to_string(p).map_err(|e| Failure::spec(format!("{}: {}", p.display(), e)))?;
            specfile::parse_clauses(&src, &spec.signature).map_err(|e| Failure::spec(format!("{}:{}", p.display(), e)))?
        }
        None => spec.property.clone(),
    };
    let client = client(solver_config(cli)?, emit, out_dir, rep)?;
    let problem = Problem::new(&spec, loop_config(&spec, opts), &client).map_err(|e| Failure::spec(e.to_string()))?;
    rep.caveats.extend(problem.caveats.iter().cloned());
    rep.lines.push(format!("candidate:\n{}", indent(&cand.to_string())));
    let t = Instant::now();
    let v = problem.check_initiation(&cand);
    rep.timing("initiation", t);
    rep.insert("initiation", v.status.keyword());
    if v.sat() {
        rep.outcome = "not_inductive".into();
        rep.lines.push("initiation fails".into());
        rep.lines.push(format!("countermodel: {}", v.model.unwrap_or_default()));
        return Ok(exit::NOT_INDUCTIVE);
    }
    if !v.unsat() {
        rep.outcome = "unknown".into();
        rep.lines.push(format!("initiation {}: {}", v.status.keyword(), v.diagnostic.trim()));
        return Ok(exit::UNKNOWN);
    }
    let t = Instant::now();
    let c = problem.check_consecution(&cand, &cand, "sk").map_err(|e| Failure::spec(e.to_string()))?;
    rep.timing("consecution", t);
    rep.stats(&client);
    match c {
        Check::Holds => {
            rep.outcome = "inductive".into();
            rep.insert("consecution", "unsat");
            rep.lines.push("inductive invariant".into());
            Ok(exit::OK)
        }
        Check::Fails(vs) => {
            rep.outcome = "not_inductive".into();
            rep.insert("consecution", "sat");
            rep.lines.push("consecution fails".into());
            for v in &vs {
                let fs: Vec<String> = v.updates.iter().map(|f| f.to_string()).collect();
                rep.lines.push(format!("violation via [{}]: {}", fs.join(", "), v.disjunct));
                if let Some(m) = &v.model {
                    rep.lines.push(format!("countermodel: {}", m));
                }
            }
            Ok(exit::NOT_INDUCTIVE)
        }
        Check::Unknown(r) => {
            rep.outcome = "unknown".into();
            rep.insert("consecution", "unknown");
            rep.lines.push(format!("consecution {}", r));
            Ok(exit::UNKNOWN)
        }
    }
}

fn indent(s: &str) -> String {
    s.lines().map(|l| format!("  {}", l)).collect::<Vec<_>>().join("\n")
}

fn cmd_synth(cli: &Cli, rep: &mut RunReport) -> Result<i32, Failure> {
    let Cmd::Synth { spec, opts, emit, out_dir, dump_trace } = &cli.cmd else { unreachable!() };
    let spec = load(spec, rep)?;
    let client = client(solver_config(cli)?, emit, out_dir, rep)?;
    let t = Instant::now();
    let problem = Problem::new(&spec, loop_config(&spec, opts), &client).map_err(|e| Failure::spec(e.to_string()))?;
    rep.timing("validation", t);
    let t = Instant::now();
    let syn = run(&problem);
    rep.timing("synthesis", t);
    rep.stats(&client);
    rep.caveats.extend(syn.caveats.iter().cloned());
    rep.outcome = syn.outcome.keyword().into();
    rep.insert("termination", &format!("{:?}", syn.termination));
    rep.insert("keep", &syn.keep.join(", "));
    if !syn.eliminated.is_empty() {
        rep.insert("eliminated", &syn.eliminated.join(", "));
    }
    rep.insert("monitored", &syn.monitored.to_string());
    rep.insert("alarms", &syn.alarms.len().to_string());
    rep.details = serde_json::to_value(&syn.outcome).unwrap_or_default();
    for a in &syn.alarms {
        rep.lines.push(format!("monitor alarm: {}", a));
    }
    for r in &syn.records {
        rep.lines.push(format!(
            "iteration {}: consecution {}, violating [{}], {} new clause(s)",
            r.iteration,
            r.consecution,
            r.violating_updates.join(", "),
            r.gamma_clauses
        ));
    }
    match &syn.outcome {
        LoopOutcome::Invariant { invariant, iterations } => {
            rep.lines.push(format!("invariant after {} iteration(s):\n{}", iterations, indent(&invariant.to_string())));
        }
        LoopOutcome::NoUniversalInvariant { countermodel, iteration } => {
            rep.lines.push(format!("no universal inductive invariant over the kept symbols (iteration {})", iteration));
            rep.lines.push(format!("initial-state countermodel: {}", countermodel));
        }
        LoopOutcome::Diverged { reason, iteration } => rep.lines.push(format!("diverged at iteration {}: {}", iteration, reason)),
        LoopOutcome::BudgetExhausted { iterations, diagnostic } => {
            rep.lines.push(format!("budget of {} iteration(s) exhausted: {}", iterations, diagnostic))
        }
        LoopOutcome::Unknown { reason, iteration } => rep.lines.push(format!("unknown at iteration {}: {}", iteration, reason)),
    }
    let trace = trace_lines(&syn);
    if emit.contains(&Emit::Trace) {
        write_file(&out_dir.join("trace.jsonl"), &trace, rep)?;
    }
    if let Some(p) = dump_trace {
        write_file(p, &trace, rep)?;
    }
    rep.records = syn.records.iter().filter_map(|r| serde_json::to_value(r).ok()).collect();
    Ok(syn.outcome.exit_code())
}

fn cmd_elim(cli: &Cli, rep: &mut RunReport) -> Result<i32, Failure> {
    let Cmd::Elim { spec, keep, eliminate_const, mode, dump_reduction, verify } = &cli.cmd else { unreachable!() };
    let spec = load(spec, rep)?;
    let client = SmtClient::new(solver_config(cli)?);
    let args = LoopArgs {
        keep: keep.clone(),
        eliminate_const: eliminate_const.clone(),
        mode: Some(if *mode == ElimModeArg::Split { LoopMode::Refined } else { LoopMode::Naive }),
        ..LoopArgs::default()
    };
    let problem = Problem::new(&spec, loop_config(&spec, &args), &client).map_err(|e| Failure::spec(e.to_string()))?;
    rep.caveats.extend(problem.caveats.iter().cloned());
    let t = Instant::now();
    let reqs = match problem.property_requests() {
        Ok(r) => r,
        Err(r) => {
            rep.outcome = "unknown".into();
            rep.lines.push(r);
            return Ok(exit::UNKNOWN);
        }
    };
    let mut clauses: Vec<Clause> = Vec::new();
    let mut code = exit::OK;
    for req in &reqs {
        if let Some(fmt) = dump_reduction {
            match reduce_chain(&req.working_chain(), &req.goal) {
                Ok(r) => rep.lines.push(match fmt {
                    DumpFormat::Text => dump_text(&r),
                    DumpFormat::Smt2 => dump_smt2(&r),
                }),
                Err(e) => rep.lines.push(format!("reduction failed: {}", e)),
            }
        }
        match eliminate_symbols(req) {
            Ok(res) => {
                if *verify {
                    let v = verify_gamma(req, &res.gamma, &client);
                    rep.lines.push(format!("verification: {}", v.status.keyword()));
                    if !v.unsat() {
                        code = exit::UNKNOWN;
                    }
                }
                if res.trace.locality_assumed {
                    rep.caveats.push("locality assumed for at least one level of the reduction".into());
                }
                clauses.extend(res.gamma.clauses);
            }
            Err(e) => {
                rep.outcome = "unknown".into();
                rep.lines.push(format!("symbol elimination failed: {}", e));
                return Ok(exit::UNKNOWN);
            }
        }
    }
    rep.timing("elimination", t);
    rep.stats(&client);
    let gamma = ClauseSet::new(cleanup(clauses));
    rep.outcome = if code == exit::OK { "ok".into() } else { "unknown".into() };
    rep.details = serde_json::json!({ "gamma": gamma.clauses.iter().map(Clause::to_string).collect::<Vec<_>>() });
    rep.lines.push(format!("constraint:\n{}", indent(&gamma.to_string())));
    Ok(code)
}

fn cmd_qe(cli: &Cli, rep: &mut RunReport) -> Result<i32, Failure> {
    let Cmd::Qe { spec, vars, formula } = &cli.cmd else { unreachable!() };
    let spec = load(spec, rep)?;
    let sig = &spec.signature;
    let mut ts = Vec::new();
    for v in vars {
        let d = sig.function(v).filter(|d| d.args.is_empty()).ok_or_else(|| Failure::spec(format!("`{}` is not a declared constant", v)))?;
        ts.push(Term::constant(d.name.clone(), d.result.clone()));
    }
    let f = specfile::parse_formula(formula, sig, &[]).map_err(|e| Failure::spec(format!("formula:{}", e)))?;
    let t = Instant::now();
    let out = qelim::eliminate(&ts, &f, &QeConfig::default());
    rep.timing("qe", t);
    match out {
        Ok(dnf) => {
            let text = Formula::from_dnf(&dnf).to_string();
            rep.outcome = "ok".into();
            rep.details = serde_json::json!({ "result": text });
            rep.lines.push(text);
            Ok(exit::OK)
        }
        Err(e) => {
            rep.outcome = "unknown".into();
            rep.lines.push(format!("quantifier elimination failed: {}", e));
            Ok(exit::UNKNOWN)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut rep = RunReport::new(std::env::args().collect());
    if let Ok(cfg) = solver_config(&cli) {
        rep.solver(&cfg);
    }
    let res = match &cli.cmd {
        Cmd::Check { .. } => cmd_check(&cli, &mut rep),
        Cmd::Synth { .. } => cmd_synth(&cli, &mut rep),
        Cmd::Elim { .. } => cmd_elim(&cli, &mut rep),
        Cmd::Qe { .. } => cmd_qe(&cli, &mut rep),
    };
    let code = match res {
        Ok(c) => c,
        Err(f) => {
            eprintln!("invsynth: {}", f.message);
            rep.outcome = f.outcome.into();
            f.code
        }
    };
    rep.exit_code = code;
    print!("{}", if cli.format == Format::Records { rep.records_text() } else { rep.text() });
    ExitCode::from(code as u8)
}
