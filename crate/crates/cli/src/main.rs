use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ortho_cli::bench::{input_vars, read_aag, with_big_stack};
use ortho_cli::{
    gen_bench, preprocess, read_records, report, run_external_solver, write_records, BenchOptions,
    BenchRecord, BitSelection, SolverConfig, SolverVerdict,
};
use ortho_core::circuits::{
    formulas_to_circuit, miter_cnf, tseitin, tseitin_over, Symbol, SymbolKind,
};
use ortho_core::entailment::{check_derivations, prove_with, Limits, ProverOptions, Verdict};
use ortho_core::normalizer::Normalizer;
use ortho_core::oracle::{default_depth_limit, naive_prove, random_formula, OracleError};
use ortho_core::{FormulaId, FormulaStore};

const PROVED: u8 = 0;
const NOT_PROVABLE: u8 = 1;
const LIMIT: u8 = 2;
const INPUT_ERROR: u8 = 3;
const CHECK_FAILED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "ortho",
    version,
    about = "Orthologic entailment, normalization and circuit benchmarks"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// External SAT solver executable.
    #[arg(long, global = true)]
    solver: Option<PathBuf>,
    /// Extra solver argument, placed before the CNF path (repeatable).
    #[arg(long = "solver-arg", global = true, allow_hyphen_values = true)]
    solver_args: Vec<String>,
    /// Time budget in ms for solver calls (default 300000) and proofs.
    #[arg(long, global = true)]
    timeout_ms: Option<u64>,
    /// Worker threads for genbench.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for randomly generated benchmarks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

impl Global {
    fn solver(&self) -> Option<SolverConfig> {
        self.solver.as_ref().map(|exe| {
            let mut c = SolverConfig::new(exe);
            c.extra_args = self.solver_args.clone();
            if let Some(t) = self.timeout_ms {
                c.timeout_ms = t;
            }
            c
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decide a goal `φ |- ψ` under optional axioms.
    Prove {
        #[arg(long)]
        goal: PathBuf,
        #[arg(long)]
        axioms: Option<PathBuf>,
        #[arg(long)]
        stats: bool,
        /// Replay every recorded derivation after the run.
        #[arg(long)]
        check_proof: bool,
        #[arg(long)]
        max_sequents: Option<usize>,
        /// Decide with the backward-search oracle instead.
        #[arg(long)]
        oracle: bool,
    },
    /// Normalize a formula file or every output of an `.aag` circuit.
    Normalize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract one output cone; `.aag` output keeps all inputs.
    Cone {
        #[arg(long)]
        aig: PathBuf,
        #[arg(long)]
        bit: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tseitin CNF of a formula or of all outputs of a circuit.
    Tseitin {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_assert_root: bool,
    },
    /// CNF satisfiable iff the two sides differ.
    Miter {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        share_subterms: bool,
    },
    /// Per-bit cones, normal forms and miters, with a CSV of measurements.
    Genbench {
        /// Circuit to benchmark; omit with --random.
        #[arg(long, required_unless_present = "random")]
        aig: Option<PathBuf>,
        /// Benchmark this many seeded random formulas instead.
        #[arg(long, conflicts_with = "aig")]
        random: Option<usize>,
        #[arg(long, default_value_t = 6)]
        vars: usize,
        #[arg(long, default_value_t = 12)]
        connectives: usize,
        #[arg(long, default_value = "all")]
        bits: BitSelection,
        #[arg(long)]
        out_dir: PathBuf,
        /// Defaults to `<out-dir>/<name>.csv`.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write the CNF of the normalized circuit and, beside it, of the original.
    Preprocess {
        #[arg(long)]
        aig: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Append a record (solver times need --solver).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the configured solver on a DIMACS file.
    SolveExt {
        #[arg(long)]
        cnf: PathBuf,
    },
    /// Recompute speed-ups and their means from a record CSV.
    Report {
        #[arg(long)]
        csv: PathBuf,
        /// Also write the recomputed records here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn is_aag(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "aag")
}

fn parse_axioms(store: &mut FormulaStore, text: &str) -> Result<Vec<(FormulaId, FormulaId)>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let body = line.split(';').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        out.push(
            store
                .parse_sequent(body)
                .with_context(|| format!("axioms line {}", k + 1))?,
        );
    }
    Ok(out)
}

/// A formula file, or the single output of an `.aag` file.
fn load_formula(store: &mut FormulaStore, path: &Path) -> Result<FormulaId> {
    if is_aag(path) {
        let c = read_aag(path)?;
        if c.outputs.len() != 1 {
            bail!(
                "{}: expected one output, found {}",
                path.display(),
                c.outputs.len()
            );
        }
        let inputs = input_vars(store, &c);
        Ok(c.cone_formula_with(store, 0, &inputs)?)
    } else {
        store
            .parse(&read(path)?)
            .with_context(|| format!("parsing {}", path.display()))
    }
}

fn cmd_prove(
    g: &Global,
    goal: &Path,
    axioms: Option<&Path>,
    stats: bool,
    check_proof: bool,
    max_sequents: Option<usize>,
    oracle: bool,
) -> Result<u8> {
    let mut store = FormulaStore::new();
    let (lhs, rhs) = store.parse_sequent(&read(goal)?).context("parsing goal")?;
    let axioms = match axioms {
        Some(p) => parse_axioms(&mut store, &read(p)?)?,
        None => Vec::new(),
    };
    let options = ProverOptions {
        record_derivations: check_proof,
        ..Default::default()
    };
    let limits = Limits {
        max_sequents,
        max_millis: g.timeout_ms,
    };
    if oracle {
        let p = ortho_core::entailment::prepare_goal(&mut store, lhs, rhs, &axioms, options);
        let depth = default_depth_limit(p.state.universe().len());
        return Ok(match naive_prove(&store, p.goal, &p.axioms, depth) {
            Ok(v) => report_verdict(v),
            Err(e @ (OracleError::DepthExceeded(_) | OracleError::BudgetExceeded(_))) => {
                println!("LimitExceeded ({e})");
                LIMIT
            }
            Err(e) => bail!(e),
        });
    }
    match prove_with(&mut store, lhs, rhs, &axioms, limits, options) {
        Ok((report, prepared)) => {
            if stats {
                let s = &report.stats;
                eprintln!(
                    "proven {} attempts {} universe {} elapsed_ms {:.3}",
                    s.proven,
                    s.attempts,
                    s.universe,
                    s.elapsed.as_secs_f64() * 1e3
                );
            }
            if check_proof {
                if let Err(e) = check_derivations(&store, &prepared) {
                    eprintln!("derivation check failed at {:?}: {}", e.sequent, e.reason);
                    return Ok(CHECK_FAILED);
                }
                eprintln!("derivation check passed");
            }
            Ok(report_verdict(report.verdict))
        }
        Err(e) => {
            println!("LimitExceeded");
            if stats {
                eprintln!("proven {} attempts {}", e.proven, e.attempts);
            }
            Ok(LIMIT)
        }
    }
}

fn report_verdict(v: Verdict) -> u8 {
    match v {
        Verdict::Proved => {
            println!("Proved");
            PROVED
        }
        Verdict::NotProvable => {
            println!("NotProvable");
            NOT_PROVABLE
        }
    }
}

fn cmd_normalize(input: &Path, out: &Path) -> Result<()> {
    let mut store = FormulaStore::new();
    let mut normalizer = Normalizer::new();
    if is_aag(input) {
        let c = read_aag(input)?;
        let inputs = input_vars(&mut store, &c);
        let mut normal = Vec::new();
        for k in 0..c.outputs.len() {
            let f = c.cone_formula_with(&mut store, k, &inputs)?;
            normal.push(normalizer.normalize(&mut store, f));
        }
        let mut nc = formulas_to_circuit(&store, &normal, &inputs)?;
        nc.symbols.extend(
            c.symbols
                .iter()
                .filter(|s| s.kind == SymbolKind::Output)
                .cloned(),
        );
        nc.symbols.sort_by_key(|s| (s.kind, s.index));
        eprintln!("and gates: {} -> {}", c.gates.len(), nc.gates.len());
        fs::write(out, nc.emit_aag())?;
    } else {
        let f = load_formula(&mut store, input)?;
        let g = normalizer.normalize(&mut store, f);
        eprintln!(
            "connectives: {} -> {}",
            store.connective_count(f),
            store.connective_count(g)
        );
        fs::write(out, format!("{}\n", store.display(g)))?;
    }
    Ok(())
}

fn cmd_cone(aig: &Path, bit: usize, out: &Path) -> Result<()> {
    let c = read_aag(aig)?;
    let mut store = FormulaStore::new();
    let inputs = input_vars(&mut store, &c);
    let f = c.cone_formula_with(&mut store, bit, &inputs)?;
    if is_aag(out) {
        let mut cone = formulas_to_circuit(&store, &[f], &inputs)?;
        if let Some(name) = c.output_name(bit) {
            cone.symbols.push(Symbol {
                kind: SymbolKind::Output,
                index: 0,
                name: name.to_owned(),
            });
        }
        fs::write(out, cone.emit_aag())?;
    } else {
        fs::write(out, format!("{}\n", store.display(f)))?;
    }
    Ok(())
}

fn cmd_tseitin(input: &Path, out: &Path, assert_root: bool) -> Result<()> {
    let mut store = FormulaStore::new();
    let cnf = if is_aag(input) {
        let c = read_aag(input)?;
        let inputs = input_vars(&mut store, &c);
        let roots = (0..c.outputs.len())
            .map(|k| c.cone_formula_with(&mut store, k, &inputs))
            .collect::<Result<Vec<_>, _>>()?;
        tseitin_over(&store, &roots, &inputs, assert_root)?
    } else {
        let f = load_formula(&mut store, input)?;
        tseitin(&store, f, assert_root)
    };
    fs::write(out, cnf.to_dimacs())?;
    Ok(())
}

fn cmd_miter(left: &Path, right: &Path, out: &Path, share: bool) -> Result<()> {
    let mut store = FormulaStore::new();
    let f = load_formula(&mut store, left)?;
    let g = load_formula(&mut store, right)?;
    fs::write(out, miter_cnf(&store, f, g, share).to_dimacs())?;
    Ok(())
}

/// Circuit with one output per seeded random formula.
fn random_circuit(
    seed: u64,
    count: usize,
    vars: usize,
    connectives: usize,
) -> ortho_core::circuits::AigCircuit {
    let mut store = FormulaStore::new();
    let roots: Vec<_> = (0..count)
        .map(|k| random_formula(&mut store, seed.wrapping_add(k as u64), vars, connectives))
        .collect();
    let inputs: Vec<_> = (0..vars)
        .map(|k| {
            let f = store.var(&ortho_core::oracle::pool_var_name(k));
            match store.node(f) {
                ortho_core::Node::Var(v) => v,
                _ => unreachable!(),
            }
        })
        .collect();
    let mut c = formulas_to_circuit(&store, &roots, &inputs).expect("pool variables");
    c.comments.push(format!(
        "{count} random formulas, seed {seed}, {vars} vars, {connectives} connectives"
    ));
    c
}

fn write_csv(path: &Path, records: &[BenchRecord]) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_records(file, records)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_genbench(
    g: &Global,
    aig: Option<&Path>,
    random: Option<usize>,
    vars: usize,
    connectives: usize,
    bits: BitSelection,
    out_dir: &Path,
    csv: Option<&Path>,
) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let aig = match (aig, random) {
        (Some(p), _) => p.to_owned(),
        (None, Some(n)) => {
            let p = out_dir.join(format!("random{}.aag", g.seed));
            fs::write(&p, random_circuit(g.seed, n, vars, connectives).emit_aag())?;
            p
        }
        (None, None) => bail!("either --aig or --random is required"),
    };
    let jobs = g
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let options = BenchOptions {
        bits,
        jobs,
        solver: g.solver(),
    };
    let run = gen_bench(&aig, out_dir, &options)?;
    for (bit, msg) in &run.errors {
        eprintln!("bit {bit}: {msg}");
    }
    let name = aig
        .file_stem()
        .map_or("circuit".into(), |s| s.to_string_lossy().into_owned());
    let csv = csv.map_or_else(|| out_dir.join(format!("{name}.csv")), Path::to_owned);
    write_csv(&csv, &run.records)?;
    eprintln!(
        "{} records, {} errors, written to {}",
        run.records.len(),
        run.errors.len(),
        csv.display()
    );
    Ok(())
}

fn cmd_preprocess(g: &Global, aig: &Path, out: &Path, csv: Option<&Path>) -> Result<()> {
    let pre = preprocess(aig, out)?;
    println!(
        "size_orig {} size_nf {} ol_norm_ms {:.3} nf_cnf {} orig_cnf {}",
        pre.size_orig,
        pre.size_nf,
        pre.ol_norm_ms,
        pre.nf_cnf.display(),
        pre.orig_cnf.display()
    );
    let name = aig
        .file_stem()
        .map_or("circuit".into(), |s| s.to_string_lossy().into_owned());
    let mut rec = BenchRecord::new(name, None);
    rec.size_orig = Some(pre.size_orig);
    rec.size_nf = Some(pre.size_nf);
    rec.ol_norm_ms = Some(pre.ol_norm_ms);
    if let Some(config) = g.solver() {
        let orig = run_external_solver(&pre.orig_cnf, &config);
        let nf = run_external_solver(&pre.nf_cnf, &config);
        println!(
            "solver orig {} {:.3} ms, nf {} {:.3} ms",
            orig.verdict, orig.wall_ms, nf.verdict, nf.wall_ms
        );
        rec.solver_verdict = Some(if orig.verdict == nf.verdict {
            orig.verdict
        } else if [orig.verdict, nf.verdict].contains(&SolverVerdict::Timeout) {
            SolverVerdict::Timeout
        } else {
            SolverVerdict::Error
        });
        rec.solver_ms_orig = Some(orig.wall_ms);
        rec.solver_ms_nf = Some(nf.wall_ms);
    }
    if let Some(path) = csv {
        let mut records = if path.exists() {
            read_records(fs::File::open(path)?)?
        } else {
            Vec::new()
        };
        records.push(rec.with_speed_ups());
        write_csv(path, &records)?;
    }
    Ok(())
}

fn cmd_solve(g: &Global, cnf: &Path) -> Result<u8> {
    let Some(config) = g.solver() else {
        bail!("solve-ext needs --solver")
    };
    let run = run_external_solver(cnf, &config);
    println!("{} {:.3}", run.verdict, run.wall_ms);
    if run.verdict == SolverVerdict::Error {
        eprintln!("{}", run.stderr.trim());
        return Ok(INPUT_ERROR);
    }
    Ok(0)
}

fn cmd_report(csv: &Path, out: Option<&Path>) -> Result<()> {
    let rep = report(csv).with_context(|| format!("reading {}", csv.display()))?;
    print!("{}", rep.table());
    if let Some(path) = out {
        write_csv(path, &rep.records())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    let g = &cli.global;
    match cli.command {
        Command::Prove {
            goal,
            axioms,
            stats,
            check_proof,
            max_sequents,
            oracle,
        } => cmd_prove(
            g,
            &goal,
            axioms.as_deref(),
            stats,
            check_proof,
            max_sequents,
            oracle,
        ),
        Command::Normalize { input, out } => cmd_normalize(&input, &out).map(|_| 0),
        Command::Cone { aig, bit, out } => cmd_cone(&aig, bit, &out).map(|_| 0),
        Command::Tseitin {
            input,
            out,
            no_assert_root,
        } => cmd_tseitin(&input, &out, !no_assert_root).map(|_| 0),
        Command::Miter {
            left,
            right,
            out,
            share_subterms,
        } => cmd_miter(&left, &right, &out, share_subterms).map(|_| 0),
        Command::Genbench {
            aig,
            random,
            vars,
            connectives,
            bits,
            out_dir,
            csv,
        } => cmd_genbench(
            g,
            aig.as_deref(),
            random,
            vars,
            connectives,
            bits,
            &out_dir,
            csv.as_deref(),
        )
        .map(|_| 0),
        Command::Preprocess { aig, out, csv } => {
            cmd_preprocess(g, &aig, &out, csv.as_deref()).map(|_| 0)
        }
        Command::SolveExt { cnf } => cmd_solve(g, &cnf),
        Command::Report { csv, out } => cmd_report(&csv, out.as_deref()).map(|_| 0),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { INPUT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match with_big_stack(|| run(cli)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(INPUT_ERROR)
        }
    }
}
