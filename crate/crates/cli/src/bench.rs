use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::Instant;

use ortho_core::circuits::{
    formulas_to_circuit, miter_cnf_over, tseitin_over, AigCircuit, CircuitError, Symbol, SymbolKind,
};
use ortho_core::entailment::{prove, Limits, Verdict};
use ortho_core::normalizer::Normalizer;
use ortho_core::{FormulaStore, Node, VarId};

use crate::record::{BenchRecord, SolverVerdict};
use crate::solver::{run_external_solver, SolverConfig};

/// Stack for worker threads; normalization recurses along formula depth.
pub const WORKER_STACK: usize = 512 << 20;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Circuit { path: PathBuf, source: CircuitError },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_owned(),
        source,
    }
}

pub fn read_aag(path: &Path) -> Result<AigCircuit, BenchError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    AigCircuit::parse_aag(&text).map_err(|source| BenchError::Circuit {
        path: path.to_owned(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), BenchError> {
    fs::write(path, text).map_err(io_err(path))
}

/// Runs `f` on a thread with [`WORKER_STACK`] bytes of stack.
pub fn with_big_stack<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    thread::scope(|s| {
        thread::Builder::new()
            .stack_size(WORKER_STACK)
            .spawn_scoped(s, f)
            .expect("spawn worker")
            .join()
            .unwrap_or_else(|e| std::panic::resume_unwind(e))
    })
}

/// One variable per circuit input, named after the input symbol or `i<k>`.
pub fn input_vars(store: &mut FormulaStore, circuit: &AigCircuit) -> Vec<VarId> {
    (0..circuit.num_inputs())
        .map(|k| {
            let name = circuit
                .input_name(k)
                .map_or_else(|| format!("i{k}"), str::to_owned);
            let f = store.var(&name);
            match store.node(f) {
                Node::Var(v) => v,
                _ => unreachable!("var() interns a variable"),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BitSelection {
    All,
    List(Vec<usize>),
}

impl std::str::FromStr for BitSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            return Ok(BitSelection::All);
        }
        s.split(',')
            .map(|b| {
                b.trim()
                    .parse()
                    .map_err(|_| format!("invalid bit index {b:?}"))
            })
            .collect::<Result<_, _>>()
            .map(BitSelection::List)
    }
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub bits: BitSelection,
    pub jobs: usize,
    pub solver: Option<SolverConfig>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            bits: BitSelection::All,
            jobs: 1,
            solver: None,
        }
    }
}

/// Records in bit order, plus the per-bit failures as `(bit, message)`.
#[derive(Clone, Debug, Default)]
pub struct BenchRun {
    pub records: Vec<BenchRecord>,
    pub errors: Vec<(usize, String)>,
}

fn ms(since: Instant) -> f64 {
    (since.elapsed().as_secs_f64() * 1e6).round() / 1e3
}

fn bench_bit(
    circuit: &AigCircuit,
    name: &str,
    bit: usize,
    out_dir: &Path,
    solver: Option<&SolverConfig>,
    record: &mut BenchRecord,
) -> Result<(), String> {
    let mut store = FormulaStore::new();
    let inputs = input_vars(&mut store, circuit);
    let phi = circuit
        .cone_formula_with(&mut store, bit, &inputs)
        .map_err(|e| e.to_string())?;
    let out_name = circuit
        .output_name(bit)
        .map_or_else(|| format!("o{bit}"), str::to_owned);

    let start = Instant::now();
    let nf = Normalizer::new().normalize(&mut store, phi);
    record.ol_norm_ms = Some(ms(start));

    let start = Instant::now();
    let verdict = prove(&mut store, phi, nf, &[], Limits::none())
        .map_err(|e| e.to_string())?
        .verdict;
    record.ol_prove_ms = Some(ms(start));
    if verdict != Verdict::Proved {
        return Err("engine did not prove the cone below its normal form".into());
    }

    let mut sizes = [0; 2];
    for (slot, (root, suffix)) in sizes.iter_mut().zip([(phi, "aag"), (nf, "nf.aag")]) {
        let mut c = formulas_to_circuit(&store, &[root], &inputs).map_err(|e| e.to_string())?;
        c.symbols.retain(|s| s.kind == SymbolKind::Input);
        c.symbols.push(Symbol {
            kind: SymbolKind::Output,
            index: 0,
            name: out_name.clone(),
        });
        c.comments.push(format!("{name} output {bit}"));
        *slot = c.gates.len();
        write(
            &out_dir.join(format!("{name}_bit{bit}.{suffix}")),
            &c.emit_aag(),
        )
        .map_err(|e| e.to_string())?;
    }
    record.size_orig = Some(sizes[0]);
    record.size_nf = Some(sizes[1]);

    let mut miter = miter_cnf_over(&store, phi, nf, &inputs, false).map_err(|e| e.to_string())?;
    miter.comments.push(format!(
        "miter of {name} output {bit} against its normal form"
    ));
    let miter_path = out_dir.join(format!("{name}_bit{bit}.miter.cnf"));
    write(&miter_path, &miter.to_dimacs()).map_err(|e| e.to_string())?;

    if let Some(config) = solver {
        let run = run_external_solver(&miter_path, config);
        record.solver_verdict = Some(run.verdict);
        record.solver_ms_orig = Some(run.wall_ms);
        if run.verdict == SolverVerdict::Error {
            return Err(format!("solver: {}", run.stderr.trim()));
        }
    }
    Ok(())
}

/// Writes `<name>_bit<n>.aag`, `.nf.aag` and `.miter.cnf` for every
/// selected output and proves each cone below its normal form. A failing
/// bit yields an ERROR record; the other bits still run.
pub fn gen_bench(
    aig_path: &Path,
    out_dir: &Path,
    options: &BenchOptions,
) -> Result<BenchRun, BenchError> {
    let circuit = read_aag(aig_path)?;
    let name = aig_path
        .file_stem()
        .map_or("circuit".into(), |s| s.to_string_lossy().into_owned());
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let bits: Vec<usize> = match &options.bits {
        BitSelection::All => (0..circuit.outputs.len()).collect(),
        BitSelection::List(v) => v.clone(),
    };
    let next = AtomicUsize::new(0);
    let results: Vec<(usize, BenchRecord, Option<String>)> = thread::scope(|s| {
        let workers: Vec<_> = (0..options.jobs.clamp(1, bits.len().max(1)))
            .map(|_| {
                thread::Builder::new()
                    .stack_size(WORKER_STACK)
                    .spawn_scoped(s, || {
                        let mut done = Vec::new();
                        loop {
                            let k = next.fetch_add(1, Ordering::Relaxed);
                            let Some(&bit) = bits.get(k) else { break };
                            let mut rec = BenchRecord::new(name.clone(), Some(bit));
                            let outcome = bench_bit(
                                &circuit,
                                &name,
                                bit,
                                out_dir,
                                options.solver.as_ref(),
                                &mut rec,
                            );
                            let err = outcome.err();
                            if err.is_some() {
                                rec.solver_verdict = Some(SolverVerdict::Error);
                            }
                            done.push((k, rec, err));
                        }
                        done
                    })
                    .expect("spawn worker")
            })
            .collect();
        let mut all: Vec<_> = workers
            .into_iter()
            .flat_map(|w| w.join().expect("worker panicked"))
            .collect();
        all.sort_by_key(|r| r.0);
        all
    });
    let mut run = BenchRun::default();
    for (_, rec, err) in results {
        if let Some(e) = err {
            run.errors.push((rec.bit.unwrap_or(0), e));
        }
        run.records.push(rec);
    }
    Ok(run)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Preprocessed {
    pub size_orig: usize,
    pub size_nf: usize,
    pub ol_norm_ms: f64,
    pub nf_cnf: PathBuf,
    pub orig_cnf: PathBuf,
}

/// Normalizes every output cone in one store, then writes the Tseitin CNF
/// of the normalized circuit to `out_cnf` and that of the original circuit
/// to `<out_cnf stem>.orig.cnf`. Every output is asserted.
pub fn preprocess(aig_path: &Path, out_cnf: &Path) -> Result<Preprocessed, BenchError> {
    let circuit = read_aag(aig_path)?;
    let circuit_err = |source| BenchError::Circuit {
        path: aig_path.to_owned(),
        source,
    };
    let mut store = FormulaStore::new();
    let inputs = input_vars(&mut store, &circuit);
    let roots = (0..circuit.outputs.len())
        .map(|k| circuit.cone_formula_with(&mut store, k, &inputs))
        .collect::<Result<Vec<_>, _>>()
        .map_err(circuit_err)?;
    let start = Instant::now();
    let mut normalizer = Normalizer::new();
    let normal: Vec<_> = roots
        .iter()
        .map(|&r| normalizer.normalize(&mut store, r))
        .collect();
    let ol_norm_ms = ms(start);

    let size = |store: &FormulaStore, roots: &[_]| {
        formulas_to_circuit(store, roots, &inputs).map(|c| c.gates.len())
    };
    let size_orig = size(&store, &roots).map_err(circuit_err)?;
    let size_nf = size(&store, &normal).map_err(circuit_err)?;

    let orig_cnf = out_cnf.with_extension("orig.cnf");
    for (path, roots) in [(out_cnf, &normal), (orig_cnf.as_path(), &roots)] {
        let cnf = tseitin_over(&store, roots, &inputs, true).map_err(circuit_err)?;
        write(path, &cnf.to_dimacs())?;
    }
    Ok(Preprocessed {
        size_orig,
        size_nf,
        ol_norm_ms,
        nf_cnf: out_cnf.to_owned(),
        orig_cnf,
    })
}
