use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ortho_cli::{read_records, run_external_solver, SolverConfig, SolverVerdict};
use ortho_core::circuits::{AigCircuit, CnfInstance};
use ortho_core::oracle::exhaustive_sat;
use tempfile::TempDir;

fn ortho(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ortho"))
        .args(args)
        .output()
        .expect("run ortho")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn core_fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures/aag")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn solver(name: &str) -> SolverConfig {
    let mut c = SolverConfig::new("python3");
    c.extra_args = vec![Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/solvers")
        .join(name)
        .to_string_lossy()
        .into_owned()];
    c
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn cnf(path: impl AsRef<Path>) -> CnfInstance {
    CnfInstance::parse_dimacs(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn prove_exit_codes() {
    let d = TempDir::new().unwrap();
    let proved = write(&d, "g1", "x |- (or x y)\n");
    let dist = write(&d, "g2", "(and a (or b c)) |- (or (and a b) (and a c))");
    let chain = write(&d, "g3", "a |- c");
    let axioms = write(&d, "ax", "; transitivity\na |- b\n\nb |- c ; second\n");
    let broken = write(&d, "g4", "(and a |- b");

    assert_eq!(code(&ortho(&["prove", "--goal", &proved])), 0);
    assert_eq!(code(&ortho(&["prove", "--goal", &dist])), 1);
    assert_eq!(code(&ortho(&["prove", "--goal", &chain])), 1);
    let out = ortho(&[
        "prove",
        "--goal",
        &chain,
        "--axioms",
        &axioms,
        "--stats",
        "--check-proof",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "Proved");
    assert!(String::from_utf8_lossy(&out.stderr).contains("derivation check passed"));
    assert_eq!(
        code(&ortho(&[
            "prove", "--goal", &chain, "--axioms", &axioms, "--oracle"
        ])),
        0
    );
    assert_eq!(code(&ortho(&["prove", "--goal", &dist, "--oracle"])), 1);
    assert_eq!(
        code(&ortho(&["prove", "--goal", &dist, "--max-sequents", "2"])),
        2
    );
    assert_eq!(code(&ortho(&["prove", "--goal", &broken])), 3);
    assert_eq!(code(&ortho(&["prove", "--goal", "/nonexistent"])), 3);
    assert_eq!(code(&ortho(&["prove"])), 3);
}

#[test]
fn normalize_formula_and_circuit() {
    let d = TempDir::new().unwrap();
    let f = write(&d, "f.txt", "(or (and x (or x y)) false)");
    let out = d.path().join("nf.txt");
    assert_eq!(
        code(&ortho(&[
            "normalize",
            "--in",
            &f,
            "--out",
            out.to_str().unwrap()
        ])),
        0
    );
    assert_eq!(fs::read_to_string(&out).unwrap().trim(), "x");

    let out = d.path().join("nf.aag");
    let src = core_fixture("absorption.aag");
    assert_eq!(
        code(&ortho(&[
            "normalize",
            "--in",
            &src,
            "--out",
            out.to_str().unwrap()
        ])),
        0
    );
    let c = AigCircuit::parse_aag(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(c.gates.len(), 0);
    assert_eq!(c.output_name(0), Some("absorbed"));
    assert_eq!(c.simulate(&[true, false]).unwrap(), vec![true]);
}

#[test]
fn cone_tseitin_and_miter() {
    let d = TempDir::new().unwrap();
    let p = |n: &str| d.path().join(n).to_string_lossy().into_owned();
    let adder = core_fixture("adder2.aag");
    assert_eq!(
        code(&ortho(&[
            "cone",
            "--aig",
            &adder,
            "--bit",
            "1",
            "--out",
            &p("c.aag")
        ])),
        0
    );
    assert_eq!(
        code(&ortho(&[
            "cone",
            "--aig",
            &adder,
            "--bit",
            "1",
            "--out",
            &p("c.txt")
        ])),
        0
    );
    assert_eq!(
        code(&ortho(&[
            "cone",
            "--aig",
            &adder,
            "--bit",
            "9",
            "--out",
            &p("x.aag")
        ])),
        3
    );
    let cone = AigCircuit::parse_aag(&fs::read_to_string(p("c.aag")).unwrap()).unwrap();
    let full = AigCircuit::parse_aag(&fs::read_to_string(&adder).unwrap()).unwrap();
    for mask in 0..16u32 {
        let bits: Vec<bool> = (0..4).map(|k| mask >> k & 1 == 1).collect();
        assert_eq!(
            cone.simulate(&bits).unwrap()[0],
            full.simulate(&bits).unwrap()[1]
        );
    }

    // The text cone and the AIGER cone agree.
    let (left, right, m) = (p("c.aag"), p("c.txt"), p("m.cnf"));
    for share in [false, true] {
        let mut args = vec!["miter", "--left", &left, "--right", &right, "--out", &m];
        if share {
            args.push("--share-subterms");
        }
        assert_eq!(code(&ortho(&args)), 0);
        assert!(exhaustive_sat(&cnf(&m)).is_none());
    }

    let t = write(&d, "t.txt", "(and x (not x))");
    assert_eq!(
        code(&ortho(&["tseitin", "--in", &t, "--out", &p("t.cnf")])),
        0
    );
    assert!(exhaustive_sat(&cnf(p("t.cnf"))).is_none());
    assert_eq!(
        code(&ortho(&[
            "tseitin",
            "--in",
            &t,
            "--out",
            &p("u.cnf"),
            "--no-assert-root"
        ])),
        0
    );
    assert!(exhaustive_sat(&cnf(p("u.cnf"))).is_some());
    // Every output asserted: no two 2-bit numbers sum to 7.
    assert_eq!(
        code(&ortho(&["tseitin", "--in", &adder, "--out", &p("a.cnf")])),
        0
    );
    assert!(exhaustive_sat(&cnf(p("a.cnf"))).is_none());
}

#[test]
fn genbench_and_gate() {
    let d = TempDir::new().unwrap();
    let dir = d.path().join("out");
    let out = ortho(&[
        "genbench",
        "--aig",
        &core_fixture("and2.aag"),
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let records = read_records(fs::File::open(dir.join("and2.csv")).unwrap()).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].bit, Some(0));
    assert!(records[0].ol_prove_ms.is_some());
    assert!(exhaustive_sat(&cnf(dir.join("and2_bit0.miter.cnf"))).is_none());
}

fn artifacts(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e != "csv"))
        .map(|p| (PathBuf::from(p.file_name().unwrap()), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn genbench_multiplier_is_deterministic() {
    let d = TempDir::new().unwrap();
    let mult = core_fixture("mult4.aag");
    let mut runs = Vec::new();
    for (k, jobs) in ["1", "4"].iter().enumerate() {
        let dir = d.path().join(format!("run{k}"));
        let out = ortho(&[
            "genbench",
            "--aig",
            &mult,
            "--out-dir",
            dir.to_str().unwrap(),
            "--jobs",
            jobs,
        ]);
        assert_eq!(code(&out), 0);
        let records = read_records(fs::File::open(dir.join("mult4.csv")).unwrap()).unwrap();
        assert_eq!(
            records.iter().map(|r| r.bit.unwrap()).collect::<Vec<_>>(),
            (0..8).collect::<Vec<_>>()
        );
        assert!(records
            .iter()
            .all(|r| r.solver_verdict.is_none() && r.size_orig.is_some()));
        for bit in 0..8 {
            assert!(exhaustive_sat(&cnf(dir.join(format!("mult4_bit{bit}.miter.cnf")))).is_none());
        }
        runs.push(artifacts(&dir));
    }
    assert_eq!(runs[0].len(), 24);
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn genbench_bad_bit_is_recorded() {
    let d = TempDir::new().unwrap();
    let dir = d.path().join("out");
    let out = ortho(&[
        "genbench",
        "--aig",
        &core_fixture("xor2.aag"),
        "--bits",
        "0,3",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let records = read_records(fs::File::open(dir.join("xor2.csv")).unwrap()).unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0].solver_verdict, None);
    assert_eq!(records[1].solver_verdict, Some(SolverVerdict::Error));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bit 3"));
}

#[test]
fn genbench_random_with_solver() {
    let d = TempDir::new().unwrap();
    let dir = d.path().join("out");
    let script = solver("dpll.py").extra_args[0].clone();
    let out = ortho(&[
        "genbench",
        "--random",
        "6",
        "--vars",
        "4",
        "--connectives",
        "8",
        "--seed",
        "7",
        "--out-dir",
        dir.to_str().unwrap(),
        "--solver",
        "python3",
        "--solver-arg",
        &script,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let records = read_records(fs::File::open(dir.join("random7.csv")).unwrap()).unwrap();
    assert_eq!(records.len(), 6);
    for r in records {
        assert_eq!(r.solver_verdict, Some(SolverVerdict::Unsat));
        assert!(r.solver_ms_orig.unwrap() > 0.0);
    }
}

#[test]
fn preprocess_examples() {
    let d = TempDir::new().unwrap();
    let p = |n: &str| d.path().join(n).to_string_lossy().into_owned();
    let csv = p("pre.csv");

    assert_eq!(
        code(&ortho(&[
            "preprocess",
            "--aig",
            &core_fixture("absorption.aag"),
            "--out",
            &p("abs.cnf"),
            "--csv",
            &csv
        ])),
        0
    );
    let (nf, orig) = (cnf(p("abs.cnf")), cnf(p("abs.orig.cnf")));
    assert!(nf.num_vars < orig.num_vars);

    assert_eq!(
        code(&ortho(&[
            "preprocess",
            "--aig",
            &core_fixture("contradiction.aag"),
            "--out",
            &p("c.cnf")
        ])),
        0
    );
    let c = cnf(p("c.cnf"));
    let units: Vec<_> = c.clauses.iter().filter(|cl| cl.len() == 1).collect();
    assert_eq!(c.clauses.len(), 2);
    assert_eq!(units[0][0], -units[1][0]);

    let script = solver("dpll.py").extra_args[0].clone();
    let args = [
        "preprocess",
        "--aig",
        &core_fixture("and2.aag"),
        "--out",
        &p("and.cnf"),
        "--csv",
        &csv,
        "--solver",
        "python3",
        "--solver-arg",
        &script,
    ];
    assert_eq!(code(&ortho(&args)), 0);
    let records = read_records(fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(records.len(), 2);
    assert!(records[1].size_nf <= records[1].size_orig);
    assert_eq!(records[1].solver_verdict, Some(SolverVerdict::Sat));
    assert!(records[1].speed_up.is_some());
}

#[test]
fn external_solver_verdicts() {
    let d = TempDir::new().unwrap();
    let p = |n: &str| d.path().join(n);
    let x = write(&d, "x.txt", "x");
    let lem = write(&d, "lem.txt", "(or x (not x))");
    ortho(&[
        "miter",
        "--left",
        &x,
        "--right",
        &x,
        "--out",
        p("m.cnf").to_str().unwrap(),
    ]);
    ortho(&[
        "tseitin",
        "--in",
        &lem,
        "--out",
        p("t.cnf").to_str().unwrap(),
    ]);

    let run = run_external_solver(&p("m.cnf"), &solver("dpll.py"));
    assert_eq!(run.verdict, SolverVerdict::Unsat);
    assert!(run.wall_ms > 0.0);
    assert_eq!(
        run_external_solver(&p("t.cnf"), &solver("dpll.py")).verdict,
        SolverVerdict::Sat
    );
    assert_eq!(
        run_external_solver(&p("t.cnf"), &solver("exit_code_only.py")).verdict,
        SolverVerdict::Unsat
    );

    let err = run_external_solver(&p("t.cnf"), &solver("garbage.py"));
    assert_eq!(err.verdict, SolverVerdict::Error);
    assert!(err.stderr.contains("something went wrong"));

    let mut slow = solver("sleepy.py");
    slow.timeout_ms = 200;
    let run = run_external_solver(&p("t.cnf"), &slow);
    assert_eq!(run.verdict, SolverVerdict::Timeout);
    assert!(run.wall_ms >= 200.0 && run.wall_ms < 10_000.0);

    let mut tight = solver("dpll.py");
    tight.timeout_ms = 1;
    assert_eq!(
        run_external_solver(&p("m.cnf"), &tight).verdict,
        SolverVerdict::Timeout
    );

    let script = solver("dpll.py").extra_args[0].clone();
    let out = ortho(&[
        "solve-ext",
        "--cnf",
        p("m.cnf").to_str().unwrap(),
        "--solver",
        "python3",
        "--solver-arg",
        &script,
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("UNSAT "));
    assert_eq!(
        code(&ortho(&[
            "solve-ext",
            "--cnf",
            p("m.cnf").to_str().unwrap()
        ])),
        3
    );
}

#[test]
fn report_command() {
    let d = TempDir::new().unwrap();
    let csv = write(
        &d,
        "r.csv",
        "problem,bit,size_orig,size_nf,ol_norm_ms,ol_prove_ms,solver_verdict,solver_ms_orig,solver_ms_nf,speed_up,speed_up_with_norm\n\
         4pipe,,5274,,5000,,UNSAT,2468.6,1611.4,,\n\
         slow,,,,1,,TIMEOUT,300000,10,,\n",
    );
    let out_csv = d.path().join("out.csv");
    let out = ortho(&["report", "--csv", &csv, "--out", out_csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("0.5320") && text.contains("-0.6266"));
    assert!(text.contains("mean (1 rows)"));
    let records = read_records(fs::File::open(&out_csv).unwrap()).unwrap();
    assert!((records[0].speed_up.unwrap() - 0.5319).abs() < 1e-3);

    let bad = write(&d, "bad.csv", "problem,bit,size_orig,size_nf,ol_norm_ms,ol_prove_ms,solver_verdict,solver_ms_orig,solver_ms_nf,speed_up,speed_up_with_norm\na,,,,,,SAT,1,1,,\nb,,,,,,MAYBE,1,1,,\n");
    let out = ortho(&["report", "--csv", &bad]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));
}
