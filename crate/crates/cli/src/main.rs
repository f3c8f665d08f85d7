use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use ducharge::chain::FloquetOperator;
use ducharge::charges::{
    charge_from_soliton, theorem1_equivalence, verify_conserved, ChargeRecord, ChargeTerm, Provenance, SolitonCatalog,
};
use ducharge::io::{charge_from_json, charge_to_json, report_json, solitons_to_json, spectrum_csv};
use ducharge::lightcone::{m_w_with, solitons_of, Direction};
use ducharge::pauli::{
    anticommutator, brickwork_step, commutator, fermion_pair, jw_fermion, tableau_from_gate, JwMode, PauliSum,
};
use ducharge::tensor::qubit;
use ducharge::{Error, Gate, Limits};
use num_complex::Complex64 as C64;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "ducharge", version, about = "Solitons and conserved charges of brickwork dual-unitary circuits")]
struct Cli {
    /// Numerical tolerance for residual checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory for written files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Fswap,
    Swap,
    PhasedSwap,
    Canonical,
    Random,
    Cz,
    Identity,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DirArg {
    Plus,
    Minus,
}

impl From<DirArg> for Direction {
    fn from(d: DirArg) -> Self {
        match d {
            DirArg::Plus => Direction::Plus,
            DirArg::Minus => Direction::Minus,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print a gate file for a preset gate.
    Gate {
        preset: Preset,
        /// Phase for phased-swap.
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        /// Interaction strength for canonical and random gates.
        #[arg(long, default_value_t = 0.0)]
        j: f64,
    },
    /// Check unitarity and dual-unitarity of a gate file.
    CheckGate { gate: PathBuf },
    /// Extract width-w solitons and the window-map spectrum.
    FindSolitons {
        u: PathBuf,
        v: Option<PathBuf>,
        #[arg(long)]
        w: usize,
        #[arg(long, value_enum, default_value = "plus")]
        direction: DirArg,
        /// Also write the charge of every soliton with λ^L = 1 on 2L sites.
        #[arg(long = "L")]
        l: Option<usize>,
    },
    /// Check that a charge file is conserved by the circuit.
    VerifyCharge {
        charge: PathBuf,
        u: PathBuf,
        v: Option<PathBuf>,
        #[arg(long = "L")]
        l: usize,
    },
    /// Compare the brute-force conserved space with the soliton charges.
    Theorem1 {
        u: PathBuf,
        v: Option<PathBuf>,
        #[arg(long = "L")]
        l: usize,
        #[arg(long)]
        w_max: usize,
    },
    /// Survey soliton counts and charge dimensions of random gates (CSV).
    Scan {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 3)]
        w_max: usize,
        #[arg(long = "L", default_value_t = 4)]
        l: usize,
    },
    /// Propagate a Pauli sum (text format) through a Clifford brickwork circuit.
    PauliStep {
        sum: PathBuf,
        u: PathBuf,
        v: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        steps: usize,
    },
    /// End-to-end FSWAP report.
    FswapDemo {
        #[arg(long, default_value_t = 3)]
        w: usize,
        /// Use this gate instead of FSWAP.
        #[arg(long)]
        gate: Option<PathBuf>,
    },
}

/// Validated global settings.
#[derive(Clone, Debug)]
struct RunConfig {
    tol: f64,
    seed: u64,
    limits: Limits,
    out: PathBuf,
}

impl RunConfig {
    fn new(cli: &Cli) -> Result<Self, Failure> {
        if !(cli.tol > 0.0 && cli.tol <= 1e-3) {
            return Err(Failure::usage(format!("--tol must lie in (0, 1e-3], got {}", cli.tol)));
        }
        let limits = Limits::from_env()?;
        Ok(Self { tol: cli.tol, seed: cli.seed, limits, out: cli.out.clone() })
    }

    fn write(&self, name: &str, body: &str) -> Result<PathBuf, Failure> {
        std::fs::create_dir_all(&self.out).map_err(|e| Failure::usage(format!("{}: {e}", self.out.display())))?;
        let path = self.out.join(name);
        std::fs::write(&path, body).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure { code: 2, msg: msg.into() }
    }
    fn checked(msg: impl Into<String>) -> Self {
        Failure { code: 1, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Resource { .. } => 3,
            Error::Inconclusive(_) | Error::Numeric(_) => 4,
            Error::TheoremViolation { .. } | Error::PhaseIncompatible { .. } => 1,
            _ => 2,
        };
        Failure { code, msg: e.to_string() }
    }
}

type Outcome = Result<(), Failure>;

fn load_pair(u: &Path, v: Option<&Path>) -> Result<(Gate, Gate), Failure> {
    let gu = Gate::read(u)?;
    let gv = match v {
        Some(p) => Gate::read(p)?,
        None => gu.clone(),
    };
    Ok((gu, gv))
}

fn require_dual_unitary(gates: &[&Gate]) -> Outcome {
    for g in gates {
        if !g.is_dual_unitary(ducharge::gates::DEFAULT_GATE_TOL) {
            return Err(Failure::usage(format!(
                "gate is not dual-unitary (duality residual {:.3e})",
                g.duality_residual()
            )));
        }
    }
    Ok(())
}

fn cmd_gate(preset: Preset, theta: f64, j: f64, seed: u64) -> Outcome {
    let g = match preset {
        Preset::Fswap => Gate::fswap(),
        Preset::Swap => Gate::swap(2),
        Preset::PhasedSwap => Gate::phased_swap(theta),
        Preset::Canonical => Gate::canonical_dual_unitary(j),
        Preset::Random => Gate::random_dual_unitary_qubit(seed, j),
        Preset::Cz => Gate::cz(),
        Preset::Identity => Gate::identity(2),
    };
    println!("{}", g.to_json());
    Ok(())
}

#[derive(Serialize)]
struct GateReport {
    d: usize,
    unitary: bool,
    dual_unitary: bool,
    unitarity_residual: f64,
    duality_residual: f64,
}

fn cmd_check_gate(path: &Path) -> Outcome {
    let g = Gate::read(path)?;
    let tol = ducharge::gates::DEFAULT_GATE_TOL;
    let r = GateReport {
        d: g.d(),
        unitary: g.is_unitary(tol),
        dual_unitary: g.is_dual_unitary(tol),
        unitarity_residual: g.unitarity_residual(),
        duality_residual: g.duality_residual(),
    };
    println!("{}", report_json(&r));
    if r.dual_unitary {
        Ok(())
    } else {
        Err(Failure::checked("gate is not dual-unitary"))
    }
}

fn cmd_find_solitons(cfg: &RunConfig, u: &Gate, v: &Gate, w: usize, dir: Direction, l: Option<usize>) -> Outcome {
    if w.is_multiple_of(2) {
        return Err(Failure::usage(format!("--w must be odd, got {w}")));
    }
    if cfg.tol >= 1e-4 {
        return Err(Failure::usage("--tol must be below 1e-4 for eigenvalue clustering"));
    }
    require_dual_unitary(&[u, v])?;
    let m = m_w_with(u, v, w, dir, &cfg.limits)?;
    let records = solitons_of(&m, cfg.tol.max(1e-12))?;
    let sol = cfg.write(&format!("solitons_{dir}_w{w}.json"), &solitons_to_json(&records))?;
    let spectrum_path = cfg.write(&format!("spectrum_{dir}_w{w}.csv"), &spectrum_csv(&m)?)?;
    println!(
        "found {} solitons (direction {dir}, w = {w}); wrote {} and {}",
        records.len(),
        sol.display(),
        spectrum_path.display()
    );
    if let Some(l) = l {
        for (k, r) in records.iter().enumerate() {
            match charge_from_soliton(r, l) {
                Ok(q) => {
                    let p = cfg.write(&format!("charge_{dir}_w{w}_{k}.json"), &charge_to_json(&q))?;
                    println!("wrote {}", p.display());
                }
                Err(Error::PhaseIncompatible { defect, .. }) => {
                    println!("soliton {k}: no charge on L = {l} (|λ^L − 1| = {defect:.3e})")
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ChargeReport {
    chain_len: usize,
    terms: usize,
    residual: f64,
    tol: f64,
    conserved: bool,
}

fn cmd_verify_charge(cfg: &RunConfig, charge: &Path, u: &Gate, v: &Gate, l: usize) -> Outcome {
    let text = std::fs::read_to_string(charge).map_err(|e| Failure::usage(format!("{}: {e}", charge.display())))?;
    let f = FloquetOperator::with_limits(u, v, l, cfg.limits)?;
    let q = charge_from_json(&text)?;
    let residual = verify_conserved(&f, &q)?;
    let r = ChargeReport {
        chain_len: q.chain_len,
        terms: q.terms.len(),
        residual,
        tol: cfg.tol,
        conserved: residual < cfg.tol,
    };
    println!("{}", report_json(&r));
    if r.conserved {
        Ok(())
    } else {
        Err(Failure::checked(format!("charge is not conserved (residual {residual:.3e})")))
    }
}

fn cmd_theorem1(cfg: &RunConfig, u: &Gate, v: &Gate, l: usize, w_max: usize) -> Outcome {
    require_dual_unitary(&[u, v])?;
    FloquetOperator::with_limits(u, v, l, cfg.limits)?;
    let r = theorem1_equivalence(u, v, l, w_max, cfg.tol.clamp(1e-12, 1e-8))?;
    println!("{}", report_json(&r));
    if !r.theorem_regime {
        eprintln!("note: w_max = {w_max} exceeds L - 4 = {}; results are outside the wrap-free regime", l as i64 - 4);
    }
    if r.matched {
        Ok(())
    } else {
        Err(Failure::checked("oracle and soliton spans differ"))
    }
}

struct ScanRow {
    index: usize,
    seed: u64,
    j: f64,
    plus: usize,
    minus: usize,
    oracle_dim: usize,
    soliton_dim: usize,
    seconds: f64,
}

fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn scan_one(index: usize, base: u64, w_max: usize, l: usize, tol: f64) -> Result<ScanRow, Error> {
    let start = Instant::now();
    let seed = base.wrapping_add(index as u64);
    let j = (splitmix64(seed) >> 11) as f64 / (1u64 << 53) as f64 * std::f64::consts::FRAC_PI_4;
    let g = Gate::random_dual_unitary_qubit(seed, j);
    let cat = SolitonCatalog::build(&g, &g, w_max, tol)?;
    let plus = cat.plus.values().map(Vec::len).sum();
    let minus = cat.minus.values().map(Vec::len).sum();
    let r = theorem1_equivalence(&g, &g, l, w_max, tol)?;
    Ok(ScanRow {
        index,
        seed,
        j,
        plus,
        minus,
        oracle_dim: r.oracle_dim,
        soliton_dim: r.soliton_dim,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn cmd_scan(cfg: &RunConfig, count: usize, w_max: usize, l: usize) -> Outcome {
    if count == 0 {
        return Err(Failure::usage("--count must be at least 1"));
    }
    if w_max == 0 || w_max > l {
        return Err(Failure::usage(format!("--w-max must lie in [1, L], got {w_max}")));
    }
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(count);
    let tol = cfg.tol.clamp(1e-12, 1e-8);
    let mut rows: Vec<Result<ScanRow, Error>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|k| {
                s.spawn(move || {
                    (k..count).step_by(workers).map(|i| scan_one(i, cfg.seed, w_max, l, tol)).collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("scan worker panicked")).collect()
    });
    rows.sort_by_key(|r| r.as_ref().map_or(usize::MAX, |r| r.index));
    println!("index,seed,j,solitons_plus,solitons_minus,oracle_dim,soliton_charge_dim");
    for r in rows {
        let r = r?;
        println!("{},{},{:.16e},{},{},{},{}", r.index, r.seed, r.j, r.plus, r.minus, r.oracle_dim, r.soliton_dim);
        eprintln!("gate {} took {:.3} s", r.index, r.seconds);
    }
    Ok(())
}

fn cmd_pauli_step(sum: &Path, u: &Gate, v: &Gate, steps: usize) -> Outcome {
    let text = std::fs::read_to_string(sum).map_err(|e| Failure::usage(format!("{}: {e}", sum.display())))?;
    let p: PauliSum = text.parse()?;
    let tu = tableau_from_gate(u)?;
    let tv = tableau_from_gate(v)?;
    print!("{}", brickwork_step(&tu, &tv, &p, steps)?);
    Ok(())
}

#[derive(Serialize)]
struct Check {
    name: String,
    passed: bool,
    value: f64,
}

#[derive(Serialize)]
struct DemoReport {
    w: usize,
    soliton_counts: std::collections::BTreeMap<String, usize>,
    checks: Vec<Check>,
    all_passed: bool,
}

type Counts = std::collections::BTreeMap<String, usize>;

fn demo_checks(cfg: &RunConfig, g: &Gate, w: usize, counts: &mut Counts) -> Result<Vec<Check>, Error> {
    let tol = cfg.tol;
    let mut checks = Vec::new();
    let mut push = |name: String, passed: bool, value: f64| checks.push(Check { name, passed, value });
    let du = g.is_dual_unitary(ducharge::gates::DEFAULT_GATE_TOL);
    push("dual_unitary".into(), du, g.duality_residual());
    if !du {
        return Ok(checks);
    }
    let sm = qubit::sigma_minus();
    for dir in [Direction::Plus, Direction::Minus] {
        let m1 = m_w_with(g, g, 1, dir, &cfg.limits)?;
        let s1 = solitons_of(&m1, 1e-8)?;
        let z_ok = s1.len() == 1 && s1[0].op.max_abs_diff(&qubit::z()) < 1e-12;
        counts.insert(format!("{dir}_w1"), s1.len());
        push(format!("solitons_{dir}_w1_is_sigma_z"), z_ok, s1.len() as f64);
        for width in (3..=w).step_by(2) {
            let m = m_w_with(g, g, width, dir, &cfg.limits)?;
            let recs = solitons_of(&m, 1e-8)?;
            let l = width - 2;
            counts.insert(format!("{dir}_w{width}"), recs.len());
            if width == 3 {
                push(format!("soliton_count_{dir}_w3"), recs.len() == 5, recs.len() as f64);
            }
            let mut parts = vec![sm.clone()];
            parts.extend(std::iter::repeat_n(qubit::z(), l));
            parts.push(sm.clone());
            let pair = qubit::string(&parts);
            let r = (&m.apply(&pair) - &pair).hs_norm() / pair.hs_norm();
            push(format!("pair_l{l}_soliton_{dir}"), r < tol, r);
        }
    }
    let f = FloquetOperator::with_limits(g, g, 4, cfg.limits)?;
    let one = C64::new(1.0, 0.0);
    let even_z = ChargeRecord::new(
        8,
        (0..8).step_by(2).map(|x| ChargeTerm { coeff: one, x, op: qubit::z() }).collect(),
        Provenance::User,
    )?;
    let r = verify_conserved(&f, &even_z)?;
    push("charge_even_sigma_z".into(), r < tol, r);
    for l in (1..=w.saturating_sub(2)).step_by(2) {
        let mut parts = vec![sm.clone()];
        parts.extend(std::iter::repeat_n(qubit::z(), l));
        parts.push(sm.clone());
        let op = qubit::string(&parts);
        let q = ChargeRecord::new(
            8,
            (0..8).map(|x| ChargeTerm { coeff: one, x, op: op.clone() }).collect(),
            Provenance::User,
        )?;
        let r = verify_conserved(&f, &q)?;
        push(format!("charge_pair_l{l}"), r < tol, r);
    }
    let t = theorem1_equivalence(g, g, 4, 3, 1e-8)?;
    push("theorem1_oracle_dim_12".into(), t.oracle_dim == 12, t.oracle_dim as f64);
    push("theorem1_spans_match".into(), t.matched, t.max_principal_sine.unwrap_or(1.0));
    push("theorem1_decomposition".into(), t.max_decomposition_residual < 1e-8, t.max_decomposition_residual);

    match tableau_from_gate(g) {
        Ok(tab) => {
            let pair = fermion_pair(0, 1)?;
            let moved = brickwork_step(&tab, &tab, &pair, 50)?;
            push(
                "fermion_pair_translates_50".into(),
                moved == pair.translated(100),
                moved.max_abs_diff(&pair.translated(100)),
            );
            let f0 = jw_fermion(0, JwMode::SemiInfinite)?;
            let img = brickwork_step(&tab, &tab, &f0, 50)?;
            let want = jw_fermion(100, JwMode::SemiInfinite)?;
            push("semi_infinite_fermion_translates_50".into(), img == want, img.max_abs_diff(&want));
        }
        Err(e) => push(format!("clifford_tableau ({e})"), false, f64::NAN),
    }
    let ac = anticommutator(&jw_fermion(0, JwMode::FiniteFrom0)?, &jw_fermion(3, JwMode::FiniteFrom0)?);
    push("anticommutator_f0_f3_zero".into(), ac.is_empty(), ac.len() as f64);
    let cm = commutator(&fermion_pair(0, 1)?, &fermion_pair(4, 1)?);
    push("commutator_pairs_zero".into(), cm.is_empty(), cm.len() as f64);
    Ok(checks)
}

fn cmd_fswap_demo(cfg: &RunConfig, w: usize, gate: Option<&Path>) -> Outcome {
    if w.is_multiple_of(2) || w < 3 {
        return Err(Failure::usage(format!("--w must be odd and at least 3, got {w}")));
    }
    let g = match gate {
        Some(p) => Gate::read(p)?,
        None => Gate::fswap(),
    };
    let mut soliton_counts = Counts::new();
    let checks = demo_checks(cfg, &g, w, &mut soliton_counts)?;
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    let report = DemoReport { w, soliton_counts, all_passed: failed.is_empty(), checks };
    println!("{}", report_json(&report));
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::checked(format!("failed checks: {}", failed.join(", "))))
    }
}

fn run(cli: Cli) -> Outcome {
    let cfg = RunConfig::new(&cli)?;
    match &cli.command {
        Command::Gate { preset, theta, j } => cmd_gate(*preset, *theta, *j, cfg.seed),
        Command::CheckGate { gate } => cmd_check_gate(gate),
        Command::FindSolitons { u, v, w, direction, l } => {
            let (gu, gv) = load_pair(u, v.as_deref())?;
            cmd_find_solitons(&cfg, &gu, &gv, *w, (*direction).into(), *l)
        }
        Command::VerifyCharge { charge, u, v, l } => {
            let (gu, gv) = load_pair(u, v.as_deref())?;
            cmd_verify_charge(&cfg, charge, &gu, &gv, *l)
        }
        Command::Theorem1 { u, v, l, w_max } => {
            let (gu, gv) = load_pair(u, v.as_deref())?;
            cmd_theorem1(&cfg, &gu, &gv, *l, *w_max)
        }
        Command::Scan { count, w_max, l } => cmd_scan(&cfg, *count, *w_max, *l),
        Command::PauliStep { sum, u, v, steps } => {
            let (gu, gv) = load_pair(u, v.as_deref())?;
            cmd_pauli_step(sum, &gu, &gv, *steps)
        }
        Command::FswapDemo { w, gate } => cmd_fswap_demo(&cfg, *w, gate.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
