//! Command-line entry point: config ingestion, experiment execution,
//! validation suite, and plot-ready data emission.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage error,
//! 3 numerical failure.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::algorithm::{measure_sample, run_search, AlgorithmConfig, RunResult};
use crate::collective::{build_collective_operators, build_ms_basis, chain_census, dicke_state};
use crate::dynamics::{extract_phases, PulseParams, DEFAULT_WINDOW};
use crate::error::{IgsError, Result};
use crate::hilbert::{
    build_sector_basis, database_dimension, parse_bits_string, IonConfig, StateVector,
};
use crate::ideal::{min_steps, run_ideal, Database};
use crate::tuner::{tune, OperatorKind, TuneTarget};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "igs", about = "Trapped-ion Grover search simulator", version)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the sector basis, or the chain census with --chains.
    Basis(BasisArgs),
    /// Exact database-level Grover reference run.
    Ideal(IdealArgs),
    /// Probe a single pulse for phases and return populations.
    Pulse(PulseArgs),
    /// Run the full pulse-level search.
    Simulate(SimulateArgs),
    /// Search for pulse parameters realizing a reflection or oracle.
    Tune(TuneArgs),
    /// Run the cross-module invariant suite.
    Validate,
}

#[derive(Args)]
struct BasisArgs {
    #[arg(long = "N")]
    n_ions: u32,
    /// Emit the chain census as JSON instead of the ket listing.
    #[arg(long)]
    chains: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct IdealArgs {
    /// Database dimension.
    #[arg(long = "N")]
    dimension: usize,
    /// Matched phase φ (applied to both reflections).
    #[arg(long, default_value_t = std::f64::consts::PI)]
    phi: f64,
    /// Oracle phase, when different from --phi.
    #[arg(long = "phi-s")]
    phi_s: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    marked: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PulseArgs {
    #[arg(long = "N")]
    n_ions: u32,
    #[arg(long = "g0T")]
    g0_t: f64,
    #[arg(long = "deltaT")]
    delta_t: f64,
    #[arg(long = "K", default_value_t = DEFAULT_WINDOW)]
    window: f64,
    /// Ion set: "all", "markedhalf" (requires --marked), or a bitmask integer.
    #[arg(long, default_value = "all")]
    addressed: String,
    /// Marked bitstring, ion 1 leftmost.
    #[arg(long)]
    marked: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON config file; overrides all other flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "N")]
    n_ions: Option<u32>,
    /// Marked bitstring, ion 1 leftmost (e.g. 111000).
    #[arg(long)]
    marked: Option<String>,
    #[arg(long = "oracle-g0T")]
    oracle_g0t: Option<f64>,
    #[arg(long = "oracle-deltaT")]
    oracle_deltat: Option<f64>,
    #[arg(long = "refl-g0T")]
    refl_g0t: Option<f64>,
    #[arg(long = "refl-deltaT")]
    refl_deltat: Option<f64>,
    /// Grover steps; defaults to the minimal step count for the register.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long = "K", default_value_t = DEFAULT_WINDOW)]
    window: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    shots: usize,
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Skip the per-pulse phase probes (faster).
    #[arg(long)]
    no_diagnostics: bool,
}

#[derive(Args)]
struct TuneArgs {
    /// "reflection" or "oracle".
    #[arg(long)]
    kind: String,
    #[arg(long = "N")]
    n_ions: u32,
    #[arg(long)]
    marked: Option<String>,
    /// Range "a:b".
    #[arg(long = "g0T-range", default_value = "1:40")]
    g0t_range: String,
    #[arg(long = "deltaT-range", default_value = "1:40")]
    deltat_range: String,
    #[arg(long, default_value_t = 48)]
    grid: usize,
    #[arg(long = "K", default_value_t = DEFAULT_WINDOW)]
    window: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// JSON form of a simulation config; mirrors `AlgorithmConfig` with the
/// marked state spelled as a bitstring (ion 1 leftmost).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateSpec {
    #[serde(default = "schema_version_default")]
    pub schema_version: u32,
    pub n_ions: u32,
    pub marked_bits: String,
    pub oracle_pulse: PulseSpec,
    pub reflection_pulse: PulseSpec,
    #[serde(default = "window_default")]
    pub window: f64,
    #[serde(default)]
    pub n_steps: Option<usize>,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub n_shots: usize,
    #[serde(default = "diag_default")]
    pub phase_diagnostics: bool,
}

fn schema_version_default() -> u32 {
    SCHEMA_VERSION
}
fn window_default() -> f64 {
    DEFAULT_WINDOW
}
fn diag_default() -> bool {
    true
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PulseSpec {
    #[serde(rename = "g0T")]
    pub g0_t: f64,
    #[serde(rename = "deltaT")]
    pub delta_t: f64,
}

impl SimulateSpec {
    pub fn to_algorithm_config(&self) -> Result<AlgorithmConfig> {
        let ions = IonConfig::new(self.n_ions)?;
        let marked_bits = parse_bits_string(&self.marked_bits, self.n_ions)?;
        let n_steps = match self.n_steps {
            Some(n) => n,
            None => min_steps(database_dimension(ions) as usize),
        };
        Ok(AlgorithmConfig {
            ions,
            marked_bits,
            oracle_pulse: PulseParams::new(
                self.oracle_pulse.g0_t,
                self.oracle_pulse.delta_t,
                self.window,
                marked_bits,
            )?,
            reflection_pulse: PulseParams::new(
                self.reflection_pulse.g0_t,
                self.reflection_pulse.delta_t,
                self.window,
                ions.all_ions_mask(),
            )?,
            n_steps,
            rng_seed: self.rng_seed,
            n_shots: self.n_shots,
            collect_phase_diagnostics: self.phase_diagnostics,
        })
    }
}

fn write_output(path: &Option<PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content)?,
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
        }
    }
    Ok(())
}

/// Render a run as CSV with provenance comment lines.
pub fn trace_csv(spec: &SimulateSpec, result: &RunResult) -> String {
    let mut out = String::new();
    out.push_str(&format!("# schema_version,{SCHEMA_VERSION}\n"));
    out.push_str(&format!(
        "# config,{}\n",
        serde_json::to_string(spec).expect("serializable")
    ));
    out.push_str("step,tau_elapsed,marked_population,norm\n");
    for rec in &result.populations {
        out.push_str(&format!(
            "{},{},{:.12},{:.12}\n",
            rec.step, rec.tau_elapsed, rec.marked_population, rec.norm
        ));
    }
    out
}

/// Render a run as a JSON document with full provenance.
pub fn trace_json(spec: &SimulateSpec, result: &RunResult) -> String {
    serde_json::to_string_pretty(&json!({
        "schema_version": SCHEMA_VERSION,
        "config": spec,
        "result": result,
    }))
    .expect("serializable")
}

fn run_command(command: Command) -> Result<i32> {
    match command {
        Command::Basis(args) => {
            let config = IonConfig::new(args.n_ions)?;
            if args.chains {
                let census = chain_census(config);
                let lines: Vec<String> = census
                    .iter()
                    .map(|c| {
                        serde_json::to_string(&json!({
                            "j": c.j,
                            "N_j": c.degeneracy,
                            "couplings": c.rung_couplings,
                        }))
                        .expect("serializable")
                    })
                    .collect();
                write_output(&args.output, &(lines.join("\n") + "\n"))?;
            } else {
                let basis = build_sector_basis(config);
                let mut out = String::new();
                for (i, ket) in basis.kets().iter().enumerate() {
                    out.push_str(&format!(
                        "{}\t{}\t{}\t{}\n",
                        i,
                        ket.bits_string(args.n_ions),
                        ket.n_ionic(),
                        ket.phonons
                    ));
                }
                write_output(&args.output, &out)?;
            }
            Ok(0)
        }
        Command::Ideal(args) => {
            let db = Database::new(args.dimension, args.marked)?;
            let steps = args.steps.unwrap_or_else(|| min_steps(args.dimension));
            let phi_s = args.phi_s.unwrap_or(args.phi);
            let trace = run_ideal(&db, args.phi, phi_s, steps);
            let mut out = String::new();
            out.push_str(&format!("# schema_version,{SCHEMA_VERSION}\n"));
            out.push_str(&format!(
                "# config,{}\n",
                json!({"N": args.dimension, "marked": args.marked,
                       "phi_w": args.phi, "phi_s": phi_s, "steps": steps})
            ));
            out.push_str("step,population\n");
            out.push_str(&format!("0,{:.12}\n", 1.0 / args.dimension as f64));
            for (k, pop) in trace.iter().enumerate() {
                out.push_str(&format!("{},{:.12}\n", k + 1, pop));
            }
            write_output(&args.output, &out)?;
            Ok(0)
        }
        Command::Pulse(args) => {
            let config = IonConfig::new(args.n_ions)?;
            let basis = build_sector_basis(config);
            let marked = args
                .marked
                .as_deref()
                .map(|m| parse_bits_string(m, args.n_ions))
                .transpose()?;
            let addressed = match args.addressed.as_str() {
                "all" => config.all_ions_mask(),
                "markedhalf" => marked.ok_or_else(|| {
                    IgsError::Config("--addressed markedhalf requires --marked".into())
                })?,
                other => other.parse::<u32>().map_err(|_| {
                    IgsError::Config(format!("bad addressed spec '{other}'"))
                })?,
            };
            let pulse = PulseParams::new(args.g0_t, args.delta_t, args.window, addressed)?;
            let probes = pulse_probes(&basis, addressed)?;
            let report = extract_phases(&basis, &pulse, &probes)?;
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "pulse": pulse,
                "phase_report": report,
            });
            write_output(&args.output, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
            Ok(0)
        }
        Command::Simulate(args) => {
            let spec = simulate_spec_from_args(&args)?;
            let config = spec.to_algorithm_config()?;
            let result = run_search(&config)?;
            let rendered = match args.format.as_str() {
                "csv" => trace_csv(&spec, &result),
                "json" => trace_json(&spec, &result) + "\n",
                other => {
                    return Err(IgsError::Config(format!(
                        "unknown format '{other}' (expected csv or json)"
                    )))
                }
            };
            write_output(&args.output, &rendered)?;
            Ok(0)
        }
        Command::Tune(args) => {
            let config = IonConfig::new(args.n_ions)?;
            let kind = match args.kind.as_str() {
                "reflection" => OperatorKind::Reflection,
                "oracle" => OperatorKind::Oracle,
                other => {
                    return Err(IgsError::Config(format!(
                        "unknown kind '{other}' (expected reflection or oracle)"
                    )))
                }
            };
            let mut target = TuneTarget::new(kind, config);
            target.marked_bits = args
                .marked
                .as_deref()
                .map(|m| parse_bits_string(m, args.n_ions))
                .transpose()?;
            target.g0t_range = parse_range(&args.g0t_range)?;
            target.deltat_range = parse_range(&args.deltat_range)?;
            target.grid_density = args.grid;
            target.window = args.window;
            let result = tune(&target)?;
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "target": target,
                "result": result,
            });
            write_output(&args.output, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
            Ok(if result.converged { 0 } else { 1 })
        }
        Command::Validate => {
            let failures = run_validation_suite();
            Ok(if failures == 0 { 0 } else { 1 })
        }
    }
}

fn simulate_spec_from_args(args: &SimulateArgs) -> Result<SimulateSpec> {
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)?;
        let spec: SimulateSpec = serde_json::from_str(&text)?;
        return Ok(spec);
    }
    let missing = |name: &str| IgsError::Config(format!("missing required flag --{name}"));
    Ok(SimulateSpec {
        schema_version: SCHEMA_VERSION,
        n_ions: args.n_ions.ok_or_else(|| missing("N"))?,
        marked_bits: args.marked.clone().ok_or_else(|| missing("marked"))?,
        oracle_pulse: PulseSpec {
            g0_t: args.oracle_g0t.ok_or_else(|| missing("oracle-g0T"))?,
            delta_t: args.oracle_deltat.ok_or_else(|| missing("oracle-deltaT"))?,
        },
        reflection_pulse: PulseSpec {
            g0_t: args.refl_g0t.ok_or_else(|| missing("refl-g0T"))?,
            delta_t: args.refl_deltat.ok_or_else(|| missing("refl-deltaT"))?,
        },
        window: args.window,
        n_steps: args.steps,
        rng_seed: args.seed,
        n_shots: args.shots,
        phase_diagnostics: !args.no_diagnostics,
    })
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 2 {
        return Err(IgsError::Config(format!("range must be 'a:b', got '{s}'")));
    }
    let lo = parts[0]
        .parse::<f64>()
        .map_err(|_| IgsError::Config(format!("bad range bound '{}'", parts[0])))?;
    let hi = parts[1]
        .parse::<f64>()
        .map_err(|_| IgsError::Config(format!("bad range bound '{}'", parts[1])))?;
    Ok((lo, hi))
}

/// Probes for the `pulse` subcommand: chain representatives for an all-ion
/// pulse, the `Φ_k` ladder when the addressed set is a half, otherwise the
/// uniform register state.
fn pulse_probes(
    basis: &Arc<crate::hilbert::SectorBasis>,
    addressed: u32,
) -> Result<Vec<(String, StateVector)>> {
    let config = basis.config();
    if addressed == config.all_ions_mask() {
        let ops = build_collective_operators(basis, addressed)?;
        let ms = build_ms_basis(basis, &ops)?;
        let mut probes = Vec::new();
        for j in (0..=config.excitations()).rev() {
            if let Some(c) = ms.position(j, 0, 1) {
                probes.push((format!("j={j}"), ms.column_state(c)));
            }
        }
        Ok(probes)
    } else if addressed.count_ones() == config.excitations() {
        Ok(crate::algorithm::phi_states(basis, addressed)?
            .into_iter()
            .enumerate()
            .map(|(k, s)| (format!("Phi_{k}"), s))
            .collect())
    } else {
        Ok(vec![(
            "W".to_string(),
            dicke_state(basis, config.excitations())?,
        )])
    }
}

/// Quick cross-module invariant checks; returns the failure count.
fn run_validation_suite() -> usize {
    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool| {
        println!("{} {}", if ok { "PASS" } else { "FAIL" }, name);
        if !ok {
            failures += 1;
        }
    };

    check(
        "sector dimensions (N=6,8,10)",
        [(6u32, 42usize), (8, 163), (10, 638)].iter().all(|&(n, d)| {
            build_sector_basis(IonConfig::new(n).unwrap()).dim() == d
        }),
    );
    check(
        "database dimensions",
        [(6u32, 20u64), (8, 70), (10, 252)]
            .iter()
            .all(|&(n, d)| database_dimension(IonConfig::new(n).unwrap()) == d),
    );
    check(
        "minimal step counts",
        min_steps(20) == 3 && min_steps(70) == 6 && min_steps(252) == 12,
    );
    check("chain census N=6", {
        let census = chain_census(IonConfig::new(6).unwrap());
        let degeneracies: Vec<u64> = census.iter().map(|c| c.degeneracy).collect();
        degeneracies == vec![1, 5, 9, 5]
    });
    check("ideal search closed form (N_db=20)", {
        let db = Database::new(20, 0).unwrap();
        let trace = run_ideal(&db, std::f64::consts::PI, std::f64::consts::PI, 3);
        trace
            .iter()
            .enumerate()
            .all(|(k, &p)| (p - crate::ideal::closed_form_population(20, k + 1)).abs() < 1e-10)
    });
    check("chain basis orthonormal (N=4)", {
        let basis = build_sector_basis(IonConfig::new(4).unwrap());
        let ops = build_collective_operators(&basis, 0b1111).unwrap();
        match build_ms_basis(&basis, &ops) {
            Ok(ms) => {
                let mut ok = ms.dim() == basis.dim();
                for a in 0..ms.dim() {
                    for b in 0..ms.dim() {
                        let d: f64 = ms.columns[a]
                            .iter()
                            .zip(&ms.columns[b])
                            .map(|(x, y)| x * y)
                            .sum();
                        let expect = if a == b { 1.0 } else { 0.0 };
                        ok &= (d - expect).abs() < 1e-10;
                    }
                }
                ok
            }
            Err(_) => false,
        }
    });
    check("pulse propagator unitary (N=2)", {
        let basis = build_sector_basis(IonConfig::new(2).unwrap());
        let pulse = PulseParams::new(2.0, 3.0, 4.0, 0b11).unwrap();
        match crate::dynamics::pulse_propagator(&basis, &pulse) {
            Ok(u) => crate::dynamics::unitarity_defect(&u) < 1e-8,
            Err(_) => false,
        }
    });
    check("measurement sampling deterministic", {
        let basis = build_sector_basis(IonConfig::new(4).unwrap());
        let w = dicke_state(&basis, 2).unwrap();
        measure_sample(&w, 64, 3) == measure_sample(&w, 64, 3)
    });
    failures
}

/// Parse argv and execute; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    if let Ok(threads) = std::env::var("IGS_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with exit code 0
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_command(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                IgsError::Config(_) | IgsError::InvalidMarkedState(_) => 2,
                IgsError::Integration { .. }
                | IgsError::NumericalDegeneracy(_)
                | IgsError::TuningFailed(_) => 3,
                IgsError::Io(_) | IgsError::Json(_) => 2,
            }
        }
    }
}
