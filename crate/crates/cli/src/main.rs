// SPDX-License-Identifier: Apache-2.0

//! `camoforge`: keyed buffer/inverter insertion experiments on ISCAS85
//! netlists.

mod benchmarks;
mod config;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use camoforge::device::{mc_delay_for, BlockMode, EncryptionBlock, VthState};
use camoforge::netlist::{levelize, NetlistDump};
use camoforge::placement::{cost_report, insert_blocks, random_path};
use camoforge::scanchain::{run_protocol, BiasConfig, Protocol};
use camoforge::simulate::{
    encryption_probability, level_sweep, plan_case, sweep, KeyFile, SweepConfig, SweepRow,
};
use camoforge::timing::StaticTiming;
use camoforge::{
    parse_bench, write_bench, Key, Netlist, PlacementPlan, Strategy, VectorSet, WrongKey,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{Overrides, Settings};

#[derive(Parser, Debug)]
#[command(
    name = "camoforge",
    version,
    about = "Keyed buffer/inverter insertion for ISCAS85 netlists"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Run configuration JSON (delays, device, seed, vectors, k, wrong_key, out).
    #[arg(long, global = true, env = "CAMOFORGE_CONFIG")]
    config: Option<PathBuf>,
    /// Seed for placement (encrypt) or test vectors (simulate, sweep, level-sweep).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of random test vectors.
    #[arg(long, global = true)]
    vectors: Option<usize>,
    /// Number of longest paths summed for the top-k metric.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Wrong-key convention.
    #[arg(long, global = true, value_enum)]
    wrong_key: Option<WrongKeyArg>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum StrategyArg {
    Noncritical,
    Critical,
    Level,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Noncritical => Strategy::NoncriticalSpread,
            StrategyArg::Critical => Strategy::CriticalStacked,
            StrategyArg::Level => Strategy::LevelAt,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum WrongKeyArg {
    AllInvert,
    Complement,
    Random,
}

impl From<WrongKeyArg> for WrongKey {
    fn from(w: WrongKeyArg) -> Self {
        match w {
            WrongKeyArg::AllInvert => WrongKey::AllInvert,
            WrongKeyArg::Complement => WrongKey::Complement,
            WrongKeyArg::Random => WrongKey::Random,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ProtocolArg {
    TwoStep,
    OneStep,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum PathChoice {
    Critical,
    Random,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print a JSON summary of a netlist.
    Parse {
        file: PathBuf,
        /// Emit the full netlist instead of a summary.
        #[arg(long)]
        full: bool,
    },
    /// Print the top-k path report as CSV.
    Timing { file: PathBuf },
    /// Insert keyed blocks; writes the encrypted netlist, plan and correct key.
    Encrypt {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "noncritical")]
        strategy: StrategyArg,
        /// Number of blocks.
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Distance from the output for `--strategy level`.
        #[arg(long)]
        level: Option<u32>,
    },
    /// Compare an encrypted netlist under a key against the original.
    Simulate {
        original: PathBuf,
        encrypted: PathBuf,
        /// Key JSON as written by `encrypt`.
        #[arg(long)]
        key: PathBuf,
        /// Use every input assignment instead of random vectors.
        #[arg(long)]
        exhaustive: bool,
        /// Derive a wrong key from `--key` with this convention.
        #[arg(long, value_enum)]
        derive_wrong: Option<WrongKeyArg>,
    },
    /// Shift a key through the scan chain and program the blocks.
    Program {
        plan: PathBuf,
        key: PathBuf,
        #[arg(long, value_enum, default_value = "two-step")]
        protocol: ProtocolArg,
    },
    /// Probability and overhead over circuits, block counts and seeds.
    Sweep {
        dir: PathBuf,
        #[arg(long, value_enum, default_value = "noncritical")]
        strategy: StrategyArg,
        /// Block counts: `N`, `A..B` (inclusive) or a comma list.
        #[arg(long, default_value = "1..7")]
        blocks: String,
        /// Placement seeds, same syntax as `--blocks`.
        #[arg(long, default_value = "1..10")]
        seeds: String,
        /// Circuit names without extension; `all` uses every .bench file.
        #[arg(long, value_delimiter = ',')]
        circuits: Option<Vec<String>>,
        #[arg(long)]
        level: Option<u32>,
    },
    /// Probability of one inverter-keyed block at each level along a path.
    LevelSweep {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "critical")]
        path: PathChoice,
        /// Seed for `--path random`.
        #[arg(long, default_value_t = 1)]
        path_seed: u64,
    },
    /// Verify benchmark files against the expected checksums.
    FetchBenchmarks { dir: PathBuf },
    /// Transistor and area cost of `n` blocks.
    Cost {
        #[arg(long, default_value_t = 1)]
        n: u32,
    },
    /// Monte Carlo delay spread of both block modes.
    Variation {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

impl Command {
    fn stage(&self) -> &'static str {
        match self {
            Command::Parse { .. } => "parse",
            Command::Timing { .. } => "timing",
            Command::Encrypt { .. } => "encrypt",
            Command::Simulate { .. } => "simulate",
            Command::Program { .. } => "program",
            Command::Sweep { .. } => "sweep",
            Command::LevelSweep { .. } => "level-sweep",
            Command::FetchBenchmarks { .. } => "fetch-benchmarks",
            Command::Cost { .. } => "cost",
            Command::Variation { .. } => "variation",
        }
    }
}

#[derive(Debug)]
struct StageError {
    stage: &'static str,
    cause: anyhow::Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let error: Vec<String> = self
            .cause
            .chain()
            .skip(usize::from(self.cause.downcast_ref::<Staged>().is_some()))
            .map(ToString::to_string)
            .collect();
        let body = serde_json::json!({ "stage": self.stage, "error": error.join(": ") });
        write!(f, "{body}")
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let stage = cli.command.stage();
    match run(cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(cause) => {
            let stage = cause.downcast_ref::<Staged>().map_or(stage, |s| s.0);
            eprintln!("{}", StageError { stage, cause });
            ExitCode::from(1)
        }
    }
}

/// Marks the sub-stage an error came from.
#[derive(Debug)]
struct Staged(&'static str);

impl fmt::Display for Staged {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<anyhow::Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.into().context(Staged(stage)))
    }
}

fn settings(c: &Common) -> Result<Settings> {
    Settings::resolve(
        c.config.as_deref(),
        Overrides {
            seed: c.seed,
            vectors: c.vectors,
            k: c.k,
            wrong_key: c.wrong_key.map(Into::into),
            out: c.out.clone(),
        },
    )
    .stage("config")
}

fn load_netlist(path: &Path) -> Result<Netlist> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .stage("read")?;
    parse_bench(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .stage("parse")
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .stage("read")?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .stage("read")
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .stage("write")
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn run(cli: Cli, argv: &[String]) -> Result<()> {
    let s = settings(&cli.common)?;
    match cli.command {
        Command::Parse { file, full } => cmd_parse(&file, full),
        Command::Timing { file } => cmd_timing(&file, &s),
        Command::Encrypt {
            file,
            strategy,
            n,
            level,
        } => cmd_encrypt(&file, strategy.into(), n, level, &s, argv),
        Command::Simulate {
            original,
            encrypted,
            key,
            exhaustive,
            derive_wrong,
        } => cmd_simulate(
            &original,
            &encrypted,
            &key,
            exhaustive,
            derive_wrong.map(Into::into),
            &s,
        ),
        Command::Program {
            plan,
            key,
            protocol,
        } => cmd_program(&plan, &key, protocol, &s, argv),
        Command::Sweep {
            dir,
            strategy,
            blocks,
            seeds,
            circuits,
            level,
        } => cmd_sweep(
            &dir,
            strategy.into(),
            &blocks,
            &seeds,
            circuits,
            level,
            &s,
            argv,
        ),
        Command::LevelSweep {
            file,
            path,
            path_seed,
        } => cmd_level_sweep(&file, path, path_seed, &s, argv),
        Command::FetchBenchmarks { dir } => cmd_fetch(&dir),
        Command::Cost { n } => {
            print!("{}", to_json(&cost_report(n))?);
            Ok(())
        }
        Command::Variation { samples } => cmd_variation(samples, &s),
    }
}

#[derive(Serialize)]
struct Summary {
    inputs: usize,
    outputs: usize,
    gates: usize,
    blocks: usize,
    depth: u32,
    gate_counts: std::collections::BTreeMap<&'static str, usize>,
}

fn cmd_parse(file: &Path, full: bool) -> Result<()> {
    let nl = load_netlist(file)?;
    if full {
        print!("{}", to_json(&NetlistDump::from(&nl))?);
        return Ok(());
    }
    let mut gate_counts = std::collections::BTreeMap::new();
    for g in nl.gate_ids() {
        *gate_counts.entry(nl.kind(g).as_str()).or_insert(0) += 1;
    }
    let summary = Summary {
        inputs: nl.inputs().len(),
        outputs: nl.outputs().len(),
        gates: nl.gate_count(),
        blocks: nl.camo_gates().len(),
        depth: levelize(&nl).max_forward(),
        gate_counts,
    };
    print!("{}", to_json(&summary)?);
    Ok(())
}

fn cmd_timing(file: &Path, s: &Settings) -> Result<()> {
    let nl = load_netlist(file)?;
    let report = StaticTiming::new(&nl, &s.delays)
        .and_then(|st| st.top_k(s.k))
        .stage("timing")?;
    print!("{}", report.to_csv());
    Ok(())
}

fn sweep_config(s: &Settings, strategy: Strategy, level: Option<u32>) -> SweepConfig {
    SweepConfig {
        strategy,
        vectors: s.vectors,
        vector_seed: s.seed,
        wrong_key: s.wrong_key,
        k: s.k,
        delays: s.delays.clone(),
        device: s.device.clone(),
        level,
        ..SweepConfig::default()
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(
        || "netlist".to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

fn cmd_encrypt(
    file: &Path,
    strategy: Strategy,
    n: usize,
    level: Option<u32>,
    s: &Settings,
    argv: &[String],
) -> Result<()> {
    let nl = load_netlist(file)?;
    let seed = s.seed;
    let st = StaticTiming::new(&nl, &s.delays).stage("timing")?;
    let plan = plan_case(&st, &sweep_config(s, strategy, level), n, seed).stage("placement")?;
    let ins = insert_blocks(&nl, &plan).stage("placement")?;
    let plan = PlacementPlan {
        block_ids: ins.block_ids.clone(),
        ..plan
    };
    let key = Key::all_buffer(&ins.block_ids);
    s.echo(argv).stage("write")?;
    let name = stem(file);
    write_file(
        &s.out.join(format!("{name}.enc.bench")),
        write_bench(&ins.netlist),
    )?;
    write_file(&s.out.join("plan.json"), to_json(&plan)?)?;
    write_file(&s.out.join("key.json"), to_json(&key.to_file())?)?;
    log::info!("{} blocks inserted into {name}", plan.block_ids.len());
    Ok(())
}

fn load_key(path: &Path) -> Result<Key> {
    let file: KeyFile = read_json(path)?;
    Key::from_file(&file).stage("key")
}

fn cmd_simulate(
    original: &Path,
    encrypted: &Path,
    key: &Path,
    exhaustive: bool,
    derive_wrong: Option<WrongKey>,
    s: &Settings,
) -> Result<()> {
    let orig = load_netlist(original)?;
    let enc = load_netlist(encrypted)?;
    let mut key = load_key(key)?;
    if let Some(w) = derive_wrong {
        key = key.with_bits(w.apply(&key.bits, s.seed)).stage("key")?;
    }
    let vectors = if exhaustive {
        VectorSet::Exhaustive
    } else {
        VectorSet::Random {
            seed: s.seed,
            n: s.vectors,
        }
    };
    let result = encryption_probability(&orig, &enc, &key, vectors, &s.device).stage("simulate")?;
    print!("{}", to_json(&result)?);
    Ok(())
}

#[derive(Serialize)]
struct ProgrammedBlock {
    id: String,
    key_bit: bool,
    mode: BlockMode,
    upper: VthState,
    lower: VthState,
    complementary: bool,
}

#[derive(Serialize)]
struct Programmed {
    protocol: Protocol,
    scan_outputs: String,
    blocks: Vec<ProgrammedBlock>,
}

fn cmd_program(
    plan: &Path,
    key: &Path,
    protocol: ProtocolArg,
    s: &Settings,
    argv: &[String],
) -> Result<()> {
    let plan: PlacementPlan = read_json(plan)?;
    let key = load_key(key)?;
    if !plan.block_ids.is_empty() && plan.block_ids != key.block_ids {
        return Err(anyhow!(
            "key block order does not match the plan's block_ids"
        ))
        .stage("key");
    }
    let protocol = match protocol {
        ProtocolArg::TwoStep => Protocol::TwoStep,
        ProtocolArg::OneStep => Protocol::OneStep,
    };
    s.device.validate().stage("device")?;
    let template = s.device.device::<f64>();
    let op = s.device.operating_point::<f64>();
    let fresh = vec![EncryptionBlock::new(&template); key.block_ids.len()];
    let run = run_protocol(
        protocol,
        &key.block_ids,
        &key.bits,
        &fresh,
        &op,
        &BiasConfig::default(),
    )
    .stage("program")?;
    let programmed = Programmed {
        protocol,
        scan_outputs: run
            .chain
            .outputs()
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect(),
        blocks: key
            .block_ids
            .iter()
            .zip(&key.bits.0)
            .zip(&run.blocks)
            .map(|((id, &key_bit), b)| ProgrammedBlock {
                id: id.clone(),
                key_bit,
                mode: b.mode(),
                upper: b.upper.state,
                lower: b.lower.state,
                complementary: b.is_complementary(),
            })
            .collect(),
    };
    s.echo(argv).stage("write")?;
    write_file(&s.out.join("programmed.json"), to_json(&programmed)?)?;
    write_file(&s.out.join("trace.json"), run.trace.to_json() + "\n")?;
    Ok(())
}

/// Parses `N`, `A..B` (inclusive) or `a,b,c`.
fn parse_list(text: &str) -> Result<Vec<u64>> {
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if a > b {
            bail!("empty range `{text}`");
        }
        return Ok((a..=b).collect());
    }
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .with_context(|| format!("bad list item `{t}`"))
        })
        .collect()
}

fn load_dir(dir: &Path, circuits: Option<Vec<String>>) -> Result<Vec<(String, Netlist)>> {
    let names: Vec<String> = match circuits {
        Some(c) if c.iter().any(|n| n == "all") => {
            let mut v: Vec<String> = fs::read_dir(dir)
                .with_context(|| format!("listing {}", dir.display()))
                .stage("read")?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|x| x == "bench"))
                .map(|p| stem(&p))
                .collect();
            v.sort_by_key(|n| {
                (
                    n.trim_start_matches('c').parse::<u64>().unwrap_or(u64::MAX),
                    n.clone(),
                )
            });
            v
        }
        Some(c) => c,
        None => benchmarks::SWEEP_SET
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    names
        .into_iter()
        .map(|n| {
            let nl = load_netlist(&dir.join(format!("{n}.bench")))?;
            Ok((n, nl))
        })
        .collect()
}

const SWEEP_HEADER: [&str; 10] = [
    "circuit",
    "strategy",
    "n_blocks",
    "seed",
    "n_vectors",
    "probability",
    "critical_delay_ps",
    "critical_pct",
    "top100_sum_ps",
    "top100_pct",
];

fn sweep_record(r: &SweepRow) -> [String; 10] {
    [
        r.circuit.clone(),
        r.strategy.to_string(),
        r.n_blocks.to_string(),
        r.seed.map_or_else(|| "mean".to_string(), |s| s.to_string()),
        r.n_vectors.to_string(),
        format!("{:.6}", r.probability),
        format!("{:.3}", r.critical_delay_ps),
        format!("{:.4}", r.critical_pct),
        format!("{:.3}", r.top100_sum_ps),
        format!("{:.4}", r.top100_pct),
    ]
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    dir: &Path,
    strategy: Strategy,
    blocks: &str,
    seeds: &str,
    circuits: Option<Vec<String>>,
    level: Option<u32>,
    s: &Settings,
    argv: &[String],
) -> Result<()> {
    let n_blocks = parse_list(blocks).stage("config")?;
    let seeds = parse_list(seeds).stage("config")?;
    let benches = load_dir(dir, circuits)?;
    let cfg = SweepConfig {
        n_blocks: n_blocks.into_iter().map(|n| n as usize).collect(),
        seeds,
        ..sweep_config(s, strategy, level)
    };
    let outcome = sweep(&benches, &cfg).stage("sweep")?;
    s.echo(argv).stage("write")?;

    let mut w = csv::Writer::from_path(s.out.join("results.csv")).stage("write")?;
    w.write_record(SWEEP_HEADER).stage("write")?;
    for r in &outcome.rows {
        w.write_record(sweep_record(r)).stage("write")?;
    }
    w.flush().stage("write")?;

    let mut w = csv::Writer::from_path(s.out.join("skipped.csv")).stage("write")?;
    w.write_record(["circuit", "n_blocks", "seed", "reason"])
        .stage("write")?;
    for k in &outcome.skipped {
        w.write_record([
            k.circuit.clone(),
            k.n_blocks.to_string(),
            k.seed.to_string(),
            k.reason.clone(),
        ])
        .stage("write")?;
    }
    w.flush().stage("write")?;

    if !outcome.skipped.is_empty() {
        log::warn!("{} runs skipped, see skipped.csv", outcome.skipped.len());
    }
    for r in outcome.rows.iter().filter(|r| r.circuit == "mean") {
        log::info!(
            "n={} mean probability {:.4}, critical +{:.2}%, top-{} +{:.2}%",
            r.n_blocks,
            r.probability,
            r.critical_pct,
            cfg.k,
            r.top100_pct
        );
    }
    Ok(())
}

fn cmd_level_sweep(
    file: &Path,
    choice: PathChoice,
    path_seed: u64,
    s: &Settings,
    argv: &[String],
) -> Result<()> {
    let nl = load_netlist(file)?;
    let path = match choice {
        PathChoice::Critical => None,
        PathChoice::Random => Some(
            random_path(&nl, path_seed)
                .ok_or_else(|| anyhow!("netlist has no input-to-output path"))
                .stage("placement")?,
        ),
    };
    let rows = level_sweep(
        &nl,
        path.as_deref(),
        &sweep_config(s, Strategy::LevelAt, None),
    )
    .stage("level-sweep")?;
    s.echo(argv).stage("write")?;
    let mut w = csv::Writer::from_path(s.out.join("levels.csv")).stage("write")?;
    w.write_record(["level", "driver", "sink", "n_vectors", "probability"])
        .stage("write")?;
    for r in &rows {
        w.write_record([
            r.level.to_string(),
            r.driver.clone(),
            r.sink.clone(),
            r.n_vectors.to_string(),
            format!("{:.6}", r.probability),
        ])
        .stage("write")?;
    }
    w.flush().stage("write")?;
    Ok(())
}

fn cmd_fetch(dir: &Path) -> Result<()> {
    let status = benchmarks::check_dir(dir);
    print!("{}", to_json(&status)?);
    let bad: Vec<&str> = status
        .iter()
        .filter(|f| f.status != "ok")
        .map(|f| f.file)
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(anyhow!(
            "{} file(s) missing or altered: {}; place the public ISCAS85 .bench files in {}",
            bad.len(),
            bad.join(", "),
            dir.display()
        ))
        .stage("fetch-benchmarks")
    }
}

#[derive(Serialize)]
struct Variation {
    mode: BlockMode,
    samples: u64,
    mean_ns: f64,
    stddev_ns: f64,
    min_ns: f64,
    max_ns: f64,
    spread_ns: f64,
}

fn cmd_variation(samples: usize, s: &Settings) -> Result<()> {
    s.device.validate().stage("device")?;
    let rows: Vec<Variation> = [BlockMode::Buffer, BlockMode::Inverter]
        .into_iter()
        .map(|mode| {
            let st = mc_delay_for::<f64>(&s.device, mode, samples, s.seed);
            Variation {
                mode,
                samples: st.n,
                mean_ns: st.mean,
                stddev_ns: st.stddev(),
                min_ns: st.min,
                max_ns: st.max,
                spread_ns: st.spread(),
            }
        })
        .collect();
    print!("{}", to_json(&rows)?);
    Ok(())
}
