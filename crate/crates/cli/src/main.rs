use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ionarch::arch::{LARGE_SEGMENT_CAP, SMALL_SEGMENT_CAP};
use ionarch::device::load_device_params;
use ionarch::explore::{minimal_segments, optimize_over, sweep};
use ionarch::report::{default_arch, prepare_circuit, run_benchmark};
use ionarch::tiles::logical_perf;
use ionarch::viz::write_timeline;
use ionarch::{
    calibrate_database, estimate_shor_runtime, ArchConfig, BenchmarkKind, BenchmarkSpec, CsConfig, DeviceParams, ExploreError,
    Grid, OpKind, PipelineError, Schedule, TilePerfDatabase,
};

#[derive(Parser)]
#[command(name = "ionarch", version, about = "Resource and performance simulator for modular trapped-ion fault-tolerant machines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate the logical tile database and print it as JSON.
    Tiles {
        #[arg(long)]
        dp: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full pipeline on one configuration and emit a JSON report.
    Run {
        #[command(flatten)]
        job: Job,
        /// Also write the schedule as JSON, for `viz --schedule`.
        #[arg(long)]
        schedule_out: Option<PathBuf>,
    },
    /// Evaluate every configuration of a grid. CSV when --out ends in .csv.
    Sweep {
        #[command(flatten)]
        job: Job,
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, default_value_t = u64::MAX)]
        budget: u64,
    },
    /// Find the fastest configuration within a qubit budget.
    Optimize {
        #[command(flatten)]
        job: Job,
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        budget: u64,
    },
    /// Total factoring time from one adder call and one AQFT duration.
    ShorEstimate {
        #[arg(long)]
        bits: u32,
        /// Duration of one adder call, e.g. `0.68s`, `680ms`.
        #[arg(long, value_parser = parse_duration_s)]
        adder: f64,
        #[arg(long, value_parser = parse_duration_s, default_value = "0s")]
        aqft: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the utilization timeline as SVG.
    Viz {
        #[command(flatten)]
        job: Job,
        /// Render a schedule saved by `run --schedule-out` instead of running.
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Job {
    #[arg(long, value_enum)]
    circuit: Option<CircuitArg>,
    #[arg(long)]
    bits: Option<usize>,
    #[arg(long)]
    arch: Option<PathBuf>,
    #[arg(long)]
    dp: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "10000")]
    seg_cap: SegCap,
    /// Override the number of computational segments.
    #[arg(long)]
    n_cs: Option<usize>,
    /// Override the computational segment shape as `data,anc,comm`.
    #[arg(long, value_parser = parse_cs)]
    cs: Option<CsConfig>,
    /// Accepted for reproducibility records; the pipeline is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CircuitArg {
    Qcla,
    Qrca,
    Aqft,
}

#[derive(Clone, Copy, ValueEnum)]
enum SegCap {
    #[value(name = "5000")]
    Small,
    #[value(name = "10000")]
    Large,
}

impl SegCap {
    fn qubits(self) -> u64 {
        match self {
            SegCap::Small => SMALL_SEGMENT_CAP,
            SegCap::Large => LARGE_SEGMENT_CAP,
        }
    }
}

fn parse_duration_s(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let (num, scale) = [("us", 1e-6), ("ms", 1e-3), ("s", 1.0)]
        .iter()
        .find_map(|(suffix, scale)| s.strip_suffix(suffix).map(|n| (n, *scale)))
        .unwrap_or((s, 1.0));
    let v: f64 = num.trim().parse().map_err(|_| format!("not a duration: `{s}`"))?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(format!("duration must be finite and non-negative: `{s}`"));
    }
    Ok(v * scale)
}

fn parse_cs(s: &str) -> Result<CsConfig, String> {
    let parts: Vec<u32> = s
        .split(',')
        .map(|p| p.trim().parse::<u32>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("bad segment shape `{s}`: {e}"))?;
    match parts[..] {
        [d, a, c] => Ok(CsConfig::new(d, a, c)),
        _ => Err(format!("expected data,anc,comm, got `{s}`")),
    }
}

impl Job {
    fn spec(&self) -> Result<BenchmarkSpec> {
        let (Some(c), Some(bits)) = (self.circuit, self.bits) else {
            bail!("--circuit and --bits are required");
        };
        let kind = match c {
            CircuitArg::Qcla => BenchmarkKind::Qcla,
            CircuitArg::Qrca => BenchmarkKind::Qrca,
            CircuitArg::Aqft => BenchmarkKind::Aqft,
        };
        Ok(BenchmarkSpec::new(kind, bits))
    }

    fn params(&self) -> Result<DeviceParams> {
        load_params(self.dp.as_deref())
    }

    /// The architecture file with flag overrides applied, or `None` when
    /// neither is given.
    fn arch(&self, n_qubits: impl FnOnce() -> Result<usize>) -> Result<Option<ArchConfig>> {
        if self.arch.is_none() && self.n_cs.is_none() && self.cs.is_none() {
            return Ok(None);
        }
        let mut cfg = match &self.arch {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str::<ArchConfig>(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => {
                // size the segment count to the overridden shape
                let n = n_qubits()?;
                let base = default_arch(n, self.seg_cap.qubits());
                let cs = self.cs.unwrap_or(base.cs_config);
                let n_cs = self.n_cs.unwrap_or(base.n_cs);
                let n_seg = minimal_segments(n, n_cs, cs);
                return Ok(Some(ArchConfig::uniform(n_seg, n_cs, cs, base.seg_qubit_cap, base.budget_ntq)));
            }
        };
        if let Some(n) = self.n_cs {
            cfg.n_cs = n;
        }
        if let Some(cs) = self.cs {
            cfg.cs_config = cs;
            cfg.ss_config = cs.storage();
        }
        Ok(Some(cfg))
    }
}

fn load_params(path: Option<&Path>) -> Result<DeviceParams> {
    let params = match path {
        Some(p) => load_device_params(p).with_context(|| format!("loading device parameters from {}", p.display()))?,
        None => DeviceParams::baseline(),
    };
    params.validate()?;
    Ok(params)
}

/// Coefficients are always fitted at the baseline device so that a
/// parameter file changes the evaluated numbers rather than the fit.
fn database() -> Result<Arc<TilePerfDatabase>> {
    Ok(Arc::new(calibrate_database(&DeviceParams::baseline()).context("calibrating tile database")?))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_grid(path: Option<&Path>) -> Result<Grid> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(serde_json::from_str(&text).with_context(|| format!("parsing grid {}", p.display()))?)
        }
        None => Ok(Grid::search_default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Tiles { dp, out } => {
            let params = load_params(dp.as_deref())?;
            let db = database()?;
            let evaluated = OpKind::ALL
                .iter()
                .map(|&op| Ok((format!("{op:?}"), logical_perf(&db, op, &params)?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            let doc = serde_json::json!({
                "database": serde_json::from_str::<serde_json::Value>(&db.to_json())?,
                "evaluated": evaluated,
            });
            emit(out.as_deref(), &serde_json::to_string_pretty(&doc)?)
        }
        Command::Run { job, schedule_out } => {
            let spec = job.spec()?;
            let params = job.params()?;
            let arch = job.arch(|| Ok(prepare_circuit(&spec)?.n_qubits))?;
            let (report, sched) = run_benchmark(&spec, arch.as_ref(), job.seg_cap.qubits(), database()?, &params)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(p) = schedule_out {
                let text = serde_json::to_string(&sched)?;
                std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
            }
            emit(job.out.as_deref(), &report.to_json())
        }
        Command::Sweep { job, grid, budget } => {
            let spec = job.spec()?;
            let params = job.params()?;
            let result = sweep(&spec, &load_grid(grid.as_deref())?, budget, job.seg_cap.qubits(), &database()?, &params)?;
            let csv = job.out.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")));
            emit(job.out.as_deref(), &if csv { result.to_csv() } else { result.to_json() })
        }
        Command::Optimize { job, grid, budget } => {
            let spec = job.spec()?;
            let params = job.params()?;
            let best = optimize_over(&spec, &load_grid(grid.as_deref())?, budget, job.seg_cap.qubits(), &database()?, &params)?;
            emit(job.out.as_deref(), &serde_json::to_string_pretty(&best)?)
        }
        Command::ShorEstimate { bits, adder, aqft, out } => {
            let est = estimate_shor_runtime(bits, adder, aqft)?;
            emit(out.as_deref(), &serde_json::to_string_pretty(&est)?)
        }
        Command::Viz { job, schedule } => {
            let sched: Schedule = match schedule {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str(&text).with_context(|| format!("parsing schedule {}", p.display()))?
                }
                None => {
                    let spec = job.spec()?;
                    let params = job.params()?;
                    let arch = job.arch(|| Ok(prepare_circuit(&spec)?.n_qubits))?;
                    run_benchmark(&spec, arch.as_ref(), job.seg_cap.qubits(), database()?, &params)?.1
                }
            };
            match job.out {
                Some(p) => write_timeline(&sched, &p).with_context(|| format!("writing {}", p.display())),
                None => {
                    print!("{}", ionarch::render_timeline(&sched));
                    Ok(())
                }
            }
        }
    }
}

fn is_infeasible(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<PipelineError>().is_some_and(PipelineError::is_infeasible)
            || c.downcast_ref::<ExploreError>().is_some_and(|e| match e {
                ExploreError::NoFeasibleConfig { .. } => true,
                ExploreError::Pipeline(p) => p.is_infeasible(),
                _ => false,
            })
    })
}

/// The error chain on one line, skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain().map(ToString::to_string) {
        if !out.ends_with(&cause) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&cause);
        }
    }
    out
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which is reserved for infeasible runs
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            if is_infeasible(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
