use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pointconv::bench::{cmd_bench, cmd_generate, cmd_triplets_dump, cmd_triplets_replay, cmd_verify, BenchSpec};
use pointconv::generate::{CloudKind, GenParams};
use pointconv::triplets::SortAxis;

#[derive(Parser)]
#[command(name = "pointconv-bench", about = "Workload generation, verification and executor benchmarks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic point cloud (.xyz for ASCII, anything else NPC1)
    Generate {
        #[arg(long)]
        kind: CloudKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = GenParams::default().extent)]
        extent: f64,
        #[arg(long, default_value_t = GenParams::default().clusters)]
        clusters: usize,
        #[arg(long, default_value_t = GenParams::default().sigma)]
        sigma: f64,
        #[arg(long, default_value_t = GenParams::default().voxel_size)]
        voxel_size: f64,
    },
    /// Check the engines against the oracles; exit 1 on any failure
    Verify(SpecArgs),
    /// Time executor sweeps and write CSV counter rows
    Bench(SpecArgs),
    /// Dump or replay sorted triplet files
    Triplets {
        #[command(subcommand)]
        cmd: TripletCmd,
    },
}

#[derive(Subcommand)]
enum TripletCmd {
    /// Build the workload's triplets, sort them and write a TRP1 file
    Dump {
        #[arg(long)]
        out: PathBuf,
        /// Sort axis (none, i, j, k); default picks by heuristic
        #[arg(long)]
        axis: Option<SortAxis>,
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Benchmark a TRP1 file
    Replay {
        #[arg(long)]
        file: PathBuf,
        #[command(flatten)]
        spec: SpecArgs,
    },
}

#[derive(Args)]
struct SpecArgs {
    /// key=value file applied before the flags below
    #[arg(long)]
    config: Option<PathBuf>,
    /// Repeatable `key=value` override, e.g. `--set L=1,8,32`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    workload: Option<String>,
    #[arg(long)]
    points: Option<String>,
    #[arg(long)]
    triplets: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    groups: Option<String>,
    #[arg(long)]
    c_in: Option<String>,
    #[arg(long)]
    c_out: Option<String>,
    #[arg(long)]
    kernels: Option<String>,
    #[arg(long)]
    executors: Option<String>,
    #[arg(long)]
    sort_axes: Option<String>,
    #[arg(long = "group-len")]
    group_len: Option<String>,
    #[arg(long)]
    tiles: Option<String>,
    /// Comma-separated worker counts
    #[arg(long)]
    workers: Option<String>,
    /// Worker-count-independent summation order
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    precision: Option<String>,
    #[arg(long)]
    repetitions: Option<String>,
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    verify_seeds: Option<String>,
    #[arg(long)]
    verify_points: Option<String>,
    #[arg(long)]
    inject_fault: bool,
}

impl SpecArgs {
    fn build(&self) -> pointconv::Result<BenchSpec> {
        let mut spec = BenchSpec::default();
        spec.apply_env()?;
        if let Some(p) = &self.config {
            spec.apply_config_file(p)?;
        }
        let flags = [
            ("workload", &self.workload),
            ("points", &self.points),
            ("triplets", &self.triplets),
            ("seed", &self.seed),
            ("radius", &self.radius),
            ("t", &self.t),
            ("G", &self.groups),
            ("C_in", &self.c_in),
            ("C_out", &self.c_out),
            ("kernels", &self.kernels),
            ("executors", &self.executors),
            ("sort_axes", &self.sort_axes),
            ("L", &self.group_len),
            ("tiles", &self.tiles),
            ("workers", &self.workers),
            ("precision", &self.precision),
            ("repetitions", &self.repetitions),
            ("output", &self.output),
            ("verify_seeds", &self.verify_seeds),
            ("verify_points", &self.verify_points),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                spec.set(key, v)?;
            }
        }
        for kv in &self.sets {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| pointconv::Error::Config(format!("--set {kv:?}: expected KEY=VALUE")))?;
            spec.set(k, v)?;
        }
        if self.deterministic {
            spec.deterministic = true;
        }
        if self.inject_fault {
            spec.inject_fault = true;
        }
        Ok(spec)
    }
}

fn run(cli: Cli) -> pointconv::Result<ExitCode> {
    match cli.cmd {
        Cmd::Generate { kind, n, seed, out, extent, clusters, sigma, voxel_size } => {
            cmd_generate(kind, n, seed, &out, &GenParams { extent, clusters, sigma, voxel_size })?;
        }
        Cmd::Verify(args) => {
            let report = cmd_verify(&args.build()?)?;
            for case in &report.cases {
                println!("{case}");
            }
            println!("{} cases, {} failed", report.cases.len(), report.failures());
            return Ok(ExitCode::from(report.exit_code() as u8));
        }
        Cmd::Bench(args) => {
            cmd_bench(&args.build()?)?;
        }
        Cmd::Triplets { cmd: TripletCmd::Dump { out, axis, spec } } => {
            let t = cmd_triplets_dump(&spec.build()?, axis, &out)?;
            eprintln!("wrote {} triplets sorted {} to {}", t.len(), t.sort_axis, out.display());
        }
        Cmd::Triplets { cmd: TripletCmd::Replay { file, spec } } => {
            cmd_triplets_replay(&spec.build()?, &file)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
