//! Benchmark and verification harness behind the `pointconv-bench` binary.
//!
//! A [`BenchSpec`] is assembled from defaults, then an optional `key=value`
//! config file, then command-line flags. `POINTCONV_WORKERS` and
//! `POINTCONV_DETERMINISTIC` are the only environment variables read.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::cloud::{fnv1a, make_weights, FeatureTensor, WeightTensor};
use crate::conv::PointConvOp;
use crate::cost::{predict_access_grouped, predict_access_naive};
use crate::error::{Error, Result};
use crate::exec::{ExecConfig, ExecReport, Executor};
use crate::generate::{generate, random_triplets, CloudKind, GenParams};
use crate::io::{load_cloud, load_triplets, save_cloud, save_triplets, write_counter_csv, CounterRow};
use crate::mvmr::{mvmr_report, mvmr_transposed_report};
use crate::oracle::{brute_radius_oracle, dense_conv_oracle, finite_difference_gradients, max_rel_error};
use crate::scalar::Scalar;
use crate::spatial::radius_search;
use crate::triplets::{build_triplets_native, choose_sort_axis, sort_triplets, ConvGeometry, SortAxis, TripletList};
use crate::vvor::vvor_report;

pub const ENV_WORKERS: &str = "POINTCONV_WORKERS";
pub const ENV_DETERMINISTIC: &str = "POINTCONV_DETERMINISTIC";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" | "single" => Ok(Precision::F32),
            "f64" | "double" => Ok(Precision::F64),
            _ => Err(Error::Config(format!("unknown precision {s:?}"))),
        }
    }
}

/// Which engine call a benchmark row times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchKernel {
    /// Forward pass.
    Mvmr,
    /// Input gradient.
    MvmrTransposed,
    /// Weight gradient.
    Vvor,
}

impl BenchKernel {
    pub fn as_str(self) -> &'static str {
        match self {
            BenchKernel::Mvmr => "mvmr",
            BenchKernel::MvmrTransposed => "mvmr_transposed",
            BenchKernel::Vvor => "vvor",
        }
    }
}

impl fmt::Display for BenchKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mvmr" => Ok(BenchKernel::Mvmr),
            "mvmr_transposed" => Ok(BenchKernel::MvmrTransposed),
            "vvor" => Ok(BenchKernel::Vvor),
            _ => Err(Error::Config(format!("unknown kernel {s:?}"))),
        }
    }
}

/// Where the triplets come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Workload {
    /// Generated cloud, self-convolved at the spec's radius and resolution.
    Cloud { kind: CloudKind, points: usize, seed: u64 },
    /// NPC1 or XYZ file, self-convolved.
    CloudFile(PathBuf),
    /// TRP1 file, used as is.
    TripletFile(PathBuf),
    /// Uniform random `(i, j, k)` over `points` outputs and inputs.
    RandomTriplets { count: usize, points: usize, seed: u64 },
}

impl fmt::Display for Workload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Workload::Cloud { kind, points, seed } => write!(f, "{kind}(n={points}, seed={seed})"),
            Workload::CloudFile(p) => write!(f, "cloud:{}", p.display()),
            Workload::TripletFile(p) => write!(f, "triplets:{}", p.display()),
            Workload::RandomTriplets { count, points, seed } => {
                write!(f, "random_triplets(count={count}, n={points}, seed={seed})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub workload: Workload,
    pub gen: GenParams,
    pub radius: f64,
    pub resolution: usize,
    pub groups: usize,
    /// Total input channels across groups.
    pub c_in: usize,
    /// Total output channels across groups.
    pub c_out: usize,
    pub kernels: Vec<BenchKernel>,
    pub executors: Vec<Executor>,
    pub sort_axes: Vec<SortAxis>,
    pub group_lens: Vec<usize>,
    /// `(B_out, B_in)` pairs.
    pub tiles: Vec<(usize, usize)>,
    pub workers: Vec<usize>,
    pub deterministic: bool,
    pub precision: Precision,
    pub repetitions: usize,
    /// Seed for weights and features.
    pub data_seed: u64,
    /// `None` writes to stdout.
    pub output: Option<PathBuf>,
    pub verify_seeds: usize,
    pub verify_points: usize,
    /// Corrupt the triplets handed to the engines during `verify`.
    pub inject_fault: bool,
}

impl Default for BenchSpec {
    fn default() -> Self {
        let d = ExecConfig::default();
        Self {
            workload: Workload::Cloud { kind: CloudKind::UniformCube, points: 4096, seed: 1 },
            gen: GenParams::default(),
            radius: 0.08,
            resolution: 3,
            groups: 1,
            c_in: 64,
            c_out: 128,
            kernels: vec![BenchKernel::Mvmr],
            executors: vec![Executor::Naive, Executor::Grouped],
            sort_axes: vec![SortAxis::ByK],
            group_lens: vec![d.group_len],
            tiles: vec![(d.block_out, d.block_in)],
            workers: vec![d.workers],
            deterministic: false,
            precision: Precision::F32,
            repetitions: 3,
            data_seed: 0,
            output: None,
            verify_seeds: 4,
            verify_points: 128,
            inject_fault: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    let items: Vec<T> = v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(key, s)).collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("{key}: empty list")));
    }
    Ok(items)
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

impl BenchSpec {
    /// Sets one option by its config-file name.
    ///
    /// Keys: `workload` (a generator name, `random_triplets`, `cloud:PATH`
    /// or `triplets:PATH`), `points`, `triplets`, `seed`, `extent`,
    /// `clusters`, `sigma`, `voxel_size`, `radius`, `t`, `G`, `C_in`,
    /// `C_out`, `kernels`, `executors`, `sort_axes`, `L`, `tiles`
    /// (`32x32,16x64`), `workers`, `deterministic`, `precision`,
    /// `repetitions`, `data_seed`, `output`, `verify_seeds`,
    /// `verify_points`, `inject_fault`. List values are comma separated.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "workload" => {
                let (points, seed) = self.workload_size_seed();
                self.workload = if let Some(p) = v.strip_prefix("cloud:") {
                    Workload::CloudFile(p.into())
                } else if let Some(p) = v.strip_prefix("triplets:") {
                    Workload::TripletFile(p.into())
                } else if v == "random_triplets" {
                    Workload::RandomTriplets { count: 1_000_000, points, seed }
                } else {
                    Workload::Cloud { kind: v.parse()?, points, seed }
                };
            }
            "points" => match &mut self.workload {
                Workload::Cloud { points, .. } | Workload::RandomTriplets { points, .. } => *points = parse(key, v)?,
                _ => return Err(Error::Config("points only applies to generated workloads".into())),
            },
            "triplets" => match &mut self.workload {
                Workload::RandomTriplets { count, .. } => *count = parse(key, v)?,
                _ => return Err(Error::Config("triplets only applies to workload=random_triplets".into())),
            },
            "seed" => match &mut self.workload {
                Workload::Cloud { seed, .. } | Workload::RandomTriplets { seed, .. } => *seed = parse(key, v)?,
                _ => return Err(Error::Config("seed only applies to generated workloads".into())),
            },
            "extent" => self.gen.extent = parse(key, v)?,
            "clusters" => self.gen.clusters = parse(key, v)?,
            "sigma" => self.gen.sigma = parse(key, v)?,
            "voxel_size" => self.gen.voxel_size = parse(key, v)?,
            "radius" => self.radius = parse(key, v)?,
            "t" => self.resolution = parse(key, v)?,
            "G" => self.groups = parse(key, v)?,
            "C_in" => self.c_in = parse(key, v)?,
            "C_out" => self.c_out = parse(key, v)?,
            "kernels" => self.kernels = parse_list(key, v)?,
            "executors" => self.executors = parse_list(key, v)?,
            "sort_axes" => self.sort_axes = parse_list(key, v)?,
            "L" => self.group_lens = parse_list(key, v)?,
            "tiles" => {
                self.tiles = v
                    .split(',')
                    .map(|t| {
                        let (o, i) = t.split_once('x').ok_or_else(|| Error::Config(format!("tiles: {t:?} is not BxB")))?;
                        Ok((parse(key, o)?, parse(key, i)?))
                    })
                    .collect::<Result<_>>()?
            }
            "workers" => self.workers = parse_list(key, v)?,
            "deterministic" => self.deterministic = parse_bool(key, v)?,
            "precision" => self.precision = parse(key, v)?,
            "repetitions" => self.repetitions = parse(key, v)?,
            "data_seed" => self.data_seed = parse(key, v)?,
            "output" => self.output = Some(v.into()),
            "verify_seeds" => self.verify_seeds = parse(key, v)?,
            "verify_points" => self.verify_points = parse(key, v)?,
            "inject_fault" => self.inject_fault = parse_bool(key, v)?,
            other => return Err(Error::Config(format!("unknown option {other:?}"))),
        }
        Ok(())
    }

    fn workload_size_seed(&self) -> (usize, u64) {
        match self.workload {
            Workload::Cloud { points, seed, .. } | Workload::RandomTriplets { points, seed, .. } => (points, seed),
            _ => (4096, 1),
        }
    }

    /// Applies `key=value` lines; `#` starts a comment.
    pub fn apply_config_str(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key=value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_config_file(&mut self, path: &Path) -> Result<()> {
        self.apply_config_str(&std::fs::read_to_string(path)?)
    }

    /// Reads the two environment overrides through `lookup`.
    pub fn apply_env_with(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(v) = lookup(ENV_WORKERS) {
            self.workers = vec![parse(ENV_WORKERS, &v)?];
        }
        if let Some(v) = lookup(ENV_DETERMINISTIC) {
            self.deterministic = parse_bool(ENV_DETERMINISTIC, &v)?;
        }
        Ok(())
    }

    pub fn apply_env(&mut self) -> Result<()> {
        self.apply_env_with(|k| std::env::var(k).ok())
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 3 {
            return Err(Error::Config(format!("repetitions must be >= 3, got {}", self.repetitions)));
        }
        if self.groups == 0 || !self.c_in.is_multiple_of(self.groups) || !self.c_out.is_multiple_of(self.groups) || self.c_in == 0 || self.c_out == 0 {
            return Err(Error::Config(format!(
                "C_in={} and C_out={} must be positive multiples of G={}",
                self.c_in, self.c_out, self.groups
            )));
        }
        for list_empty in [
            self.kernels.is_empty(),
            self.executors.is_empty(),
            self.sort_axes.is_empty(),
            self.group_lens.is_empty(),
            self.tiles.is_empty(),
            self.workers.is_empty(),
        ] {
            if list_empty {
                return Err(Error::Config("every sweep list needs at least one entry".into()));
            }
        }
        for &w in &self.workers {
            for &l in &self.group_lens {
                for &(bo, bi) in &self.tiles {
                    ExecConfig { group_len: l, block_out: bo, block_in: bi, workers: w, ..ExecConfig::default() }.validate()?;
                }
            }
        }
        if self.verify_points == 0 {
            return Err(Error::Config("verify_points must be >= 1".into()));
        }
        Ok(())
    }

    fn geometry(&self) -> ConvGeometry {
        ConvGeometry::native(self.radius, self.resolution)
    }

    /// Triplets of the configured workload, in builder order.
    pub fn load_triplets(&self) -> Result<TripletList> {
        let kernels = self.resolution.pow(3);
        match &self.workload {
            Workload::Cloud { kind, points, seed } => {
                let c = generate(*kind, *points, *seed, &self.gen)?;
                build_triplets_native(&c, &c, &self.geometry())
            }
            Workload::CloudFile(p) => {
                let c = load_cloud(p)?;
                build_triplets_native(&c, &c, &self.geometry())
            }
            Workload::TripletFile(p) => load_triplets(p),
            Workload::RandomTriplets { count, points, seed } => random_triplets(*count, *points, *points, kernels, *seed),
        }
    }
}

fn resolution_of(kernel_volume: usize) -> Result<usize> {
    let t = (kernel_volume as f64).cbrt().round() as usize;
    if t.pow(3) != kernel_volume || t.is_multiple_of(2) {
        return Err(Error::Config(format!("K={kernel_volume} is not an odd cube")));
    }
    Ok(t)
}

fn output_hash<T: Scalar>(values: &[T]) -> u64 {
    fnv1a(values.iter().map(|v| v.to_bits_u64()))
}

struct Run {
    report: ExecReport,
    nanos: u64,
    hash: u64,
}

struct BenchData<T> {
    w: WeightTensor<T>,
    f_in: FeatureTensor<T>,
    g_out: FeatureTensor<T>,
}

fn run_once<T: Scalar>(kernel: BenchKernel, d: &BenchData<T>, t: &TripletList, cfg: &ExecConfig) -> Result<Run> {
    let start = Instant::now();
    let (values, report) = match kernel {
        BenchKernel::Mvmr => mvmr_report(&d.w, &d.f_in, t, t.n_out, cfg).map(|(f, r)| (f.into_values(), r))?,
        BenchKernel::MvmrTransposed => {
            mvmr_transposed_report(&d.w, &d.g_out, t, t.n_in, cfg).map(|(f, r)| (f.into_values(), r))?
        }
        BenchKernel::Vvor => vvor_report(&d.g_out, &d.f_in, t, t.kernel_volume, cfg).map(|(g, r)| (g.values().to_vec(), r))?,
    };
    let nanos = start.elapsed().as_nanos() as u64;
    Ok(Run { report, nanos, hash: output_hash(&values) })
}

fn median(mut v: Vec<u64>) -> u64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2
    }
}

fn bench_typed<T: Scalar>(spec: &BenchSpec, raw: &TripletList) -> Result<Vec<CounterRow>> {
    let t = resolution_of(raw.kernel_volume)?;
    let (g, cg, mg) = (spec.groups, spec.c_in / spec.groups, spec.c_out / spec.groups);
    let data = BenchData {
        w: make_weights::<T>(t, g, cg, mg, spec.data_seed)?,
        f_in: FeatureTensor::random(raw.n_in, g, cg, spec.data_seed.wrapping_add(1)),
        g_out: FeatureTensor::random(raw.n_out, g, mg, spec.data_seed.wrapping_add(2)),
    };
    let n = raw.len() as u64;
    let pred_naive = g as u64 * predict_access_naive(n, cg as u64, mg as u64);
    let mut rows = Vec::new();
    for &axis in &spec.sort_axes {
        let sorted = sort_triplets(raw, axis);
        for &kernel in &spec.kernels {
            for &executor in &spec.executors {
                // the naive executor ignores L and the tile shape: one row set per axis
                let shapes: Vec<(usize, usize, usize)> = match executor {
                    Executor::Naive => vec![(1, mg, cg)],
                    Executor::Grouped => spec
                        .group_lens
                        .iter()
                        .flat_map(|&l| spec.tiles.iter().map(move |&(bo, bi)| (l, bo, bi)))
                        .collect(),
                };
                for (l, bo, bi) in shapes {
                    for &workers in &spec.workers {
                        let cfg = ExecConfig {
                            group_len: l,
                            block_out: bo,
                            block_in: bi,
                            executor,
                            deterministic: spec.deterministic,
                            workers,
                        };
                        let row = |rep: String, c, ns, aux: usize, hash| CounterRow {
                            executor: executor.to_string(),
                            sort_axis: axis.to_string(),
                            group_len: l,
                            block_out: bo,
                            block_in: bi,
                            counters: c,
                            wall_time_ns: ns,
                            kernel: kernel.to_string(),
                            workers,
                            deterministic: spec.deterministic,
                            precision: T::NAME.to_string(),
                            n_triplets: raw.len(),
                            c_in: spec.c_in,
                            c_out: spec.c_out,
                            kernel_volume: raw.kernel_volume,
                            groups: g,
                            repetition: rep,
                            aux_bytes: (aux * std::mem::size_of::<T>()) as u64,
                            pred_naive,
                            pred_grouped: g as u64 * predict_access_grouped(n, l as u64, cg as u64, mg as u64),
                            output_fnv: hash,
                        };
                        let mut times = Vec::with_capacity(spec.repetitions);
                        let mut first: Option<Run> = None;
                        for rep in 0..spec.repetitions {
                            let r = run_once(kernel, &data, &sorted, &cfg)?;
                            rows.push(row(rep.to_string(), r.report.counters, Some(r.nanos), r.report.aux_scalars, r.hash));
                            times.push(r.nanos);
                            first.get_or_insert(r);
                        }
                        let f = first.expect("repetitions >= 3");
                        rows.push(row(
                            "median".into(),
                            f.report.counters,
                            Some(median(times)),
                            f.report.aux_scalars,
                            f.hash,
                        ));
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Runs the sweep and returns every row, repetitions first then the
/// median row of each configuration.
pub fn run_bench(spec: &BenchSpec) -> Result<Vec<CounterRow>> {
    spec.validate()?;
    let raw = spec.load_triplets()?;
    match spec.precision {
        Precision::F32 => bench_typed::<f32>(spec, &raw),
        Precision::F64 => bench_typed::<f64>(spec, &raw),
    }
}

/// [`run_bench`], written as CSV to `spec.output` or stdout.
pub fn cmd_bench(spec: &BenchSpec) -> Result<Vec<CounterRow>> {
    spec.validate()?;
    // open first so an unwritable path fails before the sweep runs
    let sink: Box<dyn Write> = match &spec.output {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    };
    let rows = run_bench(spec)?;
    write_counter_csv(sink, &rows)?;
    Ok(rows)
}

pub fn cmd_generate(kind: CloudKind, n: usize, seed: u64, out_path: &Path, params: &GenParams) -> Result<()> {
    save_cloud(out_path, &generate(kind, n, seed, params)?)
}

/// Builds the workload's triplets, sorts them (by `axis`, or by the
/// heuristic when `None`) and writes a TRP1 file.
pub fn cmd_triplets_dump(spec: &BenchSpec, axis: Option<SortAxis>, out_path: &Path) -> Result<TripletList> {
    let raw = spec.load_triplets()?;
    let sorted = sort_triplets(&raw, axis.unwrap_or_else(|| choose_sort_axis(&raw)));
    save_triplets(out_path, &sorted)?;
    Ok(sorted)
}

/// Benchmarks a TRP1 file with the rest of `spec`.
pub fn cmd_triplets_replay(spec: &BenchSpec, path: &Path) -> Result<Vec<CounterRow>> {
    let mut s = spec.clone();
    s.workload = Workload::TripletFile(path.to_path_buf());
    cmd_bench(&s)
}

/// Outcome of one verification check.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CaseResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub cases: Vec<CaseResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> usize {
        self.cases.iter().filter(|c| !c.passed).count()
    }

    pub fn exit_code(&self) -> i32 {
        i32::from(!self.passed())
    }

    fn check(&mut self, name: String, err: f64, tol: f64) {
        self.cases.push(CaseResult { name, passed: err <= tol, detail: format!("max rel err {err:.3e} (tol {tol:.0e})") });
    }

    fn record(&mut self, name: String, outcome: Result<String, String>) {
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        self.cases.push(CaseResult { name, passed, detail });
    }
}

/// Tolerance for engine-vs-oracle comparisons.
pub const TOL_F64: f64 = 1e-12;
pub const TOL_F32: f64 = 1e-5;
pub const TOL_GRADCHECK: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-6;

fn corrupt(t: &TripletList) -> TripletList {
    let mut bad = t.clone();
    if !bad.is_empty() {
        bad.i.push(bad.i[0]);
        bad.j.push(bad.j[0]);
        bad.k.push(bad.k[0]);
    }
    bad
}

/// Oracle equivalence and gradient checks over `verify_seeds` seeded
/// instances. Failures are reported in the result, never panicked on.
pub fn cmd_verify(spec: &BenchSpec) -> Result<VerifyReport> {
    spec.validate()?;
    let mut report = VerifyReport::default();
    let (g, cg, mg) = (spec.groups, spec.c_in / spec.groups, spec.c_out / spec.groups);
    let workers = spec.workers[0];
    for s in 0..spec.verify_seeds as u64 {
        let seed = spec.data_seed.wrapping_add(s);
        let cloud = generate(CloudKind::UniformCube, spec.verify_points, seed, &spec.gen)?;
        let geometry = spec.geometry();

        let fast = radius_search(&cloud, &cloud, spec.radius)?;
        let slow = brute_radius_oracle(&cloud, &cloud, spec.radius);
        report.record(
            format!("seed {seed} radius_search"),
            if fast == slow { Ok(format!("{} pairs", fast.len())) } else { Err("differs from all-pairs search".into()) },
        );

        let clean = build_triplets_native(&cloud, &cloud, &geometry)?;
        let triplets = sort_triplets(&clean, choose_sort_axis(&clean));
        let used = if spec.inject_fault { corrupt(&triplets) } else { triplets.clone() };
        let n = cloud.len();
        let w = make_weights::<f64>(spec.resolution, g, cg, mg, seed)?;
        let f_in = FeatureTensor::<f64>::random(n, g, cg, seed ^ 0x5eed);
        let g_out = FeatureTensor::<f64>::random(n, g, mg, seed ^ 0xbeef);
        let oracle = dense_conv_oracle(&w, &f_in, &triplets, n, Some(&g_out))?;
        let (oracle_gi, oracle_gw) = (oracle.grad_in.unwrap(), oracle.grad_w.unwrap());

        for executor in [Executor::Naive, Executor::Grouped] {
            let cfg = ExecConfig { executor, deterministic: spec.deterministic, workers, ..ExecConfig::default() };
            let tag = format!("seed {seed} {executor}");
            let (out, _) = mvmr_report(&w, &f_in, &used, n, &cfg)?;
            report.check(format!("{tag} forward f64"), max_rel_error(out.values(), &oracle.f_out), TOL_F64);
            let (out32, _) = mvmr_report(&w.map(|x| x as f32), &f_in.map(|x| x as f32), &used, n, &cfg)?;
            report.check(format!("{tag} forward f32"), max_rel_error(out32.to_f64().values(), &oracle.f_out), TOL_F32);
            let (gi, _) = mvmr_transposed_report(&w, &g_out, &used, n, &cfg)?;
            report.check(format!("{tag} input gradient"), max_rel_error(gi.values(), &oracle_gi), TOL_F64);
            let (gw, _) = vvor_report(&g_out, &f_in, &used, w.kernel_volume(), &cfg)?;
            report.check(format!("{tag} weight gradient"), max_rel_error(gw.values(), &oracle_gw), TOL_F64);
        }

        report.cases.push(gradcheck_case(spec, seed)?);
    }
    Ok(report)
}

/// Central differences on a small instance through [`PointConvOp`].
fn gradcheck_case(spec: &BenchSpec, seed: u64) -> Result<CaseResult> {
    let g = spec.groups;
    let cloud = generate(CloudKind::UniformCube, 24, seed, &spec.gen)?;
    let w = make_weights::<f64>(spec.resolution, g, 2, 3, seed)?;
    let f_in = FeatureTensor::<f64>::random(cloud.len(), g, 2, seed ^ 0xf00d);
    let g_out = FeatureTensor::<f64>::random(cloud.len(), g, 3, seed ^ 0xcafe);
    let cfg = ExecConfig { deterministic: spec.deterministic, workers: spec.workers[0], ..ExecConfig::default() };
    let mut op = PointConvOp::new(spec.geometry(), w.clone(), cfg)?;
    op.forward(&cloud, &cloud, &f_in)?;
    let mut triplets = op.triplets().expect("forward ran").clone();
    let (gi, gw) = op.backward(&g_out)?;
    if spec.inject_fault {
        triplets = corrupt(&triplets);
    }
    let (fd_in, fd_w) = finite_difference_gradients(&w, &f_in, &triplets, &g_out, FD_STEP)?;
    let err = max_rel_error(gi.values(), &fd_in).max(max_rel_error(gw.values(), &fd_w));
    Ok(CaseResult {
        name: format!("seed {seed} gradcheck"),
        passed: err <= TOL_GRADCHECK,
        detail: format!("{} triplets, max rel err {err:.3e} (tol {TOL_GRADCHECK:.0e})", triplets.len()),
    })
}
