//! File formats: ASCII XYZ and NPC1 binary point clouds, TRP1 triplet
//! files, and the CSV counter rows written by the benchmark harness.
//!
//! All binary fields are little-endian.
//!
//! NPC1:
//!
//! | offset          | size      | field                          |
//! |-----------------|-----------|--------------------------------|
//! | 0               | 4         | magic `b"NPC1"`                |
//! | 4               | 4         | `u32` point count `N`          |
//! | 8               | 4         | `u32` batch count `B`          |
//! | 12              | 4         | `u32` reserved, written as 0   |
//! | 16              | 4·(B+1)   | `u32` batch offsets            |
//! | 20+4B           | 24·N      | `f64` x, y, z per point        |
//!
//! TRP1:
//!
//! | offset | size  | field                                     |
//! |--------|-------|-------------------------------------------|
//! | 0      | 4     | magic `b"TRP1"`                           |
//! | 4      | 4     | `u32` triplet count `T`                   |
//! | 8      | 4     | `u32` N_out                               |
//! | 12     | 4     | `u32` N_in                                |
//! | 16     | 4     | `u32` kernel volume K                     |
//! | 20     | 4     | `u32` sort axis (0 none, 1 i, 2 j, 3 k)   |
//! | 24     | 4·T   | `u32` i array                             |
//! | 24+4T  | 4·T   | `u32` j array                             |
//! | 24+8T  | 4·T   | `u32` k array                             |

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::exec::AccessCounters;
use crate::triplets::{SortAxis, TripletList};

pub const NPC1_MAGIC: &[u8; 4] = b"NPC1";
pub const TRP1_MAGIC: &[u8; 4] = b"TRP1";

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u32s(r: &mut impl Read, n: usize) -> Result<Vec<u32>> {
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)?;
    Ok(bytes.chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

fn read_magic(r: &mut impl Read, want: &[u8; 4]) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != want {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(want)
        )));
    }
    Ok(())
}

fn expect_eof(r: &mut impl Read) -> Result<()> {
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    Ok(())
}

pub fn write_npc1(w: &mut impl Write, cloud: &PointCloud) -> Result<()> {
    w.write_all(NPC1_MAGIC)?;
    w.write_all(&to_u32(cloud.len(), "point count")?.to_le_bytes())?;
    w.write_all(&to_u32(cloud.num_batches(), "batch count")?.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for &o in cloud.batch_offsets() {
        w.write_all(&to_u32(o, "offset")?.to_le_bytes())?;
    }
    for p in cloud.positions() {
        for c in p {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_npc1(r: &mut impl Read) -> Result<PointCloud> {
    read_magic(r, NPC1_MAGIC)?;
    let n = read_u32(r)? as usize;
    let b = read_u32(r)? as usize;
    let _reserved = read_u32(r)?;
    let offsets: Vec<usize> = read_u32s(r, b + 1)?.into_iter().map(|o| o as usize).collect();
    let mut bytes = vec![0u8; n * 24];
    r.read_exact(&mut bytes)?;
    expect_eof(r)?;
    let positions = bytes
        .chunks_exact(24)
        .map(|p| {
            let f = |o: usize| f64::from_le_bytes(p[o..o + 8].try_into().unwrap());
            [f(0), f(8), f(16)]
        })
        .collect();
    PointCloud::new(positions, offsets).map_err(|e| Error::Format(format!("invalid NPC1 payload: {e}")))
}

/// One `x y z` line per point, shortest round-trip decimal form. Batch
/// boundaries are not stored.
pub fn write_xyz(w: &mut impl Write, cloud: &PointCloud) -> Result<()> {
    for p in cloud.positions() {
        writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
    }
    Ok(())
}

/// Reads a single-batch cloud. Blank lines and lines starting with `#` are
/// skipped; columns past the third are ignored.
pub fn read_xyz(r: impl BufRead) -> Result<PointCloud> {
    let mut positions = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let s = line.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let mut p = [0.0; 3];
        let mut fields = s.split_whitespace();
        for c in p.iter_mut() {
            let tok = fields.next().ok_or_else(|| Error::Format(format!("line {}: fewer than 3 columns", n + 1)))?;
            *c = tok.parse().map_err(|_| Error::Format(format!("line {}: bad number {tok:?}", n + 1)))?;
        }
        positions.push(p);
    }
    PointCloud::from_positions(positions)
}

pub fn write_triplets(w: &mut impl Write, t: &TripletList) -> Result<()> {
    w.write_all(TRP1_MAGIC)?;
    for v in [t.len(), t.n_out, t.n_in, t.kernel_volume] {
        w.write_all(&to_u32(v, "header field")?.to_le_bytes())?;
    }
    w.write_all(&t.sort_axis.code().to_le_bytes())?;
    for arr in [&t.i, &t.j, &t.k] {
        for v in arr.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_triplets(r: &mut impl Read) -> Result<TripletList> {
    read_magic(r, TRP1_MAGIC)?;
    let n = read_u32(r)? as usize;
    let n_out = read_u32(r)? as usize;
    let n_in = read_u32(r)? as usize;
    let kernels = read_u32(r)? as usize;
    let code = read_u32(r)?;
    let axis = SortAxis::from_code(code).ok_or_else(|| Error::Format(format!("unknown sort axis code {code}")))?;
    let i = read_u32s(r, n)?;
    let j = read_u32s(r, n)?;
    let k = read_u32s(r, n)?;
    expect_eof(r)?;
    let mut list = TripletList::new(i, j, k, n_out, n_in, kernels)?;
    if !list.is_sorted_by(axis) {
        return Err(Error::Format(format!("header claims sort by {axis} but data is not")));
    }
    list.sort_axis = axis;
    Ok(list)
}

/// Reads a cloud, picking the format from the extension (`.xyz` is ASCII,
/// anything else NPC1).
pub fn load_cloud(path: &Path) -> Result<PointCloud> {
    let f = File::open(path)?;
    if is_xyz(path) {
        read_xyz(BufReader::new(f))
    } else {
        read_npc1(&mut BufReader::new(f))
    }
}

pub fn save_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    if is_xyz(path) {
        write_xyz(&mut w, cloud)?;
    } else {
        write_npc1(&mut w, cloud)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_triplets(path: &Path) -> Result<TripletList> {
    read_triplets(&mut BufReader::new(File::open(path)?))
}

pub fn save_triplets(path: &Path, t: &TripletList) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_triplets(&mut w, t)?;
    w.flush()?;
    Ok(())
}

fn is_xyz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xyz"))
}

/// One benchmark measurement. The first nine columns are the counter
/// report; the rest echo the full configuration so each row stands alone.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterRow {
    pub executor: String,
    pub sort_axis: String,
    pub group_len: usize,
    pub block_out: usize,
    pub block_in: usize,
    pub counters: AccessCounters,
    /// `None` renders as an empty field.
    pub wall_time_ns: Option<u64>,
    pub kernel: String,
    pub workers: usize,
    pub deterministic: bool,
    pub precision: String,
    pub n_triplets: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel_volume: usize,
    pub groups: usize,
    /// Repetition index, or `"median"` for the summary row.
    pub repetition: String,
    pub aux_bytes: u64,
    pub pred_naive: u64,
    pub pred_grouped: u64,
    /// FNV-1a of the output bytes; equal across rows iff outputs are identical.
    pub output_fnv: u64,
}

impl CounterRow {
    pub const HEADER: [&'static str; 24] = [
        "executor",
        "sort_axis",
        "L",
        "B_out",
        "B_in",
        "w_reads",
        "fin_reads",
        "fout_atomic_writes",
        "wall_time_ns",
        "kernel",
        "workers",
        "deterministic",
        "precision",
        "n_triplets",
        "C_in",
        "C_out",
        "K",
        "G",
        "repetition",
        "gout_reads",
        "aux_bytes",
        "pred_naive",
        "pred_grouped",
        "output_fnv",
    ];

    pub fn fields(&self) -> Vec<String> {
        let c = &self.counters;
        vec![
            self.executor.clone(),
            self.sort_axis.clone(),
            self.group_len.to_string(),
            self.block_out.to_string(),
            self.block_in.to_string(),
            c.w_reads.to_string(),
            c.fin_reads.to_string(),
            c.fout_atomic_writes.to_string(),
            self.wall_time_ns.map(|t| t.to_string()).unwrap_or_default(),
            self.kernel.clone(),
            self.workers.to_string(),
            self.deterministic.to_string(),
            self.precision.clone(),
            self.n_triplets.to_string(),
            self.c_in.to_string(),
            self.c_out.to_string(),
            self.kernel_volume.to_string(),
            self.groups.to_string(),
            self.repetition.clone(),
            c.gout_reads.to_string(),
            self.aux_bytes.to_string(),
            self.pred_naive.to_string(),
            self.pred_grouped.to_string(),
            format!("{:016x}", self.output_fnv),
        ]
    }
}

/// Writes the header and all rows.
pub fn write_counter_csv(w: impl Write, rows: &[CounterRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CounterRow::HEADER).map_err(csv_err)?;
    for r in rows {
        out.write_record(r.fields()).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}
