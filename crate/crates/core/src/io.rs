//! File formats: snapshot and hyper-slice binaries, CSV tables and JSON
//! summaries, all stamped with the tool version and the config hash.
//!
//! Binary files start with a text header of `key = value` lines opened by a
//! magic line `<MAGIC> <schema version>` and closed by `end_header`. The
//! payload that follows is little-endian f64 in row-major order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::evolution::WaveState;
use crate::fields::{Columnar, Grid1D, ScalarField3, TransverseGrid};
use crate::hyperbolic::{HyperField, HyperGrid, HyperSlice};
use crate::VERSION;

pub const SNAPSHOT_MAGIC: &str = "KINKLAB-SNAPSHOT";
pub const HYPER_SLICE_MAGIC: &str = "KINKLAB-HYPERSLICE";
/// Schema version of every file written by this module.
pub const SCHEMA_VERSION: u32 = 1;

/// SHA-256 of a text, hex encoded; used as the provenance hash.
pub fn hash_text(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_header(out: &mut impl Write, magic: &str, entries: &[(&str, String)]) -> Result<()> {
    writeln!(out, "{magic} {SCHEMA_VERSION}")?;
    for (k, v) in entries {
        writeln!(out, "{k} = {v}")?;
    }
    writeln!(out, "end_header")?;
    Ok(())
}

struct Header {
    entries: Vec<(String, String)>,
}

impl Header {
    fn read(r: &mut impl BufRead, magic: &str) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        let mut it = line.split_whitespace();
        if it.next() != Some(magic) {
            return Err(LabError::Format(format!("missing magic `{magic}`")));
        }
        let ver: u32 = it
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| LabError::Format("missing schema version".into()))?;
        if ver != SCHEMA_VERSION {
            return Err(LabError::Format(format!(
                "schema version {ver} does not match supported version {SCHEMA_VERSION}"
            )));
        }
        let mut entries = Vec::new();
        loop {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(LabError::Format("header not terminated".into()));
            }
            let l = line.trim_end();
            if l == "end_header" {
                break;
            }
            let (k, v) = l
                .split_once(" = ")
                .ok_or_else(|| LabError::Format(format!("bad header line `{l}`")))?;
            entries.push((k.to_string(), v.to_string()));
        }
        Ok(Self { entries })
    }

    fn str(&self, key: &str) -> Result<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| LabError::Format(format!("header lacks `{key}`")))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.str(key)?;
        v.parse()
            .map_err(|_| LabError::Format(format!("header `{key}` has bad value `{v}`")))
    }
}

fn write_values(out: &mut impl Write, v: &[f64]) -> Result<()> {
    for x in v {
        out.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_values(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)
        .map_err(|_| LabError::Format(format!("payload shorter than {n} values")))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

/// Snapshot read back from disk.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub state: WaveState,
    pub gx: Grid1D,
    pub gy: TransverseGrid,
    pub config_hash: String,
}

/// Writes (w, w_t) at time t: header, then w and w_t with x fastest.
pub fn write_snapshot(path: &Path, s: &WaveState, gx: &Grid1D, gy: &TransverseGrid, hash: &str) -> Result<()> {
    s.w.check(gx, gy)?;
    let mut out = BufWriter::new(File::create(path)?);
    write_header(
        &mut out,
        SNAPSHOT_MAGIC,
        &[
            ("version", VERSION.to_string()),
            ("config_hash", hash.to_string()),
            ("n_x", gx.n_x().to_string()),
            ("n_y", gy.n_y().to_string()),
            ("x_max", fmt_f64(gx.x_max())),
            ("side", fmt_f64(gy.side())),
            ("dx", fmt_f64(gx.dx())),
            ("dy", fmt_f64(gy.dy())),
            ("t", fmt_f64(s.t)),
            ("fields", "w,w_t".into()),
        ],
    )?;
    write_values(&mut out, s.w.values())?;
    write_values(&mut out, s.w_t.values())?;
    out.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let mut r = BufReader::new(File::open(path)?);
    let h = Header::read(&mut r, SNAPSHOT_MAGIC)?;
    let gx = Grid1D::new(h.get("x_max")?, h.get("n_x")?)?;
    let gy = TransverseGrid::new(h.get("side")?, h.get("n_y")?)?;
    let n = gx.n_x() * gy.n_y() * gy.n_y();
    let w = ScalarField3::from_vec(gx.n_x(), gy.n_y(), read_values(&mut r, n)?)?;
    let w_t = ScalarField3::from_vec(gx.n_x(), gy.n_y(), read_values(&mut r, n)?)?;
    Ok(Snapshot {
        state: WaveState { t: h.get("t")?, w, w_t },
        gx,
        gy,
        config_hash: h.str("config_hash")?.to_string(),
    })
}

/// File name of the hyper slice centred at T.
pub fn hyper_slice_name(t_center: f64) -> String {
    format!("hyper_T{t_center:08.3}.bin")
}

/// Writes a hyper slice: header, then Ψ (x fastest), 𝓐 and Σ, each laid
/// out as in [`HyperField`].
pub fn write_hyper_slice(path: &Path, s: &HyperSlice, hash: &str) -> Result<()> {
    let g = &s.psi.grid;
    let mut out = BufWriter::new(File::create(path)?);
    write_header(
        &mut out,
        HYPER_SLICE_MAGIC,
        &[
            ("version", VERSION.to_string()),
            ("config_hash", hash.to_string()),
            ("t_center", fmt_f64(s.t_center)),
            ("t0", fmt_f64(g.t0)),
            ("dT", fmt_f64(g.dt)),
            ("n_T", g.n_t.to_string()),
            ("r0", fmt_f64(g.r0)),
            ("dR", fmt_f64(g.dr)),
            ("n_R", g.n_r.to_string()),
            ("n_theta", g.n_theta.to_string()),
            ("K", fmt_f64(g.k)),
            ("x_max", fmt_f64(s.x_grid.x_max())),
            ("n_x", s.x_grid.n_x().to_string()),
            ("truncated", s.truncated.to_string()),
            ("fields", "Psi,A,Sigma".into()),
        ],
    )?;
    write_values(&mut out, &s.psi.data)?;
    write_values(&mut out, &s.cal_a.data)?;
    write_values(&mut out, &s.sigma.data)?;
    out.flush()?;
    Ok(())
}

/// Reads a hyper slice and the config hash it was written with.
pub fn read_hyper_slice(path: &Path) -> Result<(HyperSlice, String)> {
    let mut r = BufReader::new(File::open(path)?);
    let h = Header::read(&mut r, HYPER_SLICE_MAGIC)?;
    let grid = HyperGrid::new(
        h.get("t0")?,
        h.get("dT")?,
        h.get("n_T")?,
        h.get("r0")?,
        h.get("dR")?,
        h.get("n_R")?,
        h.get("n_theta")?,
        h.get("K")?,
    )?;
    let x_grid = Grid1D::new(h.get("x_max")?, h.get("n_x")?)?;
    let n = grid.len();
    let field = |data: Vec<f64>, inner: usize| HyperField {
        grid: grid.clone(),
        inner,
        data,
    };
    let psi = field(read_values(&mut r, n * x_grid.n_x())?, x_grid.n_x());
    let cal_a = field(read_values(&mut r, n)?, 1);
    let sigma = field(read_values(&mut r, n)?, 1);
    Ok((
        HyperSlice {
            t_center: h.get("t_center")?,
            psi,
            cal_a,
            sigma,
            x_grid,
            truncated: h.get("truncated")?,
        },
        h.str("config_hash")?.to_string(),
    ))
}

/// First line of every CSV file.
pub fn provenance_line(hash: &str) -> String {
    format!("# kinklab {VERSION} schema={SCHEMA_VERSION} config_hash={hash}")
}

/// Writes a CSV table with a provenance comment line and a header row.
pub fn write_csv(path: &Path, hash: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    write_csv_to(&mut f, hash, columns, rows)?;
    f.flush()?;
    Ok(())
}

pub fn write_csv_to(out: &mut impl Write, hash: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    writeln!(out, "{}", provenance_line(hash))?;
    let mut w = csv::Writer::from_writer(out);
    let fmt_err = |e: csv::Error| LabError::Format(e.to_string());
    w.write_record(columns).map_err(fmt_err)?;
    for r in rows {
        if r.len() != columns.len() {
            return Err(LabError::Dimension(format!(
                "row of {} values for {} columns",
                r.len(),
                columns.len()
            )));
        }
        w.write_record(r.iter().map(|x| fmt_f64(*x))).map_err(fmt_err)?;
    }
    w.flush()?;
    Ok(())
}

/// CSV table read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub config_hash: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| LabError::Format(format!("no column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let mut r = BufReader::new(File::open(path)?);
    let mut first = String::new();
    r.read_line(&mut first)?;
    let prov = first
        .trim_end()
        .strip_prefix("# kinklab ")
        .ok_or_else(|| LabError::Format("missing provenance line".into()))?;
    let mut hash = None;
    let mut schema = None;
    for tok in prov.split_whitespace() {
        if let Some(v) = tok.strip_prefix("config_hash=") {
            hash = Some(v.to_string());
        }
        if let Some(v) = tok.strip_prefix("schema=") {
            schema = v.parse::<u32>().ok();
        }
    }
    if schema != Some(SCHEMA_VERSION) {
        return Err(LabError::Format(format!(
            "schema version {schema:?} does not match supported version {SCHEMA_VERSION}"
        )));
    }
    let hash = hash.ok_or_else(|| LabError::Format("provenance line lacks config_hash".into()))?;
    let mut rd = csv::Reader::from_reader(r);
    let fmt_err = |e: csv::Error| LabError::Format(e.to_string());
    let columns: Vec<String> = rd.headers().map_err(fmt_err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(fmt_err)?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| LabError::Format(format!("bad number `{s}`"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(CsvTable {
        config_hash: hash,
        columns,
        rows,
    })
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    kinklab_version: &'a str,
    schema_version: u32,
    config_hash: &'a str,
    data: &'a T,
}

/// JSON summary wrapped with version and config hash.
pub fn json_summary<T: Serialize>(hash: &str, data: &T) -> Result<String> {
    serde_json::to_string_pretty(&Envelope {
        kinklab_version: VERSION,
        schema_version: SCHEMA_VERSION,
        config_hash: hash,
        data,
    })
    .map_err(|e| LabError::Format(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, hash: &str, data: &T) -> Result<()> {
    let mut f = File::create(path)?;
    writeln!(f, "{}", json_summary(hash, data)?)?;
    Ok(())
}
