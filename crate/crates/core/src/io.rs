//! Output formats: CSV tables, PDIF binary field snapshots and the
//! eigenvalue cache.
//!
//! PDIF layout (all integers little-endian):
//!
//! ```text
//!   b"PDIF" | version: u32 | ndim: u32 | dims: ndim × u64 | data: Π dims × f64
//! ```
//!
//! Data are row-major; a 2D field on an `nx × ny` grid has dims `[ny, nx]`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{DiscreteField, DiscreteOperators, GridSpec};

pub const PDIF_MAGIC: &[u8; 4] = b"PDIF";
pub const PDIF_VERSION: u32 = 1;

/// Fixed 17-significant-digit rendering used in all text outputs.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Table of floats with named columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.headers.len() {
            return Err(Error::Format(format!(
                "row has {} entries, table has {} columns",
                row.len(),
                self.headers.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| fmt_f64(*x)))?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().from_path(path)?;
        let headers = r.headers()?.iter().map(str::to_owned).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Format(format!("{s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self { headers, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn encode_pdif(dims: &[usize], data: &[f64]) -> Result<Vec<u8>> {
    let expected: usize = dims.iter().product();
    if expected != data.len() {
        return Err(Error::Format(format!("dims {dims:?} need {expected} values, got {}", data.len())));
    }
    let mut out = Vec::with_capacity(12 + 8 * dims.len() + 8 * data.len());
    out.extend_from_slice(PDIF_MAGIC);
    out.extend_from_slice(&PDIF_VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for x in data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_pdif(bytes: &[u8]) -> Result<(Vec<usize>, Vec<f64>)> {
    let bad = |m: &str| Error::Format(format!("PDIF: {m}"));
    let take = |at: usize, n: usize| bytes.get(at..at + n).ok_or_else(|| bad("truncated"));
    if take(0, 4)? != PDIF_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(take(4, 4)?.try_into().unwrap());
    if version != PDIF_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let ndim = u32::from_le_bytes(take(8, 4)?.try_into().unwrap()) as usize;
    let mut at = 12;
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        let d = u64::from_le_bytes(take(at, 8)?.try_into().unwrap());
        dims.push(usize::try_from(d).map_err(|_| bad("dimension too large"))?);
        at += 8;
    }
    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| bad("dimension overflow"))?;
    if bytes.len() - at != 8 * n {
        return Err(bad(&format!("expected {} data bytes, found {}", 8 * n, bytes.len() - at)));
    }
    let data = bytes[at..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((dims, data))
}

fn field_dims(g: &GridSpec) -> Vec<usize> {
    if g.dimension() == 1 {
        vec![g.counts()[0]]
    } else {
        vec![g.counts()[1], g.counts()[0]]
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

/// PDIF bytes and the text header for one field.
pub fn snapshot_bytes(field: &DiscreteField, meta: &[(&str, String)]) -> Result<(Vec<u8>, String)> {
    let g = field.grid();
    let dims = field_dims(g);
    let data = encode_pdif(&dims, field.values())?;
    let mut hdr = String::new();
    hdr.push_str("format = PDIF\n");
    hdr.push_str(&format!("version = {PDIF_VERSION}\n"));
    hdr.push_str("dtype = f64le\norder = row-major\n");
    hdr.push_str(&format!(
        "dims = [{}]\n",
        dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
    ));
    hdr.push_str(&format!("grid = {}\n", g.signature()));
    hdr.push_str(&format!(
        "lengths = [{}]\n",
        g.lengths().iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", ")
    ));
    for (k, v) in meta {
        hdr.push_str(&format!("{k} = {v}\n"));
    }
    Ok((data, hdr))
}

/// Sidecar header path for a snapshot file.
pub fn header_path(path: &Path) -> PathBuf {
    sidecar(path)
}

/// Writes `path` (PDIF) and `path.hdr` (text header with grid and metadata).
pub fn write_snapshot(path: &Path, field: &DiscreteField, meta: &[(&str, String)]) -> Result<()> {
    let (data, hdr) = snapshot_bytes(field, meta)?;
    fs::write(path, data)?;
    fs::write(sidecar(path), hdr)?;
    Ok(())
}

/// Reads a snapshot back onto `grid`.
pub fn read_snapshot(path: &Path, grid: GridSpec) -> Result<DiscreteField> {
    let (dims, data) = decode_pdif(&fs::read(path)?)?;
    if dims != field_dims(&grid) {
        return Err(Error::Format(format!("snapshot dims {dims:?} do not match grid {}", grid.signature())));
    }
    DiscreteField::try_from_vec(grid, data)
}

fn cache_path(dir: &Path, grid: &GridSpec) -> PathBuf {
    let key: String = grid
        .signature()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect();
    dir.join(format!("eigen-{key}.pdif"))
}

/// Stores the sorted eigenvalues of `ops` under a name derived from the grid signature.
pub fn save_eigen_cache(dir: &Path, ops: &DiscreteOperators) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = cache_path(dir, ops.grid());
    let vals = ops.eigenvalues();
    let mut f = fs::File::create(&path)?;
    f.write_all(&encode_pdif(&[vals.len()], &vals)?)?;
    Ok(path)
}

/// Cached eigenvalues for `grid`, if present and well-formed.
pub fn load_eigen_cache(dir: &Path, grid: &GridSpec) -> Result<Option<Vec<f64>>> {
    let path = cache_path(dir, grid);
    if !path.exists() {
        return Ok(None);
    }
    let (dims, data) = decode_pdif(&fs::read(path)?)?;
    if dims != [grid.len()] {
        return Err(Error::Format("eigen cache does not match the grid".into()));
    }
    Ok(Some(data))
}
