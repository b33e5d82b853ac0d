//! File formats: binary matrix dumps, field grids with JSON sidecars,
//! eigenvalue snapshots and plain numeric tables.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use gdyn_core::grid::{FieldGrid, FieldMeta, GridSpec, Window};
use gdyn_core::integrators::TrajectorySnapshot;
use gdyn_core::linalg::ComplexMatrix;
use gdyn_core::C64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Leading bytes of a binary matrix dump.
pub const MAGIC: &[u8; 4] = b"GDYN";
pub const BINARY_VERSION: u8 = 1;

/// Shortest text that parses back to the same `f64` bits (`NaN`, `inf` included).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn parse_f64(s: &str, path: &Path) -> CliResult<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| CliError::format(path, format!("not a number: {s:?}")))
}

fn parse_usize(s: &str, path: &Path) -> CliResult<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| CliError::format(path, format!("not a count: {s:?}")))
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// `GDYN`, version byte, `n` as little-endian `u64`, then `n²` row-major
/// `(re, im)` pairs of little-endian `f64`.
pub fn write_matrix<W: Write>(mut w: W, m: &ComplexMatrix) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[BINARY_VERSION])?;
    w.write_all(&(m.n() as u64).to_le_bytes())?;
    for z in m.as_slice() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> std::io::Result<ComplexMatrix> {
    use std::io::{Error, ErrorKind};
    let mut head = [0u8; 13];
    r.read_exact(&mut head)?;
    if &head[..4] != MAGIC {
        return Err(Error::new(ErrorKind::InvalidData, "missing GDYN magic"));
    }
    if head[4] != BINARY_VERSION {
        return Err(Error::new(
            ErrorKind::InvalidData,
            format!("unsupported version {}", head[4]),
        ));
    }
    let n = u64::from_le_bytes(head[5..13].try_into().expect("eight bytes"));
    let n = usize::try_from(n)
        .ok()
        .filter(|&n| n > 0 && n.checked_mul(n).and_then(|c| c.checked_mul(16)).is_some())
        .ok_or_else(|| Error::new(ErrorKind::InvalidData, "bad dimension"))?;
    let mut buf = vec![0u8; n * n * 16];
    r.read_exact(&mut buf)?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::new(ErrorKind::InvalidData, "trailing bytes"));
    }
    let data = buf
        .chunks_exact(16)
        .map(|c| {
            C64::new(
                f64::from_le_bytes(c[..8].try_into().expect("eight bytes")),
                f64::from_le_bytes(c[8..].try_into().expect("eight bytes")),
            )
        })
        .collect();
    ComplexMatrix::from_row_major(n, data)
        .map_err(|e| Error::new(ErrorKind::InvalidData, e.to_string()))
}

pub fn save_matrix(path: &Path, m: &ComplexMatrix) -> CliResult<()> {
    let mut bytes = Vec::with_capacity(13 + m.n() * m.n() * 16);
    write_matrix(&mut bytes, m).map_err(|e| CliError::io(path, e))?;
    write_atomic(path, &bytes)
}

pub fn load_matrix(path: &Path) -> CliResult<ComplexMatrix> {
    let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_matrix(std::io::BufReader::new(f)).map_err(|e| CliError::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct WindowJson {
    re_min: f64,
    re_max: f64,
    im_min: f64,
    im_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct MetaJson {
    estimator: String,
    n: usize,
    tau: f64,
    samples: u64,
    seed: Option<u64>,
    convention: String,
}

/// Sidecar stored next to a field CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct FieldSidecar {
    format: String,
    window: WindowJson,
    nx: usize,
    ny: usize,
    meta: MetaJson,
    missing: usize,
    #[serde(default)]
    diagnostics: serde_json::Value,
}

const FIELD_FORMAT: &str = "gdyn-field-v1";

/// Path of the JSON sidecar belonging to a CSV file.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| CliError::config(format!("csv encoding failed: {e}"));
    w.write_record(header).map_err(to_err)?;
    for r in rows {
        w.write_record(&r).map_err(to_err)?;
    }
    w.into_inner()
        .map_err(|e| CliError::config(format!("csv encoding failed: {e}")))
}

fn read_csv(path: &Path, header: &[&str]) -> CliResult<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::format(path, e.to_string()))?;
    let got = r
        .headers()
        .map_err(|e| CliError::format(path, e.to_string()))?
        .clone();
    if got.iter().collect::<Vec<_>>() != header {
        return Err(CliError::format(
            path,
            format!("expected header {header:?}, found {got:?}"),
        ));
    }
    r.records()
        .map(|rec| rec.map_err(|e| CliError::format(path, e.to_string())))
        .collect()
}

/// Writes `re,im,value,stderr` rows in grid order plus the JSON sidecar.
pub fn write_field(
    path: &Path,
    field: &FieldGrid,
    diagnostics: serde_json::Value,
) -> CliResult<Vec<PathBuf>> {
    let spec = &field.spec;
    let rows = (0..spec.len()).map(|k| {
        let z = spec.center_of(k);
        vec![
            fmt_f64(z.re),
            fmt_f64(z.im),
            fmt_f64(field.values[k]),
            fmt_f64(field.stderr[k]),
        ]
    });
    write_atomic(path, &csv_bytes(&["re", "im", "value", "stderr"], rows)?)?;
    let w = spec.window;
    let m = &field.meta;
    let side = FieldSidecar {
        format: FIELD_FORMAT.into(),
        window: WindowJson {
            re_min: w.re_min,
            re_max: w.re_max,
            im_min: w.im_min,
            im_max: w.im_max,
        },
        nx: spec.nx,
        ny: spec.ny,
        meta: MetaJson {
            estimator: m.estimator.clone(),
            n: m.n,
            tau: m.tau,
            samples: m.samples,
            seed: m.seed,
            convention: m.convention.clone(),
        },
        missing: field.missing(),
        diagnostics,
    };
    let side_path = sidecar_path(path);
    write_atomic(
        &side_path,
        &serde_json::to_vec_pretty(&side).expect("sidecar serializes"),
    )?;
    Ok(vec![path.to_path_buf(), side_path])
}

/// Reads a field written by [`write_field`], checking the cell centres against the sidecar.
pub fn read_field(path: &Path) -> CliResult<FieldGrid> {
    let side_path = sidecar_path(path);
    let text = fs::read(&side_path).map_err(|e| CliError::io(&side_path, e))?;
    let side: FieldSidecar =
        serde_json::from_slice(&text).map_err(|e| CliError::format(&side_path, e.to_string()))?;
    if side.format != FIELD_FORMAT {
        return Err(CliError::format(
            &side_path,
            format!("unknown format {:?}", side.format),
        ));
    }
    let w = side.window;
    let spec = GridSpec::new(
        Window {
            re_min: w.re_min,
            re_max: w.re_max,
            im_min: w.im_min,
            im_max: w.im_max,
        },
        side.nx,
        side.ny,
    )?;
    let records = read_csv(path, &["re", "im", "value", "stderr"])?;
    if records.len() != spec.len() {
        return Err(CliError::format(
            path,
            format!("expected {} rows, found {}", spec.len(), records.len()),
        ));
    }
    let mut values = Vec::with_capacity(spec.len());
    let mut stderr = Vec::with_capacity(spec.len());
    for (k, rec) in records.iter().enumerate() {
        let z = spec.center_of(k);
        let (re, im) = (parse_f64(&rec[0], path)?, parse_f64(&rec[1], path)?);
        if re.to_bits() != z.re.to_bits() || im.to_bits() != z.im.to_bits() {
            return Err(CliError::format(
                path,
                format!("row {k} is not at the cell centre {z}"),
            ));
        }
        values.push(parse_f64(&rec[2], path)?);
        stderr.push(parse_f64(&rec[3], path)?);
    }
    let m = side.meta;
    let meta = FieldMeta {
        estimator: m.estimator,
        n: m.n,
        tau: m.tau,
        samples: m.samples,
        seed: m.seed,
        convention: m.convention,
    };
    Ok(FieldGrid::new(spec, values, stderr, meta)?)
}

const SNAPSHOT_HEADER: [&str; 6] = ["step", "time", "index", "re", "im", "overlap"];

/// One row per eigenvalue: `step,time,index,re,im,overlap` (overlap empty when not recorded).
pub fn write_snapshots(path: &Path, snaps: &[TrajectorySnapshot]) -> CliResult<()> {
    let rows = snaps.iter().flat_map(|s| {
        s.eigenvalues.iter().enumerate().map(move |(i, z)| {
            let o = s
                .overlaps_diag
                .as_ref()
                .map_or(String::new(), |d| fmt_f64(d[i]));
            vec![
                s.step.to_string(),
                fmt_f64(s.time),
                i.to_string(),
                fmt_f64(z.re),
                fmt_f64(z.im),
                o,
            ]
        })
    });
    write_atomic(path, &csv_bytes(&SNAPSHOT_HEADER, rows)?)
}

/// Reads snapshots written by [`write_snapshots`] (matrices are not part of the CSV).
pub fn read_snapshots(path: &Path) -> CliResult<Vec<TrajectorySnapshot>> {
    let mut out: Vec<TrajectorySnapshot> = Vec::new();
    for rec in read_csv(path, &SNAPSHOT_HEADER)? {
        let step = parse_usize(&rec[0], path)?;
        let time = parse_f64(&rec[1], path)?;
        let index = parse_usize(&rec[2], path)?;
        let z = C64::new(parse_f64(&rec[3], path)?, parse_f64(&rec[4], path)?);
        let overlap = if rec[5].is_empty() {
            None
        } else {
            Some(parse_f64(&rec[5], path)?)
        };
        let fresh = out.last().is_none_or(|s| s.step != step);
        if fresh {
            out.push(TrajectorySnapshot {
                step,
                time,
                eigenvalues: Vec::new(),
                overlaps_diag: overlap.map(|_| Vec::new()),
                matrix: None,
            });
        }
        let s = out.last_mut().expect("snapshot pushed above");
        if index != s.eigenvalues.len() || s.time.to_bits() != time.to_bits() {
            return Err(CliError::format(
                path,
                format!("rows of step {step} are out of order"),
            ));
        }
        s.eigenvalues.push(z);
        match (&mut s.overlaps_diag, overlap) {
            (Some(d), Some(o)) => d.push(o),
            (None, None) => {}
            _ => {
                return Err(CliError::format(
                    path,
                    format!("step {step} mixes rows with and without overlaps"),
                ))
            }
        }
    }
    Ok(out)
}

/// A header plus rows of numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }
}

pub fn write_table(path: &Path, table: &Table) -> CliResult<()> {
    let header: Vec<&str> = table.header.iter().map(String::as_str).collect();
    let rows = table
        .rows
        .iter()
        .map(|r| r.iter().map(|&v| fmt_f64(v)).collect());
    write_atomic(path, &csv_bytes(&header, rows)?)
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::format(path, e.to_string()))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| CliError::format(path, e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::format(path, e.to_string()))?;
        rows.push(
            rec.iter()
                .map(|s| parse_f64(s, path))
                .collect::<CliResult<Vec<f64>>>()?,
        );
    }
    Ok(Table { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_round_trips_bits() {
        for x in [
            0.1,
            -0.0,
            1e-300,
            5e-324,
            f64::MAX,
            f64::INFINITY,
            -f64::INFINITY,
            1.0 / 3.0,
        ] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert!(fmt_f64(f64::NAN).parse::<f64>().unwrap().is_nan());
    }

    #[test]
    fn binary_layout() {
        let m = ComplexMatrix::from_row_major(1, vec![C64::new(1.5, -2.0)]).unwrap();
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        assert_eq!(&buf[..4], b"GDYN");
        assert_eq!(buf[4], 1);
        assert_eq!(&buf[5..13], &1u64.to_le_bytes());
        assert_eq!(&buf[13..21], &1.5f64.to_le_bytes());
        assert_eq!(&buf[21..29], &(-2.0f64).to_le_bytes());
        assert_eq!(buf.len(), 29);
        assert_eq!(read_matrix(&buf[..]).unwrap(), m);
        assert!(read_matrix(&buf[..28]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_matrix(&bad[..]).is_err());
        bad = buf.clone();
        bad.push(0);
        assert!(read_matrix(&bad[..]).is_err());
    }
}
