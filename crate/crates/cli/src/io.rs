//! CSV artifacts and atomic file output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use lqt_core::state_space::Trajectory;
use lqt_core::{Matrix, Vector};

use crate::error::{CliError, Result};

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::io(path, e)
    })
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// `t, x1..xn, r1..rn, u1..um`; the final row leaves the inputs empty.
pub fn trajectory_csv(traj: &Trajectory) -> Vec<u8> {
    let n = traj.states[0].len();
    let m = traj.inputs.first().map_or(0, |u| u.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=n).map(|i| format!("r{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    w.write_record(&header).expect("in-memory write");
    for (k, t) in traj.times().enumerate() {
        let mut rec = vec![t.to_string()];
        rec.extend(traj.states[k].iter().map(|v| v.to_string()));
        rec.extend(traj.references[k].iter().map(|v| v.to_string()));
        match traj.inputs.get(k) {
            Some(u) => rec.extend(u.iter().map(|v| v.to_string())),
            None => rec.extend(std::iter::repeat_n(String::new(), m)),
        }
        w.write_record(&rec).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let bad = |message: String| CliError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let n = header.iter().filter(|h| h.starts_with('x')).count();
    let m = header.iter().filter(|h| h.starts_with('u')).count();
    if n == 0 || header.len() != 1 + 2 * n + m {
        return Err(bad(format!("unexpected trajectory header {header:?}")));
    }
    let mut traj = Trajectory {
        t0: 0,
        states: Vec::new(),
        references: Vec::new(),
        inputs: Vec::new(),
    };
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}, column {}: {e}", row + 1, &header[i])))
        };
        if row == 0 {
            traj.t0 = rec[0].parse().map_err(|e| bad(format!("row 1: bad time: {e}")))?;
        }
        traj.states.push(Vector::from_vec((1..=n).map(num).collect::<Result<_>>()?));
        traj.references.push(Vector::from_vec((n + 1..=2 * n).map(num).collect::<Result<_>>()?));
        if m > 0 && !rec[1 + 2 * n].is_empty() {
            traj.inputs.push(Vector::from_vec((1 + 2 * n..1 + 2 * n + m).map(num).collect::<Result<_>>()?));
        }
    }
    traj.validate().map_err(|e| bad(e.to_string()))?;
    Ok(traj)
}

/// Header-less rows of a dense matrix.
pub fn matrix_csv(m: &Matrix) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string())).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| CliError::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, |r| r.len());
    Ok(Matrix::from_row_iterator(rows.len(), ncols, rows.into_iter().flatten()))
}

/// `(t, cumulative)` pairs of a cost CSV.
pub fn read_cumulative_cost(path: &Path) -> Result<Vec<(i64, f64)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let parse_err = |e: String| CliError::Parse {
            path: path.to_path_buf(),
            message: e,
        };
        let t = rec[0].parse::<i64>().map_err(|e| parse_err(e.to_string()))?;
        let c = rec[2].parse::<f64>().map_err(|e| parse_err(e.to_string()))?;
        out.push((t, c));
    }
    Ok(out)
}
