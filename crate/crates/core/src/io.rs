//! Trajectory CSV and model JSON files.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Result, SysIdError};
use crate::lti::StateSpaceModel;
use crate::simulate::Trajectory;

/// Formats a float with 17 significant digits, enough to round-trip.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Writes `t,u_1..u_m,y_1..y_p` with one row per step (`t` from 1).
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=traj.m()).map(|i| format!("u_{i}")));
    header.extend((1..=traj.p()).map(|i| format!("y_{i}")));
    w.write_record(&header)?;
    for t in 0..traj.len() {
        let mut row = vec![(t + 1).to_string()];
        row.extend(traj.inputs().column(t).iter().map(|&v| format_float(v)));
        row.extend(traj.outputs().column(t).iter().map(|&v| format_float(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the format of [`write_trajectory_csv`]; column counts come from the
/// header.
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Trajectory> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.get(0) != Some("t") {
        return Err(SysIdError::Parse("first CSV column must be `t`".into()));
    }
    let names: Vec<&str> = header.iter().skip(1).collect();
    let m = names.iter().take_while(|h| h.starts_with("u_")).count();
    let p = names.len() - m;
    if m == 0 || p == 0 || !names[m..].iter().all(|h| h.starts_with("y_")) {
        return Err(SysIdError::Parse(
            "CSV header must be t,u_1..u_m,y_1..y_p with m, p >= 1".into(),
        ));
    }
    let mut u = Vec::new();
    let mut y = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != 1 + m + p {
            return Err(SysIdError::Parse(format!(
                "row {} has {} fields, expected {}",
                line + 1,
                record.len(),
                1 + m + p
            )));
        }
        for (i, field) in record.iter().enumerate().skip(1) {
            let v: f64 = field.trim().parse().map_err(|_| {
                SysIdError::Parse(format!("row {}: `{field}` is not a number", line + 1))
            })?;
            if i <= m {
                u.push(v);
            } else {
                y.push(v);
            }
        }
    }
    let len = u.len() / m;
    Trajectory::from_data(
        DMatrix::from_vec(m, len, u),
        DMatrix::from_vec(p, len, y),
    )
}

pub fn save_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    write_trajectory_csv(traj, File::create(path)?)
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    read_trajectory_csv(File::open(path)?)
}

pub fn load_model(path: &Path) -> Result<StateSpaceModel> {
    StateSpaceModel::from_json_str(&std::fs::read_to_string(path)?)
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(File::open(path)?)?)
}
