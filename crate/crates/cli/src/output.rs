//! CSV and JSON writers with byte-stable output.
//!
//! Floats use the shortest representation that parses back to the same
//! double, independent of locale.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use turnpike_core::analytic_lq::OptimalPoint;
use turnpike_core::Trajectory;

use crate::CliError;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Header row of a trajectory CSV.
pub fn trajectory_header(nq: usize, nu: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=nq).map(|i| format!("q_{i}")));
    h.extend((1..=nq).map(|i| format!("v_{i}")));
    h.extend((1..=nu).map(|i| format!("u_{i}")));
    h
}

pub fn trajectory_rows(traj: &Trajectory) -> Vec<Vec<f64>> {
    traj.times()
        .iter()
        .zip(traj.states())
        .zip(traj.controls())
        .map(|((t, s), u)| {
            let mut row = vec![*t];
            row.extend(&s.q);
            row.extend(&s.v);
            row.extend(u);
            row
        })
        .collect()
}

pub fn analytic_header() -> Vec<String> {
    ["t", "q_1", "v_1", "u_1", "lambda1", "lambda2"].map(String::from).to_vec()
}

pub fn analytic_rows(points: &[OptimalPoint]) -> Vec<Vec<f64>> {
    points.iter().map(|p| vec![p.t, p.q, p.v, p.u, p.lambda1, p.lambda2]).collect()
}

pub fn csv_bytes(header: &[String], rows: &[Vec<f64>]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(row.iter().map(|x| fmt_f64(*x))).expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(value).expect("report types always serialize");
    s.push(b'\n');
    s
}

/// Files of one result bundle, collected in memory and written together.
#[derive(Debug, Default)]
pub struct Bundle {
    files: Vec<(String, Vec<u8>)>,
}

impl Bundle {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    /// Writes every file into `dir`, creating it when missing.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        self.files
            .iter()
            .map(|(name, bytes)| {
                let path = dir.join(name);
                fs::write(&path, bytes).map_err(|e| io(&path, e))?;
                Ok(path)
            })
            .collect()
    }
}
