//! Tabular result rows shared by every evaluation command.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::functionals::MCEstimate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub s: usize,
    pub t: f64,
    #[serde(rename = "point-id")]
    pub point_id: usize,
    pub method: String,
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl ResultRow {
    pub fn exact(s: usize, t: f64, point_id: usize, method: impl Into<String>, value: f64, seed: u64) -> Self {
        ResultRow {
            s,
            t,
            point_id,
            method: method.into(),
            value,
            stderr: 0.0,
            n_samples: 0,
            seed,
        }
    }

    pub fn estimate(s: usize, t: f64, point_id: usize, method: impl Into<String>, e: &MCEstimate) -> Self {
        ResultRow {
            s,
            t,
            point_id,
            method: method.into(),
            value: e.value,
            stderr: e.stderr,
            n_samples: e.n_samples,
            seed: e.seed,
        }
    }
}

pub fn write_rows<W: Write>(out: W, rows: &[ResultRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["s", "t", "point-id", "method", "value", "stderr", "n_samples", "seed"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> csv::Result<Vec<ResultRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip() {
        let rows = vec![
            ResultRow::exact(1, 0.5, 0, "partition", 1.0, 7),
            ResultRow::estimate(2, 1.0, 3, "cumulant", &MCEstimate::exact(-0.25)),
        ];
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("s,t,point-id,method,value,stderr,n_samples,seed\n"));
        assert_eq!(read_rows(buf.as_slice()).unwrap(), rows);
    }
}
