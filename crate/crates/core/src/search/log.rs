//! Comma-separated evaluation log, one row per evaluation.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::searchspace::Architecture;

use super::{EvalRecord, SearchMethod};

pub const EVALUATION_LOG_HEADER: [&str; 5] = ["method", "cycle", "draw", "architecture", "fitness"];

pub fn write_evaluation_log<T: Scalar, W: Write>(out: W, records: &[EvalRecord<T>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVALUATION_LOG_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.method.to_string(),
            r.cycle.to_string(),
            r.draw.to_string(),
            r.architecture.to_string(),
            r.fitness.as_f64().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_evaluation_log<T: Scalar, R: Read>(input: R) -> Result<Vec<EvalRecord<T>>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(EVALUATION_LOG_HEADER) {
        return Err(Error::InvalidConfig(format!(
            "unexpected evaluation log header {header:?}"
        )));
    }
    let bad = |m: &str| Error::InvalidConfig(format!("malformed evaluation log row: {m}"));
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(csv_err)?;
        out.push(EvalRecord {
            method: row[0].parse::<SearchMethod>()?,
            cycle: row[1].parse().map_err(|_| bad("cycle"))?,
            draw: row[2].parse().map_err(|_| bad("draw"))?,
            architecture: row[3].parse::<Architecture>()?,
            fitness: T::of(row[4].parse::<f64>().map_err(|_| bad("fitness"))?),
        });
    }
    Ok(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
