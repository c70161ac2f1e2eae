//! Sample CSV: header `y,x1,...,xp`, one observation per row.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use super::Sample;
use crate::error::{PcrError, Result};
use crate::format::fmt17;

pub fn write_sample_csv<W: Write>(sample: &Sample, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let p = sample.p();
    let mut header = Vec::with_capacity(p + 1);
    header.push("y".to_string());
    header.extend((1..=p).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(p + 1);
    for (t, x) in sample.x.rows().into_iter().enumerate() {
        row.clear();
        row.push(fmt17(sample.y[t]));
        row.extend(x.iter().map(|v| fmt17(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sample_csv<R: Read>(input: R) -> Result<Sample> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = reader.headers()?.clone();
    let cols = header.len();
    if cols < 2 || header.get(0).map(str::trim) != Some("y") {
        return Err(PcrError::Parse {
            line: 1,
            message: "header must be `y,x1,...,xp`".into(),
        });
    }
    for (j, name) in header.iter().enumerate().skip(1) {
        if name.trim() != format!("x{j}") {
            return Err(PcrError::Parse {
                line: 1,
                message: format!("column {} is `{name}`, expected `x{j}`", j + 1),
            });
        }
    }
    let p = cols - 1;
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |pos| pos.line() as usize);
        if record.len() != cols {
            return Err(PcrError::Parse {
                line,
                message: format!("expected {cols} fields, found {}", record.len()),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| PcrError::Parse {
                line,
                message: format!("field {} (`{field}`) is not a number", j + 1),
            })?;
            if !v.is_finite() {
                return Err(PcrError::Parse {
                    line,
                    message: format!("field {} is not finite", j + 1),
                });
            }
            if j == 0 {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    let t = ys.len();
    if t == 0 {
        return Err(PcrError::Parse {
            line: 2,
            message: "no observations".into(),
        });
    }
    let x = Array2::from_shape_vec((t, p), xs).map_err(|e| PcrError::Dimension(e.to_string()))?;
    Sample::new(x, Array1::from(ys))
}
