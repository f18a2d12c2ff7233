//! Artifact writers: fixed-precision JSON and plain CSV.

use std::io::{self, Write};
use std::path::Path;

use lqrk_core::linalg::{Mat, Vector};
use lqrk_core::TimeGrid;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

use crate::error::CliError;

/// Pretty JSON with every float printed as `{:.16e}` (17 significant
/// digits), so equal values always produce equal bytes.
struct FixedFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for FixedFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("serializing a JSON value cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON output is UTF-8")
}

pub fn matrix_json(m: &Mat) -> Value {
    Value::from(
        (0..m.nrows())
            .map(|i| Value::from((0..m.ncols()).map(|j| m[(i, j)]).collect::<Vec<_>>()))
            .collect::<Vec<_>>(),
    )
}

pub fn vector_json(v: &Vector) -> Value {
    Value::from(v.iter().copied().collect::<Vec<_>>())
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Columns `t, y_1..y_n, u_1..u_m`.
pub fn write_trajectory_csv(path: &Path, grid: &TimeGrid, states: &[Vector], controls: &[Vector]) -> Result<(), CliError> {
    let n = states.first().map_or(0, |v| v.len());
    let m = controls.first().map_or(0, |v| v.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("y_{i}")));
    header.extend((1..=m).map(|i| format!("u_{i}")));
    let rows = (0..grid.len()).map(|i| {
        let mut row = vec![grid.node(i)];
        row.extend(states[i].iter());
        row.extend(controls[i].iter());
        row
    });
    write_csv(path, &header, rows)
}

/// Columns `t, P_1_1, P_1_2, ..` (row-major entries).
pub fn write_matrix_path_csv(path: &Path, grid: &TimeGrid, name: &str, mats: &[Mat]) -> Result<(), CliError> {
    let (r, c) = mats.first().map_or((0, 0), |m| m.shape());
    let mut header = vec!["t".to_string()];
    for i in 1..=r {
        header.extend((1..=c).map(|j| format!("{name}_{i}_{j}")));
    }
    let rows = (0..grid.len()).map(|k| {
        let mut row = vec![grid.node(k)];
        for i in 0..r {
            row.extend((0..c).map(|j| mats[k][(i, j)]));
        }
        row
    });
    write_csv(path, &header, rows)
}

fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let io_err = |e: csv::Error| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(io_err)?;
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(row.iter().map(|x| format!("{x:.16e}"))).map_err(io_err)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_have_fixed_width() {
        let text = to_json(&json!({"a": 0.1, "b": [1.0, f64::NAN], "c": 3}));
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("1.0000000000000000e0"));
        assert!(text.contains("null"));
        assert!(text.contains("\"c\": 3"));
    }
}
