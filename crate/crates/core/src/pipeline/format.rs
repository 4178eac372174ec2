//! `.nps` series files: an ASCII magic line, a `key=value` metadata line,
//! then `(V·K)·N` little-endian `f64` values in row-major order.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{FieldSeries, GridSpec, Matrix};

pub const SERIES_MAGIC: &str = "NEURALPDE/1";

fn header_line(series: &FieldSeries) -> String {
    let g = &series.grid;
    let mut s = String::new();
    write!(
        s,
        "vars={} nx={} ny={} n_steps={} dt={} dx={} dy={} x_min={} x_max={} y_min={} y_max={}",
        series.variables.join(","),
        g.nx,
        g.ny,
        g.n_steps,
        g.dt,
        g.dx(),
        g.dy(),
        g.x_min,
        g.x_max,
        g.y_min,
        g.y_max
    )
    .expect("write to String");
    s
}

pub fn write_series(series: &FieldSeries, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    write_series_to(series, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_series_to<W: Write>(series: &FieldSeries, mut out: W) -> Result<()> {
    for name in &series.variables {
        if name.is_empty() || name.contains([',', ' ', '\n', '=']) {
            return Err(Error::Format(format!("variable label '{name}' cannot be encoded")));
        }
    }
    writeln!(out, "{SERIES_MAGIC}")?;
    writeln!(out, "{}", header_line(series))?;
    for v in series.data.as_slice() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_series(path: impl AsRef<Path>) -> Result<FieldSeries> {
    read_series_from(fs::File::open(path)?)
}

pub fn read_series_from<R: Read>(input: R) -> Result<FieldSeries> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim_end_matches('\n') != SERIES_MAGIC {
        return Err(Error::Format(format!(
            "bad magic '{}' (expected {SERIES_MAGIC})",
            line.trim_end()
        )));
    }
    line.clear();
    reader.read_line(&mut line)?;
    let header = parse_header(line.trim_end_matches('\n'))?;

    let rows = header.vars.len() * header.grid.num_points();
    let cols = header.grid.n_steps;
    let expected = rows * cols;
    let mut payload = Vec::with_capacity(expected * 8);
    reader.read_to_end(&mut payload)?;
    if payload.len() % 8 != 0 {
        return Err(Error::Format(format!(
            "payload of {} bytes is not a whole number of f64 values",
            payload.len()
        )));
    }
    let found = payload.len() / 8;
    if found != expected {
        let full_rows = if cols > 0 { found / cols } else { 0 };
        return Err(Error::Format(format!(
            "header declares {rows} rows x {cols} columns ({expected} values) but payload holds {found} values ({full_rows} full rows)"
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!(
            "non-finite value {} at row {}, column {}",
            values[k],
            k / cols,
            k % cols
        )));
    }
    let data = Matrix::from_vec(rows, cols, values)?;
    FieldSeries::new(header.grid, header.vars, data)
}

struct Header {
    vars: Vec<String>,
    grid: GridSpec,
}

fn parse_header(line: &str) -> Result<Header> {
    let mut vars = None;
    let mut ints = [None::<usize>; 3];
    let mut floats = [None::<f64>; 7];
    const INT_KEYS: [&str; 3] = ["nx", "ny", "n_steps"];
    const FLOAT_KEYS: [&str; 7] = ["dt", "dx", "dy", "x_min", "x_max", "y_min", "y_max"];

    for field in line.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("malformed header field '{field}'")))?;
        if key == "vars" {
            let list: Vec<String> = value.split(',').map(str::to_string).collect();
            if list.iter().any(String::is_empty) {
                return Err(Error::Format(format!("empty variable label in '{value}'")));
            }
            vars = Some(list);
        } else if let Some(i) = INT_KEYS.iter().position(|k| *k == key) {
            ints[i] = Some(value.parse().map_err(|_| {
                Error::Format(format!("header key '{key}' expects an integer, got '{value}'"))
            })?);
        } else if let Some(i) = FLOAT_KEYS.iter().position(|k| *k == key) {
            floats[i] = Some(value.parse().map_err(|_| {
                Error::Format(format!("header key '{key}' expects a number, got '{value}'"))
            })?);
        } else {
            return Err(Error::Format(format!("unknown header key '{key}'")));
        }
    }
    let vars = vars.ok_or_else(|| Error::Format("header missing 'vars'".into()))?;
    let int = |i: usize| ints[i].ok_or_else(|| Error::Format(format!("header missing '{}'", INT_KEYS[i])));
    let float =
        |i: usize| floats[i].ok_or_else(|| Error::Format(format!("header missing '{}'", FLOAT_KEYS[i])));
    let grid = GridSpec {
        nx: int(0)?,
        ny: int(1)?,
        n_steps: int(2)?,
        dt: float(0)?,
        x_min: float(3)?,
        x_max: float(4)?,
        y_min: float(5)?,
        y_max: float(6)?,
    };
    grid.validate()
        .map_err(|e| Error::Format(format!("header grid: {e}")))?;
    for (name, declared, derived) in [("dx", float(1)?, grid.dx()), ("dy", float(2)?, grid.dy())] {
        if (declared - derived).abs() > 1e-9 * derived.abs().max(1.0) {
            return Err(Error::Format(format!(
                "header {name}={declared} disagrees with extents (implies {derived})"
            )));
        }
    }
    Ok(Header { vars, grid })
}

/// Plain CSV export: a header row of timestep indices, then one row per
/// (variable, grid point). Not readable back.
pub fn write_series_csv(series: &FieldSeries, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    let n = series.num_steps();
    let header: Vec<String> = (0..n).map(|c| c.to_string()).collect();
    writeln!(out, "{}", header.join(","))?;
    let mut line = String::new();
    for r in 0..series.data.rows() {
        line.clear();
        for (c, v) in series.data.row(r).iter().enumerate() {
            if c > 0 {
                line.push(',');
            }
            write!(line, "{v}").expect("write to String");
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_series() -> FieldSeries {
        let g = GridSpec::plane(-0.5, 0.5, 3, -0.5, 0.5, 4, 5e-4, 6).unwrap();
        let data = Matrix::from_fn(36, 6, |r, c| (r as f64 * 0.37 + c as f64).sin() * 1e-3);
        FieldSeries::new(g, vec!["phi".into(), "p".into(), "u".into()], data).unwrap()
    }

    fn to_bytes(s: &FieldSeries) -> Vec<u8> {
        let mut buf = Vec::new();
        write_series_to(s, &mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip_keeps_variables_in_order() {
        let s = small_series();
        let back = read_series_from(to_bytes(&s).as_slice()).unwrap();
        assert_eq!(back.variables, vec!["phi", "p", "u"]);
        assert_eq!(back, s);
    }

    #[test]
    fn header_layout() {
        let g = GridSpec::line(0.0, 1.0, 101, 1e-3, 40).unwrap();
        let s = FieldSeries::new(g, vec!["u".into()], Matrix::zeros(101, 40)).unwrap();
        let buf = to_bytes(&s);
        let text = String::from_utf8_lossy(&buf[..120]);
        assert!(text.starts_with(
            "NEURALPDE/1\nvars=u nx=101 ny=0 n_steps=40 dt=0.001 dx=0.01 dy=0 x_min=0 x_max=1 y_min=0 y_max=0\n"
        ), "{text}");
        let header_len = text.find("y_max=0\n").unwrap() + 8;
        assert_eq!(buf.len(), header_len + 101 * 40 * 8);
    }

    #[test]
    fn missing_row_is_reported() {
        let g = GridSpec::line(0.0, 1.0, 10, 0.1, 4).unwrap();
        let s = FieldSeries::new(g, vec!["u".into()], Matrix::zeros(10, 4)).unwrap();
        let mut buf = to_bytes(&s);
        buf.truncate(buf.len() - 4 * 8);
        let err = read_series_from(buf.as_slice()).unwrap_err().to_string();
        assert!(err.contains("10 rows") && err.contains("9 full rows"), "{err}");
    }

    #[test]
    fn non_finite_payload_position_reported() {
        let g = GridSpec::line(0.0, 1.0, 3, 0.1, 4).unwrap();
        let s = FieldSeries::new(g, vec!["u".into()], Matrix::zeros(3, 4)).unwrap();
        let mut buf = to_bytes(&s);
        let start = buf.len() - 12 * 8;
        let k = 2 * 4 + 1;
        buf[start + 8 * k..start + 8 * k + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        let err = read_series_from(buf.as_slice()).unwrap_err().to_string();
        assert!(err.contains("row 2, column 1"), "{err}");
    }

    #[test]
    fn malformed_headers_rejected() {
        for header in [
            "NEURALPDE/2\nvars=u nx=3 ny=0 n_steps=1 dt=0.1 dx=0.5 dy=0 x_min=0 x_max=1 y_min=0 y_max=0\n",
            "NEURALPDE/1\nvars=u nx=3 n_steps=1 dt=0.1 dx=0.5 dy=0 x_min=0 x_max=1 y_min=0 y_max=0\n",
            "NEURALPDE/1\nvars=u nx=three ny=0 n_steps=1 dt=0.1 dx=0.5 dy=0 x_min=0 x_max=1 y_min=0 y_max=0\n",
            "NEURALPDE/1\nvars=u nx=3 ny=0 n_steps=1 dt=0.1 dx=0.7 dy=0 x_min=0 x_max=1 y_min=0 y_max=0\n",
            "NEURALPDE/1\nvars=u nx=3 ny=0 n_steps=1 dt=0.1 dx=0.5 dy=0 x_min=0 x_max=1 y_min=0 y_max=0 extra=1\n",
        ] {
            let mut buf = header.as_bytes().to_vec();
            buf.extend(std::iter::repeat_n(0u8, 24));
            assert!(read_series_from(buf.as_slice()).is_err(), "{header}");
        }
    }
}
