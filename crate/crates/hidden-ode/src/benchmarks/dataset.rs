//! Time-indexed records of control inputs and measurements, with CSV I/O.
//!
//! The on-disk format is one header plus one row per time step:
//! `t,u_0,...,u_{du-1},y_0,...,y_{dy-1}[,x_0,...,x_{dx-1}]`, decimal text
//! with 17 significant digits (lossless for `f64`), LF line endings. The
//! ground-truth state columns are optional and never consumed by training.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{ControlInput, Measurement, StateVector};

/// Relative tolerance on the spacing of time stamps read from disk.
const SPACING_TOL: f64 = 1e-9;

/// Uniformly sampled record of a single trajectory.
///
/// Times are represented by `(t0, dt, len)` rather than a stored array, so
/// the uniform-spacing invariant holds exactly; files whose stamps deviate
/// from the uniform grid by more than one part in 10⁹ are rejected on load.
#[derive(Clone, Debug)]
pub struct Dataset {
    t0: f64,
    dt: f64,
    inputs: Vec<ControlInput>,
    measurements: Vec<Measurement>,
    states: Option<Vec<StateVector>>,
}

impl Dataset {
    pub fn new(
        t0: f64,
        dt: f64,
        inputs: Vec<ControlInput>,
        measurements: Vec<Measurement>,
        states: Option<Vec<StateVector>>,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("sample spacing must be positive, got {dt}")));
        }
        if measurements.is_empty() {
            return Err(Error::Config("dataset must contain at least one sample".into()));
        }
        if inputs.len() != measurements.len() {
            return Err(Error::Config(format!(
                "dataset has {} inputs but {} measurements",
                inputs.len(),
                measurements.len()
            )));
        }
        if let Some(states) = &states {
            if states.len() != measurements.len() {
                return Err(Error::Config(format!(
                    "dataset has {} ground-truth states but {} measurements",
                    states.len(),
                    measurements.len()
                )));
            }
        }
        for series in [&inputs, &measurements] {
            if series.iter().any(|v| v.len() != series[0].len()) {
                return Err(Error::Config("ragged column counts within a dataset".into()));
            }
        }
        Ok(Self { t0, dt, inputs, measurements, states })
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn dim_u(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn dim_y(&self) -> usize {
        self.measurements[0].len()
    }

    pub fn input(&self, i: usize) -> &ControlInput {
        &self.inputs[i]
    }

    pub fn measurement(&self, i: usize) -> &Measurement {
        &self.measurements[i]
    }

    pub fn inputs(&self) -> &[ControlInput] {
        &self.inputs
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    /// Ground-truth states, present only for simulated data; evaluation-only.
    pub fn states(&self) -> Option<&[StateVector]> {
        self.states.as_deref()
    }

    /// Keeps only the first `n` samples (for desk-scale truncation).
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::Config(format!(
                "cannot truncate a {}-sample dataset to {n} samples",
                self.len()
            )));
        }
        Ok(Self {
            t0: self.t0,
            dt: self.dt,
            inputs: self.inputs[..n].to_vec(),
            measurements: self.measurements[..n].to_vec(),
            states: self.states.as_ref().map(|s| s[..n].to_vec()),
        })
    }

    /// Renders the record in the CSV interchange format.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push('t');
        for j in 0..self.dim_u() {
            let _ = write!(out, ",u_{j}");
        }
        for j in 0..self.dim_y() {
            let _ = write!(out, ",y_{j}");
        }
        if let Some(states) = &self.states {
            for j in 0..states[0].len() {
                let _ = write!(out, ",x_{j}");
            }
        }
        out.push('\n');
        for i in 0..self.len() {
            let _ = write!(out, "{:.16e}", self.time(i));
            for v in self.inputs[i].iter() {
                let _ = write!(out, ",{v:.16e}");
            }
            for v in self.measurements[i].iter() {
                let _ = write!(out, ",{v:.16e}");
            }
            if let Some(states) = &self.states {
                for v in states[i].iter() {
                    let _ = write!(out, ",{v:.16e}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Loads a dataset from a CSV file, validating the header layout and the
/// uniformity of the time stamps.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(&text)
}

/// Expected column layout derived from a header line.
struct Header {
    dim_u: usize,
    dim_y: usize,
    dim_x: Option<usize>,
}

impl Header {
    fn columns(&self) -> usize {
        1 + self.dim_u + self.dim_y + self.dim_x.unwrap_or(0)
    }
}

fn parse_header(line: &str) -> Result<Header> {
    let fields: Vec<&str> = line.trim_end().split(',').collect();
    if fields.first() != Some(&"t") {
        return Err(Error::parse_at_line(1, "header must start with column 't'"));
    }
    let mut rest = &fields[1..];
    let take_series = |rest: &mut &[&str], prefix: &str| -> usize {
        let mut count = 0;
        while let Some(name) = rest.first() {
            if *name == format!("{prefix}_{count}") {
                count += 1;
                *rest = &rest[1..];
            } else {
                break;
            }
        }
        count
    };
    let dim_u = take_series(&mut rest, "u");
    let dim_y = take_series(&mut rest, "y");
    let dim_x = take_series(&mut rest, "x");
    if !rest.is_empty() {
        return Err(Error::parse_at_line(
            1,
            format!("unexpected header column '{}'", rest[0]),
        ));
    }
    if dim_y == 0 {
        return Err(Error::parse_at_line(1, "header is missing measurement column 'y_0'"));
    }
    Ok(Header { dim_u, dim_y, dim_x: (dim_x > 0).then_some(dim_x) })
}

/// Parses the CSV interchange format from text (exposed for round-trip
/// testing without touching the filesystem).
pub fn parse_csv(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => parse_header(line)?,
        None => return Err(Error::parse_at_line(1, "empty file")),
    };
    let mut times = Vec::new();
    let mut inputs = Vec::new();
    let mut measurements = Vec::new();
    let mut states = header.dim_x.map(|_| Vec::new());
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut values = Vec::with_capacity(header.columns());
        for (col, field) in line.trim_end().split(',').enumerate() {
            values.push(field.trim().parse::<f64>().map_err(|_| {
                Error::parse_at_line(
                    line_no,
                    format!("column {} is not a number: '{field}'", col + 1),
                )
            })?);
        }
        if values.len() != header.columns() {
            return Err(Error::parse_at_line(
                line_no,
                format!("expected {} columns, found {}", header.columns(), values.len()),
            ));
        }
        let mut rest = values.split_off(1);
        times.push(values[0]);
        let after_u = rest.split_off(header.dim_u);
        inputs.push(DVector::from_vec(rest));
        let mut after_y = after_u;
        let state_part = after_y.split_off(header.dim_y);
        measurements.push(DVector::from_vec(after_y));
        if let Some(states) = &mut states {
            states.push(DVector::from_vec(state_part));
        }
    }
    if times.len() < 2 {
        return Err(Error::parse_at_line(
            2,
            "dataset must contain at least two samples to define a spacing",
        ));
    }
    let n = times.len();
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::parse_at_line(2, format!("non-increasing time stamps (dt={dt})")));
    }
    let scale = dt.max(times[n - 1].abs());
    for (i, &t) in times.iter().enumerate() {
        let expected = times[0] + i as f64 * dt;
        if (t - expected).abs() > SPACING_TOL * scale {
            return Err(Error::parse_at_line(
                i + 2,
                format!(
                    "non-uniform sampling: stamp {t} deviates from the uniform grid value {expected}"
                ),
            ));
        }
    }
    Dataset::new(times[0], dt, inputs, measurements, states)
}
