//! Discrete complex paths on a time grid and their CSV form.

use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// A complex-valued path sampled on a [`TimeGrid`], starting at 0.
#[derive(Debug, Clone)]
pub struct ComplexPath {
    grid: Arc<TimeGrid>,
    values: Vec<Complex64>,
}

impl ComplexPath {
    pub fn new(grid: Arc<TimeGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.nodes().len() {
            return Err(Error::GridMismatch(format!(
                "path has {} values for {} nodes",
                values.len(),
                grid.nodes().len()
            )));
        }
        if values[0] != Complex64::new(0.0, 0.0) {
            return Err(Error::invalid("values", "path must start at 0"));
        }
        if !values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::invalid("values", "path values must be finite"));
        }
        Ok(ComplexPath { grid, values })
    }

    /// The deterministic zero-energy path `t -> -t`.
    pub fn drift_only(grid: Arc<TimeGrid>) -> Self {
        let values = grid.nodes().iter().map(|&t| Complex64::new(-t, 0.0)).collect();
        ComplexPath { grid, values }
    }

    pub fn from_fn(grid: Arc<TimeGrid>, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values: Vec<Complex64> = grid.nodes().iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn value(&self, k: usize) -> Complex64 {
        self.values[k]
    }

    pub fn endpoint(&self) -> Complex64 {
        *self.values.last().unwrap()
    }

    /// Uniform (sup over nodes) distance to another path on the same grid.
    pub fn sup_distance(&self, other: &ComplexPath) -> Result<f64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch("sup_distance requires equal grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// CSV with header `t,re,im`, one row per node, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,re,im")?;
        for (t, v) in self.grid.nodes().iter().zip(&self.values) {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", t, v.re, v.im)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if i == 0 {
                if line != "t,re,im" {
                    return Err(Error::Parse(format!("expected header `t,re,im`, got `{line}`")));
                }
                continue;
            }
            let mut parts = line.split(',');
            let mut next = || -> Result<f64> {
                parts
                    .next()
                    .ok_or_else(|| Error::Parse(format!("short row at line {}", i + 1)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))
            };
            nodes.push(next()?);
            values.push(Complex64::new(next()?, next()?));
        }
        let grid = TimeGrid::from_nodes(nodes)?;
        ComplexPath::new(grid, values)
    }
}

/// Long-format ensemble CSV: `path_id,t,re,im`.
pub fn write_ensemble_csv<W: Write>(mut w: W, paths: &[ComplexPath]) -> Result<()> {
    writeln!(w, "path_id,t,re,im")?;
    for (id, p) in paths.iter().enumerate() {
        for (t, v) in p.grid().nodes().iter().zip(p.values()) {
            writeln!(w, "{},{:.16e},{:.16e},{:.16e}", id, t, v.re, v.im)?;
        }
    }
    Ok(())
}
