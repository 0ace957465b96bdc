//! Cameron-Martin controls: `h` with piecewise-constant derivative.
//!
//! A control lives in `H^1_0([0, T])`: `h_0 = 0` and the energy is
//! `||h||^2 = sum dh_k^2 dt_k`. The derivative is stored per grid interval;
//! node values are the exact integral of that step function.

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

#[derive(Debug, Clone)]
pub struct Control {
    grid: Arc<TimeGrid>,
    hdot: Vec<f64>,
    values: Vec<f64>,
    h1_norm: f64,
}

impl Control {
    /// Build from a per-interval derivative.
    pub fn from_hdot(grid: Arc<TimeGrid>, hdot: Vec<f64>) -> Result<Self> {
        if hdot.len() != grid.steps() {
            return Err(Error::GridMismatch(format!(
                "{} derivative values for {} intervals",
                hdot.len(),
                grid.steps()
            )));
        }
        if !hdot.iter().all(|d| d.is_finite()) {
            return Err(Error::invalid("hdot", "derivative must be finite"));
        }
        let mut values = Vec::with_capacity(grid.steps() + 1);
        values.push(0.0);
        let mut acc = 0.0;
        let mut energy = 0.0;
        for (k, &d) in hdot.iter().enumerate() {
            let dt = grid.dt(k);
            acc += d * dt;
            energy += d * d * dt;
            values.push(acc);
        }
        Ok(Control {
            grid,
            hdot,
            values,
            h1_norm: energy.sqrt(),
        })
    }

    /// Sample a derivative function at interval midpoints.
    pub fn from_hdot_fn(grid: Arc<TimeGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let hdot = (0..grid.steps()).map(|k| f(grid.midpoint(k))).collect();
        Self::from_hdot(grid, hdot)
    }

    pub fn zero(grid: Arc<TimeGrid>) -> Self {
        Self::from_hdot(grid.clone(), vec![0.0; grid.steps()]).expect("zero control is valid")
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    /// Derivative on interval `k`.
    pub fn hdot(&self, k: usize) -> f64 {
        self.hdot[k]
    }

    pub fn hdot_slice(&self) -> &[f64] {
        &self.hdot
    }

    /// Node values of `h`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn h1_norm(&self) -> f64 {
        self.h1_norm
    }

    /// `1/2 ||h||^2`, the Cameron-Martin energy.
    pub fn energy(&self) -> f64 {
        0.5 * self.h1_norm * self.h1_norm
    }

    /// Piecewise-constant derivative evaluated at time `t` (left-closed
    /// intervals; `t >= T` uses the last interval).
    pub fn hdot_at(&self, t: f64) -> f64 {
        let nodes = self.grid.nodes();
        match nodes.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(k) => self.hdot[k.min(self.hdot.len() - 1)],
            Err(k) => {
                if k == 0 {
                    self.hdot[0]
                } else {
                    self.hdot[(k - 1).min(self.hdot.len() - 1)]
                }
            }
        }
    }

    /// Value of `h` at time `t` (linear interpolation of the node values,
    /// which is exact for a step-function derivative).
    pub fn value_at(&self, t: f64) -> f64 {
        let nodes = self.grid.nodes();
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.grid.horizon() {
            return *self.values.last().unwrap();
        }
        let k = match nodes.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(k) => return self.values[k],
            Err(k) => k - 1,
        };
        self.values[k] + self.hdot[k] * (t - nodes[k])
    }

    /// Re-sample the control onto another grid, reading the derivative at
    /// interval midpoints.
    pub fn resample(&self, grid: Arc<TimeGrid>) -> Result<Self> {
        let hdot = (0..grid.steps()).map(|k| self.hdot_at(grid.midpoint(k))).collect();
        Self::from_hdot(grid, hdot)
    }

    /// CSV with header `t,h,hdot`; the derivative column holds the value on
    /// the interval starting at the row's node (last row repeats it).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,h,hdot")?;
        let n = self.grid.steps();
        for (k, (&t, &h)) in self.grid.nodes().iter().zip(&self.values).enumerate() {
            let d = self.hdot[k.min(n - 1)];
            writeln!(w, "{:.16e},{:.16e},{:.16e}", t, h, d)?;
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
        let mut hdot = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if i == 0 {
                if line != "t,h,hdot" {
                    return Err(Error::Parse(format!("expected header `t,h,hdot`, got `{line}`")));
                }
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected 3 columns", i + 1)));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))
            };
            nodes.push(parse(cols[0])?);
            hdot.push(parse(cols[2])?);
        }
        let grid = TimeGrid::from_nodes(nodes)?;
        hdot.pop(); // the trailing repeated derivative
        Self::from_hdot(grid, hdot)
    }
}
