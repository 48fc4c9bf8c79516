//! Radial space-time fields `U(r, t)` on uniform grids.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A radial function of `(r, t)` that the integral operators can sample.
pub trait Field: Sync {
    fn value(&self, r: f64, t: f64) -> Result<f64>;

    /// Radius beyond which the field vanishes at time `t`, if known.
    fn support_edge(&self, _t: f64) -> Option<f64> {
        None
    }

    /// Largest time at which the field may be sampled.
    fn horizon(&self) -> f64 {
        f64::INFINITY
    }
}

impl<F: Field + ?Sized> Field for &F {
    fn value(&self, r: f64, t: f64) -> Result<f64> {
        (**self).value(r, t)
    }

    fn support_edge(&self, t: f64) -> Option<f64> {
        (**self).support_edge(t)
    }

    fn horizon(&self) -> f64 {
        (**self).horizon()
    }
}

/// Closed-form field, optionally supported in `r ≤ t + k`.
pub struct FnField<F> {
    f: F,
    k: Option<f64>,
}

impl<F: Fn(f64, f64) -> f64 + Sync> FnField<F> {
    pub fn new(f: F) -> Self {
        Self { f, k: None }
    }

    /// Zero outside the cone `r ≤ t + k`.
    pub fn with_support(f: F, k: f64) -> Self {
        Self { f, k: Some(k) }
    }
}

impl<F: Fn(f64, f64) -> f64 + Sync> Field for FnField<F> {
    fn value(&self, r: f64, t: f64) -> Result<f64> {
        match self.k {
            Some(k) if r > t + k => Ok(0.0),
            _ => Ok((self.f)(r, t)),
        }
    }

    fn support_edge(&self, t: f64) -> Option<f64> {
        self.k.map(|k| t + k)
    }
}

/// `|Ψ|` for any field `Ψ`.
pub struct Abs<F>(pub F);

impl<F: Field> Field for Abs<F> {
    fn value(&self, r: f64, t: f64) -> Result<f64> {
        Ok(self.0.value(r, t)?.abs())
    }

    fn support_edge(&self, t: f64) -> Option<f64> {
        self.0.support_edge(t)
    }

    fn horizon(&self) -> f64 {
        self.0.horizon()
    }
}

/// Mesh `r_i = i·dr`, `t_j = j·dt` covering `0 ≤ t ≤ t_max`, `0 ≤ r ≤ t_max + k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dr: f64,
    pub dt: f64,
    pub t_max: f64,
    pub k: f64,
}

impl GridSpec {
    pub fn new(dr: f64, dt: f64, t_max: f64, k: f64) -> Result<Self> {
        for (name, v) in [("dr", dr), ("dt", dt), ("k", k)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("grid {name} must be positive, got {v}")));
            }
        }
        if !(t_max >= 0.0 && t_max.is_finite()) {
            return Err(Error::Config(format!("grid horizon must be nonnegative, got {t_max}")));
        }
        Ok(Self { dr, dt, t_max, k })
    }

    /// Equal steps in `r` and `t`.
    pub fn uniform(step: f64, t_max: f64, k: f64) -> Result<Self> {
        Self::new(step, step, t_max, k)
    }

    /// Index of the last time level; the horizon is rounded up to a whole step.
    pub fn n_t(&self) -> usize {
        ((self.t_max / self.dt) - 1e-9).ceil().max(0.0) as usize
    }

    /// Index of the last radial node.
    pub fn n_r(&self) -> usize {
        (((self.horizon() + self.k) / self.dr) - 1e-9).ceil().max(0.0) as usize
    }

    pub fn horizon(&self) -> f64 {
        self.n_t() as f64 * self.dt
    }

    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.dr
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    /// Whether node `(i, j)` lies in the closed cone `r ≤ t + k`.
    pub fn in_cone(&self, i: usize, j: usize) -> bool {
        self.r(i) <= self.t(j) + self.k + 1e-12 * (1.0 + self.k)
    }

    /// Last radial index inside the cone at time level `j`.
    pub fn cone_edge(&self, j: usize) -> usize {
        let edge = ((self.t(j) + self.k) / self.dr + 1e-9).floor() as usize;
        edge.min(self.n_r())
    }

    /// Equal steps with `dt/dr` within rounding of one.
    pub fn is_uniform(&self) -> bool {
        (self.dt - self.dr).abs() <= 1e-12 * self.dr
    }
}

/// Node values of a radial field on a [`GridSpec`], stored by time level,
/// sampled between nodes by bilinear interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacetimeField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl SpacetimeField {
    pub fn zeros(grid: GridSpec) -> Self {
        let len = (grid.n_t() + 1) * (grid.n_r() + 1);
        Self { grid, values: vec![0.0; len] }
    }

    /// Tabulate `f` at every node inside the cone; nodes outside stay zero.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut field = Self::zeros(grid);
        for j in 0..=grid.n_t() {
            for i in 0..=grid.cone_edge(j) {
                field.set(i, j, f(grid.r(i), grid.t(j)));
            }
        }
        field
    }

    /// Build from rows already laid out by time level.
    pub fn from_rows(grid: GridSpec, rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = grid.n_r() + 1;
        if rows.len() != grid.n_t() + 1 || rows.iter().any(|row| row.len() != width) {
            return Err(Error::Config("row layout does not match the grid".into()));
        }
        Ok(Self { grid, values: rows.concat() })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * (self.grid.n_r() + 1) + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let w = self.grid.n_r() + 1;
        self.values[j * w + i] = v;
    }

    /// Values at time level `j`, indexed by radial node.
    pub fn row(&self, j: usize) -> &[f64] {
        let w = self.grid.n_r() + 1;
        &self.values[j * w..(j + 1) * w]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        let w = self.grid.n_r() + 1;
        &mut self.values[j * w..(j + 1) * w]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Apply `f` to every node value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Nodewise `f(self, other)`; both fields must share a grid.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Config("fields live on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Bilinear interpolation; zero beyond the stored radial range.
    pub fn interpolate(&self, r: f64, t: f64) -> Result<f64> {
        let g = &self.grid;
        let horizon = g.horizon();
        if r < 0.0 || t < 0.0 || t > horizon * (1.0 + 1e-12) + 1e-14 {
            return Err(Error::Horizon { r, t, horizon });
        }
        let x = r / g.dr;
        if x > g.n_r() as f64 {
            return Ok(0.0);
        }
        let y = (t / g.dt).min(g.n_t() as f64);
        let i = (x.floor() as usize).min(g.n_r() - 1);
        let fx = x - i as f64;
        if g.n_t() == 0 {
            let row = self.row(0);
            return Ok((1.0 - fx) * row[i] + fx * row[i + 1]);
        }
        let j = (y.floor() as usize).min(g.n_t() - 1);
        let fy = y - j as f64;
        let (r0, r1) = (self.row(j), self.row(j + 1));
        let lo = (1.0 - fx) * r0[i] + fx * r0[i + 1];
        let hi = (1.0 - fx) * r1[i] + fx * r1[i + 1];
        Ok((1.0 - fy) * lo + fy * hi)
    }

    /// CSV with a comment header naming the support radius, amplitude and
    /// data family, followed by `r,t,value` rows for nodes inside the cone.
    pub fn write_csv<W: Write>(&self, out: W, eps: f64, family: &str) -> Result<()> {
        let mut out = out;
        writeln!(out, "# k={},eps={},data={}", self.grid.k, eps, family)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "t", "value"]).map_err(csv_err)?;
        for j in 0..=self.grid.n_t() {
            for i in 0..=self.grid.cone_edge(j) {
                w.write_record(&[
                    self.grid.r(i).to_string(),
                    self.grid.t(j).to_string(),
                    self.at(i, j).to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

impl Field for SpacetimeField {
    fn value(&self, r: f64, t: f64) -> Result<f64> {
        self.interpolate(r, t)
    }

    fn support_edge(&self, t: f64) -> Option<f64> {
        Some((t + self.grid.k + self.grid.dr).min(self.grid.n_r() as f64 * self.grid.dr))
    }

    fn horizon(&self) -> f64 {
        self.grid.horizon()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::uniform(0.25, 2.0, 1.0).unwrap()
    }

    #[test]
    fn grid_counts() {
        let g = grid();
        assert_eq!(g.n_t(), 8);
        assert_eq!(g.n_r(), 12);
        assert_eq!(g.cone_edge(0), 4);
        assert_eq!(g.cone_edge(8), 12);
        assert!(g.in_cone(4, 0) && !g.in_cone(5, 0));
        let odd = GridSpec::new(0.3, 0.3, 1.0, 1.0).unwrap();
        assert!((odd.horizon() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn bilinear_is_exact_on_bilinear_data() {
        let f = |r: f64, t: f64| 1.0 + 2.0 * r - t + 0.5 * r * t;
        let field = SpacetimeField::from_fn(grid(), |r, t| f(r, t));
        for &(r, t) in &[(0.1, 1.3), (0.6, 0.2), (0.0, 2.0), (1.9, 1.7)] {
            assert!((field.interpolate(r, t).unwrap() - f(r, t)).abs() < 1e-12, "({r},{t})");
        }
    }

    #[test]
    fn outside_cone_is_zero_and_horizon_enforced() {
        let field = SpacetimeField::from_fn(grid(), |_, _| 1.0);
        assert_eq!(field.at(5, 0), 0.0);
        assert_eq!(field.interpolate(1.5, 0.0).unwrap(), 0.0);
        assert_eq!(field.interpolate(100.0, 1.0).unwrap(), 0.0);
        assert!(matches!(field.interpolate(0.5, 2.5), Err(Error::Horizon { .. })));
    }

    #[test]
    fn csv_has_header_and_cone_rows() {
        let field = SpacetimeField::from_fn(grid(), |r, _| r);
        let mut buf = Vec::new();
        field.write_csv(&mut buf, 0.5, "f_only").unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# k=1,eps=0.5,data=f_only");
        assert_eq!(lines.next().unwrap(), "r,t,value");
        let rows: usize = (0..=8).map(|j| grid().cone_edge(j) + 1).sum();
        assert_eq!(lines.count(), rows);
    }

    #[test]
    fn abs_wrapper() {
        let f = FnField::with_support(|r: f64, t: f64| r - t, 1.0);
        assert_eq!(Abs(&f).value(0.0, 0.5).unwrap(), 0.5);
        assert_eq!(Abs(&f).value(3.0, 0.5).unwrap(), 0.0);
        assert_eq!(f.support_edge(2.0), Some(3.0));
    }
}
