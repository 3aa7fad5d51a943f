//! Uniform tensor grids and sampled fields with an extension rule outside the box.

use std::fmt;
use std::sync::Arc;

use crate::error::{LabError, Result};

/// Origin, common spacing `h` and points per axis. Flat indices are row-major
/// with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGeometry {
    pub origin: Vec<f64>,
    pub h: f64,
    pub shape: Vec<usize>,
}

impl GridGeometry {
    pub fn new(origin: Vec<f64>, h: f64, shape: Vec<usize>) -> Result<Self> {
        if origin.len() != shape.len() || shape.is_empty() {
            return Err(LabError::ResolutionError(format!(
                "grid origin has {} axes but shape has {}",
                origin.len(),
                shape.len()
            )));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(LabError::ResolutionError(format!("grid spacing must be positive, got {h}")));
        }
        if shape.contains(&0) {
            return Err(LabError::ResolutionError("grid axis with zero points".into()));
        }
        Ok(Self { origin, h, shape })
    }

    /// Grid on the cube `[lo, hi]^dim` with `points` nodes per axis (both ends included).
    pub fn cube(dim: usize, lo: f64, hi: f64, points: usize) -> Result<Self> {
        if points < 2 || hi <= lo {
            return Err(LabError::ResolutionError(format!(
                "cube grid needs hi > lo and >= 2 points, got [{lo}, {hi}] with {points}"
            )));
        }
        let h = (hi - lo) / (points - 1) as f64;
        Self::new(vec![lo; dim], h, vec![points; dim])
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flat(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn multi(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for ax in (0..self.dim()).rev() {
            out[ax] = flat % self.shape[ax];
            flat /= self.shape[ax];
        }
        out
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.h
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi(flat)
            .iter()
            .enumerate()
            .map(|(ax, &i)| self.coord(ax, i))
            .collect()
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.coord(axis, self.shape[axis] - 1)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let eps = 1e-12 * self.h;
        x.iter()
            .enumerate()
            .all(|(ax, &c)| c >= self.origin[ax] - eps && c <= self.upper(ax) + eps)
    }

    /// Flat index of the node at `x`, if `x` is a node to within 1e-9 h.
    pub fn node_at(&self, x: &[f64]) -> Option<usize> {
        let mut multi = Vec::with_capacity(self.dim());
        for (ax, &c) in x.iter().enumerate() {
            let t = (c - self.origin[ax]) / self.h;
            let r = t.round();
            if (t - r).abs() > 1e-9 || r < 0.0 || r as usize >= self.shape[ax] {
                return None;
            }
            multi.push(r as usize);
        }
        Some(self.flat(&multi))
    }

    /// Multilinear interpolation stencil: (flat index, weight) pairs, or
    /// `None` when `x` is outside the box.
    pub fn stencil(&self, x: &[f64]) -> Option<Vec<(usize, f64)>> {
        if !self.contains(x) {
            return None;
        }
        let dim = self.dim();
        let mut base = Vec::with_capacity(dim);
        let mut frac = Vec::with_capacity(dim);
        for (ax, &c) in x.iter().enumerate() {
            let t = ((c - self.origin[ax]) / self.h).max(0.0);
            let n = self.shape[ax];
            let mut i = t.floor() as usize;
            let mut f = t - i as f64;
            if n == 1 {
                i = 0;
                f = 0.0;
            } else if i >= n - 1 {
                i = n - 2;
                f = 1.0_f64.min(t - i as f64);
            }
            if f.abs() < 1e-12 {
                f = 0.0;
            } else if (1.0 - f).abs() < 1e-12 {
                f = 1.0;
            }
            base.push(i);
            frac.push(f);
        }
        let mut out = Vec::with_capacity(1 << dim);
        let mut idx = vec![0usize; dim];
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            for ax in 0..dim {
                let up = (corner >> ax) & 1 == 1;
                let f = frac[ax];
                w *= if up { f } else { 1.0 - f };
                idx[ax] = base[ax] + usize::from(up);
            }
            if w != 0.0 {
                out.push((self.flat(&idx), w));
            }
        }
        Some(out)
    }
}

/// How a grid field is continued outside its box.
#[derive(Clone)]
pub enum Extension {
    Zero,
    Function(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for Extension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extension::Zero => write!(f, "Zero"),
            Extension::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// Node values on a grid plus an extension rule; evaluable everywhere.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub geom: GridGeometry,
    pub values: Vec<f64>,
    pub extension: Extension,
}

impl GridFunction {
    pub fn new(geom: GridGeometry, values: Vec<f64>, extension: Extension) -> Result<Self> {
        if values.len() != geom.len() {
            return Err(LabError::ResolutionError(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                geom.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(LabError::ResolutionError(format!("non-finite grid value {v}")));
        }
        Ok(Self { geom, values, extension })
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(geom: GridGeometry, f: F, extension: Extension) -> Self {
        let values = (0..geom.len()).map(|k| f(&geom.point(k))).collect();
        Self { geom, values, extension }
    }

    pub fn zeros(geom: GridGeometry) -> Self {
        let n = geom.len();
        Self { geom, values: vec![0.0; n], extension: Extension::Zero }
    }

    pub fn dim(&self) -> usize {
        self.geom.dim()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.geom.stencil(x) {
            Some(st) => st.iter().map(|&(k, w)| w * self.values[k]).sum(),
            None => match &self.extension {
                Extension::Zero => 0.0,
                Extension::Function(f) => f(x),
            },
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV with header `x1,...,xn,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.dim()).map(|i| format!("x{i}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",value\n");
        for (k, v) in self.values.iter().enumerate() {
            for c in self.geom.point(k) {
                out.push_str(&format!("{c:.17e},"));
            }
            out.push_str(&format!("{v:.17e}\n"));
        }
        out
    }

    /// Parses the CSV written by [`Self::to_csv`]; rows may come in any order
    /// but must cover a full uniform tensor grid. Extension is zero.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| LabError::ConfigError("empty field CSV".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols.last() != Some(&"value") {
            return Err(LabError::ConfigError(format!(
                "field CSV header must be x1,...,xn,value; got `{header}`"
            )));
        }
        let dim = cols.len() - 1;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (ln, line) in lines.enumerate() {
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|t| t.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| LabError::ConfigError(format!("field CSV row {}: {e}", ln + 2)))?;
            if row.len() != dim + 1 {
                return Err(LabError::ConfigError(format!(
                    "field CSV row {} has {} columns, expected {}",
                    ln + 2,
                    row.len(),
                    dim + 1
                )));
            }
            rows.push(row);
        }
        let mut origin = vec![0.0; dim];
        let mut shape = vec![0; dim];
        let mut h = f64::NAN;
        for ax in 0..dim {
            let mut cs: Vec<f64> = rows.iter().map(|r| r[ax]).collect();
            cs.sort_by(f64::total_cmp);
            cs.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * (1.0 + b.abs()));
            origin[ax] = cs[0];
            shape[ax] = cs.len();
            if cs.len() > 1 {
                let hax = (cs[cs.len() - 1] - cs[0]) / (cs.len() - 1) as f64;
                if h.is_nan() {
                    h = hax;
                } else if (h - hax).abs() > 1e-9 * h {
                    return Err(LabError::ConfigError("field CSV grid spacing differs across axes".into()));
                }
            }
        }
        if h.is_nan() {
            h = 1.0;
        }
        let geom = GridGeometry::new(origin, h, shape)?;
        if geom.len() != rows.len() {
            return Err(LabError::ConfigError(format!(
                "field CSV has {} rows but its coordinates span a {} node grid",
                rows.len(),
                geom.len()
            )));
        }
        let mut values = vec![f64::NAN; geom.len()];
        for r in &rows {
            let k = geom
                .node_at(&r[..dim])
                .ok_or_else(|| LabError::ConfigError(format!("field CSV point {:?} is off the grid", &r[..dim])))?;
            values[k] = r[dim];
        }
        GridFunction::new(geom, values, Extension::Zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_multi_roundtrip() {
        let g = GridGeometry::new(vec![0.0, -1.0, 2.0], 0.5, vec![3, 4, 5]).unwrap();
        for k in 0..g.len() {
            assert_eq!(g.flat(&g.multi(k)), k);
        }
        assert_eq!(g.point(g.flat(&[1, 2, 3])), vec![0.5, 0.0, 3.5]);
    }

    #[test]
    fn bilinear_reproduces_affine_fields() {
        let g = GridGeometry::cube(2, -1.0, 1.0, 11).unwrap();
        let f = GridFunction::from_fn(g, |x| 2.0 * x[0] - 3.0 * x[1] + 0.5, Extension::Zero);
        for x in [[0.13, -0.77], [1.0, 1.0], [-1.0, 0.55], [0.0, 0.0]] {
            let exact = 2.0 * x[0] - 3.0 * x[1] + 0.5;
            assert!((f.eval(&x) - exact).abs() < 1e-13);
        }
        assert_eq!(f.eval(&[1.5, 0.0]), 0.0);
    }

    #[test]
    fn csv_roundtrip() {
        let g = GridGeometry::new(vec![-0.5, 0.25], 0.125, vec![5, 3]).unwrap();
        let f = GridFunction::from_fn(g, |x| x[0] * x[1] + 1.0, Extension::Zero);
        let back = GridFunction::from_csv(&f.to_csv()).unwrap();
        assert_eq!(back.geom.shape, f.geom.shape);
        assert!((back.geom.h - 0.125).abs() < 1e-15);
        for (a, b) in back.values.iter().zip(&f.values) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert!(GridFunction::from_csv("a,b\n1,2\n").is_err());
    }
}
