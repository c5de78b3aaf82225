//! K-invariant functions sampled on a radial grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which radial measure the stored values are a density against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureWeight {
    #[default]
    None,
    Delta0,
    Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialFunction {
    grid: Vec<f64>,
    values: Vec<f64>,
    pub measure_weight: MeasureWeight,
}

impl RadialFunction {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, measure_weight: MeasureWeight) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::Domain(format!(
                "grid has {} points but values has {}",
                grid.len(),
                values.len()
            )));
        }
        if grid.is_empty() {
            return Err(Error::Domain("empty radial grid".into()));
        }
        if grid[0] < 0.0 || !grid[0].is_finite() {
            return Err(Error::Domain(format!("grid starts at {}", grid[0])));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::Domain("grid must be strictly increasing and finite".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("value at r = {} is not finite", grid[i])));
        }
        Ok(Self { grid, values, measure_weight })
    }

    /// Samples `f` on `grid`.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: &[f64], measure_weight: MeasureWeight, f: F) -> Result<Self> {
        Self::new(grid.to_vec(), grid.iter().map(|&r| f(r)).collect(), measure_weight)
    }

    /// Like `from_fn` for fallible evaluations.
    pub fn try_from_fn<F: Fn(f64) -> Result<f64>>(
        grid: &[f64],
        measure_weight: MeasureWeight,
        f: F,
    ) -> Result<Self> {
        let values = grid.iter().map(|&r| f(r)).collect::<Result<Vec<_>>>()?;
        Self::new(grid.to_vec(), values, measure_weight)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn map<F: Fn(f64, f64) -> f64>(&self, f: F) -> Result<Self> {
        let values = self.grid.iter().zip(&self.values).map(|(&r, &v)| f(r, v)).collect();
        Self::new(self.grid.clone(), values, self.measure_weight)
    }

    /// Six-point Lagrange interpolation; zero outside the grid.
    pub fn interpolate(&self, r: f64) -> f64 {
        let n = self.grid.len();
        if n == 1 {
            return if r == self.grid[0] { self.values[0] } else { 0.0 };
        }
        if r < self.grid[0] || r > self.grid[n - 1] {
            return 0.0;
        }
        let idx = self.grid.partition_point(|&x| x <= r).saturating_sub(1);
        let width = n.min(6);
        let start = idx.saturating_sub(width / 2 - 1).min(n - width);
        let xs = &self.grid[start..start + width];
        let ys = &self.values[start..start + width];
        let mut acc = 0.0;
        for i in 0..width {
            if r == xs[i] {
                return ys[i];
            }
            let mut w = 1.0;
            for k in 0..width {
                if k != i {
                    w *= (r - xs[k]) / (xs[i] - xs[k]);
                }
            }
            acc += w * ys[i];
        }
        acc
    }

    /// Sup-norm of the pointwise difference, optionally restricted to a window.
    pub fn sup_diff(&self, other: &Self, window: Option<(f64, f64)>) -> f64 {
        self.grid
            .iter()
            .zip(&self.values)
            .filter(|(r, _)| window.is_none_or(|(a, b)| **r >= a && **r <= b))
            .map(|(&r, &v)| (v - other.interpolate(r)).abs())
            .fold(0.0, f64::max)
    }
}

/// A radial function, even in r, evaluable anywhere.
pub trait RadialFn: Sync {
    fn eval(&self, r: f64) -> f64;

    /// Radius beyond which the function is taken to vanish.
    fn support_radius(&self) -> f64 {
        f64::INFINITY
    }

    /// Largest sample spacing, for tabulated functions.
    fn max_spacing(&self) -> Option<f64> {
        None
    }
}

impl<F: Fn(f64) -> f64 + Sync> RadialFn for F {
    fn eval(&self, r: f64) -> f64 {
        self(r.abs())
    }
}

impl RadialFn for RadialFunction {
    fn eval(&self, r: f64) -> f64 {
        self.interpolate(r.abs())
    }

    fn support_radius(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    fn max_spacing(&self) -> Option<f64> {
        self.grid.windows(2).map(|w| w[1] - w[0]).reduce(f64::max)
    }
}

/// Smallest radius (on a 0.25 step, up to 200) past which |f| stays below
/// `rel` times |f(0)|.
pub fn effective_radius(f: &dyn RadialFn, rel: f64) -> f64 {
    let scale = f.eval(0.0).abs();
    let limit = f.support_radius().min(200.0);
    let mut r = limit;
    while r > 0.25 && f.eval(r - 0.25).abs() <= rel * scale {
        r -= 0.25;
    }
    r
}

/// `count` equally spaced points on [start, stop].
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(RadialFunction::new(vec![0.0, 1.0], vec![1.0], MeasureWeight::None).is_err());
        assert!(RadialFunction::new(vec![-0.1, 1.0], vec![1.0, 2.0], MeasureWeight::None).is_err());
        assert!(RadialFunction::new(vec![0.0, 0.0], vec![1.0, 2.0], MeasureWeight::None).is_err());
        assert!(RadialFunction::new(vec![0.0, 1.0], vec![1.0, f64::NAN], MeasureWeight::None).is_err());
    }

    #[test]
    fn interpolation_is_accurate_for_smooth_data() {
        let grid = linspace(0.0, 3.0, 301);
        let f = RadialFunction::from_fn(&grid, MeasureWeight::None, f64::cos).unwrap();
        for k in 0..97 {
            let r = 0.013 + 0.031 * k as f64;
            assert!((f.interpolate(r) - r.cos()).abs() < 1e-11, "r = {r}");
        }
        assert_eq!(f.interpolate(3.5), 0.0);
    }
}
