//! Uniform-grid representation of temperature profiles on the extended
//! latitude interval, with linear interpolation, sup-norm, and composite
//! Simpson quadrature over the embedded unit interval.
//!
//! The independent variable is the sine of latitude. The grid spans an
//! interval strictly containing [0, 1] so that the extended vector field and
//! iceline excursions beyond the physical interval stay representable.

use serde::Serialize;

use crate::error::{ConfigError, ModelError, Result};

/// Relative slack for deciding that a query lies on a grid node.
const NODE_SNAP: f64 = 1e-9;

/// Uniform grid over `[y_min, y_max]` with nodes at both endpoints.
///
/// Invariants enforced on construction:
/// - `y_min < 0 <= 1 < y_max`,
/// - `n_points` odd and at least 3,
/// - nodes fall exactly on `y = 0` and `y = 1`, with an even number of
///   subintervals between them so composite Simpson applies on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    y_min: f64,
    y_max: f64,
    n_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        // h = 1/300; resolves albedo fronts of width ~1/M up to M ~ 100
        GridSpec::new(-0.5, 1.5, 601).expect("default grid is valid")
    }
}

impl GridSpec {
    pub fn new(y_min: f64, y_max: f64, n_points: usize) -> std::result::Result<Self, ConfigError> {
        if y_min >= 0.0 || !y_min.is_finite() {
            return Err(ConfigError::InvalidValue {
                key: "y_min",
                value: y_min,
                constraint: "y_min must be finite and < 0".into(),
            });
        }
        if y_max <= 1.0 || !y_max.is_finite() {
            return Err(ConfigError::InvalidValue {
                key: "y_max",
                value: y_max,
                constraint: "y_max must be finite and > 1".into(),
            });
        }
        if n_points < 3 || n_points.is_multiple_of(2) {
            return Err(ConfigError::InvalidValue {
                key: "n_points",
                value: n_points as f64,
                constraint: "n_points must be odd and >= 3".into(),
            });
        }
        let spec = GridSpec {
            y_min,
            y_max,
            n_points,
        };
        let span = y_max - y_min;
        let i0 = (-y_min / span * (n_points - 1) as f64).round() as i64;
        let i1 = ((1.0 - y_min) / span * (n_points - 1) as f64).round() as i64;
        let aligned = |idx: i64, target: f64| {
            idx >= 0 && idx < n_points as i64 && (spec.node(idx as usize) - target).abs() <= 1e-12
        };
        if !aligned(i0, 0.0) || !aligned(i1, 1.0) {
            return Err(ConfigError::InvalidValue {
                key: "n_points",
                value: n_points as f64,
                constraint: format!(
                    "grid nodes must land exactly on y = 0 and y = 1 \
                     (got ({y_min}, {y_max}) with {n_points} points)"
                ),
            });
        }
        if (i1 - i0) % 2 != 0 {
            return Err(ConfigError::InvalidValue {
                key: "n_points",
                value: n_points as f64,
                constraint: "the sub-grid on [0, 1] must have an even interval count for Simpson"
                    .into(),
            });
        }
        Ok(spec)
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Node spacing.
    pub fn h(&self) -> f64 {
        (self.y_max - self.y_min) / (self.n_points - 1) as f64
    }

    /// Coordinate of node `i`. Exact at the endpoints and, for grids built by
    /// `new`, at y = 0 and y = 1.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i < self.n_points);
        let t = i as f64 / (self.n_points - 1) as f64;
        self.y_min + (self.y_max - self.y_min) * t
    }

    /// Indices of the nodes at y = 0 and y = 1.
    pub fn unit_range(&self) -> (usize, usize) {
        let span = self.y_max - self.y_min;
        let i0 = (-self.y_min / span * (self.n_points - 1) as f64).round() as usize;
        let i1 = ((1.0 - self.y_min) / span * (self.n_points - 1) as f64).round() as usize;
        (i0, i1)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.node(i))
    }

    /// Composite Simpson quadrature of `f` over [0, 1] using the aligned
    /// sub-grid. Exact for polynomials of degree <= 3 in the grid samples.
    pub fn simpson_unit<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let (i0, i1) = self.unit_range();
        simpson_window(self.h(), (i0..=i1).map(|i| f(self.node(i))), i1 - i0)
    }
}

/// Composite Simpson over `m` uniform intervals (`m` even) with spacing `h`.
/// Compensated summation keeps the rule exact to a few ulp.
fn simpson_window(h: f64, values: impl Iterator<Item = f64>, m: usize) -> f64 {
    debug_assert!(m.is_multiple_of(2) && m >= 2);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (j, v) in values.enumerate() {
        // weights 1,4,2,4,...,4,1; the 4x and 2x products are exact
        let w = if j == 0 || j == m {
            1.0
        } else if j.is_multiple_of(2) {
            2.0
        } else {
            4.0
        };
        let term = w * v;
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    (sum + comp) * (h / 3.0)
}

/// A temperature profile sampled on a [`GridSpec`]; the state of the fast
/// subsystem. Values are degrees Celsius.
///
/// Profiles are immutable after construction and all operations are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    spec: GridSpec,
    values: Vec<f64>,
}

impl Profile {
    /// Validating constructor: the sample count must match the grid and every
    /// entry must be finite.
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.n_points() {
            return Err(ModelError::LengthMismatch {
                expected: spec.n_points(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteSample { index });
        }
        Ok(Profile { spec, values })
    }

    /// Sample a closed-form function on the grid.
    pub fn from_fn<F: Fn(f64) -> f64>(spec: GridSpec, f: F) -> Self {
        let values = spec.nodes().map(f).collect();
        Profile { spec, values }
    }

    /// Constant profile.
    pub fn constant(spec: GridSpec, value: f64) -> Self {
        Profile {
            spec,
            values: vec![value; spec.n_points()],
        }
    }

    /// Internal constructor that skips finiteness validation; used by the
    /// stepping code, which reports divergence itself.
    pub(crate) fn from_values_unchecked(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.n_points());
        Profile { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Linear interpolation at `y`; reproduces stored samples bit-exactly at
    /// grid nodes. Errors when `y` lies outside the grid.
    pub fn eval(&self, y: f64) -> Result<f64> {
        if !(y >= self.spec.y_min() && y <= self.spec.y_max()) {
            return Err(ModelError::OutOfRange {
                coord: "y",
                value: y,
                min: self.spec.y_min(),
                max: self.spec.y_max(),
            });
        }
        Ok(self.interp(y))
    }

    /// Interpolation with the query clamped into the grid domain. This is the
    /// evaluation the extended dynamics uses once the iceline leaves [0, 1].
    pub fn eval_clamped(&self, y: f64) -> f64 {
        self.interp(y.clamp(self.spec.y_min(), self.spec.y_max()))
    }

    fn interp(&self, y: f64) -> f64 {
        let t = (y - self.spec.y_min()) / self.spec.h();
        let nearest = t.round();
        if (t - nearest).abs() < NODE_SNAP {
            let i = (nearest as usize).min(self.spec.n_points() - 1);
            return self.values[i];
        }
        let i = (t.floor() as usize).min(self.spec.n_points() - 2);
        let frac = t - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Sup norm, the Banach-space norm of the profile space.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Composite Simpson approximation of the global average over [0, 1].
    pub fn mean_unit_interval(&self) -> f64 {
        let (i0, i1) = self.spec.unit_range();
        simpson_window(
            self.spec.h(),
            self.values[i0..=i1].iter().copied(),
            i1 - i0,
        )
    }

    /// Max forward-difference quotient over adjacent nodes; a lower bound on
    /// the Lipschitz constant, exact for the piecewise-linear representative.
    pub fn lipschitz_estimate(&self) -> f64 {
        let h = self.spec.h();
        self.values
            .windows(2)
            .fold(0.0f64, |m, w| m.max((w[1] - w[0]).abs() / h))
    }

    /// Sup distance between two profiles on the same grid.
    pub fn sup_distance(&self, other: &Profile) -> f64 {
        debug_assert_eq!(self.spec, other.spec);
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Pointwise blend `(1 - w) * self + w * other`.
    pub(crate) fn blend(&self, other: &Profile, w: f64) -> Profile {
        debug_assert_eq!(self.spec, other.spec);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * (1.0 - w) + b * w)
            .collect();
        Profile {
            spec: self.spec,
            values,
        }
    }
}
