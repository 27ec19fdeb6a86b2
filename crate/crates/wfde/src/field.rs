//! Radial fields: nonnegative radial functions sampled on an increasing
//! grid, with an optional analytic power-law tail extension.
//!
//! Weighted integrals ∫ f |x|^{-γ} dx reduce to ω_d ∫ f(r) r^{d-1-γ} dr
//! and are evaluated with exact antiderivatives on each cell, treating f
//! as a power law between samples (linear when a sample vanishes). The
//! singular weight is integrated in closed form, never sampled at r = 0:
//! below the first grid radius the field is extended by its first value.

use crate::params::ParameterSet;
use serde::Serialize;
use thiserror::Error;
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("grid must be strictly increasing and have >= 2 points")]
    BadGrid,
    #[error("values must be nonnegative, finite, and match the grid length")]
    BadValues,
    #[error("tail extension mismatch: tail value {tail} vs last sample {sample} at r = {r}")]
    TailMismatch { r: f64, tail: f64, sample: f64 },
    #[error("divergent tail: exponent {exponent} >= -(d-gamma) = {limit} makes the weighted integral infinite")]
    DivergentTail { exponent: f64, limit: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Analytic extension f(r) = coefficient · r^exponent for r beyond the
/// last grid radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerTail {
    pub exponent: f64,
    pub coefficient: f64,
}

impl PowerTail {
    pub fn eval(&self, r: f64) -> f64 {
        self.coefficient * r.powf(self.exponent)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: Vec<f64>,
    values: Vec<f64>,
    tail: Option<PowerTail>,
    params: ParameterSet,
}

impl RadialField {
    pub fn new(
        params: ParameterSet,
        grid: Vec<f64>,
        values: Vec<f64>,
        tail: Option<PowerTail>,
    ) -> Result<Self, FieldError> {
        if grid.len() < 2 || grid[0] <= 0.0 || grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FieldError::BadGrid);
        }
        if values.len() != grid.len() || values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(FieldError::BadValues);
        }
        if let Some(t) = tail {
            let r = *grid.last().unwrap();
            let sample = *values.last().unwrap();
            if sample > 0.0 {
                let tv = t.eval(r);
                if (tv - sample).abs() > 1e-3 * sample.abs() {
                    return Err(FieldError::TailMismatch { r, tail: tv, sample });
                }
            }
        }
        Ok(RadialField { grid, values, tail, params })
    }

    /// Sample a closed-form radial function on a log-spaced grid.
    pub fn sample<F: Fn(f64) -> f64>(
        params: ParameterSet,
        r_min: f64,
        r_max: f64,
        points_per_decade: usize,
        f: F,
        tail: Option<PowerTail>,
    ) -> Result<Self, FieldError> {
        let n = ((points_per_decade as f64) * (r_max / r_min).log10()).round().max(1.0) as usize;
        let grid: Vec<f64> =
            (0..=n).map(|i| r_min * (r_max / r_min).powf(i as f64 / n as f64)).collect();
        let values: Vec<f64> = grid.iter().map(|r| f(*r)).collect();
        Self::new(params, grid, values, tail)
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn tail(&self) -> Option<PowerTail> {
        self.tail
    }
    pub fn len(&self) -> usize {
        self.grid.len()
    }
    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
    pub fn r_max(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    pub fn with_tail(mut self, tail: Option<PowerTail>) -> Result<Self, FieldError> {
        self.tail = tail;
        Self::new(self.params, self.grid, self.values, self.tail)
    }

    /// Map values pointwise (e.g. scaling); the tail coefficient scales
    /// only under multiplication, so the generic map drops the tail.
    pub fn map_values<F: Fn(f64, f64) -> f64>(&self, f: F) -> Result<Self, FieldError> {
        let values = self.grid.iter().zip(&self.values).map(|(r, v)| f(*r, *v)).collect();
        Self::new(self.params, self.grid.clone(), values, None)
    }

    pub fn scale(&self, c: f64) -> Result<Self, FieldError> {
        let values = self.values.iter().map(|v| c * v).collect();
        let tail = self.tail.map(|t| PowerTail { exponent: t.exponent, coefficient: c * t.coefficient });
        Self::new(self.params, self.grid.clone(), values, tail)
    }

    /// Spatial dilation f(λ·): new field r ↦ f(λr).
    pub fn dilate(&self, lambda: f64) -> Result<Self, FieldError> {
        let grid: Vec<f64> = self.grid.iter().map(|r| r / lambda).collect();
        let tail = self.tail.map(|t| PowerTail {
            exponent: t.exponent,
            coefficient: t.coefficient * lambda.powf(t.exponent),
        });
        Self::new(self.params, grid, self.values.clone(), tail)
    }

    /// Point evaluation with the same interpolation rule the integrals
    /// use; constant below the grid, tail (or zero) above it.
    pub fn value_at(&self, r: f64) -> f64 {
        if r <= self.grid[0] {
            return self.values[0];
        }
        if r >= *self.grid.last().unwrap() {
            return match self.tail {
                Some(t) => t.eval(r),
                None => {
                    if r == *self.grid.last().unwrap() {
                        *self.values.last().unwrap()
                    } else {
                        0.0
                    }
                }
            };
        }
        let i = match self.grid.binary_search_by(|g| g.partial_cmp(&r).unwrap()) {
            Ok(i) => return self.values[i],
            Err(i) => i - 1,
        };
        let (r0, r1) = (self.grid[i], self.grid[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        if v0 > 0.0 && v1 > 0.0 {
            let p = (v1 / v0).ln() / (r1 / r0).ln();
            v0 * (r / r0).powf(p)
        } else {
            v0 + (v1 - v0) * (r - r0) / (r1 - r0)
        }
    }

    /// Exact weighted integral of the interpolant over `[a, b]` within
    /// the grid span (callers handle the inner and tail extensions).
    fn cell_integral(&self, i: usize, a: f64, b: f64) -> f64 {
        let (r0, r1) = (self.grid[i], self.grid[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        let w = self.params.dim_gamma() - 1.0; // weight r^{d-1-γ}
        debug_assert!(a >= r0 - 1e-12 * r0 && b <= r1 + 1e-12 * r1 && a <= b);
        if v0 <= 0.0 && v1 <= 0.0 {
            return 0.0;
        }
        if v0 > 0.0 && v1 > 0.0 {
            let p = (v1 / v0).ln() / (r1 / r0).ln();
            let e = p + w + 1.0;
            let c = v0 * r0.powf(-p);
            if e.abs() > 1e-9 {
                c * (b.powf(e) - a.powf(e)) / e
            } else {
                c * (b / a).ln()
            }
        } else {
            // linear interpolant v = v0 + s (r - r0)
            let s = (v1 - v0) / (r1 - r0);
            let c0 = v0 - s * r0;
            let e1 = w + 1.0;
            let e2 = w + 2.0;
            let term = |x: f64| c0 * x.powf(e1) / e1 + s * x.powf(e2) / e2;
            (term(b) - term(a)).max(0.0)
        }
    }

    /// Weighted integral of the interpolant over full cell `i`, without
    /// the sphere factor.
    pub(crate) fn cell_weighted_integral(&self, i: usize) -> f64 {
        self.params.sphere_area() * self.cell_integral(i, self.grid[i], self.grid[i + 1])
    }

    /// Weighted integral over `[a, b] ⊂ [grid[i], grid[i+1]]`, without
    /// the sphere factor.
    pub(crate) fn partial_cell_weighted_integral(&self, i: usize, a: f64, b: f64) -> f64 {
        self.cell_integral(i, a, b)
    }

    /// Weighted integral of the tail extension over `[r_max, ∞)`, sphere
    /// factor included.
    pub(crate) fn tail_weighted_integral(&self) -> Result<f64, FieldError> {
        Ok(self.params.sphere_area() * self.tail_integral(self.r_max())?)
    }

    /// Weighted integral of the tail extension over `[a, ∞)`.
    fn tail_integral(&self, a: f64) -> Result<f64, FieldError> {
        let Some(t) = self.tail else { return Ok(0.0) };
        let dg = self.params.dim_gamma();
        let e = t.exponent + dg;
        if e >= 0.0 {
            return Err(FieldError::DivergentTail { exponent: t.exponent, limit: -dg });
        }
        Ok(-t.coefficient * a.powf(e) / e)
    }

    /// Weighted outer mass  ∫_{|x| > R} f |x|^{-γ} dx  (sphere factor
    /// included). `R = 0` gives the full weighted mass, with the first
    /// sample extended as a constant down to the origin.
    pub fn weighted_outer_mass(&self, r_from: f64) -> Result<f64, FieldError> {
        let omega = self.params.sphere_area();
        let dg = self.params.dim_gamma();
        let mut total = 0.0;
        let r0 = self.grid[0];
        if r_from < r0 {
            // constant extension on [r_from, r0]
            total += self.values[0] * (r0.powf(dg) - r_from.max(0.0).powf(dg)) / dg;
        }
        let last = *self.grid.last().unwrap();
        for i in 0..self.grid.len() - 1 {
            let (a, b) = (self.grid[i], self.grid[i + 1]);
            if b <= r_from {
                continue;
            }
            total += self.cell_integral(i, a.max(r_from), b);
        }
        total += self.tail_integral(r_from.max(last))?;
        Ok(omega * total)
    }

    /// Weighted mass ‖f‖_{L¹_γ}.
    pub fn l1_gamma(&self) -> Result<f64, FieldError> {
        self.weighted_outer_mass(0.0)
    }

    /// Index cap excluding the outer wall layer of solver fields: the
    /// no-flux boundary contaminates roughly the outermost half decade,
    /// so sup-type diagnostics stop 0.75 decades short of r_max (at
    /// least 5 cells, at most half the grid).
    pub fn wall_trim_index(&self) -> usize {
        let n = self.grid.len();
        let cut = self.r_max() / 10f64.powf(0.75);
        let by_radius = self.grid.partition_point(|g| *g <= cut);
        by_radius.min(n.saturating_sub(5)).max(n / 2)
    }

    /// Fit the tail exponent of the field: least-squares slope of
    /// log v against log r over the outermost `decades` of positive
    /// samples, excluding `skip_outer` cells at the boundary.
    pub fn fit_tail_exponent(&self, decades: f64, skip_outer: usize) -> Option<(f64, f64)> {
        let n = self.grid.len();
        if n < skip_outer + 4 {
            return None;
        }
        let hi = n - skip_outer;
        let r_hi = self.grid[hi - 1];
        let r_lo = r_hi / 10f64.powf(decades);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..hi {
            if self.grid[i] >= r_lo && self.values[i] > 0.0 {
                xs.push(self.grid[i].log10());
                ys.push(self.values[i].log10());
            }
        }
        if xs.len() < 4 || xs.last()? - xs.first()? < 0.5 * decades {
            return None;
        }
        let (slope, _, resid) = crate::quad::linear_fit(&xs, &ys);
        Some((slope, resid))
    }

    /// Export as a two-column CSV with the regime (and tail, if any) in
    /// `#`-prefixed header keys. Full double precision.
    pub fn write_csv(&self, path: &Path) -> Result<(), FieldError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "# d = {}", self.params.d())?;
        writeln!(out, "# gamma = {:.17e}", self.params.gamma())?;
        writeln!(out, "# beta = {:.17e}", self.params.beta())?;
        writeln!(out, "# m = {:.17e}", self.params.m())?;
        if let Some(t) = self.tail {
            writeln!(out, "# tail_exponent = {:.17e}", t.exponent)?;
            writeln!(out, "# tail_coefficient = {:.17e}", t.coefficient)?;
        }
        writeln!(out, "r,value")?;
        for (r, v) in self.grid.iter().zip(&self.values) {
            writeln!(out, "{:.17e},{:.17e}", r, v)?;
        }
        Ok(())
    }

    /// Import a field written by [`RadialField::write_csv`]. A `params` argument
    /// overrides the regime recorded in the header (required when the
    /// header has none).
    pub fn read_csv(path: &Path, params: Option<ParameterSet>) -> Result<Self, FieldError> {
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let mut header: std::collections::BTreeMap<String, f64> = Default::default();
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for (ln, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    let key = k.trim().to_string();
                    let val: f64 = v.trim().parse().map_err(|_| FieldError::Csv {
                        line: ln + 1,
                        msg: format!("bad header value for {key}"),
                    })?;
                    header.insert(key, val);
                }
                continue;
            }
            if line.starts_with('r') {
                continue; // column header
            }
            let (a, b) = line.split_once(',').ok_or(FieldError::Csv {
                line: ln + 1,
                msg: "expected two comma-separated columns".into(),
            })?;
            let r: f64 = a.trim().parse().map_err(|_| FieldError::Csv {
                line: ln + 1,
                msg: "bad radius".into(),
            })?;
            let v: f64 = b.trim().parse().map_err(|_| FieldError::Csv {
                line: ln + 1,
                msg: "bad value".into(),
            })?;
            grid.push(r);
            values.push(v);
        }
        let params = match params {
            Some(p) => p,
            None => {
                let get = |k: &str| {
                    header.get(k).copied().ok_or_else(|| FieldError::Csv {
                        line: 0,
                        msg: format!("missing header key {k} and no parameter override"),
                    })
                };
                crate::params::validate_parameters(
                    get("d")? as i64,
                    get("gamma")?,
                    get("beta")?,
                    get("m")?,
                )
                .map_err(|e| FieldError::Csv { line: 0, msg: e.to_string() })?
            }
        };
        let tail = match (header.get("tail_exponent"), header.get("tail_coefficient")) {
            (Some(e), Some(c)) => Some(PowerTail { exponent: *e, coefficient: *c }),
            _ => None,
        };
        Self::new(params, grid, values, tail)
    }
}

/// Indicator of the ball B_R sampled so the jump is resolved exactly: a
/// sample at R and a zero sample immediately after.
pub fn ball_indicator(params: ParameterSet, radius: f64, r_min: f64, points_per_decade: usize) -> RadialField {
    let mut grid = Vec::new();
    let mut values = Vec::new();
    let n = ((points_per_decade as f64) * (radius / r_min).log10()).ceil().max(4.0) as usize;
    for i in 0..=n {
        grid.push(r_min * (radius / r_min).powf(i as f64 / n as f64));
        values.push(1.0);
    }
    let eps = radius * 1e-12;
    grid.push(radius + eps);
    values.push(0.0);
    grid.push(radius * 1.5);
    values.push(0.0);
    RadialField::new(params, grid, values, None).expect("indicator construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::validate_parameters;
    use approx::assert_relative_eq;

    fn base() -> ParameterSet {
        validate_parameters(3, 0.0, 0.0, 2.0 / 3.0).unwrap()
    }

    #[test]
    fn indicator_masses() {
        let p = base();
        let f = ball_indicator(p, 1.0, 1e-3, 64);
        let four_pi_thirds = 4.0 * std::f64::consts::PI / 3.0;
        assert_relative_eq!(f.weighted_outer_mass(0.0).unwrap(), four_pi_thirds, max_relative = 1e-9);
        assert!(f.weighted_outer_mass(1.0).unwrap() < 1e-9);
        // outer mass from R=1/2: (4π/3)(1 - 1/8)
        assert_relative_eq!(
            f.weighted_outer_mass(0.5).unwrap(),
            four_pi_thirds * (1.0 - 0.125),
            max_relative = 1e-9
        );
    }

    #[test]
    fn weighted_volume_with_singular_weight() {
        // d=3, γ=1: ∫_{B_1} |x|^{-1} dx = 4π ∫_0^1 r dr = 2π
        let p = validate_parameters(3, 1.0, 0.0, 0.75).unwrap();
        let f = ball_indicator(p, 1.0, 1e-4, 32);
        assert_relative_eq!(
            f.weighted_outer_mass(0.0).unwrap(),
            2.0 * std::f64::consts::PI,
            max_relative = 1e-9
        );
    }

    #[test]
    fn power_law_cells_are_exact() {
        // f = r^{-4} on [0.1, 100] with tail: outer mass from R
        // = 4π ∫_R^∞ r^{-4} r^2 dr = 4π/R
        let p = base();
        let f = RadialField::sample(
            p,
            0.1,
            100.0,
            16,
            |r| r.powf(-4.0),
            Some(PowerTail { exponent: -4.0, coefficient: 1.0 }),
        )
        .unwrap();
        for rr in [0.1, 1.0, 3.3, 50.0, 1000.0] {
            assert_relative_eq!(
                f.weighted_outer_mass(rr).unwrap(),
                4.0 * std::f64::consts::PI / rr,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn divergent_tail_reported() {
        let p = base();
        let f = RadialField::sample(
            p,
            0.1,
            10.0,
            8,
            |r| r.powf(-2.0),
            Some(PowerTail { exponent: -2.0, coefficient: 1.0 }),
        )
        .unwrap();
        assert!(matches!(
            f.weighted_outer_mass(0.0),
            Err(FieldError::DivergentTail { .. })
        ));
    }

    #[test]
    fn tail_mismatch_rejected() {
        let p = base();
        let r = RadialField::sample(
            p,
            0.1,
            10.0,
            8,
            |r| r.powf(-4.0),
            Some(PowerTail { exponent: -4.0, coefficient: 2.0 }),
        );
        assert!(matches!(r, Err(FieldError::TailMismatch { .. })));
    }

    #[test]
    fn csv_roundtrip() {
        let p = base();
        let f = RadialField::sample(
            p,
            0.01,
            100.0,
            12,
            |r| (1.0 + r * r).powf(-3.0),
            None,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.csv");
        f.write_csv(&path).unwrap();
        let g = RadialField::read_csv(&path, None).unwrap();
        assert_eq!(f.grid(), g.grid());
        assert_eq!(f.values(), g.values());
        assert_eq!(g.params().m(), p.m());
    }

    #[test]
    fn tail_exponent_fit() {
        let p = base();
        let f = RadialField::sample(p, 1.0, 1e6, 16, |r| 3.0 * r.powf(-4.2), None).unwrap();
        let (slope, resid) = f.fit_tail_exponent(2.0, 0).unwrap();
        assert_relative_eq!(slope, -4.2, epsilon = 1e-6);
        assert!(resid < 1e-9);
    }
}
