use std::io::Write;

use crate::error::{Error, Result};
use crate::model::Interval;

/// Right-continuous step function: `values[i]` holds on `[knots[i], knots[i+1])`,
/// the last value holds from the last knot on, and the first value is also
/// used to the left of the first knot.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFn {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl StepFn {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.is_empty() || knots.len() != values.len() {
            return Err(Error::DegenerateInput("step function needs matching, nonempty knots and values".into()));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::DegenerateInput("step function knots must be strictly increasing".into()));
        }
        if knots.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("step function entries must be finite".into()));
        }
        Ok(StepFn { knots, values })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn piece(&self, x: f64) -> usize {
        self.knots.partition_point(|k| *k <= x).saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.values[self.piece(x)]
    }

    /// Pieces `(lo, hi, value)` clipped to `[a, b]`.
    pub fn pieces(&self, a: f64, b: f64) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        if b <= a {
            return out;
        }
        let mut i = self.piece(a);
        let mut lo = a;
        loop {
            let hi = self.knots.get(i + 1).copied().unwrap_or(f64::INFINITY).min(b);
            if hi > lo {
                out.push((lo, hi, self.values[i]));
            }
            if hi >= b {
                break;
            }
            lo = hi;
            i += 1;
        }
        out
    }

    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        self.pieces(a, b).iter().map(|(l, h, v)| (h - l) * v).sum()
    }

    /// Largest absolute difference at the union of both knot sets.
    pub fn sup_distance(&self, other: &StepFn) -> f64 {
        self.knots
            .iter()
            .chain(other.knots.iter())
            .map(|&x| (self.eval(x) - other.eval(x)).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `knot,value,estimator_id`.
    pub fn write_csv<W: Write>(&self, w: W, estimator_id: &str) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["knot", "value", "estimator_id"])?;
        for (k, v) in self.knots.iter().zip(&self.values) {
            wr.write_record([k.to_string(), v.to_string(), estimator_id.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Continuous piecewise-linear function given by its values at the knots.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearFn {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    concave: bool,
}

impl PiecewiseLinearFn {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() || knots.is_empty() {
            return Err(Error::DegenerateInput("piecewise-linear function needs matching, nonempty knots".into()));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::DegenerateInput("piecewise-linear knots must be strictly increasing".into()));
        }
        let slopes = knots
            .windows(2)
            .zip(values.windows(2))
            .map(|(k, v)| (v[1] - v[0]) / (k[1] - k[0]))
            .collect();
        Ok(PiecewiseLinearFn { knots, values, slopes, concave: false })
    }

    /// Marks the function concave after checking that slopes do not increase
    /// by more than `1e-12`.
    pub fn into_concave(mut self) -> Result<Self> {
        if self.slopes.windows(2).any(|s| s[1] > s[0] + 1e-12 * (1.0 + s[0].abs())) {
            return Err(Error::DegenerateInput("function is not concave".into()));
        }
        self.concave = true;
        Ok(self)
    }

    pub(crate) fn concave_unchecked(knots: Vec<f64>, values: Vec<f64>, slopes: Vec<f64>) -> Self {
        PiecewiseLinearFn { knots, values, slopes, concave: true }
    }

    pub fn is_concave(&self) -> bool {
        self.concave
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Linear interpolation; constant continuation outside the knot range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.knots.len();
        if x <= self.knots[0] {
            return self.values[0];
        }
        if x >= self.knots[n - 1] {
            return self.values[n - 1];
        }
        let i = self.knots.partition_point(|k| *k <= x) - 1;
        self.values[i] + self.slopes[i] * (x - self.knots[i])
    }

    /// Right derivative. Left of the first knot the first slope is used; from
    /// the last knot on the function is constant, so the derivative is 0.
    pub fn right_derivative(&self, x: f64) -> f64 {
        if self.slopes.is_empty() || x >= self.knots[self.knots.len() - 1] {
            return 0.0;
        }
        let i = self.knots.partition_point(|k| *k <= x).saturating_sub(1);
        self.slopes[i]
    }
}

/// Evaluation points on `[0, M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalGrid {
    points: Vec<f64>,
    resolution: usize,
}

impl EvalGrid {
    /// Uniform grid with `resolution` cells on `[0, support]` merged with the
    /// mandatory points (observations, flat endpoints, evaluation targets).
    pub fn new(support: f64, resolution: usize, mandatory: &[f64]) -> Result<Self> {
        if !(support > 0.0 && support.is_finite()) {
            return Err(Error::InvalidArgument("grid support must be positive".into()));
        }
        if resolution == 0 {
            return Err(Error::InvalidArgument("grid resolution must be positive".into()));
        }
        let h = support / resolution as f64;
        let mut points: Vec<f64> = (0..=resolution).map(|i| if i == resolution { support } else { i as f64 * h }).collect();
        points.extend(mandatory.iter().copied().filter(|p| *p >= 0.0 && *p <= support));
        points.sort_by(f64::total_cmp);
        points.dedup();
        Ok(EvalGrid { points, resolution })
    }

    /// Grid holding only `0`, `support` and the given points. Estimators built
    /// on it are exact, but the mesh bound does not hold.
    pub fn sparse(support: f64, points: &[f64]) -> Result<Self> {
        if !(support > 0.0 && support.is_finite()) {
            return Err(Error::InvalidArgument("grid support must be positive".into()));
        }
        let mut v = vec![0.0, support];
        v.extend(points.iter().copied().filter(|p| *p >= 0.0 && *p <= support));
        v.sort_by(f64::total_cmp);
        v.dedup();
        Ok(EvalGrid { points: v, resolution: 0 })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn support(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn mesh(&self) -> f64 {
        self.points.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.points.binary_search_by(|p| p.total_cmp(&x)).is_ok()
    }
}

/// Partition of `[0, M]` into cells, one of which is the flat interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    breakpoints: Vec<f64>,
    flat_cell: usize,
}

impl Partition {
    pub fn new(breakpoints: Vec<f64>, flat: Interval) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints[0] != 0.0 {
            return Err(Error::InvalidArgument("partition must start at 0 and have a cell".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("partition breakpoints must be strictly increasing".into()));
        }
        let flat_cell = breakpoints
            .windows(2)
            .position(|w| w[0] == flat.lo && w[1] == flat.hi)
            .ok_or_else(|| Error::InvalidArgument("flat interval must be exactly one partition cell".into()))?;
        Ok(Partition { breakpoints, flat_cell })
    }

    /// Flat cell plus cells of the same width on both sides (edge cells may
    /// be shorter).
    pub fn around_flat(flat: Interval, support: f64) -> Result<Self> {
        if flat.hi > support {
            return Err(Error::InvalidInterval { lo: flat.lo, hi: flat.hi, reason: "flat interval exceeds the support".into() });
        }
        let w = flat.len();
        let mut left = vec![flat.lo];
        let mut x = flat.lo;
        while x > 0.0 {
            x = (x - w).max(0.0);
            // avoid slivers from rounding
            if x < 1e-12 * w {
                x = 0.0;
            }
            left.push(x);
        }
        left.reverse();
        let mut bp = left;
        let mut x = flat.hi;
        bp.push(x);
        while x < support {
            x = (x + w).min(support);
            if support - x < 1e-12 * w {
                x = support;
            }
            bp.push(x);
        }
        bp.dedup();
        Partition::new(bp, flat)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn flat_cell(&self) -> usize {
        self.flat_cell
    }

    pub fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.breakpoints.windows(2).map(|w| (w[0], w[1]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_eval_and_integral() {
        let s = StepFn::new(vec![0.0, 1.0, 3.0], vec![2.0, 1.0, 0.0]).unwrap();
        assert_eq!(s.eval(-1.0), 2.0);
        assert_eq!(s.eval(1.0), 1.0);
        assert_eq!(s.eval(2.999), 1.0);
        assert_eq!(s.eval(10.0), 0.0);
        assert_eq!(s.integrate(0.5, 4.0), 1.0 + 2.0);
        assert!(StepFn::new(vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn grid_contains_mandatory_points() {
        let g = EvalGrid::new(10.0, 5, &[2.5, 3.3, 11.0]).unwrap();
        assert!(g.contains(2.5) && g.contains(3.3) && g.contains(0.0) && g.contains(10.0));
        assert!(!g.contains(11.0));
        assert!(g.mesh() <= 2.0 + 1e-15);
    }

    #[test]
    fn default_partition() {
        let p = Partition::around_flat(Interval::new(2.0, 3.0).unwrap(), 5.5).unwrap();
        assert_eq!(p.breakpoints(), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 5.5]);
        assert_eq!(p.flat_cell(), 2);
        let p = Partition::around_flat(Interval::new(0.5, 1.5).unwrap(), 2.0).unwrap();
        assert_eq!(p.breakpoints(), &[0.0, 0.5, 1.5, 2.0]);
        assert!(Partition::new(vec![0.0, 1.0, 2.0], Interval::new(0.5, 2.0).unwrap()).is_err());
    }
}
