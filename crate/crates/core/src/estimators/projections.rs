//! The isotonic inverse estimator and the informed projections.
//!
//! `U_n` is convex between consecutive observations (its derivative `V_n`
//! increases there), so every vertex of its least concave majorant is `0`,
//! an observation, or the support bound. The majorants below are therefore
//! exact; evaluation grids only decide where the results are tabulated.

use crate::error::{Error, Result};
use crate::model::Interval;
use crate::sampling::SampleBatch;

use super::empirical::EmpiricalU;
use super::functions::{EvalGrid, Partition, PiecewiseLinearFn, StepFn};
use super::lcm::upper_hull;

/// `U_n` of one batch with its majorant, shared by all estimators.
#[derive(Debug, Clone)]
pub struct EmpiricalFit {
    u: EmpiricalU,
    u_obs: Vec<f64>,
    support: f64,
    hull: PiecewiseLinearFn,
}

impl EmpiricalFit {
    pub fn new(batch: &SampleBatch, support: f64) -> Result<Self> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let zmax = batch.z[batch.n() - 1];
        if !(support.is_finite() && support > 0.0 && support >= zmax) {
            return Err(Error::InvalidArgument(format!(
                "support bound {support} must cover the largest observation {zmax}"
            )));
        }
        let u = EmpiricalU::new(&batch.z);
        let u_obs = u.at_observations();
        let (xs, ys) = vertex_candidates(&batch.z, &u_obs, support, u.total(), |_| true);
        let hull = upper_hull(&xs, &ys);
        Ok(EmpiricalFit { u, u_obs, support, hull })
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn u(&self) -> &EmpiricalU {
        &self.u
    }

    /// `U_n` at the (sorted) observations.
    pub fn u_at_observations(&self) -> &[f64] {
        &self.u_obs
    }

    /// Least concave majorant `U*_n` on `[0, M]`.
    pub fn u_lcm(&self) -> &PiecewiseLinearFn {
        &self.hull
    }

    pub fn iie_at(&self, x: f64) -> f64 {
        self.hull.right_derivative(x)
    }

    /// `(U_n(hi) - U_n(lo)) / (hi - lo)`.
    pub fn slope(&self, lo: f64, hi: f64) -> f64 {
        (self.u.eval(hi) - self.u.eval(lo)) / (hi - lo)
    }

    /// Constant value of the projected IIE on the flat interval.
    pub fn projected_iie_level(&self, flat: Interval) -> f64 {
        (self.hull.eval(flat.hi) - self.hull.eval(flat.lo)) / flat.len()
    }

    /// Majorant of `U_n` with its graph over the flat interval replaced by the chord.
    pub fn chord_lcm(&self, flat: Interval) -> PiecewiseLinearFn {
        let z = self.u.observations();
        let (mut xs, mut ys) =
            vertex_candidates(z, &self.u_obs, self.support, self.u.total(), |x| x <= flat.lo || x >= flat.hi);
        insert_point(&mut xs, &mut ys, flat.lo, self.u.eval(flat.lo));
        insert_point(&mut xs, &mut ys, flat.hi, self.u.eval(flat.hi));
        upper_hull(&xs, &ys)
    }

    /// Majorants of `U_n` restricted to `[0, x̲]` and to `[x̄, M]`.
    pub fn restricted_lcms(&self, flat: Interval) -> (PiecewiseLinearFn, PiecewiseLinearFn) {
        let z = self.u.observations();
        let mut lx = vec![0.0];
        let mut ly = vec![0.0];
        for (&x, &y) in z.iter().zip(&self.u_obs) {
            if x < flat.lo && x > lx[lx.len() - 1] {
                lx.push(x);
                ly.push(y);
            }
        }
        if flat.lo > 0.0 {
            lx.push(flat.lo);
            ly.push(self.u.eval(flat.lo));
        }
        let left = upper_hull(&lx, &ly);

        let mut rx = vec![flat.hi];
        let mut ry = vec![self.u.eval(flat.hi)];
        for (&x, &y) in z.iter().zip(&self.u_obs) {
            if x > flat.hi && x < self.support && x > rx[rx.len() - 1] {
                rx.push(x);
                ry.push(y);
            }
        }
        if self.support > flat.hi {
            rx.push(self.support);
            ry.push(self.u.total());
        }
        (left, upper_hull(&rx, &ry))
    }

    pub fn iie_step(&self, grid: &EvalGrid) -> Result<StepFn> {
        let values = grid.points().iter().map(|&p| self.iie_at(p)).collect();
        StepFn::new(grid.points().to_vec(), values)
    }

    pub fn projected_iie_step(&self, flat: Interval, grid: &EvalGrid) -> Result<StepFn> {
        check_flat(flat, grid)?;
        let level = self.projected_iie_level(flat);
        let values = grid
            .points()
            .iter()
            .map(|&p| if p >= flat.lo && p < flat.hi { level } else { self.iie_at(p) })
            .collect();
        StepFn::new(grid.points().to_vec(), values)
    }

    pub fn projected_naive_step(&self, flat: Interval, grid: &EvalGrid) -> Result<StepFn> {
        check_flat(flat, grid)?;
        let h = self.chord_lcm(flat);
        let values = grid.points().iter().map(|&p| h.right_derivative(p)).collect();
        StepFn::new(grid.points().to_vec(), values)
    }

    pub fn slope_step(&self, partition: &Partition) -> Result<StepFn> {
        let bp = partition.breakpoints();
        if bp[bp.len() - 1] > self.support + 1e-12 {
            return Err(Error::InvalidArgument("partition exceeds the support bound".into()));
        }
        let mut values: Vec<f64> = partition.cells().map(|(a, b)| self.slope(a, b)).collect();
        values.push(0.0);
        StepFn::new(bp.to_vec(), values)
    }
}

fn check_flat(flat: Interval, grid: &EvalGrid) -> Result<()> {
    if flat.hi > grid.support() {
        return Err(Error::InvalidInterval { lo: flat.lo, hi: flat.hi, reason: "flat interval exceeds the support".into() });
    }
    if !(grid.contains(flat.lo) && grid.contains(flat.hi)) {
        return Err(Error::InvalidArgument("evaluation grid must contain both flat endpoints".into()));
    }
    Ok(())
}

/// `(0, 0)`, the kept observations with their `U_n` values, and `(end, end_value)`,
/// with duplicate abscissae removed.
fn vertex_candidates<F: Fn(f64) -> bool>(
    z: &[f64],
    u: &[f64],
    end: f64,
    end_value: f64,
    keep: F,
) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(z.len() + 2);
    let mut ys = Vec::with_capacity(z.len() + 2);
    xs.push(0.0);
    ys.push(0.0);
    for (&x, &y) in z.iter().zip(u) {
        if x > xs[xs.len() - 1] && x < end && keep(x) {
            xs.push(x);
            ys.push(y);
        }
    }
    if end > xs[xs.len() - 1] {
        xs.push(end);
        ys.push(end_value);
    }
    (xs, ys)
}

fn insert_point(xs: &mut Vec<f64>, ys: &mut Vec<f64>, x: f64, y: f64) {
    match xs.binary_search_by(|p| p.total_cmp(&x)) {
        Ok(i) => ys[i] = y,
        Err(i) => {
            xs.insert(i, x);
            ys.insert(i, y);
        }
    }
}

/// Isotonic inverse estimator: right derivative of the majorant of `U_n`.
pub fn iie(batch: &SampleBatch, grid: &EvalGrid) -> Result<StepFn> {
    EmpiricalFit::new(batch, grid.support())?.iie_step(grid)
}

/// IIE with its values on the flat interval replaced by their average.
pub fn projected_iie(batch: &SampleBatch, flat: Interval, grid: &EvalGrid) -> Result<StepFn> {
    EmpiricalFit::new(batch, grid.support())?.projected_iie_step(flat, grid)
}

/// Cellwise slopes of `U_n` over a partition ("empirical slope").
pub fn empirical_slope(batch: &SampleBatch, partition: &Partition) -> Result<StepFn> {
    let bp = partition.breakpoints();
    EmpiricalFit::new(batch, bp[bp.len() - 1])?.slope_step(partition)
}

/// Projection of the naive estimator onto functions constant on the flat interval.
pub fn projected_naive(batch: &SampleBatch, flat: Interval, grid: &EvalGrid) -> Result<StepFn> {
    EmpiricalFit::new(batch, grid.support())?.projected_naive_step(flat, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::empirical::u_n;

    fn batch(z: &[f64]) -> SampleBatch {
        SampleBatch::from_values(z.to_vec(), "t").unwrap()
    }

    #[test]
    fn single_observation_iie_is_chord_slope() {
        // U_n = 2(sqrt(z0) - sqrt(z0 - x)) is convex on [0, z0]; its majorant
        // is the chord, so the IIE is 2/sqrt(z0) below z0 and 0 above
        let b = batch(&[4.0]);
        let g = EvalGrid::new(5.0, 50, &b.z).unwrap();
        let v = iie(&b, &g).unwrap();
        for &p in g.points() {
            let expect = if p < 4.0 { 1.0 } else { 0.0 };
            assert!((v.eval(p) - expect).abs() < 1e-15, "{p}");
        }
    }

    #[test]
    fn two_point_examples() {
        let b = batch(&[1.0, 4.0]);
        let g = EvalGrid::new(4.0, 4000, &b.z).unwrap();
        let v = iie(&b, &g).unwrap();
        assert!(v.values().windows(2).all(|w| w[1] <= w[0]));
        assert!((v.integrate(0.0, 4.0) - 3.0).abs() < 1e-12);

        let flat = Interval::new(1.0, 4.0).unwrap();
        let fit = EmpiricalFit::new(&b, 4.0).unwrap();
        let h = fit.u_lcm();
        let p = projected_iie(&b, flat, &g).unwrap();
        assert!((p.eval(2.0) - (h.eval(4.0) - h.eval(1.0)) / 3.0).abs() < 1e-15);

        let part = Partition::new(vec![0.0, 1.0, 4.0], flat).unwrap();
        let s = empirical_slope(&b, &part).unwrap();
        assert!((s.eval(1.5) - 0.577_350_269_189_625_7).abs() < 1e-12);
        assert!((s.eval(0.5) - u_n(&b, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn slope_is_zero_above_data() {
        let b = batch(&[0.5, 1.0]);
        let part = Partition::around_flat(Interval::new(2.0, 3.0).unwrap(), 5.0).unwrap();
        let s = empirical_slope(&b, &part).unwrap();
        assert_eq!(s.eval(3.5), 0.0);
    }

    #[test]
    fn projected_naive_is_constant_on_flat() {
        let b = batch(&[0.3, 1.2, 2.2, 2.4, 2.9, 3.3, 5.0]);
        let flat = Interval::new(2.0, 3.0).unwrap();
        let g = EvalGrid::new(6.0, 600, &[2.0, 3.0]).unwrap();
        let v = projected_naive(&b, flat, &g).unwrap();
        let inside: Vec<f64> = g.points().iter().filter(|p| **p >= 2.0 && **p < 3.0).map(|p| v.eval(*p)).collect();
        assert!(inside.iter().all(|x| *x == inside[0]));
    }

    #[test]
    fn errors() {
        let e = batch(&[]);
        let g = EvalGrid::new(4.0, 4, &[]).unwrap();
        assert!(matches!(iie(&e, &g), Err(Error::EmptyBatch)));
        let b = batch(&[1.0, 5.0]);
        assert!(iie(&b, &g).is_err());
        let b = batch(&[1.0]);
        let off = EvalGrid::new(4.0, 4, &[]).unwrap();
        assert!(projected_naive(&b, Interval::new(1.5, 2.5).unwrap(), &off).is_err());
    }
}
