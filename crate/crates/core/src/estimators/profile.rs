//! Profile computation of the projected naive estimator: for a fixed level
//! `a` on the flat interval the best function is explicit, and the level is
//! then chosen by a one-dimensional search.

use crate::error::{Error, Result};
use crate::model::Interval;
use crate::sampling::SampleBatch;

use super::functions::{EvalGrid, PiecewiseLinearFn, StepFn};
use super::projections::EmpiricalFit;

const GOLDEN_TOL: f64 = 1e-8;
const PROBE_POINTS: usize = 50;
const FALLBACK_POINTS: usize = 1000;

#[derive(Debug, Clone)]
pub struct ProfileResult {
    pub estimate: StepFn,
    pub level: f64,
    pub objective: f64,
    /// Last grid index left of the flat interval where the left majorant
    /// slope exceeds the level.
    pub i_upper: Option<usize>,
    /// First grid index from the right end of the flat interval on where the
    /// right majorant slope is below the level.
    pub i_lower: Option<usize>,
    pub multimodal: bool,
    pub evaluations: usize,
}

/// Profile problem for one batch and flat interval.
#[derive(Debug, Clone)]
pub struct ProfileProblem {
    flat: Interval,
    left: PiecewiseLinearFn,
    right: PiecewiseLinearFn,
    flat_increment: f64,
    upper: f64,
}

impl ProfileProblem {
    pub fn new(fit: &EmpiricalFit, flat: Interval) -> Result<Self> {
        if flat.hi > fit.support() {
            return Err(Error::InvalidInterval { lo: flat.lo, hi: flat.hi, reason: "flat interval exceeds the support".into() });
        }
        let (left, right) = fit.restricted_lcms(flat);
        let flat_increment = fit.u().eval(flat.hi) - fit.u().eval(flat.lo);
        Ok(ProfileProblem { flat, left, right, flat_increment, upper: fit.iie_at(0.0) })
    }

    /// `Q^{V_n}(V^a)`, exact: on a majorant segment `[p, q]` with clipped
    /// slope `v` the contribution is `(q - p) v² - 2 v (U_n(q) - U_n(p))`.
    pub fn objective(&self, a: f64) -> f64 {
        let seg = |h: &PiecewiseLinearFn, clip: &dyn Fn(f64) -> f64| -> f64 {
            h.knots()
                .windows(2)
                .zip(h.values().windows(2))
                .zip(h.slopes())
                .map(|((k, u), s)| {
                    let v = clip(*s);
                    (k[1] - k[0]) * v * v - 2.0 * v * (u[1] - u[0])
                })
                .sum()
        };
        let left = seg(&self.left, &|s| s.max(a));
        let right = seg(&self.right, &|s| s.min(a));
        left + self.flat.len() * a * a - 2.0 * a * self.flat_increment + right
    }

    /// `V^a` tabulated on the grid.
    pub fn level_function(&self, a: f64, grid: &EvalGrid) -> Result<(StepFn, Option<usize>, Option<usize>)> {
        let pts = grid.points();
        let flat = self.flat;
        // left restricted majorant, clipped from below at a
        let left: Vec<f64> = pts
            .iter()
            .take_while(|p| **p < flat.lo)
            .map(|&p| self.left.right_derivative(p).max(a))
            .collect();
        let i_upper = left.iter().rposition(|v| *v > a);
        // right restricted majorant, clipped from above at a
        let start = pts.partition_point(|p| *p < flat.hi);
        let right: Vec<f64> = pts[start..].iter().map(|&p| self.right.right_derivative(p).min(a)).collect();
        let i_lower = right.iter().position(|v| *v < a).map(|k| k + start);

        let mut values = Vec::with_capacity(pts.len());
        values.extend_from_slice(&left);
        values.extend(std::iter::repeat_n(a, start - left.len()));
        values.extend_from_slice(&right);
        Ok((StepFn::new(pts.to_vec(), values)?, i_upper, i_lower))
    }

    /// Minimizes the objective over `a ∈ [0, iie(0)]`.
    pub fn minimize(&self) -> Result<(f64, f64, bool, usize)> {
        let hi = self.upper;
        if !(hi.is_finite() && hi >= 0.0) {
            return Err(Error::OptimizerFailure(format!("invalid search bracket [0, {hi}]")));
        }
        if hi == 0.0 {
            return Ok((0.0, self.objective(0.0), false, 1));
        }
        let probe: Vec<f64> = (0..PROBE_POINTS).map(|k| hi * k as f64 / (PROBE_POINTS - 1) as f64).collect();
        let qs: Vec<f64> = probe.iter().map(|&a| self.objective(a)).collect();
        let mut evaluations = PROBE_POINTS;
        let multimodal = count_local_minima(&qs) > 1;
        let (grid, values) = if multimodal {
            let g: Vec<f64> = (0..FALLBACK_POINTS).map(|k| hi * k as f64 / (FALLBACK_POINTS - 1) as f64).collect();
            let v: Vec<f64> = g.iter().map(|&a| self.objective(a)).collect();
            evaluations += FALLBACK_POINTS;
            (g, v)
        } else {
            (probe, qs)
        };
        let best = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .ok_or_else(|| Error::OptimizerFailure("empty probe".into()))?;
        let lo = grid[best.saturating_sub(1)];
        let up = grid[(best + 1).min(grid.len() - 1)];
        let (a, q, n) = golden_section(|a| self.objective(a), lo, up, GOLDEN_TOL);
        evaluations += n;
        if !q.is_finite() {
            return Err(Error::OptimizerFailure("objective is not finite".into()));
        }
        Ok((a, q, multimodal, evaluations))
    }
}

fn count_local_minima(q: &[f64]) -> usize {
    // count switches from strictly decreasing to strictly increasing,
    // with plateaus carried over
    let mut count = 0;
    let mut going_down = true;
    for w in q.windows(2) {
        if w[1] < w[0] {
            going_down = true;
        } else if w[1] > w[0] && going_down {
            count += 1;
            going_down = false;
        }
    }
    if going_down {
        count += 1;
    }
    count
}

/// Golden-section search on `[a, b]`; returns the minimizer, its value and
/// the number of evaluations.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64, usize) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut n = 2;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        n += 1;
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    // the bracket ends may beat the interior when the minimum sits on them
    let mut best = (x, fx);
    for e in [a, b] {
        let fe = f(e);
        if fe < best.1 {
            best = (e, fe);
        }
    }
    (best.0, best.1, n + 3)
}

/// Projected naive estimator by the profile route: the level-`a` solution
/// uses the majorants of `U_n` on `[0, x̲]` (clipped below at `a`) and on
/// `[x̄, M]` (clipped above at `a`); `a` minimizes `Q^{V_n}(V^a)`.
pub fn profile_projection(batch: &SampleBatch, flat: Interval, grid: &EvalGrid) -> Result<ProfileResult> {
    let fit = EmpiricalFit::new(batch, grid.support())?;
    profile_projection_fit(&fit, flat, grid)
}

pub fn profile_projection_fit(fit: &EmpiricalFit, flat: Interval, grid: &EvalGrid) -> Result<ProfileResult> {
    if !(grid.contains(flat.lo) && grid.contains(flat.hi)) {
        return Err(Error::InvalidArgument("evaluation grid must contain both flat endpoints".into()));
    }
    let problem = ProfileProblem::new(fit, flat)?;
    let (level, objective, multimodal, evaluations) = problem.minimize()?;
    let (estimate, i_upper, i_lower) = problem.level_function(level, grid)?;
    Ok(ProfileResult { estimate, level, objective, i_upper, i_lower, multimodal, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::projections::projected_naive;

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, fx, _) = golden_section(|x| (x - 0.3) * (x - 0.3), 0.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-9);
        assert!(fx < 1e-18);
        let (x, _, _) = golden_section(|x| x, 0.0, 1.0, 1e-10);
        assert_eq!(x, 0.0);
    }

    #[test]
    fn local_minima_counter() {
        assert_eq!(count_local_minima(&[3.0, 2.0, 1.0, 2.0]), 1);
        assert_eq!(count_local_minima(&[1.0, 2.0, 3.0]), 1);
        assert_eq!(count_local_minima(&[3.0, 2.0, 1.0]), 1);
        assert_eq!(count_local_minima(&[3.0, 1.0, 2.0, 0.0, 1.0]), 2);
    }

    #[test]
    fn agrees_with_chord_construction() {
        let b = SampleBatch::from_values(vec![1.0, 4.0], "t").unwrap();
        let flat = Interval::new(2.0, 3.0).unwrap();
        let g = EvalGrid::new(5.0, 500, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = profile_projection(&b, flat, &g).unwrap();
        let n = projected_naive(&b, flat, &g).unwrap();
        assert!(p.estimate.sup_distance(&n) < 1e-6 + g.mesh(), "{}", p.estimate.sup_distance(&n));
        assert!(!p.multimodal);
    }
}
