use crate::error::{Error, Result};

use super::functions::PiecewiseLinearFn;

/// Least concave majorant of a piecewise-linear function on its knot range.
pub fn lcm(f: &PiecewiseLinearFn) -> Result<PiecewiseLinearFn> {
    if f.knots().len() < 2 {
        return Err(Error::DegenerateInput("least concave majorant needs at least two knots".into()));
    }
    Ok(upper_hull(f.knots(), f.values()))
}

/// Upper convex hull of points with strictly increasing abscissae
/// (monotone chain). Collinear interior points are dropped.
pub fn upper_hull(xs: &[f64], ys: &[f64]) -> PiecewiseLinearFn {
    debug_assert_eq!(xs.len(), ys.len());
    let mut hx: Vec<f64> = Vec::with_capacity(xs.len().min(64));
    let mut hy: Vec<f64> = Vec::with_capacity(xs.len().min(64));
    for (&x, &y) in xs.iter().zip(ys) {
        while hx.len() >= 2 {
            let k = hx.len();
            let (ox, oy, ax, ay) = (hx[k - 2], hy[k - 2], hx[k - 1], hy[k - 1]);
            // drop the middle point when it is on or below the chord
            if (ax - ox) * (y - oy) - (ay - oy) * (x - ox) >= 0.0 {
                hx.pop();
                hy.pop();
            } else {
                break;
            }
        }
        hx.push(x);
        hy.push(y);
    }
    let slopes = hx.windows(2).zip(hy.windows(2)).map(|(a, b)| (b[1] - b[0]) / (a[1] - a[0])).collect();
    PiecewiseLinearFn::concave_unchecked(hx, hy, slopes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plf(x: &[f64], y: &[f64]) -> PiecewiseLinearFn {
        PiecewiseLinearFn::new(x.to_vec(), y.to_vec()).unwrap()
    }

    #[test]
    fn hand_hull() {
        let h = lcm(&plf(&[0.0, 1.0, 2.0, 3.0], &[0.0, 2.0, 1.0, 3.0])).unwrap();
        assert_eq!(h.knots(), &[0.0, 1.0, 3.0]);
        assert_eq!(h.values(), &[0.0, 2.0, 3.0]);
        assert_eq!(h.eval(2.0), 2.5);
        assert_eq!(h.right_derivative(1.0), 0.5);
        assert_eq!(h.right_derivative(2.9), 0.5);
        assert_eq!(h.right_derivative(0.3), 2.0);
    }

    #[test]
    fn concave_and_linear_inputs_are_fixed_points() {
        let c = plf(&[0.0, 1.0, 2.0, 4.0], &[0.0, 3.0, 5.0, 6.0]);
        let h = lcm(&c).unwrap();
        assert_eq!(h.knots(), c.knots());
        assert_eq!(h.values(), c.values());
        let l = lcm(&plf(&[0.0, 5.0], &[0.0, 5.0])).unwrap();
        for x in [0.0, 1.3, 4.99] {
            assert_eq!(l.right_derivative(x), 1.0);
            assert_eq!(l.eval(x), x);
        }
        assert!(lcm(&plf(&[1.0], &[1.0])).is_err());
    }
}
