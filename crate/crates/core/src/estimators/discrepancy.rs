use crate::error::Result;
use crate::model::Interval;
use crate::quadrature::QuadratureSpec;

use super::empirical::EmpiricalU;
use super::functions::{Partition, PiecewiseLinearFn, StepFn};

/// A function known through a closed-form primitive.
pub trait Primitive {
    fn primitive(&self, x: f64) -> f64;
}

impl Primitive for EmpiricalU {
    fn primitive(&self, x: f64) -> f64 {
        self.eval(x)
    }
}

impl Primitive for PiecewiseLinearFn {
    fn primitive(&self, x: f64) -> f64 {
        self.eval(x)
    }
}

/// `Q^f(h) = ∫ h (h - 2f)` over `domain`, exact from the primitive of `f`:
/// each piece contributes `len c² - 2c (F(r) - F(l))`.
pub fn q_discrepancy_exact<P: Primitive + ?Sized>(h: &StepFn, f: &P, domain: Interval) -> f64 {
    h.pieces(domain.lo, domain.hi)
        .iter()
        .map(|&(l, r, c)| (r - l) * c * c - 2.0 * c * (f.primitive(r) - f.primitive(l)))
        .sum()
}

/// `Q^f(h)` by quadrature of `f` on each piece of `h`.
pub fn q_discrepancy<F: Fn(f64) -> f64>(h: &StepFn, f_eval: F, domain: Interval, quad: &QuadratureSpec) -> Result<f64> {
    let mut acc = 0.0;
    for (l, r, c) in h.pieces(domain.lo, domain.hi) {
        if c == 0.0 {
            continue;
        }
        acc += (r - l) * c * c - 2.0 * c * quad.integrate(&f_eval, l, r)?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeId {
    /// Nonnegative, nonincreasing.
    V,
    /// Nonnegative, constant on every partition cell.
    VBar,
    /// Nonnegative, nonincreasing, constant on the flat interval.
    VFlat,
}

const MONO_TOL: f64 = 1e-12;

/// Checks the defining constraints of a cone on the knots of `v`.
pub fn validate_cone(v: &StepFn, cone: ConeId, flat: Interval, partition: &Partition) -> bool {
    let nonneg = v.values().iter().all(|x| *x >= 0.0);
    let monotone = || v.values().windows(2).all(|w| w[1] <= w[0] + MONO_TOL * (1.0 + w[0].abs()));
    match cone {
        ConeId::V => nonneg && monotone(),
        ConeId::VFlat => {
            let level = v.eval(flat.lo);
            nonneg
                && monotone()
                && v.knots().iter().filter(|k| **k > flat.lo && **k < flat.hi).all(|k| v.eval(*k) == level)
        }
        ConeId::VBar => {
            nonneg
                && partition.cells().all(|(a, b)| {
                    let level = v.eval(a);
                    v.knots().iter().filter(|k| **k > a && **k < b).all(|k| v.eval(*k) == level)
                })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_examples() {
        let q = QuadratureSpec::default();
        let one = StepFn::new(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        let d = Interval::new(0.0, 2.0).unwrap();
        let v = q_discrepancy(&one, |x| if x < 1.0 { 1.0 } else { 0.0 }, d, &q).unwrap();
        assert!((v + 1.0).abs() < 1e-12);
        let zero = StepFn::new(vec![0.0], vec![0.0]).unwrap();
        assert_eq!(q_discrepancy(&zero, |x| x, d, &q).unwrap(), 0.0);

        let u = EmpiricalU::new(&[1.0, 4.0]);
        let c = 0.7;
        let h = StepFn::new(vec![0.0, 2.0, 3.0], vec![0.0, c, 0.0]).unwrap();
        let exact = q_discrepancy_exact(&h, &u, Interval::new(0.0, 5.0).unwrap());
        assert!((exact - (c * c - 2.0 * c * (u.eval(3.0) - u.eval(2.0)))).abs() < 1e-15);
    }

    #[test]
    fn cone_membership() {
        let flat = Interval::new(2.0, 3.0).unwrap();
        let part = Partition::around_flat(flat, 5.0).unwrap();
        let dec = StepFn::new(vec![0.0, 2.0, 3.0, 4.0], vec![3.0, 2.0, 1.0, 0.0]).unwrap();
        assert!(validate_cone(&dec, ConeId::V, flat, &part));
        assert!(validate_cone(&dec, ConeId::VFlat, flat, &part));
        let inc = StepFn::new(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        assert!(!validate_cone(&inc, ConeId::V, flat, &part));
        let cells = StepFn::new(vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![1.0, 2.0, 0.5, 0.7, 0.0]).unwrap();
        assert!(validate_cone(&cells, ConeId::VBar, flat, &part));
        assert!(!validate_cone(&cells, ConeId::V, flat, &part));
        let split = StepFn::new(vec![0.0, 2.5], vec![1.0, 0.5]).unwrap();
        assert!(!validate_cone(&split, ConeId::VFlat, flat, &part));
        assert!(!validate_cone(&split, ConeId::VBar, flat, &part));
    }
}
