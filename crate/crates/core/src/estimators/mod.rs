//! Estimators of `V` (and so of the sphere-radius cdf) from a sample of
//! squared section radii.

mod discrepancy;
mod empirical;
mod functions;
mod lcm;
mod profile;
mod projections;

use std::fmt;
use std::str::FromStr;

pub use discrepancy::{q_discrepancy, q_discrepancy_exact, validate_cone, ConeId, Primitive};
pub use empirical::{naive_v, u_n, EmpiricalU};
pub use functions::{EvalGrid, Partition, PiecewiseLinearFn, StepFn};
pub use lcm::{lcm, upper_hull};
pub use profile::{golden_section, profile_projection, profile_projection_fit, ProfileProblem, ProfileResult};
pub use projections::{empirical_slope, iie, projected_iie, projected_naive, EmpiricalFit};

use crate::error::{Error, Result};
use crate::model::Interval;
use crate::sampling::SampleBatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorId {
    Iie,
    ProjectedIie,
    Slope,
    ProjectedNaive,
    Profile,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 5] =
        [EstimatorId::Iie, EstimatorId::ProjectedIie, EstimatorId::Slope, EstimatorId::ProjectedNaive, EstimatorId::Profile];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorId::Iie => "iie",
            EstimatorId::ProjectedIie => "proj-iie",
            EstimatorId::Slope => "slope",
            EstimatorId::ProjectedNaive => "proj-naive",
            EstimatorId::Profile => "profile",
        }
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EstimatorId::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown estimator `{s}`")))
    }
}

/// Computes one estimator on `grid` (the empirical slope uses the default
/// partition around the flat interval).
pub fn estimate(batch: &SampleBatch, id: EstimatorId, flat: Interval, grid: &EvalGrid) -> Result<StepFn> {
    let fit = EmpiricalFit::new(batch, grid.support())?;
    match id {
        EstimatorId::Iie => fit.iie_step(grid),
        EstimatorId::ProjectedIie => fit.projected_iie_step(flat, grid),
        EstimatorId::Slope => fit.slope_step(&Partition::around_flat(flat, grid.support())?),
        EstimatorId::ProjectedNaive => fit.projected_naive_step(flat, grid),
        EstimatorId::Profile => Ok(profile_projection_fit(&fit, flat, grid)?.estimate),
    }
}

/// Values of all estimators at one point `x` of the flat interval, without
/// tabulating on a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEstimates {
    pub iie: f64,
    pub projected_iie: f64,
    pub slope: f64,
    pub projected_naive: f64,
}

pub fn point_estimates(batch: &SampleBatch, flat: Interval, support: f64, x: f64) -> Result<PointEstimates> {
    let fit = EmpiricalFit::new(batch, support)?;
    if flat.hi > support {
        return Err(Error::InvalidInterval { lo: flat.lo, hi: flat.hi, reason: "flat interval exceeds the support".into() });
    }
    let in_flat = x >= flat.lo && x < flat.hi;
    Ok(PointEstimates {
        iie: fit.iie_at(x),
        projected_iie: if in_flat { fit.projected_iie_level(flat) } else { fit.iie_at(x) },
        slope: if in_flat {
            fit.slope(flat.lo, flat.hi)
        } else {
            let p = Partition::around_flat(flat, support)?;
            let (a, b) = p.cells().find(|(a, b)| x >= *a && x < *b).unwrap_or((flat.lo, flat.hi));
            fit.slope(a, b)
        },
        projected_naive: fit.chord_lcm(flat).right_derivative(x),
    })
}
