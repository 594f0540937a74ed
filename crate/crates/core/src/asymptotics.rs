//! Limit laws on the flat interval: the efficient normal limit with variance
//! `σ²`, and the nonstandard limits `L_x` (isotonic inverse estimator) and
//! `W` (its difference from the informed estimators), simulated from
//! Gaussian processes with Monte Carlo covariances.

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::upper_hull;
use crate::model::{Interval, WicksellModel};
use crate::sampling::{sample_batch, StreamKey};
use crate::stats::summarize;

/// `k(z) = 2 (sqrt((z - x̲)_+) - sqrt((z - x̄)_+)) / (x̄ - x̲)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfluenceFn {
    pub flat: Interval,
}

impl InfluenceFn {
    pub fn new(flat: Interval) -> Self {
        InfluenceFn { flat }
    }

    pub fn eval(&self, z: f64) -> f64 {
        2.0 * ((z - self.flat.lo).max(0.0).sqrt() - (z - self.flat.hi).max(0.0).sqrt()) / self.flat.len()
    }
}

/// `2 (sqrt((z - x)_+) - sqrt((z - s)_+))`, the increment feature of `U_n`.
pub fn increment_feature(z: f64, x: f64, s: f64) -> f64 {
    2.0 * ((z - x).max(0.0).sqrt() - (z - s).max(0.0).sqrt())
}

/// Efficient asymptotic variance `Var_g k(Z) = ∫ k² g - (∫ k g)²`.
pub fn sigma_sq(model: &WicksellModel, flat: Interval) -> Result<f64> {
    let k = InfluenceFn::new(flat);
    let breaks = [flat.lo, flat.hi];
    let m = model.support_bound();
    let first = model.integrate_against_g(|z| k.eval(z), flat.lo, m, &breaks)?;
    let second = model.integrate_against_g(|z| k.eval(z).powi(2), flat.lo, m, &breaks)?;
    Ok(second - first * first)
}

/// `∫ k g - V(x̲)`; vanishes because the mean of the influence function is
/// the value of `V` on the flat interval.
pub fn influence_mean_identity(model: &WicksellModel, flat: Interval) -> Result<f64> {
    let k = InfluenceFn::new(flat);
    let mean = model.integrate_against_g(|z| k.eval(z), flat.lo, model.support_bound(), &[flat.lo, flat.hi])?;
    Ok(mean - model.function_v(flat.lo))
}

const COV_CHUNK: usize = 2048;
const JITTERS: [f64; 6] = [0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8];

/// Grid on the flat interval with a Monte Carlo covariance and its Cholesky factor.
#[derive(Debug, Clone)]
pub struct GPGrid {
    pub points: Vec<f64>,
    pub cov: DMatrix<f64>,
    /// Indices with a feature that is not identically zero.
    active: Vec<usize>,
    factor: DMatrix<f64>,
    /// Jitter added to the diagonal, relative to its largest entry.
    pub jitter: f64,
    pub n_mc: usize,
}

impl GPGrid {
    /// Empirical covariance of `feature(Z, s_j)` over `n_mc` draws of `Z`.
    pub fn from_features<F>(model: &WicksellModel, points: &[f64], n_mc: usize, key: StreamKey, feature: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        if points.is_empty() {
            return Err(Error::InvalidArgument("covariance grid is empty".into()));
        }
        if n_mc < 2 {
            return Err(Error::InvalidArgument("covariance needs at least two draws".into()));
        }
        let m = points.len();
        let z = sample_batch(model, n_mc, key)?.z;
        let (sum, gram) = z
            .par_chunks(COV_CHUNK)
            .map(|chunk| {
                let f = DMatrix::from_fn(chunk.len(), m, |i, j| feature(chunk[i], points[j]));
                let sum: Vec<f64> = (0..m).map(|j| f.column(j).sum()).collect();
                (sum, f.tr_mul(&f))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((vec![0.0; m], DMatrix::zeros(m, m)), |(mut s, mut g), (cs, cg)| {
                for (a, b) in s.iter_mut().zip(cs) {
                    *a += b;
                }
                g += cg;
                (s, g)
            });
        let nf = n_mc as f64;
        let mu: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        let cov = DMatrix::from_fn(m, m, |i, j| (gram[(i, j)] - nf * mu[i] * mu[j]) / (nf - 1.0));
        let active: Vec<usize> = (0..m).filter(|&i| gram[(i, i)] > 0.0).collect();
        let (factor, jitter) = factorize(&cov, &active)?;
        Ok(GPGrid { points: points.to_vec(), cov, active, factor, jitter, n_mc })
    }

    /// One centered Gaussian path on the grid; inactive points are exactly 0.
    pub fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.active.len();
        let xi: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let mut path = vec![0.0; self.points.len()];
        for (r, &idx) in self.active.iter().enumerate() {
            let row = self.factor.row(r);
            let mut acc = 0.0;
            for c in 0..=r {
                acc += row[c] * xi[c];
            }
            path[idx] = acc;
        }
        path
    }
}

fn factorize(cov: &DMatrix<f64>, active: &[usize]) -> Result<(DMatrix<f64>, f64)> {
    let k = active.len();
    if k == 0 {
        return Ok((DMatrix::zeros(0, 0), 0.0));
    }
    let sub = DMatrix::from_fn(k, k, |i, j| cov[(active[i], active[j])]);
    let scale = (0..k).map(|i| sub[(i, i)]).fold(0.0, f64::max);
    for &rel in &JITTERS {
        let mut m = sub.clone();
        for i in 0..k {
            m[(i, i)] += rel * scale;
        }
        if let Some(ch) = m.cholesky() {
            return Ok((ch.l(), rel));
        }
    }
    Err(Error::FactorizationFailure { jitter: JITTERS[JITTERS.len() - 1] })
}

/// Covariance of the process `s ↦ 𝕫_x(s)` from the features `f_{x,s}`.
pub fn gp_covariance(model: &WicksellModel, x: f64, points: &[f64], n_mc: usize, key: StreamKey) -> Result<GPGrid> {
    GPGrid::from_features(model, points, n_mc, key, |z, s| increment_feature(z, x, s))
}

/// Covariance of the bridge process
/// `𝕫(t) = (x̄ - t)/(x̄ - x̲) 𝕫_{x̲}(t) + (t - x̲)/(x̄ - x̲) 𝕫_{x̄}(t)`.
pub fn gp_covariance_bridge(model: &WicksellModel, flat: Interval, points: &[f64], n_mc: usize, key: StreamKey) -> Result<GPGrid> {
    let (lo, hi, w) = (flat.lo, flat.hi, flat.len());
    GPGrid::from_features(model, points, n_mc, key, move |z, t| {
        let a = (hi - t) / w;
        let b = (t - lo) / w;
        a * increment_feature(z, lo, t) + b * increment_feature(z, hi, t)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LawId {
    #[serde(rename = "L_x")]
    Lx,
    W,
    Normal,
}

impl LawId {
    pub fn as_str(&self) -> &'static str {
        match self {
            LawId::Lx => "L_x",
            LawId::W => "W",
            LawId::Normal => "Normal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSummary {
    pub law_id: LawId,
    pub sd: f64,
    pub mc_se: f64,
    pub npaths: usize,
    pub grid_m: usize,
}

#[derive(Debug, Clone)]
pub struct LimitSample {
    pub draws: Vec<f64>,
    pub law_id: LawId,
    pub npaths: usize,
    pub grid_m: usize,
}

impl LimitSample {
    pub fn summary(&self) -> LimitSummary {
        let s = summarize(&self.draws);
        LimitSummary {
            law_id: self.law_id,
            sd: s.map_or(f64::NAN, |s| s.sd),
            mc_se: s.map_or(f64::NAN, |s| s.sd_se),
            npaths: self.npaths,
            grid_m: self.grid_m,
        }
    }

    pub fn variance(&self) -> f64 {
        summarize(&self.draws).map_or(f64::NAN, |s| s.var)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["draw"])?;
        for d in &self.draws {
            wr.write_record([d.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Settings shared by the path samplers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSettings {
    pub npaths: usize,
    pub grid_m: usize,
    pub n_mc: usize,
}

impl Default for LimitSettings {
    fn default() -> Self {
        LimitSettings { npaths: 20_000, grid_m: 400, n_mc: 100_000 }
    }
}

/// `grid_m` uniform points on the flat interval plus `x`.
pub fn flat_grid(flat: Interval, x: f64, grid_m: usize) -> Vec<f64> {
    let mut pts: Vec<f64> = (0..grid_m)
        .map(|i| if i + 1 == grid_m { flat.hi } else { flat.lo + flat.len() * i as f64 / (grid_m - 1) as f64 })
        .collect();
    pts.push(x);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn check_limit_args(flat: Interval, x: f64, settings: &LimitSettings) -> Result<()> {
    if !(x > flat.lo && x < flat.hi) {
        return Err(Error::InvalidArgument(format!("x = {x} must lie inside the flat interval")));
    }
    if settings.grid_m < 2 || settings.npaths == 0 {
        return Err(Error::InvalidArgument("need grid_m >= 2 and npaths >= 1".into()));
    }
    Ok(())
}

const PATH_CHUNK: usize = 256;

/// Right derivative at `x` of the majorant of each simulated path.
pub fn lcm_slope_draws(gp: &GPGrid, x: f64, npaths: usize, key: StreamKey) -> Vec<f64> {
    let chunks = npaths.div_ceil(PATH_CHUNK);
    let base = key.child(0x5EED_F9A7);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = StreamKey::new(base.master_seed, c as u64).rng();
            let count = PATH_CHUNK.min(npaths - c * PATH_CHUNK);
            (0..count)
                .map(|_| {
                    let path = gp.sample_path(&mut rng);
                    upper_hull(&gp.points, &path).right_derivative(x)
                })
                .collect::<Vec<f64>>()
        })
        .collect::<Vec<_>>()
        .concat()
}

/// Draws of `L_x`.
pub fn sample_lx(model: &WicksellModel, flat: Interval, x: f64, settings: LimitSettings, key: StreamKey) -> Result<LimitSample> {
    check_limit_args(flat, x, &settings)?;
    let pts = flat_grid(flat, x, settings.grid_m);
    let gp = gp_covariance(model, x, &pts, settings.n_mc, key.child(1))?;
    let draws = lcm_slope_draws(&gp, x, settings.npaths, key.child(2));
    Ok(LimitSample { draws, law_id: LawId::Lx, npaths: settings.npaths, grid_m: settings.grid_m })
}

/// Draws of `W`.
pub fn sample_w(model: &WicksellModel, flat: Interval, x: f64, settings: LimitSettings, key: StreamKey) -> Result<LimitSample> {
    check_limit_args(flat, x, &settings)?;
    let pts = flat_grid(flat, x, settings.grid_m);
    let gp = gp_covariance_bridge(model, flat, &pts, settings.n_mc, key.child(3))?;
    let draws = lcm_slope_draws(&gp, x, settings.npaths, key.child(4));
    Ok(LimitSample { draws, law_id: LawId::W, npaths: settings.npaths, grid_m: settings.grid_m })
}

/// Draws of the efficient normal limit `N(0, σ²)`.
pub fn sample_normal(sigma: f64, npaths: usize, key: StreamKey) -> LimitSample {
    let mut rng = key.rng();
    let draws = (0..npaths).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
    LimitSample { draws, law_id: LawId::Normal, npaths, grid_m: 0 }
}
