//! Globally adaptive Gauss–Kronrod (10/21 point) quadrature with helpers for
//! the inverse-square-root endpoint singularities that appear in every Abel
//! integral of the forward model.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and limits for every numerical integral in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Half-width of the zone around a `1/sqrt` singularity inside which the
    /// substitution `u = sqrt(s - z)` is applied.
    pub singularity_margin: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-11,
            rel_tol: 1e-11,
            max_subdivisions: 400,
            singularity_margin: 1.0,
        }
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One 21-point Kronrod rule on `[a, b]`, with the QUADPACK error heuristic.
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut abs_sum = kronrod.abs();
    let mut f1 = [0.0; 10];
    let mut f2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let lo = f(center - dx);
        let hi = f(center + dx);
        f1[j] = lo;
        f2[j] = hi;
        kronrod += WGK[j] * (lo + hi);
        abs_sum += WGK[j] * (lo.abs() + hi.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((f1[j] - mean).abs() + (f2[j] - mean).abs());
    }
    let value = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Segment { a, b, value, error }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument("quadrature tolerances must be positive".into()));
        }
        if self.max_subdivisions < 16 {
            return Err(Error::InvalidArgument("max_subdivisions must be at least 16".into()));
        }
        if !(self.singularity_margin >= 0.0) {
            return Err(Error::InvalidArgument("singularity_margin must be nonnegative".into()));
        }
        Ok(())
    }

    /// Integrates `f` over `[a, b]` (returns the estimate and its error bound).
    pub fn integrate_with_error<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<(f64, f64)> {
        self.integrate_pieces(&f, &[a, b])
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<f64> {
        self.integrate_pieces(&f, &[a, b]).map(|(v, _)| v)
    }

    /// Integrates over `[points[0], points[last]]`, seeding the adaptive
    /// partition with the given breakpoints (where `f` may be non-smooth).
    pub fn integrate_with_breaks<F: Fn(f64) -> f64>(&self, f: F, points: &[f64]) -> Result<f64> {
        self.integrate_pieces(&f, points).map(|(v, _)| v)
    }

    fn integrate_pieces<F: Fn(f64) -> f64>(&self, f: &F, points: &[f64]) -> Result<(f64, f64)> {
        let mut pts: Vec<f64> = points.iter().copied().filter(|p| p.is_finite()).collect();
        if pts.len() < 2 {
            return Ok((0.0, 0.0));
        }
        let (lo, hi) = (pts[0], pts[pts.len() - 1]);
        if lo == hi {
            return Ok((0.0, 0.0));
        }
        let sign = if hi < lo { -1.0 } else { 1.0 };
        pts.sort_by(f64::total_cmp);
        pts.dedup();

        let mut heap = BinaryHeap::new();
        let mut total = 0.0;
        let mut total_err = 0.0;
        for w in pts.windows(2) {
            let s = gk21(f, w[0], w[1]);
            total += s.value;
            total_err += s.error;
            heap.push(s);
        }
        let mut count = heap.len();
        loop {
            if !total.is_finite() {
                break;
            }
            if total_err <= self.abs_tol.max(self.rel_tol * total.abs()) {
                return Ok((sign * total, total_err));
            }
            if count >= self.max_subdivisions {
                break;
            }
            let worst = match heap.pop() {
                Some(s) => s,
                None => break,
            };
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                // interval exhausted at machine precision; accept what we have
                heap.push(worst);
                if total_err <= 1e3 * self.abs_tol.max(self.rel_tol * total.abs()) {
                    return Ok((sign * total, total_err));
                }
                break;
            }
            let left = gk21(f, worst.a, mid);
            let right = gk21(f, mid, worst.b);
            total += left.value + right.value - worst.value;
            total_err += left.error + right.error - worst.error;
            heap.push(left);
            heap.push(right);
            count += 1;
        }
        // Recompute the error sum to shed accumulated cancellation before deciding.
        let err: f64 = heap.iter().map(|s| s.error).sum();
        let val: f64 = heap.iter().map(|s| s.value).sum();
        if val.is_finite() && err <= self.abs_tol.max(self.rel_tol * val.abs()) {
            return Ok((sign * val, err));
        }
        Err(Error::QuadratureFailure { lo, hi, error: err })
    }

    /// `∫_lo^hi h(s) / sqrt(s - z) ds` for `z <= lo`, with the substitution
    /// `u = sqrt(s - z)` whenever `lo` lies within the singularity margin of `z`.
    /// `breaks` are interior points where `h` is not smooth.
    pub fn abel<F: Fn(f64) -> f64>(&self, h: F, z: f64, lo: f64, hi: f64, breaks: &[f64]) -> Result<f64> {
        if hi <= lo {
            return Ok(0.0);
        }
        debug_assert!(z <= lo);
        let inner = |a: f64, b: f64| -> Vec<f64> {
            let mut v = vec![a];
            v.extend(breaks.iter().copied().filter(|p| *p > a && *p < b));
            v.push(b);
            v
        };
        if lo - z < self.singularity_margin {
            let pts: Vec<f64> = inner(lo, hi).into_iter().map(|s| (s - z).max(0.0).sqrt()).collect();
            self.integrate_with_breaks(|u| 2.0 * h(z + u * u), &pts)
        } else {
            self.integrate_with_breaks(|s| h(s) / (s - z).sqrt(), &inner(lo, hi))
        }
    }

    /// `∫_a^b f` where `f` may carry integrable `1/sqrt` singularities at
    /// either endpoint: the lower half uses `s = a + u²`, the upper `s = b - u²`.
    pub fn sqrt_endpoints<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        let mid = 0.5 * (a + b);
        let lower = self.integrate(|u| 2.0 * u * f(a + u * u), 0.0, (mid - a).sqrt())?;
        let upper = self.integrate(|u| 2.0 * u * f(b - u * u), 0.0, (b - mid).sqrt())?;
        Ok(lower + upper)
    }
}
