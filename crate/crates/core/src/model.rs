//! Forward model of Wicksell's problem.
//!
//! A [`SquaredRadiusCdf`] describes the law of the squared sphere radii as a
//! list of closed-form segments tiling `[0, M]`. [`WicksellModel`] adds the
//! expected radius `m0` and evaluates the observable density `g`, the
//! function `V` and its primitive `U` by quadrature.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureSpec;

const CDF_TOL: f64 = 1e-12;
const JUMP_TOL: f64 = 1e-9;

/// A closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidInterval { lo, hi, reason: "endpoints must be finite".into() });
        }
        if !(lo < hi) {
            return Err(Error::InvalidInterval { lo, hi, reason: "lower end must be below upper end".into() });
        }
        if lo < 0.0 {
            return Err(Error::InvalidInterval { lo, hi, reason: "interval must lie in [0, inf)".into() });
        }
        Ok(Interval { lo, hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

/// Closed-form cdf expression on one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum SegmentKind {
    /// `F(s) = 1 - exp(-(s - shift)² / scale)`.
    ExpSquare { shift: f64, scale: f64 },
    /// `F(s) = value`.
    Constant { value: f64 },
    /// `F` linear from `from` at `lo` to `to` at `hi`.
    Uniform { from: f64, to: f64 },
    /// Point mass at `lo` (segment of zero length).
    Atom { mass: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    #[serde(flatten)]
    pub kind: SegmentKind,
}

impl Segment {
    pub fn is_atom(&self) -> bool {
        matches!(self.kind, SegmentKind::Atom { .. })
    }

    /// Raw cdf value inside a continuous segment.
    fn formula(&self, s: f64) -> f64 {
        match self.kind {
            SegmentKind::ExpSquare { shift, scale } => {
                let d = s - shift;
                -(-d * d / scale).exp_m1()
            }
            SegmentKind::Constant { value } => value,
            SegmentKind::Uniform { from, to } => from + (to - from) * (s - self.lo) / (self.hi - self.lo),
            SegmentKind::Atom { .. } => f64::NAN,
        }
    }

    /// Raw Lebesgue density inside a continuous segment.
    pub(crate) fn density(&self, s: f64) -> f64 {
        match self.kind {
            SegmentKind::ExpSquare { shift, scale } => {
                let d = s - shift;
                2.0 * d / scale * (-d * d / scale).exp()
            }
            SegmentKind::Constant { .. } => 0.0,
            SegmentKind::Uniform { from, to } => (to - from) / (self.hi - self.lo),
            SegmentKind::Atom { .. } => 0.0,
        }
    }

    pub(crate) fn has_density(&self) -> bool {
        match self.kind {
            SegmentKind::Constant { .. } | SegmentKind::Atom { .. } => false,
            SegmentKind::Uniform { from, to } => to > from,
            SegmentKind::ExpSquare { .. } => true,
        }
    }
}

/// JSON document describing a cdf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfDocument {
    pub segments: Vec<Segment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flat: Option<Interval>,
    #[serde(rename = "M")]
    pub support_bound: f64,
    /// Exponent `t` of an optional reweighting `dF ∝ s^t dF_raw`.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub tilt: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

/// Distribution of the squared sphere radii, supported on `[0, M]`.
///
/// Mass beyond `M` is dropped and the remainder renormalized; an optional
/// tilt reweights the raw segments by `s^t`.
#[derive(Debug, Clone)]
pub struct SquaredRadiusCdf {
    doc: CdfDocument,
    /// Weighted mass of each segment (unnormalized).
    seg_mass: Vec<f64>,
    /// Weighted mass strictly before each segment.
    cum_before: Vec<f64>,
    total: f64,
    quad: QuadratureSpec,
}

impl SquaredRadiusCdf {
    pub fn new(doc: CdfDocument) -> Result<Self> {
        Self::with_quadrature(doc, QuadratureSpec::default())
    }

    pub fn with_quadrature(doc: CdfDocument, quad: QuadratureSpec) -> Result<Self> {
        validate_document(&doc)?;
        let mut seg_mass = Vec::with_capacity(doc.segments.len());
        for seg in &doc.segments {
            let m = match seg.kind {
                SegmentKind::Atom { mass } => mass * tilt_weight(doc.tilt, seg.lo),
                _ if !seg.has_density() => 0.0,
                _ if doc.tilt == 0.0 => seg.formula(seg.hi) - seg.formula(seg.lo),
                _ => quad.integrate(|s| tilt_weight(doc.tilt, s) * seg.density(s), seg.lo, seg.hi)?,
            };
            seg_mass.push(m);
        }
        let mut cum_before = Vec::with_capacity(seg_mass.len());
        let mut acc = 0.0;
        for m in &seg_mass {
            cum_before.push(acc);
            acc += m;
        }
        if !(acc > 0.0 && acc.is_finite()) {
            return Err(Error::InvalidCdf("cdf carries no mass on [0, M]".into()));
        }
        let cdf = SquaredRadiusCdf { doc, seg_mass, cum_before, total: acc, quad };
        if let Some(flat) = cdf.doc.flat {
            if flat.hi > cdf.support_bound() {
                return Err(Error::InvalidCdf("flat interval exceeds the support bound".into()));
            }
            if cdf.cdf(flat.hi) - cdf.cdf(flat.lo) > CDF_TOL {
                return Err(Error::InvalidCdf(format!(
                    "cdf is not constant on the flat interval [{}, {}]",
                    flat.lo, flat.hi
                )));
            }
        }
        Ok(cdf)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::new(serde_json::from_str(s)?)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn document(&self) -> &CdfDocument {
        &self.doc
    }

    pub fn segments(&self) -> &[Segment] {
        &self.doc.segments
    }

    pub fn flat_interval(&self) -> Option<Interval> {
        self.doc.flat
    }

    pub fn support_bound(&self) -> f64 {
        self.doc.support_bound
    }

    pub fn tilt(&self) -> f64 {
        self.doc.tilt
    }

    /// Normalized weighted mass of each segment, in segment order.
    pub fn segment_masses(&self) -> impl Iterator<Item = (&Segment, f64)> + '_ {
        self.doc.segments.iter().zip(self.seg_mass.iter().map(move |m| m / self.total))
    }

    /// Segment boundaries (including atom locations), ascending, deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.doc.segments.iter().flat_map(|s| [s.lo, s.hi]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Atom locations and normalized masses.
    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.doc
            .segments
            .iter()
            .zip(&self.seg_mass)
            .filter(|(s, _)| s.is_atom())
            .map(move |(s, m)| (s.lo, m / self.total))
    }

    /// Normalized Lebesgue density of the continuous part at `s`.
    pub fn density(&self, s: f64) -> f64 {
        match self.continuous_segment(s) {
            Some(i) => {
                let seg = &self.doc.segments[i];
                tilt_weight(self.doc.tilt, s) * seg.density(s) / self.total
            }
            None => 0.0,
        }
    }

    /// Index of the continuous segment `[lo, hi)` containing `x` (the last
    /// segment also owns `M`).
    fn continuous_segment(&self, x: f64) -> Option<usize> {
        if x < 0.0 || x > self.support_bound() {
            return None;
        }
        let segs = &self.doc.segments;
        let idx = segs.partition_point(|s| s.lo <= x);
        (0..idx).rev().find(|&i| !segs[i].is_atom())
    }

    /// Right-continuous cdf.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x >= self.support_bound() {
            return 1.0;
        }
        let i = match self.continuous_segment(x) {
            Some(i) => i,
            None => return 0.0,
        };
        let seg = &self.doc.segments[i];
        let partial = if !seg.has_density() {
            0.0
        } else if self.doc.tilt == 0.0 {
            seg.formula(x) - seg.formula(seg.lo)
        } else {
            let t = self.doc.tilt;
            // Tilted cdf on a segment has no closed form.
            self.quad
                .integrate(|s| tilt_weight(t, s) * seg.density(s), seg.lo, x)
                .unwrap_or(f64::NAN)
        };
        ((self.cum_before[i] + partial) / self.total).clamp(0.0, 1.0)
    }

    /// `∫ φ dF` over `[0, M]` (Stieltjes; atoms contribute point masses).
    pub fn stieltjes<F: Fn(f64) -> f64>(&self, phi: F, quad: &QuadratureSpec) -> Result<f64> {
        let t = self.doc.tilt;
        let mut acc = 0.0;
        for (seg, mass) in self.doc.segments.iter().zip(&self.seg_mass) {
            match seg.kind {
                SegmentKind::Atom { .. } => acc += phi(seg.lo) * mass,
                _ if seg.has_density() => {
                    acc += quad.integrate(|s| phi(s) * tilt_weight(t, s) * seg.density(s), seg.lo, seg.hi)?;
                }
                _ => {}
            }
        }
        Ok(acc / self.total)
    }

    /// `∫_{(z, M]} h(s) / sqrt(s - z) dF(s)`.
    pub fn abel_stieltjes<F: Fn(f64) -> f64>(&self, h: F, z: f64, quad: &QuadratureSpec) -> Result<f64> {
        let t = self.doc.tilt;
        let mut acc = 0.0;
        for (seg, mass) in self.doc.segments.iter().zip(&self.seg_mass) {
            if seg.hi <= z {
                continue;
            }
            match seg.kind {
                SegmentKind::Atom { .. } => {
                    if seg.lo > z {
                        acc += h(seg.lo) * mass / (seg.lo - z).sqrt();
                    } else if *mass > 0.0 {
                        return Ok(f64::INFINITY);
                    }
                }
                _ if seg.has_density() => {
                    acc += quad.abel(|s| h(s) * tilt_weight(t, s) * seg.density(s), z, seg.lo.max(z), seg.hi, &[])?;
                }
                _ => {}
            }
        }
        Ok(acc / self.total)
    }

    pub fn point_mass(at: f64, support_bound: f64) -> Result<Self> {
        Self::new(CdfDocument {
            segments: vec![
                Segment { lo: 0.0, hi: at, kind: SegmentKind::Constant { value: 0.0 } },
                Segment { lo: at, hi: at, kind: SegmentKind::Atom { mass: 1.0 } },
                Segment { lo: at, hi: support_bound, kind: SegmentKind::Constant { value: 1.0 } },
            ],
            flat: None,
            support_bound,
            tilt: 0.0,
        })
    }

    pub fn uniform(hi: f64) -> Result<Self> {
        Self::new(CdfDocument {
            segments: vec![Segment { lo: 0.0, hi, kind: SegmentKind::Uniform { from: 0.0, to: 1.0 } }],
            flat: None,
            support_bound: hi,
            tilt: 0.0,
        })
    }
}

pub(crate) fn tilt_weight(t: f64, s: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        s.powf(t)
    }
}

fn validate_document(doc: &CdfDocument) -> Result<()> {
    let m = doc.support_bound;
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidCdf("support bound M must be positive and finite".into()));
    }
    if !doc.tilt.is_finite() || doc.tilt <= -1.0 {
        return Err(Error::InvalidCdf("tilt must be finite and above -1".into()));
    }
    let segs = &doc.segments;
    if segs.is_empty() {
        return Err(Error::InvalidCdf("no segments".into()));
    }
    if segs[0].lo != 0.0 {
        return Err(Error::InvalidCdf("segments must start at 0".into()));
    }
    if (segs[segs.len() - 1].hi - m).abs() > CDF_TOL {
        return Err(Error::InvalidCdf("segments must end at M".into()));
    }
    for w in segs.windows(2) {
        if (w[0].hi - w[1].lo).abs() > CDF_TOL {
            return Err(Error::InvalidCdf(format!("gap or overlap between {} and {}", w[0].hi, w[1].lo)));
        }
    }
    let mut prev_end: Option<f64> = None;
    let mut pending_atoms = 0.0;
    for seg in segs {
        if !(seg.lo.is_finite() && seg.hi.is_finite()) {
            return Err(Error::InvalidCdf("segment endpoints must be finite".into()));
        }
        match seg.kind {
            SegmentKind::Atom { mass } => {
                if seg.lo != seg.hi {
                    return Err(Error::InvalidCdf("atoms must have lo == hi".into()));
                }
                if seg.lo <= 0.0 {
                    return Err(Error::InvalidCdf("atoms must sit at a positive location".into()));
                }
                if !(mass > 0.0 && mass <= 1.0 + CDF_TOL) {
                    return Err(Error::InvalidCdf("atom mass must lie in (0, 1]".into()));
                }
                pending_atoms += mass;
                continue;
            }
            SegmentKind::ExpSquare { shift, scale } => {
                if !(scale > 0.0) || seg.lo < shift {
                    return Err(Error::InvalidCdf("exp_square needs scale > 0 and lo >= shift".into()));
                }
            }
            SegmentKind::Uniform { from, to } => {
                if to < from {
                    return Err(Error::InvalidCdf("uniform segment must be nondecreasing".into()));
                }
            }
            SegmentKind::Constant { .. } => {}
        }
        if !(seg.lo < seg.hi) {
            return Err(Error::InvalidCdf("continuous segments need lo < hi".into()));
        }
        let (a, b) = (seg.formula(seg.lo), seg.formula(seg.hi));
        if !(a >= -CDF_TOL && b <= 1.0 + CDF_TOL && a <= b + CDF_TOL) {
            return Err(Error::InvalidCdf(format!("segment [{}, {}] leaves [0, 1] or decreases", seg.lo, seg.hi)));
        }
        let before = prev_end.unwrap_or(0.0);
        let jump = a - before;
        if (jump - pending_atoms).abs() > JUMP_TOL {
            return Err(Error::InvalidCdf(format!(
                "cdf jumps by {jump} at {} but atoms there carry {pending_atoms}",
                seg.lo
            )));
        }
        pending_atoms = 0.0;
        prev_end = Some(b);
    }
    if pending_atoms > 0.0 {
        let end = prev_end.unwrap_or(0.0);
        if end + pending_atoms > 1.0 + JUMP_TOL {
            return Err(Error::InvalidCdf("total mass exceeds 1".into()));
        }
    }
    Ok(())
}

/// Built-in cdf presets.
pub fn preset(name: &str) -> Result<SquaredRadiusCdf> {
    match name {
        "paper-sec5" => SquaredRadiusCdf::new(sec5_document(0.0)),
        "paper-sec5-tilted" => SquaredRadiusCdf::new(sec5_document(-0.5)),
        "point-mass-4" => {
            let mut doc = SquaredRadiusCdf::point_mass(4.0, 5.0)?.doc;
            doc.flat = Some(Interval { lo: 1.0, hi: 2.0 });
            SquaredRadiusCdf::new(doc)
        }
        "uniform-unit" => SquaredRadiusCdf::uniform(1.0),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

pub const PRESET_NAMES: [&str; 4] = ["paper-sec5", "paper-sec5-tilted", "point-mass-4", "uniform-unit"];

/// Support bound of the simulation-study cdf: smallest integer `M` with
/// `1 - F(M) < 1e-10`.
pub const SEC5_SUPPORT_BOUND: f64 = 23.0;

/// The simulation-study cdf: `1 - exp(-x²/20)` on `[0, 2)`, constant on
/// `[2, 3]`, `1 - exp(-(x-1)²/20)` above 3, truncated at 23.
fn sec5_document(tilt: f64) -> CdfDocument {
    CdfDocument {
        segments: vec![
            Segment { lo: 0.0, hi: 2.0, kind: SegmentKind::ExpSquare { shift: 0.0, scale: 20.0 } },
            Segment { lo: 2.0, hi: 3.0, kind: SegmentKind::Constant { value: -(-0.2f64).exp_m1() } },
            Segment { lo: 3.0, hi: SEC5_SUPPORT_BOUND, kind: SegmentKind::ExpSquare { shift: 1.0, scale: 20.0 } },
        ],
        flat: Some(Interval { lo: 2.0, hi: 3.0 }),
        support_bound: SEC5_SUPPORT_BOUND,
        tilt,
    }
}

/// `∫ sqrt(s) dF(s)`, the expected sphere radius.
pub fn compute_m0(cdf: &SquaredRadiusCdf, quad: &QuadratureSpec) -> Result<f64> {
    let m0 = cdf.stieltjes(f64::sqrt, quad).map_err(|e| match e {
        Error::QuadratureFailure { error, .. } => Error::NonFiniteMoment { error },
        e => e,
    })?;
    if !(m0 > 0.0 && m0.is_finite()) {
        return Err(Error::NonFiniteMoment { error: f64::NAN });
    }
    Ok(m0)
}

/// `∫_x^{b} g(z) / sqrt(z - x) dz` where `breaks` lists the points (ending at
/// the support bound `b`) at which `g` may have `1/sqrt` singularities or kinks.
pub fn abel_transform<G: Fn(f64) -> f64>(g: G, x: f64, breaks: &[f64], quad: &QuadratureSpec) -> Result<f64> {
    let upper = match breaks.last() {
        Some(&b) => b,
        None => return Ok(0.0),
    };
    if x >= upper {
        return Ok(0.0);
    }
    let mut pts = vec![x];
    pts.extend(breaks.iter().copied().filter(|&b| b > x));
    let mut acc = 0.0;
    for w in pts.windows(2) {
        acc += quad.sqrt_endpoints(|z| g(z) / (z - x).sqrt(), w[0], w[1])?;
    }
    Ok(acc)
}

/// Recovers `F(x) = 1 - V(x)/V(0)` from an observable density `g` by two
/// Abel integrals; `F(x) = 0` for `x <= 0`.
pub fn invert_g_to_cdf<G: Fn(f64) -> f64>(g: G, breaks: &[f64], x: f64, quad: &QuadratureSpec) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    let v0 = abel_transform(&g, 0.0, breaks, quad)?;
    if !(v0 > 0.0) {
        return Err(Error::DivisionByZero(format!("V(0) evaluated to {v0}")));
    }
    let vx = abel_transform(&g, x, breaks, quad)?;
    Ok((1.0 - vx / v0).clamp(0.0, 1.0))
}

/// A cdf together with its derived quantities.
#[derive(Debug, Clone)]
pub struct WicksellModel {
    pub cdf: SquaredRadiusCdf,
    pub m0: f64,
    pub quad: QuadratureSpec,
    pub id: String,
}

impl WicksellModel {
    pub fn new(cdf: SquaredRadiusCdf, quad: QuadratureSpec) -> Result<Self> {
        Self::with_id(cdf, quad, "custom")
    }

    pub fn with_id(cdf: SquaredRadiusCdf, quad: QuadratureSpec, id: &str) -> Result<Self> {
        quad.validate()?;
        let m0 = compute_m0(&cdf, &quad)?;
        let third_moment = cdf.stieltjes(|s| s.powf(1.5), &quad)?;
        if !third_moment.is_finite() {
            return Err(Error::NonFiniteMoment { error: f64::INFINITY });
        }
        Ok(WicksellModel { cdf, m0, quad, id: id.to_string() })
    }

    pub fn preset(name: &str) -> Result<Self> {
        Self::with_id(preset(name)?, QuadratureSpec::default(), name)
    }

    pub fn support_bound(&self) -> f64 {
        self.cdf.support_bound()
    }

    pub fn flat_interval(&self) -> Option<Interval> {
        self.cdf.flat_interval()
    }

    /// Observable density `g(z) = (2 m0)^{-1} ∫_z^M dF(s) / sqrt(s - z)`.
    pub fn density_g(&self, z: f64) -> Result<f64> {
        if z < 0.0 {
            return Err(Error::InvalidArgument(format!("density_g needs z >= 0, got {z}")));
        }
        if z >= self.support_bound() {
            return Ok(0.0);
        }
        Ok(self.cdf.abel_stieltjes(|_| 1.0, z, &self.quad)? / (2.0 * self.m0))
    }

    /// `V(x) = π / (2 m0) (1 - F(x))`.
    pub fn function_v(&self, x: f64) -> f64 {
        if x >= self.support_bound() {
            return 0.0;
        }
        PI / (2.0 * self.m0) * (1.0 - self.cdf.cdf(x.max(0.0)))
    }

    /// `V(x)` by direct Abel integration of `g` (nested quadrature).
    pub fn function_v_abel(&self, x: f64) -> Result<f64> {
        let breaks = self.cdf.breakpoints();
        abel_transform(|z| self.density_g(z).unwrap_or(f64::NAN), x, &breaks, &self.quad)
    }

    /// `U(x) = ∫_0^x V(y) dy`.
    pub fn function_u(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        let end = x.min(self.support_bound());
        let mut pts = vec![0.0];
        pts.extend(self.cdf.breakpoints().into_iter().filter(|&b| b > 0.0 && b < end));
        pts.push(end);
        let tail = self.quad.integrate_with_breaks(|y| 1.0 - self.cdf.cdf(y), &pts)?;
        Ok(PI / (2.0 * self.m0) * tail)
    }

    /// Cdf of the observable `Z`: `1 - m0^{-1} ∫_{s > z} sqrt(s - z) dF(s)`.
    pub fn observable_cdf(&self, z: f64) -> Result<f64> {
        if z <= 0.0 {
            return Ok(0.0);
        }
        if z >= self.support_bound() {
            return Ok(1.0);
        }
        let tail = self.cdf.abel_stieltjes(|s| s - z, z, &self.quad)?;
        Ok((1.0 - tail / self.m0).clamp(0.0, 1.0))
    }

    /// `∫_a^b φ(z) g(z) dz`, with the interval split at the cdf breakpoints
    /// and `extra` points so every piece is smooth up to `1/sqrt` endpoint terms.
    pub fn integrate_against_g<F: Fn(f64) -> f64>(&self, phi: F, a: f64, b: f64, extra: &[f64]) -> Result<f64> {
        let b = b.min(self.support_bound());
        if b <= a {
            return Ok(0.0);
        }
        let mut pts = vec![a, b];
        pts.extend(self.cdf.breakpoints().into_iter().chain(extra.iter().copied()).filter(|&p| p > a && p < b));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut acc = 0.0;
        for w in pts.windows(2) {
            acc += self
                .quad
                .sqrt_endpoints(|z| phi(z) * self.density_g(z).unwrap_or(f64::NAN), w[0], w[1])?;
        }
        Ok(acc)
    }

    /// `E φ(Z)` via the mixture representation `Z = S (1 - U²)` with `S`
    /// length-biased: `(2 m0)^{-1} ∫ dF(s) ∫_0^s φ(z) (s - z)^{-1/2} dz`.
    pub fn expect_by_mixture<F: Fn(f64) -> f64>(&self, phi: F, extra: &[f64]) -> Result<f64> {
        let inner = |s: f64| -> f64 {
            if s <= 0.0 {
                return 0.0;
            }
            // z = s - u², u ∈ [0, sqrt(s)]
            let mut pts = vec![0.0, s.sqrt()];
            pts.extend(extra.iter().filter(|&&p| p > 0.0 && p < s).map(|&p| (s - p).sqrt()));
            pts.sort_by(f64::total_cmp);
            self.quad
                .integrate_with_breaks(|u| 2.0 * phi(s - u * u), &pts)
                .unwrap_or(f64::NAN)
        };
        let v = self.cdf.stieltjes(inner, &self.quad)?;
        if v.is_nan() {
            return Err(Error::QuadratureFailure { lo: 0.0, hi: self.support_bound(), error: f64::NAN });
        }
        Ok(v / (2.0 * self.m0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sec5() -> WicksellModel {
        WicksellModel::preset("paper-sec5").unwrap()
    }

    #[test]
    fn presets_are_valid() {
        for name in PRESET_NAMES {
            let m = WicksellModel::preset(name).unwrap();
            assert!(m.m0 > 0.0);
            assert_eq!(m.cdf.cdf(0.0), 0.0);
            assert!((m.cdf.cdf(m.support_bound()) - 1.0).abs() < 1e-15);
        }
        assert!(matches!(preset("nope"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn m0_trivial_cases() {
        let q = QuadratureSpec::default();
        let pm = SquaredRadiusCdf::point_mass(4.0, 5.0).unwrap();
        assert!((compute_m0(&pm, &q).unwrap() - 2.0).abs() < 1e-14);
        let u = SquaredRadiusCdf::uniform(1.0).unwrap();
        assert!((compute_m0(&u, &q).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sec5_cdf_formulas() {
        let m = sec5();
        let c = &m.cdf;
        // tail beyond M is below 1e-10, so renormalization is invisible at 1e-10
        assert!((c.cdf(1.5) - (1.0 - (-1.5f64 * 1.5 / 20.0).exp())).abs() < 1e-10);
        let flat = 1.0 - (-0.2f64).exp();
        for x in [2.0, 2.3, 2.5, 3.0] {
            assert!((c.cdf(x) - flat).abs() < 1e-10);
        }
        assert!((c.cdf(5.0) - (1.0 - (-0.8f64).exp())).abs() < 1e-10);
        assert_eq!(c.flat_interval(), Some(Interval { lo: 2.0, hi: 3.0 }));
    }

    #[test]
    fn sec5_golden_m0() {
        // Independent adaptive quadrature (scipy.integrate.quad, 1e-13) of
        // ∫ sqrt(s) dF on the truncated, renormalized cdf.
        assert!((sec5().m0 - 2.107_735_977_983_006).abs() < 1e-9);
    }

    #[test]
    fn g_for_point_mass() {
        let m = WicksellModel::new(SquaredRadiusCdf::point_mass(4.0, 5.0).unwrap(), QuadratureSpec::default()).unwrap();
        for z in [0.0f64, 1.0, 2.5, 3.9] {
            let expect = 1.0 / (4.0 * (4.0 - z).sqrt());
            assert!((m.density_g(z).unwrap() - expect).abs() < 1e-14);
        }
        assert_eq!(m.density_g(4.5).unwrap(), 0.0);
        assert_eq!(m.density_g(5.0).unwrap(), 0.0);
        assert!(m.density_g(-1.0).is_err());
    }

    #[test]
    fn g_at_one_matches_oracle() {
        // Brute-force oracle: composite substitution quadrature (scipy, 1e-12)
        // of (2 m0)^{-1} ∫ f(s)/sqrt(s-1) ds over [1,2] ∪ [3,23].
        let g1 = sec5().density_g(1.0).unwrap();
        assert!((g1 - 0.153_466_044_537_853_8).abs() < 1e-9, "g(1) = {g1}");
    }

    #[test]
    fn v_closed_form_and_flat_value() {
        let m = sec5();
        assert_eq!(m.function_v(30.0), 0.0);
        assert!((m.function_v(0.0) - PI / (2.0 * m.m0)).abs() < 1e-15);
        let expect = PI / (2.0 * m.m0) * (-0.2f64).exp();
        for x in [2.0, 2.5, 3.0] {
            assert!((m.function_v(x) - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn u_values() {
        let pm = WicksellModel::preset("point-mass-4").unwrap();
        assert_eq!(pm.function_u(0.0).unwrap(), 0.0);
        for x in [0.5, 2.0, 4.0] {
            assert!((pm.function_u(x).unwrap() - PI / 4.0 * x).abs() < 1e-12);
        }
        let m = sec5();
        let d = m.function_u(3.0).unwrap() - m.function_u(2.0).unwrap();
        assert!((d - PI / (2.0 * m.m0) * (-0.2f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn abel_v_matches_closed_form() {
        let m = sec5();
        for x in [0.0, 0.7, 2.0, 2.5, 3.5, 10.0] {
            let direct = m.function_v_abel(x).unwrap();
            assert!((direct - m.function_v(x)).abs() < 1e-8, "x = {x}: {direct} vs {}", m.function_v(x));
        }
    }

    #[test]
    fn invert_round_trip_and_edges() {
        let m = sec5();
        let q = QuadratureSpec::default();
        let breaks = m.cdf.breakpoints();
        assert_eq!(invert_g_to_cdf(|_| 1.0, &breaks, -1.0, &q).unwrap(), 0.0);
        let f = invert_g_to_cdf(|z| m.density_g(z).unwrap(), &breaks, 1.5, &q).unwrap();
        assert!((f - (1.0 - (-1.5f64 * 1.5 / 20.0).exp())).abs() < 1e-4);

        let pm = WicksellModel::preset("point-mass-4").unwrap();
        let b = pm.cdf.breakpoints();
        let f = invert_g_to_cdf(|z| pm.density_g(z).unwrap(), &b, 4.0, &q).unwrap();
        assert!((f - 1.0).abs() < 1e-8);
        assert!(matches!(invert_g_to_cdf(|_| 0.0, &b, 1.0, &q), Err(Error::DivisionByZero(_))));
    }

    #[test]
    fn g_integrates_to_one() {
        for name in PRESET_NAMES {
            let m = WicksellModel::preset(name).unwrap();
            let mass = m.integrate_against_g(|_| 1.0, 0.0, m.support_bound(), &[]).unwrap();
            assert!((mass - 1.0).abs() < 1e-6, "{name}: {mass}");
        }
    }

    #[test]
    fn observable_cdf_agrees_with_integrated_g() {
        let m = sec5();
        for z in [0.5, 2.2, 4.0, 9.0] {
            let direct = m.integrate_against_g(|_| 1.0, 0.0, z, &[]).unwrap();
            assert!((direct - m.observable_cdf(z).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let c = preset("paper-sec5").unwrap();
        let s = serde_json::to_string(c.document()).unwrap();
        assert!(s.contains("\"kind\":\"exp_square\""));
        assert!(s.contains("\"M\":23"));
        let back = SquaredRadiusCdf::from_json_str(&s).unwrap();
        assert_eq!(back.document(), c.document());

        let gap = r#"{"segments":[{"lo":0,"hi":1,"kind":"uniform","params":{"from":0,"to":0.5}},
                     {"lo":1.5,"hi":2,"kind":"uniform","params":{"from":0.5,"to":1}}],"M":2}"#;
        assert!(matches!(SquaredRadiusCdf::from_json_str(gap), Err(Error::InvalidCdf(_))));
        let jump = r#"{"segments":[{"lo":0,"hi":1,"kind":"constant","params":{"value":0}},
                      {"lo":1,"hi":2,"kind":"constant","params":{"value":1}}],"M":2}"#;
        assert!(matches!(SquaredRadiusCdf::from_json_str(jump), Err(Error::InvalidCdf(_))));
        let not_flat = r#"{"segments":[{"lo":0,"hi":1,"kind":"uniform","params":{"from":0,"to":1}}],"flat":[0.2,0.4],"M":1}"#;
        assert!(matches!(SquaredRadiusCdf::from_json_str(not_flat), Err(Error::InvalidCdf(_))));
        let bad_flat = r#"{"segments":[{"lo":0,"hi":1,"kind":"uniform","params":{"from":0,"to":1}}],"flat":[0.4,0.2],"M":1}"#;
        assert!(SquaredRadiusCdf::from_json_str(bad_flat).is_err());
    }

    #[test]
    fn tilted_preset_reweights() {
        let raw = WicksellModel::preset("paper-sec5").unwrap();
        let tilted = WicksellModel::preset("paper-sec5-tilted").unwrap();
        // the length-biased law of the tilted cdf is the untilted cdf
        let lb = tilted.cdf.stieltjes(|s| s.sqrt() * if s <= 5.0 { 1.0 } else { 0.0 }, &tilted.quad).unwrap() / tilted.m0;
        assert!((lb - raw.cdf.cdf(5.0)).abs() < 1e-9);
        let flat = tilted.cdf.flat_interval().unwrap();
        assert!((tilted.cdf.cdf(flat.lo) - tilted.cdf.cdf(flat.hi)).abs() < 1e-12);
    }
}
