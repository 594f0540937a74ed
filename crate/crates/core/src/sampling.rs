//! Exact simulation of squared section radii.
//!
//! A sphere hit by a random plane is length-biased: its squared radius `S`
//! has law `sqrt(s) dF(s) / m0`. The plane offset is `sqrt(S) U` with `U`
//! uniform, so the squared section radius is `Z = S (1 - U²)`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{tilt_weight, Segment, SegmentKind, SquaredRadiusCdf, WicksellModel};
use crate::quadrature::QuadratureSpec;

/// Reproducible random stream: one ChaCha8 stream per replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub master_seed: u64,
    pub replicate_index: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, replicate_index: u64) -> Self {
        StreamKey { master_seed, replicate_index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.replicate_index);
        rng
    }

    /// Key for a derived stream family, e.g. one per sample size.
    pub fn child(&self, tag: u64) -> StreamKey {
        let mixed = self
            .master_seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .rotate_left(17)
            ^ tag.wrapping_mul(0xBF58_476D_1CE4_E5B9)
            ^ self.replicate_index;
        StreamKey { master_seed: mixed, replicate_index: 0 }
    }
}

const CELLS_PER_SEGMENT: usize = 512;
const SOLVE_TOL: f64 = 1e-13;

const GL5_X: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683_1, 0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664];
const GL5_W: [f64; 5] = [0.236_926_885_056_189_1, 0.478_628_670_499_366_5, 0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1];

#[derive(Debug, Clone, Copy)]
struct Cell {
    lo: f64,
    hi: f64,
    seg: usize,
}

/// Inverse-cdf sampler for the length-biased law `sqrt(s) dF(s) / m0`.
///
/// Each continuous segment is cut into fine cells with precomputed
/// (unnormalized) masses. Inside a cell the quantile is found by safeguarded
/// Newton iteration on a local Gauss integral.
#[derive(Debug, Clone)]
pub struct LengthBiasedSampler {
    segments: Vec<Segment>,
    tilt: f64,
    cells: Vec<Cell>,
    ends: Vec<f64>,
}

impl LengthBiasedSampler {
    pub fn new(cdf: &SquaredRadiusCdf, quad: &QuadratureSpec) -> Result<Self> {
        let segments = cdf.segments().to_vec();
        let tilt = cdf.tilt();
        let mut cells = Vec::new();
        let mut ends = Vec::new();
        let mut acc = 0.0;
        for (i, seg) in segments.iter().enumerate() {
            if let SegmentKind::Atom { mass } = seg.kind {
                acc += seg.lo.sqrt() * tilt_weight(tilt, seg.lo) * mass;
                cells.push(Cell { lo: seg.lo, hi: seg.lo, seg: i });
                ends.push(acc);
                continue;
            }
            if !seg.has_density() {
                continue;
            }
            let width = (seg.hi - seg.lo) / CELLS_PER_SEGMENT as f64;
            for k in 0..CELLS_PER_SEGMENT {
                let lo = seg.lo + k as f64 * width;
                let hi = if k + 1 == CELLS_PER_SEGMENT { seg.hi } else { lo + width };
                let raw = quad.integrate(|s| biased_density(seg, tilt, s), lo, hi)?;
                acc += raw;
                cells.push(Cell { lo, hi, seg: i });
                ends.push(acc);
            }
        }
        if !(acc > 0.0) {
            return Err(Error::InvalidCdf("length-biased law has no mass".into()));
        }
        Ok(LengthBiasedSampler { segments, tilt, cells, ends })
    }

    /// Quantile of the length-biased law at `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let total = *self.ends.last().expect("nonempty");
        let target = u.clamp(0.0, 1.0) * total;
        let mut idx = self.ends.partition_point(|e| *e <= target);
        if idx == self.cells.len() {
            idx = self.cells.len() - 1;
        }
        let cell = self.cells[idx];
        if cell.lo == cell.hi {
            return cell.lo;
        }
        let start = if idx == 0 { 0.0 } else { self.ends[idx - 1] };
        let want = (target - start).max(0.0);
        self.solve_in_cell(&self.segments[cell.seg], cell.lo, cell.hi, want)
    }

    fn solve_in_cell(&self, seg: &Segment, lo: f64, hi: f64, want: f64) -> f64 {
        let tilt = self.tilt;
        let cell_mass = local_integral(seg, tilt, lo, hi);
        if cell_mass <= 0.0 {
            return lo;
        }
        let (mut a, mut b) = (lo, hi);
        let mut s = lo + (hi - lo) * (want / cell_mass).clamp(0.0, 1.0);
        for _ in 0..100 {
            let resid = local_integral(seg, tilt, lo, s) - want;
            if resid > 0.0 {
                b = s;
            } else {
                a = s;
            }
            if b - a <= SOLVE_TOL * (1.0 + s.abs()) {
                break;
            }
            let d = biased_density(seg, tilt, s);
            let newton = if d > 0.0 { s - resid / d } else { f64::NAN };
            let next = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if (next - s).abs() <= SOLVE_TOL * (1.0 + s.abs()) {
                s = next;
                break;
            }
            s = next;
        }
        s
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

fn biased_density(seg: &Segment, tilt: f64, s: f64) -> f64 {
    s.max(0.0).sqrt() * tilt_weight(tilt, s) * seg.density(s)
}

fn local_integral(seg: &Segment, tilt: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for k in 0..5 {
        acc += GL5_W[k] * biased_density(seg, tilt, c + h * GL5_X[k]);
    }
    acc * h
}

/// One draw from the length-biased law of `cdf`.
pub fn sample_sphere_length_biased(cdf: &SquaredRadiusCdf, key: StreamKey) -> Result<f64> {
    let sampler = LengthBiasedSampler::new(cdf, &QuadratureSpec::default())?;
    Ok(sampler.draw(&mut key.rng()))
}

/// Squared section radius of a sphere with squared radius `s` cut at
/// relative offset `u`.
pub fn section_radius_sq(s: f64, u: f64) -> f64 {
    s * (1.0 - u * u)
}

/// Sorted sample of squared section radii.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub z: Vec<f64>,
    pub seed: Option<StreamKey>,
    pub model_id: String,
}

impl SampleBatch {
    pub fn from_values(mut z: Vec<f64>, model_id: &str) -> Result<Self> {
        if let Some(bad) = z.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("sample values must be finite and nonnegative, got {bad}")));
        }
        z.sort_by(f64::total_cmp);
        Ok(SampleBatch { z, seed: None, model_id: model_id.to_string() })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["z"])?;
        for v in &self.z {
            wr.write_record([format!("{v:.17e}")])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, model_id: &str) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let col = rd
            .headers()?
            .iter()
            .position(|h| h.trim() == "z")
            .ok_or_else(|| Error::InvalidArgument("sample csv needs a `z` column".into()))?;
        let mut z = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let field = rec.get(col).unwrap_or("").trim();
            let v: f64 = field
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("cannot parse `{field}` as a number")))?;
            z.push(v);
        }
        Self::from_values(z, model_id)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(File::open(path)?, "file")
    }
}

/// Draws `n` squared section radii from `model`.
pub fn sample_batch(model: &WicksellModel, n: usize, key: StreamKey) -> Result<SampleBatch> {
    let sampler = LengthBiasedSampler::new(&model.cdf, &model.quad)?;
    Ok(sample_batch_with(&sampler, &model.id, n, key))
}

/// As [`sample_batch`] with a prebuilt sampler (for Monte Carlo loops).
pub fn sample_batch_with(sampler: &LengthBiasedSampler, model_id: &str, n: usize, key: StreamKey) -> SampleBatch {
    let mut rng = key.rng();
    let mut z: Vec<f64> = (0..n)
        .map(|_| {
            let s = sampler.draw(&mut rng);
            let u: f64 = rng.random();
            section_radius_sq(s, u)
        })
        .collect();
    z.sort_by(f64::total_cmp);
    SampleBatch { z, seed: Some(key), model_id: model_id.to_string() }
}

/// Kolmogorov–Smirnov distance between the empirical cdf of `batch` and
/// `cdf_eval`, checking both one-sided gaps at every sample point.
pub fn ks_distance<F: Fn(f64) -> f64>(batch: &SampleBatch, cdf_eval: F) -> Result<f64> {
    ks_distance_sorted(&batch.z, cdf_eval)
}

pub fn ks_distance_sorted<F: Fn(f64) -> f64>(sorted: &[f64], cdf_eval: F) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &z) in sorted.iter().enumerate() {
        let f = cdf_eval(z);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// 1% critical value of the KS statistic, asymptotic form.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}
