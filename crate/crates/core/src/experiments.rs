//! Simulation study for the model constant on `[2, 3]`: standard deviation
//! table, equivalence checks between estimators, and figure data.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use crate::asymptotics::{sample_lx, sample_normal, sample_w, sigma_sq, LimitSample, LimitSettings};
use crate::error::{Error, Result};
use crate::estimators::{estimate, point_estimates, EstimatorId, EvalGrid, PointEstimates};
use crate::model::{Interval, SquaredRadiusCdf, WicksellModel, PRESET_NAMES};
use crate::quadrature::QuadratureSpec;
use crate::sampling::{sample_batch_with, LengthBiasedSampler, StreamKey};
use crate::stats::{correlation, mean, summarize};

const REPLICATE_TAG: u64 = 0x7AB1E;
const LIMIT_TAG: u64 = 0x11A1;
const FIGURE_TAG: u64 = 0xF16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Preset name or path to a cdf JSON document.
    pub model: String,
    pub flat: Interval,
    pub x: f64,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub limit: LimitSettings,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Batch size and repetitions for the histogram and scatter figures.
    pub figure_n: usize,
    pub figure_replications: usize,
    pub svg: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: "paper-sec5".into(),
            flat: Interval { lo: 2.0, hi: 3.0 },
            x: 2.5,
            sample_sizes: vec![100, 200, 400, 1000, 2000],
            replications: 2000,
            limit: LimitSettings::default(),
            master_seed: 20_240_601,
            output_dir: PathBuf::from("out"),
            figure_n: 1000,
            figure_replications: 300,
            svg: false,
        }
    }
}

impl ExperimentConfig {
    /// Reduced settings for smoke runs.
    pub fn quick() -> Self {
        ExperimentConfig {
            replications: 100,
            limit: LimitSettings { npaths: 2000, grid_m: 200, n_mc: 100_000 },
            figure_replications: 100,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x > self.flat.lo && self.x < self.flat.hi) {
            return Err(Error::InvalidArgument(format!("x = {} must lie inside the flat interval", self.x)));
        }
        if self.replications == 0 || self.figure_replications == 0 {
            return Err(Error::InvalidArgument("replications must be positive".into()));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) || self.figure_n == 0 {
            return Err(Error::InvalidArgument("sample sizes must be positive".into()));
        }
        if self.limit.grid_m < 2 || self.limit.npaths == 0 || self.limit.n_mc < 2 {
            return Err(Error::InvalidArgument("limit settings need grid_m >= 2, npaths >= 1, n_mc >= 2".into()));
        }
        Ok(())
    }
}

/// Loads a preset by name, or else a cdf JSON document from a path.
pub fn load_model(spec: &str) -> Result<WicksellModel> {
    if PRESET_NAMES.contains(&spec) {
        return WicksellModel::preset(spec);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Error::UnknownPreset(spec.to_string()));
    }
    let cdf = SquaredRadiusCdf::from_json_file(path)?;
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("custom");
    WicksellModel::with_id(cdf, QuadratureSpec::default(), id)
}

/// One cell: an sd with its Monte Carlo standard error, or NA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub statistic: String,
    /// Sample size, or `None` for a limit law.
    pub n: Option<usize>,
    pub sd: Option<f64>,
    pub mc_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<TableRow>,
    pub master_seed: u64,
    pub replications: usize,
}

impl ResultTable {
    pub fn get(&self, statistic: &str, n: Option<usize>) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.statistic == statistic && r.n == n)
    }

    pub fn has_na(&self) -> bool {
        self.rows.iter().any(|r| r.sd.is_none())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["statistic", "n", "sd", "mc_se", "replications", "master_seed"])?;
        let fmt = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{v:.6}"));
        for r in &self.rows {
            let n = r.n.map_or("limit".to_string(), |n| n.to_string());
            wr.write_record([
                r.statistic.clone(),
                n,
                fmt(r.sd),
                fmt(r.mc_se),
                self.replications.to_string(),
                self.master_seed.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn row(statistic: &str, n: Option<usize>, draws: &[f64]) -> TableRow {
    let s = summarize(draws);
    TableRow { statistic: statistic.into(), n, sd: s.map(|s| s.sd), mc_se: s.map(|s| s.sd_se) }
}

fn limit_row(sample: &LimitSample) -> TableRow {
    let s = sample.summary();
    TableRow {
        statistic: sample.law_id.as_str().into(),
        n: None,
        sd: s.sd.is_finite().then_some(s.sd),
        mc_se: s.mc_se.is_finite().then_some(s.mc_se),
    }
}

/// Key of replicate `r` at sample size `n`; shared by all experiments so
/// that they see the same batches.
pub fn replicate_key(master_seed: u64, n: usize, r: usize) -> StreamKey {
    let family = StreamKey::new(master_seed, n as u64).child(REPLICATE_TAG);
    StreamKey::new(family.master_seed, r as u64)
}

/// Point estimates at `x` for `reps` independent batches of size `n`.
pub fn replicate_estimates(
    model: &WicksellModel,
    sampler: &LengthBiasedSampler,
    config: &ExperimentConfig,
    n: usize,
    reps: usize,
    master_seed: u64,
) -> Result<Vec<PointEstimates>> {
    let m = model.support_bound();
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let batch = sample_batch_with(sampler, &model.id, n, replicate_key(master_seed, n, r));
            point_estimates(&batch, config.flat, m, config.x)
        })
        .collect()
}

fn scaled(est: &[PointEstimates], n: usize, f: impl Fn(&PointEstimates) -> f64) -> Vec<f64> {
    let rn = (n as f64).sqrt();
    est.iter().map(|e| rn * f(e)).collect()
}

/// Standard deviations of `√n (V^slope − V)(x)` and `√n (iie − V)(x)` per
/// sample size, followed by the limit laws `N(0, σ²)` and `L_x`.
pub fn run_table1(config: &ExperimentConfig, model: &WicksellModel) -> Result<ResultTable> {
    config.validate()?;
    let sampler = LengthBiasedSampler::new(&model.cdf, &model.quad)?;
    let v = model.function_v(config.x);
    let mut rows = Vec::new();
    for &n in &config.sample_sizes {
        let est = replicate_estimates(model, &sampler, config, n, config.replications, config.master_seed)?;
        rows.push(row("slope", Some(n), &scaled(&est, n, |e| e.slope - v)));
        rows.push(row("iie", Some(n), &scaled(&est, n, |e| e.iie - v)));
    }
    let sigma = sigma_sq(model, config.flat)?.sqrt();
    rows.push(TableRow { statistic: "Normal".into(), n: None, sd: Some(sigma), mc_se: Some(0.0) });
    let key = StreamKey::new(config.master_seed, 0).child(LIMIT_TAG);
    rows.push(limit_row(&sample_lx(model, config.flat, config.x, config.limit, key)?));
    Ok(ResultTable { rows, master_seed: config.master_seed, replications: config.replications })
}

/// Standard deviations of the scaled differences between estimators, per
/// sample size, with `W` as the limit of the IIE difference.
pub fn run_equivalence(config: &ExperimentConfig, model: &WicksellModel) -> Result<ResultTable> {
    config.validate()?;
    let sampler = LengthBiasedSampler::new(&model.cdf, &model.quad)?;
    let mut rows = Vec::new();
    for &n in &config.sample_sizes {
        let est = replicate_estimates(model, &sampler, config, n, config.replications, config.master_seed)?;
        rows.push(row("proj-naive-slope", Some(n), &scaled(&est, n, |e| e.projected_naive - e.slope)));
        rows.push(row("proj-iie-slope", Some(n), &scaled(&est, n, |e| e.projected_iie - e.slope)));
        rows.push(row("iie-slope", Some(n), &scaled(&est, n, |e| e.iie - e.slope)));
    }
    let key = StreamKey::new(config.master_seed, 0).child(LIMIT_TAG + 1);
    rows.push(limit_row(&sample_w(model, config.flat, config.x, config.limit, key)?));
    Ok(ResultTable { rows, master_seed: config.master_seed, replications: config.replications })
}

/// Per meta-seed comparison of the sd of `√n (projected_naive − slope)(x)`
/// at a small and a large sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceTrend {
    pub n_small: usize,
    pub n_large: usize,
    pub replications: usize,
    pub sd_small: Vec<f64>,
    pub sd_large: Vec<f64>,
}

impl EquivalenceTrend {
    pub fn decreasing(&self) -> usize {
        self.sd_small.iter().zip(&self.sd_large).filter(|(a, b)| b < a).count()
    }
}

pub fn equivalence_trend(
    config: &ExperimentConfig,
    model: &WicksellModel,
    n_small: usize,
    n_large: usize,
    meta_seeds: usize,
    replications: usize,
) -> Result<EquivalenceTrend> {
    config.validate()?;
    let sampler = LengthBiasedSampler::new(&model.cdf, &model.quad)?;
    let sd = |n: usize, seed: u64| -> Result<f64> {
        let est = replicate_estimates(model, &sampler, config, n, replications, seed)?;
        Ok(summarize(&scaled(&est, n, |e| e.projected_naive - e.slope)).map_or(f64::NAN, |s| s.sd))
    };
    let mut sd_small = Vec::with_capacity(meta_seeds);
    let mut sd_large = Vec::with_capacity(meta_seeds);
    for k in 0..meta_seeds {
        let seed = StreamKey::new(config.master_seed, k as u64).child(0xE0).master_seed;
        sd_small.push(sd(n_small, seed)?);
        sd_large.push(sd(n_large, seed)?);
    }
    Ok(EquivalenceTrend { n_small, n_large, replications, sd_small, sd_large })
}

/// Gaussian kernel density estimate with bandwidth `3.5 σ̂ n^{-1/3}`.
pub fn kde_scott(draws: &[f64], eval: &[f64]) -> Result<Vec<f64>> {
    let s = summarize(draws).ok_or_else(|| Error::DegenerateSample("need at least two draws".into()))?;
    if !(s.sd > 0.0) {
        return Err(Error::DegenerateSample("draws have zero spread".into()));
    }
    let h = scott_bandwidth(s.sd, draws.len());
    let norm = 1.0 / (draws.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    Ok(eval
        .iter()
        .map(|&t| {
            let terms: Vec<f64> = draws.iter().map(|d| (-0.5 * ((t - d) / h).powi(2)).exp()).collect();
            norm * crate::stats::pairwise_sum(&terms)
        })
        .collect())
}

pub fn scott_bandwidth(sd: f64, n: usize) -> f64 {
    3.5 * sd * (n as f64).powf(-1.0 / 3.0)
}

/// Paths of the files written by [`run_figures`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FigureFiles {
    pub files: Vec<PathBuf>,
    pub tukey_mean_diff: f64,
    pub tukey_mean_diff_se: f64,
    pub scatter_correlation: f64,
}

fn create(dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = BufWriter::new(File::create(&path)?);
    files.push(path);
    Ok(f)
}

/// Writes the overlay, scatter/Tukey and histogram data under
/// `output_dir/figures`.
pub fn run_figures(config: &ExperimentConfig, model: &WicksellModel) -> Result<FigureFiles> {
    config.validate()?;
    let dir = config.output_dir.join("figures");
    fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    let m = model.support_bound();
    let n = config.figure_n;
    let sampler = LengthBiasedSampler::new(&model.cdf, &model.quad)?;

    // overlay of all estimators from one batch
    let key = StreamKey::new(config.master_seed, 0).child(FIGURE_TAG);
    let batch = sample_batch_with(&sampler, &model.id, n, key);
    let lo = (config.flat.lo - 1.0).max(0.0);
    let hi = (config.flat.hi + 1.0).min(m);
    let xs: Vec<f64> = (0..=300).map(|i| lo + (hi - lo) * i as f64 / 300.0).collect();
    let mut mandatory = xs.clone();
    mandatory.extend([config.flat.lo, config.flat.hi]);
    let grid = EvalGrid::new(m, 2000, &mandatory)?;
    let curves: Vec<_> =
        EstimatorId::ALL.iter().map(|id| estimate(&batch, *id, config.flat, &grid)).collect::<Result<_>>()?;
    let mut w = csv::Writer::from_writer(create(&dir, "overlay.csv", &mut files)?);
    let mut header = vec!["x".to_string()];
    header.extend(EstimatorId::ALL.iter().map(|e| e.as_str().to_string()));
    header.push("true_v".into());
    w.write_record(&header)?;
    let mut series: Vec<Vec<(f64, f64)>> = vec![Vec::new(); curves.len() + 1];
    for &x in &xs {
        let mut rec = vec![x.to_string()];
        for (c, s) in curves.iter().zip(series.iter_mut()) {
            let y = c.eval(x);
            s.push((x, y));
            rec.push(y.to_string());
        }
        let tv = model.function_v(x);
        series[curves.len()].push((x, tv));
        rec.push(tv.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    if config.svg {
        let mut names: Vec<&str> = EstimatorId::ALL.iter().map(|e| e.as_str()).collect();
        names.push("true_v");
        write_line_svg(create(&dir, "overlay.svg", &mut files)?, &series, &names)?;
    }

    // scatter and Tukey mean-difference
    let reps = config.figure_replications;
    let est = replicate_estimates(model, &sampler, config, n, reps, config.master_seed ^ FIGURE_TAG)?;
    let v = model.function_v(config.x);
    let iie = scaled(&est, n, |e| e.iie - v);
    let slope = scaled(&est, n, |e| e.slope - v);
    let diff: Vec<f64> = iie.iter().zip(&slope).map(|(a, b)| a - b).collect();
    let mut w = csv::Writer::from_writer(create(&dir, "scatter.csv", &mut files)?);
    w.write_record(["replicate", "iie", "slope", "tukey_mean", "tukey_diff"])?;
    for (r, (a, b)) in iie.iter().zip(&slope).enumerate() {
        w.write_record([r.to_string(), a.to_string(), b.to_string(), (0.5 * (a + b)).to_string(), (a - b).to_string()])?;
    }
    w.flush()?;
    if config.svg {
        let pts: Vec<(f64, f64)> = iie.iter().copied().zip(slope.iter().copied()).collect();
        write_scatter_svg(create(&dir, "scatter.svg", &mut files)?, &pts)?;
    }
    let dsum = summarize(&diff);

    // centered histograms with matching limit draws
    let limit_key = StreamKey::new(config.master_seed, 1).child(FIGURE_TAG);
    let settings = config.limit;
    let lx = sample_lx(model, config.flat, config.x, settings, limit_key)?;
    let wd = sample_w(model, config.flat, config.x, settings, limit_key.child(1))?;
    let normal = sample_normal(sigma_sq(model, config.flat)?.sqrt(), settings.npaths, limit_key.child(2));
    let groups: [(&str, &[f64], &LimitSample); 3] =
        [("iie", &iie, &lx), ("slope", &slope, &normal), ("iie-slope", &diff, &wd)];
    let mut hw = csv::Writer::from_writer(create(&dir, "histograms.csv", &mut files)?);
    hw.write_record(["statistic", "source", "value"])?;
    let mut kw = csv::Writer::from_writer(create(&dir, "kde.csv", &mut files)?);
    kw.write_record(["statistic", "source", "x", "density"])?;
    for (name, finite, limit) in groups {
        let (lo, hi) = finite
            .iter()
            .chain(&limit.draws)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        let eval: Vec<f64> = (0..=200).map(|i| lo + (hi - lo) * i as f64 / 200.0).collect();
        for (source, draws) in [("finite", finite), ("limit", limit.draws.as_slice())] {
            for d in draws {
                hw.write_record([name, source, &d.to_string()])?;
            }
            // a degenerate sample has no density to draw
            if let Ok(dens) = kde_scott(draws, &eval) {
                for (x, d) in eval.iter().zip(dens) {
                    kw.write_record([name, source, &x.to_string(), &d.to_string()])?;
                }
            }
        }
    }
    hw.flush()?;
    kw.flush()?;

    Ok(FigureFiles {
        files,
        tukey_mean_diff: dsum.map_or(mean(&diff), |s| s.mean),
        tukey_mean_diff_se: dsum.map_or(f64::NAN, |s| s.mean_se),
        scatter_correlation: correlation(&iie, &slope).unwrap_or(f64::NAN),
    })
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 400.0;
const COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#000000"];

fn bounds<'a>(pts: impl Iterator<Item = &'a (f64, f64)>) -> (f64, f64, f64, f64) {
    pts.fold((f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY), |b, (x, y)| {
        (b.0.min(*x), b.1.max(*x), b.2.min(*y), b.3.max(*y))
    })
}

fn project(p: (f64, f64), b: (f64, f64, f64, f64)) -> (f64, f64) {
    let sx = if b.1 > b.0 { (p.0 - b.0) / (b.1 - b.0) } else { 0.5 };
    let sy = if b.3 > b.2 { (p.1 - b.2) / (b.3 - b.2) } else { 0.5 };
    (40.0 + sx * (SVG_W - 60.0), SVG_H - 30.0 - sy * (SVG_H - 50.0))
}

fn write_line_svg<W: Write>(mut w: W, series: &[Vec<(f64, f64)>], names: &[&str]) -> Result<()> {
    let b = bounds(series.iter().flatten());
    writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}">"#)?;
    for (i, (s, name)) in series.iter().zip(names).enumerate() {
        let pts: Vec<String> = s.iter().map(|p| project(*p, b)).map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let color = COLORS[i % COLORS.len()];
        writeln!(w, r#"<polyline fill="none" stroke="{color}" points="{}"/>"#, pts.join(" "))?;
        writeln!(w, r#"<text x="{}" y="{}" fill="{color}" font-size="12">{name}</text>"#, SVG_W - 110.0, 20.0 + 14.0 * i as f64)?;
    }
    writeln!(w, "</svg>")?;
    Ok(())
}

fn write_scatter_svg<W: Write>(mut w: W, pts: &[(f64, f64)]) -> Result<()> {
    let b = bounds(pts.iter());
    writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}">"#)?;
    for p in pts {
        let (x, y) = project(*p, b);
        writeln!(w, r#"<circle cx="{x:.1}" cy="{y:.1}" r="2" fill="{}"/>"#, COLORS[0])?;
    }
    writeln!(w, "</svg>")?;
    Ok(())
}

/// Record of one reproduction run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub model_id: String,
    /// Hash of the config and model document, in the form `git hash-object` uses.
    pub input_hash: String,
    pub outputs: Vec<PathBuf>,
    pub complete: bool,
    pub error: Option<String>,
}

/// SHA-1 of `blob <len>\0<content>`.
pub fn content_hash(content: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new(config: &ExperimentConfig, model: &WicksellModel) -> Result<Self> {
        let mut input = serde_json::to_vec(config)?;
        input.extend(serde_json::to_vec(model.cdf.document())?);
        Ok(Manifest {
            config: config.clone(),
            model_id: model.id.clone(),
            input_hash: content_hash(&input),
            outputs: Vec::new(),
            complete: false,
            error: None,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }
}

/// Outcome of [`reproduce`].
#[derive(Debug, Clone)]
pub struct Reproduction {
    pub table1: ResultTable,
    pub equivalence: ResultTable,
    pub figures: FigureFiles,
    pub manifest: Manifest,
}

/// Runs every experiment and writes `table1.csv`, `equivalence.csv`,
/// `figures/` and `manifest.json`. On failure the manifest is still written
/// with the outputs produced so far.
pub fn reproduce(config: &ExperimentConfig, model: &WicksellModel) -> Result<Reproduction> {
    fs::create_dir_all(&config.output_dir)?;
    let mut manifest = Manifest::new(config, model)?;
    let manifest_path = config.output_dir.join("manifest.json");
    let result = (|| -> Result<(ResultTable, ResultTable, FigureFiles)> {
        let t1 = run_table1(config, model)?;
        let p = config.output_dir.join("table1.csv");
        t1.write_csv(BufWriter::new(File::create(&p)?))?;
        manifest.outputs.push(p);
        let eq = run_equivalence(config, model)?;
        let p = config.output_dir.join("equivalence.csv");
        eq.write_csv(BufWriter::new(File::create(&p)?))?;
        manifest.outputs.push(p);
        let figs = run_figures(config, model)?;
        manifest.outputs.extend(figs.files.iter().cloned());
        Ok((t1, eq, figs))
    })();
    match result {
        Ok((table1, equivalence, figures)) => {
            manifest.complete = true;
            manifest.save(&manifest_path)?;
            Ok(Reproduction { table1, equivalence, figures, manifest })
        }
        Err(e) => {
            manifest.error = Some(format!("{}: {e}", e.id()));
            manifest.save(&manifest_path)?;
            Err(e)
        }
    }
}
