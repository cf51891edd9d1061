//! Discriminator-free training of map pairs on toy distributions.
//!
//! Both maps are two-hidden-layer tanh networks. The divergence terms of the
//! loss are replaced by squared MMD with a Gaussian-kernel mixture, which is
//! differentiable and vanishes exactly when the distributions agree. Cycle and
//! identity terms use L1. After training, `G` is classified against a list of
//! reference automorphisms of the source.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cycleloss::{pure_loss, LossConfig, LossReport, Norm, DEFAULT_HISTOGRAM_RESOLUTIONS};
use crate::divergence::{f_divergence_masses, DivergenceSpec};
use crate::error::{Error, Result};
use crate::maps::{interval_swap, is_measure_preserving, MeasurableMap};
use crate::net::{TanhNet, Trace};
use crate::probspace::{gaussian_mixture, gaussian_standard, sample_grid_stream, seeded_rng, GridDensity, GridSampler, SampleSet};

/// L1 distance below which a run counts as converged to a reference.
pub const CLASS_THRESHOLD: f64 = 0.1;

pub const UNCLASSIFIED: &str = "unclassified";

/// A step whose objective exceeds this multiple of the first step's objective
/// (floored at 1) counts as a blow-up. Tanh saturation keeps the objective
/// finite even for absurd learning rates, so non-finiteness alone is too weak.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

pub const DEFAULT_BANDWIDTHS: [f64; 4] = [0.25, 0.5, 1.0, 2.0];

/// TV tolerance for accepting a reference automorphism.
pub const REFERENCE_TOL: f64 = 1e-2;

const STREAM_INIT: u64 = 100;
const STREAM_BATCH: u64 = 101;
const STREAM_CLASSIFY: u64 = 102;
const STREAM_GRADCHECK: u64 = 200;

#[derive(Debug, Clone)]
pub struct Reference {
    pub name: String,
    pub map: MeasurableMap,
}

/// Source and target densities with named automorphisms of the source.
#[derive(Debug, Clone)]
pub struct ToyTask {
    pub name: String,
    pub source: GridDensity,
    pub target: GridDensity,
    pub references: Vec<Reference>,
}

impl ToyTask {
    /// Validates every reference as measure-preserving on the source.
    pub fn new(name: &str, source: GridDensity, target: GridDensity, references: Vec<Reference>) -> Result<ToyTask> {
        if source.dim() != target.dim() {
            return Err(Error::AmbientMismatch(source.dim(), target.dim()));
        }
        let space = source.clone().into();
        for r in &references {
            let report = is_measure_preserving(&r.map, &space, DivergenceSpec::TV, REFERENCE_TOL)?;
            if !report.verdict {
                return Err(Error::NotAutomorphism(format!(
                    "reference `{}`: TV = {:.3e}",
                    r.name, report.discrepancy
                )));
            }
        }
        Ok(ToyTask {
            name: name.into(),
            source,
            target,
            references,
        })
    }

    /// `1/2 N(-2, 0.3^2) + 1/2 N(2, 0.3^2)` on `[-4, 4]`, mapped to itself.
    pub fn bimodal() -> Result<ToyTask> {
        let d = gaussian_mixture(&[vec![-2.0], vec![2.0]], &[0.3], &[[-4.0, 4.0]], &[512])?;
        let reflection = MeasurableMap::point_reflection(&[0.0]);
        let swap = interval_swap(-4.0, 0.0, 4.0)?;
        let flip = reflection.then(&swap)?;
        let references = vec![
            Reference {
                name: "identity".into(),
                map: MeasurableMap::identity(1),
            },
            Reference {
                name: "reflection".into(),
                map: reflection,
            },
            Reference {
                name: "mode_swap".into(),
                map: swap,
            },
            Reference {
                name: "mode_flip".into(),
                map: flip,
            },
        ];
        ToyTask::new("bimodal", d.clone(), d, references)
    }

    /// Standard Gaussian on `[-6, 6]`, mapped to itself.
    pub fn gaussian() -> Result<ToyTask> {
        let d = gaussian_standard(1, 6.0, 512)?;
        let references = vec![
            Reference {
                name: "identity".into(),
                map: MeasurableMap::identity(1),
            },
            Reference {
                name: "reflection".into(),
                map: MeasurableMap::point_reflection(&[0.0]),
            },
        ];
        ToyTask::new("gaussian", d.clone(), d, references)
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }
}

/// Named task for configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    Bimodal,
    Gaussian,
}

impl TaskName {
    pub fn build(self) -> Result<ToyTask> {
        match self {
            TaskName::Bimodal => ToyTask::bimodal(),
            TaskName::Gaussian => ToyTask::gaussian(),
        }
    }
}

/// Distribution distance between sample sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Surrogate {
    /// Squared MMD, V-statistic, summed Gaussian kernels. Trainable.
    MmdGaussian { bandwidths: Vec<f64> },
    /// Jensen-Shannon divergence of histograms on a common box. Reporting only.
    HistogramJs { resolution: usize },
}

impl Default for Surrogate {
    fn default() -> Self {
        Surrogate::MmdGaussian {
            bandwidths: DEFAULT_BANDWIDTHS.to_vec(),
        }
    }
}

/// Learning-rate schedule over the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    Constant,
    /// Half-cosine from the base rate down to 0 at the last step.
    Cosine,
}

impl Schedule {
    pub fn rate(self, base: f64, step: usize, steps: usize) -> f64 {
        match self {
            Schedule::Constant => base,
            Schedule::Cosine => 0.5 * base * (1.0 + (std::f64::consts::PI * step as f64 / steps as f64).cos()),
        }
    }
}

fn default_hidden() -> [usize; 2] {
    [16, 16]
}
fn default_momentum() -> f64 {
    0.9
}
fn default_checkpoint_every() -> usize {
    100
}
fn default_eval_samples() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_hidden")]
    pub hidden: [usize; 2],
    pub steps: usize,
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub schedule: Schedule,
    /// Rescale the joint gradient of both nets to at most this L2 norm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_norm: Option<f64>,
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    pub alpha_cyc: f64,
    pub alpha_id: f64,
    #[serde(default)]
    pub surrogate: Surrogate,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    /// Monte Carlo samples for classification and the final loss report.
    #[serde(default = "default_eval_samples")]
    pub eval_samples: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.steps == 0 {
            return bad("steps must be >= 1".into());
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.batch_size < 2 {
            return bad("batch_size must be >= 2".into());
        }
        if !(self.alpha_cyc > 0.0) || !(self.alpha_id >= 0.0) {
            return bad("need alpha_cyc > 0 and alpha_id >= 0".into());
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return bad("clip_norm must be positive".into());
        }
        if self.checkpoint_every == 0 || self.eval_samples == 0 {
            return bad("checkpoint_every and eval_samples must be >= 1".into());
        }
        match &self.surrogate {
            Surrogate::MmdGaussian { bandwidths } => {
                if bandwidths.is_empty() || bandwidths.iter().any(|b| !(*b > 0.0)) {
                    return bad("bandwidths must be non-empty and positive".into());
                }
            }
            Surrogate::HistogramJs { resolution } => {
                if *resolution < 2 {
                    return bad("histogram resolution must be >= 2".into());
                }
            }
        }
        TanhNet::zeros(1, self.hidden, 1)?;
        Ok(())
    }

    fn bandwidths(&self) -> Result<&[f64]> {
        match &self.surrogate {
            Surrogate::MmdGaussian { bandwidths } => Ok(bandwidths),
            Surrogate::HistogramJs { .. } => Err(Error::InvalidConfig(
                "histogram_js is evaluation-only; training needs mmd_gaussian".into(),
            )),
        }
    }
}

/// Kernel sum and its gradient in `a`, given squared distance and `a - b`.
fn kernel(bandwidths: &[f64], d2: f64) -> (f64, f64) {
    // returns (k, dk/d(d2))
    let mut k = 0.0;
    let mut dk = 0.0;
    for &s in bandwidths {
        let inv = 1.0 / (2.0 * s * s);
        let e = (-d2 * inv).exp();
        k += e;
        dk -= inv * e;
    }
    (k, dk)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared MMD (V-statistic) between point sets `a` and `b` (flat, `dim`
/// columns). When `grad` is given, `d mmd / d a` is written into it.
pub fn mmd2(a: &[f64], b: &[f64], dim: usize, bandwidths: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
    let n = a.len() / dim;
    let m = b.len() / dim;
    let (nf, mf) = (n as f64, m as f64);
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    let mut aa = 0.0;
    for i in 0..n {
        let ai = &a[i * dim..(i + 1) * dim];
        aa += kernel(bandwidths, 0.0).0;
        for k in (i + 1)..n {
            let ak = &a[k * dim..(k + 1) * dim];
            let (kv, dk) = kernel(bandwidths, sq_dist(ai, ak));
            aa += 2.0 * kv;
            if let Some(g) = grad.as_deref_mut() {
                // d/da_i of (1/n^2) sum K = (2/n^2) dK/dd2 * 2 (a_i - a_k)
                let c = 4.0 * dk / (nf * nf);
                for t in 0..dim {
                    let diff = ai[t] - ak[t];
                    g[i * dim + t] += c * diff;
                    g[k * dim + t] -= c * diff;
                }
            }
        }
    }
    let mut bb = 0.0;
    for j in 0..m {
        let bj = &b[j * dim..(j + 1) * dim];
        bb += kernel(bandwidths, 0.0).0;
        for l in (j + 1)..m {
            bb += 2.0 * kernel(bandwidths, sq_dist(bj, &b[l * dim..(l + 1) * dim])).0;
        }
    }
    let mut ab = 0.0;
    for i in 0..n {
        let ai = &a[i * dim..(i + 1) * dim];
        for j in 0..m {
            let bj = &b[j * dim..(j + 1) * dim];
            let (kv, dk) = kernel(bandwidths, sq_dist(ai, bj));
            ab += kv;
            if let Some(g) = grad.as_deref_mut() {
                let c = -2.0 / (nf * mf) * dk * 2.0;
                for t in 0..dim {
                    g[i * dim + t] += c * (ai[t] - bj[t]);
                }
            }
        }
    }
    aa / (nf * nf) + bb / (mf * mf) - 2.0 * ab / (nf * mf)
}

/// Histogram JS between two sample sets on `bounds`, `resolution` bins per
/// axis plus one cell for everything outside the box.
pub fn histogram_js(a: &SampleSet, b: &SampleSet, bounds: &[[f64; 2]], resolution: usize) -> Result<f64> {
    let dim = bounds.len();
    if a.dim() != dim || b.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: a.dim().min(b.dim()),
        });
    }
    let hist = |s: &SampleSet| -> Vec<f64> {
        let cells = resolution.pow(dim as u32);
        let mut h = vec![0.0; cells + 1];
        for p in s.iter() {
            let mut flat = 0;
            let mut ok = true;
            for (t, &[lo, hi]) in bounds.iter().enumerate() {
                if !(p[t] >= lo && p[t] < hi) {
                    ok = false;
                    break;
                }
                let k = (((p[t] - lo) / (hi - lo)) * resolution as f64) as usize;
                flat = flat * resolution + k.min(resolution - 1);
            }
            h[if ok { flat } else { cells }] += 1.0;
        }
        h.iter_mut().for_each(|v| *v /= s.len() as f64);
        h
    };
    Ok(f_divergence_masses(DivergenceSpec::JS, &hist(a), &hist(b))?.value)
}

/// Surrogate distance between sample sets.
pub fn surrogate_distance(surrogate: &Surrogate, a: &SampleSet, b: &SampleSet, bounds: &[[f64; 2]]) -> Result<f64> {
    match surrogate {
        Surrogate::MmdGaussian { bandwidths } => {
            if a.dim() != b.dim() {
                return Err(Error::DimensionMismatch {
                    expected: a.dim(),
                    got: b.dim(),
                });
            }
            Ok(mmd2(a.coords(), b.coords(), a.dim(), bandwidths, None))
        }
        Surrogate::HistogramJs { resolution } => histogram_js(a, b, bounds, *resolution),
    }
}

/// Objective terms on one batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub surrogate_xy: f64,
    pub surrogate_yx: f64,
    pub cyc_x: f64,
    pub cyc_y: f64,
    pub id_x: f64,
    pub id_y: f64,
    pub total: f64,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Runs `net` on each row, keeping traces.
fn forward_rows(net: &TanhNet, rows: &[f64], dim: usize) -> (Vec<f64>, Vec<Trace>) {
    let mut out = Vec::with_capacity(rows.len());
    let mut traces = Vec::with_capacity(rows.len() / dim);
    for r in rows.chunks(dim) {
        let (o, t) = net.forward_traced(r);
        out.extend(o);
        traces.push(t);
    }
    (out, traces)
}

/// L1 mean of `a - b` by rows, with `scale * sign(a - b) / n` added to `grad`.
fn l1_term(a: &[f64], b: &[f64], dim: usize, scale: f64, grad: &mut [f64]) -> f64 {
    let n = (a.len() / dim) as f64;
    let mut total = 0.0;
    for t in 0..a.len() {
        let d = a[t] - b[t];
        total += d.abs();
        grad[t] += scale * sign(d) / n;
    }
    total / n
}

/// The surrogate objective on a batch and, when requested, its gradient with
/// respect to the parameters of `g` and `f` (accumulated into the buffers).
pub fn objective(
    g: &TanhNet,
    f: &TanhNet,
    xb: &[f64],
    yb: &[f64],
    config: &TrainConfig,
    grads: Option<(&mut [f64], &mut [f64])>,
) -> Result<StepRecord> {
    let bw = config.bandwidths()?;
    let dim = g.input_dim();
    let (a_c, a_i) = (config.alpha_cyc, config.alpha_id);
    let (u, tr_gx) = forward_rows(g, xb, dim);
    let (v, tr_fu) = forward_rows(f, &u, dim);
    let (w, tr_fy) = forward_rows(f, yb, dim);
    let (z, tr_gw) = forward_rows(g, &w, dim);

    let mut du = vec![0.0; u.len()];
    let mut dw = vec![0.0; w.len()];
    let surrogate_xy = mmd2(&u, yb, dim, bw, Some(&mut du));
    let surrogate_yx = mmd2(&w, xb, dim, bw, Some(&mut dw));
    let mut dv = vec![0.0; v.len()];
    let mut dz = vec![0.0; z.len()];
    let cyc_x = l1_term(&v, xb, dim, a_c, &mut dv);
    let cyc_y = l1_term(&z, yb, dim, a_c, &mut dz);
    let id_x = l1_term(&u, xb, dim, a_i, &mut du);
    let id_y = l1_term(&w, yb, dim, a_i, &mut dw);
    let total = surrogate_xy + surrogate_yx + a_c * (cyc_x + cyc_y) + a_i * (id_x + id_y);

    if let Some((gg, gf)) = grads {
        for (i, t) in tr_fu.iter().enumerate() {
            let back = f.backward(t, &dv[i * dim..(i + 1) * dim], gf);
            for (k, b) in back.into_iter().enumerate() {
                du[i * dim + k] += b;
            }
            g.backward(&tr_gx[i], &du[i * dim..(i + 1) * dim], gg);
        }
        for (j, t) in tr_gw.iter().enumerate() {
            let back = g.backward(t, &dz[j * dim..(j + 1) * dim], gg);
            for (k, b) in back.into_iter().enumerate() {
                dw[j * dim + k] += b;
            }
            f.backward(&tr_fy[j], &dw[j * dim..(j + 1) * dim], gf);
        }
    }
    Ok(StepRecord {
        surrogate_xy,
        surrogate_yx,
        cyc_x,
        cyc_y,
        id_x,
        id_y,
        total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    pub g: TanhNet,
    pub f: TanhNet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDistance {
    pub name: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    /// Nearest reference, regardless of threshold.
    pub nearest: String,
    pub distance: f64,
    pub distances: Vec<ReferenceDistance>,
}

impl Classification {
    /// The nearest reference when within [`CLASS_THRESHOLD`], else `unclassified`.
    pub fn class(&self) -> &str {
        if self.distance <= CLASS_THRESHOLD {
            &self.nearest
        } else {
            UNCLASSIFIED
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub history: Vec<StepRecord>,
    pub checkpoints: Vec<Checkpoint>,
    pub g: TanhNet,
    pub f: TanhNet,
    pub solution_class: String,
    pub class_distance: f64,
    pub classification: Classification,
    /// Loss of the final pair, histogram JS divergence terms.
    pub final_loss: LossReport,
}

/// Nearest reference under `E|G(x) - rho(x)|` (L1) over source samples;
/// ties go to the earlier reference.
pub fn classify_solution(g: &MeasurableMap, task: &ToyTask, mc_samples: usize, seed: u64) -> Result<Classification> {
    let xs = sample_grid_stream(&task.source, mc_samples, seed, STREAM_CLASSIFY)?;
    let gx = xs.iter().map(|p| g.apply(p)).collect::<Result<Vec<_>>>()?;
    let mut distances = Vec::with_capacity(task.references.len());
    for r in &task.references {
        let mut total = 0.0;
        for (p, q) in xs.iter().zip(&gx) {
            total += Norm::L1.distance(q, &r.map.apply(p)?);
        }
        distances.push(ReferenceDistance {
            name: r.name.clone(),
            distance: total / xs.len() as f64,
        });
    }
    let best = distances
        .iter()
        .fold(None::<&ReferenceDistance>, |acc, d| match acc {
            Some(a) if a.distance <= d.distance => Some(a),
            _ => Some(d),
        })
        .ok_or_else(|| Error::InvalidConfig("task has no references".into()))?;
    Ok(Classification {
        nearest: best.name.clone(),
        distance: best.distance,
        distances: distances.clone(),
    })
}

/// Loss configuration used to score trained pairs.
pub fn evaluation_config(config: &TrainConfig) -> LossConfig {
    LossConfig {
        alpha_cyc: config.alpha_cyc,
        alpha_id: config.alpha_id,
        divergence: DivergenceSpec::JS,
        norm: Norm::L1,
        mc_samples: config.eval_samples,
        seed: config.seed,
        histogram_resolutions: DEFAULT_HISTOGRAM_RESOLUTIONS,
    }
}

fn draw_batch<R: Rng>(sampler: &GridSampler, n: usize, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::new();
    for _ in 0..n {
        sampler.draw(rng, &mut out);
    }
    out
}

/// Trains `(G, F)` with momentum SGD on the surrogate objective.
pub fn train_toy(task: &ToyTask, config: &TrainConfig) -> Result<RunRecord> {
    config.validate()?;
    config.bandwidths()?;
    let dim = task.dim();
    let mut init = seeded_rng(config.seed, STREAM_INIT);
    let mut g = TanhNet::random(dim, config.hidden, dim, &mut init)?;
    let mut f = TanhNet::random(dim, config.hidden, dim, &mut init)?;
    let mut rng = seeded_rng(config.seed, STREAM_BATCH);
    let xs = GridSampler::new(&task.source)?;
    let ys = GridSampler::new(&task.target)?;
    let np = g.num_params();
    let (mut vg, mut vf) = (vec![0.0; np], vec![0.0; np]);
    let mut history = Vec::with_capacity(config.steps);
    let mut checkpoints = Vec::new();
    let mut limit = f64::INFINITY;
    for step in 0..config.steps {
        let xb = draw_batch(&xs, config.batch_size, &mut rng);
        let yb = draw_batch(&ys, config.batch_size, &mut rng);
        let (mut gg, mut gf) = (vec![0.0; np], vec![0.0; np]);
        let rec = objective(&g, &f, &xb, &yb, config, Some((&mut gg, &mut gf)))?;
        if !rec.total.is_finite() || rec.total > limit {
            return Err(Error::DivergedLoss { step, loss: rec.total });
        }
        if step == 0 {
            limit = DIVERGENCE_FACTOR * rec.total.max(1.0);
        }
        if let Some(clip) = config.clip_norm {
            let norm = gg.iter().chain(&gf).map(|v| v * v).sum::<f64>().sqrt();
            if norm > clip {
                let k = clip / norm;
                gg.iter_mut().chain(gf.iter_mut()).for_each(|v| *v *= k);
            }
        }
        let lr = config.schedule.rate(config.learning_rate, step, config.steps);
        for (net, vel, grad) in [(&mut g, &mut vg, &gg), (&mut f, &mut vf, &gf)] {
            for ((p, v), d) in net.params_mut().iter_mut().zip(vel.iter_mut()).zip(grad) {
                *v = config.momentum * *v - lr * d;
                *p += *v;
            }
        }
        history.push(rec);
        if (step + 1) % config.checkpoint_every == 0 {
            checkpoints.push(Checkpoint {
                step: step + 1,
                g: g.clone(),
                f: f.clone(),
            });
        }
    }
    let gm = MeasurableMap::net(g.clone());
    let fm = MeasurableMap::net(f.clone());
    let classification = classify_solution(&gm, task, config.eval_samples, config.seed)?;
    let final_loss = pure_loss(
        &gm,
        &fm,
        &task.source.clone().into(),
        &task.target.clone().into(),
        &evaluation_config(config),
    )?;
    Ok(RunRecord {
        task: task.name.clone(),
        seed: config.seed,
        config: config.clone(),
        history,
        checkpoints,
        g,
        f,
        solution_class: classification.class().to_string(),
        class_distance: classification.distance,
        classification,
        final_loss,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub histogram: BTreeMap<String, usize>,
    pub records: Vec<RunRecord>,
    pub converged: usize,
    /// `max - min` of final `total_pure` over converged runs.
    pub loss_equivalence_gap: Option<f64>,
}

impl SweepReport {
    pub fn frequency(&self, class: &str) -> f64 {
        *self.histogram.get(class).unwrap_or(&0) as f64 / self.records.len() as f64
    }

    pub const CSV_HEADER: &'static str = "seed,class,distance,total_pure,total_ext";

    pub fn csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.seed, r.solution_class, r.class_distance, r.final_loss.total_pure, r.final_loss.total_ext
            ));
        }
        out
    }
}

/// Trains once per seed and summarizes the learned classes.
pub fn seed_sweep(task: &ToyTask, config: &TrainConfig, seeds: &[u64]) -> Result<SweepReport> {
    if seeds.len() < 2 {
        return Err(Error::MinSeeds(seeds.len()));
    }
    let records = seeds
        .par_iter()
        .map(|&seed| {
            train_toy(
                task,
                &TrainConfig {
                    seed,
                    ..config.clone()
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut histogram = BTreeMap::new();
    for r in &records {
        *histogram.entry(r.solution_class.clone()).or_insert(0) += 1;
    }
    let converged: Vec<f64> = records
        .iter()
        .filter(|r| r.class_distance <= CLASS_THRESHOLD)
        .map(|r| r.final_loss.total_pure)
        .collect();
    let loss_equivalence_gap = if converged.is_empty() {
        None
    } else {
        let hi = converged.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = converged.iter().cloned().fold(f64::INFINITY, f64::min);
        Some(hi - lo)
    };
    Ok(SweepReport {
        histogram,
        converged: converged.len(),
        records,
        loss_equivalence_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    /// `|analytic - numeric| / max(|analytic|, |numeric|)` in L2, per point.
    pub relative_errors: Vec<f64>,
    pub max_relative_error: f64,
}

/// Compares analytic gradients with central differences at `points` random
/// parameter settings.
pub fn gradient_check(task: &ToyTask, config: &TrainConfig, points: usize, step: f64, seed: u64) -> Result<GradientCheck> {
    config.validate()?;
    let dim = task.dim();
    let batch = config.batch_size.min(16);
    let mut relative_errors = Vec::with_capacity(points);
    for p in 0..points {
        let mut rng = seeded_rng(seed, STREAM_GRADCHECK + p as u64);
        let g = TanhNet::random(dim, config.hidden, dim, &mut rng)?;
        let f = TanhNet::random(dim, config.hidden, dim, &mut rng)?;
        let xb = draw_batch(&GridSampler::new(&task.source)?, batch, &mut rng);
        let yb = draw_batch(&GridSampler::new(&task.target)?, batch, &mut rng);
        let np = g.num_params();
        let (mut gg, mut gf) = (vec![0.0; np], vec![0.0; np]);
        objective(&g, &f, &xb, &yb, config, Some((&mut gg, &mut gf)))?;
        let analytic: Vec<f64> = gg.into_iter().chain(gf).collect();
        let mut numeric = Vec::with_capacity(2 * np);
        for which in 0..2 {
            for k in 0..np {
                let eval = |delta: f64| -> Result<f64> {
                    let (mut g2, mut f2) = (g.clone(), f.clone());
                    let net = if which == 0 { &mut g2 } else { &mut f2 };
                    net.params_mut()[k] += delta;
                    Ok(objective(&g2, &f2, &xb, &yb, config, None)?.total)
                };
                numeric.push((eval(step)? - eval(-step)?) / (2.0 * step));
            }
        }
        let diff = analytic.iter().zip(&numeric).map(|(a, n)| (a - n) * (a - n)).sum::<f64>().sqrt();
        let scale = Norm::L2
            .of(analytic.iter().copied())
            .max(Norm::L2.of(numeric.iter().copied()))
            .max(1e-300);
        relative_errors.push(diff / scale);
    }
    let max_relative_error = relative_errors.iter().cloned().fold(0.0, f64::max);
    Ok(GradientCheck {
        relative_errors,
        max_relative_error,
    })
}

/// Fits `net` to `target` on source samples by least squares; used to build
/// approximants of known maps.
pub fn fit_supervised(
    net: &mut TanhNet,
    source: &GridDensity,
    target: &MeasurableMap,
    steps: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<()> {
    let sampler = GridSampler::new(source)?;
    let mut rng = seeded_rng(seed, STREAM_BATCH);
    let dim = net.input_dim();
    let mut vel = vec![0.0; net.num_params()];
    for _ in 0..steps {
        let xb = draw_batch(&sampler, 64, &mut rng);
        let mut grad = vec![0.0; net.num_params()];
        for x in xb.chunks(dim) {
            let (out, trace) = net.forward_traced(x);
            let want = target.apply(x)?;
            let d: Vec<f64> = out.iter().zip(&want).map(|(o, w)| 2.0 * (o - w) / 64.0).collect();
            net.backward(&trace, &d, &mut grad);
        }
        for ((p, v), d) in net.params_mut().iter_mut().zip(vel.iter_mut()).zip(&grad) {
            *v = 0.9 * *v - learning_rate * d;
            *p += *v;
        }
    }
    Ok(())
}
