//! Pure and extended cycle losses, itemized by term.
//!
//! Finite spaces are evaluated exactly with labels embedded one-hot, so two
//! distinct labels are at distance 2 under L1 and sqrt(2) under L2. Densities
//! on grids use Monte Carlo for the expectation terms; their divergence terms
//! go through the grid push-forward when the map is invertible and through
//! histograms of mapped samples otherwise.

use serde::{Deserialize, Serialize};

use crate::divergence::{f_divergence_grid, f_divergence_masses, DivergenceSpec, DivergenceValue};
use crate::error::{Error, Result};
use crate::maps::{pushforward_grid, MeasurableMap};
use crate::probspace::{sample_grid_stream, FiniteSpace, GridDensity, SampleSet, Space};

pub const DEFAULT_MC_SAMPLES: usize = 100_000;

/// Histogram bins per axis for the sample-based divergence route. The middle
/// entry is the headline value.
pub const DEFAULT_HISTOGRAM_RESOLUTIONS: [usize; 3] = [16, 32, 64];

/// Generator streams for samples of X and Y.
pub const STREAM_X: u64 = 1;
pub const STREAM_Y: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Norm {
    #[default]
    L1,
    L2,
}

impl Norm {
    pub fn of(self, v: impl Iterator<Item = f64>) -> f64 {
        match self {
            Norm::L1 => v.map(f64::abs).sum(),
            Norm::L2 => v.map(|x| x * x).sum::<f64>().sqrt(),
        }
    }

    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        self.of(a.iter().zip(b).map(|(x, y)| x - y))
    }

    /// Distance between two distinct one-hot vectors.
    pub fn label_mismatch(self) -> f64 {
        match self {
            Norm::L1 => 2.0,
            Norm::L2 => std::f64::consts::SQRT_2,
        }
    }
}

fn default_mc_samples() -> usize {
    DEFAULT_MC_SAMPLES
}

fn default_histogram() -> [usize; 3] {
    DEFAULT_HISTOGRAM_RESOLUTIONS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub alpha_cyc: f64,
    pub alpha_id: f64,
    pub divergence: DivergenceSpec,
    #[serde(default)]
    pub norm: Norm,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_histogram")]
    pub histogram_resolutions: [usize; 3],
}

impl LossConfig {
    pub fn new(alpha_cyc: f64, alpha_id: f64, divergence: DivergenceSpec) -> LossConfig {
        LossConfig {
            alpha_cyc,
            alpha_id,
            divergence,
            norm: Norm::L1,
            mc_samples: DEFAULT_MC_SAMPLES,
            seed: 0,
            histogram_resolutions: DEFAULT_HISTOGRAM_RESOLUTIONS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_cyc > 0.0) || !self.alpha_cyc.is_finite() {
            return Err(Error::InvalidConfig(format!("alpha_cyc must be > 0, got {}", self.alpha_cyc)));
        }
        if !(self.alpha_id >= 0.0) || !self.alpha_id.is_finite() {
            return Err(Error::InvalidConfig(format!("alpha_id must be >= 0, got {}", self.alpha_id)));
        }
        if self.mc_samples == 0 {
            return Err(Error::InvalidConfig("mc_samples must be >= 1".into()));
        }
        if self.histogram_resolutions.iter().any(|&r| r < 2) {
            return Err(Error::InvalidConfig("histogram resolutions must be >= 2".into()));
        }
        Ok(())
    }
}

/// How a divergence term was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceRoute {
    Exact,
    Grid,
    Histogram,
}

/// Monte Carlo standard errors of the expectation terms (0 on finite spaces).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TermErrors {
    pub cyc_x: f64,
    pub cyc_y: f64,
    pub id_x: f64,
    pub id_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub div_xy: f64,
    pub div_yx: f64,
    pub cyc_x: f64,
    pub cyc_y: f64,
    pub id_x: f64,
    pub id_y: f64,
    pub total_pure: f64,
    pub total_ext: f64,
    pub alpha_cyc: f64,
    pub alpha_id: f64,
    pub divergence: DivergenceSpec,
    pub norm: Norm,
    pub mc_stderr: TermErrors,
    pub route_xy: DivergenceRoute,
    pub route_yx: DivergenceRoute,
    /// Values at each histogram resolution, when that route was used.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub histogram_xy: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub histogram_yx: Option<[f64; 3]>,
    pub support_violation: bool,
    /// False when X and Y have different dimensions; identity terms are then 0.
    pub identity_defined: bool,
}

impl LossReport {
    pub const CSV_HEADER: &'static str =
        "div_xy,div_yx,cyc_x,cyc_y,id_x,id_y,total_pure,total_ext,stderr_cyc_x,stderr_cyc_y,stderr_id_x,stderr_id_y,support_violation";

    pub fn csv_row(&self) -> String {
        let e = &self.mc_stderr;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.div_xy,
            self.div_yx,
            self.cyc_x,
            self.cyc_y,
            self.id_x,
            self.id_y,
            self.total_pure,
            self.total_ext,
            e.cyc_x,
            e.cyc_y,
            e.id_x,
            e.id_y,
            self.support_violation
        )
    }

    fn assemble(
        div_xy: Divergence,
        div_yx: Divergence,
        terms: [(f64, f64); 4],
        identity_defined: bool,
        config: &LossConfig,
    ) -> LossReport {
        let [(cyc_x, e_cx), (cyc_y, e_cy), (id_x, e_ix), (id_y, e_iy)] = terms;
        let total_pure = div_xy.value + div_yx.value + config.alpha_cyc * (cyc_x + cyc_y);
        let total_ext = total_pure + config.alpha_id * (id_x + id_y);
        LossReport {
            div_xy: div_xy.value,
            div_yx: div_yx.value,
            cyc_x,
            cyc_y,
            id_x,
            id_y,
            total_pure,
            total_ext,
            alpha_cyc: config.alpha_cyc,
            alpha_id: config.alpha_id,
            divergence: config.divergence,
            norm: config.norm,
            mc_stderr: TermErrors {
                cyc_x: e_cx,
                cyc_y: e_cy,
                id_x: e_ix,
                id_y: e_iy,
            },
            route_xy: div_xy.route,
            route_yx: div_yx.route,
            histogram_xy: div_xy.histogram,
            histogram_yx: div_yx.histogram,
            support_violation: div_xy.support_violation || div_yx.support_violation,
            identity_defined,
        }
    }
}

/// Per-sample values of the expectation terms, in sample order.
#[derive(Debug, Clone, PartialEq)]
pub struct TermSamples {
    pub cyc_x: Vec<f64>,
    pub cyc_y: Vec<f64>,
    pub id_x: Vec<f64>,
    pub id_y: Vec<f64>,
}

/// A report together with the draws behind it (continuous spaces only).
#[derive(Debug, Clone, PartialEq)]
pub struct LossEvaluation {
    pub report: LossReport,
    pub samples: Option<TermSamples>,
}

#[derive(Debug, Clone, Copy)]
struct Divergence {
    value: f64,
    route: DivergenceRoute,
    histogram: Option<[f64; 3]>,
    support_violation: bool,
}

impl From<DivergenceValue> for Divergence {
    fn from(d: DivergenceValue) -> Self {
        Divergence {
            value: d.value,
            route: DivergenceRoute::Exact,
            histogram: None,
            support_violation: d.support_violation,
        }
    }
}

/// Mean and standard error of the mean.
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// The sample sets used for X and Y under `seed`.
pub fn draw_samples(x: &GridDensity, y: &GridDensity, n: usize, seed: u64) -> Result<(SampleSet, SampleSet)> {
    Ok((
        sample_grid_stream(x, n, seed, STREAM_X)?,
        sample_grid_stream(y, n, seed, STREAM_Y)?,
    ))
}

fn check_dims(g: &MeasurableMap, f: &MeasurableMap, dx: usize, dy: usize) -> Result<()> {
    for (expected, got) in [
        (dx, g.domain_dim()),
        (dy, g.codomain_dim()),
        (dy, f.domain_dim()),
        (dx, f.codomain_dim()),
    ] {
        if expected != got {
            return Err(Error::DimensionMismatch { expected, got });
        }
    }
    Ok(())
}

fn apply_all(map: &MeasurableMap, samples: &SampleSet) -> Result<Vec<Vec<f64>>> {
    samples.iter().map(|p| map.apply(p)).collect()
}

/// Histogram of `points` on `target`'s box compared with `target`'s mass per
/// bin, at each resolution. Points outside the box land in one extra cell.
fn histogram_divergence(
    spec: DivergenceSpec,
    points: &[Vec<f64>],
    target: &GridDensity,
    resolutions: [usize; 3],
) -> Result<Divergence> {
    let bounds = target.bounds();
    let dim = target.dim();
    let bin_of = |p: &[f64], r: usize| -> Option<usize> {
        let mut flat = 0;
        for a in 0..dim {
            let [lo, hi] = bounds[a];
            if !(p[a] >= lo && p[a] < hi) {
                return None;
            }
            let k = (((p[a] - lo) / (hi - lo)) * r as f64) as usize;
            flat = flat * r + k.min(r - 1);
        }
        Some(flat)
    };
    let masses = target.cell_masses();
    let mut values = [0.0; 3];
    let mut violation = false;
    for (slot, &r) in resolutions.iter().enumerate() {
        // the last cell collects everything outside the box, where the target has no mass
        let cells = r.pow(dim as u32);
        let mut p = vec![0.0; cells + 1];
        for pt in points {
            p[bin_of(pt, r).unwrap_or(cells)] += 1.0;
        }
        p.iter_mut().for_each(|v| *v /= points.len() as f64);
        let mut q = vec![0.0; cells + 1];
        target.for_each_center(|flat, c| {
            if let Some(b) = bin_of(c, r) {
                q[b] += masses[flat];
            }
        });
        let total: f64 = q.iter().sum();
        q.iter_mut().for_each(|v| *v /= total);
        let d = f_divergence_masses(spec, &p, &q)?;
        values[slot] = d.value;
        violation |= d.support_violation;
    }
    Ok(Divergence {
        value: values[1],
        route: DivergenceRoute::Histogram,
        histogram: Some(values),
        support_violation: violation,
    })
}

fn grid_divergence(
    spec: DivergenceSpec,
    map: &MeasurableMap,
    source: &GridDensity,
    target: &GridDensity,
    mapped: &[Vec<f64>],
    resolutions: [usize; 3],
) -> Result<Divergence> {
    let invertible = map.inverse().is_some_and(|inv| inv.has_jacobian());
    if invertible {
        match pushforward_grid(map, source, Some((target.bounds(), target.resolution()))) {
            Ok(pushed) => {
                let d = f_divergence_grid(spec, &pushed, target)?;
                return Ok(Divergence {
                    route: DivergenceRoute::Grid,
                    ..d.into()
                });
            }
            Err(Error::TargetBoxTooSmall(_)) => {
                let mut d = histogram_divergence(spec, mapped, target, resolutions)?;
                d.support_violation = true;
                return Ok(d);
            }
            Err(e) => return Err(e),
        }
    }
    histogram_divergence(spec, mapped, target, resolutions)
}

fn evaluate_grid(
    g: &MeasurableMap,
    f: &MeasurableMap,
    x: &GridDensity,
    y: &GridDensity,
    config: &LossConfig,
) -> Result<LossEvaluation> {
    check_dims(g, f, x.dim(), y.dim())?;
    let (xs, ys) = draw_samples(x, y, config.mc_samples, config.seed)?;
    let gx = apply_all(g, &xs)?;
    let fy = apply_all(f, &ys)?;
    let norm = config.norm;
    let cyc_x = gx
        .iter()
        .zip(xs.iter())
        .map(|(u, x0)| Ok(norm.distance(&f.apply(u)?, x0)))
        .collect::<Result<Vec<_>>>()?;
    let cyc_y = fy
        .iter()
        .zip(ys.iter())
        .map(|(v, y0)| Ok(norm.distance(&g.apply(v)?, y0)))
        .collect::<Result<Vec<_>>>()?;
    let identity_defined = x.dim() == y.dim();
    let (id_x, id_y) = if identity_defined {
        (
            gx.iter().zip(xs.iter()).map(|(u, x0)| norm.distance(u, x0)).collect(),
            fy.iter().zip(ys.iter()).map(|(v, y0)| norm.distance(v, y0)).collect(),
        )
    } else {
        (vec![0.0; xs.len()], vec![0.0; ys.len()])
    };
    let res = config.histogram_resolutions;
    let div_xy = grid_divergence(config.divergence, g, x, y, &gx, res)?;
    let div_yx = grid_divergence(config.divergence, f, y, x, &fy, res)?;
    let terms = [
        mean_stderr(&cyc_x),
        mean_stderr(&cyc_y),
        mean_stderr(&id_x),
        mean_stderr(&id_y),
    ];
    Ok(LossEvaluation {
        report: LossReport::assemble(div_xy, div_yx, terms, identity_defined, config),
        samples: Some(TermSamples {
            cyc_x,
            cyc_y,
            id_x,
            id_y,
        }),
    })
}

/// Mass of `space` pushed through `map`, in `target`'s label order, without
/// renormalization so that exact permutations stay exact.
fn pushed_masses(map: &MeasurableMap, space: &FiniteSpace, target: &FiniteSpace) -> Result<Vec<f64>> {
    let table = map.to_table(space)?;
    let mut out = vec![0.0; target.len()];
    for (i, &j) in table.assignment().iter().enumerate() {
        let label = &table.codomain()[j];
        let k = target.index_of(label).ok_or_else(|| Error::UnknownLabel(label.clone()))?;
        out[k] += space.masses()[i];
    }
    Ok(out)
}

/// Atom-weighted mismatch cost of `map` against the identity embedding of
/// `space`'s labels.
fn label_term(map: &MeasurableMap, space: &FiniteSpace, norm: Norm) -> Result<f64> {
    let table = map.to_table(space)?;
    Ok(table
        .assignment()
        .iter()
        .enumerate()
        .filter(|&(i, &j)| table.codomain()[j] != space.labels()[i])
        .map(|(i, _)| space.masses()[i] * norm.label_mismatch())
        .sum())
}

fn evaluate_finite(
    g: &MeasurableMap,
    f: &MeasurableMap,
    x: &FiniteSpace,
    y: &FiniteSpace,
    config: &LossConfig,
) -> Result<LossEvaluation> {
    let spec = config.divergence;
    let div_xy = f_divergence_masses(spec, &pushed_masses(g, x, y)?, y.masses())?;
    let div_yx = f_divergence_masses(spec, &pushed_masses(f, y, x)?, x.masses())?;
    let norm = config.norm;
    let cyc_x = label_term(&g.then(f)?, x, norm)?;
    let cyc_y = label_term(&f.then(g)?, y, norm)?;
    let id_x = label_term(g, x, norm)?;
    let id_y = label_term(f, y, norm)?;
    let terms = [(cyc_x, 0.0), (cyc_y, 0.0), (id_x, 0.0), (id_y, 0.0)];
    Ok(LossEvaluation {
        report: LossReport::assemble(div_xy.into(), div_yx.into(), terms, true, config),
        samples: None,
    })
}

/// Full evaluation with per-sample terms. Identity terms are filled whenever
/// X and Y share an ambient space.
pub fn evaluate(
    g: &MeasurableMap,
    f: &MeasurableMap,
    x: &Space,
    y: &Space,
    config: &LossConfig,
) -> Result<LossEvaluation> {
    config.validate()?;
    match (x, y) {
        (Space::Finite(x), Space::Finite(y)) => evaluate_finite(g, f, x, y, config),
        (Space::Grid(x), Space::Grid(y)) => evaluate_grid(g, f, x, y, config),
        _ => Err(Error::InvalidConfig("X and Y must both be finite or both be grids".into())),
    }
}

/// `(E||F(G(x)) - x||, E||G(F(y)) - y||)`.
pub fn cycle_term(
    g: &MeasurableMap,
    f: &MeasurableMap,
    x: &Space,
    y: &Space,
    norm: Norm,
    mc_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let config = LossConfig {
        norm,
        mc_samples,
        seed,
        ..LossConfig::new(1.0, 0.0, DivergenceSpec::TV)
    };
    config.validate()?;
    match (x, y) {
        (Space::Finite(x), Space::Finite(y)) => Ok((
            label_term(&g.then(f)?, x, norm)?,
            label_term(&f.then(g)?, y, norm)?,
        )),
        (Space::Grid(xg), Space::Grid(yg)) => {
            check_dims(g, f, xg.dim(), yg.dim())?;
            let (xs, ys) = draw_samples(xg, yg, mc_samples, seed)?;
            let gf = g.then(f)?;
            let fg = f.then(g)?;
            let cx: Vec<f64> = xs
                .iter()
                .map(|p| Ok(norm.distance(&gf.apply(p)?, p)))
                .collect::<Result<_>>()?;
            let cy: Vec<f64> = ys
                .iter()
                .map(|p| Ok(norm.distance(&fg.apply(p)?, p)))
                .collect::<Result<_>>()?;
            Ok((mean_stderr(&cx).0, mean_stderr(&cy).0))
        }
        _ => Err(Error::InvalidConfig("X and Y must both be finite or both be grids".into())),
    }
}

/// The CycleGAN loss. Identity terms are reported when defined but do not
/// enter `total_pure`.
pub fn pure_loss(
    g: &MeasurableMap,
    f: &MeasurableMap,
    x: &Space,
    y: &Space,
    config: &LossConfig,
) -> Result<LossReport> {
    Ok(evaluate(g, f, x, y, config)?.report)
}

/// The loss with identity terms; X and Y must share an ambient space.
pub fn extended_loss(
    g: &MeasurableMap,
    f: &MeasurableMap,
    x: &Space,
    y: &Space,
    config: &LossConfig,
) -> Result<LossReport> {
    if x.dim() != y.dim() {
        return Err(Error::AmbientMismatch(x.dim(), y.dim()));
    }
    pure_loss(g, f, x, y, config)
}

/// `twisted - base`, term by term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermDeltas {
    pub div_xy: f64,
    pub div_yx: f64,
    pub cyc_x: f64,
    pub cyc_y: f64,
    pub id_x: f64,
    pub id_y: f64,
    pub total_pure: f64,
    pub total_ext: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryProbe {
    pub report_base: LossReport,
    pub report_twisted: LossReport,
    pub deltas: TermDeltas,
}

/// The pair `(G o phi, phi^-1 o F)`.
pub fn twist(g: &MeasurableMap, f: &MeasurableMap, phi: &MeasurableMap) -> Result<(MeasurableMap, MeasurableMap)> {
    let inv = phi
        .inverse()
        .ok_or_else(|| Error::MissingInverse(phi.kind_name().into()))?;
    Ok((phi.then(g)?, f.then(&inv)?))
}

/// Loss at `(G, F)` and at the twisted pair under `phi`.
pub fn symmetry_probe(
    g: &MeasurableMap,
    f: &MeasurableMap,
    x: &Space,
    y: &Space,
    phi: &MeasurableMap,
    config: &LossConfig,
) -> Result<SymmetryProbe> {
    let (gt, ft) = twist(g, f, phi)?;
    let base = pure_loss(g, f, x, y, config)?;
    let twisted = pure_loss(&gt, &ft, x, y, config)?;
    let deltas = TermDeltas {
        div_xy: twisted.div_xy - base.div_xy,
        div_yx: twisted.div_yx - base.div_yx,
        cyc_x: twisted.cyc_x - base.cyc_x,
        cyc_y: twisted.cyc_y - base.cyc_y,
        id_x: twisted.id_x - base.id_x,
        id_y: twisted.id_y - base.id_y,
        total_pure: twisted.total_pure - base.total_pure,
        total_ext: twisted.total_ext - base.total_ext,
    };
    Ok(SymmetryProbe {
        report_base: base,
        report_twisted: twisted,
        deltas,
    })
}
