//! Probability spaces: finite atom lists, densities tabulated on a box, and
//! seeded sample sets.
//!
//! Grid cells are stored row-major with axis 0 slowest. Every constructed
//! [`GridDensity`] is renormalized so that its Riemann sum is 1.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the input mass sum accepted by [`make_finite`].
pub const MASS_SUM_TOL: f64 = 1e-6;

/// Deterministic generator for `(seed, stream)`. Distinct streams of the same
/// seed are independent.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A discrete probability space.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSpace {
    labels: Vec<String>,
    masses: Vec<f64>,
}

impl FiniteSpace {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Same masses, bit for bit, under new labels.
    pub fn relabeled<S: AsRef<str>>(&self, labels: &[S]) -> Result<FiniteSpace> {
        let mut out = make_finite(labels, &self.masses)?;
        out.masses = self.masses.clone();
        Ok(out)
    }
}

fn unit_up_to_rounding(total: f64, terms: usize) -> bool {
    (total - 1.0).abs() <= terms as f64 * f64::EPSILON
}

/// Builds a finite space, rescaling masses whose sum is within
/// [`MASS_SUM_TOL`] of 1. Sums already equal to 1 up to rounding are kept as
/// given, so equal masses stay bit-identical across spaces.
pub fn make_finite<S: AsRef<str>>(labels: &[S], masses: &[f64]) -> Result<FiniteSpace> {
    if labels.len() != masses.len() {
        return Err(Error::LengthMismatch(labels.len(), masses.len()));
    }
    if labels.is_empty() {
        return Err(Error::EmptySpace);
    }
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l.as_ref()) {
            return Err(Error::DuplicateLabel(l.as_ref().to_string()));
        }
    }
    for (index, &value) in masses.iter().enumerate() {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::NegativeMass { index, value });
        }
    }
    let sum: f64 = masses.iter().sum();
    if (sum - 1.0).abs() > MASS_SUM_TOL {
        return Err(Error::SumOutOfTolerance(sum));
    }
    let scale = if unit_up_to_rounding(sum, masses.len()) { 1.0 } else { sum };
    Ok(FiniteSpace {
        labels: labels.iter().map(|l| l.as_ref().to_string()).collect(),
        masses: masses.iter().map(|m| m / scale).collect(),
    })
}

/// A density tabulated at cell centers of a regular grid over a box.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    bounds: Vec<[f64; 2]>,
    resolution: Vec<usize>,
    values: Vec<f64>,
}

fn validate_grid(bounds: &[[f64; 2]], resolution: &[usize]) -> Result<()> {
    if bounds.len() != resolution.len() {
        return Err(Error::DimensionMismatch {
            expected: bounds.len(),
            got: resolution.len(),
        });
    }
    let dim = bounds.len();
    if !(1..=3).contains(&dim) {
        return Err(Error::UnsupportedDim(dim));
    }
    for (axis, (&[lo, hi], &res)) in bounds.iter().zip(resolution).enumerate() {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::DegenerateBox { axis, lo, hi });
        }
        if res < 2 {
            return Err(Error::ResolutionTooSmall { axis, res });
        }
    }
    Ok(())
}

/// Iterates the cell centers of a grid in storage order.
fn for_each_center(bounds: &[[f64; 2]], resolution: &[usize], mut f: impl FnMut(usize, &[f64])) {
    let dim = bounds.len();
    let widths: Vec<f64> = bounds
        .iter()
        .zip(resolution)
        .map(|(b, &r)| (b[1] - b[0]) / r as f64)
        .collect();
    let total: usize = resolution.iter().product();
    let mut idx = vec![0usize; dim];
    let mut point = vec![0.0; dim];
    for flat in 0..total {
        for a in 0..dim {
            point[a] = bounds[a][0] + (idx[a] as f64 + 0.5) * widths[a];
        }
        f(flat, &point);
        for a in (0..dim).rev() {
            idx[a] += 1;
            if idx[a] < resolution[a] {
                break;
            }
            idx[a] = 0;
        }
    }
}

/// Riemann sum of `density_fn` over the box at cell centers, without
/// renormalization.
pub fn riemann_mass(
    bounds: &[[f64; 2]],
    resolution: &[usize],
    density_fn: impl Fn(&[f64]) -> f64,
) -> Result<f64> {
    validate_grid(bounds, resolution)?;
    let vol: f64 = bounds
        .iter()
        .zip(resolution)
        .map(|(b, &r)| (b[1] - b[0]) / r as f64)
        .product();
    let mut sum = 0.0;
    for_each_center(bounds, resolution, |_, p| sum += density_fn(p));
    Ok(sum * vol)
}

/// Tabulates `density_fn` at cell centers and renormalizes.
pub fn make_grid_density(
    bounds: &[[f64; 2]],
    resolution: &[usize],
    density_fn: impl Fn(&[f64]) -> f64,
) -> Result<GridDensity> {
    validate_grid(bounds, resolution)?;
    let total: usize = resolution.iter().product();
    let mut values = Vec::with_capacity(total);
    let mut bad = None;
    for_each_center(bounds, resolution, |_, p| {
        let v = density_fn(p);
        if (!(v >= 0.0) || !v.is_finite()) && bad.is_none() {
            bad = Some((p.to_vec(), v));
        }
        values.push(v);
    });
    if let Some((point, value)) = bad {
        return Err(Error::NegativeDensity { point, value });
    }
    GridDensity::from_values(bounds, resolution, values)
}

impl GridDensity {
    /// Wraps raw cell values, renormalizing to unit Riemann sum unless the sum
    /// is already 1 up to rounding.
    pub fn from_values(
        bounds: &[[f64; 2]],
        resolution: &[usize],
        mut values: Vec<f64>,
    ) -> Result<GridDensity> {
        validate_grid(bounds, resolution)?;
        let total: usize = resolution.iter().product();
        if values.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            let mut point = Vec::new();
            for_each_center(bounds, resolution, |flat, p| {
                if flat == i {
                    point = p.to_vec();
                }
            });
            return Err(Error::NegativeDensity {
                point,
                value: values[i],
            });
        }
        let mut grid = GridDensity {
            bounds: bounds.to_vec(),
            resolution: resolution.to_vec(),
            values: Vec::new(),
        };
        let mass: f64 = values.iter().sum::<f64>() * grid.cell_volume();
        if !(mass > 0.0) {
            return Err(Error::ZeroTotalMass);
        }
        if !unit_up_to_rounding(mass, values.len()) {
            for v in &mut values {
                *v /= mass;
            }
        }
        grid.values = values;
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        (self.bounds[axis][1] - self.bounds[axis][0]) / self.resolution[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.cell_width(a)).product()
    }

    /// True when box and resolution coincide.
    pub fn same_grid(&self, other: &GridDensity) -> bool {
        self.bounds == other.bounds && self.resolution == other.resolution
    }

    pub fn riemann_sum(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    /// Probability of each cell.
    pub fn cell_masses(&self) -> Vec<f64> {
        let vol = self.cell_volume();
        self.values.iter().map(|v| v * vol).collect()
    }

    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        let idx = self.unflatten(flat);
        idx.iter()
            .enumerate()
            .map(|(a, &i)| self.bounds[a][0] + (i as f64 + 0.5) * self.cell_width(a))
            .collect()
    }

    /// Calls `f(flat_index, center)` for every cell in storage order.
    pub fn for_each_center(&self, f: impl FnMut(usize, &[f64])) {
        for_each_center(&self.bounds, &self.resolution, f);
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.resolution[a];
            flat /= self.resolution[a];
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.resolution)
            .fold(0, |acc, (&i, &r)| acc * r + i)
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(&self.bounds)
                .all(|(&x, b)| x >= b[0] && x <= b[1])
    }

    /// Flat index of the cell containing `point`, if inside the box.
    pub fn cell_of(&self, point: &[f64]) -> Option<usize> {
        if !self.contains(point) {
            return None;
        }
        let mut flat = 0;
        for (a, &x) in point.iter().enumerate() {
            let i = ((x - self.bounds[a][0]) / self.cell_width(a)).floor() as isize;
            let i = i.clamp(0, self.resolution[a] as isize - 1) as usize;
            flat = flat * self.resolution[a] + i;
        }
        Some(flat)
    }

    /// Cubic convolution (Catmull-Rom) interpolation between cell centers,
    /// clipped at zero. Exact at cell centers; zero outside the box; constant
    /// between the outermost centers and the box faces.
    pub fn density_at(&self, point: &[f64]) -> f64 {
        if !self.contains(point) {
            return 0.0;
        }
        let dim = self.dim();
        let mut nodes = [[0usize; 4]; 3];
        let mut weights = [[0.0f64; 4]; 3];
        for a in 0..dim {
            let h = self.cell_width(a);
            let n = self.resolution[a];
            let s = ((point[a] - self.bounds[a][0]) / h - 0.5).clamp(0.0, (n - 1) as f64);
            let i = (s.floor() as usize).min(n - 2);
            let t = s - i as f64;
            let (t2, t3) = (t * t, t * t * t);
            weights[a] = [
                0.5 * (-t3 + 2.0 * t2 - t),
                0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
                0.5 * (-3.0 * t3 + 4.0 * t2 + t),
                0.5 * (t3 - t2),
            ];
            for (k, node) in nodes[a].iter_mut().enumerate() {
                *node = (i + k).saturating_sub(1).min(n - 1);
            }
        }
        let mut acc = 0.0;
        for combo in 0..(1usize << (2 * dim)) {
            let mut w = 1.0;
            let mut flat = 0;
            for a in 0..dim {
                let k = (combo >> (2 * a)) & 3;
                w *= weights[a][k];
                flat = flat * self.resolution[a] + nodes[a][k];
            }
            if w != 0.0 {
                acc += w * self.values[flat];
            }
        }
        acc.max(0.0)
    }
}

/// Product of independent normals, `mean` and `sigma` per axis.
pub fn normal_pdf(point: &[f64], mean: &[f64], sigma: &[f64]) -> f64 {
    let mut log = 0.0;
    for ((&x, &m), &s) in point.iter().zip(mean).zip(sigma) {
        let z = (x - m) / s;
        log += -0.5 * z * z - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
    }
    log.exp()
}

/// Truncated, renormalized standard Gaussian on `[-box_radius, box_radius]^dim`
/// with `resolution` cells per axis.
pub fn gaussian_standard(dim: usize, box_radius: f64, resolution: usize) -> Result<GridDensity> {
    if !(1..=3).contains(&dim) {
        return Err(Error::UnsupportedDim(dim));
    }
    if !(box_radius > 0.0) {
        return Err(Error::DegenerateBox {
            axis: 0,
            lo: -box_radius,
            hi: box_radius,
        });
    }
    gaussian_diag(
        &vec![0.0; dim],
        &vec![1.0; dim],
        &vec![[-box_radius, box_radius]; dim],
        &vec![resolution; dim],
    )
}

/// Axis-aligned Gaussian on an arbitrary box.
pub fn gaussian_diag(
    mean: &[f64],
    sigma: &[f64],
    bounds: &[[f64; 2]],
    resolution: &[usize],
) -> Result<GridDensity> {
    if mean.len() != bounds.len() || sigma.len() != bounds.len() {
        return Err(Error::DimensionMismatch {
            expected: bounds.len(),
            got: mean.len().min(sigma.len()),
        });
    }
    if sigma.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidConfig("sigma must be positive".into()));
    }
    make_grid_density(bounds, resolution, |p| normal_pdf(p, mean, sigma))
}

/// Equal-weight mixture of axis-aligned Gaussians sharing one `sigma`.
pub fn gaussian_mixture(
    means: &[Vec<f64>],
    sigma: &[f64],
    bounds: &[[f64; 2]],
    resolution: &[usize],
) -> Result<GridDensity> {
    if means.is_empty() {
        return Err(Error::EmptySpace);
    }
    let w = 1.0 / means.len() as f64;
    make_grid_density(bounds, resolution, |p| {
        means.iter().map(|m| w * normal_pdf(p, m, sigma)).sum()
    })
}

/// i.i.d. points, stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    dim: usize,
    seed: u64,
    coords: Vec<f64>,
}

impl SampleSet {
    pub fn new(dim: usize, seed: u64, coords: Vec<f64>) -> Result<SampleSet> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: coords.len(),
            });
        }
        Ok(SampleSet { dim, seed, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Either kind of space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Space {
    Finite(#[serde(with = "finite_repr")] FiniteSpace),
    Grid(#[serde(with = "grid_repr")] GridDensity),
}

impl Space {
    /// Ambient dimension of sampled points (1 for finite spaces, which embed
    /// atoms by index).
    pub fn dim(&self) -> usize {
        match self {
            Space::Finite(_) => 1,
            Space::Grid(g) => g.dim(),
        }
    }

    pub fn as_finite(&self) -> Option<&FiniteSpace> {
        match self {
            Space::Finite(f) => Some(f),
            Space::Grid(_) => None,
        }
    }

    pub fn as_grid(&self) -> Option<&GridDensity> {
        match self {
            Space::Grid(g) => Some(g),
            Space::Finite(_) => None,
        }
    }
}

impl From<FiniteSpace> for Space {
    fn from(f: FiniteSpace) -> Self {
        Space::Finite(f)
    }
}

impl From<GridDensity> for Space {
    fn from(g: GridDensity) -> Self {
        Space::Grid(g)
    }
}

mod finite_repr {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Repr {
        labels: Vec<String>,
        masses: Vec<f64>,
    }

    pub fn serialize<S: serde::Serializer>(f: &FiniteSpace, s: S) -> std::result::Result<S::Ok, S::Error> {
        Repr {
            labels: f.labels.clone(),
            masses: f.masses.clone(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<FiniteSpace, D::Error> {
        let r = Repr::deserialize(d)?;
        make_finite(&r.labels, &r.masses).map_err(serde::de::Error::custom)
    }
}

mod grid_repr {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Repr {
        #[serde(rename = "box")]
        bounds: Vec<[f64; 2]>,
        resolution: Vec<usize>,
        values: Vec<f64>,
    }

    pub fn serialize<S: serde::Serializer>(g: &GridDensity, s: S) -> std::result::Result<S::Ok, S::Error> {
        Repr {
            bounds: g.bounds.clone(),
            resolution: g.resolution.clone(),
            values: g.values.clone(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<GridDensity, D::Error> {
        let r = Repr::deserialize(d)?;
        GridDensity::from_values(&r.bounds, &r.resolution, r.values).map_err(serde::de::Error::custom)
    }
}

/// Atom indices drawn by mass.
pub fn sample_atoms(space: &FiniteSpace, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1".into()));
    }
    let dist = WeightedIndex::new(&space.masses).map_err(|_| Error::EmptySpace)?;
    let mut rng = seeded_rng(seed, 0);
    Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
}

/// Points drawn by cell mass, then uniformly within the cell.
pub fn sample_grid(grid: &GridDensity, n: usize, seed: u64) -> Result<SampleSet> {
    sample_grid_stream(grid, n, seed, 0)
}

/// [`sample_grid`] on an explicit generator stream.
pub fn sample_grid_stream(grid: &GridDensity, n: usize, seed: u64, stream: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1".into()));
    }
    let sampler = GridSampler::new(grid)?;
    let mut rng = seeded_rng(seed, stream);
    let mut coords = Vec::with_capacity(n * grid.dim());
    for _ in 0..n {
        sampler.draw(&mut rng, &mut coords);
    }
    SampleSet::new(grid.dim(), seed, coords)
}

/// Reusable sampler for one grid, driven by a caller-owned generator.
#[derive(Debug, Clone)]
pub struct GridSampler<'a> {
    grid: &'a GridDensity,
    dist: WeightedIndex<f64>,
}

impl<'a> GridSampler<'a> {
    pub fn new(grid: &'a GridDensity) -> Result<Self> {
        let dist = WeightedIndex::new(&grid.values).map_err(|_| Error::EmptySpace)?;
        Ok(GridSampler { grid, dist })
    }

    /// Appends one point's coordinates to `out`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        let idx = self.grid.unflatten(self.dist.sample(rng));
        for (a, &i) in idx.iter().enumerate() {
            let u: f64 = rng.random();
            out.push(self.grid.bounds[a][0] + (i as f64 + u) * self.grid.cell_width(a));
        }
    }
}

/// Samples either kind of space. Finite atoms are returned as their index
/// coordinate.
pub fn sample(space: &Space, n: usize, seed: u64) -> Result<SampleSet> {
    match space {
        Space::Finite(f) => {
            let atoms = sample_atoms(f, n, seed)?;
            SampleSet::new(1, seed, atoms.into_iter().map(|i| i as f64).collect())
        }
        Space::Grid(g) => sample_grid(g, n, seed),
    }
}
