//! Measurable maps between spaces and the automorphisms built from them.
//!
//! A map is evaluated pointwise on coordinate vectors. Finite spaces embed
//! atom `i` as the one-coordinate point `[i]`, so tabular maps compose with
//! the rest of the machinery. Inverses and log-Jacobians are derived from the
//! map's structure rather than stored separately.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::divergence::{f_divergence_finite, f_divergence_grid, DivergenceSpec};
use crate::error::{Error, Result};
use crate::net::{LayerRepr, TanhNet};
use crate::probspace::{make_finite, FiniteSpace, GridDensity, SampleSet, Space};

/// Largest mass that may fall outside the target box in a grid pushforward.
pub const MAX_ESCAPED_MASS: f64 = 1e-3;

/// Which side of a truncated map the ball constraint applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallGuard {
    /// The argument must lie in the ball.
    Input,
    /// The result must lie in the ball (inverse of an input-guarded map).
    Output,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMap {
    domain: Vec<String>,
    codomain: Vec<String>,
    assignment: Vec<usize>,
}

impl TabularMap {
    pub fn domain(&self) -> &[String] {
        &self.domain
    }

    pub fn codomain(&self) -> &[String] {
        &self.codomain
    }

    /// `assignment[i]` is the codomain index of domain atom `i`.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn is_bijection(&self) -> bool {
        if self.domain.len() != self.codomain.len() {
            return false;
        }
        let mut hit = vec![false; self.codomain.len()];
        for &j in &self.assignment {
            if hit[j] {
                return false;
            }
            hit[j] = true;
        }
        true
    }

    fn inverse(&self) -> Option<TabularMap> {
        if !self.is_bijection() {
            return None;
        }
        let mut inv = vec![0; self.assignment.len()];
        for (i, &j) in self.assignment.iter().enumerate() {
            inv[j] = i;
        }
        Some(TabularMap {
            domain: self.codomain.clone(),
            codomain: self.domain.clone(),
            assignment: inv,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapKind {
    Identity { dim: usize },
    Tabular(TabularMap),
    /// `x -> matrix * x + offset`.
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    /// `x -> offset - x`.
    Reflection { offset: Vec<f64> },
    /// Exchanges `[a, a+d)` and `[b, b+d)` by translation.
    IntervalSwap { a: f64, b: f64, d: f64 },
    Rotation { matrix: Vec<Vec<f64>> },
    /// Parts applied left to right.
    Composite { parts: Vec<MeasurableMap> },
    Net(TanhNet),
    Truncated {
        inner: Box<MeasurableMap>,
        radius: f64,
        guard: BallGuard,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurableMap {
    kind: MapKind,
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn mat_vec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn to_dmatrix(m: &[Vec<f64>]) -> DMatrix<f64> {
    let n = m.len();
    let c = m.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, c, |i, j| m[i][j])
}

fn from_dmatrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn check_square(m: &[Vec<f64>]) -> Result<usize> {
    let n = m.len();
    if n == 0 {
        return Err(Error::InvalidConfig("empty matrix".into()));
    }
    if let Some(row) = m.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: row.len(),
        });
    }
    Ok(n)
}

/// `max |Q^T Q - I|`.
pub fn orthogonality_defect(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let dot: f64 = (0..n).map(|k| m[k][i] * m[k][j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

impl MeasurableMap {
    fn from_kind(kind: MapKind) -> Self {
        MeasurableMap { kind }
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            MapKind::Identity { .. } => "identity",
            MapKind::Tabular(_) => "tabular",
            MapKind::Affine { .. } => "affine",
            MapKind::Reflection { .. } => "reflection",
            MapKind::IntervalSwap { .. } => "interval_swap",
            MapKind::Rotation { .. } => "rotation",
            MapKind::Composite { .. } => "composite",
            MapKind::Net(_) => "parametric_net",
            MapKind::Truncated { .. } => "truncated",
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_kind(MapKind::Identity { dim })
    }

    pub fn affine(matrix: Vec<Vec<f64>>, offset: Vec<f64>) -> Result<Self> {
        let n = check_square(&matrix)?;
        if offset.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: offset.len(),
            });
        }
        Ok(Self::from_kind(MapKind::Affine { matrix, offset }))
    }

    /// `x -> x + offset`.
    pub fn shift(offset: Vec<f64>) -> Self {
        let n = offset.len();
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::from_kind(MapKind::Affine { matrix, offset })
    }

    /// `x -> scale * x` on the line.
    pub fn scale_1d(scale: f64) -> Self {
        Self::from_kind(MapKind::Affine {
            matrix: vec![vec![scale]],
            offset: vec![0.0],
        })
    }

    /// `x -> 2 * center - x`.
    pub fn point_reflection(center: &[f64]) -> Self {
        Self::from_kind(MapKind::Reflection {
            offset: center.iter().map(|c| 2.0 * c).collect(),
        })
    }

    /// Flips one coordinate axis through the origin.
    pub fn axis_reflection(dim: usize, axis: usize) -> Result<Self> {
        if axis >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: axis,
            });
        }
        let matrix = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| match (i == j, i == axis) {
                        (true, true) => -1.0,
                        (true, false) => 1.0,
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect();
        Self::affine(matrix, vec![0.0; dim])
    }

    pub fn net(net: TanhNet) -> Self {
        Self::from_kind(MapKind::Net(net))
    }

    pub fn as_net(&self) -> Option<&TanhNet> {
        match &self.kind {
            MapKind::Net(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_tabular(&self) -> Option<&TabularMap> {
        match &self.kind {
            MapKind::Tabular(t) => Some(t),
            _ => None,
        }
    }

    /// Chains maps left to right, flattening nested composites.
    pub fn composite(parts: Vec<MeasurableMap>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidConfig("composite needs at least one part".into()));
        }
        let mut flat = Vec::with_capacity(parts.len());
        for p in parts {
            match p.kind {
                MapKind::Composite { parts } => flat.extend(parts),
                _ => flat.push(p),
            }
        }
        for w in flat.windows(2) {
            if w[0].codomain_dim() != w[1].domain_dim() {
                return Err(Error::DimensionMismatch {
                    expected: w[0].codomain_dim(),
                    got: w[1].domain_dim(),
                });
            }
        }
        Ok(Self::from_kind(MapKind::Composite { parts: flat }))
    }

    /// `self` first, then `next`.
    pub fn then(&self, next: &MeasurableMap) -> Result<Self> {
        Self::composite(vec![self.clone(), next.clone()])
    }

    pub fn domain_dim(&self) -> usize {
        match &self.kind {
            MapKind::Identity { dim } => *dim,
            MapKind::Tabular(_) | MapKind::IntervalSwap { .. } => 1,
            MapKind::Affine { matrix, .. } | MapKind::Rotation { matrix } => matrix.len(),
            MapKind::Reflection { offset } => offset.len(),
            MapKind::Composite { parts } => parts[0].domain_dim(),
            MapKind::Net(n) => n.input_dim(),
            MapKind::Truncated { inner, .. } => inner.domain_dim(),
        }
    }

    pub fn codomain_dim(&self) -> usize {
        match &self.kind {
            MapKind::Composite { parts } => parts[parts.len() - 1].codomain_dim(),
            MapKind::Net(n) => n.output_dim(),
            MapKind::Truncated { inner, .. } => inner.codomain_dim(),
            _ => self.domain_dim(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.domain_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.domain_dim(),
                got: x.len(),
            });
        }
        Ok(match &self.kind {
            MapKind::Identity { .. } => x.to_vec(),
            MapKind::Tabular(t) => {
                let i = x[0];
                if i < 0.0 || i.fract() != 0.0 || i as usize >= t.domain.len() {
                    return Err(Error::UnknownLabel(format!("atom index {i}")));
                }
                vec![t.assignment[i as usize] as f64]
            }
            MapKind::Affine { matrix, offset } => mat_vec(matrix, x)
                .into_iter()
                .zip(offset)
                .map(|(a, b)| a + b)
                .collect(),
            MapKind::Reflection { offset } => offset.iter().zip(x).map(|(c, v)| c - v).collect(),
            MapKind::IntervalSwap { a, b, d } => {
                let v = x[0];
                let shift = b - a;
                if v >= *a && v < a + d {
                    vec![v + shift]
                } else if v >= *b && v < b + d {
                    vec![v - shift]
                } else {
                    vec![v]
                }
            }
            MapKind::Rotation { matrix } => mat_vec(matrix, x),
            MapKind::Composite { parts } => {
                let mut cur = x.to_vec();
                for p in parts {
                    cur = p.apply(&cur)?;
                }
                cur
            }
            MapKind::Net(n) => n.forward(x),
            MapKind::Truncated {
                inner,
                radius,
                guard,
            } => match guard {
                BallGuard::Input => {
                    check_ball(x, *radius)?;
                    inner.apply(x)?
                }
                BallGuard::Output => {
                    let y = inner.apply(x)?;
                    check_ball(&y, *radius)?;
                    y
                }
            },
        })
    }

    /// Image of atom `i` for maps acting on atom indices.
    pub fn apply_atom(&self, i: usize) -> Result<usize> {
        match &self.kind {
            MapKind::Identity { .. } => Ok(i),
            MapKind::Tabular(t) => t
                .assignment
                .get(i)
                .copied()
                .ok_or_else(|| Error::UnknownLabel(format!("atom index {i}"))),
            MapKind::Composite { parts } => parts.iter().try_fold(i, |cur, p| p.apply_atom(cur)),
            _ => Err(Error::Unsupported { op: "apply_atom" }),
        }
    }

    /// Structural inverse, when the map is invertible.
    pub fn inverse(&self) -> Option<MeasurableMap> {
        let kind = match &self.kind {
            MapKind::Identity { dim } => MapKind::Identity { dim: *dim },
            MapKind::Tabular(t) => MapKind::Tabular(t.inverse()?),
            MapKind::Affine { matrix, offset } => {
                let inv = if matrix.len() == 1 {
                    if matrix[0][0] == 0.0 {
                        return None;
                    }
                    vec![vec![1.0 / matrix[0][0]]]
                } else {
                    from_dmatrix(&to_dmatrix(matrix).try_inverse()?)
                };
                let off = mat_vec(&inv, offset).into_iter().map(|v| -v).collect();
                MapKind::Affine {
                    matrix: inv,
                    offset: off,
                }
            }
            MapKind::Reflection { .. } | MapKind::IntervalSwap { .. } => self.kind.clone(),
            MapKind::Rotation { matrix } => {
                let n = matrix.len();
                MapKind::Rotation {
                    matrix: (0..n).map(|i| (0..n).map(|j| matrix[j][i]).collect()).collect(),
                }
            }
            MapKind::Composite { parts } => MapKind::Composite {
                parts: parts
                    .iter()
                    .rev()
                    .map(MeasurableMap::inverse)
                    .collect::<Option<Vec<_>>>()?,
            },
            MapKind::Net(_) => return None,
            MapKind::Truncated {
                inner,
                radius,
                guard,
            } => MapKind::Truncated {
                inner: Box::new(inner.inverse()?),
                radius: *radius,
                guard: match guard {
                    BallGuard::Input => BallGuard::Output,
                    BallGuard::Output => BallGuard::Input,
                },
            },
        };
        Some(Self::from_kind(kind))
    }

    pub fn has_inverse(&self) -> bool {
        self.inverse().is_some()
    }

    /// Whether [`MeasurableMap::log_det_jacobian`] is defined.
    pub fn has_jacobian(&self) -> bool {
        match &self.kind {
            MapKind::Tabular(_) | MapKind::Net(_) => false,
            MapKind::Composite { parts } => parts.iter().all(MeasurableMap::has_jacobian),
            MapKind::Truncated { inner, .. } => inner.has_jacobian(),
            _ => true,
        }
    }

    /// `ln |det D(map)(x)|`.
    pub fn log_det_jacobian(&self, x: &[f64]) -> Result<f64> {
        match &self.kind {
            MapKind::Identity { .. }
            | MapKind::Reflection { .. }
            | MapKind::IntervalSwap { .. }
            | MapKind::Rotation { .. } => Ok(0.0),
            MapKind::Affine { matrix, .. } => {
                let det = if matrix.len() == 1 {
                    matrix[0][0]
                } else {
                    to_dmatrix(matrix).determinant()
                };
                Ok(det.abs().ln())
            }
            MapKind::Composite { parts } => {
                let mut cur = x.to_vec();
                let mut acc = 0.0;
                for p in parts {
                    acc += p.log_det_jacobian(&cur)?;
                    cur = p.apply(&cur)?;
                }
                Ok(acc)
            }
            MapKind::Truncated {
                inner,
                radius,
                guard,
            } => {
                if *guard == BallGuard::Input {
                    check_ball(x, *radius)?;
                }
                inner.log_det_jacobian(x)
            }
            MapKind::Tabular(_) | MapKind::Net(_) => {
                Err(Error::MissingJacobian(self.kind_name().into()))
            }
        }
    }

    /// Lipschitz constant known from the map's structure: exactly 1 for
    /// isometries (interval swaps count piecewise), the spectral norm for
    /// affine maps, and the product over parts for composites.
    pub fn analytic_lipschitz(&self) -> Option<f64> {
        match &self.kind {
            MapKind::Identity { .. }
            | MapKind::Reflection { .. }
            | MapKind::IntervalSwap { .. }
            | MapKind::Rotation { .. } => Some(1.0),
            MapKind::Affine { matrix, .. } => {
                if matrix.len() == 1 {
                    Some(matrix[0][0].abs())
                } else {
                    let sv = to_dmatrix(matrix).singular_values();
                    Some(sv.iter().cloned().fold(0.0, f64::max))
                }
            }
            MapKind::Composite { parts } => parts
                .iter()
                .map(MeasurableMap::analytic_lipschitz)
                .try_fold(1.0, |acc, c| c.map(|c| acc * c)),
            MapKind::Truncated { inner, .. } => inner.analytic_lipschitz(),
            MapKind::Tabular(_) | MapKind::Net(_) => None,
        }
    }

    /// Whether the map is an isometry on each smooth piece.
    pub fn is_isometry(&self) -> bool {
        match &self.kind {
            MapKind::Identity { .. }
            | MapKind::Reflection { .. }
            | MapKind::IntervalSwap { .. }
            | MapKind::Rotation { .. } => true,
            MapKind::Affine { matrix, .. } => orthogonality_defect(matrix) <= 1e-12,
            MapKind::Composite { parts } => parts.iter().all(MeasurableMap::is_isometry),
            MapKind::Truncated { inner, .. } => inner.is_isometry(),
            MapKind::Tabular(_) | MapKind::Net(_) => false,
        }
    }

    /// Collapses identity/tabular chains into one table on `domain`.
    pub fn to_table(&self, domain: &FiniteSpace) -> Result<TabularMap> {
        match &self.kind {
            MapKind::Identity { .. } => Ok(TabularMap {
                domain: domain.labels().to_vec(),
                codomain: domain.labels().to_vec(),
                assignment: (0..domain.len()).collect(),
            }),
            MapKind::Tabular(t) => {
                if t.domain != domain.labels() {
                    return Err(Error::LabelMismatch);
                }
                Ok(t.clone())
            }
            MapKind::Composite { parts } => {
                let mut table = parts[0].to_table(domain)?;
                for p in &parts[1..] {
                    match &p.kind {
                        MapKind::Identity { .. } => {}
                        MapKind::Tabular(t) => {
                            if t.domain != table.codomain {
                                return Err(Error::LabelMismatch);
                            }
                            table = TabularMap {
                                domain: table.domain,
                                codomain: t.codomain.clone(),
                                assignment: table.assignment.iter().map(|&j| t.assignment[j]).collect(),
                            };
                        }
                        _ => return Err(Error::Unsupported { op: "to_table" }),
                    }
                }
                Ok(table)
            }
            _ => Err(Error::Unsupported { op: "to_table" }),
        }
    }
}

fn check_ball(x: &[f64], radius: f64) -> Result<()> {
    if norm2(x) > radius {
        return Err(Error::OutsideDomain {
            point: x.to_vec(),
            radius,
        });
    }
    Ok(())
}

/// Tabular map from `(domain label, codomain label)` pairs. The inverse is
/// available iff the assignment is a bijection.
pub fn tabular_map<I, A, B>(domain: &FiniteSpace, codomain: &FiniteSpace, assignment: I) -> Result<MeasurableMap>
where
    I: IntoIterator<Item = (A, B)>,
    A: AsRef<str>,
    B: AsRef<str>,
{
    let mut table: Vec<Option<usize>> = vec![None; domain.len()];
    for (from, to) in assignment {
        let i = domain
            .index_of(from.as_ref())
            .ok_or_else(|| Error::UnknownLabel(from.as_ref().into()))?;
        let j = codomain
            .index_of(to.as_ref())
            .ok_or_else(|| Error::UnknownLabel(to.as_ref().into()))?;
        table[i] = Some(j);
    }
    let assignment = table
        .iter()
        .enumerate()
        .map(|(i, j)| j.ok_or_else(|| Error::NotTotal(domain.labels()[i].clone())))
        .collect::<Result<Vec<_>>>()?;
    tabular_from_indices(domain.labels(), codomain.labels(), assignment)
}

/// Tabular map from an index table.
pub fn tabular_from_indices(domain: &[String], codomain: &[String], assignment: Vec<usize>) -> Result<MeasurableMap> {
    if assignment.len() != domain.len() {
        return Err(Error::LengthMismatch(domain.len(), assignment.len()));
    }
    if let Some(&j) = assignment.iter().find(|&&j| j >= codomain.len()) {
        return Err(Error::UnknownLabel(format!("codomain index {j}")));
    }
    Ok(MeasurableMap::from_kind(MapKind::Tabular(TabularMap {
        domain: domain.to_vec(),
        codomain: codomain.to_vec(),
        assignment,
    })))
}

/// `x -> c - x`, an involution of `[0, c]`.
pub fn reflection_interval(c: f64) -> Result<MeasurableMap> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::NonpositiveLength(c));
    }
    Ok(MeasurableMap::from_kind(MapKind::Reflection { offset: vec![c] }))
}

/// Exchanges `[a, a+d)` with `[b, b+d)`; identity elsewhere.
pub fn interval_swap(a: f64, b: f64, d: f64) -> Result<MeasurableMap> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::NonpositiveLength(d));
    }
    if !(a + d <= b || b + d <= a) {
        return Err(Error::OverlappingIntervals { a, b, d });
    }
    Ok(MeasurableMap::from_kind(MapKind::IntervalSwap { a, b, d }))
}

/// Swaps atoms `j` and `k`, which must carry equal mass.
pub fn atom_transposition(space: &FiniteSpace, j: usize, k: usize) -> Result<MeasurableMap> {
    let n = space.len();
    if j >= n || k >= n {
        return Err(Error::UnknownLabel(format!("atom index {}", j.max(k))));
    }
    let (mj, mk) = (space.masses()[j], space.masses()[k]);
    if (mj - mk).abs() > 1e-12 {
        return Err(Error::UnequalMasses { j, k, mj, mk });
    }
    let mut assignment: Vec<usize> = (0..n).collect();
    assignment.swap(j, k);
    tabular_from_indices(space.labels(), space.labels(), assignment)
}

/// Rotation from a special orthogonal matrix (tolerance 1e-10), stored after
/// re-orthonormalization.
pub fn rotation(matrix: Vec<Vec<f64>>) -> Result<MeasurableMap> {
    let n = check_square(&matrix)?;
    let defect = orthogonality_defect(&matrix);
    if defect > 1e-10 {
        return Err(Error::NotSpecialOrthogonal(format!("|Q^T Q - I| = {defect:.3e}")));
    }
    let det = to_dmatrix(&matrix).determinant();
    if (det - 1.0).abs() > 1e-10 {
        return Err(Error::NotSpecialOrthogonal(format!("det = {det}")));
    }
    // modified Gram-Schmidt on columns, two passes
    let mut q = to_dmatrix(&matrix);
    for _ in 0..2 {
        for j in 0..n {
            for i in 0..j {
                let dot = q.column(i).dot(&q.column(j));
                let ci = q.column(i).clone_owned();
                let mut cj = q.column_mut(j);
                cj -= ci * dot;
            }
            let nrm = q.column(j).norm();
            q.column_mut(j).scale_mut(1.0 / nrm);
        }
    }
    Ok(MeasurableMap::from_kind(MapKind::Rotation {
        matrix: from_dmatrix(&q),
    }))
}

/// Product of Givens rotations `(i, j, angle)`, applied in order.
pub fn rotation_from_planes(dim: usize, planes: &[(usize, usize, f64)]) -> Result<MeasurableMap> {
    let mut q = DMatrix::<f64>::identity(dim, dim);
    for &(i, j, angle) in planes {
        if i >= dim || j >= dim || i == j {
            return Err(Error::InvalidConfig(format!("bad rotation plane ({i}, {j}) in dim {dim}")));
        }
        let mut g = DMatrix::<f64>::identity(dim, dim);
        let (s, c) = angle.sin_cos();
        g[(i, i)] = c;
        g[(j, j)] = c;
        g[(i, j)] = -s;
        g[(j, i)] = s;
        q = g * q;
    }
    rotation(from_dmatrix(&q))
}

/// Planar rotation by `angle`.
pub fn rotation_2d(angle: f64) -> MeasurableMap {
    rotation_from_planes(2, &[(0, 1, angle)]).expect("planar rotation is special orthogonal")
}

/// `S = f . T . f^-1`, i.e. `f^-1` first, then `t`, then `f`.
pub fn conjugate(f: &MeasurableMap, t: &MeasurableMap) -> Result<MeasurableMap> {
    let f_inv = f
        .inverse()
        .ok_or_else(|| Error::MissingInverse(f.kind_name().into()))?;
    if t.domain_dim() != f.domain_dim() || t.codomain_dim() != f.domain_dim() {
        return Err(Error::DimensionMismatch {
            expected: f.domain_dim(),
            got: t.domain_dim(),
        });
    }
    MeasurableMap::composite(vec![f_inv, t.clone(), f.clone()])
}

/// Restriction of `map` to the closed ball of radius `radius`.
pub fn truncate_ball(map: &MeasurableMap, radius: f64) -> Result<MeasurableMap> {
    if !(radius > 0.0) {
        return Err(Error::NonpositiveLength(radius));
    }
    Ok(MeasurableMap::from_kind(MapKind::Truncated {
        inner: Box::new(map.clone()),
        radius,
        guard: BallGuard::Input,
    }))
}

/// Push-forward of a finite space by preimage summation.
pub fn pushforward_finite(map: &MeasurableMap, space: &FiniteSpace) -> Result<FiniteSpace> {
    if let MapKind::Identity { .. } = map.kind {
        return Ok(space.clone());
    }
    let table = map.to_table(space)?;
    let mut masses = vec![0.0; table.codomain.len()];
    for (i, &j) in table.assignment.iter().enumerate() {
        masses[j] += space.masses()[i];
    }
    make_finite(&table.codomain, &masses)
}

/// Push-forward density `p(map^-1(y)) |det D map^-1(y)|` tabulated on the
/// target grid (defaults to the source grid) and renormalized.
pub fn pushforward_grid(
    map: &MeasurableMap,
    source: &GridDensity,
    target: Option<(&[[f64; 2]], &[usize])>,
) -> Result<GridDensity> {
    let (bounds, resolution) = target.unwrap_or((source.bounds(), source.resolution()));
    if map.domain_dim() != source.dim() {
        return Err(Error::DimensionMismatch {
            expected: map.domain_dim(),
            got: source.dim(),
        });
    }
    if map.codomain_dim() != bounds.len() {
        return Err(Error::DimensionMismatch {
            expected: map.codomain_dim(),
            got: bounds.len(),
        });
    }
    if let MapKind::Identity { .. } = map.kind {
        if bounds == source.bounds() && resolution == source.resolution() {
            return Ok(source.clone());
        }
    }
    let inv = map
        .inverse()
        .ok_or_else(|| Error::MissingInverse(map.kind_name().into()))?;
    if !inv.has_jacobian() {
        return Err(Error::MissingJacobian(map.kind_name().into()));
    }
    let template = GridDensity::from_values(bounds, resolution, vec![1.0; resolution.iter().product()])?;
    let mut values = Vec::with_capacity(template.len());
    let mut failure = None;
    template.for_each_center(|_, y| {
        if failure.is_some() {
            values.push(0.0);
            return;
        }
        let v = match inv.apply(y) {
            Ok(x) => match inv.log_det_jacobian(y) {
                Ok(ld) => source.density_at(&x) * ld.exp(),
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            },
            Err(Error::OutsideDomain { .. }) => 0.0,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        };
        values.push(v);
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let captured = values.iter().sum::<f64>() * template.cell_volume();
    let escaped = 1.0 - captured;
    if escaped > MAX_ESCAPED_MASS {
        return Err(Error::TargetBoxTooSmall(escaped));
    }
    GridDensity::from_values(bounds, resolution, values)
}

/// Pointwise image of a sample set.
pub fn pushforward_samples(map: &MeasurableMap, samples: &SampleSet) -> Result<SampleSet> {
    let mut coords = Vec::with_capacity(samples.len() * map.codomain_dim());
    for p in samples.iter() {
        coords.extend(map.apply(p)?);
    }
    SampleSet::new(map.codomain_dim(), samples.seed(), coords)
}

/// Push-forward of either kind of space; grids stay on their own grid.
pub fn pushforward(map: &MeasurableMap, space: &Space) -> Result<Space> {
    Ok(match space {
        Space::Finite(f) => Space::Finite(pushforward_finite(map, f)?),
        Space::Grid(g) => Space::Grid(pushforward_grid(map, g, None)?),
    })
}

/// Measure preservation certified against a named divergence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreservationReport {
    pub divergence_name: String,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub verdict: bool,
}

/// Discrepancy `D(map_* space || space)` against `tol`.
pub fn is_measure_preserving(
    map: &MeasurableMap,
    space: &Space,
    spec: DivergenceSpec,
    tol: f64,
) -> Result<PreservationReport> {
    let discrepancy = match space {
        Space::Finite(f) => f_divergence_finite(spec, &pushforward_finite(map, f)?, f)?.value,
        Space::Grid(g) => f_divergence_grid(spec, &pushforward_grid(map, g, None)?, g)?.value,
    };
    let discrepancy = discrepancy.max(0.0);
    Ok(PreservationReport {
        divergence_name: spec.name().into(),
        discrepancy,
        tolerance: tol,
        verdict: discrepancy <= tol,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum MapRepr {
    Identity {
        dim: usize,
    },
    Tabular {
        domain: Vec<String>,
        codomain: Vec<String>,
        assignment: BTreeMap<String, String>,
    },
    Affine {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    Reflection {
        offset: Vec<f64>,
    },
    IntervalSwap {
        a: f64,
        b: f64,
        d: f64,
    },
    Rotation {
        matrix: Vec<Vec<f64>>,
    },
    Composite {
        parts: Vec<MeasurableMap>,
    },
    ParametricNet {
        layers: Vec<LayerRepr>,
    },
    Truncated {
        inner: Box<MeasurableMap>,
        radius: f64,
        #[serde(default = "default_guard")]
        guard: BallGuard,
    },
}

fn default_guard() -> BallGuard {
    BallGuard::Input
}

impl From<&MeasurableMap> for MapRepr {
    fn from(m: &MeasurableMap) -> Self {
        match &m.kind {
            MapKind::Identity { dim } => MapRepr::Identity { dim: *dim },
            MapKind::Tabular(t) => MapRepr::Tabular {
                domain: t.domain.clone(),
                codomain: t.codomain.clone(),
                assignment: t
                    .assignment
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| (t.domain[i].clone(), t.codomain[j].clone()))
                    .collect(),
            },
            MapKind::Affine { matrix, offset } => MapRepr::Affine {
                matrix: matrix.clone(),
                offset: offset.clone(),
            },
            MapKind::Reflection { offset } => MapRepr::Reflection {
                offset: offset.clone(),
            },
            MapKind::IntervalSwap { a, b, d } => MapRepr::IntervalSwap { a: *a, b: *b, d: *d },
            MapKind::Rotation { matrix } => MapRepr::Rotation {
                matrix: matrix.clone(),
            },
            MapKind::Composite { parts } => MapRepr::Composite {
                parts: parts.clone(),
            },
            MapKind::Net(n) => MapRepr::ParametricNet {
                layers: n.to_layers(),
            },
            MapKind::Truncated {
                inner,
                radius,
                guard,
            } => MapRepr::Truncated {
                inner: inner.clone(),
                radius: *radius,
                guard: *guard,
            },
        }
    }
}

impl TryFrom<MapRepr> for MeasurableMap {
    type Error = Error;

    fn try_from(r: MapRepr) -> Result<Self> {
        match r {
            MapRepr::Identity { dim } => {
                if dim == 0 {
                    return Err(Error::InvalidConfig("identity dim must be positive".into()));
                }
                Ok(MeasurableMap::identity(dim))
            }
            MapRepr::Tabular {
                domain,
                codomain,
                assignment,
            } => {
                let dom_idx: BTreeMap<&str, usize> =
                    domain.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
                let cod_idx: BTreeMap<&str, usize> =
                    codomain.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
                if dom_idx.len() != domain.len() || cod_idx.len() != codomain.len() {
                    return Err(Error::InvalidConfig("tabular labels must be distinct".into()));
                }
                let mut table = vec![None; domain.len()];
                for (from, to) in &assignment {
                    let i = *dom_idx
                        .get(from.as_str())
                        .ok_or_else(|| Error::UnknownLabel(from.clone()))?;
                    let j = *cod_idx
                        .get(to.as_str())
                        .ok_or_else(|| Error::UnknownLabel(to.clone()))?;
                    table[i] = Some(j);
                }
                let table = table
                    .into_iter()
                    .enumerate()
                    .map(|(i, j)| j.ok_or_else(|| Error::NotTotal(domain[i].clone())))
                    .collect::<Result<Vec<_>>>()?;
                tabular_from_indices(&domain, &codomain, table)
            }
            MapRepr::Affine { matrix, offset } => MeasurableMap::affine(matrix, offset),
            MapRepr::Reflection { offset } => {
                if offset.is_empty() {
                    return Err(Error::InvalidConfig("reflection offset is empty".into()));
                }
                Ok(MeasurableMap::from_kind(MapKind::Reflection { offset }))
            }
            MapRepr::IntervalSwap { a, b, d } => interval_swap(a, b, d),
            MapRepr::Rotation { matrix } => rotation(matrix),
            MapRepr::Composite { parts } => MeasurableMap::composite(parts),
            MapRepr::ParametricNet { layers } => Ok(MeasurableMap::net(TanhNet::from_layers(layers)?)),
            MapRepr::Truncated {
                inner,
                radius,
                guard,
            } => {
                if !(radius > 0.0) {
                    return Err(Error::NonpositiveLength(radius));
                }
                Ok(MeasurableMap::from_kind(MapKind::Truncated { inner, radius, guard }))
            }
        }
    }
}

impl Serialize for MeasurableMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MapRepr::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for MeasurableMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        MeasurableMap::try_from(MapRepr::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}
