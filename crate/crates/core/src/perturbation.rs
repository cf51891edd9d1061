//! Numerical check of the extended-loss perturbation bound
//!
//! `L_ext(G o phi, phi^-1 o F) <= max(C, 1) L_ext(G, F) + 2 alpha_id E||phi(x) - x||`
//!
//! where `C` is a Lipschitz constant of `phi^-1`, and of its asymptotic form
//! along a sequence of pairs. Base and twisted losses share sample streams, so
//! the slack is estimated from paired per-sample differences.

use serde::{Deserialize, Serialize};

use crate::cycleloss::{draw_samples, evaluate, twist, LossConfig, LossEvaluation, LossReport, Norm};
use crate::divergence::DivergenceSpec;
use crate::error::{Error, Result};
use crate::maps::{is_measure_preserving, MeasurableMap};
use crate::probspace::{sample_grid_stream, Space};

/// TV tolerance at which `phi` counts as an automorphism of a gridded space.
pub const GRID_PRESERVATION_TOL: f64 = 1e-3;

/// TV tolerance for finite spaces (floating mass bookkeeping only).
pub const FINITE_PRESERVATION_TOL: f64 = 1e-9;

/// Point pairs drawn when a Lipschitz constant must be sampled.
pub const LIPSCHITZ_PAIRS: usize = 10_000;

/// Statistical margin, in standard errors, for bound verdicts.
pub const SIGMA_MARGIN: f64 = 3.0;

const STREAM_LIP_U: u64 = 11;
const STREAM_LIP_V: u64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub value: f64,
    /// True when `value` is a sampled lower bound rather than exact.
    pub is_lower_bound: bool,
}

/// Lipschitz constant of `map` on `space`: analytic when the map kind allows
/// it, otherwise the largest difference quotient over `n_pairs` sampled pairs.
/// Pair `k` does not depend on `n_pairs`, so more pairs never lower the
/// estimate.
pub fn estimate_lipschitz(map: &MeasurableMap, space: &Space, n_pairs: usize, seed: u64) -> Result<LipschitzEstimate> {
    if let Some(value) = map.analytic_lipschitz() {
        return Ok(LipschitzEstimate {
            value,
            is_lower_bound: false,
        });
    }
    match space {
        Space::Finite(f) => {
            // every distinct pair of one-hot labels sits at the same distance
            let table = map.to_table(f)?;
            let value = if table.is_bijection() { 1.0 } else { f64::INFINITY };
            Ok(LipschitzEstimate {
                value,
                is_lower_bound: false,
            })
        }
        Space::Grid(g) => {
            if n_pairs == 0 {
                return Err(Error::InvalidConfig("n_pairs must be >= 1".into()));
            }
            let us = sample_grid_stream(g, n_pairs, seed, STREAM_LIP_U)?;
            let vs = sample_grid_stream(g, n_pairs, seed, STREAM_LIP_V)?;
            let mut best: f64 = 0.0;
            for k in 0..n_pairs {
                let u = us.point(k);
                let v: Vec<f64> = if k % 2 == 0 {
                    vs.point(k).to_vec()
                } else {
                    // near pair along a random direction
                    u.iter().zip(vs.point(k)).map(|(a, b)| a + 1e-3 * (b - a)).collect()
                };
                let d = Norm::L2.distance(u, &v);
                if d > 0.0 {
                    best = best.max(Norm::L2.distance(&map.apply(u)?, &map.apply(&v)?) / d);
                }
            }
            Ok(LipschitzEstimate {
                value: best,
                is_lower_bound: true,
            })
        }
    }
}

/// Lipschitz constant of `phi^-1`.
pub fn estimate_inverse_lipschitz(
    phi: &MeasurableMap,
    space: &Space,
    n_pairs: usize,
    seed: u64,
) -> Result<LipschitzEstimate> {
    let inv = phi
        .inverse()
        .ok_or_else(|| Error::MissingInverse(phi.kind_name().into()))?;
    estimate_lipschitz(&inv, space, n_pairs, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `L_ext(G o phi, phi^-1 o F)`.
    pub lhs: f64,
    /// `L_ext(G, F)`.
    pub base: f64,
    pub lipschitz: f64,
    pub lipschitz_is_lower_bound: bool,
    /// `E_X ||phi(x) - x||`.
    pub displacement: f64,
    /// `E_Y ||phi^-1(y) - y||` on continuous spaces; matches `displacement`
    /// when Y has the law of X.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub displacement_y: Option<f64>,
    pub alpha_id: f64,
    pub rhs: f64,
    pub slack: f64,
    /// Standard error of the paired slack estimator.
    pub mc_stderr: f64,
    pub lhs_stderr: f64,
    pub verdict: bool,
    pub base_report: LossReport,
    pub twisted_report: LossReport,
}

impl BoundReport {
    /// `max(C, 1) base + 2 alpha_id displacement`, recomputed from fields.
    pub fn recompute_rhs(&self) -> f64 {
        self.lipschitz.max(1.0) * self.base + 2.0 * self.alpha_id * self.displacement
    }
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

fn check_automorphism(phi: &MeasurableMap, x: &Space) -> Result<()> {
    let tol = match x {
        Space::Finite(_) => FINITE_PRESERVATION_TOL,
        Space::Grid(_) => GRID_PRESERVATION_TOL,
    };
    let report = is_measure_preserving(phi, x, DivergenceSpec::TV, tol).map_err(|e| match e {
        Error::TargetBoxTooSmall(_) | Error::LabelMismatch | Error::UnknownLabel(_) => {
            Error::NotAutomorphism(format!("{} does not map X into itself: {e}", phi.kind_name()))
        }
        e => e,
    })?;
    if !report.verdict {
        return Err(Error::NotAutomorphism(format!(
            "{}: TV(phi_* X, X) = {:.3e} > {:.0e}",
            phi.kind_name(),
            report.discrepancy,
            tol
        )));
    }
    Ok(())
}

/// Mean of `||a(p) - p||` over points, with per-point values.
fn displacements(map: &MeasurableMap, points: impl Iterator<Item = Vec<f64>>, norm: Norm) -> Result<Vec<f64>> {
    points.map(|p| Ok(norm.distance(&map.apply(&p)?, &p))).collect()
}

/// Evaluates both sides of the bound for one pair and one automorphism.
pub fn check_bound(
    g: &MeasurableMap,
    f: &MeasurableMap,
    phi: &MeasurableMap,
    x: &Space,
    y: &Space,
    config: &LossConfig,
) -> Result<BoundReport> {
    config.validate()?;
    if x.dim() != y.dim() {
        return Err(Error::AmbientMismatch(x.dim(), y.dim()));
    }
    check_automorphism(phi, x)?;
    let inv = phi
        .inverse()
        .ok_or_else(|| Error::MissingInverse(phi.kind_name().into()))?;
    let lip = estimate_lipschitz(&inv, x, LIPSCHITZ_PAIRS, config.seed)?;
    let scale = lip.value.max(1.0);
    let (gt, ft) = twist(g, f, phi)?;
    let base = evaluate(g, f, x, y, config)?;
    let twisted = evaluate(&gt, &ft, x, y, config)?;
    let (a_c, a_i) = (config.alpha_cyc, config.alpha_id);

    let (displacement, displacement_y, mc_stderr, lhs_stderr) = match (x, y) {
        (Space::Finite(xf), Space::Finite(_)) => {
            let cost = config.norm.label_mismatch();
            let moved = |map: &MeasurableMap, s: &crate::probspace::FiniteSpace| -> Result<f64> {
                let t = map.to_table(s)?;
                Ok(t.assignment()
                    .iter()
                    .enumerate()
                    .filter(|&(i, &j)| i != j)
                    .map(|(i, _)| s.masses()[i] * cost)
                    .sum())
            };
            (moved(phi, xf)?, None, 0.0, 0.0)
        }
        (Space::Grid(xg), Space::Grid(yg)) => {
            let (xs, ys) = draw_samples(xg, yg, config.mc_samples, config.seed)?;
            let dx = displacements(phi, xs.iter().map(<[f64]>::to_vec), config.norm)?;
            let dy = displacements(&inv, ys.iter().map(<[f64]>::to_vec), config.norm)?;
            let (b, t) = match (&base, &twisted) {
                (
                    LossEvaluation { samples: Some(b), .. },
                    LossEvaluation { samples: Some(t), .. },
                ) => (b, t),
                _ => unreachable!("grid evaluations carry samples"),
            };
            let n = xs.len() as f64;
            let lhs_x: Vec<f64> = (0..xs.len()).map(|i| a_c * t.cyc_x[i] + a_i * t.id_x[i]).collect();
            let lhs_y: Vec<f64> = (0..ys.len()).map(|i| a_c * t.cyc_y[i] + a_i * t.id_y[i]).collect();
            let slack_x: Vec<f64> = (0..xs.len())
                .map(|i| scale * (a_c * b.cyc_x[i] + a_i * b.id_x[i]) + 2.0 * a_i * dx[i] - lhs_x[i])
                .collect();
            let slack_y: Vec<f64> = (0..ys.len())
                .map(|i| scale * (a_c * b.cyc_y[i] + a_i * b.id_y[i]) - lhs_y[i])
                .collect();
            let stderr = ((variance(&slack_x) + variance(&slack_y)) / n).sqrt();
            let lhs_err = ((variance(&lhs_x) + variance(&lhs_y)) / n).sqrt();
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            (mean(&dx), Some(mean(&dy)), stderr, lhs_err)
        }
        _ => return Err(Error::InvalidConfig("X and Y must both be finite or both be grids".into())),
    };

    let lhs = twisted.report.total_ext;
    let base_value = base.report.total_ext;
    let rhs = scale * base_value + 2.0 * a_i * displacement;
    let slack = rhs - lhs;
    Ok(BoundReport {
        lhs,
        base: base_value,
        lipschitz: lip.value,
        lipschitz_is_lower_bound: lip.is_lower_bound,
        displacement,
        displacement_y,
        alpha_id: a_i,
        rhs,
        slack,
        mc_stderr,
        lhs_stderr,
        verdict: slack >= -SIGMA_MARGIN * mc_stderr,
        base_report: base.report,
        twisted_report: twisted.report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub series: Vec<BoundReport>,
    pub tail_window: usize,
    /// Max of `id_x + id_y` over the tail window.
    pub limsup_id: f64,
    /// `max(C, 1) alpha_id limsup_id + 2 alpha_id displacement`.
    pub limit_rhs: f64,
    pub max_tail_lhs: f64,
    /// `lhs_stderr` at the index attaining `max_tail_lhs`.
    pub tail_stderr: f64,
    /// Whether pure losses decrease along the sequence (advisory only).
    pub pure_decreasing: bool,
    pub verdict: bool,
}

/// Default tail: the last quarter of the sequence, at least 3 entries.
pub fn default_tail_window(len: usize) -> usize {
    len.div_ceil(4).max(3)
}

/// Checks the asymptotic bound along `pairs` with a finite tail window.
pub fn asymptotic_check(
    pairs: &[(MeasurableMap, MeasurableMap)],
    phi: &MeasurableMap,
    x: &Space,
    y: &Space,
    config: &LossConfig,
    tail_window: Option<usize>,
) -> Result<AsymptoticReport> {
    let tail = tail_window.unwrap_or_else(|| default_tail_window(pairs.len()));
    if tail < 3 || pairs.len() < tail {
        return Err(Error::InvalidConfig(format!(
            "need sequence length >= tail window >= 3, got {} and {tail}",
            pairs.len()
        )));
    }
    let series = pairs
        .iter()
        .map(|(g, f)| check_bound(g, f, phi, x, y, config))
        .collect::<Result<Vec<_>>>()?;
    let tail_part = &series[series.len() - tail..];
    let limsup_id = tail_part
        .iter()
        .map(|r| r.base_report.id_x + r.base_report.id_y)
        .fold(f64::NEG_INFINITY, f64::max);
    let first = &series[0];
    let alpha_id = config.alpha_id;
    let limit_rhs = first.lipschitz.max(1.0) * alpha_id * limsup_id + 2.0 * alpha_id * first.displacement;
    let (max_tail_lhs, tail_stderr) = tail_part
        .iter()
        .map(|r| (r.lhs, r.lhs_stderr))
        .fold((f64::NEG_INFINITY, 0.0), |acc, c| if c.0 > acc.0 { c } else { acc });
    let pure_decreasing = series
        .windows(2)
        .all(|w| w[1].base_report.total_pure <= w[0].base_report.total_pure);
    Ok(AsymptoticReport {
        verdict: max_tail_lhs <= limit_rhs + SIGMA_MARGIN * tail_stderr,
        series,
        tail_window: tail,
        limsup_id,
        limit_rhs,
        max_tail_lhs,
        tail_stderr,
        pure_decreasing,
    })
}

pub const BOUND_CSV_HEADER: &str = "i,base,lhs,rhs,slack,stderr";

/// One CSV row per index.
pub fn bound_csv(series: &[BoundReport]) -> String {
    let mut out = String::from(BOUND_CSV_HEADER);
    out.push('\n');
    for (i, r) in series.iter().enumerate() {
        out.push_str(&format!("{},{},{},{},{},{}\n", i, r.base, r.lhs, r.rhs, r.slack, r.mc_stderr));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{enumerate_isomorphisms, MASS_TOL};
    use crate::maps::{atom_transposition, rotation_2d};
    use crate::net::TanhNet;
    use crate::probspace::{gaussian_standard, make_finite, seeded_rng};

    fn std1d() -> Space {
        gaussian_standard(1, 8.0, 1024).unwrap().into()
    }

    #[test]
    fn lipschitz_analytic_and_sampled() {
        let s2: Space = gaussian_standard(2, 6.0, 32).unwrap().into();
        let r = estimate_inverse_lipschitz(&rotation_2d(0.7), &s2, 1000, 0).unwrap();
        assert_eq!((r.value, r.is_lower_bound), (1.0, false));
        let half = MeasurableMap::scale_1d(0.5);
        let r = estimate_inverse_lipschitz(&half, &std1d(), 1000, 0).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);

        let net = MeasurableMap::net(TanhNet::random(1, [6, 6], 1, &mut seeded_rng(5, 0)).unwrap());
        let a = estimate_lipschitz(&net, &std1d(), 1000, 3).unwrap();
        let b = estimate_lipschitz(&net, &std1d(), 10_000, 3).unwrap();
        assert!(a.is_lower_bound && b.value >= a.value && a.value > 0.0);
        assert!(matches!(
            estimate_inverse_lipschitz(&net, &std1d(), 1000, 0),
            Err(Error::MissingInverse(_))
        ));
    }

    #[test]
    fn identity_phi_is_equality() {
        let s = std1d();
        let g = MeasurableMap::shift(vec![0.2]);
        let f = MeasurableMap::affine(vec![vec![1.1]], vec![0.0]).unwrap();
        let cfg = LossConfig {
            mc_samples: 20_000,
            ..LossConfig::new(2.0, 0.5, DivergenceSpec::KL)
        };
        let r = check_bound(&g, &f, &MeasurableMap::identity(1), &s, &s, &cfg).unwrap();
        assert_eq!(r.lhs, r.base);
        assert_eq!(r.displacement, 0.0);
        assert_eq!(r.slack, 0.0);
        assert!((r.rhs - r.recompute_rhs()).abs() <= 1e-12);
    }

    #[test]
    fn exact_finite_transposition() {
        let x = make_finite(&["a", "b", "c"], &[0.4, 0.4, 0.2]).unwrap();
        let y = x.relabeled(&["u", "v", "w"]).unwrap();
        let sol = &enumerate_isomorphisms(&x, &y, MASS_TOL).unwrap()[0];
        let phi = atom_transposition(&x, 0, 1).unwrap();
        let cfg = LossConfig::new(1.0, 0.0, DivergenceSpec::KL);
        let r = check_bound(&sol.g, &sol.f, &phi, &x.clone().into(), &y.into(), &cfg).unwrap();
        assert_eq!((r.lhs, r.rhs, r.slack), (0.0, 0.0, 0.0));
        assert!(r.verdict);

        let bad = crate::maps::tabular_from_indices(x.labels(), x.labels(), vec![2, 1, 0]).unwrap();
        let y = x.relabeled(&["u", "v", "w"]).unwrap();
        assert!(matches!(
            check_bound(&sol.g, &sol.f, &bad, &x.into(), &y.into(), &cfg),
            Err(Error::NotAutomorphism(_))
        ));
    }

    #[test]
    fn reflection_witness_is_tight() {
        let s = std1d();
        let id = MeasurableMap::identity(1);
        let phi = MeasurableMap::point_reflection(&[0.0]);
        let cfg = LossConfig::new(10.0, 1.0, DivergenceSpec::KL);
        let r = check_bound(&id, &id, &phi, &s, &s, &cfg).unwrap();
        let folded = 2.0 * (2.0 / std::f64::consts::PI).sqrt();
        assert!(r.base.abs() < 1e-9);
        assert!((r.displacement - folded).abs() < 2e-2);
        assert!((r.lhs - 2.0 * folded).abs() < 4e-2);
        assert!(r.verdict, "slack {} stderr {}", r.slack, r.mc_stderr);
        assert!(r.slack <= 5.0 * r.mc_stderr);
    }

    #[test]
    fn asymptotic_shift_sequence() {
        let s = std1d();
        let pairs: Vec<_> = (1..=12)
            .map(|i| {
                let h = 1.0 / i as f64;
                (MeasurableMap::shift(vec![h]), MeasurableMap::shift(vec![-h]))
            })
            .collect();
        let cfg = LossConfig {
            mc_samples: 20_000,
            ..LossConfig::new(1.0, 1.0, DivergenceSpec::KL)
        };
        let phi = MeasurableMap::point_reflection(&[0.0]);
        let r = asymptotic_check(&pairs, &phi, &s, &s, &cfg, None).unwrap();
        assert_eq!(r.tail_window, 3);
        assert!((r.limsup_id - 2.0 / 10.0).abs() < 1e-9);
        assert!(r.verdict && r.pure_decreasing);
        assert_eq!(bound_csv(&r.series).lines().count(), 13);
        assert!(asymptotic_check(&pairs[..2], &phi, &s, &s, &cfg, None).is_err());
    }

    #[test]
    fn bound_is_deterministic() {
        let s = std1d();
        let g = MeasurableMap::affine(vec![vec![0.8]], vec![0.3]).unwrap();
        let f = MeasurableMap::shift(vec![-0.1]);
        let cfg = LossConfig {
            mc_samples: 5000,
            ..LossConfig::new(1.0, 1.0, DivergenceSpec::JS)
        };
        let phi = MeasurableMap::point_reflection(&[0.0]);
        let a = check_bound(&g, &f, &phi, &s, &s, &cfg).unwrap();
        let b = check_bound(&g, &f, &phi, &s, &s, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
