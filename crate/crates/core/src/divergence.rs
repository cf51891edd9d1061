//! f-divergences `D_f(p || q) = sum q f(p / q)` on finite spaces and grids,
//! and the numerical check of the push-forward identity
//! `D_f(phi_* p || q) = D_f(p || (phi^-1)_* q)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{pushforward_grid, MapKind, MeasurableMap};
use crate::probspace::{FiniteSpace, GridDensity};

/// Floor substituted for a zero density where the other side is positive.
pub const SUPPORT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DivergenceSpec {
    #[serde(rename = "KL")]
    KL,
    #[serde(rename = "reverseKL")]
    ReverseKL,
    #[serde(rename = "JS")]
    JS,
    #[serde(rename = "TV")]
    TV,
    #[serde(rename = "chi2")]
    Chi2,
}

impl DivergenceSpec {
    pub const ALL: [DivergenceSpec; 5] = [
        DivergenceSpec::KL,
        DivergenceSpec::ReverseKL,
        DivergenceSpec::JS,
        DivergenceSpec::TV,
        DivergenceSpec::Chi2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DivergenceSpec::KL => "KL",
            DivergenceSpec::ReverseKL => "reverseKL",
            DivergenceSpec::JS => "JS",
            DivergenceSpec::TV => "TV",
            DivergenceSpec::Chi2 => "chi2",
        }
    }

    /// The convex generator `f`, with `f(1) = 0`. Defined for `t >= 0`; only
    /// reverse KL is infinite at 0.
    pub fn generator(self, t: f64) -> f64 {
        match self {
            DivergenceSpec::KL => {
                if t == 0.0 {
                    0.0
                } else {
                    t * t.ln()
                }
            }
            DivergenceSpec::ReverseKL => -t.ln(),
            DivergenceSpec::JS => {
                let a = if t == 0.0 { 0.0 } else { t * t.ln() };
                0.5 * (a - (1.0 + t) * ((1.0 + t) / 2.0).ln())
            }
            DivergenceSpec::TV => 0.5 * (t - 1.0).abs(),
            DivergenceSpec::Chi2 => (t - 1.0) * (t - 1.0),
        }
    }

    fn infinite_at_zero(self) -> bool {
        matches!(self, DivergenceSpec::ReverseKL)
    }

    /// `q f(p / q)` with the zero-density conventions; the flag reports a
    /// clamped density.
    fn term(self, p: f64, q: f64) -> (f64, bool) {
        if p == 0.0 && q == 0.0 {
            return (0.0, false);
        }
        let mut violated = false;
        let q_eff = if q == 0.0 {
            violated = true;
            SUPPORT_EPS
        } else {
            q
        };
        let p_eff = if p == 0.0 && self.infinite_at_zero() {
            violated = true;
            SUPPORT_EPS
        } else {
            p
        };
        (q_eff * self.generator(p_eff / q_eff), violated)
    }
}

impl fmt::Display for DivergenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DivergenceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DivergenceSpec::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown divergence `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceValue {
    pub value: f64,
    pub support_violation: bool,
}

/// Divergence between two probability vectors on the same cells.
pub fn f_divergence_masses(spec: DivergenceSpec, p: &[f64], q: &[f64]) -> Result<DivergenceValue> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch(p.len(), q.len()));
    }
    let mut value = 0.0;
    let mut support_violation = false;
    for (&pi, &qi) in p.iter().zip(q) {
        let (t, v) = spec.term(pi, qi);
        value += t;
        support_violation |= v;
    }
    Ok(DivergenceValue {
        value,
        support_violation,
    })
}

/// Exact divergence between finite spaces over the same label set.
pub fn f_divergence_finite(spec: DivergenceSpec, p: &FiniteSpace, q: &FiniteSpace) -> Result<DivergenceValue> {
    if p.len() != q.len() {
        return Err(Error::LabelMismatch);
    }
    let aligned = p
        .labels()
        .iter()
        .map(|l| q.index_of(l).map(|j| q.masses()[j]).ok_or(Error::LabelMismatch))
        .collect::<Result<Vec<_>>>()?;
    f_divergence_masses(spec, p.masses(), &aligned)
}

/// Riemann-sum divergence between densities on the same grid.
pub fn f_divergence_grid(spec: DivergenceSpec, p: &GridDensity, q: &GridDensity) -> Result<DivergenceValue> {
    if !p.same_grid(q) {
        return Err(Error::GridMismatch);
    }
    let mut d = f_divergence_masses(spec, p.values(), q.values())?;
    d.value *= p.cell_volume();
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushforwardReport {
    pub spec: DivergenceSpec,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub verdict: bool,
    pub support_violation: bool,
    /// Set when the map is only piecewise smooth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn piecewise(map: &MeasurableMap) -> bool {
    match map.kind() {
        MapKind::IntervalSwap { .. } => true,
        MapKind::Composite { parts } => parts.iter().any(piecewise),
        MapKind::Truncated { inner, .. } => piecewise(inner),
        _ => false,
    }
}

/// Evaluates both sides of the push-forward identity by grid integration.
/// The left side lives on `q`'s grid, the right side on `p`'s.
pub fn check_pushforward_property(
    spec: DivergenceSpec,
    p: &GridDensity,
    q: &GridDensity,
    phi: &MeasurableMap,
    tol: f64,
) -> Result<PushforwardReport> {
    let phi_inv = phi
        .inverse()
        .ok_or_else(|| Error::MissingInverse(phi.kind_name().into()))?;
    let pushed_p = pushforward_grid(phi, p, Some((q.bounds(), q.resolution())))?;
    let pulled_q = pushforward_grid(&phi_inv, q, Some((p.bounds(), p.resolution())))?;
    let lhs = f_divergence_grid(spec, &pushed_p, q)?;
    let rhs = f_divergence_grid(spec, p, &pulled_q)?;
    let gap = (lhs.value - rhs.value).abs();
    Ok(PushforwardReport {
        spec,
        lhs: lhs.value,
        rhs: rhs.value,
        gap,
        verdict: gap <= tol,
        support_violation: lhs.support_violation || rhs.support_violation,
        note: piecewise(phi).then(|| "piecewise-smooth map: Jacobian taken piecewise, seams ignored".to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{interval_swap, rotation_2d};
    use crate::probspace::{gaussian_diag, gaussian_standard, make_finite, make_grid_density};
    use std::f64::consts::PI;

    #[test]
    fn generators_vanish_at_one() {
        for spec in DivergenceSpec::ALL {
            assert_eq!(spec.generator(1.0), 0.0, "{spec}");
        }
    }

    #[test]
    fn finite_examples() {
        let p = make_finite(&["a", "b", "c"], &[0.4, 0.4, 0.2]).unwrap();
        for spec in DivergenceSpec::ALL {
            assert!(f_divergence_finite(spec, &p, &p).unwrap().value.abs() <= 1e-12);
        }
        let p = make_finite(&["a", "b"], &[0.5, 0.5]).unwrap();
        let q = make_finite(&["a", "b"], &[0.25, 0.75]).unwrap();
        // direct formula: 0.5 ln(0.5/0.25) + 0.5 ln(0.5/0.75)
        let oracle = 0.5 * (2.0f64).ln() + 0.5 * (2.0f64 / 3.0).ln();
        let kl = f_divergence_finite(DivergenceSpec::KL, &p, &q).unwrap();
        assert!((kl.value - oracle).abs() < 1e-15);
        assert!((kl.value - 0.14384).abs() < 1e-5);

        let p = make_finite(&["a", "b"], &[1.0, 0.0]).unwrap();
        let q = make_finite(&["a", "b"], &[0.0, 1.0]).unwrap();
        let tv = f_divergence_finite(DivergenceSpec::TV, &p, &q).unwrap();
        assert!((tv.value - 1.0).abs() < 1e-11);
        assert!(tv.support_violation);
    }

    #[test]
    fn finite_alignment_by_label() {
        let p = make_finite(&["a", "b"], &[0.5, 0.5]).unwrap();
        let q = make_finite(&["b", "a"], &[0.75, 0.25]).unwrap();
        let kl = f_divergence_finite(DivergenceSpec::KL, &p, &q).unwrap();
        assert!((kl.value - 0.143841036).abs() < 1e-8);
        let r = make_finite(&["a", "z"], &[0.5, 0.5]).unwrap();
        assert_eq!(f_divergence_finite(DivergenceSpec::KL, &p, &r), Err(Error::LabelMismatch));
    }

    #[test]
    fn reverse_kl_and_chi2_by_hand() {
        let p = make_finite(&["a", "b"], &[0.5, 0.5]).unwrap();
        let q = make_finite(&["a", "b"], &[0.25, 0.75]).unwrap();
        let rkl = f_divergence_finite(DivergenceSpec::ReverseKL, &p, &q).unwrap().value;
        let expect = 0.25 * (0.25f64 / 0.5).ln() + 0.75 * (0.75f64 / 0.5).ln();
        assert!((rkl - expect).abs() < 1e-15);
        let chi = f_divergence_finite(DivergenceSpec::Chi2, &p, &q).unwrap().value;
        let expect = (0.5f64 - 0.25).powi(2) / 0.25 + (0.5f64 - 0.75).powi(2) / 0.75;
        assert!((chi - expect).abs() < 1e-15);
        let js = f_divergence_finite(DivergenceSpec::JS, &p, &q).unwrap().value;
        let m = [0.375, 0.625];
        let expect = 0.5 * (0.5 * (0.5f64 / m[0]).ln() + 0.5 * (0.5f64 / m[1]).ln())
            + 0.5 * (0.25 * (0.25f64 / m[0]).ln() + 0.75 * (0.75f64 / m[1]).ln());
        assert!((js - expect).abs() < 1e-15);
    }

    #[test]
    fn grid_self_divergence_and_mismatch() {
        let g = gaussian_standard(1, 6.0, 256).unwrap();
        for spec in DivergenceSpec::ALL {
            assert!(f_divergence_grid(spec, &g, &g).unwrap().value.abs() <= 1e-10);
        }
        let h = gaussian_standard(1, 6.0, 128).unwrap();
        assert_eq!(f_divergence_grid(DivergenceSpec::KL, &g, &h), Err(Error::GridMismatch));
    }

    #[test]
    fn gaussian_kl_closed_forms() {
        let p = gaussian_diag(&[0.0], &[1.0], &[[-8.0, 8.0]], &[1024]).unwrap();
        let q = gaussian_diag(&[1.0], &[1.0], &[[-8.0, 8.0]], &[1024]).unwrap();
        let kl = f_divergence_grid(DivergenceSpec::KL, &p, &q).unwrap().value;
        assert!((kl - 0.5).abs() < 2e-3, "{kl}");

        let p = gaussian_diag(&[0.0], &[1.0], &[[-12.0, 12.0]], &[2048]).unwrap();
        let q = gaussian_diag(&[0.0], &[2.0], &[[-12.0, 12.0]], &[2048]).unwrap();
        let kl = f_divergence_grid(DivergenceSpec::KL, &p, &q).unwrap().value;
        let oracle = 2.0f64.ln() + 1.0 / 8.0 - 0.5;
        assert!((kl - oracle).abs() < 5e-3, "{kl} vs {oracle}");
    }

    #[test]
    fn identity_gap_is_exactly_zero() {
        let p = gaussian_diag(&[0.0], &[1.0], &[[-8.0, 8.0]], &[256]).unwrap();
        let q = gaussian_diag(&[0.5], &[1.3], &[[-8.0, 8.0]], &[256]).unwrap();
        for spec in DivergenceSpec::ALL {
            let r = check_pushforward_property(spec, &p, &q, &MeasurableMap::identity(1), 0.0).unwrap();
            assert_eq!(r.gap, 0.0);
            assert!(r.verdict);
        }
    }

    #[test]
    fn rotation_of_isotropic_pair() {
        let p = gaussian_standard(2, 6.0, 128).unwrap();
        let r = check_pushforward_property(DivergenceSpec::KL, &p, &p, &rotation_2d(0.9), 1e-6).unwrap();
        assert!(r.lhs.abs() <= 1e-6 && r.rhs.abs() <= 1e-6, "{r:?}");
        assert!(r.verdict);
    }

    #[test]
    fn anisotropic_rotation_kl() {
        let b = [[-8.0, 8.0], [-8.0, 8.0]];
        let p = gaussian_diag(&[0.0, 0.0], &[1.0, 2.0], &b, &[128, 128]).unwrap();
        let q = gaussian_diag(&[0.0, 0.0], &[1.0, 1.0], &b, &[128, 128]).unwrap();
        let r = check_pushforward_property(DivergenceSpec::KL, &p, &q, &rotation_2d(PI / 4.0), 1e-2).unwrap();
        assert!(r.verdict, "{r:?}");
        // rotation leaves KL against an isotropic target unchanged:
        // KL(N(0, diag(1,4)) || N(0, I)) = (1 + 4 - 2 - ln 4) / 2
        let oracle = 0.5 * (5.0 - 2.0 - 4.0f64.ln());
        assert!((r.lhs - oracle).abs() < 1e-2, "{} vs {oracle}", r.lhs);
    }

    #[test]
    fn interval_swap_is_noted() {
        let u = make_grid_density(&[[0.0, 1.0]], &[512], |x| 1.0 + 0.5 * x[0]).unwrap();
        let v = make_grid_density(&[[0.0, 1.0]], &[512], |_| 1.0).unwrap();
        let r = check_pushforward_property(DivergenceSpec::TV, &u, &v, &interval_swap(0.1, 0.6, 0.2).unwrap(), 1e-2)
            .unwrap();
        assert!(r.note.is_some());
        assert!(r.verdict, "{r:?}");
    }

    #[test]
    fn report_json_shape() {
        let r = PushforwardReport {
            spec: DivergenceSpec::KL,
            lhs: 0.5,
            rhs: 0.5,
            gap: 0.0,
            verdict: true,
            support_violation: false,
            note: None,
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"spec":"KL","lhs":0.5,"rhs":0.5,"gap":0.0,"verdict":true,"support_violation":false}"#
        );
    }
}
