use std::collections::BTreeMap;

use cyclekernel::cycleloss::{evaluate, LossConfig};
use cyclekernel::divergence::DivergenceSpec;
use cyclekernel::kernel::{
    act, automorphism_count, enumerate_automorphisms, enumerate_isomorphisms, transporter, MASS_TOL,
};
use cyclekernel::maps::{tabular_from_indices, MeasurableMap};
use cyclekernel::probspace::{make_finite, FiniteSpace, Space};
use proptest::prelude::*;

fn space(prefix: &str, weights: &[u32]) -> FiniteSpace {
    let total: u32 = weights.iter().sum();
    let labels: Vec<String> = (0..weights.len()).map(|i| format!("{prefix}{i}")).collect();
    let masses: Vec<f64> = weights.iter().map(|&w| w as f64 / total as f64).collect();
    make_finite(&labels, &masses).unwrap()
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

fn weights() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(1u32..4, 1..=6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn automorphism_count_is_product_of_factorials(w in weights()) {
        let mut classes: BTreeMap<u32, usize> = BTreeMap::new();
        for &v in &w {
            *classes.entry(v).or_default() += 1;
        }
        let expected: u64 = classes.values().map(|&m| factorial(m)).product();
        let x = space("x", &w);
        prop_assert_eq!(automorphism_count(&x, MASS_TOL), expected);
        prop_assert_eq!(enumerate_automorphisms(&x, MASS_TOL).unwrap().len() as u64, expected);
    }

    #[test]
    fn action_laws(w in prop::collection::vec(1u32..3, 2..=5), a in 0usize..1000, b in 0usize..1000, s in 0usize..1000) {
        let x = space("x", &w);
        let mut rev = w.clone();
        rev.reverse();
        let y = space("y", &rev);
        let auts = enumerate_automorphisms(&x, MASS_TOL).unwrap();
        let isos = enumerate_isomorphisms(&x, &y, MASS_TOL).unwrap();
        let (phi, psi) = (&auts[a % auts.len()], &auts[b % auts.len()]);
        let sol = &isos[s % isos.len()];

        let id = act(&auts[0], sol, &x, &y).unwrap();
        prop_assert_eq!(id.assignment(), sol.assignment());

        // right action: twisting by psi then by phi equals twisting by "phi, then psi"
        let twice = act(phi, &act(psi, sol, &x, &y).unwrap(), &x, &y).unwrap();
        let composed = act(&phi.then(psi).unwrap(), sol, &x, &y).unwrap();
        prop_assert_eq!(twice.assignment(), composed.assignment());

        let other = &isos[(s + 1) % isos.len()];
        let t = transporter(sol, other, &x, &y).unwrap();
        let moved = act(&t, sol, &x, &y).unwrap();
        prop_assert_eq!(moved.assignment(), other.assignment());
    }

    #[test]
    fn extended_loss_is_monotone_in_alphas(
        w in prop::collection::vec(1u32..5, 3..=4),
        g in prop::collection::vec(0usize..4, 4),
        f in prop::collection::vec(0usize..4, 4),
        a1 in 0.0f64..5.0, da in 0.0f64..5.0, i1 in 0.0f64..5.0, di in 0.0f64..5.0,
    ) {
        let n = w.len();
        let x = space("a", &w);
        let y = x.relabeled(&x.labels().iter().map(|l| l.to_uppercase()).collect::<Vec<_>>()).unwrap();
        let gm = tabular_from_indices(x.labels(), y.labels(), g[..n].iter().map(|v| v % n).collect()).unwrap();
        let fm = tabular_from_indices(y.labels(), x.labels(), f[..n].iter().map(|v| v % n).collect()).unwrap();
        let (xs, ys): (Space, Space) = (x.into(), y.into());
        let at = |ac: f64, ai: f64| {
            evaluate(&gm, &fm, &xs, &ys, &LossConfig::new(ac, ai, DivergenceSpec::JS)).unwrap().report
        };
        let base = at(a1, i1);
        let more_cyc = at(a1 + da, i1);
        let more_id = at(a1, i1 + di);
        prop_assert!(more_cyc.total_ext >= base.total_ext - 1e-12);
        prop_assert!(more_id.total_ext >= base.total_ext - 1e-12);
        prop_assert!(more_cyc.total_pure >= base.total_pure - 1e-12);
        prop_assert!((more_id.total_pure - base.total_pure).abs() <= 1e-12);
    }

    #[test]
    fn exact_solutions_stay_in_the_kernel(w in weights(), pick in 0usize..1000) {
        let x = space("x", &w);
        let y = space("y", &w);
        let isos = enumerate_isomorphisms(&x, &y, MASS_TOL).unwrap();
        let sol = &isos[pick % isos.len()];
        let (xs, ys): (Space, Space) = (x.clone().into(), y.clone().into());
        let cfg = LossConfig::new(1.0, 0.0, DivergenceSpec::KL);
        for phi in enumerate_automorphisms(&x, MASS_TOL).unwrap().iter().take(24) {
            let t = act(phi, sol, &x, &y).unwrap();
            let r = evaluate(&t.g, &t.f, &xs, &ys, &cfg).unwrap().report;
            prop_assert_eq!(r.total_pure, 0.0);
        }
    }
}

#[test]
fn identity_map_round_trips_through_json() {
    let m = MeasurableMap::identity(2);
    let text = serde_json::to_string(&m).unwrap();
    assert_eq!(text, r#"{"kind":"identity","dim":2}"#);
    assert_eq!(serde_json::from_str::<MeasurableMap>(&text).unwrap(), m);
}
