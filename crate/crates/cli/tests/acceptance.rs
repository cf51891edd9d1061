//! Acceptance criteria, one line each. Runs as a plain binary so every line
//! is printed; exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use cyclekernel::cycleloss::{evaluate, pure_loss, LossConfig};
use cyclekernel::divergence::{check_pushforward_property, f_divergence_grid, DivergenceSpec};
use cyclekernel::kernel::{act, enumerate_automorphisms, enumerate_isomorphisms, verify_free_transitive, MASS_TOL};
use cyclekernel::maps::{rotation_2d, MeasurableMap};
use cyclekernel::net::TanhNet;
use cyclekernel::perturbation::{asymptotic_check, check_bound, BoundReport};
use cyclekernel::probspace::{gaussian_diag, gaussian_standard, make_finite, seeded_rng, FiniteSpace, Space};
use cyclekernel::trainer::{gradient_check, seed_sweep, TaskName, ToyTask};
use cyclekernel_cli::config::{load, PushforwardConfig, TrainFileConfig};
use rand::Rng;
use rand_distr::StandardNormal;

struct Line {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn line(id: &'static str, pass: bool, detail: String) -> Line {
    Line { id, pass, detail }
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn configs() -> PathBuf {
    root().join("configs")
}

// ---------------------------------------------------------------- kernel

/// Integer weights; masses are weights over their total.
const PARTITIONS: [&[u64]; 30] = [
    &[1],
    &[1, 1],
    &[1, 1, 1],
    &[1, 1, 1, 1],
    &[1, 1, 1, 1, 1],
    &[1, 1, 1, 1, 1, 1],
    &[5, 3, 2],
    &[4, 4, 2],
    &[1, 2],
    &[1, 4],
    &[1, 1, 2],
    &[2, 1, 1],
    &[1, 2, 3],
    &[1, 1, 1, 3],
    &[2, 2, 1, 1],
    &[3, 3, 3, 1],
    &[4, 3, 2, 1],
    &[7, 1, 1, 1],
    &[2, 2, 2, 2, 1],
    &[2, 2, 2, 1, 1],
    &[1, 1, 1, 1, 2],
    &[6, 1, 1, 1, 1],
    &[5, 4, 3, 2, 1],
    &[9, 9, 2],
    &[3, 1, 1, 1, 1, 1],
    &[1, 1, 2, 2, 3, 3],
    &[1, 1, 1, 2, 2, 2],
    &[1, 2, 3, 4, 5, 6],
    &[3, 3, 3, 3, 2, 2],
    &[4, 4, 4, 4, 4, 1],
];

fn finite(prefix: &str, w: &[u64]) -> FiniteSpace {
    let total: u64 = w.iter().sum();
    let labels: Vec<String> = (0..w.len()).map(|i| format!("{prefix}{i}")).collect();
    let masses: Vec<f64> = w.iter().map(|&v| v as f64 / total as f64).collect();
    make_finite(&labels, &masses).unwrap()
}

/// All permutations of `0..n` by recursive insertion.
fn all_perms(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in all_perms(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Brute-force count of bijections `i -> s[i]` with equal rational masses.
fn count_mass_bijections(wx: &[u64], wy: &[u64]) -> usize {
    if wx.len() != wy.len() {
        return 0;
    }
    let (tx, ty): (u64, u64) = (wx.iter().sum(), wy.iter().sum());
    all_perms(wx.len())
        .into_iter()
        .filter(|s| (0..wx.len()).all(|i| wx[i] * ty == wy[s[i]] * tx))
        .count()
}

fn multiplicity_product(w: &[u64]) -> usize {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for &v in w {
        *counts.entry(v).or_default() += 1;
    }
    counts.values().map(|&m| (1..=m).product::<usize>()).product()
}

fn reversed(w: &[u64]) -> Vec<u64> {
    w.iter().rev().cloned().collect()
}

fn criterion_1() -> Line {
    let t = Instant::now();
    let mut problems = Vec::new();
    let mut checked = 0;
    for (i, w) in PARTITIONS.iter().enumerate() {
        let x = finite("x", w);
        let next = PARTITIONS[(i + 1) % PARTITIONS.len()];
        for wy in [reversed(w), next.to_vec()] {
            let y = finite("y", &wy);
            let r = verify_free_transitive(&x, &y, MASS_TOL).unwrap();
            let aut = multiplicity_product(w);
            let iso = count_mass_bijections(w, &wy);
            let iso_ok = iso == 0 || iso == aut;
            let ok = r.verdict()
                && r.group_size == aut
                && r.catalogue.isomorphisms.len() == iso
                && iso_ok
                && (r.iso_empty || (r.free && r.transitive));
            if !ok {
                problems.push(format!("{w:?} vs {wy:?}: {}", r.summary()));
            }
            checked += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = problems.is_empty() && secs < 5.0;
    line(
        "1 kernel structure",
        pass,
        format!(
            "{} partitions, {checked} (X,Y) pairs, |Aut| = prod m_k! and |Iso| in {{0,|Aut|}} by brute force; {} mismatches; {secs:.2}s (limit 5s){}",
            PARTITIONS.len(),
            problems.len(),
            problems.first().map(|p| format!("; first: {p}")).unwrap_or_default()
        ),
    )
}

fn is_identity(phi: &MeasurableMap) -> bool {
    let t = phi.as_tabular().unwrap();
    t.assignment().iter().enumerate().all(|(i, &j)| i == j)
}

fn criterion_2() -> Line {
    let cfg = LossConfig::new(1.0, 0.0, DivergenceSpec::KL);
    let mut catalogues = 0;
    let mut pairs = 0;
    let mut nonzero = 0;
    let mut unchanged = 0;
    for w in PARTITIONS.iter().filter(|w| multiplicity_product(w) <= 24) {
        let x = finite("x", w);
        let y = finite("y", &reversed(w));
        let (xs, ys): (Space, Space) = (x.clone().into(), y.clone().into());
        let isos = enumerate_isomorphisms(&x, &y, MASS_TOL).unwrap();
        let auts = enumerate_automorphisms(&x, MASS_TOL).unwrap();
        catalogues += 1;
        for s in &isos {
            for phi in &auts {
                let t = act(phi, s, &x, &y).unwrap();
                let r = pure_loss(&t.g, &t.f, &xs, &ys, &cfg).unwrap();
                if r.total_pure != 0.0 {
                    nonzero += 1;
                }
                if !is_identity(phi) && t.assignment() == s.assignment() {
                    unchanged += 1;
                }
                pairs += 1;
            }
        }
    }
    line(
        "2 kernel invariance",
        nonzero == 0 && unchanged == 0 && pairs > 0,
        format!(
            "{catalogues} catalogues with group_size <= 24, {pairs} (solution, automorphism) pairs; {nonzero} with total_pure != 0, {unchanged} non-identity twists left the pair unchanged"
        ),
    )
}

// ----------------------------------------------------------- divergences

/// The bundled 2D matrix plus reflection and shift on 1D pairs at 1024 cells.
fn criterion_3() -> Line {
    let t = Instant::now();
    let config: PushforwardConfig = load(&configs().join("pushforward_matrix.json"), None).unwrap();
    let mut worst = (0.0f64, String::new());
    let mut count = 0;
    let mut record = |gap: f64, what: String| {
        count += 1;
        if gap > worst.0 || worst.1.is_empty() {
            worst = (gap, what);
        }
    };
    for pair in &config.pairs {
        let p = pair.p.build_grid("p").unwrap();
        let q = pair.q.build_grid("q").unwrap();
        assert_eq!(p.resolution(), &[128, 128]);
        for m in &config.maps {
            for &spec in &DivergenceSpec::ALL {
                let r = check_pushforward_property(spec, &p, &q, &m.map, 1e-2).unwrap();
                record(r.gap, format!("2D {} {} {spec}", m.name, pair.name));
            }
        }
    }
    let b = [[-8.0, 8.0]];
    let pairs_1d = [
        ([0.0, 1.0], [0.5, 1.0]),
        ([0.0, 1.2], [0.0, 1.0]),
        ([0.3, 1.2], [-0.2, 1.1]),
    ];
    let maps_1d = [
        ("reflection", MeasurableMap::point_reflection(&[0.0])),
        ("shift", MeasurableMap::shift(vec![0.5])),
    ];
    for (pp, qq) in pairs_1d {
        let p = gaussian_diag(&[pp[0]], &[pp[1]], &b, &[1024]).unwrap();
        let q = gaussian_diag(&[qq[0]], &[qq[1]], &b, &[1024]).unwrap();
        for (name, m) in &maps_1d {
            for &spec in &DivergenceSpec::ALL {
                let r = check_pushforward_property(spec, &p, &q, m, 1e-2).unwrap();
                record(r.gap, format!("1D {name} N{pp:?}/N{qq:?} {spec}"));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    line(
        "3 push-forward property",
        worst.0 <= 1e-2 && secs < 30.0,
        format!(
            "{count} checks (5 divergences x rotation pi/4, reflection, shift x 3 pairs at 128^2; reflection, shift x 3 pairs at 1024); max gap {:.3e} ({}) vs tol 1e-2; {secs:.1}s (limit 30s)",
            worst.0, worst.1
        ),
    )
}

/// Gap ratio under resolution doubling on the 1D KL case.
fn criterion_3b() -> Line {
    let b = [[-8.0, 8.0]];
    let phi = MeasurableMap::shift(vec![1.0 / 3.0]);
    let gap = |res: usize| {
        let p = gaussian_diag(&[0.0], &[1.0], &b, &[res]).unwrap();
        let q = gaussian_diag(&[1.0], &[1.0], &b, &[res]).unwrap();
        check_pushforward_property(DivergenceSpec::KL, &p, &q, &phi, 1e-2).unwrap().gap
    };
    let (g1, g2) = (gap(1024), gap(2048));
    let ratio = g2 / g1;
    line(
        "3b push-forward gap refinement",
        (ratio - 0.5).abs() <= 0.1,
        format!("KL N(0,1)/N(1,1), shift 1/3: gap {g1:.3e} at 1024, {g2:.3e} at 2048, ratio {ratio:.3} (required 0.5 +/- 20%)"),
    )
}

fn criterion_4() -> Line {
    let kl = |m: f64, s: f64, radius: f64, res: usize| {
        let b = [[-radius, radius]];
        let p = gaussian_diag(&[0.0], &[1.0], &b, &[res]).unwrap();
        let q = gaussian_diag(&[m], &[s], &b, &[res]).unwrap();
        f_divergence_grid(DivergenceSpec::KL, &p, &q).unwrap().value
    };
    // KL(N(m1,s1^2) || N(m2,s2^2)) = ln(s2/s1) + (s1^2 + (m1-m2)^2) / (2 s2^2) - 1/2
    let closed = |m: f64, s: f64| s.ln() + (1.0 + m * m) / (2.0 * s * s) - 0.5;
    let a = kl(1.0, 1.0, 8.0, 1024);
    let c = kl(0.0, 2.0, 12.0, 2048);
    let (oa, oc) = (closed(1.0, 1.0), closed(0.0, 2.0));
    let pass = (a - oa).abs() <= 2e-3 && (c - oc).abs() <= 5e-3 && (a - 0.5).abs() <= 2e-3 && (c - 0.31815).abs() <= 5e-3;
    line(
        "4 divergence oracles",
        pass,
        format!(
            "KL(N(0,1)||N(1,1)) = {a:.6} vs {oa:.6} (tol 2e-3); KL(N(0,1)||N(0,4)) = {c:.6} vs {oc:.6} (tol 5e-3)"
        ),
    )
}

// ---------------------------------------------------------- perturbation

fn normal<R: Rng>(rng: &mut R, scale: f64) -> f64 {
    scale * rng.sample::<f64, _>(StandardNormal)
}

fn random_affine_pair<R: Rng>(rng: &mut R) -> (MeasurableMap, MeasurableMap) {
    loop {
        let a = [
            [1.0 + normal(rng, 0.25), normal(rng, 0.25)],
            [normal(rng, 0.25), 1.0 + normal(rng, 0.25)],
        ];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if det.abs() < 0.3 {
            continue;
        }
        let b = [normal(rng, 0.3), normal(rng, 0.3)];
        let inv = [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]];
        let fm: Vec<Vec<f64>> = inv
            .iter()
            .map(|row| row.iter().map(|v| v + normal(rng, 0.1)).collect())
            .collect();
        let fb: Vec<f64> = (0..2)
            .map(|i| -(inv[i][0] * b[0] + inv[i][1] * b[1]) + normal(rng, 0.1))
            .collect();
        let g = MeasurableMap::affine(a.iter().map(|r| r.to_vec()).collect(), b.to_vec()).unwrap();
        let f = MeasurableMap::affine(fm, fb).unwrap();
        if g.has_inverse() && f.has_inverse() {
            return (g, f);
        }
    }
}

fn criterion_5() -> Line {
    let t = Instant::now();
    let x: Space = gaussian_standard(2, 6.0, 64).unwrap().into();
    let cfg = LossConfig {
        mc_samples: 100_000,
        ..LossConfig::new(1.0, 0.5, DivergenceSpec::KL)
    };
    let mut rng = seeded_rng(2024, 0);
    let mut pairs: Vec<(String, MeasurableMap, MeasurableMap)> = (0..20)
        .map(|i| {
            let (g, f) = random_affine_pair(&mut rng);
            (format!("affine{i}"), g, f)
        })
        .collect();
    for i in 0..5 {
        let g = TanhNet::random(2, [8, 8], 2, &mut rng).unwrap();
        let f = TanhNet::random(2, [8, 8], 2, &mut rng).unwrap();
        pairs.push((format!("net{i}"), MeasurableMap::net(g), MeasurableMap::net(f)));
    }
    let isometries = [
        ("rotation pi/3", rotation_2d(PI / 3.0)),
        ("axis reflection", MeasurableMap::affine(vec![vec![-1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap()),
        ("diagonal reflection", MeasurableMap::affine(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0, 0.0]).unwrap()),
    ];
    let mut cases = 0;
    let mut violations = Vec::new();
    let mut min_z = f64::INFINITY;
    for (name, g, f) in &pairs {
        for (pname, phi) in &isometries {
            let r = check_bound(g, f, phi, &x, &x, &cfg).unwrap();
            cases += 1;
            let z = r.slack / r.mc_stderr;
            min_z = min_z.min(z);
            let within = r.slack >= -3.0 * r.mc_stderr;
            if !within || !r.verdict {
                violations.push(format!("{name}/{pname}: slack {:.3e}, stderr {:.3e}", r.slack, r.mc_stderr));
            }
        }
    }
    let id = MeasurableMap::identity(2);
    let w: BoundReport = check_bound(&id, &id, &MeasurableMap::point_reflection(&[0.0, 0.0]), &x, &x, &cfg).unwrap();
    let witness_ok = w.slack >= -3.0 * w.mc_stderr && w.slack <= 5.0 * w.mc_stderr;
    let secs = t.elapsed().as_secs_f64();
    line(
        "5 perturbation bound",
        violations.is_empty() && witness_ok && secs < 120.0,
        format!(
            "{cases} cases (20 affine + 5 tanh-net pairs x 3 isometries, X = Y = N(0,I_2), mc 1e5): {} below -3 stderr, min slack/stderr {min_z:.2}; witness (G = F = id, phi = -x) slack {:.3e} = {:.2} stderr (need <= 5); {secs:.1}s (limit 120s){}",
            violations.len(),
            w.slack,
            w.slack / w.mc_stderr,
            violations.first().map(|v| format!("; first: {v}")).unwrap_or_default()
        ),
    )
}

fn criterion_6() -> Line {
    let x: Space = gaussian_standard(1, 8.0, 1024).unwrap().into();
    let pairs: Vec<_> = (1..=40)
        .map(|i| {
            let h = 1.0 / i as f64;
            (MeasurableMap::shift(vec![h]), MeasurableMap::shift(vec![-h]))
        })
        .collect();
    let cfg = LossConfig {
        mc_samples: 100_000,
        ..LossConfig::new(1.0, 1.0, DivergenceSpec::KL)
    };
    let phi = MeasurableMap::point_reflection(&[0.0]);
    let r = asymptotic_check(&pairs, &phi, &x, &x, &cfg, Some(10)).unwrap();
    let tail = &r.series[30..];
    // recomputed from the series: limsup of identity terms over the tail
    let limsup = tail
        .iter()
        .map(|b| b.base_report.id_x + b.base_report.id_y)
        .fold(f64::NEG_INFINITY, f64::max);
    let c = tail[0].lipschitz.max(1.0);
    let limit = c * cfg.alpha_id * limsup + 2.0 * cfg.alpha_id * tail[0].displacement;
    let ok_all = tail.iter().all(|b| b.lhs <= limit + 3.0 * b.lhs_stderr);
    let worst = tail
        .iter()
        .map(|b| (b.lhs - limit) / b.lhs_stderr)
        .fold(f64::NEG_INFINITY, f64::max);
    line(
        "6 asymptotic bound",
        ok_all && r.verdict && r.tail_window == 10,
        format!(
            "G_i = x + 1/i, i = 1..40, tail 10: max tail lhs {:.4} vs limit_rhs {:.4} (recomputed {limit:.4}); worst (lhs - limit)/stderr = {worst:.2} (need <= 3)",
            r.max_tail_lhs, r.limit_rhs
        ),
    )
}

// --------------------------------------------------------------- trainer

fn criterion_7() -> Line {
    let config: TrainFileConfig = load(&configs().join("train_bimodal_sweep.json"), None).unwrap();
    let task = ToyTask::bimodal().unwrap();
    let mut trainer = config.trainer.clone();
    trainer.alpha_id = 1.0;
    let r = gradient_check(&task, &trainer, 10, 1e-5, 7).unwrap();
    line(
        "7 gradient correctness",
        r.relative_errors.len() == 10 && r.max_relative_error <= 1e-4,
        format!(
            "10 random parameter points, central differences h = 1e-5: max relative error {:.2e} (tol 1e-4)",
            r.max_relative_error
        ),
    )
}

fn criterion_8() -> Line {
    let t = Instant::now();
    let task = TaskName::Bimodal.build().unwrap();
    let x: Space = task.source.clone().into();
    let cfg = LossConfig {
        mc_samples: 100_000,
        ..LossConfig::new(1.0, 0.0, DivergenceSpec::JS)
    };
    let id = MeasurableMap::identity(1);
    let refl = MeasurableMap::point_reflection(&[0.0]);
    let a = evaluate(&id, &id, &x, &x, &cfg).unwrap().report;
    let b = evaluate(&refl, &refl, &x, &x, &cfg).unwrap().report;
    let se = |r: &cyclekernel::cycleloss::LossReport| {
        r.alpha_cyc * (r.mc_stderr.cyc_x.powi(2) + r.mc_stderr.cyc_y.powi(2)).sqrt()
    };
    let combined = (se(&a).powi(2) + se(&b).powi(2)).sqrt();
    let diff = (a.total_pure - b.total_pure).abs();
    let ok_a = diff <= 3.0 * combined;

    let base: TrainFileConfig = load(&configs().join("train_bimodal_sweep.json"), None).unwrap();
    let ident: TrainFileConfig = load(&configs().join("train_bimodal_identity.json"), None).unwrap();
    let s0 = seed_sweep(&task, &base.trainer, &base.seeds).unwrap();
    let s10 = seed_sweep(&task, &ident.trainer, &ident.seeds).unwrap();
    let gap = s0.loss_equivalence_gap;
    let ok_b = s0.converged >= 2 && gap.is_some_and(|g| g <= 0.05);
    let (f0, f10) = (s0.frequency("identity"), s10.frequency("identity"));
    let ok_c = f10 > f0;
    let secs = t.elapsed().as_secs_f64();
    let hist = |s: &cyclekernel::trainer::SweepReport| {
        s.histogram
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    line(
        "8 symmetry phenomenon",
        ok_a && ok_b && ok_c && secs < 600.0,
        format!(
            "(a) total_pure identity {:.3e} vs reflection {:.3e}, |diff| {diff:.3e} <= 3*{combined:.3e}: {ok_a}; (b) alpha_id=0 seeds {:?}: [{}], {} converged, gap {} (tol 0.05): {ok_b}; (c) identity frequency {f10:.1} at alpha_id=10 [{}] vs {f0:.1} at alpha_id=0: {ok_c}; {secs:.0}s (limit 600s)",
            a.total_pure,
            b.total_pure,
            base.seeds,
            hist(&s0),
            s0.converged,
            gap.map_or("n/a".into(), |g| format!("{g:.4}")),
            hist(&s10)
        ),
    )
}

// ----------------------------------------------------------- determinism

fn cli(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_cyclekernel"))
        .args(args)
        .output()
        .expect("binary runs")
        .status
        .code()
        .unwrap_or(-1)
}

fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_9() -> Line {
    let tmp = tempfile::tempdir().unwrap();
    let short = |seeds: Vec<u64>, name: &str| {
        let mut c: TrainFileConfig = load(&configs().join("train_bimodal_sweep.json"), None).unwrap();
        c.seeds = seeds;
        c.seed = 3;
        c.trainer.steps = 300;
        c.trainer.checkpoint_every = 100;
        c.trainer.eval_samples = 5000;
        let p = tmp.path().join(name);
        fs::write(&p, serde_json::to_string_pretty(&c).unwrap()).unwrap();
        p
    };
    let sweep = short(vec![0, 1], "short_sweep.json");
    let single = short(vec![], "short_single.json");
    let runs: Vec<(&str, PathBuf)> = vec![
        ("kernel", configs().join("uniform3.json")),
        ("kernel", configs().join("mismatch.json")),
        ("pushforward", configs().join("pushforward_matrix.json")),
        ("bound", configs().join("bound_gaussian_reflection.json")),
        ("bound", configs().join("bound_exact_finite.json")),
        ("train", sweep),
        ("train", single),
    ];
    let mut differing = Vec::new();
    let mut files = 0;
    for (i, (cmd, cfg)) in runs.iter().enumerate() {
        let dirs: Vec<PathBuf> = (0..2).map(|k| tmp.path().join(format!("run{i}_{k}"))).collect();
        let codes: Vec<i32> = dirs
            .iter()
            .map(|d| cli(&[cmd, "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap()]))
            .collect();
        let (a, b) = (read_tree(&dirs[0]), read_tree(&dirs[1]));
        files += a.len();
        if codes[0] != 0 || codes[0] != codes[1] || a.is_empty() || a != b {
            differing.push(format!("{cmd} {} (exit {:?})", cfg.file_name().unwrap().to_string_lossy(), codes));
        }
    }
    line(
        "9 determinism",
        differing.is_empty(),
        format!(
            "{} command runs repeated, {files} report files compared byte for byte; {} differ{}",
            runs.len(),
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(": {}", differing.join(", ")) }
        ),
    )
}

fn main() {
    let criteria: [fn() -> Line; 10] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_3b,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
    ];
    let mut failed = 0;
    for c in criteria {
        let l = c();
        println!("[{}] {}: {}", if l.pass { "PASS" } else { "FAIL" }, l.id, l.detail);
        if !l.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
