//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if any
//! criterion fails. Run with `cargo test --test acceptance -- --nocapture`.

use std::fs;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dabound::alignlab::{
    evaluate, knn_probe, label_mixing_score, train_on_instance, AlignConfig, AlignMethod,
};
use dabound::bounds::{
    assemble_ben_david, assemble_mansour, assemble_wasserstein, assemble_zhang, default_sweep_opt,
    tradeoff_sweep, Soundness, SweepConfig,
};
use dabound::datasets::{LabeledDataset, ShiftKind, TransferInstance, UnlabeledView};
use dabound::divergence::{
    lambda_trained, wasserstein1_exact, wasserstein1_sinkhorn, SinkhornConfig,
};
use dabound::metalearn::{default_family_spec, run_baselines, MetaConfig};
use dabound::models::train::grad;
use dabound::models::{
    risk01, risk_l1, train_supervised, Arch, FiniteClass, Hypothesis, Loss, OutputMode,
};
use dabound::rng;
use dabound::transfers::{
    gen_gaussian_pair, gen_invariance_flip, gen_mixup_swap, gen_prior_shift, shuffle_target_labels,
    GeneratorKind, GeneratorSpec,
};
use rand::Rng as _;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------- oracles

/// Brute-force `sup_{a,b} d_T(a,b) - d_S(a,b)` straight from the definition.
fn hdh_oracle(class: &FiniteClass, s: &UnlabeledView, t: &UnlabeledView) -> f64 {
    let dis = |a: &Hypothesis, b: &Hypothesis, v: &UnlabeledView| -> f64 {
        v.iter()
            .filter(|(x, _)| a.predict(x) != b.predict(x))
            .map(|(_, w)| w)
            .sum()
    };
    let mut best = 0.0f64;
    for a in class.members() {
        for b in class.members() {
            best = best.max(dis(a, b, t) - dis(a, b, s));
        }
    }
    best
}

fn lambda_oracle(class: &FiniteClass, s: &LabeledDataset, t: &LabeledDataset) -> f64 {
    let risk = |h: &Hypothesis, d: &LabeledDataset| -> f64 {
        d.iter()
            .filter(|(x, y, _)| h.predict(x) != *y)
            .map(|(_, _, w)| w)
            .sum()
    };
    class
        .members()
        .iter()
        .map(|h| risk(h, s) + risk(h, t))
        .fold(f64::INFINITY, f64::min)
}

/// W1 between two uniform measures of equal size: the best assignment over
/// all permutations.
fn w1_permutation_oracle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    fn rec(i: usize, used: &mut [bool], cost: &[Vec<f64>], acc: f64, best: &mut f64) {
        if acc >= *best {
            return;
        }
        if i == cost.len() {
            *best = acc;
            return;
        }
        for j in 0..cost.len() {
            if !used[j] {
                used[j] = true;
                rec(i + 1, used, cost, acc + cost[i][j], best);
                used[j] = false;
            }
        }
    }
    let dist = |x: &[f64], y: &[f64]| {
        x.iter()
            .zip(y)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()
    };
    let cost: Vec<Vec<f64>> = a
        .iter()
        .map(|x| b.iter().map(|y| dist(x, y)).collect())
        .collect();
    let mut best = f64::INFINITY;
    rec(0, &mut vec![false; a.len()], &cost, 0.0, &mut best);
    best / a.len() as f64
}

/// Independent forward pass and loss for the documented parameter layout.
fn oracle_loss(widths: &[usize], params: &[f64], data: &[(Vec<f64>, usize, f64)]) -> f64 {
    let mut total = 0.0;
    for (x, y, w) in data {
        let mut a = x.clone();
        let mut off = 0;
        for l in 0..widths.len() - 1 {
            let (n_in, n_out) = (widths[l], widths[l + 1]);
            let (wm, b) = (
                &params[off..off + n_in * n_out],
                &params[off + n_in * n_out..off + n_in * n_out + n_out],
            );
            off += n_in * n_out + n_out;
            let z: Vec<f64> = (0..n_out)
                .map(|o| (0..n_in).map(|i| wm[o * n_in + i] * a[i]).sum::<f64>() + b[o])
                .collect();
            a = if l + 2 == widths.len() {
                z
            } else {
                z.iter()
                    .map(|&v| if v > 0.0 { v } else { 0.01 * v })
                    .collect()
            };
        }
        let loss = if a.len() == 1 {
            let z = a[0];
            (1.0 + (-z.abs()).exp()).ln() + z.max(0.0) - (*y as f64) * z
        } else {
            let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + a.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            lse - a[*y]
        };
        total += w * loss;
    }
    total
}

// ---------------------------------------------------------------- fixtures

fn random_weights(r: &mut rng::Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| r.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

fn random_labeled(r: &mut rng::Rng, n: usize, d: usize) -> LabeledDataset {
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| r.random_range(-3..=3) as f64).collect())
        .collect();
    let labels = (0..n).map(|_| r.random_range(0..2)).collect();
    LabeledDataset::new(points, labels, random_weights(r, n), 2).unwrap()
}

/// A binary instance on a small integer grid with at most 32 support points
/// and a class of at most 64 members.
fn random_finite_instance(seed: u64) -> (TransferInstance, FiniteClass) {
    let mut r = rng::stream(seed, 0xACC1);
    let d = r.random_range(1..=2);
    let (ns, nt) = (r.random_range(1..=16), r.random_range(1..=16));
    let inst = TransferInstance::new(
        random_labeled(&mut r, ns, d),
        random_labeled(&mut r, nt, d),
        ShiftKind::Covariate,
        seed,
    )
    .unwrap();
    let mut members = vec![
        Hypothesis::Constant { label: 0 },
        Hypothesis::Constant { label: 1 },
    ];
    for f in 0..d {
        for t in -3..=4 {
            for (below, above) in [(0, 1), (1, 0)] {
                members.push(Hypothesis::Stump {
                    feature: f,
                    threshold: t as f64 - 0.5,
                    below,
                    above,
                });
            }
        }
    }
    while members.len() < 64 {
        members.push(Hypothesis::Linear {
            weights: (0..d).map(|_| r.random_range(-1.0..1.0)).collect(),
            bias: r.random_range(-2.0..2.0),
        });
    }
    members.truncate(64);
    (inst, FiniteClass::new("grid", members).unwrap())
}

fn threshold_instance() -> (TransferInstance, FiniteClass) {
    let s = LabeledDataset::uniform(vec![vec![-1.0], vec![1.0]], vec![0, 1], 2).unwrap();
    let t = LabeledDataset::uniform(vec![vec![1.0]], vec![1], 2).unwrap();
    let class = FiniteClass::new(
        "thresholds",
        vec![
            Hypothesis::threshold(-2.0),
            Hypothesis::threshold(0.0),
            Hypothesis::threshold(2.0),
        ],
    )
    .unwrap();
    (
        TransferInstance::new(s, t, ShiftKind::Covariate, 0).unwrap(),
        class,
    )
}

// ---------------------------------------------------------------- criteria

struct FiniteSuite {
    reports: usize,
    violations: usize,
    min_slack: f64,
    oracle_mismatch: usize,
    zhang_over: usize,
    equality: bool,
    elapsed: Duration,
}

fn finite_suite() -> FiniteSuite {
    let t0 = Instant::now();
    let mut s = FiniteSuite {
        reports: 0,
        violations: 0,
        min_slack: f64::INFINITY,
        oracle_mismatch: 0,
        zhang_over: 0,
        equality: false,
        elapsed: Duration::ZERO,
    };
    let arch_for = |d: usize| Arch::new(vec![d, 4, 1]).unwrap();
    for seed in 0..100u64 {
        let (inst, class) = random_finite_instance(seed);
        let (sx, tx) = (inst.source().unlabeled(), inst.target_view());
        let hdh = hdh_oracle(&class, &sx, &tx);
        let lam = lambda_oracle(&class, inst.source(), inst.evaluation_target());
        for h in class.members() {
            let bd = assemble_ben_david(h, &class, &inst).unwrap();
            let zh = assemble_zhang(h, &class, &inst).unwrap();
            let ma = assemble_mansour(h, &class, &inst).unwrap();
            if (bd.divergence.value - hdh).abs() > 1e-12 || (bd.lambda.value - lam).abs() > 1e-12 {
                s.oracle_mismatch += 1;
            }
            if (bd.target_risk - risk01(h, inst.evaluation_target()).unwrap()).abs() > 1e-12 {
                s.oracle_mismatch += 1;
            }
            if zh.rhs > bd.rhs + 1e-12 {
                s.zhang_over += 1;
            }
            for r in [&bd, &zh, &ma] {
                s.reports += 1;
                s.min_slack = s.min_slack.min(r.slack);
                if r.soundness != Soundness::Certified || r.slack < -1e-9 {
                    s.violations += 1;
                }
            }
        }
        // Wasserstein: a K-projected L1 network and a K-projected witness.
        let k = [0.5, 1.0, 2.0, 5.0][(seed % 4) as usize];
        let opt = default_sweep_opt().with_lipschitz(Some(k));
        let opt = dabound::models::OptConfig { steps: 300, ..opt };
        let arch = arch_for(inst.dim());
        let h = Hypothesis::from(
            train_supervised(&arch, OutputMode::L1, inst.source(), &opt, seed).unwrap(),
        );
        let lam = lambda_trained(
            &arch,
            OutputMode::L1,
            inst.source(),
            inst.evaluation_target(),
            &opt,
            seed,
            1,
        )
        .unwrap();
        for kk in [Some(k), None] {
            let r = assemble_wasserstein(&h, &inst, &lam, kk).unwrap();
            s.reports += 1;
            s.min_slack = s.min_slack.min(r.slack);
            if r.soundness != Soundness::Certified || r.slack < -1e-9 {
                s.violations += 1;
            }
        }
    }
    let (inst, class) = threshold_instance();
    let r = assemble_ben_david(&class.members()[2], &class, &inst).unwrap();
    s.equality = r.rhs == 1.0 && r.target_risk == 1.0 && r.slack == 0.0 && r.source_risk == 0.5;
    s.elapsed = t0.elapsed();
    s
}

fn criterion_1(s: &FiniteSuite) -> Outcome {
    let pass = s.violations == 0
        && s.oracle_mismatch == 0
        && s.equality
        && s.elapsed < Duration::from_secs(30);
    outcome(
        pass,
        format!(
            "100 instances, {} certified reports, {} violations, min slack {:.3e}, oracle mismatches {}, equality case {}, {:.1?}",
            s.reports, s.violations, s.min_slack, s.oracle_mismatch, s.equality, s.elapsed
        ),
    )
}

fn criterion_2(s: &FiniteSuite) -> Outcome {
    outcome(
        s.zhang_over == 0,
        format!(
            "{} hypotheses with rhs_zhang > rhs_ben_david + 1e-12",
            s.zhang_over
        ),
    )
}

fn criterion_3() -> Outcome {
    let t0 = Instant::now();
    let mut r = rng::stream(3, 0xACC3);
    let mut worst_perm = 0.0f64;
    for _ in 0..200 {
        let n = r.random_range(1..=6);
        let d = r.random_range(1..=3);
        let a: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| r.random_range(-2.0..2.0)).collect())
            .collect();
        let b: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| r.random_range(-2.0..2.0)).collect())
            .collect();
        let exact = wasserstein1_exact(
            &UnlabeledView::uniform(a.clone()).unwrap(),
            &UnlabeledView::uniform(b.clone()).unwrap(),
        )
        .unwrap()
        .value;
        worst_perm = worst_perm.max((exact - w1_permutation_oracle(&a, &b)).abs());
    }
    let mut axioms = true;
    let view = |r: &mut rng::Rng| {
        let n = r.random_range(1..=8);
        let pts = (0..n)
            .map(|_| (0..2).map(|_| r.random_range(-2.0..2.0)).collect())
            .collect();
        UnlabeledView::new(pts, random_weights(r, n)).unwrap()
    };
    for _ in 0..100 {
        let (x, y, z) = (view(&mut r), view(&mut r), view(&mut r));
        let w = |p: &UnlabeledView, q: &UnlabeledView| wasserstein1_exact(p, q).unwrap().value;
        axioms &= (w(&x, &y) - w(&y, &x)).abs() <= 1e-12;
        axioms &= w(&x, &x) == 0.0;
        axioms &= w(&x, &z) <= w(&x, &y) + w(&y, &z) + 1e-9;
    }
    let mut sink_ok = 0;
    let cases = 8;
    for i in 0..cases {
        let n = 8 + 8 * i;
        let a: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..2).map(|_| r.random_range(0.0..1.0)).collect())
            .collect();
        let b: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..2).map(|_| r.random_range(0.5..1.5)).collect())
            .collect();
        let (a, b) = (
            UnlabeledView::uniform(a).unwrap(),
            UnlabeledView::uniform(b).unwrap(),
        );
        let exact = wasserstein1_exact(&a, &b).unwrap().value;
        let sink = wasserstein1_sinkhorn(&a, &b, &SinkhornConfig::with_reg(1e-3))
            .unwrap()
            .value;
        if (sink - exact).abs() <= 0.05 * exact + 1e-3 {
            sink_ok += 1;
        }
    }
    let elapsed = t0.elapsed();
    outcome(
        worst_perm <= 1e-9 && axioms && sink_ok == cases && elapsed < Duration::from_secs(60),
        format!(
            "max |exact - permutation| {worst_perm:.2e} over 200, metric axioms {axioms} over 100 triples, sinkhorn {sink_ok}/{cases} within 5% + 1e-3 (n 8..64), {elapsed:.1?}"
        ),
    )
}

fn criterion_4() -> Outcome {
    let t0 = Instant::now();
    let grid = vec![0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0];
    let cfg = SweepConfig {
        k_grid: grid,
        arch: Arch::new(vec![1, 8, 1]).unwrap(),
        opt: default_sweep_opt(),
        seed: 0,
        restarts: 3,
    };
    let mixup = gen_mixup_swap(&GeneratorSpec::preset(GeneratorKind::MixupSwap)).unwrap();
    let curve = tradeoff_sweep(&mixup, &cfg, 1).unwrap();
    let floor = curve
        .rows
        .iter()
        .map(|r| r.rhs)
        .fold(f64::INFINITY, f64::min);
    let all_rows = curve.rows.len() == cfg.k_grid.len();
    let h_t = train_supervised(
        &cfg.arch,
        OutputMode::L1,
        mixup.evaluation_target(),
        &default_sweep_opt(),
        0,
    )
    .unwrap();
    let target_only = risk_l1(&h_t.into(), mixup.evaluation_target()).unwrap();
    let easy = gen_gaussian_pair(&GeneratorSpec::easy_case(0.1)).unwrap();
    let easy_min = tradeoff_sweep(&easy, &cfg, 1).unwrap().min_rhs().unwrap();
    let elapsed = t0.elapsed();
    outcome(
        all_rows && floor >= 1.0 - 1e-6 && target_only <= 1e-6 && easy_min <= 0.3 && elapsed < Duration::from_secs(120),
        format!(
            "mixup min rhs over K in [0.01, 100] {floor:.6} ({} rows), target-only L1 risk {target_only:.2e}, easy-case min rhs {easy_min:.4}, {elapsed:.1?}",
            curve.rows.len()
        ),
    )
}

fn criterion_5() -> Outcome {
    let t0 = Instant::now();
    let mut gaps = Vec::new();
    let mut so_accs = Vec::new();
    for seed in 0..5 {
        let inst = gen_prior_shift(&GeneratorSpec {
            seed,
            ..GeneratorSpec::preset(GeneratorKind::PriorShift)
        })
        .unwrap();
        let acc = |method: AlignMethod| {
            let cfg = AlignConfig {
                method,
                weight: 10.0,
                seed,
                ..AlignConfig::default()
            };
            let (m, _) = train_on_instance(&inst, &cfg).unwrap();
            evaluate(&m, &inst).target_acc
        };
        let so = acc(AlignMethod::SourceOnly);
        let dann = acc(AlignMethod::Dann);
        so_accs.push(so);
        gaps.push(so - dann);
    }
    gaps.sort_by(f64::total_cmp);
    let median = gaps[2];
    so_accs.sort_by(f64::total_cmp);
    let so_median = so_accs[2];
    let elapsed = t0.elapsed();
    outcome(
        median >= 0.1 && so_median >= 0.9 && elapsed < Duration::from_secs(180),
        format!(
            "median SO - DANN target acc {median:.3} (gaps {gaps:.3?}), SO target acc median {so_median:.3} min {:.3}, {elapsed:.1?}",
            so_accs[0]
        ),
    )
}

fn criterion_6() -> Outcome {
    let t0 = Instant::now();
    let inst = gen_mixup_swap(&GeneratorSpec {
        n_per_class: 50,
        sigma: 0.1,
        ..GeneratorSpec::preset(GeneratorKind::MixupSwap)
    })
    .unwrap();
    let cfg = AlignConfig {
        method: AlignMethod::Dann,
        weight: 10.0,
        ..AlignConfig::default()
    };
    let (m, _) = train_on_instance(&inst, &cfg).unwrap();
    let mixing = label_mixing_score(&m, &inst);
    let src = evaluate(&m, &inst).source_acc;
    let elapsed = t0.elapsed();
    outcome(
        mixing >= 0.8 && src >= 0.9 && elapsed < Duration::from_secs(60),
        format!("label mixing {mixing:.3}, source acc {src:.3}, {elapsed:.1?}"),
    )
}

fn criterion_7() -> Outcome {
    let id = |x: &[f64]| x.to_vec();
    let same = gen_gaussian_pair(&GeneratorSpec {
        shift: 0.0,
        ..GeneratorSpec::preset(GeneratorKind::GaussianPair)
    })
    .unwrap();
    let identical = knn_probe(&same, id, 50).unwrap();
    let swapped_inst = gen_mixup_swap(&GeneratorSpec {
        n_per_class: 250,
        sigma: 0.1,
        ..GeneratorSpec::preset(GeneratorKind::MixupSwap)
    })
    .unwrap();
    let swapped = knn_probe(&swapped_inst, id, 50).unwrap();
    let big = gen_gaussian_pair(&GeneratorSpec {
        shift: 0.0,
        n_per_class: 250,
        ..GeneratorSpec::preset(GeneratorKind::GaussianPair)
    })
    .unwrap();
    let shuffled_inst = shuffle_target_labels(&big, 7).unwrap();
    let c = shuffled_inst.num_classes() as f64;
    let n = shuffled_inst.evaluation_target().len();
    let shuffled = knn_probe(&shuffled_inst, id, 50).unwrap();
    outcome(
        (identical - 1.0).abs() <= 1e-9 && swapped.abs() <= 1e-9 && n == 500 && (shuffled - 1.0 / c).abs() <= 0.1,
        format!("identical {identical:.6}, swapped {swapped:.6}, shuffled {shuffled:.3} vs 1/C = {:.3} at n={n}", 1.0 / c),
    )
}

fn criterion_8() -> Outcome {
    let mut r = rng::stream(8, 0xACC8);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let depth = r.random_range(1..=3);
        let mut widths = vec![r.random_range(1..=4)];
        for _ in 1..depth {
            widths.push(r.random_range(1..=6));
        }
        widths.push(r.random_range(1..=4));
        let arch = Arch::new(widths.clone()).unwrap();
        let params: Vec<f64> = (0..arch.num_params())
            .map(|_| r.random_range(-1.0..1.0))
            .collect();
        let n = r.random_range(1..=5);
        let outputs = widths[widths.len() - 1];
        let c = outputs.max(2);
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..widths[0]).map(|_| r.random_range(-2.0..2.0)).collect())
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..c)).collect();
        let data =
            LabeledDataset::new(points.clone(), labels.clone(), random_weights(&mut r, n), c)
                .unwrap();
        let g = grad(&arch, &params, &data, Loss::CrossEntropy).unwrap();
        let rows: Vec<(Vec<f64>, usize, f64)> =
            data.iter().map(|(x, y, w)| (x.to_vec(), y, w)).collect();
        let h = 1e-6;
        let fd: Vec<f64> = (0..params.len())
            .map(|i| {
                let (mut p, mut m) = (params.clone(), params.clone());
                p[i] += h;
                m[i] -= h;
                (oracle_loss(&widths, &p, &rows) - oracle_loss(&widths, &m, &rows)) / (2.0 * h)
            })
            .collect();
        let diff: f64 = g
            .values()
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = g
            .norm()
            .max(fd.iter().map(|v| v * v).sum::<f64>().sqrt())
            .max(1e-8);
        worst = worst.max(diff / scale);
    }
    outcome(
        worst < 1e-4,
        format!("max relative error {worst:.2e} over 100 random MLPs"),
    )
}

fn criterion_9() -> Outcome {
    let t0 = Instant::now();
    let family = gen_invariance_flip(&default_family_spec(0)).unwrap();
    let cfg = MetaConfig::default();
    let table = run_baselines(&family, &cfg).unwrap();
    let maml = table.get("maml2dom").unwrap();
    let random = table.get("random_so").unwrap();
    let beats_all = table.results.iter().all(|b| maml.mean >= b.mean);
    let summary: Vec<String> = table
        .results
        .iter()
        .map(|b| format!("{} {:.3}±{:.3}", b.name, b.mean, b.sd))
        .collect();
    let elapsed = t0.elapsed();
    outcome(
        cfg.ways == 3
            && maml.accuracies.len() == 10
            && maml.mean >= random.mean + 0.15
            && beats_all
            && elapsed < Duration::from_secs(300),
        format!("{}; {elapsed:.1?}", summary.join(", ")),
    )
}

fn dabound(args: &[&str], out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_dabound"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("DABOUND_SEED")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn compared_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json") || n.ends_with(".svg") || n.ends_with(".csv"))
        .collect();
    names.sort();
    names
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let gen_dir = root.join("gen-a");
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("gen", vec!["gen", "mixup_swap", "--seed", "3"]),
        (
            "estimate",
            vec!["estimate", "--method", "exact-ot", "--seed", "3"],
        ),
        (
            "estimate-adv",
            vec!["estimate", "--method", "adversarial", "--seed", "3"],
        ),
        ("bound", vec!["bound", "--set", "opt.steps=200"]),
        (
            "sweep",
            vec![
                "sweep",
                "--set",
                "opt.steps=300",
                "--set",
                "k_grid=[0.1, 1.0, 10.0]",
            ],
        ),
        ("align", vec!["align", "--method", "dann", "--steps", "100"]),
        (
            "probe",
            vec![
                "probe",
                "--set",
                "features=aligned",
                "--set",
                "probe.align.steps=50",
            ],
        ),
        (
            "meta",
            vec![
                "meta",
                "--set",
                "meta_iterations=10",
                "--set",
                "pretrain_steps=10",
                "--set",
                "dann_steps=10",
                "--set",
                "eval_tasks=3",
            ],
        ),
    ];
    let mut failures = Vec::new();
    let mut files = 0;
    for (name, args) in &runs {
        let (a, b) = (
            root.join(format!("{name}-a")),
            root.join(format!("{name}-b")),
        );
        if !dabound(args, &a) || !dabound(args, &b) {
            failures.push(format!("{name}: run failed"));
            continue;
        }
        let (fa, fb) = (compared_files(&a), compared_files(&b));
        if fa != fb || !fa.contains(&"result.json".to_string()) {
            failures.push(format!("{name}: artifact lists differ"));
            continue;
        }
        for f in &fa {
            files += 1;
            if fs::read(a.join(f)).unwrap() != fs::read(b.join(f)).unwrap() {
                failures.push(format!("{name}/{f}"));
            }
        }
    }
    // Sweep rows are independent, so the thread count must not matter.
    let (j1, j2) = (root.join("jobs-1"), root.join("jobs-2"));
    let sweep = [
        "sweep",
        "--set",
        "opt.steps=300",
        "--set",
        "k_grid=[0.1, 1.0, 10.0]",
    ];
    let jobs_ok = dabound(&[&sweep[..], &["--jobs", "1"]].concat(), &j1)
        && dabound(&[&sweep[..], &["--jobs", "2"]].concat(), &j2)
        && fs::read(j1.join("result.json")).unwrap() == fs::read(j2.join("result.json")).unwrap();
    // Rendering an existing run reproduces its SVG.
    let svg = fs::read(gen_dir.join("scatter.svg")).unwrap_or_default();
    let render_ok = Command::new(env!("CARGO_BIN_EXE_dabound"))
        .arg("render")
        .arg(&gen_dir)
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
        && fs::read(gen_dir.join("scatter.svg")).unwrap() == svg;
    outcome(
        failures.is_empty() && jobs_ok && render_ok,
        format!(
            "{} subcommand runs, {files} artifacts byte-identical across reruns; --jobs 1 vs 2 identical {jobs_ok}; render identical {render_ok}{}",
            runs.len(),
            if failures.is_empty() { String::new() } else { format!("; differing: {}", failures.join(", ")) }
        ),
    )
}

/// Writes to the stdout handle directly so the lines survive test capture.
fn report(line: std::fmt::Arguments) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        outcome(false, format!("panicked: {msg}"))
    });
    report(format_args!(
        "[{}] {id:>2} {name}: {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    ));
    o.pass
}

#[test]
fn acceptance() {
    let suite = catch_unwind(finite_suite).ok();
    let missing = || outcome(false, "finite suite panicked");
    let results = [
        run(1, "bound validity", || {
            suite.as_ref().map_or_else(missing, criterion_1)
        }),
        run(2, "zhang tighter than ben-david", || {
            suite.as_ref().map_or_else(missing, criterion_2)
        }),
        run(3, "exact W1 oracle equivalence", criterion_3),
        run(4, "no-free-lunch sweep", criterion_4),
        run(5, "prior-shift direction", criterion_5),
        run(6, "label-mixing witness", criterion_6),
        run(7, "knn probe sanity", criterion_7),
        run(8, "gradient engine", criterion_8),
        run(9, "meta-learning direction", criterion_9),
        run(10, "cli determinism", criterion_10),
    ];
    let passed = results.iter().filter(|p| **p).count();
    report(format_args!(
        "acceptance: {passed}/{} criteria passed",
        results.len()
    ));
    assert_eq!(passed, results.len(), "acceptance criteria failed");
}
