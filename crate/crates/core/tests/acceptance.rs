//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! The dataset-dependent check runs only when `REPDECODE_BASELINE_MANIFEST`
//! points at a manifest listing the subjects' brain matrices and one
//! sentence-reps entry holding the word-vector baseline.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{gaussian, gaussian_vec, oracle};
use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use repdecode::corpusgen::{self, MaskConfig, SplitSizes, Task};
use repdecode::decoder::{average_rank, nested_cv_decode, ridge_fit, RidgeConfig};
use repdecode::matrixio::{read_matrix, EntryKind, RunManifest};
use repdecode::pca::pca_fit;
use repdecode::probe::{
    batch_loss_and_gradient, evaluate_uas, induce_parse, prepare_examples, probe_loss, probe_train,
    uas, DistMatrix, ProbeConfig, ProbeExample,
};
use repdecode::rng::{below_usize, seeded, unit_f64};
use repdecode::rsa::spearman;
use repdecode::stats::{bootstrap_ci, paired_t, PairedSample, ALPHA};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Outcome;

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn within_budget(outcome: Outcome, elapsed: Duration, budget: Option<Duration>) -> Outcome {
    match (outcome, budget) {
        (Outcome::Pass(d), Some(b)) if elapsed > b => {
            Outcome::Fail(format!("{d}; took {elapsed:.2?}, budget {b:.0?}"))
        }
        (o, _) => o,
    }
}

fn ridge_oracle() -> Outcome {
    let x = gaussian(20, 8, 1);
    let y = gaussian(20, 5, 2);
    let mut worst: f64 = 0.0;
    for beta in [0.1, 1.0, 10.0] {
        let g = ridge_fit(&x, &y, beta).unwrap();
        let want = oracle::ridge(&x, &y, beta);
        let diff: f64 = g.data().iter().zip(want.data()).map(|(a, b)| (a - b).powi(2)).sum();
        worst = worst.max(diff.sqrt() / want.frobenius_norm());
    }
    verdict(worst < 1e-8, format!("max relative Frobenius error {worst:.2e} < 1e-8"))
}

fn perfect_decode() -> Outcome {
    let brain = gaussian(384, 64, 20);
    let target = brain.matmul(&gaussian(64, 128, 21)).unwrap();
    let cfg = RidgeConfig {
        beta_grid: vec![1e-6],
        ..RidgeConfig::default()
    };
    let res = nested_cv_decode(&brain, &target, &cfg).unwrap();
    verdict(
        res.average_rank == 1.0 && res.mse < 1e-8,
        format!("AR {} (want 1.0), MSE {:.2e} < 1e-8", res.average_rank, res.mse),
    )
}

fn chance_level() -> Outcome {
    let cfg = RidgeConfig::default();
    let ars: Vec<f64> = (0..20)
        .map(|seed| {
            let brain = gaussian(384, 64, 5000 + seed);
            let target = gaussian(384, 32, 6000 + seed);
            nested_cv_decode(&brain, &target, &cfg).unwrap().average_rank
        })
        .collect();
    let mean = ars.iter().sum::<f64>() / 20.0;
    verdict(
        (mean - 192.5).abs() <= 5.0,
        format!("mean AR over 20 seeds {mean:.2}, want 192.5 ± 5"),
    )
}

fn rank_oracle() -> Outcome {
    let pred = gaussian(25, 10, 30);
    let truth = gaussian(25, 10, 31);
    let (_, ranks) = average_rank(&pred, &truth).unwrap();
    let want = oracle::ranks(&pred, &truth);
    let mismatches = ranks.iter().zip(&want).filter(|(a, b)| a != b).count();
    verdict(mismatches == 0, format!("{mismatches}/25 ranks differ from the sort oracle"))
}

fn pca_checks() -> Outcome {
    let k = 4;
    let low_rank = gaussian(60, k, 40).matmul(&gaussian(k, 15, 41)).unwrap();
    let total: f64 = pca_fit(&low_rank, k).unwrap().explained_variance_ratio().iter().sum();

    let data = gaussian(50, 20, 42);
    let ratios = pca_fit(&data, 20).unwrap().explained_variance_ratio().to_vec();
    let ev = oracle::covariance_eigenvalues(&data);
    let ev_total: f64 = ev.iter().sum();
    let worst = ratios
        .iter()
        .zip(&ev)
        .map(|(r, e)| (r - e / ev_total).abs())
        .fold(0.0, f64::max);
    verdict(
        (total - 1.0).abs() < 1e-10 && worst < 1e-8,
        format!("rank-{k} ratio sum {total:.12}; max oracle deviation {worst:.2e} < 1e-8"),
    )
}

fn spearman_checks() -> Outcome {
    let worst = (0..50u64)
        .map(|seed| {
            let a = gaussian_vec(40, 100 + seed);
            let b = gaussian_vec(40, 200 + seed);
            (spearman(&a, &b).unwrap() - oracle::spearman(&a, &b)).abs()
        })
        .fold(0.0, f64::max);
    let hand = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
    verdict(
        worst < 1e-12 && (hand - 0.8).abs() < 1e-12,
        format!("max oracle deviation {worst:.2e} < 1e-12; hand case {hand}"),
    )
}

fn gradient_check() -> Outcome {
    let mut worst: f64 = 0.0;
    for point in 0..5u64 {
        let fx = common::TreeMetricFixture::new(16, 32, 300 + point);
        let data = prepare_examples(&fx.sentences(5, 3, 14, 400 + point)).unwrap();
        let batch: Vec<&ProbeExample> = data.iter().collect();
        let mut rng = seeded(500 + point);
        let b = DMatrix::from_fn(30, 32, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
        let (_, grad) = batch_loss_and_gradient(&b, &batch);
        let h = 1e-6;
        for _ in 0..100 {
            let (r, c) = (below_usize(&mut rng, 30), below_usize(&mut rng, 32));
            let mut plus = b.clone();
            plus[(r, c)] += h;
            let mut minus = b.clone();
            minus[(r, c)] -= h;
            let fd = (batch_loss_and_gradient(&plus, &batch).0
                - batch_loss_and_gradient(&minus, &batch).0)
                / (2.0 * h);
            let g = grad[(r, c)];
            worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-8));
        }
    }
    verdict(
        worst < 1e-4,
        format!("max relative error {worst:.2e} < 1e-4 over 5 points x 100 coordinates"),
    )
}

fn synthetic_recovery() -> Outcome {
    let fx = common::TreeMetricFixture::new(16, 32, 600);
    let train = fx.sentences(2000, 5, 15, 601);
    let dev = fx.sentences(200, 5, 15, 602);
    let model = probe_train(&train, &ProbeConfig::default()).unwrap();
    let loss = probe_loss(&model, &prepare_examples(&dev).unwrap());
    let score = evaluate_uas(&model, &dev).unwrap();
    verdict(
        score == 1.0 && loss < 0.05 && model.training_log.len() <= 10,
        format!(
            "{} epochs; held-out UAS {score}, dev loss {loss:.4} < 0.05",
            model.training_log.len()
        ),
    )
}

fn mst_exactness() -> Outcome {
    let mut failures = 0;
    for seed in 0..50 {
        let mut rng = seeded(700 + seed);
        let d = DistMatrix::from_fn(6, |_, _| unit_f64(&mut rng));
        let got: f64 = induce_parse(&d).unwrap().iter().map(|&(a, b)| d.get(a, b)).sum();
        let best = oracle::min_spanning_weight(6, |a, b| d.get(a, b));
        if (got - best).abs() > 1e-12 {
            failures += 1;
        }
    }
    verdict(failures == 0, format!("{failures}/50 matrices off the exhaustive minimum"))
}

fn uas_anchor() -> Outcome {
    let fig = common::fig6();
    let score = uas(&fig.predicted, &fig.sentence).unwrap();
    verdict(score == 0.5, format!("13 tokens, 12 gold arcs, UAS {score} (want 0.5)"))
}

fn corpusgen_checks() -> Outcome {
    let mut rng = seeded(800);
    let sentence = |rng: &mut dyn RngCore, len: usize| -> Vec<String> {
        (0..len).map(|_| format!("w{}", below_usize(rng, 40))).collect()
    };
    let sorted = |v: &[String]| {
        let mut v = v.to_vec();
        v.sort();
        v
    };
    let mut multiset_ok = true;
    for seed in 0..1000u64 {
        let len = 1 + below_usize(&mut rng, 25);
        let s = sentence(&mut rng, len);
        multiset_ok &= sorted(&corpusgen::scramble_sentence(&s, seed)) == sorted(&s);
        let para: Vec<Vec<String>> = (0..1 + below_usize(&mut rng, 4))
            .map(|_| {
                let len = 1 + below_usize(&mut rng, 10);
                sentence(&mut rng, len)
            })
            .collect();
        let out = corpusgen::scramble_paragraph(&para, seed);
        multiset_ok &= sorted(&out.concat()) == sorted(&para.concat())
            && out.iter().map(Vec::len).eq(para.iter().map(Vec::len));
    }

    let cfg = MaskConfig::default();
    let mut selected = 0usize;
    for seed in 0..10_000u64 {
        let s = sentence(&mut rng, 20);
        selected += corpusgen::mask_cloze(&s, seed, &cfg, &[]).unwrap().positions.len();
    }
    let mask_rate = selected as f64 / 200_000.0;

    let mut text = String::new();
    for d in 0..30 {
        for s in 0..5 {
            text.push_str(&format!("doc{d} sentence{s} body\n"));
        }
        text.push_str("\n\n");
    }
    let docs = corpusgen::parse_corpus(&text).unwrap();
    let adjacent = corpusgen::nsp_pairs(&docs, 801)
        .unwrap()
        .take(10_000)
        .filter(|p| p.adjacent)
        .count() as f64
        / 10_000.0;

    let sizes = SplitSizes {
        train: 100,
        dev: 20,
        test: 20,
    };
    let generate = |task| {
        let data = corpusgen::build_examples(&docs, task, sizes, 802, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        data.write(dir.path()).unwrap();
        ["train", "dev", "test"]
            .map(|n| std::fs::read(dir.path().join(format!("{n}.jsonl"))).unwrap())
    };
    let identical = [Task::Lm, Task::LmScrambled, Task::LmScrambledPara]
        .into_iter()
        .all(|t| generate(t) == generate(t));

    verdict(
        multiset_ok && (mask_rate - 0.15).abs() <= 0.01 && (adjacent - 0.5).abs() <= 0.02 && identical,
        format!(
            "multisets {}; mask rate {mask_rate:.4} (0.15 ± 0.01); NSP adjacency {adjacent:.4} (0.5 ± 0.02); regeneration {}",
            if multiset_ok { "preserved" } else { "BROKEN" },
            if identical { "byte-identical" } else { "DIFFERS" }
        ),
    )
}

fn stats_checks() -> Outcome {
    use common::paired_reference as r;
    let t = paired_t(&PairedSample::new(r::BASELINE.to_vec(), r::TREATMENT.to_vec()).unwrap()).unwrap();
    let dt = (t.t - r::T).abs();
    let dp = (t.p - r::P).abs();
    let covered = (0..200u64)
        .filter(|&trial| {
            let v = gaussian_vec(100, 900_000 + trial);
            let (lo, hi) = bootstrap_ci(&v, 0.95, 10_000, trial).unwrap();
            lo <= 0.0 && 0.0 <= hi
        })
        .count();
    verdict(
        dt < 1e-10 && dp < 1e-8 && covered >= 180,
        format!("|Δt| {dt:.1e}, |Δp| {dp:.1e}; bootstrap coverage {covered}/200 (want ≥ 180)"),
    )
}

fn baseline_decoding() -> Outcome {
    let Ok(path) = std::env::var("REPDECODE_BASELINE_MANIFEST") else {
        return Outcome::Skip("REPDECODE_BASELINE_MANIFEST not set".into());
    };
    let manifest = match RunManifest::load(&path) {
        Ok(m) => m,
        Err(e) => return Outcome::Fail(format!("cannot load {path}: {e}")),
    };
    let Some(entry) = manifest.of_kind(EntryKind::SentenceReps).next() else {
        return Outcome::Fail("manifest lists no sentence representations".into());
    };
    let target = read_matrix(manifest.resolve(entry)).unwrap();
    let cfg = RidgeConfig::default();
    let ars: Vec<f64> = manifest
        .brains()
        .map(|b| {
            let brain = read_matrix(manifest.resolve(b)).unwrap();
            nested_cv_decode(&brain, &target, &cfg).unwrap().average_rank
        })
        .collect();
    let chance = (target.rows() as f64 + 1.0) / 2.0;
    let test = paired_t(&PairedSample::new(vec![chance; ars.len()], ars.clone()).unwrap()).unwrap();
    verdict(
        test.t < 0.0 && test.p < ALPHA,
        format!(
            "{} subjects, mean AR {:.1} vs chance {chance}; t {:.2}, p {:.2e}",
            ars.len(),
            ars.iter().sum::<f64>() / ars.len() as f64,
            test.t,
            test.p
        ),
    )
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let checks: [(&str, Check, Option<Duration>); 13] = [
        ("ridge oracle equivalence", ridge_oracle, Some(secs(1))),
        ("perfect-decode sanity", perfect_decode, Some(secs(10))),
        ("chance-level average rank", chance_level, Some(secs(120))),
        ("average rank brute-force equivalence", rank_oracle, None),
        ("PCA exactness and eigenvalue oracle", pca_checks, None),
        ("Spearman oracle and hand case", spearman_checks, None),
        ("probe gradient finite differences", gradient_check, None),
        ("probe synthetic recovery", synthetic_recovery, Some(secs(60))),
        ("MST exactness", mst_exactness, None),
        ("UAS figure anchor", uas_anchor, None),
        ("corpus generation", corpusgen_checks, None),
        ("paired t reference and bootstrap coverage", stats_checks, None),
        ("word-vector baseline decodes above chance", baseline_decoding, None),
    ];
    let mut failed = 0;
    for (name, check, budget) in checks {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Outcome::Fail("panicked".into()));
        let elapsed = start.elapsed();
        match within_budget(outcome, elapsed, budget) {
            Outcome::Pass(d) => println!("PASS  {name}: {d} [{elapsed:.2?}]"),
            Outcome::Skip(d) => println!("SKIP  {name}: {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("FAIL  {name}: {d} [{elapsed:.2?}]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
