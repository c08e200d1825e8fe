//! Acceptance criteria, one PASS/FAIL line each.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sufnec::experiments::{normalize_scores, planted_task, random_mask, AttributionScores, PlantedSpec, LOG_FLOOR};
use sufnec::measures::{sufficiency, Cached, LinearGaussian, MonteCarlo};
use sufnec::solvers::{exhaustive, greedy, relaxed, solve_relaxed_mask, RelaxedConfig, SolverConfig};
use sufnec::theory::TwoPlayerGame;
use sufnec::{GaussianJoint, LinearModel, Metric, ReferenceSpec, Subset};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

struct Instance {
    joint: GaussianJoint,
    model: LinearModel,
    x: Vec<f64>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `μ ~ N(0, I)`, `Σ = AAᵀ + 0.05 I`, weights `~ N(0, 1)`, `x ~ N(μ, Σ)`.
fn instance(dim: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = DVector::from_fn(dim, |_, _| normal(&mut rng));
    let a = DMatrix::from_fn(dim, dim, |_, _| normal(&mut rng));
    let cov = &a * a.transpose() + DMatrix::identity(dim, dim) * 0.05;
    let weights: Vec<f64> = (0..dim).map(|_| normal(&mut rng)).collect();
    let intercept = normal(&mut rng);
    let z = DVector::from_fn(dim, |_, _| normal(&mut rng));
    let x = &mean + cov.clone().cholesky().unwrap().l() * z;
    Instance {
        joint: GaussianJoint::new(mean, cov).unwrap(),
        model: LinearModel::new(weights, intercept).unwrap(),
        x: x.iter().copied().collect(),
    }
}

/// `E[f(X) | X_S = x_S]` by solving the retained covariance block directly.
fn oracle(inst: &Instance, retained: &[usize]) -> f64 {
    let d = inst.x.len();
    let w = &inst.model.weights;
    let mu = inst.joint.mean();
    let cov = inst.joint.cov();
    let free: Vec<usize> = (0..d).filter(|i| !retained.contains(i)).collect();
    let mut filled: Vec<f64> = (0..d).map(|i| mu[i]).collect();
    for &i in retained {
        filled[i] = inst.x[i];
    }
    if !retained.is_empty() && !free.is_empty() {
        let s = retained.len();
        let block = DMatrix::from_fn(s, s, |r, c| cov[(retained[r], retained[c])]);
        let resid = DVector::from_fn(s, |r, _| inst.x[retained[r]] - mu[retained[r]]);
        let coef = block.lu().solve(&resid).unwrap();
        for &j in &free {
            filled[j] += (0..s).map(|r| cov[(j, retained[r])] * coef[r]).sum::<f64>();
        }
    }
    inst.model.intercept + w.iter().zip(&filled).map(|(a, b)| a * b).sum::<f64>()
}

fn sufnec(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sufnec"))
        .args(args)
        .env_remove("SUFNEC_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Result<String, String> {
    let out = sufnec(args);
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!(
            "`sufnec {}` exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn read_csv(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}

fn theory_suite() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let out = sufnec(&["verify", "--out-dir", dir.path().to_str().unwrap()]);
    let elapsed = started.elapsed();
    let text = std::fs::read_to_string(dir.path().join("verify.jsonl")).map_err(|e| e.to_string())?;
    let reports: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let mut holds = std::collections::BTreeMap::<String, usize>::new();
    let mut violated = 0;
    for r in &reports {
        match r["status"].as_str() {
            Some("holds") => *holds.entry(r["check"].as_str().unwrap().to_string()).or_default() += 1,
            Some("violated") => violated += 1,
            _ => {}
        }
    }
    let summary = format!(
        "{} reports, {violated} violated, holds per check {holds:?}, {:.1}s",
        reports.len(),
        elapsed.as_secs_f64()
    );
    let every_check_exercised = ["lemma1", "lemma2", "theorem1", "theorem2", "corollary1"]
        .iter()
        .all(|c| holds.get(*c).copied().unwrap_or(0) > 0);
    if out.status.code() == Some(0)
        && violated == 0
        && reports.len() == 1000
        && every_check_exercised
        && elapsed < Duration::from_secs(900)
    {
        Ok(summary)
    } else {
        Err(format!("exit {:?}; {summary}", out.status.code()))
    }
}

fn shapley_efficiency() -> Verdict {
    let mut worst = 0f64;
    let mut worst_oracle = 0f64;
    let mut games = 0;
    for seed in 0..50u64 {
        let dim = 2 + (seed % 7) as usize;
        let inst = instance(dim, 0x5EED_0000 + seed);
        let eval = LinearGaussian::new(&inst.model, &inst.joint, &inst.x).unwrap();
        let fx = oracle(&inst, &(0..dim).collect::<Vec<_>>());
        let f0 = oracle(&inst, &[]);
        let grand = (fx - f0).abs();
        for bits in 0..(1u64 << dim) {
            let s = Subset::from_bits(dim, bits);
            let game = TwoPlayerGame::new(&eval, &s, Metric::AbsoluteDifference).unwrap();
            worst = worst.max((game.shapley_first() + game.shapley_second() - grand).abs());
            let v = |idx: &[usize]| -(fx - oracle(&inst, idx)).abs();
            let comp = s.complement();
            let phi = 0.5 * (0.0 - v(comp.indices())) + 0.5 * (v(s.indices()) - v(&[]));
            worst_oracle = worst_oracle.max((phi - game.shapley_first()).abs() / (1.0 + phi.abs()));
            games += 1;
        }
    }
    let summary = format!(
        "{games} subsets, max efficiency error {worst:.2e}, max deviation from oracle Shapley {worst_oracle:.2e}"
    );
    if worst <= 1e-12 && worst_oracle <= 1e-9 {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn estimator_consistency() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0F5);
    let mut within = 0;
    for trial in 0..1000u64 {
        let dim = rng.random_range(2..=8usize);
        let inst = instance(dim, 0xE571_0000 + trial);
        let reference: ReferenceSpec = inst.joint.clone().into();
        let bits = rng.random_range(0..(1u64 << dim) - 1);
        let s = Subset::from_bits(dim, bits);
        let mc = MonteCarlo::new(&inst.model, &reference, &inst.x, 200, trial).unwrap();
        let est = mc.estimate(&s, trial).unwrap();
        within += usize::from((est.value - oracle(&inst, s.indices())).abs() <= 4.0 * est.stderr);
    }
    let mut ratios = Vec::new();
    for seed in 0..20u64 {
        let inst = instance(6, 0xAA00 + seed);
        let reference: ReferenceSpec = inst.joint.clone().into();
        let s = Subset::new(6, vec![0, 2]).unwrap();
        let se = |k: usize| {
            MonteCarlo::new(&inst.model, &reference, &inst.x, k, seed)
                .unwrap()
                .estimate(&s, seed)
                .unwrap()
                .stderr
        };
        let (a, b, c) = (se(1000), se(4000), se(16000));
        ratios.push(a / b);
        ratios.push(b / c);
    }
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    let summary = format!("{within}/1000 within 4 stderr; stderr ratio per 4x samples in [{lo:.3}, {hi:.3}]");
    if within >= 990 && lo >= 1.6 && hi <= 2.4 {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn solver_ordering() -> Verdict {
    let mut checked = 0;
    let mut failures = Vec::new();
    for seed in 0..50u64 {
        let inst = instance(10, 0x0D0E_0000 + seed);
        let reference: ReferenceSpec = inst.joint.clone().into();
        let eval = Cached::new(MonteCarlo::new(&inst.model, &reference, &inst.x, 10, seed).unwrap());
        for tau in [3, 6, 9] {
            for alpha in [0.0, 0.5, 1.0] {
                let cfg = SolverConfig {
                    tau,
                    alpha,
                    seed,
                    ..SolverConfig::default()
                };
                let ex = exhaustive(&eval, &cfg).unwrap();
                let gr = greedy(&eval, &cfg).unwrap();
                let rc = RelaxedConfig {
                    lambda_tv: 0.0,
                    max_size: Some(tau),
                    seed,
                    ..RelaxedConfig::default()
                };
                let (_, rx) = relaxed(&eval, &inst.model, &inst.x, &reference, &rc, alpha).unwrap();
                let slack = 4.0 * rx.report.stderr_uni;
                checked += 1;
                if !(ex.objective <= gr.objective && gr.objective <= rx.objective + slack) {
                    failures.push(format!(
                        "seed {seed} tau {tau} alpha {alpha}: exhaustive {:.4} greedy {:.4} relaxed {:.4} (+{slack:.4})",
                        ex.objective, gr.objective, rx.objective
                    ));
                }
            }
        }
    }
    let summary = format!("{} of {checked} cases ordered", checked - failures.len());
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!(
            "{summary}; first failures: {}",
            failures.iter().take(5).cloned().collect::<Vec<_>>().join("; ")
        ))
    }
}

fn stability_reproduction() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let started = Instant::now();
    run_ok(&["gen-data", "--out-dir", d])?;
    run_ok(&["stability", "--out-dir", d])?;
    let elapsed = started.elapsed();
    let mut notes = Vec::new();
    let mut ok = elapsed < Duration::from_secs(600);
    for tau in [3, 6, 9] {
        let rows = read_csv(&dir.path().join(format!("stability_{tau}.csv")))?;
        let values: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|v| v.parse().unwrap()).collect())
            .collect();
        ok &= values.len() == 11;
        ok &= values[0] == [0.0, 0.0, 0.0, 0.0];
        ok &= values.iter().all(|r| r[1..].iter().all(|v| (0.0..=1.0).contains(v)));
        let last = values.last().unwrap()[1];
        if tau == 3 {
            ok &= last > 0.0 && last >= values[0][1];
        }
        notes.push(format!("tau={tau} curve(1)={last:.3}"));
    }
    let summary = format!("{}, {:.1}s", notes.join(" "), elapsed.as_secs_f64());
    if ok {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn relaxed_efficacy() -> Verdict {
    let mut wins = 0;
    let mut empty = 0;
    for seed in 0..20u64 {
        let task = planted_task(&PlantedSpec {
            seed,
            ..Default::default()
        })
        .unwrap();
        let cfg = RelaxedConfig {
            grid: Some(task.grid),
            seed,
            ..Default::default()
        };
        let (_, r) = solve_relaxed_mask(&task.model, &task.x, &task.reference, &cfg, 1.0).unwrap();
        let eval = MonteCarlo::new(&task.model, &task.reference, &task.x, cfg.samples, seed).unwrap();
        let control = random_mask(task.x.len(), r.subset.len(), seed + 1000).unwrap();
        let control_suf = sufficiency(&eval, &control, Metric::default()).unwrap().0;
        wins += usize::from(r.report.delta_suf <= control_suf);

        let heavy = RelaxedConfig {
            lambda_l1: cfg.lambda_l1 * 1000.0,
            ..cfg.clone()
        };
        let (_, h) = solve_relaxed_mask(&task.model, &task.x, &task.reference, &heavy, 1.0).unwrap();
        empty += usize::from(h.subset.is_empty());
    }
    let summary = format!(
        "relaxed mask at least as sufficient as random in {wins}/20 seeds; empty under 1000x sparsity in {empty}/20"
    );
    if wins >= 19 && empty == 20 {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn protocol_fidelity() -> Verdict {
    let mut problems = Vec::new();
    let hundred: Vec<f64> = (0..100).map(|i| ((i * 37) % 100 + 1) as f64).collect();
    let n = normalize_scores(&AttributionScores::new("a", hundred.clone()).unwrap()).unwrap();
    let ones = n.scores.iter().filter(|&&v| v == 1.0).count();
    if ones != 1
        || hundred
            .iter()
            .zip(&n.scores)
            .any(|(s, v)| *v != if *s == 100.0 { 1.0 } else { s / 100.0 })
    {
        problems.push("unique maximum");
    }
    let n = normalize_scores(&AttributionScores::new("b", vec![0.37; 12]).unwrap()).unwrap();
    if n.scores.iter().any(|&v| v != 1.0) {
        problems.push("constant scores");
    }
    let ramp: Vec<f64> = (0..=100).map(f64::from).collect();
    let n = normalize_scores(&AttributionScores::new("c", ramp).unwrap()).unwrap();
    if (0..=100).any(|k| n.scores[k] != k as f64 / 100.0) {
        problems.push("ramp");
    }

    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    run_ok(&[
        "gen-data",
        "--out-dir",
        d,
        "--set",
        "n_train=1000",
        "--set",
        "n_eval=20",
    ])?;
    run_ok(&["compare", "--out-dir", d, "--set", "comparison.methods=[\"full-mask\"]"])?;
    let floor = -LOG_FLOOR.ln();
    let rows = read_csv(&dir.path().join("comparison.csv"))?;
    let at_floor = |v: &String| (v.parse::<f64>().unwrap() - floor).abs() <= 1e-12 * floor;
    if rows.len() != 5 || rows.iter().any(|r| !at_floor(&r[2]) || !at_floor(&r[3])) {
        problems.push("full-mask rows");
    }
    if problems.is_empty() {
        Ok(format!(
            "three normalization examples exact; full-mask -log deviation {floor:.6} at all 5 thresholds"
        ))
    } else {
        Err(format!("mismatch: {}", problems.join(", ")))
    }
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Verdict {
    let runs: [&[&str]; 7] = [
        &["gen-data", "--set", "n_train=2000", "--set", "n_eval=12"],
        &["explain", "--set", "solver.strategy=exhaustive", "--set", "row=1"],
        &["explain", "--set", "solver.strategy=greedy-forward", "--set", "row=2"],
        &[
            "explain",
            "--set",
            "solver.strategy=relaxed-mask",
            "--set",
            "relaxed.grid=[2,5]",
            "--set",
            "relaxed.iterations=200",
        ],
        &["verify", "--set", "sweep.instances=40"],
        &["stability", "--svg"],
        &[
            "compare",
            "--svg",
            "--set",
            "comparison.methods=[\"occlusion\",\"grad-input\",\"full-mask\",\"random\",\"relaxed\"]",
            "--set",
            "comparison.relaxed.lambda_tv=0",
            "--set",
            "rows=4",
        ],
    ];
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut compared = 0;
    for args in runs {
        let mut outputs = Vec::new();
        for (i, dir) in dirs.iter().enumerate() {
            let workers = if i == 0 { "1" } else { "4" };
            let mut full = vec!["--workers", workers];
            full.extend_from_slice(args);
            full.extend_from_slice(&["--out-dir", dir.path().to_str().unwrap()]);
            outputs.push(run_ok(&full)?.replace(dir.path().to_str().unwrap(), "<dir>"));
        }
        if outputs[0] != outputs[1] {
            return Err(format!("stdout of `{}` differs", args.join(" ")));
        }
        let (a, b) = (snapshot(dirs[0].path()), snapshot(dirs[1].path()));
        if a != b {
            return Err(format!("output files of `{}` differ", args.join(" ")));
        }
        compared = a.len();
    }
    Ok(format!(
        "7 runs repeated with 1 and 4 workers; stdout and {compared} output files byte-identical"
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("theory suite", theory_suite),
        ("shapley efficiency", shapley_efficiency),
        ("estimator consistency", estimator_consistency),
        ("solver ordering", solver_ordering),
        ("stability reproduction", stability_reproduction),
        ("relaxed mask efficacy", relaxed_efficacy),
        ("protocol fidelity", protocol_fidelity),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let verdict = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match verdict {
            Ok(msg) => println!("PASS criterion {} ({name}): {msg} [{secs:.1}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {msg} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
