use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::config::{
    self, CompareRunConfig, ExplainConfig, GenDataConfig, ReferenceConfig, StabilityRunConfig, VerifyConfig,
    OUT_DIR_ENV,
};
use super::{Common, Failure, Plotting, EXIT_VIOLATION};
use crate::data::Table;
use crate::error::{Error, Result};
use crate::experiments::plot::{Chart, Series};
use crate::experiments::{
    comparison_protocol, generate_synthetic, stability_experiment, write_comparison_csv, write_stability_csv,
    ComparisonRow, SyntheticRegressionSpec,
};
use crate::model::{fit_least_squares, Model, Predictor};
use crate::reference::ReferenceSpec;
use crate::solvers::{solve_exhaustive, solve_greedy, solve_relaxed_mask, Strategy};
use crate::theory::{run_sweep, summarize};

type Outcome = std::result::Result<(), Failure>;
type Column = fn(&ComparisonRow) -> f64;

fn out_dir(common: &Common, configured: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = common
        .out_dir
        .clone()
        .or_else(|| configured.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn features(table: Table) -> DMatrix<f64> {
    table.without_column("y").values
}

struct Inputs {
    model: Model,
    reference: ReferenceSpec,
}

/// Model and reference, falling back to the files written by `gen-data`.
fn inputs(dir: &Path, model: &Option<PathBuf>, reference: &Option<ReferenceConfig>) -> Result<Inputs> {
    let model = Model::load(model.clone().unwrap_or_else(|| dir.join("model.json")))?;
    let reference = match reference {
        Some(r) => r.load()?,
        None => ReferenceConfig::Gaussian {
            path: dir.join("gaussian.json"),
        }
        .load()?,
    };
    Error::check_dim(model.dimension(), reference.dimension())?;
    Ok(Inputs { model, reference })
}

pub(super) fn gen_data(common: &Common) -> Outcome {
    let cfg: GenDataConfig = config::load(common.config.as_deref(), &common.set)?;
    let dir = out_dir(common, &cfg.out_dir)?;
    let data = generate_synthetic(&SyntheticRegressionSpec {
        dim: cfg.dim,
        n_train: cfg.n_train,
        n_eval: cfg.n_eval,
        seed: cfg.seed,
    })?;
    let model = fit_least_squares(&data.train_x, &data.train_y, cfg.fit_intercept)?;

    let mut headers: Vec<String> = (1..=cfg.dim).map(|i| format!("x{i}")).collect();
    headers.push("y".into());
    let table = |x: &DMatrix<f64>, y: &[f64]| Table {
        headers: headers.clone(),
        values: DMatrix::from_fn(
            x.nrows(),
            cfg.dim + 1,
            |r, c| if c < cfg.dim { x[(r, c)] } else { y[r] },
        ),
    };
    table(&data.train_x, &data.train_y).write_csv(dir.join("train.csv"))?;
    table(&data.eval_x, &data.eval_y).write_csv(dir.join("eval.csv"))?;
    data.joint.save(dir.join("gaussian.json"))?;
    Model::Linear(model).save(dir.join("model.json"))?;

    let eig = data.joint.cov().clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    println!(
        "d={} n_train={} n_eval={} cond(cov)={cond:.6e}",
        cfg.dim, cfg.n_train, cfg.n_eval
    );
    println!("wrote train.csv eval.csv gaussian.json model.json to {}", dir.display());
    Ok(())
}

pub(super) fn explain(common: &Common) -> Outcome {
    let cfg: ExplainConfig = config::load(common.config.as_deref(), &common.set)?;
    let dir = out_dir(common, &cfg.out_dir)?;
    let Inputs { model, reference } = inputs(&dir, &cfg.model, &cfg.reference)?;
    let x = match (&cfg.x, &cfg.data) {
        (Some(x), _) => x.clone(),
        (None, data) => {
            let path = data.clone().unwrap_or_else(|| dir.join("eval.csv"));
            let rows = features(Table::read_csv(&path)?);
            if cfg.row >= rows.nrows() {
                return Err(Error::Config(format!(
                    "row {} out of range for {} rows in {}",
                    cfg.row,
                    rows.nrows(),
                    path.display()
                ))
                .into());
            }
            rows.row(cfg.row).iter().copied().collect()
        }
    };
    Error::check_dim(model.dimension(), x.len())?;
    let solver = &cfg.solver;
    let result = match solver.strategy {
        Strategy::Exhaustive => solve_exhaustive(&model, &x, &reference, solver)?,
        Strategy::GreedyForward => solve_greedy(&model, &x, &reference, solver)?,
        Strategy::RelaxedMask => {
            solver.validate(x.len())?;
            let (mask, result) = solve_relaxed_mask(&model, &x, &reference, &cfg.relaxed, solver.alpha)?;
            mask.save_csv(dir.join("mask.csv"))?;
            mask.save_pgm(dir.join("mask.pgm"))?;
            result
        }
    };
    let json = serde_json::to_string_pretty(&result).expect("result serializes");
    write(&dir.join("result.json"), &(json + "\n"))?;
    let r = &result.report;
    println!("subset {}", result.subset);
    println!("objective {}", result.objective);
    println!(
        "delta_suf {} delta_nec {} delta_uni {} alpha {}",
        r.delta_suf, r.delta_nec, r.delta_uni, r.alpha
    );
    Ok(())
}

pub(super) fn verify(common: &Common) -> Outcome {
    let cfg: VerifyConfig = config::load(common.config.as_deref(), &common.set)?;
    let dir = out_dir(common, &cfg.out_dir)?;
    let reports = run_sweep(&cfg.sweep)?;
    let mut lines = String::new();
    for r in &reports {
        lines.push_str(&r.to_json_line());
        lines.push('\n');
    }
    write(&dir.join("verify.jsonl"), &lines)?;
    let s = summarize(&reports);
    println!(
        "checks={} holds={} violated={} uninformative={} vacuous={}",
        reports.len(),
        s.holds,
        s.violated,
        s.uninformative,
        s.vacuous
    );
    if s.violated > 0 {
        return Err(Failure {
            code: EXIT_VIOLATION,
            message: format!(
                "{} violated check(s), see {}",
                s.violated,
                dir.join("verify.jsonl").display()
            ),
        });
    }
    Ok(())
}

fn rows_of(dir: &Path, data: &Option<PathBuf>) -> Result<DMatrix<f64>> {
    Ok(features(Table::read_csv(
        data.clone().unwrap_or_else(|| dir.join("eval.csv")),
    )?))
}

pub(super) fn stability(p: &Plotting) -> Outcome {
    let cfg: StabilityRunConfig = config::load(p.common.config.as_deref(), &p.common.set)?;
    let dir = out_dir(&p.common, &cfg.out_dir)?;
    let Inputs { model, reference } = inputs(&dir, &cfg.model, &cfg.reference)?;
    let rows = rows_of(&dir, &cfg.data)?;
    Error::check_dim(model.dimension(), rows.ncols())?;
    let curves = stability_experiment(&model, &rows, &reference, &cfg.stability)?;
    for c in &curves {
        write_stability_csv(c, &dir)?;
        let cells: Vec<String> = c
            .alphas
            .iter()
            .zip(&c.mean)
            .map(|(a, m)| format!("{a}:{m:.4}"))
            .collect();
        println!("tau={} {}", c.tau, cells.join(" "));
    }
    if p.svg || cfg.svg {
        let chart = Chart {
            title: "Hamming distance to the alpha = 0 solution".into(),
            x_label: "alpha".into(),
            y_label: "normalized Hamming distance".into(),
            y_range: Some((0.0, 1.0)),
            series: curves
                .iter()
                .map(|c| Series {
                    name: format!("tau = {}", c.tau),
                    points: c.alphas.iter().copied().zip(c.mean.iter().copied()).collect(),
                })
                .collect(),
        };
        write(&dir.join("stability.svg"), &chart.render())?;
    }
    Ok(())
}

fn comparison_chart(rows: &[ComparisonRow], label: &str, pick: Column) -> Chart {
    let mut series: Vec<Series> = Vec::new();
    for r in rows {
        if series.last().is_none_or(|s| s.name != r.method) {
            series.push(Series {
                name: r.method.clone(),
                points: vec![],
            });
        }
        series.last_mut().expect("pushed").points.push((r.threshold, pick(r)));
    }
    Chart {
        title: format!("{label} by threshold"),
        x_label: "threshold".into(),
        y_label: label.into(),
        y_range: None,
        series,
    }
}

pub(super) fn compare(p: &Plotting) -> Outcome {
    let cfg: CompareRunConfig = config::load(p.common.config.as_deref(), &p.common.set)?;
    let dir = out_dir(&p.common, &cfg.out_dir)?;
    let Inputs { model, reference } = inputs(&dir, &cfg.model, &cfg.reference)?;
    let mut rows = rows_of(&dir, &cfg.data)?;
    Error::check_dim(model.dimension(), rows.ncols())?;
    if let Some(n) = cfg.rows {
        if n < rows.nrows() {
            rows = rows.rows(0, n).into_owned();
        }
    }
    let table = comparison_protocol(&model, &rows, &reference, &cfg.comparison)?;
    write_comparison_csv(&table, &dir.join("comparison.csv"))?;
    for r in &table {
        println!(
            "{} t={} neglog_suf={:.6} neglog_nec={:.6} neglog_l0={:.6}",
            r.method, r.threshold, r.neglog_suf, r.neglog_nec, r.neglog_l0
        );
    }
    if p.svg || cfg.svg {
        let charts: [(&str, &str, Column); 3] = [
            ("suf", "-log(sufficiency deviation)", |r| r.neglog_suf),
            ("nec", "-log(necessity deviation)", |r| r.neglog_nec),
            ("l0", "-log(subset size)", |r| r.neglog_l0),
        ];
        for (tag, label, pick) in charts {
            write(
                &dir.join(format!("comparison_{tag}.svg")),
                &comparison_chart(&table, label, pick).render(),
            )?;
        }
    }
    Ok(())
}
