//! Reruns of the published Wikipedia comparisons: each task's own retrieval
//! direction, and every task's model evaluated in both directions.

use std::path::Path;

use mdcr::eval::EvalOptions;
use mdcr::gradcheck::{run_gradcheck, GradCheckConfig};
use mdcr::retrieval::Direction;
use mdcr::{
    build_semantic_matrix, default_config, make_synthetic, split, task_symmetry_check, DatasetPreset, EvalReport,
    Hyperparams, PairedDataset64, StopReason, SyntheticSpec, Task, TrainConfig64,
};
use ndarray::Array2;
use serde::Serialize;
use serde_json::json;

use crate::artifacts::{self, Staged};
use crate::commands::{evaluate_model, train_job};
use crate::failure::Failure;
use crate::inputs::{self, LoadedSet, PreparedTraining};
use crate::{Outcome, ReproduceArgs, Table};

pub const DATASET_URL: &str = "http://www.svcl.ucsd.edu/projects/crossmodal/";
pub const PROJECT_URL: &str = "https://sites.google.com/site/yunchaosite/mdcr";

/// Allowed distance from a published mAP.
const TOLERANCE: f64 = 0.02;

/// Published mAP for (trained task, retrieval direction).
fn published(which: Table) -> Vec<(Task, Direction, f64)> {
    match which {
        Table::Table1 => vec![(Task::I2T, Direction::I2T, 0.287), (Task::T2I, Direction::T2I, 0.225)],
        Table::Table2 => vec![
            (Task::I2T, Direction::I2T, 0.287),
            (Task::T2I, Direction::I2T, 0.165),
            (Task::Unified, Direction::I2T, 0.236),
            (Task::I2T, Direction::T2I, 0.146),
            (Task::T2I, Direction::T2I, 0.225),
            (Task::Unified, Direction::T2I, 0.216),
        ],
    }
}

const PUBLISHED_AVERAGE: f64 = 0.256;

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
struct Row {
    model: String,
    direction: String,
    ours: f64,
    #[serde(rename = "paper")]
    published: Option<f64>,
    delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct Check {
    name: String,
    passed: bool,
    detail: String,
}

struct JobResult {
    task: Task,
    files: Staged,
    stop: StopReason,
    monotone: bool,
    evals: Vec<(Direction, EvalReport)>,
}

fn run_job(
    task: Task,
    directions: &[Direction],
    prepared: &PreparedTraining,
    test: &LoadedSet,
    cfg: &TrainConfig64,
) -> Result<JobResult, Failure> {
    let job = train_job(task, prepared, cfg)?;
    let model = job.model.ok_or_else(|| {
        Failure::Divergence(format!(
            "{task} training diverged: {}",
            job.report.diagnostic.clone().unwrap_or_default()
        ))
    })?;
    let data = inputs::prepare_for_model(test, &model)?;
    let mut files = job.files;
    let mut evals = Vec::new();
    for &d in directions {
        let (_, report) = evaluate_model(&model, &data, d, &EvalOptions::default())?;
        files.add_json(format!("eval_{d}.json"), &report);
        files.add(format!("pr_{d}.csv"), artifacts::pr_csv(&report));
        evals.push((d, report));
    }
    Ok(JobResult {
        task,
        files,
        stop: job.report.stop_reason,
        monotone: job.report.is_monotone(),
        evals,
    })
}

fn directions_for(which: Table, task: Task) -> Vec<Direction> {
    published(which)
        .into_iter()
        .filter(|&(t, _, _)| t == task)
        .map(|(_, d, _)| d)
        .collect()
}

fn synthetic_split(seed: u64) -> Result<(LoadedSet, LoadedSet), Failure> {
    let data: PairedDataset64 = make_synthetic(&SyntheticSpec {
        classes: 4,
        per_class: 25,
        image_dim: 12,
        text_dim: 8,
        separation: 10.0,
        noise: 0.2,
        seed,
    })?;
    let (train, test) = split(&data, 0.7, seed)?;
    let loaded = |d: PairedDataset64| {
        let (images, texts, labels) = d.into_parts();
        LoadedSet {
            images,
            texts,
            raw_labels: labels.as_slice().iter().map(|&l| l as i64).collect(),
        }
    };
    Ok((loaded(train), loaded(test)))
}

fn missing_dataset(dir: Option<&Path>) -> Failure {
    let place = dir.map_or("no --data-dir given and MDCR_DATA_DIR is unset".to_string(), |d| {
        format!("no Wikipedia feature files found in {} or {}/wikipedia", d.display(), d.display())
    });
    Failure::Validation(format!(
        "{place}.\nExpected train_images, train_texts, test_images, test_texts (.bin or .txt) and \
         train_labels.txt, test_labels.txt (2173 training and 693 test pairs).\n\
         The Wikipedia dataset and its public features are available from {DATASET_URL} \
         (see also {PROJECT_URL}).\nRun with --synthetic to exercise the pipeline without it."
    ))
}

/// Gradient, symmetry and training-trace checks used in place of the
/// published numbers when no dataset is available.
fn property_checks(jobs: &[JobResult], seed: u64) -> Result<Vec<Check>, Failure> {
    let mut checks = Vec::new();
    let grad = run_gradcheck(&GradCheckConfig {
        seed,
        ..GradCheckConfig::default()
    })?;
    checks.push(Check {
        name: "gradients match finite differences".into(),
        passed: grad.passed,
        detail: format!("max relative error {:e}", grad.max_relative_error),
    });

    let (n, p, q, c) = (20, 7, 5, 3);
    let entry = |i: usize, j: usize, k: usize| (((i * 31 + j * 17 + k * 7 + seed as usize) % 97) as f64 / 48.5) - 1.0;
    let x = Array2::from_shape_fn((n, p), |(i, j)| entry(i, j, 1));
    let t = Array2::from_shape_fn((n, q), |(i, j)| entry(i, j, 2));
    let v = Array2::from_shape_fn((c, p), |(i, j)| entry(i, j, 3));
    let w = Array2::from_shape_fn((c, q), |(i, j)| entry(i, j, 4));
    let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    let s = build_semantic_matrix::<f64>(&labels, c)?;
    let hp = Hyperparams::new(0.3, 0.2, 0.7)?;
    checks.push(Check {
        name: "task symmetry".into(),
        passed: task_symmetry_check(v.view(), w.view(), x.view(), t.view(), s.view(), &hp)?,
        detail: "f_I2T(V,W;X,T) equals f_T2I(W,V;T,X) with swapped ridge weights".into(),
    });

    for job in jobs {
        checks.push(Check {
            name: format!("{} training descends and converges", job.task),
            passed: job.monotone && job.stop == StopReason::Converged,
            detail: format!("monotone {}, stop {}", job.monotone, job.stop),
        });
    }
    Ok(checks)
}

fn ordering_check(direction: Direction, rows: &[Row]) -> Check {
    let score = |task: Task| {
        rows.iter()
            .find(|r| r.model == task.as_str() && r.direction == direction.as_str())
            .map_or(f64::NAN, |r| r.ours)
    };
    let (own, other) = match direction {
        Direction::I2T => (Task::I2T, Task::T2I),
        Direction::T2I => (Task::T2I, Task::I2T),
    };
    let (a, u, b) = (score(own), score(Task::Unified), score(other));
    Check {
        name: format!("{direction} ordering {own} model > unified > {other} model"),
        passed: a > u && u > b,
        detail: format!("{a:.3} / {u:.3} / {b:.3}"),
    }
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.3}"))
}

fn render(which: Table, rows: &[Row], average: Option<&Row>, checks: &[Check]) -> String {
    let title = match which {
        Table::Table1 => "mAP, each task's model in its own direction",
        Table::Table2 => "mAP, every task's model in both directions",
    };
    let mut out = format!("{title}\n{:<10}{:<11}{:>7}{:>8}{:>8}\n", "model", "direction", "ours", "paper", "delta");
    for r in rows.iter().chain(average) {
        out.push_str(&format!(
            "{:<10}{:<11}{:>7.3}{:>8}{:>8}\n",
            r.model,
            r.direction,
            r.ours,
            fmt_cell(r.published),
            r.delta.map_or("n/a".into(), |d| format!("{d:+.3}"))
        ));
    }
    for c in checks {
        out.push_str(&format!("[{}] {} ({})\n", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail));
    }
    out
}

pub fn run(args: &ReproduceArgs) -> Outcome {
    let (train_set, test_set, source) = if args.synthetic {
        let (tr, te) = synthetic_split(args.seed)?;
        (tr, te, json!({ "kind": "synthetic", "seed": args.seed }))
    } else {
        let dir = args.data_dir.as_deref().ok_or_else(|| missing_dataset(None))?;
        let files = inputs::find_dataset(dir).ok_or_else(|| missing_dataset(Some(dir)))?;
        let source = json!({
            "kind": "wikipedia",
            "root": files.root.display().to_string(),
            "train": [files.train.images.display().to_string(), files.train.texts.display().to_string(), files.train.labels.display().to_string()],
            "test": [files.test.images.display().to_string(), files.test.texts.display().to_string(), files.test.labels.display().to_string()],
        });
        (inputs::load_set(&files.train)?, inputs::load_set(&files.test)?, source)
    };
    let prepared = inputs::prepare_training(train_set, args.zscore)?;

    let tasks: Vec<Task> = match args.which {
        Table::Table1 => vec![Task::I2T, Task::T2I],
        Table::Table2 => Task::ALL.to_vec(),
    };
    let configs: Vec<(Task, TrainConfig64)> = tasks
        .iter()
        .map(|&t| (t, default_config(t, DatasetPreset::Wikipedia)))
        .collect();
    let work = |(task, cfg): &(Task, TrainConfig64)| {
        run_job(*task, &directions_for(args.which, *task), &prepared, &test_set, cfg)
    };
    let jobs: Vec<JobResult> = if args.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = configs.iter().map(|c| scope.spawn(move || work(c))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("training thread panicked"))
                .collect::<Result<_, _>>()
        })?
    } else {
        configs.iter().map(work).collect::<Result<_, _>>()?
    };

    let compare = !args.synthetic;
    let rows: Vec<Row> = published(args.which)
        .into_iter()
        .map(|(task, direction, published)| {
            let ours = jobs
                .iter()
                .find(|j| j.task == task)
                .and_then(|j| j.evals.iter().find(|(d, _)| *d == direction))
                .map(|(_, r)| r.map)
                .expect("every published cell was evaluated");
            Row {
                model: task.to_string(),
                direction: direction.to_string(),
                ours,
                published: compare.then_some(published),
                delta: compare.then_some(ours - published),
            }
        })
        .collect();
    let average = (args.which == Table::Table1).then(|| {
        let ours = rows.iter().map(|r| r.ours).sum::<f64>() / rows.len() as f64;
        Row {
            model: "mdcr".into(),
            direction: "average".into(),
            ours,
            published: compare.then_some(PUBLISHED_AVERAGE),
            delta: compare.then_some(ours - PUBLISHED_AVERAGE),
        }
    });

    let checks = if args.synthetic {
        property_checks(&jobs, args.seed)?
    } else {
        match args.which {
            Table::Table1 => rows
                .iter()
                .map(|r| {
                    let delta = r.delta.unwrap_or(f64::NAN);
                    Check {
                        name: format!("{} within {TOLERANCE} of published", r.direction),
                        passed: delta.abs() <= TOLERANCE,
                        detail: format!("delta {delta:+.3}"),
                    }
                })
                .collect(),
            Table::Table2 => vec![ordering_check(Direction::I2T, &rows), ordering_check(Direction::T2I, &rows)],
        }
    };

    let table = render(args.which, &rows, average.as_ref(), &checks);
    let mut files = Staged::default();
    for job in jobs {
        for (name, bytes) in job.files.into_entries() {
            files.add(format!("{}/{name}", job.task), bytes);
        }
    }
    let report = json!({
        "table": match args.which { Table::Table1 => "table1", Table::Table2 => "table2" },
        "rows": rows,
        "average": average,
        "checks": checks,
    });
    files.add_json("reproduce_report.json", &report);
    files.add("table.txt", table.clone().into_bytes());
    let mut outputs = files.names();
    outputs.push("manifest.json".into());
    let manifest = artifacts::manifest(
        "reproduce",
        &args.out,
        json!({
            "preset": DatasetPreset::Wikipedia.as_str(),
            "seed": args.seed,
            "dataset": source,
            "zscore": args.zscore,
            "parallel": args.parallel,
            "hyperparameters": configs.iter().map(|(t, c)| (t.to_string(), c)).collect::<std::collections::BTreeMap<_, _>>(),
            "labelMap": prepared.label_map.raw_values(),
            "outputs": outputs,
        }),
    );
    files.add_json("manifest.json", &manifest);
    files.commit(&args.out)?;
    print!("{table}");

    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("failed: {}", failed.join("; "))))
    }
}
