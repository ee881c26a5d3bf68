use mdcr::data::{format_text, write_binary};
use mdcr::eval::{evaluate, EvalOptions};
use mdcr::gradcheck::{run_gradcheck, GradCheckConfig};
use mdcr::retrieval::Direction;
use mdcr::{
    cross_retrieve, default_config, make_synthetic, project, rank, split, train as fit, EvalReport,
    FeatureMatrix64, Hyperparams, Init, Model64, Modality, PairedDataset64, RankedResult64, StepPolicy,
    StopReason, SyntheticSpec, Task, TrainConfig64, TrainReport64,
};
use serde_json::json;

use crate::artifacts::{self, Staged};
use crate::failure::Failure;
use crate::inputs::{self, PreparedTraining};
use crate::{EvalArgs, FileFormat, GradcheckArgs, Outcome, QueryArgs, SynthArgs, TrainArgs};

pub const MODEL_FILE: &str = "model.mdcr";

/// Preset configuration with command-line overrides applied. Every override
/// that changes a preset value produces a warning for the manifest.
pub fn resolve_config(args: &TrainArgs) -> (TrainConfig64, Vec<String>) {
    let mut cfg: TrainConfig64 = default_config(args.task, args.preset);
    let mut warnings = Vec::new();
    let mut set = |name: &str, slot: &mut f64, value: Option<f64>| {
        if let Some(v) = value {
            if v != *slot {
                warnings.push(format!("--{name} {v:?} overrides preset {} value {:?}", args.preset, *slot));
            }
            *slot = v;
        }
    };
    set("lambda", &mut cfg.hp.lambda, args.lambda);
    set("eta1", &mut cfg.hp.eta1, args.eta1);
    set("eta2", &mut cfg.hp.eta2, args.eta2);
    set("mu", &mut cfg.mu, args.mu);
    set("epsilon", &mut cfg.epsilon, args.epsilon);
    if let Some(n) = args.max_outer {
        cfg.max_outer_iters = n;
    }
    if let Some(n) = args.max_inner {
        cfg.max_inner_iters = n;
    }
    if args.fixed_step {
        cfg.step_policy = StepPolicy::Fixed;
    }
    if let Some(scale) = args.init_scale {
        cfg.init = Init::SeededGaussian { scale, seed: args.seed };
    }
    (cfg, warnings)
}

/// Output of one training job: the model (absent on divergence) and its files.
pub struct TrainedJob {
    pub report: TrainReport64,
    pub model: Option<Model64>,
    pub files: Staged,
}

pub fn train_job(task: Task, prepared: &PreparedTraining, cfg: &TrainConfig64) -> Result<TrainedJob, Failure> {
    let report = fit(&prepared.data, task, cfg)?;
    let mut files = Staged::default();
    files.add("trace.csv", artifacts::trace_csv(&report));
    files.add_json("train_report.json", &artifacts::train_report_json(&report, cfg));
    let model = (report.stop_reason != StopReason::StepRejected).then(|| Model64 {
        pair: report.final_pair.clone(),
        hp: cfg.hp,
        mu: cfg.mu,
        epsilon: cfg.epsilon,
        image_stats: prepared.image_stats.clone(),
        text_stats: prepared.text_stats.clone(),
        label_values: (!prepared.label_map.is_identity()).then(|| prepared.label_map.raw_values().to_vec()),
    });
    if let Some(m) = &model {
        files.add(MODEL_FILE, artifacts::model_bytes(m));
    }
    Ok(TrainedJob { report, model, files })
}

pub fn train(args: &TrainArgs) -> Outcome {
    let (cfg, warnings) = resolve_config(args);
    cfg.validate()?;
    let set = inputs::load_set(&args.inputs)?;
    let prepared = inputs::prepare_training(set, args.zscore)?;
    let TrainedJob { report, mut files, .. } = train_job(args.task, &prepared, &cfg)?;

    let mut outputs = files.names();
    outputs.push("manifest.json".into());
    let manifest = artifacts::manifest(
        "train",
        &args.out,
        json!({
            "task": args.task,
            "preset": args.preset.as_str(),
            "seed": args.seed,
            "inputs": {
                "images": args.inputs.images.display().to_string(),
                "texts": args.inputs.texts.display().to_string(),
                "labels": args.inputs.labels.display().to_string(),
            },
            "zscore": args.zscore,
            "hyperparameters": cfg,
            "overrideWarnings": warnings,
            "labelMap": prepared.label_map.raw_values(),
            "outputs": outputs,
        }),
    );
    files.add_json("manifest.json", &manifest);
    files.commit(&args.out)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{}: {} after {} outer iterations, objective {:.6} -> {:.6}",
        args.task, report.stop_reason, report.outer_iters, report.initial_objective, report.final_objective
    );
    if report.stop_reason == StopReason::StepRejected {
        return Err(Failure::Divergence(
            report
                .diagnostic
                .unwrap_or_else(|| "training stopped on a rejected step".into()),
        ));
    }
    Ok(())
}

/// Single-task models only serve their own direction unless `allow` is set.
pub fn check_direction(task: Task, direction: Direction, allow: bool) -> Result<(), Failure> {
    let native = match task {
        Task::Unified => return Ok(()),
        Task::I2T => Direction::I2T,
        Task::T2I => Direction::T2I,
    };
    if native == direction || allow {
        Ok(())
    } else {
        Err(Failure::Validation(format!(
            "a {task} model does not serve {direction} retrieval; pass --allow-cross-task to evaluate it anyway"
        )))
    }
}

fn query_and_gallery(data: &PairedDataset64, direction: Direction) -> (&FeatureMatrix64, &FeatureMatrix64) {
    match direction {
        Direction::I2T => (data.images(), data.texts()),
        Direction::T2I => (data.texts(), data.images()),
    }
}

/// Ranks every instance of `data` against the other modality and scores it.
pub fn evaluate_model(
    model: &Model64,
    data: &PairedDataset64,
    direction: Direction,
    opts: &EvalOptions,
) -> Result<(Vec<RankedResult64>, EvalReport), Failure> {
    let (q, g) = query_and_gallery(data, direction);
    let results = cross_retrieve(&model.pair, (q, data.labels()), (g, data.labels()), direction)?;
    let report = evaluate(&results, opts)?;
    Ok((results, report))
}

pub fn eval(args: &EvalArgs) -> Outcome {
    let model = inputs::load_model(&args.model)?;
    check_direction(model.pair.task, args.direction, args.allow_cross_task)?;
    let set = inputs::load_set(&args.inputs)?;
    let data = inputs::prepare_for_model(&set, &model)?;
    let opts = EvalOptions {
        pr_points: args.pr_points,
        top_k: args.top_k,
    };
    let (results, report) = evaluate_model(&model, &data, args.direction, &opts)?;

    let mut files = Staged::default();
    files.add_json("eval_report.json", &report);
    files.add("pr.csv", artifacts::pr_csv(&report));
    if args.rankings {
        files.add("rankings.jsonl", artifacts::rankings_jsonl(&results));
    }
    let mut outputs = files.names();
    outputs.push("manifest.json".into());
    let manifest = artifacts::manifest(
        "eval",
        &args.out,
        json!({
            "task": model.pair.task,
            "direction": args.direction,
            "crossTask": args.allow_cross_task,
            "inputs": {
                "model": args.model.display().to_string(),
                "images": args.inputs.images.display().to_string(),
                "texts": args.inputs.texts.display().to_string(),
                "labels": args.inputs.labels.display().to_string(),
            },
            "topK": args.top_k,
            "prPoints": args.pr_points,
            "outputs": outputs,
        }),
    );
    files.add_json("manifest.json", &manifest);
    files.commit(&args.out)?;
    println!("{} model, {} retrieval: mAP {:.3}", model.pair.task, args.direction, report.map);
    Ok(())
}

pub fn query(args: &QueryArgs) -> Outcome {
    let model = inputs::load_model(&args.model)?;
    check_direction(model.pair.task, args.direction, args.allow_cross_task)?;
    let set = inputs::load_set(&args.inputs)?;
    let data = inputs::prepare_for_model(&set, &model)?;
    let (q, g) = query_and_gallery(&data, args.direction);
    if args.index >= q.rows() {
        return Err(Failure::Validation(format!(
            "query index {} is out of range for {} instances",
            args.index,
            q.rows()
        )));
    }
    let (qm, gm, qs, gs) = match args.direction {
        Direction::I2T => (&model.pair.v, &model.pair.w, Modality::Image, Modality::Text),
        Direction::T2I => (&model.pair.w, &model.pair.v, Modality::Text, Modality::Image),
    };
    let queries = project(q, qm.view(), qs)?;
    let gallery = project(g, gm.view(), gs)?.with_labels(data.labels().clone())?;
    let label = data.labels().as_slice()[args.index];
    let r = rank(queries.points.row(args.index), args.index, label, &gallery)?;
    let top: Vec<_> = (0..args.top.min(r.ordering.len()))
        .map(|k| {
            json!({
                "rank": k + 1,
                "galleryIndex": r.ordering[k],
                "distance": r.distances[k],
                "relevant": r.relevance[k] == 1,
            })
        })
        .collect();
    let out = json!({
        "queryIndex": args.index,
        "queryLabel": label,
        "direction": args.direction,
        "averagePrecision": mdcr::average_precision(&r.relevance),
        "results": top,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("JSON output"));
    Ok(())
}

pub fn gradcheck(args: &GradcheckArgs) -> Outcome {
    if args.n == 0 || args.image_dim == 0 || args.text_dim == 0 || args.classes == 0 {
        return Err(Failure::Validation("gradcheck dimensions must all be >= 1".into()));
    }
    if !(args.step > 0.0 && args.tolerance >= 0.0) {
        return Err(Failure::Validation("step must be > 0 and tolerance >= 0".into()));
    }
    let cfg = GradCheckConfig {
        n: args.n,
        image_dim: args.image_dim,
        text_dim: args.text_dim,
        classes: args.classes,
        points: args.points,
        seed: args.seed,
        step: args.step,
        tolerance: args.tolerance,
        hp: Hyperparams::new(args.lambda, args.eta1, args.eta2)?,
    };
    let report = run_gradcheck(&cfg)?;
    if let Some(path) = &args.out {
        let mut files = Staged::default();
        let name = path.file_name().map_or("gradcheck.json".into(), |n| n.to_string_lossy().into_owned());
        files.add_json(name, &report);
        files.commit(path.parent().unwrap_or(std::path::Path::new(".")))?;
    }
    println!("{}", serde_json::to_string_pretty(&report).expect("JSON output"));
    if report.passed {
        Ok(())
    } else {
        let w = report.worst.expect("a failed check has a worst coordinate");
        Err(Failure::Check(format!(
            "max relative error {:e} exceeds {:e} at {} {:?}[{}, {}] (point {}): analytic {:?}, numeric {:?}",
            report.max_relative_error, report.tolerance, w.task, w.block, w.row, w.col, w.point, w.analytic, w.numeric
        )))
    }
}

fn matrix_bytes(m: &FeatureMatrix64, format: FileFormat) -> Vec<u8> {
    match format {
        FileFormat::Text => format_text(m.view()).into_bytes(),
        FileFormat::Binary => {
            let mut bytes = Vec::new();
            write_binary(&mut bytes, m.view()).expect("writing to memory cannot fail");
            bytes
        }
    }
}

fn label_bytes(labels: &[usize]) -> Vec<u8> {
    labels.iter().map(|l| format!("{l}\n")).collect::<String>().into_bytes()
}

pub fn synth(args: &SynthArgs) -> Outcome {
    let spec = SyntheticSpec {
        classes: args.classes,
        per_class: args.per_class,
        image_dim: args.image_dim,
        text_dim: args.text_dim,
        separation: args.separation,
        noise: args.noise,
        seed: args.seed,
    };
    let data: PairedDataset64 = make_synthetic(&spec)?;
    let (train_set, test_set) = split(&data, args.train_fraction, args.seed)?;
    let ext = match args.format {
        FileFormat::Text => "txt",
        FileFormat::Binary => "bin",
    };
    let mut files = Staged::default();
    for (prefix, part) in [("train", &train_set), ("test", &test_set)] {
        files.add(format!("{prefix}_images.{ext}"), matrix_bytes(part.images(), args.format));
        files.add(format!("{prefix}_texts.{ext}"), matrix_bytes(part.texts(), args.format));
        files.add(format!("{prefix}_labels.txt"), label_bytes(part.labels().as_slice()));
    }
    let mut outputs = files.names();
    outputs.push("manifest.json".into());
    let manifest = artifacts::manifest(
        "synth",
        &args.out,
        json!({
            "seed": args.seed,
            "classes": args.classes,
            "perClass": args.per_class,
            "imageDim": args.image_dim,
            "textDim": args.text_dim,
            "separation": args.separation,
            "noise": args.noise,
            "trainFraction": args.train_fraction,
            "trainSize": train_set.len(),
            "testSize": test_set.len(),
            "outputs": outputs,
        }),
    );
    files.add_json("manifest.json", &manifest);
    files.commit(&args.out)?;
    println!(
        "wrote {} training and {} test pairs to {}",
        train_set.len(),
        test_set.len(),
        args.out.display()
    );
    Ok(())
}
