use std::fs;
use std::path::Path;

use mdcr::retrieval::write_rankings_jsonl;
use mdcr::{EvalReport, Model64, RankedResult64, TrainConfig64, TrainReport64};
use serde::Serialize;
use serde_json::{json, Value};

use crate::failure::Failure;

/// Output files held in memory until every step of a command has succeeded.
#[derive(Default)]
pub struct Staged {
    files: Vec<(String, Vec<u8>)>,
}

impl Staged {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("output values serialize to JSON");
        bytes.push(b'\n');
        self.add(name, bytes);
    }

    pub fn into_entries(self) -> Vec<(String, Vec<u8>)> {
        self.files
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Writes every file into `dir`, creating it (and subdirectories) as needed.
    pub fn commit(self, dir: &Path) -> Result<(), Failure> {
        for (name, bytes) in self.files {
            let path = dir.join(&name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| Failure::validation(parent.display(), e))?;
            }
            fs::write(&path, bytes).map_err(|e| Failure::validation(path.display(), e))?;
        }
        Ok(())
    }
}

pub fn model_bytes(model: &Model64) -> Vec<u8> {
    let mut bytes = Vec::new();
    model.write_to(&mut bytes).expect("writing to memory cannot fail");
    bytes
}

pub fn trace_csv(report: &TrainReport64) -> Vec<u8> {
    let mut out = String::from("outer,block,inner,objective,step,accepted\n");
    for e in &report.trace {
        out.push_str(&format!(
            "{},{:?},{},{:?},{:?},{}\n",
            e.outer, e.block, e.inner, e.objective, e.step, e.accepted
        ));
    }
    out.into_bytes()
}

pub fn train_report_json(report: &TrainReport64, cfg: &TrainConfig64) -> Value {
    let accepted = report.accepted().count();
    json!({
        "task": report.final_pair.task,
        "stopReason": report.stop_reason.to_string(),
        "outerIterations": report.outer_iters,
        "initialObjective": report.initial_objective,
        "finalObjective": report.final_objective,
        "acceptedSteps": accepted,
        "rejectedSteps": report.trace.len() - accepted,
        "monotone": report.is_monotone(),
        "diagnostic": report.diagnostic,
        "config": cfg,
        "objectiveTrace": report.trace,
    })
}

pub fn rankings_jsonl(results: &[RankedResult64]) -> Vec<u8> {
    let mut bytes = Vec::new();
    write_rankings_jsonl(&mut bytes, results).expect("writing to memory cannot fail");
    bytes
}

pub fn pr_csv(report: &EvalReport) -> Vec<u8> {
    let mut bytes = Vec::new();
    report.write_pr_csv(&mut bytes).expect("writing to memory cannot fail");
    bytes
}

/// Fields shared by every manifest.
pub fn manifest(command: &str, out: &Path, extra: Value) -> Value {
    let mut m = json!({
        "tool": "mdcr",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "argv": crate::argv(),
        "outDir": out.display().to_string(),
    });
    if let (Value::Object(base), Value::Object(more)) = (&mut m, extra) {
        base.extend(more);
    }
    m
}
