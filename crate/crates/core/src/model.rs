//! Trained model files.
//!
//! Layout: the line `MDCRMODEL1`, then `key=value` lines (task, dimensions,
//! hyperparameters, optional normalization statistics as comma-separated
//! lists), the line `end`, then `V` and `W` in the binary matrix format.
//! Numbers are written with their shortest round-trip representation, so
//! identical models always serialize to identical bytes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array1;

use crate::data::{read_binary, write_binary, ColumnStats};
use crate::error::{MdcrError, Result};
use crate::objective::{Hyperparams, ProjectionPair, Task};
use crate::scalar::Scalar;

const MODEL_MAGIC: &str = "MDCRMODEL1";

#[derive(Debug, Clone, PartialEq)]
pub struct Model<F> {
    pub pair: ProjectionPair<F>,
    pub hp: Hyperparams<F>,
    pub mu: F,
    pub epsilon: F,
    /// Training-set statistics applied to image features before projection.
    pub image_stats: Option<ColumnStats<F>>,
    pub text_stats: Option<ColumnStats<F>>,
    /// Raw label value of each class index, when labels were remapped.
    pub label_values: Option<Vec<i64>>,
}

fn fmt_num<F: Scalar>(v: F) -> String {
    format!("{:?}", v.as_f64())
}

fn fmt_list<F: Scalar>(values: &Array1<F>) -> String {
    values.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(",")
}

impl<F: Scalar> Model<F> {
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        let mut header = vec![
            ("task", self.pair.task.to_string()),
            ("classes", self.pair.classes().to_string()),
            ("image_dim", self.pair.image_dim().to_string()),
            ("text_dim", self.pair.text_dim().to_string()),
            ("lambda", fmt_num(self.hp.lambda)),
            ("eta1", fmt_num(self.hp.eta1)),
            ("eta2", fmt_num(self.hp.eta2)),
            ("mu", fmt_num(self.mu)),
            ("epsilon", fmt_num(self.epsilon)),
        ];
        for (prefix, stats) in [("image", &self.image_stats), ("text", &self.text_stats)] {
            if let Some(s) = stats {
                header.push(if prefix == "image" { ("image_mean", fmt_list(&s.mean)) } else { ("text_mean", fmt_list(&s.mean)) });
                header.push(if prefix == "image" { ("image_std", fmt_list(&s.std)) } else { ("text_std", fmt_list(&s.std)) });
            }
        }
        if let Some(values) = &self.label_values {
            let joined = values.iter().map(i64::to_string).collect::<Vec<_>>().join(",");
            header.push(("label_values", joined));
        }
        writeln!(out, "{MODEL_MAGIC}")?;
        for (k, v) in header {
            writeln!(out, "{k}={v}")?;
        }
        writeln!(out, "end")?;
        write_binary(out, self.pair.v.view())?;
        write_binary(out, self.pair.w.view())?;
        Ok(())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut line = String::new();
        reader.read_line(&mut line)?;
        if line.trim_end() != MODEL_MAGIC {
            return Err(MdcrError::Format(format!("not a model file: first line {:?}", line.trim_end())));
        }
        let mut fields = BTreeMap::new();
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                return Err(MdcrError::Format("model header is missing its \"end\" line".into()));
            }
            let entry = line.trim_end_matches(['\n', '\r']);
            if entry == "end" {
                break;
            }
            let (k, v) = entry
                .split_once('=')
                .ok_or_else(|| MdcrError::Format(format!("model header line {entry:?} is not key=value")))?;
            fields.insert(k.to_string(), v.to_string());
        }

        let get = |k: &str| {
            fields
                .get(k)
                .ok_or_else(|| MdcrError::Format(format!("model header lacks {k:?}")))
        };
        let num = |k: &str| -> Result<F> {
            let raw = get(k)?;
            raw.parse::<f64>()
                .map(F::from_f64_lossy)
                .map_err(|_| MdcrError::Format(format!("model header {k}={raw:?} is not a number")))
        };
        let dim = |k: &str| -> Result<usize> {
            let raw = get(k)?;
            raw.parse()
                .map_err(|_| MdcrError::Format(format!("model header {k}={raw:?} is not a count")))
        };
        let list = |k: &str| -> Result<Option<Array1<F>>> {
            fields
                .get(k)
                .map(|raw| {
                    raw.split(',')
                        .map(|t| {
                            t.parse::<f64>()
                                .map(F::from_f64_lossy)
                                .map_err(|_| MdcrError::Format(format!("model header {k}: bad number {t:?}")))
                        })
                        .collect::<Result<Vec<F>>>()
                        .map(Array1::from)
                })
                .transpose()
        };
        let stats = |prefix: &str, expected: usize| -> Result<Option<ColumnStats<F>>> {
            match (list(&format!("{prefix}_mean"))?, list(&format!("{prefix}_std"))?) {
                (Some(mean), Some(std)) if mean.len() == expected && std.len() == expected => {
                    Ok(Some(ColumnStats { mean, std }))
                }
                (None, None) => Ok(None),
                _ => Err(MdcrError::Format(format!(
                    "model {prefix} normalization stats are incomplete or not {expected} long"
                ))),
            }
        };

        let task: Task = get("task")?.parse()?;
        let (classes, image_dim, text_dim) = (dim("classes")?, dim("image_dim")?, dim("text_dim")?);
        let hp = Hyperparams::new(num("lambda")?, num("eta1")?, num("eta2")?)?;
        let (mu, epsilon) = (num("mu")?, num("epsilon")?);
        let image_stats = stats("image", image_dim)?;
        let text_stats = stats("text", text_dim)?;

        let label_values = fields
            .get("label_values")
            .map(|raw| {
                raw.split(',')
                    .map(|t| {
                        t.parse::<i64>()
                            .map_err(|_| MdcrError::Format(format!("model header label_values: bad label {t:?}")))
                    })
                    .collect::<Result<Vec<i64>>>()
            })
            .transpose()?;
        if label_values.as_ref().is_some_and(|l| l.len() != classes) {
            return Err(MdcrError::Format(format!("model header label_values must list {classes} labels")));
        }

        let v = read_binary::<F, _>(&mut reader)?.into_inner();
        let w = read_binary::<F, _>(&mut reader)?.into_inner();
        if v.dim() != (classes, image_dim) || w.dim() != (classes, text_dim) {
            return Err(MdcrError::Format(format!(
                "header declares V {classes}x{image_dim} and W {classes}x{text_dim}, payload has V {:?} and W {:?}",
                v.dim(),
                w.dim()
            )));
        }
        Ok(Self {
            pair: ProjectionPair::new(v, w, task)?,
            hp,
            mu,
            epsilon,
            image_stats,
            text_stats,
            label_values,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(File::open(path)?)
    }
}
