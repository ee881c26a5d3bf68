//! Central finite-difference check of the analytic gradients.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::build_semantic_matrix;
use crate::error::Result;
use crate::objective::{Block, Hyperparams, Task, TaskObjective};

pub const DEFAULT_STEP: f64 = 1e-6;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;

/// Relative error of one coordinate, with the denominator floored at 1 so
/// that near-zero entries are compared absolutely.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

/// `(f(x + h·e_ij) − f(x − h·e_ij)) / 2h` for every entry of `block`.
pub fn numeric_gradient(
    obj: &TaskObjective<'_, f64>,
    block: Block,
    v: ArrayView2<'_, f64>,
    w: ArrayView2<'_, f64>,
    step: f64,
) -> Result<Array2<f64>> {
    let mut v = v.to_owned();
    let mut w = w.to_owned();
    let shape = match block {
        Block::V => v.dim(),
        Block::W => w.dim(),
    };
    let mut grad = Array2::zeros(shape);
    for ((i, j), g) in grad.indexed_iter_mut() {
        let target = match block {
            Block::V => &mut v,
            Block::W => &mut w,
        };
        let orig = target[[i, j]];
        target[[i, j]] = orig + step;
        let plus = obj.value(v.view(), w.view())?;
        let target = match block {
            Block::V => &mut v,
            Block::W => &mut w,
        };
        target[[i, j]] = orig - step;
        let minus = obj.value(v.view(), w.view())?;
        match block {
            Block::V => v[[i, j]] = orig,
            Block::W => w[[i, j]] = orig,
        }
        *g = (plus - minus) / (2.0 * step);
    }
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WorstCoordinate {
    pub task: Task,
    pub block: Block,
    pub point: usize,
    pub row: usize,
    pub col: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub n: usize,
    pub image_dim: usize,
    pub text_dim: usize,
    pub classes: usize,
    /// Random evaluation points per task.
    pub points: usize,
    pub seed: u64,
    pub step: f64,
    pub tolerance: f64,
    pub hp: Hyperparams<f64>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            n: 20,
            image_dim: 7,
            text_dim: 5,
            classes: 3,
            points: 20,
            seed: 0,
            step: DEFAULT_STEP,
            tolerance: DEFAULT_TOLERANCE,
            hp: Hyperparams {
                lambda: 0.5,
                eta1: 0.5,
                eta2: 0.5,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GradCheckReport {
    pub passed: bool,
    pub tolerance: f64,
    pub max_relative_error: f64,
    pub worst: Option<WorstCoordinate>,
    pub checked_coordinates: usize,
}

/// Draws one random instance (entries in [−1, 1], labels cycling through
/// the classes) and compares analytic and numeric gradients of every task
/// and block at `points` random projection pairs.
pub fn run_gradcheck(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    cfg.hp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut uniform = |rows, cols| Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..=1.0));
    let x = uniform(cfg.n, cfg.image_dim);
    let t = uniform(cfg.n, cfg.text_dim);
    let labels: Vec<usize> = (0..cfg.n).map(|i| i % cfg.classes.max(1)).collect();
    let s = build_semantic_matrix::<f64>(&labels, cfg.classes)?;
    let pairs: Vec<(Array2<f64>, Array2<f64>)> = (0..cfg.points)
        .map(|_| (uniform(cfg.classes, cfg.image_dim), uniform(cfg.classes, cfg.text_dim)))
        .collect();

    let mut worst: Option<WorstCoordinate> = None;
    let mut checked = 0;
    for task in Task::ALL {
        let obj = TaskObjective::new(task, x.view(), t.view(), s.view(), cfg.hp)?;
        for (point, (v, w)) in pairs.iter().enumerate() {
            for block in [Block::V, Block::W] {
                let analytic = obj.block_gradient(block, v.view(), w.view())?;
                let numeric = numeric_gradient(&obj, block, v.view(), w.view(), cfg.step)?;
                for (((row, col), &a), &num) in analytic.indexed_iter().zip(numeric.iter()) {
                    checked += 1;
                    let err = relative_error(a, num);
                    if worst.is_none_or(|w| err > w.relative_error) {
                        worst = Some(WorstCoordinate {
                            task,
                            block,
                            point,
                            row,
                            col,
                            analytic: a,
                            numeric: num,
                            relative_error: err,
                        });
                    }
                }
            }
        }
    }
    let max_relative_error = worst.map_or(0.0, |w| w.relative_error);
    Ok(GradCheckReport {
        passed: max_relative_error <= cfg.tolerance,
        tolerance: cfg.tolerance,
        max_relative_error,
        worst,
        checked_coordinates: checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_pass() {
        let report = run_gradcheck(&GradCheckConfig::default()).unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.checked_coordinates, 3 * 20 * 3 * (7 + 5));
    }

    #[test]
    fn impossible_tolerance_fails() {
        let cfg = GradCheckConfig {
            tolerance: 1e-15,
            ..GradCheckConfig::default()
        };
        let report = run_gradcheck(&cfg).unwrap();
        assert!(!report.passed);
        assert!(report.worst.is_some());
    }

    #[test]
    fn boundary_lambda_sweep() {
        for lambda in [0.0, 0.5, 1.0] {
            let cfg = GradCheckConfig {
                hp: Hyperparams {
                    lambda,
                    eta1: 0.0,
                    eta2: 0.0,
                },
                ..GradCheckConfig::default()
            };
            assert!(run_gradcheck(&cfg).unwrap().passed, "lambda {lambda}");
        }
    }
}
