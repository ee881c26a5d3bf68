//! Alternating block gradient descent.
//!
//! Each outer iteration runs two inner loops: gradient steps on `V` with `W`
//! fixed until a step improves the objective by at most `epsilon`, then the
//! same on `W`. Outer iterations repeat until one full sweep improves the
//! objective by at most `epsilon` or its relative change drops to
//! `outer_tolerance`, or `max_outer_iters` runs out. An accepted step never
//! increases the objective.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use crate::objective::Block;
use crate::data::PairedDataset;
use crate::error::{MdcrError, Result};
use crate::objective::{Hyperparams, ProjectionPair, Task, TaskObjective};
use crate::scalar::Scalar;

/// A candidate above `DIVERGENCE_FACTOR × initial objective` counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

/// Step-halving gives up once the step falls below this fraction of `mu`.
const MIN_STEP_FRACTION: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Init<F> {
    Zeros,
    SeededGaussian { scale: F, seed: u64 },
}

/// What happens when a step would increase the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepPolicy {
    /// Reject the step and end the current inner loop; `mu` never changes.
    Fixed,
    /// Halve this block's step size and retry. The reduced step is kept for
    /// the rest of the run. Identical to `Fixed` whenever no step is rejected.
    HalveOnReject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrainConfig<F> {
    pub hp: Hyperparams<F>,
    /// Gradient step size.
    pub mu: F,
    /// Inner loops stop once one step improves the objective by `<= epsilon`.
    pub epsilon: F,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub init: Init<F>,
    /// Relative objective change per outer iteration treated as converged.
    /// An outer iteration improving the objective by `<= epsilon` also counts.
    pub outer_tolerance: F,
    pub step_policy: StepPolicy,
}

impl<F: Scalar> TrainConfig<F> {
    pub fn validate(&self) -> Result<()> {
        self.hp.validate()?;
        let positive = |name: &str, v: F| {
            if v > F::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(MdcrError::InvalidArgument(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        positive("mu", self.mu)?;
        positive("epsilon", self.epsilon)?;
        if self.outer_tolerance.is_nan() || self.outer_tolerance < F::zero() {
            return Err(MdcrError::InvalidArgument("outer tolerance must be >= 0".into()));
        }
        if self.max_outer_iters == 0 {
            return Err(MdcrError::InvalidArgument("max outer iterations must be >= 1".into()));
        }
        if self.max_inner_iters == 0 {
            return Err(MdcrError::InvalidArgument("max inner iterations must be >= 1".into()));
        }
        if let Init::SeededGaussian { scale, .. } = self.init {
            if !(scale >= F::zero() && scale.is_finite()) {
                return Err(MdcrError::InvalidArgument("init scale must be finite and >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn with_hyperparams(mut self, hp: Hyperparams<F>) -> Self {
        self.hp = hp;
        self
    }

    pub fn with_step_policy(mut self, policy: StepPolicy) -> Self {
        self.step_policy = policy;
        self
    }

    pub fn with_init(mut self, init: Init<F>) -> Self {
        self.init = init;
        self
    }
}

impl<F: Scalar> Default for TrainConfig<F> {
    fn default() -> Self {
        default_config(Task::I2T, DatasetPreset::Custom)
    }
}

/// Datasets with published hyperparameter settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetPreset {
    /// Wikipedia with the public 128-d SIFT BoVW / 10-d LDA features.
    Wikipedia,
    PascalSentence,
    InriaWebsearch,
    Custom,
}

impl DatasetPreset {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetPreset::Wikipedia => "wikipedia-public",
            DatasetPreset::PascalSentence => "pascal-sentence",
            DatasetPreset::InriaWebsearch => "inria-websearch",
            DatasetPreset::Custom => "custom",
        }
    }
}

impl fmt::Display for DatasetPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetPreset {
    type Err = MdcrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wikipedia" | "wikipedia-public" => Ok(DatasetPreset::Wikipedia),
            "pascal" | "pascal-sentence" => Ok(DatasetPreset::PascalSentence),
            "inria" | "inria-websearch" => Ok(DatasetPreset::InriaWebsearch),
            "custom" => Ok(DatasetPreset::Custom),
            other => Err(MdcrError::InvalidArgument(format!("unknown preset {other:?}"))),
        }
    }
}

/// Published settings: `mu = 0.02`, `epsilon = 1e-4`, `eta1 = eta2 = 0.5`
/// everywhere; `lambda = 0.1` for Wikipedia I2T and `0.5` otherwise.
pub fn default_config<F: Scalar>(task: Task, preset: DatasetPreset) -> TrainConfig<F> {
    let f = F::from_f64_lossy;
    let lambda = match (preset, task) {
        (DatasetPreset::Wikipedia, Task::I2T) => 0.1,
        _ => 0.5,
    };
    TrainConfig {
        hp: Hyperparams {
            lambda: f(lambda),
            eta1: f(0.5),
            eta2: f(0.5),
        },
        mu: f(0.02),
        epsilon: f(1e-4),
        max_outer_iters: 100,
        max_inner_iters: 500,
        init: Init::Zeros,
        outer_tolerance: f(1e-6),
        step_policy: StepPolicy::HalveOnReject,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry<F> {
    /// 0 for the initial point, then 1-based.
    pub outer: usize,
    pub block: Block,
    /// Attempt number inside the inner loop, 1-based (0 for the initial point).
    pub inner: usize,
    /// Objective at the candidate; NaN if the candidate was non-finite.
    pub objective: F,
    pub step: F,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Converged,
    MaxIters,
    StepRejected,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Converged => "converged",
            StopReason::MaxIters => "max-iters",
            StopReason::StepRejected => "step-rejected",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport<F> {
    /// Last accepted iterate; always finite.
    pub final_pair: ProjectionPair<F>,
    pub trace: Vec<TraceEntry<F>>,
    pub stop_reason: StopReason,
    pub outer_iters: usize,
    pub initial_objective: F,
    pub final_objective: F,
    pub diagnostic: Option<String>,
}

impl<F: Scalar> TrainReport<F> {
    pub fn accepted(&self) -> impl Iterator<Item = &TraceEntry<F>> {
        self.trace.iter().filter(|e| e.accepted)
    }

    /// Accepted objective values never increase.
    pub fn is_monotone(&self) -> bool {
        let values: Vec<F> = self.accepted().map(|e| e.objective).collect();
        values.windows(2).all(|w| w[1] <= w[0])
    }
}

/// One gradient step on `block`: `current − mu·∇`, and the objective there.
/// `current` is the block being moved, `fixed` the other one.
pub fn step_block<F: Scalar>(
    current: ArrayView2<'_, F>,
    fixed: ArrayView2<'_, F>,
    block: Block,
    obj: &TaskObjective<'_, F>,
    mu: F,
) -> Result<(Array2<F>, F)> {
    let (v, w) = match block {
        Block::V => (current, fixed),
        Block::W => (fixed, current),
    };
    let grad = obj.block_gradient(block, v, w)?;
    let mut updated = current.to_owned();
    updated.scaled_add(-mu, &grad);
    if updated.iter().any(|x| !x.is_finite()) {
        return Err(MdcrError::Numerical(format!("{block:?} step produced non-finite entries")));
    }
    let value = match block {
        Block::V => obj.value(updated.view(), fixed)?,
        Block::W => obj.value(fixed, updated.view())?,
    };
    if !value.is_finite() {
        return Err(MdcrError::Numerical(format!("{block:?} step produced a non-finite objective")));
    }
    Ok((updated, value))
}

fn initial_pair<F: Scalar>(task: Task, obj: &TaskObjective<'_, F>, init: &Init<F>) -> ProjectionPair<F> {
    let (c, p, q) = (obj.classes(), obj.image_dim(), obj.text_dim());
    match *init {
        Init::Zeros => ProjectionPair::zeros(task, c, p, q),
        Init::SeededGaussian { scale, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = |rows, cols| {
                Array2::from_shape_fn((rows, cols), |_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    F::from_f64_lossy(z) * scale
                })
            };
            let v = draw(c, p);
            let w = draw(c, q);
            ProjectionPair { v, w, task }
        }
    }
}

/// Trains the projection pair for `task` on `data`.
pub fn train<F: Scalar>(data: &PairedDataset<F>, task: Task, cfg: &TrainConfig<F>) -> Result<TrainReport<F>> {
    cfg.validate()?;
    data.labels().ensure_all_classes_present()?;
    let semantic = data.semantic_matrix();
    let obj = TaskObjective::from_dataset(task, data, &semantic, cfg.hp)?;
    let init = initial_pair(task, &obj, &cfg.init);
    train_from(&obj, init, cfg)
}

/// Runs the alternating descent on a prepared objective from `init`.
pub fn train_from<F: Scalar>(
    obj: &TaskObjective<'_, F>,
    init: ProjectionPair<F>,
    cfg: &TrainConfig<F>,
) -> Result<TrainReport<F>> {
    cfg.validate()?;
    let ProjectionPair { mut v, mut w, task } = init;
    let initial = obj.value(v.view(), w.view())?;
    if !initial.is_finite() {
        return Err(MdcrError::Numerical("objective at initialization is not finite".into()));
    }
    let limit = F::from_f64_lossy(DIVERGENCE_FACTOR) * initial.max(F::min_positive_value());
    let min_step = cfg.mu * F::from_f64_lossy(MIN_STEP_FRACTION);

    let mut trace = vec![TraceEntry {
        outer: 0,
        block: Block::V,
        inner: 0,
        objective: initial,
        step: F::zero(),
        accepted: true,
    }];
    let mut current = initial;
    let mut steps = [cfg.mu, cfg.mu];
    let mut stop = StopReason::MaxIters;
    let mut diagnostic = None;
    let mut outer_done = 0;

    'outer: for outer in 1..=cfg.max_outer_iters {
        outer_done = outer;
        let start = current;
        let mut rejected_any = false;

        for block in [Block::V, Block::W] {
            let slot = block as usize;
            for attempt in 1..=cfg.max_inner_iters {
                let before = current;
                let (moving, fixed) = match block {
                    Block::V => (v.view(), w.view()),
                    Block::W => (w.view(), v.view()),
                };
                let outcome = step_block(moving, fixed, block, obj, steps[slot]);
                let candidate = outcome.as_ref().map(|(_, val)| *val).unwrap_or_else(|_| F::nan());

                match outcome {
                    Ok((updated, value)) if value <= before => {
                        trace.push(TraceEntry {
                            outer,
                            block,
                            inner: attempt,
                            objective: value,
                            step: steps[slot],
                            accepted: true,
                        });
                        match block {
                            Block::V => v = updated,
                            Block::W => w = updated,
                        }
                        current = value;
                        if before - value <= cfg.epsilon {
                            break;
                        }
                    }
                    _ => {
                        trace.push(TraceEntry {
                            outer,
                            block,
                            inner: attempt,
                            objective: candidate,
                            step: steps[slot],
                            accepted: false,
                        });
                        let diverged = candidate.is_nan() || candidate > limit;
                        match cfg.step_policy {
                            StepPolicy::Fixed if diverged => {
                                stop = StopReason::StepRejected;
                                diagnostic = Some(format!(
                                    "divergence on {block:?} at outer iteration {outer}: candidate objective {candidate} \
                                     exceeds {DIVERGENCE_FACTOR}x the initial value {initial} (step {})",
                                    steps[slot]
                                ));
                                break 'outer;
                            }
                            StepPolicy::Fixed => {
                                rejected_any = true;
                                break;
                            }
                            StepPolicy::HalveOnReject => {
                                steps[slot] = steps[slot] / (F::one() + F::one());
                                if steps[slot] < min_step {
                                    stop = StopReason::StepRejected;
                                    diagnostic = Some(format!(
                                        "{block:?} step size underflowed below {min_step} without descent"
                                    ));
                                    break 'outer;
                                }
                            }
                        }
                    }
                }
            }
        }

        let change = (start - current).abs() / start.abs().max(F::min_positive_value());
        if rejected_any && current >= start {
            stop = StopReason::StepRejected;
            diagnostic = Some(format!(
                "no progress in outer iteration {outer}: every step at mu = {} increased the objective",
                cfg.mu
            ));
            break;
        }
        if change <= cfg.outer_tolerance || start - current <= cfg.epsilon {
            stop = StopReason::Converged;
            break;
        }
    }

    Ok(TrainReport {
        final_pair: ProjectionPair { v, w, task },
        trace,
        stop_reason: stop,
        outer_iters: outer_done,
        initial_objective: initial,
        final_objective: current,
        diagnostic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_semantic_matrix, make_synthetic, SyntheticSpec};
    use rand::Rng;

    fn toy_objective_data(seed: u64) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((6, 4), |_| rng.random_range(-1.0..1.0));
        let t = Array2::from_shape_fn((6, 3), |_| rng.random_range(-1.0..1.0));
        let s = build_semantic_matrix::<f64>(&[0, 1, 0, 1, 0, 1], 2)
            .unwrap()
            .as_array()
            .clone();
        (x, t, s)
    }

    #[test]
    fn zero_gradient_point_is_fixed() {
        // With lambda = 1 and no ridge, V = W = 0 is stationary.
        let (x, t, s) = toy_objective_data(1);
        let hp = Hyperparams::new(1.0, 0.0, 0.0).unwrap();
        let obj = TaskObjective::new(Task::I2T, x.view(), t.view(), s.view(), hp).unwrap();
        let v = Array2::zeros((2, 4));
        let w = Array2::zeros((2, 3));
        let (updated, _) = step_block(v.view(), w.view(), Block::V, &obj, 0.3).unwrap();
        assert_eq!(updated, v);
    }

    #[test]
    fn zero_step_changes_nothing() {
        let (x, t, s) = toy_objective_data(2);
        let hp = Hyperparams::new(0.5, 0.5, 0.5).unwrap();
        let obj = TaskObjective::new(Task::T2I, x.view(), t.view(), s.view(), hp).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = Array2::from_shape_fn((2, 4), |_| rng.random_range(-1.0..1.0));
        let w = Array2::from_shape_fn((2, 3), |_| rng.random_range(-1.0..1.0));
        let old = obj.value(v.view(), w.view()).unwrap();
        let (updated, value) = step_block(w.view(), v.view(), Block::W, &obj, 0.0).unwrap();
        assert_eq!(updated, w);
        assert_eq!(value, old);
    }

    #[test]
    fn small_step_descends() {
        let (x, t, s) = toy_objective_data(3);
        let hp = Hyperparams::new(0.3, 0.2, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for task in Task::ALL {
            let obj = TaskObjective::new(task, x.view(), t.view(), s.view(), hp).unwrap();
            for _ in 0..20 {
                let v = Array2::from_shape_fn((2, 4), |_| rng.random_range(-1.0..1.0));
                let w = Array2::from_shape_fn((2, 3), |_| rng.random_range(-1.0..1.0));
                let old = obj.value(v.view(), w.view()).unwrap();
                let (_, nv) = step_block(v.view(), w.view(), Block::V, &obj, 1e-6).unwrap();
                let (_, nw) = step_block(w.view(), v.view(), Block::W, &obj, 1e-6).unwrap();
                assert!(nv <= old && nw <= old);
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg: TrainConfig<f64> = TrainConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.max_outer_iters = 0;
        assert!(cfg.validate().is_err());
        let base: TrainConfig<f64> = TrainConfig::default();
        assert!(TrainConfig { mu: 0.0, ..base.clone() }.validate().is_err());
        assert!(TrainConfig { epsilon: -1.0, ..base.clone() }.validate().is_err());
        assert!(TrainConfig { max_inner_iters: 0, ..base.clone() }.validate().is_err());
        assert!(TrainConfig { outer_tolerance: f64::NAN, ..base }.validate().is_err());
    }

    #[test]
    fn presets_match_published_settings() {
        let c: TrainConfig<f64> = default_config(Task::I2T, DatasetPreset::Wikipedia);
        assert_eq!((c.hp.lambda, c.hp.eta1, c.hp.eta2, c.mu, c.epsilon), (0.1, 0.5, 0.5, 0.02, 1e-4));
        let c: TrainConfig<f64> = default_config(Task::T2I, DatasetPreset::Wikipedia);
        assert_eq!((c.hp.lambda, c.hp.eta1, c.hp.eta2), (0.5, 0.5, 0.5));
        for task in Task::ALL {
            for preset in [DatasetPreset::PascalSentence, DatasetPreset::InriaWebsearch, DatasetPreset::Custom] {
                let c: TrainConfig<f64> = default_config(task, preset);
                assert_eq!((c.hp.lambda, c.hp.eta1, c.hp.eta2, c.mu, c.epsilon), (0.5, 0.5, 0.5, 0.02, 1e-4));
            }
        }
        assert_eq!("wikipedia-public".parse::<DatasetPreset>().unwrap(), DatasetPreset::Wikipedia);
        assert!("imagenet".parse::<DatasetPreset>().is_err());
    }

    fn small_data() -> PairedDataset<f64> {
        make_synthetic(&SyntheticSpec {
            classes: 3,
            per_class: 10,
            image_dim: 5,
            text_dim: 4,
            separation: 2.0,
            noise: 0.2,
            seed: 4,
        })
        .unwrap()
    }

    #[test]
    fn training_descends_and_is_deterministic() {
        let data = small_data();
        let cfg = TrainConfig::default().with_init(Init::SeededGaussian { scale: 0.01, seed: 3 });
        let a = train(&data, Task::Unified, &cfg).unwrap();
        let b = train(&data, Task::Unified, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.is_monotone());
        assert!(a.final_objective <= a.initial_objective);
        assert!(a.final_pair.is_finite());
        assert_eq!(a.stop_reason, StopReason::Converged);
    }

    #[test]
    fn inner_loops_respect_cap() {
        let data = small_data();
        let cfg: TrainConfig<f64> = TrainConfig {
            max_inner_iters: 3,
            max_outer_iters: 4,
            ..TrainConfig::default()
        };
        let report = train(&data, Task::I2T, &cfg).unwrap();
        assert!(report.trace.iter().all(|e| e.inner <= 3));
        assert!(report.outer_iters <= 4);
    }

    #[test]
    fn fixed_policy_reports_oversized_steps() {
        // Features of magnitude ~100 make mu = 0.02 far beyond the stable range.
        let data = make_synthetic::<f64>(&SyntheticSpec {
            classes: 2,
            per_class: 20,
            image_dim: 3,
            text_dim: 3,
            separation: 100.0,
            noise: 1.0,
            seed: 1,
        })
        .unwrap();
        let cfg = TrainConfig::default().with_step_policy(StepPolicy::Fixed);
        let report = train(&data, Task::I2T, &cfg).unwrap();
        assert_eq!(report.stop_reason, StopReason::StepRejected);
        assert!(report.diagnostic.is_some());
        assert!(report.final_pair.is_finite());
        assert!(report.is_monotone());

        let halving = train(&data, Task::I2T, &TrainConfig::default()).unwrap();
        assert!(halving.final_objective < halving.initial_objective);
    }

    #[test]
    fn missing_class_rejected() {
        let data = small_data();
        let subset = data.select(&[0, 1, 2, 25, 26]).unwrap();
        assert!(train(&subset, Task::I2T, &TrainConfig::default()).is_err());
    }
}
