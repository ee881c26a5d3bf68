//! The MDCR objectives and their analytic gradients.
//!
//! For image features `X` (n×p), text features `T` (n×q), one-hot labels
//! `S` (n×c) and projections `V` (c×p), `W` (c×q):
//!
//! ```text
//! f(V, W) = λ‖XVᵀ − TWᵀ‖² + a_img‖XVᵀ − S‖² + a_txt‖TWᵀ − S‖² + η₁‖V‖² + η₂‖W‖²
//! ```
//!
//! with `(a_img, a_txt)` equal to `(1−λ, 0)` for I2T, `(0, 1−λ)` for T2I and
//! `(1−λ, 1−λ)` for the unified single-pair scheme. The gradients are
//!
//! ```text
//! ∇V = 2[(λ + a_img)·V XᵀX − λ·W TᵀX − a_img·SᵀX + η₁V]
//! ∇W = 2[(λ + a_txt)·W TᵀT − λ·V XᵀT − a_txt·SᵀT + η₂W]
//! ```
//!
//! The commonly printed form of the I2T ∇V (and T2I ∇W) drops the factor 2
//! on the leading `V XᵀX` term; that form is not the derivative of the
//! objective, and the exact one above is what is used here and checked
//! against finite differences.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::data::{PairedDataset, SemanticMatrix};
use crate::error::{MdcrError, Result};
use crate::scalar::Scalar;

/// Which objective a projection pair is trained for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Image query, text gallery: regression from the image side.
    I2T,
    /// Text query, image gallery: regression from the text side.
    T2I,
    /// One pair with both regression terms.
    Unified,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::I2T, Task::T2I, Task::Unified];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::I2T => "i2t",
            Task::T2I => "t2i",
            Task::Unified => "unified",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = MdcrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "i2t" => Ok(Task::I2T),
            "t2i" => Ok(Task::T2I),
            "unified" => Ok(Task::Unified),
            other => Err(MdcrError::InvalidArgument(format!(
                "unknown task {other:?}, expected i2t, t2i or unified"
            ))),
        }
    }
}

/// Which projection a gradient step moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Block {
    /// Image projection `V`.
    V,
    /// Text projection `W`.
    W,
}

/// Correlation/regression trade-off `lambda ∈ [0, 1]` and the ridge weights
/// `eta1` (on `V`) and `eta2` (on `W`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams<F> {
    pub lambda: F,
    pub eta1: F,
    pub eta2: F,
}

impl<F: Scalar> Hyperparams<F> {
    pub fn new(lambda: F, eta1: F, eta2: F) -> Result<Self> {
        let hp = Self { lambda, eta1, eta2 };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= F::zero() && self.lambda <= F::one()) {
            return Err(MdcrError::InvalidArgument(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        for (name, v) in [("eta1", self.eta1), ("eta2", self.eta2)] {
            if !(v >= F::zero() && v.is_finite()) {
                return Err(MdcrError::InvalidArgument(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Regression weights `(a_img, a_txt)` for `task`.
    pub fn regression_weights(&self, task: Task) -> (F, F) {
        let r = F::one() - self.lambda;
        match task {
            Task::I2T => (r, F::zero()),
            Task::T2I => (F::zero(), r),
            Task::Unified => (r, r),
        }
    }
}

/// A couple of projections: `v` maps image features (c×p), `w` maps text
/// features (c×q), both into the c-dimensional label space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPair<F> {
    pub v: Array2<F>,
    pub w: Array2<F>,
    pub task: Task,
}

impl<F: Scalar> ProjectionPair<F> {
    pub fn new(v: Array2<F>, w: Array2<F>, task: Task) -> Result<Self> {
        if v.nrows() != w.nrows() || v.nrows() == 0 {
            return Err(MdcrError::DimensionMismatch(format!(
                "V has {} rows, W has {}; both must equal the class count",
                v.nrows(),
                w.nrows()
            )));
        }
        for m in [&v, &w] {
            if let Some(((row, col), _)) = m.indexed_iter().find(|(_, x)| !x.is_finite()) {
                return Err(MdcrError::NonFinite { row, col });
            }
        }
        Ok(Self { v, w, task })
    }

    pub fn zeros(task: Task, classes: usize, image_dim: usize, text_dim: usize) -> Self {
        Self {
            v: Array2::zeros((classes, image_dim)),
            w: Array2::zeros((classes, text_dim)),
            task,
        }
    }

    pub fn classes(&self) -> usize {
        self.v.nrows()
    }

    pub fn image_dim(&self) -> usize {
        self.v.ncols()
    }

    pub fn text_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().chain(self.w.iter()).all(|x| x.is_finite())
    }
}

/// Unweighted squared Frobenius norms making up the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveTerms {
    /// `‖XVᵀ − TWᵀ‖²`
    pub correlation: f64,
    /// `‖XVᵀ − S‖²`
    pub image_regression: f64,
    /// `‖TWᵀ − S‖²`
    pub text_regression: f64,
    /// `‖V‖²`
    pub v_norm: f64,
    /// `‖W‖²`
    pub w_norm: f64,
}

/// Iterate-independent products, computed once per objective.
#[derive(Debug, Clone)]
struct Grams<F> {
    /// XᵀX, p×p
    image: Array2<F>,
    /// TᵀT, q×q
    text: Array2<F>,
    /// XᵀT, p×q
    cross: Array2<F>,
    /// SᵀX, c×p
    label_image: Array2<F>,
    /// SᵀT, c×q
    label_text: Array2<F>,
}

/// One task's objective bound to a training set.
#[derive(Debug, Clone)]
pub struct TaskObjective<'a, F> {
    task: Task,
    hp: Hyperparams<F>,
    x: ArrayView2<'a, F>,
    t: ArrayView2<'a, F>,
    s: ArrayView2<'a, F>,
    grams: Grams<F>,
}

fn squared_norm<F: Scalar>(m: ArrayView2<'_, F>) -> f64 {
    m.iter().map(|v| v.as_f64() * v.as_f64()).sum()
}

fn squared_distance<F: Scalar>(a: ArrayView2<'_, F>, b: ArrayView2<'_, F>) -> f64 {
    let mut acc = 0.0;
    Zip::from(a).and(b).for_each(|&x, &y| {
        let d = x.as_f64() - y.as_f64();
        acc += d * d;
    });
    acc
}

impl<'a, F: Scalar> TaskObjective<'a, F> {
    pub fn new(
        task: Task,
        x: ArrayView2<'a, F>,
        t: ArrayView2<'a, F>,
        s: ArrayView2<'a, F>,
        hp: Hyperparams<F>,
    ) -> Result<Self> {
        hp.validate()?;
        if x.nrows() != t.nrows() || x.nrows() != s.nrows() {
            return Err(MdcrError::DimensionMismatch(format!(
                "X has {} rows, T has {}, S has {}",
                x.nrows(),
                t.nrows(),
                s.nrows()
            )));
        }
        let grams = Grams {
            image: x.t().dot(&x),
            text: t.t().dot(&t),
            cross: x.t().dot(&t),
            label_image: s.t().dot(&x),
            label_text: s.t().dot(&t),
        };
        Ok(Self {
            task,
            hp,
            x,
            t,
            s,
            grams,
        })
    }

    pub fn from_dataset(
        task: Task,
        data: &'a PairedDataset<F>,
        semantic: &'a SemanticMatrix<F>,
        hp: Hyperparams<F>,
    ) -> Result<Self> {
        Self::new(task, data.images().view(), data.texts().view(), semantic.view(), hp)
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn hyperparams(&self) -> &Hyperparams<F> {
        &self.hp
    }

    pub fn classes(&self) -> usize {
        self.s.ncols()
    }

    pub fn image_dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn text_dim(&self) -> usize {
        self.t.ncols()
    }

    fn check_point(&self, v: ArrayView2<'_, F>, w: ArrayView2<'_, F>) -> Result<()> {
        let c = self.classes();
        if v.dim() != (c, self.image_dim()) || w.dim() != (c, self.text_dim()) {
            return Err(MdcrError::DimensionMismatch(format!(
                "expected V {}x{} and W {}x{}, got V {}x{} and W {}x{}",
                c,
                self.image_dim(),
                c,
                self.text_dim(),
                v.nrows(),
                v.ncols(),
                w.nrows(),
                w.ncols()
            )));
        }
        Ok(())
    }

    pub fn terms(&self, v: ArrayView2<'_, F>, w: ArrayView2<'_, F>) -> Result<ObjectiveTerms> {
        self.check_point(v, w)?;
        let xv = self.x.dot(&v.t());
        let tw = self.t.dot(&w.t());
        Ok(ObjectiveTerms {
            correlation: squared_distance(xv.view(), tw.view()),
            image_regression: squared_distance(xv.view(), self.s),
            text_regression: squared_distance(tw.view(), self.s),
            v_norm: squared_norm(v),
            w_norm: squared_norm(w),
        })
    }

    /// Weighted sum of `terms` for this objective's task.
    pub fn combine(&self, terms: &ObjectiveTerms) -> f64 {
        let (a_img, a_txt) = self.hp.regression_weights(self.task);
        self.hp.lambda.as_f64() * terms.correlation
            + a_img.as_f64() * terms.image_regression
            + a_txt.as_f64() * terms.text_regression
            + self.hp.eta1.as_f64() * terms.v_norm
            + self.hp.eta2.as_f64() * terms.w_norm
    }

    pub fn value(&self, v: ArrayView2<'_, F>, w: ArrayView2<'_, F>) -> Result<F> {
        let terms = self.terms(v, w)?;
        Ok(F::from_f64_lossy(self.combine(&terms)))
    }

    pub fn block_gradient(
        &self,
        block: Block,
        v: ArrayView2<'_, F>,
        w: ArrayView2<'_, F>,
    ) -> Result<Array2<F>> {
        self.check_point(v, w)?;
        let two = F::one() + F::one();
        let lambda = self.hp.lambda;
        let (a_img, a_txt) = self.hp.regression_weights(self.task);
        let g = &self.grams;
        let grad = match block {
            Block::V => {
                let mut d = v.dot(&g.image) * (lambda + a_img);
                d.scaled_add(-lambda, &w.dot(&g.cross.t()));
                d.scaled_add(-a_img, &g.label_image);
                d.scaled_add(self.hp.eta1, &v);
                d
            }
            Block::W => {
                let mut d = w.dot(&g.text) * (lambda + a_txt);
                d.scaled_add(-lambda, &v.dot(&g.cross));
                d.scaled_add(-a_txt, &g.label_text);
                d.scaled_add(self.hp.eta2, &w);
                d
            }
        };
        Ok(grad * two)
    }

    pub fn gradient(
        &self,
        v: ArrayView2<'_, F>,
        w: ArrayView2<'_, F>,
    ) -> Result<(Array2<F>, Array2<F>)> {
        Ok((
            self.block_gradient(Block::V, v, w)?,
            self.block_gradient(Block::W, v, w)?,
        ))
    }
}

/// Objective of `obj`'s task at `pair` (the pair's own task tag is ignored).
pub fn objective_value<F: Scalar>(pair: &ProjectionPair<F>, obj: &TaskObjective<'_, F>) -> Result<F> {
    obj.value(pair.v.view(), pair.w.view())
}

pub fn gradient<F: Scalar>(
    pair: &ProjectionPair<F>,
    obj: &TaskObjective<'_, F>,
) -> Result<(Array2<F>, Array2<F>)> {
    obj.gradient(pair.v.view(), pair.w.view())
}

/// Relative gap between `f_I2T(V, W; X, T)` and `f_T2I(W, V; T, X)` with
/// the roles of the modalities exchanged. `exchange_regularizers = false`
/// keeps `eta1`/`eta2` in place, which breaks the identity unless they agree.
pub fn symmetry_gap<F: Scalar>(
    v: ArrayView2<'_, F>,
    w: ArrayView2<'_, F>,
    x: ArrayView2<'_, F>,
    t: ArrayView2<'_, F>,
    s: ArrayView2<'_, F>,
    hp: &Hyperparams<F>,
    exchange_regularizers: bool,
) -> Result<f64> {
    let swapped_hp = if exchange_regularizers {
        Hyperparams {
            lambda: hp.lambda,
            eta1: hp.eta2,
            eta2: hp.eta1,
        }
    } else {
        *hp
    };
    let i2t = TaskObjective::new(Task::I2T, x, t, s, *hp)?;
    let t2i = TaskObjective::new(Task::T2I, t, x, s, swapped_hp)?;
    let a = i2t.combine(&i2t.terms(v, w)?);
    let b = t2i.combine(&t2i.terms(w, v)?);
    let scale = a.abs().max(b.abs());
    Ok(if scale == 0.0 { 0.0 } else { (a - b).abs() / scale })
}

/// I2T and T2I objectives are mirror images: swapping the modalities (and
/// the two ridge weights) maps one onto the other. Holds to 1e-10 relative.
pub fn task_symmetry_check<F: Scalar>(
    v: ArrayView2<'_, F>,
    w: ArrayView2<'_, F>,
    x: ArrayView2<'_, F>,
    t: ArrayView2<'_, F>,
    s: ArrayView2<'_, F>,
    hp: &Hyperparams<F>,
) -> Result<bool> {
    Ok(symmetry_gap(v, w, x, t, s, hp, true)? <= 1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::build_semantic_matrix;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    fn hp(lambda: f64, eta1: f64, eta2: f64) -> Hyperparams<f64> {
        Hyperparams::new(lambda, eta1, eta2).unwrap()
    }

    #[test]
    fn zero_projections_leave_only_label_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&mut rng, 4, 3);
        let t = random(&mut rng, 4, 2);
        let s = build_semantic_matrix::<f64>(&[0, 1, 1, 0], 2).unwrap();
        let obj = TaskObjective::new(Task::I2T, x.view(), t.view(), s.view(), hp(0.5, 0.0, 0.0))
            .unwrap();
        let pair = ProjectionPair::zeros(Task::I2T, 2, 3, 2);
        assert_eq!(objective_value(&pair, &obj).unwrap(), 2.0);
    }

    #[test]
    fn perfect_correlation_at_lambda_one_is_zero() {
        // X = T and V = W makes XVᵀ == TWᵀ exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random(&mut rng, 5, 3);
        let v = random(&mut rng, 2, 3);
        let s = build_semantic_matrix::<f64>(&[0, 1, 0, 1, 1], 2).unwrap();
        for task in Task::ALL {
            let obj = TaskObjective::new(task, x.view(), x.view(), s.view(), hp(1.0, 0.0, 0.0))
                .unwrap();
            assert_eq!(obj.value(v.view(), v.view()).unwrap(), 0.0);
        }
    }

    #[test]
    fn gradient_at_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(&mut rng, 6, 4);
        let t = random(&mut rng, 6, 3);
        let s = build_semantic_matrix::<f64>(&[0, 1, 2, 0, 1, 2], 3).unwrap();
        let lambda = 0.3;
        let obj = TaskObjective::new(Task::I2T, x.view(), t.view(), s.view(), hp(lambda, 0.0, 0.7))
            .unwrap();
        let pair = ProjectionPair::zeros(Task::I2T, 3, 4, 3);
        let (dv, dw) = gradient(&pair, &obj).unwrap();
        let expected = s.as_array().t().dot(&x) * (-2.0 * (1.0 - lambda));
        for (a, b) in dv.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(dw.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let t = array![[1.0], [2.0]];
        let s = build_semantic_matrix::<f64>(&[0, 1], 2).unwrap();
        let obj = TaskObjective::new(Task::T2I, x.view(), t.view(), s.view(), hp(0.5, 0.5, 0.5))
            .unwrap();
        let bad_v = Array2::<f64>::zeros((2, 3));
        let w = Array2::<f64>::zeros((2, 1));
        assert!(matches!(
            obj.value(bad_v.view(), w.view()),
            Err(MdcrError::DimensionMismatch(_))
        ));
        assert!(obj.gradient(bad_v.view(), w.view()).is_err());
        let short_t = array![[1.0]];
        assert!(TaskObjective::new(Task::I2T, x.view(), short_t.view(), s.view(), hp(0.5, 0.5, 0.5)).is_err());
    }

    #[test]
    fn hyperparams_validated() {
        assert!(Hyperparams::new(1.5, 0.0, 0.0).is_err());
        assert!(Hyperparams::new(-0.1, 0.0, 0.0).is_err());
        assert!(Hyperparams::new(0.5, -1.0, 0.0).is_err());
        assert!(Hyperparams::new(0.5, 0.0, f64::NAN).is_err());
        assert!(Hyperparams::new(0.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn symmetry_on_zero_matrices_and_negative_control() {
        let z = Array2::<f64>::zeros((3, 2));
        let x = Array2::<f64>::zeros((4, 2));
        let s = build_semantic_matrix::<f64>(&[0, 1, 2, 0], 3).unwrap();
        assert!(task_symmetry_check(z.view(), z.view(), x.view(), x.view(), s.view(), &hp(0.4, 0.1, 0.9)).unwrap());

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random(&mut rng, 4, 3);
        let t = random(&mut rng, 4, 2);
        let v = random(&mut rng, 3, 3);
        let w = random(&mut rng, 3, 2);
        let h = hp(0.4, 0.1, 0.9);
        assert!(task_symmetry_check(v.view(), w.view(), x.view(), t.view(), s.view(), &h).unwrap());
        let gap = symmetry_gap(v.view(), w.view(), x.view(), t.view(), s.view(), &h, false).unwrap();
        assert!(gap > 1e-10);
    }

    #[test]
    fn task_parsing() {
        assert_eq!("I2T".parse::<Task>().unwrap(), Task::I2T);
        assert_eq!("unified".parse::<Task>().unwrap(), Task::Unified);
        assert!("x2y".parse::<Task>().is_err());
    }
}
