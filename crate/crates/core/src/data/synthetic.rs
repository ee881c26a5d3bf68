use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{FeatureMatrix, LabelVector, PairedDataset};
use crate::error::{MdcrError, Result};
use crate::scalar::Scalar;

/// Parameters of a Gaussian-blob paired dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub per_class: usize,
    pub image_dim: usize,
    pub text_dim: usize,
    /// Pairwise distance between class centers (exact while `classes <= dim`).
    pub separation: f64,
    /// Standard deviation of the isotropic per-coordinate noise.
    pub noise: f64,
    pub seed: u64,
}

/// `classes` centers with pairwise distance `separation`: scaled orthonormal
/// directions when the dimension allows it, scaled random unit vectors otherwise.
fn class_centers(classes: usize, dim: usize, separation: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let radius = separation / std::f64::consts::SQRT_2;
    if radius == 0.0 {
        return vec![vec![0.0; dim]; classes];
    }
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(classes);
    for _ in 0..classes {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if centers.len() < dim {
            // Gram-Schmidt against the centers drawn so far
            for c in &centers {
                let proj: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum::<f64>() / (radius * radius);
                v.iter_mut().zip(c).for_each(|(a, b)| *a -= proj * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a *= radius / norm);
        centers.push(v);
    }
    centers
}

/// Class-major paired dataset: image and text rows of class `k` are drawn
/// around that class's center in each modality. Pure in `spec`.
pub fn make_synthetic<F: Scalar>(spec: &SyntheticSpec) -> Result<PairedDataset<F>> {
    let counts = [
        ("classes", spec.classes),
        ("per_class", spec.per_class),
        ("image_dim", spec.image_dim),
        ("text_dim", spec.text_dim),
    ];
    if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
        return Err(MdcrError::InvalidArgument(format!("{name} must be >= 1")));
    }
    if !(spec.separation.is_finite() && spec.separation >= 0.0) {
        return Err(MdcrError::InvalidArgument("separation must be finite and >= 0".into()));
    }
    if !(spec.noise.is_finite() && spec.noise >= 0.0) {
        return Err(MdcrError::InvalidArgument("noise must be finite and >= 0".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let image_centers = class_centers(spec.classes, spec.image_dim, spec.separation, &mut rng);
    let text_centers = class_centers(spec.classes, spec.text_dim, spec.separation, &mut rng);

    let n = spec.classes * spec.per_class;
    let mut images = Array2::zeros((n, spec.image_dim));
    let mut texts = Array2::zeros((n, spec.text_dim));
    let mut labels = Vec::with_capacity(n);
    for class in 0..spec.classes {
        for k in 0..spec.per_class {
            let row = class * spec.per_class + k;
            for (j, c) in image_centers[class].iter().enumerate() {
                let e: f64 = StandardNormal.sample(&mut rng);
                images[[row, j]] = F::from_f64_lossy(c + spec.noise * e);
            }
            for (j, c) in text_centers[class].iter().enumerate() {
                let e: f64 = StandardNormal.sample(&mut rng);
                texts[[row, j]] = F::from_f64_lossy(c + spec.noise * e);
            }
            labels.push(class);
        }
    }
    PairedDataset::new(
        FeatureMatrix::new(images)?,
        FeatureMatrix::new(texts)?,
        LabelVector::new(labels, spec.classes)?,
    )
}

/// Stratified split of instance indices. Each class contributes
/// `round(train_fraction * count)` training instances and at least one of
/// each side; both index lists come back sorted.
pub fn split_indices(
    labels: &LabelVector,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(MdcrError::InvalidArgument(format!(
            "train fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); labels.class_count()];
    for (i, &l) in labels.as_slice().iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (class, mut members) in by_class.into_iter().enumerate() {
        let count = members.len();
        if count == 0 {
            continue;
        }
        let take = (train_fraction * count as f64).round() as usize;
        if count < 2 || take == 0 || take == count {
            return Err(MdcrError::InsufficientInstances {
                class,
                count,
                needed: smallest_splittable(train_fraction),
            });
        }
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..take]);
        test.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

fn smallest_splittable(train_fraction: f64) -> usize {
    (2..)
        .find(|&n| {
            let take = (train_fraction * n as f64).round() as usize;
            take >= 1 && take < n
        })
        .expect("some class size admits a split for 0 < fraction < 1")
}

pub fn split<F: Scalar>(
    dataset: &PairedDataset<F>,
    train_fraction: f64,
    seed: u64,
) -> Result<(PairedDataset<F>, PairedDataset<F>)> {
    let (train, test) = split_indices(dataset.labels(), train_fraction, seed)?;
    Ok((dataset.select(&train)?, dataset.select(&test)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn spec(classes: usize, per_class: usize, sep: f64, noise: f64) -> SyntheticSpec {
        SyntheticSpec {
            classes,
            per_class,
            image_dim: 6,
            text_dim: 4,
            separation: sep,
            noise,
            seed: 11,
        }
    }

    #[test]
    fn zero_noise_collapses_to_centers() {
        let d: PairedDataset<f64> = make_synthetic(&spec(2, 1, 10.0, 0.0)).unwrap();
        for m in [d.images().as_array(), d.texts().as_array()] {
            let diff = &m.row(0) - &m.row(1);
            let dist = diff.dot(&diff).sqrt();
            assert!((dist - 10.0).abs() < 1e-9, "center distance {dist}");
        }
        assert_eq!(d.labels().as_slice(), &[0, 1]);
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let a: PairedDataset<f64> = make_synthetic(&spec(3, 4, 5.0, 0.3)).unwrap();
        let b: PairedDataset<f64> = make_synthetic(&spec(3, 4, 5.0, 0.3)).unwrap();
        assert_eq!(a, b);
        let mut other = spec(3, 4, 5.0, 0.3);
        other.seed = 12;
        let c: PairedDataset<f64> = make_synthetic(&other).unwrap();
        assert_ne!(a, c);
    }

    /// Independent oracle: centroids estimated from the data itself.
    #[test]
    fn nearest_center_classifies_perfectly() {
        let mut s = spec(5, 30, 10.0, 0.1);
        s.image_dim = 8;
        s.text_dim = 5;
        let d: PairedDataset<f64> = make_synthetic(&s).unwrap();
        for m in [d.images().as_array(), d.texts().as_array()] {
            let mut centroids = Array2::<f64>::zeros((5, m.ncols()));
            for (row, &l) in m.rows().into_iter().zip(d.labels().as_slice()) {
                let mut c = centroids.row_mut(l);
                c += &(&row / 30.0);
            }
            for (row, &l) in m.rows().into_iter().zip(d.labels().as_slice()) {
                let nearest = (0..5)
                    .min_by(|&a, &b| {
                        let da = (&row - &centroids.row(a)).mapv(|v| v * v).sum();
                        let db = (&row - &centroids.row(b)).mapv(|v| v * v).sum();
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                assert_eq!(nearest, l);
            }
        }
    }

    #[test]
    fn invalid_spec_rejected() {
        assert!(make_synthetic::<f64>(&spec(0, 1, 1.0, 0.0)).is_err());
        assert!(make_synthetic::<f64>(&spec(2, 1, 1.0, -1.0)).is_err());
    }

    #[test]
    fn split_seventy_thirty_per_class() {
        let d: PairedDataset<f64> = make_synthetic(&spec(3, 10, 5.0, 0.5)).unwrap();
        let (train, test) = split(&d, 0.7, 5).unwrap();
        assert_eq!(train.labels().histogram(), vec![7, 7, 7]);
        assert_eq!(test.labels().histogram(), vec![3, 3, 3]);
    }

    #[test]
    fn split_partitions_indices() {
        let d: PairedDataset<f64> = make_synthetic(&spec(4, 9, 5.0, 0.5)).unwrap();
        let (train, test) = split_indices(d.labels(), 0.6, 3).unwrap();
        let a: BTreeSet<_> = train.iter().copied().collect();
        let b: BTreeSet<_> = test.iter().copied().collect();
        assert!(a.is_disjoint(&b));
        let union: BTreeSet<_> = a.union(&b).copied().collect();
        assert_eq!(union, (0..36).collect());
        assert_eq!(split_indices(d.labels(), 0.6, 3).unwrap(), (train, test));
    }

    #[test]
    fn split_rejects_degenerate_requests() {
        let d: PairedDataset<f64> = make_synthetic(&spec(2, 10, 5.0, 0.5)).unwrap();
        assert!(split(&d, 1.0, 0).is_err());
        assert!(split(&d, 0.0, 0).is_err());
        let tiny: PairedDataset<f64> = make_synthetic(&spec(2, 1, 5.0, 0.5)).unwrap();
        assert!(matches!(
            split(&tiny, 0.5, 0),
            Err(MdcrError::InsufficientInstances { count: 1, .. })
        ));
    }
}
