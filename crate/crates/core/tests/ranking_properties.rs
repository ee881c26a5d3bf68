use mdcr::eval::{average_precision_at, evaluate, EvalOptions};
use mdcr::{
    average_precision, cross_retrieve, mean_ap, project, rank, EmbeddedSet, FeatureMatrix, LabelVector,
    Modality, ProjectionPair, RankedResult, Task,
};
use mdcr::retrieval::Direction;
use ndarray::{Array1, Array2};
use proptest::collection::vec;
use proptest::prelude::*;

/// AP from its definition: mean over relevant ranks k of
/// (relevant items among the first k) / k.
fn brute_force_ap(rel: &[u8]) -> f64 {
    let relevant: Vec<usize> = (0..rel.len()).filter(|&k| rel[k] == 1).collect();
    if relevant.is_empty() {
        return 0.0;
    }
    let total: f64 = relevant
        .iter()
        .map(|&k| {
            let hits = rel[..=k].iter().filter(|&&r| r == 1).count();
            hits as f64 / (k + 1) as f64
        })
        .sum();
    total / relevant.len() as f64
}

fn points(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    vec(-5.0..5.0f64, rows * cols).prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

fn labelled(points: Array2<f64>, labels: Vec<usize>, classes: usize) -> EmbeddedSet<f64> {
    EmbeddedSet {
        points,
        source: Modality::Text,
        labels: Some(LabelVector::new(labels, classes).unwrap()),
    }
}

/// Householder reflection `I − 2uuᵀ/‖u‖²`, an orthogonal matrix.
fn householder(u: &Array1<f64>) -> Array2<f64> {
    let d = u.len();
    let norm2 = u.dot(u);
    Array2::from_shape_fn((d, d), |(i, j)| f64::from(u8::from(i == j)) - 2.0 * u[i] * u[j] / norm2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn ap_equals_definition(rel in vec(0u8..=1, 0..=50)) {
        prop_assert_eq!(average_precision(&rel), brute_force_ap(&rel));
    }

    #[test]
    fn ap_one_iff_relevant_items_lead(rel in vec(0u8..=1, 1..=30)) {
        let has_relevant = rel.contains(&1);
        let leading = rel.iter().skip_while(|&&r| r == 1).all(|&r| r == 0);
        prop_assert_eq!(average_precision(&rel) == 1.0, has_relevant && leading);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ap_is_bounded_by_the_sorted_ranking(rel in vec(0u8..=1, 1..=30), top in 1usize..=30) {
        // Relevant items first is the best ordering.
        let mut best = rel.clone();
        best.sort_by(|a, b| b.cmp(a));
        let ap = average_precision(&rel);
        prop_assert!((0.0..=1.0).contains(&ap));
        prop_assert!(ap <= average_precision(&best));
        prop_assert!(average_precision_at(&rel, Some(top)) <= 1.0);
    }

    #[test]
    fn map_is_mean_of_per_query_ap(rels in vec(vec(0u8..=1, 1..=15), 1..=12)) {
        let results: Vec<RankedResult<f64>> = rels
            .iter()
            .enumerate()
            .map(|(i, r)| RankedResult {
                query_index: i,
                query_label: i % 3,
                ordering: (0..r.len()).collect(),
                distances: vec![0.0; r.len()],
                relevance: r.clone(),
            })
            .collect();
        let report = evaluate(&results, &EvalOptions::default()).unwrap();
        let mean = rels.iter().map(|r| brute_force_ap(r)).sum::<f64>() / rels.len() as f64;
        prop_assert!((report.map - mean).abs() <= 1e-12);
        prop_assert_eq!(report.per_query_ap.len(), rels.len());
    }

    #[test]
    fn rank_matches_sort_oracle(gallery in points(20, 3), query in vec(-5.0..5.0f64, 3), labels in vec(0usize..3, 20)) {
        let mut labels = labels;
        labels[..3].copy_from_slice(&[0, 1, 2]);
        let set = labelled(gallery.clone(), labels.clone(), 3);
        let q = Array1::from(query);
        let r = rank(q.view(), 0, 1, &set).unwrap();

        let mut oracle: Vec<(f64, usize)> = gallery
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| (row.iter().zip(q.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), i))
            .collect();
        oracle.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        prop_assert_eq!(&r.ordering, &oracle.iter().map(|o| o.1).collect::<Vec<_>>());
        for (d, o) in r.distances.iter().zip(&oracle) {
            prop_assert!((d - o.0.sqrt()).abs() <= 1e-12);
        }
        prop_assert!(r.distances.windows(2).all(|w| w[0] <= w[1]));
        for (&i, &rel) in r.ordering.iter().zip(&r.relevance) {
            prop_assert_eq!(rel, u8::from(labels[i] == 1));
        }
    }

    #[test]
    fn ranking_survives_orthogonal_maps(gallery in points(12, 4), query in vec(-5.0..5.0f64, 4), u in vec(0.1..1.0f64, 4)) {
        let labels: Vec<usize> = (0..12).map(|i| i % 2).collect();
        let q = Array1::from(query);
        let before = rank(q.view(), 0, 0, &labelled(gallery.clone(), labels.clone(), 2)).unwrap();
        let h = householder(&Array1::from(u));
        let after = rank(h.dot(&q).view(), 0, 0, &labelled(gallery.dot(&h.t()), labels, 2)).unwrap();
        for (a, b) in before.distances.iter().zip(&after.distances) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        // Orderings can only differ where two distances are within rounding.
        for (i, (a, b)) in before.ordering.iter().zip(&after.ordering).enumerate() {
            if a != b {
                prop_assert!((before.distances[i] - after.distances[i]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn distance_is_symmetric(a in vec(-5.0..5.0f64, 3), b in vec(-5.0..5.0f64, 3)) {
        let pa = Array2::from_shape_vec((1, 3), a.clone()).unwrap();
        let pb = Array2::from_shape_vec((1, 3), b.clone()).unwrap();
        let ab = rank(Array1::from(a).view(), 0, 0, &labelled(pb, vec![0], 1)).unwrap();
        let ba = rank(Array1::from(b).view(), 0, 0, &labelled(pa, vec![0], 1)).unwrap();
        prop_assert_eq!(ab.distances[0], ba.distances[0]);
    }

    #[test]
    fn projection_is_per_row_product(features in points(6, 5), m in points(3, 5)) {
        let f = FeatureMatrix::new(features.clone()).unwrap();
        let embedded = project(&f, m.view(), Modality::Image).unwrap();
        prop_assert_eq!(embedded.points.dim(), (6, 3));
        for i in 0..6 {
            for k in 0..3 {
                let expected: f64 = (0..5).map(|j| m[[k, j]] * features[[i, j]]).sum();
                prop_assert!((embedded.points[[i, k]] - expected).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn worked_ap_example() {
    assert!((average_precision(&[1, 0, 1]) - 0.833_333).abs() <= 1e-6);
    assert!((brute_force_ap(&[1, 0, 1]) - 5.0 / 6.0).abs() <= 1e-15);
}

#[test]
fn directions_use_opposite_projections() {
    let v = ndarray::array![[1.0, 0.0], [0.0, 1.0]];
    let w = ndarray::array![[0.0, 2.0], [2.0, 0.0]];
    let pair = ProjectionPair::new(v, w, Task::Unified).unwrap();
    let images = FeatureMatrix::new(ndarray::array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
    let texts = FeatureMatrix::new(ndarray::array![[0.0, 0.5], [0.5, 0.0]]).unwrap();
    let labels = LabelVector::new(vec![0, 1], 2).unwrap();
    for direction in [Direction::I2T, Direction::T2I] {
        let (q, g) = match direction {
            Direction::I2T => (&images, &texts),
            Direction::T2I => (&texts, &images),
        };
        let results = cross_retrieve(&pair, (q, &labels), (g, &labels), direction).unwrap();
        assert_eq!(mean_ap(&results).unwrap().map, 1.0, "{direction}");
        assert!(results.iter().all(|r| r.distances[0] == 0.0));
    }
}
