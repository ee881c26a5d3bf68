use mdcr::{
    load_label_file, load_matrix, save_label_file, save_matrix, FeatureMatrix, LabelMap, MatrixFormat,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample() -> FeatureMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut m: Array2<f64> = Array2::from_shape_fn((7, 5), |_| rng.random_range(-1e3..1e3));
    m[[0, 0]] = 1e-300;
    m[[1, 1]] = -0.0;
    m[[2, 2]] = 1.0 / 3.0;
    FeatureMatrix::new(m).unwrap()
}

#[test]
fn binary_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    let m = sample();
    save_matrix(&path, &m, MatrixFormat::Binary).unwrap();
    assert_eq!(MatrixFormat::detect(&path).unwrap(), MatrixFormat::Binary);
    let back: FeatureMatrix<f64> = load_matrix(&path, MatrixFormat::Binary).unwrap();
    let bits = |f: &FeatureMatrix<f64>| f.as_array().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&m));
}

#[test]
fn text_round_trip_within_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    let m = sample();
    save_matrix(&path, &m, MatrixFormat::Text).unwrap();
    assert_eq!(MatrixFormat::detect(&path).unwrap(), MatrixFormat::Text);
    let back: FeatureMatrix<f64> = load_matrix(&path, MatrixFormat::Text).unwrap();
    for (a, b) in back.as_array().iter().zip(m.as_array()) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
}

#[test]
fn labels_survive_files_and_remapping() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("y.txt");
    save_label_file(&path, &[2, 0, 1, 2]).unwrap();
    let raw = load_label_file(&path).unwrap();
    assert_eq!(raw, vec![2, 0, 1, 2]);
    let map = LabelMap::fit(&raw).unwrap();
    assert!(map.is_identity());
    assert_eq!(map.apply(&raw).unwrap().as_slice(), &[2, 0, 1, 2]);

    let shifted = LabelMap::fit(&[1, 10, 5]).unwrap();
    assert!(!shifted.is_identity());
    assert_eq!(shifted.apply(&[10, 1, 5]).unwrap().as_slice(), &[2, 0, 1]);
}

#[test]
fn malformed_inputs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "2 2\n1 2\n3\n").unwrap();
    assert!(load_matrix::<f64>(&bad, MatrixFormat::Text).is_err());
    std::fs::write(&bad, "1 2\n1 NaN\n").unwrap();
    assert!(load_matrix::<f64>(&bad, MatrixFormat::Text).is_err());
    let truncated = dir.path().join("t.bin");
    let mut bytes = Vec::new();
    mdcr::data::write_binary(&mut bytes, sample().view()).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&truncated, bytes).unwrap();
    assert!(load_matrix::<f64>(&truncated, MatrixFormat::Binary).is_err());
    assert!(load_matrix::<f64>(&dir.path().join("missing.bin"), MatrixFormat::Binary).is_err());
}
