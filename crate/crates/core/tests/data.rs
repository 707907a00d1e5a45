use std::fs;

use proptest::prelude::*;
use scmrl_core::data::{
    batch_iter, load_dataset, normalize_view, read_labels, read_matrix_csv, save_dataset, synth_multiview, DatasetManifest,
    MultiViewDataset, Normalization, SynthSpec, ViewEntry,
};
use scmrl_core::nn::Matrix;
use scmrl_core::ErrorKind;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-1e3..1e3f64, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

#[test]
fn save_then_load_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth_multiview(&SynthSpec { n: 45, dims: vec![4, 7, 3], seed: 3, ..SynthSpec::default() }).unwrap();
    let manifest = save_dataset(dir.path(), &ds, Normalization::None).unwrap();
    let back = load_dataset(&manifest).unwrap();
    assert_eq!(back, ds);

    let manifest = save_dataset(&dir.path().join("mm"), &ds, Normalization::MinMax).unwrap();
    assert_eq!(load_dataset(&manifest).unwrap(), ds.normalized(Normalization::MinMax));
}

#[test]
fn headers_are_skipped_and_columns_checked() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.csv");
    fs::write(&p, "a,b\n1,2\n3,4.5\n").unwrap();
    let m = read_matrix_csv(&p, Some(2)).unwrap();
    assert_eq!(m, Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.5]]).unwrap());

    let err = read_matrix_csv(&p, Some(3)).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Data);
    assert!(err.to_string().contains("line 2"), "{err}");

    fs::write(&p, "1,2\n3,oops\n").unwrap();
    let err = read_matrix_csv(&p, None).unwrap_err().to_string();
    assert!(err.contains("line 2") && err.contains("column 2") && err.contains("oops"), "{err}");

    fs::write(&p, "1,2\n3,NaN\n").unwrap();
    assert_eq!(read_matrix_csv(&p, None).unwrap_err().kind(), ErrorKind::Data);
}

#[test]
fn label_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("y.csv");
    fs::write(&p, "label\n0\n2\n1\n").unwrap();
    assert_eq!(read_labels(&p, 3).unwrap(), vec![0, 2, 1]);
    let err = read_labels(&p, 2).unwrap_err().to_string();
    assert!(err.contains("line 3") && err.contains("out of range"), "{err}");
    fs::write(&p, "0\n1.5\n").unwrap();
    assert!(read_labels(&p, 3).unwrap_err().to_string().contains("line 2"));
}

#[test]
fn mismatched_view_lengths_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.csv"), "1\n2\n3\n").unwrap();
    fs::write(dir.path().join("b.csv"), "1\n2\n").unwrap();
    let manifest = DatasetManifest {
        name: "bad".into(),
        k: 2,
        normalization: Normalization::None,
        labels: None,
        views: vec![ViewEntry { path: "a.csv".into(), dim: 1 }, ViewEntry { path: "b.csv".into(), dim: 1 }],
    };
    let path = dir.path().join("m.toml");
    manifest.write(&path).unwrap();
    let err = load_dataset(&path).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Data);
    let text = err.to_string();
    assert!(text.contains("b.csv") && text.contains('2') && text.contains('3'), "{text}");

    let missing = dir.path().join("nothing.toml");
    assert!(load_dataset(&missing).is_err());
}

#[test]
fn in_memory_validation() {
    let a = Matrix::zeros(3, 2);
    let b = Matrix::zeros(4, 2);
    assert!(MultiViewDataset::new("x", vec![a.clone(), b], None, 2).is_err());
    assert!(MultiViewDataset::new("x", vec![a.clone()], Some(vec![0, 1, 2]), 2).is_err());
    let mut bad = a.clone();
    bad.set(0, 0, f64::INFINITY);
    assert!(MultiViewDataset::new("x", vec![bad], None, 2).is_err());
    assert!(MultiViewDataset::new("x", vec![a], Some(vec![0, 1, 1]), 2).is_ok());
}

#[test]
fn synthetic_fixture_shape_and_balance() {
    let ds = synth_multiview(&SynthSpec::default()).unwrap();
    assert_eq!((ds.n(), ds.m(), ds.k(), ds.dims()), (600, 2, 3, vec![20, 30]));
    let labels = ds.labels().unwrap();
    for c in 0..3 {
        assert_eq!(labels.iter().filter(|&&l| l == c).count(), 200);
    }
    assert_eq!(ds, synth_multiview(&SynthSpec::default()).unwrap());
    assert_ne!(ds, synth_multiview(&SynthSpec { seed: 1, ..SynthSpec::default() }).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalization_is_idempotent(x in matrix(7, 4), mode in prop::sample::select(vec![Normalization::MinMax, Normalization::ZScore, Normalization::None])) {
        let once = normalize_view(&x, mode);
        let twice = normalize_view(&once, mode);
        for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn minmax_lands_in_unit_interval(x in matrix(9, 3)) {
        let y = normalize_view(&x, Normalization::MinMax);
        prop_assert!(y.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn batches_partition_the_samples(n in 1usize..200, b in 1usize..64, seed in any::<u64>(), epoch in 0u64..5, shuffle in any::<bool>()) {
        let batches = batch_iter(n, b, seed, epoch, shuffle);
        let mut all: Vec<usize> = batches.iter().flatten().copied().collect();
        prop_assert!(batches.iter().all(|bt| !bt.is_empty() && bt.len() <= b));
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(batches, batch_iter(n, b, seed, epoch, shuffle));
    }
}
