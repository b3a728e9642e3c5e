use std::path::PathBuf;

use hashlab::datasets::*;
use hashlab::numerics::{Matrix, Rng};
use proptest::prelude::*;

fn data(n: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = Rng::new(seed);
    Matrix::from_fn(n, d, |_, _| 3.0 + 2.0 * rng.gaussian())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn each_preprocessing_stage_is_idempotent(n in 2usize..30, d in 1usize..12, seed in any::<u64>()) {
        let x = data(n, d, seed);
        // Centering: refitting on centered data finds a zero mean.
        let (c1, _) = preprocess(&x, true, false);
        let (c2, _) = preprocess(&c1, true, false);
        prop_assert!(c2.sub(&c1).unwrap().max_abs() <= 1e-12 * (1.0 + x.max_abs()));
        // Unit norm.
        let (u1, _) = preprocess(&x, false, true);
        let (u2, _) = preprocess(&u1, false, true);
        prop_assert!(u2.sub(&u1).unwrap().max_abs() <= 1e-12);
        // Full pipeline with the stored mean of the first pass: a second
        // pass normalizes already-unit rows again.
        let pre = Preprocessor::fit(&x, true, true);
        let once = pre.apply(&x).unwrap();
        let norm_only = Preprocessor { mean: None, unit_norm: true };
        prop_assert!(norm_only.apply(&once).unwrap().sub(&once).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn split_is_disjoint_and_exhaustive(n in 2usize..500, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let q = 1 + ((n - 2) as f64 * frac) as usize;
        let s = split_query(n, q, seed).unwrap();
        prop_assert_eq!(s.query_indices.len(), q);
        let mut all: Vec<usize> = s.query_indices.iter().chain(&s.database_indices).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(split_query(n, q, seed).unwrap(), s);
    }

    #[test]
    fn feature_files_roundtrip(n in 0usize..20, d in 1usize..20, seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.hlfm");
        let m = Matrix::from_fn(n, d, |i, j| f64::from((data(1, 1, seed ^ (i * 31 + j) as u64).get(0, 0)) as f32));
        write_feature_file(&p, &m).unwrap();
        prop_assert_eq!(load_feature_file(&p).unwrap(), m);
    }

    #[test]
    fn label_files_roundtrip(labels in proptest::collection::vec(0u8..10, 0..100)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("y.hllb");
        write_label_file(&p, &labels).unwrap();
        prop_assert_eq!(load_label_file(&p).unwrap(), labels);
    }
}

fn mnist_root() -> Option<PathBuf> {
    let root = std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"));
    mnist_paths(&root, Split::Test).0.exists().then_some(root)
}

#[test]
fn mnist_survives_a_feature_file_roundtrip() {
    let Some(root) = mnist_root() else {
        eprintln!("MNIST not found; set {DATA_DIR_ENV} to run this check");
        return;
    };
    let (images, labels) = mnist_paths(&root, Split::Test);
    let set = load_mnist(images, labels).unwrap();
    assert_eq!((set.len(), set.dim()), (10_000, 784));
    let dir = tempfile::tempdir().unwrap();
    write_feature_file(dir.path().join("f"), &set.features).unwrap();
    let back = load_feature_file(dir.path().join("f")).unwrap();
    let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&set.features));
}
