use std::path::Path;

use hashlab::datasets::{FeatureKind, ImageShape, LabeledDataset};
use hashlab::deep::TrainConfig;
use hashlab::model::*;
use hashlab::numerics::{Matrix, Rng};
use hashlab::Error;

const TOY: ImageShape = ImageShape { channels: 1, height: 12, width: 12 };

fn features(n: usize, d: usize, seed: u64) -> LabeledDataset {
    let mut rng = Rng::new(seed);
    let x = Matrix::from_fn(n, d, |_, _| rng.gaussian());
    let labels = (0..n).map(|i| (i % 3) as u8).collect();
    LabeledDataset::new(x, labels, FeatureKind::Precomputed, None).unwrap()
}

fn pixels(n: usize, seed: u64) -> LabeledDataset {
    let mut rng = Rng::new(seed);
    let x = Matrix::from_fn(n, TOY.len(), |_, _| rng.uniform());
    let labels = (0..n).map(|i| (i % 4) as u8).collect();
    LabeledDataset::new(x, labels, FeatureKind::RawPixels, Some(TOY)).unwrap()
}

fn quick() -> FitOptions {
    FitOptions {
        train: TrainConfig { epochs: 1, batch_size: 8, ..TrainConfig::default() },
        ..FitOptions::default()
    }
}

#[test]
fn method_names_roundtrip() {
    for m in Method::ALL {
        assert_eq!(m.name().parse::<Method>().unwrap(), m);
        assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
    }
    assert!("ksh".parse::<Method>().is_err());
}

#[test]
fn every_method_roundtrips_losslessly() {
    let data = features(60, 10, 0);
    let probe = features(7, 10, 1).features;
    let fitter = Fitter::new(&data, quick());
    for method in [Method::Lsh, Method::Pcah, Method::Itq, Method::Sh, Method::Sklsh] {
        let model = fitter.fit(method, 8, 3).unwrap().model;
        assert_eq!((model.method(), model.bits(), model.input_dim()), (method, 8, 10));
        let bytes = model.to_bytes();
        let back = StoredModel::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, model, "{method}");
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.encode(&probe).unwrap(), model.encode(&probe).unwrap());
    }
    let img = pixels(16, 2);
    let fitted = fit(Method::Deep, &img, 8, 0, &quick()).unwrap();
    assert_eq!(fitted.log.len(), 1);
    let model = fitted.model;
    assert!(model.preprocessor.is_none());
    let back = StoredModel::from_bytes(&model.to_bytes(), Path::new("mem")).unwrap();
    assert_eq!(back, model);
    assert_eq!(back.encode(&img.features).unwrap(), model.encode(&img.features).unwrap());
}

#[test]
fn refits_are_byte_identical() {
    let data = features(50, 6, 4);
    let a = fit(Method::Itq, &data, 4, 0, &FitOptions::default()).unwrap().model.to_bytes();
    let b = fit(Method::Itq, &data, 4, 0, &FitOptions::default()).unwrap().model.to_bytes();
    assert_eq!(a, b);
    let c = fit(Method::Itq, &data, 4, 1, &FitOptions::default()).unwrap().model.to_bytes();
    assert_ne!(a, c);
}

#[test]
fn file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.hlmd");
    let model = fit(Method::Sh, &features(40, 5, 5), 6, 0, &FitOptions::default()).unwrap().model;
    model.write(&path).unwrap();
    assert_eq!(StoredModel::read(&path).unwrap(), model);
    assert!(matches!(StoredModel::read(dir.path().join("missing")), Err(Error::Io { .. })));
}

#[test]
fn corrupt_containers_are_rejected() {
    let bytes = fit(Method::Lsh, &features(20, 5, 6), 4, 0, &FitOptions::default()).unwrap().model.to_bytes();
    let p = Path::new("mem");
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(matches!(StoredModel::from_bytes(&magic, p), Err(Error::Format { .. })));
    let mut version = bytes.clone();
    version[4] = 9;
    assert!(matches!(StoredModel::from_bytes(&version, p), Err(Error::Format { .. })));
    for cut in [3, 8, bytes.len() / 2, bytes.len() - 1] {
        assert!(StoredModel::from_bytes(&bytes[..cut], p).is_err(), "cut {cut}");
    }
    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(matches!(StoredModel::from_bytes(&trailing, p), Err(Error::Format { .. })));
}

#[test]
fn fit_validates_its_inputs() {
    let data = features(30, 5, 7);
    assert!(fit(Method::Lsh, &data, 0, 0, &FitOptions::default()).is_err());
    assert!(fit(Method::Lsh, &data, 257, 0, &FitOptions::default()).is_err());
    // PCA-based methods cannot exceed the feature dimension.
    assert!(fit(Method::Pcah, &data, 6, 0, &FitOptions::default()).is_err());
    assert!(fit(Method::Itq, &data, 6, 0, &FitOptions::default()).is_err());
    // The network needs raw pixels.
    assert!(fit(Method::Deep, &data, 8, 0, &quick()).is_err());
    let model = fit(Method::Lsh, &data, 4, 0, &FitOptions::default()).unwrap().model;
    let err = model.encode(&Matrix::zeros(2, 7)).unwrap_err().to_string();
    assert!(err.contains('5') && err.contains('7'), "{err}");
}
