use binaural_ssl::brainstem::{Nucleus, SpikeMatrix};
use binaural_ssl::classifier::TrainConfig;
use binaural_ssl::pipeline::{train_from_evidence, Evidence, Frontend, SslConfig, SslModel, MODEL_VERSION};
use binaural_ssl::{seed, Error};
use rand::Rng;

fn random_matrix(rng: &mut impl Rng, kind: Nucleus, rows: usize, cols: usize) -> SpikeMatrix {
    let r: Vec<Vec<u32>> = (0..rows).map(|_| (0..cols).map(|_| rng.random_range(0..12)).collect()).collect();
    SpikeMatrix::from_rows(kind, &r)
}

fn model() -> SslModel {
    let cfg = SslConfig { mlp: TrainConfig { epochs: 3, ..TrainConfig::default() }, ..SslConfig::default() };
    let frontend = Frontend::new(&cfg).unwrap();
    let (rows, cols) = (frontend.filterbank.channel_count(), frontend.grid.bins());
    let mut rng = seed::rng(11);
    let evidence: Vec<Evidence> = (0..39)
        .map(|n| Evidence {
            mso: random_matrix(&mut rng, Nucleus::Mso, rows, cols),
            lso: random_matrix(&mut rng, Nucleus::Lso, rows, cols),
            angle: cfg.angles.angles[n % 13],
        })
        .collect();
    train_from_evidence(&evidence, &frontend, &cfg).unwrap().0
}

#[test]
fn round_trip_is_exact() {
    let m = model();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    m.save(&path).unwrap();
    let back = SslModel::load(&path).unwrap();
    assert_eq!(back, m);
    let (rows, cols) = (m.frontend.filterbank.channel_count(), m.frontend.grid.bins());
    let mut rng = seed::rng(12);
    for _ in 0..100 {
        let mso = random_matrix(&mut rng, Nucleus::Mso, rows, cols);
        let lso = random_matrix(&mut rng, Nucleus::Lso, rows, cols);
        let (a, b) = (m.classify_evidence(&mso, &lso).unwrap(), back.classify_evidence(&mso, &lso).unwrap());
        let bits = |p: &[f64]| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!((a.class, bits(&a.probabilities)), (b.class, bits(&b.probabilities)));
    }
    // saving again reproduces the file byte for byte
    let again = dir.path().join("again.json");
    back.save(&again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn corrupted_or_truncated_files_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model().save(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let bad = dir.path().join("bad.json");
    let mut rng = seed::rng(13);
    for _ in 0..40 {
        let mut b = bytes.clone();
        let at = rng.random_range(0..b.len());
        b[at] = if b[at] == b'7' { b'3' } else { b'7' };
        std::fs::write(&bad, &b).unwrap();
        assert!(SslModel::load(&bad).is_err(), "byte {at} changed");
    }
    std::fs::write(&bad, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(SslModel::load(&bad), Err(Error::Json(_))));
}

#[test]
fn other_versions_are_refused_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model().save(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let tag = format!("\"version\":{MODEL_VERSION}");
    assert!(text.starts_with(&format!("{{{tag}")));
    std::fs::write(&path, text.replacen(&tag, "\"version\":0", 1)).unwrap();
    let err = SslModel::load(&path).unwrap_err();
    assert!(matches!(&err, Error::VersionMismatch { found, expected } if found == "0" && *expected == MODEL_VERSION));
    assert!(err.to_string().contains(&MODEL_VERSION.to_string()));
    assert!(matches!(SslModel::load(dir.path().join("absent.json")), Err(Error::MissingInput(_))));
}
