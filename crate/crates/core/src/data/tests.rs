use super::*;
use crate::numerics::Rng;

fn labeled(labels: &[usize], k: usize) -> Dataset {
    Dataset::new("t", Matrix::zeros(labels.len(), 1), Some(labels.to_vec()), k).unwrap()
}

#[test]
fn empirical_prior_examples() {
    assert_eq!(empirical_prior(&labeled(&[0, 0, 1, 1], 2)).unwrap().as_slice(), &[0.5, 0.5]);
    assert_eq!(empirical_prior(&labeled(&[0, 0, 0, 1], 2)).unwrap().as_slice(), &[0.75, 0.25]);
    assert_eq!(empirical_prior(&labeled(&[1, 1], 3)).unwrap().as_slice(), &[0.0, 1.0, 0.0]);
    let unlabeled = Dataset::new("u", Matrix::zeros(2, 1), None, 2).unwrap();
    assert!(matches!(empirical_prior(&unlabeled), Err(crate::Error::Contract(_))));
}

#[test]
fn dataset_rejects_out_of_range_labels() {
    assert!(Dataset::new("bad", Matrix::zeros(2, 1), Some(alloc::vec![0, 2]), 2).is_err());
    assert!(Dataset::new("bad", Matrix::zeros(2, 1), Some(alloc::vec![0]), 2).is_err());
}

fn pair_from(source: Matrix, target: Matrix) -> DomainPair {
    let n_s = source.rows();
    let n_t = target.rows();
    DomainPair::new(
        Dataset::new("s", source, Some(alloc::vec![0; n_s]), 2).unwrap(),
        TargetTrain::seal(Dataset::new("t", target.clone(), None, 2).unwrap()),
        Dataset::new("tt", target, Some(alloc::vec![1; n_t]), 2).unwrap(),
    )
    .unwrap()
}

#[test]
fn standardize_uses_union_statistics_and_zeroes_constant_features() {
    let source = Matrix::from_rows(&[[0.1, 1.0], [0.1, 3.0]]).unwrap();
    let target = Matrix::from_rows(&[[0.1, 5.0], [0.1, 7.0]]).unwrap();
    let (pair, s) = standardize(&pair_from(source, target)).unwrap();
    assert_eq!(s.mean[1], 4.0);
    assert!((s.std[1] - libm::sqrt(5.0)).abs() < 1e-15);
    assert!(pair.source.features.row_iter().all(|r| r[0] == 0.0));
    assert!(pair.target_train.features().row_iter().all(|r| r[0] == 0.0));
    let col: alloc::vec::Vec<f64> = pair.target_test.features.row_iter().map(|r| r[1]).collect();
    assert!((col[0] - 1.0 / libm::sqrt(5.0)).abs() < 1e-15);
}

#[test]
fn standardize_is_idempotent() {
    let mut rng = Rng::new(9);
    let mut src = Matrix::zeros(20, 3);
    let mut tgt = Matrix::zeros(15, 3);
    for x in src.as_mut_slice().iter_mut().chain(tgt.as_mut_slice()) {
        *x = rng.uniform(-5.0, 10.0);
    }
    let (once, _) = standardize(&pair_from(src, tgt)).unwrap();
    let (twice, _) = standardize(&once).unwrap();
    for (a, b) in once.source.features.as_slice().iter().zip(twice.source.features.as_slice()) {
        assert!((a - b).abs() <= 1e-9);
    }
    for (a, b) in once.target_test.features.as_slice().iter().zip(twice.target_test.features.as_slice()) {
        assert!((a - b).abs() <= 1e-9);
    }
}

#[test]
fn standardizer_rejects_width_mismatch() {
    let s = Standardizer::fit(&[&Matrix::zeros(2, 3)]).unwrap();
    assert!(s.apply(&Matrix::zeros(2, 4)).is_err());
}

#[test]
fn target_labels_need_oracle_access() {
    let pair = pair_from(Matrix::zeros(2, 1), Matrix::zeros(3, 1));
    assert_eq!(pair.target_train.len(), 3);
    // seal() was given an unlabeled dataset, so even oracle access finds nothing
    assert!(pair.target_train.unseal(OracleAccess::grant()).is_err());
    let labeled = TargetTrain::seal(labeled(&[1, 0, 1], 2));
    assert_eq!(labeled.unseal(OracleAccess::grant()).unwrap().labels.unwrap(), [1, 0, 1]);
}

#[test]
fn domain_pair_rejects_width_mismatch() {
    let source = Dataset::new("s", Matrix::zeros(2, 2), Some(alloc::vec![0, 1]), 2).unwrap();
    let target = Dataset::new("t", Matrix::zeros(2, 3), Some(alloc::vec![0, 1]), 2).unwrap();
    assert!(DomainPair::new(source, TargetTrain::seal(target.clone()), target).is_err());
}

#[test]
fn proportional_counts_are_exact() {
    assert_eq!(proportional_counts(1000, &[0.7, 0.3]), [700, 300]);
    assert_eq!(proportional_counts(10, &[1.0, 1.0, 1.0]), [4, 3, 3]);
    assert_eq!(proportional_counts(5, &[1.0, 0.0]), [5, 0]);
    assert_eq!(proportional_counts(0, &[0.8, 0.2]), [0, 0]);
}

#[test]
fn two_moons_skew_and_determinism() {
    let mut cfg = TwoMoonsConfig::new(1000, 35.0, 4);
    cfg.label_skew = Some(alloc::vec![0.7, 0.3]);
    let pair = synth_two_moons(&cfg).unwrap();
    assert_eq!(pair.target_test.class_counts().unwrap(), [700, 300]);
    let train = pair.target_train.unseal(OracleAccess::grant()).unwrap();
    assert_eq!(train.class_counts().unwrap(), [700, 300]);
    assert_eq!(pair.source.class_counts().unwrap(), [500, 500]);
    assert_eq!(synth_two_moons(&cfg).unwrap(), pair);
    cfg.label_skew = Some(alloc::vec![0.7, 0.2]);
    assert!(synth_two_moons(&cfg).is_err());
}

#[test]
fn two_moons_rotation_preserves_radius_distribution() {
    // rotation about the origin preserves norms; with zero noise the norm
    // multiset of a rotated draw equals that of the unrotated draw
    let mut a = TwoMoonsConfig::new(50, 0.0, 3);
    a.noise_std = 0.0;
    let mut b = a.clone();
    b.rotation_degrees = 90.0;
    let pa = synth_two_moons(&a).unwrap();
    let pb = synth_two_moons(&b).unwrap();
    let norms = |m: &Matrix| -> alloc::vec::Vec<f64> {
        let mut v: alloc::vec::Vec<f64> = m.row_iter().map(|r| libm::sqrt(r[0] * r[0] + r[1] * r[1])).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    for (x, y) in norms(&pa.target_test.features).iter().zip(norms(&pb.target_test.features)) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn gauss_shift_identity_and_golden_row() {
    let cfg = GaussShiftConfig {
        num_classes: 3,
        dim: 4,
        mean_shift: 0.0,
        cov_scale: 1.0,
        label_skew: None,
        n: 300,
        seed: 42,
    };
    let pair = synth_gauss_shift(&cfg).unwrap();
    assert_eq!(pair.width(), 4);
    assert_eq!(pair.source.class_counts().unwrap(), [100, 100, 100]);
    // no shift: per-class means of source and target agree within sampling noise
    let class_mean = |d: &Dataset, k: usize| -> alloc::vec::Vec<f64> {
        let labels = d.labels().unwrap();
        let rows: alloc::vec::Vec<&[f64]> = d.features.row_iter().zip(labels).filter(|(_, &y)| y == k).map(|(r, _)| r).collect();
        (0..4).map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / rows.len() as f64).collect()
    };
    for k in 0..3 {
        let a = class_mean(&pair.source, k);
        let b = class_mean(&pair.target_test, k);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 0.5, "class {k}: {x} vs {y}");
        }
    }
    assert_eq!(pair.source.features.row(0), GOLDEN_GAUSS_ROW);
}

const GOLDEN_GAUSS_ROW: &[f64] = &[
    -0.15960427554599108,
    -2.207309576916028,
    -0.17916827482727116,
    -0.05766768403800304,
];
