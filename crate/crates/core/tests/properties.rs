use proptest::prelude::*;
use xmodal_core::models::{wise_ft, ClassifierState};
use xmodal_core::store::{decode_store, encode_store, normalize, FeatureRecord, FeatureStore, Manifest};
use xmodal_core::Modality;

fn unit_vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, dim).prop_filter_map("nonzero", |v| normalize(&v).ok())
}

fn record(dim: usize) -> impl Strategy<Value = FeatureRecord> {
    (any::<u32>(), 0u32..20, 0usize..3, any::<u16>(), prop::collection::vec(-1e3f32..1e3, dim)).prop_map(
        |(sample_id, class_id, m, view_id, vector)| FeatureRecord {
            sample_id,
            class_id,
            modality: Modality::ALL[m],
            view_id,
            vector,
        },
    )
}

proptest! {
    #[test]
    fn store_bytes_round_trip(records in prop::collection::vec(record(6), 0..40)) {
        let mut manifest = Manifest { normalized: false, ..Manifest::default() };
        manifest.classes = (0..20).map(|c| (c, format!("c{c}"))).collect();
        let mut store = FeatureStore::new(6, manifest);
        let mut seen = std::collections::HashSet::new();
        store.records = records.into_iter().filter(|r| seen.insert(r.key())).collect();
        let bytes = encode_store(&store).unwrap();
        let back = decode_store(&bytes, store.manifest.clone()).unwrap();
        prop_assert_eq!(back.records.len(), store.records.len());
        for (a, b) in store.records.iter().zip(&back.records) {
            prop_assert_eq!(a.key(), b.key());
            prop_assert!(a.vector.iter().zip(&b.vector).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        prop_assert_eq!(encode_store(&back).unwrap(), bytes);
    }

    #[test]
    fn normalize_is_idempotent_and_scale_invariant(
        v in prop::collection::vec(-100.0f64..100.0, 1..32),
        k in 1e-3f64..1e3,
    ) {
        prop_assume!(v.iter().any(|x| x.abs() > 1e-6));
        let n = normalize(&v).unwrap();
        let nn = normalize(&n).unwrap();
        let scaled: Vec<f64> = v.iter().map(|x| x * k).collect();
        let ns = normalize(&scaled).unwrap();
        prop_assert!((n.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        for ((a, b), c) in n.iter().zip(&nn).zip(&ns) {
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn predictions_ignore_positive_feature_scale(
        rows in prop::collection::vec(unit_vector(5), 2..6),
        x in unit_vector(5),
        k in 0.01f64..100.0,
    ) {
        let ids: Vec<u32> = (0..rows.len() as u32).collect();
        let state = ClassifierState::from_rows(ids, &rows, 100.0).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| v * k).collect();
        let (a, b) = (state.scores(&x).unwrap(), state.scores(&scaled).unwrap());
        let best = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let runner_up = a.iter().cloned().filter(|v| *v < best).fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(best - runner_up > 1e-9);
        prop_assert_eq!(state.predict(&x).unwrap(), state.predict(&scaled).unwrap());
        prop_assert_eq!(b.len(), a.len());
    }

    #[test]
    fn wise_ft_is_affine_in_alpha(
        a in prop::collection::vec(-1.0f64..1.0, 12),
        b in prop::collection::vec(-1.0f64..1.0, 12),
        alpha in 0.0f64..=1.0,
    ) {
        let rows = |w: &[f64]| w.chunks(4).map(<[f64]>::to_vec).collect::<Vec<_>>();
        let learned = ClassifierState::from_rows(vec![0, 1, 2], &rows(&a), 100.0).unwrap();
        let zeroshot = ClassifierState::from_rows(vec![0, 1, 2], &rows(&b), 100.0).unwrap();
        let mixed = wise_ft(&learned, &zeroshot, alpha).unwrap();
        for i in 0..12 {
            let expected = (1.0 - alpha) * a[i] + alpha * b[i];
            prop_assert!((mixed.weights[i] - expected).abs() < 1e-12);
        }
    }
}
