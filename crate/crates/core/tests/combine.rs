use hpfed::combine::{
    combine_dbscan, combine_mean, combine_median, combine_top, combine_trimmed_mean, k_distances,
    reference_dbscan, suggest_dbscan_params, Center, CombineError,
};
use hpfed::hpdata::{ClientReport, HpDim, HpRecord, HpSpace};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

mod common;

fn unit(d: usize) -> HpSpace {
    HpSpace::new(
        (0..d)
            .map(|j| HpDim {
                name: format!("x{j}"),
                lower: 0.0,
                upper: 1.0,
            })
            .collect(),
    )
    .unwrap()
}

fn one(id: &str, values: Vec<f64>, acc: f64) -> ClientReport {
    ClientReport {
        client_id: id.into(),
        records: vec![HpRecord { values, accuracy: acc }],
    }
}

fn from_points(points: &[(Vec<f64>, f64)]) -> Vec<ClientReport> {
    points
        .iter()
        .enumerate()
        .map(|(i, (v, a))| one(&format!("c{i}"), v.clone(), *a))
        .collect()
}

#[test]
fn mean_examples() {
    let r = vec![one("a", vec![0.1, 0.9], 0.5), one("b", vec![0.1, 0.9], 0.7)];
    assert_eq!(combine_mean(&r).unwrap().values, vec![0.1, 0.9]);
    let r = vec![one("a", vec![0.1], 0.5), one("b", vec![0.3], 0.7)];
    assert!((combine_mean(&r).unwrap().values[0] - 0.2).abs() < 1e-15);

    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let reports: Vec<ClientReport> = (0..10)
        .map(|c| ClientReport {
            client_id: format!("c{c}"),
            records: (0..49)
                .map(|_| HpRecord {
                    values: vec![rng.random(), rng.random()],
                    accuracy: rng.random(),
                })
                .collect(),
        })
        .collect();
    let flat: Vec<&HpRecord> = reports.iter().flat_map(|r| &r.records).collect();
    for j in 0..2 {
        let mut acc = 0.0;
        for r in &flat {
            acc += r.values[j];
        }
        let oracle = acc / flat.len() as f64;
        assert!((combine_mean(&reports).unwrap().values[j] - oracle).abs() < 1e-12);
    }
    assert_eq!(combine_mean(&[]).unwrap_err(), CombineError::NoRecords);
}

#[test]
fn median_examples() {
    let r = vec![one("a", vec![0.9], 0.5), one("b", vec![0.1], 0.5), one("c", vec![0.2], 0.5)];
    assert_eq!(combine_median(&r).unwrap().values, vec![0.2]);
    let r = vec![one("a", vec![0.1], 0.5), one("b", vec![0.3], 0.5)];
    assert!((combine_median(&r).unwrap().values[0] - 0.2).abs() < 1e-15);

    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let vals: Vec<f64> = (0..101).map(|_| rng.random()).collect();
    let r: Vec<ClientReport> = vals.iter().map(|&v| one("x", vec![v], 0.5)).collect();
    // Oracle: the value with exactly 50 smaller entries.
    let oracle = *vals
        .iter()
        .find(|&&v| vals.iter().filter(|&&w| w < v).count() == 50)
        .unwrap();
    assert_eq!(combine_median(&r).unwrap().values[0], oracle);
}

#[test]
fn trimmed_mean_examples() {
    let r: Vec<ClientReport> = [0.0, 0.5, 0.5, 0.5, 10.0].iter().map(|&v| one("x", vec![v], 0.5)).collect();
    assert!((combine_trimmed_mean(&r, 0.2).unwrap().values[0] - 0.5).abs() < 1e-15);

    let vals: Vec<f64> = (1..=10).map(|i| i as f64).collect();
    let r: Vec<ClientReport> = vals.iter().map(|&v| one("x", vec![v], 0.5)).collect();
    // Drops exactly 1 and 10.
    assert_eq!(combine_trimmed_mean(&r, 0.1).unwrap().values[0], 44.0 / 8.0);
    assert_eq!(combine_trimmed_mean(&r, 0.0).unwrap().values, combine_mean(&r).unwrap().values);

}

#[test]
fn trimmed_mean_rejects_trimming_everything() {
    let r: Vec<ClientReport> = [1.0, 2.0, 3.0, 4.0].iter().map(|&v| one("x", vec![v], 0.5)).collect();
    assert_eq!(
        combine_trimmed_mean(&r, 0.5).unwrap_err(),
        CombineError::InvalidParam("trim fraction 0.5 not in [0, 0.5)".into())
    );
    let r: Vec<ClientReport> = [1.0, 2.0].iter().map(|&v| one("x", vec![v], 0.5)).collect();
    assert!(combine_trimmed_mean(&r, 0.49).is_ok());
    assert_eq!(
        combine_trimmed_mean(&r, 0.5 - 1e-12).unwrap_err(),
        CombineError::OverTrimmed { k: 1, n: 2 }
    );
    let r: Vec<ClientReport> = [1.0, 2.0, 3.0].iter().map(|&v| one("x", vec![v], 0.5)).collect();
    assert!(combine_trimmed_mean(&r, 0.4).is_ok());
}

#[test]
fn top_examples() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let reports: Vec<ClientReport> = (0..3)
        .map(|c| ClientReport {
            client_id: format!("c{c}"),
            records: (0..7)
                .map(|_| HpRecord {
                    values: vec![rng.random()],
                    accuracy: rng.random(),
                })
                .collect(),
        })
        .collect();
    assert_eq!(
        combine_top(&reports, 1.0, Center::Mean).unwrap().values,
        combine_mean(&reports).unwrap().values
    );

    let single = ClientReport {
        client_id: "c".into(),
        records: (0..20)
            .map(|i| HpRecord {
                values: vec![i as f64 / 20.0],
                accuracy: ((i * 13) % 20) as f64 / 20.0,
            })
            .collect(),
    };
    let best = single
        .records
        .iter()
        .max_by(|a, b| a.accuracy.partial_cmp(&b.accuracy).unwrap())
        .unwrap();
    assert_eq!(combine_top(&[single.clone()], 0.05, Center::Mean).unwrap().values, best.values);

    let two = vec![
        ClientReport {
            client_id: "a".into(),
            records: vec![
                HpRecord { values: vec![0.1], accuracy: 0.9 },
                HpRecord { values: vec![0.8], accuracy: 0.2 },
            ],
        },
        ClientReport {
            client_id: "b".into(),
            records: vec![
                HpRecord { values: vec![0.3], accuracy: 0.95 },
                HpRecord { values: vec![0.7], accuracy: 0.1 },
            ],
        },
    ];
    let m = combine_top(&two, 0.5, Center::Median).unwrap();
    assert!((m.values[0] - 0.2).abs() < 1e-15);
}

#[test]
fn dbscan_examples() {
    let pts = vec![
        vec![0.0, 0.0],
        vec![0.01, 0.0],
        vec![0.0, 0.01],
        vec![0.9, 0.9],
        vec![0.91, 0.9],
        vec![0.9, 0.91],
    ];
    let l = reference_dbscan(&pts, 0.05, 3);
    assert_eq!(l, vec![Some(0), Some(0), Some(0), Some(1), Some(1), Some(1)]);
    assert_eq!(l, common::dbscan(&pts, 0.05, 3));

    let far: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
    assert!(reference_dbscan(&far, 0.5, 2).iter().all(Option::is_none));
    assert_eq!(reference_dbscan(&[vec![0.3]], 0.1, 1), vec![Some(0)]);
}

#[test]
fn dbscan_matches_oracle_on_random_instances() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    for _ in 0..200 {
        let n = rng.random_range(1..=60);
        let d = rng.random_range(1..=3);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
        let eps = rng.random_range(0.02..0.4);
        let min_pts = rng.random_range(1..=6);
        assert_eq!(reference_dbscan(&pts, eps, min_pts), common::dbscan(&pts, eps, min_pts));
    }
}

#[test]
fn dbscan_is_permutation_invariant() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = rng.random_range(2..40);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
        let labels = reference_dbscan(&pts, 0.15, 3);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let l2 = reference_dbscan(&shuffled, 0.15, 3);
        // Same partition: i ~ j before iff perm-images agree after.
        for a in 0..n {
            for b in 0..n {
                let before = labels[perm[a]].is_some() && labels[perm[a]] == labels[perm[b]];
                let after = l2[a].is_some() && l2[a] == l2[b];
                assert_eq!(before, after);
            }
            assert_eq!(labels[perm[a]].is_none(), l2[a].is_none());
        }
    }
}

#[test]
fn combine_dbscan_examples() {
    let s = unit(2);
    let mut pts = vec![
        (vec![0.3, 0.6], 0.8),
        (vec![0.31, 0.6], 0.8),
        (vec![0.3, 0.61], 0.8),
        (vec![0.29, 0.6], 0.8),
        (vec![0.95, 0.05], 0.99),
    ];
    let hp = combine_dbscan(&from_points(&pts), &s, 0.05, 3, 1.0).unwrap();
    let cx = (0.3 + 0.31 + 0.3 + 0.29) / 4.0;
    let cy = (0.6 + 0.6 + 0.61 + 0.6) / 4.0;
    assert!((hp.values[0] - cx).abs() < 1e-12 && (hp.values[1] - cy).abs() < 1e-12);

    let same: Vec<(Vec<f64>, f64)> = (0..4).map(|_| (vec![0.25, 0.75], 0.9)).collect();
    assert_eq!(combine_dbscan(&from_points(&same), &s, 0.01, 2, 1.0).unwrap().values, vec![0.25, 0.75]);

    // Small accurate cluster beats a large less accurate one.
    pts = (0..6).map(|i| (vec![0.1 + 0.005 * i as f64, 0.1], 0.7)).collect();
    pts.extend((0..3).map(|i| (vec![0.8 + 0.005 * i as f64, 0.8], 0.9)));
    let hp = combine_dbscan(&from_points(&pts), &s, 0.05, 3, 1.0).unwrap();
    assert!((hp.values[0] - 0.805).abs() < 1e-12);
    assert_eq!(hp.mean_accuracy, Some(0.9));

    // Argmax is invariant under a monotone map of accuracies.
    let warped: Vec<(Vec<f64>, f64)> = pts.iter().map(|(v, a)| (v.clone(), a * a * a)).collect();
    assert_eq!(
        combine_dbscan(&from_points(&warped), &s, 0.05, 3, 1.0).unwrap().values,
        hp.values
    );

    let scattered: Vec<(Vec<f64>, f64)> = (0..5).map(|i| (vec![i as f64 / 5.0, 0.5], 0.5)).collect();
    assert_eq!(
        combine_dbscan(&from_points(&scattered), &s, 0.05, 2, 1.0).unwrap_err(),
        CombineError::AllNoise
    );
}

#[test]
fn suggested_params() {
    let line: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.0]).collect();
    let (eps, min_pts) = suggest_dbscan_params(&line, 2).unwrap();
    assert_eq!(min_pts, 4);
    // k = 5. Second differences peak first at index 5, the end of the flat run.
    let kd = k_distances(&line, 5);
    assert_eq!(kd, vec![3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 4.0, 4.0, 5.0, 5.0]);
    assert_eq!(eps, 3.0);

    let mut blob: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 6) as f64 * 0.01, (i / 6) as f64 * 0.01]).collect();
    blob.push(vec![5.0, 5.0]);
    blob.push(vec![-5.0, 5.0]);
    let (eps, _) = suggest_dbscan_params(&blob, 2).unwrap();
    assert!(eps >= 0.01 && eps < 1.0, "{eps}");

    assert!(matches!(
        suggest_dbscan_params(&blob[..5], 2),
        Err(CombineError::TooFewPoints { needed: 6, got: 5 })
    ));
}

proptest! {
    #[test]
    fn plain_strategies_stay_in_bounds(vals in prop::collection::vec(0.0f64..1.0, 1..30)) {
        let r: Vec<ClientReport> = vals.iter().map(|&v| one("x", vec![v], v)).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for hp in [
            combine_mean(&r).unwrap(),
            combine_median(&r).unwrap(),
            combine_trimmed_mean(&r, 0.2).unwrap(),
            combine_top(&r, 0.3, Center::Mean).unwrap(),
            combine_top(&r, 0.3, Center::Median).unwrap(),
        ] {
            prop_assert!(hp.values[0] >= lo - 1e-12 && hp.values[0] <= hi + 1e-12);
        }
        prop_assert_eq!(combine_trimmed_mean(&r, 0.0).unwrap().values, combine_mean(&r).unwrap().values);
    }
}
