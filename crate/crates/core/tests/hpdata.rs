use std::fs;

use hpfed::hpdata::{
    generate_synthetic_lho, load_reports, minmax_scale, read_space, select_top_fraction, write_reports,
    ClientReport, HpDataError, HpDim, HpRecord, HpSpace,
};
use proptest::prelude::*;

fn space(dims: &[(&str, f64, f64)]) -> HpSpace {
    HpSpace::new(
        dims.iter()
            .map(|&(n, l, u)| HpDim {
                name: n.into(),
                lower: l,
                upper: u,
            })
            .collect(),
    )
    .unwrap()
}

fn lr_mom() -> HpSpace {
    space(&[("lr", 0.001, 0.5), ("mom", 0.0, 0.99)])
}

fn report(id: &str, recs: &[(&[f64], f64)]) -> ClientReport {
    ClientReport {
        client_id: id.into(),
        records: recs
            .iter()
            .map(|(v, a)| HpRecord {
                values: v.to_vec(),
                accuracy: *a,
            })
            .collect(),
    }
}

const ONE_RECORD: &str = r#"{"client_id": "c0",
 "space": {"dims": [{"name": "lr", "lower": 0.001, "upper": 0.5},
                    {"name": "mom", "lower": 0.0, "upper": 0.99}]},
 "records": [{"values": [0.1, 0.9], "accuracy": 0.92}]}"#;

#[test]
fn loads_a_single_record_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c0.json"), ONE_RECORD).unwrap();
    let s = read_space(dir.path()).unwrap();
    assert_eq!(s, lr_mom());
    let reports = load_reports(dir.path(), &s).unwrap();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0].client_id, "c0");
    assert_eq!(reports[0].records, vec![HpRecord {
        values: vec![0.1, 0.9],
        accuracy: 0.92
    }]);
}

#[test]
fn range_errors_name_client_and_field() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c0.json"), ONE_RECORD.replace("0.92", "1.3")).unwrap();
    match load_reports(dir.path(), &lr_mom()).unwrap_err() {
        HpDataError::Range { client, field, .. } => {
            assert_eq!(client, "c0");
            assert!(field.contains("accuracy"), "{field}");
        }
        e => panic!("unexpected {e:?}"),
    }

    fs::write(dir.path().join("c0.json"), ONE_RECORD.replace("[0.1, 0.9]", "[0.7, 0.9]")).unwrap();
    match load_reports(dir.path(), &lr_mom()).unwrap_err() {
        HpDataError::Range { field, .. } => assert!(field.contains("lr"), "{field}"),
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn malformed_and_empty_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("broken.json"), "{\"client_id\": \"x\", ").unwrap();
    match load_reports(dir.path(), &lr_mom()).unwrap_err() {
        HpDataError::Malformed { client, .. } => assert_eq!(client, "broken"),
        e => panic!("unexpected {e:?}"),
    }
    fs::write(
        dir.path().join("broken.json"),
        ONE_RECORD.replace(r#"[{"values": [0.1, 0.9], "accuracy": 0.92}]"#, "[]"),
    )
    .unwrap();
    assert_eq!(
        load_reports(dir.path(), &lr_mom()).unwrap_err(),
        HpDataError::Empty { client: "c0".into() }
    );
    fs::write(dir.path().join("broken.json"), ONE_RECORD.replace("\"accuracy\"", "\"acc\"")).unwrap();
    match load_reports(dir.path(), &lr_mom()).unwrap_err() {
        HpDataError::Malformed { client, msg } => {
            assert_eq!(client, "c0");
            assert!(msg.contains("acc"), "{msg}");
        }
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn generated_files_round_trip() {
    let s = lr_mom();
    let reports = generate_synthetic_lho(&s, 10, 0.2, 3);
    let dir = tempfile::tempdir().unwrap();
    write_reports(dir.path(), &s, &reports).unwrap();
    let back = load_reports(dir.path(), &s).unwrap();
    assert_eq!(back, reports);
    let mut ids: Vec<_> = back.iter().map(|r| r.client_id.clone()).collect();
    ids.dedup();
    assert_eq!(ids.len(), 10);
}

#[test]
fn space_mismatch_and_duplicates_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.json"), ONE_RECORD).unwrap();
    fs::write(dir.path().join("b.json"), ONE_RECORD).unwrap();
    assert_eq!(
        load_reports(dir.path(), &lr_mom()).unwrap_err(),
        HpDataError::DuplicateClient("c0".into())
    );
    let other = space(&[("lr", 0.0, 1.0), ("mom", 0.0, 0.99)]);
    assert!(matches!(
        load_reports(dir.path(), &other).unwrap_err(),
        HpDataError::SpaceMismatch { .. }
    ));
}

#[test]
fn minmax_examples() {
    let s = space(&[("lr", 0.001, 0.5)]);
    let r = report("c", &[(&[0.001], 0.5), (&[0.5], 0.6)]);
    let sc = minmax_scale(&r, &s);
    assert_eq!(sc.records[0].values, vec![0.0]);
    assert_eq!(sc.records[1].values, vec![1.0]);
    assert_eq!(sc.records[1].accuracy, 0.6);

    let s = space(&[("lr", 0.0, 0.5)]);
    let sc = minmax_scale(&report("c", &[(&[0.1], 0.5)]), &s);
    assert!((sc.records[0].values[0] - 0.2).abs() < 1e-15);
}

#[test]
fn top_fraction_examples() {
    let accs: Vec<f64> = (0..20).map(|i| ((i * 7) % 20) as f64 / 20.0).collect();
    let recs: Vec<(Vec<f64>, f64)> = accs.iter().enumerate().map(|(i, &a)| (vec![i as f64 / 20.0], a)).collect();
    let r = ClientReport {
        client_id: "c".into(),
        records: recs
            .iter()
            .map(|(v, a)| HpRecord {
                values: v.clone(),
                accuracy: *a,
            })
            .collect(),
    };
    let top = select_top_fraction(&r, 0.05);
    assert_eq!(top.records.len(), 1);
    let mut by_acc = r.records.clone();
    by_acc.sort_by(|a, b| b.accuracy.partial_cmp(&a.accuracy).unwrap());
    assert_eq!(top.records[0], by_acc[0]);

    let all = select_top_fraction(&r, 1.0);
    let key = |v: &[HpRecord]| {
        let mut k: Vec<String> = v.iter().map(|x| format!("{:?}", x)).collect();
        k.sort();
        k
    };
    assert_eq!(key(&all.records), key(&r.records));

    let tied = report("c", &[(&[0.3, 0.1], 0.8), (&[0.1, 0.9], 0.8), (&[0.1, 0.5], 0.8)]);
    let out = select_top_fraction(&tied, 0.34);
    // ceil(0.34 · 3) = 2 records, smallest HP vectors first.
    assert_eq!(out.records.len(), 2);
    assert_eq!(out.records[0].values, vec![0.1, 0.5]);
    assert_eq!(out.records[1].values, vec![0.1, 0.9]);
    assert_eq!(select_top_fraction(&tied, 0.3).records[0].values, vec![0.1, 0.5]);
}

fn argmax(r: &ClientReport) -> Vec<f64> {
    r.records
        .iter()
        .fold(None::<&HpRecord>, |b, x| match b {
            Some(b) if b.accuracy >= x.accuracy => Some(b),
            _ => Some(x),
        })
        .unwrap()
        .values
        .clone()
}

#[test]
fn synthetic_generator_properties() {
    let s = lr_mom();
    for seed in [0, 1, 99] {
        let reps = generate_synthetic_lho(&s, 8, 0.0, seed);
        let first = argmax(&reps[0]);
        assert!(reps.iter().all(|r| argmax(r) == first));
        assert!(reps.iter().all(|r| r.records.len() == 49 && r.validate(&s).is_ok()));
    }
    assert_eq!(generate_synthetic_lho(&s, 5, 0.3, 4), generate_synthetic_lho(&s, 5, 0.3, 4));
    assert_ne!(generate_synthetic_lho(&s, 5, 0.3, 4), generate_synthetic_lho(&s, 5, 0.3, 5));

    let reps = generate_synthetic_lho(&s, 10, 0.3, 11);
    let maxes: Vec<Vec<f64>> = reps.iter().map(|r| s.scale_point(&argmax(r))).collect();
    let var: f64 = (0..2)
        .map(|j| {
            let m = maxes.iter().map(|p| p[j]).sum::<f64>() / 10.0;
            maxes.iter().map(|p| (p[j] - m).powi(2)).sum::<f64>() / 9.0
        })
        .sum();
    assert!(var > 0.0);
}

proptest! {
    #[test]
    fn scaling_round_trips(lo in -100.0f64..100.0, width in 1e-3f64..100.0, t in 0.0f64..=1.0) {
        let s = space(&[("x", lo, lo + width)]);
        let v = lo + t * width;
        let back = s.unscale_point(&s.scale_point(&[v]))[0];
        prop_assert!((back - v).abs() <= 1e-12 * v.abs().max(width));
    }

    #[test]
    fn top_fraction_is_a_sub_multiset(
        accs in prop::collection::vec(0u8..5, 1..40),
        frac in 0.01f64..=1.0,
    ) {
        let r = ClientReport {
            client_id: "c".into(),
            records: accs.iter().enumerate().map(|(i, &a)| HpRecord {
                values: vec![(i % 3) as f64],
                accuracy: a as f64 / 4.0,
            }).collect(),
        };
        let top = select_top_fraction(&r, frac);
        let want = ((frac * accs.len() as f64) - 1e-9).ceil().max(1.0) as usize;
        prop_assert_eq!(top.records.len(), want);
        let mut pool = r.records.clone();
        for x in &top.records {
            let pos = pool.iter().position(|y| y == x);
            prop_assert!(pos.is_some());
            pool.remove(pos.unwrap());
        }
        let min_kept = top.records.iter().map(|x| x.accuracy).fold(f64::INFINITY, f64::min);
        prop_assert!(pool.iter().all(|x| x.accuracy <= min_kept));
    }
}
