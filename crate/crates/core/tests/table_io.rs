use std::fs;

use dose_core::table::{manifest_path, select_columns, split_holdout};
use dose_core::{read_stat_table, write_stat_table, DoseError, Reducer, Role, StatSchema, StatTable};

fn ensemble_table() -> StatTable {
    let schema = StatSchema::new(
        vec!["ll".into(), "rate".into()],
        vec!["a".into(), "b".into()],
        vec![true, false],
        None,
    )
    .unwrap();
    // columns: ll@a, ll@b, rate
    let values = vec![1.0, 3.0, 0.5, -2.0, 0.0, 0.25, 0.1, 0.30000000000000004, 1e-300];
    StatTable::new(schema, Role::Test, vec!["x".into(), "y".into(), "z".into()], values).unwrap()
}

#[test]
fn round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    let t = ensemble_table();
    write_stat_table(&t, &p).unwrap();
    let text = fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("sample_id,ll@a,ll@b,rate\n"));
    let back = read_stat_table(&p, Some(Role::Test)).unwrap();
    assert_eq!(back, t);
    assert!(matches!(
        read_stat_table(&p, Some(Role::Train)),
        Err(DoseError::RoleMismatch { .. })
    ));

    // rewriting gives the same bytes
    let p2 = dir.path().join("u.csv");
    write_stat_table(&back, &p2).unwrap();
    assert_eq!(fs::read(&p).unwrap(), fs::read(&p2).unwrap());
}

#[test]
fn read_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    fs::write(&p, "sample_id,a\nx,1\n").unwrap();
    assert!(matches!(read_stat_table(&p, None), Err(DoseError::MissingManifest(_))));

    fs::write(
        manifest_path(&p),
        r#"{"role":"train","statistic_names":["a"],"model_ids":["m0"],"domain_meta":null}"#,
    )
    .unwrap();
    assert_eq!(read_stat_table(&p, None).unwrap().n_rows(), 1);

    fs::write(&p, "sample_id,a\nx,1\nx,2\n").unwrap();
    assert!(matches!(
        read_stat_table(&p, None),
        Err(DoseError::DuplicateSampleId(_))
    ));
    fs::write(&p, "sample_id,a\nx,NaN\n").unwrap();
    assert!(matches!(
        read_stat_table(&p, None),
        Err(DoseError::NonFiniteValue { row: 0, col: 0 })
    ));
    fs::write(&p, "sample_id,b\nx,1\n").unwrap();
    assert!(matches!(read_stat_table(&p, None), Err(DoseError::SchemaMismatch(_))));
}

#[test]
fn holdout_split_is_seeded_and_order_preserving() {
    let n = 2000;
    let t = StatTable::from_columns(
        StatSchema::plain(&["v"]).unwrap(),
        Role::Train,
        "r",
        &[(0..n).map(f64::from).collect()],
    )
    .unwrap();
    let (tr, va) = split_holdout(&t, 0.1, 4).unwrap();
    assert_eq!(va.n_rows(), 200);
    assert_eq!(tr.n_rows(), 1800);
    assert_eq!(va.role(), Role::Val);
    let v = va.column(0);
    assert!(v.windows(2).all(|w| w[0] < w[1]));
    let (_, again) = split_holdout(&t, 0.1, 4).unwrap();
    assert_eq!(again, va);
    let (_, other) = split_holdout(&t, 0.1, 5).unwrap();
    assert_ne!(other, va);
}

#[test]
fn ensemble_reduction() {
    let t = ensemble_table();
    let mean = select_columns(&t, &["ll", "rate"], &Reducer::EnsembleMean).unwrap();
    assert_eq!(mean.column_names(), vec!["ll", "rate"]);
    assert_eq!(mean.column(0), vec![2.0, -1.0, 0.2]);
    let b = select_columns(&t, &["ll"], &Reducer::SingleModel("b".into())).unwrap();
    assert_eq!(b.column(0), vec![3.0, 0.0, 0.30000000000000004]);
    assert!(select_columns(&t, &["nope"], &Reducer::EnsembleMean).is_err());
}
