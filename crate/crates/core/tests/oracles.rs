use dose_core::kde::{fit_kde, kde_log_density, BandwidthRule};
use dose_core::metrics::auroc;
use dose_core::model::{DoseModel, EstimatorSpec};
use dose_core::scores::{likelihood_score, tt_score};
use dose_core::stats::mean;
use dose_core::synthetic::{
    gaussian_dos_pdf, inject_superfluous, inject_superfluous_range, sample_flow_toy, sample_gaussian_stats,
    FlowToySpec, GaussianOracle, InjectMode,
};
use dose_core::typicality::{verify_bound_mc, Gaussian};
use dose_core::{Reducer, Role, StatSchema, StatTable};

fn loglik(t: &StatTable) -> StatTable {
    let ll = t.column_by_name("nll").unwrap().iter().map(|v| -v).collect();
    StatTable::new(
        StatSchema::plain(&["ll"]).unwrap(),
        t.role(),
        t.sample_ids().to_vec(),
        ll,
    )
    .unwrap()
}

#[test]
fn gaussian_moments_near_closed_form() {
    let o = GaussianOracle::new(50).unwrap();
    let t = sample_gaussian_stats(&o, 20_000, 3).unwrap();
    assert!((mean(&t.column_by_name("nll").unwrap()) - o.mean_nll()).abs() < 0.3);
    assert!((mean(&t.column_by_name("norm").unwrap()) - o.mean_norm()).abs() < 0.05);
    assert!(mean(&t.column_by_name("coord0").unwrap()).abs() < 0.05);
}

#[test]
fn dos_kde_tracks_gamma_density() {
    let o = GaussianOracle::new(20).unwrap();
    let t = sample_gaussian_stats(&o, 5000, 11).unwrap();
    let nll = StatTable::from_columns(
        StatSchema::plain(&["nll"]).unwrap(),
        Role::Train,
        "u",
        &[t.column_by_name("nll").unwrap()],
    )
    .unwrap();
    let kde = fit_kde(&nll, &BandwidthRule::Scott).unwrap();
    let c = o.nll_offset();
    let peak = gaussian_dos_pdf(&o, c + 9.0).unwrap();
    for k in 0..50 {
        let u = c + 5.0 + 0.2 * k as f64;
        let est = kde_log_density(&kde, &[u]).unwrap().exp();
        assert!((est - gaussian_dos_pdf(&o, u).unwrap()).abs() < 0.15 * peak, "u = {u}");
    }
}

#[test]
fn flow_toy_separates_only_with_dose() {
    let toy = sample_flow_toy(&FlowToySpec::default(), 0).unwrap();
    let (tr, te, od) = (loglik(&toy.train), loglik(&toy.test), loglik(&toy.ood));
    let lik = auroc(
        &likelihood_score(&te, "ll").unwrap(),
        &likelihood_score(&od, "ll").unwrap(),
    )
    .unwrap();
    let tt = auroc(&tt_score(&te, "ll", &tr).unwrap(), &tt_score(&od, "ll", &tr).unwrap()).unwrap();
    assert!((0.45..=0.55).contains(&lik), "likelihood {lik}");
    assert!((0.45..=0.55).contains(&tt), "tt {tt}");

    let stats = vec!["latent".to_string(), "jac".to_string()];
    for spec in [
        EstimatorSpec::default(),
        EstimatorSpec::Svm {
            nu: 0.5,
            gamma: Default::default(),
        },
    ] {
        let m = DoseModel::fit(&toy.train, &stats, &Reducer::EnsembleMean, &spec).unwrap();
        let a = auroc(&m.score(&toy.test).unwrap(), &m.score(&toy.ood).unwrap()).unwrap();
        assert!(a >= 0.99, "{spec:?}: {a}");
        // the model file reproduces the scores exactly
        let back = DoseModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.score(&toy.ood).unwrap(), m.score(&toy.ood).unwrap());
    }
}

#[test]
fn bound_holds_for_matched_standard_normals() {
    for eps in [0.1, 0.5, 1.0] {
        let c = verify_bound_mc(&Gaussian::standard(), &Gaussian::standard(), 1, eps, 20_000, 5).unwrap();
        assert_eq!(c.rhs, 0.5);
        assert!(c.holds(), "{c:?}");
    }
}

#[test]
fn injection_composes_and_obfuscatory_hurts_more() {
    let toy = sample_flow_toy(&FlowToySpec::default(), 2).unwrap();
    let stats = vec!["latent".to_string(), "jac".to_string()];
    let m = DoseModel::fit(&toy.train, &stats, &Reducer::EnsembleMean, &EstimatorSpec::default()).unwrap();
    let (si, so) = (m.score(&toy.test).unwrap(), m.score(&toy.ood).unwrap());

    let (a, b) = inject_superfluous(&si, &so, 30, InjectMode::Uninformative, 9).unwrap();
    let (a1, b1) = inject_superfluous(&si, &so, 12, InjectMode::Uninformative, 9).unwrap();
    let (a2, b2) = inject_superfluous_range(&a1, &b1, 12, 18, InjectMode::Uninformative, 9).unwrap();
    assert_eq!(a, a2);
    assert_eq!(b, b2);

    let (oi, oo) = inject_superfluous(&si, &so, 1000, InjectMode::Obfuscatory, 9).unwrap();
    let (ui, uo) = inject_superfluous(&si, &so, 1000, InjectMode::Uninformative, 9).unwrap();
    assert!(auroc(&oi, &oo).unwrap() < auroc(&ui, &uo).unwrap());
}
