use super::*;
use crate::kernels::KernelModel;
use crate::measures::{BaseMeasure, StickBreakingTruncation};
use crate::transport::{BoundedDomain, DiscreteMeasure};
use serde_json::json;

fn run(kind: ExperimentKind, seed: u64, params: Value) -> ExperimentRecord {
    run_experiment(&ExperimentConfig::new(kind, seed, params)).unwrap()
}

fn line(lo: f64, hi: f64) -> BoundedDomain {
    BoundedDomain::new(vec![lo], vec![hi]).unwrap()
}

#[test]
fn kinds_round_trip_names() {
    for k in ExperimentKind::ALL {
        assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        assert_eq!(serde_json::to_value(k).unwrap(), json!(k.name()));
    }
}

#[test]
fn unknown_experiment() {
    let cfg = ExperimentConfig {
        experiment: "nope".into(),
        seed: Some(1),
        params: Value::Null,
        output_path: None,
    };
    assert!(matches!(run_experiment(&cfg), Err(Error::UnknownExperiment(s)) if s == "nope"));
}

#[test]
fn seed_is_required() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Tail, 1, Value::Null);
    cfg.seed = None;
    assert!(matches!(run_experiment(&cfg), Err(Error::MissingParameter(_))));
}

#[test]
fn unknown_parameter_is_rejected() {
    let cfg = ExperimentConfig::new(ExperimentKind::Tail, 1, json!({"n_mcc": 5}));
    let err = run_experiment(&cfg).unwrap_err();
    assert!(err.to_string().contains("n_mcc"), "{err}");
}

#[test]
fn module_errors_carry_context() {
    let cfg = ExperimentConfig::new(ExperimentKind::Tail, 1, json!({"cases": [{"k": 0, "eps": 0.01}]}));
    let err = run_experiment(&cfg).unwrap_err();
    assert!(matches!(err, Error::Context { .. }));
    assert!(err.to_string().starts_with("experiment tail"), "{err}");
}

fn small_tail() -> Value {
    json!({"alphas": [1.0], "cases": [{"k": 10, "eps": 0.01}], "n_mc": 20000})
}

#[test]
fn tail_example_passes() {
    let rec = run(ExperimentKind::Tail, 11, small_tail());
    assert_eq!(rec.verdicts.len(), 1);
    assert_eq!(rec.verdict("C3").unwrap().status, Status::Pass, "{:?}", rec.verdicts);
    assert_eq!(rec.table.rows.len(), 1);
}

#[test]
fn rerun_gives_identical_hash() {
    let a = run(ExperimentKind::Tail, 5, small_tail());
    let b = run(ExperimentKind::Tail, 5, small_tail());
    assert_eq!(a.record_hash, b.record_hash);
    assert_eq!(a, b);
    let c = run(ExperimentKind::Tail, 6, small_tail());
    assert_ne!(a.record_hash, c.record_hash);
    assert_ne!(a.config_hash, c.config_hash);
}

#[test]
fn hash_does_not_depend_on_threads() {
    let a = run(ExperimentKind::Tail, 5, small_tail());
    crate::parallel::set_threads(3);
    let b = run(ExperimentKind::Tail, 5, small_tail());
    crate::parallel::set_threads(1);
    assert_eq!(a.record_hash, b.record_hash);
}

#[test]
fn defaults_are_recorded() {
    let rec = run(ExperimentKind::Tail, 5, small_tail());
    assert_eq!(rec.params["n_mc"], json!(20000));
    let explicit = run(ExperimentKind::Tail, 5, rec.params.clone());
    assert_eq!(explicit.record_hash, rec.record_hash);
    let defaults = run_typed::<TailParams>(&Value::Null, crate::rng::Seed(0), |_, _| {
        Ok(Outcome {
            table: Table::default(),
            verdicts: vec![],
        })
    })
    .unwrap()
    .0;
    assert_eq!(defaults["n_mc"], json!(100_000));
}

#[test]
fn identity_with_equal_measures_is_exact() {
    let g = DiscreteMeasure::from_parts(line(0.0, 1.0), vec![vec![0.1], vec![0.7]], vec![0.4, 0.6]).unwrap();
    let params = json!({"g": g, "gp": g, "ensembles": 20, "orders": [1.0, 2.0]});
    let rec = run(ExperimentKind::Identity, 3, params);
    let v = rec.verdict("C2").unwrap();
    assert_eq!(v.status, Status::Pass);
    for col in ["w_rr", "lower", "upper", "sigma"] {
        assert!(rec.table.column(col).unwrap().iter().all(|x| x.as_f64().unwrap().abs() < 1e-12), "{col}");
    }
}

#[test]
fn identity_needs_both_measures() {
    let g = DiscreteMeasure::dirac(line(0.0, 1.0), vec![0.5]).unwrap();
    let cfg = ExperimentConfig::new(ExperimentKind::Identity, 1, json!({"g": g}));
    assert!(run_experiment(&cfg).is_err());
}

#[test]
fn identity_bracket_holds_on_small_pair() {
    let g = DiscreteMeasure::from_parts(line(0.0, 1.0), vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
    let gp = DiscreteMeasure::from_parts(line(0.0, 1.0), vec![vec![0.2], vec![0.9]], vec![0.3, 0.7]).unwrap();
    let b = identity_bracket(&g, &gp, 0.7, 1.0, 300, 14, crate::rng::Seed(4)).unwrap();
    assert!(b.lower <= b.upper + 1e-12, "{b:?}");
    assert!(b.lower - 3.0 * b.sigma <= b.w_rr && b.w_rr <= b.upper + 3.0 * b.sigma, "{b:?}");
}

#[test]
fn small_ball_bound_decreases_with_eps() {
    let dom = BoundedDomain::unit(1);
    let logs: Vec<f64> = [0.4, 0.2, 0.1, 0.05, 0.02]
        .iter()
        .map(|&e| small_ball_bound(&dom, 1.0, e, 1.0, 1.0).0)
        .collect();
    assert!(logs.windows(2).all(|w| w[1] < w[0]), "{logs:?}");
    // centers 0, 0.5 and 1 at eps = 0.5 on [0,1]
    assert_eq!(small_ball_bound(&dom, 1.0, 0.5, 1.0, 1.0).1, 3);
    assert_eq!(small_ball_bound(&dom, 1.0, 0.2, 1.0, 1.0).1, 6);
}

#[test]
fn small_ball_large_eps_is_certain() {
    let dom = BoundedDomain::unit(1);
    let g0 = DiscreteMeasure::from_parts(dom.clone(), vec![vec![0.25], vec![0.75]], vec![0.5, 0.5]).unwrap();
    let trunc = StickBreakingTruncation::for_tolerance(1.0, 0.01, 1e-4).unwrap();
    let o = small_ball_check(&g0, 1.0, &BaseMeasure::uniform(dom), 1.0, 1.0, 500, &trunc, crate::rng::Seed(2)).unwrap();
    assert_eq!(o.empirical, 1.0);
    assert_eq!(o.status, Status::Pass);
}

#[test]
fn small_ball_rejects_atomic_base() {
    let dom = BoundedDomain::unit(1);
    let g0 = DiscreteMeasure::dirac(dom, vec![0.5]).unwrap();
    let trunc = StickBreakingTruncation::for_tolerance(1.0, 0.01, 1e-4).unwrap();
    let base = BaseMeasure::discrete(g0.clone());
    assert!(small_ball_check(&g0, 1.0, &base, 0.2, 1.0, 10, &trunc, crate::rng::Seed(2)).is_err());
}

fn thickness_params(delta: f64) -> ThicknessParams {
    ThicknessParams {
        delta,
        n_prior: 40,
        n_mc: 100,
        bank_size: 64,
        ..Default::default()
    }
}

#[test]
fn thickness_membership_grows_with_delta() {
    let small = thickness_check(&thickness_params(0.3), crate::rng::Seed(9)).unwrap();
    let large = thickness_check(&thickness_params(0.8), crate::rng::Seed(9)).unwrap();
    // same prior draws and divergence estimates, only the radius moves
    assert_eq!(small.divergences, large.divergences);
    assert!(small.hits <= large.hits);
    let inside = |o: &ThicknessOutcome, d: f64| -> Vec<bool> {
        o.divergences.iter().map(|&(k, k2)| k <= d * d && k2 <= d * d).collect()
    };
    for (a, b) in inside(&small, 0.3).iter().zip(inside(&large, 0.8)) {
        assert!(!a || b);
    }
}

#[test]
fn thickness_huge_delta_passes() {
    let o = thickness_check(&thickness_params(50.0), crate::rng::Seed(9)).unwrap();
    assert_eq!(o.hits, o.n_prior);
    assert_eq!(o.log_upper_conf, 0.0);
    assert_eq!(o.status, Status::Pass);
}

#[test]
fn thickness_guard_skips() {
    let p = ThicknessParams {
        delta: 1e-3,
        guard_c: 10.0,
        ..thickness_params(1e-3)
    };
    assert_eq!(thickness_check(&p, crate::rng::Seed(1)).unwrap().status, Status::Skipped);
}

#[test]
fn hellinger_identical_and_separated() {
    let dom = line(-5.0, 5.0);
    let k = KernelModel::gaussian(0.3, 1).unwrap();
    let p = DiscreteMeasure::from_parts(dom.clone(), vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
    assert!(hellinger_1d(&p, &p, &k).unwrap() < 1e-6);
    let q = DiscreteMeasure::dirac(dom.clone(), vec![4.0]).unwrap();
    let a = DiscreteMeasure::dirac(dom.clone(), vec![-4.0]).unwrap();
    assert!((hellinger_1d(&a, &q, &k).unwrap() - 1.0).abs() < 1e-6);
    // two unit gaussians at distance d: h^2 = 1 - exp(-d^2 / (8 s^2))
    let b = DiscreteMeasure::dirac(dom, vec![-3.7]).unwrap();
    let h = hellinger_1d(&a, &b, &k).unwrap();
    let exact = (1.0 - (-0.09f64 / (8.0 * 0.09)).exp()).sqrt();
    assert!((h - exact).abs() < 1e-7, "{h} vs {exact}");
}

#[test]
fn csv_schema_is_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let rec = run(ExperimentKind::Tail, 5, small_tail());
    let (csv_path, json_path) = write_outputs(&rec, dir.path()).unwrap();
    let text = std::fs::read_to_string(csv_path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "alpha,k,eps,empirical,stderr,upper_99,bound");
    assert_eq!(text.lines().count(), 2);
    let back: ExperimentRecord = serde_json::from_str(&std::fs::read_to_string(json_path).unwrap()).unwrap();
    assert_eq!(back, rec);
}

#[test]
fn tube_small_run_reports_schema() {
    let params = json!({"n_mc": 20000});
    let rec = run(ExperimentKind::Tube, 2, params);
    assert_eq!(rec.table.columns, ["case", "delta", "estimate", "stderr", "n_mc", "surrogate"]);
    assert_eq!(rec.table.rows.len(), 12);
    assert!(rec.table.column("surrogate").unwrap().iter().all(|s| *s == "l-inf"));
    assert_eq!(rec.verdicts.len(), 1);
}

#[test]
fn borrow_rejects_bad_group_counts() {
    let p = BorrowParams {
        m: 3,
        m_small: 5,
        ..Default::default()
    };
    assert!(borrow_strength_experiment(&p, crate::rng::Seed(1)).is_err());
}

#[test]
fn contraction_identical_alternative_has_no_power() {
    let p = ContractionParams {
        alternatives: vec![ContractionParams::default().g0],
        n_grid: vec![30],
        reps: 10,
        ..Default::default()
    };
    let rows = contraction_experiment(&p, crate::rng::Seed(3)).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].w_rr, 0.0);
    // with G' = G0 the call never prefers G'
    assert_eq!(rows[0].v_hat, 0.0);
    assert_eq!(rows[0].residual, 0.0);
}
