use super::*;
use proptest::prelude::*;

// Every vertex of the transportation polytope is a north-west corner solution
// for some ordering of rows and columns, so the minimum over all orderings is
// the exact optimum.
fn brute_force(supply: &[f64], demand: &[f64], cost: &[f64]) -> f64 {
    let n = supply.len();
    let m = demand.len();
    let mut best = f64::INFINITY;
    for rp in permutations(n) {
        for cp in permutations(m) {
            let mut ra: Vec<f64> = rp.iter().map(|&i| supply[i]).collect();
            let mut rb: Vec<f64> = cp.iter().map(|&j| demand[j]).collect();
            let (mut i, mut j, mut total) = (0, 0, 0.0);
            while i < n && j < m {
                let f = ra[i].min(rb[j]);
                total += f * cost[rp[i] * m + cp[j]];
                ra[i] -= f;
                rb[j] -= f;
                if ra[i] <= 1e-15 {
                    i += 1;
                } else {
                    j += 1;
                }
            }
            best = best.min(total);
        }
    }
    best
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

fn measure_1d(locs: &[f64], w: &[f64]) -> DiscreteMeasure {
    let dom = BoundedDomain::unit(1);
    DiscreteMeasure::from_unnormalized(
        dom,
        locs.iter().zip(w).map(|(&x, &w)| Atom { loc: vec![x], w }).collect(),
    )
    .unwrap()
}

// 1-d W_1 is the L1 distance between CDFs.
fn cdf_w1(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    let mut pts: Vec<(f64, f64)> = a.atoms().iter().map(|t| (t.loc[0], t.w)).collect();
    pts.extend(b.atoms().iter().map(|t| (t.loc[0], -t.w)));
    pts.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let (mut f, mut total) = (0.0, 0.0);
    for k in 0..pts.len() - 1 {
        f += pts[k].1;
        total += f.abs() * (pts[k + 1].0 - pts[k].0);
    }
    total
}

#[test]
fn known_values() {
    let a = measure_1d(&[0.0, 1.0], &[0.5, 0.5]);
    let b = measure_1d(&[0.5], &[1.0]);
    assert!((wasserstein_distance(&a, &b, 1.0).unwrap() - 0.5).abs() < 1e-12);
    assert!((wasserstein_distance(&a, &b, 2.0).unwrap() - 0.5).abs() < 1e-12);
    let c = measure_1d(&[0.25], &[1.0]);
    assert!((wasserstein_distance(&c, &b, 3.0).unwrap() - 0.25).abs() < 1e-12);
    assert_eq!(wasserstein_distance(&a, &a, 2.0).unwrap(), 0.0);
}

#[test]
fn domain_mismatch_and_bad_order() {
    let a = measure_1d(&[0.0], &[1.0]);
    let b = DiscreteMeasure::dirac(BoundedDomain::cube(1, 0.0, 2.0).unwrap(), vec![0.0]).unwrap();
    assert_eq!(wasserstein(&a, &b, 1.0).unwrap_err(), Error::DomainMismatch);
    assert!(matches!(wasserstein(&a, &a, 0.5), Err(Error::InvalidParameter(_))));
}

#[test]
fn measure_construction_rules() {
    let dom = BoundedDomain::unit(1);
    let m = DiscreteMeasure::from_parts(dom.clone(), vec![vec![0.2], vec![0.2], vec![0.7]], vec![0.25, 0.25, 0.5])
        .unwrap();
    assert_eq!(m.len(), 2);
    assert!((m.weight_at(&[0.2]) - 0.5).abs() < 1e-15);
    assert!(DiscreteMeasure::from_parts(dom.clone(), vec![vec![1.5]], vec![1.0]).is_err());
    assert!(DiscreteMeasure::from_parts(dom.clone(), vec![vec![0.5]], vec![0.7]).is_err());
    assert!(DiscreteMeasure::from_parts(dom.clone(), vec![vec![f64::NAN]], vec![1.0]).is_err());
    assert!(BoundedDomain::new(vec![1.0], vec![0.0]).is_err());
    let json = serde_json::to_string(&m).unwrap();
    let back: DiscreteMeasure = serde_json::from_str(&json).unwrap();
    assert_eq!(back, m);
    assert!(serde_json::from_str::<DiscreteMeasure>(
        r#"{"domain":{"lower":[0],"upper":[1]},"atoms":[{"loc":[2],"w":1}]}"#
    )
    .is_err());
}

#[test]
fn coupling_cost_checks_marginals() {
    let a = measure_1d(&[0.0, 1.0], &[0.5, 0.5]);
    let prod = Coupling::product(&a, &a);
    assert!((coupling_cost(&prod, 1.0).unwrap() - 0.5).abs() < 1e-12);
    let mut bad = prod.clone();
    bad.weights[0][0] += 0.1;
    assert!(matches!(coupling_cost(&bad, 1.0), Err(Error::InvalidCoupling(_))));
    assert_eq!(coupling_cost(&Coupling::diagonal(&a), 2.0).unwrap(), 0.0);
}

#[test]
fn large_uniform_problem_solvers_agree() {
    // heavily degenerate: equal weights on both sides
    let mut rng = crate::Seed(5).rng();
    use rand::Rng as _;
    let dom = BoundedDomain::unit(2);
    let pts = |rng: &mut crate::rng::Rng, k: usize| -> Vec<Vec<f64>> {
        (0..k).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect()
    };
    let a = DiscreteMeasure::uniform(dom.clone(), pts(&mut rng, 40)).unwrap();
    let b = DiscreteMeasure::uniform(dom, pts(&mut rng, 30)).unwrap();
    let cost = cost_matrix(&a, &b, 2.0);
    let net = solve_network(&a.weights(), &b.weights(), &cost).unwrap();
    let dense = solve_dense(&a.weights(), &b.weights(), &cost).unwrap();
    assert!((net.cost - dense.cost).abs() < 1e-10, "{} vs {}", net.cost, dense.cost);
}

fn small_problem() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..5, 1usize..5).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(0.01f64..1.0, n),
            prop::collection::vec(0.0f64..1.0, m),
            prop::collection::vec(0.01f64..1.0, m),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solvers_match_vertex_enumeration((xa, wa, xb, wb) in small_problem(), r in 1.0f64..3.0) {
        let a = measure_1d(&xa, &wa);
        let b = measure_1d(&xb, &wb);
        let cost = cost_matrix(&a, &b, r);
        let oracle = brute_force(&a.weights(), &b.weights(), &cost);
        let net = solve_network(&a.weights(), &b.weights(), &cost).unwrap().cost;
        let dense = solve_dense(&a.weights(), &b.weights(), &cost).unwrap().cost;
        prop_assert!((net - oracle).abs() < 1e-10, "network {} oracle {}", net, oracle);
        prop_assert!((dense - oracle).abs() < 1e-10, "dense {} oracle {}", dense, oracle);
    }

    #[test]
    fn w1_matches_cdf_formula((xa, wa, xb, wb) in small_problem()) {
        let a = measure_1d(&xa, &wa);
        let b = measure_1d(&xb, &wb);
        let d = wasserstein_distance(&a, &b, 1.0).unwrap();
        prop_assert!((d - cdf_w1(&a, &b)).abs() < 1e-10);
    }

    #[test]
    fn metric_axioms((xa, wa, xb, wb) in small_problem(), xc in prop::collection::vec(0.0f64..1.0, 1..5), r in 1.0f64..3.0) {
        let a = measure_1d(&xa, &wa);
        let b = measure_1d(&xb, &wb);
        let c = measure_1d(&xc, &vec![1.0; xc.len()]);
        let ab = wasserstein_distance(&a, &b, r).unwrap();
        let ba = wasserstein_distance(&b, &a, r).unwrap();
        let ac = wasserstein_distance(&a, &c, r).unwrap();
        let cb = wasserstein_distance(&c, &b, r).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-9);
        prop_assert!(ab <= ac + cb + 1e-9);
        prop_assert!(wasserstein_distance(&a, &a, r).unwrap() < 1e-12);
    }

    #[test]
    fn optimal_coupling_is_valid_and_optimal((xa, wa, xb, wb) in small_problem(), r in 1.0f64..3.0) {
        let a = measure_1d(&xa, &wa);
        let b = measure_1d(&xb, &wb);
        let res = wasserstein(&a, &b, r).unwrap();
        prop_assert!(validate_coupling(&res.coupling).is_valid(1e-10));
        let via = coupling_cost(&res.coupling, r).unwrap();
        prop_assert!((via - res.distance).abs() < 1e-9);
        let prod = coupling_cost(&Coupling::product(&a, &b), r).unwrap();
        prop_assert!(res.distance <= prod + 1e-12);
    }

    #[test]
    fn monotone_in_order((xa, wa, xb, wb) in small_problem()) {
        let a = measure_1d(&xa, &wa);
        let b = measure_1d(&xb, &wb);
        let w1 = wasserstein_distance(&a, &b, 1.0).unwrap();
        let w2 = wasserstein_distance(&a, &b, 2.0).unwrap();
        prop_assert!(w1 <= w2 + 1e-12);
    }
}
