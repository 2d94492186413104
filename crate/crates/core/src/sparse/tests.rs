use super::*;
use proptest::prelude::*;

fn pts(xs: &[f64]) -> SupportSpec {
    SupportSpec::explicit(xs.iter().map(|&x| vec![x]).collect(), Some(vec![1.0 / xs.len() as f64; xs.len()])).unwrap()
}

/// Largest subset with pairwise distances strictly above `2 eps`, by enumeration.
fn brute_packing(points: &[Vec<f64>], eps: f64) -> usize {
    let n = points.len();
    assert!(n <= 16);
    (0u32..1 << n)
        .filter(|mask| {
            (0..n).all(|i| {
                mask >> i & 1 == 0 || (i + 1..n).all(|j| mask >> j & 1 == 0 || euclidean(&points[i], &points[j]) > 2.0 * eps)
            })
        })
        .map(|m| m.count_ones() as usize)
        .max()
        .unwrap()
}

#[test]
fn single_point_needs_one_ball() {
    for eps in [1e-6, 0.3, 10.0] {
        assert_eq!(covering_count(&pts(&[0.4]), eps).unwrap(), 1);
        let plane = SupportSpec::explicit(vec![vec![0.1, 0.2]], None).unwrap();
        assert_eq!(covering_count(&plane, eps).unwrap(), 1);
    }
}

#[test]
fn dyadic_count_at_one_eighth() {
    let s = SupportSpec::dyadic(60, 2.0).unwrap();
    let bound = ((1.0f64 / (2.0 * 0.125)).ln() / 2f64.ln()).ceil() as usize + 1;
    assert!(covering_count(&s, 0.125).unwrap() <= bound);
}

#[test]
fn cantor_level_four_intervals() {
    let s = SupportSpec::cantor(8).unwrap();
    assert_eq!(s.points().len(), 256);
    assert_eq!(covering_count(&s, 3f64.powi(-4) / 2.0).unwrap(), 16);
}

#[test]
fn cantor_gauge_is_self_similar() {
    let s = SupportSpec::cantor(10).unwrap();
    for j in 0..=10 {
        let g = gauge_estimate(&s, 3f64.powi(-j) / 2.0).unwrap();
        assert_eq!(g, 0.5f64.powi(j), "j = {j}");
    }
}

#[test]
fn separation() {
    let far = cover(&pts(&[0.0, 1.0]), 0.1).unwrap();
    assert!(separation_check(&far, 2.0));
    let near = SupportSpec::explicit(vec![vec![0.0, 0.0], vec![0.15, 0.0]], None).unwrap();
    let near = cover(&near, 0.1).unwrap();
    assert_eq!(near.centers.len(), 2);
    assert!(!separation_check(&near, 2.0));
}

#[test]
fn dyadic_is_sparse_across_two_decades() {
    let s = SupportSpec::dyadic(60, 2.0).unwrap();
    for delta in [1e-2, 3e-3, 1e-3, 3e-4, 1e-4] {
        assert!(sparse_scale(&s, delta, 0.5, 2.0, 16).unwrap().is_some(), "delta {delta}");
    }
}

#[test]
fn two_atom_gauge() {
    assert_eq!(gauge_estimate(&pts(&[0.0, 1.0]), 0.1).unwrap(), 0.5);
    let bare = SupportSpec::explicit(vec![vec![0.0]], None).unwrap();
    assert!(gauge_estimate(&bare, 0.1).is_err());
}

fn dyadic_grid() -> Vec<f64> {
    (3..=9).map(|j| 10f64.powi(-j)).collect()
}

#[test]
fn dyadic_gauge_decays_like_a_log_power() {
    let s = SupportSpec::dyadic(60, 2.0).unwrap();
    let grid = dyadic_grid();
    let x: Vec<f64> = grid.iter().map(|e| (1.0 / e).ln().ln()).collect();
    let y: Vec<f64> = grid.iter().map(|&e| gauge_estimate(&s, e).unwrap().ln()).collect();
    let fit = linear_fit(&x, &y);
    assert!(fit.r2 >= 0.95, "{fit:?}");
}

#[test]
fn dyadic_is_supersparse() {
    let p = sparsity_profile(&SupportSpec::dyadic(60, 2.0).unwrap(), &dyadic_grid()).unwrap();
    let SparsityClass::Supersparse { gamma0, gamma1 } = p.classification else { panic!("{p:?}") };
    assert!((gamma0 - 1.0).abs() <= 0.2, "{gamma0}");
    assert!((gamma1 - 2.0).abs() <= 0.4, "{gamma1}");
}

#[test]
fn cantor_is_ordinary() {
    let grid: Vec<f64> = (1..=8).map(|j| 3f64.powi(-j) / 2.0).collect();
    let p = sparsity_profile(&SupportSpec::cantor(10).unwrap(), &grid).unwrap();
    let SparsityClass::Ordinary { gamma0, gamma1 } = p.classification else { panic!("{p:?}") };
    let dim = 2f64.ln() / 3f64.ln();
    assert!((gamma0 - dim).abs() <= 0.15 * dim, "{gamma0}");
    assert!((gamma1 - dim).abs() <= 0.15 * dim, "{gamma1}");
}

#[test]
fn finite_support_is_ordinary_with_flat_count() {
    let p = sparsity_profile(&pts(&[0.0, 0.4, 0.9]), &dyadic_grid()).unwrap();
    let SparsityClass::Ordinary { gamma0, .. } = p.classification else { panic!("{p:?}") };
    assert!(gamma0.abs() < 1e-12);
}

#[test]
fn profile_rejects_short_grids() {
    let s = pts(&[0.0, 1.0]);
    assert!(sparsity_profile(&s, &[0.1, 0.05, 0.01]).is_err());
    assert!(sparsity_profile(&s, &[0.1, 0.09, 0.08, 0.07, 0.06, 0.05]).is_err());
}

#[test]
fn box_counts() {
    let unit = BoundedDomain::unit(1);
    assert_eq!(box_covering_number(&unit, 0.25).unwrap(), 2);
    assert_eq!(box_covering_number(&unit, 0.5).unwrap(), 1);
    assert_eq!(box_covering_number(&unit, 7.0).unwrap(), 1);
    let square = BoundedDomain::unit(2);
    assert_eq!(box_covering_number(&square, 0.25).unwrap(), 9);
}

#[test]
fn config_round_trip() {
    let s: SupportSpec = serde_json::from_str(r#"{"kind":"cantor","level":3}"#).unwrap();
    assert_eq!(s.points().len(), 8);
    assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"kind":"cantor","level":3}"#);
    let d: SupportSpec = serde_json::from_str(r#"{"kind":"dyadic"}"#).unwrap();
    assert_eq!(d.points().len(), 61);
    let e = serde_json::from_str::<SupportSpec>(r#"{"kind":"explicit","points":[]}"#).unwrap_err();
    assert!(e.to_string().contains("support"), "{e}");
    assert!(covering_count(&pts(&[0.0]), 0.0).is_err());
}

proptest! {
    #[test]
    fn line_cover_is_optimal(xs in prop::collection::vec(0.0f64..1.0, 1..14), eps in 0.01f64..0.3) {
        let s = pts(&xs);
        let cov = cover(&s, eps).unwrap();
        prop_assert_eq!(cov.centers.len(), brute_packing(s.points(), eps));
        for (c, m) in cov.centers.iter().zip(&cov.members) {
            prop_assert!(m.iter().all(|&i| euclidean(&s.points()[i], c) <= eps * (1.0 + 1e-12)));
        }
    }

    #[test]
    fn plane_cover_dominates_packing(
        xs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..14),
        eps in 0.02f64..0.4,
    ) {
        let s = SupportSpec::explicit(xs.iter().map(|&(a, b)| vec![a, b]).collect(), None).unwrap();
        let cov = cover(&s, eps).unwrap();
        prop_assert!(cov.centers.len() >= brute_packing(s.points(), eps));
        let mut seen: Vec<usize> = cov.members.concat();
        seen.sort();
        prop_assert_eq!(seen, (0..xs.len()).collect::<Vec<_>>());
    }

    #[test]
    fn envelope_is_monotone(xs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..30)) {
        let s = SupportSpec::explicit(xs.iter().map(|&(a, b)| vec![a, b]).collect(), Some(vec![1.0; xs.len()])).unwrap();
        let grid: Vec<f64> = (0..8).map(|j| 0.5 * 0.5f64.powi(j)).collect();
        let p = sparsity_profile(&s, &grid).unwrap();
        prop_assert!(p.k_envelope.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(p.g_vals.windows(2).all(|w| w[0] >= w[1]));
    }
}
