use super::*;
use crate::measures::StickBreakingTruncation;
use crate::transport::BoundedDomain;
use statrs::distribution::{Cauchy, Continuous, ContinuousCDF, Laplace, Normal, Triangular};

fn line() -> BoundedDomain {
    BoundedDomain::cube(1, -3.0, 3.0).unwrap()
}

fn reference_pdf(family: KernelFamily, h: f64, x: f64) -> f64 {
    match family {
        KernelFamily::Gaussian => Normal::new(0.0, h).unwrap().pdf(x),
        KernelFamily::Laplace => Laplace::new(0.0, h).unwrap().pdf(x),
        KernelFamily::Cauchy => Cauchy::new(0.0, h).unwrap().pdf(x),
        KernelFamily::Triangular => Triangular::new(-h, h, 0.0).unwrap().pdf(x),
    }
}

const FAMILIES: [KernelFamily; 4] = [
    KernelFamily::Gaussian,
    KernelFamily::Laplace,
    KernelFamily::Cauchy,
    KernelFamily::Triangular,
];

#[test]
fn densities_match_reference_and_normalize() {
    for fam in FAMILIES {
        let k = KernelModel::new(fam, 0.7, 1).unwrap();
        assert!((k.mass_1d() - 1.0).abs() < 1e-9, "{fam:?}");
        for i in 0..50 {
            let x = -2.0 + 0.083 * i as f64;
            assert!((k.density(&[x]) - reference_pdf(fam, 0.7, x)).abs() < 1e-12, "{fam:?} at {x}");
            assert_eq!(k.density(&[x]), k.density(&[-x]));
        }
    }
}

#[test]
fn mode_and_symmetry() {
    for d in 1..4 {
        let k = KernelModel::gaussian(1.0, d).unwrap();
        let q = DiscreteMeasure::dirac(BoundedDomain::unit(d), vec![0.0; d]).unwrap();
        let v = mixture_density(&q, &k, &vec![0.0; d]);
        assert!((v - (2.0 * PI).powf(-(d as f64) / 2.0)).abs() < 1e-14);
    }
    let k = KernelModel::new(KernelFamily::Laplace, 0.4, 1).unwrap();
    let q = DiscreteMeasure::dirac(line(), vec![0.7]).unwrap();
    for y in [-1.0, 0.2, 2.5] {
        assert!((mixture_density(&q, &k, &[y]) - mixture_density(&q, &k, &[1.4 - y])).abs() < 1e-15);
    }
}

#[test]
fn mixture_matches_direct_convolution() {
    let q = DiscreteMeasure::from_parts(line(), vec![vec![-0.5], vec![1.0]], vec![0.3, 0.7]).unwrap();
    for fam in FAMILIES {
        let k = KernelModel::new(fam, 0.5, 1).unwrap();
        for i in 0..100 {
            let y = -2.0 + 0.04 * i as f64;
            let direct = 0.3 * reference_pdf(fam, 0.5, y + 0.5) + 0.7 * reference_pdf(fam, 0.5, y - 1.0);
            assert!((mixture_density(&q, &k, &[y]) - direct).abs() < 1e-6);
        }
    }
}

#[test]
fn noise_moments() {
    let k = KernelModel::new(KernelFamily::Laplace, 0.5, 2).unwrap();
    let mut rng = Seed(3).rng();
    let xs: Vec<Vec<f64>> = (0..200_000).map(|_| k.sample_noise(&mut rng)).collect();
    let c0: Vec<f64> = xs.iter().map(|v| v[0]).collect();
    let (m, se) = mean_stderr(&c0);
    assert!(m.abs() <= 4.0 * se);
    let var = c0.iter().map(|x| x * x).sum::<f64>() / c0.len() as f64;
    assert!((var - 2.0 * 0.25).abs() < 0.01, "{var}");
}

#[test]
fn shift_divergences_match_closed_forms() {
    let h = 0.6;
    let g = KernelModel::gaussian(h, 1).unwrap();
    for &d in &[0.1, 0.5, 1.3] {
        let z: f64 = d / h;
        let kl = shift_divergence(&g, DivergenceKind::KL, &[d]).unwrap();
        assert!((kl - z * z / 2.0).abs() < 1e-10);
        let k2 = shift_divergence(&g, DivergenceKind::K2, &[d]).unwrap();
        assert!((k2 - (z * z + z.powi(4) / 4.0)).abs() < 1e-10);
        let hel = shift_divergence(&g, DivergenceKind::Hellinger, &[d]).unwrap();
        assert!((hel * hel - (1.0 - (-z * z / 8.0).exp())).abs() < 1e-10);
        let chi = shift_divergence(&g, DivergenceKind::ChiSq, &[d]).unwrap();
        assert!((chi - ((z * z).exp() - 1.0)).abs() < 1e-8 * chi.max(1.0));
        let tv = shift_divergence(&g, DivergenceKind::TV, &[d]).unwrap();
        let exact = 2.0 * Normal::new(0.0, 1.0).unwrap().cdf(z / 2.0) - 1.0;
        assert!((tv - exact).abs() < 1e-10);
    }
    let lap = KernelModel::new(KernelFamily::Laplace, 1.0, 1).unwrap();
    let kl = shift_divergence(&lap, DivergenceKind::KL, &[0.8]).unwrap();
    assert!((kl - (0.8 + (-0.8f64).exp() - 1.0)).abs() < 1e-10);
    let cau = KernelModel::new(KernelFamily::Cauchy, 1.0, 1).unwrap();
    let kl = shift_divergence(&cau, DivergenceKind::KL, &[1.0]).unwrap();
    assert!((kl - 1.25f64.ln()).abs() < 1e-9, "{kl}");
    let tri = KernelModel::new(KernelFamily::Triangular, 1.0, 1).unwrap();
    assert_eq!(shift_divergence(&tri, DivergenceKind::KL, &[0.1]).unwrap(), f64::INFINITY);
    assert!((shift_divergence(&tri, DivergenceKind::TV, &[3.0]).unwrap() - 1.0).abs() < 1e-12);
    let g2 = KernelModel::gaussian(1.0, 2).unwrap();
    let kl = shift_divergence(&g2, DivergenceKind::KL, &[0.3, 0.4]).unwrap();
    assert!((kl - 0.125).abs() < 1e-10);
    let k2 = shift_divergence(&g2, DivergenceKind::K2, &[0.3, 0.4]).unwrap();
    assert!((k2 - (0.25 + 0.125f64.powi(2))).abs() < 1e-10);
}

#[test]
fn a1_constant_for_gaussian() {
    let k = KernelModel::gaussian(0.5, 1).unwrap();
    let c = a1_constant(&k, &[2.0], 2.0, 20).unwrap();
    assert!((c - 2.0).abs() < 1e-9, "{c}");
}

#[test]
fn marginal_of_a_dirac_is_exact() {
    let k = KernelModel::gaussian(0.4, 1).unwrap();
    let g = DiscreteMeasure::dirac(line(), vec![0.5]).unwrap();
    let t = StickBreakingTruncation::new(10, 1.0, 0.01).unwrap();
    let ys = vec![vec![0.1], vec![0.9], vec![0.4]];
    let est = marginal_loglik(&g, 1.0, &k, &ys, 50, &t, Seed(1)).unwrap();
    let exact: f64 = ys.iter().map(|y| k.log_density(&[y[0] - 0.5])).sum();
    assert!((est.value - exact).abs() < 1e-12);
    assert!(est.stderr < 1e-12);
    assert_eq!(marginal_loglik(&g, 1.0, &k, &[], 50, &t, Seed(1)).unwrap().value, 0.0);
}

#[test]
fn marginal_matches_dirichlet_moments() {
    // Q = P δ_a + (1-P) δ_b with P ~ Beta(αw, α(1-w)), so the two-point marginal
    // only needs E P, E P^2 and E P(1-P).
    let (alpha, w) = (1.3, 0.35);
    let k = KernelModel::gaussian(0.5, 1).unwrap();
    let g = DiscreteMeasure::from_parts(line(), vec![vec![-0.6], vec![0.8]], vec![w, 1.0 - w]).unwrap();
    let t = StickBreakingTruncation::new(50, alpha, 0.01).unwrap();
    let ys = vec![vec![-0.2], vec![0.5]];
    let f = |y: f64, c: f64| reference_pdf(KernelFamily::Gaussian, 0.5, y - c);
    let (a1, b1) = (f(-0.2, -0.6), f(-0.2, 0.8));
    let (a2, b2) = (f(0.5, -0.6), f(0.5, 0.8));
    let ep = w;
    let ep2 = w * (alpha * w + 1.0) / (alpha + 1.0);
    let epq = ep - ep2;
    let eq2 = 1.0 - 2.0 * ep + ep2;
    let exact = (ep2 * a1 * a2 + epq * (a1 * b2 + b1 * a2) + eq2 * b1 * b2).ln();
    let est = marginal_loglik(&g, alpha, &k, &ys, 20_000, &t, Seed(8)).unwrap();
    assert!((est.value - exact).abs() <= 3.0 * est.stderr, "{} vs {exact} ({})", est.value, est.stderr);
}

#[test]
fn divergence_estimates() {
    let k = KernelModel::gaussian(1.0, 1).unwrap();
    let dom = BoundedDomain::cube(1, -2.0, 2.0).unwrap();
    let p = DensitySpec::Mixture {
        measure: DiscreteMeasure::dirac(dom.clone(), vec![0.0]).unwrap(),
        kernel: k,
    };
    let q = DensitySpec::Mixture {
        measure: DiscreteMeasure::dirac(dom.clone(), vec![0.5]).unwrap(),
        kernel: k,
    };
    let kl = estimate_divergence(DivergenceKind::KL, &p, &q, 20_000, Seed(1)).unwrap();
    assert!((kl.value - 0.125).abs() <= 3.0 * kl.stderr, "{kl:?}");
    for kind in [
        DivergenceKind::KL,
        DivergenceKind::K2,
        DivergenceKind::Hellinger,
        DivergenceKind::TV,
        DivergenceKind::ChiSq,
    ] {
        let same = estimate_divergence(kind, &p, &p, 2_000, Seed(2)).unwrap();
        assert!(same.value <= 3.0 * same.stderr + 1e-12, "{kind:?}: {same:?}");
        let est = estimate_divergence(kind, &p, &q, 2_000, Seed(2)).unwrap();
        assert!(est.value >= 0.0);
        if matches!(kind, DivergenceKind::TV | DivergenceKind::Hellinger) {
            assert!(est.value <= 1.0);
        }
    }
    let tv = estimate_divergence(DivergenceKind::TV, &p, &q, 20_000, Seed(5)).unwrap();
    let exact = shift_divergence(&k, DivergenceKind::TV, &[0.5]).unwrap();
    assert!((tv.value - exact).abs() <= 3.0 * tv.stderr, "{tv:?} vs {exact}");

    let other = KernelModel::gaussian(1.0, 2).unwrap();
    let r = DensitySpec::Mixture {
        measure: DiscreteMeasure::dirac(BoundedDomain::unit(2), vec![0.0, 0.0]).unwrap(),
        kernel: other,
    };
    assert_eq!(estimate_divergence(DivergenceKind::KL, &p, &r, 10, Seed(0)).unwrap_err(), Error::DomainMismatch);
}

#[test]
fn hellinger_below_kl_on_marginals() {
    let k = KernelModel::gaussian(0.5, 1).unwrap();
    let t = StickBreakingTruncation::new(20, 1.0, 0.01).unwrap();
    let spec = |locs: Vec<Vec<f64>>| DensitySpec::Marginal {
        base: DiscreteMeasure::from_parts(line(), locs, vec![0.5, 0.5]).unwrap(),
        alpha: 1.0,
        kernel: k,
        n: 2,
        truncation: t,
        bank_size: 400,
    };
    let p = spec(vec![vec![-0.5], vec![0.5]]);
    let q = spec(vec![vec![-0.2], vec![0.9]]);
    let kl = estimate_divergence(DivergenceKind::KL, &p, &q, 3_000, Seed(4)).unwrap();
    let h = estimate_divergence(DivergenceKind::Hellinger, &p, &q, 3_000, Seed(4)).unwrap();
    assert!(h.value * h.value <= kl.value + 3.0 * kl.stderr);
}

#[test]
fn smoothness_classes() {
    let g = classify_smoothness(&KernelModel::gaussian(0.3, 1).unwrap()).unwrap();
    assert_eq!(g.kind, SmoothnessKind::Supersmooth);
    assert!((g.beta - 2.0).abs() <= 0.1, "{g:?}");
    let l = classify_smoothness(&KernelModel::new(KernelFamily::Laplace, 1.0, 1).unwrap()).unwrap();
    assert_eq!(l.kind, SmoothnessKind::Ordinary);
    assert!((l.beta - 2.5).abs() <= 0.15, "{l:?}");
    let c = classify_smoothness(&KernelModel::new(KernelFamily::Cauchy, 2.0, 1).unwrap()).unwrap();
    assert_eq!(c.kind, SmoothnessKind::Supersmooth);
    assert!((c.beta - 1.0).abs() <= 0.1, "{c:?}");
    let t = classify_smoothness(&KernelModel::new(KernelFamily::Triangular, 1.0, 1).unwrap());
    assert!(matches!(t, Err(Error::KernelNotInvertible(_))));
    let l2 = classify_smoothness(&KernelModel::new(KernelFamily::Laplace, 1.0, 2).unwrap()).unwrap();
    assert!((l2.beta - 2.5).abs() <= 0.15);
}

#[test]
fn kernel_config_format() {
    let k: KernelModel = serde_json::from_str(r#"{"family":"laplace","bandwidth":0.2,"dim":1}"#).unwrap();
    assert_eq!(k.family, KernelFamily::Laplace);
    assert!(serde_json::from_str::<KernelModel>(r#"{"family":"laplace","bandwidth":-1,"dim":1}"#).is_err());
}
