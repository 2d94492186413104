//! Experiment-level operations: each combines several modules into one
//! Monte Carlo comparison against a stated bound or trend.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

use super::runs::{BorrowParams, ContractionParams, ThicknessParams};
use super::Status;
use crate::deconv::{em_fixed_atoms, eta_mle, plug_in_base_estimate, DemixConfig};
use crate::error::{Error, Result};
use crate::hierarchy::{coupled_pair_weights, coupling_support, nested_wasserstein, MeasureEnsemble};
use crate::kernels::{estimate_divergence, mixture_density, DensitySpec, DivergenceKind, KernelModel};
use crate::measures::{dp_weights_on_atoms, sample_dp, sample_mixture, BaseMeasure, StickBreakingTruncation};
use crate::parallel;
use crate::quad::real_line;
use crate::rng::{tag, Seed};
use crate::stats::{mean_stderr, proportion, Z99};
use crate::transport::{wasserstein, wasserstein_cost, wasserstein_distance, Atom, BoundedDomain, DiscreteMeasure};

pub(crate) fn reweight(base: &DiscreteMeasure, weights: &[f64]) -> Result<DiscreteMeasure> {
    DiscreteMeasure::from_unnormalized(
        base.domain().clone(),
        base.atoms()
            .iter()
            .zip(weights)
            .map(|(a, &w)| Atom { loc: a.loc.clone(), w })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityBracket {
    /// Exact `W_r^r(G, G')`.
    pub w_rr: f64,
    /// `W_r^r` between the two empirical ensembles.
    pub lower: f64,
    /// Mean `W_r^r(A_i, B_i)` over coupled pairs.
    pub upper: f64,
    pub sigma: f64,
    pub truncation_k: usize,
}

/// Draws `ensembles` pairs `(A_i, B_i)` from `D_{α κ}` pushed to both marginals,
/// `κ` an optimal coupling of `(G, G')`, and brackets `W_r^r(G, G')` between the
/// nested distance of the two ensembles and the mean paired cost.
pub fn identity_bracket(
    g: &DiscreteMeasure,
    gp: &DiscreteMeasure,
    alpha: f64,
    r: f64,
    ensembles: usize,
    truncation_k: usize,
    seed: Seed,
) -> Result<IdentityBracket> {
    if ensembles < 2 {
        return Err(Error::InvalidParameter("need at least two ensemble members".into()));
    }
    let exact = wasserstein(g, gp, r)?;
    let pairs = coupling_support(&exact.coupling.weights);
    let draws = parallel::map(ensembles, |i| -> Result<(DiscreteMeasure, DiscreteMeasure, f64)> {
        let (wa, wb) = coupled_pair_weights(&pairs, g.len(), gp.len(), alpha, truncation_k, seed.derive_path(&[tag::PAIR, i as u64]))?;
        let a = reweight(g, &wa)?;
        let b = reweight(gp, &wb)?;
        let c = wasserstein_cost(&a, &b, r)?;
        Ok((a, b, c))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let costs: Vec<f64> = draws.iter().map(|d| d.2).collect();
    let (upper, sigma) = mean_stderr(&costs);
    let (a, b): (Vec<_>, Vec<_>) = draws.into_iter().map(|(a, b, _)| (a, b)).unzip();
    let nested = nested_wasserstein(&MeasureEnsemble::new(a)?, &MeasureEnsemble::new(b)?, r)?;
    Ok(IdentityBracket {
        w_rr: exact.distance.powf(r),
        lower: nested.distance.powf(r),
        upper,
        sigma,
        truncation_k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallBallOutcome {
    pub empirical: f64,
    pub stderr: f64,
    pub threshold: f64,
    pub packing: u64,
    pub eta0: f64,
    pub log_bound: f64,
    pub bound: f64,
    pub status: Status,
    /// Lower 99% confidence limit minus the bound.
    pub margin: f64,
}

/// Packing number used by the bound: centers on a grid of spacing `eps`.
/// Exact for an interval; a lower bound on the packing number in higher dimension.
fn grid_packing(domain: &BoundedDomain, eps: f64) -> u64 {
    domain
        .side_lengths()
        .iter()
        .map(|l| (l / eps).floor() as u64 + 1)
        .product()
}

/// `η0` for the uniform distribution on a box: the least mass of a closed
/// radius-`ε` ball centered in the box is a corner orthant, `V_d ε^d / (2^d vol)`.
fn uniform_eta0(domain: &BoundedDomain) -> f64 {
    let d = domain.dim() as f64;
    let ball = std::f64::consts::PI.powf(d / 2.0) / (ln_gamma(d / 2.0 + 1.0)).exp();
    ball / 2f64.powf(d) / domain.volume()
}

/// Log of `Γ(γ) γ^D (2D)^{1-D} (ε/diam)^{r(D-1)} ∏ H(S_i)` with
/// `H(S_i) >= η0 (ε/2)^d`. Returns `(log bound, D)`.
pub fn small_ball_bound(domain: &BoundedDomain, gamma: f64, eps: f64, r: f64, eta0: f64) -> (f64, u64) {
    let packing = grid_packing(domain, eps);
    let dd = packing as f64;
    let d = domain.dim() as f64;
    let log_ball = (eta0.ln() + d * (eps / 2.0).ln()).min(0.0);
    let log = ln_gamma(gamma) + dd * gamma.ln() - (dd - 1.0) * (2.0 * dd).ln()
        + r * (dd - 1.0) * (eps / domain.diameter()).ln()
        + dd * log_ball;
    (log, packing)
}

/// Empirical `P(W_r^r(G0, G) <= (2^r + 1) ε^r)` for `G ~ D_{γH}` against the
/// small-ball lower bound. `H` must be uniform on the domain of `G0`.
pub fn small_ball_check(
    g0: &DiscreteMeasure,
    gamma: f64,
    h: &BaseMeasure,
    eps: f64,
    r: f64,
    n_mc: usize,
    trunc: &StickBreakingTruncation,
    seed: Seed,
) -> Result<SmallBallOutcome> {
    let BaseMeasure::UniformBox { domain } = h else {
        return Err(Error::InvalidParameter("the small-ball bound needs a non-atomic base; use a uniform box".into()));
    };
    if domain != g0.domain() {
        return Err(Error::DomainMismatch);
    }
    if !(eps > 0.0 && gamma > 0.0 && r >= 1.0) || n_mc == 0 {
        return Err(Error::InvalidParameter("need eps > 0, gamma > 0, r >= 1 and n_mc >= 1".into()));
    }
    let threshold = (2f64.powf(r) + 1.0) * eps.powf(r);
    let hits = parallel::map(n_mc, |i| -> Result<bool> {
        let g = sample_dp(gamma, h, trunc, seed.derive_path(&[tag::PRIOR, i as u64]))?;
        Ok(wasserstein_cost(g0, &g.measure, r)? <= threshold * (1.0 + 1e-12))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?
    .into_iter()
    .filter(|&b| b)
    .count();
    let (empirical, stderr) = proportion(hits, n_mc);
    let eta0 = uniform_eta0(domain);
    let (log_bound, packing) = small_ball_bound(domain, gamma, eps, r, eta0);
    let bound = log_bound.exp();
    let margin = empirical - Z99 * stderr - bound;
    let status = if bound == 0.0 {
        Status::Skipped
    } else if margin >= 0.0 {
        Status::Pass
    } else {
        Status::Fail
    };
    Ok(SmallBallOutcome {
        empirical,
        stderr,
        threshold,
        packing,
        eta0,
        log_bound,
        bound,
        status,
        margin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThicknessOutcome {
    pub hits: usize,
    pub n_prior: usize,
    pub empirical: f64,
    /// Log of the one-sided 99% upper Clopper-Pearson limit.
    pub log_upper_conf: f64,
    pub packing: f64,
    pub log_bound: f64,
    pub guard_ok: bool,
    /// `(K, K_2)` estimates for every prior draw.
    pub divergences: Vec<(f64, f64)>,
    pub status: Status,
    pub margin: f64,
}

/// Clopper-Pearson one-sided upper limit at level `1 - a`.
fn upper_limit(hits: usize, n: usize, a: f64) -> f64 {
    if hits >= n {
        return 1.0;
    }
    Beta::new(hits as f64 + 1.0, (n - hits) as f64)
        .map(|b| b.inverse_cdf(1.0 - a))
        .unwrap_or(1.0)
}

/// Estimates `P(G ∈ B_K(G0, δ))` under `D_{γH}` and compares its log with
/// `c log[γ^D (δ²/n³)^{(1+d/r)(D-1) + Dd/r}]`, `D = diam^d (n³/δ)^{d/r}`.
///
/// Membership uses Monte Carlo estimates of `K` and `K_2` between the
/// `n`-observation marginals. The check fails only when the 99% upper limit of
/// the probability falls below the bound. A bound above 1 is clipped to 1.
pub fn thickness_check(p: &ThicknessParams, seed: Seed) -> Result<ThicknessOutcome> {
    let domain = p.g0.domain();
    let h = BaseMeasure::uniform(domain.clone());
    let kernel = p.kernel;
    if kernel.dim() != domain.dim() {
        return Err(Error::DomainMismatch);
    }
    let t_gamma = StickBreakingTruncation::for_tolerance(p.gamma, p.tail_eps, p.tail_target)?;
    let t_alpha = StickBreakingTruncation::for_tolerance(p.alpha, p.tail_eps, p.tail_target)?;
    let marginal = |base: DiscreteMeasure| DensitySpec::Marginal {
        base,
        alpha: p.alpha,
        kernel,
        n: p.n,
        truncation: t_alpha,
        bank_size: p.bank_size,
    };
    let reference = marginal(p.g0.clone());
    let delta2 = p.delta * p.delta;
    let divergences = parallel::map(p.n_prior, |i| -> Result<(f64, f64)> {
        let s = seed.derive_path(&[tag::PRIOR, i as u64]);
        let g = sample_dp(p.gamma, &h, &t_gamma, s)?;
        let alt = marginal(g.measure);
        let kl = estimate_divergence(DivergenceKind::KL, &reference, &alt, p.n_mc, s.derive(tag::MC))?;
        let k2 = estimate_divergence(DivergenceKind::K2, &reference, &alt, p.n_mc, s.derive(tag::MC))?;
        Ok((kl.value, k2.value))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let hits = divergences.iter().filter(|(k, k2)| *k <= delta2 && *k2 <= delta2).count();
    let d = domain.dim() as f64;
    let n = p.n as f64;
    let packing = (domain.diameter().powf(d) * (n.powi(3) / p.delta).powf(d / p.r)).max(1.0);
    let exponent = (1.0 + d / p.r) * (packing - 1.0) + packing * d / p.r;
    let log_bound = (p.bound_c * (packing * p.gamma.ln() + exponent * (delta2 / n.powi(3)).ln())).min(0.0);
    let guard_ok = n > p.guard_c * (1.0 / p.delta).ln();
    let log_upper_conf = upper_limit(hits, p.n_prior, 0.01).ln();
    let margin = log_upper_conf - log_bound;
    let status = if !guard_ok {
        Status::Skipped
    } else if hits == 0 {
        Status::Inconclusive
    } else if margin >= 0.0 {
        Status::Pass
    } else {
        Status::Fail
    };
    Ok(ThicknessOutcome {
        hits,
        n_prior: p.n_prior,
        empirical: hits as f64 / p.n_prior as f64,
        log_upper_conf,
        packing,
        log_bound,
        guard_ok,
        divergences,
        status,
        margin,
    })
}

/// Hellinger distance between `P * f` and `Q * f` on the line, by quadrature.
pub fn hellinger_1d(p: &DiscreteMeasure, q: &DiscreteMeasure, kernel: &KernelModel) -> Result<f64> {
    if kernel.dim() != 1 || p.dim() != 1 || q.dim() != 1 {
        return Err(Error::InvalidParameter("quadrature Hellinger is one-dimensional".into()));
    }
    let mut breaks: Vec<f64> = p.atoms().iter().chain(q.atoms()).map(|a| a.loc[0]).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let affinity = real_line(
        |y| (mixture_density(p, kernel, &[y]) * mixture_density(q, kernel, &[y])).sqrt(),
        &breaks,
    );
    Ok((1.0 - affinity).max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BorrowRow {
    pub rep: usize,
    pub n_tilde: usize,
    /// `W_1(Ĝ, G0)` with all `m` groups.
    pub w1_m: f64,
    /// `W_1(Ĝ, G0)` with the first `m_small` groups.
    pub w1_small: f64,
    pub h_standalone: f64,
    pub h_hierarchical: f64,
    pub h_oracle: f64,
}

/// Plug-in base estimates from `m` demixed groups, then three fits of a small
/// extra group: free atoms, atoms of `Ĝ`, and the true atoms.
pub fn borrow_strength_experiment(p: &BorrowParams, seed: Seed) -> Result<Vec<BorrowRow>> {
    if p.m_small == 0 || p.m_small > p.m || p.reps == 0 {
        return Err(Error::InvalidParameter("need 1 <= m_small <= m and reps >= 1".into()));
    }
    let domain = p.g0.domain();
    let kernel = p.kernel;
    if kernel.dim() != domain.dim() {
        return Err(Error::DomainMismatch);
    }
    let k = crate::measures::truncation_for_tolerance(p.tail_eps, p.alpha, p.tail_target)?;
    let cfg = p.demix;
    let radius = p.merge_radius.unwrap_or(kernel.bandwidth() / 2.0);
    let group = |s: Seed, i: usize, n: usize| -> Result<(DiscreteMeasure, Vec<Vec<f64>>)> {
        let w = dp_weights_on_atoms(p.alpha, &p.g0, k, s.derive_path(&[tag::GROUP, i as u64]))?;
        let q = reweight(&p.g0, &w)?;
        let data = sample_mixture(&q, &kernel, n, &mut s.derive_path(&[tag::DATA, i as u64]).rng())?;
        Ok((q, data))
    };
    let mut rows = Vec::new();
    for rep in 0..p.reps {
        let s = seed.derive_path(&[tag::REP, rep as u64]);
        let fits = parallel::map(p.m, |i| {
            let (_, data) = group(s, i, p.n)?;
            eta_mle(&data, &kernel, domain, &cfg, s.derive_path(&[tag::FIT, i as u64]))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let g_hat = plug_in_base_estimate(&fits, radius)?;
        let g_small = plug_in_base_estimate(&fits[..p.m_small], radius)?;
        let w1_m = wasserstein_distance(&g_hat, &p.g0, 1.0)?;
        let w1_small = wasserstein_distance(&g_small, &p.g0, 1.0)?;
        for (t, &n_tilde) in p.n_tilde_grid.iter().enumerate() {
            let idx = p.m + t;
            let (q_star, data) = group(s, idx, n_tilde)?;
            let fit_seed = s.derive_path(&[tag::FIT, idx as u64]);
            let free = eta_mle(&data, &kernel, domain, &cfg, fit_seed)?;
            let hier = em_fixed_atoms(&data, &kernel, &g_hat, &cfg)?;
            let oracle = em_fixed_atoms(&data, &kernel, &p.g0, &cfg)?;
            rows.push(BorrowRow {
                rep,
                n_tilde,
                w1_m,
                w1_small,
                h_standalone: hellinger_1d(&free.q_hat, &q_star, &kernel)?,
                h_hierarchical: hellinger_1d(&hier.q_hat, &q_star, &kernel)?,
                h_oracle: hellinger_1d(&oracle.q_hat, &q_star, &kernel)?,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionRow {
    pub alternative: usize,
    pub n: usize,
    pub w_rr: f64,
    /// `c0 W_r^r(G0, G')` with `c0 = (2 diam)^{-r}`.
    pub scaled_w_rr: f64,
    pub v_hat: f64,
    pub v_stderr: f64,
    pub residual: f64,
}

/// Lower estimate of `V(p_{Y[n]|G0}, p_{Y[n]|G'})` from the demixing test:
/// demix a dataset and call it `G'` when `Q̂` is closer to `G'` than to `G0`.
pub fn contraction_experiment(p: &ContractionParams, seed: Seed) -> Result<Vec<ContractionRow>> {
    let domain = p.g0.domain();
    let kernel = p.kernel;
    if kernel.dim() != domain.dim() {
        return Err(Error::DomainMismatch);
    }
    let k = crate::measures::truncation_for_tolerance(p.tail_eps, p.alpha, p.tail_target)?;
    let c0 = (2.0 * domain.diameter()).powf(-p.r);
    let mut rows = Vec::new();
    for (j, gp) in p.alternatives.iter().enumerate() {
        if gp.domain() != domain {
            return Err(Error::DomainMismatch);
        }
        let w_rr = wasserstein_cost(&p.g0, gp, p.r)?;
        let cfg = DemixConfig {
            k_max: p.g0.len().max(gp.len()),
            ..p.demix
        };
        for &n in &p.n_grid {
            // fraction of datasets from `truth` that the test assigns to G'
            let rate = |truth: &DiscreteMeasure, side: u64| -> Result<(f64, f64)> {
                let calls = parallel::map(p.reps, |rep| -> Result<bool> {
                    let s = seed.derive_path(&[tag::REP, j as u64, n as u64, side, rep as u64]);
                    let w = dp_weights_on_atoms(p.alpha, truth, k, s.derive(tag::GROUP))?;
                    let q = reweight(truth, &w)?;
                    let data = sample_mixture(&q, &kernel, n, &mut s.derive(tag::DATA).rng())?;
                    let fit = eta_mle(&data, &kernel, domain, &cfg, s.derive(tag::FIT))?;
                    Ok(wasserstein_cost(&fit.q_hat, gp, p.r)? < wasserstein_cost(&fit.q_hat, &p.g0, p.r)?)
                })
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
                Ok(proportion(calls.iter().filter(|&&c| c).count(), p.reps))
            };
            let (hit, se1) = rate(gp, 1)?;
            let (false_alarm, se0) = rate(&p.g0, 0)?;
            let v_hat = hit - false_alarm;
            rows.push(ContractionRow {
                alternative: j,
                n,
                w_rr,
                scaled_w_rr: c0 * w_rr,
                v_hat,
                v_stderr: se1.hypot(se0),
                residual: c0 * w_rr - v_hat,
            });
        }
    }
    Ok(rows)
}
