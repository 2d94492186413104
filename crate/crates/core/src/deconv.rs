//! Mixing-measure estimation by maximum likelihood.
//!
//! [`eta_mle`] maximizes the average log-likelihood of `Q * f` over measures
//! with at most `k_max` atoms in the domain box by multi-start EM. The M-step
//! location update depends on the kernel family:
//!
//! * gaussian: weighted mean, clamped into the box
//! * laplace: weighted median, clamped
//! * cauchy: one majorize-minimize step (reweighted mean), clamped
//! * triangular: golden-section search of the concave objective on the
//!   interval that keeps every responsible point inside the kernel support
//!
//! All four are exact or monotone maximizers of the EM surrogate, so the
//! log-likelihood never decreases; the diagnostics record any violation.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelModel};
use crate::measures::sample_mixture;
use crate::parallel;
use crate::rng::{tag, Seed};
use crate::stats::{log_sum_exp, mean_stderr};
use crate::transport::{euclidean, wasserstein_distance, Atom, BoundedDomain, DiscreteMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemixConfig {
    pub k_max: usize,
    pub eta: f64,
    pub restarts: usize,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for DemixConfig {
    fn default() -> Self {
        DemixConfig {
            k_max: 2,
            eta: 0.0,
            restarts: 8,
            tol: 1e-9,
            max_iters: 1000,
        }
    }
}

impl DemixConfig {
    fn validate(&self) -> Result<()> {
        if self.k_max < 1 {
            return Err(Error::InvalidParameter("k_max must be >= 1".into()));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::InvalidParameter("eta must be >= 0".into()));
        }
        if self.restarts < 1 {
            return Err(Error::InvalidParameter("restarts must be >= 1".into()));
        }
        if !(self.tol >= 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidParameter("tol must be >= 0 and max_iters >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemixDiagnostics {
    pub iterations: Vec<usize>,
    pub restart_logliks: Vec<f64>,
    pub best_restart: usize,
    /// Restarts whose final log-likelihood is within `eta` of the best.
    pub restarts_within_eta: usize,
    /// Largest per-iteration drop of the log-likelihood over all restarts.
    pub max_decrease: f64,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemixResult {
    #[serde(rename = "Q_hat")]
    pub q_hat: DiscreteMeasure,
    pub loglik_per_obs: f64,
    /// Gap between the best and the runner-up restart.
    pub eta_achieved: f64,
    pub diagnostics: DemixDiagnostics,
}

struct EmRun {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
    loglik: f64,
    iterations: usize,
    max_decrease: f64,
}

fn check_data(data: &[Vec<f64>], kernel: &KernelModel, domain: &BoundedDomain) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if kernel.dim() != domain.dim() || data.iter().any(|y| y.len() != kernel.dim()) {
        return Err(Error::DomainMismatch);
    }
    if data.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("data contain non-finite values".into()));
    }
    Ok(())
}

/// E-step: average log-likelihood and responsibilities `resp[a][i]`.
fn e_step(data: &[Vec<f64>], kernel: &KernelModel, atoms: &[Vec<f64>], weights: &[f64], resp: &mut [Vec<f64>]) -> f64 {
    let k = atoms.len();
    let mut terms = vec![0.0; k];
    let mut diff = vec![0.0; kernel.dim()];
    let mut total = 0.0;
    for (i, y) in data.iter().enumerate() {
        for a in 0..k {
            for (dv, (yv, tv)) in diff.iter_mut().zip(y.iter().zip(&atoms[a])) {
                *dv = yv - tv;
            }
            terms[a] = weights[a].ln() + kernel.log_density(&diff);
        }
        let l = log_sum_exp(&terms);
        total += l;
        for a in 0..k {
            resp[a][i] = if l == f64::NEG_INFINITY { 0.0 } else { (terms[a] - l).exp() };
        }
    }
    total / data.len() as f64
}

fn weighted_median(pairs: &mut [(f64, f64)]) -> f64 {
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    for &(x, w) in pairs.iter() {
        acc += w;
        if acc >= 0.5 * total {
            return x;
        }
    }
    pairs[pairs.len() - 1].0
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..120 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// New location for coordinate `c` of an atom given responsibilities `r`.
fn update_coordinate(data: &[Vec<f64>], r: &[f64], c: usize, current: f64, kernel: &KernelModel, lo: f64, hi: f64) -> f64 {
    let mass: f64 = r.iter().sum();
    if !(mass > 0.0) {
        return current;
    }
    let h = kernel.bandwidth;
    let next = match kernel.family {
        KernelFamily::Gaussian => {
            // centred on a data point so identical observations reproduce it exactly
            let origin = data.iter().zip(r).find(|(_, &w)| w > 0.0).map_or(0.0, |(y, _)| y[c]);
            origin + data.iter().zip(r).map(|(y, w)| w * (y[c] - origin)).sum::<f64>() / mass
        }
        KernelFamily::Laplace => {
            let mut pairs: Vec<(f64, f64)> = data.iter().zip(r).filter(|(_, &w)| w > 0.0).map(|(y, &w)| (y[c], w)).collect();
            weighted_median(&mut pairs)
        }
        KernelFamily::Cauchy => {
            let (mut num, mut den) = (0.0, 0.0);
            for (y, &w) in data.iter().zip(r) {
                let z = y[c] - current;
                let u = w / (h * h + z * z);
                num += u * y[c];
                den += u;
            }
            num / den
        }
        KernelFamily::Triangular => {
            let active: Vec<(f64, f64)> = data.iter().zip(r).filter(|(_, &w)| w > 0.0).map(|(y, &w)| (y[c], w)).collect();
            let lo_f = active.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max) - h;
            let hi_f = active.iter().map(|p| p.0).fold(f64::INFINITY, f64::min) + h;
            let (a, b) = (lo_f.max(lo), hi_f.min(hi));
            let obj = |t: f64| -> f64 {
                active
                    .iter()
                    .map(|&(y, w)| {
                        let u = 1.0 - (y - t).abs() / h;
                        if u > 0.0 {
                            w * u.ln()
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .sum()
            };
            if !(b > a) {
                return current;
            }
            let cand = golden_max(obj, a, b);
            return if obj(cand) > obj(current) { cand } else { current };
        }
    };
    next.clamp(lo, hi)
}

fn run_em(
    data: &[Vec<f64>],
    kernel: &KernelModel,
    domain: &BoundedDomain,
    mut atoms: Vec<Vec<f64>>,
    mut weights: Vec<f64>,
    move_atoms: bool,
    cfg: &DemixConfig,
) -> Result<EmRun> {
    let k = atoms.len();
    let mut resp = vec![vec![0.0; data.len()]; k];
    let mut prev = f64::NEG_INFINITY;
    let mut max_decrease = 0.0f64;
    let mut iterations = 0;
    let mut loglik;
    loop {
        loglik = e_step(data, kernel, &atoms, &weights, &mut resp);
        if !loglik.is_finite() {
            return Err(Error::NumericalFailure(format!("log-likelihood is {loglik}")));
        }
        if prev.is_finite() {
            max_decrease = max_decrease.max(prev - loglik);
        }
        if iterations >= cfg.max_iters || (prev.is_finite() && (loglik - prev).abs() <= cfg.tol) {
            break;
        }
        prev = loglik;
        iterations += 1;
        let n = data.len() as f64;
        for a in 0..k {
            weights[a] = resp[a].iter().sum::<f64>() / n;
        }
        // rounding can leave the simplex by an ulp
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        if move_atoms {
            for a in 0..k {
                for c in 0..kernel.dim() {
                    atoms[a][c] = update_coordinate(
                        data,
                        &resp[a],
                        c,
                        atoms[a][c],
                        kernel,
                        domain.lower()[c],
                        domain.upper()[c],
                    );
                }
            }
        }
    }
    Ok(EmRun {
        atoms,
        weights,
        loglik,
        iterations,
        max_decrease,
    })
}

/// k-means++ seeding over the data, projected into the box.
fn kmeans_pp(data: &[Vec<f64>], k: usize, domain: &BoundedDomain, seed: Seed) -> Vec<Vec<f64>> {
    let mut rng = seed.rng();
    let mut centers = vec![data[rng.random_range(0..data.len())].clone()];
    let mut d2: Vec<f64> = data.iter().map(|y| euclidean(y, &centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = data.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        } else {
            rng.random_range(0..data.len())
        };
        let c = data[pick].clone();
        for (v, y) in d2.iter_mut().zip(data) {
            *v = v.min(euclidean(y, &c).powi(2));
        }
        centers.push(c);
    }
    for c in centers.iter_mut() {
        domain.project(c);
    }
    centers
}

/// Feasible start for a compact kernel: sweep along the first coordinate and
/// open a new atom at the first point not strictly inside an existing support box.
fn cover_init(data: &[Vec<f64>], k: usize, h: f64, domain: &BoundedDomain) -> Option<Vec<Vec<f64>>> {
    let mut order: Vec<&Vec<f64>> = data.iter().collect();
    order.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let inside = |c: &[f64], y: &[f64]| c.iter().zip(y).all(|(a, b)| (a - b).abs() < h);
    let mut centers: Vec<Vec<f64>> = Vec::new();
    for y in order {
        if centers.iter().any(|c| inside(c, y)) {
            continue;
        }
        if centers.len() == k {
            return None;
        }
        let mut c = y.clone();
        c[0] += h * (1.0 - 1e-6);
        domain.project(&mut c);
        if !inside(&c, y) {
            c = y.clone();
        }
        centers.push(c);
    }
    while centers.len() < k {
        centers.push(centers[centers.len() - 1].clone());
    }
    Some(centers)
}

fn to_measure(domain: &BoundedDomain, atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<DiscreteMeasure> {
    DiscreteMeasure::from_unnormalized(
        domain.clone(),
        atoms.into_iter().zip(weights).map(|(loc, w)| Atom { loc, w }).collect(),
    )
}

fn finish(runs: Vec<Result<EmRun>>, domain: &BoundedDomain, cfg: &DemixConfig) -> Result<DemixResult> {
    // a start with zero likelihood (compact kernels) is dropped; fail only if all are
    if runs.iter().all(|r| r.is_err()) {
        return Err(runs.into_iter().find_map(Result::err).expect("restarts >= 1"));
    }
    let logliks: Vec<f64> = runs.iter().map(|r| r.as_ref().map_or(f64::NEG_INFINITY, |r| r.loglik)).collect();
    let best = (0..runs.len())
        .fold(0, |b, i| if logliks[i] > logliks[b] { i } else { b });
    let runner_up = (0..runs.len())
        .filter(|&i| i != best)
        .map(|i| logliks[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let eta_achieved = if runner_up.is_finite() { logliks[best] - runner_up } else { 0.0 };
    let max_decrease = runs.iter().flatten().map(|r| r.max_decrease).fold(0.0, f64::max);
    let diagnostics = DemixDiagnostics {
        iterations: runs.iter().map(|r| r.as_ref().map_or(0, |r| r.iterations)).collect(),
        restart_logliks: logliks.clone(),
        best_restart: best,
        restarts_within_eta: logliks.iter().filter(|&&l| logliks[best] - l <= cfg.eta).count(),
        max_decrease,
        monotone: max_decrease <= 1e-12 * (1.0 + logliks[best].abs()),
    };
    let run = runs.into_iter().nth(best).expect("best restart exists")?;
    Ok(DemixResult {
        q_hat: to_measure(domain, run.atoms, run.weights)?,
        loglik_per_obs: run.loglik,
        eta_achieved,
        diagnostics,
    })
}

/// η-MLE of the mixing measure from observations of `Q * f`.
pub fn eta_mle(data: &[Vec<f64>], kernel: &KernelModel, domain: &BoundedDomain, cfg: &DemixConfig, seed: Seed) -> Result<DemixResult> {
    cfg.validate()?;
    check_data(data, kernel, domain)?;
    let k = cfg.k_max.min(data.len());
    let runs = (0..cfg.restarts)
        .map(|r| {
            let atoms = kmeans_pp(data, k, domain, seed.derive_path(&[tag::RESTART, r as u64]));
            let w = vec![1.0 / k as f64; k];
            match run_em(data, kernel, domain, atoms, w.clone(), true, cfg) {
                Err(e) if kernel.family == KernelFamily::Triangular => {
                    let start = cover_init(data, k, kernel.bandwidth, domain).ok_or(e)?;
                    run_em(data, kernel, domain, start, w, true, cfg)
                }
                other => other,
            }
        })
        .collect();
    finish(runs, domain, cfg)
}

/// Maximum-likelihood weights on a fixed atom set (locations are not moved).
pub fn em_fixed_atoms(data: &[Vec<f64>], kernel: &KernelModel, atoms: &DiscreteMeasure, cfg: &DemixConfig) -> Result<DemixResult> {
    cfg.validate()?;
    check_data(data, kernel, atoms.domain())?;
    let locs: Vec<Vec<f64>> = atoms.atoms().iter().map(|a| a.loc.clone()).collect();
    let k = locs.len();
    let run = run_em(data, kernel, atoms.domain(), locs, vec![1.0 / k as f64; k], false, cfg)?;
    finish(vec![Ok(run)], atoms.domain(), cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub mean_w2: f64,
    pub stderr: f64,
    pub reps: usize,
}

/// Mean `W_2(Q̂_n, Q_0)` over independent datasets for each sample size.
pub fn demix_rate_curve(
    q0: &DiscreteMeasure,
    kernel: &KernelModel,
    n_grid: &[usize],
    reps: usize,
    cfg: &DemixConfig,
    seed: Seed,
) -> Result<Vec<RateRow>> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[1] <= w[0]) || n_grid[0] == 0 {
        return Err(Error::InvalidParameter("n_grid must be positive and strictly increasing".into()));
    }
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be >= 1".into()));
    }
    n_grid
        .iter()
        .map(|&n| {
            let errs = parallel::map(reps, |rep| -> Result<f64> {
                let s = seed.derive_path(&[tag::REP, rep as u64, n as u64]);
                let data = sample_mixture(q0, kernel, n, &mut s.derive(tag::DATA).rng())?;
                let fit = eta_mle(&data, kernel, q0.domain(), cfg, s)?;
                wasserstein_distance(&fit.q_hat, q0, 2.0)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let (mean_w2, stderr) = mean_stderr(&errs);
            Ok(RateRow {
                n,
                mean_w2,
                stderr,
                reps,
            })
        })
        .collect()
}

/// Merge atoms closer than `radius` into their weighted centroid, closest pair first.
pub fn merge_close_atoms(measure: &DiscreteMeasure, radius: f64) -> Result<DiscreteMeasure> {
    let mut atoms: Vec<Atom> = measure.atoms().to_vec();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..atoms.len() {
            for j in i + 1..atoms.len() {
                let d = euclidean(&atoms[i].loc, &atoms[j].loc);
                if d <= radius && best.is_none_or(|b| d < b.0) {
                    best = Some((d, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        let b = atoms.swap_remove(j);
        let a = &mut atoms[i];
        let w = a.w + b.w;
        for (x, y) in a.loc.iter_mut().zip(&b.loc) {
            *x = (*x * a.w + y * b.w) / w;
        }
        a.w = w;
    }
    DiscreteMeasure::from_unnormalized(measure.domain().clone(), atoms)
}

/// `(1/m) Σ Q̂_i` with atoms closer than `merge_radius` merged.
pub fn plug_in_base_estimate(demixed: &[DemixResult], merge_radius: f64) -> Result<DiscreteMeasure> {
    if demixed.is_empty() {
        return Err(Error::InvalidParameter("need at least one demixed group".into()));
    }
    let domain = demixed[0].q_hat.domain();
    if demixed.iter().any(|d| d.q_hat.domain() != domain) {
        return Err(Error::DomainMismatch);
    }
    let m = demixed.len() as f64;
    let atoms = demixed
        .iter()
        .flat_map(|d| d.q_hat.atoms().iter().map(move |a| Atom { loc: a.loc.clone(), w: a.w / m }))
        .collect();
    let pooled = DiscreteMeasure::from_unnormalized(domain.clone(), atoms)?;
    merge_close_atoms(&pooled, merge_radius)
}
