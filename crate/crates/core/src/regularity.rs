//! Density-ratio test sets separating two Dirichlet laws on a common atom set,
//! and Monte Carlo estimates of their gaps and boundary tubes.
//!
//! For `D = Dir(αβ)` and `D' = Dir(α'β')` the set where the `D'` density is
//! larger is `B = {q : Σ Δ_i log q_i < c}` with `Δ_i = αβ_i − α'β'_i`.
//! Tubes are measured under `D` outside `B`. Two distance surrogates exist:
//!
//! * [`Surrogate::LInf`] (default) bounds a `W_r` ball of radius `δ` by the
//!   sup-norm box of half-width `(δ/m)^r` on the simplex, `m` the smallest atom
//!   gap, and asks whether the box meets `B`. This never misses a point of the
//!   true tube and is exact when `k = 2`.
//! * [`Surrogate::LineSearch`] follows the projected gradient of the defining
//!   function to the level set and measures the exact `W_r` to that point. It
//!   can only under-count the tube.
//!
//! When every `Δ_i / q_i` is equal the gradient vanishes. Such points are
//! treated as outside the tube; they have Dirichlet measure zero.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::parallel;
use crate::rng::{tag, Rng, Seed};
use crate::stats::{linear_fit, log_sum_exp, proportion};
use crate::transport::{euclidean, solve_transport, DiscreteMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `B = {Σ Δ_i log q_i < c}`
    Below,
    /// `B = {Σ Δ_i log q_i > c}`
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexTestSet {
    pub atoms: Vec<Vec<f64>>,
    pub deltas: Vec<f64>,
    pub threshold: f64,
    pub orientation: Side,
    /// `Δ = 0`: `B` is empty or the whole simplex.
    pub degenerate: bool,
    /// Dirichlet parameters `αβ` of the reference law.
    pub shape: Vec<f64>,
    /// Dirichlet parameters `α'β'` of the alternative.
    pub shape_alt: Vec<f64>,
}

impl SimplexTestSet {
    pub fn k(&self) -> usize {
        self.atoms.len()
    }

    fn phi(&self, log_q: &[f64]) -> f64 {
        let s: f64 = self
            .deltas
            .iter()
            .zip(log_q)
            .map(|(&d, &l)| if d == 0.0 { 0.0 } else { d * l })
            .sum();
        match self.orientation {
            Side::Below => s - self.threshold,
            Side::Above => self.threshold - s,
        }
    }

    /// Membership from log coordinates, which stay finite for tiny weights.
    pub fn contains_log(&self, log_q: &[f64]) -> bool {
        self.phi(log_q) < 0.0
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        self.contains_log(&q.iter().map(|v| v.ln()).collect::<Vec<_>>())
    }

    fn min_gap(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.k() {
            for j in i + 1..self.k() {
                m = m.min(euclidean(&self.atoms[i], &self.atoms[j]));
            }
        }
        m
    }
}

/// Test set where the `Dir(α'β')` density strictly exceeds the `Dir(αβ)` density.
pub fn build_test_set(g: &DiscreteMeasure, gp: &DiscreteMeasure, alpha: f64, alphap: f64) -> Result<SimplexTestSet> {
    if !(alpha > 0.0 && alphap > 0.0 && alpha.is_finite() && alphap.is_finite()) {
        return Err(Error::InvalidParameter("concentrations must be positive".into()));
    }
    if g.domain() != gp.domain() || g.len() != gp.len() || g.atoms().iter().any(|a| !gp.has_atom(&a.loc)) {
        return Err(Error::SupportMismatch);
    }
    if g.len() < 2 {
        return Err(Error::InvalidParameter("need at least two atoms".into()));
    }
    let atoms: Vec<Vec<f64>> = g.atoms().iter().map(|a| a.loc.clone()).collect();
    let shape: Vec<f64> = g.weights().iter().map(|w| alpha * w).collect();
    let shape_alt: Vec<f64> = atoms.iter().map(|l| alphap * gp.weight_at(l)).collect();
    if shape.iter().chain(&shape_alt).any(|&a| !(a > 0.0)) {
        return Err(Error::DegenerateDirichlet("every Dirichlet parameter must be positive".into()));
    }
    let deltas: Vec<f64> = shape.iter().zip(&shape_alt).map(|(a, b)| a - b).collect();
    let threshold = ln_gamma(alphap) - ln_gamma(alpha)
        + shape
            .iter()
            .zip(&shape_alt)
            .map(|(&a, &b)| ln_gamma(a) - ln_gamma(b))
            .sum::<f64>();
    Ok(SimplexTestSet {
        degenerate: deltas.iter().all(|&d| d == 0.0),
        atoms,
        deltas,
        threshold,
        orientation: Side::Below,
        shape,
        shape_alt,
    })
}

/// Draws `log q` for `q ~ Dir(shape)`; `Gamma(a) = Gamma(a + 1) U^{1/a}` keeps
/// small shapes from underflowing.
struct LogDirichlet {
    gammas: Vec<(Gamma<f64>, f64)>,
}

impl LogDirichlet {
    fn new(shape: &[f64]) -> Self {
        LogDirichlet {
            gammas: shape
                .iter()
                .map(|&a| (Gamma::new(a + 1.0, 1.0).expect("positive shape"), a))
                .collect(),
        }
    }

    fn sample(&self, rng: &mut Rng, out: &mut [f64]) {
        for (o, (g, a)) in out.iter_mut().zip(&self.gammas) {
            let u: f64 = 1.0 - rng.random::<f64>();
            *o = g.sample(rng).ln() + u.ln() / a;
        }
        let z = log_sum_exp(out);
        out.iter_mut().for_each(|o| *o -= z);
    }
}

const CHUNK: usize = 1 << 14;

/// Runs `f` on every draw of `Dir(shape)` in fixed chunks with their own streams
/// and sums the per-draw count vectors.
fn mc_counts(shape: &[f64], n_mc: usize, seed: Seed, width: usize, f: impl Fn(&[f64], &mut [usize]) + Sync) -> Vec<usize> {
    let chunks = n_mc.div_ceil(CHUNK);
    let dir = LogDirichlet::new(shape);
    parallel::map(chunks, |c| {
        let mut rng = seed.derive_path(&[tag::MC, c as u64]).rng();
        let mut counts = vec![0usize; width];
        let mut lq = vec![0.0; shape.len()];
        for _ in 0..CHUNK.min(n_mc - c * CHUNK) {
            dir.sample(&mut rng, &mut lq);
            f(&lq, &mut counts);
        }
        counts
    })
    .into_iter()
    .fold(vec![0; width], |mut acc, c| {
        acc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        acc
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub gap: f64,
    pub stderr: f64,
    pub n_mc: usize,
}

fn gap_of(p_alt: (f64, f64), p_ref: (f64, f64), n_mc: usize) -> GapEstimate {
    GapEstimate {
        gap: p_alt.0 - p_ref.0,
        stderr: p_alt.1.hypot(p_ref.1),
        n_mc,
    }
}

/// `D'(B) − D(B)`, the total variation between the two Dirichlet laws.
pub fn variational_gap(ts: &SimplexTestSet, n_mc: usize, seed: Seed) -> Result<GapEstimate> {
    if n_mc == 0 {
        return Err(Error::InvalidParameter("n_mc must be >= 1".into()));
    }
    let hits = |shape: &[f64], s: Seed| {
        mc_counts(shape, n_mc, s, 1, |lq, c| c[0] += ts.contains_log(lq) as usize)[0]
    };
    let alt = hits(&ts.shape_alt, seed.derive(1));
    let reference = hits(&ts.shape, seed.derive(0));
    Ok(gap_of(proportion(alt, n_mc), proportion(reference, n_mc), n_mc))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Surrogate {
    #[default]
    LInf,
    LineSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeEstimate {
    pub delta: f64,
    pub measure: f64,
    pub stderr: f64,
    pub n_mc: usize,
    pub surrogate: Surrogate,
}

fn term(d: f64, q: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        d * q.ln()
    }
}

/// Exact minimum of `Σ Δ_i log q_i` over the simplex intersected with the box
/// `[lo, hi]`, from the stationary points of every face.
fn min_over_box(deltas: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let k = deltas.len();
    let mut best = f64::INFINITY;
    let mut state = vec![0u8; k];
    let mut q = vec![0.0; k];
    'patterns: loop {
        let mut fixed = 0.0;
        let (mut d_sum, mut lo_sum, mut hi_sum) = (0.0, 0.0, 0.0);
        let (mut interior, mut zero_interior) = (0, 0);
        for i in 0..k {
            match state[i] {
                0 => fixed += lo[i],
                1 => fixed += hi[i],
                _ => {
                    interior += 1;
                    zero_interior += (deltas[i] == 0.0) as usize;
                    d_sum += deltas[i];
                    lo_sum += lo[i];
                    hi_sum += hi[i];
                }
            }
        }
        let s = 1.0 - fixed;
        let feasible = if interior == 0 {
            s.abs() <= 1e-12
        } else if zero_interior == interior {
            s >= lo_sum - 1e-12 && s <= hi_sum + 1e-12
        } else {
            zero_interior == 0 && d_sum != 0.0 && s > 0.0
        };
        if feasible {
            let mut value = 0.0;
            let mut ok = true;
            for i in 0..k {
                q[i] = match state[i] {
                    0 => lo[i],
                    1 => hi[i],
                    _ if deltas[i] == 0.0 => continue,
                    _ => deltas[i] * s / d_sum,
                };
                if state[i] == 2 && !(q[i] >= lo[i] && q[i] <= hi[i]) {
                    ok = false;
                    break;
                }
                value += term(deltas[i], q[i]);
            }
            if ok {
                best = best.min(value);
            }
        }
        for st in state.iter_mut() {
            *st += 1;
            if *st < 3 {
                continue 'patterns;
            }
            *st = 0;
        }
        break;
    }
    best
}

const MAX_LINF_ATOMS: usize = 12;

fn in_linf_tube(ts: &SimplexTestSet, q: &[f64], rho: f64, lo: &mut [f64], hi: &mut [f64]) -> bool {
    for i in 0..q.len() {
        lo[i] = (q[i] - rho).max(0.0);
        hi[i] = (q[i] + rho).min(1.0);
    }
    let m = min_over_box(&ts.deltas, lo, hi);
    match ts.orientation {
        Side::Below => m < ts.threshold,
        Side::Above => {
            let flipped: Vec<f64> = ts.deltas.iter().map(|d| -d).collect();
            -min_over_box(&flipped, lo, hi) > ts.threshold
        }
    }
}

/// `W_r` from `q` to the first level-set crossing along the projected
/// descent direction, or `None` when the line never reaches the boundary.
fn line_search_distance(ts: &SimplexTestSet, q: &[f64], r: f64, cost: &[f64]) -> Result<Option<f64>> {
    let k = q.len();
    let sign = if ts.orientation == Side::Below { 1.0 } else { -1.0 };
    let grad: Vec<f64> = (0..k).map(|i| sign * ts.deltas[i] / q[i]).collect();
    let mean = grad.iter().sum::<f64>() / k as f64;
    let dir: Vec<f64> = grad.iter().map(|g| mean - g).collect();
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    if !(norm > 1e-14 * grad.iter().map(|g| g.abs()).fold(0.0, f64::max)) {
        return Ok(None);
    }
    let t_max = (0..k)
        .filter(|&i| dir[i] < 0.0)
        .map(|i| q[i] / -dir[i])
        .fold(f64::INFINITY, f64::min);
    let at = |t: f64| -> Vec<f64> { (0..k).map(|i| (q[i] + t * dir[i]).max(0.0).ln()).collect() };
    let (mut a, mut b) = (0.0, t_max);
    if ts.phi(&at(b)) >= 0.0 {
        return Ok(None);
    }
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if ts.phi(&at(m)) < 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    let target: Vec<f64> = at(b).iter().map(|l| l.exp()).collect();
    let plan = solve_transport(q, &target, cost)?;
    Ok(Some(plan.cost.max(0.0).powf(1.0 / r)))
}

/// Counts draws of `D` outside `B` that fall in each tube `delta_grid[j]`,
/// sharing one set of draws across the grid.
fn tube_counts(ts: &SimplexTestSet, deltas: &[f64], r: f64, n_mc: usize, seed: Seed, surrogate: Surrogate) -> Result<Vec<usize>> {
    if !(r >= 1.0) || n_mc == 0 {
        return Err(Error::InvalidParameter("need r >= 1 and n_mc >= 1".into()));
    }
    if deltas.iter().any(|&d| !(d >= 0.0)) {
        return Err(Error::InvalidParameter("tube radius must be >= 0".into()));
    }
    if surrogate == Surrogate::LInf && ts.k() > MAX_LINF_ATOMS {
        return Err(Error::InvalidParameter(format!("sup-norm surrogate supports at most {MAX_LINF_ATOMS} atoms")));
    }
    let m = ts.min_gap();
    let cost: Vec<f64> = ts
        .atoms
        .iter()
        .flat_map(|a| ts.atoms.iter().map(move |b| euclidean(a, b).powf(r)))
        .collect();
    let failure = std::sync::Mutex::new(None);
    let counts = mc_counts(&ts.shape, n_mc, seed, deltas.len(), |lq, counts| {
        if ts.degenerate || ts.contains_log(lq) {
            return;
        }
        let q: Vec<f64> = lq.iter().map(|l| l.exp()).collect();
        match surrogate {
            Surrogate::LInf => {
                let (mut lo, mut hi) = (vec![0.0; q.len()], vec![0.0; q.len()]);
                for (c, &d) in counts.iter_mut().zip(deltas) {
                    if d > 0.0 && in_linf_tube(ts, &q, (d / m).powf(r), &mut lo, &mut hi) {
                        *c += 1;
                    }
                }
            }
            Surrogate::LineSearch => match line_search_distance(ts, &q, r, &cost) {
                Ok(Some(dist)) => {
                    for (c, &d) in counts.iter_mut().zip(deltas) {
                        *c += (d > 0.0 && dist <= d) as usize;
                    }
                }
                Ok(None) => {}
                Err(e) => *failure.lock().unwrap() = Some(e),
            },
        }
    });
    match failure.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(counts),
    }
}

/// `D(B_δ \ B)` under the chosen distance surrogate.
pub fn tube_measure(ts: &SimplexTestSet, delta: f64, r: f64, n_mc: usize, seed: Seed, surrogate: Surrogate) -> Result<TubeEstimate> {
    let hits = tube_counts(ts, &[delta], r, n_mc, seed, surrogate)?[0];
    let (measure, stderr) = proportion(hits, n_mc);
    Ok(TubeEstimate {
        delta,
        measure,
        stderr,
        n_mc,
        surrogate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r2: f64,
    pub target_exponent: f64,
    pub estimates: Vec<TubeEstimate>,
}

const MIN_FIT_POINTS: usize = 5;

/// Slope of `log D(B_δ \ B)` against `log δ`. The target is `α* r` with
/// `α* = min αβ_i` when every `αβ_i < 1`, and `r` when every `αβ_i >= 1`.
pub fn regularity_exponent_fit(
    ts: &SimplexTestSet,
    r: f64,
    delta_grid: &[f64],
    n_mc: usize,
    seed: Seed,
    surrogate: Surrogate,
) -> Result<RegularityFit> {
    let a_star = ts.shape.iter().cloned().fold(f64::INFINITY, f64::min);
    let target_exponent = if ts.shape.iter().all(|&a| a < 1.0) {
        a_star * r
    } else if a_star >= 1.0 {
        r
    } else {
        return Err(Error::InvalidParameter("shape parameters must be all below 1 or all at least 1".into()));
    };
    if delta_grid.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidParameter("delta grid must be positive".into()));
    }
    let counts = tube_counts(ts, delta_grid, r, n_mc, seed, surrogate)?;
    let estimates: Vec<TubeEstimate> = delta_grid
        .iter()
        .zip(&counts)
        .map(|(&delta, &h)| {
            let (measure, stderr) = proportion(h, n_mc);
            TubeEstimate {
                delta,
                measure,
                stderr,
                n_mc,
                surrogate,
            }
        })
        .collect();
    let usable: Vec<&TubeEstimate> = estimates.iter().filter(|e| e.measure > 0.0).collect();
    if usable.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientSignal(usable.len()));
    }
    let x: Vec<f64> = usable.iter().map(|e| e.delta.ln()).collect();
    let y: Vec<f64> = usable.iter().map(|e| e.measure.ln()).collect();
    let fit = linear_fit(&x, &y);
    Ok(RegularityFit {
        exponent: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        target_exponent,
        estimates,
    })
}

/// Gap of the test `B = {Q : Q(S^c) > 1/2}`, `S` the union of closed
/// `radius`-balls around the atoms of `g`. `D_{αG}(B) = 0`, so this lower
/// bounds the total variation between the two Dirichlet measures.
pub fn disjoint_support_test(
    g: &DiscreteMeasure,
    gp: &DiscreteMeasure,
    alpha: f64,
    alphap: f64,
    radius: f64,
    n_mc: usize,
    seed: Seed,
) -> Result<GapEstimate> {
    if !(alpha > 0.0 && alphap > 0.0) || !(radius >= 0.0) || n_mc == 0 {
        return Err(Error::InvalidParameter("need positive concentrations, radius >= 0 and n_mc >= 1".into()));
    }
    if g.domain() != gp.domain() {
        return Err(Error::DomainMismatch);
    }
    let in_s = |x: &[f64]| g.atoms().iter().any(|a| euclidean(&a.loc, x) <= radius);
    let outside = |m: &DiscreteMeasure| -> Vec<bool> { m.atoms().iter().map(|a| !in_s(&a.loc)).collect() };
    let out_p = outside(gp);
    if !out_p.iter().any(|&o| o) {
        return Err(Error::SupportsOverlap);
    }
    let hits = |m: &DiscreteMeasure, conc: f64, out: &[bool], s: Seed| {
        let shape: Vec<f64> = m.weights().iter().map(|w| conc * w).collect();
        mc_counts(&shape, n_mc, s, 1, |lq, c| {
            let mass: f64 = lq.iter().zip(out).filter(|(_, &o)| o).map(|(l, _)| l.exp()).sum();
            c[0] += (mass > 0.5) as usize;
        })[0]
    };
    let alt = hits(gp, alphap, &out_p, seed.derive(1));
    let reference = hits(g, alpha, &outside(g), seed.derive(0));
    Ok(gap_of(proportion(alt, n_mc), proportion(reference, n_mc), n_mc))
}

/// `(1/2)^{2α'} Γ(α') α' p / max_{1≤x≤α'+1} Γ(x)²`: lower bound on the gap of
/// [`disjoint_support_test`] when `G'` puts mass `p` outside `S`.
pub fn disjoint_gap_lower_bound(alphap: f64, p: f64) -> f64 {
    // Γ is convex on [1, α'+1] so the maximum sits at an endpoint
    let peak = gamma(1.0).max(gamma(alphap + 1.0));
    0.5f64.powf(2.0 * alphap) * gamma(alphap) * alphap * p / (peak * peak)
}
