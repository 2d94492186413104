//! Covering numbers, separation and gauge estimates for finite point sets,
//! plus the super/ordinary sparsity classification of their growth.
//!
//! In one dimension the covering is the left-to-right sweep with free
//! centers, which is optimal for intervals. In higher dimensions it is the
//! farthest-point greedy cover with centers at data points; that count is at
//! most the optimal count at radius `eps / 2`. Cantor sets are materialized
//! at a finite level `L`, so nothing below the scale `3^-L` is resolved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{linear_fit, LinearFit};
use crate::transport::{euclidean, BoundedDomain};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SupportConfig {
    Explicit {
        points: Vec<Vec<f64>>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    /// `{1/2^k : 1 <= k <= levels} ∪ {0}`, weights `∝ k^-gamma1` (zero at 0).
    Dyadic {
        #[serde(default = "default_levels")]
        levels: u32,
        #[serde(default = "default_gamma1")]
        gamma1: f64,
    },
    /// Left endpoints of the `2^level` intervals of the middle-thirds construction,
    /// equally weighted.
    Cantor { level: u32 },
}

fn default_levels() -> u32 {
    60
}

fn default_gamma1() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SupportConfig", into = "SupportConfig")]
pub struct SupportSpec {
    config: SupportConfig,
    points: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
}

impl TryFrom<SupportConfig> for SupportSpec {
    type Error = Error;

    fn try_from(config: SupportConfig) -> Result<Self> {
        let (points, weights) = match &config {
            SupportConfig::Explicit { points, weights } => {
                let dim = points.first().map_or(0, Vec::len);
                if points.iter().any(|p| p.len() != dim || dim == 0 || p.iter().any(|v| !v.is_finite())) {
                    return Err(Error::InvalidParameter("points must be finite and share a positive dimension".into()));
                }
                if let Some(w) = weights {
                    if w.len() != points.len() || w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                        return Err(Error::InvalidParameter("weights must be nonnegative, one per point".into()));
                    }
                }
                (points.clone(), weights.clone())
            }
            &SupportConfig::Dyadic { levels, gamma1 } => {
                if levels == 0 || levels > 1000 || !gamma1.is_finite() {
                    return Err(Error::InvalidParameter("dyadic levels must be in 1..=1000".into()));
                }
                let mut points = vec![vec![0.0]];
                let mut weights = vec![0.0];
                for k in 1..=levels {
                    points.push(vec![0.5f64.powi(k as i32)]);
                    weights.push((k as f64).powf(-gamma1));
                }
                (points, Some(weights))
            }
            &SupportConfig::Cantor { level } => {
                if level > 20 {
                    return Err(Error::InvalidParameter("cantor level must be <= 20".into()));
                }
                let scale = 3f64.powi(level as i32);
                let points = (0u64..1 << level)
                    .map(|bits| {
                        // ternary digit i is 2 where bit i is set
                        let n: u64 = (0..level)
                            .filter(|i| bits >> i & 1 == 1)
                            .map(|i| 2 * 3u64.pow(level - 1 - i))
                            .sum();
                        vec![n as f64 / scale]
                    })
                    .collect::<Vec<_>>();
                let w = 0.5f64.powi(level as i32);
                let n = points.len();
                (points, Some(vec![w; n]))
            }
        };
        if points.is_empty() {
            return Err(Error::EmptySupport);
        }
        Ok(SupportSpec { config, points, weights })
    }
}

impl From<SupportSpec> for SupportConfig {
    fn from(s: SupportSpec) -> Self {
        s.config
    }
}

impl SupportSpec {
    pub fn explicit(points: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        SupportConfig::Explicit { points, weights }.try_into()
    }

    pub fn dyadic(levels: u32, gamma1: f64) -> Result<Self> {
        SupportConfig::Dyadic { levels, gamma1 }.try_into()
    }

    pub fn cantor(level: u32) -> Result<Self> {
        SupportConfig::Cantor { level }.try_into()
    }

    pub fn config(&self) -> &SupportConfig {
        &self.config
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }
}

/// Closed balls of a common radius covering a point set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covering {
    pub eps: f64,
    pub centers: Vec<Vec<f64>>,
    /// Indices of the points assigned to each ball; every point appears once.
    pub members: Vec<Vec<usize>>,
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")))
    }
}

pub fn cover(s: &SupportSpec, eps: f64) -> Result<Covering> {
    check_eps(eps)?;
    let pts = s.points();
    let reach = eps * (1.0 + 1e-12);
    let mut centers: Vec<Vec<f64>> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    if s.dim() == 1 {
        let mut order: Vec<usize> = (0..pts.len()).collect();
        order.sort_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0]));
        for i in order {
            match centers.last() {
                Some(c) if (pts[i][0] - c[0]).abs() <= reach => members.last_mut().unwrap().push(i),
                _ => {
                    centers.push(vec![pts[i][0] + eps]);
                    members.push(vec![i]);
                }
            }
        }
    } else {
        let mut nearest = vec![f64::INFINITY; pts.len()];
        let mut next = 0;
        loop {
            let c = pts[next].clone();
            for (d, p) in nearest.iter_mut().zip(pts) {
                *d = d.min(euclidean(p, &c));
            }
            centers.push(c);
            let (far, &dist) = nearest
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("nonempty");
            if dist <= reach {
                break;
            }
            next = far;
        }
        members = vec![Vec::new(); centers.len()];
        for (i, p) in pts.iter().enumerate() {
            let owner = (0..centers.len())
                .find(|&c| euclidean(p, &centers[c]) <= reach)
                .expect("greedy cover reaches every point");
            members[owner].push(i);
        }
    }
    Ok(Covering { eps, centers, members })
}

/// Number of closed `eps`-balls used to cover the set (an upper bound on the optimum).
pub fn covering_count(s: &SupportSpec, eps: f64) -> Result<usize> {
    Ok(cover(s, eps)?.centers.len())
}

/// True iff every pair of ball centers is at least `c2 * eps` apart.
pub fn separation_check(cov: &Covering, c2: f64) -> bool {
    let min_gap = c2 * cov.eps;
    cov.centers
        .iter()
        .enumerate()
        .all(|(i, a)| cov.centers[i + 1..].iter().all(|b| euclidean(a, b) >= min_gap))
}

/// Smallest `eps` on a grid in `(c1 * delta, delta)` whose covering is
/// `c2 * eps` separated, if any.
pub fn sparse_scale(s: &SupportSpec, delta: f64, c1: f64, c2: f64, grid: usize) -> Result<Option<f64>> {
    check_eps(delta)?;
    if !(c1 > 0.0 && c1 < 1.0) || grid == 0 {
        return Err(Error::InvalidParameter("need 0 < c1 < 1 and a nonempty grid".into()));
    }
    for j in 1..=grid {
        let eps = delta * (c1 + (1.0 - c1) * j as f64 / (grid + 1) as f64);
        if separation_check(&cover(s, eps)?, c2) {
            return Ok(Some(eps));
        }
    }
    Ok(None)
}

/// Minimum mass over the balls of the covering at `eps`.
pub fn gauge_estimate(s: &SupportSpec, eps: f64) -> Result<f64> {
    let w = s
        .weights()
        .ok_or_else(|| Error::MissingParameter("support weights".into()))?;
    let cov = cover(s, eps)?;
    Ok(cov
        .members
        .iter()
        .map(|m| m.iter().map(|&i| w[i]).sum::<f64>())
        .fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "lowercase")]
pub enum SparsityClass {
    Supersparse { gamma0: f64, gamma1: f64 },
    Ordinary { gamma0: f64, gamma1: f64 },
    Unclassified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityProfile {
    pub eps_grid: Vec<f64>,
    /// Raw covering counts.
    pub k_vals: Vec<usize>,
    /// `min` of the counts at this and every smaller scale: nonincreasing in eps.
    pub k_envelope: Vec<usize>,
    /// Gauge lower estimates, made nondecreasing in eps by a running minimum.
    pub g_vals: Vec<f64>,
    pub classification: SparsityClass,
    pub fit_r2: f64,
}

/// Covering counts and gauges over a decreasing `eps_grid`, then classified.
pub fn sparsity_profile(s: &SupportSpec, eps_grid: &[f64]) -> Result<SparsityProfile> {
    if eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("eps_grid must be strictly decreasing".into()));
    }
    let k_vals = eps_grid
        .iter()
        .map(|&e| covering_count(s, e))
        .collect::<Result<Vec<_>>>()?;
    let mut k_envelope = k_vals.clone();
    for i in (0..k_envelope.len().saturating_sub(1)).rev() {
        k_envelope[i] = k_envelope[i].min(k_envelope[i + 1]);
    }
    let mut g_vals = eps_grid
        .iter()
        .map(|&e| gauge_estimate(s, e))
        .collect::<Result<Vec<_>>>()?;
    for i in 1..g_vals.len() {
        g_vals[i] = g_vals[i].min(g_vals[i - 1]);
    }
    let mut profile = SparsityProfile {
        eps_grid: eps_grid.to_vec(),
        k_vals,
        k_envelope,
        g_vals,
        classification: SparsityClass::Unclassified,
        fit_r2: 0.0,
    };
    let (class, r2) = classify_sparsity(&profile)?;
    profile.classification = class;
    profile.fit_r2 = r2;
    Ok(profile)
}

const SPARSITY_R2: f64 = 0.9;

/// Fits `log K` and `log g` against `log log(1/eps)` (supersparse) and
/// `log(1/eps)` (ordinary); the better mean R² wins, ties go to ordinary.
pub fn classify_sparsity(p: &SparsityProfile) -> Result<(SparsityClass, f64)> {
    let n = p.eps_grid.len();
    if n < 6 || p.k_envelope.len() != n || p.g_vals.len() != n {
        return Err(Error::InvalidParameter("need at least 6 grid points".into()));
    }
    let (hi, lo) = (p.eps_grid[0], p.eps_grid[n - 1]);
    if !(hi < 1.0 && lo > 0.0 && hi / lo >= 100.0 * (1.0 - 1e-12)) {
        return Err(Error::InvalidParameter("eps grid must lie in (0, 1) and span two decades".into()));
    }
    if p.g_vals.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::InvalidParameter("gauge values must be positive".into()));
    }
    let log_k: Vec<f64> = p.k_envelope.iter().map(|&k| (k as f64).ln()).collect();
    let log_g: Vec<f64> = p.g_vals.iter().map(|g| g.ln()).collect();
    let fit = |x: &[f64]| -> (LinearFit, LinearFit) { (linear_fit(x, &log_k), linear_fit(x, &log_g)) };
    let x_ord: Vec<f64> = p.eps_grid.iter().map(|e| (1.0 / e).ln()).collect();
    let x_sup: Vec<f64> = x_ord.iter().map(|x| x.ln()).collect();
    let (ko, go) = fit(&x_ord);
    let (ks, gs) = fit(&x_sup);
    let r2_ord = 0.5 * (ko.r2 + go.r2);
    let r2_sup = 0.5 * (ks.r2 + gs.r2);
    let (class, r2) = if r2_sup > r2_ord {
        (SparsityClass::Supersparse { gamma0: ks.slope, gamma1: -gs.slope }, r2_sup)
    } else {
        (SparsityClass::Ordinary { gamma0: ko.slope, gamma1: -go.slope }, r2_ord)
    };
    if r2 < SPARSITY_R2 {
        return Ok((SparsityClass::Unclassified, r2));
    }
    Ok((class, r2))
}

/// `∏ ceil(L_i / (2 eps / sqrt d))` closed balls cover the box; 1 once `eps >= diam / 2`.
pub fn box_covering_number(domain: &BoundedDomain, eps: f64) -> Result<u64> {
    check_eps(eps)?;
    if eps >= domain.diameter() / 2.0 {
        return Ok(1);
    }
    let side = 2.0 * eps / (domain.dim() as f64).sqrt();
    let count = domain
        .side_lengths()
        .iter()
        .map(|l| (l / side).ceil().max(1.0))
        .product::<f64>();
    Ok(count.min(u64::MAX as f64) as u64)
}

#[cfg(test)]
mod tests;
