//! Dirichlet process and hierarchical Dirichlet process samplers.
//!
//! Draws use truncated stick-breaking: `k` sticks `v_j ~ Beta(1, alpha)`,
//! weights `p_i = v_i ∏_{j<i} (1 - v_j)`, with the mass left after the last
//! stick folded into the `k`-th atom so every draw is a probability measure.

use std::f64::consts::E;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernels::KernelModel;
use crate::rng::{tag, Rng, Seed};
use crate::transport::{Atom, BoundedDomain, DiscreteMeasure};

/// Truncation level of a stick-breaking draw and the tolerance its tail bound is quoted at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StickBreakingTruncation {
    pub k: usize,
    pub alpha: f64,
    pub tail_bound_eps: f64,
}

impl StickBreakingTruncation {
    pub fn new(k: usize, alpha: f64, tail_bound_eps: f64) -> Result<Self> {
        let t = StickBreakingTruncation {
            k,
            alpha,
            tail_bound_eps,
        };
        t.bound()?;
        Ok(t)
    }

    /// Smallest truncation whose tail bound at `eps` is below `target`.
    pub fn for_tolerance(alpha: f64, eps: f64, target: f64) -> Result<Self> {
        let k = truncation_for_tolerance(eps, alpha, target)?;
        Self::new(k, alpha, eps)
    }

    /// `Δ(eps, k)` for this truncation.
    pub fn bound(&self) -> Result<f64> {
        tail_mass_bound(self.tail_bound_eps, self.k, self.alpha)
    }
}

/// Markov bound on `P(1 - Σ_{i≤k} p_i ≥ eps)` for stick-breaking weights:
/// `exp[-α log(1/ε) - k log k + k log(eα) + k log log(1/ε)]`.
pub fn tail_mass_bound(eps: f64, k: usize, alpha: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < (-1.0f64).exp()) {
        return Err(Error::InvalidParameter(format!(
            "tail bound needs 0 < eps < 1/e, got {eps}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("truncation k must be >= 1".into()));
    }
    check_alpha(alpha)?;
    let l = (1.0 / eps).ln();
    let kf = k as f64;
    Ok((-alpha * l - kf * kf.ln() + kf * (E * alpha).ln() + kf * l.ln()).exp())
}

/// Smallest `k > alpha log(1/eps)` with `tail_mass_bound(eps, k, alpha) < target`.
///
/// Below `alpha log(1/eps)` the Markov argument behind the bound does not apply.
pub fn truncation_for_tolerance(eps: f64, alpha: f64, target: f64) -> Result<usize> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter(format!("target must be in (0,1), got {target}")));
    }
    tail_mass_bound(eps, 1, alpha)?;
    let start = (alpha * (1.0 / eps).ln()).floor() as usize + 1;
    (start.max(1)..start.max(1) + 1_000_000)
        .find(|&k| tail_mass_bound(eps, k, alpha).is_ok_and(|b| b < target))
        .ok_or_else(|| Error::InvalidParameter("no truncation level reaches the target".into()))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "concentration must be positive, got {alpha}"
        )));
    }
    Ok(())
}

/// Truncated stick-breaking weights and the realized tail mass.
///
/// Stick `i` is drawn from its own ChaCha stream, so a draw with larger `k`
/// shares its first sticks with a draw of smaller `k` under the same seed.
pub fn stick_breaking(alpha: f64, k: usize, seed: Seed) -> Result<(Vec<f64>, f64)> {
    check_alpha(alpha)?;
    if k == 0 {
        return Err(Error::InvalidParameter("truncation k must be >= 1".into()));
    }
    let key = seed.derive(tag::STICK);
    let inv = 1.0 / alpha;
    let mut weights = Vec::with_capacity(k);
    let mut remaining = 1.0f64;
    for i in 0..k {
        let u: f64 = 1.0 - key.stream(i as u64).random::<f64>();
        // Beta(1, alpha) by inversion
        let v = 1.0 - u.powf(inv);
        weights.push(remaining * v);
        remaining *= 1.0 - v;
    }
    let tail = remaining.clamp(0.0, 1.0);
    weights[k - 1] += remaining;
    Ok((weights, tail))
}

/// Base measure of a Dirichlet process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseMeasure {
    Discrete { measure: DiscreteMeasure },
    /// Uniform distribution on the box; a non-atomic base.
    UniformBox { domain: BoundedDomain },
}

impl BaseMeasure {
    pub fn discrete(measure: DiscreteMeasure) -> Self {
        BaseMeasure::Discrete { measure }
    }

    pub fn uniform(domain: BoundedDomain) -> Self {
        BaseMeasure::UniformBox { domain }
    }

    pub fn domain(&self) -> &BoundedDomain {
        match self {
            BaseMeasure::Discrete { measure } => measure.domain(),
            BaseMeasure::UniformBox { domain } => domain,
        }
    }

    /// Short content hash identifying the base in records.
    pub fn id(&self) -> String {
        let json = serde_json::to_vec(self).unwrap_or_default();
        let digest = Sha256::digest(&json);
        let kind = match self {
            BaseMeasure::Discrete { .. } => "discrete",
            BaseMeasure::UniformBox { .. } => "uniform",
        };
        format!("{kind}:{}", &hex::encode(digest)[..12])
    }

    /// Draw `count` locations, location `i` from stream `i` of `seed`.
    fn sample_locations(&self, count: usize, seed: Seed) -> Vec<Vec<f64>> {
        let key = seed.derive(tag::ATOM);
        match self {
            BaseMeasure::Discrete { measure } => {
                let picks = categorical_indices(&measure.weights(), count, key);
                picks.into_iter().map(|a| measure.atoms()[a].loc.clone()).collect()
            }
            BaseMeasure::UniformBox { domain } => (0..count)
                .map(|i| {
                    let mut rng = key.stream(i as u64);
                    domain
                        .lower()
                        .iter()
                        .zip(domain.upper())
                        .map(|(&l, &u)| l + (u - l) * rng.random::<f64>())
                        .collect()
                })
                .collect(),
        }
    }
}

fn categorical_indices(weights: &[f64], count: usize, key: Seed) -> Vec<usize> {
    let dist = WeightedIndex::new(weights).expect("measure weights are a valid distribution");
    (0..count).map(|i| dist.sample(&mut key.stream(i as u64))).collect()
}

/// One truncated draw from `D_alpha(base)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DPSample {
    pub measure: DiscreteMeasure,
    pub alpha: f64,
    pub base_id: String,
    pub seed: u64,
    pub truncation: StickBreakingTruncation,
    pub realized_tail_mass: f64,
}

/// Draw `Q ~ D_alpha(base)` truncated at `trunc.k` sticks.
///
/// The record carries `trunc` with its concentration replaced by `alpha`, so
/// the stored tail bound always refers to the process actually sampled.
pub fn sample_dp(alpha: f64, base: &BaseMeasure, trunc: &StickBreakingTruncation, seed: Seed) -> Result<DPSample> {
    let (weights, tail) = stick_breaking(alpha, trunc.k, seed)?;
    let locs = base.sample_locations(trunc.k, seed);
    let atoms = locs.into_iter().zip(weights).map(|(loc, w)| Atom { loc, w }).collect();
    let measure = DiscreteMeasure::from_unnormalized(base.domain().clone(), atoms)?;
    Ok(DPSample {
        measure,
        alpha,
        base_id: base.id(),
        seed: seed.0,
        truncation: StickBreakingTruncation { alpha, ..*trunc },
        realized_tail_mass: tail,
    })
}

/// Weights of `Q ~ D_alpha(G)` over the atoms of a discrete `G`, indexed like `G`.
///
/// Uses the same streams as [`sample_dp`] with a discrete base, so the result
/// is the same draw expressed on `G`'s atom list.
pub fn dp_weights_on_atoms(alpha: f64, base: &DiscreteMeasure, k: usize, seed: Seed) -> Result<Vec<f64>> {
    let (sticks, _) = stick_breaking(alpha, k, seed)?;
    let picks = categorical_indices(&base.weights(), k, seed.derive(tag::ATOM));
    let mut w = vec![0.0; base.len()];
    for (a, p) in picks.into_iter().zip(sticks) {
        w[a] += p;
    }
    Ok(w)
}

/// One draw of `G ~ D_gamma(H)`, `Q_i ~ D_alpha(G)` and optionally data groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchySample {
    #[serde(rename = "G")]
    pub g: DPSample,
    #[serde(rename = "Qs")]
    pub qs: Vec<DPSample>,
    /// Group `i` holds `n` rows of dimension `d`.
    pub groups: Option<Vec<Vec<Vec<f64>>>>,
    pub seed: u64,
}

pub fn sample_hdp(
    gamma: f64,
    h: &BaseMeasure,
    alpha: f64,
    m: usize,
    trunc: &StickBreakingTruncation,
    seed: Seed,
) -> Result<HierarchySample> {
    if m < 1 {
        return Err(Error::InvalidParameter("need at least one group".into()));
    }
    check_alpha(alpha)?;
    let g = sample_dp(gamma, h, trunc, seed.derive(tag::GLOBAL))?;
    let base = BaseMeasure::discrete(g.measure.clone());
    let qs = (0..m)
        .map(|i| sample_dp(alpha, &base, trunc, seed.derive_path(&[tag::GROUP, i as u64])))
        .collect::<Result<Vec<_>>>()?;
    Ok(HierarchySample {
        g,
        qs,
        groups: None,
        seed: seed.0,
    })
}

/// `n` iid draws from the mixture `Q * f`.
pub fn sample_mixture(q: &DiscreteMeasure, kernel: &KernelModel, n: usize, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
    if kernel.dim() != q.dim() {
        return Err(Error::DomainMismatch);
    }
    let dist = WeightedIndex::new(q.weights()).map_err(|e| Error::InvalidMeasure(e.to_string()))?;
    Ok((0..n)
        .map(|_| {
            let a = dist.sample(rng);
            let noise = kernel.sample_noise(rng);
            q.atoms()[a].loc.iter().zip(noise).map(|(x, e)| x + e).collect()
        })
        .collect())
}

/// Attach `n` observations per group, drawn from `Q_i * f`.
pub fn sample_groups(h: &HierarchySample, kernel: &KernelModel, n: usize, seed: Seed) -> Result<HierarchySample> {
    if n < 1 {
        return Err(Error::InvalidParameter("need at least one observation per group".into()));
    }
    let groups = h
        .qs
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let mut rng = seed.derive_path(&[tag::DATA, i as u64]).rng();
            sample_mixture(&q.measure, kernel, n, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HierarchySample {
        groups: Some(groups),
        ..h.clone()
    })
}

fn cell_contains(cell: &BoundedDomain, domain: &BoundedDomain, x: &[f64]) -> bool {
    (0..x.len()).all(|c| {
        let (lo, hi) = (cell.lower()[c], cell.upper()[c]);
        // half-open cells, closed on the outer face of the domain
        x[c] >= lo && (x[c] < hi || (hi >= domain.upper()[c] && x[c] <= hi))
    })
}

/// `(alpha G(B_1), ..., alpha G(B_k))` for a partition into boxes.
///
/// Cells are half-open `[lower, upper)` except on the domain's upper faces.
pub fn finite_dirichlet_projection(g: &DiscreteMeasure, partition: &[BoundedDomain], alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if partition.is_empty() {
        return Err(Error::InvalidParameter("empty partition".into()));
    }
    if partition.iter().any(|c| c.dim() != g.dim()) {
        return Err(Error::DomainMismatch);
    }
    for (i, a) in partition.iter().enumerate() {
        for b in &partition[i + 1..] {
            let overlap = (0..a.dim()).all(|c| a.lower()[c] < b.upper()[c] && b.lower()[c] < a.upper()[c]);
            if overlap {
                return Err(Error::InvalidParameter("partition cells overlap".into()));
            }
        }
    }
    let mut params = vec![0.0; partition.len()];
    for atom in g.atoms() {
        let cell = partition
            .iter()
            .position(|c| cell_contains(c, g.domain(), &atom.loc))
            .ok_or_else(|| Error::PartitionGap(atom.loc.clone()))?;
        params[cell] += alpha * atom.w;
    }
    Ok(params)
}
