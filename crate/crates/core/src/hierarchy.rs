//! Transport distances between ensembles of measures and the coupled
//! Dirichlet construction.
//!
//! An ensemble is a finitely supported law on measures. The nested distance
//! solves an outer transport problem whose ground cost is `W_r^r` between
//! members, so it is exact for the ensembles given.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{stick_breaking, BaseMeasure, DPSample, StickBreakingTruncation};
use crate::parallel;
use crate::rng::{tag, Seed};
use crate::transport::{euclidean, loc_key, solve_transport, wasserstein, Atom, DiscreteMeasure};

/// Weighted finite collection of measures on one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnsemble")]
pub struct MeasureEnsemble {
    members: Vec<DiscreteMeasure>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawEnsemble {
    members: Vec<DiscreteMeasure>,
    weights: Option<Vec<f64>>,
}

impl TryFrom<RawEnsemble> for MeasureEnsemble {
    type Error = Error;
    fn try_from(raw: RawEnsemble) -> Result<Self> {
        match raw.weights {
            Some(w) => MeasureEnsemble::with_weights(raw.members, w),
            None => MeasureEnsemble::new(raw.members),
        }
    }
}

impl MeasureEnsemble {
    /// Uniformly weighted ensemble.
    pub fn new(members: Vec<DiscreteMeasure>) -> Result<Self> {
        let w = vec![1.0 / members.len().max(1) as f64; members.len()];
        Self::with_weights(members, w)
    }

    pub fn with_weights(members: Vec<DiscreteMeasure>, weights: Vec<f64>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidEnsemble("no members".into()));
        }
        if weights.len() != members.len() {
            return Err(Error::InvalidEnsemble("weights and members differ in length".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidEnsemble("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidEnsemble(format!("weights sum to {total}")));
        }
        if members.iter().any(|m| m.domain() != members[0].domain()) {
            return Err(Error::DomainMismatch);
        }
        let weights = if (total - 1.0).abs() > 1e-14 {
            weights.iter().map(|w| w / total).collect()
        } else {
            weights
        };
        Ok(MeasureEnsemble { members, weights })
    }

    pub fn members(&self) -> &[DiscreteMeasure] {
        &self.members
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Sparse coupling between ensemble indices: `(a, b, mass)` triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexCoupling {
    pub flows: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedTransportResult {
    pub order: f64,
    pub distance: f64,
    pub outer_coupling: IndexCoupling,
    /// `W_r` between member `a` of the first ensemble and member `b` of the second.
    pub pairwise_costs: Vec<Vec<f64>>,
}

// Members rewritten as (atom index, weight) lists over the ensemble's distinct locations.
struct Indexed {
    locs: Vec<Vec<f64>>,
    members: Vec<Vec<(usize, f64)>>,
}

fn index_ensemble(e: &MeasureEnsemble) -> Indexed {
    let mut map: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut locs = Vec::new();
    let members = e
        .members
        .iter()
        .map(|m| {
            m.atoms()
                .iter()
                .map(|a| {
                    let id = *map.entry(loc_key(&a.loc)).or_insert_with(|| {
                        locs.push(a.loc.clone());
                        locs.len() - 1
                    });
                    (id, a.w)
                })
                .collect()
        })
        .collect();
    Indexed { locs, members }
}

const GLOBAL_COST_LIMIT: usize = 4_000_000;

fn pow_cost(a: &[f64], b: &[f64], r: f64) -> f64 {
    let d = euclidean(a, b);
    if r == 1.0 {
        d
    } else {
        d.powf(r)
    }
}

/// Matrix of `W_r^r` between every member of `a` and every member of `b`.
fn pairwise_cost_matrix(a: &MeasureEnsemble, b: &MeasureEnsemble, r: f64) -> Result<Vec<Vec<f64>>> {
    let ia = index_ensemble(a);
    let ib = index_ensemble(b);
    let nb = ib.locs.len();
    // distinct locations are usually few (members share a base's atoms), so a
    // global cost table saves recomputing norms for every pair
    let global: Option<Vec<f64>> = (ia.locs.len() * nb <= GLOBAL_COST_LIMIT).then(|| {
        ia.locs
            .iter()
            .flat_map(|x| ib.locs.iter().map(move |y| pow_cost(x, y, r)))
            .collect()
    });
    let rows = parallel::map(ia.members.len(), |i| -> Result<Vec<f64>> {
        let ma = &ia.members[i];
        let supply: Vec<f64> = ma.iter().map(|&(_, w)| w).collect();
        let mut cost = Vec::new();
        ib.members
            .iter()
            .map(|mb| {
                let demand: Vec<f64> = mb.iter().map(|&(_, w)| w).collect();
                cost.clear();
                for &(u, _) in ma {
                    for &(v, _) in mb {
                        cost.push(match &global {
                            Some(g) => g[u * nb + v],
                            None => pow_cost(&ia.locs[u], &ib.locs[v], r),
                        });
                    }
                }
                Ok(solve_transport(&supply, &demand, &cost)?.cost.max(0.0))
            })
            .collect()
    });
    rows.into_iter().collect()
}

/// Exact `𝒲_r` between two ensembles.
pub fn nested_wasserstein(a: &MeasureEnsemble, b: &MeasureEnsemble, r: f64) -> Result<NestedTransportResult> {
    if !(r.is_finite() && r >= 1.0) {
        return Err(Error::InvalidParameter(format!("order r must be >= 1, got {r}")));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidEnsemble("empty ensemble".into()));
    }
    if a.members[0].domain() != b.members[0].domain() {
        return Err(Error::DomainMismatch);
    }
    let costs = pairwise_cost_matrix(a, b, r)?;
    let flat: Vec<f64> = costs.iter().flatten().copied().collect();
    let plan = solve_transport(&a.weights, &b.weights, &flat)?;
    Ok(NestedTransportResult {
        order: r,
        distance: plan.cost.max(0.0).powf(1.0 / r),
        outer_coupling: IndexCoupling { flows: plan.flows },
        pairwise_costs: costs
            .into_iter()
            .map(|row| row.into_iter().map(|c| c.powf(1.0 / r)).collect())
            .collect(),
    })
}

/// `∫ P dA(P)`: the members pooled with their ensemble weights.
pub fn mean_measure(a: &MeasureEnsemble) -> Result<DiscreteMeasure> {
    if a.is_empty() {
        return Err(Error::InvalidEnsemble("empty ensemble".into()));
    }
    let atoms = a
        .members
        .iter()
        .zip(&a.weights)
        .flat_map(|(m, &w)| m.atoms().iter().map(move |t| Atom { loc: t.loc.clone(), w: t.w * w }))
        .collect();
    DiscreteMeasure::from_unnormalized(a.members[0].domain().clone(), atoms)
}

/// Stick weights of a draw from `D_{alpha κ}` pushed to both marginals.
///
/// `pairs` lists the support of `κ` as `(i, j, mass)`; the returned vectors are
/// indexed by the atoms of the first and second marginal.
pub fn coupled_pair_weights(
    pairs: &[(usize, usize, f64)],
    n_source: usize,
    n_target: usize,
    alpha: f64,
    k: usize,
    seed: Seed,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (sticks, _) = stick_breaking(alpha, k, seed)?;
    let dist = WeightedIndex::new(pairs.iter().map(|p| p.2))
        .map_err(|e| Error::InvalidCoupling(e.to_string()))?;
    let key = seed.derive(tag::PAIR);
    let mut wa = vec![0.0; n_source];
    let mut wb = vec![0.0; n_target];
    for (l, p) in sticks.into_iter().enumerate() {
        let (i, j, _) = pairs[dist.sample(&mut key.stream(l as u64))];
        wa[i] += p;
        wb[j] += p;
    }
    Ok((wa, wb))
}

fn measure_on(base: &DiscreteMeasure, weights: &[f64]) -> Result<DiscreteMeasure> {
    let atoms = base
        .atoms()
        .iter()
        .zip(weights)
        .map(|(a, &w)| Atom { loc: a.loc.clone(), w })
        .collect();
    DiscreteMeasure::from_unnormalized(base.domain().clone(), atoms)
}

/// Draw `(Q, Q')` with `Q ~ D_alpha G`, `Q' ~ D_alpha G'` jointly.
///
/// Sticks are shared and atoms are drawn as pairs from an optimal coupling of
/// `G` and `G'`, so `E W_r^r(Q, Q') ≤ W_r^r(G, G')`.
pub fn coupled_dp_pair(
    g: &DiscreteMeasure,
    gp: &DiscreteMeasure,
    alpha: f64,
    r: f64,
    trunc: &StickBreakingTruncation,
    seed: Seed,
) -> Result<(DPSample, DPSample)> {
    let kappa = wasserstein(g, gp, r)?.coupling;
    let pairs = coupling_support(&kappa.weights);
    let (wa, wb) = coupled_pair_weights(&pairs, g.len(), gp.len(), alpha, trunc.k, seed)?;
    let tail = stick_breaking(alpha, trunc.k, seed)?.1;
    let record = |base: &DiscreteMeasure, w: &[f64]| -> Result<DPSample> {
        Ok(DPSample {
            measure: measure_on(base, w)?,
            alpha,
            base_id: BaseMeasure::discrete(base.clone()).id(),
            seed: seed.0,
            truncation: StickBreakingTruncation { alpha, ..*trunc },
            realized_tail_mass: tail,
        })
    };
    Ok((record(g, &wa)?, record(gp, &wb)?))
}

/// Nonzero entries of a coupling matrix as `(i, j, mass)`.
pub fn coupling_support(weights: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
    weights
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().filter(|(_, &w)| w > 0.0).map(move |(j, &w)| (i, j, w)))
        .collect()
}
