//! Exact `L_r` Wasserstein distances between finite discrete measures.
//!
//! Measures live on a [`BoundedDomain`] (an axis-aligned box in `R^d`). The
//! ground cost is the Euclidean norm raised to the power `r`. Problems with at
//! most [`DENSE_LIMIT`] atoms in total go to a dense transportation simplex;
//! larger ones to a network simplex. Both are exact.

mod dense_simplex;
mod network_simplex;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dense_simplex::solve as solve_dense;
pub use network_simplex::solve as solve_network;

/// Total atom count up to which the dense solver is used.
pub const DENSE_LIMIT: usize = 64;

/// Weights below this are dropped when a measure is built.
pub const WEIGHT_FLOOR: f64 = 1e-15;

const MARGINAL_TOL: f64 = 1e-10;

/// Axis-aligned box `[lower, upper]` in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDomain")]
pub struct BoundedDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawDomain> for BoundedDomain {
    type Error = Error;
    fn try_from(raw: RawDomain) -> Result<Self> {
        BoundedDomain::new(raw.lower, raw.upper)
    }
}

impl BoundedDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidDomain(format!(
                "bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidDomain(format!(
                    "axis {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(BoundedDomain { lower, upper })
    }

    /// The unit cube `[0,1]^d`.
    pub fn unit(dim: usize) -> Self {
        BoundedDomain::new(vec![0.0; dim], vec![1.0; dim]).expect("unit cube is valid")
    }

    /// The cube `[lo, hi]^d`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        BoundedDomain::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn side_lengths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    /// Euclidean diameter of the box.
    pub fn diameter(&self) -> f64 {
        self.side_lengths().iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.side_lengths().iter().product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(&v, (&l, &u))| {
                let slack = 1e-12 * (u - l).max(1.0);
                v >= l - slack && v <= u + slack
            })
    }

    /// Clamp a point into the box.
    pub fn project(&self, x: &mut [f64]) {
        for (v, (&l, &u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(l, u);
        }
    }
}

/// A single atom: location and probability mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub loc: Vec<f64>,
    pub w: f64,
}

/// Finite atomic probability measure on a bounded box.
///
/// Construction merges atoms sharing a location, drops weights below
/// [`WEIGHT_FLOOR`] and renormalizes, so the weights always sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct DiscreteMeasure {
    domain: BoundedDomain,
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
struct RawMeasure {
    domain: BoundedDomain,
    atoms: Vec<Atom>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = Error;
    fn try_from(raw: RawMeasure) -> Result<Self> {
        DiscreteMeasure::new(raw.domain, raw.atoms)
    }
}

// Weights already summing to one up to rounding are kept bit-for-bit so that
// serialized measures round-trip exactly.
fn normalize(atoms: &mut [Atom], total: f64) {
    if let [only] = atoms {
        only.w = 1.0;
    } else if (total - 1.0).abs() > 1e-14 {
        atoms.iter_mut().for_each(|a| a.w /= total);
    }
}

pub(crate) fn loc_key(loc: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 are the same location
    loc.iter().map(|&v| if v == 0.0 { 0 } else { v.to_bits() }).collect()
}

impl DiscreteMeasure {
    /// Build a measure whose weights already sum to one (within `1e-6`).
    pub fn new(domain: BoundedDomain, atoms: Vec<Atom>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.w).sum();
        if atoms.iter().all(|a| a.w.is_finite()) && (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        Self::from_unnormalized(domain, atoms)
    }

    /// Build a measure from nonnegative weights with any positive total.
    pub fn from_unnormalized(domain: BoundedDomain, atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        let d = domain.dim();
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        let mut index: HashMap<Vec<u64>, usize> = HashMap::with_capacity(atoms.len());
        for a in atoms {
            if a.loc.len() != d {
                return Err(Error::InvalidMeasure(format!(
                    "atom has dimension {}, domain has {d}",
                    a.loc.len()
                )));
            }
            if a.loc.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidMeasure(format!("non-finite location {:?}", a.loc)));
            }
            if !a.w.is_finite() || a.w < 0.0 {
                return Err(Error::InvalidMeasure(format!("invalid weight {}", a.w)));
            }
            if !domain.contains(&a.loc) {
                return Err(Error::InvalidMeasure(format!("location {:?} outside domain", a.loc)));
            }
            let mut loc = a.loc;
            domain.project(&mut loc);
            match index.get(&loc_key(&loc)) {
                Some(&i) => merged[i].w += a.w,
                None => {
                    index.insert(loc_key(&loc), merged.len());
                    merged.push(Atom { loc, w: a.w });
                }
            }
        }
        let total: f64 = merged.iter().map(|a| a.w).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("total mass is zero".into()));
        }
        normalize(&mut merged, total);
        merged.retain(|a| a.w >= WEIGHT_FLOOR);
        if merged.is_empty() {
            return Err(Error::InvalidMeasure("all weights below floor".into()));
        }
        let total: f64 = merged.iter().map(|a| a.w).sum();
        normalize(&mut merged, total);
        Ok(DiscreteMeasure {
            domain,
            atoms: merged,
        })
    }

    /// Convenience constructor from parallel location / weight lists.
    pub fn from_parts(domain: BoundedDomain, locs: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if locs.len() != weights.len() {
            return Err(Error::InvalidMeasure("locations and weights differ in length".into()));
        }
        let atoms = locs.into_iter().zip(weights).map(|(loc, w)| Atom { loc, w }).collect();
        Self::new(domain, atoms)
    }

    /// Point mass at `loc`.
    pub fn dirac(domain: BoundedDomain, loc: Vec<f64>) -> Result<Self> {
        Self::new(domain, vec![Atom { loc, w: 1.0 }])
    }

    /// Uniform weights on the given locations.
    pub fn uniform(domain: BoundedDomain, locs: Vec<Vec<f64>>) -> Result<Self> {
        let w = 1.0 / locs.len().max(1) as f64;
        let atoms = locs.into_iter().map(|loc| Atom { loc, w }).collect();
        Self::from_unnormalized(domain, atoms)
    }

    pub fn domain(&self) -> &BoundedDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.w).collect()
    }

    pub fn locations(&self) -> Vec<&[f64]> {
        self.atoms.iter().map(|a| a.loc.as_slice()).collect()
    }

    /// Weight of the atom at exactly `loc`, or zero.
    pub fn weight_at(&self, loc: &[f64]) -> f64 {
        let key = loc_key(loc);
        self.atoms
            .iter()
            .find(|a| loc_key(&a.loc) == key)
            .map_or(0.0, |a| a.w)
    }

    /// Whether `loc` is an atom of this measure.
    pub fn has_atom(&self, loc: &[f64]) -> bool {
        let key = loc_key(loc);
        self.atoms.iter().any(|a| loc_key(&a.loc) == key)
    }

    /// Mass of the atoms selected by `pred`.
    pub fn mass_where(&self, pred: impl Fn(&[f64]) -> bool) -> f64 {
        self.atoms.iter().filter(|a| pred(&a.loc)).map(|a| a.w).sum()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for a in &self.atoms {
            for (acc, &x) in m.iter_mut().zip(&a.loc) {
                *acc += a.w * x;
            }
        }
        m
    }

    /// Same atoms and weights up to `tol`, ignoring atom order.
    pub fn approx_eq(&self, other: &DiscreteMeasure, tol: f64) -> bool {
        self.domain == other.domain
            && self.len() == other.len()
            && self.atoms.iter().all(|a| (other.weight_at(&a.loc) - a.w).abs() <= tol)
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Row-major matrix of `‖x_i - y_j‖^r`.
pub fn cost_matrix(source: &DiscreteMeasure, target: &DiscreteMeasure, r: f64) -> Vec<f64> {
    let mut c = Vec::with_capacity(source.len() * target.len());
    for a in source.atoms() {
        for b in target.atoms() {
            let d = euclidean(&a.loc, &b.loc);
            c.push(if r == 1.0 { d } else { d.powf(r) });
        }
    }
    c
}

/// Solution of a transportation problem: nonzero flows and total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub flows: Vec<(usize, usize, f64)>,
    pub cost: f64,
}

/// Solve a balanced transportation problem with the solver suited to its size.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<Plan> {
    if supply.len() + demand.len() <= DENSE_LIMIT {
        solve_dense(supply, demand, cost)
    } else {
        solve_network(supply, demand, cost)
    }
}

/// Joint weight matrix with prescribed marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub source: DiscreteMeasure,
    pub target: DiscreteMeasure,
    pub weights: Vec<Vec<f64>>,
}

impl Coupling {
    /// Independent (product) coupling.
    pub fn product(source: &DiscreteMeasure, target: &DiscreteMeasure) -> Coupling {
        let weights = source
            .atoms()
            .iter()
            .map(|a| target.atoms().iter().map(|b| a.w * b.w).collect())
            .collect();
        Coupling {
            source: source.clone(),
            target: target.clone(),
            weights,
        }
    }

    /// Diagonal coupling of a measure with itself.
    pub fn diagonal(measure: &DiscreteMeasure) -> Coupling {
        let k = measure.len();
        let mut weights = vec![vec![0.0; k]; k];
        for (i, a) in measure.atoms().iter().enumerate() {
            weights[i][i] = a.w;
        }
        Coupling {
            source: measure.clone(),
            target: measure.clone(),
            weights,
        }
    }
}

/// Marginal diagnostics for a coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub max_row_violation: f64,
    pub max_col_violation: f64,
    pub min_entry: f64,
}

impl CouplingReport {
    pub fn is_valid(&self, tol: f64) -> bool {
        self.max_row_violation <= tol && self.max_col_violation <= tol && self.min_entry >= -tol
    }
}

pub fn validate_coupling(kappa: &Coupling) -> CouplingReport {
    let n = kappa.source.len();
    let m = kappa.target.len();
    let shape_ok = kappa.weights.len() == n && kappa.weights.iter().all(|row| row.len() == m);
    if !shape_ok {
        return CouplingReport {
            max_row_violation: f64::INFINITY,
            max_col_violation: f64::INFINITY,
            min_entry: f64::NEG_INFINITY,
        };
    }
    let mut min_entry = f64::INFINITY;
    let mut max_row: f64 = 0.0;
    let mut col = vec![0.0; m];
    for (row, a) in kappa.weights.iter().zip(kappa.source.atoms()) {
        let mut s = 0.0;
        for (j, &k) in row.iter().enumerate() {
            min_entry = min_entry.min(k);
            s += k;
            col[j] += k;
        }
        max_row = max_row.max((s - a.w).abs());
    }
    let max_col = col
        .iter()
        .zip(kappa.target.atoms())
        .fold(0.0f64, |acc, (&s, b)| acc.max((s - b.w).abs()));
    CouplingReport {
        max_row_violation: max_row,
        max_col_violation: max_col,
        min_entry,
    }
}

fn check_order(r: f64) -> Result<()> {
    if !(r.is_finite() && r >= 1.0) {
        return Err(Error::InvalidParameter(format!("order r must be >= 1, got {r}")));
    }
    Ok(())
}

/// `(Σ κ_ij ‖θ_i - θ'_j‖^r)^{1/r}` for a valid coupling.
pub fn coupling_cost(kappa: &Coupling, r: f64) -> Result<f64> {
    check_order(r)?;
    let report = validate_coupling(kappa);
    if !report.is_valid(MARGINAL_TOL) {
        return Err(Error::InvalidCoupling(format!(
            "row violation {:e}, column violation {:e}, min entry {:e}",
            report.max_row_violation, report.max_col_violation, report.min_entry
        )));
    }
    let c = cost_matrix(&kappa.source, &kappa.target, r);
    let m = kappa.target.len();
    let total: f64 = kappa
        .weights
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &k)| (i * m + j, k)))
        .map(|(idx, k)| k * c[idx])
        .sum();
    Ok(total.max(0.0).powf(1.0 / r))
}

/// Optimal transport distance together with an optimal coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportResult {
    pub order: f64,
    pub distance: f64,
    pub coupling: Coupling,
}

fn check_pair(g: &DiscreteMeasure, gp: &DiscreteMeasure, r: f64) -> Result<()> {
    check_order(r)?;
    if g.domain() != gp.domain() {
        return Err(Error::DomainMismatch);
    }
    Ok(())
}

/// Exact `W_r(G, G')` with an optimal coupling.
pub fn wasserstein(g: &DiscreteMeasure, gp: &DiscreteMeasure, r: f64) -> Result<TransportResult> {
    check_pair(g, gp, r)?;
    let cost = cost_matrix(g, gp, r);
    let plan = solve_transport(&g.weights(), &gp.weights(), &cost)?;
    let mut weights = vec![vec![0.0; gp.len()]; g.len()];
    for &(i, j, f) in &plan.flows {
        weights[i][j] = f;
    }
    Ok(TransportResult {
        order: r,
        distance: plan.cost.max(0.0).powf(1.0 / r),
        coupling: Coupling {
            source: g.clone(),
            target: gp.clone(),
            weights,
        },
    })
}

/// `W_r^r(G, G')`, skipping the coupling matrix.
pub fn wasserstein_cost(g: &DiscreteMeasure, gp: &DiscreteMeasure, r: f64) -> Result<f64> {
    check_pair(g, gp, r)?;
    let cost = cost_matrix(g, gp, r);
    Ok(solve_transport(&g.weights(), &gp.weights(), &cost)?.cost.max(0.0))
}

/// `W_r(G, G')`, skipping the coupling matrix.
pub fn wasserstein_distance(g: &DiscreteMeasure, gp: &DiscreteMeasure, r: f64) -> Result<f64> {
    Ok(wasserstein_cost(g, gp, r)?.powf(1.0 / r))
}

#[cfg(test)]
mod tests;
