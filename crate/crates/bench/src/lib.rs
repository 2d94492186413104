//! Deterministic inputs shared by the benchmarks.

use hdp_transport::{Atom, BoundedDomain, DiscreteMeasure};

/// `n` atoms on the unit cube from an additive recurrence, so inputs are
/// identical across runs without a random source.
pub fn lattice_measure(n: usize, dim: usize, shift: f64) -> DiscreteMeasure {
    let steps: Vec<f64> = (0..dim).map(|c| (2.0 + c as f64).sqrt().fract()).collect();
    let atoms = (0..n)
        .map(|i| Atom {
            loc: steps.iter().map(|s| ((i as f64 + 1.0) * s + shift).fract()).collect(),
            w: 1.0 + ((i as f64) * 0.618_033_988_749_895).fract(),
        })
        .collect();
    DiscreteMeasure::from_unnormalized(BoundedDomain::unit(dim), atoms).expect("valid lattice measure")
}
