//! Location kernels, mixture densities, divergence estimators and Fourier
//! smoothness classification.
//!
//! A [`KernelModel`] in `d` dimensions is the product of `d` copies of a
//! symmetric 1-d density scaled by `bandwidth`, so `f(x | θ) = f(x - θ)`.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{dp_weights_on_atoms, sample_mixture, StickBreakingTruncation};
use crate::quad;
use crate::rng::{tag, Rng, Seed};
use crate::stats::{linear_fit, log_space, log_sum_exp, mean_stderr, LinearFit};
use crate::transport::DiscreteMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Laplace,
    Cauchy,
    Triangular,
}

impl KernelFamily {
    /// Log density of the unit-scale 1-d kernel.
    fn log_pdf(self, x: f64) -> f64 {
        match self {
            KernelFamily::Gaussian => -0.5 * x * x - 0.5 * (2.0 * PI).ln(),
            KernelFamily::Laplace => -x.abs() - std::f64::consts::LN_2,
            KernelFamily::Cauchy => -PI.ln() - x.mul_add(x, 1.0).ln(),
            KernelFamily::Triangular => {
                if x.abs() < 1.0 {
                    (1.0 - x.abs()).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Log of the Fourier transform of the unit-scale 1-d kernel.
    pub fn log_fourier(self, w: f64) -> f64 {
        match self {
            KernelFamily::Gaussian => -0.5 * w * w,
            KernelFamily::Laplace => -(w.mul_add(w, 1.0)).ln(),
            KernelFamily::Cauchy => -w.abs(),
            KernelFamily::Triangular => {
                let h = 0.5 * w;
                if h == 0.0 {
                    0.0
                } else {
                    2.0 * (h.sin() / h).abs().ln()
                }
            }
        }
    }

    fn sample(self, rng: &mut Rng) -> f64 {
        match self {
            KernelFamily::Gaussian => rng.sample(StandardNormal),
            KernelFamily::Laplace => {
                let e = -(1.0 - rng.random::<f64>()).ln();
                if rng.random::<bool>() {
                    e
                } else {
                    -e
                }
            }
            KernelFamily::Cauchy => (PI * (rng.random::<f64>() - 0.5)).tan(),
            KernelFamily::Triangular => rng.random::<f64>() + rng.random::<f64>() - 1.0,
        }
    }

    /// Points where the unit density is not smooth.
    fn kinks(self) -> &'static [f64] {
        match self {
            KernelFamily::Laplace => &[0.0],
            KernelFamily::Triangular => &[-1.0, 0.0, 1.0],
            _ => &[0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernel")]
pub struct KernelModel {
    pub family: KernelFamily,
    pub bandwidth: f64,
    pub dim: usize,
}

#[derive(Deserialize)]
struct RawKernel {
    family: KernelFamily,
    bandwidth: f64,
    dim: usize,
}

impl TryFrom<RawKernel> for KernelModel {
    type Error = Error;
    fn try_from(raw: RawKernel) -> Result<Self> {
        KernelModel::new(raw.family, raw.bandwidth, raw.dim)
    }
}

impl KernelModel {
    pub fn new(family: KernelFamily, bandwidth: f64, dim: usize) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("kernel dimension must be >= 1".into()));
        }
        Ok(KernelModel {
            family,
            bandwidth,
            dim,
        })
    }

    pub fn gaussian(bandwidth: f64, dim: usize) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, bandwidth, dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let h = self.bandwidth;
        x.iter().map(|&v| self.family.log_pdf(v / h)).sum::<f64>() - self.dim as f64 * h.ln()
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    /// One draw from `f`, centred at the origin.
    pub fn sample_noise(&self, rng: &mut Rng) -> Vec<f64> {
        (0..self.dim).map(|_| self.bandwidth * self.family.sample(rng)).collect()
    }

    /// Log Fourier transform of one coordinate factor at frequency `w`.
    pub fn log_fourier(&self, w: f64) -> f64 {
        self.family.log_fourier(self.bandwidth * w)
    }

    /// `∫ f` over one coordinate by quadrature; 1 up to quadrature error.
    pub fn mass_1d(&self) -> f64 {
        let h = self.bandwidth;
        let breaks: Vec<f64> = self.family.kinks().iter().map(|k| k * h).collect();
        quad::real_line(|x| (self.family.log_pdf(x / h) - h.ln()).exp(), &breaks)
    }
}

/// `(Q * f)(y) = Σ_i w_i f(y - θ_i)`.
pub fn mixture_density(q: &DiscreteMeasure, kernel: &KernelModel, y: &[f64]) -> f64 {
    mixture_log_density(q, kernel, y).exp()
}

pub fn mixture_log_density(q: &DiscreteMeasure, kernel: &KernelModel, y: &[f64]) -> f64 {
    let terms: Vec<f64> = q
        .atoms()
        .iter()
        .map(|a| {
            let diff: Vec<f64> = y.iter().zip(&a.loc).map(|(u, t)| u - t).collect();
            a.w.ln() + kernel.log_density(&diff)
        })
        .collect();
    log_sum_exp(&terms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DivergenceKind {
    /// `∫ p log(p/q)`
    KL,
    /// `∫ p (log(p/q))^2`
    K2,
    /// `h` with `h^2 = ½ ∫ (√p - √q)^2`
    Hellinger,
    /// `½ ∫ |p - q|`
    TV,
    /// `∫ p^2/q - 1`
    ChiSq,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceEstimate {
    pub kind: DivergenceKind,
    pub value: f64,
    pub stderr: f64,
    pub n_mc: usize,
}

/// Divergence between `f(· | θ)` and `f(· | θ + delta)`, by 1-d quadrature.
///
/// Product structure reduces every kind to 1-d integrals except TV, which is
/// only available when `delta` moves a single coordinate. Shifted triangular
/// kernels are not mutually absolutely continuous, so their KL, K2 and χ² are
/// infinite.
pub fn shift_divergence(kernel: &KernelModel, kind: DivergenceKind, delta: &[f64]) -> Result<f64> {
    if delta.len() != kernel.dim {
        return Err(Error::DomainMismatch);
    }
    let fam = kernel.family;
    let shifts: Vec<f64> = delta.iter().map(|d| d / kernel.bandwidth).collect();
    let moved = shifts.iter().any(|&s| s != 0.0);
    let unbounded = matches!(kind, DivergenceKind::KL | DivergenceKind::K2 | DivergenceKind::ChiSq);
    if fam == KernelFamily::Triangular && moved && unbounded {
        return Ok(f64::INFINITY);
    }
    // ∫ g(log p(x), log p(x - s)) dx
    let one = |s: f64, g: &dyn Fn(f64, f64) -> f64| -> f64 {
        let mut breaks: Vec<f64> = fam.kinks().to_vec();
        breaks.extend(fam.kinks().iter().map(|k| k + s));
        // the two densities cross halfway between the centres
        breaks.push(0.5 * s);
        quad::real_line(
            |x| {
                let (lp, lq) = (fam.log_pdf(x), fam.log_pdf(x - s));
                if lp == f64::NEG_INFINITY && lq == f64::NEG_INFINITY {
                    0.0
                } else {
                    g(lp, lq)
                }
            },
            &breaks,
        )
    };
    let kl1 = |s: f64| if s == 0.0 { 0.0 } else { one(s, &|lp, lq| lp.exp() * (lp - lq)) };
    let m2 = |s: f64| if s == 0.0 { 0.0 } else { one(s, &|lp, lq| lp.exp() * (lp - lq).powi(2)) };
    let rho = |s: f64| if s == 0.0 { 1.0 } else { one(s, &|lp, lq| (0.5 * (lp + lq)).exp()) };
    let chi = |s: f64| if s == 0.0 { 1.0 } else { one(s, &|lp, lq| (2.0 * lp - lq).exp()) };
    Ok(match kind {
        DivergenceKind::KL => shifts.iter().map(|&s| kl1(s)).sum(),
        DivergenceKind::K2 => {
            // E(Σ L_c)^2 with independent coordinate log-ratios L_c
            let k: Vec<f64> = shifts.iter().map(|&s| kl1(s)).collect();
            let sum: f64 = k.iter().sum();
            let cross = sum * sum - k.iter().map(|v| v * v).sum::<f64>();
            shifts.iter().map(|&s| m2(s)).sum::<f64>() + cross
        }
        DivergenceKind::Hellinger => {
            let aff: f64 = shifts.iter().map(|&s| rho(s)).product();
            (1.0 - aff).max(0.0).sqrt().min(1.0)
        }
        DivergenceKind::ChiSq => (shifts.iter().map(|&s| chi(s)).product::<f64>() - 1.0).max(0.0),
        DivergenceKind::TV => {
            let nonzero: Vec<f64> = shifts.iter().copied().filter(|&s| s != 0.0).collect();
            match nonzero.as_slice() {
                [] => 0.0,
                [s] => (0.5 * one(*s, &|lp, lq| (lp.exp() - lq.exp()).abs())).min(1.0),
                _ => {
                    return Err(Error::InvalidParameter(
                        "shift TV is only available along one coordinate".into(),
                    ))
                }
            }
        }
    })
}

/// Largest `K(f_θ, f_θ') / ‖θ - θ'‖^r` over pairs from a grid on `[0, side]^d`.
///
/// Shift invariance reduces the pairs to their differences, so the grid of
/// differences `{-side, ..., side}^d` with `points` steps per axis suffices.
pub fn a1_constant(kernel: &KernelModel, side_lengths: &[f64], r: f64, points: usize) -> Result<f64> {
    if side_lengths.len() != kernel.dim {
        return Err(Error::DomainMismatch);
    }
    let points = points.max(2);
    let d = kernel.dim;
    let mut best = 0.0f64;
    let total = (points + 1).pow(d as u32);
    for idx in 0..total {
        let mut rest = idx;
        let delta: Vec<f64> = (0..d)
            .map(|c| {
                let i = rest % (points + 1);
                rest /= points + 1;
                side_lengths[c] * i as f64 / points as f64
            })
            .collect();
        let norm = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let kl = shift_divergence(kernel, DivergenceKind::KL, &delta)?;
        best = best.max(kl / norm.powf(r));
    }
    Ok(best)
}

/// A density that can be both sampled and evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensitySpec {
    /// `Q * f` on `R^d`.
    Mixture { measure: DiscreteMeasure, kernel: KernelModel },
    /// `p_{Y[n] | G}` on `R^{n d}`: `Q ~ D_alpha(G)`, then `n` iid draws of `Q * f`.
    /// Evaluated against a fixed bank of `bank_size` Dirichlet draws.
    Marginal {
        base: DiscreteMeasure,
        alpha: f64,
        kernel: KernelModel,
        n: usize,
        truncation: StickBreakingTruncation,
        bank_size: usize,
    },
}

impl DensitySpec {
    pub fn dim(&self) -> usize {
        match self {
            DensitySpec::Mixture { kernel, .. } => kernel.dim,
            DensitySpec::Marginal { kernel, n, .. } => kernel.dim * n,
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            DensitySpec::Mixture { measure, kernel } | DensitySpec::Marginal { base: measure, kernel, .. } => {
                if measure.dim() != kernel.dim {
                    return Err(Error::DomainMismatch);
                }
            }
        }
        if let DensitySpec::Marginal { bank_size, .. } = self {
            if *bank_size == 0 {
                return Err(Error::InvalidParameter("bank_size must be >= 1".into()));
            }
        }
        Ok(())
    }

    fn sample(&self, seed: Seed) -> Result<Vec<f64>> {
        let mut rng = seed.rng();
        match self {
            DensitySpec::Mixture { measure, kernel } => Ok(sample_mixture(measure, kernel, 1, &mut rng)?.remove(0)),
            DensitySpec::Marginal {
                base,
                alpha,
                kernel,
                n,
                truncation,
                ..
            } => {
                let w = dp_weights_on_atoms(*alpha, base, truncation.k, seed.derive(tag::STICK))?;
                let q = DiscreteMeasure::from_unnormalized(
                    base.domain().clone(),
                    base.atoms()
                        .iter()
                        .zip(w)
                        .map(|(a, w)| crate::transport::Atom { loc: a.loc.clone(), w })
                        .collect(),
                )?;
                Ok(sample_mixture(&q, kernel, *n, &mut rng)?.concat())
            }
        }
    }

    fn evaluator(&self, seed: Seed) -> Result<Evaluator<'_>> {
        Ok(match self {
            DensitySpec::Mixture { measure, kernel } => Evaluator::Mixture { measure, kernel },
            DensitySpec::Marginal {
                base,
                alpha,
                kernel,
                truncation,
                bank_size,
                ..
            } => Evaluator::Bank(WeightBank::new(base, *alpha, kernel, truncation.k, *bank_size, seed)?),
        })
    }
}

enum Evaluator<'a> {
    Mixture { measure: &'a DiscreteMeasure, kernel: &'a KernelModel },
    Bank(WeightBank<'a>),
}

impl Evaluator<'_> {
    fn log_density(&self, y: &[f64]) -> f64 {
        match self {
            Evaluator::Mixture { measure, kernel } => mixture_log_density(measure, kernel, y),
            Evaluator::Bank(bank) => {
                let rows: Vec<&[f64]> = y.chunks(bank.kernel.dim).collect();
                let l = bank.log_likelihoods(&rows);
                log_sum_exp(&l) - (l.len() as f64).ln()
            }
        }
    }
}

/// Draws `Q_b ~ D_alpha(G)` stored as weight vectors on `G`'s atoms.
struct WeightBank<'a> {
    base: &'a DiscreteMeasure,
    kernel: &'a KernelModel,
    log_weights: Vec<Vec<f64>>,
}

impl<'a> WeightBank<'a> {
    fn new(base: &'a DiscreteMeasure, alpha: f64, kernel: &'a KernelModel, k: usize, size: usize, seed: Seed) -> Result<Self> {
        let log_weights = (0..size)
            .map(|b| {
                dp_weights_on_atoms(alpha, base, k, seed.derive_path(&[tag::BANK, b as u64]))
                    .map(|w| w.into_iter().map(f64::ln).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(WeightBank {
            base,
            kernel,
            log_weights,
        })
    }

    /// `log ∏_j (Q_b * f)(y_j)` for every bank member `b`.
    fn log_likelihoods(&self, ys: &[&[f64]]) -> Vec<f64> {
        let kf: Vec<Vec<f64>> = ys
            .iter()
            .map(|y| {
                self.base
                    .atoms()
                    .iter()
                    .map(|a| {
                        let diff: Vec<f64> = y.iter().zip(&a.loc).map(|(u, t)| u - t).collect();
                        self.kernel.log_density(&diff)
                    })
                    .collect()
            })
            .collect();
        let mut buf = vec![0.0; self.base.len()];
        self.log_weights
            .iter()
            .map(|lw| {
                kf.iter()
                    .map(|row| {
                        for ((b, &w), &f) in buf.iter_mut().zip(lw).zip(row) {
                            *b = w + f;
                        }
                        log_sum_exp(&buf)
                    })
                    .sum()
            })
            .collect()
    }
}

/// Monte Carlo estimate of a log marginal likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_mc: usize,
}

/// `log p(y_1..y_n | G) = log E_{Q ~ D_alpha G} ∏_j (Q * f)(y_j)` by Monte Carlo.
///
/// The standard error is the delta-method error of the log of the mean.
pub fn marginal_loglik(
    g: &DiscreteMeasure,
    alpha: f64,
    kernel: &KernelModel,
    ys: &[Vec<f64>],
    n_mc: usize,
    trunc: &StickBreakingTruncation,
    seed: Seed,
) -> Result<LogEstimate> {
    if kernel.dim != g.dim() || ys.iter().any(|y| y.len() != kernel.dim) {
        return Err(Error::DomainMismatch);
    }
    if n_mc == 0 {
        return Err(Error::InvalidParameter("n_mc must be >= 1".into()));
    }
    if ys.is_empty() {
        return Ok(LogEstimate {
            value: 0.0,
            stderr: 0.0,
            n_mc,
        });
    }
    let bank = WeightBank::new(g, alpha, kernel, trunc.k, n_mc, seed)?;
    let rows: Vec<&[f64]> = ys.iter().map(|y| y.as_slice()).collect();
    let l = bank.log_likelihoods(&rows);
    let max = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::NumericalUnderflow);
    }
    if !max.is_finite() {
        return Err(Error::NumericalFailure("non-finite log likelihood".into()));
    }
    let scaled: Vec<f64> = l.iter().map(|v| (v - max).exp()).collect();
    let (mean, se) = mean_stderr(&scaled);
    Ok(LogEstimate {
        value: max + mean.ln(),
        stderr: se / mean,
        n_mc,
    })
}

/// Monte Carlo estimate of a divergence between two densities.
///
/// KL, K2, Hellinger and χ² average over draws from `p`; TV averages over the
/// equal mixture of `p` and `q`. Marginal specs are evaluated against banks
/// drawn once per call, shared by all sample points.
pub fn estimate_divergence(kind: DivergenceKind, p: &DensitySpec, q: &DensitySpec, n_mc: usize, seed: Seed) -> Result<DivergenceEstimate> {
    p.check()?;
    q.check()?;
    if p.dim() != q.dim() {
        return Err(Error::DomainMismatch);
    }
    if n_mc < 2 {
        return Err(Error::InvalidParameter("n_mc must be >= 2".into()));
    }
    let ep = p.evaluator(seed.derive_path(&[tag::BANK, 0]))?;
    let eq = q.evaluator(seed.derive_path(&[tag::BANK, 1]))?;
    let mut vals = Vec::with_capacity(n_mc);
    for s in 0..n_mc {
        let s_seed = seed.derive_path(&[tag::MC, s as u64]);
        let from_p = kind != DivergenceKind::TV || s_seed.derive(0).rng().random::<bool>();
        let y = if from_p { p.sample(s_seed)? } else { q.sample(s_seed)? };
        let lp = ep.log_density(&y);
        let lq = eq.log_density(&y);
        let v = match kind {
            DivergenceKind::KL => lp - lq,
            DivergenceKind::K2 => (lp - lq).powi(2),
            DivergenceKind::Hellinger => {
                if lq == f64::NEG_INFINITY {
                    0.0
                } else {
                    (0.5 * (lq - lp)).exp()
                }
            }
            DivergenceKind::TV => {
                if lp == lq {
                    0.0
                } else if lp == f64::NEG_INFINITY || lq == f64::NEG_INFINITY {
                    1.0
                } else {
                    (0.5 * (lp - lq)).tanh().abs()
                }
            }
            DivergenceKind::ChiSq => (lp - lq).exp(),
        };
        if v.is_nan() {
            return Err(Error::NumericalFailure("divergence integrand is NaN".into()));
        }
        vals.push(v);
    }
    let (mean, se) = mean_stderr(&vals);
    let (value, stderr) = match kind {
        DivergenceKind::KL => (mean.max(0.0), se),
        DivergenceKind::K2 | DivergenceKind::TV => (mean.clamp(0.0, 1.0f64.max(mean)), se),
        DivergenceKind::ChiSq => ((mean - 1.0).max(0.0), se),
        DivergenceKind::Hellinger => {
            let h2 = (1.0 - mean).clamp(0.0, 1.0);
            let h = h2.sqrt();
            let se_h = if h > 0.0 { (se / (2.0 * h)).min(se.sqrt()) } else { se.sqrt() };
            (h, se_h)
        }
    };
    let value = if kind == DivergenceKind::TV { value.min(1.0) } else { value };
    if !value.is_finite() {
        return Err(Error::NumericalFailure(format!("{kind:?} estimate is not finite")));
    }
    Ok(DivergenceEstimate {
        kind,
        value,
        stderr,
        n_mc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothnessKind {
    Ordinary,
    Supersmooth,
    Unclassified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessDiagnostics {
    /// Cutoffs `T = 1/δ`, in units of `1/bandwidth`.
    pub t_grid: Vec<f64>,
    pub log_integral: Vec<f64>,
    /// Fit of `log I` against `log T`.
    pub ordinary: LinearFit,
    /// Fit of `log I` against `T^beta` at the best `beta`.
    pub supersmooth: LinearFit,
    pub supersmooth_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessClass {
    pub kind: SmoothnessKind,
    pub beta: f64,
    pub fit_diagnostics: SmoothnessDiagnostics,
}

const MIN_R2: f64 = 0.95;

/// `log ∫_0^T exp(g(w)) dw` for increasing `g`, resolving the boundary layer at `T`.
fn log_integral_increasing(g: impl Fn(f64) -> f64, t: f64) -> f64 {
    let top = g(t);
    let mut breaks: Vec<f64> = (1..=10).map(|j| t * (1.0 - 10f64.powi(-j))).collect();
    breaks.insert(0, 0.0);
    breaks.push(t);
    let s: f64 = breaks
        .windows(2)
        .map(|w| quad::tanh_sinh(|x| (g(x) - top).exp(), w[0], w[1]))
        .sum();
    top + s.ln()
}

/// Classify the Fourier decay of `kernel` from `I(δ) = ∫_{[-1/δ,1/δ]^d} f̂(ω)^{-2} dω`.
///
/// The bandwidth only rescales the frequency axis, so the unit-bandwidth
/// kernel is analysed. The class whose regression of `log I` fits better wins.
/// Ordinary smoothness reports `beta = slope / (2d)`.
pub fn classify_smoothness(kernel: &KernelModel) -> Result<SmoothnessClass> {
    let fam = kernel.family;
    let t_grid = log_space(10.0, 1000.0, 20);
    let t_max = t_grid[t_grid.len() - 1];
    if fam == KernelFamily::Triangular {
        // sinc^2 vanishes at every nonzero multiple of 2π
        let first_zero = 2.0 * PI;
        if first_zero <= t_max {
            return Err(Error::KernelNotInvertible(first_zero / kernel.bandwidth));
        }
    }
    let d = kernel.dim as f64;
    let g = |w: f64| -2.0 * fam.log_fourier(w);
    let mut log_integral = Vec::with_capacity(t_grid.len());
    for &t in &t_grid {
        // symmetric in ω; the d-dimensional cube factorizes
        let l1 = std::f64::consts::LN_2 + log_integral_increasing(g, t);
        if !l1.is_finite() {
            return Err(Error::NumericalFailure(format!("Fourier integral at T = {t}")));
        }
        log_integral.push(d * l1);
    }
    let log_t: Vec<f64> = t_grid.iter().map(|t| t.ln()).collect();
    let ordinary = linear_fit(&log_t, &log_integral);
    let mut best = (f64::NAN, LinearFit {
        slope: 0.0,
        intercept: 0.0,
        r2: f64::NEG_INFINITY,
    });
    for i in 0..=700 {
        let beta = 0.5 + 0.005 * i as f64;
        let x: Vec<f64> = t_grid.iter().map(|t| t.powf(beta)).collect();
        let fit = linear_fit(&x, &log_integral);
        if fit.r2 > best.1.r2 {
            best = (beta, fit);
        }
    }
    let (kind, beta) = if ordinary.r2 >= best.1.r2 && ordinary.r2 >= MIN_R2 {
        (SmoothnessKind::Ordinary, ordinary.slope / (2.0 * d))
    } else if best.1.r2 >= MIN_R2 {
        (SmoothnessKind::Supersmooth, best.0)
    } else {
        (SmoothnessKind::Unclassified, f64::NAN)
    };
    Ok(SmoothnessClass {
        kind,
        beta,
        fit_diagnostics: SmoothnessDiagnostics {
            t_grid,
            log_integral,
            ordinary,
            supersmooth: best.1,
            supersmooth_beta: best.0,
        },
    })
}

#[cfg(test)]
mod tests;
