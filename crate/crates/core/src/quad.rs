//! Double-exponential quadrature on intervals and half-lines.
//!
//! Integrands with kinks or jumps should be split at those points; both rules
//! cope well with endpoint singularities and boundary layers.

use std::f64::consts::FRAC_PI_2;

const TOL: f64 = 1e-13;
const MAX_LEVEL: u32 = 9;

fn refine(mut sum_at: impl FnMut(f64, bool) -> f64) -> f64 {
    // level 0 uses step 1/2, every level halves it and only adds the new odd nodes
    let mut h = 0.5;
    let mut total = sum_at(h, false);
    let mut prev = total * h;
    for _ in 1..MAX_LEVEL {
        h /= 2.0;
        total += sum_at(h, true);
        let est = total * h;
        if (est - prev).abs() <= TOL * est.abs().max(1e-300) {
            return est;
        }
        prev = est;
    }
    prev
}

/// `∫_a^b f` by the tanh-sinh rule.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let half = 0.5 * (b - a);
    let term = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        let w = half * FRAC_PI_2 * t.cosh() / (cu * cu);
        // distance to the nearer endpoint, computed without cancellation
        let gap = half * 2.0 / ((2.0 * u.abs()).exp() + 1.0);
        let x = if u >= 0.0 { b - gap } else { a + gap };
        if w == 0.0 || x <= a || x >= b {
            return 0.0;
        }
        let v = f(x) * w;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    refine(|h, odd_only| {
        let mut s = if odd_only { 0.0 } else { term(0.0) };
        let mut k = 1usize;
        loop {
            if odd_only && k.is_multiple_of(2) {
                k += 1;
                continue;
            }
            let t = k as f64 * h;
            if t > 4.0 {
                break;
            }
            s += term(t) + term(-t);
            k += 1;
        }
        s
    })
}

/// `∫_a^∞ f` by the exp-sinh rule.
pub fn exp_sinh(f: impl Fn(f64) -> f64, a: f64) -> f64 {
    let term = |t: f64| -> f64 {
        let e = (FRAC_PI_2 * t.sinh()).exp();
        let w = FRAC_PI_2 * t.cosh() * e;
        let x = a + e;
        if w == 0.0 || !x.is_finite() || x <= a {
            return 0.0;
        }
        let v = f(x) * w;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    refine(|h, odd_only| {
        let mut s = if odd_only { 0.0 } else { term(0.0) };
        let mut k = 1usize;
        loop {
            if odd_only && k.is_multiple_of(2) {
                k += 1;
                continue;
            }
            let t = k as f64 * h;
            if t > 4.5 {
                break;
            }
            s += term(t) + term(-t);
            k += 1;
        }
        s
    })
}

/// `∫_R f`, splitting at the given points.
pub fn real_line(f: impl Fn(f64) -> f64, breaks: &[f64]) -> f64 {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|b| b.is_finite()).collect();
    if pts.is_empty() {
        pts.push(0.0);
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let lo = pts[0];
    let hi = pts[pts.len() - 1];
    let mut total = exp_sinh(|x| f(2.0 * lo - x), lo);
    for w in pts.windows(2) {
        total += tanh_sinh(&f, w[0], w[1]);
    }
    total + exp_sinh(&f, hi)
}

/// `∫_a^b f`, splitting at the given interior points.
pub fn interval(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64]) -> f64 {
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.windows(2).map(|w| tanh_sinh(&f, w[0], w[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_integrals() {
        assert!((tanh_sinh(|x| x * x, 0.0, 1.0) - 1.0 / 3.0).abs() < 1e-13);
        assert!((tanh_sinh(|x| 1.0 / x.sqrt(), 0.0, 1.0) - 2.0).abs() < 1e-9);
        let gauss = real_line(|x| (-0.5 * x * x).exp(), &[]);
        assert!((gauss - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        let cauchy = real_line(|x| 1.0 / (1.0 + x * x), &[0.0]);
        assert!((cauchy - std::f64::consts::PI).abs() < 1e-10);
        let lap = real_line(|x| 0.5 * (-(x - 3.0).abs()).exp(), &[3.0]);
        assert!((lap - 1.0).abs() < 1e-12);
        assert!((interval(|x| x.abs(), -1.0, 2.0, &[0.0]) - 2.5).abs() < 1e-13);
    }
}
