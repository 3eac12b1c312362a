//! Composite Gauss–Legendre rules on panels.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::GaussLegendre;

/// Gauss–Legendre nodes and weights on [−1, 1], cached per order.
pub fn gl_pairs(order: usize) -> Arc<Vec<(f64, f64)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(order)
        .or_insert_with(|| {
            let rule = GaussLegendre::new(NonZeroUsize::new(order).expect("order > 0"));
            let mut pairs = rule.as_node_weight_pairs().to_vec();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            Arc::new(pairs)
        })
        .clone()
}

#[inline]
pub fn gl_panel<F: FnMut(f64) -> f64>(a: f64, b: f64, pairs: &[(f64, f64)], mut f: F) -> f64 {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    h * pairs.iter().map(|&(x, w)| w * f(m + h * x)).sum::<f64>()
}

/// Adaptive bisection with a 16-point rule. `tol` is relative to the total.
pub fn adaptive_integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    let pairs = gl_pairs(16);
    let whole = gl_panel(a, b, &pairs, &mut f);
    let mut stack = vec![(a, b, whole, 0u32)];
    let mut total = 0.0;
    let scale = whole.abs();
    while let Some((lo, hi, est, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = gl_panel(lo, mid, &pairs, &mut f);
        let right = gl_panel(mid, hi, &pairs, &mut f);
        let refined = left + right;
        let local_tol = tol * scale.max(refined.abs()).max(f64::MIN_POSITIVE);
        if (refined - est).abs() <= local_tol || depth >= 48 {
            total += refined;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    total
}

/// ∫_a^∞ f via r = a + t/(1 − t).
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> f64 {
    adaptive_integrate(
        |t| {
            let s = 1.0 - t;
            let v = f(a + t / s) / (s * s);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// A one-dimensional composite rule.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Rule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub breaks: Vec<f64>,
}

impl Rule1D {
    pub fn from_breaks(breaks: Vec<f64>, order: usize) -> Self {
        let pairs = gl_pairs(order);
        let mut nodes = Vec::with_capacity((breaks.len() - 1) * order);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in breaks.windows(2) {
            let (m, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            for &(x, wt) in pairs.iter() {
                nodes.push(m + h * x);
                weights.push(h * wt);
            }
        }
        Self {
            nodes,
            weights,
            breaks,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Breakpoints on [lo, hi]: panels of width `width` within `core` of
/// `center`, growing geometrically by `growth` outside.
pub fn initial_breaks(lo: f64, hi: f64, center: f64, width: f64, core: f64, growth: f64) -> Vec<f64> {
    let c = center.clamp(lo, hi);
    let mut right = vec![c];
    let mut x = c;
    let mut w = width;
    while x < hi {
        if x - c >= core {
            w *= growth;
        }
        x = (x + w).min(hi);
        if hi - x < 0.25 * w {
            x = hi;
        }
        right.push(x);
    }
    let mut left = vec![];
    x = c;
    w = width;
    while x > lo {
        if c - x >= core {
            w *= growth;
        }
        x = (x - w).max(lo);
        if x - lo < 0.25 * w {
            x = lo;
        }
        left.push(x);
    }
    left.reverse();
    left.extend(right);
    left.dedup();
    left
}

/// Splits panels until each panel's `order`-point estimate of `weight`
/// agrees with the two-half estimate to `tol` relative to the total.
pub fn refine_breaks<F: Fn(f64) -> f64>(breaks: &[f64], order: usize, weight: F, tol: f64) -> Vec<f64> {
    let pairs = gl_pairs(order);
    let total: f64 = breaks
        .windows(2)
        .map(|w| gl_panel(w[0], w[1], &pairs, &weight))
        .sum();
    let abs_tol = tol * total.abs().max(f64::MIN_POSITIVE);
    let mut out = vec![breaks[0]];
    for w in breaks.windows(2) {
        let mut stack = vec![(w[0], w[1], 0u32)];
        // depth-first, right half pushed first so output stays sorted
        while let Some((a, b, depth)) = stack.pop() {
            let m = 0.5 * (a + b);
            let whole = gl_panel(a, b, &pairs, &weight);
            let halves = gl_panel(a, m, &pairs, &weight) + gl_panel(m, b, &pairs, &weight);
            if (whole - halves).abs() <= abs_tol || depth >= 30 {
                out.push(b);
            } else {
                stack.push((m, b, depth + 1));
                stack.push((a, m, depth + 1));
            }
        }
    }
    out
}
