//! Quadrature kernels.
//!
//! * [`integrate`] / [`integrate_with_breaks`]: globally adaptive 15-point
//!   Gauss–Kronrod for closed-form integrands with known kinks.
//! * [`trapezoid_cumulative`]: cumulative trapezoid sums on a grid.
//! * [`CellRule`]: per-cell weights of a piecewise-cubic interpolant that never
//!   reaches across a declared break, for tabulated data on nonuniform grids.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the 7-point rule embedded at the odd Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Single Kronrod panel on `[a, b]`; returns (integral, error estimate).
pub fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Bisects the panel with the largest error estimate until the summed estimate
/// drops below `max(abs_tol, rel_tol * |I|)` or the panel budget is spent.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> QuadResult {
    integrate_with_breaks(f, a, b, &[], abs_tol, rel_tol)
}

/// Like [`integrate`], but the initial panels are split at every break inside `(a, b)`.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> QuadResult {
    if a == b {
        return QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        };
    }
    if b < a {
        let r = integrate_with_breaks(f, b, a, breaks, abs_tol, rel_tol);
        return QuadResult {
            value: -r.value,
            ..r
        };
    }
    const MAX_PANELS: usize = 4000;
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evaluations = 0;
    for w in edges.windows(2) {
        let (value, error) = gauss_kronrod_15(&f, w[0], w[1]);
        evaluations += 15;
        total += value;
        total_err += error;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }
    while total_err > abs_tol.max(rel_tol * total.abs()) && heap.len() < MAX_PANELS {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gauss_kronrod_15(&f, worst.a, mid);
        let (v2, e2) = gauss_kronrod_15(&f, mid, worst.b);
        evaluations += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // Re-sum to shed the drift of the running update.
    let value = heap.iter().map(|p| p.value).sum();
    let error = heap.iter().map(|p| p.error).sum();
    QuadResult {
        value,
        error,
        evaluations,
    }
}

/// Cumulative trapezoid sums: `out[i] = ∫_{xs[0]}^{xs[i]} f`.
pub fn trapezoid_cumulative(xs: &[f64], fs: &[f64]) -> Vec<f64> {
    debug_assert_eq!(xs.len(), fs.len());
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    if !xs.is_empty() {
        out.push(0.0);
    }
    for i in 1..xs.len() {
        acc += 0.5 * (xs[i] - xs[i - 1]) * (fs[i] + fs[i - 1]);
        out.push(acc);
    }
    out
}

/// Per-cell integration weights on a fixed strictly increasing grid.
///
/// Each cell `[x_j, x_{j+1}]` is integrated with the interpolating polynomial
/// through up to four nodes taken from the same smooth segment. Segments end at
/// nodes that coincide with a break; a cell that strictly contains a break is
/// integrated by the trapezoid rule on its own.
#[derive(Debug, Clone)]
pub struct CellRule {
    starts: Vec<usize>,
    weights: Vec<[f64; 4]>,
    widths: Vec<usize>,
}

impl CellRule {
    pub fn new(xs: &[f64], breaks: &[f64]) -> Self {
        let n = xs.len();
        let cells = n.saturating_sub(1);
        // boundary[i]: node i ends a segment. isolated[j]: cell j contains a break.
        let mut boundary = vec![false; n];
        let mut isolated = vec![false; cells];
        if n > 0 {
            boundary[0] = true;
            boundary[n - 1] = true;
        }
        for &b in breaks {
            if n < 2 || b < xs[0] || b > xs[n - 1] {
                continue;
            }
            let k = xs.partition_point(|&x| x < b);
            if k < n && xs[k] == b {
                boundary[k] = true;
            } else if k > 0 && k < n {
                isolated[k - 1] = true;
                boundary[k - 1] = true;
                boundary[k] = true;
            }
        }
        // next_boundary[i]: first boundary node at index >= i
        let mut next_boundary = vec![n.saturating_sub(1); n];
        for i in (0..n).rev() {
            next_boundary[i] = if boundary[i] || i + 1 == n { i } else { next_boundary[i + 1] };
        }
        let mut starts = Vec::with_capacity(cells);
        let mut weights = Vec::with_capacity(cells);
        let mut widths = Vec::with_capacity(cells);
        let mut seg_start = 0;
        for j in 0..cells {
            if boundary[j] {
                seg_start = j;
            }
            if isolated[j] {
                let h = xs[j + 1] - xs[j];
                starts.push(j);
                weights.push([0.5 * h, 0.5 * h, 0.0, 0.0]);
                widths.push(2);
                continue;
            }
            let seg_end = next_boundary[j + 1];
            let nodes = (seg_end - seg_start + 1).min(4);
            let lo = if nodes == 4 {
                (j.saturating_sub(1)).clamp(seg_start, seg_end - 3)
            } else {
                seg_start
            };
            let w = lagrange_cell_weights(&xs[lo..lo + nodes], xs[j], xs[j + 1]);
            starts.push(lo);
            weights.push(w);
            widths.push(nodes);
        }
        Self {
            starts,
            weights,
            widths,
        }
    }

    pub fn cells(&self) -> usize {
        self.starts.len()
    }

    /// Integral of the interpolant of `fs` over cell `j`.
    #[inline]
    pub fn cell(&self, j: usize, fs: &[f64]) -> f64 {
        let s = self.starts[j];
        let w = &self.weights[j];
        let mut acc = 0.0;
        for k in 0..self.widths[j] {
            acc += w[k] * fs[s + k];
        }
        acc
    }

    /// Integral of a per-node function evaluated lazily.
    #[inline]
    pub fn cell_with<F: Fn(usize) -> f64>(&self, j: usize, f: F) -> f64 {
        let s = self.starts[j];
        let w = &self.weights[j];
        let mut acc = 0.0;
        for k in 0..self.widths[j] {
            acc += w[k] * f(s + k);
        }
        acc
    }

    pub fn stencil(&self, j: usize) -> (usize, &[f64]) {
        (self.starts[j], &self.weights[j][..self.widths[j]])
    }

    pub fn cumulative(&self, fs: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.cells() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for j in 0..self.cells() {
            acc += self.cell(j, fs);
            out.push(acc);
        }
        out
    }

    pub fn total(&self, fs: &[f64]) -> f64 {
        (0..self.cells()).map(|j| self.cell(j, fs)).sum()
    }
}

/// Weights `w_k = ∫_a^b ℓ_k(x) dx` for the Lagrange basis on `nodes`.
fn lagrange_cell_weights(nodes: &[f64], a: f64, b: f64) -> [f64; 4] {
    // Three-point Gauss–Legendre is exact for the cubic basis polynomials.
    const GL: [(f64, f64); 3] = [
        (-0.774_596_669_241_483_4, 5.0 / 9.0),
        (0.0, 8.0 / 9.0),
        (0.774_596_669_241_483_4, 5.0 / 9.0),
    ];
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut out = [0.0; 4];
    for (k, slot) in out.iter_mut().enumerate().take(nodes.len()) {
        let mut acc = 0.0;
        for &(t, w) in &GL {
            let x = mid + half * t;
            let mut basis = 1.0;
            for (m, &xm) in nodes.iter().enumerate() {
                if m != k {
                    basis *= (x - xm) / (nodes[k] - xm);
                }
            }
            acc += w * basis;
        }
        *slot = acc * half;
    }
    out
}
