//! Quadrature building blocks: Gauss–Legendre rules, geometrically graded
//! composite panels, adaptive Gauss–Kronrod and panel tables that interpolate
//! tabulated values with barycentric Lagrange formulas.

use std::sync::OnceLock;

/// Gauss–Legendre rule on [-1, 1] with barycentric weights for its nodes.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub bary: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on the three-term recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let bary = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                s * ((1.0 - nodes[i] * nodes[i]) * weights[i]).sqrt()
            })
            .collect();
        GaussLegendre { nodes, weights, bary }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const MAX_CACHED: usize = 64;

/// Shared rule for `n` nodes, built on first use.
pub fn gauss_legendre(n: usize) -> &'static GaussLegendre {
    static CACHE: OnceLock<Vec<OnceLock<GaussLegendre>>> = OnceLock::new();
    assert!((1..=MAX_CACHED).contains(&n), "cached rules cover 1..=64 nodes");
    let cache = CACHE.get_or_init(|| (0..=MAX_CACHED).map(|_| OnceLock::new()).collect());
    cache[n].get_or_init(|| GaussLegendre::new(n))
}

/// A point inside [a, b] together with its distances to both ends, computed
/// without cancellation.
#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub x: f64,
    pub from_lo: f64,
    pub to_hi: f64,
    pub w: f64,
}

/// Panel boundaries on [0, len] expressed as distances from the left end,
/// refined geometrically toward whichever ends are flagged.
///
/// Panels shrink by `ratio` per level until they are shorter than
/// `min_width`; interior panels are at most `max_width` wide.
pub fn graded_breaks(
    len: f64,
    grade_lo: bool,
    grade_hi: bool,
    ratio: f64,
    min_width: f64,
    max_width: f64,
) -> Vec<(f64, f64)> {
    assert!(len > 0.0 && ratio > 0.0 && ratio < 1.0);
    let (lo_len, hi_len) = match (grade_lo, grade_hi) {
        (true, true) => (0.5 * len, 0.5 * len),
        (true, false) => (len, 0.0),
        (false, true) => (0.0, len),
        (false, false) => (0.0, 0.0),
    };
    let mut out: Vec<(f64, f64)> = Vec::new();
    if !grade_lo && !grade_hi {
        split_uniform(0.0, len, max_width, &mut out);
        return out;
    }
    if lo_len > 0.0 {
        let mut pts = vec![lo_len];
        let mut d = lo_len;
        while d > min_width {
            d *= ratio;
            pts.push(d);
        }
        pts.push(0.0);
        pts.reverse();
        for w in pts.windows(2) {
            split_uniform(w[0], w[1], max_width, &mut out);
        }
    }
    if hi_len > 0.0 {
        let mut dists = vec![hi_len];
        let mut d = hi_len;
        while d > min_width {
            d *= ratio;
            dists.push(d);
        }
        dists.push(0.0);
        for w in dists.windows(2) {
            split_uniform(len - w[0], len - w[1], max_width, &mut out);
        }
    }
    out
}

fn split_uniform(a: f64, b: f64, max_width: f64, out: &mut Vec<(f64, f64)>) {
    let m = ((b - a) / max_width).ceil().max(1.0) as usize;
    let h = (b - a) / m as f64;
    for i in 0..m {
        let lo = a + h * i as f64;
        let hi = if i + 1 == m { b } else { a + h * (i + 1) as f64 };
        out.push((lo, hi));
    }
}

/// Quadrature nodes for a panel list on [0, len]; `to_hi` is measured to
/// `len`, exact on the last panel.
pub fn panel_nodes(panels: &[(f64, f64)], len: f64, rule: &GaussLegendre) -> Vec<Node> {
    let mut out = Vec::with_capacity(panels.len() * rule.len());
    for &(a, b) in panels {
        let half = 0.5 * (b - a);
        let tail = len - b;
        for (s, w) in rule.nodes.iter().zip(&rule.weights) {
            let from_a = half * (1.0 + s);
            let to_b = half * (1.0 - s);
            out.push(Node {
                x: a + from_a,
                from_lo: a + from_a,
                to_hi: tail + to_b,
                w: half * w,
            });
        }
    }
    out
}

/// Panels on [0, len] graded geometrically toward both ends, down to
/// `lo_min` at the left end and `hi_min` at the right end.
pub fn two_sided_breaks(len: f64, lo_min: f64, hi_min: f64, ratio: f64) -> Vec<(f64, f64)> {
    let half = 0.5 * len;
    let mut lo = vec![half];
    let mut d = half;
    while d > lo_min {
        d *= ratio;
        lo.push(d);
    }
    lo.push(0.0);
    lo.reverse();
    let mut out: Vec<(f64, f64)> = lo.windows(2).map(|w| (w[0], w[1])).collect();
    let mut hi = vec![half];
    let mut d = half;
    while d > hi_min {
        d *= ratio;
        hi.push(d);
    }
    hi.push(0.0);
    out.extend(hi.windows(2).map(|w| (len - w[0], len - w[1])));
    out
}

/// Integrates `f(from_lo, to_hi)` over the given panels of [0, len].
pub fn integrate_panels<F: FnMut(f64, f64) -> f64>(panels: &[(f64, f64)], len: f64, order: usize, mut f: F) -> f64 {
    let rule = gauss_legendre(order);
    let mut acc = 0.0;
    let mut comp = 0.0;
    for &(a, b) in panels {
        let half = 0.5 * (b - a);
        let tail = len - b;
        let mut s_panel = 0.0;
        for (s, w) in rule.nodes.iter().zip(&rule.weights) {
            let from_a = half * (1.0 + s);
            let to_b = half * (1.0 - s);
            s_panel += w * f(a + from_a, tail + to_b);
        }
        let y = half * s_panel - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
    }
    acc
}

/// Integrates `f(from_lo, to_hi)` over [0, len] on graded panels.
pub fn integrate_graded<F: FnMut(f64, f64) -> f64>(
    len: f64,
    grade_lo: bool,
    grade_hi: bool,
    min_width: f64,
    order: usize,
    mut f: F,
) -> f64 {
    if len <= 0.0 {
        return 0.0;
    }
    let panels = graded_breaks(len, grade_lo, grade_hi, 0.25, min_width, len);
    let rule = gauss_legendre(order);
    let mut acc = 0.0;
    let mut comp = 0.0;
    for &(a, b) in &panels {
        let half = 0.5 * (b - a);
        let tail = len - b;
        let mut s_panel = 0.0;
        for (s, w) in rule.nodes.iter().zip(&rule.weights) {
            let from_a = half * (1.0 + s);
            let to_b = half * (1.0 - s);
            s_panel += w * f(a + from_a, tail + to_b);
        }
        let y = half * s_panel - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
    }
    acc
}

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
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) over consecutive breakpoints.
///
/// Subdivides the interval with the largest error estimate until the total
/// estimate falls under `abs_tol.max(rel_tol * |I|)` or `max_intervals` is
/// reached; returns the integral and the final error estimate.
pub fn adaptive_gk<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> (f64, f64) {
    let mut work: Vec<(f64, f64, f64, f64)> = Vec::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (v, e) = gk15(&mut f, w[0], w[1]);
            work.push((w[0], w[1], v, e));
        }
    }
    loop {
        let total: f64 = work.iter().map(|p| p.2).sum();
        let err: f64 = work.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) || work.len() >= max_intervals {
            return (total, err);
        }
        let (idx, _) = work
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, p)| if p.3 > best.1 { (i, p.3) } else { best });
        let (a, b, _, _) = work.swap_remove(idx);
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            return (total, err);
        }
        let (v1, e1) = gk15(&mut f, a, m);
        let (v2, e2) = gk15(&mut f, m, b);
        work.push((a, m, v1, e1));
        work.push((m, b, v2, e2));
    }
}

/// Tabulated function on consecutive panels with Gauss–Legendre nodes,
/// interpolated by barycentric Lagrange on the enclosing panel.
#[derive(Debug, Clone)]
pub struct PanelTable {
    pub panels: Vec<(f64, f64)>,
    pub nodes: Vec<Node>,
    pub values: Vec<f64>,
    order: usize,
}

impl PanelTable {
    /// Tabulates on [0, len] with `f(from_lo, to_hi)`.
    pub fn build<F: FnMut(f64, f64) -> f64>(
        panels: Vec<(f64, f64)>,
        len: f64,
        order: usize,
        mut f: F,
    ) -> Self {
        let rule = gauss_legendre(order);
        let nodes = panel_nodes(&panels, len, rule);
        let values = nodes.iter().map(|n| f(n.from_lo, n.to_hi)).collect();
        PanelTable { panels, nodes, values, order }
    }

    pub fn from_values(panels: Vec<(f64, f64)>, len: f64, order: usize, values: Vec<f64>) -> Self {
        let rule = gauss_legendre(order);
        let nodes = panel_nodes(&panels, len, rule);
        assert_eq!(nodes.len(), values.len());
        PanelTable { panels, nodes, values, order }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Integral of the tabulated function with the panel weights.
    pub fn integral(&self) -> f64 {
        self.nodes.iter().zip(&self.values).map(|(n, v)| n.w * v).sum()
    }

    pub fn panel_of(&self, x: f64) -> usize {
        let i = self.panels.partition_point(|p| p.1 < x);
        i.min(self.panels.len() - 1)
    }

    /// Interpolated value at `x` (clamped to the table range).
    pub fn eval(&self, x: f64) -> f64 {
        let p = self.panel_of(x);
        self.eval_in(p, x)
    }

    pub fn eval_in(&self, p: usize, x: f64) -> f64 {
        self.eval_offset(p, x, 0.0)
    }

    /// Interpolates `values − shift` on panel `p`.
    pub fn eval_offset(&self, p: usize, x: f64, shift: f64) -> f64 {
        let (a, b) = self.panels[p];
        let s = (2.0 * x - a - b) / (b - a);
        let rule = gauss_legendre(self.order);
        let vals = &self.values[p * self.order..(p + 1) * self.order];
        let mut num = 0.0;
        let mut den = 0.0;
        for ((x, w), v) in rule.nodes.iter().zip(&rule.bary).zip(vals) {
            let d = s - x;
            if d == 0.0 {
                return v - shift;
            }
            let c = w / d;
            num += c * (v - shift);
            den += c;
        }
        num / den
    }
}
