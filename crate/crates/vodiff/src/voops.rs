//! Variable-order operators on piecewise-linear data.
//!
//! Every operator splits (0, t) at the data nodes and at the kernel
//! breakpoints, so the order is constant on each piece and the moments of
//! (t−τ)^{−β} against linear functions are integrated exactly (L1 product
//! integration).

use crate::error::{Error, Result};
use crate::mlf::rgamma;
use crate::modes::{kernel_breakpoints, order_at, LHParams, OrderFunction};

/// Piecewise-linear interpolant of samples on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::Invalid(format!(
                "sampled function needs matching grid and values with at least two nodes (got {} and {})",
                grid.len(),
                values.len()
            )));
        }
        if !(grid[0] >= 0.0) {
            return Err(Error::Invalid(format!("grid starts at {} < 0", grid[0])));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid("grid must be strictly increasing".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NotFinite(*v));
        }
        Ok(SampledFunction { grid, values })
    }

    /// Samples `f` on the mesh of `q` over [0, t_end], graded after 0 and
    /// after each point of `critical`.
    pub fn from_fn<F: Fn(f64) -> f64>(f: F, t_end: f64, q: &QuadratureSpec, critical: &[f64]) -> Result<Self> {
        let grid = q.mesh(0.0, t_end, critical);
        let values = grid.iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start(&self) -> f64 {
        self.grid[0]
    }

    pub fn end(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    fn cell(&self, s: f64) -> usize {
        let i = self.grid.partition_point(|&g| g <= s);
        i.clamp(1, self.grid.len() - 1) - 1
    }

    pub fn value_at(&self, s: f64) -> f64 {
        let c = self.cell(s);
        let (a, b) = (self.grid[c], self.grid[c + 1]);
        let w = (s - a) / (b - a);
        self.values[c] * (1.0 - w) + self.values[c + 1] * w
    }

    pub fn slope(&self, c: usize) -> f64 {
        (self.values[c + 1] - self.values[c]) / (self.grid[c + 1] - self.grid[c])
    }
}

/// Mesh control: base step and grading exponent after critical points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub base_step: f64,
    pub grading_exponent: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { base_step: 1e-2, grading_exponent: 2.0 }
    }
}

impl QuadratureSpec {
    pub fn new(base_step: f64, grading_exponent: f64) -> Result<Self> {
        if !(base_step > 0.0) || !(grading_exponent >= 1.0) {
            return Err(Error::Invalid(format!(
                "quadrature needs base_step > 0 and grading_exponent >= 1, got {base_step}, {grading_exponent}"
            )));
        }
        Ok(QuadratureSpec { base_step, grading_exponent })
    }

    /// Nodes on [start, end]: each segment between consecutive critical
    /// points is graded toward its left end as c + L (j/m)^γ.
    pub fn mesh(&self, start: f64, end: f64, critical: &[f64]) -> Vec<f64> {
        let mut cuts: Vec<f64> = critical.iter().cloned().filter(|&c| c > start && c < end).collect();
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup();
        let mut pts = vec![start];
        let mut left = start;
        for right in cuts.into_iter().chain(std::iter::once(end)) {
            let len = right - left;
            let m = (len / self.base_step).ceil().max(1.0) as usize;
            for j in 1..m {
                let r = (j as f64 / m as f64).powf(self.grading_exponent);
                pts.push(left + len * r);
            }
            pts.push(right);
            left = right;
        }
        pts
    }
}

/// ∫_a^b (t−τ)^{−β}/Γ(1−β) dτ from the distances da = t−a ≥ db = t−b,
/// with 0⁰ := 0 so that β = 1 keeps only the piece ending at t.
pub fn l1_moment(da: f64, db: f64, beta: f64) -> f64 {
    if beta == 1.0 {
        return if db == 0.0 { 1.0 } else { 0.0 };
    }
    let p = 1.0 - beta;
    let pa = da.powf(p);
    let pb = if db == 0.0 { 0.0 } else { db.powf(p) };
    (pa - pb) * rgamma(2.0 - beta)
}

/// ∫_a^b (t−τ)^{p−1}(f_a + d (τ−a)) dτ / Γ(p).
fn power_moment(da: f64, db: f64, p: f64, fa: f64, d: f64) -> f64 {
    let pb = if db == 0.0 { 0.0 } else { db.powf(p) };
    let pb1 = if db == 0.0 { 0.0 } else { db.powf(p + 1.0) };
    let m0 = (da.powf(p) - pb) / p;
    let m1 = (da.powf(p + 1.0) - pb1) / (p + 1.0);
    ((fa + d * da) * m0 - d * m1) * rgamma(p)
}

/// Pieces of (0, t) with constant order: f's nodes, kernel breakpoints
/// and t itself. Yields (a, b, cell).
fn pieces(f: &SampledFunction, of: &OrderFunction, lh: &LHParams, t: f64) -> Vec<(f64, f64, usize)> {
    let mut cuts: Vec<f64> = f.grid.iter().cloned().filter(|&g| g > f.start() && g < t).collect();
    cuts.extend(kernel_breakpoints(of, lh, t));
    cuts.push(t);
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    let mut out = Vec::with_capacity(cuts.len());
    let mut a = f.start();
    for b in cuts {
        if b > a {
            let c = f.cell(0.5 * (a + b));
            out.push((a, b, c));
        }
        a = b;
    }
    out
}

fn check_support(f: &SampledFunction, lh: &LHParams, t: f64) -> Result<()> {
    if f.start() != 0.0 {
        return Err(Error::Invalid(format!("data must start at 0, starts at {}", f.start())));
    }
    if !(t >= 0.0 && t <= f.end() * (1.0 + 1e-14)) {
        return Err(Error::TimeRange { t, lo: 0.0, hi: f.end() });
    }
    if lh.mu() == 0.0 && lh.nu() == 0.0 {
        return Err(Error::DegenerateOperator);
    }
    Ok(())
}

fn piece_order(of: &OrderFunction, lh: &LHParams, t: f64, a: f64, b: f64) -> f64 {
    order_at(of, lh.argument(t, 0.5 * (a + b))).unwrap_or(of.values()[0])
}

/// ∫₀ᵗ (t−τ)^{−β(μt+ντ)} f′(τ) / Γ(1−β(μt+ντ)) dτ.
pub fn vo_caputo(f: &SampledFunction, of: &OrderFunction, lh: &LHParams, t: f64) -> Result<f64> {
    check_support(f, lh, t)?;
    let mut acc = 0.0;
    for (a, b, c) in pieces(f, of, lh, t) {
        let beta = piece_order(of, lh, t, a, b);
        let db = if b == t { 0.0 } else { t - b };
        acc += f.slope(c) * l1_moment(t - a, db, beta);
    }
    Ok(acc)
}

/// ∫₀ᵗ (t−τ)^{β(μt+ντ)−1} f(τ) / Γ(β(μt+ντ)) dτ.
pub fn vo_integral(f: &SampledFunction, of: &OrderFunction, lh: &LHParams, t: f64) -> Result<f64> {
    vo_integral_power(f, of, lh, t, 1)
}

/// k-fold kernel: ∫₀ᵗ (t−τ)^{kβ(·)−1} f(τ) / Γ(kβ(·)) dτ.
pub fn vo_integral_power(f: &SampledFunction, of: &OrderFunction, lh: &LHParams, t: f64, k: u32) -> Result<f64> {
    check_support(f, lh, t)?;
    if k == 0 {
        return Err(Error::Invalid("power k must be at least 1".into()));
    }
    let mut acc = 0.0;
    for (a, b, c) in pieces(f, of, lh, t) {
        let p = k as f64 * piece_order(of, lh, t, a, b);
        let db = if b == t { 0.0 } else { t - b };
        let d = f.slope(c);
        let fa = f.values[c] + d * (a - f.grid[c]);
        acc += power_moment(t - a, db, p, fa, d);
    }
    Ok(acc)
}

/// ψ(T)^k / Γ(kβ_* + 1), ψ(T) = T^{β_*} for T < 1 and T otherwise.
pub fn lemma_bound(of: &OrderFunction, t_max: f64, k: u32) -> f64 {
    let bs = of.min_order();
    let psi = if t_max < 1.0 { t_max.powf(bs) } else { t_max };
    psi.powi(k as i32) * rgamma(k as f64 * bs + 1.0)
}

/// Riemann–Liouville derivative of order α based at t0:
/// Caputo part plus g(t0)(t−t0)^{−α}/Γ(1−α).
pub fn rl_deriv(g: &SampledFunction, alpha: f64, t0: f64, t: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Invalid(format!("alpha = {alpha} outside (0, 1)")));
    }
    if (g.start() - t0).abs() > 1e-14 * t0.abs().max(1.0) {
        return Err(Error::Invalid(format!("data start {} differs from base point {t0}", g.start())));
    }
    if !(t <= g.end() * (1.0 + 1e-14)) {
        return Err(Error::TimeRange { t, lo: t0, hi: g.end() });
    }
    let g0 = g.values[0];
    if t <= t0 {
        return if g0 == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::Invalid(format!("RL derivative singular at t = t0 with g(t0) = {g0}")))
        };
    }
    let mut acc = 0.0;
    for c in 0..g.grid.len() - 1 {
        let a = g.grid[c];
        if a >= t {
            break;
        }
        let b = g.grid[c + 1].min(t);
        let db = if b >= t { 0.0 } else { t - b };
        acc += g.slope(c) * l1_moment(t - a, db, alpha);
    }
    Ok(acc + g0 * (t - t0).powf(-alpha) * rgamma(1.0 - alpha))
}
