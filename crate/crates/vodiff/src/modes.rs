//! Diffusion modes: piecewise-constant order functions, the (μ, ν) mixing
//! parameters, the variable-order kernel and memory classification.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Relative tolerance for comparisons against critical times.
pub const TIME_TOL: f64 = 1e-12;

/// β(s) = β_k for s ∈ [T_k, T_{k+1}), with T_0 = 0 and T_{N+1} = ∞.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOrderFunction", into = "RawOrderFunction")]
pub struct OrderFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawOrderFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawOrderFunction> for OrderFunction {
    type Error = Error;
    fn try_from(r: RawOrderFunction) -> Result<Self> {
        OrderFunction::new(r.breakpoints, r.values)
    }
}

impl From<OrderFunction> for RawOrderFunction {
    fn from(o: OrderFunction) -> Self {
        RawOrderFunction { breakpoints: o.breakpoints, values: o.values }
    }
}

impl OrderFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::OrderFunction(format!(
                "{} breakpoints need {} values, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                values.len()
            )));
        }
        let mut prev = 0.0;
        for (i, &t) in breakpoints.iter().enumerate() {
            if !(t.is_finite() && t > prev) {
                return Err(Error::OrderFunction(format!(
                    "breakpoints[{i}] = {t} must be finite and exceed {prev}"
                )));
            }
            prev = t;
        }
        for (i, &b) in values.iter().enumerate() {
            if !(b > 0.0 && b <= 1.0) {
                return Err(Error::OrderFunction(format!("values[{i}] = {b} outside (0, 1]")));
            }
        }
        Ok(OrderFunction { breakpoints, values })
    }

    pub fn constant(beta: f64) -> Result<Self> {
        Self::new(vec![], vec![beta])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of mode changes N.
    pub fn changes(&self) -> usize {
        self.breakpoints.len()
    }

    /// Index k with s ∈ [T_k, T_{k+1}).
    pub fn piece(&self, s: f64) -> usize {
        self.breakpoints.partition_point(|&t| t <= s)
    }

    pub fn max_order(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min_order(&self) -> f64 {
        self.values.iter().cloned().fold(1.0, f64::min)
    }

    pub fn last(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

pub fn order_at(of: &OrderFunction, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Invalid(format!("order requested at negative time {s}")));
    }
    Ok(of.values[of.piece(s)])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLh", into = "RawLh")]
pub struct LHParams {
    mu: f64,
    nu: f64,
}

#[derive(Serialize, Deserialize)]
struct RawLh {
    mu: f64,
    nu: f64,
}

impl TryFrom<RawLh> for LHParams {
    type Error = Error;
    fn try_from(r: RawLh) -> Result<Self> {
        LHParams::new(r.mu, r.nu)
    }
}

impl From<LHParams> for RawLh {
    fn from(l: LHParams) -> Self {
        RawLh { mu: l.mu, nu: l.nu }
    }
}

impl LHParams {
    /// Accepts (μ, ν) in the parallelogram 0 ≤ μ ≤ 1, −1 ≤ ν ≤ 1,
    /// 0 ≤ μ + ν ≤ 1.
    pub fn new(mu: f64, nu: f64) -> Result<Self> {
        let eps = 1e-12;
        let ok = mu.is_finite()
            && nu.is_finite()
            && mu >= -eps
            && mu <= 1.0 + eps
            && nu >= -1.0 - eps
            && nu <= 1.0 + eps
            && mu + nu >= -eps
            && mu + nu <= 1.0 + eps;
        if !ok {
            return Err(Error::Parallelogram { mu, nu });
        }
        Ok(LHParams { mu, nu })
    }

    /// μ = 1, ν = 0.
    pub fn caputo() -> Self {
        LHParams { mu: 1.0, nu: 0.0 }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Argument μt + ντ of the order function.
    pub fn argument(&self, t: f64, tau: f64) -> f64 {
        (self.mu * t + self.nu * tau).max(0.0)
    }
}

/// Value of the kernel (t−τ)^{−β}/Γ(1−β) at β = β(μt+ντ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelValue {
    Weak { beta: f64, value: f64 },
    /// β = 1: the operator is the first derivative.
    FirstDerivative,
}

pub fn kernel_eval(of: &OrderFunction, lh: &LHParams, t: f64, tau: f64) -> Result<KernelValue> {
    if !(tau >= 0.0 && tau < t) {
        return Err(Error::Invalid(format!("kernel needs 0 <= tau < t, got tau = {tau}, t = {t}")));
    }
    let s = lh.mu * t + lh.nu * tau;
    assert!(s >= -TIME_TOL * t, "order argument {s} negative inside the parallelogram");
    let beta = order_at(of, s.max(0.0))?;
    if beta == 1.0 {
        return Ok(KernelValue::FirstDerivative);
    }
    let value = (t - tau).powf(-beta) * crate::mlf::rgamma(1.0 - beta);
    Ok(KernelValue::Weak { beta, value })
}

/// Interior points τ_j = (T_j − μt)/ν of (0, t) where τ ↦ β(μt+ντ) jumps.
pub fn kernel_breakpoints(of: &OrderFunction, lh: &LHParams, t: f64) -> Vec<f64> {
    if lh.nu == 0.0 || t <= 0.0 {
        return vec![];
    }
    let mut out: Vec<f64> = of
        .breakpoints
        .iter()
        .map(|&tk| (tk - lh.mu * t) / lh.nu)
        .filter(|&tau| tau > 0.0 && tau < t)
        .collect();
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryClass {
    Short,
    Long,
    None,
}

impl MemoryClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            MemoryClass::Short => "short",
            MemoryClass::Long => "long",
            MemoryClass::None => "none",
        }
    }
}

/// Memory behaviour around one mode change time T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeChange {
    pub index: usize,
    pub time: f64,
    pub class: MemoryClass,
    pub t_low: f64,
    pub t_high: f64,
}

impl ModeChange {
    /// (0, t_low): only the previous order is seen by the kernel.
    pub fn pure_old_interval(&self) -> (f64, f64) {
        (0.0, self.t_low)
    }

    /// (t_low, t_high): both orders are seen; empty when the ends coincide.
    pub fn mixing_interval(&self) -> (f64, f64) {
        (self.t_low, self.t_high)
    }

    /// (t_high, ∞): only the new order is seen.
    pub fn pure_new_interval(&self) -> (f64, f64) {
        (self.t_high, f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryReport {
    pub lh: LHParams,
    pub changes: Vec<ModeChange>,
}

impl MemoryReport {
    pub fn has_long_memory(&self) -> bool {
        self.changes.iter().any(|c| c.class == MemoryClass::Long)
    }
}

fn ratio(t: f64, d: f64) -> f64 {
    if d <= 0.0 {
        f64::INFINITY
    } else {
        t / d
    }
}

/// Critical times for each T_k: the arguments μt+ντ over τ ∈ (0, t) span
/// (min(μ, μ+ν)t, max(μ, μ+ν)t), so the kernel sees only the old order for
/// t < T/max(μ, μ+ν) and only the new one for t > T/min(μ, μ+ν).
pub fn classify_memory(of: &OrderFunction, lh: &LHParams) -> Result<MemoryReport> {
    if lh.mu == 0.0 && lh.nu == 0.0 {
        return Err(Error::DegenerateOperator);
    }
    let hi = lh.mu.max(lh.mu + lh.nu);
    let lo = lh.mu.min(lh.mu + lh.nu);
    let changes = of
        .breakpoints
        .iter()
        .enumerate()
        .map(|(i, &tk)| {
            let t_low = ratio(tk, hi);
            let t_high = ratio(tk, lo);
            let class = if lo <= 0.0 {
                MemoryClass::Long
            } else if lh.nu == 0.0 && lh.mu == 1.0 {
                MemoryClass::None
            } else {
                MemoryClass::Short
            };
            ModeChange { index: i + 1, time: tk, class, t_low, t_high }
        })
        .collect();
    Ok(MemoryReport { lh: *lh, changes })
}
