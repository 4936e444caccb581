//! Mittag-Leffler function of one parameter on the real line.
//!
//! # Definition
//!
//! E_β(z) = Σ_{n≥0} zⁿ / Γ(βn + 1),  0 < β ≤ 1.
//!
//! For z = −x ≤ 0 three evaluation routes are used:
//! - the Taylor series with compensated summation for x ≤ 1,
//! - the algebraic expansion −Σ_{k≥1} (−x)^{−k} / Γ(1 − βk) when its terms
//!   fall below machine precision before they start to grow,
//! - otherwise the Laplace-type integral
//!   E_β(−x) = (sin βπ / (πβ)) ∫₀^∞ e^{−σ^{1/β}} x / (σ² + 2xσ cos βπ + x²) dσ,
//!   integrated adaptively with breakpoints around the peak of the rational
//!   factor.
//!
//! Positive arguments are summed in log space and overflow past
//! z^{1/β} = [`POSITIVE_LIMIT`].

use crate::error::{Error, Result};
use crate::quad::adaptive_gk;
use std::f64::consts::PI;

/// Largest supported z^{1/β} for z > 0; E_β(z) ≈ e^{z^{1/β}} / β beyond it
/// leaves the double range.
pub const POSITIVE_LIMIT: f64 = 700.0;

const SERIES_LIMIT: f64 = 1.0;
const SIGMA_CUT: f64 = 80.0;
const MAX_TERMS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MLParams {
    pub beta: f64,
    pub target_rel_err: f64,
}

impl MLParams {
    pub fn new(beta: f64) -> Result<Self> {
        Self::with_tolerance(beta, 1e-12)
    }

    pub fn with_tolerance(beta: f64, target_rel_err: f64) -> Result<Self> {
        check_order(beta)?;
        if !(target_rel_err > 0.0) {
            return Err(Error::Invalid(format!("target_rel_err must be positive, got {target_rel_err}")));
        }
        Ok(MLParams { beta, target_rel_err })
    }

    pub fn eval(&self, z: f64) -> Result<f64> {
        eval_impl(self.beta, z, quad_tol(self.target_rel_err))
    }

    pub fn deriv(&self, z: f64) -> Result<f64> {
        deriv_impl(self.beta, z, quad_tol(self.target_rel_err))
    }
}

fn quad_tol(target: f64) -> f64 {
    (target * 1e-2).max(2e-15)
}

pub(crate) fn check_order(beta: f64) -> Result<()> {
    if beta > 0.0 && beta <= 1.0 {
        Ok(())
    } else {
        Err(Error::OrderDomain(beta))
    }
}

/// E_β(z).
pub fn mlf_eval(beta: f64, z: f64) -> Result<f64> {
    check_order(beta)?;
    eval_impl(beta, z, quad_tol(1e-12))
}

/// dE_β/dz.
pub fn mlf_deriv(beta: f64, z: f64) -> Result<f64> {
    check_order(beta)?;
    deriv_impl(beta, z, quad_tol(1e-12))
}

/// E_β(−t) Γ(1−β) t, which tends to 1 as t grows.
pub fn mlf_asymptotic_check(beta: f64, t: f64) -> Result<f64> {
    check_order(beta)?;
    if beta >= 1.0 {
        return Err(Error::Invalid("asymptotic product needs beta < 1 (Γ(0) pole)".into()));
    }
    if !(t >= 50.0) {
        return Err(Error::Invalid(format!("asymptotic product needs t >= 50, got {t}")));
    }
    Ok(mlf_eval(beta, -t)? * libm::tgamma(1.0 - beta) * t)
}

fn eval_impl(beta: f64, z: f64, tol: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::NotFinite(z));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if beta == 1.0 {
        let v = z.exp();
        return if v.is_finite() { Ok(v) } else { Err(Error::Overflow { beta, z }) };
    }
    if z > 0.0 {
        return positive_series(beta, z, 0);
    }
    let x = -z;
    if x <= SERIES_LIMIT {
        return Ok(taylor(beta, z, 0));
    }
    if let Some(v) = asymptotic(beta, x, 0) {
        return Ok(v);
    }
    Ok(integral_eval(beta, x, tol))
}

fn deriv_impl(beta: f64, z: f64, tol: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::NotFinite(z));
    }
    if beta == 1.0 {
        let v = z.exp();
        return if v.is_finite() { Ok(v) } else { Err(Error::Overflow { beta, z }) };
    }
    if z == 0.0 {
        return Ok(rgamma(beta + 1.0));
    }
    if z > 0.0 {
        return positive_series(beta, z, 1);
    }
    let x = -z;
    if x <= SERIES_LIMIT {
        return Ok(taylor(beta, z, 1));
    }
    if let Some(v) = asymptotic(beta, x, 1) {
        return Ok(v);
    }
    Ok(integral_deriv(beta, x, tol))
}

/// 1/Γ(x), zero at the poles.
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return 0.0;
    }
    if x >= 0.5 {
        if x > 171.0 {
            return (-libm::lgamma(x)).exp();
        }
        1.0 / libm::tgamma(x)
    } else {
        let g = libm::tgamma(1.0 - x);
        sin_pi(x) * g / PI
    }
}

/// sin(πx) with exact zeros at the integers.
pub fn sin_pi(x: f64) -> f64 {
    if x == x.floor() {
        return 0.0;
    }
    let r = x - 2.0 * (0.5 * x).round();
    if r > 0.5 {
        (PI * (1.0 - r)).sin()
    } else if r < -0.5 {
        -(PI * (1.0 + r)).sin()
    } else {
        (PI * r).sin()
    }
}

fn neumaier_add(sum: &mut f64, comp: &mut f64, v: f64) {
    let t = *sum + v;
    if sum.abs() >= v.abs() {
        *comp += (*sum - t) + v;
    } else {
        *comp += (v - t) + *sum;
    }
    *sum = t;
}

/// Taylor series of E_β (order 0) or E′_β (order 1) for small |z|.
fn taylor(beta: f64, z: f64, order: u32) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut zp = 1.0;
    let start = order as usize;
    for n in start..MAX_TERMS {
        let nf = n as f64;
        let coef = if order == 0 { 1.0 } else { nf };
        let term = coef * zp * rgamma(beta * nf + 1.0);
        neumaier_add(&mut sum, &mut comp, term);
        zp *= z;
        if n > start + 4 && term.abs() <= 1e-18 * (sum + comp).abs() {
            break;
        }
    }
    sum + comp
}

fn positive_series(beta: f64, z: f64, order: u32) -> Result<f64> {
    if z.powf(1.0 / beta) > POSITIVE_LIMIT {
        return Err(Error::Overflow { beta, z });
    }
    let lz = z.ln();
    let start = order as usize;
    let log_term = |n: usize| {
        let nf = n as f64;
        let c = if order == 0 { 0.0 } else { nf.ln() };
        c + (nf - order as f64) * lz - libm::lgamma(beta * nf + 1.0)
    };
    let mut lmax = f64::NEG_INFINITY;
    let mut n = start;
    loop {
        let l = log_term(n);
        if l < lmax {
            break;
        }
        lmax = l;
        n += 1;
        if n > 100_000 {
            break;
        }
    }
    let mut sum = 0.0;
    let mut comp = 0.0;
    for n in start..200_000 {
        let v = (log_term(n) - lmax).exp();
        neumaier_add(&mut sum, &mut comp, v);
        if n as f64 > (z.powf(1.0 / beta) / beta) && v < 1e-18 * sum {
            break;
        }
    }
    let total = lmax + (sum + comp).ln();
    if total > 709.7 {
        return Err(Error::Overflow { beta, z });
    }
    Ok(total.exp())
}

/// Algebraic expansion at −x; `None` when the terms grow before reaching
/// double precision.
fn asymptotic(beta: f64, x: f64, order: u32) -> Option<f64> {
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut prev = f64::INFINITY;
    let inv = 1.0 / x;
    let mut xp = if order == 0 { inv } else { inv * inv };
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        let r = rgamma(1.0 - beta * kf);
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let coef = if order == 0 { 1.0 } else { kf };
        let term = sign * coef * xp * r;
        xp *= inv;
        if !term.is_finite() {
            return None;
        }
        if term == 0.0 {
            continue;
        }
        let mag = term.abs();
        if mag > prev && k > 2 {
            return None;
        }
        prev = mag;
        neumaier_add(&mut sum, &mut comp, term);
        if mag <= 1e-17 * (sum + comp).abs() {
            return Some(sum + comp);
        }
    }
    None
}

fn integral_breaks(beta: f64, x: f64) -> Vec<f64> {
    let c = (PI * beta).cos();
    let s = (PI * beta).sin();
    let smax = SIGMA_CUT.powf(beta);
    let mut b = vec![0.0, smax];
    if c < 0.0 {
        let peak = -x * c;
        let w = x * s;
        for m in [-100.0, -10.0, -3.0, -1.0, 0.0, 1.0, 3.0, 10.0, 100.0] {
            let p = peak + m * w;
            if p > 0.0 && p < smax {
                b.push(p);
            }
        }
    }
    if x < smax {
        b.push(x);
    }
    b.push(1.0f64.min(smax));
    b.sort_by(|a, b| a.total_cmp(b));
    b.dedup();
    b
}

fn integral_eval(beta: f64, x: f64, tol: f64) -> f64 {
    let c = (PI * beta).cos();
    let s = (PI * beta).sin();
    let ib = 1.0 / beta;
    let breaks = integral_breaks(beta, x);
    let (v, _) = adaptive_gk(
        |sig: f64| {
            let d = (sig + x * c) * (sig + x * c) + x * x * s * s;
            (-sig.powf(ib)).exp() * x / d
        },
        &breaks,
        tol,
        0.0,
        4000,
    );
    s / (PI * beta) * v
}

fn integral_deriv(beta: f64, x: f64, tol: f64) -> f64 {
    let c = (PI * beta).cos();
    let s = (PI * beta).sin();
    let ib = 1.0 / beta;
    let breaks = integral_breaks(beta, x);
    let (v, _) = adaptive_gk(
        |sig: f64| {
            let d = (sig + x * c) * (sig + x * c) + x * x * s * s;
            let p = sig.powf(ib);
            p * (-p).exp() / d
        },
        &breaks,
        tol,
        0.0,
        4000,
    );
    s / (PI * beta * beta) * v
}

const CHEB_DEG: usize = 36;

/// Per-order lookup for E_β(−y) and E′_β(−y), y ≥ 0: Chebyshev fits on
/// doubling segments up to the point where the algebraic expansion is
/// exact, then the expansion with cached coefficients.
#[derive(Debug, Clone)]
pub struct MlTable {
    beta: f64,
    edges: Vec<f64>,
    coef_e: Vec<[f64; CHEB_DEG + 1]>,
    coef_d: Vec<[f64; CHEB_DEG + 1]>,
    y_asym: f64,
    asym: Vec<f64>,
}

impl MlTable {
    pub fn new(beta: f64) -> Result<Self> {
        check_order(beta)?;
        if beta == 1.0 {
            return Ok(MlTable { beta, edges: vec![], coef_e: vec![], coef_d: vec![], y_asym: 0.0, asym: vec![] });
        }
        let mut y_asym = 2.0;
        while asymptotic(beta, y_asym, 0).is_none() || asymptotic(beta, y_asym, 1).is_none() {
            y_asym *= 2.0;
        }
        let mut edges = vec![0.0, 0.5];
        while *edges.last().unwrap() < y_asym {
            let e = *edges.last().unwrap() * 2.0;
            edges.push(e);
        }
        let tol = quad_tol(1e-13);
        let mut coef_e = Vec::new();
        let mut coef_d = Vec::new();
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            coef_e.push(cheb_fit(a, b, |y| eval_impl(beta, -y, tol).unwrap_or(f64::NAN)));
            coef_d.push(cheb_fit(a, b, |y| deriv_impl(beta, -y, tol).unwrap_or(f64::NAN)));
        }
        let asym = (1..MAX_TERMS).map(|k| rgamma(1.0 - beta * k as f64)).take(400).collect();
        let y_asym = *edges.last().unwrap();
        Ok(MlTable { beta, edges, coef_e, coef_d, y_asym, asym })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// E_β(−y).
    pub fn e(&self, y: f64) -> f64 {
        if self.beta == 1.0 {
            return (-y).exp();
        }
        if y >= self.y_asym {
            return self.asym_sum(y, 0).unwrap_or_else(|| eval_impl(self.beta, -y, 2e-15).unwrap_or(f64::NAN));
        }
        let i = self.segment(y);
        cheb_eval(&self.coef_e[i], self.edges[i], self.edges[i + 1], y)
    }

    /// E′_β(−y).
    pub fn de(&self, y: f64) -> f64 {
        if self.beta == 1.0 {
            return (-y).exp();
        }
        if y >= self.y_asym {
            return self.asym_sum(y, 1).unwrap_or_else(|| deriv_impl(self.beta, -y, 2e-15).unwrap_or(f64::NAN));
        }
        let i = self.segment(y);
        cheb_eval(&self.coef_d[i], self.edges[i], self.edges[i + 1], y)
    }

    fn segment(&self, y: f64) -> usize {
        if y < 0.5 {
            0
        } else {
            let i = self.edges.partition_point(|&e| e <= y);
            (i - 1).min(self.coef_e.len() - 1)
        }
    }

    fn asym_sum(&self, y: f64, order: u32) -> Option<f64> {
        let inv = 1.0 / y;
        let mut xp = if order == 0 { inv } else { inv * inv };
        let mut sum = 0.0;
        for (i, &r) in self.asym.iter().enumerate() {
            let k = (i + 1) as f64;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let coef = if order == 0 { 1.0 } else { k };
            let term = sign * coef * xp * r;
            xp *= inv;
            sum += term;
            if term != 0.0 && term.abs() <= 1e-17 * sum.abs() {
                return Some(sum);
            }
        }
        None
    }
}

fn cheb_fit<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> [f64; CHEB_DEG + 1] {
    let n = CHEB_DEG + 1;
    let vals: Vec<f64> = (0..n)
        .map(|j| {
            let th = PI * (j as f64 + 0.5) / n as f64;
            f(0.5 * (a + b) + 0.5 * (b - a) * th.cos())
        })
        .collect();
    let mut c = [0.0; CHEB_DEG + 1];
    for (k, ck) in c.iter_mut().enumerate() {
        let mut s = 0.0;
        for (j, v) in vals.iter().enumerate() {
            s += v * (PI * k as f64 * (j as f64 + 0.5) / n as f64).cos();
        }
        *ck = 2.0 * s / n as f64;
    }
    c[0] *= 0.5;
    c
}

fn cheb_eval(c: &[f64; CHEB_DEG + 1], a: f64, b: f64, y: f64) -> f64 {
    let u = (2.0 * y - a - b) / (b - a);
    let u2 = 2.0 * u;
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in c.iter().skip(1).rev() {
        let t = u2 * b1 - b2 + ck;
        b2 = b1;
        b1 = t;
    }
    u * b1 - b2 + c[0]
}
