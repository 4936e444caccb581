//! Reference solver: implicit L1 time stepping of
//! D^{β(t)}_{μ,ν} y = λ y + f(t), y(0) = y0, one history for all times.
//!
//! The weights of the discrete operator do not depend on λ, so many
//! frequencies are advanced together.

use crate::error::{Error, Result};
use crate::field::{Grid, Provenance, SpectralField, SymbolSpec};
use crate::mlf::rgamma;
use crate::modes::{classify_memory, kernel_breakpoints, order_at, LHParams, OrderFunction};
use crate::spectral::reduce_early_window;
use crate::voops::{l1_moment, QuadratureSpec, SampledFunction};
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVoProblem {
    pub lambda: f64,
    pub of: OrderFunction,
    pub lh: LHParams,
    pub y0: f64,
    pub t_end: f64,
    pub step: QuadratureSpec,
}

impl ScalarVoProblem {
    pub fn new(lambda: f64, of: OrderFunction, lh: LHParams, y0: f64, t_end: f64, step: QuadratureSpec) -> Result<Self> {
        if !(lambda <= 0.0) {
            return Err(Error::Invalid(format!("lambda = {lambda} must be <= 0")));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::Invalid(format!("t_end = {t_end} must be positive")));
        }
        if lh.mu() == 0.0 && lh.nu() == 0.0 {
            return Err(Error::DegenerateOperator);
        }
        Ok(ScalarVoProblem { lambda, of, lh, y0, t_end, step })
    }
}

/// Times after which the solution loses smoothness: every finite t_low,
/// t_high of the memory report.
pub fn critical_times(of: &OrderFunction, lh: &LHParams) -> Result<Vec<f64>> {
    let rep = classify_memory(of, lh)?;
    let mut out: Vec<f64> = Vec::new();
    for c in rep.changes {
        for t in [c.t_low, c.t_high] {
            if t.is_finite() {
                out.push(t);
            }
        }
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out.dedup();
    Ok(out)
}

/// Graded mesh on [0, t_end] with every requested time as a node.
pub fn oracle_mesh(of: &OrderFunction, lh: &LHParams, q: &QuadratureSpec, t_end: f64, times: &[f64]) -> Result<Vec<f64>> {
    let crit = critical_times(of, lh)?;
    let mut mesh = q.mesh(0.0, t_end, &crit);
    for &t in times {
        if !(t > 0.0 && t <= t_end) {
            return Err(Error::TimeRange { t, lo: 0.0, hi: t_end });
        }
        let i = mesh.partition_point(|&m| m < t);
        if i < mesh.len() && mesh[i] == t {
            continue;
        }
        mesh.insert(i, t);
    }
    Ok(mesh)
}

/// Discrete operator weights c_j with D y(t_n) ≈ Σ_j c_j (y_{j+1} − y_j).
pub fn cell_weights(of: &OrderFunction, lh: &LHParams, mesh: &[f64], n: usize, out: &mut Vec<f64>) {
    out.clear();
    let t = mesh[n];
    let bps = kernel_breakpoints(of, lh, t);
    if bps.is_empty() {
        let beta = order_at(of, lh.argument(t, 0.5 * (mesh[0] + t))).unwrap_or(of.values()[0]);
        if beta == 1.0 {
            out.resize(n, 0.0);
            out[n - 1] = 1.0 / (t - mesh[n - 1]);
            return;
        }
        let p = 1.0 - beta;
        let rg = rgamma(2.0 - beta);
        let mut prev = (t - mesh[0]).powf(p);
        for j in 0..n {
            let next = if j + 1 == n { 0.0 } else { (t - mesh[j + 1]).powf(p) };
            out.push((prev - next) * rg / (mesh[j + 1] - mesh[j]));
            prev = next;
        }
        return;
    }
    let mut k = 0;
    for j in 0..n {
        let (a, b) = (mesh[j], mesh[j + 1]);
        let mut lo = a;
        let mut acc = 0.0;
        while k < bps.len() && bps[k] <= lo {
            k += 1;
        }
        let mut kk = k;
        loop {
            let hi = if kk < bps.len() && bps[kk] < b { bps[kk] } else { b };
            let beta = order_at(of, lh.argument(t, 0.5 * (lo + hi))).unwrap_or(of.values()[0]);
            let db = if j + 1 == n && hi == b { 0.0 } else { t - hi };
            acc += l1_moment(t - lo, db, beta);
            if hi == b {
                break;
            }
            lo = hi;
            kk += 1;
        }
        out.push(acc / (b - a));
    }
}

/// Values fixed by a known solution up to `until` instead of stepping.
pub struct Seed<'a> {
    pub until: f64,
    pub value: &'a (dyn Fn(f64, usize) -> f64 + Sync),
}

/// Solutions for several λ on a shared mesh: `rows[n][l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSolution {
    pub mesh: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl BatchSolution {
    pub fn node_of(&self, t: f64) -> Option<usize> {
        self.mesh.iter().position(|&m| m == t)
    }

    pub fn column(&self, l: usize) -> SampledFunction {
        let v = self.rows.iter().map(|r| r[l]).collect();
        SampledFunction::new(self.mesh.clone(), v).expect("mesh is valid")
    }
}

/// Steps all λ at once; `forcing` is a λ-independent source term.
pub fn step_batch(
    lambdas: &[f64],
    of: &OrderFunction,
    lh: &LHParams,
    mesh: &[f64],
    y0: f64,
    forcing: Option<&(dyn Fn(f64) -> f64 + Sync)>,
    seed: Option<&Seed>,
) -> Result<BatchSolution> {
    if mesh.len() < 2 || mesh[0] != 0.0 || mesh.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid("oracle mesh must start at 0 and increase strictly".into()));
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l <= 0.0)) {
        return Err(Error::Invalid(format!("lambda = {l} must be <= 0")));
    }
    let chunk = lambdas.len().div_ceil(rayon::current_num_threads().max(1)).max(1);
    let parts: Vec<Result<Vec<Vec<f64>>>> = lambdas
        .par_chunks(chunk)
        .enumerate()
        .map(|(ci, ls)| step_chunk(ls, ci * chunk, of, lh, mesh, y0, forcing, seed))
        .collect();
    let mut rows = vec![Vec::with_capacity(lambdas.len()); mesh.len()];
    for p in parts {
        for (n, r) in p?.into_iter().enumerate() {
            rows[n].extend(r);
        }
    }
    Ok(BatchSolution { mesh: mesh.to_vec(), lambdas: lambdas.to_vec(), rows })
}

#[allow(clippy::too_many_arguments)]
fn step_chunk(
    ls: &[f64],
    offset: usize,
    of: &OrderFunction,
    lh: &LHParams,
    mesh: &[f64],
    y0: f64,
    forcing: Option<&(dyn Fn(f64) -> f64 + Sync)>,
    seed: Option<&Seed>,
) -> Result<Vec<Vec<f64>>> {
    let m = ls.len();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(mesh.len());
    let first: Vec<f64> = match seed {
        Some(s) if s.until >= 0.0 => (0..m).map(|l| (s.value)(0.0, offset + l)).collect(),
        _ => vec![y0; m],
    };
    rows.push(first);
    let mut w = Vec::with_capacity(mesh.len());
    let mut acc = vec![0.0; m];
    for n in 1..mesh.len() {
        let t = mesh[n];
        if let Some(s) = seed {
            if t <= s.until {
                rows.push((0..m).map(|l| (s.value)(t, offset + l)).collect());
                continue;
            }
        }
        cell_weights(of, lh, mesh, n, &mut w);
        acc.iter_mut().for_each(|a| *a = 0.0);
        for j in 0..n - 1 {
            let c = w[j];
            if c == 0.0 {
                continue;
            }
            let (r0, r1) = (&rows[j], &rows[j + 1]);
            for l in 0..m {
                acc[l] += c * (r1[l] - r0[l]);
            }
        }
        let d = w[n - 1];
        let f = forcing.map_or(0.0, |g| g(t));
        let prev = &rows[n - 1];
        let row: Vec<f64> = (0..m)
            .map(|l| {
                let den = d - ls[l];
                assert!(den > 0.0, "vanishing diagonal coefficient");
                (d * prev[l] - acc[l] + f) / den
            })
            .collect();
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::NotFinite(*v));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Single-frequency solve on the problem's graded mesh.
pub fn step_solve(p: &ScalarVoProblem) -> Result<SampledFunction> {
    let mesh = oracle_mesh(&p.of, &p.lh, &p.step, p.t_end, &[])?;
    let sol = step_batch(&[p.lambda], &p.of, &p.lh, &mesh, p.y0, None, None)?;
    Ok(sol.column(0))
}

/// Partial sums Σ_{k≤m} λ^k t^{β₀k}/Γ(β₀k+1) y0 of the Picard iteration
/// on the problem's mesh; valid before the first critical time.
pub fn picard_first_interval(p: &ScalarVoProblem, m: usize) -> Result<SampledFunction> {
    let t_star = reduce_early_window(&p.of, &p.lh)?;
    if !(p.t_end < t_star) {
        return Err(Error::TimeRange { t: p.t_end, lo: 0.0, hi: t_star });
    }
    let b = p.of.values()[0];
    let mesh = p.step.mesh(0.0, p.t_end, &[]);
    let vals = mesh
        .iter()
        .map(|&t| {
            let x = p.lambda * t.powf(b);
            let mut s = 0.0;
            let mut xp = 1.0;
            for k in 0..=m {
                s += xp * rgamma(b * k as f64 + 1.0);
                xp *= x;
            }
            s * p.y0
        })
        .collect();
    SampledFunction::new(mesh, vals)
}

/// Σ_{k>m} |λ ψ(T)|^k / Γ(β₀k+1) |y0|, ψ(T) = T^{β₀} for T < 1 and T
/// otherwise.
pub fn picard_tail_bound(p: &ScalarVoProblem, m: usize) -> f64 {
    let b = p.of.values()[0];
    let psi = if p.t_end < 1.0 { p.t_end.powf(b) } else { p.t_end };
    let x = p.lambda.abs() * psi;
    let mut s = 0.0;
    for k in (m + 1)..(m + 5000) {
        let term = (k as f64 * x.ln() - libm::lgamma(b * k as f64 + 1.0)).exp();
        s += term;
        if term < 1e-18 * s && k as f64 * b > x.max(1.0) * 2.0 {
            break;
        }
    }
    s * p.y0.abs()
}

/// Oracle densities at the requested times.
pub fn field_oracle(
    spec: &SymbolSpec,
    of: &OrderFunction,
    lh: &LHParams,
    grid: &Grid,
    times: &[f64],
    q: &QuadratureSpec,
) -> Result<Vec<SpectralField>> {
    let (lams, index) = grid.symbol_values(spec)?;
    let t_end = times.iter().cloned().fold(0.0, f64::max);
    let mesh = oracle_mesh(of, lh, q, t_end, times)?;
    let sol = step_batch(&lams, of, lh, &mesh, 1.0, None, None)?;
    times
        .iter()
        .map(|&t| {
            let n = sol.node_of(t).expect("time is a mesh node");
            let sym = index.iter().map(|&k| sol.rows[n][k]).collect();
            SpectralField::synthesize(*grid, t, Provenance::Oracle, sym)
        })
        .collect()
}
