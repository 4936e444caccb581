//! Closed-form solution symbols for ν = 0, their synthesis into densities
//! and the two window reductions for general (μ, ν).
//!
//! Within mode k the whole history is weighted with β_k, so on
//! [t_k, t_{k+1}) the symbol solves a constant-order problem based at t_k
//! with data w_k = y(t_k) and a memory forcing R_k carried by the completed
//! modes:
//!
//!   y(t_k + r) = w_k E_{β_k}(λ r^{β_k}) + P_k(r),
//!   P_k(r) = ∫_0^{r^{β_k}} E′_{β_k}(λv) R_k(r − v^{1/β_k}) dv,
//!   R_k(r) = −I(r)/Γ(1−β_k),
//!   I(r) = t^{−β_k}(w_k − 1) − β_k ∫_0^{t_k} (t−σ)^{−β_k−1} (y(σ) − w_k) dσ.

use crate::error::{Error, Result};
use crate::field::{Grid, Provenance, SpectralField, SymbolSpec};
use crate::mlf::{rgamma, MlTable};
use crate::modes::{LHParams, OrderFunction};
use crate::quad::{gauss_legendre, graded_breaks, integrate_panels, two_sided_breaks, PanelTable};
use rayon::prelude::*;

const ORDER: usize = 16;
const R_ORDER: usize = 24;
const V_ORDER: usize = 16;

/// t_{cr,0} = 0 < t_{cr,1} < … with t_{cr,j} = T_j/(μ+ν), and the order
/// active after each.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalSchedule {
    times: Vec<f64>,
    betas: Vec<f64>,
}

impl CriticalSchedule {
    pub fn new(of: &OrderFunction, lh: &LHParams) -> Result<Self> {
        let s = lh.mu() + lh.nu();
        if s == 0.0 {
            return Err(if lh.mu() == 0.0 {
                Error::DegenerateOperator
            } else {
                Error::LongMemory { mu: lh.mu(), nu: lh.nu() }
            });
        }
        let mut times = vec![0.0];
        times.extend(of.breakpoints().iter().map(|&t| t / s));
        Ok(CriticalSchedule { times, betas: of.values().to_vec() })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn modes(&self) -> usize {
        self.times.len()
    }

    /// Index k with t ∈ [t_{cr,k}, t_{cr,k+1}).
    pub fn mode_of(&self, t: f64) -> usize {
        self.times.partition_point(|&c| c <= t).max(1) - 1
    }

    fn width(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }
}

fn closed_form_schedule(of: &OrderFunction, lh: &LHParams) -> Result<CriticalSchedule> {
    if lh.nu() != 0.0 {
        return Err(Error::NeedsHybrid(lh.nu()));
    }
    CriticalSchedule::new(of, lh)
}

/// S_j = E_{β_j}((t − t_{cr,j})^{β_j} λ), λ = A(ξ).
pub fn symbol_s(j: usize, t: f64, lambda: f64, sched: &CriticalSchedule) -> Result<f64> {
    let t0 = *sched.times.get(j).ok_or_else(|| Error::Invalid(format!("mode {j} does not exist")))?;
    if !(t >= t0) {
        return Err(Error::TimeRange { t, lo: t0, hi: f64::INFINITY });
    }
    let b = sched.betas[j];
    crate::mlf::mlf_eval(b, lambda * (t - t0).powf(b))
}

/// M_k = S_k(t) ∏_{j<k} S_j(t_{cr,j+1}).
pub fn symbol_m(k: usize, t: f64, lambda: f64, sched: &CriticalSchedule) -> Result<f64> {
    if k == 0 {
        return Err(Error::Invalid("M_k needs k >= 1".into()));
    }
    let mut m = symbol_s(k, t, lambda, sched)?;
    for j in 0..k {
        m *= symbol_s(j, sched.times[j + 1], lambda, sched)?;
    }
    Ok(m)
}

/// Memory forcing R_k(t) of the completed modes, λ = A(ξ).
pub fn symbol_r(k: usize, t: f64, lambda: f64, of: &OrderFunction, lh: &LHParams) -> Result<f64> {
    let sched = closed_form_schedule(of, lh)?;
    if k == 0 || k >= sched.modes() {
        return Err(Error::Invalid(format!("mode {k} has no memory forcing")));
    }
    let t0 = sched.times[k];
    if !(t >= t0) {
        return Err(Error::TimeRange { t, lo: t0, hi: f64::INFINITY });
    }
    let ml = ml_tables(&sched)?;
    let mut e = ModeSymbols::new(&sched, &ml, lambda)?;
    e.complete_through(k)?;
    let h = e.history(k, 0.0);
    e.forcing(k, t - t0, &h)
}

/// 𝒮(t, ξ) for λ = A(ξ).
pub fn assemble_solution_symbol(t: f64, lambda: f64, of: &OrderFunction, lh: &LHParams) -> Result<f64> {
    let sched = closed_form_schedule(of, lh)?;
    let ml = ml_tables(&sched)?;
    let mut e = ModeSymbols::new(&sched, &ml, lambda)?;
    Ok(e.evaluate(&[t])?[0].value)
}

pub(crate) fn ml_tables(sched: &CriticalSchedule) -> Result<Vec<MlTable>> {
    let mut out: Vec<MlTable> = Vec::with_capacity(sched.betas.len());
    for &b in &sched.betas {
        match out.iter().find(|m| m.beta() == b) {
            Some(m) => out.push(m.clone()),
            None => out.push(MlTable::new(b)?),
        }
    }
    Ok(out)
}

/// One value of the symbol split into its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolValue {
    pub mode: usize,
    /// w_k E_{β_k}(λ r^{β_k}).
    pub homogeneous: f64,
    /// P_k(r).
    pub duhamel: f64,
    pub value: f64,
}

struct Level {
    ring: Vec<(f64, f64)>,
    cap: Vec<(f64, f64)>,
}

/// (distance to t_k, weight × (y − reference)) pairs of the completed
/// history; the last panel before t_k is refined geometrically toward t_k.
struct History {
    far: Vec<(f64, f64)>,
    far_table: Option<PanelTable>,
    width: f64,
    last: Vec<(f64, f64)>,
    levels: Vec<Level>,
    floor: f64,
}

struct Window {
    w: f64,
    r_len: f64,
    r_table: Option<PanelTable>,
    y_table: Option<PanelTable>,
    w_end: f64,
}

/// Per-λ evaluator; windows are completed in order and cached.
pub struct ModeSymbols<'a> {
    sched: &'a CriticalSchedule,
    ml: &'a [MlTable],
    lambda: f64,
    windows: Vec<Window>,
}

impl<'a> ModeSymbols<'a> {
    pub fn new(sched: &'a CriticalSchedule, ml: &'a [MlTable], lambda: f64) -> Result<Self> {
        if !(lambda <= 0.0) {
            return Err(Error::Invalid(format!("lambda = {lambda} must be <= 0")));
        }
        let w0 = Window { w: 1.0, r_len: 0.0, r_table: None, y_table: None, w_end: f64::NAN };
        Ok(ModeSymbols { sched, ml, lambda, windows: vec![w0] })
    }

    fn beta(&self, k: usize) -> f64 {
        self.sched.betas[k]
    }

    /// y(t_k + r) from window k's forcing table.
    fn local(&self, k: usize, r: f64) -> SymbolValue {
        let b = self.beta(k);
        let win = &self.windows[k];
        let homogeneous = win.w * self.ml[k].e(-self.lambda * r.powf(b));
        let duhamel = self.duhamel(k, r);
        SymbolValue { mode: k, homogeneous, duhamel, value: homogeneous + duhamel }
    }

    fn duhamel(&self, k: usize, r: f64) -> f64 {
        let tab = match &self.windows[k].r_table {
            Some(t) if r > 0.0 => t,
            _ => return 0.0,
        };
        let b = self.beta(k);
        let v_len = r.powf(b);
        let panels = two_sided_breaks(v_len, 0.05 / self.lambda.abs(), 1e-9 * v_len, 0.25);
        let ml = &self.ml[k];
        let lam = self.lambda;
        integrate_panels(&panels, v_len, V_ORDER, |v, dv| {
            let rs = r * -((-dv / v_len).ln_1p() / b).exp_m1();
            ml.de(-lam * v) * tab.eval(rs)
        })
    }

    /// Weighted history differences entering R_k.
    fn history(&self, k: usize, r_max: f64) -> History {
        let times = &self.sched.times;
        let tk = times[k];
        let wk = self.windows[k].w;
        let mut far = Vec::new();
        for j in 0..k - 1 {
            let tab = self.windows[j].y_table.as_ref().expect("window completed");
            let gap = tk - times[j + 1];
            for (nd, v) in tab.nodes.iter().zip(&tab.values) {
                far.push((gap + nd.to_hi, nd.w * (v - wk)));
            }
        }
        let win = &self.windows[k - 1];
        let tab = win.y_table.as_ref().expect("window completed");
        let len = self.sched.width(k - 1);
        let wref = win.w_end;
        let np = tab.panels.len();
        for p in 0..np - 1 {
            let (a, b) = tab.panels[p];
            debug_assert!(len - b >= b - a);
            for i in p * ORDER..(p + 1) * ORDER {
                let nd = &tab.nodes[i];
                far.push((nd.to_hi, nd.w * (tab.values[i] - wref)));
            }
        }
        let (a, b) = tab.panels[np - 1];
        let width = b - a;
        let last = ((np - 1) * ORDER..np * ORDER)
            .map(|i| (tab.nodes[i].to_hi, tab.nodes[i].w * (tab.values[i] - wref)))
            .collect();
        let rule = gauss_legendre(ORDER);
        let sample = |lo_d: f64, hi_d: f64| -> Vec<(f64, f64)> {
            let half = 0.5 * (hi_d - lo_d);
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(s, w)| {
                    let dist = lo_d + half * (1.0 - s);
                    (dist, half * w * tab.eval_offset(np - 1, b - dist, wref))
                })
                .collect()
        };
        let floor = 1e-13 * len;
        let mut levels = Vec::new();
        let mut hi_d = width;
        loop {
            levels.push(Level { ring: sample(0.25 * hi_d, hi_d), cap: sample(0.0, hi_d) });
            if 0.25 * hi_d <= floor {
                break;
            }
            hi_d *= 0.25;
        }
        let e = -self.beta(k) - 1.0;
        let far_sum = |r: f64| far.iter().map(|&(d, wv)| wv * (d + r).powf(e)).sum::<f64>();
        let d_min = far.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let far_table = if far.is_empty() || r_max <= 0.0 {
            None
        } else {
            let mut panels = vec![(0.0, d_min.min(r_max))];
            while panels.last().unwrap().1 < r_max {
                let a = panels.last().unwrap().1;
                panels.push((a, (2.0 * a).min(r_max)));
            }
            Some(PanelTable::build(panels, r_max, ORDER, |r, _| far_sum(r)))
        };
        History { far, far_table, width, last, levels, floor }
    }

    /// R_k(r); needs windows 0..k complete and w_k.
    fn forcing(&self, k: usize, r: f64, h: &History) -> Result<f64> {
        let b = self.beta(k);
        if b == 1.0 {
            return Ok(0.0);
        }
        let e = -b - 1.0;
        let mut acc = match &h.far_table {
            Some(t) if r <= t.panels.last().unwrap().1 => t.eval(r),
            _ => h.far.iter().map(|&(d, wv)| wv * (d + r).powf(e)).sum(),
        };
        if r >= h.width {
            for &(d, wv) in &h.last {
                acc += wv * (d + r).powf(e);
            }
        } else {
            let stop = r.max(h.floor);
            let mut hi_d = h.width;
            for lv in &h.levels {
                if 0.25 * hi_d <= stop || std::ptr::eq(lv, h.levels.last().unwrap()) {
                    for &(d, wv) in &lv.cap {
                        acc += wv * (d + r).powf(e);
                    }
                    break;
                }
                for &(d, wv) in &lv.ring {
                    acc += wv * (d + r).powf(e);
                }
                hi_d *= 0.25;
            }
        }
        let t = self.sched.times[k] + r;
        let wk = self.windows[k].w;
        let i = t.powf(-b) * (wk - 1.0) - b * acc;
        let out = -rgamma(1.0 - b) * i;
        if !out.is_finite() {
            return Err(Error::Quadrature { k, t, lambda: self.lambda });
        }
        Ok(out)
    }

    fn build_forcing(&mut self, k: usize, r_len: f64) -> Result<()> {
        let win = &self.windows[k];
        if win.r_table.is_some() && win.r_len >= r_len {
            return Ok(());
        }
        if k == 0 || self.beta(k) == 1.0 || r_len <= 0.0 {
            self.windows[k].r_len = r_len;
            return Ok(());
        }
        let panels = graded_breaks(r_len, true, false, 0.25, r_len * 1e-12, r_len);
        let rule = gauss_legendre(R_ORDER);
        let nodes = crate::quad::panel_nodes(&panels, r_len, rule);
        let mut values = Vec::with_capacity(nodes.len());
        let h = self.history(k, r_len);
        for nd in &nodes {
            values.push(self.forcing(k, nd.from_lo, &h)?);
        }
        let win = &mut self.windows[k];
        win.r_table = Some(PanelTable::from_values(panels, r_len, R_ORDER, values));
        win.r_len = r_len;
        Ok(())
    }

    /// Completes windows 0..k (y tables on the full width) and sets w_k.
    pub fn complete_through(&mut self, k: usize) -> Result<()> {
        while self.windows.len() <= k {
            let j = self.windows.len() - 1;
            let len = self.sched.width(j);
            self.build_forcing(j, len)?;
            let panels = graded_breaks(len, true, false, 0.25, len * 1e-10, len);
            let nodes = crate::quad::panel_nodes(&panels, len, gauss_legendre(ORDER));
            let values: Vec<f64> = nodes.iter().map(|nd| self.local(j, nd.from_lo).value).collect();
            let tab = PanelTable::from_values(panels, len, ORDER, values);
            let w_next = self.local(j, len).value;
            let win = &mut self.windows[j];
            win.w_end = w_next + tab.eval_offset(tab.panel_of(len), len, w_next);
            win.y_table = Some(tab);
            if !w_next.is_finite() {
                return Err(Error::Quadrature { k: j, t: self.sched.times[j + 1], lambda: self.lambda });
            }
            self.windows.push(Window { w: w_next, r_len: 0.0, r_table: None, y_table: None, w_end: f64::NAN });
        }
        Ok(())
    }

    /// Symbol values at arbitrary times t ≥ 0.
    pub fn evaluate(&mut self, times: &[f64]) -> Result<Vec<SymbolValue>> {
        if let Some(&t) = times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(Error::TimeRange { t, lo: 0.0, hi: f64::INFINITY });
        }
        let Some(t_max) = times.iter().cloned().reduce(f64::max) else {
            return Ok(vec![]);
        };
        let k_max = self.sched.mode_of(t_max);
        self.complete_through(k_max)?;
        for k in 1..=k_max {
            let need = times
                .iter()
                .filter(|&&t| self.sched.mode_of(t) == k)
                .map(|&t| t - self.sched.times[k])
                .fold(0.0, f64::max);
            if need > 0.0 {
                self.build_forcing(k, need)?;
            }
        }
        times
            .iter()
            .map(|&t| {
                let k = self.sched.mode_of(t);
                let v = self.local(k, t - self.sched.times[k]);
                if v.value.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Quadrature { k, t, lambda: self.lambda })
                }
            })
            .collect()
    }
}

/// Symbols for every (time, λ) pair, computed in parallel over λ.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolTable {
    pub times: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// `entries[i][l]` for time i and λ index l.
    pub entries: Vec<Vec<SymbolValue>>,
}

impl SymbolTable {
    pub fn build(of: &OrderFunction, lh: &LHParams, lambdas: &[f64], times: &[f64]) -> Result<Self> {
        let sched = closed_form_schedule(of, lh)?;
        let ml = ml_tables(&sched)?;
        let cols: Vec<Result<Vec<SymbolValue>>> = lambdas
            .par_iter()
            .map(|&l| ModeSymbols::new(&sched, &ml, l)?.evaluate(times))
            .collect();
        let mut entries = vec![Vec::with_capacity(lambdas.len()); times.len()];
        for c in cols {
            for (i, v) in c?.into_iter().enumerate() {
                entries[i].push(v);
            }
        }
        Ok(SymbolTable { times: times.to_vec(), lambdas: lambdas.to_vec(), entries })
    }

    pub fn value(&self, i: usize, l: usize) -> f64 {
        self.entries[i][l].value
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.entries[i].iter().map(|v| v.value).collect()
    }
}

/// Tail control for synthesized densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailPolicy {
    /// Largest accepted |Û| on the outermost frequency shell.
    pub tolerance: f64,
}

impl Default for TailPolicy {
    fn default() -> Self {
        TailPolicy { tolerance: 1e-3 }
    }
}

pub(crate) fn check_field(f: &SpectralField, tail: &TailPolicy) -> Result<()> {
    let edge = f.edge_symbol();
    if edge > tail.tolerance {
        return Err(Error::Invalid(format!(
            "symbol tail {edge:.3e} at t = {} exceeds {:.1e}; widen the frequency grid (more points or smaller x_halfwidth)",
            f.time, tail.tolerance
        )));
    }
    if f.imag_residue > 1e-10 {
        return Err(Error::Invalid(format!("imaginary residue {:.3e} after inversion", f.imag_residue)));
    }
    Ok(())
}

/// Closed-form densities at several times (ν = 0 only).
pub fn fundamental_solutions(
    spec: &SymbolSpec,
    of: &OrderFunction,
    lh: &LHParams,
    grid: &Grid,
    times: &[f64],
    tail: &TailPolicy,
) -> Result<Vec<SpectralField>> {
    let (lams, index) = grid.symbol_values(spec)?;
    let table = SymbolTable::build(of, lh, &lams, times)?;
    times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let sym = index.iter().map(|&l| table.value(i, l)).collect();
            let f = SpectralField::synthesize(*grid, t, Provenance::Spectral, sym)?;
            check_field(&f, tail)?;
            Ok(f)
        })
        .collect()
}

/// Density at one time; ν ≠ 0 goes through the hybrid solver.
pub fn fundamental_solution(spec: &SymbolSpec, of: &OrderFunction, lh: &LHParams, grid: &Grid, t: f64) -> Result<SpectralField> {
    if lh.nu() != 0.0 {
        let h = crate::hybrid::HybridOptions::default();
        return Ok(crate::hybrid::field_hybrid(spec, of, lh, grid, &[t], &h)?.remove(0));
    }
    Ok(fundamental_solutions(spec, of, lh, grid, &[t], &TailPolicy::default())?.remove(0))
}

/// t* = min{T_1/μ, T_1/(μ+ν)}: before it the kernel only sees β_0.
pub fn reduce_early_window(of: &OrderFunction, lh: &LHParams) -> Result<f64> {
    let (mu, nu) = (lh.mu(), lh.nu());
    if mu == 0.0 && nu == 0.0 {
        return Err(Error::DegenerateOperator);
    }
    let Some(&t1) = of.breakpoints().first() else {
        return Ok(f64::INFINITY);
    };
    let q = |d: f64| if d > 0.0 { t1 / d } else { f64::INFINITY };
    Ok(q(mu).min(q(mu + nu)))
}

/// Constant-order continuation after the last mode change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatePlan {
    /// T* = max{T_N/μ, T_N/(μ+ν)}.
    pub t_star: f64,
    /// β_N, the only order the kernel sees after T*.
    pub order: f64,
}

pub fn reduce_late_window(of: &OrderFunction, lh: &LHParams) -> Result<LatePlan> {
    let (mu, nu) = (lh.mu(), lh.nu());
    if mu == 0.0 && nu == 0.0 {
        return Err(Error::DegenerateOperator);
    }
    let order = of.last();
    let Some(&tn) = of.breakpoints().last() else {
        return Ok(LatePlan { t_star: 0.0, order });
    };
    if mu == 0.0 || mu + nu == 0.0 {
        return Err(Error::LongMemory { mu, nu });
    }
    Ok(LatePlan { t_star: (tn / mu).max(tn / (mu + nu)), order })
}
