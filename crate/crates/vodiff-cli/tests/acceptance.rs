//! Acceptance criteria 1–10, one PASS/FAIL line each.

use rand::rngs::ChaCha8Rng;
use rand::{RngExt, SeedableRng};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};
use vodiff::analysis::{density_check, msd_compute, msd_largetime_exponent, msd_smalltime_check, DensityReport, MsdMethod};
use vodiff::field::{Grid, SpectralField, SymbolSpec};
use vodiff::hybrid::{field_hybrid, hybrid_symbols, HybridOptions};
use vodiff::mlf::{mlf_asymptotic_check, mlf_eval};
use vodiff::modes::{classify_memory, order_at, LHParams, MemoryClass, OrderFunction};
use vodiff::oracle::{field_oracle, oracle_mesh, step_batch};
use vodiff::spectral::{fundamental_solutions, SymbolTable, TailPolicy};
use vodiff::voops::{lemma_bound, rl_deriv, vo_caputo, vo_integral, vo_integral_power, QuadratureSpec, SampledFunction};

// Pinned tolerances.
const ML_UNIT_REL: f64 = 1e-12;
const ML_ERFC_REL: f64 = 1e-10;
const ML_DD_TOL: f64 = 1e-9;
const ML_ASYM_TOL: f64 = 0.02;
const QUAD_ABS: f64 = 1e-6;
const QUAD_ORDER_SLACK: f64 = 0.2;
const COLLAPSE_TOL: f64 = 1e-9;
const SYMBOL_GAP_TOL: f64 = 5e-3;
const FIELD_GAP_TOL: f64 = 1e-3;
const EARLY_WINDOW_TOL: f64 = 1e-6;
const RESIDUAL_FACTOR: f64 = 2.0;
const TIME_TOL: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn laplacian() -> SymbolSpec {
    SymbolSpec::laplacian_1d()
}

fn two_mode(b0: f64, b1: f64) -> OrderFunction {
    OrderFunction::new(vec![1.0], vec![b0, b1]).unwrap()
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Default)]
struct Densities {
    checked: usize,
    failures: Vec<String>,
}

impl Densities {
    fn record(&mut self, label: &str, fields: &[SpectralField]) {
        for f in fields {
            let r: DensityReport = density_check(f);
            self.checked += 1;
            if !r.passes() {
                self.failures.push(format!("{label} t={}: {r:?}", f.time));
            }
        }
    }
}

fn c1() -> Outcome {
    let mut worst_unit: f64 = 0.0;
    for i in 0..=600 {
        let z = -30.0 + 0.1 * i as f64;
        let e = z.exp();
        worst_unit = worst_unit.max((mlf_eval(1.0, z).unwrap() - e).abs() / e);
    }
    let erfc_ref = std::f64::consts::E * libm::erfc(1.0);
    let erfc_rel = (mlf_eval(0.5, -1.0).unwrap() - erfc_ref).abs() / erfc_ref;
    let mut dd_bad = 0;
    for b in [0.3, 0.5, 0.8] {
        let ts: Vec<f64> = (0..400).map(|i| 0.01 * 1e4f64.powf(i as f64 / 399.0)).collect();
        let es: Vec<f64> = ts.iter().map(|&t| mlf_eval(b, -t).unwrap()).collect();
        let d1: Vec<f64> = (0..ts.len() - 1).map(|i| (es[i + 1] - es[i]) / (ts[i + 1] - ts[i])).collect();
        dd_bad += d1.iter().filter(|&&d| d > ML_DD_TOL).count();
        for i in 0..d1.len() - 1 {
            let d2 = (d1[i + 1] - d1[i]) / (ts[i + 2] - ts[i]);
            if d2 < -ML_DD_TOL {
                dd_bad += 1;
            }
        }
    }
    let a1 = (mlf_asymptotic_check(0.5, 1e4).unwrap() - 1.0).abs();
    let a2 = (mlf_asymptotic_check(0.9, 1e6).unwrap() - 1.0).abs();
    let pass = worst_unit <= ML_UNIT_REL && erfc_rel <= ML_ERFC_REL && dd_bad == 0 && a1 <= ML_ASYM_TOL && a2 <= ML_ASYM_TOL;
    outcome(
        pass,
        format!(
            "E_1 vs exp {worst_unit:.1e}, E_1/2(-1) vs erfc {erfc_rel:.1e}, divided-difference violations {dd_bad}, asymptotic product {a1:.1e} (0.5, 1e4) / {a2:.1e} (0.9, 1e6)"
        ),
    )
}

fn random_lh(rng: &mut ChaCha8Rng) -> LHParams {
    match rng.random_range(0..10) {
        0 => LHParams::new(0.0, rng.random_range(0.05..1.0)).unwrap(),
        1 => {
            let mu = rng.random_range(0.05..1.0);
            LHParams::new(mu, -mu).unwrap()
        }
        2 => LHParams::new(rng.random_range(0.05..1.0), 0.0).unwrap(),
        3 => LHParams::caputo(),
        _ => loop {
            let mu = rng.random_range(0.0..1.0);
            let nu = rng.random_range(-1.0..1.0);
            if let Ok(lh) = LHParams::new(mu, nu) {
                if mu + nu.abs() > 1e-3 {
                    break lh;
                }
            }
        },
    }
}

/// Orders seen along τ ∈ (0, t) for the kernel at time t.
fn sampled_orders(of: &OrderFunction, lh: &LHParams, t: f64, rng: &mut ChaCha8Rng) -> (bool, bool) {
    let (b0, b1) = (of.values()[0], of.values()[1]);
    let (mut old, mut new) = (false, false);
    for i in 0..2000 {
        let tau = if i < 1000 { t * (i as f64 + 0.5) / 1000.0 } else { t * rng.random_range(0.0..1.0) };
        let b = order_at(of, lh.argument(t, tau)).unwrap();
        old |= b == b0;
        new |= b == b1;
    }
    (old, new)
}

fn c2() -> Outcome {
    let mut mismatches = Vec::new();
    let close = |a: f64, b: f64, t: f64| (a - b).abs() <= TIME_TOL * t;
    let examples = [
        (1.0, 0.5, 0.25, MemoryClass::Short, 4.0 / 3.0, 2.0),
        (1.0, 0.0, 1.0, MemoryClass::Long, 1.0, f64::INFINITY),
        (5.0, 1.0, 0.0, MemoryClass::None, 5.0, 5.0),
        (1.0, 0.8, -0.3, MemoryClass::Short, 1.25, 2.0),
    ];
    for (t, mu, nu, class, lo, hi) in examples {
        let r = classify_memory(&OrderFunction::new(vec![t], vec![0.8, 0.5]).unwrap(), &LHParams::new(mu, nu).unwrap()).unwrap();
        let c = r.changes[0];
        let hi_ok = if hi.is_finite() { close(c.t_high, hi, t) } else { c.t_high.is_infinite() };
        if c.class != class || !close(c.t_low, lo, t) || !hi_ok {
            mismatches.push(format!("example T={t} mu={mu} nu={nu}: {c:?}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    for draw in 0..1000 {
        let lh = random_lh(&mut rng);
        let t_cr = rng.random_range(0.1..10.0);
        let of = OrderFunction::new(vec![t_cr], vec![0.8, 0.5]).unwrap();
        let c = classify_memory(&of, &lh).unwrap().changes[0];
        let (mu, nu) = (lh.mu(), lh.nu());
        let hi = mu.max(mu + nu);
        let lo = mu.min(mu + nu);
        let want = if lo == 0.0 {
            MemoryClass::Long
        } else if nu == 0.0 && mu == 1.0 {
            MemoryClass::None
        } else {
            MemoryClass::Short
        };
        let mut bad = c.class != want || !close(c.t_low, t_cr / hi, t_cr);
        if lo > 0.0 {
            bad |= !close(c.t_high, t_cr / lo, t_cr);
        } else {
            bad |= c.t_high.is_finite();
        }
        let t_old = c.t_low * rng.random_range(0.05..0.95);
        bad |= sampled_orders(&of, &lh, t_old, &mut rng) != (true, false);
        if c.t_high > c.t_low {
            let top = c.t_high.min(1e3 * c.t_low);
            let t_mix = c.t_low + (top - c.t_low) * rng.random_range(0.05..0.95);
            bad |= sampled_orders(&of, &lh, t_mix, &mut rng) != (true, true);
        }
        if c.t_high.is_finite() {
            let t_new = c.t_high * rng.random_range(1.05..4.0);
            bad |= sampled_orders(&of, &lh, t_new, &mut rng) != (false, true);
        }
        if bad {
            mismatches.push(format!("draw {draw}: mu={mu} nu={nu} T={t_cr}: {c:?}"));
        }
    }
    let detail = format!("4 fixed examples + 1000 sampled draws, {} mismatches{}", mismatches.len(), mismatches.first().map(|m| format!(" (first: {m})")).unwrap_or_default());
    outcome(mismatches.is_empty(), detail)
}

fn caputo_square(of: &OrderFunction, lh: &LHParams, t: f64) -> f64 {
    // ∫ 2τ (t−τ)^{−β} dτ / Γ(1−β) piecewise, with u = t − τ.
    let prim = |u: f64, b: f64| 2.0 * (t * u.powf(1.0 - b) / (1.0 - b) - u.powf(2.0 - b) / (2.0 - b));
    let mut cuts = vec![0.0];
    cuts.extend(vodiff::modes::kernel_breakpoints(of, lh, t));
    cuts.push(t);
    cuts.windows(2)
        .map(|w| {
            let b = order_at(of, lh.argument(t, 0.5 * (w[0] + w[1]))).unwrap();
            (prim(t - w[0], b) - prim(t - w[1], b)) / libm::tgamma(1.0 - b)
        })
        .sum()
}

fn c3() -> Outcome {
    let q = QuadratureSpec::new(1e-3, 2.0).unwrap();
    let g = libm::tgamma;
    let cap = LHParams::caputo();
    let mixed = two_mode(0.8, 0.4);
    let lh55 = LHParams::new(0.5, 0.5).unwrap();
    let sample = |f: &dyn Fn(f64) -> f64, t_end: f64| SampledFunction::from_fn(f, t_end, &q, &[]).unwrap();
    let c = |b: f64| OrderFunction::constant(b).unwrap();
    let shifted = |f: &dyn Fn(f64) -> f64, t0: f64, t: f64| {
        let grid = q.mesh(t0, t, &[]);
        let v = grid.iter().map(|&s| f(s)).collect();
        SampledFunction::new(grid, v).unwrap()
    };
    let cases: Vec<(&str, f64, f64)> = vec![
        ("caputo const", vo_caputo(&sample(&|_| 3.0, 1.5), &mixed, &lh55, 1.5).unwrap(), 0.0),
        ("caputo identity", vo_caputo(&sample(&|s| s, 1.0), &c(0.5), &cap, 1.0).unwrap(), 1.0 / g(1.5)),
        (
            "caputo identity across a mode change",
            vo_caputo(&sample(&|s| s, 1.5), &mixed, &lh55, 1.5).unwrap(),
            (1.5f64.powf(0.2) - 1.0) / 0.2 / g(0.2) + 1.0 / 0.6 / g(0.6),
        ),
        ("integral of one", vo_integral(&sample(&|_| 1.0, 1.3), &c(0.6), &cap, 1.3).unwrap(), 1.3f64.powf(0.6) / g(1.6)),
        ("integral of one, unit order", vo_integral(&sample(&|_| 1.0, 1.3), &c(1.0), &cap, 1.3).unwrap(), 1.3),
        ("integral of identity", vo_integral(&sample(&|s| s, 1.0), &c(0.5), &cap, 1.0).unwrap(), 1.0 / g(2.5)),
        ("fourth power kernel", vo_integral_power(&sample(&|_| 1.0, 0.5), &c(0.5), &cap, 0.5, 4).unwrap(), 0.125),
        ("rl of constant", rl_deriv(&shifted(&|_| 2.0, 0.5, 1.5), 0.3, 0.5, 1.5).unwrap(), 2.0 / g(0.7)),
        ("rl of shifted identity", rl_deriv(&shifted(&|s| s - 0.5, 0.5, 1.5), 0.5, 0.5, 1.5).unwrap(), 1.0 / g(1.5)),
    ];
    let worst = cases.iter().map(|(_, v, e)| (v - e).abs()).fold(0.0, f64::max);
    let worst_name = cases.iter().max_by(|a, b| (a.1 - a.2).abs().total_cmp(&(b.1 - b.2).abs())).unwrap().0;

    // Refinement order on f(τ) = τ² with uniform data.
    let mut min_margin = f64::INFINITY;
    let mut orders = Vec::new();
    for (of, lh, t) in [(c(0.5), cap, 1.0), (mixed.clone(), lh55, 1.5), (c(0.9), cap, 2.0)] {
        let exact = caputo_square(&of, &lh, t);
        let errs: Vec<f64> = [0.02, 0.01, 0.005, 0.0025]
            .iter()
            .map(|&h| {
                let f = SampledFunction::from_fn(|s| s * s, t, &QuadratureSpec::new(h, 1.0).unwrap(), &[]).unwrap();
                (vo_caputo(&f, &of, &lh, t).unwrap() - exact).abs()
            })
            .collect();
        let need = 2.0 - of.max_order() - QUAD_ORDER_SLACK;
        for w in errs.windows(2) {
            let p = (w[0] / w[1]).log2();
            orders.push(p);
            min_margin = min_margin.min(p - need);
        }
    }

    // Power-integral bound in its proven regime kβ_* ≥ 2.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let draw_of = |rng: &mut ChaCha8Rng, lo: f64| {
        let n = rng.random_range(1..4usize);
        let mut bps: Vec<f64> = (1..n).map(|_| rng.random_range(0.05..2.0)).collect();
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        let vals = (0..=bps.len()).map(|_| rng.random_range(lo..=1.0)).collect();
        OrderFunction::new(bps, vals).unwrap()
    };
    let lemma_max = |of: &OrderFunction, lh: &LHParams, t_max: f64, k: u32| {
        let f = SampledFunction::new(vec![0.0, t_max], vec![1.0, 1.0]).unwrap();
        (1..=100).map(|i| vo_integral_power(&f, of, lh, t_max * i as f64 / 100.0, k).unwrap()).fold(0.0, f64::max)
    };
    let mut violations = 0;
    for _ in 0..100 {
        let k = rng.random_range(2..=6u32);
        let of = draw_of(&mut rng, 2.0 / k as f64);
        let lh = random_lh(&mut rng);
        let t_max = rng.random_range(0.05..=2.0);
        if lemma_max(&of, &lh, t_max, k) > lemma_bound(&of, t_max, k) * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    let mut outside = 0;
    for _ in 0..100 {
        let k = rng.random_range(1..=6u32);
        let of = draw_of(&mut rng, 0.05);
        let lh = random_lh(&mut rng);
        let t_max = rng.random_range(0.05..=2.0);
        if k as f64 * of.min_order() < 2.0 && lemma_max(&of, &lh, t_max, k) > lemma_bound(&of, t_max, k) * (1.0 + 1e-12) {
            outside += 1;
        }
    }
    let pass = worst <= QUAD_ABS && min_margin >= 0.0 && violations == 0;
    outcome(
        pass,
        format!(
            "closed forms max error {worst:.1e} ({worst_name}), observed orders {}, lemma violations {violations}/100 with k*beta_min >= 2 (note: {outside}/100 outside that regime)",
            orders.iter().map(|p| format!("{p:.2}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn c4() -> Outcome {
    let grid = Grid::new(1, 2048, 20.0).unwrap();
    let (lams, _) = grid.symbol_values(&laplacian()).unwrap();
    let times = [0.5, 1.5, 3.0];
    let mut worst: f64 = 0.0;
    for b in [0.3, 0.6, 1.0] {
        let of = OrderFunction::new(vec![1.0], vec![b, b]).unwrap();
        let tab = SymbolTable::build(&of, &LHParams::caputo(), &lams, &times).unwrap();
        for (i, t) in times.iter().enumerate() {
            for (l, lam) in lams.iter().enumerate() {
                worst = worst.max((tab.value(i, l) - mlf_eval(b, lam * t.powf(b)).unwrap()).abs());
            }
        }
    }
    outcome(worst <= COLLAPSE_TOL, format!("max |S - E_beta| = {worst:.2e} over {} frequencies x 3 times x 3 orders", lams.len()))
}

fn c5(dens: &mut Densities) -> Outcome {
    let grid = Grid::new(1, 4096, 40.0).unwrap();
    let of = two_mode(0.8, 0.5);
    let lh = LHParams::caputo();
    let times = [0.5, 1.5, 3.0];
    let spec = fundamental_solutions(&laplacian(), &of, &lh, &grid, &times, &TailPolicy::default()).unwrap();
    dens.record("equivalence spectral", &spec);
    let mut sym_gaps = Vec::new();
    let mut field_gap = f64::NAN;
    for h in [0.01, 0.005, 0.0025, 0.00125] {
        let o = field_oracle(&laplacian(), &of, &lh, &grid, &times, &QuadratureSpec::new(h, 2.0).unwrap()).unwrap();
        dens.record("equivalence oracle", &o);
        sym_gaps.push(spec.iter().zip(&o).map(|(a, b)| max_gap(&a.symbol, &b.symbol)).fold(0.0, f64::max));
        field_gap = spec.iter().zip(&o).map(|(a, b)| max_gap(&a.density, &b.density)).fold(0.0, f64::max);
    }
    let decreasing = sym_gaps.windows(2).all(|w| w[1] < w[0]);
    let last = *sym_gaps.last().unwrap();
    outcome(
        decreasing && last <= SYMBOL_GAP_TOL && field_gap <= FIELD_GAP_TOL,
        format!(
            "per-frequency gaps {} (steps 0.01 -> 0.00125), final field sup-norm gap {field_gap:.2e}",
            sym_gaps.iter().map(|g| format!("{g:.2e}")).collect::<Vec<_>>().join(" > ")
        ),
    )
}

fn c7(dens: &mut Densities) -> Outcome {
    let grid = Grid::new(1, 4096, 40.0).unwrap();
    let of = two_mode(0.8, 0.5);
    let q = QuadratureSpec::new(0.0025, 2.0).unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for (mu, nu) in [(1.0, 0.0), (0.5, 0.25), (0.8, -0.3)] {
        let lh = LHParams::new(mu, nu).unwrap();
        let t_early = 1.0 / mu.max(mu + nu);
        let times: Vec<f64> = [0.02, 0.05, 0.15, 0.3, 0.5, 0.7, 0.89, 1.6].iter().map(|f| f * t_early).collect();
        let fields = field_oracle(&laplacian(), &of, &lh, &grid, &times, &q).unwrap();
        dens.record("small-time oracle", &fields);
        let series = msd_compute(&fields, MsdMethod::SpectralLaplacian).unwrap();
        let rep = msd_smalltime_check(&series, &of, &lh, &laplacian()).unwrap();
        let beyond = rep.rows.last().unwrap().rel_dev;
        pass &= rep.passes() && rep.checked() >= 7;
        parts.push(format!(
            "(mu={mu}, nu={nu}) max dev {:.2e} over {} times, {:.1}% at 1.6 t*",
            rep.max_deviation(),
            rep.checked(),
            100.0 * beyond
        ));
    }
    outcome(pass, format!("oracle fields: {}", parts.join("; ")))
}

fn c8(dens: &mut Densities) -> Outcome {
    let grid = Grid::new(1, 4096, 400.0).unwrap();
    let q = QuadratureSpec::new(0.1, 2.0).unwrap();
    let times: Vec<f64> = (0..6).map(|i| 10.0 * 10f64.powf(i as f64 / 5.0)).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for (b0, b1) in [(0.9, 0.5), (0.4, 0.8)] {
        let of = two_mode(b0, b1);
        let fields = field_oracle(&laplacian(), &of, &LHParams::caputo(), &grid, &times, &q).unwrap();
        dens.record("large-time oracle", &fields);
        let slope = msd_largetime_exponent(&msd_compute(&fields, MsdMethod::SpectralLaplacian).unwrap()).unwrap();
        pass &= (slope - b1).abs() <= vodiff::analysis::EXPONENT_TOL;
        parts.push(format!("beta=[{b0},{b1}] slope {slope:.4}"));
    }
    outcome(pass, format!("{} over t in [10, 100] (T* = 1)", parts.join(", ")))
}

fn residuals(of: &OrderFunction, lh: &LHParams, lams: &[f64], h: f64) -> (f64, f64, f64) {
    let (t_late, beta_n) = (2.0, of.last());
    let tail: Vec<f64> = (1..=(4.0 / h).round() as usize).map(|i| t_late + i as f64 * h).collect();
    let q = QuadratureSpec::new(h, 2.0).unwrap();
    let sol = hybrid_symbols(lams, of, lh, &tail, &HybridOptions { step: q, ..Default::default() }).unwrap();
    let hist = sol.history.as_ref().unwrap();
    let n_t = hist.node_of(t_late).unwrap();
    let mut grid = hist.mesh[..=n_t].to_vec();
    grid.extend(&tail);
    let constant = OrderFunction::constant(beta_n).unwrap();
    let cap = LHParams::caputo();
    let (mut r_hyb, mut r_exact, mut kernel_gap): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (l, &lam) in lams.iter().enumerate() {
        let mut vals: Vec<f64> = (0..=n_t).map(|i| hist.rows[i][l]).collect();
        vals.extend((0..tail.len()).map(|i| sol.values[i][l]));
        let y = SampledFunction::new(grid.clone(), vals).unwrap();
        let ex_vals = grid.iter().map(|&t| mlf_eval(beta_n, lam * t.powf(beta_n)).unwrap()).collect();
        let ex = SampledFunction::new(grid.clone(), ex_vals).unwrap();
        for t in [2.5, 3.0, 4.0, 6.0] {
            let d = vo_caputo(&y, &constant, &cap, t).unwrap();
            kernel_gap = kernel_gap.max((d - vo_caputo(&y, of, lh, t).unwrap()).abs());
            r_hyb = r_hyb.max((d - lam * y.value_at(t)).abs());
            r_exact = r_exact.max((vo_caputo(&ex, &constant, &cap, t).unwrap() - lam * ex.value_at(t)).abs());
        }
    }
    (r_hyb, r_exact, kernel_gap)
}

fn c9(dens: &mut Densities) -> Outcome {
    let of = two_mode(0.8, 0.5);
    let lh = LHParams::new(0.5, 0.25).unwrap();
    let grid = Grid::new(1, 4096, 40.0).unwrap();
    let (lams, _) = grid.symbol_values(&laplacian()).unwrap();
    let early = [0.2, 0.6, 1.0, 1.3];
    let h = hybrid_symbols(&lams, &of, &lh, &early, &HybridOptions::default()).unwrap();
    let mut early_gap: f64 = 0.0;
    for (i, t) in early.iter().enumerate() {
        for (l, lam) in lams.iter().enumerate() {
            early_gap = early_gap.max((h.values[i][l] - mlf_eval(0.8, lam * t.powf(0.8)).unwrap()).abs());
        }
    }
    // The full operator, stepped without the closed-form seed.
    let q = QuadratureSpec::new(0.0025, 2.0).unwrap();
    let mesh = oracle_mesh(&of, &lh, &q, 1.3, &early).unwrap();
    let o = step_batch(&lams, &of, &lh, &mesh, 1.0, None, None).unwrap();
    let mut stepped_gap: f64 = 0.0;
    for (i, t) in early.iter().enumerate() {
        stepped_gap = stepped_gap.max(max_gap(&h.values[i], &o.rows[o.node_of(*t).unwrap()]));
    }

    let probe = [-0.5, -3.0, -10.0, lams[8], lams[64]];
    let (r1, _, _) = residuals(&of, &lh, &probe, 0.01);
    let (r2, e2, kgap) = residuals(&of, &lh, &probe, 0.005);
    let order = (r1 / r2).log2();
    let need = 2.0 - of.last() - QUAD_ORDER_SLACK;

    let fields = field_hybrid(&laplacian(), &of, &lh, &grid, &[0.6, 1.6, 3.0, 6.0], &HybridOptions::default()).unwrap();
    dens.record("window hybrid", &fields);

    let pass = early_gap <= EARLY_WINDOW_TOL
        && stepped_gap <= SYMBOL_GAP_TOL
        && r2 <= RESIDUAL_FACTOR * e2
        && order >= need
        && kgap <= 1e-12;
    outcome(
        pass,
        format!(
            "t<t*: hybrid vs E_0.8 {early_gap:.1e}, unseeded stepping {stepped_gap:.1e}; t>T*: beta_N residual {r2:.2e} vs scheme level {e2:.2e} (x{RESIDUAL_FACTOR}), residual order {order:.2} (need {need:.2}), operator reduction gap {kgap:.0e}"
        ),
    )
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn matrix() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(workspace_root().join("scenarios"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    v.sort();
    v
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = Vec::new();
    for sub in std::fs::read_dir(dir).unwrap() {
        let sub = sub.unwrap().path();
        for f in std::fs::read_dir(&sub).unwrap() {
            let f = f.unwrap().path();
            if f.extension().is_some_and(|e| e == "csv") {
                let name = f.strip_prefix(dir).unwrap().display().to_string();
                v.push((name, std::fs::read(&f).unwrap()));
            }
        }
    }
    v.sort();
    v
}

fn run_matrix(out: &Path) -> Vec<(String, bool, String)> {
    matrix()
        .iter()
        .map(|sc| {
            let name = sc.file_stem().unwrap().to_string_lossy().to_string();
            let o = Command::new(env!("CARGO_BIN_EXE_vodiff"))
                .arg("run")
                .arg(sc)
                .arg("--out")
                .arg(out.join(&name))
                .output()
                .unwrap();
            (name, o.status.success(), String::from_utf8_lossy(&o.stdout).to_string())
        })
        .collect()
}

fn c10(dens: &mut Densities) -> Outcome {
    let base = std::env::temp_dir().join(format!("vodiff-acceptance-{}", std::process::id()));
    let (a, b) = (base.join("a"), base.join("b"));
    let first = run_matrix(&a);
    let second = run_matrix(&b);
    let failed: Vec<&str> = first.iter().chain(&second).filter(|r| !r.1).map(|r| r.0.as_str()).collect();
    for (name, _, report) in &first {
        for line in report.lines().filter(|l| l.contains(" density t=")) {
            dens.checked += 1;
            if line.starts_with("FAIL") {
                dens.failures.push(format!("{name}: {line}"));
            }
        }
    }
    let (fa, fb) = (csv_files(&a), csv_files(&b));
    let identical = fa == fb && !fa.is_empty();
    let _ = std::fs::remove_dir_all(&base);
    outcome(
        identical && failed.is_empty(),
        format!(
            "{} scenarios, {} CSV files byte-identical: {identical}; failing runs: {}",
            first.len(),
            fa.len(),
            if failed.is_empty() { "none".to_string() } else { failed.join(", ") }
        ),
    )
}

fn guarded(f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
        outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
    });
    (o, start.elapsed())
}

fn main() {
    let mut dens = Densities::default();
    let budgets: [(u32, &str, Option<u64>); 10] = [
        (1, "Mittag-Leffler suite", Some(5)),
        (2, "memory classifier", Some(10)),
        (3, "quadrature suite", Some(60)),
        (4, "constant-order collapse", Some(30)),
        (5, "spectral-oracle equivalence", Some(600)),
        (6, "density properties", None),
        (7, "small-time MSD law", Some(300)),
        (8, "large-time MSD exponent", Some(600)),
        (9, "window reductions", Some(300)),
        (10, "CLI determinism", None),
    ];
    let mut results = vec![
        guarded(c1),
        guarded(c2),
        guarded(c3),
        guarded(c4),
        guarded(|| c5(&mut dens)),
        (outcome(true, String::new()), Duration::ZERO),
        guarded(|| c7(&mut dens)),
        guarded(|| c8(&mut dens)),
        guarded(|| c9(&mut dens)),
        guarded(|| c10(&mut dens)),
    ];
    results[5] = (
        outcome(
            dens.failures.is_empty() && dens.checked > 0,
            format!(
                "{} fields checked (U_hat(0) = 1 +- 1e-9, min >= -1e-6 max, mass 1 +- 1e-6), {} failures{}",
                dens.checked,
                dens.failures.len(),
                dens.failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
            ),
        ),
        Duration::ZERO,
    );
    let mut all = true;
    for ((id, name, budget), (o, took)) in budgets.iter().zip(&results) {
        let in_time = budget.is_none_or(|b| took.as_secs_f64() < b as f64);
        let pass = o.pass && in_time;
        all &= pass;
        let limit = budget.map(|b| format!(" / limit {b} s")).unwrap_or_default();
        println!(
            "C{id} {} {name}: {} [{:.1} s{limit}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64()
        );
    }
    if !all {
        std::process::exit(1);
    }
}
