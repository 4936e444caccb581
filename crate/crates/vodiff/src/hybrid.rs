//! Solver for arbitrary (μ, ν): closed form before t*, implicit stepping on
//! [t*, T*], and after T* the constant-β_N problem based at T* with the
//! completed history acting as a source.

use crate::error::{Error, Result};
use crate::field::{Grid, Provenance, SpectralField, SymbolSpec};
use crate::mlf::MlTable;
use crate::modes::{LHParams, OrderFunction};
use crate::oracle::{oracle_mesh, step_batch, BatchSolution, Seed};
use crate::quad::{gauss_legendre, graded_breaks, integrate_graded, panel_nodes, PanelTable};
use crate::spectral::{check_field, reduce_early_window, reduce_late_window, TailPolicy};
use crate::voops::{l1_moment, QuadratureSpec};
use rayon::prelude::*;

const TABLE_ORDER: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HybridOptions {
    pub step: QuadratureSpec,
    pub tail: TailPolicy,
}

/// Symbols `[time][λ]` plus the stepped history on [0, T*] (if any).
#[derive(Debug, Clone, PartialEq)]
pub struct HybridSolution {
    pub t_early: f64,
    pub t_late: f64,
    pub values: Vec<Vec<f64>>,
    pub history: Option<BatchSolution>,
}

pub fn hybrid_symbols(
    lambdas: &[f64],
    of: &OrderFunction,
    lh: &LHParams,
    times: &[f64],
    opts: &HybridOptions,
) -> Result<HybridSolution> {
    if let Some(&t) = times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(Error::TimeRange { t, lo: 0.0, hi: f64::INFINITY });
    }
    let t_early = reduce_early_window(of, lh)?;
    let t_late = match reduce_late_window(of, lh) {
        Ok(p) => p.t_star,
        Err(Error::LongMemory { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let b0 = of.values()[0];
    let ml0 = MlTable::new(b0)?;
    let early = |t: f64, l: usize| ml0.e(-lambdas[l] * t.powf(b0));
    let mut values = vec![vec![0.0; lambdas.len()]; times.len()];
    let mut stepped: Vec<f64> = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        if t < t_early {
            for (l, v) in values[i].iter_mut().enumerate() {
                *v = early(t, l);
            }
        } else {
            stepped.push(t);
        }
    }
    if stepped.is_empty() {
        return Ok(HybridSolution { t_early, t_late, values, history: None });
    }
    let mut nodes: Vec<f64> = stepped.iter().cloned().filter(|&t| t <= t_late).collect();
    if t_late.is_finite() && stepped.iter().any(|&t| t > t_late) {
        nodes.push(t_late);
    }
    let t_end = nodes.iter().cloned().fold(0.0, f64::max);
    let mesh = oracle_mesh(of, lh, &opts.step, t_end, &nodes)?;
    let seed = Seed { until: t_early, value: &early };
    let hist = step_batch(lambdas, of, lh, &mesh, 1.0, None, Some(&seed))?;
    let late_times: Vec<f64> = stepped.iter().cloned().filter(|&t| t > t_late).collect();
    let late = if late_times.is_empty() {
        vec![]
    } else {
        late_continuation(lambdas, of.last(), t_late, &hist, &late_times)?
    };
    let mut li = 0;
    for (i, &t) in times.iter().enumerate() {
        if t < t_early {
            continue;
        }
        if t <= t_late {
            let n = hist.node_of(t).expect("output time is a mesh node");
            values[i].copy_from_slice(&hist.rows[n]);
        } else {
            values[i].copy_from_slice(&late[li]);
            li += 1;
        }
    }
    Ok(HybridSolution { t_early, t_late, values, history: Some(hist) })
}

/// y(t) = E_β((t−T*)^β λ) y(T*) + ∫_{T*}^t G(t−s) f*(s) ds, where f* is
/// minus the history's contribution to the β-kernel derivative.
fn late_continuation(lambdas: &[f64], beta: f64, t_late: f64, hist: &BatchSolution, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n_t = hist.node_of(t_late).expect("T* is a mesh node");
    let mesh = &hist.mesh[..=n_t];
    let ml = MlTable::new(beta)?;
    let r_max = times.iter().cloned().fold(0.0, f64::max) - t_late;
    let panels = graded_breaks(r_max, true, false, 0.25, 1e-12 * r_max, r_max);
    let nodes = panel_nodes(&panels, r_max, gauss_legendre(TABLE_ORDER));
    // History moments at the table nodes; the same for every λ.
    let moments: Vec<Vec<f64>> = nodes
        .par_iter()
        .map(|nd| {
            (0..n_t)
                .map(|j| l1_moment((t_late - mesh[j]) + nd.from_lo, (t_late - mesh[j + 1]) + nd.from_lo, beta))
                .collect()
        })
        .collect();
    let cols: Vec<Vec<f64>> = (0..lambdas.len())
        .into_par_iter()
        .map(|l| {
            let lam = lambdas[l];
            let yt = hist.rows[n_t][l];
            let slopes: Vec<f64> = (0..n_t)
                .map(|j| (hist.rows[j + 1][l] - hist.rows[j][l]) / (mesh[j + 1] - mesh[j]))
                .collect();
            let values = moments.iter().map(|m| -m.iter().zip(&slopes).map(|(a, b)| a * b).sum::<f64>()).collect();
            let table = PanelTable::from_values(panels.clone(), r_max, TABLE_ORDER, values);
            let fstar = |rs: f64| table.eval(rs);
            times
                .iter()
                .map(|&t| {
                    let r = t - t_late;
                    let hom = yt * ml.e(-lam * r.powf(beta));
                    if beta == 1.0 || lam == 0.0 {
                        return hom;
                    }
                    let v_len = r.powf(beta);
                    let min_w = (1e-9 * v_len).min(0.05 / lam.abs());
                    hom + integrate_graded(v_len, true, true, min_w, 16, |v, dv| {
                        let rs = r * -((-dv / v_len).ln_1p() / beta).exp_m1();
                        ml.de(-lam * v) * fstar(rs)
                    })
                })
                .collect()
        })
        .collect();
    let mut out = vec![vec![0.0; lambdas.len()]; times.len()];
    for (l, c) in cols.into_iter().enumerate() {
        for (i, v) in c.into_iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Quadrature { k: 0, t: times[i], lambda: lambdas[l] });
            }
            out[i][l] = v;
        }
    }
    Ok(out)
}

/// Hybrid densities at the requested times.
pub fn field_hybrid(
    spec: &SymbolSpec,
    of: &OrderFunction,
    lh: &LHParams,
    grid: &Grid,
    times: &[f64],
    opts: &HybridOptions,
) -> Result<Vec<SpectralField>> {
    let (lams, index) = grid.symbol_values(spec)?;
    let sol = hybrid_symbols(&lams, of, lh, times, opts)?;
    times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let sym = index.iter().map(|&k| sol.values[i][k]).collect();
            let f = SpectralField::synthesize(*grid, t, Provenance::Hybrid, sym)?;
            check_field(&f, &opts.tail)?;
            Ok(f)
        })
        .collect()
}
