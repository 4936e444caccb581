//! Checks on synthesized densities and mean square displacement laws.

use crate::error::{Error, Result};
use crate::field::{SpectralField, SymbolSpec};
use crate::mlf::rgamma;
use crate::modes::{LHParams, OrderFunction};
use crate::spectral::reduce_early_window;
use serde::{Deserialize, Serialize};

pub const SYMBOL_ORIGIN_TOL: f64 = 1e-9;
pub const NEGATIVITY_TOL: f64 = 1e-6;
pub const MASS_TOL: f64 = 1e-6;
pub const SYMMETRY_TOL: f64 = 1e-10;
pub const MSD_METHOD_TOL: f64 = 0.01;
pub const SMALL_TIME_TOL: f64 = 0.02;
pub const SMALL_TIME_FRACTION: f64 = 0.9;
pub const EXPONENT_TOL: f64 = 0.05;
pub const BOUNDARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityReport {
    pub time: f64,
    pub symbol_at_origin: f64,
    pub min: f64,
    pub max: f64,
    pub mass: f64,
    /// max |U(x) − U(−x)| / max U.
    pub symmetry_defect: f64,
}

impl DensityReport {
    pub fn origin_ok(&self) -> bool {
        (self.symbol_at_origin - 1.0).abs() <= SYMBOL_ORIGIN_TOL
    }

    pub fn positivity_ok(&self) -> bool {
        self.min >= -NEGATIVITY_TOL * self.max
    }

    pub fn mass_ok(&self) -> bool {
        (self.mass - 1.0).abs() <= MASS_TOL
    }

    pub fn symmetry_ok(&self) -> bool {
        self.symmetry_defect <= SYMMETRY_TOL
    }

    pub fn passes(&self) -> bool {
        self.origin_ok() && self.positivity_ok() && self.mass_ok() && self.symmetry_ok()
    }
}

fn mirror(n: usize, m: usize) -> Option<usize> {
    if m == 0 {
        None
    } else {
        Some(n - m)
    }
}

pub fn density_check(f: &SpectralField) -> DensityReport {
    let g = &f.grid;
    let n = g.points;
    let u = &f.density;
    let max = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = u.iter().cloned().fold(f64::INFINITY, f64::min);
    let mass = u.iter().sum::<f64>() * g.dx().powi(g.dimension as i32);
    let mut sym: f64 = 0.0;
    for idx in 0..u.len() {
        let partner = if g.dimension == 1 {
            mirror(n, idx)
        } else {
            match (mirror(n, idx / n), mirror(n, idx % n)) {
                (Some(a), Some(b)) => Some(a * n + b),
                _ => None,
            }
        };
        if let Some(p) = partner {
            sym = sym.max((u[idx] - u[p]).abs());
        }
    }
    DensityReport {
        time: f.time,
        symbol_at_origin: f.symbol[g.origin()],
        min,
        max,
        mass,
        symmetry_defect: sym / max,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MsdMethod {
    GridMoment,
    SpectralLaplacian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsdSeries {
    pub method: MsdMethod,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Per time: density on the outer x shell above `BOUNDARY_TOL · max`.
    pub truncated: Vec<bool>,
}

fn boundary_ratio(f: &SpectralField) -> f64 {
    let g = &f.grid;
    let n = g.points;
    let max = f.density.iter().cloned().fold(0.0, f64::max);
    let mut edge: f64 = 0.0;
    for (idx, v) in f.density.iter().enumerate() {
        let on_edge = if g.dimension == 1 {
            idx == 0 || idx == n - 1
        } else {
            let (a, b) = (idx / n, idx % n);
            a == 0 || b == 0 || a == n - 1 || b == n - 1
        };
        if on_edge {
            edge = edge.max(v.abs());
        }
    }
    edge / max
}

/// −Σ_i ∂²Û/∂ξ_i² at ξ = 0 by fourth-order central differences.
fn spectral_laplacian(f: &SpectralField) -> f64 {
    let g = &f.grid;
    let n = g.points as isize;
    let c = (g.points / 2) as isize;
    let h = g.dxi();
    let at = |a: isize, b: isize| -> f64 {
        if g.dimension == 1 {
            f.symbol[(c + a) as usize]
        } else {
            f.symbol[((c + a) * n + (c + b)) as usize]
        }
    };
    let second = |s: &dyn Fn(isize) -> f64| (-s(2) + 16.0 * s(1) - 30.0 * s(0) + 16.0 * s(-1) - s(-2)) / (12.0 * h * h);
    let mut lap = second(&|k| at(k, 0));
    if g.dimension == 2 {
        lap += second(&|k| at(0, k));
    }
    -lap
}

fn grid_moment(f: &SpectralField) -> f64 {
    let g = &f.grid;
    let vol = g.dx().powi(g.dimension as i32);
    f.density
        .iter()
        .enumerate()
        .map(|(idx, u)| g.x_vec(idx).iter().map(|x| x * x).sum::<f64>() * u)
        .sum::<f64>()
        * vol
}

pub fn msd_compute(fields: &[SpectralField], method: MsdMethod) -> Result<MsdSeries> {
    if fields.windows(2).any(|w| !(w[1].time > w[0].time)) {
        return Err(Error::Invalid("MSD times must increase strictly".into()));
    }
    let values = fields
        .iter()
        .map(|f| match method {
            MsdMethod::GridMoment => grid_moment(f),
            MsdMethod::SpectralLaplacian => spectral_laplacian(f),
        })
        .collect();
    Ok(MsdSeries {
        method,
        times: fields.iter().map(|f| f.time).collect(),
        values,
        truncated: fields.iter().map(|f| boundary_ratio(f) > BOUNDARY_TOL).collect(),
    })
}

/// Largest relative gap between two series on the same times.
pub fn msd_agreement(a: &MsdSeries, b: &MsdSeries) -> Result<f64> {
    if a.times != b.times {
        return Err(Error::Invalid("MSD series sampled at different times".into()));
    }
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs() / y.abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallTimeRow {
    pub time: f64,
    pub msd: f64,
    pub reference: f64,
    pub rel_dev: f64,
    /// Inside (0, 0.9·t*), where the law is checked.
    pub checked: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallTimeReport {
    pub t_early: f64,
    pub rows: Vec<SmallTimeRow>,
}

impl SmallTimeReport {
    pub fn checked(&self) -> usize {
        self.rows.iter().filter(|r| r.checked).count()
    }

    pub fn max_deviation(&self) -> f64 {
        self.rows.iter().filter(|r| r.checked).map(|r| r.rel_dev).fold(0.0, f64::max)
    }

    pub fn passes(&self) -> bool {
        self.rows.iter().filter(|r| r.checked).all(|r| r.rel_dev <= SMALL_TIME_TOL)
    }
}

/// Tr(−A) t^{β₀}/Γ(β₀+1).
pub fn small_time_law(of: &OrderFunction, spec: &SymbolSpec, t: f64) -> Result<f64> {
    let tr = spec
        .trace_neg()
        .ok_or_else(|| Error::Invalid("symbol has no finite second moment".into()))?;
    let b = of.values()[0];
    Ok(tr * t.powf(b) * rgamma(b + 1.0))
}

pub fn msd_smalltime_check(series: &MsdSeries, of: &OrderFunction, lh: &LHParams, spec: &SymbolSpec) -> Result<SmallTimeReport> {
    let t_early = reduce_early_window(of, lh)?;
    let rows = series
        .times
        .iter()
        .zip(&series.values)
        .map(|(&t, &m)| {
            let reference = small_time_law(of, spec, t)?;
            Ok(SmallTimeRow {
                time: t,
                msd: m,
                reference,
                rel_dev: (m - reference).abs() / reference,
                checked: t > 0.0 && t < SMALL_TIME_FRACTION * t_early,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SmallTimeReport { t_early, rows })
}

/// Least-squares slope of log MSD against log t over the last decade.
pub fn msd_largetime_exponent(series: &MsdSeries) -> Result<f64> {
    let t_last = *series.times.last().ok_or_else(|| Error::Invalid("empty MSD series".into()))?;
    let lo = t_last / 10.0 * (1.0 - 1e-12);
    if series.times[0] > t_last / 10.0 * (1.0 + 1e-12) {
        return Err(Error::Invalid(format!(
            "MSD series covers [{}, {t_last}], less than one decade",
            series.times[0]
        )));
    }
    let pts: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.values)
        .filter(|(t, _)| **t >= lo)
        .map(|(t, m)| (t.ln(), m.ln()))
        .collect();
    if pts.len() < 3 || pts.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::Invalid("need at least three positive samples in the last decade".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
