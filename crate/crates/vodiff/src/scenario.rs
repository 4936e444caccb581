//! JSON scenarios, the run pipeline and its CSV/report artifacts.

use crate::analysis::{
    density_check, msd_compute, msd_largetime_exponent, msd_smalltime_check, MsdMethod, EXPONENT_TOL,
    MSD_METHOD_TOL,
};
use crate::error::{Error, Result};
use crate::field::{Grid, SpectralField, SymbolSpec};
use crate::hybrid::{field_hybrid, hybrid_symbols, HybridOptions};
use crate::modes::{classify_memory, LHParams, MemoryReport, OrderFunction};
use crate::oracle::field_oracle;
use crate::spectral::{fundamental_solutions, reduce_early_window, reduce_late_window, TailPolicy};
use crate::voops::QuadratureSpec;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Spectral,
    Oracle,
    Hybrid,
    Both,
}

impl std::str::FromStr for Solver {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Solver::Spectral),
            "oracle" => Ok(Solver::Oracle),
            "hybrid" => Ok(Solver::Hybrid),
            "both" => Ok(Solver::Both),
            _ => Err(Error::Scenario(format!("solver: unknown value {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeSpec {
    List(Vec<f64>),
    Range { t_start: f64, t_end: f64, count: usize, spacing: Spacing },
}

impl TimeSpec {
    pub fn resolve(&self) -> Result<Vec<f64>> {
        let ts = match self {
            TimeSpec::List(v) => v.clone(),
            TimeSpec::Range { t_start, t_end, count, spacing } => {
                if *count < 2 || !(t_start > &0.0 && t_end > t_start) {
                    return Err(Error::Scenario("times: need count >= 2 and 0 < t_start < t_end".into()));
                }
                (0..*count)
                    .map(|i| {
                        let s = i as f64 / (*count - 1) as f64;
                        match spacing {
                            Spacing::Linear => t_start + (t_end - t_start) * s,
                            Spacing::Log => t_start * (t_end / t_start).powf(s),
                        }
                    })
                    .collect()
            }
        };
        if ts.is_empty() {
            return Err(Error::Scenario("times: at least one time is required".into()));
        }
        if ts.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Scenario("times: every time must be positive and finite".into()));
        }
        if ts.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Scenario("times: must increase strictly".into()));
        }
        Ok(ts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quadrature {
    pub base_step: f64,
    pub grading_exponent: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        let q = QuadratureSpec::default();
        Quadrature { base_step: q.base_step, grading_exponent: q.grading_exponent }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Largest accepted |Û| on the outer frequency shell.
    pub tail: f64,
    /// Spectral vs oracle, per frequency.
    pub symbol_discrepancy: f64,
    /// Spectral vs oracle, sup norm of U.
    pub field_discrepancy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { tail: TailPolicy::default().tolerance, symbol_discrepancy: 5e-3, field_discrepancy: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub lh: LHParams,
    pub of: OrderFunction,
    pub symbol: SymbolSpec,
    pub grid: Grid,
    pub times: TimeSpec,
    pub solver: Solver,
    #[serde(default)]
    pub quadrature: Quadrature,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Option<String>,
}

fn field_err(field: &str, e: Error) -> Error {
    Error::Scenario(format!("{field}: {e}"))
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Scenario(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Scenario("name: must be non-empty without path separators".into()));
        }
        if self.lh.mu() == 0.0 && self.lh.nu() == 0.0 {
            return Err(field_err("lh", Error::DegenerateOperator));
        }
        self.symbol.validate().map_err(|e| field_err("symbol", e))?;
        self.grid.validate().map_err(|e| field_err("grid", e))?;
        if self.symbol.dimension() != self.grid.dimension {
            return Err(Error::Scenario(format!(
                "grid.dimension: {} differs from the symbol dimension {}",
                self.grid.dimension,
                self.symbol.dimension()
            )));
        }
        self.times.resolve()?;
        self.quadrature_spec(0)?;
        let t = &self.tolerances;
        if !(t.tail > 0.0 && t.symbol_discrepancy > 0.0 && t.field_discrepancy > 0.0) {
            return Err(Error::Scenario("tolerances: all entries must be positive".into()));
        }
        Ok(())
    }

    pub fn quadrature_spec(&self, refine: u32) -> Result<QuadratureSpec> {
        QuadratureSpec::new(self.quadrature.base_step / 2f64.powi(refine as i32), self.quadrature.grading_exponent)
            .map_err(|e| field_err("quadrature", e))
    }

    /// Rejects closed-form runs outside the windows where they apply.
    pub fn check_solver(&self, solver: Solver, times: &[f64]) -> Result<()> {
        if !matches!(solver, Solver::Spectral | Solver::Both) || self.lh.nu() == 0.0 {
            return Ok(());
        }
        let t_early = reduce_early_window(&self.of, &self.lh)?;
        let Some(&t) = times.iter().find(|&&t| t >= t_early) else {
            return Ok(());
        };
        if let Err(Error::LongMemory { mu, nu }) = reduce_late_window(&self.of, &self.lh) {
            return Err(Error::Scenario(format!(
                "solver: no closed form at t = {t}: long memory (mu = {mu}, nu = {nu}, min(mu, mu + nu) = 0), the superseded order stays in the kernel for all t >= {t_early}; use the hybrid or oracle solver"
            )));
        }
        Err(Error::Scenario(format!(
            "solver: closed form needs nu = 0 once t >= t* = {t_early} (t = {t}, nu = {}); use the hybrid solver",
            self.lh.nu()
        )))
    }
}

/// Shortest round-trip representation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub scenario: String,
    pub out_dir: PathBuf,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario: {}", self.scenario);
        for c in &self.checks {
            let _ = writeln!(s, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        for n in &self.notes {
            let _ = writeln!(s, "NOTE {n}");
        }
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        let _ = writeln!(s, "result: {} ({} checks, {failed} failed)", if failed == 0 { "PASS" } else { "FAIL" }, self.checks.len());
        s
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub solver: Option<Solver>,
    pub refine: u32,
}

pub fn memory_report_csv(rep: &MemoryReport) -> String {
    let mut s = String::from("index,time,class,t_low,t_high\n");
    for c in &rep.changes {
        let _ = writeln!(s, "{},{},{},{},{}", c.index, fmt_f64(c.time), c.class.as_str(), fmt_f64(c.t_low), fmt_f64(c.t_high));
    }
    s
}

fn out_dir(sc: &Scenario, opts: &RunOptions) -> PathBuf {
    opts.out_dir
        .clone()
        .or_else(|| sc.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&sc.name))
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    fs::write(dir.join(name), body).map_err(|e| Error::Io(format!("{}: {e}", dir.join(name).display())))
}

/// Writes memory_report.csv only.
pub fn classify(sc: &Scenario, opts: &RunOptions) -> Result<PathBuf> {
    let dir = out_dir(sc, opts);
    fs::create_dir_all(&dir)?;
    let rep = classify_memory(&sc.of, &sc.lh)?;
    write(&dir, "memory_report.csv", &memory_report_csv(&rep))?;
    Ok(dir)
}

fn coords_header(dim: usize, axis: &str) -> String {
    if dim == 1 {
        axis.to_string()
    } else {
        format!("{axis}1,{axis}2")
    }
}

type Column<'a> = (&'a str, &'a [f64]);

fn table_csv(grid: &Grid, axis: &str, cols: &[Column], coord: impl Fn(usize) -> Vec<f64>) -> String {
    let mut s = coords_header(grid.dimension, axis);
    for (name, _) in cols {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for i in 0..grid.len() {
        let c: Vec<String> = coord(i).into_iter().map(fmt_f64).collect();
        s.push_str(&c.join(","));
        for (_, v) in cols {
            s.push(',');
            s.push_str(&fmt_f64(v[i]));
        }
        s.push('\n');
    }
    s
}

fn time_tag(t: f64) -> String {
    fmt_f64(t)
}

/// Runs a scenario, writing all artifacts; the summary lists every check.
pub fn run(sc: &Scenario, opts: &RunOptions) -> Result<RunSummary> {
    let solver = opts.solver.unwrap_or(sc.solver);
    let times = sc.times.resolve()?;
    sc.check_solver(solver, &times)?;
    let dir = out_dir(sc, opts);
    fs::create_dir_all(&dir)?;
    let rep = classify_memory(&sc.of, &sc.lh)?;
    write(&dir, "memory_report.csv", &memory_report_csv(&rep))?;

    let q = sc.quadrature_spec(opts.refine)?;
    let tail = TailPolicy { tolerance: sc.tolerances.tail };
    let hopts = HybridOptions { step: q, tail };
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let spectral = |times: &[f64]| -> Result<Vec<SpectralField>> {
        if sc.lh.nu() == 0.0 {
            fundamental_solutions(&sc.symbol, &sc.of, &sc.lh, &sc.grid, times, &tail)
        } else {
            let (lams, index) = sc.grid.symbol_values(&sc.symbol)?;
            let sol = hybrid_symbols(&lams, &sc.of, &sc.lh, times, &hopts)?;
            times
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let sym = index.iter().map(|&k| sol.values[i][k]).collect();
                    SpectralField::synthesize(sc.grid, t, crate::field::Provenance::Spectral, sym)
                })
                .collect()
        }
    };
    let (primary, secondary) = match solver {
        Solver::Spectral => (spectral(&times)?, None),
        Solver::Oracle => (field_oracle(&sc.symbol, &sc.of, &sc.lh, &sc.grid, &times, &q)?, None),
        Solver::Hybrid => (field_hybrid(&sc.symbol, &sc.of, &sc.lh, &sc.grid, &times, &hopts)?, None),
        Solver::Both => (
            spectral(&times)?,
            Some(field_oracle(&sc.symbol, &sc.of, &sc.lh, &sc.grid, &times, &q)?),
        ),
    };

    for (i, f) in primary.iter().enumerate() {
        let tag = time_tag(f.time);
        let g = &f.grid;
        let (field_cols, sym_cols): (Vec<Column>, Vec<Column>) = match &secondary {
            None => (vec![("U", &f.density)], vec![("U_hat", &f.symbol)]),
            Some(o) => (
                vec![("U", &f.density), ("U_oracle", &o[i].density)],
                vec![("U_hat", &f.symbol), ("U_hat_oracle", &o[i].symbol)],
            ),
        };
        write(&dir, &format!("field_t{tag}.csv"), &table_csv(g, "x", &field_cols, |k| g.x_vec(k)))?;
        write(&dir, &format!("symbol_t{tag}.csv"), &table_csv(g, "xi", &sym_cols, |k| g.xi_vec(k)))?;
    }

    let all_fields = primary.iter().map(|f| ("", f)).chain(secondary.iter().flatten().map(|f| (" (oracle)", f)));
    for (label, f) in all_fields {
        let d = density_check(f);
        checks.push(Check {
            name: format!("density t={}{label}", fmt_f64(f.time)),
            pass: d.passes(),
            detail: format!(
                "U_hat(0)-1 = {:.3e}, min/max = {:.3e}, mass-1 = {:.3e}, symmetry = {:.3e}",
                d.symbol_at_origin - 1.0,
                d.min / d.max,
                d.mass - 1.0,
                d.symmetry_defect
            ),
        });
    }

    if let Some(o) = &secondary {
        let mut ds: f64 = 0.0;
        let mut df: f64 = 0.0;
        for (a, b) in primary.iter().zip(o) {
            ds = ds.max(a.symbol.iter().zip(&b.symbol).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
            df = df.max(a.density.iter().zip(&b.density).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
        }
        checks.push(Check {
            name: "spectral vs oracle symbol".into(),
            pass: ds <= sc.tolerances.symbol_discrepancy,
            detail: format!("max discrepancy {ds:.3e} (tolerance {:.1e})", sc.tolerances.symbol_discrepancy),
        });
        checks.push(Check {
            name: "spectral vs oracle field".into(),
            pass: df <= sc.tolerances.field_discrepancy,
            detail: format!("sup-norm discrepancy {df:.3e} (tolerance {:.1e})", sc.tolerances.field_discrepancy),
        });
    }

    match sc.symbol.trace_neg() {
        None => notes.push("symbol has no finite second moment; MSD skipped".into()),
        Some(_) => msd_section(sc, &primary, &dir, &mut checks, &mut notes)?,
    }

    let summary = RunSummary { scenario: sc.name.clone(), out_dir: dir.clone(), checks, notes };
    write(&dir, "report.txt", &summary.report())?;
    Ok(summary)
}

fn msd_section(sc: &Scenario, fields: &[SpectralField], dir: &Path, checks: &mut Vec<Check>, notes: &mut Vec<String>) -> Result<()> {
    let grid = msd_compute(fields, MsdMethod::GridMoment)?;
    let spec = msd_compute(fields, MsdMethod::SpectralLaplacian)?;
    let small = msd_smalltime_check(&spec, &sc.of, &sc.lh, &sc.symbol)?;
    let mut s = String::from("t,msd_grid,msd_spectral,small_time_reference,small_time_checked,small_time_pass,truncated\n");
    for (i, t) in grid.times.iter().enumerate() {
        let row = &small.rows[i];
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            fmt_f64(*t),
            fmt_f64(grid.values[i]),
            fmt_f64(spec.values[i]),
            fmt_f64(row.reference),
            row.checked,
            !row.checked || row.rel_dev <= crate::analysis::SMALL_TIME_TOL,
            grid.truncated[i]
        );
    }
    write(dir, "msd.csv", &s)?;

    let clean: Vec<usize> = (0..grid.times.len()).filter(|&i| !grid.truncated[i]).collect();
    if clean.len() < grid.times.len() {
        notes.push(format!(
            "{} of {} times have boundary density above 1e-10 of the peak; grid moments there are truncated",
            grid.times.len() - clean.len(),
            grid.times.len()
        ));
    }
    if !clean.is_empty() {
        let gap = clean
            .iter()
            .map(|&i| (grid.values[i] - spec.values[i]).abs() / spec.values[i].abs())
            .fold(0.0, f64::max);
        checks.push(Check {
            name: "msd methods agree".into(),
            pass: gap <= MSD_METHOD_TOL,
            detail: format!("max relative gap {gap:.3e} over {} untruncated times", clean.len()),
        });
    }
    let mono = spec.values.windows(2).all(|w| w[1] >= w[0]);
    checks.push(Check {
        name: "msd non-decreasing".into(),
        pass: mono,
        detail: "spectral-Laplacian MSD over the output times".into(),
    });
    if small.checked() > 0 {
        checks.push(Check {
            name: "small-time msd law".into(),
            pass: small.passes(),
            detail: format!(
                "max relative deviation {:.3e} over {} times in (0, 0.9 t*), t* = {}",
                small.max_deviation(),
                small.checked(),
                fmt_f64(small.t_early)
            ),
        });
    }
    if let Ok(plan) = reduce_late_window(&sc.of, &sc.lh) {
        let lo = 10.0 * plan.t_star;
        let idx: Vec<usize> = (0..spec.times.len()).filter(|&i| spec.times[i] >= lo * (1.0 - 1e-12)).collect();
        if idx.len() >= 3 && spec.times[idx[idx.len() - 1]] >= 10.0 * spec.times[idx[0]] * (1.0 - 1e-12) {
            let sub = crate::analysis::MsdSeries {
                method: spec.method,
                times: idx.iter().map(|&i| spec.times[i]).collect(),
                values: idx.iter().map(|&i| spec.values[i]).collect(),
                truncated: idx.iter().map(|&i| spec.truncated[i]).collect(),
            };
            let slope = msd_largetime_exponent(&sub)?;
            checks.push(Check {
                name: "large-time msd exponent".into(),
                pass: (slope - plan.order).abs() <= EXPONENT_TOL,
                detail: format!("slope {slope:.4} vs beta_N = {} over t >= {}", fmt_f64(plan.order), fmt_f64(lo)),
            });
        }
    }
    Ok(())
}
