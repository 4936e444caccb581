//! Symbols A(ξ), uniform space/frequency grids and FFT synthesis of
//! densities from solution symbols.

use crate::error::{Error, Result};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A(ξ) = ½ ξᵀAξ (negative definite A) or A(ξ) = −|ξ|^α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SymbolSpec {
    QuadraticForm { matrix: Vec<Vec<f64>> },
    Riesz { alpha: f64, dimension: usize },
}

impl SymbolSpec {
    /// A(ξ) = −|ξ|² in one dimension.
    pub fn laplacian_1d() -> Self {
        SymbolSpec::QuadraticForm { matrix: vec![vec![-2.0]] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SymbolSpec::QuadraticForm { matrix } => {
                let n = matrix.len();
                if !(n == 1 || n == 2) || matrix.iter().any(|r| r.len() != n) {
                    return Err(Error::Invalid("quadratic form needs a 1x1 or 2x2 matrix".into()));
                }
                if matrix.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::Invalid("quadratic form entries must be finite".into()));
                }
                if n == 1 {
                    if !(matrix[0][0] < 0.0) {
                        return Err(Error::Invalid("quadratic form must be negative definite".into()));
                    }
                } else {
                    if matrix[0][1] != matrix[1][0] {
                        return Err(Error::Invalid("quadratic form matrix must be symmetric".into()));
                    }
                    let tr = matrix[0][0] + matrix[1][1];
                    let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
                    if !(tr < 0.0 && det > 0.0) {
                        return Err(Error::Invalid("quadratic form must be negative definite".into()));
                    }
                }
                Ok(())
            }
            SymbolSpec::Riesz { alpha, dimension } => {
                if !(*alpha > 0.0 && *alpha <= 2.0) {
                    return Err(Error::Invalid(format!("Riesz exponent {alpha} outside (0, 2]")));
                }
                if !(*dimension == 1 || *dimension == 2) {
                    return Err(Error::Invalid(format!("dimension {dimension} not in {{1, 2}}")));
                }
                Ok(())
            }
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            SymbolSpec::QuadraticForm { matrix } => matrix.len(),
            SymbolSpec::Riesz { dimension, .. } => *dimension,
        }
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        match self {
            SymbolSpec::QuadraticForm { matrix } => {
                let mut s = 0.0;
                for (i, row) in matrix.iter().enumerate() {
                    for (j, a) in row.iter().enumerate() {
                        s += a * xi[i] * xi[j];
                    }
                }
                0.5 * s
            }
            SymbolSpec::Riesz { alpha, .. } => {
                let r2: f64 = xi.iter().map(|x| x * x).sum();
                -r2.powf(0.5 * alpha)
            }
        }
    }

    /// Tr(−A) for quadratic forms; the Riesz family has no second moment
    /// unless α = 2.
    pub fn trace_neg(&self) -> Option<f64> {
        match self {
            SymbolSpec::QuadraticForm { matrix } => Some(-(0..matrix.len()).map(|i| matrix[i][i]).sum::<f64>()),
            SymbolSpec::Riesz { alpha, dimension } if *alpha == 2.0 => Some(2.0 * *dimension as f64),
            SymbolSpec::Riesz { .. } => None,
        }
    }
}

/// n points per axis on [−h, h), dx = 2h/n, dξ = π/h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dimension: usize,
    pub points: usize,
    pub x_halfwidth: f64,
}

impl Grid {
    pub fn new(dimension: usize, points: usize, x_halfwidth: f64) -> Result<Self> {
        let g = Grid { dimension, points, x_halfwidth };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dimension == 1 || self.dimension == 2) {
            return Err(Error::Invalid(format!("grid dimension {} not in {{1, 2}}", self.dimension)));
        }
        if self.points < 8 || !self.points.is_power_of_two() {
            return Err(Error::Invalid(format!("grid points {} must be a power of two >= 8", self.points)));
        }
        if !(self.x_halfwidth > 0.0 && self.x_halfwidth.is_finite()) {
            return Err(Error::Invalid(format!("x_halfwidth {} must be positive", self.x_halfwidth)));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.x_halfwidth / self.points as f64
    }

    pub fn dxi(&self) -> f64 {
        PI / self.x_halfwidth
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of centred index m on one axis.
    pub fn x(&self, m: usize) -> f64 {
        (m as f64 - (self.points / 2) as f64) * self.dx()
    }

    pub fn xi(&self, j: usize) -> f64 {
        (j as f64 - (self.points / 2) as f64) * self.dxi()
    }

    /// Frequency vector of flat centred index (row-major).
    pub fn xi_vec(&self, idx: usize) -> Vec<f64> {
        if self.dimension == 1 {
            vec![self.xi(idx)]
        } else {
            vec![self.xi(idx / self.points), self.xi(idx % self.points)]
        }
    }

    pub fn x_vec(&self, idx: usize) -> Vec<f64> {
        if self.dimension == 1 {
            vec![self.x(idx)]
        } else {
            vec![self.x(idx / self.points), self.x(idx % self.points)]
        }
    }

    /// Flat index of the origin.
    pub fn origin(&self) -> usize {
        let c = self.points / 2;
        if self.dimension == 1 {
            c
        } else {
            c * self.points + c
        }
    }

    /// Distinct symbol values over the grid and, per grid point, the index
    /// into that list.
    pub fn symbol_values(&self, spec: &SymbolSpec) -> Result<(Vec<f64>, Vec<usize>)> {
        spec.validate()?;
        if spec.dimension() != self.dimension {
            return Err(Error::Invalid(format!(
                "symbol dimension {} differs from grid dimension {}",
                spec.dimension(),
                self.dimension
            )));
        }
        let vals: Vec<f64> = (0..self.len()).map(|i| spec.eval(&self.xi_vec(i))).collect();
        let mut uniq = vals.clone();
        uniq.sort_by(|a, b| b.total_cmp(a));
        uniq.dedup();
        let index = vals
            .iter()
            .map(|v| uniq.binary_search_by(|u| v.total_cmp(u)).expect("value present"))
            .collect();
        Ok((uniq, index))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Spectral,
    Oracle,
    Hybrid,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Spectral => "spectral",
            Provenance::Oracle => "oracle",
            Provenance::Hybrid => "hybrid",
        }
    }
}

/// Û(t, ξ) and U(t, x) on a grid, centred row-major ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: Grid,
    pub time: f64,
    pub provenance: Provenance,
    pub symbol: Vec<f64>,
    pub density: Vec<f64>,
    /// Largest |imaginary part| left by the inverse transform.
    pub imag_residue: f64,
}

impl SpectralField {
    /// Inverse DFT of the symbol: U(x_m) = L^{−d} Σ_j Û(ξ_j) e^{iξ_j·x_m}.
    pub fn synthesize(grid: Grid, time: f64, provenance: Provenance, symbol: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if symbol.len() != grid.len() {
            return Err(Error::Invalid("symbol length does not match grid".into()));
        }
        if let Some(v) = symbol.iter().find(|v| !v.is_finite()) {
            return Err(Error::NotFinite(*v));
        }
        let n = grid.points;
        let h = n / 2;
        let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); grid.len()];
        let shift = |j: usize| (j + h) % n;
        if grid.dimension == 1 {
            for j in 0..n {
                buf[shift(j)] = Complex::new(symbol[j], 0.0);
            }
        } else {
            // The −n/2 lines have no +n/2 partner; pair them with their mirror.
            for a in 0..n {
                for b in 0..n {
                    let mut v = symbol[a * n + b];
                    if a == 0 || b == 0 {
                        v = 0.5 * (v + symbol[((n - a) % n) * n + (n - b) % n]);
                    }
                    buf[shift(a) * n + shift(b)] = Complex::new(v, 0.0);
                }
            }
        }
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_inverse(n);
        if grid.dimension == 1 {
            fft.process(&mut buf);
        } else {
            for row in buf.chunks_mut(n) {
                fft.process(row);
            }
            let mut col = vec![Complex::new(0.0, 0.0); n];
            for b in 0..n {
                for a in 0..n {
                    col[a] = buf[a * n + b];
                }
                fft.process(&mut col);
                for a in 0..n {
                    buf[a * n + b] = col[a];
                }
            }
        }
        let scale = (2.0 * grid.x_halfwidth).powi(grid.dimension as i32).recip();
        let mut density = vec![0.0; grid.len()];
        let mut imag: f64 = 0.0;
        if grid.dimension == 1 {
            for m in 0..n {
                let c = buf[shift(m)];
                density[m] = c.re * scale;
                imag = imag.max((c.im * scale).abs());
            }
        } else {
            for a in 0..n {
                for b in 0..n {
                    let c = buf[shift(a) * n + shift(b)];
                    density[a * n + b] = c.re * scale;
                    imag = imag.max((c.im * scale).abs());
                }
            }
        }
        Ok(SpectralField { grid, time, provenance, symbol, density, imag_residue: imag })
    }

    /// Largest |Û| on the outermost frequency shell.
    pub fn edge_symbol(&self) -> f64 {
        let n = self.grid.points;
        if self.grid.dimension == 1 {
            self.symbol[0].abs().max(self.symbol[n - 1].abs())
        } else {
            let mut m: f64 = 0.0;
            for a in 0..n {
                for b in 0..n {
                    if a == 0 || b == 0 || a == n - 1 || b == n - 1 {
                        m = m.max(self.symbol[a * n + b].abs());
                    }
                }
            }
            m
        }
    }
}
