//! Synthesis of stationary anisotropic Gaussian fields with squared-exponential
//! covariance `r(t) = σ² exp(−½ tᵀ M t)`, `M = P₋θ₀ Diag(a², a⁻²) P_θ₀`.
//!
//! Fields are drawn by circulant embedding: the covariance is sampled on a
//! torus `pad_factor` times larger than the requested grid, its 2D DFT gives
//! the eigenvalues of the embedding, and the real part of the DFT of
//! eigenvalue-scaled complex white noise is cropped to the requested size.
//! For the covariances and grid spacings of interest the embedding is
//! nonnegative up to rounding; tiny negative eigenvalues are set to zero.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use nalgebra::Matrix2;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FieldGrid;
use crate::rng::{stream_rng, Stream};

/// Simulation parameters. The principal direction is defined modulo π.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// Side length `T` of the observation window.
    pub domain_size: f64,
    /// Anisotropy scale; `κ² = 1 − a⁻⁴` for `a ≥ 1`.
    pub a: f64,
    pub theta0: f64,
    pub mean: f64,
    pub std: f64,
    pub seed: u64,
    pub pad_factor: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            grid_rows: 512,
            grid_cols: 512,
            domain_size: 100.0,
            a: 1.0,
            theta0: 0.0,
            mean: 0.0,
            std: 1.0,
            seed: 0,
            pad_factor: 2,
        }
    }
}

impl SimConfig {
    /// Default configuration with the anisotropy scale chosen so the model κ equals `kappa`.
    pub fn with_kappa(kappa: f64, theta0: f64) -> Result<Self> {
        Ok(Self { a: a_from_kappa(kappa)?, theta0, ..Self::default() })
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_rows < 8 || self.grid_cols < 8 {
            return Err(Error::DegenerateGrid { rows: self.grid_rows, cols: self.grid_cols, min: 8 });
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::invalid(format!("anisotropy scale a must be > 0, got {}", self.a)));
        }
        if !(self.domain_size > 0.0 && self.domain_size.is_finite()) {
            return Err(Error::invalid(format!("domain size must be > 0, got {}", self.domain_size)));
        }
        if !(self.std > 0.0 && self.std.is_finite()) {
            return Err(Error::invalid(format!("std must be > 0, got {}", self.std)));
        }
        if !self.mean.is_finite() || !self.theta0.is_finite() {
            return Err(Error::invalid("mean and theta0 must be finite"));
        }
        if self.pad_factor < 1 {
            return Err(Error::invalid("pad factor must be >= 1"));
        }
        let padded = |n: usize| n.checked_mul(self.pad_factor);
        match (padded(self.grid_rows), padded(self.grid_cols)) {
            (Some(r), Some(c)) if r.checked_mul(c).is_some_and(|n| n <= 1 << 31) => Ok(()),
            _ => Err(Error::invalid("padded grid dimensions overflow")),
        }
    }

    /// Grid spacing `T/(cols − 1)`, used for both axes.
    pub fn spacing(&self) -> f64 {
        self.domain_size / (self.grid_cols - 1) as f64
    }

    /// The quadratic form `M` (so that `Var X'(0) = σ² M`).
    pub fn metric(&self) -> Matrix2<f64> {
        rotated_diag(self.a * self.a, 1.0 / (self.a * self.a), self.theta0)
    }
}

/// `a = (1 − κ²)^{−1/4}`.
pub fn a_from_kappa(kappa: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&kappa) {
        return Err(Error::domain(format!("kappa must lie in [0, 1), got {kappa}")));
    }
    Ok((1.0 - kappa * kappa).powf(-0.25))
}

/// `P₋θ Diag(l1, l2) P_θ` with `P_θ = [[cos θ, sin θ], [−sin θ, cos θ]]`;
/// the eigenvector of `l1` points at angle θ.
pub fn rotated_diag(l1: f64, l2: f64, theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(l1 * c * c + l2 * s * s, (l1 - l2) * c * s, (l1 - l2) * c * s, l1 * s * s + l2 * c * c)
}

/// Exact model quantities of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTruth {
    pub kappa: f64,
    /// Direction of the leading eigenvector of Λ, in `(−π/2, π/2]`.
    pub theta0: f64,
    /// `Λ = Var X'(0)`, row-major.
    pub lambda: [[f64; 2]; 2],
}

/// κ, principal direction and Λ for `config`. For `a < 1` the roles of the
/// axes swap, so κ = √(1 − a⁴) and the direction turns by π/2.
pub fn model_truth(config: &SimConfig) -> ModelTruth {
    let (kappa, theta) = if config.a >= 1.0 {
        ((1.0 - config.a.powi(-4)).sqrt(), config.theta0)
    } else {
        ((1.0 - config.a.powi(4)).sqrt(), config.theta0 + FRAC_PI_2)
    };
    let m = config.metric() * (config.std * config.std);
    ModelTruth { kappa, theta0: reduce_direction(theta), lambda: [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]] }
}

/// Reduces an angle modulo π to `(−π/2, π/2]`.
pub fn reduce_direction(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(PI);
    if t > FRAC_PI_2 {
        t -= PI;
    }
    t
}

/// Reusable simulator: the embedding spectrum depends only on the
/// configuration (not the seed) and is computed once.
pub struct FieldSimulator {
    config: SimConfig,
    prows: usize,
    pcols: usize,
    /// `sqrt(λ_k / (P Q))` on the padded torus.
    amplitude: Vec<f64>,
    row_fft: Arc<dyn Fft<f64>>,
    col_fft: Arc<dyn Fft<f64>>,
    /// Number of negative embedding eigenvalues set to zero, and the most negative ratio λ/λ_max.
    pub clipped: (usize, f64),
}

impl std::fmt::Debug for FieldSimulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldSimulator")
            .field("config", &self.config)
            .field("padded", &(self.prows, self.pcols))
            .field("clipped", &self.clipped)
            .finish()
    }
}

impl FieldSimulator {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let prows = config.grid_rows * config.pad_factor;
        let pcols = config.grid_cols * config.pad_factor;
        let h = config.spacing();
        let m = config.metric();
        let var = config.std * config.std;
        let lag = |k: usize, n: usize| if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };

        let mut planner = FftPlanner::new();
        let row_fft = planner.plan_fft_forward(pcols);
        let col_fft = planner.plan_fft_forward(prows);

        let mut spectrum: Vec<Complex64> = Vec::with_capacity(prows * pcols);
        for p in 0..prows {
            let ty = lag(p, prows) * h;
            for q in 0..pcols {
                let tx = lag(q, pcols) * h;
                let form = m[(0, 0)] * tx * tx + 2.0 * m[(0, 1)] * tx * ty + m[(1, 1)] * ty * ty;
                spectrum.push(Complex64::new(var * (-0.5 * form).exp(), 0.0));
            }
        }
        fft2(&mut spectrum, prows, pcols, &*row_fft, &*col_fft);

        let lmax = spectrum.iter().map(|z| z.re).fold(0.0, f64::max);
        let norm = (prows * pcols) as f64;
        let mut clipped = (0usize, 0.0f64);
        let amplitude = spectrum
            .iter()
            .map(|z| {
                if z.re < 0.0 {
                    clipped.0 += 1;
                    clipped.1 = clipped.1.min(z.re / lmax);
                    0.0
                } else {
                    (z.re / norm).sqrt()
                }
            })
            .collect();
        Ok(Self { config: config.clone(), prows, pcols, amplitude, row_fft, col_fft, clipped })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Realisation for the configured seed.
    pub fn simulate(&self) -> FieldGrid {
        self.simulate_seed(self.config.seed)
    }

    /// Realisation for `seed`, all other parameters as configured.
    pub fn simulate_seed(&self, seed: u64) -> FieldGrid {
        let mut rng = stream_rng(seed, Stream::Simulation);
        let mut buf: Vec<Complex64> = self
            .amplitude
            .iter()
            .map(|&amp| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(amp * re, amp * im)
            })
            .collect();
        fft2(&mut buf, self.prows, self.pcols, &*self.row_fft, &*self.col_fft);
        let (rows, cols) = (self.config.grid_rows, self.config.grid_cols);
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            values.extend(buf[i * self.pcols..i * self.pcols + cols].iter().map(|z| z.re + self.config.mean));
        }
        let h = self.config.spacing();
        FieldGrid::new(rows, cols, values, h, h).expect("simulator output is finite and well formed")
    }
}

/// One realisation of `config`.
pub fn simulate(config: &SimConfig) -> Result<FieldGrid> {
    Ok(FieldSimulator::new(config)?.simulate())
}

/// In-place forward 2D DFT of a row-major `rows × cols` buffer.
fn fft2(data: &mut [Complex64], rows: usize, cols: usize, row_fft: &dyn Fft<f64>, col_fft: &dyn Fft<f64>) {
    row_fft.process(data);
    let mut t = transpose(data, rows, cols);
    col_fft.process(&mut t);
    let back = transpose(&t, cols, rows);
    data.copy_from_slice(&back);
}

fn transpose(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    const B: usize = 32;
    for ib in (0..rows).step_by(B) {
        for jb in (0..cols).step_by(B) {
            for i in ib..(ib + B).min(rows) {
                for j in jb..(jb + B).min(cols) {
                    out[j * rows + i] = data[i * cols + j];
                }
            }
        }
    }
    out
}
