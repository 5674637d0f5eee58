//! Contour integrals of the unit normal and the Palm densities of the normal.
//!
//! Along a level curve with normal angle Θ the summaries are
//! `|L| = ∫ ds`, `C = ∫ cos 2Θ ds`, `S = ∫ sin 2Θ ds` and the length-weighted
//! normal covariance `∫ N Nᵀ ds / |L|`. Under the Palm distribution of a
//! stationary Gaussian field with `Λ = Var X'(0)`, the normal has density
//! proportional to `(zᵀ Λ⁻¹ z)^{−(d+1)/2}` on the sphere; in the plane the
//! angle has density `C_κ (1 − κ² cos²(θ − θ₀))^{−3/2}`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::contour::ContourSet;
use crate::error::{Error, Result};
use crate::grid::Window;
use crate::quadrature::integrate_adaptive;
use crate::rng::{stream_rng, Stream};
use crate::sphere::SphereQuadrature;

/// Neumaier-compensated running sum; keeps sequential reductions reproducible
/// and accurate over millions of terms.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Contour integrals of one level set (or of a weighted sample of normals).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PalmSummary {
    pub total_length: f64,
    /// `∫ cos 2Θ ds` (zero when `d ≠ 2`).
    #[serde(rename = "C")]
    pub c: f64,
    /// `∫ sin 2Θ ds` (zero when `d ≠ 2`).
    #[serde(rename = "S")]
    pub s: f64,
    /// Length-weighted mean of `N Nᵀ`, row-major `d × d`.
    pub normal_cov: Vec<Vec<f64>>,
    pub n_points: usize,
}

impl PalmSummary {
    pub fn dim(&self) -> usize {
        self.normal_cov.len()
    }

    pub fn normal_cov_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.normal_cov[i][j])
    }

    /// `(C/|L|, S/|L|)`.
    pub fn normalized_cs(&self) -> (f64, f64) {
        (self.c / self.total_length, self.s / self.total_length)
    }
}

/// Integrals over a resampled planar contour set.
pub fn summarize(contours: &ContourSet) -> Result<PalmSummary> {
    let weights = contours.points.iter().map(|p| p.seg_length);
    let normals = contours.points.iter().map(|p| p.normal);
    summarize_planar(normals, weights)
}

fn summarize_planar(
    normals: impl Iterator<Item = [f64; 2]>,
    weights: impl Iterator<Item = f64>,
) -> Result<PalmSummary> {
    let (mut len, mut c, mut s) = (KahanSum::default(), KahanSum::default(), KahanSum::default());
    let (mut xx, mut xy, mut yy) = (KahanSum::default(), KahanSum::default(), KahanSum::default());
    let mut n = 0;
    for (nv, w) in normals.zip(weights) {
        // cos 2Θ and sin 2Θ from the unit normal, no trigonometry needed.
        let (nx, ny) = (nv[0], nv[1]);
        len.add(w);
        c.add(w * (nx * nx - ny * ny));
        s.add(w * 2.0 * nx * ny);
        xx.add(w * nx * nx);
        xy.add(w * nx * ny);
        yy.add(w * ny * ny);
        n += 1;
    }
    let total = len.value();
    if !(total > 0.0) {
        return Err(Error::Degenerate("contour set has zero total length".into()));
    }
    let cov = vec![vec![xx.value() / total, xy.value() / total], vec![xy.value() / total, yy.value() / total]];
    Ok(PalmSummary { total_length: total, c: c.value(), s: s.value(), normal_cov: cov, n_points: n })
}

/// Summary of an explicit sample of unit normals in any dimension, with
/// optional weights (unit weights by default).
pub fn summarize_normals(normals: &[Vec<f64>], weights: Option<&[f64]>) -> Result<PalmSummary> {
    let d = normals.first().map(Vec::len).ok_or_else(|| Error::Degenerate("no normals".into()))?;
    if d < 2 || normals.iter().any(|z| z.len() != d) {
        return Err(Error::invalid("normals must share a dimension >= 2"));
    }
    if let Some(w) = weights {
        if w.len() != normals.len() {
            return Err(Error::invalid("one weight per normal is required"));
        }
    }
    let weight = |k: usize| weights.map_or(1.0, |w| w[k]);
    if d == 2 {
        return summarize_planar(normals.iter().map(|z| [z[0], z[1]]), (0..normals.len()).map(weight));
    }
    let mut acc = vec![KahanSum::default(); d * d];
    let mut len = KahanSum::default();
    for (k, z) in normals.iter().enumerate() {
        let w = weight(k);
        len.add(w);
        for i in 0..d {
            for j in i..d {
                acc[i * d + j].add(w * z[i] * z[j]);
            }
        }
    }
    let total = len.value();
    if !(total > 0.0) {
        return Err(Error::Degenerate("normals carry zero total weight".into()));
    }
    let cov = (0..d).map(|i| (0..d).map(|j| acc[i.min(j) * d + i.max(j)].value() / total).collect()).collect();
    Ok(PalmSummary { total_length: total, c: 0.0, s: 0.0, normal_cov: cov, n_points: normals.len() })
}

/// Raw contour integrals of one block of the partition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CellStat {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub length: f64,
}

/// Raw integrals over an `N × N` partition of the window, row-major with
/// rows along the second coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub grid_n: usize,
    pub cells: Vec<CellStat>,
}

impl CellStats {
    pub fn cell(&self, row: usize, col: usize) -> &CellStat {
        &self.cells[row * self.grid_n + col]
    }

    pub fn n_nonempty(&self) -> usize {
        self.cells.iter().filter(|c| c.length > 0.0).count()
    }
}

/// Assigns every resampled point to one of `N × N` congruent rectangles of
/// `window` (half-open, the last row and column closed) and accumulates raw
/// `C_i, S_i, length_i`. Empty cells hold zeros.
pub fn cell_stats(contours: &ContourSet, window: &Window, n: usize) -> Result<CellStats> {
    if n == 0 {
        return Err(Error::invalid("partition size must be >= 1"));
    }
    let (w, h) = (window.width(), window.height());
    if !(w > 0.0 && h > 0.0) {
        return Err(Error::invalid("window must have positive extent"));
    }
    let slack = 1e-9;
    let locate = |v: f64, lo: f64, ext: f64| -> Option<usize> {
        let t = (v - lo) / ext;
        if !(-slack..=1.0 + slack).contains(&t) {
            return None;
        }
        Some(((t * n as f64).floor().max(0.0) as usize).min(n - 1))
    };
    let mut acc = vec![[KahanSum::default(); 3]; n * n];
    for p in &contours.points {
        let [x, y] = p.position;
        let (col, row) = match (locate(x, window.x0, w), locate(y, window.y0, h)) {
            (Some(c), Some(r)) => (c, r),
            _ => return Err(Error::OutsideWindow { x, y }),
        };
        let (nx, ny) = (p.normal[0], p.normal[1]);
        let cell = &mut acc[row * n + col];
        cell[0].add(p.seg_length * (nx * nx - ny * ny));
        cell[1].add(p.seg_length * 2.0 * nx * ny);
        cell[2].add(p.seg_length);
    }
    let cells = acc.iter().map(|a| CellStat { c: a[0].value(), s: a[1].value(), length: a[2].value() }).collect();
    Ok(CellStats { grid_n: n, cells })
}

/// Palm density of the planar gradient angle,
/// `f_Θ(θ) = C_κ (1 − κ² cos²(θ − θ₀))^{−3/2}` on `(−π, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PalmAngleDensity {
    pub kappa: f64,
    pub theta0: f64,
    /// Normalising constant `C_κ`, by adaptive quadrature.
    pub norm: f64,
}

thread_local! {
    static ANGLE_NORMS: RefCell<HashMap<u64, f64>> = RefCell::new(HashMap::new());
}

impl PalmAngleDensity {
    pub fn new(kappa: f64, theta0: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&kappa) {
            return Err(Error::domain(format!("kappa must lie in [0, 1), got {kappa}")));
        }
        let norm = ANGLE_NORMS.with(|cache| {
            *cache.borrow_mut().entry(kappa.to_bits()).or_insert_with(|| {
                let k2 = kappa * kappa;
                let total = integrate_adaptive(|t| (1.0 - k2 * t.cos().powi(2)).powf(-1.5), -PI, PI, 1e-15, 1e-15);
                1.0 / total
            })
        });
        Ok(Self { kappa, theta0, norm })
    }

    pub fn density(&self, theta: f64) -> f64 {
        let c = (theta - self.theta0).cos();
        self.norm * (1.0 - self.kappa * self.kappa * c * c).powf(-1.5)
    }

    /// Largest value of the density, attained at θ₀.
    pub fn max_density(&self) -> f64 {
        self.norm * (1.0 - self.kappa * self.kappa).powf(-1.5)
    }

    /// Probability that a uniform proposal is accepted by [`sample_palm_angle`].
    pub fn acceptance_rate(&self) -> f64 {
        1.0 / (2.0 * PI * self.max_density())
    }
}

/// `f_Θ(θ)` for the given parameters (normaliser cached per κ and thread).
pub fn palm_angle_density(theta: f64, kappa: f64, theta0: f64) -> Result<f64> {
    Ok(PalmAngleDensity::new(kappa, theta0)?.density(theta))
}

/// Draws from `f_Θ` and the number of uniform proposals consumed.
pub fn sample_palm_angle_counted(kappa: f64, theta0: f64, n: usize, seed: u64) -> Result<(Vec<f64>, u64)> {
    let density = PalmAngleDensity::new(kappa, theta0)?;
    let mut rng = stream_rng(seed, Stream::Sampler);
    let floor = 1.0 - kappa * kappa;
    let mut out = Vec::with_capacity(n);
    let mut proposals = 0u64;
    while out.len() < n {
        proposals += 1;
        let theta = PI - 2.0 * PI * rng.random::<f64>();
        let c = (theta - theta0).cos();
        let ratio = (floor / (1.0 - kappa * kappa * c * c)).powf(1.5);
        if rng.random::<f64>() < ratio {
            out.push(theta);
        }
    }
    debug_assert!(density.norm > 0.0);
    Ok((out, proposals))
}

/// `n` i.i.d. draws from `f_Θ` on `(−π, π]` by rejection from the uniform law.
pub fn sample_palm_angle(kappa: f64, theta0: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(sample_palm_angle_counted(kappa, theta0, n, seed)?.0)
}

fn check_kappa_vec(kappa: &[f64]) -> Result<()> {
    if kappa.len() < 2 || kappa.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
        return Err(Error::domain("anisotropy vector needs >= 2 strictly positive entries"));
    }
    Ok(())
}

/// `(Σ zᵢ²/κᵢ²)^{−(d+1)/2}` without normalisation.
fn palm_normal_kernel(z: &[f64], kappa: &[f64]) -> f64 {
    let d = kappa.len();
    let q: f64 = z.iter().zip(kappa).map(|(zi, ki)| zi * zi / (ki * ki)).sum();
    q.powf(-0.5 * (d as f64 + 1.0))
}

/// Palm density of the unit normal with respect to the uniform probability
/// measure on the sphere, in the eigenbasis of Λ: `C_Λ (Σ zᵢ²/κᵢ²)^{−(d+1)/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PalmNormalDensity {
    pub kappa: Vec<f64>,
    pub norm: f64,
}

impl PalmNormalDensity {
    /// Normalised over `quad`. The entries of `kappa` only matter up to a common factor.
    pub fn new(kappa: &[f64], quad: &SphereQuadrature) -> Result<Self> {
        check_kappa_vec(kappa)?;
        if quad.dim() != kappa.len() {
            return Err(Error::invalid("quadrature dimension differs from the anisotropy vector"));
        }
        let total = quad.integrate_even(|z| palm_normal_kernel(z, kappa));
        Ok(Self { kappa: kappa.to_vec(), norm: 1.0 / total })
    }

    pub fn density(&self, z: &[f64]) -> f64 {
        self.norm * palm_normal_kernel(z, &self.kappa)
    }
}

/// One-shot evaluation of [`PalmNormalDensity`]; validates `Σκᵢ² = 1` and `‖z‖ = 1`.
pub fn palm_normal_density_sphere(z: &[f64], kappa: &[f64], quad: &SphereQuadrature) -> Result<f64> {
    check_kappa_vec(kappa)?;
    let s: f64 = kappa.iter().map(|k| k * k).sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("anisotropy vector must satisfy sum k^2 = 1, got {s}")));
    }
    let norm: f64 = z.iter().map(|v| v * v).sum();
    if z.len() != kappa.len() || (norm - 1.0).abs() > 1e-9 {
        return Err(Error::domain("z must be a unit vector of the same dimension"));
    }
    Ok(PalmNormalDensity::new(kappa, quad)?.density(z))
}

/// `n` unit normals from the Palm normal law with parameters `kappa` along
/// the columns of `basis` (identity when `None`).
///
/// Proposals come from the angular central Gaussian (direction of a
/// `N(0, Diag(κ²))` vector), whose density is proportional to
/// `(Σ zᵢ²/κᵢ²)^{−d/2}`; accepting with probability
/// `(Σ zᵢ²/κᵢ²)^{−1/2} / κ_max` yields the target exactly.
pub fn sample_palm_normals(kappa: &[f64], basis: Option<&DMatrix<f64>>, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    check_kappa_vec(kappa)?;
    let d = kappa.len();
    if let Some(b) = basis {
        if b.nrows() != d || b.ncols() != d {
            return Err(Error::invalid("basis must be d x d"));
        }
    }
    let kmax = kappa.iter().cloned().fold(0.0, f64::max);
    let mut rng = stream_rng(seed, Stream::Sampler);
    let mut out = Vec::with_capacity(n);
    let mut x = vec![0.0; d];
    while out.len() < n {
        for (xi, ki) in x.iter_mut().zip(kappa) {
            let g: f64 = StandardNormal.sample(&mut rng);
            *xi = ki * g;
        }
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            continue;
        }
        let q: f64 = x.iter().zip(kappa).map(|(xi, ki)| (xi / r / ki).powi(2)).sum();
        if rng.random::<f64>() * kmax < q.powf(-0.5) {
            let z: Vec<f64> = x.iter().map(|v| v / r).collect();
            out.push(match basis {
                Some(b) => (0..d).map(|i| (0..d).map(|j| b[(i, j)] * z[j]).sum()).collect(),
                None => z,
            });
        }
    }
    Ok(out)
}
