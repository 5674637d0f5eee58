//! User-facing anisotropy estimators: the Contour estimator (κ̂_C, θ̂₀), the
//! d-dimensional Palm eigen-pipeline and the full-observation gradient oracle.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::elliptic::{g_of_kappa, invert_link, LinkKind, KAPPA_MAX};
use crate::error::{Error, Result};
use crate::field_sim::reduce_direction;
use crate::grid::FieldGrid;
use crate::inversion_hd::{invert_palm, GdBox, KappaVec};
use crate::palm::PalmSummary;
use crate::sphere::SphereQuadrature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Contour,
    Lkc,
    Combined,
    OracleGrad,
    PalmHd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaEstimate {
    Scalar(f64),
    Vector(KappaVec),
}

/// Principal direction: an angle modulo π in the plane, or an orthonormal
/// matrix whose columns follow the descending κ̂ order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DirectionEstimate {
    Angle(f64),
    Matrix(Vec<Vec<f64>>),
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnisotropyEstimate {
    pub method: Method,
    pub kappa: KappaEstimate,
    pub theta0: DirectionEstimate,
    /// `F = √(C² + S²)/|L|` where available.
    #[serde(rename = "F_stat")]
    pub f_stat: f64,
    pub diagnostics: BTreeMap<String, f64>,
    pub flags: Vec<String>,
}

impl AnisotropyEstimate {
    pub fn kappa_scalar(&self) -> Option<f64> {
        match &self.kappa {
            KappaEstimate::Scalar(k) => Some(*k),
            KappaEstimate::Vector(v) => Some(v.to_2d()),
        }
    }

    pub fn theta0_angle(&self) -> Option<f64> {
        match &self.theta0 {
            DirectionEstimate::Angle(t) => Some(*t),
            DirectionEstimate::Matrix(m) if m.len() == 2 => Some(reduce_direction(m[1][0].atan2(m[0][0]))),
            _ => None,
        }
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }
}

/// `θ̂₀ = ½ atan2(S, C)` in `(−π/2, π/2]`, and `F`.
pub fn contour_direction(summary: &PalmSummary) -> (f64, f64) {
    let f = summary.c.hypot(summary.s) / summary.total_length;
    (reduce_direction(0.5 * summary.s.atan2(summary.c)), f)
}

/// Contour estimator: `κ̂_C = g⁻¹(min(F, g(κ_max)))`, `θ̂₀ = ½ atan2(S, C)`.
pub fn estimate_contour_2d(summary: &PalmSummary) -> Result<AnisotropyEstimate> {
    if !(summary.total_length > 0.0) {
        return Err(Error::Degenerate("zero-length contour".into()));
    }
    if summary.dim() != 2 {
        return Err(Error::invalid("the contour estimator is planar"));
    }
    let mut diagnostics = BTreeMap::new();
    let mut flags = Vec::new();
    let (mut theta, f) = contour_direction(summary);
    if summary.c == 0.0 && summary.s == 0.0 {
        theta = 0.0;
        flags.push("isotropic".to_string());
    }
    let gmax = g_of_kappa(KAPPA_MAX)?;
    let kappa = if f > gmax {
        flags.push("clamped".to_string());
        diagnostics.insert("clamped_from_F".to_string(), f);
        KAPPA_MAX
    } else {
        invert_link(LinkKind::G, f)?
    };
    diagnostics.insert("C_over_L".to_string(), summary.c / summary.total_length);
    diagnostics.insert("S_over_L".to_string(), summary.s / summary.total_length);
    diagnostics.insert("total_length".to_string(), summary.total_length);
    Ok(AnisotropyEstimate {
        method: Method::Contour,
        kappa: KappaEstimate::Scalar(kappa),
        theta0: DirectionEstimate::Angle(theta),
        f_stat: f,
        diagnostics,
        flags,
    })
}

/// Symmetric eigen-decomposition with eigenvalues descending and each
/// eigenvector's largest-magnitude component made positive.
pub fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let d = m.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(d, d);
    for (c, &i) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(i).clone_owned();
        let pivot = col.iter().cloned().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
        if pivot < 0.0 {
            col = -col;
        }
        vectors.set_column(c, &col);
    }
    (values, vectors)
}

/// Tuning of the Palm eigen-pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PalmHdOptions {
    pub gd_box: GdBox,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PalmHdOptions {
    fn default() -> Self {
        Self { gd_box: GdBox::default(), tol: 1e-10, max_iter: 5_000_000 }
    }
}

/// Palm eigen-pipeline: diagonalise the normal covariance into `(P̂, Ẑ)`,
/// invert `Ẑ` into κ̂, and order the directions with κ̂ (larger `Ẑ` goes
/// with larger κ).
pub fn estimate_palm_hd(
    summary: &PalmSummary,
    quad: &SphereQuadrature,
    options: &PalmHdOptions,
) -> Result<AnisotropyEstimate> {
    let d = summary.dim();
    if d < 2 || quad.dim() != d {
        return Err(Error::invalid("normal covariance and quadrature dimensions differ"));
    }
    let cov = summary.normal_cov_matrix();
    let trace = cov.trace();
    if !(trace > 0.0) || (trace - 1.0).abs() > 1e-6 {
        return Err(Error::Degenerate(format!("normal covariance trace is {trace}, expected 1")));
    }
    let (values, vectors) = sorted_eigen(&cov);
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Degenerate("normal covariance is singular".into()));
    }
    let z: Vec<f64> = values.iter().map(|v| v / trace).collect();
    let mut flags = Vec::new();
    if z.iter().all(|&v| (v - 1.0 / d as f64).abs() < 1e-12) {
        flags.push("isotropic".to_string());
    }
    let inv = invert_palm(&z, options.gd_box, quad, options.tol, options.max_iter)?;
    let mut directions = vec![vec![0.0; d]; d];
    for (c, &src) in inv.permutation.iter().enumerate() {
        for (r, row) in directions.iter_mut().enumerate() {
            row[c] = vectors[(r, src)];
        }
    }
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("gd_iterations".to_string(), inv.report.iterations() as f64);
    diagnostics.insert("gd_residual".to_string(), inv.report.final_residual);
    for (k, zk) in z.iter().enumerate() {
        diagnostics.insert(format!("Z_{}", k + 1), *zk);
    }
    let f_stat = if d == 2 { summary.c.hypot(summary.s) / summary.total_length } else { f64::NAN };
    Ok(AnisotropyEstimate {
        method: Method::PalmHd,
        kappa: KappaEstimate::Vector(inv.kappa),
        theta0: DirectionEstimate::Matrix(directions),
        f_stat,
        diagnostics,
        flags,
    })
}

/// Finite-difference gradients at interior pixels: the fourth-order centred
/// stencil `(−f₊₂ + 8f₊₁ − 8f₋₁ + f₋₂)/12h` where the grid allows it,
/// otherwise the second-order `(f₊₁ − f₋₁)/2h`.
pub fn finite_difference_gradients(grid: &FieldGrid) -> Result<Vec<[f64; 2]>> {
    let (rows, cols) = (grid.rows(), grid.cols());
    if rows < 3 || cols < 3 {
        return Err(Error::DegenerateGrid { rows, cols, min: 3 });
    }
    let v = grid.values();
    let at = |i: usize, j: usize| v[i * cols + j];
    let wide = rows >= 5 && cols >= 5;
    let m = if wide { 2 } else { 1 };
    let mut out = Vec::with_capacity((rows - 2 * m) * (cols - 2 * m));
    for i in m..rows - m {
        for j in m..cols - m {
            let (gx, gy) = if wide {
                (
                    (-at(i, j + 2) + 8.0 * at(i, j + 1) - 8.0 * at(i, j - 1) + at(i, j - 2)) / (12.0 * grid.dx),
                    (-at(i + 2, j) + 8.0 * at(i + 1, j) - 8.0 * at(i - 1, j) + at(i - 2, j)) / (12.0 * grid.dy),
                )
            } else {
                ((at(i, j + 1) - at(i, j - 1)) / (2.0 * grid.dx), (at(i + 1, j) - at(i - 1, j)) / (2.0 * grid.dy))
            };
            out.push([gx, gy]);
        }
    }
    Ok(out)
}

/// Empirical (mean-centred) covariance of the finite-difference gradients.
pub fn gradient_covariance(grid: &FieldGrid) -> Result<Matrix2<f64>> {
    let g = finite_difference_gradients(grid)?;
    let n = g.len() as f64;
    let mx = g.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = g.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0);
    for p in &g {
        let (a, b) = (p[0] - mx, p[1] - my);
        xx += a * a;
        xy += a * b;
        yy += b * b;
    }
    Ok(Matrix2::new(xx / n, xy / n, xy / n, yy / n))
}

/// Full-observation oracle: `κ̂² = 1 − λ̂₂/λ̂₁` from the gradient covariance,
/// direction of the leading eigenvector.
pub fn estimate_oracle_grad(grid: &FieldGrid) -> Result<AnisotropyEstimate> {
    let cov = gradient_covariance(grid)?;
    let scale = cov.abs().max();
    let (values, vectors) = sorted_eigen(&DMatrix::from_fn(2, 2, |i, j| cov[(i, j)]));
    if !(values[0] > 1e-12 * scale.max(f64::MIN_POSITIVE)) || values[0] <= 0.0 {
        return Err(Error::Degenerate("gradient covariance vanishes".into()));
    }
    let ratio = (values[1] / values[0]).clamp(0.0, 1.0);
    let kappa = (1.0 - ratio).sqrt();
    let theta = reduce_direction(vectors[(1, 0)].atan2(vectors[(0, 0)]));
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("lambda_1".to_string(), values[0]);
    diagnostics.insert("lambda_2".to_string(), values[1]);
    Ok(AnisotropyEstimate {
        method: Method::OracleGrad,
        kappa: KappaEstimate::Scalar(kappa),
        theta0: DirectionEstimate::Angle(theta),
        f_stat: f64::NAN,
        diagnostics,
        flags: Vec::new(),
    })
}
