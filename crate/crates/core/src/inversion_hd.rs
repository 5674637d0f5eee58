//! Dimension-free forward map `κ ↦ Z(κ)` (eigenvalues of the Palm covariance
//! of the unit normal) and its inversion by projected gradient descent on a
//! strongly convex program.
//!
//! With `Ξ(u) = −(2/(d−1)) ∫ (Σ uᵢ zᵢ²)^{−(d−1)/2} dη(z)` (concave on `ℝ₊^d`)
//! and `∇Ξ = Ω`, `Ωℓ(u) = ∫ zℓ² (Σ uᵢ zᵢ²)^{−(d+1)/2} dη`, the target `Z`
//! is reached at the unique minimiser `π` of `⟨Z, u⟩ − Ξ(u)`, and
//! `κᵢ² = (1/πᵢ) / Σⱼ (1/πⱼ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::SphereQuadrature;

/// Anisotropy parameters on `Δ₊ = {κ : Σκᵢ² = 1, κᵢ > 0}`, sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaVec {
    values: Vec<f64>,
}

impl KappaVec {
    /// Validates an already normalised, descending vector.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_positive(&values)?;
        let s: f64 = values.iter().map(|v| v * v).sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("sum of squares must be 1, got {s}")));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::domain("anisotropy vector must be sorted descending"));
        }
        Ok(Self { values })
    }

    /// Normalises and sorts arbitrary positive entries.
    pub fn from_unnormalized(values: &[f64]) -> Result<Self> {
        check_positive(values)?;
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v: Vec<f64> = values.iter().map(|x| x / norm).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { values: v })
    }

    /// Planar vector with `κ₂²/κ₁² = 1 − κ²`: `κ₁² = 1/(2−κ²)`, `κ₂² = (1−κ²)/(2−κ²)`.
    pub fn from_2d(kappa: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&kappa) {
            return Err(Error::domain(format!("kappa must lie in [0, 1), got {kappa}")));
        }
        let k2 = kappa * kappa;
        Ok(Self { values: vec![(1.0 / (2.0 - k2)).sqrt(), ((1.0 - k2) / (2.0 - k2)).sqrt()] })
    }

    /// The planar anisotropy `√(1 − κ_d²/κ₁²)` (smallest over largest).
    pub fn to_2d(&self) -> f64 {
        let (first, last) = (self.values[0], self.values[self.values.len() - 1]);
        (1.0 - (last / first).powi(2)).max(0.0).sqrt()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Condition ratio `κ_max/κ_min`.
    pub fn condition(&self) -> f64 {
        self.values[0] / self.values[self.values.len() - 1]
    }
}

fn check_positive(values: &[f64]) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::domain("anisotropy vector needs dimension >= 2"));
    }
    if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::domain("anisotropy entries must be finite and > 0"));
    }
    Ok(())
}

/// `s^{−m/2}` for small positive integers `m`, avoiding `powf`.
#[inline]
fn pow_neg_half(s: f64, m: usize) -> f64 {
    let half = (m / 2) as i32;
    if m.is_multiple_of(2) {
        1.0 / s.powi(half)
    } else {
        1.0 / (s.powi(half) * s.sqrt())
    }
}

fn check_quad(d: usize, quad: &SphereQuadrature) -> Result<()> {
    if quad.dim() != d {
        return Err(Error::invalid(format!("quadrature is for d={}, vector has d={d}", quad.dim())));
    }
    Ok(())
}

/// `Zℓ = C_Λ ∫ zℓ² (Σᵢ zᵢ²/κᵢ²)^{−(d+1)/2} dη`, in the coordinate order of
/// `kappa` (which need not be sorted or normalised). The normaliser is the
/// sum of the unnormalised components, so `Σ Zℓ = 1` by construction.
pub fn forward_z(kappa: &[f64], quad: &SphereQuadrature) -> Result<Vec<f64>> {
    check_positive(kappa)?;
    let d = kappa.len();
    check_quad(d, quad)?;
    let inv: Vec<f64> = kappa.iter().map(|k| 1.0 / (k * k)).collect();
    Ok(normalize(omega(&inv, quad)))
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// `Ω(u)` without argument checks.
fn omega(u: &[f64], quad: &SphereQuadrature) -> Vec<f64> {
    let d = u.len();
    let mut out = vec![0.0; d];
    for (z2, &w) in quad.squares().chunks_exact(d).zip(quad.weights()) {
        let s: f64 = z2.iter().zip(u).map(|(a, b)| a * b).sum();
        let k = w * pow_neg_half(s, d + 1);
        for (o, &zz) in out.iter_mut().zip(z2) {
            *o += k * zz;
        }
    }
    out
}

fn check_u(u: &[f64]) -> Result<()> {
    if u.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::domain("u must have finite positive entries"));
    }
    Ok(())
}

/// `Ξ(u) = −(2/(d−1)) ∫ (Σ uᵢ zᵢ²)^{−(d−1)/2} dη`.
pub fn xi(u: &[f64], quad: &SphereQuadrature) -> Result<f64> {
    check_u(u)?;
    let d = u.len();
    check_quad(d, quad)?;
    let mut acc = 0.0;
    for (z2, &w) in quad.squares().chunks_exact(d).zip(quad.weights()) {
        let s: f64 = z2.iter().zip(u).map(|(a, b)| a * b).sum();
        acc += w * pow_neg_half(s, d - 1);
    }
    Ok(-2.0 / (d as f64 - 1.0) * acc)
}

/// `∇Ξ(u) = Ω(u)`.
pub fn grad_xi(u: &[f64], quad: &SphereQuadrature) -> Result<Vec<f64>> {
    check_u(u)?;
    check_quad(u.len(), quad)?;
    Ok(omega(u, quad))
}

/// Box `[a, b]^d` for the descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdBox {
    pub a: f64,
    pub b: f64,
}

impl GdBox {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a < b && b.is_finite()) {
            return Err(Error::invalid(format!("box needs 0 < a < b, got ({a}, {b})")));
        }
        Ok(Self { a, b })
    }

    /// `(r⁻²/2, 2r²)` for a conditioning guess `r ≥ 1`.
    pub fn from_conditioning(r: f64) -> Result<Self> {
        if !(r >= 1.0 && r.is_finite()) {
            return Err(Error::invalid(format!("conditioning guess must be >= 1, got {r}")));
        }
        Self::new(0.5 / (r * r), 2.0 * r * r)
    }

    /// Strong-convexity and smoothness constants `(α, β)` and `Q = β/α`.
    pub fn constants(&self, d: usize, fourth_moment: f64) -> (f64, f64, f64) {
        let p = 0.5 * (d as f64 + 3.0);
        let alpha = 0.5 * self.b.powf(-p);
        let beta = 0.5 * (d * (d + 1)) as f64 * self.a.powf(-p) * fourth_moment;
        (alpha, beta, beta / alpha)
    }
}

impl Default for GdBox {
    fn default() -> Self {
        Self::from_conditioning(3.0).expect("r = 3 is valid")
    }
}

/// Trace of a gradient-descent run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdReport {
    /// `u⁽⁰⁾, u⁽¹⁾, …` including the final iterate.
    pub iterates: Vec<Vec<f64>>,
    pub step: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    pub converged: bool,
    /// Euclidean norm of `Z − Ω(u)` at the final iterate.
    pub final_residual: f64,
}

impl GdReport {
    pub fn iterations(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    pub fn final_iterate(&self) -> &[f64] {
        self.iterates.last().expect("a report holds at least the starting point")
    }
}

/// Output of [`invert_palm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PalmInversion {
    /// Minimiser `π̂` in the input coordinate order.
    pub pi_hat: Vec<f64>,
    pub kappa: KappaVec,
    /// `permutation[k]` is the input coordinate of the k-th largest κ̂.
    pub permutation: Vec<usize>,
    pub report: GdReport,
}

/// Runs projected gradient descent on `u ↦ ⟨Z, u⟩ − Ξ(u)` over `box^d` from
/// `(1, …, 1)` with step `2/(α+β)`, stopping when `‖Z − Ω(u)‖ < tol`.
/// Non-convergence is reported through the flag, not as an error.
pub fn palm_gradient_descent(
    z_target: &[f64],
    gd_box: GdBox,
    quad: &SphereQuadrature,
    tol: f64,
    max_iter: usize,
) -> Result<GdReport> {
    let d = z_target.len();
    check_quad(d, quad)?;
    if d < 2 || z_target.iter().any(|&z| !(z > 0.0 && z.is_finite())) {
        return Err(Error::domain("Z target needs >= 2 positive entries"));
    }
    let sum: f64 = z_target.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::domain(format!("Z target must sum to 1, got {sum}")));
    }
    let z: Vec<f64> = z_target.iter().map(|v| v / sum).collect();
    let (alpha, beta, q) = gd_box.constants(d, quad.fourth_moment());
    let step = 2.0 / (alpha + beta);
    let mut u = vec![1.0f64.clamp(gd_box.a, gd_box.b); d];
    let mut iterates = vec![u.clone()];
    let mut residual;
    let mut converged = false;
    let mut k = 0;
    loop {
        let om = omega(&u, quad);
        let grad: Vec<f64> = z.iter().zip(&om).map(|(a, b)| a - b).collect();
        residual = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if residual < tol {
            converged = true;
            break;
        }
        if k >= max_iter {
            break;
        }
        for (ui, gi) in u.iter_mut().zip(&grad) {
            *ui = (*ui - step * gi).clamp(gd_box.a, gd_box.b);
        }
        iterates.push(u.clone());
        k += 1;
    }
    Ok(GdReport { iterates, step, alpha, beta, q, converged, final_residual: residual })
}

/// Recovers κ from `Z`; a run that does not reach `tol` within `max_iter`
/// (for instance because `Z` is outside the image of the box) is an error.
pub fn invert_palm(
    z_target: &[f64],
    gd_box: GdBox,
    quad: &SphereQuadrature,
    tol: f64,
    max_iter: usize,
) -> Result<PalmInversion> {
    let report = palm_gradient_descent(z_target, gd_box, quad, tol, max_iter)?;
    if !report.converged {
        return Err(Error::NonConvergence(format!(
            "gradient descent stopped after {} iterations with residual {:.3e} (tol {tol:.1e}); \
             the target may lie outside the image of the box [{}, {}]",
            report.iterations(),
            report.final_residual,
            gd_box.a,
            gd_box.b
        )));
    }
    let pi_hat = report.final_iterate().to_vec();
    let inv: Vec<f64> = pi_hat.iter().map(|p| 1.0 / p).collect();
    let total: f64 = inv.iter().sum();
    let mut permutation: Vec<usize> = (0..pi_hat.len()).collect();
    permutation.sort_by(|&i, &j| pi_hat[i].total_cmp(&pi_hat[j]).then(i.cmp(&j)));
    let values = permutation.iter().map(|&i| (inv[i] / total).sqrt()).collect::<Vec<_>>();
    let kappa = KappaVec::from_unnormalized(&values)?;
    Ok(PalmInversion { pi_hat, kappa, permutation, report })
}

/// Measured and theoretical contraction of a descent run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCheck {
    /// Geometric factor from the least-squares slope of `log ‖u⁽ᵏ⁾ − u_final‖`;
    /// `None` when the start was already optimal.
    pub measured: Option<f64>,
    /// `(Q−1)/(Q+1)` with `Q = d(d+1)(b/a)^{(d+3)/2} ∫z₁⁴dη`.
    pub bound: f64,
    pub trivially_converged: bool,
}

/// Compares the observed contraction toward the final iterate with the
/// theoretical rate. The fit uses the iterates whose distance to the final
/// iterate is still above `1e−3` of the initial distance, where the final
/// iterate is an accurate proxy for the limit.
pub fn gd_rate_check(report: &GdReport, gd_box: GdBox, quad: &SphereQuadrature) -> Result<RateCheck> {
    let d = report.iterates[0].len();
    let (_, _, q) = gd_box.constants(d, quad.fourth_moment());
    let bound = (q - 1.0) / (q + 1.0);
    if report.iterations() == 0 && report.converged {
        return Ok(RateCheck { measured: None, bound, trivially_converged: true });
    }
    if !report.converged || report.iterates.len() < 10 {
        return Err(Error::invalid("rate check needs a converged run with at least 10 iterates"));
    }
    let last = report.final_iterate();
    let dist: Vec<f64> =
        report.iterates.iter().map(|u| u.iter().zip(last).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()).collect();
    let floor = 1e-3 * dist[0];
    let pts: Vec<(f64, f64)> =
        dist.iter().enumerate().take_while(|(_, &e)| e > floor).map(|(k, &e)| (k as f64, e.ln())).collect();
    if pts.len() < 3 {
        return Err(Error::invalid("too few informative iterates for a rate fit"));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(RateCheck { measured: Some((sxy / sxx).exp()), bound, trivially_converged: false })
}
