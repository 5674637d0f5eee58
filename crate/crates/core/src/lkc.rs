//! Lipschitz–Killing curvatures of the excursion set and the curvature-based
//! anisotropy estimator.
//!
//! For `E = {X > u}` observed on a window `T`:
//! * `E|E ∩ T| / |T| = 1 − Φ(w)` with `w = (u − μ)/σ`,
//! * `E L / |T| = √(2/π) κ₁E(κ) φ(w)/σ` (boundary length),
//! * `E GC / |T| = κ₁κ₂ w φ(w) / (2πσ²)` (integral of the boundary curvature),
//!
//! so `R = (κ₁κ₂/σ²)/(κ₁E(κ)/σ)² = √(1−κ²)/E(κ)²` is free of σ and u.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::contour::ContourSet;
use crate::elliptic::{g_of_kappa, invert_link, r_of_kappa, LinkKind, R_AT_ZERO};
use crate::error::{Error, Result};
use crate::grid::BinaryMask;
use crate::special::{norm_pdf, norm_ppf};

/// Below this `|ŵ|` the curvature normalisation `ŵφ(ŵ)` is too close to zero to divide by.
pub const W_MIN: f64 = 0.2;

/// Closed paths with fewer resampled points are ignored by the Euler count.
pub const MIN_EULER_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LkcSummary {
    pub area_fraction: f64,
    pub boundary_length: f64,
    /// Turning-angle Euler characteristic over closed paths.
    pub euler_char: f64,
    /// Turning of the open (window-clipped) paths, in units of 2π; not part of `euler_char`.
    pub open_turning: f64,
    pub w_hat: f64,
    pub window_area: f64,
}

/// Total signed turning angle of a resampled path (exterior angles between
/// consecutive segments); all angles for closed paths, interior ones for open paths.
pub fn turning_angle(points: &[[f64; 2]], closed: bool) -> f64 {
    let n = points.len();
    let edges: Vec<[f64; 2]> = if closed {
        (0..n).map(|k| sub(points[(k + 1) % n], points[k])).collect()
    } else {
        (0..n.saturating_sub(1)).map(|k| sub(points[k + 1], points[k])).collect()
    };
    let edges: Vec<[f64; 2]> = edges.into_iter().filter(|e| e[0] != 0.0 || e[1] != 0.0).collect();
    let m = edges.len();
    if m < 2 {
        return 0.0;
    }
    let pairs = if closed { m } else { m - 1 };
    (0..pairs)
        .map(|k| {
            let (a, b) = (edges[k], edges[(k + 1) % m]);
            (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1])
        })
        .sum()
}

fn sub(p: [f64; 2], q: [f64; 2]) -> [f64; 2] {
    [p[0] - q[0], p[1] - q[1]]
}

/// Area fraction, boundary length and Euler characteristic of the excursion
/// `mask` whose boundary is `contours` (traversed with the excursion on the left).
pub fn lkc_summarize(mask: &BinaryMask, contours: &ContourSet) -> Result<LkcSummary> {
    let count = mask.count();
    if count == 0 || count == mask.data().len() {
        return Err(Error::Degenerate("excursion set is empty or covers the whole window".into()));
    }
    let area_fraction = mask.area_fraction();
    let (mut closed_turn, mut open_turn) = (0.0, 0.0);
    for (p, path) in contours.paths.iter().enumerate() {
        let pts: Vec<[f64; 2]> = contours.path_points(p).iter().map(|q| q.position).collect();
        if path.closed {
            if pts.len() >= MIN_EULER_POINTS {
                closed_turn += turning_angle(&pts, true);
            }
        } else {
            open_turn += turning_angle(&pts, false);
        }
    }
    Ok(LkcSummary {
        area_fraction,
        boundary_length: contours.total_length,
        euler_char: closed_turn / (2.0 * PI),
        open_turning: open_turn / (2.0 * PI),
        w_hat: -norm_ppf(area_fraction),
        window_area: mask.window().area(),
    })
}

/// Output of the curvature-based estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LkcEstimate {
    pub kappa: f64,
    pub r_hat: f64,
    pub truncated: bool,
    /// `P̂ = √(π/2) L/(|T| φ(ŵ))`, estimating `κ₁E(κ)/σ`.
    pub p_hat: f64,
    /// `ĜC = 2πχ̂/(|T| ŵ φ(ŵ))`, estimating `κ₁κ₂/σ²`.
    pub gc_hat: f64,
}

/// κ̂ from `R̂ = ĜC/P̂²`, truncated to 1 when `R̂ < 0` and to 0 when `R̂ > 4/π²`.
/// Refuses when `|ŵ| ≤ W_MIN`.
pub fn estimate_kappa_lkc(summary: &LkcSummary) -> Result<LkcEstimate> {
    let w = summary.w_hat;
    if !w.is_finite() || w.abs() <= W_MIN {
        return Err(Error::Refused(format!(
            "|w_hat| = {:.4} <= {W_MIN}: the curvature normalisation is singular near the mean level",
            w.abs()
        )));
    }
    if !(summary.boundary_length > 0.0 && summary.window_area > 0.0) {
        return Err(Error::Degenerate("zero boundary length or window area".into()));
    }
    let phi = norm_pdf(w);
    let p_hat = (PI / 2.0).sqrt() * summary.boundary_length / (summary.window_area * phi);
    let gc_hat = 2.0 * PI * summary.euler_char / (summary.window_area * w * phi);
    let r_hat = gc_hat / (p_hat * p_hat);
    let (kappa, truncated) = kappa_from_r(r_hat)?;
    Ok(LkcEstimate { kappa, r_hat, truncated, p_hat, gc_hat })
}

/// Applies the truncation rule and inverts `R` inside the admissible range.
pub fn kappa_from_r(r_hat: f64) -> Result<(f64, bool)> {
    if r_hat < 0.0 {
        Ok((1.0, true))
    } else if r_hat > R_AT_ZERO {
        Ok((0.0, true))
    } else {
        Ok((invert_link(LinkKind::R, r_hat)?, false))
    }
}

/// Upper end of the search interval of [`combine_estimates`].
pub const COMBINE_KAPPA_MAX: f64 = 1.0 - 1e-6;

/// Least-squares combination: minimises `α₁(R̂ − R(κ))² + (1−α₁)(F − g(κ))²`
/// over `[0, 1 − 1e−6]` by a 10⁴-point grid scan refined by golden-section search.
pub fn combine_estimates(r_hat: f64, f: f64, alpha1: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha1) {
        return Err(Error::invalid(format!("alpha1 must lie in [0, 1], got {alpha1}")));
    }
    if !r_hat.is_finite() || !f.is_finite() {
        return Err(Error::invalid("combined estimator needs finite statistics"));
    }
    let alpha2 = 1.0 - alpha1;
    let objective = |k: f64| -> f64 {
        let r = r_of_kappa(k).expect("k in [0, 1)");
        let g = g_of_kappa(k).expect("k in [0, 1)");
        alpha1 * (r_hat - r).powi(2) + alpha2 * (f - g).powi(2)
    };
    const GRID: usize = 10_000;
    let at = |i: usize| COMBINE_KAPPA_MAX * i as f64 / (GRID - 1) as f64;
    let (mut best_i, mut best) = (0, f64::INFINITY);
    for i in 0..GRID {
        let v = objective(at(i));
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let (mut lo, mut hi) = (at(best_i.saturating_sub(1)), at((best_i + 1).min(GRID - 1)));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    for _ in 0..200 {
        if hi - lo < 1e-14 {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = objective(x2);
        }
    }
    let mut arg = 0.5 * (lo + hi);
    let mut val = objective(arg);
    // Endpoints win ties (up to roundoff in the flat links) so truncated
    // single-term limits are reproduced exactly.
    for end in [0.0, COMBINE_KAPPA_MAX] {
        let v = objective(end);
        if v <= val * (1.0 + 1e-12) {
            arg = end;
            val = v;
        }
    }
    Ok(arg)
}
