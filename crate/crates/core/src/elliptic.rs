//! Complete elliptic integrals and the two link functions between the
//! anisotropy parameter κ and observable contour statistics.
//!
//! * `g(κ) = E_Palm[cos 2(Θ − θ₀)]` links the normalised cosine/sine integrals
//!   of the level curve to κ.
//! * `R(κ) = √(1−κ²)/E(κ)²` links the curvature/perimeter ratio of the
//!   excursion set to κ.
//!
//! Both are strictly monotone on `[0, 1)` and are inverted by bisection.
//! All integrals take the modulus `k` (not the parameter `m = k²`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper end of the tabulated/invertible κ range.
pub const KAPPA_MAX: f64 = 1.0 - 1e-8;

/// Below this κ the series branch of `g` is used.
pub const G_SERIES_THRESHOLD: f64 = 1e-4;

/// `R(0) = 4/π²`, the isotropic value of the LKC ratio.
pub const R_AT_ZERO: f64 = 4.0 / (std::f64::consts::PI * std::f64::consts::PI);

const ERRTOL: f64 = 8e-4;

/// Carlson's symmetric integral `R_F(x, y, z)`; at most one argument may be zero.
pub fn carlson_rf(x: f64, y: f64, z: f64) -> f64 {
    let (mut xt, mut yt, mut zt) = (x, y, z);
    loop {
        let (sx, sy, sz) = (xt.sqrt(), yt.sqrt(), zt.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        xt = 0.25 * (xt + lambda);
        yt = 0.25 * (yt + lambda);
        zt = 0.25 * (zt + lambda);
        let ave = (xt + yt + zt) / 3.0;
        let dx = (ave - xt) / ave;
        let dy = (ave - yt) / ave;
        let dz = (ave - zt) / ave;
        if dx.abs().max(dy.abs()).max(dz.abs()) <= ERRTOL {
            let e2 = dx * dy - dz * dz;
            let e3 = dx * dy * dz;
            return (1.0 + (e2 / 24.0 - 0.1 - 3.0 / 44.0 * e3) * e2 + e3 / 14.0) / ave.sqrt();
        }
    }
}

/// Carlson's `R_D(x, y, z)`, symmetric in `x, y`; `z > 0`.
pub fn carlson_rd(x: f64, y: f64, z: f64) -> f64 {
    const C1: f64 = 3.0 / 14.0;
    const C2: f64 = 1.0 / 6.0;
    const C3: f64 = 9.0 / 22.0;
    const C4: f64 = 3.0 / 26.0;
    const C5: f64 = 0.25 * C3;
    const C6: f64 = 1.5 * C4;
    let (mut xt, mut yt, mut zt) = (x, y, z);
    let mut sum = 0.0;
    let mut fac = 1.0;
    loop {
        let (sx, sy, sz) = (xt.sqrt(), yt.sqrt(), zt.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        sum += fac / (sz * (zt + lambda));
        fac *= 0.25;
        xt = 0.25 * (xt + lambda);
        yt = 0.25 * (yt + lambda);
        zt = 0.25 * (zt + lambda);
        let ave = 0.2 * (xt + yt + 3.0 * zt);
        let dx = (ave - xt) / ave;
        let dy = (ave - yt) / ave;
        let dz = (ave - zt) / ave;
        if dx.abs().max(dy.abs()).max(dz.abs()) <= ERRTOL {
            let ea = dx * dy;
            let eb = dz * dz;
            let ec = ea - eb;
            let ed = ea - 6.0 * eb;
            let ee = ed + ec + ec;
            return 3.0 * sum
                + fac * (1.0 + ed * (-C1 + C5 * ed - C6 * dz * ee) + dz * (C2 * ee + dz * (-C3 * ec + dz * C4 * ea)))
                    / (ave * ave.sqrt());
        }
    }
}

/// Carlson's degenerate integral `R_C(x, y) = R_F(x, y, y)` for `y > 0`.
pub fn carlson_rc(x: f64, y: f64) -> f64 {
    let (mut xt, mut yt) = (x, y);
    loop {
        let lambda = 2.0 * xt.sqrt() * yt.sqrt() + yt;
        xt = 0.25 * (xt + lambda);
        yt = 0.25 * (yt + lambda);
        let ave = (xt + yt + yt) / 3.0;
        let s = (yt - ave) / ave;
        if s.abs() <= ERRTOL {
            return (1.0 + s * s * (0.3 + s * (1.0 / 7.0 + s * (0.375 + s * 9.0 / 22.0)))) / ave.sqrt();
        }
    }
}

/// Carlson's `R_J(x, y, z, p)` for `p > 0`.
pub fn carlson_rj(x: f64, y: f64, z: f64, p: f64) -> f64 {
    const C1: f64 = 3.0 / 14.0;
    const C2: f64 = 1.0 / 3.0;
    const C3: f64 = 3.0 / 22.0;
    const C4: f64 = 3.0 / 26.0;
    const C5: f64 = 0.75 * C3;
    const C6: f64 = 1.5 * C4;
    const C7: f64 = 0.5 * C2;
    const C8: f64 = C3 + C3;
    let (mut xt, mut yt, mut zt, mut pt) = (x, y, z, p);
    let mut sum = 0.0;
    let mut fac = 1.0;
    loop {
        let (sx, sy, sz) = (xt.sqrt(), yt.sqrt(), zt.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        let alpha = (pt * (sx + sy + sz) + sx * sy * sz).powi(2);
        let beta = pt * (pt + lambda).powi(2);
        sum += fac * carlson_rc(alpha, beta);
        fac *= 0.25;
        xt = 0.25 * (xt + lambda);
        yt = 0.25 * (yt + lambda);
        zt = 0.25 * (zt + lambda);
        pt = 0.25 * (pt + lambda);
        let ave = 0.2 * (xt + yt + zt + pt + pt);
        let dx = (ave - xt) / ave;
        let dy = (ave - yt) / ave;
        let dz = (ave - zt) / ave;
        let dp = (ave - pt) / ave;
        if dx.abs().max(dy.abs()).max(dz.abs()).max(dp.abs()) <= ERRTOL {
            let ea = dx * (dy + dz) + dy * dz;
            let eb = dx * dy * dz;
            let ec = dp * dp;
            let ed = ea - 3.0 * ec;
            let ee = eb + 2.0 * dp * (ea - ec);
            return 3.0 * sum
                + fac
                    * (1.0
                        + ed * (-C1 + C5 * ed - C6 * ee)
                        + eb * (C7 + dp * (-C8 + dp * C4))
                        + dp * ea * (C2 - dp * C3)
                        - C2 * dp * ec)
                    / (ave * ave.sqrt());
        }
    }
}

fn check_modulus(k: f64) -> Result<()> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::domain(format!("elliptic modulus must lie in [0, 1), got {k}")));
    }
    Ok(())
}

/// Complete elliptic integral of the first kind `K(k) = ∫₀^{π/2} (1 − k² sin²θ)^{−1/2} dθ`.
pub fn ellip_k(k: f64) -> Result<f64> {
    check_modulus(k)?;
    Ok(carlson_rf(0.0, 1.0 - k * k, 1.0))
}

/// Complete elliptic integral of the second kind `E(k) = ∫₀^{π/2} (1 − k² sin²θ)^{1/2} dθ`,
/// defined on the closed range `[0, 1]`.
pub fn ellip_e(k: f64) -> Result<f64> {
    if k == 1.0 {
        return Ok(1.0);
    }
    check_modulus(k)?;
    let y = 1.0 - k * k;
    Ok(carlson_rf(0.0, y, 1.0) - k * k / 3.0 * carlson_rd(0.0, y, 1.0))
}

/// Complete elliptic integral of the third kind
/// `Π(n, k) = ∫₀^{π/2} (1 − n sin²θ)^{−1} (1 − k² sin²θ)^{−1/2} dθ` for `n < 1`.
pub fn ellip_pi(n: f64, k: f64) -> Result<f64> {
    check_modulus(k)?;
    if !(n < 1.0) {
        return Err(Error::domain(format!("characteristic must be < 1, got {n}")));
    }
    let y = 1.0 - k * k;
    Ok(carlson_rf(0.0, y, 1.0) + n / 3.0 * carlson_rj(0.0, y, 1.0, 1.0 - n))
}

/// `g(κ) = ∫cos 2θ (1−κ²cos²θ)^{−3/2} dθ / ∫(1−κ²cos²θ)^{−3/2} dθ` over `(−π, π]`.
///
/// In closed form, with `K, E, Π` at modulus κ,
/// `g = (2E − 2(1−κ²)K − κ²(1−κ²)Π(κ²,κ)) / (κ²(1−κ²)Π(κ²,κ))`.
/// Since `(1−κ²)Π(κ²,κ) = E` and `K − E = κ²R_D/3`, this equals
/// `(R_F − (2−κ²)R_D/3)/E` with `R_F, R_D` at `(0, 1−κ², 1)`, a form without
/// the `κ⁴/κ²` cancellation. Below [`G_SERIES_THRESHOLD`] the series
/// `3κ²/8 + 3κ⁴/16` is used.
pub fn g_of_kappa(kappa: f64) -> Result<f64> {
    check_modulus(kappa)?;
    let k2 = kappa * kappa;
    if kappa < G_SERIES_THRESHOLD {
        return Ok(k2 * (0.375 + 0.1875 * k2));
    }
    let y = 1.0 - k2;
    let rf = carlson_rf(0.0, y, 1.0);
    let rd = carlson_rd(0.0, y, 1.0);
    let e = rf - k2 / 3.0 * rd;
    Ok((rf - (2.0 - k2) / 3.0 * rd) / e)
}

/// `R(κ) = √(1−κ²)/E(κ)²` on `[0, 1]`.
pub fn r_of_kappa(kappa: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::domain(format!("kappa must lie in [0, 1], got {kappa}")));
    }
    let e = ellip_e(kappa)?;
    Ok((1.0 - kappa * kappa).sqrt() / (e * e))
}

/// Which link function to evaluate or invert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkKind {
    /// Contour link `g`, increasing.
    G,
    /// LKC link `R`, decreasing.
    R,
}

impl LinkKind {
    pub fn eval(self, kappa: f64) -> Result<f64> {
        match self {
            LinkKind::G => g_of_kappa(kappa),
            LinkKind::R => r_of_kappa(kappa),
        }
    }

    /// Closed value range of the link over `[0, KAPPA_MAX]`, ordered `(lo, hi)`.
    pub fn range(self) -> (f64, f64) {
        match self {
            LinkKind::G => (0.0, g_of_kappa(KAPPA_MAX).expect("KAPPA_MAX < 1")),
            LinkKind::R => (0.0, R_AT_ZERO),
        }
    }
}

/// Solves `link(κ) = y` for κ in `[0, KAPPA_MAX]` by bisection.
///
/// Values at the ends of the range map to the corresponding end of the κ
/// interval; values outside the closed range are a domain error (callers
/// apply their own truncation rules first).
pub fn invert_link(kind: LinkKind, y: f64) -> Result<f64> {
    let (lo, hi) = kind.range();
    let slack = 1e-12;
    if !y.is_finite() || y < lo - slack || y > hi + slack {
        return Err(Error::domain(format!("value {y} outside the range [{lo}, {hi}] of link {kind:?}")));
    }
    match kind {
        LinkKind::G if y <= 0.0 => return Ok(0.0),
        LinkKind::G if y >= hi => return Ok(KAPPA_MAX),
        LinkKind::R if y >= R_AT_ZERO => return Ok(0.0),
        LinkKind::R if y <= 0.0 => return Ok(1.0),
        _ => {}
    }
    let increasing = kind == LinkKind::G;
    let (mut a, mut b) = (0.0_f64, if increasing { KAPPA_MAX } else { 1.0 });
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let v = kind.eval(mid)?;
        if (v < y) == increasing {
            a = mid;
        } else {
            b = mid;
        }
    }
    // Return whichever bracket end matches best.
    let fa = (kind.eval(a)? - y).abs();
    let fb = (kind.eval(b)? - y).abs();
    Ok(if fa <= fb { a } else { b })
}

/// Tabulated link function, for plotting and for cheap monotonicity checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkFunctionTable {
    pub kind: LinkKind,
    pub knots: Vec<(f64, f64)>,
}

impl LinkFunctionTable {
    /// `n` equispaced knots on `[0, KAPPA_MAX]`.
    pub fn new(kind: LinkKind, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("a link table needs at least two knots"));
        }
        let knots = (0..n)
            .map(|i| {
                let kappa = KAPPA_MAX * i as f64 / (n - 1) as f64;
                kind.eval(kappa).map(|v| (kappa, v))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind, knots })
    }

    /// True when the tabulated values are strictly monotone in the expected direction.
    pub fn is_strictly_monotone(&self) -> bool {
        self.knots.windows(2).all(|w| match self.kind {
            LinkKind::G => w[1].1 > w[0].1,
            LinkKind::R => w[1].1 < w[0].1,
        })
    }
}
