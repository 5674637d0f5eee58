//! Deterministic quadrature rules for the uniform probability measure η on the
//! unit sphere `S^{d−1}`.
//!
//! Every rule is symmetric under all coordinate sign flips, so it is stored
//! as representatives in the closed positive orthant: a representative `z`
//! with weight `w` stands for the `2^d` points `(±z₁, …, ±z_d)` sharing `w`
//! in total. Integrands that depend on the coordinates only through their
//! squares (all of the Palm machinery) are evaluated on the representatives
//! directly; [`SphereQuadrature::integrate`] expands the sign flips so odd
//! moments vanish exactly.
//!
//! * `d = 2`: 128 Gauss–Legendre angles on `[0, π/2]` (512 nodes on the circle).
//! * `d = 3`: 64 Gauss–Legendre nodes in `cos ϑ` times 128 in the azimuth.
//! * `d ≥ 4`: seeded Monte Carlo, also symmetrised over coordinate
//!   permutations, `2¹⁸` representatives; accuracy about 1e−4.

use std::f64::consts::{FRAC_PI_2, PI};

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::rng::{stream_rng, Stream};

/// Seed of the Monte-Carlo rules when the caller does not choose one.
pub const DEFAULT_SPHERE_SEED: u64 = 0x5eed_5fe7_e000_0001;

const MC_REPRESENTATIVES: usize = 1 << 18;

#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    d: usize,
    /// Positive-orthant representatives, unit norm.
    nodes: Vec<Vec<f64>>,
    /// Weights of the representatives, summing to 1.
    weights: Vec<f64>,
    /// Row-major squared coordinates of `nodes`.
    squares: Vec<f64>,
}

impl SphereQuadrature {
    /// The default rule for dimension `d`.
    pub fn new(d: usize) -> Result<Self> {
        Self::with_seed(d, DEFAULT_SPHERE_SEED)
    }

    /// As [`new`](Self::new); `seed` only affects the Monte-Carlo rules (`d ≥ 4`).
    pub fn with_seed(d: usize, seed: u64) -> Result<Self> {
        let (nodes, weights) = match d {
            0 | 1 => return Err(Error::invalid(format!("sphere dimension must be >= 2, got {d}"))),
            2 => circle_rule(),
            3 => sphere3_rule(),
            _ => monte_carlo_rule(d, seed),
        };
        let squares = nodes.iter().flat_map(|z| z.iter().map(|v| v * v)).collect();
        Ok(Self { d, nodes, weights, squares })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Squared coordinates of the representatives, row-major `len() × d`.
    pub fn squares(&self) -> &[f64] {
        &self.squares
    }

    /// `∫ f dη` for `f` even in every coordinate, evaluated on the representatives.
    pub fn integrate_even(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(z, w)| w * f(z)).sum()
    }

    /// `∫ f dη` for arbitrary `f`, expanding all sign flips.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let flips = 1usize << self.d;
        let scale = 1.0 / flips as f64;
        let mut z = vec![0.0; self.d];
        let mut total = 0.0;
        for (rep, w) in self.nodes.iter().zip(&self.weights) {
            let mut acc = 0.0;
            for mask in 0..flips {
                for (k, zk) in z.iter_mut().enumerate() {
                    *zk = if mask >> k & 1 == 1 { -rep[k] } else { rep[k] };
                }
                acc += f(&z);
            }
            total += w * scale * acc;
        }
        total
    }

    /// `∫ z₁⁴ dη`, exactly `3/(d(d+2))` for the exact measure.
    pub fn fourth_moment(&self) -> f64 {
        self.integrate_even(|z| z[0].powi(4))
    }
}

fn circle_rule() -> (Vec<Vec<f64>>, Vec<f64>) {
    let gl = GaussLegendre::new(128);
    gl.on_interval(0.0, FRAC_PI_2).map(|(t, w)| (vec![t.cos(), t.sin()], w * 4.0 / (2.0 * PI))).unzip()
}

fn sphere3_rule() -> (Vec<Vec<f64>>, Vec<f64>) {
    let polar = GaussLegendre::new(64);
    let azimuth = GaussLegendre::new(32);
    let mut nodes = Vec::with_capacity(32 * 32);
    let mut weights = Vec::with_capacity(32 * 32);
    for (u, wu) in polar.on_interval(-1.0, 1.0).filter(|(u, _)| *u > 0.0) {
        let rho = (1.0 - u * u).sqrt();
        for (phi, wphi) in azimuth.on_interval(0.0, FRAC_PI_2) {
            nodes.push(vec![rho * phi.cos(), rho * phi.sin(), u]);
            // Two hemispheres, four azimuthal quadrants, area 4π.
            weights.push(wu * wphi * 8.0 / (4.0 * PI));
        }
    }
    (nodes, weights)
}

fn monte_carlo_rule(d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let perms = permutations(d);
    let base = (MC_REPRESENTATIVES / perms.len()).max(1);
    let mut rng = stream_rng(seed ^ d as u64, Stream::SphereQuadrature);
    let total = base * perms.len();
    let w = 1.0 / total as f64;
    let mut nodes = Vec::with_capacity(total);
    for _ in 0..base {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f64>>();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let z: Vec<f64> = g.iter().map(|v| v.abs() / norm).collect();
        for p in &perms {
            nodes.push(p.iter().map(|&k| z[k]).collect());
        }
    }
    (nodes, vec![w; total])
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..d).collect();
    heap_permute(d, &mut current, &mut out);
    out
}

fn heap_permute(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(a.clone());
        return;
    }
    for i in 0..k - 1 {
        heap_permute(k - 1, a, out);
        if k.is_multiple_of(2) {
            a.swap(i, k - 1);
        } else {
            a.swap(0, k - 1);
        }
    }
    heap_permute(k - 1, a, out);
}
