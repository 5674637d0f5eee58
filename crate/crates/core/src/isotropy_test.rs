//! The χ²(2)-Contour isotropy test and the calibration/power harness.
//!
//! Under quasi-isotropy `(C, S)/√|T|` is asymptotically centred Gaussian with
//! covariance `V² Id`. Splitting the window into `N × N` blocks with raw
//! integrals `(C_i, S_i)` gives the variance estimate
//! `V̂² = Σ[(C_i − C̄)² + (S_i − S̄)²] / (2(N² − 1))` and the statistic
//! `Q = (C² + S²)/(N² V̂²)`, asymptotically χ²(2); the p-value is `e^{−Q/2}`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::estimate_contour_2d;
use crate::field_sim::{a_from_kappa, FieldSimulator, SimConfig};
use crate::lkc::estimate_kappa_lkc;
use crate::palm::{CellStats, PalmSummary};
use crate::pipeline::{analyze_field, AnalysisOptions};
use crate::rng::{replicate_seed, stream_rng, Stream};
use crate::special::ks_uniform;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotropyTestResult {
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "V2_hat")]
    pub v2_hat: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub p_value: f64,
    pub n_nonempty_cells: usize,
}

impl IsotropyTestResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// `F_{χ²(2)}(x) = 1 − e^{−x/2}`.
pub fn chi2_cdf_2dof(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("chi-squared argument must be >= 0, got {x}")));
    }
    Ok(-(-0.5 * x).exp_m1())
}

/// Block variance `V̂²` of raw cell integrals (empty cells count as zeros).
pub fn block_variance(cells: &CellStats) -> f64 {
    let m = cells.cells.len() as f64;
    let mc = cells.cells.iter().map(|c| c.c).sum::<f64>() / m;
    let ms = cells.cells.iter().map(|c| c.s).sum::<f64>() / m;
    let ss: f64 = cells.cells.iter().map(|c| (c.c - mc).powi(2) + (c.s - ms).powi(2)).sum();
    ss / (2.0 * (m - 1.0))
}

/// Test statistic from the global integrals `(c, s)` and the block integrals.
pub fn chi2_statistic(c: f64, s: f64, cells: &CellStats) -> Result<IsotropyTestResult> {
    let n = cells.grid_n;
    if n * n < 4 || cells.cells.len() != n * n {
        return Err(Error::invalid(format!("the block partition needs N^2 >= 4 cells, got N = {n}")));
    }
    let nonempty = cells.n_nonempty();
    if nonempty < 2 {
        return Err(Error::Degenerate(format!("only {nonempty} non-empty block(s)")));
    }
    let v2 = block_variance(cells);
    if !(v2 > 0.0) || !v2.is_finite() {
        return Err(Error::Degenerate("block variance is zero".into()));
    }
    let q = (c * c + s * s) / ((n * n) as f64 * v2);
    Ok(IsotropyTestResult { q, v2_hat: v2, n, p_value: (-0.5 * q).exp(), n_nonempty_cells: nonempty })
}

/// The χ²(2)-Contour test for a planar level set.
pub fn chi2_contour_test(summary: &PalmSummary, cells: &CellStats) -> Result<IsotropyTestResult> {
    chi2_statistic(summary.c, summary.s, cells)
}

/// One configuration grid of the calibration/power study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub kappas: Vec<f64>,
    pub levels: Vec<f64>,
    pub blocks: Vec<usize>,
    pub n_reps: usize,
    pub rows: usize,
    pub cols: usize,
    pub domain: f64,
    pub theta0: f64,
    pub points: usize,
    pub seed: u64,
    /// Null simulations for the model-based variants; 0 disables them.
    pub mb_null_reps: usize,
    pub alphas: Vec<f64>,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            kappas: vec![0.0, 0.5],
            levels: vec![0.0],
            blocks: vec![10],
            n_reps: 200,
            rows: 512,
            cols: 512,
            domain: 100.0,
            theta0: 1.0,
            points: 200_000,
            seed: 0,
            mb_null_reps: 0,
            alphas: vec![0.01, 0.05, 0.1],
        }
    }
}

/// One row of the power table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub method: String,
    pub kappa: f64,
    pub u: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub level: f64,
    pub rejection_rate: f64,
    pub ks_distance: f64,
    pub n_reps: usize,
    pub n_failed: usize,
}

/// A single p-value, for empirical CDF plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueRecord {
    pub method: String,
    pub kappa: f64,
    pub u: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub rep: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerStudy {
    pub rows: Vec<PowerRow>,
    pub p_values: Vec<PValueRecord>,
}

/// Per-replicate, per-level outcome.
#[derive(Debug, Clone)]
struct LevelOutcome {
    chi2: Vec<Option<f64>>,
    f_stat: Option<f64>,
    r_hat: Option<f64>,
}

fn replicate(sim: &FieldSimulator, seed: u64, config: &PowerConfig) -> Vec<LevelOutcome> {
    let grid = sim.simulate_seed(seed);
    let options = AnalysisOptions { points: config.points, blocks: config.blocks.clone() };
    config
        .levels
        .iter()
        .map(|&u| match analyze_field(&grid, u, &options) {
            Ok(a) => LevelOutcome {
                chi2: a.cells.iter().map(|cells| chi2_contour_test(&a.palm, cells).ok().map(|t| t.p_value)).collect(),
                f_stat: estimate_contour_2d(&a.palm).ok().map(|e| e.f_stat),
                r_hat: estimate_kappa_lkc(&a.lkc).ok().map(|e| e.r_hat),
            },
            Err(_) => LevelOutcome { chi2: vec![None; config.blocks.len()], f_stat: None, r_hat: None },
        })
        .collect()
}

fn sim_config(config: &PowerConfig, kappa: f64) -> Result<SimConfig> {
    Ok(SimConfig {
        grid_rows: config.rows,
        grid_cols: config.cols,
        domain_size: config.domain,
        a: a_from_kappa(kappa)?,
        theta0: config.theta0,
        ..SimConfig::default()
    })
}

#[allow(clippy::too_many_arguments)]
fn summarize_p(
    method: &str,
    kappa: f64,
    u: f64,
    n: usize,
    p: &[Option<f64>],
    alphas: &[f64],
    rows: &mut Vec<PowerRow>,
    records: &mut Vec<PValueRecord>,
) {
    let ok: Vec<f64> = p.iter().flatten().cloned().collect();
    let failed = p.len() - ok.len();
    let ks = if ok.is_empty() { f64::NAN } else { ks_uniform(&ok) };
    for &alpha in alphas {
        let rate =
            if ok.is_empty() { f64::NAN } else { ok.iter().filter(|&&v| v < alpha).count() as f64 / ok.len() as f64 };
        rows.push(PowerRow {
            method: method.to_string(),
            kappa,
            u,
            n,
            level: alpha,
            rejection_rate: rate,
            ks_distance: ks,
            n_reps: ok.len(),
            n_failed: failed,
        });
    }
    for (rep, v) in p.iter().enumerate() {
        if let Some(v) = v {
            records.push(PValueRecord { method: method.to_string(), kappa, u, n, rep, p_value: *v });
        }
    }
}

/// Empirical upper-tail p-value `(1 + #{null ≥ x})/(n₀ + 1)`.
fn mc_p_upper(null: &[f64], x: f64) -> f64 {
    (1 + null.iter().filter(|&&v| v >= x).count()) as f64 / (null.len() + 1) as f64
}

/// Empirical lower-tail p-value `(1 + #{null ≤ x})/(n₀ + 1)`.
fn mc_p_lower(null: &[f64], x: f64) -> f64 {
    (1 + null.iter().filter(|&&v| v <= x).count()) as f64 / (null.len() + 1) as f64
}

/// Simulates `n_reps` fields per κ, runs the χ²(2)-Contour test at every
/// `(u, N)`, and optionally the model-based variants whose null laws of `F`
/// (upper tail) and `R̂` (lower tail) come from `mb_null_reps` isotropic
/// simulations. Per-replicate failures are counted, not fatal.
pub fn run_calibration_power(config: &PowerConfig) -> Result<PowerStudy> {
    if config.n_reps < 50 {
        return Err(Error::invalid(format!("n_reps must be >= 50, got {}", config.n_reps)));
    }
    if config.blocks.iter().any(|&n| n < 2) {
        return Err(Error::invalid("block partitions need N >= 2"));
    }
    let mut rows = Vec::new();
    let mut records = Vec::new();

    let null: Option<Vec<Vec<LevelOutcome>>> = if config.mb_null_reps > 0 {
        let sim = FieldSimulator::new(&sim_config(config, 0.0)?)?;
        let base: u64 = stream_rng(config.seed, Stream::NullSimulation).random();
        Some(
            (0..config.mb_null_reps)
                .into_par_iter()
                .map(|i| replicate(&sim, replicate_seed(base, i as u64), config))
                .collect(),
        )
    } else {
        None
    };

    for &kappa in &config.kappas {
        let sim = FieldSimulator::new(&sim_config(config, kappa)?)?;
        let outcomes: Vec<Vec<LevelOutcome>> = (0..config.n_reps)
            .into_par_iter()
            .map(|r| replicate(&sim, replicate_seed(config.seed, r as u64), config))
            .collect();
        for (li, &u) in config.levels.iter().enumerate() {
            for (bi, &n) in config.blocks.iter().enumerate() {
                let p: Vec<Option<f64>> = outcomes.iter().map(|o| o[li].chi2[bi]).collect();
                summarize_p("chi2-contour", kappa, u, n, &p, &config.alphas, &mut rows, &mut records);
            }
            if let Some(null) = &null {
                let null_f: Vec<f64> = null.iter().filter_map(|o| o[li].f_stat).collect();
                let null_r: Vec<f64> = null.iter().filter_map(|o| o[li].r_hat).collect();
                let p_f: Vec<Option<f64>> = outcomes
                    .iter()
                    .map(|o| o[li].f_stat.filter(|_| !null_f.is_empty()).map(|f| mc_p_upper(&null_f, f)))
                    .collect();
                let p_r: Vec<Option<f64>> = outcomes
                    .iter()
                    .map(|o| o[li].r_hat.filter(|_| !null_r.is_empty()).map(|r| mc_p_lower(&null_r, r)))
                    .collect();
                summarize_p("mb-contour", kappa, u, 0, &p_f, &config.alphas, &mut rows, &mut records);
                summarize_p("mb-lkc", kappa, u, 0, &p_r, &config.alphas, &mut rows, &mut records);
            }
        }
    }
    Ok(PowerStudy { rows, p_values: records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::palm::CellStat;

    fn cells(values: &[(f64, f64)], n: usize) -> CellStats {
        CellStats { grid_n: n, cells: values.iter().map(|&(c, s)| CellStat { c, s, length: 1.0 }).collect() }
    }

    #[test]
    fn cdf_values() {
        assert_eq!(chi2_cdf_2dof(0.0).unwrap(), 0.0);
        let x = -2.0 * 0.05f64.ln();
        assert!((chi2_cdf_2dof(x).unwrap() - 0.95).abs() < 1e-15);
        assert!(chi2_cdf_2dof(20.0).unwrap() > 0.99995);
        assert!(chi2_cdf_2dof(-1.0).is_err());
        let mut prev = 0.0;
        for k in 1..100 {
            let v = chi2_cdf_2dof(k as f64 * 0.3).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn equal_cells_are_degenerate() {
        let c = cells(&[(1.0, 2.0); 4], 2);
        assert!(matches!(chi2_statistic(4.0, 8.0, &c), Err(Error::Degenerate(_))));
    }

    #[test]
    fn single_block_is_rejected() {
        let c = cells(&[(1.0, 2.0)], 1);
        assert!(chi2_statistic(1.0, 2.0, &c).is_err());
    }

    #[test]
    fn p_value_is_exponential_tail() {
        let c = cells(&[(1.0, 0.5), (-0.3, 0.2), (0.4, -1.0), (0.0, 0.1)], 2);
        let t = chi2_statistic(1.1, -0.2, &c).unwrap();
        assert!((t.p_value - (-t.q / 2.0).exp()).abs() < 1e-12);
        assert!((t.p_value - (1.0 - chi2_cdf_2dof(t.q).unwrap())).abs() < 1e-12);
    }

    #[test]
    fn statistic_is_scale_invariant() {
        let v = [(1.0, 0.5), (-0.3, 0.2), (0.4, -1.0), (0.0, 0.1)];
        let base = chi2_statistic(1.1, -0.2, &cells(&v, 2)).unwrap();
        let scaled: Vec<(f64, f64)> = v.iter().map(|&(c, s)| (8.0 * c, 8.0 * s)).collect();
        let t = chi2_statistic(8.8, -1.6, &cells(&scaled, 2)).unwrap();
        assert_eq!(t.q, base.q);
    }
}
