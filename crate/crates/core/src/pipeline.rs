//! Per-level analysis shared by the CLI, the calibration harness and the
//! Monte-Carlo tests: extraction, resampling, contour integrals, block
//! integrals and excursion-set curvatures.

use serde::{Deserialize, Serialize};

use crate::contour::{extract_binary_boundary, extract_level_set, resample_and_normals, ContourSet};
use crate::error::{Error, Result};
use crate::estimators::{estimate_contour_2d, AnisotropyEstimate, DirectionEstimate, KappaEstimate, Method};
use crate::grid::{BinaryMask, FieldGrid};
use crate::lkc::{combine_estimates, estimate_kappa_lkc, lkc_summarize, LkcEstimate, LkcSummary};
use crate::palm::{cell_stats, summarize, CellStats, PalmSummary};

/// Default number of resampled contour points.
pub const DEFAULT_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub points: usize,
    /// Block partition sizes for which cell integrals are kept.
    pub blocks: Vec<usize>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { points: DEFAULT_POINTS, blocks: vec![10] }
    }
}

/// Everything the estimators and the test need from one level set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAnalysis {
    pub level: f64,
    pub n_paths: usize,
    pub n_closed: usize,
    pub palm: PalmSummary,
    pub cells: Vec<CellStats>,
    pub lkc: LkcSummary,
}

impl LevelAnalysis {
    pub fn cells_for(&self, n: usize) -> Option<&CellStats> {
        self.cells.iter().find(|c| c.grid_n == n)
    }
}

/// Contours of `{X = level}` resampled with `points` points.
pub fn level_contours(grid: &FieldGrid, level: f64, points: usize) -> Result<ContourSet> {
    let paths = extract_level_set(grid, level)?;
    if paths.is_empty() {
        return Err(Error::EmptyLevelSet(level));
    }
    resample_and_normals(&paths, points, level)
}

fn analyze(contours: &ContourSet, mask: &BinaryMask, options: &AnalysisOptions) -> Result<LevelAnalysis> {
    let palm = summarize(contours)?;
    let window = mask.window();
    let cells = options.blocks.iter().map(|&n| cell_stats(contours, &window, n)).collect::<Result<Vec<_>>>()?;
    let lkc = lkc_summarize(mask, contours)?;
    Ok(LevelAnalysis {
        level: contours.level,
        n_paths: contours.paths.len(),
        n_closed: contours.paths.iter().filter(|p| p.closed).count(),
        palm,
        cells,
        lkc,
    })
}

/// Analysis of a field observed at `level`.
pub fn analyze_field(grid: &FieldGrid, level: f64, options: &AnalysisOptions) -> Result<LevelAnalysis> {
    let contours = level_contours(grid, level, options.points)?;
    analyze(&contours, &BinaryMask::threshold(grid, level), options)
}

/// Analysis of a binary excursion image (boundary at 0.5 of the optionally blurred indicator).
pub fn analyze_mask(mask: &BinaryMask, smoothing: f64, options: &AnalysisOptions) -> Result<LevelAnalysis> {
    let paths = extract_binary_boundary(mask, smoothing)?;
    if paths.is_empty() {
        return Err(Error::EmptyLevelSet(0.5));
    }
    let contours = resample_and_normals(&paths, options.points, 0.5)?;
    analyze(&contours, mask, options)
}

/// The LKC estimate as an [`AnisotropyEstimate`].
pub fn lkc_estimate_record(lkc: &LkcEstimate) -> AnisotropyEstimate {
    let mut diagnostics = std::collections::BTreeMap::new();
    diagnostics.insert("R_hat".to_string(), lkc.r_hat);
    diagnostics.insert("P_hat".to_string(), lkc.p_hat);
    diagnostics.insert("GC_hat".to_string(), lkc.gc_hat);
    let flags = if lkc.truncated { vec!["truncated".to_string()] } else { Vec::new() };
    AnisotropyEstimate {
        method: Method::Lkc,
        kappa: KappaEstimate::Scalar(lkc.kappa),
        theta0: DirectionEstimate::Unavailable,
        f_stat: f64::NAN,
        diagnostics,
        flags,
    }
}

/// Combined Contour/LKC estimate with weight `alpha1` on the LKC term; the
/// direction is the Contour one.
pub fn combined_estimate(analysis: &LevelAnalysis, alpha1: f64) -> Result<AnisotropyEstimate> {
    let contour = estimate_contour_2d(&analysis.palm)?;
    let lkc = estimate_kappa_lkc(&analysis.lkc)?;
    let kappa = combine_estimates(lkc.r_hat, contour.f_stat, alpha1)?;
    let mut diagnostics = std::collections::BTreeMap::new();
    diagnostics.insert("alpha1".to_string(), alpha1);
    diagnostics.insert("R_hat".to_string(), lkc.r_hat);
    Ok(AnisotropyEstimate {
        method: Method::Combined,
        kappa: KappaEstimate::Scalar(kappa),
        theta0: contour.theta0,
        f_stat: contour.f_stat,
        diagnostics,
        flags: Vec::new(),
    })
}
