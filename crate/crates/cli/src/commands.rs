//! Subcommand arguments and implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use aniso_core::elliptic::{LinkFunctionTable, LinkKind};
use aniso_core::estimators::{estimate_contour_2d, estimate_oracle_grad, estimate_palm_hd, PalmHdOptions};
use aniso_core::field_sim::{a_from_kappa, FieldSimulator, SimConfig};
use aniso_core::inversion_hd::{invert_palm, GdBox};
use aniso_core::io::{to_json_pretty, write_csv_grid, write_grf1};
use aniso_core::isotropy_test::{chi2_contour_test, run_calibration_power, PowerConfig, PowerStudy};
use aniso_core::lkc::estimate_kappa_lkc;
use aniso_core::pipeline::{
    analyze_field, analyze_mask, combined_estimate, lkc_estimate_record, AnalysisOptions, LevelAnalysis,
};
use aniso_core::sphere::{SphereQuadrature, DEFAULT_SPHERE_SEED};
use aniso_core::{Error, FieldGrid, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::input::{load_field, to_mask, InputFormat};

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridFormat {
    Auto,
    Grf1,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 512)]
    pub rows: usize,
    #[arg(long, default_value_t = 512)]
    pub cols: usize,
    /// Side length of the square observation window.
    #[arg(long, default_value_t = 100.0)]
    pub domain: f64,
    /// Anisotropy ratio κ in [0, 1); converted to a = (1 − κ²)^(−1/4).
    #[arg(long, conflicts_with = "a")]
    pub kappa: Option<f64>,
    /// Anisotropy scale a > 0.
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta0: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Circulant embedding padding factor.
    #[arg(long, default_value_t = 2)]
    pub pad: usize,
    #[arg(long, value_enum, default_value_t = GridFormat::Auto)]
    pub format: GridFormat,
    #[arg(long)]
    pub out: PathBuf,
}

impl SimulateArgs {
    pub fn resolve(&mut self) -> Result<()> {
        if self.a.is_none() {
            self.a = Some(a_from_kappa(self.kappa.unwrap_or(0.0))?);
        }
        Ok(())
    }

    fn config(&self) -> SimConfig {
        SimConfig {
            grid_rows: self.rows,
            grid_cols: self.cols,
            domain_size: self.domain,
            a: self.a.unwrap_or(1.0),
            theta0: self.theta0,
            mean: self.mu,
            std: self.sigma,
            seed: self.seed,
            pad_factor: self.pad,
        }
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let sim = FieldSimulator::new(&args.config())?;
    let grid = sim.simulate();
    let csv = match args.format {
        GridFormat::Csv => true,
        GridFormat::Grf1 => false,
        GridFormat::Auto => args.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")),
    };
    if csv {
        write_csv_grid(&args.out, &grid)?;
    } else {
        write_grf1(&args.out, &grid)?;
    }
    // Roundoff-level negatives are expected; only a real embedding failure is reported.
    if sim.clipped.1 < -1e-10 {
        eprintln!(
            "warning: {} negative embedding eigenvalues clipped (most negative {:e} relative to the largest)",
            sim.clipped.0, sim.clipped.1
        );
    }
    Ok(())
}

/// Input selection shared by `estimate` and `test`.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InputArgs {
    /// GRF1, CSV or 8-bit grayscale PNG/PGM file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    pub input_format: InputFormat,
    /// Pixel spacing for CSV and image input.
    #[arg(long, default_value_t = 1.0)]
    pub dx: f64,
    #[arg(long, default_value_t = 1.0)]
    pub dy: f64,
    /// Level u; required for field input.
    #[arg(long, allow_negative_numbers = true)]
    pub level: Option<f64>,
    /// Treat the input as an excursion image (non-zero pixels inside); the boundary is taken at 0.5.
    #[arg(long)]
    pub binary: bool,
    /// Gaussian smoothing radius in pixels for binary input.
    #[arg(long, default_value_t = 0.0)]
    pub smoothing: f64,
    /// Number of resampled contour points.
    #[arg(long, default_value_t = aniso_core::pipeline::DEFAULT_POINTS)]
    pub points: usize,
}

impl InputArgs {
    fn load(&self) -> Result<FieldGrid> {
        load_field(&self.input, self.input_format, self.dx, self.dy)
    }

    fn analyze(&self, grid: &FieldGrid, blocks: Vec<usize>) -> Result<LevelAnalysis> {
        let options = AnalysisOptions { points: self.points, blocks };
        if self.binary {
            analyze_mask(&to_mask(grid)?, self.smoothing, &options)
        } else {
            let level =
                self.level.ok_or_else(|| Error::InvalidArgument("--level is required for field input".into()))?;
            analyze_field(grid, level, &options)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMethod {
    Contour,
    Lkc,
    Combined,
    Oracle,
    PalmHd,
    All,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = EstimateMethod::All)]
    pub method: EstimateMethod,
    /// Weight of the LKC term in the combined estimator.
    #[arg(long, default_value_t = 0.5)]
    pub alpha1: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn estimate(args: &EstimateArgs) -> Result<()> {
    let grid = args.input.load()?;
    let analysis = args.input.analyze(&grid, Vec::new())?;
    let methods: Vec<EstimateMethod> = match args.method {
        EstimateMethod::All => {
            let mut m = vec![EstimateMethod::Contour, EstimateMethod::Lkc, EstimateMethod::Combined];
            if !args.input.binary {
                m.push(EstimateMethod::Oracle);
            }
            m.push(EstimateMethod::PalmHd);
            m
        }
        m => vec![m],
    };
    let mut estimates = Vec::new();
    let mut failures = serde_json::Map::new();
    let mut last_error = None;
    for method in &methods {
        let result = match method {
            EstimateMethod::Contour => estimate_contour_2d(&analysis.palm),
            EstimateMethod::Lkc => estimate_kappa_lkc(&analysis.lkc).map(|e| lkc_estimate_record(&e)),
            EstimateMethod::Combined => combined_estimate(&analysis, args.alpha1),
            EstimateMethod::Oracle if args.input.binary => {
                Err(Error::InvalidArgument("the gradient oracle needs field input".into()))
            }
            EstimateMethod::Oracle => estimate_oracle_grad(&grid),
            EstimateMethod::PalmHd => {
                estimate_palm_hd(&analysis.palm, &SphereQuadrature::new(2)?, &PalmHdOptions::default())
            }
            EstimateMethod::All => unreachable!(),
        };
        match result {
            Ok(e) => estimates.push(e),
            Err(e) => {
                let name = serde_json::to_value(method)?.as_str().unwrap_or_default().to_string();
                failures.insert(name, json!(e.to_string()));
                last_error = Some(e);
            }
        }
    }
    if estimates.is_empty() {
        return Err(last_error.expect("at least one method ran"));
    }
    let report = json!({
        "level": analysis.level,
        "n_paths": analysis.n_paths,
        "n_closed": analysis.n_closed,
        "estimates": estimates,
        "failures": failures,
        "palm_summary": analysis.palm,
        "lkc_summary": analysis.lkc,
    });
    write_output(args.out.as_deref(), &to_json_pretty(&report)?)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// The window is split into N × N blocks.
    #[arg(long, default_value_t = 10)]
    pub blocks: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn test(args: &TestArgs) -> Result<()> {
    if args.blocks < 2 {
        return Err(Error::InvalidArgument(format!("--blocks must give N^2 >= 4, got N = {}", args.blocks)));
    }
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("--alpha must lie in (0, 1), got {}", args.alpha)));
    }
    let grid = args.input.load()?;
    let analysis = args.input.analyze(&grid, vec![args.blocks])?;
    let result = chi2_contour_test(&analysis.palm, &analysis.cells[0])?;
    let mut report = serde_json::to_value(&result)?;
    report["alpha"] = json!(args.alpha);
    report["reject"] = json!(result.rejects(args.alpha));
    report["level"] = json!(analysis.level);
    write_output(args.out.as_deref(), &to_json_pretty(&report)?)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PowerArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.5])]
    pub kappas: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = vec![0.0])]
    pub levels: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![10])]
    pub blocks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.01, 0.05, 0.1])]
    pub alphas: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, default_value_t = 512)]
    pub rows: usize,
    #[arg(long, default_value_t = 100.0)]
    pub domain: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub theta0: f64,
    #[arg(long, default_value_t = 200_000)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Null simulations for the model-based tests (0 disables them).
    #[arg(long, default_value_t = 0)]
    pub mb_null_reps: usize,
    /// Rejection-rate table (CSV).
    #[arg(long)]
    pub out: PathBuf,
    /// Empirical p-value CDFs, one gnuplot data block per configuration.
    #[arg(long)]
    pub pvalues_out: Option<PathBuf>,
}

pub fn power(args: &PowerArgs) -> Result<()> {
    let config = PowerConfig {
        kappas: args.kappas.clone(),
        levels: args.levels.clone(),
        blocks: args.blocks.clone(),
        n_reps: args.reps,
        rows: args.rows,
        cols: args.rows,
        domain: args.domain,
        theta0: args.theta0,
        points: args.points,
        seed: args.seed,
        mb_null_reps: args.mb_null_reps,
        alphas: args.alphas.clone(),
    };
    let study = run_calibration_power(&config)?;
    std::fs::write(&args.out, power_table_csv(&study))?;
    if let Some(p) = &args.pvalues_out {
        std::fs::write(p, pvalue_cdf_blocks(&study))?;
    }
    Ok(())
}

pub fn power_table_csv(study: &PowerStudy) -> String {
    let mut s = String::from("method,kappa,u,N,level,rejection_rate,ks_distance,n_reps,n_failed\n");
    for r in &study.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.method, r.kappa, r.u, r.n, r.level, r.rejection_rate, r.ks_distance, r.n_reps, r.n_failed
        );
    }
    s
}

/// Method, κ, level and partition side identifying one p-value sample.
type PValueKey = (String, f64, f64, usize);

/// Sorted p-values with their empirical CDF, blocks separated by two blank
/// lines so gnuplot can address them with `index`.
pub fn pvalue_cdf_blocks(study: &PowerStudy) -> String {
    let mut groups: Vec<(PValueKey, Vec<f64>)> = Vec::new();
    for r in &study.p_values {
        let key = (r.method.clone(), r.kappa, r.u, r.n);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r.p_value),
            None => groups.push((key, vec![r.p_value])),
        }
    }
    let mut s = String::new();
    for (i, ((method, kappa, u, n), mut p)) in groups.into_iter().enumerate() {
        if i > 0 {
            s.push_str("\n\n");
        }
        let _ = writeln!(s, "# method={method} kappa={kappa} u={u} N={n}");
        s.push_str("p_value,ecdf\n");
        p.sort_by(f64::total_cmp);
        let m = p.len() as f64;
        for (k, v) in p.iter().enumerate() {
            let _ = writeln!(s, "{v},{}", (k + 1) as f64 / m);
        }
    }
    s
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InvertHdArgs {
    /// Normal-covariance eigenvalues Z as a JSON array, or @path to a JSON file.
    #[arg(long)]
    pub z: String,
    /// Box [a, b] for the descent; defaults to [1/(2r²), 2r²] from --conditioning.
    #[arg(long, requires = "box_b")]
    pub box_a: Option<f64>,
    #[arg(long, requires = "box_a")]
    pub box_b: Option<f64>,
    #[arg(long, default_value_t = 3.0)]
    pub conditioning: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 5_000_000)]
    pub max_iter: usize,
    /// Seed of the Monte-Carlo sphere quadrature (dimension 4 and above).
    #[arg(long, default_value_t = DEFAULT_SPHERE_SEED)]
    pub seed: u64,
    /// Include every iterate in the report.
    #[arg(long)]
    pub iterates: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn invert_hd(args: &InvertHdArgs) -> Result<()> {
    let text = match args.z.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path)?,
        None => args.z.clone(),
    };
    let z: Vec<f64> = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidArgument(format!("--z must be a JSON array of numbers: {e}")))?;
    let gd_box = match (args.box_a, args.box_b) {
        (Some(a), Some(b)) => GdBox::new(a, b)?,
        _ => GdBox::from_conditioning(args.conditioning)?,
    };
    if z.len() < 2 {
        return Err(Error::InvalidArgument("--z needs at least two entries".into()));
    }
    let quad = SphereQuadrature::with_seed(z.len(), args.seed)?;
    let inv = invert_palm(&z, gd_box, &quad, args.tol, args.max_iter)?;
    let r = &inv.report;
    let mut report = json!({
        "iterations": r.iterations(),
        "step": r.step,
        "alpha": r.alpha,
        "beta": r.beta,
        "Q": r.q,
        "converged": r.converged,
        "final_residual": r.final_residual,
        "final_iterate": r.final_iterate(),
    });
    if args.iterates {
        report["iterates"] = json!(r.iterates);
    }
    let out = json!({
        "kappa": inv.kappa,
        "pi_hat": inv.pi_hat,
        "permutation": inv.permutation,
        "box": gd_box,
        "report": report,
    });
    write_output(args.out.as_deref(), &to_json_pretty(&out)?)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LinkTableArgs {
    /// Number of equispaced κ knots on [0, 1).
    #[arg(long, default_value_t = 1001)]
    pub n: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn link_table(args: &LinkTableArgs) -> Result<()> {
    let g = LinkFunctionTable::new(LinkKind::G, args.n)?;
    let r = LinkFunctionTable::new(LinkKind::R, args.n)?;
    let mut s = String::from("kappa,g,R\n");
    for ((k, gv), (_, rv)) in g.knots.iter().zip(&r.knots) {
        let _ = writeln!(s, "{k},{gv},{rv}");
    }
    write_output(args.out.as_deref(), &s)
}
