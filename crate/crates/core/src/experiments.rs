//! Monte Carlo sweeps over the top frequency `n`: excursion-area moments,
//! chaos projections, the log–log variance exponent and the normality test
//! of the standardised area.
//!
//! Replicates run in parallel, each on its own random stream, and are
//! collected in replicate order; every reduction after that is sequential.
//! A result therefore depends on the configuration and master seed only,
//! never on the number of worker threads.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::{
    chaos_projections, chaos_weight, excursion_area, expected_area, h2_exact_from_coeffs, h2_sample_direct,
    leading_area_variance,
};
use crate::error::{Error, Result};
use crate::field_model::{sample_coefficients, BandRounding, Ensemble, FieldSpec, Synthesizer};
use crate::rng::{bootstrap_stream, replicate_stream, stream_rng};
use crate::specfun::{gaussian_cdf, gaussian_pdf};
use crate::sphere_grid::SphereGrid;
use crate::stats;

/// Tolerance on `h_2` by quadrature against `h_2` from the coefficients.
pub const H2_IDENTITY_TOL: f64 = 1e-8;

/// Allowed distance of the fitted exponent from `−(2 − β)`.
pub const EXPONENT_TOL: f64 = 0.15;

/// Accepted band for `Var̂ S / (u² φ(u)²/4 · 2(4π)²/D)`.
pub const LEADING_RATIO_BAND: (f64, f64) = (0.85, 1.15);

/// Allowed spread `max/min` of the rescaled higher-chaos variances.
pub const HIGHER_CHAOS_BAND: f64 = 3.0;

/// Smallest replicate count for which variances are reported.
pub const MIN_REPLICATES: usize = 100;

/// Smallest sample accepted by [`clt_test`].
pub const MIN_CLT_SAMPLES: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMode {
    /// Synthesise each field on a grid and integrate functionals of it.
    #[default]
    FieldFull,
    /// Draw `h_2` from its chi-square law; no field, no area.
    H2Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_list: Vec<usize>,
    pub beta: f64,
    pub u: f64,
    pub replicates: usize,
    pub master_seed: u64,
    pub oversample: f64,
    pub mode: SimulationMode,
    pub q_max: usize,
    pub rounding: BandRounding,
    pub ensemble: Ensemble,
    pub bootstrap_resamples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_list: vec![64, 128, 256],
            beta: 0.5,
            u: 1.0,
            replicates: 2000,
            master_seed: 42,
            oversample: 4.0,
            mode: SimulationMode::FieldFull,
            q_max: 4,
            rounding: BandRounding::Ceil,
            ensemble: Ensemble::BandLimited,
            bootstrap_resamples: 1000,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_list.is_empty() {
            return bad("n_list is empty".into());
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("n_list must be strictly increasing, got {:?}", self.n_list));
        }
        if self.replicates < MIN_REPLICATES {
            return bad(format!(
                "at least {MIN_REPLICATES} replicates are needed, got {}",
                self.replicates
            ));
        }
        if !self.u.is_finite() {
            return bad(format!("threshold u must be finite, got {}", self.u));
        }
        if !(self.oversample.is_finite() && self.oversample >= 1.0) {
            return bad(format!("oversample must be ≥ 1, got {}", self.oversample));
        }
        if self.q_max < 2 {
            return bad(format!("q_max must be at least 2, got {}", self.q_max));
        }
        if self.bootstrap_resamples < 2 {
            return bad("bootstrap needs at least two resamples".into());
        }
        for &n in &self.n_list {
            self.spec_for(n)?;
        }
        Ok(())
    }

    pub fn spec_for(&self, n: usize) -> Result<FieldSpec> {
        match self.ensemble {
            Ensemble::BandLimited => FieldSpec::with_rounding(n, self.beta, self.rounding),
            Ensemble::SingleDegree => FieldSpec::single_degree(n),
            Ensemble::FullBand => FieldSpec::full_band(n),
        }
    }

    /// Grid degree used for top frequency `n`: `⌈oversample·n⌉`, never
    /// below `2n` so the second chaos is integrated exactly.
    pub fn grid_degree(&self, n: usize) -> usize {
        ((self.oversample * n as f64).ceil() as usize).max(2 * n)
    }

    /// The exponent `−(2 − β)` of the variance law.
    pub fn predicted_exponent(&self) -> f64 {
        -(2.0 - self.beta)
    }
}

/// Functionals of one replicate. Quantities that the mode does not
/// produce are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    /// Random stream the replicate was drawn from.
    pub seed: u64,
    pub u: f64,
    pub area: Option<f64>,
    /// `h_1 ..= h_{q_max}` by quadrature.
    pub h_quad: Vec<f64>,
    pub h2_exact: f64,
}

impl ReplicateRecord {
    fn h(&self, q: usize) -> Option<f64> {
        self.h_quad.get(q.checked_sub(1)?).copied()
    }
}

pub const REPLICATE_HEADER: &str = "replicate,seed,u,area,h1,h2_quad,h2_exact,h3,h4";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// Writes replicate records as CSV under [`REPLICATE_HEADER`].
pub fn write_replicates_csv<W: Write>(records: &[ReplicateRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{REPLICATE_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{:.16e},{},{},{},{:.16e},{},{}",
            r.replicate,
            r.seed,
            r.u,
            fmt_opt(r.area),
            fmt_opt(r.h(1)),
            fmt_opt(r.h(2)),
            r.h2_exact,
            fmt_opt(r.h(3)),
            fmt_opt(r.h(4)),
        )?;
    }
    Ok(())
}

/// An estimate with its bootstrap standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HigherChaos {
    pub q: usize,
    pub variance: Estimate,
    /// `Var̂ h_q · n²`, divided by `ln n` for `q = 4`.
    pub rescaled: f64,
    /// `(J_q(u)/q!)² Var̂ h_q / Var̂ S`
    pub share_of_area_variance: f64,
}

/// Outcome of the normality test of the standardised area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltOutcome {
    pub ks_stat: f64,
    pub critical: f64,
    pub pass: bool,
}

/// Area statistics of one row (field mode only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaStats {
    pub mean: Estimate,
    pub expected_mean: f64,
    pub variance: Estimate,
    /// `u² φ(u)²/4 · 2(4π)²/D`
    pub leading_prediction: f64,
    /// `Var̂ S / leading_prediction`
    pub leading_ratio: f64,
    /// `Var̂ S · 4/(u² φ(u)²) / Var̂ h_2`; tends to one when the second chaos
    /// carries the variance.
    pub dominance_ratio: f64,
    pub clt: Option<CltOutcome>,
    pub higher_chaos: Vec<HigherChaos>,
    /// Share of `Var̂ S` explained by `q = 2..=q_max`.
    pub explained_share: f64,
    /// `max |h_1|` over replicates.
    pub h1_max_abs: f64,
    /// `max |h_2(quadrature) − h_2(coefficients)|` over replicates.
    pub h2_identity_max_err: f64,
    /// Largest `q` whose projection the grid integrates exactly.
    pub resolved_q_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowStats {
    pub n: usize,
    pub ell_min: usize,
    pub dof: usize,
    pub replicates: usize,
    pub grid_degree: Option<usize>,
    pub var_h2: Estimate,
    pub var_h2_formula: f64,
    pub mean_h2: Estimate,
    pub area: Option<AreaStats>,
    /// Bootstrap replicates of `Var̂ S` (or of `Var̂ h_2` in direct mode),
    /// used for the exponent confidence interval.
    #[serde(skip)]
    pub bootstrap_log_var: Vec<f64>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl RowStats {
    /// The variance used for the scaling fit: `Var̂ S` in field mode,
    /// `Var̂ h_2` otherwise.
    pub fn fit_variance(&self) -> f64 {
        self.area
            .as_ref()
            .map_or(self.var_h2.value, |a| a.variance.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub stats: Option<RowStats>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Exponent implied by the leading prediction with the exact `D`.
    pub leading_slope: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    AreaMean,
    H2Variance,
    H2Identity,
    Clt,
    LeadingVariance,
    Exponent,
    HigherChaos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckFlag {
    pub kind: CheckKind,
    pub n: Option<usize>,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub rows: Vec<SweepRow>,
    pub fitted_exponent: Option<ExponentFit>,
    pub flags: Vec<CheckFlag>,
    /// Per-`n` replicate records, aligned with `rows`.
    #[serde(skip)]
    pub replicates: Vec<Vec<ReplicateRecord>>,
}

impl ExperimentResult {
    pub fn stats(&self) -> impl Iterator<Item = &RowStats> {
        self.rows.iter().filter_map(|r| r.stats.as_ref())
    }

    pub fn row(&self, n: usize) -> Option<&RowStats> {
        self.stats().find(|r| r.n == n)
    }

    /// Whether every flag of the given kinds passes (and no row failed).
    pub fn passes(&self, kinds: &[CheckKind]) -> bool {
        self.rows.iter().all(|r| r.error.is_none())
            && self
                .flags
                .iter()
                .filter(|f| kinds.contains(&f.kind))
                .all(|f| f.pass)
    }
}

/// One-sample KS test of the standardised sample against `N(0, 1)` at the
/// 1% level. The sample is standardised by its own mean and standard
/// deviation.
pub fn clt_test(samples: &[f64]) -> Result<CltOutcome> {
    if samples.len() < MIN_CLT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "the normality test needs at least {MIN_CLT_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let m = stats::mean(samples);
    let sd = stats::std_dev(samples);
    if !(sd > 0.0) {
        return Err(Error::Degenerate("sample standard deviation is zero".into()));
    }
    let z: Vec<f64> = samples.iter().map(|x| (x - m) / sd).collect();
    let ks_stat = stats::ks_statistic(&z, gaussian_cdf);
    let critical = stats::ks_critical_1pct(z.len());
    Ok(CltOutcome {
        ks_stat,
        critical,
        pass: ks_stat < critical,
    })
}

/// Least-squares fit of `ln Var̂` against `ln n` with a percentile
/// bootstrap 95% interval built from the per-row bootstrap replicates.
pub fn fit_scaling_exponent(rows: &[RowStats], predicted: f64) -> Result<ExponentFit> {
    if rows.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "the exponent fit needs at least 3 rows, got {}",
            rows.len()
        )));
    }
    if rows.iter().any(|r| !(r.fit_variance() > 0.0)) {
        return Err(Error::Degenerate("non-positive variance in the fit".into()));
    }
    let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.fit_variance().ln()).collect();
    let (slope, intercept) = stats::ols(&x, &y)?;
    let lead: Vec<f64> = rows
        .iter()
        .map(|r| r.area.as_ref().map_or(r.var_h2_formula, |a| a.leading_prediction).ln())
        .collect();
    let (leading_slope, _) = stats::ols(&x, &lead)?;

    let rounds = rows.iter().map(|r| r.bootstrap_log_var.len()).min().unwrap_or(0);
    let (ci_low, ci_high) = if rounds >= 2 {
        let mut slopes: Vec<f64> = (0..rounds)
            .map(|b| {
                let yb: Vec<f64> = rows.iter().map(|r| r.bootstrap_log_var[b]).collect();
                stats::ols(&x, &yb).map(|(s, _)| s).unwrap_or(f64::NAN)
            })
            .filter(|s| s.is_finite())
            .collect();
        slopes.sort_by(f64::total_cmp);
        (stats::percentile(&slopes, 0.025), stats::percentile(&slopes, 0.975))
    } else {
        (slope, slope)
    };
    Ok(ExponentFit {
        slope,
        intercept,
        ci_low,
        ci_high,
        leading_slope,
        predicted,
    })
}

fn run_replicates(config: &ExperimentConfig, spec: &FieldSpec) -> Result<(Vec<ReplicateRecord>, Option<usize>)> {
    let n = spec.n();
    let seed = config.master_seed;
    match config.mode {
        SimulationMode::H2Direct => {
            let records = (0..config.replicates)
                .into_par_iter()
                .map(|r| {
                    let stream = replicate_stream(n, r);
                    let h2 = h2_sample_direct(spec, &mut stream_rng(seed, stream));
                    ReplicateRecord {
                        replicate: r,
                        seed: stream,
                        u: config.u,
                        area: None,
                        h_quad: Vec::new(),
                        h2_exact: h2,
                    }
                })
                .collect();
            Ok((records, None))
        }
        SimulationMode::FieldFull => {
            let degree = config.grid_degree(n);
            let grid = Arc::new(SphereGrid::build(degree)?);
            let synth = Synthesizer::new(*spec, grid)?;
            let records = (0..config.replicates)
                .into_par_iter()
                .map(|r| -> Result<ReplicateRecord> {
                    let stream = replicate_stream(n, r);
                    let coeffs = sample_coefficients(spec, &mut stream_rng(seed, stream));
                    let field = synth.synthesize(&coeffs)?;
                    let h_quad = chaos_projections(&field, config.q_max)
                        .into_iter()
                        .map(|p| p.value)
                        .collect();
                    Ok(ReplicateRecord {
                        replicate: r,
                        seed: stream,
                        u: config.u,
                        area: Some(excursion_area(&field, config.u)),
                        h_quad,
                        h2_exact: h2_exact_from_coeffs(&coeffs),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((records, Some(degree)))
        }
    }
}

fn estimate(value: f64, rounds: &[Vec<f64>], k: usize) -> Estimate {
    Estimate {
        value,
        se: stats::bootstrap_se(rounds, k),
    }
}

fn summarize(
    config: &ExperimentConfig,
    spec: &FieldSpec,
    records: &[ReplicateRecord],
    grid_degree: Option<usize>,
) -> Result<RowStats> {
    let n = spec.n();
    let u = config.u;
    let h2: Vec<f64> = records.iter().map(|r| r.h2_exact).collect();
    let area: Option<Vec<f64>> = records.iter().map(|r| r.area).collect();
    let higher: Vec<Vec<f64>> = match config.mode {
        SimulationMode::FieldFull => (3..=config.q_max)
            .map(|q| records.iter().map(|r| r.h(q).unwrap_or(f64::NAN)).collect())
            .collect(),
        SimulationMode::H2Direct => Vec::new(),
    };

    // bootstrap columns: mean h2, var h2, then (mean S, var S, var h_q...)
    let mut rng = stream_rng(config.master_seed, bootstrap_stream(n));
    let mut buf = Vec::with_capacity(records.len());
    let rounds = stats::bootstrap(records.len(), config.bootstrap_resamples, &mut rng, |idx| {
        let mut out = Vec::with_capacity(4 + higher.len());
        stats::gather(&h2, idx, &mut buf);
        out.push(stats::mean(&buf));
        out.push(stats::variance(&buf));
        if let Some(a) = &area {
            stats::gather(a, idx, &mut buf);
            out.push(stats::mean(&buf));
            out.push(stats::variance(&buf));
            for h in &higher {
                stats::gather(h, idx, &mut buf);
                out.push(stats::variance(&buf));
            }
        }
        out
    });

    let var_h2 = estimate(stats::variance(&h2), &rounds, 1);
    let mean_h2 = estimate(stats::mean(&h2), &rounds, 0);
    let mut bootstrap_log_var: Vec<f64> = rounds.iter().map(|r| r[1].ln()).collect();

    let area_stats = match &area {
        None => None,
        Some(a) => {
            let mean = estimate(stats::mean(a), &rounds, 2);
            let variance = estimate(stats::variance(a), &rounds, 3);
            bootstrap_log_var = rounds.iter().map(|r| r[3].ln()).collect();
            let leading_prediction = leading_area_variance(spec, u);
            let phi_term = (u * gaussian_pdf(u)).powi(2) / 4.0;
            let nf = n as f64;
            let higher_chaos: Vec<HigherChaos> = higher
                .iter()
                .enumerate()
                .map(|(i, h)| {
                    let q = i + 3;
                    let var = estimate(stats::variance(h), &rounds, 4 + i);
                    let mut rescaled = var.value * nf * nf;
                    if q == 4 {
                        rescaled /= nf.ln();
                    }
                    HigherChaos {
                        q,
                        variance: var,
                        rescaled,
                        share_of_area_variance: chaos_weight(q, u) * var.value / variance.value,
                    }
                })
                .collect();
            let explained = chaos_weight(2, u) * var_h2.value
                + higher_chaos
                    .iter()
                    .map(|h| chaos_weight(h.q, u) * h.variance.value)
                    .sum::<f64>();
            let clt = if a.len() >= MIN_CLT_SAMPLES {
                Some(clt_test(a)?)
            } else {
                None
            };
            let h1_max_abs = records
                .iter()
                .filter_map(|r| r.h(1))
                .map(f64::abs)
                .fold(0.0, f64::max);
            let h2_identity_max_err = records
                .iter()
                .filter_map(|r| r.h(2).map(|q| (q - r.h2_exact).abs()))
                .fold(0.0, f64::max);
            let resolved_q_max = grid_degree.map_or(0, |d| (d / n).min(config.q_max));
            Some(AreaStats {
                mean,
                expected_mean: expected_area(u),
                variance,
                leading_prediction,
                leading_ratio: variance.value / leading_prediction,
                dominance_ratio: variance.value / phi_term / var_h2.value,
                clt,
                higher_chaos,
                explained_share: explained / variance.value,
                h1_max_abs,
                h2_identity_max_err,
                resolved_q_max,
            })
        }
    };

    Ok(RowStats {
        n,
        ell_min: spec.ell_min(),
        dof: spec.dof(),
        replicates: records.len(),
        grid_degree,
        var_h2,
        var_h2_formula: spec.h2_variance(),
        mean_h2,
        area: area_stats,
        bootstrap_log_var,
        elapsed: Duration::ZERO,
    })
}

fn row_flags(config: &ExperimentConfig, row: &RowStats, flags: &mut Vec<CheckFlag>) {
    let n = Some(row.n);
    let z = (row.var_h2.value - row.var_h2_formula) / row.var_h2.se;
    flags.push(CheckFlag {
        kind: CheckKind::H2Variance,
        n,
        pass: z.abs() <= 3.0,
        detail: format!(
            "Var h2 = {:.6} ± {:.6}, formula 2(4π)²/D = {:.6}",
            row.var_h2.value, row.var_h2.se, row.var_h2_formula
        ),
    });
    let Some(a) = &row.area else { return };
    let z = (a.mean.value - a.expected_mean) / a.mean.se;
    flags.push(CheckFlag {
        kind: CheckKind::AreaMean,
        n,
        pass: z.abs() <= 3.0,
        detail: format!(
            "mean S = {:.6} ± {:.6}, expected 4π(1−Φ(u)) = {:.6}",
            a.mean.value, a.mean.se, a.expected_mean
        ),
    });
    if a.resolved_q_max >= 2 {
        flags.push(CheckFlag {
            kind: CheckKind::H2Identity,
            n,
            pass: a.h2_identity_max_err <= H2_IDENTITY_TOL,
            detail: format!("max |h2 quadrature − h2 coefficients| = {:.3e}", a.h2_identity_max_err),
        });
    }
    if let Some(c) = a.clt {
        flags.push(CheckFlag {
            kind: CheckKind::Clt,
            n,
            pass: c.pass,
            detail: format!("KS = {:.5}, 1% critical value = {:.5}", c.ks_stat, c.critical),
        });
    }
    if config.u != 0.0 {
        let (lo, hi) = LEADING_RATIO_BAND;
        flags.push(CheckFlag {
            kind: CheckKind::LeadingVariance,
            n,
            pass: a.leading_ratio >= lo && a.leading_ratio <= hi,
            detail: format!("Var S / leading prediction = {:.4}", a.leading_ratio),
        });
    }
}

/// Runs the sweep over `config.n_list`. A failure at one `n` is recorded in
/// its row and the other rows still run.
pub fn run_variance_sweep(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let mut rows = Vec::with_capacity(config.n_list.len());
    let mut all_records = Vec::with_capacity(config.n_list.len());
    let mut flags = Vec::new();
    for &n in &config.n_list {
        let start = Instant::now();
        let outcome = config.spec_for(n).and_then(|spec| {
            let (records, degree) = run_replicates(config, &spec)?;
            let stats = summarize(config, &spec, &records, degree)?;
            Ok((records, stats))
        });
        match outcome {
            Ok((records, mut stats)) => {
                stats.elapsed = start.elapsed();
                row_flags(config, &stats, &mut flags);
                all_records.push(records);
                rows.push(SweepRow {
                    n,
                    stats: Some(stats),
                    error: None,
                });
            }
            Err(e) => {
                all_records.push(Vec::new());
                rows.push(SweepRow {
                    n,
                    stats: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }

    let ok_rows: Vec<RowStats> = rows.iter().filter_map(|r| r.stats.clone()).collect();
    let fitted_exponent = if ok_rows.len() >= 3 && config.ensemble == Ensemble::BandLimited {
        let fit = fit_scaling_exponent(&ok_rows, config.predicted_exponent())?;
        if config.mode == SimulationMode::FieldFull {
            flags.push(CheckFlag {
                kind: CheckKind::Exponent,
                n: None,
                pass: (fit.slope - fit.predicted).abs() <= EXPONENT_TOL,
                detail: format!(
                    "slope {:.4} (95% CI [{:.4}, {:.4}]), predicted {:.4} ± {EXPONENT_TOL}",
                    fit.slope, fit.ci_low, fit.ci_high, fit.predicted
                ),
            });
        }
        Some(fit)
    } else {
        None
    };

    Ok(ExperimentResult {
        config: config.clone(),
        rows,
        fitted_exponent,
        flags,
        replicates: all_records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceRow {
    pub n: usize,
    /// `Var̂ h_2 · D / (2 (4π)²)`, one in expectation.
    pub h2_normalized: Estimate,
    /// `Var̂ h_2 · n^{2−β}`
    pub h2_scaled: f64,
    /// `(q, Var̂ h_q · n²)`, with `/ ln n` for `q = 4`.
    pub higher: Vec<(usize, f64)>,
    /// `Var̂ h_3 / Var̂ h_2`
    pub h3_over_h2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosDominanceReport {
    pub beta: f64,
    pub rows: Vec<DominanceRow>,
    /// `(q, max/min)` of the rescaled variances across `n`.
    pub spreads: Vec<(usize, f64)>,
    pub flags: Vec<CheckFlag>,
}

impl ChaosDominanceReport {
    pub fn passes(&self) -> bool {
        self.flags.iter().all(|f| f.pass)
    }
}

/// Builds the chaos table from a field-mode sweep.
pub fn chaos_dominance_from(result: &ExperimentResult) -> Result<ChaosDominanceReport> {
    if result.config.mode != SimulationMode::FieldFull {
        return Err(Error::InvalidConfig("the chaos table needs field_full mode".into()));
    }
    let beta = result.config.beta;
    let mut rows = Vec::new();
    let mut flags = Vec::new();
    for s in result.stats() {
        let norm = s.dof as f64 / (2.0 * (4.0 * PI).powi(2));
        let h2_normalized = Estimate {
            value: s.var_h2.value * norm,
            se: s.var_h2.se * norm,
        };
        flags.push(CheckFlag {
            kind: CheckKind::H2Variance,
            n: Some(s.n),
            pass: ((h2_normalized.value - 1.0) / h2_normalized.se).abs() <= 3.0,
            detail: format!(
                "Var h2 · D/(2(4π)²) = {:.4} ± {:.4}",
                h2_normalized.value, h2_normalized.se
            ),
        });
        let a = s.area.as_ref().expect("field mode rows carry area statistics");
        rows.push(DominanceRow {
            n: s.n,
            h2_normalized,
            h2_scaled: s.var_h2.value * (s.n as f64).powf(2.0 - beta),
            higher: a.higher_chaos.iter().map(|h| (h.q, h.rescaled)).collect(),
            h3_over_h2: a
                .higher_chaos
                .iter()
                .find(|h| h.q == 3)
                .map(|h| h.variance.value / s.var_h2.value),
        });
    }
    let mut spreads = Vec::new();
    for q in 3..=result.config.q_max.min(4) {
        let vals: Vec<f64> = rows
            .iter()
            .filter_map(|r| r.higher.iter().find(|(k, _)| *k == q).map(|&(_, v)| v))
            .collect();
        if vals.len() >= 2 {
            let max = vals.iter().copied().fold(f64::MIN, f64::max);
            let min = vals.iter().copied().fold(f64::MAX, f64::min);
            let spread = max / min;
            spreads.push((q, spread));
            flags.push(CheckFlag {
                kind: CheckKind::HigherChaos,
                n: None,
                pass: spread <= HIGHER_CHAOS_BAND,
                detail: format!("q = {q}: rescaled variance spread max/min = {spread:.3}"),
            });
        }
    }
    Ok(ChaosDominanceReport {
        beta,
        rows,
        spreads,
        flags,
    })
}

/// Runs a field-mode sweep and tabulates the chaos variances.
pub fn chaos_dominance_report(config: &ExperimentConfig) -> Result<ChaosDominanceReport> {
    if config.mode != SimulationMode::FieldFull {
        return Err(Error::InvalidConfig("the chaos table needs field_full mode".into()));
    }
    chaos_dominance_from(&run_variance_sweep(config)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn synthetic_row(n: usize, var: f64) -> RowStats {
        RowStats {
            n,
            ell_min: 0,
            dof: 1,
            replicates: 100,
            grid_degree: None,
            var_h2: Estimate { value: var, se: 0.0 },
            var_h2_formula: var,
            mean_h2: Estimate { value: 0.0, se: 0.0 },
            area: None,
            bootstrap_log_var: Vec::new(),
            elapsed: Duration::ZERO,
        }
    }

    #[test]
    fn exponent_of_exact_power_law() {
        let rows: Vec<RowStats> = [64, 128, 256, 512]
            .iter()
            .map(|&n| synthetic_row(n, 3.7 * (n as f64).powi(-2)))
            .collect();
        let fit = fit_scaling_exponent(&rows, -2.0).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-12);
        assert_eq!((fit.ci_low, fit.ci_high), (fit.slope, fit.slope));
        assert!(fit_scaling_exponent(&rows[..2], -2.0).is_err());
    }

    #[test]
    fn clt_test_calibration() {
        let mut passes = 0;
        for trial in 0..100 {
            let mut rng = stream_rng(2024, trial);
            let xs: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
            if clt_test(&xs).unwrap().pass {
                passes += 1;
            }
        }
        assert!(passes >= 95, "{passes} of 100");
    }

    #[test]
    fn clt_test_rejects_bad_input() {
        assert!(matches!(clt_test(&[1.0; 600]), Err(Error::Degenerate(_))));
        assert!(matches!(clt_test(&[1.0, 2.0]), Err(Error::InsufficientData(_))));
        let skewed: Vec<f64> = (0..2000).map(|i| ((i as f64 + 0.5) / 2000.0).powi(4)).collect();
        assert!(!clt_test(&skewed).unwrap().pass);
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let bad = [
            ExperimentConfig {
                n_list: vec![128, 64],
                ..Default::default()
            },
            ExperimentConfig {
                replicates: 50,
                ..Default::default()
            },
            ExperimentConfig {
                beta: 1.0,
                ..Default::default()
            },
            ExperimentConfig {
                oversample: 0.5,
                ..Default::default()
            },
            ExperimentConfig {
                q_max: 1,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::InvalidConfig(_) | Error::InvalidSpec(_))));
        }
        let c = ExperimentConfig::default();
        assert_eq!(c.grid_degree(64), 256);
        let c = ExperimentConfig {
            oversample: 1.0,
            ..Default::default()
        };
        assert_eq!(c.grid_degree(64), 128);
    }

    #[test]
    fn small_field_sweep_is_consistent() {
        let config = ExperimentConfig {
            n_list: vec![16, 24, 32],
            replicates: 200,
            bootstrap_resamples: 200,
            ..Default::default()
        };
        let res = run_variance_sweep(&config).unwrap();
        assert_eq!(res.rows.len(), 3);
        for row in res.stats() {
            let a = row.area.as_ref().unwrap();
            assert!(a.h2_identity_max_err < H2_IDENTITY_TOL);
            assert!(a.h1_max_abs < 1e-9);
            assert_eq!(a.resolved_q_max, 4);
            assert!(a.mean.se > 0.0 && row.var_h2.se > 0.0);
            assert_eq!(row.bootstrap_log_var.len(), 200);
        }
        assert_eq!(res.replicates[0].len(), 200);
        let fit = res.fitted_exponent.unwrap();
        assert!(fit.ci_low <= fit.slope && fit.slope <= fit.ci_high);
        let again = run_variance_sweep(&config).unwrap();
        assert_eq!(res.replicates, again.replicates);
        assert_eq!(
            serde_json::to_string(&res).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
        let report = chaos_dominance_from(&res).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.spreads.len(), 2);
    }

    #[test]
    fn direct_mode_rows() {
        let config = ExperimentConfig {
            n_list: vec![8, 16, 32],
            replicates: 1000,
            bootstrap_resamples: 100,
            mode: SimulationMode::H2Direct,
            ..Default::default()
        };
        let res = run_variance_sweep(&config).unwrap();
        assert_eq!(res.rows.iter().map(|r| r.n).collect::<Vec<_>>(), config.n_list);
        assert!(res.stats().all(|r| r.area.is_none() && r.grid_degree.is_none()));
        assert!(res.flags.iter().all(|f| f.kind == CheckKind::H2Variance));
        // Var h2 ∝ 1/D, so the fitted slope follows ln D
        assert!(res.fitted_exponent.is_some());
        assert!(chaos_dominance_report(&config).is_err());
        assert!(chaos_dominance_from(&res).is_err());
    }

    #[test]
    fn replicate_csv_layout() {
        let config = ExperimentConfig {
            n_list: vec![8],
            replicates: 100,
            bootstrap_resamples: 10,
            q_max: 3,
            ..Default::default()
        };
        let res = run_variance_sweep(&config).unwrap();
        let mut buf = Vec::new();
        write_replicates_csv(&res.replicates[0], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(REPLICATE_HEADER));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 9);
        assert_eq!(first[0], "0");
        assert!(first[7].parse::<f64>().is_ok());
        assert!(first[8].is_empty());
    }
}
