use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use bandsphere::covariance::{linspace, profile, psi_upper, CovarianceProfile};
use bandsphere::experiments::{
    chaos_dominance_from, run_variance_sweep, write_replicates_csv, ChaosDominanceReport, CheckKind,
    ExperimentConfig, ExperimentResult, SimulationMode,
};
use bandsphere::field_model::{sample_coefficients, BandRounding, Ensemble, FieldSpec, Synthesizer};
use bandsphere::rng::{replicate_stream, stream_rng};
use bandsphere::{Error, SphereGrid};
use clap::ValueEnum;
use serde::Serialize;

use crate::{
    Band, Cli, Command, CovarianceArgs, DumpFormat, ExperimentArgs, Mode, Rounding, SimulateArgs, TableFormat,
};

/// Tolerance of the exact-versus-closed-form covariance check.
const IDENTITY_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl CommandError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CommandError::Usage(_) => 2,
            CommandError::Numerical(_) | CommandError::Io(_) => 1,
        }
    }
}

impl From<Error> for CommandError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain { .. } | Error::InvalidSpec(_) | Error::InvalidConfig(_) | Error::Parse(_) => {
                CommandError::Usage(e.to_string())
            }
            _ => CommandError::Numerical(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CommandError {
    fn from(e: serde_json::Error) -> Self {
        CommandError::Io(e.into())
    }
}

type CmdResult<T> = Result<T, CommandError>;

/// Runs a parsed command. `Ok(false)` means the run completed but one of
/// its checks failed.
pub fn run(cli: Cli) -> CmdResult<bool> {
    match cli.command {
        Command::Covariance(a) => covariance(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Excursion(a) => experiment("excursion", &a),
        Command::Scaling(a) => experiment("scaling", &a),
        Command::Clt(a) => experiment("clt", &a),
        Command::Chaos(a) => experiment("chaos", &a),
    }
}

fn open_output(path: Option<&Path>) -> CmdResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn rounding(r: Rounding) -> BandRounding {
    match r {
        Rounding::Ceil => BandRounding::Ceil,
        Rounding::Floor => BandRounding::Floor,
    }
}

fn ensemble(b: Band) -> Ensemble {
    match b {
        Band::Limited => Ensemble::BandLimited,
        Band::Single => Ensemble::SingleDegree,
        Band::Full => Ensemble::FullBand,
    }
}

fn make_spec(n: usize, beta: f64, r: Rounding, band: Band) -> CmdResult<FieldSpec> {
    Ok(match band {
        Band::Limited => FieldSpec::with_rounding(n, beta, rounding(r))?,
        Band::Single => FieldSpec::single_degree(n)?,
        Band::Full => FieldSpec::full_band(n)?,
    })
}

fn value_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value()
        .map(|p| p.get_name().to_string())
        .unwrap_or_default()
}

/// `# key=value` lines recording the resolved settings of a CSV output.
fn write_header(out: &mut dyn Write, pairs: &[(&str, String)]) -> std::io::Result<()> {
    for (k, v) in pairs {
        writeln!(out, "# {k}={v}")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CovarianceConfig {
    n: usize,
    beta: f64,
    rounding: BandRounding,
    alpha: f64,
    ell_min: usize,
    dof: usize,
    psi_min: f64,
    psi_max: f64,
    points: usize,
    epsilon: f64,
}

#[derive(Serialize)]
struct CovarianceReport<'a> {
    command: &'static str,
    config: &'a CovarianceConfig,
    profile: &'a CovarianceProfile,
    max_exact_cd_diff: f64,
    pass: bool,
}

fn covariance(a: &CovarianceArgs) -> CmdResult<bool> {
    if !(a.epsilon > 0.0 && a.epsilon < std::f64::consts::PI) {
        return Err(CommandError::Usage(format!("epsilon must lie in (0, π), got {}", a.epsilon)));
    }
    if a.points == 0 {
        return Err(CommandError::Usage("points must be positive".into()));
    }
    let spec = make_spec(a.n, a.beta, a.rounding, Band::Limited)?;
    let psi_max = a.psi_max.unwrap_or_else(|| psi_upper(&spec, a.epsilon));
    if !(a.psi_min >= 0.0 && a.psi_min <= psi_max) {
        return Err(CommandError::Usage(format!(
            "need 0 ≤ psi_min ≤ psi_max, got {} and {psi_max}",
            a.psi_min
        )));
    }
    let grid = linspace(a.psi_min, psi_max, a.points);
    let prof = profile(&spec, &grid, a.epsilon)?;
    let max_diff = prof
        .exact
        .iter()
        .zip(&prof.cd)
        .map(|(e, c)| (e - c).abs())
        .fold(0.0, f64::max);
    let pass = max_diff <= IDENTITY_TOL;
    let config = CovarianceConfig {
        n: a.n,
        beta: a.beta,
        rounding: rounding(a.rounding),
        alpha: spec.alpha(),
        ell_min: spec.ell_min(),
        dof: spec.dof(),
        psi_min: a.psi_min,
        psi_max,
        points: a.points,
        epsilon: a.epsilon,
    };
    let mut out = open_output(a.output.out.as_deref())?;
    match a.format {
        TableFormat::Csv => {
            write_header(
                &mut out,
                &[
                    ("command", "covariance".into()),
                    ("n", config.n.to_string()),
                    ("beta", config.beta.to_string()),
                    ("rounding", value_name(a.rounding)),
                    ("alpha", config.alpha.to_string()),
                    ("ell_min", config.ell_min.to_string()),
                    ("dof", config.dof.to_string()),
                    ("psi_min", config.psi_min.to_string()),
                    ("psi_max", config.psi_max.to_string()),
                    ("points", config.points.to_string()),
                    ("epsilon", config.epsilon.to_string()),
                ],
            )?;
            prof.write_csv(&mut out)?;
        }
        TableFormat::Json => {
            let report = CovarianceReport {
                command: "covariance",
                config: &config,
                profile: &prof,
                max_exact_cd_diff: max_diff,
                pass,
            };
            serde_json::to_writer_pretty(&mut out, &report)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    if !pass {
        eprintln!("exact and closed-form covariance differ by {max_diff:.3e}");
    }
    Ok(pass)
}

fn simulate(a: &SimulateArgs) -> CmdResult<bool> {
    if !(a.oversample.is_finite() && a.oversample >= 1.0) {
        return Err(CommandError::Usage(format!("oversample must be ≥ 1, got {}", a.oversample)));
    }
    let spec = make_spec(a.n, a.beta, a.rounding, a.band)?;
    let degree = ((a.oversample * a.n as f64).ceil() as usize).max(a.n);
    let grid = Arc::new(SphereGrid::build(degree)?);
    let synth = Synthesizer::new(spec, Arc::clone(&grid))?;
    let stream = replicate_stream(a.n, a.replicate);
    let coeffs = sample_coefficients(&spec, &mut stream_rng(a.seed, stream));
    let field = synth.synthesize(&coeffs)?;
    let mut out = open_output(a.output.out.as_deref())?;
    match a.format {
        DumpFormat::Csv => {
            write_header(
                &mut out,
                &[
                    ("command", "simulate".into()),
                    ("n", a.n.to_string()),
                    ("beta", spec.beta().to_string()),
                    ("band", value_name(a.band)),
                    ("rounding", value_name(a.rounding)),
                    ("ell_min", spec.ell_min().to_string()),
                    ("dof", spec.dof().to_string()),
                    ("seed", a.seed.to_string()),
                    ("replicate", a.replicate.to_string()),
                    ("stream", stream.to_string()),
                    ("oversample", a.oversample.to_string()),
                    ("grid_degree", degree.to_string()),
                    ("n_theta", grid.n_theta().to_string()),
                    ("n_phi", grid.n_phi().to_string()),
                ],
            )?;
            field.write_csv(&mut out)?;
        }
        DumpFormat::Binary => field.write_binary(&mut out)?,
    }
    out.flush()?;
    Ok(true)
}

fn experiment_config(a: &ExperimentArgs) -> ExperimentConfig {
    let mode = match a.mode {
        Mode::FieldFull => SimulationMode::FieldFull,
        Mode::H2Direct => SimulationMode::H2Direct,
    };
    let replicates = a.replicates.unwrap_or(match mode {
        SimulationMode::FieldFull => 2000,
        SimulationMode::H2Direct => 100_000,
    });
    ExperimentConfig {
        n_list: a.n.clone(),
        beta: a.beta,
        u: a.u,
        replicates,
        master_seed: a.seed,
        oversample: a.oversample,
        mode,
        q_max: a.q_max,
        rounding: rounding(a.rounding),
        ensemble: ensemble(a.band),
        bootstrap_resamples: a.bootstrap,
    }
}

#[derive(Serialize)]
struct ExperimentReport<'a> {
    command: &'static str,
    #[serde(flatten)]
    result: &'a ExperimentResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    chaos: Option<&'a ChaosDominanceReport>,
    pass: bool,
}

fn checks_for(command: &str) -> &'static [CheckKind] {
    match command {
        "excursion" => &[CheckKind::AreaMean, CheckKind::H2Variance, CheckKind::H2Identity],
        "scaling" => &[CheckKind::Exponent],
        "clt" => &[CheckKind::Clt],
        _ => &[],
    }
}

fn experiment(command: &'static str, a: &ExperimentArgs) -> CmdResult<bool> {
    let config = experiment_config(a);
    config.validate()?;
    match command {
        "scaling" if config.n_list.len() < 3 => {
            return Err(CommandError::Usage("scaling needs at least three values of n".into()));
        }
        "clt" if config.mode != SimulationMode::FieldFull => {
            return Err(CommandError::Usage("clt needs field-full mode".into()));
        }
        "clt" if config.replicates < bandsphere::experiments::MIN_CLT_SAMPLES => {
            return Err(CommandError::Usage(format!(
                "clt needs at least {} replicates",
                bandsphere::experiments::MIN_CLT_SAMPLES
            )));
        }
        "chaos" if config.mode != SimulationMode::FieldFull => {
            return Err(CommandError::Usage("chaos needs field-full mode".into()));
        }
        "scaling" if config.mode != SimulationMode::FieldFull => {
            return Err(CommandError::Usage("scaling fits the area variance and needs field-full mode".into()));
        }
        _ => {}
    }

    let result = if a.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(a.workers)
            .build()
            .map_err(|e| CommandError::Numerical(e.to_string()))?
            .install(|| run_variance_sweep(&config))?
    } else {
        run_variance_sweep(&config)?
    };
    for row in &result.rows {
        if let Some(e) = &row.error {
            eprintln!("n = {}: {e}", row.n);
        }
    }
    let chaos = if command == "chaos" {
        Some(chaos_dominance_from(&result)?)
    } else {
        None
    };
    let mut pass = result.passes(checks_for(command));
    if command == "scaling" && result.fitted_exponent.is_none() {
        pass = false;
    }
    if let Some(c) = &chaos {
        pass &= c.passes() && result.rows.iter().all(|r| r.error.is_none());
    }

    let mut out = open_output(a.output.out.as_deref())?;
    match a.format {
        TableFormat::Json => {
            let report = ExperimentReport {
                command,
                result: &result,
                chaos: chaos.as_ref(),
                pass,
            };
            serde_json::to_writer_pretty(&mut out, &report)?;
            writeln!(out)?;
        }
        TableFormat::Csv => {
            let n_list: Vec<String> = config.n_list.iter().map(|n| n.to_string()).collect();
            write_header(
                &mut out,
                &[
                    ("command", command.into()),
                    ("n", n_list.join(",")),
                    ("beta", config.beta.to_string()),
                    ("u", config.u.to_string()),
                    ("replicates", config.replicates.to_string()),
                    ("seed", config.master_seed.to_string()),
                    ("oversample", config.oversample.to_string()),
                    ("mode", value_name(a.mode)),
                    ("q_max", config.q_max.to_string()),
                    ("rounding", value_name(a.rounding)),
                    ("band", value_name(a.band)),
                    ("bootstrap", config.bootstrap_resamples.to_string()),
                ],
            )?;
            for (row, records) in result.rows.iter().zip(&result.replicates) {
                writeln!(out, "# block n={}", row.n)?;
                write_replicates_csv(records, &mut out)?;
            }
        }
    }
    out.flush()?;
    for f in result.flags.iter().chain(chaos.iter().flat_map(|c| &c.flags)) {
        let n = f.n.map(|n| format!(" n={n}")).unwrap_or_default();
        eprintln!("[{}] {:?}{n}: {}", if f.pass { "pass" } else { "FAIL" }, f.kind, f.detail);
    }
    Ok(pass)
}
