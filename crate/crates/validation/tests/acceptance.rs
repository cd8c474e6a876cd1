//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero if any criterion fails. Positional arguments select criteria by
//! id, e.g. `cargo test -p bandsphere-validation --test acceptance -- 3 4`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use bandsphere::chaos::{chaos_projection, expected_area, h2_exact_from_coeffs};
use bandsphere::covariance::{
    gamma_cd, gamma_exact, gamma_hilb, gamma_regime1, linspace, psi_upper, regime2_crests, regime2_envelope,
    HilbWindow, DEFAULT_EPSILON,
};
use bandsphere::experiments::{
    run_variance_sweep, ExperimentConfig, ExperimentResult, SimulationMode, EXPONENT_TOL, HIGHER_CHAOS_BAND,
    LEADING_RATIO_BAND,
};
use bandsphere::field_model::sample_coefficients;
use bandsphere::rng::{replicate_stream, stream_rng};
use bandsphere::{make_spec, SphereGrid, Synthesizer};
use bandsphere_validation::Verdict;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 42;
const SWEEP_N: [usize; 4] = [64, 128, 256, 512];

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn sweep(beta: f64) -> (ExperimentResult, Duration) {
    let config = ExperimentConfig {
        n_list: SWEEP_N.to_vec(),
        beta,
        u: 1.0,
        replicates: 2000,
        master_seed: SEED,
        oversample: 4.0,
        mode: SimulationMode::FieldFull,
        q_max: 4,
        ..ExperimentConfig::default()
    };
    timed(|| run_variance_sweep(&config).expect("sweep runs"))
}

fn criterion_1() -> Verdict {
    let config = ExperimentConfig {
        n_list: vec![100],
        beta: 0.5,
        replicates: 100_000,
        master_seed: SEED,
        mode: SimulationMode::H2Direct,
        ..ExperimentConfig::default()
    };
    let (result, elapsed) = timed(|| run_variance_sweep(&config).unwrap());
    let row = result.row(100).unwrap();
    let target = 2.0 * (4.0 * PI).powi(2) / 1176.0;
    let z = (row.var_h2.value - target) / row.var_h2.se;
    Verdict {
        id: "1",
        title: "exact second-chaos variance (direct chi-square)",
        numeric_pass: row.dof == 1176 && z.abs() <= 3.0,
        elapsed,
        budget: secs(10),
        detail: format!(
            "D = {}, Var h2 = {:.6} ± {:.6}, target {:.6}, z = {:.2}",
            row.dof, row.var_h2.value, row.var_h2.se, target, z
        ),
    }
}

fn criterion_2() -> Verdict {
    let n = 64;
    let ((worst, degree), elapsed) = timed(|| {
        let spec = make_spec(n, 0.5).unwrap();
        let grid = Arc::new(SphereGrid::build(2 * n).unwrap());
        let degree = grid.exact_degree();
        let synth = Synthesizer::new(spec, grid).unwrap();
        let worst = (0..50)
            .map(|r| {
                let coeffs = sample_coefficients(&spec, &mut stream_rng(SEED, replicate_stream(n, r)));
                let field = synth.synthesize(&coeffs).unwrap();
                (chaos_projection(&field, 2).value - h2_exact_from_coeffs(&coeffs)).abs()
            })
            .fold(0.0, f64::max);
        (worst, degree)
    });
    Verdict {
        id: "2",
        title: "field quadrature h2 equals coefficient h2",
        numeric_pass: degree >= 2 * n && worst <= 1e-8,
        elapsed,
        budget: secs(60),
        detail: format!("grid degree {degree}, max |difference| over 50 replicates = {worst:.3e}"),
    }
}

fn criterion_3() -> Verdict {
    let (worst, elapsed) = timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        let mut worst = 0.0f64;
        for n in [64, 256, 512] {
            let spec = make_spec(n, 0.5).unwrap();
            for _ in 0..200 {
                let t = rng.random::<f64>() * PI;
                worst = worst.max((gamma_exact(&spec, t).unwrap() - gamma_cd(&spec, t).unwrap()).abs());
            }
        }
        worst
    });
    Verdict {
        id: "3",
        title: "Legendre sum equals Christoffel-Darboux form",
        numeric_pass: worst <= 1e-10,
        elapsed,
        budget: secs(5),
        detail: format!("max |exact − cd| over 600 angles = {worst:.3e}"),
    }
}

fn hilb_error(n: usize) -> f64 {
    let spec = make_spec(n, 0.5).unwrap();
    let window = HilbWindow {
        c: 1.0,
        epsilon: DEFAULT_EPSILON,
    };
    let (lo, hi) = window.bounds(&spec);
    linspace(lo, hi, 20 * n)
        .into_iter()
        .map(|t| (gamma_hilb(&spec, t, window).unwrap() - gamma_exact(&spec, t).unwrap()).abs())
        .fold(0.0, f64::max)
}

fn criterion_4() -> Verdict {
    let ((e200, e800), elapsed) = timed(|| (hilb_error(200), hilb_error(800)));
    let ratio = e200 / e800;
    Verdict {
        id: "4",
        title: "Bessel approximation error shrinks with n",
        numeric_pass: ratio >= 2.0,
        elapsed,
        budget: secs(10),
        detail: format!("max error n=200: {e200:.3e}, n=800: {e800:.3e}, ratio {ratio:.2}"),
    }
}

/// Relative sup deviations of the near-regime form and of the far-regime
/// envelope (at carrier crests) from the exact covariance.
fn regime_deviations(n: usize) -> (f64, f64) {
    let spec = make_spec(n, 0.5).unwrap();
    let an = spec.angular_scale();
    let nu = (n as f64).powf(0.5);
    let (mut dev, mut peak) = (0.0f64, 0.0f64);
    for psi in linspace(1.0, nu, 4000).into_iter().skip(1) {
        let exact = gamma_exact(&spec, psi / an).unwrap();
        dev = dev.max((gamma_regime1(&spec, psi).unwrap() - exact).abs());
        peak = peak.max(exact.abs());
    }
    let near = dev / peak;
    let (mut dev, mut peak) = (0.0f64, 0.0f64);
    for psi in regime2_crests(&spec, DEFAULT_EPSILON).unwrap() {
        debug_assert!(psi <= psi_upper(&spec, DEFAULT_EPSILON));
        let exact = gamma_exact(&spec, psi / an).unwrap().abs();
        dev = dev.max((regime2_envelope(&spec, psi, DEFAULT_EPSILON).unwrap() - exact).abs());
        peak = peak.max(exact);
    }
    (near, dev / peak)
}

fn criterion_5() -> Verdict {
    let ns = [100, 400, 1600];
    let (devs, elapsed) = timed(|| ns.map(regime_deviations));
    let near_down = devs.windows(2).all(|w| w[1].0 < w[0].0);
    let far_down = devs.windows(2).all(|w| w[1].1 < w[0].1);
    let detail = ns
        .iter()
        .zip(&devs)
        .map(|(n, (a, b))| format!("n={n}: near {a:.3e}, envelope {b:.3e}"))
        .collect::<Vec<_>>()
        .join("; ");
    Verdict {
        id: "5",
        title: "rescaled-angle expansion converges",
        numeric_pass: near_down && far_down,
        elapsed,
        budget: secs(60),
        detail,
    }
}

fn criterion_6(result: &ExperimentResult) -> Verdict {
    let row = result.row(128).unwrap();
    let a = row.area.as_ref().unwrap();
    let target = 1.99382;
    let z = (a.mean.value - target) / a.mean.se;
    Verdict {
        id: "6",
        title: "excursion-area mean",
        numeric_pass: z.abs() <= 3.0,
        elapsed: row.elapsed,
        budget: secs(300),
        detail: format!(
            "n=128: mean S = {:.5} ± {:.5}, target {target}, z = {z:.2} (4π(1−Φ(1)) = {:.5})",
            a.mean.value,
            a.mean.se,
            expected_area(1.0)
        ),
    }
}

fn criterion_7(result: &ExperimentResult) -> Verdict {
    let row = result.row(256).unwrap();
    let a = row.area.as_ref().unwrap();
    let (lo, hi) = LEADING_RATIO_BAND;
    Verdict {
        id: "7",
        title: "leading-order area variance",
        numeric_pass: a.leading_ratio >= lo && a.leading_ratio <= hi,
        elapsed: row.elapsed,
        budget: secs(600),
        detail: format!(
            "n=256: Var S = {:.4e} ± {:.1e}, prediction {:.4e}, ratio {:.4} (band [{lo}, {hi}])",
            a.variance.value, a.variance.se, a.leading_prediction, a.leading_ratio
        ),
    }
}

fn criterion_8(id: &'static str, beta: f64, result: &ExperimentResult, elapsed: Duration) -> Verdict {
    let fit = result.fitted_exponent.as_ref().unwrap();
    let predicted = -(2.0 - beta);
    Verdict {
        id,
        title: if beta == 0.5 {
            "variance scaling exponent, β = 0.5"
        } else {
            "variance scaling exponent, β = 0.8"
        },
        numeric_pass: (fit.slope - predicted).abs() <= EXPONENT_TOL,
        elapsed,
        budget: secs(1800),
        detail: format!(
            "slope {:.4} (95% CI [{:.4}, {:.4}]), predicted {predicted:.2} ± {EXPONENT_TOL}; slope implied by exact D: {:.4}",
            fit.slope, fit.ci_low, fit.ci_high, fit.leading_slope
        ),
    }
}

fn criterion_9(result: &ExperimentResult) -> Verdict {
    let row = result.row(256).unwrap();
    let clt = row.area.as_ref().unwrap().clt.unwrap();
    Verdict {
        id: "9",
        title: "standardized area is Gaussian (KS, 1%)",
        numeric_pass: clt.pass,
        elapsed: row.elapsed,
        budget: secs(600),
        detail: format!("n=256: KS = {:.5}, critical {:.5}", clt.ks_stat, clt.critical),
    }
}

fn criterion_10(result: &ExperimentResult) -> Verdict {
    let ns = [64, 128, 256];
    let rows: Vec<_> = ns.iter().map(|&n| result.row(n).unwrap()).collect();
    let elapsed = rows.iter().map(|r| r.elapsed).sum();
    let mut pass = true;
    let mut parts = Vec::new();
    for q in [3, 4] {
        let vals: Vec<f64> = rows
            .iter()
            .map(|r| {
                let a = r.area.as_ref().unwrap();
                a.higher_chaos.iter().find(|h| h.q == q).unwrap().rescaled
            })
            .collect();
        let max = vals.iter().copied().fold(f64::MIN, f64::max);
        let min = vals.iter().copied().fold(f64::MAX, f64::min);
        pass &= max / min <= HIGHER_CHAOS_BAND;
        let label = if q == 3 { "Var h3·n²" } else { "Var h4·n²/ln n" };
        parts.push(format!(
            "{label} = {} (spread {:.2})",
            vals.iter().map(|v| format!("{v:.1}")).collect::<Vec<_>>().join(", "),
            max / min
        ));
    }
    Verdict {
        id: "10",
        title: "higher chaoses stay within their decay bounds",
        numeric_pass: pass,
        elapsed,
        budget: secs(900),
        detail: parts.join("; "),
    }
}

fn main() -> ExitCode {
    let selected: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wants = |id: &str| selected.is_empty() || selected.iter().any(|s| s == id);
    let mut verdicts = Vec::new();
    // criterion 8 budgets both sweeps together
    let mut sweep_time = Duration::ZERO;

    for (id, f) in [
        ("1", criterion_1 as fn() -> Verdict),
        ("2", criterion_2),
        ("3", criterion_3),
        ("4", criterion_4),
        ("5", criterion_5),
    ] {
        if wants(id) {
            verdicts.push(f());
        }
    }
    if ["6", "7", "8a", "9", "10"].iter().any(|id| wants(id)) {
        let (result, elapsed) = sweep(0.5);
        sweep_time += elapsed;
        verdicts.push(criterion_6(&result));
        verdicts.push(criterion_7(&result));
        verdicts.push(criterion_8("8a", 0.5, &result, sweep_time));
        verdicts.push(criterion_9(&result));
        verdicts.push(criterion_10(&result));
    }
    if wants("8b") {
        let (result, elapsed) = sweep(0.8);
        sweep_time += elapsed;
        verdicts.push(criterion_8("8b", 0.8, &result, sweep_time));
    }

    println!();
    let mut failed = 0;
    for v in &verdicts {
        if !v.report() {
            failed += 1;
        }
    }
    println!("\nacceptance: {} passed, {failed} failed", verdicts.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
