//! The covariance function `Γ̄(θ) = E[T̄(x) T̄(y)]`, `θ = d(x, y)`, exactly
//! and through its high-frequency approximations.
//!
//! Exact evaluators:
//!
//! * [`gamma_exact`]: the Legendre sum `Σ_{ℓ=ℓ_min}^{n} (2ℓ+1) P_ℓ(cos θ) / D`.
//! * [`gamma_cd`]: the Christoffel–Darboux form
//!   `c/(4π) [(n+1) P_n^{(1,0)}(cos θ) − ℓ_min P_{ℓ_min−1}^{(1,0)}(cos θ)]`.
//!
//! Approximations:
//!
//! * [`gamma_hilb`]: Hilb's Bessel approximation applied to both Jacobi terms.
//! * [`gamma_regime1`], [`gamma_regime2`]: the two regimes of the expansion
//!   in the rescaled angle `ψ = θ α n`.
//!
//! `P_ℓ(1) = 1` is the normalisation used throughout, so `Γ̄(0) = 1`.
//!
//! # Forms of the regime approximations
//!
//! With `x = ψ/(α n)`, `ν = n^β`, `g(x) = (sin(x/2))^{−1} (x / sin x)^{1/2}`
//! and `χ = ψ − 3π/4`:
//!
//! ```text
//! Γ̄₁(ψ) = c/(4π) · g(x) · α n √ψ / ν · √(2/π) · ½ · (−ψ cos χ / (4ν) − sin χ)      1 < ψ < ν
//! Γ̄₂(ψ) = c/(4π) · g(x) · α n / √ψ · √(2/π) · (−2 sin A sin B)                   ν ≤ ψ ≤ α n (π − ε)
//! ```
//!
//! with `r = (n+1)/(α n)`, `A = (1+r) ψ/2 − 3π/4` and `B = (r−1) ψ/2`.
//! `Γ̄₂` oscillates on the fast carrier `sin A` under the slow envelope
//! `c/(4π) g(x) α n/√ψ √(2/π) · 2|sin B|` returned by [`regime2_envelope`].
//! The geometric factor `g(x)` is kept whole rather than expanded around
//! `x = 0`; the expanded versions carry an extra factor two (regime 1) and
//! lose accuracy near `x = π` (regime 2).

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::field_model::{Ensemble, FieldSpec};
use crate::specfun::{bessel_j1_unchecked, jacobi_p10_unchecked};

/// Default distance kept from the antipode, `θ ≤ π − ε`.
pub const DEFAULT_EPSILON: f64 = 0.1;

/// Default constant of the lower edge `θ ≥ c/n` of Hilb's window.
pub const DEFAULT_HILB_C: f64 = 1.0;

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=PI).contains(&theta) {
        return Err(domain("theta", theta, "[0, π]"));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < PI) {
        return Err(domain("epsilon", epsilon, "(0, π)"));
    }
    Ok(())
}

fn band_scale(spec: &FieldSpec) -> Result<f64> {
    match spec.ensemble() {
        Ensemble::FullBand => Err(Error::InvalidSpec(
            "the rescaled angle ψ = θ α n is undefined for the full band (α = 0)".into(),
        )),
        _ => Ok(spec.angular_scale()),
    }
}

/// `ψ = θ α n`
pub fn psi_from_theta(spec: &FieldSpec, theta: f64) -> Result<f64> {
    Ok(theta * band_scale(spec)?)
}

/// `θ = ψ / (α n)`
pub fn theta_from_psi(spec: &FieldSpec, psi: f64) -> Result<f64> {
    Ok(psi / band_scale(spec)?)
}

/// Covariance by direct Legendre summation.
pub fn gamma_exact(spec: &FieldSpec, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let x = theta.cos();
    let (mut prev, mut cur) = (0.0, 1.0);
    let mut sum = 0.0;
    for l in 0..=spec.n() {
        if l > 0 {
            let lf = (l - 1) as f64;
            let next = ((2.0 * lf + 1.0) * x * cur - lf * prev) / (lf + 1.0);
            prev = cur;
            cur = next;
        }
        if l >= spec.ell_min() {
            sum += (2 * l + 1) as f64 * cur;
        }
    }
    Ok(sum / spec.dof() as f64)
}

/// Covariance by the Christoffel–Darboux closed form.
pub fn gamma_cd(spec: &FieldSpec, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let x = theta.cos();
    let n = spec.n();
    let top = (n + 1) as f64 * jacobi_p10_unchecked(n, x);
    let bottom = match spec.ell_min() {
        0 => 0.0,
        lm => lm as f64 * jacobi_p10_unchecked(lm - 1, x),
    };
    Ok((top - bottom) / spec.dof() as f64)
}

/// Validity window `c/n ≤ θ ≤ π − ε` of [`gamma_hilb`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HilbWindow {
    pub c: f64,
    pub epsilon: f64,
}

impl Default for HilbWindow {
    fn default() -> Self {
        Self {
            c: DEFAULT_HILB_C,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl HilbWindow {
    pub fn bounds(&self, spec: &FieldSpec) -> (f64, f64) {
        (self.c / spec.n() as f64, PI - self.epsilon)
    }

    pub fn contains(&self, spec: &FieldSpec, theta: f64) -> bool {
        let (lo, hi) = self.bounds(spec);
        theta >= lo && theta <= hi
    }
}

/// `(sin(θ/2))^{−1} (θ / sin θ)^{1/2}`
fn hilb_prefactor(theta: f64) -> f64 {
    (theta / theta.sin()).sqrt() / (0.5 * theta).sin()
}

/// Hilb's approximation of the covariance, remainder dropped:
/// `c/(4π) g(θ) [(n+1) J₁((n+1)θ) − ℓ_min J₁(ℓ_min θ)]`.
///
/// The lower Jacobi term uses the integer band edge `ℓ_min`, so the
/// approximation converges to [`gamma_cd`] for every `(n, β)`. Using the
/// real `α n` instead leaves an error of the size of the rounding gap.
pub fn gamma_hilb(spec: &FieldSpec, theta: f64, window: HilbWindow) -> Result<f64> {
    check_epsilon(window.epsilon)?;
    if !window.contains(spec, theta) {
        let (lo, hi) = window.bounds(spec);
        return Err(domain("theta", theta, format!("[{lo}, {hi}]")));
    }
    let top = (spec.n() + 1) as f64;
    let lm = spec.ell_min() as f64;
    let bessel = top * bessel_j1_unchecked(top * theta) - lm * bessel_j1_unchecked(lm * theta);
    Ok(spec.c_norm() / (4.0 * PI) * hilb_prefactor(theta) * bessel)
}

/// Which branch of the rescaled-angle expansion produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `1 < ψ < n^β`
    Near,
    /// `n^β ≤ ψ ≤ α n (π − ε)`
    Far,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Value {
    pub regime: Regime,
    pub value: f64,
}

fn regime_prefactor(spec: &FieldSpec, psi: f64) -> f64 {
    let an = spec.angular_scale();
    let x = psi / an;
    spec.c_norm() / (4.0 * PI) * hilb_prefactor(x) * an * (2.0 / PI).sqrt()
}

fn far_phases(spec: &FieldSpec, psi: f64) -> (f64, f64) {
    let r = (spec.n() + 1) as f64 / spec.angular_scale();
    let a = 0.5 * (1.0 + r) * psi - 0.75 * PI;
    let b = 0.5 * (r - 1.0) * psi;
    (a, b)
}

fn band_limited(spec: &FieldSpec) -> Result<()> {
    if spec.ensemble() != Ensemble::BandLimited {
        return Err(Error::InvalidSpec(
            "the rescaled-angle expansion needs 0 < β < 1".into(),
        ));
    }
    Ok(())
}

/// Upper end `α n (π − ε)` of the far regime.
pub fn psi_upper(spec: &FieldSpec, epsilon: f64) -> f64 {
    spec.angular_scale() * (PI - epsilon)
}

/// `Γ̄₁(ψ)`, evaluated for `1 < ψ ≤ n^β` (the boundary is included so both
/// branches can be compared there).
pub fn gamma_regime1(spec: &FieldSpec, psi: f64) -> Result<f64> {
    band_limited(spec)?;
    let nu = (spec.n() as f64).powf(spec.beta());
    if !(psi > 1.0 && psi <= nu) {
        return Err(domain("psi", psi, format!("(1, {nu}]")));
    }
    let chi = psi - 0.75 * PI;
    let phase = -chi.cos() * psi / (4.0 * nu) - chi.sin();
    Ok(regime_prefactor(spec, psi) * psi.sqrt() / nu * 0.5 * phase)
}

fn check_far(spec: &FieldSpec, psi: f64, epsilon: f64) -> Result<()> {
    band_limited(spec)?;
    check_epsilon(epsilon)?;
    let nu = (spec.n() as f64).powf(spec.beta());
    let hi = psi_upper(spec, epsilon);
    if !(psi >= nu && psi <= hi) {
        return Err(domain("psi", psi, format!("[{nu}, {hi}]")));
    }
    Ok(())
}

/// `Γ̄₂(ψ)` on `n^β ≤ ψ ≤ α n (π − ε)`.
pub fn gamma_regime2(spec: &FieldSpec, psi: f64, epsilon: f64) -> Result<f64> {
    check_far(spec, psi, epsilon)?;
    let (a, b) = far_phases(spec, psi);
    Ok(regime_prefactor(spec, psi) / psi.sqrt() * (-2.0 * a.sin() * b.sin()))
}

/// Slow envelope of `Γ̄₂`: the same expression with `|sin A|` set to one.
pub fn regime2_envelope(spec: &FieldSpec, psi: f64, epsilon: f64) -> Result<f64> {
    check_far(spec, psi, epsilon)?;
    let (_, b) = far_phases(spec, psi);
    Ok(regime_prefactor(spec, psi) / psi.sqrt() * 2.0 * b.sin().abs())
}

/// Crests of the fast carrier of `Γ̄₂` (points where `|sin A| = 1`) inside
/// the far regime, in increasing order. At these points `|Γ̄₂|` equals its
/// envelope.
pub fn regime2_crests(spec: &FieldSpec, epsilon: f64) -> Result<Vec<f64>> {
    band_limited(spec)?;
    check_epsilon(epsilon)?;
    let nu = (spec.n() as f64).powf(spec.beta());
    let hi = psi_upper(spec, epsilon);
    let r = (spec.n() + 1) as f64 / spec.angular_scale();
    let step = 2.0 * PI / (1.0 + r);
    let first = 2.5 * PI / (1.0 + r);
    let k0 = ((nu - first) / step).ceil().max(0.0) as usize;
    Ok((k0..)
        .map(|k| first + k as f64 * step)
        .skip_while(|&p| p < nu)
        .take_while(|&p| p <= hi)
        .collect())
}

/// The expansion in `ψ`: `Γ̄₁` below `n^β`, `Γ̄₂` from `n^β` on.
pub fn gamma_lemma1(spec: &FieldSpec, psi: f64, epsilon: f64) -> Result<Lemma1Value> {
    band_limited(spec)?;
    check_epsilon(epsilon)?;
    let nu = (spec.n() as f64).powf(spec.beta());
    let hi = psi_upper(spec, epsilon);
    if !(psi > 1.0 && psi <= hi) {
        return Err(domain("psi", psi, format!("(1, {hi}]")));
    }
    if psi < nu {
        Ok(Lemma1Value {
            regime: Regime::Near,
            value: gamma_regime1(spec, psi)?,
        })
    } else {
        Ok(Lemma1Value {
            regime: Regime::Far,
            value: gamma_regime2(spec, psi, epsilon)?,
        })
    }
}

/// `points` equally spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| {
                if i + 1 == points {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (points - 1) as f64
                }
            })
            .collect(),
    }
}

/// Every evaluator on a shared grid of rescaled angles. Approximations are
/// `None` outside their validity windows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceProfile {
    pub spec: FieldSpec,
    pub epsilon: f64,
    pub psi: Vec<f64>,
    pub theta: Vec<f64>,
    pub exact: Vec<f64>,
    pub cd: Vec<f64>,
    pub hilb: Vec<Option<f64>>,
    pub lemma1_r1: Vec<Option<f64>>,
    pub lemma1_r2: Vec<Option<f64>>,
}

pub const PROFILE_HEADER: &str = "psi,theta,exact,cd,hilb,lemma1_r1,lemma1_r2";

/// Evaluates all columns at the given `ψ` values, `0 ≤ ψ ≤ α n π`.
pub fn profile(spec: &FieldSpec, psi_grid: &[f64], epsilon: f64) -> Result<CovarianceProfile> {
    band_limited(spec)?;
    check_epsilon(epsilon)?;
    let window = HilbWindow {
        c: DEFAULT_HILB_C,
        epsilon,
    };
    let mut out = CovarianceProfile {
        spec: *spec,
        epsilon,
        psi: Vec::with_capacity(psi_grid.len()),
        theta: Vec::with_capacity(psi_grid.len()),
        exact: Vec::with_capacity(psi_grid.len()),
        cd: Vec::with_capacity(psi_grid.len()),
        hilb: Vec::with_capacity(psi_grid.len()),
        lemma1_r1: Vec::with_capacity(psi_grid.len()),
        lemma1_r2: Vec::with_capacity(psi_grid.len()),
    };
    for &psi in psi_grid {
        let theta = theta_from_psi(spec, psi)?;
        check_theta(theta)?;
        out.psi.push(psi);
        out.theta.push(theta);
        out.exact.push(gamma_exact(spec, theta)?);
        out.cd.push(gamma_cd(spec, theta)?);
        out.hilb.push(gamma_hilb(spec, theta, window).ok());
        out.lemma1_r1.push(gamma_regime1(spec, psi).ok());
        out.lemma1_r2.push(gamma_regime2(spec, psi, epsilon).ok());
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

fn parse_field(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad number {field:?}")))
}

fn parse_opt(field: &str, line: usize) -> Result<Option<f64>> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        parse_field(field, line).map(Some)
    }
}

impl CovarianceProfile {
    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    /// Writes the header and one row per angle; numbers carry 17
    /// significant digits and absent values are empty fields.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{PROFILE_HEADER}")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}",
                self.psi[i],
                self.theta[i],
                self.exact[i],
                self.cd[i],
                fmt_opt(self.hilb[i]),
                fmt_opt(self.lemma1_r1[i]),
                fmt_opt(self.lemma1_r2[i]),
            )?;
        }
        Ok(())
    }

    /// Reads rows written by [`write_csv`](Self::write_csv). Lines starting
    /// with `#` are skipped.
    pub fn read_csv<R: BufRead>(spec: FieldSpec, epsilon: f64, input: R) -> Result<Self> {
        let mut out = Self {
            spec,
            epsilon,
            psi: Vec::new(),
            theta: Vec::new(),
            exact: Vec::new(),
            cd: Vec::new(),
            hilb: Vec::new(),
            lemma1_r1: Vec::new(),
            lemma1_r2: Vec::new(),
        };
        let mut header_seen = false;
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            let lineno = i + 1;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            if !header_seen {
                if line.trim() != PROFILE_HEADER {
                    return Err(Error::Parse(format!("line {lineno}: unexpected header {line:?}")));
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::Parse(format!(
                    "line {lineno}: expected 7 fields, got {}",
                    fields.len()
                )));
            }
            out.psi.push(parse_field(fields[0], lineno)?);
            out.theta.push(parse_field(fields[1], lineno)?);
            out.exact.push(parse_field(fields[2], lineno)?);
            out.cd.push(parse_field(fields[3], lineno)?);
            out.hilb.push(parse_opt(fields[4], lineno)?);
            out.lemma1_r1.push(parse_opt(fields[5], lineno)?);
            out.lemma1_r2.push(parse_opt(fields[6], lineno)?);
        }
        if !header_seen {
            return Err(Error::Parse("missing header".into()));
        }
        Ok(out)
    }
}
