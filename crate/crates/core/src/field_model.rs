//! The band-limited ensemble: parameters, random harmonic coefficients and
//! synthesis of field values on a [`SphereGrid`].
//!
//! The field is
//!
//! ```text
//! T̄(x) = √c · Σ_{ℓ=ℓ_min}^{n} Σ_{m=−ℓ}^{ℓ} a_{ℓm} Y_{ℓm}(x)
//! ```
//!
//! with real harmonics `Y_{ℓm}`, i.i.d. standard normal `a_{ℓm}`,
//! `ℓ_min = ⌈α n⌉`, `α = √(1 − n^{−β})`, and `c = 4π/D` where
//! `D = (n+1)² − ℓ_min²` counts the coefficients. This makes
//! `E[T̄(x)²] = 1` for every `(n, β)`, including those where `α n` is not an
//! integer and `D` differs from `n^{2−β} + 2n + 1`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{assoc_legendre_normalized, assoc_recurrence_coeffs, sectoral_seeds, AssocLegendreTable};
use crate::sphere_grid::SphereGrid;

/// Rounding of the non-integer lower band edge `α n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandRounding {
    #[default]
    Ceil,
    Floor,
}

/// Which family of frequency bands the spec describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    /// `ℓ ∈ [⌈α n⌉, n]` with `0 < β < 1`.
    BandLimited,
    /// One frequency, `ℓ = n` (the `β ≡ 1` limit).
    SingleDegree,
    /// Every frequency `ℓ ∈ [0, n]` (the `β ≡ 0` limit).
    FullBand,
}

/// Parameters of the ensemble with all derived quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    n: usize,
    beta: f64,
    alpha: f64,
    ell_min: usize,
    dof: usize,
    c_norm: f64,
    ensemble: Ensemble,
}

/// `FieldSpec::new`, under the operation name used throughout the docs.
pub fn make_spec(n: usize, beta: f64) -> Result<FieldSpec> {
    FieldSpec::new(n, beta)
}

impl FieldSpec {
    /// Band-limited spec with the default (ceiling) band edge.
    pub fn new(n: usize, beta: f64) -> Result<Self> {
        Self::with_rounding(n, beta, BandRounding::Ceil)
    }

    pub fn with_rounding(n: usize, beta: f64, rounding: BandRounding) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSpec(format!("n must be at least 2, got {n}")));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidSpec(format!("beta must lie in (0, 1), got {beta}")));
        }
        let alpha = (1.0 - (n as f64).powf(-beta)).sqrt();
        let edge = alpha * n as f64;
        let nearest = edge.round();
        let ell_min = if (edge - nearest).abs() < 1e-9 {
            nearest as usize
        } else {
            match rounding {
                BandRounding::Ceil => edge.ceil() as usize,
                BandRounding::Floor => edge.floor() as usize,
            }
        };
        Ok(Self::from_band(n, beta, alpha, ell_min, Ensemble::BandLimited))
    }

    /// The single-frequency ensemble `T̄ = T_n`.
    pub fn single_degree(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidSpec("single-degree mode needs n ≥ 1".into()));
        }
        Ok(Self::from_band(n, 1.0, 1.0, n, Ensemble::SingleDegree))
    }

    /// Every frequency from 0 to `n`.
    pub fn full_band(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidSpec("full-band mode needs n ≥ 1".into()));
        }
        Ok(Self::from_band(n, 0.0, 0.0, 0, Ensemble::FullBand))
    }

    fn from_band(n: usize, beta: f64, alpha: f64, ell_min: usize, ensemble: Ensemble) -> Self {
        let dof = (n + 1) * (n + 1) - ell_min * ell_min;
        Self {
            n,
            beta,
            alpha,
            ell_min,
            dof,
            c_norm: 4.0 * PI / dof as f64,
            ensemble,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn ell_min(&self) -> usize {
        self.ell_min
    }

    /// Number of real coefficients `D = Σ_{ℓ=ℓ_min}^{n} (2ℓ+1)`.
    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn c_norm(&self) -> f64 {
        self.c_norm
    }

    pub fn ensemble(&self) -> Ensemble {
        self.ensemble
    }

    /// `n^{2−β} + 2n + 1`, the count that holds when `α n` is an integer.
    pub fn idealized_dof(&self) -> f64 {
        let n = self.n as f64;
        n.powf(2.0 - self.beta) + 2.0 * n + 1.0
    }

    /// `Var(h_2) = 2 (4π)² / D`.
    pub fn h2_variance(&self) -> f64 {
        2.0 * (4.0 * PI).powi(2) / self.dof as f64
    }

    /// `α n`, the scale that maps colatitude to the rescaled angle `ψ`.
    pub fn angular_scale(&self) -> f64 {
        self.alpha * self.n as f64
    }
}

/// One realisation of the real coefficients `a_{ℓm}`, `ℓ_min ≤ ℓ ≤ n`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoefficients {
    spec: FieldSpec,
    coeffs: Vec<f64>,
}

impl HarmonicCoefficients {
    pub fn zeros(spec: FieldSpec) -> Self {
        Self {
            spec,
            coeffs: vec![0.0; spec.dof()],
        }
    }

    pub fn from_vec(spec: FieldSpec, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != spec.dof() {
            return Err(Error::ShapeMismatch {
                expected: spec.dof(),
                got: coeffs.len(),
            });
        }
        Ok(Self { spec, coeffs })
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    /// Flat storage, ordered by `ℓ` then `m = −ℓ..=ℓ`.
    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    fn index(&self, l: usize, m: i64) -> usize {
        let lm = self.spec.ell_min;
        assert!(l >= lm && l <= self.spec.n && m.unsigned_abs() as usize <= l);
        l * l - lm * lm + (m + l as i64) as usize
    }

    pub fn get(&self, l: usize, m: i64) -> f64 {
        self.coeffs[self.index(l, m)]
    }

    pub fn set(&mut self, l: usize, m: i64, value: f64) {
        let i = self.index(l, m);
        self.coeffs[i] = value;
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum()
    }

    /// Field value at `(θ, φ)` given a table of `P̄_ℓ^m(cos θ)` up to at
    /// least degree `n`.
    pub fn evaluate_with(&self, table: &AssocLegendreTable, phi: f64) -> f64 {
        let mut acc = 0.0;
        for l in self.spec.ell_min..=self.spec.n {
            for m in -(l as i64)..=(l as i64) {
                acc += self.get(l, m) * table.real_harmonic(l, m, phi);
            }
        }
        self.spec.c_norm.sqrt() * acc
    }

    pub fn evaluate(&self, theta: f64, phi: f64) -> Result<f64> {
        let table = assoc_legendre_normalized(self.spec.n, theta.cos())?;
        Ok(self.evaluate_with(&table, phi))
    }
}

/// Draws `D` i.i.d. standard normal coefficients.
pub fn sample_coefficients<R: Rng + ?Sized>(spec: &FieldSpec, rng: &mut R) -> HarmonicCoefficients {
    let coeffs = (0..spec.dof()).map(|_| rng.sample(StandardNormal)).collect();
    HarmonicCoefficients { spec: *spec, coeffs }
}

/// Field values on every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    grid: Arc<SphereGrid>,
    values: Vec<f64>,
    degree: Option<usize>,
}

impl FieldSample {
    pub fn from_values(grid: Arc<SphereGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            grid,
            values,
            degree: None,
        })
    }

    /// Records the top harmonic degree of the sampled function, used to
    /// decide whether quadratures of its powers are exact.
    pub fn with_degree(mut self, degree: usize) -> Self {
        self.degree = Some(degree);
        self
    }

    pub fn degree(&self) -> Option<usize> {
        self.degree
    }

    pub fn grid(&self) -> &SphereGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// The sample of `−T̄`.
    pub fn negated(&self) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| -v).collect(),
            degree: self.degree,
        }
    }

    /// `theta_index,phi_index,value` rows, values with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "theta_index,phi_index,value")?;
        let n_phi = self.grid.n_phi();
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{},{:.16e}", i / n_phi, i % n_phi, v)?;
        }
        Ok(())
    }

    /// Little-endian dump: `n_theta: u32`, `n_phi: u32`, then the values as
    /// `f64` in storage order.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&(self.grid.n_theta() as u32).to_le_bytes())?;
        out.write_all(&(self.grid.n_phi() as u32).to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

// Tables above this many entries are rebuilt row by row during synthesis.
const TABLE_BUDGET: usize = 32 * 1024 * 1024;

/// Layout of the band-restricted Legendre values of one colatitude row: for
/// each `m = 0..=n` the run `ℓ = max(m, ℓ_min)..=n`.
#[derive(Debug, Clone)]
struct BandLayout {
    n: usize,
    ell_min: usize,
    offsets: Vec<usize>,
    row_len: usize,
}

impl BandLayout {
    fn new(spec: &FieldSpec) -> Self {
        let n = spec.n();
        let mut offsets = Vec::with_capacity(n + 2);
        let mut acc = 0;
        for m in 0..=n {
            offsets.push(acc);
            acc += n + 1 - m.max(spec.ell_min());
        }
        offsets.push(acc);
        Self {
            n,
            ell_min: spec.ell_min(),
            offsets,
            row_len: acc,
        }
    }

    fn lo(&self, m: usize) -> usize {
        m.max(self.ell_min)
    }

    fn run(&self, m: usize) -> std::ops::Range<usize> {
        self.offsets[m]..self.offsets[m + 1]
    }

    /// Writes `P̄_ℓ^m(x)` for the band into `out` (length `row_len`).
    fn fill_row(&self, x: f64, s: f64, out: &mut [f64]) {
        let seeds = sectoral_seeds(self.n, s);
        for (m, &seed) in seeds.iter().enumerate() {
            let lo = self.lo(m);
            let base = self.offsets[m];
            let mut prev = 0.0;
            let mut cur = seed;
            for l in m..=self.n {
                if l > m {
                    let next = if l == m + 1 {
                        (2.0 * m as f64 + 3.0).sqrt() * x * cur
                    } else {
                        let (a, b) = assoc_recurrence_coeffs(l, m);
                        a * (x * cur - b * prev)
                    };
                    prev = cur;
                    cur = next;
                }
                if l >= lo {
                    out[base + l - lo] = cur;
                }
            }
        }
    }
}

/// Synthesises fields for one `(spec, grid)` pair.
///
/// The Legendre values of the band are tabulated once for the northern
/// half of the grid and shared by every replicate; the southern rows follow
/// from `P̄_ℓ^m(−x) = (−1)^{ℓ+m} P̄_ℓ^m(x)`. Each pair of mirrored rows is
/// finished with one complex FFT over longitude.
pub struct Synthesizer {
    spec: FieldSpec,
    grid: Arc<SphereGrid>,
    layout: BandLayout,
    table: Option<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Synthesizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Synthesizer")
            .field("spec", &self.spec)
            .field("n_theta", &self.grid.n_theta())
            .field("n_phi", &self.grid.n_phi())
            .field("tabulated", &self.table.is_some())
            .finish()
    }
}

impl Synthesizer {
    pub fn new(spec: FieldSpec, grid: Arc<SphereGrid>) -> Result<Self> {
        if grid.exact_degree() < spec.n() {
            return Err(Error::UnderResolved {
                required: spec.n(),
                available: grid.exact_degree(),
            });
        }
        let layout = BandLayout::new(&spec);
        let half = grid.n_theta().div_ceil(2);
        let table = if layout.row_len * half <= TABLE_BUDGET {
            let mut data = vec![0.0; layout.row_len * half];
            for (j, row) in data.chunks_exact_mut(layout.row_len).enumerate() {
                layout.fill_row(grid.cos_theta()[j], grid.sin_theta()[j], row);
            }
            Some(data)
        } else {
            None
        };
        let fft = FftPlanner::new().plan_fft_inverse(grid.n_phi());
        Ok(Self {
            spec,
            grid,
            layout,
            table,
            fft,
        })
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    /// Rearranges coefficients into the `(m, ℓ)` layout of the Legendre rows:
    /// cosine coefficients `a_{ℓ,m}` and sine coefficients `a_{ℓ,−m}`.
    fn split_coefficients(&self, coeffs: &HarmonicCoefficients) -> (Vec<f64>, Vec<f64>) {
        let lay = &self.layout;
        let mut cos_c = vec![0.0; lay.row_len];
        let mut sin_c = vec![0.0; lay.row_len];
        for m in 0..=lay.n {
            let lo = lay.lo(m);
            let base = lay.offsets[m];
            for l in lo..=lay.n {
                cos_c[base + l - lo] = coeffs.get(l, m as i64);
                if m > 0 {
                    sin_c[base + l - lo] = coeffs.get(l, -(m as i64));
                }
            }
        }
        (cos_c, sin_c)
    }

    /// Field values on the grid for one set of coefficients.
    pub fn synthesize(&self, coeffs: &HarmonicCoefficients) -> Result<FieldSample> {
        if coeffs.spec() != &self.spec {
            return Err(Error::InvalidSpec("coefficients belong to a different spec".into()));
        }
        let grid = &*self.grid;
        let (n_theta, n_phi) = (grid.n_theta(), grid.n_phi());
        let lay = &self.layout;
        let (cos_c, sin_c) = self.split_coefficients(coeffs);
        let scale = self.spec.c_norm().sqrt();

        let mut values = vec![0.0; grid.len()];
        let mut row_buf = if self.table.is_none() {
            vec![0.0; lay.row_len]
        } else {
            Vec::new()
        };
        let mut spectrum = vec![Complex::new(0.0, 0.0); n_phi];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];

        for j in 0..n_theta.div_ceil(2) {
            let row: &[f64] = match &self.table {
                Some(t) => &t[j * lay.row_len..(j + 1) * lay.row_len],
                None => {
                    lay.fill_row(grid.cos_theta()[j], grid.sin_theta()[j], &mut row_buf);
                    &row_buf
                }
            };
            spectrum.fill(Complex::new(0.0, 0.0));
            for m in 0..=lay.n {
                let range = lay.run(m);
                let p = &row[range.clone()];
                let (ce, co) = parity_dot(p, &cos_c[range.clone()]);
                let (se, so) = if m > 0 {
                    parity_dot(p, &sin_c[range])
                } else {
                    (0.0, 0.0)
                };
                // (ℓ + m) even terms are symmetric about the equator
                let flip = (lay.lo(m) + m) % 2 == 1;
                let (ce, co, se, so) = if flip { (co, ce, so, se) } else { (ce, co, se, so) };
                let north = Complex::new(ce + co, -(se + so));
                let south = Complex::new(ce - co, -(se - so));
                if m == 0 {
                    spectrum[0] += Complex::new(north.re, south.re) * scale;
                } else {
                    let w = scale * FRAC_1_SQRT_2;
                    let i_south = Complex::new(-south.im, south.re);
                    let i_south_conj = Complex::new(south.im, south.re);
                    spectrum[m % n_phi] += (north + i_south) * w;
                    spectrum[(n_phi - m % n_phi) % n_phi] += (north.conj() + i_south_conj) * w;
                }
            }
            self.fft.process_with_scratch(&mut spectrum, &mut scratch);
            let mirror = grid.mirror_row(j);
            for (k, z) in spectrum.iter().enumerate() {
                values[j * n_phi + k] = z.re;
                if mirror != j {
                    values[mirror * n_phi + k] = z.im;
                }
            }
        }
        Ok(FieldSample::from_values(Arc::clone(&self.grid), values)?.with_degree(self.spec.n()))
    }

    /// Reference synthesis by direct summation of `a_{ℓm} Y_{ℓm}` at every
    /// node. Quadratic in the band size per node; meant for verification.
    pub fn synthesize_direct(&self, coeffs: &HarmonicCoefficients) -> Result<FieldSample> {
        let grid = &*self.grid;
        let mut values = Vec::with_capacity(grid.len());
        for &t in grid.theta_nodes() {
            let table = assoc_legendre_normalized(self.spec.n(), t.cos())?;
            for k in 0..grid.n_phi() {
                values.push(coeffs.evaluate_with(&table, grid.phi(k)));
            }
        }
        Ok(FieldSample::from_values(Arc::clone(&self.grid), values)?.with_degree(self.spec.n()))
    }
}

/// Sums of `p[i]·c[i]` over even and odd `i` separately.
#[inline]
fn parity_dot(p: &[f64], c: &[f64]) -> (f64, f64) {
    let mut even = 0.0;
    let mut odd = 0.0;
    let mut pairs_p = p.chunks_exact(2);
    let mut pairs_c = c.chunks_exact(2);
    for (pp, cc) in (&mut pairs_p).zip(&mut pairs_c) {
        even += pp[0] * cc[0];
        odd += pp[1] * cc[1];
    }
    if let (Some(&lp), Some(&lc)) = (pairs_p.remainder().first(), pairs_c.remainder().first()) {
        even += lp * lc;
    }
    (even, odd)
}
