//! Scalar special functions: Legendre and fully normalised associated
//! Legendre functions, the Jacobi polynomial `P_n^{(1,0)}`, the Bessel
//! function `J_1`, probabilists' Hermite polynomials and the standard
//! Gaussian density and distribution function.
//!
//! Everything here is a pure function of its arguments.
//!
//! # Christoffel–Darboux convention
//!
//! The kernel sum `Σ_{ℓ=0}^{n} (2ℓ+1) P_ℓ(t)` equals `(n+1) P_n^{(1,0)}(t)`.
//! The `(0,1)` superscript is the wrong one: at `t = 1` the left side is
//! `(n+1)²` while `P_n^{(0,1)}(1) = 1` and `P_n^{(1,0)}(1) = n+1`. The
//! unit tests of this module and of [`crate::covariance`] check the
//! identity numerically for every `n ≤ 512`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{domain, Result};

/// `1/√(2π)`
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Crossover between the power series and the large-argument expansion of
/// [`bessel_j1`].
pub const BESSEL_CROSSOVER: f64 = 12.0;

fn check_unit_interval(what: &'static str, x: f64) -> Result<()> {
    if x.is_nan() || x.abs() > 1.0 {
        return Err(domain(what, x, "[-1, 1]"));
    }
    Ok(())
}

/// Values `P_0(x) ..= P_{ℓ_max}(x)` of the Legendre polynomials at one
/// argument.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreTable {
    argument: f64,
    values: Vec<f64>,
}

impl LegendreTable {
    pub fn argument(&self) -> f64 {
        self.argument
    }

    pub fn max_degree(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, degree: usize) -> f64 {
        self.values[degree]
    }
}

/// Tabulates `P_ℓ(x)` for `ℓ = 0..=l_max` with the upward recurrence
/// `(ℓ+1) P_{ℓ+1} = (2ℓ+1) x P_ℓ − ℓ P_{ℓ−1}`.
pub fn legendre_all(l_max: usize, x: f64) -> Result<LegendreTable> {
    check_unit_interval("x", x)?;
    let mut values = Vec::with_capacity(l_max + 1);
    values.push(1.0);
    if l_max >= 1 {
        values.push(x);
    }
    for l in 1..l_max {
        let lf = l as f64;
        let next = ((2.0 * lf + 1.0) * x * values[l] - lf * values[l - 1]) / (lf + 1.0);
        values.push(next);
    }
    Ok(LegendreTable {
        argument: x,
        values,
    })
}

/// Single Legendre value `P_ℓ(x)`, same recurrence as [`legendre_all`]
/// without the table.
pub fn legendre(l: usize, x: f64) -> Result<f64> {
    check_unit_interval("x", x)?;
    Ok(legendre_unchecked(l, x))
}

pub(crate) fn legendre_unchecked(l: usize, x: f64) -> f64 {
    if l == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, x);
    for k in 1..l {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Fully normalised associated Legendre functions `P̄_ℓ^m(cos θ)` for
/// `0 ≤ m ≤ ℓ ≤ ℓ_max`.
///
/// The normalisation is the one for which the real spherical harmonics are
///
/// ```text
/// Y_{ℓ0}  = P̄_ℓ^0(cos θ)
/// Y_{ℓm}  = √2 P̄_ℓ^m(cos θ) cos(mφ)      m > 0
/// Y_{ℓ,−m} = √2 P̄_ℓ^m(cos θ) sin(mφ)     m > 0
/// ```
///
/// so that `Σ_m Y_{ℓm}² = (2ℓ+1)/(4π)` and each `Y_{ℓm}` has unit `L²` norm
/// on the sphere. No Condon–Shortley phase is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct AssocLegendreTable {
    max_degree: usize,
    cos_theta: f64,
    values: Vec<f64>,
}

#[inline]
fn tri_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

impl AssocLegendreTable {
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn cos_theta(&self) -> f64 {
        self.cos_theta
    }

    /// `P̄_ℓ^m`, panicking if `m > ℓ` or `ℓ > ℓ_max`.
    pub fn get(&self, l: usize, m: usize) -> f64 {
        assert!(m <= l && l <= self.max_degree, "(l={l}, m={m}) outside table");
        self.values[tri_index(l, m)]
    }

    /// Real spherical harmonic `Y_{ℓm}(θ, φ)` for signed `m`, where `θ` is
    /// the colatitude this table was built for.
    pub fn real_harmonic(&self, l: usize, m: i64, phi: f64) -> f64 {
        let am = m.unsigned_abs() as usize;
        let p = self.get(l, am);
        match m {
            0 => p,
            m if m > 0 => std::f64::consts::SQRT_2 * p * (m as f64 * phi).cos(),
            m => std::f64::consts::SQRT_2 * p * ((-m) as f64 * phi).sin(),
        }
    }
}

/// Coefficients of the normalised three-term recurrence in `ℓ` at fixed `m`:
/// `P̄_ℓ^m = a (x P̄_{ℓ−1}^m − b P̄_{ℓ−2}^m)`.
#[inline]
pub(crate) fn assoc_recurrence_coeffs(l: usize, m: usize) -> (f64, f64) {
    let lf = l as f64;
    let mf = m as f64;
    let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
    let lm1 = lf - 1.0;
    let b = ((lm1 * lm1 - mf * mf) / (4.0 * lm1 * lm1 - 1.0)).sqrt();
    (a, b)
}

/// Sectoral seeds `P̄_m^m(cos θ)` for `m = 0..=m_max`, normalised at every
/// step so they stay finite for degrees in the thousands.
pub(crate) fn sectoral_seeds(m_max: usize, sin_theta: f64) -> Vec<f64> {
    let mut seeds = Vec::with_capacity(m_max + 1);
    let mut p = 0.5 / PI.sqrt();
    seeds.push(p);
    for m in 1..=m_max {
        let mf = m as f64;
        p *= sin_theta * ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt();
        seeds.push(p);
    }
    seeds
}

/// Builds the table of `P̄_ℓ^m(cos θ)` with the sectoral-seed plus
/// upward-in-ℓ recurrence, normalised inside the recurrence.
pub fn assoc_legendre_normalized(l_max: usize, cos_theta: f64) -> Result<AssocLegendreTable> {
    check_unit_interval("cos_theta", cos_theta)?;
    let x = cos_theta;
    let s = (1.0 - x * x).max(0.0).sqrt();
    let seeds = sectoral_seeds(l_max, s);
    let mut values = vec![0.0; tri_index(l_max, l_max) + 1];
    for (m, &seed) in seeds.iter().enumerate() {
        values[tri_index(m, m)] = seed;
        if m == l_max {
            break;
        }
        let mut prev = seed;
        let mut cur = (2.0 * m as f64 + 3.0).sqrt() * x * seed;
        values[tri_index(m + 1, m)] = cur;
        for l in (m + 2)..=l_max {
            let (a, b) = assoc_recurrence_coeffs(l, m);
            let next = a * (x * cur - b * prev);
            values[tri_index(l, m)] = next;
            prev = cur;
            cur = next;
        }
    }
    Ok(AssocLegendreTable {
        max_degree: l_max,
        cos_theta,
        values,
    })
}

/// Jacobi polynomial `P_n^{(1,0)}(x)` by the three-term recurrence
/// `(n+1)(2n−1) P_n = ((4n²−1) x + 1) P_{n−1} − (n−1)(2n+1) P_{n−2}`.
pub fn jacobi_p10(n: usize, x: f64) -> Result<f64> {
    check_unit_interval("x", x)?;
    Ok(jacobi_p10_unchecked(n, x))
}

pub(crate) fn jacobi_p10_unchecked(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, 0.5 * (3.0 * x + 1.0));
    for k in 2..=n {
        let kf = k as f64;
        let next = (((4.0 * kf * kf - 1.0) * x + 1.0) * cur - (kf - 1.0) * (2.0 * kf + 1.0) * prev)
            / ((kf + 1.0) * (2.0 * kf - 1.0));
        prev = cur;
        cur = next;
    }
    cur
}

/// Bessel function of the first kind of order one, for `x ≥ 0`.
///
/// Power series below [`BESSEL_CROSSOVER`], Hankel's large-argument
/// expansion (truncated at its smallest term) above. Both branches are
/// accurate to about `1e-12` absolute at the crossover and better away
/// from it.
pub fn bessel_j1(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(domain("x", x, "[0, ∞)"));
    }
    Ok(if x < BESSEL_CROSSOVER {
        bessel_j1_series(x)
    } else {
        bessel_j1_asymptotic(x)
    })
}

pub(crate) fn bessel_j1_unchecked(x: f64) -> f64 {
    if x < BESSEL_CROSSOVER {
        bessel_j1_series(x)
    } else {
        bessel_j1_asymptotic(x)
    }
}

/// `Σ_k (−1)^k (x/2)^{2k+1} / (k! (k+1)!)`
pub fn bessel_j1_series(x: f64) -> f64 {
    let half = 0.5 * x;
    let q = half * half;
    let mut term = half;
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= -q / (k * (k + 1.0));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) || k > 200.0 {
            break;
        }
    }
    sum
}

/// Hankel expansion `√(2/(πx)) (P cos χ − Q sin χ)`, `χ = x − 3π/4`,
/// summed until the terms stop decreasing.
pub fn bessel_j1_asymptotic(x: f64) -> f64 {
    let mu = 4.0;
    let mut a = 1.0;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut last = 1.0;
    for k in 1..64 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        a *= (mu - odd * odd) / (8.0 * kf * x);
        let mag = a.abs();
        if mag > last || mag < 1e-18 {
            break;
        }
        last = mag;
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * a;
        } else {
            q += sign * a;
        }
    }
    let chi = x - 0.75 * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// The two-term large-argument form
/// `√(2/(πx)) cos(x − 3π/4) − 3/(4√(2π) x^{3/2}) sin(x − 3π/4)`,
/// accurate to `O(x^{−5/2})`.
pub fn bessel_j1_two_term(x: f64) -> f64 {
    let chi = x - 0.75 * PI;
    (2.0 / (PI * x)).sqrt() * chi.cos() - 3.0 / (4.0 * (2.0 * PI).sqrt() * x.powf(1.5)) * chi.sin()
}

/// Probabilists' Hermite values `H_0(t) ..= H_{q_max}(t)` from
/// `H_k = t H_{k−1} − (k−1) H_{k−2}`.
pub fn hermite_all(q_max: usize, t: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(q_max + 1);
    h.push(1.0);
    if q_max >= 1 {
        h.push(t);
    }
    for k in 2..=q_max {
        let next = t * h[k - 1] - (k as f64 - 1.0) * h[k - 2];
        h.push(next);
    }
    h
}

pub fn hermite(q: usize, t: f64) -> f64 {
    if q == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, t);
    for k in 2..=q {
        let next = t * cur - (k as f64 - 1.0) * prev;
        prev = cur;
        cur = next;
    }
    cur
}

pub fn gaussian_pdf(u: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * u * u).exp()
}

/// `Φ(u) = erfc(−u/√2)/2`.
pub fn gaussian_cdf(u: f64) -> f64 {
    0.5 * libm::erfc(-u * FRAC_1_SQRT_2)
}

/// Coefficient `J_q(u)` of the Hermite expansion of `1{· > u}`:
/// `J_0 = Φ(u)` and `J_q = −H_{q−1}(u) φ(u)` for `q ≥ 1`.
pub fn jq_coefficient(q: usize, u: f64) -> f64 {
    if q == 0 {
        // tabulated convention; the constant term of the expansion of
        // 1{T > u} is 1 − Φ(u)
        return gaussian_cdf(u);
    }
    -hermite(q - 1, u) * gaussian_pdf(u)
}

/// `q!` as a float.
pub fn factorial(q: usize) -> f64 {
    (1..=q).fold(1.0, |acc, k| acc * k as f64)
}
