//! The excursion area `S(u) = ∫ 1{T̄ > u} dx`, the Hermite projections
//! `h_q = ∫ H_q(T̄(x)) dx` and the chi-square law of `h_2`.
//!
//! The area expands as `S(u) = Σ_q J_q(u)/q! · h_q` with
//! `J_q(u) = −H_{q−1}(u) φ(u)`; the projections of different order are
//! uncorrelated because `E[H_p(Z₁) H_q(Z₂)] = δ_{pq} q! (E[Z₁Z₂])^q`, hence
//! `Var S(u) = Σ_q J_q(u)²/q!² · Var h_q`.
//!
//! By orthonormality of the harmonics, `h_2 = c Σ a_{ℓm}² − 4π`, a shifted
//! and scaled chi-square with `D` degrees of freedom, so
//! `Var h_2 = 2 (4π)²/D` exactly.
//!
//! The area counts nodes with `T̄ > u` strictly; ties have probability zero.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution};
use serde::{Deserialize, Serialize};

use crate::field_model::{FieldSample, FieldSpec, HarmonicCoefficients};
use crate::specfun::{factorial, gaussian_pdf, jq_coefficient};

/// One excursion-area measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcursionResult {
    pub u: f64,
    pub area: f64,
    pub replicate_id: usize,
    pub spec: FieldSpec,
}

/// Quadrature of `1{T̄ > u}` over the sphere.
pub fn excursion_area(sample: &FieldSample, u: f64) -> f64 {
    let grid = sample.grid();
    sample
        .values()
        .chunks_exact(grid.n_phi())
        .zip(grid.row_weights())
        .map(|(row, &w)| w * row.iter().filter(|&&v| v > u).count() as f64)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMethod {
    Quadrature,
    /// From the coefficients through the chi-square identity; `q = 2` only.
    CoefficientExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosProjection {
    pub q: usize,
    pub value: f64,
    pub method: ProjectionMethod,
    /// Whether the grid integrates `H_q(T̄)` exactly, i.e. resolves degree
    /// `q·n`. `false` when the sample's degree is unknown.
    pub resolved: bool,
}

fn resolved(sample: &FieldSample, q: usize) -> bool {
    sample
        .degree()
        .is_some_and(|n| sample.grid().exact_degree() >= q * n)
}

/// `h_q` for `q = 1..=q_max` by one pass over the grid.
pub fn chaos_projections(sample: &FieldSample, q_max: usize) -> Vec<ChaosProjection> {
    let grid = sample.grid();
    let mut totals = vec![0.0; q_max + 1];
    let mut row_sums = vec![0.0; q_max + 1];
    for (row, &w) in sample.values().chunks_exact(grid.n_phi()).zip(grid.row_weights()) {
        row_sums.fill(0.0);
        for &t in row {
            let (mut prev, mut cur) = (1.0, t);
            if q_max >= 1 {
                row_sums[1] += cur;
            }
            for k in 2..=q_max {
                let next = t * cur - (k as f64 - 1.0) * prev;
                prev = cur;
                cur = next;
                row_sums[k] += cur;
            }
        }
        for (tot, s) in totals.iter_mut().zip(&row_sums) {
            *tot += w * s;
        }
    }
    (1..=q_max)
        .map(|q| ChaosProjection {
            q,
            value: totals[q],
            method: ProjectionMethod::Quadrature,
            resolved: resolved(sample, q),
        })
        .collect()
}

/// `h_q` by quadrature, `q ≥ 1`.
pub fn chaos_projection(sample: &FieldSample, q: usize) -> ChaosProjection {
    assert!(q >= 1, "chaos order starts at 1");
    chaos_projections(sample, q)[q - 1]
}

/// `c Σ a_{ℓm}² − 4π`
pub fn h2_exact_from_coeffs(coeffs: &HarmonicCoefficients) -> f64 {
    coeffs.spec().c_norm() * coeffs.sum_of_squares() - 4.0 * PI
}

pub fn h2_projection_exact(coeffs: &HarmonicCoefficients) -> ChaosProjection {
    ChaosProjection {
        q: 2,
        value: h2_exact_from_coeffs(coeffs),
        method: ProjectionMethod::CoefficientExact,
        resolved: true,
    }
}

/// Draws `c χ²(D) − 4π` directly, without coefficients or a field.
pub fn h2_sample_direct<R: Rng + ?Sized>(spec: &FieldSpec, rng: &mut R) -> f64 {
    let chi2 = ChiSquared::new(spec.dof() as f64).expect("D ≥ 1");
    spec.c_norm() * chi2.sample(rng) - 4.0 * PI
}

/// `E[S(u)] = 4π (1 − Φ(u))`
pub fn expected_area(u: f64) -> f64 {
    4.0 * PI * (1.0 - crate::specfun::gaussian_cdf(u))
}

/// `(J_q(u)/q!)²`, the weight of `Var h_q` in `Var S(u)`.
pub fn chaos_weight(q: usize, u: f64) -> f64 {
    (jq_coefficient(q, u) / factorial(q)).powi(2)
}

/// Leading-order variance of the area, `u² φ(u)²/4 · 2 (4π)²/D`.
pub fn leading_area_variance(spec: &FieldSpec, u: f64) -> f64 {
    (u * gaussian_pdf(u)).powi(2) / 4.0 * spec.h2_variance()
}

/// `8π² u² φ(u)²`, the constant of the leading variance when
/// `D = n^{2−β}` to first order.
pub fn leading_coefficient(u: f64) -> f64 {
    8.0 * PI * PI * (u * gaussian_pdf(u)).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosTerm {
    pub q: usize,
    /// `(J_q(u)/q!)²`
    pub weight: f64,
    /// `Var h_q`: exact for `q = 2`, supplied estimate otherwise.
    pub variance: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosVariancePrediction {
    pub u: f64,
    pub leading: f64,
    pub terms: Vec<ChaosTerm>,
    /// Sum of the contributions of every listed term.
    pub partial_sum: f64,
}

/// Decomposition of `Var S(u)` into chaos components. `q = 2` uses the
/// exact chi-square variance; `estimates` supplies `(q, Var̂ h_q)` for the
/// higher orders up to `q_max` (missing orders are skipped).
pub fn chaos_variance_prediction(
    spec: &FieldSpec,
    u: f64,
    q_max: usize,
    estimates: &[(usize, f64)],
) -> ChaosVariancePrediction {
    let mut terms = Vec::new();
    for q in 2..=q_max.max(2) {
        let variance = if q == 2 {
            Some(spec.h2_variance())
        } else {
            estimates.iter().find(|(k, _)| *k == q).map(|&(_, v)| v)
        };
        if let Some(variance) = variance {
            let weight = chaos_weight(q, u);
            terms.push(ChaosTerm {
                q,
                weight,
                variance,
                contribution: weight * variance,
            });
        }
    }
    let partial_sum = terms.iter().map(|t| t.contribution).sum();
    ChaosVariancePrediction {
        u,
        leading: leading_area_variance(spec, u),
        terms,
        partial_sum,
    }
}
