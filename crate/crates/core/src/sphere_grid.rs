//! Product quadrature on the sphere: Gauss–Legendre nodes in `cos θ` times
//! equispaced longitudes.
//!
//! With `N_θ` Gauss nodes and `N_φ` longitudes the rule integrates every
//! spherical polynomial of degree `≤ min(2N_θ − 1, N_φ − 1)` exactly. Values
//! on a grid are stored row-major: colatitude outer, longitude inner.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 100;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes sorted in
/// decreasing order (so the matching colatitudes increase).
///
/// Nodes come from Newton iteration started at Chebyshev-like guesses; the
/// rule is built on one half and mirrored, which makes it exactly symmetric.
pub fn gauss_legendre(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 {
        return Err(Error::InvalidConfig("Gauss-Legendre order must be positive".into()));
    }
    let n = order;
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut converged = false;
        let mut deriv = 0.0;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, dp) = legendre_with_derivative(n, x);
            deriv = dp;
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= NEWTON_TOL {
                converged = true;
                deriv = legendre_with_derivative(n, x).1;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence {
                order: n,
                index: i,
                iterations: NEWTON_MAX_ITER,
            });
        }
        let mirror = n - 1 - i;
        if mirror == i {
            x = 0.0;
            deriv = legendre_with_derivative(n, 0.0).1;
        }
        let w = 2.0 / ((1.0 - x * x) * deriv * deriv);
        nodes[i] = x;
        weights[i] = w;
        nodes[mirror] = -x;
        weights[mirror] = w;
    }
    Ok((nodes, weights))
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (1.0, x);
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    let nf = n as f64;
    let dp = nf * (x * cur - prev) / (x * x - 1.0);
    (cur, dp)
}

/// Gauss–Legendre × uniform-longitude grid on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    n_theta: usize,
    n_phi: usize,
    theta: Vec<f64>,
    cos_theta: Vec<f64>,
    sin_theta: Vec<f64>,
    /// Gauss weight of each colatitude row times `2π / n_phi`; every cell in
    /// a row carries this weight.
    row_weights: Vec<f64>,
    exact_degree: usize,
}

impl SphereGrid {
    /// Grid that integrates spherical polynomials of degree `target_degree`
    /// exactly: `⌈(d+1)/2⌉` colatitudes and `d+1` longitudes rounded up to
    /// an even count.
    pub fn build(target_degree: usize) -> Result<Self> {
        if target_degree < 1 {
            return Err(Error::InvalidConfig("target degree must be at least 1".into()));
        }
        let n_theta = (target_degree + 1).div_ceil(2);
        let mut n_phi = target_degree + 1;
        if n_phi % 2 == 1 {
            n_phi += 1;
        }
        Self::with_counts(n_theta, n_phi)
    }

    /// Grid for a field of top frequency `n` with the given oversampling
    /// factor, i.e. target degree `⌈oversample · n⌉`.
    pub fn for_field(n: usize, oversample: f64) -> Result<Self> {
        if !(oversample.is_finite() && oversample >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "oversample factor must be ≥ 1, got {oversample}"
            )));
        }
        Self::build((oversample * n as f64).ceil() as usize)
    }

    pub fn with_counts(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_phi == 0 {
            return Err(Error::InvalidConfig("n_phi must be positive".into()));
        }
        let (nodes, gl_weights) = gauss_legendre(n_theta)?;
        let dphi = 2.0 * PI / n_phi as f64;
        let theta: Vec<f64> = nodes.iter().map(|&x| x.acos()).collect();
        let sin_theta = nodes.iter().map(|&x| (1.0 - x * x).sqrt()).collect();
        let row_weights = gl_weights.iter().map(|&w| w * dphi).collect();
        Ok(Self {
            n_theta,
            n_phi,
            theta,
            cos_theta: nodes,
            sin_theta,
            row_weights,
            exact_degree: (2 * n_theta - 1).min(n_phi - 1),
        })
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn exact_degree(&self) -> usize {
        self.exact_degree
    }

    pub fn theta_nodes(&self) -> &[f64] {
        &self.theta
    }

    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_theta
    }

    pub fn sin_theta(&self) -> &[f64] {
        &self.sin_theta
    }

    pub fn row_weights(&self) -> &[f64] {
        &self.row_weights
    }

    pub fn phi(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.n_phi as f64
    }

    /// Row index of the colatitude `π − θ_j`.
    pub fn mirror_row(&self, j: usize) -> usize {
        self.n_theta - 1 - j
    }

    /// Combined weight of every node, in storage order.
    pub fn quad_weights(&self) -> Vec<f64> {
        self.row_weights
            .iter()
            .flat_map(|&w| std::iter::repeat_n(w, self.n_phi))
            .collect()
    }

    /// `(θ, φ)` of the node with flat index `i`.
    pub fn node(&self, i: usize) -> (f64, f64) {
        (self.theta[i / self.n_phi], self.phi(i % self.n_phi))
    }

    /// `Σ_i w_i · values_i`.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        Ok(self.integrate_map(values, |v| v))
    }

    /// `Σ_i w_i · f(values_i)`; the caller guarantees the length.
    pub(crate) fn integrate_map(&self, values: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        values
            .chunks_exact(self.n_phi)
            .zip(&self.row_weights)
            .map(|(row, &w)| w * row.iter().map(|&v| f(v)).sum::<f64>())
            .sum()
    }

    /// Evaluates `f(θ, φ)` on every node.
    pub fn tabulate(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for &t in &self.theta {
            for k in 0..self.n_phi {
                out.push(f(t, self.phi(k)));
            }
        }
        out
    }
}
