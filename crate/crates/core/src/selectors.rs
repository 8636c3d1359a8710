//! Exploration distributions over finite action sets: inverse gap weighting
//! and the log-barrier scheme, plus the minimax-value oracle used to certify
//! both of them and the logdet-barrier roundings.

use nalgebra::{DMatrix, DVector};

use crate::types::{moments, ActionSet, SparseDistribution};

/// Inverse gap weighting. With `i* = argmin θ` (lowest index on ties),
/// `p_i = 1/(K + γ(θ_i − θ_{i*}))` for `i ≠ i*` and `p_{i*}` absorbs the
/// remainder.
pub fn igw(theta: &[f64], gamma: f64) -> SparseDistribution {
    let k = theta.len();
    assert!(k >= 1 && gamma >= 0.0);
    let best = argmin(theta);
    let mut p = vec![0.0; k];
    let mut rest = 0.0;
    for i in 0..k {
        if i != best {
            p[i] = 1.0 / (k as f64 + gamma * (theta[i] - theta[best]));
            rest += p[i];
        }
    }
    p[best] = 1.0 - rest;
    SparseDistribution::from_dense(&p).expect("igw weights are a distribution by construction")
}

/// Log-barrier distribution: `p_i = 1/(λ + γθ_i)` with the unique
/// `λ > −γ·min θ` normalizing the sum, found by bisection on the strictly
/// decreasing map `λ ↦ Σ 1/(λ + γθ_i)`.
pub fn log_barrier(theta: &[f64], gamma: f64) -> SparseDistribution {
    let k = theta.len();
    assert!(k >= 2 && gamma > 0.0);
    let min_t = theta.iter().cloned().fold(f64::INFINITY, f64::min);
    let sum_at = |lam: f64| -> f64 {
        theta.iter().map(|&t| 1.0 / (lam + gamma * t)).sum::<f64>()
    };
    // S(−γ·minθ + 1) ≥ 1 and S(−γ·minθ + K) ≤ 1, so the root is bracketed.
    let base = -gamma * min_t;
    let mut lo = base + 1.0;
    let mut hi = base + k as f64;
    let mut lam = 0.5 * (lo + hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        lam = mid;
        let s = sum_at(mid);
        if (s - 1.0).abs() <= 1e-14 {
            break;
        }
        if s > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p: Vec<f64> = theta.iter().map(|&t| 1.0 / (lam + gamma * t)).collect();
    let total: f64 = p.iter().sum();
    debug_assert!((total - 1.0).abs() <= 1e-10, "normalization residual {}", total - 1.0);
    // Renormalize the bisection slack so downstream validation is exact.
    let p: Vec<f64> = p.iter().map(|&x| x / total).collect();
    SparseDistribution::from_dense(&p).expect("log-barrier weights are positive")
}

/// Value of the per-round minimax game at `p`:
/// `max_a ⟨ā_p − a, θ̂⟩ + (1/γ)‖ā_p − a‖²_{(H_p − ā_pā_pᵀ)⁺}`,
/// with the pseudo-inverse restricted to the affine span of the centered
/// second moment. Returns `+∞` when some `ā_p − a` leaves that span.
pub fn minimax_value(
    p: &SparseDistribution,
    theta_hat: &DVector<f64>,
    gamma: f64,
    set: &ActionSet,
) -> f64 {
    assert!(gamma > 0.0);
    let m = moments(p, set);
    let d = set.ambient_dim();
    let mut centered = m.second_moment.clone();
    centered.ger(-1.0, &m.mean_action, &m.mean_action, 1.0);
    let eig = centered.symmetric_eigen();
    let mut best = f64::NEG_INFINITY;
    for i in 0..set.len() {
        let a = set.get(i).coords();
        let v = &m.mean_action - a;
        let linear = v.dot(theta_hat);
        // ‖v‖²_{M⁺}: expand v in the eigenbasis, dropping null directions;
        // mass left in the null space means the quadratic term is infinite.
        let c = eig.eigenvectors.transpose() * &v;
        let mut quad = 0.0;
        let mut null_mass = 0.0;
        for j in 0..d {
            let lam = eig.eigenvalues[j];
            if lam > 1e-12 {
                quad += c[j] * c[j] / lam;
            } else {
                null_mass += c[j] * c[j];
            }
        }
        let val = if null_mass > 1e-9 * (1.0 + v.norm_squared()) {
            f64::INFINITY
        } else {
            linear + quad / gamma
        };
        if val > best {
            best = val;
        }
    }
    best
}

/// Minimax value for a finite-arm instance with `θ` over the standard basis
/// embedding, the form whose optimal value is exactly `(K−1)/γ`.
pub fn minimax_value_finite_arms(p: &SparseDistribution, theta: &[f64], gamma: f64) -> f64 {
    let k = theta.len();
    let set = ActionSet::standard_basis(k);
    let th = DVector::from_column_slice(theta);
    minimax_value(p, &th, gamma, &set)
}

pub(crate) fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] < v[best] {
            best = i;
        }
    }
    best
}

#[allow(dead_code)]
pub(crate) fn matrix_rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(1e-30)
}
