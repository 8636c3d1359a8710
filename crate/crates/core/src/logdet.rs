//! Frank-Wolfe solver for the logdet-barrier exploration distribution.
//!
//! Actions are projected onto an orthonormal basis of their affine span,
//! lifted by a constant coordinate (ã = (a; 1)), and γ is absorbed into θ,
//! so the working objective is G(p) = ⟨ā_p, θ⟩ − log det H̃_p with
//! H̃_p = Σ p_a ã ãᵀ. The solver terminates once every action passes the
//! η-rounding test ‖ã‖²_{H̃_p⁻¹} ≤ (1+η)(d̃ + ⟨a − ā_p, θ⟩).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::selectors::argmin;
use crate::types::{ActionSet, SparseDistribution};

/// Certificate attached to a solver output.
#[derive(Debug, Clone)]
pub struct RoundingReport {
    pub eta_achieved: f64,
    pub worst_action_index: usize,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    /// True when the iteration cap fired before the target held.
    pub capped: bool,
}

/// Working state of the lifted problem.
#[derive(Debug, Clone)]
pub struct LiftedState {
    /// Dense weights over the original action indices.
    pub weights: Vec<f64>,
    /// ã_p, last coordinate 1.
    pub mean_lifted: DVector<f64>,
    /// H̃_p, bottom-right entry 1.
    pub second_lifted: DMatrix<f64>,
    /// Inverse of H̃_p, maintained by rank-one updates.
    pub inv_second: DMatrix<f64>,
    /// log det H̃_p, maintained incrementally.
    pub log_det: f64,
    /// Current G(p).
    pub objective: f64,
}

struct Problem {
    /// Lifted, span-projected actions ã_i.
    lifted: Vec<DVector<f64>>,
    /// Absorbed loss estimates ⟨b_i, γθ_proj⟩ per action.
    scores: Vec<f64>,
    d_tilde: usize,
}

impl Problem {
    /// Projects onto the affine span, lifts, and absorbs γ.
    fn build(set: &ActionSet, theta_hat: &DVector<f64>, gamma: f64) -> Self {
        let n = set.len();
        let d = set.ambient_dim();
        let a0 = set.get(0).coords().clone();
        let diffs = DMatrix::from_columns(
            &(0..n)
                .map(|i| set.get(i).coords() - &a0)
                .collect::<Vec<_>>(),
        );
        let svd = diffs.clone().svd(true, false);
        let tol = crate::types::AFFINE_DIM_TOL * svd.singular_values.max().max(1.0);
        let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
        let u = svd.u.as_ref().expect("svd requested u");
        let q = u.columns(0, rank.max(1)).into_owned();
        let dim = if rank == 0 { 0 } else { rank };
        let mut lifted = Vec::with_capacity(n);
        let mut scores = Vec::with_capacity(n);
        for i in 0..n {
            let b = if dim == 0 {
                DVector::zeros(0)
            } else {
                q.transpose() * (set.get(i).coords() - &a0)
            };
            let mut v = DVector::zeros(dim + 1);
            v.rows_mut(0, dim).copy_from(&b);
            v[dim] = 1.0;
            // ⟨a_i, γθ⟩ up to the shared constant ⟨a_0, γθ⟩, which cancels
            // in every difference the solver evaluates.
            let s = if dim == 0 {
                0.0
            } else {
                gamma * b.dot(&(q.transpose() * theta_hat))
            };
            lifted.push(v);
            scores.push(s);
        }
        // The ambient dim is unused past this point; silence on d.
        let _ = d;
        Self {
            lifted,
            scores,
            d_tilde: dim + 1,
        }
    }

    fn mean_score(&self, weights: &[f64]) -> f64 {
        weights
            .iter()
            .zip(&self.scores)
            .map(|(&w, &s)| w * s)
            .sum()
    }
}

impl LiftedState {
    fn from_weights(prob: &Problem, weights: Vec<f64>) -> Result<Self> {
        let dt = prob.d_tilde;
        let mut mean = DVector::zeros(dt);
        let mut second = DMatrix::zeros(dt, dt);
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                mean += w * &prob.lifted[i];
                second.ger(w, &prob.lifted[i], &prob.lifted[i], 1.0);
            }
        }
        let chol = second
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Contract("initial design matrix is singular".into()))?;
        let log_det = 2.0
            * (0..dt)
                .map(|i| chol.l_dirty()[(i, i)].ln())
                .sum::<f64>();
        let inv = chol.inverse();
        let objective = prob.mean_score(&weights) - log_det;
        Ok(Self {
            weights,
            mean_lifted: mean,
            second_lifted: second,
            inv_second: inv,
            log_det,
            objective,
        })
    }

    /// p ← (1−x)p + x e_k with rank-one inverse and logdet maintenance.
    fn mix_toward(&mut self, prob: &Problem, k: usize, x: f64) {
        let a = &prob.lifted[k];
        let z = self.quad(a);
        let ia = &self.inv_second * a;
        let denom = 1.0 - x + x * z;
        self.second_lifted *= 1.0 - x;
        self.second_lifted.ger(x, a, a, 1.0);
        self.inv_second /= 1.0 - x;
        self.inv_second.ger(-x / ((1.0 - x) * denom), &ia, &ia, 1.0);
        self.log_det += (prob.d_tilde as f64 - 1.0) * (1.0 - x).ln() + denom.ln();
        for w in self.weights.iter_mut() {
            *w *= 1.0 - x;
        }
        self.weights[k] += x;
        self.mean_lifted = (1.0 - x) * &self.mean_lifted + x * a;
        self.objective = prob.mean_score(&self.weights) - self.log_det;
    }

    fn quad(&self, a: &DVector<f64>) -> f64 {
        a.dot(&(&self.inv_second * a))
    }

    /// Full recomputation of the inverse and logdet to cap rank-one drift.
    fn refresh(&mut self, prob: &Problem) -> Result<()> {
        let fresh = Self::from_weights(prob, self.weights.clone())?;
        *self = fresh;
        Ok(())
    }
}

/// η-rounding test over the full action list. Returns
/// `(passes, worst_eta, worst_index)` with
/// `worst_eta = max_a ‖ã‖²_{H̃⁻¹} / (d̃ + ⟨a − ā_p, θ⟩) − 1`.
pub fn eta_rounding_check(
    state: &LiftedState,
    prob_scores: &[f64],
    lifted: &[DVector<f64>],
    d_tilde: usize,
    target_eta: f64,
) -> Result<(bool, f64, usize)> {
    let mean_score: f64 = state
        .weights
        .iter()
        .zip(prob_scores)
        .map(|(&w, &s)| w * s)
        .sum();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_idx = 0;
    for (i, a) in lifted.iter().enumerate() {
        let den = d_tilde as f64 + (prob_scores[i] - mean_score);
        if den < 1.0 - 1e-9 {
            return Err(Error::Contract(format!(
                "rounding denominator {den} < 1: correction step missing"
            )));
        }
        let ratio = state.quad(a) / den;
        if ratio > worst {
            worst = ratio;
            worst_idx = i;
        }
    }
    let worst_eta = worst - 1.0;
    Ok((worst_eta <= target_eta, worst_eta, worst_idx))
}

/// Kumar-Yildirim style greedy initialization: pick extreme pairs along
/// directions orthogonal to previously chosen differences, yielding at most
/// 2·d̃ support points whose affine span is full. Uniform over all actions
/// when the set is small.
fn initial_weights(prob: &Problem, n: usize) -> Vec<f64> {
    let dim = prob.d_tilde - 1;
    if n <= 4 * dim.max(1) {
        return vec![1.0 / n as f64; n];
    }
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    for _ in 0..dim {
        // Direction: largest residual coordinate axis after projecting out
        // the chosen difference directions.
        let mut best_dir: Option<DVector<f64>> = None;
        let mut best_norm = 0.0;
        for c in 0..dim {
            let mut v = DVector::zeros(dim);
            v[c] = 1.0;
            for b in &basis {
                let dot = v.dot(b);
                v -= dot * b;
            }
            let nv = v.norm();
            if nv > best_norm {
                best_norm = nv;
                best_dir = Some(v / nv);
            }
        }
        let Some(u) = best_dir else { break };
        if best_norm < 1e-10 {
            break;
        }
        let proj = |i: usize| prob.lifted[i].rows(0, dim).dot(&u);
        let mut hi = 0;
        let mut lo = 0;
        for i in 1..n {
            if proj(i) > proj(hi) {
                hi = i;
            }
            if proj(i) < proj(lo) {
                lo = i;
            }
        }
        if proj(hi) - proj(lo) < 1e-12 {
            break;
        }
        chosen.push(hi);
        chosen.push(lo);
        let mut diff = (prob.lifted[hi].rows(0, dim) - prob.lifted[lo].rows(0, dim)).into_owned();
        for b in &basis {
            let dot = diff.dot(b);
            diff -= dot * b;
        }
        let nd = diff.norm();
        if nd > 1e-12 {
            basis.push(diff / nd);
        }
    }
    chosen.sort_unstable();
    chosen.dedup();
    let mut w = vec![0.0; n];
    for &i in &chosen {
        w[i] = 1.0 / chosen.len() as f64;
    }
    w
}

/// Minimizer of `h(x) = x·c − (d̃−1)·ln(1−x) − ln(1 + x(Z−1))` over
/// `x ∈ [0, 1)`: the restriction of G to the segment toward one atom.
fn line_search(c: f64, z: f64, d_tilde: usize) -> f64 {
    let dt = d_tilde as f64;
    let w = z - 1.0;
    let h = |x: f64| x * c - (dt - 1.0) * (1.0 - x).ln() - (1.0 + x * w).ln();
    // Stationarity clears denominators to a quadratic in x.
    let a2 = -c * w;
    let a1 = c * (w - 1.0) + dt * w;
    let a0 = c + dt - 1.0 - w;
    let mut candidates = vec![0.0];
    if a2.abs() < 1e-14 {
        if a1.abs() > 1e-14 {
            candidates.push(-a0 / a1);
        }
    } else {
        let disc = a1 * a1 - 4.0 * a2 * a0;
        if disc >= 0.0 {
            let s = disc.sqrt();
            candidates.push((-a1 + s) / (2.0 * a2));
            candidates.push((-a1 - s) / (2.0 * a2));
        }
    }
    let mut best_x = 0.0;
    let mut best_h = 0.0;
    for &x in &candidates {
        if (0.0..1.0 - 1e-12).contains(&x) && 1.0 + x * w > 0.0 {
            let hx = h(x);
            if hx < best_h {
                best_h = hx;
                best_x = x;
            }
        }
    }
    best_x
}

fn iteration_cap(dim: usize, gamma: f64, eta: f64) -> usize {
    let d = dim.max(1) as f64;
    let cap = 50.0
        * (d * gamma.max(std::f64::consts::E).ln()
            + d * d * ((d.ln()).max(0.0) + 1.0 / eta + 2.0));
    cap.ceil() as usize
}

/// Frank-Wolfe solve of the logdet-barrier problem to an η-rounding.
pub fn logdet_barrier_solve(
    set: &ActionSet,
    theta_hat: &DVector<f64>,
    gamma: f64,
    eta: f64,
) -> Result<(SparseDistribution, RoundingReport)> {
    let n = set.len();
    if n == 0 {
        return Err(Error::Config("empty action set".into()));
    }
    let d = set.ambient_dim();
    if !(gamma > 0.0) {
        return Err(Error::Config(format!("gamma {gamma} must be positive")));
    }
    if !(eta > 0.0 && eta <= 2.0 * d.max(1) as f64) {
        return Err(Error::Config(format!("eta {eta} outside (0, 2d]")));
    }
    if set.affine_dim() == 0 {
        let report = RoundingReport {
            eta_achieved: 0.0,
            worst_action_index: 0,
            iterations: 0,
            objective_trace: vec![0.0],
            capped: false,
        };
        return Ok((SparseDistribution::point_mass(0), report));
    }

    let prob = Problem::build(set, theta_hat, gamma);
    let dt = prob.d_tilde;
    let mut state = LiftedState::from_weights(&prob, initial_weights(&prob, n))?;
    let cap = iteration_cap(dt - 1, gamma, eta);
    let mut trace = vec![state.objective];
    let best_score_idx = argmin(&prob.scores);

    let mut iterations = 0;
    let mut capped = false;
    let (mut passes, mut worst_eta, mut worst_idx);
    loop {
        // Correction step: keep every rounding denominator at least 1.
        let mean_score = prob.mean_score(&state.weights);
        let c_star = prob.scores[best_score_idx] - mean_score;
        if (dt as f64) + c_star < 1.0 {
            let z = state.quad(&prob.lifted[best_score_idx]);
            let x = line_search(c_star, z, dt);
            if x > 0.0 {
                state.mix_toward(&prob, best_score_idx, x);
            }
        }

        let check = eta_rounding_check(&state, &prob.scores, &prob.lifted, dt, eta)?;
        passes = check.0;
        worst_eta = check.1;
        worst_idx = check.2;
        if passes {
            break;
        }
        if iterations >= cap {
            capped = true;
            break;
        }

        // Frank-Wolfe step toward the worst-ratio atom.
        let mean_score = prob.mean_score(&state.weights);
        let c = prob.scores[worst_idx] - mean_score;
        let z = state.quad(&prob.lifted[worst_idx]);
        let x = line_search(c, z, dt);
        if x > 0.0 {
            state.mix_toward(&prob, worst_idx, x);
        }
        iterations += 1;
        if iterations % (2 * dt) == 0 {
            state.refresh(&prob)?;
        }
        trace.push(state.objective);
        if x == 0.0 {
            // No descent direction left along this atom; report as capped
            // rather than spin on a numerically stuck iterate.
            capped = !passes;
            break;
        }
    }

    let dist = SparseDistribution::from_dense(&state.weights)?;
    Ok((
        dist,
        RoundingReport {
            eta_achieved: worst_eta,
            worst_action_index: worst_idx,
            iterations,
            objective_trace: trace,
            capped,
        },
    ))
}

/// Exposes the lifted state for a given distribution, for certification and
/// tests.
pub fn lifted_state_for(
    set: &ActionSet,
    theta_hat: &DVector<f64>,
    gamma: f64,
    weights: &[f64],
) -> Result<(LiftedState, Vec<f64>, Vec<DVector<f64>>, usize)> {
    let prob = Problem::build(set, theta_hat, gamma);
    let state = LiftedState::from_weights(&prob, weights.to_vec())?;
    Ok((state, prob.scores, prob.lifted, prob.d_tilde))
}
