//! Online square-loss regression oracles: the online Newton step learner for
//! linear models and the randomized reduction that turns any unweighted
//! oracle into a weighted one via resets and Bernoulli-subsampled updates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// One example fed to a regression oracle.
#[derive(Debug, Clone)]
pub struct OracleExample {
    pub weight: f64,
    pub context: Vec<f64>,
    pub action: DVector<f64>,
    pub loss: f64,
}

impl OracleExample {
    pub fn new(weight: f64, context: Vec<f64>, action: DVector<f64>, loss: f64) -> Result<Self> {
        if !(weight >= 0.0) {
            return Err(Error::Config(format!("negative weight {weight}")));
        }
        if !(-1.0..=1.0).contains(&loss) {
            return Err(Error::Config(format!("loss {loss} outside [-1, 1]")));
        }
        Ok(Self {
            weight,
            context,
            action,
            loss,
        })
    }
}

/// An online regression oracle producing per-round parameter predictions
/// `θ̂_t` such that `⟨a, θ̂_t⟩` estimates the loss of action `a`.
pub trait RegressionOracle {
    /// Prediction for the given context. Pure read.
    fn predict(&self, context: &[f64]) -> DVector<f64>;
    /// Processes one (weighted) example.
    fn update(&mut self, example: &OracleExample);
    /// Clears all learned state.
    fn reset(&mut self);
    /// Cheap fingerprint of the internal state, for no-foreign-update checks.
    fn fingerprint(&self) -> u64;
}

/// Online Newton step over the unit ball.
///
/// Update for example `(w, x, a, ℓ)`: with residual `r = ⟨a, θ̂⟩ − ℓ`,
/// gradient `g = 2·w·r·a`; the preconditioner accumulates `g gᵀ` (inverse
/// maintained by Sherman-Morrison) and `θ̂` takes a projected Newton step in
/// the preconditioner-induced norm.
#[derive(Debug, Clone)]
pub struct OnsOracle {
    dim: usize,
    theta: DVector<f64>,
    precond: DMatrix<f64>,
    precond_inv: DMatrix<f64>,
    step_scale: f64,
    ridge: f64,
    updates_since_refresh: usize,
}

/// Default ONS step scale. Exp-concavity of the square loss over predictions
/// and losses in `[-1, 1]` (residual range `[-2, 2]`) gives curvature
/// constant 1/8 and gradient bound 4 over the diameter-2 ball, so the
/// classical rate parameter is `(1/2)·min{1/(4·G·D), α} = 1/64` and the
/// Newton step multiplies the natural gradient by its reciprocal.
pub const ONS_DEFAULT_STEP_SCALE: f64 = 64.0;

/// Default initial ridge regularizer.
pub const ONS_DEFAULT_RIDGE: f64 = 1.0;

impl OnsOracle {
    pub fn new(dim: usize) -> Self {
        Self::with_params(dim, ONS_DEFAULT_STEP_SCALE, ONS_DEFAULT_RIDGE)
    }

    pub fn with_params(dim: usize, step_scale: f64, ridge: f64) -> Self {
        assert!(step_scale > 0.0 && ridge > 0.0);
        Self {
            dim,
            theta: DVector::zeros(dim),
            precond: DMatrix::identity(dim, dim) * ridge,
            precond_inv: DMatrix::identity(dim, dim) / ridge,
            step_scale,
            ridge,
            updates_since_refresh: 0,
        }
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn precond(&self) -> &DMatrix<f64> {
        &self.precond
    }

    pub fn precond_inv(&self) -> &DMatrix<f64> {
        &self.precond_inv
    }

    /// Projection of `y` onto the unit ball in the norm induced by the
    /// preconditioner `A`: `argmin_{‖θ‖≤1} ‖θ − y‖²_A`. Solved by bisection
    /// on the Lagrange multiplier `ν` in `θ(ν) = (A + νI)⁻¹ A y`, whose
    /// Euclidean norm is strictly decreasing in `ν`.
    fn project(&self, y: &DVector<f64>) -> DVector<f64> {
        if y.norm() <= 1.0 {
            return y.clone();
        }
        let eig = self.precond.clone().symmetric_eigen();
        // c = Qᵀ y; θ(ν) = Q diag(λ/(λ+ν)) c.
        let c = eig.eigenvectors.transpose() * y;
        let norm_at = |nu: f64| -> f64 {
            (0..self.dim)
                .map(|i| {
                    let lam = eig.eigenvalues[i];
                    let s = lam / (lam + nu) * c[i];
                    s * s
                })
                .sum::<f64>()
                .sqrt()
        };
        let mut lo = 0.0;
        let mut hi = eig.eigenvalues.max() * y.norm();
        while norm_at(hi) > 1.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if norm_at(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-10 * (1.0 + hi) {
                break;
            }
        }
        let nu = 0.5 * (lo + hi);
        let scaled = DVector::from_iterator(
            self.dim,
            (0..self.dim).map(|i| eig.eigenvalues[i] / (eig.eigenvalues[i] + nu) * c[i]),
        );
        let out = &eig.eigenvectors * scaled;
        // Guard against residual bisection slack.
        let n = out.norm();
        if n > 1.0 {
            out / n
        } else {
            out
        }
    }

    fn refresh_inverse(&mut self) {
        self.precond_inv = self
            .precond
            .clone()
            .cholesky()
            .expect("preconditioner must stay positive definite")
            .inverse();
        self.updates_since_refresh = 0;
    }
}

impl RegressionOracle for OnsOracle {
    fn predict(&self, _context: &[f64]) -> DVector<f64> {
        self.theta.clone()
    }

    fn update(&mut self, ex: &OracleExample) {
        let r = ex.action.dot(&self.theta) - ex.loss;
        let g = 2.0 * ex.weight * r * &ex.action;
        let gnorm2 = g.norm_squared();
        if gnorm2 == 0.0 {
            return;
        }
        // precond += g gᵀ with Sherman-Morrison on the inverse.
        let ig = &self.precond_inv * &g;
        let denom = 1.0 + g.dot(&ig);
        self.precond.ger(1.0, &g, &g, 1.0);
        self.precond_inv.ger(-1.0 / denom, &ig, &ig, 1.0);
        self.updates_since_refresh += 1;
        if self.updates_since_refresh >= 4 * self.dim.max(8) {
            self.refresh_inverse();
        }
        let candidate = &self.theta - self.step_scale * (&self.precond_inv * &g);
        self.theta = self.project(&candidate);
    }

    fn reset(&mut self) {
        *self = Self::with_params(self.dim, self.step_scale, self.ridge);
    }

    fn fingerprint(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for x in self.theta.iter().chain(self.precond.iter()) {
            h = (h ^ x.to_bits()).wrapping_mul(0x100_0000_01b3);
        }
        h
    }
}

/// Online Newton step over a feature-mapped linear class: the prediction is
/// `θ̂ = Θ̂ ψ(x)`, realized as plain ONS on the flattened parameter with
/// rank-one features `a ⊗ ψ(x)`.
#[derive(Debug, Clone)]
pub struct FeatureMappedOns {
    inner: OnsOracle,
    action_dim: usize,
    feature_dim: usize,
}

impl FeatureMappedOns {
    pub fn new(action_dim: usize, feature_dim: usize) -> Self {
        Self {
            inner: OnsOracle::new(action_dim * feature_dim),
            action_dim,
            feature_dim,
        }
    }

    fn lift(&self, action: &DVector<f64>, context: &[f64]) -> DVector<f64> {
        let mut v = DVector::zeros(self.action_dim * self.feature_dim);
        for i in 0..self.action_dim {
            for j in 0..self.feature_dim {
                v[i * self.feature_dim + j] = action[i] * context[j];
            }
        }
        v
    }
}

impl RegressionOracle for FeatureMappedOns {
    fn predict(&self, context: &[f64]) -> DVector<f64> {
        assert_eq!(context.len(), self.feature_dim, "feature dimension mismatch");
        let flat = self.inner.theta();
        DVector::from_iterator(
            self.action_dim,
            (0..self.action_dim).map(|i| {
                (0..self.feature_dim)
                    .map(|j| flat[i * self.feature_dim + j] * context[j])
                    .sum::<f64>()
            }),
        )
    }

    fn update(&mut self, ex: &OracleExample) {
        let lifted = self.lift(&ex.action, &ex.context);
        let lifted_ex = OracleExample {
            weight: ex.weight,
            context: Vec::new(),
            action: lifted,
            loss: ex.loss,
        };
        self.inner.update(&lifted_ex);
    }

    fn reset(&mut self) {
        self.inner.reset();
    }

    fn fingerprint(&self) -> u64 {
        self.inner.fingerprint()
    }
}

/// Randomized weighted→unweighted reduction: when a weight exceeds the
/// running cap the inner oracle is reset and the cap doubles past the new
/// weight; each example is then forwarded with probability `w / w_max`.
#[derive(Debug)]
pub struct WeightedReduction<O: RegressionOracle> {
    inner: O,
    w_max: f64,
    resets: usize,
    updates_forwarded: usize,
}

impl<O: RegressionOracle> WeightedReduction<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            w_max: 0.0,
            resets: 0,
            updates_forwarded: 0,
        }
    }

    pub fn w_max(&self) -> f64 {
        self.w_max
    }

    pub fn resets(&self) -> usize {
        self.resets
    }

    pub fn updates_forwarded(&self) -> usize {
        self.updates_forwarded
    }

    /// Starts a round: applies the reset trigger for the incoming weight,
    /// then returns the inner oracle's prediction.
    pub fn predict_weighted(&mut self, weight: f64, context: &[f64]) -> DVector<f64> {
        if weight > self.w_max {
            self.inner.reset();
            self.w_max = 2.0 * weight;
            self.resets += 1;
        }
        self.inner.predict(context)
    }

    /// Finishes a round: forwards the example to the inner oracle with
    /// probability `w / w_max` (zero when `w_max = 0`).
    pub fn update_weighted(&mut self, ex: &OracleExample, rng: &mut RngStream) {
        let p = if self.w_max > 0.0 {
            ex.weight / self.w_max
        } else {
            0.0
        };
        if rng.bernoulli(p) {
            let unweighted = OracleExample {
                weight: 1.0,
                context: ex.context.clone(),
                action: ex.action.clone(),
                loss: ex.loss,
            };
            self.inner.update(&unweighted);
            self.updates_forwarded += 1;
        }
    }

    pub fn fingerprint(&self) -> u64 {
        self.inner
            .fingerprint()
            .wrapping_mul(31)
            .wrapping_add(self.w_max.to_bits())
            .wrapping_add(self.resets as u64)
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}
