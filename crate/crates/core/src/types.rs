//! Shared numeric and probabilistic primitives: action vectors and sets,
//! sparse distributions over action indices, and distribution moments.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Relative SVD cutoff used when computing affine dimension.
pub const AFFINE_DIM_TOL: f64 = 1e-8;

const NORM_SLACK: f64 = 1e-9;

/// An action vector constrained to the (closed) unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionVector {
    coords: DVector<f64>,
}

impl ActionVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let v = DVector::from_vec(coords);
        if v.norm() > 1.0 + NORM_SLACK {
            return Err(Error::Config(format!(
                "action norm {} exceeds the unit ball",
                v.norm()
            )));
        }
        Ok(Self { coords: v })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn dot(&self, theta: &DVector<f64>) -> f64 {
        self.coords.dot(theta)
    }

    /// Standard basis vector `e_i` in `dim` dimensions.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        Self { coords: v }
    }
}

/// An ordered, finite set of actions presented in a single round. Indices are
/// stable: distribution supports refer to positions in this list.
#[derive(Debug, Clone)]
pub struct ActionSet {
    actions: Vec<ActionVector>,
    affine_dim: std::cell::OnceCell<usize>,
}

impl ActionSet {
    pub fn new(actions: Vec<ActionVector>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::Config("action set must be nonempty".into()));
        }
        let d = actions[0].dim();
        if actions.iter().any(|a| a.dim() != d) {
            return Err(Error::Config("mixed action dimensions".into()));
        }
        Ok(Self {
            actions,
            affine_dim: std::cell::OnceCell::new(),
        })
    }

    /// The `K` standard basis vectors, for finite-arm rounds.
    pub fn standard_basis(k: usize) -> Self {
        let actions = (0..k).map(|i| ActionVector::basis(k, i)).collect();
        Self {
            actions,
            affine_dim: std::cell::OnceCell::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.actions[0].dim()
    }

    pub fn get(&self, i: usize) -> &ActionVector {
        &self.actions[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &ActionVector> {
        self.actions.iter()
    }

    /// Dimension of the smallest affine subspace containing the set, cached
    /// after first computation.
    pub fn affine_dim(&self) -> usize {
        *self
            .affine_dim
            .get_or_init(|| affine_dimension(self, AFFINE_DIM_TOL))
    }
}

/// Rank of the difference matrix `{a_i - a_0}`, counting singular values above
/// `tol * max(largest singular value, 1)`.
pub fn affine_dimension(set: &ActionSet, tol: f64) -> usize {
    let n = set.len();
    if n <= 1 {
        return 0;
    }
    let d = set.ambient_dim();
    let a0 = set.get(0).coords();
    let mut m = DMatrix::zeros(d, n - 1);
    for j in 1..n {
        m.set_column(j - 1, &(set.get(j).coords() - a0));
    }
    let sv = m.singular_values();
    let cutoff = tol * sv.max().max(1.0);
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// A countably-supported probability distribution over action indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDistribution {
    support: Vec<(usize, f64)>,
}

impl SparseDistribution {
    pub fn new(support: Vec<(usize, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Config("empty distribution support".into()));
        }
        let mut seen = std::collections::HashSet::new();
        let mut total = 0.0;
        for &(i, p) in &support {
            if !seen.insert(i) {
                return Err(Error::Config(format!("duplicate support index {i}")));
            }
            if !(p > 0.0) {
                return Err(Error::Config(format!("nonpositive probability {p}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("probabilities sum to {total}")));
        }
        Ok(Self { support })
    }

    pub fn point_mass(index: usize) -> Self {
        Self {
            support: vec![(index, 1.0)],
        }
    }

    /// Builds from a dense probability vector, dropping zero entries and
    /// renormalizing away accumulated round-off.
    pub fn from_dense(probs: &[f64]) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Config("dense vector has no mass".into()));
        }
        let support: Vec<(usize, f64)> = probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, &p)| (i, p / total))
            .collect();
        Self::new(support)
    }

    pub fn support(&self) -> &[(usize, f64)] {
        &self.support
    }

    pub fn support_size(&self) -> usize {
        self.support.len()
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.support
            .iter()
            .find(|&&(i, _)| i == index)
            .map_or(0.0, |&(_, p)| p)
    }

    /// Inverse-CDF sample over the support list in stored order; consumes
    /// exactly one uniform draw.
    pub fn sample(&self, rng: &mut RngStream) -> usize {
        let u = rng.uniform();
        let mut cum = 0.0;
        for &(i, p) in &self.support {
            cum += p;
            if u < cum {
                return i;
            }
        }
        self.support.last().unwrap().0
    }

    /// Total variation distance to another distribution over the same index
    /// space.
    pub fn total_variation(&self, other: &SparseDistribution) -> f64 {
        let mut indices: Vec<usize> = self.support.iter().map(|&(i, _)| i).collect();
        indices.extend(other.support.iter().map(|&(i, _)| i));
        indices.sort_unstable();
        indices.dedup();
        0.5 * indices
            .iter()
            .map(|&i| (self.prob(i) - other.prob(i)).abs())
            .sum::<f64>()
    }
}

/// Mean action and second-moment matrix of a distribution over an action set.
#[derive(Debug, Clone)]
pub struct Moments {
    pub mean_action: DVector<f64>,
    pub second_moment: DMatrix<f64>,
}

/// `ā_p = Σ p_i a_i`, `H_p = Σ p_i a_i a_iᵀ`.
pub fn moments(p: &SparseDistribution, set: &ActionSet) -> Moments {
    let d = set.ambient_dim();
    let mut mean = DVector::zeros(d);
    let mut second = DMatrix::zeros(d, d);
    for &(i, w) in p.support() {
        let a = set.get(i).coords();
        mean += w * a;
        second.ger(w, a, a, 1.0);
    }
    Moments {
        mean_action: mean,
        second_moment: second,
    }
}
