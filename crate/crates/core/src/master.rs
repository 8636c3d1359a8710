//! (α,R)-hedged FTRL master over M arms with the Tsallis entropy potential
//! F(x) = −2Σ√x_i, importance-weighted loss estimates, and the bias ledger
//! that grants negative-regret hedging to high-variance arms.

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// FTRL solve under the Tsallis potential: argmin_p ⟨p, L⟩ + η⁻¹F(p),
/// with closed form `p_i = (η(L_i − λ))⁻²` and λ < min L normalizing the
/// sum, found by bisection (Σp is increasing in λ).
pub fn tsallis_solve(l: &[f64], eta_lr: f64) -> Vec<f64> {
    let m = l.len();
    assert!(m >= 1 && eta_lr > 0.0);
    assert!(l.iter().all(|x| x.is_finite()));
    if m == 1 {
        return vec![1.0];
    }
    let min_l = l.iter().cloned().fold(f64::INFINITY, f64::min);
    let sum_at = |lam: f64| -> f64 {
        l.iter()
            .map(|&li| {
                let z = eta_lr * (li - lam);
                1.0 / (z * z)
            })
            .sum()
    };
    // p_i ≤ (η(minL − λ))⁻², so Σ ≤ 1 at λ = minL − √M/η.
    let mut lo = min_l - (m as f64).sqrt() / eta_lr - 1.0;
    let mut hi = min_l - 1e-9 / eta_lr;
    let mut lam = 0.5 * (lo + hi);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        lam = mid;
        let s = sum_at(mid);
        if (s - 1.0).abs() <= 1e-12 {
            break;
        }
        if s > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let p: Vec<f64> = l
        .iter()
        .map(|&li| {
            let z = eta_lr * (li - lam);
            1.0 / (z * z)
        })
        .collect();
    let total: f64 = p.iter().sum();
    debug_assert!((total - 1.0).abs() <= 1e-10);
    p.iter().map(|&x| x / total).collect()
}

/// State of the hedged master. `R = 0` recovers plain Tsallis-INF.
#[derive(Debug, Clone)]
pub struct HedgedFtrlState {
    m: usize,
    alpha: f64,
    r: f64,
    eta_lr: f64,
    l_hat: Vec<f64>,
    b: Vec<f64>,
    b0: Vec<f64>,
    rho: Vec<f64>,
    p_current: Vec<f64>,
    bias_events: Vec<usize>,
    last_bias: Option<f64>,
}

impl HedgedFtrlState {
    /// Uniform start: ρ_{1,i} = M, B_{0,i} = M^α·R.
    pub fn new(m: usize, alpha: f64, r: f64, eta_lr: f64) -> Self {
        assert!(m >= 1 && alpha > 0.0 && alpha < 1.0 && r >= 0.0 && eta_lr > 0.0);
        let b0 = vec![(m as f64).powf(alpha) * r; m];
        Self {
            m,
            alpha,
            r,
            eta_lr,
            l_hat: vec![0.0; m],
            b: b0.clone(),
            b0,
            rho: vec![m as f64; m],
            p_current: vec![1.0 / m as f64; m],
            bias_events: vec![0; m],
            last_bias: None,
        }
    }

    /// Horizon-tuned learning rate `sqrt(1/(2T))`.
    pub fn default_eta(t_horizon: usize) -> f64 {
        (1.0 / (2.0 * t_horizon as f64)).sqrt()
    }

    pub fn arms(&self) -> usize {
        self.m
    }

    pub fn p_current(&self) -> &[f64] {
        &self.p_current
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn ledger(&self) -> &[f64] {
        &self.b
    }

    pub fn ledger_initial(&self) -> &[f64] {
        &self.b0
    }

    pub fn bias_events(&self) -> &[usize] {
        &self.bias_events
    }

    pub fn last_bias(&self) -> Option<f64> {
        self.last_bias
    }

    fn effective_losses(&self, l_hat: &[f64], b: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|i| l_hat[i] - (b[i] - self.b0[i]))
            .collect()
    }

    /// Draws the round's arm: recomputes p_t, folds it into ρ, samples.
    /// Returns `(arm, q_{t,arm}, ρ_{t,arm})`.
    pub fn sample(&mut self, rng: &mut RngStream) -> (usize, f64, f64) {
        let eff = self.effective_losses(&self.l_hat, &self.b);
        let p = tsallis_solve(&eff, self.eta_lr);
        for i in 0..self.m {
            self.rho[i] = self.rho[i].max(1.0 / p[i]);
        }
        let u = rng.uniform();
        let mut cum = 0.0;
        let mut arm = self.m - 1;
        for (i, &pi) in p.iter().enumerate() {
            cum += pi;
            if u < cum {
                arm = i;
                break;
            }
        }
        self.p_current = p;
        (arm, self.p_current[arm], self.rho[arm])
    }

    /// Incorporates the played arm's shifted loss `ℓ̃ ∈ [0, 2]`, running the
    /// bias-ledger fixed point when the tentative next distribution would
    /// violate `p^{−α}R ≤ B`.
    pub fn update(&mut self, arm: usize, shifted_loss: f64) -> Result<()> {
        if !(0.0..=2.0).contains(&shifted_loss) {
            return Err(Error::Contract(format!(
                "shifted loss {shifted_loss} outside [0, 2]"
            )));
        }
        let q = self.p_current[arm];
        let ell_hat = shifted_loss / q;
        let mut l_next = self.l_hat.clone();
        l_next[arm] += ell_hat;
        self.last_bias = None;
        if self.r > 0.0 && ell_hat > 0.0 {
            let p_at = |b_extra: f64| -> f64 {
                let mut b = self.b.clone();
                b[arm] += b_extra;
                let eff = self.effective_losses(&l_next, &b);
                tsallis_solve(&eff, self.eta_lr)[arm]
            };
            let tentative = p_at(0.0);
            let ledger_demand = tentative.powf(-self.alpha) * self.r;
            if ledger_demand > self.b[arm] {
                // f(b) = p(b)^{−α}R − (B + b) decreases from positive at 0;
                // at b = ℓ̂ the estimator cancels, p returns to p_t, and the
                // running invariant B ≥ R·ρ^α makes f nonpositive.
                let mut lo = 0.0;
                let mut hi = ell_hat;
                let mut b_star = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    b_star = mid;
                    let f = p_at(mid).powf(-self.alpha) * self.r - (self.b[arm] + mid);
                    if f.abs() <= 1e-8 * self.b[arm].max(1.0) {
                        break;
                    }
                    if f > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let f_end =
                    p_at(b_star).powf(-self.alpha) * self.r - (self.b[arm] + b_star);
                if f_end.abs() > 1e-6 * self.b[arm].max(1.0) {
                    return Err(Error::Contract(format!(
                        "bias-ledger bisection failed to bracket: residual {f_end}"
                    )));
                }
                self.b[arm] += b_star;
                self.bias_events[arm] += 1;
                self.last_bias = Some(b_star);
            }
        }
        self.l_hat = l_next;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tsallis_zero_losses_uniform() {
        let p = tsallis_solve(&[0.0; 4], 0.3);
        for &x in &p {
            assert_abs_diff_eq!(x, 0.25, epsilon = 1e-10);
        }
    }

    #[test]
    fn tsallis_shift_invariance() {
        let l = [0.3, 1.7, -0.4, 2.2];
        let shifted: Vec<f64> = l.iter().map(|x| x + 13.5).collect();
        let p1 = tsallis_solve(&l, 0.07);
        let p2 = tsallis_solve(&shifted, 0.07);
        for i in 0..4 {
            assert_abs_diff_eq!(p1[i], p2[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn tsallis_two_arm_matches_grid() {
        let cases = [([0.0, 10.0], 0.1), ([1.0, 3.5], 0.4), ([-2.0, 0.7], 0.05)];
        for (l, eta) in cases {
            let obj = |p0: f64| -> f64 {
                let p1 = 1.0 - p0;
                p0 * l[0] + p1 * l[1] - 2.0 / eta * (p0.sqrt() + p1.sqrt())
            };
            let steps = 2_000_000usize;
            let mut best = (f64::INFINITY, 0.5);
            for i in 1..steps {
                let p0 = i as f64 / steps as f64;
                let v = obj(p0);
                if v < best.0 {
                    best = (v, p0);
                }
            }
            let p = tsallis_solve(&l, eta);
            assert!(
                (p[0] - best.1).abs() < 1e-4,
                "l={l:?} eta={eta}: {} vs grid {}",
                p[0],
                best.1
            );
        }
    }

    #[test]
    fn first_sample_is_uniform() {
        let mut st = HedgedFtrlState::new(5, 0.5, 2.0, 0.1);
        let mut rng = RngStream::new(1);
        let (_, q, rho) = st.sample(&mut rng);
        assert_abs_diff_eq!(q, 0.2, epsilon = 1e-10);
        assert_abs_diff_eq!(rho, 5.0, epsilon = 1e-10);
    }

    #[test]
    fn single_arm_always_zero() {
        let mut st = HedgedFtrlState::new(1, 0.5, 1.0, 0.1);
        let mut rng = RngStream::new(2);
        for _ in 0..10 {
            let (a, q, _) = st.sample(&mut rng);
            assert_eq!(a, 0);
            assert_abs_diff_eq!(q, 1.0, epsilon = 1e-12);
            st.update(0, 1.0).unwrap();
        }
    }

    #[test]
    fn heavy_losses_suppress_arm() {
        let mut st = HedgedFtrlState::new(4, 0.5, 0.0, 0.1);
        let mut rng = RngStream::new(3);
        for _ in 0..50 {
            let (a, _, _) = st.sample(&mut rng);
            let loss = if a == 0 { 2.0 } else { 0.0 };
            st.update(a, loss).unwrap();
        }
        st.sample(&mut rng);
        assert!(st.p_current()[0] < 0.25, "p0 = {}", st.p_current()[0]);
    }

    #[test]
    fn zero_loss_keeps_distribution_and_ledger() {
        let mut st = HedgedFtrlState::new(3, 0.5, 5.0, 0.2);
        let mut rng = RngStream::new(4);
        let (a, _, _) = st.sample(&mut rng);
        let p_before = st.p_current().to_vec();
        let b_before = st.ledger().to_vec();
        st.update(a, 0.0).unwrap();
        st.sample(&mut rng);
        for i in 0..3 {
            assert_abs_diff_eq!(st.p_current()[i], p_before[i], epsilon = 1e-9);
            assert_abs_diff_eq!(st.ledger()[i], b_before[i], epsilon = 1e-12);
        }
        assert!(st.bias_events().iter().all(|&c| c == 0));
    }

    #[test]
    fn r_zero_never_triggers_events() {
        let mut st = HedgedFtrlState::new(6, 0.5, 0.0, 0.05);
        let mut rng = RngStream::new(5);
        for _ in 0..500 {
            let (a, _, _) = st.sample(&mut rng);
            st.update(a, rng.uniform_in(0.0, 2.0)).unwrap();
        }
        assert!(st.bias_events().iter().all(|&c| c == 0));
        assert!(st.ledger().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn ledger_identity_and_bias_range_on_trace() {
        let mut st = HedgedFtrlState::new(5, 0.5, 3.0, HedgedFtrlState::default_eta(2000));
        let mut rng = RngStream::new(6);
        let mut ever_event = vec![false; 5];
        for _ in 0..2000 {
            let (a, q, _) = st.sample(&mut rng);
            // Ledger dominance after folding this round's ρ.
            for i in 0..5 {
                assert!(
                    st.ledger()[i] >= 3.0 * st.rho()[i].powf(0.5) - 1e-6,
                    "B_i below R·ρ^α"
                );
            }
            let loss = rng.uniform_in(0.0, 2.0);
            st.update(a, loss).unwrap();
            if let Some(b) = st.last_bias() {
                ever_event[a] = true;
                assert!(b >= 0.0 && b <= loss / q + 1e-9, "b_t out of range");
            }
        }
        // Identity at arms with events: B = R·ρ^α after the next sample.
        st.sample(&mut rng);
        let mut seen = 0;
        for i in 0..5 {
            if ever_event[i] {
                seen += 1;
                let target = 3.0 * st.rho()[i].powf(0.5);
                assert!(
                    (st.ledger()[i] - target).abs() <= 1e-5 * target.max(1.0),
                    "arm {i}: B {} vs Rρ^α {}",
                    st.ledger()[i],
                    target
                );
            }
        }
        assert!(seen > 0, "trace produced no bias events");
    }

    #[test]
    fn estimator_unbiased_monte_carlo() {
        let p = [0.5, 0.3, 0.2];
        let ell = [1.3, 0.4, 1.9];
        let n = 100_000usize;
        let mut rng = RngStream::new(7);
        let mut sums = [0.0f64; 3];
        for _ in 0..n {
            let u = rng.uniform();
            let a = if u < 0.5 {
                0
            } else if u < 0.8 {
                1
            } else {
                2
            };
            sums[a] += ell[a] / p[a];
        }
        for i in 0..3 {
            let mean = sums[i] / n as f64;
            // Var[ℓ̂_i] = ℓ²(1/p − 1).
            let sd = (ell[i] * ell[i] * (1.0 / p[i] - 1.0) / n as f64).sqrt();
            assert!(
                (mean - ell[i]).abs() <= 3.0 * sd,
                "arm {i}: {mean} vs {} (sd {sd})",
                ell[i]
            );
        }
    }

    #[test]
    fn hedge_grows_with_rho() {
        // Arm 0 takes early large losses (driving its p low and ρ high),
        // then both arms see identical losses. The ledger must order with ρ.
        let mut st = HedgedFtrlState::new(2, 0.5, 10.0, 0.15);
        let mut rng = RngStream::new(8);
        for t in 0..400 {
            let (a, _, _) = st.sample(&mut rng);
            let loss = if t < 50 && a == 0 { 2.0 } else { 1.0 };
            st.update(a, loss).unwrap();
        }
        st.sample(&mut rng);
        assert!(st.rho()[0] > st.rho()[1]);
        assert!(
            st.ledger()[0] >= st.ledger()[1] - 1e-9,
            "B = ({}, {}) with rho = ({}, {})",
            st.ledger()[0],
            st.ledger()[1],
            st.rho()[0],
            st.rho()[1]
        );
    }
}
