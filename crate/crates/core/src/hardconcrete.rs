//! Hard-concrete gates: a concrete random variable stretched to
//! `(γ, ζ)` and clamped to `[0, 1]`, parameterized by its log-location
//! `ψ = log φ`.
//!
//! Training only ever uses the deterministic gate medians and the
//! closed-form probability of a gate being nonzero; `sample_gate` exists to
//! check those closed forms against simulation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardConcreteConfig {
    pub gamma: f64,
    pub zeta: f64,
    pub beta: f64,
}

impl Default for HardConcreteConfig {
    fn default() -> Self {
        Self {
            gamma: -0.1,
            zeta: 1.1,
            beta: 2.0 / 3.0,
        }
    }
}

pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl HardConcreteConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma < 0.0 && self.zeta > 1.0 && self.beta > 0.0 && self.beta < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "hard-concrete parameters need gamma < 0 < 1 < zeta and 0 < beta < 1, got {self:?}"
            )))
        }
    }

    /// Stretches `s ∈ [0, 1]` onto `(γ, ζ)` as `s·ζ + (1 − s)·γ`.
    ///
    /// Written as a convex combination so that `s = 0.5` lands exactly on
    /// `0.5` for the default parameters in both `f32` and `f64`.
    fn stretch<T: Real>(&self, s: T) -> T {
        s * T::from_f64(self.zeta) + (T::one() - s) * T::from_f64(self.gamma)
    }

    /// Draws a gate from uniform noise `u ∈ (0, 1)`.
    pub fn sample_gate<T: Real>(&self, psi: T, u: T) -> T {
        let log_odds = psi + u.ln() - (T::one() - u).ln();
        let s = sigmoid(log_odds / T::from_f64(self.beta));
        self.stretch(s).max(T::zero()).min(T::one())
    }

    /// Deterministic gate value: the median of the hard-concrete distribution.
    pub fn gate_median<T: Real>(&self, psi: T) -> T {
        let s = sigmoid(psi / T::from_f64(self.beta));
        self.stretch(s).max(T::zero()).min(T::one())
    }

    /// Derivative of [`gate_median`](Self::gate_median); zero wherever the
    /// median is clamped, including the boundary points themselves.
    pub fn gate_median_grad<T: Real>(&self, psi: T) -> T {
        let beta = T::from_f64(self.beta);
        let s = sigmoid(psi / beta);
        let raw = self.stretch(s);
        if raw <= T::zero() || raw >= T::one() {
            T::zero()
        } else {
            T::from_f64(self.zeta - self.gamma) * s * (T::one() - s) / beta
        }
    }

    /// Shift `β·log(−γ/ζ)` inside the nonzero probability.
    pub fn log_ratio_shift(&self) -> f64 {
        self.beta * (-self.gamma / self.zeta).ln()
    }

    /// `P[z ≠ 0] = sigmoid(ψ − β·log(−γ/ζ))`.
    pub fn prob_nonzero<T: Real>(&self, psi: T) -> T {
        sigmoid(psi - T::from_f64(self.log_ratio_shift()))
    }

    /// Derivative of [`prob_nonzero`](Self::prob_nonzero) with respect to ψ.
    pub fn prob_nonzero_grad<T: Real>(&self, psi: T) -> T {
        let p = self.prob_nonzero(psi);
        p * (T::one() - p)
    }

    /// Expected number of active gates.
    pub fn expected_l0<T: Real>(&self, psi: &[T]) -> T {
        psi.iter().map(|&p| self.prob_nonzero(p)).sum()
    }

    /// Largest ψ whose median is exactly 0 (up to rounding).
    pub fn off_threshold(&self) -> f64 {
        self.beta * logit(-self.gamma / (self.zeta - self.gamma))
    }

    /// Smallest ψ whose median is exactly 1 (up to rounding).
    pub fn on_threshold(&self) -> f64 {
        self.beta * logit((1.0 - self.gamma) / (self.zeta - self.gamma))
    }
}

/// Log-locations of one gate per network parameter, in flat parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams<T> {
    pub psi: Vec<T>,
    pub config: HardConcreteConfig,
}

impl<T: Real> GateParams<T> {
    /// ψ drawn from `Normal(0, sigma²)` with ChaCha8 seeded from `seed`, so the
    /// medians start symmetric around 0.5.
    pub fn init(count: usize, seed: u64, sigma: f64, config: HardConcreteConfig) -> Result<Self> {
        config.validate()?;
        let normal = Normal::new(0.0, sigma)
            .map_err(|e| Error::InvalidConfig(format!("gate init noise: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = (0..count)
            .map(|_| T::from_f64(normal.sample(&mut rng)))
            .collect();
        Ok(Self { psi, config })
    }

    pub fn medians(&self) -> Vec<T> {
        self.psi
            .iter()
            .map(|&p| self.config.gate_median(p))
            .collect()
    }

    pub fn median_grads(&self) -> Vec<T> {
        self.psi
            .iter()
            .map(|&p| self.config.gate_median_grad(p))
            .collect()
    }

    pub fn expected_l0(&self) -> T {
        self.config.expected_l0(&self.psi)
    }

    pub fn expected_l0_grad(&self) -> Vec<T> {
        self.psi
            .iter()
            .map(|&p| self.config.prob_nonzero_grad(p))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HC: HardConcreteConfig = HardConcreteConfig {
        gamma: -0.1,
        zeta: 1.1,
        beta: 2.0 / 3.0,
    };

    #[test]
    fn sample_gate_reference_points() {
        assert_eq!(HC.sample_gate(0.0f64, 0.5), 0.5);
        assert_eq!(HC.sample_gate(0.0f64, 1.0 - 1e-12), 1.0);
        // sigmoid(-4.5) ≈ 0.01098 → 0.01098·1.2 − 0.1 < 0 → clamped
        assert!((sigmoid(-4.5f64) - 0.010_986_9).abs() < 1e-7);
        assert_eq!(HC.sample_gate(-3.0f64, 0.5), 0.0);
    }

    #[test]
    fn median_reference_points() {
        assert_eq!(HC.gate_median(0.0f64), 0.5);
        assert_eq!(HC.gate_median(0.0f32), 0.5);
        // sigmoid(log(0.2)/β) = sigmoid(−2.4142) ≈ 0.0821 → −0.0015 → 0
        assert_eq!(HC.gate_median(0.2f64.ln()), 0.0);
        // sigmoid(6)·1.2 − 0.1 ≈ 1.0970 → 1
        assert_eq!(HC.gate_median(4.0f64), 1.0);
    }

    #[test]
    fn median_grad_reference_points() {
        assert!((HC.gate_median_grad(0.0f64) - 0.45).abs() < 1e-15);
        assert_eq!(HC.gate_median_grad(0.2f64.ln()), 0.0);
        assert_eq!(HC.gate_median_grad(4.0f64), 0.0);
    }

    #[test]
    fn median_grad_matches_central_differences() {
        let h = 1e-6;
        let mut psi = HC.off_threshold() + 0.01;
        while psi < HC.on_threshold() - 0.01 {
            let fd = (HC.gate_median(psi + h) - HC.gate_median(psi - h)) / (2.0 * h);
            assert!(
                (fd - HC.gate_median_grad(psi)).abs() < 1e-8,
                "psi={psi} fd={fd}"
            );
            psi += 0.037;
        }
    }

    #[test]
    fn thresholds_bracket_saturation() {
        let off = HC.off_threshold();
        let on = HC.on_threshold();
        assert!(off < 0.0 && on > 0.0);
        assert_eq!(HC.gate_median(off - 1e-9), 0.0);
        assert!(HC.gate_median(off + 1e-6) > 0.0);
        assert_eq!(HC.gate_median(on + 1e-9), 1.0);
        assert!(HC.gate_median(on - 1e-6) < 1.0);
    }

    #[test]
    fn prob_nonzero_reference_points() {
        assert!((HC.log_ratio_shift() + 1.598_60).abs() < 1e-5);
        assert!((HC.prob_nonzero(0.0f64) - 0.8318).abs() < 1e-4);
        assert!(HC.prob_nonzero(-60.0f64) < 1e-20);
        assert!((HC.prob_nonzero(60.0f64) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn expected_l0_reference_points() {
        let zeros = vec![0.0f64; 100];
        assert!((HC.expected_l0(&zeros) - 100.0 * HC.prob_nonzero(0.0)).abs() < 1e-12);
        assert!((HC.expected_l0(&zeros) - 83.18).abs() < 1e-2);
        assert_eq!(HC.expected_l0::<f64>(&[]), 0.0);
        assert!((HC.expected_l0(&[-10.0f64, 10.0]) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn expected_l0_grad_matches_central_differences() {
        let gates = GateParams::<f64>::init(50, 9, 2.0, HC).unwrap();
        let grad = gates.expected_l0_grad();
        let h = 1e-6;
        for i in 0..gates.psi.len() {
            let mut plus = gates.psi.clone();
            let mut minus = gates.psi.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (HC.expected_l0(&plus) - HC.expected_l0(&minus)) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn gate_init_is_centered_and_seeded() {
        let a = GateParams::<f32>::init(1000, 1, 0.01, HC).unwrap();
        let b = GateParams::<f32>::init(1000, 1, 0.01, HC).unwrap();
        assert_eq!(a, b);
        assert!(a.psi.iter().all(|p| p.abs() < 0.06));
        assert!(a.medians().iter().all(|m| (m - 0.5).abs() < 0.02));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let bad = HardConcreteConfig { gamma: 0.1, ..HC };
        assert!(bad.validate().is_err());
        assert!(HC.validate().is_ok());
    }
}
