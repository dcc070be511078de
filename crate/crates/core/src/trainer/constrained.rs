//! Sparsification under a BPP budget by simultaneous gradient
//! descent-ascent on the Lagrangian.
//!
//! The primal variables (magnitudes θ̃ and gate log-locations ψ) descend on
//! `loss(θ̃ ⊙ ẑ(ψ)) + λ · expected_bpp(ψ)`; the expected BPP stands in for
//! the piecewise-constant exact BPP, which has no useful gradient. The
//! multiplier ascends on the exact violation `casted_bpp − τ`.

use std::time::Instant;

use super::{checkpoint, Checkpoint, DualRecord, Method, MetricsLog, TrainConfig, TrainedModel};
use super::{GATED_INIT_SCALE, GATE_SEED_OFFSET};
use crate::bpp::{self, BppReport};
use crate::error::{Error, Result};
use crate::hardconcrete::GateParams;
use crate::imageio::PixelDataset;
use crate::optim::{AdamState, DualState};
use crate::real::Real;
use crate::siren::{self, init_siren, SirenConfig, SirenParams};

/// Value and gradient of the primal part of the Lagrangian.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalGradient<T> {
    pub loss: T,
    pub expected_bpp: T,
    /// `loss + λ · expected_bpp`.
    pub objective: T,
    pub magnitudes: Vec<T>,
    pub psi: Vec<T>,
}

/// Gradient of `loss(θ̃ ⊙ ẑ(ψ)) + λ · expected_bpp(ψ)` with respect to θ̃ and ψ.
pub fn primal_gradient<T: Real>(
    arch: SirenConfig,
    magnitudes: &[T],
    gates: &GateParams<T>,
    lambda: T,
    dataset: &PixelDataset,
) -> Result<PrimalGradient<T>> {
    let n = arch.param_count();
    if magnitudes.len() != n || gates.psi.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} magnitudes and {} gates for {n} parameters",
            magnitudes.len(),
            gates.psi.len()
        )));
    }
    let medians = gates.medians();
    let effective = SirenParams {
        config: arch,
        flat: magnitudes
            .iter()
            .zip(&medians)
            .map(|(&m, &z)| m * z)
            .collect(),
    };
    let (loss, grad) = siren::loss_and_grad(&effective, dataset)?;
    let (expected_bpp, proxy_grad) = bpp::expected_bpp(gates, dataset.pixel_count());

    let grad_magnitudes = grad
        .flat
        .iter()
        .zip(&medians)
        .map(|(&g, &z)| g * z)
        .collect();
    let grad_psi = grad
        .flat
        .iter()
        .zip(magnitudes)
        .zip(gates.psi.iter().zip(&proxy_grad))
        .map(|((&g, &m), (&psi, &proxy))| {
            g * m * gates.config.gate_median_grad(psi) + lambda * proxy
        })
        .collect();
    Ok(PrimalGradient {
        loss,
        expected_bpp,
        objective: loss + lambda * expected_bpp,
        magnitudes: grad_magnitudes,
        psi: grad_psi,
    })
}

/// Result of one descent-ascent step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Loss before the update.
    pub loss: f32,
    /// Exact BPP after the update.
    pub bpp: BppReport,
    pub violation: f64,
    pub lambda_before: f64,
    pub lambda_after: f64,
}

/// All primal and dual state of a constrained run.
#[derive(Debug, Clone)]
pub struct ConstrainedState {
    pub arch: SirenConfig,
    pub magnitudes: Vec<f32>,
    pub gates: GateParams<f32>,
    pub weight_opt: AdamState<f32>,
    pub gate_opt: AdamState<f32>,
    pub dual: DualState,
    pub target_bpp: f64,
}

impl ConstrainedState {
    /// Magnitudes at twice the usual SIREN range, ψ ~ N(0, σ²), λ = 0.
    pub fn init(config: &TrainConfig) -> Result<Self> {
        let target_bpp = config.target_bpp.ok_or_else(|| {
            Error::InvalidConfig("constrained training needs a target BPP".into())
        })?;
        let magnitudes = init_siren(config.arch, config.seed, GATED_INIT_SCALE)?.flat;
        let gates = GateParams::init(
            magnitudes.len(),
            config.seed.wrapping_add(GATE_SEED_OFFSET),
            config.gate_init_sigma,
            config.gates,
        )?;
        Ok(Self {
            arch: config.arch,
            weight_opt: AdamState::new(magnitudes.len(), config.lr_weights),
            gate_opt: AdamState::new(magnitudes.len(), config.lr_gates),
            magnitudes,
            gates,
            dual: DualState::new(config.lr_dual, config.restarts),
            target_bpp,
        })
    }

    /// The median-gated model.
    pub fn model(&self) -> TrainedModel {
        TrainedModel {
            arch: self.arch,
            magnitudes: self.magnitudes.clone(),
            gates: self.gates.medians(),
            mask: None,
        }
    }

    pub fn expected_bpp(&self, pixel_count: usize) -> f64 {
        f64::from(bpp::expected_bpp(&self.gates, pixel_count).0)
    }

    /// One simultaneous step: Adam on θ̃ and ψ using the pre-step λ, then
    /// projected ascent on λ with the exact violation of the updated model.
    pub fn step(&mut self, dataset: &PixelDataset) -> Result<StepOutcome> {
        let lambda_before = self.dual.lambda;
        let grad = primal_gradient(
            self.arch,
            &self.magnitudes,
            &self.gates,
            lambda_before as f32,
            dataset,
        )?;
        self.weight_opt
            .step(&mut self.magnitudes, &grad.magnitudes)?;
        self.gate_opt.step(&mut self.gates.psi, &grad.psi)?;

        let bpp = self.model().casted_bpp(dataset.pixel_count());
        let violation = bpp.bpp - self.target_bpp;
        self.dual.step(violation);
        Ok(StepOutcome {
            loss: grad.loss,
            bpp,
            violation,
            lambda_before,
            lambda_after: self.dual.lambda,
        })
    }
}

/// Constrained training; the returned model is the median-gated state after
/// the last step.
pub fn train_loonie(
    config: &TrainConfig,
    dataset: &PixelDataset,
) -> Result<(TrainedModel, MetricsLog)> {
    if config.method != Method::Loonie {
        return Err(Error::InvalidConfig(format!(
            "train_loonie called with method {}",
            config.method
        )));
    }
    config.validate(dataset.pixel_count())?;
    let clock = Instant::now();
    let pixels = dataset.pixel_count();
    let mut state = ConstrainedState::init(config)?;
    let mut log = MetricsLog::new();
    let at = |step, state: &ConstrainedState| Checkpoint {
        step,
        lambda: state.dual.lambda,
        expected_bpp: Some(state.expected_bpp(pixels)),
        target_bpp: config.target_bpp,
    };
    log.push(checkpoint(&state.model(), dataset, at(0, &state), &clock)?);
    for step in 1..=config.steps {
        let outcome = state.step(dataset)?;
        log.dual_trace.push(DualRecord {
            step,
            violation: outcome.violation,
            lambda_before: outcome.lambda_before,
            lambda_after: outcome.lambda_after,
        });
        if step % config.eval_every == 0 {
            log.push(checkpoint(
                &state.model(),
                dataset,
                at(step, &state),
                &clock,
            )?);
        }
    }
    Ok((state.model(), log))
}
