//! Training procedures: dense fitting, constrained sparsification with
//! hard-concrete gates, and magnitude pruning with fine-tuning.

mod constrained;
mod metrics;
mod pruning;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use constrained::{
    primal_gradient, train_loonie, ConstrainedState, PrimalGradient, StepOutcome,
};
pub use metrics::{DualRecord, MetricsLog, MetricsRecord, CSV_HEADER};
pub use pruning::{finetune, magnitude_prune, train_mp};

use crate::bpp::{self, BppReport, HALF_BITS};
use crate::error::{Error, Result};
use crate::hardconcrete::HardConcreteConfig;
use crate::imageio::{self, PixelDataset};
use crate::optim::AdamState;
use crate::siren::{self, init_siren, SirenConfig, SirenParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Dense network at a fixed architecture.
    Coin,
    /// Gated network sparsified under a BPP constraint.
    Loonie,
    /// Dense training, magnitude pruning to the budget, fine-tuning.
    Mp,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Coin => "coin",
            Method::Loonie => "loonie",
            Method::Mp => "mp",
        })
    }
}

pub const DEFAULT_STEPS: usize = 50_000;
pub const DEFAULT_EVAL_EVERY: usize = 100;
pub const DENSE_LR: f64 = 2e-4;
pub const GATED_WEIGHT_LR: f64 = 1e-3;
pub const GATE_LR: f64 = 7e-4;
pub const DEFAULT_DUAL_LR: f64 = 1e-3;
pub const GATE_INIT_SIGMA: f64 = 0.01;
/// Magnitudes of gated networks start twice as wide since medians start at 0.5.
pub const GATED_INIT_SCALE: f32 = 2.0;
/// Offset between the weight and gate RNG streams of one seed.
pub const GATE_SEED_OFFSET: u64 = 0x5eed;

/// Budget-specific setup for the 768×512 benchmark images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardTarget {
    pub target_bpp: f64,
    /// Dense architecture whose half-precision BPP matches the target.
    pub dense_arch: (usize, usize),
    /// Larger architecture sparsified down to the target.
    pub initial_arch: (usize, usize),
    pub dual_lr: f64,
}

pub const STANDARD_TARGETS: [StandardTarget; 4] = [
    StandardTarget {
        target_bpp: 0.07,
        dense_arch: (5, 20),
        initial_arch: (5, 30),
        dual_lr: 7e-3,
    },
    StandardTarget {
        target_bpp: 0.15,
        dense_arch: (5, 30),
        initial_arch: (10, 28),
        dual_lr: 3e-3,
    },
    StandardTarget {
        target_bpp: 0.3,
        dense_arch: (10, 28),
        initial_arch: (10, 40),
        dual_lr: 1e-3,
    },
    StandardTarget {
        target_bpp: 0.6,
        dense_arch: (10, 40),
        initial_arch: (13, 40),
        dual_lr: 8e-4,
    },
];

pub fn standard_target(target_bpp: f64) -> Option<&'static StandardTarget> {
    STANDARD_TARGETS
        .iter()
        .find(|t| (t.target_bpp - target_bpp).abs() < 1e-9)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    /// Architecture trained (for `loonie` and `mp`, the initial dense one).
    pub arch: SirenConfig,
    pub steps: usize,
    pub seed: u64,
    pub target_bpp: Option<f64>,
    pub lr_weights: f64,
    pub lr_gates: f64,
    pub lr_dual: f64,
    pub eval_every: usize,
    pub restarts: bool,
    pub gate_init_sigma: f64,
    pub gates: HardConcreteConfig,
}

impl TrainConfig {
    fn base(method: Method, arch: SirenConfig, target_bpp: Option<f64>) -> Self {
        Self {
            method,
            arch,
            steps: DEFAULT_STEPS,
            seed: 0,
            target_bpp,
            lr_weights: DENSE_LR,
            lr_gates: GATE_LR,
            lr_dual: DEFAULT_DUAL_LR,
            eval_every: DEFAULT_EVAL_EVERY,
            restarts: true,
            gate_init_sigma: GATE_INIT_SIGMA,
            gates: HardConcreteConfig::default(),
        }
    }

    pub fn coin(arch: SirenConfig) -> Self {
        Self::base(Method::Coin, arch, None)
    }

    pub fn loonie(arch: SirenConfig, target_bpp: f64) -> Self {
        Self {
            lr_weights: GATED_WEIGHT_LR,
            ..Self::base(Method::Loonie, arch, Some(target_bpp))
        }
    }

    pub fn mp(arch: SirenConfig, target_bpp: f64) -> Self {
        Self::base(Method::Mp, arch, Some(target_bpp))
    }

    /// Method defaults for `arch`, with a target for the constrained methods.
    pub fn for_method(method: Method, arch: SirenConfig, target_bpp: Option<f64>) -> Result<Self> {
        match (method, target_bpp) {
            (Method::Coin, None) => Ok(Self::coin(arch)),
            (Method::Coin, Some(_)) => Err(Error::InvalidConfig(
                "coin trains a dense network and takes no target BPP".into(),
            )),
            (_, None) => Err(Error::InvalidConfig(format!("{method} needs a target BPP"))),
            (Method::Loonie, Some(t)) => Ok(Self::loonie(arch, t)),
            (Method::Mp, Some(t)) => Ok(Self::mp(arch, t)),
        }
    }

    /// Configuration for one of the four standard budgets: the dense
    /// matching architecture for `coin`, the next larger one otherwise.
    pub fn for_standard_target(method: Method, target_bpp: f64) -> Result<Self> {
        let t = standard_target(target_bpp).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "{target_bpp} is not one of the standard targets 0.07, 0.15, 0.3, 0.6"
            ))
        })?;
        Ok(match method {
            Method::Coin => Self::coin(SirenConfig::image(t.dense_arch.0, t.dense_arch.1)),
            Method::Loonie => Self {
                lr_dual: t.dual_lr,
                ..Self::loonie(
                    SirenConfig::image(t.initial_arch.0, t.initial_arch.1),
                    t.target_bpp,
                )
            },
            Method::Mp => Self::mp(
                SirenConfig::image(t.initial_arch.0, t.initial_arch.1),
                t.target_bpp,
            ),
        })
    }

    pub fn validate(&self, pixel_count: usize) -> Result<()> {
        self.arch.validate()?;
        self.gates.validate()?;
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be at least 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidConfig("eval_every must be at least 1".into()));
        }
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("lr_weights", self.lr_weights)?;
        match (self.method, self.target_bpp) {
            (Method::Coin, Some(_)) => {
                return Err(Error::InvalidConfig(
                    "coin trains a dense network and takes no target BPP".into(),
                ))
            }
            (Method::Coin, None) => {}
            (_, None) => {
                return Err(Error::InvalidConfig(format!(
                    "{} needs a target BPP",
                    self.method
                )))
            }
            (_, Some(t)) => positive("target_bpp", t)?,
        }
        if self.method == Method::Mp {
            let budget = pruning::keep_budget(
                self.target_bpp.unwrap_or_default(),
                pixel_count,
                self.arch.param_count(),
            );
            let layers = self.arch.layers();
            let dense = layers[0].all().len() + layers[layers.len() - 1].all().len();
            if budget < dense {
                return Err(Error::BudgetTooSmall { budget, dense });
            }
        }
        if self.method == Method::Loonie {
            positive("lr_gates", self.lr_gates)?;
            positive("lr_dual", self.lr_dual)?;
            positive("gate_init_sigma", self.gate_init_sigma)?;
            let dense = bpp::arch_bpp(&self.arch, HALF_BITS, pixel_count);
            let target = self.target_bpp.unwrap_or_default();
            if target >= dense {
                return Err(Error::InvalidConfig(format!(
                    "target {target} BPP is not below the dense {dense:.5} BPP of {}; nothing to sparsify",
                    self.arch
                )));
            }
        }
        Ok(())
    }
}

/// A trained network: magnitudes, gate values and an optional pruning mask.
///
/// The stored model is `magnitudes ⊙ gates`, with masked-out entries zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub arch: SirenConfig,
    pub magnitudes: Vec<f32>,
    pub gates: Vec<f32>,
    pub mask: Option<Vec<bool>>,
}

impl TrainedModel {
    pub fn dense(params: SirenParams<f32>) -> Self {
        let n = params.flat.len();
        Self {
            arch: params.config,
            magnitudes: params.flat,
            gates: vec![1.0; n],
            mask: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        let n = self.arch.param_count();
        let lens = [
            self.magnitudes.len(),
            self.gates.len(),
            self.mask.as_ref().map_or(n, Vec::len),
        ];
        if let Some(&bad) = lens.iter().find(|&&l| l != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: bad,
            });
        }
        Ok(())
    }

    /// `θ̃ ⊙ ẑ`, zeroed where the mask is off.
    pub fn effective(&self) -> SirenParams<f32> {
        let mut flat: Vec<f32> = self
            .magnitudes
            .iter()
            .zip(&self.gates)
            .map(|(&m, &z)| m * z)
            .collect();
        if let Some(mask) = &self.mask {
            for (v, &keep) in flat.iter_mut().zip(mask) {
                if !keep {
                    *v = 0.0;
                }
            }
        }
        SirenParams {
            config: self.arch,
            flat,
        }
    }

    /// Parameters as a decoder sees them: cast to binary16 and widened back.
    pub fn decoded(&self) -> SirenParams<f32> {
        SirenParams {
            config: self.arch,
            flat: bpp::half_roundtrip(&self.effective().flat),
        }
    }

    pub fn casted_bpp(&self, pixel_count: usize) -> BppReport {
        bpp::casted_bpp(&self.effective().flat, pixel_count)
    }
}

/// Metrics of a model on its image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub psnr_f32: f64,
    pub psnr_f16: f64,
    pub bpp: BppReport,
}

/// Evaluates the single-precision model and the decoded model.
///
/// `psnr_f16` is measured on the 8-bit image a decoder would write, so it
/// matches what `decompress` + PSNR against the source image reports.
pub fn evaluate(model: &TrainedModel, dataset: &PixelDataset) -> Result<Evaluation> {
    let effective = model.effective();
    let pred = siren::to_rgb(&siren::predict(&effective, &dataset.coords)?);
    let sse: f64 = pred
        .iter()
        .flatten()
        .zip(dataset.targets.iter().flatten())
        .map(|(&p, &y)| {
            let d = f64::from(p) - f64::from(y);
            d * d
        })
        .sum();
    let loss = sse / (dataset.targets.len() * 3) as f64;
    let psnr_f32 = imageio::psnr(&dataset.targets, &pred)?;

    let decoded_rgb = reconstruct_rgb8(&model.decoded(), &dataset.coords)?;
    let psnr_f16 = imageio::psnr(&dataset.targets, &imageio::rgb8_to_unit(&decoded_rgb))?;
    Ok(Evaluation {
        loss,
        psnr_f32,
        psnr_f16,
        bpp: bpp::casted_bpp(&effective.flat, dataset.pixel_count()),
    })
}

/// Forward pass, clip and quantize to interleaved RGB bytes.
pub fn reconstruct_rgb8(params: &SirenParams<f32>, coords: &[[f32; 2]]) -> Result<Vec<u8>> {
    let pred = siren::predict(params, coords)?;
    Ok(imageio::quantize_rgb(&siren::to_rgb(&pred)))
}

pub(crate) struct Checkpoint {
    pub step: usize,
    pub lambda: f64,
    pub expected_bpp: Option<f64>,
    pub target_bpp: Option<f64>,
}

pub(crate) fn checkpoint(
    model: &TrainedModel,
    dataset: &PixelDataset,
    at: Checkpoint,
    clock: &Instant,
) -> Result<MetricsRecord> {
    let eval = evaluate(model, dataset)?;
    Ok(MetricsRecord {
        step: at.step,
        loss: eval.loss,
        psnr_f32: eval.psnr_f32,
        psnr_f16: eval.psnr_f16,
        bpp: eval.bpp.bpp,
        expected_bpp: at.expected_bpp.unwrap_or(eval.bpp.bpp),
        lambda: at.lambda,
        feasible: at.target_bpp.is_none_or(|t| eval.bpp.bpp <= t),
        wall_ms: clock.elapsed().as_millis() as u64,
    })
}

/// Full-batch Adam on the reconstruction loss over the unmasked magnitudes.
/// Gates stay fixed.
pub(crate) fn fit_dense(
    model: &mut TrainedModel,
    dataset: &PixelDataset,
    steps: usize,
    lr: f64,
    eval_every: usize,
    target_bpp: Option<f64>,
    clock: &Instant,
) -> Result<MetricsLog> {
    model.validate()?;
    let mut log = MetricsLog::new();
    let mut adam = AdamState::<f32>::new(model.magnitudes.len(), lr);
    let at = |step| Checkpoint {
        step,
        lambda: 0.0,
        expected_bpp: None,
        target_bpp,
    };
    log.push(checkpoint(model, dataset, at(0), clock)?);
    for step in 1..=steps {
        let (_, grad) = siren::loss_and_grad(&model.effective(), dataset)?;
        let mut grad = grad.flat;
        for (g, &z) in grad.iter_mut().zip(&model.gates) {
            *g *= z;
        }
        if let Some(mask) = &model.mask {
            for (g, &keep) in grad.iter_mut().zip(mask) {
                if !keep {
                    *g = 0.0;
                }
            }
        }
        adam.step(&mut model.magnitudes, &grad)?;
        if step % eval_every == 0 {
            log.push(checkpoint(model, dataset, at(step), clock)?);
        }
    }
    Ok(log)
}

/// Dense training at a fixed architecture.
pub fn train_coin(
    config: &TrainConfig,
    dataset: &PixelDataset,
) -> Result<(TrainedModel, MetricsLog)> {
    if config.method != Method::Coin {
        return Err(Error::InvalidConfig(format!(
            "train_coin called with method {}",
            config.method
        )));
    }
    config.validate(dataset.pixel_count())?;
    let mut model = TrainedModel::dense(init_siren(config.arch, config.seed, 1.0)?);
    let log = fit_dense(
        &mut model,
        dataset,
        config.steps,
        config.lr_weights,
        config.eval_every,
        None,
        &Instant::now(),
    )?;
    Ok((model, log))
}

/// Runs the procedure selected by `config.method`.
pub fn train(config: &TrainConfig, dataset: &PixelDataset) -> Result<(TrainedModel, MetricsLog)> {
    match config.method {
        Method::Coin => train_coin(config, dataset),
        Method::Loonie => train_loonie(config, dataset),
        Method::Mp => train_mp(config, dataset),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset() -> PixelDataset {
        let rgb: Vec<u8> = (0..8 * 8 * 3).map(|i| ((i * 37) % 256) as u8).collect();
        PixelDataset::from_rgb8(8, 8, &rgb).unwrap()
    }

    #[test]
    fn standard_targets_pick_next_larger_architecture() {
        let c = TrainConfig::for_standard_target(Method::Loonie, 0.3).unwrap();
        assert_eq!(c.arch, SirenConfig::image(10, 40));
        assert_eq!(c.lr_dual, 1e-3);
        assert_eq!(c.lr_weights, 1e-3);
        assert_eq!(c.lr_gates, 7e-4);
        let c = TrainConfig::for_standard_target(Method::Coin, 0.3).unwrap();
        assert_eq!(c.arch, SirenConfig::image(10, 28));
        assert_eq!(c.target_bpp, None);
        assert_eq!(c.lr_weights, 2e-4);
        assert!(TrainConfig::for_standard_target(Method::Mp, 0.5).is_err());
    }

    #[test]
    fn config_validation() {
        let px = 64 * 64;
        let mut coin = TrainConfig::coin(SirenConfig::image(2, 8));
        assert!(coin.validate(px).is_ok());
        coin.target_bpp = Some(0.3);
        assert!(coin.validate(px).is_err());

        // 5x30 is 15.25 BPP at 64x64
        let arch = SirenConfig::image(5, 30);
        assert!(TrainConfig::loonie(arch, 7.0).validate(px).is_ok());
        assert!(TrainConfig::loonie(arch, 15.25).validate(px).is_err());
        assert!(TrainConfig::loonie(arch, -1.0).validate(px).is_err());
        let mut zero_steps = TrainConfig::loonie(arch, 7.0);
        zero_steps.steps = 0;
        assert!(zero_steps.validate(px).is_err());
        assert!(TrainConfig::for_method(Method::Mp, arch, None).is_err());
    }

    #[test]
    fn log_without_elapsed_interval_has_only_step_zero() {
        let ds = tiny_dataset();
        let mut cfg = TrainConfig::coin(SirenConfig::image(1, 4));
        cfg.steps = 5;
        cfg.eval_every = 10;
        let (_, log) = train_coin(&cfg, &ds).unwrap();
        assert_eq!(log.records.len(), 1);
        assert_eq!(log.records[0].step, 0);
    }

    #[test]
    fn coin_records_are_constant_bpp_and_feasible() {
        let ds = tiny_dataset();
        let mut cfg = TrainConfig::coin(SirenConfig::image(2, 6));
        cfg.steps = 30;
        cfg.eval_every = 10;
        let (model, log) = train_coin(&cfg, &ds).unwrap();
        assert_eq!(log.records.len(), 4);
        let dense = bpp::arch_bpp(&cfg.arch, 16, ds.pixel_count());
        assert!(log
            .records
            .iter()
            .all(|r| r.feasible && r.bpp == dense && r.lambda == 0.0));
        assert_eq!(model.gates, vec![1.0; cfg.arch.param_count()]);
        assert!(log.dual_trace.is_empty());
    }

    #[test]
    fn effective_applies_gates_and_mask() {
        let model = TrainedModel {
            arch: SirenConfig::image(1, 1),
            magnitudes: vec![2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0],
            gates: vec![1.0, 0.5, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.25],
            mask: Some(vec![true, true, true, false, true, true, true, true, true]),
        };
        assert!(model.validate().is_ok());
        assert_eq!(
            model.effective().flat,
            vec![2.0, 1.5, 0.0, 0.0, 6.0, 7.0, 8.0, 9.0, 2.5]
        );
    }
}
