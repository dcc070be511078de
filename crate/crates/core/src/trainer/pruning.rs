//! Magnitude-pruning baseline: train dense, prune to the budget, fine-tune
//! the survivors.

use std::time::Instant;

use super::{fit_dense, Method, MetricsLog, TrainConfig, TrainedModel};
use crate::bpp::{bits_per_pixel, HALF_BITS};
use crate::error::{Error, Result};
use crate::imageio::PixelDataset;
use crate::siren::init_siren;

/// Largest parameter count whose half-precision BPP stays within `target_bpp`.
pub(crate) fn keep_budget(target_bpp: f64, pixel_count: usize, total: usize) -> usize {
    let fits = |k: usize| bits_per_pixel(k, HALF_BITS, pixel_count) <= target_bpp;
    let estimate = (target_bpp * pixel_count as f64 / f64::from(HALF_BITS)).floor();
    let mut k = if estimate.is_finite() && estimate > 0.0 {
        (estimate as usize).min(total)
    } else {
        0
    };
    // the estimate can be off by one ulp either way
    while k < total && fits(k + 1) {
        k += 1;
    }
    while k > 0 && !fits(k) {
        k -= 1;
    }
    k
}

/// Indices of the `keep` largest-magnitude entries of `values`, ties going
/// to the lower index.
fn top_magnitudes(values: &[f32], keep: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    order.truncate(keep);
    order
}

/// Zeros the smallest-magnitude parameters of a dense model so that its
/// half-precision BPP fits `target_bpp`.
///
/// The first and last layers stay dense. The rest of the budget is spread
/// at one keep-fraction over every other weight matrix and bias vector,
/// each pruned independently; a tensor may end up with no survivors.
pub fn magnitude_prune(
    model: &TrainedModel,
    target_bpp: f64,
    pixel_count: usize,
) -> Result<TrainedModel> {
    model.validate()?;
    if model.mask.is_some() || model.gates.iter().any(|&z| z != 1.0) {
        return Err(Error::InvalidConfig(
            "magnitude pruning expects a dense model".into(),
        ));
    }
    if pixel_count == 0 || target_bpp.is_nan() || target_bpp < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "cannot prune to {target_bpp} BPP over {pixel_count} pixels"
        )));
    }
    let values = model.effective().flat;
    let budget = keep_budget(target_bpp, pixel_count, values.len());
    let layers = model.arch.layers();
    let (first, last) = (layers[0], layers[layers.len() - 1]);
    let dense = first.all().len() + last.all().len();
    if budget < dense {
        return Err(Error::BudgetTooSmall { budget, dense });
    }

    let mut mask = vec![false; values.len()];
    for i in first.all().chain(last.all()) {
        mask[i] = true;
    }
    let tensors: Vec<_> = layers[1..layers.len() - 1]
        .iter()
        .flat_map(|l| [l.weights(), l.biases()])
        .collect();
    let prunable: usize = tensors.iter().map(|r| r.len()).sum();
    let spare = (budget - dense) as u128;
    for range in tensors {
        let size = range.len();
        let keep = if prunable == 0 {
            0
        } else {
            ((spare * size as u128 / prunable as u128) as usize).min(size)
        };
        for i in top_magnitudes(&values[range.clone()], keep) {
            mask[range.start + i] = true;
        }
    }

    let magnitudes = values
        .iter()
        .zip(&mask)
        .map(|(&v, &keep)| if keep { v } else { 0.0 })
        .collect();
    Ok(TrainedModel {
        arch: model.arch,
        magnitudes,
        gates: vec![1.0; values.len()],
        mask: Some(mask),
    })
}

/// Adam on the surviving parameters of a masked model; masked entries
/// receive zero gradient and stay exactly zero.
///
/// Uses `config.lr_weights`, `config.eval_every` and `config.target_bpp`
/// (for the feasibility flag).
pub fn finetune(
    model: &TrainedModel,
    dataset: &PixelDataset,
    steps: usize,
    config: &TrainConfig,
) -> Result<(TrainedModel, MetricsLog)> {
    if model.mask.is_none() {
        return Err(Error::InvalidConfig(
            "fine-tuning expects a masked model".into(),
        ));
    }
    let mut model = model.clone();
    let log = fit_dense(
        &mut model,
        dataset,
        steps,
        config.lr_weights,
        config.eval_every,
        config.target_bpp,
        &Instant::now(),
    )?;
    Ok((model, log))
}

/// Dense training at the initial architecture for `config.steps`, pruning to
/// the target, then fine-tuning for another `config.steps`.
///
/// The log covers both phases; fine-tuning records are shifted by
/// `config.steps`, so two records share that step number: the last dense
/// checkpoint and the freshly pruned model.
pub fn train_mp(
    config: &TrainConfig,
    dataset: &PixelDataset,
) -> Result<(TrainedModel, MetricsLog)> {
    if config.method != Method::Mp {
        return Err(Error::InvalidConfig(format!(
            "train_mp called with method {}",
            config.method
        )));
    }
    config.validate(dataset.pixel_count())?;
    let clock = Instant::now();
    let mut dense = TrainedModel::dense(init_siren(config.arch, config.seed, 1.0)?);
    let mut log = fit_dense(
        &mut dense,
        dataset,
        config.steps,
        config.lr_weights,
        config.eval_every,
        config.target_bpp,
        &clock,
    )?;
    let target = config.target_bpp.unwrap_or_default();
    let mut model = magnitude_prune(&dense, target, dataset.pixel_count())?;
    let tuned = fit_dense(
        &mut model,
        dataset,
        config.steps,
        config.lr_weights,
        config.eval_every,
        config.target_bpp,
        &clock,
    )?;
    log.extend_shifted(tuned, config.steps);
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::siren::SirenConfig;

    #[test]
    fn top_magnitudes_orders_and_breaks_ties() {
        assert_eq!(top_magnitudes(&[0.5, -0.1, 0.3, -0.7], 2), vec![3, 0]);
        assert_eq!(top_magnitudes(&[0.2, -0.2, 0.2], 2), vec![0, 1]);
        assert!(top_magnitudes(&[1.0], 0).is_empty());
    }

    #[test]
    fn keep_budget_is_the_largest_fitting_count() {
        assert_eq!(keep_budget(7.0, 4096, 10_000), 1792);
        assert_eq!(keep_budget(0.0, 4096, 10_000), 0);
        assert_eq!(keep_budget(1e9, 4096, 300), 300);
        let pixels = 768 * 512;
        let dense = bits_per_pixel(7479, HALF_BITS, pixels);
        assert_eq!(keep_budget(dense, pixels, 7479), 7479);
    }

    #[test]
    fn single_tensor_example() {
        // 2-3x[2]-3: the middle layers are 2x2 weights + 2 biases each.
        let arch = SirenConfig::image(3, 2);
        let mut magnitudes = vec![1.0f32; arch.param_count()];
        let middle = arch.layers()[1];
        magnitudes[middle.weights()].copy_from_slice(&[0.5, -0.1, 0.3, -0.7]);
        let model = TrainedModel {
            arch,
            gates: vec![1.0; magnitudes.len()],
            magnitudes,
            mask: None,
        };
        // dense first+last = 6 + 9 = 15; prunable = 2 * (4 + 2) = 12;
        // budget 21 leaves 6 spare → keep half of each tensor
        let pixels = 16;
        let target = bits_per_pixel(21, HALF_BITS, pixels);
        let pruned = magnitude_prune(&model, target, pixels).unwrap();
        assert_eq!(&pruned.magnitudes[middle.weights()], &[0.5, 0.0, 0.0, -0.7]);
        assert_eq!(pruned.casted_bpp(pixels).active_params, 15 + 2 + 1 + 2 + 1);
    }

    #[test]
    fn budget_below_outer_layers_is_rejected() {
        let arch = SirenConfig::image(3, 4);
        let model = TrainedModel::dense(init_siren(arch, 0, 1.0).unwrap());
        // outer layers: 12 + 15 = 27 params
        let err = magnitude_prune(&model, bits_per_pixel(26, HALF_BITS, 64), 64).unwrap_err();
        assert!(matches!(
            err,
            Error::BudgetTooSmall {
                budget: 26,
                dense: 27
            }
        ));
    }

    #[test]
    fn pruning_requires_a_dense_model() {
        let arch = SirenConfig::image(2, 4);
        let mut model = TrainedModel::dense(init_siren(arch, 0, 1.0).unwrap());
        model.mask = Some(vec![true; arch.param_count()]);
        assert!(magnitude_prune(&model, 100.0, 64).is_err());
    }
}
