//! Sparsifies a network during training so that it meets a BPP budget,
//! printing the multiplier and the exact BPP as training proceeds.
//!
//! ```text
//! cargo run --release --example constrained_sparsify -- [IMAGE] [TARGET_BPP] [STEPS] [DUAL_LR]
//! ```

use sparse_inr::imageio::load_image;
use sparse_inr::trainer::{train_loonie, TrainConfig};
use sparse_inr::SirenConfig;

fn main() -> sparse_inr::Result<()> {
    let mut args = std::env::args().skip(1);
    let image = args.next().unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/astronaut_64.png").into()
    });
    let target: f64 = args.next().map_or(7.0, |s| s.parse().expect("target BPP"));
    let steps = args.next().map_or(5000, |s| s.parse().expect("step count"));
    // small images see large violations; the full-size default of 1e-3 overshoots
    let lr_dual = args
        .next()
        .map_or(3e-6, |s| s.parse().expect("dual learning rate"));

    let dataset = load_image(&image)?;
    let config = TrainConfig {
        steps,
        lr_dual,
        eval_every: 250,
        ..TrainConfig::loonie(SirenConfig::image(5, 30), target)
    };
    let (model, log) = train_loonie(&config, &dataset)?;
    println!("  step   bpp      expected   lambda     psnr");
    for r in &log.records {
        println!(
            "{:>6}  {:>7.4}  {:>8.4}  {:>9.2e}  {:>6.2}{}",
            r.step,
            r.bpp,
            r.expected_bpp,
            r.lambda,
            r.psnr_f16,
            if r.feasible { "  feasible" } else { "" }
        );
    }
    let bpp = model.casted_bpp(dataset.pixel_count());
    println!(
        "final: {} of {} parameters active, {:.4} BPP (target {target}), best feasible PSNR {:?}",
        bpp.active_params,
        config.arch.param_count(),
        bpp.bpp,
        log.best_feasible_psnr()
    );
    Ok(())
}
