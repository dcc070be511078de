//! Compares the three methods on a small image at one budget.
//!
//! ```text
//! cargo run --release --example desk_comparison -- [IMAGE] [TARGET_BPP] [STEPS] [DUAL_LR] [METHODS]
//! ```

use std::time::Instant;

use sparse_inr::imageio::load_image;
use sparse_inr::trainer::{train, TrainConfig};
use sparse_inr::{Method, SirenConfig};

fn main() -> sparse_inr::Result<()> {
    let mut args = std::env::args().skip(1);
    let image = args.next().unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/astronaut_64.png").into()
    });
    let target: f64 = args.next().map_or(7.0, |s| s.parse().expect("target BPP"));
    let steps: usize = args.next().map_or(5000, |s| s.parse().expect("step count"));
    let dual_lr: Option<f64> = args.next().map(|s| s.parse().expect("dual learning rate"));
    let methods = args.next().unwrap_or_else(|| "loonie,mp,coin".into());
    let dataset = load_image(&image)?;
    let initial = SirenConfig::image(5, 30);

    let runs = [
        TrainConfig::loonie(initial, target),
        TrainConfig::mp(initial, target),
        TrainConfig::coin(SirenConfig::image(5, 20)),
    ];
    println!("method  arch        first_psnr  final_psnr  best_feasible  final_bpp  seconds");
    for mut config in runs {
        if !methods.split(',').any(|m| m == config.method.to_string()) {
            continue;
        }
        config.steps = steps;
        if let Some(lr) = dual_lr {
            config.lr_dual = lr;
        }
        let clock = Instant::now();
        let (model, log) = train(&config, &dataset)?;
        let first = log.records.first().map_or(f64::NAN, |r| r.psnr_f16);
        let last = log.last().map_or(f64::NAN, |r| r.psnr_f16);
        println!(
            "{:<7} {:<11} {first:>10.3} {last:>11.3} {:>14.3} {:>10.4} {:>8.1}",
            config.method.to_string(),
            config.arch.to_string(),
            log.best_feasible_psnr().unwrap_or(f64::NAN),
            model.casted_bpp(dataset.pixel_count()).bpp,
            clock.elapsed().as_secs_f64()
        );
        if config.method == Method::Loonie {
            let trace = &log.dual_trace;
            let peak = trace.iter().map(|d| d.lambda_after).fold(0.0, f64::max);
            let first_feasible = trace.iter().find(|d| d.violation <= 0.0).map(|d| d.step);
            println!("        peak lambda {peak:.4}, first feasible step {first_feasible:?}");
        }
    }
    Ok(())
}
