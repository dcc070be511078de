//! Fits a dense network to an image and writes the reconstruction.
//!
//! ```text
//! cargo run --release --example fit_coin -- [IMAGE] [ARCH] [STEPS] [OUT.png]
//! ```

use sparse_inr::imageio::{load_image, save_rgb8};
use sparse_inr::trainer::{reconstruct_rgb8, train, TrainConfig};
use sparse_inr::SirenConfig;

fn main() -> sparse_inr::Result<()> {
    let mut args = std::env::args().skip(1);
    let image = args.next().unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/astronaut_64.png").into()
    });
    let arch: SirenConfig = args.next().as_deref().unwrap_or("5x20").parse()?;
    let steps = args.next().map_or(2000, |s| s.parse().expect("step count"));
    let out = args.next().unwrap_or_else(|| "coin.png".into());

    let dataset = load_image(&image)?;
    let config = TrainConfig {
        steps,
        ..TrainConfig::coin(arch)
    };
    let (model, log) = train(&config, &dataset)?;
    for r in log.records.iter().step_by((log.records.len() / 10).max(1)) {
        println!(
            "step {:>6}  loss {:.6}  psnr {:.2} dB",
            r.step, r.loss, r.psnr_f16
        );
    }
    let rgb = reconstruct_rgb8(&model.decoded(), &dataset.coords)?;
    save_rgb8(&rgb, dataset.height, dataset.width, &out)?;
    let bpp = model.casted_bpp(dataset.pixel_count());
    println!(
        "{arch}: {} parameters, {:.4} BPP, wrote {out}",
        bpp.active_params, bpp.bpp
    );
    Ok(())
}
