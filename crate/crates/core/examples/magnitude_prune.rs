//! Trains dense, prunes the smallest weights to a BPP budget and fine-tunes.
//!
//! ```text
//! cargo run --release --example magnitude_prune -- [IMAGE] [TARGET_BPP] [STEPS]
//! ```

use sparse_inr::imageio::load_image;
use sparse_inr::siren::init_siren;
use sparse_inr::trainer::{evaluate, finetune, magnitude_prune, train, TrainConfig, TrainedModel};
use sparse_inr::SirenConfig;

fn main() -> sparse_inr::Result<()> {
    let mut args = std::env::args().skip(1);
    let image = args.next().unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/astronaut_64.png").into()
    });
    let target: f64 = args.next().map_or(7.0, |s| s.parse().expect("target BPP"));
    let steps = args.next().map_or(2000, |s| s.parse().expect("step count"));
    let dataset = load_image(&image)?;
    let arch = SirenConfig::image(5, 30);

    // the two phases by hand; `train` with an mp config does the same in one call
    let coin = TrainConfig {
        steps,
        ..TrainConfig::coin(arch)
    };
    let (dense, _) = train(&coin, &dataset)?;
    let pruned = magnitude_prune(&dense, target, dataset.pixel_count())?;
    let mp = TrainConfig {
        steps,
        ..TrainConfig::mp(arch, target)
    };
    let (tuned, _) = finetune(&pruned, &dataset, steps, &mp)?;

    let show = |name: &str, model: &TrainedModel| -> sparse_inr::Result<()> {
        let e = evaluate(model, &dataset)?;
        println!(
            "{name:<10} {:>6.2} dB  {:>7.4} BPP  {:>5} active",
            e.psnr_f16, e.bpp.bpp, e.bpp.active_params
        );
        Ok(())
    };
    show("init", &TrainedModel::dense(init_siren(arch, 0, 1.0)?))?;
    show("dense", &dense)?;
    show("pruned", &pruned)?;
    show("fine-tuned", &tuned)?;

    let layers = arch.layers();
    let mask = tuned.mask.as_ref().expect("pruned models carry a mask");
    for (k, layer) in layers.iter().enumerate() {
        let kept = layer.all().filter(|&i| mask[i]).count();
        println!("layer {k}: kept {kept}/{}", layer.all().len());
    }
    Ok(())
}
