//! Encodes a sparse model to `.l0ne` bytes, decodes it, checks the bytes
//! survive a second round and renders it at twice the training resolution.
//!
//! ```text
//! cargo run --release --example codec_roundtrip -- [IMAGE] [STEPS]
//! ```

use sparse_inr::codec::{decode, decompress_to_image, encode, size_report};
use sparse_inr::imageio::{load_image, psnr_rgb8, save_rgb8};
use sparse_inr::trainer::{train, TrainConfig};
use sparse_inr::SirenConfig;

fn main() -> sparse_inr::Result<()> {
    let mut args = std::env::args().skip(1);
    let image = args.next().unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/astronaut_64.png").into()
    });
    let steps = args.next().map_or(1500, |s| s.parse().expect("step count"));
    let dataset = load_image(&image)?;
    let (h, w) = (dataset.height, dataset.width);

    let config = TrainConfig {
        steps,
        ..TrainConfig::mp(SirenConfig::image(5, 30), 7.0)
    };
    let (model, log) = train(&config, &dataset)?;

    let bytes = encode(&model, h, w)?;
    let (decoded, dims) = decode(&bytes)?;
    assert_eq!(dims, (h, w));
    assert_eq!(
        encode(&decoded, h, w)?,
        bytes,
        "re-encoding is byte-identical"
    );

    let report = size_report(&decoded, h, w);
    println!(
        "{} bytes: header {}, mask {}, payload {} ({} active parameters)",
        report.total_bytes,
        report.header_bytes,
        report.mask_bytes,
        report.payload_bytes,
        report.active_params
    );
    println!(
        "payload {:.4} BPP, whole file {:.4} BPP",
        report.payload_bpp, report.file_bpp
    );

    let rgb = decompress_to_image(&decoded, h, w)?;
    let psnr = psnr_rgb8(&dataset.to_rgb8(), &rgb)?;
    println!(
        "decompressed PSNR {psnr:.4} dB (trainer logged {:.4} dB)",
        log.last().map_or(f64::NAN, |r| r.psnr_f16)
    );

    let (h2, w2) = (2 * h, 2 * w);
    save_rgb8(
        &decompress_to_image(&decoded, h2, w2)?,
        h2,
        w2,
        "upsampled.png",
    )?;
    println!("wrote upsampled.png at {h2}x{w2}");
    Ok(())
}
